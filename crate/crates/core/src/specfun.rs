//! Chi-tail integrals and the upper incomplete gamma function.
//!
//! Everything in the bound and weight computations reduces to three tail
//! integrals of the chi density kernel `u^{k-1} e^{-u^2/2}` past a threshold
//! `z`:
//!
//! * `mass(z)   = ∫_z^∞ u^{k-1} e^{-u²/2} du`
//! * `first(z)  = ∫_z^∞ (u - z) u^{k-1} e^{-u²/2} du`
//! * `second(z) = ∫_z^∞ (u - z)² u^{k-1} e^{-u²/2} du`  (often written φ_B)
//!
//! For small `z` these are assembled from upper incomplete gamma values
//! (substitute `v = u²/2`). For `z >= 2` that expansion cancels badly, so the
//! integrals are instead written as `e^{-z²/2} z^{k-1} Σ_i C(k-1,i) z^{-i} P_{i+j}(z)`
//! with `P_m(z) = ∫_0^∞ s^m e^{-zs - s²/2} ds`; every term is positive and the
//! ratios `P_m / P_{m-1}` come from a backward continued-fraction recurrence.

use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};

/// Largest supported block size.
pub const MAX_BLOCK_SIZE: usize = 128;

const MAX_ITER: usize = 1000;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;
/// Below this threshold the incomplete-gamma expansion is used.
const EXPANSION_LIMIT: f64 = 2.0;
/// Extra depth of the backward ratio recurrence.
const RATIO_DEPTH: usize = 200;

/// The three chi-tail integrals at a common threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailMoments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
}

/// Upper incomplete gamma `Γ(a, x) = ∫_x^∞ u^{a-1} e^{-u} du` (not regularized).
pub fn gamma_upper(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("gamma_upper: a = {a} must be positive")));
    }
    if !(x >= 0.0) {
        return Err(invalid(format!("gamma_upper: x = {x} must be nonnegative")));
    }
    Ok(gamma_upper_unchecked(a, x))
}

pub(crate) fn gamma_upper_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return gamma(a);
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x;
    if x < a + 1.0 {
        // series for the lower function, then complement
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        gamma(a) - log_prefactor.exp() * sum
    } else {
        // modified Lentz evaluation of the continued fraction
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        log_prefactor.exp() * h
    }
}

/// `∫_z^∞ u^j e^{-u²/2} du` for `j >= 0`.
pub fn chi_moment_tail(j: usize, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(invalid(format!("z = {z} must be nonnegative")));
    }
    Ok(moment_tail(j, z))
}

fn moment_tail(j: usize, z: f64) -> f64 {
    let a = (j as f64 + 1.0) / 2.0;
    2f64.powf((j as f64 - 1.0) / 2.0) * gamma_upper_unchecked(a, 0.5 * z * z)
}

/// Normalizer of the chi density with `k` degrees of freedom,
/// `2^{k/2-1} Γ(k/2) = ∫_0^∞ u^{k-1} e^{-u²/2} du`.
pub fn chi_normalizer(k: usize) -> f64 {
    let k = k as f64;
    2f64.powf(k / 2.0 - 1.0) * gamma(k / 2.0)
}

fn check_args(z: f64, k: usize) -> Result<()> {
    if !(1..=MAX_BLOCK_SIZE).contains(&k) {
        return Err(invalid(format!("block size k = {k} outside [1, {MAX_BLOCK_SIZE}]")));
    }
    if !(z >= 0.0) {
        return Err(invalid(format!("z = {z} must be nonnegative")));
    }
    Ok(())
}

/// All three tail integrals at threshold `z` for block size `k`.
pub fn tail_moments(z: f64, k: usize) -> Result<TailMoments> {
    check_args(z, k)?;
    Ok(tail_moments_unchecked(z, k))
}

pub(crate) fn tail_moments_unchecked(z: f64, k: usize) -> TailMoments {
    if z.is_infinite() {
        return TailMoments { mass: 0.0, first: 0.0, second: 0.0 };
    }
    if z < EXPANSION_LIMIT {
        tail_moments_expansion(z, k)
    } else {
        tail_moments_ratio(z, k)
    }
}

fn tail_moments_expansion(z: f64, k: usize) -> TailMoments {
    let mass = moment_tail(k - 1, z);
    let t_k = moment_tail(k, z);
    // T_{k+1} = k T_{k-1} + z^k e^{-z²/2}
    let t_k1 = k as f64 * mass + (k as f64 * z.ln() - 0.5 * z * z).exp();
    let t_k1 = if z == 0.0 { k as f64 * mass } else { t_k1 };
    let first = (t_k - z * mass).max(0.0);
    let second = (t_k1 - 2.0 * z * t_k + z * z * mass).max(0.0);
    TailMoments { mass, first, second }
}

fn tail_moments_ratio(z: f64, k: usize) -> TailMoments {
    let top = k + 1;
    // ratios[m] = P_m / P_{m-1}
    let mut ratios = vec![0.0; top + 1];
    let mut r = 0.0;
    for m in (1..=top + RATIO_DEPTH).rev() {
        r = m as f64 / (z + r);
        if m <= top {
            ratios[m] = r;
        }
    }
    let mut p = Vec::with_capacity(top + 1);
    p.push(1.0 / (z + ratios[1]));
    for m in 1..=top {
        let prev = p[m - 1];
        p.push(prev * ratios[m]);
    }

    let mut binom = 1.0;
    let mut zpow = 1.0;
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let c = binom * zpow;
        s0 += c * p[i];
        s1 += c * p[i + 1];
        s2 += c * p[i + 2];
        binom *= (k - 1 - i) as f64 / (i + 1) as f64;
        zpow /= z;
    }
    let prefactor = ((k as f64 - 1.0) * z.ln() - 0.5 * z * z).exp();
    TailMoments {
        mass: prefactor * s0,
        first: prefactor * s1,
        second: prefactor * s2,
    }
}

/// Quadratic tail integral `φ_B(z) = ∫_z^∞ (u - z)² u^{k-1} e^{-u²/2} du`.
pub fn phi_b(z: f64, k: usize) -> Result<f64> {
    Ok(tail_moments(z, k)?.second)
}

/// First-moment tail `∫_z^∞ (u - z) u^{k-1} e^{-u²/2} du`.
pub fn m1_tail(z: f64, k: usize) -> Result<f64> {
    Ok(tail_moments(z, k)?.first)
}

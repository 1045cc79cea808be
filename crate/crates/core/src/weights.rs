//! Optimal set weights for the weighted ℓ₁,₂ program and their sensitivity to
//! the accuracies `alpha`.
//!
//! The optimal weight of a set with accuracy `alpha` is the root of
//!
//! ```text
//! g(ω) = alpha ω - (1 - alpha) / c_k ∫_ω^∞ (u - ω) u^{k-1} e^{-u²/2} du,   c_k = 2^{k/2-1} Γ(k/2)
//! ```
//!
//! It depends on `alpha` and `k` only. `g` is strictly increasing with
//! `g(0) < 0` for `alpha < 1`, so the root is bracketed and unique.

use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::model::PriorPartition;
use crate::specfun::{chi_normalizer, gamma_upper_unchecked, tail_moments_unchecked, MAX_BLOCK_SIZE};

const BISECTION_WIDTH: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 100;
const RESIDUAL_TARGET: f64 = 1e-14;

/// Residual `g(ω)` of the optimal-weight equation.
pub fn weight_equation_residual(omega: f64, alpha: f64, k: usize) -> f64 {
    let tails = tail_moments_unchecked(omega, k);
    alpha * omega - (1.0 - alpha) * tails.first / chi_normalizer(k)
}

fn check_k(k: usize) -> Result<()> {
    if !(1..=MAX_BLOCK_SIZE).contains(&k) {
        return Err(invalid(format!("block size k = {k} outside [1, {MAX_BLOCK_SIZE}]")));
    }
    Ok(())
}

/// Optimal weight for one set.
///
/// `alpha = 1` gives 0. `alpha = 0` has no finite root and is reported as
/// [`Error::UnboundedWeight`] (set index 0).
pub fn optimal_weight(alpha: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if alpha.is_nan() || !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1]")));
    }
    if alpha == 0.0 {
        return Err(Error::UnboundedWeight { set: 0 });
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let norm = chi_normalizer(k);
    let g = |w: f64| {
        let tails = tail_moments_unchecked(w, k);
        (
            alpha * w - (1.0 - alpha) * tails.first / norm,
            alpha + (1.0 - alpha) * tails.mass / norm,
        )
    };

    // first(ω) <= first(0), so g(hi) > 0 here
    let mut lo = 0.0;
    let mut hi = (1.0 - alpha) / alpha * tail_moments_unchecked(0.0, k).first / norm + 1.0;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if g(mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut w = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let (value, slope) = g(w);
        if value.abs() <= RESIDUAL_TARGET * (1.0 + alpha * w) {
            break;
        }
        if value < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let next = w - value / slope;
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if next == w {
            break;
        }
        w = next;
    }
    Ok(w)
}

/// Handling of sets whose accuracy is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightOptions {
    /// Finite weight to use for `alpha = 0` sets; `None` rejects them.
    pub zero_accuracy_cap: Option<f64>,
}

/// Per-set optimal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalWeights {
    /// Roots of the weight equation.
    pub omega_raw: Vec<f64>,
    /// `omega_raw` scaled so that its largest component is 1 (all zeros when
    /// every set has `alpha = 1`).
    pub omega_normalized: Vec<f64>,
    pub k: usize,
    pub alpha: Vec<f64>,
}

pub fn optimal_weights(partition: &PriorPartition, k: usize) -> Result<OptimalWeights> {
    optimal_weights_for(partition.alpha(), k, WeightOptions::default())
}

pub fn optimal_weights_for(alpha: &[f64], k: usize, options: WeightOptions) -> Result<OptimalWeights> {
    if alpha.is_empty() {
        return Err(invalid("at least one set is required"));
    }
    let omega_raw = alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| match optimal_weight(a, k) {
            Err(Error::UnboundedWeight { .. }) => match options.zero_accuracy_cap {
                Some(cap) if cap > 0.0 && cap.is_finite() => Ok(cap),
                Some(cap) => Err(invalid(format!("zero-accuracy cap {cap} must be positive"))),
                None => Err(Error::UnboundedWeight { set: i }),
            },
            other => other,
        })
        .collect::<Result<Vec<_>>>()?;
    let max = omega_raw.iter().cloned().fold(0.0, f64::max);
    let omega_normalized = if max > 0.0 {
        omega_raw.iter().map(|w| w / max).collect()
    } else {
        vec![0.0; omega_raw.len()]
    };
    Ok(OptimalWeights { omega_raw, omega_normalized, k, alpha: alpha.to_vec() })
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Sensitivity `c(k, alpha) = |dω/dalpha|` of the optimal weight.
///
/// With `h` the optimal weight, `x = h²/2`, `G = Γ(k/2)`,
/// `Γ_k = Γ(k/2, x)` and `Γ_{k+1} = Γ((k+1)/2, x)`:
///
/// ```text
/// c = (√2 Γ_{k+1} + h (G - Γ_k))² / (√2 G Γ_{k+1})
/// ```
pub fn sensitivity_c(alpha: f64, k: usize) -> Result<f64> {
    check_open_alpha(alpha)?;
    let h = optimal_weight(alpha, k)?;
    let x = 0.5 * h * h;
    let kf = k as f64;
    let full = gamma(kf / 2.0);
    let upper_k = gamma_upper_unchecked(kf / 2.0, x);
    let upper_k1 = gamma_upper_unchecked((kf + 1.0) / 2.0, x);
    if upper_k1 <= 0.0 {
        return Err(Error::Numerical(format!("tail underflow at alpha = {alpha}")));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let num = sqrt2 * upper_k1 + h * (full - upper_k);
    Ok(num * num / (sqrt2 * full * upper_k1))
}

/// `|dω/dalpha|` from implicit differentiation of the weight equation at a
/// given root `omega`:
/// `(ω + first(ω)/c_k) / (alpha + (1 - alpha) mass(ω)/c_k)`.
pub fn sensitivity_implicit(omega: f64, alpha: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if !(omega >= 0.0) {
        return Err(invalid(format!("omega = {omega} must be nonnegative")));
    }
    let norm = chi_normalizer(k);
    let tails = tail_moments_unchecked(omega, k);
    Ok((omega + tails.first / norm) / (alpha + (1.0 - alpha) * tails.mass / norm))
}

/// The variant of [`sensitivity_c`] that uses `Γ(k/2, x)` where the first
/// moment needs `Γ((k+1)/2, x)`:
///
/// ```text
/// (√2 h (G - Γ_k) + 2 Γ_k)² / (2√2 G Γ_k)
/// ```
///
/// It is not the derivative of the optimal weight (it tends to √2 as
/// `alpha → 1` for every `k`); it is kept so tables can show both.
pub fn sensitivity_c_unshifted(alpha: f64, k: usize) -> Result<f64> {
    check_open_alpha(alpha)?;
    let h = optimal_weight(alpha, k)?;
    let x = 0.5 * h * h;
    let kf = k as f64;
    let full = gamma(kf / 2.0);
    let upper_k = gamma_upper_unchecked(kf / 2.0, x);
    if upper_k <= 0.0 {
        return Err(Error::Numerical(format!("tail underflow at alpha = {alpha}")));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let num = sqrt2 * h * (full - upper_k) + 2.0 * upper_k;
    Ok(num * num / (2.0 * sqrt2 * full * upper_k))
}

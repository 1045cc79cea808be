//! Upper bounds on the normalized statistical dimension of the descent cone of
//! the (weighted) ℓ₁,₂ norm, their tightness bands, and the measurement count
//! for a prescribed failure probability.
//!
//! All bounds are normalized per block: multiply by `q` to get a number of
//! measurements.

use crate::error::{invalid, Error, Result};
use crate::specfun::{chi_normalizer, tail_moments_unchecked, MAX_BLOCK_SIZE};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const NEWTON_MAX_ITER: usize = 200;
const BRACKET_DOUBLINGS: usize = 60;
const SUM_TOLERANCE: f64 = 1e-9;

/// A minimized bound together with its tightness band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEvaluation {
    /// Normalized bound (measurements per block), in `[0, k]`.
    pub m_hat: f64,
    /// Minimizing dilation; infinite when the infimum is only approached.
    pub t_star: f64,
    pub band_low: f64,
    pub band_high: f64,
}

impl BoundEvaluation {
    fn with_error(m_hat: f64, t_star: f64, err: f64) -> Self {
        Self { m_hat, t_star, band_low: m_hat - err, band_high: m_hat }
    }

    /// `(q m̂, q band_low, q band_high)` in measurements.
    pub fn measurements(&self, q: usize) -> (f64, f64, f64) {
        let q = q as f64;
        (q * self.m_hat, q * self.band_low, q * self.band_high)
    }
}

fn check_k(k: usize) -> Result<()> {
    if !(1..=MAX_BLOCK_SIZE).contains(&k) {
        return Err(invalid(format!("block size k = {k} outside [1, {MAX_BLOCK_SIZE}]")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Contribution of one set: value and first two derivatives in `t` of
/// `alpha (k + t² ω²) + (1 - alpha) φ_B(t ω) / c_k`.
#[derive(Debug, Clone, Copy)]
struct SetTerm {
    alpha: f64,
    weight: f64,
}

impl SetTerm {
    fn eval(&self, k: usize, norm: f64, t: f64) -> (f64, f64, f64) {
        let SetTerm { alpha, weight: w } = *self;
        let kf = k as f64;
        let z = t * w;
        let tails = tail_moments_unchecked(z, k);
        let value = alpha * (kf + z * z) + (1.0 - alpha) * tails.second / norm;
        let d1 = 2.0 * alpha * z * w - 2.0 * (1.0 - alpha) * w * tails.first / norm;
        let d2 = 2.0 * alpha * w * w + 2.0 * (1.0 - alpha) * w * w * tails.mass / norm;
        (value, d1, d2)
    }
}

/// Weighted objective `Σ rho_i (alpha_i (k + t² ω_i²) + (1 - alpha_i) φ_B(t ω_i) / c_k)`
/// and its first two `t` derivatives.
struct WeightedPsi<'a> {
    rho: &'a [f64],
    terms: Vec<SetTerm>,
    k: usize,
    norm: f64,
}

impl<'a> WeightedPsi<'a> {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        self.rho.iter().zip(&self.terms).fold((0.0, 0.0, 0.0), |acc, (r, term)| {
            let (v, d1, d2) = term.eval(self.k, self.norm, t);
            (acc.0 + r * v, acc.1 + r * d1, acc.2 + r * d2)
        })
    }

    fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}

/// Finds the root of the derivative of a convex function on `[0, ∞)`.
/// Returns `None` when the derivative stays negative over every bracket tried.
fn minimize_convex(eval: impl Fn(f64) -> (f64, f64, f64), hi_start: f64) -> Option<f64> {
    let mut lo = 0.0;
    if eval(lo).1 >= 0.0 {
        return Some(0.0);
    }
    let mut hi = hi_start;
    let mut doublings = 0;
    while eval(hi).1 < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > BRACKET_DOUBLINGS {
            return None;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let (_, d1, d2) = eval(t);
        if d1 == 0.0 {
            return Some(t);
        }
        if d1 < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - d1 / d2;
        let next = if d2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 1e-15 * t.max(1.0) || hi - lo <= 1e-15 * hi.max(1.0) {
            return Some(next);
        }
        t = next;
    }
    Some(t)
}

/// `Ψ_t(σ) = σ (k + t²) + (1 - σ) φ_B(t) / (2^{k/2-1} Γ(k/2))`.
pub fn psi_t(sigma: f64, k: usize, t: f64) -> Result<f64> {
    check_unit("sigma", sigma)?;
    check_k(k)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("t = {t} must be nonnegative")));
    }
    let term = SetTerm { alpha: sigma, weight: 1.0 };
    Ok(term.eval(k, chi_normalizer(k), t).0)
}

/// Bound for the unweighted program: `inf_t Ψ_t(σ)`, with the band
/// `[m̂ - 2/√(s q), m̂]` where `s = round(σ q)` (no band when `s = 0`).
pub fn m_hat_qs(sigma: f64, k: usize, q: usize) -> Result<BoundEvaluation> {
    check_unit("sigma", sigma)?;
    check_k(k)?;
    let s = (sigma * q as f64).round();
    let err = if s >= 1.0 { 2.0 / (s * q as f64).sqrt() } else { 0.0 };
    if sigma == 0.0 {
        return Ok(BoundEvaluation::with_error(0.0, f64::INFINITY, err));
    }
    if sigma == 1.0 {
        return Ok(BoundEvaluation::with_error(k as f64, 0.0, err));
    }
    let rho = [1.0];
    let psi = WeightedPsi {
        rho: &rho,
        terms: vec![SetTerm { alpha: sigma, weight: 1.0 }],
        k,
        norm: chi_normalizer(k),
    };
    let t = minimize_convex(|t| psi.eval(t), 10.0 * (k as f64).sqrt())
        .ok_or_else(|| Error::Numerical("no interior minimizer for the unweighted bound".into()))?;
    Ok(BoundEvaluation::with_error(psi.value(t), t, err))
}

fn check_sets(alpha: &[f64], rho: &[f64], omega: Option<&[f64]>) -> Result<()> {
    if rho.len() != alpha.len() {
        return Err(Error::DimensionMismatch { what: "rho", expected: alpha.len(), actual: rho.len() });
    }
    if alpha.is_empty() {
        return Err(invalid("at least one set is required"));
    }
    if let Some(omega) = omega {
        if omega.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                what: "omega",
                expected: alpha.len(),
                actual: omega.len(),
            });
        }
        if let Some(w) = omega.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(invalid(format!("weight {w} must be finite and nonnegative")));
        }
    }
    for (&a, &r) in alpha.iter().zip(rho) {
        check_unit("alpha", a)?;
        if !(r > 0.0 && r <= 1.0) {
            return Err(invalid(format!("rho = {r} outside (0, 1]")));
        }
    }
    let total: f64 = rho.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(invalid(format!("rho sums to {total}, expected 1")));
    }
    Ok(())
}

fn weighted_psi<'a>(alpha: &[f64], rho: &'a [f64], k: usize, omega: &[f64]) -> WeightedPsi<'a> {
    WeightedPsi {
        rho,
        terms: alpha
            .iter()
            .zip(omega)
            .map(|(&alpha, &weight)| SetTerm { alpha, weight })
            .collect(),
        k,
        norm: chi_normalizer(k),
    }
}

/// `Ψ_{t,w} = Σ rho_i (alpha_i (k + t² ω_i²) + (1 - alpha_i) φ_B(t ω_i) / c_k)`.
pub fn psi_t_weighted(alpha: &[f64], rho: &[f64], k: usize, t: f64, omega: &[f64]) -> Result<f64> {
    check_sets(alpha, rho, Some(omega))?;
    check_k(k)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("t = {t} must be nonnegative")));
    }
    Ok(weighted_psi(alpha, rho, k, omega).value(t))
}

/// Bound for the weighted program with set weights `omega`: `inf_t Ψ_{t,w}`,
/// with band `[m̂ - 2/√(q L), m̂]`.
pub fn m_hat_qsw(
    alpha: &[f64],
    rho: &[f64],
    k: usize,
    omega: &[f64],
    q: usize,
) -> Result<BoundEvaluation> {
    check_sets(alpha, rho, Some(omega))?;
    check_k(k)?;
    let err = 2.0 / ((q * alpha.len()) as f64).sqrt();
    let psi = weighted_psi(alpha, rho, k, omega);

    // Sets with zero weight contribute rho_i k whatever t is; if none of the
    // weighted sets carries support, the infimum sits at t → ∞.
    let weighted_support: f64 = alpha
        .iter()
        .zip(rho)
        .zip(omega)
        .map(|((a, r), w)| r * a * w * w)
        .sum();
    let any_weight = omega.iter().any(|&w| w > 0.0);
    if any_weight && weighted_support == 0.0 {
        let tail: f64 = rho
            .iter()
            .zip(omega)
            .filter(|(_, &w)| w == 0.0)
            .map(|(r, _)| r * k as f64)
            .sum();
        return Ok(BoundEvaluation::with_error(tail, f64::INFINITY, err));
    }
    let w_max = omega.iter().cloned().fold(0.0, f64::max);
    let hi = if w_max > 0.0 { 10.0 * (k as f64).sqrt() / w_max } else { 1.0 };
    let t = minimize_convex(|t| psi.eval(t), hi)
        .ok_or_else(|| Error::Numerical("no interior minimizer for the weighted bound".into()))?;
    Ok(BoundEvaluation::with_error(psi.value(t), t, err))
}

/// Separable objective after the substitution `ν = t ω`:
/// `J_b(ν) = Σ rho_i (alpha_i (ν_i² + k) + (1 - alpha_i) φ_B(ν_i) / c_k)`.
pub fn j_b(nu: &[f64], alpha: &[f64], rho: &[f64], k: usize) -> Result<f64> {
    check_sets(alpha, rho, None)?;
    check_k(k)?;
    check_nu(nu, alpha.len())?;
    let norm = chi_normalizer(k);
    Ok(nu
        .iter()
        .zip(alpha)
        .zip(rho)
        .map(|((&v, &a), r)| r * SetTerm { alpha: a, weight: 1.0 }.eval(k, norm, v).0)
        .sum())
}

/// Gradient of [`j_b`] with respect to `ν`.
pub fn j_b_gradient(nu: &[f64], alpha: &[f64], rho: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sets(alpha, rho, None)?;
    check_k(k)?;
    check_nu(nu, alpha.len())?;
    let norm = chi_normalizer(k);
    Ok(nu
        .iter()
        .zip(alpha)
        .zip(rho)
        .map(|((&v, &a), r)| r * SetTerm { alpha: a, weight: 1.0 }.eval(k, norm, v).1)
        .collect())
}

fn check_nu(nu: &[f64], len: usize) -> Result<()> {
    if nu.len() != len {
        return Err(Error::DimensionMismatch { what: "nu", expected: len, actual: nu.len() });
    }
    if let Some(v) = nu.iter().find(|v| !(**v >= 0.0)) {
        return Err(invalid(format!("nu component {v} must be nonnegative")));
    }
    Ok(())
}

/// Minimizes [`j_b`] coordinate by coordinate with golden-section search.
///
/// Returns the minimizer and the minimum. Sets with `alpha_i = 0` have their
/// infimum at `ν_i → ∞` and contribute nothing.
pub fn minimize_j_b(alpha: &[f64], rho: &[f64], k: usize) -> Result<(Vec<f64>, f64)> {
    check_sets(alpha, rho, None)?;
    check_k(k)?;
    let norm = chi_normalizer(k);
    let mut nu = Vec::with_capacity(alpha.len());
    let mut total = 0.0;
    for (&a, &r) in alpha.iter().zip(rho) {
        if a == 0.0 {
            nu.push(f64::INFINITY);
            continue;
        }
        let term = SetTerm { alpha: a, weight: 1.0 };
        let f = |v: f64| term.eval(k, norm, v).0;
        let v = golden_section(f, 0.0, 10.0 * (k as f64).sqrt(), 1e-10);
        nu.push(v);
        total += r * f(v);
    }
    Ok((nu, total))
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Measurement counts around a statistical dimension `delta` for failure
/// probability `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementCount {
    /// `ceil(delta + radius)` clamped to `[1, n]`: enough for success with
    /// probability at least `1 - eta`.
    pub sufficient: usize,
    /// `delta - radius`: at or below this, success has probability at most `eta`.
    pub failure_threshold: f64,
    /// `√(8 log(4/eta) n)`.
    pub radius: f64,
}

pub fn required_measurements(delta: f64, n: usize, eta: f64) -> Result<MeasurementCount> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(format!("eta = {eta} outside (0, 1]")));
    }
    if !(delta >= 0.0 && delta <= n as f64) {
        return Err(invalid(format!("delta = {delta} outside [0, {n}]")));
    }
    let radius = transition_radius(n, eta);
    let sufficient = ((delta + radius).ceil() as usize).clamp(1, n.max(1));
    Ok(MeasurementCount { sufficient, failure_threshold: delta - radius, radius })
}

/// `√(8 log(4/eta) n)`; zero at `eta = 4`.
pub fn transition_radius(n: usize, eta: f64) -> f64 {
    (8.0 * (4.0 / eta).ln() * n as f64).sqrt()
}

//! Weighted ℓ₁,₂ minimization under an equality constraint:
//!
//! ```text
//! minimize  Σ_b w_b ‖z_b‖₂   subject to  A z = y
//! ```
//!
//! solved with Douglas–Rachford splitting between the group-norm prox (block
//! shrinkage) and the exact projection onto `{z : A z = y}`. The projection
//! uses a thin QR factorization of `Aᵀ` computed once per operator.
//!
//! With governing sequence `v`, one iteration is
//!
//! ```text
//! z = P(v);  x = shrink(2z - v, τ w);  v ← v + x - z
//! ```
//!
//! The fixed-point residual `‖x - z‖ = ‖v_{j+1} - v_j‖` is nonincreasing (the
//! iteration map is firmly nonexpansive); the objective itself need not be.
//! At a fixed point `(z - v)/τ` lies in the row space of `A` and in the
//! subdifferential at `z`, which gives a dual certificate for free.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{BlockStructure, MeasurementEnsemble};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    /// Prox step `τ`.
    pub step_parameter: f64,
    /// ℓ₂ distance to the ground truth that counts as exact recovery.
    pub success_threshold: f64,
    /// Tolerance of the certificate check attached to each outcome.
    pub certificate_tolerance: f64,
    /// Keep the per-iteration fixed-point residuals.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            primal_tolerance: 1e-9,
            dual_tolerance: 1e-9,
            step_parameter: 1.0,
            success_threshold: 1e-4,
            certificate_tolerance: 1e-6,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("primal_tolerance", self.primal_tolerance),
            ("dual_tolerance", self.dual_tolerance),
            ("step_parameter", self.step_parameter),
            ("success_threshold", self.success_threshold),
            ("certificate_tolerance", self.certificate_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} = {v} must be positive")));
            }
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Result of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub x_hat: DVector<f64>,
    pub iterations: usize,
    /// `‖A x̂ - y‖₂`.
    pub primal_residual: f64,
    /// `Σ_b w_b ‖x̂_b‖₂`.
    pub objective: f64,
    pub converged: bool,
    /// A dual certificate was found at `certificate_tolerance`.
    pub certified: bool,
    /// Fixed-point residuals, when requested.
    pub residual_trace: Vec<f64>,
}

impl RecoveryOutcome {
    pub fn error_to(&self, x: &DVector<f64>) -> f64 {
        (&self.x_hat - x).norm()
    }

    pub fn is_success(&self, x: &DVector<f64>, threshold: f64) -> bool {
        self.error_to(x) <= threshold
    }
}

fn check_weights(w: &[f64], structure: &BlockStructure) -> Result<()> {
    if w.len() != structure.q() {
        return Err(Error::DimensionMismatch {
            what: "block weights",
            expected: structure.q(),
            actual: w.len(),
        });
    }
    if let Some(v) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(invalid(format!("block weight {v} must be finite and nonnegative")));
    }
    Ok(())
}

fn block_norms<'a>(z: &'a [f64], k: usize) -> impl Iterator<Item = f64> + 'a {
    z.chunks_exact(k).map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `Σ_b w_b ‖z_b‖₂`.
pub fn weighted_group_norm(z: &DVector<f64>, w: &[f64], structure: &BlockStructure) -> Result<f64> {
    structure.check_len("z", z.len())?;
    check_weights(w, structure)?;
    Ok(block_norms(z.as_slice(), structure.k()).zip(w).map(|(n, w)| w * n).sum())
}

/// Dual norm `max_b ‖z_b‖₂ / w_b`; infinite when a zero-weight block is nonzero.
pub fn dual_group_norm(z: &DVector<f64>, w: &[f64], structure: &BlockStructure) -> Result<f64> {
    structure.check_len("z", z.len())?;
    check_weights(w, structure)?;
    Ok(block_norms(z.as_slice(), structure.k())
        .zip(w)
        .map(|(n, &w)| {
            if n == 0.0 {
                0.0
            } else if w == 0.0 {
                f64::INFINITY
            } else {
                n / w
            }
        })
        .fold(0.0, f64::max))
}

fn shrink_in_place(v: &mut [f64], tau: f64, w: &[f64], k: usize) {
    for (block, &wb) in v.chunks_exact_mut(k).zip(w) {
        if wb == 0.0 {
            continue;
        }
        let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        let threshold = tau * wb;
        if norm <= threshold {
            block.iter_mut().for_each(|x| *x = 0.0);
        } else {
            let scale = 1.0 - threshold / norm;
            block.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

/// Proximal map of `tau ‖·‖₁,₂,w`: each block is scaled by
/// `max(0, 1 - tau w_b / ‖v_b‖₂)`.
pub fn block_shrink(
    v: &DVector<f64>,
    tau: f64,
    w: &[f64],
    structure: &BlockStructure,
) -> Result<DVector<f64>> {
    structure.check_len("v", v.len())?;
    check_weights(w, structure)?;
    if !(tau > 0.0) {
        return Err(invalid(format!("tau = {tau} must be positive")));
    }
    let mut out = v.clone();
    shrink_in_place(out.as_mut_slice(), tau, w, structure.k());
    Ok(out)
}

/// Orthogonal projection onto `{z : A z = y}` from a thin QR of `Aᵀ`.
#[derive(Debug, Clone)]
pub struct AffineProjector {
    basis: DMatrix<f64>,
    particular: DVector<f64>,
}

impl AffineProjector {
    pub fn new(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if y.len() != m {
            return Err(Error::DimensionMismatch { what: "observations", expected: m, actual: y.len() });
        }
        if m == 0 || m > n {
            return Err(invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
        }
        let qr = a.transpose().qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let diag_min = r.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if !(diag_min > 1e-12 * diag_max) {
            return Err(Error::Factorization(format!(
                "A Aᵀ is numerically singular (diagonal ratio {:e})",
                diag_min / diag_max
            )));
        }
        let coeffs = r
            .tr_solve_upper_triangular(y)
            .ok_or_else(|| Error::Factorization("triangular solve failed".into()))?;
        let basis = qr.q();
        let particular = &basis * coeffs;
        Ok(Self { basis, particular })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn m(&self) -> usize {
        self.basis.ncols()
    }

    /// Minimum-norm solution of `A z = y`.
    pub fn particular(&self) -> &DVector<f64> {
        &self.particular
    }

    /// Projects `z` in place; `scratch` must have length `m`.
    pub fn project_with(&self, z: &mut DVector<f64>, scratch: &mut DVector<f64>) {
        scratch.gemv_tr(1.0, &self.basis, z, 0.0);
        z.gemv(-1.0, &self.basis, scratch, 1.0);
        *z += &self.particular;
    }

    pub fn project(&self, z: &mut DVector<f64>) {
        let mut scratch = DVector::zeros(self.m());
        self.project_with(z, &mut scratch);
    }
}

/// Solves the weighted program for `ensemble` with block weights `w`.
pub fn recover(
    ensemble: &MeasurementEnsemble,
    w: &[f64],
    config: &SolverConfig,
) -> Result<RecoveryOutcome> {
    let projector = AffineProjector::new(&ensemble.a, &ensemble.y)?;
    recover_with(&projector, ensemble, w, config)
}

/// Same as [`recover`] with a prebuilt projector, so several weightings can
/// share one factorization.
pub fn recover_with(
    projector: &AffineProjector,
    ensemble: &MeasurementEnsemble,
    w: &[f64],
    config: &SolverConfig,
) -> Result<RecoveryOutcome> {
    config.validate()?;
    let n = ensemble.n();
    if projector.n() != n || projector.m() != ensemble.m() {
        return Err(invalid("projector does not match the ensemble"));
    }
    if w.is_empty() || !n.is_multiple_of(w.len()) {
        return Err(invalid(format!("{} block weights do not divide n = {n}", w.len())));
    }
    let structure = BlockStructure::new(n, w.len())?;
    check_weights(w, &structure)?;
    let k = structure.k();
    let tau = config.step_parameter;
    let y_norm = ensemble.y.norm();

    let mut v = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut x = DVector::zeros(n);
    let mut v_prev = DVector::zeros(n);
    let mut scratch = DVector::zeros(projector.m());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        v_prev.copy_from(&v);
        z.copy_from(&v);
        projector.project_with(&mut z, &mut scratch);
        // x = shrink(2z - v)
        x.copy_from(&z);
        x *= 2.0;
        x -= &v;
        shrink_in_place(x.as_mut_slice(), tau, w, k);
        v += &x;
        v -= &z;
        let residual = (&x - &z).norm();
        if config.record_trace {
            trace.push(residual);
        }
        if residual <= config.dual_tolerance * (1.0 + z.norm())
            && primal_residual(ensemble, &z) <= config.primal_tolerance * (1.0 + y_norm)
        {
            converged = true;
            break;
        }
    }

    // (z - v_prev)/τ is in range(Aᵀ) and within ‖x - z‖/τ of a subgradient at x
    let certificate = (&z - &v_prev) / tau;
    let certified = check_certificate(&certificate, &x, w, k, config.certificate_tolerance);
    let objective = block_norms(z.as_slice(), k).zip(w).map(|(n, w)| w * n).sum();
    Ok(RecoveryOutcome {
        primal_residual: primal_residual(ensemble, &z),
        x_hat: z,
        iterations,
        objective,
        converged,
        certified,
        residual_trace: trace,
    })
}

fn primal_residual(ensemble: &MeasurementEnsemble, z: &DVector<f64>) -> f64 {
    (&ensemble.a * z - &ensemble.y).norm()
}

/// Checks `u` against the subdifferential of the weighted norm at `x`:
/// `u_b = w_b x_b / ‖x_b‖` on nonzero blocks, `‖u_b‖ <= w_b` elsewhere.
fn check_certificate(u: &DVector<f64>, x: &DVector<f64>, w: &[f64], k: usize, tol: f64) -> bool {
    let us = u.as_slice().chunks_exact(k);
    let xs = x.as_slice().chunks_exact(k);
    us.zip(xs).zip(w).all(|((ub, xb), &wb)| {
        let xn = xb.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xn > 0.0 {
            let dev: f64 = ub
                .iter()
                .zip(xb)
                .map(|(u, x)| (u - wb * x / xn).powi(2))
                .sum::<f64>()
                .sqrt();
            dev <= tol
        } else {
            ub.iter().map(|v| v * v).sum::<f64>().sqrt() <= wb + tol
        }
    })
}

const PROJECTION_ROUNDS: usize = 20_000;

/// Looks for `λ` such that `Aᵀλ` certifies `x_hat` as a minimizer of the
/// weighted program.
///
/// Blocks with `‖x̂_b‖ > tol` are treated as active. The active equations
/// `A_bᵀλ = w_b x̂_b / ‖x̂_b‖` are solved in the least-squares sense; any
/// remaining freedom in `λ` (null space of the active system) is then used to
/// pull the inactive blocks into their balls `‖A_bᵀλ‖ <= w_b` by alternating
/// projections.
pub fn certify_optimal(
    x_hat: &DVector<f64>,
    ensemble: &MeasurementEnsemble,
    w: &[f64],
    tolerance: f64,
) -> bool {
    certify_inner(x_hat, ensemble, w, tolerance).unwrap_or(false)
}

fn certify_inner(
    x_hat: &DVector<f64>,
    ensemble: &MeasurementEnsemble,
    w: &[f64],
    tol: f64,
) -> Result<bool> {
    let n = ensemble.n();
    let m = ensemble.m();
    if x_hat.len() != n || w.is_empty() || !n.is_multiple_of(w.len()) {
        return Ok(false);
    }
    let structure = BlockStructure::new(n, w.len())?;
    check_weights(w, &structure)?;
    let k = structure.k();
    let feasibility = primal_residual(ensemble, x_hat);
    if feasibility > tol * (1.0 + ensemble.y.norm()) {
        return Ok(false);
    }

    let norms: Vec<f64> = block_norms(x_hat.as_slice(), k).collect();
    let active: Vec<usize> = (0..w.len()).filter(|&b| norms[b] > tol).collect();
    let inactive: Vec<usize> = (0..w.len()).filter(|&b| norms[b] <= tol).collect();

    let rows_of = |blocks: &[usize]| -> DMatrix<f64> {
        let cols: Vec<usize> = blocks.iter().flat_map(|&b| structure.block(b)).collect();
        DMatrix::from_fn(cols.len(), m, |i, j| ensemble.a[(j, cols[i])])
    };

    let (lambda0, null_basis) = if active.is_empty() {
        (DVector::zeros(m), DMatrix::identity(m, m))
    } else {
        let g = rows_of(&active);
        let target = DVector::from_iterator(
            active.len() * k,
            active.iter().flat_map(|&b| {
                let nb = norms[b];
                structure.block(b).map(move |i| w[b] * x_hat[i] / nb)
            }),
        );
        let svd = g.clone().svd(true, true);
        let lambda0 = svd
            .solve(&target, 1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let fit = &g * &lambda0 - &target;
        let fits = fit.as_slice().chunks_exact(k).all(|c| {
            c.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol
        });
        if !fits {
            return Ok(false);
        }
        (lambda0, null_space(&g))
    };

    if inactive.is_empty() {
        return Ok(true);
    }
    let h = rows_of(&inactive);
    let w_in: Vec<f64> = inactive.iter().map(|&b| w[b]).collect();
    let offset = &h * &lambda0;
    let violation = |u: &DVector<f64>| -> f64 {
        u.as_slice()
            .chunks_exact(k)
            .zip(&w_in)
            .map(|(c, wb)| c.iter().map(|v| v * v).sum::<f64>().sqrt() - wb)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if violation(&offset) <= tol {
        return Ok(true);
    }
    if null_basis.ncols() == 0 {
        return Ok(false);
    }

    let free = &h * &null_basis;
    let pinv = free
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let mut u = offset.clone();
    for _ in 0..PROJECTION_ROUNDS {
        let mut clipped = u.clone();
        for (c, &wb) in clipped.as_mut_slice().chunks_exact_mut(k).zip(&w_in) {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > wb {
                let s = if norm > 0.0 { wb / norm } else { 0.0 };
                c.iter_mut().for_each(|v| *v *= s);
            }
        }
        let mu = &pinv * (&clipped - &offset);
        let next = &offset + &free * mu;
        let step = (&next - &u).norm();
        u = next;
        if violation(&u) <= tol {
            return Ok(true);
        }
        if step <= 1e-15 * (1.0 + u.norm()) {
            break;
        }
    }
    Ok(false)
}

/// Orthonormal basis of `{λ : G λ = 0}`.
fn null_space(g: &DMatrix<f64>) -> DMatrix<f64> {
    let m = g.ncols();
    let gram = g.transpose() * g;
    let eig = SymmetricEigen::new(gram);
    let largest = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = 1e-12 * largest.max(f64::MIN_POSITIVE);
    let cols: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i].abs() <= cutoff).collect();
    DMatrix::from_fn(m, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(q: usize) -> Vec<f64> {
        vec![1.0; q]
    }

    #[test]
    fn norm_examples() {
        let s = BlockStructure::new(4, 2).unwrap();
        let zero = DVector::zeros(4);
        assert_eq!(weighted_group_norm(&zero, &unit(2), &s).unwrap(), 0.0);
        let z = DVector::from_vec(vec![3.0, 4.0, 0.0, 0.0]);
        assert_relative_eq!(weighted_group_norm(&z, &unit(2), &s).unwrap(), 5.0);
    }

    #[test]
    fn dual_norm_examples() {
        let s = BlockStructure::new(3, 3).unwrap();
        let z = DVector::from_vec(vec![1.0, -7.0, 2.0]);
        assert_relative_eq!(dual_group_norm(&z, &unit(3), &s).unwrap(), 7.0);
        assert_relative_eq!(dual_group_norm(&(z.clone() * 2.5), &unit(3), &s).unwrap(), 17.5);
        assert!(dual_group_norm(&z, &[1.0, 0.0, 1.0], &s).unwrap().is_infinite());
    }

    #[test]
    fn shrink_regions() {
        let s = BlockStructure::new(4, 2).unwrap();
        let v = DVector::from_vec(vec![0.3, 0.4, 3.0, 4.0]);
        let out = block_shrink(&v, 1.0, &[1.0, 1.0], &s).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
        assert_relative_eq!(out[2], 3.0 * 0.8);
        let untouched = block_shrink(&v, 10.0, &[0.0, 0.0], &s).unwrap();
        assert_eq!(untouched, v);
        assert!(block_shrink(&v, 0.0, &[1.0, 1.0], &s).is_err());
    }

    #[test]
    fn zero_observations_give_zero() {
        let a = crate::model::sample_gaussian_operator(3, 8, 1).unwrap();
        let ens = MeasurementEnsemble::new(a, DVector::zeros(3), 1).unwrap();
        let out = recover(&ens, &unit(4), &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.x_hat.norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_operator_is_reported() {
        let mut a = crate::model::sample_gaussian_operator(3, 6, 2).unwrap();
        let row = a.row(0).clone_owned();
        a.set_row(2, &row);
        let ens = MeasurementEnsemble::new(a, DVector::zeros(3), 0).unwrap();
        assert!(matches!(
            recover(&ens, &unit(3), &SolverConfig::default()),
            Err(Error::Factorization(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { dual_tolerance: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}

//! Tabulations of optimal weights, their sensitivity and the bounds.

use crate::bounds::m_hat_qs;
use crate::error::{Error, Result};
use crate::weights::{optimal_weight, sensitivity_c, sensitivity_c_unshifted, weight_equation_residual};

/// Step of the central difference reported next to `c(k, alpha)`.
pub const FD_STEP: f64 = 1e-4;

/// Default flatness threshold, as a multiple of the smallest `c` of each `k`.
pub const DEFAULT_FLAT_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsRow {
    pub k: usize,
    pub alpha: f64,
    pub omega: Option<f64>,
    /// `omega` divided by the largest weight of the same `k` on the grid.
    pub omega_relative: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsTable {
    pub rows: Vec<WeightsRow>,
}

impl WeightsTable {
    pub fn row(&self, k: usize, alpha: f64) -> Option<&WeightsRow> {
        self.rows.iter().find(|r| r.k == k && r.alpha == alpha)
    }
}

/// Optimal weight for every `(k, alpha)`; failures become error rows.
pub fn run_weights_table(alpha_grid: &[f64], k_list: &[usize]) -> WeightsTable {
    let mut rows = Vec::with_capacity(alpha_grid.len() * k_list.len());
    for &k in k_list {
        let start = rows.len();
        for &alpha in alpha_grid {
            rows.push(match optimal_weight(alpha, k) {
                Ok(w) => WeightsRow {
                    k,
                    alpha,
                    omega: Some(w),
                    omega_relative: None,
                    residual: Some(weight_equation_residual(w, alpha, k)),
                    error: None,
                },
                Err(e) => WeightsRow {
                    k,
                    alpha,
                    omega: None,
                    omega_relative: None,
                    residual: None,
                    error: Some(e.to_string()),
                },
            });
        }
        let max = rows[start..].iter().filter_map(|r| r.omega).fold(0.0, f64::max);
        if max > 0.0 {
            for r in &mut rows[start..] {
                r.omega_relative = r.omega.map(|w| w / max);
            }
        }
    }
    WeightsTable { rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub k: usize,
    pub alpha: f64,
    pub c: Option<f64>,
    /// The variant with `Γ(k/2, ·)` in place of `Γ((k+1)/2, ·)`.
    pub c_unshifted: Option<f64>,
    /// `|ω(alpha+δ) - ω(alpha-δ)| / 2δ`, when both points are admissible.
    pub finite_difference: Option<f64>,
    pub flat: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    pub rows: Vec<SensitivityRow>,
    /// Rows with `c <= threshold * min_k c` count as flat.
    pub threshold: f64,
    /// Per `k`: smallest grid `alpha` from which every row is flat.
    pub flat_from: Vec<(usize, Option<f64>)>,
}

pub fn run_sensitivity_table(alpha_grid: &[f64], k_list: &[usize], threshold: f64) -> SensitivityTable {
    let mut rows = Vec::new();
    let mut flat_from = Vec::new();
    for &k in k_list {
        let start = rows.len();
        for &alpha in alpha_grid {
            let fd = if alpha - FD_STEP > 0.0 && alpha + FD_STEP <= 1.0 {
                match (optimal_weight(alpha + FD_STEP, k), optimal_weight(alpha - FD_STEP, k)) {
                    (Ok(a), Ok(b)) => Some((a - b).abs() / (2.0 * FD_STEP)),
                    _ => None,
                }
            } else {
                None
            };
            rows.push(match sensitivity_c(alpha, k) {
                Ok(c) => SensitivityRow {
                    k,
                    alpha,
                    c: Some(c),
                    c_unshifted: sensitivity_c_unshifted(alpha, k).ok(),
                    finite_difference: fd,
                    flat: None,
                    error: None,
                },
                Err(e) => SensitivityRow {
                    k,
                    alpha,
                    c: None,
                    c_unshifted: None,
                    finite_difference: fd,
                    flat: None,
                    error: Some(e.to_string()),
                },
            });
        }
        let floor = rows[start..].iter().filter_map(|r| r.c).fold(f64::INFINITY, f64::min);
        for r in &mut rows[start..] {
            r.flat = r.c.map(|c| c <= threshold * floor);
        }
        let mut ordered: Vec<&SensitivityRow> = rows[start..].iter().filter(|r| r.c.is_some()).collect();
        ordered.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let mut from = None;
        for r in ordered.iter().rev() {
            if r.flat == Some(true) {
                from = Some(r.alpha);
            } else {
                break;
            }
        }
        flat_from.push((k, from));
    }
    SensitivityTable { rows, threshold, flat_from }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub k: usize,
    pub q: usize,
    pub sigma: f64,
    pub m_hat: f64,
    pub t_star: f64,
    pub band_low: f64,
    pub band_high: f64,
    /// `q m̂`.
    pub measurements: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    pub rows: Vec<BoundsRow>,
}

pub fn run_bounds_table(sigma_grid: &[f64], k_list: &[usize], q: usize) -> Result<BoundsTable> {
    if q == 0 {
        return Err(Error::Config("q must be positive".into()));
    }
    let mut rows = Vec::new();
    for &k in k_list {
        for &sigma in sigma_grid {
            let b = m_hat_qs(sigma, k, q)?;
            rows.push(BoundsRow {
                k,
                q,
                sigma,
                m_hat: b.m_hat,
                t_star: b.t_star,
                band_low: b.band_low,
                band_high: b.band_high,
                measurements: q as f64 * b.m_hat,
            });
        }
    }
    Ok(BoundsTable { rows })
}

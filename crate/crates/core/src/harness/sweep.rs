//! Monte-Carlo phase-transition sweeps.

use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use crate::bounds::{m_hat_qs, m_hat_qsw};
use crate::error::{Error, Result};
use crate::model::{
    derive_seed, expand_weights, sample_instance, BlockStructure, MeasurementEnsemble,
    PriorPartition,
};
use crate::solver::{recover_with, AffineProjector, RecoveryOutcome, SolverConfig};
use crate::weights::optimal_weights_for;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "BLOCKPRIOR_WORKERS";

const SIGNAL_TAG: u64 = 1;
const MATRIX_TAG: u64 = 2;

/// Which weighting a cell was solved with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    Unit,
    Optimal,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::Unit => "unit",
            Series::Optimal => "optimal",
        }
    }
}

/// Aggregated trials at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub series: Series,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    /// Trials that hit the iteration cap.
    pub unconverged: usize,
    /// Predicted transition `q m̂` and its band.
    pub predicted: f64,
    pub predicted_low: f64,
    pub predicted_high: f64,
}

impl SweepCell {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub workers: usize,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub mode: Mode,
    pub structure: BlockStructure,
    /// Normalized set weights used for the optimal series (empty for heatmaps).
    pub set_weights: Vec<f64>,
    /// Cells in grid order: series, then s, then m.
    pub cells: Vec<SweepCell>,
    pub metadata: Metadata,
}

/// 50% crossing of one success curve with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub series: Series,
    pub s: usize,
    pub m50: Option<f64>,
    /// Crossing of the upper confidence curve.
    pub low: Option<f64>,
    /// Crossing of the lower confidence curve.
    pub high: Option<f64>,
    pub predicted: f64,
    pub predicted_low: f64,
}

impl Crossing {
    /// Largest distance from `m50` to either interval end.
    pub fn half_width(&self) -> Option<f64> {
        let m = self.m50?;
        Some((m - self.low?).max(self.high? - m))
    }
}

/// First `m` at which the piecewise-linear curve through `points` reaches
/// 0.5. Points must be sorted by `m`.
pub fn crossing(points: &[(f64, f64)]) -> Option<f64> {
    let i = points.iter().position(|&(_, r)| r >= 0.5)?;
    if i == 0 {
        return Some(points[0].0);
    }
    let (m0, r0) = points[i - 1];
    let (m1, r1) = points[i];
    Some(m0 + (0.5 - r0) / (r1 - r0) * (m1 - m0))
}

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn binomial_half_width(rate: f64, trials: usize) -> f64 {
    1.96 * (rate * (1.0 - rate) / trials as f64).sqrt()
}

impl SweepResult {
    pub fn crossings(&self) -> Vec<Crossing> {
        let mut keys: Vec<(Series, usize)> = self.cells.iter().map(|c| (c.series, c.s)).collect();
        keys.dedup();
        keys.into_iter()
            .map(|(series, s)| {
                let mut cells: Vec<&SweepCell> =
                    self.cells.iter().filter(|c| c.series == series && c.s == s).collect();
                cells.sort_by_key(|c| c.m);
                let curve = |shift: f64| -> Vec<(f64, f64)> {
                    cells
                        .iter()
                        .map(|c| {
                            let r = c.rate();
                            (c.m as f64, r + shift * binomial_half_width(r, c.trials))
                        })
                        .collect()
                };
                Crossing {
                    series,
                    s,
                    m50: crossing(&curve(0.0)),
                    low: crossing(&curve(1.0)),
                    high: crossing(&curve(-1.0)),
                    predicted: cells[0].predicted,
                    predicted_low: cells[0].predicted_low,
                }
            })
            .collect()
    }
}

/// Thread pool honoring [`WORKERS_ENV`].
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::Numerical(e.to_string()))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Trial {
    success: bool,
    converged: bool,
}

fn solve_trial(
    structure: &BlockStructure,
    partition: &PriorPartition,
    weightings: &[Vec<f64>],
    m: usize,
    signal_seed: u64,
    matrix_seed: u64,
    solver: &SolverConfig,
) -> Result<Vec<Trial>> {
    let instance = sample_instance(structure, partition, signal_seed)?;
    let ensemble = MeasurementEnsemble::measure(&instance.x, m, matrix_seed)?;
    let projector = AffineProjector::new(&ensemble.a, &ensemble.y)?;
    weightings
        .iter()
        .map(|w| {
            let out = recover_with(&projector, &ensemble, w, solver)?;
            Ok(Trial {
                success: out.is_success(&instance.x, solver.success_threshold),
                converged: out.converged,
            })
        })
        .collect()
}

/// Runs a heatmap or transition-curve experiment.
///
/// Signals are keyed by `(s, trial)` and matrices by `(s, m, trial)`, so
/// every cell is reproducible on its own and both weightings of a transition
/// curve see the same `(x, A)` pairs.
pub fn run_phase_transition(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let started = unix_now();
    let structure = config.structure()?;
    let q = structure.q();
    let m_grid = config.measurement_grid()?;

    // (s, partition, weightings with their series and predictions)
    type Plan = (usize, PriorPartition, Vec<(Series, Vec<f64>, (f64, f64, f64))>);
    let mut plans: Vec<Plan> = Vec::new();
    let mut set_weights = Vec::new();
    match config.mode {
        Mode::Heatmap => {
            let s_grid = config.s_grid.as_ref().expect("validated").counts()?;
            for s in s_grid {
                let partition = PriorPartition::single(q, s as f64 / q as f64)?;
                let bound = m_hat_qs(partition.sigma(), structure.k(), q)?.measurements(q);
                plans.push((s, partition, vec![(Series::Unit, vec![1.0; q], bound)]));
            }
        }
        Mode::TransitionCurve => {
            let partition = config.partition()?;
            let s = partition.active_counts()?.iter().sum();
            let k = structure.k();
            let omega = optimal_weights_for(partition.alpha(), k, config.weight_options())?;
            let unit = m_hat_qs(partition.sigma(), k, q)?.measurements(q);
            let weighted =
                m_hat_qsw(partition.alpha(), &partition.rho(), k, &omega.omega_normalized, q)?
                    .measurements(q);
            let w = expand_weights(&partition, &omega.omega_normalized)?;
            set_weights = omega.omega_normalized;
            plans.push((
                s,
                partition,
                vec![(Series::Unit, vec![1.0; q], unit), (Series::Optimal, w, weighted)],
            ));
        }
        other => {
            return Err(Error::Config(format!("mode {other:?} is not a sweep")));
        }
    }

    let jobs: Vec<(usize, usize, usize)> = (0..plans.len())
        .flat_map(|p| (0..m_grid.len()).flat_map(move |mi| (0..config.trials).map(move |t| (p, mi, t))))
        .collect();
    let pool = worker_pool()?;
    let workers = pool.current_num_threads();
    let outcomes: Vec<Vec<Trial>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, mi, t)| {
                let (s, partition, weightings) = &plans[p];
                let m = m_grid[mi];
                let ws: Vec<Vec<f64>> = weightings.iter().map(|(_, w, _)| w.clone()).collect();
                solve_trial(
                    &structure,
                    partition,
                    &ws,
                    m,
                    derive_seed(config.seed, &[SIGNAL_TAG, *s as u64, t as u64]),
                    derive_seed(config.seed, &[MATRIX_TAG, *s as u64, m as u64, t as u64]),
                    &config.solver,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut cells = Vec::new();
    let series_count = plans.iter().map(|p| p.2.len()).max().unwrap_or(0);
    for si in 0..series_count {
        for (p, (s, _, weightings)) in plans.iter().enumerate() {
            let Some((series, _, (pred, low, high))) = weightings.get(si) else { continue };
            for (mi, &m) in m_grid.iter().enumerate() {
                let base = (p * m_grid.len() + mi) * config.trials;
                let trials = &outcomes[base..base + config.trials];
                cells.push(SweepCell {
                    series: *series,
                    s: *s,
                    m,
                    trials: config.trials,
                    successes: trials.iter().filter(|t| t[si].success).count(),
                    unconverged: trials.iter().filter(|t| !t[si].converged).count(),
                    predicted: *pred,
                    predicted_low: *low,
                    predicted_high: *high,
                });
            }
        }
    }

    Ok(SweepResult {
        mode: config.mode,
        structure,
        set_weights,
        cells,
        metadata: Metadata {
            seed: config.seed,
            version: concat!("blockprior ", env!("CARGO_PKG_VERSION")).to_string(),
            started_unix: started,
            finished_unix: unix_now(),
            workers,
            config: config.clone(),
        },
    })
}

/// One recovered instance of a transition-curve or heatmap configuration.
#[derive(Debug, Clone)]
pub struct InstanceReport {
    pub series: Series,
    pub m: usize,
    pub s: usize,
    pub error: f64,
    pub success: bool,
    pub outcome: RecoveryOutcome,
}

/// Solves trial `trial` at `m` with the seeds a sweep would use. Heatmap
/// configurations use the first entry of `s_grid`.
pub fn recover_instance(config: &ExperimentConfig, m: usize, trial: usize) -> Result<Vec<InstanceReport>> {
    let structure = config.structure()?;
    let q = structure.q();
    if m < 1 || m > structure.n() {
        return Err(Error::Config(format!("m = {m} outside [1, {}]", structure.n())));
    }
    config.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
    let (partition, weightings) = match config.mode {
        Mode::Heatmap => {
            let s = config
                .s_grid
                .as_ref()
                .ok_or_else(|| Error::Config("s_grid is required".into()))?
                .counts()?
                .first()
                .copied()
                .ok_or_else(|| Error::Config("s_grid is empty".into()))?;
            (PriorPartition::single(q, s as f64 / q as f64)?, vec![(Series::Unit, vec![1.0; q])])
        }
        _ => {
            let partition = config.partition()?;
            let omega = optimal_weights_for(partition.alpha(), structure.k(), config.weight_options())?;
            let w = expand_weights(&partition, &omega.omega_normalized)?;
            (partition, vec![(Series::Unit, vec![1.0; q]), (Series::Optimal, w)])
        }
    };
    let s: usize = partition.active_counts()?.iter().sum();
    let instance = sample_instance(
        &structure,
        &partition,
        derive_seed(config.seed, &[SIGNAL_TAG, s as u64, trial as u64]),
    )?;
    let ensemble = MeasurementEnsemble::measure(
        &instance.x,
        m,
        derive_seed(config.seed, &[MATRIX_TAG, s as u64, m as u64, trial as u64]),
    )?;
    let projector = AffineProjector::new(&ensemble.a, &ensemble.y)?;
    weightings
        .into_iter()
        .map(|(series, w)| {
            let outcome = recover_with(&projector, &ensemble, &w, &config.solver)?;
            let error = outcome.error_to(&instance.x);
            Ok(InstanceReport {
                series,
                m,
                s,
                error,
                success: error <= config.solver.success_threshold,
                outcome,
            })
        })
        .collect()
}

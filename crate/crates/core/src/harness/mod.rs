//! Experiment engine behind the command-line tool: phase-transition sweeps,
//! weight, sensitivity and bound tables, and their CSV/SVG output.

pub mod config;
pub mod emit;
pub mod sweep;
pub mod tables;

pub use config::{ExperimentConfig, Grid, Mode, PartitionSpec};
pub use emit::{emit, read_sweep_csv, render, to_csv, to_svg, Format, Report};
pub use sweep::{
    binomial_half_width, crossing, recover_instance, run_phase_transition, Crossing, Series,
    SweepCell, SweepResult,
};
pub use tables::{run_bounds_table, run_sensitivity_table, run_weights_table};

use crate::error::Result;

/// Runs whatever `config.mode` asks for.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match config.mode {
        Mode::Heatmap | Mode::TransitionCurve => Ok(Report::Sweep(run_phase_transition(config)?)),
        Mode::WeightsTable => Ok(Report::Weights(run_weights_table(&config.alphas()?, &config.ks()))),
        Mode::SensitivityTable => Ok(Report::Sensitivity(run_sensitivity_table(
            &config.alphas()?,
            &config.ks(),
            config.flat_threshold.unwrap_or(tables::DEFAULT_FLAT_THRESHOLD),
        ))),
        Mode::BoundsTable => {
            let sigmas = match &config.sigma_grid {
                Some(g) => g.values()?,
                None => (0..=20).map(|i| i as f64 / 20.0).collect(),
            };
            Ok(Report::Bounds(run_bounds_table(&sigmas, &config.ks(), config.q.unwrap_or(1))?))
        }
    }
}

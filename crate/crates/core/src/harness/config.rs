//! JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockStructure, PriorPartition};
use crate::solver::SolverConfig;
use crate::weights::WeightOptions;

/// What an experiment computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Success rate over a (block sparsity, m) grid with a single set.
    Heatmap,
    /// Success rate over m for unit and optimal weights on a partition.
    TransitionCurve,
    WeightsTable,
    SensitivityTable,
    BoundsTable,
}

/// A list of values or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::Config(format!("bad range {start}..{stop} step {step}")));
                }
                let count = ((stop - start) / step + 1e-9).floor();
                if count < 0.0 {
                    return Ok(Vec::new());
                }
                Ok((0..=count as usize).map(|i| start + i as f64 * step).collect())
            }
        }
    }

    pub fn counts(&self) -> Result<Vec<usize>> {
        self.values()?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::Config(format!("grid value {v} is not a nonnegative integer")))
                }
            })
            .collect()
    }
}

/// Prior partition given by explicit block sets, by contiguous set sizes, or
/// by relative sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionSpec {
    Sets { sets: Vec<Vec<usize>>, alpha: Vec<f64> },
    Sizes { sizes: Vec<usize>, active: Vec<usize> },
    Relative { rho: Vec<f64>, alpha: Vec<f64> },
}

impl PartitionSpec {
    pub fn build(&self, q: usize) -> Result<PriorPartition> {
        let partition = match self {
            PartitionSpec::Sets { sets, alpha } => PriorPartition::new(q, sets.clone(), alpha.clone())?,
            PartitionSpec::Sizes { sizes, active } => PriorPartition::contiguous(sizes, active)?,
            PartitionSpec::Relative { rho, alpha } => {
                let sizes = rho
                    .iter()
                    .map(|r| {
                        let size = r * q as f64;
                        if (size - size.round()).abs() > 1e-9 {
                            Err(Error::Config(format!("rho {r} times q = {q} is not an integer")))
                        } else {
                            Ok(size.round() as usize)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut start = 0;
                let sets = sizes
                    .iter()
                    .map(|&s| {
                        let set: Vec<usize> = (start..start + s).collect();
                        start += s;
                        set
                    })
                    .collect();
                PriorPartition::new(q, sets, alpha.clone())?
            }
        };
        if partition.q() != q {
            return Err(Error::Config(format!(
                "partition covers {} blocks but q = {q}",
                partition.q()
            )));
        }
        Ok(partition)
    }
}

fn default_trials() -> usize {
    25
}

/// One experiment. Fields not used by the chosen mode are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub q: Option<usize>,
    /// Block size for the table modes (structure modes derive it from n/q).
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub m_grid: Option<Grid>,
    /// Block sparsities (heatmap mode).
    #[serde(default)]
    pub s_grid: Option<Grid>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub alpha_grid: Option<Grid>,
    #[serde(default)]
    pub k_list: Option<Vec<usize>>,
    /// Sparsity fractions (bounds-table mode).
    #[serde(default)]
    pub sigma_grid: Option<Grid>,
    /// Sensitivity below which the weight curve counts as flat.
    #[serde(default)]
    pub flat_threshold: Option<f64>,
    /// Finite weight for sets with zero accuracy; rejected when absent.
    #[serde(default)]
    pub zero_accuracy_cap: Option<f64>,
    /// Free-form note copied into the metadata sidecar.
    #[serde(default)]
    pub note: Option<String>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: None,
            q: None,
            k: None,
            partition: None,
            m_grid: None,
            s_grid: None,
            trials: default_trials(),
            seed: 0,
            solver: SolverConfig::default(),
            alpha_grid: None,
            k_list: None,
            sigma_grid: None,
            flat_threshold: None,
            zero_accuracy_cap: None,
            note: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn structure(&self) -> Result<BlockStructure> {
        let (n, q) = match (self.n, self.q) {
            (Some(n), Some(q)) => (n, q),
            _ => return Err(Error::Config("n and q are required".into())),
        };
        BlockStructure::new(n, q).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn partition(&self) -> Result<PriorPartition> {
        let structure = self.structure()?;
        self.partition
            .as_ref()
            .ok_or_else(|| Error::Config("partition is required".into()))?
            .build(structure.q())
    }

    /// Measurement counts, checked against `[1, n]`.
    pub fn measurement_grid(&self) -> Result<Vec<usize>> {
        let n = self.structure()?.n();
        let grid = self
            .m_grid
            .as_ref()
            .ok_or_else(|| Error::Config("m_grid is required".into()))?
            .counts()?;
        if let Some(m) = grid.iter().find(|&&m| m < 1 || m > n) {
            return Err(Error::Config(format!("m = {m} outside [1, {n}]")));
        }
        Ok(grid)
    }

    pub fn weight_options(&self) -> WeightOptions {
        WeightOptions { zero_accuracy_cap: self.zero_accuracy_cap }
    }

    pub fn alphas(&self) -> Result<Vec<f64>> {
        match &self.alpha_grid {
            Some(g) => g.values(),
            None => Ok((1..=100).map(|i| i as f64 / 100.0).collect()),
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        match (&self.k_list, self.k) {
            (Some(list), _) => list.clone(),
            (None, Some(k)) => vec![k],
            (None, None) => vec![2, 10, 30],
        }
    }

    /// Checks everything the chosen mode needs before any work starts.
    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.solver.validate().map_err(config_err)?;
        match self.mode {
            Mode::Heatmap => {
                let structure = self.structure()?;
                self.measurement_grid()?;
                let s_grid = self
                    .s_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("s_grid is required".into()))?
                    .counts()?;
                if let Some(s) = s_grid.iter().find(|&&s| s > structure.q()) {
                    return Err(Error::Config(format!("s = {s} exceeds q = {}", structure.q())));
                }
                self.check_trials()
            }
            Mode::TransitionCurve => {
                self.measurement_grid()?;
                let partition = self.partition().map_err(config_err)?;
                partition.active_counts().map_err(config_err)?;
                self.check_trials()
            }
            Mode::WeightsTable | Mode::SensitivityTable => {
                self.alphas()?;
                self.check_ks()
            }
            Mode::BoundsTable => {
                if let Some(g) = &self.sigma_grid {
                    g.values()?;
                }
                if self.q.is_none() {
                    return Err(Error::Config("q is required".into()));
                }
                self.check_ks()
            }
        }
    }

    fn check_trials(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn check_ks(&self) -> Result<()> {
        let ks = self.ks();
        if ks.is_empty() || ks.iter().any(|&k| k == 0 || k > crate::specfun::MAX_BLOCK_SIZE) {
            return Err(Error::Config(format!("invalid k list {ks:?}")));
        }
        Ok(())
    }
}

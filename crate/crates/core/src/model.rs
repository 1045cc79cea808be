//! Problem instances: block structure, prior partitions, signals and
//! Gaussian measurement operators.
//!
//! Block and set indices are zero-based throughout. All random draws use
//! ChaCha8 streams seeded from a `u64`; distinct trials get distinct seeds
//! through [`derive_seed`], so every draw is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance used when checking that `alpha * |P|` is an integer.
const COUNT_TOLERANCE: f64 = 1e-9;

/// Generator used for every random draw in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with a list of position keys into a new seed.
///
/// The result depends on the keys and their order only, never on the order in
/// which derived seeds are requested.
pub fn derive_seed(base: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(base), |acc, &key| splitmix64(acc ^ splitmix64(key)))
}

/// `n = q * k` split into `q` contiguous blocks of size `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    n: usize,
    q: usize,
    k: usize,
}

impl BlockStructure {
    pub fn new(n: usize, q: usize) -> Result<Self> {
        if q == 0 || n == 0 {
            return Err(invalid("n and q must be positive"));
        }
        if !n.is_multiple_of(q) {
            return Err(invalid(format!("n = {n} is not a multiple of q = {q}")));
        }
        Ok(Self { n, q, k: n / q })
    }

    pub fn from_blocks(q: usize, k: usize) -> Result<Self> {
        Self::new(q * k, q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Index range of block `b`.
    pub fn block(&self, b: usize) -> std::ops::Range<usize> {
        b * self.k..(b + 1) * self.k
    }

    pub fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { what, expected: self.n, actual: len });
        }
        Ok(())
    }
}

/// Disjoint block-index sets covering all `q` blocks, each with an accuracy
/// `alpha_i = |P_i ∩ B| / |P_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorPartition {
    q: usize,
    sets: Vec<Vec<usize>>,
    alpha: Vec<f64>,
    owner: Vec<usize>,
}

impl PriorPartition {
    pub fn new(q: usize, sets: Vec<Vec<usize>>, alpha: Vec<f64>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::NotAPartition("no sets given".into()));
        }
        if alpha.len() != sets.len() {
            return Err(Error::DimensionMismatch {
                what: "alpha",
                expected: sets.len(),
                actual: alpha.len(),
            });
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(0.0..=1.0).contains(*a)) {
            return Err(invalid(format!("alpha[{i}] = {a} outside [0, 1]")));
        }
        let mut owner = vec![usize::MAX; q];
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::NotAPartition(format!("set {i} is empty")));
            }
            for &b in set {
                if b >= q {
                    return Err(Error::NotAPartition(format!("block {b} out of range 0..{q}")));
                }
                if owner[b] != usize::MAX {
                    return Err(Error::NotAPartition(format!(
                        "block {b} appears in sets {} and {i}",
                        owner[b]
                    )));
                }
                owner[b] = i;
            }
        }
        if let Some(b) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::NotAPartition(format!("block {b} belongs to no set")));
        }
        let sets = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        Ok(Self { q, sets, alpha, owner })
    }

    /// Contiguous sets of the given sizes, in order, with `active[i]` support
    /// blocks inside set `i`.
    pub fn contiguous(sizes: &[usize], active: &[usize]) -> Result<Self> {
        if sizes.len() != active.len() {
            return Err(Error::DimensionMismatch {
                what: "active counts",
                expected: sizes.len(),
                actual: active.len(),
            });
        }
        let q = sizes.iter().sum();
        let mut start = 0;
        let mut sets = Vec::with_capacity(sizes.len());
        let mut alpha = Vec::with_capacity(sizes.len());
        for (i, (&size, &count)) in sizes.iter().zip(active).enumerate() {
            if count > size {
                return Err(invalid(format!("set {i}: {count} active blocks exceed size {size}")));
            }
            sets.push((start..start + size).collect());
            alpha.push(if size == 0 { 0.0 } else { count as f64 / size as f64 });
            start += size;
        }
        Self::new(q, sets, alpha)
    }

    /// A single set holding every block.
    pub fn single(q: usize, alpha: f64) -> Result<Self> {
        Self::new(q, vec![(0..q).collect()], vec![alpha])
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Relative sizes `|P_i| / q`.
    pub fn rho(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.len() as f64 / self.q as f64).collect()
    }

    /// Block-sparsity fraction `Σ rho_i alpha_i`.
    pub fn sigma(&self) -> f64 {
        self.rho().iter().zip(&self.alpha).map(|(r, a)| r * a).sum()
    }

    /// Set index owning block `b`.
    pub fn owner(&self, b: usize) -> usize {
        self.owner[b]
    }

    /// Number of support blocks `alpha_i |P_i|` in each set; fails when any of
    /// them is not an integer.
    pub fn active_counts(&self) -> Result<Vec<usize>> {
        self.sets
            .iter()
            .zip(&self.alpha)
            .enumerate()
            .map(|(i, (set, &a))| {
                let value = a * set.len() as f64;
                let rounded = value.round();
                if (value - rounded).abs() > COUNT_TOLERANCE {
                    Err(Error::NonIntegralCount { set: i, value })
                } else {
                    Ok(rounded as usize)
                }
            })
            .collect()
    }

    /// Same sets with replaced accuracies.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<Self> {
        Self::new(self.q, self.sets.clone(), alpha)
    }
}

/// Block weights `w = D ω`: every block takes the weight of its set.
pub fn expand_weights(partition: &PriorPartition, omega: &[f64]) -> Result<Vec<f64>> {
    if omega.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            what: "omega",
            expected: partition.len(),
            actual: omega.len(),
        });
    }
    if let Some((i, w)) = omega.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(invalid(format!("omega[{i}] = {w} must be nonnegative")));
    }
    Ok((0..partition.q()).map(|b| omega[partition.owner(b)]).collect())
}

/// Ground-truth block-sparse signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInstance {
    pub structure: BlockStructure,
    /// Sorted support block indices.
    pub support: Vec<usize>,
    pub x: DVector<f64>,
}

impl SignalInstance {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// Draws a signal whose support has exactly `alpha_i |P_i|` blocks in each set,
/// chosen uniformly without replacement; support blocks get i.i.d. N(0, 1)
/// entries.
pub fn sample_instance(
    structure: &BlockStructure,
    partition: &PriorPartition,
    seed: u64,
) -> Result<SignalInstance> {
    if partition.q() != structure.q() {
        return Err(Error::DimensionMismatch {
            what: "partition block count",
            expected: structure.q(),
            actual: partition.q(),
        });
    }
    let counts = partition.active_counts()?;
    let mut rng = rng_from_seed(seed);
    let mut support = Vec::new();
    for (set, &count) in partition.sets().iter().zip(&counts) {
        let picks = index::sample(&mut rng, set.len(), count);
        support.extend(picks.iter().map(|p| set[p]));
    }
    support.sort_unstable();

    let mut x = DVector::zeros(structure.n());
    for &b in &support {
        for idx in structure.block(b) {
            x[idx] = StandardNormal.sample(&mut rng);
        }
    }
    Ok(SignalInstance { structure: *structure, support, x })
}

/// `m × n` matrix of i.i.d. standard normal entries.
pub fn sample_gaussian_operator(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m < 1 || m > n {
        return Err(invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok(DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng)))
}

/// Measurement matrix together with the observations it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

impl MeasurementEnsemble {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, seed: u64) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "observations",
                expected: a.nrows(),
                actual: y.len(),
            });
        }
        Ok(Self { a, y, seed })
    }

    /// Samples `A` from `seed` and sets `y = A x`.
    pub fn measure(x: &DVector<f64>, m: usize, seed: u64) -> Result<Self> {
        let a = sample_gaussian_operator(m, x.len(), seed)?;
        let y = &a * x;
        Ok(Self { a, y, seed })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

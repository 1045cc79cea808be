//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
// Gauss weights for the nodes at odd positions of the Kronrod set
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * KRONROD_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

const MAX_INTERVALS: usize = 4000;

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]` with relative
/// tolerance `rel`; always splits the interval with the largest error estimate.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel * total.abs() || err <= 1e-300 || parts.len() >= MAX_INTERVALS {
            return total;
        }
        let worst = (0..parts.len()).max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3)).unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// `∫_z^{z+30} (u - z)^p u^{k-1} e^{-u²/2} du`, integrand scaled about its
/// mode so large `k` does not overflow the error estimate.
pub fn chi_tail(p: i32, z: f64, k: usize) -> f64 {
    let km = k as f64 - 1.0;
    let mode = km.sqrt().max(z);
    let log_peak = if mode > 0.0 { km * mode.ln() } else { 0.0 } - 0.5 * mode * mode;
    let f = |u: f64| {
        if u <= 0.0 {
            return if k == 1 && p == 0 { (-(0.5 * u * u) - log_peak).exp() } else { 0.0 };
        }
        (u - z).powi(p) * (km * u.ln() - 0.5 * u * u - log_peak).exp()
    };
    let upper = z.max(mode) + 30.0;
    // split at the mode so the peak is resolved
    let mut total = 0.0;
    let mut a = z;
    for b in [mode, mode + 5.0, upper] {
        if b > a {
            total += integrate(f, a, b, 1e-15);
            a = b;
        }
    }
    total * log_peak.exp()
}

/// `∫_x^∞ u^{a-1} e^{-u} du` by quadrature after `u = v²`, which removes
/// the singularity at 0 for `a >= 1/2`.
pub fn gamma_upper_quad(a: f64, x: f64) -> f64 {
    let f = |v: f64| {
        if v > 0.0 {
            2.0 * ((2.0 * a - 1.0) * v.ln() - v * v).exp()
        } else if a == 0.5 {
            2.0
        } else {
            0.0
        }
    };
    let lo = x.sqrt();
    let peak = (a - 0.5).max(0.0).sqrt().max(lo);
    let upper = peak + 12.0;
    let mut total = 0.0;
    let mut a0 = lo;
    for b in [peak, peak + 3.0, upper] {
        if b > a0 {
            total += integrate(f, a0, b, 1e-15);
            a0 = b;
        }
    }
    total
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Squared distance from `g` to `t ∂‖·‖_{1,2,w}(x)` for a signal with support
/// `support` (block indices): on-support blocks contribute
/// `‖g_b - t w_b x_b/‖x_b‖‖²`, the others `(‖g_b‖ - t w_b)₊²`.
pub fn subdifferential_distance(g: &[f64], x: &[f64], w: &[f64], k: usize, t: f64) -> f64 {
    let mut total = 0.0;
    for (b, wb) in w.iter().enumerate() {
        let gb = &g[b * k..(b + 1) * k];
        let xb = &x[b * k..(b + 1) * k];
        let xn = xb.iter().map(|v| v * v).sum::<f64>().sqrt();
        if xn > 0.0 {
            total += gb.iter().zip(xb).map(|(g, x)| (g - t * wb * x / xn).powi(2)).sum::<f64>();
        } else {
            let gn = gb.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += (gn - t * wb).max(0.0).powi(2);
        }
    }
    total
}

/// Sample mean and standard error of `draws` evaluations of `f`.
pub fn monte_carlo(draws: usize, seed: u64, mut f: impl FnMut(&mut ChaCha8Rng) -> f64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let v = f(&mut r);
        sum += v;
        sum_sq += v * v;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Block sparse signal with the given support and Gaussian entries.
pub fn block_signal(q: usize, k: usize, support: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; q * k];
    for &b in support {
        for v in &mut x[b * k..(b + 1) * k] {
            *v = normal(rng);
        }
    }
    x
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Projected subgradient method with normalized, geometrically shrinking
/// steps; the projection uses the normal equations `A Aᵀ λ = A z - y`.
pub fn subgradient_oracle(a: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], iterations: usize) -> DVector<f64> {
    let n = a.ncols();
    let k = n / w.len();
    let gram = (a * a.transpose()).cholesky().expect("full row rank");
    let project = |z: &DVector<f64>| -> DVector<f64> {
        let lambda = gram.solve(&(a * z - y));
        z - a.transpose() * lambda
    };
    let null_project = |g: &DVector<f64>| -> DVector<f64> {
        let lambda = gram.solve(&(a * g));
        g - a.transpose() * lambda
    };
    let objective = |z: &DVector<f64>| -> f64 {
        (0..w.len()).map(|b| w[b] * z.rows(b * k, k).norm()).sum()
    };
    let mut z = project(&DVector::zeros(n));
    let mut best = z.clone();
    let mut best_value = objective(&z);
    let start = 0.5 * (z.norm() + 1.0);
    let decay = (1e-11f64).powf(1.0 / iterations as f64);
    let mut step = start;
    for _ in 0..iterations {
        let mut g = DVector::zeros(n);
        for (b, wb) in w.iter().enumerate() {
            let norm = z.rows(b * k, k).norm();
            if norm > 0.0 {
                let dir = z.rows(b * k, k) * (wb / norm);
                g.rows_mut(b * k, k).copy_from(&dir);
            }
        }
        let g = null_project(&g);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        z -= g * (step / gn);
        z = project(&z);
        let value = objective(&z);
        if value < best_value {
            best_value = value;
            best = z.clone();
        }
        step *= decay;
    }
    best
}

//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use shapley_gsa::rng::substream;
use shapley_gsa::shapley::{shapley_effects, ShapleyConfig};
use shapley_gsa::sobol_rt::{estimate_sobol_rt, PickFreezeEstimator};
use shapley_gsa::test_models::*;
use shapley_gsa::{evaluate, InputDistribution, Model, SampleMatrix};

/// `Sh_i` from the pairwise full indices: the permutation average written
/// with `ĉ(J) = S_J^full`.
pub fn telescoping_sh(p: &LinearGaussianParams) -> [f64; 3] {
    let idx = analytic_indices_linear(p).unwrap();
    let [s12, s13, s23] = linear_pair_full_indices(p).unwrap();
    let s = &idx.s_full;
    let pair = |i: usize, j: usize| match (i.min(j), i.max(j)) {
        (0, 1) => s12,
        (0, 2) => s13,
        _ => s23,
    };
    let rest = |i: usize| match i {
        0 => s23,
        1 => s13,
        _ => s12,
    };
    let mut out = [0.0; 3];
    for i in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let (j, k) = (others[0], others[1]);
        out[i] = (s[i] + 0.5 * (pair(i, j) - s[j]) + 0.5 * (pair(i, k) - s[k]) + (1.0 - rest(i))) / 3.0;
    }
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// The correlated linear model used for convergence checks.
pub fn gamma_model(gamma: f64) -> (LinearGaussianParams, InputDistribution, IndexSet) {
    let p = LinearGaussianParams::new([1.0; 3], [1.0, 1.0, 2.0], 0.0, 0.0, gamma).unwrap();
    let dist = p.distribution().unwrap();
    let idx = analytic_indices_linear(&p).unwrap();
    (p, dist, idx)
}

/// Mean absolute error of the RT full first-order estimates over `reps`
/// runs at each `N`.
pub fn rt_errors(ns: &[usize], reps: usize, seed: u64) -> Vec<f64> {
    let (p, dist, idx) = gamma_model(0.5);
    ns.iter()
        .map(|&n| {
            let mut err = 0.0;
            for r in 0..reps {
                let s = next_seed(seed, n as u64, r as u64);
                let est = estimate_sobol_rt(&p, &dist, n, PickFreezeEstimator::Janon, 0, 0.05, s).unwrap();
                err += (0..3).map(|i| (est.s_full[i].point - idx.s_full[i]).abs()).sum::<f64>() / 3.0;
            }
            err / reps as f64
        })
        .collect()
}

/// Mean absolute error of the Shapley estimates over `reps` runs at each
/// outer size `No` (with `Nv` scaled alongside).
pub fn shapley_errors(nos: &[usize], reps: usize, seed: u64) -> Vec<f64> {
    let (p, dist, idx) = gamma_model(0.5);
    nos.iter()
        .map(|&no| {
            let mut err = 0.0;
            for r in 0..reps {
                let s = next_seed(seed, no as u64, r as u64);
                let cfg = ShapleyConfig::exact(10 * no, no, 3);
                let res = shapley_effects(&p, &dist, &cfg, s).unwrap();
                err += (0..3).map(|i| (res.sh[i] - idx.sh[i]).abs()).sum::<f64>() / 3.0;
            }
            err / reps as f64
        })
        .collect()
}

pub fn next_seed(seed: u64, a: u64, b: u64) -> u64 {
    use rand::RngCore;
    substream(seed, &[a, b]).next_u64()
}

pub fn mask_of(set: &[usize]) -> usize {
    set.iter().map(|i| 1 << i).sum()
}

/// Double-loop estimate of `Var(E[Y|X_J])` with its standard error.
/// The inner-loop noise `E[Var(Y|X_J)]/n_in` is removed.
pub fn double_loop<M: Model>(model: &M, dist: &InputDistribution, set: &[usize], n_out: usize, n_in: usize, seed: u64) -> (f64, f64) {
    let mut rng = substream(seed, &[mask_of(set) as u64]);
    let d = dist.dim();
    let outer = dist.sample(n_out, &mut rng);
    let free: Vec<usize> = (0..d).filter(|i| !set.contains(i)).collect();
    let mut means = Vec::with_capacity(n_out);
    let mut noise = 0.0;
    for o in 0..n_out {
        let values: Vec<f64> = set.iter().map(|&j| outer.get(o, j)).collect();
        let inner = dist.conditional_sample(set, &values, &free, n_in, &mut rng).unwrap();
        let mut x = SampleMatrix::zeros(n_in, d);
        for t in 0..n_in {
            for (k, &j) in set.iter().enumerate() {
                x.row_mut(t)[j] = values[k];
            }
            for (k, &j) in free.iter().enumerate() {
                x.row_mut(t)[j] = inner.get(t, k);
            }
        }
        let y = evaluate(model, &x).unwrap();
        let m = y.iter().sum::<f64>() / n_in as f64;
        noise += y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n_in - 1) as f64;
        means.push(m);
    }
    let grand = means.iter().sum::<f64>() / n_out as f64;
    let sq: Vec<f64> = means.iter().map(|m| (m - grand).powi(2) * n_out as f64 / (n_out - 1) as f64).collect();
    let raw = sq.iter().sum::<f64>() / n_out as f64;
    let sd = (sq.iter().map(|s| (s - raw).powi(2)).sum::<f64>() / (n_out - 1) as f64).sqrt();
    (raw - noise / n_out as f64 / n_in as f64, sd / (n_out as f64).sqrt())
}


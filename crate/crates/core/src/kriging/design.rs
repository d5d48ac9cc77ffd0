//! Latin hypercube designs with optional maximin improvement.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::input_model::InputDistribution;
use crate::model::SampleMatrix;
use crate::rng::{substream, StreamRng};

const RESTARTS: usize = 20;
const SWAPS_PER_POINT: usize = 50;

fn unit_lhs(n: usize, d: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut x = vec![0.0; n * d];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            x[i * d + j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    x
}

fn sq_dist(x: &[f64], d: usize, a: usize, b: usize) -> f64 {
    (0..d).map(|k| (x[a * d + k] - x[b * d + k]).powi(2)).sum()
}

/// Smallest squared pairwise distance and one point of that pair.
fn closest_pair(x: &[f64], n: usize, d: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for a in 0..n {
        for b in 0..a {
            let s = sq_dist(x, d, a, b);
            if s < best.0 {
                best = (s, a);
            }
        }
    }
    best
}

/// Random restarts followed by a column-swap search; both keep the
/// Latin property and only ever raise the minimum pairwise distance.
fn maximin(mut best: Vec<f64>, n: usize, d: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut best_score = closest_pair(&best, n, d);
    for _ in 1..RESTARTS {
        let cand = unit_lhs(n, d, rng);
        let s = closest_pair(&cand, n, d);
        if s.0 > best_score.0 {
            best = cand;
            best_score = s;
        }
    }
    for _ in 0..SWAPS_PER_POINT * n {
        // move a point of the closest pair
        let a = best_score.1;
        let b = loop {
            let b = rng.random_range(0..n);
            if b != a {
                break b;
            }
        };
        let k = rng.random_range(0..d);
        best.swap(a * d + k, b * d + k);
        let s = closest_pair(&best, n, d);
        if s.0 > best_score.0 {
            best_score = s;
        } else {
            best.swap(a * d + k, b * d + k);
        }
    }
    best
}

fn unit_design(n: usize, d: usize, seed: u64, optimize: bool) -> Result<Vec<f64>> {
    if d == 0 {
        return invalid("design dimension must be positive");
    }
    if n < d + 2 {
        return invalid(format!("a linear-trend design in d = {d} needs n >= {}, got {n}", d + 2));
    }
    let mut rng = substream(seed, &[]);
    let x = unit_lhs(n, d, &mut rng);
    Ok(if optimize { maximin(x, n, d, &mut rng) } else { x })
}

/// `n`-point Latin hypercube in the box `bounds`.
pub fn lhs_design(n: usize, bounds: &[(f64, f64)], seed: u64, optimize: bool) -> Result<SampleMatrix> {
    let d = bounds.len();
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
        return invalid("design bounds need finite lower < upper");
    }
    let mut x = unit_design(n, d, seed, optimize)?;
    for (i, v) in x.iter_mut().enumerate() {
        let (lo, hi) = bounds[i % d];
        *v = lo + (hi - lo) * *v;
    }
    SampleMatrix::from_row_major(n, d, x)
}

/// Latin hypercube mapped through the margins' quantile functions, ignoring
/// any dependence between inputs.
pub fn lhs_for_distribution(n: usize, dist: &InputDistribution, seed: u64, optimize: bool) -> Result<SampleMatrix> {
    let d = dist.dim();
    let mut x = unit_design(n, d, seed, optimize)?;
    for (i, v) in x.iter_mut().enumerate() {
        *v = dist.margins()[i % d].quantile(*v);
    }
    SampleMatrix::from_row_major(n, d, x)
}

/// Smallest pairwise Euclidean distance between design rows.
pub fn min_distance(x: &SampleMatrix) -> f64 {
    closest_pair(x.as_slice(), x.nrows(), x.ncols()).0.sqrt()
}

//! Shapley effects of a kriging metamodel. Every realization of the
//! conditioned process is run through the Shapley estimator and its block
//! bootstrap, giving an `N_H × B` matrix of replicates per input whose row
//! and column means separate the metamodel error from the Monte-Carlo one.
//!
//! The Monte-Carlo design and the bootstrap resampling patterns are drawn
//! once and shared by all realizations, so the Monte-Carlo part is
//! conditional on that design.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gp::GpModel;
use super::realization::{RealizationMethod, RealizationSampler};
use crate::error::{invalid, Result};
use crate::input_model::{InputDistribution, Ordering};
use crate::model::{evaluate, Model};
use crate::rng::{substream, tag};
use crate::shapley::{
    build_conditional_design, estimates_from_slices, output_variance, unbiased_variance, PermutationMethod,
    ShapleyConfig, ShapleyEstimates,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpShapleyOptions {
    /// Number of process realizations `N_H`.
    pub n_h: usize,
    /// Replicates per realization, the unresampled estimate included.
    pub b: usize,
    #[serde(default)]
    pub realization: RealizationMethod,
}

/// Split of the variance of an `N_H × B` replicate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// Variance of the row (realization) means.
    pub metamodel: f64,
    /// Variance of the column (bootstrap replicate) means.
    pub mc: f64,
    /// Variance of all entries.
    pub total: f64,
    /// `total − metamodel − mc`, the interaction part.
    pub residual: f64,
}

/// Decomposes a row-major `n_h × b` matrix. All variances divide by the
/// number of terms, which keeps each part below the total and the residual
/// non-negative.
pub fn decompose_variance(samples: &[f64], n_h: usize, b: usize) -> Result<VarianceDecomposition> {
    if n_h < 2 || b < 2 {
        return invalid(format!("need at least a 2 x 2 replicate matrix, got {n_h} x {b}"));
    }
    if samples.len() != n_h * b {
        return invalid(format!("{} values cannot fill a {n_h} x {b} matrix", samples.len()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return invalid("replicate matrix has non-finite entries");
    }
    let pop_var = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    };
    let rows: Vec<f64> = samples.chunks_exact(b).map(|r| r.iter().sum::<f64>() / b as f64).collect();
    let cols: Vec<f64> =
        (0..b).map(|l| (0..n_h).map(|k| samples[k * b + l]).sum::<f64>() / n_h as f64).collect();
    let metamodel = pop_var(&rows);
    let mc = pop_var(&cols);
    let total = pop_var(samples);
    Ok(VarianceDecomposition { metamodel, mc, total, residual: total - metamodel - mc })
}

/// Replicate matrices of the kriging-based estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyGpDistribution {
    pub n_h: usize,
    pub b: usize,
    /// Per input, row-major `N_H × B`; column 0 holds the unresampled
    /// estimate of each realization.
    pub sh: Vec<Vec<f64>>,
    pub s_full: Vec<Vec<f64>>,
    pub st_ind: Vec<Vec<f64>>,
    pub decomposition: Vec<VarianceDecomposition>,
    /// Points at which each realization is evaluated.
    pub points: usize,
    pub warnings: Vec<String>,
}

impl ShapleyGpDistribution {
    pub fn dim(&self) -> usize {
        self.sh.len()
    }

    /// Mean of all replicates of `Sh_i`.
    pub fn mean_sh(&self, i: usize) -> f64 {
        self.sh[i].iter().sum::<f64>() / self.sh[i].len() as f64
    }
}

/// One bootstrap resampling of the stored outputs.
enum Pattern {
    /// Outer blocks redrawn within every permutation/prefix slice.
    Blocks { y1: Vec<u32>, outer: Vec<u32> },
    /// Permutations redrawn with multiplicities.
    Perms { y1: Vec<u32>, weights: Vec<u32> },
}

struct Layout<'a> {
    permutations: &'a [Ordering],
    d: usize,
    no: usize,
    ni: usize,
}

impl Layout<'_> {
    fn slices(&self) -> usize {
        self.permutations.len() * (self.d - 1)
    }

    fn draw_patterns(&self, method: PermutationMethod, nv: usize, b: usize, seed: u64) -> Vec<Pattern> {
        (1..b)
            .map(|l| {
                let mut rng = substream(seed, &[tag::BOOTSTRAP, l as u64]);
                let y1 = (0..nv).map(|_| rng.random_range(0..nv) as u32).collect();
                match method {
                    PermutationMethod::Exact => {
                        let outer = (0..self.slices() * self.no).map(|_| rng.random_range(0..self.no) as u32).collect();
                        Pattern::Blocks { y1, outer }
                    }
                    PermutationMethod::Random => {
                        let m = self.permutations.len();
                        let mut weights = vec![0u32; m];
                        for _ in 0..m {
                            weights[rng.random_range(0..m)] += 1;
                        }
                        Pattern::Perms { y1, weights }
                    }
                }
            })
            .collect()
    }

    /// Unresampled estimate followed by one estimate per pattern.
    fn replicates(&self, y1: &[f64], y2: &[f64], patterns: &[Pattern]) -> Result<Vec<ShapleyEstimates>> {
        let v = output_variance(y1)?;
        let cells: Vec<f64> = y2.chunks_exact(self.ni).map(unbiased_variance).collect();
        let no = self.no;
        let slice_means: Vec<f64> = cells.chunks_exact(no).map(|c| c.iter().sum::<f64>() / no as f64).collect();
        let mut out = Vec::with_capacity(patterns.len() + 1);
        out.push(estimates_from_slices(self.permutations, self.d, &slice_means, v, None));
        let mut resampled = vec![0.0; y1.len()];
        for pattern in patterns {
            let idx = match pattern {
                Pattern::Blocks { y1, .. } | Pattern::Perms { y1, .. } => y1,
            };
            for (dst, &j) in resampled.iter_mut().zip(idx) {
                *dst = y1[j as usize];
            }
            let vb = unbiased_variance(&resampled);
            out.push(match pattern {
                Pattern::Blocks { outer, .. } => {
                    let means: Vec<f64> = cells
                        .chunks_exact(no)
                        .zip(outer.chunks_exact(no))
                        .map(|(c, pick)| pick.iter().map(|&o| c[o as usize]).sum::<f64>() / no as f64)
                        .collect();
                    estimates_from_slices(self.permutations, self.d, &means, vb, None)
                }
                Pattern::Perms { weights, .. } => {
                    estimates_from_slices(self.permutations, self.d, &slice_means, vb, Some(weights))
                }
            });
        }
        Ok(out)
    }
}

fn check_options(d: usize, opts: &GpShapleyOptions) -> Result<()> {
    if d < 2 {
        return invalid("kriging-based Shapley effects need at least two inputs");
    }
    if opts.n_h < 2 || opts.b < 2 {
        return invalid(format!("need N_H >= 2 and B >= 2, got {} and {}", opts.n_h, opts.b));
    }
    Ok(())
}

/// Replicate matrices of the Shapley estimates computed on `N_H`
/// realizations of the conditioned process `gp`.
pub fn shapley_gp(
    gp: &GpModel,
    dist: &InputDistribution,
    config: &ShapleyConfig,
    opts: &GpShapleyOptions,
    seed: u64,
) -> Result<ShapleyGpDistribution> {
    let d = dist.dim();
    check_options(d, opts)?;
    if gp.dim() != d {
        return invalid(format!("GP has {} inputs, distribution has {d}", gp.dim()));
    }
    let design = build_conditional_design(dist, config, seed)?;
    let nv = config.nv;
    let points = design.x1.vstack(&design.x2)?;
    let sampler = RealizationSampler::new(gp, &points, opts.realization, seed)?;
    drop(points);
    let layout = Layout { permutations: &design.permutations, d, no: config.no, ni: config.ni };
    let patterns = layout.draw_patterns(config.method, nv, opts.b, seed);
    let draws = sampler.draw_many(0..opts.n_h, seed);
    let per_k: Vec<Vec<ShapleyEstimates>> = (0..opts.n_h)
        .into_par_iter()
        .map(|k| {
            let y = draws.column(k);
            let y = y.as_slice();
            layout.replicates(&y[..nv], &y[nv..], &patterns)
        })
        .collect::<Result<_>>()?;
    let b = opts.b;
    let gather = |pick: fn(&ShapleyEstimates) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..d).map(|i| per_k.iter().flat_map(|reps| reps.iter().map(move |r| pick(r)[i])).collect()).collect()
    };
    let sh = gather(|r| &r.sh);
    let s_full = gather(|r| &r.s_full);
    let st_ind = gather(|r| &r.st_ind);
    let decomposition = sh.iter().map(|s| decompose_variance(s, opts.n_h, b)).collect::<Result<_>>()?;
    Ok(ShapleyGpDistribution {
        n_h: opts.n_h,
        b,
        sh,
        s_full,
        st_ind,
        decomposition,
        points: sampler.len(),
        warnings: sampler.warnings().to_vec(),
    })
}

/// The same `B` replicates computed on the true model: the unresampled
/// estimate followed by `B − 1` bootstrap ones, per input `Sh` first.
pub fn true_function_replicates<M: Model + ?Sized>(
    model: &M,
    dist: &InputDistribution,
    config: &ShapleyConfig,
    b: usize,
    seed: u64,
) -> Result<Vec<ShapleyEstimates>> {
    let d = dist.dim();
    check_options(d, &GpShapleyOptions { n_h: 2, b, realization: RealizationMethod::Exact })?;
    let design = build_conditional_design(dist, config, seed)?;
    let y1 = evaluate(model, &design.x1)?;
    let y2 = evaluate(model, &design.x2)?;
    let layout = Layout { permutations: &design.permutations, d, no: config.no, ni: config.ni };
    let patterns = layout.draw_patterns(config.method, config.nv, b, seed);
    layout.replicates(&y1, &y2, &patterns)
}

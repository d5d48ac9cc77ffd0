//! Shapley effects by the exact- and random-permutation Monte-Carlo
//! estimators, with the full first-order and independent total Sobol'
//! indices read off the same evaluations.
//!
//! The cost of a prefix `J` of a permutation is
//! `c(J) = E[Var(Y | X_{-J})] / Var(Y)`, estimated by `No` outer draws of
//! `X_{-J}` and `Ni` conditional inner draws of `X_J`. Conventions:
//! `ĉ(∅) = 0` and `ĉ(D) = 1`, so the estimates telescope to exactly one.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GsaError, Result};
use crate::input_model::{InputDistribution, Ordering};
use crate::model::{evaluate, Model, SampleMatrix};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermutationMethod {
    Exact,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapleyConfig {
    pub method: PermutationMethod,
    pub nv: usize,
    pub no: usize,
    pub ni: usize,
    /// Number of permutations for the random method; ignored (`d!`) for the
    /// exact one.
    pub m: usize,
    /// Largest dimension accepted by the exact method.
    #[serde(default = "default_max_exact_dim")]
    pub max_exact_dim: usize,
    /// Refuse designs needing more model evaluations than this.
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
}

fn default_max_exact_dim() -> usize {
    8
}

fn default_max_evaluations() -> usize {
    50_000_000
}

impl ShapleyConfig {
    pub fn exact(nv: usize, no: usize, ni: usize) -> Self {
        Self {
            method: PermutationMethod::Exact,
            nv,
            no,
            ni,
            m: 0,
            max_exact_dim: default_max_exact_dim(),
            max_evaluations: default_max_evaluations(),
        }
    }

    pub fn random(nv: usize, no: usize, ni: usize, m: usize) -> Self {
        Self { method: PermutationMethod::Random, m, ..Self::exact(nv, no, ni) }
    }

    /// Permutations used for a `d`-dimensional input.
    pub fn permutation_count(&self, d: usize) -> Result<usize> {
        match self.method {
            PermutationMethod::Exact => {
                if d > self.max_exact_dim {
                    return invalid(format!(
                        "exact method limited to d <= {}, got d = {d}; use the random method",
                        self.max_exact_dim
                    ));
                }
                Ok((1..=d).product())
            }
            PermutationMethod::Random => Ok(self.m),
        }
    }

    /// `Nv + m(d−1)NoNi`.
    pub fn cost(&self, d: usize) -> Result<usize> {
        let m = self.permutation_count(d)?;
        Ok(self.nv + m * d.saturating_sub(1) * self.no * self.ni)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.nv < 2 || self.no < 1 {
            return invalid(format!("need Nv >= 2 and No >= 1, got Nv = {}, No = {}", self.nv, self.no));
        }
        if self.ni < 2 {
            return invalid(format!("Ni must be at least 2 for an unbiased inner variance, got {}", self.ni));
        }
        if self.method == PermutationMethod::Random && self.m < 1 {
            return invalid("the random method needs m >= 1");
        }
        let cost = self.cost(d)?;
        if cost > self.max_evaluations {
            return Err(GsaError::BudgetExceeded(format!(
                "design needs {cost} evaluations, cap is {}",
                self.max_evaluations
            )));
        }
        Ok(())
    }
}

/// All `d!` permutations in lexicographic order (exact) or `m` uniform draws
/// with replacement (random).
pub fn permutation_plan(d: usize, config: &ShapleyConfig, seed: u64) -> Result<Vec<Ordering>> {
    if d == 0 {
        return invalid("dimension must be positive");
    }
    let count = config.permutation_count(d)?;
    match config.method {
        PermutationMethod::Exact => {
            let mut out = Vec::with_capacity(count);
            let mut perm: Vec<usize> = (0..d).collect();
            loop {
                out.push(Ordering::new(perm.clone())?);
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            Ok(out)
        }
        PermutationMethod::Random => {
            let mut rng = substream(seed, &[tag::PERMUTATIONS]);
            (0..count)
                .map(|_| {
                    let mut p: Vec<usize> = (0..d).collect();
                    p.shuffle(&mut rng);
                    Ordering::new(p)
                })
                .collect()
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Input points for one Shapley run: `x1` for the output variance and `x2`
/// for the conditional cells. Row `((l·(d−1)+p)·No+o)·Ni+t` of `x2` is inner
/// draw `t` of outer draw `o` for the prefix of length `p+1` of
/// permutation `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyDesign {
    pub config: ShapleyConfig,
    pub permutations: Vec<Ordering>,
    pub x1: SampleMatrix,
    pub x2: SampleMatrix,
}

impl ShapleyDesign {
    pub fn dim(&self) -> usize {
        self.x1.ncols()
    }

    pub fn cost(&self) -> usize {
        self.x1.nrows() + self.x2.nrows()
    }

    /// Turns model outputs on `x1` and `x2` into estimates.
    pub fn estimate(&self, y1: Vec<f64>, y2: Vec<f64>) -> Result<ShapleyResult> {
        if y1.len() != self.x1.nrows() || y2.len() != self.x2.nrows() {
            return invalid(format!(
                "expected {} + {} outputs, got {} + {}",
                self.x1.nrows(),
                self.x2.nrows(),
                y1.len(),
                y2.len()
            ));
        }
        let blocks = EvaluationBlocks {
            d: self.dim(),
            no: self.config.no,
            ni: self.config.ni,
            permutations: self.permutations.clone(),
            y1,
            y2,
        };
        ShapleyResult::from_blocks(self.config, blocks)
    }
}

/// Draws the full Shapley design.
pub fn build_conditional_design(dist: &InputDistribution, config: &ShapleyConfig, seed: u64) -> Result<ShapleyDesign> {
    let d = dist.dim();
    config.validate(d)?;
    let permutations = permutation_plan(d, config, seed)?;
    let x1 = dist.sample(config.nv, &mut substream(seed, &[tag::VARIANCE_SAMPLE]));

    let (no, ni) = (config.no, config.ni);
    let slices = permutations.len() * d.saturating_sub(1);
    // one conditional law per (l, p) slice, looked up once
    let mut laws = Vec::with_capacity(slices);
    for perm in &permutations {
        for p in 0..d.saturating_sub(1) {
            let free = &perm.as_slice()[..=p];
            let fixed: Vec<usize> = perm.as_slice()[p + 1..].to_vec();
            let law = dist.conditional_law(&fixed)?;
            let cols: Vec<usize> = law.free().to_vec();
            debug_assert!(free.iter().all(|v| cols.contains(v)));
            laws.push(law);
        }
    }

    let mut data = vec![0.0; slices * no * ni * d];
    let cell_len = ni * d;
    let failure = std::sync::Mutex::new(None);
    data.par_chunks_mut(cell_len.max(1)).enumerate().for_each(|(cell, out)| {
        let slice = cell / no;
        let o = cell % no;
        let (l, p) = (slice / (d - 1), slice % (d - 1));
        let law = &laws[slice];
        let mut rng = substream(seed, &[tag::CONDITIONAL_CELL, l as u64, p as u64, o as u64]);
        let mut z = vec![0.0; d];
        dist.draw_latent(&mut rng, &mut z);
        let z_fixed: Vec<f64> = law.fixed().iter().map(|&v| z[v]).collect();
        let fixed_x: Vec<(usize, f64)> =
            law.fixed().iter().map(|&v| (v, dist.latent_to_input(v, z[v]))).collect();
        let mut z_free = vec![0.0; law.free().len()];
        for t in 0..ni {
            law.draw_latent(&z_fixed, &mut rng, &mut z_free);
            let row = &mut out[t * d..(t + 1) * d];
            for &(v, x) in &fixed_x {
                row[v] = x;
            }
            for (k, &v) in law.free().iter().enumerate() {
                row[v] = dist.latent_to_input(v, z_free[k]);
            }
            if row.iter().any(|x| !x.is_finite()) {
                *failure.lock().expect("poisoned") = Some(GsaError::Numerical("non-finite design point".into()));
            }
        }
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let x2 = SampleMatrix::from_row_major(slices * no * ni, d, data)?;
    Ok(ShapleyDesign { config: *config, permutations, x1, x2 })
}

/// Raw outputs of one run, kept for the bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBlocks {
    pub d: usize,
    pub no: usize,
    pub ni: usize,
    pub permutations: Vec<Ordering>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl EvaluationBlocks {
    pub fn m(&self) -> usize {
        self.permutations.len()
    }

    /// Inner outputs of cell `(l, p, o)`.
    pub fn cell(&self, l: usize, p: usize, o: usize) -> &[f64] {
        let start = ((l * (self.d - 1) + p) * self.no + o) * self.ni;
        &self.y2[start..start + self.ni]
    }

    /// Unbiased inner variance of every cell, laid out as `[l][p][o]`.
    pub fn cell_variances(&self) -> Vec<f64> {
        self.y2.chunks_exact(self.ni).map(unbiased_variance).collect()
    }
}

pub(crate) fn unbiased_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// `ĉ(J)` for the prefix of length `p+1` of permutation `l`.
pub fn estimate_cost(blocks: &EvaluationBlocks, l: usize, p: usize) -> Result<f64> {
    if l >= blocks.m() || p + 1 >= blocks.d {
        return invalid(format!("no stored slice for permutation {l}, prefix length {}", p + 1));
    }
    let v = output_variance(&blocks.y1)?;
    let mean = (0..blocks.no).map(|o| unbiased_variance(blocks.cell(l, p, o))).sum::<f64>() / blocks.no as f64;
    Ok(mean / v)
}

pub(crate) fn output_variance(y1: &[f64]) -> Result<f64> {
    let v = unbiased_variance(y1);
    if !(v > 0.0) {
        return Err(GsaError::DegenerateOutput(format!("output variance estimate is {v}")));
    }
    Ok(v)
}

/// Point estimates from per-slice mean conditional variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyEstimates {
    pub sh: Vec<f64>,
    pub s_full: Vec<f64>,
    pub st_ind: Vec<f64>,
}

/// Normalized costs `ĉ` of one permutation, completed with `ĉ(D) = 1`.
fn costs_of(slice_means: &[f64], v: f64) -> impl Iterator<Item = f64> + '_ {
    slice_means.iter().map(move |&s| s / v).chain(std::iter::once(1.0))
}

/// Shapley, full first-order and independent total estimates from the
/// `m × (d−1)` table of mean inner variances and the output variance `v`.
/// `weights[l]` counts how often permutation `l` is used (bootstrap
/// multiplicities); `None` means once each.
pub(crate) fn estimates_from_slices(
    perms: &[Ordering],
    d: usize,
    slice_means: &[f64],
    v: f64,
    weights: Option<&[u32]>,
) -> ShapleyEstimates {
    let mut sh = vec![0.0; d];
    let mut first = vec![(0.0, 0.0); d];
    let mut last = vec![(0.0, 0.0); d];
    let mut total = 0.0;
    for (l, perm) in perms.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[l] as f64);
        if w == 0.0 {
            continue;
        }
        total += w;
        let ord = perm.as_slice();
        let mut prev = 0.0;
        let costs = costs_of(&slice_means[l * (d - 1)..(l + 1) * (d - 1)], v);
        for (k, c) in costs.enumerate() {
            sh[ord[k]] += w * (c - prev);
            if k == 0 {
                first[ord[0]].0 += w * c;
                first[ord[0]].1 += w;
            }
            if k == d - 1 {
                last[ord[k]].0 += w * (1.0 - prev);
                last[ord[k]].1 += w;
            }
            prev = c;
        }
    }
    let ratio = |(s, n): (f64, f64)| if n > 0.0 { s / n } else { f64::NAN };
    ShapleyEstimates {
        sh: sh.into_iter().map(|s| s / total).collect(),
        // `ĉ({i})` is `E[Var(Y|X_{-i})]/Var(Y)`, the independent total index;
        // `1 − ĉ(D∖{i})` is `Var(E[Y|X_i])/Var(Y)`, the full first-order one
        st_ind: first.into_iter().map(ratio).collect(),
        s_full: last.into_iter().map(ratio).collect(),
    }
}

/// Result of one Shapley run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub config: ShapleyConfig,
    /// Model evaluations spent, `Nv + m(d−1)NoNi`.
    pub cost: usize,
    pub variance: f64,
    pub sh: Vec<f64>,
    pub s_full: Vec<f64>,
    pub st_ind: Vec<f64>,
    pub blocks: EvaluationBlocks,
}

impl ShapleyResult {
    pub fn from_blocks(config: ShapleyConfig, blocks: EvaluationBlocks) -> Result<Self> {
        let d = blocks.d;
        let m = blocks.m();
        if blocks.y2.len() != m * d.saturating_sub(1) * blocks.no * blocks.ni {
            return invalid("evaluation block has the wrong shape");
        }
        let variance = output_variance(&blocks.y1)?;
        let est = if d == 1 {
            ShapleyEstimates { sh: vec![1.0], s_full: vec![1.0], st_ind: vec![1.0] }
        } else {
            let slices = blocks.slice_means();
            estimates_from_slices(&blocks.permutations, d, &slices, variance, None)
        };
        Ok(Self {
            config,
            cost: blocks.y1.len() + blocks.y2.len(),
            variance,
            sh: est.sh,
            s_full: est.s_full,
            st_ind: est.st_ind,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.blocks.d
    }

    /// Normalized increment `ĉ(P ∪ {i}) − ĉ(P)` of every input along every
    /// permutation, laid out as `[l][i]`.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim();
        let slices = self.blocks.slice_means();
        let mut out = vec![0.0; self.blocks.m() * d];
        for (l, perm) in self.blocks.permutations.iter().enumerate() {
            let mut prev = 0.0;
            let seg = if d > 1 { &slices[l * (d - 1)..(l + 1) * (d - 1)] } else { &[][..] };
            for (k, c) in costs_of(seg, self.variance).enumerate() {
                out[l * d + perm.as_slice()[k]] = c - prev;
                prev = c;
            }
        }
        out
    }
}

impl EvaluationBlocks {
    /// Mean inner variance of every `(l, p)` slice.
    pub(crate) fn slice_means(&self) -> Vec<f64> {
        self.cell_variances()
            .chunks_exact(self.no)
            .map(|c| c.iter().sum::<f64>() / self.no as f64)
            .collect()
    }
}

/// Shapley effects of `model` under `dist`, plus the full first-order and
/// independent total Sobol' indices from the same evaluations.
pub fn shapley_effects<M: Model + ?Sized>(
    model: &M,
    dist: &InputDistribution,
    config: &ShapleyConfig,
    seed: u64,
) -> Result<ShapleyResult> {
    let design = build_conditional_design(dist, config, seed)?;
    let y1 = evaluate(model, &design.x1)?;
    let y2 = evaluate(model, &design.x2).map_err(|e| match e {
        GsaError::ModelEvaluation { row, input, output } => {
            GsaError::ModelEvaluation { row: row + design.x1.nrows(), input, output }
        }
        other => other,
    })?;
    design.estimate(y1, y2)
}

/// Per-input `(S_full, ST_ind)` pairs of a run.
pub fn extract_sobol_from_shapley(result: &ShapleyResult) -> Vec<(f64, f64)> {
    result.s_full.iter().copied().zip(result.st_ind.iter().copied()).collect()
}

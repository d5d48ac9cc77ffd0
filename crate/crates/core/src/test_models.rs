//! Benchmark models with closed-form sensitivity indices: the linear and
//! product models with Gaussian inputs, and the Ishigami function.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::input_model::{CorrelationMatrix, InputDistribution, MarginSpec};
use crate::model::Model;

/// `ST_{input | given}`: total index of `X_input` with its dependence on
/// `X_given` removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalIndex {
    pub input: usize,
    pub given: Vec<usize>,
    pub value: f64,
}

/// Per-input sensitivity indices of one model, plus `Var(Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub variance: f64,
    pub sh: Vec<f64>,
    pub s_full: Vec<f64>,
    pub st_full: Vec<f64>,
    pub s_ind: Vec<f64>,
    pub st_ind: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub st_cond: Vec<ConditionalIndex>,
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        self.sh.len()
    }

    pub fn st_cond(&self, input: usize, given: &[usize]) -> Option<f64> {
        let mut key = given.to_vec();
        key.sort_unstable();
        self.st_cond.iter().find(|c| c.input == input && c.given == key).map(|c| c.value)
    }
}

/// `Y = β₀ + βᵀX` with `X ~ N(0, Σ)`, `Σ` built from the standard deviations
/// and the pairwise correlations `α = ρ₁₂`, `ρ = ρ₁₃`, `γ = ρ₂₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianParams {
    pub beta0: f64,
    pub beta: [f64; 3],
    pub sigma: [f64; 3],
    pub alpha: f64,
    pub rho: f64,
    pub gamma: f64,
}

impl LinearGaussianParams {
    pub fn new(beta: [f64; 3], sigma: [f64; 3], alpha: f64, rho: f64, gamma: f64) -> Result<Self> {
        let p = Self { beta0: 0.0, beta, sigma, alpha, rho, gamma };
        p.correlation()?;
        Ok(p)
    }

    pub fn correlation(&self) -> Result<CorrelationMatrix> {
        if self.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return invalid(format!("standard deviations must be positive, got {:?}", self.sigma));
        }
        let (a, r, g) = (self.alpha, self.rho, self.gamma);
        CorrelationMatrix::from_row_major(3, &[1.0, a, r, a, 1.0, g, r, g, 1.0])
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let c = self.correlation()?;
        let s = self.sigma;
        Ok(DMatrix::from_fn(3, 3, |i, j| c.matrix()[(i, j)] * s[i] * s[j]))
    }

    pub fn distribution(&self) -> Result<InputDistribution> {
        InputDistribution::gaussian(&[0.0; 3], &self.sigma, self.correlation()?)
    }

    pub fn variance(&self) -> f64 {
        let [b1, b2, b3] = self.beta;
        let [s1, s2, s3] = self.sigma;
        let (a, r, g) = (self.alpha, self.rho, self.gamma);
        b1 * b1 * s1 * s1 + b2 * b2 * s2 * s2 + b3 * b3 * s3 * s3
            + 2.0 * g * b2 * b3 * s2 * s3
            + 2.0 * b1 * s1 * (a * b2 * s2 + r * b3 * s3)
    }
}

impl Model for LinearGaussianParams {
    fn eval(&self, x: &[f64]) -> f64 {
        eval_linear(self, x)
    }
}

pub fn eval_linear(p: &LinearGaussianParams, x: &[f64]) -> f64 {
    p.beta0 + p.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// `Y = (β₁X₁)(β₂X₂)` with centred Gaussian inputs of correlation `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractiveParams {
    pub beta: [f64; 2],
    pub sigma: [f64; 2],
    pub rho: f64,
}

impl InteractiveParams {
    pub fn new(beta: [f64; 2], sigma: [f64; 2], rho: f64) -> Result<Self> {
        let p = Self { beta, sigma, rho };
        p.distribution()?;
        Ok(p)
    }

    pub fn distribution(&self) -> Result<InputDistribution> {
        let corr = CorrelationMatrix::from_row_major(2, &[1.0, self.rho, self.rho, 1.0])?;
        InputDistribution::gaussian(&[0.0; 2], &self.sigma, corr)
    }
}

impl Model for InteractiveParams {
    fn eval(&self, x: &[f64]) -> f64 {
        eval_interactive(self, x)
    }
}

pub fn eval_interactive(p: &InteractiveParams, x: &[f64]) -> f64 {
    p.beta[0] * p.beta[1] * x[0] * x[1]
}

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;

pub fn eval_ishigami(x: &[f64]) -> f64 {
    let s2 = x[1].sin();
    x[0].sin() + ISHIGAMI_A * s2 * s2 + ISHIGAMI_B * x[2].powi(4) * x[0].sin()
}

/// The Ishigami function as a [`Model`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ishigami;

impl Model for Ishigami {
    fn eval(&self, x: &[f64]) -> f64 {
        eval_ishigami(x)
    }
}

/// Three `U[−π, π]` inputs tied by the given copula correlation.
pub fn ishigami_distribution(copula: CorrelationMatrix) -> Result<InputDistribution> {
    InputDistribution::new(vec![MarginSpec::uniform(-PI, PI)?; 3], copula)
}

/// Table of the product model's indices.
pub fn analytic_indices_interactive(p: &InteractiveParams) -> IndexSet {
    let r2 = p.rho * p.rho;
    let base = (p.beta[0] * p.beta[1] * p.sigma[0] * p.sigma[1]).powi(2);
    let st_ind = (1.0 - r2) / (1.0 + r2);
    IndexSet {
        variance: (1.0 + r2) * base,
        sh: vec![0.5; 2],
        s_full: vec![2.0 * r2 / (1.0 + r2); 2],
        st_full: vec![1.0; 2],
        s_ind: vec![0.0; 2],
        st_ind: vec![st_ind; 2],
        st_cond: vec![
            ConditionalIndex { input: 0, given: vec![1], value: st_ind },
            ConditionalIndex { input: 1, given: vec![0], value: st_ind },
        ],
    }
}

/// Closed-form indices of the linear Gaussian model. Rejects unit
/// correlations, where the conditional laws degenerate.
pub fn analytic_indices_linear(p: &LinearGaussianParams) -> Result<IndexSet> {
    p.correlation()?;
    let (a, r, g) = (p.alpha, p.rho, p.gamma);
    if a.abs() >= 1.0 || r.abs() >= 1.0 || g.abs() >= 1.0 {
        return invalid("linear model oracle needs |alpha|, |rho|, |gamma| < 1");
    }
    let [b1, b2, b3] = p.beta;
    let [s1, s2, s3] = p.sigma;
    let (t1, t2, t3) = (b1 * s1, b2 * s2, b3 * s3);
    let var = p.variance();
    if var <= 0.0 {
        return invalid("linear model has zero output variance");
    }
    let (a2, r2, g2) = (a * a, r * r, g * g);
    let minor = -1.0 + a2 + g2 + r2 - 2.0 * a * g * r;

    let s_ind = [t1 * t1 * minor / (g2 - 1.0), t2 * t2 * minor / (r2 - 1.0), t3 * t3 * minor / (a2 - 1.0)];
    let s_full = [
        (t1 + a * t2 + r * t3).powi(2),
        (a * t1 + t2 + g * t3).powi(2),
        (r * t1 + g * t2 + t3).powi(2),
    ];
    let st_1_2 = -(t1 * (a2 - 1.0) + t3 * (a * g - r)).powi(2) / (a2 - 1.0);
    let st_1_3 = -(t1 * (r2 - 1.0) + t2 * (g * r - a)).powi(2) / (r2 - 1.0);
    let st_2_1 = -(t2 * (a2 - 1.0) + t3 * (a * r - g)).powi(2) / (a2 - 1.0);
    let st_2_3 = -(t2 * (g2 - 1.0) + t1 * (g * r - a)).powi(2) / (g2 - 1.0);
    let st_3_1 = -(t3 * (r2 - 1.0) + t2 * (a * r - g)).powi(2) / (r2 - 1.0);
    let st_3_2 = -(t3 * (g2 - 1.0) + t1 * (a * g - r)).powi(2) / (g2 - 1.0);

    let n = |v: f64| v / var;
    let s_ind: Vec<f64> = s_ind.iter().map(|&v| n(v)).collect();
    let s_full: Vec<f64> = s_full.iter().map(|&v| n(v)).collect();
    let cond = [
        (0, 1, n(st_1_2)),
        (0, 2, n(st_1_3)),
        (1, 0, n(st_2_1)),
        (1, 2, n(st_2_3)),
        (2, 0, n(st_3_1)),
        (2, 1, n(st_3_2)),
    ];
    let mut st_cond: Vec<ConditionalIndex> =
        cond.iter().map(|&(i, j, value)| ConditionalIndex { input: i, given: vec![j], value }).collect();
    let pairs = [(0, [1, 2]), (1, [0, 2]), (2, [0, 1])];
    for (i, given) in pairs {
        st_cond.push(ConditionalIndex { input: i, given: given.to_vec(), value: s_ind[i] });
    }
    let pair_cond = |i: usize, j: usize| cond.iter().find(|c| c.0 == i && c.1 == j).expect("all pairs listed").2;
    let sh = (0..3)
        .map(|i| {
            let [j, k] = pairs[i].1;
            (s_full[i] + 0.5 * pair_cond(i, j) + 0.5 * pair_cond(i, k) + s_ind[i]) / 3.0
        })
        .collect();
    Ok(IndexSet { variance: var, sh, st_full: s_full.clone(), s_full, st_ind: s_ind.clone(), s_ind, st_cond })
}

/// Full first-order indices `S_u^full` of the pairs `{1,2}`, `{1,3}`, `{2,3}`
/// of the linear Gaussian model.
pub fn linear_pair_full_indices(p: &LinearGaussianParams) -> Result<[f64; 3]> {
    p.correlation()?;
    let (a, r, g) = (p.alpha, p.rho, p.gamma);
    if a.abs() >= 1.0 || r.abs() >= 1.0 || g.abs() >= 1.0 {
        return invalid("linear model oracle needs |alpha|, |rho|, |gamma| < 1");
    }
    let [b1, b2, b3] = p.beta;
    let [s1, s2, s3] = p.sigma;
    let (t1, t2, t3) = (b1 * s1, b2 * s2, b3 * s3);
    let (a2, r2, g2) = (a * a, r * r, g * g);
    let var = p.variance();
    let cross = 2.0 * g * t2 * t3 + 2.0 * t1 * (a * t2 + r * t3);
    let s12 = t1 * t1 + t2 * t2 + cross - t3 * t3 * (g2 + r2 - 2.0 * a * g * r) / (a2 - 1.0);
    let s13 = t1 * t1 + t3 * t3 + cross - t2 * t2 * (a2 + g2 - 2.0 * a * g * r) / (r2 - 1.0);
    let s23 = t2 * t2 + t3 * t3 + cross - t1 * t1 * (a2 + r2 - 2.0 * a * g * r) / (g2 - 1.0);
    Ok([s12 / var, s13 / var, s23 / var])
}

/// `Var(Y)` of the linear model after scaling `σ_target` by `shrink`.
pub fn variance_reduction_table(p: &LinearGaussianParams, shrink: f64, target: usize) -> Result<f64> {
    if !(shrink > 0.0 && shrink <= 1.0) {
        return invalid(format!("shrink factor must be in (0, 1], got {shrink}"));
    }
    if target >= 3 {
        return invalid(format!("target input {target} out of range"));
    }
    let mut q = *p;
    q.sigma[target] *= shrink;
    Ok(q.variance())
}

/// Indices of the Ishigami function with independent `U[−π, π]` inputs.
/// The constants come from the closed-form ANOVA variances and are checked
/// against tensor Gauss–Legendre quadrature in the test suite.
pub fn oracle_ishigami_independent() -> IndexSet {
    const VARIANCE: f64 = 13.844587940719254;
    const S1: f64 = 0.31390519114781146;
    const S2: f64 = 0.4424111447900409;
    const ST1: f64 = 0.5575888552099592;
    const ST3: f64 = 0.24368366406214773;
    const SH1: f64 = 0.4357470231788853;
    const SH3: f64 = 0.12184183203107386;
    let s = vec![S1, S2, 0.0];
    let st = vec![ST1, S2, ST3];
    IndexSet {
        variance: VARIANCE,
        sh: vec![SH1, S2, SH3],
        s_full: s.clone(),
        st_full: st.clone(),
        s_ind: s,
        st_ind: st,
        st_cond: Vec::new(),
    }
}

/// Closed-form ANOVA variances `(V, V₁, V₂, V₁₃)` of the Ishigami function.
pub fn ishigami_partial_variances() -> (f64, f64, f64, f64) {
    let (a, b) = (ISHIGAMI_A, ISHIGAMI_B);
    let pi4 = PI.powi(4);
    let pi8 = PI.powi(8);
    let v = a * a / 8.0 + b * pi4 / 5.0 + b * b * pi8 / 18.0 + 0.5;
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = 8.0 * b * b * pi8 / 225.0;
    (v, v1, v2, v13)
}

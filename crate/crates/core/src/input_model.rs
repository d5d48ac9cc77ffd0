//! Dependent input distributions: parametric margins tied by a Gaussian
//! copula.
//!
//! All dependence lives in a latent standard-normal vector `z ~ N(0, R)`;
//! input `i` is `F_i^{-1}(Φ(z_i))`. Rosenblatt transforms and conditional
//! draws are done on the latent vector, where they reduce to Cholesky
//! factors and Schur complements.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GsaError, Result};
use crate::model::SampleMatrix;
use crate::normal::{norm_cdf, norm_quantile};

/// Smallest probability handed to the normal quantile when a uniform input
/// sits exactly on the edge of its support.
const EDGE_PROB: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MarginSpec {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, std: f64 },
}

impl MarginSpec {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let m = MarginSpec::Uniform { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        let m = MarginSpec::Normal { mean, std };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginSpec::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && upper > lower) {
                    return invalid(format!("uniform margin needs finite lower < upper, got [{lower}, {upper}]"));
                }
            }
            MarginSpec::Normal { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                    return invalid(format!("normal margin needs finite mean and std > 0, got ({mean}, {std})"));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginSpec::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            MarginSpec::Normal { mean, std } => norm_cdf((x - mean) / std),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            MarginSpec::Uniform { lower, upper } => lower + (upper - lower) * u,
            MarginSpec::Normal { mean, std } => mean + std * norm_quantile(u),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginSpec::Uniform { lower, upper } => 0.5 * (lower + upper),
            MarginSpec::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarginSpec::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            MarginSpec::Normal { std, .. } => std * std,
        }
    }

    /// Finite interval holding the bulk of the margin (the whole support for
    /// uniform margins, mean ± 3 std for normal ones).
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            MarginSpec::Uniform { lower, upper } => (lower, upper),
            MarginSpec::Normal { mean, std } => (mean - 3.0 * std, mean + 3.0 * std),
        }
    }

    fn from_latent(&self, z: f64) -> f64 {
        match *self {
            MarginSpec::Uniform { lower, upper } => lower + (upper - lower) * norm_cdf(z),
            MarginSpec::Normal { mean, std } => mean + std * z,
        }
    }

    fn to_latent(&self, input: usize, x: f64) -> Result<f64> {
        match *self {
            MarginSpec::Uniform { lower, upper } => {
                if !(lower..=upper).contains(&x) {
                    return Err(GsaError::OutsideSupport { input, value: x });
                }
                let u = ((x - lower) / (upper - lower)).clamp(EDGE_PROB, 1.0 - f64::EPSILON / 2.0);
                Ok(norm_quantile(u))
            }
            MarginSpec::Normal { mean, std } => {
                if !x.is_finite() {
                    return Err(GsaError::OutsideSupport { input, value: x });
                }
                Ok((x - mean) / std)
            }
        }
    }
}

/// Symmetric positive-definite matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() != d {
            return invalid(format!("correlation matrix must be square and non-empty, got {}x{}", d, entries.ncols()));
        }
        for i in 0..d {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return invalid(format!("correlation matrix diagonal entry {} is {}, expected 1", i + 1, entries[(i, i)]));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 {
                    return invalid(format!("correlation matrix is not symmetric at ({}, {})", i + 1, j + 1));
                }
                if a.abs() > 1.0 {
                    return invalid(format!("correlation entry ({}, {}) = {a} is outside [-1, 1]", i + 1, j + 1));
                }
            }
        }
        let chol = entries
            .clone()
            .cholesky()
            .ok_or_else(|| GsaError::NotPositiveDefinite(format!("{entries}")))?
            .l();
        Ok(Self { entries, chol })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is a correlation matrix")
    }

    pub fn from_row_major(d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != d * d {
            return invalid(format!("expected {} correlation entries for d = {d}, got {}", d * d, values.len()));
        }
        Self::new(DMatrix::from_row_slice(d, d, values))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Lower Cholesky factor.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn is_identity(&self) -> bool {
        self.entries == DMatrix::identity(self.dim(), self.dim())
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.entries[(k / d, k % d)]).collect()
    }
}

/// A permutation of the input indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let d = perm.len();
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return invalid(format!("{perm:?} is not a permutation of 0..{d}"));
            }
            seen[p] = true;
        }
        Ok(Ordering(perm))
    }

    pub fn identity(d: usize) -> Self {
        Ordering((0..d).collect())
    }

    /// `(i, i+1, …, d−1, 0, …, i−1)`: the left-circular reordering starting
    /// at input `i`.
    pub fn circular(i: usize, d: usize) -> Result<Self> {
        if i >= d {
            return invalid(format!("ordering start {i} out of range for d = {d}"));
        }
        Ok(Ordering((0..d).map(|k| (i + k) % d).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn position_of(&self, input: usize) -> Option<usize> {
        self.0.iter().position(|&v| v == input)
    }
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = GsaError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Ordering::new(v)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.0
    }
}

/// Latent-Gaussian law of `z_free | z_fixed`.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    fixed: Vec<usize>,
    free: Vec<usize>,
    /// `R_free,fixed · R_fixed,fixed⁻¹`
    coef: DMatrix<f64>,
    /// Lower factor of the Schur complement.
    chol: DMatrix<f64>,
}

impl ConditionalLaw {
    fn new(corr: &DMatrix<f64>, fixed: Vec<usize>, free: Vec<usize>) -> Result<Self> {
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |a, b| corr[(rows[a], cols[b])])
        };
        let r_gg = sub(&free, &free);
        if fixed.is_empty() {
            let chol = r_gg.cholesky().ok_or_else(|| GsaError::NotPositiveDefinite("free block".into()))?.l();
            return Ok(Self { coef: DMatrix::zeros(free.len(), 0), chol, fixed, free });
        }
        let r_ff = sub(&fixed, &fixed);
        let r_gf = sub(&free, &fixed);
        let ff = r_ff
            .cholesky()
            .ok_or_else(|| GsaError::NotPositiveDefinite(format!("conditioning block {fixed:?}")))?;
        // coef = R_gf R_ff⁻¹  ⇔  R_ff coefᵀ = R_fg
        let coef = ff.solve(&r_gf.transpose()).transpose();
        let schur = &r_gg - &coef * r_gf.transpose();
        let schur = (&schur + schur.transpose()) * 0.5;
        let chol = if free.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            schur
                .cholesky()
                .ok_or_else(|| GsaError::NotPositiveDefinite(format!("Schur complement given {fixed:?}")))?
                .l()
        };
        Ok(Self { fixed, free, coef, chol })
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Conditional mean `E[z_free | z_fixed]`.
    pub fn latent_mean(&self, z_fixed: &[f64]) -> Vec<f64> {
        (0..self.free.len())
            .map(|a| (0..self.fixed.len()).map(|b| self.coef[(a, b)] * z_fixed[b]).sum())
            .collect()
    }

    /// Draws `z_free` given `z_fixed` (both in the law's index order).
    pub fn draw_latent<R: Rng + ?Sized>(&self, z_fixed: &[f64], rng: &mut R, out: &mut [f64]) {
        let g = self.free.len();
        let mut xi = [0.0f64; 64];
        let mut xi_heap;
        let xi: &mut [f64] = if g <= 64 {
            &mut xi[..g]
        } else {
            xi_heap = vec![0.0; g];
            &mut xi_heap
        };
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for a in 0..g {
            let mut acc = 0.0;
            for b in 0..self.fixed.len() {
                acc += self.coef[(a, b)] * z_fixed[b];
            }
            for (b, &x) in xi.iter().enumerate().take(a + 1) {
                acc += self.chol[(a, b)] * x;
            }
            out[a] = acc;
        }
    }
}

/// Per-ordering Rosenblatt map of a Gaussian-copula distribution.
#[derive(Debug, Clone)]
pub struct RosenblattMap {
    ordering: Ordering,
    chol: DMatrix<f64>,
    margins: Vec<MarginSpec>,
}

impl RosenblattMap {
    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    /// `x ↦ U` with `U_k` the conditional CDF of the k-th input of the
    /// ordering given the ones before it.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.margins.len();
        if x.len() != d {
            return invalid(format!("expected {d} inputs, got {}", x.len()));
        }
        let ord = self.ordering.as_slice();
        let mut w = vec![0.0; d];
        for k in 0..d {
            let v = ord[k];
            let z = self.margins[v].to_latent(v, x[v])?;
            let mut acc = z;
            for j in 0..k {
                acc -= self.chol[(k, j)] * w[j];
            }
            w[k] = acc / self.chol[(k, k)];
        }
        Ok(w.into_iter().map(norm_cdf).collect())
    }

    /// Inverse of [`forward`](Self::forward); `u` must lie in the open unit cube.
    pub fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.margins.len()];
        self.inverse_into(u, &mut x)?;
        Ok(x)
    }

    pub fn inverse_into(&self, u: &[f64], x: &mut [f64]) -> Result<()> {
        let d = self.margins.len();
        if u.len() != d {
            return invalid(format!("expected {d} coordinates, got {}", u.len()));
        }
        let mut w = [0.0f64; 64];
        let mut w_heap;
        let w: &mut [f64] = if d <= 64 {
            &mut w[..d]
        } else {
            w_heap = vec![0.0; d];
            &mut w_heap
        };
        for k in 0..d {
            if !(u[k] > 0.0 && u[k] < 1.0) {
                return invalid(format!("Rosenblatt coordinate {} = {} is not in (0, 1)", k + 1, u[k]));
            }
            w[k] = norm_quantile(u[k]);
        }
        let ord = self.ordering.as_slice();
        for k in 0..d {
            let mut z = 0.0;
            for j in 0..=k {
                z += self.chol[(k, j)] * w[j];
            }
            let v = ord[k];
            x[v] = self.margins[v].from_latent(z);
        }
        Ok(())
    }
}

/// Serialized form of [`InputDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub margins: Vec<MarginSpec>,
    /// Row-major `d × d` correlation of the Gaussian copula; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<f64>>,
}

/// Random input vector `X`: margins plus Gaussian-copula correlation.
/// Immutable once built; conditional laws are cached per conditioning set.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct InputDistribution {
    margins: Vec<MarginSpec>,
    copula: CorrelationMatrix,
    laws: RwLock<HashMap<Vec<usize>, Arc<ConditionalLaw>>>,
}

impl Clone for InputDistribution {
    fn clone(&self) -> Self {
        Self { margins: self.margins.clone(), copula: self.copula.clone(), laws: RwLock::default() }
    }
}

impl PartialEq for InputDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.margins == other.margins && self.copula == other.copula
    }
}

impl TryFrom<DistributionSpec> for InputDistribution {
    type Error = GsaError;
    fn try_from(spec: DistributionSpec) -> Result<Self> {
        let d = spec.margins.len();
        let copula = match spec.correlation {
            Some(v) => CorrelationMatrix::from_row_major(d, &v)?,
            None => CorrelationMatrix::identity(d.max(1)),
        };
        InputDistribution::new(spec.margins, copula)
    }
}

impl From<InputDistribution> for DistributionSpec {
    fn from(d: InputDistribution) -> Self {
        let correlation = if d.copula.is_identity() { None } else { Some(d.copula.to_row_major()) };
        DistributionSpec { margins: d.margins, correlation }
    }
}

impl InputDistribution {
    pub fn new(margins: Vec<MarginSpec>, copula: CorrelationMatrix) -> Result<Self> {
        if margins.is_empty() {
            return invalid("a distribution needs at least one margin");
        }
        if margins.len() != copula.dim() {
            return invalid(format!("{} margins but a {}x{} copula", margins.len(), copula.dim(), copula.dim()));
        }
        for m in &margins {
            m.validate()?;
        }
        Ok(Self { margins, copula, laws: RwLock::default() })
    }

    pub fn independent(margins: Vec<MarginSpec>) -> Result<Self> {
        let d = margins.len();
        Self::new(margins, CorrelationMatrix::identity(d.max(1)))
    }

    /// Gaussian vector `N(mean, diag(std) · corr · diag(std))`.
    pub fn gaussian(means: &[f64], stds: &[f64], corr: CorrelationMatrix) -> Result<Self> {
        if means.len() != stds.len() {
            return invalid("means and stds differ in length");
        }
        let margins = means
            .iter()
            .zip(stds)
            .map(|(&m, &s)| MarginSpec::normal(m, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(margins, corr)
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn margins(&self) -> &[MarginSpec] {
        &self.margins
    }

    pub fn copula(&self) -> &CorrelationMatrix {
        &self.copula
    }

    pub fn is_independent(&self) -> bool {
        self.copula.is_identity()
    }

    pub(crate) fn latent_to_input(&self, v: usize, z: f64) -> f64 {
        self.margins[v].from_latent(z)
    }

    pub(crate) fn input_to_latent(&self, v: usize, x: f64) -> Result<f64> {
        self.margins[v].to_latent(v, x)
    }

    /// Draws a latent vector `z ~ N(0, R)`.
    pub(crate) fn draw_latent<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64]) {
        let d = self.dim();
        let l = self.copula.cholesky_factor();
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for a in 0..d {
            z[a] = (0..=a).map(|b| l[(a, b)] * xi[b]).sum();
        }
    }

    /// `n` i.i.d. draws of `X`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleMatrix {
        let d = self.dim();
        let mut out = SampleMatrix::zeros(n, d);
        let mut z = vec![0.0; d];
        for i in 0..n {
            self.draw_latent(rng, &mut z);
            let row = out.row_mut(i);
            for v in 0..d {
                row[v] = self.margins[v].from_latent(z[v]);
            }
        }
        out
    }

    pub fn rosenblatt_map(&self, ordering: &Ordering) -> Result<RosenblattMap> {
        let d = self.dim();
        if ordering.len() != d {
            return invalid(format!("ordering of length {} for a {d}-dimensional distribution", ordering.len()));
        }
        let ord = ordering.as_slice();
        let permuted = DMatrix::from_fn(d, d, |a, b| self.copula.matrix()[(ord[a], ord[b])]);
        let chol = permuted
            .cholesky()
            .ok_or_else(|| GsaError::NotPositiveDefinite("permuted correlation".into()))?
            .l();
        Ok(RosenblattMap { ordering: ordering.clone(), chol, margins: self.margins.clone() })
    }

    pub fn rosenblatt(&self, x: &[f64], ordering: &Ordering) -> Result<Vec<f64>> {
        self.rosenblatt_map(ordering)?.forward(x)
    }

    pub fn inverse_rosenblatt(&self, u: &[f64], ordering: &Ordering) -> Result<Vec<f64>> {
        self.rosenblatt_map(ordering)?.inverse(u)
    }

    /// Latent law of the inputs not in `fixed` given those in `fixed`.
    /// Cached by conditioning set.
    pub fn conditional_law(&self, fixed: &[usize]) -> Result<Arc<ConditionalLaw>> {
        let d = self.dim();
        let mut key = fixed.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.len() != fixed.len() || key.iter().any(|&v| v >= d) {
            return invalid(format!("invalid conditioning set {fixed:?} for d = {d}"));
        }
        if let Some(law) = self.laws.read().expect("law cache poisoned").get(&key) {
            return Ok(law.clone());
        }
        let free: Vec<usize> = (0..d).filter(|v| key.binary_search(v).is_err()).collect();
        let law = Arc::new(ConditionalLaw::new(self.copula.matrix(), key.clone(), free)?);
        self.laws.write().expect("law cache poisoned").insert(key, law.clone());
        Ok(law)
    }

    /// `n` draws of `X_free | X_fixed = values`. `fixed` and `free` must
    /// partition the inputs; output columns follow the order of `free`.
    pub fn conditional_sample<R: Rng + ?Sized>(
        &self,
        fixed: &[usize],
        values: &[f64],
        free: &[usize],
        n: usize,
        rng: &mut R,
    ) -> Result<SampleMatrix> {
        let d = self.dim();
        if fixed.len() != values.len() {
            return invalid("one value is needed per fixed input");
        }
        let mut seen = vec![false; d];
        for &v in fixed.iter().chain(free) {
            if v >= d || seen[v] {
                return invalid(format!("fixed {fixed:?} and free {free:?} do not partition 0..{d}"));
            }
            seen[v] = true;
        }
        if seen.iter().any(|s| !s) {
            return invalid(format!("fixed {fixed:?} and free {free:?} do not partition 0..{d}"));
        }
        let law = self.conditional_law(fixed)?;
        // latent values in the law's (sorted) order
        let mut z_fixed = Vec::with_capacity(fixed.len());
        for &v in law.fixed() {
            let k = fixed.iter().position(|&f| f == v).expect("partition checked");
            z_fixed.push(self.input_to_latent(v, values[k])?);
        }
        let columns: Vec<usize> = free
            .iter()
            .map(|v| law.free().iter().position(|f| f == v).expect("partition checked"))
            .collect();
        let mut out = SampleMatrix::zeros(n, free.len());
        let mut z = vec![0.0; law.free().len()];
        for i in 0..n {
            law.draw_latent(&z_fixed, rng, &mut z);
            let row = out.row_mut(i);
            for (c, &k) in columns.iter().enumerate() {
                row[c] = self.margins[free[c]].from_latent(z[k]);
            }
        }
        Ok(out)
    }
}

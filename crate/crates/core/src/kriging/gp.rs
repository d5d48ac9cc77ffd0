//! Universal kriging: linear trend `f(x) = (1, x₁, …, x_d)`, anisotropic
//! Matérn-5/2 correlation, GLS trend coefficients and a REML variance.
//! Correlation lengths maximize the profile restricted likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GsaError, Result};
use crate::model::SampleMatrix;
use crate::rng::substream;

const SQRT5: f64 = 2.236_067_977_499_79;
/// Fixed seed for the multi-start points of the likelihood search.
const FIT_SEED: u64 = 0x6b72_6967;
const NUGGET_LADDER: [f64; 3] = [1e-8, 1e-6, 1e-4];
/// Reciprocal condition estimate below which a nugget step is taken.
const MIN_RCOND: f64 = 1e-13;

/// Matérn-5/2 correlation at scaled distance `h`.
pub fn matern52(h: f64) -> f64 {
    let s = SQRT5 * h;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn scaled_distance(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    a.iter().zip(b).zip(theta).map(|((x, y), t)| ((x - y) / t).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    /// Observation-noise variance as a fraction of the output sample
    /// variance; it also serves as the correlation nugget during the
    /// likelihood search. Raised along 1e-8 → 1e-6 → 1e-4 when the
    /// correlation matrix is ill conditioned.
    pub nugget: f64,
    /// Per-input bounds on the correlation lengths; defaults to
    /// `[range/50, 10·range]` of each design column.
    pub theta_bounds: Option<Vec<(f64, f64)>>,
    pub starts: usize,
    pub max_iterations: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { nugget: 1e-8, theta_bounds: None, starts: 10, max_iterations: 400 }
    }
}

/// Fitted conditional Gaussian process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpSpec", into = "GpSpec")]
pub struct GpModel {
    design: SampleMatrix,
    observations: Vec<f64>,
    theta: Vec<f64>,
    nugget: f64,
    beta: Vec<f64>,
    sigma2: f64,
    log_likelihood: f64,
    warnings: Vec<String>,
    fit: Factors,
}

/// What gets written to disk; the factorizations are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename = "GpModel")]
pub struct GpSpec {
    pub kernel: String,
    pub trend: String,
    pub design: SampleMatrix,
    pub observations: Vec<f64>,
    pub theta: Vec<f64>,
    pub nugget: f64,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl From<GpModel> for GpSpec {
    fn from(g: GpModel) -> Self {
        GpSpec {
            kernel: "matern52".into(),
            trend: "linear".into(),
            design: g.design,
            observations: g.observations,
            theta: g.theta,
            nugget: g.nugget,
            beta: g.beta,
            sigma2: g.sigma2,
            log_likelihood: g.log_likelihood,
            warnings: g.warnings,
        }
    }
}

impl TryFrom<GpSpec> for GpModel {
    type Error = GsaError;
    fn try_from(s: GpSpec) -> Result<Self> {
        if s.kernel != "matern52" || s.trend != "linear" {
            return invalid(format!("unsupported kernel/trend {}/{}", s.kernel, s.trend));
        }
        if s.theta.len() != s.design.ncols() || s.observations.len() != s.design.nrows() {
            return invalid("GP file has inconsistent dimensions");
        }
        let fit = Factors::new(&s.design, &s.observations, &s.theta, s.nugget)?;
        Ok(GpModel {
            design: s.design,
            observations: s.observations,
            theta: s.theta,
            nugget: s.nugget,
            beta: fit.beta.iter().copied().collect(),
            sigma2: fit.sigma2,
            log_likelihood: fit.log_likelihood,
            warnings: s.warnings,
            fit,
        })
    }
}

/// Everything that depends on `θ` and the nugget.
#[derive(Debug, Clone)]
struct Factors {
    chol: Cholesky<f64, Dyn>,
    /// `R⁻¹F`
    rinv_f: DMatrix<f64>,
    /// Cholesky of `FᵀR⁻¹F`
    gram: Cholesky<f64, Dyn>,
    beta: DVector<f64>,
    /// `R⁻¹(y − Fβ̂)`
    alpha: DVector<f64>,
    sigma2: f64,
    log_likelihood: f64,
    rcond: f64,
}

fn trend_matrix(x: &SampleMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) })
}

fn correlation_matrix(x: &SampleMatrix, theta: &[f64], nugget: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0 + nugget;
        for j in 0..i {
            let v = matern52(scaled_distance(x.row(i), x.row(j), theta));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

impl Factors {
    fn new(x: &SampleMatrix, y: &[f64], theta: &[f64], nugget: f64) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols() + 1;
        let r = correlation_matrix(x, theta, nugget);
        let chol = r.cholesky().ok_or_else(|| GsaError::NotPositiveDefinite("kriging correlation matrix".into()))?;
        let l = chol.l_dirty();
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            dmin = dmin.min(l[(i, i)]);
            dmax = dmax.max(l[(i, i)]);
        }
        let rcond = (dmin / dmax).powi(2);
        let f = trend_matrix(x);
        let rinv_f = chol.solve(&f);
        let gram_m = f.transpose() * &rinv_f;
        let gram = gram_m
            .clone()
            .cholesky()
            .ok_or_else(|| GsaError::Numerical("trend Gram matrix is singular; check for a degenerate design".into()))?;
        let yv = DVector::from_column_slice(y);
        let beta = gram.solve(&(rinv_f.transpose() * &yv));
        let resid = &yv - &f * &beta;
        let alpha = chol.solve(&resid);
        let q = resid.dot(&alpha);
        let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sigma2 = (q / (n - p) as f64).max(1e-300).max(scale * 1e-24);
        let log_det_r: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        let gl = gram.l_dirty();
        let log_det_g: f64 = 2.0 * (0..p).map(|i| gl[(i, i)].ln()).sum::<f64>();
        let log_likelihood = -0.5 * ((n - p) as f64 * sigma2.ln() + log_det_r + log_det_g);
        Ok(Self { chol, rinv_f, gram, beta, alpha, sigma2, log_likelihood, rcond })
    }
}

/// Minimizes `f` over a box with Nelder–Mead; points are clamped into the
/// box before evaluation.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], lo: &[f64], hi: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let d = start.len();
    let clamp = |p: &mut Vec<f64>| {
        for k in 0..d {
            p[k] = p[k].clamp(lo[k], hi[k]);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut p0 = start.to_vec();
    clamp(&mut p0);
    simplex.push((p0.clone(), f(&p0)));
    for k in 0..d {
        let mut p = p0.clone();
        let step = 0.1 * (hi[k] - lo[k]);
        p[k] = if p[k] + step <= hi[k] { p[k] + step } else { p[k] - step };
        let v = f(&p);
        simplex.push((p, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        if spread.abs() < 1e-10 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> =
            (0..d).map(|k| simplex[..d].iter().map(|s| s.0[k]).sum::<f64>() / d as f64).collect();
        let towards = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..d).map(|k| centroid[k] + t * (simplex[d].0[k] - centroid[k])).collect();
            clamp(&mut p);
            p
        };
        let xr = towards(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = if fr < simplex[d].1 { towards(-0.5) } else { towards(0.5) };
            let fc = f(&xc);
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = (0..d).map(|k| best[k] + 0.5 * (s.0[k] - best[k])).collect();
                    let v = f(&p);
                    *s = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Fits the GP to observations `y` at the rows of `design`.
pub fn fit_gp(design: &SampleMatrix, y: &[f64], options: &GpOptions) -> Result<GpModel> {
    let n = design.nrows();
    let d = design.ncols();
    if y.len() != n {
        return invalid(format!("{n} design points but {} observations", y.len()));
    }
    if n < d + 2 {
        return invalid(format!("need at least d + 2 = {} design points, got {n}", d + 2));
    }
    if y.iter().chain(design.as_slice()).any(|v| !v.is_finite()) {
        return invalid("design and observations must be finite");
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(GsaError::DegenerateOutput("all observations are equal".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let dist: f64 = design.row(i).iter().zip(design.row(j)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dist < 1e-10 {
                return invalid(format!("design rows {} and {} coincide", j + 1, i + 1));
            }
        }
    }
    if !(options.nugget >= 0.0) {
        return invalid("nugget must be non-negative");
    }
    let bounds: Vec<(f64, f64)> = match &options.theta_bounds {
        Some(b) if b.len() == d => b.clone(),
        Some(b) => return invalid(format!("{} theta bounds for {d} inputs", b.len())),
        None => (0..d)
            .map(|k| {
                let c = design.column(k);
                let range = c.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - c.iter().copied().fold(f64::INFINITY, f64::min);
                (range / 50.0, 10.0 * range)
            })
            .collect(),
    };
    if bounds.iter().any(|&(lo, hi)| !(lo > 0.0 && hi >= lo)) {
        return invalid("theta bounds must satisfy 0 < lower <= upper");
    }
    let var_y = crate::shapley::unbiased_variance(y);
    let lo: Vec<f64> = bounds.iter().map(|b| b.0.ln()).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b.1.ln()).collect();

    let mut ladder: Vec<f64> = vec![options.nugget];
    ladder.extend(NUGGET_LADDER.iter().copied().filter(|&v| v > options.nugget));
    let mut warnings = Vec::new();
    for (step, &nugget) in ladder.iter().enumerate() {
        let objective = |p: &[f64]| -> f64 {
            let theta: Vec<f64> = p.iter().map(|v| v.exp()).collect();
            match Factors::new(design, y, &theta, nugget) {
                Ok(f) if f.log_likelihood.is_finite() => -f.log_likelihood,
                _ => f64::INFINITY,
            }
        };
        let mut rng = substream(FIT_SEED, &[]);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in 0..options.starts.max(1) {
            let start: Vec<f64> = (0..d)
                .map(|k| if s == 0 { 0.5 * (lo[k] + hi[k]) } else { rng.random_range(lo[k]..=hi[k]) })
                .collect();
            let cand = nelder_mead(&objective, &start, &lo, &hi, options.max_iterations);
            if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
        let (p, value) = best.expect("at least one start");
        if !value.is_finite() {
            warnings.push(format!("correlation matrix not positive definite with nugget {nugget:e}"));
            continue;
        }
        let theta: Vec<f64> = p.iter().map(|v| v.exp()).collect();
        // the noise variance is `nugget · Var(y)`; convert it to correlation
        // units with the fitted process variance
        let at_search = Factors::new(design, y, &theta, nugget)?;
        let scaled = (nugget * var_y / at_search.sigma2).min(nugget);
        let (nugget, fit) = match Factors::new(design, y, &theta, scaled) {
            Ok(f) if f.rcond >= MIN_RCOND => (scaled, f),
            _ => (nugget, at_search),
        };
        if fit.rcond < MIN_RCOND && step + 1 < ladder.len() {
            warnings.push(format!("ill-conditioned correlation matrix with nugget {nugget:e}, raising it"));
            continue;
        }
        return Ok(GpModel {
            design: design.clone(),
            observations: y.to_vec(),
            beta: fit.beta.iter().copied().collect(),
            sigma2: fit.sigma2,
            log_likelihood: fit.log_likelihood,
            theta,
            nugget,
            warnings,
            fit,
        });
    }
    Err(GsaError::Numerical(format!("GP fit failed for every nugget in {ladder:?}")))
}

impl GpModel {
    /// Rebuilds a model from fixed hyperparameters (no likelihood search).
    pub fn with_hyperparameters(design: &SampleMatrix, y: &[f64], theta: &[f64], nugget: f64) -> Result<Self> {
        let spec = GpSpec {
            kernel: "matern52".into(),
            trend: "linear".into(),
            design: design.clone(),
            observations: y.to_vec(),
            theta: theta.to_vec(),
            nugget,
            beta: Vec::new(),
            sigma2: 0.0,
            log_likelihood: 0.0,
            warnings: Vec::new(),
        };
        GpModel::try_from(spec)
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &SampleMatrix {
        &self.design
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn cross_correlation(&self, x: &SampleMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(self.design.nrows(), x.nrows(), |i, j| {
            matern52(scaled_distance(self.design.row(i), x.row(j), &self.theta))
        })
    }

    /// `Fᵀ` columns minus `FᵀR⁻¹r`, one column per point.
    fn trend_gap(&self, f_x: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
        f_x.transpose() - self.fit.rinv_f.transpose() * r
    }

    /// Kriging means at the rows of `x`.
    pub fn predict_mean(&self, x: &SampleMatrix) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let r = self.cross_correlation(x);
        let mean = trend_matrix(x) * &self.fit.beta + r.transpose() * &self.fit.alpha;
        Ok(mean.iter().copied().collect())
    }

    /// Kriging means and variances `s_n²(x, x)` at the rows of `x`.
    pub fn predict(&self, x: &SampleMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dim(x)?;
        let mean = self.predict_mean(x)?;
        let (v, w) = self.whitened(x);
        let var = (0..x.nrows())
            .map(|j| {
                let s = 1.0 - v.column(j).norm_squared() + w.column(j).norm_squared();
                (self.sigma2 * s).max(0.0)
            })
            .collect();
        Ok((mean, var))
    }

    /// Posterior covariance `s_n²(x_i, x_j)` over the rows of `x`.
    pub fn covariance(&self, x: &SampleMatrix) -> Result<DMatrix<f64>> {
        self.cross_covariance(x, x)
    }

    /// Posterior covariance between the rows of `a` and those of `b`.
    pub fn cross_covariance(&self, a: &SampleMatrix, b: &SampleMatrix) -> Result<DMatrix<f64>> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let (va, wa) = self.whitened(a);
        let (vb, wb) = self.whitened(b);
        let mut cov =
            DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| matern52(scaled_distance(a.row(i), b.row(j), &self.theta)));
        cov.gemm_tr(-1.0, &va, &vb, 1.0);
        cov.gemm_tr(1.0, &wa, &wb, 1.0);
        cov *= self.sigma2;
        Ok(cov)
    }

    /// `L⁻¹r(x)` and `L_A⁻¹(f(x) − FᵀR⁻¹r(x))`, one column per point.
    fn whitened(&self, x: &SampleMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = self.cross_correlation(x);
        let v = self.fit.chol.l().solve_lower_triangular(&r).expect("triangular factor is invertible");
        let u = self.trend_gap(&trend_matrix(x), &r);
        let w = self.fit.gram.l().solve_lower_triangular(&u).expect("triangular factor is invertible");
        (v, w)
    }

    /// `Fᵀ R⁻¹ (y − Fβ̂)`: zero up to rounding for a GLS fit.
    pub fn gls_orthogonality(&self) -> Vec<f64> {
        let f = trend_matrix(&self.design);
        (f.transpose() * &self.fit.alpha).iter().copied().collect()
    }

    fn check_dim(&self, x: &SampleMatrix) -> Result<()> {
        if x.ncols() != self.dim() {
            return invalid(format!("GP has {} inputs, points have {}", self.dim(), x.ncols()));
        }
        Ok(())
    }
}

/// `1 − Σ(y − m_n(x))² / Σ(y − ȳ)²`.
pub fn q2_score(gp: &GpModel, x_test: &SampleMatrix, y_test: &[f64]) -> Result<f64> {
    if y_test.len() != x_test.nrows() || y_test.is_empty() {
        return invalid("test inputs and outputs differ in length");
    }
    let pred = gp.predict_mean(x_test)?;
    q2_from_predictions(&pred, y_test)
}

pub(crate) fn q2_from_predictions(pred: &[f64], y: &[f64]) -> Result<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(GsaError::DegenerateOutput("test outputs have zero variance".into()));
    }
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kriging::design::lhs_design;

    fn wave(x: &[f64]) -> f64 {
        (3.0 * x[0]).sin() + x[1] * x[1] + 0.5 * x[0]
    }

    fn fitted(n: usize) -> GpModel {
        let x = lhs_design(n, &[(0.0, 1.0); 2], 1, true).unwrap();
        let y: Vec<f64> = x.rows().map(wave).collect();
        fit_gp(&x, &y, &GpOptions::default()).unwrap()
    }

    #[test]
    fn matern_basics() {
        assert_eq!(matern52(0.0), 1.0);
        assert!(matern52(1.0) < 1.0 && matern52(20.0) < 1e-12);
    }

    #[test]
    fn interpolates_design_points() {
        let gp = fitted(20);
        let (mean, var) = gp.predict(gp.design()).unwrap();
        for (m, y) in mean.iter().zip(gp.observations()) {
            assert!((m - y).abs() <= 1e-6 * y.abs().max(1.0), "{m} vs {y}");
        }
        // `1 − rᵀR⁻¹r` cancels at the design points, leaving a rounding
        // floor well above a tiny nugget
        for v in var {
            assert!(v <= gp.nugget() * gp.sigma2() * (1.0 + 1e-6) + 1e-8 * gp.sigma2(), "{v}");
        }
    }

    #[test]
    fn gls_residual_is_orthogonal_to_trend() {
        let gp = fitted(25);
        for v in gp.gls_orthogonality() {
            assert!(v.abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn variance_matches_bordered_system() {
        let gp = fitted(15);
        let x = SampleMatrix::from_rows(&[vec![0.3, 0.7], vec![1.4, -0.2]]).unwrap();
        let (_, var) = gp.predict(&x).unwrap();
        let n = 15;
        let p = 3;
        let r = correlation_matrix(gp.design(), gp.theta(), gp.nugget());
        let f = trend_matrix(gp.design());
        let mut big = DMatrix::zeros(n + p, n + p);
        big.view_mut((0, p), (p, n)).copy_from(&f.transpose());
        big.view_mut((p, 0), (n, p)).copy_from(&f);
        big.view_mut((p, p), (n, n)).copy_from(&r);
        let inv = big.try_inverse().unwrap();
        for (j, row) in x.rows().enumerate() {
            let mut v = DVector::zeros(n + p);
            v[0] = 1.0;
            v[1] = row[0];
            v[2] = row[1];
            for i in 0..n {
                v[p + i] = matern52(scaled_distance(row, gp.design().row(i), gp.theta()));
            }
            let want = gp.sigma2() * (1.0 - (v.transpose() * &inv * &v)[(0, 0)]);
            assert!((var[j] - want).abs() < 1e-8 * gp.sigma2().max(1.0), "{} vs {want}", var[j]);
        }
    }

    #[test]
    fn far_away_variance_reaches_prior() {
        let gp = fitted(15);
        let x = SampleMatrix::from_rows(&[vec![100.0, 100.0]]).unwrap();
        let (_, var) = gp.predict(&x).unwrap();
        assert!(var[0] >= gp.sigma2());
    }

    #[test]
    fn linear_data_is_reproduced() {
        let x = lhs_design(12, &[(0.0, 1.0); 3], 2, true).unwrap();
        let lin = |r: &[f64]| 1.0 + 2.0 * r[0] - r[1] + 0.5 * r[2];
        let y: Vec<f64> = x.rows().map(lin).collect();
        let gp = fit_gp(&x, &y, &GpOptions::default()).unwrap();
        let test = lhs_design(50, &[(0.1, 0.9); 3], 3, false).unwrap();
        let (mean, var) = gp.predict(&test).unwrap();
        let var_y = crate::shapley::unbiased_variance(&y);
        for (j, row) in test.rows().enumerate() {
            assert!((mean[j] - lin(row)).abs() < 1e-6);
            assert!(var[j] <= 1e-6 * var_y);
        }
    }

    #[test]
    fn symmetric_data_gives_symmetric_predictions() {
        let rows: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + 0.25 * k as f64]).collect();
        let x = SampleMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0]).collect();
        let gp = fit_gp(&x, &y, &GpOptions::default()).unwrap();
        let q = SampleMatrix::from_rows(&[vec![0.37], vec![-0.37]]).unwrap();
        let (m, v) = gp.predict(&q).unwrap();
        assert!((m[0] - m[1]).abs() < 1e-8 && (v[0] - v[1]).abs() < 1e-6 * v[0]);
    }

    #[test]
    fn q2_extremes() {
        let gp = fitted(30);
        let test = lhs_design(200, &[(0.0, 1.0); 2], 9, false).unwrap();
        let y: Vec<f64> = test.rows().map(wave).collect();
        assert!(q2_score(&gp, &test, &y).unwrap() > 0.99);
        assert_eq!(q2_from_predictions(&y, &y).unwrap(), 1.0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(q2_from_predictions(&vec![mean; y.len()], &y).unwrap().abs() < 1e-12);
        assert!(q2_from_predictions(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_duplicates_and_round_trips() {
        let x = SampleMatrix::from_rows(&[vec![0.0], vec![0.5], vec![0.5], vec![1.0]]).unwrap();
        assert!(fit_gp(&x, &[0.0, 1.0, 1.0, 2.0], &GpOptions::default()).is_err());
        let gp = fitted(12);
        let json = serde_json::to_string(&gp).unwrap();
        let back: GpModel = serde_json::from_str(&json).unwrap();
        let q = SampleMatrix::from_rows(&[vec![0.2, 0.4]]).unwrap();
        assert_eq!(gp.predict(&q).unwrap(), back.predict(&q).unwrap());
    }
}

//! Joint draws from the conditioned Gaussian process.
//!
//! The exact sampler factorizes the posterior covariance at all requested
//! points once and reuses the factor for every draw. Its cost is cubic in
//! the number of points, so it is capped at [`EXACT_REALIZATION_CAP`].
//!
//! The inducing sampler draws exactly at `M` space-filling points picked
//! from the requested set and extends the draw to the other points by its
//! posterior conditional mean. The part of the posterior variance that the
//! inducing points do not explain is dropped; its largest share over a
//! sample of points is reported by [`RealizationSampler::residual_fraction`].

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gp::GpModel;
use crate::error::{invalid, GsaError, Result};
use crate::model::SampleMatrix;
use crate::rng::{substream, tag};

/// Largest point set the exact sampler factorizes.
pub const EXACT_REALIZATION_CAP: usize = 6000;
/// Points at which the inducing approximation is checked.
const DIAGNOSTIC_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RealizationMethod {
    #[default]
    Exact,
    /// Exact draw at `points` inducing points, extended by conditioning.
    Inducing { points: usize },
}

/// Draws realizations over one fixed point set.
#[derive(Debug, Clone)]
pub struct RealizationSampler {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
    /// Posterior covariance between all points and the inducing ones;
    /// `None` for the exact sampler.
    cross: Option<DMatrix<f64>>,
    residual_fraction: f64,
    warnings: Vec<String>,
}

/// Posterior covariance factor with a jitter ladder for rank deficiency.
fn factorize(gp: &GpModel, cov: DMatrix<f64>, warnings: &mut Vec<String>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let scale = gp.sigma2();
    let first = gp.nugget().max(1e-12);
    let mut ladder = vec![first];
    ladder.extend([1e-8, 1e-6, 1e-4].into_iter().filter(|&v| v > first));
    for jitter in ladder {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter * scale;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(chol.unpack());
        }
        warnings.push(format!("posterior covariance not positive definite with jitter {jitter:e}"));
    }
    Err(GsaError::Numerical("posterior covariance could not be factorized".into()))
}

/// Greedy farthest-point selection of `m` rows in the correlation metric.
fn farthest_points(x: &SampleMatrix, theta: &[f64], m: usize) -> Vec<usize> {
    let n = x.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        x.row(i).iter().zip(x.row(j)).zip(theta).map(|((a, b), t)| ((a - b) / t).powi(2)).sum()
    };
    let mut chosen = Vec::with_capacity(m);
    let mut nearest = vec![f64::INFINITY; n];
    let mut next = 0;
    while chosen.len() < m {
        chosen.push(next);
        let mut far = (0, -1.0);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist(i, next));
            if *d > far.1 {
                far = (i, *d);
            }
        }
        if far.1 <= 0.0 {
            break;
        }
        next = far.0;
    }
    chosen
}

fn rows_of(x: &SampleMatrix, idx: &[usize]) -> SampleMatrix {
    let data = idx.iter().flat_map(|&i| x.row(i).iter().copied()).collect();
    SampleMatrix::from_row_major(idx.len(), x.ncols(), data).expect("consistent shape")
}

impl RealizationSampler {
    /// Prepares draws at the rows of `x`. `seed` picks the points used by
    /// the inducing sampler's diagnostic.
    pub fn new(gp: &GpModel, x: &SampleMatrix, method: RealizationMethod, seed: u64) -> Result<Self> {
        if x.ncols() != gp.dim() {
            return invalid(format!("GP has {} inputs, points have {}", gp.dim(), x.ncols()));
        }
        match method {
            RealizationMethod::Exact => Self::exact(gp, x),
            RealizationMethod::Inducing { points } if points >= x.nrows() => Self::exact(gp, x),
            RealizationMethod::Inducing { points } => Self::inducing(gp, x, points, seed),
        }
    }

    fn exact(gp: &GpModel, x: &SampleMatrix) -> Result<Self> {
        let n = x.nrows();
        if n > EXACT_REALIZATION_CAP {
            return Err(GsaError::BudgetExceeded(format!(
                "exact realization over {n} points exceeds the cap of {EXACT_REALIZATION_CAP}; \
                 reduce Nv/No/Ni or use the inducing sampler"
            )));
        }
        let mut warnings = Vec::new();
        let factor = factorize(gp, gp.covariance(x)?, &mut warnings)?;
        Ok(Self { mean: gp.predict_mean(x)?, factor, cross: None, residual_fraction: 0.0, warnings })
    }

    fn inducing(gp: &GpModel, x: &SampleMatrix, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > EXACT_REALIZATION_CAP {
            return invalid(format!("inducing points must be in 1..={EXACT_REALIZATION_CAP}, got {m}"));
        }
        let u = rows_of(x, &farthest_points(x, gp.theta(), m));
        let mut warnings = Vec::new();
        let factor = factorize(gp, gp.covariance(&u)?, &mut warnings)?;
        let cross = gp.cross_covariance(x, &u)?;

        let mut rng = substream(seed, &[tag::REALIZATION, u64::MAX]);
        let probe: Vec<usize> = sample(&mut rng, x.nrows(), DIAGNOSTIC_POINTS.min(x.nrows())).into_vec();
        let (_, var) = gp.predict(&rows_of(x, &probe))?;
        let mut residual_fraction: f64 = 0.0;
        for (&i, &v) in probe.iter().zip(&var) {
            let c = cross.row(i).transpose();
            let z = factor.solve_lower_triangular(&c).expect("triangular factor is invertible");
            if v > 0.0 {
                residual_fraction = residual_fraction.max(((v - z.norm_squared()) / v).max(0.0));
            }
        }
        warnings.push(format!(
            "inducing sampler with {} points leaves up to {:.2e} of the posterior variance unexplained",
            u.nrows(),
            residual_fraction
        ));
        Ok(Self { mean: gp.predict_mean(x)?, factor, cross: Some(cross), residual_fraction, warnings })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Largest share of the pointwise posterior variance not carried by the
    /// inducing points, over a sample of points; zero for the exact sampler.
    pub fn residual_fraction(&self) -> f64 {
        self.residual_fraction
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// One realization using `rng` for the Gaussian noise.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let out = self.draw_columns(&mut [rng as &mut dyn rand::RngCore]);
        out.column(0).iter().copied().collect()
    }

    /// Realizations `k` in `ks`, one column each; realization `k` only
    /// depends on `(seed, k)`.
    pub fn draw_many(&self, ks: std::ops::Range<usize>, seed: u64) -> DMatrix<f64> {
        let mut rngs: Vec<_> = ks.map(|k| substream(seed, &[tag::REALIZATION, k as u64])).collect();
        let mut refs: Vec<&mut dyn rand::RngCore> = rngs.iter_mut().map(|r| r as &mut dyn rand::RngCore).collect();
        self.draw_columns(&mut refs)
    }

    fn draw_columns(&self, rngs: &mut [&mut dyn rand::RngCore]) -> DMatrix<f64> {
        let m = self.factor.nrows();
        let mut xi = DMatrix::zeros(m, rngs.len());
        for (c, rng) in rngs.iter_mut().enumerate() {
            for dst in xi.column_mut(c).iter_mut() {
                *dst = StandardNormal.sample(rng);
            }
        }
        let mut out = match &self.cross {
            None => &self.factor * xi,
            Some(cross) => {
                // u − m(U) = Lξ, so C_XU C_UU⁻¹ (u − m(U)) = C_XU L⁻ᵀξ
                let z = self.factor.tr_solve_lower_triangular(&xi).expect("triangular factor is invertible");
                cross * z
            }
        };
        for mut col in out.column_iter_mut() {
            for (v, m) in col.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        out
    }
}

/// One exact joint draw of the conditioned process at the rows of `x`.
pub fn sample_realization<R: Rng>(gp: &GpModel, x: &SampleMatrix, rng: &mut R) -> Result<Vec<f64>> {
    Ok(RealizationSampler::new(gp, x, RealizationMethod::Exact, 0)?.draw(rng))
}

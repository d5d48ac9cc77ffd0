//! Run configuration: a TOML file with `model`, `method`, `budget` and
//! optional `distribution` / `gp` tables. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shapley_gsa::input_model::DistributionSpec;
use shapley_gsa::kriging::RealizationMethod;
use shapley_gsa::shapley::{PermutationMethod, ShapleyConfig};
use shapley_gsa::sobol_rt::PickFreezeEstimator;
use shapley_gsa::uncertainty::IntervalKind;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    /// Input law for the `tabulated` model; the analytic models carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    pub method: MethodConfig,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    LinearGaussian {
        #[serde(default = "ones3")]
        beta: [f64; 3],
        sigma: [f64; 3],
        #[serde(default)]
        alpha: f64,
        #[serde(default)]
        rho: f64,
        #[serde(default)]
        gamma: f64,
    },
    InteractiveGaussian {
        #[serde(default = "ones2")]
        beta: [f64; 2],
        sigma: [f64; 2],
        #[serde(default)]
        rho: f64,
    },
    Ishigami {
        /// Row-major 3 × 3 copula correlation; identity when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        correlation: Option<Vec<f64>>,
    },
    /// CSV with one column per input followed by the output column, resolved
    /// relative to the config file.
    Tabulated { path: PathBuf },
}

fn ones3() -> [f64; 3] {
    [1.0; 3]
}

fn ones2() -> [f64; 2] {
    [1.0; 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Permutations {
    Exact,
    Random,
}

impl From<Permutations> for PermutationMethod {
    fn from(p: Permutations) -> Self {
        match p {
            Permutations::Exact => PermutationMethod::Exact,
            Permutations::Random => PermutationMethod::Random,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    ShapleyExact {
        #[serde(default = "bootstrap")]
        interval: IntervalKind,
    },
    ShapleyRandom {
        #[serde(default = "bootstrap")]
        interval: IntervalKind,
    },
    SobolRt {
        #[serde(default = "janon")]
        estimator: PickFreezeEstimator,
    },
    Poc {
        permutations: Permutations,
        #[serde(default = "bootstrap")]
        interval: IntervalKind,
    },
    FitGp,
    ShapleyGp {
        permutations: Permutations,
        #[serde(default)]
        realization: RealizationMethod,
    },
}

fn bootstrap() -> IntervalKind {
    IntervalKind::Bootstrap
}

fn janon() -> PickFreezeEstimator {
    PickFreezeEstimator::Janon
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::ShapleyExact { .. } => "shapley-exact",
            MethodConfig::ShapleyRandom { .. } => "shapley-random",
            MethodConfig::SobolRt { .. } => "sobol-rt",
            MethodConfig::Poc { .. } => "poc",
            MethodConfig::FitGp => "fit-gp",
            MethodConfig::ShapleyGp { .. } => "shapley-gp",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub nv: Option<usize>,
    pub no: Option<usize>,
    pub ni: Option<usize>,
    pub m: Option<usize>,
    /// Sample size of the RT pick-and-freeze design.
    pub n: Option<usize>,
    /// Bootstrap replicates.
    pub b: Option<usize>,
    pub alpha: Option<f64>,
    /// Metamodel realizations.
    pub n_h: Option<usize>,
    /// Independent runs of a coverage experiment.
    pub runs: Option<usize>,
    /// Largest dimension for the exact method.
    pub max_exact_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridPoint>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub no: usize,
    pub ni: usize,
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    /// Previously fitted model to load instead of fitting one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    /// Latin hypercube size for analytic models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_points: Option<usize>,
    #[serde(default = "yes")]
    pub optimize_design: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nugget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    /// Random test points for Q², drawn from the input law (analytic models).
    #[serde(default)]
    pub test_points: usize,
}

fn yes() -> bool {
    true
}

fn missing(key: &str, method: &str) -> CliError {
    CliError::Config(format!("budget.{key} is required for method {method}"))
}

impl Budget {
    pub fn need(&self, value: Option<usize>, key: &str, method: &str) -> Result<usize, CliError> {
        value.ok_or_else(|| missing(key, method))
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        let a = self.alpha.unwrap_or(0.1);
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::Config(format!("budget.alpha must lie in (0, 1), got {a}")));
        }
        Ok(a)
    }

    pub fn shapley(&self, method: PermutationMethod, name: &str) -> Result<ShapleyConfig, CliError> {
        let nv = self.need(self.nv, "nv", name)?;
        let no = self.need(self.no, "no", name)?;
        let ni = self.need(self.ni, "ni", name)?;
        let mut cfg = match method {
            PermutationMethod::Exact => ShapleyConfig::exact(nv, no, ni),
            PermutationMethod::Random => ShapleyConfig::random(nv, no, ni, self.need(self.m, "m", name)?),
        };
        if let Some(d) = self.max_exact_dim {
            cfg.max_exact_dim = d;
        }
        Ok(cfg)
    }

    pub fn grid(&self, method: PermutationMethod) -> Result<Vec<ShapleyConfig>, CliError> {
        let nv = self.need(self.nv, "nv", "poc")?;
        if self.grid.is_empty() {
            return Err(CliError::Config("budget.grid must list at least one {no, ni} point for method poc".into()));
        }
        self.grid
            .iter()
            .map(|g| {
                let mut cfg = match method {
                    PermutationMethod::Exact => ShapleyConfig::exact(nv, g.no, g.ni),
                    PermutationMethod::Random => ShapleyConfig::random(
                        nv,
                        g.no,
                        g.ni,
                        g.m.ok_or_else(|| CliError::Config("every budget.grid point needs m for random permutations".into()))?,
                    ),
                };
                if let Some(d) = self.max_exact_dim {
                    cfg.max_exact_dim = d;
                }
                Ok(cfg)
            })
            .collect()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative data paths follow the config file
        let base = path.parent().unwrap_or(Path::new("."));
        if let ModelConfig::Tabulated { path } = &mut cfg.model {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(file) = cfg.gp.as_mut().and_then(|g| g.model_file.as_mut()) {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }
}

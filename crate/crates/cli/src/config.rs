//! TOML scenario files.
//!
//! A scenario has three tables: `[model]` chooses and parameterises the
//! pricing model, `[run]` holds simulation sizes and grids, and `[output]`
//! says where files go. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use randmix_core::{
    Component, HeatKernelModel, InfoSpec, InitialCurve, MartingaleSpec, MixerSpec, OuParams,
    PricingModel, Prior, QuadratureConfig, WeightFunction, DEFAULT_PRIOR_NODES,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub description: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Esscher(EsscherConfig),
    HeatKernel(HeatKernelConfig),
}

/// Flesaker-Hughston model driven by one or more Esscher components.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsscherConfig {
    pub components: Vec<Component>,
    pub prior: Prior,
    pub info: InfoSpec,
    #[serde(default = "default_curve")]
    pub initial_curve: InitialCurve,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_prior_nodes")]
    pub prior_nodes: usize,
}

/// Weighted heat kernel over an OU driver.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatKernelConfig {
    pub ou: OuParams,
    pub mixer: MixerSpec,
    pub prior: Prior,
    pub info: InfoSpec,
    pub weight: WeightConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default = "default_prior_nodes")]
    pub prior_nodes: usize,
}

/// Weights expressible in a config file. Arbitrary weights are available
/// through the library.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightConfig {
    /// `exp(-j (t + v))`
    SeparableExp { j: f64 },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Simulation step for paths and for path-dependent information.
    pub dt: f64,
    /// End of the simulated paths. Defaults to `bond_maturity`.
    pub horizon: Option<f64>,
    pub n_paths: usize,
    /// Maturity of the bond reported by `simulate-paths` and underlying the
    /// options of `option-surface`.
    pub bond_maturity: f64,
    pub valuation_times: Vec<f64>,
    pub tenors: Vec<f64>,
    pub n_states: usize,
    /// Time `s` at which the option surface is valued.
    pub valuation_time: f64,
    pub expiries: Vec<f64>,
    pub strikes: Vec<f64>,
    pub option_paths: usize,
    /// Also write the mixer `h(u, x)` on the support of the prior.
    pub write_mixer: bool,
    pub validate_paths: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dt: 0.01,
            horizon: None,
            n_paths: 10,
            bond_maturity: 10.0,
            valuation_times: vec![0.0, 1.0, 2.0, 5.0],
            tenors: vec![
                0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0,
            ],
            n_states: 10,
            valuation_time: 0.0,
            expiries: vec![],
            strikes: vec![],
            option_paths: 100_000,
            write_mixer: false,
            validate_paths: 4000,
        }
    }
}

impl RunConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.bond_maturity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

fn default_curve() -> InitialCurve {
    InitialCurve::FlatContinuous { r0: 0.04 }
}

fn default_prior_nodes() -> usize {
    DEFAULT_PRIOR_NODES
}

/// A validated model ready for pricing.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Esscher(PricingModel),
    HeatKernel(HeatKernelModel),
}

impl BuiltModel {
    pub fn kind(&self) -> &'static str {
        match self {
            BuiltModel::Esscher(_) => "esscher",
            BuiltModel::HeatKernel(_) => "heat-kernel",
        }
    }
}

/// Runs `$body` with `$m` bound to the concrete model.
#[macro_export]
macro_rules! with_model {
    ($built:expr, $m:ident => $body:expr) => {
        match $built {
            $crate::config::BuiltModel::Esscher($m) => $body,
            $crate::config::BuiltModel::HeatKernel($m) => $body,
        }
    };
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check_run()?;
        Ok(cfg)
    }

    fn check_run(&self) -> Result<()> {
        let r = &self.run;
        anyhow::ensure!(r.dt > 0.0 && r.dt.is_finite(), "run.dt must be positive");
        anyhow::ensure!(r.bond_maturity > 0.0, "run.bond_maturity must be positive");
        anyhow::ensure!(r.horizon() > 0.0, "run.horizon must be positive");
        anyhow::ensure!(
            r.horizon() <= r.bond_maturity,
            "run.horizon ({}) must not exceed run.bond_maturity ({})",
            r.horizon(),
            r.bond_maturity
        );
        anyhow::ensure!(
            r.valuation_times.iter().all(|&t| t >= 0.0),
            "run.valuation_times must be non-negative"
        );
        anyhow::ensure!(
            r.tenors.iter().all(|&t| t > 0.0),
            "run.tenors must be positive"
        );
        anyhow::ensure!(
            r.valuation_time >= 0.0,
            "run.valuation_time must be non-negative"
        );
        anyhow::ensure!(
            r.expiries.iter().all(|&e| e >= r.valuation_time),
            "run.expiries must not precede run.valuation_time"
        );
        anyhow::ensure!(
            r.strikes.iter().all(|k| k.is_finite()),
            "run.strikes must be finite"
        );
        Ok(())
    }

    /// Builds the model, checking parameters and mixer admissibility.
    pub fn build_model(&self) -> Result<BuiltModel> {
        match &self.model {
            ModelConfig::Esscher(c) => {
                let spec = MartingaleSpec::with_prior_nodes(
                    c.components.clone(),
                    c.prior.clone(),
                    c.info.clone(),
                    c.quadrature.u_horizon,
                    c.prior_nodes,
                )?;
                Ok(BuiltModel::Esscher(PricingModel::new(
                    spec,
                    c.initial_curve.clone(),
                    c.quadrature,
                )?))
            }
            ModelConfig::HeatKernel(c) => {
                let WeightConfig::SeparableExp { j } = c.weight;
                let model = HeatKernelModel::with_prior_nodes(
                    c.ou,
                    c.mixer,
                    c.prior.clone(),
                    c.info.clone(),
                    WeightFunction::SeparableExp { j },
                    c.quadrature,
                    c.prior_nodes,
                )?;
                Ok(BuiltModel::HeatKernel(model))
            }
        }
    }

    /// Mixer of the first component, used for mixer plots.
    pub fn primary_mixer(&self) -> MixerSpec {
        match &self.model {
            ModelConfig::Esscher(c) => c.components[0].mixer,
            ModelConfig::HeatKernel(c) => c.mixer,
        }
    }

    pub fn prior(&self) -> &Prior {
        match &self.model {
            ModelConfig::Esscher(c) => &c.prior,
            ModelConfig::HeatKernel(c) => &c.prior,
        }
    }

    /// Column names for the driver values, one per component.
    pub fn driver_names(&self) -> Vec<String> {
        match &self.model {
            ModelConfig::Esscher(c) if c.components.len() == 1 => vec!["L".into()],
            ModelConfig::Esscher(c) => (1..=c.components.len()).map(|i| format!("L_{i}")).collect(),
            ModelConfig::HeatKernel(_) => vec!["Y".into()],
        }
    }
}

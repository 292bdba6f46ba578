//! Run configuration: parsing, defaults, overrides and hashing.

use std::path::{Path, PathBuf};

use riskgrowth::model::{Builtin, MarketModel, NoiseApprox};
use riskgrowth::montecarlo::VerifyOptions;
use riskgrowth::solver::certificate::CertificateOptions;
use riskgrowth::solver::{BellmanProblem, SolveOptions};
use riskgrowth::{Execution, GridSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "RISKGROWTH_SEED";
pub const OUT_ENV: &str = "RISKGROWTH_OUT";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(deserialize_with = "model_section")]
    pub model: Builtin,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub noise: NoiseApprox,
    #[serde(default)]
    pub actions: ActionSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Accepts `{"builtin": name}` with `params` optional (defaults filled in).
fn model_section<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Builtin, D::Error> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        builtin: String,
        #[serde(default)]
        params: Option<serde_json::Value>,
    }
    let raw = Raw::deserialize(d)?;
    let params = raw.params.unwrap_or_else(|| serde_json::json!({}));
    serde_json::from_value(serde_json::json!({ "builtin": raw.builtin, "params": params }))
        .map_err(|e| serde::de::Error::custom(format!("model: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            lower: vec![-3.0],
            upper: vec![3.0],
            counts: vec![61],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSection {
    /// Lattice resolution of the simplex action set.
    pub resolution: usize,
}

impl Default for ActionSection {
    fn default() -> Self {
        ActionSection { resolution: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub anchor: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverSection {
            gamma: -0.5,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            anchor: d.anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub horizons: Vec<usize>,
    pub paths: usize,
    pub initial_state: Vec<f64>,
    pub resamples: usize,
    pub baselines: Vec<usize>,
}

impl Default for McSection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        McSection {
            horizons: d.horizons,
            paths: d.paths,
            initial_state: d.initial_state,
            resamples: d.resamples,
            baselines: d.baselines,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub gamma_bar: f64,
    pub phi: Option<f64>,
    pub r_margin: f64,
    pub function_pairs: usize,
    pub state_pairs: usize,
    /// Pairs used for the empirical contraction ratio.
    pub contraction_pairs: usize,
    /// `(x, f, h)` triples for the tilted drift check.
    pub drift_samples: usize,
    pub growth_samples: usize,
    pub cells_per_dim: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        let d = CertificateOptions::default();
        DiagnoseSection {
            gamma_bar: -1.0,
            phi: d.phi,
            r_margin: d.r_margin,
            function_pairs: d.function_pairs,
            state_pairs: d.state_pairs,
            contraction_pairs: 64,
            drift_samples: 1000,
            growth_samples: 100_000,
            cells_per_dim: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            gammas: vec![-2.0, -1.0, -0.5, -0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("riskgrowth-out"),
            format: Format::Both,
        }
    }
}

/// Command-line values that take precedence over the environment and the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path, cli: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: cannot read config: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.apply_env()?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.output.dir = out.clone();
        }
        if let Some(format) = cli.format {
            cfg.output.format = format;
        }
        cfg.validate()
            .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        Ok(cfg)
    }

    fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("{SEED_ENV}={raw:?} is not a u64")))?;
        }
        if let Ok(raw) = std::env::var(OUT_ENV) {
            self.output.dir = PathBuf::from(raw);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        if self.version != SCHEMA_VERSION {
            return bad(format!(
                "version: expected {SCHEMA_VERSION}, got {}",
                self.version
            ));
        }
        let g = &self.grid;
        if g.lower.len() != g.counts.len() || g.upper.len() != g.counts.len() {
            return bad("grid: lower, upper and counts must have the same length".into());
        }
        let s = &self.solver;
        if !(s.gamma <= 0.0 && s.gamma.is_finite()) {
            return bad(format!(
                "solver.gamma: must be finite and ≤ 0, got {}",
                s.gamma
            ));
        }
        if !(s.tolerance > 0.0) || s.max_iterations == 0 {
            return bad("solver: tolerance and max_iterations must be positive".into());
        }
        if self.sweep.gammas.is_empty() {
            return bad("sweep.gammas: the list is empty".into());
        }
        if let Some(g) = self
            .sweep
            .gammas
            .iter()
            .find(|g| !(**g <= 0.0 && g.is_finite()))
        {
            return bad(format!("sweep.gammas: {g} is not a finite value ≤ 0"));
        }
        let m = &self.mc;
        if m.horizons.is_empty() || m.horizons.contains(&0) || m.paths == 0 || m.resamples == 0 {
            return bad("mc: horizons, paths and resamples must be nonempty and positive".into());
        }
        let d = &self.diagnose;
        if !(d.gamma_bar < 0.0 && d.gamma_bar.is_finite()) {
            return bad(format!(
                "diagnose.gamma_bar: must be finite and < 0, got {}",
                d.gamma_bar
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        GridSpec::new(g.lower.clone(), g.upper.clone(), g.counts.clone())
            .map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn market_model(&self) -> Result<MarketModel, ConfigError> {
        self.model
            .build(self.noise.clone(), self.actions.resolution)
            .map_err(|e| ConfigError(format!("model: {e}")))
    }

    pub fn problem(&self) -> Result<BellmanProblem, ConfigError> {
        BellmanProblem::new(self.market_model()?, self.grid_spec()?, Execution::Parallel)
            .map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            anchor: self.solver.anchor,
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            horizons: self.mc.horizons.clone(),
            paths: self.mc.paths,
            seed: self.seed,
            initial_state: self.mc.initial_state.clone(),
            resamples: self.mc.resamples,
            baselines: self.mc.baselines.clone(),
        }
    }

    pub fn certificate_options(&self) -> CertificateOptions {
        let d = &self.diagnose;
        CertificateOptions {
            phi: d.phi,
            r_margin: d.r_margin,
            function_pairs: d.function_pairs,
            state_pairs: d.state_pairs,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configs always serialize");
        s.push('\n');
        s
    }

    /// SHA-256 of everything that affects the numbers; the output section
    /// is left out so the same run can be written to different places.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("configs always serialize");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output");
        }
        let bytes = serde_json::to_vec(&value).expect("values always serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

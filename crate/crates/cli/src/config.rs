//! Run configuration: a TOML file of `key = value` entries (with `[obstacle]`
//! and `[tolerance]` sections) overridden by command-line flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use que_core::{FractalModel, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Interval,
    Gasket,
}

impl ModelName {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelName::Interval => ModelKind::Interval,
            ModelName::Gasket => ModelKind::Gasket,
        }
    }

    pub fn model(self) -> FractalModel {
        self.kind().model()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Interval => "interval",
            ModelName::Gasket => "gasket",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleConfig {
    pub grid_sizes: Vec<usize>,
    /// Obstacle radii in grid steps.
    pub radii: Vec<f64>,
    pub alpha: f64,
    /// Center vertex; defaults to `N / 2`.
    pub center: Option<usize>,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        ObstacleConfig {
            grid_sizes: vec![64, 256],
            radii: vec![4.0, 8.0, 16.0],
            alpha: 0.5,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Absolute tolerance for the exactness of the closeness condition.
    pub delta_d: f64,
    /// Residual tolerance for level compatibility and Markov checks.
    pub exact: f64,
    /// Admissible range of the obstacle `δ` versus `ε` log-log slope.
    pub obstacle_slope: [f64; 2],
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            delta_d: 1e-11,
            exact: 1e-10,
            obstacle_slope: [0.35, 0.65],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelName,
    /// Coarse level for single-pair commands.
    pub level: usize,
    /// Fine level; defaults to the model's fine offset.
    pub fine: Option<usize>,
    /// Levels for `converge` and multi-pair `certify`.
    pub levels: Vec<usize>,
    /// Eigenvalue index for `converge`.
    pub eigen_index: usize,
    /// Reference level for `converge`; the analytic value is used when unset
    /// (interval only).
    pub reference_level: Option<usize>,
    /// Number of eigenvalues reported by `spectrum`; all when unset.
    pub spectrum_count: Option<usize>,
    /// Level chain for `compose`.
    pub chain: Vec<usize>,
    pub times: Vec<f64>,
    pub theta: f64,
    pub z_points: Vec<[f64; 2]>,
    /// Projection windows `(a, b)`; windows isolating the two lowest
    /// eigenvalue clusters when empty.
    pub windows: Vec<[f64; 2]>,
    pub spot_checks: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub obstacle: ObstacleConfig,
    pub tolerance: ToleranceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelName::Interval,
            level: 3,
            fine: None,
            levels: Vec::new(),
            eigen_index: 1,
            reference_level: None,
            spectrum_count: None,
            chain: Vec::new(),
            times: vec![0.5, 1.0, 2.0],
            theta: PI / 4.0,
            z_points: vec![[-1.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [1.0, 2.0]],
            windows: Vec::new(),
            spot_checks: 100,
            seed: 0,
            out: PathBuf::from("que-out"),
            cache_dir: None,
            obstacle: ObstacleConfig::default(),
            tolerance: ToleranceConfig::default(),
        }
    }
}

/// Flag values; `None` leaves the config file (or default) in place.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long, global = true)]
    pub level: Option<usize>,
    #[arg(long, global = true)]
    pub fine: Option<usize>,
    /// Comma-separated levels.
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Comma-separated level chain.
    #[arg(long, global = true, value_delimiter = ',')]
    pub chain: Option<Vec<usize>>,
    /// Eigenvalue index.
    #[arg(long, short = 'k', global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = e
                .span()
                .map(|s| text[s].trim().trim_matches('"').to_string())
                .unwrap_or_default();
            if key.is_empty() {
                CliError::Usage(format!("config: {message}"))
            } else {
                CliError::key(&key, message)
            }
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Reads the config file named in `flags` (if any) and applies the flags.
    pub fn resolve(flags: &Overrides) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = flags.model {
            cfg.model = m;
        }
        if let Some(l) = flags.level {
            cfg.level = l;
        }
        if let Some(f) = flags.fine {
            cfg.fine = Some(f);
        }
        if let Some(l) = &flags.levels {
            cfg.levels = l.clone();
        }
        if let Some(c) = &flags.chain {
            cfg.chain = c.clone();
        }
        if let Some(k) = flags.k {
            cfg.eigen_index = k;
        }
        if let Some(o) = &flags.out {
            cfg.out = o.clone();
        }
        if let Some(s) = flags.seed {
            cfg.seed = s;
        }
        if let Some(c) = &flags.cache_dir {
            cfg.cache_dir = Some(c.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let max = self.model.model().max_level;
        let check_level = |key: &str, l: usize| {
            if l > max {
                Err(CliError::key(key, format!("level {l} exceeds the {} maximum {max}", self.model.as_str())))
            } else {
                Ok(())
            }
        };
        check_level("level", self.level)?;
        if let Some(f) = self.fine {
            check_level("fine", f)?;
        }
        for &l in &self.levels {
            check_level("levels", l)?;
        }
        for &l in &self.chain {
            check_level("chain", l)?;
        }
        if let Some(r) = self.reference_level {
            check_level("reference_level", r)?;
        }
        if self.chain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::key("chain", "levels must be strictly increasing"));
        }
        if !(self.theta > 0.0 && self.theta < PI / 2.0) {
            return Err(CliError::key("theta", "must lie in (0, π/2)"));
        }
        if self.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(CliError::key("times", "heat times must be positive"));
        }
        if self.z_points.iter().any(|z| !z[0].is_finite() || !z[1].is_finite()) {
            return Err(CliError::key("z_points", "points must be finite"));
        }
        if self.windows.iter().any(|w| !(w[0] > -1.0 && w[0] < w[1])) {
            return Err(CliError::key("windows", "each window needs -1 < a < b"));
        }
        let o = &self.obstacle;
        if o.radii.iter().any(|&r| !(r >= 1.0)) {
            return Err(CliError::key("obstacle.radii", "radii are in grid steps and must be at least 1"));
        }
        if !(o.alpha > 0.0 && o.alpha <= 1.0) {
            return Err(CliError::key("obstacle.alpha", "must lie in (0, 1]"));
        }
        let t = &self.tolerance;
        if !(t.delta_d > 0.0 && t.exact > 0.0) {
            return Err(CliError::key("tolerance", "tolerances must be positive"));
        }
        Ok(())
    }

    pub fn fractal(&self) -> FractalModel {
        self.model.model()
    }

    /// SHA-256 of the configuration with the output and cache locations removed.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out");
            map.remove("cache_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

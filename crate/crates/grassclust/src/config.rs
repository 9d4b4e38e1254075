//! Run configuration: one parameter bundle per pipeline stage, TOML
//! loading with defaults, and JSON echoes for reports.
//!
//! Every knob has a default tuned for the bundled synthetic scenarios, so
//! an empty config file is a valid one.

use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use crate::egct::EgctParams;
use crate::error::{Error, Result};
use crate::karma::KarmaParams;
use crate::kernels::Kernel;

/// Parameters for one clustering stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub karma: KarmaParams,
    pub kernel: Kernel,
    pub egct: EgctParams,
    /// State clustering only: shortest state run kept as its own interval.
    pub min_dwell: usize,
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        self.karma.validate()?;
        self.kernel.validate()?;
        // Feature counts aren't known yet; check the static invariants.
        self.egct.validate(usize::MAX)?;
        if self.min_dwell == 0 {
            return Err(Error::config("min_dwell must be at least 1"));
        }
        Ok(())
    }

    /// Parameter echo embedded in JSON reports.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.karma.n,
            "m": self.karma.m,
            "rho": self.karma.rho,
            "tau_f": self.karma.tau_f,
            "tau_b": self.karma.tau_b,
            "buff": self.karma.buff,
            "stride": self.karma.stride,
            "kernel": self.kernel.to_string(),
            "k_nn": self.egct.k_nn,
            "sigma_alpha": self.egct.sigma_alpha,
            "sigma_theta": self.egct.sigma_theta,
            "pca_energy": self.egct.pca_energy,
            "resolution": self.egct.louvain_resolution,
            "min_dwell": self.min_dwell,
        })
    }
}

/// Full run configuration: the three stages plus the run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub states: StageConfig,
    pub communities: StageConfig,
    pub subnets: StageConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let states = StageConfig {
            karma: KarmaParams { n: 30, m: 2, rho: 2, tau_f: 60, tau_b: 20, ..KarmaParams::default() },
            kernel: Kernel::gaussian(0.8),
            egct: EgctParams { k_nn: 8, ..EgctParams::default() },
            min_dwell: 5,
        };
        let communities = StageConfig {
            karma: KarmaParams { n: 30, m: 3, rho: 2, tau_f: 50, tau_b: 10, buff: 20, ..KarmaParams::default() },
            kernel: Kernel::gaussian(0.5),
            egct: EgctParams { k_nn: 4, ..EgctParams::default() },
            min_dwell: 5,
        };
        let subnets = StageConfig {
            karma: KarmaParams { n: 20, m: 3, rho: 3, tau_f: 45, tau_b: 5, buff: 50, ..KarmaParams::default() },
            kernel: Kernel::gaussian(0.5),
            egct: EgctParams { k_nn: 4, ..EgctParams::default() },
            min_dwell: 5,
        };
        RunConfig { states, communities, subnets, seed: 0 }
    }
}

/// One stage's TOML section; omitted fields keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    n: Option<usize>,
    m: Option<usize>,
    rho: Option<usize>,
    tau_f: Option<usize>,
    tau_b: Option<usize>,
    buff: Option<usize>,
    stride: Option<usize>,
    kernel: Option<String>,
    k_nn: Option<usize>,
    sigma_alpha: Option<f64>,
    sigma_theta: Option<f64>,
    pca_energy: Option<f64>,
    resolution: Option<f64>,
    min_dwell: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    states: Option<RawStage>,
    communities: Option<RawStage>,
    subnets: Option<RawStage>,
}

fn apply(stage: &mut StageConfig, raw: &RawStage) -> Result<()> {
    if let Some(v) = raw.n {
        stage.karma.n = v;
    }
    if let Some(v) = raw.m {
        stage.karma.m = v;
    }
    if let Some(v) = raw.rho {
        stage.karma.rho = v;
    }
    if let Some(v) = raw.tau_f {
        stage.karma.tau_f = v;
    }
    if let Some(v) = raw.tau_b {
        stage.karma.tau_b = v;
    }
    if let Some(v) = raw.buff {
        stage.karma.buff = v;
    }
    if let Some(v) = raw.stride {
        stage.karma.stride = v;
    }
    if let Some(spec) = &raw.kernel {
        stage.kernel = spec.parse()?;
    }
    if let Some(v) = raw.k_nn {
        stage.egct.k_nn = v;
    }
    if let Some(v) = raw.sigma_alpha {
        stage.egct.sigma_alpha = v;
    }
    if let Some(v) = raw.sigma_theta {
        stage.egct.sigma_theta = v;
    }
    if let Some(v) = raw.pca_energy {
        stage.egct.pca_energy = v;
    }
    if let Some(v) = raw.resolution {
        stage.egct.louvain_resolution = v;
    }
    if let Some(v) = raw.min_dwell {
        stage.min_dwell = v;
    }
    Ok(())
}

impl RunConfig {
    /// Parses a TOML config over the defaults. Unknown fields and type
    /// mismatches fail with the parser's line/field diagnostic.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config error: {e}")))?;
        let mut cfg = RunConfig::default();
        if let Some(seed) = raw.seed {
            cfg.seed = seed;
        }
        if let Some(s) = &raw.states {
            apply(&mut cfg.states, s)?;
        }
        if let Some(s) = &raw.communities {
            apply(&mut cfg.communities, s)?;
        }
        if let Some(s) = &raw.subnets {
            apply(&mut cfg.subnets, s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.states.validate()?;
        self.communities.validate()?;
        self.subnets.validate()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "states": self.states.to_json(),
            "communities": self.communities.to_json(),
            "subnets": self.subnets.to_json(),
        })
    }
}

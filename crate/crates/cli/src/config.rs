use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use levy_kle::kle_basis::SumMode;
use levy_kle::levy_models::{make_brownian, make_cp_exponential, make_gamma, make_variance_gamma, SplitModel};
use levy_kle::shot_noise::ShotConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Brownian {
        #[serde(default = "one")]
        sigma2: f64,
    },
    Gamma {
        c: f64,
        rho: f64,
    },
    CpExponential {
        rate: f64,
        rho: f64,
    },
    VarianceGamma {
        c_pos: f64,
        rho_pos: f64,
        c_neg: f64,
        rho_neg: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> levy_kle::Result<SplitModel> {
        match *self {
            ModelSpec::Brownian { sigma2 } => make_brownian(sigma2)?.split(),
            ModelSpec::Gamma { c, rho } => make_gamma(c, rho)?.split(),
            ModelSpec::CpExponential { rate, rho } => make_cp_exponential(rate, rho)?.split(),
            ModelSpec::VarianceGamma {
                c_pos,
                rho_pos,
                c_neg,
                rho_neg,
            } => make_variance_gamma(c_pos, rho_pos, c_neg, rho_neg),
        }
    }
}

/// One experiment manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default = "default_d_list")]
    pub d_list: Vec<usize>,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: SumMode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_gamma_cutoff")]
    pub gamma_cutoff: f64,
    #[serde(default = "default_jump_floor")]
    pub jump_floor: f64,
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_ks_samples")]
    pub ks_samples: usize,
    #[serde(default = "default_ks_dim")]
    pub ks_dim: usize,
}

fn default_d_list() -> Vec<usize> {
    vec![5]
}
fn default_n_paths() -> usize {
    1
}
fn default_grid_n() -> usize {
    101
}
fn default_mode() -> SumMode {
    SumMode::Partial
}
fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}
fn default_gamma_cutoff() -> f64 {
    ShotConfig::default().gamma_cutoff
}
fn default_jump_floor() -> f64 {
    ShotConfig::default().jump_floor
}
fn default_max_terms() -> usize {
    ShotConfig::default().max_terms
}
fn default_ks_samples() -> usize {
    2000
}
fn default_ks_dim() -> usize {
    300
}

/// Command-line values that replace manifest fields.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Experiment manifest (JSON).
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated truncation dimensions.
    #[arg(long, value_delimiter = ',')]
    pub d_list: Option<Vec<usize>>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<SumMode>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub gamma_cutoff: Option<f64>,
}

fn parse_mode(s: &str) -> Result<SumMode, String> {
    match s {
        "partial" => Ok(SumMode::Partial),
        "cesaro" => Ok(SumMode::Cesaro),
        _ => Err(format!("unknown mode '{s}', expected partial or cesaro")),
    }
}

impl ExperimentConfig {
    #[cfg(test)]
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("malformed experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text).context("malformed experiment config")?;
        if let Some(v) = overrides.seed {
            cfg.seed = v;
        }
        if let Some(v) = &overrides.d_list {
            cfg.d_list = v.clone();
        }
        if let Some(v) = overrides.n_paths {
            cfg.n_paths = v;
        }
        if let Some(v) = overrides.grid_n {
            cfg.grid_n = v;
        }
        if let Some(v) = overrides.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = overrides.mode {
            cfg.mode = v;
        }
        if let Some(v) = &overrides.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = overrides.gamma_cutoff {
            cfg.gamma_cutoff = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.d_list.is_empty() {
            bail!("d_list must not be empty");
        }
        if self.d_list.contains(&0) || self.d_list.windows(2).any(|w| w[1] <= w[0]) {
            bail!("d_list must be strictly ascending positive integers");
        }
        if self.n_paths == 0 {
            bail!("n_paths must be at least 1");
        }
        if self.grid_n < 2 {
            bail!("grid_n must be at least 2");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            bail!("T must be positive");
        }
        self.shot().validate()?;
        self.model.build()?;
        Ok(())
    }

    pub fn shot(&self) -> ShotConfig {
        ShotConfig {
            seed: self.seed,
            gamma_cutoff: self.gamma_cutoff,
            jump_floor: self.jump_floor,
            max_terms: self.max_terms,
            ..ShotConfig::default()
        }
    }
}

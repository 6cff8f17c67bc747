use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::formats::{parse_json, read_text, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::eval::default_thresholds;
use crate::pressure::DEFAULT_THRESHOLD_KPA;
use crate::stability::{Channels, DEFAULT_CUTOFF_HZ};

pub const SEED_ENV: &str = "STABILIKIT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format_version: u32,
    /// kPa
    pub threshold: f64,
    /// kPa, strictly increasing
    pub sweep_grid: Vec<f64>,
    /// Hz
    pub cutoff: f64,
    pub channels: Channels,
    pub loso: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            threshold: DEFAULT_THRESHOLD_KPA,
            sweep_grid: default_thresholds(),
            cutoff: DEFAULT_CUTOFF_HZ,
            channels: Channels::GROUND_TRUTH,
            loso: true,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let cfg: RunConfig = parse_json(path, &read_text(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Threshold and grid within [0, 1000] kPa; cutoff within (0, 2.5) Hz,
    /// below Nyquist at 5 Hz.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("format_version {}", self.format_version));
        }
        if !(0.0..=1000.0).contains(&self.threshold) {
            return bad(format!("threshold {} kPa outside [0, 1000]", self.threshold));
        }
        if self.sweep_grid.is_empty()
            || self.sweep_grid.iter().any(|t| !(0.0..=1000.0).contains(t))
            || self.sweep_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("sweep grid must be non-empty, increasing and within [0, 1000] kPa".into());
        }
        if !(self.cutoff > 0.0 && self.cutoff < 2.5) {
            return bad(format!("cutoff {} Hz outside (0, 2.5)", self.cutoff));
        }
        Ok(())
    }

    /// Applies a seed override such as the value of `STABILIKIT_SEED`.
    pub fn with_seed_override(mut self, value: Option<&str>) -> Result<Self> {
        if let Some(v) = value {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    pub fn with_env_overrides(self) -> Result<Self> {
        let value = std::env::var(SEED_ENV).ok();
        self.with_seed_override(value.as_deref())
    }
}

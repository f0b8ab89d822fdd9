//! Run configuration: architecture choice, explainer choice, schedule knobs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::ExplainerKind;

pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_LR: f64 = 0.0002;
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Dense generator/discriminator over flattened 1x32x32 images.
    Fc,
    /// Convolutional pair over (c)x32x32 images.
    Dc,
}

impl Architecture {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(Architecture::Fc),
            "dc" => Ok(Architecture::Dc),
            other => Err(Error::Config(format!("unknown architecture {other:?} (expected fc|dc)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Fc => "fc",
            Architecture::Dc => "dc",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Architecture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Architecture::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Everything a training run depends on besides the dataset itself.
/// `validate` is the single gate; `train` refuses configs it rejects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub explainer: ExplainerKind,
    /// Strength of the guided update; 0 reproduces the unguided rule exactly.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of the dataset trained on, in (0, 1].
    pub data_fraction: f64,
    pub seed: u64,
    /// Differentiable augmentation on every discriminator input.
    pub diffaug: bool,
    /// First epoch with guided updates; `None` means `epochs / 2`.
    pub xai_start_epoch: Option<usize>,
}

impl TrainConfig {
    /// Baseline run: no guidance, full data, paper-standard optimizer knobs.
    pub fn new(architecture: Architecture, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            architecture,
            explainer: ExplainerKind::None,
            alpha: DEFAULT_ALPHA,
            epochs,
            batch_size: DEFAULT_BATCH_SIZE,
            lr: DEFAULT_LR,
            data_fraction: 1.0,
            seed,
            diffaug: false,
            xai_start_epoch: None,
        }
    }

    /// Epoch from which guided updates run; defaults to the back half.
    pub fn xai_start(&self) -> usize {
        self.xai_start_epoch.unwrap_or(self.epochs / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be finite and > 0, got {}", self.lr)));
        }
        if !self.data_fraction.is_finite() || self.data_fraction <= 0.0 || self.data_fraction > 1.0 {
            return Err(Error::Config(format!(
                "data_fraction must lie in (0, 1], got {}",
                self.data_fraction
            )));
        }
        if self.xai_start() > self.epochs {
            return Err(Error::Config(format!(
                "xai_start_epoch {} exceeds epochs {}",
                self.xai_start(),
                self.epochs
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_knobs() {
        let cfg = TrainConfig::new(Architecture::Fc, 10, 7);
        assert_eq!(cfg.batch_size, 128);
        assert_eq!(cfg.lr, 0.0002);
        assert_eq!(cfg.alpha, 0.2);
        assert_eq!(cfg.data_fraction, 1.0);
        assert_eq!(cfg.xai_start(), 5);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn xai_start_defaults_to_half_and_respects_overrides() {
        let mut cfg = TrainConfig::new(Architecture::Fc, 9, 0);
        assert_eq!(cfg.xai_start(), 4);
        cfg.xai_start_epoch = Some(0);
        assert_eq!(cfg.xai_start(), 0);
        cfg.xai_start_epoch = Some(9);
        assert!(cfg.validate().is_ok());
        cfg.xai_start_epoch = Some(10);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_knobs() {
        let base = TrainConfig::new(Architecture::Dc, 4, 1);
        let bad = [
            TrainConfig { epochs: 0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { alpha: -0.1, ..base.clone() },
            TrainConfig { alpha: f64::NAN, ..base.clone() },
            TrainConfig { lr: 0.0, ..base.clone() },
            TrainConfig { data_fraction: 0.0, ..base.clone() },
            TrainConfig { data_fraction: 1.5, ..base.clone() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = TrainConfig::new(Architecture::Dc, 20, 42);
        cfg.explainer = ExplainerKind::Deepshap;
        cfg.diffaug = true;
        cfg.xai_start_epoch = Some(3);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"dc\""));
        assert!(text.contains("\"deepshap\""));
        let back: TrainConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.architecture, Architecture::Dc);
        assert_eq!(back.explainer, ExplainerKind::Deepshap);
        assert_eq!(back.xai_start_epoch, Some(3));
        assert_eq!(back.seed, 42);
    }
}

use crate::error::{Error, Result};
use crate::types::GridSpec;

/// How the sampling threshold `th` is applied to a tSPM frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Discard pixels below `th * max(frame)`.
    Relative,
    /// Discard pixels below `th`; the maximum always survives.
    Absolute,
}

impl ThresholdMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdMode::Relative => "relative",
            ThresholdMode::Absolute => "absolute",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(ThresholdMode::Relative),
            "absolute" => Ok(ThresholdMode::Absolute),
            other => Err(Error::Parameter(format!("unknown threshold mode '{other}'"))),
        }
    }
}

/// Where image features come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSourceKind {
    /// Small convolution stack trained jointly over the grayscale image.
    Trainable,
    /// Fixed tensors read from feature files.
    Precomputed,
}

impl FeatureSourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSourceKind::Trainable => "trainable",
            FeatureSourceKind::Precomputed => "precomputed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "trainable" => Ok(FeatureSourceKind::Trainable),
            "precomputed" => Ok(FeatureSourceKind::Precomputed),
            other => Err(Error::Parameter(format!("unknown feature source '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub grid: GridSpec,
    /// ConvLSTM depth.
    pub layers: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
    /// Sampling threshold in (0, 1].
    pub th: f64,
    pub threshold_mode: ThresholdMode,
    /// Target scanpath length N.
    pub seq_len: usize,
    /// Spatialization std in grid pixels.
    pub sigma: f64,
    pub feature_source: FeatureSourceKind,
    pub feature_channels: usize,
    /// Initial pre-softplus scale of every Bayesian weight.
    pub rho_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec { width: 32, height: 32 },
            layers: 2,
            hidden_channels: 16,
            kernel_size: 3,
            th: 0.7,
            threshold_mode: ThresholdMode::Relative,
            seq_len: 8,
            sigma: 2.0,
            feature_source: FeatureSourceKind::Trainable,
            feature_channels: 4,
            rho_init: -5.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.grid.width, self.grid.height)?;
        if self.layers == 0 || self.hidden_channels == 0 || self.feature_channels == 0 {
            return Err(Error::Parameter(
                "layers, hidden_channels and feature_channels must be positive".into(),
            ));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        if !(self.th > 0.0 && self.th <= 1.0) {
            return Err(Error::Parameter(format!("th must be in (0, 1], got {}", self.th)));
        }
        if self.seq_len == 0 {
            return Err(Error::Parameter("seq_len must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Channels entering the first ConvLSTM layer: features, fixation map
    /// and the two coordinate planes.
    pub fn input_channels(&self) -> usize {
        self.feature_channels + 3
    }
}

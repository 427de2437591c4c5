//! Flat `key=value` run configuration.
//!
//! One file covers the model, loss, training, metric and synthetic-data
//! settings plus input paths. Blank lines and `#` comments are ignored;
//! unknown keys are rejected. [`RunConfig::to_text`] writes every key, so an
//! echoed config reproduces the run exactly.

use std::path::{Path, PathBuf};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::model::{FeatureSourceKind, ModelConfig, ThresholdMode};
use crate::train::TrainConfig;
use crate::types::GridSpec;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub metrics: MetricConfig,
    pub synth: SynthConfig,
    /// Scanpath CSV used by `train` when no dataset is given on the command line.
    pub dataset: Option<PathBuf>,
    /// Directory of precomputed feature tensors.
    pub features: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parameter(format!("bad boolean '{value}' for {key}"))),
    }
}

/// `model.*` entries.
pub fn model_pairs(m: &ModelConfig) -> Vec<(String, String)> {
    [
        ("model.grid_width", m.grid.width.to_string()),
        ("model.grid_height", m.grid.height.to_string()),
        ("model.layers", m.layers.to_string()),
        ("model.hidden_channels", m.hidden_channels.to_string()),
        ("model.kernel_size", m.kernel_size.to_string()),
        ("model.th", m.th.to_string()),
        ("model.threshold_mode", m.threshold_mode.as_str().to_string()),
        ("model.seq_len", m.seq_len.to_string()),
        ("model.sigma", m.sigma.to_string()),
        ("model.feature_source", m.feature_source.as_str().to_string()),
        ("model.feature_channels", m.feature_channels.to_string()),
        ("model.rho_init", m.rho_init.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Applies one `model.*` entry; returns `false` for keys outside the model.
pub fn set_model(m: &mut ModelConfig, key: &str, v: &str) -> Result<bool> {
    match key {
        "model.grid_width" => m.grid.width = parse(key, v)?,
        "model.grid_height" => m.grid.height = parse(key, v)?,
        "model.layers" => m.layers = parse(key, v)?,
        "model.hidden_channels" => m.hidden_channels = parse(key, v)?,
        "model.kernel_size" => m.kernel_size = parse(key, v)?,
        "model.th" => m.th = parse(key, v)?,
        "model.threshold_mode" => m.threshold_mode = ThresholdMode::parse(v)?,
        "model.seq_len" => m.seq_len = parse(key, v)?,
        "model.sigma" => m.sigma = parse(key, v)?,
        "model.feature_source" => m.feature_source = FeatureSourceKind::parse(v)?,
        "model.feature_channels" => m.feature_channels = parse(key, v)?,
        "model.rho_init" => m.rho_init = parse(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn train_pairs(t: &TrainConfig) -> Vec<(String, String)> {
    let mut out = model_pairs(&t.model);
    out.extend(
        [
            ("loss.gamma", t.loss.gamma.to_string()),
            ("loss.lambda_base", t.loss.lambda_base.to_string()),
            ("loss.lambda_slope", t.loss.lambda_slope.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.max_steps", t.max_steps.to_string()),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.teacher_forcing", t.teacher_forcing.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v)),
    );
    out
}

impl RunConfig {
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = train_pairs(&self.train);
        let m = &self.metrics;
        let s = &self.synth;
        let rest = [
            ("metrics.bins_x", m.bins_x.to_string()),
            ("metrics.bins_y", m.bins_y.to_string()),
            ("metrics.radius_frac", m.radius_frac.to_string()),
            ("metrics.min_line", m.min_line.to_string()),
            ("metrics.tde_k", m.tde_k.to_string()),
            ("synth.n_images", s.n_images.to_string()),
            ("synth.observers", s.observers.to_string()),
            ("synth.rois", s.rois.to_string()),
            ("synth.width", s.width.to_string()),
            ("synth.height", s.height.to_string()),
            ("synth.noise_frac", s.noise_frac.to_string()),
            ("synth.roi_radius_frac", s.roi_radius_frac.to_string()),
            ("synth.roi_lo", s.roi_lo.to_string()),
            ("synth.roi_hi", s.roi_hi.to_string()),
            ("synth.roi_separation_frac", s.roi_separation_frac.to_string()),
            ("synth.first_bias", s.first_bias.to_string()),
            ("synth.switch_prob", s.switch_prob.to_string()),
            ("synth.test_images", s.test_images.to_string()),
            ("paths.dataset", path_str(&self.dataset)),
            ("paths.features", path_str(&self.features)),
        ];
        out.extend(rest.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if set_model(&mut self.train.model, key, v)? {
            self.train.loss.sigma = self.train.model.sigma;
            self.synth.seq_len = self.train.model.seq_len;
            return Ok(());
        }
        let t = &mut self.train;
        let m = &mut self.metrics;
        let s = &mut self.synth;
        match key {
            "loss.gamma" => t.loss.gamma = parse(key, v)?,
            "loss.lambda_base" => t.loss.lambda_base = parse(key, v)?,
            "loss.lambda_slope" => t.loss.lambda_slope = parse(key, v)?,
            "train.lr" => t.lr = parse(key, v)?,
            "train.max_steps" => t.max_steps = parse(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse(key, v)?,
            "train.seed" => t.seed = parse(key, v)?,
            "train.teacher_forcing" => t.teacher_forcing = parse_bool(key, v)?,
            "metrics.bins_x" => m.bins_x = parse(key, v)?,
            "metrics.bins_y" => m.bins_y = parse(key, v)?,
            "metrics.radius_frac" => m.radius_frac = parse(key, v)?,
            "metrics.min_line" => m.min_line = parse(key, v)?,
            "metrics.tde_k" => m.tde_k = parse(key, v)?,
            "synth.n_images" => s.n_images = parse(key, v)?,
            "synth.observers" => s.observers = parse(key, v)?,
            "synth.rois" => s.rois = parse(key, v)?,
            "synth.width" => s.width = parse(key, v)?,
            "synth.height" => s.height = parse(key, v)?,
            "synth.noise_frac" => s.noise_frac = parse(key, v)?,
            "synth.roi_radius_frac" => s.roi_radius_frac = parse(key, v)?,
            "synth.roi_lo" => s.roi_lo = parse(key, v)?,
            "synth.roi_hi" => s.roi_hi = parse(key, v)?,
            "synth.roi_separation_frac" => s.roi_separation_frac = parse(key, v)?,
            "synth.first_bias" => s.first_bias = parse(key, v)?,
            "synth.switch_prob" => s.switch_prob = parse(key, v)?,
            "synth.test_images" => s.test_images = parse(key, v)?,
            "paths.dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "paths.features" => self.features = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::Parameter(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.train.model.grid.width, self.train.model.grid.height)?;
        self.train.validate()?;
        self.metrics.validate()?;
        self.synth.validate()
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("config line {}: expected key=value, got '{raw}'", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

/// Training and model entries, as stored in checkpoints.
pub fn train_config_pairs(t: &TrainConfig) -> Vec<(String, String)> {
    train_pairs(t)
}

/// Rebuilds a training configuration from checkpoint metadata.
pub fn train_config_from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<TrainConfig> {
    let mut cfg = RunConfig::default();
    for (k, v) in pairs {
        if k.starts_with("model.") || k.starts_with("loss.") || k.starts_with("train.") {
            cfg.set(k, v)?;
        }
    }
    cfg.train.validate()?;
    Ok(cfg.train)
}

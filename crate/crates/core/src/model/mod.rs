//! Generative scanpath network.
//!
//! Image features, the current fixation map and two coordinate planes are
//! stacked channel-wise and fed through a multi-layer Bayesian ConvLSTM. A
//! 1x1 head turns the top hidden state into a tSPM frame, from which the next
//! fixation is drawn after thresholding.

mod cell;
mod config;
mod features;
mod network;
mod sampler;

pub use cell::{convlstm_step, tspm_head, LayerState, LstmState};
pub use config::{FeatureSourceKind, ModelConfig, ThresholdMode};
pub use features::{
    coord_planes, resample_to_grid, FeatureProvider, FeatureStack, ImageInput, PrecomputedFeatures, RawImages,
};
pub use network::{stream_rng, ConvParams, ModelParams, ModelVars, Rollout, ScanpathModel, Session, FEATURE_LAYERS};
pub use sampler::{sample_next_point, surviving_pixels};

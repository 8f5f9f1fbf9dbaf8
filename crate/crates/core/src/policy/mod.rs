//! Fixation policy: per-cell pointwise scoring networks over synthetic
//! features, a temperature softmax over the action grid, and a REINFORCE
//! trainer with a batch baseline, Gaussian-spread updates and AdamW.

mod features;
mod network;
pub mod search;
mod train;

pub use features::{
    FeatureGrid, Featurizer, CH_CONCEPT, CH_COVERAGE, CH_GAIN, CH_GAZE_GRASP, CH_MISSING, CH_VISIBILITY, DEFAULT_CHANNELS,
};
pub use network::{
    action_distribution, default_widths, select_action, select_index, smoothed_objective, smoothed_policy_gradient,
    smoothing_weight, ActionDistribution, AdamW, ForwardCache, GradientSample, PolicyNetwork, SelectMode,
};
pub use train::{
    continue_training, train_policy_chain, BatchRecord, InitialPreset, PolicyChain, RewardKind, TrainingConfig,
    TrainingLog,
};

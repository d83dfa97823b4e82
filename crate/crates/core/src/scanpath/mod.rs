//! Saliency-driven walks over mesh vertices and the policy that learns them.

mod env;
mod eval;
mod io;
pub mod mlp;
mod ppo;

pub use env::{
    two_lobe_saliency, EnvState, RewardConfig, RewardTerms, ScanEnv, StartMode, StepOutcome, DIVERSITY_SCALE, DIVERSITY_WINDOW,
    EPISODE_LEN, N_ACTIONS, OBS_DIM, REGION_GRID,
};
pub use eval::{eval_starts, evaluate, generate_scanpath, greedy_action, paired_t_test, run_episode, Episode, PairedTest, Walker};
pub use io::{decode_policy, encode_policy, load_policy, save_policy};
pub use ppo::{gae, gae_episodic, ppo_loss, train_scanpath, train_scanpath_from, Batch, CurvePoint, Policy, PpoConfig, PpoLoss, PpoOutcome, Rollout, Worker};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScanpathError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid saliency: {0}")]
    InvalidSaliency(String),
    #[error("action {0} out of range")]
    InvalidAction(usize),
    #[error("episode already finished")]
    EpisodeOver,
    #[error("{rewards} rewards need {} values, got {values}", rewards + 1)]
    LengthMismatch { rewards: usize, values: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("malformed policy file: {0}")]
    Format(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ScanpathResult<T> = Result<T, ScanpathError>;

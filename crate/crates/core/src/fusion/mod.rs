//! Dual-stream saliency network: a geometric point encoder and a semantic
//! projection fused by multi-head attention, trained with a hybrid
//! divergence/correlation loss.

mod idw;
mod io;
mod loss;
mod model;
pub mod nn;
mod params;
mod planted;
mod train;

pub use idw::{idw_interpolate, IdwMatrix, IDW_EPS};
pub use io::{decode_checkpoint, encode_checkpoint, load_checkpoint, net_pairs, save_checkpoint, Checkpoint};
pub use loss::{hybrid_loss, LossValue, LossWeights};
pub use model::{assemble_geo_descriptors, backward, forward, loss_and_grad, loss_only, ForwardCache, FusionInput, Phase};
pub use params::{FusionConfig, FusionMode, FusionParams, NormState};
pub use planted::{curvature_proxy, planted_example, planted_features, planted_signal, planted_net, planted_split, planted_target, planted_train_config, mean_cc, PlantedConfig};
pub use train::{check_shapes, predict, train_fusion, train_fusion_from, AdamW, EpochStats, TrainConfig, TrainExample, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("feature dimension {got}, network expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type FusionResult<T> = Result<T, FusionError>;

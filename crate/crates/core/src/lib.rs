//! Mesh saliency prediction and scanpath generation.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: triangle meshes, spatial queries, sampling, fixtures
//! - [`metrics`]: saliency and scanpath evaluation
//! - [`unproject`]: multi-view camera geometry and per-vertex feature transfer
//! - [`fusion`]: the dual-stream saliency network with hand-written gradients
//! - [`scanpath`]: the mesh-walk environment and clipped policy optimization
//! - [`config`]: key=value run configuration shared by the CLI

pub mod mesh;
pub mod metrics;
pub mod unproject;
pub mod fusion;
pub mod scanpath;
pub mod config;

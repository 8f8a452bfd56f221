//! Object-goal navigation laboratory.
//!
//! A 2D grid-world stand-in for indoor object-goal navigation, built to study
//! shortcut learning from a wall-color/room-type training bias and its
//! mitigation via language-based feature augmentation of the agent's
//! observation embeddings.
//!
//! The crate is organized around six subsystems:
//! - [`world`]: procedural 3-room houses, agent dynamics, raycast percepts,
//!   geodesic distance fields.
//! - [`embedding`]: a synthetic joint vision-language embedding provider with
//!   an exactly compositional text/image alignment, plus a file-backed
//!   provider for externally computed embeddings.
//! - [`augmentation`]: text-delta construction, alpha-scaled embedding
//!   augmentation, and running feature standardization.
//! - [`agent`]: recurrent actor-critic with PPO/GAE and manual
//!   backpropagation through time, verified by finite differences.
//! - [`evalsuite`]: out-of-distribution wall-color test sets, deception
//!   labeling, and Success/SPL/DTT metrics.
//! - [`harness`]: experiment configuration, training/evaluation commands,
//!   and checkpoint persistence.

pub mod agent;
pub mod augmentation;
pub mod embedding;
pub mod evalsuite;
pub mod exec;
pub mod harness;
pub mod world;

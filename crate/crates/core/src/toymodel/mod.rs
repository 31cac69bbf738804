//! Desk-scale stand-in for a personalized text-to-image backbone: a 2-D
//! concept/attribute mixture world, a small conditional denoiser trained on it
//! with one (concept, attribute) pair held out, and an analytic reference
//! embedder used for evaluation.

pub mod checkpoint;
pub mod conditioning;
pub mod embedder;
pub mod model;
pub mod train;
pub mod world;

pub use checkpoint::Checkpoint;
pub use conditioning::{encode_empty, encode_prompt, interpolate, ConditionSource, ConditioningVector, Subject};
pub use embedder::{reference_embedder, EmbedderScores};
pub use model::{Architecture, DenoiserModel, Token};
pub use train::{train, TrainConfig, TrainReport};
pub use world::{generate_dataset, DataPoint, Point, ToyWorldSpec};

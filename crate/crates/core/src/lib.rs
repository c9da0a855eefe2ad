//! Geometry engine for action-driven avatars represented as six-view position maps.
//!
//! The pipeline: posed meshes are rasterized into [`posmap::PositionMapAtlas`]es inside
//! group-normalized coordinates, a [`predictor`] produces the next frame from three
//! context frames and a key-press [`ActionLabel`], [`rollout`] accumulates the
//! predicted motion in world space and re-centers the window, [`pca`] re-aligns the
//! six views, and [`splat`] turns frames into Gaussian splats.

pub mod action;
pub mod avatar;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod mesh;
pub mod pca;
pub mod posmap;
pub mod predictor;
pub mod rollout;
pub mod splat;
pub mod synth;

pub use action::ActionLabel;
pub use error::{Error, Result};
pub use mesh::{MeshFrame, MotionSequence, ReferenceMesh};

/// Double-precision 3-vector used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;

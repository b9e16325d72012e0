//! Desk-scale pipeline for learning physical feature embeddings from
//! synthetic tactile exploration and using them to control an in-hand
//! swing-up maneuver.
//!
//! The crate is organized around the data flow of one experiment:
//!
//! 1. [`catalog`] builds the 33 template objects and the train/test splits.
//! 2. [`simdyn`] integrates the swing-up dynamics and turns a control
//!    parameter into a final in-hand angle.
//! 3. [`tactile`] synthesizes marker displacement fields for the two
//!    exploration actions (tilting, shaking).
//! 4. [`dataset`] bundles everything into self-supervised episodes and a
//!    versioned binary file format.
//! 5. [`tensor`] is a small reverse-mode autodiff engine; [`models`] builds
//!    the five architecture variants on top of it.
//! 6. [`pipeline`] trains and evaluates models, [`control`] selects control
//!    parameters at inference time, and [`analysis`] inspects the learned
//!    embedding space.
//!
//! Data-parallel inner loops (episode generation, per-sample gradients,
//! closed-loop trials) run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential iteration otherwise. Results are
//! bit-identical either way.

pub mod analysis;
pub mod catalog;
pub mod config;
pub mod control;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod models;
pub mod pipeline;
pub mod simdyn;
pub mod tactile;
pub mod tensor;

pub use error::{exit_code, Error, Result};

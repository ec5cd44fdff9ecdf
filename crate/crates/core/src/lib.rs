//! Desk-scale hierarchical temporal-aware video-language pre-training.
//!
//! The crate covers the whole pipeline: a synthetic moving-shapes corpus,
//! long/short temporal views, small transformer encoders with a fusion
//! encoder and text decoder, the pre-training objectives (contrastive,
//! matching, masked and prefix language modelling, moment-word exploration
//! and view-relation alignment), training loops and the evaluation harness
//! including the frame-shuffling test.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod training;
pub mod views;

pub use error::{Error, Result};

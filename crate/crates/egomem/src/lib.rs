//! Egocentric memory for multi-party interaction: a deterministic simulation
//! and library in which an agent localizes voices into spatial bins, tracks
//! faces with a Kalman/Hungarian multi-object tracker, binds people to
//! positions in a spatial working memory, and uses those bindings to label
//! and persist its own face/voice dataset — then evaluates open-set person
//! recognition on what it collected.
//!
//! Every run is seeded; identical seeds produce byte-identical datasets,
//! traces, and reports.

pub mod collector;
pub mod error;
pub mod features;
pub mod game;
pub mod io;
pub mod matrix;
pub mod memory;
pub mod mot;
pub mod pipeline;
pub mod seeds;
pub mod recognition;
pub mod sim;
pub mod sls;

pub mod cli;

pub use error::{Error, Result};

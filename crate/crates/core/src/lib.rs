//! Generalized belief propagation for tensor network contraction.

pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{IndexLabel, LabeledTensor, C64};
pub mod network;
pub mod region;

pub use network::{Cell, Geometry, Network};
pub use region::{build_preset, build_regions, Preset, RegionGraph};
pub mod cli;
pub mod engine;
pub mod models;
pub mod observables;
pub mod oracles;
pub mod sweep;

pub use engine::{init_messages, EngineSettings, GbpState, InitStrategy, MessageSet, RunOutcome, Schedule};

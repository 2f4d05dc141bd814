//! Core of the speculative-decoding benchmark: tokens and distributions,
//! synthetic target oracles, reuse indexes, drafting methods, the lossless
//! verifier and the instrumented decode loop.

pub mod draft;
pub mod drafters;
pub mod engine;
pub mod index;
pub mod oracle;
pub mod rng;
pub mod token;
pub mod verify;

pub use draft::{Capabilities, Draft, DraftNode, Method, Speculation};
pub use drafters::{build_drafter, validate_config, ConfigError, Drafter, DrafterResources, MethodSpec};
pub use engine::{
    run_autoregressive, run_trajectory, EngineError, EngineOptions, PhaseTimes, StepTrace,
    StopCondition, StopReason, TrajectoryResult,
};
pub use oracle::{SharedOracle, SyntheticOracleSpec, TokenOracle};
pub use rng::DecodeRng;
pub use token::{Context, DecodePolicy, Distribution, Token};

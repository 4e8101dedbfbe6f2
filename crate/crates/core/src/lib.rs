//! Simulator and analysis toolkit for quantum-device PUFs (QuPUFs).
//!
//! A QuPUF is a small quantum circuit whose measured response statistics,
//! shaped by device-specific error rates, fingerprint the hardware that ran
//! it. This crate models fleets of noisy devices with temporal drift, builds
//! and executes the Hadamard-based and decoherence-based circuit variants,
//! digitizes analog responses into bit-string signatures, evaluates
//! inter-/intra-Hamming-distance quality, and uses a challenge-response
//! database to authenticate devices against honest and malicious cloud
//! scheduler allocations.
//!
//! The `parallel` feature (default) runs sessions, sweep cells, and
//! detection trials on rayon; without it the same code runs sequentially.
//! Results are identical either way because every stochastic unit derives
//! its RNG stream from its own index.

pub mod auth;
pub mod circuits;
pub mod cloud;
pub mod device;
pub mod error;
pub mod exec;
pub mod metrics;
mod rng;
pub mod signature;

pub use auth::{choose_threshold, AuthDecision, AuthOutcome, CRPDatabase, CRPRecord, ChallengeKey};
pub use circuits::{
    circuit_description, execute_challenge, ideal_prob_one, PufChallenge, PufVariant,
    ResponseTrace, SessionRecord,
};
pub use cloud::{
    allocate, execute_on_allocation, run_detection_experiment, AllocationEvent, DetectionReport,
    SchedulerPolicy,
};
pub use device::{
    find_isomorphic_embeddings, generate_device, generate_registry, line_edges, sample_session,
    t_shape_edges, DeviceFingerprint, DeviceRegistry, QubitParams, SessionParams,
};
pub use error::{Error, Result};
pub use metrics::{
    combined_deviation, inter_hd, intra_hd, select_optimum, sweep, HDStats, Optimum, SweepConfig,
    SweepResult, SweepRow,
};
pub use signature::{
    digitize, digitize_with, hamming_distance, hamming_distance_pct, mean_signature, BitEncoding,
    Signature,
};

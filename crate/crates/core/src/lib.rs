//! Security analysis toolkit for a device-independent weak-string-erasure
//! protocol in the bounded/noisy quantum-storage setting.
//!
//! The crate has three layers:
//!
//! * exact small-matrix quantum machinery ([`matrix`], [`chsh`]): CHSH values,
//!   effective anticommutators and the violation-vs-incompatibility bound;
//! * closed-form security bounds ([`bounds`], [`alpha`]): min-entropy rates
//!   for memoryless devices and the sequential-attack decay rate
//!   `alpha_min(q, gamma)`;
//! * exact guessing-probability oracles and a seeded round-level protocol
//!   simulator ([`guessing`], [`sim`]).
//!
//! With the `parallel` feature (default) the Monte-Carlo and grid sweeps run
//! on rayon; without it every entry point falls back to a sequential
//! implementation with identical output.

pub mod alpha;
pub mod bounds;
pub mod chsh;
pub mod error;
pub mod guessing;
pub mod matrix;
pub mod rng;
pub mod sim;

pub use error::Error;

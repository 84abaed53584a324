//! Transmit-power policies and frame-duration design for a cognitive link
//! sharing a channel with an unslotted ON/OFF primary user under sensing
//! errors.
//!
//! The crate models the primary user's alternating-renewal activity
//! ([`traffic`]), the energy detector's operating point ([`sensing`]),
//! and Rayleigh fading expectations ([`fading`]); derives the closed-form
//! power policies and their evaluators ([`policy`]); and solves the
//! energy-efficiency and throughput problems jointly with the frame
//! duration ([`optimizer`]). A renewal-process Monte Carlo oracle
//! ([`mcsim`]) validates every analytic formula, and [`runner`] drives
//! scenario files into CSV sweeps for the `cogra-opt` binary.
//!
//! Start with the runnable examples: each `examples/*.rs` file exercises
//! one capability end to end.

pub mod fading;
pub mod mcsim;
pub mod numeric;
pub mod optimizer;
pub mod policy;
pub mod runner;
pub mod scenario;
pub mod sensing;
pub mod traffic;

pub use fading::FadingGrid;
pub use optimizer::OptResult;
pub use policy::{ChannelConstants, PolicyParams, PowerConstraints};
pub use scenario::{FrameSpec, Scenario, SolverConfig};
pub use sensing::SensingSpec;
pub use traffic::TrafficModel;

//! Closed-form outage probability and minimum average transmit power (ATP)
//! for multi-beam MIMO eigen-beamforming over i.i.d. Rayleigh fading, with
//! per-stream BER and outage constraints.
//!
//! The crate has four layers:
//!
//! - [`special`]: Gaussian Q, integer-order incomplete gamma, the
//!   exponential integral, and the logarithmic-integral family, all
//!   computed in-repo.
//! - [`eigen_dist`]: the permutation expansion of ordered Wishart
//!   eigenvalue densities and the tail integrals every closed form needs.
//! - [`policy`] / [`atp`]: per-stream policy constants, the two
//!   spatiotemporal power-allocation rules (Chernoff-bound and
//!   dynamic-bound), and their closed-form average transmit power.
//! - [`montecarlo`]: an independent channel simulator estimating outage,
//!   ATP, and constrained BER with standard errors, for verifying the
//!   closed forms.

pub mod atp;
pub mod eigen_dist;
pub mod error;
pub mod montecarlo;
pub mod policy;
pub mod quad;
pub mod special;

pub use atp::{atp_dynamic, atp_traditional, global_op, individual_op, AtpBreakdown, GlobalOutage};
pub use eigen_dist::{ChannelDims, ExpansionTerm, TermList};
pub use error::{Error, Result};
pub use montecarlo::{McEstimate, PolicyKind, SimConfig, StreamMetrics};
pub use policy::{Modulation, OutageInput, PolicyParams, StreamSpec};

//! Throughput–delay–reliability analysis of slotted-ALOHA ARQ links whose
//! interferers form a planar Poisson field.
//!
//! The library computes, for single-hop and multi-hop routes with a per-hop
//! retransmission budget:
//!
//! * exact success probabilities, expected delays, and transmission
//!   capacities ([`analytic`]),
//! * provable upper/lower bounds and their tightness constant ([`bounds`]),
//! * optimal per-hop budget allocations and hop counts ([`optimize`]),
//! * reproducible Monte Carlo estimates with confidence intervals ([`sim`]).
//!
//! Everything is driven by the radial integrals of [`quadrature`] and the
//! shared domain types of [`model`]. The `tdr` binary (see [`cli`]) exposes
//! the same machinery as CSV-producing subcommands.

pub mod analytic;
pub mod bounds;
pub mod cli;
pub mod model;
pub mod numerics;
pub mod optimize;
pub mod quadrature;
pub mod sim;

pub use model::{outage_constant, HopPlan, NetworkParams, Provenance, SuccessProfile, TcResult};
pub use numerics::Flagged;
pub use quadrature::QuadratureSpec;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] model::ParamError),
    #[error(transparent)]
    Plan(#[from] model::PlanError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    /// The conditional-success denominator (the probability of the
    /// conditioning failure run) underflowed; the parameter regime is
    /// outside the numeric range of the alternating-sum representation.
    #[error("conditional-success denominator underflowed ({denominator:e})")]
    ConditionalUnderflow { denominator: f64 },
    /// Budget allocation has no feasible solution.
    #[error("infeasible allocation: {reason}")]
    InfeasibleAllocation { reason: String },
    #[error(transparent)]
    Sim(#[from] sim::SimError),
}

pub type Result<T> = std::result::Result<T, Error>;

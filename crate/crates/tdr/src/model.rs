//! Domain types shared by every other module: physical/protocol parameters,
//! hop plans, success profiles, and transmission-capacity results.

use serde::Serialize;

/// Physical and protocol constants of the network.
///
/// `lambda` is the density of potential transmitters (per m²) whose locations
/// persist across time slots; each is independently active in a slot with the
/// ALOHA probability `p`, so the active density per slot is `p * lambda`.
/// The per-hop spectral efficiency is derived as `rate = log2(1 + beta)` and
/// can never be set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkParams {
    lambda: f64,
    p: f64,
    alpha: f64,
    beta: f64,
    rate: f64,
}

/// Construction-time validation failures for [`NetworkParams`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("node density must be positive and finite, got {0}")]
    Density(f64),
    #[error("ALOHA access probability must lie in (0, 1], got {0}")]
    AccessProbability(f64),
    #[error("path-loss exponent must exceed 2 (the interference integrals diverge otherwise), got {0}")]
    PathLoss(f64),
    #[error("SIR threshold must be positive and finite, got {0}")]
    SirThreshold(f64),
}

impl NetworkParams {
    pub fn new(lambda: f64, p: f64, alpha: f64, beta: f64) -> Result<Self, ParamError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ParamError::Density(lambda));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(ParamError::AccessProbability(p));
        }
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(ParamError::PathLoss(alpha));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ParamError::SirThreshold(beta));
        }
        let rate = (1.0 + beta).log2();
        Ok(Self { lambda, p, alpha, beta, rate })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Spectral efficiency `log2(1 + beta)` in bits/sec/Hz.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Area spectral density `lambda * rate`, the prefactor of every
    /// transmission-capacity expression.
    pub fn density_rate(&self) -> f64 {
        self.lambda * self.rate
    }
}

/// Geometry constant of the per-slot outage exponent:
/// `c1 = 2 pi^2 csc(2 pi / alpha) / alpha`.
///
/// The mean kernel mass of a unit-distance link is `p * beta^(2/alpha) * c1`,
/// so the single-slot outage is `q(d) = 1 - exp(-lambda p c1 d^2 beta^(2/alpha))`.
/// Strictly positive and finite for `alpha > 2`, diverging as `alpha -> 2+`.
pub fn outage_constant(params: &NetworkParams) -> f64 {
    let alpha = params.alpha();
    2.0 * std::f64::consts::PI.powi(2) / (alpha * (2.0 * std::f64::consts::PI / alpha).sin())
}

/// Per-hop distances and retransmission budgets of an `N`-hop route.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopPlan {
    distances: Vec<f64>,
    budgets: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("a hop plan needs at least one hop")]
    Empty,
    #[error("distances and budgets differ in length: {distances} vs {budgets}")]
    LengthMismatch { distances: usize, budgets: usize },
    #[error("hop distance must be positive and finite, got {0}")]
    HopDistance(f64),
}

impl HopPlan {
    pub fn new(distances: Vec<f64>, budgets: Vec<u32>) -> Result<Self, PlanError> {
        if distances.is_empty() {
            return Err(PlanError::Empty);
        }
        if distances.len() != budgets.len() {
            return Err(PlanError::LengthMismatch {
                distances: distances.len(),
                budgets: budgets.len(),
            });
        }
        if let Some(&d) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(PlanError::HopDistance(d));
        }
        Ok(Self { distances, budgets })
    }

    /// `n` equal hops covering `total_distance`, each with the same budget.
    pub fn equidistant(total_distance: f64, hops: usize, per_hop_budget: u32) -> Result<Self, PlanError> {
        if hops == 0 {
            return Err(PlanError::Empty);
        }
        Self::new(vec![total_distance / hops as f64; hops], vec![per_hop_budget; hops])
    }

    pub fn single_hop(distance: f64, budget: u32) -> Result<Self, PlanError> {
        Self::new(vec![distance], vec![budget])
    }

    pub fn hops(&self) -> usize {
        self.distances.len()
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn budgets(&self) -> &[u32] {
        &self.budgets
    }

    /// End-to-end distance, the sum of the hop distances.
    pub fn total_distance(&self) -> f64 {
        self.distances.iter().sum()
    }

    /// End-to-end retransmission budget, the sum of the hop budgets.
    pub fn total_budget(&self) -> u32 {
        self.budgets.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.distances.iter().copied().zip(self.budgets.iter().copied())
    }
}

/// Per-slot success probabilities of a single hop together with their sum and
/// the expected number of slots consumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessProfile {
    /// `per_slot[j - 1]` is the probability that the packet goes through in
    /// slot `j`, for `j = 1 ..= budget + 1`. The events are mutually
    /// exclusive, so they sum to `total`.
    pub per_slot: Vec<f64>,
    /// Probability of success within the budget.
    pub total: f64,
    /// Expected number of slots used, counting the full `budget + 1` slots
    /// for packets that never get through. Lies in `[1, budget + 1]`.
    pub expected_delay: f64,
}

/// How a [`TcResult`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    LowerBound,
    UpperBound,
    Simulated,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::LowerBound => "lower-bound",
            Provenance::UpperBound => "upper-bound",
            Provenance::Simulated => "simulated",
        })
    }
}

/// A transmission-capacity evaluation together with its constituents.
///
/// The identity `capacity = density_rate * success / delay` holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TcResult {
    /// End-to-end capacity in bits/sec/Hz/m².
    pub capacity: f64,
    /// End-to-end success probability.
    pub success: f64,
    /// Expected end-to-end delay in slots.
    pub delay: f64,
    /// `lambda * rate`, the density-rate product.
    pub density_rate: f64,
    pub provenance: Provenance,
}

impl TcResult {
    pub fn new(params: &NetworkParams, success: f64, delay: f64, provenance: Provenance) -> Self {
        let density_rate = params.density_rate();
        Self {
            capacity: density_rate * success / delay,
            success,
            delay,
            density_rate,
            provenance,
        }
    }
}

//! Correlation-inequality bounds on the success probability, the
//! conditional-success machinery behind the lower bound, and the multi-hop
//! capacity lower bounds built from them.
//!
//! Per-slot SIR failures are increasing events in the interferer
//! configuration, so the FKG inequality lower-bounds the probability of a
//! failure run by the product of marginals. That yields the upper bound
//! `P_s <= 1 - qhat^(D+1)` with `qhat = p q + 1 - p`, and, combined with the
//! worst-case conditional success after `D` failures, the matching lower
//! bound. The ratio `c = conditional / (1 - q)` measures how far temporal
//! correlation pushes the exact curve below the independent-slot model.

use crate::analytic::{exp_kernel_masses, per_slot_outage};
use crate::model::{HopPlan, NetworkParams, Provenance, TcResult};
use crate::numerics::{ln_binomial, CancellationSum, Flagged, KahanSum};
use crate::quadrature::QuadratureSpec;
use crate::{Error, Result};

/// `qhat = p q + 1 - p`: the per-slot probability of no successful
/// reception, combining ALOHA idling with SIR outage.
pub fn no_reception_prob(d: f64, params: &NetworkParams) -> f64 {
    params.p() * per_slot_outage(d, params) + 1.0 - params.p()
}

/// FKG upper bound `P_s <= 1 - qhat^(D+1)`; strictly increasing in the
/// budget and tight at `D = 0, p = 1`.
pub fn success_upper_bound_single(budget: u32, d: f64, params: &NetworkParams) -> f64 {
    1.0 - no_reception_prob(d, params).powi(budget as i32 + 1)
}

/// `P(SIR success in slot D+1 | SIR failures in slots 1..D)`, evaluated as
/// the ratio of the alternating moment sums
/// `sum_l (-1)^l C(D,l) E_{l+1} / sum_l (-1)^l C(D,l) E_l`.
///
/// Equals `1 - q` at `D = 0` and decreases in `D`: with persistent
/// interferer locations, observed failures are evidence of a hostile
/// neighborhood. Its small-lambda limit is a lambda-independent ratio of
/// kernel moments (e.g. `1 - p (alpha-2)/alpha` at `D = 1`), strictly below
/// `1 - q`; correlation does not vanish with density.
pub fn conditional_success_given_failures(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    let moments = exp_kernel_masses(budget + 1, d, params, spec)?;
    let mut numerator = CancellationSum::default();
    let mut denominator = CancellationSum::default();
    for ell in 0..=budget {
        let ln_c = ln_binomial(budget, ell);
        let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
        numerator.add(sign * (ln_c + moments[ell as usize + 1].ln()).exp());
        // E_0 = 1, so the l = 0 denominator term is exactly C(D, 0).
        let ln_e = if ell == 0 { 0.0 } else { moments[ell as usize].ln() };
        denominator.add(sign * (ln_c + ln_e).exp());
    }
    let den = denominator.value();
    if den <= f64::MIN_POSITIVE {
        return Err(Error::ConditionalUnderflow { denominator: den });
    }
    let lost = numerator.lost_digits().max(denominator.lost_digits());
    Ok(Flagged::new((numerator.value() / den).clamp(0.0, 1.0), lost))
}

/// Lower bound `P_s >= conditional * (1 - qhat^(D+1)) / (1 - q)`.
pub fn success_lower_bound_single(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    let conditional = conditional_success_given_failures(budget, d, params, spec)?;
    let q = per_slot_outage(d, params);
    let scale = success_upper_bound_single(budget, d, params) / (1.0 - q);
    Ok(conditional.map(|c| (c * scale).clamp(0.0, 1.0)))
}

/// Tightness constant `c = conditional / (1 - q)`, clamped to `(0, 1]`.
/// `c = 1` at `D = 0`; in dense regimes (or at large budgets) it records the
/// correlation penalty between the exact curve and the geometric model.
pub fn tightness_constant(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    let conditional = conditional_success_given_failures(budget, d, params, spec)?;
    let q = per_slot_outage(d, params);
    Ok(conditional.map(|c| (c / (1.0 - q)).min(1.0)))
}

/// Both bounds and their ingredients at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    /// Conditional success probability after a full run of failures.
    pub conditional: f64,
    /// `conditional / (1 - q)`, in `(0, 1]`.
    pub tightness_c: f64,
}

/// Evaluates [`BoundPair`] at `(budget, d)`.
pub fn bracket(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<BoundPair>> {
    let conditional = conditional_success_given_failures(budget, d, params, spec)?;
    let q = per_slot_outage(d, params);
    let upper = success_upper_bound_single(budget, d, params);
    Ok(conditional.map(|c| BoundPair {
        lower: (c * upper / (1.0 - q)).clamp(0.0, 1.0),
        upper,
        conditional: c,
        tightness_c: (c / (1.0 - q)).min(1.0),
    }))
}

/// Multi-hop success lower bound `c^N prod_n (1 - qhat_{d_n}^(D_n + 1))`:
/// hop successes are decreasing events, so FKG factorizes the route.
pub fn success_lower_bound_multi(plan: &HopPlan, params: &NetworkParams, c: f64) -> f64 {
    let mut product = c.powi(plan.hops() as i32);
    for (d, budget) in plan.iter() {
        product *= 1.0 - no_reception_prob(d, params).powi(budget as i32 + 1);
    }
    product
}

/// Per-hop delay estimates under the geometric success model with tightness
/// `c`, together with the universal worst case `D + N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBound {
    /// Model estimate `c (1 - qhat^(D_n+1)) / (1 - q) + (D_n+1)(1 - c)`
    /// per hop.
    pub per_hop: Vec<f64>,
    /// Sum of the per-hop estimates; never exceeds `worst_case`.
    pub estimate: f64,
    /// `D + N`: every hop can at worst burn its full budget.
    pub worst_case: f64,
}

pub fn expected_delay_bound_multi(plan: &HopPlan, params: &NetworkParams, c: f64) -> DelayBound {
    let per_hop: Vec<f64> = plan
        .iter()
        .map(|(d, budget)| {
            let q = per_slot_outage(d, params);
            let slots = budget as f64 + 1.0;
            c * (1.0 - no_reception_prob(d, params).powi(budget as i32 + 1)) / (1.0 - q)
                + slots * (1.0 - c)
        })
        .collect();
    let mut sum = KahanSum::default();
    for &v in &per_hop {
        sum.add(v);
    }
    DelayBound {
        estimate: sum.value(),
        worst_case: (plan.total_budget() as usize + plan.hops()) as f64,
        per_hop,
    }
}

/// Capacity lower bound with the model delay in the denominator:
/// `lambda R c^N prod(1 - qhat^(D_n+1)) / sum_n E{M_n}(c)`.
///
/// The numerator is a true lower bound on `P_s`; the denominator is the
/// geometric-model delay, which can undershoot the exact delay when `c < 1`,
/// so this curve can cross the exact capacity in strongly asymmetric
/// configurations. The [`tc_lower_bound_simple`] variant with the worst-case
/// delay is a guaranteed bound.
pub fn tc_lower_bound(plan: &HopPlan, params: &NetworkParams, c: f64) -> TcResult {
    let success = success_lower_bound_multi(plan, params, c);
    let delay = expected_delay_bound_multi(plan, params, c).estimate;
    TcResult::new(params, success, delay, Provenance::LowerBound)
}

/// Capacity lower bound with the worst-case delay `D + N`:
/// `lambda R c^N prod(1 - qhat^(D_n+1)) / (D + N)`. This is the objective
/// the budget allocator maximizes.
pub fn tc_lower_bound_simple(plan: &HopPlan, params: &NetworkParams, c: f64) -> TcResult {
    let success = success_lower_bound_multi(plan, params, c);
    let delay = (plan.total_budget() as usize + plan.hops()) as f64;
    TcResult::new(params, success, delay, Provenance::LowerBound)
}

/// Geometric mean of the per-hop tightness constants of a plan, so that
/// `c^N` in the multi-hop bounds equals the product of per-hop constants.
pub fn plan_tightness(
    plan: &HopPlan,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    let mut log_sum = 0.0;
    let mut lost = 0.0f64;
    for (d, budget) in plan.iter() {
        let c = tightness_constant(budget, d, params, spec)?;
        lost = lost.max(c.lost_digits);
        log_sum += c.value.max(f64::MIN_POSITIVE).ln();
    }
    Ok(Flagged::new((log_sum / plan.hops() as f64).exp(), lost))
}

//! Exact success probabilities, expected delays, and transmission capacities
//! for single-hop and two-hop ARQ over the Poisson field.
//!
//! With interferer locations held fixed across slots (fresh fading and fresh
//! ALOHA marks every slot), the probability that the typical link fails in
//! `k` designated transmission slots and succeeds in one more is
//!
//! ```text
//! T_k = E{ X (1 - X)^k } = sum_{l=0}^{k} (-1)^l C(k, l) exp(-lambda J(l+1, d))
//! ```
//!
//! where `X` is the product of the per-interferer Laplace factors, whose
//! moments the probability generating functional turns into the radial
//! integrals `J` of [`crate::quadrature`]. ALOHA gating of the typical
//! transmitter then weighs these terms binomially over the slot budget.

use crate::model::{HopPlan, NetworkParams, Provenance, SuccessProfile, TcResult};
use crate::numerics::{binom_pmf, ln_binomial, CancellationSum, Flagged, KahanSum};
use crate::quadrature::{radial_integral_pair, radial_integral_single, QuadratureSpec};
use crate::Result;

/// Single-slot SIR outage `q(d) = 1 - exp(-lambda J(1, d))`, evaluated
/// through the closed form `J(1, d) = p d^2 beta^(2/alpha) c1`.
pub fn per_slot_outage(d: f64, params: &NetworkParams) -> f64 {
    -(-params.lambda() * kernel_mass(d, params)).exp_m1()
}

/// Closed form of the first radial integral, `J(1, d)`.
pub(crate) fn kernel_mass(d: f64, params: &NetworkParams) -> f64 {
    params.p()
        * d
        * d
        * params.beta().powf(2.0 / params.alpha())
        * crate::model::outage_constant(params)
}

/// `E_l = exp(-lambda J(l, d))` for `l = 0..=max_ell`. These are the moments
/// `E{X^l}` of the conditional per-slot success probability.
pub(crate) fn exp_kernel_masses(
    max_ell: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    (0..=max_ell)
        .map(|ell| {
            let j = radial_integral_single(ell, d, params, spec)?;
            Ok((-params.lambda() * j).exp())
        })
        .collect()
}

/// `T_k` for `k = 0..=max_k` from the moment sequence, with cancellation
/// tracking. Binomials enter in log space and are re-signed.
fn joint_success_terms(max_k: u32, moments: &[f64]) -> Vec<Flagged<f64>> {
    (0..=max_k)
        .map(|k| {
            let mut sum = CancellationSum::default();
            for ell in 0..=k {
                let magnitude = ln_binomial(k, ell) + moments[ell as usize + 1].ln();
                let term = magnitude.exp();
                sum.add(if ell % 2 == 0 { term } else { -term });
            }
            Flagged::new(sum.value().clamp(0.0, 1.0), sum.lost_digits())
        })
        .collect()
}

/// Probability of success exactly in slot `j >= 1` of a single hop, summing
/// over how many of the earlier slots the typical transmitter was active in.
pub fn success_by_slot_single(
    slot: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    assert!(slot >= 1, "slots are 1-based");
    let moments = exp_kernel_masses(slot, d, params, spec)?;
    let terms = joint_success_terms(slot - 1, &moments);
    Ok(slot_probability(slot, params.p(), &terms))
}

fn slot_probability(slot: u32, p: f64, terms: &[Flagged<f64>]) -> Flagged<f64> {
    let mut sum = KahanSum::default();
    let mut lost = 0.0f64;
    for k in 0..slot {
        sum.add(binom_pmf(slot - 1, k, p) * terms[k as usize].value);
        lost = lost.max(terms[k as usize].lost_digits);
    }
    Flagged::new((p * sum.value()).clamp(0.0, 1.0), lost)
}

/// Full per-slot profile of a single hop with budget `D`: the mutually
/// exclusive slot-success probabilities, their total, and the expected number
/// of slots consumed, `E{M} = sum_j j P_s^j + (D+1)(1 - P_s)`.
pub fn success_profile_single(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<SuccessProfile>> {
    let moments = exp_kernel_masses(budget + 1, d, params, spec)?;
    let terms = joint_success_terms(budget, &moments);

    let mut per_slot = Vec::with_capacity(budget as usize + 1);
    let mut lost = 0.0f64;
    for slot in 1..=budget + 1 {
        let v = slot_probability(slot, params.p(), &terms);
        lost = lost.max(v.lost_digits);
        per_slot.push(v.value);
    }

    let mut total_sum = KahanSum::default();
    for &v in &per_slot {
        total_sum.add(v);
    }
    let total = total_sum.value().min(1.0);

    let mut delay = KahanSum::default();
    for (i, &v) in per_slot.iter().enumerate() {
        delay.add((i + 1) as f64 * v);
    }
    delay.add((budget + 1) as f64 * (1.0 - total));
    let expected_delay = delay.value().clamp(1.0, (budget + 1) as f64);

    Ok(Flagged::new(
        SuccessProfile { per_slot, total, expected_delay },
        lost,
    ))
}

/// `P_s = sum_{j=1}^{D+1} P_s^j`, non-decreasing in the budget.
pub fn success_prob_single(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    Ok(success_profile_single(budget, d, params, spec)?.map(|p| p.total))
}

/// Expected slots consumed by a single hop; lies in `[1, budget + 1]`.
pub fn expected_delay_single(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    Ok(success_profile_single(budget, d, params, spec)?.map(|p| p.expected_delay))
}

/// `C = lambda R P_s / E{M}` for a single hop.
pub fn transmission_capacity_single(
    budget: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<TcResult>> {
    let profile = success_profile_single(budget, d, params, spec)?;
    Ok(profile.map(|p| TcResult::new(params, p.total, p.expected_delay, Provenance::Exact)))
}

/// Budgets beyond this trigger a cost warning on the two-hop exact sum; the
/// number of pair integrals grows as `(D1 + 1)(D2 + 1)`.
pub const TWO_HOP_BUDGET_WARN: u32 = 16;

/// Exact end-to-end success probability of a two-hop route.
///
/// Both hops see the same interferer locations, so the joint probability
/// couples them through the pair integrals `J2`; everything else is the
/// single-hop structure applied per hop. Symmetric under swapping
/// `(budget1, d1)` with `(budget2, d2)` and non-decreasing in each budget.
pub fn success_prob_two_hop_exact(
    budget1: u32,
    budget2: u32,
    d1: f64,
    d2: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    success_prob_two_hop_with_cap(budget1, budget2, d1, d2, params, spec, TWO_HOP_BUDGET_WARN)
}

/// [`success_prob_two_hop_exact`] with a caller-chosen cost-warning cap.
pub fn success_prob_two_hop_with_cap(
    budget1: u32,
    budget2: u32,
    d1: f64,
    d2: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
    warn_cap: u32,
) -> Result<Flagged<f64>> {
    if budget1 + budget2 > warn_cap {
        log::warn!(
            "two-hop exact evaluation at D1 + D2 = {} needs {} pair integrals and \
             an O(D1^2 D2^2) alternating sum; expect it to be slow",
            budget1 + budget2,
            (budget1 as u64 + 1) * (budget2 as u64 + 1),
        );
    }
    let p = params.p();

    // Joint moments A[r][s] = E{X1^(r+1) X2^(s+1)} = exp(-lambda J2(r+1, s+1)).
    let mut joint = vec![vec![0.0f64; budget2 as usize + 1]; budget1 as usize + 1];
    for (r, row) in joint.iter_mut().enumerate() {
        for (s, cell) in row.iter_mut().enumerate() {
            let j2 = radial_integral_pair(r as u32 + 1, s as u32 + 1, d1, d2, params, spec)?;
            *cell = (-params.lambda() * j2).exp();
        }
    }

    // ALOHA slot weights per hop: W[l] = p * sum_j C(j-1, l) p^l (1-p)^(j-1-l).
    let weight = |budget: u32, failures: u32| -> f64 {
        let mut acc = KahanSum::default();
        for j in failures + 1..=budget + 1 {
            acc.add(binom_pmf(j - 1, failures, p));
        }
        p * acc.value()
    };
    let w1: Vec<f64> = (0..=budget1).map(|l| weight(budget1, l)).collect();
    let w2: Vec<f64> = (0..=budget2).map(|m| weight(budget2, m)).collect();

    let mut total = KahanSum::default();
    let mut lost = 0.0f64;
    for (ell, &wl) in w1.iter().enumerate() {
        for (m, &wm) in w2.iter().enumerate() {
            // G(l, m) = E{ X1 (1-X1)^l X2 (1-X2)^m }, expanded binomially.
            let mut g = CancellationSum::default();
            for (r, row) in joint.iter().enumerate().take(ell + 1) {
                let ln_cr = ln_binomial(ell as u32, r as u32);
                for (s, &moment) in row.iter().enumerate().take(m + 1) {
                    let magnitude = (ln_cr + ln_binomial(m as u32, s as u32)).exp();
                    let term = magnitude * moment;
                    g.add(if (r + s) % 2 == 0 { term } else { -term });
                }
            }
            lost = lost.max(g.lost_digits());
            total.add(wl * wm * g.value().clamp(0.0, 1.0));
        }
    }
    Ok(Flagged::new(total.value().clamp(0.0, 1.0), lost))
}

/// End-to-end expected delay `E{M} = sum_n E{M_n}` by linearity, each hop
/// evaluated at its own distance and budget. Lies in `[N, D + N]`.
pub fn expected_delay_multi(
    plan: &HopPlan,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<f64>> {
    let mut sum = KahanSum::default();
    let mut lost = 0.0f64;
    for (d, budget) in plan.iter() {
        let hop = expected_delay_single(budget, d, params, spec)?;
        lost = lost.max(hop.lost_digits);
        sum.add(hop.value);
    }
    Ok(Flagged::new(sum.value(), lost))
}

/// Exact two-hop transmission capacity
/// `C = lambda R P_s / (E{M1} + E{M2})`.
pub fn transmission_capacity_two_hop_exact(
    budget1: u32,
    budget2: u32,
    d1: f64,
    d2: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<Flagged<TcResult>> {
    let success = success_prob_two_hop_exact(budget1, budget2, d1, d2, params, spec)?;
    let m1 = expected_delay_single(budget1, d1, params, spec)?;
    let m2 = expected_delay_single(budget2, d2, params, spec)?;
    let lost = success.lost_digits.max(m1.lost_digits).max(m2.lost_digits);
    Ok(Flagged::new(
        TcResult::new(params, success.value, m1.value + m2.value, Provenance::Exact),
        lost,
    ))
}

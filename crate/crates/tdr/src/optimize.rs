//! Retransmission-budget allocation across hops and the optimal hop count.
//!
//! The allocator maximizes `sum_n ln(1 - qhat_{d_n}^(D_n + 1))` subject to
//! `sum_n D_n = D`, `D_n >= 0` — the log of the multi-hop success lower
//! bound, whose capacity denominator `D + N` is allocation-free. The
//! objective is separable and concave, so the stationarity condition
//!
//! ```text
//! D_n + 1 = ln(gamma / (ln qhat_n + gamma)) / ln qhat_n,   gamma < 0
//! ```
//!
//! pins every budget from one multiplier, found by bisection exactly as in
//! waterfilling; negative budgets are projected to zero (the active-set
//! step). Equidistant hops admit a closed-form multiplier used to
//! cross-check the bisection.

use crate::bounds::{no_reception_prob, tc_lower_bound_simple};
use crate::model::{HopPlan, NetworkParams, TcResult};
use crate::{Error, Result};
use serde::Serialize;

/// Outcome of a budget allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    /// Solution of the continuous relaxation; sums to the total budget
    /// within 1e-9.
    pub continuous_budgets: Vec<f64>,
    /// Integer allocation: floor of the continuous solution plus greedy
    /// marginal assignment; exchange-locally (hence globally) optimal.
    pub integer_budgets: Vec<u32>,
    /// Lagrange multiplier of the continuous solution (negative).
    pub multiplier: f64,
    /// `sum_n ln(1 - qhat_n^(D_n+1))` evaluated at the integer budgets.
    pub objective: f64,
}

/// Continuous budget prescribed by multiplier `gamma` for a hop with the
/// given `ln(qhat)`; negative values mean the hop's non-negativity
/// constraint is active at this multiplier.
pub fn budget_for_multiplier(gamma: f64, ln_qhat: f64) -> f64 {
    let y = gamma / (ln_qhat + gamma);
    y.ln() / ln_qhat - 1.0
}

/// Multiplier at which a hop's continuous budget hits zero.
fn zero_budget_multiplier(qhat: f64) -> f64 {
    qhat * qhat.ln() / (1.0 - qhat)
}

fn projected_total(gamma: f64, ln_qhats: &[f64]) -> f64 {
    ln_qhats
        .iter()
        .map(|&lq| budget_for_multiplier(gamma, lq).max(0.0))
        .sum()
}

fn objective_of(budgets: &[u32], qhats: &[f64]) -> f64 {
    budgets
        .iter()
        .zip(qhats)
        .map(|(&b, &qh)| (-qh.powi(b as i32 + 1)).ln_1p())
        .sum()
}

/// Marginal objective gain of granting one more slot to a hop currently
/// holding `x` slots; positive and decreasing in `x` (concavity).
fn marginal_gain(qhat: f64, x: u32) -> f64 {
    (-qhat.powi(x as i32 + 2)).ln_1p() - (-qhat.powi(x as i32 + 1)).ln_1p()
}

/// Splits `total_budget` retransmissions across hops at the given distances.
pub fn allocate_budgets(
    distances: &[f64],
    total_budget: u32,
    params: &NetworkParams,
) -> Result<AllocationResult> {
    if distances.is_empty() {
        return Err(Error::InfeasibleAllocation {
            reason: "no hops to allocate to".into(),
        });
    }
    let qhats: Vec<f64> = distances
        .iter()
        .map(|&d| no_reception_prob(d, params))
        .collect();
    let ln_qhats: Vec<f64> = qhats.iter().map(|&q| q.ln()).collect();

    let gamma_floor = qhats
        .iter()
        .map(|&qh| zero_budget_multiplier(qh))
        .fold(f64::INFINITY, f64::min);

    if total_budget == 0 {
        let n = distances.len();
        return Ok(AllocationResult {
            continuous_budgets: vec![0.0; n],
            integer_budgets: vec![0; n],
            multiplier: gamma_floor,
            objective: objective_of(&vec![0; n], &qhats),
        });
    }

    // Bisection bracket: at gamma_floor every projected budget is zero; the
    // projected total grows without bound as gamma -> 0-, so halving toward
    // zero is guaranteed to overshoot the target.
    let target = total_budget as f64;
    let mut lo = gamma_floor;
    let mut hi = gamma_floor / 2.0;
    while projected_total(hi, &ln_qhats) < target {
        hi /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if projected_total(mid, &ln_qhats) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let continuous: Vec<f64> = ln_qhats
        .iter()
        .map(|&lq| budget_for_multiplier(gamma, lq).max(0.0))
        .collect();

    // Floor, then hand out the leftover slots by best marginal gain; a final
    // exchange pass guards the local optimality that concavity promises.
    let mut integer: Vec<u32> = continuous.iter().map(|&b| b as u32).collect();
    let mut remaining = total_budget - integer.iter().sum::<u32>();
    while remaining > 0 {
        let best = (0..integer.len())
            .max_by(|&i, &j| {
                marginal_gain(qhats[i], integer[i])
                    .total_cmp(&marginal_gain(qhats[j], integer[j]))
            })
            .expect("nonempty");
        integer[best] += 1;
        remaining -= 1;
    }
    loop {
        let mut improved = false;
        for from in 0..integer.len() {
            if integer[from] == 0 {
                continue;
            }
            for to in 0..integer.len() {
                if to == from {
                    continue;
                }
                let gain = marginal_gain(qhats[to], integer[to])
                    - marginal_gain(qhats[from], integer[from] - 1);
                if gain > 1e-15 {
                    integer[from] -= 1;
                    integer[to] += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    Ok(AllocationResult {
        objective: objective_of(&integer, &qhats),
        continuous_budgets: continuous,
        integer_budgets: integer,
        multiplier: gamma,
    })
}

/// Closed-form multiplier for `hops` equidistant hops covering `d_total`:
/// `gamma = ln(qhat) E / (1 - E)` with `E = qhat^((D + N) / N)`. Feeding it
/// back through [`budget_for_multiplier`] returns `D / N` per hop.
pub fn equidistant_multiplier(
    hops: usize,
    total_budget: u32,
    d_total: f64,
    params: &NetworkParams,
) -> f64 {
    let qhat = no_reception_prob(d_total / hops as f64, params);
    let ln_qhat = qhat.ln();
    let e = (ln_qhat * (total_budget as f64 + hops as f64) / hops as f64).exp();
    ln_qhat * e / (1.0 - e)
}

/// One row of a hop-count scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopCountRow {
    pub hops: usize,
    /// `floor(D / N)` slots on every hop; `D mod N` slots are discarded.
    pub per_hop_budget: u32,
    /// Capacity lower bound of the floor plan.
    pub bound: TcResult,
    /// Same bound with the remainder slots spread one per hop instead of
    /// discarded (reported as an extension of the floor rule).
    pub bound_remainder_spread: TcResult,
}

/// Result of scanning equidistant routes over the hop count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopCountScan {
    /// Hop count maximizing the floor-plan bound; ties break toward fewer
    /// hops.
    pub best_hops: usize,
    pub rows: Vec<HopCountRow>,
}

/// Evaluates the simple capacity lower bound for `N = 1..=n_max` equidistant
/// hops with per-hop budgets `floor(D / N)` and returns the argmax.
pub fn optimal_hop_count(
    d_total: f64,
    total_budget: u32,
    params: &NetworkParams,
    c: f64,
    n_max: usize,
) -> HopCountScan {
    assert!(n_max >= 1, "scan needs at least one hop count");
    let mut rows = Vec::with_capacity(n_max);
    for hops in 1..=n_max {
        let per_hop = total_budget / hops as u32;
        let remainder = total_budget as usize % hops;
        let floor_plan = HopPlan::equidistant(d_total, hops, per_hop).expect("hops >= 1");
        let mut budgets = vec![per_hop; hops];
        for b in budgets.iter_mut().take(remainder) {
            *b += 1;
        }
        let spread_plan =
            HopPlan::new(vec![d_total / hops as f64; hops], budgets).expect("hops >= 1");
        rows.push(HopCountRow {
            hops,
            per_hop_budget: per_hop,
            bound: tc_lower_bound_simple(&floor_plan, params, c),
            bound_remainder_spread: tc_lower_bound_simple(&spread_plan, params, c),
        });
    }
    let best_hops = rows
        .iter()
        .fold((1usize, f64::NEG_INFINITY), |(best, top), row| {
            if row.bound.capacity > top {
                (row.hops, row.bound.capacity)
            } else {
                (best, top)
            }
        })
        .0;
    HopCountScan { best_hops, rows }
}

/// First-order small-interference expansion of the hop-count objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseApprox {
    /// `1/(D+N) - s^(floor(D/N)+1) N^(-D/N) / (D+N)` with
    /// `s = c1 lambda d^2 beta^(2/alpha)`.
    pub value: f64,
    /// The expansion parameter `s`; the approximation is meaningful only
    /// when it is well below one.
    pub small_parameter: f64,
}

impl SparseApprox {
    pub fn valid(&self) -> bool {
        self.small_parameter < 0.1
    }
}

/// Evaluates the sparse-regime objective for `hops` equidistant hops. Valid
/// in the near-persistent (`p ~ 1`), vanishing-density regime, where it is
/// decreasing in the hop count: single-hop transmission wins.
pub fn sparse_tc_approximation(
    hops: usize,
    d_total: f64,
    total_budget: u32,
    params: &NetworkParams,
) -> SparseApprox {
    let small = crate::model::outage_constant(params)
        * params.lambda()
        * d_total
        * d_total
        * params.beta().powf(2.0 / params.alpha());
    let n = hops as f64;
    let d_over_n = total_budget as f64 / n;
    let denom = total_budget as f64 + n;
    let penalty =
        small.powi((total_budget / hops as u32) as i32 + 1) * (-d_over_n * n.ln()).exp() / denom;
    let approx = SparseApprox { value: 1.0 / denom - penalty, small_parameter: small };
    if !approx.valid() {
        log::warn!(
            "sparse approximation outside its validity range: \
             c1 lambda d^2 beta^(2/alpha) = {:.3} >= 0.1",
            small
        );
    }
    approx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params() -> NetworkParams {
        NetworkParams::new(0.1, 0.5, 3.0, 3.0).unwrap()
    }

    #[test]
    fn single_hop_gets_everything() {
        let alloc = allocate_budgets(&[1.0], 7, &params()).unwrap();
        assert_eq!(alloc.integer_budgets, vec![7]);
        assert!((alloc.continuous_budgets[0] - 7.0).abs() < 1e-9);
    }

    #[test]
    fn equidistant_split_is_even() {
        let alloc = allocate_budgets(&[1.0, 1.0], 4, &params()).unwrap();
        assert_eq!(alloc.integer_budgets, vec![2, 2]);
        assert!((alloc.continuous_budgets[0] - 2.0).abs() < 1e-9);
        assert!((alloc.continuous_budgets[1] - 2.0).abs() < 1e-9);
        let total: f64 = alloc.continuous_budgets.iter().sum();
        assert!((total - 4.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_split_favors_the_long_hop() {
        let alloc = allocate_budgets(&[0.5, 1.5], 4, &params()).unwrap();
        assert_eq!(alloc.integer_budgets, vec![1, 3]);
    }

    #[test]
    fn zero_budget_allocates_zeros() {
        let alloc = allocate_budgets(&[0.5, 1.5], 0, &params()).unwrap();
        assert_eq!(alloc.integer_budgets, vec![0, 0]);
        assert!(alloc.multiplier < 0.0);
    }

    #[test]
    fn empty_distances_are_infeasible() {
        assert!(matches!(
            allocate_budgets(&[], 4, &params()),
            Err(Error::InfeasibleAllocation { .. })
        ));
    }

    #[test]
    fn bisection_matches_closed_form_multiplier() {
        let p = params();
        let gamma_closed = equidistant_multiplier(2, 4, 2.0, &p);
        let alloc = allocate_budgets(&[1.0, 1.0], 4, &p).unwrap();
        assert!(
            (alloc.multiplier - gamma_closed).abs() / gamma_closed.abs() < 1e-6,
            "bisection {} vs closed form {}",
            alloc.multiplier,
            gamma_closed
        );
    }

    #[test]
    fn closed_form_multiplier_recovers_even_budgets() {
        let p = params();
        for (hops, budget, d_total) in [(2usize, 4u32, 2.0), (1, 6, 1.0), (3, 9, 1.5)] {
            let gamma = equidistant_multiplier(hops, budget, d_total, &p);
            let qhat = no_reception_prob(d_total / hops as f64, &p);
            let recovered = budget_for_multiplier(gamma, qhat.ln());
            assert!(
                (recovered - budget as f64 / hops as f64).abs() < 1e-9,
                "recovered {recovered}"
            );
        }
    }

    #[test]
    fn projected_total_is_monotone_in_gamma() {
        let p = params();
        let ln_qhats: Vec<f64> = [0.5, 1.0, 1.5]
            .iter()
            .map(|&d| no_reception_prob(d, &p).ln())
            .collect();
        let mut gamma = -20.0;
        let mut last = projected_total(gamma, &ln_qhats);
        while gamma < -1e-6 {
            gamma /= 1.5;
            let next = projected_total(gamma, &ln_qhats);
            assert!(next >= last, "projected total must not decrease");
            last = next;
        }
    }

    #[test]
    fn allocation_commutes_with_permutation() {
        let p = params();
        let a = allocate_budgets(&[0.4, 0.9, 0.7], 9, &p).unwrap();
        let b = allocate_budgets(&[0.9, 0.7, 0.4], 9, &p).unwrap();
        assert_eq!(a.integer_budgets[0], b.integer_budgets[2]);
        assert_eq!(a.integer_budgets[1], b.integer_budgets[0]);
        assert_eq!(a.integer_budgets[2], b.integer_budgets[1]);
    }

    #[test]
    fn integer_allocations_are_exchange_optimal() {
        let p = params();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..20 {
            let hops = rng.random_range(2..=4);
            let budget = rng.random_range(0..=12u32);
            let distances: Vec<f64> =
                (0..hops).map(|_| rng.random_range(0.3..2.0)).collect();
            let alloc = allocate_budgets(&distances, budget, &p).unwrap();
            assert_eq!(alloc.integer_budgets.iter().sum::<u32>(), budget);

            let qhats: Vec<f64> =
                distances.iter().map(|&d| no_reception_prob(d, &p)).collect();
            let base = objective_of(&alloc.integer_budgets, &qhats);
            for from in 0..hops {
                if alloc.integer_budgets[from] == 0 {
                    continue;
                }
                for to in 0..hops {
                    if to == from {
                        continue;
                    }
                    let mut moved = alloc.integer_budgets.clone();
                    moved[from] -= 1;
                    moved[to] += 1;
                    assert!(
                        objective_of(&moved, &qhats) <= base + 1e-12,
                        "single-unit move improved the objective: {distances:?} {budget}"
                    );
                }
            }
        }
    }

    #[test]
    fn hop_scan_prefers_single_hop_when_sparse() {
        let p = params();
        let scan = optimal_hop_count(1.0, 10, &p, 1.0, 8);
        assert_eq!(scan.best_hops, 1);
        assert_eq!(scan.rows.len(), 8);
        assert_eq!(scan.rows[2].per_hop_budget, 3); // floor(10 / 3)

        // Near-vanishing density: single hop still wins, by the ~12%
        // delay-term margin (the hop counts differ only through D + N once
        // interference is negligible).
        let sparse = NetworkParams::new(1e-4, 0.5, 3.0, 3.0).unwrap();
        let scan = optimal_hop_count(1.0, 10, &sparse, 1.0, 8);
        assert_eq!(scan.best_hops, 1);
        let ratio = scan.rows[0].bound.capacity / scan.rows[1].bound.capacity;
        assert!((ratio - 1.125).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn hop_scan_not_monotone_when_dense() {
        let dense = NetworkParams::new(0.5, 0.5, 3.0, 3.0).unwrap();
        let scan = optimal_hop_count(1.0, 10, &dense, 1.0, 8);
        let caps: Vec<f64> = scan.rows.iter().map(|r| r.bound.capacity).collect();
        assert!(
            caps.windows(2).any(|w| w[1] > w[0]),
            "expected a non-monotone sequence, got {caps:?}"
        );
        assert_ne!(scan.best_hops, 1);
    }

    #[test]
    fn remainder_spread_uses_full_budget() {
        // Spreading the leftover slots raises the success product but also
        // the D + N denominator, so the capacity can move either way; what
        // is guaranteed is the higher success probability and the full
        // budget in the delay term.
        let p = params();
        let scan = optimal_hop_count(1.0, 10, &p, 0.9, 8);
        for row in &scan.rows {
            assert!(row.bound_remainder_spread.success >= row.bound.success - 1e-15);
            assert!(
                (row.bound_remainder_spread.delay - (10.0 + row.hops as f64)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn sparse_approximation_limits() {
        let p = NetworkParams::new(1e-12, 0.5, 3.0, 3.0).unwrap();
        let a = sparse_tc_approximation(3, 1.0, 10, &p);
        assert!((a.value - 1.0 / 13.0).abs() < 1e-12);
        assert!(a.valid());

        // Decreasing in the hop count in its validity range.
        let p = NetworkParams::new(1e-3, 0.5, 3.0, 3.0).unwrap();
        let values: Vec<f64> =
            (1..=5).map(|n| sparse_tc_approximation(n, 1.0, 10, &p).value).collect();
        for w in values.windows(2) {
            assert!(w[0] > w[1], "expected decreasing, got {values:?}");
        }

        let dense = NetworkParams::new(0.5, 0.5, 3.0, 3.0).unwrap();
        assert!(!sparse_tc_approximation(1, 1.0, 10, &dense).valid());
    }

    #[test]
    fn sparse_ranking_agrees_with_bound_ranking() {
        // At p ~ 1 and tiny density the approximation must order hop counts
        // the same way as the bound it expands (up to the lambda R c^N
        // prefactor, removed by setting c = 1 and comparing ranks).
        let p = NetworkParams::new(1e-3, 1.0, 3.0, 3.0).unwrap();
        let scan = optimal_hop_count(1.0, 10, &p, 1.0, 5);
        let approx: Vec<f64> =
            (1..=5).map(|n| sparse_tc_approximation(n, 1.0, 10, &p).value).collect();
        let rank = |xs: &[f64]| {
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.sort_by(|&i, &j| xs[j].total_cmp(&xs[i]));
            idx
        };
        let bound_caps: Vec<f64> = scan.rows.iter().map(|r| r.bound.capacity).collect();
        assert_eq!(rank(&bound_caps), rank(&approx));
    }
}

//! Monte Carlo validation: Poisson interferer fields with locations that
//! persist across slots (the source of cross-slot correlation), slotted
//! ALOHA ARQ hop by hop, and reproducible estimates of success probability,
//! delay, and transmission capacity.
//!
//! Reproducibility contract: every trial derives its own ChaCha substream
//! from `(seed, trial_index)`, and aggregation reduces integer tallies, so
//! results are bit-identical for any worker count or scheduling order.

use crate::model::{HopPlan, NetworkParams, Provenance, TcResult};
use crate::numerics::{inverse_normal_cdf, wilson_interval};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {reason}")]
    InvalidConfig { reason: String },
}

/// How unreached hops contribute to the recorded delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayConvention {
    /// Every hop is charged its marginal delay, drawn as if reached, even
    /// when an earlier hop already failed; matches summing per-hop expected
    /// delays analytically.
    AnalyticCompatible,
    /// Hops after the first failure are charged zero slots.
    StopOnFailure,
}

/// Where interference is measured for each hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Relays on the source–destination segment; each hop's interference is
    /// measured at that hop's actual receiver.
    PerHopReceivers,
    /// All hops measured at the route midpoint, mirroring the co-located
    /// receiver approximation of the two-hop analysis; isolates that
    /// approximation's gap when compared against the default.
    CollocatedReceivers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Interference truncation radius around each receiver; `None` derives
    /// it from the residual-mean-interference bound (see
    /// [`auto_region_radius`]).
    pub region_radius: Option<f64>,
    pub delay_convention: DelayConvention,
    /// Confidence level of the reported intervals.
    pub confidence: f64,
    pub geometry: Geometry,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            region_radius: None,
            delay_convention: DelayConvention::AnalyticCompatible,
            confidence: 0.95,
            geometry: Geometry::PerHopReceivers,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.trials < 1 {
            return Err(SimError::InvalidConfig { reason: "trials must be at least 1".into() });
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(SimError::InvalidConfig {
                reason: format!("confidence must lie in (0, 1), got {}", self.confidence),
            });
        }
        if let Some(r) = self.region_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SimError::InvalidConfig {
                    reason: format!("region radius must be positive, got {r}"),
                });
            }
        }
        Ok(())
    }

    fn resolve_radius(&self, max_hop_distance: f64, params: &NetworkParams) -> f64 {
        match self.region_radius {
            Some(r) => {
                let auto = auto_region_radius(max_hop_distance, params);
                if r < auto {
                    log::warn!(
                        "region radius {r:.1} is below the residual-interference bound \
                         {auto:.1}; estimates carry a small optimistic truncation bias"
                    );
                }
                r
            }
            None => auto_region_radius(max_hop_distance, params),
        }
    }
}

/// Radius at which the mean interference from beyond the region,
/// `2 pi lambda p R^(2-alpha) / (alpha - 2)`, drops to `1e-4` of the
/// signal-power scale `d_max^(-alpha) / beta`.
pub fn auto_region_radius(max_hop_distance: f64, params: &NetworkParams) -> f64 {
    let alpha = params.alpha();
    let tolerance = 1e-4 * max_hop_distance.powf(-alpha) / params.beta();
    (2.0 * std::f64::consts::PI * params.lambda() * params.p() / ((alpha - 2.0) * tolerance))
        .powf(1.0 / (alpha - 2.0))
}

/// Outcome of one simulated packet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketOutcome {
    /// True iff every hop succeeded within its budget.
    pub success: bool,
    /// Slots used per hop (`budget + 1` when the hop itself failed, 0 for
    /// hops never charged under the stop-on-failure convention).
    pub per_hop_slots: Vec<u32>,
    pub total_slots: u32,
}

/// An estimate together with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiValue {
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
}

/// Monte Carlo estimate of a hop plan's end-to-end behavior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    /// Success probability with a Wilson interval.
    pub p_success: CiValue,
    /// Mean end-to-end slots with a normal interval.
    pub mean_delay: CiValue,
    /// `lambda R p_hat / delay_hat`.
    pub capacity: f64,
    pub trials: u64,
    pub seed: u64,
}

fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Geometry shared by all trials of a run.
struct Field {
    disc_center_x: f64,
    disc_radius: f64,
    point_count: Poisson<f64>,
    /// x-coordinates at which each hop's interference is measured.
    receiver_x: Vec<f64>,
    /// `beta * d_n^alpha` per hop: the interference-to-signal threshold.
    threshold: Vec<f64>,
    mark: u64,
    alpha: f64,
}

impl Field {
    fn new(plan: &HopPlan, params: &NetworkParams, config: &SimConfig) -> Result<Self, SimError> {
        let span = plan.total_distance();
        let d_max = plan.distances().iter().fold(0.0f64, |a, &b| a.max(b));
        let radius = config.resolve_radius(d_max, params);
        let disc_radius = radius + span / 2.0;
        let mean = params.lambda() * std::f64::consts::PI * disc_radius * disc_radius;
        let receiver_x: Vec<f64> = match config.geometry {
            Geometry::PerHopReceivers => plan
                .distances()
                .iter()
                .scan(0.0, |acc, d| {
                    *acc += d;
                    Some(*acc)
                })
                .collect(),
            Geometry::CollocatedReceivers => vec![span / 2.0; plan.hops()],
        };
        Ok(Self {
            disc_center_x: span / 2.0,
            disc_radius,
            point_count: Poisson::new(mean.max(f64::MIN_POSITIVE)).map_err(|e| {
                SimError::InvalidConfig { reason: format!("point count distribution: {e}") }
            })?,
            receiver_x,
            threshold: plan
                .distances()
                .iter()
                .map(|&d| params.beta() * d.powf(params.alpha()))
                .collect(),
            mark: mark_threshold(params.p()),
            alpha: params.alpha(),
        })
    }

    fn sample_points(&self, rng: &mut ChaCha8Rng, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let count = self.point_count.sample(rng) as u64;
        out.reserve(count as usize);
        for _ in 0..count {
            // Rejection sampling in the bounding square.
            loop {
                let x = 2.0 * rng.random::<f64>() - 1.0;
                let y = 2.0 * rng.random::<f64>() - 1.0;
                if x * x + y * y <= 1.0 {
                    out.push((
                        self.disc_center_x + self.disc_radius * x,
                        self.disc_radius * y,
                    ));
                    break;
                }
            }
        }
    }

    fn hop_weights(&self, hop: usize, points: &[(f64, f64)], out: &mut Vec<f64>) {
        let rx = self.receiver_x[hop];
        out.clear();
        out.extend(points.iter().map(|&(x, y)| {
            let dx = x - rx;
            pathloss(dx * dx + y * y, self.alpha)
        }));
    }
}

/// ALOHA mark threshold against `next_u32`; exact at p = 1 and p = 1/2.
fn mark_threshold(p: f64) -> u64 {
    (p * 4_294_967_296.0).round() as u64
}

#[inline]
fn pathloss(r2: f64, alpha: f64) -> f64 {
    // r^(-alpha) in the squared-distance variable; an interferer at the
    // receiver yields +inf, which correctly forces outage whenever active.
    if alpha == 3.0 {
        1.0 / (r2 * r2.sqrt())
    } else if alpha == 4.0 {
        1.0 / (r2 * r2)
    } else {
        r2.powf(-0.5 * alpha)
    }
}

/// First slot (1-based) in which the typical transmitter is active and its
/// SIR clears the threshold, scanning at most `max_slots` slots. Fresh ALOHA
/// marks and fading every slot; idle slots consume budget but no field work.
fn first_success_slot(
    rng: &mut ChaCha8Rng,
    weights: &[f64],
    threshold: f64,
    mark: u64,
    max_slots: u32,
) -> Option<u32> {
    for slot in 1..=max_slots {
        if (rng.next_u32() as u64) >= mark {
            continue; // typical transmitter idle
        }
        let h0: f64 = Exp1.sample(rng);
        let mut interference = 0.0f64;
        for &w in weights {
            if (rng.next_u32() as u64) < mark {
                let fade: f64 = Exp1.sample(rng);
                interference += w * fade;
            }
        }
        if h0 >= threshold * interference {
            return Some(slot);
        }
    }
    None
}

/// One Poisson interferer field, deterministic in `(seed, trial_index)`.
/// The disc is centered on the route midpoint with radius
/// `region_radius + span / 2`, so every receiver sees the full region.
pub fn sample_network(
    params: &NetworkParams,
    config: &SimConfig,
    route_span: f64,
    trial_index: u64,
) -> Result<Vec<(f64, f64)>, SimError> {
    config.validate()?;
    let plan = HopPlan::single_hop(route_span, 0)
        .map_err(|e| SimError::InvalidConfig { reason: e.to_string() })?;
    let field = Field::new(&plan, params, config)?;
    let mut rng = trial_rng(config.seed, trial_index);
    let mut points = Vec::new();
    field.sample_points(&mut rng, &mut points);
    Ok(points)
}

/// Simulates one packet across the plan: locations sampled once and held
/// fixed for every slot of every hop; fresh fading and ALOHA marks per slot;
/// relays forward in order.
pub fn simulate_packet(
    plan: &HopPlan,
    params: &NetworkParams,
    config: &SimConfig,
    trial_index: u64,
) -> Result<PacketOutcome, SimError> {
    config.validate()?;
    let field = Field::new(plan, params, config)?;
    let mut rng = trial_rng(config.seed, trial_index);
    let mut scratch = Scratch::default();
    Ok(run_packet(plan, &field, config.delay_convention, &mut rng, &mut scratch))
}

#[derive(Default)]
struct Scratch {
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

fn run_packet(
    plan: &HopPlan,
    field: &Field,
    convention: DelayConvention,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> PacketOutcome {
    field.sample_points(rng, &mut scratch.points);
    let mut per_hop_slots = vec![0u32; plan.hops()];
    let mut success = true;
    let mut total = 0u32;
    for (hop, budget) in plan.budgets().iter().enumerate() {
        if !success && convention == DelayConvention::StopOnFailure {
            break;
        }
        field.hop_weights(hop, &scratch.points, &mut scratch.weights);
        let cap = budget + 1;
        let slots = match first_success_slot(
            rng,
            &scratch.weights,
            field.threshold[hop],
            field.mark,
            cap,
        ) {
            Some(s) => s,
            None => {
                success = false;
                cap
            }
        };
        per_hop_slots[hop] = slots;
        total += slots;
    }
    PacketOutcome { success, per_hop_slots, total_slots: total }
}

trait Tally: Default + Send {
    fn merge(self, other: Self) -> Self;
}

/// Runs `trials` independent trials in parallel and reduces their integer
/// tallies; the reduction is associative, so the result does not depend on
/// how rayon partitions the range.
fn run_trials<T, F>(trials: u64, seed: u64, per_trial: F) -> T
where
    T: Tally,
    F: Fn(&mut ChaCha8Rng, &mut Scratch, &mut T) + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || (T::default(), Scratch::default()),
            |(mut tally, mut scratch), trial| {
                let mut rng = trial_rng(seed, trial);
                per_trial(&mut rng, &mut scratch, &mut tally);
                (tally, scratch)
            },
        )
        .map(|(tally, _)| tally)
        .reduce(T::default, |a, b| a.merge(b))
}

#[derive(Default, Clone)]
struct PlanTally {
    successes: u64,
    slot_sum: u64,
    slot_sq_sum: u64,
}

impl Tally for PlanTally {
    fn merge(self, other: Self) -> Self {
        Self {
            successes: self.successes + other.successes,
            slot_sum: self.slot_sum + other.slot_sum,
            slot_sq_sum: self.slot_sq_sum + other.slot_sq_sum,
        }
    }
}

fn estimate_from_counts(
    successes: u64,
    slot_sum: u64,
    slot_sq_sum: u64,
    params: &NetworkParams,
    config: &SimConfig,
) -> SimEstimate {
    let n = config.trials as f64;
    let p_hat = successes as f64 / n;
    let (lo, hi) = wilson_interval(successes, config.trials, config.confidence);
    let mean = slot_sum as f64 / n;
    let variance = if config.trials > 1 {
        (slot_sq_sum as f64 - n * mean * mean).max(0.0) / (n - 1.0)
    } else {
        0.0
    };
    let z = inverse_normal_cdf(0.5 + config.confidence / 2.0);
    let half = z * (variance / n).sqrt();
    SimEstimate {
        p_success: CiValue { estimate: p_hat, low: lo, high: hi },
        mean_delay: CiValue { estimate: mean, low: mean - half, high: mean + half },
        capacity: params.density_rate() * p_hat / mean,
        trials: config.trials,
        seed: config.seed,
    }
}

/// Estimates success probability, mean delay, and capacity of a plan.
/// Deterministic in `(seed, trials)` regardless of worker count.
pub fn estimate_success(
    plan: &HopPlan,
    params: &NetworkParams,
    config: &SimConfig,
) -> Result<SimEstimate, SimError> {
    config.validate()?;
    let field = Field::new(plan, params, config)?;
    let convention = config.delay_convention;
    let tally: PlanTally = run_trials(config.trials, config.seed, |rng, scratch, tally: &mut PlanTally| {
        let outcome = run_packet(plan, &field, convention, rng, scratch);
        tally.successes += outcome.success as u64;
        tally.slot_sum += outcome.total_slots as u64;
        tally.slot_sq_sum += (outcome.total_slots as u64).pow(2);
    });
    Ok(estimate_from_counts(tally.successes, tally.slot_sum, tally.slot_sq_sum, params, config))
}

/// [`estimate_success`] packaged as a transmission-capacity result.
pub fn estimate_tc(
    plan: &HopPlan,
    params: &NetworkParams,
    config: &SimConfig,
) -> Result<TcResult, SimError> {
    let estimate = estimate_success(plan, params, config)?;
    Ok(TcResult::new(
        params,
        estimate.p_success.estimate,
        estimate.mean_delay.estimate,
        Provenance::Simulated,
    ))
}

#[derive(Clone, Default)]
struct HistTally(Vec<u64>);

impl Tally for HistTally {
    fn merge(mut self, other: Self) -> Self {
        if self.0.is_empty() {
            return other;
        }
        if other.0.is_empty() {
            return self;
        }
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
        self
    }
}

impl HistTally {
    fn bump(&mut self, len: usize, index: usize) {
        if self.0.is_empty() {
            self.0 = vec![0; len];
        }
        self.0[index] += 1;
    }
}

/// Sweeps a single hop over budgets `0..=max_budget` in one simulation pass:
/// each trial records the first successful slot, and every budget's estimate
/// is read off the histogram. Trial-for-trial identical to running
/// [`estimate_success`] at each budget with the same seed.
pub fn sweep_single_hop(
    d: f64,
    max_budget: u32,
    params: &NetworkParams,
    config: &SimConfig,
) -> Result<Vec<SimEstimate>, SimError> {
    config.validate()?;
    let plan = HopPlan::single_hop(d, max_budget)
        .map_err(|e| SimError::InvalidConfig { reason: e.to_string() })?;
    let field = Field::new(&plan, params, config)?;
    let slots = max_budget as usize + 1;
    // Histogram over first-success slot: index 0 = never, s = slot s.
    let tally: HistTally = run_trials(config.trials, config.seed, |rng, scratch, tally: &mut HistTally| {
        field.sample_points(rng, &mut scratch.points);
        field.hop_weights(0, &scratch.points, &mut scratch.weights);
        let hit = first_success_slot(rng, &scratch.weights, field.threshold[0], field.mark, slots as u32);
        tally.bump(slots + 1, hit.unwrap_or(0) as usize);
    });
    let hist = tally.0;

    Ok((0..=max_budget)
        .map(|budget| {
            let cap = budget as u64 + 1;
            let mut successes = 0u64;
            let mut slot_sum = 0u64;
            let mut slot_sq = 0u64;
            for (s, &count) in hist.iter().enumerate().skip(1) {
                let m = (s as u64).min(cap);
                if (s as u64) <= cap {
                    successes += count;
                }
                slot_sum += count * m;
                slot_sq += count * m * m;
            }
            // Trials that never succeeded within the sweep cap burn the
            // full budget of this sweep point.
            let misses = config.trials - hist.iter().skip(1).sum::<u64>();
            slot_sum += misses * cap;
            slot_sq += misses * cap * cap;
            estimate_from_counts(successes, slot_sum, slot_sq, params, config)
        })
        .collect())
}

/// Sweeps every split `(D1, D - D1)` of a two-hop budget in one pass using
/// the joint first-success histogram of the two hops.
pub fn sweep_two_hop_splits(
    d1: f64,
    d2: f64,
    total_budget: u32,
    params: &NetworkParams,
    config: &SimConfig,
) -> Result<Vec<SimEstimate>, SimError> {
    config.validate()?;
    let plan = HopPlan::new(vec![d1, d2], vec![total_budget, total_budget])
        .map_err(|e| SimError::InvalidConfig { reason: e.to_string() })?;
    let field = Field::new(&plan, params, config)?;
    let slots = total_budget as usize + 1;
    let side = slots + 1; // index 0 = never
    let convention = config.delay_convention;

    let tally: HistTally = run_trials(config.trials, config.seed, |rng, scratch, tally: &mut HistTally| {
        field.sample_points(rng, &mut scratch.points);
        field.hop_weights(0, &scratch.points, &mut scratch.weights);
        let s1 = first_success_slot(rng, &scratch.weights, field.threshold[0], field.mark, slots as u32)
            .unwrap_or(0) as usize;
        field.hop_weights(1, &scratch.points, &mut scratch.weights);
        let s2 = first_success_slot(rng, &scratch.weights, field.threshold[1], field.mark, slots as u32)
            .unwrap_or(0) as usize;
        tally.bump(side * side, s1 * side + s2);
    });
    let hist = tally.0;

    Ok((0..=total_budget)
        .map(|budget1| {
            let cap1 = budget1 as u64 + 1;
            let cap2 = (total_budget - budget1) as u64 + 1;
            let mut successes = 0u64;
            let mut slot_sum = 0u64;
            let mut slot_sq = 0u64;
            for s1 in 0..side as u64 {
                for s2 in 0..side as u64 {
                    let count = hist[(s1 * side as u64 + s2) as usize];
                    if count == 0 {
                        continue;
                    }
                    let hop1_ok = s1 != 0 && s1 <= cap1;
                    let hop2_ok = s2 != 0 && s2 <= cap2;
                    let m1 = if s1 == 0 { cap1 } else { s1.min(cap1) };
                    let m2 = if s2 == 0 { cap2 } else { s2.min(cap2) };
                    let m = match convention {
                        DelayConvention::AnalyticCompatible => m1 + m2,
                        DelayConvention::StopOnFailure => m1 + if hop1_ok { m2 } else { 0 },
                    };
                    if hop1_ok && hop2_ok {
                        successes += count;
                    }
                    slot_sum += count * m;
                    slot_sq += count * m * m;
                }
            }
            estimate_from_counts(successes, slot_sum, slot_sq, params, config)
        })
        .collect())
}

/// Empirical temporal-correlation diagnostic of the per-slot SIR outage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationDiagnostic {
    /// Empirical `P(fail slot 1 and fail slot 2)`.
    pub joint_fail: f64,
    pub fail_first: f64,
    pub fail_second: f64,
    /// `joint - fail_first * fail_second`.
    pub covariance: f64,
    /// Delta-method standard error of the covariance estimate.
    pub std_error: f64,
    pub trials: u64,
}

#[derive(Default, Clone)]
struct TableTally {
    n11: u64,
    n10: u64,
    n01: u64,
}

impl Tally for TableTally {
    fn merge(self, other: Self) -> Self {
        Self {
            n11: self.n11 + other.n11,
            n10: self.n10 + other.n10,
            n01: self.n01 + other.n01,
        }
    }
}

/// Measures the SIR outage in two consecutive slots of a link at distance
/// `d` (the typical transmitter is observed in both slots; interferer marks
/// and all fading are fresh each slot). With `resample_locations` the field
/// is redrawn between the slots, which removes the correlation; with
/// persistent locations the failures are positively correlated.
pub fn correlation_diagnostic(
    d: f64,
    params: &NetworkParams,
    config: &SimConfig,
    resample_locations: bool,
) -> Result<CorrelationDiagnostic, SimError> {
    config.validate()?;
    let plan = HopPlan::single_hop(d, 0)
        .map_err(|e| SimError::InvalidConfig { reason: e.to_string() })?;
    let field = Field::new(&plan, params, config)?;

    let slot_fails = |rng: &mut ChaCha8Rng, weights: &[f64]| -> bool {
        let h0: f64 = Exp1.sample(rng);
        let mut interference = 0.0f64;
        for &w in weights {
            if (rng.next_u32() as u64) < field.mark {
                let fade: f64 = Exp1.sample(rng);
                interference += w * fade;
            }
        }
        h0 < field.threshold[0] * interference
    };

    let tally: TableTally = run_trials(config.trials, config.seed, |rng, scratch, tally: &mut TableTally| {
        field.sample_points(rng, &mut scratch.points);
        field.hop_weights(0, &scratch.points, &mut scratch.weights);
        let first = slot_fails(rng, &scratch.weights);
        if resample_locations {
            field.sample_points(rng, &mut scratch.points);
            field.hop_weights(0, &scratch.points, &mut scratch.weights);
        }
        let second = slot_fails(rng, &scratch.weights);
        match (first, second) {
            (true, true) => tally.n11 += 1,
            (true, false) => tally.n10 += 1,
            (false, true) => tally.n01 += 1,
            (false, false) => {}
        }
    });

    let n = config.trials as f64;
    let p11 = tally.n11 as f64 / n;
    let p10 = tally.n10 as f64 / n;
    let p01 = tally.n01 as f64 / n;
    let p00 = 1.0 - p11 - p10 - p01;
    let p1 = p11 + p10;
    let p2 = p11 + p01;

    // Multinomial delta method on C = p11 - (p11 + p10)(p11 + p01).
    let g11 = 1.0 - p1 - p2;
    let g10 = -p2;
    let g01 = -p1;
    let mean_g = p11 * g11 + p10 * g10 + p01 * g01;
    let second_moment = p11 * g11 * g11 + p10 * g10 * g10 + p01 * g01 * g01;
    let variance = (second_moment - mean_g * mean_g).max(0.0) / n;
    let _ = p00;

    Ok(CorrelationDiagnostic {
        joint_fail: p11,
        fail_first: p1,
        fail_second: p2,
        covariance: p11 - p1 * p2,
        std_error: variance.sqrt(),
        trials: config.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> NetworkParams {
        NetworkParams::new(0.1, 0.5, 3.0, 3.0).unwrap()
    }

    fn fast_config(trials: u64, radius: f64) -> SimConfig {
        SimConfig {
            trials,
            seed: 7,
            region_radius: Some(radius),
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let c = SimConfig { trials: 0, ..SimConfig::default() };
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig { .. })));
        let c = SimConfig { confidence: 1.0, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { region_radius: Some(-1.0), ..SimConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn network_sampling_is_deterministic_per_trial() {
        let p = params();
        let c = fast_config(1, 20.0);
        let a = sample_network(&p, &c, 1.0, 3).unwrap();
        let b = sample_network(&p, &c, 1.0, 3).unwrap();
        assert_eq!(a, b);
        let other = sample_network(&p, &c, 1.0, 4).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn network_sampling_mean_count() {
        let p = params();
        let c = fast_config(1, 20.0);
        let disc_radius = 20.0 + 0.5;
        let mean = p.lambda() * std::f64::consts::PI * disc_radius * disc_radius;
        let trials = 10_000u64;
        let mut total = 0u64;
        for t in 0..trials {
            total += sample_network(&p, &c, 1.0, t).unwrap().len() as u64;
        }
        let expected = mean * trials as f64;
        let sigma = expected.sqrt();
        assert!(
            ((total as f64) - expected).abs() < 3.0 * sigma,
            "total {total} vs expected {expected} (sigma {sigma})"
        );
    }

    #[test]
    fn vanishing_density_gives_empty_fields() {
        let p = NetworkParams::new(1e-12, 0.5, 3.0, 3.0).unwrap();
        let c = fast_config(1, 20.0);
        for t in 0..50 {
            assert!(sample_network(&p, &c, 1.0, t).unwrap().is_empty());
        }
    }

    #[test]
    fn interference_free_packet_sails_through() {
        let p = NetworkParams::new(1e-12, 1.0, 3.0, 3.0).unwrap();
        let plan = HopPlan::new(vec![0.3, 0.3, 0.4], vec![2, 0, 1]).unwrap();
        let c = fast_config(1, 10.0);
        for t in 0..20 {
            let outcome = simulate_packet(&plan, &p, &c, t).unwrap();
            assert!(outcome.success);
            assert_eq!(outcome.per_hop_slots, vec![1, 1, 1]);
            assert_eq!(outcome.total_slots, 3);
        }
    }

    #[test]
    fn co_located_interferer_forces_outage() {
        // An interferer at the receiver has infinite relative power: any
        // slot in which it is active fails; with p = 1 that is every slot.
        let mut rng = trial_rng(1, 1);
        let weights = vec![f64::INFINITY];
        assert_eq!(first_success_slot(&mut rng, &weights, 3.0, mark_threshold(1.0), 50), None);

        // Without interferers, an always-on transmitter succeeds in slot 1.
        let none: Vec<f64> = vec![];
        let mut rng = trial_rng(1, 2);
        assert_eq!(first_success_slot(&mut rng, &none, 3.0, mark_threshold(1.0), 5), Some(1));
    }

    #[test]
    fn budget_law_holds_per_trial() {
        let p = NetworkParams::new(0.3, 0.5, 3.0, 3.0).unwrap();
        let plan = HopPlan::new(vec![0.5, 1.0], vec![2, 3]).unwrap();
        let c = fast_config(1, 15.0);
        for t in 0..200 {
            let o = simulate_packet(&plan, &p, &c, t).unwrap();
            for (hop, &slots) in o.per_hop_slots.iter().enumerate() {
                assert!(slots <= plan.budgets()[hop] + 1);
                assert!(slots >= 1, "analytic-compatible charges every hop");
            }
            assert_eq!(o.total_slots, o.per_hop_slots.iter().sum::<u32>());
        }
    }

    #[test]
    fn stop_on_failure_skips_downstream_hops() {
        // Dense field, long hops: failures are common.
        let p = NetworkParams::new(0.5, 0.5, 3.0, 3.0).unwrap();
        let plan = HopPlan::new(vec![1.5, 1.0], vec![0, 2]).unwrap();
        let c = SimConfig {
            delay_convention: DelayConvention::StopOnFailure,
            ..fast_config(1, 15.0)
        };
        let mut saw_skip = false;
        for t in 0..100 {
            let o = simulate_packet(&plan, &p, &c, t).unwrap();
            if o.per_hop_slots[0] == 1 && !o.success && o.per_hop_slots[1] == 0 {
                saw_skip = true;
            }
            if o.per_hop_slots[1] == 0 {
                assert!(!o.success);
            }
        }
        assert!(saw_skip, "expected at least one first-hop failure in 100 dense trials");
    }

    #[test]
    fn estimates_are_worker_count_invariant() {
        let p = params();
        let plan = HopPlan::single_hop(1.0, 2).unwrap();
        let c = fast_config(400, 30.0);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_success(&plan, &p, &c).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate_success(&plan, &p, &c).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn sweep_matches_direct_estimates_bit_for_bit() {
        let p = params();
        let c = fast_config(300, 25.0);
        let sweep = sweep_single_hop(1.0, 3, &p, &c).unwrap();
        for budget in 0..=3u32 {
            let direct =
                estimate_success(&HopPlan::single_hop(1.0, budget).unwrap(), &p, &c).unwrap();
            assert_eq!(sweep[budget as usize], direct, "budget {budget}");
        }
    }

    #[test]
    fn degenerate_single_trial() {
        let p = params();
        let plan = HopPlan::single_hop(1.0, 1).unwrap();
        let c = fast_config(1, 20.0);
        let e = estimate_success(&plan, &p, &c).unwrap();
        assert!(e.p_success.estimate == 0.0 || e.p_success.estimate == 1.0);
        assert!(e.p_success.high - e.p_success.low > 0.5);
    }

    #[test]
    fn zero_budget_capacity_is_density_rate_times_success() {
        let p = NetworkParams::new(1e-10, 1.0, 3.0, 3.0).unwrap();
        let plan = HopPlan::single_hop(1.0, 0).unwrap();
        let c = fast_config(500, 10.0);
        let tc = estimate_tc(&plan, &p, &c).unwrap();
        assert_eq!(tc.provenance, Provenance::Simulated);
        assert!((tc.capacity - p.density_rate()).abs() < 1e-9);
        assert!((tc.delay - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_insensitivity() {
        let p = params();
        let plan = HopPlan::single_hop(1.0, 4).unwrap();
        let near = estimate_success(&plan, &p, &fast_config(20_000, 150.0)).unwrap();
        let far = estimate_success(&plan, &p, &fast_config(20_000, 300.0)).unwrap();
        let halfwidth = (near.p_success.high - near.p_success.low) / 2.0;
        assert!(
            (near.p_success.estimate - far.p_success.estimate).abs() < halfwidth,
            "doubling the region moved the estimate by more than the CI half-width"
        );
    }

    #[test]
    fn correlation_sign_matches_location_persistence() {
        let p = NetworkParams::new(0.5, 0.5, 3.0, 3.0).unwrap();
        let c = fast_config(50_000, 60.0);
        let fixed = correlation_diagnostic(1.0, &p, &c, false).unwrap();
        assert!(
            fixed.covariance > 2.0 * fixed.std_error,
            "persistent locations must correlate failures: cov {} se {}",
            fixed.covariance,
            fixed.std_error
        );
        let resampled = correlation_diagnostic(1.0, &p, &c, true).unwrap();
        assert!(
            resampled.covariance.abs() < 3.0 * resampled.std_error,
            "independent fields must decorrelate: cov {} se {}",
            resampled.covariance,
            resampled.std_error
        );
    }

    #[test]
    fn auto_radius_scales_with_density_and_distance() {
        let p = params();
        let base = auto_region_radius(1.0, &p);
        let denser = auto_region_radius(1.0, &NetworkParams::new(0.2, 0.5, 3.0, 3.0).unwrap());
        assert!(denser > base);
        let longer = auto_region_radius(2.0, &p);
        assert!(longer > base);
        // At the reference point the bound works out to ~9.4 km.
        assert!((base - 9424.77796077).abs() < 1e-6);
    }
}

//! Improper radial integrals of the Poisson-field Laplace kernel.
//!
//! Every probability expression in this crate reduces to integrals of the
//! form `J(l, d) = 2 pi Int_0^inf r (1 - K_d(r)^l) dr`, where `K_d` is the
//! per-interferer Laplace factor of a Rayleigh link at distance `d`, or to
//! the two-kernel variant `J2`. The integrands decay like `r^(2 - alpha)`,
//! so the improper tail is truncated at a radius where the analytic residual
//! bound drops below the absolute tolerance, and the remaining finite range
//! is integrated adaptively with a 15-point Gauss–Kronrod rule after the
//! substitution `u = r^2` (which removes the Jacobian factor).

use crate::model::NetworkParams;
use crate::numerics::KahanSum;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Tolerances and the subdivision cap of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_subdivisions: 4096 }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: u32) -> Result<Self, QuadratureError> {
        if rel_tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || abs_tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(QuadratureError::InvalidSpec {
                reason: format!("tolerances must be positive, got rel={rel_tol}, abs={abs_tol}"),
            });
        }
        if max_subdivisions < 1 {
            return Err(QuadratureError::InvalidSpec {
                reason: "max_subdivisions must be at least 1".into(),
            });
        }
        Ok(Self { rel_tol, abs_tol, max_subdivisions })
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {reason}")]
    InvalidSpec { reason: String },
    #[error(
        "tolerance not met: error estimate {achieved:e} > {requested:e} \
         after {subdivisions} subdivisions"
    )]
    ToleranceNotMet { achieved: f64, requested: f64, subdivisions: u32 },
}

/// Per-interferer Laplace factor `K_d(r) = 1 - p + p r^a / (r^a + beta d^a)`.
///
/// Equals `1 - p` for an interferer at the receiver, increases monotonically
/// in `r`, and tends to 1 as the interferer recedes.
pub fn kernel_value(r: f64, d: f64, params: &NetworkParams) -> f64 {
    debug_assert!(r >= 0.0 && d > 0.0);
    let bda = params.beta() * d.powf(params.alpha());
    1.0 - params.p() * interference_fraction(r * r, bda, params.alpha())
}

/// `beta d^a / (r^a + beta d^a)` evaluated in `u = r^2`; goes to 1 at the
/// receiver and to 0 at infinity without overflow at either end.
#[inline]
fn interference_fraction(u: f64, beta_d_alpha: f64, alpha: f64) -> f64 {
    beta_d_alpha / (beta_d_alpha + u.powf(0.5 * alpha))
}

/// `J(l, d) = 2 pi Int_0^inf r (1 - K_d(r)^l) dr`.
///
/// `J(0, d) = 0` exactly; the integral is finite for `alpha > 2` and equals
/// `p d^2 beta^(2/alpha) c1` at `l = 1`. Truncation: for `r >= R` the
/// integrand is below `l p beta d^a r^(1-a)`, so the discarded tail is at
/// most `2 pi l p beta d^a R^(2-a) / (a - 2)`; `R` is chosen to push that
/// bound below `abs_tol`.
pub fn radial_integral_single(
    ell: u32,
    d: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    if ell == 0 {
        return Ok(0.0);
    }
    let alpha = params.alpha();
    let p = params.p();
    let bda = params.beta() * d.powf(alpha);
    let tail_mass = ell as f64 * p * bda;
    let u_half = d * d * params.beta().powf(2.0 / alpha);
    let integrand = move |u: f64| {
        let frac = interference_fraction(u, bda, alpha);
        -(ell as f64 * (-p * frac).ln_1p()).exp_m1()
    };
    integrate(&integrand, u_half, tail_mass, alpha, spec).map(|v| PI * v)
}

/// Two-kernel integral
/// `J2(r, s; d1, d2) = 2 pi Int_0^inf rho (1 - K_d1(rho)^r K_d2(rho)^s) drho`
/// with both kernels sharing the same radial coordinate.
///
/// Degenerates to `J(r, d1)` when `s = 0` (and symmetrically), and is
/// symmetric under swapping `(r, d1)` with `(s, d2)`.
pub fn radial_integral_pair(
    r_exp: u32,
    s_exp: u32,
    d1: f64,
    d2: f64,
    params: &NetworkParams,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    if r_exp == 0 && s_exp == 0 {
        return Ok(0.0);
    }
    let alpha = params.alpha();
    let p = params.p();
    let bda1 = params.beta() * d1.powf(alpha);
    let bda2 = params.beta() * d2.powf(alpha);
    let tail_mass = p * (r_exp as f64 * bda1 + s_exp as f64 * bda2);
    let d_split = d1.max(d2);
    let u_half = d_split * d_split * params.beta().powf(2.0 / alpha);
    let integrand = move |u: f64| {
        let mut ln_k = 0.0;
        if r_exp > 0 {
            ln_k += r_exp as f64 * (-p * interference_fraction(u, bda1, alpha)).ln_1p();
        }
        if s_exp > 0 {
            ln_k += s_exp as f64 * (-p * interference_fraction(u, bda2, alpha)).ln_1p();
        }
        -ln_k.exp_m1()
    };
    integrate(&integrand, u_half, tail_mass, alpha, spec).map(|v| PI * v)
}

/// Adaptive integration of `Int_0^{u_max} f(u) du` where the integrand decays
/// like `tail_mass * u^(-alpha/2)`. The truncation point satisfies
/// `pi * tail_mass * u_max^(1 - alpha/2) / (alpha/2 - 1) <= abs_tol`, i.e.
/// the analytic residual bound is below the absolute tolerance.
fn integrate(
    f: &impl Fn(f64) -> f64,
    u_half: f64,
    tail_mass: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    let decay = 0.5 * alpha - 1.0;
    let u_max = (PI * tail_mass / (decay * spec.abs_tol))
        .powf(1.0 / decay)
        .max(16.0 * u_half);
    if !u_max.is_finite() {
        // The requested absolute tolerance pushes the truncation radius out
        // of floating-point range; no subdivision count can reach it.
        return Err(QuadratureError::ToleranceNotMet {
            achieved: f64::INFINITY,
            requested: spec.abs_tol,
            subdivisions: 0,
        });
    }

    // Interior segment up to the half-power scale, then a geometric ladder
    // over the polynomially decaying tail.
    let mut heap: BinaryHeap<Segment> = BinaryHeap::new();
    heap.push(Segment::evaluate(f, 0.0, u_half));
    let mut lo = u_half;
    while lo < u_max {
        let hi = (lo * 8.0).min(u_max);
        heap.push(Segment::evaluate(f, lo, hi));
        lo = hi;
    }

    let mut subdivisions = 0u32;
    loop {
        let (mut total, mut err) = (KahanSum::default(), 0.0);
        for seg in heap.iter() {
            total.add(seg.value);
            err += seg.error;
        }
        let total = total.value();
        if err <= spec.tolerance(total) {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(QuadratureError::ToleranceNotMet {
                achieved: err,
                requested: spec.tolerance(total),
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        heap.push(Segment::evaluate(f, worst.lo, mid));
        heap.push(Segment::evaluate(f, mid, worst.hi));
        subdivisions += 1;
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl Segment {
    fn evaluate(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Self {
        let (value, error) = gauss_kronrod_15(f, lo, hi);
        Self { lo, hi, value, error }
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss–Kronrod 15(7) application; returns the Kronrod estimate and the
/// QUADPACK-style error estimate.
fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let f_center = f(center);
    let mut result_gauss = WG[3] * f_center;
    let mut result_kronrod = WGK[7] * f_center;
    let mut result_abs = WGK[7] * f_center.abs();
    let mut samples = [0.0f64; 15];
    samples[7] = f_center;

    for i in 0..7 {
        let dx = half * XGK[i];
        let f_lo = f(center - dx);
        let f_hi = f(center + dx);
        samples[i] = f_lo;
        samples[14 - i] = f_hi;
        result_kronrod += WGK[i] * (f_lo + f_hi);
        result_abs += WGK[i] * (f_lo.abs() + f_hi.abs());
        if i % 2 == 1 {
            result_gauss += WG[i / 2] * (f_lo + f_hi);
        }
    }

    let mean = 0.5 * result_kronrod;
    let mut result_asc = WGK[7] * (f_center - mean).abs();
    for i in 0..7 {
        result_asc += WGK[i] * ((samples[i] - mean).abs() + (samples[14 - i] - mean).abs());
    }

    let value = result_kronrod * half;
    let result_abs = result_abs * half.abs();
    let result_asc = result_asc * half.abs();
    let mut error = ((result_kronrod - result_gauss) * half).abs();
    if result_asc != 0.0 && error != 0.0 {
        error = result_asc * 1.0f64.min((200.0 * error / result_asc).powf(1.5));
    }
    let round_off = 50.0 * f64::EPSILON * result_abs;
    (value, error.max(round_off))
}

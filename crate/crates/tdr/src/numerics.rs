//! Small numeric helpers: compensated summation, cancellation tracking,
//! log-space binomials, and the normal quantiles behind Wilson intervals.

/// Kahan–Babuška compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum that also tracks how many decimal digits were lost to
/// cancellation (`log10` of the ratio between the magnitude sum and the
/// result).
#[derive(Debug, Clone, Copy, Default)]
pub struct CancellationSum {
    signed: KahanSum,
    magnitude: f64,
}

impl CancellationSum {
    pub fn add(&mut self, term: f64) {
        self.signed.add(term);
        self.magnitude += term.abs();
    }

    pub fn value(&self) -> f64 {
        self.signed.value()
    }

    pub fn lost_digits(&self) -> f64 {
        let v = self.value().abs();
        if self.magnitude == 0.0 {
            return 0.0;
        }
        // A zero result from nonzero terms means total cancellation.
        if v == 0.0 {
            return f64::INFINITY;
        }
        (self.magnitude / v).log10().max(0.0)
    }
}

/// Alternating sums are flagged once more than this many decimal digits
/// cancel; the value is still returned.
pub const UNSTABLE_LOST_DIGITS: f64 = 10.0;

/// A value annotated with the worst cancellation observed while computing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    /// Decimal digits lost to cancellation in the dominant alternating sum.
    pub lost_digits: f64,
}

impl<T> Flagged<T> {
    pub fn new(value: T, lost_digits: f64) -> Self {
        Self { value, lost_digits }
    }

    pub fn exact(value: T) -> Self {
        Self { value, lost_digits: 0.0 }
    }

    /// True when the cancellation exceeded [`UNSTABLE_LOST_DIGITS`].
    pub fn unstable(&self) -> bool {
        self.lost_digits > UNSTABLE_LOST_DIGITS
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Flagged<U> {
        Flagged { value: f(self.value), lost_digits: self.lost_digits }
    }
}

/// `ln C(n, k)` by summing logs of the multiplicative form; exact enough for
/// every budget this crate meets (relative error ~1e-15 per factor).
pub fn ln_binomial(n: u32, k: u32) -> f64 {
    assert!(k <= n, "binomial with k > n");
    let k = k.min(n - k);
    let mut acc = 0.0;
    for i in 1..=k {
        acc += ((n - k + i) as f64 / i as f64).ln();
    }
    acc
}

/// Binomial pmf `C(n, k) p^k (1 - p)^(n - k)` with exact handling of the
/// `p = 0` and `p = 1` edges (where the log form would produce `0 * inf`).
pub fn binom_pmf(n: u32, k: u32, p: f64) -> f64 {
    debug_assert!(k <= n);
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9,
/// refined once with Halley's method to near machine precision).
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must lie in (0, 1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (-p).ln_1p()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    };

    // Two Halley refinements against the CDF expressed via erfc bring the
    // estimate to machine precision.
    let mut x = x;
    for _ in 0..2 {
        let e = 0.5 * erfc_scalar(-x / std::f64::consts::SQRT_2) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
        x -= u / (1.0 + x * u / 2.0);
    }
    x
}

/// `erfc` via W. J. Cody's rational minimax approximations (SPECFUN), good to
/// ~1e-16 relative over the ranges exercised here.
#[allow(clippy::excessive_precision)]
fn erfc_scalar(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    const SQRPI: f64 = 5.6418958354775628695e-1;

    let y = x.abs();
    let result = if y <= 0.46875 {
        // erfc = 1 - erf with the erf rational fit.
        let z = if y > 1.1e-16 { y * y } else { 0.0 };
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        return 1.0 - x * (num + A[3]) / (den + B[3]);
    } else if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let r = (num + C[7]) / (den + D[7]);
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    } else {
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let mut r = z * (num + P[4]) / (den + Q[4]);
        r = (SQRPI - r) / y;
        let ysq = (y * 16.0).trunc() / 16.0;
        let del = (y - ysq) * (y + ysq);
        (-ysq * ysq).exp() * (-del).exp() * r
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z = inverse_normal_cdf(0.5 + confidence / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

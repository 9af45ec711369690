//! Chernoff information of two discrete distributions, evaluated without
//! cancellation for nearly identical inputs.
//!
//! For `Σ a = Σ b = 1`,
//!
//! ```text
//! 1 − Σ a^s b^{1−s} = Σ k(a, b, s),   k = s·a + (1−s)·b − a^s b^{1−s} ≥ 0
//! ```
//!
//! and with `L = ln(a/b)` the kernel is `k = b·(s·expm1(L) − expm1(s·L))`,
//! expanded as a power series when `|L|` is small. Zero entries follow the
//! support-projector convention `0^t = 0` for every `t ≥ 0`.

/// Bracket width at which the golden-section search stops.
pub const GOLDEN_TOL: f64 = 1e-8;
const SERIES_CUTOFF: f64 = 1e-2;

/// `s·expm1(L) − expm1(s·L)`.
pub fn phi(s: f64, l: f64) -> f64 {
    if l.abs() < SERIES_CUTOFF {
        // Σ_{n≥2} (s − sⁿ) Lⁿ / n!
        let mut acc = 0.0;
        let mut l_pow = l;
        let mut s_pow = s;
        let mut fact = 1.0;
        for n in 2..=12 {
            l_pow *= l;
            s_pow *= s;
            fact *= n as f64;
            acc += (s - s_pow) * l_pow / fact;
        }
        acc
    } else {
        s * l.exp_m1() - (s * l).exp_m1()
    }
}

/// `k(a, b, s)` given `a`, `b` and `ln(a/b)`.
pub fn kernel_with_log(a: f64, b: f64, log_ratio: f64, s: f64) -> f64 {
    if a <= 0.0 && b <= 0.0 {
        return 0.0;
    }
    if a <= 0.0 {
        return (1.0 - s) * b;
    }
    if b <= 0.0 {
        return s * a;
    }
    // expand around the larger of the two so the exponentials stay bounded
    let k = if log_ratio <= 0.0 { b * phi(s, log_ratio) } else { a * phi(1.0 - s, -log_ratio) };
    k.max(0.0)
}

/// `k(a, b, s)` from `a`, `b` and their difference `a − b`, computed
/// separately when it is available more accurately than by subtraction.
pub fn kernel_with_diff(a: f64, b: f64, diff: f64, s: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return kernel_with_log(a, b, 0.0, s);
    }
    let log_ratio = if diff.abs() > 0.5 * a.max(b) {
        (a / b).ln()
    } else if a <= b {
        (diff / b).ln_1p()
    } else {
        -(-diff / a).ln_1p()
    };
    kernel_with_log(a, b, log_ratio, s)
}

pub fn kernel(a: f64, b: f64, s: f64) -> f64 {
    kernel_with_diff(a, b, a - b, s)
}

/// Maximizes a concave function on `[0, 1]`; endpoints are compared
/// separately since the zero-support convention can make them jump.
pub fn maximize_unit_interval(f: impl Fn(f64) -> f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for s in [0.0, 1.0] {
        let v = f(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    best
}

/// Chernoff exponent `ξ = −ln(1 − K)` and optimal `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffResult {
    pub xi: f64,
    pub s_star: f64,
    /// `max_s K(s) = 1 − min_s Σ a^s b^{1−s}`.
    pub gap: f64,
}

impl ChernoffResult {
    pub fn from_objective(gap_fn: impl Fn(f64) -> f64) -> Self {
        let (s_star, gap) = maximize_unit_interval(gap_fn, GOLDEN_TOL);
        let gap = gap.clamp(0.0, 1.0);
        Self { xi: -(-gap).ln_1p(), s_star, gap }
    }
}

/// `−ln min_s Σ_j p_j^s q_j^{1−s}` with `p − q` supplied explicitly.
pub fn chernoff_discrete_with_diff(p: &[f64], q: &[f64], diff: &[f64]) -> ChernoffResult {
    assert_eq!(p.len(), q.len());
    assert_eq!(p.len(), diff.len());
    ChernoffResult::from_objective(|s| {
        p.iter().zip(q).zip(diff).map(|((&a, &b), &d)| kernel_with_diff(a, b, d, s)).sum()
    })
}

pub fn chernoff_discrete(p: &[f64], q: &[f64]) -> ChernoffResult {
    let diff: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
    chernoff_discrete_with_diff(p, q, &diff)
}

//! Exponential integral, its tabulated inverse, bracketed monotone inversion
//! and adaptive Gauss-Kronrod quadrature.
//!
//! The gamma-type Levy models invert their tail integral `g(x) = c E1(rho x)`
//! on every shot-noise term, so `E1^{-1}` is served from a precomputed table
//! ([`e1_inverse`]) built once per process and shared read-only afterwards.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{KleError, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Default lower end of the `E1^{-1}` argument domain (`E1(45)`).
pub const E1_INVERSE_DOMAIN_LO: f64 = 6.226e-22;
/// Default upper end of the `E1^{-1}` argument domain.
pub const E1_INVERSE_DOMAIN_HI: f64 = 45.47;
/// Default number of table breakpoints.
pub const E1_INVERSE_POINTS: usize = 200_000;
/// Largest admissible gap between adjacent tabulated `E1` values.
pub const E1_INVERSE_MAX_GAP: f64 = 0.00231;

// Past this point e^{-x}/x underflows and E1 is no longer resolvable.
const E1_MAX_ARGUMENT: f64 = 700.0;
const E1_MIN_ARGUMENT: f64 = 1e-300;

/// Exponential integral `E1(x) = \int_x^\infty e^{-s}/s ds` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(KleError::Domain(format!("E1 requires x > 0, got {x}")));
    }
    Ok(e1_unchecked(x))
}

/// E1 without the domain check; callers guarantee `x > 0`.
pub(crate) fn e1_unchecked(x: f64) -> f64 {
    if x <= 1.0 {
        e1_series(x)
    } else {
        e1_continued_fraction(x)
    }
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n n!)
    let mut sum = 0.0;
    let mut power = 1.0;
    for n in 1..200 {
        let nf = n as f64;
        power *= -x / nf;
        let term = power / nf;
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

fn e1_continued_fraction(x: f64) -> f64 {
    // Modified Lentz evaluation of the continued fraction for e^x E1(x).
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h * (-x).exp()
}

fn e1_derivative(x: f64) -> f64 {
    -(-x).exp() / x
}

/// Inverse of a strictly decreasing function by bracketed bisection.
///
/// Returns `x` in `bracket` with `|fwd(x) - y| <= rtol * |y|`, or the point
/// where the bracket has collapsed to machine resolution.
pub fn invert_monotone<F>(fwd: F, y: f64, bracket: (f64, f64), rtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(KleError::Parameter(format!(
            "bracket must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let f_lo = fwd(lo);
    let f_hi = fwd(hi);
    if !(y <= f_lo && y >= f_hi) {
        return Err(KleError::Bracket {
            target: y,
            range_lo: f_hi,
            range_hi: f_lo,
        });
    }
    if f_lo == y {
        return Ok(lo);
    }
    if f_hi == y {
        return Ok(hi);
    }
    let tol = rtol * y.abs();
    for _ in 0..2000 {
        // geometric midpoint across wide positive brackets, arithmetic otherwise
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = fwd(mid);
        if (f_mid - y).abs() <= tol {
            return Ok(mid);
        }
        if f_mid > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lookup table for the inverse of a strictly decreasing function.
///
/// Breakpoints are log-spaced in `x`, so the tabulated values are unevenly
/// spaced. Lookups interpolate `ln x` as a polynomial in `ln y` over
/// `interpolation_order + 1` neighbouring points, then take one Newton step
/// on the forward function.
#[derive(Debug, Clone)]
pub struct MonotoneInverseTable {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    log_breakpoints: Vec<f64>,
    log_values: Vec<f64>,
    interpolation_order: usize,
    domain: (f64, f64),
    forward: fn(f64) -> f64,
    derivative: fn(f64) -> f64,
    fallback_hi: f64,
}

impl MonotoneInverseTable {
    /// Builds a table from precomputed `(x, fwd(x))` pairs.
    ///
    /// The inverse domain is `[values.last(), values.first()]`.
    pub fn from_samples(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        interpolation_order: usize,
        forward: fn(f64) -> f64,
        derivative: fn(f64) -> f64,
        fallback_hi: f64,
    ) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(KleError::Dimension {
                expected: breakpoints.len(),
                got: values.len(),
            });
        }
        if breakpoints.len() < 2 {
            return Err(KleError::Parameter("table needs at least 2 points".into()));
        }
        if interpolation_order == 0 || interpolation_order >= breakpoints.len() {
            return Err(KleError::Parameter(format!(
                "interpolation order {interpolation_order} not supported for {} points",
                breakpoints.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] > 0.0 && w[1] > w[0]) {
                return Err(KleError::Parameter(
                    "breakpoints must be positive and strictly increasing".into(),
                ));
            }
        }
        for w in values.windows(2) {
            if !(w[1] < w[0] && w[1] > 0.0) {
                return Err(KleError::Parameter(
                    "values must be positive and strictly decreasing".into(),
                ));
            }
        }
        let log_breakpoints = breakpoints.iter().map(|x| x.ln()).collect();
        let log_values = values.iter().map(|y| y.ln()).collect();
        let domain = (values[values.len() - 1], values[0]);
        Ok(Self {
            breakpoints,
            values,
            log_breakpoints,
            log_values,
            interpolation_order,
            domain,
            forward,
            derivative,
            fallback_hi,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation_order(&self) -> usize {
        self.interpolation_order
    }

    /// Closed interval of admissible arguments `[lo, hi]`.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Largest gap between adjacent tabulated values.
    pub fn max_value_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    /// Evaluates the inverse at `y`.
    ///
    /// Above the domain the result is `0`: the jump lies below the
    /// truncation threshold. Below the domain the inverse falls back to
    /// bisection on the forward function.
    pub fn invert(&self, y: f64) -> f64 {
        let (lo, hi) = self.domain;
        if y > hi || y.is_nan() {
            return 0.0;
        }
        if y < lo {
            let x_edge = self.breakpoints[self.breakpoints.len() - 1];
            if y <= (self.forward)(self.fallback_hi) {
                return self.fallback_hi;
            }
            return invert_monotone(self.forward, y, (x_edge, self.fallback_hi), 1e-14)
                .unwrap_or(x_edge);
        }
        let x0 = self.interpolate(y);
        let slope = (self.derivative)(x0);
        if slope == 0.0 || !slope.is_finite() {
            return x0;
        }
        let x1 = x0 - ((self.forward)(x0) - y) / slope;
        if x1.is_finite() && x1 > 0.0 {
            x1
        } else {
            x0
        }
    }

    fn interpolate(&self, y: f64) -> f64 {
        let n = self.values.len();
        let m = self.interpolation_order + 1;
        // values are decreasing: first index whose value is <= y
        let idx = self.values.partition_point(|&v| v > y);
        if idx < n && self.values[idx] == y {
            return self.breakpoints[idx];
        }
        let start = idx.saturating_sub(m / 2).min(n - m);
        let ly = y.ln();
        let xs = &self.log_values[start..start + m];
        let fs = &self.log_breakpoints[start..start + m];
        let mut acc = 0.0;
        for i in 0..m {
            let mut basis = 1.0;
            for j in 0..m {
                if i != j {
                    basis *= (ly - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += basis * fs[i];
        }
        acc.exp()
    }
}

/// Builds the `E1^{-1}` lookup table on `[domain_lo, domain_hi]` with
/// `n_points` log-spaced breakpoints and cubic interpolation.
pub fn build_e1_inverse(
    domain_lo: f64,
    domain_hi: f64,
    n_points: usize,
) -> Result<MonotoneInverseTable> {
    if !(domain_lo > 0.0 && domain_lo < domain_hi) {
        return Err(KleError::Parameter(format!(
            "need 0 < domain_lo < domain_hi, got [{domain_lo}, {domain_hi}]"
        )));
    }
    if n_points < 4 {
        return Err(KleError::Parameter(format!(
            "need at least 4 points for cubic interpolation, got {n_points}"
        )));
    }
    let resolvable = (e1_unchecked(E1_MAX_ARGUMENT), e1_unchecked(E1_MIN_ARGUMENT));
    if domain_lo < resolvable.0 || domain_hi > resolvable.1 {
        return Err(KleError::Domain(format!(
            "E1 is not resolvable on [{domain_lo}, {domain_hi}]; supported range is [{}, {}]",
            resolvable.0, resolvable.1
        )));
    }
    let bracket = (E1_MIN_ARGUMENT, E1_MAX_ARGUMENT);
    let x_lo = invert_monotone(e1_unchecked, domain_hi, bracket, 1e-15)?;
    let x_hi = invert_monotone(e1_unchecked, domain_lo, bracket, 1e-15)?;
    let (ln_lo, ln_hi) = (x_lo.ln(), x_hi.ln());
    let step = (ln_hi - ln_lo) / (n_points - 1) as f64;
    let breakpoints: Vec<f64> = (0..n_points)
        .map(|i| match i {
            0 => x_lo,
            _ if i == n_points - 1 => x_hi,
            _ => (ln_lo + step * i as f64).exp(),
        })
        .collect();
    let values: Vec<f64> = breakpoints.iter().map(|&x| e1_unchecked(x)).collect();
    let mut table = MonotoneInverseTable::from_samples(
        breakpoints,
        values,
        3,
        e1_unchecked,
        e1_derivative,
        E1_MAX_ARGUMENT,
    )?;
    // the endpoint bisection may land an ulp inside the requested interval
    table.domain = (domain_lo, domain_hi);
    Ok(table)
}

/// Rebuilds an `E1^{-1}` table from stored `(x, E1(x))` rows.
pub fn e1_inverse_from_rows(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<MonotoneInverseTable> {
    MonotoneInverseTable::from_samples(
        breakpoints,
        values,
        3,
        e1_unchecked,
        e1_derivative,
        E1_MAX_ARGUMENT,
    )
}

/// Shared `E1^{-1}` table with the default domain and resolution.
pub fn e1_inverse() -> &'static MonotoneInverseTable {
    static TABLE: OnceLock<MonotoneInverseTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        build_e1_inverse(E1_INVERSE_DOMAIN_LO, E1_INVERSE_DOMAIN_HI, E1_INVERSE_POINTS)
            .expect("default E1 inverse table")
    })
}

/// Values that adaptive quadrature can integrate: reals and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn parts(self) -> (f64, f64);
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Clone, Copy)]
struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    abs_value: f64,
}

fn gauss_kronrod<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> Segment<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    let mut abs_value = fc.magnitude() * GK_WEIGHTS[7];
    for (j, (&node, &weight)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).take(7).enumerate() {
        let dx = half * node;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod = kronrod + (f1 + f2) * weight;
        abs_value += (f1.magnitude() + f2.magnitude()) * weight;
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * GAUSS_WEIGHTS[j / 2];
        }
    }
    let value = kronrod * half;
    let abs_value = abs_value * half.abs();
    let raw_error = (kronrod - gauss).magnitude() * half.abs();
    let error = raw_error.max(50.0 * f64::EPSILON * abs_value);
    Segment {
        a,
        b,
        value,
        error,
        abs_value,
    }
}

/// Adaptive Gauss-Kronrod (7/15) estimate of `\int_a^b f`.
///
/// Converges when the summed error estimate is below `rtol` times the larger
/// of `|I|` and `rtol`-scaled `\int |f|`, which keeps integrals that vanish
/// by cancellation reachable.
pub fn quad_generic<V, F>(f: F, a: f64, b: f64, rtol: f64) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if !(rtol > 0.0) {
        return Err(KleError::Parameter(format!("rtol must be positive, got {rtol}")));
    }
    if a == b {
        return Ok(V::zero());
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(KleError::Parameter(format!(
            "finite limits required, got [{a}, {b}]"
        )));
    }
    let mut segments = vec![gauss_kronrod(&f, a, b)];
    loop {
        let total = segments.iter().fold(V::zero(), |acc, s| acc + s.value);
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let abs_total: f64 = segments.iter().map(|s| s.abs_value).sum();
        let tol = (rtol * total.magnitude())
            .max(rtol * 1e-3 * abs_total)
            .max(100.0 * f64::EPSILON * abs_total);
        if !total.magnitude().is_finite() {
            let (re, im) = total.parts();
            return Err(KleError::Quadrature {
                estimate_re: re,
                estimate_im: im,
                achieved: error,
            });
        }
        if error <= tol {
            return Ok(total);
        }
        if segments.len() >= MAX_SEGMENTS {
            let (re, im) = total.parts();
            return Err(KleError::Quadrature {
                estimate_re: re,
                estimate_im: im,
                achieved: error,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, s)| {
                if s.error > best.1 {
                    (i, s.error)
                } else {
                    best
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // interval exhausted at machine precision
            let (re, im) = total.parts();
            return Err(KleError::Quadrature {
                estimate_re: re,
                estimate_im: im,
                achieved: error,
            });
        }
        segments.push(gauss_kronrod(&f, seg.a, mid));
        segments.push(gauss_kronrod(&f, mid, seg.b));
    }
}

/// Real-valued adaptive quadrature of `\int_a^b f`.
pub fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    quad_generic(f, a, b, rtol)
}

/// Complex-valued adaptive quadrature, integrated componentwise on a shared
/// subdivision.
pub fn quad_complex<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, rtol: f64) -> Result<Complex64> {
    quad_generic(f, a, b, rtol)
}

/// `\int_a^\infty f` through the substitution `x = a + s / (1 - s)`.
pub fn quad_to_infinity<V, F>(f: F, a: f64, rtol: f64) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    quad_generic(
        |s: f64| {
            let w = 1.0 - s;
            let x = a + s / w;
            let v = f(x);
            if v.magnitude() == 0.0 {
                V::zero()
            } else {
                v * (1.0 / (w * w))
            }
        },
        0.0,
        1.0,
        rtol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1_by_quadrature(x: f64) -> f64 {
        quad_to_infinity(|s: f64| (-s).exp() / s, x, 1e-14).unwrap()
    }

    #[test]
    fn e1_at_one_matches_quadrature() {
        let v = exp_integral_e1(1.0).unwrap();
        assert!((v - 0.219_383_934_395_520_26).abs() < 1e-15);
        let oracle = e1_by_quadrature(1.0);
        assert!((v - oracle).abs() / oracle < 1e-12);
    }

    #[test]
    fn e1_relative_error_against_quadrature() {
        for &x in &[1e-3, 0.05, 0.3, 0.9, 1.0, 1.1, 2.5, 7.0, 20.0, 45.0] {
            let v = exp_integral_e1(x).unwrap();
            let oracle = e1_by_quadrature(x);
            assert!(
                ((v - oracle) / oracle).abs() < 1e-12,
                "x={x} e1={v} quad={oracle}"
            );
        }
    }

    #[test]
    fn e1_small_argument_limit() {
        for &x in &[1e-8, 1e-12, 1e-16] {
            let v = exp_integral_e1(x).unwrap() + x.ln();
            assert!((v + EULER_GAMMA).abs() < 1e-7);
        }
    }

    #[test]
    fn e1_at_45_is_domain_lower_end() {
        let v = exp_integral_e1(45.0).unwrap();
        assert!((v - 6.225_690_809_462_384e-22).abs() / v < 1e-12);
        assert!((v - E1_INVERSE_DOMAIN_LO).abs() / v < 1e-3);
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(matches!(exp_integral_e1(0.0), Err(KleError::Domain(_))));
        assert!(matches!(exp_integral_e1(-1.0), Err(KleError::Domain(_))));
    }

    #[test]
    fn default_table_inverts_e1() {
        let table = e1_inverse();
        assert_eq!(table.len(), E1_INVERSE_POINTS);
        assert!(table.max_value_gap() <= E1_INVERSE_MAX_GAP);
        let x = table.invert(exp_integral_e1(1.0).unwrap());
        assert!((x - 1.0).abs() < 1e-9);
        let x = table.invert(0.219_383_934_395_520_26);
        assert!((x - 1.0).abs() < 1e-9);
        // mpmath bisection: E1(x) = 45.47 at x = 1.0044962730171234e-20
        let x = table.invert(45.47);
        assert!((x - 1.004_496_273_017_123_4e-20).abs() / x < 1e-9);
    }

    #[test]
    fn table_clamps_outside_domain() {
        let table = e1_inverse();
        assert_eq!(table.invert(46.0), 0.0);
        // below the domain falls back to bisection
        let y = exp_integral_e1(50.0).unwrap();
        assert!((table.invert(y) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn table_build_rejects_bad_domains() {
        assert!(build_e1_inverse(1.0, 0.5, 100).is_err());
        assert!(build_e1_inverse(1e-2, 1.0, 2).is_err());
        assert!(matches!(
            build_e1_inverse(1e-320, 1.0, 100),
            Err(KleError::Domain(_))
        ));
        assert!(matches!(
            build_e1_inverse(1e-3, 1e4, 100),
            Err(KleError::Domain(_))
        ));
    }

    #[test]
    fn coarse_table_still_polishes() {
        let table = build_e1_inverse(1e-5, 5.0, 500).unwrap();
        for &x in &[0.01, 0.2, 1.5, 6.0] {
            let y = exp_integral_e1(x).unwrap();
            assert!((table.invert(y) - x).abs() < 1e-8 * x.max(1.0));
        }
    }

    #[test]
    fn invert_monotone_examples() {
        let x = invert_monotone(|x: f64| (-x).exp(), 1.0, (0.0, 10.0), 1e-13).unwrap();
        assert!(x.abs() < 1e-9);
        let x = invert_monotone(|x: f64| (-x).exp(), 0.5, (0.0, 10.0), 1e-13).unwrap();
        assert!((x - std::f64::consts::LN_2).abs() < 1e-12);
        // mpmath bisection oracle for E1(x) = 2
        let x = invert_monotone(e1_unchecked, 2.0, (1e-6, 1.0), 1e-14).unwrap();
        assert!((x - 0.082_372_029_620_720_26).abs() < 1e-12);
        let oracle = e1_by_quadrature(x);
        assert!((oracle - 2.0).abs() < 1e-10);
    }

    #[test]
    fn invert_monotone_rejects_out_of_range() {
        let r = invert_monotone(|x: f64| (-x).exp(), 2.0, (0.0, 10.0), 1e-12);
        assert!(matches!(r, Err(KleError::Bracket { .. })));
    }

    #[test]
    fn quad_examples() {
        assert!((quad(|_| 1.0, 0.0, 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-14);
        assert!((quad(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap() - 2.0).abs() < 1e-12);
        let pi = std::f64::consts::PI;
        let u1 = |t: f64| (2.0f64).sqrt() * (0.5 * pi * t).cos() / (0.5 * pi);
        let v = quad(|t| u1(t) * u1(t), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 4.0 / (pi * pi)).abs() < 1e-12);
    }

    #[test]
    fn quad_complex_componentwise() {
        let v = quad_complex(|t| Complex64::new(0.0, t).exp(), 0.0, std::f64::consts::PI, 1e-12)
            .unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn quad_reports_non_convergence() {
        let r = quad(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12);
        assert!(matches!(r, Err(KleError::Quadrature { .. })));
    }

    #[test]
    fn quad_semi_infinite() {
        let v: f64 = quad_to_infinity(|x: f64| (-x).exp(), 0.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v: f64 = quad_to_infinity(|x: f64| 1.0 / (x * x * x), 1.0, 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn e1_strictly_decreasing(a in 1e-6f64..60.0, b in 1e-6f64..60.0) {
                prop_assume!(a != b);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(e1_unchecked(lo) > e1_unchecked(hi));
            }

            #[test]
            fn quad_exact_on_quintics(c in prop::array::uniform6(-3.0f64..3.0), a in -2.0f64..0.0, b in 0.1f64..2.0) {
                let p = |x: f64| c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
                let antiderivative = |x: f64| {
                    c.iter().enumerate().map(|(i, &ci)| ci * x.powi(i as i32 + 1) / (i as f64 + 1.0)).sum::<f64>()
                };
                let exact = antiderivative(b) - antiderivative(a);
                let v = quad(p, a, b, 1e-13).unwrap();
                prop_assert!((v - exact).abs() <= 1e-12 * exact.abs().max(1.0));
            }
        }
    }
}

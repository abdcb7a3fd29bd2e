//! Levy process models: generating triples, jump densities with their tail
//! integrals, characteristic exponents and mean-centering.
//!
//! Jump densities live on `(0, inf)`. A two-sided Levy measure is stored as
//! a positive part and the reflection `pi(-x)` of its negative part, which is
//! the decomposition the coefficient sampler consumes.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KleError, Result};
use crate::special_fn::{e1_inverse, e1_unchecked, invert_monotone, quad, quad_to_infinity};

/// Truncation rule for infinite-activity series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Gamma-type models stop once `Gamma_i / (T c)` exceeds this value.
    pub gamma_cutoff: f64,
    /// Generic models stop once the jump `g^{-1}(Gamma_i / T)` drops below this.
    pub jump_floor: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            gamma_cutoff: 45.47,
            jump_floor: 1e-19,
        }
    }
}

/// A Levy density on `(0, inf)` together with its tail integral
/// `g(x) = \int_x^\infty pi(s) ds` and the inverse `g^{-1}`.
pub trait JumpDensity: Send + Sync + fmt::Debug {
    fn density(&self, x: f64) -> f64;

    fn tail(&self, x: f64) -> f64;

    /// `g(0)`, infinite for infinite-activity densities.
    fn tail_at_zero(&self) -> f64;

    /// `g^{-1}(y)`, vanishing for `y >= g(0)` and past the truncation level.
    fn tail_inverse(&self, y: f64) -> f64;

    /// Tail level beyond which series terms are dropped.
    fn truncation_level(&self, rule: &Truncation) -> f64;

    /// `\int x pi(x) dx`, `None` when Condition B fails.
    fn mean(&self) -> Option<f64>;

    /// `\int x^2 pi(x) dx`.
    fn second_moment(&self) -> f64;

    /// `\int_{x0}^\infty x pi(x) dx`.
    fn upper_mean(&self, x0: f64, rtol: f64) -> Result<f64>;

    /// `-\int (e^{izx} - 1 - izx) pi(x) dx`, the exponent of the compensated
    /// jump part.
    fn compensated_exponent(&self, z: f64) -> Complex64;
}

/// Gamma subordinator density `c e^{-rho x} / x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDensity {
    pub c: f64,
    pub rho: f64,
}

impl JumpDensity for GammaDensity {
    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.c * (-self.rho * x).exp() / x
        }
    }

    fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            f64::INFINITY
        } else {
            self.c * e1_unchecked(self.rho * x)
        }
    }

    fn tail_at_zero(&self) -> f64 {
        f64::INFINITY
    }

    fn tail_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        e1_inverse().invert(y / self.c) / self.rho
    }

    fn truncation_level(&self, rule: &Truncation) -> f64 {
        self.c * rule.gamma_cutoff
    }

    fn mean(&self) -> Option<f64> {
        Some(self.c / self.rho)
    }

    fn second_moment(&self) -> f64 {
        self.c / (self.rho * self.rho)
    }

    fn upper_mean(&self, x0: f64, _rtol: f64) -> Result<f64> {
        Ok(self.c / self.rho * (-self.rho * x0.max(0.0)).exp())
    }

    fn compensated_exponent(&self, z: f64) -> Complex64 {
        let i = Complex64::i();
        let m = self.c / self.rho;
        self.c * (1.0 - i * z / self.rho).ln() + i * z * m
    }
}

/// Compound Poisson density `rate * rho e^{-rho x}` (exponential jumps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpExponentialDensity {
    pub rate: f64,
    pub rho: f64,
}

impl JumpDensity for CpExponentialDensity {
    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.rate * self.rho * (-self.rho * x).exp()
        }
    }

    fn tail(&self, x: f64) -> f64 {
        self.rate * (-self.rho * x.max(0.0)).exp()
    }

    fn tail_at_zero(&self) -> f64 {
        self.rate
    }

    fn tail_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            f64::INFINITY
        } else if y >= self.rate {
            0.0
        } else {
            -(y / self.rate).ln() / self.rho
        }
    }

    fn truncation_level(&self, _rule: &Truncation) -> f64 {
        self.rate
    }

    fn mean(&self) -> Option<f64> {
        Some(self.rate / self.rho)
    }

    fn second_moment(&self) -> f64 {
        2.0 * self.rate / (self.rho * self.rho)
    }

    fn upper_mean(&self, x0: f64, _rtol: f64) -> Result<f64> {
        let x0 = x0.max(0.0);
        Ok(self.rate * (x0 + 1.0 / self.rho) * (-self.rho * x0).exp())
    }

    fn compensated_exponent(&self, z: f64) -> Complex64 {
        let i = Complex64::i();
        let jump_cf = self.rho / (self.rho - i * z);
        -self.rate * (jump_cf - 1.0) + i * z * (self.rate / self.rho)
    }
}

/// Density-only model: tail integral by quadrature, inverse by bisection.
#[derive(Clone)]
pub struct QuadratureDensity {
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    rtol: f64,
    g0: f64,
    mean: Option<f64>,
    second_moment: f64,
}

impl fmt::Debug for QuadratureDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadratureDensity")
            .field("rtol", &self.rtol)
            .field("g0", &self.g0)
            .field("mean", &self.mean)
            .field("second_moment", &self.second_moment)
            .finish()
    }
}

impl QuadratureDensity {
    /// Registers a density, rejecting it when Condition A fails.
    pub fn new(pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>, rtol: f64) -> Result<Self> {
        check_condition_a(pdf.as_ref(), rtol)?;
        let mean = match check_condition_b(pdf.as_ref(), rtol) {
            Ok(()) => Some(quad_to_infinity(|x| x * pdf(x), 0.0, rtol)?),
            Err(_) => None,
        };
        let second_moment = quad_to_infinity(|x| x * x * pdf(x), 0.0, rtol)?;
        let g0 = finite_activity_mass(pdf.as_ref(), rtol).unwrap_or(f64::INFINITY);
        Ok(Self {
            pdf,
            rtol,
            g0,
            mean,
            second_moment,
        })
    }
}

fn finite_activity_mass(pdf: &dyn Fn(f64) -> f64, rtol: f64) -> Option<f64> {
    let near = quad(pdf, 1e-10, 1.0, rtol).ok()?;
    let nearer = quad(pdf, 1e-14, 1.0, rtol).ok()?;
    if (nearer - near).abs() > 1e-6 * near.abs().max(1e-300) {
        return None;
    }
    quad_to_infinity(pdf, 0.0, rtol).ok()
}

impl JumpDensity for QuadratureDensity {
    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (self.pdf)(x)
        }
    }

    fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.g0;
        }
        quad_to_infinity(|s| (self.pdf)(s), x, self.rtol).unwrap_or(f64::NAN)
    }

    fn tail_at_zero(&self) -> f64 {
        self.g0
    }

    fn tail_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        if y >= self.g0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.tail(hi) > y {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = hi;
        while self.tail(lo) < y {
            lo *= 0.5;
            if lo < 1e-300 {
                return 0.0;
            }
        }
        if lo == hi {
            return lo;
        }
        invert_monotone(|x| self.tail(x), y, (lo, hi), self.rtol).unwrap_or(lo)
    }

    fn truncation_level(&self, rule: &Truncation) -> f64 {
        if self.g0.is_finite() {
            self.g0
        } else {
            self.tail(rule.jump_floor)
        }
    }

    fn mean(&self) -> Option<f64> {
        self.mean
    }

    fn second_moment(&self) -> f64 {
        self.second_moment
    }

    fn upper_mean(&self, x0: f64, rtol: f64) -> Result<f64> {
        if x0 <= 0.0 {
            return self.mean.ok_or(KleError::InfiniteMean);
        }
        quad_to_infinity(|x| x * (self.pdf)(x), x0, rtol)
    }

    fn compensated_exponent(&self, z: f64) -> Complex64 {
        let i = Complex64::i();
        let v: Result<Complex64> = quad_to_infinity(
            |x: f64| ((i * z * x).exp() - 1.0 - i * z * x) * (self.pdf)(x),
            0.0,
            self.rtol,
        );
        -v.unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }
}

/// Condition A: `\int_{x > 1} x^2 pi(x) dx < inf`, checked on `[1, 1e6]`.
///
/// The check is numerical: the last decade must carry at most 1% of the
/// integral.
pub fn check_condition_a(pdf: &dyn Fn(f64) -> f64, rtol: f64) -> Result<()> {
    let total = quad(|x| x * x * pdf(x), 1.0, 1e6, rtol)
        .map_err(|e| KleError::Condition(format!("Condition A quadrature failed: {e}")))?;
    let last = quad(|x| x * x * pdf(x), 1e5, 1e6, rtol)
        .map_err(|e| KleError::Condition(format!("Condition A quadrature failed: {e}")))?;
    if !total.is_finite() || last > 1e-2 * total.max(1e-300) {
        return Err(KleError::Condition(format!(
            "Condition A fails: large-jump second moment does not settle ({last} of {total} in [1e5, 1e6])"
        )));
    }
    Ok(())
}

/// Condition B: `\int_{x <= 1} x pi(x) dx < inf`, checked on `[1e-10, 1]`.
pub fn check_condition_b(pdf: &dyn Fn(f64) -> f64, rtol: f64) -> Result<()> {
    let total = quad(|x| x * pdf(x), 1e-10, 1.0, rtol)
        .map_err(|e| KleError::Condition(format!("Condition B quadrature failed: {e}")))?;
    let first = quad(|x| x * pdf(x), 1e-10, 1e-9, rtol)
        .map_err(|e| KleError::Condition(format!("Condition B quadrature failed: {e}")))?;
    if !total.is_finite() || first > 1e-2 * total.max(1e-300) {
        return Err(KleError::Condition(format!(
            "Condition B fails: small-jump first moment does not settle ({first} of {total} in [1e-10, 1e-9])"
        )));
    }
    Ok(())
}

/// Cutoff convention of a generating triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cutoff {
    /// `h = 0`: no compensator, requires Condition B.
    H0,
    /// `h = 1`: fully compensated jumps, the drift equals the mean.
    H1,
}

/// `(a, sigma^2, nu)` with an explicit cutoff convention.
#[derive(Debug, Clone)]
pub struct GeneratingTriple {
    pub drift: f64,
    pub sigma2: f64,
    /// Density of the positive jumps.
    pub pos: Option<Arc<dyn JumpDensity>>,
    /// Density of the absolute values of the negative jumps, `pi(-x)`.
    pub neg: Option<Arc<dyn JumpDensity>>,
    pub cutoff: Cutoff,
}

impl GeneratingTriple {
    pub fn has_jumps(&self) -> bool {
        self.pos.is_some() || self.neg.is_some()
    }

    /// Signed jump mean `m = \int x nu(dx)`, if finite.
    pub fn jump_mean(&self) -> Option<f64> {
        let pos = match &self.pos {
            Some(d) => d.mean()?,
            None => 0.0,
        };
        let neg = match &self.neg {
            Some(d) => d.mean()?,
            None => 0.0,
        };
        Some(pos - neg)
    }

    pub fn jump_second_moment(&self) -> f64 {
        self.pos.as_ref().map_or(0.0, |d| d.second_moment())
            + self.neg.as_ref().map_or(0.0, |d| d.second_moment())
    }

    pub fn satisfies_condition_b(&self) -> bool {
        self.jump_mean().is_some()
    }

    /// `E[X_1]`.
    pub fn mean_rate(&self) -> f64 {
        match self.cutoff {
            Cutoff::H1 => self.drift,
            Cutoff::H0 => self.drift + self.jump_mean().unwrap_or(f64::NAN),
        }
    }

    /// Same law under the other cutoff convention.
    pub fn with_cutoff(&self, cutoff: Cutoff) -> Result<Self> {
        let drift = match (self.cutoff, cutoff) {
            (a, b) if a == b => self.drift,
            (Cutoff::H0, Cutoff::H1) => self.mean_rate(),
            (Cutoff::H1, Cutoff::H0) => self.drift - self.jump_mean().ok_or(KleError::InfiniteMean)?,
            _ => unreachable!(),
        };
        Ok(Self {
            drift,
            cutoff,
            ..self.clone()
        })
    }
}

/// A named one-dimensional square-integrable Levy process.
#[derive(Debug, Clone)]
pub struct LevyModel {
    name: String,
    triple: GeneratingTriple,
    alpha: f64,
}

impl LevyModel {
    pub fn new(name: impl Into<String>, triple: GeneratingTriple) -> Result<Self> {
        if !(triple.sigma2 >= 0.0) || !triple.sigma2.is_finite() {
            return Err(KleError::Parameter(format!(
                "Gaussian variance must be finite and >= 0, got {}",
                triple.sigma2
            )));
        }
        if !triple.drift.is_finite() {
            return Err(KleError::Parameter("drift must be finite".into()));
        }
        if triple.cutoff == Cutoff::H0 && !triple.satisfies_condition_b() {
            return Err(KleError::Condition(
                "the h = 0 convention requires Condition B".into(),
            ));
        }
        let alpha = triple.sigma2 + triple.jump_second_moment();
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(KleError::Condition(format!(
                "variance rate must be positive and finite, got {alpha}"
            )));
        }
        Ok(Self {
            name: name.into(),
            triple,
            alpha,
        })
    }

    /// Registers a model from its densities; tails and inverses come from
    /// quadrature. Condition A (and B for `h = 0`) is checked here.
    pub fn from_densities(
        name: impl Into<String>,
        drift: f64,
        sigma2: f64,
        pos: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        neg: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        cutoff: Cutoff,
        rtol: f64,
    ) -> Result<Self> {
        let wrap = |pdf: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>| -> Result<Option<Arc<dyn JumpDensity>>> {
            match pdf {
                Some(p) => Ok(Some(Arc::new(QuadratureDensity::new(p, rtol)?) as Arc<dyn JumpDensity>)),
                None => Ok(None),
            }
        };
        let triple = GeneratingTriple {
            drift,
            sigma2,
            pos: wrap(pos)?,
            neg: wrap(neg)?,
            cutoff,
        };
        Self::new(name, triple)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn triple(&self) -> &GeneratingTriple {
        &self.triple
    }

    /// Variance rate `alpha = Psi''(0)`, so that `Var(X_t) = alpha t`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn jump_mean(&self) -> Option<f64> {
        self.triple.jump_mean()
    }

    pub fn mean_rate(&self) -> f64 {
        self.triple.mean_rate()
    }

    pub fn is_centered(&self) -> bool {
        self.mean_rate().abs() <= 1e-14 * (1.0 + self.jump_mean().map_or(0.0, f64::abs))
    }

    pub fn tail_pos(&self) -> Option<&dyn JumpDensity> {
        self.triple.pos.as_deref()
    }

    pub fn tail_neg(&self) -> Option<&dyn JumpDensity> {
        self.triple.neg.as_deref()
    }

    pub fn g0_pos(&self) -> f64 {
        self.tail_pos().map_or(0.0, |d| d.tail_at_zero())
    }

    pub fn g0_neg(&self) -> f64 {
        self.tail_neg().map_or(0.0, |d| d.tail_at_zero())
    }

    /// Characteristic exponent: `E[e^{izX_t}] = e^{-t Psi(z)}`.
    pub fn psi(&self, z: f64) -> Complex64 {
        let i = Complex64::i();
        let mut v = Complex64::new(0.5 * self.triple.sigma2 * z * z, 0.0) - i * z * self.mean_rate();
        if let Some(d) = &self.triple.pos {
            v += d.compensated_exponent(z);
        }
        if let Some(d) = &self.triple.neg {
            v += d.compensated_exponent(-z);
        }
        v
    }

    /// Splits into independent positive-jump parts plus a Gaussian part.
    ///
    /// Each jump part is centered; parts satisfying Condition B use the
    /// `h = 0` convention with drift `-m`, the others `(0, 0, pi)_{h=1}`.
    pub fn split(&self) -> Result<SplitModel> {
        let part = |density: &Option<Arc<dyn JumpDensity>>, suffix: &str| -> Result<Option<LevyModel>> {
            let Some(d) = density else { return Ok(None) };
            let triple = match d.mean() {
                Some(m) => GeneratingTriple {
                    drift: -m,
                    sigma2: 0.0,
                    pos: Some(d.clone()),
                    neg: None,
                    cutoff: Cutoff::H0,
                },
                None => GeneratingTriple {
                    drift: 0.0,
                    sigma2: 0.0,
                    pos: Some(d.clone()),
                    neg: None,
                    cutoff: Cutoff::H1,
                },
            };
            Ok(Some(LevyModel::new(format!("{}{suffix}", self.name), triple)?))
        };
        Ok(SplitModel {
            pos: part(&self.triple.pos, "+")?,
            neg: part(&self.triple.neg, "-")?,
            gaussian_sigma2: self.triple.sigma2,
            mean_rate: self.mean_rate(),
            composite: self.clone(),
        })
    }
}

/// A model decomposed as `X = X+ - X- + sigma W + mean_rate t`, with `X+`
/// and `X-` centered positive-jump processes.
#[derive(Debug, Clone)]
pub struct SplitModel {
    pub pos: Option<LevyModel>,
    pub neg: Option<LevyModel>,
    pub gaussian_sigma2: f64,
    /// Deterministic `E[X_1]` re-added to reconstructed paths.
    pub mean_rate: f64,
    /// The undecomposed process.
    pub composite: LevyModel,
}

impl SplitModel {
    pub fn name(&self) -> &str {
        self.composite.name()
    }

    pub fn alpha(&self) -> f64 {
        self.composite.alpha()
    }

    /// Exponent of the centered composite process.
    pub fn psi_centered(&self, z: f64) -> Complex64 {
        let mut v = Complex64::new(0.5 * self.gaussian_sigma2 * z * z, 0.0);
        if let Some(m) = &self.pos {
            v += m.psi(z);
        }
        if let Some(m) = &self.neg {
            v += m.psi(-z);
        }
        v
    }

    pub fn has_jumps(&self) -> bool {
        self.pos.is_some() || self.neg.is_some()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KleError::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Scaled Brownian motion `sigma W`.
pub fn make_brownian(sigma2: f64) -> Result<LevyModel> {
    positive("sigma2", sigma2)?;
    LevyModel::new(
        "brownian",
        GeneratingTriple {
            drift: 0.0,
            sigma2,
            pos: None,
            neg: None,
            cutoff: Cutoff::H0,
        },
    )
}

/// Gamma subordinator with density `c e^{-rho x}/x`, uncentered: mean `c/rho`.
pub fn make_gamma(c: f64, rho: f64) -> Result<LevyModel> {
    positive("c", c)?;
    positive("rho", rho)?;
    LevyModel::new(
        "gamma",
        GeneratingTriple {
            drift: 0.0,
            sigma2: 0.0,
            pos: Some(Arc::new(GammaDensity { c, rho })),
            neg: None,
            cutoff: Cutoff::H0,
        },
    )
}

/// Compound Poisson process with intensity `rate` and `Exp(rho)` jumps.
pub fn make_cp_exponential(rate: f64, rho: f64) -> Result<LevyModel> {
    positive("rate", rate)?;
    positive("rho", rho)?;
    LevyModel::new(
        "cp_exponential",
        GeneratingTriple {
            drift: 0.0,
            sigma2: 0.0,
            pos: Some(Arc::new(CpExponentialDensity { rate, rho })),
            neg: None,
            cutoff: Cutoff::H0,
        },
    )
}

/// Variance gamma process as the difference of two gamma subordinators.
pub fn make_variance_gamma(c_pos: f64, rho_pos: f64, c_neg: f64, rho_neg: f64) -> Result<SplitModel> {
    positive("c_pos", c_pos)?;
    positive("rho_pos", rho_pos)?;
    positive("c_neg", c_neg)?;
    positive("rho_neg", rho_neg)?;
    let composite = LevyModel::new(
        "variance_gamma",
        GeneratingTriple {
            drift: 0.0,
            sigma2: 0.0,
            pos: Some(Arc::new(GammaDensity { c: c_pos, rho: rho_pos })),
            neg: Some(Arc::new(GammaDensity { c: c_neg, rho: rho_neg })),
            cutoff: Cutoff::H0,
        },
    )?;
    composite.split()
}

/// Removes the mean: `h = 1` drift becomes 0, `h = 0` drift becomes `-m`.
pub fn center(model: &LevyModel) -> Result<LevyModel> {
    let triple = model.triple();
    let drift = match triple.cutoff {
        Cutoff::H1 => 0.0,
        Cutoff::H0 => -triple.jump_mean().ok_or(KleError::InfiniteMean)?,
    };
    LevyModel::new(
        model.name(),
        GeneratingTriple {
            drift,
            ..triple.clone()
        },
    )
}

/// `Psi''(0)` by Richardson-extrapolated central differences.
pub fn psi_second_derivative(model: &LevyModel) -> Result<f64> {
    second_derivative_at_zero(|z| model.psi(z).re)
}

pub(crate) fn second_derivative_at_zero<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let f0 = f(0.0);
    let central = |h: f64| (f(h) - 2.0 * f0 + f(-h)) / (h * h);
    let h = 0.05;
    let mut table = [central(h), central(h / 2.0), central(h / 4.0)];
    let mut factor = 4.0;
    for level in 1..3 {
        for j in 0..3 - level {
            table[j] = (factor * table[j + 1] - table[j]) / (factor - 1.0);
        }
        factor *= 4.0;
    }
    let v = table[0];
    if !v.is_finite() {
        return Err(KleError::Condition(
            "Psi''(0) is not finite; Condition A fails".into(),
        ));
    }
    Ok(v)
}

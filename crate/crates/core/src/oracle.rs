//! Independent checks for the samplers: quadrature of the coefficient
//! exponent, direct time-domain series, exact path integration, and
//! two-sample statistics.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{KleError, Result};
use crate::kle_basis::KleBasis;
use crate::levy_models::{Cutoff, JumpDensity, LevyModel, SplitModel, Truncation};
use crate::shot_noise::{part_rng, ArrivalStream, CoefficientSample, Part};
use crate::special_fn::{quad, quad_complex, quad_to_infinity};

/// `Psi_Z(z) = \int_0^T Psi_X(<z, u(t)>) dt` for the centered process, so
/// that `E[exp(i <z, Z^(d)>)] = exp(-Psi_Z(z))`.
pub fn coeff_char_exponent(model: &LevyModel, basis: &KleBasis, z: &[f64], rtol: f64) -> Result<Complex64> {
    if z.len() != basis.dim() {
        return Err(KleError::Dimension {
            expected: basis.dim(),
            got: z.len(),
        });
    }
    let mean = model.mean_rate();
    let i = Complex64::i();
    let t_end = basis.horizon();
    let inner = |t: f64| -> f64 {
        let mut f = vec![0.0; z.len()];
        basis.add_f_map(1.0, t / t_end, &mut f);
        f.iter().zip(z).map(|(u, zk)| u * zk).sum()
    };
    quad_complex(
        |t| {
            let w = inner(t);
            model.psi(w) + i * w * mean
        },
        0.0,
        t_end,
        rtol,
    )
}

/// `(1/N) sum_n exp(i <z, Z_n>)`.
pub fn empirical_cf(samples: &[CoefficientSample], z: &[f64]) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(KleError::InsufficientSamples { need: 1, got: 0 });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for s in samples {
        if s.d() != z.len() {
            return Err(KleError::Dimension {
                expected: z.len(),
                got: s.d(),
            });
        }
        let phase: f64 = s.z.iter().zip(z).map(|(a, b)| a * b).sum();
        acc += Complex64::from_polar(1.0, phase);
    }
    Ok(acc / samples.len() as f64)
}

/// A jump of the direct series: size and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

fn subordinator_density(model: &LevyModel) -> Result<(&dyn JumpDensity, f64)> {
    let triple = model.triple();
    if triple.neg.is_some() || triple.sigma2 != 0.0 {
        return Err(KleError::Parameter(format!(
            "model '{}' is not a subordinator",
            model.name()
        )));
    }
    let density = model
        .tail_pos()
        .ok_or_else(|| KleError::Parameter("model has no jumps".into()))?;
    let drift = triple.with_cutoff(Cutoff::H0)?.drift;
    Ok((density, drift))
}

/// Jumps `g^{-1}(Gamma_i / T)` at times `T U_i`, truncated by `rule`.
pub fn direct_series_jumps(
    density: &dyn JumpDensity,
    horizon: f64,
    stream: ArrivalStream,
    rule: &Truncation,
) -> Result<Vec<Jump>> {
    let cap = stream.cap();
    let radius = horizon * density.truncation_level(rule);
    let mut jumps = Vec::new();
    let mut exhausted = true;
    let mut last = 0.0;
    for a in stream {
        last = a.gamma;
        if a.gamma > radius {
            exhausted = false;
            break;
        }
        jumps.push(Jump {
            time: horizon * a.u,
            size: density.tail_inverse(a.gamma / horizon),
        });
    }
    if exhausted {
        return Err(KleError::MaxTerms {
            max_terms: cap,
            last_arrival: last,
        });
    }
    Ok(jumps)
}

/// `X_t = b t + sum_i g^{-1}(Gamma_i / T) 1(T U_i < t)` at each of `times`,
/// with `b` the `h = 0` drift; the mean is not removed.
pub fn direct_series_path(
    model: &LevyModel,
    horizon: f64,
    times: &[f64],
    stream: ArrivalStream,
    rule: &Truncation,
) -> Result<Vec<f64>> {
    let (density, drift) = subordinator_density(model)?;
    let jumps = direct_series_jumps(density, horizon, stream, rule)?;
    Ok(times
        .iter()
        .map(|&t| {
            let s: f64 = jumps.iter().filter(|j| j.time < t).map(|j| j.size).sum();
            drift * t + s
        })
        .collect())
}

/// Single-time version of [`direct_series_path`].
pub fn direct_series_subordinator(
    model: &LevyModel,
    horizon: f64,
    t: f64,
    stream: ArrivalStream,
    rule: &Truncation,
) -> Result<f64> {
    Ok(direct_series_path(model, horizon, &[t], stream, rule)?[0])
}

/// Centered `X_T` of a split model from the direct series: the two jump
/// parts (each carrying its `h = 0` drift) plus an independent Gaussian
/// draw. Sample `index` reads the sub-streams of `seed`.
pub fn direct_series_terminal(
    model: &SplitModel,
    horizon: f64,
    seed: u64,
    index: u64,
    rule: &Truncation,
    max_terms: usize,
) -> Result<f64> {
    let part = |m: &Option<LevyModel>, p: Part| -> Result<f64> {
        match m {
            Some(m) => direct_series_subordinator(
                m,
                horizon,
                horizon,
                ArrivalStream::from_rng(part_rng(seed, p, index), max_terms),
                rule,
            ),
            None => Ok(0.0),
        }
    };
    let pos = part(&model.pos, Part::Pos)?;
    let neg = part(&model.neg, Part::Neg)?;
    let gauss = if model.gaussian_sigma2 > 0.0 {
        let n: f64 = part_rng(seed, Part::Gauss, index).sample(StandardNormal);
        (model.gaussian_sigma2 * horizon).sqrt() * n
    } else {
        0.0
    };
    Ok((pos - neg) + gauss)
}

/// `Z_k = \int_0^T X_t e_k(t) dt` for a finite-activity model, with `X` the
/// path `a t + sum_{s_i <= t} x_i` built from the direct series and `a` the
/// model's `h = 0` drift.
///
/// Between breakpoints (jump times merged with `grid_n` uniform cells) the
/// path is affine and each piece is integrated in closed form.
pub fn brute_force_coeffs(
    model: &LevyModel,
    basis: &KleBasis,
    stream: ArrivalStream,
    grid_n: usize,
) -> Result<Vec<f64>> {
    let (density, drift) = subordinator_density(model)?;
    if !density.tail_at_zero().is_finite() {
        return Err(KleError::Parameter(
            "path integration needs a finite Levy measure".into(),
        ));
    }
    let horizon = basis.horizon();
    let mut jumps = direct_series_jumps(density, horizon, stream, &Truncation::default())?;
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(integrate_step_path(&jumps, drift, basis, grid_n))
}

fn integrate_step_path(jumps: &[Jump], drift: f64, basis: &KleBasis, grid_n: usize) -> Vec<f64> {
    let horizon = basis.horizon();
    let cells = grid_n.max(1);
    let mut cuts: Vec<f64> = (0..=cells).map(|i| horizon * i as f64 / cells as f64).collect();
    cuts.extend(jumps.iter().map(|j| j.time));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let scale = (2.0 / horizon).sqrt();
    (1..=basis.dim())
        .map(|k| {
            let w = std::f64::consts::PI * (k as f64 - 0.5) / horizon;
            // antiderivatives of e_k and t e_k
            let e_int = |t: f64| -scale * (w * t).cos() / w;
            let te_int = |t: f64| scale * ((w * t).sin() / (w * w) - t * (w * t).cos() / w);
            let mut level = 0.0;
            let mut next = 0;
            let mut total = 0.0;
            for pair in cuts.windows(2) {
                let (l, r) = (pair[0], pair[1]);
                while next < jumps.len() && jumps[next].time <= l {
                    level += jumps[next].size;
                    next += 1;
                }
                total += level * (e_int(r) - e_int(l)) + drift * (te_int(r) - te_int(l));
            }
            total
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    const MIN: usize = 100;
    for s in [a, b] {
        if s.len() < MIN {
            return Err(KleError::InsufficientSamples { need: MIN, got: s.len() });
        }
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let root = ne.sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `\int_0^T \int f_j(x,t)^2 f_k(x,t)^2 nu(dx) dt`, the fourth cross
/// cumulant `Cov(Z_j^2, Z_k^2)` of a centered process, by nested quadrature.
pub fn mixed_fourth_cumulant(model: &LevyModel, basis: &KleBasis, j: usize, k: usize, rtol: f64) -> Result<f64> {
    if j == k || j == 0 || k == 0 {
        return Err(KleError::Parameter(format!(
            "mixed cumulant needs distinct positive indices, got ({j}, {k})"
        )));
    }
    let densities: Vec<&dyn JumpDensity> = model.tail_pos().into_iter().chain(model.tail_neg()).collect();
    if densities.is_empty() {
        return Ok(0.0);
    }
    let t_end = basis.horizon();
    let failure = std::cell::RefCell::new(None);
    let value = quad(
        |t| {
            let uj = basis.u(j, t).unwrap_or(0.0);
            let uk = basis.u(k, t).unwrap_or(0.0);
            let w = uj * uj * uk * uk;
            let mut inner = 0.0;
            for d in &densities {
                match quad_to_infinity(|x: f64| w * x.powi(4) * d.density(x), 0.0, rtol) {
                    Ok(v) => inner += v,
                    Err(e) => *failure.borrow_mut() = Some(e),
                }
            }
            inner
        },
        0.0,
        t_end,
        rtol,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

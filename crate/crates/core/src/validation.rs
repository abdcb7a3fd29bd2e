//! Validation suites producing a serializable report.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::kle_basis::{KleBasis, SumMode};
use crate::levy_models::SplitModel;
use crate::monte_carlo::{collect_samples, covariance_with_se, sample_path_values, CoefficientMoments};
use crate::oracle::{coeff_char_exponent, direct_series_terminal, empirical_cf, ks_two_sample, mixed_fourth_cumulant};
use crate::shot_noise::{extend_dimension, sample_coeffs_indexed, ShotConfig};
use crate::special_fn::{e1_inverse, exp_integral_e1, E1_INVERSE_DOMAIN_HI, E1_INVERSE_DOMAIN_LO};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub horizon: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub horizon: f64,
    /// Samples for the moment, characteristic-function and dependence suites.
    pub n_samples: usize,
    /// Dimension of the moment suite.
    pub moment_dim: usize,
    /// Samples per side and dimension of the KS comparison at `t = T`.
    pub ks_samples: usize,
    pub ks_dim: usize,
    pub seed: u64,
    pub shot: ShotConfig,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_samples: 100_000,
            moment_dim: 5,
            ks_samples: 2000,
            ks_dim: 300,
            seed: 0,
            shot: ShotConfig::default(),
        }
    }
}

fn check(suite: &str, name: impl Into<String>, statistic: f64, tolerance: f64, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        suite: suite.into(),
        name: name.into(),
        statistic,
        tolerance,
        passed,
        detail: detail.into(),
    }
}

fn shot_cfg(opts: &ValidationOptions, offset: u64) -> ShotConfig {
    ShotConfig {
        seed: opts.seed.wrapping_add(offset),
        ..opts.shot.clone()
    }
}

/// Means zero, variances `lambda_k`, pairwise correlations zero.
pub fn moment_suite(model: &SplitModel, opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let basis = KleBasis::new(opts.horizon, opts.moment_dim, model.alpha())?;
    let samples = collect_samples(model, &basis, &shot_cfg(opts, 0), opts.n_samples)?;
    let m = CoefficientMoments::from_samples(&samples)?;
    let mut out = Vec::new();
    for k in 0..basis.dim() {
        let dev = m.mean[k].abs();
        out.push(check("moments", format!("mean Z{}", k + 1), dev, 4.0 * m.mean_se[k], dev <= 4.0 * m.mean_se[k], "|mean| <= 4 SE"));
        let lambda = basis.eigenvalue(k + 1);
        let dev = (m.variance[k] - lambda).abs();
        let tol = 4.0 * m.variance_se[k];
        out.push(check("moments", format!("var Z{}", k + 1), dev, tol, dev <= tol, format!("|var - lambda| <= 4 SE, lambda = {lambda}")));
    }
    let tol = 4.0 / (m.n as f64).sqrt();
    for j in 0..basis.dim() {
        for k in j + 1..basis.dim() {
            let c = m.corr(j, k).abs();
            out.push(check("moments", format!("corr Z{} Z{}", j + 1, k + 1), c, tol, c <= tol, "|corr| <= 4/sqrt(N)"));
        }
    }
    Ok(out)
}

/// Grid of `z` in `0.5 {-1, 0, 1}^3`.
pub fn cf_grid() -> Vec<[f64; 3]> {
    let v = [-0.5, 0.0, 0.5];
    let mut g = Vec::with_capacity(27);
    for a in v {
        for b in v {
            for c in v {
                g.push([a, b, c]);
            }
        }
    }
    g
}

/// Largest gap between the empirical and quadrature characteristic
/// functions of `Z^(3)` over [`cf_grid`].
pub fn cf_max_deviation(model: &SplitModel, horizon: f64, n: usize, cfg: &ShotConfig) -> Result<f64> {
    let basis = KleBasis::new(horizon, 3, model.alpha())?;
    let samples = collect_samples(model, &basis, cfg, n)?;
    let devs: Vec<f64> = cf_grid()
        .par_iter()
        .map(|z| {
            let exact = (-coeff_char_exponent(&model.composite, &basis, z, 1e-10)?).exp();
            Ok((empirical_cf(&samples, z)? - exact).norm())
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

pub fn cf_suite(model: &SplitModel, opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let dev = cf_max_deviation(model, opts.horizon, opts.n_samples, &shot_cfg(opts, 1))?;
    let tol = 4.0 / (opts.n_samples as f64).sqrt();
    Ok(vec![check("cf", "max |cf_emp - exp(-Psi)| over 27 points", dev, tol, dev <= tol, "d = 3")])
}

/// Empirical `Cov(Z1^2, Z2^2)`, its standard error, and the cumulant oracle.
pub fn square_covariance(model: &SplitModel, horizon: f64, n: usize, cfg: &ShotConfig) -> Result<(f64, f64, f64)> {
    let basis = KleBasis::new(horizon, 2, model.alpha())?;
    let samples = collect_samples(model, &basis, cfg, n)?;
    let a: Vec<f64> = samples.iter().map(|s| s.z[0] * s.z[0]).collect();
    let b: Vec<f64> = samples.iter().map(|s| s.z[1] * s.z[1]).collect();
    let (cov, se) = covariance_with_se(&a, &b)?;
    let kappa = mixed_fourth_cumulant(&model.composite, &basis, 1, 2, 1e-10)?;
    Ok((cov, se, kappa))
}

pub fn dependence_suite(model: &SplitModel, opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let (cov, se, kappa) = square_covariance(model, opts.horizon, opts.n_samples, &shot_cfg(opts, 2))?;
    let dev = (cov - kappa).abs();
    let mut out = vec![check(
        "dependence",
        "Cov(Z1^2, Z2^2) vs mixed fourth cumulant",
        dev,
        5.0 * se,
        dev <= 5.0 * se,
        format!("cov = {cov}, kappa = {kappa}"),
    )];
    if kappa > 0.0 {
        out.push(check("dependence", "Cov(Z1^2, Z2^2) > 0", cov / se, 4.0, cov > 4.0 * se, "dependent: positive covariance"));
    } else {
        let ok = cov.abs() <= 4.0 * se;
        let verdict = if ok { "independent: consistent" } else { "independent: inconsistent" };
        out.push(check("dependence", "Cov(Z1^2, Z2^2) = 0", cov.abs() / se, 4.0, ok, verdict));
    }
    Ok(out)
}

/// `S^(d)_T` from the shot-noise sampler against the centered direct series.
pub fn terminal_ks(model: &SplitModel, horizon: f64, d: usize, n: usize, seed: u64, shot: &ShotConfig) -> Result<(f64, f64)> {
    let basis = KleBasis::new(horizon, d, model.alpha())?;
    let cfg = ShotConfig { seed, ..shot.clone() };
    let kle = sample_path_values(model, &basis, &cfg, horizon, n, SumMode::Partial, 0.0)?;
    let direct_seed = seed ^ 0xD1B5_4A32_D192_ED03;
    let rule = shot.truncation();
    let direct: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| direct_series_terminal(model, horizon, direct_seed, i, &rule, shot.max_terms))
        .collect::<Result<_>>()?;
    let r = ks_two_sample(&kle, &direct)?;
    Ok((r.statistic, r.p_value))
}

pub fn ks_suite(model: &SplitModel, opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let (stat, p) = terminal_ks(model, opts.horizon, opts.ks_dim, opts.ks_samples, opts.seed.wrapping_add(3), &opts.shot)?;
    Ok(vec![check(
        "ks",
        format!("S^({})_T vs direct series X_T", opts.ks_dim),
        p,
        0.01,
        p >= 0.01,
        format!("D = {stat}, p = {p}, N = {}", opts.ks_samples),
    )])
}

/// E1 table round trip and bitwise dimension extension.
pub fn roundtrip_suite(model: &SplitModel, opts: &ValidationOptions) -> Result<Vec<CheckResult>> {
    let table = e1_inverse();
    let x_lo = table.invert(E1_INVERSE_DOMAIN_HI);
    let x_hi = table.invert(E1_INVERSE_DOMAIN_LO);
    let mut worst: f64 = 0.0;
    let n = 2000;
    for i in 0..=n {
        let x = x_lo * (x_hi / x_lo).powf(i as f64 / n as f64);
        let back = table.invert(exp_integral_e1(x)?);
        worst = worst.max((back - x).abs() / x.max(1.0));
    }
    let mut out = vec![check("roundtrip", "E1 inverse round trip", worst, 1e-8, worst <= 1e-8, "max |x' - x| / max(1, x)")];
    let cfg = ShotConfig {
        retain_record: true,
        ..shot_cfg(opts, 4)
    };
    let small = KleBasis::new(opts.horizon, 5, model.alpha())?;
    let large = KleBasis::new(opts.horizon, 25, model.alpha())?;
    let mut mismatches = 0usize;
    for i in 0..20 {
        let grown = extend_dimension(&sample_coeffs_indexed(model, &small, &cfg, i)?, 25)?;
        let fresh = sample_coeffs_indexed(model, &large, &cfg, i)?;
        mismatches += grown.z.iter().zip(&fresh.z).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    out.push(check("roundtrip", "extend 5 -> 25 equals fresh d = 25", mismatches as f64, 0.0, mismatches == 0, "bitwise, 20 samples"));
    Ok(out)
}

/// Runs every suite.
pub fn run_all(model: &SplitModel, opts: &ValidationOptions) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    checks.extend(moment_suite(model, opts)?);
    checks.extend(cf_suite(model, opts)?);
    checks.extend(dependence_suite(model, opts)?);
    checks.extend(ks_suite(model, opts)?);
    checks.extend(roundtrip_suite(model, opts)?);
    Ok(ValidationReport {
        model: model.name().to_string(),
        horizon: opts.horizon,
        n_samples: opts.n_samples,
        seed: opts.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{make_brownian, make_variance_gamma};

    fn small() -> ValidationOptions {
        ValidationOptions {
            n_samples: 4000,
            ks_samples: 500,
            ks_dim: 50,
            seed: 12,
            ..ValidationOptions::default()
        }
    }

    #[test]
    fn brownian_passes_and_reports_independence() {
        let model = make_brownian(1.0).unwrap().split().unwrap();
        let report = run_all(&model, &small()).unwrap();
        assert!(report.passed, "{report:#?}");
        assert!(report.checks.iter().any(|c| c.detail == "independent: consistent"));
        let json = serde_json::to_string(&report);
        assert!(json.is_ok());
    }

    #[test]
    fn variance_gamma_dependence_is_positive() {
        let model = make_variance_gamma(1.0, 1.0, 1.0, 2.0).unwrap();
        let (cov, _, kappa) = square_covariance(&model, 1.0, 4000, &ShotConfig::with_seed(3)).unwrap();
        assert!(kappa > 0.1 && cov > 0.0);
    }

    #[test]
    fn cf_grid_has_27_points() {
        let g = cf_grid();
        assert_eq!(g.len(), 27);
        assert!(g.contains(&[0.0, 0.0, 0.0]));
    }
}

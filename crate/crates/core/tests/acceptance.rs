//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Set `LEVY_KLE_LONG=1` to run the mean study with 10^6 paths.

use std::process::ExitCode;
use std::time::Instant;

use levy_kle::kle_basis::{reconstruct, uniform_grid, variance_capture, KleBasis, SumMode};
use levy_kle::levy_models::{center, make_brownian, make_cp_exponential, make_gamma, make_variance_gamma, SplitModel};
use levy_kle::monte_carlo::{collect_samples, mc_mean_study, scalar_stats, CoefficientMoments};
use levy_kle::oracle::brute_force_coeffs;
use levy_kle::shot_noise::{
    extend_dimension, part_rng, sample_coeffs_finite_variation, sample_coeffs_indexed, ArrivalStream, Part,
    ShotConfig,
};
use levy_kle::special_fn::{
    build_e1_inverse, e1_inverse, exp_integral_e1, E1_INVERSE_DOMAIN_HI, E1_INVERSE_DOMAIN_LO,
    E1_INVERSE_MAX_GAP, E1_INVERSE_POINTS,
};
use levy_kle::validation::{cf_max_deviation, square_covariance, terminal_ks};
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn vg() -> SplitModel {
    make_variance_gamma(1.0, 1.0, 1.0, 2.0).unwrap()
}

fn c1_variance_capture() -> Outcome {
    let v = |d| variance_capture(d);
    let ok = v(2) >= 0.90 && v(5) >= 0.95 && v(21) >= 0.99 && v(1) < 0.90 && v(4) < 0.95 && v(20) < 0.99;
    outcome(
        ok,
        format!(
            "d=1 {:.5}, 2 {:.5}, 4 {:.5}, 5 {:.5}, 20 {:.5}, 21 {:.5}",
            v(1),
            v(2),
            v(4),
            v(5),
            v(20),
            v(21)
        ),
    )
}

fn c2_moments() -> Outcome {
    let model = vg();
    let n = 100_000;
    let basis = KleBasis::new(1.0, 5, model.alpha()).unwrap();
    let samples = collect_samples(&model, &basis, &ShotConfig::with_seed(2002), n).unwrap();
    let m = CoefficientMoments::from_samples(&samples).unwrap();
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let mut worst_corr: f64 = 0.0;
    for k in 0..5 {
        worst_mean = worst_mean.max(m.mean[k].abs() / m.mean_se[k]);
        worst_var = worst_var.max((m.variance[k] - basis.eigenvalue(k + 1)).abs() / m.variance_se[k]);
        for j in k + 1..5 {
            worst_corr = worst_corr.max(m.corr(j, k).abs());
        }
    }
    let corr_tol = 4.0 / (n as f64).sqrt();
    outcome(
        worst_mean <= 4.0 && worst_var <= 4.0 && worst_corr <= corr_tol,
        format!(
            "max |mean|/SE {worst_mean:.3} (<= 4), max |var-lambda|/SE {worst_var:.3} (<= 4), max |corr| {worst_corr:.5} (<= {corr_tol:.5})"
        ),
    )
}

fn c3_characteristic_function() -> Outcome {
    let n = 100_000;
    let dev = cf_max_deviation(&vg(), 1.0, n, &ShotConfig::with_seed(3003)).unwrap();
    let tol = 4.0 / (n as f64).sqrt();
    outcome(dev <= tol, format!("max deviation {dev:.5} (<= {tol:.5}) over 27 points"))
}

fn c4_dependence() -> Outcome {
    let n = 100_000;
    let (cov, se, kappa) = square_covariance(&vg(), 1.0, n, &ShotConfig::with_seed(4004)).unwrap();
    let vg_ok = (cov - kappa).abs() <= 5.0 * se && cov > 4.0 * se;
    let bm = make_brownian(1.0).unwrap().split().unwrap();
    let (bcov, bse, bkappa) = square_covariance(&bm, 1.0, n, &ShotConfig::with_seed(4005)).unwrap();
    let bm_ok = bkappa == 0.0 && bcov.abs() <= 4.0 * bse;
    outcome(
        vg_ok && bm_ok,
        format!(
            "VG cov {cov:.5} vs kappa {kappa:.5}, SE {se:.5}: {:.2} SE off, {:.1} SE above 0; Brownian cov {bcov:.2e} ({:.2} SE)",
            (cov - kappa).abs() / se,
            cov / se,
            bcov.abs() / bse
        ),
    )
}

fn c5_distribution(d: usize, n: usize, seed: u64) -> Outcome {
    let gamma = make_gamma(1.0, 1.0).unwrap().split().unwrap();
    let (stat, p) = terminal_ks(&gamma, 1.0, d, n, seed, &ShotConfig::default()).unwrap();
    outcome(p >= 0.01, format!("d={d}, N={n}: D {stat:.5}, p {p:.4} (>= 0.01)"))
}

fn c6_brute_force() -> Outcome {
    let n = 10_000;
    let model = make_cp_exponential(2.0, 1.0).unwrap();
    let centered = center(&model).unwrap();
    let split = model.split().unwrap();
    let basis = KleBasis::new(1.0, 5, model.alpha()).unwrap();
    let shot: Vec<Vec<f64>> = collect_samples(&split, &basis, &ShotConfig::with_seed(6006), n)
        .unwrap()
        .into_iter()
        .map(|s| s.z)
        .collect();
    let brute: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let stream = ArrivalStream::from_rng(part_rng(6007, Part::Pos, i), 10_000);
            brute_force_coeffs(&centered, &basis, stream, 64).unwrap()
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut compare = |f: &dyn Fn(&[f64]) -> f64| {
        let a: Vec<f64> = shot.iter().map(|z| f(z)).collect();
        let b: Vec<f64> = brute.iter().map(|z| f(z)).collect();
        let (sa, sb) = (scalar_stats(&a).unwrap(), scalar_stats(&b).unwrap());
        let se = (sa.stderr.powi(2) + sb.stderr.powi(2)).sqrt();
        worst = worst.max((sa.mean - sb.mean).abs() / se);
    };
    for j in 0..5 {
        compare(&|z| z[j]);
        for k in j..5 {
            compare(&|z| z[j] * z[k]);
        }
    }
    outcome(worst <= 5.0, format!("20 moments, worst gap {worst:.3} SE (<= 5)"))
}

fn c7_mc_mean() -> Outcome {
    let long = std::env::var("LEVY_KLE_LONG").is_ok_and(|v| v == "1");
    let n = if long { 1_000_000 } else { 100_000 };
    let model = vg();
    let grid = uniform_grid(1.0, 101);
    let small = mc_mean_study(&model, 1.0, &[5], &ShotConfig::with_seed(7007), &grid, n, SumMode::Partial).unwrap();
    let worst5 = small[0]
        .1
        .iter()
        .map(|r| if r.stderr > 0.0 { r.abs_err / r.stderr } else if r.abs_err == 0.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    let study = mc_mean_study(&model, 1.0, &[25, 3000], &ShotConfig::with_seed(7008), &grid, n, SumMode::Partial).unwrap();
    let (lo, hi) = (&study[0].1, &study[1].1);
    let mut worst_gap: f64 = 0.0;
    for (a, b) in lo.iter().zip(hi) {
        let pooled = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        let gap = ((a.mc_mean - a.expected) - (b.mc_mean - b.expected)).abs();
        let ratio = if pooled > 0.0 { gap / pooled } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
        worst_gap = worst_gap.max(ratio);
    }
    outcome(
        worst5 <= 4.0 && worst_gap < 2.0,
        format!("N={n}: d=5 max |err|/SE {worst5:.3} (<= 4); d=25 vs 3000 max gap {worst_gap:.3} pooled SE (< 2)"),
    )
}

fn c8_truncation() -> Outcome {
    let n = 10_000u64;
    let gamma = make_gamma(1.0, 1.0).unwrap().split().unwrap();
    let basis = KleBasis::new(1.0, 5, gamma.alpha()).unwrap();
    let cfg = ShotConfig::with_seed(8008);
    let counts: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sample_coeffs_indexed(&gamma, &basis, &cfg, i).unwrap().n_terms_pos as f64)
        .collect();
    let s = scalar_stats(&counts).unwrap();
    let target = 45.0;
    let z45 = (s.mean - target).abs() / s.stderr;
    let z_cut = (s.mean - cfg.gamma_cutoff).abs() / s.stderr;
    let length_ok = z45 <= 5.0;

    let part = center(&make_gamma(1.0, 1.0).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let lo = ShotConfig::with_seed(seed);
        let hi = ShotConfig {
            gamma_cutoff: 60.0,
            ..lo.clone()
        };
        let a = sample_coeffs_finite_variation(&part, &basis, &lo).unwrap();
        let b = sample_coeffs_finite_variation(&part, &basis, &hi).unwrap();
        for (x, y) in a.z.iter().zip(&b.z) {
            worst = worst.max((x - y).abs());
        }
    }
    let stable = worst < 1e-12;
    outcome(
        length_ok && stable,
        format!(
            "mean length {:.4} (SE {:.4}): {z45:.2} SE from 45 T c (<= 5), {z_cut:.2} SE from {} T c; cutoff 45.47 -> 60 max change {worst:.1e} (< 1e-12)",
            s.mean, s.stderr, cfg.gamma_cutoff
        ),
    )
}

fn c9_e1() -> Outcome {
    let table = e1_inverse();
    let x_lo = table.invert(E1_INVERSE_DOMAIN_HI);
    let x_hi = table.invert(E1_INVERSE_DOMAIN_LO);
    let n = 20_000;
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        let x = x_lo * (x_hi / x_lo).powf(i as f64 / n as f64);
        let back = table.invert(exp_integral_e1(x).unwrap());
        worst = worst.max((back - x).abs() / x.max(1.0));
    }
    let fresh = build_e1_inverse(E1_INVERSE_DOMAIN_LO, E1_INVERSE_DOMAIN_HI, E1_INVERSE_POINTS).unwrap();
    let gap = fresh.max_value_gap();
    outcome(
        worst <= 1e-8 && fresh.len() == 200_000 && gap <= E1_INVERSE_MAX_GAP,
        format!(
            "x in [{x_lo:.3e}, {x_hi:.3}]: max error {worst:.2e} (<= 1e-8); {} points, max spacing {gap:.2e} (<= 0.00231)",
            fresh.len()
        ),
    )
}

fn c10_gibbs() -> Outcome {
    let model = make_cp_exponential(2.0, 1.0).unwrap();
    let split = model.split().unwrap();
    let d = 500;
    let horizon = 1.0;
    let basis = KleBasis::new(horizon, d, model.alpha()).unwrap();
    let cfg = ShotConfig {
        retain_record: true,
        ..ShotConfig::with_seed(1010)
    };
    let half_window = 0.05;
    // first sample with an isolated jump of size >= 1 away from the ends
    let (sample, jump_time) = (0..10_000u64)
        .find_map(|i| {
            let s = sample_coeffs_indexed(&split, &basis, &cfg, i).unwrap();
            let rec = s.shot_record.as_ref()?.pos.as_ref()?;
            let times: Vec<f64> = rec.arrivals.iter().map(|a| a.u * horizon).collect();
            let big = rec.jumps.iter().zip(&times).find(|(x, t)| {
                **x >= 1.0
                    && (0.2..0.8).contains(*t)
                    && times.iter().filter(|o| (*o - *t).abs() < 2.0 * half_window).count() == 1
            })?;
            Some((s.clone(), *big.1))
        })
        .expect("a path with an isolated large jump");
    let rec = sample.shot_record.as_ref().unwrap().pos.as_ref().unwrap();
    let exact = |t: f64| -> f64 {
        rec.arrivals
            .iter()
            .zip(&rec.jumps)
            .filter(|(a, _)| a.u * horizon <= t)
            .map(|(_, x)| x)
            .sum()
    };
    let grid: Vec<f64> = (0..=4000)
        .map(|i| jump_time - half_window + 2.0 * half_window * i as f64 / 4000.0)
        .collect();
    let level = grid.iter().map(|&t| exact(t)).fold(f64::NEG_INFINITY, f64::max);
    let peak = |mode| {
        reconstruct(&sample.z, &basis, &grid, mode, split.mean_rate)
            .unwrap()
            .values
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let over_s = peak(SumMode::Partial) - level;
    let over_c = peak(SumMode::Cesaro) - level;
    outcome(
        over_s > over_c,
        format!(
            "sample {} jump at t={jump_time:.4}: overshoot partial {over_s:.4} > Cesaro {over_c:.4}",
            sample.sample_index
        ),
    )
}

fn c11_extension() -> Outcome {
    let model = vg();
    let cfg = ShotConfig {
        retain_record: true,
        ..ShotConfig::with_seed(1111)
    };
    let b5 = KleBasis::new(1.0, 5, model.alpha()).unwrap();
    let b25 = KleBasis::new(1.0, 25, model.alpha()).unwrap();
    let mut mismatched = 0;
    let samples = 500;
    for i in 0..samples {
        let grown = extend_dimension(&sample_coeffs_indexed(&model, &b5, &cfg, i).unwrap(), 25).unwrap();
        let fresh = sample_coeffs_indexed(&model, &b25, &cfg, i).unwrap();
        mismatched += grown.z.iter().zip(&fresh.z).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    outcome(mismatched == 0, format!("{samples} samples, {mismatched} coefficients differ in bits"))
}

/// Criteria that cannot pass as stated, with the reason shown next to FAIL.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "8",
    "the stopping rule Gamma_i > 45.47 T c makes the length Poisson(45.47 T c); 0.47 T c is ~7 SE at N=10^4",
)];

fn main() -> ExitCode {
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1", "variance capture", Box::new(c1_variance_capture)),
        ("2", "moment contract", Box::new(c2_moments)),
        ("3", "characteristic function", Box::new(c3_characteristic_function)),
        ("4", "dependence of squares", Box::new(c4_dependence)),
        ("5", "terminal KS, full", Box::new(|| c5_distribution(3000, 10_000, 5005))),
        ("5s", "terminal KS, smoke", Box::new(|| c5_distribution(300, 2000, 5006))),
        ("6", "brute-force equivalence", Box::new(c6_brute_force)),
        ("7", "Monte Carlo mean", Box::new(c7_mc_mean)),
        ("8", "truncation fidelity", Box::new(c8_truncation)),
        ("9", "E1 machinery", Box::new(c9_e1)),
        ("10", "Gibbs mitigation", Box::new(c10_gibbs)),
        ("11", "incremental dimension", Box::new(c11_extension)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (id, name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| k == id);
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id} ({name}) [{secs:.1}s]: {}", o.detail);
        match (o.passed, known) {
            (false, Some((_, why))) => println!("     known failure: {why}"),
            (false, None) => unexpected.push(*id),
            _ => {}
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

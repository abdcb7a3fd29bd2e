//! Deterministic parallel Monte Carlo.
//!
//! Sample indices are cut into fixed chunks of [`CHUNK_SIZE`]; each chunk is
//! folded sequentially, and chunk results are merged in index order. The
//! output therefore does not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{KleError, Result};
use crate::kle_basis::{BasisTable, KleBasis, SumMode};
use crate::levy_models::SplitModel;
use crate::shot_noise::{sample_coeffs_indexed, CoefficientSample, ShotConfig};

pub const CHUNK_SIZE: usize = 1024;

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(-other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum - self.comp
    }
}

/// Folds `step` over `0..n` chunk by chunk and merges chunks in order.
pub fn chunked_fold<A, I, S, M>(n: usize, init: I, step: S, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let n_chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            let lo = c * CHUNK_SIZE;
            let hi = (lo + CHUNK_SIZE).min(n);
            for i in lo..hi {
                step(&mut acc, i as u64)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<A>>>()?;
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    Ok(total)
}

/// Samples `0..n` of `Z^(d)`, in index order.
pub fn collect_samples(
    model: &SplitModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
    n: usize,
) -> Result<Vec<CoefficientSample>> {
    cfg.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_coeffs_indexed(model, basis, cfg, i))
        .collect()
}

/// Sample mean, variance and standard error of a scalar sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

pub fn scalar_stats(xs: &[f64]) -> Result<ScalarStats> {
    let n = xs.len();
    if n < 2 {
        return Err(KleError::InsufficientSamples { need: 2, got: n });
    }
    let mut s = KahanSum::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n as f64;
    let mut q = KahanSum::default();
    xs.iter().for_each(|&x| q.add((x - mean) * (x - mean)));
    let variance = q.value() / (n - 1) as f64;
    Ok(ScalarStats {
        n,
        mean,
        variance,
        stderr: (variance / n as f64).sqrt(),
    })
}

/// Per-coordinate means and variances with their standard errors, and the
/// correlation matrix, of a set of coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance: Vec<f64>,
    /// `sqrt((m4 - var^2) / n)`.
    pub variance_se: Vec<f64>,
    /// Row-major `d x d`.
    pub correlation: Vec<f64>,
}

impl CoefficientMoments {
    pub fn from_samples(samples: &[CoefficientSample]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(KleError::InsufficientSamples { need: 2, got: n });
        }
        let d = samples[0].d();
        let mut mean = vec![0.0; d];
        for k in 0..d {
            let mut s = KahanSum::default();
            samples.iter().for_each(|z| s.add(z.z[k]));
            mean[k] = s.value() / n as f64;
        }
        let mut cov = vec![0.0; d * d];
        let mut m4 = vec![0.0; d];
        for j in 0..d {
            for k in j..d {
                let mut s = KahanSum::default();
                samples
                    .iter()
                    .for_each(|z| s.add((z.z[j] - mean[j]) * (z.z[k] - mean[k])));
                cov[j * d + k] = s.value() / (n - 1) as f64;
                cov[k * d + j] = cov[j * d + k];
            }
            let mut s = KahanSum::default();
            samples.iter().for_each(|z| s.add((z.z[j] - mean[j]).powi(4)));
            m4[j] = s.value() / n as f64;
        }
        let variance: Vec<f64> = (0..d).map(|k| cov[k * d + k]).collect();
        let correlation = (0..d * d)
            .map(|i| cov[i] / (variance[i / d] * variance[i % d]).sqrt())
            .collect();
        Ok(Self {
            n,
            mean_se: variance.iter().map(|v| (v / n as f64).sqrt()).collect(),
            variance_se: variance
                .iter()
                .zip(&m4)
                .map(|(v, m)| ((m - v * v).max(0.0) / n as f64).sqrt())
                .collect(),
            mean,
            variance,
            correlation,
        })
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    pub fn corr(&self, j: usize, k: usize) -> f64 {
        self.correlation[j * self.d() + k]
    }
}

/// Sample covariance of `a` and `b` with its standard error.
pub fn covariance_with_se(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return Err(KleError::InsufficientSamples { need: 2, got: n.min(b.len()) });
    }
    let sa = scalar_stats(a)?;
    let sb = scalar_stats(b)?;
    let prods: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - sa.mean) * (y - sb.mean))
        .collect();
    let p = scalar_stats(&prods)?;
    Ok((p.mean * n as f64 / (n - 1) as f64, p.stderr))
}

/// One row of a Monte Carlo mean study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McMeanRow {
    pub t: f64,
    pub mc_mean: f64,
    pub expected: f64,
    pub abs_err: f64,
    pub stderr: f64,
}

#[derive(Clone)]
struct GridAcc {
    sum: Vec<KahanSum>,
    sumsq: Vec<KahanSum>,
}

/// Means of `S^(d)_t` (or `C^(d)_t`) on `grid` for every `d` in `d_list`.
///
/// Coefficients are drawn once at the largest dimension; smaller dimensions
/// use prefixes, which coincide with fresh draws.
pub fn mc_mean_study(
    model: &SplitModel,
    horizon: f64,
    d_list: &[usize],
    cfg: &ShotConfig,
    grid: &[f64],
    n: usize,
    mode: SumMode,
) -> Result<Vec<(usize, Vec<McMeanRow>)>> {
    cfg.validate()?;
    if n < 2 {
        return Err(KleError::InsufficientSamples { need: 2, got: n });
    }
    let d_max = *d_list
        .iter()
        .max()
        .ok_or_else(|| KleError::Parameter("d_list is empty".into()))?;
    let basis = KleBasis::new(horizon, d_max, model.alpha())?;
    let table = BasisTable::new(&basis, grid)?;
    let g = grid.len();
    let nd = d_list.len();
    let init = || GridAcc {
        sum: vec![KahanSum::default(); nd * g],
        sumsq: vec![KahanSum::default(); nd * g],
    };
    let acc = chunked_fold(
        n,
        init,
        |acc, i| {
            let s = sample_coeffs_indexed(model, &basis, cfg, i)?;
            let mut path = vec![0.0; g];
            for (di, &d) in d_list.iter().enumerate() {
                table.evaluate_into(&s.z[..d], mode, model.mean_rate, &mut path)?;
                for (j, &v) in path.iter().enumerate() {
                    acc.sum[di * g + j].add(v);
                    acc.sumsq[di * g + j].add(v * v);
                }
            }
            Ok(())
        },
        |total, part| {
            for (a, b) in total.sum.iter_mut().zip(&part.sum) {
                a.merge(b);
            }
            for (a, b) in total.sumsq.iter_mut().zip(&part.sumsq) {
                a.merge(b);
            }
        },
    )?;
    let nf = n as f64;
    Ok(d_list
        .iter()
        .enumerate()
        .map(|(di, &d)| {
            let rows = grid
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    let mean = acc.sum[di * g + j].value() / nf;
                    let var = ((acc.sumsq[di * g + j].value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
                    let expected = model.mean_rate * t;
                    McMeanRow {
                        t,
                        mc_mean: mean,
                        expected,
                        abs_err: (mean - expected).abs(),
                        stderr: (var / nf).sqrt(),
                    }
                })
                .collect();
            (d, rows)
        })
        .collect())
}

/// `S^(d)_t` at a single time for samples `0..n`.
pub fn sample_path_values(
    model: &SplitModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
    t: f64,
    n: usize,
    mode: SumMode,
    mean_rate: f64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let table = BasisTable::new(basis, &[t])?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_coeffs_indexed(model, basis, cfg, i)?;
            let mut v = [0.0];
            table.evaluate_into(&s.z, mode, mean_rate, &mut v)?;
            Ok(v[0])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kle_basis::uniform_grid;
    use crate::levy_models::{make_brownian, make_variance_gamma};

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
        let mut a = KahanSum::default();
        a.add(1e16);
        let mut b = KahanSum::default();
        b.add(1.0);
        a.merge(&b);
        assert_eq!(a.value(), 1e16 + 1.0);
    }

    #[test]
    fn fold_is_independent_of_thread_count() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                chunked_fold(
                    5000,
                    KahanSum::default,
                    |acc, i| {
                        acc.add(1.0 / (1.0 + i as f64));
                        Ok(())
                    },
                    |a, b| a.merge(&b),
                )
                .unwrap()
                .value()
            })
        };
        assert_eq!(run(1).to_bits(), run(3).to_bits());
    }

    #[test]
    fn scalar_stats_basics() {
        let s = scalar_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(scalar_stats(&[1.0]).is_err());
    }

    #[test]
    fn gaussian_coefficient_variance_matches_eigenvalue() {
        let split = make_brownian(1.0).unwrap().split().unwrap();
        let basis = KleBasis::new(1.0, 1, 1.0).unwrap();
        let samples = collect_samples(&split, &basis, &ShotConfig::with_seed(4), 1_000_000).unwrap();
        let m = CoefficientMoments::from_samples(&samples).unwrap();
        let lambda = basis.eigenvalue(1);
        assert!((m.variance[0] - lambda).abs() <= 4.0 * m.variance_se[0]);
    }

    #[test]
    fn brownian_mc_mean_is_zero() {
        let split = make_brownian(1.0).unwrap().split().unwrap();
        let grid = uniform_grid(1.0, 11);
        let out = mc_mean_study(&split, 1.0, &[5, 10], &ShotConfig::with_seed(1), &grid, 4000, SumMode::Partial).unwrap();
        assert_eq!(out.len(), 2);
        for (_, rows) in &out {
            for r in rows {
                assert_eq!(r.expected, 0.0);
                assert!(r.abs_err <= 5.0 * r.stderr + 1e-15);
            }
        }
    }

    #[test]
    fn vg_mc_mean_tracks_half_t() {
        let vg = make_variance_gamma(1.0, 1.0, 1.0, 2.0).unwrap();
        let grid = uniform_grid(1.0, 6);
        let out = mc_mean_study(&vg, 1.0, &[5], &ShotConfig::with_seed(2), &grid, 4000, SumMode::Cesaro).unwrap();
        for r in &out[0].1 {
            assert!((r.expected - 0.5 * r.t).abs() < 1e-15);
            assert!(r.abs_err <= 5.0 * r.stderr + 1e-12);
        }
    }
}

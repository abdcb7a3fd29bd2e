//! Deterministic KLE machinery on `[0, T]`.
//!
//! For `X` with variance rate `alpha` the covariance operator has eigenpairs
//!
//! ```text
//! lambda_k = alpha T^2 / (pi^2 (k - 1/2)^2)
//! e_k(t)   = sqrt(2/T) sin(pi (k - 1/2) t / T)
//! ```
//!
//! and a jump of size `x` at time `t` moves coefficient `k` by
//! `x u_k(t)`, where `u_k(t) = \int_t^T e_k(s) ds`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{KleError, Result};

/// Horizon, truncation dimension and variance rate of a KLE.
#[derive(Debug, Clone, PartialEq)]
pub struct KleBasis {
    horizon: f64,
    dim: usize,
    alpha: f64,
    // sqrt(2T) / (pi (k - 1/2)), the amplitude of u_k
    u_scale: Vec<f64>,
}

fn half_odd(k: usize) -> f64 {
    k as f64 - 0.5
}

impl KleBasis {
    pub fn new(horizon: f64, dim: usize, alpha: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(KleError::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        if dim == 0 {
            return Err(KleError::Parameter("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(KleError::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        let amplitude = (2.0 * horizon).sqrt() / PI;
        let u_scale = (1..=dim).map(|k| amplitude / half_odd(k)).collect();
        Ok(Self {
            horizon,
            dim,
            alpha,
            u_scale,
        })
    }

    /// Same horizon and variance rate, different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.horizon, dim, self.alpha)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(KleError::Domain(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )))
        }
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k >= 1, "eigenvalues are indexed from 1");
        let h = half_odd(k);
        self.alpha * self.horizon * self.horizon / (PI * PI * h * h)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.dim).map(|k| self.eigenvalue(k)).collect()
    }

    pub fn eigenfunction(&self, k: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(eigenfunction_unchecked(self.horizon, k, t))
    }

    /// `u_k(t) = \int_t^T e_k(s) ds = sqrt(2T) cos(pi (k-1/2) t/T) / (pi (k-1/2))`.
    pub fn u(&self, k: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let h = half_odd(k);
        Ok((2.0 * self.horizon).sqrt() * (PI * h * t / self.horizon).cos() / (PI * h))
    }

    /// The map `f(x, t) = x (u_1(t), ..., u_d(t))` pushing `nu x Leb` onto
    /// the Levy measure of `Z^(d)`.
    pub fn f_map(&self, x: f64, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let mut out = vec![0.0; self.dim];
        self.add_f_map(x, t / self.horizon, &mut out);
        Ok(out)
    }

    /// Adds `f(x, T v)` to `out[..]`, for `v` in `[0, 1]`.
    ///
    /// The cosines come from a rotation recurrence in four interleaved
    /// chains; the value for each `k` depends only on `(v, k)`, never on
    /// `out.len()`, so prefixes of longer vectors agree bit for bit.
    pub(crate) fn add_f_map(&self, x: f64, v: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.dim);
        let d = out.len();
        if d == 0 || x == 0.0 {
            return;
        }
        let (s1, c1) = (0.5 * PI * v).sin_cos();
        let (sr, cr) = (PI * v).sin_cos();
        // chain j starts at k = j + 1, i.e. angle (j + 1/2) pi v
        let mut c = [c1, 0.0, 0.0, 0.0];
        let mut s = [s1, 0.0, 0.0, 0.0];
        for j in 1..4 {
            c[j] = c[j - 1] * cr - s[j - 1] * sr;
            s[j] = s[j - 1] * cr + c[j - 1] * sr;
        }
        // rotation by 4 pi v per step
        let (c2, s2) = (cr * cr - sr * sr, 2.0 * sr * cr);
        let (c4, s4) = (c2 * c2 - s2 * s2, 2.0 * s2 * c2);
        let full = d / 4;
        let scale = &self.u_scale[..d];
        for b in 0..full {
            let base = 4 * b;
            for j in 0..4 {
                out[base + j] += x * scale[base + j] * c[j];
            }
            for j in 0..4 {
                let cn = c[j] * c4 - s[j] * s4;
                s[j] = s[j] * c4 + c[j] * s4;
                c[j] = cn;
            }
        }
        for j in 0..d - 4 * full {
            let k = 4 * full + j;
            out[k] += x * scale[k] * c[j];
        }
    }

    /// Coefficient drift for a `h = 0` process drift `a`:
    /// `a_k = a (-1)^{k+1} sqrt(2) T^{3/2} / (pi^2 (k-1/2)^2)`.
    pub fn drift_vector(&self, a: f64) -> Vec<f64> {
        let t32 = self.horizon.powf(1.5);
        (1..=self.dim)
            .map(|k| {
                let h = half_odd(k);
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                a * sign * std::f64::consts::SQRT_2 * t32 / (PI * PI * h * h)
            })
            .collect()
    }

    /// Variances of the coefficients of `sigma W`: `sigma^2 T^2 / (pi^2 (k-1/2)^2)`.
    pub fn gaussian_coefficient_variances(&self, sigma2: f64) -> Vec<f64> {
        (1..=self.dim)
            .map(|k| {
                let h = half_odd(k);
                sigma2 * self.horizon * self.horizon / (PI * PI * h * h)
            })
            .collect()
    }
}

fn eigenfunction_unchecked(horizon: f64, k: usize, t: f64) -> f64 {
    (2.0 / horizon).sqrt() * (PI * half_odd(k) * t / horizon).sin()
}

/// Fraction of the total variance `alpha T^2 / 2` carried by the first `d`
/// terms; independent of `alpha` and `T`.
pub fn variance_capture(d: usize) -> f64 {
    let sum: f64 = (1..=d).map(|k| 1.0 / (half_odd(k) * half_odd(k))).sum();
    2.0 / (PI * PI) * sum
}

/// Partial sums `S^(d)` or their Cesaro means `C^(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMode {
    Partial,
    Cesaro,
}

/// A reconstructed path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathApproximation {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub mode: SumMode,
    pub dim: usize,
    /// `mean_rate * t`, already included in `values`.
    pub mean_correction: Vec<f64>,
}

fn mode_weight(mode: SumMode, k: usize, d: usize) -> f64 {
    match mode {
        SumMode::Partial => 1.0,
        // (1/d) sum_{j<=d} S^(j) = sum_k (1 - (k-1)/d) Z_k e_k
        SumMode::Cesaro => 1.0 - (k - 1) as f64 / d as f64,
    }
}

/// `sum_k w_k Z_k e_k(t) + mean_rate t` on `grid`, with `w_k = 1` for
/// partial sums and `w_k = 1 - (k-1)/d` for Cesaro means.
pub fn reconstruct(
    z: &[f64],
    basis: &KleBasis,
    grid: &[f64],
    mode: SumMode,
    mean_rate: f64,
) -> Result<PathApproximation> {
    if z.len() != basis.dim() {
        return Err(KleError::Dimension {
            expected: basis.dim(),
            got: z.len(),
        });
    }
    let table = BasisTable::new(basis, grid)?;
    let mut values = vec![0.0; grid.len()];
    table.evaluate_into(z, mode, mean_rate, &mut values)?;
    Ok(PathApproximation {
        grid: grid.to_vec(),
        values,
        mode,
        dim: z.len(),
        mean_correction: grid.iter().map(|&t| mean_rate * t).collect(),
    })
}

/// Eigenfunctions tabulated on a fixed grid, for reconstructing many paths.
#[derive(Debug, Clone)]
pub struct BasisTable {
    grid: Vec<f64>,
    dim: usize,
    // row-major: values[i * dim + (k - 1)] = e_k(grid[i])
    values: Vec<f64>,
}

impl BasisTable {
    pub fn new(basis: &KleBasis, grid: &[f64]) -> Result<Self> {
        for &t in grid {
            basis.check_time(t)?;
        }
        let dim = basis.dim();
        let mut values = Vec::with_capacity(grid.len() * dim);
        for &t in grid {
            values.extend((1..=dim).map(|k| eigenfunction_unchecked(basis.horizon(), k, t)));
        }
        Ok(Self {
            grid: grid.to_vec(),
            dim,
            values,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Evaluates the expansion of `z` (any prefix length up to the table
    /// dimension) into `out`.
    pub fn evaluate_into(&self, z: &[f64], mode: SumMode, mean_rate: f64, out: &mut [f64]) -> Result<()> {
        let d = z.len();
        if d == 0 || d > self.dim {
            return Err(KleError::Dimension {
                expected: self.dim,
                got: d,
            });
        }
        if out.len() != self.grid.len() {
            return Err(KleError::Dimension {
                expected: self.grid.len(),
                got: out.len(),
            });
        }
        let weighted: Vec<f64> = match mode {
            SumMode::Partial => z.to_vec(),
            SumMode::Cesaro => z
                .iter()
                .enumerate()
                .map(|(i, &zk)| zk * mode_weight(mode, i + 1, d))
                .collect(),
        };
        for (i, (slot, &t)) in out.iter_mut().zip(&self.grid).enumerate() {
            let row = &self.values[i * self.dim..i * self.dim + d];
            let s: f64 = row.iter().zip(&weighted).map(|(e, w)| e * w).sum();
            *slot = s + mean_rate * t;
        }
        Ok(())
    }
}

/// `n` equally spaced points covering `[0, T]`, both ends included.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    horizon
                } else {
                    horizon * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

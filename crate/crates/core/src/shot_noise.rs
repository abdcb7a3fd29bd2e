//! Shot-noise sampling of the coefficient vector `Z^(d)`.
//!
//! Each positive-jump part is the series `sum_i f(g^{-1}(Gamma_i / T), T U_i)`
//! over unit-rate Poisson arrivals `Gamma_i` with uniform marks `U_i`, plus
//! a drift vector that either carries the `h = 0` drift or subtracts the
//! centering term `C`. A composite model is `Z+ - Z- + G`.
//!
//! Randomness: every sample `index` of a part reads from
//! `ChaCha8Rng::seed_from_u64(seed ^ label)` on stream `index`, with one
//! fixed label per part. Arrivals draw an `Exp(1)` increment and then a
//! uniform per term; Gaussian coordinates are drawn in order of `k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{KleError, Result};
use crate::kle_basis::KleBasis;
use crate::levy_models::{Cutoff, JumpDensity, LevyModel, SplitModel, Truncation};

pub const POS_STREAM_LABEL: u64 = 0x9E37_79B9_7F4A_7C15;
pub const NEG_STREAM_LABEL: u64 = 0xC2B2_AE3D_27D4_EB4F;
pub const GAUSS_STREAM_LABEL: u64 = 0x1656_67B1_9E37_79F9;

/// Independent random sub-streams of one coefficient sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Pos,
    Neg,
    Gauss,
}

impl Part {
    pub fn label(self) -> u64 {
        match self {
            Part::Pos => POS_STREAM_LABEL,
            Part::Neg => NEG_STREAM_LABEL,
            Part::Gauss => GAUSS_STREAM_LABEL,
        }
    }
}

/// Generator for one part of sample `index`.
pub fn part_rng(seed: u64, part: Part, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ part.label());
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotConfig {
    pub seed: u64,
    /// Gamma-type series stop once `Gamma_i / (T c)` exceeds this.
    pub gamma_cutoff: f64,
    /// Other infinite-activity series stop once jumps fall below this.
    pub jump_floor: f64,
    /// Largest admissible number of series terms per part.
    pub max_terms: usize,
    pub centering_quadrature_rtol: f64,
    /// Keep the arrivals so the sample can later be extended in `d`.
    pub retain_record: bool,
}

impl Default for ShotConfig {
    fn default() -> Self {
        let t = Truncation::default();
        Self {
            seed: 0,
            gamma_cutoff: t.gamma_cutoff,
            jump_floor: t.jump_floor,
            max_terms: 10_000_000,
            centering_quadrature_rtol: 1e-10,
            retain_record: false,
        }
    }
}

impl ShotConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            gamma_cutoff: self.gamma_cutoff,
            jump_floor: self.jump_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_cutoff > 0.0) {
            return Err(KleError::Parameter(format!(
                "gamma_cutoff must be positive, got {}",
                self.gamma_cutoff
            )));
        }
        if !(self.jump_floor > 0.0) {
            return Err(KleError::Parameter("jump_floor must be positive".into()));
        }
        if self.max_terms == 0 {
            return Err(KleError::Parameter("max_terms must be at least 1".into()));
        }
        if !(self.centering_quadrature_rtol > 0.0) {
            return Err(KleError::Parameter(
                "centering_quadrature_rtol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A Poisson arrival `Gamma_i` with its uniform mark `U_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub gamma: f64,
    pub u: f64,
}

/// Unit-rate Poisson arrival times with independent uniform marks.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    rng: ChaCha8Rng,
    gamma: f64,
    produced: usize,
    cap: usize,
}

impl ArrivalStream {
    pub fn from_rng(rng: ChaCha8Rng, cap: usize) -> Self {
        Self {
            rng,
            gamma: 0.0,
            produced: 0,
            cap,
        }
    }

    pub fn produced(&self) -> usize {
        self.produced
    }

    pub fn cap(&self) -> usize {
        self.cap
    }
}

impl Iterator for ArrivalStream {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        if self.produced >= self.cap {
            return None;
        }
        let e: f64 = self.rng.sample(Exp1);
        self.gamma += e;
        let u: f64 = self.rng.random();
        self.produced += 1;
        Some(Arrival {
            gamma: self.gamma,
            u,
        })
    }
}

/// Reproducible stream of at most `cap` arrivals.
pub fn arrival_stream(seed: u64, cap: usize) -> ArrivalStream {
    ArrivalStream::from_rng(ChaCha8Rng::seed_from_u64(seed), cap)
}

/// Jumps of one part and the scalar whose drift vector completes it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartRecord {
    pub arrivals: Vec<Arrival>,
    /// `g^{-1}(Gamma_i / T)` for each arrival.
    pub jumps: Vec<f64>,
    /// `a` for the `h = 0` route, `a - \int_{x_R}^\infty x pi` when centered.
    pub drift: f64,
}

/// Everything needed to recompute a sample at another dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub horizon: f64,
    pub pos: Option<PartRecord>,
    pub neg: Option<PartRecord>,
    pub gaussian_sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub z: Vec<f64>,
    pub n_terms_pos: usize,
    pub n_terms_neg: usize,
    pub seed: u64,
    pub sample_index: u64,
    pub shot_record: Option<ShotRecord>,
}

impl CoefficientSample {
    pub fn d(&self) -> usize {
        self.z.len()
    }
}

fn assemble(record: &PartRecord, basis: &KleBasis) -> Vec<f64> {
    let mut z = vec![0.0; basis.dim()];
    for (arrival, &x) in record.arrivals.iter().zip(&record.jumps) {
        basis.add_f_map(x, arrival.u, &mut z);
    }
    for (zk, ak) in z.iter_mut().zip(basis.drift_vector(record.drift)) {
        *zk += ak;
    }
    z
}

fn collect_jumps(
    density: &dyn JumpDensity,
    horizon: f64,
    cfg: &ShotConfig,
    rng: ChaCha8Rng,
) -> Result<(Vec<Arrival>, Vec<f64>)> {
    let radius = horizon * density.truncation_level(&cfg.truncation());
    let mut arrivals = Vec::new();
    let mut jumps = Vec::new();
    for arrival in ArrivalStream::from_rng(rng, usize::MAX) {
        if arrival.gamma > radius {
            break;
        }
        if arrivals.len() == cfg.max_terms {
            return Err(KleError::MaxTerms {
                max_terms: cfg.max_terms,
                last_arrival: arrival.gamma,
            });
        }
        jumps.push(density.tail_inverse(arrival.gamma / horizon));
        arrivals.push(arrival);
    }
    Ok((arrivals, jumps))
}

fn single_part(model: &LevyModel) -> Result<Option<&dyn JumpDensity>> {
    let triple = model.triple();
    if triple.neg.is_some() || triple.sigma2 != 0.0 {
        return Err(KleError::Parameter(format!(
            "model '{}' is not a pure positive-jump process; split it first",
            model.name()
        )));
    }
    Ok(model.tail_pos())
}

/// `sum_i f(g^{-1}(Gamma_i/T), T U_i)` plus the drift vector of the `h = 0`
/// drift. Requires Condition B.
fn part_finite_variation(
    model: &LevyModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
    rng: ChaCha8Rng,
) -> Result<PartRecord> {
    let density = single_part(model)?;
    let drift = model.triple().with_cutoff(Cutoff::H0)?.drift;
    let (arrivals, jumps) = match density {
        Some(d) => collect_jumps(d, basis.horizon(), cfg, rng)?,
        None => (Vec::new(), Vec::new()),
    };
    Ok(PartRecord {
        arrivals,
        jumps,
        drift,
    })
}

/// The series minus the centering term `C(R)` at the truncation radius
/// `R = T level`, plus the drift vector of the `h = 1` drift.
fn part_centered(
    model: &LevyModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
    rng: ChaCha8Rng,
) -> Result<PartRecord> {
    let density = single_part(model)?;
    let triple = model.triple();
    let h1_drift = match triple.cutoff {
        Cutoff::H1 => triple.drift,
        Cutoff::H0 => triple.with_cutoff(Cutoff::H1)?.drift,
    };
    let Some(density) = density else {
        return Ok(PartRecord {
            arrivals: Vec::new(),
            jumps: Vec::new(),
            drift: h1_drift,
        });
    };
    let (arrivals, jumps) = collect_jumps(density, basis.horizon(), cfg, rng)?;
    let x_radius = density.tail_inverse(density.truncation_level(&cfg.truncation()));
    let compensator = density.upper_mean(x_radius, cfg.centering_quadrature_rtol)?;
    Ok(PartRecord {
        arrivals,
        jumps,
        drift: h1_drift - compensator,
    })
}

fn finish_single(record: PartRecord, basis: &KleBasis, cfg: &ShotConfig) -> CoefficientSample {
    let z = assemble(&record, basis);
    CoefficientSample {
        z,
        n_terms_pos: record.jumps.len(),
        n_terms_neg: 0,
        seed: cfg.seed,
        sample_index: 0,
        shot_record: cfg.retain_record.then(|| ShotRecord {
            horizon: basis.horizon(),
            pos: Some(record),
            neg: None,
            gaussian_sigma2: 0.0,
        }),
    }
}

/// Positive-jump model with Condition B, via its `h = 0` representation.
pub fn sample_coeffs_finite_variation(
    model: &LevyModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
) -> Result<CoefficientSample> {
    cfg.validate()?;
    let record = part_finite_variation(model, basis, cfg, part_rng(cfg.seed, Part::Pos, 0))?;
    Ok(finish_single(record, basis, cfg))
}

/// Positive-jump model via the centered series `sum H - C(R)`.
pub fn sample_coeffs_centered(
    model: &LevyModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
) -> Result<CoefficientSample> {
    cfg.validate()?;
    let record = part_centered(model, basis, cfg, part_rng(cfg.seed, Part::Pos, 0))?;
    Ok(finish_single(record, basis, cfg))
}

fn sample_part(model: &LevyModel, basis: &KleBasis, cfg: &ShotConfig, rng: ChaCha8Rng) -> Result<PartRecord> {
    match model.triple().cutoff {
        Cutoff::H0 => part_finite_variation(model, basis, cfg, rng),
        Cutoff::H1 => part_centered(model, basis, cfg, rng),
    }
}

fn gaussian_coords(sigma2: f64, basis: &KleBasis, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = part_rng(seed, Part::Gauss, index);
    basis
        .gaussian_coefficient_variances(sigma2)
        .into_iter()
        .map(|v| {
            let n: f64 = rng.sample(StandardNormal);
            v.sqrt() * n
        })
        .collect()
}

fn combine(pos: Option<&[f64]>, neg: Option<&[f64]>, gauss: Option<&[f64]>, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let p = pos.map_or(0.0, |v| v[k]);
            let n = neg.map_or(0.0, |v| v[k]);
            let g = gauss.map_or(0.0, |v| v[k]);
            (p - n) + g
        })
        .collect()
}

/// Sample `index` of `Z^(d) = Z+ - Z- + G` for a split model.
pub fn sample_coeffs_indexed(
    model: &SplitModel,
    basis: &KleBasis,
    cfg: &ShotConfig,
    index: u64,
) -> Result<CoefficientSample> {
    let pos = match &model.pos {
        Some(m) => Some(sample_part(m, basis, cfg, part_rng(cfg.seed, Part::Pos, index))?),
        None => None,
    };
    let neg = match &model.neg {
        Some(m) => Some(sample_part(m, basis, cfg, part_rng(cfg.seed, Part::Neg, index))?),
        None => None,
    };
    let gauss = (model.gaussian_sigma2 > 0.0)
        .then(|| gaussian_coords(model.gaussian_sigma2, basis, cfg.seed, index));
    let zp = pos.as_ref().map(|r| assemble(r, basis));
    let zn = neg.as_ref().map(|r| assemble(r, basis));
    let z = combine(zp.as_deref(), zn.as_deref(), gauss.as_deref(), basis.dim());
    Ok(CoefficientSample {
        z,
        n_terms_pos: pos.as_ref().map_or(0, |r| r.jumps.len()),
        n_terms_neg: neg.as_ref().map_or(0, |r| r.jumps.len()),
        seed: cfg.seed,
        sample_index: index,
        shot_record: cfg.retain_record.then(|| ShotRecord {
            horizon: basis.horizon(),
            pos,
            neg,
            gaussian_sigma2: model.gaussian_sigma2,
        }),
    })
}

/// Sample 0 of `Z^(d)` for a split model.
pub fn sample_coeffs(model: &SplitModel, basis: &KleBasis, cfg: &ShotConfig) -> Result<CoefficientSample> {
    cfg.validate()?;
    sample_coeffs_indexed(model, basis, cfg, 0)
}

/// Grows a sample to `new_d` coordinates from its retained arrivals.
///
/// The result equals a fresh draw at `new_d` with the same seed and index,
/// bit for bit.
pub fn extend_dimension(sample: &CoefficientSample, new_d: usize) -> Result<CoefficientSample> {
    let record = sample.shot_record.as_ref().ok_or(KleError::MissingShotRecord)?;
    if new_d < sample.d() {
        return Err(KleError::Dimension {
            expected: sample.d(),
            got: new_d,
        });
    }
    if new_d == sample.d() {
        return Ok(sample.clone());
    }
    let basis = KleBasis::new(record.horizon, new_d, 1.0)?;
    let zp = record.pos.as_ref().map(|r| assemble(r, &basis));
    let zn = record.neg.as_ref().map(|r| assemble(r, &basis));
    let gauss = (record.gaussian_sigma2 > 0.0)
        .then(|| gaussian_coords(record.gaussian_sigma2, &basis, sample.seed, sample.sample_index));
    let full = combine(zp.as_deref(), zn.as_deref(), gauss.as_deref(), new_d);
    let mut z = sample.z.clone();
    z.extend_from_slice(&full[sample.d()..]);
    Ok(CoefficientSample {
        z,
        ..sample.clone()
    })
}

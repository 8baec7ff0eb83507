//! Expected and sampled coincidence counts.
//!
//! The signal rate of an outcome is `pair_rate · weight · Tr[ρP]`. Accidental
//! coincidences are uncorrelated, so their rate in a cell follows the product
//! of the single-photon detection probabilities: `pair_rate · weight · ½ / CAR`.
//! The `½` is the probability of a correlated computational outcome, so CAR is
//! the ratio of a coincidence peak (e.g. `|ee⟩` on the Bell state) to its
//! accidental floor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzers::{
    tb_arrival_cells, AnalyzerError, AnalyzerOptions, AnalyzerSetting, ArrivalBin,
    ProjectorSetting, TbSetting,
};
use crate::hilbert::{self, DensityMatrix, HilbertError};
use crate::state::{self, Dof, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountsError {
    #[error("rate must be finite and non-negative (got {0})")]
    NegativeRate(f64),
    #[error("integration time must be finite and non-negative (got {0})")]
    NegativeTime(f64),
    #[error("CAR must be positive (got {0})")]
    InvalidCar(f64),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
}

pub type Result<T> = std::result::Result<T, CountsError>;

/// Seed plus stream index; `(seed, stream)` fully determines a random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RunSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        RunSeed { seed, stream }
    }

    /// Independent stream for sub-task `index` of this one.
    pub fn child(&self, index: u64) -> RunSeed {
        RunSeed {
            seed: self.seed,
            stream: self
                .stream
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(index.wrapping_add(1)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Counts of one outcome of one analyzer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_label: String,
    pub outcome_label: String,
    #[serde(rename = "t_s")]
    pub integration_time_s: f64,
    /// Signal plus accidental floor, Hz.
    #[serde(rename = "expected_rate_hz")]
    pub expected_rate: f64,
    /// All detected coincidences, accidentals included. Integral for sampled
    /// data; noiseless runs store the expectation itself.
    #[serde(rename = "counts")]
    pub coincidences: f64,
    /// The accidental part of `coincidences`.
    pub accidentals: f64,
}

/// Source brightness and exposure shared by all settings of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub pair_rate_hz: f64,
    pub integration_time_s: f64,
    /// `f64::INFINITY` disables accidentals.
    pub car: f64,
}

impl Exposure {
    pub fn validate(&self) -> Result<()> {
        check_rate(self.pair_rate_hz)?;
        check_time(self.integration_time_s)?;
        if !(self.car > 0.0) {
            return Err(CountsError::InvalidCar(self.car));
        }
        Ok(())
    }
}

fn check_rate(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(CountsError::NegativeRate(r))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CountsError::NegativeTime(t))
    }
}

/// `Tr[ρP]`, accepting either the two-qubit marginal of the setting's degree of
/// freedom or the full 16-dimensional state.
pub fn outcome_probability(rho: &DensityMatrix, setting: &ProjectorSetting) -> Result<f64> {
    if rho.dim() == 16 && rho.layout() != setting.projector.layout() {
        Ok(hilbert::expectation(rho, &setting.full_projector())?)
    } else {
        Ok(hilbert::expectation(rho, &setting.projector)?)
    }
}

/// `pair_rate · weight · Tr[ρP]`.
pub fn expected_coincidence_rate(
    rho: &DensityMatrix,
    setting: &ProjectorSetting,
    pair_rate: f64,
) -> Result<f64> {
    check_rate(pair_rate)?;
    let p = outcome_probability(rho, setting)?.max(0.0);
    Ok(pair_rate * setting.weight * p)
}

/// `expected / CAR`.
pub fn accidental_rate(expected: f64, car: f64) -> f64 {
    if car.is_infinite() {
        0.0
    } else {
        expected / car
    }
}

/// Accidental floor of a cell with post-selection `weight`.
pub fn accidental_floor(pair_rate: f64, weight: f64, car: f64) -> f64 {
    accidental_rate(pair_rate * weight * 0.5, car)
}

/// Accidental floor as a fraction of `pair_rate · weight`: `1 / (2 CAR)`.
pub fn accidental_fraction(car: f64) -> f64 {
    accidental_rate(0.5, car)
}

pub(crate) fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// Poisson draw with mean `expected_rate · t`.
pub fn sample_counts(expected_rate: f64, t: f64, seed: RunSeed) -> Result<u64> {
    check_rate(expected_rate)?;
    check_time(t)?;
    Ok(poisson_draw(&mut seed.rng(), expected_rate * t))
}

/// Samples every outcome of one analyzer configuration from one random stream.
pub fn sample_setting(
    rho: &DensityMatrix,
    projectors: &[ProjectorSetting],
    exposure: &Exposure,
    seed: RunSeed,
) -> Result<Vec<CountRecord>> {
    exposure.validate()?;
    let mut rng = seed.rng();
    let t = exposure.integration_time_s;
    projectors
        .iter()
        .map(|p| {
            let signal = expected_coincidence_rate(rho, p, exposure.pair_rate_hz)?;
            let floor = accidental_floor(exposure.pair_rate_hz, p.weight, exposure.car);
            let n_signal = poisson_draw(&mut rng, signal * t);
            let n_acc = poisson_draw(&mut rng, floor * t);
            Ok(CountRecord {
                setting_label: p.setting_label.clone(),
                outcome_label: p.outcome_label.clone(),
                integration_time_s: t,
                expected_rate: signal + floor,
                coincidences: (n_signal + n_acc) as f64,
                accidentals: n_acc as f64,
            })
        })
        .collect()
}

/// Samples a list of analyzer configurations in parallel. Setting `k` draws
/// from `seed.child(k)`, so the output does not depend on scheduling.
pub fn sample_settings(
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    opts: &AnalyzerOptions,
    exposure: &Exposure,
    seed: RunSeed,
) -> Result<Vec<(ProjectorSetting, CountRecord)>> {
    let per_setting: Vec<Result<Vec<(ProjectorSetting, CountRecord)>>> = settings
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let projectors = s.projectors(opts)?;
            let records = sample_setting(rho, &projectors, exposure, seed.child(k as u64))?;
            Ok(projectors.into_iter().zip(records).collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_setting {
        out.extend(r?);
    }
    Ok(out)
}

/// Noiseless records: counts equal their expectation values.
pub fn expected_setting(
    rho: &DensityMatrix,
    projectors: &[ProjectorSetting],
    exposure: &Exposure,
) -> Result<Vec<CountRecord>> {
    exposure.validate()?;
    let t = exposure.integration_time_s;
    projectors
        .iter()
        .map(|p| {
            let signal = expected_coincidence_rate(rho, p, exposure.pair_rate_hz)?;
            let floor = accidental_floor(exposure.pair_rate_hz, p.weight, exposure.car);
            Ok(CountRecord {
                setting_label: p.setting_label.clone(),
                outcome_label: p.outcome_label.clone(),
                integration_time_s: t,
                expected_rate: signal + floor,
                coincidences: (signal + floor) * t,
                accidentals: floor * t,
            })
        })
        .collect()
}

/// [`sample_settings`] without shot noise.
pub fn expected_settings(
    rho: &DensityMatrix,
    settings: &[AnalyzerSetting],
    opts: &AnalyzerOptions,
    exposure: &Exposure,
) -> Result<Vec<(ProjectorSetting, CountRecord)>> {
    let mut out = Vec::new();
    for s in settings {
        let projectors = s.projectors(opts)?;
        let records = expected_setting(rho, &projectors, exposure)?;
        out.extend(projectors.into_iter().zip(records));
    }
    Ok(out)
}

/// Expected and sampled coincidences over the 3×3 grid of arrival bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalHistogram {
    /// `[signal bin][idler bin]`, bins ordered 0, τ, 2τ.
    pub expected: [[f64; 3]; 3],
    pub counts: [[u64; 3]; 3],
}

impl ArrivalHistogram {
    pub fn cell(&self, s: ArrivalBin, i: ArrivalBin) -> u64 {
        self.counts[s.index()][i.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn expected_total(&self) -> f64 {
        self.expected.iter().flatten().sum()
    }
}

/// Coincidence histogram over the arrival bins of both photons for one
/// time-bin analyzer setting. `rho` is the TB marginal or the full state.
pub fn arrival_histogram(
    rho: &DensityMatrix,
    setting: &TbSetting,
    exposure: &Exposure,
    seed: RunSeed,
) -> Result<ArrivalHistogram> {
    exposure.validate()?;
    let reduced;
    let tb = if rho.dim() == 16 {
        reduced = state::marginal(rho, Dof::TimeBin)?;
        &reduced
    } else {
        rho
    };
    if tb.layout() != &Dof::TimeBin.layout() {
        return Err(HilbertError::LayoutMismatch {
            left: tb.layout().clone(),
            right: Dof::TimeBin.layout(),
        }
        .into());
    }
    let cells = tb_arrival_cells(setting);
    let mut rng = seed.rng();
    let t = exposure.integration_time_s;
    let mut expected = [[0.0; 3]; 3];
    let mut counts = [[0u64; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let (op, w) = &cells[a][b];
            let p = hilbert::trace_product(tb.matrix(), op).re.max(0.0);
            let signal = exposure.pair_rate_hz * w * p;
            let floor = accidental_floor(exposure.pair_rate_hz, *w, exposure.car);
            expected[a][b] = (signal + floor) * t;
            counts[a][b] = poisson_draw(&mut rng, signal * t) + poisson_draw(&mut rng, floor * t);
        }
    }
    Ok(ArrivalHistogram { expected, counts })
}

//! Physical parameters of the two-ring source: resonator geometry, pump
//! timing, and the rate and noise budget.
//!
//! Units follow the lab conventions: µm, nm, ns, GHz, MHz, mW, dB.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("{name} must be strictly positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("quality factor {0} is below 1e3")]
    QualityTooLow(f64),
    #[error("{name} must be non-negative (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("detector efficiency {0} outside (0, 1]")]
    Efficiency(f64),
    #[error("indistinguishability {0} outside (0, 1]")]
    Indistinguishability(f64),
}

pub type Result<T> = std::result::Result<T, DeviceError>;

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::Negative { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingParams {
    pub radius_um: f64,
    pub group_index: f64,
    pub quality_factor: f64,
    pub resonance_wavelength_nm: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            radius_um: 22.0,
            // reproduces the 524 GHz free spectral range at R = 22 µm
            group_index: 4.14,
            quality_factor: 1e5,
            resonance_wavelength_nm: 1543.656,
        }
    }
}

impl RingParams {
    pub fn validate(&self) -> Result<()> {
        positive("radius_um", self.radius_um)?;
        positive("group_index", self.group_index)?;
        positive("resonance_wavelength_nm", self.resonance_wavelength_nm)?;
        if !(self.quality_factor >= 1e3) {
            return Err(DeviceError::QualityTooLow(self.quality_factor));
        }
        Ok(())
    }

    pub fn optical_frequency_ghz(&self) -> f64 {
        SPEED_OF_LIGHT / (self.resonance_wavelength_nm * 1e-9) * 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpParams {
    pub wavelength_nm: f64,
    pub pulse_width_ns: f64,
    pub bin_delay_ns: f64,
    pub repetition_rate_mhz: f64,
    pub peak_power_mw: f64,
    pub rf_frequency_ghz: f64,
    pub free_carrier_lifetime_ns: f64,
}

impl Default for PumpParams {
    fn default() -> Self {
        PumpParams {
            wavelength_nm: 1543.656,
            pulse_width_ns: 2.0,
            bin_delay_ns: 13.0,
            repetition_rate_mhz: 50.0,
            peak_power_mw: 0.35,
            rf_frequency_ghz: 18.25,
            free_carrier_lifetime_ns: 10.0,
        }
    }
}

/// Timing-regime diagnostics; violations are reported, not rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpRegime {
    /// τ > τ_FC
    pub delay_exceeds_carrier_lifetime: bool,
    /// t_w ≤ τ_FC / 5
    pub pulse_short_against_carrier_lifetime: bool,
    /// f·t_w > 10
    pub dofs_distinct: bool,
}

impl PumpParams {
    pub fn validate(&self) -> Result<()> {
        positive("wavelength_nm", self.wavelength_nm)?;
        positive("pulse_width_ns", self.pulse_width_ns)?;
        positive("bin_delay_ns", self.bin_delay_ns)?;
        positive("repetition_rate_mhz", self.repetition_rate_mhz)?;
        non_negative("peak_power_mw", self.peak_power_mw)?;
        positive("rf_frequency_ghz", self.rf_frequency_ghz)?;
        positive("free_carrier_lifetime_ns", self.free_carrier_lifetime_ns)?;
        Ok(())
    }

    pub fn regime(&self) -> PumpRegime {
        PumpRegime {
            delay_exceeds_carrier_lifetime: self.bin_delay_ns > self.free_carrier_lifetime_ns,
            pulse_short_against_carrier_lifetime: self.pulse_width_ns * 5.0
                <= self.free_carrier_lifetime_ns,
            dofs_distinct: time_bandwidth_product(self).distinct,
        }
    }

    /// Fraction of time the pump is on: two pulses per period.
    pub fn duty_cycle(&self) -> f64 {
        2.0 * self.pulse_width_ns * 1e-9 * self.repetition_rate_mhz * 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Hz/mW²/GHz
    pub brightness: f64,
    pub coupling_loss_per_facet_db: f64,
    pub analyzer_loss_db: f64,
    pub detector_efficiency: f64,
    pub coincidence_window_ns: f64,
    pub car: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            brightness: 1.5e7,
            coupling_loss_per_facet_db: 3.5,
            analyzer_loss_db: 1.0,
            detector_efficiency: 0.85,
            coincidence_window_ns: 0.5,
            car: 30.0,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        non_negative("brightness", self.brightness)?;
        non_negative(
            "coupling_loss_per_facet_db",
            self.coupling_loss_per_facet_db,
        )?;
        non_negative("analyzer_loss_db", self.analyzer_loss_db)?;
        positive("coincidence_window_ns", self.coincidence_window_ns)?;
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(DeviceError::Efficiency(self.detector_efficiency));
        }
        // CAR may be +inf (no accidentals)
        if !(self.car > 0.0) {
            return Err(DeviceError::NonPositive {
                name: "car",
                value: self.car,
            });
        }
        Ok(())
    }

    /// Probability that one photon leaves the chip, crosses its analyzer and clicks.
    pub fn photon_transmission(&self) -> f64 {
        db_to_linear(self.coupling_loss_per_facet_db)
            * db_to_linear(self.analyzer_loss_db)
            * self.detector_efficiency
    }
}

pub fn db_to_linear(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Free spectral range `c / (n_g 2πR)` in GHz.
pub fn fsr(ring: &RingParams) -> f64 {
    let circumference = 2.0 * std::f64::consts::PI * ring.radius_um * 1e-6;
    SPEED_OF_LIGHT / (ring.group_index * circumference) * 1e-9
}

/// Group index that yields the given FSR (GHz) for the ring radius.
pub fn group_index_for_fsr(radius_um: f64, fsr_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * std::f64::consts::PI * radius_um * 1e-6 * fsr_ghz * 1e9)
}

/// Loaded-Q full width at half maximum in GHz.
pub fn linewidth(ring: &RingParams) -> f64 {
    ring.optical_frequency_ghz() / ring.quality_factor
}

/// Lorentzian intensity of a neighbouring bin relative to the resonance peak.
pub fn bin_crosstalk(linewidth_ghz: f64, bin_spacing_ghz: f64) -> f64 {
    let x = 2.0 * bin_spacing_ghz / linewidth_ghz;
    1.0 / (1.0 + x * x)
}

/// Normalized Lorentzian transmission dip `1 - extinction·L(ν)`, for spectra plots.
pub fn lorentzian_transmission(detuning_ghz: f64, linewidth_ghz: f64, extinction: f64) -> f64 {
    let x = 2.0 * detuning_ghz / linewidth_ghz;
    1.0 - extinction / (1.0 + x * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBandwidth {
    pub product: f64,
    pub distinct: bool,
}

/// `f · t_w`; the two degrees of freedom are treated as distinct above 10.
pub fn time_bandwidth_product(pump: &PumpParams) -> TimeBandwidth {
    let product = pump.rf_frequency_ghz * pump.pulse_width_ns;
    TimeBandwidth {
        product,
        distinct: product > 10.0,
    }
}

/// Magnitude of the normalized overlap of two Lorentzian amplitude lines
/// with FWHM `g1`, `g2` and centre separation `delta` (all GHz).
pub fn lorentzian_overlap(delta: f64, g1: f64, g2: f64) -> f64 {
    let mean = 0.5 * (g1 + g2);
    (g1 * g2).sqrt() / (mean * mean + delta * delta).sqrt()
}

/// Two-source indistinguishability μ as the product of signal and idler mode overlaps.
pub fn spectral_indistinguishability(
    detuning_s_ghz: f64,
    detuning_i_ghz: f64,
    linewidth1_ghz: f64,
    linewidth2_ghz: f64,
) -> Result<f64> {
    positive("linewidth1", linewidth1_ghz)?;
    positive("linewidth2", linewidth2_ghz)?;
    Ok(
        lorentzian_overlap(detuning_s_ghz, linewidth1_ghz, linewidth2_ghz)
            * lorentzian_overlap(detuning_i_ghz, linewidth1_ghz, linewidth2_ghz),
    )
}

/// Common signal/idler detuning that produces indistinguishability `mu` for equal linewidths.
pub fn detuning_for_indistinguishability(mu: f64, linewidth_ghz: f64) -> Result<f64> {
    positive("linewidth", linewidth_ghz)?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(DeviceError::Indistinguishability(mu));
    }
    Ok(linewidth_ghz * (1.0 / mu - 1.0).sqrt())
}

/// Accidental fraction as a white-noise weight: `1 / (1 + CAR)`.
pub fn car_to_white_noise(car: f64) -> f64 {
    if car.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + car)
    }
}

/// Rate budget and the conventions used to produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    /// brightness · P² · linewidth · duty cycle · rings
    pub generated_hz: f64,
    /// generated rate times the two-photon transmission
    pub detected_hz: f64,
    pub duty_cycle: f64,
    pub linewidth_ghz: f64,
    pub rings: u32,
    pub photon_transmission: f64,
}

/// Generated and detected pair rates.
///
/// Each photon crosses the output facet once, then its analyzer and detector.
pub fn pair_rate_budget(pump: &PumpParams, ring: &RingParams, budget: &Budget) -> PairRates {
    const RINGS: u32 = 2;
    let lw = linewidth(ring);
    let duty = pump.duty_cycle();
    let generated = budget.brightness * pump.peak_power_mw.powi(2) * lw * duty * RINGS as f64;
    let t = budget.photon_transmission();
    PairRates {
        generated_hz: generated,
        detected_hz: detected_pair_rate(generated, budget),
        duty_cycle: duty,
        linewidth_ghz: lw,
        rings: RINGS,
        photon_transmission: t,
    }
}

/// Coincidence rate after both photons traverse facet, analyzer and detector.
pub fn detected_pair_rate(generated_hz: f64, budget: &Budget) -> f64 {
    let t = budget.photon_transmission();
    generated_hz * t * t
}

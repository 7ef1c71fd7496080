//! Differential SAR ADC with binary-weighted or split-MSB capacitor DACs.
//!
//! [`convert`] is the ideal converter. [`simulate_switching`] runs the same
//! binary search through an explicit charge-redistribution model of both
//! half-arrays, tracking top-plate charge and the energy delivered by the
//! reference at every switching event.

mod array;
mod linearity;
mod switching;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use array::{apply_mismatch, CapArray, Half, Slot};
pub use linearity::{measure_inl_dnl, LinearityReport, TRANSITION_RESOLUTION_BITS};
pub use switching::{
    average_energy, average_energy_with, simulate_switching, EnergyAccounting, EnergyAverages,
    EnergyReport, EnergyStep, SwitchingResult, Transition,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdcError {
    #[error("invalid ADC configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown architecture `{0}` (expected `conventional` or `split-msb`)")]
    UnknownArchitecture(String),
    #[error("capacitor array does not match the ADC configuration: {0}")]
    ArrayMismatch(String),
    #[error("mismatch draw failed: {0}")]
    Mismatch(String),
    #[error("code {code} out of range for a {bits}-bit converter")]
    CodeOutOfRange { code: u32, bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Conventional,
    SplitMsb,
}

impl FromStr for Architecture {
    type Err = AdcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(Architecture::Conventional),
            "split-msb" => Ok(Architecture::SplitMsb),
            other => Err(AdcError::UnknownArchitecture(other.to_string())),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Conventional => "conventional",
            Architecture::SplitMsb => "split-msb",
        })
    }
}

pub const MAX_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    pub bits: u32,
    pub input_range: (f64, f64),
    pub v_ref: f64,
    pub unit_capacitance: f64,
    pub architecture: Architecture,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            bits: 12,
            input_range: (0.1, 1.7),
            v_ref: 0.8,
            unit_capacitance: 30e-15,
            architecture: Architecture::SplitMsb,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<(), AdcError> {
        let (lo, hi) = self.input_range;
        if !(2..=MAX_BITS).contains(&self.bits) {
            return Err(AdcError::InvalidConfig(format!(
                "bits must be in 2..={MAX_BITS}, got {}",
                self.bits
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(AdcError::InvalidConfig(format!(
                "input range [{lo}, {hi}] must satisfy v_hi > v_lo"
            )));
        }
        if !(self.unit_capacitance.is_finite() && self.unit_capacitance > 0.0) {
            return Err(AdcError::InvalidConfig(format!(
                "unit capacitance must be positive, got {}",
                self.unit_capacitance
            )));
        }
        if !(self.v_ref.is_finite() && self.v_ref > 0.0) {
            return Err(AdcError::InvalidConfig(format!(
                "reference voltage must be positive, got {}",
                self.v_ref
            )));
        }
        Ok(())
    }

    pub fn with_bits(self, bits: u32) -> Self {
        Self { bits, ..self }
    }

    pub fn with_architecture(self, architecture: Architecture) -> Self {
        Self {
            architecture,
            ..self
        }
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn max_code(&self) -> u32 {
        self.levels() - 1
    }

    pub fn full_scale(&self) -> f64 {
        self.input_range.1 - self.input_range.0
    }

    pub fn lsb(&self) -> f64 {
        self.full_scale() / self.levels() as f64
    }

    /// Input mapped onto [0, 1] of full scale, with clip flags.
    pub fn normalize(&self, v_in: f64) -> (f64, bool, bool) {
        let (lo, hi) = self.input_range;
        if v_in < lo {
            (0.0, true, false)
        } else if v_in > hi {
            (1.0, false, true)
        } else {
            ((v_in - lo) / self.full_scale(), false, false)
        }
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.input_range.0 + u * self.full_scale()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdcCode {
    pub value: u32,
    pub clipped_low: bool,
    pub clipped_high: bool,
}

impl AdcCode {
    pub fn new(value: u32) -> Self {
        Self {
            value,
            clipped_low: false,
            clipped_high: false,
        }
    }
}

/// Ideal SAR binary search, MSB first. A bit is kept when the input is at or
/// above the trial level.
pub fn convert(config: &AdcConfig, v_in: f64) -> AdcCode {
    let (u, clipped_low, clipped_high) = config.normalize(v_in);
    let scale = config.levels() as f64;
    let mut value = 0u32;
    for bit in (0..config.bits).rev() {
        let trial = value | (1 << bit);
        if u >= trial as f64 / scale {
            value = trial;
        }
    }
    AdcCode {
        value,
        clipped_low,
        clipped_high,
    }
}

/// Midpoint of the code's bin.
pub fn code_to_voltage(config: &AdcConfig, code: AdcCode) -> Result<f64, AdcError> {
    if code.value > config.max_code() {
        return Err(AdcError::CodeOutOfRange {
            code: code.value,
            bits: config.bits,
        });
    }
    Ok(config.input_range.0 + (code.value as f64 + 0.5) * config.lsb())
}

//! End-to-end read-out: autorange, digitise, compose the 5-bit range code
//! with the 12-bit ADC code, and decode back to a current estimate.

use thiserror::Error;

use crate::autorange::{
    autorange, AutorangeError, AutorangeOutcome, AutorangeStatus, FrontEnd, RangeCode, Source,
};
use crate::devices::{
    AmplifierSpec, BankConfig, ComparatorSpec, DeviceError, MemristorState, BANK_SIZE,
};
use crate::report::{Field, Table};
use crate::sar_adc::{
    code_to_voltage, convert, simulate_switching, AdcCode, AdcConfig, AdcError, CapArray,
    EnergyAccounting,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid system configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Autorange(#[from] AutorangeError),
    #[error(transparent)]
    Adc(#[from] AdcError),
    #[error("OverRange: cycle-1 v_out {v_out:e} V is above the ADC input ceiling; input exceeds the measurable maximum")]
    OverRange { v_out: f64 },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("cycle count {0} outside 1..=5")]
    InvalidCycles(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub v_read: f64,
    pub bank: BankConfig,
    pub amp: AmplifierSpec,
    pub cmp: ComparatorSpec,
    pub adc: AdcConfig,
    /// Resistor-selector clock; one resistor trial per period.
    pub selector_clock: f64,
    pub adc_sampling: f64,
    /// Time budget for one SAR conversion, within one sampling period.
    pub conversion_time: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            v_read: 0.2,
            bank: BankConfig::default(),
            amp: AmplifierSpec::default(),
            cmp: ComparatorSpec::default(),
            adc: AdcConfig::default(),
            // 3.75 us per trial, 1.25 us conversion: 5 us (200 kHz) for one
            // cycle, 20 us (50 kHz) for five.
            selector_clock: 1.0 / 3.75e-6,
            adc_sampling: 250e3,
            conversion_time: 1.25e-6,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.v_read.is_finite() && self.v_read > 0.0) {
            return Err(PipelineError::Config(format!(
                "read voltage must be positive, got {}",
                self.v_read
            )));
        }
        self.bank.validate()?;
        self.amp.validate()?;
        self.cmp.validate(&self.amp)?;
        self.adc.validate()?;
        for (name, hz) in [
            ("selector clock", self.selector_clock),
            ("ADC sampling rate", self.adc_sampling),
        ] {
            if !(hz.is_finite() && hz > 0.0) {
                return Err(PipelineError::Config(format!(
                    "{name} must be positive, got {hz}"
                )));
            }
        }
        if !(self.conversion_time > 0.0 && self.conversion_time <= 1.0 / self.adc_sampling) {
            return Err(PipelineError::Config(format!(
                "conversion time {} s must be positive and fit in one sampling period ({} s)",
                self.conversion_time,
                1.0 / self.adc_sampling
            )));
        }
        Ok(())
    }

    /// True when the comparator threshold sits inside the ADC input range.
    pub fn threshold_in_adc_range(&self) -> bool {
        self.cmp.threshold >= self.adc.input_range.0
    }

    pub fn front_end(&self) -> FrontEnd<'_> {
        FrontEnd {
            bank: &self.bank,
            amp: &self.amp,
            cmp: &self.cmp,
            adc_ceiling: self.adc.input_range.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Memristor(MemristorState),
    Current(f64),
}

impl Target {
    pub fn source(&self, v_read: f64) -> Source {
        match *self {
            Target::Memristor(mem) => Source::Memristor { mem, v_read },
            Target::Current(i) => Source::Current(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutResult {
    /// Current through the bank at the selected range.
    pub input_current: f64,
    pub range: RangeCode,
    pub code: AdcCode,
    pub v_out: f64,
    pub decoded_current: f64,
    pub cycles: usize,
    pub read_time: f64,
    pub adc_energy: f64,
    pub status: AutorangeStatus,
}

pub const READOUT_COLUMNS: [&str; 9] = [
    "input_A",
    "range_onehot",
    "code",
    "v_out_V",
    "decoded_A",
    "cycles",
    "time_s",
    "energy_J",
    "status",
];

impl ReadoutResult {
    pub fn fields(&self) -> Vec<Field> {
        vec![
            Field::Sci(self.input_current),
            Field::Text(self.range.to_string()),
            Field::Int(self.code.value as i64),
            Field::Sci(self.v_out),
            Field::Sci(self.decoded_current),
            Field::Int(self.cycles as i64),
            Field::Sci(self.read_time),
            Field::Sci(self.adc_energy),
            Field::Text(self.status.to_string()),
        ]
    }
}

pub fn readout_table(results: &[ReadoutResult]) -> Table {
    let mut t = Table::new(&READOUT_COLUMNS);
    for r in results {
        t.push(r.fields());
    }
    t
}

pub fn read_out(target: Target, cfg: &SystemConfig) -> Result<ReadoutResult, PipelineError> {
    let ideal = CapArray::ideal(&cfg.adc)?;
    read_out_inner(target, cfg, &ideal, true)
}

/// Read-out digitised through a specific (possibly mismatched) capacitor array.
pub fn read_out_with_array(
    target: Target,
    cfg: &SystemConfig,
    array: &CapArray,
) -> Result<ReadoutResult, PipelineError> {
    read_out_inner(target, cfg, array, false)
}

fn read_out_inner(
    target: Target,
    cfg: &SystemConfig,
    array: &CapArray,
    ideal: bool,
) -> Result<ReadoutResult, PipelineError> {
    let source = target.source(cfg.v_read);
    let outcome = autorange(&source, &cfg.front_end())?;
    digitise(&source, &outcome, cfg, array, ideal)
}

fn digitise(
    source: &Source,
    outcome: &AutorangeOutcome,
    cfg: &SystemConfig,
    array: &CapArray,
    ideal: bool,
) -> Result<ReadoutResult, PipelineError> {
    if outcome.status == AutorangeStatus::OverRange {
        return Err(PipelineError::OverRange {
            v_out: outcome.v_out,
        });
    }
    let switching = simulate_switching(
        &cfg.adc,
        array,
        outcome.v_out,
        EnergyAccounting::ReferenceDrawn,
    )?;
    let code = if ideal {
        let code = convert(&cfg.adc, outcome.v_out);
        debug_assert_eq!(code, switching.code);
        code
    } else {
        switching.code
    };
    let decoded = decode_current(outcome.range, code, cfg);
    let decoded_current = match (outcome.status, decoded) {
        (_, Ok(i)) => i,
        (AutorangeStatus::UnderRange, Err(_)) => 0.0,
        (_, Err(e)) => return Err(e),
    };
    let cycles = outcome.cycles();
    Ok(ReadoutResult {
        input_current: source.input_current(outcome.last().v_bottom),
        range: outcome.range,
        code,
        v_out: outcome.v_out,
        decoded_current,
        cycles,
        read_time: read_time(cycles, cfg)?,
        adc_energy: switching.energy.total,
        status: outcome.status,
    })
}

/// Current estimate from the composite output, using the nominal (trimmed)
/// small-signal resistance of the selected range.
pub fn decode_current(
    range: RangeCode,
    code: AdcCode,
    cfg: &SystemConfig,
) -> Result<f64, PipelineError> {
    let v = code_to_voltage(&cfg.adc, code)?;
    let signal = v - cfg.amp.common_mode;
    if !(signal > 0.0) {
        return Err(PipelineError::Decode(format!(
            "code {} decodes to {v:e} V, not above the amplifier common mode {:e} V",
            code.value, cfg.amp.common_mode
        )));
    }
    Ok(signal / (cfg.amp.gain * cfg.bank.nominal_resistance(range.index())))
}

pub fn read_time(cycles: usize, cfg: &SystemConfig) -> Result<f64, PipelineError> {
    if !(1..=BANK_SIZE).contains(&cycles) {
        return Err(PipelineError::InvalidCycles(cycles));
    }
    Ok(cycles as f64 / cfg.selector_clock + cfg.conversion_time)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.threshold_in_adc_range());
    }

    #[test]
    fn conversion_time_must_fit_sample_period() {
        let cfg = SystemConfig {
            conversion_time: 5e-6,
            ..SystemConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn read_355_nanoamps() {
        let cfg = SystemConfig::default();
        let r = read_out(Target::Current(355.66e-9), &cfg).unwrap();
        assert_eq!(r.range.to_string(), "01000");
        assert_eq!(r.status, AutorangeStatus::Locked);
        assert!(rel(r.v_out, 0.250) < 0.15);
        let reference = convert(&cfg.adc, 0.250).value as f64;
        // +-15 % of v_out expressed in codes
        assert!((r.code.value as f64 - reference).abs() <= 0.15 * 0.250 / cfg.adc.lsb());
        assert_eq!(r.cycles, 4);
        assert!(r.adc_energy > 0.0);
        assert!(rel(r.decoded_current, 355.66e-9) < 0.01);
    }

    #[test]
    fn read_five_millisiemens() {
        let cfg = SystemConfig::default();
        let mem = MemristorState::new(5e-3).unwrap();
        let r = read_out(Target::Memristor(mem), &cfg).unwrap();
        assert_eq!(r.range.to_string(), "00001");
        // 0.2 * 15.86 / 215.86 = 14.69 mV, 56.54 mV + 34 * 14.69 mV = 556 mV
        assert!(rel(r.v_out, 0.556) < 0.005, "{}", r.v_out);
        assert!(rel(r.input_current, (0.2 - 14.69e-3) * 5e-3) < 0.002);
    }

    #[test]
    fn zero_current_is_flagged_under_range() {
        let cfg = SystemConfig::default();
        let r = read_out(Target::Current(0.0), &cfg).unwrap();
        assert_eq!(r.status, AutorangeStatus::UnderRange);
        assert_eq!(r.code, convert(&cfg.adc, cfg.amp.common_mode));
        assert!(r.code.clipped_low);
        assert_eq!(r.range.index(), 4);
    }

    #[test]
    fn over_range_is_an_error() {
        let cfg = SystemConfig::default();
        let err = read_out(Target::Current(10e-3), &cfg).unwrap_err();
        assert!(matches!(err, PipelineError::OverRange { v_out } if v_out > 1.7));
        assert!(err.to_string().contains("OverRange"));
    }

    #[test]
    fn decode_published_chain() {
        let cfg = SystemConfig::default();
        let code = convert(&cfg.adc, 261.6e-3);
        let i = decode_current(RangeCode::new(3).unwrap(), code, &cfg).unwrap();
        let half_lsb = cfg.adc.lsb() / 2.0 / (34.0 * 15.86e3);
        assert!((i - 380.2e-9).abs() <= half_lsb + 0.05e-9, "{i}");
    }

    #[test]
    fn decode_at_common_mode_is_an_error() {
        let mut cfg = SystemConfig::default();
        let lsb = cfg.adc.lsb();
        cfg.adc.input_range = (
            cfg.amp.common_mode - lsb / 2.0,
            cfg.amp.common_mode - lsb / 2.0 + 1.6,
        );
        let err = decode_current(RangeCode::LOWEST, AdcCode::new(0), &cfg).unwrap_err();
        assert!(matches!(err, PipelineError::Decode(_)));
    }

    #[test]
    fn read_rates_span_band() {
        let cfg = SystemConfig::default();
        let rate = |c| 1.0 / read_time(c, &cfg).unwrap();
        assert!(rel(rate(1), 200e3) < 1e-12);
        assert!(rel(rate(5), 50e3) < 1e-12);
        for c in 1..5 {
            assert!(rate(c) > rate(c + 1));
        }
        assert!(read_time(0, &cfg).is_err());
        assert!(read_time(6, &cfg).is_err());
    }

    #[test]
    fn trims_participate_in_decode() {
        let mut cfg = SystemConfig::default();
        cfg.bank = cfg
            .bank
            .with_calibration([1.0, 1.0, 1.0, 1.1, 1.0])
            .unwrap();
        let r = read_out(Target::Current(355.66e-9), &cfg).unwrap();
        assert!(rel(r.decoded_current, 355.66e-9) < 0.01);
    }
}

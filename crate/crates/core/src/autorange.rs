//! Successive range selection: the shift-register selector walks the bank from
//! the lowest resistor upwards, one resistor per cycle, until the amplified
//! bottom voltage clears the comparator threshold.

use std::fmt;
use std::io;

use thiserror::Error;

use crate::devices::{
    self, AmplifierSpec, BankConfig, ComparatorSpec, DeviceError, MemristorState, BANK_SIZE,
};
use crate::report::{Field, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutorangeError {
    #[error("selector saturated: cannot step past range {0}")]
    SelectorSaturated(RangeCode),
    #[error("cycle {cycle}: {source}")]
    Device {
        cycle: usize,
        #[source]
        source: DeviceError,
    },
    #[error(
        "UnderRange: v_out {v_out:e} V at the largest resistor is below the comparator threshold"
    )]
    UnderRange { v_out: f64 },
    #[error("OverRange: cycle-1 v_out {v_out:e} V exceeds the ADC ceiling {ceiling:e} V")]
    OverRange { v_out: f64, ceiling: f64 },
}

/// One-hot 5-bit resistor selection. Rendered MSB first, so index 0 prints as
/// `00001` and index 3 as `01000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeCode(u8);

impl RangeCode {
    pub const LOWEST: RangeCode = RangeCode(0);
    pub const HIGHEST: RangeCode = RangeCode(BANK_SIZE as u8 - 1);

    pub fn new(index: usize) -> Option<Self> {
        (index < BANK_SIZE).then_some(Self(index as u8))
    }

    pub fn from_one_hot(bits: u8) -> Option<Self> {
        if bits.count_ones() == 1 && bits.trailing_zeros() < BANK_SIZE as u32 {
            Some(Self(bits.trailing_zeros() as u8))
        } else {
            None
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn one_hot(self) -> u8 {
        1 << self.0
    }
}

impl fmt::Display for RangeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:05b}", self.one_hot())
    }
}

/// Advances the selector by one decade.
pub fn step_selector(range: RangeCode) -> Result<RangeCode, AutorangeError> {
    RangeCode::new(range.index() + 1).ok_or(AutorangeError::SelectorSaturated(range))
}

/// What drives the bottom node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Memristor { mem: MemristorState, v_read: f64 },
    Current(f64),
}

impl Source {
    pub fn bottom_voltage(&self, bank: &BankConfig, index: usize) -> Result<f64, DeviceError> {
        let resistor = bank.resistor(index);
        match *self {
            Source::Memristor { mem, v_read } => {
                devices::solve_bottom_voltage(&mem, &resistor, v_read)
            }
            Source::Current(i) => devices::solve_injected_bottom_voltage(i, &resistor),
        }
    }

    /// Current through the bank for a solved bottom voltage.
    pub fn input_current(&self, v_bottom: f64) -> f64 {
        match *self {
            Source::Memristor { mem, v_read } => (v_read - v_bottom) * mem.conductance(),
            Source::Current(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub cycle: usize,
    pub range: RangeCode,
    pub v_bottom: f64,
    pub v_out: f64,
    pub comparator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutorangeStatus {
    Locked,
    UnderRange,
    OverRange,
}

impl fmt::Display for AutorangeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AutorangeStatus::Locked => "Locked",
            AutorangeStatus::UnderRange => "UnderRange",
            AutorangeStatus::OverRange => "OverRange",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutorangeOutcome {
    pub range: RangeCode,
    pub v_out: f64,
    pub trace: Vec<TraceEvent>,
    pub status: AutorangeStatus,
}

impl AutorangeOutcome {
    pub fn cycles(&self) -> usize {
        self.trace.len()
    }

    pub fn last(&self) -> &TraceEvent {
        self.trace.last().expect("trace is never empty")
    }
}

/// Front-end pieces the loop needs.
#[derive(Debug, Clone, Copy)]
pub struct FrontEnd<'a> {
    pub bank: &'a BankConfig,
    pub amp: &'a AmplifierSpec,
    pub cmp: &'a ComparatorSpec,
    pub adc_ceiling: f64,
}

impl FrontEnd<'_> {
    /// Convert, amplify and compare at one resistor.
    pub fn evaluate(
        &self,
        source: &Source,
        range: RangeCode,
        cycle: usize,
    ) -> Result<TraceEvent, AutorangeError> {
        let v_bottom = source
            .bottom_voltage(self.bank, range.index())
            .map_err(|source| AutorangeError::Device { cycle, source })?;
        let v_out = self.amp.amplify(v_bottom).v_out;
        Ok(TraceEvent {
            cycle,
            range,
            v_bottom,
            v_out,
            comparator: self.cmp.compare(v_out),
        })
    }
}

pub fn autorange(source: &Source, fe: &FrontEnd<'_>) -> Result<AutorangeOutcome, AutorangeError> {
    let mut trace = Vec::with_capacity(BANK_SIZE);
    let mut range = RangeCode::LOWEST;
    loop {
        let event = fe.evaluate(source, range, trace.len() + 1)?;
        trace.push(event);
        if event.cycle == 1 && event.v_out > fe.adc_ceiling {
            return Ok(AutorangeOutcome {
                range,
                v_out: event.v_out,
                trace,
                status: AutorangeStatus::OverRange,
            });
        }
        if event.comparator {
            return Ok(AutorangeOutcome {
                range,
                v_out: event.v_out,
                trace,
                status: AutorangeStatus::Locked,
            });
        }
        match step_selector(range) {
            Ok(next) => range = next,
            Err(_) => {
                return Ok(AutorangeOutcome {
                    range,
                    v_out: event.v_out,
                    trace,
                    status: AutorangeStatus::UnderRange,
                })
            }
        }
    }
}

/// Number of selector cycles needed to lock onto an injected current.
pub fn cycles_needed(current: f64, fe: &FrontEnd<'_>) -> Result<usize, AutorangeError> {
    let outcome = autorange(&Source::Current(current), fe)?;
    match outcome.status {
        AutorangeStatus::Locked => Ok(outcome.cycles()),
        AutorangeStatus::UnderRange => Err(AutorangeError::UnderRange {
            v_out: outcome.v_out,
        }),
        AutorangeStatus::OverRange => Err(AutorangeError::OverRange {
            v_out: outcome.v_out,
            ceiling: fe.adc_ceiling,
        }),
    }
}

pub const TRACE_COLUMNS: [&str; 5] = ["cycle", "one_hot", "v_bottom_V", "v_out_V", "comparator"];

pub fn trace_table(trace: &[TraceEvent]) -> Table {
    let mut table = Table::new(&TRACE_COLUMNS);
    for e in trace {
        table.push(vec![
            Field::Int(e.cycle as i64),
            Field::Text(e.range.to_string()),
            Field::Sci(e.v_bottom),
            Field::Sci(e.v_out),
            Field::Bool(e.comparator),
        ]);
    }
    table
}

pub fn write_trace_csv<W: io::Write>(trace: &[TraceEvent], out: W) -> io::Result<()> {
    trace_table(trace).write_csv(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn front_end<'a>(
        bank: &'a BankConfig,
        amp: &'a AmplifierSpec,
        cmp: &'a ComparatorSpec,
    ) -> FrontEnd<'a> {
        FrontEnd {
            bank,
            amp,
            cmp,
            adc_ceiling: 1.7,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn range_code_rendering() {
        assert_eq!(RangeCode::new(0).unwrap().to_string(), "00001");
        assert_eq!(RangeCode::new(3).unwrap().to_string(), "01000");
        assert_eq!(RangeCode::new(4).unwrap().one_hot(), 0b10000);
        assert!(RangeCode::new(5).is_none());
        assert_eq!(RangeCode::from_one_hot(0b01000), RangeCode::new(3));
        assert!(RangeCode::from_one_hot(0b01100).is_none());
        assert!(RangeCode::from_one_hot(0b100000).is_none());
    }

    #[test]
    fn selector_steps() {
        let r0 = RangeCode::new(0).unwrap();
        assert_eq!(step_selector(r0).unwrap().to_string(), "00010");
        let r2 = RangeCode::new(2).unwrap();
        assert_eq!(step_selector(r2).unwrap().to_string(), "01000");
        assert!(matches!(
            step_selector(RangeCode::HIGHEST),
            Err(AutorangeError::SelectorSaturated(_))
        ));
    }

    #[test]
    fn trace_for_355_nanoamps() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let out = autorange(&Source::Current(355.66e-9), &fe).unwrap();
        assert_eq!(out.status, AutorangeStatus::Locked);
        assert_eq!(out.range.to_string(), "01000");
        assert_eq!(out.cycles(), 4);
        let vb: Vec<f64> = out.trace.iter().map(|e| e.v_bottom).collect();
        for (got, want) in vb.iter().zip([5.64e-6, 56.4e-6, 564e-6, 5.64e-3]) {
            assert!(rel(*got, want) < 0.01, "{got} vs {want}");
        }
        for (i, e) in out.trace.iter().enumerate() {
            assert_eq!(e.range.index(), e.cycle - 1);
            assert_eq!(e.comparator, i == 3);
        }
    }

    #[test]
    fn two_milliamps_locks_immediately() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let out = autorange(&Source::Current(2e-3), &fe).unwrap();
        assert_eq!(out.status, AutorangeStatus::Locked);
        assert_eq!(out.cycles(), 1);
        // 31.72 mV linear, +0.45 % triode
        assert!(rel(out.trace[0].v_bottom, 31.72e-3) < 0.006);
        assert!(rel(out.v_out, 1.135) < 0.006);
    }

    #[test]
    fn one_nanoamp_is_under_range() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let out = autorange(&Source::Current(1e-9), &fe).unwrap();
        assert_eq!(out.status, AutorangeStatus::UnderRange);
        assert_eq!(out.range.index(), 4);
        assert_eq!(out.cycles(), 5);
        assert!(rel(out.v_out, 61.9e-3) < 1e-3);
        assert!(!out.last().comparator);
        assert!(matches!(
            cycles_needed(1e-9, &fe),
            Err(AutorangeError::UnderRange { .. })
        ));
    }

    #[test]
    fn ten_milliamps_is_over_range() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let out = autorange(&Source::Current(10e-3), &fe).unwrap();
        assert_eq!(out.status, AutorangeStatus::OverRange);
        assert_eq!(out.range.index(), 0);
        assert!(out.v_out > 1.7);
        assert!(matches!(
            cycles_needed(10e-3, &fe),
            Err(AutorangeError::OverRange { .. })
        ));
    }

    #[test]
    fn cycles_examples() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        assert_eq!(cycles_needed(2e-3, &fe).unwrap(), 1);
        assert_eq!(cycles_needed(355.66e-9, &fe).unwrap(), 4);
        assert_eq!(cycles_needed(20e-9, &fe).unwrap(), 5);
    }

    /// Brute force: evaluate the chain at every resistor and pick the first pass.
    #[test]
    fn twenty_nanoamps_needs_top_resistor_by_enumeration() {
        let (bank, amp, cmp): (BankConfig, AmplifierSpec, ComparatorSpec) = Default::default();
        let passes: Vec<bool> = (0..BANK_SIZE)
            .map(|k| {
                let v = 20e-9 * bank.nominal_resistance(k);
                cmp.compare(amp.amplify(v).v_out)
            })
            .collect();
        assert_eq!(passes, vec![false, false, false, false, true]);
    }

    #[test]
    fn device_errors_carry_cycle() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let err = autorange(&Source::Current(-1.0), &fe).unwrap_err();
        assert!(matches!(err, AutorangeError::Device { cycle: 1, .. }));
    }

    #[test]
    fn trace_csv_header() {
        let (bank, amp, cmp) = Default::default();
        let fe = front_end(&bank, &amp, &cmp);
        let out = autorange(&Source::Current(355.66e-9), &fe).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "cycle,one_hot,v_bottom_V,v_out_V,comparator"
        );
        assert!(lines.next().unwrap().starts_with("1,00001,5.64"));
        assert!(text.trim_end().ends_with("true"));
        assert_eq!(text.lines().count(), 5);
    }
}

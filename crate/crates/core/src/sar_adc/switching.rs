use std::fmt;
use std::io;

use super::array::{CapArray, Half, Slot};
use super::{AdcCode, AdcConfig, AdcError, Architecture};
use crate::report::index_value_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Up,
    Down,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Up => "up",
            Transition::Down => "down",
        })
    }
}

/// How switching energy is tallied.
///
/// `ReferenceDrawn` charges every draw on the reference during a conversion,
/// including the array set-up right after sampling. `TransitionsOnly`
/// keeps only the comparison-driven transitions (one per decided bit after
/// the MSB), the bookkeeping used when quoting per-transition energies such
/// as the 5 C·Vref² conventional down step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyAccounting {
    ReferenceDrawn,
    TransitionsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyStep {
    /// Bit under test after this switching event.
    pub bit_index: u32,
    pub transition: Transition,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub per_step: Vec<EnergyStep>,
    pub total: f64,
    pub accounting: EnergyAccounting,
}

impl EnergyReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        let values: Vec<f64> = self.per_step.iter().map(|s| s.energy).collect();
        index_value_table(&values).write_csv(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingResult {
    pub code: AdcCode,
    pub energy: EnergyReport,
    /// Largest top-plate charge discrepancy across all switching events, in coulombs.
    pub max_charge_error: f64,
}

/// One half-array: floating top plate, bottom plates driven to the input
/// (while sampling), to the reference, or to ground. Voltages are in units of
/// Vref and capacitances in units of the unit capacitor.
struct HalfArray<'a> {
    caps: &'a [f64],
    total: f64,
    bottoms: Vec<f64>,
    top: f64,
    charge: f64,
}

impl<'a> HalfArray<'a> {
    fn sampled(caps: &'a [f64], v_in: f64) -> Self {
        let total = caps.iter().sum();
        // Bottom-plate sampling: top plate tied to 0 while the bottoms track the
        // input, then the top switch opens first, freezing the top-plate charge.
        let top = 0.0;
        let bottoms = vec![v_in; caps.len()];
        let charge = caps.iter().zip(&bottoms).map(|(c, b)| c * (top - b)).sum();
        Self {
            caps,
            total,
            bottoms,
            top,
            charge,
        }
    }

    /// Moves the bottom plates to `levels` (each 0 or 1) under top-plate charge
    /// conservation. Returns (reference energy, charge error).
    fn switch(&mut self, levels: &[bool]) -> (f64, f64) {
        let driven: f64 = self
            .caps
            .iter()
            .zip(levels)
            .map(|(c, &l)| if l { *c } else { 0.0 })
            .sum();
        let top = (self.charge + driven) / self.total;
        let mut drawn = 0.0;
        let mut charge = 0.0;
        for ((c, b), &l) in self.caps.iter().zip(self.bottoms.iter_mut()).zip(levels) {
            let new_b = if l { 1.0 } else { 0.0 };
            if l {
                // charge delivered into this bottom plate by the reference
                drawn += c * ((new_b - top) - (*b - self.top));
            }
            *b = new_b;
            charge += c * (top - new_b);
        }
        let err = (charge - self.charge).abs();
        self.top = top;
        (drawn, err)
    }
}

/// Bottom-plate levels of the positive half; the negative half is the complement.
struct Schedule {
    slots: Vec<Slot>,
    levels: Vec<bool>,
}

impl Schedule {
    fn initial(slots: &[Slot], architecture: Architecture, bits: u32) -> Self {
        let levels = slots
            .iter()
            .map(|s| match (architecture, s) {
                (Architecture::Conventional, Slot::Main(k)) => *k == bits - 1,
                (Architecture::SplitMsb, Slot::Replica(_) | Slot::ReplicaDummy) => true,
                _ => false,
            })
            .collect();
        Self {
            slots: slots.to_vec(),
            levels,
        }
    }

    fn set(&mut self, slot: Slot, level: bool) {
        let pos = self
            .slots
            .iter()
            .position(|&s| s == slot)
            .expect("schedule slot exists");
        self.levels[pos] = level;
    }

    /// After deciding bit `k` (k >= 1), set up the trial for bit `k - 1`.
    fn advance(&mut self, architecture: Architecture, k: u32, decided_one: bool) {
        match architecture {
            Architecture::Conventional => {
                if !decided_one {
                    self.set(Slot::Main(k), false);
                }
                self.set(Slot::Main(k - 1), true);
            }
            Architecture::SplitMsb => {
                if decided_one {
                    self.set(Slot::Main(k - 1), true);
                } else {
                    self.set(Slot::Replica(k - 1), false);
                }
            }
        }
    }

    fn complement(&self) -> Vec<bool> {
        self.levels.iter().map(|l| !l).collect()
    }
}

pub(crate) struct RawConversion {
    pub code: u32,
    /// (bit under test, transition, energy in C_unit·Vref²); the first entry
    /// is the post-sampling set-up.
    pub steps: Vec<(u32, Transition, f64)>,
    pub max_charge_error: f64,
}

/// Charge-level conversion in normalized units. `u` is the input as a
/// fraction of full scale; the differential pair is driven to `u` and `1 - u`.
pub(crate) fn run_normalized(
    caps_p: &[f64],
    caps_n: &[f64],
    slots: &[Slot],
    architecture: Architecture,
    bits: u32,
    u: f64,
) -> RawConversion {
    let mut pos = HalfArray::sampled(caps_p, u);
    let mut neg = HalfArray::sampled(caps_n, 1.0 - u);
    let mut schedule = Schedule::initial(slots, architecture, bits);
    let mut steps = Vec::with_capacity(bits as usize);
    let mut max_err: f64 = 0.0;

    let mut apply = |schedule: &Schedule, pos: &mut HalfArray, neg: &mut HalfArray| {
        let (ep, qp) = pos.switch(&schedule.levels);
        let (en, qn) = neg.switch(&schedule.complement());
        max_err = max_err.max(qp).max(qn);
        ep + en
    };

    let e0 = apply(&schedule, &mut pos, &mut neg);
    steps.push((bits - 1, Transition::Up, e0));
    let mut code = 0u32;
    for k in (0..bits).rev() {
        let one = pos.top - neg.top <= 0.0;
        if one {
            code |= 1 << k;
        }
        if k == 0 {
            break;
        }
        schedule.advance(architecture, k, one);
        let e = apply(&schedule, &mut pos, &mut neg);
        let transition = if one {
            Transition::Up
        } else {
            Transition::Down
        };
        steps.push((k - 1, transition, e));
    }
    RawConversion {
        code,
        steps,
        max_charge_error: max_err,
    }
}

pub(crate) fn run_array(array: &CapArray, u: f64) -> RawConversion {
    let p = array.relative_capacitances(Half::Positive);
    let n = array.relative_capacitances(Half::Negative);
    run_normalized(&p, &n, array.slots(), array.architecture(), array.bits(), u)
}

/// Step-by-step charge-redistribution conversion of `v_in`.
pub fn simulate_switching(
    config: &AdcConfig,
    array: &CapArray,
    v_in: f64,
    accounting: EnergyAccounting,
) -> Result<SwitchingResult, AdcError> {
    config.validate()?;
    array.check_against(config)?;
    let (u, clipped_low, clipped_high) = config.normalize(v_in);
    let raw = run_array(array, u);
    let energy_scale = array.unit_capacitance() * config.v_ref * config.v_ref;
    let charge_scale = array.unit_capacitance() * config.v_ref;
    let skip = match accounting {
        EnergyAccounting::ReferenceDrawn => 0,
        EnergyAccounting::TransitionsOnly => 1,
    };
    let per_step: Vec<EnergyStep> = raw
        .steps
        .iter()
        .skip(skip)
        .map(|&(bit_index, transition, e)| EnergyStep {
            bit_index,
            transition,
            energy: e * energy_scale,
        })
        .collect();
    let total = per_step.iter().map(|s| s.energy).sum();
    Ok(SwitchingResult {
        code: AdcCode {
            value: raw.code,
            clipped_low,
            clipped_high,
        },
        energy: EnergyReport {
            per_step,
            total,
            accounting,
        },
        max_charge_error: raw.max_charge_error * charge_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAverages {
    pub bits: u32,
    pub accounting: EnergyAccounting,
    pub conventional: f64,
    pub split_msb: f64,
    pub saving_ratio: f64,
}

pub const MAX_AVERAGE_BITS: u32 = 14;

/// Mean conversion energy over every code (input at each bin centre) for
/// both architectures, reference-drawn accounting.
pub fn average_energy(config: &AdcConfig) -> Result<EnergyAverages, AdcError> {
    average_energy_with(config, EnergyAccounting::ReferenceDrawn)
}

pub fn average_energy_with(
    config: &AdcConfig,
    accounting: EnergyAccounting,
) -> Result<EnergyAverages, AdcError> {
    config.validate()?;
    if config.bits > MAX_AVERAGE_BITS {
        return Err(AdcError::InvalidConfig(format!(
            "exhaustive energy average limited to {MAX_AVERAGE_BITS} bits, got {}",
            config.bits
        )));
    }
    let mean = |architecture: Architecture| -> Result<f64, AdcError> {
        let cfg = config.with_architecture(architecture);
        let array = CapArray::ideal(&cfg)?;
        let levels = cfg.levels();
        let mut sum = 0.0;
        for code in 0..levels {
            let v = cfg.denormalize((code as f64 + 0.5) / levels as f64);
            sum += simulate_switching(&cfg, &array, v, accounting)?
                .energy
                .total;
        }
        Ok(sum / levels as f64)
    };
    let conventional = mean(Architecture::Conventional)?;
    let split_msb = mean(Architecture::SplitMsb)?;
    Ok(EnergyAverages {
        bits: config.bits,
        accounting,
        conventional,
        split_msb,
        saving_ratio: 1.0 - split_msb / conventional,
    })
}

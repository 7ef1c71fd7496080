//! Element models for the analog front end: the memristor under test, the
//! triode-region NMOS resistors of the bank, the switched-capacitor gain
//! stage and the range comparator.
//!
//! All quantities are SI (volts, amperes, ohms, siemens). Every type here is
//! an immutable value object; the solver functions are pure.

use std::fmt;

use thiserror::Error;

/// Conductance window in which the simulator's models are considered valid.
pub const CONDUCTANCE_MIN: f64 = 1e-9;
pub const CONDUCTANCE_MAX: f64 = 1e-1;

/// Number of switchable resistors in the bank.
pub const BANK_SIZE: usize = 5;

/// Default nominal on-resistance of the lowest bank resistor.
pub const DEFAULT_R0: f64 = 15.86;
pub const DEFAULT_THRESHOLD_VOLTAGE: f64 = 0.7;
pub const DEFAULT_OVERDRIVE: f64 = 3.5;

/// Absolute current residual the node solve must reach.
pub const SOLVER_TOLERANCE: f64 = 1e-15;
pub const SOLVER_MAX_ITERATIONS: usize = 100;
const SOLVER_RELAXATION: f64 = 0.9;

/// Allowed deviation of each nominal resistor from an exact decade ladder.
const LADDER_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("memristor conductance {0:e} S outside the valid window [1e-9 S, 1e-1 S]")]
    InvalidConductance(f64),
    #[error("invalid NMOS resistor: {0}")]
    InvalidNmos(String),
    #[error("invalid resistor bank: {0}")]
    InvalidBank(String),
    #[error("invalid amplifier: {0}")]
    InvalidAmplifier(String),
    #[error("invalid comparator: {0}")]
    InvalidComparator(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("{} leaves the triode region: v_ds = {v_ds:e} V, limit {limit:e} V", resistor_name(*.index))]
    TriodeDomain {
        index: Option<usize>,
        v_ds: f64,
        limit: f64,
    },
    #[error("bottom-node solve did not converge after {iterations} iterations (residual {residual:e} A)")]
    NonConvergence { iterations: usize, residual: f64 },
}

fn resistor_name(index: Option<usize>) -> String {
    match index {
        Some(i) => format!("bank resistor {i}"),
        None => "resistor".to_string(),
    }
}

/// Static conductance of the device under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorState {
    conductance: f64,
}

impl MemristorState {
    pub fn new(conductance: f64) -> Result<Self, DeviceError> {
        if !(conductance.is_finite() && (CONDUCTANCE_MIN..=CONDUCTANCE_MAX).contains(&conductance))
        {
            return Err(DeviceError::InvalidConductance(conductance));
        }
        Ok(Self { conductance })
    }

    pub fn from_resistance(ohms: f64) -> Result<Self, DeviceError> {
        Self::new(1.0 / ohms)
    }

    pub fn conductance(&self) -> f64 {
        self.conductance
    }

    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance
    }
}

/// Long-channel NMOS biased as a voltage-controlled resistor.
///
/// `gain_factor` is the lumped `mu_n * C_ox * W / L` product in A/V².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmosResistorSpec {
    pub gain_factor: f64,
    pub threshold_voltage: f64,
    pub gate_voltage: f64,
}

impl NmosResistorSpec {
    pub fn new(
        gain_factor: f64,
        threshold_voltage: f64,
        gate_voltage: f64,
    ) -> Result<Self, DeviceError> {
        let spec = Self {
            gain_factor,
            threshold_voltage,
            gate_voltage,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Back-solves the gain factor so the small-signal on-resistance equals `r_on`.
    pub fn from_on_resistance(
        r_on: f64,
        threshold_voltage: f64,
        gate_voltage: f64,
    ) -> Result<Self, DeviceError> {
        if !(r_on.is_finite() && r_on > 0.0) {
            return Err(DeviceError::InvalidNmos(format!(
                "on-resistance must be positive, got {r_on}"
            )));
        }
        let overdrive = gate_voltage - threshold_voltage;
        Self::new(1.0 / (r_on * overdrive), threshold_voltage, gate_voltage)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.gate_voltage > self.threshold_voltage) {
            return Err(DeviceError::InvalidNmos(format!(
                "gate voltage {} V must exceed threshold {} V",
                self.gate_voltage, self.threshold_voltage
            )));
        }
        let r_on = self.on_resistance();
        if !(self.gain_factor > 0.0 && r_on.is_finite() && r_on > 0.0) {
            return Err(DeviceError::InvalidNmos(format!(
                "small-signal on-resistance must be finite and positive (gain factor {})",
                self.gain_factor
            )));
        }
        Ok(())
    }

    pub fn overdrive(&self) -> f64 {
        self.gate_voltage - self.threshold_voltage
    }

    /// Small-signal on-resistance `1 / (k (V_GS - V_TH))`.
    pub fn on_resistance(&self) -> f64 {
        1.0 / (self.gain_factor * self.overdrive())
    }

    fn check_triode(&self, v_ds: f64) -> Result<(), DeviceError> {
        let limit = self.overdrive();
        if !(v_ds >= 0.0 && v_ds <= limit) {
            return Err(DeviceError::TriodeDomain {
                index: None,
                v_ds,
                limit,
            });
        }
        Ok(())
    }

    /// Full triode law `k [(V_GS - V_TH) v_ds - v_ds² / 2]`.
    pub fn triode_current(&self, v_ds: f64) -> Result<f64, DeviceError> {
        self.check_triode(v_ds)?;
        Ok(self.gain_factor * (self.overdrive() * v_ds - 0.5 * v_ds * v_ds))
    }

    /// Large-signal resistance `v_ds / I`, continuous at zero bias.
    pub fn effective_resistance(&self, v_ds: f64) -> Result<f64, DeviceError> {
        self.check_triode(v_ds)?;
        // v_ds / I simplified so that v_ds = 0 needs no special case.
        Ok(1.0 / (self.gain_factor * (self.overdrive() - 0.5 * v_ds)))
    }
}

/// The five switchable bank resistors, lowest resistance first.
#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    resistors: [NmosResistorSpec; BANK_SIZE],
    calibration: [f64; BANK_SIZE],
    linear_mode: bool,
}

impl BankConfig {
    pub fn new(
        resistors: Vec<NmosResistorSpec>,
        calibration: Vec<f64>,
        linear_mode: bool,
    ) -> Result<Self, DeviceError> {
        let resistors: [NmosResistorSpec; BANK_SIZE] =
            resistors.try_into().map_err(|v: Vec<NmosResistorSpec>| {
                DeviceError::InvalidBank(format!(
                    "exactly 5 entries required, got {} resistors",
                    v.len()
                ))
            })?;
        let calibration: [f64; BANK_SIZE] = calibration.try_into().map_err(|v: Vec<f64>| {
            DeviceError::InvalidBank(format!(
                "exactly 5 entries required, got {} calibration trims",
                v.len()
            ))
        })?;
        let bank = Self {
            resistors,
            calibration,
            linear_mode,
        };
        bank.validate()?;
        Ok(bank)
    }

    /// Exact decade ladder `r0 * 10^k` at the given gate overdrive.
    pub fn decade(r0: f64, threshold_voltage: f64, overdrive: f64) -> Result<Self, DeviceError> {
        let resistors = (0..BANK_SIZE)
            .map(|k| {
                NmosResistorSpec::from_on_resistance(
                    r0 * 10f64.powi(k as i32),
                    threshold_voltage,
                    threshold_voltage + overdrive,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(resistors, vec![1.0; BANK_SIZE], false)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        for spec in &self.resistors {
            spec.validate()?;
        }
        let r0 = self.resistors[0].on_resistance();
        for k in 1..BANK_SIZE {
            let prev = self.resistors[k - 1].on_resistance();
            let r = self.resistors[k].on_resistance();
            if !(r > prev) {
                return Err(DeviceError::InvalidBank(format!(
                    "on-resistances must be strictly increasing (resistor {k}: {r} <= {prev})"
                )));
            }
            let ideal = r0 * 10f64.powi(k as i32);
            if ((r / ideal) - 1.0).abs() > LADDER_TOLERANCE {
                return Err(DeviceError::InvalidBank(format!(
                    "resistor {k} ({r} ohm) is more than 20 % off the decade ladder value {ideal} ohm"
                )));
            }
        }
        for (k, &t) in self.calibration.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(DeviceError::InvalidBank(format!(
                    "calibration trim {k} must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn resistors(&self) -> &[NmosResistorSpec; BANK_SIZE] {
        &self.resistors
    }

    pub fn calibration(&self) -> &[f64; BANK_SIZE] {
        &self.calibration
    }

    pub fn linear_mode(&self) -> bool {
        self.linear_mode
    }

    pub fn with_linear_mode(mut self, linear: bool) -> Self {
        self.linear_mode = linear;
        self
    }

    pub fn with_calibration(mut self, calibration: [f64; BANK_SIZE]) -> Result<Self, DeviceError> {
        self.calibration = calibration;
        self.validate()?;
        Ok(self)
    }

    /// Small-signal resistance of resistor `index` including its trim.
    pub fn nominal_resistance(&self, index: usize) -> f64 {
        self.resistors[index].on_resistance() * self.calibration[index]
    }

    /// The selected resistor as seen by the node solve.
    pub fn resistor(&self, index: usize) -> BankResistor {
        let base = self.resistors[index];
        let trim = self.calibration[index];
        BankResistor {
            spec: NmosResistorSpec {
                gain_factor: base.gain_factor / trim,
                ..base
            },
            linear: self.linear_mode,
            index: Some(index),
        }
    }
}

impl Default for BankConfig {
    fn default() -> Self {
        Self::decade(DEFAULT_R0, DEFAULT_THRESHOLD_VOLTAGE, DEFAULT_OVERDRIVE)
            .expect("default bank is valid")
    }
}

/// One bank resistor as a two-terminal element: either the full triode law or
/// an ideal resistor at the small-signal on-resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankResistor {
    pub spec: NmosResistorSpec,
    pub linear: bool,
    pub index: Option<usize>,
}

impl From<NmosResistorSpec> for BankResistor {
    fn from(spec: NmosResistorSpec) -> Self {
        Self {
            spec,
            linear: false,
            index: None,
        }
    }
}

impl BankResistor {
    pub fn linear(spec: NmosResistorSpec) -> Self {
        Self {
            spec,
            linear: true,
            index: None,
        }
    }

    fn tag(&self, err: DeviceError) -> DeviceError {
        match err {
            DeviceError::TriodeDomain { v_ds, limit, .. } => DeviceError::TriodeDomain {
                index: self.index,
                v_ds,
                limit,
            },
            other => other,
        }
    }

    pub fn current(&self, v_ds: f64) -> Result<f64, DeviceError> {
        if self.linear {
            Ok(v_ds / self.spec.on_resistance())
        } else {
            self.spec.triode_current(v_ds).map_err(|e| self.tag(e))
        }
    }

    pub fn effective_resistance(&self, v_ds: f64) -> Result<f64, DeviceError> {
        if self.linear {
            Ok(self.spec.on_resistance())
        } else {
            self.spec
                .effective_resistance(v_ds)
                .map_err(|e| self.tag(e))
        }
    }
}

/// Solves the memristor/bank divider for the bottom-electrode voltage.
///
/// Relaxed fixed-point on `V_b = v_read R_eff(V_b) / (R_mem + R_eff(V_b))`,
/// converged on the branch-current residual.
pub fn solve_bottom_voltage(
    mem: &MemristorState,
    resistor: &BankResistor,
    v_read: f64,
) -> Result<f64, DeviceError> {
    if !(v_read.is_finite() && v_read > 0.0) {
        return Err(DeviceError::InvalidSource(format!(
            "read voltage must be positive, got {v_read}"
        )));
    }
    let g = mem.conductance();
    let r_mem = mem.resistance();
    let residual =
        |v: f64| -> Result<f64, DeviceError> { Ok((v_read - v) * g - resistor.current(v)?) };
    fixed_point(
        |v| {
            let r = resistor.effective_resistance(v)?;
            Ok(v_read * r / (r_mem + r))
        },
        residual,
    )
}

/// Bottom voltage developed by an ideal injected current.
pub fn solve_injected_bottom_voltage(
    current: f64,
    resistor: &BankResistor,
) -> Result<f64, DeviceError> {
    if !(current.is_finite() && current >= 0.0) {
        return Err(DeviceError::InvalidSource(format!(
            "injected current must be non-negative, got {current}"
        )));
    }
    fixed_point(
        |v| Ok(current * resistor.effective_resistance(v)?),
        |v| Ok(current - resistor.current(v)?),
    )
}

fn fixed_point<F, R>(map: F, residual: R) -> Result<f64, DeviceError>
where
    F: Fn(f64) -> Result<f64, DeviceError>,
    R: Fn(f64) -> Result<f64, DeviceError>,
{
    let mut v = map(0.0)?;
    let mut res = residual(v)?;
    for _ in 0..SOLVER_MAX_ITERATIONS {
        if res.abs() <= SOLVER_TOLERANCE {
            return Ok(v);
        }
        let next = map(v)?;
        let candidate = v + SOLVER_RELAXATION * (next - v);
        // Relaxation stalls once steps fall under one ulp.
        v = if candidate == v { next } else { candidate };
        res = residual(v)?;
    }
    if res.abs() <= SOLVER_TOLERANCE {
        return Ok(v);
    }
    Err(DeviceError::NonConvergence {
        iterations: SOLVER_MAX_ITERATIONS,
        residual: res,
    })
}

/// Ideal discrete-time affine gain stage with output clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierSpec {
    pub gain: f64,
    pub common_mode: f64,
    pub gain_error: f64,
    pub output_clip: (f64, f64),
}

impl Default for AmplifierSpec {
    fn default() -> Self {
        Self {
            gain: 34.0,
            common_mode: 56.54e-3,
            gain_error: 0.0,
            output_clip: (0.0, 1.8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierOutput {
    pub v_out: f64,
    pub saturated: bool,
}

impl AmplifierSpec {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(DeviceError::InvalidAmplifier(format!(
                "gain must be positive, got {}",
                self.gain
            )));
        }
        if !(self.gain * (1.0 + self.gain_error) > 0.0) {
            return Err(DeviceError::InvalidAmplifier(format!(
                "gain error {} makes the effective gain non-positive",
                self.gain_error
            )));
        }
        let (lo, hi) = self.output_clip;
        if !(lo < hi) {
            return Err(DeviceError::InvalidAmplifier(format!(
                "output clip window [{lo}, {hi}] is empty"
            )));
        }
        Ok(())
    }

    pub fn effective_gain(&self) -> f64 {
        self.gain * (1.0 + self.gain_error)
    }

    pub fn unclipped(&self, v_bottom: f64) -> f64 {
        self.common_mode + self.effective_gain() * v_bottom
    }

    pub fn amplify(&self, v_bottom: f64) -> AmplifierOutput {
        let raw = self.unclipped(v_bottom);
        let (lo, hi) = self.output_clip;
        let v_out = raw.clamp(lo, hi);
        AmplifierOutput {
            v_out,
            saturated: v_out != raw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorSpec {
    pub threshold: f64,
    pub offset: f64,
}

impl Default for ComparatorSpec {
    fn default() -> Self {
        Self {
            threshold: 157.3e-3,
            offset: 0.0,
        }
    }
}

impl ComparatorSpec {
    pub fn validate(&self, amp: &AmplifierSpec) -> Result<(), DeviceError> {
        let (lo, hi) = amp.output_clip;
        if !(self.threshold >= lo && self.threshold <= hi) {
            return Err(DeviceError::InvalidComparator(format!(
                "threshold {} V outside the amplifier output window [{lo}, {hi}] V",
                self.threshold
            )));
        }
        if !self.offset.is_finite() {
            return Err(DeviceError::InvalidComparator(
                "offset must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Inclusive at the threshold.
    pub fn compare(&self, v_out: f64) -> bool {
        v_out + self.offset >= self.threshold
    }
}

impl fmt::Display for MemristorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} S", self.conductance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn spec(r_on: f64) -> NmosResistorSpec {
        NmosResistorSpec::from_on_resistance(r_on, 0.7, 4.2).unwrap()
    }

    #[test]
    fn memristor_window() {
        assert!(MemristorState::new(0.0).is_err());
        assert!(MemristorState::new(-1e-6).is_err());
        assert!(MemristorState::new(f64::NAN).is_err());
        assert!(MemristorState::new(5e-10).is_err());
        assert!(MemristorState::new(0.2).is_err());
        assert!(MemristorState::new(1e-9).is_ok());
        assert!(MemristorState::new(1e-1).is_ok());
    }

    #[test]
    fn nmos_rejects_off_device() {
        assert!(NmosResistorSpec::new(1e-3, 0.7, 0.7).is_err());
        assert!(NmosResistorSpec::new(1e-3, 0.7, 0.5).is_err());
        assert!(NmosResistorSpec::new(0.0, 0.7, 4.2).is_err());
    }

    #[test]
    fn triode_zero_bias() {
        assert_eq!(spec(15.86).triode_current(0.0).unwrap(), 0.0);
    }

    #[test]
    fn triode_small_signal_matches_on_resistance() {
        // 1 uV / 15.86 ohm, quadratic correction ~1.4e-7 relative
        let i = spec(15.86).triode_current(1e-6).unwrap();
        assert!(rel(i, 63.05e-9) < 1e-3, "{i}");
        assert!(rel(i, 1e-6 / 15.86) < 1e-6);
    }

    #[test]
    fn triode_tenth_of_overdrive_is_five_percent_low() {
        let s = spec(100.0);
        let v = s.overdrive() / 10.0;
        let i = s.triode_current(v).unwrap();
        assert!(rel(i, 0.95 * v / 100.0) < 1e-12);
    }

    #[test]
    fn triode_outside_validity_is_domain_error() {
        let s = spec(100.0);
        assert!(matches!(
            s.triode_current(3.6),
            Err(DeviceError::TriodeDomain { .. })
        ));
        assert!(s.triode_current(-1e-3).is_err());
        let bank = BankConfig::default();
        let err = bank.resistor(4).current(4.0).unwrap_err();
        assert!(err.to_string().contains("bank resistor 4"), "{err}");
    }

    #[test]
    fn effective_resistance_limits() {
        let s = spec(15.86);
        assert_eq!(s.effective_resistance(0.0).unwrap(), s.on_resistance());
        assert!(rel(s.on_resistance(), 15.86) < 1e-14);
        let r = s.effective_resistance(35e-3).unwrap();
        assert!(rel(r, 15.86 / (1.0 - 0.005)) < 1e-12);
        // agrees with v / I away from zero
        let v = 0.4;
        assert!(
            rel(
                s.effective_resistance(v).unwrap(),
                v / s.triode_current(v).unwrap()
            ) < 1e-12
        );
        // continuity at zero
        assert!(rel(s.effective_resistance(1e-12).unwrap(), s.on_resistance()) < 1e-12);
    }

    #[test]
    fn effective_resistance_is_monotone() {
        let s = spec(1586.0);
        let mut last = 0.0;
        for k in 0..=350 {
            let r = s.effective_resistance(k as f64 * 0.01).unwrap();
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn bank_requires_five_entries() {
        let four = (0..4).map(|k| spec(10.0 * 10f64.powi(k))).collect();
        let err = BankConfig::new(four, vec![1.0; 4], false).unwrap_err();
        assert!(err.to_string().contains("exactly 5 entries"));
    }

    #[test]
    fn bank_rejects_off_ladder() {
        let mut rs: Vec<_> = (0..5).map(|k| spec(10.0 * 10f64.powi(k))).collect();
        rs[2] = spec(1300.0);
        assert!(BankConfig::new(rs.clone(), vec![1.0; 5], false).is_err());
        rs[2] = spec(1150.0);
        assert!(BankConfig::new(rs, vec![1.0; 5], false).is_ok());
        let rs: Vec<_> = (0..5).map(|_| spec(10.0)).collect();
        assert!(BankConfig::new(rs, vec![1.0; 5], false).is_err());
    }

    #[test]
    fn divider_closed_form_in_linear_mode() {
        let mem = MemristorState::from_resistance(1e3).unwrap();
        let r = BankResistor::linear(spec(15.86));
        let v = solve_bottom_voltage(&mem, &r, 0.2).unwrap();
        assert!(rel(v, 0.2 * 15.86 / 1015.86) < 1e-12);
        assert!(rel(v, 3.1225e-3) < 1e-4);
    }

    #[test]
    fn injected_trace_start_value() {
        let bank = BankConfig::default().with_linear_mode(true);
        let v = solve_injected_bottom_voltage(355.66e-9, &bank.resistor(0)).unwrap();
        assert!(rel(v, 5.641e-6) < 1e-3, "{v}");
    }

    #[test]
    fn vanishing_conductance_gives_vanishing_drop() {
        let r: BankResistor = spec(15.86).into();
        let v = solve_bottom_voltage(&MemristorState::new(1e-9).unwrap(), &r, 0.2).unwrap();
        assert!(v > 0.0 && v < 4e-8);
    }

    #[test]
    fn solver_residual_and_bounds() {
        let bank = BankConfig::default();
        for &g in &[1e-9, 1e-7, 1e-5, 1e-3, 5e-3, 1e-1] {
            let mem = MemristorState::new(g).unwrap();
            let mut last = 0.0;
            for k in 0..BANK_SIZE {
                let r = bank.resistor(k);
                let v = solve_bottom_voltage(&mem, &r, 0.2).unwrap();
                assert!(v > 0.0 && v < 0.2);
                assert!(v > last);
                last = v;
                let res = (0.2 - v) * g - r.current(v).unwrap();
                assert!(res.abs() <= SOLVER_TOLERANCE);
            }
        }
    }

    #[test]
    fn injected_current_beyond_device_capacity_is_domain_error() {
        let bank = BankConfig::default();
        // top resistor saturates at V_ov / (2 R) ~ 11 uA
        let err = solve_injected_bottom_voltage(1e-3, &bank.resistor(4)).unwrap_err();
        assert!(matches!(
            err,
            DeviceError::TriodeDomain { index: Some(4), .. }
        ));
        assert!(solve_injected_bottom_voltage(-1e-9, &bank.resistor(0)).is_err());
    }

    #[test]
    fn trims_scale_resistance() {
        let bank = BankConfig::default()
            .with_calibration([1.0, 1.016, 1.0, 1.0, 1.0])
            .unwrap()
            .with_linear_mode(true);
        let v = solve_injected_bottom_voltage(355.66e-9, &bank.resistor(1)).unwrap();
        assert!(rel(v, 355.66e-9 * 158.6 * 1.016) < 1e-12);
        assert!(rel(bank.nominal_resistance(1), 158.6 * 1.016) < 1e-12);
    }

    #[test]
    fn amplify_examples() {
        let amp = AmplifierSpec::default();
        let out = amp.amplify(0.0);
        assert_eq!(out.v_out, 56.54e-3);
        assert!(!out.saturated);
        let v = amp.amplify(6.031e-3).v_out;
        assert!(rel(v, 261.594e-3) < 1e-4);
        assert!(rel(v, 0.250) < 0.15);
        assert!(rel(amp.amplify(57.291e-6).v_out, 58.488e-3) < 1e-4);
        let sat = amp.amplify(1.0);
        assert_eq!(sat.v_out, 1.8);
        assert!(sat.saturated);
    }

    #[test]
    fn compare_examples() {
        let cmp = ComparatorSpec::default();
        assert!(cmp.compare(157.3e-3));
        assert!(!cmp.compare(58.49e-3));
        assert!(cmp.compare(0.250));
        let shifted = ComparatorSpec {
            offset: 1e-3,
            ..cmp
        };
        assert!(shifted.compare(156.4e-3));
    }

    #[test]
    fn comparator_threshold_must_sit_in_output_window() {
        let amp = AmplifierSpec::default();
        let cmp = ComparatorSpec {
            threshold: 2.0,
            offset: 0.0,
        };
        assert!(cmp.validate(&amp).is_err());
        assert!(ComparatorSpec::default().validate(&amp).is_ok());
    }
}

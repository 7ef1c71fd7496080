//! Sweeps, Monte Carlo variability and the single-fixed-resistor baseline.
//!
//! Every sweep evaluates its grid points independently (in parallel) and
//! returns rows in grid order, so results never depend on scheduling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::autorange::{autorange, AutorangeStatus, RangeCode, Source};
use crate::devices::{MemristorState, BANK_SIZE};
use crate::pipeline::{
    decode_current, read_out, read_out_with_array, readout_table, PipelineError, ReadoutResult,
    SystemConfig, Target, READOUT_COLUMNS,
};
use crate::report::{Field, Table};
use crate::sar_adc::{apply_mismatch, measure_inl_dnl, AdcConfig, AdcError, CapArray};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("baseline resistor index {0} outside 0..{BANK_SIZE}")]
    InvalidBaseline(usize),
    #[error("invalid Monte Carlo setup: {0}")]
    InvalidMonteCarlo(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Adc(#[from] AdcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Conductance,
    Current,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Conductance => "conductance",
            SweepVariable::Current => "current",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn log(variable: SweepVariable, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            variable,
            lo,
            hi,
            points,
            spacing: Spacing::Log,
        }
    }

    /// Conductance grid for the bottom-voltage comparison: 100 nS to 5 mS.
    pub fn conductance_default(points: usize) -> Self {
        Self::log(SweepVariable::Conductance, 100e-9, 5e-3, points)
    }

    /// Full input-current range: 20 nA to 2 mA.
    pub fn current_default(points: usize) -> Self {
        Self::log(SweepVariable::Current, 20e-9, 2e-3, points)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(AnalysisError::InvalidSweep(format!(
                "need lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.points < 2 {
            return Err(AnalysisError::InvalidSweep(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if self.spacing == Spacing::Log && !(self.lo > 0.0) {
            return Err(AnalysisError::InvalidSweep(format!(
                "log spacing needs lo > 0, got {}",
                self.lo
            )));
        }
        Ok(())
    }

    fn require(&self, variable: SweepVariable) -> Result<(), AnalysisError> {
        self.validate()?;
        if self.variable != variable {
            return Err(AnalysisError::InvalidSweep(format!(
                "expected a {variable} sweep, got a {} sweep",
                self.variable
            )));
        }
        Ok(())
    }

    /// Grid values with both endpoints exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i == n - 1 {
                    return self.hi;
                }
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Log => (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp(),
                    Spacing::Linear => self.lo + t * (self.hi - self.lo),
                }
            })
            .collect()
    }
}

/// The comparison design: one fixed resistor for every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineSpec {
    pub fixed_resistor_index: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self {
            fixed_resistor_index: 1,
        }
    }
}

impl BaselineSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.fixed_resistor_index >= BANK_SIZE {
            return Err(AnalysisError::InvalidBaseline(self.fixed_resistor_index));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Done(AutorangeStatus),
    Failed(String),
}

impl PointStatus {
    pub fn is_locked(&self) -> bool {
        *self == PointStatus::Done(AutorangeStatus::Locked)
    }
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointStatus::Done(s) => write!(f, "{s}"),
            PointStatus::Failed(msg) => write!(f, "error: {msg}"),
        }
    }
}

fn range_field(range: Option<RangeCode>) -> Field {
    Field::Text(range.map(|r| r.to_string()).unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionPoint {
    pub conductance: f64,
    pub range: Option<RangeCode>,
    pub v_bottom: f64,
    pub v_out: f64,
    pub baseline_v_bottom: f64,
    pub status: PointStatus,
}

pub const CONVERSION_COLUMNS: [&str; 6] = [
    "conductance_S",
    "range_onehot",
    "v_bottom_auto_V",
    "v_bottom_baseline_V",
    "v_out_V",
    "status",
];

fn conversion_point(g: f64, cfg: &SystemConfig, baseline: BaselineSpec) -> ConversionPoint {
    let failed = |msg: String| ConversionPoint {
        conductance: g,
        range: None,
        v_bottom: f64::NAN,
        v_out: f64::NAN,
        baseline_v_bottom: f64::NAN,
        status: PointStatus::Failed(format!("G = {g:e} S: {msg}")),
    };
    let mem = match MemristorState::new(g) {
        Ok(m) => m,
        Err(e) => return failed(e.to_string()),
    };
    let source = Source::Memristor {
        mem,
        v_read: cfg.v_read,
    };
    let baseline_v_bottom = match source.bottom_voltage(&cfg.bank, baseline.fixed_resistor_index) {
        Ok(v) => v,
        Err(e) => return failed(format!("baseline: {e}")),
    };
    match autorange(&source, &cfg.front_end()) {
        Ok(outcome) => ConversionPoint {
            conductance: g,
            range: Some(outcome.range),
            v_bottom: outcome.last().v_bottom,
            v_out: outcome.v_out,
            baseline_v_bottom,
            status: PointStatus::Done(outcome.status),
        },
        Err(e) => failed(e.to_string()),
    }
}

/// Autoranged and fixed-resistor bottom voltages at arbitrary conductances.
pub fn conversion_at(
    conductances: &[f64],
    cfg: &SystemConfig,
    baseline: BaselineSpec,
) -> Result<Vec<ConversionPoint>, AnalysisError> {
    cfg.validate()?;
    baseline.validate()?;
    Ok(conductances
        .par_iter()
        .map(|&g| conversion_point(g, cfg, baseline))
        .collect())
}

pub fn sweep_conversion(
    spec: &SweepSpec,
    cfg: &SystemConfig,
    baseline: BaselineSpec,
) -> Result<Vec<ConversionPoint>, AnalysisError> {
    spec.require(SweepVariable::Conductance)?;
    conversion_at(&spec.values(), cfg, baseline)
}

pub fn conversion_table(points: &[ConversionPoint]) -> Table {
    let mut t = Table::new(&CONVERSION_COLUMNS);
    for p in points {
        t.push(vec![
            Field::Sci(p.conductance),
            range_field(p.range),
            Field::Sci(p.v_bottom),
            Field::Sci(p.baseline_v_bottom),
            Field::Sci(p.v_out),
            Field::Text(p.status.to_string()),
        ]);
    }
    t
}

/// Bottom voltages that bound the read-current envelopes.
pub const ENVELOPE_BOTTOM_VOLTAGES: (f64, f64) = (3e-3, 35e-3);

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityPoint {
    pub conductance: f64,
    pub ideal_current: f64,
    pub auto_current: f64,
    pub baseline_current: f64,
    /// Relative shortfall of the read current against `v_read * G`.
    pub auto_deviation: f64,
    pub baseline_deviation: f64,
    pub envelope_low: f64,
    pub envelope_high: f64,
    pub status: PointStatus,
}

pub const LINEARITY_COLUMNS: [&str; 9] = [
    "conductance_S",
    "ideal_A",
    "auto_A",
    "baseline_A",
    "auto_deviation",
    "baseline_deviation",
    "envelope_3mV_A",
    "envelope_35mV_A",
    "status",
];

pub fn sweep_linearity(
    spec: &SweepSpec,
    cfg: &SystemConfig,
    baseline: BaselineSpec,
) -> Result<Vec<LinearityPoint>, AnalysisError> {
    let conversion = sweep_conversion(spec, cfg, baseline)?;
    let v_read = cfg.v_read;
    let (env_lo, env_hi) = ENVELOPE_BOTTOM_VOLTAGES;
    Ok(conversion
        .into_iter()
        .map(|p| {
            let g = p.conductance;
            let ideal = v_read * g;
            let auto = (v_read - p.v_bottom) * g;
            let base = (v_read - p.baseline_v_bottom) * g;
            LinearityPoint {
                conductance: g,
                ideal_current: ideal,
                auto_current: auto,
                baseline_current: base,
                auto_deviation: (ideal - auto) / ideal,
                baseline_deviation: (ideal - base) / ideal,
                envelope_low: (v_read - env_lo) * g,
                envelope_high: (v_read - env_hi) * g,
                status: p.status,
            }
        })
        .collect())
}

pub fn linearity_table(points: &[LinearityPoint]) -> Table {
    let mut t = Table::new(&LINEARITY_COLUMNS);
    for p in points {
        t.push(vec![
            Field::Sci(p.conductance),
            Field::Sci(p.ideal_current),
            Field::Sci(p.auto_current),
            Field::Sci(p.baseline_current),
            Field::Sci(p.auto_deviation),
            Field::Sci(p.baseline_deviation),
            Field::Sci(p.envelope_low),
            Field::Sci(p.envelope_high),
            Field::Text(p.status.to_string()),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullRangePoint {
    pub current: f64,
    pub result: Result<ReadoutResult, String>,
}

impl FullRangePoint {
    pub fn locked(&self) -> Option<&ReadoutResult> {
        self.result
            .as_ref()
            .ok()
            .filter(|r| r.status == AutorangeStatus::Locked)
    }
}

/// Full read-out at arbitrary injected currents.
pub fn full_range_at(
    currents: &[f64],
    cfg: &SystemConfig,
) -> Result<Vec<FullRangePoint>, AnalysisError> {
    cfg.validate()?;
    Ok(currents
        .par_iter()
        .map(|&i| FullRangePoint {
            current: i,
            result: read_out(Target::Current(i), cfg).map_err(|e| format!("I = {i:e} A: {e}")),
        })
        .collect())
}

pub fn sweep_full_range(
    spec: &SweepSpec,
    cfg: &SystemConfig,
) -> Result<Vec<FullRangePoint>, AnalysisError> {
    spec.require(SweepVariable::Current)?;
    full_range_at(&spec.values(), cfg)
}

pub fn full_range_table(points: &[FullRangePoint]) -> Table {
    let mut t = Table::new(&READOUT_COLUMNS);
    for p in points {
        match &p.result {
            Ok(r) => t.push(r.fields()),
            Err(msg) => {
                let mut row = vec![Field::Sci(p.current)];
                row.extend([
                    Field::Text(String::new()),
                    Field::Text(String::new()),
                    Field::Sci(f64::NAN),
                    Field::Sci(f64::NAN),
                    Field::Text(String::new()),
                    Field::Sci(f64::NAN),
                    Field::Sci(f64::NAN),
                    Field::Text(format!("error: {msg}")),
                ]);
                t.push(row);
            }
        }
    }
    t
}

/// A maximal run of consecutive grid points locked at the same range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeDomain {
    pub range: RangeCode,
    pub current_lo: f64,
    pub current_hi: f64,
    pub points: usize,
}

/// Splits a sweep ordered by increasing current into range domains. Points
/// that did not lock end the current domain.
pub fn range_domains(points: &[FullRangePoint]) -> Vec<RangeDomain> {
    let mut domains: Vec<RangeDomain> = Vec::new();
    let mut open = false;
    for p in points {
        let Some(r) = p.locked() else {
            open = false;
            continue;
        };
        match domains.last_mut() {
            Some(d) if open && d.range == r.range => {
                d.current_hi = p.current;
                d.points += 1;
            }
            _ => domains.push(RangeDomain {
                range: r.range,
                current_lo: p.current,
                current_hi: p.current,
                points: 1,
            }),
        }
        open = true;
    }
    domains
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripPoint {
    pub current: f64,
    pub decoded: f64,
    pub relative_error: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripStats {
    pub points: Vec<RoundtripPoint>,
    /// Statistics over locked points only.
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub excluded: usize,
}

pub const ROUNDTRIP_COLUMNS: [&str; 4] = ["input_A", "decoded_A", "relative_error", "status"];

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn roundtrip_error(
    spec: &SweepSpec,
    cfg: &SystemConfig,
) -> Result<RoundtripStats, AnalysisError> {
    let sweep = sweep_full_range(spec, cfg)?;
    let points: Vec<RoundtripPoint> = sweep
        .into_iter()
        .map(|p| match p.result {
            Ok(r) => RoundtripPoint {
                current: p.current,
                decoded: r.decoded_current,
                relative_error: ((r.decoded_current - p.current) / p.current).abs(),
                status: PointStatus::Done(r.status),
            },
            Err(msg) => RoundtripPoint {
                current: p.current,
                decoded: f64::NAN,
                relative_error: f64::NAN,
                status: PointStatus::Failed(msg),
            },
        })
        .collect();
    let mut errors: Vec<f64> = points
        .iter()
        .filter(|p| p.status.is_locked())
        .map(|p| p.relative_error)
        .collect();
    let excluded = points.len() - errors.len();
    errors.sort_by(f64::total_cmp);
    let mean = if errors.is_empty() {
        f64::NAN
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    Ok(RoundtripStats {
        max: errors.last().copied().unwrap_or(f64::NAN),
        mean,
        p50: percentile(&errors, 50.0),
        p95: percentile(&errors, 95.0),
        p99: percentile(&errors, 99.0),
        excluded,
        points,
    })
}

impl RoundtripStats {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&ROUNDTRIP_COLUMNS);
        for p in &self.points {
            t.push(vec![
                Field::Sci(p.current),
                Field::Sci(p.decoded),
                Field::Sci(p.relative_error),
                Field::Text(p.status.to_string()),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        metric_table(&[
            ("max", Field::Sci(self.max)),
            ("mean", Field::Sci(self.mean)),
            ("p50", Field::Sci(self.p50)),
            ("p95", Field::Sci(self.p95)),
            ("p99", Field::Sci(self.p99)),
            ("excluded", Field::Int(self.excluded as i64)),
        ])
    }
}

pub fn metric_table(rows: &[(&str, Field)]) -> Table {
    let mut t = Table::new(&["metric", "value"]);
    for (name, value) in rows {
        t.push(vec![Field::Text(name.to_string()), value.clone()]);
    }
    t
}

/// Standard deviations of the Monte Carlo perturbations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSigmas {
    /// Relative, per bank resistor.
    pub trim: f64,
    /// Relative amplifier gain error.
    pub gain: f64,
    /// Absolute common-mode offset in volts.
    pub vcm: f64,
    /// Relative, per ADC unit capacitor.
    pub cap: f64,
}

impl McSigmas {
    pub const ZERO: McSigmas = McSigmas {
        trim: 0.0,
        gain: 0.0,
        vcm: 0.0,
        cap: 0.0,
    };

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (name, s) in [
            ("trim", self.trim),
            ("gain", self.gain),
            ("vcm", self.vcm),
            ("cap", self.cap),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(AnalysisError::InvalidMonteCarlo(format!(
                    "sigma_{name} must be >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for McSigmas {
    fn default() -> Self {
        Self {
            trim: 0.063,
            gain: 0.043,
            vcm: 0.002,
            cap: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSpec {
    pub trials: usize,
    pub grid: SweepSpec,
    pub sigmas: McSigmas,
    pub seed: u64,
}

impl McSpec {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            grid: SweepSpec::current_default(25),
            sigmas: McSigmas::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Amplifier output per grid point; empty when the trial failed.
    pub v_out: Vec<f64>,
    /// Worst relative error decoding with the nominal configuration.
    pub max_decode_error: f64,
    pub in_range: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub currents: Vec<f64>,
    pub trials: Vec<TrialResult>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Per-point coefficient of variation of `v_out`.
    pub cv: Vec<f64>,
    /// Three times the median per-point coefficient of variation.
    pub spread: f64,
    /// Failed trials count as out of range.
    pub in_range_fraction: f64,
    pub failures: usize,
}

/// Independent random stream for one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn normal(mean: f64, sigma: f64) -> Normal<f64> {
    Normal::new(mean, sigma).expect("sigma validated as finite and non-negative")
}

/// One perturbed copy of the system and its ADC capacitor array.
pub fn perturb(
    cfg: &SystemConfig,
    sigmas: &McSigmas,
    rng: &mut ChaCha8Rng,
) -> Result<(SystemConfig, CapArray), String> {
    let trim = normal(1.0, sigmas.trim);
    let mut calibration = *cfg.bank.calibration();
    for c in &mut calibration {
        *c *= trim.sample(rng);
    }
    let mut out = cfg.clone();
    out.bank = cfg
        .bank
        .clone()
        .with_calibration(calibration)
        .map_err(|e| e.to_string())?;
    out.amp.gain_error += normal(0.0, sigmas.gain).sample(rng);
    out.amp.common_mode += normal(0.0, sigmas.vcm).sample(rng);
    out.validate().map_err(|e| e.to_string())?;
    let ideal = CapArray::ideal(&cfg.adc).map_err(|e| e.to_string())?;
    let array = apply_mismatch(&ideal, sigmas.cap, rng.random()).map_err(|e| e.to_string())?;
    Ok((out, array))
}

fn run_trial(trial: usize, currents: &[f64], cfg: &SystemConfig, spec: &McSpec) -> TrialResult {
    let failed = |msg: String| TrialResult {
        trial,
        v_out: Vec::new(),
        max_decode_error: f64::NAN,
        in_range: false,
        error: Some(msg),
    };
    let mut rng = trial_rng(spec.seed, trial);
    let (perturbed, array) = match perturb(cfg, &spec.sigmas, &mut rng) {
        Ok(x) => x,
        Err(e) => return failed(e),
    };
    let (lo, hi) = cfg.adc.input_range;
    let mut v_out = Vec::with_capacity(currents.len());
    let mut max_decode_error = 0.0f64;
    for &i in currents {
        match read_out_with_array(Target::Current(i), &perturbed, &array) {
            Ok(r) => {
                v_out.push(r.v_out);
                if let Ok(d) = decode_current(r.range, r.code, cfg) {
                    max_decode_error = max_decode_error.max(((d - i) / i).abs());
                }
            }
            Err(PipelineError::OverRange { v_out: v }) => v_out.push(v),
            Err(e) => return failed(format!("I = {i:e} A: {e}")),
        }
    }
    let in_range = v_out.iter().all(|&v| v >= lo && v <= hi);
    TrialResult {
        trial,
        v_out,
        max_decode_error,
        in_range,
        error: None,
    }
}

pub fn monte_carlo(cfg: &SystemConfig, spec: &McSpec) -> Result<McSummary, AnalysisError> {
    cfg.validate()?;
    spec.sigmas.validate()?;
    spec.grid.require(SweepVariable::Current)?;
    if spec.trials == 0 {
        return Err(AnalysisError::InvalidMonteCarlo(
            "need at least one trial".into(),
        ));
    }
    let currents = spec.grid.values();
    let trials: Vec<TrialResult> = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(t, &currents, cfg, spec))
        .collect();

    let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.error.is_none()).collect();
    let failures = trials.len() - ok.len();
    let n = ok.len() as f64;
    let mut mean = Vec::with_capacity(currents.len());
    let mut std = Vec::with_capacity(currents.len());
    let mut cv = Vec::with_capacity(currents.len());
    for j in 0..currents.len() {
        // shifted by the first sample so identical samples give exactly zero
        let x0 = ok.first().map_or(0.0, |t| t.v_out[j]);
        let d: Vec<f64> = ok.iter().map(|t| t.v_out[j] - x0).collect();
        let sum = d.iter().sum::<f64>();
        let m = x0 + sum / n;
        let s = if ok.len() > 1 {
            ((d.iter().map(|x| x * x).sum::<f64>() - sum * sum / n) / (n - 1.0))
                .max(0.0)
                .sqrt()
        } else {
            0.0
        };
        mean.push(m);
        std.push(s);
        cv.push(s / m);
    }
    let mut sorted = cv.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let in_range = trials.iter().filter(|t| t.in_range).count();
    Ok(McSummary {
        in_range_fraction: in_range as f64 / trials.len() as f64,
        spread: 3.0 * median,
        currents,
        trials,
        mean,
        std,
        cv,
        failures,
    })
}

impl McSummary {
    pub fn point_table(&self) -> Table {
        let mut t = Table::new(&["input_A", "mean_v_out_V", "std_v_out_V", "cv"]);
        for j in 0..self.currents.len() {
            t.push(vec![
                Field::Sci(self.currents[j]),
                Field::Sci(self.mean[j]),
                Field::Sci(self.std[j]),
                Field::Sci(self.cv[j]),
            ]);
        }
        t
    }

    pub fn trial_table(&self) -> Table {
        let mut t = Table::new(&[
            "trial",
            "min_v_out_V",
            "max_v_out_V",
            "max_decode_error",
            "in_range",
            "status",
        ]);
        for tr in &self.trials {
            let lo = tr.v_out.iter().copied().fold(f64::NAN, f64::min);
            let hi = tr.v_out.iter().copied().fold(f64::NAN, f64::max);
            t.push(vec![
                Field::Int(tr.trial as i64),
                Field::Sci(lo),
                Field::Sci(hi),
                Field::Sci(tr.max_decode_error),
                Field::Bool(tr.in_range),
                Field::Text(match &tr.error {
                    None => "ok".into(),
                    Some(e) => format!("error: {e}"),
                }),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        metric_table(&[
            ("trials", Field::Int(self.trials.len() as i64)),
            ("failures", Field::Int(self.failures as i64)),
            ("spread", Field::Sci(self.spread)),
            ("in_range_fraction", Field::Sci(self.in_range_fraction)),
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InlDnlTrial {
    pub trial: usize,
    pub inl: (f64, f64),
    pub dnl: (f64, f64),
    pub max_abs_inl: f64,
    pub max_abs_dnl: f64,
    pub missing_codes: usize,
}

/// Transition-voltage INL/DNL over `trials` mismatched capacitor arrays.
pub fn inl_dnl_distribution(
    adc: &AdcConfig,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<InlDnlTrial>, AnalysisError> {
    let ideal = CapArray::ideal(adc)?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(AnalysisError::InvalidMonteCarlo(format!(
            "sigma_cap must be >= 0, got {sigma}"
        )));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let array = apply_mismatch(&ideal, sigma, trial_rng(seed, t).random())?;
            let r = measure_inl_dnl(adc, &array)?;
            Ok(InlDnlTrial {
                trial: t,
                inl: r.inl_range(),
                dnl: r.dnl_range(),
                max_abs_inl: r.max_abs_inl(),
                max_abs_dnl: r.max_abs_dnl(),
                missing_codes: r.missing_codes.len(),
            })
        })
        .collect()
}

pub fn inl_dnl_table(trials: &[InlDnlTrial]) -> Table {
    let mut t = Table::new(&[
        "trial",
        "inl_min_lsb",
        "inl_max_lsb",
        "dnl_min_lsb",
        "dnl_max_lsb",
        "missing_codes",
    ]);
    for tr in trials {
        t.push(vec![
            Field::Int(tr.trial as i64),
            Field::Sci(tr.inl.0),
            Field::Sci(tr.inl.1),
            Field::Sci(tr.dnl.0),
            Field::Sci(tr.dnl.1),
            Field::Int(tr.missing_codes as i64),
        ]);
    }
    t
}

pub fn readout_rows(points: &[FullRangePoint]) -> Table {
    let ok: Vec<ReadoutResult> = points
        .iter()
        .filter_map(|p| p.result.clone().ok())
        .collect();
    readout_table(&ok)
}

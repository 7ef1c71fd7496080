//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments start with '#'
//! [readout]
//! v_read = 0.2
//! [adc]
//! architecture = conventional
//! bank.trims = 1, 1, 1, 1.02, 1
//! ```
//!
//! Keys are `section.name`, either written in full or under a `[section]`
//! header. Lists are comma separated. Every key has a default, so an empty
//! file describes the reference system.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::analysis::{BaselineSpec, McSigmas, McSpec, SweepSpec, SweepVariable};
use crate::devices::{
    BankConfig, NmosResistorSpec, BANK_SIZE, DEFAULT_OVERDRIVE, DEFAULT_R0,
    DEFAULT_THRESHOLD_VOLTAGE,
};
use crate::pipeline::SystemConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{location}: unknown key `{key}`")]
    UnknownKey { location: String, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Bank inputs as written, kept so the echo reproduces them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSettings {
    pub r0: f64,
    /// Explicit on-resistances; empty means the decade ladder from `r0`.
    pub resistors: Vec<f64>,
    pub threshold_voltage: f64,
    pub overdrive: f64,
    pub trims: Vec<f64>,
    pub linear_mode: bool,
}

impl Default for BankSettings {
    fn default() -> Self {
        Self {
            r0: DEFAULT_R0,
            resistors: Vec::new(),
            threshold_voltage: DEFAULT_THRESHOLD_VOLTAGE,
            overdrive: DEFAULT_OVERDRIVE,
            trims: vec![1.0; BANK_SIZE],
            linear_mode: false,
        }
    }
}

impl BankSettings {
    pub fn build(&self) -> Result<BankConfig, ConfigError> {
        let on_resistances: Vec<f64> = if self.resistors.is_empty() {
            (0..BANK_SIZE)
                .map(|k| self.r0 * 10f64.powi(k as i32))
                .collect()
        } else {
            self.resistors.clone()
        };
        let gate = self.threshold_voltage + self.overdrive;
        let specs = on_resistances
            .iter()
            .map(|&r| NmosResistorSpec::from_on_resistance(r, self.threshold_voltage, gate))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Invalid(format!("bank: {e}")))?;
        BankConfig::new(specs, self.trims.clone(), self.linear_mode)
            .map_err(|e| ConfigError::Invalid(format!("bank: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub conductance: (f64, f64),
    pub current: (f64, f64),
    pub roundtrip: (f64, f64),
    pub points: usize,
    pub baseline_index: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            conductance: (100e-9, 5e-3),
            current: (20e-9, 2e-3),
            roundtrip: (25e-9, 1.8e-3),
            points: 500,
            baseline_index: 1,
        }
    }
}

impl SweepSettings {
    pub fn conductance_spec(&self, points: usize) -> SweepSpec {
        SweepSpec::log(
            SweepVariable::Conductance,
            self.conductance.0,
            self.conductance.1,
            points,
        )
    }

    pub fn current_spec(&self, points: usize) -> SweepSpec {
        SweepSpec::log(
            SweepVariable::Current,
            self.current.0,
            self.current.1,
            points,
        )
    }

    pub fn roundtrip_spec(&self, points: usize) -> SweepSpec {
        SweepSpec::log(
            SweepVariable::Current,
            self.roundtrip.0,
            self.roundtrip.1,
            points,
        )
    }

    pub fn baseline(&self) -> BaselineSpec {
        BaselineSpec {
            fixed_resistor_index: self.baseline_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSettings {
    pub trials: usize,
    pub grid_points: usize,
    pub current: (f64, f64),
    pub sigmas: McSigmas,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        let spec = McSpec::new(1000, 0);
        Self {
            trials: spec.trials,
            grid_points: spec.grid.points,
            current: (spec.grid.lo, spec.grid.hi),
            sigmas: spec.sigmas,
        }
    }
}

impl MonteCarloSettings {
    pub fn spec(&self, trials: usize, seed: u64) -> McSpec {
        McSpec {
            trials,
            grid: SweepSpec::log(
                SweepVariable::Current,
                self.current.0,
                self.current.1,
                self.grid_points,
            ),
            sigmas: self.sigmas,
            seed,
        }
    }
}

/// Command-line choices recorded in a run's metadata sidecar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSettings {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub current: Option<f64>,
    pub bits: Option<u32>,
    pub points: Option<usize>,
    pub trials: Option<usize>,
    pub version: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub system: SystemConfig,
    pub bank: BankSettings,
    pub sweep: SweepSettings,
    pub montecarlo: MonteCarloSettings,
    pub run: RunSettings,
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .map_err(|_| format!("expected a number, got `{v}`"))
}

fn parse_int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_f64(x.trim())).collect()
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

enum SetError {
    Unknown,
    Value(String),
}

impl From<String> for SetError {
    fn from(s: String) -> Self {
        SetError::Value(s)
    }
}

impl Config {
    fn set(&mut self, key: &str, v: &str) -> Result<(), SetError> {
        let s = &mut self.system;
        match key {
            "readout.v_read" => s.v_read = parse_f64(v)?,

            "bank.r0" => self.bank.r0 = parse_f64(v)?,
            "bank.resistors" => self.bank.resistors = parse_list(v)?,
            "bank.threshold_voltage" => self.bank.threshold_voltage = parse_f64(v)?,
            "bank.overdrive" => self.bank.overdrive = parse_f64(v)?,
            "bank.trims" => self.bank.trims = parse_list(v)?,
            "bank.linear_mode" => self.bank.linear_mode = parse_bool(v)?,

            "amplifier.gain" => s.amp.gain = parse_f64(v)?,
            "amplifier.common_mode" => s.amp.common_mode = parse_f64(v)?,
            "amplifier.gain_error" => s.amp.gain_error = parse_f64(v)?,
            "amplifier.clip_min" => s.amp.output_clip.0 = parse_f64(v)?,
            "amplifier.clip_max" => s.amp.output_clip.1 = parse_f64(v)?,

            "comparator.threshold" => s.cmp.threshold = parse_f64(v)?,
            "comparator.offset" => s.cmp.offset = parse_f64(v)?,

            "adc.bits" => s.adc.bits = parse_int(v)?,
            "adc.v_lo" => s.adc.input_range.0 = parse_f64(v)?,
            "adc.v_hi" => s.adc.input_range.1 = parse_f64(v)?,
            "adc.v_ref" => s.adc.v_ref = parse_f64(v)?,
            "adc.unit_capacitance" => s.adc.unit_capacitance = parse_f64(v)?,
            "adc.architecture" => s.adc.architecture = v.parse().map_err(|e| format!("{e}"))?,

            "timing.selector_clock" => s.selector_clock = parse_f64(v)?,
            "timing.adc_sampling" => s.adc_sampling = parse_f64(v)?,
            "timing.conversion_time" => s.conversion_time = parse_f64(v)?,

            "sweep.conductance_lo" => self.sweep.conductance.0 = parse_f64(v)?,
            "sweep.conductance_hi" => self.sweep.conductance.1 = parse_f64(v)?,
            "sweep.current_lo" => self.sweep.current.0 = parse_f64(v)?,
            "sweep.current_hi" => self.sweep.current.1 = parse_f64(v)?,
            "sweep.roundtrip_lo" => self.sweep.roundtrip.0 = parse_f64(v)?,
            "sweep.roundtrip_hi" => self.sweep.roundtrip.1 = parse_f64(v)?,
            "sweep.points" => self.sweep.points = parse_int(v)?,
            "sweep.baseline_index" => self.sweep.baseline_index = parse_int(v)?,

            "montecarlo.trials" => self.montecarlo.trials = parse_int(v)?,
            "montecarlo.grid_points" => self.montecarlo.grid_points = parse_int(v)?,
            "montecarlo.current_lo" => self.montecarlo.current.0 = parse_f64(v)?,
            "montecarlo.current_hi" => self.montecarlo.current.1 = parse_f64(v)?,
            "montecarlo.sigma_trim" => self.montecarlo.sigmas.trim = parse_f64(v)?,
            "montecarlo.sigma_gain" => self.montecarlo.sigmas.gain = parse_f64(v)?,
            "montecarlo.sigma_vcm" => self.montecarlo.sigmas.vcm = parse_f64(v)?,
            "montecarlo.sigma_cap" => self.montecarlo.sigmas.cap = parse_f64(v)?,

            "run.command" => self.run.command = Some(v.to_string()),
            "run.seed" => self.run.seed = Some(parse_int(v)?),
            "run.current" => self.run.current = Some(parse_f64(v)?),
            "run.bits" => self.run.bits = Some(parse_int(v)?),
            "run.points" => self.run.points = Some(parse_int(v)?),
            "run.trials" => self.run.trials = Some(parse_int(v)?),
            "run.version" => self.run.version = Some(v.to_string()),

            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    fn assign(&mut self, key: &str, value: &str, location: String) -> Result<(), ConfigError> {
        self.set(key, unquote(value)).map_err(|e| match e {
            SetError::Unknown => ConfigError::UnknownKey {
                location,
                key: key.to_string(),
            },
            SetError::Value(message) => ConfigError::Parse {
                location,
                message: format!("{key}: {message}"),
            },
        })
    }

    /// Applies the lines of `text` without validating the result.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let location = format!("{origin}:{}", n + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').map(str::trim).filter(|s| {
                    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                });
                match name {
                    Some(name) => section = Some(name.to_string()),
                    None => {
                        return Err(ConfigError::Parse {
                            location,
                            message: format!("malformed section header `{line}`"),
                        })
                    }
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    location,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    location,
                    message: "empty key".into(),
                });
            }
            let full = match (&section, key.contains('.')) {
                (Some(sec), false) => format!("{sec}.{key}"),
                _ => key.to_string(),
            };
            self.assign(&full, value.trim(), location)?;
        }
        Ok(())
    }

    /// Applies one `key=value` command-line override.
    pub fn apply_override(&mut self, assignment: &str, index: usize) -> Result<(), ConfigError> {
        let location = format!("--set #{}", index + 1);
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(ConfigError::Parse {
                location,
                message: format!("expected key=value, got `{assignment}`"),
            });
        };
        self.assign(key.trim(), value.trim(), location)
    }

    /// Rebuilds derived parts and checks every invariant.
    pub fn finalize(&mut self) -> Result<(), ConfigError> {
        self.system.bank = self.bank.build()?;
        self.system
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sweep
            .baseline()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for spec in [
            self.sweep.conductance_spec(self.sweep.points),
            self.sweep.current_spec(self.sweep.points),
            self.sweep.roundtrip_spec(self.sweep.points),
        ] {
            spec.validate()
                .map_err(|e| ConfigError::Invalid(format!("sweep: {e}")))?;
        }
        let mc = self.montecarlo.spec(self.montecarlo.trials, 0);
        mc.grid
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("montecarlo: {e}")))?;
        mc.sigmas
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        cfg.apply_text(text, origin)?;
        cfg.finalize()?;
        Ok(cfg)
    }

    /// Every key with its current value, in a form `parse` reads back exactly.
    pub fn echo(&self) -> String {
        fn list(xs: &[f64]) -> String {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        }
        let s = &self.system;
        let b = &self.bank;
        let w = &self.sweep;
        let m = &self.montecarlo;
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        };
        section("readout", vec![("v_read", s.v_read.to_string())]);
        section(
            "bank",
            vec![
                ("r0", b.r0.to_string()),
                ("resistors", list(&b.resistors)),
                ("threshold_voltage", b.threshold_voltage.to_string()),
                ("overdrive", b.overdrive.to_string()),
                ("trims", list(&b.trims)),
                ("linear_mode", b.linear_mode.to_string()),
            ],
        );
        section(
            "amplifier",
            vec![
                ("gain", s.amp.gain.to_string()),
                ("common_mode", s.amp.common_mode.to_string()),
                ("gain_error", s.amp.gain_error.to_string()),
                ("clip_min", s.amp.output_clip.0.to_string()),
                ("clip_max", s.amp.output_clip.1.to_string()),
            ],
        );
        section(
            "comparator",
            vec![
                ("threshold", s.cmp.threshold.to_string()),
                ("offset", s.cmp.offset.to_string()),
            ],
        );
        section(
            "adc",
            vec![
                ("bits", s.adc.bits.to_string()),
                ("v_lo", s.adc.input_range.0.to_string()),
                ("v_hi", s.adc.input_range.1.to_string()),
                ("v_ref", s.adc.v_ref.to_string()),
                ("unit_capacitance", s.adc.unit_capacitance.to_string()),
                ("architecture", s.adc.architecture.to_string()),
            ],
        );
        section(
            "timing",
            vec![
                ("selector_clock", s.selector_clock.to_string()),
                ("adc_sampling", s.adc_sampling.to_string()),
                ("conversion_time", s.conversion_time.to_string()),
            ],
        );
        section(
            "sweep",
            vec![
                ("conductance_lo", w.conductance.0.to_string()),
                ("conductance_hi", w.conductance.1.to_string()),
                ("current_lo", w.current.0.to_string()),
                ("current_hi", w.current.1.to_string()),
                ("roundtrip_lo", w.roundtrip.0.to_string()),
                ("roundtrip_hi", w.roundtrip.1.to_string()),
                ("points", w.points.to_string()),
                ("baseline_index", w.baseline_index.to_string()),
            ],
        );
        section(
            "montecarlo",
            vec![
                ("trials", m.trials.to_string()),
                ("grid_points", m.grid_points.to_string()),
                ("current_lo", m.current.0.to_string()),
                ("current_hi", m.current.1.to_string()),
                ("sigma_trim", m.sigmas.trim.to_string()),
                ("sigma_gain", m.sigmas.gain.to_string()),
                ("sigma_vcm", m.sigmas.vcm.to_string()),
                ("sigma_cap", m.sigmas.cap.to_string()),
            ],
        );
        let r = &self.run;
        let mut run = Vec::new();
        if let Some(c) = &r.command {
            run.push(("command", c.clone()));
        }
        if let Some(x) = r.seed {
            run.push(("seed", x.to_string()));
        }
        if let Some(x) = r.current {
            run.push(("current", x.to_string()));
        }
        if let Some(x) = r.bits {
            run.push(("bits", x.to_string()));
        }
        if let Some(x) = r.points {
            run.push(("points", x.to_string()));
        }
        if let Some(x) = r.trials {
            run.push(("trials", x.to_string()));
        }
        if let Some(v) = &r.version {
            run.push(("version", v.clone()));
        }
        if !run.is_empty() {
            section("run", run);
        }
        out
    }
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Config::parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sar_adc::Architecture;

    #[test]
    fn empty_file_gives_reference_system() {
        let cfg = Config::parse("", "empty").unwrap();
        let s = &cfg.system;
        assert_eq!(s.v_read, 0.2);
        assert_eq!(s.bank.nominal_resistance(0), 15.86);
        assert!((s.bank.nominal_resistance(4) - 158.6e3).abs() < 1e-6);
        assert_eq!(s.amp.gain, 34.0);
        assert_eq!(s.amp.common_mode, 56.54e-3);
        assert_eq!(s.cmp.threshold, 157.3e-3);
        assert_eq!(s.adc.input_range, (0.1, 1.7));
        assert_eq!(s.adc.bits, 12);
        assert_eq!(s.adc.unit_capacitance, 30e-15);
        assert_eq!(s.adc.architecture, Architecture::SplitMsb);
        assert_eq!(s.adc_sampling, 250e3);
        assert_eq!(*s, SystemConfig::default());
    }

    #[test]
    fn sections_and_dotted_keys() {
        let text = "# header\n[adc]\narchitecture = conventional # trailing\nbits = 10\n\nbank.linear_mode = true\n[readout]\nv_read = 0.15\n";
        let cfg = Config::parse(text, "t").unwrap();
        assert_eq!(cfg.system.adc.architecture, Architecture::Conventional);
        assert_eq!(cfg.system.adc.bits, 10);
        assert!(cfg.system.bank.linear_mode());
        assert_eq!(cfg.system.v_read, 0.15);
    }

    #[test]
    fn override_accepted() {
        let mut cfg = Config::default();
        cfg.apply_override("adc.architecture=conventional", 0)
            .unwrap();
        cfg.finalize().unwrap();
        assert_eq!(cfg.system.adc.architecture, Architecture::Conventional);
    }

    #[test]
    fn four_resistors_rejected() {
        let err = Config::parse("bank.resistors = 4", "t").unwrap_err();
        assert!(err.to_string().contains("exactly 5 entries"), "{err}");
        let err = Config::parse("[bank]\ntrims = 1, 1", "t").unwrap_err();
        assert!(err.to_string().contains("exactly 5 entries"), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("[adc]\n\nbits = twelve\n", "f.cfg").unwrap_err();
        assert!(err.to_string().starts_with("f.cfg:3:"), "{err}");
        let err = Config::parse("[adc]\nbogus = 1\n", "f.cfg").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
        assert!(err.to_string().contains("f.cfg:2") && err.to_string().contains("adc.bogus"));
        let err = Config::parse("just words\n", "f.cfg").unwrap_err();
        assert!(err.to_string().starts_with("f.cfg:1:"));
        let err = Config::parse("[adc\n", "f.cfg").unwrap_err();
        assert!(err.to_string().starts_with("f.cfg:1:"));
    }

    #[test]
    fn validation_errors_name_invariant() {
        let err = Config::parse("adc.v_hi = 0.05", "t").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(err.to_string().contains("v_hi > v_lo"), "{err}");
        assert!(Config::parse("sweep.baseline_index = 7", "t").is_err());
        assert!(Config::parse("montecarlo.sigma_gain = -1", "t").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "adc.bits = 10\nbank.trims = 1, 1.01, 0.99, 1, 1.0000000000000002\namplifier.common_mode = 0.0566\nrun.seed = 7\nrun.command = montecarlo\nmontecarlo.sigma_cap = 0.003\n";
        let cfg = Config::parse(text, "t").unwrap();
        let again = Config::parse(&cfg.echo(), "echo").unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.echo(), again.echo());
    }

    #[test]
    fn explicit_resistor_list() {
        let cfg = Config::parse("bank.resistors = 16, 160, 1600, 16000, 160000", "t").unwrap();
        assert_eq!(cfg.system.bank.nominal_resistance(2), 1600.0);
        let again = Config::parse(&cfg.echo(), "echo").unwrap();
        assert_eq!(cfg, again);
    }
}

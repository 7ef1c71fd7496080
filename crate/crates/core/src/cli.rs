//! Command-line front end: load a configuration, run one experiment, write
//! `<command>.csv` plus a `<command>.meta` sidecar into the output directory.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rand::Rng;
use thiserror::Error;

use crate::analysis::{
    conversion_table, full_range_table, inl_dnl_distribution, inl_dnl_table, linearity_table,
    metric_table, monte_carlo, roundtrip_error, sweep_conversion, sweep_full_range,
    sweep_linearity, trial_rng, AnalysisError,
};
use crate::autorange::{autorange, trace_table, AutorangeStatus, Source};
use crate::config::{Config, ConfigError};
use crate::pipeline::PipelineError;
use crate::report::{index_value_table, Field, Table};
use crate::sar_adc::{apply_mismatch, average_energy, measure_inl_dnl, AdcError, CapArray};

pub const DEFAULT_TRACE_CURRENT: f64 = 355.66e-9;
pub const DEFAULT_INL_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Trace,
    SweepConversion,
    SweepLinearity,
    SweepFullRange,
    AdcEnergy,
    InlDnl,
    Montecarlo,
    Roundtrip,
}

impl CommandKind {
    pub const ALL: [CommandKind; 8] = [
        CommandKind::Trace,
        CommandKind::SweepConversion,
        CommandKind::SweepLinearity,
        CommandKind::SweepFullRange,
        CommandKind::AdcEnergy,
        CommandKind::InlDnl,
        CommandKind::Montecarlo,
        CommandKind::Roundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Trace => "trace",
            CommandKind::SweepConversion => "sweep-conversion",
            CommandKind::SweepLinearity => "sweep-linearity",
            CommandKind::SweepFullRange => "sweep-full-range",
            CommandKind::AdcEnergy => "adc-energy",
            CommandKind::InlDnl => "inl-dnl",
            CommandKind::Montecarlo => "montecarlo",
            CommandKind::Roundtrip => "roundtrip",
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommandKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub overrides: Vec<String>,
    pub current: Option<f64>,
    pub bits: Option<u32>,
    pub points: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Domain(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) => 3,
            RunError::Config(_) => 1,
            RunError::Domain(_) => 2,
            RunError::Io { .. } => 3,
        }
    }
}

impl From<AnalysisError> for RunError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Pipeline(PipelineError::Config(_)) => {
                RunError::Config(ConfigError::Invalid(e.to_string()))
            }
            other => RunError::Domain(other.to_string()),
        }
    }
}

impl From<AdcError> for RunError {
    fn from(e: AdcError) -> Self {
        RunError::Domain(e.to_string())
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub extra: Vec<PathBuf>,
}

/// Loads the configuration named by the manifest and applies its overrides.
pub fn load_manifest_config(manifest: &RunManifest) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    if let Some(path) = &manifest.config_path {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        cfg.apply_text(&text, &path.display().to_string())?;
    }
    for (i, o) in manifest.overrides.iter().enumerate() {
        cfg.apply_override(o, i)?;
    }
    cfg.finalize()?;
    Ok(cfg)
}

fn write_table(dir: &Path, name: &str, table: &Table) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|source| RunError::Io {
        context: format!("cannot create {}", path.display()),
        source,
    })?;
    table
        .write_csv(io::BufWriter::new(file))
        .map_err(|source| RunError::Io {
            context: format!("cannot write {}", path.display()),
            source,
        })?;
    Ok(path)
}

struct Tables {
    main: Table,
    extra: Vec<(String, Table)>,
}

impl Tables {
    fn single(main: Table) -> Self {
        Self {
            main,
            extra: Vec::new(),
        }
    }
}

pub fn run(manifest: &RunManifest) -> Result<RunOutput, RunError> {
    let mut cfg = load_manifest_config(manifest)?;
    execute(&mut cfg, manifest)
}

/// Re-runs the experiment recorded in a metadata sidecar.
pub fn replay(meta: &Path, output_dir: &Path) -> Result<RunOutput, RunError> {
    let text = fs::read_to_string(meta).map_err(|source| {
        RunError::Config(ConfigError::Io {
            path: meta.display().to_string(),
            source,
        })
    })?;
    let mut cfg = Config::parse(&text, &meta.display().to_string())?;
    let run = cfg.run.clone();
    let command = run
        .command
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid(format!("{}: no run.command", meta.display())))?
        .parse::<CommandKind>()
        .map_err(ConfigError::Invalid)?;
    let manifest = RunManifest {
        command,
        config_path: Some(meta.to_path_buf()),
        output_dir: output_dir.to_path_buf(),
        seed: run.seed.unwrap_or(0),
        overrides: Vec::new(),
        current: run.current,
        bits: run.bits,
        points: run.points,
        trials: run.trials,
    };
    execute(&mut cfg, &manifest)
}

fn execute(cfg: &mut Config, manifest: &RunManifest) -> Result<RunOutput, RunError> {
    let dir = &manifest.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        context: format!("cannot create output directory {}", dir.display()),
        source,
    })?;
    let seed = manifest.seed;
    let sys = cfg.system.clone();
    let points = manifest.points.unwrap_or(cfg.sweep.points);
    cfg.run = Default::default();
    cfg.run.command = Some(manifest.command.name().to_string());
    cfg.run.seed = Some(seed);
    cfg.run.version = Some(env!("CARGO_PKG_VERSION").to_string());

    let tables = match manifest.command {
        CommandKind::Trace => {
            let current = manifest.current.unwrap_or(DEFAULT_TRACE_CURRENT);
            cfg.run.current = Some(current);
            let outcome = autorange(&Source::Current(current), &sys.front_end())
                .map_err(|e| RunError::Domain(e.to_string()))?;
            if outcome.status == AutorangeStatus::OverRange {
                return Err(RunError::Domain(
                    PipelineError::OverRange {
                        v_out: outcome.v_out,
                    }
                    .to_string(),
                ));
            }
            Tables::single(trace_table(&outcome.trace))
        }
        CommandKind::SweepConversion => {
            cfg.run.points = Some(points);
            let spec = cfg.sweep.conductance_spec(points);
            Tables::single(conversion_table(&sweep_conversion(
                &spec,
                &sys,
                cfg.sweep.baseline(),
            )?))
        }
        CommandKind::SweepLinearity => {
            cfg.run.points = Some(points);
            let spec = cfg.sweep.conductance_spec(points);
            Tables::single(linearity_table(&sweep_linearity(
                &spec,
                &sys,
                cfg.sweep.baseline(),
            )?))
        }
        CommandKind::SweepFullRange => {
            cfg.run.points = Some(points);
            let spec = cfg.sweep.current_spec(points);
            Tables::single(full_range_table(&sweep_full_range(&spec, &sys)?))
        }
        CommandKind::AdcEnergy => {
            let bits = manifest.bits.unwrap_or(sys.adc.bits);
            cfg.run.bits = Some(bits);
            let adc = sys.adc.with_bits(bits);
            let avg = average_energy(&adc)?;
            let unit = adc.unit_capacitance * adc.v_ref * adc.v_ref;
            Tables::single(metric_table(&[
                ("bits", Field::Int(bits as i64)),
                ("conventional_J", Field::Sci(avg.conventional)),
                ("split_msb_J", Field::Sci(avg.split_msb)),
                ("conventional_CV2", Field::Sci(avg.conventional / unit)),
                ("split_msb_CV2", Field::Sci(avg.split_msb / unit)),
                ("saving_ratio", Field::Sci(avg.saving_ratio)),
            ]))
        }
        CommandKind::InlDnl => {
            let bits = manifest.bits.unwrap_or(sys.adc.bits);
            let trials = manifest.trials.unwrap_or(DEFAULT_INL_TRIALS);
            cfg.run.bits = Some(bits);
            cfg.run.trials = Some(trials);
            let adc = sys.adc.with_bits(bits);
            let sigma = cfg.montecarlo.sigmas.cap;
            let dist = inl_dnl_distribution(&adc, sigma, trials, seed)?;
            let first =
                apply_mismatch(&CapArray::ideal(&adc)?, sigma, trial_rng(seed, 0).random())?;
            let report = measure_inl_dnl(&adc, &first)?;
            Tables {
                main: inl_dnl_table(&dist),
                extra: vec![
                    ("inl-dnl_inl.csv".into(), index_value_table(&report.inl)),
                    ("inl-dnl_dnl.csv".into(), index_value_table(&report.dnl)),
                ],
            }
        }
        CommandKind::Montecarlo => {
            let trials = manifest.trials.unwrap_or(cfg.montecarlo.trials);
            cfg.run.trials = Some(trials);
            let summary = monte_carlo(&sys, &cfg.montecarlo.spec(trials, seed))?;
            Tables {
                main: summary.point_table(),
                extra: vec![
                    ("montecarlo_trials.csv".into(), summary.trial_table()),
                    ("montecarlo_summary.csv".into(), summary.summary_table()),
                ],
            }
        }
        CommandKind::Roundtrip => {
            cfg.run.points = Some(points);
            let stats = roundtrip_error(&cfg.sweep.roundtrip_spec(points), &sys)?;
            Tables {
                main: stats.table(),
                extra: vec![("roundtrip_summary.csv".into(), stats.summary_table())],
            }
        }
    };

    let name = manifest.command.name();
    let csv = write_table(dir, &format!("{name}.csv"), &tables.main)?;
    let mut extra = Vec::new();
    for (file, table) in &tables.extra {
        extra.push(write_table(dir, file, table)?);
    }
    let meta = dir.join(format!("{name}.meta"));
    fs::write(&meta, cfg.echo()).map_err(|source| RunError::Io {
        context: format!("cannot write {}", meta.display()),
        source,
    })?;
    Ok(RunOutput { csv, meta, extra })
}

#[derive(Debug, Parser)]
#[command(
    name = "memread",
    version,
    about = "Autoranging memristor read-out and SAR ADC simulator"
)]
pub struct Cli {
    /// Configuration file (flat key = value).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub seed: u64,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Selector trace for one injected current.
    Trace {
        #[arg(long, value_name = "AMPS")]
        current: Option<f64>,
    },
    /// Autoranged and fixed-resistor bottom voltage over conductance.
    SweepConversion {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Read-current deviation from the ideal over conductance.
    SweepLinearity {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Full read-out over the input-current range.
    SweepFullRange {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Average switching energy of both capacitor arrays.
    AdcEnergy {
        #[arg(long)]
        bits: Option<u32>,
    },
    /// INL/DNL distribution under capacitor mismatch.
    InlDnl {
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Output-voltage variability under device and amplifier variation.
    Montecarlo {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Relative decode error over the current range.
    Roundtrip {
        #[arg(long)]
        points: Option<usize>,
    },
    /// Re-run the experiment recorded in a `.meta` sidecar.
    Replay {
        #[arg(value_name = "META")]
        meta: PathBuf,
    },
}

impl Cli {
    /// `None` for `replay`, which takes its manifest from the sidecar.
    pub fn manifest(&self) -> Option<RunManifest> {
        let mut m = RunManifest {
            command: CommandKind::Trace,
            config_path: self.config.clone(),
            output_dir: self.out.clone(),
            seed: self.seed,
            overrides: self.overrides.clone(),
            current: None,
            bits: None,
            points: None,
            trials: None,
        };
        match self.command {
            Command::Trace { current } => m.current = current,
            Command::SweepConversion { points } => {
                m.command = CommandKind::SweepConversion;
                m.points = points;
            }
            Command::SweepLinearity { points } => {
                m.command = CommandKind::SweepLinearity;
                m.points = points;
            }
            Command::SweepFullRange { points } => {
                m.command = CommandKind::SweepFullRange;
                m.points = points;
            }
            Command::AdcEnergy { bits } => {
                m.command = CommandKind::AdcEnergy;
                m.bits = bits;
            }
            Command::InlDnl { bits, trials } => {
                m.command = CommandKind::InlDnl;
                m.bits = bits;
                m.trials = trials;
            }
            Command::Montecarlo { trials } => {
                m.command = CommandKind::Montecarlo;
                m.trials = trials;
            }
            Command::Roundtrip { points } => {
                m.command = CommandKind::Roundtrip;
                m.points = points;
            }
            Command::Replay { .. } => return None,
        }
        Some(m)
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match (&cli.command, cli.manifest()) {
        (Command::Replay { meta }, _) => replay(meta, &cli.out),
        (_, Some(m)) => run(&m),
        (_, None) => unreachable!("only replay has no manifest"),
    };
    match result {
        Ok(out) => {
            println!("{}", out.csv.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(command: CommandKind, dir: &Path) -> RunManifest {
        RunManifest {
            command,
            config_path: None,
            output_dir: dir.to_path_buf(),
            seed: 0,
            overrides: Vec::new(),
            current: None,
            bits: None,
            points: None,
            trials: None,
        }
    }

    #[test]
    fn command_names_round_trip() {
        for c in CommandKind::ALL {
            assert_eq!(c.name().parse::<CommandKind>().unwrap(), c);
        }
        assert!("plot".parse::<CommandKind>().is_err());
    }

    #[test]
    fn trace_writes_csv_and_meta() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&manifest(CommandKind::Trace, dir.path())).unwrap();
        let csv = fs::read_to_string(&out.csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[4].ends_with(",true"));
        assert!(lines[..4].iter().skip(1).all(|l| l.ends_with(",false")));
        let meta = fs::read_to_string(&out.meta).unwrap();
        assert!(meta.contains("command = trace"));
    }

    #[test]
    fn over_range_trace_is_a_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            current: Some(10e-3),
            ..manifest(CommandKind::Trace, dir.path())
        };
        let err = run(&m).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("OverRange"));
    }

    #[test]
    fn bad_override_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            overrides: vec!["bank.resistors=4".into()],
            ..manifest(CommandKind::Trace, dir.path())
        };
        let err = run(&m).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("exactly 5 entries"));
    }

    #[test]
    fn missing_config_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            config_path: Some(dir.path().join("absent.cfg")),
            ..manifest(CommandKind::Trace, dir.path())
        };
        assert_eq!(run(&m).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn adc_energy_table() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            bits: Some(3),
            ..manifest(CommandKind::AdcEnergy, dir.path())
        };
        let out = run(&m).unwrap();
        let csv = fs::read_to_string(out.csv).unwrap();
        assert!(csv.starts_with("metric,value\n"));
        assert!(csv.contains("conventional_CV2,8.750000000000e+00"), "{csv}");
        assert!(csv.contains("split_msb_CV2,5.750000000000e+00"), "{csv}");
    }
}

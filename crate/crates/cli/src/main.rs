mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsni_core::config::RunConfig;
use nsni_core::constellation::{Constellation, Format};
use nsni_core::link::GainMode;

/// Seed override read from the environment when `--seed` is absent.
const SEED_ENV: &str = "NSNI_SEED";

#[derive(Parser)]
#[command(name = "nsni", version, about = "Nonlinear interference SNR models and split-step simulation for WDM links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the interference coefficients and cache them as JSON.
    Coeffs(Common),
    /// Analytic SNR versus launch power.
    Snr {
        #[command(flatten)]
        common: Common,
        /// Reuse coefficients written by `coeffs` for the same configuration.
        #[arg(long, value_name = "PATH")]
        coeffs: Option<PathBuf>,
    },
    /// Split-step simulation of SNR versus launch power.
    Ssfm(Common),
    /// Mutual information versus launch power, or at one SNR.
    Mi {
        #[command(flatten)]
        common: Common,
        /// Evaluate at this SNR (dB) only; needs no configuration.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
    },
    /// Run the self-consistency suites.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Random frequency points per span for the closed-form suite.
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Analytic and simulated SNR side by side with dB differences.
    Compare(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    ClosedForms,
    Limits,
    Scaling,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl From<Toggle> for bool {
    fn from(t: Toggle) -> bool {
        t == Toggle::On
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Gain,
    Power,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Bundled configuration: config1 or config2.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for coefficient sampling and simulation (also NSNI_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples per coefficient.
    #[arg(long)]
    samples: Option<u64>,
    /// Launch powers, "start:stop:step" in dBm or a single value.
    #[arg(long, allow_hyphen_values = true)]
    powers: Option<String>,
    #[arg(long)]
    channels: Option<usize>,
    /// Keep only the first span group, repeated this many times.
    #[arg(long)]
    spans: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    dbp: Option<Toggle>,
    /// Include non-degenerate four-wave mixing terms.
    #[arg(long, value_enum)]
    ndfwm: Option<Toggle>,
    /// Modulation format name (QPSK, 16QAM, 64QAM, 256QAM, Gaussian).
    #[arg(long)]
    format: Option<String>,
    /// Simulation runs per power.
    #[arg(long)]
    runs: Option<usize>,
}

impl Common {
    fn format(&self) -> anyhow::Result<Option<Format>> {
        self.format
            .as_deref()
            .map(|name| {
                Constellation::parse(name)
                    .map(Format::Named)
                    .ok_or_else(|| nsni_core::Error::Config(format!("unknown format \"{name}\"")).into())
            })
            .transpose()
    }

    /// Load the configuration and apply command-line and environment
    /// overrides.
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => RunConfig::preset(name).ok_or_else(|| {
                nsni_core::Error::Config(format!(
                    "unknown preset \"{name}\" (available: {})",
                    nsni_core::config::PRESETS.join(", ")
                ))
            })?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))?;
                serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                    nsni_core::Error::Config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
                })?
            }
            (None, None) => {
                return Err(nsni_core::Error::Config("one of --preset or --config is required".into()).into())
            }
        };
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| nsni_core::Error::Config(format!("{SEED_ENV}=\"{v}\" is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        if let Some(seed) = self.seed.or(env_seed) {
            cfg.mc.seed = seed;
            cfg.ssfm.seed = seed;
        }
        if let Some(n) = self.samples {
            cfg.mc.samples = n;
        }
        if let Some(p) = &self.powers {
            cfg.plan.powers_dbm = p.clone();
        }
        if let Some(n) = self.channels {
            cfg.plan.channels = n;
        }
        if let Some(n) = self.spans {
            cfg = cfg.with_span_count(n);
        }
        if let Some(m) = self.mode {
            cfg.link.mode = match m {
                Mode::Gain => GainMode::Gain,
                Mode::Power => GainMode::Power,
            };
        }
        if let Some(t) = self.dbp {
            cfg.ssfm.dbp = t.into();
        }
        if let Some(t) = self.ndfwm {
            cfg.assembly.ndfwm = t.into();
        }
        if let Some(f) = self.format()? {
            cfg.format = f;
        }
        if let Some(n) = self.runs {
            cfg.ssfm.runs = n;
        }
        if let Some(dir) = &self.out {
            cfg.output_dir = Some(dir.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    /// A check or tolerance failed; the message has been printed.
    Failed,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Coeffs(c) => commands::coeffs(&c.load()?),
        Command::Snr { common, coeffs } => commands::snr(&common.load()?, coeffs.as_deref()),
        Command::Ssfm(c) => commands::ssfm(&c.load()?),
        Command::Mi { common, snr_db: Some(db) } => {
            let format = common.format()?.unwrap_or(Format::Named(Constellation::Gaussian));
            commands::mi_at(&format, db)
        }
        Command::Mi { common, snr_db: None } => commands::mi(&common.load()?),
        Command::Validate { common, suite, points } => commands::validate(&common.load()?, suite, points),
        Command::Compare(c) => commands::compare(&c.load()?),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<nsni_core::Error>() {
        return match e {
            nsni_core::Error::InvalidLink(_) | nsni_core::Error::ChannelOverlap { .. } => "invalid_link",
            nsni_core::Error::NoAcceptedSamples(_) => "sampling",
            nsni_core::Error::Config(_) => "config",
            nsni_core::Error::Simulation(_) => "simulation",
            nsni_core::Error::Receiver(_) => "receiver",
            nsni_core::Error::Json(_) => "parse",
        };
    }
    if err.chain().any(|c| c.is::<std::io::Error>()) {
        return "io";
    }
    "other"
}

fn report(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", e.to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => report(error_kind(&e), format!("{e:#}")),
    }
}

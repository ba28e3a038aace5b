use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use qmusic::harness::output::{write_records_to, write_spectra_to};
use qmusic::harness::sweep::power_for_snr;
use qmusic::harness::{
    parse_power, run_sweep, selftest, spectrum_dump, OutputFormat, RmseRecord, ScenarioConfig, Simulator, Sweep,
};
use qmusic::harness::Method;
use qmusic::{Error, Result};

/// Quantum-MUSIC angle-of-arrival simulator.
#[derive(Parser, Debug)]
#[command(name = "qmusic", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long, global = true, env = "QMUSIC_WORKERS", default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Quantum,
    Rf,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Quantum => vec![Method::QuantumMusic],
            MethodArg::Rf => vec![Method::RfMusic],
            MethodArg::Both => vec![Method::QuantumMusic, Method::RfMusic],
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the quantum pseudospectrum for several user counts.
    Spectrum {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        users: Vec<usize>,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr_db: f64,
    },
    /// RMSE versus total transmit power.
    RmsePower {
        /// Powers, linear or with a dBm suffix.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true,
              default_value = "-190dBm,-187.5dBm,-185dBm,-182.5dBm,-180dBm,-177.5dBm,-175dBm")]
        powers: Vec<String>,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// RMSE versus number of users.
    RmseUsers {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        users: Vec<usize>,
        #[arg(long, default_value = "-180dBm", allow_hyphen_values = true)]
        power: String,
    },
    /// One verbose trial.
    Trial {
        #[arg(long, default_value_t = 0)]
        trial_id: u64,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn load_config(g: &Global) -> Result<ScenarioConfig> {
    let mut cfg = match &g.config {
        Some(path) => ScenarioConfig::from_path(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = g.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_sink(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let label = out.map(Path::to_owned).unwrap_or_else(|| PathBuf::from("<stdout>"));
    let io = |source| Error::Io {
        path: label.clone(),
        source,
    };
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(io)?;
            write(&mut file).map_err(io)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(io)
        }
    }
}

fn emit_records(g: &Global, records: &[RmseRecord]) -> Result<()> {
    with_sink(g.out.as_deref(), |w| write_records_to(w, records, g.format))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    match cli.command {
        Command::Spectrum { users, snr_db } => {
            if users.is_empty() {
                return Err(Error::Config("--users needs at least one value".into()));
            }
            let tables = spectrum_dump(&cfg, &users, snr_db, g.workers)?;
            eprintln!(
                "# SNR {snr_db} dB := sigma_s_sq * alpha^2 * E[g^2] / sigma_n_sq, E[g^2] = 1; sigma_s_sq = {:e}",
                power_for_snr(&cfg, snr_db)
            );
            for t in &tables {
                eprintln!("# K={} true_deg={:?} estimated_deg={:?}", t.k, t.truths_deg, t.estimate_deg);
            }
            with_sink(g.out.as_deref(), |w| write_spectra_to(w, &tables, g.format))
        }
        Command::RmsePower { powers, k } => {
            let values = powers.iter().map(|p| parse_power(p)).collect::<Result<Vec<_>>>()?;
            let mut cfg = cfg;
            cfg.users.count = k;
            cfg.validate()?;
            let points = run_sweep(&cfg, &Sweep::Power(values), &g.method.methods(), g.workers)?;
            let records: Vec<_> = points.into_iter().map(|p| p.record).collect();
            emit_records(g, &records)
        }
        Command::RmseUsers { users, power } => {
            let mut cfg = cfg;
            cfg.power.sigma_s_sq.0 = parse_power(&power)?;
            for &k in &users {
                let mut probe = cfg.clone();
                probe.users.count = k;
                probe.validate()?;
            }
            let points = run_sweep(&cfg, &Sweep::Users(users), &g.method.methods(), g.workers)?;
            let records: Vec<_> = points.into_iter().map(|p| p.record).collect();
            emit_records(g, &records)
        }
        Command::Trial { trial_id } => {
            let sim = Simulator::new(cfg)?;
            let mut lines = Vec::new();
            for method in g.method.methods() {
                let o = sim.run_trial(trial_id, method)?;
                let line = serde_json::json!({
                    "trial_id": o.trial_id,
                    "method": o.method.as_str(),
                    "true_deg": o.truths.iter().map(|t| t.to_degrees()).collect::<Vec<_>>(),
                    "estimate_deg": o.estimate.angles.iter().map(|t| t.to_degrees()).collect::<Vec<_>>(),
                    "padded": o.estimate.padded,
                    "diagnostics": o.diagnostics,
                });
                lines.push(line.to_string());
            }
            with_sink(g.out.as_deref(), |w| {
                for l in &lines {
                    writeln!(w, "{l}")?;
                }
                Ok(())
            })
        }
        Command::Selftest => {
            let checks = selftest::run(&cfg)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            with_sink(g.out.as_deref(), |w| {
                for c in &checks {
                    writeln!(w, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
                }
                Ok(())
            })?;
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} selftest checks failed")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

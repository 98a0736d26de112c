//! `randcert` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use randcert::config::Config;
use randcert::error::{Error, Result};
use randcert::finitesize::log_spaced;
use randcert::input::{parse_stats, StatsInput};
use randcert::output::{comment_block, fmt, header, to_json};
use randcert::pipeline::{certify_input, finite_size_sweep, grid_values, scan};
use randcert::radau::gauss_radau;
use randcert::seesaw::Step2Method;
use randcert::simulator::{simulate, RunRecord};
use randcert::stats::ConditionalStats;

const THREADS_VAR: &str = "RANDCERT_THREADS";

#[derive(Parser)]
#[command(name = "randcert", version, about = "Semi-device-independent randomness certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate detection records and write them as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Certify a statistics file (JSON record or 3x3 table) and write a JSON report.
    Certify {
        stats: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Raw min-entropy and Shannon bounds over an amplitude grid, as CSV.
    Scan {
        /// Alpha range `lo:hi`.
        #[arg(long, default_value = "0:1.5")]
        alpha_range: String,
        /// Beta range `lo:hi`.
        #[arg(long, default_value = "0:1.5")]
        beta_range: String,
        /// Grid size `NxM` (alpha by beta), at most 200x200.
        #[arg(long, default_value = "10x10")]
        grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-size rates over a list of block lengths, as CSV.
    FiniteSize {
        /// Statistics file; model statistics from the configuration when absent.
        stats: Option<PathBuf>,
        /// Comma-separated block lengths; overrides the log-spaced range.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<f64>,
        #[arg(long, default_value_t = 1e3)]
        n_min: f64,
        #[arg(long, default_value_t = 1e7)]
        n_max: f64,
        #[arg(long, default_value_t = 9)]
        n_points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Gauss-Radau nodes and weights on (0, 1] as CSV.
    Quadrature {
        order: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Sets both late- and early-bin amplitudes of the third preparation.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    p_dc: Option<f64>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    quadrature_order: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    dimension: Option<usize>,
    /// `closed-form` or `sdp`.
    #[arg(long, value_parser = parse_step2)]
    step2: Option<Step2Method>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Certify the closest reproducible statistics instead of failing.
    #[arg(long)]
    nearest_feasible: bool,
}

fn parse_step2(s: &str) -> std::result::Result<Step2Method, String> {
    match s {
        "closed-form" => Ok(Step2Method::ClosedForm),
        "sdp" => Ok(Step2Method::Sdp),
        _ => Err(format!("unknown step-2 method {s:?} (closed-form | sdp)")),
    }
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_toml(&read(p)?).map_err(|e| context(e, p))?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(seed, alpha, eta, p_dc, rounds, repetitions, quadrature_order, restarts, dimension, step2, epsilon);
        if let Some(b) = self.beta {
            cfg.beta0 = b;
            cfg.beta1 = b;
        }
        cfg.nearest_feasible |= self.nearest_feasible;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn context(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Config,
}

fn provenance<'a>(command: &'a str, config: &'a Config) -> Provenance<'a> {
    Provenance { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), command, config }
}

/// CSV provenance: tool line plus the configuration as commented TOML.
fn csv_header(command: &str, config: &Config, extra: &[(&str, String)]) -> String {
    let mut out = header(&[
        ("tool", env!("CARGO_PKG_NAME").to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("command", command.to_string()),
    ]);
    out += &header(extra);
    out += &comment_block(&config.to_toml());
    out
}

#[derive(Serialize)]
struct RecordFile<'a> {
    provenance: Provenance<'a>,
    #[serde(flatten)]
    record: &'a RunRecord,
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    provenance: Provenance<'a>,
    result: T,
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| Error::InvalidInput(format!("range {s:?} is not lo:hi")))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {t:?} in range")));
    Ok((num(lo)?, num(hi)?))
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| Error::InvalidInput(format!("grid {s:?} is not NxM")))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::InvalidInput(format!("bad grid size {t:?}")));
    Ok((num(a)?, num(b)?))
}

fn load_stats(path: &Path) -> Result<StatsInput> {
    parse_stats(&read(path)?).map_err(|e| context(e, path))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = common.load()?;
            let record = simulate(&cfg.run()?)?;
            let file = RecordFile { provenance: provenance("simulate", &cfg), record: &record };
            write(common.output.as_deref(), &to_json(&file)?)
        }
        Command::Certify { stats, common } => {
            let cfg = common.load()?;
            let input = load_stats(&stats)?;
            let result = certify_input(&input, &cfg)?;
            let file = ReportFile { provenance: provenance("certify", &cfg), result };
            write(common.output.as_deref(), &to_json(&file)?)
        }
        Command::Scan { alpha_range, beta_range, grid, common } => {
            let cfg = common.load()?;
            let (na, nb) = parse_grid(&grid)?;
            let (a0, a1) = parse_range(&alpha_range)?;
            let (b0, b1) = parse_range(&beta_range)?;
            let rows = scan(&grid_values(a0, a1, na)?, &grid_values(b0, b1, nb)?, &cfg)?;
            let mut out = csv_header(
                "scan",
                &cfg,
                &[("alpha_range", alpha_range.clone()), ("beta_range", beta_range.clone()), ("grid", grid.clone())],
            );
            out += "alpha,beta,hmin,shannon\n";
            for r in rows {
                out += &format!("{},{},{},{}\n", fmt(r.alpha), fmt(r.beta), fmt(r.hmin), fmt(r.shannon));
            }
            write(common.output.as_deref(), &out)
        }
        Command::FiniteSize { stats, n_list, n_min, n_max, n_points, common } => {
            let cfg = common.load()?;
            let table: ConditionalStats = match &stats {
                Some(p) => match load_stats(p)? {
                    StatsInput::Table(t) => t,
                    StatsInput::Record(r) => ConditionalStats::from_counts(r.pooled_counts())?,
                },
                None => randcert::photonics::event_probabilities(&cfg.source()?, &cfg.detector()?)?,
            };
            let rounds = if n_list.is_empty() { log_spaced(n_min, n_max, n_points)? } else { n_list };
            let mut rows = finite_size_sweep(&table, &rounds, &cfg)?;
            rows.sort_by(|a, b| a.rounds.total_cmp(&b.rounds));
            let source = stats.as_ref().map_or("model".to_string(), |p| p.display().to_string());
            let mut out = csv_header("finite-size", &cfg, &[("stats", source)]);
            out += "N,hmin_raw,aep,eat,alpha,extractable\n";
            for r in rows {
                out += &format!(
                    "{},{},{},{},{},{}\n",
                    fmt(r.rounds),
                    fmt(r.hmin_raw),
                    fmt(r.aep),
                    fmt(r.eat),
                    fmt(r.alpha),
                    fmt(r.extractable)
                );
            }
            write(common.output.as_deref(), &out)
        }
        Command::Quadrature { order, output } => {
            let rule = gauss_radau(order)?;
            let mut out = header(&[
                ("tool", env!("CARGO_PKG_NAME").to_string()),
                ("version", env!("CARGO_PKG_VERSION").to_string()),
                ("command", "quadrature".to_string()),
                ("order", order.to_string()),
            ]);
            out += "t,w\n";
            for (t, w) in rule.nodes().iter().zip(rule.weights()) {
                out += &format!("{},{}\n", fmt(*t), fmt(*w));
            }
            write(output.as_deref(), &out)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleStatistics { .. } => 3,
        Error::NumericalFailure(_) | Error::NoConvergence { .. } => 4,
        _ => 2,
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidInput(format!("{THREADS_VAR}={v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::InfeasibleStatistics { .. }) {
                eprintln!("hint: pass --nearest-feasible (or set nearest_feasible = true) to certify the closest reproducible statistics");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

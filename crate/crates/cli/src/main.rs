//! `flrw`: kernel tables, EPD and Dirac mode solves, propagator samples and
//! the verification suites, driven by a TOML config with flag overrides.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{ConfigError, Override, RunConfig};

/// Thread count for the internal parallel maps.
const THREADS_ENV: &str = "FLRW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "flrw", version, about = "Closed-form EPD and Dirac solutions in power-law FLRW spacetimes")]
struct Cli {
    /// TOML config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set cosmology.ell=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output file (stdout when absent).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    ell: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mass_re: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mass_im: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate a kernel over radii and times.
    Kernel(KernelArgs),
    /// Solve one EPD mode, with oracle columns.
    Epd(EpdArgs),
    /// Solve a Dirac mode list or packet and check it.
    Dirac(DiracArgs),
    /// Sample the mollified retarded or Cauchy propagator.
    Propagator(PropagatorArgs),
    /// Run verification suites and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// e, k1, k0 or k0-fused.
    #[arg(long)]
    kind: Option<String>,
    /// tau or t.
    #[arg(long)]
    coordinate: Option<String>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    r_count: Option<u32>,
    #[arg(long)]
    source_time: Option<f64>,
}

#[derive(Debug, Args)]
struct EpdArgs {
    #[arg(long, allow_hyphen_values = true)]
    lambda_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi0_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi0_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi1_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phi1_im: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Skip the oracle columns.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Debug, Args)]
struct DiracArgs {
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// JSON verification report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Skip the oracle comparison.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Debug, Args)]
struct PropagatorArgs {
    /// retarded or cauchy.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// bump or delta.
    #[arg(long)]
    temporal: Option<String>,
    #[arg(long)]
    k_spacing: Option<f64>,
    #[arg(long)]
    k_cutoff: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Comma-separated suites; all when absent.
    #[arg(long = "suite", value_delimiter = ',', num_args = 0..)]
    suites: Option<Vec<String>>,
    #[arg(long)]
    draws: Option<u32>,
}

fn floats(v: &[f64]) -> toml::Value {
    toml::Value::Array(v.iter().map(|x| toml::Value::Float(*x)).collect())
}

/// Flags as overrides, applied after `--set` so they win.
fn flag_overrides(cli: &Cli) -> Vec<Override> {
    let mut out = Vec::new();
    let mut put = |key: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            out.push(Override::new(key, v));
        }
    };
    put("output", cli.output.as_ref().map(|p| p.display().to_string().into()));
    put("seed", cli.seed.map(|s| toml::Value::Integer(s as i64)));
    put("cosmology.ell", cli.ell.map(Into::into));
    put("cosmology.mass_re", cli.mass_re.map(Into::into));
    put("cosmology.mass_im", cli.mass_im.map(Into::into));
    put("cosmology.epsilon", cli.epsilon.map(Into::into));
    match &cli.command {
        Command::Kernel(a) => {
            put("kernel.kind", a.kind.clone().map(Into::into));
            put("kernel.coordinate", a.coordinate.clone().map(Into::into));
            put("kernel.times", a.times.as_deref().map(floats));
            put("kernel.r_count", a.r_count.map(|n| toml::Value::Integer(n.into())));
            put("kernel.source_time", a.source_time.map(Into::into));
        }
        Command::Epd(a) => {
            put("epd.lambda_re", a.lambda_re.map(Into::into));
            put("epd.lambda_im", a.lambda_im.map(Into::into));
            put("epd.phi0_re", a.phi0_re.map(Into::into));
            put("epd.phi0_im", a.phi0_im.map(Into::into));
            put("epd.phi1_re", a.phi1_re.map(Into::into));
            put("epd.phi1_im", a.phi1_im.map(Into::into));
            put("epd.times", a.times.as_deref().map(floats));
            put("epd.oracle", a.no_oracle.then_some(false.into()));
        }
        Command::Dirac(a) => {
            put("dirac.times", a.times.as_deref().map(floats));
            put("dirac.report", a.report.as_ref().map(|p| p.display().to_string().into()));
            put("dirac.oracle", a.no_oracle.then_some(false.into()));
        }
        Command::Propagator(a) => {
            put("propagator.kind", a.kind.clone().map(Into::into));
            put("propagator.t0", a.t0.map(Into::into));
            put("propagator.sigma", a.sigma.map(Into::into));
            put("propagator.temporal", a.temporal.clone().map(Into::into));
            put("propagator.k_spacing", a.k_spacing.map(Into::into));
            put("propagator.k_cutoff", a.k_cutoff.map(Into::into));
            put("propagator.times", a.times.as_deref().map(floats));
        }
        Command::Verify(a) => {
            let suites = a.suites.as_ref().map(|s| {
                let names = s.iter().map(|x| x.trim()).filter(|x| !x.is_empty());
                toml::Value::Array(names.map(|x| toml::Value::String(x.to_string())).collect())
            });
            put("verify.suites", suites);
            put("verify.draws", a.draws.map(|n| toml::Value::Integer(n.into())));
        }
    }
    out
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    configure_threads()?;
    let mut overrides = cli.overrides.iter().map(|s| Override::parse(s)).collect::<anyhow::Result<Vec<_>>>()?;
    overrides.extend(flag_overrides(cli));
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Kernel(_) => commands::cmd_kernel(&cfg),
        Command::Epd(_) => commands::cmd_epd(&cfg),
        Command::Dirac(_) => commands::cmd_dirac(&cfg),
        Command::Propagator(_) => commands::cmd_propagator(&cfg),
        Command::Verify(_) => commands::cmd_verify(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

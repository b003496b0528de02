use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use rcf::commands::{EXIT_DOMAIN, EXIT_FAIL, EXIT_OK};
use rcf::parallel::default_jobs;
use rcf::points::{parse_cvector, parse_reals};
use rcf::{Command, Format, MetricSource, RunConfig, Tolerances};
use rcf_core::family::FamilyKind;
use rcf_core::sampling::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "rcf", version, about = "Evaluate, verify and audit infinite-series (alpha, beta)-metrics")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Ground values, jet, invariants and tensors at each point.
    Eval(Args),
    /// Closed forms against the finite-difference oracle and the identities.
    Verify(Args),
    /// Inverse and determinant by rank-one updates (requires a_mixed = 0).
    Invert(Args),
    /// Literal-versus-derived findings document.
    Audit(Args),
    /// Validity-region map over a grid or a random box.
    Sample(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Built-in metric: flat-real, c3-example, random-seeded.
    #[arg(long, conflicts_with = "metric")]
    fixture: Option<String>,
    /// Metric definition file (.toml, otherwise JSON).
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long, default_value = "infinite-series")]
    family: String,
    /// Base point, comma-separated `re:im` entries (default 0).
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Fibre vector, comma-separated `re:im` entries.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Constant real 1-form for flat-real, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// K points per axis over [-eta_box, eta_box], Im eta = 0.
    #[arg(long)]
    grid: Option<usize>,
    /// Half-width of the sampling box for z.
    #[arg(long, default_value_t = 0.5)]
    z_box: f64,
    /// Half-width of the sampling box (and grid) for eta.
    #[arg(long, default_value_t = 2.0)]
    eta_box: f64,
    #[arg(long)]
    jobs: Option<usize>,
    /// json, csv or pretty; csv is the default for `sample` sweeps, json otherwise.
    #[arg(long)]
    format: Option<Format>,
    /// Tolerance override NAME=VALUE, repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Re-check a saved JSON report.
    #[arg(long, conflicts_with_all = ["fixture", "metric"])]
    replay: Option<PathBuf>,
}

fn exec(cmd: Command, a: Args) -> Result<u8> {
    let jobs = a.jobs.unwrap_or_else(default_jobs).max(1);
    let format = a.format.unwrap_or(if cmd == Command::Sample && a.replay.is_none() {
        Format::Csv
    } else {
        Format::Json
    });
    if let Some(path) = &a.replay {
        let out = rcf::replay(path, jobs)?;
        if out.command != cmd.name() {
            bail!("{} holds a '{}' report", path.display(), out.command);
        }
        match format {
            Format::Pretty | Format::Csv => {
                println!("replay {}: {} checked, {} mismatched", out.command, out.checked, out.mismatches.len());
                for m in &out.mismatches {
                    println!("  {m}");
                }
            }
            Format::Json => {
                let v = serde_json::json!({
                    "replay": path.display().to_string(),
                    "command": out.command,
                    "checked": out.checked,
                    "mismatches": out.mismatches,
                    "pass": out.pass(),
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            }
        }
        return Ok(if out.pass() { EXIT_OK } else { EXIT_FAIL });
    }
    let b = a.b.as_deref().map(parse_reals).transpose()?;
    let source = match (a.fixture, a.metric) {
        (Some(name), None) => MetricSource::Fixture { name, b },
        (None, Some(path)) => {
            if b.is_some() {
                bail!("--b only applies to the flat-real fixture");
            }
            MetricSource::File(path)
        }
        _ => bail!("give exactly one of --fixture and --metric"),
    };
    let mut cfg = RunConfig::new(source);
    cfg.family = match FamilyKind::from_name(&a.family) {
        Some(f) => f,
        None => bail!("unknown family '{}' (infinite-series, randers, kropina, matsumoto)", a.family),
    };
    cfg.z = a.z.as_deref().map(parse_cvector).transpose()?;
    cfg.eta = a.eta.as_deref().map(parse_cvector).transpose()?;
    cfg.samples = a.samples;
    cfg.seed = a.seed;
    cfg.grid = a.grid;
    cfg.z_box = a.z_box;
    cfg.eta_box = a.eta_box;
    cfg.jobs = jobs;
    let mut tol = Tolerances::default();
    for t in &a.tol {
        tol.apply(t)?;
    }
    cfg.tolerances = tol;
    let out = rcf::run(cmd, &cfg)?;
    print!("{}", rcf::render(&out.report, format)?);
    Ok(out.exit)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RCF_LOG", "warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Eval(a) => (Command::Eval, a),
        Sub::Verify(a) => (Command::Verify, a),
        Sub::Invert(a) => (Command::Invert, a),
        Sub::Audit(a) => (Command::Audit, a),
        Sub::Sample(a) => (Command::Sample, a),
    };
    match exec(cmd, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}

#![allow(clippy::neg_cmp_op_on_partial_ord)]
mod config;
mod output;
mod run;

use clap::Parser;
use config::RunConfig;
use output::OutputDir;
use run::{Command, Failure};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Characteristic-coordinate solver and singularity analyzer for
/// u_tt - c(u)(c(u) u_x)_x = 0.
#[derive(Debug, Parser)]
#[command(name = "vwave", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration
    #[arg(short, long)]
    config: PathBuf,
    /// output directory
    #[arg(short, long, default_value = "vwave-out")]
    out: PathBuf,
    /// cap the number of worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// run every data-parallel loop sequentially
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    u0: Option<String>,
    #[arg(long)]
    u1: Option<String>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T")]
    t_max: Option<f64>,
}

impl Cli {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.c {
            cfg.c = v.clone();
        }
        if let Some(v) = &self.u0 {
            cfg.u0 = v.clone();
        }
        if let Some(v) = &self.u1 {
            cfg.u1 = v.clone();
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = Some(v);
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    if let Some(n) = cli.threads {
        vwave_core::par::init_threads(n.max(1))?;
    }
    if cli.sequential {
        vwave_core::par::set_parallel(false);
    }
    let mut cfg = RunConfig::load(&cli.config).map_err(|e| Failure::Validation(e.to_string()))?;
    cli.apply(&mut cfg);
    let mut out = OutputDir::create(&cli.out)?;
    let result = run::run(cli.command, &cfg, &mut out);
    let (status, summary, err) = match &result {
        Ok(v) => ("ok", v.clone(), None),
        Err(e) => ("failed", serde_json::Value::Null, Some(e.to_string())),
    };
    let manifest = json!({
        "tool": "vwave",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command,
        "status": status,
        "error": err,
        "inputs": cfg,
        "parallel": vwave_core::par::parallel_enabled(),
        "threads": cli.threads,
        "artifacts": out.artifacts(),
        "summary": summary,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    out.finish(&manifest)?;
    result.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vwave: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

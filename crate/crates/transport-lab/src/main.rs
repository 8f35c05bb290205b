//! Command-line front end.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use transport_lab::cli::{self, Mode, OutputFormat, RunConfig};
use transport_lab::l1::DensityBase;

#[derive(Parser)]
#[command(
    name = "transport-lab",
    about = "Numerical laboratory for self-similar nonunique transport flows",
    long_about = "Constructs and verifies self-similar divergence-free velocity fields and \
their piecewise-constant densities. Worker count follows RAYON_NUM_THREADS when built with \
the default `parallel` feature."
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Construction: l1, lr, or block
    #[arg(long, default_value = "lr")]
    mode: String,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 2.3)]
    nu: f64,
    #[arg(long, default_value_t = 2)]
    eta: u32,
    #[arg(long, default_value_t = 1.2)]
    p: f64,
    #[arg(long, default_value_t = 1.5)]
    r: f64,
    #[arg(long, default_value_t = 1.08)]
    q: f64,
    /// Recursion depth budget
    #[arg(long, default_value_t = 8)]
    depth: u32,
    /// Grid resolution per axis
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Number of time samples
    #[arg(long, default_value_t = 200)]
    times: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Density truncation: drop or freeze
    #[arg(long, default_value = "freeze")]
    base: String,
    /// Reversed-copy sign: auto (validated) or paper (printed formula)
    #[arg(long, default_value = "auto")]
    sign: String,
    /// Sequence component for the asynchronous construction
    #[arg(long, default_value_t = 1)]
    component: usize,
    /// Block spreading parameters (mode = block)
    #[arg(long, default_value_t = 0.45)]
    block_a: f64,
    #[arg(long, default_value_t = 0.2)]
    block_s: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv, json, or pgm
    #[arg(long, default_value = "csv")]
    format: String,
}

impl CommonOpts {
    fn config(&self) -> Result<RunConfig, String> {
        let mode = match self.mode.as_str() {
            "l1" => Mode::L1,
            "lr" => Mode::Lr,
            "block" => Mode::Block,
            other => return Err(format!("unknown mode `{other}`")),
        };
        let base = match self.base.as_str() {
            "drop" => DensityBase::Drop,
            "freeze" => DensityBase::Freeze,
            other => return Err(format!("unknown base `{other}`")),
        };
        let paper_sign = match self.sign.as_str() {
            "auto" => false,
            "paper" => true,
            other => return Err(format!("unknown sign convention `{other}`")),
        };
        let format = match self.format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            "pgm" => OutputFormat::Pgm,
            other => return Err(format!("unknown format `{other}`")),
        };
        Ok(RunConfig {
            mode,
            d: self.d,
            beta: self.beta,
            nu: self.nu,
            eta: self.eta,
            p: self.p,
            r: self.r,
            q: self.q,
            depth: self.depth,
            grid: self.grid,
            times: self.times,
            seed: self.seed,
            base,
            paper_sign,
            component: self.component,
            checkpoint_offset: 1e-6,
            block_a: self.block_a,
            block_s: self.block_s,
            out: self.out.clone(),
            format,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Norm-versus-time series of the configured construction
    NormSeries {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Density raster at a fixed time
    Snapshot {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        t: f64,
    },
    /// Execute the parameter-selection recipe for target exponents
    Feasibility {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite: divergence, mass, weakform, scaling,
    /// selfsimilar, contraction, or bounds
    Verify {
        suite: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate velocity, Jacobian, and density at one space-time point
    Eval {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        t: f64,
        /// Comma-separated coordinates
        #[arg(long)]
        x: String,
    },
}

fn run() -> Result<u8, String> {
    let args = CliArgs::parse();
    match args.command {
        Command::NormSeries { common } => {
            let cfg = common.config()?;
            let rows = cli::cmd_norm_series(&cfg).map_err(|e| e.to_string())?;
            if cfg.out.is_none() {
                println!("t,norm_exact,norm_grid,mass,w1p,depth");
                for r in rows {
                    println!(
                        "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                        r.t, r.norm_exact, r.norm_grid, r.mass, r.w1p, r.depth
                    );
                }
            }
            Ok(0)
        }
        Command::Snapshot { common, t } => {
            let cfg = common.config()?;
            cli::cmd_snapshot(&cfg, t).map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Feasibility { d, p, r, out } => {
            let rep = cli::cmd_feasibility(d, p, r, out.as_deref()).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?);
            Ok(if rep.feasible { 0 } else { 2 })
        }
        Command::Verify { suite, common } => {
            let cfg = common.config()?;
            let rep = cli::cmd_verify(&suite, &cfg).map_err(|e| e.to_string())?;
            rep.print();
            Ok(if rep.passed { 0 } else { 1 })
        }
        Command::Eval { common, t, x } => {
            let cfg = common.config()?;
            let coords: Result<Vec<f64>, _> =
                x.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let coords = coords.map_err(|e| format!("bad coordinate list: {e}"))?;
            let rep = cli::cmd_eval(&cfg, t, &coords).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| e.to_string())?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

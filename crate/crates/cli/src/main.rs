use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hvbk_core::diagnostics::sigma_fit;
use hvbk_core::dynamics::Formulation;
use hvbk_core::gevrey::{GevreyParams, VorticityFloorParams};
use hvbk_core::harness::{io, parse_config, simulate, SimConfig};
use hvbk_core::integrator::{compute_ledger_constants, StopReason};
use hvbk_core::verifier::{verify_inv_mag_bound, verify_nonlinear_estimate, FrozenConstants};
use hvbk_core::{HvbkError, Result};

/// Pseudospectral HVBK simulator and verification harness.
#[derive(Parser)]
#[command(name = "hvbk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diagnostics, snapshots and report.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Run exactly this many steps of size dt (sets t_max).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Brute-force check of the multilinear Gevrey estimate.
    VerifyLemma {
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.5)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
    },
    /// Reciprocal-magnitude bound on random floor-certified vorticities.
    VerifyAppendix {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "N", default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 2.6)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        m_f: f64,
        #[arg(long = "C0", default_value_t = 1.0)]
        c0: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma0: f64,
    },
    /// Print the ledger constants (X0, Ubar, T1, delta) for a configuration.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit the analyticity radius of one field in a snapshot file.
    FitSigma {
        snapshot: PathBuf,
        #[arg(long, default_value = "omega_s")]
        field: String,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    formulation: Option<Formulation>,
}

fn load(path: &std::path::Path, o: &Overrides, steps: Option<usize>) -> Result<SimConfig> {
    let mut cfg = parse_config(path)?;
    if let Some(out) = &o.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(f) = o.formulation {
        cfg.formulation = f;
    }
    let mut cfg = cfg.resolve()?;
    if let Some(steps) = steps {
        if steps == 0 {
            return Err(HvbkError::Input("--steps must be positive".into()));
        }
        cfg.t_max = steps as f64 * cfg.dt;
        cfg = cfg.resolve()?;
    }
    Ok(cfg)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { config, overrides, steps } => {
            let cfg = load(&config, &overrides, steps)?;
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            let out = simulate(&cfg)?;
            let r = &out.report;
            println!("stop reason: {}", r.stop_reason);
            println!("t_end: {} after {} steps", r.t_end, r.steps);
            println!("T1: {}", r.ledger.t1);
            println!("delta: {}", r.ledger.delta);
            println!("torque budget used: {} of {}", r.torque_budget_used, r.torque_budget);
            if let Some((lo, hi)) = r.crossing_bracket {
                println!("floor crossing in [{lo}, {hi}]");
            }
            println!("momentum drift: {:e}", r.momentum_drift);
            println!("output: {}", cfg.output.dir.display());
            Ok(if r.stop_reason == StopReason::T2 { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Command::VerifyLemma { k, trials, seed, p, sigma, n } => {
            let gp = GevreyParams::new(p, sigma, 0.0)?;
            let frozen = FrozenConstants::load()?.lemma_bound(k, p, sigma);
            let rep = verify_nonlinear_estimate(k, trials, &gp, n, seed, frozen)?;
            print_json(&serde_json::json!({ "lemma": rep }))?;
            Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
        Command::VerifyAppendix { trials, seed, n, epsilon, p, m_f, c0, sigma0 } => {
            let vf = VorticityFloorParams::new(1.0, m_f, c0, sigma0)?;
            let gp = GevreyParams::new(p, sigma0, 0.0)?;
            let rep = verify_inv_mag_bound(trials, &vf, &gp, n, epsilon, seed)?;
            print_json(&serde_json::json!({ "appendix": rep }))?;
            Ok(if rep.pass { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
        Command::Constants { config, overrides } => {
            let cfg = load(&config, &overrides, None)?;
            let lc = compute_ledger_constants(&cfg.initial_state()?, &cfg.gevrey_params()?, cfg.c_ledger)?;
            print_json(&serde_json::json!({
                "ledger": lc,
                "floor": cfg.floor_params()?,
                "beta": cfg.floor_params()?.beta(),
            }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::FitSigma { snapshot, field } => {
            let snap = io::read_snapshot(&snapshot)?;
            let s = sigma_fit(snap.field(&field)?)?;
            print_json(&serde_json::json!({ "field": field, "N": snap.n, "sigma_fit": s }))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("HVBK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HvbkError::Input(format!("HVBK_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HvbkError::Input(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

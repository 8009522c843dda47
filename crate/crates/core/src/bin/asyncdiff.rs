//! Experiment harness: analyze / simulate / compare / sweep pipelines
//! driven by a JSON config, with reproducible seeded outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asyncdiff::config::ExperimentConfig;
use asyncdiff::error::Error;
use asyncdiff::netmodel::AsyncNetworkModel;
use asyncdiff::report::{sha256_hex, OutputWriter};
use asyncdiff::sim::{self, SimConfig};
use asyncdiff::theory;

#[derive(Parser)]
#[command(name = "asyncdiff", version, about = "Asynchronous diffusion LMS: simulation and closed-form analysis")]
struct Cli {
    /// Path to the experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppresses the human-readable summary.
    #[arg(long, global = true)]
    quiet: bool,

    /// Includes the aggregate matrices in theory.json.
    #[arg(long, global = true)]
    dump_matrices: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form performance analysis only.
    Analyze,
    /// Monte-Carlo simulation only.
    Simulate,
    /// Analysis plus simulation with a tolerance verdict.
    Compare,
    /// Step-size-scale sweep with log-log slope fits.
    Sweep,
}

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_GATE: u8 = 2;
const EXIT_PRIMITIVITY: u8 = 3;
const EXIT_TOLERANCE: u8 = 4;
const EXIT_DIVERGENCE: u8 = 5;

fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::NotPrimitive(_) | Error::NonPositivePerron { .. } => EXIT_PRIMITIVITY,
        Error::Diverged { .. } => EXIT_DIVERGENCE,
        _ => EXIT_USAGE,
    }
}

struct Ctx {
    model: AsyncNetworkModel,
    cfg: ExperimentConfig,
    sim_cfg: SimConfig,
    out_dir: PathBuf,
    config_hash: String,
    quiet: bool,
    dump: bool,
}

fn load(cli: &Cli) -> Result<Ctx, (u8, String)> {
    let path = cli
        .config
        .as_ref()
        .ok_or((EXIT_USAGE, "--config <path> is required".to_string()))?;
    let bytes = std::fs::read(path).map_err(|e| (EXIT_USAGE, format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&String::from_utf8_lossy(&bytes))
        .map_err(|e| (EXIT_USAGE, format!("config parse: {e}")))?;
    let model = cfg.build_model().map_err(|e| (EXIT_USAGE, format!("config: {e}")))?;
    let mut sim_cfg = cfg.sim_config();
    if let Some(seed) = cli.seed {
        sim_cfg.master_seed = seed;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output));
    Ok(Ctx {
        model,
        sim_cfg,
        out_dir,
        config_hash: sha256_hex(&bytes),
        quiet: cli.quiet,
        dump: cli.dump_matrices,
        cfg,
    })
}

fn db(x: f64) -> String {
    let v = 10.0 * x.log10();
    if v.is_finite() {
        format!("{v:.2} dB")
    } else {
        "-inf".to_string()
    }
}

fn print_theory(rep: &theory::TheoryReport) {
    println!("agents: {}   M: {}   nu: {:.4e}", rep.n_agents, rep.m_dim, rep.nu);
    let g = &rep.stability;
    let fmt_gate = |name: &str, gates: &[asyncdiff::netmodel::Gate]| {
        let worst = gates
            .iter()
            .min_by(|a, b| a.margin().partial_cmp(&b.margin()).unwrap())
            .unwrap();
        println!(
            "gate {name}: {}  (worst value {:.4e} vs bound {:.4e})",
            if gates.iter().all(|x| x.pass) { "pass" } else { "FAIL" },
            worst.value,
            worst.bound
        );
    };
    fmt_gate("fourth-moment", &g.gate_fourth);
    fmt_gate("second-moment", &g.gate_second);
    fmt_gate("mean", &g.gate_mean);
    println!(
        "rho(G): {:.6}   rho(F_small): {:.6}   rho(Fcal): {:.6}",
        rep.rho_g_numeric, rep.rho_f_small, rep.rho_fcal
    );
    println!(
        "MSD exact: {}   low-rank: {}   gamma_o: {}   gamma_o': {}",
        db(rep.msd_exact_net),
        db(rep.msd_lowrank),
        rep.gamma_o,
        rep.gamma_o_prime
    );
    for (k, m) in rep.msd_exact_per_agent.iter().enumerate() {
        println!("  agent {k}: MSD {}", db(*m));
    }
}

fn cmd_analyze(ctx: &Ctx) -> Result<u8, (u8, String)> {
    let rep = theory::analyze(&ctx.model, ctx.dump)
        .map_err(|e| (error_exit_code(&e), e.to_string()))?;
    let mut w = OutputWriter::new(&ctx.out_dir).map_err(io_err)?;
    w.write_json("theory.json", &rep).map_err(io_err)?;
    w.finalize(&ctx.config_hash, ctx.sim_cfg.master_seed).map_err(io_err)?;
    if !ctx.quiet {
        print_theory(&rep);
    }
    Ok(if rep.stability.all_pass() { EXIT_OK } else { EXIT_GATE })
}

fn io_err(e: Error) -> (u8, String) {
    (EXIT_USAGE, e.to_string())
}

fn cmd_simulate(ctx: &Ctx) -> Result<u8, (u8, String)> {
    let rep = sim::run_ensemble(&ctx.model, &ctx.sim_cfg)
        .map_err(|e| (error_exit_code(&e), e.to_string()))?;
    let mut w = OutputWriter::new(&ctx.out_dir).map_err(io_err)?;
    if ctx.cfg.formats.json {
        w.write_json("sim.json", &rep).map_err(io_err)?;
    }
    if ctx.cfg.formats.csv {
        w.write_trajectories("trajectories.csv", &rep).map_err(io_err)?;
    }
    w.finalize(&ctx.config_hash, ctx.sim_cfg.master_seed).map_err(io_err)?;
    if !ctx.quiet {
        match rep.msd_net_stderr {
            Some(se) => println!(
                "steady MSD: {:.6e} +/- {:.1e}  ({})",
                rep.msd_net_steady,
                se,
                db(rep.msd_net_steady)
            ),
            None => println!(
                "steady MSD: {:.6e}  ({}); stderr not available with runs=1",
                rep.msd_net_steady,
                db(rep.msd_net_steady)
            ),
        }
    }
    Ok(EXIT_OK)
}

fn cmd_compare(ctx: &Ctx) -> Result<u8, (u8, String)> {
    let th = theory::analyze(&ctx.model, ctx.dump)
        .map_err(|e| (error_exit_code(&e), e.to_string()))?;
    let sim_rep = sim::run_ensemble(&ctx.model, &ctx.sim_cfg)
        .map_err(|e| (error_exit_code(&e), e.to_string()))?;
    let cmp = sim::compare(&th, &sim_rep, ctx.cfg.tolerances.msd_rel);
    let mut w = OutputWriter::new(&ctx.out_dir).map_err(io_err)?;
    w.write_json("theory.json", &th).map_err(io_err)?;
    w.write_json("sim.json", &sim_rep).map_err(io_err)?;
    w.write_json("comparison.json", &cmp).map_err(io_err)?;
    w.finalize(&ctx.config_hash, ctx.sim_cfg.master_seed).map_err(io_err)?;
    if !ctx.quiet {
        for row in &cmp.rows {
            println!(
                "{:>12}: theory {:.6e} ({})  sim {:.6e} ({})  rel {:.3}  {}",
                row.label,
                row.theory_exact,
                db(row.theory_exact),
                row.simulated,
                db(row.simulated),
                row.rel_dev_exact,
                if row.pass { "pass" } else { "FAIL" }
            );
        }
    }
    Ok(if cmp.all_pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn cmd_sweep(ctx: &Ctx) -> Result<u8, (u8, String)> {
    let rep = sim::nu_sweep(&ctx.model, &ctx.sim_cfg, &ctx.cfg.sweep.factors)
        .map_err(|e| (error_exit_code(&e), e.to_string()))?;
    let tol = &ctx.cfg.tolerances;
    let msd_ok = (rep.msd_slope.slope - 1.0).abs() <= tol.slope_msd;
    let dis_ok = rep.disagreement_slope.slope >= tol.slope_disagreement;
    let gap_ok = rep
        .gap_slope
        .as_ref()
        .map(|g| (g.slope - 2.0).abs() <= tol.slope_gap)
        .unwrap_or(true);
    #[derive(serde::Serialize)]
    struct Slopes<'a> {
        msd: &'a sim::SlopeFit,
        disagreement: &'a sim::SlopeFit,
        gap: Option<&'a sim::SlopeFit>,
        msd_pass: bool,
        disagreement_pass: bool,
        gap_pass: bool,
    }
    let slopes = Slopes {
        msd: &rep.msd_slope,
        disagreement: &rep.disagreement_slope,
        gap: rep.gap_slope.as_ref(),
        msd_pass: msd_ok,
        disagreement_pass: dis_ok,
        gap_pass: gap_ok,
    };
    let mut w = OutputWriter::new(&ctx.out_dir).map_err(io_err)?;
    w.write_sweep_csv("sweep.csv", &rep).map_err(io_err)?;
    w.write_json("slopes.json", &slopes).map_err(io_err)?;
    w.finalize(&ctx.config_hash, ctx.sim_cfg.master_seed).map_err(io_err)?;
    if !ctx.quiet {
        println!(
            "msd slope {:.3} [{}], disagreement slope {:.3} [{}]{}",
            rep.msd_slope.slope,
            if msd_ok { "pass" } else { "FAIL" },
            rep.disagreement_slope.slope,
            if dis_ok { "pass" } else { "FAIL" },
            rep.gap_slope
                .as_ref()
                .map(|g| format!(", gap slope {:.3} [{}]", g.slope, if gap_ok { "pass" } else { "FAIL" }))
                .unwrap_or_default()
        );
    }
    Ok(if msd_ok && dis_ok && gap_ok { EXIT_OK } else { EXIT_TOLERANCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match load(&cli) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze => cmd_analyze(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Compare => cmd_compare(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

//! `svi-lab` command line: parse a JSON config, dispatch a solver or a Monte
//! Carlo study, write reports and path dumps.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure. Every failure
//! also lands in `error.json` under the output directory.

mod artifacts;
mod config;

use artifacts::{ensure_dir, sha256_hex, OutputFormat, RunContext};
use clap::{Parser, Subcommand, ValueEnum};
use config::*;
use serde_json::json;
use std::path::PathBuf;
use svi_lab::dvi;
use svi_lab::experiments::{
    approx_continuity_study, k_tail_study, levy_area_study, limit_theorem_study,
    small_ball_study, support_direct_study, ContinuityConfig, KTailConfig, LevyAreaConfig,
    LimitTheoremConfig, SmallBallConfig,
};
use svi_lab::monotone::operator_law_battery;
use svi_lab::svi::{generate_driver, skorokhod_oracle, validate_solution, wong_zakai_solve};
use svi_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "svi-lab", version, about = "Stochastic variational inequality laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and path dumps.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed field of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo trials; a performance knob that never
    /// changes outputs.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Randomized operator-law battery for a catalog operator.
    ProxCheck,
    /// Integrate a deterministic variational inequality.
    Dvi,
    /// Integrate a controlled skeleton pair.
    Skeleton,
    /// Solve one sample path of the stochastic problem.
    Svi,
    /// Reflected solver against the exact running-maximum oracle.
    OracleCompare,
    /// Convergence of the dyadic approximants to the reference pair.
    LimitTheorem,
    /// Conditional closeness to the anchor skeleton.
    Continuity,
    /// Small-ball probabilities of the driver sup norm.
    SmallBall,
    /// Conditional tails of the iterated integral.
    LevyArea,
    /// Skeleton-route distances (direct support inclusion witness).
    SupportDirect,
    /// Tail of the compensator total variation.
    KTail,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ProxCheck => "prox-check",
            Command::Dvi => "dvi",
            Command::Skeleton => "skeleton",
            Command::Svi => "svi",
            Command::OracleCompare => "oracle-compare",
            Command::LimitTheorem => "limit-theorem",
            Command::Continuity => "continuity",
            Command::SmallBall => "small-ball",
            Command::LevyArea => "levy-area",
            Command::SupportDirect => "support-direct",
            Command::KTail => "k-tail",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let command = cli.command.name().to_string();
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config is required");
            return 2;
        }
    };
    let raw = match std::fs::read(&config_path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 2;
        }
    };
    let mut ctx = RunContext {
        command,
        seed: cli.seed.unwrap_or(0),
        config_sha256: sha256_hex(&raw),
        out_dir: cli.out.clone(),
    };
    if let Err(e) = ensure_dir(&ctx.out_dir) {
        eprintln!("error: cannot create output directory: {e}");
        return 2;
    }

    let workers = cli.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            ctx.write_error("input", &format!("cannot build worker pool: {e}"));
            return 2;
        }
    };

    let format: OutputFormat = cli.format.into();
    let outcome = pool.install(|| dispatch(cli.command, &raw, cli.seed, &mut ctx, format));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let kind = if e.is_input_error() { "input" } else { "numerical" };
            ctx.write_error(kind, &e.to_string());
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(raw: &[u8]) -> Result<T> {
    serde_json::from_slice(raw).map_err(|e| Error::Parse(format!("config: {e}")))
}

fn dispatch(
    command: Command,
    raw: &[u8],
    seed_override: Option<u64>,
    ctx: &mut RunContext,
    format: OutputFormat,
) -> Result<()> {
    match command {
        Command::ProxCheck => {
            let mut cfg: ProxCheckConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            run_prox_check(&cfg, ctx)
        }
        Command::Dvi => {
            let cfg: DviRunConfig = parse(raw)?;
            run_dvi(&cfg, ctx)
        }
        Command::Skeleton => {
            let mut cfg: SkeletonRunConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            run_skeleton(&cfg, ctx)
        }
        Command::Svi => {
            let mut cfg: SviRunConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            run_svi(&cfg, ctx)
        }
        Command::OracleCompare => {
            let mut cfg: OracleCompareConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            run_oracle_compare(&cfg, ctx)
        }
        Command::LimitTheorem => {
            let mut cfg: LimitTheoremConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&limit_theorem_study(&cfg)?, format)
        }
        Command::SupportDirect => {
            let mut cfg: LimitTheoremConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&support_direct_study(&cfg)?, format)
        }
        Command::Continuity => {
            let mut cfg: ContinuityConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&approx_continuity_study(&cfg)?, format)
        }
        Command::SmallBall => {
            let mut cfg: SmallBallConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&small_ball_study(&cfg)?, format)
        }
        Command::LevyArea => {
            let mut cfg: LevyAreaConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&levy_area_study(&cfg)?, format)
        }
        Command::KTail => {
            let mut cfg: KTailConfig = parse(raw)?;
            if let Some(s) = seed_override {
                cfg.seed = s;
            }
            ctx.seed = cfg.seed;
            ctx.write_report(&k_tail_study(&cfg)?, format)
        }
    }
}

/// Randomized operator laws: nonexpansive resolvent, Lipschitz monotone
/// Yosida map, Moreau identity, graph monotonicity. Violations beyond the
/// tolerances are a numerical failure.
fn run_prox_check(cfg: &ProxCheckConfig, ctx: &RunContext) -> Result<()> {
    if cfg.cases == 0 {
        return Err(Error::InvalidInput("case count must be positive".into()));
    }
    let battery = operator_law_battery(&cfg.operator, cfg.cases, cfg.seed)?;
    let pass = battery.pass();
    ctx.write_json(
        "report.json",
        serde_json::to_value(&battery).map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    if !pass {
        return Err(Error::NonConvergence {
            iterations: cfg.cases as usize,
            residual: battery.worst_violation(),
        });
    }
    println!("prox-check: all operator laws hold over {} cases", cfg.cases);
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn run_dvi(cfg: &DviRunConfig, ctx: &RunContext) -> Result<()> {
    let forcing = cfg.forcing.build(cfg.horizon, cfg.step)?;
    let problem = dvi::DviProblem {
        operator: cfg.operator.clone(),
        forcing,
        start: cfg.start.clone(),
        horizon: cfg.horizon,
    };
    let u = dvi::solve_dvi(&problem, cfg.step)?;
    let brezis = dvi::brezis_energy_check(&problem, &u)?;
    ctx.write_path_csv("u.csv", &u)?;
    ctx.write_json(
        "report.json",
        json!({
            "brezis_lhs": brezis.lhs,
            "brezis_rhs": brezis.rhs,
            "brezis_pass": brezis.pass,
            "nodes": u.n_nodes(),
        }),
    )?;
    println!("dvi: {} nodes written, energy check pass={}", u.n_nodes(), brezis.pass);
    Ok(())
}

fn run_skeleton(cfg: &SkeletonRunConfig, ctx: &RunContext) -> Result<()> {
    let control = cfg.control.build()?;
    let input = dvi::SkeletonInput {
        operator: cfg.operator.clone(),
        drift: cfg.drift.clone(),
        diffusion: cfg.diffusion.clone(),
        control,
        start: cfg.start.clone(),
    };
    let (xi, eta) = dvi::skeleton(&input, cfg.step)?;
    let pairs = cfg.operator.sample_graph(100, cfg.seed)?;
    let slack = dvi::validate_flow(&xi, &eta, &pairs)?;
    let cert = cfg.operator.interior_certificate()?;
    let interior = dvi::interior_inequality_slack(&xi, &eta, &cert, 0, xi.n_steps())?;
    ctx.write_path_csv("xi.csv", &xi)?;
    ctx.write_path_csv("eta.csv", &eta)?;
    ctx.write_json(
        "report.json",
        json!({
            "flow_min_slack": slack,
            "interior_slack": interior,
            "certificate": {"a": cert.a, "c1": cert.c1, "c2": cert.c2},
            "nodes": xi.n_nodes(),
        }),
    )?;
    println!("skeleton: flow slack {slack:.3e}, interior slack {interior:.3e}");
    Ok(())
}

fn run_svi(cfg: &SviRunConfig, ctx: &RunContext) -> Result<()> {
    cfg.problem.validate()?;
    let driver = generate_driver(
        cfg.problem.noise_dim,
        cfg.problem.horizon,
        cfg.n_fine,
        cfg.seed,
        cfg.stream,
    )?;
    let level = cfg.level.unwrap_or(cfg.n_fine);
    let substep = cfg.substep.unwrap_or(driver.fine_dt());
    let sol = wong_zakai_solve(&cfg.problem, &driver, level, substep)?;
    let pairs = cfg.problem.operator.sample_graph(100, cfg.seed ^ 0xabcd)?;
    let cert = cfg.problem.operator.interior_certificate()?;
    let report = validate_solution(&cfg.problem, &sol, &pairs, &cert)?;
    ctx.write_path_csv("X.csv", &sol.x)?;
    ctx.write_path_csv("K.csv", &sol.k)?;
    ctx.write_json(
        "validation.json",
        serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    println!(
        "svi: level {level} solved, tv(K)={:.4}, validation pass={}",
        sol.tv_k, report.pass
    );
    if !report.pass {
        return Err(Error::NonConvergence { iterations: 0, residual: report.dynamics_residual });
    }
    Ok(())
}

fn run_oracle_compare(cfg: &OracleCompareConfig, ctx: &RunContext) -> Result<()> {
    use rayon::prelude::*;
    cfg.validate()?;
    let problem = svi_lab::svi::SviProblem::reflected_bm(cfg.start, cfg.horizon);
    let pairs = problem.operator.sample_graph(100, cfg.seed ^ 0x5eed)?;
    let cert = problem.operator.interior_certificate()?;
    let stats: Vec<(f64, f64, f64, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|stream| -> Result<(f64, f64, f64, bool)> {
            let drv = generate_driver(1, cfg.horizon, cfg.n_fine, cfg.seed, stream)?;
            let sol = wong_zakai_solve(&problem, &drv, cfg.n_fine, drv.fine_dt())?;
            let oracle = skorokhod_oracle(cfg.start, &drv.path)?;
            let mut x_gap = 0.0f64;
            let mut k_gap = 0.0f64;
            for k in 0..=sol.x.n_steps() {
                x_gap = x_gap.max(dist(sol.x.node(k), oracle.x.node(k)));
                k_gap = k_gap.max(dist(sol.k.node(k), oracle.k.node(k)));
            }
            let report = validate_solution(&problem, &sol, &pairs, &cert)?;
            Ok((x_gap, k_gap, report.flow_min_slack.min(report.interior_min_slack), report.pass))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_x = stats.iter().map(|s| s.0).fold(0.0f64, f64::max);
    let max_k = stats.iter().map(|s| s.1).fold(0.0f64, f64::max);
    let min_slack = stats.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let all_pass = stats.iter().all(|s| s.3);
    ctx.write_json(
        "report.json",
        json!({
            "trials": cfg.trials,
            "max_x_gap": max_x,
            "max_k_gap": max_k,
            "min_validation_slack": min_slack,
            "all_clauses_pass": all_pass,
        }),
    )?;
    println!(
        "oracle-compare: {} trials, max gaps ({max_x:.3e}, {max_k:.3e}), min slack {min_slack:.3e}",
        cfg.trials
    );
    if max_x > 1e-10 || max_k > 1e-10 || !all_pass {
        return Err(Error::NonConvergence { iterations: 0, residual: max_x.max(max_k) });
    }
    Ok(())
}

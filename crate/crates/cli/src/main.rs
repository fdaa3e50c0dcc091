use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nloc_core::config::{canonical, parse_config, Config};
use nloc_core::harness::{
    run_convergence, run_correlation, run_ipr_sweep, run_oracle_flat, run_oracle_flrw, run_snapshot, ExperimentKind,
    SweepAxis,
};
use nloc_core::output::{self, suffixed, write_sidecar, Table};
use nloc_core::selftest::run_selftest;
use nloc_core::Error;

/// Monte Carlo experiments on noise-induced wave-function localization.
#[derive(Parser)]
#[command(name = "nloc", version)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized densities after each duration in plan.values.
    Snapshot(RunArgs),
    /// Mean IPR against the coupling.
    IprSweep(RunArgs),
    /// Mean IPR against n_runs or one of the grid steps.
    Convergence(RunArgs),
    /// Two-point correlator and fitted correlation length.
    Correlation(RunArgs),
    /// Closed forms and quadrature of the flat-space covariance.
    OracleFlat(RunArgs),
    /// Expanding-universe covariance next to the flat one.
    OracleFlrw(RunArgs),
    /// Fast built-in checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (`key = value` lines).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_runs: Option<usize>,
    /// Output CSV; `-` writes to stdout. Defaults to plan.output, then
    /// `$NLOC_OUTPUT_DIR/<kind>.csv`.
    #[arg(long, short)]
    output: Option<String>,
    /// Sweep axis, overriding plan.axis.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated sweep values, overriding plan.values.
    #[arg(long)]
    values: Option<String>,
    /// Print the resolved plan and exit.
    #[arg(long)]
    dry_run: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 3,
        "params" => 4,
        "domain" => 5,
        "numerical" => 6,
        "io" => 7,
        _ => 1,
    }
}

fn load(args: &RunArgs, kind: ExperimentKind) -> Result<Config, Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Io {
        path: args.config.clone(),
        source: e,
    })?;
    let mut plan = parse_config(&text)?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(n) = args.n_runs {
        plan.n_runs = n;
    }
    if let Some(o) = &args.output {
        plan.output = Some(o.clone());
    }
    if let Some(a) = &args.axis {
        plan.axis = Some(SweepAxis::parse(a)?);
        if args.values.is_none() {
            plan.values = None;
        }
    }
    if let Some(v) = &args.values {
        let values = v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParams(format!("--values: {e}")))?;
        plan.values = Some(values);
    }
    plan.resolve(kind)
}

fn default_path(kind: ExperimentKind) -> PathBuf {
    let dir = std::env::var_os("NLOC_OUTPUT_DIR").map_or_else(|| PathBuf::from("."), PathBuf::from);
    dir.join(format!("{}.csv", kind.as_str()))
}

/// Writes `tables` (with suffixes) to the plan's destination plus a sidecar per file.
fn emit(plan: &Config, tables: &[(String, Table)]) -> Result<(), Error> {
    let kind = plan.kind.expect("resolved plan");
    if plan.output.as_deref() == Some("-") {
        for (_, t) in tables {
            print!("{}", t.render()?);
        }
        return Ok(());
    }
    let base = plan.output.as_ref().map_or_else(|| default_path(kind), PathBuf::from);
    for (suffix, t) in tables {
        let path = if suffix.is_empty() { base.clone() } else { suffixed(&base, suffix) };
        t.write(&path)?;
        write_sidecar(&path, plan)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<(), Error> {
    let plan = load(args, kind)?;
    if args.dry_run {
        print!("{}", canonical(&plan));
        return Ok(());
    }
    log::info!("running {} with {} runs, seed {}", kind.as_str(), plan.n_runs, plan.seed);
    let tables = match kind {
        ExperimentKind::Snapshot => {
            let res = run_snapshot(&plan)?;
            let mut t: Vec<(String, Table)> = output::snapshot_tables(&res)
                .into_iter()
                .enumerate()
                .map(|(k, t)| (format!("_t{k}"), t))
                .collect();
            t.push(("_ipr".into(), output::snapshot_ipr_table(&res)));
            t
        }
        ExperimentKind::IprSweep => vec![(String::new(), output::sweep_table(&run_ipr_sweep(&plan)?))],
        ExperimentKind::Convergence => vec![(String::new(), output::sweep_table(&run_convergence(&plan)?))],
        ExperimentKind::Correlation => {
            let res = run_correlation(&plan)?;
            eprintln!(
                "r_c = {:.6} +- {:.6}, predicted {:.6}, ratio {:.3}",
                res.fit.r_c_hat,
                res.fit.r_c_err,
                res.predicted_rc,
                res.ratio()
            );
            vec![(String::new(), output::correlation_table(&res))]
        }
        ExperimentKind::OracleFlat => vec![(String::new(), output::flat_oracle_table(&run_oracle_flat(&plan)?))],
        ExperimentKind::OracleFlrw => vec![(String::new(), output::flrw_oracle_table(&run_oracle_flrw(&plan)?))],
    };
    emit(&plan, &tables)
}

fn selftest() -> ExitCode {
    let started = std::time::Instant::now();
    let outcomes = run_selftest();
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!(
        "{} of {} checks passed in {:.1} s",
        outcomes.len() - failed,
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("error[selftest]: {failed} check(s) failed");
        ExitCode::from(8)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[params]: cannot set up {n} threads: {e}");
            return ExitCode::from(4);
        }
    }
    let (kind, args) = match &cli.command {
        Command::Selftest => return selftest(),
        Command::Snapshot(a) => (ExperimentKind::Snapshot, a),
        Command::IprSweep(a) => (ExperimentKind::IprSweep, a),
        Command::Convergence(a) => (ExperimentKind::Convergence, a),
        Command::Correlation(a) => (ExperimentKind::Correlation, a),
        Command::OracleFlat(a) => (ExperimentKind::OracleFlat, a),
        Command::OracleFlrw(a) => (ExperimentKind::OracleFlrw, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

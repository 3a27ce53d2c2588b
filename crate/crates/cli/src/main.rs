mod commands;
mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fractal_khintchine::ifs::IfsModel;
use serde_json::json;

use report::ResultRecord;
use spec::{CommandName, ExperimentSpec, Params};

#[derive(Parser)]
#[command(name = "fkh", version = report::VERSION, about = "Khintchine-type experiments on self-similar measures")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    params: Params,
    /// TOML experiment file; command-line values override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for `<command>.csv` and `<command>.json`
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "FKH_THREADS")]
    threads: Option<usize>,
    /// Run the built-in exact fixtures instead of the experiment
    #[arg(long)]
    selftest: bool,
    /// Print the resolved experiment as TOML and exit
    #[arg(long)]
    dump_spec: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw points from the depth-n measure
    Sample(RunArgs),
    /// Count rational approximations up to each N
    Count(RunArgs),
    /// Compare dyadic-block counts with lattice point counts
    DaniCheck(RunArgs),
    /// Random walk on the space of lattices
    Walk(RunArgs),
    /// Cusp fractions of the walk
    Recurrence(RunArgs),
    /// Walk mass near fixed lattices
    BallMass(RunArgs),
    /// Siegel averages over expanding translates
    Equidist(RunArgs),
    /// Two-time correlations of expanding translates
    DoubleCorr(RunArgs),
    /// Siegel transform under exact Haar samples (d = 1)
    HaarSiegel(RunArgs),
    /// Measure of non-concentration in the Lie algebra
    Mnc(RunArgs),
    /// Dimension of the obstruction intersection
    Obstruction(RunArgs),
    /// Search for transversal witnesses
    Witness(RunArgs),
    /// List staircase sets
    Staircases(RunArgs),
    /// Affine non-concentration of the measure
    Nonconc(RunArgs),
    /// Run every command's exact fixtures
    Selftest,
    /// List preset models
    Presets {
        #[arg(long)]
        json: bool,
    },
}

fn split(cmd: Cmd) -> (CommandName, RunArgs) {
    use CommandName as C;
    match cmd {
        Cmd::Sample(a) => (C::Sample, a),
        Cmd::Count(a) => (C::Count, a),
        Cmd::DaniCheck(a) => (C::DaniCheck, a),
        Cmd::Walk(a) => (C::Walk, a),
        Cmd::Recurrence(a) => (C::Recurrence, a),
        Cmd::BallMass(a) => (C::BallMass, a),
        Cmd::Equidist(a) => (C::Equidist, a),
        Cmd::DoubleCorr(a) => (C::DoubleCorr, a),
        Cmd::HaarSiegel(a) => (C::HaarSiegel, a),
        Cmd::Mnc(a) => (C::Mnc, a),
        Cmd::Obstruction(a) => (C::Obstruction, a),
        Cmd::Witness(a) => (C::Witness, a),
        Cmd::Staircases(a) => (C::Staircases, a),
        Cmd::Nonconc(a) => (C::Nonconc, a),
        Cmd::Selftest | Cmd::Presets { .. } => unreachable!("handled in main"),
    }
}

fn presets(as_json: bool) -> Result<bool> {
    let mut rows = Vec::new();
    for name in IfsModel::preset_names() {
        let m = IfsModel::preset(name)?;
        rows.push(json!({
            "name": name,
            "d": m.dimension(),
            "maps": m.len(),
            "ratios": m.maps().iter().map(|f| f.ratio()).collect::<Vec<_>>(),
            "weights": m.weights(),
            "lyapunov": m.lyapunov_exponent(),
            "default_depth": m.default_depth(),
        }));
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for r in &rows {
            println!(
                "{:<20} d={} maps={} lyapunov={:.6}",
                r["name"].as_str().unwrap_or(""),
                r["d"],
                r["maps"],
                r["lyapunov"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(true)
}

fn selftest_all() -> Result<bool> {
    let mut ok = true;
    for &c in CommandName::all() {
        let out = commands::selftest(c)?;
        for a in &out.assertions {
            println!(
                "{} {c}: {}{}",
                if a.passed { "PASS" } else { "FAIL" },
                a.name,
                if a.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", a.detail)
                }
            );
            ok &= a.passed;
        }
    }
    Ok(ok)
}

fn run(command: CommandName, args: RunArgs) -> Result<bool> {
    let spec = ExperimentSpec::resolve(
        command,
        args.config.as_deref(),
        &args.params,
        args.threads,
        args.out.as_ref().map(|p| p.display().to_string()),
    )?;
    if args.dump_spec {
        print!("{}", spec.to_toml()?);
        return Ok(true);
    }
    if let Some(n) = spec.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let clock = Instant::now();
    let outcome = if args.selftest {
        commands::selftest(command)?
    } else {
        commands::run(&spec)?
    };
    let mut record = ResultRecord::new(&spec, &outcome, clock.elapsed().as_secs_f64());
    if let Some(dir) = &spec.output {
        record.write(dir.as_ref(), &outcome.table)?;
    }
    println!("{}", serde_json::to_string_pretty(&record)?);
    for a in record.assertions.iter().filter(|a| !a.passed) {
        eprintln!("assertion failed: {} {}", a.name, a.detail);
    }
    Ok(record.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Selftest => selftest_all(),
        Cmd::Presets { json } => presets(json),
        other => {
            let (c, args) = split(other);
            run(c, args)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

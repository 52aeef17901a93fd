//! `wfl`: run wireless federated-learning experiments from a TOML config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
//! failure, 5 a self-test check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use wfl_core::harness::{
    bound_report, export_csv, load_config, run_experiment, sweep, validate_config, write_bound_csv, write_manifest,
    write_sweep_csv, Algorithm, ExperimentConfig, Manifest, Summary, SweepAxis, Topology,
};
use wfl_core::Error;

#[derive(Parser)]
#[command(name = "wfl", version, about = "Federated learning over a lossy wireless uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OutArg {
    /// Output directory; overrides the config's `output.dir`.
    #[arg(long, env = "WFL_OUTPUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) cell and write `runs.csv` plus `manifest.json`.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Print the allocation of the first seed's topology.
    Assign {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgArg::Proposed)]
        algorithm: AlgArg,
        /// Topology seed; defaults to the config's first seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the convergence bound with the seed-averaged excess loss.
    Bound {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgArg::Proposed)]
        algorithm: AlgArg,
        /// Number of packet-outcome seeds; defaults to `output.bound_runs`.
        #[arg(long)]
        runs: Option<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Repeat the experiment over values of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the invariant self-test battery on the config's first topology.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Proposed,
    BaselineA,
    BaselineB,
    BaselineC,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Proposed => Algorithm::Proposed,
            AlgArg::BaselineA => Algorithm::BaselineA,
            AlgArg::BaselineB => Algorithm::BaselineB,
            AlgArg::BaselineC => Algorithm::BaselineC,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    UserCount,
    RbCount,
    SamplesPerUser,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::UserCount => SweepAxis::UserCount,
            AxisArg::RbCount => SweepAxis::RbCount,
            AxisArg::SamplesPerUser => SweepAxis::SamplesPerUser,
        }
    }
}

enum Failure {
    Core(Error),
    ChecksFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn class(&self) -> (&'static str, u8) {
        match self {
            Failure::Core(Error::InvalidConfig { .. } | Error::ConfigParse(_)) => ("config", 2),
            Failure::Core(Error::Io { .. } | Error::Csv { .. } | Error::Serde(_)) => ("io", 3),
            Failure::Core(_) => ("numerical", 4),
            Failure::ChecksFailed(_) => ("validation", 5),
        }
    }
}

fn output_dir(config: &ExperimentConfig, out: &OutArg) -> Result<PathBuf, Error> {
    let dir = out.out.clone().unwrap_or_else(|| config.output.dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn simulate(path: &Path, out: &OutArg) -> Result<(), Failure> {
    let config = load_config(path)?;
    let dir = output_dir(&config, out)?;
    let start = Instant::now();
    let records = run_experiment(&config)?;
    let csv_path = dir.join("runs.csv");
    export_csv(&records, &csv_path)?;
    for &a in &config.algorithms {
        let losses: Vec<f64> = records.iter().filter(|r| r.algorithm == a).map(|r| r.final_loss()).collect();
        let s = Summary::of(&losses);
        println!("{:<11} final loss {:.6} ± {:.6} over {} seeds", a.name(), s.mean, s.std, s.n);
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        csv_file: "runs.csv".to_string(),
        records,
        total_wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_manifest(&manifest, &dir.join("manifest.json"))?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn assign(path: &Path, algorithm: Algorithm, seed: Option<u64>) -> Result<(), Failure> {
    let config = load_config(path)?;
    let seed = seed.unwrap_or(config.seeds[0]);
    let topo = Topology::build(&config, seed)?;
    let (d, _) = topo.allocate(algorithm);
    println!("{algorithm} allocation, seed {seed}");
    println!(
        "{:>4} {:>9} {:>4} {:>2} {:>4} {:>11} {:>11} {:>11} {:>11}",
        "user", "dist_m", "K", "a", "rb", "power_w", "per", "delay_s", "energy_j"
    );
    for (i, u) in topo.users.iter().enumerate() {
        let rb = d.rb[i].map_or_else(|| "-".to_string(), |n| n.to_string());
        println!(
            "{:>4} {:>9.2} {:>4} {:>2} {:>4} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
            i, u.distance_m, u.sample_count, u8::from(d.selection[i]), rb, d.power_w[i], d.per[i], d.delay_s[i], d.energy_j[i]
        );
    }
    println!("objective Σ K_i(1 - a_i + a_i q_i) = {}", d.objective);
    Ok(())
}

fn bound(path: &Path, algorithm: Algorithm, runs: Option<usize>, out: &OutArg) -> Result<(), Failure> {
    let config = load_config(path)?;
    let dir = output_dir(&config, out)?;
    let runs = runs.unwrap_or(config.output.bound_runs);
    let report = bound_report(&config, algorithm, runs)?;
    let s = &report.series;
    println!("{algorithm}, seed {}, {runs} runs", report.seed);
    println!("L = {}, mu = {}", s.curvature.lipschitz_l, s.curvature.strong_convexity_mu);
    println!("zeta1 = {}, zeta2 = {}", s.fit.zeta1, s.fit.zeta2);
    println!("A = {}{}", s.factor, if s.degenerate { " (degenerate)" } else { "" });
    match s.asymptotic_gap {
        Some(g) => println!("asymptotic gap = {g}"),
        None => println!("asymptotic gap: none (A >= 1)"),
    }
    println!(
        "final empirical gap = {}, final bound = {}",
        report.empirical_gap.last().unwrap(),
        s.per_step_bound.last().unwrap()
    );
    println!("steps above the bound: {}", report.violations.len());
    let csv_path = dir.join("bound.csv");
    write_bound_csv(&report, &csv_path)?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn run_sweep(path: &Path, axis: SweepAxis, values: &[usize], out: &OutArg) -> Result<(), Failure> {
    let config = load_config(path)?;
    let dir = output_dir(&config, out)?;
    let table = sweep(&config, axis, values)?;
    println!(
        "{:>6} {:<11} {:>12} {:>12} {:>12} {:>12}",
        axis.name(),
        "algorithm",
        "loss_mean",
        "loss_std",
        "excess_mean",
        "iterations"
    );
    for row in &table.rows {
        let it = row.iterations.map_or_else(String::new, |s| format!("{:.1}", s.mean));
        println!(
            "{:>6} {:<11} {:>12.6} {:>12.6} {:>12.4e} {:>12}",
            row.value,
            row.algorithm.name(),
            row.final_loss.mean,
            row.final_loss.std,
            row.final_excess_loss.mean,
            it
        );
    }
    let csv_path = dir.join(format!("sweep_{}.csv", axis.name()));
    write_sweep_csv(&table, &csv_path)?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load_config(path)?;
    let checks = validate_config(&config)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Assign { config, algorithm, seed } => assign(config, (*algorithm).into(), *seed),
        Command::Bound { config, algorithm, runs, out } => bound(config, (*algorithm).into(), *runs, out),
        Command::Sweep { config, axis, values, out } => run_sweep(config, (*axis).into(), values, out),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (class, code) = f.class();
            match &f {
                Failure::Core(e) => eprintln!("error [{class}]: {e}"),
                Failure::ChecksFailed(n) => eprintln!("error [{class}]: {n} check(s) failed"),
            }
            ExitCode::from(code)
        }
    }
}

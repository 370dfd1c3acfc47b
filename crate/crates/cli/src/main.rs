//! `myopic`: config-driven runner that writes outage curves and related
//! results as CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use myopic_core::{
    build_matrix, diversity_order, equal_splits, estimate_slope, multi_branch_dmt, multi_branch_outage,
    optimize_splits, outage_floor, power_from_db, run_acceptance, run_sweep, sim, system_outage, AcceptanceOptions,
    Experiment, NetworkConfig, OptimizerOptions, OutageMethod, SimOptions, SplitsMode, SweepOptions,
};
use rayon::prelude::*;

const THREADS_ENV: &str = "MYOPIC_THREADS";

#[derive(Parser)]
#[command(name = "myopic", version, about = "Outage analysis and simulation of k-hop myopic relaying")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the slot count of the experiment file.
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    /// Overrides the split mode of the experiment file.
    #[arg(long, value_enum)]
    splits: Option<Splits>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic, small-argument and benchmark curves over the power grid.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also simulate every grid point.
        #[arg(long)]
        simulate: bool,
    },
    /// Simulated outage with 99% intervals over the power grid.
    Simulate(Common),
    /// Diversity order and the slope of the analytic curve.
    Dmt {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 25.0)]
        lo_db: f64,
        #[arg(long, default_value_t = 35.0)]
        hi_db: f64,
    },
    /// High-power outage floor of the configured N, k and q.
    Floor(Common),
    /// Outage and diversity of the parallel branches.
    Multibranch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30.0)]
        p_db: f64,
    },
    /// Optimized split weights at every grid power.
    Optimize(Common),
    /// Nonzero transition probabilities at one power.
    States {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        p_db: f64,
    },
    /// Runs the acceptance suite; one line per criterion.
    Acceptance {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        slots: Option<u64>,
        /// Replaces the bound of a criterion's principal check, `ID=VALUE`.
        #[arg(long = "tolerance", value_parser = parse_override)]
        overrides: Vec<(u32, f64)>,
        /// Runs only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum Method {
    Exact,
    Saa,
    GilPelaez,
}

impl From<Method> for OutageMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Exact => OutageMethod::Exact,
            Method::Saa => OutageMethod::Saa,
            Method::GilPelaez => OutageMethod::GilPelaez,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Splits {
    Equal,
    Optimized,
    File,
}

fn parse_override(s: &str) -> std::result::Result<(u32, f64), String> {
    let (id, value) = s.split_once('=').ok_or("expected ID=VALUE")?;
    let id = id.trim().parse().map_err(|_| format!("invalid criterion id {id:?}"))?;
    let value = value.trim().parse().map_err(|_| format!("invalid bound {value:?}"))?;
    Ok((id, value))
}

/// Failure with a usage exit status rather than a runtime one.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

struct Loaded {
    experiment: Experiment,
    splits: SplitsMode,
    seed: u64,
    slots: u64,
    method: OutageMethod,
}

impl Loaded {
    fn new(common: &Common) -> Result<Self> {
        let experiment =
            Experiment::from_path(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
        let splits = match common.splits {
            None => experiment.splits,
            Some(Splits::Equal) => SplitsMode::Equal,
            Some(Splits::Optimized) => SplitsMode::Optimized,
            Some(Splits::File) if experiment.splits == SplitsMode::File => SplitsMode::File,
            Some(Splits::File) => return Err(Usage("--splits file needs a split table in the config".into()).into()),
        };
        Ok(Self {
            seed: common.seed.unwrap_or(experiment.seed),
            slots: common.slots.unwrap_or(experiment.slots),
            method: common.method.into(),
            splits,
            experiment,
        })
    }

    fn grid(&self) -> Result<&[f64]> {
        if self.experiment.power_grid_db.is_empty() {
            return Err(Usage("the config has an empty power_grid_db".into()).into());
        }
        Ok(&self.experiment.power_grid_db)
    }

    fn sim_options(&self) -> SimOptions {
        SimOptions { slots: self.slots, seed: self.seed, ..SimOptions::default() }
    }

    fn optimizer(&self) -> OptimizerOptions {
        OptimizerOptions { method: self.method, ..OptimizerOptions::default() }
    }

    /// The network with the split weights used at `p_db`.
    fn network_at(&self, p_db: f64) -> Result<NetworkConfig> {
        let c = &self.experiment.network;
        Ok(match self.splits {
            SplitsMode::File => c.clone(),
            SplitsMode::Equal => c.with_splits(equal_splits(c))?,
            SplitsMode::Optimized => {
                c.with_splits(optimize_splits(c, power_from_db(p_db, c.sigma2()), &self.optimizer())?.splits)?
            }
        })
    }
}

fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn analyze(common: &Common, simulate: bool) -> Result<()> {
    let run = Loaded::new(common)?;
    let opts = SweepOptions {
        method: run.method,
        splits: run.splits,
        simulation: simulate.then(|| run.sim_options()),
        optimizer: run.optimizer(),
    };
    let curve = run_sweep(&run.experiment.network, run.grid()?, &opts)?;
    let mut out = output(&common.out)?;
    curve.write_csv(&mut out)?;
    Ok(out.flush()?)
}

fn simulate(common: &Common) -> Result<()> {
    let run = Loaded::new(common)?;
    let grid = sorted_grid(run.grid()?);
    let rows = grid
        .par_iter()
        .map(|&p_db| {
            let network = run.network_at(p_db)?;
            let r = sim::run(&network, power_from_db(p_db, network.sigma2()), &run.sim_options())
                .with_context(|| format!("at P = {p_db} dB"))?;
            Ok(format!("{p_db},{},{},{},{}", r.outage, r.ci_low(), r.ci_high(), r.slots))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = output(&common.out)?;
    writeln!(out, "P_dB,outage_sim,ci_low,ci_high,slots")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(out.flush()?)
}

fn dmt(common: &Common, lo_db: f64, hi_db: f64) -> Result<()> {
    let run = Loaded::new(common)?;
    // slope taken at the low end of the window when splits are optimized
    let network = run.network_at(lo_db)?;
    let grid = sorted_grid(&(0..=((hi_db - lo_db).max(0.0) as usize)).map(|i| lo_db + i as f64).collect::<Vec<_>>());
    let points = grid
        .par_iter()
        .map(|&p| Ok((p, system_outage(&network, power_from_db(p, network.sigma2()), run.method)?)))
        .collect::<Result<Vec<_>>>()?;
    let slope = estimate_slope(&points, lo_db, hi_db)?;
    let mut out = output(&common.out)?;
    writeln!(out, "n_relays,k_hops,dual_mode,diversity_order,slope,lo_db,hi_db")?;
    writeln!(
        out,
        "{},{},{},{},{slope},{lo_db},{hi_db}",
        network.n_relays(),
        network.k_hops(),
        relay_list(network.dual_mode()),
        diversity_order(&network)
    )?;
    Ok(out.flush()?)
}

fn relay_list(relays: &[usize]) -> String {
    if relays.is_empty() {
        "none".into()
    } else {
        relays.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
    }
}

fn floor(common: &Common) -> Result<()> {
    let run = Loaded::new(common)?;
    let c = &run.experiment.network;
    let value = outage_floor(c.n_relays(), c.k_hops(), c.q_silent())?;
    let mut out = output(&common.out)?;
    writeln!(out, "n_relays,k_hops,q,floor")?;
    writeln!(out, "{},{},{},{value}", c.n_relays(), c.k_hops(), c.q_silent())?;
    Ok(out.flush()?)
}

fn multibranch(common: &Common, p_db: f64) -> Result<()> {
    let run = Loaded::new(common)?;
    let branches = &run.experiment.branches;
    let outage = multi_branch_outage(branches, power_from_db(p_db, run.experiment.network.sigma2()), run.method)?;
    let diversity = multi_branch_dmt(branches).diversity;
    let mut out = output(&common.out)?;
    writeln!(out, "branches,diversity_order,P_dB,outage")?;
    writeln!(out, "{},{diversity},{p_db},{outage}", branches.len())?;
    Ok(out.flush()?)
}

fn optimize(common: &Common) -> Result<()> {
    let run = Loaded::new(common)?;
    let grid = sorted_grid(run.grid()?);
    let c = &run.experiment.network;
    let solutions = grid
        .par_iter()
        .map(|&p_db| {
            optimize_splits(c, power_from_db(p_db, c.sigma2()), &run.optimizer()).with_context(|| format!("at P = {p_db} dB"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = output(&common.out)?;
    writeln!(out, "P_dB,transmitter,receiver,weight,outage_optimized,outage_equal,converged")?;
    for (p_db, s) in grid.iter().zip(&solutions) {
        for (i, row) in s.splits.rows().iter().enumerate() {
            for (offset, w) in row.iter().enumerate() {
                writeln!(out, "{p_db},{i},{},{w},{},{},{}", i + offset + 1, s.outage, s.equal_outage, s.converged)?;
            }
        }
    }
    Ok(out.flush()?)
}

fn states(common: &Common, p_db: f64) -> Result<()> {
    let run = Loaded::new(common)?;
    let network = run.network_at(p_db)?;
    let matrix = build_matrix(&network, power_from_db(p_db, network.sigma2()), run.method)?;
    let mut out = output(&common.out)?;
    writeln!(out, "from_index,to_index,probability")?;
    for m in 1..=matrix.size() {
        for (l, p) in matrix.column(m) {
            writeln!(out, "{m},{l},{p}")?;
        }
    }
    Ok(out.flush()?)
}

fn acceptance(out: &Option<PathBuf>, seed: Option<u64>, slots: Option<u64>, overrides: &[(u32, f64)], only: &[u32]) -> Result<bool> {
    let defaults = AcceptanceOptions::default();
    let opts = AcceptanceOptions {
        seed: seed.unwrap_or(defaults.seed),
        slots: slots.unwrap_or(defaults.slots),
        overrides: overrides.iter().copied().collect(),
        only: only.to_vec(),
    };
    let report = run_acceptance(&opts);
    let mut w = output(out)?;
    write!(w, "{report}")?;
    w.flush()?;
    Ok(report.all_passed())
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize =
            value.parse().map_err(|_| Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
        if threads == 0 {
            bail!(Usage(format!("{THREADS_ENV} must be positive")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Analyze { common, simulate: sim } => analyze(common, *sim)?,
        Command::Simulate(common) => simulate(common)?,
        Command::Dmt { common, lo_db, hi_db } => dmt(common, *lo_db, *hi_db)?,
        Command::Floor(common) => floor(common)?,
        Command::Multibranch { common, p_db } => multibranch(common, *p_db)?,
        Command::Optimize(common) => optimize(common)?,
        Command::States { common, p_db } => states(common, *p_db)?,
        Command::Acceptance { out, seed, slots, overrides, only } => {
            return acceptance(out, *seed, *slots, overrides, only)
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

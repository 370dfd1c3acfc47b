//! Outage-versus-power curves.

use std::io::Write;

use rayon::prelude::*;

use crate::analysis::system_outage;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::experiment::SplitsMode;
use crate::link::{conventional_benchmark, OutageMethod};
use crate::optimize::{equal_splits, optimize_splits, OptimizerOptions};
use crate::sim::{self, SimOptions};
use crate::units::power_from_db;

#[derive(Debug, Clone, PartialEq)]
pub struct OutageRecord {
    pub p_db: f64,
    pub outage_analytic: f64,
    pub outage_saa: f64,
    pub outage_benchmark: f64,
    /// Simulated outage with its 99% interval, when simulated.
    pub simulated: Option<(f64, f64, f64)>,
    pub splits_mode: SplitsMode,
}

/// Records ordered by strictly increasing `p_db`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutageCurve {
    records: Vec<OutageRecord>,
}

impl OutageCurve {
    pub fn new(records: Vec<OutageRecord>) -> Result<Self> {
        if records.windows(2).any(|w| w[1].p_db.partial_cmp(&w[0].p_db) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidArgument("curve powers must be strictly increasing".into()));
        }
        for r in &records {
            let probs = [r.outage_analytic, r.outage_saa, r.outage_benchmark];
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument(format!("probability outside [0, 1] at {} dB", r.p_db)));
            }
            if let Some((p, lo, hi)) = r.simulated {
                if !(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0) {
                    return Err(Error::InvalidArgument(format!("inconsistent interval at {} dB", r.p_db)));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[OutageRecord] {
        &self.records
    }

    /// `(P_dB, analytic outage)` pairs.
    pub fn analytic_points(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.p_db, r.outage_analytic)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "P_dB,outage_analytic,outage_saa,outage_benchmark,outage_sim,ci_low,ci_high,splits_mode")?;
        for r in &self.records {
            let (sim, lo, hi) = match r.simulated {
                Some((p, lo, hi)) => (p.to_string(), lo.to_string(), hi.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.p_db,
                r.outage_analytic,
                r.outage_saa,
                r.outage_benchmark,
                sim,
                lo,
                hi,
                r.splits_mode.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Method of the analytic column and of the split optimization.
    pub method: OutageMethod,
    pub splits: SplitsMode,
    /// Simulate every point when set.
    pub simulation: Option<SimOptions>,
    pub optimizer: OptimizerOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { method: OutageMethod::Exact, splits: SplitsMode::Equal, simulation: None, optimizer: OptimizerOptions::default() }
    }
}

/// Analytic, small-argument, benchmark and optionally simulated outage at
/// every power of `grid_db`. Points are evaluated in parallel; the curve is
/// ordered by power.
pub fn run_sweep(config: &NetworkConfig, grid_db: &[f64], opts: &SweepOptions) -> Result<OutageCurve> {
    if grid_db.is_empty() {
        return Err(Error::InvalidArgument("empty power grid".into()));
    }
    let mut grid = grid_db.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let records = grid
        .par_iter()
        .map(|&p_db| sweep_point(config, p_db, opts).map_err(|e| Error::AtPower { p_db, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    OutageCurve::new(records)
}

fn sweep_point(config: &NetworkConfig, p_db: f64, opts: &SweepOptions) -> Result<OutageRecord> {
    let power = power_from_db(p_db, config.sigma2());
    let network = match opts.splits {
        SplitsMode::Equal => config.with_splits(equal_splits(config))?,
        SplitsMode::File => config.clone(),
        SplitsMode::Optimized => {
            let optimizer = OptimizerOptions { method: opts.method, ..opts.optimizer.clone() };
            config.with_splits(optimize_splits(config, power, &optimizer)?.splits)?
        }
    };
    let simulated = match &opts.simulation {
        Some(sim_opts) => {
            let r = sim::run(&network, power, sim_opts)?;
            Some((r.outage, r.ci_low(), r.ci_high()))
        }
        None => None,
    };
    Ok(OutageRecord {
        p_db,
        outage_analytic: system_outage(&network, power, opts.method)?,
        outage_saa: system_outage(&network, power, OutageMethod::Saa)?,
        outage_benchmark: conventional_benchmark(&network, power),
        simulated,
        splits_mode: opts.splits,
    })
}

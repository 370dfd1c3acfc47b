//! System-level results built on the chain: end-to-end outage, branch
//! combining, diversity and the high-SNR outage floor.

use std::collections::VecDeque;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::link::OutageMethod;
use crate::markov::{stationary_with, ChainModel, StationaryDistribution, StationaryOptions, TransitionMatrix};

/// Solved chain for one configuration and power.
#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub model: ChainModel,
    pub matrix: TransitionMatrix,
    pub stationary: StationaryDistribution,
    /// `sum_m pi_m P_o(N+1, m)`.
    pub outage: f64,
}

pub fn solve_system(
    config: &NetworkConfig,
    power: f64,
    method: OutageMethod,
    opts: &StationaryOptions,
) -> Result<SystemSolution> {
    let model = ChainModel::new(config, power, method)?;
    let matrix = model.build();
    let stationary = stationary_with(&matrix, opts)?;
    let destination = config.n_relays() + 1;
    let mut outage = 0.0;
    for (code, &p) in stationary.pi.iter().enumerate() {
        outage += p * model.node_outage(destination, code + 1)?;
    }
    Ok(SystemSolution { model, matrix, stationary, outage: outage.clamp(0.0, 1.0) })
}

/// Probability that the destination fails to decode in a slot, averaged over
/// the stationary law of the network state.
pub fn system_outage(config: &NetworkConfig, power: f64, method: OutageMethod) -> Result<f64> {
    Ok(solve_system(config, power, method, &StationaryOptions::default())?.outage)
}

/// Outage of `Z` orthogonal branches under selection combining: the product
/// of the per-branch outages.
pub fn multi_branch_outage(branches: &[NetworkConfig], power: f64, method: OutageMethod) -> Result<f64> {
    if branches.is_empty() {
        return Err(Error::InvalidArgument("at least one branch is required".into()));
    }
    branches.iter().try_fold(1.0, |acc, b| Ok(acc * system_outage(b, power, method)?))
}

/// Unit-capacity graph over the source, the always-active relays and the
/// destination, with an edge `i -> j` whenever `0 < j - i <= k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    /// Node labels in increasing order; `0` is the source, `N+1` the destination.
    pub nodes: Vec<usize>,
    /// Edges as positions into `nodes`.
    pub edges: Vec<(usize, usize)>,
}

impl FlowGraph {
    pub fn new(config: &NetworkConfig) -> Self {
        let n = config.n_relays();
        let k = config.k_hops();
        let nodes: Vec<usize> = (0..=n + 1).filter(|&v| v == 0 || v == n + 1 || !config.is_dual(v)).collect();
        let mut edges = Vec::new();
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate().skip(a + 1) {
                if v - u <= k {
                    edges.push((a, b));
                }
            }
        }
        Self { nodes, edges }
    }

    /// Number of edge-disjoint source-destination paths (Edmonds-Karp).
    pub fn max_flow(&self) -> usize {
        let size = self.nodes.len();
        let sink = size - 1;
        // residual[u][v] with both directions per edge
        let mut residual = vec![vec![0i32; size]; size];
        for &(u, v) in &self.edges {
            residual[u][v] += 1;
        }
        let mut flow = 0;
        loop {
            let mut parent = vec![usize::MAX; size];
            parent[0] = 0;
            let mut queue = VecDeque::from([0]);
            while let Some(u) = queue.pop_front() {
                for v in 0..size {
                    if parent[v] == usize::MAX && residual[u][v] > 0 {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return flow;
            }
            let mut v = sink;
            while v != 0 {
                let u = parent[v];
                residual[u][v] -= 1;
                residual[v][u] += 1;
                v = u;
            }
            flow += 1;
        }
    }
}

/// Maximum diversity order: edge-disjoint paths through always-active relays.
/// Zero means the outage saturates at a floor.
pub fn diversity_order(config: &NetworkConfig) -> usize {
    FlowGraph::new(config).max_flow()
}

/// Diversity-multiplexing trade-off `delta(rho) = (1 - rho) delta(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmtCurve {
    /// `delta(0)`.
    pub diversity: usize,
}

impl DmtCurve {
    /// `delta(rho)` for a multiplexing gain `rho` in `[0, 1]`.
    pub fn at(&self, rho: f64) -> f64 {
        assert!((0.0..=1.0).contains(&rho), "multiplexing gain {rho} outside [0, 1]");
        (1.0 - rho) * self.diversity as f64
    }
}

pub fn dmt(config: &NetworkConfig) -> DmtCurve {
    DmtCurve { diversity: diversity_order(config) }
}

/// Branch diversities add under selection combining.
pub fn multi_branch_dmt(branches: &[NetworkConfig]) -> DmtCurve {
    DmtCurve { diversity: branches.iter().map(diversity_order).sum() }
}

/// Limit of the outage as `P -> inf` when every relay is dual-mode:
/// `e(k, k) = q^k` and `e(N, k) = q^k e(N-2, k-1) + (1 - q^k) e(N-1, k)` for
/// `k < N <= 2k`, with `e(0, 0) = 1`.
pub fn outage_floor(n: usize, k: usize, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("silent probability {q} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::FloorUnsupported { n, k, reason: "k must be positive" });
    }
    if k == n + 1 {
        return Err(Error::FloorUnsupported { n, k, reason: "the direct link keeps diversity one" });
    }
    if k > n {
        return Err(Error::FloorUnsupported { n, k, reason: "k exceeds N + 1" });
    }
    if n > 2 * k {
        return Err(Error::FloorUnsupported { n, k, reason: "no closed form for N > 2k" });
    }
    Ok(floor_recursion(n, k, q))
}

fn floor_recursion(n: usize, k: usize, q: f64) -> f64 {
    if n == 0 && k == 0 {
        return 1.0;
    }
    let qk = q.powi(k as i32);
    if n == k {
        return qk;
    }
    qk * floor_recursion(n - 2, k - 1, q) + (1.0 - qk) * floor_recursion(n - 1, k, q)
}

/// Placement rule for a target diversity `epsilon`: the dual-mode count lies
/// in `[k - eps, ceil(N/k) (k - eps)]` and every `k` consecutive relays hold
/// at most `k - eps` dual-mode relays.
pub fn deployment_check(config: &NetworkConfig, epsilon: usize) -> Result<bool> {
    let n = config.n_relays();
    let k = config.k_hops();
    if epsilon == 0 || epsilon >= k {
        return Err(Error::InvalidArgument(format!("target diversity {epsilon} outside [1, {}]", k.saturating_sub(1))));
    }
    let allowed = k - epsilon;
    let nu = config.nu();
    let in_range = allowed <= nu && nu <= n.div_ceil(k) * allowed;
    let window = k.min(n);
    let windows_ok = (1..=n + 1 - window)
        .all(|start| (start..start + window).filter(|&r| config.is_dual(r)).count() <= allowed);
    let ok = in_range && windows_ok;
    debug_assert!(!ok || diversity_order(config) >= epsilon, "placement rule accepted a low-diversity layout");
    Ok(ok)
}

/// Empirical diversity order: minus the least-squares slope of
/// `log10(outage)` against `log10(P)` over the points with `P_dB` in
/// `[lo_db, hi_db]`.
pub fn estimate_slope(points: &[(f64, f64)], lo_db: f64, hi_db: f64) -> Result<f64> {
    let window: Vec<(f64, f64)> = points.iter().copied().filter(|&(p, _)| p >= lo_db && p <= hi_db).collect();
    if window.len() < 3 {
        return Err(Error::InsufficientPoints(window.len()));
    }
    if let Some(&(p_db, _)) = window.iter().find(|&&(_, o)| o <= 0.0) {
        return Err(Error::ZeroOutage { p_db });
    }
    let xs: Vec<f64> = window.iter().map(|&(p, _)| p / 10.0).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, o)| o.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

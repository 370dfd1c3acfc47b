//! Transition matrix of the network-state chain and its stationary law.
//!
//! `A` is column stochastic: column `m` holds the probabilities of moving
//! from state `m` to every state `l`. From each state only the newly decoded
//! cells `beta_j[1]` and the dual-mode bits are free, so a column has at most
//! `2^(N + nu)` nonzeros and is built by enumerating those successors.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::link::{LinkPattern, OutageCache, OutageMethod};
use crate::state::StateSpace;

/// Per-receiver outage for every incoming-link bitmask at one power.
#[derive(Debug, Clone)]
pub struct OutageTable {
    // values[j][mask], j = 1..=N+1 (index 0 unused)
    values: Vec<Vec<f64>>,
}

impl OutageTable {
    pub fn build(config: &NetworkConfig, power: f64, method: OutageMethod) -> Result<Self> {
        Self::build_with(config, power, method, None)
    }

    /// Like [`OutageTable::build`], reading and filling a shared cache.
    pub fn build_cached(config: &NetworkConfig, power: f64, method: OutageMethod, cache: &OutageCache) -> Result<Self> {
        Self::build_with(config, power, method, Some(cache))
    }

    fn build_with(
        config: &NetworkConfig,
        power: f64,
        method: OutageMethod,
        cache: Option<&OutageCache>,
    ) -> Result<Self> {
        let receivers = config.n_relays() + 1;
        let jobs: Vec<(usize, u32)> = (1..=receivers)
            .flat_map(|j| {
                let width = j.min(config.k_hops()) as u32;
                (0..1u32 << width).map(move |mask| (j, mask))
            })
            .collect();
        let evaluate = |&(j, mask): &(usize, u32)| -> Result<f64> {
            if mask == 0 {
                return Ok(1.0);
            }
            let pattern = LinkPattern::from_mask(config, j, mask, power);
            match cache {
                Some(c) => c.lookup(j, mask, power, method, || pattern.outage(method)),
                None => pattern.outage(method),
            }
        };
        let flat: Vec<f64> = jobs.par_iter().map(evaluate).collect::<Result<_>>()?;
        let mut values = vec![Vec::new(); receivers + 1];
        let mut it = flat.into_iter();
        for (j, row) in values.iter_mut().enumerate().skip(1) {
            let width = j.min(config.k_hops());
            row.extend(it.by_ref().take(1 << width));
        }
        Ok(Self { values })
    }

    /// `P_o(j, .)` for the incoming-link bitmask `mask`.
    pub fn get(&self, j: usize, mask: u32) -> f64 {
        self.values[j][mask as usize]
    }

    /// `P_o(j, m)` on a 0-based state code.
    pub(crate) fn at_code(&self, space: &StateSpace, j: usize, code: usize) -> f64 {
        self.get(j, space.incoming_mask(j, code))
    }

    /// True when some receiver with at least one transmitter is certain to
    /// decode or certain to fail.
    pub fn has_boundary_values(&self) -> bool {
        self.values.iter().flat_map(|row| row.iter().skip(1)).any(|&p| p == 0.0 || p == 1.0)
    }
}

/// Whether state `l` can follow state `m` (1-based indices): every buffer of
/// `l` must be the one-position right shift of the same buffer in `m`.
pub fn transition_exists(space: &StateSpace, m: usize, l: usize) -> Result<bool> {
    let from = space.code_of(m)?;
    let to = space.code_of(l)?;
    Ok(shift_compatible(space, from, to))
}

fn shift_compatible(space: &StateSpace, from: usize, to: usize) -> bool {
    (1..=space.n_relays()).all(|i| (1..space.buffer_len(i)).all(|n| space.beta(from, i, n) == space.beta(to, i, n + 1)))
}

// Shifted buffers of `code` with all free bits cleared.
fn shifted_base(space: &StateSpace, code: usize) -> usize {
    let mut base = 0;
    for i in 1..=space.n_relays() {
        let first = space.buffer_bit(i);
        for n in 1..space.buffer_len(i) {
            if space.beta(code, i, n) {
                base |= space.mask_of(first + n as u32);
            }
        }
    }
    base
}

/// Chain of one configuration at one transmit power.
#[derive(Debug, Clone)]
pub struct ChainModel {
    space: StateSpace,
    table: OutageTable,
    q: f64,
    power: f64,
    fingerprint: u64,
    nu: usize,
}

impl ChainModel {
    pub fn new(config: &NetworkConfig, power: f64, method: OutageMethod) -> Result<Self> {
        let space = StateSpace::new(config)?;
        let table = OutageTable::build(config, power, method)?;
        Ok(Self::from_parts(config, space, table, power))
    }

    pub fn from_parts(config: &NetworkConfig, space: StateSpace, table: OutageTable, power: f64) -> Self {
        Self { space, table, q: config.q_silent(), power, fingerprint: config.fingerprint(), nu: config.nu() }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn table(&self) -> &OutageTable {
        &self.table
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `P_o(j, m)` for a 1-based state index.
    pub fn node_outage(&self, j: usize, m: usize) -> Result<f64> {
        Ok(self.table.at_code(&self.space, j, self.space.code_of(m)?))
    }

    /// Whether the chain may lose irreducibility: some outage is exactly 0 or
    /// 1 for a receiver with transmitters, or dual-mode relays are never or
    /// always silent.
    pub fn is_boundary(&self) -> bool {
        self.table.has_boundary_values() || (self.nu > 0 && (self.q == 0.0 || self.q == 1.0))
    }

    /// `p_{l,m}`; zero when the transition does not exist.
    pub fn probability(&self, m: usize, l: usize) -> Result<f64> {
        let from = self.space.code_of(m)?;
        let to = self.space.code_of(l)?;
        Ok(self.probability_code(from, to))
    }

    fn probability_code(&self, from: usize, to: usize) -> f64 {
        if !shift_compatible(&self.space, from, to) {
            return 0.0;
        }
        let mut p = 1.0;
        for &relay in self.space.dual_mode() {
            p *= if self.space.is_active(to, relay) { 1.0 - self.q } else { self.q };
        }
        for j in 1..=self.space.n_relays() {
            let po = self.table.at_code(&self.space, j, from);
            p *= if self.space.beta(to, j, 1) { 1.0 - po } else { po };
        }
        p
    }

    // Free bits of a successor with their (bit clear, bit set) probabilities,
    // in the multiplication order of `probability_code`.
    fn free_bits(&self, from: usize) -> Vec<(usize, f64, f64)> {
        let mut free = Vec::with_capacity(self.nu + self.space.n_relays());
        for &relay in self.space.dual_mode() {
            let bit = self.space.mask_of(self.space.mode_bit(relay).expect("dual-mode relay has a mode bit"));
            free.push((bit, self.q, 1.0 - self.q));
        }
        for j in 1..=self.space.n_relays() {
            let po = self.table.at_code(&self.space, j, from);
            free.push((self.space.mask_of(self.space.buffer_bit(j)), po, 1.0 - po));
        }
        free
    }

    fn column(&self, from: usize) -> Vec<(u32, f64)> {
        let mut entries = vec![(shifted_base(&self.space, from), 1.0)];
        for (bit, p0, p1) in self.free_bits(from) {
            let mut next = Vec::with_capacity(entries.len() * 2);
            for &(row, p) in &entries {
                next.push((row, p * p0));
                next.push((row | bit, p * p1));
            }
            entries = next;
        }
        let mut col: Vec<(u32, f64)> =
            entries.into_iter().filter(|&(_, p)| p > 0.0).map(|(row, p)| (row as u32, p)).collect();
        col.sort_unstable_by_key(|&(row, _)| row);
        col
    }

    /// Builds `A` by enumerating the successors of every state.
    pub fn build(&self) -> TransitionMatrix {
        let columns: Vec<Vec<(u32, f64)>> = (0..self.space.size()).into_par_iter().map(|m| self.column(m)).collect();
        self.assemble(columns)
    }

    /// Builds `A` by testing every ordered pair of states, `M^2` work. Kept as
    /// a reference for [`ChainModel::build`].
    pub fn build_exhaustive(&self) -> TransitionMatrix {
        let size = self.space.size();
        let columns = (0..size)
            .into_par_iter()
            .map(|m| {
                (0..size)
                    .filter(|&l| shift_compatible(&self.space, m, l))
                    .map(|l| (l as u32, self.probability_code(m, l)))
                    .filter(|&(_, p)| p > 0.0)
                    .collect()
            })
            .collect();
        self.assemble(columns)
    }

    fn assemble(&self, columns: Vec<Vec<(u32, f64)>>) -> TransitionMatrix {
        let mut offsets = Vec::with_capacity(columns.len() + 1);
        offsets.push(0);
        let mut rows = Vec::new();
        let mut probs = Vec::new();
        for col in columns {
            for (r, p) in col {
                rows.push(r);
                probs.push(p);
            }
            offsets.push(rows.len());
        }
        TransitionMatrix {
            size: self.space.size(),
            offsets,
            rows,
            probs,
            fingerprint: self.fingerprint,
            power: self.power,
            boundary: self.is_boundary(),
        }
    }
}

/// `p_{l,m}` for one pair of 1-based state indices.
pub fn transition_probability(
    config: &NetworkConfig,
    power: f64,
    method: OutageMethod,
    m: usize,
    l: usize,
) -> Result<f64> {
    ChainModel::new(config, power, method)?.probability(m, l)
}

/// Transition matrix of `config` at linear power `power`.
pub fn build_matrix(config: &NetworkConfig, power: f64, method: OutageMethod) -> Result<TransitionMatrix> {
    Ok(ChainModel::new(config, power, method)?.build())
}

/// Column-compressed transition matrix; only positive entries are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    offsets: Vec<usize>,
    rows: Vec<u32>,
    probs: Vec<f64>,
    fingerprint: u64,
    power: f64,
    boundary: bool,
}

impl TransitionMatrix {
    /// Matrix from dense columns, `columns[m][l] = p_{l,m}`.
    pub fn from_dense_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let size = columns.len();
        let mut offsets = vec![0];
        let mut rows = Vec::new();
        let mut probs = Vec::new();
        for col in columns {
            if col.len() != size {
                return Err(Error::InvalidArgument("transition matrix must be square".into()));
            }
            for (l, &p) in col.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!("entry {p} outside [0, 1]")));
                }
                if p > 0.0 {
                    rows.push(l as u32);
                    probs.push(p);
                }
            }
            offsets.push(rows.len());
        }
        Ok(Self { size, offsets, rows, probs, fingerprint: 0, power: f64::NAN, boundary: false })
    }

    /// Dimension `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// See [`ChainModel::is_boundary`].
    pub fn is_boundary(&self) -> bool {
        self.boundary
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    /// Positive entries of column `m` (1-based) as `(l, p_{l,m})`, `l` 1-based
    /// and increasing.
    pub fn column(&self, m: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[m - 1]..self.offsets[m];
        self.rows[range.clone()].iter().zip(&self.probs[range]).map(|(&r, &p)| (r as usize + 1, p))
    }

    /// `p_{l,m}` with 1-based indices.
    pub fn get(&self, l: usize, m: usize) -> f64 {
        let range = self.offsets[m - 1]..self.offsets[m];
        let rows = &self.rows[range.clone()];
        match rows.binary_search(&((l - 1) as u32)) {
            Ok(pos) => self.probs[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Largest deviation of a column sum from one.
    pub fn column_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|m| (self.probs[self.offsets[m]..self.offsets[m + 1]].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_column_nnz(&self) -> usize {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for (m, &xm) in x.iter().enumerate() {
            if xm == 0.0 {
                continue;
            }
            for k in self.offsets[m]..self.offsets[m + 1] {
                y[self.rows[k] as usize] += self.probs[k] * xm;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.size, self.size);
        for m in 0..self.size {
            for k in self.offsets[m]..self.offsets[m + 1] {
                a[(self.rows[k] as usize, m)] = self.probs[k];
            }
        }
        a
    }

    fn reachable(&self, forward: bool) -> Vec<bool> {
        let mut adjacency = vec![Vec::new(); self.size];
        for m in 0..self.size {
            for &r in &self.rows[self.offsets[m]..self.offsets[m + 1]] {
                let (from, to) = if forward { (m, r as usize) } else { (r as usize, m) };
                adjacency[from].push(to);
            }
        }
        let mut seen = vec![false; self.size];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Strong connectivity of the positive pattern.
    pub fn is_irreducible(&self) -> bool {
        self.size > 0 && self.reachable(true).into_iter().all(|s| s) && self.reachable(false).into_iter().all(|s| s)
    }

    /// Irreducible with a self-loop at state 1, hence aperiodic.
    pub fn is_ergodic(&self) -> bool {
        self.size > 0 && self.get(1, 1) > 0.0 && self.is_irreducible()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Dense LU of `(A - I + B) pi = b`.
    Direct,
    /// Lazy power iteration `x <- (x + A x) / 2`.
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct StationaryOptions {
    /// Largest `M` solved directly.
    pub dense_limit: usize,
    /// Stop when `||A x - x||_inf` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Forces a solver regardless of size and boundary checks.
    pub solver: Option<Solver>,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { dense_limit: 4096, tolerance: 1e-12, max_iterations: 200_000, solver: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    /// `pi[m - 1]` is the long-run probability of state `m`.
    pub pi: Vec<f64>,
    /// `||A pi - pi||_inf`.
    pub residual: f64,
    pub solver: Solver,
}

impl StationaryDistribution {
    /// 1-based indices of the states carrying mass above `1e-10`; the
    /// iterative solver leaves transient states with residual mass of the
    /// order of its tolerance.
    pub fn support(&self) -> Vec<usize> {
        self.pi.iter().enumerate().filter(|(_, &p)| p > 1e-10).map(|(i, _)| i + 1).collect()
    }
}

pub fn stationary(matrix: &TransitionMatrix) -> Result<StationaryDistribution> {
    stationary_with(matrix, &StationaryOptions::default())
}

pub fn stationary_with(matrix: &TransitionMatrix, opts: &StationaryOptions) -> Result<StationaryDistribution> {
    let solver = opts.solver.unwrap_or(if matrix.size() <= opts.dense_limit && !matrix.is_boundary() {
        Solver::Direct
    } else {
        Solver::Iterative
    });
    let mut pi = match solver {
        Solver::Direct => direct(matrix)?,
        Solver::Iterative => iterate(matrix, opts)?,
    };
    for p in pi.iter_mut() {
        if *p < 0.0 {
            if *p < -1e-12 {
                return Err(Error::SingularSystem);
            }
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let residual = residual(matrix, &pi);
    Ok(StationaryDistribution { pi, residual, solver })
}

fn residual(matrix: &TransitionMatrix, pi: &[f64]) -> f64 {
    matrix.apply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

// (A - I + B) pi = b with B all ones and b = 1: stacks A pi = pi and sum = 1.
fn direct(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let size = matrix.size();
    let mut system = matrix.to_dense();
    for i in 0..size {
        system[(i, i)] -= 1.0;
    }
    system.add_scalar_mut(1.0);
    let lu = system.lu();
    let pi = lu.solve(&DVector::from_element(size, 1.0)).ok_or(Error::SingularSystem)?;
    if pi.iter().any(|p| !p.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(pi.iter().copied().collect())
}

fn iterate(matrix: &TransitionMatrix, opts: &StationaryOptions) -> Result<Vec<f64>> {
    let size = matrix.size();
    let mut x = vec![1.0 / size as f64; size];
    let mut res = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let ax = matrix.apply(&x);
        res = ax.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if res <= opts.tolerance {
            return Ok(x);
        }
        for (xi, ai) in x.iter_mut().zip(&ax) {
            *xi = 0.5 * (*xi + ai);
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual: res })
}

/// Standard errors of empirical state-occupancy frequencies over `slots`
/// consecutive steps of a stationary chain:
/// `var = pi_m (2 Z_mm - 1 - pi_m) / slots` with the fundamental matrix
/// `Z = (I - A + pi 1^T)^(-1)`. Dense; intended for small chains.
pub fn occupancy_standard_errors(matrix: &TransitionMatrix, pi: &[f64], slots: u64) -> Result<Vec<f64>> {
    let size = matrix.size();
    let mut z = -matrix.to_dense();
    for i in 0..size {
        z[(i, i)] += 1.0;
    }
    for (r, &p) in pi.iter().enumerate() {
        for c in 0..size {
            z[(r, c)] += p;
        }
    }
    let z = z.try_inverse().ok_or(Error::SingularSystem)?;
    Ok(pi
        .iter()
        .enumerate()
        .map(|(m, &p)| (p * (2.0 * z[(m, m)] - 1.0 - p)).max(0.0).sqrt() / (slots as f64).sqrt())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::outage_single_link;
    use proptest::prelude::*;

    fn config(n: usize, k: usize, h: &[usize]) -> NetworkConfig {
        NetworkConfig::builder(n, k).dual_mode(h.iter().copied()).build().unwrap()
    }

    #[test]
    fn existence_follows_shift() {
        let s = StateSpace::new(&config(2, 2, &[])).unwrap();
        assert!(transition_exists(&s, 1, 1).unwrap());
        assert!(!transition_exists(&s, 1, 3).unwrap());
        // beta_1 = (1, 0) forces beta_1[2] = 1 in the successor
        let m = s.encode(&crate::state::NetworkState { index: 0, relay_bits: vec![], buffer_bits: vec![vec![true, false], vec![false]] }).unwrap();
        for l in 1..=8 {
            let next = s.decode(l).unwrap();
            assert_eq!(transition_exists(&s, m, l).unwrap(), next.buffer_bits[0][1]);
        }
        assert!(transition_exists(&s, 9, 1).is_err());
    }

    #[test]
    fn worked_example_zero_pattern() {
        let c = config(2, 2, &[]);
        let a = build_matrix(&c, 10.0, OutageMethod::Exact).unwrap();
        for l in 1..=8 {
            for m in 1..=8 {
                // rows 1,2,5,6 come from columns 1-4, rows 3,4,7,8 from 5-8
                let expected = matches!(l, 1 | 2 | 5 | 6) == (m <= 4);
                assert_eq!(a.get(l, m) > 0.0, expected, "p_{l},{m}");
            }
        }
    }

    #[test]
    fn worked_example_entry() {
        let c = config(2, 2, &[]);
        let p = 10.0;
        let tau = c.tau(p);
        // state 1: R1 hears S at d=1, R2 hears S at d=2, both with a = 1/2
        let expected = outage_single_link(0.5, tau) * outage_single_link(0.125, tau);
        let got = transition_probability(&c, p, OutageMethod::Exact, 1, 1).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert_eq!(transition_probability(&c, p, OutageMethod::Exact, 1, 3).unwrap(), 0.0);
    }

    #[test]
    fn silent_probability_zero_starves_silent_states() {
        let c = config(2, 2, &[1]).with_q(0.0).unwrap();
        let model = ChainModel::new(&c, 10.0, OutageMethod::Exact).unwrap();
        let a = model.build();
        for m in 1..=a.size() {
            for (l, _) in a.column(m) {
                assert!(model.space().decode(l).unwrap().relay_bits[0]);
            }
        }
        assert!(model.is_boundary());
    }

    #[test]
    fn two_state_symmetric_chain() {
        let a = TransitionMatrix::from_dense_columns(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        for solver in [Solver::Direct, Solver::Iterative] {
            let opts = StationaryOptions { solver: Some(solver), ..Default::default() };
            let pi = stationary_with(&a, &opts).unwrap();
            assert!((pi.pi[0] - 0.5).abs() < 1e-15 && (pi.pi[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn periodic_chain_converges_under_lazy_iteration() {
        let a = TransitionMatrix::from_dense_columns(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let opts = StationaryOptions { solver: Some(Solver::Iterative), ..Default::default() };
        let pi = stationary_with(&a, &opts).unwrap();
        assert_eq!(pi.pi, vec![0.5, 0.5]);
    }

    #[test]
    fn reducible_chain_is_singular_for_direct_solve() {
        let a = TransitionMatrix::from_dense_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!a.is_irreducible());
        let opts = StationaryOptions { solver: Some(Solver::Direct), ..Default::default() };
        assert!(matches!(stationary_with(&a, &opts), Err(Error::SingularSystem)));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let a = TransitionMatrix::from_dense_columns(&[vec![0.999, 0.001], vec![0.0, 1.0]]).unwrap();
        let opts = StationaryOptions { solver: Some(Solver::Iterative), max_iterations: 3, ..Default::default() };
        assert!(matches!(stationary_with(&a, &opts), Err(Error::NoConvergence { iterations: 3, .. })));
    }

    #[test]
    fn high_power_concentrates_on_full_state() {
        let c = config(2, 2, &[]);
        let a = build_matrix(&c, 1e8, OutageMethod::Exact).unwrap();
        let pi = stationary(&a).unwrap();
        assert!(pi.pi[7] > 1.0 - 1e-6, "pi_M = {}", pi.pi[7]);
    }

    #[test]
    fn boundary_chain_uses_iteration_and_reports_support() {
        let c = config(2, 2, &[1, 2]).with_q(1.0).unwrap();
        let a = build_matrix(&c, 100.0, OutageMethod::Exact).unwrap();
        assert!(a.is_boundary());
        let pi = stationary(&a).unwrap();
        assert_eq!(pi.solver, Solver::Iterative);
        assert!(pi.residual <= 1e-12);
        // both relays always silent: nothing ever reaches the destination
        for m in pi.support() {
            let s = crate::state::StateSpace::new(&c).unwrap().decode(m).unwrap();
            assert_eq!(s.relay_bits, vec![false, false]);
        }
    }

    #[test]
    fn occupancy_errors_of_iid_chain_are_binomial() {
        // columns identical: the chain draws i.i.d. states
        let col = vec![0.2, 0.3, 0.5];
        let a = TransitionMatrix::from_dense_columns(&[col.clone(), col.clone(), col.clone()]).unwrap();
        let pi = stationary(&a).unwrap().pi;
        let se = occupancy_standard_errors(&a, &pi, 100).unwrap();
        for (s, p) in se.iter().zip(&col) {
            assert!((s - (p * (1.0 - p) / 100.0).sqrt()).abs() < 1e-12);
        }
    }

    const SMALL: &[(usize, usize, &[usize])] = &[
        (1, 1, &[]),
        (1, 2, &[1]),
        (2, 1, &[]),
        (2, 2, &[]),
        (2, 2, &[1]),
        (2, 2, &[1, 2]),
        (2, 3, &[2]),
        (3, 2, &[]),
        (3, 2, &[1, 3]),
        (3, 3, &[2]),
        (4, 2, &[2, 3]),
    ];

    #[test]
    fn successor_build_matches_exhaustive_reference() {
        for &(n, k, h) in SMALL {
            let model = ChainModel::new(&config(n, k, h), 20.0, OutageMethod::Exact).unwrap();
            assert_eq!(model.build(), model.build_exhaustive(), "N={n} k={k} H={h:?}");
        }
    }

    #[test]
    fn build_is_independent_of_worker_count() {
        let model = ChainModel::new(&config(3, 2, &[1]), 5.0, OutageMethod::Exact).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| model.build());
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| model.build());
        assert_eq!(one, many);
    }

    #[test]
    fn cached_table_matches_direct_table() {
        let c = config(3, 2, &[2]);
        let cache = OutageCache::new();
        let a = OutageTable::build(&c, 3.0, OutageMethod::Exact).unwrap();
        let b = OutageTable::build_cached(&c, 3.0, OutageMethod::Exact, &cache).unwrap();
        let again = OutageTable::build_cached(&c, 3.0, OutageMethod::Exact, &cache).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values, again.values);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn built_matrices_are_ergodic_and_stochastic(
            n in 1usize..=3,
            k_off in 0usize..3,
            h_bits in 0u32..8,
            q in 0.01f64..0.99,
            p_db in -5.0f64..35.0,
        ) {
            let k = 1 + k_off.min(n);
            let h: Vec<usize> = (1..=n).filter(|i| h_bits & (1 << (i - 1)) != 0).collect();
            let c = NetworkConfig::builder(n, k).dual_mode(h.clone()).q_silent(q).build().unwrap();
            let power = crate::units::power_from_db(p_db, c.sigma2());
            let a = build_matrix(&c, power, OutageMethod::Exact).unwrap();
            prop_assert!(a.column_sum_error() <= 1e-12);
            prop_assert!(a.max_column_nnz() <= 1 << (n + h.len()));
            prop_assert!(a.probs.iter().all(|&p| p > 0.0 && p <= 1.0));
            if !a.is_boundary() {
                prop_assert!(a.is_ergodic());
                let direct = stationary(&a).unwrap();
                prop_assert_eq!(direct.solver, Solver::Direct);
                prop_assert!(direct.residual <= 1e-10);
                prop_assert!((direct.pi.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                let opts = StationaryOptions { solver: Some(Solver::Iterative), ..Default::default() };
                let iterative = stationary_with(&a, &opts).unwrap();
                let gap = direct.pi.iter().zip(&iterative.pi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                prop_assert!(gap <= 1e-9, "gap {}", gap);
            }
        }
    }
}

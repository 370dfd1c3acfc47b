//! Slot-by-slot Monte Carlo of the relaying protocol.
//!
//! Each slot runs transmission, buffer shift and decoding in that order. The
//! mode of each dual-mode relay is drawn at the end of a slot for the next
//! one, so the pair (modes, buffers) held between slots is exactly the chain
//! state that governs the coming slot.
//!
//! Every slot draws a fading amplitude for every potential link, whether or
//! not it carries a signal, so the random stream does not depend on the
//! transmit power. Runs that differ only in power share their randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::state::{NetworkState, StateSpace};

/// Smallest slot count accepted by [`run`].
pub const MIN_SLOTS: u64 = 10_000;

/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PhaseOrder {
    ShiftThenDecode,
    // Deliberately wrong; used to check that the order matters.
    #[cfg_attr(not(test), allow(dead_code))]
    DecodeThenShift,
}

/// Protocol state of one replica.
#[derive(Debug, Clone)]
pub struct SimState {
    // buffers[i - 1][n - 1] = b_i[n]
    buffers: Vec<Vec<bool>>,
    // active[i - 1]; always true for single-mode relays
    active: Vec<bool>,
    dual: Vec<usize>,
    q: f64,
    k: usize,
    // gains[j - 1][i - lo] = sqrt(a_{i,j} / d_{i,j}^eta)
    gains: Vec<Vec<f64>>,
    fingerprint: u64,
    slot: u64,
    rng: ChaCha8Rng,
    amplitude: Vec<f64>,
    outages: u64,
    tallied: u64,
}

impl SimState {
    /// Empty buffers; modes drawn from the stream `(seed, stream)`.
    pub fn new(config: &NetworkConfig, seed: u64, stream: u64) -> Self {
        let n = config.n_relays();
        let k = config.k_hops();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let gains = (1..=n + 1)
            .map(|j| (j.saturating_sub(k)..j).map(|i| config.link_weight(i, j).sqrt()).collect())
            .collect();
        let mut state = Self {
            buffers: (1..=n).map(|i| vec![false; config.buffer_len(i)]).collect(),
            active: vec![true; n],
            dual: config.dual_mode().to_vec(),
            q: config.q_silent(),
            k,
            gains,
            fingerprint: config.fingerprint(),
            slot: 0,
            rng,
            amplitude: vec![0.0; n + 1],
            outages: 0,
            tallied: 0,
        };
        state.draw_modes();
        state
    }

    /// Starts from a given chain state.
    pub fn from_state(config: &NetworkConfig, start: &NetworkState, seed: u64, stream: u64) -> Result<Self> {
        let mut state = Self::new(config, seed, stream);
        if start.relay_bits.len() != state.dual.len() || start.buffer_bits.len() != state.buffers.len() {
            return Err(Error::InvalidArgument("start state does not match the configuration".into()));
        }
        for (buf, bits) in state.buffers.iter_mut().zip(&start.buffer_bits) {
            if buf.len() != bits.len() {
                return Err(Error::InvalidArgument("start state buffer length mismatch".into()));
            }
            buf.copy_from_slice(bits);
        }
        for (&relay, &bit) in state.dual.iter().zip(&start.relay_bits) {
            state.active[relay - 1] = bit;
        }
        Ok(state)
    }

    /// `b_i` for relay `i`.
    pub fn buffer(&self, relay: usize) -> &[bool] {
        &self.buffers[relay - 1]
    }

    /// Whether relay `i` transmits in the coming slot.
    pub fn is_active(&self, relay: usize) -> bool {
        self.active[relay - 1]
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Destination outages among tallied slots.
    pub fn outages(&self) -> u64 {
        self.outages
    }

    /// Messages decoded by the destination among tallied slots.
    pub fn decoded(&self) -> u64 {
        self.tallied - self.outages
    }

    pub fn tallied(&self) -> u64 {
        self.tallied
    }

    /// Current (modes, buffers) as a chain state.
    pub fn snapshot(&self, space: &StateSpace) -> NetworkState {
        let relay_bits = self.dual.iter().map(|&r| self.active[r - 1]).collect();
        let mut state = NetworkState { index: 0, relay_bits, buffer_bits: self.buffers.clone() };
        state.index = space.encode(&state).expect("simulator state matches its configuration");
        state
    }

    /// 0-based chain code of the current state, without allocating.
    pub(crate) fn code(&self, space: &StateSpace) -> usize {
        let mut code = 0;
        for &relay in &self.dual {
            if self.active[relay - 1] {
                code |= space.mask_of(space.mode_bit(relay).expect("dual-mode relay has a mode bit"));
            }
        }
        for (i, buf) in self.buffers.iter().enumerate() {
            let first = space.buffer_bit(i + 1);
            for (n, &b) in buf.iter().enumerate() {
                if b {
                    code |= space.mask_of(first + n as u32);
                }
            }
        }
        code
    }

    fn draw_modes(&mut self) {
        for &relay in &self.dual {
            self.active[relay - 1] = self.rng.random::<f64>() >= self.q;
        }
    }

    // Whether node i sends to j this slot.
    fn sends(&self, i: usize, j: usize) -> bool {
        i == 0 || (self.active[i - 1] && self.buffers[i - 1][j - i - 1])
    }
}

/// Advances one slot; destination outcomes are tallied when `tally` is set.
fn advance(state: &mut SimState, tau: f64, tally: bool, order: PhaseOrder) {
    let receivers = state.gains.len();
    // transmission: combined amplitude at every receiver
    for j in 1..=receivers {
        let lo = j.saturating_sub(state.k);
        let mut sum = 0.0;
        for i in lo..j {
            let h = state.rng.sample::<f64, _>(Exp1).sqrt();
            if state.sends(i, j) {
                sum += state.gains[j - 1][i - lo] * h;
            }
        }
        state.amplitude[j - 1] = sum;
    }
    let relays = receivers - 1;
    match order {
        PhaseOrder::ShiftThenDecode => {
            shift(state);
            for j in 1..=relays {
                state.buffers[j - 1][0] = state.amplitude[j - 1] * state.amplitude[j - 1] >= tau;
            }
        }
        PhaseOrder::DecodeThenShift => {
            for j in 1..=relays {
                state.buffers[j - 1][0] = state.amplitude[j - 1] * state.amplitude[j - 1] >= tau;
            }
            shift(state);
        }
    }
    if tally {
        let a = state.amplitude[receivers - 1];
        state.tallied += 1;
        if a * a < tau {
            state.outages += 1;
        }
    }
    state.slot += 1;
    state.draw_modes();
}

fn shift(state: &mut SimState) {
    for buf in &mut state.buffers {
        buf.rotate_right(1);
        buf[0] = false;
    }
}

/// One slot at linear power `power`, tallying the destination outcome.
pub fn step(state: &mut SimState, config: &NetworkConfig, power: f64) {
    debug_assert_eq!(state.fingerprint, config.fingerprint(), "state built for another configuration");
    advance(state, config.tau(power), true, PhaseOrder::ShiftThenDecode);
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn step_with_order(state: &mut SimState, config: &NetworkConfig, power: f64, order: PhaseOrder) {
    advance(state, config.tau(power), true, order);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub slots: u64,
    pub seed: u64,
    /// Untallied slots at the start of each replica; `N + k` when `None`.
    pub warmup: Option<u64>,
    /// Independent streams the slots are split across. Results depend on this
    /// and the seed, never on the number of worker threads.
    pub replicas: usize,
    pub histogram: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { slots: 1_000_000, seed: 1, warmup: None, replicas: 8, histogram: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub slots: u64,
    pub outages: u64,
    pub outage: f64,
    /// Half-width of the 99% binomial confidence interval.
    pub half_width: f64,
    /// Tallied-slot counts per 1-based state index (`histogram[m - 1]`).
    pub histogram: Option<Vec<u64>>,
}

impl SimResult {
    pub fn ci_low(&self) -> f64 {
        (self.outage - self.half_width).max(0.0)
    }

    pub fn ci_high(&self) -> f64 {
        (self.outage + self.half_width).min(1.0)
    }
}

struct ReplicaTally {
    outages: u64,
    tallied: u64,
    histogram: Option<Vec<u64>>,
}

fn run_replica(config: &NetworkConfig, power: f64, opts: &SimOptions, space: Option<&StateSpace>, r: usize) -> ReplicaTally {
    let replicas = opts.replicas as u64;
    let slots = opts.slots / replicas + u64::from((r as u64) < opts.slots % replicas);
    let warmup = opts.warmup.unwrap_or((config.n_relays() + config.k_hops()) as u64);
    let tau = config.tau(power);
    let mut state = SimState::new(config, opts.seed, r as u64);
    for _ in 0..warmup {
        advance(&mut state, tau, false, PhaseOrder::ShiftThenDecode);
    }
    let mut histogram = space.map(|s| vec![0u64; s.size()]);
    for _ in 0..slots {
        if let (Some(h), Some(s)) = (histogram.as_mut(), space) {
            h[state.code(s)] += 1;
        }
        advance(&mut state, tau, true, PhaseOrder::ShiftThenDecode);
    }
    ReplicaTally { outages: state.outages, tallied: state.tallied, histogram }
}

/// Simulates `opts.slots` tallied slots at linear power `power`.
pub fn run(config: &NetworkConfig, power: f64, opts: &SimOptions) -> Result<SimResult> {
    if opts.slots < MIN_SLOTS {
        return Err(Error::InvalidArgument(format!("at least {MIN_SLOTS} slots are required, got {}", opts.slots)));
    }
    if opts.replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    let space = if opts.histogram { Some(StateSpace::new(config)?) } else { None };
    let tallies: Vec<ReplicaTally> =
        (0..opts.replicas).into_par_iter().map(|r| run_replica(config, power, opts, space.as_ref(), r)).collect();
    let outages: u64 = tallies.iter().map(|t| t.outages).sum();
    let slots: u64 = tallies.iter().map(|t| t.tallied).sum();
    let histogram = space.map(|s| {
        let mut total = vec![0u64; s.size()];
        for t in &tallies {
            for (acc, c) in total.iter_mut().zip(t.histogram.as_ref().expect("replica histogram")) {
                *acc += c;
            }
        }
        total
    });
    let p = outages as f64 / slots as f64;
    let half_width = Z_99 * (p * (1.0 - p) / slots as f64).sqrt();
    Ok(SimResult { slots, outages, outage: p, half_width, histogram })
}

/// Fraction of tallied slots spent in each state, `freq[m - 1]`.
pub fn occupancy_histogram(config: &NetworkConfig, power: f64, slots: u64, seed: u64) -> Result<Vec<f64>> {
    let opts = SimOptions { slots, seed, histogram: true, ..SimOptions::default() };
    let result = run(config, power, &opts)?;
    let counts = result.histogram.expect("histogram requested");
    Ok(counts.iter().map(|&c| c as f64 / result.slots as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::power_from_db;

    fn config(n: usize, k: usize, h: &[usize], q: f64) -> NetworkConfig {
        NetworkConfig::builder(n, k).dual_mode(h.iter().copied()).q_silent(q).build().unwrap()
    }

    fn opts(slots: u64, seed: u64) -> SimOptions {
        SimOptions { slots, seed, ..SimOptions::default() }
    }

    #[test]
    fn always_silent_relays_never_deliver() {
        let c = config(2, 2, &[1, 2], 1.0);
        let r = run(&c, power_from_db(30.0, 1.0), &opts(20_000, 3)).unwrap();
        assert_eq!(r.outage, 1.0);
    }

    #[test]
    fn zero_threshold_delivers_every_slot() {
        let c = NetworkConfig::builder(3, 2).gamma(1e-12).build().unwrap();
        let r = run(&c, 1.0, &opts(20_000, 3)).unwrap();
        assert_eq!(r.outages, 0);
        assert_eq!(r.slots, 20_000);
    }

    #[test]
    fn shifting_moves_cells_right_and_drops_the_last() {
        let c = NetworkConfig::builder(2, 2).gamma(1e-12).build().unwrap();
        let s = StateSpace::new(&c).unwrap();
        let mut st = SimState::from_state(&c, &s.decode(7).unwrap(), 1, 0).unwrap();
        assert_eq!(st.buffer(1), &[true, true]);
        assert_eq!(st.buffer(2), &[false]);
        step(&mut st, &c, 1.0);
        // tau ~ 0: every signal decodes; b_1 = (new, old b_1[1]), b_2 = (new)
        assert_eq!(st.buffer(1), &[true, true]);
        assert_eq!(st.buffer(2), &[true]);
        assert_eq!(st.outages(), 0);
        // from the empty state the destination has nothing this slot
        let mut empty = SimState::from_state(&c, &s.decode(1).unwrap(), 1, 0).unwrap();
        step(&mut empty, &c, 1.0);
        assert_eq!(empty.outages(), 1);
        // both relays hear the source: beta_1 = (1, 0), beta_2 = (1)
        assert_eq!(empty.snapshot(&s).index, 6);
    }

    #[test]
    fn runs_are_reproducible() {
        let c = config(2, 2, &[1], 0.1);
        let o = SimOptions { histogram: true, ..opts(50_000, 9) };
        let a = run(&c, power_from_db(10.0, 1.0), &o).unwrap();
        let b = run(&c, power_from_db(10.0, 1.0), &o).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c1 = single.install(|| run(&c, power_from_db(10.0, 1.0), &o).unwrap());
        assert_eq!(a, c1);
        let h = a.histogram.unwrap();
        assert_eq!(h.iter().sum::<u64>(), a.slots);
        assert_ne!(run(&c, power_from_db(10.0, 1.0), &opts(50_000, 10)).unwrap().outages, a.outages);
    }

    #[test]
    fn outage_is_monotone_in_power_with_common_randomness() {
        let c = config(3, 2, &[2], 0.2);
        let mut last = u64::MAX;
        for p_db in [0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 20.0] {
            let r = run(&c, power_from_db(p_db, 1.0), &opts(30_000, 4)).unwrap();
            assert!(r.outages <= last, "P = {p_db} dB");
            last = r.outages;
        }
    }

    #[test]
    fn phase_order_matters() {
        let c = config(2, 2, &[], 0.0);
        let p = power_from_db(10.0, 1.0);
        let mut right = SimState::new(&c, 5, 0);
        let mut wrong = SimState::new(&c, 5, 0);
        for _ in 0..20_000 {
            step_with_order(&mut right, &c, p, PhaseOrder::ShiftThenDecode);
            step_with_order(&mut wrong, &c, p, PhaseOrder::DecodeThenShift);
        }
        assert_ne!(right.outages(), wrong.outages());
    }

    #[test]
    fn snapshots_are_valid_indices() {
        let c = config(3, 2, &[1, 3], 0.3);
        let s = StateSpace::new(&c).unwrap();
        let mut st = SimState::new(&c, 2, 0);
        for _ in 0..2_000 {
            let snap = st.snapshot(&s);
            assert!((1..=s.size()).contains(&snap.index));
            assert_eq!(st.code(&s) + 1, snap.index);
            step(&mut st, &c, 3.0);
        }
    }

    #[test]
    fn rejects_short_runs() {
        let c = config(2, 2, &[], 0.1);
        assert!(run(&c, 1.0, &opts(100, 1)).is_err());
    }
}

//! Network-state encoding.
//!
//! A state is the bit vector `(lambda_H(1) .. lambda_H(nu), beta_1 .. beta_N)`
//! read as a binary number, most significant bit first; its index is that
//! number plus one. Index 1 is the all-zero state, index `M` the all-one state.
//! Internally states are handled as 0-based codes (`index - 1`).

use std::ops::Range;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

/// Default cap on the number of states, `2^24`.
pub const DEFAULT_STATE_CAP: usize = 1 << 24;

/// Decoded network state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    /// 1-based state index `m`.
    pub index: usize,
    /// Mode of each dual-mode relay, in `H` order; `true` means active.
    pub relay_bits: Vec<bool>,
    /// `buffer_bits[i - 1]` is `beta_i`, of length `L_i`.
    pub buffer_bits: Vec<Vec<bool>>,
}

/// Bit layout of the state vector for one configuration.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n_relays: usize,
    k_hops: usize,
    dual: Vec<usize>,
    // Bit position of lambda_i for dual-mode relay i.
    mode_bit: Vec<Option<u32>>,
    buffer_len: Vec<usize>,
    // Bit position of beta_i[1].
    buffer_bit: Vec<u32>,
    bits: u32,
    size: usize,
}

impl StateSpace {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        Self::with_cap(config, DEFAULT_STATE_CAP)
    }

    /// Like [`StateSpace::new`] with an explicit cap on `M`.
    pub fn with_cap(config: &NetworkConfig, cap: usize) -> Result<Self> {
        let n = config.n_relays();
        let nu = config.nu();
        let l_beta = config.buffer_bits();
        let bits = (l_beta + nu) as u32;
        if bits >= usize::BITS - 1 || (1usize << bits) > cap {
            return Err(Error::StateSpaceTooLarge { bits, cap });
        }
        let mut mode_bit = vec![None; n + 1];
        for (pos, &relay) in config.dual_mode().iter().enumerate() {
            mode_bit[relay] = Some(pos as u32);
        }
        let mut buffer_len = vec![config.k_hops(); n + 1];
        let mut buffer_bit = vec![0; n + 1];
        let mut next = nu as u32;
        for i in 1..=n {
            buffer_len[i] = config.buffer_len(i);
            buffer_bit[i] = next;
            next += buffer_len[i] as u32;
        }
        Ok(Self {
            n_relays: n,
            k_hops: config.k_hops(),
            dual: config.dual_mode().to_vec(),
            mode_bit,
            buffer_len,
            buffer_bit,
            bits,
            size: 1usize << bits,
        })
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn k_hops(&self) -> usize {
        self.k_hops
    }

    pub fn dual_mode(&self) -> &[usize] {
        &self.dual
    }

    /// `L_beta`.
    pub fn buffer_bits(&self) -> usize {
        self.bits as usize - self.dual.len()
    }

    /// Total bit length `L_beta + nu`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of states `M = 2^(L_beta + nu)`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// `L_i` for relay `i`; `k` for the source.
    pub fn buffer_len(&self, node: usize) -> usize {
        self.buffer_len[node]
    }

    #[inline]
    fn bit(&self, code: usize, pos: u32) -> bool {
        (code >> (self.bits - 1 - pos)) & 1 == 1
    }

    #[inline]
    pub(crate) fn mask_of(&self, pos: u32) -> usize {
        1usize << (self.bits - 1 - pos)
    }

    /// Whether node `i` transmits this slot: always for the source and
    /// single-mode relays, `lambda_i` for dual-mode relays.
    #[inline]
    pub(crate) fn is_active(&self, code: usize, node: usize) -> bool {
        match self.mode_bit.get(node).copied().flatten() {
            Some(pos) => self.bit(code, pos),
            None => true,
        }
    }

    /// `beta_i[n]`, 1-based `n`. The source has a virtual all-ones buffer.
    #[inline]
    pub(crate) fn beta(&self, code: usize, node: usize, n: usize) -> bool {
        if node == 0 {
            return true;
        }
        self.bit(code, self.buffer_bit[node] + n as u32 - 1)
    }

    pub(crate) fn mode_bit(&self, relay: usize) -> Option<u32> {
        self.mode_bit[relay]
    }

    pub(crate) fn buffer_bit(&self, relay: usize) -> u32 {
        self.buffer_bit[relay]
    }

    /// Candidate transmitters of receiver `j`: `max(0, j-k) .. j`.
    pub fn transmitters(&self, j: usize) -> Range<usize> {
        j.saturating_sub(self.k_hops)..j
    }

    pub(crate) fn code_of(&self, index: usize) -> Result<usize> {
        if index == 0 || index > self.size {
            return Err(Error::IndexOutOfRange { index, max: self.size });
        }
        Ok(index - 1)
    }

    /// Indicator `1_{(i -> j), m}` on a 0-based code.
    #[inline]
    pub(crate) fn link_on(&self, i: usize, j: usize, code: usize) -> bool {
        debug_assert!(i < j && j - i <= self.k_hops && j <= self.n_relays + 1);
        self.is_active(code, i) && self.beta(code, i, j - i)
    }

    /// Active incoming links of receiver `j` as a bitmask; bit `i - lo` is
    /// set when transmitter `i` sends, `lo = max(0, j - k)`.
    #[inline]
    pub(crate) fn incoming_mask(&self, j: usize, code: usize) -> u32 {
        let lo = j.saturating_sub(self.k_hops);
        (lo..j).filter(|&i| self.link_on(i, j, code)).fold(0, |m, i| m | (1 << (i - lo)))
    }

    pub fn decode(&self, index: usize) -> Result<NetworkState> {
        let code = self.code_of(index)?;
        let relay_bits = (0..self.dual.len() as u32).map(|p| self.bit(code, p)).collect();
        let buffer_bits = (1..=self.n_relays)
            .map(|i| (1..=self.buffer_len[i]).map(|n| self.beta(code, i, n)).collect())
            .collect();
        Ok(NetworkState { index, relay_bits, buffer_bits })
    }

    /// Index of a state assembled from its bits; `state.index` is ignored.
    pub fn encode(&self, state: &NetworkState) -> Result<usize> {
        if state.relay_bits.len() != self.dual.len() || state.buffer_bits.len() != self.n_relays {
            return Err(Error::InvalidArgument("state shape does not match the configuration".into()));
        }
        let mut code = 0usize;
        for (p, &b) in state.relay_bits.iter().enumerate() {
            if b {
                code |= self.mask_of(p as u32);
            }
        }
        for (i, beta) in state.buffer_bits.iter().enumerate() {
            let relay = i + 1;
            if beta.len() != self.buffer_len[relay] {
                return Err(Error::InvalidArgument(format!("beta_{relay} must have {} cells", self.buffer_len[relay])));
            }
            for (n, &b) in beta.iter().enumerate() {
                if b {
                    code |= self.mask_of(self.buffer_bit[relay] + n as u32);
                }
            }
        }
        Ok(code + 1)
    }

    /// `1_{(i -> j), m}` for a decoded state. Requires `0 <= i < j <= N+1`
    /// and `j - i <= k`.
    pub fn link_indicator(&self, i: usize, j: usize, state: &NetworkState) -> bool {
        self.link_on(i, j, state.index - 1)
    }

    /// `C_{j,m}`, the number of nodes transmitting to receiver `j`.
    pub fn active_transmitter_count(&self, j: usize, state: &NetworkState) -> usize {
        self.incoming_mask(j, state.index - 1).count_ones() as usize
    }
}

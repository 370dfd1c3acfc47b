//! Network configuration: topology, channel parameters and power splits.

use crate::error::{Error, Result};

/// Power-splitting weights `a_{i,j}`: one row per transmitter `i = 0..=N`,
/// covering receivers `j = i+1 ..= min(i+k, N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTable {
    rows: Vec<Vec<f64>>,
}

/// Tolerance on the per-transmitter weight sum.
pub const SPLIT_SUM_TOL: f64 = 1e-9;

impl SplitTable {
    /// Uniform split `a_{i,j} = 1 / min(k, N-i+1)`.
    pub fn equal(n_relays: usize, k_hops: usize) -> Self {
        let rows = (0..=n_relays)
            .map(|i| {
                let len = fan_out(n_relays, k_hops, i);
                vec![1.0 / len as f64; len]
            })
            .collect();
        Self { rows }
    }

    /// Validates row shapes, positivity and unit sums.
    pub fn from_rows(n_relays: usize, k_hops: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != n_relays + 1 {
            return Err(Error::InvalidConfig(format!(
                "split table needs {} rows (one per transmitter), got {}",
                n_relays + 1,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let len = fan_out(n_relays, k_hops, i);
            if row.len() != len {
                return Err(Error::InvalidConfig(format!(
                    "transmitter {i} splits over {len} receivers, got {} weights",
                    row.len()
                )));
            }
            if row.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
                return Err(Error::InvalidConfig(format!("transmitter {i} has a weight outside (0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SPLIT_SUM_TOL {
                return Err(Error::InvalidConfig(format!("transmitter {i} weights sum to {sum}, not 1")));
            }
            if len > 1 && row.iter().any(|&a| a >= 1.0) {
                return Err(Error::InvalidConfig(format!("transmitter {i} gives a whole split to one link")));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `a_{i,j}`; panics if `j` is not a receiver of `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j - i - 1]
    }

    fn matches(&self, n_relays: usize, k_hops: usize) -> bool {
        self.rows.len() == n_relays + 1
            && self.rows.iter().enumerate().all(|(i, r)| r.len() == fan_out(n_relays, k_hops, i))
    }
}

/// Number of receivers of transmitter `i`: `min(k, N - i + 1)`.
pub fn fan_out(n_relays: usize, k_hops: usize, i: usize) -> usize {
    k_hops.min(n_relays + 1 - i)
}

/// One relay branch: source, `N` relays and destination on a line.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    n_relays: usize,
    k_hops: usize,
    dual_mode: Vec<usize>,
    q_silent: f64,
    positions: Vec<f64>,
    eta: f64,
    sigma2: f64,
    gamma: f64,
    splits: SplitTable,
}

impl NetworkConfig {
    /// Starts a builder with the reference parameters: 3 m end-to-end,
    /// equispaced nodes, path-loss exponent 2, unit noise, 0 dB threshold,
    /// `q = 0.1`, no dual-mode relays and equal splits.
    pub fn builder(n_relays: usize, k_hops: usize) -> NetworkConfigBuilder {
        NetworkConfigBuilder {
            n_relays,
            k_hops,
            dual_mode: Vec::new(),
            q_silent: 0.1,
            end_distance: 3.0,
            positions: None,
            eta: 2.0,
            sigma2: 1.0,
            gamma: 1.0,
            splits: None,
        }
    }

    pub fn to_builder(&self) -> NetworkConfigBuilder {
        NetworkConfigBuilder {
            n_relays: self.n_relays,
            k_hops: self.k_hops,
            dual_mode: self.dual_mode.clone(),
            q_silent: self.q_silent,
            end_distance: self.end_distance(),
            positions: Some(self.positions.clone()),
            eta: self.eta,
            sigma2: self.sigma2,
            gamma: self.gamma,
            splits: Some(self.splits.clone()),
        }
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn k_hops(&self) -> usize {
        self.k_hops
    }

    /// Dual-mode relay indices `H`, ascending.
    pub fn dual_mode(&self) -> &[usize] {
        &self.dual_mode
    }

    /// `nu = |H|`.
    pub fn nu(&self) -> usize {
        self.dual_mode.len()
    }

    pub fn is_dual(&self, relay: usize) -> bool {
        self.dual_mode.binary_search(&relay).is_ok()
    }

    pub fn q_silent(&self) -> f64 {
        self.q_silent
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn end_distance(&self) -> f64 {
        self.positions[self.n_relays + 1] - self.positions[0]
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Linear SNR threshold.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn splits(&self) -> &SplitTable {
        &self.splits
    }

    /// Buffer size `L_i = min(k, N - i + 1)` of relay `i` (1-based).
    pub fn buffer_len(&self, relay: usize) -> usize {
        fan_out(self.n_relays, self.k_hops, relay)
    }

    /// Total buffer bits `L_beta = (2N - k + 1) k / 2`.
    pub fn buffer_bits(&self) -> usize {
        (1..=self.n_relays).map(|i| self.buffer_len(i)).sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions[j] - self.positions[i]).abs()
    }

    /// Effective link gain `a_{i,j} / d_{i,j}^eta`.
    pub fn link_weight(&self, i: usize, j: usize) -> f64 {
        self.splits.weight(i, j) / self.distance(i, j).powf(self.eta)
    }

    /// Threshold ratio `tau = gamma sigma^2 / P` for linear power `P`.
    pub fn tau(&self, power: f64) -> f64 {
        self.gamma * self.sigma2 / power
    }

    /// Same network with a different split table.
    pub fn with_splits(&self, splits: SplitTable) -> Result<Self> {
        if !splits.matches(self.n_relays, self.k_hops) {
            return Err(Error::InvalidConfig("split table shape does not match N and k".into()));
        }
        Ok(Self { splits, ..self.clone() })
    }

    /// Same network with a different silent probability.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        check_probability(q)?;
        Ok(Self { q_silent: q, ..self.clone() })
    }

    /// Stable textual fingerprint of every parameter.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the debug rendering; f64 Debug output is round-trip exact.
        let text = format!("{self:?}");
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
    }
}

fn check_probability(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("silent probability {q} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct NetworkConfigBuilder {
    n_relays: usize,
    k_hops: usize,
    dual_mode: Vec<usize>,
    q_silent: f64,
    end_distance: f64,
    positions: Option<Vec<f64>>,
    eta: f64,
    sigma2: f64,
    gamma: f64,
    splits: Option<SplitTable>,
}

impl NetworkConfigBuilder {
    pub fn dual_mode(mut self, relays: impl IntoIterator<Item = usize>) -> Self {
        self.dual_mode = relays.into_iter().collect();
        self
    }

    pub fn q_silent(mut self, q: f64) -> Self {
        self.q_silent = q;
        self
    }

    /// Source-destination distance; relays are placed equispaced.
    pub fn end_distance(mut self, meters: f64) -> Self {
        self.end_distance = meters;
        self.positions = None;
        self
    }

    /// Arbitrary node positions on a line, `N + 2` strictly increasing values.
    pub fn positions(mut self, positions: Vec<f64>) -> Self {
        self.positions = Some(positions);
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    /// Linear SNR threshold.
    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn gamma_db(self, db: f64) -> Self {
        self.gamma(crate::units::db_to_linear(db))
    }

    pub fn splits(mut self, splits: SplitTable) -> Self {
        self.splits = Some(splits);
        self
    }

    pub fn build(self) -> Result<NetworkConfig> {
        let n = self.n_relays;
        let k = self.k_hops;
        if n == 0 {
            return Err(Error::InvalidConfig("at least one relay is required".into()));
        }
        if k == 0 || k > n + 1 {
            return Err(Error::InvalidConfig(format!("k must lie in 1..={}, got {k}", n + 1)));
        }
        let mut dual = self.dual_mode;
        dual.sort_unstable();
        dual.dedup();
        if let Some(&bad) = dual.iter().find(|&&r| r == 0 || r > n) {
            return Err(Error::InvalidConfig(format!("dual-mode relay {bad} outside 1..={n}")));
        }
        check_probability(self.q_silent)?;
        let positions = match self.positions {
            Some(p) => p,
            None => {
                if self.end_distance.is_nan() || self.end_distance <= 0.0 {
                    return Err(Error::InvalidConfig("end distance must be positive".into()));
                }
                let d = self.end_distance / (n + 1) as f64;
                (0..n + 2).map(|i| i as f64 * d).collect()
            }
        };
        if positions.len() != n + 2 {
            return Err(Error::InvalidConfig(format!("need {} node positions, got {}", n + 2, positions.len())));
        }
        if positions.iter().any(|p| !p.is_finite()) || positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("node positions must be finite and strictly increasing".into()));
        }
        for (name, v) in [("eta", self.eta), ("sigma2", self.sigma2), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let splits = match self.splits {
            Some(s) if s.matches(n, k) => s,
            Some(_) => return Err(Error::InvalidConfig("split table shape does not match N and k".into())),
            None => SplitTable::equal(n, k),
        };
        Ok(NetworkConfig {
            n_relays: n,
            k_hops: k,
            dual_mode: dual,
            q_silent: self.q_silent,
            positions,
            eta: self.eta,
            sigma2: self.sigma2,
            gamma: self.gamma,
            splits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_sizes_sum_to_closed_form() {
        for n in 1..=6 {
            for k in 1..=n + 1 {
                let c = NetworkConfig::builder(n, k).build().unwrap();
                assert_eq!(c.buffer_bits(), (2 * n + 1 - k) * k / 2, "N={n} k={k}");
            }
        }
    }

    #[test]
    fn equal_splits_shape() {
        let s = SplitTable::equal(2, 2);
        assert_eq!(s.rows(), &[vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0]]);
        let s = SplitTable::equal(3, 4);
        assert_eq!(s.rows()[0].len(), 4);
        assert_eq!(s.rows()[3], vec![1.0]);
        for row in s.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn table_one_geometry() {
        let c = NetworkConfig::builder(2, 2).build().unwrap();
        assert_eq!(c.positions(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(c.link_weight(0, 2), 0.5 / 4.0);
        assert_eq!(c.tau(10.0), 0.1);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(NetworkConfig::builder(2, 4).build().is_err());
        assert!(NetworkConfig::builder(2, 0).build().is_err());
        assert!(NetworkConfig::builder(2, 2).dual_mode([3]).build().is_err());
        assert!(NetworkConfig::builder(2, 2).q_silent(1.5).build().is_err());
        assert!(NetworkConfig::builder(2, 2).positions(vec![0.0, 2.0, 1.0, 3.0]).build().is_err());
        assert!(SplitTable::from_rows(2, 2, vec![vec![0.7, 0.4], vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(SplitTable::from_rows(2, 2, vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(SplitTable::from_rows(2, 2, vec![vec![0.3, 0.7], vec![0.5, 0.5], vec![1.0]]).is_ok());
    }

    #[test]
    fn dual_mode_is_sorted_and_deduplicated() {
        let c = NetworkConfig::builder(3, 2).dual_mode([3, 1, 3]).build().unwrap();
        assert_eq!(c.dual_mode(), &[1, 3]);
        assert!(c.is_dual(3) && !c.is_dual(2));
    }
}

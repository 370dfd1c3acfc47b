//! Shared fixtures for the criterion benches.

use myopic_core::{LinkPattern, NetworkConfig};

/// Always-active chain with default geometry.
pub fn active(n_relays: usize, k_hops: usize) -> NetworkConfig {
    NetworkConfig::builder(n_relays, k_hops).build().expect("valid fixture")
}

/// Chain with the given dual-mode relays and `q = 0.1`.
pub fn with_dual(n_relays: usize, k_hops: usize, dual: &[usize]) -> NetworkConfig {
    NetworkConfig::builder(n_relays, k_hops).dual_mode(dual.iter().copied()).q_silent(0.1).build().expect("valid fixture")
}

/// Receiver fed by `count` transmitters of decreasing strength.
pub fn pattern(count: usize, tau: f64) -> LinkPattern {
    LinkPattern::new(1, (1..=count).map(|i| 1.0 / (i * i) as f64).collect(), tau)
}

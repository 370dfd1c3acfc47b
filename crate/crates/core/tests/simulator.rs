//! Simulator against the chain it is supposed to realise.

use myopic_core::sim::{run, step};
use myopic_core::{
    build_matrix, outage_floor, power_from_db, stationary, system_outage, NetworkConfig, OutageMethod, SimOptions,
    SimState, StateSpace,
};

const TRIALS: u64 = 1_000_000;

fn one_step_frequencies(config: &NetworkConfig, p_db: f64, start_index: usize) {
    let power = power_from_db(p_db, config.sigma2());
    let space = StateSpace::new(config).unwrap();
    let matrix = build_matrix(config, power, OutageMethod::Exact).unwrap();
    let start = space.decode(start_index).unwrap();
    let mut counts = vec![0u64; space.size()];
    for trial in 0..TRIALS {
        let mut s = SimState::from_state(config, &start, 99, trial).unwrap();
        step(&mut s, config, power);
        counts[s.snapshot(&space).index - 1] += 1;
    }
    for l in 1..=space.size() {
        let p = matrix.get(l, start_index);
        let freq = counts[l - 1] as f64 / TRIALS as f64;
        if p == 0.0 {
            assert_eq!(counts[l - 1], 0, "impossible transition {start_index} -> {l} observed");
            continue;
        }
        let se = (p * (1.0 - p) / TRIALS as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "{start_index} -> {l}: frequency {freq} vs {p} (se {se})");
    }
}

#[test]
fn one_step_transitions_match_the_matrix() {
    let c = NetworkConfig::builder(2, 2).dual_mode([1]).q_silent(0.3).build().unwrap();
    one_step_frequencies(&c, 5.0, 1);
    one_step_frequencies(&c, 5.0, 16);
    one_step_frequencies(&c, 5.0, 11);
}

#[test]
fn one_step_transitions_three_hops() {
    let c = NetworkConfig::builder(2, 3).build().unwrap();
    one_step_frequencies(&c, 3.0, 6);
}

#[test]
fn long_run_agrees_with_chain() {
    let c = NetworkConfig::builder(3, 2).dual_mode([2]).build().unwrap();
    let power = power_from_db(10.0, 1.0);
    let analytic = system_outage(&c, power, OutageMethod::Exact).unwrap();
    let r = run(&c, power, &SimOptions { seed: 4, ..SimOptions::default() }).unwrap();
    assert!((r.outage - analytic).abs() <= r.half_width, "{} vs {analytic}", r.outage);
}

#[test]
fn three_relay_floor() {
    // e(3, 2) = q^2 q + (1 - q^2) q^2
    let q: f64 = 0.1;
    let floor = outage_floor(3, 2, q).unwrap();
    assert!((floor - (q.powi(3) + (1.0 - q * q) * q * q)).abs() < 1e-15);
    let c = NetworkConfig::builder(3, 2).dual_mode([1, 2, 3]).q_silent(q).build().unwrap();
    let r = run(&c, power_from_db(40.0, 1.0), &SimOptions { seed: 8, ..SimOptions::default() }).unwrap();
    assert!((r.outage - floor).abs() / floor < 0.1, "{} vs {floor}", r.outage);
}

#[test]
fn occupancy_tracks_stationary_mass() {
    let c = NetworkConfig::builder(2, 1).dual_mode([2]).build().unwrap();
    let power = power_from_db(0.0, 1.0);
    let pi = stationary(&build_matrix(&c, power, OutageMethod::Exact).unwrap()).unwrap().pi;
    let freq = myopic_core::occupancy_histogram(&c, power, 400_000, 12).unwrap();
    for (f, p) in freq.iter().zip(&pi) {
        assert!((f - p).abs() < 0.01, "{f} vs {p}");
    }
}

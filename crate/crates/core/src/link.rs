//! Per-receiver outage of coherently combined Rayleigh links.
//!
//! Fading amplitudes follow `E[|h|^2] = 1`, so a link with effective gain
//! `w = a / d^eta` contributes the amplitude `sqrt(w) |h|`, a Rayleigh
//! variable with scale `c = sqrt(w / 2)`. A receiver is in outage when
//! `sum_i sqrt(w_i) |h_i| < sqrt(tau)` with `tau = gamma sigma^2 / P`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::RwLock;

use num_complex::Complex64;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureOptions};
use crate::special::{gaussian_companion, one_minus_two_x_dawson};
use crate::state::{NetworkState, StateSpace};

/// How per-receiver outage is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OutageMethod {
    /// Exponential cdf for a single link, Gil-Pelaez inversion otherwise.
    #[default]
    Exact,
    /// Small-argument approximation for every pattern.
    Saa,
    /// Gil-Pelaez inversion for every pattern, including single links.
    GilPelaez,
}

/// Active transmitters of one receiver with their effective gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPattern {
    pub receiver: usize,
    /// `w_i = a_{i,j} / d_{i,j}^eta` for each active transmitter.
    pub weights: Vec<f64>,
    /// `gamma sigma^2 / P`.
    pub tau: f64,
}

impl LinkPattern {
    pub fn new(receiver: usize, weights: Vec<f64>, tau: f64) -> Self {
        debug_assert!(weights.iter().all(|&w| w > 0.0));
        debug_assert!(tau >= 0.0);
        Self { receiver, weights, tau }
    }

    /// Pattern of receiver `j` for the incoming-link bitmask produced by
    /// [`StateSpace`] (bit `i - max(0, j-k)` set when `i` transmits).
    pub fn from_mask(config: &NetworkConfig, j: usize, mask: u32, power: f64) -> Self {
        let lo = j.saturating_sub(config.k_hops());
        let weights = (lo..j).filter(|i| mask & (1 << (i - lo)) != 0).map(|i| config.link_weight(i, j)).collect();
        Self::new(j, weights, config.tau(power))
    }

    /// Number of active transmitters `C`.
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn outage(&self, method: OutageMethod) -> Result<f64> {
        match (self.count(), method) {
            (0, _) => Ok(1.0),
            (1, OutageMethod::Exact) => Ok(outage_single_link(self.weights[0], self.tau)),
            (_, OutageMethod::Saa) => Ok(outage_saa(self)),
            _ => outage_gil_pelaez(self),
        }
    }
}

/// `1 - exp(-tau / w)`: outage of a single link with gain `w`.
pub fn outage_single_link(w: f64, tau: f64) -> f64 {
    -(-tau / w).exp_m1()
}

/// Characteristic function of the amplitude `sqrt(w) |h|`,
/// `phi(t) = 1 - 2x D(x) + j x sqrt(pi) exp(-x^2)` with `x = t sqrt(w) / 2`.
pub fn characteristic_function(t: f64, w: f64) -> Complex64 {
    let x = rayleigh_scale(w) * t * FRAC_1_SQRT_2;
    Complex64::new(one_minus_two_x_dawson(x), gaussian_companion(x))
}

fn rayleigh_scale(w: f64) -> f64 {
    (0.5 * w).sqrt()
}

/// Gil-Pelaez inversion with the default quadrature tolerance.
pub fn outage_gil_pelaez(pattern: &LinkPattern) -> Result<f64> {
    outage_gil_pelaez_with(pattern, &QuadratureOptions::default())
}

/// `P[sum_i sqrt(w_i)|h_i| < sqrt(tau)]` via
/// `1/2 - (1/pi) int_0^inf Im[exp(-j t sqrt(tau)) prod_i phi_i(t)] / t dt`.
///
/// The range is truncated at `T` where the algebraic tail
/// `prod_i 1/(c_i t)^2` of the integrand is below `opts.abs_tol`;
/// the Gaussian parts of `phi_i` vanish long before that.
pub fn outage_gil_pelaez_with(pattern: &LinkPattern, opts: &QuadratureOptions) -> Result<f64> {
    let count = pattern.count();
    if count == 0 {
        return Ok(1.0);
    }
    if pattern.tau <= 0.0 {
        return Ok(0.0);
    }
    let b = pattern.tau.sqrt();
    let scales: Vec<f64> = pattern.weights.iter().map(|&w| rayleigh_scale(w)).collect();
    let c_min = scales.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = scales.iter().copied().fold(0.0, f64::max);
    let mean_sum: f64 = scales.iter().map(|c| c * (0.5 * PI).sqrt()).sum();

    let integrand = |t: f64| -> f64 {
        if t == 0.0 {
            return mean_sum - b;
        }
        let mut z = Complex64::new(1.0, 0.0);
        for &c in &scales {
            let x = c * t * FRAC_1_SQRT_2;
            z *= Complex64::new(one_minus_two_x_dawson(x), gaussian_companion(x));
        }
        let (s, co) = (b * t).sin_cos();
        (co * z.im - s * z.re) / t
    };

    let upper = truncation_point(&scales, b, opts.abs_tol).max(10.0 / c_min);
    let width = (2.0 * PI / b).min(8.0 / c_max);
    let pieces = ((upper / width).ceil() as usize).clamp(8, opts.max_panels / 2);
    let breaks: Vec<f64> = (0..=pieces).map(|i| upper * i as f64 / pieces as f64).collect();

    let (integral, _) = quadrature::integrate(integrand, &breaks, opts).map_err(|e| match e {
        Error::Integration(msg) => {
            Error::Integration(format!("{msg} (weights {:?}, tau {})", pattern.weights, pattern.tau))
        }
        other => other,
    })?;
    let p = 0.5 - integral / PI;
    clamp_probability(p)
}

// Tail of |integrand| ~ g t^(-2C-1) with g = prod 1/c_i^2; the sine factor
// adds a further 1/(b t) once t >> 1/b.
fn truncation_point(scales: &[f64], b: f64, tol: f64) -> f64 {
    let count = scales.len() as f64;
    let g = 2.0 * scales.iter().map(|c| 1.0 / (c * c)).product::<f64>();
    let plain = (g / (2.0 * count * tol)).powf(1.0 / (2.0 * count));
    let oscillating = (2.0 * g / (b * tol)).powf(1.0 / (2.0 * count + 1.0));
    plain.min(oscillating)
}

// Tiny negative values are quadrature roundoff; anything larger is a failure.
fn clamp_probability(p: f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    if !(-SLACK..=1.0 + SLACK).contains(&p) {
        return Err(Error::Integration(format!("inversion produced {p}, outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Small-argument approximation
/// `1 - exp(-y) sum_{c<C} y^c / c!`, `y = tau / (2 theta)`,
/// `theta = (1/C) [(2C-1)!!]^(1/C) sum_i w_i / 2`.
pub fn outage_saa(pattern: &LinkPattern) -> f64 {
    let count = pattern.count();
    if count == 0 {
        return 1.0;
    }
    let c = count as f64;
    let double_factorial: f64 = (1..=count).map(|i| (2 * i - 1) as f64).product();
    let scale_sum: f64 = pattern.weights.iter().map(|w| 0.5 * w).sum();
    let theta = double_factorial.powf(1.0 / c) * scale_sum / c;
    regularized_gamma_p(count, pattern.tau / (2.0 * theta))
}

// Regularized lower incomplete gamma P(n, y) for integer n, accurate when the
// result is tiny.
fn regularized_gamma_p(n: usize, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y < n as f64 + 1.0 {
        // exp(-y) sum_{c>=n} y^c / c!
        let mut term = (-y).exp();
        for c in 1..=n {
            term *= y / c as f64;
        }
        let mut sum = 0.0;
        let mut c = n;
        while term > sum * 1e-17 {
            sum += term;
            c += 1;
            term *= y / c as f64;
        }
        sum.min(1.0)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for c in 1..n {
            term *= y / c as f64;
            sum += term;
        }
        (1.0 - (-y).exp() * sum).max(0.0)
    }
}

/// Outage of the conventional orthogonal multi-hop scheme with the boosted
/// threshold `gamma_c = (gamma + 1)^(N+1) - 1`:
/// `1 - exp(-gamma_c sigma^2 / P * sum_i d_{i,i+1}^eta)`, which is
/// `1 - exp(-(N+1) gamma_c d^eta sigma^2 / P)` for equispaced nodes.
pub fn conventional_benchmark(config: &NetworkConfig, power: f64) -> f64 {
    let n = config.n_relays();
    let gamma_c = (config.gamma() + 1.0).powi(n as i32 + 1) - 1.0;
    let path: f64 = (0..=n).map(|i| config.distance(i, i + 1).powf(config.eta())).sum();
    -(-gamma_c * config.sigma2() * path / power).exp_m1()
}

type CacheKey = (usize, u32, u64, OutageMethod);

/// Concurrent memo of per-receiver outage keyed by
/// `(receiver, incoming-link mask, power, method)`.
///
/// A cache must only be shared between calls on the same configuration.
#[derive(Debug, Default)]
pub struct OutageCache {
    map: RwLock<HashMap<CacheKey, f64>>,
}

impl OutageCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn lookup<F: FnOnce() -> Result<f64>>(
        &self,
        j: usize,
        mask: u32,
        power: f64,
        method: OutageMethod,
        compute: F,
    ) -> Result<f64> {
        let key = (j, mask, power.to_bits(), method);
        if let Some(&v) = self.map.read().expect("outage cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = compute()?;
        self.map.write().expect("outage cache poisoned").entry(key).or_insert(v);
        Ok(v)
    }
}

/// `P_o(j, m)`: outage at receiver `j` in state `state` at linear power
/// `power`. One when nobody transmits to `j`.
pub fn outage_per_node(
    j: usize,
    state: &NetworkState,
    config: &NetworkConfig,
    space: &StateSpace,
    power: f64,
    method: OutageMethod,
    cache: &OutageCache,
) -> Result<f64> {
    let code = space.code_of(state.index)?;
    let mask = space.incoming_mask(j, code);
    if mask == 0 {
        return Ok(1.0);
    }
    cache.lookup(j, mask, power, method, || LinkPattern::from_mask(config, j, mask, power).outage(method))
}

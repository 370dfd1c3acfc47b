//! Power-split optimization.
//!
//! Each transmitter `i` divides its power over its `L_i = min(k, N+1-i)`
//! receivers with weights on the simplex interior. The objective is the
//! system outage with `q = 0`, minimized by Nelder-Mead from several starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::system_outage;
use crate::config::{fan_out, NetworkConfig, SplitTable};
use crate::error::{Error, Result};
use crate::link::OutageMethod;

/// `a_{i,j} = 1 / min(k, N - i + 1)`.
pub fn equal_splits(config: &NetworkConfig) -> SplitTable {
    SplitTable::equal(config.n_relays(), config.k_hops())
}

/// Maps free coordinates onto per-transmitter simplices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parameterization {
    /// `a = lb + (1 - L lb) softmax(z, 0)` with `L - 1` free coordinates.
    #[default]
    Softmax,
    /// Euclidean projection of `L` free coordinates onto `{a >= lb, sum a = 1}`.
    Projected,
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub method: OutageMethod,
    pub parameterization: Parameterization,
    /// Weight floor `lb`.
    pub lower_bound: f64,
    /// Number of starts; the first is the equal split.
    pub starts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Stop when the simplex values spread less than this, relative.
    pub tolerance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            method: OutageMethod::Exact,
            parameterization: Parameterization::Softmax,
            lower_bound: 1e-4,
            starts: 5,
            seed: 0x5eed,
            max_evaluations: 600,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSolution {
    pub splits: SplitTable,
    /// System outage with the optimized weights.
    pub outage: f64,
    /// System outage with equal weights, same power and `q = 0`.
    pub equal_outage: f64,
    /// Objective evaluations over all starts.
    pub evaluations: usize,
    /// Whether the winning start met the tolerance.
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
}

struct Layout {
    // fan-out of every transmitter
    fans: Vec<usize>,
    parameterization: Parameterization,
    lower_bound: f64,
}

impl Layout {
    fn new(config: &NetworkConfig, opts: &OptimizerOptions) -> Self {
        let n = config.n_relays();
        let fans = (0..=n).map(|i| fan_out(n, config.k_hops(), i)).collect();
        Self { fans, parameterization: opts.parameterization, lower_bound: opts.lower_bound }
    }

    fn coords(&self, fan: usize) -> usize {
        match (fan, self.parameterization) {
            (1, _) => 0,
            (_, Parameterization::Softmax) => fan - 1,
            (_, Parameterization::Projected) => fan,
        }
    }

    fn dimension(&self) -> usize {
        self.fans.iter().map(|&f| self.coords(f)).sum()
    }

    /// Coordinates of the equal split.
    fn origin(&self) -> Vec<f64> {
        self.fans
            .iter()
            .flat_map(|&f| {
                let value = match self.parameterization {
                    Parameterization::Softmax => 0.0,
                    Parameterization::Projected => 1.0 / f as f64,
                };
                std::iter::repeat_n(value, self.coords(f))
            })
            .collect()
    }

    fn rows(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut rest = x;
        let lb = self.lower_bound;
        self.fans
            .iter()
            .map(|&fan| {
                if fan == 1 {
                    return vec![1.0];
                }
                let (z, tail) = rest.split_at(self.coords(fan));
                rest = tail;
                let free = 1.0 - fan as f64 * lb;
                match self.parameterization {
                    Parameterization::Softmax => {
                        let top = z.iter().copied().fold(0.0, f64::max);
                        let exps: Vec<f64> = z.iter().map(|v| (v - top).exp()).chain([(-top).exp()]).collect();
                        let total: f64 = exps.iter().sum();
                        exps.iter().map(|e| lb + free * e / total).collect()
                    }
                    Parameterization::Projected => {
                        let shifted: Vec<f64> = z.iter().map(|v| v - lb).collect();
                        project_simplex(&shifted, free).into_iter().map(|b| b + lb).collect()
                    }
                }
            })
            .collect()
    }
}

/// Euclidean projection of `v` onto `{b >= 0, sum b = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - total) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Minimizes the system outage at linear power `power` over the split
/// weights. The silent probability is forced to zero.
pub fn optimize_splits(config: &NetworkConfig, power: f64, opts: &OptimizerOptions) -> Result<SplitSolution> {
    if opts.starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let base = config.with_q(0.0)?.with_splits(equal_splits(config))?;
    let equal_outage = system_outage(&base, power, opts.method)?;
    let layout = Layout::new(config, opts);
    let dim = layout.dimension();
    if dim == 0 {
        return Ok(SplitSolution {
            splits: equal_splits(config),
            outage: equal_outage,
            equal_outage,
            evaluations: 1,
            converged: true,
            start: 0,
        });
    }

    let objective = |x: &[f64]| -> Result<f64> {
        let table = SplitTable::from_rows(config.n_relays(), config.k_hops(), layout.rows(x))?;
        system_outage(&base.with_splits(table)?, power, opts.method)
    };

    let origin = layout.origin();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = match opts.parameterization {
        Parameterization::Softmax => 1.0,
        Parameterization::Projected => 0.15,
    };
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|s| {
            let jitter: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
            if s == 0 {
                origin.clone()
            } else {
                origin.iter().zip(&jitter).map(|(o, d)| o + d).collect()
            }
        })
        .collect();
    let step = match opts.parameterization {
        Parameterization::Softmax => 0.5,
        Parameterization::Projected => 0.05,
    };

    let runs: Vec<Result<NelderMead>> = starts
        .par_iter()
        .map(|x0| nelder_mead(&objective, x0, step, opts.max_evaluations, opts.tolerance))
        .collect();
    let mut evaluations = 0;
    let mut best: Option<(usize, NelderMead)> = None;
    for (s, run) in runs.into_iter().enumerate() {
        let run = run?;
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|(_, b)| run.value < b.value) {
            best = Some((s, run));
        }
    }
    let (start, run) = best.expect("at least one start");
    let splits = SplitTable::from_rows(config.n_relays(), config.k_hops(), layout.rows(&run.point))?;
    Ok(SplitSolution { splits, outage: run.value, equal_outage, evaluations, converged: run.converged, start })
}

#[derive(Debug, Clone)]
struct NelderMead {
    point: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

fn nelder_mead<F: Fn(&[f64]) -> Result<f64>>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_evaluations: usize,
    tolerance: f64,
) -> Result<NelderMead> {
    let dim = x0.len();
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)?));
    for d in 0..dim {
        let mut x = x0.to_vec();
        x[d] += step;
        let v = eval(&x)?;
        simplex.push((x, v));
    }
    let mut converged = false;
    while evaluations.get() < max_evaluations {
        // stable sort keeps earlier vertices first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst - best <= tolerance * best.abs() + f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        let centroid: Vec<f64> =
            (0..dim).map(|d| simplex[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + t * (w - c)).collect()
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected)?;
        if fr < best {
            let expanded = along(-2.0);
            let fe = eval(&expanded)?;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst {
                let x = along(-0.5);
                let v = eval(&x)?;
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x)?;
                (x, v)
            };
            if fc < worst.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, v)| a + 0.5 * (v - a)).collect();
                    let v = eval(&x)?;
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Ok(NelderMead { point, value, evaluations: evaluations.get(), converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::power_from_db;
    use proptest::prelude::*;

    #[test]
    fn equal_split_shapes() {
        let c = NetworkConfig::builder(2, 2).build().unwrap();
        let s = equal_splits(&c);
        assert_eq!(s.rows()[0], vec![0.5, 0.5]);
        assert_eq!(s.rows()[2], vec![1.0]);
        for row in s.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| -> Result<f64> { Ok((x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2) + 3.0) };
        let r = nelder_mead(&f, &[0.0, 0.0], 0.5, 2000, 1e-14).unwrap();
        assert!(r.converged);
        assert!((r.point[0] - 1.0).abs() < 1e-5 && (r.point[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn projection_onto_simplex() {
        assert_eq!(project_simplex(&[0.5, 0.5], 1.0), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0], 1.0), vec![1.0, 0.0]);
        let p = project_simplex(&[0.3, 0.3, 0.9], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - (0.3 - 1.0 / 6.0)).abs() < 1e-15 && (p[2] - (0.9 - 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn single_receiver_transmitters_keep_full_power() {
        let c = NetworkConfig::builder(3, 1).build().unwrap();
        let sol = optimize_splits(&c, power_from_db(10.0, 1.0), &OptimizerOptions::default()).unwrap();
        assert_eq!(sol.splits, equal_splits(&c));
        assert_eq!(sol.outage, sol.equal_outage);
    }

    #[test]
    fn low_power_gains_high_power_ties() {
        let c = NetworkConfig::builder(2, 2).build().unwrap();
        let low = optimize_splits(&c, power_from_db(5.0, 1.0), &OptimizerOptions::default()).unwrap();
        assert!(low.outage < low.equal_outage, "{} vs {}", low.outage, low.equal_outage);
        let high = optimize_splits(&c, power_from_db(25.0, 1.0), &OptimizerOptions::default()).unwrap();
        assert!(high.outage <= high.equal_outage);
        // the relative gain tends to about 3.7% as P grows (a_{0,1} -> 5 - sqrt(20))
        assert!((high.equal_outage - high.outage) / high.equal_outage < 0.04, "{high:?}");
        assert!((high.splits.rows()[0][0] - (5.0 - 20f64.sqrt())).abs() < 0.01);
        for row in high.splits.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if row.len() > 1 {
                assert!(row.iter().all(|&a| a > 1e-4 && a < 1.0 - 1e-4));
            }
        }
    }

    #[test]
    fn deterministic_and_parameterization_invariant() {
        let c = NetworkConfig::builder(2, 2).build().unwrap();
        let p = power_from_db(5.0, 1.0);
        let a = optimize_splits(&c, p, &OptimizerOptions::default()).unwrap();
        let b = optimize_splits(&c, p, &OptimizerOptions::default()).unwrap();
        assert_eq!(a, b);
        let projected = OptimizerOptions { parameterization: Parameterization::Projected, ..Default::default() };
        let c2 = optimize_splits(&c, p, &projected).unwrap();
        assert!((a.outage - c2.outage).abs() < 1e-6, "{} vs {}", a.outage, c2.outage);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn layouts_produce_feasible_tables(
            n in 1usize..=4,
            k_off in 0usize..4,
            coords in proptest::collection::vec(-30.0f64..30.0, 16),
            projected in proptest::bool::ANY,
        ) {
            let k = 1 + k_off.min(n);
            let c = NetworkConfig::builder(n, k).build().unwrap();
            let parameterization = if projected { Parameterization::Projected } else { Parameterization::Softmax };
            let opts = OptimizerOptions { parameterization, ..Default::default() };
            let layout = Layout::new(&c, &opts);
            let x = &coords[..layout.dimension()];
            let rows = layout.rows(x);
            for row in &rows {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                if row.len() > 1 {
                    prop_assert!(row.iter().all(|a| (1e-4 - 1e-15..=1.0 - 1e-4 + 1e-15).contains(a)));
                }
            }
            prop_assert!(SplitTable::from_rows(n, k, rows).is_ok());
        }
    }
}

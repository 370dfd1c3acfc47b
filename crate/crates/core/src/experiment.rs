//! Experiment files: `key = value` lines, `#` starts a comment.
//!
//! ```text
//! n_relays = 2
//! k_hops = 2
//! dual_mode = 1, 2        # or "none"
//! q = 0.1
//! end_distance = 3
//! eta = 2
//! sigma2 = 1
//! gamma_db = 0
//! splits = equal          # equal | optimized | 0.6,0.4; 0.5,0.5; 1
//! power_grid_db = 0:5:40  # start:step:stop or a comma list
//! seed = 7
//! slots = 1000000
//! branches = 2            # identical copies for multi-branch runs
//! branch_dual_modes = none; 1,2
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::config::{NetworkConfig, SplitTable};
use crate::error::{Error, Result};

/// Where the split weights of a sweep come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitsMode {
    #[default]
    Equal,
    /// Optimized independently at every grid power.
    Optimized,
    /// The explicit table given in the experiment file.
    File,
}

impl SplitsMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitsMode::Equal => "equal",
            SplitsMode::Optimized => "optimized",
            SplitsMode::File => "file",
        }
    }
}

impl FromStr for SplitsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(SplitsMode::Equal),
            "optimized" => Ok(SplitsMode::Optimized),
            "file" => Ok(SplitsMode::File),
            other => Err(Error::InvalidArgument(format!("unknown splits mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub network: NetworkConfig,
    pub power_grid_db: Vec<f64>,
    pub splits: SplitsMode,
    pub seed: u64,
    pub slots: u64,
    /// Branches for multi-branch runs; all copies of `network` unless
    /// `branch_dual_modes` was given.
    pub branches: Vec<NetworkConfig>,
}

impl Experiment {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n_relays = None;
        let mut k_hops = None;
        let mut dual_mode = Vec::new();
        let mut q = None;
        let mut end_distance = None;
        let mut positions = None;
        let mut eta = None;
        let mut sigma2 = None;
        let mut gamma_db = None;
        let mut splits = (SplitsMode::Equal, None);
        let mut grid = Vec::new();
        let mut seed = 1;
        let mut slots = 1_000_000;
        let mut copies = 1;
        let mut branch_sets: Option<Vec<Vec<usize>>> = None;

        for (number, raw) in text.lines().enumerate() {
            let line = number + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| parse_error(line, "expected `key = value`"))?;
            let bad = |what: &str| parse_error(line, &format!("invalid {what} {value:?}"));
            match key {
                "n_relays" => n_relays = Some(value.parse::<usize>().map_err(|_| bad("relay count"))?),
                "k_hops" => k_hops = Some(value.parse::<usize>().map_err(|_| bad("hop count"))?),
                "dual_mode" => dual_mode = relay_set(value).ok_or_else(|| bad("relay set"))?,
                "q" => q = Some(number_value(value).ok_or_else(|| bad("probability"))?),
                "end_distance" => end_distance = Some(number_value(value).ok_or_else(|| bad("distance"))?),
                "positions" => positions = Some(number_list(value).ok_or_else(|| bad("position list"))?),
                "eta" => eta = Some(number_value(value).ok_or_else(|| bad("path-loss exponent"))?),
                "sigma2" => sigma2 = Some(number_value(value).ok_or_else(|| bad("noise power"))?),
                "gamma_db" => gamma_db = Some(number_value(value).ok_or_else(|| bad("threshold"))?),
                "splits" => {
                    splits = match value {
                        "equal" => (SplitsMode::Equal, None),
                        "optimized" => (SplitsMode::Optimized, None),
                        table => {
                            let rows = table
                                .split(';')
                                .map(|row| number_list(row.trim()))
                                .collect::<Option<Vec<_>>>()
                                .ok_or_else(|| bad("split table"))?;
                            (SplitsMode::File, Some((rows, line)))
                        }
                    }
                }
                "power_grid_db" => grid = power_grid(value).ok_or_else(|| bad("power grid"))?,
                "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
                "slots" => slots = value.replace('_', "").parse().map_err(|_| bad("slot count"))?,
                "branches" => copies = value.parse().map_err(|_| bad("branch count"))?,
                "branch_dual_modes" => {
                    branch_sets = Some(
                        value.split(';').map(|s| relay_set(s.trim())).collect::<Option<_>>().ok_or_else(|| bad("branch list"))?,
                    )
                }
                other => return Err(parse_error(line, &format!("unknown key {other:?}"))),
            }
        }

        let n = n_relays.ok_or_else(|| parse_error(0, "missing n_relays"))?;
        let k = k_hops.ok_or_else(|| parse_error(0, "missing k_hops"))?;
        let mut builder = NetworkConfig::builder(n, k).dual_mode(dual_mode);
        if let Some(q) = q {
            builder = builder.q_silent(q);
        }
        if let Some(d) = end_distance {
            builder = builder.end_distance(d);
        }
        if let Some(p) = positions {
            builder = builder.positions(p);
        }
        if let Some(eta) = eta {
            builder = builder.eta(eta);
        }
        if let Some(s) = sigma2 {
            builder = builder.sigma2(s);
        }
        if let Some(g) = gamma_db {
            builder = builder.gamma_db(g);
        }
        if let Some((rows, line)) = splits.1 {
            let table = SplitTable::from_rows(n, k, rows).map_err(|e| parse_error(line, &e.to_string()))?;
            builder = builder.splits(table);
        }
        let network = builder.build()?;
        if copies == 0 {
            return Err(parse_error(0, "branches must be positive"));
        }
        let branches = match branch_sets {
            Some(sets) => sets
                .into_iter()
                .map(|h| network.to_builder().dual_mode(h).build())
                .collect::<Result<Vec<_>>>()?,
            None => vec![network.clone(); copies],
        };
        Ok(Self { network, power_grid_db: grid, splits: splits.0, seed, slots, branches })
    }
}

fn parse_error(line: usize, message: &str) -> Error {
    Error::Parse { line, message: message.to_string() }
}

fn number_value(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn number_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|v| number_value(v.trim())).collect()
}

fn relay_set(s: &str) -> Option<Vec<usize>> {
    if s.is_empty() || s == "none" {
        return Some(Vec::new());
    }
    s.split(',').map(|v| v.trim().parse().ok()).collect()
}

/// `start:step:stop` (inclusive) or a comma list.
fn power_grid(s: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (number_value(start)?, number_value(step)?, number_value(stop)?);
            if step <= 0.0 || stop < start {
                return None;
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            Some((0..=count).map(|i| start + step * i as f64).collect())
        }
        [_] => number_list(s),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: &str = "\
# two relays, two hops
n_relays = 2
k_hops = 2
dual_mode = 1, 2   # both switch
q = 0.1
end_distance = 3
eta = 2
sigma2 = 1
gamma_db = 0
power_grid_db = 0:5:20
seed = 11
slots = 200_000
";

    #[test]
    fn parses_a_full_file() {
        let e = Experiment::parse(TABLE_ONE).unwrap();
        assert_eq!(e.network.n_relays(), 2);
        assert_eq!(e.network.dual_mode(), &[1, 2]);
        assert_eq!(e.network.q_silent(), 0.1);
        assert_eq!(e.network.distance(0, 1), 1.0);
        assert_eq!(e.power_grid_db, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(e.seed, 11);
        assert_eq!(e.slots, 200_000);
        assert_eq!(e.splits, SplitsMode::Equal);
        assert_eq!(e.branches.len(), 1);
    }

    #[test]
    fn explicit_split_table() {
        let e = Experiment::parse("n_relays = 2\nk_hops = 2\nsplits = 0.6,0.4; 0.3,0.7; 1\n").unwrap();
        assert_eq!(e.splits, SplitsMode::File);
        assert_eq!(e.network.splits().rows()[1], vec![0.3, 0.7]);
        let err = Experiment::parse("n_relays = 2\nk_hops = 2\nsplits = 0.6,0.5; 0.3,0.7; 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn branch_lists() {
        let e = Experiment::parse("n_relays = 2\nk_hops = 2\nbranch_dual_modes = none; 1,2\n").unwrap();
        assert_eq!(e.branches.len(), 2);
        assert!(e.branches[0].dual_mode().is_empty());
        assert_eq!(e.branches[1].dual_mode(), &[1, 2]);
        let e = Experiment::parse("n_relays = 2\nk_hops = 2\nbranches = 3\n").unwrap();
        assert_eq!(e.branches.len(), 3);
    }

    #[test]
    fn grids() {
        assert_eq!(power_grid("1, 2.5,4"), Some(vec![1.0, 2.5, 4.0]));
        assert_eq!(power_grid("0:0.1:0.3").unwrap().len(), 4);
        assert_eq!(power_grid("0:-1:3"), None);
        assert_eq!(power_grid(""), None);
    }

    #[test]
    fn reports_line_numbers() {
        let err = Experiment::parse("n_relays = 2\nk_hops = two\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = Experiment::parse("n_relays = 2\nk_hops = 2\ncolour = red\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(matches!(Experiment::parse("k_hops = 2\n"), Err(Error::Parse { .. })));
        assert!(matches!(Experiment::parse("n_relays = 2\nk_hops = 5\n"), Err(Error::InvalidConfig(_))));
    }
}

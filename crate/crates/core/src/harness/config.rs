//! Experiment parameters and their `key = value` file form.

use std::path::{Path as FsPath, PathBuf};

use super::HarnessError;
use crate::baselines::DEFAULT_MAX_SEGMENTS;
use crate::candidates::DEFAULT_MAX_LEN;
use crate::lagrangian::rounds::{DEFAULT_K, DEFAULT_SAMPLE_PER_PAIR};
use crate::lagrangian::{SolverConfig, DEFAULT_EPSILON_STAR, DEFAULT_HARD_CAP, DEFAULT_OUTER_LIMIT, DEFAULT_T_PRIME};
use crate::ruleplane::DEFAULT_PID_SPACE;
use crate::topology::DEFAULT_FREE_CAPACITY;
use crate::workload::KindWeights;

/// Label budget the selection targets; larger than the ingress budget so
/// that long paths exercise nesting.
pub const DEFAULT_SELECTION_M_MAX: usize = 4;
pub const DEFAULT_M_MAX: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: PathBuf,
    /// Uniform free capacity; `None` keeps what the topology file declares.
    pub capacity: Option<u32>,
    /// Read flows from a file instead of generating them.
    pub flows_file: Option<PathBuf>,
    /// Take the desired paths verbatim from a path file (one pseudo-flow
    /// `p<i>` per path). Overrides `flows_file` and generation.
    pub paths_file: Option<PathBuf>,
    /// Use a fixed candidate pool (path file) in every round.
    pub pathlets_file: Option<PathBuf>,
    pub m: usize,
    pub seed: u64,
    pub weights: KindWeights,
    pub k: usize,
    pub max_len: usize,
    pub sample_per_pair: usize,
    pub epsilon_star: f64,
    pub t_prime: usize,
    pub rounds: usize,
    pub hard_cap: usize,
    pub selection_m_max: usize,
    pub m_max: usize,
    pub pid_space: u32,
    pub max_segments: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(topology: impl Into<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            topology: topology.into(),
            capacity: None,
            flows_file: None,
            paths_file: None,
            pathlets_file: None,
            m: 1,
            seed: 0,
            weights: KindWeights::default(),
            k: DEFAULT_K,
            max_len: DEFAULT_MAX_LEN,
            sample_per_pair: DEFAULT_SAMPLE_PER_PAIR,
            epsilon_star: DEFAULT_EPSILON_STAR,
            t_prime: DEFAULT_T_PRIME,
            rounds: DEFAULT_OUTER_LIMIT,
            hard_cap: DEFAULT_HARD_CAP,
            selection_m_max: DEFAULT_SELECTION_M_MAX,
            m_max: DEFAULT_M_MAX,
            pid_space: DEFAULT_PID_SPACE,
            max_segments: DEFAULT_MAX_SEGMENTS,
            out_dir: None,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            epsilon_star: self.epsilon_star,
            t_prime: self.t_prime,
            outer_limit: self.rounds,
            hard_cap: self.hard_cap,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }

    pub fn default_capacity(&self) -> u32 {
        self.capacity.unwrap_or(DEFAULT_FREE_CAPACITY)
    }

    /// Applies one `key = value` setting. File-valued keys are resolved
    /// against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &FsPath) -> Result<(), HarnessError> {
        let bad = || HarnessError::Config(format!("{key}: invalid value `{value}`"));
        let file = || base.join(value);
        macro_rules! num {
            () => {
                value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "topology" => self.topology = file(),
            "capacity" => self.capacity = Some(num!()),
            "flows_file" => self.flows_file = Some(file()),
            "paths_file" => self.paths_file = Some(file()),
            "pathlets_file" => self.pathlets_file = Some(file()),
            "m" => self.m = num!(),
            "seed" => self.seed = num!(),
            "weights" => {
                let w: Vec<f64> = value
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                if w.len() != 4 || w.iter().any(|&x| x < 0.0) || w.iter().all(|&x| x == 0.0) {
                    return Err(bad());
                }
                self.weights = KindWeights([w[0], w[1], w[2], w[3]]);
            }
            "k" => self.k = num!(),
            "max_len" => self.max_len = num!(),
            "sample_per_pair" => self.sample_per_pair = num!(),
            "epsilon_star" => self.epsilon_star = num!(),
            "t_prime" => self.t_prime = num!(),
            "rounds" => self.rounds = num!(),
            "hard_cap" => self.hard_cap = num!(),
            "selection_m_max" => self.selection_m_max = num!(),
            "m_max" => self.m_max = num!(),
            "pid_space" => self.pid_space = num!(),
            "max_segments" => self.max_segments = num!(),
            "out_dir" => self.out_dir = Some(file()),
            _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses a config file; `topology` is required. Relative file names
    /// are taken relative to `base` (normally the config file's directory).
    pub fn from_kv(text: &str, base: &FsPath) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::new(PathBuf::new());
        let mut have_topology = false;
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            have_topology |= k == "topology";
            cfg.set(k, v.trim(), base)?;
        }
        if !have_topology {
            return Err(HarnessError::Config("missing key `topology`".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.m == 0 && self.flows_file.is_none() && self.paths_file.is_none() {
            return fail("m must be at least 1");
        }
        if self.selection_m_max < 2 {
            return fail("selection_m_max must be at least 2");
        }
        if self.m_max < 1 {
            return fail("m_max must be at least 1");
        }
        if self.t_prime < 1 {
            return fail("t_prime must be at least 1");
        }
        if self.epsilon_star < 0.0 {
            return fail("epsilon_star must be non-negative");
        }
        if self.pid_space < 1 || self.max_segments < 1 || self.max_len < 1 {
            return fail("pid_space, max_segments and max_len must be at least 1");
        }
        for f in [
            Some(&self.topology),
            self.flows_file.as_ref(),
            self.paths_file.as_ref(),
            self.pathlets_file.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !f.exists() {
                return Err(HarnessError::Config(format!("file not found: {}", f.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.txt"), "a b\n").unwrap();
        let cfg = ExperimentConfig::from_kv(
            "# demo\ntopology = t.txt\nm = 2\nseed = 5\nrounds = 0\nweights = 1,0,0,1\ncapacity = 7\n",
            dir.path(),
        )
        .unwrap();
        assert_eq!(cfg.m, 2);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.rounds, 0);
        assert_eq!(cfg.capacity, Some(7));
        assert_eq!(cfg.weights, KindWeights([1.0, 0.0, 0.0, 1.0]));
        assert_eq!(cfg.topology, dir.path().join("t.txt"));
        assert_eq!(cfg.solver().outer_limit, 0);

        let err = |text: &str| ExperimentConfig::from_kv(text, dir.path()).unwrap_err().to_string();
        assert!(err("m = 2\n").contains("topology"));
        assert!(err("topology = t.txt\nbogus = 1\n").contains("unknown key"));
        assert!(err("topology = t.txt\nm = x\n").contains("invalid value"));
        assert!(err("topology = missing.txt\n").contains("not found"));
        assert!(err("topology = t.txt\nselection_m_max = 1\n").contains("selection_m_max"));
    }
}

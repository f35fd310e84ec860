//! The pathlet selection problem as data: instance, solution, constraint
//! checker, objective, and an exhaustive solver for small instances.
//!
//! Variables: `x[P]` lists candidates used in path `P`'s concatenation,
//! `y[P]` is true when `P` is left unconcatenated, `t[S]` marks selected
//! candidates. Constraints checked:
//!
//! * EdgeCover: each link of the network is covered at most `b_{e,P}` times
//!   by `P`'s pathlets.
//! * LengthMatch: `l_P (1 - y_P) = sum_S l_S x_{S,P}`.
//! * LabelBound: at most `m_max` pathlets per path.
//! * Linking: `sum_P x_{S,P} <= |P^D| t_S`.
//! * Capacity: `sum_S d_{v,S} t_S <= c_v`.

use std::collections::HashMap;

use thiserror::Error;

use crate::path::{parse_path_file, Path, Pathlet};
use crate::tiling::{all_tilings, Segment, SegmentIndex};
use crate::topology::{NodeId, Topology};

pub const DEFAULT_MAX_CANDIDATES: usize = 18;
pub const DEFAULT_MAX_PATHS: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance too large for exhaustive search ({candidates} candidates, {paths} paths)")]
    TooLarge { candidates: usize, paths: usize },
    #[error("m_max must be at least 2, got {0}")]
    InvalidMaxLabels(usize),
    #[error("candidate {0} is a representative; selection takes concrete pathlets")]
    NotConcrete(usize),
    #[error("node {0} has no capacity entry")]
    MissingCapacity(NodeId),
    #[error("bundle: {0}")]
    Bundle(String),
}

/// P^D, S^C, per-node free capacity and the label bound.
#[derive(Debug, Clone)]
pub struct SelectionInstance {
    pub paths: Vec<Path>,
    pub candidates: Vec<Pathlet>,
    pub capacities: Vec<u32>,
    pub m_max: usize,
    segments: Vec<Vec<Segment>>,
    popularity: Vec<u32>,
}

impl SelectionInstance {
    pub fn new(
        paths: Vec<Path>,
        candidates: Vec<Pathlet>,
        capacities: Vec<u32>,
        m_max: usize,
    ) -> Result<SelectionInstance, SelectionError> {
        if m_max < 2 {
            return Err(SelectionError::InvalidMaxLabels(m_max));
        }
        if let Some(i) = candidates.iter().position(|c| c.is_representative()) {
            return Err(SelectionError::NotConcrete(i));
        }
        for n in paths
            .iter()
            .flat_map(|p| p.nodes())
            .chain(candidates.iter().flat_map(|c| c.nodes()))
        {
            if n.index() >= capacities.len() {
                return Err(SelectionError::MissingCapacity(*n));
            }
        }
        let index = SegmentIndex::new(&candidates);
        let segments: Vec<Vec<Segment>> = paths.iter().map(|p| index.segments(p)).collect();
        let mut popularity = vec![0u32; candidates.len()];
        for seg in segments.iter().flatten() {
            popularity[seg.cand] += 1;
        }
        Ok(SelectionInstance {
            paths,
            candidates,
            capacities,
            m_max,
            segments,
            popularity,
        })
    }

    /// Candidates usable by path `p`, as positioned segments. Only
    /// sub-paths of `p` can take `x = 1` without breaking EdgeCover.
    pub fn segments(&self, p: usize) -> &[Segment] {
        &self.segments[p]
    }

    /// Number of instance paths containing candidate `s` as a sub-path.
    pub fn popularity(&self, s: usize) -> u32 {
        self.popularity[s]
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    /// The trivially feasible all-unconcatenated solution.
    pub fn empty_solution(&self) -> SelectionSolution {
        SelectionSolution {
            x: vec![Vec::new(); self.paths.len()],
            y: vec![true; self.paths.len()],
            t: vec![false; self.candidates.len()],
        }
    }

    /// Rule demand of the selected candidates on every node.
    pub fn load(&self, t: &[bool]) -> Vec<u32> {
        let mut load = vec![0u32; self.capacities.len()];
        for (c, _) in self.candidates.iter().zip(t).filter(|(_, &on)| on) {
            for v in c.rule_nodes() {
                load[v.index()] += 1;
            }
        }
        load
    }
}

/// Decision variables. `x[p]` holds candidate indices with `x_{S,P} = 1`;
/// a repeated index stands for a value of 2 and is reported as Binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSolution {
    pub x: Vec<Vec<usize>>,
    pub y: Vec<bool>,
    pub t: Vec<bool>,
}

impl SelectionSolution {
    /// Candidates with t = 1.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.t.len()).filter(|&s| self.t[s]).collect()
    }

    /// Candidates used by at least one concatenation.
    pub fn used(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self.x.iter().flatten().copied().collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn concatenated(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&p| !self.y[p]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    EdgeCover,
    LengthMatch,
    LabelBound,
    Linking,
    Capacity,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    PathLink { path: usize, tail: NodeId, head: NodeId },
    Path(usize),
    Candidate(usize),
    Node(NodeId),
    PathCandidate { path: usize, candidate: usize },
}

/// One violated constraint instance; `slack` is `rhs - lhs` (negative) for
/// inequalities and the signed difference for equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub entity: Entity,
    pub slack: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, c: Constraint) -> usize {
        self.violations.iter().filter(|v| v.constraint == c).count()
    }
}

/// Evaluate every constraint instance and list the violated ones.
pub fn check_feasible(inst: &SelectionInstance, sol: &SelectionSolution) -> Result<ViolationReport, SelectionError> {
    let (np, ns) = (inst.paths.len(), inst.candidates.len());
    if sol.x.len() != np || sol.y.len() != np {
        return Err(SelectionError::DimensionMismatch(format!(
            "{np} paths but x has {} rows and y {} entries",
            sol.x.len(),
            sol.y.len()
        )));
    }
    if sol.t.len() != ns {
        return Err(SelectionError::DimensionMismatch(format!(
            "{ns} candidates but t has {} entries",
            sol.t.len()
        )));
    }
    if let Some(&bad) = sol.x.iter().flatten().find(|&&s| s >= ns) {
        return Err(SelectionError::DimensionMismatch(format!(
            "x references candidate {bad}"
        )));
    }

    let mut report = ViolationReport::default();
    let mut push = |constraint, entity, slack| {
        report.violations.push(Violation {
            constraint,
            entity,
            slack,
        })
    };
    let mut usage = vec![0i64; ns];

    for (p, path) in inst.paths.iter().enumerate() {
        let row = &sol.x[p];
        let mut counts: HashMap<usize, i64> = HashMap::new();
        for &s in row {
            *counts.entry(s).or_default() += 1;
            usage[s] += 1;
        }
        let mut dup: Vec<(usize, i64)> = counts.into_iter().filter(|&(_, c)| c > 1).collect();
        dup.sort_unstable();
        for (s, c) in dup {
            push(
                Constraint::Binary,
                Entity::PathCandidate { path: p, candidate: s },
                1 - c,
            );
        }

        let mut link_cover: HashMap<(NodeId, NodeId), i64> = HashMap::new();
        for &s in row {
            for l in inst.candidates[s].route().links() {
                *link_cover.entry(l).or_default() += 1;
            }
        }
        let mut covered: Vec<_> = link_cover.into_iter().collect();
        covered.sort_unstable();
        for ((tail, head), c) in covered {
            let b = path.contains_link(tail, head) as i64;
            if c > b {
                push(Constraint::EdgeCover, Entity::PathLink { path: p, tail, head }, b - c);
            }
        }

        let lhs = path.len() as i64 * (1 - sol.y[p] as i64);
        let rhs: i64 = row.iter().map(|&s| inst.candidates[s].len() as i64).sum();
        if lhs != rhs {
            push(Constraint::LengthMatch, Entity::Path(p), lhs - rhs);
        }
        if row.len() > inst.m_max {
            push(
                Constraint::LabelBound,
                Entity::Path(p),
                inst.m_max as i64 - row.len() as i64,
            );
        }
    }

    for (s, &u) in usage.iter().enumerate() {
        let cap = np as i64 * sol.t[s] as i64;
        if u > cap {
            push(Constraint::Linking, Entity::Candidate(s), cap - u);
        }
    }

    for (v, (&load, &cap)) in inst.load(&sol.t).iter().zip(&inst.capacities).enumerate() {
        if load > cap {
            push(
                Constraint::Capacity,
                Entity::Node(NodeId(v as u32)),
                cap as i64 - load as i64,
            );
        }
    }
    Ok(report)
}

/// Paths with `y = 0` whose x-support is not an ordered head-to-tail tiling.
/// Kept next to the raw check so any divergence between the two is visible.
pub fn ordered_tiling_divergences(inst: &SelectionInstance, sol: &SelectionSolution) -> Vec<usize> {
    let mut out = Vec::new();
    for (p, path) in inst.paths.iter().enumerate() {
        if sol.y[p] {
            continue;
        }
        let mut placed: Vec<(usize, usize)> = Vec::new();
        let mut ok = true;
        for &s in &sol.x[p] {
            match path.find_subpath(inst.candidates[s].nodes()) {
                Some(start) => placed.push((start, start + inst.candidates[s].len())),
                None => ok = false,
            }
        }
        placed.sort_unstable();
        let mut pos = 0;
        for (a, b) in placed {
            ok &= a == pos;
            pos = b;
        }
        ok &= pos == path.len();
        if !ok {
            out.push(p);
        }
    }
    out
}

/// Number of unconcatenated paths.
pub fn objective(sol: &SelectionSolution) -> usize {
    sol.y.iter().filter(|&&y| y).count()
}

#[derive(Debug, Clone, Copy)]
pub struct ExactLimits {
    pub max_candidates: usize,
    pub max_paths: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_candidates: DEFAULT_MAX_CANDIDATES,
            max_paths: DEFAULT_MAX_PATHS,
        }
    }
}

/// Exhaustive optimum: minimizes unconcatenated paths, then the number of
/// selected candidates. Subsets are visited by increasing cardinality
/// (ascending bitmask within a cardinality); capacity-infeasible subsets are
/// skipped.
pub fn exact_solve(inst: &SelectionInstance, limits: ExactLimits) -> Result<SelectionSolution, SelectionError> {
    let (np, ns) = (inst.paths.len(), inst.candidates.len());
    if ns > limits.max_candidates || np > limits.max_paths || ns > 63 {
        return Err(SelectionError::TooLarge {
            candidates: ns,
            paths: np,
        });
    }
    let tilings: Vec<Vec<(u64, Vec<usize>)>> = (0..np)
        .map(|p| {
            let mut ts: Vec<(u64, Vec<usize>)> = all_tilings(inst.segments(p), inst.paths[p].len(), inst.m_max)
                .into_iter()
                .map(|parts| (parts.iter().fold(0u64, |m, &s| m | 1 << s), parts))
                .collect();
            ts.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.1.cmp(&b.1)));
            ts
        })
        .collect();
    let demand: Vec<&[NodeId]> = inst.candidates.iter().map(|c| c.rule_nodes()).collect();
    let fits = |mask: u64| {
        let mut load = vec![0u32; inst.capacities.len()];
        for (s, nodes) in demand.iter().enumerate() {
            if mask >> s & 1 == 1 {
                for v in *nodes {
                    load[v.index()] += 1;
                    if load[v.index()] > inst.capacities[v.index()] {
                        return false;
                    }
                }
            }
        }
        true
    };
    let uncovered = |mask: u64| {
        tilings
            .iter()
            .filter(|ts| !ts.iter().any(|(m, _)| m & !mask == 0))
            .count()
    };

    let mut best_mask = 0u64;
    let mut best_y = uncovered(0);
    'outer: for k in 1..=ns {
        let mut mask: u64 = (1u64 << k) - 1;
        let limit = 1u64 << ns;
        while mask < limit {
            if fits(mask) {
                let y = uncovered(mask);
                if y < best_y {
                    best_y = y;
                    best_mask = mask;
                    if y == 0 {
                        break 'outer;
                    }
                }
            }
            // Gosper's hack: next mask with the same popcount.
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }

    let mut sol = inst.empty_solution();
    for (s, t) in sol.t.iter_mut().enumerate() {
        *t = best_mask >> s & 1 == 1;
    }
    for (p, ts) in tilings.iter().enumerate() {
        if let Some((_, parts)) = ts.iter().find(|(m, _)| m & !best_mask == 0) {
            sol.x[p] = parts.clone();
            sol.y[p] = false;
        }
    }
    Ok(sol)
}

/// A selection fixture read from a `key = value` bundle file.
#[derive(Debug, Clone)]
pub struct InstanceBundle {
    pub topology: Topology,
    pub instance: SelectionInstance,
}

/// Keys: `topology`, `paths`, `candidates` (file names relative to `dir`),
/// `m_max`, optional `capacity` (uniform) and `capacity.<node>` overrides.
pub fn load_bundle(text: &str, dir: &std::path::Path) -> Result<InstanceBundle, crate::Error> {
    let mut kv: Vec<(String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| SelectionError::Bundle(format!("line {}: expected key = value", i + 1)))?;
        kv.push((k.trim().to_string(), v.trim().to_string()));
    }
    let get = |key: &str| kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let need = |key: &str| get(key).ok_or_else(|| SelectionError::Bundle(format!("missing key {key}")));
    let read = |key: &str| -> Result<String, crate::Error> { Ok(std::fs::read_to_string(dir.join(need(key)?))?) };
    let num = |key: &str, v: &str| -> Result<u32, SelectionError> {
        v.parse()
            .map_err(|_| SelectionError::Bundle(format!("{key}: not an integer: {v}")))
    };

    let mut topology = Topology::parse(&read("topology")?)?;
    if let Some(c) = get("capacity") {
        topology = topology.with_uniform_capacity(num("capacity", c)?);
    }
    let mut overrides = Vec::new();
    for (k, v) in &kv {
        if let Some(name) = k.strip_prefix("capacity.") {
            overrides.push((topology.id(name)?, num(k, v)?));
        }
    }
    let topology = topology.with_capacity_overrides(&overrides);
    let paths = parse_path_file(&topology, &read("paths")?)?;
    let candidates = parse_path_file(&topology, &read("candidates")?)?
        .into_iter()
        .map(Pathlet::concrete)
        .collect();
    let m_max = num("m_max", need("m_max")?)? as usize;
    let instance = SelectionInstance::new(paths, candidates, topology.capacities().to_vec(), m_max)?;
    Ok(InstanceBundle { topology, instance })
}

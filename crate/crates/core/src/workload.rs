//! Typed flows and the desired path set derived from them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::path::Path;
use crate::routing;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowKind {
    Protected,
    Suspicious,
    Bulk,
    TimeSensitive,
}

impl FlowKind {
    pub const ALL: [FlowKind; 4] = [
        FlowKind::Protected,
        FlowKind::Suspicious,
        FlowKind::Bulk,
        FlowKind::TimeSensitive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Protected => "protected",
            FlowKind::Suspicious => "suspicious",
            FlowKind::Bulk => "bulk",
            FlowKind::TimeSensitive => "time_sensitive",
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowKind {
    type Err = WorkloadError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FlowKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| WorkloadError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSpec {
    pub fid: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: FlowKind,
    /// Set for suspicious flows only.
    pub waypoint: Option<NodeId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("no path from {0} to {1}")]
    NoPath(NodeId, NodeId),
    #[error("no two link-disjoint paths from {src} to {dst}; keeping one")]
    NoDisjointPair { src: NodeId, dst: NodeId, fallback: Path },
    #[error("no simple path from {0} to {1} through any waypoint")]
    NoWaypointPath(NodeId, NodeId),
    #[error("unknown flow kind `{0}`")]
    UnknownKind(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("flow {0}: {1}")]
    InvalidFlow(String, String),
}

/// Relative frequency of each flow kind, in [`FlowKind::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindWeights(pub [f64; 4]);

impl Default for KindWeights {
    fn default() -> Self {
        KindWeights([1.0; 4])
    }
}

/// `m` flows for every ordered node pair, kinds drawn uniformly.
pub fn gen_flows(topology: &Topology, m: usize, seed: u64) -> Vec<FlowSpec> {
    gen_flows_weighted(topology, m, seed, KindWeights::default())
}

pub fn gen_flows_weighted(topology: &Topology, m: usize, seed: u64, weights: KindWeights) -> Vec<FlowSpec> {
    let pairs: Vec<(NodeId, NodeId)> = topology
        .nodes()
        .flat_map(|s| topology.nodes().filter(move |&d| d != s).map(move |d| (s, d)))
        .collect();
    gen_flows_between(topology, &pairs, m, seed, weights)
}

/// `m` flows for each listed pair. Flow `i` draws from its own RNG stream,
/// so the result does not depend on evaluation order.
pub fn gen_flows_between(
    topology: &Topology,
    pairs: &[(NodeId, NodeId)],
    m: usize,
    seed: u64,
    weights: KindWeights,
) -> Vec<FlowSpec> {
    let dist = WeightedIndex::new(weights.0).expect("kind weights must be positive somewhere");
    let mut flows = Vec::with_capacity(pairs.len() * m);
    for &(src, dst) in pairs {
        for _ in 0..m {
            let idx = flows.len();
            let mut rng = flow_rng(seed, idx as u64);
            let kind = FlowKind::ALL[dist.sample(&mut rng)];
            let waypoint = match kind {
                FlowKind::Suspicious => {
                    let others: Vec<NodeId> = topology.nodes().filter(|&v| v != src && v != dst).collect();
                    others.choose(&mut rng).copied()
                }
                _ => None,
            };
            flows.push(FlowSpec {
                fid: format!("f{idx}"),
                src,
                dst,
                kind,
                waypoint,
            });
        }
    }
    flows
}

fn flow_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The path(s) a flow's policy asks for.
pub fn policy_path(topology: &Topology, flow: &FlowSpec) -> Result<Vec<Path>, WorkloadError> {
    let (src, dst) = (flow.src, flow.dst);
    let none = BTreeSet::new();
    if routing::shortest_hops(topology, src, dst, &none).is_none() {
        return Err(WorkloadError::NoPath(src, dst));
    }
    match flow.kind {
        FlowKind::TimeSensitive => Ok(vec![routing::lowest_latency(topology, src, dst).unwrap()]),
        FlowKind::Bulk => Ok(vec![routing::widest_path(topology, src, dst).unwrap()]),
        FlowKind::Protected => {
            let mut pair = routing::link_disjoint_pair(topology, src, dst);
            if pair.len() == 2 {
                Ok(pair)
            } else {
                Err(WorkloadError::NoDisjointPair {
                    src,
                    dst,
                    fallback: pair.remove(0),
                })
            }
        }
        FlowKind::Suspicious => waypoint_path(topology, flow).map(|p| vec![p]),
    }
}

/// Shortest src->w followed by shortest w->dst. If the join is not simple
/// the second leg is recomputed avoiding the first leg's nodes (and then the
/// other way round); failing both, the next waypoint in node order is tried.
fn waypoint_path(t: &Topology, flow: &FlowSpec) -> Result<Path, WorkloadError> {
    let (src, dst) = (flow.src, flow.dst);
    let order: Vec<NodeId> = t.nodes().filter(|&v| v != src && v != dst).collect();
    let start = flow
        .waypoint
        .and_then(|w| order.iter().position(|&v| v == w))
        .unwrap_or(0);
    let none = BTreeSet::new();
    for off in 0..order.len() {
        let w = order[(start + off) % order.len()];
        let (Some(first), Some(second)) = (
            routing::shortest_hops(t, src, w, &none),
            routing::shortest_hops(t, w, dst, &none),
        ) else {
            continue;
        };
        if let Some(p) = join(&first, &second) {
            return Ok(p);
        }
        let avoid: BTreeSet<NodeId> = first.nodes()[..first.nodes().len() - 1].iter().copied().collect();
        if let Some(p) = routing::shortest_hops(t, w, dst, &avoid).and_then(|s| join(&first, &s)) {
            return Ok(p);
        }
        let avoid: BTreeSet<NodeId> = second.nodes()[1..].iter().copied().collect();
        if let Some(p) = routing::shortest_hops(t, src, w, &avoid).and_then(|f| join(&f, &second)) {
            return Ok(p);
        }
    }
    Err(WorkloadError::NoWaypointPath(src, dst))
}

fn join(a: &Path, b: &Path) -> Option<Path> {
    let mut nodes = a.nodes().to_vec();
    nodes.extend_from_slice(&b.nodes()[1..]);
    Path::from_simple_nodes(nodes).ok()
}

/// One retained policy path.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPath {
    pub path: Path,
    /// Index of the originating flow in [`DesiredPathSet::flows`].
    pub flow: usize,
    /// Flow-rule match key: the fid, suffixed `/1` for a protected flow's
    /// second path.
    pub tag: String,
}

/// P^D: policy paths, distinct per (src, dst) pair.
#[derive(Debug, Clone, Default)]
pub struct DesiredPathSet {
    pub flows: Vec<FlowSpec>,
    pub entries: Vec<DesiredPath>,
    pub warnings: Vec<String>,
}

impl DesiredPathSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn paths(&self) -> Vec<Path> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }

    pub fn flow_of(&self, entry: usize) -> &FlowSpec {
        &self.flows[self.entries[entry].flow]
    }

    /// A set whose entries are given paths, one pseudo-flow per path.
    pub fn from_paths(paths: Vec<Path>) -> DesiredPathSet {
        let mut set = DesiredPathSet::default();
        let mut seen = HashSet::new();
        for p in paths {
            if !seen.insert(p.nodes().to_vec()) {
                continue;
            }
            let i = set.flows.len();
            let fid = format!("p{i}");
            set.flows.push(FlowSpec {
                fid: fid.clone(),
                src: p.head(),
                dst: p.tail(),
                kind: FlowKind::TimeSensitive,
                waypoint: None,
            });
            set.entries.push(DesiredPath {
                path: p,
                flow: i,
                tag: fid,
            });
        }
        set
    }
}

/// Union of all policy paths, de-duplicated by node sequence. Policy
/// failures become warnings; a protected flow without a disjoint pair keeps
/// its single path.
pub fn build_desired_set(topology: &Topology, flows: &[FlowSpec]) -> DesiredPathSet {
    let outcomes: Vec<Result<Vec<Path>, WorkloadError>> = flows.par_iter().map(|f| policy_path(topology, f)).collect();
    let mut set = DesiredPathSet {
        flows: flows.to_vec(),
        ..Default::default()
    };
    // Node sequences fix (src, dst), so one global set is a per-pair dedupe.
    let mut seen: HashSet<Vec<NodeId>> = HashSet::new();
    for (fi, (flow, outcome)) in flows.iter().zip(outcomes).enumerate() {
        let paths = match outcome {
            Ok(ps) => ps,
            Err(WorkloadError::NoDisjointPair { fallback, .. }) => {
                set.warnings
                    .push(format!("{}: no disjoint pair, keeping one path", flow.fid));
                vec![fallback]
            }
            Err(e) => {
                set.warnings.push(format!("{}: {e}", flow.fid));
                continue;
            }
        };
        for (i, p) in paths.into_iter().enumerate() {
            if seen.insert(p.nodes().to_vec()) {
                let tag = if i == 0 {
                    flow.fid.clone()
                } else {
                    format!("{}/{i}", flow.fid)
                };
                set.entries.push(DesiredPath { path: p, flow: fi, tag });
            }
        }
    }
    set
}

/// Flow file: one `fid src dst kind [waypoint]` per line, `#` comments.
pub fn parse_flows(topology: &Topology, text: &str) -> Result<Vec<FlowSpec>, crate::Error> {
    let mut flows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        if !(4..=5).contains(&tok.len()) {
            return Err(WorkloadError::Parse {
                line: i + 1,
                reason: format!("expected 4 or 5 fields, found {}", tok.len()),
            }
            .into());
        }
        let src = topology.id(tok[1])?;
        let dst = topology.id(tok[2])?;
        let kind: FlowKind = tok[3].parse()?;
        let waypoint = tok.get(4).map(|w| topology.id(w)).transpose()?;
        let flow = FlowSpec {
            fid: tok[0].to_string(),
            src,
            dst,
            kind,
            waypoint,
        };
        validate_flow(&flow)?;
        flows.push(flow);
    }
    Ok(flows)
}

pub fn validate_flow(f: &FlowSpec) -> Result<(), WorkloadError> {
    if f.src == f.dst {
        return Err(WorkloadError::InvalidFlow(f.fid.clone(), "src equals dst".into()));
    }
    if let Some(w) = f.waypoint {
        if w == f.src || w == f.dst {
            return Err(WorkloadError::InvalidFlow(
                f.fid.clone(),
                "waypoint is an endpoint".into(),
            ));
        }
        if f.kind != FlowKind::Suspicious {
            return Err(WorkloadError::InvalidFlow(
                f.fid.clone(),
                "only suspicious flows take a waypoint".into(),
            ));
        }
    }
    Ok(())
}

pub fn write_flows(topology: &Topology, flows: &[FlowSpec]) -> String {
    let mut s = String::new();
    for f in flows {
        s.push_str(&format!(
            "{} {} {} {}",
            f.fid,
            topology.name(f.src),
            topology.name(f.dst),
            f.kind
        ));
        if let Some(w) = f.waypoint {
            s.push(' ');
            s.push_str(topology.name(w));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Worked-example network; the e-branch is thin, the g-branch wide.
    pub(crate) const WORKED_ATTRS: &str = "directed\n\
        a b 1 1 100\nb c 1 1 100\nc g 1 1 100\ng f 1 1 100\n\
        a d 1 1 50\nd c 1 1 50\nc e 1 1 50\ne f 1 1 50\n";

    fn worked() -> Topology {
        Topology::parse(WORKED_ATTRS).unwrap()
    }

    fn flow(t: &Topology, kind: FlowKind, w: Option<&str>) -> FlowSpec {
        FlowSpec {
            fid: format!("{kind}"),
            src: t.id("a").unwrap(),
            dst: t.id("f").unwrap(),
            kind,
            waypoint: w.map(|w| t.id(w).unwrap()),
        }
    }

    fn show(t: &Topology, ps: &[Path]) -> Vec<String> {
        ps.iter().map(|p| t.format_nodes(p.nodes())).collect()
    }

    #[test]
    fn flows_per_pair_and_determinism() {
        let t = Topology::parse("a b").unwrap();
        assert_eq!(gen_flows(&t, 1, 5).len(), 2);
        let f = worked();
        let pair = [(f.id("a").unwrap(), f.id("f").unwrap())];
        let flows = gen_flows_between(&f, &pair, 4, 9, KindWeights::default());
        assert_eq!(flows.len(), 4);
        assert!(flows.iter().all(|x| x.src == pair[0].0 && x.dst == pair[0].1));
        assert_eq!(flows, gen_flows_between(&f, &pair, 4, 9, KindWeights::default()));
        for x in gen_flows(&f, 3, 1) {
            validate_flow(&x).unwrap();
            assert_eq!(x.waypoint.is_some(), x.kind == FlowKind::Suspicious);
        }
    }

    #[test]
    fn weights_select_kinds() {
        let f = worked();
        let flows = gen_flows_weighted(&f, 2, 3, KindWeights([0.0, 0.0, 1.0, 0.0]));
        assert!(flows.iter().all(|x| x.kind == FlowKind::Bulk));
    }

    #[test]
    fn policy_paths_on_worked_example() {
        let t = worked();
        let ts = policy_path(&t, &flow(&t, FlowKind::TimeSensitive, None)).unwrap();
        assert_eq!(show(&t, &ts), vec!["a b c e f"]);
        let pr = policy_path(&t, &flow(&t, FlowKind::Protected, None)).unwrap();
        assert_eq!(show(&t, &pr), vec!["a b c e f", "a d c g f"]);
        let su = policy_path(&t, &flow(&t, FlowKind::Suspicious, Some("d"))).unwrap();
        assert_eq!(show(&t, &su), vec!["a d c e f"]);
        let bu = policy_path(&t, &flow(&t, FlowKind::Bulk, None)).unwrap();
        assert_eq!(show(&t, &bu), vec!["a b c g f"]);
    }

    #[test]
    fn policy_errors() {
        let t = worked();
        let mut back = flow(&t, FlowKind::TimeSensitive, None);
        std::mem::swap(&mut back.src, &mut back.dst);
        assert!(matches!(policy_path(&t, &back), Err(WorkloadError::NoPath(_, _))));
        let line = Topology::parse("directed\na b\nb c\n").unwrap();
        let f = FlowSpec {
            fid: "x".into(),
            src: line.id("a").unwrap(),
            dst: line.id("c").unwrap(),
            kind: FlowKind::Protected,
            waypoint: None,
        };
        match policy_path(&line, &f) {
            Err(WorkloadError::NoDisjointPair { fallback, .. }) => assert_eq!(fallback.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        // Waypoint off every a->c route: next waypoint (b) is taken instead.
        let t2 = Topology::parse("directed\na b\nb c\nx a\n").unwrap();
        let f = FlowSpec {
            fid: "s".into(),
            src: t2.id("a").unwrap(),
            dst: t2.id("c").unwrap(),
            kind: FlowKind::Suspicious,
            waypoint: Some(t2.id("x").unwrap()),
        };
        assert_eq!(show(&t2, &policy_path(&t2, &f).unwrap()), vec!["a b c"]);
        let t3 = Topology::parse("directed\na c\nx a\n").unwrap();
        let f = FlowSpec {
            src: t3.id("a").unwrap(),
            dst: t3.id("c").unwrap(),
            waypoint: Some(t3.id("x").unwrap()),
            ..f
        };
        assert!(matches!(policy_path(&t3, &f), Err(WorkloadError::NoWaypointPath(_, _))));
    }

    #[test]
    fn desired_set_worked_example() {
        let t = worked();
        let flows = vec![
            flow(&t, FlowKind::TimeSensitive, None),
            flow(&t, FlowKind::Bulk, None),
            flow(&t, FlowKind::Protected, None),
            flow(&t, FlowKind::Suspicious, Some("d")),
        ];
        let set = build_desired_set(&t, &flows);
        let mut got = show(&t, &set.paths());
        got.sort();
        assert_eq!(got, vec!["a b c e f", "a b c g f", "a d c e f", "a d c g f"]);
        assert!(set.warnings.is_empty());
        assert_eq!(set.flow_of(0).kind, FlowKind::TimeSensitive);

        let dup = build_desired_set(&t, &[flows[0].clone(), flows[0].clone()]);
        assert_eq!(dup.len(), 1);
        assert!(build_desired_set(&t, &[]).is_empty());
    }

    #[test]
    fn flow_file_round_trip() {
        let t = worked();
        let flows = gen_flows(&t, 2, 11);
        let text = write_flows(&t, &flows);
        assert_eq!(parse_flows(&t, &text).unwrap(), flows);
        assert!(parse_flows(&t, "f0 a a bulk").is_err());
        assert!(parse_flows(&t, "f0 a f nope").is_err());
    }
}

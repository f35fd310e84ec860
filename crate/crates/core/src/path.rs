//! Simple paths and pathlets.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::topology::{NodeId, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("a path needs at least two nodes, got {0}")]
    TooShort(usize),
    #[error("node {0} repeats; paths must be simple")]
    NotSimple(NodeId),
    #[error("no link {0} -> {1}")]
    MissingLink(NodeId, NodeId),
}

/// An ordered, duplicate-free node sequence whose consecutive pairs are
/// links of some topology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    /// Validate `nodes` against `topology`.
    pub fn new(topology: &Topology, nodes: Vec<NodeId>) -> Result<Path, PathError> {
        let path = Path::from_simple_nodes(nodes)?;
        for (t, h) in path.links() {
            if !topology.has_link(t, h) {
                return Err(PathError::MissingLink(t, h));
            }
        }
        Ok(path)
    }

    /// Validate by node names.
    pub fn from_names<S: AsRef<str>>(topology: &Topology, names: &[S]) -> Result<Path, crate::Error> {
        let ids = topology.ids(names)?;
        Ok(Path::new(topology, ids)?)
    }

    /// Checks length and simplicity only. Callers guarantee the links.
    pub fn from_simple_nodes(nodes: Vec<NodeId>) -> Result<Path, PathError> {
        if nodes.len() < 2 {
            return Err(PathError::TooShort(nodes.len()));
        }
        let mut sorted = nodes.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(PathError::NotSimple(w[0]));
        }
        Ok(Path { nodes })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Link count.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Always false; a path has at least one link.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn head(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn tail(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn contains_link(&self, tail: NodeId, head: NodeId) -> bool {
        self.position(tail)
            .is_some_and(|i| self.nodes.get(i + 1) == Some(&head))
    }

    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == v)
    }

    /// Index in `self` where `other` starts as a contiguous run, if it does.
    pub fn find_subpath(&self, other: &[NodeId]) -> Option<usize> {
        let start = self.position(*other.first()?)?;
        let end = start + other.len();
        (end <= self.nodes.len() && &self.nodes[start..end] == other).then_some(start)
    }

    /// Contiguous sub-path covering links `from..to` (node indices `from..=to`).
    pub fn slice(&self, from: usize, to: usize) -> Path {
        Path {
            nodes: self.nodes[from..=to].to_vec(),
        }
    }
}

/// Whether the pathlet's nodes appear contiguously in `path`. Improper
/// sub-paths (equal sequences) count.
pub fn is_subpath(pathlet: &Pathlet, path: &Path) -> bool {
    path.find_subpath(pathlet.nodes()).is_some()
}

/// Locally scoped pathlet label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pid(pub u32);

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathletKind {
    Concrete,
    /// Stands for the listed pathlets (indices into the owning
    /// [`PathletSet`]), unfolded at its start node.
    Representative(Vec<usize>),
}

/// A sub-path that can be preinstalled in the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pathlet {
    route: Path,
    pub pid: Option<Pid>,
    kind: PathletKind,
}

impl Pathlet {
    pub fn concrete(route: Path) -> Pathlet {
        Pathlet {
            route,
            pid: None,
            kind: PathletKind::Concrete,
        }
    }

    pub fn route(&self) -> &Path {
        &self.route
    }

    pub fn nodes(&self) -> &[NodeId] {
        self.route.nodes()
    }

    pub fn len(&self) -> usize {
        self.route.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn head(&self) -> NodeId {
        self.route.head()
    }

    pub fn tail(&self) -> NodeId {
        self.route.tail()
    }

    pub fn kind(&self) -> &PathletKind {
        &self.kind
    }

    pub fn is_representative(&self) -> bool {
        matches!(self.kind, PathletKind::Representative(_))
    }

    /// Nodes holding a rule for this pathlet. A concrete pathlet needs one
    /// rule on every node but the last; a representative needs only the
    /// unfold rule on its start node.
    pub fn rule_nodes(&self) -> &[NodeId] {
        match self.kind {
            PathletKind::Concrete => &self.nodes()[..self.nodes().len() - 1],
            PathletKind::Representative(_) => &self.nodes()[..1],
        }
    }

    /// d_{v,S}: 1 on rule-bearing nodes, else 0.
    pub fn rule_demand(&self, v: NodeId) -> u32 {
        self.rule_nodes().contains(&v) as u32
    }

    /// Total rules needed to install this pathlet.
    pub fn rule_count(&self) -> usize {
        self.rule_nodes().len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathletSetError {
    #[error("representative expansion is empty or references unknown pathlets")]
    BadExpansion,
    #[error("representative expansion may only contain concrete pathlets")]
    NestedRepresentative,
    #[error("expansion parts do not chain head to tail")]
    Discontiguous,
}

/// Owning store of pathlets, addressed by index. Representatives refer to
/// their constituents by index in the same store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathletSet {
    pathlets: Vec<Pathlet>,
    by_nodes: HashMap<Vec<NodeId>, usize>,
    by_expansion: HashMap<Vec<usize>, usize>,
}

impl PathletSet {
    pub fn new() -> PathletSet {
        PathletSet::default()
    }

    /// Build from concrete routes, dropping duplicates (first kept).
    pub fn from_routes<I: IntoIterator<Item = Path>>(routes: I) -> PathletSet {
        let mut set = PathletSet::new();
        for r in routes {
            set.insert_concrete(r);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.pathlets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pathlets.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Pathlet {
        &self.pathlets[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Pathlet {
        &mut self.pathlets[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pathlet> {
        self.pathlets.iter()
    }

    pub fn as_slice(&self) -> &[Pathlet] {
        &self.pathlets
    }

    /// Index of the concrete pathlet with exactly these nodes.
    pub fn find_concrete(&self, nodes: &[NodeId]) -> Option<usize> {
        self.by_nodes.get(nodes).copied()
    }

    /// Insert a concrete pathlet; returns the existing index on duplicates.
    pub fn insert_concrete(&mut self, route: Path) -> usize {
        if let Some(&i) = self.by_nodes.get(route.nodes()) {
            return i;
        }
        let i = self.pathlets.len();
        self.by_nodes.insert(route.nodes().to_vec(), i);
        self.pathlets.push(Pathlet::concrete(route));
        i
    }

    /// Insert (or reuse) a representative standing for `parts` in order.
    pub fn insert_representative(&mut self, parts: Vec<usize>) -> Result<usize, PathletSetError> {
        if let Some(&i) = self.by_expansion.get(&parts) {
            return Ok(i);
        }
        if parts.len() < 2 || parts.iter().any(|&p| p >= self.pathlets.len()) {
            return Err(PathletSetError::BadExpansion);
        }
        if parts.iter().any(|&p| self.pathlets[p].is_representative()) {
            return Err(PathletSetError::NestedRepresentative);
        }
        let mut nodes = self.pathlets[parts[0]].nodes().to_vec();
        for &p in &parts[1..] {
            let next = self.pathlets[p].nodes();
            if next[0] != *nodes.last().unwrap() {
                return Err(PathletSetError::Discontiguous);
            }
            nodes.extend_from_slice(&next[1..]);
        }
        let route = Path::from_simple_nodes(nodes).map_err(|_| PathletSetError::Discontiguous)?;
        let i = self.pathlets.len();
        self.by_expansion.insert(parts.clone(), i);
        self.pathlets.push(Pathlet {
            route,
            pid: None,
            kind: PathletKind::Representative(parts),
        });
        Ok(i)
    }

    /// Concrete pathlets a top-level part stands for.
    pub fn expand(&self, idx: usize) -> Vec<usize> {
        match &self.pathlets[idx].kind {
            PathletKind::Concrete => vec![idx],
            PathletKind::Representative(parts) => parts.clone(),
        }
    }

    pub fn pids(&self) -> Vec<Option<Pid>> {
        self.pathlets.iter().map(|p| p.pid).collect()
    }

    pub fn apply_pids(&mut self, pids: &[Pid]) {
        for (p, &pid) in self.pathlets.iter_mut().zip(pids) {
            p.pid = Some(pid);
        }
    }
}

/// Path file: one path per line as space-separated node ids, `#` comments.
pub fn parse_path_file(topology: &Topology, text: &str) -> Result<Vec<Path>, crate::Error> {
    let mut paths = Vec::new();
    for line in text.lines() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let names: Vec<&str> = body.split_whitespace().collect();
        paths.push(Path::from_names(topology, &names)?);
    }
    Ok(paths)
}

pub fn write_path_file<'a, I: IntoIterator<Item = &'a Path>>(topology: &Topology, paths: I) -> String {
    let mut s = String::new();
    for p in paths {
        s.push_str(&topology.format_nodes(p.nodes()));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> Topology {
        Topology::parse("directed\na b\nb c\na d\nd c\nc e\ne f\nc g\ng f\n").unwrap()
    }

    fn p(t: &Topology, s: &str) -> Path {
        Path::from_names(t, &s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn make_path_cases() {
        let t = worked();
        assert_eq!(p(&t, "a b c e f").len(), 4);
        assert_eq!(p(&t, "a b").len(), 1);
        let ids = t.ids(&["a", "b", "a"]).unwrap();
        assert!(matches!(Path::new(&t, ids), Err(PathError::NotSimple(_))));
        let ids = t.ids(&["a", "c"]).unwrap();
        assert!(matches!(Path::new(&t, ids), Err(PathError::MissingLink(_, _))));
        let ids = t.ids(&["a"]).unwrap();
        assert_eq!(Path::new(&t, ids), Err(PathError::TooShort(1)));
    }

    #[test]
    fn subpath_cases() {
        let t = worked();
        let path = p(&t, "a b c e f");
        assert!(is_subpath(&Pathlet::concrete(p(&t, "c e f")), &path));
        assert!(is_subpath(&Pathlet::concrete(path.clone()), &path));
        assert!(!is_subpath(&Pathlet::concrete(p(&t, "b c g")), &path));
        assert!(path.contains_link(t.id("c").unwrap(), t.id("e").unwrap()));
        assert!(!path.contains_link(t.id("c").unwrap(), t.id("g").unwrap()));
    }

    #[test]
    fn rule_demand_excludes_last_node() {
        let t = worked();
        let s = Pathlet::concrete(p(&t, "a b c"));
        let (a, b, c) = (t.id("a").unwrap(), t.id("b").unwrap(), t.id("c").unwrap());
        assert_eq!((s.rule_demand(a), s.rule_demand(b), s.rule_demand(c)), (1, 1, 0));
        assert_eq!(s.rule_count(), s.len());
    }

    #[test]
    fn representatives_flatten_and_dedupe() {
        let t = worked();
        let mut set = PathletSet::new();
        let s1 = set.insert_concrete(p(&t, "a b c"));
        let s2 = set.insert_concrete(p(&t, "c e f"));
        let s3 = set.insert_concrete(p(&t, "a d c"));
        assert_eq!(set.insert_concrete(p(&t, "a b c")), s1);
        let r = set.insert_representative(vec![s1, s2]).unwrap();
        assert_eq!(set.get(r).nodes(), p(&t, "a b c e f").nodes());
        assert_eq!(set.get(r).rule_count(), 1);
        assert_eq!(set.insert_representative(vec![s1, s2]).unwrap(), r);
        assert_eq!(
            set.insert_representative(vec![s1, s3]),
            Err(PathletSetError::Discontiguous)
        );
        assert_eq!(
            set.insert_representative(vec![r, s2]),
            Err(PathletSetError::NestedRepresentative)
        );
        assert_eq!(set.expand(r), vec![s1, s2]);
    }
}

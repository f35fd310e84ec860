//! Directed network topology and its plain-text edge-list format.
//!
//! Node names are opaque tokens. Internally every node gets a dense
//! [`NodeId`] assigned in sorted-name order, so comparing two id sequences
//! element-wise is the same as comparing their name sequences
//! lexicographically. All tie-breaking in the crate relies on this.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Rule slots assumed free on a node when the topology file does not say.
pub const DEFAULT_FREE_CAPACITY: u32 = 2000;
/// Link bandwidth used when the column is missing.
pub const DEFAULT_BANDWIDTH: f64 = 100.0;
/// Link latency used when the column is missing.
pub const DEFAULT_LATENCY: f64 = 1.0;

/// Dense node index. Ordering follows the node names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Attributes of one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAttrs {
    pub weight: i64,
    pub latency: f64,
    pub bandwidth: f64,
}

impl Default for LinkAttrs {
    fn default() -> Self {
        LinkAttrs {
            weight: 1,
            latency: DEFAULT_LATENCY,
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: link endpoint `{node}` is not a declared node")]
    DanglingEndpoint { line: usize, node: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
}

/// One line of input before node ids are assigned.
struct RawLink {
    line: usize,
    tail: String,
    head: String,
    attrs: LinkAttrs,
}

/// A directed graph with per-link bandwidth/latency and per-node free
/// rule capacity. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    directed: bool,
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    out: Vec<Vec<NodeId>>,
    inc: Vec<Vec<NodeId>>,
    links: BTreeMap<(NodeId, NodeId), LinkAttrs>,
    free_capacity: Vec<u32>,
}

impl Topology {
    /// Parse the edge-list format:
    ///
    /// ```text
    /// # comment
    /// undirected            # optional header, `directed` also accepted
    /// %node a 2000          # optional node declarations (capacity optional)
    /// a b 1 10 100          # tail head [weight [latency [bandwidth]]]
    /// ```
    ///
    /// When at least one `%node` line is present every link endpoint must
    /// be declared. Undirected mode expands each line into both directions.
    pub fn parse(text: &str) -> Result<Topology, TopologyError> {
        let mut directed = false;
        let mut seen_content = false;
        let mut declared: BTreeMap<String, Option<u32>> = BTreeMap::new();
        let mut raw = Vec::new();

        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if !seen_content && tokens.len() == 1 {
                match tokens[0] {
                    "directed" => {
                        directed = true;
                        seen_content = true;
                        continue;
                    }
                    "undirected" => {
                        seen_content = true;
                        continue;
                    }
                    _ => {}
                }
            }
            seen_content = true;
            if tokens[0] == "%node" {
                let name = tokens.get(1).ok_or_else(|| TopologyError::Parse {
                    line: lineno,
                    reason: "`%node` needs a node id".into(),
                })?;
                let cap = match tokens.get(2) {
                    Some(t) => Some(t.parse::<u32>().map_err(|_| TopologyError::Parse {
                        line: lineno,
                        reason: format!("bad capacity `{t}`"),
                    })?),
                    None => None,
                };
                if tokens.len() > 3 {
                    return Err(TopologyError::Parse {
                        line: lineno,
                        reason: "trailing tokens after node capacity".into(),
                    });
                }
                declared.insert((*name).to_string(), cap);
                continue;
            }
            raw.push(parse_link_line(lineno, &tokens)?);
        }

        let mut names: BTreeSet<String> = declared.keys().cloned().collect();
        if declared.is_empty() {
            for l in &raw {
                names.insert(l.tail.clone());
                names.insert(l.head.clone());
            }
        } else {
            for l in &raw {
                for n in [&l.tail, &l.head] {
                    if !declared.contains_key(n) {
                        return Err(TopologyError::DanglingEndpoint {
                            line: l.line,
                            node: n.clone(),
                        });
                    }
                }
            }
        }

        let names: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, NodeId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i as u32)))
            .collect();
        let mut links = BTreeMap::new();
        for l in &raw {
            let (t, h) = (index[&l.tail], index[&l.head]);
            links.entry((t, h)).or_insert(l.attrs);
            if !directed {
                links.entry((h, t)).or_insert(l.attrs);
            }
        }
        let free_capacity = names
            .iter()
            .map(|n| declared.get(n).copied().flatten().unwrap_or(DEFAULT_FREE_CAPACITY))
            .collect();
        Ok(Topology::assemble(directed, names, index, links, free_capacity))
    }

    /// Build from explicit directed links; nodes are the union of endpoints
    /// plus `extra_nodes`.
    pub fn from_links<S: AsRef<str>>(
        links: &[(S, S, LinkAttrs)],
        extra_nodes: &[S],
    ) -> Result<Topology, TopologyError> {
        let mut names = BTreeSet::new();
        for (t, h, _) in links {
            if t.as_ref() == h.as_ref() {
                return Err(TopologyError::SelfLoop(t.as_ref().to_string()));
            }
            names.insert(t.as_ref().to_string());
            names.insert(h.as_ref().to_string());
        }
        for n in extra_nodes {
            names.insert(n.as_ref().to_string());
        }
        let names: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, NodeId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i as u32)))
            .collect();
        let map = links
            .iter()
            .map(|(t, h, a)| ((index[t.as_ref()], index[h.as_ref()]), *a))
            .collect();
        let caps = vec![DEFAULT_FREE_CAPACITY; names.len()];
        Ok(Topology::assemble(true, names, index, map, caps))
    }

    fn assemble(
        directed: bool,
        names: Vec<String>,
        index: HashMap<String, NodeId>,
        links: BTreeMap<(NodeId, NodeId), LinkAttrs>,
        free_capacity: Vec<u32>,
    ) -> Topology {
        let n = names.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        // BTreeMap iteration keeps both adjacency lists sorted.
        for &(t, h) in links.keys() {
            out[t.index()].push(h);
            inc[h.index()].push(t);
        }
        for l in &mut inc {
            l.sort();
        }
        Topology {
            directed,
            names,
            index,
            out,
            inc,
            links,
            free_capacity,
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId, &LinkAttrs)> + '_ {
        self.links.iter().map(|(&(t, h), a)| (t, h, a))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn id(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn ids<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<NodeId>, TopologyError> {
        names.iter().map(|n| self.id(n.as_ref())).collect()
    }

    pub fn names_of(&self, ids: &[NodeId]) -> Vec<&str> {
        ids.iter().map(|&i| self.name(i)).collect()
    }

    /// Space-separated node names.
    pub fn format_nodes(&self, ids: &[NodeId]) -> String {
        self.names_of(ids).join(" ")
    }

    /// Sorted out-neighbours.
    pub fn successors(&self, v: NodeId) -> &[NodeId] {
        &self.out[v.index()]
    }

    /// Sorted in-neighbours.
    pub fn predecessors(&self, v: NodeId) -> &[NodeId] {
        &self.inc[v.index()]
    }

    pub fn has_link(&self, tail: NodeId, head: NodeId) -> bool {
        self.links.contains_key(&(tail, head))
    }

    pub fn link(&self, tail: NodeId, head: NodeId) -> Option<&LinkAttrs> {
        self.links.get(&(tail, head))
    }

    pub fn free_capacity(&self, v: NodeId) -> u32 {
        self.free_capacity[v.index()]
    }

    pub fn capacities(&self) -> &[u32] {
        &self.free_capacity
    }

    /// Copy with every node's capacity set to `capacity`.
    pub fn with_uniform_capacity(&self, capacity: u32) -> Topology {
        let mut t = self.clone();
        t.free_capacity.iter_mut().for_each(|c| *c = capacity);
        t
    }

    /// Copy with selected capacities replaced.
    pub fn with_capacity_overrides(&self, overrides: &[(NodeId, u32)]) -> Topology {
        let mut t = self.clone();
        for &(v, c) in overrides {
            t.free_capacity[v.index()] = c;
        }
        t
    }

    /// Hop distances from `src` along directed links (BFS). `None` when
    /// unreachable.
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()].unwrap();
            for &v in self.successors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// The sub-topology induced by the first `n` nodes reached by a BFS
    /// from `start` (neighbours visited in sorted order).
    pub fn bfs_subgraph(&self, start: NodeId, n: usize) -> Topology {
        let mut seen = vec![false; self.node_count()];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen[start.index()] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            if order.len() == n {
                break;
            }
            order.push(u);
            let mut next: Vec<NodeId> = self.successors(u).to_vec();
            next.extend_from_slice(self.predecessors(u));
            next.sort();
            next.dedup();
            for v in next {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v);
                }
            }
        }
        let keep: BTreeSet<NodeId> = order.into_iter().collect();
        let names: Vec<String> = keep.iter().map(|&v| self.name(v).to_string()).collect();
        let index: HashMap<String, NodeId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i as u32)))
            .collect();
        let remap = |v: NodeId| index[self.name(v)];
        let links = self
            .links
            .iter()
            .filter(|((t, h), _)| keep.contains(t) && keep.contains(h))
            .map(|(&(t, h), a)| ((remap(t), remap(h)), *a))
            .collect();
        let caps = keep.iter().map(|&v| self.free_capacity(v)).collect();
        Topology::assemble(self.directed, names, index, links, caps)
    }

    /// Serialize in the edge-list format. Always emits directed form so the
    /// output round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::from("directed\n");
        for v in self.nodes() {
            s.push_str(&format!("%node {} {}\n", self.name(v), self.free_capacity(v)));
        }
        for (t, h, a) in self.links() {
            s.push_str(&format!(
                "{} {} {} {} {}\n",
                self.name(t),
                self.name(h),
                a.weight,
                a.latency,
                a.bandwidth
            ));
        }
        s
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

fn parse_link_line(line: usize, tokens: &[&str]) -> Result<RawLink, TopologyError> {
    if tokens.len() < 2 || tokens.len() > 5 {
        return Err(TopologyError::Parse {
            line,
            reason: format!("expected 2 to 5 fields, found {}", tokens.len()),
        });
    }
    if tokens[0] == tokens[1] {
        return Err(TopologyError::Parse {
            line,
            reason: format!("self-loop on `{}`", tokens[0]),
        });
    }
    let mut attrs = LinkAttrs::default();
    if let Some(w) = tokens.get(2) {
        attrs.weight = w.parse().map_err(|_| TopologyError::Parse {
            line,
            reason: format!("bad weight `{w}`"),
        })?;
    }
    if let Some(l) = tokens.get(3) {
        attrs.latency = parse_nonneg(line, "latency", l)?;
    }
    if let Some(b) = tokens.get(4) {
        attrs.bandwidth = parse_nonneg(line, "bandwidth", b)?;
    }
    Ok(RawLink {
        line,
        tail: tokens[0].to_string(),
        head: tokens[1].to_string(),
        attrs,
    })
}

fn parse_nonneg(line: usize, what: &str, tok: &str) -> Result<f64, TopologyError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(TopologyError::Parse {
            line,
            reason: format!("bad {what} `{tok}`"),
        }),
    }
}

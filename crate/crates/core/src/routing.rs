//! Single-pair route computations used to shape policy paths.
//!
//! Every search breaks ties lexicographically on the node sequence.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::path::Path;
use crate::topology::{NodeId, Topology};

#[derive(PartialEq)]
struct Label {
    cost: f64,
    nodes: Vec<NodeId>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.nodes.cmp(&self.nodes))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost simple path under a non-negative additive link cost.
/// Links for which `cost` returns `None` are unusable; nodes in `avoid`
/// are never entered.
pub fn cheapest_path<F>(t: &Topology, src: NodeId, dst: NodeId, avoid: &BTreeSet<NodeId>, cost: F) -> Option<Path>
where
    F: Fn(NodeId, NodeId) -> Option<f64>,
{
    if src == dst || avoid.contains(&src) || avoid.contains(&dst) {
        return None;
    }
    let mut settled = vec![false; t.node_count()];
    let mut heap = BinaryHeap::new();
    heap.push(Label {
        cost: 0.0,
        nodes: vec![src],
    });
    while let Some(Label { cost: c, nodes }) = heap.pop() {
        let u = *nodes.last().unwrap();
        if settled[u.index()] {
            continue;
        }
        settled[u.index()] = true;
        if u == dst {
            return Some(Path::from_simple_nodes(nodes).expect("labels are simple"));
        }
        for &v in t.successors(u) {
            if settled[v.index()] || avoid.contains(&v) || nodes.contains(&v) {
                continue;
            }
            if let Some(w) = cost(u, v) {
                let mut next = nodes.clone();
                next.push(v);
                heap.push(Label {
                    cost: c + w,
                    nodes: next,
                });
            }
        }
    }
    None
}

/// Fewest-hop path.
pub fn shortest_hops(t: &Topology, src: NodeId, dst: NodeId, avoid: &BTreeSet<NodeId>) -> Option<Path> {
    cheapest_path(t, src, dst, avoid, |_, _| Some(1.0))
}

/// Minimum total latency path.
pub fn lowest_latency(t: &Topology, src: NodeId, dst: NodeId) -> Option<Path> {
    cheapest_path(t, src, dst, &BTreeSet::new(), |u, v| t.link(u, v).map(|a| a.latency))
}

/// Path maximizing the bottleneck bandwidth; among those, fewest hops.
pub fn widest_path(t: &Topology, src: NodeId, dst: NodeId) -> Option<Path> {
    let mut levels: Vec<f64> = t.links().map(|(_, _, a)| a.bandwidth).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let none = BTreeSet::new();
    for bw in levels {
        let p = cheapest_path(t, src, dst, &none, |u, v| {
            t.link(u, v).filter(|a| a.bandwidth >= bw).map(|_| 1.0)
        });
        if p.is_some() {
            return p;
        }
    }
    None
}

/// Bottleneck bandwidth along a path.
pub fn bottleneck(t: &Topology, p: &Path) -> f64 {
    p.links()
        .map(|(u, v)| t.link(u, v).map_or(0.0, |a| a.bandwidth))
        .fold(f64::INFINITY, f64::min)
}

/// Total latency along a path.
pub fn latency(t: &Topology, p: &Path) -> f64 {
    p.links().map(|(u, v)| t.link(u, v).map_or(0.0, |a| a.latency)).sum()
}

/// Up to two link-disjoint paths via two rounds of shortest augmenting
/// paths on unit link capacities, then flow decomposition.
pub fn link_disjoint_pair(t: &Topology, src: NodeId, dst: NodeId) -> Vec<Path> {
    let mut flow: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut units = 0;
    for _ in 0..2 {
        match augmenting_path(t, src, dst, &flow) {
            Some(steps) => {
                for w in steps.windows(2) {
                    let (u, v) = (w[0], w[1]);
                    if !flow.remove(&(v, u)) {
                        flow.insert((u, v));
                    }
                }
                units += 1;
            }
            None => break,
        }
    }
    let mut paths = Vec::new();
    for _ in 0..units {
        let mut walk = vec![src];
        let mut u = src;
        while u != dst {
            let v = *flow
                .range((u, NodeId(0))..=(u, NodeId(u32::MAX)))
                .next()
                .map(|(_, v)| v)
                .expect("flow conservation");
            flow.remove(&(u, v));
            if let Some(i) = walk.iter().position(|&n| n == v) {
                walk.truncate(i + 1);
            } else {
                walk.push(v);
            }
            u = v;
        }
        paths.push(Path::from_simple_nodes(walk).expect("cycles removed"));
    }
    paths
}

/// BFS in the residual graph. Backward (cancelling) moves are preferred
/// over forward ones into the same neighbour.
fn augmenting_path(t: &Topology, src: NodeId, dst: NodeId, flow: &BTreeSet<(NodeId, NodeId)>) -> Option<Vec<NodeId>> {
    let n = t.node_count();
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[src.index()] = true;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        if u == dst {
            break;
        }
        let mut next: Vec<NodeId> = t
            .successors(u)
            .iter()
            .copied()
            .filter(|&v| !flow.contains(&(u, v)))
            .collect();
        next.extend(t.predecessors(u).iter().copied().filter(|&v| flow.contains(&(v, u))));
        next.sort();
        next.dedup();
        for v in next {
            if !seen[v.index()] {
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                queue.push_back(v);
            }
        }
    }
    if !seen[dst.index()] {
        return None;
    }
    let mut steps = vec![dst];
    let mut v = dst;
    while let Some(p) = parent[v.index()] {
        steps.push(p);
        v = p;
    }
    steps.reverse();
    Some(steps)
}

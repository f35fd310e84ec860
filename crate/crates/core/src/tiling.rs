//! Per-path tilings by candidate sub-paths.
//!
//! A set of sub-paths of `P` whose links partition `P`'s links is exactly
//! an ordered head-to-tail tiling, so searching over tilings is searching
//! over feasible x-rows of the selection problem for one path.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::path::{Path, Pathlet};
use crate::topology::NodeId;

const COST_EPS: f64 = 1e-12;

/// Candidate `cand` covers path links `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub cand: usize,
}

/// Lookup of concrete candidates by node sequence.
#[derive(Debug, Clone, Default)]
pub struct SegmentIndex {
    by_nodes: HashMap<Vec<NodeId>, usize>,
    max_len: usize,
}

impl SegmentIndex {
    pub fn new<'a, I: IntoIterator<Item = &'a Pathlet>>(candidates: I) -> SegmentIndex {
        let mut idx = SegmentIndex::default();
        for (i, c) in candidates.into_iter().enumerate() {
            if c.is_representative() {
                continue;
            }
            idx.max_len = idx.max_len.max(c.len());
            idx.by_nodes.entry(c.nodes().to_vec()).or_insert(i);
        }
        idx
    }

    /// Every candidate that is a contiguous sub-path of `path`, ordered by
    /// start position then end position.
    pub fn segments(&self, path: &Path) -> Vec<Segment> {
        let nodes = path.nodes();
        let mut out = Vec::new();
        for start in 0..path.len() {
            let top = (start + self.max_len).min(path.len());
            for end in start + 1..=top {
                if let Some(&cand) = self.by_nodes.get(&nodes[start..=end]) {
                    out.push(Segment { start, end, cand });
                }
            }
        }
        out
    }
}

/// A tiling with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tiling {
    pub parts: Vec<usize>,
    pub cost: f64,
}

/// Total order used to pick among optimal tilings: cost, then part count,
/// then the candidate sequence.
fn better(a_cost: f64, a_parts: &[usize], b: &Tiling) -> bool {
    if a_cost < b.cost - COST_EPS {
        return true;
    }
    if a_cost > b.cost + COST_EPS {
        return false;
    }
    match a_parts.len().cmp(&b.parts.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a_parts < b.parts.as_slice(),
    }
}

/// Depth-first branch and bound for the cheapest tiling of a path with
/// `path_len` links using at most `max_parts` segments. `cost` gives the
/// non-negative price of a candidate, or `None` if it may not be used. The
/// running cost is a valid lower bound because prices are non-negative.
pub fn best_tiling<F>(segments: &[Segment], path_len: usize, max_parts: usize, cost: F) -> Option<Tiling>
where
    F: Fn(usize) -> Option<f64>,
{
    best_tiling_bounded(segments, path_len, max_parts, f64::INFINITY, cost)
}

/// As [`best_tiling`] but only returns tilings costing at most `ceiling`.
pub fn best_tiling_bounded<F>(
    segments: &[Segment],
    path_len: usize,
    max_parts: usize,
    ceiling: f64,
    cost: F,
) -> Option<Tiling>
where
    F: Fn(usize) -> Option<f64>,
{
    let mut by_start: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); path_len];
    for s in segments {
        if let Some(c) = cost(s.cand) {
            by_start[s.start].push((s.end, s.cand, c));
        }
    }
    // Longer segments first: reaches full covers with few parts early, which
    // tightens the bound sooner.
    for v in &mut by_start {
        v.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    }
    let mut best: Option<Tiling> = None;
    let mut stack = Vec::new();
    search(&by_start, path_len, max_parts, ceiling, 0, 0.0, &mut stack, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn search(
    by_start: &[Vec<(usize, usize, f64)>],
    path_len: usize,
    max_parts: usize,
    ceiling: f64,
    pos: usize,
    cost: f64,
    stack: &mut Vec<usize>,
    best: &mut Option<Tiling>,
) {
    if cost > ceiling + COST_EPS {
        return;
    }
    if let Some(b) = best {
        if cost > b.cost + COST_EPS {
            return;
        }
    }
    if pos == path_len {
        if best.as_ref().is_none_or(|b| better(cost, stack, b)) {
            *best = Some(Tiling {
                parts: stack.clone(),
                cost,
            });
        }
        return;
    }
    if stack.len() == max_parts {
        return;
    }
    for &(end, cand, c) in &by_start[pos] {
        stack.push(cand);
        search(by_start, path_len, max_parts, ceiling, end, cost + c, stack, best);
        stack.pop();
    }
}

/// Every tiling with at most `max_parts` segments, in search order.
pub fn all_tilings(segments: &[Segment], path_len: usize, max_parts: usize) -> Vec<Vec<usize>> {
    let mut by_start: Vec<Vec<(usize, usize)>> = vec![Vec::new(); path_len];
    for s in segments {
        by_start[s.start].push((s.end, s.cand));
    }
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn go(
        by_start: &[Vec<(usize, usize)>],
        path_len: usize,
        max_parts: usize,
        pos: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if pos == path_len {
            out.push(stack.clone());
            return;
        }
        if stack.len() == max_parts {
            return;
        }
        for &(end, cand) in &by_start[pos] {
            stack.push(cand);
            go(by_start, path_len, max_parts, end, stack, out);
            stack.pop();
        }
    }
    go(&by_start, path_len, max_parts, 0, &mut stack, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: usize, end: usize, cand: usize) -> Segment {
        Segment { start, end, cand }
    }

    #[test]
    fn cheapest_tiling_respects_part_bound() {
        // Path of 4 links; one long segment (cost 5) or four singles (cost 1 each).
        let segs = vec![seg(0, 4, 0), seg(0, 1, 1), seg(1, 2, 2), seg(2, 3, 3), seg(3, 4, 4)];
        let price = |c: usize| Some(if c == 0 { 5.0 } else { 1.0 });
        let t = best_tiling(&segs, 4, 4, price).unwrap();
        assert_eq!(t.parts, vec![1, 2, 3, 4]);
        assert_eq!(t.cost, 4.0);
        let t = best_tiling(&segs, 4, 3, price).unwrap();
        assert_eq!(t.parts, vec![0]);
        assert!(best_tiling_bounded(&segs, 4, 3, 4.0, price).is_none());
    }

    #[test]
    fn ties_prefer_fewer_parts() {
        let segs = vec![seg(0, 1, 0), seg(1, 2, 1), seg(0, 2, 2)];
        let t = best_tiling(&segs, 2, 4, |_| Some(0.0)).unwrap();
        assert_eq!(t.parts, vec![2]);
        assert_eq!(all_tilings(&segs, 2, 4).len(), 2);
        assert!(best_tiling(&segs, 2, 4, |c| (c != 2 && c != 1).then_some(0.0)).is_none());
    }
}

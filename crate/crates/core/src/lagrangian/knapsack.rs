//! Selection sub-problem: maximize `sum_S lambda_S t_S` under per-node rule
//! capacities, a multi-dimensional 0-1 knapsack with unit weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::selection::SelectionInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct Sub2Result {
    pub t: Vec<bool>,
    /// `-|P^D| * sum_S lambda_S t_S`.
    pub value: f64,
}

/// Exact optimum. Items with `lambda = 0` are never taken, so `lambda = 0`
/// yields `t = 0`.
pub fn solve_sub2(inst: &SelectionInstance, lambda: &[f64]) -> Sub2Result {
    let n_nodes = inst.capacities.len();
    let items: Vec<usize> = (0..inst.candidate_count()).filter(|&s| lambda[s] > 0.0).collect();
    let mut t = vec![false; inst.candidate_count()];

    let mut demand = vec![0u32; n_nodes];
    for &s in &items {
        for v in inst.candidates[s].rule_nodes() {
            demand[v.index()] += 1;
        }
    }
    // A node binds only if the positive items touching it overflow it.
    let binding: Vec<bool> = (0..n_nodes).map(|v| demand[v] > inst.capacities[v]).collect();
    let (free, core): (Vec<usize>, Vec<usize>) = items
        .into_iter()
        .partition(|&s| inst.candidates[s].rule_nodes().iter().all(|v| !binding[v.index()]));
    for &s in &free {
        t[s] = true;
    }
    if !core.is_empty() {
        for s in solve_core(inst, lambda, core, &binding) {
            t[s] = true;
        }
    }
    let total: f64 = (0..t.len()).filter(|&s| t[s]).map(|s| lambda[s]).sum();
    Sub2Result {
        t,
        value: -(inst.path_count() as f64) * total,
    }
}

struct Core<'a> {
    lambda: &'a [f64],
    /// Items sorted by lambda descending, index ascending.
    items: Vec<usize>,
    /// Binding nodes each item touches.
    touches: Vec<Vec<usize>>,
    /// Binding node ids, compacted to 0..k.
    caps: Vec<u32>,
}

impl Core<'_> {
    /// Upper bound on what items `from..` can add given residual capacities:
    /// for each binding node, relax every other node and take the best
    /// `residual` touching items (unit weights make the fractional optimum
    /// integral). The minimum over nodes bounds the true optimum.
    fn bound(&self, from: usize, residual: &[u32]) -> f64 {
        let mut best = f64::INFINITY;
        for (v, &r) in residual.iter().enumerate() {
            let mut taken = 0u32;
            let mut sum = 0.0;
            for i in from..self.items.len() {
                let w = self.lambda[self.items[i]];
                if self.touches[i].contains(&v) {
                    if taken < r {
                        taken += 1;
                        sum += w;
                    }
                } else {
                    sum += w;
                }
            }
            best = best.min(sum);
        }
        if best.is_infinite() {
            best = (from..self.items.len()).map(|i| self.lambda[self.items[i]]).sum();
        }
        best
    }

    fn fits(&self, i: usize, residual: &[u32]) -> bool {
        self.touches[i].iter().all(|&v| residual[v] > 0)
    }
}

#[derive(Debug)]
struct Node {
    /// Value so far plus the bound on the rest.
    bound: f64,
    value: f64,
    seq: u64,
    depth: usize,
    taken: Vec<usize>,
    residual: Vec<u32>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap on bound; among equal bounds prefer deeper nodes, then the
    // earlier-created one.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

const BOUND_EPS: f64 = 1e-12;

/// Best-first branch and bound on the binding core.
fn solve_core(inst: &SelectionInstance, lambda: &[f64], mut items: Vec<usize>, binding: &[bool]) -> Vec<usize> {
    items.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b)));
    let mut compact = vec![usize::MAX; binding.len()];
    let mut caps = Vec::new();
    for (v, &b) in binding.iter().enumerate() {
        if b {
            compact[v] = caps.len();
            caps.push(inst.capacities[v]);
        }
    }
    let touches: Vec<Vec<usize>> = items
        .iter()
        .map(|&s| {
            let mut t: Vec<usize> = inst.candidates[s]
                .rule_nodes()
                .iter()
                .filter(|v| binding[v.index()])
                .map(|v| compact[v.index()])
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect();
    let core = Core {
        lambda,
        items,
        touches,
        caps,
    };

    // Greedy incumbent in lambda order.
    let mut residual = core.caps.clone();
    let mut inc_taken = Vec::new();
    let mut inc_value = 0.0;
    for i in 0..core.items.len() {
        if core.fits(i, &residual) {
            for &v in &core.touches[i] {
                residual[v] -= 1;
            }
            inc_taken.push(i);
            inc_value += lambda[core.items[i]];
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: core.bound(0, &core.caps),
        value: 0.0,
        seq,
        depth: 0,
        taken: Vec::new(),
        residual: core.caps.clone(),
    });
    while let Some(node) = heap.pop() {
        if node.bound <= inc_value + BOUND_EPS {
            // Best-first: nothing left in the heap can do better.
            break;
        }
        if node.depth == core.items.len() {
            continue;
        }
        let i = node.depth;
        if core.fits(i, &node.residual) {
            let mut residual = node.residual.clone();
            for &v in &core.touches[i] {
                residual[v] -= 1;
            }
            let mut taken = node.taken.clone();
            taken.push(i);
            let value = node.value + lambda[core.items[i]];
            if value > inc_value + BOUND_EPS {
                inc_value = value;
                inc_taken = taken.clone();
            }
            let bound = value + core.bound(i + 1, &residual);
            seq += 1;
            heap.push(Node {
                bound,
                value,
                seq,
                depth: i + 1,
                taken,
                residual,
            });
        }
        let bound = node.value + core.bound(i + 1, &node.residual);
        seq += 1;
        heap.push(Node {
            bound,
            value: node.value,
            seq,
            depth: i + 1,
            taken: node.taken,
            residual: node.residual,
        });
    }
    inc_taken.into_iter().map(|i| core.items[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{Path, Pathlet};
    use crate::topology::Topology;
    use proptest::prelude::*;

    const STAR: &str = "directed\nv x\nv y\nx y\ny z\nx z\n";

    fn star(caps: Vec<u32>) -> (Topology, SelectionInstance) {
        let t = Topology::parse(STAR).unwrap();
        let p = |s: &str| Path::from_names(&t, &s.split_whitespace().collect::<Vec<_>>()).unwrap();
        let cands = ["v x", "v y"].map(|s| Pathlet::concrete(p(s))).to_vec();
        let inst = SelectionInstance::new(vec![p("v x z")], cands, caps, 2).unwrap();
        (t, inst)
    }

    #[test]
    fn zero_lambda_selects_nothing() {
        let (_, inst) = star(vec![5; 4]);
        let r = solve_sub2(&inst, &[0.0, 0.0]);
        assert_eq!(r.t, vec![false, false]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_slot_takes_heavier() {
        let t = Topology::parse(STAR).unwrap();
        let mut caps = vec![5; t.node_count()];
        caps[t.id("v").unwrap().index()] = 1;
        let (_, inst) = star(caps);
        let r = solve_sub2(&inst, &[0.5, 0.9]);
        assert_eq!(r.t, vec![false, true]);
        assert!((r.value + 0.9).abs() < 1e-15);
    }

    #[test]
    fn ample_capacity_takes_all() {
        let (_, inst) = star(vec![5; 4]);
        let r = solve_sub2(&inst, &[0.25, 0.5]);
        assert_eq!(r.t, vec![true, true]);
        assert!((r.value + 0.75).abs() < 1e-15);
    }

    /// All sub-paths (length <= 3) of a path over a small complete digraph,
    /// with random caps, compared against subset enumeration.
    fn random_instance(caps: &[u32]) -> SelectionInstance {
        let n = caps.len();
        let mut links = String::from("directed\n");
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    links.push_str(&format!("{a} {b}\n"));
                }
            }
        }
        let t = Topology::parse(&links).unwrap();
        let ids: Vec<_> = (0..n).map(|i| t.id(&i.to_string()).unwrap()).collect();
        let path = Path::new(&t, ids).unwrap();
        let mut cands = Vec::new();
        for a in 0..n - 1 {
            for b in a + 1..=(a + 3).min(n - 1) {
                cands.push(Pathlet::concrete(path.slice(a, b)));
            }
        }
        let mut by_name = vec![0; n];
        for (i, c) in caps.iter().enumerate() {
            by_name[t.id(&i.to_string()).unwrap().index()] = *c;
        }
        SelectionInstance::new(vec![path], cands, by_name, 2).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn matches_enumeration(caps in prop::collection::vec(0u32..4, 4..7), w in prop::collection::vec(0u8..10, 15)) {
            let inst = random_instance(&caps);
            let ns = inst.candidate_count();
            let lambda: Vec<f64> = (0..ns).map(|i| w[i % w.len()] as f64 / 8.0).collect();
            let got = solve_sub2(&inst, &lambda);
            prop_assert!(inst.load(&got.t).iter().zip(&inst.capacities).all(|(l, c)| l <= c));
            let mut best = 0.0f64;
            for mask in 0u32..(1 << ns) {
                let t: Vec<bool> = (0..ns).map(|s| mask >> s & 1 == 1).collect();
                if inst.load(&t).iter().zip(&inst.capacities).all(|(l, c)| l <= c) {
                    best = best.max((0..ns).filter(|&s| t[s]).map(|s| lambda[s]).sum());
                }
            }
            prop_assert!((-got.value - best).abs() < 1e-9, "got {} want {}", -got.value, best);
        }
    }
}

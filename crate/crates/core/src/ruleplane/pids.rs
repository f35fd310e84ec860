//! Locally scoped pid assignment by greedy coloring.

use std::collections::BTreeSet;

use super::RuleError;
use crate::path::{PathletSet, Pid};

pub const DEFAULT_PID_SPACE: u32 = 256;

/// Two pathlets conflict when they hold rules on a common node. Conflicting
/// pathlets get distinct pids; others may share. Vertices are colored in
/// descending conflict degree (index breaks ties) with the smallest free
/// pid, starting at 1.
pub fn assign_pids(set: &PathletSet, pid_space: u32) -> Result<Vec<Pid>, RuleError> {
    let n = set.len();
    let n_nodes = set
        .iter()
        .flat_map(|p| p.nodes())
        .map(|v| v.index() + 1)
        .max()
        .unwrap_or(0);
    let mut at_node: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (i, p) in set.iter().enumerate() {
        for v in p.rule_nodes() {
            at_node[v.index()].push(i);
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for group in &at_node {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()).then(a.cmp(&b)));

    let mut color: Vec<Option<u32>> = vec![None; n];
    let mut needed = 0;
    for &i in &order {
        let taken: BTreeSet<u32> = adj[i].iter().filter_map(|&j| color[j]).collect();
        let c = (0..).find(|c| !taken.contains(c)).unwrap();
        color[i] = Some(c);
        needed = needed.max(c + 1);
    }
    if needed > pid_space {
        return Err(RuleError::PidSpaceExhausted {
            needed,
            available: pid_space,
        });
    }
    Ok(color.into_iter().map(|c| Pid(c.unwrap() + 1)).collect())
}

/// Pathlet pairs that share a pid and a rule node. Empty for any output of
/// [`assign_pids`].
pub fn pid_clashes(set: &PathletSet) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let (a, b) = (set.get(i), set.get(j));
            if a.pid.is_some() && a.pid == b.pid && a.rule_nodes().iter().any(|v| b.rule_nodes().contains(v)) {
                out.push((i, j));
            }
        }
    }
    out
}

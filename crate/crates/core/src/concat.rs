//! Minimum concatenations of a path over selected pathlets, and nesting of
//! long concatenations into representative pathlets.

use rayon::prelude::*;
use thiserror::Error;

use crate::path::{Path, PathletKind, PathletSet, PathletSetError};
use crate::topology::Topology;

/// Longest path [`brute_force_concat`] accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConcatError {
    #[error("path {0} cannot be concatenated from the selected pathlets")]
    NotConcatenable(String),
    #[error("path has {len} links; exhaustive search is limited to {limit}")]
    PathTooLong { len: usize, limit: usize },
    #[error(transparent)]
    Pathlet(#[from] PathletSetError),
}

/// A path written as pathlets. `parts` are the labels pushed at ingress
/// (possibly representatives); `flat` is the underlying concrete sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concatenation {
    pub path: Path,
    pub parts: Vec<usize>,
    pub flat: Vec<usize>,
}

impl Concatenation {
    pub fn label_count(&self) -> usize {
        self.parts.len()
    }

    /// Part count before nesting.
    pub fn flat_count(&self) -> usize {
        self.flat.len()
    }

    pub fn is_nested(&self) -> bool {
        self.parts.len() != self.flat.len()
    }

    /// Label list pushed at ingress, top first. `None` until pids are set.
    pub fn label_list(&self, set: &PathletSet) -> Option<Vec<crate::Pid>> {
        self.parts.iter().map(|&i| set.get(i).pid).collect()
    }
}

/// Concrete pathlets of `selected` that are contiguous sub-paths of `path`,
/// in index order.
pub fn prune_candidates(selected: &PathletSet, path: &Path) -> Vec<usize> {
    (0..selected.len())
        .filter(|&i| {
            let s = selected.get(i);
            !s.is_representative() && s.len() <= path.len() && path.find_subpath(s.nodes()).is_some()
        })
        .collect()
}

/// Lazy lexicographic `m`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
    done: bool,
    produced: usize,
}

impl Combinations {
    pub fn new(n: usize, m: usize) -> Combinations {
        Combinations {
            n,
            idx: (0..m).collect(),
            first: true,
            done: m > n,
            produced: 0,
        }
    }

    /// Subsets yielded so far.
    pub fn produced(&self) -> usize {
        self.produced
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
        } else {
            let m = self.idx.len();
            let mut i = m;
            loop {
                if i == 0 {
                    self.done = true;
                    return None;
                }
                i -= 1;
                if self.idx[i] < self.n - m + i {
                    break;
                }
            }
            self.idx[i] += 1;
            for j in i + 1..m {
                self.idx[j] = self.idx[j - 1] + 1;
            }
        }
        self.produced += 1;
        Some(self.idx.clone())
    }
}

/// `m`-subsets of the pruned candidates, as pathlet indices.
pub fn enumerate_combinations(sp: &[usize], m: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    Combinations::new(sp.len(), m).map(move |c| c.into_iter().map(|i| sp[i]).collect())
}

/// Orders `subset` along `path` and checks it chains head to tail over the
/// whole path.
pub fn verify_combination(set: &PathletSet, subset: &[usize], path: &Path) -> Option<Vec<usize>> {
    let mut placed = Vec::with_capacity(subset.len());
    for &s in subset {
        let start = path.find_subpath(set.get(s).nodes())?;
        placed.push((start, s));
    }
    placed.sort_unstable();
    let mut pos = 0;
    for &(start, s) in &placed {
        if start != pos {
            return None;
        }
        pos += set.get(s).len();
    }
    (pos == path.len()).then(|| placed.into_iter().map(|(_, s)| s).collect())
}

/// Whether the pruned candidates can tile `path` at all.
fn reachable(set: &PathletSet, sp: &[usize], path: &Path) -> bool {
    let mut ok = vec![false; path.len() + 1];
    ok[0] = true;
    let mut spans: Vec<(usize, usize)> = sp
        .iter()
        .map(|&s| {
            let a = path.find_subpath(set.get(s).nodes()).unwrap();
            (a, a + set.get(s).len())
        })
        .collect();
    spans.sort_unstable();
    for (a, b) in spans {
        if ok[a] {
            ok[b] = true;
        }
    }
    ok[path.len()]
}

/// Minimum-part concatenation, before nesting. Tries the path itself, then
/// `m = 2, 3, ...` subsets in lexicographic order and returns the first
/// that verifies.
pub fn minimal_concatenation(set: &PathletSet, path: &Path) -> Result<Concatenation, ConcatError> {
    minimal_concatenation_counted(set, path).map(|(c, _)| c)
}

/// As [`minimal_concatenation`], also returning the number of subsets
/// drawn from the enumerator.
pub fn minimal_concatenation_counted(set: &PathletSet, path: &Path) -> Result<(Concatenation, usize), ConcatError> {
    let fail = || ConcatError::NotConcatenable(format!("{:?}", path.nodes().iter().map(|n| n.0).collect::<Vec<_>>()));
    let sp = prune_candidates(set, path);
    if !reachable(set, &sp, path) {
        return Err(fail());
    }
    let done = |parts: Vec<usize>, drawn| {
        Ok((
            Concatenation {
                path: path.clone(),
                flat: parts.clone(),
                parts,
            },
            drawn,
        ))
    };
    if let Some(i) = set.find_concrete(path.nodes()) {
        return done(vec![i], 0);
    }
    let mut drawn = 0;
    for m in 2..=path.len().min(sp.len()) {
        let mut combos = Combinations::new(sp.len(), m);
        for c in combos.by_ref() {
            let subset: Vec<usize> = c.into_iter().map(|i| sp[i]).collect();
            if let Some(parts) = verify_combination(set, &subset, path) {
                return done(parts, drawn + combos.produced());
            }
        }
        drawn += combos.produced();
    }
    Err(fail())
}

/// Minimum concatenation, nested when it needs more than `m_max` labels.
pub fn construct_path(set: &mut PathletSet, path: &Path, m_max: usize) -> Result<Concatenation, ConcatError> {
    let c = minimal_concatenation(set, path)?;
    nest(set, c, m_max)
}

/// [`construct_path`] for many paths: minimal concatenations in parallel,
/// then nesting in path order so representative indices are stable.
pub fn construct_all(set: &mut PathletSet, paths: &[Path], m_max: usize) -> Vec<Result<Concatenation, ConcatError>> {
    let shared: &PathletSet = set;
    let minimal: Vec<_> = paths.par_iter().map(|p| minimal_concatenation(shared, p)).collect();
    minimal
        .into_iter()
        .map(|r| r.and_then(|c| nest(set, c, m_max)))
        .collect()
}

/// Group consecutive parts into representatives until at most `m_max`
/// labels remain. The first part stays concrete; the rest are cut from the
/// right into groups of `g` for the smallest `g` that fits, and a leftover
/// single part stays concrete. With `m_max = 1` everything becomes one
/// representative.
pub fn nest(set: &mut PathletSet, conc: Concatenation, m_max: usize) -> Result<Concatenation, ConcatError> {
    let n = conc.flat.len();
    if n <= m_max.max(1) {
        return Ok(conc);
    }
    let groups: Vec<Vec<usize>> = if m_max <= 1 {
        vec![conc.flat.clone()]
    } else {
        let rest = &conc.flat[1..];
        let mut g = 2;
        loop {
            let chunks = rest.len().div_ceil(g);
            if chunks < m_max {
                break;
            }
            g += 1;
        }
        let mut groups: Vec<Vec<usize>> = rest.rchunks(g).map(|c| c.to_vec()).collect();
        groups.reverse();
        groups.insert(0, vec![conc.flat[0]]);
        groups
    };
    let mut parts = Vec::with_capacity(groups.len());
    for grp in groups {
        parts.push(if grp.len() == 1 {
            grp[0]
        } else {
            set.insert_representative(grp)?
        });
    }
    Ok(Concatenation {
        path: conc.path,
        parts,
        flat: conc.flat,
    })
}

/// Oracle: smallest set of pathlets lying on `path` whose links cover each
/// path link exactly once. Searches every link-disjoint family of
/// candidates; ties go to the lexicographically smallest index set.
pub fn brute_force_concat(set: &PathletSet, path: &Path) -> Result<Option<Concatenation>, ConcatError> {
    let l = path.len();
    if l > BRUTE_FORCE_MAX_LEN {
        return Err(ConcatError::PathTooLong {
            len: l,
            limit: BRUTE_FORCE_MAX_LEN,
        });
    }
    let link_bit = |t, h| path.links().position(|e| e == (t, h));
    let mut cands: Vec<(usize, u32)> = Vec::new();
    'cand: for i in 0..set.len() {
        let s = set.get(i);
        if s.is_representative() {
            continue;
        }
        let mut mask = 0u32;
        for (t, h) in s.route().links() {
            match link_bit(t, h) {
                Some(b) => mask |= 1 << b,
                None => continue 'cand,
            }
        }
        cands.push((i, mask));
    }
    let full = (1u32 << l) - 1;
    let mut best: Option<Vec<usize>> = None;
    let mut stack = Vec::new();
    fn go(
        cands: &[(usize, u32)],
        from: usize,
        used: u32,
        full: u32,
        stack: &mut Vec<usize>,
        best: &mut Option<Vec<usize>>,
    ) {
        if used == full {
            let better = match best {
                None => true,
                Some(b) => stack.len() < b.len() || (stack.len() == b.len() && stack.as_slice() < b.as_slice()),
            };
            if better {
                *best = Some(stack.clone());
            }
            return;
        }
        if best.as_ref().is_some_and(|b| stack.len() + 1 > b.len()) {
            return;
        }
        for j in from..cands.len() {
            let (i, m) = cands[j];
            if m & used == 0 {
                stack.push(i);
                go(cands, j + 1, used | m, full, stack, best);
                stack.pop();
            }
        }
    }
    go(&cands, 0, 0, full, &mut stack, &mut best);
    Ok(best.map(|members| {
        let mut placed: Vec<(usize, usize)> = members
            .iter()
            .map(|&s| (path.find_subpath(set.get(s).nodes()).expect("links on path"), s))
            .collect();
        placed.sort_unstable();
        let parts: Vec<usize> = placed.into_iter().map(|(_, s)| s).collect();
        Concatenation {
            path: path.clone(),
            flat: parts.clone(),
            parts,
        }
    }))
}

/// `<path nodes> | <pids> | <rep>=(<pids>) ...`, one line per
/// concatenation. Unassigned pids print as `?`.
pub fn dump_line(topology: &Topology, set: &PathletSet, conc: &Concatenation) -> String {
    let pid = |i: usize| set.get(i).pid.map_or("?".to_string(), |p| p.to_string());
    let labels: Vec<String> = conc.parts.iter().map(|&i| pid(i)).collect();
    let reps: Vec<String> = conc
        .parts
        .iter()
        .filter_map(|&i| match set.get(i).kind() {
            PathletKind::Representative(inner) => Some(format!(
                "{}=({})",
                pid(i),
                inner.iter().map(|&j| pid(j)).collect::<Vec<_>>().join(",")
            )),
            PathletKind::Concrete => None,
        })
        .collect();
    let mut line = format!("{} | {} |", topology.format_nodes(conc.path.nodes()), labels.join(" "));
    for r in reps {
        line.push(' ');
        line.push_str(&r);
    }
    line
}

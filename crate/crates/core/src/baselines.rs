//! Comparison schemes: per-flow rules on every hop, one port label per
//! hop, and waypoint routing over shortest segments.

use std::fmt;

use rayon::prelude::*;

use crate::path::Path;
use crate::topology::Topology;

pub const DEFAULT_MAX_SEGMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Pathlet,
    HopByHop,
    HopSr,
    MiddlepointSr,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Pathlet, Scheme::HopByHop, Scheme::HopSr, Scheme::MiddlepointSr];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Pathlet => "pathlet",
            Scheme::HopByHop => "hop_by_hop",
            Scheme::HopSr => "hop_sr",
            Scheme::MiddlepointSr => "middlepoint_sr",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: Scheme,
    /// Rules per node; empty for label-only schemes.
    pub occupancy: Vec<u32>,
    /// Labels per path; `None` where the scheme cannot express the path.
    pub labels: Vec<Option<usize>>,
}

impl BaselineResult {
    pub fn success_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 1.0;
        }
        self.labels.iter().filter(|l| l.is_some()).count() as f64 / self.labels.len() as f64
    }
}

/// One rule for each path on every node it visits.
pub fn hop_by_hop_rules(paths: &[Path], node_count: usize) -> Vec<u32> {
    let mut occ = vec![0u32; node_count];
    for p in paths {
        for v in p.nodes() {
            occ[v.index()] += 1;
        }
    }
    occ
}

/// One output-port label per node on the path.
pub fn hop_sr_labels(path: &Path) -> usize {
    path.nodes().len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiddlepointResult {
    pub success: bool,
    /// Fewest shortest segments the path splits into, if any.
    pub segments: usize,
}

/// Splits `path` into as few segments as possible such that each segment's
/// hop count equals the hop distance between its ends. Single links always
/// qualify, so a split always exists; success means it needs at most
/// `max_segments`.
pub fn middlepoint_concat(topology: &Topology, path: &Path, max_segments: usize) -> MiddlepointResult {
    let nodes = path.nodes();
    let l = path.len();
    let mut best = vec![usize::MAX; l + 1];
    best[0] = 0;
    for i in 0..l {
        if best[i] == usize::MAX {
            continue;
        }
        let dist = topology.hop_distances(nodes[i]);
        for j in i + 1..=l {
            if dist[nodes[j].index()] == Some((j - i) as u32) {
                best[j] = best[j].min(best[i] + 1);
            }
        }
    }
    MiddlepointResult {
        success: best[l] <= max_segments,
        segments: best[l],
    }
}

pub fn hop_by_hop(paths: &[Path], node_count: usize) -> BaselineResult {
    BaselineResult {
        scheme: Scheme::HopByHop,
        occupancy: hop_by_hop_rules(paths, node_count),
        labels: vec![Some(0); paths.len()],
    }
}

pub fn hop_sr(paths: &[Path]) -> BaselineResult {
    BaselineResult {
        scheme: Scheme::HopSr,
        occupancy: Vec::new(),
        labels: paths.iter().map(|p| Some(hop_sr_labels(p))).collect(),
    }
}

pub fn middlepoint_sr(topology: &Topology, paths: &[Path], max_segments: usize) -> BaselineResult {
    BaselineResult {
        scheme: Scheme::MiddlepointSr,
        occupancy: Vec::new(),
        labels: paths
            .par_iter()
            .map(|p| {
                let r = middlepoint_concat(topology, p, max_segments);
                r.success.then_some(r.segments)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked() -> Topology {
        Topology::parse("directed\na b\nb c\na d\nd c\nc e\ne f\nc g\ng f\n").unwrap()
    }

    fn p(t: &Topology, s: &str) -> Path {
        Path::from_names(t, &s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hop_by_hop_counts() {
        let t = worked();
        let paths: Vec<Path> = ["a b c e f", "a b c g f", "a d c e f", "a d c g f"]
            .iter()
            .map(|s| p(&t, s))
            .collect();
        let occ = hop_by_hop_rules(&paths, t.node_count());
        assert_eq!(occ[t.id("c").unwrap().index()], 4);
        assert_eq!(occ.iter().sum::<u32>(), 20);
        let one = hop_by_hop_rules(&paths[..1], t.node_count());
        assert_eq!(one.iter().sum::<u32>(), 5);
        assert!(one.iter().all(|&c| c <= 1));
    }

    #[test]
    fn hop_sr_counts() {
        let t = worked();
        assert_eq!(hop_sr_labels(&p(&t, "a b c e f")), 5);
        assert_eq!(hop_sr_labels(&p(&t, "a b")), 2);
    }

    #[test]
    fn middlepoint_examples() {
        let t = worked();
        let r = middlepoint_concat(&t, &p(&t, "a b c e f"), 1);
        assert_eq!(
            r,
            MiddlepointResult {
                success: true,
                segments: 1
            }
        );
        // (a d c) ties (a b c), so it is shortest as well.
        assert!(middlepoint_concat(&t, &p(&t, "a d c g f"), 1).success);
        // A strictly longer detour a-x-y-c next to a-b-c needs a split.
        let t = Topology::parse("directed\na b\nb c\na x\nx y\ny c\nc e\n").unwrap();
        let r = middlepoint_concat(&t, &p(&t, "a x y c e"), 3);
        assert_eq!(r.segments, 2);
        assert!(!middlepoint_concat(&t, &p(&t, "a x y c e"), 1).success);
    }

    proptest! {
        #[test]
        fn max_segments_equal_length_always_succeeds(n in 2usize..9, chords in prop::collection::vec((0usize..9, 0usize..9), 0..6)) {
            let mut links: String = (0..n - 1).map(|i| format!("{} {}\n", i, i + 1)).collect();
            for (a, b) in chords {
                if a < n && b < n && a != b {
                    links.push_str(&format!("{a} {b}\n"));
                }
            }
            let t = Topology::parse(&format!("directed\n{links}")).unwrap();
            let names: Vec<String> = (0..n).map(|i| i.to_string()).collect();
            let path = Path::from_names(&t, &names).unwrap();
            let r = middlepoint_concat(&t, &path, path.len());
            prop_assert!(r.success);
            prop_assert!(r.segments >= 1 && r.segments <= path.len());
            prop_assert_eq!(hop_sr_labels(&path), path.len() + 1);
        }
    }
}

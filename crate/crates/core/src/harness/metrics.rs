//! Per-run metrics, label CCDFs and the scheme comparison table.

use std::fmt::Write as _;

use super::HarnessError;
use crate::baselines::{hop_by_hop, hop_sr, middlepoint_sr, BaselineResult, Scheme};
use crate::lagrangian::TraceRow;
use crate::path::Path;
use crate::ruleplane::{rule_saving, LoadReport};
use crate::topology::{NodeId, Topology};

/// One row of the comparison table. Rule columns are `None` for
/// label-only schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRow {
    pub scheme: Scheme,
    pub max_rules: Option<u32>,
    pub avg_rules: Option<f64>,
    /// Percent of Hop-by-Hop rules saved, summed over all nodes.
    pub saving: Option<f64>,
    pub success: f64,
    /// Mean label count over the paths the scheme expresses.
    pub mean_labels: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub paths: usize,
    pub flows: usize,
    pub nodes: usize,
    pub concatenated: usize,
    /// `concatenated / paths`; 1 for an empty path set.
    pub success: f64,
    /// Fraction of paths the selection rounds covered, when known.
    pub coverage: Option<f64>,
    pub pathlets: usize,
    pub representatives: usize,
    pub schemes: Vec<SchemeRow>,
    /// Pathlet rules per node (all nodes).
    pub avg_core: f64,
    pub max_core: u32,
    /// Ingress and egress flow rules per node.
    pub avg_edge: f64,
    pub avg_hbh: f64,
    pub max_hbh: u32,
    /// Saving of pathlet rules against Hop-by-Hop, over all nodes.
    pub r_avgsave: Option<f64>,
    /// Saving of all rules over nodes that lie inside some path but are
    /// never an endpoint.
    pub intermediate_saving: Option<f64>,
    pub labels_pre: Vec<Option<usize>>,
    pub labels_post: Vec<Option<usize>>,
    pub hop_sr_labels: Vec<usize>,
    pub middlepoint_labels: Vec<Option<usize>>,
    /// `(series, x, fraction)` points.
    pub ccdf: Vec<(String, usize, f64)>,
    /// `(round, row)` for every subgradient iteration.
    pub trace: Vec<(usize, TraceRow)>,
}

/// `(x, fraction of counts >= x)` for `x = 1..=max + 1`, so the last point
/// is always 0.
pub fn emit_ccdf(counts: &[usize]) -> Result<Vec<(usize, f64)>, HarnessError> {
    let max = *counts.iter().max().ok_or(HarnessError::EmptyInput)?;
    let n = counts.len() as f64;
    Ok((1..=max + 1)
        .map(|x| (x, counts.iter().filter(|&&c| c >= x).count() as f64 / n))
        .collect())
}

/// Nodes strictly inside at least one path and endpoint of none.
pub fn intermediate_nodes(paths: &[Path], node_count: usize) -> Vec<NodeId> {
    let mut inside = vec![false; node_count];
    let mut endpoint = vec![false; node_count];
    for p in paths {
        let nodes = p.nodes();
        endpoint[p.head().index()] = true;
        endpoint[p.tail().index()] = true;
        for v in &nodes[1..nodes.len() - 1] {
            inside[v.index()] = true;
        }
    }
    (0..node_count)
        .filter(|&i| inside[i] && !endpoint[i])
        .map(|i| NodeId(i as u32))
        .collect()
}

/// Inputs for [`build_report`] beyond the topology and paths.
#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub flows: usize,
    pub labels_pre: Vec<Option<usize>>,
    pub labels_post: Vec<Option<usize>>,
    pub coverage: Option<f64>,
    pub pathlets: usize,
    pub representatives: usize,
    pub trace: Vec<(usize, TraceRow)>,
    pub max_segments: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn avg_u32(v: &[u32]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
    }
}

fn mean_labels(labels: &[Option<usize>]) -> Option<f64> {
    mean(labels.iter().flatten().map(|&l| l as f64))
}

fn fraction(labels: &[Option<usize>]) -> f64 {
    if labels.is_empty() {
        1.0
    } else {
        labels.iter().filter(|l| l.is_some()).count() as f64 / labels.len() as f64
    }
}

/// Assembles the report from the installed table's load and the per-path
/// label counts, computing the baselines on `paths`.
pub fn build_report(topology: &Topology, paths: &[Path], load: &LoadReport, inputs: ReportInputs) -> MetricsReport {
    let n = topology.node_count();
    let all: Vec<NodeId> = topology.nodes().collect();
    let hbh = hop_by_hop(paths, n);
    let hsr = hop_sr(paths);
    let mid = middlepoint_sr(topology, paths, inputs.max_segments);
    let total: Vec<u32> = load.core.iter().zip(&load.edge).map(|(a, b)| a + b).collect();
    let inner = intermediate_nodes(paths, n);

    let concatenated = inputs.labels_post.iter().filter(|l| l.is_some()).count();
    let r_avgsave = rule_saving(&load.core, &hbh.occupancy, &all);
    let label_row = |b: &BaselineResult| SchemeRow {
        scheme: b.scheme,
        max_rules: None,
        avg_rules: None,
        saving: None,
        success: b.success_rate(),
        mean_labels: mean_labels(&b.labels),
    };
    let schemes = vec![
        SchemeRow {
            scheme: Scheme::Pathlet,
            max_rules: Some(load.core.iter().copied().max().unwrap_or(0)),
            avg_rules: Some(avg_u32(&load.core)),
            saving: r_avgsave,
            success: fraction(&inputs.labels_post),
            mean_labels: mean_labels(&inputs.labels_post),
        },
        SchemeRow {
            scheme: Scheme::HopByHop,
            max_rules: Some(hbh.occupancy.iter().copied().max().unwrap_or(0)),
            avg_rules: Some(avg_u32(&hbh.occupancy)),
            saving: rule_saving(&hbh.occupancy, &hbh.occupancy, &all),
            success: hbh.success_rate(),
            mean_labels: mean_labels(&hbh.labels),
        },
        label_row(&hsr),
        label_row(&mid),
    ];

    let hop_sr_labels: Vec<usize> = hsr.labels.iter().flatten().copied().collect();
    let mut ccdf = Vec::new();
    let series: [(&str, Vec<usize>); 4] = [
        ("pathlet_pre", inputs.labels_pre.iter().flatten().copied().collect()),
        ("pathlet_post", inputs.labels_post.iter().flatten().copied().collect()),
        ("hop_sr", hop_sr_labels.clone()),
        ("middlepoint_sr", mid.labels.iter().flatten().copied().collect()),
    ];
    for (name, counts) in series {
        if let Ok(points) = emit_ccdf(&counts) {
            ccdf.extend(points.into_iter().map(|(x, y)| (name.to_string(), x, y)));
        }
    }

    MetricsReport {
        paths: paths.len(),
        flows: inputs.flows,
        nodes: n,
        concatenated,
        success: fraction(&inputs.labels_post),
        coverage: inputs.coverage,
        pathlets: inputs.pathlets,
        representatives: inputs.representatives,
        schemes,
        avg_core: avg_u32(&load.core),
        max_core: load.core.iter().copied().max().unwrap_or(0),
        avg_edge: avg_u32(&load.edge),
        avg_hbh: avg_u32(&hbh.occupancy),
        max_hbh: hbh.occupancy.iter().copied().max().unwrap_or(0),
        r_avgsave,
        intermediate_saving: rule_saving(&total, &hbh.occupancy, &inner),
        labels_pre: inputs.labels_pre,
        labels_post: inputs.labels_post,
        hop_sr_labels,
        middlepoint_labels: mid.labels,
        ccdf,
        trace: inputs.trace,
    }
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), fmt_f)
}

impl MetricsReport {
    /// Fraction of all paths with a pre-nesting count of at most `m`.
    pub fn pre_within(&self, m: usize) -> f64 {
        within(&self.labels_pre, m)
    }

    pub fn post_within(&self, m: usize) -> f64 {
        within(&self.labels_post, m)
    }

    /// Scalar summary in a fixed order; used for `metrics.csv` and sweep rows.
    pub fn summary(&self) -> Vec<(&'static str, String)> {
        vec![
            ("paths", self.paths.to_string()),
            ("flows", self.flows.to_string()),
            ("nodes", self.nodes.to_string()),
            ("concatenated", self.concatenated.to_string()),
            ("success", fmt_f(self.success)),
            ("coverage", fmt_opt(self.coverage)),
            ("pathlets", self.pathlets.to_string()),
            ("representatives", self.representatives.to_string()),
            ("avg_core", fmt_f(self.avg_core)),
            ("max_core", self.max_core.to_string()),
            ("avg_edge", fmt_f(self.avg_edge)),
            ("avg_hbh", fmt_f(self.avg_hbh)),
            ("max_hbh", self.max_hbh.to_string()),
            ("r_avgsave", fmt_opt(self.r_avgsave)),
            ("intermediate_saving", fmt_opt(self.intermediate_saving)),
            ("mean_labels_pre", fmt_opt(mean_labels(&self.labels_pre))),
            ("mean_labels_post", fmt_opt(mean_labels(&self.labels_post))),
            (
                "max_labels_pre",
                self.labels_pre
                    .iter()
                    .flatten()
                    .max()
                    .map_or("na".into(), |v| v.to_string()),
            ),
            (
                "max_labels_post",
                self.labels_post
                    .iter()
                    .flatten()
                    .max()
                    .map_or("na".into(), |v| v.to_string()),
            ),
            ("iterations", self.trace.len().to_string()),
        ]
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.summary() {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }

    pub fn ccdf_csv(&self) -> String {
        let mut s = String::from("series,x,fraction\n");
        for (name, x, y) in &self.ccdf {
            let _ = writeln!(s, "{name},{x},{}", fmt_f(*y));
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = format!("round,{}\n", crate::lagrangian::TRACE_HEADER);
        for (round, row) in &self.trace {
            let _ = writeln!(s, "{round},{}", row.csv());
        }
        s
    }
}

fn within(labels: &[Option<usize>], m: usize) -> f64 {
    if labels.is_empty() {
        return 1.0;
    }
    labels.iter().filter(|l| l.is_some_and(|c| c <= m)).count() as f64 / labels.len() as f64
}

const COMPARE_HEADER: [&str; 6] = [
    "scheme",
    "max_rules",
    "avg_rules",
    "saving_vs_hbh",
    "success",
    "mean_labels",
];

fn compare_cells(row: &SchemeRow) -> [String; 6] {
    [
        row.scheme.to_string(),
        row.max_rules.map_or("na".into(), |v| v.to_string()),
        fmt_opt(row.avg_rules),
        fmt_opt(row.saving),
        fmt_f(row.success),
        fmt_opt(row.mean_labels),
    ]
}

/// The comparison table as `(csv, aligned text)`.
pub fn compare_schemes(report: &MetricsReport) -> (String, String) {
    let rows: Vec<[String; 6]> = report.schemes.iter().map(compare_cells).collect();
    let mut csv = COMPARE_HEADER.join(",");
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    let mut width = COMPARE_HEADER.map(str::len);
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut text = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(width)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        text.push_str(padded.join("  ").trim_end());
        text.push('\n');
    };
    line(COMPARE_HEADER.to_vec());
    for r in &rows {
        line(r.iter().map(String::as_str).collect());
    }
    (csv, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccdf_points() {
        assert_eq!(emit_ccdf(&[2, 2, 2, 2]).unwrap(), vec![(1, 1.0), (2, 1.0), (3, 0.0)]);
        let pts = emit_ccdf(&[5, 5, 10, 10]).unwrap();
        assert_eq!(pts[9], (10, 0.5));
        assert_eq!(pts[4], (5, 1.0));
        assert_eq!(pts[5], (6, 0.5));
        assert_eq!(pts.last(), Some(&(11, 0.0)));
        assert!(matches!(emit_ccdf(&[]), Err(HarnessError::EmptyInput)));
    }

    #[test]
    fn ccdf_non_increasing() {
        let pts = emit_ccdf(&[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
        assert!(pts.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(pts[0].1, 1.0);
    }

    fn worked() -> Topology {
        Topology::parse("directed\na b\nb c\na d\nd c\nc e\ne f\nc g\ng f\n").unwrap()
    }

    #[test]
    fn intermediate_set() {
        let t = worked();
        let paths: Vec<Path> = ["a b c e f", "a b c g f", "a d c e f", "a d c g f"]
            .iter()
            .map(|s| Path::from_names(&t, &s.split_whitespace().collect::<Vec<_>>()).unwrap())
            .collect();
        let names: Vec<&str> = intermediate_nodes(&paths, t.node_count())
            .iter()
            .map(|&v| t.name(v))
            .collect();
        assert_eq!(names, ["b", "c", "d", "e", "g"]);
    }

    #[test]
    fn identical_schemes_save_nothing() {
        let t = worked();
        let paths = vec![Path::from_names(&t, &["a", "b", "c"]).unwrap()];
        let hbh = hop_by_hop(&paths, t.node_count()).occupancy;
        let load = LoadReport {
            core: hbh.clone(),
            edge: vec![0; t.node_count()],
            overflow: vec![],
        };
        let r = build_report(
            &t,
            &paths,
            &load,
            ReportInputs {
                labels_pre: vec![Some(1)],
                labels_post: vec![Some(1)],
                max_segments: 3,
                ..Default::default()
            },
        );
        assert_eq!(r.r_avgsave, Some(0.0));
        assert_eq!(r.schemes[1].saving, Some(0.0));
        let (csv, text) = compare_schemes(&r);
        assert!(csv.starts_with("scheme,max_rules,avg_rules,saving_vs_hbh,success,mean_labels\npathlet,1,"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(3).unwrap().starts_with("hop_sr"));
        assert_eq!(r.hop_sr_labels, vec![3]);
    }
}

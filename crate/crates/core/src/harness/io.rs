//! CSV artifacts shared by the staged CLI and the full pipeline.

use std::fmt::Write as _;

use crate::concat::Concatenation;
use crate::path::{Path, PathletKind, PathletSet, Pid};
use crate::topology::Topology;
use crate::workload::DesiredPathSet;

use super::HarnessError;

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_list<T: std::str::FromStr>(cell: &str, row: usize) -> Result<Vec<T>, HarnessError> {
    cell.split_whitespace()
        .map(|x| {
            x.parse().map_err(|_| HarnessError::Format {
                row,
                reason: format!("bad list entry `{x}`"),
            })
        })
        .collect()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, crate::Error> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub const PATHLET_TABLE_HEADER: [&str; 5] = ["index", "pid", "kind", "nodes", "expansion"];

/// `index,pid,kind,nodes,expansion`, one row per pathlet. `expansion` lists
/// constituent indices of a representative.
pub fn write_pathlet_table(topology: &Topology, set: &PathletSet) -> Result<String, crate::Error> {
    let mut w = writer();
    w.write_record(PATHLET_TABLE_HEADER)?;
    for (i, s) in set.iter().enumerate() {
        let (kind, expansion) = match s.kind() {
            PathletKind::Concrete => ("concrete", String::new()),
            PathletKind::Representative(parts) => ("representative", join(parts)),
        };
        w.write_record([
            i.to_string(),
            s.pid.map_or(String::new(), |p| p.to_string()),
            kind.to_string(),
            topology.format_nodes(s.nodes()),
            expansion,
        ])?;
    }
    finish(w)
}

/// Rebuilds a set written by [`write_pathlet_table`], pids included.
pub fn parse_pathlet_table(topology: &Topology, text: &str) -> Result<PathletSet, crate::Error> {
    let mut set = PathletSet::new();
    let mut pids = Vec::new();
    for (row, rec) in reader(text).records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| HarnessError::Format { row: row + 1, reason };
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())).into());
        }
        let index: usize = rec[0].parse().map_err(|_| bad("bad index".into()))?;
        let got = match &rec[2] {
            "concrete" => {
                let names: Vec<&str> = rec[3].split_whitespace().collect();
                set.insert_concrete(Path::from_names(topology, &names)?)
            }
            "representative" => {
                let idx = set
                    .insert_representative(parse_list(&rec[4], row + 1)?)
                    .map_err(|e| bad(e.to_string()))?;
                let nodes: Vec<&str> = rec[3].split_whitespace().collect();
                if topology.ids(&nodes)? != set.get(idx).nodes() {
                    return Err(bad("representative nodes disagree with its expansion".into()).into());
                }
                idx
            }
            other => return Err(bad(format!("unknown kind `{other}`")).into()),
        };
        if got != index {
            return Err(bad(format!("index {index} out of order or duplicated")).into());
        }
        if !rec[1].is_empty() {
            pids.push(Pid(rec[1].parse().map_err(|_| bad("bad pid".into()))?));
        }
    }
    if !pids.is_empty() {
        if pids.len() != set.len() {
            return Err(HarnessError::Format {
                row: 0,
                reason: "pids must be given for all rows or none".into(),
            }
            .into());
        }
        set.apply_pids(&pids);
    }
    Ok(set)
}

/// One desired path's concatenation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatRecord {
    pub index: usize,
    pub tag: String,
    pub path: Path,
    /// Top-level pathlet indices; empty when the path was not concatenated.
    pub parts: Vec<usize>,
    pub labels_pre: Option<usize>,
    pub labels_post: Option<usize>,
}

impl ConcatRecord {
    pub fn new(index: usize, tag: &str, path: &Path, conc: Option<&Concatenation>) -> ConcatRecord {
        ConcatRecord {
            index,
            tag: tag.to_string(),
            path: path.clone(),
            parts: conc.map_or(Vec::new(), |c| c.parts.clone()),
            labels_pre: conc.map(Concatenation::flat_count),
            labels_post: conc.map(Concatenation::label_count),
        }
    }

    /// Rebuilds the concatenation against the set it was computed on.
    pub fn concatenation(&self, set: &PathletSet) -> Option<Concatenation> {
        if self.parts.is_empty() {
            return None;
        }
        let flat = self.parts.iter().flat_map(|&i| set.expand(i)).collect();
        Some(Concatenation {
            path: self.path.clone(),
            parts: self.parts.clone(),
            flat,
        })
    }
}

pub const CONCAT_HEADER: [&str; 6] = ["index", "tag", "nodes", "labels_pre", "labels_post", "parts"];

pub fn write_concat_csv(topology: &Topology, records: &[ConcatRecord]) -> Result<String, crate::Error> {
    let mut w = writer();
    w.write_record(CONCAT_HEADER)?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
    for r in records {
        w.write_record([
            r.index.to_string(),
            r.tag.clone(),
            topology.format_nodes(r.path.nodes()),
            opt(r.labels_pre),
            opt(r.labels_post),
            join(&r.parts),
        ])?;
    }
    finish(w)
}

pub fn parse_concat_csv(topology: &Topology, text: &str) -> Result<Vec<ConcatRecord>, crate::Error> {
    let mut out = Vec::new();
    for (row, rec) in reader(text).records().enumerate() {
        let rec = rec?;
        let bad = |reason: &str| HarnessError::Format {
            row: row + 1,
            reason: reason.to_string(),
        };
        if rec.len() != 6 {
            return Err(bad("expected 6 fields").into());
        }
        let opt = |cell: &str| -> Result<Option<usize>, HarnessError> {
            if cell.is_empty() {
                Ok(None)
            } else {
                cell.parse().map(Some).map_err(|_| bad("bad label count"))
            }
        };
        let names: Vec<&str> = rec[2].split_whitespace().collect();
        out.push(ConcatRecord {
            index: rec[0].parse().map_err(|_| bad("bad index"))?,
            tag: rec[1].to_string(),
            path: Path::from_names(topology, &names)?,
            labels_pre: opt(&rec[3])?,
            labels_post: opt(&rec[4])?,
            parts: parse_list(&rec[5], row + 1)?,
        });
    }
    Ok(out)
}

/// Human-readable dump: `<tag>: <nodes> | <pids> | <reps>`, or
/// `<tag>: <nodes> | -` for a path without a concatenation.
pub fn concat_dump(topology: &Topology, set: &PathletSet, records: &[ConcatRecord]) -> String {
    let mut s = String::new();
    for r in records {
        match r.concatenation(set) {
            Some(c) => {
                let _ = writeln!(s, "{}: {}", r.tag, crate::concat::dump_line(topology, set, &c));
            }
            None => {
                let _ = writeln!(s, "{}: {} | -", r.tag, topology.format_nodes(r.path.nodes()));
            }
        }
    }
    s
}

/// Outcome of replaying one concatenated path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub index: usize,
    pub tag: String,
    pub ok: bool,
    pub lookups: usize,
    pub max_depth: usize,
    pub trace: Vec<crate::NodeId>,
    /// Why the replay failed; empty when `ok`.
    pub error: String,
}

pub fn write_sim_csv(topology: &Topology, sims: &[SimRecord]) -> Result<String, crate::Error> {
    let mut w = writer();
    w.write_record(["index", "tag", "ok", "lookups", "max_depth", "trace", "error"])?;
    for r in sims {
        w.write_record([
            r.index.to_string(),
            r.tag.clone(),
            r.ok.to_string(),
            r.lookups.to_string(),
            r.max_depth.to_string(),
            topology.format_nodes(&r.trace),
            r.error.clone(),
        ])?;
    }
    finish(w)
}

/// `index,tag,fid,kind,src,dst,len` for each desired path.
pub fn write_paths_meta(topology: &Topology, desired: &DesiredPathSet) -> Result<String, crate::Error> {
    let mut w = writer();
    w.write_record(["index", "tag", "fid", "kind", "src", "dst", "len"])?;
    for (i, e) in desired.entries.iter().enumerate() {
        let f = desired.flow_of(i);
        w.write_record([
            i.to_string(),
            e.tag.clone(),
            f.fid.clone(),
            f.kind.to_string(),
            topology.name(e.path.head()).to_string(),
            topology.name(e.path.tail()).to_string(),
            e.path.len().to_string(),
        ])?;
    }
    finish(w)
}

/// Tags from a `paths_meta.csv`, in row order.
pub fn parse_paths_meta_tags(text: &str) -> Result<Vec<String>, crate::Error> {
    let mut tags = Vec::new();
    for rec in reader(text).records() {
        let rec = rec?;
        tags.push(rec.get(1).unwrap_or_default().to_string());
    }
    Ok(tags)
}

pub fn write_occupancy_csv(topology: &Topology, core: &[u32], edge: &[u32], hbh: &[u32]) -> String {
    let mut s = String::from("node,core,edge,capacity,hop_by_hop\n");
    for v in topology.nodes() {
        let i = v.index();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            topology.name(v),
            core[i],
            edge[i],
            topology.free_capacity(v),
            hbh[i]
        );
    }
    s
}

/// Per-path labels of every scheme: `index,scheme,labels,success`.
pub fn write_baselines_csv(report: &super::MetricsReport) -> String {
    let mut s = String::from("index,scheme,labels,success\n");
    let mut row = |i: usize, scheme: &str, v: Option<usize>| {
        let _ = writeln!(
            s,
            "{i},{scheme},{},{}",
            v.map_or("na".into(), |x| x.to_string()),
            v.is_some()
        );
    };
    for (i, l) in report.labels_post.iter().enumerate() {
        row(i, "pathlet", *l);
    }
    for i in 0..report.paths {
        row(i, "hop_by_hop", Some(0));
    }
    for (i, &l) in report.hop_sr_labels.iter().enumerate() {
        row(i, "hop_sr", Some(l));
    }
    for (i, l) in report.middlepoint_labels.iter().enumerate() {
        row(i, "middlepoint_sr", *l);
    }
    s
}

//! Rules, rule tables and the label-stack forwarding simulator.
//!
//! A concrete pathlet `(v_0, ..., v_n)` with pid `i` installs `Forward` on
//! `v_0 .. v_{n-2}` and `Pop` on `v_{n-1}`, all matching `i`; `v_n` gets
//! nothing. A representative installs one `Unfold` at its start node that
//! swaps its pid for its constituents' pids. Each flow path gets an
//! `Insert` at ingress and a fid-matching `Forward` to the local port at
//! egress. Label lists are pushed so that their first element is on top.

pub mod pids;
pub mod sim;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::concat::Concatenation;
use crate::path::{PathletKind, PathletSet, Pid};
use crate::topology::{NodeId, Topology};

pub use pids::{assign_pids, pid_clashes, DEFAULT_PID_SPACE};
pub use sim::{simulate_forward, PacketState, SimTrace};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("needs {needed} pids but only {available} are available")]
    PidSpaceExhausted { needed: u32, available: u32 },
    #[error("pathlet {0} has no pid")]
    Unassigned(usize),
    #[error("conflicting rules at {node} for {matcher}")]
    Conflict { node: NodeId, matcher: Match },
    #[error("no link {0} -> {1}")]
    MissingLink(NodeId, NodeId),
    #[error("no rule at {node} for stack top {top:?}")]
    NoMatch { node: NodeId, top: Option<Pid> },
    #[error("packet loops (more than {0} steps)")]
    LoopDetected(usize),
    #[error("rule file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Match {
    Pid(Pid),
    Fid(String),
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Match::Pid(p) => write!(f, "pid {p}"),
            Match::Fid(s) => write!(f, "fid {s}"),
        }
    }
}

/// Where a packet goes after an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    /// Out the link to this neighbour.
    Node(NodeId),
    /// Back through the table at the same node.
    Table,
    /// Delivered to the attached host.
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Forward(Port),
    Pop(Port),
    Insert(Vec<Pid>, Port),
    Unfold(Vec<Pid>, Port),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub node: NodeId,
    pub matcher: Match,
    pub action: Action,
}

fn port_to(topology: &Topology, from: NodeId, to: NodeId) -> Result<Port, RuleError> {
    if topology.has_link(from, to) {
        Ok(Port::Node(to))
    } else {
        Err(RuleError::MissingLink(from, to))
    }
}

/// Rules for pathlet `idx` of `set`.
pub fn synthesize_pathlet_rules(topology: &Topology, set: &PathletSet, idx: usize) -> Result<Vec<Rule>, RuleError> {
    let s = set.get(idx);
    let pid = s.pid.ok_or(RuleError::Unassigned(idx))?;
    let nodes = s.nodes();
    match s.kind() {
        PathletKind::Concrete => {
            let n = nodes.len() - 1;
            (0..n)
                .map(|k| {
                    let port = port_to(topology, nodes[k], nodes[k + 1])?;
                    let action = if k + 1 == n {
                        Action::Pop(port)
                    } else {
                        Action::Forward(port)
                    };
                    Ok(Rule {
                        node: nodes[k],
                        matcher: Match::Pid(pid),
                        action,
                    })
                })
                .collect()
        }
        PathletKind::Representative(parts) => {
            let inner = parts
                .iter()
                .map(|&j| set.get(j).pid.ok_or(RuleError::Unassigned(j)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(vec![Rule {
                node: nodes[0],
                matcher: Match::Pid(pid),
                action: Action::Unfold(inner, Port::Table),
            }])
        }
    }
}

/// Ingress `Insert` and egress fid `Forward` for one flow path.
pub fn synthesize_flow_rules(set: &PathletSet, fid: &str, conc: &Concatenation) -> Result<Vec<Rule>, RuleError> {
    let sl = conc
        .parts
        .iter()
        .map(|&i| set.get(i).pid.ok_or(RuleError::Unassigned(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vec![
        Rule {
            node: conc.path.head(),
            matcher: Match::Fid(fid.to_string()),
            action: Action::Insert(sl, Port::Table),
        },
        Rule {
            node: conc.path.tail(),
            matcher: Match::Fid(fid.to_string()),
            action: Action::Forward(Port::Local),
        },
    ])
}

/// Per-node match tables. A match key holds at most one rule per node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleTable {
    tables: Vec<BTreeMap<Match, Action>>,
}

impl RuleTable {
    pub fn new(node_count: usize) -> RuleTable {
        RuleTable {
            tables: vec![BTreeMap::new(); node_count],
        }
    }

    /// Adds a rule. Re-adding an identical rule is a no-op; a different
    /// action for an existing match is a conflict.
    pub fn install(&mut self, rule: Rule) -> Result<(), RuleError> {
        let table = &mut self.tables[rule.node.index()];
        match table.get(&rule.matcher) {
            Some(a) if *a == rule.action => Ok(()),
            Some(_) => Err(RuleError::Conflict {
                node: rule.node,
                matcher: rule.matcher,
            }),
            None => {
                table.insert(rule.matcher, rule.action);
                Ok(())
            }
        }
    }

    pub fn install_all<I: IntoIterator<Item = Rule>>(&mut self, rules: I) -> Result<(), RuleError> {
        rules.into_iter().try_for_each(|r| self.install(r))
    }

    pub fn lookup(&self, node: NodeId, m: &Match) -> Option<&Action> {
        self.tables.get(node.index())?.get(m)
    }

    /// Rules in (node, match) order.
    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        self.tables.iter().enumerate().flat_map(|(v, t)| {
            t.iter().map(move |(m, a)| Rule {
                node: NodeId(v as u32),
                matcher: m.clone(),
                action: a.clone(),
            })
        })
    }

    pub fn len(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pid-matching rules per node.
    pub fn core_occupancy(&self) -> Vec<u32> {
        self.count(|m| matches!(m, Match::Pid(_)))
    }

    /// Fid-matching rules per node.
    pub fn edge_occupancy(&self) -> Vec<u32> {
        self.count(|m| matches!(m, Match::Fid(_)))
    }

    fn count(&self, f: impl Fn(&Match) -> bool) -> Vec<u32> {
        self.tables
            .iter()
            .map(|t| t.keys().filter(|m| f(m)).count() as u32)
            .collect()
    }
}

/// Installs every pathlet of `set` (pids must be assigned).
pub fn install_pathlets(topology: &Topology, set: &PathletSet, table: &mut RuleTable) -> Result<(), RuleError> {
    for i in 0..set.len() {
        table.install_all(synthesize_pathlet_rules(topology, set, i)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub core: Vec<u32>,
    pub edge: Vec<u32>,
    /// Nodes whose pathlet rules exceed free capacity.
    pub overflow: Vec<NodeId>,
}

pub fn table_load(topology: &Topology, table: &RuleTable) -> LoadReport {
    let mut core = table.core_occupancy();
    let mut edge = table.edge_occupancy();
    core.resize(topology.node_count(), 0);
    edge.resize(topology.node_count(), 0);
    let overflow = topology
        .nodes()
        .filter(|&v| core[v.index()] > topology.free_capacity(v))
        .collect();
    LoadReport { core, edge, overflow }
}

/// Percentage saved over `nodes`: `100 (1 - sum ours / sum baseline)`.
/// `None` when the baseline has no rules there.
pub fn rule_saving(ours: &[u32], baseline: &[u32], nodes: &[NodeId]) -> Option<f64> {
    let a: u64 = nodes.iter().map(|v| ours[v.index()] as u64).sum();
    let b: u64 = nodes.iter().map(|v| baseline[v.index()] as u64).sum();
    (b > 0).then(|| 100.0 * (1.0 - a as f64 / b as f64))
}

pub const RULES_CSV_HEADER: [&str; 5] = ["node", "match_kind", "match_value", "action", "arg"];

fn port_text(topology: &Topology, p: Port) -> String {
    match p {
        Port::Node(v) => topology.name(v).to_string(),
        Port::Table => "table".to_string(),
        Port::Local => "local".to_string(),
    }
}

fn join_pids(pids: &[Pid]) -> String {
    pids.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

/// Rule dump, one rule per row in (node, match) order.
pub fn write_rules_csv(topology: &Topology, table: &RuleTable) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RULES_CSV_HEADER)?;
    for r in table.rules() {
        let (kind, value) = match &r.matcher {
            Match::Pid(p) => ("pid", p.to_string()),
            Match::Fid(f) => ("fid", f.clone()),
        };
        let (action, arg) = match &r.action {
            Action::Forward(p) => ("forward", port_text(topology, *p)),
            Action::Pop(p) => ("pop", port_text(topology, *p)),
            Action::Insert(l, _) => ("insert", join_pids(l)),
            Action::Unfold(l, _) => ("unfold", join_pids(l)),
        };
        w.write_record([topology.name(r.node), kind, &value, action, &arg])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Inverse of [`write_rules_csv`].
pub fn parse_rules_csv(topology: &Topology, text: &str) -> Result<RuleTable, crate::Error> {
    let mut table = RuleTable::new(topology.node_count());
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |reason: String| RuleError::Parse { line, reason };
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", rec.len())).into());
        }
        let node = topology.id(&rec[0])?;
        let pid = |s: &str| s.parse::<u32>().map(Pid).map_err(|_| bad(format!("bad pid {s}")));
        let matcher = match &rec[1] {
            "pid" => Match::Pid(pid(&rec[2])?),
            "fid" => Match::Fid(rec[2].to_string()),
            k => return Err(bad(format!("unknown match kind {k}")).into()),
        };
        let port = |s: &str| -> Result<Port, crate::Error> {
            Ok(match s {
                "local" => Port::Local,
                "table" => Port::Table,
                name => Port::Node(topology.id(name)?),
            })
        };
        let pids = |s: &str| s.split_whitespace().map(pid).collect::<Result<Vec<_>, _>>();
        let action = match &rec[3] {
            "forward" => Action::Forward(port(&rec[4])?),
            "pop" => Action::Pop(port(&rec[4])?),
            "insert" => Action::Insert(pids(&rec[4])?, Port::Table),
            "unfold" => Action::Unfold(pids(&rec[4])?, Port::Table),
            a => return Err(bad(format!("unknown action {a}")).into()),
        };
        table.install(Rule { node, matcher, action })?;
    }
    Ok(table)
}

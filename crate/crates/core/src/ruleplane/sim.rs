//! Replays a packet hop by hop through an installed rule table.

use super::{Action, Match, Port, RuleError, RuleTable};
use crate::path::Pid;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketState {
    pub node: NodeId,
    /// Top of stack is the last element.
    pub stack: Vec<Pid>,
    pub fid: String,
}

impl PacketState {
    fn push_list(&mut self, list: &[Pid]) {
        self.stack.extend(list.iter().rev());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    pub nodes: Vec<NodeId>,
    /// Table lookups performed, including re-matches after Insert/Unfold.
    pub lookups: usize,
    pub max_depth: usize,
    /// Labels left when the packet was delivered; empty for a sound install.
    pub final_stack: Vec<Pid>,
}

/// Injects a packet of flow `fid` at `ingress` and follows the rules until
/// it is delivered locally. Packets with labels match on the top label;
/// label-free packets match on their fid.
pub fn simulate_forward(
    topology: &Topology,
    table: &RuleTable,
    fid: &str,
    ingress: NodeId,
) -> Result<SimTrace, RuleError> {
    let mut pkt = PacketState {
        node: ingress,
        stack: Vec::new(),
        fid: fid.to_string(),
    };
    let mut trace = SimTrace {
        nodes: vec![ingress],
        lookups: 0,
        max_depth: 0,
        final_stack: Vec::new(),
    };
    let n = topology.node_count();
    // Each hop costs at most one lookup plus re-matches bounded by the
    // labels pushed at that node.
    let mut budget = 4 * n + 8;
    loop {
        if budget == 0 {
            return Err(RuleError::LoopDetected(4 * n + 8));
        }
        budget -= 1;
        trace.lookups += 1;
        let top = pkt.stack.last().copied();
        let key = match top {
            Some(p) => Match::Pid(p),
            None => Match::Fid(pkt.fid.clone()),
        };
        let action = table
            .lookup(pkt.node, &key)
            .ok_or(RuleError::NoMatch { node: pkt.node, top })?;
        let port = match action {
            Action::Forward(p) => *p,
            Action::Pop(p) => {
                pkt.stack.pop();
                *p
            }
            Action::Insert(list, p) => {
                pkt.push_list(list);
                budget += list.len();
                *p
            }
            Action::Unfold(list, p) => {
                pkt.stack.pop();
                pkt.push_list(list);
                budget += list.len();
                *p
            }
        };
        trace.max_depth = trace.max_depth.max(pkt.stack.len());
        match port {
            Port::Local => {
                trace.final_stack = pkt.stack;
                return Ok(trace);
            }
            Port::Table => {}
            Port::Node(next) => {
                if !topology.has_link(pkt.node, next) {
                    return Err(RuleError::MissingLink(pkt.node, next));
                }
                pkt.node = next;
                trace.nodes.push(next);
                if trace.nodes.len() > n {
                    return Err(RuleError::LoopDetected(n));
                }
            }
        }
    }
}

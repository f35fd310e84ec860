//! Pathlet routing: choose a small set of sub-paths to preinstall so every
//! desired path is a short concatenation of pathlet labels, then synthesize
//! and verify the rule tables.
//!
//! Pipeline: [`topology`] and [`workload`] build the desired path set,
//! [`lagrangian`] selects pathlets (checked against the exact oracle in
//! [`selection`]), [`concat`] writes each path as a minimum concatenation,
//! [`ruleplane`] assigns labels, installs rules and replays packets, and
//! [`baselines`] supplies the comparison schemes for [`harness`].

pub mod baselines;
pub mod candidates;
pub mod concat;
pub mod harness;
pub mod lagrangian;
pub mod path;
pub mod routing;
pub mod ruleplane;
pub mod selection;
pub mod tiling;
pub mod topology;
pub mod workload;

pub use candidates::{enumerate_candidates, CandidateSet};
pub use path::{is_subpath, Path, Pathlet, PathletKind, PathletSet, Pid};
pub use topology::{LinkAttrs, NodeId, Topology};

use thiserror::Error;

/// Crate-level error wrapping each module's failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] topology::TopologyError),
    #[error(transparent)]
    Path(#[from] path::PathError),
    #[error(transparent)]
    Workload(#[from] workload::WorkloadError),
    #[error(transparent)]
    Selection(#[from] selection::SelectionError),
    #[error(transparent)]
    Concat(#[from] concat::ConcatError),
    #[error(transparent)]
    Rule(#[from] ruleplane::RuleError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

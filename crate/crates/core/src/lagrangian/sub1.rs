//! Per-path sub-problem: min `y_P + sum_S lambda_S x_{S,P}`.

use crate::selection::SelectionInstance;
use crate::tiling::{best_tiling_bounded, Tiling};

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Sub1Result {
    /// Candidates with x = 1, in path order.
    pub x: Vec<usize>,
    pub y: bool,
    pub value: f64,
}

/// Exact by branch and bound over tilings of `P`. Leaving the path
/// uncovered costs 1, so only tilings cheaper than 1 are searched. A tiling
/// costing exactly 1 ties with `y = 1`; `y = 1` is returned.
pub fn solve_sub1_path(inst: &SelectionInstance, p: usize, lambda: &[f64]) -> Sub1Result {
    let tiling = best_tiling_bounded(inst.segments(p), inst.paths[p].len(), inst.m_max, 1.0, |s| {
        Some(lambda[s])
    });
    from_tiling(tiling)
}

fn from_tiling(tiling: Option<Tiling>) -> Sub1Result {
    match tiling {
        Some(t) if t.cost < 1.0 - TIE_EPS => Sub1Result {
            x: t.parts,
            y: false,
            value: t.cost,
        },
        _ => Sub1Result {
            x: Vec::new(),
            y: true,
            value: 1.0,
        },
    }
}

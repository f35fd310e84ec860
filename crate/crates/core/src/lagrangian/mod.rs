//! Lagrangian heuristic for pathlet selection.
//!
//! The linking constraints `sum_P x_{S,P} <= |P^D| t_S` are moved into the
//! objective with multipliers `lambda_S >= 0`, which splits the problem into
//! one tiling problem per path ([`sub1`]) and a capacity knapsack over `t`
//! ([`knapsack`]). A subgradient loop drives the multipliers while each
//! iterate's `t` is repaired into a feasible selection. [`rounds`] repeats
//! the loop on the paths left uncovered, with fresh candidates.

pub mod knapsack;
pub mod rounds;
pub mod sub1;

use rayon::prelude::*;

use crate::selection::{SelectionInstance, SelectionSolution};
use crate::tiling::best_tiling;

pub use knapsack::{solve_sub2, Sub2Result};
pub use rounds::{select_pathlets, CandidateSource, RoundReport, SelectionOutcome, SubpathSampler};
pub use sub1::{solve_sub1_path, Sub1Result};

pub const DEFAULT_EPSILON_STAR: f64 = 1e-6;
pub const DEFAULT_T_PRIME: usize = 30;
pub const DEFAULT_OUTER_LIMIT: usize = 10;
pub const DEFAULT_HARD_CAP: usize = 500;
pub const DEFAULT_BETA_FLOOR: f64 = 1e-4;
pub const LAMBDA0: f64 = 1e-3;
pub const BETA1: f64 = 2.0;
/// Stall count at which beta is halved.
pub const STALL_HALVE: usize = 4;
const CONSOLIDATE_SWEEPS: usize = 4;
/// Keeps the popularity tie-break below one rule for paths under 1000 links.
const TIE_WEIGHT: f64 = 1e-3;
const ZERO_STEP_PERTURB: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon_star: f64,
    pub t_prime: usize,
    /// Outer rounds of [`select_pathlets`].
    pub outer_limit: usize,
    pub hard_cap: usize,
    pub beta_floor: f64,
    pub seed: u64,
    /// Solve per-path sub-problems on the rayon pool. Results are identical
    /// either way.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_star: DEFAULT_EPSILON_STAR,
            t_prime: DEFAULT_T_PRIME,
            outer_limit: DEFAULT_OUTER_LIMIT,
            hard_cap: DEFAULT_HARD_CAP,
            beta_floor: DEFAULT_BETA_FLOOR,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgradientState {
    pub lambda: Vec<f64>,
    pub k: usize,
    pub beta: f64,
    pub z_up: f64,
    pub z_lb: f64,
    pub stall: usize,
    pub epsilon: f64,
    pub best: SelectionSolution,
}

impl SubgradientState {
    pub fn new(inst: &SelectionInstance) -> SubgradientState {
        SubgradientState {
            lambda: vec![LAMBDA0; inst.candidate_count()],
            k: 1,
            beta: BETA1,
            z_up: f64::INFINITY,
            // The objective counts paths, so 0 is a valid lower bound.
            z_lb: 0.0,
            stall: 0,
            epsilon: f64::INFINITY,
            best: inst.empty_solution(),
        }
    }
}

/// One iteration of the subgradient loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub z_lr: f64,
    pub z_fe: f64,
    pub z_up: f64,
    pub z_lb: f64,
    pub eps: f64,
    pub beta: f64,
    pub stall: usize,
    pub lambda_min: f64,
}

pub const TRACE_HEADER: &str = "k,Z_LR,z_FE,z_UP,z_LB,eps,beta,stall";

impl TraceRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.9},{},{},{:.9},{:.9},{},{}",
            self.k, self.z_lr, self.z_fe, self.z_up, self.z_lb, self.eps, self.beta, self.stall
        )
    }
}

#[derive(Debug, Clone)]
pub struct LagrangianValue {
    pub z_lr: f64,
    pub x: Vec<Vec<usize>>,
    pub y: Vec<bool>,
    pub t: Vec<bool>,
    pub sub1: Vec<f64>,
    pub sub2: f64,
}

fn per_path<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, parallel: bool, f: F) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// `Z_LR(lambda) = sum_P Z_Sub1,P + Z_Sub2` with the assembled sub-solutions.
pub fn lagrangian_value(inst: &SelectionInstance, lambda: &[f64]) -> LagrangianValue {
    lagrangian_value_with(inst, lambda, true)
}

fn lagrangian_value_with(inst: &SelectionInstance, lambda: &[f64], parallel: bool) -> LagrangianValue {
    let rows = per_path(inst.path_count(), parallel, |p| solve_sub1_path(inst, p, lambda));
    let s2 = solve_sub2(inst, lambda);
    let sub1: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let z_lr = sub1.iter().sum::<f64>() + s2.value;
    let (x, y) = rows.into_iter().map(|r| (r.x, r.y)).unzip();
    LagrangianValue {
        z_lr,
        x,
        y,
        t: s2.t,
        sub1,
        sub2: s2.value,
    }
}

/// Fixes `t` and tiles each path with selected candidates only. Among
/// coverings, one minimizing `sum_S l_S / popularity(S)` is chosen, which
/// steers paths toward shared pathlets.
pub fn restore_feasible(inst: &SelectionInstance, t: &[bool]) -> (SelectionSolution, usize) {
    restore_feasible_with(inst, t, true)
}

fn restore_feasible_with(inst: &SelectionInstance, t: &[bool], parallel: bool) -> (SelectionSolution, usize) {
    let rows = per_path(inst.path_count(), parallel, |p| {
        best_tiling(inst.segments(p), inst.paths[p].len(), inst.m_max, |s| {
            t[s].then(|| inst.candidates[s].len() as f64 / inst.popularity(s).max(1) as f64)
        })
    });
    let mut sol = inst.empty_solution();
    sol.t = t.to_vec();
    for (p, row) in rows.into_iter().enumerate() {
        if let Some(tiling) = row {
            sol.x[p] = tiling.parts;
            sol.y[p] = false;
        }
    }
    let z_fe = sol.y.iter().filter(|&&y| y).count();
    (sol, z_fe)
}

/// Sweeps over covered paths, re-tiling each one to minimize the rules it
/// adds given every other path's tiling: pathlets already in use are free,
/// fresh ones cost their length. `l_S / popularity(S)` breaks ties. Coverage
/// and `t` are unchanged; the rule total never grows. Returns the sweeps run.
pub fn consolidate_tilings(inst: &SelectionInstance, sol: &mut SelectionSolution) -> usize {
    // Two starts: the tilings as given, and an empty slate filled longest
    // path first. The smaller rule footprint wins.
    let mut warm = sol.x.clone();
    let warm_sweeps = sweep_tilings(inst, sol, &mut warm, false);
    let mut cold = sol.x.clone();
    let cold_sweeps = sweep_tilings(inst, sol, &mut cold, true);
    if footprint(inst, &cold) < footprint(inst, &warm) {
        sol.x = cold;
        cold_sweeps
    } else {
        sol.x = warm;
        warm_sweeps
    }
}

/// Hops of rule state the tilings need: the summed length of distinct parts.
pub fn footprint(inst: &SelectionInstance, x: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; inst.candidate_count()];
    let mut total = 0;
    for &s in x.iter().flatten() {
        if !std::mem::replace(&mut seen[s], true) {
            total += inst.candidates[s].len();
        }
    }
    total
}

fn sweep_tilings(inst: &SelectionInstance, sol: &SelectionSolution, x: &mut [Vec<usize>], cold: bool) -> usize {
    let mut uses = vec![0u32; inst.candidate_count()];
    let mut order: Vec<usize> = (0..inst.path_count()).filter(|&p| !sol.y[p]).collect();
    if cold {
        order.sort_by_key(|&p| (std::cmp::Reverse(inst.paths[p].len()), p));
        for &p in &order {
            x[p].clear();
        }
    } else {
        for &p in &order {
            for &s in &x[p] {
                uses[s] += 1;
            }
        }
    }
    let mut sweeps = 0;
    while sweeps < CONSOLIDATE_SWEEPS {
        sweeps += 1;
        let mut changed = false;
        for &p in &order {
            for &s in &x[p] {
                uses[s] -= 1;
            }
            let tiling = best_tiling(inst.segments(p), inst.paths[p].len(), inst.m_max, |s| {
                sol.t[s].then(|| {
                    let l = inst.candidates[s].len() as f64;
                    let fresh = if uses[s] == 0 { l } else { 0.0 };
                    fresh + TIE_WEIGHT * l / inst.popularity(s).max(1) as f64
                })
            })
            .expect("a covered path keeps a tiling over its selected pathlets");
            if tiling.parts != x[p] {
                changed = true;
                x[p] = tiling.parts;
            }
            for &s in &x[p] {
                uses[s] += 1;
            }
        }
        if !changed {
            break;
        }
    }
    sweeps
}

/// Subgradient `mu_S = sum_P x_{S,P} - |P^D| t_S`.
pub fn subgradient(inst: &SelectionInstance, x: &[Vec<usize>], t: &[bool]) -> Vec<f64> {
    let n = inst.path_count() as f64;
    let mut mu: Vec<f64> = t.iter().map(|&on| if on { -n } else { 0.0 }).collect();
    for &s in x.iter().flatten() {
        mu[s] += 1.0;
    }
    mu
}

/// Outcome of a multiplier step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Moved {
        theta: f64,
    },
    /// `||mu|| = 0`: the step size is undefined and lambda is left as is.
    ZeroSubgradient,
}

/// `lambda <- max(lambda + theta mu, 0)` with
/// `theta = beta (z_UP - z_LB) / ||mu||^2`.
pub fn subgradient_update(
    state: &mut SubgradientState,
    inst: &SelectionInstance,
    x: &[Vec<usize>],
    t: &[bool],
) -> Step {
    let mu = subgradient(inst, x, t);
    let norm2: f64 = mu.iter().map(|m| m * m).sum();
    if norm2 == 0.0 {
        return Step::ZeroSubgradient;
    }
    let theta = state.beta * (state.z_up - state.z_lb) / norm2;
    for (l, m) in state.lambda.iter_mut().zip(&mu) {
        *l = (*l + theta * m).max(0.0);
    }
    Step::Moved { theta }
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub best: SelectionSolution,
    pub z_up: f64,
    pub z_lb: f64,
    pub trace: Vec<TraceRow>,
}

/// The subgradient loop on one candidate set. Stops when the iteration
/// budget is spent, the gap closes below `epsilon_star`, or the lower bound
/// stalls for `t_prime` iterations. At least one iteration always runs.
pub fn one_round_selection(inst: &SelectionInstance, config: &SolverConfig) -> RoundResult {
    let mut st = SubgradientState::new(inst);
    let mut trace = Vec::new();
    let budget = inst.path_count().max(2).min(config.hard_cap.max(2));
    let mut perturbed = false;

    if inst.path_count() == 0 {
        return RoundResult {
            best: st.best,
            z_up: 0.0,
            z_lb: 0.0,
            trace,
        };
    }

    while st.k < budget && st.epsilon > config.epsilon_star && st.stall < config.t_prime {
        let lv = lagrangian_value_with(inst, &st.lambda, config.parallel);
        let (sol, z_fe) = restore_feasible_with(inst, &lv.t, config.parallel);
        let z_fe = z_fe as f64;
        if z_fe < st.z_up {
            st.z_up = z_fe;
            st.best = sol;
        }
        let prev_lb = st.z_lb;
        st.z_lb = st.z_lb.max(lv.z_lr);
        if st.z_lb > prev_lb {
            st.stall = 0;
        } else {
            st.stall += 1;
        }
        if st.stall >= STALL_HALVE && st.beta / 2.0 >= config.beta_floor {
            st.beta /= 2.0;
        }
        st.epsilon = st.z_up - st.z_lb;
        trace.push(TraceRow {
            k: st.k,
            z_lr: lv.z_lr,
            z_fe,
            z_up: st.z_up,
            z_lb: st.z_lb,
            eps: st.epsilon,
            beta: st.beta,
            stall: st.stall,
            lambda_min: st.lambda.iter().copied().fold(f64::INFINITY, f64::min),
        });
        if st.epsilon <= config.epsilon_star {
            break;
        }
        if subgradient_update(&mut st, inst, &lv.x, &lv.t) == Step::ZeroSubgradient {
            if perturbed {
                break;
            }
            perturbed = true;
            for (l, &on) in st.lambda.iter_mut().zip(&lv.t) {
                if !on {
                    *l += ZERO_STEP_PERTURB;
                }
            }
        }
        st.k += 1;
    }
    RoundResult {
        best: st.best,
        z_up: st.z_up,
        z_lb: st.z_lb,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{Path, Pathlet};
    use crate::selection::{check_feasible, exact_solve, objective, ExactLimits};
    use crate::topology::Topology;

    fn instance_with(cands: &[&str], caps: u32) -> SelectionInstance {
        let t = Topology::parse("directed\na b\nb c\na d\nd c\nc e\ne f\nc g\ng f\n").unwrap();
        let p = |s: &str| Path::from_names(&t, &s.split_whitespace().collect::<Vec<_>>()).unwrap();
        let paths = vec![p("a b c e f"), p("a b c g f"), p("a d c e f"), p("a d c g f")];
        let cands = cands.iter().map(|s| Pathlet::concrete(p(s))).collect();
        SelectionInstance::new(paths, cands, vec![caps; t.node_count()], 3).unwrap()
    }

    fn worked_instance() -> SelectionInstance {
        instance_with(&["a b c", "c e f", "a d c", "c g f"], 2000)
    }

    #[test]
    fn lagrangian_value_on_worked_example() {
        let inst = worked_instance();
        let lv = lagrangian_value(&inst, &[1e-3; 4]);
        assert!((lv.z_lr + 8e-3).abs() < 1e-12);
        assert_eq!(lv.t, vec![true; 4]);
        assert!(lv.y.iter().all(|&y| !y));
        let lv0 = lagrangian_value(&inst, &[0.0; 4]);
        assert_eq!(lv0.z_lr, 0.0);
        assert_eq!(lv0.t, vec![false; 4]);
    }

    #[test]
    fn subgradient_on_worked_example() {
        let inst = worked_instance();
        let lv = lagrangian_value(&inst, &[1e-3; 4]);
        assert_eq!(subgradient(&inst, &lv.x, &lv.t), vec![-2.0; 4]);
    }

    #[test]
    fn update_projects_and_handles_zero() {
        let inst = instance_with(&["a b c"], 2000);
        let mut st = SubgradientState::new(&inst);
        st.lambda = vec![0.1];
        // mu = 0 - 4 = -4; theta = 2 * (0.1 - 0) / 16 = 0.0125
        st.z_up = 0.1;
        st.z_lb = 0.0;
        let step = subgradient_update(&mut st, &inst, &vec![vec![]; 4], &[true]);
        assert_eq!(step, Step::Moved { theta: 0.0125 });
        assert!((st.lambda[0] - 0.05).abs() < 1e-15);
        st.z_up = 0.8; // theta 0.1, step -0.4
        subgradient_update(&mut st, &inst, &vec![vec![]; 4], &[true]);
        assert_eq!(st.lambda[0], 0.0);
        let before = st.lambda.clone();
        assert_eq!(
            subgradient_update(&mut st, &inst, &vec![vec![]; 4], &[false]),
            Step::ZeroSubgradient
        );
        assert_eq!(st.lambda, before);
    }

    #[test]
    fn restoration_examples() {
        let inst = worked_instance();
        assert_eq!(restore_feasible(&inst, &[true; 4]).1, 0);
        assert_eq!(restore_feasible(&inst, &[false; 4]).1, 4);
        let (sol, z) = restore_feasible(&inst, &[true, true, false, false]);
        assert_eq!(z, 3);
        assert!(check_feasible(&inst, &sol).unwrap().is_feasible());
    }

    #[test]
    fn one_round_on_worked_example() {
        let inst = worked_instance();
        let r = one_round_selection(&inst, &SolverConfig::default());
        assert_eq!(r.z_up, 0.0);
        assert_eq!(objective(&r.best), 0);
        assert!(check_feasible(&inst, &r.best).unwrap().is_feasible());
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn one_round_without_candidates() {
        let inst = instance_with(&[], 2000);
        let r = one_round_selection(&inst, &SolverConfig::default());
        assert_eq!(r.z_up, 4.0);
        assert_eq!(objective(&r.best), 4);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let inst = instance_with(&["a b c", "c e f", "a d c", "c g f", "a b", "b c", "c e", "e f"], 1);
        let par = one_round_selection(&inst, &SolverConfig::default());
        let ser = one_round_selection(
            &inst,
            &SolverConfig {
                parallel: false,
                ..SolverConfig::default()
            },
        );
        assert_eq!(par.trace, ser.trace);
        assert_eq!(par.best, ser.best);
        let exact = exact_solve(&inst, ExactLimits::default()).unwrap();
        assert!(objective(&exact) as f64 <= par.z_up);
        assert!(par.z_lb <= objective(&exact) as f64);
    }

    #[test]
    fn consolidation_never_grows_the_footprint() {
        let cands = [
            "a b c", "c e f", "a d c", "c g f", "a b", "b c", "c e", "e f", "a d", "d c", "c g", "g f",
        ];
        let inst = instance_with(&cands, 2000);
        let (mut sol, z) = restore_feasible(&inst, &[true; 12]);
        assert_eq!(z, 0);
        // Start from the all single-link tilings.
        sol.x = vec![
            vec![4, 5, 6, 7],
            vec![4, 5, 10, 11],
            vec![8, 9, 6, 7],
            vec![8, 9, 10, 11],
        ];
        let before = footprint(&inst, &sol.x);
        assert_eq!(before, 8);
        consolidate_tilings(&inst, &mut sol);
        assert!(footprint(&inst, &sol.x) <= before);
        assert!(sol.y.iter().all(|&y| !y));
        assert!(check_feasible(&inst, &sol).unwrap().is_feasible());
    }
}

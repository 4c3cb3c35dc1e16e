//! Branch-and-bound solver for mixed binary/continuous linear programs.
//!
//! Strategy: best-first on the relaxation bound, with depth-first
//! plunging until the first incumbent is found. Branching picks the
//! most fractional binary (ties to the lowest variable index); child
//! relaxations warm-start from the parent's simplex basis. Integral
//! relaxation points are re-solved with the binaries pinned so the
//! reported incumbent is an exact vertex, not an epsilon-rounded one.
//!
//! The engine is deterministic: identical inputs produce identical
//! trees, incumbents, and bounds (wall time aside).

use crate::milp::{evaluate, MilpModel, ModelError, Sense};
use crate::simplex::{solve_lp_bounded, BasisState, LpError, LpOptions, LpStatus};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Binaries within this distance of an integer count as integral.
pub const INT_TOL: f64 = 1e-6;
/// Gaps at or below this are reported as proven optimality.
const GAP_TIGHT: f64 = 1e-9;
const LOG_EVERY: u64 = 256;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverParams {
    /// Wall-clock budget in seconds.
    pub time_limit_s: f64,
    /// Relative optimality gap at which the search stops.
    pub rel_gap: f64,
    /// Optional cap on explored nodes; hitting it reports `time_limit`.
    pub node_limit: Option<u64>,
    /// Reserved for randomized strategies; the current engine is
    /// deterministic and ignores it.
    pub seed: u64,
    /// Accepted for interface stability; the engine is single-threaded.
    pub threads: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            time_limit_s: 120.0,
            rel_gap: 0.01,
            node_limit: None,
            seed: 0,
            threads: 1,
        }
    }
}

impl SolverParams {
    /// Params for exact solves: no gap slack, same time budget.
    pub fn exact() -> Self {
        SolverParams {
            rel_gap: 0.0,
            ..SolverParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

/// Outcome of a solve. `objective_lb <= objective_ub` always holds;
/// for maximization the incumbent value is the lower bound, for
/// minimization it is the upper bound. Bounds may be infinite (stored
/// as "inf"/"-inf" in serialized form) when nothing is proven yet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Best feasible point found, in model variable order.
    pub incumbent: Option<Vec<f64>>,
    #[serde(with = "crate::sfloat")]
    pub objective_lb: f64,
    #[serde(with = "crate::sfloat")]
    pub objective_ub: f64,
    #[serde(with = "crate::sfloat")]
    pub gap: f64,
    pub nodes: u64,
    pub wall_time_s: f64,
}

impl SolveReport {
    /// Objective of the incumbent: the primal bound sits on the lower
    /// side when maximizing and the upper side when minimizing.
    pub fn objective(&self, sense: Sense) -> Option<f64> {
        self.incumbent.as_ref().map(|_| match sense {
            Sense::Maximize => self.objective_lb,
            Sense::Minimize => self.objective_ub,
        })
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    BadInput(#[from] ModelError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

struct Node {
    /// Inherited relaxation bound in internal (maximize) value space.
    bound_v: f64,
    /// Bound overrides accumulated from the root: (var, lower, upper).
    deltas: Vec<(usize, f64, f64)>,
    basis: Option<BasisState>,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: best bound first, then first-in first-out.
        self.bound_v
            .total_cmp(&other.bound_v)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Engine<'a> {
    model: &'a MilpModel,
    params: &'a SolverParams,
    /// +1 for maximize, -1 for minimize; internal values are factor*obj.
    factor: f64,
    binaries: Vec<usize>,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    heap: BinaryHeap<Node>,
    stack: Vec<Node>,
    lb_v: f64,
    incumbent: Option<Vec<f64>>,
    nodes: u64,
    seq: u64,
    t0: Instant,
    deadline: Instant,
}

fn prune_eps(lb_v: f64) -> f64 {
    if lb_v.is_finite() {
        1e-9 * lb_v.abs().max(1.0)
    } else {
        0.0
    }
}

fn relative_gap(lb_v: f64, ub_v: f64) -> f64 {
    if ub_v <= lb_v {
        return 0.0;
    }
    if !lb_v.is_finite() || !ub_v.is_finite() {
        return f64::INFINITY;
    }
    (ub_v - lb_v) / lb_v.abs().max(1e-9)
}

/// Solves the model to the requested gap within the time budget.
pub fn solve_milp(model: &MilpModel, params: &SolverParams) -> Result<SolveReport, SolveError> {
    model.check()?;
    let t0 = Instant::now();
    let budget = params.time_limit_s.clamp(0.0, 1e9);
    let mut engine = Engine {
        model,
        params,
        factor: match model.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        },
        binaries: model.binary_indices(),
        root_lower: model.variables.iter().map(|v| v.lower).collect(),
        root_upper: model.variables.iter().map(|v| v.upper).collect(),
        heap: BinaryHeap::new(),
        stack: Vec::new(),
        lb_v: f64::NEG_INFINITY,
        incumbent: None,
        nodes: 0,
        seq: 0,
        t0,
        deadline: t0 + Duration::from_secs_f64(budget),
    };
    engine.run()
}

impl Engine<'_> {
    fn run(&mut self) -> Result<SolveReport, SolveError> {
        let root = Node {
            bound_v: f64::INFINITY,
            deltas: Vec::new(),
            basis: None,
            seq: self.next_seq(),
        };
        self.stack.push(root);
        loop {
            let ub_open = self.open_bound_max();
            if self.stack.is_empty() && self.heap.is_empty() {
                let status = if self.incumbent.is_some() {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                };
                return Ok(self.finish(status, f64::NEG_INFINITY));
            }
            if self.incumbent.is_some() {
                let gap = relative_gap(self.lb_v, ub_open.max(self.lb_v));
                if gap <= self.params.rel_gap {
                    let status = if gap <= GAP_TIGHT {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::GapLimit
                    };
                    return Ok(self.finish(status, ub_open));
                }
            }
            if Instant::now() >= self.deadline {
                return Ok(self.finish(SolveStatus::TimeLimit, ub_open));
            }
            if let Some(limit) = self.params.node_limit {
                if self.nodes >= limit {
                    return Ok(self.finish(SolveStatus::TimeLimit, ub_open));
                }
            }

            let node = self.pop_node().expect("pool checked non-empty");
            if node.bound_v <= self.lb_v + prune_eps(self.lb_v) {
                continue;
            }
            let bound_v = node.bound_v;
            self.nodes += 1;
            if self.nodes.is_multiple_of(LOG_EVERY) {
                self.log_progress(ub_open);
            }

            let res = self
                .solve_node_lp(&node.deltas, node.basis)
                .map_err(|e| SolveError::Numerical(e.to_string()))?;
            match res.status {
                LpStatus::TimeLimit => {
                    return Ok(self.finish(SolveStatus::TimeLimit, ub_open.max(bound_v)));
                }
                LpStatus::IterLimit => {
                    return Err(SolveError::Numerical(
                        "iteration limit in node relaxation".into(),
                    ));
                }
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    if self.nodes == 1 {
                        return Ok(self.finish(SolveStatus::Unbounded, f64::INFINITY));
                    }
                    return Err(SolveError::Numerical(
                        "child relaxation unbounded under tightened bounds".into(),
                    ));
                }
                LpStatus::Optimal => {}
            }

            let v = self.factor * res.objective;
            if v <= self.lb_v + prune_eps(self.lb_v) {
                continue;
            }
            match self.most_fractional(&res.x) {
                None => self.try_incumbent(res.x, res.objective, res.basis),
                Some(j) => {
                    let up_first = res.x[j] >= 0.5;
                    let up = Node {
                        bound_v: v,
                        deltas: extend(&node.deltas, (j, 1.0, 1.0)),
                        basis: Some(res.basis.clone()),
                        seq: self.next_seq(),
                    };
                    let down = Node {
                        bound_v: v,
                        deltas: extend(&node.deltas, (j, 0.0, 0.0)),
                        basis: Some(res.basis),
                        seq: self.next_seq(),
                    };
                    if self.incumbent.is_none() {
                        let (dive, rest) = if up_first { (up, down) } else { (down, up) };
                        self.heap.push(rest);
                        self.stack.push(dive);
                    } else {
                        self.heap.push(up);
                        self.heap.push(down);
                    }
                }
            }
        }
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    fn pop_node(&mut self) -> Option<Node> {
        if self.incumbent.is_none() {
            if let Some(n) = self.stack.pop() {
                return Some(n);
            }
        }
        self.heap.pop()
    }

    fn open_bound_max(&self) -> f64 {
        let heap_best = self.heap.peek().map_or(f64::NEG_INFINITY, |n| n.bound_v);
        let stack_best = self
            .stack
            .iter()
            .map(|n| n.bound_v)
            .fold(f64::NEG_INFINITY, f64::max);
        heap_best.max(stack_best)
    }

    fn solve_node_lp(
        &self,
        deltas: &[(usize, f64, f64)],
        basis: Option<BasisState>,
    ) -> Result<crate::simplex::LpResult, LpError> {
        let mut lower = self.root_lower.clone();
        let mut upper = self.root_upper.clone();
        for &(j, lo, hi) in deltas {
            lower[j] = lo;
            upper[j] = hi;
        }
        let opts = LpOptions {
            deadline: Some(self.deadline),
            max_iters: None,
            warm_start: basis,
        };
        solve_lp_bounded(self.model, &lower, &upper, &opts)
    }

    /// Most fractional binary, ties to the lowest index. `None` means
    /// the point is integral to tolerance.
    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > INT_TOL && best.is_none_or(|(_, d)| dist > d) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Accepts an integral relaxation point as incumbent, re-solving
    /// the continuous part with binaries pinned unless they already sit
    /// exactly on 0/1.
    fn try_incumbent(&mut self, x: Vec<f64>, objective: f64, basis: BasisState) {
        let exact = self.binaries.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0);
        let candidate = if exact {
            Some((x, objective))
        } else {
            let mut lower = self.root_lower.clone();
            let mut upper = self.root_upper.clone();
            for &j in &self.binaries {
                let pinned = x[j].round();
                lower[j] = pinned;
                upper[j] = pinned;
            }
            let opts = LpOptions {
                deadline: Some(self.deadline),
                max_iters: None,
                warm_start: Some(basis),
            };
            match solve_lp_bounded(self.model, &lower, &upper, &opts) {
                Ok(r) if r.status == LpStatus::Optimal
                    && evaluate(self.model, &r.x, INT_TOL)
                        .is_ok_and(|e| e.is_feasible()) =>
                {
                    Some((r.x, r.objective))
                }
                _ => {
                    log::warn!("dropping integral candidate: pinned re-solve failed");
                    None
                }
            }
        };
        if let Some((point, obj)) = candidate {
            let v = self.factor * obj;
            if v > self.lb_v {
                self.lb_v = v;
                self.incumbent = Some(point);
                // Switch from plunging to best-first.
                let drained: Vec<Node> = self.stack.drain(..).collect();
                for n in drained {
                    self.heap.push(n);
                }
                self.log_progress(self.open_bound_max());
            }
        }
    }

    fn log_progress(&self, ub_open: f64) {
        let ub_v = ub_open.max(self.lb_v);
        let (lb, ub) = self.objective_bounds(self.lb_v, ub_v);
        log::debug!(
            "node={} lb={} ub={} gap={} t={:.3}",
            self.nodes,
            lb,
            ub,
            relative_gap(self.lb_v, ub_v),
            self.t0.elapsed().as_secs_f64()
        );
    }

    fn objective_bounds(&self, lb_v: f64, ub_v: f64) -> (f64, f64) {
        if self.factor > 0.0 {
            (lb_v, ub_v)
        } else {
            (-ub_v, -lb_v)
        }
    }

    fn finish(&mut self, status: SolveStatus, extra_open_bound: f64) -> SolveReport {
        let ub_v = self
            .lb_v
            .max(self.open_bound_max())
            .max(extra_open_bound);
        let gap = relative_gap(self.lb_v, ub_v);
        let (objective_lb, objective_ub) = self.objective_bounds(self.lb_v, ub_v);
        let report = SolveReport {
            status,
            incumbent: self.incumbent.take(),
            objective_lb,
            objective_ub,
            gap,
            nodes: self.nodes,
            wall_time_s: self.t0.elapsed().as_secs_f64(),
        };
        log::info!(
            "node={} lb={} ub={} gap={} t={:.3} status={}",
            report.nodes,
            report.objective_lb,
            report.objective_ub,
            report.gap,
            report.wall_time_s,
            report.status
        );
        report
    }
}

fn extend(deltas: &[(usize, f64, f64)], extra: (usize, f64, f64)) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::with_capacity(deltas.len() + 1);
    out.extend_from_slice(deltas);
    out.push(extra);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{ConstraintSense, Integrality, MilpModel, Sense};

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpModel {
        let mut m = MilpModel::new(Sense::Maximize);
        let mut terms = Vec::new();
        for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
            let j = m.add_binary(format!("pick{i}"));
            m.add_objective_term(j, v);
            terms.push((j, w));
        }
        m.add_constraint("cap", terms, ConstraintSense::Le, cap, None);
        m
    }

    #[test]
    fn solves_small_knapsack_exactly() {
        let model = knapsack(&[5.0, 4.0, 3.0], &[2.0, 3.0, 1.0], 4.0);
        let report = solve_milp(&model, &SolverParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.objective_lb, 8.0);
        assert_eq!(report.objective_ub, 8.0);
        let x = report.incumbent.unwrap();
        assert_eq!((x[0], x[1], x[2]), (1.0, 0.0, 1.0));
    }

    #[test]
    fn proves_infeasibility() {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("need3", vec![(a, 1.0), (b, 1.0)], ConstraintSense::Ge, 3.0, None);
        let report = solve_milp(&m, &SolverParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Infeasible);
        assert!(report.incumbent.is_none());
        assert_eq!(report.gap, 0.0);
    }

    fn fractional_pair() -> MilpModel {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_objective_term(a, 1.0);
        m.add_objective_term(b, 1.0);
        m.add_constraint("lim", vec![(a, 1.0), (b, 1.0)], ConstraintSense::Le, 1.5, None);
        m
    }

    #[test]
    fn branches_to_integrality() {
        let report = solve_milp(&fractional_pair(), &SolverParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.objective_lb, 1.0);
        assert!(report.nodes >= 2);
        let x = report.incumbent.unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loose_gap_stops_early_with_valid_bounds() {
        let params = SolverParams {
            rel_gap: 1.0,
            ..SolverParams::exact()
        };
        let report = solve_milp(&fractional_pair(), &params).unwrap();
        assert_eq!(report.status, SolveStatus::GapLimit);
        assert!(report.incumbent.is_some());
        assert!(report.objective_lb >= 1.0 - 1e-9);
        assert!(report.objective_ub <= 1.5 + 1e-9);
        assert!(report.objective_lb <= report.objective_ub);
    }

    #[test]
    fn node_limit_reports_time_limit_with_bounds() {
        let params = SolverParams {
            node_limit: Some(1),
            ..SolverParams::exact()
        };
        let report = solve_milp(&fractional_pair(), &params).unwrap();
        assert_eq!(report.status, SolveStatus::TimeLimit);
        assert_eq!(report.nodes, 1);
        assert!(report.objective_ub >= 1.5 - 1e-9);
    }

    #[test]
    fn zero_time_limit_reports_conservative_bounds() {
        let params = SolverParams {
            time_limit_s: 0.0,
            ..SolverParams::exact()
        };
        let t = Instant::now();
        let report = solve_milp(&fractional_pair(), &params).unwrap();
        assert!(t.elapsed().as_secs_f64() < 0.5);
        assert_eq!(report.status, SolveStatus::TimeLimit);
        assert_eq!(report.objective_lb, f64::NEG_INFINITY);
        assert_eq!(report.objective_ub, f64::INFINITY);
        assert_eq!(report.gap, f64::INFINITY);
        assert!(report.incumbent.is_none());
    }

    #[test]
    fn minimization_flips_bound_roles() {
        let mut m = MilpModel::new(Sense::Minimize);
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_objective_term(a, 2.0);
        m.add_objective_term(b, 3.0);
        m.add_constraint("cover", vec![(a, 1.0), (b, 1.0)], ConstraintSense::Ge, 1.0, None);
        let report = solve_milp(&m, &SolverParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.objective_lb, 2.0);
        assert_eq!(report.objective_ub, 2.0);
        assert_eq!(report.objective(Sense::Minimize), Some(2.0));
    }

    #[test]
    fn continuous_model_solves_at_root() {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_var("a", 0.0, 10.0, Integrality::Continuous);
        m.add_objective_term(a, 1.0);
        m.add_constraint("lim", vec![(a, 2.0)], ConstraintSense::Le, 10.0, None);
        let report = solve_milp(&m, &SolverParams::exact()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.nodes, 1);
        assert_eq!(report.objective_lb, 5.0);
    }

    #[test]
    fn repeated_solves_are_identical() {
        let model = knapsack(
            &[9.0, 7.0, 6.0, 4.0, 3.0],
            &[5.0, 4.0, 3.0, 2.0, 1.0],
            9.0,
        );
        let a = solve_milp(&model, &SolverParams::exact()).unwrap();
        let b = solve_milp(&model, &SolverParams::exact()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective_lb, b.objective_lb);
        assert_eq!(a.objective_ub, b.objective_ub);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.incumbent, b.incumbent);
    }

    #[test]
    fn incumbent_binaries_are_exact() {
        let model = knapsack(&[2.5, 2.5, 2.5], &[1.0, 1.0, 1.0], 2.0);
        let report = solve_milp(&model, &SolverParams::exact()).unwrap();
        let x = report.incumbent.unwrap();
        for v in &x {
            assert!(*v == 0.0 || *v == 1.0, "non-exact binary {v}");
        }
        assert_eq!(report.objective_lb, 5.0);
    }
}

//! Self-contained bounded-variable revised simplex.
//!
//! Constraints are brought to slack form `Ax + s = b` where each slack
//! carries the row sense in its bounds (`<=` gives `s in [0, inf)`, `>=`
//! gives `s in (-inf, 0]`, `=` fixes `s = 0`). The solver runs a single
//! loop in two modes: while any basic variable violates its bounds it
//! minimizes the total infeasibility (phase 1, costs recomputed from the
//! violation pattern each iteration, no artificial columns), and once
//! feasible it optimizes the true objective (phase 2). Pricing is
//! Dantzig's rule with a permanent switch to Bland's rule after a run of
//! degenerate pivots. The basis is held as a dense LU factorization with
//! product-form eta updates and periodic refactorization.
//!
//! Proof obligations carried by the result: an `Optimal` solution comes
//! with duals and reduced costs satisfying `|primal - dual| <=
//! 1e-7 * max(1, |primal|)`; `Infeasible` carries a Farkas-style dual
//! ray; `Unbounded` carries an improving primal ray.

use crate::milp::{ConstraintSense, MilpModel, Sense};
use std::time::Instant;
use thiserror::Error;

/// Bound-violation classification tolerance (scaled by `max(1, |bound|)`).
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost threshold for an attractive entering column.
pub const DUAL_TOL: f64 = 1e-9;
/// Smallest acceptable pivot magnitude in the ratio test.
pub const PIVOT_TOL: f64 = 1e-9;
/// Step sizes at or below this count as degenerate pivots.
const DEGEN_STEP: f64 = 1e-10;
/// Rebuild the LU factorization after this many eta updates.
const REFACTOR_EVERY: usize = 100;
/// Check the deadline every this many iterations.
const DEADLINE_STRIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    TimeLimit,
}

/// Where a column sits relative to the current basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic with no finite bound to rest on; held at zero.
    Free,
}

/// A resumable basis: which columns (structural then slack) are basic and
/// where every column rests. Feed back via [`LpOptions::warm_start`].
#[derive(Debug, Clone)]
pub struct BasisState {
    pub basis: Vec<usize>,
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Default)]
pub struct LpOptions {
    pub deadline: Option<Instant>,
    /// Hard iteration cap; defaults to `20_000 + 50 * (rows + cols)`.
    pub max_iters: Option<usize>,
    pub warm_start: Option<BasisState>,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the model's own sense; NaN unless `Optimal`.
    pub objective: f64,
    /// Structural variable values.
    pub x: Vec<f64>,
    /// Row duals in the model's own sense (zeros unless `Optimal`).
    pub duals: Vec<f64>,
    /// Reduced costs of structural variables in the model's own sense.
    pub reduced_costs: Vec<f64>,
    /// Lagrangian bound matching `objective` at optimality; NaN otherwise.
    pub dual_objective: f64,
    /// `Infeasible`: dual ray over rows. `Unbounded`: improving structural
    /// direction. `None` otherwise.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
    pub basis: BasisState,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid LP input: {0}")]
    BadInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Solves the LP relaxation of `model` using the model's own bounds.
pub fn solve_lp(model: &MilpModel, opts: &LpOptions) -> Result<LpResult, LpError> {
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    solve_lp_bounded(model, &lower, &upper, opts)
}

/// Solves the LP relaxation with structural bounds overridden (used by
/// branch and bound to fix or tighten variables without copying the model).
pub fn solve_lp_bounded(
    model: &MilpModel,
    lower: &[f64],
    upper: &[f64],
    opts: &LpOptions,
) -> Result<LpResult, LpError> {
    let mut w = Worker::new(model, lower, upper)?;
    w.start(opts)?;
    w.run(opts)
}

fn is_finite_pair(l: f64, u: f64) -> bool {
    l.is_finite() && u.is_finite()
}

/// -1 below lower, +1 above upper, 0 within bounds (to tolerance).
fn classify(x: f64, l: f64, u: f64) -> i8 {
    if x < l - FEAS_TOL * l.abs().max(1.0) {
        -1
    } else if x > u + FEAS_TOL * u.abs().max(1.0) {
        1
    } else {
        0
    }
}

/// Dense LU factorization with partial pivoting of the basis matrix.
struct Lu {
    m: usize,
    /// Row-major combined L (below diagonal, unit) and U (diagonal and up).
    a: Vec<f64>,
    /// `perm[k]` = original row placed at elimination position k.
    perm: Vec<usize>,
}

impl Lu {
    fn factorize(m: usize, columns: impl Fn(usize) -> Vec<(usize, f64)>) -> Result<Lu, LpError> {
        let mut a = vec![0.0; m * m];
        for k in 0..m {
            for (i, v) in columns(k) {
                a[i * m + k] = v;
            }
        }
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let mut p = k;
            let mut best = a[k * m + k].abs();
            for i in (k + 1)..m {
                let mag = a[i * m + k].abs();
                if mag > best {
                    best = mag;
                    p = i;
                }
            }
            if best < 1e-11 {
                return Err(LpError::Numerical(format!(
                    "singular basis at elimination step {k}"
                )));
            }
            if p != k {
                for j in 0..m {
                    a.swap(k * m + j, p * m + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * m + k];
            for i in (k + 1)..m {
                let f = a[i * m + k] / piv;
                if f != 0.0 {
                    a[i * m + k] = f;
                    for j in (k + 1)..m {
                        a[i * m + j] -= f * a[k * m + j];
                    }
                }
            }
        }
        Ok(Lu { m, a, perm })
    }

    /// Solves `B x = v` in place; `x` is indexed by basis position.
    fn solve(&self, v: &mut [f64]) {
        let m = self.m;
        let mut w: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        for i in 1..m {
            let mut s = w[i];
            for j in 0..i {
                s -= self.a[i * m + j] * w[j];
            }
            w[i] = s;
        }
        for i in (0..m).rev() {
            let mut s = w[i];
            for j in (i + 1)..m {
                s -= self.a[i * m + j] * w[j];
            }
            w[i] = s / self.a[i * m + i];
        }
        v.copy_from_slice(&w);
    }

    /// Solves `B^T y = c` in place; input indexed by basis position,
    /// output indexed by row.
    fn solve_t(&self, v: &mut [f64]) {
        let m = self.m;
        let mut z = vec![0.0; m];
        for i in 0..m {
            let mut s = v[i];
            for j in 0..i {
                s -= self.a[j * m + i] * z[j];
            }
            z[i] = s / self.a[i * m + i];
        }
        let mut t = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = z[i];
            for j in (i + 1)..m {
                s -= self.a[j * m + i] * t[j];
            }
            t[i] = s;
        }
        for i in 0..m {
            v[self.perm[i]] = t[i];
        }
    }
}

/// Product-form update: the basis column at `pos` was replaced by a column
/// whose representation in the old basis is `col`.
struct Eta {
    pos: usize,
    col: Vec<f64>,
}

enum Step {
    Flip { t: f64 },
    Pivot { t: f64, pos: usize, leave_at: VarStatus },
    Unblocked,
}

struct Worker {
    m: usize,
    /// Structural column count; columns `n..n+m` are slacks.
    n: usize,
    nt: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Minimization-sense costs (structural only; slacks cost zero).
    cost: Vec<f64>,
    b: Vec<f64>,
    negate: bool,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    lu: Option<Lu>,
    etas: Vec<Eta>,
    iterations: usize,
}

impl Worker {
    fn new(model: &MilpModel, lower: &[f64], upper: &[f64]) -> Result<Self, LpError> {
        let n = model.num_vars();
        let m = model.num_constraints();
        if lower.len() != n || upper.len() != n {
            return Err(LpError::BadInput(format!(
                "bounds have {} / {} entries for {} variables",
                lower.len(),
                upper.len(),
                n
            )));
        }
        let nt = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nt];
        let mut b = vec![0.0; m];
        let mut lo = lower.to_vec();
        let mut up = upper.to_vec();
        for (j, (&l, &u)) in lo.iter().zip(up.iter()).enumerate() {
            if l > u || l.is_nan() || u.is_nan() {
                return Err(LpError::BadInput(format!(
                    "variable {j} has bounds [{l}, {u}]"
                )));
            }
        }
        for (i, c) in model.constraints.iter().enumerate() {
            for &(j, coef) in &c.terms {
                cols[j].push((i, coef));
            }
            b[i] = c.rhs;
            let (sl, su) = match c.sense {
                ConstraintSense::Le => (0.0, f64::INFINITY),
                ConstraintSense::Ge => (f64::NEG_INFINITY, 0.0),
                ConstraintSense::Eq => (0.0, 0.0),
            };
            cols[n + i].push((i, 1.0));
            lo.push(sl);
            up.push(su);
        }
        let negate = model.sense == Sense::Maximize;
        let mut cost = vec![0.0; nt];
        for &(j, c) in &model.objective {
            cost[j] += if negate { -c } else { c };
        }
        Ok(Worker {
            m,
            n,
            nt,
            cols,
            lower: lo,
            upper: up,
            cost,
            b,
            negate,
            basis: Vec::new(),
            status: Vec::new(),
            x: vec![0.0; nt],
            lu: None,
            etas: Vec::new(),
            iterations: 0,
        })
    }

    fn resting_status(&self, j: usize) -> VarStatus {
        if self.lower[j].is_finite() {
            VarStatus::AtLower
        } else if self.upper[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn resting_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    fn start(&mut self, opts: &LpOptions) -> Result<(), LpError> {
        let warm = opts.warm_start.as_ref().and_then(|ws| {
            let ok = ws.basis.len() == self.m
                && ws.status.len() == self.nt
                && ws.basis.iter().all(|&j| j < self.nt)
                && ws
                    .basis
                    .iter()
                    .all(|&j| ws.status[j] == VarStatus::Basic)
                && ws.status.iter().filter(|&&s| s == VarStatus::Basic).count() == self.m;
            ok.then(|| ws.clone())
        });
        match warm {
            Some(ws) => {
                self.basis = ws.basis;
                self.status = ws.status;
                // Bounds may have changed since the basis was recorded;
                // re-derive where each nonbasic column can rest.
                for j in 0..self.nt {
                    if self.status[j] != VarStatus::Basic {
                        let s = match self.status[j] {
                            VarStatus::AtLower if self.lower[j].is_finite() => VarStatus::AtLower,
                            VarStatus::AtUpper if self.upper[j].is_finite() => VarStatus::AtUpper,
                            _ => self.resting_status(j),
                        };
                        self.status[j] = s;
                    }
                }
                if self.refactor().is_err() {
                    self.cold_basis();
                    self.refactor()?;
                }
            }
            None => {
                self.cold_basis();
                self.refactor()?;
            }
        }
        for j in 0..self.nt {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.resting_value(j);
            }
        }
        self.refresh_basic_values();
        Ok(())
    }

    fn cold_basis(&mut self) {
        self.basis = (self.n..self.nt).collect();
        self.status = (0..self.nt)
            .map(|j| {
                if j >= self.n {
                    VarStatus::Basic
                } else {
                    self.resting_status(j)
                }
            })
            .collect();
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let lu = Lu::factorize(self.m, |k| self.cols[self.basis[k]].clone())?;
        self.lu = Some(lu);
        self.etas.clear();
        Ok(())
    }

    fn apply_ftran(&self, v: &mut [f64]) {
        self.lu.as_ref().expect("factorized").solve(v);
        for eta in &self.etas {
            let piv = v[eta.pos] / eta.col[eta.pos];
            if piv != 0.0 {
                for (i, &w) in eta.col.iter().enumerate() {
                    if i != eta.pos {
                        v[i] -= w * piv;
                    }
                }
            }
            v[eta.pos] = piv;
        }
    }

    fn apply_btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.pos];
            for (j, &w) in eta.col.iter().enumerate() {
                if j != eta.pos {
                    s -= w * v[j];
                }
            }
            v[eta.pos] = s / eta.col[eta.pos];
        }
        self.lu.as_ref().expect("factorized").solve_t(v);
    }

    fn ftran_col(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for &(i, c) in &self.cols[j] {
            v[i] += c;
        }
        self.apply_ftran(&mut v);
        v
    }

    /// Recomputes basic values as `B^{-1} (b - N x_N)`.
    fn refresh_basic_values(&mut self) {
        let mut r = self.b.clone();
        for j in 0..self.nt {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(i, c) in &self.cols[j] {
                    r[i] -= c * self.x[j];
                }
            }
        }
        self.apply_ftran(&mut r);
        for (k, &bj) in self.basis.iter().enumerate() {
            self.x[bj] = r[k];
        }
    }

    /// Basic-variable bound violations: total raw amount and whether any
    /// exceeds the classification tolerance.
    fn infeasibility(&self) -> (f64, bool) {
        let mut total = 0.0;
        let mut any = false;
        for &j in &self.basis {
            match classify(self.x[j], self.lower[j], self.upper[j]) {
                -1 => {
                    total += self.lower[j] - self.x[j];
                    any = true;
                }
                1 => {
                    total += self.x[j] - self.upper[j];
                    any = true;
                }
                _ => {}
            }
        }
        (total, any)
    }

    /// Duals for the current mode. Phase 1 prices the infeasibility-sum
    /// gradient; phase 2 prices the true costs.
    fn duals(&self, phase1: bool) -> Vec<f64> {
        let mut cb = vec![0.0; self.m];
        for (k, &j) in self.basis.iter().enumerate() {
            cb[k] = if phase1 {
                match classify(self.x[j], self.lower[j], self.upper[j]) {
                    -1 => -1.0,
                    1 => 1.0,
                    _ => 0.0,
                }
            } else {
                self.cost[j]
            };
        }
        self.apply_btran(&mut cb);
        cb
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let cj = if phase1 { 0.0 } else { self.cost[j] };
        let mut d = cj;
        for &(i, c) in &self.cols[j] {
            d -= y[i] * c;
        }
        d
    }

    /// Dantzig pricing (largest reduced-cost violation), or first
    /// attractive column under Bland's rule. Returns (column, direction).
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.nt {
            if self.status[j] == VarStatus::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, y, phase1);
            let (attractive, dir, score) = match self.status[j] {
                VarStatus::AtLower => (d < -DUAL_TOL, 1.0, -d),
                VarStatus::AtUpper => (d > DUAL_TOL, -1.0, d),
                VarStatus::Free => (d.abs() > DUAL_TOL, -d.signum(), d.abs()),
                VarStatus::Basic => unreachable!(),
            };
            if !attractive {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Finds the blocking step for entering column `j` moving `dir`.
    /// `w` is the entering column in the current basis. Phase 1 lets an
    /// out-of-bounds basic variable run to its violated bound; phase 2 is
    /// the textbook test.
    fn ratio_test(&self, j: usize, dir: f64, w: &[f64], phase1: bool, bland: bool) -> Step {
        let mut t_min = f64::INFINITY;
        let mut best: Option<(usize, f64, VarStatus)> = None; // (pos, |pivot|, leave_at)
        for (k, &wk) in w.iter().enumerate() {
            let delta = -dir * wk;
            if delta.abs() <= PIVOT_TOL {
                continue;
            }
            let bj = self.basis[k];
            let (xv, l, u) = (self.x[bj], self.lower[bj], self.upper[bj]);
            let side = classify(xv, l, u);
            let cand: Option<(f64, VarStatus)> = if delta > 0.0 {
                match side {
                    -1 if phase1 => Some(((l - xv) / delta, VarStatus::AtLower)),
                    0 | -1 if u.is_finite() => Some(((u - xv) / delta, VarStatus::AtUpper)),
                    _ => None,
                }
            } else {
                match side {
                    1 if phase1 => Some(((xv - u) / -delta, VarStatus::AtUpper)),
                    0 | 1 if l.is_finite() => Some(((xv - l) / -delta, VarStatus::AtLower)),
                    _ => None,
                }
            };
            let Some((t, leave_at)) = cand else { continue };
            let t = t.max(0.0);
            let replace = match &best {
                None => t < t_min,
                Some((pos, mag, _)) => {
                    if t < t_min - 1e-12 {
                        true
                    } else if t <= t_min + 1e-12 {
                        if bland {
                            self.basis[k] < self.basis[*pos]
                        } else {
                            delta.abs() > *mag
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                t_min = t_min.min(t);
                best = Some((k, delta.abs(), leave_at));
            }
        }
        // The entering column can also stop at its own opposite bound.
        if is_finite_pair(self.lower[j], self.upper[j]) {
            let span = self.upper[j] - self.lower[j];
            if span <= t_min {
                return Step::Flip { t: span };
            }
        }
        match best {
            Some((pos, _, leave_at)) => Step::Pivot {
                t: t_min,
                pos,
                leave_at,
            },
            None => Step::Unblocked,
        }
    }

    fn apply_step(&mut self, j: usize, dir: f64, w: &[f64], t: f64) {
        if t != 0.0 {
            for (k, &wk) in w.iter().enumerate() {
                let bj = self.basis[k];
                self.x[bj] -= dir * t * wk;
            }
        }
        self.x[j] += dir * t;
    }

    fn run(&mut self, opts: &LpOptions) -> Result<LpResult, LpError> {
        let max_iters = opts
            .max_iters
            .unwrap_or(20_000 + 50 * (self.m + self.nt));
        let degen_switch = 5 * (self.m + self.nt);
        let mut degen = 0usize;
        let mut bland = false;

        loop {
            if self.iterations.is_multiple_of(DEADLINE_STRIDE) {
                if let Some(deadline) = opts.deadline {
                    if Instant::now() >= deadline {
                        return Ok(self.finish(LpStatus::TimeLimit, None));
                    }
                }
            }
            if self.iterations >= max_iters {
                return Ok(self.finish(LpStatus::IterLimit, None));
            }
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactor()?;
                self.refresh_basic_values();
            }

            let (_, phase1) = self.infeasibility();
            let y = self.duals(phase1);
            let Some((j, dir)) = self.price(&y, phase1, bland) else {
                if phase1 {
                    return Ok(self.finish(LpStatus::Infeasible, Some(y)));
                }
                return Ok(self.finish(LpStatus::Optimal, None));
            };

            let w = self.ftran_col(j);
            match self.ratio_test(j, dir, &w, phase1, bland) {
                Step::Unblocked => {
                    if phase1 {
                        return Err(LpError::Numerical(
                            "unbounded infeasibility-reduction ray".into(),
                        ));
                    }
                    let mut ray = vec![0.0; self.n];
                    if j < self.n {
                        ray[j] = dir;
                    }
                    for (k, &wk) in w.iter().enumerate() {
                        let bj = self.basis[k];
                        if bj < self.n {
                            ray[bj] = -dir * wk;
                        }
                    }
                    return Ok(self.finish(LpStatus::Unbounded, Some(ray)));
                }
                Step::Flip { t } => {
                    self.apply_step(j, dir, &w, t);
                    self.status[j] = match self.status[j] {
                        VarStatus::AtLower => VarStatus::AtUpper,
                        VarStatus::AtUpper => VarStatus::AtLower,
                        other => other,
                    };
                    self.x[j] = self.resting_value(j);
                    if t <= DEGEN_STEP {
                        degen += 1;
                    }
                }
                Step::Pivot { t, pos, leave_at } => {
                    self.apply_step(j, dir, &w, t);
                    let leaving = self.basis[pos];
                    self.status[leaving] = leave_at;
                    self.x[leaving] = match leave_at {
                        VarStatus::AtLower => self.lower[leaving],
                        VarStatus::AtUpper => self.upper[leaving],
                        _ => self.x[leaving],
                    };
                    self.status[j] = VarStatus::Basic;
                    self.basis[pos] = j;
                    self.etas.push(Eta { pos, col: w });
                    if t <= DEGEN_STEP {
                        degen += 1;
                    }
                }
            }
            self.iterations += 1;
            if degen > degen_switch {
                bland = true;
            }
        }
    }

    fn finish(&mut self, status: LpStatus, ray: Option<Vec<f64>>) -> LpResult {
        let sign = if self.negate { -1.0 } else { 1.0 };
        let mut objective = f64::NAN;
        let mut duals = vec![0.0; self.m];
        let mut reduced = vec![0.0; self.n];
        let mut dual_objective = f64::NAN;
        if status == LpStatus::Optimal {
            // Refresh once more so reported values come straight from the
            // factorization rather than accumulated updates, then run one
            // step of iterative refinement on the basic values: with the
            // nonbasic variables exact at their bounds, adding
            // B^{-1} (b - A x) to x_B strips most of the factorization's
            // rounding (on integer data it usually restores basic values
            // bit-exactly).
            self.refresh_basic_values();
            let mut r = self.b.clone();
            for j in 0..self.nt {
                if self.x[j] != 0.0 {
                    for &(i, c) in &self.cols[j] {
                        r[i] -= c * self.x[j];
                    }
                }
            }
            self.apply_ftran(&mut r);
            for (k, &bj) in self.basis.iter().enumerate() {
                self.x[bj] += r[k];
            }
            let obj_min: f64 = (0..self.nt).map(|j| self.cost[j] * self.x[j]).sum();
            objective = sign * obj_min;
            let y = self.duals(false);
            let mut dual_min: f64 = y.iter().zip(&self.b).map(|(yi, bi)| yi * bi).sum();
            for j in 0..self.nt {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let d = self.reduced_cost(j, &y, false);
                if j < self.n {
                    reduced[j] = sign * d;
                }
                dual_min += d * self.x[j];
            }
            dual_objective = sign * dual_min;
            for i in 0..self.m {
                duals[i] = sign * y[i];
            }
        }
        LpResult {
            status,
            objective,
            x: self.x[..self.n].to_vec(),
            duals,
            reduced_costs: reduced,
            dual_objective,
            ray,
            iterations: self.iterations,
            basis: BasisState {
                basis: self.basis.clone(),
                status: self.status.clone(),
            },
        }
    }
}

/// Convenience check used by tests and the branch-and-bound engine:
/// `|primal - dual| <= tol * max(1, |primal|)`.
pub fn duality_gap_ok(result: &LpResult, tol: f64) -> bool {
    (result.objective - result.dual_objective).abs() <= tol * result.objective.abs().max(1.0)
}

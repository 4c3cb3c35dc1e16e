//! The five comparison methods plus the joint solve itself.
//!
//! Three of the methods — `no_battery`, `no_routing`, `no_carbon` — are
//! restrictions or relaxations of the joint model and go straight
//! through the model builder. The other two are deliberately myopic
//! two-stage pipelines:
//!
//! - `compute_only` first solves a workload-only MILP (constraint
//!   families eq8–eq12 plus non-preemption) whose surrogate objective
//!   prices every kilowatt at the grid-buy rate with cooling overhead —
//!   no battery, no export, no carbon cap — and then dispatches energy
//!   greedily per period: local generation covers load first, surplus
//!   generation is sold up to the grid cap, residual load is bought,
//!   batteries stay idle.
//! - `energy_only` first fixes the workload heuristically (each class
//!   routed entirely to its lowest-latency feasible site; jobs placed
//!   round-robin across sites, started in the first period and run for
//!   exactly their minimum uptime, skipped when the site cannot carry
//!   them) and then solves the full MILP with all workload variables
//!   pinned, so only the energy layer is optimized.
//!
//! Neither pipeline sees the carbon budget while optimizing (the
//! workload surrogate has no emissions term; the greedy dispatch never
//! checks it); the energy stage keeps the budget row because it is part
//! of the energy layer. Every method's result is re-evaluated by the
//! validator against the full joint rule set, and `joint_feasible`
//! records whether the final solution would be accepted by the joint
//! model — `compute_only` and `no_carbon` routinely exceed the carbon
//! budget, and that is the point of the comparison.

use crate::bnb::{solve_milp, SolveError, SolveReport, SolveStatus, SolverParams};
use crate::build::{build, BuildError, BuildOptions, Variant};
use crate::instance::Instance;
use crate::milp::{ConstraintSense, MilpModel, Sense};
use crate::validator::{check_solution, compute_metrics, Metrics, Solution, DEFAULT_TOL};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six comparison methods in their fixed reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Joint,
    ComputeOnly,
    EnergyOnly,
    NoBattery,
    NoRouting,
    NoCarbon,
}

impl Method {
    pub fn all() -> [Method; 6] {
        [
            Method::Joint,
            Method::ComputeOnly,
            Method::EnergyOnly,
            Method::NoBattery,
            Method::NoRouting,
            Method::NoCarbon,
        ]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::ComputeOnly => "compute_only",
            Method::EnergyOnly => "energy_only",
            Method::NoBattery => "no_battery",
            Method::NoRouting => "no_routing",
            Method::NoCarbon => "no_carbon",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "joint" => Ok(Method::Joint),
            "compute_only" => Ok(Method::ComputeOnly),
            "energy_only" => Ok(Method::EnergyOnly),
            "no_battery" => Ok(Method::NoBattery),
            "no_routing" => Ok(Method::NoRouting),
            "no_carbon" => Ok(Method::NoCarbon),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// A method's final solution together with validator-recomputed metrics.
/// `report` is the solve that produced the solution: the variant MILP
/// for variant methods, the stage-1 surrogate for `compute_only` (its
/// bounds refer to the surrogate objective, not the joint one), and the
/// stage-2 energy MILP for `energy_only`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub method: Method,
    pub solution: Solution,
    pub metrics: Metrics,
    pub report: SolveReport,
    pub joint_feasible: bool,
    /// Constraint families violated under the joint rules; empty iff
    /// `joint_feasible`.
    pub violated_families: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("{method} ({stage}): model is infeasible")]
    Infeasible { method: Method, stage: &'static str },
    #[error("{method} ({stage}): no solution within limits (status {status})")]
    NoSolution {
        method: Method,
        stage: &'static str,
        status: SolveStatus,
    },
}

/// Runs one method end to end.
pub fn run_method(
    inst: &Instance,
    method: Method,
    params: &SolverParams,
) -> Result<EvaluatedSolution, BaselineError> {
    match method {
        Method::Joint => run_variant(inst, Variant::Joint, params),
        Method::ComputeOnly => run_compute_only(inst, params),
        Method::EnergyOnly => run_energy_only(inst, params),
        Method::NoBattery => run_variant(inst, Variant::NoBattery, params),
        Method::NoRouting => run_variant(inst, Variant::NoRouting, params),
        Method::NoCarbon => run_variant(inst, Variant::NoCarbon, params),
    }
}

/// Solves the joint model or one of its variants and certifies the
/// incumbent against the full joint rules.
pub fn run_variant(
    inst: &Instance,
    variant: Variant,
    params: &SolverParams,
) -> Result<EvaluatedSolution, BaselineError> {
    let method = match variant {
        Variant::Joint => Method::Joint,
        Variant::NoBattery => Method::NoBattery,
        Variant::NoRouting => Method::NoRouting,
        Variant::NoCarbon => Method::NoCarbon,
    };
    let (model, ix) = build(inst, &BuildOptions::with_variant(inst, variant))?;
    let report = solve_milp(&model, params)?;
    let point = take_incumbent(method, "model", &report)?;
    let sol = ix.extract_solution(inst, &point);
    Ok(certify(inst, method, report, sol))
}

fn take_incumbent(
    method: Method,
    stage: &'static str,
    report: &SolveReport,
) -> Result<Vec<f64>, BaselineError> {
    if report.status == SolveStatus::Infeasible {
        return Err(BaselineError::Infeasible { method, stage });
    }
    match &report.incumbent {
        Some(p) => Ok(p.clone()),
        None => Err(BaselineError::NoSolution {
            method,
            stage,
            status: report.status,
        }),
    }
}

fn certify(
    inst: &Instance,
    method: Method,
    report: SolveReport,
    solution: Solution,
) -> EvaluatedSolution {
    let metrics = compute_metrics(inst, &solution);
    let check = check_solution(inst, &solution, DEFAULT_TOL)
        .expect("solutions constructed here match the instance shape");
    EvaluatedSolution {
        method,
        metrics,
        joint_feasible: check.is_feasible(),
        violated_families: check.families().iter().map(|f| f.to_string()).collect(),
        report,
        solution,
    }
}

/// Variable positions in the workload-only stage-1 model.
struct WorkloadIndex {
    u: Vec<Vec<Vec<usize>>>,
    v: Vec<Vec<Vec<usize>>>,
    w: Vec<Vec<Vec<usize>>>,
    x: Vec<Vec<Vec<Option<usize>>>>,
}

/// Workload-only MILP: families eq8–eq12 plus non-preemption, with every
/// kilowatt priced at the period's grid-buy rate (with cooling overhead)
/// instead of the real energy layer.
fn build_workload_model(inst: &Instance) -> (MilpModel, WorkloadIndex) {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();
    let dt = inst.time.period_hours;
    let mut m = MilpModel::new(Sense::Maximize);

    let mut u = vec![vec![vec![0usize; t_n]; inst.jobs.len()]; s_n];
    let mut v = u.clone();
    let mut w = u.clone();
    let mut x = vec![vec![vec![None; t_n]; inst.classes.len()]; s_n];
    for i in 0..s_n {
        let site = &inst.sites[i];
        for (j, job) in inst.jobs.iter().enumerate() {
            for t in 0..t_n {
                u[i][j][t] = m.add_binary(format!("u({}.{}.t{t})", site.id, job.id));
                v[i][j][t] = m.add_binary(format!("v({}.{}.t{t})", site.id, job.id));
                w[i][j][t] = m.add_binary(format!("w({}.{}.t{t})", site.id, job.id));
                let energy_cost =
                    inst.economics.price_buy[t] * dt * (1.0 + site.cooling_overhead[t]) * job.power_kw;
                m.add_objective_term(u[i][j][t], job.reward_per_period - energy_cost);
            }
        }
        for (k, class) in inst.classes.iter().enumerate() {
            if !inst.latency.feasible(i, k) {
                continue;
            }
            for t in 0..t_n {
                let var = m.add_var(
                    format!("x({}.{}.t{t})", site.id, class.id),
                    0.0,
                    class.demand_units[t],
                    crate::milp::Integrality::Continuous,
                );
                x[i][k][t] = Some(var);
                let margin = class.revenue_per_unit
                    - class.gpu_cost_per_unit
                    - inst.economics.sla_penalty_coeff * inst.latency.latency_ms[i][k];
                let energy_cost = inst.economics.price_buy[t]
                    * dt
                    * (1.0 + site.cooling_overhead[t])
                    * class.power_kw_per_unit;
                m.add_objective_term(var, margin - energy_cost);
            }
        }
    }

    for (j, job) in inst.jobs.iter().enumerate() {
        for t in 0..t_n {
            let terms = (0..s_n).map(|i| (u[i][j][t], 1.0)).collect();
            m.add_constraint(
                format!("eq8({}.t{t})", job.id),
                terms,
                ConstraintSense::Le,
                1.0,
                Some("eq8"),
            );
        }
        for i in 0..s_n {
            let site_id = &inst.sites[i].id;
            for t in 0..t_n {
                let mut terms = vec![(u[i][j][t], 1.0), (v[i][j][t], -1.0), (w[i][j][t], 1.0)];
                if t > 0 {
                    terms.push((u[i][j][t - 1], -1.0));
                }
                m.add_constraint(
                    format!("eq9({site_id}.{}.t{t})", job.id),
                    terms,
                    ConstraintSense::Eq,
                    0.0,
                    Some("eq9"),
                );
                let window = t.saturating_sub(job.min_uptime_periods - 1)..=t;
                let mut terms: Vec<(usize, f64)> =
                    window.map(|tau| (v[i][j][tau], 1.0)).collect();
                terms.push((u[i][j][t], -1.0));
                m.add_constraint(
                    format!("eq10({site_id}.{}.t{t})", job.id),
                    terms,
                    ConstraintSense::Le,
                    0.0,
                    Some("eq10"),
                );
            }
        }
        if job.non_preemptive {
            let mut terms = Vec::new();
            for i in 0..s_n {
                for t in 0..t_n {
                    terms.push((v[i][j][t], 1.0));
                }
            }
            m.add_constraint(
                format!("non_preemption({})", job.id),
                terms,
                ConstraintSense::Le,
                1.0,
                Some("non_preemption"),
            );
        }
    }
    for (k, class) in inst.classes.iter().enumerate() {
        for t in 0..t_n {
            let terms: Vec<(usize, f64)> = (0..s_n)
                .filter_map(|i| x[i][k][t].map(|var| (var, 1.0)))
                .collect();
            m.add_constraint(
                format!("eq11({}.t{t})", class.id),
                terms,
                ConstraintSense::Eq,
                class.demand_units[t],
                Some("eq11"),
            );
        }
    }
    (m, WorkloadIndex { u, v, w, x })
}

/// Stage 1: workload-only MILP. Stage 2: greedy per-period dispatch —
/// local generation covers load, surplus is sold up to the grid cap,
/// residual load is bought, batteries idle. Stage 3: validator metrics;
/// `joint_feasible` records whether the dispatch survives the full rules
/// (it typically busts the carbon budget, which this method never sees).
pub fn run_compute_only(
    inst: &Instance,
    params: &SolverParams,
) -> Result<EvaluatedSolution, BaselineError> {
    let (model, ix) = build_workload_model(inst);
    let report = solve_milp(&model, params)?;
    let point = take_incumbent(Method::ComputeOnly, "workload stage", &report)?;

    let mut sol = Solution::idle(inst);
    for i in 0..inst.num_sites() {
        for j in 0..inst.jobs.len() {
            for t in 0..inst.num_periods() {
                sol.u[i][j][t] = point[ix.u[i][j][t]].round();
                sol.v[i][j][t] = point[ix.v[i][j][t]].round();
                sol.w[i][j][t] = point[ix.w[i][j][t]].round();
            }
        }
        for k in 0..inst.classes.len() {
            for t in 0..inst.num_periods() {
                if let Some(var) = ix.x[i][k][t] {
                    sol.x[i][k][t] = point[var];
                }
            }
        }
    }
    dispatch_greedy(inst, &mut sol);
    Ok(certify(inst, Method::ComputeOnly, report, sol))
}

/// Fills the energy tensors of `sol` from its workload tensors using the
/// compute-only greedy rule. Batteries stay at their initial charge.
fn dispatch_greedy(inst: &Instance, sol: &mut Solution) {
    for (i, site) in inst.sites.iter().enumerate() {
        for t in 0..inst.num_periods() {
            let mut p_it = 0.0;
            for (j, job) in inst.jobs.iter().enumerate() {
                p_it += job.power_kw * sol.u[i][j][t];
            }
            for (k, class) in inst.classes.iter().enumerate() {
                p_it += class.power_kw_per_unit * sol.x[i][k][t];
            }
            let p_tot = (1.0 + site.cooling_overhead[t]) * p_it;
            sol.p_it[i][t] = p_it;
            sol.p_tot[i][t] = p_tot;
            let net = p_tot - site.local_gen_kw[t];
            if net >= 0.0 {
                sol.p_buy[i][t] = net;
                sol.y_buy[i][t] = if net > 0.0 { 1.0 } else { 0.0 };
            } else {
                let sell = (-net).min(site.grid_capacity_kw);
                sol.p_sell[i][t] = sell;
                sol.y_sell[i][t] = if sell > 0.0 { 1.0 } else { 0.0 };
            }
        }
    }
}

/// Stage 1: heuristic placement — every class fully routed to its
/// lowest-latency feasible site; jobs placed round-robin across sites in
/// index order, each starting at the first period and running exactly
/// its minimum uptime, skipped when the site's grid-plus-generation
/// capability cannot carry the added load. Stage 2: the full MILP with
/// all workload variables pinned, leaving only the energy layer free.
pub fn run_energy_only(
    inst: &Instance,
    params: &SolverParams,
) -> Result<EvaluatedSolution, BaselineError> {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();

    // IT load (kW) already committed per site and period.
    let mut it_load = vec![vec![0.0; t_n]; s_n];
    let mut placement = Solution::idle(inst);
    for (k, class) in inst.classes.iter().enumerate() {
        if let Some(i) = inst.nearest_site(k) {
            for t in 0..t_n {
                placement.x[i][k][t] = class.demand_units[t];
                it_load[i][t] += class.power_kw_per_unit * class.demand_units[t];
            }
        }
    }
    for (j, job) in inst.jobs.iter().enumerate() {
        let i = j % s_n;
        let site = &inst.sites[i];
        let run = job.min_uptime_periods.min(t_n);
        let fits = (0..run).all(|t| {
            let load = (1.0 + site.cooling_overhead[t]) * (it_load[i][t] + job.power_kw);
            load <= site.grid_capacity_kw + site.local_gen_kw[t] + 1e-9
        });
        if !fits {
            continue;
        }
        for t in 0..run {
            placement.u[i][j][t] = 1.0;
            it_load[i][t] += job.power_kw;
        }
        placement.v[i][j][0] = 1.0;
        if run < t_n {
            placement.w[i][j][run] = 1.0;
        }
    }

    let (mut model, ix) = build(inst, &BuildOptions::for_instance(inst))?;
    for i in 0..s_n {
        for j in 0..inst.jobs.len() {
            for t in 0..t_n {
                pin(&mut model, ix.u[i][j][t], placement.u[i][j][t]);
                pin(&mut model, ix.v[i][j][t], placement.v[i][j][t]);
                pin(&mut model, ix.w[i][j][t], placement.w[i][j][t]);
            }
        }
        for k in 0..inst.classes.len() {
            for t in 0..t_n {
                if let Some(var) = ix.x[i][k][t] {
                    pin(&mut model, var, placement.x[i][k][t]);
                }
            }
        }
    }
    let report = solve_milp(&model, params)?;
    let point = take_incumbent(Method::EnergyOnly, "energy stage", &report)?;
    let sol = ix.extract_solution(inst, &point);
    Ok(certify(inst, Method::EnergyOnly, report, sol))
}

fn pin(model: &mut MilpModel, var: usize, value: f64) {
    model.variables[var].lower = value;
    model.variables[var].upper = value;
}

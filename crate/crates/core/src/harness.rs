//! Experiment driver: method comparisons, scaling sweeps, CSV emission,
//! and the two ground-truth oracles used by the acceptance suite.

use crate::baselines::{run_method, Method};
use crate::bnb::{solve_milp, SolverParams};
use crate::build::{build, BuildOptions};
use crate::instance::{Instance, TrainingJobSpec};
use crate::milp::{ConstraintSense, Integrality, MilpModel, Sense};
use crate::scenario::{generate, GenConfig};
use crate::simplex::{solve_lp, LpError, LpOptions, LpStatus};
use crate::validator::{compute_metrics, Solution};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Solver-reported and validator-recomputed objectives must agree this
/// tightly (relative) for every method whose solved model carries the
/// true objective; a mismatch indicates a builder or solver bug and
/// fails the whole comparison.
pub const CERTIFICATION_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(
        "{method}: solver objective {solver} and validator objective {validator} \
         disagree beyond {CERTIFICATION_REL_TOL:e} relative"
    )]
    Certification {
        method: Method,
        solver: f64,
        validator: f64,
    },
}

/// One line of the method-comparison table. `objective`, `emissions_kg`
/// and `gap` are absent when the method failed; `note` then carries the
/// error, otherwise the solve status.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub objective: Option<f64>,
    pub emissions_kg: Option<f64>,
    pub gap: Option<f64>,
    pub joint_feasible: bool,
    pub note: String,
    pub wall_time_s: f64,
}

/// Runs all six methods in fixed order. Per-method failures are
/// captured in their row without aborting the rest; a certification
/// mismatch (solver vs validator objective) aborts with an error.
pub fn run_comparison(
    inst: &Instance,
    params: &SolverParams,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    let mut rows = Vec::new();
    for method in Method::all() {
        let start = Instant::now();
        match run_method(inst, method, params) {
            Ok(eval) => {
                // The compute-only report covers the surrogate model, so
                // its objective is not comparable; every other method's
                // solved model carries the true objective.
                if method != Method::ComputeOnly {
                    if let Some(solver_obj) = eval.report.objective(Sense::Maximize) {
                        let rel = (solver_obj - eval.metrics.objective_total).abs()
                            / eval.metrics.objective_total.abs().max(1.0);
                        if rel > CERTIFICATION_REL_TOL {
                            return Err(HarnessError::Certification {
                                method,
                                solver: solver_obj,
                                validator: eval.metrics.objective_total,
                            });
                        }
                    }
                }
                rows.push(ComparisonRow {
                    method,
                    objective: Some(eval.metrics.objective_total),
                    emissions_kg: Some(eval.metrics.emissions_kg),
                    gap: Some(eval.report.gap),
                    joint_feasible: eval.joint_feasible,
                    note: eval.report.status.to_string(),
                    wall_time_s: start.elapsed().as_secs_f64(),
                });
            }
            Err(err) => rows.push(ComparisonRow {
                method,
                objective: None,
                emissions_kg: None,
                gap: None,
                joint_feasible: false,
                note: err.to_string(),
                wall_time_s: start.elapsed().as_secs_f64(),
            }),
        }
    }
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Wall time is the last column so that all data columns are
/// deterministic under fixed seeds and single-threaded solves.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out =
        String::from("method,objective,emissions_kg,gap,joint_feasible,note,wall_time_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            csv_opt(r.objective),
            csv_opt(r.emissions_kg),
            csv_opt(r.gap),
            r.joint_feasible,
            csv_field(&r.note),
            r.wall_time_s,
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Sites,
    Periods,
    Jobs,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Sites => "sites",
            SweepAxis::Periods => "periods",
            SweepAxis::Jobs => "jobs",
        }
    }

    /// Desk-scale default grid per axis.
    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::Sites => vec![2, 3, 4],
            SweepAxis::Periods => vec![12, 24, 48],
            SweepAxis::Jobs => vec![4, 6, 8],
        }
    }

    fn apply(self, base: &GenConfig, value: usize) -> GenConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Sites => cfg.num_sites = value,
            SweepAxis::Periods => cfg.num_periods = value,
            SweepAxis::Jobs => cfg.num_jobs = value,
        }
        cfg
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sites" => Ok(SweepAxis::Sites),
            "periods" => Ok(SweepAxis::Periods),
            "jobs" => Ok(SweepAxis::Jobs),
            other => Err(format!(
                "unknown sweep axis {other:?} (expected sites, periods, or jobs)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub base: GenConfig,
    pub params: SolverParams,
    pub repetitions: usize,
}

/// One solved sweep cell. Repetitions re-solve the identical instance,
/// so only `wall_time_s` may differ between them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: usize,
    pub repetition: usize,
    pub num_sites: usize,
    pub num_periods: usize,
    pub num_jobs: usize,
    pub num_classes: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub gap: f64,
    pub nodes: u64,
    pub wall_time_s: f64,
}

/// Solves the joint model across the axis grid, invoking `on_row` as
/// each cell finishes so partial runs still produce usable output.
/// Infeasible or timed-out cells are recorded with their status, never
/// dropped.
pub fn run_sweep(cfg: &SweepConfig, mut on_row: impl FnMut(&SweepRow)) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &value in &cfg.values {
        let gen_cfg = cfg.axis.apply(&cfg.base, value);
        let inst = generate(&gen_cfg);
        for repetition in 0..cfg.repetitions.max(1) {
            let start = Instant::now();
            let (status, objective, gap, nodes) =
                match build(&inst, &BuildOptions::for_instance(&inst)) {
                    Ok((model, _)) => match solve_milp(&model, &cfg.params) {
                        Ok(report) => (
                            report.status.to_string(),
                            report.objective(Sense::Maximize),
                            report.gap,
                            report.nodes,
                        ),
                        Err(err) => (format!("error: {err}"), None, f64::INFINITY, 0),
                    },
                    Err(err) => (format!("error: {err}"), None, f64::INFINITY, 0),
                };
            let row = SweepRow {
                axis: cfg.axis,
                value,
                repetition,
                num_sites: gen_cfg.num_sites,
                num_periods: gen_cfg.num_periods,
                num_jobs: gen_cfg.num_jobs,
                num_classes: gen_cfg.num_classes,
                status,
                objective,
                gap,
                nodes,
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            on_row(&row);
            rows.push(row);
        }
    }
    rows
}

pub const SWEEP_CSV_HEADER: &str =
    "axis,value,repetition,sites,periods,jobs,classes,status,objective,gap,nodes,wall_time_s";

/// One CSV line (no trailing newline), for incremental emission.
pub fn sweep_csv_row(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.axis,
        r.value,
        r.repetition,
        r.num_sites,
        r.num_periods,
        r.num_jobs,
        r.num_classes,
        csv_field(&r.status),
        csv_opt(r.objective),
        r.gap,
        r.nodes,
        r.wall_time_s,
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&sweep_csv_row(r));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub solution: Solution,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{count} binary patterns exceed the enumeration limit {limit}")]
    LimitExceeded { count: u128, limit: u64 },
    #[error("no feasible assignment exists")]
    Infeasible,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A job's schedule: its assigned site per period, `None` when off.
type JobSchedule = Vec<Option<usize>>;

/// Schedule legality under the job-layer rules: per-site maximal runs at
/// least the minimum uptime (a direct site switch counts as a stop and a
/// start), and at most one start overall for non-preemptive jobs.
fn schedule_is_valid(assign: &JobSchedule, job: &TrainingJobSpec) -> bool {
    let mut starts = 0usize;
    let mut t = 0usize;
    while t < assign.len() {
        match assign[t] {
            None => t += 1,
            Some(site) => {
                let begin = t;
                while t < assign.len() && assign[t] == Some(site) {
                    t += 1;
                }
                starts += 1;
                // The minimum-uptime window constraint stops binding at
                // the horizon, so a run that lasts through the final
                // period is legal at any length.
                if t - begin < job.min_uptime_periods && t < assign.len() {
                    return false;
                }
            }
        }
    }
    !(job.non_preemptive && starts > 1)
}

/// All legal schedules for one job, in deterministic mixed-radix order
/// (digit 0 = off, digit i+1 = site i; period 0 is the least significant
/// digit). The all-off schedule is always present.
fn job_schedules(job: &TrainingJobSpec, s_n: usize, t_n: usize) -> Option<Vec<JobSchedule>> {
    let radix = (s_n + 1) as u128;
    let total = radix.checked_pow(t_n as u32)?;
    let mut out = Vec::new();
    for mut code in 0..total {
        let assign: JobSchedule = (0..t_n)
            .map(|_| {
                let digit = (code % radix) as usize;
                code /= radix;
                if digit == 0 {
                    None
                } else {
                    Some(digit - 1)
                }
            })
            .collect();
        if schedule_is_valid(&assign, job) {
            out.push(assign);
        }
    }
    Some(out)
}

struct EnergyLp {
    model: MilpModel,
    p_buy: Vec<Vec<usize>>,
    p_sell: Vec<Vec<usize>>,
    p_chg: Vec<Vec<usize>>,
    p_dis: Vec<Vec<usize>>,
    soc: Vec<Vec<usize>>,
    x: Vec<Vec<Vec<Option<usize>>>>,
}

/// The continuous subproblem for fixed job schedules: energy balance,
/// grid caps, battery dynamics, the carbon budget, and demand routing,
/// with IT and total power inlined as expressions. `buy_mask[i][t]`,
/// when present, disables selling (true) or buying (false) at (i, t).
fn build_energy_lp(
    inst: &Instance,
    schedules: &[&JobSchedule],
    buy_mask: Option<&[Vec<bool>]>,
) -> EnergyLp {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();
    let dt = inst.time.period_hours;
    let eco = &inst.economics;
    let mut m = MilpModel::new(Sense::Maximize);

    let add_grid = |m: &mut MilpModel, name: &str, ub: fn(&Instance, usize) -> f64, inst: &Instance| -> Vec<Vec<usize>> {
        (0..s_n)
            .map(|i| {
                (0..t_n)
                    .map(|t| {
                        m.add_var(
                            format!("{name}(s{i}.t{t})"),
                            0.0,
                            ub(inst, i),
                            Integrality::Continuous,
                        )
                    })
                    .collect()
            })
            .collect()
    };
    let p_buy = add_grid(&mut m, "p_buy", |inst, i| inst.sites[i].grid_capacity_kw, inst);
    let p_sell = add_grid(&mut m, "p_sell", |inst, i| inst.sites[i].grid_capacity_kw, inst);
    let p_chg = add_grid(&mut m, "p_chg", |inst, i| inst.sites[i].battery.max_charge_kw, inst);
    let p_dis = add_grid(
        &mut m,
        "p_dis",
        |inst, i| inst.sites[i].battery.max_discharge_kw,
        inst,
    );
    let soc: Vec<Vec<usize>> = (0..s_n)
        .map(|i| {
            let bat = &inst.sites[i].battery;
            (0..t_n)
                .map(|t| {
                    m.add_var(
                        format!("soc(s{i}.t{t})"),
                        bat.soc_min_kwh,
                        bat.soc_max_kwh,
                        Integrality::Continuous,
                    )
                })
                .collect()
        })
        .collect();
    let mut x = vec![vec![vec![None; t_n]; inst.classes.len()]; s_n];
    for i in 0..s_n {
        for (k, class) in inst.classes.iter().enumerate() {
            if !inst.latency.feasible(i, k) {
                continue;
            }
            for t in 0..t_n {
                let var = m.add_var(
                    format!("x(s{i}.k{k}.t{t})"),
                    0.0,
                    class.demand_units[t],
                    Integrality::Continuous,
                );
                x[i][k][t] = Some(var);
                let margin = class.revenue_per_unit
                    - class.gpu_cost_per_unit
                    - eco.sla_penalty_coeff * inst.latency.latency_ms[i][k];
                m.add_objective_term(var, margin);
            }
        }
    }

    let mut train_kw = vec![vec![0.0; t_n]; s_n];
    for (j, job) in inst.jobs.iter().enumerate() {
        for t in 0..t_n {
            if let Some(i) = schedules[j][t] {
                train_kw[i][t] += job.power_kw;
            }
        }
    }

    for (i, site) in inst.sites.iter().enumerate() {
        let bat = &site.battery;
        for t in 0..t_n {
            m.add_objective_term(p_sell[i][t], eco.price_sell[t] * dt);
            m.add_objective_term(p_buy[i][t], -eco.price_buy[t] * dt);
            m.add_objective_term(p_chg[i][t], -eco.battery_degradation_cost * dt);
            m.add_objective_term(p_dis[i][t], -eco.battery_degradation_cost * dt);
            if let Some(mask) = buy_mask {
                // Buying and selling are mutually exclusive per period.
                let banned = if mask[i][t] { p_sell[i][t] } else { p_buy[i][t] };
                m.variables[banned].upper = 0.0;
            }

            // Balance: gen + buy + dis - sell - chg - (1+a)*inf_kw = (1+a)*train_kw.
            let overhead = 1.0 + site.cooling_overhead[t];
            let mut terms = vec![
                (p_buy[i][t], 1.0),
                (p_dis[i][t], 1.0),
                (p_sell[i][t], -1.0),
                (p_chg[i][t], -1.0),
            ];
            for (k, class) in inst.classes.iter().enumerate() {
                if let Some(var) = x[i][k][t] {
                    terms.push((var, -overhead * class.power_kw_per_unit));
                }
            }
            m.add_constraint(
                format!("balance(s{i}.t{t})"),
                terms,
                ConstraintSense::Eq,
                overhead * train_kw[i][t] - site.local_gen_kw[t],
                Some("eq4"),
            );

            // Battery recurrence.
            let mut terms = vec![
                (soc[i][t], 1.0),
                (p_chg[i][t], -bat.charge_eff * dt),
                (p_dis[i][t], dt / bat.discharge_eff),
            ];
            let rhs = if t == 0 {
                bat.soc_init_kwh
            } else {
                terms.push((soc[i][t - 1], -1.0));
                0.0
            };
            m.add_constraint(
                format!("soc_balance(s{i}.t{t})"),
                terms,
                ConstraintSense::Eq,
                rhs,
                Some("eq13"),
            );
        }
        if inst.enforce_terminal_soc && t_n > 0 {
            m.add_constraint(
                format!("terminal_soc(s{i})"),
                vec![(soc[i][t_n - 1], 1.0)],
                ConstraintSense::Ge,
                bat.soc_init_kwh,
                Some("terminal_soc"),
            );
        }
    }
    for (k, class) in inst.classes.iter().enumerate() {
        for t in 0..t_n {
            let terms: Vec<(usize, f64)> = (0..s_n)
                .filter_map(|i| x[i][k][t].map(|var| (var, 1.0)))
                .collect();
            m.add_constraint(
                format!("demand(k{k}.t{t})"),
                terms,
                ConstraintSense::Eq,
                class.demand_units[t],
                Some("eq11"),
            );
        }
    }
    if inst.economics.carbon_budget_kg.is_finite() {
        let mut terms = Vec::new();
        for (i, site) in inst.sites.iter().enumerate() {
            for t in 0..t_n {
                terms.push((p_buy[i][t], site.carbon_intensity_kg_per_kwh[t] * dt));
            }
        }
        m.add_constraint(
            "carbon_budget",
            terms,
            ConstraintSense::Le,
            inst.economics.carbon_budget_kg,
            Some("eq16"),
        );
    }
    EnergyLp {
        model: m,
        p_buy,
        p_sell,
        p_chg,
        p_dis,
        soc,
        x,
    }
}

/// Exhaustive ground truth for tiny instances: enumerates every legal
/// assignment of the job-layer binaries (deriving starts and stops) and
/// solves the continuous energy-and-routing LP for each, keeping the
/// best.
///
/// The buy/sell flags are handled in two regimes. When the sell price
/// never exceeds the buy price (the usual case), simultaneous buying and
/// selling can only lose money, so the LP may leave both caps open and
/// any overlap in an optimal point is a zero-profit wash that is
/// subtracted out afterwards — no flag enumeration is needed. Otherwise
/// the oracle enumerates the per-(site, period) buy-or-sell choice
/// explicitly (the both-off choice is dominated by either).
///
/// The bound `limit` caps the total number of enumerated patterns.
pub fn enumeration_oracle(inst: &Instance, limit: u64) -> Result<OracleResult, OracleError> {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();
    let wash_free = inst
        .economics
        .price_sell
        .iter()
        .zip(&inst.economics.price_buy)
        .all(|(s, b)| s <= b);

    let mut per_job: Vec<Vec<JobSchedule>> = Vec::with_capacity(inst.jobs.len());
    let mut count: u128 = 1;
    for job in &inst.jobs {
        let raw = ((s_n + 1) as u128)
            .checked_pow(t_n as u32)
            .unwrap_or(u128::MAX);
        if raw > limit as u128 {
            return Err(OracleError::LimitExceeded { count: raw, limit });
        }
        let schedules = job_schedules(job, s_n, t_n).expect("raw space bounded by limit");
        count = count.saturating_mul(schedules.len() as u128);
        per_job.push(schedules);
    }
    let y_modes: u128 = if wash_free {
        1
    } else {
        1u128.checked_shl((s_n * t_n) as u32).unwrap_or(u128::MAX)
    };
    count = count.saturating_mul(y_modes);
    if count > limit as u128 {
        return Err(OracleError::LimitExceeded { count, limit });
    }

    let mut best: Option<OracleResult> = None;
    let mut combo = vec![0usize; inst.jobs.len()];
    loop {
        let schedules: Vec<&JobSchedule> = if inst.jobs.is_empty() {
            Vec::new()
        } else {
            combo
                .iter()
                .enumerate()
                .map(|(j, &c)| &per_job[j][c])
                .collect()
        };
        for y_code in 0..y_modes {
            let mask = if wash_free {
                None
            } else {
                let mut mask = vec![vec![false; t_n]; s_n];
                for i in 0..s_n {
                    for t in 0..t_n {
                        mask[i][t] = (y_code >> (i * t_n + t)) & 1 == 1;
                    }
                }
                Some(mask)
            };
            let lp = build_energy_lp(inst, &schedules, mask.as_deref());
            let res = solve_lp(&lp.model, &LpOptions::default())?;
            if res.status != LpStatus::Optimal {
                continue;
            }
            let sol = assemble_solution(inst, &schedules, &lp, &res.x);
            let objective = compute_metrics(inst, &sol).objective_total;
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(OracleResult {
                    objective,
                    solution: sol,
                });
            }
        }
        // Mixed-radix increment over per-job schedule indices.
        let mut pos = 0;
        loop {
            if pos == combo.len() {
                return best.ok_or(OracleError::Infeasible);
            }
            combo[pos] += 1;
            if combo[pos] < per_job[pos].len() {
                break;
            }
            combo[pos] = 0;
            pos += 1;
        }
    }
}

/// Builds full solution tensors from fixed schedules and an energy-LP
/// point, cancelling any zero-profit buy/sell overlap before deriving
/// the trade flags.
fn assemble_solution(
    inst: &Instance,
    schedules: &[&JobSchedule],
    lp: &EnergyLp,
    point: &[f64],
) -> Solution {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();
    let mut sol = Solution::idle(inst);
    for (j, sched) in schedules.iter().enumerate() {
        let mut prev: Option<usize> = None;
        for t in 0..t_n {
            if let Some(i) = sched[t] {
                sol.u[i][j][t] = 1.0;
                if prev != Some(i) {
                    sol.v[i][j][t] = 1.0;
                }
            }
            if let Some(p) = prev {
                if sched[t] != Some(p) {
                    sol.w[p][j][t] = 1.0;
                }
            }
            prev = sched[t];
        }
    }
    for i in 0..s_n {
        for t in 0..t_n {
            let mut buy = point[lp.p_buy[i][t]];
            let mut sell = point[lp.p_sell[i][t]];
            let wash = buy.min(sell).max(0.0);
            buy -= wash;
            sell -= wash;
            sol.p_buy[i][t] = buy;
            sol.p_sell[i][t] = sell;
            sol.y_buy[i][t] = if buy > 1e-9 { 1.0 } else { 0.0 };
            sol.y_sell[i][t] = if sell > 1e-9 { 1.0 } else { 0.0 };
            sol.p_chg[i][t] = point[lp.p_chg[i][t]];
            sol.p_dis[i][t] = point[lp.p_dis[i][t]];
            sol.soc[i][t] = point[lp.soc[i][t]];
            let mut p_it = 0.0;
            for (j, job) in inst.jobs.iter().enumerate() {
                p_it += job.power_kw * sol.u[i][j][t];
            }
            for (k, class) in inst.classes.iter().enumerate() {
                if let Some(var) = lp.x[i][k][t] {
                    sol.x[i][k][t] = point[var];
                    p_it += class.power_kw_per_unit * point[var];
                }
            }
            sol.p_it[i][t] = p_it;
            sol.p_tot[i][t] = (1.0 + inst.sites[i].cooling_overhead[t]) * p_it;
        }
    }
    sol
}

// ---------------------------------------------------------------------
// Knapsack oracle
// ---------------------------------------------------------------------

/// Exact 0/1 knapsack optimum by dynamic programming over integer
/// capacities. Weights must be (numerically) nonnegative integers.
pub fn knapsack_oracle(values: &[f64], weights: &[f64], capacity: f64) -> f64 {
    assert_eq!(values.len(), weights.len());
    let cap = capacity.max(0.0).floor() as usize;
    let mut dp = vec![0.0f64; cap + 1];
    for (value, weight) in values.iter().zip(weights) {
        assert!(
            *weight >= 0.0 && (weight - weight.round()).abs() < 1e-9,
            "knapsack weights must be nonnegative integers, got {weight}"
        );
        let w = weight.round() as usize;
        if w > cap {
            continue;
        }
        if w == 0 {
            if *value > 0.0 {
                for slot in dp.iter_mut() {
                    *slot += value;
                }
            }
            continue;
        }
        for c in (w..=cap).rev() {
            let with = dp[c - w] + value;
            if with > dp[c] {
                dp[c] = with;
            }
        }
    }
    dp[cap]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::Variant;
    use crate::instance::{
        BatterySpec, Economics, InferenceClassSpec, LatencyMatrix, SiteSpec, TimeGrid,
    };
    use crate::scenario::ScenarioKind;

    fn tiny_cfg() -> GenConfig {
        GenConfig {
            seed: 4,
            num_sites: 2,
            num_periods: 3,
            num_jobs: 1,
            num_classes: 1,
            scenario: ScenarioKind::Default,
        }
    }

    fn exactish() -> SolverParams {
        SolverParams {
            time_limit_s: 60.0,
            rel_gap: 1e-9,
            ..SolverParams::default()
        }
    }

    #[test]
    fn knapsack_oracle_handles_fit_and_overflow() {
        assert_eq!(knapsack_oracle(&[10.0], &[5.0], 4.0), 0.0);
        assert_eq!(knapsack_oracle(&[10.0, 7.0], &[5.0, 4.0], 9.0), 17.0);
        // Negative-value items are never taken.
        assert_eq!(knapsack_oracle(&[-3.0, 8.0], &[1.0, 2.0], 3.0), 8.0);
    }

    #[test]
    fn oracle_matches_exact_milp_on_tiny_instance() {
        let inst = generate(&tiny_cfg());
        let oracle = enumeration_oracle(&inst, 1 << 20).unwrap();
        let eval = crate::baselines::run_variant(&inst, Variant::Joint, &exactish()).unwrap();
        let rel = (oracle.objective - eval.metrics.objective_total).abs()
            / oracle.objective.abs().max(1.0);
        assert!(
            rel < 1e-6,
            "oracle {} vs solver {}",
            oracle.objective,
            eval.metrics.objective_total
        );
        // The oracle's own winner must be joint-feasible.
        let check =
            crate::validator::check_solution(&inst, &oracle.solution, 1e-6).unwrap();
        assert!(check.is_feasible(), "{check}");
    }

    #[test]
    fn oracle_enforces_pattern_limit() {
        let inst = generate(&tiny_cfg());
        match enumeration_oracle(&inst, 1) {
            Err(OracleError::LimitExceeded { count, limit: 1 }) => assert!(count > 1),
            other => panic!("expected limit error, got {other:?}"),
        }
    }

    #[test]
    fn oracle_reports_infeasible_when_demand_unserviceable() {
        let inst = Instance {
            time: TimeGrid {
                num_periods: 1,
                period_hours: 1.0,
            },
            sites: vec![SiteSpec {
                id: "s0".into(),
                grid_capacity_kw: 10.0,
                local_gen_kw: vec![0.0],
                cooling_overhead: vec![0.0],
                carbon_intensity_kg_per_kwh: vec![0.0],
                battery: BatterySpec::zero(),
            }],
            jobs: Vec::new(),
            classes: vec![InferenceClassSpec {
                id: "k0".into(),
                revenue_per_unit: 5.0,
                gpu_cost_per_unit: 1.0,
                power_kw_per_unit: 1.0,
                demand_units: vec![3.0],
            }],
            economics: Economics {
                price_buy: vec![1.0],
                price_sell: vec![0.5],
                battery_degradation_cost: 0.0,
                sla_penalty_coeff: 0.0,
                carbon_budget_kg: f64::INFINITY,
            },
            latency: LatencyMatrix {
                latency_ms: vec![vec![500.0]],
                latency_cap_ms: 100.0,
            },
            enforce_terminal_soc: false,
        };
        match enumeration_oracle(&inst, 1 << 20) {
            Err(OracleError::Infeasible) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn comparison_emits_six_rows_in_fixed_order() {
        let inst = generate(&tiny_cfg());
        let params = SolverParams {
            time_limit_s: 60.0,
            rel_gap: 1e-4,
            ..SolverParams::default()
        };
        let rows = run_comparison(&inst, &params).unwrap();
        let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            methods,
            ["joint", "compute_only", "energy_only", "no_battery", "no_routing", "no_carbon"]
        );
        let joint = rows[0].objective.unwrap();
        let slack = 1e-3 * joint.abs().max(1.0);
        assert!(rows[5].objective.unwrap() >= joint - slack, "no_carbon dominates joint");
        assert!(joint >= rows[3].objective.unwrap() - slack, "joint dominates no_battery");
        assert!(joint >= rows[4].objective.unwrap() - slack, "joint dominates no_routing");
        let csv = comparison_csv(&rows);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("method,objective"));
    }

    #[test]
    fn sweep_emits_rows_incrementally_and_repetitions_agree() {
        let cfg = SweepConfig {
            axis: SweepAxis::Periods,
            values: vec![2, 3],
            base: GenConfig {
                seed: 6,
                num_sites: 2,
                num_periods: 2,
                num_jobs: 1,
                num_classes: 1,
                scenario: ScenarioKind::Default,
            },
            params: SolverParams {
                time_limit_s: 30.0,
                rel_gap: 1e-4,
                ..SolverParams::default()
            },
            repetitions: 2,
        };
        let mut seen = 0;
        let rows = run_sweep(&cfg, |_| seen += 1);
        assert_eq!(seen, 4);
        assert_eq!(rows.len(), 4);
        for pair in rows.chunks(2) {
            assert_eq!(pair[0].objective, pair[1].objective, "repetition determinism");
            assert_eq!(pair[0].nodes, pair[1].nodes);
        }
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn csv_fields_are_escaped() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}

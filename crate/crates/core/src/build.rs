//! Translates an [`Instance`] into the joint compute–power MILP.
//!
//! Constraint families are tagged on each row:
//! - `eq2` IT power definition, `eq3` total power with cooling overhead
//! - `eq4` site energy balance, `eq5`/`eq6` grid capacity with buy/sell
//!   flags, `eq7` buy/sell exclusivity
//! - `eq8` each job at one site at most, `eq9` on/off state transitions
//!   (jobs start off), `eq10` minimum uptime with end-of-horizon
//!   truncation
//! - `eq11` inference demand fully served, `eq13` battery state of
//!   charge
//! - `eq16` horizon carbon budget (omitted by the `no_carbon` variant)
//! - `non_preemption` at most one startup per flagged job,
//!   `terminal_soc` end-of-horizon battery floor
//!
//! `eq12` (latency-infeasible routing forbidden) is structural — those
//! x variables are never created — and `eq14`/`eq15` (state-of-charge
//! and charge/discharge limits) become variable bounds; all three are
//! recorded in the model metadata.
//!
//! Every variant shares one variable layout: `no_battery` and
//! `no_routing` fix variables via bounds and `no_carbon` drops a single
//! row, so a solution vector for one variant can be evaluated against
//! any other.

use crate::instance::Instance;
use crate::milp::{ConstraintSense, Integrality, MilpModel, Sense};
use crate::validator::Solution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which restriction of the joint model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Joint,
    NoBattery,
    NoRouting,
    NoCarbon,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Joint => "joint",
            Variant::NoBattery => "no_battery",
            Variant::NoRouting => "no_routing",
            Variant::NoCarbon => "no_carbon",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(Variant::Joint),
            "no_battery" | "no-battery" => Ok(Variant::NoBattery),
            "no_routing" | "no-routing" => Ok(Variant::NoRouting),
            "no_carbon" | "no-carbon" => Ok(Variant::NoCarbon),
            other => Err(format!(
                "unknown variant {other:?} (expected joint, no_battery, no_routing, no_carbon)"
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub variant: Variant,
    /// Add the at-most-one-startup row for jobs marked non-preemptive.
    pub non_preemption: bool,
    /// Require each site's final state of charge to be at least initial.
    pub terminal_soc: bool,
    /// Per-class forced site for `no_routing`; lowest-latency feasible
    /// site when absent.
    pub home_sites: Option<Vec<usize>>,
}

impl BuildOptions {
    /// Joint model with the instance's own terminal-SOC policy.
    pub fn for_instance(inst: &Instance) -> Self {
        BuildOptions {
            variant: Variant::Joint,
            non_preemption: true,
            terminal_soc: inst.enforce_terminal_soc,
            home_sites: None,
        }
    }

    pub fn with_variant(inst: &Instance, variant: Variant) -> Self {
        BuildOptions {
            variant,
            ..BuildOptions::for_instance(inst)
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("class {class} has positive demand in period {period} but no latency-feasible site")]
    UnserviceableDemand { class: usize, period: usize },
    #[error("no_routing home site {site} for class {class} is not latency-feasible")]
    InfeasibleHomeSite { class: usize, site: usize },
}

/// Positions of every model variable, by role and coordinates. `x`
/// entries are `None` exactly for latency-infeasible (site, class) pairs.
#[derive(Debug, Clone)]
pub struct VarIndex {
    pub u: Vec<Vec<Vec<usize>>>,
    pub v: Vec<Vec<Vec<usize>>>,
    pub w: Vec<Vec<Vec<usize>>>,
    pub y_buy: Vec<Vec<usize>>,
    pub y_sell: Vec<Vec<usize>>,
    pub x: Vec<Vec<Vec<Option<usize>>>>,
    pub p_buy: Vec<Vec<usize>>,
    pub p_sell: Vec<Vec<usize>>,
    pub p_chg: Vec<Vec<usize>>,
    pub p_dis: Vec<Vec<usize>>,
    pub soc: Vec<Vec<usize>>,
    pub p_it: Vec<Vec<usize>>,
    pub p_tot: Vec<Vec<usize>>,
    pub num_vars: usize,
}

impl VarIndex {
    /// Reads a model-space point back into solution tensors.
    pub fn extract_solution(&self, inst: &Instance, point: &[f64]) -> Solution {
        let s_n = inst.num_sites();
        let t_n = inst.num_periods();
        let j_n = inst.jobs.len();
        let k_n = inst.classes.len();
        let grid = |ix: &Vec<Vec<usize>>| -> Vec<Vec<f64>> {
            (0..s_n)
                .map(|i| (0..t_n).map(|t| point[ix[i][t]]).collect())
                .collect()
        };
        let cube = |ix: &Vec<Vec<Vec<usize>>>| -> Vec<Vec<Vec<f64>>> {
            (0..s_n)
                .map(|i| {
                    (0..j_n)
                        .map(|j| (0..t_n).map(|t| point[ix[i][j][t]]).collect())
                        .collect()
                })
                .collect()
        };
        Solution {
            u: cube(&self.u),
            v: cube(&self.v),
            w: cube(&self.w),
            x: (0..s_n)
                .map(|i| {
                    (0..k_n)
                        .map(|k| {
                            (0..t_n)
                                .map(|t| self.x[i][k][t].map_or(0.0, |p| point[p]))
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            p_buy: grid(&self.p_buy),
            p_sell: grid(&self.p_sell),
            p_chg: grid(&self.p_chg),
            p_dis: grid(&self.p_dis),
            soc: grid(&self.soc),
            p_it: grid(&self.p_it),
            p_tot: grid(&self.p_tot),
            y_buy: grid(&self.y_buy),
            y_sell: grid(&self.y_sell),
        }
    }

    /// Writes solution tensors into a model-space point. Values at
    /// latency-infeasible x entries have no variable and are dropped.
    pub fn pack_solution(&self, inst: &Instance, sol: &Solution) -> Vec<f64> {
        let mut point = vec![0.0; self.num_vars];
        for i in 0..inst.num_sites() {
            for t in 0..inst.num_periods() {
                for j in 0..inst.jobs.len() {
                    point[self.u[i][j][t]] = sol.u[i][j][t];
                    point[self.v[i][j][t]] = sol.v[i][j][t];
                    point[self.w[i][j][t]] = sol.w[i][j][t];
                }
                for k in 0..inst.classes.len() {
                    if let Some(p) = self.x[i][k][t] {
                        point[p] = sol.x[i][k][t];
                    }
                }
                point[self.y_buy[i][t]] = sol.y_buy[i][t];
                point[self.y_sell[i][t]] = sol.y_sell[i][t];
                point[self.p_buy[i][t]] = sol.p_buy[i][t];
                point[self.p_sell[i][t]] = sol.p_sell[i][t];
                point[self.p_chg[i][t]] = sol.p_chg[i][t];
                point[self.p_dis[i][t]] = sol.p_dis[i][t];
                point[self.soc[i][t]] = sol.soc[i][t];
                point[self.p_it[i][t]] = sol.p_it[i][t];
                point[self.p_tot[i][t]] = sol.p_tot[i][t];
            }
        }
        point
    }
}

/// Bound-tightening and structural-elimination counts; the same rules
/// are applied inside [`build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresolveSummary {
    /// Latency-infeasible (site, class) routing pairs with no variable.
    pub removed_routing_pairs: usize,
    /// Variable upper bounds tightened below their nameplate values.
    pub tightened_bounds: usize,
}

/// Battery charge-rate cap: nameplate limited by how much charging the
/// SOC range can absorb in one period.
fn charge_ub(inst: &Instance, i: usize) -> f64 {
    let bat = &inst.sites[i].battery;
    let dt = inst.time.period_hours;
    let span = (bat.soc_max_kwh - bat.soc_min_kwh).max(0.0);
    bat.max_charge_kw.min(span / (bat.charge_eff * dt))
}

/// Battery discharge-rate cap, mirroring [`charge_ub`].
fn discharge_ub(inst: &Instance, i: usize) -> f64 {
    let bat = &inst.sites[i].battery;
    let dt = inst.time.period_hours;
    let span = (bat.soc_max_kwh - bat.soc_min_kwh).max(0.0);
    bat.max_discharge_kw.min(bat.discharge_eff * span / dt)
}

/// Grid-import cap: interconnect capacity, tightened by the largest net
/// load the site could plausibly present (all jobs plus all routable
/// demand plus battery charging, minus local generation; export is zero
/// whenever the site buys).
fn buy_ub(inst: &Instance, i: usize) -> f64 {
    let site = &inst.sites[i];
    let jobs_kw: f64 = inst.jobs.iter().map(|j| j.power_kw).sum();
    let mut worst: f64 = 0.0;
    for t in 0..inst.num_periods() {
        let inf_kw: f64 = inst
            .classes
            .iter()
            .enumerate()
            .filter(|(k, _)| inst.latency.feasible(i, *k))
            .map(|(_, c)| c.power_kw_per_unit * c.demand_units[t])
            .sum();
        let net = (1.0 + site.cooling_overhead[t]) * (jobs_kw + inf_kw) + charge_ub(inst, i)
            - site.local_gen_kw[t];
        worst = worst.max(net);
    }
    site.grid_capacity_kw.min(worst)
}

/// Counts the reductions [`build`] will apply.
pub fn presolve(inst: &Instance) -> PresolveSummary {
    let mut removed = 0;
    for i in 0..inst.num_sites() {
        for k in 0..inst.classes.len() {
            if !inst.latency.feasible(i, k) {
                removed += 1;
            }
        }
    }
    let mut tightened = 0;
    for i in 0..inst.num_sites() {
        let bat = &inst.sites[i].battery;
        if charge_ub(inst, i) < bat.max_charge_kw {
            tightened += 1;
        }
        if discharge_ub(inst, i) < bat.max_discharge_kw {
            tightened += 1;
        }
        if buy_ub(inst, i) < inst.sites[i].grid_capacity_kw {
            tightened += 1;
        }
    }
    PresolveSummary {
        removed_routing_pairs: removed,
        tightened_bounds: tightened,
    }
}

/// Resolves the forced site per class for `no_routing`. Classes with no
/// demand and no feasible site are left unrouted (`None`).
fn resolve_homes(inst: &Instance, opts: &BuildOptions) -> Result<Vec<Option<usize>>, BuildError> {
    let mut homes = Vec::with_capacity(inst.classes.len());
    for (k, class) in inst.classes.iter().enumerate() {
        let home = match &opts.home_sites {
            Some(map) => map.get(k).copied(),
            None => inst.nearest_site(k),
        };
        match home {
            Some(site) if !inst.latency.feasible(site, k) => {
                return Err(BuildError::InfeasibleHomeSite { class: k, site });
            }
            Some(site) => homes.push(Some(site)),
            None => {
                if let Some(t) = class.demand_units.iter().position(|&d| d > 0.0) {
                    return Err(BuildError::UnserviceableDemand {
                        class: k,
                        period: t,
                    });
                }
                homes.push(None);
            }
        }
    }
    Ok(homes)
}

/// Builds the MILP for `inst` under `opts`. See the module docs for the
/// constraint-family tags.
pub fn build(inst: &Instance, opts: &BuildOptions) -> Result<(MilpModel, VarIndex), BuildError> {
    let s_n = inst.num_sites();
    let t_n = inst.num_periods();
    let j_n = inst.jobs.len();
    let k_n = inst.classes.len();
    let dt = inst.time.period_hours;
    let no_battery = opts.variant == Variant::NoBattery;
    let no_routing = opts.variant == Variant::NoRouting;
    let no_carbon = opts.variant == Variant::NoCarbon;

    // Unserviceable demand is infeasible by construction, for every
    // variant; no_routing additionally needs a valid home per class.
    for (k, class) in inst.classes.iter().enumerate() {
        if inst.feasible_sites(k).is_empty() {
            if let Some(t) = class.demand_units.iter().position(|&d| d > 0.0) {
                return Err(BuildError::UnserviceableDemand {
                    class: k,
                    period: t,
                });
            }
        }
    }
    let homes = if no_routing {
        Some(resolve_homes(inst, opts)?)
    } else {
        None
    };

    let mut model = MilpModel::new(Sense::Maximize);
    let grid3 =
        |_: &str| -> Vec<Vec<Vec<usize>>> { vec![vec![vec![0; t_n]; j_n]; s_n] };
    let mut ix = VarIndex {
        u: grid3("u"),
        v: grid3("v"),
        w: grid3("w"),
        y_buy: vec![vec![0; t_n]; s_n],
        y_sell: vec![vec![0; t_n]; s_n],
        x: vec![vec![vec![None; t_n]; k_n]; s_n],
        p_buy: vec![vec![0; t_n]; s_n],
        p_sell: vec![vec![0; t_n]; s_n],
        p_chg: vec![vec![0; t_n]; s_n],
        p_dis: vec![vec![0; t_n]; s_n],
        soc: vec![vec![0; t_n]; s_n],
        p_it: vec![vec![0; t_n]; s_n],
        p_tot: vec![vec![0; t_n]; s_n],
        num_vars: 0,
    };

    // Job state binaries.
    for (role, store) in [("u", &mut ix.u), ("v", &mut ix.v), ("w", &mut ix.w)] {
        for i in 0..s_n {
            for j in 0..j_n {
                for t in 0..t_n {
                    store[i][j][t] =
                        model.add_binary(format!("{role}(s{i}.j{j}.t{})", t + 1));
                }
            }
        }
    }
    // Grid interaction flags.
    for i in 0..s_n {
        for t in 0..t_n {
            ix.y_buy[i][t] = model.add_binary(format!("yb(s{i}.t{})", t + 1));
        }
    }
    for i in 0..s_n {
        for t in 0..t_n {
            ix.y_sell[i][t] = model.add_binary(format!("ys(s{i}.t{})", t + 1));
        }
    }
    // Inference routing: variables exist only for latency-feasible pairs.
    for i in 0..s_n {
        for k in 0..k_n {
            if !inst.latency.feasible(i, k) {
                continue;
            }
            let forced_off = homes
                .as_ref()
                .is_some_and(|h| h[k].is_some() && h[k] != Some(i));
            for t in 0..t_n {
                let ub = if forced_off {
                    0.0
                } else {
                    inst.classes[k].demand_units[t]
                };
                ix.x[i][k][t] = Some(model.add_var(
                    format!("x(s{i}.k{k}.t{})", t + 1),
                    0.0,
                    ub,
                    Integrality::Continuous,
                ));
            }
        }
    }
    // Site power and battery variables.
    for i in 0..s_n {
        let p_buy_cap = buy_ub(inst, i).max(0.0);
        let chg_cap = if no_battery { 0.0 } else { charge_ub(inst, i) };
        let dis_cap = if no_battery { 0.0 } else { discharge_ub(inst, i) };
        let bat = &inst.sites[i].battery;
        for t in 0..t_n {
            let tn = t + 1;
            ix.p_buy[i][t] = model.add_var(
                format!("Pbuy(s{i}.t{tn})"),
                0.0,
                p_buy_cap,
                Integrality::Continuous,
            );
            ix.p_sell[i][t] = model.add_var(
                format!("Psell(s{i}.t{tn})"),
                0.0,
                inst.sites[i].grid_capacity_kw,
                Integrality::Continuous,
            );
            ix.p_chg[i][t] = model.add_var(
                format!("Pchg(s{i}.t{tn})"),
                0.0,
                chg_cap,
                Integrality::Continuous,
            );
            ix.p_dis[i][t] = model.add_var(
                format!("Pdis(s{i}.t{tn})"),
                0.0,
                dis_cap,
                Integrality::Continuous,
            );
            ix.soc[i][t] = model.add_var(
                format!("soc(s{i}.t{tn})"),
                bat.soc_min_kwh,
                bat.soc_max_kwh,
                Integrality::Continuous,
            );
            ix.p_it[i][t] = model.add_var(
                format!("Pit(s{i}.t{tn})"),
                0.0,
                f64::INFINITY,
                Integrality::Continuous,
            );
            ix.p_tot[i][t] = model.add_var(
                format!("Ptot(s{i}.t{tn})"),
                0.0,
                f64::INFINITY,
                Integrality::Continuous,
            );
        }
    }
    ix.num_vars = model.num_vars();

    // Objective: inference margin net of latency penalty, training
    // rewards, energy trading, and battery-throughput degradation.
    // Prices and degradation are per kWh, so power terms carry dt.
    for i in 0..s_n {
        for k in 0..k_n {
            for t in 0..t_n {
                if let Some(p) = ix.x[i][k][t] {
                    let class = &inst.classes[k];
                    let margin = class.revenue_per_unit
                        - class.gpu_cost_per_unit
                        - inst.economics.sla_penalty_coeff * inst.latency.latency_ms[i][k];
                    model.add_objective_term(p, margin);
                }
            }
        }
    }
    for i in 0..s_n {
        for j in 0..j_n {
            for t in 0..t_n {
                model.add_objective_term(ix.u[i][j][t], inst.jobs[j].reward_per_period);
            }
        }
    }
    for i in 0..s_n {
        for t in 0..t_n {
            model.add_objective_term(ix.p_sell[i][t], inst.economics.price_sell[t] * dt);
            model.add_objective_term(ix.p_buy[i][t], -inst.economics.price_buy[t] * dt);
            let deg = inst.economics.battery_degradation_cost * dt;
            model.add_objective_term(ix.p_chg[i][t], -deg);
            model.add_objective_term(ix.p_dis[i][t], -deg);
        }
    }

    // eq2/eq3: IT power definition and cooling overhead.
    for i in 0..s_n {
        for t in 0..t_n {
            let tn = t + 1;
            let mut terms = vec![(ix.p_it[i][t], 1.0)];
            for j in 0..j_n {
                terms.push((ix.u[i][j][t], -inst.jobs[j].power_kw));
            }
            for k in 0..k_n {
                if let Some(p) = ix.x[i][k][t] {
                    terms.push((p, -inst.classes[k].power_kw_per_unit));
                }
            }
            model.add_constraint(
                format!("eq2(s{i}.t{tn})"),
                terms,
                ConstraintSense::Eq,
                0.0,
                Some("eq2"),
            );
            model.add_constraint(
                format!("eq3(s{i}.t{tn})"),
                vec![
                    (ix.p_tot[i][t], 1.0),
                    (ix.p_it[i][t], -(1.0 + inst.sites[i].cooling_overhead[t])),
                ],
                ConstraintSense::Eq,
                0.0,
                Some("eq3"),
            );
        }
    }

    // eq4–eq7: energy balance and grid interaction.
    for i in 0..s_n {
        let cap = inst.sites[i].grid_capacity_kw;
        for t in 0..t_n {
            let tn = t + 1;
            model.add_constraint(
                format!("eq4(s{i}.t{tn})"),
                vec![
                    (ix.p_buy[i][t], 1.0),
                    (ix.p_dis[i][t], 1.0),
                    (ix.p_tot[i][t], -1.0),
                    (ix.p_sell[i][t], -1.0),
                    (ix.p_chg[i][t], -1.0),
                ],
                ConstraintSense::Eq,
                -inst.sites[i].local_gen_kw[t],
                Some("eq4"),
            );
            model.add_constraint(
                format!("eq5(s{i}.t{tn})"),
                vec![(ix.p_buy[i][t], 1.0), (ix.y_buy[i][t], -cap)],
                ConstraintSense::Le,
                0.0,
                Some("eq5"),
            );
            model.add_constraint(
                format!("eq6(s{i}.t{tn})"),
                vec![(ix.p_sell[i][t], 1.0), (ix.y_sell[i][t], -cap)],
                ConstraintSense::Le,
                0.0,
                Some("eq6"),
            );
            model.add_constraint(
                format!("eq7(s{i}.t{tn})"),
                vec![(ix.y_buy[i][t], 1.0), (ix.y_sell[i][t], 1.0)],
                ConstraintSense::Le,
                1.0,
                Some("eq7"),
            );
        }
    }

    // eq8–eq10 (+ non-preemption): job placement and commitment.
    for j in 0..j_n {
        for t in 0..t_n {
            let tn = t + 1;
            let terms: Vec<(usize, f64)> = (0..s_n).map(|i| (ix.u[i][j][t], 1.0)).collect();
            model.add_constraint(
                format!("eq8(j{j}.t{tn})"),
                terms,
                ConstraintSense::Le,
                1.0,
                Some("eq8"),
            );
        }
    }
    for i in 0..s_n {
        for j in 0..j_n {
            let uptime = inst.jobs[j].min_uptime_periods;
            for t in 0..t_n {
                let tn = t + 1;
                let mut terms = vec![
                    (ix.u[i][j][t], 1.0),
                    (ix.v[i][j][t], -1.0),
                    (ix.w[i][j][t], 1.0),
                ];
                if t > 0 {
                    terms.push((ix.u[i][j][t - 1], -1.0));
                }
                model.add_constraint(
                    format!("eq9(s{i}.j{j}.t{tn})"),
                    terms,
                    ConstraintSense::Eq,
                    0.0,
                    Some("eq9"),
                );
                // Startups within the trailing window force u on; windows
                // that would extend past T are truncated at T.
                let from = t.saturating_sub(uptime.saturating_sub(1));
                let mut terms: Vec<(usize, f64)> =
                    (from..=t).map(|tau| (ix.v[i][j][tau], 1.0)).collect();
                terms.push((ix.u[i][j][t], -1.0));
                model.add_constraint(
                    format!("eq10(s{i}.j{j}.t{tn})"),
                    terms,
                    ConstraintSense::Le,
                    0.0,
                    Some("eq10"),
                );
            }
        }
    }
    if opts.non_preemption {
        for j in 0..j_n {
            if !inst.jobs[j].non_preemptive {
                continue;
            }
            let mut terms = Vec::with_capacity(s_n * t_n);
            for i in 0..s_n {
                for t in 0..t_n {
                    terms.push((ix.v[i][j][t], 1.0));
                }
            }
            model.add_constraint(
                format!("np(j{j})"),
                terms,
                ConstraintSense::Le,
                1.0,
                Some("non_preemption"),
            );
        }
    }

    // eq11: serve every unit of demand.
    for k in 0..k_n {
        for t in 0..t_n {
            let terms: Vec<(usize, f64)> = (0..s_n)
                .filter_map(|i| ix.x[i][k][t].map(|p| (p, 1.0)))
                .collect();
            if terms.is_empty() {
                // No feasible site; build() already rejected positive demand.
                continue;
            }
            model.add_constraint(
                format!("eq11(k{k}.t{})", t + 1),
                terms,
                ConstraintSense::Eq,
                inst.classes[k].demand_units[t],
                Some("eq11"),
            );
        }
    }

    // eq13: state-of-charge dynamics (kWh), plus the optional terminal floor.
    for i in 0..s_n {
        let bat = &inst.sites[i].battery;
        for t in 0..t_n {
            let tn = t + 1;
            let mut terms = vec![
                (ix.soc[i][t], 1.0),
                (ix.p_chg[i][t], -bat.charge_eff * dt),
                (ix.p_dis[i][t], dt / bat.discharge_eff),
            ];
            let rhs = if t == 0 {
                bat.soc_init_kwh
            } else {
                terms.push((ix.soc[i][t - 1], -1.0));
                0.0
            };
            model.add_constraint(
                format!("eq13(s{i}.t{tn})"),
                terms,
                ConstraintSense::Eq,
                rhs,
                Some("eq13"),
            );
        }
        if opts.terminal_soc {
            model.add_constraint(
                format!("tsoc(s{i})"),
                vec![(ix.soc[i][t_n - 1], 1.0)],
                ConstraintSense::Ge,
                bat.soc_init_kwh,
                Some("terminal_soc"),
            );
        }
    }

    // eq16: horizon carbon budget on grid imports. An infinite budget
    // means the cap is disabled and the row would be vacuous.
    if !no_carbon && inst.economics.carbon_budget_kg.is_finite() {
        let mut terms = Vec::with_capacity(s_n * t_n);
        for i in 0..s_n {
            for t in 0..t_n {
                terms.push((
                    ix.p_buy[i][t],
                    inst.sites[i].carbon_intensity_kg_per_kwh[t] * dt,
                ));
            }
        }
        model.add_constraint(
            "eq16",
            terms,
            ConstraintSense::Le,
            inst.economics.carbon_budget_kg,
            Some("eq16"),
        );
    }

    let summary = presolve(inst);
    model.metadata.insert(
        "eq12".into(),
        format!(
            "structural: {} latency-infeasible routing pairs have no x variable",
            summary.removed_routing_pairs
        ),
    );
    model.metadata.insert(
        "eq14".into(),
        "state-of-charge limits realized as soc variable bounds".into(),
    );
    model.metadata.insert(
        "eq15".into(),
        "charge/discharge limits realized as Pchg/Pdis variable bounds".into(),
    );
    model
        .metadata
        .insert("variant".into(), opts.variant.as_str().into());

    debug_assert!(model.check().is_ok());
    Ok((model, ix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, GenConfig, ScenarioKind};

    fn default_instance() -> Instance {
        generate(&GenConfig {
            seed: 11,
            num_sites: 3,
            num_periods: 24,
            num_jobs: 6,
            num_classes: 3,
            scenario: ScenarioKind::Default,
        })
    }

    #[test]
    fn default_instance_has_1440_binaries() {
        let inst = default_instance();
        let (model, ix) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        assert_eq!(model.binary_indices().len(), 1440);
        assert_eq!(model.num_vars(), ix.num_vars);
    }

    #[test]
    fn x_variables_exist_exactly_for_latency_feasible_pairs() {
        let inst = default_instance();
        let (_, ix) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        for i in 0..inst.num_sites() {
            for k in 0..inst.classes.len() {
                for t in 0..inst.num_periods() {
                    assert_eq!(
                        ix.x[i][k][t].is_some(),
                        inst.latency.feasible(i, k),
                        "x presence mismatch at site {i}, class {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn every_constraint_is_tagged_and_families_are_complete() {
        let inst = default_instance();
        let (model, _) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        let mut families: std::collections::BTreeSet<String> = model
            .constraints
            .iter()
            .map(|c| c.tag.clone().expect("untagged constraint"))
            .collect();
        for key in model.metadata.keys() {
            families.insert(key.clone());
        }
        for family in [
            "eq2", "eq3", "eq4", "eq5", "eq6", "eq7", "eq8", "eq9", "eq10", "eq11", "eq12",
            "eq13", "eq14", "eq15", "eq16",
        ] {
            assert!(families.contains(family), "missing family {family}");
        }
        assert!(families.contains("non_preemption"));
    }

    #[test]
    fn no_carbon_variant_omits_the_budget_row() {
        let inst = default_instance();
        let (joint, _) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        let (nc, _) =
            build(&inst, &BuildOptions::with_variant(&inst, Variant::NoCarbon)).unwrap();
        assert!(joint.constraints.iter().any(|c| c.tag.as_deref() == Some("eq16")));
        assert!(nc.constraints.iter().all(|c| c.tag.as_deref() != Some("eq16")));
        assert_eq!(joint.num_vars(), nc.num_vars());
        assert_eq!(joint.num_constraints(), nc.num_constraints() + 1);
    }

    #[test]
    fn variants_share_one_variable_layout() {
        let inst = default_instance();
        let (joint, _) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        for variant in [Variant::NoBattery, Variant::NoRouting, Variant::NoCarbon] {
            let (m, _) = build(&inst, &BuildOptions::with_variant(&inst, variant)).unwrap();
            assert_eq!(joint.num_vars(), m.num_vars());
            for (a, b) in joint.variables.iter().zip(&m.variables) {
                assert_eq!(a.name, b.name);
                assert_eq!(a.integrality, b.integrality);
            }
        }
    }

    #[test]
    fn no_battery_fixes_charge_and_discharge_to_zero() {
        let inst = default_instance();
        let (m, ix) =
            build(&inst, &BuildOptions::with_variant(&inst, Variant::NoBattery)).unwrap();
        for i in 0..inst.num_sites() {
            for t in 0..inst.num_periods() {
                assert_eq!(m.variables[ix.p_chg[i][t]].upper, 0.0);
                assert_eq!(m.variables[ix.p_dis[i][t]].upper, 0.0);
            }
        }
    }

    #[test]
    fn no_routing_pins_each_class_to_its_nearest_site() {
        let inst = default_instance();
        let (m, ix) =
            build(&inst, &BuildOptions::with_variant(&inst, Variant::NoRouting)).unwrap();
        for k in 0..inst.classes.len() {
            let home = inst.nearest_site(k).unwrap();
            for i in 0..inst.num_sites() {
                for t in 0..inst.num_periods() {
                    if let Some(p) = ix.x[i][k][t] {
                        if i == home {
                            assert_eq!(m.variables[p].upper, inst.classes[k].demand_units[t]);
                        } else {
                            assert_eq!(m.variables[p].upper, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_cooling_overhead_reduces_eq3_to_identity() {
        let mut inst = default_instance();
        for site in &mut inst.sites {
            site.cooling_overhead = vec![0.0; inst.time.num_periods];
        }
        let (m, ix) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        let row = m
            .constraints
            .iter()
            .find(|c| c.name == "eq3(s0.t1)")
            .unwrap();
        assert_eq!(
            row.terms,
            vec![(ix.p_it[0][0], -1.0), (ix.p_tot[0][0], 1.0)]
        );
    }

    #[test]
    fn all_idle_point_is_feasible_with_zero_objective_when_nothing_pays() {
        let mut inst = default_instance();
        for class in &mut inst.classes {
            class.demand_units = vec![0.0; inst.time.num_periods];
        }
        for job in &mut inst.jobs {
            job.reward_per_period = 0.0;
        }
        for site in &mut inst.sites {
            site.local_gen_kw = vec![0.0; inst.time.num_periods];
        }
        let (m, ix) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        let mut point = vec![0.0; m.num_vars()];
        for i in 0..inst.num_sites() {
            for t in 0..inst.num_periods() {
                point[ix.soc[i][t]] = inst.sites[i].battery.soc_init_kwh;
            }
        }
        let eval = crate::milp::evaluate(&m, &point, 1e-6).unwrap();
        assert!(eval.is_feasible(), "violations: {:?}", eval.violations);
        assert_eq!(eval.objective, 0.0);
    }

    #[test]
    fn unserviceable_demand_is_rejected_at_build_time() {
        let mut inst = default_instance();
        // Put class 1 out of reach of every site.
        for i in 0..inst.num_sites() {
            inst.latency.latency_ms[i][1] = inst.latency.latency_cap_ms + 1.0;
        }
        let err = build(&inst, &BuildOptions::for_instance(&inst)).unwrap_err();
        assert!(matches!(err, BuildError::UnserviceableDemand { class: 1, .. }));
    }

    #[test]
    fn minimum_uptime_window_truncates_at_the_horizon() {
        let inst = default_instance();
        let (m, ix) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        let t_n = inst.num_periods();
        // Last-period row: window covers [T-U+1, T] clipped to the horizon.
        let uptime = inst.jobs[0].min_uptime_periods;
        let row = m
            .constraints
            .iter()
            .find(|c| c.name == format!("eq10(s0.j0.t{t_n})"))
            .unwrap();
        let expected_vs = uptime.min(t_n);
        assert_eq!(row.terms.len(), expected_vs + 1);
        assert!(row.terms.contains(&(ix.u[0][0][t_n - 1], -1.0)));
    }

    #[test]
    fn knapsack_shape_builds_expected_structure() {
        use crate::instance::*;
        let inst = Instance {
            time: TimeGrid {
                num_periods: 1,
                period_hours: 1.0,
            },
            sites: vec![SiteSpec {
                id: "s0".into(),
                grid_capacity_kw: 100.0,
                local_gen_kw: vec![0.0],
                cooling_overhead: vec![0.0],
                carbon_intensity_kg_per_kwh: vec![0.0],
                battery: BatterySpec::zero(),
            }],
            jobs: (0..4)
                .map(|j| TrainingJobSpec {
                    id: format!("j{j}"),
                    power_kw: 10.0 + j as f64,
                    min_uptime_periods: 1,
                    reward_per_period: 50.0,
                    non_preemptive: true,
                })
                .collect(),
            classes: vec![],
            economics: Economics {
                price_buy: vec![2.0],
                price_sell: vec![0.0],
                battery_degradation_cost: 0.0,
                sla_penalty_coeff: 0.0,
                carbon_budget_kg: f64::INFINITY,
            },
            latency: LatencyMatrix {
                latency_ms: vec![vec![]],
                latency_cap_ms: 100.0,
            },
            enforce_terminal_soc: false,
        };
        let (m, _) = build(&inst, &BuildOptions::for_instance(&inst)).unwrap();
        // 3 job binaries per job plus the two grid flags.
        assert_eq!(m.binary_indices().len(), 3 * 4 + 2);
    }
}

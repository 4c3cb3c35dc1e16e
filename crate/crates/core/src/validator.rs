//! Solver-independent feasibility checking and metric computation.
//!
//! Everything here is derived from the [`Instance`] alone — never from
//! the built model — so model-builder bugs cannot certify themselves.
//! Violations are grouped into the same constraint families the builder
//! tags: `eq2`–`eq16`, `non_preemption`, `terminal_soc`, plus `bounds`
//! (sign and unit-interval limits) and `integrality`.
//!
//! Tolerance convention (shared with the MILP evaluator): a residual is
//! a violation when it exceeds `tol * max(1, |reference|)`, where the
//! reference is the row's constant (demand, budget, bound, ...).

use crate::instance::Instance;
use crate::milp::exceeds_tol;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default checking tolerance, matched to the solver's integrality and
/// feasibility tolerances so "solver-feasible" and "validator-feasible"
/// coincide.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A full assignment of the decision tensors.
///
/// Index order is `[site][job][period]` for job states,
/// `[site][class][period]` for routing, and `[site][period]` for the
/// power and battery series. `soc[i][t]` is the state of charge at the
/// END of period `t`; the pre-horizon value is the instance's
/// `soc_init_kwh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: Vec<Vec<Vec<f64>>>,
    pub v: Vec<Vec<Vec<f64>>>,
    pub w: Vec<Vec<Vec<f64>>>,
    pub x: Vec<Vec<Vec<f64>>>,
    pub p_buy: Vec<Vec<f64>>,
    pub p_sell: Vec<Vec<f64>>,
    pub p_chg: Vec<Vec<f64>>,
    pub p_dis: Vec<Vec<f64>>,
    pub soc: Vec<Vec<f64>>,
    pub p_it: Vec<Vec<f64>>,
    pub p_tot: Vec<Vec<f64>>,
    pub y_buy: Vec<Vec<f64>>,
    pub y_sell: Vec<Vec<f64>>,
}

impl Solution {
    /// The all-idle solution: nothing runs, nothing trades, batteries
    /// hold their initial charge. Feasible iff no demand must be served.
    pub fn idle(inst: &Instance) -> Solution {
        let s_n = inst.num_sites();
        let t_n = inst.num_periods();
        let grid = vec![vec![0.0; t_n]; s_n];
        let cube = vec![vec![vec![0.0; t_n]; inst.jobs.len()]; s_n];
        Solution {
            u: cube.clone(),
            v: cube.clone(),
            w: cube,
            x: vec![vec![vec![0.0; t_n]; inst.classes.len()]; s_n],
            p_buy: grid.clone(),
            p_sell: grid.clone(),
            p_chg: grid.clone(),
            p_dis: grid.clone(),
            soc: (0..s_n)
                .map(|i| vec![inst.sites[i].battery.soc_init_kwh; t_n])
                .collect(),
            p_it: grid.clone(),
            p_tot: grid.clone(),
            y_buy: grid.clone(),
            y_sell: grid,
        }
    }

    fn check_shape(&self, inst: &Instance) -> Result<(), ShapeError> {
        let s_n = inst.num_sites();
        let t_n = inst.num_periods();
        let j_n = inst.jobs.len();
        let k_n = inst.classes.len();
        let cube_ok = |c: &Vec<Vec<Vec<f64>>>, mid: usize| {
            c.len() == s_n && c.iter().all(|a| a.len() == mid && a.iter().all(|b| b.len() == t_n))
        };
        let grid_ok =
            |g: &Vec<Vec<f64>>| g.len() == s_n && g.iter().all(|r| r.len() == t_n);
        let fields: [(&str, bool); 13] = [
            ("u", cube_ok(&self.u, j_n)),
            ("v", cube_ok(&self.v, j_n)),
            ("w", cube_ok(&self.w, j_n)),
            ("x", cube_ok(&self.x, k_n)),
            ("p_buy", grid_ok(&self.p_buy)),
            ("p_sell", grid_ok(&self.p_sell)),
            ("p_chg", grid_ok(&self.p_chg)),
            ("p_dis", grid_ok(&self.p_dis)),
            ("soc", grid_ok(&self.soc)),
            ("p_it", grid_ok(&self.p_it)),
            ("p_tot", grid_ok(&self.p_tot)),
            ("y_buy", grid_ok(&self.y_buy)),
            ("y_sell", grid_ok(&self.y_sell)),
        ];
        for (name, ok) in fields {
            if !ok {
                return Err(ShapeError {
                    field: name,
                    expected: format!("sites={s_n}, jobs={j_n}, classes={k_n}, periods={t_n}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("solution tensor {field:?} does not match instance dimensions ({expected})")]
pub struct ShapeError {
    pub field: &'static str,
    pub expected: String,
}

/// One constraint breach, grouped by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    /// Family tag: eq2..eq16, non_preemption, terminal_soc, bounds,
    /// integrality.
    pub family: String,
    /// Coordinates, e.g. "s0.t3", "s1.j0.t2", "k1.t4".
    pub location: String,
    pub residual: f64,
}

/// Grouped violations plus non-fatal diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub violations: Vec<ConstraintViolation>,
    /// Allowed-but-suspicious patterns: simultaneous charge and
    /// discharge, or both trade flags raised at one (site, period).
    pub diagnostics: Vec<String>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct violated families, sorted.
    pub fn families(&self) -> Vec<&str> {
        let set: std::collections::BTreeSet<&str> =
            self.violations.iter().map(|v| v.family.as_str()).collect();
        set.into_iter().collect()
    }
}

impl std::fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "solution satisfies all constraint families")?;
        } else {
            writeln!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {} at {}: residual {}", v.family, v.location, v.residual)?;
            }
        }
        for d in &self.diagnostics {
            writeln!(f, "  note: {d}")?;
        }
        Ok(())
    }
}

/// Objective decomposition; all terms are reported as nonnegative
/// magnitudes and enter the total with the sign of their role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub inference_margin: f64,
    pub sla_penalty: f64,
    pub energy_sales: f64,
    pub energy_purchases: f64,
    pub degradation: f64,
    pub training_reward: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.inference_margin + self.training_reward + self.energy_sales
            - self.sla_penalty
            - self.energy_purchases
            - self.degradation
    }
}

/// Per-site operational series for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSeries {
    pub site: String,
    /// Grid import minus export (kW), per period.
    pub net_import_kw: Vec<f64>,
    pub soc_kwh: Vec<f64>,
}

/// Validator-computed objective, term breakdown, and emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub objective_total: f64,
    pub objective_terms: ObjectiveTerms,
    pub emissions_kg: f64,
    pub per_site_series: Option<Vec<SiteSeries>>,
}

/// Recomputes the objective and emissions from the instance directly.
pub fn compute_metrics(inst: &Instance, sol: &Solution) -> Metrics {
    sol.check_shape(inst).expect("solution shape");
    let dt = inst.time.period_hours;
    let mut terms = ObjectiveTerms::default();
    let mut emissions = 0.0;
    for i in 0..inst.num_sites() {
        for t in 0..inst.num_periods() {
            for (k, class) in inst.classes.iter().enumerate() {
                let served = sol.x[i][k][t];
                terms.inference_margin +=
                    (class.revenue_per_unit - class.gpu_cost_per_unit) * served;
                terms.sla_penalty += inst.economics.sla_penalty_coeff
                    * inst.latency.latency_ms[i][k]
                    * served;
            }
            for (j, job) in inst.jobs.iter().enumerate() {
                terms.training_reward += job.reward_per_period * sol.u[i][j][t];
            }
            terms.energy_sales += inst.economics.price_sell[t] * dt * sol.p_sell[i][t];
            terms.energy_purchases += inst.economics.price_buy[t] * dt * sol.p_buy[i][t];
            terms.degradation += inst.economics.battery_degradation_cost
                * dt
                * (sol.p_chg[i][t] + sol.p_dis[i][t]);
            emissions += inst.sites[i].carbon_intensity_kg_per_kwh[t] * dt * sol.p_buy[i][t];
        }
    }
    let series = inst
        .sites
        .iter()
        .enumerate()
        .map(|(i, site)| SiteSeries {
            site: site.id.clone(),
            net_import_kw: (0..inst.num_periods())
                .map(|t| sol.p_buy[i][t] - sol.p_sell[i][t])
                .collect(),
            soc_kwh: sol.soc[i].clone(),
        })
        .collect();
    Metrics {
        objective_total: terms.total(),
        objective_terms: terms,
        emissions_kg: emissions,
        per_site_series: Some(series),
    }
}

struct Checker<'a> {
    inst: &'a Instance,
    sol: &'a Solution,
    tol: f64,
    report: ConstraintReport,
}

impl Checker<'_> {
    fn flag(&mut self, family: &str, location: String, residual: f64) {
        self.report.violations.push(ConstraintViolation {
            family: family.to_string(),
            location,
            residual,
        });
    }

    /// Reports `residual` against `reference` scale if it is a violation.
    fn check(&mut self, family: &str, location: String, residual: f64, reference: f64) {
        if residual > 0.0 && exceeds_tol(residual, reference, self.tol) {
            self.flag(family, location, residual);
        }
    }

    fn binaries(&mut self) {
        let tol = self.tol;
        let one = |name: &str, val: f64, loc: String, list: &mut Vec<ConstraintViolation>| {
            let frac = (val - val.round()).abs();
            if frac > tol {
                list.push(ConstraintViolation {
                    family: "integrality".into(),
                    location: format!("{name}({loc})"),
                    residual: frac,
                });
            }
            let below = -val;
            let above = val - 1.0;
            if below > tol || above > tol {
                list.push(ConstraintViolation {
                    family: "bounds".into(),
                    location: format!("{name}({loc})"),
                    residual: below.max(above),
                });
            }
        };
        let mut found = Vec::new();
        for i in 0..self.inst.num_sites() {
            for j in 0..self.inst.jobs.len() {
                for t in 0..self.inst.num_periods() {
                    let loc = format!("s{i}.j{j}.t{}", t + 1);
                    one("u", self.sol.u[i][j][t], loc.clone(), &mut found);
                    one("v", self.sol.v[i][j][t], loc.clone(), &mut found);
                    one("w", self.sol.w[i][j][t], loc, &mut found);
                }
            }
            for t in 0..self.inst.num_periods() {
                let loc = format!("s{i}.t{}", t + 1);
                one("y_buy", self.sol.y_buy[i][t], loc.clone(), &mut found);
                one("y_sell", self.sol.y_sell[i][t], loc, &mut found);
            }
        }
        self.report.violations.extend(found);
    }

    fn nonnegativity(&mut self) {
        for i in 0..self.inst.num_sites() {
            for t in 0..self.inst.num_periods() {
                let loc = |name: &str| format!("{name}(s{i}.t{})", t + 1);
                for (name, val) in [
                    ("p_buy", self.sol.p_buy[i][t]),
                    ("p_sell", self.sol.p_sell[i][t]),
                    ("p_chg", self.sol.p_chg[i][t]),
                    ("p_dis", self.sol.p_dis[i][t]),
                    ("p_it", self.sol.p_it[i][t]),
                    ("p_tot", self.sol.p_tot[i][t]),
                ] {
                    self.check("bounds", loc(name), -val, 0.0);
                }
            }
            for k in 0..self.inst.classes.len() {
                for t in 0..self.inst.num_periods() {
                    self.check(
                        "bounds",
                        format!("x(s{i}.k{k}.t{})", t + 1),
                        -self.sol.x[i][k][t],
                        0.0,
                    );
                }
            }
        }
    }

    /// eq2 and eq3: IT power definition and cooling overhead.
    fn power_definitions(&mut self) {
        for (i, site) in self.inst.sites.iter().enumerate() {
            for t in 0..self.inst.num_periods() {
                let mut it = 0.0;
                for (j, job) in self.inst.jobs.iter().enumerate() {
                    it += job.power_kw * self.sol.u[i][j][t];
                }
                for (k, class) in self.inst.classes.iter().enumerate() {
                    it += class.power_kw_per_unit * self.sol.x[i][k][t];
                }
                let loc = format!("s{i}.t{}", t + 1);
                self.check("eq2", loc.clone(), (self.sol.p_it[i][t] - it).abs(), 0.0);
                let tot = (1.0 + site.cooling_overhead[t]) * self.sol.p_it[i][t];
                self.check("eq3", loc, (self.sol.p_tot[i][t] - tot).abs(), 0.0);
            }
        }
    }

    /// eq4–eq7: energy balance and grid interaction.
    fn energy_balance(&mut self) {
        for (i, site) in self.inst.sites.iter().enumerate() {
            for t in 0..self.inst.num_periods() {
                let loc = format!("s{i}.t{}", t + 1);
                let supply = site.local_gen_kw[t] + self.sol.p_buy[i][t] + self.sol.p_dis[i][t];
                let use_ = self.sol.p_tot[i][t] + self.sol.p_sell[i][t] + self.sol.p_chg[i][t];
                self.check("eq4", loc.clone(), (supply - use_).abs(), site.local_gen_kw[t]);
                self.check(
                    "eq5",
                    loc.clone(),
                    self.sol.p_buy[i][t] - site.grid_capacity_kw * self.sol.y_buy[i][t],
                    0.0,
                );
                self.check(
                    "eq6",
                    loc.clone(),
                    self.sol.p_sell[i][t] - site.grid_capacity_kw * self.sol.y_sell[i][t],
                    0.0,
                );
                self.check(
                    "eq7",
                    loc,
                    self.sol.y_buy[i][t] + self.sol.y_sell[i][t] - 1.0,
                    1.0,
                );
            }
        }
    }

    /// eq8–eq10 plus the non-preemption extension.
    fn job_layer(&mut self) {
        let s_n = self.inst.num_sites();
        for (j, job) in self.inst.jobs.iter().enumerate() {
            for t in 0..self.inst.num_periods() {
                let total: f64 = (0..s_n).map(|i| self.sol.u[i][j][t]).sum();
                self.check("eq8", format!("j{j}.t{}", t + 1), total - 1.0, 1.0);
            }
            for i in 0..s_n {
                for t in 0..self.inst.num_periods() {
                    let loc = format!("s{i}.j{j}.t{}", t + 1);
                    let prev = if t == 0 { 0.0 } else { self.sol.u[i][j][t - 1] };
                    let resid = self.sol.u[i][j][t] - prev - self.sol.v[i][j][t]
                        + self.sol.w[i][j][t];
                    self.check("eq9", loc.clone(), resid.abs(), 0.0);
                    let from = t.saturating_sub(job.min_uptime_periods.saturating_sub(1));
                    let starts: f64 = (from..=t).map(|tau| self.sol.v[i][j][tau]).sum();
                    self.check("eq10", loc, starts - self.sol.u[i][j][t], 0.0);
                }
            }
            if job.non_preemptive {
                let starts: f64 = (0..s_n)
                    .map(|i| self.sol.v[i][j].iter().sum::<f64>())
                    .sum();
                self.check("non_preemption", format!("j{j}"), starts - 1.0, 1.0);
            }
        }
    }

    /// eq11 and eq12: demand satisfaction and latency feasibility.
    fn routing(&mut self) {
        for (k, class) in self.inst.classes.iter().enumerate() {
            for t in 0..self.inst.num_periods() {
                let served: f64 = (0..self.inst.num_sites()).map(|i| self.sol.x[i][k][t]).sum();
                self.check(
                    "eq11",
                    format!("k{k}.t{}", t + 1),
                    (served - class.demand_units[t]).abs(),
                    class.demand_units[t],
                );
            }
            for i in 0..self.inst.num_sites() {
                if self.inst.latency.feasible(i, k) {
                    continue;
                }
                for t in 0..self.inst.num_periods() {
                    self.check(
                        "eq12",
                        format!("s{i}.k{k}.t{}", t + 1),
                        self.sol.x[i][k][t],
                        0.0,
                    );
                }
            }
        }
    }

    /// eq13–eq15 plus the optional terminal floor.
    fn battery(&mut self) {
        let dt = self.inst.time.period_hours;
        for (i, site) in self.inst.sites.iter().enumerate() {
            let bat = &site.battery;
            for t in 0..self.inst.num_periods() {
                let loc = format!("s{i}.t{}", t + 1);
                let prev = if t == 0 {
                    bat.soc_init_kwh
                } else {
                    self.sol.soc[i][t - 1]
                };
                let expected = prev + bat.charge_eff * dt * self.sol.p_chg[i][t]
                    - dt / bat.discharge_eff * self.sol.p_dis[i][t];
                let reference = if t == 0 { bat.soc_init_kwh } else { 0.0 };
                self.check(
                    "eq13",
                    loc.clone(),
                    (self.sol.soc[i][t] - expected).abs(),
                    reference,
                );
                self.check(
                    "eq14",
                    loc.clone(),
                    bat.soc_min_kwh - self.sol.soc[i][t],
                    bat.soc_min_kwh,
                );
                self.check(
                    "eq14",
                    loc.clone(),
                    self.sol.soc[i][t] - bat.soc_max_kwh,
                    bat.soc_max_kwh,
                );
                self.check(
                    "eq15",
                    loc.clone(),
                    self.sol.p_chg[i][t] - bat.max_charge_kw,
                    bat.max_charge_kw,
                );
                self.check(
                    "eq15",
                    loc,
                    self.sol.p_dis[i][t] - bat.max_discharge_kw,
                    bat.max_discharge_kw,
                );
            }
            if self.inst.enforce_terminal_soc {
                let last = self.sol.soc[i][self.inst.num_periods() - 1];
                self.check(
                    "terminal_soc",
                    format!("s{i}"),
                    bat.soc_init_kwh - last,
                    bat.soc_init_kwh,
                );
            }
        }
    }

    /// eq16: horizon carbon budget.
    fn carbon(&mut self) {
        let budget = self.inst.economics.carbon_budget_kg;
        if !budget.is_finite() {
            return;
        }
        let emissions = compute_metrics_emissions(self.inst, self.sol);
        self.check("eq16", "horizon".into(), emissions - budget, budget);
    }

    fn diagnostics(&mut self) {
        for i in 0..self.inst.num_sites() {
            for t in 0..self.inst.num_periods() {
                if self.sol.p_chg[i][t] > self.tol && self.sol.p_dis[i][t] > self.tol {
                    self.report.diagnostics.push(format!(
                        "simultaneous charge and discharge at s{i}.t{}",
                        t + 1
                    ));
                }
                if self.sol.y_buy[i][t] > 0.5 && self.sol.y_sell[i][t] > 0.5 {
                    self.report.diagnostics.push(format!(
                        "buy and sell flags both raised at s{i}.t{}",
                        t + 1
                    ));
                }
            }
        }
    }
}

fn compute_metrics_emissions(inst: &Instance, sol: &Solution) -> f64 {
    let dt = inst.time.period_hours;
    let mut emissions = 0.0;
    for i in 0..inst.num_sites() {
        for t in 0..inst.num_periods() {
            emissions += inst.sites[i].carbon_intensity_kg_per_kwh[t] * dt * sol.p_buy[i][t];
        }
    }
    emissions
}

/// Checks every constraint family against the instance. Violations are
/// grouped by family with location and residual; diagnostics report
/// legal-but-odd battery/trading patterns.
pub fn check_solution(
    inst: &Instance,
    sol: &Solution,
    tol: f64,
) -> Result<ConstraintReport, ShapeError> {
    sol.check_shape(inst)?;
    let mut checker = Checker {
        inst,
        sol,
        tol,
        report: ConstraintReport::default(),
    };
    checker.binaries();
    checker.nonnegativity();
    checker.power_definitions();
    checker.energy_balance();
    checker.job_layer();
    checker.routing();
    checker.battery();
    checker.carbon();
    checker.diagnostics();
    Ok(checker.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::*;

    const TOL: f64 = 1e-6;

    /// Fixture engineered so every family has a mutation flagged in that
    /// family alone. Key levers: job powers of 1e-7 kW hide job-state
    /// flips from eq2; class 0 has power 0.01 kW/unit and demand 1000 so
    /// small x changes hit eq2 but stay inside eq11's tolerance (and a
    /// larger change does the reverse); class 1 has zero power per unit
    /// so its x is invisible to eq2; site 0's period-3 carbon intensity
    /// is enormous so a sub-tolerance P_buy change breaches the budget.
    fn fixture() -> Instance {
        Instance {
            time: TimeGrid {
                num_periods: 3,
                period_hours: 1.0,
            },
            sites: vec![
                SiteSpec {
                    id: "s0".into(),
                    grid_capacity_kw: 100.0,
                    local_gen_kw: vec![50.0, 50.0, 50.0],
                    cooling_overhead: vec![0.0, 0.0, 0.0],
                    carbon_intensity_kg_per_kwh: vec![0.001, 0.001, 1e8],
                    battery: BatterySpec {
                        charge_eff: 0.5,
                        discharge_eff: 0.5,
                        soc_min_kwh: 0.0,
                        soc_max_kwh: 10.0,
                        soc_init_kwh: 5.0,
                        max_charge_kw: 1.0,
                        max_discharge_kw: 4.0,
                    },
                },
                SiteSpec {
                    id: "s1".into(),
                    grid_capacity_kw: 100.0,
                    local_gen_kw: vec![0.0, 0.0, 0.0],
                    cooling_overhead: vec![0.0, 0.0, 0.0],
                    carbon_intensity_kg_per_kwh: vec![2.0, 2.0, 2.0],
                    battery: BatterySpec::zero(),
                },
            ],
            jobs: vec![
                TrainingJobSpec {
                    id: "j0".into(),
                    power_kw: 1e-7,
                    min_uptime_periods: 2,
                    reward_per_period: 7.0,
                    non_preemptive: true,
                },
                TrainingJobSpec {
                    id: "j1".into(),
                    power_kw: 1e-7,
                    min_uptime_periods: 1,
                    reward_per_period: 3.0,
                    non_preemptive: false,
                },
            ],
            classes: vec![
                InferenceClassSpec {
                    id: "k0".into(),
                    revenue_per_unit: 10.0,
                    gpu_cost_per_unit: 2.0,
                    power_kw_per_unit: 0.01,
                    demand_units: vec![1000.0, 1000.0, 1000.0],
                },
                InferenceClassSpec {
                    id: "k1".into(),
                    revenue_per_unit: 1.0,
                    gpu_cost_per_unit: 0.5,
                    power_kw_per_unit: 0.0,
                    demand_units: vec![2.0, 2.0, 2.0],
                },
            ],
            economics: Economics {
                price_buy: vec![1.0, 1.0, 1.0],
                price_sell: vec![0.5, 0.5, 0.5],
                battery_degradation_cost: 0.01,
                sla_penalty_coeff: 0.0001,
                carbon_budget_kg: 5.0,
            },
            latency: LatencyMatrix {
                latency_ms: vec![vec![10.0, 5.0], vec![20.0, 60.0]],
                latency_cap_ms: 50.0,
            },
            enforce_terminal_soc: false,
        }
    }

    /// Known-feasible base solution on [`fixture`]:
    /// - job 0 runs at site 0 in periods 1–2 (min uptime 2), job 1 at
    ///   site 1 in period 3;
    /// - class 0 is served from site 0 (900 of 1000 units move to site 1
    ///   in period 3), class 1 entirely from site 0;
    /// - site 0's battery discharges to empty in period 1 and recharges
    ///   at exactly its 1 kW limit in period 3;
    /// - site 0 always sells its surplus local generation, site 1 buys
    ///   what its workload needs.
    fn base_solution(inst: &Instance) -> Solution {
        let mut sol = Solution::idle(inst);
        // Job states.
        sol.u[0][0][0] = 1.0;
        sol.u[0][0][1] = 1.0;
        sol.v[0][0][0] = 1.0;
        sol.w[0][0][2] = 1.0;
        sol.u[1][1][2] = 1.0;
        sol.v[1][1][2] = 1.0;
        // Routing.
        sol.x[0][0][0] = 1000.0;
        sol.x[0][0][1] = 1000.0;
        sol.x[0][0][2] = 900.0;
        sol.x[1][0][2] = 100.0;
        for t in 0..3 {
            sol.x[0][1][t] = 2.0;
        }
        // IT power per eq2 with matching accumulation, total per eq3.
        for i in 0..2 {
            for t in 0..3 {
                let mut it = 0.0;
                for (j, job) in inst.jobs.iter().enumerate() {
                    it += job.power_kw * sol.u[i][j][t];
                }
                for (k, class) in inst.classes.iter().enumerate() {
                    it += class.power_kw_per_unit * sol.x[i][k][t];
                }
                sol.p_it[i][t] = it;
                sol.p_tot[i][t] = (1.0 + inst.sites[i].cooling_overhead[t]) * it;
            }
        }
        // Battery at site 0: drain to zero, then recharge at the cap.
        sol.p_dis[0][0] = 2.5; // 5 kWh / (dt / eta_dis) = 5 * 0.5
        sol.soc[0][0] = 0.0;
        sol.soc[0][1] = 0.0;
        sol.p_chg[0][2] = 1.0;
        sol.soc[0][2] = 0.5; // eta_chg * dt * 1 kW
        for t in 0..3 {
            sol.soc[1][t] = 0.0;
        }
        // Site 0 sells its surplus; site 1 buys its load.
        for t in 0..3 {
            let surplus = inst.sites[0].local_gen_kw[t] + sol.p_dis[0][t]
                - sol.p_tot[0][t]
                - sol.p_chg[0][t];
            sol.p_sell[0][t] = surplus;
            sol.y_sell[0][t] = 1.0;
            let need = sol.p_tot[1][t];
            if need > 0.0 {
                sol.p_buy[1][t] = need;
                sol.y_buy[1][t] = 1.0;
            }
        }
        sol
    }

    fn flagged(inst: &Instance, sol: &Solution) -> Vec<String> {
        check_solution(inst, sol, TOL)
            .unwrap()
            .families()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn base_solution_is_feasible() {
        let inst = fixture();
        assert!(validate_instance(&inst).is_empty());
        let sol = base_solution(&inst);
        let report = check_solution(&inst, &sol, TOL).unwrap();
        assert!(report.is_feasible(), "unexpected violations: {report}");
    }

    #[test]
    fn idle_solution_is_feasible_without_demand_or_generation() {
        let mut inst = fixture();
        for class in &mut inst.classes {
            class.demand_units = vec![0.0; 3];
        }
        // eq4 is an equality: local generation has to go somewhere, so a
        // fully idle solution is only feasible once generation is zero too.
        for site in &mut inst.sites {
            site.local_gen_kw = vec![0.0; 3];
        }
        let report = check_solution(&inst, &Solution::idle(&inst), TOL).unwrap();
        assert!(report.is_feasible(), "{report}");
    }

    // One mutation per family, each flagged in exactly that family.
    // Families whose variables appear in several balance equations are
    // isolated by exploiting tolerance scales: the mutation is visible
    // to its own family's reference scale but stays inside the other
    // families' tolerance windows.

    #[test]
    fn mutation_eq2_it_power_definition() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // 9e-4 units of class 0: eq2 residual 9e-6 > 1e-6; eq11
        // residual 9e-4 <= 1e-6 * demand 1000.
        sol.x[0][0][0] += 9e-4;
        assert_eq!(flagged(&inst, &sol), ["eq2"]);
    }

    #[test]
    fn mutation_eq3_cooling_overhead() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // 4e-5 kW: above eq3's absolute tolerance, inside eq4's
        // 1e-6 * local_gen 50 window.
        sol.p_tot[0][0] += 4e-5;
        assert_eq!(flagged(&inst, &sol), ["eq3"]);
    }

    #[test]
    fn mutation_eq4_energy_balance() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // 1 kW of unexplained import; emissions rise by 2 kg, still
        // under the 5 kg budget.
        sol.p_buy[1][2] += 1.0;
        assert_eq!(flagged(&inst, &sol), ["eq4"]);
    }

    #[test]
    fn mutation_eq5_buy_capacity_flag() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        sol.y_buy[1][2] = 0.0;
        assert_eq!(flagged(&inst, &sol), ["eq5"]);
    }

    #[test]
    fn mutation_eq6_sell_capacity_flag() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        sol.y_sell[0][0] = 0.0;
        assert_eq!(flagged(&inst, &sol), ["eq6"]);
    }

    #[test]
    fn mutation_eq7_buy_sell_exclusivity() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        sol.y_buy[0][0] = 1.0; // site is selling; P_buy stays 0
        let report = check_solution(&inst, &sol, TOL).unwrap();
        assert_eq!(report.families(), ["eq7"]);
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.contains("buy and sell flags")));
    }

    #[test]
    fn mutation_eq8_one_site_per_job() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Job 1 appears at a second site with a consistent local start;
        // its 1e-7 kW draw hides inside eq2's tolerance.
        sol.u[0][1][2] = 1.0;
        sol.v[0][1][2] = 1.0;
        assert_eq!(flagged(&inst, &sol), ["eq8"]);
    }

    #[test]
    fn mutation_eq9_state_transition() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        sol.w[1][0][0] = 1.0; // shutdown marker with nothing running
        assert_eq!(flagged(&inst, &sol), ["eq9"]);
    }

    #[test]
    fn mutation_eq10_minimum_uptime() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Truncate job 0's two-period run to one period, with the
        // shutdown marker moved so eq9 stays consistent.
        sol.u[0][0][1] = 0.0;
        sol.w[0][0][1] = 1.0;
        sol.w[0][0][2] = 0.0;
        assert_eq!(flagged(&inst, &sol), ["eq10"]);
    }

    #[test]
    fn mutation_eq11_demand_served() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Class 1 draws zero power per unit, so over-serving it is
        // invisible to eq2.
        sol.x[0][1][0] += 0.1;
        assert_eq!(flagged(&inst, &sol), ["eq11"]);
    }

    #[test]
    fn mutation_eq12_latency_infeasible_routing() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Site 1 cannot serve class 1 (60ms > 50ms cap). 1.5e-6 units:
        // above eq12's 1e-6 threshold, inside eq11's 2e-6 window.
        sol.x[1][1][0] = 1.5e-6;
        assert_eq!(flagged(&inst, &sol), ["eq12"]);
    }

    #[test]
    fn mutation_eq13_soc_dynamics() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        sol.soc[0][2] += 0.05; // final period: no successor row to also break
        assert_eq!(flagged(&inst, &sol), ["eq13"]);
    }

    #[test]
    fn mutation_eq14_soc_bounds() {
        // Dedicated single-period fixture: the battery discharges to its
        // 0 kWh floor, so the eq13 row's reference is soc_init = 5 and a
        // 3e-6 kWh dip below zero is inside eq13's 5e-6 window while
        // breaching eq14's 1e-6 absolute floor tolerance.
        let mut inst = fixture();
        inst.time.num_periods = 1;
        truncate_to_one_period(&mut inst);
        inst.jobs.clear();
        inst.classes.clear();
        inst.latency.latency_ms = vec![vec![], vec![]];
        let mut sol = Solution::idle(&inst);
        sol.p_dis[0][0] = 2.5;
        sol.soc[0][0] = 0.0;
        sol.p_sell[0][0] = inst.sites[0].local_gen_kw[0] + 2.5;
        sol.y_sell[0][0] = 1.0;
        assert!(check_solution(&inst, &sol, TOL).unwrap().is_feasible());
        sol.soc[0][0] = -3e-6;
        assert_eq!(flagged(&inst, &sol), ["eq14"]);
    }

    #[test]
    fn mutation_eq15_charge_rate_limit() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Period 3 charges at exactly the 1 kW cap. +1.8e-6 kW exceeds
        // eq15's tolerance; eq13 sees only eta_chg * 1.8e-6 = 9e-7.
        sol.p_chg[0][2] += 1.8e-6;
        assert_eq!(flagged(&inst, &sol), ["eq15"]);
    }

    #[test]
    fn mutation_eq16_carbon_budget() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Period 3 at site 0 has carbon intensity 1e8: half a milliwatt
        // of extra import is invisible to eq4/eq5 but adds 50 kg.
        sol.p_buy[0][2] += 5e-7;
        assert_eq!(flagged(&inst, &sol), ["eq16"]);
    }

    #[test]
    fn mutation_non_preemption_second_startup() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // Re-start job 0 while it keeps running: v and w both 1 in the
        // final period keeps eq9 balanced, but the startup count hits 2.
        sol.u[0][0][2] = 1.0;
        sol.v[0][0][2] = 1.0;
        assert_eq!(flagged(&inst, &sol), ["non_preemption"]);
    }

    #[test]
    fn mutation_terminal_soc_floor() {
        // Single-period prosumer site with terminal enforcement: ending
        // 0.5 kWh low is consistent with eq13 if the energy was
        // discharged and sold, isolating the terminal check.
        let mut inst = fixture();
        inst.time.num_periods = 1;
        truncate_to_one_period(&mut inst);
        inst.jobs.clear();
        inst.classes.clear();
        inst.latency.latency_ms = vec![vec![], vec![]];
        inst.enforce_terminal_soc = true;
        let mut sol = Solution::idle(&inst);
        sol.p_sell[0][0] = inst.sites[0].local_gen_kw[0];
        sol.y_sell[0][0] = 1.0;
        assert!(check_solution(&inst, &sol, TOL).unwrap().is_feasible());
        sol.soc[0][0] = 4.5;
        sol.p_dis[0][0] = 0.25; // 0.5 kWh * eta_dis / dt
        sol.p_sell[0][0] += 0.25;
        assert_eq!(flagged(&inst, &sol), ["terminal_soc"]);
    }

    #[test]
    fn mutation_bounds_negative_import() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // -4e-5 kW: negative beyond the bounds tolerance, inside eq4's
        // 5e-5 window at local_gen 50 (eq5 is one-sided, so a negative
        // purchase cannot trip it).
        sol.p_buy[0][1] = -4e-5;
        assert_eq!(flagged(&inst, &sol), ["bounds"]);
    }

    #[test]
    fn mutation_integrality_fractional_flag() {
        let inst = fixture();
        let mut sol = base_solution(&inst);
        // 0.9 leaves eq6 slack (P_sell well under 90) but is fractional.
        sol.y_sell[0][1] = 0.9;
        assert_eq!(flagged(&inst, &sol), ["integrality"]);
    }

    fn truncate_to_one_period(inst: &mut Instance) {
        for site in &mut inst.sites {
            site.local_gen_kw.truncate(1);
            site.cooling_overhead.truncate(1);
            site.carbon_intensity_kg_per_kwh.truncate(1);
            site.carbon_intensity_kg_per_kwh[0] = 0.001;
        }
        for class in &mut inst.classes {
            class.demand_units.truncate(1);
        }
        for job in &mut inst.jobs {
            job.min_uptime_periods = 1;
        }
        inst.economics.price_buy.truncate(1);
        inst.economics.price_sell.truncate(1);
    }

    #[test]
    fn simultaneous_charge_discharge_is_a_diagnostic_not_a_violation() {
        let mut inst = fixture();
        inst.time.num_periods = 1;
        truncate_to_one_period(&mut inst);
        inst.jobs.clear();
        inst.classes.clear();
        inst.latency.latency_ms = vec![vec![], vec![]];
        let mut sol = Solution::idle(&inst);
        // eta 0.5 both ways: SOC moves by 0.5 - 2 = -1.5 kWh.
        sol.p_chg[0][0] = 1.0;
        sol.p_dis[0][0] = 1.0;
        sol.soc[0][0] = 3.5;
        sol.p_sell[0][0] = inst.sites[0].local_gen_kw[0];
        sol.y_sell[0][0] = 1.0;
        let report = check_solution(&inst, &sol, TOL).unwrap();
        assert!(report.is_feasible(), "{report}");
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.contains("simultaneous charge and discharge")));
    }

    #[test]
    fn metrics_single_unit_arithmetic() {
        let inst = fixture();
        let mut sol = Solution::idle(&inst);
        for i in 0..2 {
            for t in 0..3 {
                sol.soc[i][t] = inst.sites[i].battery.soc_init_kwh;
            }
        }
        sol.x[0][0][0] = 1.0;
        let m = compute_metrics(&inst, &sol);
        assert!((m.objective_terms.inference_margin - 8.0).abs() < 1e-12);
        assert!((m.objective_terms.sla_penalty - 0.0001 * 10.0).abs() < 1e-12);
        assert_eq!(m.emissions_kg, 0.0);
    }

    #[test]
    fn metrics_total_matches_term_sum() {
        let inst = fixture();
        let sol = base_solution(&inst);
        let m = compute_metrics(&inst, &sol);
        let resum = m.objective_terms.total();
        assert!(
            (m.objective_total - resum).abs() <= 1e-9 * m.objective_total.abs().max(1.0)
        );
        // Base solution buys ~1 kW at site 1 period 3 under intensity 2.
        assert!(m.emissions_kg > 0.0 && m.emissions_kg < inst.economics.carbon_budget_kg);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let inst = fixture();
        let mut sol = Solution::idle(&inst);
        sol.p_buy.pop();
        let err = check_solution(&inst, &sol, TOL).unwrap_err();
        assert_eq!(err.field, "p_buy");
    }

    #[test]
    fn emissions_within_budget_iff_eq16_unflagged() {
        let inst = fixture();
        let sol = base_solution(&inst);
        let m = compute_metrics(&inst, &sol);
        let report = check_solution(&inst, &sol, TOL).unwrap();
        let flagged_16 = report.families().contains(&"eq16");
        assert_eq!(
            m.emissions_kg > inst.economics.carbon_budget_kg + TOL,
            flagged_16
        );
    }
}

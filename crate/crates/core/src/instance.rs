//! Problem-instance data model: sites, time grid, workloads, economics.
//!
//! An [`Instance`] is immutable after construction and safe to share
//! read-only across parallel workers. Files use JSON with stable key
//! ordering (struct field order), so saved instances are diffable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete scheduling horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Number of periods in the horizon.
    pub num_periods: usize,
    /// Length of one period in hours; converts power (kW) to energy (kWh).
    pub period_hours: f64,
}

/// Battery energy storage attached to a site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatterySpec {
    /// Charging efficiency in (0, 1].
    pub charge_eff: f64,
    /// Discharging efficiency in (0, 1].
    pub discharge_eff: f64,
    pub soc_min_kwh: f64,
    pub soc_max_kwh: f64,
    /// Initial state of charge; defaults to the midpoint of the SOC range
    /// when absent from an instance file.
    pub soc_init_kwh: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
}

impl<'de> Deserialize<'de> for BatterySpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            charge_eff: f64,
            discharge_eff: f64,
            soc_min_kwh: f64,
            soc_max_kwh: f64,
            #[serde(default)]
            soc_init_kwh: Option<f64>,
            max_charge_kw: f64,
            max_discharge_kw: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        let soc_init = raw
            .soc_init_kwh
            .unwrap_or(0.5 * (raw.soc_min_kwh + raw.soc_max_kwh));
        Ok(BatterySpec {
            charge_eff: raw.charge_eff,
            discharge_eff: raw.discharge_eff,
            soc_min_kwh: raw.soc_min_kwh,
            soc_max_kwh: raw.soc_max_kwh,
            soc_init_kwh: soc_init,
            max_charge_kw: raw.max_charge_kw,
            max_discharge_kw: raw.max_discharge_kw,
        })
    }
}

impl BatterySpec {
    /// A battery that can never charge, discharge, or store anything.
    pub fn zero() -> Self {
        BatterySpec {
            charge_eff: 1.0,
            discharge_eff: 1.0,
            soc_min_kwh: 0.0,
            soc_max_kwh: 0.0,
            soc_init_kwh: 0.0,
            max_charge_kw: 0.0,
            max_discharge_kw: 0.0,
        }
    }
}

/// One data-center site: grid interconnect, local generation, cooling
/// overhead, carbon intensity, and battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub id: String,
    /// Grid interconnection capacity, bounding both import and export (kW).
    pub grid_capacity_kw: f64,
    /// Exogenous local generation per period (kW), length T.
    pub local_gen_kw: Vec<f64>,
    /// Cooling overhead fraction per period; total power = (1+overhead) * IT power.
    pub cooling_overhead: Vec<f64>,
    /// Grid-import carbon intensity per period (kg CO2 / kWh), length T.
    pub carbon_intensity_kg_per_kwh: Vec<f64>,
    pub battery: BatterySpec,
}

/// A rigid training job: fixed power draw, one site at a time, minimum
/// uptime once started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingJobSpec {
    pub id: String,
    /// IT power drawn in every active period (kW).
    pub power_kw: f64,
    /// Minimum consecutive active periods after a startup.
    pub min_uptime_periods: usize,
    /// Reward earned per active period. Zero recovers the plain
    /// energy-and-inference objective.
    pub reward_per_period: f64,
    /// When set, the job may start at most once over the whole horizon.
    #[serde(default = "default_true")]
    pub non_preemptive: bool,
}

fn default_true() -> bool {
    true
}

/// An elastic inference class: divisible demand routable across
/// latency-feasible sites, fully served every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceClassSpec {
    pub id: String,
    pub revenue_per_unit: f64,
    pub gpu_cost_per_unit: f64,
    /// IT power per unit of workload served (kW/unit).
    pub power_kw_per_unit: f64,
    /// Demand per period (units), length T.
    pub demand_units: Vec<f64>,
}

/// Prices, penalty coefficients, and the horizon carbon budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Economics {
    /// Grid purchase price per period (currency/kWh), length T.
    pub price_buy: Vec<f64>,
    /// Grid feed-in price per period (currency/kWh), length T.
    pub price_sell: Vec<f64>,
    /// Battery degradation cost per kWh of charge or discharge throughput.
    pub battery_degradation_cost: f64,
    /// Penalty per unit latency per unit workload served.
    pub sla_penalty_coeff: f64,
    /// Horizon-wide cap on grid-import emissions (kg CO2). May be
    /// infinite to disable the cap; stored as the string "inf" in files.
    #[serde(with = "crate::sfloat")]
    pub carbon_budget_kg: f64,
}

/// Site-to-class network latency and the routing feasibility cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyMatrix {
    /// latency_ms[i][k]: latency from site i to class k's users (ms).
    pub latency_ms: Vec<Vec<f64>>,
    /// Routing pairs with latency above this cap carry no workload.
    pub latency_cap_ms: f64,
}

impl LatencyMatrix {
    /// Whether class `k` may be served from site `i`.
    pub fn feasible(&self, i: usize, k: usize) -> bool {
        self.latency_ms[i][k] <= self.latency_cap_ms
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub time: TimeGrid,
    pub sites: Vec<SiteSpec>,
    pub jobs: Vec<TrainingJobSpec>,
    pub classes: Vec<InferenceClassSpec>,
    pub economics: Economics,
    pub latency: LatencyMatrix,
    /// Require the final state of charge of every battery to be at least
    /// its initial value, preventing end-of-horizon draining.
    #[serde(default)]
    pub enforce_terminal_soc: bool,
}

impl Instance {
    pub fn num_periods(&self) -> usize {
        self.time.num_periods
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    /// Sites allowed to serve class `k`, in site order.
    pub fn feasible_sites(&self, k: usize) -> Vec<usize> {
        (0..self.sites.len())
            .filter(|&i| self.latency.feasible(i, k))
            .collect()
    }

    /// Lowest-latency feasible site for class `k`, ties to the lowest
    /// site index. `None` when no site is latency-feasible.
    pub fn nearest_site(&self, k: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.sites.len() {
            if !self.latency.feasible(i, k) {
                continue;
            }
            let tau = self.latency.latency_ms[i][k];
            match best {
                Some((_, t)) if t <= tau => {}
                _ => best = Some((i, tau)),
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Map from every model symbol to its unique field home, used by the
/// symbol-coverage test. Each entry is (symbol, field path).
pub const SYMBOL_FIELDS: &[(&str, &str)] = &[
    ("R_k", "classes[k].revenue_per_unit"),
    ("C_k^gpu", "classes[k].gpu_cost_per_unit"),
    ("gamma^sla", "economics.sla_penalty_coeff"),
    ("tau_{i,k}", "latency.latency_ms[i][k]"),
    ("lambda^buy_t", "economics.price_buy[t]"),
    ("lambda^sell_t", "economics.price_sell[t]"),
    ("C^deg", "economics.battery_degradation_cost"),
    ("P^tr_j", "jobs[j].power_kw"),
    ("P^inf_k", "classes[k].power_kw_per_unit"),
    ("alpha_{i,t}", "sites[i].cooling_overhead[t]"),
    ("P^loc_{i,t}", "sites[i].local_gen_kw[t]"),
    ("C_i^grid", "sites[i].grid_capacity_kw"),
    ("U_j^min", "jobs[j].min_uptime_periods"),
    ("D_{k,t}", "classes[k].demand_units[t]"),
    ("tau^max", "latency.latency_cap_ms"),
    ("eta^chg", "sites[i].battery.charge_eff"),
    ("eta^dis", "sites[i].battery.discharge_eff"),
    ("SOC_min", "sites[i].battery.soc_min_kwh"),
    ("SOC_max", "sites[i].battery.soc_max_kwh"),
    ("Pbar^chg", "sites[i].battery.max_charge_kw"),
    ("Pbar^dis", "sites[i].battery.max_discharge_kw"),
    ("rho^CO2_{i,t}", "sites[i].carbon_intensity_kg_per_kwh[t]"),
    ("E^max", "economics.carbon_budget_kg"),
    ("T", "time.num_periods"),
    ("Delta_t", "time.period_hours"),
    ("R^tr_j", "jobs[j].reward_per_period"),
];

/// One violated invariant, with a path to the offending field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Result of [`validate_instance`]; empty iff the instance is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "instance is valid");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

/// Errors from [`load_instance`].
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        message: String,
        line: usize,
        column: usize,
    },
    #[error("instance failed validation:\n{0}")]
    Invalid(ValidationReport),
}

fn check_finite(report: &mut ValidationReport, path: &str, value: f64) -> bool {
    if !value.is_finite() {
        report.push(path, format!("must be finite, got {value}"));
        false
    } else {
        true
    }
}

fn check_nonneg(report: &mut ValidationReport, path: &str, value: f64) {
    if check_finite(report, path, value) && value < 0.0 {
        report.push(path, format!("must be >= 0, got {value}"));
    }
}

fn check_series(report: &mut ValidationReport, path: &str, series: &[f64], t: usize) {
    if series.len() != t {
        report.push(
            path,
            format!("series length {} does not match num_periods {t}", series.len()),
        );
    }
    for (idx, &v) in series.iter().enumerate() {
        check_nonneg(report, &format!("{path}[{idx}]"), v);
    }
}

fn check_unique_ids<'a>(
    report: &mut ValidationReport,
    path: &str,
    ids: impl Iterator<Item = &'a str>,
) {
    let mut seen = std::collections::BTreeSet::new();
    for (idx, id) in ids.enumerate() {
        if !seen.insert(id.to_string()) {
            report.push(format!("{path}[{idx}].id"), format!("duplicate id {id:?}"));
        }
    }
}

/// Checks every structural invariant of the instance. Total: never
/// aborts; pathological values (NaN, infinities) are reported as
/// violations. Also flags demand that no latency-feasible site can serve.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let t = inst.time.num_periods;

    if t < 1 {
        report.push("time.num_periods", "must be >= 1");
    }
    if check_finite(&mut report, "time.period_hours", inst.time.period_hours)
        && inst.time.period_hours <= 0.0
    {
        report.push("time.period_hours", "must be > 0");
    }

    check_unique_ids(&mut report, "sites", inst.sites.iter().map(|s| s.id.as_str()));
    check_unique_ids(&mut report, "jobs", inst.jobs.iter().map(|j| j.id.as_str()));
    check_unique_ids(
        &mut report,
        "classes",
        inst.classes.iter().map(|c| c.id.as_str()),
    );

    for (i, site) in inst.sites.iter().enumerate() {
        let p = format!("sites[{i}]");
        check_nonneg(&mut report, &format!("{p}.grid_capacity_kw"), site.grid_capacity_kw);
        check_series(&mut report, &format!("{p}.local_gen_kw"), &site.local_gen_kw, t);
        check_series(
            &mut report,
            &format!("{p}.cooling_overhead"),
            &site.cooling_overhead,
            t,
        );
        check_series(
            &mut report,
            &format!("{p}.carbon_intensity_kg_per_kwh"),
            &site.carbon_intensity_kg_per_kwh,
            t,
        );

        let b = &site.battery;
        let bp = format!("{p}.battery");
        if check_finite(&mut report, &format!("{bp}.charge_eff"), b.charge_eff)
            && !(b.charge_eff > 0.0 && b.charge_eff <= 1.0)
        {
            report.push(
                format!("{bp}.charge_eff"),
                format!("must be in (0, 1], got {}", b.charge_eff),
            );
        }
        if check_finite(&mut report, &format!("{bp}.discharge_eff"), b.discharge_eff)
            && !(b.discharge_eff > 0.0 && b.discharge_eff <= 1.0)
        {
            report.push(
                format!("{bp}.discharge_eff"),
                format!("must be in (0, 1], got {}", b.discharge_eff),
            );
        }
        check_nonneg(&mut report, &format!("{bp}.max_charge_kw"), b.max_charge_kw);
        check_nonneg(&mut report, &format!("{bp}.max_discharge_kw"), b.max_discharge_kw);
        let finite_soc = check_finite(&mut report, &format!("{bp}.soc_min_kwh"), b.soc_min_kwh)
            && check_finite(&mut report, &format!("{bp}.soc_max_kwh"), b.soc_max_kwh)
            && check_finite(&mut report, &format!("{bp}.soc_init_kwh"), b.soc_init_kwh);
        if finite_soc && !(b.soc_min_kwh <= b.soc_init_kwh && b.soc_init_kwh <= b.soc_max_kwh) {
            report.push(
                format!("{bp}.soc_init_kwh"),
                format!(
                    "must satisfy soc_min <= soc_init <= soc_max, got {} <= {} <= {}",
                    b.soc_min_kwh, b.soc_init_kwh, b.soc_max_kwh
                ),
            );
        }
    }

    for (j, job) in inst.jobs.iter().enumerate() {
        let p = format!("jobs[{j}]");
        if check_finite(&mut report, &format!("{p}.power_kw"), job.power_kw)
            && job.power_kw <= 0.0
        {
            report.push(format!("{p}.power_kw"), "must be > 0");
        }
        if job.min_uptime_periods < 1 || job.min_uptime_periods > t {
            report.push(
                format!("{p}.min_uptime_periods"),
                format!(
                    "must be in [1, num_periods={t}], got {}",
                    job.min_uptime_periods
                ),
            );
        }
        check_nonneg(
            &mut report,
            &format!("{p}.reward_per_period"),
            job.reward_per_period,
        );
    }

    for (k, class) in inst.classes.iter().enumerate() {
        let p = format!("classes[{k}]");
        check_nonneg(&mut report, &format!("{p}.revenue_per_unit"), class.revenue_per_unit);
        check_nonneg(&mut report, &format!("{p}.gpu_cost_per_unit"), class.gpu_cost_per_unit);
        check_nonneg(
            &mut report,
            &format!("{p}.power_kw_per_unit"),
            class.power_kw_per_unit,
        );
        check_series(&mut report, &format!("{p}.demand_units"), &class.demand_units, t);
    }

    let e = &inst.economics;
    check_series(&mut report, "economics.price_buy", &e.price_buy, t);
    check_series(&mut report, "economics.price_sell", &e.price_sell, t);
    check_nonneg(
        &mut report,
        "economics.battery_degradation_cost",
        e.battery_degradation_cost,
    );
    check_nonneg(&mut report, "economics.sla_penalty_coeff", e.sla_penalty_coeff);
    // The carbon budget alone may be +inf (cap disabled).
    if e.carbon_budget_kg.is_nan() || e.carbon_budget_kg < 0.0 {
        report.push(
            "economics.carbon_budget_kg",
            format!("must be >= 0 (or +inf), got {}", e.carbon_budget_kg),
        );
    }

    check_nonneg(&mut report, "latency.latency_cap_ms", inst.latency.latency_cap_ms);
    if inst.latency.latency_ms.len() != inst.sites.len() {
        report.push(
            "latency.latency_ms",
            format!(
                "matrix has {} rows, expected one per site ({})",
                inst.latency.latency_ms.len(),
                inst.sites.len()
            ),
        );
    }
    for (i, row) in inst.latency.latency_ms.iter().enumerate() {
        if row.len() != inst.classes.len() {
            report.push(
                format!("latency.latency_ms[{i}]"),
                format!(
                    "row has {} entries, expected one per class ({})",
                    row.len(),
                    inst.classes.len()
                ),
            );
        }
        for (k, &v) in row.iter().enumerate() {
            check_nonneg(&mut report, &format!("latency.latency_ms[{i}][{k}]"), v);
        }
    }

    // Demand with no latency-feasible site makes full service impossible.
    if inst.latency.latency_ms.len() == inst.sites.len()
        && inst
            .latency
            .latency_ms
            .iter()
            .all(|row| row.len() == inst.classes.len())
    {
        for (k, class) in inst.classes.iter().enumerate() {
            let any_feasible = (0..inst.sites.len()).any(|i| inst.latency.feasible(i, k));
            if any_feasible {
                continue;
            }
            for (tt, &d) in class.demand_units.iter().enumerate() {
                if d > 0.0 {
                    report.push(
                        format!("classes[{k}].demand_units[{tt}]"),
                        format!("unserviceable demand (class {k}, t={tt}): no latency-feasible site"),
                    );
                }
            }
        }
    }

    report
}

/// Serializes an instance to its JSON file format. Key order follows the
/// struct definitions, so identical instances produce identical text.
pub fn save_instance(inst: &Instance) -> String {
    let mut out = serde_json::to_string_pretty(inst).expect("instance serialization cannot fail");
    out.push('\n');
    out
}

/// Parses and validates an instance document.
pub fn load_instance(document: &str) -> Result<Instance, InstanceError> {
    let inst: Instance = serde_json::from_str(document).map_err(|e| InstanceError::Parse {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })?;
    let report = validate_instance(&inst);
    if !report.is_empty() {
        return Err(InstanceError::Invalid(report));
    }
    Ok(inst)
}

//! Generic sparse MILP representation, independent of any scheduling
//! semantics: variables with bounds and integrality, linear constraints,
//! an objective, and a point evaluator that defines feasibility once for
//! the whole crate (solver and validator reuse the same convention).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Objective direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Variable integrality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

/// One decision variable. Bounds may be infinite for continuous
/// variables; binary variables must have bounds within [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
}

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

/// A sparse linear constraint `sum(coef * var) sense rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    /// (variable index, coefficient) pairs; no duplicate indices.
    pub terms: Vec<(usize, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
    /// Constraint-family tag (e.g. the equation this row encodes).
    pub tag: Option<String>,
}

/// A sparse mixed-integer linear program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub sense: Sense,
    /// Sparse objective coefficients as (variable index, coefficient).
    pub objective: Vec<(usize, f64)>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    /// Free-form model notes, e.g. constraint families realized as
    /// variable bounds rather than rows.
    pub metadata: BTreeMap<String, String>,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        MilpModel {
            sense,
            objective: Vec::new(),
            variables: Vec::new(),
            constraints: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integrality,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, 0.0, 1.0, Integrality::Binary)
    }

    /// Adds a constraint. Duplicate variable indices within `terms` are
    /// merged by summing their coefficients.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: ConstraintSense,
        rhs: f64,
        tag: Option<&str>,
    ) -> usize {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (idx, coef) in terms {
            *merged.entry(idx).or_insert(0.0) += coef;
        }
        self.constraints.push(LinearConstraint {
            name: name.into(),
            terms: merged.into_iter().collect(),
            sense,
            rhs,
            tag: tag.map(str::to_string),
        });
        self.constraints.len() - 1
    }

    /// Sets the objective coefficient of a variable, accumulating over
    /// repeated calls for the same index.
    pub fn add_objective_term(&mut self, var: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        if let Some(entry) = self.objective.iter_mut().find(|(i, _)| *i == var) {
            entry.1 += coef;
        } else {
            self.objective.push((var, coef));
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(idx, coef) in &self.objective {
            c[idx] += coef;
        }
        c
    }

    /// Objective value at a point.
    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * point[i]).sum()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integrality == Integrality::Binary)
            .map(|(i, _)| i)
            .collect()
    }

    /// Structural equality ignoring tags and metadata: sense, objective,
    /// variables, and constraints (names included) must match exactly.
    /// This is the MPS round-trip contract.
    pub fn structural_eq(&self, other: &MilpModel) -> bool {
        self.sense == other.sense
            && self.objective_dense() == other.objective_dense()
            && self.variables == other.variables
            && self.constraints.len() == other.constraints.len()
            && self
                .constraints
                .iter()
                .zip(&other.constraints)
                .all(|(a, b)| {
                    a.name == b.name && a.terms == b.terms && a.sense == b.sense && a.rhs == b.rhs
                })
    }

    /// Checks internal consistency: indices in range, finite coefficients,
    /// unique names, lower <= upper, binaries within [0, 1].
    pub fn check(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        let mut names = std::collections::BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if !names.insert(v.name.clone()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
            if v.lower > v.upper {
                return Err(ModelError::BadBounds {
                    var: i,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.integrality == Integrality::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BadBounds {
                    var: i,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for c in &self.constraints {
            if !names.insert(c.name.clone()) {
                return Err(ModelError::DuplicateName(c.name.clone()));
            }
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
            let mut seen = std::collections::BTreeSet::new();
            for &(idx, coef) in &c.terms {
                if idx >= n {
                    return Err(ModelError::IndexOutOfRange {
                        constraint: c.name.clone(),
                        index: idx,
                    });
                }
                if !coef.is_finite() {
                    return Err(ModelError::NonFinite(c.name.clone()));
                }
                if !seen.insert(idx) {
                    return Err(ModelError::DuplicateTerm {
                        constraint: c.name.clone(),
                        index: idx,
                    });
                }
            }
        }
        for &(idx, coef) in &self.objective {
            if idx >= n {
                return Err(ModelError::IndexOutOfRange {
                    constraint: "objective".into(),
                    index: idx,
                });
            }
            if !coef.is_finite() {
                return Err(ModelError::NonFinite("objective".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("variable {var} has lower {lower} > upper {upper} (or binary outside [0,1])")]
    BadBounds { var: usize, lower: f64, upper: f64 },
    #[error("constraint {constraint:?} references out-of-range variable {index}")]
    IndexOutOfRange { constraint: String, index: usize },
    #[error("constraint {constraint:?} has a duplicate term for variable {index}")]
    DuplicateTerm { constraint: String, index: usize },
    #[error("non-finite coefficient or rhs in {0:?}")]
    NonFinite(String),
    #[error("point has {got} entries, model has {expected} variables")]
    DimensionMismatch { got: usize, expected: usize },
}

/// What a violation refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ViolationKind {
    Constraint { index: usize, name: String },
    LowerBound { var: usize, name: String },
    UpperBound { var: usize, name: String },
    Integrality { var: usize, name: String },
}

/// One feasibility breach found by [`evaluate`], with its residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointViolation {
    pub kind: ViolationKind,
    pub residual: f64,
    pub tag: Option<String>,
}

/// Evaluation of a point against a model: objective value plus every
/// constraint, bound, and integrality breach exceeding `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: Vec<PointViolation>,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Feasibility convention used crate-wide: a residual is a violation when
/// it exceeds `tol` absolutely for |reference| <= 1 and relatively
/// otherwise.
pub fn exceeds_tol(residual: f64, reference: f64, tol: f64) -> bool {
    residual > tol * reference.abs().max(1.0)
}

/// Computes the objective at `point` and lists every violated
/// constraint, bound, and integrality requirement.
pub fn evaluate(model: &MilpModel, point: &[f64], tol: f64) -> Result<Evaluation, ModelError> {
    if point.len() != model.variables.len() {
        return Err(ModelError::DimensionMismatch {
            got: point.len(),
            expected: model.variables.len(),
        });
    }
    let mut violations = Vec::new();

    for (i, v) in model.variables.iter().enumerate() {
        let x = point[i];
        if x < v.lower && exceeds_tol(v.lower - x, v.lower, tol) {
            violations.push(PointViolation {
                kind: ViolationKind::LowerBound {
                    var: i,
                    name: v.name.clone(),
                },
                residual: v.lower - x,
                tag: None,
            });
        }
        if x > v.upper && exceeds_tol(x - v.upper, v.upper, tol) {
            violations.push(PointViolation {
                kind: ViolationKind::UpperBound {
                    var: i,
                    name: v.name.clone(),
                },
                residual: x - v.upper,
                tag: None,
            });
        }
        if v.integrality == Integrality::Binary {
            let frac = (x - x.round()).abs();
            if frac > tol {
                violations.push(PointViolation {
                    kind: ViolationKind::Integrality {
                        var: i,
                        name: v.name.clone(),
                    },
                    residual: frac,
                    tag: None,
                });
            }
        }
    }

    for (ci, c) in model.constraints.iter().enumerate() {
        let lhs: f64 = c.terms.iter().map(|&(i, coef)| coef * point[i]).sum();
        let residual = match c.sense {
            ConstraintSense::Le => lhs - c.rhs,
            ConstraintSense::Ge => c.rhs - lhs,
            ConstraintSense::Eq => (lhs - c.rhs).abs(),
        };
        if residual > 0.0 && exceeds_tol(residual, c.rhs, tol) {
            violations.push(PointViolation {
                kind: ViolationKind::Constraint {
                    index: ci,
                    name: c.name.clone(),
                },
                residual,
                tag: c.tag.clone(),
            });
        }
    }

    Ok(Evaluation {
        objective: model.objective_value(point),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> MilpModel {
        // max x + 2y  s.t.  x + y <= 5,  x <= 5,  y <= 3
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_var("x", 0.0, 5.0, Integrality::Continuous);
        let y = m.add_var("y", 0.0, 3.0, Integrality::Continuous);
        m.add_objective_term(x, 1.0);
        m.add_objective_term(y, 2.0);
        m.add_constraint("cap", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Le, 5.0, Some("eq0"));
        m
    }

    #[test]
    fn zero_point_is_feasible_with_zero_objective() {
        let m = toy_model();
        let eval = evaluate(&m, &[0.0, 0.0], 1e-6).unwrap();
        assert_eq!(eval.objective, 0.0);
        assert!(eval.is_feasible());
    }

    #[test]
    fn bound_violation_reports_residual() {
        let mut m = toy_model();
        m.variables[0].upper = 5.0;
        let eval = evaluate(&m, &[6.0, 0.0], 1e-6).unwrap();
        // x=6 violates both x <= 5 (bound) and x + y <= 5 (row).
        assert_eq!(eval.violations.len(), 2);
        let bound = eval
            .violations
            .iter()
            .find(|v| matches!(v.kind, ViolationKind::UpperBound { .. }))
            .unwrap();
        assert!((bound.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrality_breach_is_flagged() {
        let mut m = MilpModel::new(Sense::Maximize);
        let b = m.add_binary("b");
        m.add_objective_term(b, 1.0);
        let eval = evaluate(&m, &[0.4], 1e-6).unwrap();
        assert_eq!(eval.violations.len(), 1);
        assert!(matches!(
            eval.violations[0].kind,
            ViolationKind::Integrality { .. }
        ));
    }

    #[test]
    fn relative_tolerance_kicks_in_for_large_rhs() {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_var("x", 0.0, f64::INFINITY, Integrality::Continuous);
        m.add_constraint("big", vec![(x, 1.0)], ConstraintSense::Le, 1e9, None);
        // Residual 1.0 against rhs 1e9 is within 1e-6 relative tolerance.
        let eval = evaluate(&m, &[1e9 + 1.0], 1e-6).unwrap();
        assert!(eval.violations.iter().all(|v| !matches!(v.kind, ViolationKind::Constraint { .. })));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = toy_model();
        assert!(matches!(
            evaluate(&m, &[0.0], 1e-6),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_terms_are_merged_by_add_constraint() {
        let mut m = MilpModel::new(Sense::Minimize);
        let x = m.add_var("x", 0.0, 1.0, Integrality::Continuous);
        m.add_constraint("r", vec![(x, 1.0), (x, 2.0)], ConstraintSense::Le, 1.0, None);
        assert_eq!(m.constraints[0].terms, vec![(x, 3.0)]);
        assert!(m.check().is_ok());
    }
}

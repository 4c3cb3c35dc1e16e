//! Free-format MPS reader and writer for [`MilpModel`].
//!
//! The writer emits OBJSENSE, ROWS, COLUMNS (with INTORG/INTEND markers
//! around integer runs), RHS, and BOUNDS sections. Values are printed with
//! Rust's shortest round-trip float formatting, so `import_mps(export_mps(m))`
//! reconstructs coefficients bit-exactly. Models with RANGES or other
//! unsupported sections are rejected with the offending line number.

use crate::milp::{ConstraintSense, Integrality, MilpModel, ModelError, Sense};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("model is not exportable: {0}")]
    Model(#[from] ModelError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: section {section:?} is not supported")]
    UnsupportedSection { line: usize, section: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> MpsError {
    MpsError::Parse {
        line,
        message: message.into(),
    }
}

/// Replaces characters outside `[A-Za-z0-9_().]` with `_` and truncates to
/// 255 characters. Empty names become `v`.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '(' | ')' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    out.truncate(255);
    if out.is_empty() {
        out.push('v');
    }
    out
}

/// Sanitizes a list of names and disambiguates collisions by appending
/// `_2`, `_3`, ... in order of appearance. `reserved` names are avoided.
fn sanitize_unique<'a>(
    names: impl Iterator<Item = &'a str>,
    reserved: &[&str],
) -> Vec<String> {
    let mut seen: std::collections::BTreeSet<String> =
        reserved.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for name in names {
        let base = sanitize_name(name);
        let mut candidate = base.clone();
        let mut k = 2;
        while !seen.insert(candidate.clone()) {
            candidate = format!("{base}_{k}");
            k += 1;
        }
        out.push(candidate);
    }
    out
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Serializes a model to free-format MPS.
pub fn export_mps(model: &MilpModel) -> Result<String, MpsError> {
    model.check()?;
    let var_names = sanitize_unique(
        model.variables.iter().map(|v| v.name.as_str()),
        &[],
    );
    let row_names = sanitize_unique(
        model.constraints.iter().map(|c| c.name.as_str()),
        &["obj"],
    );

    let mut s = String::new();
    s.push_str("NAME model\n");
    s.push_str("OBJSENSE\n");
    s.push_str(match model.sense {
        Sense::Maximize => "    MAX\n",
        Sense::Minimize => "    MIN\n",
    });

    s.push_str("ROWS\n");
    s.push_str(" N obj\n");
    for (c, name) in model.constraints.iter().zip(&row_names) {
        let kind = match c.sense {
            ConstraintSense::Le => 'L',
            ConstraintSense::Ge => 'G',
            ConstraintSense::Eq => 'E',
        };
        s.push_str(&format!(" {kind} {name}\n"));
    }

    // Column-major view of the coefficient matrix.
    let obj = model.objective_dense();
    let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.num_vars()];
    for (j, coef) in obj.iter().enumerate() {
        if *coef != 0.0 {
            columns[j].push(("obj".to_string(), *coef));
        }
    }
    for (c, name) in model.constraints.iter().zip(&row_names) {
        for &(j, coef) in &c.terms {
            columns[j].push((name.clone(), coef));
        }
    }
    // Every variable must appear in COLUMNS to be declared.
    for col in columns.iter_mut() {
        if col.is_empty() {
            col.push(("obj".to_string(), 0.0));
        }
    }

    s.push_str("COLUMNS\n");
    let mut in_int_block = false;
    let mut marker_id = 0usize;
    for (j, var) in model.variables.iter().enumerate() {
        let is_int = var.integrality == Integrality::Binary;
        if is_int != in_int_block {
            let kind = if is_int { "INTORG" } else { "INTEND" };
            s.push_str(&format!("    M{marker_id} 'MARKER' '{kind}'\n"));
            marker_id += 1;
            in_int_block = is_int;
        }
        for pair in columns[j].chunks(2) {
            let mut line = format!("    {}", var_names[j]);
            for (row, coef) in pair {
                line.push_str(&format!(" {row} {}", fmt_f(*coef)));
            }
            line.push('\n');
            s.push_str(&line);
        }
    }
    if in_int_block {
        s.push_str(&format!("    M{marker_id} 'MARKER' 'INTEND'\n"));
    }

    s.push_str("RHS\n");
    for (c, name) in model.constraints.iter().zip(&row_names) {
        if c.rhs != 0.0 {
            s.push_str(&format!("    RHS {name} {}\n", fmt_f(c.rhs)));
        }
    }

    s.push_str("BOUNDS\n");
    for (j, var) in model.variables.iter().enumerate() {
        let name = &var_names[j];
        if var.integrality == Integrality::Binary && var.lower == 0.0 && var.upper == 1.0 {
            s.push_str(&format!(" BV BND {name}\n"));
            continue;
        }
        if var.lower == var.upper {
            s.push_str(&format!(" FX BND {name} {}\n", fmt_f(var.lower)));
            continue;
        }
        if var.lower == f64::NEG_INFINITY && var.upper == f64::INFINITY {
            s.push_str(&format!(" FR BND {name}\n"));
            continue;
        }
        if var.lower == f64::NEG_INFINITY {
            s.push_str(&format!(" MI BND {name}\n"));
        } else if var.lower != 0.0 {
            s.push_str(&format!(" LO BND {name} {}\n", fmt_f(var.lower)));
        }
        if var.upper != f64::INFINITY {
            s.push_str(&format!(" UP BND {name} {}\n", fmt_f(var.upper)));
        }
    }

    s.push_str("ENDATA\n");
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Start,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

struct Importer {
    model: MilpModel,
    obj_row: Option<String>,
    row_index: std::collections::BTreeMap<String, usize>,
    var_index: std::collections::BTreeMap<String, usize>,
    /// Variables declared inside INTORG/INTEND blocks.
    int_vars: Vec<bool>,
}

impl Importer {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.var_index.get(name) {
            return j;
        }
        let j = self
            .model
            .add_var(name, 0.0, f64::INFINITY, Integrality::Continuous);
        self.var_index.insert(name.to_string(), j);
        self.int_vars.push(false);
        j
    }

    fn known_var(&self, name: &str, line: usize) -> Result<usize, MpsError> {
        self.var_index
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(line, format!("unknown column {name:?}")))
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64, MpsError> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("expected a number, found {tok:?}")))
}

/// Parses free-format MPS text into a model. Tags and metadata are not
/// representable in MPS and come back empty; compare round-trips with
/// [`MilpModel::structural_eq`].
pub fn import_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut imp = Importer {
        model: MilpModel::new(Sense::Minimize),
        obj_row: None,
        row_index: std::collections::BTreeMap::new(),
        var_index: std::collections::BTreeMap::new(),
        int_vars: Vec::new(),
    };
    let mut section = Section::Start;
    let mut in_int_block = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let is_header = !raw.starts_with(|c: char| c.is_whitespace());
        let tokens: Vec<&str> = raw.split_whitespace().collect();

        if is_header {
            let head = tokens[0].to_ascii_uppercase();
            section = match head.as_str() {
                "NAME" => Section::Start,
                "OBJSENSE" => {
                    if let Some(tok) = tokens.get(1) {
                        imp.model.sense = parse_objsense(tok, line)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => {
                    return Err(MpsError::UnsupportedSection {
                        line,
                        section: other.to_string(),
                    })
                }
            };
            continue;
        }

        match section {
            Section::Start | Section::Done => {
                return Err(parse_err(line, "data before any section header"));
            }
            Section::ObjSense => {
                imp.model.sense = parse_objsense(tokens[0], line)?;
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "expected <type> <row name>"));
                }
                let name = tokens[1].to_string();
                match tokens[0].to_ascii_uppercase().as_str() {
                    "N" => {
                        if imp.obj_row.is_some() {
                            return Err(parse_err(line, "multiple objective rows"));
                        }
                        imp.obj_row = Some(name);
                    }
                    kind @ ("L" | "G" | "E") => {
                        let sense = match kind {
                            "L" => ConstraintSense::Le,
                            "G" => ConstraintSense::Ge,
                            _ => ConstraintSense::Eq,
                        };
                        if imp.row_index.contains_key(&name) {
                            return Err(parse_err(line, format!("duplicate row {name:?}")));
                        }
                        let idx =
                            imp.model
                                .add_constraint(name.clone(), Vec::new(), sense, 0.0, None);
                        imp.row_index.insert(name, idx);
                    }
                    other => {
                        return Err(parse_err(line, format!("unknown row type {other:?}")));
                    }
                }
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => in_int_block = true,
                        "'INTEND'" => in_int_block = false,
                        other => {
                            return Err(parse_err(line, format!("unknown marker {other:?}")));
                        }
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(parse_err(line, "expected <column> (<row> <value>)+"));
                }
                let j = imp.var(tokens[0]);
                if in_int_block {
                    imp.int_vars[j] = true;
                }
                for pair in tokens[1..].chunks(2) {
                    let value = parse_value(pair[1], line)?;
                    if Some(pair[0]) == imp.obj_row.as_deref() {
                        imp.model.add_objective_term(j, value);
                    } else if let Some(&row) = imp.row_index.get(pair[0]) {
                        imp.model.constraints[row].terms.push((j, value));
                    } else {
                        return Err(parse_err(line, format!("unknown row {:?}", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(parse_err(line, "expected <set> (<row> <value>)+"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value = parse_value(pair[1], line)?;
                    if Some(pair[0]) == imp.obj_row.as_deref() {
                        return Err(parse_err(line, "objective constants are not supported"));
                    }
                    let &row = imp
                        .row_index
                        .get(pair[0])
                        .ok_or_else(|| parse_err(line, format!("unknown row {:?}", pair[0])))?;
                    imp.model.constraints[row].rhs = value;
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(parse_err(line, "expected <type> <set> <column> [<value>]"));
                }
                let kind = tokens[0].to_ascii_uppercase();
                let j = imp.known_var(tokens[2], line)?;
                let value = || -> Result<f64, MpsError> {
                    let tok = tokens
                        .get(3)
                        .ok_or_else(|| parse_err(line, format!("{kind} bound needs a value")))?;
                    parse_value(tok, line)
                };
                let var = &mut imp.model.variables[j];
                match kind.as_str() {
                    "UP" => var.upper = value()?,
                    "LO" => var.lower = value()?,
                    "FX" => {
                        let v = value()?;
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "BV" => {
                        var.lower = 0.0;
                        var.upper = 1.0;
                        imp.int_vars[j] = true;
                    }
                    other => {
                        return Err(parse_err(line, format!("unknown bound type {other:?}")));
                    }
                }
            }
        }
    }

    if section != Section::Done {
        return Err(parse_err(
            text.lines().count(),
            "missing ENDATA",
        ));
    }
    if imp.obj_row.is_none() {
        return Err(parse_err(0, "no objective (N) row declared"));
    }
    for (j, is_int) in imp.int_vars.iter().enumerate() {
        if !is_int {
            continue;
        }
        let var = &mut imp.model.variables[j];
        if var.lower < 0.0 || var.upper > 1.0 {
            return Err(parse_err(
                0,
                format!(
                    "integer column {:?} has bounds [{}, {}]; only binary bounds are supported",
                    var.name, var.lower, var.upper
                ),
            ));
        }
        var.integrality = Integrality::Binary;
    }
    imp.model.check().map_err(MpsError::Model)?;
    Ok(imp.model)
}

fn parse_objsense(tok: &str, line: usize) -> Result<Sense, MpsError> {
    match tok.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        other => Err(parse_err(line, format!("unknown objective sense {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{ConstraintSense, Integrality, MilpModel, Sense};

    fn mixed_model() -> MilpModel {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_var("a", 0.0, 7.25, Integrality::Continuous); // UP
        let b = m.add_var("b", 2.5, f64::INFINITY, Integrality::Continuous); // LO
        let c = m.add_var("c", 3.0, 3.0, Integrality::Continuous); // FX
        let d = m.add_var("d", f64::NEG_INFINITY, f64::INFINITY, Integrality::Continuous); // FR
        let e = m.add_var("e", f64::NEG_INFINITY, 5.0, Integrality::Continuous); // MI + UP
        let f = m.add_binary("f"); // BV
        let g = m.add_var("g", 1.0, 1.0, Integrality::Binary); // fixed binary
        let h = m.add_var("h", -4.0, -1.0, Integrality::Continuous); // LO + UP, negative
        m.add_objective_term(a, 0.1 + 0.2); // deliberately non-representable sum
        m.add_objective_term(f, -3.75);
        m.add_constraint(
            "r1",
            vec![(a, 1.0), (b, -2.0), (f, 1e-9)],
            ConstraintSense::Le,
            10.5,
            Some("eq1"),
        );
        m.add_constraint("r2", vec![(c, 1.0), (d, 1.0)], ConstraintSense::Eq, 0.0, None);
        m.add_constraint("r3", vec![(e, 3.0), (g, 2.0), (h, 1.0)], ConstraintSense::Ge, -2.25, None);
        m
    }

    #[test]
    fn round_trip_preserves_structure_bit_exactly() {
        let m = mixed_model();
        let text = export_mps(&m).unwrap();
        let back = import_mps(&text).unwrap();
        assert!(m.structural_eq(&back), "round-trip changed the model:\n{text}");
        // Second generation must be byte-identical.
        let text2 = export_mps(&back).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn variables_without_coefficients_survive_round_trip() {
        let mut m = MilpModel::new(Sense::Minimize);
        m.add_var("lonely", 0.0, 4.0, Integrality::Continuous);
        let back = import_mps(&export_mps(&m).unwrap()).unwrap();
        assert!(m.structural_eq(&back));
    }

    #[test]
    fn ranges_section_is_rejected_with_line_number() {
        let text = "NAME t\nROWS\n N obj\n L r1\nCOLUMNS\n    x r1 1\nRHS\nRANGES\n    RNG r1 2\nENDATA\n";
        match import_mps(text) {
            Err(MpsError::UnsupportedSection { line, section }) => {
                assert_eq!(section, "RANGES");
                assert_eq!(line, 8);
            }
            other => panic!("expected unsupported-section error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "NAME t\nROWS\n N obj\n L r1\nCOLUMNS\n    x r1 abc\nENDATA\n";
        match import_mps(text) {
            Err(MpsError::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn objsense_defaults_to_minimize() {
        let text = "NAME t\nROWS\n N obj\nCOLUMNS\n    x obj 1\nENDATA\n";
        let m = import_mps(text).unwrap();
        assert_eq!(m.sense, Sense::Minimize);
    }

    #[test]
    fn name_sanitization_replaces_and_disambiguates() {
        assert_eq!(sanitize_name("u(s0.j2.t5)"), "u(s0.j2.t5)");
        assert_eq!(sanitize_name("a b$c"), "a_b_c");
        let names = sanitize_unique(["a b", "a_b", ""].into_iter(), &[]);
        assert_eq!(names, vec!["a_b", "a_b_2", "v"]);
    }

    #[test]
    fn missing_endata_is_an_error() {
        let text = "NAME t\nROWS\n N obj\nCOLUMNS\n    x obj 1\n";
        assert!(matches!(import_mps(text), Err(MpsError::Parse { .. })));
    }
}

//! MPS export and import.
//!
//! Column layout follows fixed-format MPS, but names may exceed eight
//! characters, so external readers should be run in free-format mode.
//! Numbers are written in Rust's shortest round-trip form, which makes a
//! write/read cycle exact.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::milp::{Domain, MilpModel, Sense};

const OBJ_ROW: &str = "COST";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Renders `model` as MPS text.
pub fn write_mps(model: &MilpModel, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "NAME          {name}").unwrap();
    out.push_str("ROWS\n");
    writeln!(out, " N  {OBJ_ROW}").unwrap();
    for row in &model.rows {
        let s = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        writeln!(out, " {s}  {}", row.tag).unwrap();
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.n_vars()];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.coefs {
            by_col[j].push((i, a));
        }
    }
    let row_names: Vec<String> = model.rows.iter().map(|r| r.tag.to_string()).collect();

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, var) in model.vars.iter().enumerate() {
        let int = var.domain != Domain::Continuous;
        if int != in_int {
            let marker = if int { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    MARKER                 'MARKER'                 {marker}").unwrap();
            in_int = int;
        }
        let name = var.kind.to_string();
        let cost = model.objective[j];
        if cost != 0.0 || by_col[j].is_empty() {
            writeln!(out, "    {name:<8}  {OBJ_ROW:<8}  {cost}").unwrap();
        }
        for &(i, a) in &by_col[j] {
            writeln!(out, "    {name:<8}  {:<8}  {a}", row_names[i]).unwrap();
        }
    }
    if in_int {
        writeln!(out, "    MARKER                 'MARKER'                 'INTEND'").unwrap();
    }

    out.push_str("RHS\n");
    if model.objective_constant != 0.0 {
        writeln!(out, "    RHS       {OBJ_ROW:<8}  {}", -model.objective_constant).unwrap();
    }
    for (row, name) in model.rows.iter().zip(&row_names) {
        if row.rhs != 0.0 {
            writeln!(out, "    RHS       {name:<8}  {}", row.rhs).unwrap();
        }
    }

    out.push_str("BOUNDS\n");
    for var in &model.vars {
        let name = var.kind.to_string();
        match var.domain {
            Domain::Binary if var.lower == 0.0 && var.upper == 1.0 => {
                writeln!(out, " BV BND       {name}").unwrap();
                continue;
            }
            _ => {}
        }
        let (lo, hi) = (var.lower, var.upper);
        if lo == hi {
            writeln!(out, " FX BND       {name:<8}  {lo}").unwrap();
            continue;
        }
        if lo == f64::NEG_INFINITY {
            writeln!(out, " MI BND       {name}").unwrap();
        } else if lo != 0.0 {
            writeln!(out, " LO BND       {name:<8}  {lo}").unwrap();
        }
        if hi.is_finite() {
            writeln!(out, " UP BND       {name:<8}  {hi}").unwrap();
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn export_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), MpsError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("MODEL")
        .to_string();
    std::fs::write(path, write_mps(model, &name)).map_err(|source| MpsError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// (column index, coefficient) in column order.
    pub coefs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsCol {
    pub name: String,
    pub integer: bool,
    pub binary: bool,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MpsModel {
    pub name: String,
    pub rows: Vec<MpsRow>,
    pub cols: Vec<MpsCol>,
    pub objective_constant: f64,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MpsError> {
    tok.parse().map_err(|_| MpsError::Parse {
        line,
        reason: format!("bad number {tok:?}"),
    })
}

/// Parses MPS text with whitespace-separated fields.
pub fn read_mps(text: &str) -> Result<MpsModel, MpsError> {
    use std::collections::HashMap;
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
    }
    let mut model = MpsModel::default();
    let mut section = Section::None;
    let mut obj_name = String::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match toks[0] {
                "NAME" => {
                    model.name = toks.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => {
                    return Err(MpsError::Parse { line, reason: format!("unknown section {other}") })
                }
            };
            continue;
        }
        let bad = |reason: &str| MpsError::Parse { line, reason: reason.to_string() };
        match section {
            Section::Rows => {
                let [sense, name] = toks[..] else { return Err(bad("expected sense and name")) };
                let sense = match sense {
                    "N" => {
                        if obj_name.is_empty() {
                            obj_name = name.to_string();
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(bad("unknown row sense")),
                };
                row_index.insert(name.to_string(), model.rows.len());
                model.rows.push(MpsRow { name: name.to_string(), sense, rhs: 0.0, coefs: Vec::new() });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    in_int = toks[2] == "'INTORG'";
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("expected column, row, value"));
                }
                let col = *col_index.entry(toks[0].to_string()).or_insert_with(|| {
                    model.cols.push(MpsCol {
                        name: toks[0].to_string(),
                        integer: in_int,
                        binary: false,
                        lower: 0.0,
                        upper: if in_int { 1.0 } else { f64::INFINITY },
                        cost: 0.0,
                    });
                    model.cols.len() - 1
                });
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], line)?;
                    if pair[0] == obj_name {
                        model.cols[col].cost = v;
                    } else {
                        let &r = row_index.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                        model.rows[r].coefs.push((col, v));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("expected set, row, value"));
                }
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], line)?;
                    if pair[0] == obj_name {
                        model.objective_constant = -v;
                    } else {
                        let &r = row_index.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                        model.rows[r].rhs = v;
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(bad("expected type, set, column"));
                }
                let &c = col_index.get(toks[2]).ok_or_else(|| bad("unknown column"))?;
                let value = || {
                    toks.get(3)
                        .ok_or_else(|| bad("missing bound value"))
                        .and_then(|t| parse_num(t, line))
                };
                let col = &mut model.cols[c];
                match toks[0] {
                    "UP" => col.upper = value()?,
                    "LO" => col.lower = value()?,
                    "FX" => {
                        col.lower = value()?;
                        col.upper = col.lower;
                    }
                    "MI" => col.lower = f64::NEG_INFINITY,
                    "PL" => col.upper = f64::INFINITY,
                    "FR" => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    "BV" => {
                        col.binary = true;
                        col.integer = true;
                        col.lower = 0.0;
                        col.upper = 1.0;
                    }
                    "LI" => col.lower = value()?,
                    "UI" => col.upper = value()?,
                    other => return Err(bad(&format!("unknown bound type {other}"))),
                }
            }
            Section::None => return Err(bad("data outside a section")),
        }
    }
    // integer columns default to [0, 1] only until given explicit bounds;
    // general integers always carry an UP bound in our files
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuelcurve::build_curves;
    use crate::loadgen::LoadProfile;
    use crate::milp::build_model;
    use crate::scenario::reference_scenario;

    fn tiny_model() -> MilpModel {
        let mut cfg = reference_scenario().without_bess();
        cfg.dgs.truncate(2);
        cfg.horizon = 2;
        let curves = build_curves(&cfg.dgs, 2).unwrap();
        build_model(&cfg, &curves, &LoadProfile::from_loads(&[3.0, 4.0], &[false, true])).unwrap()
    }

    #[test]
    fn sections_in_order() {
        let text = write_mps(&tiny_model(), "TINY");
        let heads: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with(' '))
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(heads, vec!["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]);
        assert!(text.contains("'INTORG'") && text.contains("'INTEND'"));
        assert_eq!(text.matches(" E  E18_").count(), 1);
    }

    #[test]
    fn round_trip_is_exact() {
        let model = tiny_model();
        let back = read_mps(&write_mps(&model, "TINY")).unwrap();
        assert_eq!(back.name, "TINY");
        assert_eq!(back.cols.len(), model.n_vars());
        assert_eq!(back.rows.len(), model.n_rows());
        for (c, v) in back.cols.iter().zip(&model.vars) {
            assert_eq!(c.name, v.kind.to_string());
            assert_eq!(c.integer, v.domain != Domain::Continuous);
            assert_eq!(c.binary, v.domain == Domain::Binary);
            assert_eq!((c.lower, c.upper), (v.lower, v.upper));
        }
        for (k, c) in back.cols.iter().enumerate() {
            assert_eq!(c.cost.to_bits(), model.objective[k].to_bits());
        }
        for (r, row) in back.rows.iter().zip(&model.rows) {
            assert_eq!(r.name, row.tag.to_string());
            assert_eq!(r.sense, row.sense);
            assert_eq!(r.rhs.to_bits(), row.rhs.to_bits());
            let mut want = row.coefs.clone();
            want.sort_by_key(|e| e.0);
            assert_eq!(r.coefs, want);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_mps("ROWS\n X  R1\n").is_err());
        assert!(read_mps("BOGUS\n").is_err());
        assert!(read_mps("ROWS\n L  R1\nCOLUMNS\n    X  R2  1\n").is_err());
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let err = export_mps(&tiny_model(), "/nonexistent-dir/model.mps").unwrap_err();
        assert!(matches!(err, MpsError::Io { .. }));
    }
}

//! Fixed-format MPS export.
//!
//! Column and row names are generated (`C0000001`, `R0000001`, ...) so they
//! always fit the eight-character name fields; [`column_name`] maps a variable
//! index to its name for reading solutions back. Maximization problems carry
//! an `OBJSENSE MAX` section. Binary variables use `BV` bounds.

use std::io::Write;

use crate::problem::{MilpProblem, Relation, Sense};
use crate::OptimError;

const OBJ_ROW: &str = "OBJ";

pub fn column_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

/// Formats a number in at most 12 characters, keeping as many digits as fit.
fn number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let fixed = (0..=11).map(|p| format!("{v:.p$}"));
    let sci = (0..=8).map(|d| format!("{v:.d$e}"));
    fixed
        .chain(sci)
        .filter(|s| s.len() <= 12)
        .min_by(|a, b| {
            let ea = (a.parse::<f64>().unwrap_or(f64::INFINITY) - v).abs();
            let eb = (b.parse::<f64>().unwrap_or(f64::INFINITY) - v).abs();
            ea.total_cmp(&eb)
        })
        .unwrap_or_else(|| format!("{v:.0e}"))
}

fn entry(kind: &str, name: &str, first: (&str, f64), second: Option<(&str, f64)>) -> String {
    let mut line = format!(" {:<2} {:<8}  {:<8}  {:>12}", kind, name, first.0, number(first.1));
    if let Some((n2, v2)) = second {
        line.push_str(&format!("   {:<8}  {:>12}", n2, number(v2)));
    }
    line.trim_end().to_string()
}

/// Writes `p` as fixed-format MPS to `sink`.
pub fn emit_mps<W: Write>(p: &MilpProblem, name: &str, sink: &mut W) -> Result<(), OptimError> {
    p.validate()?;
    let lp = &p.base;
    let name: String = name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
    writeln!(sink, "NAME          {name}")?;
    if lp.sense == Sense::Maximize {
        writeln!(sink, "OBJSENSE")?;
        writeln!(sink, "    MAX")?;
    }

    writeln!(sink, "ROWS")?;
    writeln!(sink, " N  {OBJ_ROW}")?;
    for (i, row) in lp.constraints.iter().enumerate() {
        let kind = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        writeln!(sink, " {kind}  {}", row_name(i))?;
    }

    // Column-major view of the rows.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_variables()];
    for (i, row) in lp.constraints.iter().enumerate() {
        for &(j, c) in &row.terms {
            columns[j].push((i, c));
        }
    }
    writeln!(sink, "COLUMNS")?;
    for (j, col) in columns.iter().enumerate() {
        let cname = column_name(j);
        let mut cells: Vec<(String, f64)> = Vec::with_capacity(col.len() + 1);
        if lp.objective[j] != 0.0 {
            cells.push((OBJ_ROW.to_string(), lp.objective[j]));
        }
        cells.extend(col.iter().map(|&(i, c)| (row_name(i), c)));
        if cells.is_empty() {
            // Keep the column declared even without nonzeros.
            cells.push((OBJ_ROW.to_string(), 0.0));
        }
        for pair in cells.chunks(2) {
            let first = (pair[0].0.as_str(), pair[0].1);
            let second = pair.get(1).map(|c| (c.0.as_str(), c.1));
            writeln!(sink, "{}", entry("", &cname, first, second))?;
        }
    }

    writeln!(sink, "RHS")?;
    let rhs: Vec<(String, f64)> = lp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rhs != 0.0)
        .map(|(i, r)| (row_name(i), r.rhs))
        .collect();
    for pair in rhs.chunks(2) {
        let first = (pair[0].0.as_str(), pair[0].1);
        let second = pair.get(1).map(|c| (c.0.as_str(), c.1));
        writeln!(sink, "{}", entry("", "RHS", first, second))?;
    }

    writeln!(sink, "BOUNDS")?;
    let is_int: Vec<bool> = {
        let mut v = vec![false; lp.num_variables()];
        for &j in &p.integer_vars {
            v[j] = true;
        }
        v
    };
    for j in 0..lp.num_variables() {
        let cname = column_name(j);
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if is_int[j] && lo == 0.0 && hi == 1.0 {
            writeln!(sink, " BV BND       {cname}")?;
            continue;
        }
        if lo == hi {
            writeln!(sink, "{}", entry("FX", "BND", (&cname, lo), None))?;
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(sink, " FR BND       {cname}")?,
            (false, true) => {
                writeln!(sink, " MI BND       {cname}")?;
                writeln!(sink, "{}", entry("UP", "BND", (&cname, hi), None))?;
            }
            (true, fin_hi) => {
                if lo != 0.0 {
                    writeln!(sink, "{}", entry("LO", "BND", (&cname, lo), None))?;
                }
                if fin_hi {
                    writeln!(sink, "{}", entry("UP", "BND", (&cname, hi), None))?;
                }
            }
        }
    }
    writeln!(sink, "ENDATA")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LinearProgram;

    fn render(p: &MilpProblem) -> String {
        let mut buf = Vec::new();
        emit_mps(p, "test", &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_problem_is_a_skeleton() {
        let text = render(&MilpProblem::new(LinearProgram::new(Sense::Minimize)));
        assert!(text.starts_with("NAME          test\n"));
        assert!(text.trim_end().ends_with("ENDATA"));
        for section in ["ROWS", "COLUMNS", "RHS", "BOUNDS"] {
            assert!(text.contains(section));
        }
    }

    #[test]
    fn single_variable_has_one_column_line() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_variable("x", 0.0, 4.0, 1.0);
        lp.add_constraint(vec![(x, 2.0)], Relation::Le, 3.0);
        let text = render(&MilpProblem::new(lp));
        let columns: Vec<&str> = text
            .lines()
            .skip_while(|l| *l != "COLUMNS")
            .skip(1)
            .take_while(|l| *l != "RHS")
            .collect();
        assert_eq!(columns.len(), 1);
        assert_eq!(&columns[0][4..12], "C0000001");
        assert!(text.contains("OBJSENSE\n    MAX"));
        assert!(text.contains(" UP BND       C0000001"));
    }

    #[test]
    fn long_numbers_fit_the_field() {
        for v in [1.0 / 3.0, -123456.7890123, 1e-17, -2.5e300] {
            let s = number(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs().max(1e-300));
        }
    }
}

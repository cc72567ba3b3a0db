//! Hook for handing a problem to an external MILP solver.
//!
//! The problem is written as MPS, the solver command is invoked as
//! `<program> <args...> <problem.mps> <solution.txt>`, and the solution file
//! is read back: one `name value` pair per line, `#` starting a comment.
//! Names are the generated MPS column names.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read};
use std::path::PathBuf;
use std::process::Command;

use crate::mps::{column_name, emit_mps};
use crate::problem::{MilpProblem, SolveResult, SolveStatus};
use crate::OptimError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: PathBuf,
    pub args: Vec<String>,
}

/// Parses `name value` lines into a map.
pub fn parse_solution<R: Read>(reader: R) -> Result<BTreeMap<String, f64>, OptimError> {
    let mut out = BTreeMap::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(OptimError::SolutionParse {
                line: idx + 1,
                message: format!("expected `name value`, got `{content}`"),
            });
        };
        let value: f64 = value.parse().map_err(|_| OptimError::SolutionParse {
            line: idx + 1,
            message: format!("`{value}` is not a number"),
        })?;
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

impl ExternalSolver {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self { program: program.into(), args: Vec::new() }
    }

    /// Solves `p` through the external program. Variables missing from the
    /// solution file are read as zero.
    pub fn solve(&self, p: &MilpProblem) -> Result<SolveResult, OptimError> {
        let dir = tempfile::tempdir()?;
        let mps_path = dir.path().join("problem.mps");
        let sol_path = dir.path().join("solution.txt");
        {
            let mut w = BufWriter::new(File::create(&mps_path)?);
            emit_mps(p, "BLOTTO", &mut w)?;
        }
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&mps_path)
            .arg(&sol_path)
            .status()?;
        if !status.success() {
            return Err(OptimError::External(format!(
                "{} exited with {status}",
                self.program.display()
            )));
        }
        let solution = parse_solution(File::open(&sol_path)?)?;
        let values: Vec<f64> = (0..p.base.num_variables())
            .map(|j| solution.get(&column_name(j)).copied().unwrap_or(0.0))
            .collect();
        let violation = p.base.max_violation(&values);
        if violation > 1e-6 {
            return Err(OptimError::External(format!(
                "returned assignment violates the model by {violation:e}"
            )));
        }
        let objective = p.base.objective_value(&values);
        Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective,
            values,
            bound: objective,
            gap: 0.0,
            work: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let text = "# header\nC0000001 1.5\n\nC0000002   -2e-3  # trailing\n";
        let map = parse_solution(text.as_bytes()).unwrap();
        assert_eq!(map["C0000001"], 1.5);
        assert_eq!(map["C0000002"], -2e-3);
    }

    #[test]
    fn rejects_malformed_lines() {
        let err = parse_solution("C1 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, OptimError::SolutionParse { line: 1, .. }));
        let err = parse_solution("C1 abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, OptimError::SolutionParse { line: 1, .. }));
    }
}

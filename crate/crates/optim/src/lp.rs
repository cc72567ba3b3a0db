use crate::problem::{LinearProgram, Sense, SolveResult, SolveStatus};
use crate::tableau::{Outcome, Tableau};
use crate::OptimError;

pub(crate) fn pivot_budget(lp: &LinearProgram) -> usize {
    50 * (lp.num_constraints() + lp.num_variables()) + 1000
}

pub(crate) fn sense_sign(sense: Sense) -> f64 {
    match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    }
}

/// Solves `lp` with the two-phase bounded simplex.
///
/// `tol` is the primal feasibility tolerance. Pricing uses the largest reduced
/// cost and switches to Bland's rule after a run of degenerate pivots, so the
/// result is deterministic for a given input.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<SolveResult, OptimError> {
    lp.validate()?;
    let mut tableau = Tableau::new(lp, tol);
    let outcome = tableau.solve_cold(pivot_budget(lp));
    Ok(result_from(lp, &mut tableau, outcome))
}

pub(crate) fn result_from(lp: &LinearProgram, tableau: &mut Tableau, outcome: Outcome) -> SolveResult {
    let status = match outcome {
        Outcome::Optimal => SolveStatus::Optimal,
        Outcome::Infeasible => SolveStatus::Infeasible,
        Outcome::Unbounded => SolveStatus::Unbounded,
        Outcome::IterationLimit => SolveStatus::IterationLimit,
    };
    if status != SolveStatus::Optimal {
        return SolveResult::without_solution(status, tableau.pivots);
    }
    tableau.refresh();
    let values = tableau.structural_values();
    let objective = lp.objective_value(&values);
    SolveResult { status, objective, values, bound: objective, gap: 0.0, work: tableau.pivots }
}

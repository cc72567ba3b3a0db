//! Activity-based bound propagation for branch-and-bound nodes.
//!
//! Each row `lo ≤ Σ a_j x_j ≤ hi` bounds every variable by what the other
//! terms can contribute at most and at least. Binary bounds are rounded, which
//! is where propagation beats the LP relaxation.

use crate::problem::{LinearProgram, Relation};

/// Ignore bound changes smaller than this (relative to the bound's scale).
const MIN_CHANGE: f64 = 1e-7;
/// Continuous bounds are loosened by this much so the LP never sees a box
/// that round-off made slightly too small.
const SAFETY: f64 = 1e-9;
const MAX_PASSES: usize = 8;

pub(crate) struct Propagator {
    rows: Vec<Row>,
    /// Costs of the objective row `Σ c_j x_j ≤ threshold` (minimization form).
    objective: Vec<(usize, f64)>,
    integer: Vec<bool>,
    int_tol: f64,
}

struct Row {
    terms: Vec<(usize, f64)>,
    lo: f64,
    hi: f64,
}

/// Minimum and maximum of `Σ a_j x_j` over a box, with the number of
/// infinite contributions kept apart.
#[derive(Default)]
struct Activity {
    min: f64,
    min_inf: usize,
    max: f64,
    max_inf: usize,
}

fn activity(terms: &[(usize, f64)], lo: &[f64], hi: &[f64]) -> Activity {
    let mut a = Activity::default();
    for &(j, c) in terms {
        let (at_min, at_max) = if c > 0.0 { (lo[j], hi[j]) } else { (hi[j], lo[j]) };
        if at_min.is_finite() {
            a.min += c * at_min;
        } else {
            a.min_inf += 1;
        }
        if at_max.is_finite() {
            a.max += c * at_max;
        } else {
            a.max_inf += 1;
        }
    }
    a
}

impl Propagator {
    pub(crate) fn new(lp: &LinearProgram, costs: &[f64], integer_vars: &[usize], int_tol: f64) -> Self {
        let rows = lp
            .constraints
            .iter()
            .map(|r| {
                let (lo, hi) = match r.relation {
                    Relation::Le => (f64::NEG_INFINITY, r.rhs),
                    Relation::Ge => (r.rhs, f64::INFINITY),
                    Relation::Eq => (r.rhs, r.rhs),
                };
                Row { terms: r.terms.clone(), lo, hi }
            })
            .collect();
        let mut integer = vec![false; lp.num_variables()];
        for &j in integer_vars {
            integer[j] = true;
        }
        let objective = costs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        Self { rows, objective, integer, int_tol }
    }

    /// Tightens `lo`/`hi` in place. Returns `false` when the box is empty,
    /// either by the rows or by `objective ≤ threshold`.
    pub(crate) fn run(&self, lo: &mut [f64], hi: &mut [f64], threshold: f64) -> bool {
        for _ in 0..MAX_PASSES {
            let mut changed = false;
            for row in &self.rows {
                match self.tighten(&row.terms, row.lo, row.hi, lo, hi) {
                    None => return false,
                    Some(c) => changed |= c,
                }
            }
            if threshold.is_finite() {
                match self.tighten(&self.objective, f64::NEG_INFINITY, threshold, lo, hi) {
                    None => return false,
                    Some(c) => changed |= c,
                }
            }
            if !changed {
                break;
            }
        }
        true
    }

    /// One row; `None` if it cannot be satisfied, else whether a bound moved.
    fn tighten(
        &self,
        terms: &[(usize, f64)],
        row_lo: f64,
        row_hi: f64,
        lo: &mut [f64],
        hi: &mut [f64],
    ) -> Option<bool> {
        let act = activity(terms, lo, hi);
        let scale = 1.0 + row_lo.abs().min(row_hi.abs());
        if act.min_inf == 0 && act.min > row_hi + 1e-7 * scale {
            return None;
        }
        if act.max_inf == 0 && act.max < row_lo - 1e-7 * scale {
            return None;
        }
        let mut changed = false;
        for &(j, c) in terms {
            // Least and greatest contribution of the other terms.
            let (own_min, own_max) = if c > 0.0 { (c * lo[j], c * hi[j]) } else { (c * hi[j], c * lo[j]) };
            let rest_min = match (act.min_inf, own_min.is_finite()) {
                (0, _) => Some(act.min - own_min),
                (1, false) => Some(act.min),
                _ => None,
            };
            let rest_max = match (act.max_inf, own_max.is_finite()) {
                (0, _) => Some(act.max - own_max),
                (1, false) => Some(act.max),
                _ => None,
            };
            // c·x_j ≤ row_hi − rest_min and c·x_j ≥ row_lo − rest_max.
            let mut new_lo = f64::NEG_INFINITY;
            let mut new_hi = f64::INFINITY;
            if let (true, Some(r)) = (row_hi.is_finite(), rest_min) {
                let v = (row_hi - r) / c;
                if c > 0.0 {
                    new_hi = v;
                } else {
                    new_lo = v;
                }
            }
            if let (true, Some(r)) = (row_lo.is_finite(), rest_max) {
                let v = (row_lo - r) / c;
                if c > 0.0 {
                    new_lo = new_lo.max(v);
                } else {
                    new_hi = new_hi.min(v);
                }
            }
            if self.integer[j] {
                new_lo = (new_lo - self.int_tol).ceil();
                new_hi = (new_hi + self.int_tol).floor();
            } else {
                new_lo -= SAFETY * (1.0 + new_lo.abs());
                new_hi += SAFETY * (1.0 + new_hi.abs());
            }
            if new_lo > lo[j] + MIN_CHANGE * (1.0 + lo[j].abs().min(1e9)) {
                lo[j] = new_lo;
                changed = true;
            }
            if new_hi < hi[j] - MIN_CHANGE * (1.0 + hi[j].abs().min(1e9)) {
                hi[j] = new_hi;
                changed = true;
            }
            if lo[j] > hi[j] {
                if lo[j] - hi[j] > 1e-6 * (1.0 + lo[j].abs()) {
                    return None;
                }
                // Round-off: collapse onto one point.
                let mid = if self.integer[j] { lo[j].round() } else { 0.5 * (lo[j] + hi[j]) };
                lo[j] = mid;
                hi[j] = mid;
            }
        }
        Some(changed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Sense;

    #[test]
    fn knapsack_row_fixes_binary() {
        // 3a + 2b + c ≤ 3 with a = 1 forces b = c = 0.
        let mut lp = LinearProgram::new(Sense::Maximize);
        let a = lp.add_variable("a", 0.0, 1.0, 1.0);
        let b = lp.add_variable("b", 0.0, 1.0, 1.0);
        let c = lp.add_variable("c", 0.0, 1.0, 1.0);
        lp.add_constraint(vec![(a, 3.0), (b, 2.0), (c, 1.0)], Relation::Le, 3.0);
        let p = Propagator::new(&lp, &[0.0; 3], &[a, b, c], 1e-6);
        let (mut lo, mut hi) = (vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]);
        assert!(p.run(&mut lo, &mut hi, f64::INFINITY));
        assert_eq!(hi, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn continuous_chain_and_infeasibility() {
        // x − y = 0, y ≤ 2, x ≥ 3 is empty.
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_variable("x", 0.0, f64::INFINITY, 0.0);
        let y = lp.add_variable("y", f64::NEG_INFINITY, 2.0, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Eq, 0.0);
        let p = Propagator::new(&lp, &[0.0; 2], &[], 1e-6);
        let (mut lo, mut hi) = (vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 2.0]);
        assert!(p.run(&mut lo, &mut hi, f64::INFINITY));
        assert!((hi[0] - 2.0).abs() < 1e-6 && lo[1].abs() < 1e-6);
        lo[0] = 3.0;
        assert!(!p.run(&mut lo, &mut hi, f64::INFINITY));
    }

    #[test]
    fn objective_threshold_prunes() {
        // min −a − b with threshold −1.5 requires both binaries at one.
        let lp = {
            let mut lp = LinearProgram::new(Sense::Minimize);
            lp.add_variable("a", 0.0, 1.0, -1.0);
            lp.add_variable("b", 0.0, 1.0, -1.0);
            lp
        };
        let p = Propagator::new(&lp, &[-1.0, -1.0], &[0, 1], 1e-6);
        let (mut lo, mut hi) = (vec![0.0; 2], vec![1.0; 2]);
        assert!(p.run(&mut lo, &mut hi, -1.5));
        assert_eq!(lo, vec![1.0, 1.0]);
        let (mut lo, mut hi) = (vec![0.0; 2], vec![1.0, 0.0]);
        assert!(!p.run(&mut lo, &mut hi, -1.5));
    }
}

//! Finite zero-sum subgames: payoff tables over explicit strategy lists and
//! their equilibria by linear programming.

use serde::{Deserialize, Serialize};

use blotto_optim::{solve_lp, LinearProgram, Relation, Sense, SolveStatus};

use crate::error::{BlottoError, Result};
use crate::payoff::{Strategy, UtilityModel};

/// Player 1's payoffs: `U[i][j] = u(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    entries: Vec<Vec<f64>>,
}

impl UtilityMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(BlottoError::Dimension(
                "utility matrix must be nonempty".into(),
            ));
        }
        let cols = entries[0].len();
        if entries.iter().any(|r| r.len() != cols) {
            return Err(BlottoError::Dimension(
                "utility matrix rows differ in length".into(),
            ));
        }
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BlottoError::Dimension(
                "utility matrix has a non-finite entry".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Appends the row of a new Player 1 strategy.
    pub fn push_row(&mut self, x: &Strategy, ys: &[Strategy], model: &UtilityModel) -> Result<()> {
        if ys.len() != self.cols() {
            return Err(BlottoError::Dimension(format!(
                "{} column strategies for {} columns",
                ys.len(),
                self.cols()
            )));
        }
        let row = ys
            .iter()
            .map(|y| model.utility(x, y))
            .collect::<Result<Vec<_>>>()?;
        self.entries.push(row);
        Ok(())
    }

    /// Appends the column of a new Player 2 strategy.
    pub fn push_col(&mut self, xs: &[Strategy], y: &Strategy, model: &UtilityModel) -> Result<()> {
        if xs.len() != self.rows() {
            return Err(BlottoError::Dimension(format!(
                "{} row strategies for {} rows",
                xs.len(),
                self.rows()
            )));
        }
        for (row, x) in self.entries.iter_mut().zip(xs) {
            row.push(model.utility(x, y)?);
        }
        Ok(())
    }

    /// The matrix of the game with the players' roles exchanged: `−Uᵀ`.
    pub fn swapped(&self) -> UtilityMatrix {
        let entries = (0..self.cols())
            .map(|j| (0..self.rows()).map(|i| -self.entries[i][j]).collect())
            .collect();
        UtilityMatrix { entries }
    }
}

pub fn build_utility_matrix(
    xs: &[Strategy],
    ys: &[Strategy],
    model: &UtilityModel,
) -> Result<UtilityMatrix> {
    if xs.is_empty() || ys.is_empty() {
        return Err(BlottoError::Dimension(
            "strategy lists must be nonempty".into(),
        ));
    }
    let entries = xs
        .iter()
        .map(|x| {
            ys.iter()
                .map(|y| model.utility(x, y))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    UtilityMatrix::new(entries)
}

/// Strategies with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub strategies: Vec<Strategy>,
    pub probabilities: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(strategies: Vec<Strategy>, probabilities: Vec<f64>) -> Result<Self> {
        if strategies.is_empty() || strategies.len() != probabilities.len() {
            return Err(BlottoError::Dimension(format!(
                "{} strategies with {} probabilities",
                strategies.len(),
                probabilities.len()
            )));
        }
        if let Some(i) = probabilities.iter().position(|p| !(*p >= 0.0)) {
            return Err(BlottoError::validation(
                format!("probabilities[{i}]"),
                format!("{} is negative", probabilities[i]),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(BlottoError::validation(
                "probabilities",
                format!("sum to {sum}, expected 1"),
            ));
        }
        Ok(Self {
            strategies,
            probabilities,
        })
    }

    pub fn pure(s: Strategy) -> Self {
        Self {
            strategies: vec![s],
            probabilities: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Iterates over `(probability, strategy)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &Strategy)> {
        self.probabilities.iter().copied().zip(&self.strategies)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgameEquilibrium {
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    pub value: f64,
}

/// The column player's optimal mix for a minimizing column player.
///
/// With `B = a − min(a) + 1 > 0`, `max Σ w  s.t.  B w ≤ 1, w ≥ 0` has the
/// all-slack basis as a feasible start, and `w / Σ w` is an optimal mix.
fn column_mix(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    let lowest = a.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v));
    let shift = 1.0 - lowest;
    let cols = a[0].len();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let w: Vec<usize> = (0..cols)
        .map(|j| lp.add_variable(format!("w{j}"), 0.0, f64::INFINITY, 1.0))
        .collect();
    for row in a {
        let terms = row.iter().zip(&w).map(|(v, &j)| (j, v + shift)).collect();
        lp.add_constraint(terms, Relation::Le, 1.0);
    }
    let r = solve_lp(&lp, 1e-10)?;
    if r.status != SolveStatus::Optimal {
        return Err(BlottoError::SolverStatus {
            context: "subgame LP".into(),
            status: format!("{:?}", r.status),
        });
    }
    let mut probs: Vec<f64> = w.iter().map(|&j| r.values[j].max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    for x in &mut probs {
        *x /= total;
    }
    Ok(probs)
}

/// Solves the minimax LP for each player.
///
/// The reported value is `p_xᵀ U p_y`, which equals both LP optima up to
/// solver tolerance.
pub fn solve_subgame(u: &UtilityMatrix) -> Result<SubgameEquilibrium> {
    let p_y = column_mix(&u.entries)?;
    // Player 1 is the minimizing column player of −Uᵀ.
    let p_x = column_mix(&u.swapped().entries)?;
    let value = expected_utility(u, &p_x, &p_y)?;
    Ok(SubgameEquilibrium { p_x, p_y, value })
}

/// `p_xᵀ U p_y`.
pub fn expected_utility(u: &UtilityMatrix, p_x: &[f64], p_y: &[f64]) -> Result<f64> {
    if p_x.len() != u.rows() || p_y.len() != u.cols() {
        return Err(BlottoError::Dimension(format!(
            "{}x{} matrix with mixes of length {} and {}",
            u.rows(),
            u.cols(),
            p_x.len(),
            p_y.len()
        )));
    }
    Ok(u.entries
        .iter()
        .zip(p_x)
        .map(|(row, px)| px * row.iter().zip(p_y).map(|(a, py)| a * py).sum::<f64>())
        .sum())
}

/// Player 1's expected utility from mixing over `xs` against `ys`.
pub fn mixed_utility(x: &MixedStrategy, y: &MixedStrategy, model: &UtilityModel) -> Result<f64> {
    let mut total = 0.0;
    for (px, sx) in x.iter() {
        for (py, sy) in y.iter() {
            if px > 0.0 && py > 0.0 {
                total += px * py * model.utility(sx, sy)?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rps() -> UtilityMatrix {
        UtilityMatrix::new(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn rock_paper_scissors() {
        let eq = solve_subgame(&rps()).unwrap();
        assert!(eq.value.abs() < 1e-9);
        for p in eq.p_x.iter().chain(&eq.p_y) {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        let uniform = vec![1.0 / 3.0; 3];
        assert!(expected_utility(&rps(), &uniform, &uniform).unwrap().abs() < 1e-12);
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            assert!(expected_utility(&rps(), &eq.p_x, &e).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn one_by_one() {
        let eq = solve_subgame(&UtilityMatrix::new(vec![vec![0.7]]).unwrap()).unwrap();
        assert_eq!((eq.p_x.clone(), eq.p_y.clone()), (vec![1.0], vec![1.0]));
        assert!((eq.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unit_vectors_pick_entries() {
        let u = rps();
        assert_eq!(
            expected_utility(&u, &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(),
            -1.0
        );
        assert!(expected_utility(&u, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn identical_singletons_give_zero() {
        let s = Strategy::new(vec![vec![0.5, 0.5]]).unwrap();
        let model = UtilityModel::Homogeneous { c: 0.25 };
        let u = build_utility_matrix(&[s.clone()], &[s], &model).unwrap();
        assert_eq!(u.entries(), &[vec![0.0]]);
    }

    #[test]
    fn swapping_lists_transposes_and_negates() {
        let model = UtilityModel::Homogeneous { c: 0.25 };
        let xs = vec![
            Strategy::new(vec![vec![0.6, 0.4, 0.0]]).unwrap(),
            Strategy::new(vec![vec![0.1, 0.2, 0.7]]).unwrap(),
        ];
        let ys = vec![
            Strategy::new(vec![vec![0.3, 0.3, 0.4]]).unwrap(),
            Strategy::new(vec![vec![1.0, 0.0, 0.0]]).unwrap(),
            Strategy::new(vec![vec![0.0, 0.5, 0.5]]).unwrap(),
        ];
        let a = build_utility_matrix(&xs, &ys, &model).unwrap();
        let b = build_utility_matrix(&ys, &xs, &model).unwrap();
        assert_eq!(a.swapped(), b);
        // Incremental extension matches the batch build.
        let mut inc = build_utility_matrix(&xs[..1], &ys[..2], &model).unwrap();
        inc.push_row(&xs[1], &ys[..2], &model).unwrap();
        inc.push_col(&xs, &ys[2], &model).unwrap();
        assert_eq!(inc, a);
    }

    #[test]
    fn mixed_strategy_validation() {
        let s = Strategy::new(vec![vec![1.0]]).unwrap();
        assert!(MixedStrategy::new(vec![s.clone()], vec![0.9]).is_err());
        assert!(MixedStrategy::new(vec![s.clone(), s.clone()], vec![1.2, -0.2]).is_err());
        assert!(MixedStrategy::new(vec![s], vec![1.0]).is_ok());
    }
}

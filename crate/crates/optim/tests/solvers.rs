use blotto_optim::{
    mps, solve_lp, solve_milp, LinearProgram, MilpOptions, MilpProblem, Relation, Sense,
    SolveStatus,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random covering/packing problem over `n` binaries plus one bounded
/// continuous variable.
fn random_problem(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> MilpProblem {
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut p = MilpProblem::new(LinearProgram::new(sense));
    for i in 0..n {
        p.add_binary(format!("b{i}"), rng.gen_range(-5.0..5.0));
    }
    let y = p.base.add_variable("y", -1.0, 2.0, rng.gen_range(-2.0..2.0));
    for _ in 0..rows {
        let mut terms: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-3.0..3.0))).collect();
        terms.push((y, rng.gen_range(-1.0..1.0)));
        let rel = match rng.gen_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Le,
        };
        p.base.add_constraint(terms, rel, rng.gen_range(-2.0..4.0));
    }
    p
}

/// Optimum by enumerating all binary assignments and solving the remaining LP.
fn enumerate(p: &MilpProblem) -> Option<f64> {
    let n = p.integer_vars.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let mut lp = p.base.clone();
        for (k, &j) in p.integer_vars.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        let r = solve_lp(&lp, 1e-9).unwrap();
        if r.status == SolveStatus::Optimal {
            best = Some(match (best, p.base.sense) {
                (None, _) => r.objective,
                (Some(b), Sense::Maximize) => b.max(r.objective),
                (Some(b), Sense::Minimize) => b.min(r.objective),
            });
        }
    }
    best
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..120 {
        let n = rng.gen_range(1..=12);
        let rows = rng.gen_range(1..=10);
        let p = random_problem(&mut rng, n, rows);
        let expected = enumerate(&p);
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        match expected {
            None => assert_eq!(r.status, SolveStatus::Infeasible, "case {case}"),
            Some(v) => {
                assert_eq!(r.status, SolveStatus::Optimal, "case {case}");
                assert!((r.objective - v).abs() < 1e-6, "case {case}: {} vs {v}", r.objective);
                assert!(p.base.max_violation(&r.values) < 1e-6);
                for &j in &p.integer_vars {
                    assert!((r.values[j] - r.values[j].round()).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn milp_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_problem(&mut rng, 12, 5);
    let a = solve_milp(&p, &MilpOptions::default()).unwrap();
    let b = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(a, b);
}

/// Maximin LP for a payoff matrix: max v s.t. Σ_i p_i A_ij ≥ v, Σ p = 1.
fn maximin(a: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let p: Vec<usize> = (0..a.len()).map(|i| lp.add_variable(format!("p{i}"), 0.0, 1.0, 0.0)).collect();
    let v = lp.add_variable("v", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    for j in 0..a[0].len() {
        let mut terms: Vec<(usize, f64)> = p.iter().map(|&pi| (pi, a[pi][j])).collect();
        terms.push((v, -1.0));
        lp.add_constraint(terms, Relation::Ge, 0.0);
    }
    lp.add_constraint(p.iter().map(|&pi| (pi, 1.0)).collect(), Relation::Eq, 1.0);
    let r = solve_lp(&lp, 1e-9).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    (r.objective, p.iter().map(|&pi| r.values[pi]).collect())
}

#[test]
fn rock_paper_scissors_is_uniform() {
    let a = vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]];
    let (value, p) = maximin(&a);
    assert!(value.abs() < 1e-9);
    for pi in p {
        assert!((pi - 1.0 / 3.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The maximin value of A equals minus the maximin value of -Aᵀ.
    #[test]
    fn matrix_game_duality(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let at: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| -a[i][j]).collect()).collect();
        let (v1, p) = maximin(&a);
        let (v2, q) = maximin(&at);
        prop_assert!((v1 + v2).abs() < 1e-7, "{} vs {}", v1, -v2);
        // p guarantees v1 against every column, q holds every row to -v2.
        for j in 0..cols {
            let s: f64 = (0..rows).map(|i| p[i] * a[i][j]).sum();
            prop_assert!(s >= v1 - 1e-7);
        }
        for i in 0..rows {
            let s: f64 = (0..cols).map(|j| q[j] * a[i][j]).sum();
            prop_assert!(s <= -v2 + 1e-7);
        }
    }
}

#[test]
fn mps_lists_every_row_and_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_problem(&mut rng, 4, 3);
    let mut buf = Vec::new();
    mps::emit_mps(&p, "rand", &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for i in 0..p.base.num_constraints() {
        assert!(text.contains(&mps::row_name(i)));
    }
    for j in 0..p.base.num_variables() {
        assert!(text.contains(&mps::column_name(j)));
    }
    assert_eq!(text.matches(" BV BND").count(), 4);
}

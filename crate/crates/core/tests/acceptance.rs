//! End-to-end acceptance checks, one test per criterion.
//!
//! Each test writes a single `ACCEPTANCE` line with its verdict straight to
//! stderr so it shows up even when the harness captures output. The two
//! long equilibrium runs are ignored by default; run them with
//! `cargo test --release -p blotto-core --test acceptance -- --ignored`.

use std::io::Write;
use std::time::{Duration, Instant};

use blotto_core::baselines::{run_all, Scheme};
use blotto_core::best_response::{formulate, grid_oracle_br, solve_br, BestResponseProblem, BrOptions};
use blotto_core::doa::{self, DoaConfig, DoaResult, DoaState, DoaStatus};
use blotto_core::graph::{apply_transition, build_adjacency, Distribution, Graph, TransitionMatrix};
use blotto_core::matrix_game::{solve_subgame, UtilityMatrix};
use blotto_core::payoff::{
    elimination_oracle, g_components, median3, pi_oi, u_cdh, utility_homogeneous, IntrinsicMatrix,
    OutcomeParams, ZERO_TOL,
};
use blotto_core::{Game, MixedStrategy, Player, Strategy, UtilityModel};
use blotto_optim::{solve_lp, solve_milp, MilpOptions, MilpProblem, Sense, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, verdict: &str, detail: &str) {
    let _ = writeln!(std::io::stderr(), "ACCEPTANCE {id:>2} {verdict} {name}: {detail}");
}

/// Reports the verdict, then fails the test if it is negative.
fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    report(id, name, if pass { "PASS" } else { "FAIL" }, &detail);
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn two() -> IntrinsicMatrix {
    IntrinsicMatrix::cyclic(2.0, 2.0, 2.0).unwrap()
}

fn cdh(c: f64) -> UtilityModel {
    UtilityModel::Cdh(OutcomeParams::new(two(), c).unwrap())
}

fn g1() -> Graph {
    Graph::complete(3).unwrap()
}

fn g2() -> Graph {
    Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap()
}

fn reference_dx() -> Distribution {
    Distribution::new(vec![vec![0.7, 0.1, 0.2], vec![0.4, 0.4, 0.2], vec![0.3, 0.1, 0.6]]).unwrap()
}

fn reference_dy() -> Distribution {
    Distribution::new(vec![vec![0.2, 0.2, 0.6], vec![0.35, 0.15, 0.5], vec![0.4, 0.2, 0.4]]).unwrap()
}

fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[test]
fn criterion_01_outcome_interface_golden_value() {
    let v = pi_oi([4.0, 2.0, -7.0], &two()).unwrap();
    verdict(1, "outcome interface golden value", v == -2.0, format!("pi_oi((4,2,-7)) = {v}"));
}

#[test]
fn criterion_02_elimination_golden_value() {
    let e = elimination_oracle([-2.0, 1.0, 1.0], &two()).unwrap();
    let pass = e.sign == 1 && (e.remainder[2] - 0.25).abs() <= 1e-12;
    verdict(
        2,
        "elimination golden value",
        pass,
        format!("sign {}, remainder {:?}", e.sign, e.remainder),
    );
}

#[test]
fn criterion_03_outcome_sign_matches_elimination() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 10_000;
    let mut agree = 0;
    for _ in 0..samples {
        let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-5.0..=5.0));
        // Ratios in (1, 4].
        let mut r = || 4.0 - rng.gen_range(0.0..3.0);
        let i = IntrinsicMatrix::cyclic(r(), r(), r()).unwrap();
        let pi = pi_oi(d, &i).unwrap();
        let sign = if pi.abs() < ZERO_TOL { 0 } else { pi.signum() as i8 };
        if sign == elimination_oracle(d, &i).unwrap().sign {
            agree += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "sign equivalence sweep",
        agree == samples && secs < 5.0,
        format!("{agree}/{samples} agree in {secs:.2}s"),
    );
}

#[test]
fn criterion_04_median_equals_max_min_form() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
        let mut r = || 5.0 - rng.gen_range(0.0..4.0);
        let i = IntrinsicMatrix::cyclic(r(), r(), r()).unwrap();
        let g = g_components(d, &i).unwrap();
        let mut sorted = g;
        sorted.sort_by(f64::total_cmp);
        worst = worst.max((median3(g) - sorted[1]).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        4,
        "median / max-min agreement",
        worst <= 1e-12 && secs < 5.0,
        format!("max deviation {worst:e} over 1e5 inputs in {secs:.2}s"),
    );
}

#[test]
fn criterion_05_zero_sum_lp() {
    let start = Instant::now();
    let rps = UtilityMatrix::new(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ])
    .unwrap();
    let eq = solve_subgame(&rps).unwrap();
    let uniform = |p: &[f64]| p.iter().all(|x| (x - 1.0 / 3.0).abs() <= 1e-9);
    let mut pass = eq.value.abs() <= 1e-9 && uniform(&eq.p_x) && uniform(&eq.p_y);
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let a: Vec<Vec<f64>> = (0..8).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let eq = solve_subgame(&UtilityMatrix::new(a.clone()).unwrap()).unwrap();
        // Guaranteed payoffs of each side's mix.
        let maximin = (0..8)
            .map(|j| (0..8).map(|i| eq.p_x[i] * a[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let minimax = (0..8)
            .map(|i| (0..8).map(|j| a[i][j] * eq.p_y[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((maximin - minimax).abs());
    }
    pass &= worst <= 1e-8;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        5,
        "zero-sum LP",
        pass && secs < 10.0,
        format!("RPS value {:.1e}, max |maximin - minimax| {worst:.1e} on 100 8x8, {secs:.2}s", eq.value),
    );
}

/// Optimum of a small MILP by trying every binary assignment.
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
fn criterion_06_milp_against_oracles() {
    let start = Instant::now();
    let game = Game::new(g2(), cdh(0.25), reference_dx(), reference_dy()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = BrOptions::default();
    let mut worst_grid_gap = f64::NEG_INFINITY;
    let mut enumerated = 0;
    let mut enum_worst: f64 = 0.0;
    let mut certified = true;
    for instance in 0..20 {
        let responder = if instance % 2 == 0 { Player::One } else { Player::Two };
        let opp_space = game.space(responder.other());
        let k = 1 + instance % 3;
        let strategies: Vec<Strategy> = (0..k)
            .map(|i| {
                // Mix vertices and interior points.
                if i == 0 {
                    let v = opp_space.joint_vertices();
                    v[rng.gen_range(0..v.len())].clone()
                } else {
                    opp_space.random_strategy(&mut rng)
                }
            })
            .collect();
        let mix = MixedStrategy::new(strategies, simplex(&mut rng, k)).unwrap();
        let p = BestResponseProblem {
            responder,
            space: game.space(responder),
            opponent: &mix,
            model: game.model(),
        };
        let br = solve_br(&p, &opts, &[]).unwrap();
        certified &= br.certified;
        let (_, grid) = grid_oracle_br(&p, 8).unwrap();
        worst_grid_gap = worst_grid_gap.max(grid - br.value);

        let f = formulate(&p, &opts).unwrap();
        if f.milp.integer_vars.len() <= 12 {
            let r = solve_milp(&f.milp, &MilpOptions::default()).unwrap();
            let e = enumerate(&f.milp).expect("feasible");
            enum_worst = enum_worst.max((r.objective - e).abs());
            enumerated += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = certified
        && worst_grid_gap <= 1e-6
        && enumerated > 0
        && enum_worst <= 1e-6
        && secs < 600.0;
    verdict(
        6,
        "MILP vs grid and enumeration",
        pass,
        format!(
            "max(grid - milp) {worst_grid_gap:.2e} on 20 instances; {enumerated} instances with <= 12 \
             binaries, max |milp - enumeration| {enum_worst:.1e}; {secs:.1}s"
        ),
    );
}

/// Seeded random single-type distributions on `G_2`.
fn homogeneous_game(seed: u64) -> Game {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_x = Distribution::new(vec![simplex(&mut rng, 3)]).unwrap();
    let d_y = Distribution::new(vec![simplex(&mut rng, 3)]).unwrap();
    Game::new(g2(), UtilityModel::Homogeneous { c: 0.25 }, d_x, d_y).unwrap()
}

fn homogeneous_config(seed: u64) -> DoaConfig {
    DoaConfig { epsilon: 0.01, max_iterations: 200, seed, ..DoaConfig::default() }
}

#[test]
fn criterion_07_homogeneous_convergence() {
    let start = Instant::now();
    let mut worst_iter = 0;
    let mut all = true;
    let seeds = 0..10u64;
    for seed in seeds.clone() {
        let game = homogeneous_game(seed);
        let r = doa::run(&game, homogeneous_config(seed)).unwrap();
        all &= r.status == DoaStatus::Converged && r.gap() <= 0.01 && r.iterations <= 200;
        worst_iter = worst_iter.max(r.iterations);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        7,
        "homogeneous convergence",
        all && secs <= 120.0,
        format!("10 seeded games, all gaps <= 0.01, at most {worst_iter} iterations, {secs:.1}s total"),
    );
}

/// Runs the loop and, once converged, re-solves both best responses
/// against the returned mixes to confirm the equilibrium inequalities.
fn run_and_confirm(game: &Game, config: DoaConfig) -> (DoaResult, Option<(f64, f64)>) {
    let epsilon = config.epsilon;
    let br = config.br.clone();
    let r = doa::run(game, config).unwrap();
    if r.status != DoaStatus::Converged {
        return (r, None);
    }
    let best = |responder: Player, mix: &MixedStrategy| {
        let p = BestResponseProblem {
            responder,
            space: game.space(responder),
            opponent: mix,
            model: game.model(),
        };
        solve_br(&p, &br, &[]).unwrap()
    };
    let bx = best(Player::One, &r.y);
    let by = best(Player::Two, &r.x);
    assert!(bx.bound <= r.value + epsilon + 1e-6, "{} vs {}", bx.bound, r.value);
    assert!(-by.bound >= r.value - epsilon - 1e-6, "{} vs {}", -by.bound, r.value);
    (r.clone(), Some((-by.bound, bx.bound)))
}

#[test]
#[ignore = "slow suite: up to an hour"]
fn criterion_08_symmetric_cdh_value() {
    let start = Instant::now();
    let game = Game::new(g1(), cdh(0.25), reference_dx(), reference_dx()).unwrap();
    let config = DoaConfig {
        epsilon: 0.02,
        max_iterations: 2000,
        time_limit: Some(Duration::from_secs(3600)),
        ..DoaConfig::default()
    };
    let (r, confirmed) = run_and_confirm(&game, config);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "symmetric CDH value",
        confirmed.is_some() && r.value.abs() <= 0.1,
        format!(
            "{:?} after {} iterations, value {:.4}, bounds [{:.4}, {:.4}], {secs:.0}s",
            r.status, r.iterations, r.value, r.lower, r.upper
        ),
    );
}

#[test]
#[ignore = "nightly: up to four hours"]
fn criterion_09_reference_cdh_value() {
    let start = Instant::now();
    let game = Game::new(g2(), cdh(0.25), reference_dx(), reference_dy()).unwrap();
    let config = DoaConfig {
        epsilon: 0.02,
        max_iterations: 5000,
        time_limit: Some(Duration::from_secs(4 * 3600)),
        ..DoaConfig::default()
    };
    let (r, confirmed) = run_and_confirm(&game, config);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        9,
        "reference CDH value -0.53",
        confirmed.is_some() && (r.value + 0.53).abs() <= 0.1,
        format!(
            "{:?} after {} iterations, value {:.4}, bounds [{:.4}, {:.4}], {secs:.0}s",
            r.status, r.iterations, r.value, r.lower, r.upper
        ),
    );
}

#[test]
fn criteria_08_09_are_in_the_slow_suite() {
    report(8, "symmetric CDH value", "SKIP", "slow suite, run with --ignored");
    report(9, "reference CDH value -0.53", "SKIP", "nightly suite, run with --ignored");
}

#[test]
fn criterion_10_deviation_property() {
    let start = Instant::now();
    let game = homogeneous_game(0);
    let r = doa::run(&game, homogeneous_config(0)).unwrap();
    assert_eq!(r.status, DoaStatus::Converged);
    let report = run_all(&game, &r.x, &r.y, 30, 1, 10, &BrOptions::default()).unwrap();
    let mut pass = true;
    let mut tightest = f64::INFINITY;
    for s in report.summaries() {
        assert_eq!(s.trials, 30);
        let margin = match s.scheme {
            Scheme::PerturbPlayer2 => s.mean - (r.value - 0.02),
            Scheme::PerturbPlayer1 => (r.value + 0.02) - s.mean,
        };
        tightest = tightest.min(margin);
        pass &= margin >= 0.0;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        10,
        "deviation property of the six baselines",
        pass && secs < 900.0,
        format!("value {:.4}; smallest margin {tightest:.4} over 12 baseline/scheme pairs; {secs:.1}s", r.value),
    );
}

/// A random column-stochastic matrix supported on the graph's edges.
fn random_transition(g: &Graph, rng: &mut impl Rng) -> TransitionMatrix {
    let adj = build_adjacency(g);
    let n = g.node_count();
    let mut entries = vec![vec![0.0; n]; n];
    for source in 0..n {
        let dests = adj.destinations(source);
        let w = simplex(rng, dests.len());
        for (d, p) in dests.iter().zip(w) {
            entries[*d][source] = p;
        }
    }
    TransitionMatrix::new(entries, &adj).unwrap()
}

#[test]
fn criterion_11_structural_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g3 = Graph::new(5, vec![(0, 1), (0, 4), (1, 2), (1, 3), (2, 3), (3, 2), (3, 4), (4, 0)], true).unwrap();
    let mut conservation: f64 = 0.0;
    for _ in 0..1000 {
        let t = random_transition(&g3, &mut rng);
        let d = Distribution::new(vec![simplex(&mut rng, 5)]).unwrap();
        let out = apply_transition(&t, &d, 0).unwrap();
        conservation = conservation.max((out.iter().sum::<f64>() - 1.0).abs());
    }
    let params = OutcomeParams::new(two(), 0.25).unwrap();
    let mut antisymmetry: f64 = 0.0;
    for _ in 0..1000 {
        let a = Strategy::new((0..3).map(|_| simplex(&mut rng, 5)).collect()).unwrap();
        let b = Strategy::new((0..3).map(|_| simplex(&mut rng, 5)).collect()).unwrap();
        antisymmetry = antisymmetry.max((u_cdh(&a, &b, &params).unwrap() + u_cdh(&b, &a, &params).unwrap()).abs());
        let (ha, hb) = (
            Strategy::new(vec![a.row(0).to_vec()]).unwrap(),
            Strategy::new(vec![b.row(0).to_vec()]).unwrap(),
        );
        antisymmetry = antisymmetry
            .max((utility_homogeneous(&ha, &hb, 0.25).unwrap() + utility_homogeneous(&hb, &ha, 0.25).unwrap()).abs());
    }

    // Every strategy the loop generates, homogeneous and CDH, must be
    // reachable.
    let mut outside = 0;
    let mut checked = 0;
    let homogeneous = homogeneous_game(0);
    let r = doa::run(&homogeneous, homogeneous_config(0)).unwrap();
    for (player, mix) in [(Player::One, &r.x), (Player::Two, &r.y)] {
        for (_, s) in mix.iter() {
            checked += 1;
            outside += !homogeneous.space(player).contains(s).unwrap() as usize;
        }
    }
    let game = Game::new(g2(), cdh(0.25), reference_dx(), reference_dy()).unwrap();
    let mut state = DoaState::initialize(&game, DoaConfig { epsilon: 0.02, ..DoaConfig::default() }).unwrap();
    for _ in 0..5 {
        if state.iterate().unwrap().is_some() {
            break;
        }
    }
    for (player, list) in [(Player::One, &state.xs), (Player::Two, &state.ys)] {
        for s in list {
            checked += 1;
            outside += !game.space(player).contains(s).unwrap() as usize;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        11,
        "structural invariants",
        conservation <= 1e-12 && antisymmetry <= 1e-12 && outside == 0 && secs < 30.0,
        format!(
            "conservation {conservation:.1e}, antisymmetry {antisymmetry:.1e}, {outside}/{checked} \
             strategies outside their reachable sets, {secs:.1}s"
        ),
    );
}

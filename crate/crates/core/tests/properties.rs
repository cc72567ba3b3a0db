use blotto_core::graph::{apply_transition, build_adjacency, Distribution, Graph, TransitionMatrix};
use blotto_core::payoff::{
    elimination_oracle, median3, pi_oi, u_cdh, utility_homogeneous, IntrinsicMatrix, OutcomeParams,
    Strategy as Alloc, ZERO_TOL,
};
use blotto_core::{Game, Player, UtilityModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simplex_row(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn strategy(types: usize, nodes: usize) -> impl Strategy<Value = Alloc> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, nodes), types)
        .prop_map(|rows| Alloc::new(rows.into_iter().map(simplex_row).collect()).unwrap())
}

fn ratio() -> impl Strategy<Value = f64> {
    1.0001f64..4.0
}

proptest! {
    #[test]
    fn median_is_the_sorted_middle(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
        let mut s = [a, b, c];
        s.sort_by(f64::total_cmp);
        prop_assert_eq!(median3([a, b, c]), s[1]);
    }

    #[test]
    fn outcome_interface_is_odd(
        d in prop::array::uniform3(-5.0f64..5.0), i12 in ratio(), i23 in ratio(), i31 in ratio()
    ) {
        let i = IntrinsicMatrix::cyclic(i12, i23, i31).unwrap();
        let neg = d.map(|v| -v);
        prop_assert!((pi_oi(d, &i).unwrap() + pi_oi(neg, &i).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn outcome_sign_matches_elimination(
        d in prop::array::uniform3(-5.0f64..5.0), i12 in ratio(), i23 in ratio(), i31 in ratio()
    ) {
        let i = IntrinsicMatrix::cyclic(i12, i23, i31).unwrap();
        let pi = pi_oi(d, &i).unwrap();
        let sign = if pi.abs() < ZERO_TOL { 0 } else { pi.signum() as i8 };
        prop_assert_eq!(sign, elimination_oracle(d, &i).unwrap().sign);
    }

    #[test]
    fn homogeneous_utility_is_antisymmetric(a in strategy(1, 4), b in strategy(1, 4), c in 0.05f64..1.0) {
        let ab = utility_homogeneous(&a, &b, c).unwrap();
        let ba = utility_homogeneous(&b, &a, c).unwrap();
        prop_assert!((ab + ba).abs() < 1e-12);
        prop_assert!(ab.abs() <= 4.0);
    }

    #[test]
    fn cdh_utility_is_antisymmetric(a in strategy(3, 3), b in strategy(3, 3), i12 in ratio(), c in 0.05f64..1.0) {
        let p = OutcomeParams::new(IntrinsicMatrix::cyclic(i12, 2.0, 3.0).unwrap(), c).unwrap();
        let ab = u_cdh(&a, &b, &p).unwrap();
        prop_assert!((ab + u_cdh(&b, &a, &p).unwrap()).abs() < 1e-12);
        prop_assert_eq!(u_cdh(&a, &a, &p).unwrap(), 0.0);
    }
}

/// A random column-stochastic matrix supported on the graph's edges.
fn random_transition(g: &Graph, rng: &mut impl Rng) -> TransitionMatrix {
    let adj = build_adjacency(g);
    let n = g.node_count();
    let mut entries = vec![vec![0.0; n]; n];
    for source in 0..n {
        let dests = adj.destinations(source);
        let w = simplex_row(dests.iter().map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect());
        for (d, p) in dests.iter().zip(w) {
            entries[*d][source] = p;
        }
    }
    TransitionMatrix::new(entries, &adj).unwrap()
}

#[test]
fn transitions_conserve_mass() {
    let g = Graph::new(5, vec![(0, 1), (0, 4), (1, 2), (1, 3), (2, 3), (3, 2), (3, 4), (4, 0)], true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let t = random_transition(&g, &mut rng);
        let d = Distribution::new(vec![simplex_row((0..5).map(|_| rng.gen_range(0.0..1.0)).collect())]).unwrap();
        let out = apply_transition(&t, &d, 0).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(out.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn transition_images_lie_in_the_reachable_hull() {
    let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap();
    let d = Distribution::new(vec![vec![0.7, 0.1, 0.2], vec![0.4, 0.4, 0.2], vec![0.3, 0.1, 0.6]]).unwrap();
    let p = OutcomeParams::new(IntrinsicMatrix::cyclic(2.0, 2.0, 2.0).unwrap(), 0.25).unwrap();
    let game = Game::new(g.clone(), UtilityModel::Cdh(p), d.clone(), d.clone()).unwrap();
    let space = game.space(Player::One);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rows = (0..3)
            .map(|t| apply_transition(&random_transition(&g, &mut rng), &d, t).unwrap())
            .collect();
        let s = Alloc::new(rows).unwrap();
        assert!(space.contains(&s).unwrap());
    }
    // Random convex combinations of vertices stay inside too.
    for _ in 0..50 {
        assert!(space.contains(&space.random_strategy(&mut rng)).unwrap());
    }
}

//! A game instance: the arena, the scoring rule and each player's reachable
//! allocations after one transition.

use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{BlottoError, Result};
use crate::graph::{
    build_adjacency, enumerate_extreme_actions, hull_membership, reachable_vertices, Distribution,
    ExtremeActionSet, Graph, VERTEX_DEDUP_TOL,
};
use crate::payoff::{Strategy, UtilityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// One player's reachable set: per robot type, the vertices of the polytope
/// of one-step allocations. Types move independently, so a strategy is any
/// choice of one hull point per type.
#[derive(Debug, Clone)]
pub struct PlayerSpace {
    distribution: Distribution,
    vertices: Vec<Vec<Vec<f64>>>,
    joint: Vec<Strategy>,
    stay: Option<Strategy>,
    moves: Vec<Vec<usize>>,
}

impl PlayerSpace {
    pub fn new(extremes: &ExtremeActionSet, distribution: Distribution) -> Result<Self> {
        let vertices = (0..distribution.types())
            .map(|t| reachable_vertices(extremes, &distribution, t))
            .collect::<Result<Vec<_>>>()?;
        let mut joint: Vec<Strategy> = Vec::new();
        for k in 0..extremes.count() {
            let s = Strategy::from_rows_unchecked(
                distribution
                    .rows()
                    .iter()
                    .map(|row| extremes.apply(k, row))
                    .collect(),
            );
            if !joint.iter().any(|u| u.approx_eq(&s, VERTEX_DEDUP_TOL)) {
                joint.push(s);
            }
        }
        let stay = extremes
            .stay_index()
            .map(|_| Strategy::from(distribution.clone()));
        let mut moves = vec![Vec::new(); distribution.nodes()];
        for k in 0..extremes.count() {
            for (source, &dest) in extremes.destinations(k).iter().enumerate() {
                if !moves[source].contains(&dest) {
                    moves[source].push(dest);
                }
            }
        }
        moves.iter_mut().for_each(|m| m.sort_unstable());
        Ok(Self {
            distribution,
            vertices,
            joint,
            stay,
            moves,
        })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn types(&self) -> usize {
        self.vertices.len()
    }

    pub fn nodes(&self) -> usize {
        self.distribution.nodes()
    }

    /// Distinct vertices of type `t`'s reachable set.
    pub fn vertices(&self, t: usize) -> &[Vec<f64>] {
        &self.vertices[t]
    }

    /// Distinct strategies obtained by applying the same extreme action to
    /// every type.
    pub fn joint_vertices(&self) -> &[Strategy] {
        &self.joint
    }

    /// Destinations each source node can send mass to.
    pub fn moves(&self) -> &[Vec<usize>] {
        &self.moves
    }

    /// The allocation left unchanged, when staying is admissible.
    pub fn stay(&self) -> Option<&Strategy> {
        self.stay.as_ref()
    }

    /// Assembles `Σ_k λ_{t,k} v_{t,k}` per type.
    pub fn strategy_from_weights(&self, weights: &[Vec<f64>]) -> Result<Strategy> {
        if weights.len() != self.types() {
            return Err(BlottoError::Dimension(format!(
                "{} weight vectors for {} types",
                weights.len(),
                self.types()
            )));
        }
        let n = self.nodes();
        let rows = weights
            .iter()
            .zip(&self.vertices)
            .map(|(w, verts)| {
                if w.len() != verts.len() {
                    return Err(BlottoError::Dimension(format!(
                        "{} weights for {} vertices",
                        w.len(),
                        verts.len()
                    )));
                }
                let mut row = vec![0.0; n];
                for (lambda, v) in w.iter().zip(verts) {
                    for (r, x) in row.iter_mut().zip(v) {
                        *r += lambda * x;
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Strategy::from_rows_unchecked(rows))
    }

    /// A random reachable strategy: independent Dirichlet(1) weights per type.
    pub fn random_strategy<R: Rng + ?Sized>(&self, rng: &mut R) -> Strategy {
        let weights: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|verts| {
                let raw: Vec<f64> = verts.iter().map(|_| Exp1.sample(rng)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|x: &f64| x / total).collect()
            })
            .collect();
        self.strategy_from_weights(&weights)
            .expect("weights built from the vertex lists")
    }

    /// Whether every row of `s` lies in its type's reachable set.
    pub fn contains(&self, s: &Strategy) -> Result<bool> {
        if s.types() != self.types() || s.nodes() != self.nodes() {
            return Ok(false);
        }
        for t in 0..self.types() {
            if !hull_membership(s.row(t), &self.vertices[t])?.member {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone)]
pub struct Game {
    graph: Graph,
    model: UtilityModel,
    extremes: ExtremeActionSet,
    x: PlayerSpace,
    y: PlayerSpace,
}

impl Game {
    pub fn new(
        graph: Graph,
        model: UtilityModel,
        d_x: Distribution,
        d_y: Distribution,
    ) -> Result<Self> {
        for (name, d) in [("d_x", &d_x), ("d_y", &d_y)] {
            if d.nodes() != graph.node_count() {
                return Err(BlottoError::validation(
                    name,
                    format!("has {} nodes, graph has {}", d.nodes(), graph.node_count()),
                ));
            }
            if d.types() != model.types() {
                return Err(BlottoError::validation(
                    name,
                    format!(
                        "has {} types, the utility needs {}",
                        d.types(),
                        model.types()
                    ),
                ));
            }
        }
        let extremes = enumerate_extreme_actions(&build_adjacency(&graph))?;
        let x = PlayerSpace::new(&extremes, d_x)?;
        let y = PlayerSpace::new(&extremes, d_y)?;
        Ok(Self {
            graph,
            model,
            extremes,
            x,
            y,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn model(&self) -> &UtilityModel {
        &self.model
    }

    pub fn extremes(&self) -> &ExtremeActionSet {
        &self.extremes
    }

    pub fn space(&self, player: Player) -> &PlayerSpace {
        match player {
            Player::One => &self.x,
            Player::Two => &self.y,
        }
    }

    /// Player 1's payoff for the pair.
    pub fn utility(&self, sx: &Strategy, sy: &Strategy) -> Result<f64> {
        self.model.utility(sx, sy)
    }

    /// Payoff to `player` when it plays `own` against `opponent`.
    pub fn utility_for(&self, player: Player, own: &Strategy, opponent: &Strategy) -> Result<f64> {
        match player {
            Player::One => self.model.utility(own, opponent),
            Player::Two => Ok(-self.model.utility(opponent, own)?),
        }
    }
}

/// Index of the first entry of `list` equal to `s` within `tol`.
pub(crate) fn contains_strategy(list: &[Strategy], s: &Strategy, tol: f64) -> Option<usize> {
    list.iter().position(|u| u.approx_eq(s, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g2_game() -> Game {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap();
        let d = Distribution::new(vec![vec![0.7, 0.1, 0.2]]).unwrap();
        Game::new(g, UtilityModel::Homogeneous { c: 0.25 }, d.clone(), d).unwrap()
    }

    #[test]
    fn g2_has_eight_joint_vertices() {
        let game = g2_game();
        let space = game.space(Player::One);
        assert_eq!(space.joint_vertices().len(), 8);
        assert_eq!(space.vertices(0).len(), 8);
        assert_eq!(space.stay().unwrap().row(0), &[0.7, 0.1, 0.2]);
    }

    #[test]
    fn random_strategies_are_reachable() {
        let game = g2_game();
        let space = game.space(Player::Two);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = space.random_strategy(&mut rng);
            assert!((s.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(space.contains(&s).unwrap());
        }
    }

    #[test]
    fn utility_for_player_two_negates() {
        let game = g2_game();
        let a = game.space(Player::One).joint_vertices()[1].clone();
        let b = game.space(Player::Two).joint_vertices()[5].clone();
        let u = game.utility(&a, &b).unwrap();
        assert_eq!(game.utility_for(Player::Two, &b, &a).unwrap(), -u);
    }

    #[test]
    fn type_count_must_match_model() {
        let g = Graph::complete(3).unwrap();
        let d = Distribution::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let model = UtilityModel::Homogeneous { c: 0.25 };
        let d2 = Distribution::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(Game::new(g, model, d, d2).is_err());
    }
}

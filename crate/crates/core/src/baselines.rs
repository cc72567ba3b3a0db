//! Perturbation baselines around an equilibrium.
//!
//! A baseline replaces one player's equilibrium mix by something else —
//! part of its support swapped for random reachable strategies, a single
//! vertex of the reachable set, or the uniform mix over all vertices — and
//! lets the opponent best-respond. At an equilibrium no such change can help
//! the perturbed player, so perturbing Player 2 should raise Player 1's
//! utility and perturbing Player 1 should lower it.

use std::fmt;
use std::io::Write;

use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{solve_br, BestResponseProblem, BrOptions};
use crate::error::{BlottoError, Result};
use crate::game::{Game, Player, PlayerSpace};
use crate::matrix_game::MixedStrategy;

/// Fractions of the support replaced by the first four baselines.
pub const REPLACE_FRACTIONS: [f64; 4] = [0.2, 0.4, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Replace `⌈f·K⌉` of the `K` support strategies, keeping probabilities.
    ReplaceFraction(f64),
    /// One vertex of the reachable set, played with certainty.
    PureVertex,
    /// Every vertex of the reachable set with equal probability.
    UniformVertices,
}

impl BaselineKind {
    /// The six standard baselines, in order.
    pub fn all() -> Vec<BaselineKind> {
        REPLACE_FRACTIONS
            .iter()
            .map(|&f| BaselineKind::ReplaceFraction(f))
            .chain([BaselineKind::PureVertex, BaselineKind::UniformVertices])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineKind::ReplaceFraction(f) if !REPLACE_FRACTIONS.contains(f) => {
                Err(BlottoError::validation(
                    "kind",
                    format!("replace fraction {f} is not one of {REPLACE_FRACTIONS:?}"),
                ))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::ReplaceFraction(x) => write!(f, "replace_{:.0}", x * 100.0),
            BaselineKind::PureVertex => write!(f, "pure_vertex"),
            BaselineKind::UniformVertices => write!(f, "uniform_vertices"),
        }
    }
}

/// Whose equilibrium mix is changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PerturbPlayer2,
    PerturbPlayer1,
}

impl Scheme {
    pub fn perturbed(self) -> Player {
        match self {
            Scheme::PerturbPlayer1 => Player::One,
            Scheme::PerturbPlayer2 => Player::Two,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::PerturbPlayer1 => "perturb_player1",
            Scheme::PerturbPlayer2 => "perturb_player2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub scheme: Scheme,
    pub trials: usize,
    /// Random draws averaged within one trial.
    pub repetitions: usize,
    pub seed: u64,
}

/// Swaps `⌈fraction·K⌉` support strategies, chosen without replacement, for
/// random reachable strategies. Probabilities stay attached to their slots.
pub fn perturb<R: Rng + ?Sized>(
    mix: &MixedStrategy,
    space: &PlayerSpace,
    fraction: f64,
    rng: &mut R,
) -> Result<MixedStrategy> {
    if mix.is_empty() {
        return Err(BlottoError::validation("mix", "empty support"));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(BlottoError::validation("fraction", "must lie in [0, 1]"));
    }
    let k = mix.len();
    // The small slack keeps 0.2·5 from rounding up to 2.
    let count = ((fraction * k as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut out = mix.clone();
    for i in sample(rng, k, count.min(k)) {
        out.strategies[i] = space.random_strategy(rng);
    }
    Ok(out)
}

/// The vertex baselines: one seeded pick, or all vertices uniformly.
pub fn vertex_baseline<R: Rng + ?Sized>(
    space: &PlayerSpace,
    kind: BaselineKind,
    rng: &mut R,
) -> Result<MixedStrategy> {
    let vertices = space.joint_vertices();
    if vertices.is_empty() {
        return Err(BlottoError::Structural("empty vertex list".into()));
    }
    match kind {
        BaselineKind::PureVertex => Ok(MixedStrategy::pure(
            vertices.choose(rng).expect("nonempty").clone(),
        )),
        BaselineKind::UniformVertices => {
            let p = 1.0 / vertices.len() as f64;
            MixedStrategy::new(vertices.to_vec(), vec![p; vertices.len()])
        }
        BaselineKind::ReplaceFraction(_) => Err(BlottoError::validation(
            "kind",
            "not a vertex baseline",
        )),
    }
}

/// Player 1's utility once the opponent of `perturbed` best-responds to
/// `mix`.
pub fn evaluate(game: &Game, mix: &MixedStrategy, perturbed: Player, opts: &BrOptions) -> Result<f64> {
    let responder = perturbed.other();
    let problem = BestResponseProblem {
        responder,
        space: game.space(responder),
        opponent: mix,
        model: game.model(),
    };
    let br = solve_br(&problem, opts, &[])?;
    Ok(match responder {
        Player::One => br.value,
        Player::Two => -br.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub baseline: String,
    pub scheme: Scheme,
    pub trial: usize,
    /// Player 1's expected utility after the opponent's best response.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub baseline: String,
    pub scheme: Scheme,
    pub trials: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    fn of(baseline: String, scheme: Scheme, utilities: &[f64]) -> Self {
        let mut s = utilities.to_vec();
        s.sort_by(f64::total_cmp);
        Summary {
            baseline,
            scheme,
            trials: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rows: Vec<TrialRow>,
}

impl TrialReport {
    pub fn summaries(&self) -> Vec<Summary> {
        let mut keys: Vec<(String, Scheme)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(b, s)| *b == r.baseline && *s == r.scheme) {
                keys.push((r.baseline.clone(), r.scheme));
            }
        }
        keys.into_iter()
            .map(|(b, s)| {
                let u: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.baseline == b && r.scheme == s)
                    .map(|r| r.utility)
                    .collect();
                Summary::of(b, s, &u)
            })
            .collect()
    }

    /// One CSV row per trial: `baseline,scheme,trial,utility`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = out;
        writeln!(w, "baseline,scheme,trial,utility")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{:.12}", r.baseline, r.scheme, r.trial, r.utility)?;
        }
        Ok(())
    }
}

/// Runs one baseline under one scheme against the equilibrium `(x, y)`.
pub fn run_baseline(
    game: &Game,
    x: &MixedStrategy,
    y: &MixedStrategy,
    spec: &BaselineSpec,
    opts: &BrOptions,
) -> Result<Vec<TrialRow>> {
    spec.kind.validate()?;
    if spec.trials == 0 || spec.repetitions == 0 {
        return Err(BlottoError::validation("trials", "must be positive"));
    }
    let perturbed = spec.scheme.perturbed();
    let (mix, space) = match perturbed {
        Player::One => (x, game.space(Player::One)),
        Player::Two => (y, game.space(Player::Two)),
    };
    // One stream per (baseline, scheme) so adding a baseline does not
    // change the draws of the others.
    let stream = stream_id(spec.kind, spec.scheme);
    (0..spec.trials)
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(trial as u64));
            rng.set_stream(stream);
            let draws = match spec.kind {
                // Deterministic baseline: one draw is enough.
                BaselineKind::UniformVertices => 1,
                _ => spec.repetitions,
            };
            let mut total = 0.0;
            for _ in 0..draws {
                let changed = match spec.kind {
                    BaselineKind::ReplaceFraction(f) => perturb(mix, space, f, &mut rng)?,
                    kind => vertex_baseline(space, kind, &mut rng)?,
                };
                total += evaluate(game, &changed, perturbed, opts)?;
            }
            Ok(TrialRow {
                baseline: spec.kind.to_string(),
                scheme: spec.scheme,
                trial,
                utility: total / draws as f64,
            })
        })
        .collect()
}

fn stream_id(kind: BaselineKind, scheme: Scheme) -> u64 {
    let k = match kind {
        BaselineKind::ReplaceFraction(f) => (f * 100.0).round() as u64,
        BaselineKind::PureVertex => 1000,
        BaselineKind::UniformVertices => 1001,
    };
    2 * k + (scheme == Scheme::PerturbPlayer1) as u64
}

/// All six baselines under both schemes.
pub fn run_all(
    game: &Game,
    x: &MixedStrategy,
    y: &MixedStrategy,
    trials: usize,
    repetitions: usize,
    seed: u64,
    opts: &BrOptions,
) -> Result<TrialReport> {
    let mut report = TrialReport::default();
    for kind in BaselineKind::all() {
        for scheme in [Scheme::PerturbPlayer2, Scheme::PerturbPlayer1] {
            let spec = BaselineSpec { kind, scheme, trials, repetitions, seed };
            report.rows.extend(run_baseline(game, x, y, &spec, opts)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Distribution, Graph};
    use crate::payoff::UtilityModel;

    fn g2_game() -> Game {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap();
        let d_x = Distribution::new(vec![vec![0.5, 0.3, 0.2]]).unwrap();
        let d_y = Distribution::new(vec![vec![0.2, 0.2, 0.6]]).unwrap();
        Game::new(g, UtilityModel::Homogeneous { c: 0.25 }, d_x, d_y).unwrap()
    }

    #[test]
    fn replacement_count_is_a_ceiling() {
        let game = g2_game();
        let space = game.space(Player::One);
        let verts = space.joint_vertices();
        let mix = MixedStrategy::new(
            (0..5).map(|i| verts[i % verts.len()].clone()).collect(),
            vec![0.2; 5],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let changed = |out: &MixedStrategy| {
            (0..5)
                .filter(|&i| !out.strategies[i].approx_eq(&mix.strategies[i], 1e-12))
                .count()
        };
        let one = perturb(&mix, space, 0.2, &mut rng).unwrap();
        assert_eq!(changed(&one), 1);
        let all = perturb(&mix, space, 1.0, &mut rng).unwrap();
        assert_eq!(changed(&all), 5);
        assert_eq!(all.probabilities, mix.probabilities);
        for (_, s) in all.iter() {
            assert!(space.contains(s).unwrap());
        }
    }

    #[test]
    fn vertex_baselines() {
        let game = g2_game();
        let space = game.space(Player::Two);
        let n = space.joint_vertices().len();
        let u = vertex_baseline(space, BaselineKind::UniformVertices, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(u.len(), n);
        assert!(u.probabilities.iter().all(|p| (p - 1.0 / n as f64).abs() < 1e-15));
        let a = vertex_baseline(space, BaselineKind::PureVertex, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = vertex_baseline(space, BaselineKind::PureVertex, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn single_vertex_space_makes_vertex_baselines_coincide() {
        // No edges and staying allowed: the only reachable point is d itself.
        let g = Graph::new(2, vec![], true).unwrap();
        let d = Distribution::new(vec![vec![0.5, 0.5]]).unwrap();
        let game = Game::new(g, UtilityModel::Homogeneous { c: 0.25 }, d.clone(), d).unwrap();
        let space = game.space(Player::One);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = vertex_baseline(space, BaselineKind::PureVertex, &mut rng).unwrap();
        let u = vertex_baseline(space, BaselineKind::UniformVertices, &mut rng).unwrap();
        assert_eq!(p, u);
    }

    #[test]
    fn rejects_unlisted_fraction() {
        assert!(BaselineKind::ReplaceFraction(0.3).validate().is_err());
        assert_eq!(BaselineKind::all().len(), 6);
    }

    #[test]
    fn quartiles() {
        let s = Summary::of("b".into(), Scheme::PerturbPlayer1, &[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max, s.mean), (1.0, 2.0, 3.0, 4.0, 5.0, 3.0));
    }

    #[test]
    fn csv_has_one_row_per_trial() {
        let game = g2_game();
        let s = game.space(Player::One).stay().unwrap().clone();
        let t = game.space(Player::Two).stay().unwrap().clone();
        let x = MixedStrategy::pure(s);
        let y = MixedStrategy::pure(t);
        let spec = BaselineSpec {
            kind: BaselineKind::ReplaceFraction(1.0),
            scheme: Scheme::PerturbPlayer1,
            trials: 4,
            repetitions: 1,
            seed: 5,
        };
        let rows = run_baseline(&game, &x, &y, &spec, &BrOptions::default()).unwrap();
        let report = TrialReport { rows };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}

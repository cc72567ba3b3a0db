//! The double oracle loop.
//!
//! Each iteration solves the zero-sum subgame over the current finite
//! strategy lists, computes each player's best response to the other's
//! subgame mix, and adds the responses. Best responses bound the game value:
//! Player 1's certifies an upper bound, Player 2's a lower bound. The loop
//! stops once the best bounds seen are within `epsilon`.

use std::time::{Duration, Instant};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{solve_br, BestResponse, BestResponseProblem, BrOptions};
use crate::error::{BlottoError, Result};
use crate::game::{contains_strategy, Game, Player};
use crate::matrix_game::{build_utility_matrix, mixed_utility, solve_subgame, MixedStrategy, UtilityMatrix};
use crate::payoff::Strategy;

/// Strategies closer than this are treated as the same strategy.
pub const STRATEGY_DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DoaConfig {
    pub epsilon: f64,
    /// Subgame probabilities below this are dropped from the mix a best
    /// response is computed against. The strategy lists keep every entry.
    pub prune_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub time_limit: Option<Duration>,
    /// Ask each best response only whether some strategy beats the subgame
    /// value by more than `epsilon/2`, stopping at the first that does.
    /// Bounds stay valid; the final iterations still prove them.
    pub targeted: bool,
    pub br: BrOptions,
}

impl Default for DoaConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            prune_threshold: 1e-3,
            max_iterations: 200,
            seed: 0,
            time_limit: None,
            targeted: true,
            br: BrOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoaStatus {
    Converged,
    IterationLimit,
    TimeLimit,
    /// Neither best response was new, but the bounds did not meet.
    Stalled,
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Subgame value before the responses were added.
    pub subgame_value: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    /// Strategy list sizes after the responses were added.
    pub x_strategies: usize,
    pub y_strategies: usize,
    /// Strategies with positive probability in the subgame equilibrium.
    pub support_x: usize,
    pub support_y: usize,
    pub br_x_nodes: usize,
    pub br_y_nodes: usize,
    pub certified: bool,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoaResult {
    pub x: MixedStrategy,
    pub y: MixedStrategy,
    /// Player 1's expected utility under `(x, y)`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub status: DoaStatus,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
}

impl DoaResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Loop state, exposed so callers can step it and inspect progress.
#[derive(Debug, Clone)]
pub struct DoaState<'g> {
    game: &'g Game,
    config: DoaConfig,
    pub xs: Vec<Strategy>,
    pub ys: Vec<Strategy>,
    matrix: UtilityMatrix,
    pub lower: f64,
    pub upper: f64,
    best_x: Option<MixedStrategy>,
    best_y: Option<MixedStrategy>,
    pub trace: Vec<TraceRecord>,
    start: Instant,
}

fn initial_list(game: &Game, player: Player, rng: &mut ChaCha8Rng) -> Vec<Strategy> {
    let space = game.space(player);
    let joint = space.joint_vertices();
    let first = space.stay().cloned().unwrap_or_else(|| joint[0].clone());
    let mut list = vec![first];
    if let Some(extra) = joint.choose(rng) {
        if contains_strategy(&list, extra, STRATEGY_DEDUP_TOL).is_none() {
            list.push(extra.clone());
        }
    }
    list
}

/// Keeps entries with probability at least `threshold` and renormalizes.
/// Returns the mix and the dropped mass.
pub fn prune_mix(strategies: &[Strategy], probabilities: &[f64], threshold: f64) -> (MixedStrategy, f64) {
    let keep: Vec<usize> = (0..probabilities.len())
        .filter(|&i| probabilities[i] >= threshold)
        .collect();
    let keep = if keep.is_empty() {
        let best = (0..probabilities.len())
            .max_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b]))
            .expect("nonempty mix");
        vec![best]
    } else {
        keep
    };
    let kept: f64 = keep.iter().map(|&i| probabilities[i]).sum();
    let mix = MixedStrategy {
        strategies: keep.iter().map(|&i| strategies[i].clone()).collect(),
        probabilities: keep.iter().map(|&i| probabilities[i] / kept).collect(),
    };
    (mix, (1.0 - kept).max(0.0))
}

impl<'g> DoaState<'g> {
    pub fn initialize(game: &'g Game, config: DoaConfig) -> Result<Self> {
        if !(config.epsilon >= 0.0) {
            return Err(BlottoError::validation("epsilon", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&config.prune_threshold) {
            return Err(BlottoError::validation("prune_threshold", "must lie in [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let xs = initial_list(game, Player::One, &mut rng);
        let ys = initial_list(game, Player::Two, &mut rng);
        let matrix = build_utility_matrix(&xs, &ys, game.model())?;
        Ok(Self {
            game,
            config,
            xs,
            ys,
            matrix,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            best_x: None,
            best_y: None,
            trace: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    /// Best response of `responder` to a pruned mix that dropped `dropped`
    /// of its mass. `value` is the responder's subgame value.
    fn respond(
        &self,
        responder: Player,
        mix: &MixedStrategy,
        dropped: f64,
        value: f64,
        own: &[Strategy],
    ) -> Result<BestResponse> {
        let problem = BestResponseProblem {
            responder,
            space: self.game.space(responder),
            opponent: mix,
            model: self.game.model(),
        };
        let mut opts = self.config.br.clone();
        if let Some(limit) = self.config.time_limit {
            opts.milp.deadline = Some(self.start + limit);
        }
        if self.config.targeted {
            // Beating this against the pruned mix is what the bound
            // correction below needs to stay under value + margin.
            let n = self.game.graph().node_count() as f64;
            let margin = 0.45 * self.config.epsilon;
            let goal = (value + margin - dropped * n) / (1.0 - dropped);
            opts.milp.cutoff = Some(goal);
            opts.milp.target = Some(goal);
        }
        solve_br(&problem, &opts, own)
    }

    /// Runs one iteration. Returns the stopping status once the loop is done.
    pub fn iterate(&mut self) -> Result<Option<DoaStatus>> {
        let eq = solve_subgame(&self.matrix)?;
        let (mix_y, dropped_y) = prune_mix(&self.ys, &eq.p_y, self.config.prune_threshold);
        let (mix_x, dropped_x) = prune_mix(&self.xs, &eq.p_x, self.config.prune_threshold);
        let br_x = self.respond(Player::One, &mix_y, dropped_y, eq.value, &self.xs)?;
        let br_y = self.respond(Player::Two, &mix_x, dropped_x, -eq.value, &self.ys)?;

        // Per-node outcomes lie in [−1, 1], so the dropped mass can move a
        // bound by at most that mass times the node count.
        let n = self.game.graph().node_count() as f64;
        let upper = (1.0 - dropped_y) * br_x.bound + dropped_y * n;
        let lower = -((1.0 - dropped_x) * br_y.bound + dropped_x * n);
        let full_x = MixedStrategy { strategies: self.xs.clone(), probabilities: eq.p_x.clone() };
        let full_y = MixedStrategy { strategies: self.ys.clone(), probabilities: eq.p_y.clone() };
        if upper < self.upper || self.best_y.is_none() {
            self.upper = upper.min(self.upper);
            self.best_y = Some(full_y);
        }
        if lower > self.lower || self.best_x.is_none() {
            self.lower = lower.max(self.lower);
            self.best_x = Some(full_x);
        }

        let mut added = false;
        if contains_strategy(&self.xs, &br_x.strategy, STRATEGY_DEDUP_TOL).is_none() {
            self.matrix.push_row(&br_x.strategy, &self.ys, self.game.model())?;
            self.xs.push(br_x.strategy.clone());
            added = true;
        }
        if contains_strategy(&self.ys, &br_y.strategy, STRATEGY_DEDUP_TOL).is_none() {
            self.matrix.push_col(&self.xs, &br_y.strategy, self.game.model())?;
            self.ys.push(br_y.strategy.clone());
            added = true;
        }

        let iteration = self.trace.len() + 1;
        let elapsed = self.start.elapsed();
        let record = TraceRecord {
            iteration,
            subgame_value: eq.value,
            lower: self.lower,
            upper: self.upper,
            gap: self.gap(),
            x_strategies: self.xs.len(),
            y_strategies: self.ys.len(),
            support_x: eq.p_x.iter().filter(|p| **p > 0.0).count(),
            support_y: eq.p_y.iter().filter(|p| **p > 0.0).count(),
            br_x_nodes: br_x.nodes,
            br_y_nodes: br_y.nodes,
            certified: br_x.certified && br_y.certified,
            elapsed_secs: elapsed.as_secs_f64(),
        };
        info!(
            "iteration {iteration}: subgame {:.5}, bounds [{:.5}, {:.5}], lists {}x{}, {:.1}s",
            eq.value,
            self.lower,
            self.upper,
            self.xs.len(),
            self.ys.len(),
            record.elapsed_secs
        );
        self.trace.push(record);

        if self.gap() <= self.config.epsilon {
            return Ok(Some(DoaStatus::Converged));
        }
        // An interrupted best response may repeat a listed strategy, so the
        // clock is checked before stalling.
        if self.config.time_limit.is_some_and(|t| elapsed >= t) {
            return Ok(Some(DoaStatus::TimeLimit));
        }
        if !added {
            return Ok(Some(DoaStatus::Stalled));
        }
        if iteration >= self.config.max_iterations {
            return Ok(Some(DoaStatus::IterationLimit));
        }
        Ok(None)
    }

    pub fn finish(self, status: DoaStatus) -> Result<DoaResult> {
        let strip = |m: MixedStrategy| {
            let keep: Vec<usize> = (0..m.len()).filter(|&i| m.probabilities[i] > 0.0).collect();
            MixedStrategy {
                strategies: keep.iter().map(|&i| m.strategies[i].clone()).collect(),
                probabilities: keep.iter().map(|&i| m.probabilities[i]).collect(),
            }
        };
        let x = strip(self.best_x.ok_or_else(|| BlottoError::Structural("no iteration ran".into()))?);
        let y = strip(self.best_y.ok_or_else(|| BlottoError::Structural("no iteration ran".into()))?);
        let value = mixed_utility(&x, &y, self.game.model())?;
        Ok(DoaResult {
            x,
            y,
            value,
            lower: self.lower,
            upper: self.upper,
            status,
            iterations: self.trace.len(),
            trace: self.trace,
        })
    }
}

/// Runs the loop to completion.
pub fn run(game: &Game, config: DoaConfig) -> Result<DoaResult> {
    if config.max_iterations == 0 {
        return Err(BlottoError::validation("max_iterations", "must be positive"));
    }
    let mut state = DoaState::initialize(game, config)?;
    loop {
        if let Some(status) = state.iterate()? {
            return state.finish(status);
        }
    }
}

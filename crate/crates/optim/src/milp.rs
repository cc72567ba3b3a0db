//! Branch-and-bound over `{0,1}` variables.
//!
//! Every node carries its own variable box. Before its LP is solved the box
//! is tightened by row propagation, including the objective row
//! `cᵀx ≤ incumbent`; afterwards, binaries whose reduced cost already closes
//! the gap are fixed. Branching uses pseudocosts, initialised by a few
//! truncated dual simplex solves per variable (strong branching).
//!
//! The search dives into the more promising child and parks its sibling. When
//! a dive ends, the parked node with the smallest bound is next. Children
//! re-optimize a clone of their parent's optimal tableau with the dual
//! simplex; parked nodes keep that tableau while memory allows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use crate::lp::{pivot_budget, sense_sign};
use crate::problem::{LinearProgram, MilpProblem, SolveResult, SolveStatus};
use crate::propagate::Propagator;
use crate::tableau::{Outcome, Tableau};
use crate::OptimError;

/// Memory allowed for tableaux held by parked nodes. Nodes parked beyond it
/// are re-solved from the root tableau when popped.
const PARKED_BYTES: usize = 768 << 20;
/// Pseudocost observations after which a direction counts as reliable.
const RELIABLE: u32 = 4;
/// Candidates examined by strong branching at one node.
const STRONG_CANDIDATES: usize = 8;
/// Strong branching stops after this many candidates without a better score.
const STRONG_LOOKAHEAD: usize = 4;
/// Dual simplex pivots per strong branching solve.
const STRONG_PIVOTS: usize = 80;
/// Bound changes from strong branching before a node branches regardless.
const MAX_STRONG_ROUNDS: usize = 5;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    /// Absolute optimality gap at which a node is pruned.
    pub gap_tol: f64,
    /// Maximum number of branch-and-bound nodes.
    pub node_limit: usize,
    /// Distance from `{0,1}` accepted as integral.
    pub int_tol: f64,
    /// Primal feasibility tolerance of the LP subsolves.
    pub feas_tol: f64,
    /// Discard nodes whose bound does not exceed this objective value. The
    /// search then only establishes whether something better exists; the
    /// reported bound stays valid.
    pub cutoff: Option<f64>,
    /// Stop once the incumbent reaches this objective value.
    pub target: Option<f64>,
    /// Wall-clock point after which the search stops as if the node limit
    /// had been reached.
    pub deadline: Option<Instant>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            node_limit: 1_000_000,
            int_tol: 1e-6,
            feas_tol: 1e-9,
            cutoff: None,
            target: None,
            deadline: None,
        }
    }
}

struct Node {
    parent: Option<Arc<Tableau>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Lower bound (minimization form) inherited from the parent.
    bound: f64,
    /// The branching that created the node: variable, distance moved,
    /// direction and the parent's objective.
    origin: Option<(usize, f64, bool, f64)>,
}

/// Heap entry ordered so that the smallest bound is popped first.
struct Open(Node);

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.bound.total_cmp(&self.0.bound)
    }
}

/// Average objective degradation per unit change, per direction.
struct Pseudocosts {
    sum: [Vec<f64>; 2],
    count: [Vec<u32>; 2],
}

impl Pseudocosts {
    fn new(n: usize) -> Self {
        Self { sum: [vec![0.0; n], vec![0.0; n]], count: [vec![0; n], vec![0; n]] }
    }

    fn record(&mut self, j: usize, up: bool, per_unit: f64) {
        let d = up as usize;
        self.sum[d][j] += per_unit;
        self.count[d][j] += 1;
    }

    fn reliable(&self, j: usize) -> bool {
        self.count[0][j] >= RELIABLE && self.count[1][j] >= RELIABLE
    }

    /// Estimated degradation of moving `j` by `dist` in one direction; the
    /// average over all variables stands in for unobserved ones.
    fn estimate(&self, j: usize, up: bool, dist: f64) -> f64 {
        let d = up as usize;
        let per_unit = if self.count[d][j] > 0 {
            self.sum[d][j] / self.count[d][j] as f64
        } else {
            let (s, c) = self.sum[d]
                .iter()
                .zip(&self.count[d])
                .fold((0.0, 0u32), |(s, c), (a, b)| (s + a, c + b));
            if c > 0 {
                s / c as f64
            } else {
                1.0
            }
        };
        per_unit * dist
    }
}

fn score(down: f64, up: f64) -> f64 {
    down.max(1e-6) * up.max(1e-6)
}

enum Branching {
    /// Branch on a variable: bounds of the down and up children and
    /// whether to dive up first.
    On(usize, f64, f64, bool),
    /// Strong branching fixed a variable; the node was re-solved.
    Tightened,
    /// The LP solution is integral.
    Done,
}

struct Search<'a> {
    problem: &'a MilpProblem,
    options: &'a MilpOptions,
    budget: usize,
    propagator: Propagator,
    incumbent: f64,
    incumbent_values: Vec<f64>,
    /// Cutoff and target in minimization form.
    cutoff: f64,
    target: f64,
    /// Smallest bound among regions discarded by bound.
    pruned_bound: f64,
    nodes: usize,
    open: BinaryHeap<Open>,
    held: usize,
    root: Arc<Tableau>,
    tableau_bytes: usize,
    pseudocosts: Pseudocosts,
}

/// Solves `p` to within `options.gap_tol` of the optimum.
///
/// When the node limit is hit, the incumbent (if any) is returned with status
/// `IterationLimit` and the best remaining bound.
pub fn solve_milp(p: &MilpProblem, options: &MilpOptions) -> Result<SolveResult, OptimError> {
    p.validate()?;
    let lp = &p.base;
    let sign = sense_sign(lp.sense);

    let mut root = Tableau::new(lp, options.feas_tol);
    match root.solve_cold(pivot_budget(lp)) {
        Outcome::Optimal => {}
        Outcome::Infeasible => return Ok(SolveResult::without_solution(SolveStatus::Infeasible, 1)),
        Outcome::Unbounded => return Ok(SolveResult::without_solution(SolveStatus::Unbounded, 1)),
        Outcome::IterationLimit => {
            return Ok(SolveResult::without_solution(SolveStatus::IterationLimit, 1))
        }
    }
    root.refresh();
    let root_bound = root.objective();
    let costs: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();

    let mut search = Search {
        problem: p,
        options,
        budget: pivot_budget(lp),
        propagator: Propagator::new(lp, &costs, &p.integer_vars, options.int_tol),
        incumbent: f64::INFINITY,
        incumbent_values: Vec::new(),
        cutoff: options.cutoff.map_or(f64::INFINITY, |c| sign * c),
        target: options.target.map_or(f64::NEG_INFINITY, |c| sign * c),
        pruned_bound: f64::INFINITY,
        nodes: 0,
        open: BinaryHeap::new(),
        held: 0,
        tableau_bytes: root.memory_bytes(),
        root: Arc::new(root),
        pseudocosts: Pseudocosts::new(lp.num_variables()),
    };
    search.seed_incumbents();

    let mut current = Some(Node {
        parent: Some(Arc::clone(&search.root)),
        lo: lp.lower.clone(),
        hi: lp.upper.clone(),
        bound: root_bound,
        origin: None,
    });
    let mut limit_hit = false;
    let mut target_hit = false;
    loop {
        let node = match current.take() {
            Some(node) => node,
            None => match search.pop() {
                Some(node) => node,
                None => break,
            },
        };
        if search.incumbent <= search.target {
            target_hit = true;
            search.park(node);
            break;
        }
        if search.nodes >= options.node_limit || options.deadline.is_some_and(|d| Instant::now() >= d) {
            limit_hit = true;
            search.park(node);
            break;
        }
        search.nodes += 1;
        current = search.process(node);
    }

    let open_bound = search.open.iter().map(|n| n.0.bound).fold(f64::INFINITY, f64::min);
    let lower = open_bound.min(search.pruned_bound).min(search.incumbent);
    debug!(
        "branch-and-bound: {} nodes, incumbent {}, bound {}",
        search.nodes, search.incumbent, lower
    );
    if search.incumbent_values.is_empty() {
        let status = if limit_hit { SolveStatus::IterationLimit } else { SolveStatus::Infeasible };
        // Without an incumbent, the bound covers the regions discarded by
        // the cutoff and any left open.
        let mut r = SolveResult::without_solution(status, search.nodes);
        if limit_hit || lower.is_finite() {
            r.bound = sign * lower;
        }
        return Ok(r);
    }
    let values = search.incumbent_values;
    let objective = lp.objective_value(&values);
    Ok(SolveResult {
        status: if target_hit {
            SolveStatus::TargetReached
        } else if limit_hit {
            SolveStatus::IterationLimit
        } else {
            SolveStatus::Optimal
        },
        objective,
        values,
        bound: sign * lower,
        gap: (search.incumbent - lower).max(0.0),
        work: search.nodes,
    })
}

impl<'a> Search<'a> {
    fn lp(&self) -> &LinearProgram {
        &self.problem.base
    }

    /// Nodes whose bound is at or above this are not worth exploring.
    fn threshold(&self) -> f64 {
        self.incumbent.min(self.cutoff) - self.options.gap_tol
    }

    /// Records a region discarded because its bound reached `bound`.
    fn prune(&mut self, bound: f64) {
        self.pruned_bound = self.pruned_bound.min(bound);
    }

    fn park(&mut self, mut node: Node) {
        if node.parent.is_some() {
            if (self.held + 1) * self.tableau_bytes <= PARKED_BYTES {
                self.held += 1;
            } else {
                node.parent = None;
            }
        }
        self.open.push(Open(node));
    }

    fn pop(&mut self) -> Option<Node> {
        while let Some(Open(node)) = self.open.pop() {
            if node.parent.is_some() {
                self.held -= 1;
            }
            if node.bound >= self.threshold() {
                self.prune(node.bound);
                continue;
            }
            return Some(node);
        }
        None
    }

    /// Tries the supplied hints and the rounded root relaxation as incumbents.
    fn seed_incumbents(&mut self) {
        let ints = self.problem.integer_vars.clone();
        let root = Arc::clone(&self.root);
        let mut candidates: Vec<Vec<f64>> = self.problem.hints.clone();
        candidates.push(ints.iter().map(|&j| root.value(j).round().clamp(0.0, 1.0)).collect());
        for assignment in candidates {
            let mut tab = (*root).clone();
            let mut ok = true;
            for (&j, &v) in ints.iter().zip(&assignment) {
                let v = v.round();
                if v < self.lp().lower[j] || v > self.lp().upper[j] {
                    ok = false;
                    break;
                }
                tab.fix(j, v);
            }
            if ok && tab.solve_warm(self.budget) == Outcome::Optimal {
                tab.refresh();
                self.offer(&tab);
            }
        }
    }

    fn offer(&mut self, tab: &Tableau) {
        let obj = tab.objective();
        if obj < self.incumbent {
            let values = tab.structural_values();
            if self.lp().max_violation(&values) <= 1e-6 {
                self.incumbent = obj;
                self.incumbent_values = values;
            }
        }
    }

    /// The node's LP, re-optimized from the closest available tableau.
    fn relax(&mut self, parent: Option<Arc<Tableau>>, lo: &[f64], hi: &[f64]) -> Option<Tableau> {
        let base = parent.unwrap_or_else(|| Arc::clone(&self.root));
        let mut tab = Arc::try_unwrap(base).unwrap_or_else(|shared| (*shared).clone());
        for j in 0..lo.len() {
            if tab.bounds(j) != (lo[j], hi[j]) {
                tab.set_bounds(j, lo[j], hi[j]);
            }
        }
        match tab.solve_warm(self.budget) {
            Outcome::Optimal => {
                tab.refresh();
                Some(tab)
            }
            Outcome::Infeasible => None,
            Outcome::Unbounded | Outcome::IterationLimit => self.cold_resolve(lo, hi),
        }
    }

    /// Rebuilds a node from scratch when warm re-optimization stalls.
    fn cold_resolve(&self, lo: &[f64], hi: &[f64]) -> Option<Tableau> {
        let mut lp = self.lp().clone();
        lp.lower = lo.to_vec();
        lp.upper = hi.to_vec();
        let mut tab = Tableau::new(&lp, self.options.feas_tol);
        match tab.solve_cold(self.budget) {
            Outcome::Optimal => {
                tab.refresh();
                Some(tab)
            }
            _ => None,
        }
    }

    /// Solves a node; returns the child to dive into, if any.
    fn process(&mut self, node: Node) -> Option<Node> {
        let Node { parent, mut lo, mut hi, bound, origin } = node;
        let threshold = self.threshold();
        if bound >= threshold {
            self.prune(bound);
            return None;
        }
        if !self.propagator.run(&mut lo, &mut hi, threshold) {
            self.prune(threshold);
            return None;
        }
        let mut tab = self.relax(parent, &lo, &hi)?;
        let mut obj = tab.objective();
        if let Some((j, dist, up, parent_obj)) = origin {
            self.pseudocosts.record(j, up, (obj - parent_obj).max(0.0) / dist);
        }
        if obj >= threshold {
            self.prune(obj);
            return None;
        }
        self.fix_by_reduced_cost(&tab, obj, &mut lo, &mut hi);

        let mut rounds = 0;
        let (var, down_bound, up_bound, up_first) = loop {
            match self.choose_branch(&mut tab, &mut obj, &mut lo, &mut hi, rounds >= MAX_STRONG_ROUNDS) {
                None => return None,
                Some(Branching::Done) => {
                    self.offer(&tab);
                    return None;
                }
                Some(Branching::On(j, d, u, first)) => break (j, d, u, first),
                Some(Branching::Tightened) => rounds += 1,
            }
        };

        let value = tab.value(var);
        let parent = Arc::new(tab);
        let mut down = Node {
            parent: Some(Arc::clone(&parent)),
            lo: lo.clone(),
            hi: hi.clone(),
            bound: down_bound,
            origin: Some((var, value, false, obj)),
        };
        down.hi[var] = 0.0;
        let mut up = Node {
            parent: Some(parent),
            lo,
            hi,
            bound: up_bound,
            origin: Some((var, 1.0 - value, true, obj)),
        };
        up.lo[var] = 1.0;
        if up_first {
            self.park(down);
            Some(up)
        } else {
            self.park(up);
            Some(down)
        }
    }

    /// Fixes binaries that cannot move off their bound without the LP
    /// objective reaching the threshold.
    fn fix_by_reduced_cost(&mut self, tab: &Tableau, obj: f64, lo: &mut [f64], hi: &mut [f64]) {
        let threshold = self.threshold();
        if !threshold.is_finite() {
            return;
        }
        let mut fixed = false;
        for &j in &self.problem.integer_vars {
            if lo[j] == hi[j] {
                continue;
            }
            let Some(d) = tab.reduced_cost(j) else { continue };
            let v = tab.value(j);
            if d > 0.0 && v == lo[j] && obj + d >= threshold {
                hi[j] = lo[j];
                fixed = true;
            } else if d < 0.0 && v == hi[j] && obj - d >= threshold {
                lo[j] = hi[j];
                fixed = true;
            }
        }
        if fixed {
            self.prune(threshold);
        }
    }

    /// Picks the branching variable. Strong branching may instead tighten a
    /// bound of the node (then the caller asks again) or prune it (`None`).
    fn choose_branch(
        &mut self,
        tab: &mut Tableau,
        obj: &mut f64,
        lo: &mut [f64],
        hi: &mut [f64],
        no_strong: bool,
    ) -> Option<Branching> {
        let tol = self.options.int_tol;
        let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
        for &j in &self.problem.integer_vars {
            let v = tab.value(j);
            if (v - v.round()).abs() > tol {
                let d = self.pseudocosts.estimate(j, false, v);
                let u = self.pseudocosts.estimate(j, true, 1.0 - v);
                cands.push((j, v, d, u));
            }
        }
        if cands.is_empty() {
            return Some(Branching::Done);
        }
        cands.sort_by(|a, b| score(b.2, b.3).total_cmp(&score(a.2, a.3)));

        let threshold = self.threshold();
        let mut best: Option<(usize, f64, f64, f64, bool)> = None;
        let mut since_best = 0;
        for &(j, _, d_est, u_est) in cands.iter().take(STRONG_CANDIDATES) {
            let exact = !(no_strong || self.pseudocosts.reliable(j));
            let (down, up) = if !exact {
                (*obj + d_est, *obj + u_est)
            } else {
                let down = self.strong(tab, j, 0.0);
                let up = self.strong(tab, j, 1.0);
                let v = tab.value(j);
                if down.is_finite() {
                    self.pseudocosts.record(j, false, (down - *obj).max(0.0) / v);
                }
                if up.is_finite() {
                    self.pseudocosts.record(j, true, (up - *obj).max(0.0) / (1.0 - v));
                }
                (down, up)
            };
            let down_dead = exact && down >= threshold;
            let up_dead = exact && up >= threshold;
            if down_dead || up_dead {
                self.prune(threshold);
                if down_dead && up_dead {
                    return None;
                }
                // Only one side survives: move the node there and re-solve.
                let v = if down_dead { 1.0 } else { 0.0 };
                lo[j] = v;
                hi[j] = v;
                tab.set_bounds(j, v, v);
                match tab.solve_warm(self.budget) {
                    Outcome::Optimal => tab.refresh(),
                    _ => {
                        *tab = self.cold_resolve(lo, hi)?;
                    }
                }
                *obj = tab.objective();
                if *obj >= self.threshold() {
                    self.prune(*obj);
                    return None;
                }
                return Some(Branching::Tightened);
            }
            let s = score(down - *obj, up - *obj);
            if best.as_ref().map_or(true, |b| s > b.3) {
                best = Some((j, down, up, s, exact));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STRONG_LOOKAHEAD {
                    break;
                }
            }
        }
        let (j, down, up, _, exact) = best.expect("at least one candidate");
        // Pseudocost estimates only pick the dive direction; parked nodes
        // need valid bounds.
        let up_first = if (up - down).abs() > 1e-9 { up < down } else { tab.value(j) >= 0.5 };
        let (down, up) = if exact { (down.max(*obj), up.max(*obj)) } else { (*obj, *obj) };
        Some(Branching::On(j, down, up, up_first))
    }

    /// Truncated dual simplex bound for fixing `j` to `value`. Infeasible
    /// children give `+∞`.
    fn strong(&self, tab: &Tableau, j: usize, value: f64) -> f64 {
        let mut child = tab.clone();
        child.fix(j, value);
        match child.solve_dual(STRONG_PIVOTS) {
            Outcome::Infeasible => f64::INFINITY,
            _ => child.objective(),
        }
    }
}

//! Best responses against a fixed mixed strategy.
//!
//! The responder maximizes `Σ_k P_k u(S, O_k)` over its reachable set, where
//! `O_k` are the opponent's strategies. Both utilities are odd in the
//! per-node difference, so Player 2's problem has the same form with its own
//! strategy in the first slot; callers negate the value to get Player 1's
//! payoff.
//!
//! Strategies enter through per-type flows along the admissible moves, which
//! describe the reachable set exactly. Three MILP models are available;
//! [`Formulation::Auto`] (the default) picks incremental for one type and
//! compact for three.
//!
//! * [`Formulation::Incremental`]. Each form's clamped ramp
//!   `min(1, max(−1, g/C))` against each opponent strategy is written with
//!   ordered breakpoint binaries, so fixing a binary tightens every term that
//!   shares the node. Cheapest when there is a single form.
//! * [`Formulation::Compact`]. The node outcome is
//!   `o = min(1, max(−1, median(g)/C))` and the median of three values is the
//!   smallest pairwise maximum. Because `o` is maximized, it only needs upper
//!   bounds: one binary `u_i` per form marks it as "used", with
//!   `o ≤ g_i/C + M_i (1 − u_i)` and `o ≤ −1 + 2(u_a + u_b)` for every pair.
//!   Any two used forms bound `o` by the smaller of them, so the best choice
//!   recovers the median. One type is the special case of a single form.
//! * [`Formulation::BigM`]. The clamp is written as `s − t − 1` with
//!   `s = max((π + C)/C, 0)`, `t = max((π − C)/C, 0)`, and the median as
//!   `π = g1 + p − q` with `p = max(g2−g1, g2−g3, 0)` and
//!   `q = max(g1−g3, g2−g3, 0)`; each `max` is a big-M block with a binary.
//!
//! Every big-M constant is computed per (opponent strategy, node) pair from
//! the exact range of each linear form over the reachable box. Binaries
//! whose value that range already decides are fixed and their rows reduced.

use blotto_optim::external::ExternalSolver;
use blotto_optim::{
    solve_milp, LinearProgram, MilpOptions, MilpProblem, Relation, Sense, SolveStatus,
};
use log::debug;

use crate::error::{BlottoError, Result};
use crate::game::{Player, PlayerSpace};
use crate::matrix_game::MixedStrategy;
use crate::payoff::{median3, sgn_clamped, CdhForms, IntrinsicMatrix, Strategy, UtilityModel};

/// Flows below this are dropped when a strategy is read back.
pub const FLOW_ZERO: f64 = 1e-9;
/// Extra room added to every computed big-M constant.
const BIG_M_SLACK: f64 = 1e-7;
/// Candidate strategies tried as starting incumbents.
const MAX_HINTS: usize = 4;

/// Big-M constants of the blocks for one (opponent strategy, node) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMBounds {
    pub s: f64,
    pub t: f64,
    pub dp: f64,
    pub dq: f64,
    pub pq: f64,
}

fn l1(c: [f64; 3]) -> f64 {
    c.iter().map(|v| v.abs()).sum()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Bounds valid for any per-node difference in `[−1, 1]³`.
pub fn compute_big_m(intrinsic: &IntrinsicMatrix, c: f64) -> Result<BigMBounds> {
    let f = CdhForms::new(intrinsic)?;
    let gmax = f.g.iter().map(|g| l1(*g)).fold(0.0, f64::max);
    let g21 = l1(sub(f.g[1], f.g[0]));
    let g13 = l1(sub(f.g[0], f.g[2]));
    let g23 = l1(sub(f.g[1], f.g[2]));
    Ok(BigMBounds {
        s: (gmax + c) / c,
        t: (gmax + c) / c,
        dp: g21,
        dq: g13,
        pq: (g21 + g23).max(g13 + g23),
    })
}

/// The one-type analogue: the difference lies in `[−1, 1]`.
pub fn homogeneous_big_m(c: f64) -> BigMBounds {
    BigMBounds { s: (1.0 + c) / c, t: (1.0 + c) / c, dp: 0.0, dq: 0.0, pq: 0.0 }
}

#[derive(Debug, Clone)]
pub struct BestResponseProblem<'a> {
    pub responder: Player,
    /// The responder's reachable set.
    pub space: &'a PlayerSpace,
    pub opponent: &'a MixedStrategy,
    pub model: &'a UtilityModel,
}

impl<'a> BestResponseProblem<'a> {
    /// `Σ_k P_k u(s, O_k)` from the responder's point of view.
    pub fn objective(&self, s: &Strategy) -> Result<f64> {
        let mut total = 0.0;
        for (p, o) in self.opponent.iter() {
            if p > 0.0 {
                total += p * self.model.utility(s, o)?;
            }
        }
        Ok(total)
    }

    fn check(&self) -> Result<()> {
        if self.opponent.is_empty() {
            return Err(BlottoError::Dimension("opponent mix is empty".into()));
        }
        let (m, n) = (self.space.types(), self.space.nodes());
        if m != self.model.types() {
            return Err(BlottoError::Dimension(format!(
                "responder has {m} types, the utility needs {}",
                self.model.types()
            )));
        }
        for (_, o) in self.opponent.iter() {
            if o.types() != m || o.nodes() != n {
                return Err(BlottoError::Dimension("opponent strategy shape differs".into()));
            }
        }
        if (0..m).any(|t| self.space.vertices(t).is_empty()) {
            return Err(BlottoError::Structural("empty reachable set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Incremental for one type, compact for three.
    #[default]
    Auto,
    Incremental,
    Compact,
    BigM,
}

#[derive(Debug, Clone)]
pub struct BrOptions {
    /// Search options. Its `cutoff` and `target` are in utility terms.
    pub milp: MilpOptions,
    pub formulation: Formulation,
    /// Big-M model only: keep the upper-bound rows and binary of every `t`
    /// block. They are implied at the optimum (t only lowers the objective)
    /// and are dropped by default.
    pub full_system: bool,
    /// Fix binaries decided by the variable ranges and drop the rows they
    /// make redundant.
    pub presolve: bool,
    /// Route the MILP to an external solver instead of the built-in one.
    pub external: Option<ExternalSolver>,
}

impl Default for BrOptions {
    fn default() -> Self {
        Self {
            milp: MilpOptions::default(),
            formulation: Formulation::Auto,
            full_system: false,
            presolve: true,
            external: None,
        }
    }
}

/// Which block a binary belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum BinKind {
    S,
    T,
    Dp,
    P,
    Dq,
    Q,
    /// Compact and incremental models: form `i` bounds the outcome.
    Used(usize),
    /// Incremental model: form `i` of the node reaches this value.
    Breakpoint(usize, f64),
}

/// A formulated best-response MILP.
#[derive(Debug, Clone)]
pub struct BrFormulation {
    pub milp: MilpProblem,
    /// Flow columns per type.
    pub flows: Vec<Vec<FlowColumn>>,
    /// Added to the MILP objective to get `Σ_k P_k u(S, O_k)`.
    pub constant: f64,
    /// Big-M constants per (opponent index, node), for retained opponents.
    pub big_m: Vec<((usize, usize), BigMBounds)>,
    binaries: Vec<(BinKind, usize, usize)>,
}

/// A linear expression `Σ c·x + constant`.
#[derive(Debug, Clone, Default)]
struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn var(j: usize) -> Self {
        Affine { terms: vec![(j, 1.0)], constant: 0.0 }
    }

    fn plus(mut self, other: &Affine, scale: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(j, c)| (j, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    fn shift(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    fn scale(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn max0(self) -> Range {
        Range { lo: self.lo.max(0.0), hi: self.hi.max(0.0) }
    }

    fn max(self, o: Range) -> Range {
        Range { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }

    fn affine(self, scale: f64, shift: f64) -> Range {
        let (a, b) = (self.lo * scale + shift, self.hi * scale + shift);
        Range { lo: a.min(b), hi: a.max(b) }
    }

    fn magnitude(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

struct Builder<'o> {
    milp: MilpProblem,
    opts: &'o BrOptions,
    binaries: Vec<(BinKind, usize, usize)>,
}

impl<'o> Builder<'o> {
    /// Adds `expr REL 0`.
    fn row(&mut self, expr: Affine, rel: Relation) {
        self.milp.base.add_constraint(expr.terms, rel, -expr.constant);
    }

    fn binary(&mut self, name: String, kind: BinKind, k: usize, j: usize, fixed: Option<f64>) -> usize {
        let b = self.milp.add_binary(name, 0.0);
        if let Some(v) = fixed {
            self.milp.base.lower[b] = v;
            self.milp.base.upper[b] = v;
        }
        self.binaries.push((kind, k, j));
        b
    }

    /// Decided value of `max(f, 0)`'s binary given the range of `f`.
    fn decided(&self, r: Range) -> Option<f64> {
        if !self.opts.presolve {
            None
        } else if r.lo >= 0.0 {
            Some(1.0)
        } else if r.hi <= 0.0 {
            Some(0.0)
        } else {
            None
        }
    }

    /// `y = max(f, 0)` as a big-M block; returns the column of `y`.
    fn max0_block(
        &mut self,
        name: &str,
        kind: BinKind,
        (k, j): (usize, usize),
        f: &Affine,
        range: Range,
        big_m: f64,
    ) -> usize {
        let out = range.max0();
        let y = self.milp.base.add_variable(format!("{name}_{k}_{j}"), 0.0, out.hi + BIG_M_SLACK, 0.0);
        let fixed = self.decided(range);
        let z = self.binary(format!("z{name}_{k}_{j}"), kind, k, j, fixed);
        let yv = Affine::var(y);
        match fixed {
            Some(v) if v == 1.0 => {
                self.row(yv.plus(f, -1.0), Relation::Eq);
            }
            Some(_) => {
                self.milp.base.upper[y] = 0.0;
            }
            None => {
                // y ≥ f, y ≤ U z, y ≤ f + U (1 − z).
                self.row(yv.clone().plus(f, -1.0), Relation::Ge);
                self.row(yv.clone().plus(&Affine::var(z), -big_m), Relation::Le);
                let mut e = yv.plus(f, -1.0).shift(-big_m);
                e.terms.push((z, big_m));
                self.row(e, Relation::Le);
            }
        }
        y
    }

    /// `y = max(base, f)` for a nonnegative `base` column.
    fn max_block(
        &mut self,
        name: &str,
        kind: BinKind,
        (k, j): (usize, usize),
        base: (usize, Range),
        f: &Affine,
        f_range: Range,
        big_m: f64,
    ) -> usize {
        let out = base.1.max(f_range);
        let y = self.milp.base.add_variable(
            format!("{name}_{k}_{j}"),
            out.lo - BIG_M_SLACK,
            out.hi + BIG_M_SLACK,
            0.0,
        );
        // The binary is 1 when the base term is the larger one.
        let gap = Range { lo: base.1.lo - f_range.hi, hi: base.1.hi - f_range.lo };
        let fixed = self.decided(gap);
        let z = self.binary(format!("z{name}_{k}_{j}"), kind, k, j, fixed);
        let yv = Affine::var(y);
        let bv = Affine::var(base.0);
        match fixed {
            Some(v) if v == 1.0 => self.row(yv.plus(&bv, -1.0), Relation::Eq),
            Some(_) => self.row(yv.plus(f, -1.0), Relation::Eq),
            None => {
                self.row(yv.clone().plus(&bv, -1.0), Relation::Ge);
                self.row(yv.clone().plus(f, -1.0), Relation::Ge);
                // y ≤ base + U (1 − z)
                let mut e = yv.clone().plus(&bv, -1.0).shift(-big_m);
                e.terms.push((z, big_m));
                self.row(e, Relation::Le);
                // y ≤ f + U z
                let mut e = yv.plus(f, -1.0);
                e.terms.push((z, -big_m));
                self.row(e, Relation::Le);
            }
        }
        y
    }

    /// Adds the `s` and `t` blocks of the clamp for `pi` and returns the
    /// objective contribution columns `(s, t)`.
    fn clamp_blocks(
        &mut self,
        kj: (usize, usize),
        pi: &Affine,
        pi_range: Range,
        c: f64,
        bounds: &mut BigMBounds,
    ) -> (usize, usize) {
        let fs = pi.clone().shift(c).scale(1.0 / c);
        let fs_range = pi_range.affine(1.0 / c, 1.0);
        let ft = pi.clone().shift(-c).scale(1.0 / c);
        let ft_range = pi_range.affine(1.0 / c, -1.0);
        bounds.s = bounds.s.min(fs_range.magnitude() + BIG_M_SLACK);
        bounds.t = bounds.t.min(ft_range.magnitude() + BIG_M_SLACK);
        let s = self.max0_block("s", BinKind::S, kj, &fs, fs_range, bounds.s);
        let t = if self.opts.full_system {
            self.max0_block("t", BinKind::T, kj, &ft, ft_range, bounds.t)
        } else {
            let (k, j) = kj;
            let out = ft_range.max0();
            let t = self.milp.base.add_variable(format!("t_{k}_{j}"), 0.0, out.hi + BIG_M_SLACK, 0.0);
            if out.hi <= 0.0 && self.opts.presolve {
                self.milp.base.upper[t] = 0.0;
            } else {
                self.row(Affine::var(t).plus(&ft, -1.0), Relation::Ge);
            }
            t
        };
        (s, t)
    }
}

/// A column carrying mass of one type from `source` to `dest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowColumn {
    pub column: usize,
    pub source: usize,
    pub dest: usize,
}

/// Strategy entries as affine expressions in the flow columns.
///
/// Each source splits its mass `d_{t,i}` over its admissible destinations,
/// which is exactly the reachable set; sources with a single destination or
/// no mass contribute constants.
struct StrategyColumns {
    flows: Vec<Vec<FlowColumn>>,
    entries: Vec<Vec<Affine>>,
    range: Vec<Vec<Range>>,
}

fn strategy_columns(b: &mut Builder, space: &PlayerSpace) -> StrategyColumns {
    let (m, n) = (space.types(), space.nodes());
    let mut flows = Vec::with_capacity(m);
    let mut entries = Vec::with_capacity(m);
    let mut range = Vec::with_capacity(m);
    for t in 0..m {
        let d = space.distribution().row(t);
        let mut row: Vec<Affine> = vec![Affine::default(); n];
        let mut cols = Vec::new();
        for (source, dests) in space.moves().iter().enumerate() {
            let mass = d[source];
            if mass == 0.0 {
                continue;
            }
            if dests.len() == 1 {
                row[dests[0]].constant += mass;
                continue;
            }
            let mut outflow = Affine { terms: Vec::with_capacity(dests.len()), constant: -mass };
            for &dest in dests {
                let column = b.milp.base.add_variable(format!("f_{t}_{source}_{dest}"), 0.0, mass, 0.0);
                row[dest].terms.push((column, 1.0));
                outflow.terms.push((column, 1.0));
                cols.push(FlowColumn { column, source, dest });
            }
            b.row(outflow, Relation::Eq);
        }
        let verts = space.vertices(t);
        range.push(
            (0..n)
                .map(|j| Range {
                    lo: verts.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min),
                    hi: verts.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max),
                })
                .collect(),
        );
        flows.push(cols);
        entries.push(row);
    }
    StrategyColumns { flows, entries, range }
}

/// `coef · S_{·,j} − coef · o_{·,j}` with its exact range.
fn linear_form(sc: &StrategyColumns, j: usize, coef: &[f64], opp: &Strategy) -> (Affine, Range) {
    let mut e = Affine::default();
    let (mut lo, mut hi) = (0.0, 0.0);
    for (t, &c) in coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        e = e.plus(&sc.entries[t][j], c);
        e.constant -= c * opp.get(t, j);
        let r = sc.range[t][j];
        let (a, b) = (c * r.lo, c * r.hi);
        lo += a.min(b);
        hi += a.max(b);
    }
    let shift = -coef.iter().enumerate().map(|(t, &c)| c * opp.get(t, j)).sum::<f64>();
    (e, Range { lo: lo + shift, hi: hi + shift })
}

fn finish(
    b: Builder,
    sc: StrategyColumns,
    objective_terms: Vec<(usize, f64)>,
    constant: f64,
    big_m: Vec<((usize, usize), BigMBounds)>,
) -> BrFormulation {
    let mut milp = b.milp;
    for (j, c) in objective_terms {
        milp.base.objective[j] += c;
    }
    BrFormulation { milp, flows: sc.flows, constant, big_m, binaries: b.binaries }
}

/// One-type best response.
pub fn formulate_homogeneous_br(p: &BestResponseProblem, opts: &BrOptions) -> Result<BrFormulation> {
    p.check()?;
    let UtilityModel::Homogeneous { c } = *p.model else {
        return Err(BlottoError::Dimension("homogeneous formulation needs one type".into()));
    };
    let mut b = Builder { milp: MilpProblem::new(LinearProgram::new(Sense::Maximize)), opts, binaries: Vec::new() };
    let sc = strategy_columns(&mut b, p.space);
    let global = homogeneous_big_m(c);
    let mut objective = Vec::new();
    let mut constant = 0.0;
    let mut big_m = Vec::new();
    for (k, (pk, o)) in p.opponent.iter().enumerate() {
        if pk <= 0.0 {
            continue;
        }
        for j in 0..p.space.nodes() {
            let (delta, range) = linear_form(&sc, j, &[1.0], o);
            let mut bounds = global;
            let (s, t) = b.clamp_blocks((k, j), &delta, range, c, &mut bounds);
            objective.push((s, pk));
            objective.push((t, -pk));
            constant -= pk;
            big_m.push(((k, j), bounds));
        }
    }
    Ok(finish(b, sc, objective, constant, big_m))
}

/// Three-type (cyclic dominance) best response.
pub fn formulate_cdh_br(p: &BestResponseProblem, opts: &BrOptions) -> Result<BrFormulation> {
    p.check()?;
    let UtilityModel::Cdh(params) = p.model else {
        return Err(BlottoError::Dimension("CDH formulation needs three types".into()));
    };
    let forms = CdhForms::new(&params.intrinsic)?;
    let c = params.threshold_c;
    let global = compute_big_m(&params.intrinsic, c)?;
    let g = forms.g;
    let col = |r: usize| [g[r][0], g[r][1], g[r][2]];
    let c1 = col(0);
    let c21 = sub(col(1), col(0));
    let c13 = sub(col(0), col(2));
    let c23 = sub(col(1), col(2));

    let mut b = Builder { milp: MilpProblem::new(LinearProgram::new(Sense::Maximize)), opts, binaries: Vec::new() };
    let sc = strategy_columns(&mut b, p.space);
    let mut objective = Vec::new();
    let mut constant = 0.0;
    let mut big_m = Vec::new();
    for (k, (pk, o)) in p.opponent.iter().enumerate() {
        if pk <= 0.0 {
            continue;
        }
        for j in 0..p.space.nodes() {
            let kj = (k, j);
            let (e1, r1) = linear_form(&sc, j, &c1, o);
            let (e21, r21) = linear_form(&sc, j, &c21, o);
            let (e13, r13) = linear_form(&sc, j, &c13, o);
            let (e23, r23) = linear_form(&sc, j, &c23, o);
            let rg: Vec<Range> = (0..3).map(|i| linear_form(&sc, j, &col(i), o).1).collect();

            let mut bounds = global;
            bounds.dp = bounds.dp.min(r21.magnitude() + BIG_M_SLACK);
            bounds.dq = bounds.dq.min(r13.magnitude() + BIG_M_SLACK);
            let rdp = r21.max0();
            let rdq = r13.max0();
            let pq = (r23.hi - rdp.lo)
                .max(rdp.hi - r23.lo)
                .max(r23.hi - rdq.lo)
                .max(rdq.hi - r23.lo)
                .max(0.0);
            bounds.pq = bounds.pq.min(pq + BIG_M_SLACK);

            let dp = b.max0_block("dp", BinKind::Dp, kj, &e21, r21, bounds.dp);
            let pv = b.max_block("p", BinKind::P, kj, (dp, rdp), &e23, r23, bounds.pq);
            let dq = b.max0_block("dq", BinKind::Dq, kj, &e13, r13, bounds.dq);
            let qv = b.max_block("q", BinKind::Q, kj, (dq, rdq), &e23, r23, bounds.pq);

            // π_oi = g1 + p − q; the median is monotone in each form.
            let pi = e1.plus(&Affine::var(pv), 1.0).plus(&Affine::var(qv), -1.0);
            let pi_range = Range {
                lo: median3([rg[0].lo, rg[1].lo, rg[2].lo]),
                hi: median3([rg[0].hi, rg[1].hi, rg[2].hi]),
            };
            debug_assert!(r1.lo <= r1.hi);
            let (s, t) = b.clamp_blocks(kj, &pi, pi_range, c, &mut bounds);
            objective.push((s, pk));
            objective.push((t, -pk));
            constant -= pk;
            big_m.push((kj, bounds));
        }
    }
    Ok(finish(b, sc, objective, constant, big_m))
}

impl<'o> Builder<'o> {
    /// Compact model of one term; returns the outcome column.
    fn compact_term(&mut self, (k, j): (usize, usize), forms: &[(Affine, Range)], c: f64) -> usize {
        let presolve = self.opts.presolve;
        let (lo, hi) = match forms {
            [(_, r)] => (r.lo, r.hi),
            _ => (
                median3([forms[0].1.lo, forms[1].1.lo, forms[2].1.lo]),
                median3([forms[0].1.hi, forms[1].1.hi, forms[2].1.hi]),
            ),
        };
        let clamp = |x: f64| (x / c).clamp(-1.0, 1.0);
        let (olo, ohi) = if presolve { (clamp(lo), clamp(hi)) } else { (-1.0, 1.0) };
        let o = self.milp.base.add_variable(format!("o_{k}_{j}"), olo, ohi, 0.0);
        if presolve && olo >= ohi {
            return o;
        }
        // None: a free binary column; Some(v): decided by the ranges.
        let mut used: Vec<std::result::Result<usize, f64>> = Vec::with_capacity(forms.len());
        for (i, (f, r)) in forms.iter().enumerate() {
            if presolve && r.hi / c < olo {
                used.push(Err(0.0));
                continue;
            }
            if presolve && r.lo / c >= ohi {
                used.push(Err(1.0));
                continue;
            }
            let u = self.binary(format!("u{i}_{k}_{j}"), BinKind::Used(i), k, j, None);
            // o ≤ f/C + M (1 − u)
            let big_m = (ohi - r.lo / c).max(0.0) + BIG_M_SLACK;
            let mut e = Affine::var(o).plus(f, -1.0 / c).shift(-big_m);
            e.terms.push((u, big_m));
            self.row(e, Relation::Le);
            used.push(Ok(u));
        }
        let covers: &[&[usize]] = if forms.len() == 1 { &[&[0]] } else { &[&[0, 1], &[0, 2], &[1, 2]] };
        for cover in covers {
            if cover.iter().any(|&i| used[i] == Err(1.0)) {
                continue;
            }
            let vars: Vec<usize> = cover.iter().filter_map(|&i| used[i].ok()).collect();
            if vars.is_empty() {
                self.milp.base.upper[o] = olo.min(-1.0).max(self.milp.base.lower[o]);
                continue;
            }
            // o ≤ −1 + 2 Σ u
            let mut e = Affine::var(o).shift(1.0);
            e.terms.extend(vars.iter().map(|&u| (u, -2.0)));
            self.row(e, Relation::Le);
        }
        // Two used forms always suffice; ruling out the third removes
        // equivalent solutions from the search.
        let fixed = used.iter().filter(|u| **u == Err(1.0)).count();
        let free: Vec<usize> = used.iter().filter_map(|u| u.ok()).collect();
        if forms.len() == 3 && free.len() + fixed > 2 && fixed <= 2 {
            let e = Affine { terms: free.iter().map(|&u| (u, 1.0)).collect(), constant: fixed as f64 - 2.0 };
            self.row(e, Relation::Le);
        }
        o
    }
}

fn formulate_compact(p: &BestResponseProblem, opts: &BrOptions) -> Result<BrFormulation> {
    p.check()?;
    let coefs: Vec<Vec<f64>> = match p.model {
        UtilityModel::Homogeneous { .. } => vec![vec![1.0]],
        UtilityModel::Cdh(params) => {
            CdhForms::new(&params.intrinsic)?.g.iter().map(|r| r.to_vec()).collect()
        }
    };
    let c = p.model.threshold();
    let mut b = Builder { milp: MilpProblem::new(LinearProgram::new(Sense::Maximize)), opts, binaries: Vec::new() };
    let sc = strategy_columns(&mut b, p.space);
    let mut objective = Vec::new();
    for (k, (pk, o)) in p.opponent.iter().enumerate() {
        if pk <= 0.0 {
            continue;
        }
        for j in 0..p.space.nodes() {
            let forms: Vec<(Affine, Range)> = coefs.iter().map(|cf| linear_form(&sc, j, cf, o)).collect();
            let col = b.compact_term((k, j), &forms, c);
            objective.push((col, pk));
        }
    }
    Ok(finish(b, sc, objective, 0.0, Vec::new()))
}

/// Splits one form of one node at the ramp ends of every opponent.
///
/// `x = lo + Σ_r δ_r` with `0 ≤ δ_r ≤ len_r`; a binary at a breakpoint
/// forces the segments before it to be full when set and those after it to
/// be empty when clear. Only breakpoints where some ramp starts need one:
/// between them every ramp is concave, and filling segments in order is
/// optimal for all of them at once because the outcome only rewards larger
/// ramp values.
struct Segments {
    lo: f64,
    /// `(start, end, column)` per segment.
    parts: Vec<(f64, f64, usize)>,
}

impl Segments {
    /// `clamp((x − a)/C)` as an affine expression and its range.
    fn ramp(&self, a: f64, c: f64) -> (Affine, Range) {
        let at = |x: f64| ((x - a) / c).clamp(-1.0, 1.0);
        let mut e = Affine { terms: Vec::new(), constant: at(self.lo) };
        let mut hi = self.lo;
        for &(start, end, col) in &self.parts {
            let mid = 0.5 * (start + end);
            if mid > a - c && mid < a + c {
                e.terms.push((col, 1.0 / c));
            }
            hi = end;
        }
        (e, Range { lo: at(self.lo), hi: at(hi) })
    }
}

impl<'o> Builder<'o> {
    fn segments(
        &mut self,
        (i, j): (usize, usize),
        x: &Affine,
        range: Range,
        starts: &[f64],
        ends: &[f64],
    ) -> Segments {
        const SAME: f64 = 1e-12;
        let inside = |v: f64| v > range.lo + SAME && v < range.hi - SAME;
        let mut cuts: Vec<(f64, bool)> = starts
            .iter()
            .filter(|&&v| inside(v))
            .map(|&v| (v, true))
            .chain(ends.iter().filter(|&&v| inside(v)).map(|&v| (v, false)))
            .collect();
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(cuts.len());
        for (v, start) in cuts {
            match merged.last_mut() {
                Some(last) if v - last.0 <= SAME => last.1 |= start,
                _ => merged.push((v, start)),
            }
        }
        let mut bounds = vec![range.lo];
        bounds.extend(merged.iter().map(|c| c.0));
        bounds.push(range.hi);
        let parts: Vec<(f64, f64, usize)> = bounds
            .windows(2)
            .enumerate()
            .map(|(r, w)| {
                let col = self.milp.base.add_variable(format!("d_{i}_{j}_{r}"), 0.0, w[1] - w[0], 0.0);
                (w[0], w[1], col)
            })
            .collect();
        // x − Σ δ = lo
        let mut e = x.clone().shift(-range.lo);
        e.terms.extend(parts.iter().map(|&(_, _, col)| (col, -1.0)));
        self.row(e, Relation::Eq);

        // Blocks of segments between binary breakpoints.
        let mut block_start = 0usize;
        for (r, &(at, start)) in merged.iter().enumerate() {
            if !start {
                continue;
            }
            let y = self.binary(format!("y_{i}_{j}_{r}"), BinKind::Breakpoint(i, at), 0, j, None);
            // Segments since the last binary must be full when y = 1 ...
            for s in block_start..=r {
                let (a, b, col) = parts[s];
                let mut e = Affine::var(col).shift(0.0);
                e.terms.push((y, -(b - a)));
                self.row(e, Relation::Ge);
            }
            // ... and the segments up to the next binary empty when y = 0.
            let next = merged[r + 1..].iter().position(|c| c.1).map_or(parts.len(), |p| r + 2 + p);
            for s in r + 1..next {
                let (a, b, col) = parts[s];
                let mut e = Affine::var(col);
                e.terms.push((y, -(b - a)));
                self.row(e, Relation::Le);
            }
            block_start = r + 1;
        }
        Segments { lo: range.lo, parts }
    }

    /// Outcome of one term from exact ramp values; returns its column.
    fn median_term(&mut self, (k, j): (usize, usize), ramps: &[(Affine, Range)]) -> usize {
        let presolve = self.opts.presolve;
        let (olo, ohi) = match ramps {
            [(_, r)] => (r.lo, r.hi),
            _ => (
                median3([ramps[0].1.lo, ramps[1].1.lo, ramps[2].1.lo]),
                median3([ramps[0].1.hi, ramps[1].1.hi, ramps[2].1.hi]),
            ),
        };
        let (olo, ohi) = if presolve { (olo, ohi) } else { (-1.0, 1.0) };
        let o = self.milp.base.add_variable(format!("o_{k}_{j}"), olo, ohi, 0.0);
        if presolve && olo >= ohi {
            return o;
        }
        let ov = Affine::var(o);
        if let [(h, _)] = ramps {
            self.row(ov.plus(h, -1.0), Relation::Le);
            return o;
        }
        let mut used: Vec<std::result::Result<usize, f64>> = Vec::with_capacity(3);
        for (i, (h, r)) in ramps.iter().enumerate() {
            if presolve && r.hi < olo {
                used.push(Err(0.0));
                continue;
            }
            if presolve && r.lo >= ohi {
                used.push(Err(1.0));
                continue;
            }
            let u = self.binary(format!("u{i}_{k}_{j}"), BinKind::Used(i), k, j, None);
            // o ≤ h + M (1 − u)
            let big_m = (ohi - r.lo).max(0.0);
            let mut e = ov.clone().plus(h, -1.0).shift(-big_m);
            e.terms.push((u, big_m));
            self.row(e, Relation::Le);
            used.push(Ok(u));
        }
        for cover in [[0, 1], [0, 2], [1, 2]] {
            if cover.iter().any(|&i| used[i] == Err(1.0)) {
                continue;
            }
            let vars: Vec<usize> = cover.iter().filter_map(|&i| used[i].ok()).collect();
            if vars.is_empty() {
                self.milp.base.upper[o] = olo.max(-1.0);
                continue;
            }
            let mut e = ov.clone().shift(1.0);
            e.terms.extend(vars.iter().map(|&u| (u, -2.0)));
            self.row(e, Relation::Le);
            // Binary-free bound: the median of values in [−1, 1] is at most
            // their pairwise mean plus one.
            let (a, b) = (cover[0], cover[1]);
            let e = ov.clone().plus(&ramps[a].0, -0.5).plus(&ramps[b].0, -0.5).shift(-1.0);
            self.row(e, Relation::Le);
        }
        // ... and at most (h1 + h2 + h3 + 1)/2.
        let mut e = ov.shift(-0.5);
        for (h, _) in ramps {
            e = e.plus(h, -0.5);
        }
        self.row(e, Relation::Le);
        o
    }
}

fn formulate_incremental(p: &BestResponseProblem, opts: &BrOptions) -> Result<BrFormulation> {
    p.check()?;
    let coefs: Vec<Vec<f64>> = match p.model {
        UtilityModel::Homogeneous { .. } => vec![vec![1.0]],
        UtilityModel::Cdh(params) => {
            CdhForms::new(&params.intrinsic)?.g.iter().map(|r| r.to_vec()).collect()
        }
    };
    let c = p.model.threshold();
    let mut b = Builder { milp: MilpProblem::new(LinearProgram::new(Sense::Maximize)), opts, binaries: Vec::new() };
    let sc = strategy_columns(&mut b, p.space);
    let opponents: Vec<(usize, f64, &Strategy)> = p
        .opponent
        .iter()
        .enumerate()
        .filter(|(_, (pk, _))| *pk > 0.0)
        .map(|(k, (pk, o))| (k, pk, o))
        .collect();
    let zero = Strategy::from_rows_unchecked(vec![vec![0.0; p.space.nodes()]; p.space.types()]);
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    for j in 0..p.space.nodes() {
        // ramps[f][k]: form f's ramp against opponent k at this node.
        let mut ramps: Vec<Vec<(Affine, Range)>> = Vec::with_capacity(coefs.len());
        for (i, cf) in coefs.iter().enumerate() {
            let (x, range) = linear_form(&sc, j, cf, &zero);
            let at: Vec<f64> = opponents
                .iter()
                .map(|(_, _, o)| cf.iter().enumerate().map(|(t, w)| w * o.get(t, j)).sum())
                .collect();
            let starts: Vec<f64> = at.iter().map(|a| a - c).collect();
            let ends: Vec<f64> = at.iter().map(|a| a + c).collect();
            let seg = b.segments((i, j), &x, range, &starts, &ends);
            ramps.push(at.iter().map(|&a| seg.ramp(a, c)).collect());
        }
        for (idx, &(k, pk, _)) in opponents.iter().enumerate() {
            if coefs.len() == 1 {
                // One type: the ramp is the outcome.
                let (h, _) = &ramps[0][idx];
                objective.extend(h.terms.iter().map(|&(col, w)| (col, pk * w)));
                constant += pk * h.constant;
                continue;
            }
            let term: Vec<(Affine, Range)> = (0..3).map(|f| ramps[f][idx].clone()).collect();
            let o = b.median_term((k, j), &term);
            objective.push((o, pk));
        }
    }
    // Breakpoint binaries carry the node, not an opponent.
    Ok(finish(b, sc, objective, constant, Vec::new()))
}

pub fn formulate(p: &BestResponseProblem, opts: &BrOptions) -> Result<BrFormulation> {
    match (opts.formulation, p.model) {
        (Formulation::Auto, UtilityModel::Homogeneous { .. }) => formulate_incremental(p, opts),
        (Formulation::Auto, UtilityModel::Cdh(_)) => formulate_compact(p, opts),
        (Formulation::Incremental, _) => formulate_incremental(p, opts),
        (Formulation::Compact, _) => formulate_compact(p, opts),
        (Formulation::BigM, UtilityModel::Homogeneous { .. }) => formulate_homogeneous_br(p, opts),
        (Formulation::BigM, UtilityModel::Cdh(_)) => formulate_cdh_br(p, opts),
    }
}

impl BrFormulation {
    /// Binary values implied by playing `s`, respecting fixed binaries.
    fn assignment(&self, p: &BestResponseProblem, s: &Strategy) -> Vec<f64> {
        let c = p.model.threshold();
        let forms = match p.model {
            UtilityModel::Cdh(params) => Some(CdhForms::new(&params.intrinsic).expect("validated")),
            UtilityModel::Homogeneous { .. } => None,
        };
        let ind = |v: f64| if v > 0.0 { 1.0 } else { 0.0 };
        self.binaries
            .iter()
            .zip(&self.milp.integer_vars)
            .map(|(&(kind, k, j), &col)| {
                let (lo, hi) = (self.milp.base.lower[col], self.milp.base.upper[col]);
                if lo == hi {
                    return lo;
                }
                let o = &p.opponent.strategies[k];
                let (pi, gs) = match &forms {
                    None => (s.get(0, j) - o.get(0, j), [0.0; 3]),
                    Some(f) => {
                        let x = [
                            s.get(0, j) - o.get(0, j),
                            s.get(1, j) - o.get(1, j),
                            s.get(2, j) - o.get(2, j),
                        ];
                        let g = f.eval(x);
                        (median3(g), g)
                    }
                };
                let (g21, g13, g23) = (gs[1] - gs[0], gs[0] - gs[2], gs[1] - gs[2]);
                if let BinKind::Breakpoint(i, at) = kind {
                    let x: f64 = match &forms {
                        None => s.get(0, j),
                        Some(f) => (0..3).map(|t| f.g[i][t] * s.get(t, j)).sum(),
                    };
                    return if x >= at { 1.0 } else { 0.0 };
                }
                if let BinKind::Used(i) = kind {
                    if pi < -c {
                        return 0.0;
                    }
                    if forms.is_none() {
                        return 1.0;
                    }
                    let rank = (0..3)
                        .filter(|&l| gs[l] > gs[i] || (gs[l] == gs[i] && l < i))
                        .count();
                    return ind((rank < 2) as u8 as f64);
                }
                match kind {
                    BinKind::S => ind(pi + c),
                    BinKind::T => ind(pi - c),
                    BinKind::Dp => ind(g21),
                    BinKind::Dq => ind(g13),
                    BinKind::P => ind(g21.max(0.0) - g23 + f64::MIN_POSITIVE),
                    BinKind::Q => ind(g13.max(0.0) - g23 + f64::MIN_POSITIVE),
                    BinKind::Used(_) | BinKind::Breakpoint(..) => unreachable!(),
                }
            })
            .collect()
    }

    /// Reads the responder's strategy back from a MILP assignment. Each
    /// source's flows are clipped at zero and rescaled to its mass, so the
    /// result is reachable exactly.
    pub fn extract(&self, space: &PlayerSpace, values: &[f64]) -> Result<Strategy> {
        let n = space.nodes();
        let rows = (0..space.types())
            .map(|t| {
                let d = space.distribution().row(t);
                let mut row = vec![0.0; n];
                for (source, dests) in space.moves().iter().enumerate() {
                    if d[source] == 0.0 {
                        continue;
                    }
                    if dests.len() == 1 {
                        row[dests[0]] += d[source];
                        continue;
                    }
                    let cols: Vec<&FlowColumn> =
                        self.flows[t].iter().filter(|f| f.source == source).collect();
                    let raw: Vec<f64> = cols
                        .iter()
                        .map(|f| if values[f.column] < FLOW_ZERO { 0.0 } else { values[f.column] })
                        .collect();
                    let total: f64 = raw.iter().sum();
                    if total <= 0.0 {
                        return Err(BlottoError::Structural(format!(
                            "no outflow from node {source} for type {t}"
                        )));
                    }
                    for (f, v) in cols.iter().zip(&raw) {
                        row[f.dest] += d[source] * v / total;
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Strategy::from_rows_unchecked(rows))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub strategy: Strategy,
    /// Exact `Σ_k P_k u(strategy, O_k)` for the responder.
    pub value: f64,
    /// Proven upper bound on the best achievable value.
    pub bound: f64,
    /// Whether `value` is proven optimal (or, under a cutoff, that nothing
    /// beats the cutoff). False when the search stopped at its node limit or
    /// target; `bound` is valid either way.
    pub certified: bool,
    /// Branch-and-bound nodes.
    pub nodes: usize,
}

/// Solves the best-response MILP. `candidates` are reachable strategies
/// (for example earlier best responses) tried as starting incumbents along
/// with the joint vertices of the reachable set.
pub fn solve_br(
    p: &BestResponseProblem,
    opts: &BrOptions,
    candidates: &[Strategy],
) -> Result<BestResponse> {
    let mut f = formulate(p, opts)?;

    let mut scored: Vec<(f64, &Strategy)> = Vec::new();
    for s in p.space.joint_vertices().iter().chain(candidates) {
        scored.push((p.objective(s)?, s));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let best_candidate = scored.first().map(|(v, s)| (*v, (*s).clone()));
    f.milp.hints = scored.iter().take(MAX_HINTS).map(|(_, s)| f.assignment(p, s)).collect();

    // Cutoff and target are given in utility terms; the MILP objective
    // omits the constant.
    let mut milp_opts = opts.milp.clone();
    milp_opts.cutoff = opts.milp.cutoff.map(|c| c - f.constant);
    milp_opts.target = opts.milp.target.map(|c| c - f.constant);

    let (values, bound, certified, nodes) = match &opts.external {
        Some(ext) => {
            let r = ext.solve(&f.milp)?;
            (Some(r.values), r.objective + opts.milp.gap_tol + f.constant, true, 0)
        }
        None => {
            let r = solve_milp(&f.milp, &milp_opts)?;
            debug!(
                "best response for {:?}: status {:?}, {} nodes, objective {}, bound {}",
                p.responder, r.status, r.work, r.objective, r.bound
            );
            let bound = r.bound + opts.milp.gap_tol + f.constant;
            match r.status {
                SolveStatus::Optimal => (Some(r.values), bound, true, r.work),
                SolveStatus::TargetReached | SolveStatus::IterationLimit if r.has_solution() => {
                    (Some(r.values), bound, false, r.work)
                }
                // Every node fell below the cutoff before an incumbent was
                // found; the candidates stand in.
                SolveStatus::Infeasible if bound.is_finite() && best_candidate.is_some() => {
                    (None, bound, true, r.work)
                }
                status => {
                    return Err(BlottoError::SolverStatus {
                        context: format!("best response for {:?}", p.responder),
                        status: format!("{status:?}"),
                    })
                }
            }
        }
    };
    let found = match values {
        Some(v) => {
            let strategy = f.extract(p.space, &v)?;
            let value = p.objective(&strategy)?;
            Some((value, strategy))
        }
        None => None,
    };
    // Rounding of the flows can only cost a hair; never report less than a
    // candidate.
    let (value, strategy) = match (found, best_candidate) {
        (Some(a), Some(b)) => if b.0 > a.0 { b } else { a },
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("checked above"),
    };
    Ok(BestResponse { strategy, value, bound: bound.max(value), certified, nodes })
}

/// Largest number of lattice points allowed per type.
pub const GRID_TYPE_LIMIT: u128 = 1_000_000;
/// Largest number of strategy combinations evaluated.
pub const GRID_EVAL_LIMIT: u128 = 300_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
        if r > u128::MAX / (n + 1) {
            return u128::MAX / 2;
        }
    }
    r
}

/// Distinct rows `Σ_v (a_v/g) v` over all compositions `a` of `g`.
fn lattice_rows(verts: &[Vec<f64>], g: usize) -> Vec<Vec<f64>> {
    let n = verts[0].len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut counts = vec![0usize; verts.len()];
    fn rec(
        idx: usize,
        left: usize,
        g: usize,
        verts: &[Vec<f64>],
        counts: &mut Vec<usize>,
        n: usize,
        out: &mut Vec<Vec<f64>>,
        seen: &mut std::collections::HashSet<Vec<i64>>,
    ) {
        if idx == verts.len() - 1 {
            counts[idx] = left;
            let mut row = vec![0.0; n];
            for (c, v) in counts.iter().zip(verts) {
                if *c > 0 {
                    let w = *c as f64 / g as f64;
                    for (r, x) in row.iter_mut().zip(v) {
                        *r += w * x;
                    }
                }
            }
            let key: Vec<i64> = row.iter().map(|x| (x * 1e9).round() as i64).collect();
            if seen.insert(key) {
                out.push(row);
            }
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            rec(idx + 1, left - c, g, verts, counts, n, out, seen);
        }
    }
    rec(0, g, g, verts, &mut counts, n, &mut out, &mut seen);
    out
}

/// Brute-force best response over the λ lattice with step `1/g` per type.
pub fn grid_oracle_br(p: &BestResponseProblem, g: usize) -> Result<(Strategy, f64)> {
    p.check()?;
    if g == 0 {
        return Err(BlottoError::validation("grid", "step denominator must be positive"));
    }
    let m = p.space.types();
    let n = p.space.nodes();
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
    for t in 0..m {
        let verts = p.space.vertices(t);
        let points = binomial((g + verts.len() - 1) as u128, (verts.len() - 1) as u128);
        if points > GRID_TYPE_LIMIT {
            return Err(BlottoError::GridTooLarge { points, limit: GRID_TYPE_LIMIT });
        }
        rows.push(lattice_rows(verts, g));
    }
    let combos: u128 = rows.iter().map(|r| r.len() as u128).product();
    if combos > GRID_EVAL_LIMIT {
        return Err(BlottoError::GridTooLarge { points: combos, limit: GRID_EVAL_LIMIT });
    }

    let c = p.model.threshold();
    let opp: Vec<(f64, &Strategy)> = p.opponent.iter().filter(|(pk, _)| *pk > 0.0).collect();
    // Forms per type: homogeneous is the identity on the single row.
    let coef: Vec<[f64; 3]> = match p.model {
        UtilityModel::Homogeneous { .. } => vec![[1.0, 0.0, 0.0]],
        UtilityModel::Cdh(params) => {
            let f = CdhForms::new(&params.intrinsic)?;
            (0..3).map(|t| [f.g[0][t], f.g[1][t], f.g[2][t]]).collect()
        }
    };
    let forms = coef[0].len();
    // Opponent's form values per k: [i][j].
    let opp_forms: Vec<Vec<[f64; 3]>> = opp
        .iter()
        .map(|(_, o)| {
            (0..n)
                .map(|j| {
                    let mut v = [0.0; 3];
                    for (t, ct) in coef.iter().enumerate() {
                        for i in 0..forms {
                            v[i] += ct[i] * o.get(t, j);
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    let homogeneous = matches!(p.model, UtilityModel::Homogeneous { .. });

    // Form contributions of every lattice row: [type][row][node][form].
    let contrib: Vec<Vec<Vec<[f64; 3]>>> = rows
        .iter()
        .enumerate()
        .map(|(t, rs)| {
            rs.iter()
                .map(|r| {
                    r.iter()
                        .map(|&x| std::array::from_fn(|i| if i < forms { coef[t][i] * x } else { 0.0 }))
                        .collect()
                })
                .collect()
        })
        .collect();

    struct Search<'a> {
        contrib: &'a [Vec<Vec<[f64; 3]>>],
        opp: Vec<(f64, &'a [[f64; 3]])>,
        c: f64,
        homogeneous: bool,
        idx: Vec<usize>,
        best: (f64, Vec<usize>),
    }

    impl Search<'_> {
        /// Fixes the row of type `t` on top of the partial sums `acc`.
        fn descend(&mut self, t: usize, acc: &[[f64; 3]]) {
            let n = acc.len();
            let last = t + 1 == self.contrib.len();
            let mut next = acc.to_vec();
            for r in 0..self.contrib[t].len() {
                self.idx[t] = r;
                for (j, a) in next.iter_mut().enumerate() {
                    let add = self.contrib[t][r][j];
                    *a = [acc[j][0] + add[0], acc[j][1] + add[1], acc[j][2] + add[2]];
                }
                if !last {
                    self.descend(t + 1, &next);
                    continue;
                }
                let mut value = 0.0;
                for &(pk, of) in &self.opp {
                    let mut u = 0.0;
                    for j in 0..n {
                        let d = [next[j][0] - of[j][0], next[j][1] - of[j][1], next[j][2] - of[j][2]];
                        let pi = if self.homogeneous { d[0] } else { median3(d) };
                        u += sgn_clamped(pi, self.c);
                    }
                    value += pk * u;
                }
                if value > self.best.0 {
                    self.best = (value, self.idx.clone());
                }
            }
        }
    }

    let mut search = Search {
        contrib: &contrib,
        opp: opp.iter().zip(&opp_forms).map(|((pk, _), of)| (*pk, of.as_slice())).collect(),
        c,
        homogeneous,
        idx: vec![0; m],
        best: (f64::NEG_INFINITY, vec![0; m]),
    };
    search.descend(0, &vec![[0.0; 3]; n]);
    let best = search.best.1;
    let strategy = Strategy::from_rows_unchecked((0..m).map(|t| rows[t][best[t]].clone()).collect());
    let exact = p.objective(&strategy)?;
    Ok((strategy, exact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Game;
    use crate::graph::{Distribution, Graph};
    use crate::payoff::{IntrinsicMatrix, OutcomeParams};

    fn two() -> IntrinsicMatrix {
        IntrinsicMatrix::cyclic(2.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn global_big_m_for_ratio_two() {
        let b = compute_big_m(&two(), 0.25).unwrap();
        assert_eq!(b.s, 29.0);
        assert_eq!(b.t, 29.0);
        assert_eq!((b.dp, b.dq), (6.0, 6.0));
        assert!(b.pq <= 14.0);
        let wide = compute_big_m(&two(), 1e9).unwrap();
        assert!((wide.s - 1.0).abs() < 1e-8);
    }

    fn g2_cdh(opponent: Strategy) -> (Game, MixedStrategy) {
        let graph = Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap();
        let model = UtilityModel::Cdh(OutcomeParams::new(two(), 0.25).unwrap());
        let dx = Distribution::new(vec![
            vec![0.7, 0.1, 0.2],
            vec![0.4, 0.4, 0.2],
            vec![0.3, 0.1, 0.6],
        ])
        .unwrap();
        let dy = Distribution::new(opponent.rows().to_vec()).unwrap();
        let game = Game::new(graph, model, dx, dy).unwrap();
        (game, MixedStrategy::pure(opponent))
    }

    #[test]
    fn single_point_reachable_set_is_exact() {
        let graph = Graph::new(1, vec![], true).unwrap();
        let model = UtilityModel::Cdh(OutcomeParams::new(two(), 0.25).unwrap());
        let dx = Distribution::new(vec![vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let game = Game::new(graph, model, dx.clone(), dx).unwrap();
        let opp = MixedStrategy::pure(Strategy::new(vec![vec![1.0], vec![1.0], vec![1.0]]).unwrap());
        let p = BestResponseProblem {
            responder: Player::One,
            space: game.space(Player::One),
            opponent: &opp,
            model: game.model(),
        };
        let r = solve_br(&p, &BrOptions::default(), &[]).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn cdh_milp_beats_vertices_and_grid() {
        let opp = Strategy::new(vec![
            vec![0.2, 0.2, 0.6],
            vec![0.35, 0.15, 0.5],
            vec![0.4, 0.2, 0.4],
        ])
        .unwrap();
        let (game, mix) = g2_cdh(opp);
        let p = BestResponseProblem {
            responder: Player::One,
            space: game.space(Player::One),
            opponent: &mix,
            model: game.model(),
        };
        let r = solve_br(&p, &BrOptions::default(), &[]).unwrap();
        assert!(r.certified);
        assert!(game.space(Player::One).contains(&r.strategy).unwrap());
        for v in game.space(Player::One).joint_vertices() {
            assert!(r.value >= p.objective(v).unwrap() - 1e-6);
        }
        for (formulation, full_system, presolve) in [
            (Formulation::Compact, false, false),
            (Formulation::BigM, false, true),
            (Formulation::BigM, true, false),
        ] {
            let opts = BrOptions { formulation, full_system, presolve, ..BrOptions::default() };
            let other = solve_br(&p, &opts, &[]).unwrap();
            assert!((other.value - r.value).abs() < 1e-6, "{} vs {}", other.value, r.value);
        }
        let (_, grid) = grid_oracle_br(&p, 2).unwrap();
        assert!(r.value >= grid - 1e-6, "{} < {}", r.value, grid);
    }

    #[test]
    fn homogeneous_single_node_duel() {
        // Two nodes, the responder can shift mass between them.
        let graph = Graph::new(2, vec![(0, 1), (1, 0)], true).unwrap();
        let dx = Distribution::new(vec![vec![0.5, 0.5]]).unwrap();
        let dy = Distribution::new(vec![vec![0.7, 0.3]]).unwrap();
        let game = Game::new(graph, UtilityModel::Homogeneous { c: 0.1 }, dx, dy).unwrap();
        let opp = MixedStrategy::pure(Strategy::new(vec![vec![0.7, 0.3]]).unwrap());
        let p = BestResponseProblem {
            responder: Player::One,
            space: game.space(Player::One),
            opponent: &opp,
            model: game.model(),
        };
        let r = solve_br(&p, &BrOptions::default(), &[]).unwrap();
        // Winning one node outright and tying the other: (0.6, 0.4) wins
        // node 1 by 0.1 and loses node 0 by 0.1 -> 0; (0.2, 0.8) wins node 1,
        // loses node 0 -> 0. Matching (0.7, 0.3) gives 0 too; nothing beats 0
        // because the allocations sum to one.
        assert!(r.value.abs() < 1e-9, "{}", r.value);
        let (_, grid) = grid_oracle_br(&p, 20).unwrap();
        assert!(grid <= r.value + 1e-9);
    }
}

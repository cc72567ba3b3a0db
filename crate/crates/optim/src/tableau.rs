//! Dense bounded-variable simplex tableau.
//!
//! Every row `i` of the model is `Σ a_ij x_j + s_i = b_i` with a bounded slack
//! `s_i`; rows that the initial slack basis cannot satisfy get an artificial
//! column. The tableau stores `B⁻¹[A | I | art]` row-major, the reduced costs of
//! the current (minimization) objective and the value of every column.
//! Nonbasic columns always sit exactly on a finite bound, or at zero when free.

use crate::problem::{LinearProgram, Relation, Sense};

const PIVOT_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before pricing falls back to Bland's rule.
const BLAND_AFTER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    n_struct: usize,
    t: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    /// Objective used in phase two, in minimization form.
    phase2_cost: Vec<f64>,
    ptol: f64,
    pub(crate) pivots: usize,
}

impl Tableau {
    /// Builds the initial slack/artificial basis for `lp`.
    pub(crate) fn new(lp: &LinearProgram, ptol: f64) -> Self {
        let m = lp.num_constraints();
        let n_struct = lp.num_variables();
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };

        let mut x0 = vec![0.0; n_struct];
        for j in 0..n_struct {
            x0[j] = if lp.lower[j].is_finite() {
                lp.lower[j]
            } else if lp.upper[j].is_finite() {
                lp.upper[j]
            } else {
                0.0
            };
        }

        // Decide per row whether the slack can start basic.
        let mut slack_lo = vec![0.0; m];
        let mut slack_hi = vec![0.0; m];
        let mut residual = vec![0.0; m];
        let mut art_sign: Vec<Option<f64>> = vec![None; m];
        for (i, row) in lp.constraints.iter().enumerate() {
            let (l, h) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            slack_lo[i] = l;
            slack_hi[i] = h;
            let r = row.rhs - row.terms.iter().map(|&(j, c)| c * x0[j]).sum::<f64>();
            residual[i] = r;
            if r < l - ptol || r > h + ptol {
                art_sign[i] = Some(if r > h { 1.0 } else { -1.0 });
            }
        }
        let n_art = art_sign.iter().filter(|s| s.is_some()).count();
        let n = n_struct + m + n_art;

        let mut t = vec![0.0; m * n];
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        lo.extend_from_slice(&lp.lower);
        hi.extend_from_slice(&lp.upper);
        lo.extend_from_slice(&slack_lo);
        hi.extend_from_slice(&slack_hi);
        lo.extend(std::iter::repeat(0.0).take(n_art));
        hi.extend(std::iter::repeat(f64::INFINITY).take(n_art));

        let mut x = vec![0.0; n];
        x[..n_struct].copy_from_slice(&x0);
        let mut basis = vec![0; m];
        let mut row_of = vec![usize::MAX; n];
        let mut next_art = n_struct + m;
        for (i, row) in lp.constraints.iter().enumerate() {
            let base = i * n;
            let slack = n_struct + i;
            match art_sign[i] {
                None => {
                    for &(j, c) in &row.terms {
                        t[base + j] += c;
                    }
                    t[base + slack] = 1.0;
                    basis[i] = slack;
                    row_of[slack] = i;
                    x[slack] = residual[i];
                }
                Some(sigma) => {
                    let art = next_art;
                    next_art += 1;
                    for &(j, c) in &row.terms {
                        t[base + j] += c / sigma;
                    }
                    t[base + slack] = 1.0 / sigma;
                    t[base + art] = 1.0;
                    let clipped = residual[i].clamp(slack_lo[i], slack_hi[i]);
                    x[slack] = clipped;
                    x[art] = (residual[i] - clipped) / sigma;
                    basis[i] = art;
                    row_of[art] = i;
                }
            }
        }

        let mut phase2_cost = vec![0.0; n];
        for j in 0..n_struct {
            phase2_cost[j] = sign * lp.objective[j];
        }
        let b = lp.constraints.iter().map(|r| r.rhs).collect();

        Self {
            m,
            n,
            n_struct,
            t,
            b,
            cost: vec![0.0; n],
            d: vec![0.0; n],
            x,
            lo,
            hi,
            basis,
            row_of,
            phase2_cost,
            ptol,
            pivots: 0,
        }
    }

    /// Approximate heap size, dominated by the dense body.
    pub(crate) fn memory_bytes(&self) -> usize {
        (self.t.len() + 8 * self.n + 2 * self.m) * std::mem::size_of::<f64>()
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.n_struct].to_vec()
    }

    /// Current objective in minimization form.
    pub(crate) fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    pub(crate) fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    fn n_art(&self) -> usize {
        self.n - self.n_struct - self.m
    }

    /// Runs phase one and phase two from the initial basis.
    pub(crate) fn solve_cold(&mut self, max_pivots: usize) -> Outcome {
        let max_pivots = self.pivots + max_pivots;
        if self.n_art() > 0 {
            let mut c1 = vec![0.0; self.n];
            for c in c1.iter_mut().skip(self.n_struct + self.m) {
                *c = 1.0;
            }
            self.set_cost(c1);
            match self.primal(max_pivots) {
                Outcome::Optimal => {}
                Outcome::IterationLimit => return Outcome::IterationLimit,
                // Phase one is bounded below by zero.
                other => return other,
            }
            let infeasibility: f64 = self.x[self.n_struct + self.m..].iter().sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeasibility > self.ptol.max(1e-9) * scale * 10.0 {
                return Outcome::Infeasible;
            }
            self.retire_artificials();
        }
        let c2 = self.phase2_cost.clone();
        self.set_cost(c2);
        self.primal(max_pivots)
    }

    /// Re-optimizes after bound changes, starting from a dual-feasible basis.
    pub(crate) fn solve_warm(&mut self, max_pivots: usize) -> Outcome {
        let max_pivots = self.pivots + max_pivots;
        match self.dual(max_pivots) {
            Outcome::Optimal => {}
            other => return other,
        }
        self.refresh();
        if self.max_basic_infeasibility() > self.ptol {
            match self.dual(max_pivots) {
                Outcome::Optimal => {}
                other => return other,
            }
        }
        self.primal(max_pivots)
    }

    /// Runs only the dual simplex. With a dual feasible start, the objective
    /// is a valid lower bound whatever the outcome.
    pub(crate) fn solve_dual(&mut self, max_pivots: usize) -> Outcome {
        let max_pivots = self.pivots + max_pivots;
        self.dual(max_pivots)
    }

    /// Fixes column `j` to `value`, keeping the basis.
    pub(crate) fn fix(&mut self, j: usize, value: f64) {
        self.set_bounds(j, value, value);
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Changes the bounds of column `j`, keeping the basis. A nonbasic column
    /// moves to the bound its reduced cost prefers, so a dual feasible basis
    /// stays dual feasible whenever that bound is finite.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.row_of[j] != usize::MAX {
            return;
        }
        let target = if lo == hi {
            lo
        } else if self.d[j] < 0.0 && hi.is_finite() {
            hi
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.x[j] = target;
            let n = self.n;
            for i in 0..self.m {
                let a = self.t[i * n + j];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
        }
    }

    /// Reduced cost of a nonbasic column in minimization form, or `None` for
    /// basic columns.
    pub(crate) fn reduced_cost(&self, j: usize) -> Option<f64> {
        (self.row_of[j] == usize::MAX).then(|| self.d[j])
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * n..(i + 1) * n];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for &bv in &self.basis {
            self.d[bv] = 0.0;
        }
    }

    /// Recomputes basic values from `B⁻¹ b` and the nonbasic values.
    fn recompute_basic_values(&mut self) {
        let n = self.n;
        let slack0 = self.n_struct;
        for i in 0..self.m {
            let row = &self.t[i * n..(i + 1) * n];
            let mut v = 0.0;
            for (k, &bk) in self.b.iter().enumerate() {
                v += row[slack0 + k] * bk;
            }
            for j in 0..n {
                if self.row_of[j] == usize::MAX {
                    let a = row[j];
                    if a != 0.0 {
                        v -= a * self.x[j];
                    }
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    pub(crate) fn refresh(&mut self) {
        self.recompute_basic_values();
        self.recompute_reduced_costs();
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&bv| (self.lo[bv] - self.x[bv]).max(self.x[bv] - self.hi[bv]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Fixes artificials at zero, pivots basic ones out where possible and
    /// drops their columns when none stay basic.
    fn retire_artificials(&mut self) {
        let first_art = self.n_struct + self.m;
        for j in first_art..self.n {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.row_of[j] == usize::MAX {
                self.x[j] = 0.0;
            }
        }
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let base = r * self.n;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..first_art {
                if self.row_of[j] != usize::MAX {
                    continue;
                }
                let a = self.t[base + j].abs();
                if a > 1e-7 && best.map_or(true, |(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                // Degenerate exchange: the artificial sits at zero.
                let art = self.basis[r];
                self.x[art] = 0.0;
                self.pivot(r, q);
            }
        }
        if self.basis.iter().all(|&bv| bv < first_art) {
            let old_n = self.n;
            let new_n = first_art;
            let mut t = vec![0.0; self.m * new_n];
            for i in 0..self.m {
                t[i * new_n..(i + 1) * new_n]
                    .copy_from_slice(&self.t[i * old_n..i * old_n + new_n]);
            }
            self.t = t;
            self.n = new_n;
            self.cost.truncate(new_n);
            self.d.truncate(new_n);
            self.x.truncate(new_n);
            self.lo.truncate(new_n);
            self.hi.truncate(new_n);
            self.row_of.truncate(new_n);
            self.phase2_cost.truncate(new_n);
        }
        self.recompute_basic_values();
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n {
            if self.row_of[j] != usize::MAX || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let cand = if dj < -DUAL_TOL && self.x[j] < self.hi[j] {
                Some((1.0, -dj))
            } else if dj > DUAL_TOL && self.x[j] > self.lo[j] {
                Some((-1.0, dj))
            } else {
                None
            };
            if let Some((dir, score)) = cand {
                if bland {
                    return Some((j, dir));
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn primal(&mut self, max_pivots: usize) -> Outcome {
        let n = self.n;
        let mut degenerate = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Outcome::IterationLimit;
            }
            let bland = degenerate > BLAND_AFTER;
            let Some((q, dir)) = self.price(bland) else {
                return Outcome::Optimal;
            };

            let mut theta = if self.lo[q].is_finite() && self.hi[q].is_finite() {
                self.hi[q] - self.lo[q]
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_piv = 0.0;
            for i in 0..self.m {
                let a = self.t[i * n + q];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let bv = self.basis[i];
                let (limit, bound) = if rate < 0.0 {
                    if !self.lo[bv].is_finite() {
                        continue;
                    }
                    ((self.x[bv] - self.lo[bv]).max(0.0) / -rate, self.lo[bv])
                } else {
                    if !self.hi[bv].is_finite() {
                        continue;
                    }
                    ((self.hi[bv] - self.x[bv]).max(0.0) / rate, self.hi[bv])
                };
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    match leave {
                        None => false,
                        Some((r, _)) => {
                            if bland {
                                bv < self.basis[r]
                            } else {
                                a.abs() > leave_piv
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leave = Some((i, bound));
                    leave_piv = a.abs();
                }
            }
            if theta == f64::INFINITY {
                return Outcome::Unbounded;
            }
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            if theta > 0.0 {
                self.x[q] += dir * theta;
                for i in 0..self.m {
                    let a = self.t[i * n + q];
                    if a != 0.0 {
                        self.x[self.basis[i]] -= dir * theta * a;
                    }
                }
            }
            match leave {
                None => {
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                    self.pivots += 1;
                }
                Some((r, bound)) => {
                    let bv = self.basis[r];
                    self.x[bv] = bound;
                    self.pivot(r, q);
                }
            }
        }
    }

    fn dual(&mut self, max_pivots: usize) -> Outcome {
        let n = self.n;
        let mut stalls = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return Outcome::IterationLimit;
            }
            let bland = stalls > BLAND_AFTER;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let bv = self.basis[i];
                let v = self.x[bv];
                let infeas = if v < self.lo[bv] - self.ptol {
                    self.lo[bv] - v
                } else if v > self.hi[bv] + self.ptol {
                    v - self.hi[bv]
                } else {
                    continue;
                };
                if bland {
                    if leave.map_or(true, |(r, _)| bv < self.basis[r]) {
                        leave = Some((i, infeas));
                    }
                } else if leave.map_or(true, |(_, w)| infeas > w) {
                    leave = Some((i, infeas));
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Optimal;
            };
            let bv = self.basis[r];
            let increase = self.x[bv] < self.lo[bv];
            let target = if increase { self.lo[bv] } else { self.hi[bv] };

            let base = r * n;
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..n {
                if self.row_of[j] != usize::MAX || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.t[base + j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let can_inc = self.x[j] < self.hi[j];
                let can_dec = self.x[j] > self.lo[j];
                // x_bv moves by -a per unit increase of x_j.
                let ok = if increase {
                    (can_inc && a < 0.0) || (can_dec && a > 0.0)
                } else {
                    (can_inc && a > 0.0) || (can_dec && a < 0.0)
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                let better = match enter {
                    None => true,
                    Some((_, best_ratio, best_a)) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            !bland && a.abs() > best_a
                        } else {
                            false
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, ratio, _)) = enter else {
                return Outcome::Infeasible;
            };
            if ratio <= 1e-12 {
                stalls += 1;
            } else {
                stalls = 0;
            }

            let a = self.t[base + q];
            let delta = (self.x[bv] - target) / a;
            self.x[q] += delta;
            for i in 0..self.m {
                let ai = self.t[i * n + q];
                if ai != 0.0 {
                    self.x[self.basis[i]] -= ai * delta;
                }
            }
            self.x[bv] = target;
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let piv = self.t[r * n + q];
        let inv = 1.0 / piv;
        let mut nz: Vec<usize> = Vec::new();
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < 1e-14 {
                        *v = 0.0;
                    } else {
                        nz.push(j);
                    }
                }
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (pivot_row, after) = rest.split_at_mut(n);
        for chunk in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = chunk[q];
            if f == 0.0 {
                continue;
            }
            for &j in &nz {
                chunk[j] -= f * pivot_row[j];
            }
            chunk[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &j in &nz {
                self.d[j] -= f * pivot_row[j];
            }
        }
        self.d[q] = 0.0;

        let leaving = self.basis[r];
        self.row_of[leaving] = usize::MAX;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.pivots += 1;
    }
}

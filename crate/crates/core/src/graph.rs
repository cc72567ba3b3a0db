//! The arena: directed graphs, admissible one-step transitions and the
//! reachable allocations they generate.
//!
//! Transitions act on column vectors of per-node fractions, `d' = T d`, so
//! `T[i][j]` is the share of node `j`'s population that moves to node `i`.
//! Every source column of an admissible `T` sums to one.

use serde::{Deserialize, Serialize};

use blotto_optim::{solve_lp, LinearProgram, Relation, Sense, SolveStatus};

use crate::error::{BlottoError, Result};

/// Row-sum tolerance for distributions and strategies.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Two reachable vertices closer than this in every entry are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-12;
/// Residual accepted by [`membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    allow_stay: bool,
}

impl Graph {
    /// Builds a graph from `(tail, head)` pairs. Self-edges are accepted and
    /// are redundant when `allow_stay` is set.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>, allow_stay: bool) -> Result<Self> {
        if node_count == 0 {
            return Err(BlottoError::validation("graph.nodes", "must be positive"));
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= node_count || b >= node_count {
                return Err(BlottoError::validation(
                    format!("graph.edges[{k}]"),
                    format!("endpoint out of range 0..{node_count}: ({a}, {b})"),
                ));
            }
            if edges[..k].contains(&(a, b)) {
                return Err(BlottoError::validation(
                    format!("graph.edges[{k}]"),
                    format!("duplicate edge ({a}, {b})"),
                ));
            }
        }
        Ok(Self {
            node_count,
            edges,
            allow_stay,
        })
    }

    /// The complete directed graph on `n` nodes (no self-edges; staying is
    /// allowed).
    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        Self::new(n, edges, true)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn allow_stay(&self) -> bool {
        self.allow_stay
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    entries: Vec<Vec<u8>>,
}

impl AdjacencyMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// 1 when mass may flow from `source` to `dest`.
    pub fn get(&self, dest: usize, source: usize) -> u8 {
        self.entries[dest][source]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.entries
    }

    /// Admissible destinations of `source`, ascending.
    pub fn destinations(&self, source: usize) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.entries[i][source] == 1)
            .collect()
    }
}

/// `A[i][j] = 1` iff edge `(j, i)` exists or `i == j` with staying allowed.
pub fn build_adjacency(graph: &Graph) -> AdjacencyMatrix {
    let n = graph.node_count;
    let mut entries = vec![vec![0u8; n]; n];
    if graph.allow_stay {
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = 1;
        }
    }
    for &(tail, head) in &graph.edges {
        entries[head][tail] = 1;
    }
    AdjacencyMatrix { entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    /// Validates against `adj`: nonnegative, zero off the edges, unit column sums.
    pub fn new(entries: Vec<Vec<f64>>, adj: &AdjacencyMatrix) -> Result<Self> {
        let n = adj.size();
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(BlottoError::Dimension(format!(
                "transition matrix must be {n}x{n}"
            )));
        }
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                let v = entries[i][j];
                if !(v >= 0.0) {
                    return Err(BlottoError::validation(
                        format!("transition[{i}][{j}]"),
                        format!("negative or non-finite entry {v}"),
                    ));
                }
                if v > 0.0 && adj.get(i, j) == 0 {
                    return Err(BlottoError::validation(
                        format!("transition[{i}][{j}]"),
                        "flow along a missing edge",
                    ));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(BlottoError::validation(
                    format!("transition[..][{j}]"),
                    format!("column sums to {sum}, expected 1"),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![vec![0.0; n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { entries }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.entries
    }
}

/// All binary admissible transitions, stored as one destination per source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremeActionSet {
    node_count: usize,
    destinations: Vec<Vec<usize>>,
}

impl ExtremeActionSet {
    pub fn count(&self) -> usize {
        self.destinations.len()
    }

    /// Destination of every source under the `k`-th extreme action.
    pub fn destinations(&self, k: usize) -> &[usize] {
        &self.destinations[k]
    }

    pub fn matrix(&self, k: usize) -> TransitionMatrix {
        let n = self.node_count;
        let mut entries = vec![vec![0.0; n]; n];
        for (source, &dest) in self.destinations[k].iter().enumerate() {
            entries[dest][source] = 1.0;
        }
        TransitionMatrix { entries }
    }

    /// `T̂_k · row`.
    pub fn apply(&self, k: usize, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count];
        for (source, &dest) in self.destinations[k].iter().enumerate() {
            out[dest] += row[source];
        }
        out
    }

    /// Index of the identity action, if staying is admissible everywhere.
    pub fn stay_index(&self) -> Option<usize> {
        self.destinations
            .iter()
            .position(|d| d.iter().enumerate().all(|(s, &t)| s == t))
    }
}

/// Enumerates every binary column-stochastic matrix allowed by `adj`, in
/// lexicographic order of the destination lists (source 0 varies slowest).
pub fn enumerate_extreme_actions(adj: &AdjacencyMatrix) -> Result<ExtremeActionSet> {
    let n = adj.size();
    let choices: Vec<Vec<usize>> = (0..n).map(|j| adj.destinations(j)).collect();
    if let Some(j) = choices.iter().position(|c| c.is_empty()) {
        return Err(BlottoError::Structural(format!(
            "node {j} has no admissible destination (no out-edges and staying disallowed)"
        )));
    }
    let total: usize = choices.iter().map(Vec::len).product();
    let mut destinations = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    loop {
        destinations.push((0..n).map(|j| choices[j][idx[j]]).collect());
        // Odometer increment with the last source varying fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(ExtremeActionSet {
                    node_count: n,
                    destinations,
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < choices[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Per-type population fractions: `M` rows over `N` nodes, each summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    rows: Vec<Vec<f64>>,
}

impl Distribution {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_rows("distribution", &rows)?;
        Ok(Self { rows })
    }

    pub fn types(&self) -> usize {
        self.rows.len()
    }

    pub fn nodes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Checks a nonempty rectangular matrix of nonnegative rows with unit sums.
pub(crate) fn validate_rows(path: &str, rows: &[Vec<f64>]) -> Result<()> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(BlottoError::validation(
            path,
            "must have at least one type and one node",
        ));
    }
    let n = rows[0].len();
    for (t, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(BlottoError::validation(
                format!("{path}[{t}]"),
                format!("has {} entries, expected {n}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(BlottoError::validation(
                format!("{path}[{t}][{j}]"),
                format!("entry {} is negative or non-finite", row[j]),
            ));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(BlottoError::validation(
                format!("{path}[{t}]"),
                format!("sums to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}

/// `T · d_row` for robot type `type_index`.
pub fn apply_transition(
    t: &TransitionMatrix,
    d: &Distribution,
    type_index: usize,
) -> Result<Vec<f64>> {
    let row = type_row(d, type_index)?;
    if t.entries.len() != row.len() {
        return Err(BlottoError::Dimension(format!(
            "transition is {0}x{0} but the distribution has {1} nodes",
            t.entries.len(),
            row.len()
        )));
    }
    Ok(t.entries
        .iter()
        .map(|ti| ti.iter().zip(row).map(|(a, b)| a * b).sum())
        .collect())
}

fn type_row(d: &Distribution, type_index: usize) -> Result<&[f64]> {
    d.rows.get(type_index).map(Vec::as_slice).ok_or_else(|| {
        BlottoError::Dimension(format!("type {type_index} out of range 0..{}", d.types()))
    })
}

/// Distinct images `T̂_k · d_row`; their convex hull is the reachable set.
pub fn reachable_vertices(
    extremes: &ExtremeActionSet,
    d: &Distribution,
    type_index: usize,
) -> Result<Vec<Vec<f64>>> {
    let row = type_row(d, type_index)?;
    if row.len() != extremes.node_count {
        return Err(BlottoError::Dimension(format!(
            "distribution has {} nodes, graph has {}",
            row.len(),
            extremes.node_count
        )));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for k in 0..extremes.count() {
        let v = extremes.apply(k, row);
        if !out.iter().any(|u| same_point(u, &v, VERTEX_DEDUP_TOL)) {
            out.push(v);
        }
    }
    Ok(out)
}

pub(crate) fn same_point(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Convex weights over the vertex list (present when `member`).
    pub lambda: Option<Vec<f64>>,
    /// Smallest L1 distance found between the point and the hull.
    pub residual: f64,
}

/// Whether `strategy_row` lies in the reachable set of type `type_index`.
pub fn membership(
    strategy_row: &[f64],
    extremes: &ExtremeActionSet,
    d: &Distribution,
    type_index: usize,
) -> Result<Membership> {
    let vertices = reachable_vertices(extremes, d, type_index)?;
    hull_membership(strategy_row, &vertices)
}

/// Convex-hull membership by LP: minimize the L1 residual of
/// `Σ λ_k v_k − point` over the simplex.
pub fn hull_membership(point: &[f64], vertices: &[Vec<f64>]) -> Result<Membership> {
    if vertices.is_empty() {
        return Err(BlottoError::Structural("empty vertex list".into()));
    }
    let n = point.len();
    if vertices.iter().any(|v| v.len() != n) {
        return Err(BlottoError::Dimension(
            "vertex and point lengths differ".into(),
        ));
    }
    let mut lp = LinearProgram::new(Sense::Minimize);
    let lambda: Vec<usize> = (0..vertices.len())
        .map(|k| lp.add_variable(format!("lambda{k}"), 0.0, f64::INFINITY, 0.0))
        .collect();
    for j in 0..n {
        let plus = lp.add_variable(format!("ep{j}"), 0.0, f64::INFINITY, 1.0);
        let minus = lp.add_variable(format!("em{j}"), 0.0, f64::INFINITY, 1.0);
        let mut terms: Vec<(usize, f64)> = lambda
            .iter()
            .zip(vertices)
            .map(|(&l, v)| (l, v[j]))
            .collect();
        terms.push((plus, 1.0));
        terms.push((minus, -1.0));
        lp.add_constraint(terms, Relation::Eq, point[j]);
    }
    lp.add_constraint(
        lambda.iter().map(|&l| (l, 1.0)).collect(),
        Relation::Eq,
        1.0,
    );
    let r = solve_lp(&lp, 1e-11)?;
    if r.status != SolveStatus::Optimal {
        return Err(BlottoError::SolverStatus {
            context: "membership LP".into(),
            status: format!("{:?}", r.status),
        });
    }
    let weights: Vec<f64> = lambda.iter().map(|&l| r.values[l].max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let worst = (0..n)
        .map(|j| {
            let combo: f64 = weights.iter().zip(vertices).map(|(w, v)| w * v[j]).sum();
            (combo - point[j]).abs()
        })
        .fold(0.0, f64::max);
    let member = worst <= MEMBERSHIP_TOL;
    Ok(Membership {
        member,
        lambda: member.then_some(weights),
        residual: r.objective.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (2, 0)], true).unwrap()
    }

    #[test]
    fn g2_adjacency_has_cycle_and_diagonal() {
        let a = build_adjacency(&g2());
        let expected = vec![vec![1, 0, 1], vec![1, 1, 0], vec![0, 1, 1]];
        assert_eq!(a.rows(), expected.as_slice());
    }

    #[test]
    fn no_edges_gives_identity() {
        let a = build_adjacency(&Graph::new(3, vec![], true).unwrap());
        assert_eq!(a.rows(), &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn complete_graph_is_all_ones() {
        let a = build_adjacency(&Graph::complete(3).unwrap());
        assert!(a.rows().iter().flatten().all(|&v| v == 1));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::new(3, vec![(0, 3)], true).is_err());
        assert!(Graph::new(3, vec![(0, 1), (0, 1)], true).is_err());
        assert!(Graph::new(0, vec![], true).is_err());
    }

    #[test]
    fn extreme_counts() {
        let e2 = enumerate_extreme_actions(&build_adjacency(&g2())).unwrap();
        assert_eq!(e2.count(), 8);
        let e1 = enumerate_extreme_actions(&build_adjacency(&Graph::complete(3).unwrap())).unwrap();
        assert_eq!(e1.count(), 27);
        let single =
            enumerate_extreme_actions(&build_adjacency(&Graph::new(1, vec![], true).unwrap()))
                .unwrap();
        assert_eq!(single.count(), 1);
        assert_eq!(single.matrix(0).rows(), &[vec![1.0]]);
    }

    #[test]
    fn stranded_node_is_structural_error() {
        let g = Graph::new(2, vec![(0, 1)], false).unwrap();
        let err = enumerate_extreme_actions(&build_adjacency(&g)).unwrap_err();
        assert!(matches!(err, BlottoError::Structural(_)));
    }

    #[test]
    fn cycle_moves_mass_along_the_edge() {
        let adj = build_adjacency(&g2());
        let shift = TransitionMatrix::new(
            vec![
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
            &adj,
        )
        .unwrap();
        let d = Distribution::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(
            apply_transition(&shift, &d, 0).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
        let id = TransitionMatrix::identity(3);
        let d = Distribution::new(vec![vec![0.7, 0.1, 0.2]]).unwrap();
        assert_eq!(apply_transition(&id, &d, 0).unwrap(), vec![0.7, 0.1, 0.2]);
    }

    #[test]
    fn transition_off_edge_rejected() {
        let adj = build_adjacency(&g2());
        // 0 -> 2 is not an edge of the cycle.
        let bad = vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
        ];
        assert!(TransitionMatrix::new(bad, &adj).is_err());
    }

    #[test]
    fn g2_unit_mass_reaches_two_vertices() {
        let ext = enumerate_extreme_actions(&build_adjacency(&g2())).unwrap();
        let d = Distribution::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let vs = reachable_vertices(&ext, &d, 0).unwrap();
        assert_eq!(vs, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn complete_graph_reaches_every_unit_vector() {
        let ext =
            enumerate_extreme_actions(&build_adjacency(&Graph::complete(3).unwrap())).unwrap();
        let d = Distribution::new(vec![vec![0.0, 1.0, 0.0]]).unwrap();
        let vs = reachable_vertices(&ext, &d, 0).unwrap();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            assert!(vs.contains(&e));
        }
    }

    #[test]
    fn membership_of_vertices_midpoints_and_outsiders() {
        let ext = enumerate_extreme_actions(&build_adjacency(&g2())).unwrap();
        let d = Distribution::new(vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let m = membership(&[1.0, 0.0, 0.0], &ext, &d, 0).unwrap();
        assert!(m.member);
        let m = membership(&[0.5, 0.5, 0.0], &ext, &d, 0).unwrap();
        assert!(m.member);
        let lambda = m.lambda.unwrap();
        assert!((lambda[0] - 0.5).abs() < 1e-9 && (lambda[1] - 0.5).abs() < 1e-9);
        // Node 2 has no incoming admissible flow from node 0 in one step.
        let m = membership(&[0.5, 0.0, 0.5], &ext, &d, 0).unwrap();
        assert!(!m.member);
        assert!(m.residual > 0.5);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(Distribution::new(vec![vec![1.2, -0.2]]).is_err());
        assert!(Distribution::new(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(Distribution::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
    }
}

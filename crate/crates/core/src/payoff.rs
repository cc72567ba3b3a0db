//! Utilities: the clamped sign for one resource type, the reduction of
//! linearly convertible types to one, and the outcome interface for three
//! cyclically dominating types.
//!
//! For three types with ratios `I12`, `I23`, `I31` (type 1 beats type 2, type
//! 2 beats type 3, type 3 beats type 1), a node's remaining difference
//! `x = (δu, δv, δw)` is scored through three linear forms
//!
//! ```text
//! g1 = [1,       I23·I31, I31    ]·x
//! g2 = [I12,     1,       I12·I31]·x
//! g3 = [I12·I23, I23,     1      ]·x
//! ```
//!
//! and `π_oi(x) = max(min(g1,g2), min(g1,g3), min(g2,g3))`, the median.
//! Its sign decides who wins the node; [`elimination_oracle`] decides the
//! same question by simulating the fights directly.

use serde::{Deserialize, Serialize};

use crate::error::{BlottoError, Result};
use crate::graph::{validate_rows, Distribution};

/// Magnitudes below this count as zero in the elimination oracle.
pub const ZERO_TOL: f64 = 1e-10;

/// Pairwise conversion ratios; `None` marks pairs without a defined ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntrinsicMatrix {
    entries: Vec<Vec<Option<f64>>>,
}

impl IntrinsicMatrix {
    /// A square matrix with unit diagonal and positive entries.
    pub fn new(entries: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let m = entries.len();
        if m == 0 {
            return Err(BlottoError::validation("intrinsic", "must be nonempty"));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != m {
                return Err(BlottoError::validation(
                    format!("intrinsic[{i}]"),
                    format!("has {} entries, expected {m}", row.len()),
                ));
            }
            for (j, v) in row.iter().enumerate() {
                match *v {
                    Some(x) if !(x > 0.0) || !x.is_finite() => {
                        return Err(BlottoError::validation(
                            format!("intrinsic[{i}][{j}]"),
                            format!("ratio {x} must be positive"),
                        ))
                    }
                    None if i == j => {
                        return Err(BlottoError::validation(
                            format!("intrinsic[{i}][{i}]"),
                            "diagonal must be 1",
                        ))
                    }
                    Some(x) if i == j && (x - 1.0).abs() > 1e-12 => {
                        return Err(BlottoError::validation(
                            format!("intrinsic[{i}][{i}]"),
                            format!("diagonal must be 1, got {x}"),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { entries })
    }

    /// The cyclic-dominance matrix with `I12`, `I23`, `I31` set and the
    /// reverse pairs left undefined.
    pub fn cyclic(i12: f64, i23: f64, i31: f64) -> Result<Self> {
        Self::new(vec![
            vec![Some(1.0), Some(i12), None],
            vec![None, Some(1.0), Some(i23)],
            vec![Some(i31), None, Some(1.0)],
        ])
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries
            .get(i)
            .and_then(|r| r.get(j))
            .copied()
            .flatten()
    }

    pub fn entries(&self) -> &[Vec<Option<f64>>] {
        &self.entries
    }

    /// Checks the linear (convertible) conditions: every entry present,
    /// `I_ij·I_ji = 1` and `I_ik·I_kj = I_ij`.
    pub fn validate_linear(&self) -> Result<()> {
        let m = self.size();
        for i in 0..m {
            for j in 0..m {
                let Some(ij) = self.get(i, j) else {
                    return Err(BlottoError::validation(
                        format!("intrinsic[{i}][{j}]"),
                        "linear mode needs every ratio",
                    ));
                };
                let ji = self.get(j, i).unwrap_or(f64::NAN);
                if !((ij * ji - 1.0).abs() <= 1e-9) {
                    return Err(BlottoError::validation(
                        format!("intrinsic[{i}][{j}]"),
                        format!("not reversible: {ij}·{ji} != 1"),
                    ));
                }
                for k in 0..m {
                    let ik = self.get(i, k).unwrap_or(f64::NAN);
                    let kj = self.get(k, j).unwrap_or(f64::NAN);
                    if !((ik * kj - ij).abs() <= 1e-9 * ij.max(1.0)) {
                        return Err(BlottoError::validation(
                            format!("intrinsic[{i}][{j}]"),
                            format!("not multiplicative through type {k}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The three dominance ratios `(I12, I23, I31)` of a 3×3 matrix.
    pub fn cyclic_ratios(&self) -> Result<(f64, f64, f64)> {
        if self.size() != 3 {
            return Err(BlottoError::validation(
                "intrinsic",
                format!(
                    "cyclic dominance needs exactly 3 types, got {}; with four or more types \
                     the elimination outcome is not unique",
                    self.size()
                ),
            ));
        }
        let need = |i: usize, j: usize| {
            self.get(i, j).ok_or_else(|| {
                BlottoError::validation(format!("intrinsic[{i}][{j}]"), "dominance ratio missing")
            })
        };
        Ok((need(0, 1)?, need(1, 2)?, need(2, 0)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeParams {
    pub intrinsic: IntrinsicMatrix,
    pub threshold_c: f64,
}

impl OutcomeParams {
    pub fn new(intrinsic: IntrinsicMatrix, threshold_c: f64) -> Result<Self> {
        if !(threshold_c > 0.0) || !threshold_c.is_finite() {
            return Err(BlottoError::validation(
                "c",
                format!("threshold {threshold_c} must be positive"),
            ));
        }
        intrinsic.cyclic_ratios()?;
        Ok(Self {
            intrinsic,
            threshold_c,
        })
    }

    /// True when some dominance ratio is not strictly above one, a regime in
    /// which the outcome interface is not known to match the fights.
    pub fn weak_dominance(&self) -> bool {
        let (a, b, c) = self
            .intrinsic
            .cyclic_ratios()
            .expect("validated on construction");
        a <= 1.0 || b <= 1.0 || c <= 1.0
    }
}

/// An `M×N` allocation: row `t` holds the fractions of type `t` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strategy {
    rows: Vec<Vec<f64>>,
}

impl Strategy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_rows("strategy", &rows)?;
        Ok(Self { rows })
    }

    /// Builds a strategy without checking row sums; for values produced by
    /// the solver's own arithmetic.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
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

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.rows[t][j]
    }

    /// Entrywise equality within `tol`.
    pub fn approx_eq(&self, other: &Strategy, tol: f64) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
            })
    }
}

impl From<Distribution> for Strategy {
    fn from(d: Distribution) -> Self {
        Strategy {
            rows: d.rows().to_vec(),
        }
    }
}

/// `−1` below `−C`, `x/C` in between, `1` above `C`.
pub fn sgn_clamped(x: f64, c: f64) -> f64 {
    (x / c).clamp(-1.0, 1.0)
}

fn check_shapes(sx: &Strategy, sy: &Strategy) -> Result<()> {
    if sx.types() != sy.types() || sx.nodes() != sy.nodes() {
        return Err(BlottoError::Dimension(format!(
            "strategies are {}x{} and {}x{}",
            sx.types(),
            sx.nodes(),
            sy.types(),
            sy.nodes()
        )));
    }
    Ok(())
}

/// Nodes won minus nodes lost, with the clamp ramp between.
pub fn utility_homogeneous(sx: &Strategy, sy: &Strategy, c: f64) -> Result<f64> {
    check_shapes(sx, sy)?;
    if sx.types() != 1 {
        return Err(BlottoError::Dimension(format!(
            "homogeneous utility needs one type, got {}",
            sx.types()
        )));
    }
    Ok(sx
        .row(0)
        .iter()
        .zip(sy.row(0))
        .map(|(a, b)| sgn_clamped(a - b, c))
        .sum())
}

/// Converts all types into reference type `f` and renormalizes the combined
/// per-node amounts to fractions.
///
/// One unit of type `i` is worth `I[i][f]` units of type `f`, so node `j`
/// holds `Σ_i I[i][f]·totals_i·d[i][j]` in type-`f` units.
pub fn reduce_linear_heterogeneous(
    d: &Distribution,
    intrinsic: &IntrinsicMatrix,
    reference_type: usize,
    totals: &[f64],
) -> Result<Distribution> {
    let m = d.types();
    if intrinsic.size() != m {
        return Err(BlottoError::Dimension(format!(
            "intrinsic is {0}x{0}, distribution has {m} types",
            intrinsic.size()
        )));
    }
    if totals.len() != m {
        return Err(BlottoError::validation(
            "totals",
            format!("expected {m} entries, got {}", totals.len()),
        ));
    }
    if let Some(i) = totals.iter().position(|t| !(*t > 0.0)) {
        return Err(BlottoError::validation(
            format!("totals[{i}]"),
            "must be positive",
        ));
    }
    if reference_type >= m {
        return Err(BlottoError::validation(
            "reference_type",
            format!("out of range 0..{m}"),
        ));
    }
    intrinsic.validate_linear()?;
    let n = d.nodes();
    let mut combined = vec![0.0; n];
    for i in 0..m {
        let ratio = intrinsic
            .get(i, reference_type)
            .expect("linear matrices are complete");
        for (j, c) in combined.iter_mut().enumerate() {
            *c += ratio * totals[i] * d.row(i)[j];
        }
    }
    let sum: f64 = combined.iter().sum();
    Distribution::new(vec![combined.iter().map(|c| c / sum).collect()])
}

/// Coefficients of the three linear forms of the outcome interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdhForms {
    pub g: [[f64; 3]; 3],
}

impl CdhForms {
    pub fn new(intrinsic: &IntrinsicMatrix) -> Result<Self> {
        let (i12, i23, i31) = intrinsic.cyclic_ratios()?;
        Ok(Self {
            g: [
                [1.0, i23 * i31, i31],
                [i12, 1.0, i12 * i31],
                [i12 * i23, i23, 1.0],
            ],
        })
    }

    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let f = |c: &[f64; 3]| c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
        [f(&self.g[0]), f(&self.g[1]), f(&self.g[2])]
    }

    pub fn pi(&self, x: [f64; 3]) -> f64 {
        median3(self.eval(x))
    }
}

/// Middle value of three numbers.
pub fn median3(g: [f64; 3]) -> f64 {
    let [a, b, c] = g;
    a.min(b).max(a.min(c)).max(b.min(c))
}

/// `(g1, g2, g3)` at `delta`.
pub fn g_components(delta: [f64; 3], intrinsic: &IntrinsicMatrix) -> Result<[f64; 3]> {
    Ok(CdhForms::new(intrinsic)?.eval(delta))
}

/// The outcome interface value at `delta`: positive means Player 1 holds the
/// node after all eliminations.
pub fn pi_oi(delta: [f64; 3], intrinsic: &IntrinsicMatrix) -> Result<f64> {
    Ok(CdhForms::new(intrinsic)?.pi(delta))
}

/// Per-node clamped outcomes `clamp(π_oi / C)`.
pub fn cdh_node_outcomes(sx: &Strategy, sy: &Strategy, params: &OutcomeParams) -> Result<Vec<f64>> {
    check_shapes(sx, sy)?;
    if sx.types() != 3 {
        return Err(BlottoError::Dimension(format!(
            "CDH utility needs 3 types, got {}",
            sx.types()
        )));
    }
    let forms = CdhForms::new(&params.intrinsic)?;
    Ok((0..sx.nodes())
        .map(|j| {
            let x = [
                sx.get(0, j) - sy.get(0, j),
                sx.get(1, j) - sy.get(1, j),
                sx.get(2, j) - sy.get(2, j),
            ];
            sgn_clamped(forms.pi(x), params.threshold_c)
        })
        .collect())
}

pub fn u_cdh(sx: &Strategy, sy: &Strategy, params: &OutcomeParams) -> Result<f64> {
    Ok(cdh_node_outcomes(sx, sy, params)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elimination {
    /// +1 when Player 1's robots survive, −1 for Player 2, 0 when nothing is left.
    pub sign: i8,
    pub remainder: [f64; 3],
}

/// Plays out the fights at one node.
///
/// Pairs are scanned in the order (1,2), (1,3), (2,3); the first pair with
/// opposite signs fights along its dominance direction until one side is
/// gone, and the scan restarts. When all surviving entries share a sign that
/// sign is the winner.
pub fn elimination_oracle(delta: [f64; 3], intrinsic: &IntrinsicMatrix) -> Result<Elimination> {
    let (i12, i23, i31) = intrinsic.cyclic_ratios()?;
    // (a, b, dominator, ratio): the dominator kills `ratio` of the other per unit.
    let pairs = [
        (0usize, 1usize, 0usize, i12),
        (0, 2, 2, i31),
        (1, 2, 1, i23),
    ];
    let mut x = delta.map(|v| if v.abs() < ZERO_TOL { 0.0 } else { v });
    // Each exchange zeroes an entry, so the scan settles in at most two rounds.
    for _ in 0..10 {
        let Some(&(a, b, dom, ratio)) = pairs.iter().find(|&&(a, b, _, _)| x[a] * x[b] < 0.0)
        else {
            break;
        };
        let other = if dom == a { b } else { a };
        let (strong, weak) = (x[dom].abs(), x[other].abs());
        if strong * ratio >= weak {
            x[dom] = x[dom].signum() * (strong - weak / ratio);
            x[other] = 0.0;
        } else {
            x[other] = x[other].signum() * (weak - strong * ratio);
            x[dom] = 0.0;
        }
        for v in &mut x {
            if v.abs() < ZERO_TOL {
                *v = 0.0;
            }
        }
    }
    let sign = if x.iter().any(|&v| v > 0.0) {
        1
    } else if x.iter().any(|&v| v < 0.0) {
        -1
    } else {
        0
    };
    Ok(Elimination { sign, remainder: x })
}

/// The per-node scoring rule of a game.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilityModel {
    /// One resource type scored by the clamped sign with threshold `c`.
    Homogeneous { c: f64 },
    /// Three cyclically dominating types.
    Cdh(OutcomeParams),
}

impl UtilityModel {
    pub fn threshold(&self) -> f64 {
        match self {
            UtilityModel::Homogeneous { c } => *c,
            UtilityModel::Cdh(p) => p.threshold_c,
        }
    }

    pub fn types(&self) -> usize {
        match self {
            UtilityModel::Homogeneous { .. } => 1,
            UtilityModel::Cdh(_) => 3,
        }
    }

    /// Player 1's utility `u(sx, sy)`.
    pub fn utility(&self, sx: &Strategy, sy: &Strategy) -> Result<f64> {
        match self {
            UtilityModel::Homogeneous { c } => utility_homogeneous(sx, sy, *c),
            UtilityModel::Cdh(p) => u_cdh(sx, sy, p),
        }
    }
}

//! Simplex geometry after the spectral step: SCORE normalization,
//! successive projection (SPA) vertex hunting, and barycentric weight
//! recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtmError};
use crate::tensor::{dot, Matrix};

/// Relative threshold on `σ_min / σ_max` below which a vertex matrix is
/// treated as singular.
pub const VERTEX_CONDITION_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    /// Row `i` is `xi[kept[i], 1..] / xi[kept[i], 0]`.
    pub s: Matrix,
    pub first_col: Vec<f64>,
    /// Input rows with a strictly positive first coordinate.
    pub kept: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSet {
    pub indices: Vec<usize>,
    /// Copies of the selected input rows, in selection order.
    pub v: Matrix,
}

/// Divides every row by its first entry and drops the first column. Rows
/// whose first entry is not strictly positive are skipped.
pub fn score_normalize(xi: &Matrix) -> Result<ScoreResult> {
    let (n, k) = xi.shape();
    if k == 0 {
        return Err(TtmError::InvalidArgument("SCORE needs at least one column".into()));
    }
    let kept: Vec<usize> = (0..n).filter(|&i| xi[(i, 0)] > 0.0).collect();
    if kept.is_empty() {
        return Err(TtmError::Degenerate(
            "every row has a non-positive leading coordinate".into(),
        ));
    }
    let first_col: Vec<f64> = kept.iter().map(|&i| xi[(i, 0)]).collect();
    let s = Matrix::from_fn(kept.len(), k - 1, |r, c| xi[(kept[r], c + 1)] / first_col[r]);
    Ok(ScoreResult { s, first_col, kept })
}

/// Successive projection: pick the row of largest norm, project every row
/// onto the orthogonal complement of the picked (residual) row, repeat.
///
/// `k` vertices of a simplex only span `k` linear dimensions when the
/// points have at least `k` coordinates. When they have fewer (a SCORE
/// cloud has `K − 1`), each point is lifted to `(1, point)` first, which
/// turns affinely independent vertices into linearly independent ones.
/// Ties go to the lowest row index.
pub fn spa_vertex_hunt(points: &Matrix, k: usize) -> Result<VertexSet> {
    let (n, dim) = points.shape();
    if k == 0 || k > n {
        return Err(TtmError::InvalidArgument(format!(
            "cannot pick {k} vertices from {n} points"
        )));
    }
    let mut resid = if dim < k {
        points.with_leading_ones()
    } else {
        points.clone()
    };
    let width = resid.cols();
    let mut indices = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_norm = f64::NEG_INFINITY;
        for i in 0..n {
            if indices.contains(&i) {
                continue;
            }
            let nrm = dot(resid.row(i), resid.row(i));
            if nrm > best_norm {
                best_norm = nrm;
                best = i;
            }
        }
        indices.push(best);
        let len = best_norm.sqrt();
        if len > 0.0 {
            let u: Vec<f64> = resid.row(best).iter().map(|x| x / len).collect();
            for i in 0..n {
                let row = resid.row_mut(i);
                let c = dot(row, &u);
                for (x, ui) in row.iter_mut().zip(&u) {
                    *x -= c * ui;
                }
            }
        }
        debug_assert_eq!(resid.cols(), width);
    }
    Ok(VertexSet {
        v: points.select_rows(&indices),
        indices,
    })
}

/// Ratio of the smallest to the largest singular value.
pub fn condition_ratio(m: &Matrix) -> f64 {
    let sv = m.to_nalgebra().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solves `Ω · v_star = s_star`, clips negative weights to zero and
/// rescales each row to sum to one. A row that clips to all zeros becomes
/// uniform `1/K`.
pub fn recover_weights(s_star: &Matrix, v_star: &Matrix) -> Result<Matrix> {
    let k = v_star.rows();
    if v_star.cols() != k || s_star.cols() != k {
        return Err(TtmError::Shape(format!(
            "vertex matrix {:?} and points {:?} are incompatible",
            v_star.shape(),
            s_star.shape()
        )));
    }
    let ratio = condition_ratio(v_star);
    if !(ratio > VERTEX_CONDITION_FLOOR) {
        return Err(TtmError::SingularVertices { ratio });
    }
    let inv = v_star
        .to_nalgebra()
        .try_inverse()
        .ok_or(TtmError::SingularVertices { ratio })?;
    let mut omega = s_star.matmul(&Matrix::from_nalgebra(&inv))?;
    for i in 0..omega.rows() {
        let row = omega.row_mut(i);
        row.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|x| *x /= total);
        } else {
            row.fill(1.0 / k as f64);
        }
    }
    Ok(omega)
}

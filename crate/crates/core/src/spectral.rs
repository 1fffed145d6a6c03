//! Mode-wise spectral step: the second-moment matrices `Q̂`, their leading
//! eigenvectors, and optional HOOI refinement of the three subspaces.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtmError};
use crate::tensor::{multilinear, unfold, Matrix, Tensor3};

/// Largest mode dimension handled by the dense eigensolver.
pub const MAX_MODE_DIM: usize = 5000;

/// Leading eigenvectors (`xi`, orthonormal columns) and eigenvalues
/// (descending) for each of the three modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralFactors {
    pub xi: [Matrix; 3],
    pub eigvals: [Vec<f64>; 3],
}

impl SpectralFactors {
    pub fn ranks(&self) -> [usize; 3] {
        [self.xi[0].cols(), self.xi[1].cols(), self.xi[2].cols()]
    }
}

/// Second-moment matrix of a mode unfolding.
///
/// Modes 1 and 2 give `Y Yᵀ`. Mode 3 subtracts the multinomial variance
/// term, `Y Yᵀ − diag(Y 1) / M`, when `doc_length` is `Some(M)`; `None`
/// is the noiseless case and skips the correction.
pub fn build_q(y_a: &Matrix, mode: usize, doc_length: Option<u64>) -> Result<Matrix> {
    if !(1..=3).contains(&mode) {
        return Err(TtmError::InvalidArgument(format!("mode must be 1, 2 or 3, got {mode}")));
    }
    let mut q = y_a.gram_rows();
    if mode == 3 {
        if let Some(m) = doc_length {
            if m == 0 {
                return Err(TtmError::InvalidArgument("document length must be positive".into()));
            }
            let inv = 1.0 / m as f64;
            for (i, s) in y_a.row_sums().into_iter().enumerate() {
                q[(i, i)] -= inv * s;
            }
        }
    }
    symmetrize(&mut q);
    Ok(q)
}

fn symmetrize(q: &mut Matrix) {
    let n = q.rows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
}

/// Fixes the sign of an eigenvector: entry sum non-negative; when the sum
/// vanishes, the first entry of largest magnitude is made positive.
fn orient(col: &mut [f64]) {
    let sum: f64 = col.iter().sum();
    let l1: f64 = col.iter().map(|x| x.abs()).sum();
    let flip = if sum.abs() > 1e-12 * l1 {
        sum < 0.0
    } else {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        col[best] < 0.0
    };
    if flip {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`k` eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn leading_eigvecs(q: &Matrix, k: usize) -> Result<(Matrix, Vec<f64>)> {
    let n = q.rows();
    if q.cols() != n {
        return Err(TtmError::Shape(format!(
            "expected a square matrix, got {:?}",
            q.shape()
        )));
    }
    if k == 0 || k > n {
        return Err(TtmError::InvalidArgument(format!(
            "cannot take {k} eigenvectors of a {n}×{n} matrix"
        )));
    }
    if n > MAX_MODE_DIM {
        return Err(TtmError::DimensionTooLarge {
            mode: 0,
            dim: n,
            max: MAX_MODE_DIM,
        });
    }
    let qn = q.frobenius_norm();
    let eig = SymmetricEigen::try_new(q.to_nalgebra(), f64::EPSILON, 0)
        .ok_or(TtmError::EigenNonConvergence { residual: f64::NAN })?;

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in solver order, so the output is reproducible.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut xi = Matrix::zeros(n, k);
    let mut vals = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        orient(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            xi[(i, c)] = v;
        }
        vals.push(eig.eigenvalues[idx]);
    }

    let mut resid = q.matmul(&xi)?;
    for i in 0..n {
        for (c, v) in vals.iter().enumerate() {
            resid[(i, c)] -= xi[(i, c)] * v;
        }
    }
    let rel = resid.frobenius_norm() / qn.max(f64::MIN_POSITIVE);
    if !rel.is_finite() || (qn > 0.0 && rel > 1e-9) {
        return Err(TtmError::EigenNonConvergence { residual: rel });
    }
    Ok((xi, vals))
}

fn check_ranks(dims: [usize; 3], ranks: [usize; 3]) -> Result<()> {
    for a in 0..3 {
        if dims[a] > MAX_MODE_DIM {
            return Err(TtmError::DimensionTooLarge {
                mode: a + 1,
                dim: dims[a],
                max: MAX_MODE_DIM,
            });
        }
        if ranks[a] == 0 || ranks[a] > dims[a] {
            return Err(TtmError::InvalidArgument(format!(
                "mode {} rank {} must be in 1..={}",
                a + 1,
                ranks[a],
                dims[a]
            )));
        }
    }
    Ok(())
}

/// HOSVD subspaces: leading eigenvectors of `build_q` for every mode.
pub fn hosvd(y: &Tensor3, ranks: [usize; 3], doc_length: Option<u64>) -> Result<SpectralFactors> {
    check_ranks(y.dims(), ranks)?;
    let mut xi = Vec::with_capacity(3);
    let mut eigvals = Vec::with_capacity(3);
    for mode in 1..=3 {
        let q = build_q(&unfold(y, mode)?, mode, doc_length)?;
        let (x, v) = leading_eigvecs(&q, ranks[mode - 1])?;
        xi.push(x);
        eigvals.push(v);
    }
    Ok(SpectralFactors {
        xi: xi.try_into().expect("three modes"),
        eigvals: eigvals.try_into().expect("three modes"),
    })
}

/// Higher-order orthogonal iteration started from `factors`.
///
/// Each sweep replaces every mode's subspace by the top left singular
/// vectors of `Y⁽ᵃ⁾ (Ξ⁽ᵇ⁾ ⊗ Ξ⁽ᶜ⁾)`, all three computed from the previous
/// iterate. Eigenvalues of the result are the squared singular values of
/// those projected unfoldings. `iters = 0` returns the input unchanged.
pub fn hooi_refine(y: &Tensor3, factors: &SpectralFactors, iters: usize) -> Result<SpectralFactors> {
    let dims = y.dims();
    let ranks = factors.ranks();
    for a in 0..3 {
        if factors.xi[a].rows() != dims[a] {
            return Err(TtmError::Shape(format!(
                "mode {} factor has {} rows for dimension {}",
                a + 1,
                factors.xi[a].rows(),
                dims[a]
            )));
        }
    }
    check_ranks(dims, ranks)?;
    let mut cur = factors.clone();
    for _ in 0..iters {
        let t: [Matrix; 3] = [cur.xi[0].transpose(), cur.xi[1].transpose(), cur.xi[2].transpose()];
        let mut next_xi = Vec::with_capacity(3);
        let mut next_vals = Vec::with_capacity(3);
        for mode in 1..=3 {
            let eye = Matrix::identity(dims[mode - 1]);
            let proj = match mode {
                1 => multilinear(y, &eye, &t[1], &t[2])?,
                2 => multilinear(y, &t[0], &eye, &t[2])?,
                _ => multilinear(y, &t[0], &t[1], &eye)?,
            };
            let p = unfold(&proj, mode)?;
            let (x, v) = leading_eigvecs(&p.gram_rows(), ranks[mode - 1])?;
            next_xi.push(x);
            next_vals.push(v);
        }
        cur = SpectralFactors {
            xi: next_xi.try_into().expect("three modes"),
            eigvals: next_vals.try_into().expect("three modes"),
        };
    }
    Ok(cur)
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns.
pub fn subspace_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return Err(TtmError::Shape(format!("{:?} vs {:?}", u.shape(), v.shape())));
    }
    // ‖(I − UUᵀ)V‖₂ keeps full precision for nearly equal spans.
    let resid = v.to_nalgebra() - u.to_nalgebra() * (u.to_nalgebra().transpose() * v.to_nalgebra());
    Ok(resid.singular_values().iter().cloned().fold(0.0, f64::max).min(1.0))
}

//! Dense order-3 tensors and row-major matrices.
//!
//! # Layout
//!
//! [`Tensor3`] stores entry `(i, j, r)` at offset `(i * n2 + j) * n3 + r`
//! (last index fastest). All indices are 0-based in code; the 1-based
//! convention only appears in file formats.
//!
//! # Matricization
//!
//! The column orderings of [`unfold`] are fixed independently of the memory
//! layout. In 0-based form:
//!
//! | mode | shape            | entry `(i, j, r)` lands at |
//! |------|------------------|----------------------------|
//! | 1    | `n1 × (n2·n3)`   | `(i, n3·j + r)`            |
//! | 2    | `n2 × (n1·n3)`   | `(j, n3·i + r)`            |
//! | 3    | `n3 × (n1·n2)`   | `(r, n2·i + j)`            |
//!
//! With these orderings the Tucker identity reads
//! `unfold(G·(A1,A2,A3), a) = A_a · unfold(G, a) · (A_b ⊗ A_c)ᵀ` for `b < c`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtmError};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TtmError::Shape(format!(
                "matrix buffer has {} entries, expected {rows}×{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(TtmError::Shape(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · selfᵀ`, exploiting symmetry.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let v = dot(ri, self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entrywise difference; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Prepends a column of ones.
    pub fn with_leading_ones(&self) -> Matrix {
        Matrix::from_fn(
            self.rows,
            self.cols + 1,
            |i, j| {
                if j == 0 {
                    1.0
                } else {
                    self[(i, j - 1)]
                }
            },
        )
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}×{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense order-3 tensor; see the module docs for the layout.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(TtmError::Shape(format!("tensor dims must be positive, got {dims:?}")));
        }
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(TtmError::Shape(format!(
                "tensor buffer has {} entries, expected {}×{}×{}",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for r in 0..dims[2] {
                    data.push(f(i, j, r));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, r: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + r
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, r: usize) -> f64 {
        self.data[self.offset(i, j, r)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, r: usize, v: f64) {
        let o = self.offset(i, j, r);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The tube `(i, j, ·)`.
    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j, 0);
        &self.data[o..o + self.dims[2]]
    }

    pub fn tube_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j, 0);
        let n3 = self.dims[2];
        &mut self.data[o..o + n3]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn l1_distance(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(TtmError::Shape(format!(
                "tensor dims differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum())
    }

    /// Restricts the tensor to the given indices along `mode` (1-based mode).
    pub fn select(&self, mode: usize, idx: &[usize]) -> Result<Tensor3> {
        check_mode(mode)?;
        let mut dims = self.dims;
        dims[mode - 1] = idx.len();
        if idx.is_empty() {
            return Err(TtmError::Shape(format!("empty selection along mode {mode}")));
        }
        if let Some(&bad) = idx.iter().find(|&&x| x >= self.dims[mode - 1]) {
            return Err(TtmError::Shape(format!(
                "index {bad} out of range for mode {mode} of size {}",
                self.dims[mode - 1]
            )));
        }
        Ok(match mode {
            1 => Tensor3::from_fn(dims, |i, j, r| self.get(idx[i], j, r)),
            2 => Tensor3::from_fn(dims, |i, j, r| self.get(i, idx[j], r)),
            _ => Tensor3::from_fn(dims, |i, j, r| self.get(i, j, idx[r])),
        })
    }
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor3 {:?} {:?}", self.dims, self.data)
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(TtmError::InvalidArgument(format!("mode must be 1, 2 or 3, got {mode}")))
    }
}

/// Mode-`mode` matricization (`mode` ∈ {1,2,3}).
pub fn unfold(t: &Tensor3, mode: usize) -> Result<Matrix> {
    check_mode(mode)?;
    let [n1, n2, n3] = t.dims;
    Ok(match mode {
        // Row-major layout already is the mode-1 unfolding.
        1 => Matrix {
            rows: n1,
            cols: n2 * n3,
            data: t.data.clone(),
        },
        2 => {
            let mut m = Matrix::zeros(n2, n1 * n3);
            for i in 0..n1 {
                for j in 0..n2 {
                    let src = t.tube(i, j);
                    m.row_mut(j)[n3 * i..n3 * (i + 1)].copy_from_slice(src);
                }
            }
            m
        }
        _ => {
            let mut m = Matrix::zeros(n3, n1 * n2);
            for i in 0..n1 {
                for j in 0..n2 {
                    let col = n2 * i + j;
                    for (r, &v) in t.tube(i, j).iter().enumerate() {
                        m[(r, col)] = v;
                    }
                }
            }
            m
        }
    })
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
    check_mode(mode)?;
    let [n1, n2, n3] = dims;
    let expected = match mode {
        1 => (n1, n2 * n3),
        2 => (n2, n1 * n3),
        _ => (n3, n1 * n2),
    };
    if m.shape() != expected || dims.contains(&0) {
        return Err(TtmError::Shape(format!(
            "cannot fold a {}×{} matrix along mode {mode} into {dims:?}",
            m.rows, m.cols
        )));
    }
    Ok(match mode {
        1 => Tensor3 {
            dims,
            data: m.data.clone(),
        },
        2 => Tensor3::from_fn(dims, |i, j, r| m[(j, n3 * i + r)]),
        _ => Tensor3::from_fn(dims, |i, j, r| m[(r, n2 * i + j)]),
    })
}

/// Kronecker product, `(A⊗B)[i·p + k, j·q + l] = A[i,j]·B[k,l]` with `B` of shape `p×q`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = b.shape();
    let mut out = Matrix::zeros(a.rows * p, a.cols * q);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Multilinear product `t ×₁ m1 ×₂ m2 ×₃ m3`:
/// `out[a,b,c] = Σ t[x,y,z]·m1[a,x]·m2[b,y]·m3[c,z]`.
///
/// Each factor's column count must match the corresponding tensor dim.
pub fn multilinear(t: &Tensor3, m1: &Matrix, m2: &Matrix, m3: &Matrix) -> Result<Tensor3> {
    let [n1, n2, n3] = t.dims;
    if m1.cols != n1 || m2.cols != n2 || m3.cols != n3 {
        return Err(TtmError::Shape(format!(
            "factor shapes {:?}, {:?}, {:?} do not act on tensor dims {:?}",
            m1.shape(),
            m2.shape(),
            m3.shape(),
            t.dims
        )));
    }
    let (p1, p2, p3) = (m1.rows, m2.rows, m3.rows);

    // Contract the third index: u[x,y,c] = Σ_z t[x,y,z] m3[c,z].
    let mut u = vec![0.0; n1 * n2 * p3];
    for xy in 0..n1 * n2 {
        let tube = &t.data[xy * n3..(xy + 1) * n3];
        for c in 0..p3 {
            u[xy * p3 + c] = dot(tube, m3.row(c));
        }
    }
    // Second index: v[x,b,c] = Σ_y u[x,y,c] m2[b,y].
    let mut v = vec![0.0; n1 * p2 * p3];
    for x in 0..n1 {
        for y in 0..n2 {
            let src = &u[(x * n2 + y) * p3..(x * n2 + y + 1) * p3];
            for b in 0..p2 {
                let w = m2[(b, y)];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut v[(x * p2 + b) * p3..(x * p2 + b + 1) * p3];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    // First index: out[a,b,c] = Σ_x v[x,b,c] m1[a,x].
    let mut out = vec![0.0; p1 * p2 * p3];
    let slab = p2 * p3;
    for a in 0..p1 {
        let dst = &mut out[a * slab..(a + 1) * slab];
        for x in 0..n1 {
            let w = m1[(a, x)];
            if w == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&v[x * slab..(x + 1) * slab]) {
                *d += w * s;
            }
        }
    }
    Tensor3::from_vec([p1, p2, p3], out)
}

/// Tucker reconstruction `D[i,j,r] = Σ g[k1,k2,k3]·a1[i,k1]·a2[j,k2]·a3[r,k3]`.
pub fn reconstruct(g: &Tensor3, a1: &Matrix, a2: &Matrix, a3: &Matrix) -> Result<Tensor3> {
    multilinear(g, a1, a2, a3)
}

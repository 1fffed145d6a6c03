//! HOSVD-based estimation of the Tucker topic model.
//!
//! Each factor comes from the leading eigenvectors of its mode's `Q̂`:
//! modes 1 and 2 hunt vertices directly on the rows of `Ξ̂`, mode 3 first
//! SCORE-normalizes them. The core is read off the HOSVD core
//! `Ŝ = Y·(Ξ̂₁ᵀ, Ξ̂₂ᵀ, Ξ̂₃ᵀ)` by mapping it back through the vertex
//! matrices, then clipped and renormalized.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StageExt, TtmError};
use crate::simplex::{recover_weights, score_normalize, spa_vertex_hunt, ScoreResult, VertexSet};
use crate::spectral::{build_q, hooi_refine, hosvd, leading_eigvecs, SpectralFactors, MAX_MODE_DIM};
use crate::tensor::{kronecker, multilinear, reconstruct, unfold, Matrix, Tensor3};

/// Default sparse-threshold constant `c'`.
pub const DEFAULT_SPARSE_C: f64 = 0.005;

/// Tucker components: `a1` (N1×K1) and `a2` (N2×K2) are row-stochastic,
/// `a3` (R×K3) is column-stochastic, and every tube `g[k1, k2, ·]` sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub g: Tensor3,
}

impl TuckerModel {
    pub fn ranks(&self) -> [usize; 3] {
        self.g.dims()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a1.rows(), self.a2.rows(), self.a3.rows()]
    }

    /// Expected frequency tensor `G·(A1, A2, A3)`.
    pub fn expected(&self) -> Result<Tensor3> {
        reconstruct(&self.g, &self.a1, &self.a2, &self.a3)
    }

    /// Topic proportions per document, `W3 = M3(G) (A1 ⊗ A2)ᵀ` (K3 × N1·N2).
    pub fn topic_weights(&self) -> Result<Matrix> {
        unfold(&self.g, 3)?.matmul(&kronecker(&self.a1, &self.a2).transpose())
    }

    /// Largest deviation from the stochasticity constraints. Columns of `a3`
    /// that are entirely zero are not counted.
    pub fn constraint_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in self.a1.row_sums().into_iter().chain(self.a2.row_sums()) {
            worst = worst.max((s - 1.0).abs());
        }
        for s in self.a3.column_sums() {
            worst = worst.max((s - 1.0).abs());
        }
        let [k1, k2, _] = self.g.dims();
        for x in 0..k1 {
            for y in 0..k2 {
                worst = worst.max((self.g.tube(x, y).iter().sum::<f64>() - 1.0).abs());
            }
        }
        let neg = [&self.a1, &self.a2, &self.a3]
            .iter()
            .flat_map(|m| m.as_slice().iter())
            .chain(self.g.as_slice())
            .fold(0.0f64, |acc, &v| acc.max(-v));
        worst.max(neg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub ranks: [usize; 3],
    /// HOOI sweeps applied to the HOSVD subspaces; 0 disables refinement.
    pub hooi_iters: usize,
    /// Sparse-threshold constant `c'`; 0 keeps the whole vocabulary.
    pub sparse_c_prime: f64,
    /// The input is the expected frequency tensor itself: no variance
    /// correction in `Q̂₃` and no vocabulary thresholding.
    pub oracle: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ranks: [2, 2, 3],
            hooi_iters: 0,
            sparse_c_prime: DEFAULT_SPARSE_C,
            oracle: false,
        }
    }
}

impl FitConfig {
    pub fn new(ranks: [usize; 3]) -> Self {
        Self {
            ranks,
            ..Self::default()
        }
    }

    pub fn dense(ranks: [usize; 3]) -> Self {
        Self {
            ranks,
            sparse_c_prime: 0.0,
            ..Self::default()
        }
    }

    pub fn oracle(ranks: [usize; 3]) -> Self {
        Self {
            ranks,
            sparse_c_prime: 0.0,
            oracle: true,
            ..Self::default()
        }
    }

    pub fn with_hooi(mut self, iters: usize) -> Self {
        self.hooi_iters = iters;
        self
    }

    pub fn with_sparse(mut self, c_prime: f64) -> Self {
        self.sparse_c_prime = c_prime;
        self
    }

    pub fn validate(&self, dims: [usize; 3]) -> Result<()> {
        for a in 0..3 {
            if dims[a] > MAX_MODE_DIM {
                return Err(TtmError::DimensionTooLarge {
                    mode: a + 1,
                    dim: dims[a],
                    max: MAX_MODE_DIM,
                });
            }
            if self.ranks[a] == 0 || self.ranks[a] > dims[a] {
                return Err(TtmError::InvalidArgument(format!(
                    "mode {} rank {} must be in 1..={}",
                    a + 1,
                    self.ranks[a],
                    dims[a]
                )));
            }
        }
        if !(self.sparse_c_prime >= 0.0 && self.sparse_c_prime.is_finite()) {
            return Err(TtmError::InvalidArgument(format!(
                "sparse constant must be a finite non-negative number, got {}",
                self.sparse_c_prime
            )));
        }
        Ok(())
    }

    fn centering(&self, doc_length: u64) -> Option<u64> {
        (!self.oracle).then_some(doc_length)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: TuckerModel,
    /// Retained vocabulary (0-based word indices, ascending).
    pub vocab: Vec<usize>,
    /// Words below the frequency threshold; their `a3` rows are zero.
    pub dropped_words: Vec<usize>,
    /// Retained words whose leading mode-3 eigenvector entry was not
    /// positive; their `a3` rows are zero as well.
    pub nonpositive_words: Vec<usize>,
    pub q0: Vec<f64>,
    /// Selected vertex rows per mode; mode-3 indices are word indices.
    pub vertex_indices: [Vec<usize>; 3],
    pub eigvals: [Vec<f64>; 3],
    pub hooi_iters: usize,
}

/// Words whose average frequency reaches `c'·sqrt(log N_R / (N1·N2·M))`,
/// with `N_R = max(N1, N2, R)`. `c' = 0` keeps every word.
pub fn threshold_vocab(y: &Tensor3, doc_length: u64, c_prime: f64) -> Result<Vec<usize>> {
    if !(c_prime >= 0.0) {
        return Err(TtmError::InvalidArgument(format!(
            "c' must be non-negative, got {c_prime}"
        )));
    }
    let [n1, n2, r] = y.dims();
    if c_prime == 0.0 {
        return Ok((0..r).collect());
    }
    if doc_length == 0 {
        return Err(TtmError::InvalidArgument("document length must be positive".into()));
    }
    let docs = (n1 * n2) as f64;
    let n_r = n1.max(n2).max(r) as f64;
    let tau = c_prime * (n_r.ln() / (docs * doc_length as f64)).sqrt();
    let mut totals = vec![0.0; r];
    for i in 0..n1 {
        for j in 0..n2 {
            for (t, v) in totals.iter_mut().zip(y.tube(i, j)) {
                *t += v;
            }
        }
    }
    Ok((0..r).filter(|&w| totals[w] / docs >= tau).collect())
}

/// Factor estimate for mode 1 or 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode12Fit {
    pub a: Matrix,
    pub vertices: VertexSet,
}

/// Vertex hunting and weight recovery on the rows of `Ξ̂` (modes 1, 2).
pub fn estimate_mode12(xi: &Matrix) -> Result<Mode12Fit> {
    let k = xi.cols();
    let vertices = spa_vertex_hunt(xi, k).stage("vertex hunting")?;
    let a = recover_weights(xi, &vertices.v).stage("weight recovery")?;
    Ok(Mode12Fit { a, vertices })
}

/// Estimates `A1` (`mode = 1`) or `A2` (`mode = 2`) from `y` alone.
pub fn fit_mode12(y: &Tensor3, mode: usize, k: usize, doc_length: u64, cfg: &FitConfig) -> Result<Matrix> {
    if mode != 1 && mode != 2 {
        return Err(TtmError::InvalidArgument(format!(
            "fit_mode12 handles modes 1 and 2, got {mode}"
        )));
    }
    let dims = y.dims();
    if k == 0 || k > dims[mode - 1] {
        return Err(TtmError::InvalidArgument(format!(
            "rank {k} out of range for mode {mode}"
        )));
    }
    let q = build_q(&unfold(y, mode)?, mode, cfg.centering(doc_length))?;
    let (xi, _) = leading_eigvecs(&q, k).stage("eigendecomposition")?;
    Ok(estimate_mode12(&xi)?.a)
}

/// Topic-matrix estimate together with its intermediate quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode3Fit {
    /// R×K3, columns sum to one, rows dropped by SCORE are zero.
    pub a3: Matrix,
    pub score: ScoreResult,
    /// Vertices of the SCORE cloud (indices into `score.kept`'s order).
    pub vertices: VertexSet,
    /// `[1 | V]`, the K3×K3 vertex matrix used for recovery.
    pub v_star: Matrix,
    /// Weights for the kept rows.
    pub omega: Matrix,
    pub q0: Vec<f64>,
}

/// SCORE, vertex hunting and recovery on the rows of `Ξ̂₃`.
pub fn estimate_mode3(xi: &Matrix) -> Result<Mode3Fit> {
    let (r, k) = xi.shape();
    let score = score_normalize(xi).stage("SCORE normalization")?;
    if score.kept.len() < k {
        return Err(TtmError::Degenerate(format!(
            "only {} words have a positive leading eigenvector entry, need at least {k}",
            score.kept.len()
        )));
    }
    let vertices = spa_vertex_hunt(&score.s, k).stage("vertex hunting")?;
    let v_star = vertices.v.with_leading_ones();
    let s_star = score.s.with_leading_ones();
    let omega = recover_weights(&s_star, &v_star).stage("weight recovery")?;

    let mut a_star = Matrix::zeros(r, k);
    for (row, &w) in score.kept.iter().enumerate() {
        let scale = score.first_col[row];
        for c in 0..k {
            a_star[(w, c)] = scale * omega[(row, c)];
        }
    }
    let q0 = a_star.column_sums();
    if let Some((topic, &value)) = q0.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(TtmError::NonPositiveScale { topic, value });
    }
    let mut a3 = a_star;
    for w in 0..r {
        for (v, s) in a3.row_mut(w).iter_mut().zip(&q0) {
            *v /= s;
        }
    }
    Ok(Mode3Fit {
        a3,
        score,
        vertices,
        v_star,
        omega,
        q0,
    })
}

/// Estimates `A3` from `y` alone.
pub fn fit_mode3(y: &Tensor3, k: usize, doc_length: u64, cfg: &FitConfig) -> Result<Mode3Fit> {
    let r = y.dims()[2];
    if k == 0 || k > r {
        return Err(TtmError::InvalidArgument(format!("rank {k} out of range for mode 3")));
    }
    let q = build_q(&unfold(y, 3)?, 3, cfg.centering(doc_length))?;
    let (xi, _) = leading_eigvecs(&q, k).stage("eigendecomposition")?;
    estimate_mode3(&xi)
}

/// Core recovery. `v_hats` holds the mode-1 and mode-2 vertex matrices and
/// the mode-3 matrix `[1 | V]`; `q0` rescales the latter.
///
/// Negative entries are clipped to zero and every tube `g[k1, k2, ·]`
/// rescaled to sum to one; a tube with no positive entry becomes uniform.
pub fn fit_core(y: &Tensor3, factors: &SpectralFactors, v_hats: [&Matrix; 3], q0: &[f64]) -> Result<Tensor3> {
    let ranks = factors.ranks();
    for a in 0..3 {
        if v_hats[a].shape() != (ranks[a], ranks[a]) {
            return Err(TtmError::Shape(format!(
                "mode {} vertex matrix is {:?}, expected {}×{}",
                a + 1,
                v_hats[a].shape(),
                ranks[a],
                ranks[a]
            )));
        }
    }
    if q0.len() != ranks[2] {
        return Err(TtmError::Shape(format!(
            "q0 has {} entries for rank {}",
            q0.len(),
            ranks[2]
        )));
    }
    if let Some((topic, &value)) = q0.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(TtmError::NonPositiveScale { topic, value });
    }
    let s_hat = multilinear(
        y,
        &factors.xi[0].transpose(),
        &factors.xi[1].transpose(),
        &factors.xi[2].transpose(),
    )?;
    let mut v3 = v_hats[2].clone();
    for (k, &q) in q0.iter().enumerate() {
        v3.row_mut(k).iter_mut().for_each(|x| *x *= q);
    }
    let mut g = multilinear(&s_hat, v_hats[0], v_hats[1], &v3)?;
    let [k1, k2, k3] = g.dims();
    for x in 0..k1 {
        for z in 0..k2 {
            let tube = g.tube_mut(x, z);
            tube.iter_mut().for_each(|v| *v = v.max(0.0));
            let total: f64 = tube.iter().sum();
            if total > 0.0 {
                tube.iter_mut().for_each(|v| *v /= total);
            } else {
                tube.fill(1.0 / k3 as f64);
            }
        }
    }
    Ok(g)
}

/// Full estimation pipeline on observed frequencies `y` (documents of
/// length `doc_length`).
/// Entries of sorted `all` missing from its sorted subsequence `kept`.
fn complement(all: &[usize], kept: &[usize]) -> Vec<usize> {
    let mut it = kept.iter().peekable();
    all.iter()
        .copied()
        .filter(|w| {
            if it.peek() == Some(&w) {
                it.next();
                false
            } else {
                true
            }
        })
        .collect()
}

pub fn fit(y: &Tensor3, doc_length: u64, cfg: &FitConfig) -> Result<FitResult> {
    let dims = y.dims();
    cfg.validate(dims).stage("configuration")?;
    if y.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(TtmError::InvalidArgument(
            "frequencies must be finite and non-negative".into(),
        ))
        .stage("input");
    }

    let c_prime = if cfg.oracle { 0.0 } else { cfg.sparse_c_prime };
    let vocab = threshold_vocab(y, doc_length, c_prime).stage("vocabulary threshold")?;
    if vocab.len() < cfg.ranks[2] {
        return Err(TtmError::Degenerate(format!(
            "{} words pass the frequency threshold, fewer than the {} topics",
            vocab.len(),
            cfg.ranks[2]
        )))
        .stage("vocabulary threshold");
    }
    let restricted;
    let data = if vocab.len() == dims[2] {
        y
    } else {
        restricted = y.select(3, &vocab)?;
        &restricted
    };

    let mut factors = hosvd(data, cfg.ranks, cfg.centering(doc_length)).stage("HOSVD")?;
    if cfg.hooi_iters > 0 {
        factors = hooi_refine(data, &factors, cfg.hooi_iters).stage("HOOI refinement")?;
    }

    let m1 = estimate_mode12(&factors.xi[0]).stage("mode-1 factor")?;
    let m2 = estimate_mode12(&factors.xi[1]).stage("mode-2 factor")?;
    let m3 = estimate_mode3(&factors.xi[2]).stage("mode-3 factor")?;

    let g = fit_core(data, &factors, [&m1.vertices.v, &m2.vertices.v, &m3.v_star], &m3.q0).stage("core recovery")?;

    let mut a3 = Matrix::zeros(dims[2], cfg.ranks[2]);
    for (row, &w) in vocab.iter().enumerate() {
        a3.row_mut(w).copy_from_slice(m3.a3.row(row));
    }
    let kept_words: Vec<usize> = m3.score.kept.iter().map(|&i| vocab[i]).collect();
    let nonpositive_words = complement(&vocab, &kept_words);
    let dropped_words = complement(&(0..dims[2]).collect::<Vec<_>>(), &vocab);
    let vertex3 = m3.vertices.indices.iter().map(|&i| kept_words[i]).collect();

    Ok(FitResult {
        model: TuckerModel {
            a1: m1.a,
            a2: m2.a,
            a3,
            g,
        },
        vocab,
        dropped_words,
        nonpositive_words,
        q0: m3.q0,
        vertex_indices: [m1.vertices.indices, m2.vertices.indices, vertex3],
        eigvals: factors.eigvals,
        hooi_iters: cfg.hooi_iters,
    })
}

//! Evaluation metrics: permutation-aligned ℓ1 losses, reconstruction
//! error, split-half topic resolution, and scree data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtmError};
use crate::estimator::{fit, FitConfig, TuckerModel};
use crate::spectral::{build_q, leading_eigvecs};
use crate::tensor::{unfold, Matrix, Tensor3};

/// Largest `K` aligned by exhaustive search; larger problems use the
/// Hungarian algorithm.
pub const BRUTE_FORCE_MAX_K: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss_a1: f64,
    pub loss_a2: f64,
    pub loss_a3: f64,
    pub loss_g: f64,
    /// `perms[a][k]` is the estimated column matched to true column `k`.
    pub perms: [Vec<usize>; 3],
    pub recon_l1: f64,
}

/// `cost[k][l] = ‖a_hat[:, l] − a[:, k]‖₁`.
pub fn column_cost(a_hat: &Matrix, a: &Matrix) -> Result<Vec<Vec<f64>>> {
    if a_hat.shape() != a.shape() {
        return Err(TtmError::Shape(format!(
            "cannot align {:?} with {:?}",
            a_hat.shape(),
            a.shape()
        )));
    }
    let k = a.cols();
    let mut cost = vec![vec![0.0; k]; k];
    for i in 0..a.rows() {
        let (rh, rt) = (a_hat.row(i), a.row(i));
        for (t, row) in cost.iter_mut().enumerate() {
            for (l, c) in row.iter_mut().enumerate() {
                *c += (rh[l] - rt[t]).abs();
            }
        }
    }
    Ok(cost)
}

fn perm_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(k, &l)| cost[k][l]).sum()
}

/// Exhaustive minimum-cost assignment. Permutations are visited in
/// lexicographic order and only a strict improvement replaces the
/// incumbent, so ties resolve to the lexicographically first optimum.
pub fn assign_brute_force(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let k = cost.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_cost = perm_cost(cost, &perm);
    while next_permutation(&mut perm) {
        let c = perm_cost(cost, &perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    (best_cost, best)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Minimum-cost assignment by the Hungarian algorithm (shortest augmenting
/// paths with potentials, O(K³)).
pub fn assign_hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based potentials; way/matching arrays follow the classic e-maxx layout.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    (perm_cost(cost, &perm), perm)
}

/// `min_π Σ_k ‖a_hat[:, π(k)] − a[:, k]‖₁` and the minimizing `π`.
pub fn aligned_l1_loss(a_hat: &Matrix, a: &Matrix) -> Result<(f64, Vec<usize>)> {
    let cost = column_cost(a_hat, a)?;
    Ok(if cost.len() <= BRUTE_FORCE_MAX_K {
        assign_brute_force(&cost)
    } else {
        assign_hungarian(&cost)
    })
}

/// `Σ |g_hat[π1(k1), π2(k2), π3(k3)] − g[k1, k2, k3]|`.
pub fn core_loss(g_hat: &Tensor3, g: &Tensor3, perms: [&[usize]; 3]) -> Result<f64> {
    let dims = g.dims();
    if g_hat.dims() != dims {
        return Err(TtmError::Shape(format!("core dims {:?} vs {:?}", g_hat.dims(), dims)));
    }
    for a in 0..3 {
        let mut sorted = perms[a].to_vec();
        sorted.sort_unstable();
        if sorted != (0..dims[a]).collect::<Vec<_>>() {
            return Err(TtmError::InvalidArgument(format!(
                "mode {} permutation {:?} is not a bijection on 0..{}",
                a + 1,
                perms[a],
                dims[a]
            )));
        }
    }
    let mut total = 0.0;
    for k1 in 0..dims[0] {
        for k2 in 0..dims[1] {
            for k3 in 0..dims[2] {
                total += (g_hat.get(perms[0][k1], perms[1][k2], perms[2][k3]) - g.get(k1, k2, k3)).abs();
            }
        }
    }
    Ok(total)
}

/// `‖G·(A1, A2, A3) − d‖₁`.
pub fn reconstruction_error(model: &TuckerModel, d: &Tensor3) -> Result<f64> {
    model.expected()?.l1_distance(d)
}

/// All four aligned losses plus the reconstruction error against the
/// truth's expected tensor. Each factor is aligned on its own; the core
/// reuses those permutations.
pub fn loss_report(estimate: &TuckerModel, truth: &TuckerModel) -> Result<LossReport> {
    let (loss_a1, p1) = aligned_l1_loss(&estimate.a1, &truth.a1)?;
    let (loss_a2, p2) = aligned_l1_loss(&estimate.a2, &truth.a2)?;
    let (loss_a3, p3) = aligned_l1_loss(&estimate.a3, &truth.a3)?;
    let loss_g = core_loss(&estimate.g, &truth.g, [&p1, &p2, &p3])?;
    let recon_l1 = reconstruction_error(estimate, &truth.expected()?)?;
    Ok(LossReport {
        loss_a1,
        loss_a2,
        loss_a3,
        loss_g,
        perms: [p1, p2, p3],
        recon_l1,
    })
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Greedy one-to-one matching of columns by largest cosine; returns the
/// matched cosines in the order they were picked.
pub fn greedy_cosine_match(a: &Matrix, b: &Matrix) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(TtmError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let k = a.cols();
    let cols_a: Vec<Vec<f64>> = (0..k).map(|c| a.column(c)).collect();
    let cols_b: Vec<Vec<f64>> = (0..k).map(|c| b.column(c)).collect();
    let sim: Vec<Vec<f64>> = cols_a
        .iter()
        .map(|x| cols_b.iter().map(|y| cosine(x, y)).collect())
        .collect();
    let mut used_a = vec![false; k];
    let mut used_b = vec![false; k];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = (usize::MAX, usize::MAX, f64::NEG_INFINITY);
        for i in (0..k).filter(|&i| !used_a[i]) {
            for j in (0..k).filter(|&j| !used_b[j]) {
                if sim[i][j] > best.2 {
                    best = (i, j, sim[i][j]);
                }
            }
        }
        used_a[best.0] = true;
        used_b[best.1] = true;
        out.push(best.2);
    }
    Ok(out)
}

/// Linear-interpolation quantile of unsorted data (`p` in [0, 1]).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Interquartile range `q(0.75) − q(0.25)`.
pub fn iqr(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

/// Fits both halves of `y` (split along `axis`) and returns the median
/// cosine of the greedily matched topic columns.
pub fn split_resolution(
    y: &Tensor3,
    doc_length: u64,
    cfg: &FitConfig,
    axis: usize,
    first: &[usize],
    second: &[usize],
) -> Result<f64> {
    if axis != 1 && axis != 2 {
        return Err(TtmError::InvalidArgument(format!(
            "split axis must be 1 or 2, got {axis}"
        )));
    }
    let need = cfg.ranks[axis - 1];
    if first.len() < need || second.len() < need {
        return Err(TtmError::InvalidArgument(format!(
            "halves of {} and {} indices are too small for rank {need} along mode {axis}",
            first.len(),
            second.len()
        )));
    }
    let fa = fit(&y.select(axis, first)?, doc_length, cfg)?;
    let fb = fit(&y.select(axis, second)?, doc_length, cfg)?;
    Ok(median(&greedy_cosine_match(&fa.model.a3, &fb.model.a3)?))
}

/// Median and interquartile range of the split-half topic resolution over
/// `trials` random splits along `axis` (1 or 2). Trial `t` shuffles with
/// ChaCha8 stream `t` of `seed`.
pub fn topic_resolution(
    y: &Tensor3,
    doc_length: u64,
    cfg: &FitConfig,
    trials: usize,
    axis: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(TtmError::InvalidArgument("need at least one trial".into()));
    }
    if axis != 1 && axis != 2 {
        return Err(TtmError::InvalidArgument(format!(
            "split axis must be 1 or 2, got {axis}"
        )));
    }
    let n = y.dims()[axis - 1];
    let mut scores = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (a, b) = idx.split_at(n / 2);
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        scores.push(split_resolution(y, doc_length, cfg, axis, &a, &b)?);
    }
    Ok((median(&scores), iqr(&scores)))
}

/// Leading `k_max` eigenvalues of `Q̂` for one mode, descending.
pub fn scree(y: &Tensor3, mode: usize, k_max: usize, doc_length: Option<u64>) -> Result<Vec<f64>> {
    let q = build_q(&unfold(y, mode)?, mode, doc_length)?;
    Ok(leading_eigvecs(&q, k_max)?.1)
}

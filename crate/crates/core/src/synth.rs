//! Seeded synthetic corpora drawn from the tensor pLSI model.
//!
//! Factor matrices and the core come from one ChaCha8 stream (stream 0 of
//! the seed); document `(i, j)` draws its words from stream `1 + i·N2 + j`,
//! so the counts do not depend on the order documents are generated in.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtmError};
use crate::estimator::TuckerModel;
use crate::tensor::{reconstruct, Matrix, Tensor3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorMode {
    None,
    /// Plant one pure row per cluster in modes 1 and 2 and one anchor word per topic.
    #[default]
    Inject,
}

/// Prior for the topic-word matrix `A3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TopicPrior {
    /// Uniform(0,1] entries, columns normalized.
    #[default]
    Uniform,
    /// Column entries proportional to `rank^(-1/q)` over a random word order,
    /// which satisfies weak ℓq column sparsity.
    Zipf { q: f64 },
}

/// How rows of `A1` / `A2` are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Membership {
    /// Rows drawn from Dirichlet(alpha · 1_K).
    #[default]
    Dirichlet,
    /// Contiguous pure blocks, one per cluster. With `mixed`, a block of rows
    /// split between clusters `c` and `c+1` sits between consecutive pure blocks.
    Blocks { mixed: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub dims: [usize; 3],
    pub ranks: [usize; 3],
    pub doc_length: u64,
    pub anchor_mode: AnchorMode,
    pub dirichlet_alpha: f64,
    pub topic_prior: TopicPrior,
    pub membership: [Membership; 2],
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            dims: [30, 10, 50],
            ranks: [2, 2, 3],
            doc_length: 100,
            anchor_mode: AnchorMode::Inject,
            dirichlet_alpha: 1.0,
            topic_prior: TopicPrior::Uniform,
            membership: [Membership::Dirichlet; 2],
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn new(dims: [usize; 3], ranks: [usize; 3], doc_length: u64, seed: u64) -> Self {
        Self {
            dims,
            ranks,
            doc_length,
            seed,
            ..Self::default()
        }
    }

    /// The 30×10×50 two-cluster toy tensor: mode 1 has a pure block, a mixed
    /// block and a second pure block of 10 rows each; mode 2 splits 5/5;
    /// 3 topics; M = 100.
    pub fn toy_mixed(seed: u64) -> Self {
        Self {
            dims: [30, 10, 50],
            ranks: [2, 2, 3],
            doc_length: 100,
            membership: [Membership::Blocks { mixed: true }, Membership::Blocks { mixed: false }],
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.dims[a] == 0 || self.ranks[a] == 0 || self.ranks[a] > self.dims[a] {
                return Err(TtmError::InvalidArgument(format!(
                    "mode {}: rank {} must be in 1..={}",
                    a + 1,
                    self.ranks[a],
                    self.dims[a]
                )));
            }
        }
        if self.doc_length == 0 {
            return Err(TtmError::InvalidArgument("doc_length must be at least 1".into()));
        }
        if !(self.dirichlet_alpha > 0.0 && self.dirichlet_alpha.is_finite()) {
            return Err(TtmError::InvalidArgument("dirichlet_alpha must be positive".into()));
        }
        if let TopicPrior::Zipf { q } = self.topic_prior {
            if !(q > 0.0 && q < 1.0) {
                return Err(TtmError::InvalidArgument(format!("Zipf q must lie in (0,1), got {q}")));
            }
        }
        for (a, m) in self.membership.iter().enumerate() {
            if let Membership::Blocks { mixed } = m {
                let k = self.ranks[a];
                let blocks = if *mixed { 2 * k - 1 } else { k };
                if self.dims[a] < blocks {
                    return Err(TtmError::InvalidArgument(format!(
                        "mode {}: {} rows cannot hold {blocks} membership blocks",
                        a + 1,
                        self.dims[a]
                    )));
                }
            }
        }
        if self.anchor_mode == AnchorMode::Inject {
            if let TopicPrior::Zipf { .. } = self.topic_prior {
                if self.dims[2] < self.ranks[2] + 1 && self.ranks[2] > 1 {
                    return Err(TtmError::InvalidArgument(
                        "Zipf prior with anchors needs more words than topics".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Integer count tensor, same layout as [`Tensor3`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    dims: [usize; 3],
    data: Vec<u64>,
}

impl Counts {
    pub fn from_vec(dims: [usize; 3], data: Vec<u64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(TtmError::Shape(format!(
                "count buffer has {} entries, expected {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, r: usize) -> u64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + r]
    }

    /// Empirical frequencies `counts / m`.
    pub fn frequencies(&self, m: u64) -> Tensor3 {
        let inv = 1.0 / m as f64;
        Tensor3::from_vec(self.dims, self.data.iter().map(|&c| c as f64 * inv).collect())
            .expect("dims already validated")
    }
}

#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub model: TuckerModel,
    /// Expected frequencies `G·(A1, A2, A3)`.
    pub d: Tensor3,
    /// Observed frequencies `counts / M`.
    pub y: Tensor3,
    pub counts: Counts,
}

pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(TtmError::InvalidArgument(
            "Dirichlet needs at least one parameter".into(),
        ));
    }
    let gammas = alpha
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map_err(|_| TtmError::InvalidArgument(format!("Dirichlet parameter {a} must be positive")))
        })
        .collect::<Result<Vec<_>>>()?;
    // Very small alphas can underflow every draw to zero; redraw in that case.
    for _ in 0..64 {
        let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draws.into_iter().map(|x| x / total).collect());
        }
    }
    Err(TtmError::Degenerate("Dirichlet draws underflowed to zero".into()))
}

/// Multinomial draw by sequential binomial conditioning.
pub fn sample_multinomial<R: Rng + ?Sized>(m: u64, p: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    if p.is_empty() || p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(TtmError::InvalidArgument(
            "multinomial probabilities must be finite and non-negative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(TtmError::InvalidArgument(format!(
            "multinomial probabilities sum to {total}, not 1"
        )));
    }
    let mut out = vec![0u64; p.len()];
    let mut left = m;
    let mut mass = 1.0;
    let last = p.len() - 1;
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k == last {
            out[k] = left;
            break;
        }
        let cond = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = if cond == 0.0 {
            0
        } else if cond == 1.0 {
            left
        } else {
            Binomial::new(left, cond)
                .expect("probability clamped to [0,1]")
                .sample(rng)
        };
        out[k] = x;
        left -= x;
        mass -= pk;
    }
    Ok(out)
}

fn model_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn document_rng(seed: u64, doc: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(doc + 1);
    rng
}

/// Draws word counts for every document of `d` with length `m`.
pub fn sample_counts(d: &Tensor3, m: u64, seed: u64) -> Result<Counts> {
    let [n1, n2, n3] = d.dims();
    let mut data = Vec::with_capacity(n1 * n2 * n3);
    for i in 0..n1 {
        for j in 0..n2 {
            let mut rng = document_rng(seed, (i * n2 + j) as u64);
            data.extend(sample_multinomial(m, d.tube(i, j), &mut rng)?);
        }
    }
    Counts::from_vec(d.dims(), data)
}

fn membership_matrix(
    n: usize,
    k: usize,
    membership: Membership,
    spec: &GenSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Matrix> {
    let mut a = Matrix::zeros(n, k);
    match membership {
        Membership::Dirichlet => {
            let alpha = vec![spec.dirichlet_alpha; k];
            for i in 0..n {
                a.row_mut(i).copy_from_slice(&sample_dirichlet(&alpha, rng)?);
            }
            if spec.anchor_mode == AnchorMode::Inject {
                for c in 0..k {
                    let row = a.row_mut(c);
                    row.fill(0.0);
                    row[c] = 1.0;
                }
            }
        }
        Membership::Blocks { mixed } => {
            let blocks = if mixed { 2 * k - 1 } else { k };
            for i in 0..n {
                let b = i * blocks / n;
                if !mixed {
                    a[(i, b)] = 1.0;
                } else if b.is_multiple_of(2) {
                    a[(i, b / 2)] = 1.0;
                } else {
                    let w: f64 = rng.random();
                    a[(i, b / 2)] = w;
                    a[(i, b / 2 + 1)] = 1.0 - w;
                }
            }
        }
    }
    Ok(a)
}

fn normalize_columns(a: &mut Matrix) {
    let sums = a.column_sums();
    for i in 0..a.rows() {
        for (v, s) in a.row_mut(i).iter_mut().zip(&sums) {
            *v /= s;
        }
    }
}

fn topic_matrix(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Matrix {
    let r = spec.dims[2];
    let k = spec.ranks[2];
    let anchors = spec.anchor_mode == AnchorMode::Inject && k > 1;
    let mut a = Matrix::zeros(r, k);
    match spec.topic_prior {
        TopicPrior::Uniform => {
            for v in a.as_mut_slice() {
                *v = 1.0 - rng.random::<f64>();
            }
            if anchors {
                for t in 0..k {
                    let row = a.row_mut(t);
                    let keep = row[t];
                    row.fill(0.0);
                    row[t] = keep;
                }
            }
        }
        TopicPrior::Zipf { q } => {
            let exponent = 1.0 / q;
            for t in 0..k {
                // Anchor word t leads its own topic and is absent from the others.
                let mut words: Vec<usize> = if anchors { (k..r).collect() } else { (0..r).collect() };
                words.shuffle(rng);
                let offset = if anchors {
                    a[(t, t)] = 1.0;
                    2
                } else {
                    1
                };
                for (rank, &w) in words.iter().enumerate() {
                    a[(w, t)] = ((rank + offset) as f64).powf(-exponent);
                }
            }
        }
    }
    normalize_columns(&mut a);
    a
}

/// Draws a planted model and its multinomial observations.
pub fn generate(spec: &GenSpec) -> Result<PlantedInstance> {
    spec.validate()?;
    let mut rng = model_rng(spec.seed);
    let [n1, n2, _] = spec.dims;
    let [k1, k2, k3] = spec.ranks;

    let a1 = membership_matrix(n1, k1, spec.membership[0], spec, &mut rng)?;
    let a2 = membership_matrix(n2, k2, spec.membership[1], spec, &mut rng)?;
    let mut g = Tensor3::zeros([k1, k2, k3]);
    let alpha = vec![spec.dirichlet_alpha; k3];
    for x in 0..k1 {
        for y in 0..k2 {
            g.tube_mut(x, y).copy_from_slice(&sample_dirichlet(&alpha, &mut rng)?);
        }
    }
    let a3 = topic_matrix(spec, &mut rng);

    let d = reconstruct(&g, &a1, &a2, &a3)?;
    let counts = sample_counts(&d, spec.doc_length, spec.seed)?;
    let y = counts.frequencies(spec.doc_length);
    Ok(PlantedInstance {
        model: TuckerModel { a1, a2, a3, g },
        d,
        y,
        counts,
    })
}

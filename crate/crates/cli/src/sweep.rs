//! Monte-Carlo sweeps over a cartesian grid of planted-data settings.
//!
//! Cells enumerate `n1 × n2 × r × m × ranks` with the last list varying
//! fastest. Every trial of a cell draws one planted instance and fits it
//! with each listed method, so methods are compared on identical data. The
//! instance seed depends only on `(seed, cell, trial)`, which keeps results
//! independent of thread scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ttm_core::estimator::DEFAULT_SPARSE_C;
use ttm_core::eval::{iqr, median};
use ttm_core::synth::{AnchorMode, Membership, TopicPrior};
use ttm_core::{fit, generate, loss_report, FitConfig, GenSpec};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Full vocabulary, plain HOSVD subspaces.
    Hosvd,
    /// Full vocabulary, HOSVD followed by `hooi_iters` HOOI sweeps.
    Hooi,
    /// Vocabulary thresholded with `sparse_c_prime`.
    Sparse,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hosvd => "hosvd",
            Method::Hooi => "hooi",
            Method::Sparse => "sparse",
        }
    }

    pub fn config(self, ranks: [usize; 3], grid: &Grid) -> FitConfig {
        match self {
            Method::Hosvd => FitConfig::dense(ranks),
            Method::Hooi => FitConfig::dense(ranks).with_hooi(grid.hooi_iters),
            Method::Sparse => FitConfig::new(ranks).with_sparse(grid.sparse_c_prime),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    pub r: Vec<usize>,
    pub m: Vec<u64>,
    pub ranks: Vec<[usize; 3]>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    pub hooi_iters: usize,
    pub sparse_c_prime: f64,
    pub dirichlet_alpha: f64,
    pub anchor_mode: AnchorMode,
    pub topic_prior: TopicPrior,
    pub membership: [Membership; 2],
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n1: vec![30],
            n2: vec![30],
            r: vec![100],
            m: vec![200],
            ranks: vec![[2, 2, 3]],
            methods: vec![Method::Hosvd],
            trials: 10,
            seed: 0,
            hooi_iters: 5,
            sparse_c_prime: DEFAULT_SPARSE_C,
            dirichlet_alpha: 1.0,
            anchor_mode: AnchorMode::Inject,
            topic_prior: TopicPrior::Uniform,
            membership: [Membership::Dirichlet; 2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub dims: [usize; 3],
    pub doc_length: u64,
    pub ranks: [usize; 3],
}

impl Grid {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n1 in &self.n1 {
            for &n2 in &self.n2 {
                for &r in &self.r {
                    for &m in &self.m {
                        for &ranks in &self.ranks {
                            out.push(Cell {
                                dims: [n1, n2, r],
                                doc_length: m,
                                ranks,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn spec(&self, cell: &Cell, seed: u64) -> GenSpec {
        GenSpec {
            dims: cell.dims,
            ranks: cell.ranks,
            doc_length: cell.doc_length,
            anchor_mode: self.anchor_mode,
            dirichlet_alpha: self.dirichlet_alpha,
            topic_prior: self.topic_prior,
            membership: self.membership,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Usage("sweep needs at least one trial".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Usage("sweep needs at least one method".into()));
        }
        let cells = self.cells();
        if cells.is_empty() {
            return Err(CliError::Usage("grid has no cells; every list needs a value".into()));
        }
        for (c, cell) in cells.iter().enumerate() {
            self.spec(cell, 0)
                .validate()
                .map_err(|e| CliError::Usage(format!("grid cell {c}: {e}")))?;
            for m in &self.methods {
                m.config(cell.ranks, self)
                    .validate(cell.dims)
                    .map_err(|e| CliError::Usage(format!("grid cell {c}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Seed of the planted instance for `trial` of `cell`.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(cell as u64);
    rng.set_word_pos(2 * trial as u128);
    rng.next_u64()
}

/// Loss columns in CSV order.
pub const LOSS_NAMES: [&str; 5] = ["a1", "a2", "a3", "g", "recon"];

/// Fixed CSV header of `ttm sweep`.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["n1", "n2", "r", "m", "k1", "k2", "k3", "method", "trials", "failures"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in LOSS_NAMES {
        h.push(format!("{name}_median"));
        h.push(format!("{name}_iqr"));
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub cell: Cell,
    pub method: Method,
    pub trials: usize,
    pub failures: usize,
    pub median: [f64; 5],
    pub iqr: [f64; 5],
}

/// Losses `[a1, a2, a3, g, recon]` of one method on one trial; `None` when
/// the fit failed.
pub type TrialLosses = Option<[f64; 5]>;

pub fn run_trial(grid: &Grid, cell: &Cell, seed: u64) -> Result<Vec<TrialLosses>, CliError> {
    let inst = generate(&grid.spec(cell, seed))?;
    Ok(grid
        .methods
        .iter()
        .map(|m| {
            let f = fit(&inst.y, cell.doc_length, &m.config(cell.ranks, grid)).ok()?;
            let r = loss_report(&f.model, &inst.model).ok()?;
            Some([r.loss_a1, r.loss_a2, r.loss_a3, r.loss_g, r.recon_l1])
        })
        .collect())
}

pub fn run_grid(grid: &Grid) -> Result<Vec<SweepRow>, CliError> {
    grid.validate()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<Vec<TrialLosses>> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(grid, &cells[c], trial_seed(grid.seed, c, t)))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let trials = &results[c * grid.trials..(c + 1) * grid.trials];
        for (mi, &method) in grid.methods.iter().enumerate() {
            let ok: Vec<[f64; 5]> = trials.iter().filter_map(|t| t[mi]).collect();
            let mut med = [f64::NAN; 5];
            let mut spread = [f64::NAN; 5];
            for k in 0..5 {
                let v: Vec<f64> = ok.iter().map(|l| l[k]).collect();
                if !v.is_empty() {
                    med[k] = median(&v);
                    spread[k] = iqr(&v);
                }
            }
            rows.push(SweepRow {
                cell: *cell,
                method,
                trials: grid.trials,
                failures: grid.trials - ok.len(),
                median: med,
                iqr: spread,
            });
        }
    }
    Ok(rows)
}

/// Shortest representation that parses back to the same float.
pub fn fmt_float(v: f64) -> String {
    if v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn to_csv(rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(csv_header()).map_err(err)?;
    for row in rows {
        let c = &row.cell;
        let mut rec = vec![
            c.dims[0].to_string(),
            c.dims[1].to_string(),
            c.dims[2].to_string(),
            c.doc_length.to_string(),
            c.ranks[0].to_string(),
            c.ranks[1].to_string(),
            c.ranks[2].to_string(),
            row.method.name().to_string(),
            row.trials.to_string(),
            row.failures.to_string(),
        ];
        for k in 0..5 {
            rec.push(fmt_float(row.median[k]));
            rec.push(fmt_float(row.iqr[k]));
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))
}

//! Browser demo: draw a planted instance, fit it, and inspect the scree
//! curve and the mode-3 SCORE simplex.
//!
//! The view builders are plain Rust so they can be tested natively; the
//! `Demo` wrapper exposes them to JavaScript as JSON strings and typed
//! arrays.

use serde::Serialize;
use ttm_core::estimator::{fit_mode3, FitConfig};
use ttm_core::eval::{loss_report, scree};
use ttm_core::synth::Membership;
use ttm_core::{fit, generate, GenSpec, Matrix, PlantedInstance, Result};
use wasm_bindgen::prelude::*;

/// Largest instance the page accepts; keeps a fit well under a second.
pub const MAX_DIMS: [usize; 3] = [200, 200, 2000];

/// Row-major matrix for drawing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for Grid {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }
}

/// Estimated factors with columns reordered to match the truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitView {
    pub losses: [f64; 4],
    pub recon_l1: f64,
    pub estimate: [Grid; 3],
    pub truth: [Grid; 3],
    pub vocab_size: usize,
}

/// Mode-3 SCORE cloud: one point per kept word, first two coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexView {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Word index of each point.
    pub words: Vec<usize>,
    /// Positions in `x`/`y` picked by SPA.
    pub vertices: Vec<usize>,
    /// Positions in `x`/`y` of the planted anchor words.
    pub anchors: Vec<usize>,
    pub dim: usize,
}

pub fn spec(dims: [usize; 3], ranks: [usize; 3], doc_length: u64, seed: u64, blocks: bool) -> Result<GenSpec> {
    let mut spec = GenSpec::new(dims, ranks, doc_length, seed);
    if blocks {
        spec.membership = [Membership::Blocks { mixed: true }, Membership::Blocks { mixed: false }];
    }
    spec.validate()?;
    for a in 0..3 {
        if dims[a] > MAX_DIMS[a] {
            return Err(ttm_core::TtmError::InvalidArgument(format!(
                "mode {} size {} exceeds the demo limit {}",
                a + 1,
                dims[a],
                MAX_DIMS[a]
            )));
        }
    }
    Ok(spec)
}

pub fn fit_view(inst: &PlantedInstance, doc_length: u64, cfg: &FitConfig) -> Result<FitView> {
    let res = fit(&inst.y, doc_length, cfg)?;
    let report = loss_report(&res.model, &inst.model)?;
    let est = &res.model;
    let truth = &inst.model;
    Ok(FitView {
        losses: [report.loss_a1, report.loss_a2, report.loss_a3, report.loss_g],
        recon_l1: report.recon_l1,
        estimate: [
            Grid::from(&est.a1.select_columns(&report.perms[0])),
            Grid::from(&est.a2.select_columns(&report.perms[1])),
            Grid::from(&est.a3.select_columns(&report.perms[2])),
        ],
        truth: [Grid::from(&truth.a1), Grid::from(&truth.a2), Grid::from(&truth.a3)],
        vocab_size: res.vocab.len(),
    })
}

/// Words whose planted `a3` row has exactly one positive entry.
pub fn anchor_words(a3: &Matrix) -> Vec<usize> {
    (0..a3.rows())
        .filter(|&w| a3.row(w).iter().filter(|&&v| v > 0.0).count() == 1)
        .collect()
}

/// `oracle` treats `inst.y` as expected frequencies (no variance correction).
pub fn simplex_view(inst: &PlantedInstance, doc_length: u64, oracle: bool) -> Result<SimplexView> {
    let ranks = inst.model.ranks();
    let cfg = if oracle {
        FitConfig::oracle(ranks)
    } else {
        FitConfig::dense(ranks)
    };
    let m3 = fit_mode3(&inst.y, ranks[2], doc_length, &cfg)?;
    let s = &m3.score.s;
    let coord = |c: usize| -> Vec<f64> {
        if c < s.cols() {
            s.column(c)
        } else {
            vec![0.0; s.rows()]
        }
    };
    let anchors = anchor_words(&inst.model.a3);
    Ok(SimplexView {
        x: coord(0),
        y: coord(1),
        words: m3.score.kept.clone(),
        vertices: m3.vertices.indices.clone(),
        anchors: (0..m3.score.kept.len())
            .filter(|&p| anchors.binary_search(&m3.score.kept[p]).is_ok())
            .collect(),
        dim: s.cols(),
    })
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// One planted instance shared by the page's three operations.
#[wasm_bindgen]
pub struct Demo {
    spec: GenSpec,
    inst: PlantedInstance,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n1: usize,
        n2: usize,
        r: usize,
        m: u32,
        k1: usize,
        k2: usize,
        k3: usize,
        seed: u32,
        blocks: bool,
    ) -> std::result::Result<Demo, JsError> {
        let spec = spec([n1, n2, r], [k1, k2, k3], m as u64, seed as u64, blocks).map_err(js_err)?;
        let inst = generate(&spec).map_err(js_err)?;
        Ok(Demo { spec, inst })
    }

    /// Fits the instance and returns a `FitView` as JSON.
    pub fn fit(&self, hooi_iters: usize, sparse_c: f64) -> std::result::Result<String, JsError> {
        let cfg = FitConfig::dense(self.spec.ranks)
            .with_hooi(hooi_iters)
            .with_sparse(sparse_c);
        let view = fit_view(&self.inst, self.spec.doc_length, &cfg).map_err(js_err)?;
        serde_json::to_string(&view).map_err(js_err)
    }

    /// Leading eigenvalues of one mode's second-moment matrix.
    pub fn scree(&self, mode: usize, k_max: usize) -> std::result::Result<Vec<f64>, JsError> {
        scree(&self.inst.y, mode, k_max, Some(self.spec.doc_length)).map_err(js_err)
    }

    /// Returns a `SimplexView` as JSON.
    pub fn simplex(&self) -> std::result::Result<String, JsError> {
        let view = simplex_view(&self.inst, self.spec.doc_length, false).map_err(js_err)?;
        serde_json::to_string(&view).map_err(js_err)
    }

    #[wasm_bindgen(getter)]
    pub fn dims(&self) -> Vec<usize> {
        self.spec.dims.to_vec()
    }
}

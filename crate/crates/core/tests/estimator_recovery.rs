use nalgebra::DMatrix;
use ttm_core::estimator::{estimate_mode3, fit, fit_mode12, threshold_vocab, FitConfig};
use ttm_core::eval::{loss_report, scree, split_resolution, topic_resolution};
use ttm_core::spectral::hosvd;
use ttm_core::synth::{generate, AnchorMode, GenSpec, Membership, TopicPrior};
use ttm_core::tensor::{unfold, Matrix, Tensor3};

fn assert_exact(spec: &GenSpec) {
    let inst = generate(spec).unwrap();
    let f = fit(&inst.d, 1, &FitConfig::oracle(spec.ranks)).unwrap();
    let r = loss_report(&f.model, &inst.model).unwrap();
    for (name, v) in [("a1", r.loss_a1), ("a2", r.loss_a2), ("a3", r.loss_a3), ("g", r.loss_g)] {
        assert!(v < 1e-8, "{name} loss {v} for {spec:?}");
    }
}

#[test]
fn oracle_recovers_planted_model_exactly() {
    for seed in 0..5 {
        assert_exact(&GenSpec::new([30, 10, 50], [2, 2, 3], 100, seed));
        assert_exact(&GenSpec::new([25, 20, 60], [3, 4, 5], 100, seed));
        assert_exact(&GenSpec::toy_mixed(seed));
    }
    let mut zipf = GenSpec::new([20, 15, 80], [2, 3, 4], 100, 1);
    zipf.topic_prior = TopicPrior::Zipf { q: 0.5 };
    assert_exact(&zipf);
}

#[test]
fn oracle_q0_is_the_exact_svd_first_column() {
    let inst = generate(&GenSpec::new([30, 10, 50], [2, 2, 3], 100, 17)).unwrap();
    let f = fit(&inst.d, 1, &FitConfig::oracle([2, 2, 3])).unwrap();
    let r = loss_report(&f.model, &inst.model).unwrap();

    // Independent route: left singular vectors of D₃ by SVD, then
    // Ṽ = A3⁺ Ξ with the first column made non-negative.
    let d3 = unfold(&inst.d, 3).unwrap();
    let svd = DMatrix::from_row_slice(d3.rows(), d3.cols(), d3.as_slice()).svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut xi = u.select_columns(&order[..3]);
    if xi.column(0).sum() < 0.0 {
        xi.column_mut(0).neg_mut();
    }
    let a3 = &inst.model.a3;
    let a3n = DMatrix::from_row_slice(a3.rows(), a3.cols(), a3.as_slice());
    let v_tilde = a3n.pseudo_inverse(1e-14).unwrap() * xi;
    for k in 0..3 {
        let est = f.q0[r.perms[2][k]];
        assert!(
            (est - v_tilde[(k, 0)]).abs() < 1e-8,
            "topic {k}: {est} vs {}",
            v_tilde[(k, 0)]
        );
    }
}

#[test]
fn oracle_anchor_words_get_unit_weight_rows() {
    let inst = generate(&GenSpec::new([30, 10, 50], [2, 2, 3], 100, 2)).unwrap();
    let f = hosvd(&inst.d, [2, 2, 3], None).unwrap();
    let m3 = estimate_mode3(&f.xi[2]).unwrap();
    for word in 0..3 {
        let row = m3.score.kept.iter().position(|&w| w == word).unwrap();
        let w = m3.omega.row(row);
        let max = w.iter().cloned().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-10, "anchor {word}: {w:?}");
        assert!(w.iter().filter(|&&x| x > 1e-10).count() == 1);
    }
}

#[test]
fn refit_of_own_reconstruction_is_idempotent() {
    let inst = generate(&GenSpec::new([30, 10, 50], [2, 2, 3], 100, 31)).unwrap();
    let cfg = FitConfig::oracle([2, 2, 3]);
    let first = fit(&inst.d, 1, &cfg).unwrap().model;
    let second = fit(&first.expected().unwrap(), 1, &cfg).unwrap().model;
    let r = loss_report(&second, &first).unwrap();
    assert!(r.loss_a1.max(r.loss_a2).max(r.loss_a3).max(r.loss_g) < 1e-8, "{r:?}");
    assert!(r.recon_l1 < 1e-8);
}

#[test]
fn noisy_fits_satisfy_constraints() {
    for seed in 0..6 {
        let spec = GenSpec::new([25, 20, 80], [3, 2, 4], 150, seed);
        let inst = generate(&spec).unwrap();
        for cfg in [
            FitConfig::new(spec.ranks),
            FitConfig::dense(spec.ranks),
            FitConfig::new(spec.ranks).with_hooi(3),
        ] {
            let f = fit(&inst.y, spec.doc_length, &cfg).unwrap();
            assert!(f.model.constraint_violation() < 1e-9, "seed {seed} {cfg:?}");
            assert!(f.q0.iter().all(|&q| q > 0.0));
            assert_eq!(f.hooi_iters, cfg.hooi_iters);
            for a in 0..3 {
                assert_eq!(f.eigvals[a].len(), spec.ranks[a]);
            }
        }
    }
}

#[test]
fn fit_is_deterministic() {
    let inst = generate(&GenSpec::new([20, 12, 40], [2, 2, 3], 80, 4)).unwrap();
    let cfg = FitConfig::new([2, 2, 3]).with_hooi(2);
    assert_eq!(fit(&inst.y, 80, &cfg).unwrap(), fit(&inst.y, 80, &cfg).unwrap());
}

#[test]
fn sparse_vocabulary_matches_direct_scan() {
    let mut spec = GenSpec::new([30, 30, 300], [2, 2, 3], 1000, 8);
    spec.topic_prior = TopicPrior::Zipf { q: 0.5 };
    let inst = generate(&spec).unwrap();
    let c = 0.005;
    let f = fit(&inst.y, 1000, &FitConfig::new([2, 2, 3]).with_sparse(c)).unwrap();

    let tau = c * ((300f64).ln() / (30.0 * 30.0 * 1000.0)).sqrt();
    let scanned: Vec<usize> = (0..300)
        .filter(|&r| {
            let mut s = 0.0;
            for i in 0..30 {
                for j in 0..30 {
                    s += inst.y.get(i, j, r);
                }
            }
            s / 900.0 >= tau
        })
        .collect();
    assert_eq!(f.vocab, scanned);
    assert!(!f.dropped_words.is_empty());
    for &w in &f.dropped_words {
        assert!(f.model.a3.row(w).iter().all(|&x| x == 0.0), "word {w}");
    }
    assert_eq!(f.vocab.len() + f.dropped_words.len(), 300);
    assert!(f.model.a3.column_sums().iter().all(|s| (s - 1.0).abs() < 1e-9));
}

#[test]
fn threshold_edge_cases() {
    let mut y = Tensor3::zeros([2, 2, 3]);
    y.set(0, 0, 0, 1.0);
    y.set(1, 1, 2, 1.0);
    assert_eq!(threshold_vocab(&y, 10, 0.0).unwrap(), vec![0, 1, 2]);
    assert_eq!(threshold_vocab(&y, 10, 0.005).unwrap(), vec![0, 2]);
}

#[test]
fn rank_one_modes_are_columns_of_ones() {
    let inst = generate(&GenSpec::new([12, 9, 30], [1, 2, 3], 100, 6)).unwrap();
    let a1 = fit_mode12(&inst.y, 1, 1, 100, &FitConfig::new([1, 2, 3])).unwrap();
    assert_eq!(a1, Matrix::filled(12, 1, 1.0));
}

#[test]
fn fit_degeneracy_names_the_stage() {
    let y = Tensor3::zeros([4, 4, 6]);
    let err = fit(&y, 10, &FitConfig::new([2, 2, 2])).unwrap_err();
    assert!(err.is_fit_degenerate());
    assert!(err.to_string().starts_with("vocabulary threshold"), "{err}");
    let err = fit(&y, 10, &FitConfig::new([5, 2, 2])).unwrap_err();
    assert!(!err.is_fit_degenerate());
}

#[test]
fn scree_of_noiseless_data_has_a_gap() {
    let inst = generate(&GenSpec::new([30, 10, 50], [2, 2, 3], 100, 0)).unwrap();
    let vals = scree(&inst.d, 3, 6, None).unwrap();
    assert_eq!(vals.len(), 6);
    assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    assert!(vals[3] / vals[0] < 1e-8);
    let top = scree(&inst.d, 1, 1, None).unwrap();
    assert_eq!(top.len(), 1);
    assert_eq!(top[0], scree(&inst.d, 1, 3, None).unwrap()[0]);
}

/// Doubles mode 1: rows `n..2n` repeat rows `0..n`.
fn duplicated(d: &Tensor3) -> Tensor3 {
    let [n1, n2, r] = d.dims();
    Tensor3::from_fn([2 * n1, n2, r], |i, j, w| d.get(i % n1, j, w))
}

#[test]
fn identical_halves_resolve_perfectly() {
    let inst = generate(&GenSpec::new([15, 10, 40], [2, 2, 3], 100, 9)).unwrap();
    let y = duplicated(&inst.d);
    let first: Vec<usize> = (0..15).collect();
    let second: Vec<usize> = (15..30).collect();
    let res = split_resolution(&y, 1, &FitConfig::oracle([2, 2, 3]), 1, &first, &second).unwrap();
    assert!((res - 1.0).abs() < 1e-9);
}

#[test]
fn disjoint_vocabularies_resolve_to_zero() {
    let a = generate(&GenSpec::new([12, 8, 20], [2, 2, 3], 100, 1)).unwrap().d;
    let b = generate(&GenSpec::new([12, 8, 20], [2, 2, 3], 100, 2)).unwrap().d;
    let y = Tensor3::from_fn([24, 8, 40], |i, j, w| match (i < 12, w < 20) {
        (true, true) => a.get(i, j, w),
        (false, false) => b.get(i - 12, j, w - 20),
        _ => 0.0,
    });
    let first: Vec<usize> = (0..12).collect();
    let second: Vec<usize> = (12..24).collect();
    let res = split_resolution(&y, 1, &FitConfig::oracle([2, 2, 3]), 1, &first, &second).unwrap();
    assert_eq!(res, 0.0);
}

#[test]
fn resolution_improves_with_document_length() {
    let cfg = FitConfig::new([2, 2, 3]);
    let mut spec = GenSpec::new([40, 10, 60], [2, 2, 3], 100, 12);
    let low = generate(&spec).unwrap();
    spec.doc_length = 10_000;
    let high = generate(&spec).unwrap();
    let (r_low, _) = topic_resolution(&low.y, 100, &cfg, 25, 1, 5).unwrap();
    let (r_high, iqr) = topic_resolution(&high.y, 10_000, &cfg, 25, 1, 5).unwrap();
    assert!(r_high >= r_low, "{r_high} < {r_low}");
    assert!(iqr >= 0.0);
}

#[test]
fn resolution_rejects_bad_arguments() {
    let inst = generate(&GenSpec::new([6, 6, 20], [2, 2, 3], 100, 9)).unwrap();
    let cfg = FitConfig::new([4, 2, 3]);
    assert!(topic_resolution(&inst.y, 100, &cfg, 3, 1, 0).is_err());
    assert!(topic_resolution(&inst.y, 100, &FitConfig::new([2, 2, 3]), 0, 1, 0).is_err());
    assert!(topic_resolution(&inst.y, 100, &FitConfig::new([2, 2, 3]), 1, 3, 0).is_err());
}

#[test]
fn block_membership_has_pure_rows_after_fit() {
    let spec = GenSpec {
        membership: [Membership::Blocks { mixed: true }, Membership::Dirichlet],
        anchor_mode: AnchorMode::Inject,
        ..GenSpec::new([21, 10, 40], [3, 2, 3], 100, 3)
    };
    let inst = generate(&spec).unwrap();
    let f = fit(&inst.d, 1, &FitConfig::oracle([3, 2, 3])).unwrap();
    let r = loss_report(&f.model, &inst.model).unwrap();
    assert!(r.loss_a1 < 1e-8);
}

//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! `[PASS]` or `[FAIL]` line per criterion, and exits nonzero on any failure.
//!
//! Run with `cargo test -p ttm-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tempfile::TempDir;
use ttm_cli::format::write_json;
use ttm_cli::manifest::with_suffix;
use ttm_cli::run_args;
use ttm_cli::sweep::{run_grid, trial_seed, Grid, Method, SweepRow};
use ttm_core::eval::{assign_brute_force, assign_hungarian, median};
use ttm_core::simplex::spa_vertex_hunt;
use ttm_core::spectral::hosvd;
use ttm_core::synth::{sample_dirichlet, TopicPrior};
use ttm_core::tensor::{fold, kronecker, reconstruct, unfold};
use ttm_core::{fit, generate, loss_report, FitConfig, GenSpec, Matrix, Tensor3};

/// Result of one criterion: pass flag and a one-line summary of the numbers.
struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Worst constraint violation over every model fitted by the suite.
struct Fitted {
    worst: f64,
    models: usize,
}

impl Fitted {
    fn record(&mut self, violation: f64) {
        self.worst = self.worst.max(violation);
        self.models += 1;
    }
}

const LOSS_NAMES: [&str; 4] = ["a1", "a2", "a3", "g"];

fn sweep_medians(rows: &[SweepRow], method: Method) -> Vec<[f64; 5]> {
    rows.iter().filter(|r| r.method == method).map(|r| r.median).collect()
}

fn failures(rows: &[SweepRow]) -> usize {
    rows.iter().map(|r| r.failures).sum()
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn noiseless_recovery(fitted: &mut Fitted) -> Verdict {
    let mut worst = [0.0f64; 4];
    for seed in 0..5 {
        let spec = GenSpec::new([30, 10, 50], [2, 2, 3], 100, seed);
        let inst = generate(&spec).expect("valid spec");
        let res = match fit(&inst.d, spec.doc_length, &FitConfig::oracle(spec.ranks)) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("seed {seed}: {e}")),
        };
        fitted.record(res.model.constraint_violation());
        let r = loss_report(&res.model, &inst.model).expect("matching shapes");
        for (w, v) in worst.iter_mut().zip([r.loss_a1, r.loss_a2, r.loss_a3, r.loss_g]) {
            *w = w.max(v);
        }
    }
    let pass = worst.iter().all(|&v| v < 1e-8);
    verdict(
        pass,
        format!(
            "5 seeds, max losses a1 {:.1e} a2 {:.1e} a3 {:.1e} g {:.1e} (< 1e-8)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn toy_magnitude(fitted: &mut Fitted) -> Verdict {
    let results: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let spec = GenSpec::toy_mixed(seed);
            let inst = generate(&spec).expect("valid spec");
            let res = fit(&inst.y, spec.doc_length, &FitConfig::dense(spec.ranks))?;
            let r = loss_report(&res.model, &inst.model)?;
            Ok::<_, ttm_core::TtmError>((r.recon_l1, res.model.constraint_violation()))
        })
        .collect();
    let mut errs = Vec::new();
    for r in results {
        match r {
            Ok((e, v)) => {
                errs.push(e);
                fitted.record(v);
            }
            Err(e) => return verdict(false, format!("fit failed: {e}")),
        }
    }
    let med = median(&errs);
    let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = errs.iter().cloned().fold(0.0, f64::max);
    verdict(
        med > 5.0 && med < 50.0,
        format!("median recon l1 {med:.2} in (5, 50); range [{lo:.2}, {hi:.2}] over 20 instances"),
    )
}

fn m_scaling() -> Verdict {
    let grid = Grid {
        n1: vec![40],
        n2: vec![40],
        r: vec![300],
        m: vec![100, 1_000, 10_000],
        ranks: vec![[2, 2, 4]],
        methods: vec![Method::Hosvd],
        trials: 15,
        seed: 3,
        ..Grid::default()
    };
    let rows = match run_grid(&grid) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let a3: Vec<f64> = sweep_medians(&rows, Method::Hosvd).iter().map(|m| m[2]).collect();
    let ms: Vec<f64> = grid.m.iter().map(|&m| m as f64).collect();
    let slope = log_log_slope(&ms, &a3);
    let decreasing = a3.windows(2).all(|w| w[1] < w[0]);
    let fails = failures(&rows);
    let pass = fails == 0 && decreasing && (-0.6..=-0.1).contains(&slope);
    verdict(
        pass,
        format!(
            "a3 medians {:.3} / {:.3} / {:.3} at M = 1e2 / 1e3 / 1e4, slope {slope:.3} in [-0.6, -0.1], {fails} failed fits",
            a3[0], a3[1], a3[2]
        ),
    )
}

fn n_scaling() -> Verdict {
    let grid = Grid {
        n1: vec![20, 40, 80],
        n2: vec![20],
        r: vec![100],
        m: vec![1_000],
        ranks: vec![[2, 2, 3]],
        methods: vec![Method::Hosvd],
        trials: 15,
        seed: 4,
        ..Grid::default()
    };
    let rows = match run_grid(&grid) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let per_row: Vec<f64> = rows.iter().map(|r| r.median[0] / r.cell.dims[0] as f64).collect();
    let hi = per_row.iter().cloned().fold(0.0, f64::max);
    let lo = per_row.iter().cloned().fold(f64::INFINITY, f64::min);
    let fails = failures(&rows);
    verdict(
        fails == 0 && hi <= 2.0 * lo,
        format!(
            "a1 loss / N1 = {:.4} / {:.4} / {:.4} at N1 = 20 / 40 / 80, max/min {:.2} <= 2, {fails} failed fits",
            per_row[0],
            per_row[1],
            per_row[2],
            hi / lo
        ),
    )
}

/// Words whose mean count per document reaches the threshold, computed from
/// raw counts.
fn scanned_vocab(counts: &ttm_core::Counts, doc_length: u64, c_prime: f64) -> Vec<usize> {
    let [n1, n2, r] = counts.dims();
    let docs = (n1 * n2) as f64;
    let tau = c_prime * ((n1.max(n2).max(r) as f64).ln() / (docs * doc_length as f64)).sqrt();
    (0..r)
        .filter(|&w| {
            let total: u64 = (0..n1)
                .flat_map(|i| (0..n2).map(move |j| (i, j)))
                .map(|(i, j)| counts.get(i, j, w))
                .sum();
            total as f64 / (docs * doc_length as f64) >= tau
        })
        .collect()
}

fn sparse_variant(fitted: &mut Fitted) -> Verdict {
    let c_prime = ttm_core::estimator::DEFAULT_SPARSE_C;
    let results: Vec<_> = (0..15usize)
        .into_par_iter()
        .map(|t| {
            let mut spec = GenSpec::new([30, 30, 300], [2, 2, 3], 1_000, trial_seed(5, 0, t));
            spec.topic_prior = TopicPrior::Zipf { q: 0.5 };
            let inst = generate(&spec).expect("valid spec");
            let sparse = fit(
                &inst.y,
                spec.doc_length,
                &FitConfig::dense(spec.ranks).with_sparse(c_prime),
            )
            .map_err(|e| format!("trial {t} sparse: {e}"))?;
            let dense = fit(&inst.y, spec.doc_length, &FitConfig::dense(spec.ranks))
                .map_err(|e| format!("trial {t} dense: {e}"))?;
            let scan = scanned_vocab(&inst.counts, spec.doc_length, c_prime);
            if sparse.vocab != scan {
                return Err(format!("trial {t}: vocabulary differs from the direct scan"));
            }
            let outside: Vec<usize> = (0..spec.dims[2]).filter(|w| scan.binary_search(w).is_err()).collect();
            if outside.iter().any(|&w| (0..3).any(|k| sparse.model.a3[(w, k)] != 0.0)) {
                return Err(format!("trial {t}: a thresholded word has a nonzero a3 row"));
            }
            let ls = loss_report(&sparse.model, &inst.model)
                .map_err(|e| e.to_string())?
                .loss_a3;
            let ld = loss_report(&dense.model, &inst.model)
                .map_err(|e| e.to_string())?
                .loss_a3;
            Ok((
                ls,
                ld,
                outside.len(),
                [sparse.model.constraint_violation(), dense.model.constraint_violation()],
            ))
        })
        .collect();
    let (mut ls, mut ld, mut dropped) = (Vec::new(), Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok((s, d, n, v)) => {
                ls.push(s);
                ld.push(d);
                dropped.push(n as f64);
                v.into_iter().for_each(|x| fitted.record(x));
            }
            Err(e) => return verdict(false, e),
        }
    }
    let (ms, md) = (median(&ls), median(&ld));
    verdict(
        ms <= 1.5 * md,
        format!(
            "vocabulary equals scan and dropped rows are zero in 15/15; median a3 sparse {ms:.3} vs dense {md:.3} (ratio {:.2} <= 1.5), median {} words dropped",
            ms / md,
            median(&dropped)
        ),
    )
}

fn hooi_parity() -> Verdict {
    let grid = Grid {
        n1: vec![30],
        n2: vec![30],
        r: vec![100],
        m: vec![200],
        ranks: vec![[2, 2, 3]],
        methods: vec![Method::Hosvd, Method::Hooi],
        trials: 20,
        seed: 6,
        hooi_iters: 5,
        ..Grid::default()
    };
    let rows = match run_grid(&grid) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let hosvd = sweep_medians(&rows, Method::Hosvd)[0];
    let hooi = sweep_medians(&rows, Method::Hooi)[0];
    let fails = failures(&rows);
    let pass = fails == 0 && (0..4).all(|k| hooi[k] <= 1.1 * hosvd[k]);
    let parts: Vec<String> = (0..4)
        .map(|k| format!("{} {:.3} vs {:.3}", LOSS_NAMES[k], hooi[k], hosvd[k]))
        .collect();
    verdict(
        pass,
        format!(
            "HOOI(5) vs HOSVD medians over 20 instances: {} (<= 1.1x), {fails} failed fits",
            parts.join(", ")
        ),
    )
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_tensor(dims: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
}

fn random_dims(max: usize, rng: &mut ChaCha8Rng) -> [usize; 3] {
    [
        rng.random_range(1..=max),
        rng.random_range(1..=max),
        rng.random_range(1..=max),
    ]
}

/// Indices of the `k` rows spanning the largest simplex, by enumeration.
fn max_volume_subset(points: &Matrix, k: usize) -> Vec<usize> {
    let lift = points.cols() < k;
    let entry = |i: usize, c: usize| match (lift, c) {
        (true, 0) => 1.0,
        (true, c) => points[(i, c - 1)],
        (false, c) => points[(i, c)],
    };
    let n = points.rows();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let vol = DMatrix::from_fn(k, k, |r, c| entry(idx[r], c)).determinant().abs();
        if vol > best.0 {
            best = (vol, idx.clone());
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best.1;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Point cloud of `n` convex combinations of `k` perturbed vertices in
/// `dim` dimensions, each vertex attained once; returns the cloud and the
/// sorted anchor rows.
fn ideal_simplex(k: usize, dim: usize, n: usize, rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>) {
    let verts = Matrix::from_fn(k, dim, |r, c| {
        let base = if dim >= k { r == c } else { r > 0 && r - 1 == c };
        base as u8 as f64 + rng.random_range(-0.15..0.15)
    });
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut w = Matrix::zeros(n, k);
    for (row, &o) in order.iter().enumerate() {
        let weights = if o < k {
            (0..k).map(|c| (c == o) as u8 as f64).collect()
        } else {
            sample_dirichlet(&vec![1.0; k], rng).expect("positive alpha")
        };
        w.row_mut(row).copy_from_slice(&weights);
    }
    let mut anchors: Vec<usize> = (0..k).map(|t| order.iter().position(|&o| o == t).unwrap()).collect();
    anchors.sort_unstable();
    (w.matmul(&verts).expect("conformable"), anchors)
}

fn invariant_suites(fitted: &mut Fitted) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut pass = true;

    let mut round_trip_ok = true;
    for _ in 0..300 {
        let t = random_tensor(random_dims(7, &mut rng), &mut rng);
        for mode in 1..=3 {
            let back = fold(&unfold(&t, mode).unwrap(), mode, t.dims()).unwrap();
            round_trip_ok &= back == t;
        }
    }
    pass &= round_trip_ok;
    notes.push(format!(
        "fold/unfold 300x3 {}",
        if round_trip_ok { "exact" } else { "MISMATCH" }
    ));

    let mut worst_law = 0.0f64;
    for _ in 0..200 {
        let dims = random_dims(7, &mut rng);
        let ranks = [0, 1, 2].map(|a| rng.random_range(1..=dims[a].min(4)));
        let g = random_tensor(ranks, &mut rng);
        let a = [0, 1, 2].map(|m| random_matrix(dims[m], ranks[m], &mut rng));
        let d = reconstruct(&g, &a[0], &a[1], &a[2]).unwrap();
        for (mode, am, kr) in [
            (1, &a[0], kronecker(&a[1], &a[2])),
            (2, &a[1], kronecker(&a[0], &a[2])),
            (3, &a[2], kronecker(&a[0], &a[1])),
        ] {
            let rhs = am
                .matmul(&unfold(&g, mode).unwrap())
                .unwrap()
                .matmul(&kr.transpose())
                .unwrap();
            worst_law = worst_law.max(unfold(&d, mode).unwrap().max_abs_diff(&rhs));
        }
    }
    pass &= worst_law < 1e-12;
    notes.push(format!("matricization laws max {worst_law:.1e}"));

    let mut worst_orth = 0.0f64;
    for seed in 0..30 {
        let spec = GenSpec::new([20, 15, 60], [2, 3, 4], 200, 100 + seed);
        let inst = generate(&spec).unwrap();
        let f = hosvd(&inst.y, spec.ranks, Some(spec.doc_length)).unwrap();
        for xi in &f.xi {
            let gram = xi.transpose().matmul(xi).unwrap();
            worst_orth = worst_orth.max(gram.max_abs_diff(&Matrix::identity(xi.cols())));
        }
        if let Ok(res) = fit(&inst.y, spec.doc_length, &FitConfig::new(spec.ranks)) {
            fitted.record(res.model.constraint_violation());
        }
    }
    pass &= worst_orth < 1e-12;
    notes.push(format!("eigenvector orthonormality max {worst_orth:.1e}"));

    pass &= fitted.worst < 1e-12;
    notes.push(format!(
        "stochasticity over {} fitted models max {:.1e}",
        fitted.models, fitted.worst
    ));

    let mut spa_cases = 0;
    let mut spa_ok = true;
    for case in 0..60 {
        let k = 2 + case % 3;
        let n = k + 5 + (case * 7) % (56 - k);
        for dim in [k - 1, k] {
            let (cloud, anchors) = ideal_simplex(k, dim, n, &mut rng);
            let mut found = spa_vertex_hunt(&cloud, k).unwrap().indices;
            found.sort_unstable();
            let mut oracle = max_volume_subset(&cloud, k);
            oracle.sort_unstable();
            spa_ok &= found == anchors && oracle == anchors;
            spa_cases += 1;
        }
    }
    pass &= spa_ok;
    notes.push(format!(
        "SPA = max-volume = anchors {}/{spa_cases}",
        if spa_ok { spa_cases } else { 0 }
    ));

    let mut assign_ok = true;
    for case in 0..400 {
        let k = 1 + case % 8;
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let (bf, bp) = assign_brute_force(&cost);
        let (hu, hp) = assign_hungarian(&cost);
        assign_ok &= (bf - hu).abs() <= 1e-12 * bf.max(1.0) && bp == hp;
    }
    pass &= assign_ok;
    notes.push(format!(
        "brute force = Hungarian 400 cases K <= 8 {}",
        if assign_ok { "ok" } else { "MISMATCH" }
    ));

    verdict(pass, notes.join("; "))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    run_args(args.iter().copied(), &mut out).map_err(|e| format!("{args:?}: {e}"))?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn determinism() -> Verdict {
    let run = || -> Result<usize, String> {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let path = |name: &str| dir.path().join(name).display().to_string();
        let at = |prefix: &str, suffix: &str| with_suffix(Path::new(&path(prefix)), suffix).display().to_string();

        write_json(Path::new(&path("spec.json")), &GenSpec::toy_mixed(1)).map_err(|e| e.to_string())?;
        let grid = Grid {
            n1: vec![12],
            n2: vec![10],
            r: vec![40],
            methods: vec![Method::Hosvd, Method::Hooi, Method::Sparse],
            trials: 3,
            ..Grid::default()
        };
        write_json(Path::new(&path("grid.json")), &grid).map_err(|e| e.to_string())?;
        fs::write(path("cfg.json"), r#"{"ranks": [2, 2, 3], "hooi": 2}"#).map_err(|e| e.to_string())?;

        cli(&["generate", &path("spec.json"), "--seed", "5", "--out", &path("g")])?;
        let counts = at("g", ".counts.txt");
        cli(&["fit", &counts, "--ranks", "2,2,3", "--out", &path("f")])?;
        cli(&["fit", &counts, "--config", &path("cfg.json"), "--out", &path("h")])?;
        cli(&[
            "fit",
            &at("g", ".expected.txt"),
            "--ranks",
            "2,2,3",
            "--oracle",
            "--out",
            &path("o"),
        ])?;
        cli(&[
            "eval",
            &at("f", ".model.json"),
            &at("g", ".truth.json"),
            "--out",
            &path("e"),
        ])?;
        cli(&["scree", &counts, "--mode", "3", "--k-max", "8", "--out", &path("s")])?;
        cli(&["sweep", &path("grid.json"), "--trials", "2", "--out", &path("w")])?;

        let prefixes = ["g", "f", "h", "o", "e", "s", "w"];
        for (i, prefix) in prefixes.iter().enumerate() {
            let msg = cli(&[
                "replay",
                &at(prefix, ".manifest.json"),
                "--out",
                &path(&format!("replay{i}")),
            ])?;
            if !msg.contains("identical") {
                return Err(format!("{prefix}: {msg}"));
            }
        }
        Ok(prefixes.len())
    };
    match run() {
        Ok(n) => verdict(
            true,
            format!("{n} manifests (generate, 3x fit, eval, scree, sweep) replay byte-identical"),
        ),
        Err(e) => verdict(false, e),
    }
}

fn main() -> ExitCode {
    let mut fitted = Fitted { worst: 0.0, models: 0 };
    type Check<'a> = Box<dyn FnOnce(&mut Fitted) -> Verdict + 'a>;
    let checks: Vec<(&str, Duration, Check)> = vec![
        (
            "noiseless exact recovery",
            Duration::from_secs(1),
            Box::new(noiseless_recovery),
        ),
        (
            "toy reconstruction magnitude",
            Duration::from_secs(30),
            Box::new(toy_magnitude),
        ),
        (
            "a3 loss scaling in M",
            Duration::from_secs(300),
            Box::new(|_| m_scaling()),
        ),
        (
            "a1 per-row loss flat in N1",
            Duration::from_secs(300),
            Box::new(|_| n_scaling()),
        ),
        ("sparse variant", Duration::from_secs(300), Box::new(sparse_variant)),
        ("HOOI parity", Duration::from_secs(300), Box::new(|_| hooi_parity())),
        ("invariant suites", Duration::from_secs(300), Box::new(invariant_suites)),
        (
            "replay determinism",
            Duration::from_secs(300),
            Box::new(|_| determinism()),
        ),
    ];
    let mut failed = 0;
    for (n, (name, limit, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let v = check(&mut fitted);
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = v.pass && in_time;
        failed += !pass as usize;
        let timing = format!(
            "{:.2}s / {}s limit{}",
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " EXCEEDED" }
        );
        println!(
            "[{}] {}. {name}: {} ({timing})",
            if pass { "PASS" } else { "FAIL" },
            n + 1,
            v.detail
        );
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ttm_core::eval::scree;
use ttm_core::{fit, generate, loss_report, FitConfig, GenSpec, LossReport};

use crate::error::CliError;
use crate::format::{
    read_json, read_model, read_tensor, write_counts, write_file, write_json, write_model, write_real_tensor,
};
use crate::manifest::{absolute, with_suffix, OutputFile, RunManifest, Timer, Versions};
use crate::sweep::{fmt_float, run_grid, to_csv, Grid};
use crate::{Cli, Command, EvalArgs, FitArgs, GenerateArgs, ReplayArgs, ScreeArgs, SweepArgs};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

pub fn dispatch(cmd: Command, argv: Vec<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Generate(a) => cmd_generate(&a, argv),
        Command::Fit(a) => cmd_fit(&a, argv),
        Command::Eval(a) => cmd_eval(&a, argv, stdout),
        Command::Sweep(a) => cmd_sweep(&a, argv),
        Command::Scree(a) => cmd_scree(&a, argv, stdout),
        Command::Replay(a) => cmd_replay(&a, stdout),
    }
}

/// Collects output files and writes the manifest last.
struct Outputs<'a> {
    prefix: &'a Path,
    files: Vec<OutputFile>,
}

impl<'a> Outputs<'a> {
    fn new(prefix: &'a Path) -> Self {
        Self {
            prefix,
            files: Vec::new(),
        }
    }

    fn path(&mut self, suffix: &str) -> std::path::PathBuf {
        let p = with_suffix(self.prefix, suffix);
        self.files.push(OutputFile {
            suffix: suffix.to_string(),
            path: p.display().to_string(),
        });
        p
    }

    fn finish(
        self,
        command: &str,
        argv: Vec<String>,
        replay: Vec<String>,
        config: impl Serialize,
        seed: Option<u64>,
        timer: Timer,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            argv,
            replay,
            config: serde_json::to_value(config).map_err(|e| CliError::Data(e.to_string()))?,
            seed,
            versions: Versions::default(),
            timings: timer.stages,
            outputs: self.files,
        };
        manifest.write(&with_suffix(self.prefix, MANIFEST_SUFFIX))
    }
}

fn cmd_generate(a: &GenerateArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let mut spec: GenSpec = read_json(&a.spec)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate()
        .map_err(|e| CliError::Data(format!("{}: {e}", a.spec.display())))?;
    timer.lap("load");
    let inst = generate(&spec)?;
    timer.lap("generate");

    let mut out = Outputs::new(&a.out);
    let spec_path = out.path(".spec.json");
    write_json(&spec_path, &spec)?;
    write_counts(&out.path(".counts.txt"), &inst.counts, spec.doc_length)?;
    write_real_tensor(&out.path(".expected.txt"), &inst.d)?;
    write_model(&out.path(".truth.json"), &inst.model)?;
    timer.lap("write");
    let replay = vec!["generate".into(), absolute(&spec_path)];
    out.finish("generate", argv, replay, &spec, Some(spec.seed), timer)
}

/// Settings a `--config` file may provide for `fit`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitFileConfig {
    pub ranks: Option<[usize; 3]>,
    pub sparse: Option<f64>,
    pub hooi: Option<usize>,
    pub oracle: Option<bool>,
    pub seed: Option<u64>,
}

/// Fit settings after merging flags over the config file.
pub fn resolve_fit_config(a: &FitArgs) -> Result<(FitConfig, Option<u64>), CliError> {
    let file = match &a.config {
        Some(p) => read_json::<FitFileConfig>(p)?,
        None => FitFileConfig::default(),
    };
    let ranks = a
        .ranks
        .or(file.ranks)
        .ok_or_else(|| CliError::Usage("ranks are required: pass --ranks K1,K2,K3 or set them in --config".into()))?;
    let mut cfg = FitConfig::new(ranks);
    if let Some(c) = a.sparse.or(file.sparse) {
        cfg.sparse_c_prime = c;
    }
    cfg.hooi_iters = a.hooi.or(file.hooi).unwrap_or(0);
    cfg.oracle = a.oracle || file.oracle.unwrap_or(false);
    Ok((cfg, a.seed.or(file.seed)))
}

/// Everything `fit` reports besides the model; word and row indices are
/// 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub dims: [usize; 3],
    pub doc_length: u64,
    pub config: FitConfig,
    pub vocab: Vec<usize>,
    pub dropped_words: Vec<usize>,
    pub nonpositive_words: Vec<usize>,
    pub q0: Vec<f64>,
    pub vertex_indices: [Vec<usize>; 3],
    pub eigvals: [Vec<f64>; 3],
    pub hooi_iters: usize,
    pub constraint_violation: f64,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn cmd_fit(a: &FitArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let (cfg, seed) = resolve_fit_config(a)?;
    let tensor = read_tensor(&a.tensor)?;
    cfg.validate(tensor.dims).map_err(|e| CliError::Usage(e.to_string()))?;
    timer.lap("load");
    let res = fit(&tensor.frequencies(), tensor.doc_length, &cfg)?;
    timer.lap("fit");

    let diag = FitDiagnostics {
        dims: tensor.dims,
        doc_length: tensor.doc_length,
        config: cfg.clone(),
        vocab: one_based(&res.vocab),
        dropped_words: one_based(&res.dropped_words),
        nonpositive_words: one_based(&res.nonpositive_words),
        q0: res.q0.clone(),
        vertex_indices: res.vertex_indices.clone().map(|v| one_based(&v)),
        eigvals: res.eigvals.clone(),
        hooi_iters: res.hooi_iters,
        constraint_violation: res.model.constraint_violation(),
    };
    let mut out = Outputs::new(&a.out);
    write_model(&out.path(".model.json"), &res.model)?;
    write_json(&out.path(".fit.json"), &diag)?;
    timer.lap("write");

    let [k1, k2, k3] = cfg.ranks;
    let mut replay = vec![
        "fit".to_string(),
        absolute(&a.tensor),
        "--ranks".into(),
        format!("{k1},{k2},{k3}"),
        "--sparse".into(),
        format!("{}", cfg.sparse_c_prime),
        "--hooi".into(),
        cfg.hooi_iters.to_string(),
    ];
    if cfg.oracle {
        replay.push("--oracle".into());
    }
    if let Some(s) = seed {
        replay.extend(["--seed".to_string(), s.to_string()]);
    }
    out.finish("fit", argv, replay, &cfg, seed, timer)
}

pub const EVAL_HEADER: [&str; 8] = [
    "loss_a1", "loss_a2", "loss_a3", "loss_g", "recon_l1", "perm_a1", "perm_a2", "perm_a3",
];

/// One-row loss table; permutations are 1-based and space separated.
pub fn eval_csv(r: &LossReport) -> Result<Vec<u8>, CliError> {
    let perm = |p: &[usize]| p.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(" ");
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(EVAL_HEADER).map_err(err)?;
    w.write_record([
        fmt_float(r.loss_a1),
        fmt_float(r.loss_a2),
        fmt_float(r.loss_a3),
        fmt_float(r.loss_g),
        fmt_float(r.recon_l1),
        perm(&r.perms[0]),
        perm(&r.perms[1]),
        perm(&r.perms[2]),
    ])
    .map_err(err)?;
    w.into_inner()
        .map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))
}

fn cmd_eval(a: &EvalArgs, argv: Vec<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let est = read_model(&a.model)?;
    let truth = read_model(&a.truth)?;
    if est.dims() != truth.dims() || est.ranks() != truth.ranks() {
        return Err(CliError::Data(format!(
            "model has dims {:?} and ranks {:?}, truth has {:?} and {:?}",
            est.dims(),
            est.ranks(),
            truth.dims(),
            truth.ranks()
        )));
    }
    timer.lap("load");
    let report = loss_report(&est, &truth)?;
    timer.lap("eval");
    let csv = eval_csv(&report)?;
    match &a.out {
        None => stdout
            .write_all(&csv)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
        Some(prefix) => {
            let mut out = Outputs::new(prefix);
            write_file(&out.path(".eval.csv"), &csv)?;
            timer.lap("write");
            let replay = vec!["eval".into(), absolute(&a.model), absolute(&a.truth)];
            out.finish("eval", argv, replay, serde_json::Value::Null, None, timer)
        }
    }
}

fn cmd_sweep(a: &SweepArgs, argv: Vec<String>) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let mut grid: Grid = read_json(&a.grid)?;
    if let Some(t) = a.trials {
        grid.trials = t;
    }
    if let Some(s) = a.seed {
        grid.seed = s;
    }
    grid.validate()?;
    timer.lap("load");
    let rows = run_grid(&grid)?;
    timer.lap("trials");
    let mut out = Outputs::new(&a.out);
    let grid_path = out.path(".grid.json");
    write_json(&grid_path, &grid)?;
    write_file(&out.path(".csv"), &to_csv(&rows)?)?;
    timer.lap("write");
    let replay = vec!["sweep".into(), absolute(&grid_path)];
    out.finish("sweep", argv, replay, &grid, Some(grid.seed), timer)
}

fn cmd_scree(a: &ScreeArgs, argv: Vec<String>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut timer = Timer::new();
    let tensor = read_tensor(&a.tensor)?;
    let mode = a.mode as usize;
    let dim = tensor.dims[mode - 1];
    if a.k_max == 0 || a.k_max > dim {
        return Err(CliError::Usage(format!("--k-max must be in 1..={dim} for mode {mode}")));
    }
    timer.lap("load");
    let centering = (!a.oracle).then_some(tensor.doc_length);
    let vals = scree(&tensor.frequencies(), mode, a.k_max, centering)?;
    timer.lap("eigen");

    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(["index", "eigenvalue"]).map_err(err)?;
    for (k, v) in vals.iter().enumerate() {
        w.write_record([(k + 1).to_string(), fmt_float(*v)]).map_err(err)?;
    }
    let csv = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))?;
    match &a.out {
        None => stdout
            .write_all(&csv)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
        Some(prefix) => {
            let mut out = Outputs::new(prefix);
            write_file(&out.path(".scree.csv"), &csv)?;
            timer.lap("write");
            let mut replay = vec![
                "scree".into(),
                absolute(&a.tensor),
                "--mode".into(),
                mode.to_string(),
                "--k-max".into(),
                a.k_max.to_string(),
            ];
            if a.oracle {
                replay.push("--oracle".into());
            }
            let config = serde_json::json!({ "mode": mode, "k_max": a.k_max, "oracle": a.oracle });
            out.finish("scree", argv, replay, config, None, timer)
        }
    }
}

fn cmd_replay(a: &ReplayArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let manifest = RunManifest::read(&a.manifest)?;
    if manifest.outputs.is_empty() {
        return Err(CliError::Usage(format!(
            "{} lists no output files",
            a.manifest.display()
        )));
    }
    let mut args = manifest.replay.clone();
    args.extend(["--out".to_string(), a.out.display().to_string()]);
    let cli = <Cli as clap::Parser>::try_parse_from(std::iter::once("ttm".to_string()).chain(args.iter().cloned()))
        .map_err(|e| CliError::Data(format!("manifest replay arguments are invalid: {e}")))?;
    dispatch(cli.command, args, &mut std::io::sink())?;

    let mut mismatched = Vec::new();
    for f in &manifest.outputs {
        let fresh = with_suffix(&a.out, &f.suffix);
        let old = fs::read(&f.path).map_err(|e| CliError::io(Path::new(&f.path), e))?;
        let new = fs::read(&fresh).map_err(|e| CliError::io(&fresh, e))?;
        if old != new {
            mismatched.push(f.suffix.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Replay(format!("outputs differ: {}", mismatched.join(", "))));
    }
    writeln!(
        stdout,
        "replayed `{}`: {} output files identical",
        manifest.command,
        manifest.outputs.len()
    )
    .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

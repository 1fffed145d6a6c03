//! On-disk formats.
//!
//! Tensor files are UTF-8 text. Line 1 is the header `N1 N2 R M`; every
//! following line is `i j r value` with 1-based indices. Omitted triples
//! are zero, blank lines and lines starting with `#` are ignored. Values
//! are usually integer counts; non-negative reals are accepted as well so
//! that an expected-frequency tensor can be stored with `M = 1`.
//!
//! Model files are JSON documents holding `dims`, `ranks` and the dense
//! row-major arrays `a1` (N1×K1), `a2` (N2×K2), `a3` (R×K3) and `g`
//! (K1×K2×K3, last index fastest). Floats are written with 17 significant
//! digits so a read–write cycle is bit-exact.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};
use ttm_core::spectral::MAX_MODE_DIM;
use ttm_core::synth::Counts;
use ttm_core::{Matrix, Tensor3, TuckerModel};

use crate::error::CliError;

/// Dense tensors above this many entries are refused at load time.
pub const MAX_ENTRIES: usize = 50_000_000;

pub const MODEL_FORMAT: &str = "ttm-model";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub dims: [usize; 3],
    pub doc_length: u64,
    /// Values as written in the file.
    pub values: Tensor3,
    /// Every value was written as an integer.
    pub integral: bool,
}

impl TensorFile {
    /// Empirical frequencies `values / M`.
    pub fn frequencies(&self) -> Tensor3 {
        let inv = 1.0 / self.doc_length as f64;
        self.values.map(|v| v * inv)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_tensor(path: &Path) -> Result<TensorFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_tensor(&text, path)
}

pub fn parse_tensor(text: &str, path: &Path) -> Result<TensorFile, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing header `N1 N2 R M`"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(
            path,
            hline,
            format!("header needs 4 fields `N1 N2 R M`, found {}", fields.len()),
        ));
    }
    let mut dims = [0usize; 3];
    for (a, f) in fields[..3].iter().enumerate() {
        dims[a] = match f.parse::<usize>() {
            Ok(n) if (1..=MAX_MODE_DIM).contains(&n) => n,
            Ok(n) => {
                return Err(parse_err(
                    path,
                    hline,
                    format!("dimension {n} outside 1..={MAX_MODE_DIM}"),
                ));
            }
            Err(_) => {
                return Err(parse_err(
                    path,
                    hline,
                    format!("dimension `{f}` is not a positive integer"),
                ))
            }
        };
    }
    let doc_length = match fields[3].parse::<u64>() {
        Ok(m) if m >= 1 => m,
        _ => {
            return Err(parse_err(
                path,
                hline,
                format!("document length `{}` is not a positive integer", fields[3]),
            ));
        }
    };
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if !matches!(total, Some(t) if t <= MAX_ENTRIES) {
        return Err(parse_err(
            path,
            hline,
            format!("tensor {dims:?} exceeds {MAX_ENTRIES} entries"),
        ));
    }

    let mut values = Tensor3::zeros(dims);
    let mut seen = vec![false; values.as_slice().len()];
    let mut integral = true;
    for (n, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(
                path,
                n,
                format!("expected `i j r value`, found {} fields", f.len()),
            ));
        }
        let mut idx = [0usize; 3];
        for a in 0..3 {
            idx[a] = match f[a].parse::<usize>() {
                Ok(v) if v >= 1 && v <= dims[a] => v - 1,
                _ => {
                    return Err(parse_err(
                        path,
                        n,
                        format!("index `{}` for mode {} is outside 1..={}", f[a], a + 1, dims[a]),
                    ));
                }
            };
        }
        let value = if let Ok(c) = f[3].parse::<u64>() {
            c as f64
        } else {
            integral = false;
            match f[3].parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => v,
                _ => {
                    return Err(parse_err(
                        path,
                        n,
                        format!("value `{}` is not a non-negative number", f[3]),
                    ))
                }
            }
        };
        let off = values.offset(idx[0], idx[1], idx[2]);
        if std::mem::replace(&mut seen[off], true) {
            return Err(parse_err(
                path,
                n,
                format!("duplicate entry ({} {} {})", idx[0] + 1, idx[1] + 1, idx[2] + 1),
            ));
        }
        values.as_mut_slice()[off] = value;
    }
    Ok(TensorFile {
        dims,
        doc_length,
        values,
        integral,
    })
}

/// Writes a count tensor, skipping zeros.
pub fn write_counts(path: &Path, counts: &Counts, doc_length: u64) -> Result<(), CliError> {
    let [n1, n2, n3] = counts.dims();
    let mut out = format!("{n1} {n2} {n3} {doc_length}\n");
    for i in 0..n1 {
        for j in 0..n2 {
            for r in 0..n3 {
                let c = counts.get(i, j, r);
                if c > 0 {
                    out.push_str(&format!("{} {} {} {c}\n", i + 1, j + 1, r + 1));
                }
            }
        }
    }
    write_file(path, out.as_bytes())
}

/// Writes a real-valued tensor with `M = 1`, skipping zeros.
pub fn write_real_tensor(path: &Path, t: &Tensor3) -> Result<(), CliError> {
    let [n1, n2, n3] = t.dims();
    let mut out = format!("{n1} {n2} {n3} 1\n");
    for i in 0..n1 {
        for j in 0..n2 {
            for r in 0..n3 {
                let v = t.get(i, j, r);
                if v != 0.0 {
                    out.push_str(&format!("{} {} {} {}\n", i + 1, j + 1, r + 1, fmt17(v)));
                }
            }
        }
    }
    write_file(path, out.as_bytes())
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON formatter that writes every float with 17 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt17(value).as_bytes())
        } else {
            CompactFormatter.write_null(writer)
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes `value` as compact JSON with 17-digit floats and a trailing
/// newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits17);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, &to_json_bytes(value)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub dims: [usize; 3],
    pub ranks: [usize; 3],
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    pub g: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(m: &TuckerModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            dims: m.dims(),
            ranks: m.ranks(),
            a1: m.a1.as_slice().to_vec(),
            a2: m.a2.as_slice().to_vec(),
            a3: m.a3.as_slice().to_vec(),
            g: m.g.as_slice().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<TuckerModel, String> {
        if self.format != MODEL_FORMAT {
            return Err(format!("format is `{}`, expected `{MODEL_FORMAT}`", self.format));
        }
        let [n1, n2, r] = self.dims;
        let [k1, k2, k3] = self.ranks;
        if self.dims.contains(&0) || self.ranks.contains(&0) {
            return Err("dims and ranks must be positive".into());
        }
        let mat = |name: &str, rows: usize, cols: usize, data: Vec<f64>| {
            Matrix::from_vec(rows, cols, data).map_err(|_| format!("`{name}` must hold {rows}×{cols} values"))
        };
        Ok(TuckerModel {
            a1: mat("a1", n1, k1, self.a1)?,
            a2: mat("a2", n2, k2, self.a2)?,
            a3: mat("a3", r, k3, self.a3)?,
            g: Tensor3::from_vec(self.ranks, self.g).map_err(|_| format!("`g` must hold {k1}×{k2}×{k3} values"))?,
        })
    }
}

pub fn write_model(path: &Path, m: &TuckerModel) -> Result<(), CliError> {
    write_json(path, &ModelFile::from_model(m))
}

pub fn read_model(path: &Path) -> Result<TuckerModel, CliError> {
    let file: ModelFile = read_json(path)?;
    file.into_model()
        .map_err(|msg| CliError::Data(format!("{}: {msg}", path.display())))
}

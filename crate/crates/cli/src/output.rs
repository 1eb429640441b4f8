//! File writers: CSV tables with a configuration preamble, JSON summaries and
//! the binary statevector format.
//!
//! Statevector files hold the 8-byte magic `RNQSVEC1`, the site count as a
//! little-endian `u32`, then `2^N` amplitudes as interleaved little-endian
//! `f64` real and imaginary parts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rotnqs::hilbert::{SpinBasis, StateVector, C64};
use rotnqs::{Error, Result};

pub const STATE_MAGIC: &[u8; 8] = b"RNQSVEC1";

/// Shortest round-trip scientific notation; `nan` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes `preamble` lines, the header, then one line per row.
pub fn write_csv(path: &Path, preamble: &[String], header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::new();
    for line in preamble {
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Lines of a CSV file after the `#` preamble.
pub fn csv_body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_statevector(path: &Path, state: &StateVector) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 16 * state.dim());
    buf.extend_from_slice(STATE_MAGIC);
    buf.extend_from_slice(&(state.n_sites() as u32).to_le_bytes());
    for a in state.amps() {
        buf.extend_from_slice(&a.re.to_le_bytes());
        buf.extend_from_slice(&a.im.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&buf).map_err(|e| io_err(path, e))
}

pub fn read_statevector(path: &Path) -> Result<StateVector> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let bad = |msg: &str| Error::Io(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..8] != STATE_MAGIC {
        return Err(bad("not a statevector file"));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let basis = SpinBasis::new(n)?;
    let body = &bytes[12..];
    if body.len() != 16 * basis.dim() {
        return Err(bad("truncated amplitude data"));
    }
    let amps = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    StateVector::new(basis, amps)
}

/// Creates `<root>/<preset>_<unix seconds>_seed<seed>`, adding a numeric
/// suffix if that directory already exists.
pub fn create_run_dir(root: &Path, preset: &str, seed: u64) -> Result<PathBuf> {
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
    let base = format!("{preset}_{stamp}_seed{seed}");
    let mut dir = root.join(&base);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{base}_{k}"));
        k += 1;
    }
    fs::create_dir(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

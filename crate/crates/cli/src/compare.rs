//! Reproducibility check between two runs.
//!
//! NDJSON numbers must agree to a relative tolerance; checkpoint files must be
//! byte-identical. Manifests are skipped since they carry wall-clock times.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::manifest::MANIFEST_FILE;
use crate::output::{io_err, read_ndjson};
use crate::CliError;

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

fn compare_values(a: &Value, b: &Value, rel: f64, at: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if close(x, y, rel) {
                Ok(())
            } else {
                Err(format!("{at}: {x} vs {y}"))
            }
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return Err(format!("{at}: lengths {} vs {}", xs.len(), ys.len()));
            }
            xs.iter()
                .zip(ys)
                .enumerate()
                .try_for_each(|(i, (x, y))| compare_values(x, y, rel, &format!("{at}[{i}]")))
        }
        (Value::Object(xs), Value::Object(ys)) => {
            if xs.len() != ys.len() || xs.keys().any(|k| !ys.contains_key(k)) {
                return Err(format!("{at}: different keys"));
            }
            xs.iter()
                .try_for_each(|(k, x)| compare_values(x, &ys[k], rel, &format!("{at}.{k}")))
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{at}: {a} vs {b}")),
    }
}

fn is_binary(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "chk"))
}

fn is_ndjson(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("ndjson")
}

fn compare_files(a: &Path, b: &Path, rel: f64) -> Result<(), CliError> {
    if is_binary(a) {
        let x = std::fs::read(a).map_err(io_err(a))?;
        let y = std::fs::read(b).map_err(io_err(b))?;
        if x != y {
            return Err(CliError::Mismatch(format!("{} and {} differ", a.display(), b.display())));
        }
        return Ok(());
    }
    let xs = read_ndjson(a)?;
    let ys = read_ndjson(b)?;
    if xs.len() != ys.len() {
        return Err(CliError::Mismatch(format!(
            "{} has {} rows, {} has {}",
            a.display(),
            xs.len(),
            b.display(),
            ys.len()
        )));
    }
    for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
        compare_values(x, y, rel, &format!("line {}", i + 1))
            .map_err(|m| CliError::Mismatch(format!("{}: {m}", a.display())))?;
    }
    Ok(())
}

fn collect(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect(&path, base, out)?;
        } else if (is_ndjson(&path) || is_binary(&path))
            && path.file_name().and_then(|n| n.to_str()) != Some(MANIFEST_FILE)
        {
            out.push(path.strip_prefix(base).expect("inside base").to_owned());
        }
    }
    Ok(())
}

/// Compares two files, or every NDJSON and checkpoint file under two directories.
/// Returns the number of files compared.
pub fn compare_paths(a: &Path, b: &Path, rel: f64) -> Result<usize, CliError> {
    if !a.is_dir() {
        compare_files(a, b, rel)?;
        return Ok(1);
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    collect(a, a, &mut left)?;
    collect(b, b, &mut right)?;
    left.sort();
    right.sort();
    if left != right {
        return Err(CliError::Mismatch(format!("file sets differ: {left:?} vs {right:?}")));
    }
    for rel_path in &left {
        compare_files(&a.join(rel_path), &b.join(rel_path), rel)?;
    }
    Ok(left.len())
}

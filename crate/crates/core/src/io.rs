//! CSV and JSON artifacts.
//!
//! Every CSV starts with a `# config_hash=<hex>` comment line followed by a
//! header row; numbers are written with 17 significant digits.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// SHA-256 of the compact JSON form of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Format a number with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text for `rows` under `header`.
pub fn csv_string<R: AsRef<[f64]>>(config_hash: &str, header: &[&str], rows: &[R]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={config_hash}");
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.as_ref().iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv<R: AsRef<[f64]>>(path: &Path, config_hash: &str, header: &[&str], rows: &[R]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv_string(config_hash, header, rows))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Parse a CSV written by [`write_csv`]: `(hash, header, rows)`.
pub fn read_csv(text: &str) -> Option<(String, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let hash = lines.next()?.strip_prefix("# config_hash=")?.to_string();
    let header = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse().ok()).collect::<Option<Vec<f64>>>())
        .collect::<Option<Vec<_>>>()?;
    Some((hash, header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![[0.1, -1.0 / 3.0], [f64::MIN_POSITIVE, 1e300]];
        let text = csv_string("abc", &["a", "b"], &rows);
        assert!(text.starts_with("# config_hash=abc\na,b\n"));
        let (hash, header, back) = read_csv(&text).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(header, vec!["a", "b"]);
        for (r, b) in rows.iter().zip(&back) {
            assert_eq!(&r[..], &b[..]);
        }
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        write_csv(&p, "h", &["x"], &[[1.0]]).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "# config_hash=h\nx\n1.0000000000000000e0\n"
        );
        let j = dir.path().join("r.json");
        write_json(&j, &serde_json::json!({"a": 1})).unwrap();
        assert!(fs::read_to_string(&j).unwrap().contains("\"a\": 1"));
    }
}

//! Reproducible serialization: every float written to disk uses fixed
//! 17-significant-digit scientific notation (`{:.16e}`), which round-trips
//! exactly and is byte-stable across runs and platforms.  CSV files are
//! always `\n`-terminated.

use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

/// JSON formatter pinning `f64` output to `{:.16e}`.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with pinned float formatting and a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut bytes, SciFormatter);
    value
        .serialize(&mut ser)
        .context("serializing JSON artifact")?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, json_bytes(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

/// Fixed-format float cell for CSV artifacts.
pub fn float_cell(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut text = String::with_capacity(rows.len() * 64 + 64);
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut owned = text.to_owned();
    if !owned.ends_with('\n') {
        owned.push('\n');
    }
    std::fs::write(path, owned).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_written_with_seventeen_significant_digits() {
        let bytes = json_bytes(&serde_json::json!({ "x": 0.1, "n": 3 })).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "{\"n\":3,\"x\":1.0000000000000001e-1}\n");
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_cells_round_trip() {
        for x in [0.0, 1.0 / 3.0, -2.25e-13, std::f64::consts::PI] {
            assert_eq!(float_cell(x).parse::<f64>().unwrap(), x);
        }
    }
}

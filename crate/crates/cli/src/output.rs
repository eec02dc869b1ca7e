//! CSV and JSON writers with provenance headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const ARTIFACT_VERSION: &str = concat!("rydent ", env!("CARGO_PKG_VERSION"));

/// Shortest round-trip form of a kick strength, as used in file names.
pub fn fmt_k(k: f64) -> String {
    format!("{k}")
}

/// Round-trip decimal form, switching to exponent notation for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes `#` header lines (artifact version, metadata, config echo) then the CSV body.
pub fn write_csv<I>(
    path: &Path,
    cfg: &RunConfig,
    meta: &[(&str, String)],
    header: &[&str],
    rows: I,
) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let io = |e| anyhow::Error::new(e).context(format!("writing {}", path.display()));
    writeln!(out, "# artifact: {ARTIFACT_VERSION}").map_err(io)?;
    for (key, value) in meta {
        writeln!(out, "# {key}: {value}").map_err(io)?;
    }
    for line in cfg.to_flat_lines() {
        writeln!(out, "# config: {line}").map_err(io)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)
        .with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.write_record(&row)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Provenance {
    artifact: &'static str,
    config: Vec<String>,
}

#[derive(Serialize)]
struct WithProvenance<'a, T> {
    provenance: Provenance,
    #[serde(flatten)]
    data: &'a T,
}

/// Pretty JSON object with a leading `provenance` field.
pub fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, data: &T) -> Result<()> {
    let doc = WithProvenance {
        provenance: Provenance {
            artifact: ARTIFACT_VERSION,
            config: cfg.to_flat_lines(),
        },
        data,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

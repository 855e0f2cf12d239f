//! Report envelopes, file output and the error format.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// Wraps a payload with the command name, the resolved configuration and the
/// library version.
pub fn envelope(
    command: &str,
    config: &impl Serialize,
    max_exact_d: Option<usize>,
    payload: Value,
) -> Value {
    let mut cfg = serde_json::to_value(config).unwrap_or(Value::Null);
    if let (Value::Object(m), Some(d)) = (&mut cfg, max_exact_d) {
        m.insert("max_exact_d".into(), json!(d));
    }
    let mut out = Map::new();
    out.insert("command".into(), json!(command));
    out.insert("version".into(), json!(mbhd_core::VERSION));
    out.insert("config".into(), cfg);
    if let Value::Object(p) = payload {
        out.extend(p);
    }
    Value::Object(out)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes a CSV with a header row. Cells are written verbatim.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Formats an optional number; missing values become empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `{"error": kind, "message": text}` for the first library error in the
/// chain, or a generic kind otherwise.
pub fn error_json(e: &anyhow::Error) -> String {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<mbhd_core::Error>().map(|x| x.kind()))
        .or_else(|| {
            e.chain()
                .find_map(|c| c.downcast_ref::<std::io::Error>().map(|_| "Io"))
        })
        .unwrap_or("Usage");
    json!({ "error": kind, "message": format!("{e:#}") }).to_string()
}

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use ruinsim_core::EstimateSummary;

pub const CSV_HEADER: [&str; 10] = ["b", "estimator", "n", "mean", "std_error", "cv", "mean_tau", "censored_frac", "seed", "wall_seconds"];

/// Full-precision scientific notation: 17 significant digits round-trip any f64.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn csv_bytes(rows: &[EstimateSummary], timing: bool) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let wall = if timing { sci(r.wall_seconds) } else { String::new() };
        w.write_record([
            sci(r.b),
            r.estimator.label().to_string(),
            r.n.to_string(),
            sci(r.mean),
            sci(r.std_error),
            sci(r.cv),
            sci(r.mean_tau),
            sci(r.censored_frac),
            r.seed.to_string(),
            wall,
        ])?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))
}

/// Summary as JSON, with wall time nulled unless timing was requested so that
/// repeated runs produce identical files.
pub fn summary_json(r: &EstimateSummary, timing: bool) -> anyhow::Result<Value> {
    let mut v = serde_json::to_value(r)?;
    if !timing {
        v["wall_seconds"] = Value::Null;
    }
    Ok(v)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

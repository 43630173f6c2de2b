//! Output plumbing shared by the subcommands: deterministic CSV/JSON
//! bodies, the sidecar metadata file, float formatting, and the flat
//! key-value config format.
//!
//! Output bodies are pure functions of the command parameters (and seed),
//! so repeated runs are byte-identical. Anything time-dependent — the
//! creation timestamp — lives in a `<out>.meta.json` sidecar next to the
//! body, never in the body itself.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliError;

/// Render a float for CSV bodies. Finite values use Rust's shortest
/// round-trip representation; infinities serialize as "inf"/"-inf".
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else {
        // f64's Display already prints "inf"/"-inf" for infinities.
        format!("{x}")
    }
}

/// Serialize a possibly-infinite float into JSON: finite values as numbers,
/// infinities as the strings "inf"/"-inf".
pub fn ser_maybe_inf<S>(x: &f64, serializer: S) -> Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    if x.is_finite() {
        serializer.serialize_f64(*x)
    } else if x.is_nan() {
        serializer.serialize_str("nan")
    } else if *x > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

/// 64-bit FNV-1a digest, hex-encoded — the content-addressed version tag
/// recorded in the sidecar so every emitted table is traceable.
pub fn fnv1a64_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Sidecar metadata written next to every `--out` artifact.
#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    tool_version: &'a str,
    format_version: u32,
    body_fnv1a64: String,
    created_unix_secs: u64,
    parameters: serde_json::Value,
}

/// Write `body` to `out` byte-for-byte and a `<out>.meta.json` sidecar
/// describing the run (command name, parameters, a content digest of the
/// body, and the only timestamp anywhere in the artifacts).
pub fn write_artifact(
    out: &Path,
    body: &[u8],
    command: &str,
    parameters: serde_json::Value,
) -> Result<(), CliError> {
    fs::write(out, body)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    let meta = Meta {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        format_version: 1,
        body_fnv1a64: fnv1a64_hex(body),
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        parameters,
    };
    let meta_path = PathBuf::from(format!("{}.meta.json", out.display()));
    let rendered = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::usage(format!("cannot render metadata: {e}")))?;
    fs::write(&meta_path, rendered.as_bytes())
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", meta_path.display())))?;
    Ok(())
}

/// Build a CSV body from a header and preformatted rows.
pub fn csv_body(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| CliError::usage(format!("cannot write CSV header: {e}")))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| CliError::usage(format!("cannot write CSV row: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::usage(format!("cannot finish CSV body: {e}")))
}

/// Parse the flat key-value config format: one `key = value` pair per line,
/// `#` comments, blank lines ignored. Keys mirror the command-line flag
/// names without the leading `--`. Duplicate keys are rejected.
pub fn parse_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "config {} line {}: expected 'key = value', got '{raw}'",
                path.display(),
                number + 1
            ))
        })?;
        let key = key.trim().to_owned();
        let value = value.trim().to_owned();
        if key.is_empty() {
            return Err(CliError::usage(format!(
                "config {} line {}: empty key",
                path.display(),
                number + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::usage(format!(
                "config {} line {}: duplicate key '{key}'",
                path.display(),
                number + 1
            )));
        }
    }
    Ok(map)
}

/// Parse a sweep grid: either a single number ("0.05") or an inclusive
/// linear range "START:STOP:COUNT" ("1.0:4.25:50").
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::usage(format!("grid '{text}': {msg}"));
    if !text.contains(':') {
        let value: f64 = text
            .parse()
            .map_err(|_| bad("expected a number or START:STOP:COUNT"))?;
        return Ok(vec![value]);
    }
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected START:STOP:COUNT"));
    }
    let start: f64 = parts[0].parse().map_err(|_| bad("bad START"))?;
    let stop: f64 = parts[1].parse().map_err(|_| bad("bad STOP"))?;
    let count: usize = parts[2].parse().map_err(|_| bad("bad COUNT"))?;
    if count == 0 {
        return Err(bad("COUNT must be at least 1"));
    }
    if !start.is_finite() || !stop.is_finite() {
        return Err(bad("endpoints must be finite"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Parse a comma-separated list of floats ("0.025,0.95,0.025").
pub fn parse_float_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad number '{}' in list '{text}'", part.trim())))
        })
        .collect()
}

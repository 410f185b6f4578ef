use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// A config after flag overrides, plus the hash of its canonical form.
pub struct Loaded {
    pub value: Value,
    pub hash: String,
}

impl Loaded {
    pub fn parse<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.value.clone()).map_err(CliError::from_serde)
    }
}

/// Reads a JSON object, applies `overrides` (flags win), and hashes the
/// result with keys sorted so formatting does not matter.
pub fn load_config(path: &Path, overrides: &[(&str, Option<Value>)]) -> Result<Loaded> {
    let bytes = read_bytes(path)?;
    let mut value: Value = serde_json::from_slice(&bytes).map_err(CliError::from_serde)?;
    let obj = value.as_object_mut().ok_or_else(|| CliError::Config {
        message: "config must be a JSON object".into(),
        key: None,
    })?;
    for (key, v) in overrides {
        if let Some(v) = v {
            obj.insert((*key).to_string(), v.clone());
        }
    }
    let hash = hash_value(&value);
    Ok(Loaded { value, hash })
}

pub fn hash_value(value: &Value) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("JSON values always serialise"))
}

/// Hash for commands driven by flags and input files rather than a config.
pub fn hash_args(args: Value, inputs: &[(&str, &Path)]) -> Result<String> {
    let mut files = Map::new();
    for (name, path) in inputs {
        files.insert((*name).to_string(), json!(sha256_hex(&read_bytes(path)?)));
    }
    Ok(hash_value(&json!({ "args": args, "inputs": files })))
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub config_hash: String,
    pub master_seed: Option<u64>,
    pub tool_version: &'static str,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(config_hash: String, master_seed: Option<u64>, body: T) -> Self {
        Self { config_hash, master_seed, tool_version: TOOL_VERSION, body }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialise");
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

/// 17 significant digits, so values survive a round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_xy_csv(path: &Path, header: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    write_csv(path, &header, points.iter().map(|&(x, y)| vec![fmt_f64(x), fmt_f64(y)]))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::input(path, e.to_string())
}

/// Numeric rows of a CSV file. A first row that does not parse is taken as
/// a header.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::input(path, format!("row {}: {e}", i + 1))),
        }
    }
    if let Some(first) = rows.first() {
        let width = first.len();
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(CliError::input(path, format!("row {} has {} columns, expected {width}", i + 1, rows[i].len())));
        }
    }
    Ok(rows)
}

/// First two columns of a CSV file as points.
pub fn read_xy_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    if rows[0].len() < 2 {
        return Err(CliError::input(path, "need two columns"));
    }
    Ok(rows.iter().map(|r| (r[0], r[1])).collect())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

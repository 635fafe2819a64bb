//! CSV and JSON artifacts written and read by the command-line front end.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inner_opt::GreedyPolicy;
use crate::measure_ot::StateMeasure;
use crate::model::Model;
use crate::qfunction::QFunction;

pub const Q_TABLE: &str = "q_table.csv";
pub const MEASURE: &str = "measure.csv";
pub const POLICY: &str = "policy.csv";
pub const REPORT: &str = "report.json";
pub const CERTIFICATE: &str = "certificate.json";
pub const NAGENT: &str = "nagent.csv";
pub const CONSTANTS: &str = "constants.json";
pub const CONTRACTION: &str = "contraction.json";

/// Manifest file written by `command`, e.g. `solve_manifest.json`.
pub fn manifest_name(command: &str) -> String {
    format!("{command}_manifest.json")
}

/// JSON fields holding wall-clock measurements, excluded from content hashes.
pub const WALL_CLOCK_FIELDS: [&str; 2] = ["wall_time_secs", "wall_clock_secs"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of an artifact. JSON files are hashed with wall-clock fields removed
/// so that identical runs hash identically.
pub fn content_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut value: serde_json::Value = serde_json::from_slice(&bytes)?;
        strip_wall_clock(&mut value);
        return Ok(sha256_hex(serde_json::to_string(&value)?.as_bytes()));
    }
    Ok(sha256_hex(&bytes))
}

pub fn strip_wall_clock(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for f in WALL_CLOCK_FIELDS {
                map.remove(f);
            }
            map.values_mut().for_each(strip_wall_clock);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_clock),
        _ => {}
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_measure(path: &Path, mu: &StateMeasure) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["state_index", "prob"])?;
    for (i, p) in mu.probs().iter().enumerate() {
        w.serialize((i, p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure(path: &Path, n_states: usize) -> Result<StateMeasure> {
    let mut r = csv::Reader::from_path(path)?;
    let mut probs = vec![f64::NAN; n_states];
    for rec in r.deserialize() {
        let (i, p): (usize, f64) = rec?;
        if i >= n_states {
            return Err(Error::Schema(format!("{}: state index {i} out of range", path.display())));
        }
        probs[i] = p;
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::Schema(format!("{}: missing states", path.display())));
    }
    StateMeasure::new(probs)
}

fn action_header(dim: usize) -> Vec<String> {
    (0..dim).map(|c| format!("action_{c}")).collect()
}

pub fn write_policy(path: &Path, policy: &GreedyPolicy) -> Result<()> {
    let dim = policy.actions().first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["state_index".to_string()];
    header.extend(action_header(dim));
    w.write_record(&header)?;
    for (x, a) in policy.actions().iter().enumerate() {
        let mut rec = vec![x.to_string()];
        rec.extend(a.iter().map(|v| format_float(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_policy(path: &Path, model: &Model) -> Result<GreedyPolicy> {
    let n = model.n_states();
    let dim = model.actions().dim();
    let mut r = csv::Reader::from_path(path)?;
    let mut actions: Vec<Option<Vec<f64>>> = vec![None; n];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::Schema(format!("{}: expected {} columns", path.display(), dim + 1)));
        }
        let x: usize = parse(&rec[0], path)?;
        if x >= n {
            return Err(Error::Schema(format!("{}: state index {x} out of range", path.display())));
        }
        let a = (1..=dim).map(|c| parse(&rec[c], path)).collect::<Result<Vec<f64>>>()?;
        actions[x] = Some(a);
    }
    let actions = actions
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Schema(format!("{}: missing states", path.display())))?;
    let policy = GreedyPolicy::new(actions);
    policy.validate(model)?;
    Ok(policy)
}

/// Long format: one row per (state, lattice action) with the value-function entry repeated.
pub fn write_q_table(path: &Path, q: &QFunction, model: &Model) -> Result<()> {
    let dim = model.actions().dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["state_index".to_string(), "action_index".to_string()];
    header.extend(action_header(dim));
    header.push("q".into());
    header.push("q_min".into());
    w.write_record(&header)?;
    for x in 0..q.n_states() {
        for (k, a) in model.actions().lattice().iter().enumerate() {
            let mut rec = vec![x.to_string(), k.to_string()];
            rec.extend(a.iter().map(|v| format_float(*v)));
            rec.push(format_float(q.get(x, k)));
            rec.push(format_float(q.q_min()[x]));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_q_table(path: &Path, model: &Model) -> Result<QFunction> {
    let (n, na) = (model.n_states(), model.n_actions());
    let dim = model.actions().dim();
    let mut r = csv::Reader::from_path(path)?;
    let mut values = vec![f64::NAN; n * na];
    let mut mins = vec![f64::NAN; n];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim + 4 {
            return Err(Error::Schema(format!("{}: expected {} columns", path.display(), dim + 4)));
        }
        let x: usize = parse(&rec[0], path)?;
        let k: usize = parse(&rec[1], path)?;
        if x >= n || k >= na {
            return Err(Error::Schema(format!("{}: index ({x}, {k}) out of range", path.display())));
        }
        values[x * na + k] = parse(&rec[dim + 2], path)?;
        mins[x] = parse(&rec[dim + 3], path)?;
    }
    if values.iter().chain(&mins).any(|v| v.is_nan()) {
        return Err(Error::Schema(format!("{}: incomplete table", path.display())));
    }
    Ok(QFunction::from_parts(n, na, values, mins))
}

fn parse<T: std::str::FromStr>(field: &str, path: &Path) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Schema(format!("{}: cannot parse '{field}'", path.display())))
}

/// Shortest representation that parses back to the same `f64`.
fn format_float(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Serialize)]
pub struct NagentRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_cost: f64,
    pub gap: f64,
    pub stderr: f64,
}

pub fn write_nagent(path: &Path, rows: &[NagentRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_congestion_model;

    #[test]
    fn artifacts_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let model = builtin_congestion_model(4, 3, 0.3, (1.0, 1.0)).unwrap();
        let mu = StateMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        write_measure(&dir.path().join(MEASURE), &mu).unwrap();
        assert_eq!(read_measure(&dir.path().join(MEASURE), 4).unwrap(), mu);

        let policy = GreedyPolicy::new(vec![vec![-1.0], vec![0.0], vec![1.0], vec![0.0]]);
        write_policy(&dir.path().join(POLICY), &policy).unwrap();
        assert_eq!(read_policy(&dir.path().join(POLICY), &model).unwrap(), policy);

        let values: Vec<f64> = (0..12).map(|i| 0.1 * i as f64 + 1.0 / 3.0).collect();
        let q = QFunction::from_table(&model, values).unwrap();
        write_q_table(&dir.path().join(Q_TABLE), &q, &model).unwrap();
        assert_eq!(read_q_table(&dir.path().join(Q_TABLE), &model).unwrap(), q);
    }

    #[test]
    fn json_hash_ignores_wall_clock() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_json(&a, &serde_json::json!({"x": 1, "wall_time_secs": 0.5})).unwrap();
        write_json(&b, &serde_json::json!({"x": 1, "wall_time_secs": 2.5})).unwrap();
        assert_eq!(content_hash(&a).unwrap(), content_hash(&b).unwrap());
    }
}

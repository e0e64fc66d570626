//! Fixed CSV schema, number formatting and the JSON summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};
use symrec::bounds::BoundKind;
use symrec::channel::Instance;
use symrec::linalg::CMat;

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Leading text columns.
pub const TEXT_COLUMNS: [&str; 4] = ["command", "seed", "instance_hash", "label"];

/// Numeric columns, in output order. `bound_*` columns hold the left-hand
/// side of each named bound.
pub fn numeric_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "param",
        "a_single",
        "a_sum",
        "a_two",
        "delta_plus",
        "delta_max",
        "f",
        "f_f",
        "f_b",
        "d_z",
        "error",
        "delta_lower",
        "delta_upper",
        "delta_tilde_upper",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(BoundKind::ALL.iter().map(|k| bound_column(*k)));
    cols.push("check_value".into());
    cols.push("check_limit".into());
    cols
}

pub fn bound_column(kind: BoundKind) -> String {
    format!("bound_{}", kind.name().to_ascii_lowercase())
}

pub fn header() -> Vec<String> {
    let mut h = vec!["schema_version".to_string()];
    h.extend(TEXT_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(numeric_columns());
    h.push("violations".into());
    h.push("verdict".into());
    h
}

/// One CSV record. Missing numeric cells are written empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub command: String,
    pub seed: u64,
    pub instance_hash: String,
    pub label: String,
    pub values: BTreeMap<String, f64>,
    pub violations: usize,
}

impl Row {
    pub fn new(command: &str, seed: u64, instance_hash: String, label: impl Into<String>) -> Self {
        Row {
            command: command.to_string(),
            seed,
            instance_hash,
            label: label.into(),
            values: BTreeMap::new(),
            violations: 0,
        }
    }

    pub fn set(&mut self, column: &str, value: f64) -> &mut Self {
        debug_assert!(numeric_columns().iter().any(|c| c == column), "unknown column {column}");
        self.values.insert(column.to_string(), value);
        self
    }

    pub fn set_bound(&mut self, kind: BoundKind, value: f64) -> &mut Self {
        self.set(&bound_column(kind), value)
    }

    /// Records a check passing iff `value ≤ limit`.
    pub fn check_at_most(&mut self, value: f64, limit: f64) -> &mut Self {
        self.set("check_value", value);
        self.set("check_limit", limit);
        if !(value <= limit) {
            self.violations += 1;
        }
        self
    }

    pub fn flag(&mut self, violated: bool) -> &mut Self {
        if violated {
            self.violations += 1;
        }
        self
    }

    pub fn verdict(&self) -> &'static str {
        if self.violations == 0 {
            "pass"
        } else {
            "fail"
        }
    }

    fn record(&self, numeric: &[String]) -> Vec<String> {
        let mut r = vec![
            SCHEMA_VERSION.to_string(),
            self.command.clone(),
            self.seed.to_string(),
            self.instance_hash.clone(),
            self.label.clone(),
        ];
        r.extend(numeric.iter().map(|c| self.values.get(c).map(|v| format_number(*v)).unwrap_or_default()));
        r.push(self.violations.to_string());
        r.push(self.verdict().to_string());
        r
    }
}

/// Round to 12 significant digits and print the shortest form of the result,
/// in exponent notation outside `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let numeric = numeric_columns();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for row in rows {
        w.write_record(row.record(&numeric))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub rows: usize,
    pub violations: usize,
    pub verdict: String,
    /// Aggregates of every numeric column with at least one finite entry.
    pub columns: BTreeMap<String, ColumnStats>,
}

pub fn summarize(command: &str, seed: u64, rows: &[Row]) -> Summary {
    let mut columns = BTreeMap::new();
    for col in numeric_columns() {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.values.get(&col)).copied().filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            continue;
        }
        let round = |v: f64| format_number(v).parse::<f64>().unwrap_or(v);
        columns.insert(
            col,
            ColumnStats {
                count: vals.len(),
                min: round(vals.iter().copied().fold(f64::INFINITY, f64::min)),
                max: round(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                mean: round(vals.iter().sum::<f64>() / vals.len() as f64),
            },
        );
    }
    let violations = rows.iter().map(|r| r.violations).sum();
    Summary {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        seed,
        rows: rows.len(),
        violations,
        verdict: if violations == 0 { "pass" } else { "fail" }.into(),
        columns,
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn push_matrix(buf: &mut Vec<u8>, m: &CMat) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for z in m.iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub fn hash_matrices(tag: &str, ms: &[&CMat]) -> String {
    let mut buf = tag.as_bytes().to_vec();
    for m in ms {
        push_matrix(&mut buf, m);
    }
    hash_bytes(&buf)
}

/// Hash of states, dynamics and charges.
pub fn instance_hash(inst: &Instance) -> String {
    let psi = CMat::from_column_slice(inst.psi.len(), 1, inst.psi.as_slice());
    let phi = CMat::from_column_slice(inst.phi.len(), 1, inst.phi.as_slice());
    let mut ms = vec![&psi, &phi, &inst.u];
    for ch in &inst.charges {
        ms.extend([&ch.x_a, &ch.x_b, &ch.x_a_out, &ch.x_b_out]);
    }
    let d = &inst.dims;
    hash_matrices(&format!("instance:{}:{}:{}:{}:{}:{}", d.a, d.ra, d.b, d.rb, d.a_out, d.b_out), &ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_at_most_twelve_significant_digits() {
        assert_eq!(format_number(1.0 / 3.0f64.sqrt()), "0.57735026919");
        assert_eq!(format_number(1.0 / 13.0), "0.0769230769231");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(2.5e-17), "2.5e-17");
        assert_eq!(format_number(1.0e-5 / 3.0), "3.33333333333e-6");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn header_is_stable() {
        let h = header();
        assert_eq!(h[0], "schema_version");
        assert_eq!(h.last().unwrap(), "verdict");
        assert!(h.contains(&"bound_siq1".to_string()));
        assert!(h.contains(&"bound_ek17half".to_string()));
        let mut dedup = h.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), h.len());
    }

    #[test]
    fn checks_count_violations() {
        let mut r = Row::new("t", 0, "x".into(), "c");
        r.check_at_most(1.0, 2.0);
        assert_eq!(r.verdict(), "pass");
        r.check_at_most(f64::NAN, 2.0);
        assert_eq!(r.verdict(), "fail");
    }
}

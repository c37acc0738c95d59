//! Canonical JSON, CSV tables, and report assembly.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Rebuilds `v` with every object's keys in sorted order.
pub fn canonical(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let mut out = Map::new();
            for k in keys {
                out.insert(k.clone(), canonical(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// Pretty-printed canonical form with a trailing newline.
pub fn canonical_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonical(v)).expect("Value serializes");
    s.push('\n');
    s
}

/// Compact canonical form; the input to [`sha256_hex`] for config hashes.
pub fn canonical_compact(v: &Value) -> String {
    serde_json::to_string(&canonical(v)).expect("Value serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Plot-ready rows. Non-finite numbers become empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::input("E_IO", format!("csv: {e}"));
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::input("E_IO", format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One acceptance predicate of a task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Result of one task: JSON payload, checks, optional plot table.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub kind: &'static str,
    pub result: Value,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

impl TaskOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_at_every_depth() {
        let v = json!({"b": {"z": 1, "a": [{"y": 0, "x": 1}]}, "a": null});
        assert_eq!(canonical_compact(&v), r#"{"a":null,"b":{"a":[{"x":1,"y":0}],"z":1}}"#);
        assert!(canonical_pretty(&v).ends_with("}\n"));
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_cells() {
        let mut t = Table::new(&["n", "label", "value"]);
        t.push(vec![json!(1), json!("a,b"), json!(f64::NAN)]);
        t.push(vec![json!(2), json!("c"), json!(0.5)]);
        assert_eq!(t.to_csv().unwrap(), "n,label,value\n1,\"a,b\",\n2,c,0.5\n");
    }
}

//! Output records and their JSON, CSV and table renderings.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::OutputFormat;
use crate::error::CliError;

/// The resolved configuration of a run, echoed in every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<String>,
    pub header: Option<bool>,
    pub level: f64,
    pub seed: u64,
    pub threads: usize,
    pub output: OutputFormat,
    pub method: Option<String>,
    pub reps: Option<usize>,
    pub samc: Option<SamcSettings>,
    pub simulate: Option<SimulateSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamcSettings {
    pub varpi: f64,
    pub m: usize,
    pub t0: f64,
    #[serde(rename = "T")]
    pub iterations: u64,
    pub chains: usize,
    pub incremental: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub case: u8,
    pub psi: f64,
    pub p: Option<usize>,
    pub q: Option<f64>,
    pub n: usize,
    pub dist: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    /// `null` when the sample correlation matrix is singular.
    pub z: Option<f64>,
    pub p_value: f64,
    pub method: String,
    pub replications: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain: u64,
    pub p_value: f64,
    pub acceptance_rate: f64,
    pub empty_regions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamcDetail {
    pub z1_abs: f64,
    pub median_p_value: f64,
    pub chains: Vec<ChainRecord>,
}

/// Output of `estimate`, `ci`, `test` and `samc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: usize,
    pub p: usize,
    pub psi_hat: f64,
    pub psi_bc: f64,
    pub kappa_hat: f64,
    pub tau_hat: f64,
    pub eta_hat: f64,
    pub delta_hat: f64,
    pub sigma_hat: f64,
    pub ci: CiRecord,
    pub test: TestRecord,
    pub warnings: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samc: Option<SamcDetail>,
    pub config: RunConfig,
}

/// Output of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub case: u8,
    pub psi: f64,
    pub p: usize,
    pub n: usize,
    pub phi: f64,
    pub dist: String,
    pub reps: usize,
    pub level: f64,
    pub coverage_pct: f64,
    pub avg_length: f64,
    pub mc_stderr: f64,
    pub mean_psi_hat: f64,
    pub mean_psi_bc: f64,
    pub runtime_secs: f64,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
}

pub fn render<T: Serialize>(record: &T, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(record)? + "\n"),
        OutputFormat::Csv => {
            let fields = flatten(&serde_json::to_value(record)?);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(fields.iter().map(|(k, _)| k))?;
            w.write_record(fields.iter().map(|(_, v)| v))?;
            let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
        }
        OutputFormat::Table => {
            let fields = flatten(&serde_json::to_value(record)?);
            let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            Ok(fields.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect())
        }
    }
}

/// Dotted keys for nested objects; arrays of scalars joined with `;`.
fn flatten(value: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            Value::Array(items) if items.iter().all(|i| !i.is_object()) => {
                let joined: Vec<String> = items.iter().map(scalar).collect();
                out.push((prefix.to_owned(), joined.join(";")));
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), child, out);
                }
            }
            other => out.push((prefix.to_owned(), scalar(other))),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flatten_nested() {
        let v = json!({"a": 1, "b": {"c": null, "d": "x"}, "w": ["u", "v"], "k": [{"e": 2}]});
        let f = flatten(&v);
        assert_eq!(
            f,
            vec![
                ("a".into(), "1".into()),
                ("b.c".into(), "".into()),
                ("b.d".into(), "x".into()),
                ("w".into(), "u;v".into()),
                ("k.0.e".into(), "2".into()),
            ]
        );
    }
}

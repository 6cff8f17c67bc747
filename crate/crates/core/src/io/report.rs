//! Report outputs. CSVs start with a `# {json}` line holding the format
//! version, report kind and run configuration, then a header row; JSON
//! reports wrap the result together with the same metadata.

use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::formats::{write_text, FORMAT_VERSION};
use crate::error::{Error, Result};

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    kind: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a T>,
}

/// Optional numbers become empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn csv_report(kind: &str, config: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let meta = Envelope::<()> {
        format_version: FORMAT_VERSION,
        kind,
        config,
        result: None,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory writer");
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::ShapeMismatch(format!("row {i} has {} cells for {} columns", row.len(), header.len())));
        }
        w.write_record(row).expect("in-memory writer");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 cells");
    Ok(format!("# {}\n{body}", serde_json::to_string(&meta).expect("plain data")))
}

pub fn json_report<T: Serialize>(kind: &str, config: &RunConfig, result: &T) -> String {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        kind,
        config,
        result: Some(result),
    };
    serde_json::to_string_pretty(&env).expect("plain data") + "\n"
}

pub fn write_csv_report(path: &Path, kind: &str, config: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_report(kind, config, header, rows)?)
}

pub fn write_json_report<T: Serialize>(path: &Path, kind: &str, config: &RunConfig, result: &T) -> Result<()> {
    write_text(path, &json_report(kind, config, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_metadata_and_header() {
        let c = RunConfig::default();
        let text = csv_report("demo", &c, &["a", "b"], &[vec!["1".into(), cell(None)], vec![cell(Some(0.1)), "x".into()]]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# {\"format_version\":1,\"kind\":\"demo\",\"config\":{"));
        assert_eq!(&lines[1..], ["a,b", "1,", "0.1,x"]);
        assert!(csv_report("demo", &c, &["a"], &[vec![]]).is_err());
    }

    #[test]
    fn json_embeds_config() {
        let c = RunConfig { seed: 9, ..Default::default() };
        let v: serde_json::Value = serde_json::from_str(&json_report("demo", &c, &[1.5, 2.0])).unwrap();
        assert_eq!(v["config"]["seed"], 9);
        assert_eq!(v["result"][0], 1.5);
        assert_eq!(v["format_version"], 1);
    }
}

//! CSV and JSON emission of result rows.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::Format;

/// Writes `rows` as CSV under `header` or as a JSON array of objects.
///
/// The CSV header is given explicitly so column names can differ from the
/// JSON keys; rows must serialize to exactly `header.len()` fields.
pub fn render<T: Serialize>(rows: &[T], header: &[&str], format: Format) -> io::Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.into_inner().map_err(|e| e.into_error())
        }
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(rows)?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Opens the destination before any computation so that an unwritable path
/// fails early.
pub enum Sink {
    Stdout,
    File(File),
}

impl Sink {
    pub fn open(path: Option<&Path>) -> io::Result<Self> {
        match path {
            Some(p) => File::create(p).map(Sink::File),
            None => Ok(Sink::Stdout),
        }
    }

    pub fn write_all(self, bytes: &[u8]) -> io::Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()
            }
            Sink::File(mut f) => {
                f.write_all(bytes)?;
                f.sync_all()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        order: Option<f64>,
    }

    #[test]
    fn csv_quotes_and_leaves_missing_values_empty() {
        let rows = [Row { name: "a,b", order: None }, Row { name: "c", order: Some(2.5) }];
        let text = String::from_utf8(render(&rows, &["name", "order"], Format::Csv).unwrap()).unwrap();
        assert_eq!(text, "name,order\n\"a,b\",\nc,2.5\n");
    }

    #[test]
    fn json_uses_field_names() {
        let rows = [Row { name: "c", order: None }];
        let v: serde_json::Value = serde_json::from_slice(&render(&rows, &["x", "y"], Format::Json).unwrap()).unwrap();
        assert_eq!(v[0]["name"], "c");
        assert!(v[0]["order"].is_null());
    }
}

//! Artifact writing: metadata header, CSV tables and JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use kurzmani::config::RunConfig;

use crate::CliError;

/// Provenance attached to every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub command: &'static str,
    pub config_sha256: String,
    pub version: &'static str,
    pub tolerances: Value,
}

impl Metadata {
    pub fn new(command: &'static str, config_text: &str, cfg: &RunConfig) -> Self {
        let s = &cfg.solver;
        Self {
            command,
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            version: env!("CARGO_PKG_VERSION"),
            tolerances: json!({
                "tol": s.tol,
                "reference_tol": s.reference_tol,
                "mesh_step": s.mesh_step,
                "horizon": s.horizon,
                "max_iter": s.max_iter,
                "max_rounds": s.max_rounds,
            }),
        }
    }
}

/// A numeric table written as CSV.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, meta: &Metadata) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {}",
            serde_json::to_string(meta).expect("metadata serializes")
        );
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let fields: Vec<String> = r.iter().map(|f| quote(f)).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Sink {
    dir: PathBuf,
    prefix: String,
    pub meta: Metadata,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, prefix: String, meta: Metadata) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix,
            meta,
            written: Vec::new(),
        })
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.prefix))
    }

    pub fn csv(&mut self, table: &Table) -> Result<(), CliError> {
        let p = self.path("csv");
        self.write_csv(p, table)
    }

    /// Secondary table written to `{prefix}_{suffix}.csv`.
    pub fn csv_named(&mut self, suffix: &str, table: &Table) -> Result<(), CliError> {
        let p = self.dir.join(format!("{}_{suffix}.csv", self.prefix));
        self.write_csv(p, table)
    }

    fn write_csv(&mut self, p: PathBuf, table: &Table) -> Result<(), CliError> {
        fs::write(&p, table.render(&self.meta)).map_err(|e| CliError::io(&p, e))?;
        self.written.push(p);
        Ok(())
    }

    /// Writes `{metadata, report}` as JSON and returns the rendered text.
    pub fn json(&mut self, report: &impl Serialize) -> Result<String, CliError> {
        let doc = json!({ "metadata": self.meta, "report": report });
        let text = serde_json::to_string_pretty(&doc).expect("report serializes");
        let p = self.path("json");
        fs::write(&p, format!("{text}\n")).map_err(|e| CliError::io(&p, e))?;
        self.written.push(p);
        Ok(text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

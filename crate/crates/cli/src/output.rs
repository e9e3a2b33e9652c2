//! CSV tables with `#` header comments and a JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const OUTPUT_ENV: &str = "M1SIM_OUTPUT_DIR";

#[derive(Clone, Debug, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub columns: Vec<Column>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Columns given as `(name, unit)`.
    pub fn new(name: &str, title: &str, columns: &[(&str, &str)]) -> Self {
        Table {
            name: name.to_string(),
            title: title.to_string(),
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self, command: &str, precision: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# m1sim {command}: {}", self.title);
        let units: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.unit))
            .collect();
        let _ = writeln!(out, "# units: {}", units.join(", "));
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "{}", names.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_value(v, precision)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

pub fn format_value(v: f64, precision: usize) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{:.*e}", precision.saturating_sub(1), v)
    }
}

/// Tables plus run metadata.
#[derive(Debug, Default)]
pub struct ResultBundle {
    pub tables: Vec<Table>,
    pub diagnostics: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl ResultBundle {
    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn merge(&mut self, prefix: &str, other: ResultBundle) {
        for mut t in other.tables {
            t.name = format!("{prefix}_{}", t.name);
            self.tables.push(t);
        }
        for (k, v) in other.diagnostics {
            self.diagnostics.insert(format!("{prefix}.{k}"), v);
        }
        self.warnings
            .extend(other.warnings.into_iter().map(|w| format!("{prefix}: {w}")));
    }
}

/// Output directory: explicit value, then the environment override, then `m1sim-out`.
pub fn output_dir(explicit: Option<&str>) -> PathBuf {
    explicit
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("m1sim-out"))
}

/// Writes every table as `<dir>/<command>_<table>.csv`, the metadata as
/// `<dir>/<command>.json` and a replayable `<dir>/<command>.toml`.
pub fn write_bundle(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    bundle: &ResultBundle,
    precision: usize,
    wall_time: f64,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let stem = command.replace('-', "_");
    let mut written = Vec::new();
    let mut tables = Vec::new();
    for t in &bundle.tables {
        let path = dir.join(format!("{stem}_{}.csv", t.name));
        std::fs::write(&path, t.to_csv(command, precision))?;
        tables.push(serde_json::json!({
            "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "title": t.title,
            "columns": t.columns,
            "rows": t.rows.len(),
        }));
        written.push(path);
    }
    let meta = serde_json::json!({
        "command": command,
        "config": config.values(),
        "version": env!("CARGO_PKG_VERSION"),
        "precision": precision,
        "wall_time_s": wall_time,
        "tables": tables,
        "diagnostics": bundle.diagnostics,
        "warnings": bundle.warnings,
    });
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    written.push(path);
    let path = dir.join(format!("{stem}.toml"));
    std::fs::write(&path, config.to_toml())?;
    written.push(path);
    Ok(written)
}

//! File emission: CSV with fixed 17-significant-digit floats and JSON with a standard envelope.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SAMBE_OUTPUT_DIR";

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Precedence: explicit flag, then the environment variable, then the config file, then `sambe-output`.
pub fn resolve_output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    configured.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("sambe-output"))
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// One CSV cell.
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_csv(&self, name: &str, header: &[String], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut writer = csv::Writer::from_path(&path).map_err(io)?;
        writer.write_record(header).map_err(io)?;
        for row in rows {
            writer.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        writer.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Writes `result`'s fields next to `config_echo`, `code_version` and `wall_time` (seconds).
    pub fn write_json<C: Serialize, R: Serialize>(
        &self,
        name: &str,
        config_echo: &C,
        result: &R,
        wall_time: Duration,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let document = envelope(config_echo, result, wall_time)?;
        let text = serde_json::to_string_pretty(&document).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn envelope<C: Serialize, R: Serialize>(config_echo: &C, result: &R, wall_time: Duration) -> Result<Value, CliError> {
    let to_value = |v: serde_json::Result<Value>| v.map_err(|e| CliError::Io(format!("serialization failed: {e}")));
    let mut map = match to_value(serde_json::to_value(result))? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    map.insert("config_echo".into(), to_value(serde_json::to_value(config_echo))?);
    map.insert("code_version".into(), Value::String(CODE_VERSION.into()));
    map.insert("wall_time".into(), Value::from(wall_time.as_secs_f64()));
    Ok(Value::Object(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_the_csv_format() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0] {
            let text = format_float(x);
            assert_eq!(text.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn envelope_keeps_result_fields_at_top_level() {
        #[derive(Serialize)]
        struct R {
            w_diff: f64,
        }
        let v = envelope(&serde_json::json!({"n": 1}), &R { w_diff: -3.0 }, Duration::from_millis(1500)).unwrap();
        assert_eq!(v["w_diff"], -3.0);
        assert_eq!(v["config_echo"]["n"], 1);
        assert_eq!(v["wall_time"], 1.5);
        assert_eq!(v["code_version"], CODE_VERSION);
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use calibkit::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Full-precision scientific notation; 17 significant digits.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    tool: &'static str,
    version: &'static str,
    manifest_sha256: &'a str,
}

/// Output directory whose files each get a `.meta.json` sidecar.
pub struct OutputDir {
    dir: PathBuf,
    manifest_sha256: String,
}

impl OutputDir {
    pub fn create(dir: &Path, manifest_bytes: &[u8]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), manifest_sha256: sha256_hex(manifest_bytes) })
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        let meta = Sidecar {
            file: name,
            tool: "calibkit",
            version: env!("CARGO_PKG_VERSION"),
            manifest_sha256: &self.manifest_sha256,
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        fs::write(self.dir.join(format!("{name}.meta.json")), text)?;
        Ok(())
    }

    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn text(&self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

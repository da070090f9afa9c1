//! Report output: provenance-stamped JSON and aligned TSV files, written
//! atomically so a failed run never leaves partial output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Significance stars from a p-value, matching the table legend convention:
/// `*` p<0.05, `**` p<0.01, `***` p<0.001, `****` p<0.0001.
pub fn significance_stars(p_value: Option<f64>) -> &'static str {
    match p_value {
        Some(p) if p < 0.0001 => "****",
        Some(p) if p < 0.001 => "***",
        Some(p) if p < 0.01 => "**",
        Some(p) if p < 0.05 => "*",
        _ => "",
    }
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

/// Hashes of all input files, keyed by the file name.
pub fn input_hashes(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        map.insert(name, file_sha256(path)?);
    }
    Ok(map)
}

/// Envelope written around every JSON report: the full run configuration and
/// input content hashes ride along for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct Output<C: Serialize, T: Serialize> {
    pub config: C,
    pub input_sha256: BTreeMap<String, String>,
    pub report: T,
}

/// Writes bytes atomically: a temp file in the same directory, then a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Buffered report set: everything is rendered first, then written file by
/// file, each atomically.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> OutputSet {
        OutputSet::default()
    }

    pub fn add_json<C: Serialize, T: Serialize>(
        &mut self,
        dir: &Path,
        name: &str,
        config: &C,
        input_sha256: &BTreeMap<String, String>,
        report: &T,
    ) -> Result<()> {
        let envelope = Output {
            config,
            input_sha256: input_sha256.clone(),
            report,
        };
        let mut bytes = serde_json::to_vec_pretty(&envelope)
            .map_err(|e| Error::Numerical(format!("serialize {name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((dir.join(format!("{name}.json")), bytes));
        Ok(())
    }

    pub fn add_tsv<C: Serialize>(
        &mut self,
        dir: &Path,
        name: &str,
        config: &C,
        input_sha256: &BTreeMap<String, String>,
        table: &Table,
    ) -> Result<()> {
        let config_line = serde_json::to_string(config)
            .map_err(|e| Error::Numerical(format!("serialize {name}: {e}")))?;
        let mut text = String::new();
        text.push_str(&format!("# config\t{config_line}\n"));
        for (file, hash) in input_sha256 {
            text.push_str(&format!("# input_sha256\t{file}\t{hash}\n"));
        }
        text.push_str(&table.render());
        self.files.push((dir.join(format!("{name}.tsv")), text.into_bytes()));
        Ok(())
    }

    /// Flushes every buffered file.
    pub fn write_all(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            atomic_write(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Minimal aligned-column table for the human-readable TSV outputs.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
        self
    }

    fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Fixed-precision float cell ("0.8333"-style); distinguishes undefined.
pub fn cell_f64(v: f64) -> String {
    format!("{v:.4}")
}

pub fn cell_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => cell_f64(v),
        None => "undefined".to_string(),
    }
}

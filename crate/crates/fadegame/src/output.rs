//! CSV files with a commented provenance header.
//!
//! Every file starts with `#` lines holding the command, the SNR-to-budget
//! mapping and the full effective config, followed by an ordinary CSV
//! header row. Read them with `#` as the comment character.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const BUDGET_MAPPING: &str = "budget = 10^(snr_db/10) for every user, unit noise power";

#[derive(Debug, Clone)]
pub struct Provenance {
    lines: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let mut lines = vec![
            format!("fadegame {command} {}", env!("CARGO_PKG_VERSION")),
            format!("model: {}", cfg.model.label()),
            format!(
                "variants: {}",
                cfg.variants()
                    .iter()
                    .map(|v| v.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("seed: {}", cfg.seed),
            format!("log base: {}", fadegame_core::LogBase::from(cfg.log_base)),
            BUDGET_MAPPING.to_string(),
            "config:".to_string(),
        ];
        lines.extend(cfg.to_toml()?.lines().map(|l| format!("  {l}")));
        Ok(Provenance { lines })
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

/// Writes `rows` to `dir/name` after the provenance header.
pub fn write_csv<S: Serialize>(
    dir: &Path,
    name: &str,
    prov: &Provenance,
    rows: &[S],
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    for l in prov.lines() {
        writeln!(w, "# {l}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(path)
}

/// Reads the data rows of a file written by [`write_csv`].
pub fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

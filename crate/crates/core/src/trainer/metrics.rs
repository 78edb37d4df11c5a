use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::OutcomeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub phase: Phase,
    pub episode: u64,
    /// Environment step of the run when the record was produced (the
    /// evaluation point for eval records).
    pub step: u64,
    pub difficulty: f64,
    pub steps: u64,
    pub outcome: OutcomeKind,
    pub goal_difference: i32,
    pub shaped_return: f64,
    pub sparse_return: f64,
    pub mean_game_epv: f64,
}

pub fn write_record<W: Write>(w: &mut W, record: &EpisodeRecord) -> std::io::Result<()> {
    let line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    writeln!(w, "{line}")
}

/// Reads a JSON-lines metrics log.
pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::metrics::{EpisodeRecord, Phase};
use crate::error::{Error, Result};

/// Spread of per-seed mean evaluation goal difference at one evaluation step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Percentile of sorted data by linear interpolation between closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles across seeds of the mean evaluation goal difference,
/// per evaluation step. `difficulty` selects which evaluations to use; by
/// default the one evaluated at the earliest step (the training difficulty).
pub fn learning_curve(records: &[EpisodeRecord], difficulty: Option<f64>) -> Result<Vec<CurvePoint>> {
    let evals: Vec<&EpisodeRecord> = records.iter().filter(|r| r.phase == Phase::Eval).collect();
    let difficulty = match difficulty {
        Some(d) => d,
        None => evals
            .iter()
            .min_by_key(|r| r.step)
            .map(|r| r.difficulty)
            .ok_or(Error::EmptyLog)?,
    };
    // step -> seed -> (sum, count)
    let mut per_step: BTreeMap<u64, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in evals.iter().filter(|r| r.difficulty == difficulty) {
        let e = per_step.entry(r.step).or_default().entry(r.seed).or_insert((0.0, 0));
        e.0 += r.goal_difference as f64;
        e.1 += 1;
    }
    if per_step.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(per_step
        .into_iter()
        .map(|(step, seeds)| {
            let mut means: Vec<f64> = seeds.values().map(|(s, c)| s / *c as f64).collect();
            means.sort_by(f64::total_cmp);
            CurvePoint {
                step,
                median: percentile(&means, 0.5),
                q25: percentile(&means, 0.25),
                q75: percentile(&means, 0.75),
            }
        })
        .collect())
}

/// Writes `step,median,q25,q75` CSV.
pub fn write_curve_csv(points: &[CurvePoint], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "step,median,q25,q75").map_err(|e| Error::io(path, e))?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.step, p.median, p.q25, p.q75).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

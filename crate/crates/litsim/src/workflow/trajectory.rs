//! Trajectory persistence: line-delimited JSON, one iteration record per
//! line, preceded by a header carrying the qid, the config (and its digest),
//! and the final outcome. Writing the same trajectory twice produces
//! byte-identical files.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::PaperId;
use crate::{Error, Result};

use super::{IterationRecord, TerminatedReason, Trajectory};

pub const TRAJECTORY_FORMAT_VERSION: u32 = 1;

/// First line of a trajectory file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format_version: u32,
    pub qid: String,
    pub config_digest: String,
    pub baseline: bool,
    pub terminated_reason: TerminatedReason,
    pub final_selected: BTreeSet<PaperId>,
    pub config: RunConfig,
}

/// Writes the header line followed by one iteration record per line.
pub fn write_trajectory<W: Write>(trajectory: &Trajectory, mut w: W) -> Result<()> {
    let header = TrajectoryHeader {
        format_version: TRAJECTORY_FORMAT_VERSION,
        qid: trajectory.qid.clone(),
        config_digest: trajectory.config_digest.clone(),
        baseline: trajectory.baseline,
        terminated_reason: trajectory.terminated_reason,
        final_selected: trajectory.final_selected.clone(),
        config: trajectory.config.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for record in &trajectory.iterations {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`], re-deriving and
/// verifying `final_selected` against the per-iteration unions.
pub fn read_trajectory<R: BufRead>(reader: R) -> Result<Trajectory> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Trajectory("empty trajectory file".into()))??;
    let header: TrajectoryHeader = serde_json::from_str(&header_line)?;
    if header.format_version != TRAJECTORY_FORMAT_VERSION {
        return Err(Error::Trajectory(format!(
            "unsupported trajectory format version {}",
            header.format_version
        )));
    }
    let mut iterations: Vec<IterationRecord> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        iterations.push(serde_json::from_str(&line)?);
    }
    let derived: BTreeSet<PaperId> = iterations
        .iter()
        .flat_map(|r| r.selected_new.iter().cloned())
        .collect();
    if derived != header.final_selected {
        return Err(Error::Trajectory(format!(
            "{}: final_selected does not equal the union of per-iteration selections",
            header.qid
        )));
    }
    Ok(Trajectory {
        qid: header.qid,
        config_digest: header.config_digest,
        config: header.config,
        baseline: header.baseline,
        iterations,
        final_selected: header.final_selected,
        terminated_reason: header.terminated_reason,
    })
}

/// Reads only the header line (cheap resume checks).
pub fn read_trajectory_header<R: BufRead>(mut reader: R) -> Result<TrajectoryHeader> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    Ok(serde_json::from_str(line.trim_end())?)
}

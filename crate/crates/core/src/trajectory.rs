//! Newline-delimited JSON trajectory logs.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::entities::DocId;
use crate::env::StepOutcome;

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub schema_version: u32,
    pub episode: u64,
    pub step: usize,
    /// Document recommended to each user, by user id.
    pub actions: Vec<Option<DocId>>,
    pub outcome: StepOutcome,
}

impl TrajectoryRecord {
    pub fn new(episode: u64, actions: Vec<Option<DocId>>, outcome: StepOutcome) -> Self {
        TrajectoryRecord {
            schema_version: TRAJECTORY_SCHEMA_VERSION,
            episode,
            step: outcome.step,
            actions,
            outcome,
        }
    }
}

/// Appends one record as a single JSON line.
pub fn write_record<W: Write>(out: &mut W, record: &TrajectoryRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

pub fn read_records<R: BufRead>(input: R) -> io::Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = serde_json::from_str(&line).map_err(io::Error::other)?;
        if rec.schema_version != TRAJECTORY_SCHEMA_VERSION {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported schema_version {}", rec.schema_version),
            ));
        }
        records.push(rec);
    }
    Ok(records)
}

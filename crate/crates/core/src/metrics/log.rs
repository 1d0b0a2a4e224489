//! Session trial logs: a JSON-lines file of trial records framed by a
//! versioned header and an end marker, plus one columnar trajectory file per
//! trial.
//!
//! ```text
//! <session_id>.jsonl
//!   {"kind":"header","schema_version":1,...}
//!   {"kind":"trial",...}            one per trial
//!   {"kind":"end","records":45}
//! <session_id>.trial-007.traj
//!   t x y vx vy fhx fhy frx fry
//!   ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::summary::TrialRecord;
use crate::geometry::Vec2;
use crate::task::{CompletedTrial, PathSample, SessionConfig, SessionMode, TrialOutcome};

pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_HEADER: &str = "t x y vx vy fhx fhy frx fry";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("{path}: {kind:?}: {message}")]
    Io {
        path: String,
        kind: io::ErrorKind,
        message: String,
    },
    #[error("{path}: schema version {found:?} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { path: String, found: Option<u64> },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

impl LogError {
    fn io(path: &Path, e: io::Error) -> Self {
        LogError::Io {
            path: path.display().to_string(),
            kind: e.kind(),
            message: e.to_string(),
        }
    }

    fn truncated(path: &Path, what: &str) -> Self {
        LogError::Io {
            path: path.display().to_string(),
            kind: io::ErrorKind::UnexpectedEof,
            message: format!("truncated: {what}"),
        }
    }

    fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Self {
        LogError::Malformed {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub session_id: String,
    pub mode: SessionMode,
    pub config: SessionConfig,
}

impl LogHeader {
    pub fn new(config: &SessionConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            session_id: config.session_id(),
            mode: config.mode,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(LogHeader),
    Trial(TrialRecord),
    End { records: usize },
}

/// A session's records with their trajectories, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: LogHeader,
    pub records: Vec<TrialRecord>,
    pub trajectories: Vec<Vec<PathSample>>,
}

impl TrialLog {
    pub fn from_completed(config: &SessionConfig, trials: &[CompletedTrial]) -> Self {
        let header = LogHeader::new(config);
        let records = trials
            .iter()
            .map(|t| {
                let path_ref = trajectory_file_name(&header.session_id, t.spec.trial_id);
                TrialRecord::from_completed(&header.session_id, header.mode, t, path_ref)
            })
            .collect();
        let trajectories = trials.iter().map(|t| t.outcome.path.clone()).collect();
        Self {
            header,
            records,
            trajectories,
        }
    }

    /// Rebuilds the completed trials, e.g. for fitting.
    pub fn completed_trials(&self) -> Vec<CompletedTrial> {
        self.records
            .iter()
            .zip(&self.trajectories)
            .map(|(r, path)| CompletedTrial {
                spec: r.spec.clone(),
                outcome: TrialOutcome {
                    success: r.success,
                    collided: r.collided,
                    movement_time: r.movement_time,
                    path: path.clone(),
                },
                onset_time: r.onset_time,
                movement_start: r.movement_start,
                target_entry: r.target_entry,
                end_time: r.end_time,
            })
            .collect()
    }

    /// Human forces of every recorded tick in session order, for replay.
    /// Each trajectory opens with a sample that is not a tick of its own
    /// (the initial state, or the previous trial's last tick).
    pub fn human_forces(&self) -> Vec<Vec2> {
        self.trajectories
            .iter()
            .flat_map(|path| path.iter().skip(1).map(|s| s.human_force))
            .collect()
    }
}

pub fn log_file_name(session_id: &str) -> String {
    format!("{session_id}.jsonl")
}

pub fn trajectory_file_name(session_id: &str, trial_id: u32) -> String {
    format!("{session_id}.trial-{trial_id:03}.traj")
}

fn write_trajectory(path: &Path, samples: &[PathSample]) -> Result<(), LogError> {
    let mut text = String::with_capacity(samples.len() * 220 + 40);
    text.push_str(TRAJECTORY_HEADER);
    text.push('\n');
    for s in samples {
        let cols = [
            s.t,
            s.position.x,
            s.position.y,
            s.velocity.x,
            s.velocity.y,
            s.human_force.x,
            s.human_force.y,
            s.robot_force.x,
            s.robot_force.y,
        ];
        for (i, v) in cols.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            write!(text, "{v:.16e}").expect("write to string");
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| LogError::io(path, e))
}

fn read_trajectory(path: &Path, expected: usize) -> Result<Vec<PathSample>, LogError> {
    let text = fs::read_to_string(path).map_err(|e| LogError::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.split_whitespace().eq(TRAJECTORY_HEADER.split_whitespace()) => {}
        Some(_) => return Err(LogError::malformed(path, 1, "unexpected column header")),
        None => return Err(LogError::truncated(path, "empty trajectory file")),
    }
    let mut samples = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        let mut cols = [0.0; 9];
        let mut n = 0;
        for tok in line.split_whitespace() {
            if n == 9 {
                return Err(LogError::malformed(path, i + 2, "more than 9 columns"));
            }
            cols[n] = tok
                .parse()
                .map_err(|_| LogError::malformed(path, i + 2, format!("bad number '{tok}'")))?;
            n += 1;
        }
        if n != 9 {
            return Err(LogError::truncated(path, &format!("line {} has {n} columns", i + 2)));
        }
        samples.push(PathSample {
            t: cols[0],
            position: Vec2::new(cols[1], cols[2]),
            velocity: Vec2::new(cols[3], cols[4]),
            human_force: Vec2::new(cols[5], cols[6]),
            robot_force: Vec2::new(cols[7], cols[8]),
        });
    }
    if !text.ends_with('\n') || samples.len() != expected {
        return Err(LogError::truncated(
            path,
            &format!("{} samples, record says {expected}", samples.len()),
        ));
    }
    Ok(samples)
}

/// Writes `<dir>/<session_id>.jsonl` and one trajectory file per record.
/// Returns the path of the record file.
pub fn write_trial_log(dir: &Path, log: &TrialLog) -> Result<PathBuf, LogError> {
    fs::create_dir_all(dir).map_err(|e| LogError::io(dir, e))?;
    if log.records.len() != log.trajectories.len() {
        return Err(LogError::malformed(dir, 0, "records and trajectories differ in count"));
    }
    for (r, path) in log.records.iter().zip(&log.trajectories) {
        if r.path_ref.contains(['/', '\\']) || r.samples != path.len() {
            return Err(LogError::malformed(dir, 0, format!("bad record for trial {}", r.spec.trial_id)));
        }
        write_trajectory(&dir.join(&r.path_ref), path)?;
    }
    let file = dir.join(log_file_name(&log.header.session_id));
    let f = fs::File::create(&file).map_err(|e| LogError::io(&file, e))?;
    let mut w = BufWriter::new(f);
    let mut put = |line: &Line| -> Result<(), LogError> {
        let text = serde_json::to_string(line).map_err(|e| LogError::malformed(&file, 0, e.to_string()))?;
        writeln!(w, "{text}").map_err(|e| LogError::io(&file, e))
    };
    put(&Line::Header(log.header.clone()))?;
    for r in &log.records {
        put(&Line::Trial(r.clone()))?;
    }
    put(&Line::End {
        records: log.records.len(),
    })?;
    w.flush().map_err(|e| LogError::io(&file, e))?;
    Ok(file)
}

/// Reads a record file and its trajectory files. Rejects unknown schema
/// versions, and treats a missing end marker or short trajectory file as
/// truncation.
pub fn read_trial_log(path: &Path) -> Result<TrialLog, LogError> {
    let f = fs::File::open(path).map_err(|e| LogError::io(path, e))?;
    let mut lines = BufReader::new(f).lines();

    let first = match lines.next() {
        Some(l) => l.map_err(|e| LogError::io(path, e))?,
        None => return Err(LogError::truncated(path, "empty log")),
    };
    let value: serde_json::Value =
        serde_json::from_str(&first).map_err(|e| LogError::malformed(path, 1, e.to_string()))?;
    let version = value.get("schema_version").and_then(serde_json::Value::as_u64);
    if version != Some(u64::from(SCHEMA_VERSION)) {
        return Err(LogError::SchemaVersionMismatch {
            path: path.display().to_string(),
            found: version,
        });
    }
    let header = match serde_json::from_value(value) {
        Ok(Line::Header(h)) => h,
        Ok(_) => return Err(LogError::malformed(path, 1, "first line is not a header")),
        Err(e) => return Err(LogError::malformed(path, 1, e.to_string())),
    };

    let mut records = Vec::new();
    let mut ended = false;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| LogError::io(path, e))?;
        let n = i + 2;
        if ended {
            return Err(LogError::malformed(path, n, "content after end marker"));
        }
        match serde_json::from_str(&line) {
            Ok(Line::Trial(r)) => {
                r.validate().map_err(|e| LogError::malformed(path, n, e.to_string()))?;
                if r.session_id != header.session_id {
                    return Err(LogError::malformed(path, n, "record from another session"));
                }
                records.push(r);
            }
            Ok(Line::End { records: count }) => {
                if count != records.len() {
                    return Err(LogError::truncated(path, &format!("{} records, end marker says {count}", records.len())));
                }
                ended = true;
            }
            Ok(Line::Header(_)) => return Err(LogError::malformed(path, n, "second header")),
            Err(e) if e.is_eof() => return Err(LogError::truncated(path, &format!("line {n} is incomplete"))),
            Err(e) => return Err(LogError::malformed(path, n, e.to_string())),
        }
    }
    if !ended {
        return Err(LogError::truncated(path, "no end marker"));
    }

    let dir = path.parent().unwrap_or(Path::new("."));
    let trajectories = records
        .iter()
        .map(|r| read_trajectory(&dir.join(&r.path_ref), r.samples))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialLog {
        header,
        records,
        trajectories,
    })
}

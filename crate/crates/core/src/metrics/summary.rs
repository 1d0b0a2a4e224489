//! Per-trial log rows and the per-session summary built from them.

use serde::{Deserialize, Serialize};

use super::fitts::{index_of_difficulty, index_of_performance};
use super::tlx::{tlx_total, TlxResponse};
use super::MetricsError;
use crate::task::{CompletedTrial, SessionMode, SizeClass, TrialSpec};

/// One persisted trial. The trajectory lives in a sidecar file named by
/// `path_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub session_id: String,
    pub mode: SessionMode,
    #[serde(flatten)]
    pub spec: TrialSpec,
    pub success: bool,
    pub collided: bool,
    pub movement_time: Option<f64>,
    pub onset_time: f64,
    pub movement_start: Option<f64>,
    pub target_entry: Option<f64>,
    pub end_time: f64,
    pub path_ref: String,
    /// Rows in the sidecar file.
    pub samples: usize,
}

impl TrialRecord {
    pub fn from_completed(session_id: &str, mode: SessionMode, done: &CompletedTrial, path_ref: String) -> Self {
        Self {
            session_id: session_id.to_string(),
            mode,
            spec: done.spec.clone(),
            success: done.outcome.success,
            collided: done.outcome.collided,
            movement_time: done.outcome.movement_time,
            onset_time: done.onset_time,
            movement_start: done.movement_start,
            target_entry: done.target_entry,
            end_time: done.end_time,
            path_ref,
            samples: done.outcome.path.len(),
        }
    }

    /// Checks that `id_bits` matches the trial geometry.
    pub fn validate(&self) -> Result<(), MetricsError> {
        let id = index_of_difficulty(self.spec.target_distance, self.spec.target_width)?;
        if (id - self.spec.id_bits).abs() > 1e-12 {
            return Err(MetricsError::InconsistentId {
                stored: self.spec.id_bits,
                computed: id,
            });
        }
        Ok(())
    }

    /// Index of performance of a successful trial.
    pub fn ip(&self) -> Option<f64> {
        match (self.success, self.movement_time) {
            (true, Some(mt)) => index_of_performance(self.spec.id_bits, mt).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub target_distance: f64,
    pub size: SizeClass,
    pub target_width: f64,
    pub id_bits: f64,
    pub trials: usize,
    pub successes: usize,
    /// Mean movement time of the successful trials, s.
    pub mean_mt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub mode: SessionMode,
    pub trials: usize,
    pub successes: usize,
    pub collision_count: usize,
    /// `"n/total"`.
    pub collisions: String,
    /// Bits per second over successful trials; absent when none succeeded.
    pub mean_ip: Option<f64>,
    pub per_condition: Vec<ConditionSummary>,
    pub tlx_total: Option<f64>,
    /// The submitted form, echoed back.
    pub tlx: Option<TlxResponse>,
}

impl SessionSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Success-only mean IP, `"n/total"` collisions and per-condition mean MT.
/// A session without successes still summarises, with `mean_ip` absent.
pub fn summarize_session(records: &[TrialRecord], tlx: Option<&TlxResponse>) -> Result<SessionSummary, MetricsError> {
    let first = records.first().ok_or(MetricsError::EmptySession)?;
    if records.iter().any(|r| r.session_id != first.session_id) {
        return Err(MetricsError::MixedSessions);
    }
    let ips: Vec<f64> = records.iter().filter_map(TrialRecord::ip).collect();
    let collision_count = records.iter().filter(|r| r.collided).count();

    let mut per_condition: Vec<ConditionSummary> = Vec::new();
    let mut mts: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let idx = match per_condition.iter().position(|c| {
            c.size == r.spec.size
                && c.target_distance == r.spec.target_distance
                && c.target_width == r.spec.target_width
        }) {
            Some(i) => i,
            None => {
                per_condition.push(ConditionSummary {
                    target_distance: r.spec.target_distance,
                    size: r.spec.size,
                    target_width: r.spec.target_width,
                    id_bits: r.spec.id_bits,
                    trials: 0,
                    successes: 0,
                    mean_mt: None,
                });
                mts.push(Vec::new());
                per_condition.len() - 1
            }
        };
        per_condition[idx].trials += 1;
        if r.success {
            per_condition[idx].successes += 1;
            if let Some(mt) = r.movement_time {
                mts[idx].push(mt);
            }
        }
    }
    for (c, m) in per_condition.iter_mut().zip(&mts) {
        c.mean_mt = mean(m);
    }
    let mut order: Vec<usize> = (0..per_condition.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&per_condition[a], &per_condition[b]);
        x.target_distance.total_cmp(&y.target_distance).then(x.size.cmp(&y.size))
    });
    let per_condition = order.into_iter().map(|i| per_condition[i].clone()).collect();

    Ok(SessionSummary {
        session_id: first.session_id.clone(),
        mode: first.mode,
        trials: records.len(),
        successes: records.iter().filter(|r| r.success).count(),
        collision_count,
        collisions: format!("{}/{}", collision_count, records.len()),
        mean_ip: mean(&ips),
        per_condition,
        tlx_total: tlx.map(tlx_total).transpose()?,
        tlx: tlx.copied(),
    })
}

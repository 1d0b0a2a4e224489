//! Fitts' law analytics, NASA-TLX scoring, session summaries and the
//! persistent trial log.

pub mod fitts;
pub mod log;
pub mod summary;
pub mod tlx;

pub use fitts::{index_of_difficulty, index_of_performance};
pub use log::{read_trial_log, write_trial_log, LogError, LogHeader, TrialLog, SCHEMA_VERSION};
pub use summary::{summarize_session, ConditionSummary, SessionSummary, TrialRecord};
pub use tlx::{tlx_pairs, tlx_total, weights_from_choices, Factor, TlxResponse};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("target width {0} must be positive")]
    NonPositiveWidth(f64),
    #[error("distance {0} must be non-negative")]
    NegativeDistance(f64),
    #[error("movement time {0} must be positive")]
    NonPositiveMt(f64),
    #[error("TLX weights sum to {0}, not 15")]
    BadWeights(u32),
    #[error("TLX rating {0} is not a multiple of 5 in [0, 100]")]
    BadRating(f64),
    #[error("a pairwise choice names a factor outside its pair")]
    ChoiceOutsidePair,
    #[error("no trials to summarise")]
    EmptySession,
    #[error("records come from more than one session")]
    MixedSessions,
    #[error("stored id_bits {stored} disagrees with geometry ({computed})")]
    InconsistentId { stored: f64, computed: f64 },
}

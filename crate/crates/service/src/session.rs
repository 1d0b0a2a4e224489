//! The tick owner: steps the session at the plant rate, publishes state
//! and events to the hub, and persists the finished session.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use coreach::metrics::{summarize_session, write_trial_log, LogError, MetricsError, SessionSummary, TrialLog};
use coreach::runner::{mode_role, PartnerSetup, RunError, SessionRunner, TICKS_PER_TRIAL};
use coreach::task::{HumanAgent, SessionConfig, SessionEvent, TrialPhase};

use crate::config::{ConfigError, ServiceConfig};
use crate::hub::Hub;
use crate::wire::{Body, Hello, SessionStart, TickState, TrialEvent, TrialOutcomeView};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("session cancelled after {completed} trials")]
    Cancelled { completed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// As fast as the CPU allows.
    FreeRunning,
    /// One tick per plant step of wall time, on a monotonic clock.
    Realtime,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub pacing: Pacing,
    /// Hold at the next trial boundary while no client is connected.
    pub pause_without_client: bool,
}

impl RunOptions {
    pub const HEADLESS: RunOptions = RunOptions {
        pacing: Pacing::FreeRunning,
        pause_without_client: false,
    };
    pub const LIVE: RunOptions = RunOptions {
        pacing: Pacing::Realtime,
        pause_without_client: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub log: TrialLog,
    pub summary: SessionSummary,
}

/// Partner setup for the configured mode; none for modes without a robot.
pub fn partner_setup(cfg: &ServiceConfig) -> Result<Option<PartnerSetup>, ServiceError> {
    match mode_role(cfg.session.mode) {
        Some(_) => Ok(Some(PartnerSetup {
            config: cfg.partner,
            model: cfg.person_model()?,
        })),
        None => Ok(None),
    }
}

/// Greeting for a client joining now.
pub fn hello(cfg: &SessionConfig, runner: &SessionRunner) -> Hello {
    let snap = runner.session().snapshot();
    Hello {
        session_id: cfg.session_id(),
        mode: cfg.mode,
        epoch: 0,
        trials_total: runner.session().trials().len(),
        complete: snap.complete,
        state: TickState::from(&snap),
    }
}

/// Greeting before the session has started.
pub fn initial_hello(cfg: &ServiceConfig) -> Result<Hello, ServiceError> {
    let runner = SessionRunner::new(cfg.session.clone(), cfg.plant, partner_setup(cfg)?)?;
    Ok(hello(&cfg.session, &runner))
}

fn publish_events(hub: &Hub, events: &[SessionEvent]) {
    for e in events {
        let SessionEvent::Phase { trial_id, from, to, t } = e else {
            continue;
        };
        let outcome = events.iter().find_map(|e| match e {
            SessionEvent::TrialCompleted(done) if *to == TrialPhase::AtStart && done.spec.trial_id == *trial_id => {
                Some(TrialOutcomeView::of(done))
            }
            _ => None,
        });
        hub.publish(
            *t,
            Body::TrialEvent(TrialEvent {
                trial_id: *trial_id,
                from: *from,
                to: *to,
                outcome,
            }),
        );
    }
}

/// Runs one session to completion. The hub, when present, only receives:
/// nothing it holds feeds back into the simulation except the cursor
/// mailbox a live human reads, so the trial log is the same with or
/// without clients.
pub fn run_session(
    cfg: &ServiceConfig,
    human: &mut dyn HumanAgent,
    hub: Option<&Hub>,
    opts: RunOptions,
) -> Result<SessionOutput, ServiceError> {
    cfg.validate()?;
    let session_cfg = cfg.session.clone();
    let mut runner = SessionRunner::new(session_cfg.clone(), cfg.plant, partner_setup(cfg)?)?;
    let dt = cfg.plant.dt;
    let period = 1.0 / cfg.broadcast_hz;
    let limit = TICKS_PER_TRIAL * session_cfg.trials_per_session as u64;

    if let Some(hub) = hub {
        hub.set_latest(0.0, hello(&session_cfg, &runner));
        hub.publish(
            0.0,
            Body::SessionStart(SessionStart {
                session_id: session_cfg.session_id(),
                mode: session_cfg.mode,
                config: session_cfg.clone(),
            }),
        );
    }

    let mut ticks = 0u64;
    let mut next_broadcast = 0.0;
    let mut clock = Instant::now();
    let mut paced = 0u64;
    while !runner.is_complete() {
        if ticks >= limit {
            return Err(RunError::TickLimit(limit).into());
        }
        if let Some(hub) = hub {
            if hub.is_closed() {
                return Err(ServiceError::Cancelled {
                    completed: runner.completed().len(),
                });
            }
            let idle = opts.pause_without_client && hub.client_count() == 0;
            if idle && runner.session().phase() == TrialPhase::AtStart {
                std::thread::sleep(Duration::from_millis(5));
                clock = Instant::now();
                paced = 0;
                continue;
            }
        }
        if opts.pacing == Pacing::Realtime {
            let due = clock + Duration::from_secs_f64(paced as f64 * dt);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
            paced += 1;
        }
        let force = human.force(&runner.observation());
        let events = runner.step(force)?;
        ticks += 1;

        if let Some(hub) = hub {
            publish_events(hub, &events);
            let t = runner.session().state().time;
            if t + 1e-9 >= next_broadcast {
                let h = hello(&session_cfg, &runner);
                hub.publish(t, Body::TickState(h.state.clone()));
                hub.set_latest(t, h);
                next_broadcast = t + period;
            }
        }
    }

    let log = TrialLog::from_completed(&session_cfg, runner.completed());
    let tlx = hub.and_then(Hub::tlx);
    let summary = summarize_session(&log.records, tlx.as_ref())?;
    if let Some(hub) = hub {
        let t = runner.session().state().time;
        hub.set_latest(t, hello(&session_cfg, &runner));
        hub.publish(t, Body::SessionSummary(summary.clone()));
    }
    Ok(SessionOutput { log, summary })
}

pub fn summary_file_name(session_id: &str) -> String {
    format!("{session_id}.summary.json")
}

/// Writes the trial log, its trajectories and the summary into `dir`.
/// Returns the log and summary paths.
pub fn persist(dir: &Path, out: &SessionOutput) -> Result<(PathBuf, PathBuf), ServiceError> {
    let log_path = write_trial_log(dir, &out.log)?;
    let summary_path = dir.join(summary_file_name(&out.summary.session_id));
    std::fs::write(&summary_path, out.summary.to_json() + "\n").map_err(|source| ServiceError::Write {
        path: summary_path.clone(),
        source,
    })?;
    Ok((log_path, summary_path))
}

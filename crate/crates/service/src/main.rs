use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use coreach::metrics::{read_trial_log, summarize_session};
use coreach::model::RolloutSettings;
use coreach::task::{HumanAgent, ReplayHuman, SessionMode, SimHuman};
use coreach_service::session::{initial_hello, persist, summary_file_name};
use coreach_service::{run_session, Body, Hub, LiveHuman, RunOptions, ServiceConfig, ServiceError};

/// Runs one reaching session: live over a websocket, or headless with a
/// simulated person or a replayed log.
#[derive(Debug, Parser)]
#[command(name = "coreach", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulated person, free-running clock. No socket unless --port is given.
    #[arg(long)]
    headless: bool,
    /// individual, robot_follower, robot_equal, robot_leader or human_pair_replay.
    #[arg(long)]
    mode: Option<SessionMode>,
    /// Seeds the trial order and the simulated person.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Plays back the human forces of a trial log, tick for tick.
    #[arg(long, value_name = "LOGFILE")]
    replay: Option<PathBuf>,
    #[arg(long)]
    port: Option<u16>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<(), ServiceError> {
    let mut cfg = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::default(),
    };
    let replay = match &cli.replay {
        Some(path) => Some(read_trial_log(path)?),
        None => None,
    };
    if let Some(log) = &replay {
        cfg.session = log.header.config.clone();
    }
    if let Some(mode) = cli.mode {
        cfg.session.mode = mode;
    }
    if let Some(seed) = cli.seed {
        cfg.session.seed = seed;
        cfg.human.seed = seed;
    }
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(port) = cli.port {
        cfg.port = port;
    }
    cfg.validate()?;
    let live = !cli.headless && replay.is_none();

    let hub = if !cli.headless || cli.port.is_some() {
        let hub = Hub::new(0.0, initial_hello(&cfg)?);
        let (listener, addr) = Hub::bind(&cfg.host, cfg.port)
            .await
            .map_err(|source| ServiceError::BindFailure {
                addr: format!("{}:{}", cfg.host, cfg.port),
                source,
            })?;
        tracing::info!("listening on ws://{addr}");
        tokio::spawn(Arc::clone(&hub).serve(listener));
        Some(hub)
    } else {
        None
    };

    let mut human: Box<dyn HumanAgent + Send> = match (replay, &hub) {
        (Some(log), _) => Box::new(ReplayHuman::new(log.human_forces())),
        (None, Some(hub)) if live => Box::new(LiveHuman::new(cfg.mapping, cfg.stale_guard, hub.cursor_mailbox())),
        _ => {
            let settings = RolloutSettings {
                dt: cfg.plant.dt,
                ..RolloutSettings::default()
            };
            Box::new(SimHuman::new(cfg.human, settings))
        }
    };
    let opts = match (cli.headless, live) {
        (true, _) => RunOptions::HEADLESS,
        (false, true) => RunOptions::LIVE,
        (false, false) => RunOptions {
            pause_without_client: false,
            ..RunOptions::LIVE
        },
    };

    tracing::info!(session = %cfg.session.session_id(), "session started");
    let run_cfg = cfg.clone();
    let run_hub = hub.clone();
    let session = tokio::task::spawn_blocking(move || run_session(&run_cfg, human.as_mut(), run_hub.as_deref(), opts));
    if let Some(hub) = &hub {
        let hub = Arc::clone(hub);
        tokio::spawn(async move {
            if tokio::signal::ctrl_c().await.is_ok() {
                hub.close();
            }
        });
    }
    let mut out = session.await.expect("session thread")?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| ServiceError::Write {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let (log_path, summary_path) = persist(&cfg.out_dir, &out)?;
    tracing::info!(log = %log_path.display(), summary = %summary_path.display(), "session written");

    if let (Some(hub), true) = (&hub, live) {
        if out.summary.tlx.is_none() && cfg.tlx_wait > 0.0 {
            tracing::info!("waiting up to {} s for the TLX form", cfg.tlx_wait);
            let mut updates = hub.tlx_updates();
            let wait = updates.wait_for(|t| t.is_some());
            let got = tokio::select! {
                r = tokio::time::timeout(Duration::from_secs_f64(cfg.tlx_wait), wait) => {
                    r.ok().and_then(|r| r.ok().map(|t| *t))
                }
                _ = tokio::signal::ctrl_c() => None,
            }
            .flatten();
            if let Some(tlx) = got {
                out.summary = summarize_session(&out.log.records, Some(&tlx))?;
                let path = cfg.out_dir.join(summary_file_name(&out.summary.session_id));
                std::fs::write(&path, out.summary.to_json() + "\n")
                    .map_err(|source| ServiceError::Write { path, source })?;
                let (t, _) = hub.latest();
                hub.publish(t, Body::SessionSummary(out.summary.clone()));
            }
        }
    }
    if let Some(hub) = &hub {
        hub.close();
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    println!("{}", out.summary.to_json());
    Ok(())
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p coreach-service --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coreach::fitting::{fit_session, synthetic_recordings, FitReport};
use coreach::geometry::{segment_distance, swept_collision, Obstacle, Vec2};
use coreach::metrics::{index_of_difficulty, index_of_performance, summarize_session, TrialLog};
use coreach::model::{
    beta_from_obstacle, damping_from_id, field_accel, lambda_from_obstacle, plan_trajectory, stiffness_from_id,
    FieldLimits, FieldParams, PersonModel, RolloutSettings,
};
use coreach::partner::{robot_force, PartnerState, RobotPartnerConfig, Role};
use coreach::plant::BodyState;
use coreach::runner::{run_headless, PartnerSetup};
use coreach::task::{
    default_field_laws, default_gain_laws, generate_session, Condition, SessionConfig, SessionMode, SimHuman,
    SimHumanParams, SizeClass, TrialSpec,
};
use coreach::PlantParams;
use coreach_service::session::initial_hello;
use coreach_service::{persist, run_session, Hub, RunOptions, ServiceConfig};

type Outcome = (bool, String);

fn person() -> PersonModel {
    PersonModel {
        gain_laws: default_gain_laws(),
        field_laws: Some(default_field_laws()),
        tau: 1.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Independent potential: `lambda (-cos theta)^beta |v| / |x - c|` with the
/// closest point `c` held fixed.
fn potential(x: Vec2, v: Vec2, c: Vec2, f: &FieldParams) -> f64 {
    let r = x - c;
    let p = r.norm();
    let cos = v.dot(r) / (v.norm() * p);
    f.lambda * (-cos).powf(f.beta) * v.norm() / p
}

fn field_gradient_oracle() -> Outcome {
    let t0 = Instant::now();
    let obstacle = Obstacle::new(Vec2::new(0.1, -0.02), Vec2::new(0.1, 0.02)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut states, mut worst) = (0, 0.0f64);
    while states < 1000 {
        let x = Vec2::new(rng.random_range(0.0..0.2), rng.random_range(-0.08..0.08));
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let sd = segment_distance(x, &obstacle);
        let (p, c) = (sd.distance, sd.closest);
        if !(0.002..0.1).contains(&p) || v.norm() < 1e-3 {
            continue;
        }
        // Stay clear of the activation boundary, where U is not smooth.
        if v.dot(x - c) / (v.norm() * p) > -0.05 {
            continue;
        }
        let f = FieldParams::new(rng.random_range(1e-3..0.05), rng.random_range(1.5..6.0)).unwrap();
        let state = BodyState {
            position: x,
            velocity: v,
            time: 0.0,
        };
        let phi = field_accel(&state, &obstacle, &f, &FieldLimits::UNBOUNDED).unwrap();
        let h = 1e-6 * p;
        let dx = Vec2::new(h, 0.0);
        let dy = Vec2::new(0.0, h);
        let grad = Vec2::new(
            (potential(x + dx, v, c, &f) - potential(x - dx, v, c, &f)) / (2.0 * h),
            (potential(x + dy, v, c, &f) - potential(x - dy, v, c, &f)) / (2.0 * h),
        );
        let err = (phi + grad).norm() / grad.norm();
        worst = worst.max(err);
        states += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst < 1e-4 && secs < 5.0,
        format!("{states} active states, worst relative error {worst:.2e} (< 1e-4), {secs:.3} s (< 5 s)"),
    )
}

fn dmp_convergence() -> Outcome {
    let t0 = Instant::now();
    let cfg = SessionConfig {
        obstacle_enabled: false,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for c in Condition::all() {
        let trial = cfg.trial_for(0, c).unwrap();
        let plan = plan_trajectory(&trial, &default_gain_laws(), None, 1.0, 4.0).unwrap();
        worst = worst.max(plan.final_sample().position.distance(trial.goal()));
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst < 1e-4 && secs < 1.0,
        format!("9 conditions, worst end error {worst:.2e} m (< 1e-4), {secs:.3} s (< 1 s)"),
    )
}

struct Fitted {
    report: FitReport,
    secs: f64,
}

/// A 90-trial synthetic session: one obstacle-free and one obstacle set of
/// 45, generated from the default person's laws, then identified.
fn identify() -> Fitted {
    let t0 = Instant::now();
    let mut trials = generate_session(&SessionConfig {
        obstacle_enabled: false,
        ..Default::default()
    })
    .unwrap();
    trials.extend(
        generate_session(&SessionConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap(),
    );
    let recs = synthetic_recordings(&trials, &person(), 1.5, &RolloutSettings::default()).unwrap();
    let report = fit_session(&recs, 1.0).unwrap();
    Fitted {
        report,
        secs: t0.elapsed().as_secs_f64(),
    }
}

fn avoidance(fit: &Fitted) -> Outcome {
    let model = fit.report.person_model();
    let cfg = SessionConfig::default();
    let mut collisions = 0;
    let mut min_clearance = f64::INFINITY;
    for c in Condition::all() {
        let trial = cfg.trial_for(0, c).unwrap();
        let obstacle = trial.obstacle.unwrap();
        match model.plan(&trial, 4.0, &RolloutSettings::default()) {
            Ok(plan) => {
                let pts: Vec<Vec2> = plan.positions().collect();
                if pts.windows(2).any(|w| swept_collision(w[0], w[1], &obstacle)) {
                    collisions += 1;
                }
                for p in &pts {
                    min_clearance = min_clearance.min(segment_distance(*p, &obstacle).distance);
                }
            }
            Err(_) => collisions += 1,
        }
    }
    (
        collisions == 0,
        format!("fitted laws, 9 obstacle conditions, {collisions} swept collisions, min clearance {min_clearance:.4} m"),
    )
}

fn fit_recovery(fit: &Fitted) -> Outcome {
    let truth_g = default_gain_laws();
    let truth_f = default_field_laws();
    let g = fit.report.gain_laws;
    let Some(f) = fit.report.field_laws else {
        return (false, "no field laws identified".into());
    };
    let coeffs = [
        ("k1", g.k1, truth_g.k1),
        ("k2", g.k2, truth_g.k2),
        ("k3", g.k3, truth_g.k3),
        ("l1", f.l1, truth_f.l1),
        ("l2", f.l2, truth_f.l2),
        ("b3", f.b3, truth_f.b3),
        ("b4", f.b4, truth_f.b4),
        ("b5", f.b5, truth_f.b5),
    ];
    let law_err = coeffs.iter().map(|(_, a, b)| rel(*a, *b)).fold(0.0, f64::max);
    let (mut kd_err, mut lb_err) = (0.0f64, 0.0f64);
    let (mut free, mut obstructed) = (0, 0);
    for t in &fit.report.per_trial {
        match (t.obstacle_distance, t.lambda, t.beta) {
            (Some(o), Some(l), Some(b)) => {
                obstructed += 1;
                lb_err = lb_err.max(rel(l, lambda_from_obstacle(o, &truth_f).unwrap()));
                lb_err = lb_err.max(rel(b, beta_from_obstacle(o, &truth_f).unwrap()));
            }
            _ => {
                free += 1;
                kd_err = kd_err.max(rel(t.spring_k, stiffness_from_id(t.id_bits, &truth_g).unwrap()));
                kd_err = kd_err.max(rel(t.damping_d, damping_from_id(t.id_bits, &truth_g).unwrap()));
            }
        }
    }
    let complete = free == 45 && obstructed == 45;
    let pass = complete && law_err < 0.10 && lb_err < 0.10 && kd_err < 0.05 && fit.secs < 60.0;
    (
        pass,
        format!(
            "{free}+{obstructed} trials fitted; laws worst {:.2}% (< 10%), per-trial lambda/beta {:.2}% (< 10%), K/D {:.2}% (< 5%), {:.1} s (< 60 s)",
            law_err * 100.0,
            lb_err * 100.0,
            kd_err * 100.0,
            fit.secs
        ),
    )
}

fn fitts_analytics() -> Outcome {
    let id = index_of_difficulty(0.15, 0.05).unwrap();
    let exact = id == 2.0;

    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let monotone = runner
        .run(
            &(1e-3..1.0f64, 1e-3..0.1f64, 0.05..5.0f64, 1.0..2.0f64),
            |(d, w, mt, k)| {
                let id = index_of_difficulty(d, w).unwrap();
                let ip = index_of_performance(id, mt).unwrap();
                // Slower is worse; farther or narrower is harder and so
                // worth more at the same time.
                prop_assert!(index_of_performance(id, mt * k).unwrap() <= ip);
                prop_assert!(index_of_performance(index_of_difficulty(d * k, w).unwrap(), mt).unwrap() >= ip);
                prop_assert!(index_of_performance(index_of_difficulty(d, w / k).unwrap(), mt).unwrap() >= ip);
                Ok(())
            },
        )
        .is_ok();

    let cfg = SessionConfig::default();
    let mut h = SimHuman::new(SimHumanParams::default(), RolloutSettings::default());
    let done = run_headless(cfg.clone(), PlantParams::default(), None, &mut h).unwrap();
    let log = TrialLog::from_completed(&cfg, &done);
    let s = summarize_session(&log.records, None).unwrap();
    let collided = done.iter().filter(|t| t.outcome.collided).count();
    let format_ok = s.collisions == format!("{collided}/45");
    (
        exact && monotone && format_ok,
        format!(
            "ID(0.15, 0.05) = {id} bits; IP monotonicity over 2000 cases: {}; collisions \"{}\"",
            if monotone { "holds" } else { "violated" },
            s.collisions
        ),
    )
}

fn leader_follower_linearity() -> Outcome {
    let trial = TrialSpec::along_axis(0, Vec2::ZERO, Vec2::new(1.0, 0.0), 0.15, SizeClass::Medium, 0.02, Some(0.04))
        .unwrap();
    let follower = RobotPartnerConfig::with_role(Role::Follower);
    let leader = RobotPartnerConfig::with_role(Role::Leader);
    let base = PartnerState::default().retarget(&trial, &person(), 0.0, &follower);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut worst_ulps) = (0, 0.0f64);
    let mut exact = true;
    while checked < 1000 {
        let mut s = base.clone();
        s.plan_clock = rng.random_range(0.0..2.0);
        let point = BodyState {
            position: Vec2::new(rng.random_range(-0.02..0.2), rng.random_range(-0.05..0.05)),
            velocity: Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
            time: 0.0,
        };
        let fl = robot_force(&s, &point, &leader);
        if fl.norm() >= leader.force_cap {
            continue;
        }
        let ff = robot_force(&s, &point, &follower);
        for (a, b) in [(fl.x, ff.x), (fl.y, ff.y)] {
            let expect = b * (5.0 / 3.0);
            let ulps = (a - expect).abs() / (f64::EPSILON * a.abs().max(f64::MIN_POSITIVE));
            worst_ulps = worst_ulps.max(ulps);
            exact &= ulps <= 4.0;
        }
        checked += 1;
    }
    (
        exact,
        format!("{checked} states below the cap, F(1.25) vs (5/3) F(0.75): worst {worst_ulps:.1} ulp (<= 4)"),
    )
}

/// The person of the collaboration check: same laws, but slower to react,
/// slower to move and noisier.
fn slowed_human(seed: u64) -> SimHumanParams {
    SimHumanParams {
        tau: 1.5,
        reaction_delay: 0.3,
        force_gain: 150.0,
        noise_sigma: 2.0,
        seed,
        ..SimHumanParams::default()
    }
}

fn collaboration_improves_ip() -> Outcome {
    let modes = [
        SessionMode::Individual,
        SessionMode::RobotFollower,
        SessionMode::RobotEqual,
        SessionMode::RobotLeader,
    ];
    let setup = PartnerSetup {
        config: RobotPartnerConfig::default(),
        model: person(),
    };
    let mut held = 0;
    let mut means = [0.0; 4];
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let mut ip = [0.0; 4];
        for (i, mode) in modes.iter().enumerate() {
            let cfg = SessionConfig {
                mode: *mode,
                seed,
                ..Default::default()
            };
            let mut h = SimHuman::new(slowed_human(1000 + seed), RolloutSettings::default());
            let done = run_headless(cfg.clone(), PlantParams::default(), Some(setup), &mut h).unwrap();
            let log = TrialLog::from_completed(&cfg, &done);
            ip[i] = summarize_session(&log.records, None).unwrap().mean_ip.unwrap_or(0.0);
            means[i] += ip[i] / 10.0;
        }
        if ip[1..].iter().all(|r| *r > ip[0]) {
            held += 1;
        } else {
            lines.push(format!("seed {seed}: {ip:?}"));
        }
    }
    (
        held == 10,
        format!(
            "{held}/10 seeds; mean IP individual {:.3}, follower {:.3}, equal {:.3}, leader {:.3} bits/s{}",
            means[0],
            means[1],
            means[2],
            means[3],
            if lines.is_empty() { String::new() } else { format!("; violations: {}", lines.join(", ")) }
        ),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let mut verdicts = Vec::new();
    for mode in [SessionMode::Individual, SessionMode::RobotLeader] {
        let mut cfg = ServiceConfig::default();
        cfg.session.mode = mode;
        cfg.session.seed = 11;
        cfg.human.seed = 12;
        let run = |hub: Option<&Hub>| {
            let mut human = SimHuman::new(cfg.human, RolloutSettings::default());
            let out = run_session(&cfg, &mut human, hub, RunOptions::HEADLESS).unwrap();
            let dir = tempfile::tempdir().unwrap();
            persist(dir.path(), &out).unwrap();
            dir_bytes(dir.path())
        };
        let a = run(None);
        let b = run(None);

        let hub = Hub::new(0.0, initial_hello(&cfg).unwrap());
        let (listener, addr) = rt.block_on(Hub::bind("127.0.0.1", 0)).unwrap();
        rt.spawn(Arc::clone(&hub).serve(listener));
        // Connected and silent: it never sends and never reads.
        let _client = rt
            .block_on(tokio_tungstenite::connect_async(format!("ws://{addr}")))
            .unwrap();
        let deadline = Instant::now() + Duration::from_secs(5);
        while hub.client_count() == 0 && Instant::now() < deadline {
            std::thread::sleep(Duration::from_millis(5));
        }
        let attached = hub.client_count() == 1;
        let c = run(Some(&hub));
        hub.close();
        verdicts.push((mode, attached, a == b, a == c, a.len()));
    }
    let pass = verdicts.iter().all(|(_, att, ab, ac, _)| *att && *ab && *ac);
    let detail = verdicts
        .iter()
        .map(|(m, att, ab, ac, n)| {
            format!(
                "{m}: {n} files, rerun {}, idle client{} {}",
                if *ab { "identical" } else { "DIFFERS" },
                if *att { "" } else { " (not attached)" },
                if *ac { "identical" } else { "DIFFERS" }
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn main() {
    let mut failed = 0;
    let mut total = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        total += 1;
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };

    report("field-gradient oracle", &mut field_gradient_oracle);
    report("dmp convergence", &mut dmp_convergence);
    let fitted = catch_unwind(identify).ok();
    report("avoidance competence", &mut || match &fitted {
        Some(f) => avoidance(f),
        None => (false, "identification failed".into()),
    });
    report("fit recovery", &mut || match &fitted {
        Some(f) => fit_recovery(f),
        None => (false, "identification failed".into()),
    });
    report("fitts analytics", &mut fitts_analytics);
    report("leader-follower linearity", &mut leader_follower_linearity);
    report("collaboration improves ip", &mut collaboration_improves_ip);
    report("determinism", &mut determinism);

    println!("{} of {total} criteria passed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

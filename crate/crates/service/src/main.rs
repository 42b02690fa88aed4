use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use clap::{Parser, Subcommand};
use deskbandit::evaluation::{ips_estimate, read_log, replay, snips_estimate, InteractionLog, ReplaySetup};
use deskbandit::policy::{Policy, PolicyConfig, PolicyName};
use deskbandit::simulator::{run_simulation, EnvConfig, SyntheticEnv};
use deskbandit_service::desk::SuggestRequest;
use deskbandit_service::{http, Desk, ServiceConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "deskbandit", version, about = "Contextual-bandit answer router for support desks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the REST service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a policy against the synthetic environment and write its curve.
    Simulate {
        /// TOML environment description; built-in defaults when omitted.
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, default_value = "linucb")]
        policy: PolicyName,
        /// TOML file with policy hyperparameters.
        #[arg(long)]
        policy_config: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV curve `round,reward,regret,arm`.
        #[arg(long)]
        out: PathBuf,
        /// Also write the JSONL interaction log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also write the final policy snapshot.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Re-run a policy over a logged interaction stream.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "linucb")]
        policy: PolicyName,
        #[arg(long)]
        policy_config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of arms; the largest logged arm id + 1 when omitted.
        #[arg(long)]
        arms: Option<usize>,
        /// CSV `round,reward,arm,matched`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// IPS and SNIPS estimates of a snapshot's greedy policy on a log.
    Eval {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// One suggestion from a local desk, printed as JSON.
    Ask {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        utterance: String,
        #[arg(long, default_value = "cli")]
        session_id: String,
    },
    /// Minimal remote arm answering every POST with a fixed text.
    StubArm {
        #[arg(long, default_value = "127.0.0.1:9001")]
        listen: String,
        #[arg(long)]
        answer: String,
        #[arg(long, default_value_t = 0.5)]
        score: f64,
    },
}

type CliResult = Result<(), String>;

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn policy_config(name: PolicyName, path: Option<&Path>) -> Result<PolicyConfig, String> {
    let mut cfg = match path {
        Some(p) => read_toml::<PolicyConfig>(p)?,
        None => PolicyConfig::default(),
    };
    cfg.name = name;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

async fn serve(config: &Path) -> CliResult {
    let cfg = ServiceConfig::load(config).map_err(|e| e.to_string())?;
    let addr = cfg.listen_addr().map_err(|e| e.to_string())?;
    let desk = Arc::new(Desk::open(cfg).map_err(|e| e.to_string())?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| e.to_string())?;
    tracing::info!(addr = %listener.local_addr().map_err(|e| e.to_string())?, "listening");
    http::serve(desk, listener, shutdown_signal()).await.map_err(|e| e.to_string())?;
    tracing::info!("snapshot written, bye");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    env: Option<&Path>,
    policy: PolicyName,
    policy_path: Option<&Path>,
    rounds: u64,
    seed: u64,
    out: &Path,
    log: Option<&Path>,
    snapshot: Option<&Path>,
) -> CliResult {
    let env_cfg = match env {
        Some(p) => read_toml::<EnvConfig>(p)?,
        None => EnvConfig::default(),
    };
    let env = SyntheticEnv::new(&env_cfg).map_err(|e| e.to_string())?;
    let cfg = policy_config(policy, policy_path)?;
    let mut sink = match log {
        Some(p) => {
            if p.exists() {
                return Err(format!("{}: refusing to append to an existing log", p.display()));
            }
            Some(InteractionLog::open(p).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let sink_ref = sink.as_mut().map(|s| s as &mut dyn deskbandit::evaluation::RecordSink);
    let (final_policy, metrics) = run_simulation(&env, cfg, rounds, seed, sink_ref).map_err(|e| e.to_string())?;
    write(out, metrics.to_csv().as_bytes())?;
    if let Some(p) = snapshot {
        write(p, &final_policy.snapshot())?;
    }
    println!(
        "{}",
        json!({
            "policy": final_policy.name().as_str(),
            "rounds": rounds,
            "cumulative_reward": metrics.cumulative_reward(),
            "cumulative_regret": metrics.cumulative_regret(),
            "pulls": metrics.pulls,
            "snapshot_digest": final_policy.snapshot_digest(),
        })
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn replay_cmd(
    log: &Path,
    policy: PolicyName,
    policy_path: Option<&Path>,
    seed: u64,
    arms: Option<usize>,
    out: Option<&Path>,
    snapshot: Option<&Path>,
) -> CliResult {
    let records = read_log(log).map_err(|e| format!("{}: {e}", log.display()))?;
    let cfg = policy_config(policy, policy_path)?;
    let setup = ReplaySetup::infer(&records, cfg, arms, seed).map_err(|e| e.to_string())?;
    let (final_policy, metrics) = replay(&records, &setup).map_err(|e| e.to_string())?;
    if let Some(p) = out {
        write(p, metrics.to_csv().as_bytes())?;
    }
    if let Some(p) = snapshot {
        write(p, &final_policy.snapshot())?;
    }
    println!(
        "{}",
        json!({
            "policy": final_policy.name().as_str(),
            "rounds": metrics.rounds(),
            "matched": metrics.matched(),
            "cumulative_reward": metrics.cumulative_reward(),
            "pulls": final_policy.pulls(),
            "snapshot_digest": final_policy.snapshot_digest(),
        })
    );
    Ok(())
}

fn eval(log: &Path, target: &Path) -> CliResult {
    let records = read_log(log).map_err(|e| format!("{}: {e}", log.display()))?;
    let bytes = std::fs::read(target).map_err(|e| format!("{}: {e}", target.display()))?;
    let policy = Policy::restore(&bytes).map_err(|e| e.to_string())?;
    let ips = ips_estimate(&records, &policy).map_err(|e| e.to_string())?;
    let snips = snips_estimate(&records, &policy).ok();
    println!(
        "{}",
        json!({
            "records": records.len(),
            "rated": records.iter().filter(|r| r.reward.is_some()).count(),
            "ips": ips,
            "snips": snips,
        })
    );
    Ok(())
}

fn ask(config: &Path, utterance: String, session_id: String) -> CliResult {
    let cfg = ServiceConfig::load(config).map_err(|e| e.to_string())?;
    let desk = Desk::open(cfg).map_err(|e| e.to_string())?;
    let resp = desk
        .suggest(&SuggestRequest { session_id, utterance })
        .map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&resp).map_err(|e| e.to_string())?);
    Ok(())
}

async fn stub_arm(listen: &str, answer: String, score: f64) -> CliResult {
    let body = Arc::new(json!({ "answer_text": answer, "score": score }));
    let app = Router::new().fallback(post(move || {
        let body = body.clone();
        async move { Json((*body).clone()) }
    }));
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(|e| e.to_string())?;
    tracing::info!(addr = listen, "stub arm listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(|e| e.to_string())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config } => serve(&config).await,
        Command::Simulate {
            env,
            policy,
            policy_config,
            rounds,
            seed,
            out,
            log,
            snapshot,
        } => simulate(
            env.as_deref(),
            policy,
            policy_config.as_deref(),
            rounds,
            seed,
            &out,
            log.as_deref(),
            snapshot.as_deref(),
        ),
        Command::Replay {
            log,
            policy,
            policy_config,
            seed,
            arms,
            out,
            snapshot,
        } => replay_cmd(
            &log,
            policy,
            policy_config.as_deref(),
            seed,
            arms,
            out.as_deref(),
            snapshot.as_deref(),
        ),
        Command::Eval { log, target } => eval(&log, &target),
        Command::Ask {
            config,
            utterance,
            session_id,
        } => tokio::task::spawn_blocking(move || ask(&config, utterance, session_id))
            .await
            .unwrap_or_else(|e| Err(e.to_string())),
        Command::StubArm { listen, answer, score } => stub_arm(&listen, answer, score).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

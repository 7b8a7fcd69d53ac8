//! Newline-delimited reward-scoring service.
//!
//! Each request line is a JSON object:
//!
//! ```json
//! {"id":"r1","ground_truth":{"objects":[...],"relations":[...]},"completion":"<answer>...</answer>"}
//! ```
//!
//! with `ground_truth_toon` (a string) accepted in place of `ground_truth`,
//! and optional `schema`, `weights` and `match` objects overriding the
//! service configuration for that request. Each response line carries
//! `version`, the echoed `id` and either the reward breakdown fields or an
//! `error` object with `code` and `message`. Responses may arrive out of
//! order; ids correlate them.

use std::io;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use sgkit_core::codec::{parse_json_value, parse_toon};
use sgkit_core::reward::score_completion;
use sgkit_core::{MatchConfig, RewardWeights, SceneGraph, Schema};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::sync::{mpsc, watch, Semaphore};
use tokio::task::JoinSet;

use crate::config::Config;

pub const PROTOCOL_VERSION: u32 = 1;

/// Defaults applied to every request.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceState {
    pub schema: Schema,
    pub weights: RewardWeights,
    pub matching: MatchConfig,
    pub max_line_bytes: usize,
}

impl ServiceState {
    pub fn from_config(c: &Config) -> Self {
        Self {
            schema: c.schema,
            weights: c.weights,
            matching: c.matching,
            max_line_bytes: c.service.max_line_bytes,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRequest {
    id: String,
    #[serde(default)]
    ground_truth: Option<Value>,
    #[serde(default)]
    ground_truth_toon: Option<String>,
    completion: String,
    #[serde(default)]
    schema: Option<Schema>,
    #[serde(default)]
    weights: Option<Map<String, Value>>,
    #[serde(default, rename = "match")]
    matching: Option<Map<String, Value>>,
}

fn error_response(id: Option<&str>, code: &str, message: impl Into<String>) -> String {
    json!({
        "version": PROTOCOL_VERSION,
        "id": id,
        "error": {"code": code, "message": message.into()},
    })
    .to_string()
}

fn overlay<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: &T,
    patch: &Map<String, Value>,
) -> Result<T, String> {
    let mut v = serde_json::to_value(base).map_err(|e| e.to_string())?;
    if let Value::Object(m) = &mut v {
        for (k, val) in patch {
            m.insert(k.clone(), val.clone());
        }
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

struct Failure(&'static str, String);

fn ground_truth(req: &ScoreRequest, schema: Schema) -> Result<SceneGraph, Failure> {
    let outcome = match (&req.ground_truth, &req.ground_truth_toon) {
        (Some(v), None) => parse_json_value(v, schema),
        (None, Some(t)) => parse_toon(t, schema),
        _ => {
            return Err(Failure(
                "invalid_request",
                "exactly one of ground_truth and ground_truth_toon is required".into(),
            ))
        }
    };
    if outcome.valid {
        Ok(outcome.graph.expect("valid outcome has a graph"))
    } else {
        let msg = outcome
            .diagnostics
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Failure("invalid_ground_truth", msg))
    }
}

fn score(req: &ScoreRequest, state: &ServiceState) -> Result<Value, Failure> {
    if req.id.is_empty() {
        return Err(Failure("invalid_request", "id must be non-empty".into()));
    }
    let weights = match &req.weights {
        Some(p) => overlay(&state.weights, p)
            .map_err(|e| Failure("invalid_config", format!("weights: {e}")))?,
        None => state.weights,
    };
    let matching = match &req.matching {
        Some(p) => overlay(&state.matching, p)
            .map_err(|e| Failure("invalid_config", format!("match: {e}")))?,
        None => state.matching,
    };
    weights
        .validate()
        .map_err(|e| Failure("invalid_config", e.to_string()))?;
    matching
        .validate()
        .map_err(|e| Failure("invalid_config", e.to_string()))?;
    let gt = ground_truth(req, req.schema.unwrap_or(state.schema))?;
    let breakdown = score_completion(&gt, &req.completion, &weights, &matching)
        .map_err(|e| Failure("invalid_ground_truth", e.to_string()))?;
    serde_json::to_value(breakdown).map_err(|e| Failure("internal", e.to_string()))
}

/// Answers one request line. Never panics on malformed input.
pub fn handle_line(line: &str, state: &ServiceState) -> String {
    if line.len() > state.max_line_bytes {
        return error_response(
            None,
            "line_too_long",
            format!("request exceeds {} bytes", state.max_line_bytes),
        );
    }
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error_response(None, "malformed_request", e.to_string()),
    };
    let id = value.get("id").and_then(Value::as_str).map(str::to_string);
    let req: ScoreRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return error_response(id.as_deref(), "malformed_request", e.to_string()),
    };
    match score(&req, state) {
        Ok(Value::Object(fields)) => {
            let mut out = Map::new();
            out.insert("version".into(), json!(PROTOCOL_VERSION));
            out.insert("id".into(), json!(req.id));
            out.extend(fields);
            Value::Object(out).to_string()
        }
        Ok(_) => error_response(Some(&req.id), "internal", "unexpected breakdown shape"),
        Err(Failure(code, msg)) => error_response(Some(&req.id), code, msg),
    }
}

/// Counters reported when a stream closes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub requests: usize,
}

/// Serves one request stream until EOF or shutdown, then drains in-flight
/// requests. At most `workers` permits' worth of requests are scored at once.
pub async fn serve_stream<R, W>(
    reader: R,
    mut writer: W,
    state: Arc<ServiceState>,
    workers: Arc<Semaphore>,
    mut shutdown: watch::Receiver<bool>,
) -> io::Result<StreamStats>
where
    R: AsyncRead + Unpin,
    W: AsyncWrite + Unpin + Send + 'static,
{
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let write_task = tokio::spawn(async move {
        while let Some(resp) = rx.recv().await {
            writer.write_all(resp.as_bytes()).await?;
            writer.write_all(b"\n").await?;
            writer.flush().await?;
        }
        writer.shutdown().await.or(Ok::<(), io::Error>(()))
    });

    let mut reader = BufReader::new(reader);
    let mut tasks = JoinSet::new();
    let mut stats = StreamStats::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let read = tokio::select! {
            r = reader.read_until(b'\n', &mut buf) => r?,
            _ = shutdown.changed() => break,
        };
        if read == 0 {
            break;
        }
        let text = String::from_utf8_lossy(&buf);
        let line = text.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        stats.requests += 1;
        let line = if std::str::from_utf8(&buf).is_ok() {
            line.to_string()
        } else {
            let _ = tx.send(error_response(
                None,
                "malformed_request",
                "request is not valid UTF-8",
            ));
            continue;
        };
        let permit = workers
            .clone()
            .acquire_owned()
            .await
            .map_err(io::Error::other)?;
        let (state, tx) = (state.clone(), tx.clone());
        tasks.spawn(async move {
            let resp = tokio::task::spawn_blocking(move || handle_line(&line, &state))
                .await
                .unwrap_or_else(|e| error_response(None, "internal", e.to_string()));
            drop(permit);
            let _ = tx.send(resp);
        });
        while tasks.try_join_next().is_some() {}
    }
    while tasks.join_next().await.is_some() {}
    drop(tx);
    write_task.await.map_err(io::Error::other)??;
    Ok(stats)
}

fn shutdown_on_ctrl_c() -> watch::Receiver<bool> {
    let (tx, rx) = watch::channel(false);
    tokio::spawn(async move {
        if tokio::signal::ctrl_c().await.is_ok() {
            log::info!("shutdown requested; draining in-flight requests");
            let _ = tx.send(true);
        }
    });
    rx
}

/// Serves standard input/output.
pub async fn run_stdio(config: &Config) -> io::Result<()> {
    let state = Arc::new(ServiceState::from_config(config));
    let workers = Arc::new(Semaphore::new(config.service.workers));
    let stats = serve_stream(
        tokio::io::stdin(),
        tokio::io::stdout(),
        state,
        workers,
        shutdown_on_ctrl_c(),
    )
    .await?;
    log::info!("served {} requests", stats.requests);
    Ok(())
}

/// Serves TCP connections on `addr`, one request stream per connection,
/// sharing one worker pool.
pub async fn run_tcp(addr: &str, config: &Config) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let state = Arc::new(ServiceState::from_config(config));
    let workers = Arc::new(Semaphore::new(config.service.workers));
    let mut shutdown = shutdown_on_ctrl_c();
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => {
                let (sock, peer) = accepted?;
                log::debug!("connection from {peer}");
                let (r, w) = sock.into_split();
                conns.spawn(serve_stream(r, w, state.clone(), workers.clone(), shutdown.clone()));
            }
            _ = shutdown.changed() => break,
        }
        while conns.try_join_next().is_some() {}
    }
    while conns.join_next().await.is_some() {}
    Ok(())
}

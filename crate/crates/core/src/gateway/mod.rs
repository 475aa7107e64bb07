//! Uniform client for vision-language model endpoints.
//!
//! Remote endpoints are reached through a [`Transport`] with per-endpoint
//! rate limiting and exponential backoff on transient failures. Endpoints
//! whose `base_url` is `mock:<kind>` are answered locally. Every attempt,
//! successful or not, is appended to the [`RunLog`].

mod adapter;
mod clock;
mod mock;
mod runlog;
mod transport;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use adapter::{
    build_request, encode_bytes, extract_text, load_image, media_type_for, Adapter, ImagePayload,
    PromptRole,
};
pub use clock::{Backoff, Clock, RateLimiter, SystemClock, VirtualClock};
pub use mock::{
    answer as mock_answer, mock_noisy, mock_oracle, noisy_guess, MockKind, REFUSAL_TEXT,
};
pub use runlog::{rfc3339, RunLog, RunLogRecord, SharedBuffer};
#[cfg(feature = "http")]
pub use transport::ReqwestTransport;
pub use transport::{
    HttpRequest, HttpResponse, OfflineTransport, ScriptedTransport, Transport, TransportError,
};

use crate::dataset::ImageRecord;
use crate::prompt::RenderedPrompt;
use crate::seed;

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    5
}
fn default_rpm() -> u32 {
    60
}
fn default_in_flight() -> usize {
    4
}

/// One model endpoint as declared in the endpoints file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub name: String,
    /// `http(s)://...` or `mock:oracle` / `mock:noisy` / `mock:refuse`.
    pub base_url: String,
    #[serde(default)]
    pub model: Option<String>,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub allow_nonzero_temperature: bool,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub adapter: Adapter,
    #[serde(default)]
    pub prompt_role: PromptRole,
    /// Displacement scale for `mock:noisy`.
    #[serde(default)]
    pub sigma_km: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl EndpointConfig {
    pub fn new(name: &str, base_url: &str) -> Self {
        EndpointConfig {
            name: name.to_string(),
            base_url: base_url.to_string(),
            model: None,
            auth_token_env: None,
            temperature: 0.0,
            allow_nonzero_temperature: false,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            requests_per_minute: default_rpm(),
            max_in_flight: default_in_flight(),
            adapter: Adapter::default(),
            prompt_role: PromptRole::default(),
            sigma_km: None,
            seed: None,
        }
    }

    pub fn mock_oracle(name: &str) -> Self {
        EndpointConfig::new(name, "mock:oracle")
    }

    pub fn mock_noisy(name: &str, sigma_km: f64, seed: u64) -> Self {
        EndpointConfig {
            sigma_km: Some(sigma_km),
            seed: Some(seed),
            ..EndpointConfig::new(name, "mock:noisy")
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn is_mock(&self) -> bool {
        self.base_url.starts_with("mock:")
    }

    /// Checks invariants and resolves the backend kind.
    pub fn validate(&self) -> Result<Option<MockKind>, GatewayError> {
        let bad = |msg: String| {
            Err(GatewayError::Config(format!(
                "endpoint {:?}: {msg}",
                self.name
            )))
        };
        if self.name.trim().is_empty() {
            return Err(GatewayError::Config(
                "endpoint name must not be empty".into(),
            ));
        }
        if self.temperature != 0.0 && !self.allow_nonzero_temperature {
            return bad(format!(
                "temperature {} requires allow_nonzero_temperature = true",
                self.temperature
            ));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            ));
        }
        if self.requests_per_minute == 0 {
            return bad("requests_per_minute must be positive".into());
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be positive".into());
        }
        match self.base_url.strip_prefix("mock:") {
            Some("oracle") => Ok(Some(MockKind::Oracle)),
            Some("refuse") => Ok(Some(MockKind::Refuse)),
            Some("noisy") => match self.sigma_km {
                Some(s) if s >= 0.0 && s.is_finite() => Ok(Some(MockKind::Noisy {
                    sigma_km: s,
                    seed: self.seed.unwrap_or(seed::DEFAULT_SEED),
                })),
                Some(s) => bad(format!("sigma_km must be non-negative, got {s}")),
                None => bad("mock:noisy needs sigma_km".into()),
            },
            Some(other) => bad(format!("unknown mock kind {other:?}")),
            None if self.base_url.starts_with("http://")
                || self.base_url.starts_with("https://") =>
            {
                Ok(None)
            }
            None => bad(format!(
                "base_url must be http(s):// or mock:<kind>, got {:?}",
                self.base_url
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EndpointsFile {
    endpoint: Vec<EndpointConfig>,
}

/// Reads endpoint declarations from TOML (`[[endpoint]]` tables) or JSON
/// (`{"endpoint": [...]}` or a bare array), chosen by file extension.
pub fn load_endpoints(path: &Path) -> Result<Vec<EndpointConfig>, GatewayError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let endpoints = if is_json {
        serde_json::from_str::<EndpointsFile>(&text)
            .map(|f| f.endpoint)
            .or_else(|_| serde_json::from_str::<Vec<EndpointConfig>>(&text))
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str::<EndpointsFile>(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?
            .endpoint
    };
    if endpoints.is_empty() {
        return Err(GatewayError::Config(format!(
            "{}: no endpoints declared",
            path.display()
        )));
    }
    Ok(endpoints)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error("gave up after {attempts} attempts: {last_error}")]
    ExhaustedRetries { attempts: u32, last_error: String },
    #[error("authentication rejected (HTTP {status})")]
    AuthFailure { status: u16 },
    #[error("endpoint rejected request (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed endpoint response: {body}")]
    MalformedEndpointResponse { body: String },
    #[error("cannot load image {uri}: {message}")]
    Image { uri: String, message: String },
}

impl GatewayError {
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::Config(_) => "config",
            GatewayError::UnknownEndpoint(_) => "unknown_endpoint",
            GatewayError::ExhaustedRetries { .. } => "exhausted_retries",
            GatewayError::AuthFailure { .. } => "auth_failure",
            GatewayError::Rejected { .. } => "rejected",
            GatewayError::MalformedEndpointResponse { .. } => "malformed_response",
            GatewayError::Image { .. } => "image_error",
        }
    }
}

/// Text returned by an endpoint plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReply {
    pub raw_text: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub endpoint: String,
    pub fingerprint: String,
}

/// SHA-256 over the prompt text and image reference.
pub fn fingerprint(prompt: &RenderedPrompt) -> String {
    fingerprint_parts(&prompt.text, &prompt.image_uri)
}

fn fingerprint_parts(text: &str, image_uri: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update([0u8]);
    hasher.update(image_uri.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct EndpointState {
    config: EndpointConfig,
    mock: Option<MockKind>,
    token: Option<String>,
    limiter: RateLimiter,
    calls: AtomicUsize,
    jitter: Mutex<ChaCha8Rng>,
}

/// Identifies one logged request attempt.
struct Attempt<'a> {
    fingerprint: &'a str,
    started: u64,
    number: u32,
}

pub struct Gateway {
    endpoints: Vec<EndpointState>,
    clock: Arc<dyn Clock>,
    transport: Arc<dyn Transport>,
    backoff: Backoff,
    log: RunLog,
}

fn default_transport() -> Arc<dyn Transport> {
    #[cfg(feature = "http")]
    if let Ok(t) = ReqwestTransport::new() {
        return Arc::new(t);
    }
    Arc::new(OfflineTransport)
}

impl Gateway {
    /// Validates every endpoint and resolves auth tokens from the
    /// environment.
    pub fn new(configs: Vec<EndpointConfig>, log: RunLog) -> Result<Self, GatewayError> {
        let mut names = BTreeSet::new();
        let mut endpoints = Vec::with_capacity(configs.len());
        for config in configs {
            let mock = config.validate()?;
            if !names.insert(config.name.clone()) {
                return Err(GatewayError::Config(format!(
                    "duplicate endpoint name {:?}",
                    config.name
                )));
            }
            let token = match (&config.auth_token_env, mock) {
                (Some(var), None) => Some(std::env::var(var).map_err(|_| {
                    GatewayError::Config(format!(
                        "endpoint {:?}: environment variable {var} is not set",
                        config.name
                    ))
                })?),
                _ => None,
            };
            endpoints.push(EndpointState {
                limiter: RateLimiter::per_minute(config.requests_per_minute),
                jitter: Mutex::new(seed::rng(seed::DEFAULT_SEED, &config.name)),
                calls: AtomicUsize::new(0),
                config,
                mock,
                token,
            });
        }
        Ok(Gateway {
            endpoints,
            clock: Arc::new(SystemClock),
            transport: default_transport(),
            backoff: Backoff::default(),
            log,
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &EndpointConfig> {
        self.endpoints.iter().map(|e| &e.config)
    }

    fn state(&self, name: &str) -> Result<&EndpointState, GatewayError> {
        self.endpoints
            .iter()
            .find(|e| e.config.name == name)
            .ok_or_else(|| GatewayError::UnknownEndpoint(name.to_string()))
    }

    /// Queries dispatched to `endpoint` so far (mock or remote).
    pub fn call_count(&self, endpoint: &str) -> usize {
        self.state(endpoint)
            .map_or(0, |s| s.calls.load(Ordering::Relaxed))
    }

    pub fn run_log(&self) -> &RunLog {
        &self.log
    }

    /// Flushes the run log.
    pub fn finish(self) -> std::io::Result<()> {
        self.log.finish()
    }

    /// Sends one prompt about `record` to `endpoint`.
    pub fn query(
        &self,
        endpoint: &str,
        prompt: &RenderedPrompt,
        record: &ImageRecord,
    ) -> Result<ModelReply, GatewayError> {
        let state = self.state(endpoint)?;
        state.calls.fetch_add(1, Ordering::Relaxed);
        let fp = fingerprint(prompt);
        match state.mock {
            Some(kind) => {
                let started = self.clock.now_ms();
                let raw_text = mock::answer(kind, record);
                self.log.append(&RunLogRecord {
                    timestamp: rfc3339(started),
                    endpoint: endpoint.to_string(),
                    fingerprint: fp.clone(),
                    status: "ok".into(),
                    latency_ms: 0,
                    attempt: 1,
                    raw_text: Some(raw_text.clone()),
                    error: None,
                    temperature: None,
                    prompt_role: None,
                });
                Ok(ModelReply {
                    raw_text,
                    latency_ms: 0,
                    attempt_count: 1,
                    endpoint: endpoint.to_string(),
                    fingerprint: fp,
                })
            }
            None => self.query_remote(state, prompt, fp),
        }
    }

    fn log_attempt(
        &self,
        state: &EndpointState,
        at: Attempt<'_>,
        status: String,
        raw_text: Option<String>,
        error: Option<String>,
    ) {
        self.log.append(&RunLogRecord {
            timestamp: rfc3339(at.started),
            endpoint: state.config.name.clone(),
            fingerprint: at.fingerprint.to_string(),
            status,
            latency_ms: self.clock.now_ms().saturating_sub(at.started),
            attempt: at.number,
            raw_text,
            error,
            temperature: Some(state.config.temperature),
            prompt_role: Some(state.config.prompt_role.as_str().to_string()),
        });
    }

    fn query_remote(
        &self,
        state: &EndpointState,
        prompt: &RenderedPrompt,
        fp: String,
    ) -> Result<ModelReply, GatewayError> {
        let image = match load_image(&prompt.image_uri) {
            Ok(image) => image,
            Err(message) => {
                let now = self.clock.now_ms();
                self.log_attempt(
                    state,
                    Attempt {
                        fingerprint: &fp,
                        started: now,
                        number: 0,
                    },
                    "image_error".into(),
                    None,
                    Some(message.clone()),
                );
                return Err(GatewayError::Image {
                    uri: prompt.image_uri.clone(),
                    message,
                });
            }
        };
        let request = build_request(&state.config, prompt, &image, state.token.as_deref());
        let max_attempts = state.config.max_retries + 1;

        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = state.limiter.acquire(self.clock.as_ref());
            let result = self.transport.post(&request);
            let latency_ms = self.clock.now_ms().saturating_sub(started);

            let transient = match result {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return match extract_text(state.config.adapter, &resp.body) {
                        Some(text) => {
                            self.log_attempt(
                                state,
                                Attempt {
                                    fingerprint: &fp,
                                    started,
                                    number: attempt,
                                },
                                "ok".into(),
                                Some(text.clone()),
                                None,
                            );
                            Ok(ModelReply {
                                raw_text: text,
                                latency_ms,
                                attempt_count: attempt,
                                endpoint: state.config.name.clone(),
                                fingerprint: fp,
                            })
                        }
                        None => {
                            self.log_attempt(
                                state,
                                Attempt {
                                    fingerprint: &fp,
                                    started,
                                    number: attempt,
                                },
                                "malformed".into(),
                                Some(resp.body.clone()),
                                None,
                            );
                            Err(GatewayError::MalformedEndpointResponse { body: resp.body })
                        }
                    };
                }
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    self.log_attempt(
                        state,
                        Attempt {
                            fingerprint: &fp,
                            started,
                            number: attempt,
                        },
                        format!("http_{}", resp.status),
                        None,
                        Some(resp.body),
                    );
                    return Err(GatewayError::AuthFailure {
                        status: resp.status,
                    });
                }
                Ok(resp) if resp.status == 408 || resp.status == 429 || resp.status >= 500 => {
                    let msg = format!("HTTP {}", resp.status);
                    self.log_attempt(
                        state,
                        Attempt {
                            fingerprint: &fp,
                            started,
                            number: attempt,
                        },
                        format!("http_{}", resp.status),
                        None,
                        Some(resp.body),
                    );
                    msg
                }
                Ok(resp) => {
                    self.log_attempt(
                        state,
                        Attempt {
                            fingerprint: &fp,
                            started,
                            number: attempt,
                        },
                        format!("http_{}", resp.status),
                        None,
                        Some(resp.body.clone()),
                    );
                    return Err(GatewayError::Rejected {
                        status: resp.status,
                        body: resp.body,
                    });
                }
                Err(e) => {
                    self.log_attempt(
                        state,
                        Attempt {
                            fingerprint: &fp,
                            started,
                            number: attempt,
                        },
                        "transport_error".into(),
                        None,
                        Some(e.to_string()),
                    );
                    e.to_string()
                }
            };

            if attempt >= max_attempts {
                return Err(GatewayError::ExhaustedRetries {
                    attempts: attempt,
                    last_error: transient,
                });
            }
            let delay = {
                let mut rng = state.jitter.lock().unwrap();
                self.backoff.delay(attempt, &mut *rng)
            };
            self.clock.sleep(delay);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoCoordinate;
    use crate::prompt::{render, PromptStrategy, StrategyKind};

    fn record() -> ImageRecord {
        ImageRecord::new(
            "r1",
            "r1.jpg",
            GeoCoordinate::new(10.0, 20.0).unwrap(),
            "FR",
        )
    }

    fn prompt(uri: &str) -> RenderedPrompt {
        render(&PromptStrategy::new(StrategyKind::ZeroShot), uri).unwrap()
    }

    fn image_file() -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".jpg").tempfile().unwrap();
        std::io::Write::write_all(&mut f, b"jpegbytes").unwrap();
        f
    }

    fn ok_body(text: &str) -> HttpResponse {
        HttpResponse::new(
            200,
            serde_json::json!({"choices": [{"message": {"content": text}}]}).to_string(),
        )
    }

    fn remote_gateway(
        script: Vec<Result<HttpResponse, TransportError>>,
    ) -> (
        Gateway,
        Arc<ScriptedTransport>,
        Arc<VirtualClock>,
        SharedBuffer,
    ) {
        let transport = Arc::new(ScriptedTransport::new(script));
        let clock = Arc::new(VirtualClock::starting_at(1_700_000_000_000));
        let (log, buf) = RunLog::memory();
        let gw = Gateway::new(
            vec![EndpointConfig::new("remote", "https://example.invalid/v1")],
            log,
        )
        .unwrap()
        .with_transport(transport.clone())
        .with_clock(clock.clone());
        (gw, transport, clock, buf)
    }

    #[test]
    fn oracle_mock_answers_truth() {
        let (log, _buf) = RunLog::memory();
        let gw = Gateway::new(vec![EndpointConfig::mock_oracle("oracle")], log).unwrap();
        let reply = gw.query("oracle", &prompt("r1.jpg"), &record()).unwrap();
        assert!(reply.raw_text.contains("Latitude and Longitude: 10, 20"));
        assert_eq!(gw.call_count("oracle"), 1);
        assert_eq!(gw.run_log().len(), 1);
    }

    #[test]
    fn retries_through_rate_limiting() {
        let img = image_file();
        let uri = img.path().to_str().unwrap();
        let (gw, transport, clock, buf) = remote_gateway(vec![
            Ok(HttpResponse::new(429, "slow down")),
            Ok(HttpResponse::new(429, "slow down")),
            Ok(ok_body("Latitude and Longitude: 1.5, 2.5")),
        ]);
        let reply = gw.query("remote", &prompt(uri), &record()).unwrap();
        assert_eq!(reply.attempt_count, 3);
        assert_eq!(reply.raw_text, "Latitude and Longitude: 1.5, 2.5");
        assert_eq!(transport.requests().len(), 3);
        let sleeps = clock.sleeps();
        assert_eq!(sleeps.len(), 2);
        assert!(
            sleeps[0] >= Duration::from_millis(800) && sleeps[0] <= Duration::from_millis(1200)
        );
        assert!(
            sleeps[1] >= Duration::from_millis(1600) && sleeps[1] <= Duration::from_millis(2400)
        );
        gw.finish().unwrap();
        let statuses: Vec<String> = buf.records().into_iter().map(|r| r.status).collect();
        assert_eq!(statuses, vec!["http_429", "http_429", "ok"]);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let img = image_file();
        let (gw, transport, clock, _) =
            remote_gateway(vec![Ok(HttpResponse::new(401, "no")), Ok(ok_body("x"))]);
        let err = gw
            .query("remote", &prompt(img.path().to_str().unwrap()), &record())
            .unwrap_err();
        assert_eq!(err, GatewayError::AuthFailure { status: 401 });
        assert_eq!(transport.requests().len(), 1);
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn malformed_body_is_preserved() {
        let img = image_file();
        let (gw, _, _, buf) = remote_gateway(vec![Ok(HttpResponse::new(200, "<html>oops</html>"))]);
        let err = gw
            .query("remote", &prompt(img.path().to_str().unwrap()), &record())
            .unwrap_err();
        assert_eq!(
            err,
            GatewayError::MalformedEndpointResponse {
                body: "<html>oops</html>".into()
            }
        );
        gw.finish().unwrap();
        assert_eq!(
            buf.records()[0].raw_text.as_deref(),
            Some("<html>oops</html>")
        );
    }

    #[test]
    fn exhausts_retries() {
        let img = image_file();
        let script: Vec<_> = (0..6).map(|_| Err(TransportError::Timeout)).collect();
        let (gw, transport, _, buf) = remote_gateway(script);
        let err = gw
            .query("remote", &prompt(img.path().to_str().unwrap()), &record())
            .unwrap_err();
        assert!(matches!(
            err,
            GatewayError::ExhaustedRetries { attempts: 6, .. }
        ));
        assert_eq!(transport.requests().len(), 6);
        gw.finish().unwrap();
        assert_eq!(buf.records().len(), 6);
    }

    #[test]
    fn missing_image_is_reported() {
        let (gw, transport, _, _) = remote_gateway(vec![]);
        let err = gw
            .query("remote", &prompt("/definitely/missing.jpg"), &record())
            .unwrap_err();
        assert!(matches!(err, GatewayError::Image { .. }));
        assert!(transport.requests().is_empty());
    }

    #[test]
    fn rate_cap_with_virtual_clock() {
        let img = image_file();
        let uri = img.path().to_str().unwrap().to_string();
        let script: Vec<_> = (0..12)
            .map(|_| Ok(ok_body("Latitude and Longitude: 1.5, 2.5")))
            .collect();
        let transport = Arc::new(ScriptedTransport::new(script));
        let clock = Arc::new(VirtualClock::starting_at(0));
        let mut cfg = EndpointConfig::new("remote", "https://example.invalid");
        cfg.requests_per_minute = 4;
        let gw = Gateway::new(vec![cfg], RunLog::discard())
            .unwrap()
            .with_transport(transport)
            .with_clock(clock.clone());
        let mut starts = Vec::new();
        for _ in 0..12 {
            gw.query("remote", &prompt(&uri), &record()).unwrap();
            starts.push(clock.now_ms());
        }
        for &s in &starts {
            let n = starts.iter().filter(|&&t| t >= s && t < s + 60_000).count();
            assert!(n <= 4);
        }
        assert_eq!(starts[11], 120_000);
    }

    #[test]
    fn config_validation() {
        let mut hot = EndpointConfig::new("hot", "https://x");
        hot.temperature = 0.7;
        assert!(matches!(hot.validate(), Err(GatewayError::Config(_))));
        hot.allow_nonzero_temperature = true;
        assert!(hot.validate().is_ok());

        let mut slow = EndpointConfig::new("slow", "https://x");
        slow.timeout_secs = 0.0;
        assert!(slow.validate().is_err());

        assert!(EndpointConfig::new("n", "mock:noisy").validate().is_err());
        assert!(EndpointConfig::new("n", "mock:psychic").validate().is_err());
        assert!(EndpointConfig::new("n", "ftp://x").validate().is_err());
        assert_eq!(
            EndpointConfig::mock_noisy("n", 10.0, 3).validate().unwrap(),
            Some(MockKind::Noisy {
                sigma_km: 10.0,
                seed: 3
            })
        );

        let dup = vec![
            EndpointConfig::mock_oracle("a"),
            EndpointConfig::mock_oracle("a"),
        ];
        assert!(Gateway::new(dup, RunLog::discard()).is_err());

        let mut secret = EndpointConfig::new("s", "https://x");
        secret.auth_token_env = Some("GEOBENCH_TEST_SURELY_UNSET_VAR".into());
        assert!(Gateway::new(vec![secret], RunLog::discard()).is_err());
    }

    #[test]
    fn endpoint_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("e.toml");
        std::fs::write(
            &toml_path,
            "[[endpoint]]\nname = \"oracle\"\nbase_url = \"mock:oracle\"\n\n[[endpoint]]\nname = \"gpt\"\nbase_url = \"https://api.example.com/v1\"\nmodel = \"gpt-4o\"\nauth_token_env = \"KEY\"\nprompt_role = \"system\"\n",
        )
        .unwrap();
        let eps = load_endpoints(&toml_path).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[1].prompt_role, PromptRole::System);
        assert_eq!(eps[1].max_retries, 5);

        let json_path = dir.path().join("e.json");
        std::fs::write(
            &json_path,
            r#"[{"name":"n","base_url":"mock:noisy","sigma_km":5}]"#,
        )
        .unwrap();
        assert_eq!(load_endpoints(&json_path).unwrap()[0].sigma_km, Some(5.0));

        std::fs::write(
            &json_path,
            r#"[{"name":"n","base_url":"mock:oracle","temprature":1}]"#,
        )
        .unwrap();
        assert!(load_endpoints(&json_path).is_err());
    }

    #[test]
    fn fingerprints_separate_prompt_and_image() {
        let a = fingerprint(&prompt("a.jpg"));
        assert_eq!(a, fingerprint(&prompt("a.jpg")));
        assert_ne!(a, fingerprint(&prompt("b.jpg")));
        assert_eq!(a.len(), 64);
    }
}

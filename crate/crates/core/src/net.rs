//! Optional live-data adapters.
//!
//! Measurements and routes come from sources behind small traits; the
//! fixture implementations replay canned bytes and power every test, the
//! HTTP implementations talk to OpenAQ-compatible and directions-style
//! endpoints. The wire shapes accepted by the parsers are the stable
//! contract — any source producing those bytes is interchangeable.
//!
//! API keys come from the environment only: [`ENV_AQ_KEY`] and
//! [`ENV_ROUTE_KEY`]. No key ever lives in a config file.

use std::collections::VecDeque;
use std::time::Duration;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::aq::{parse_openaq_json, AqError, DropCounts, Measurement, Pollutant};
use crate::route::{decode_polyline, PlannedRoute, RouteError, TransportMode};

pub const ENV_AQ_KEY: &str = "EXPOSOME_AQ_KEY";
pub const ENV_ROUTE_KEY: &str = "EXPOSOME_ROUTE_KEY";

/// Retry schedule: `attempts` tries per page with exponential backoff
/// (base, 2×base, …) and a total wall-clock budget.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub total_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            total_timeout: Duration::from_secs(30),
        }
    }
}

/// Deterministic time for the retry loop. The system clock sleeps for real;
/// the manual clock advances instantly and records the schedule.
pub trait Clock {
    fn elapsed(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    start: std::time::Instant,
}

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock {
            start: std::time::Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Test clock: `sleep` advances simulated time and logs each delay.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Duration,
    pub sleeps: Vec<Duration>,
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        self.now
    }

    fn sleep(&mut self, d: Duration) {
        self.now += d;
        self.sleeps.push(d);
    }
}

/// One attempt's failure, as reported by a source implementation.
#[derive(Debug, Error)]
pub enum FetchFailure {
    /// Worth retrying: connection reset, 5xx, timeout.
    #[error("transient failure: {0}")]
    Transient(String),
    /// HTTP 429 — retried, but surfaced distinctly when retries run out.
    #[error("rate limited")]
    RateLimited,
    /// The routing service has no route between the endpoints.
    #[error("no route found")]
    NoRoute,
    /// Not worth retrying: bad request, auth failure.
    #[error("fatal failure: {0}")]
    Fatal(String),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("quota exceeded (HTTP 429 after retries)")]
    QuotaExceeded,
    #[error("no route found")]
    NoRouteFound,
    #[error(transparent)]
    Parse(#[from] AqError),
    #[error(transparent)]
    Route(#[from] RouteError),
}

/// Spatial window for a measurement fetch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

#[derive(Debug, Clone)]
pub struct AqQuery {
    pub bbox: BoundingBox,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub pollutants: Vec<Pollutant>,
}

/// One page of measurement bytes in the `parse_openaq_json` wire shape.
#[derive(Debug, Clone)]
pub struct Page {
    pub body: Vec<u8>,
    pub has_next: bool,
}

/// Measurement source: pages of bytes the AQ parser accepts.
pub trait AqSource {
    /// Fetch one page (1-based).
    fn fetch_page(&mut self, query: &AqQuery, page: u32) -> Result<Page, FetchFailure>;
}

/// Directions source: an encoded polyline between two points.
pub trait RouteSource {
    fn fetch(
        &mut self,
        origin: (f64, f64),
        destination: (f64, f64),
        mode: TransportMode,
    ) -> Result<RouteResponse, FetchFailure>;
}

#[derive(Debug, Clone)]
pub struct RouteResponse {
    pub polyline: String,
    pub precision: u32,
}

/// Run one fallible attempt with the policy's backoff. 429s are retried like
/// transients but reported as [`NetError::QuotaExceeded`] when exhausted.
fn with_retries<T>(
    policy: &RetryPolicy,
    clock: &mut dyn Clock,
    mut attempt: impl FnMut() -> Result<T, FetchFailure>,
) -> Result<T, NetError> {
    let mut last_rate_limited = false;
    for try_index in 0..policy.attempts {
        if clock.elapsed() >= policy.total_timeout {
            return Err(NetError::SourceUnavailable("total timeout exceeded".into()));
        }
        match attempt() {
            Ok(v) => return Ok(v),
            Err(FetchFailure::Transient(msg)) => {
                last_rate_limited = false;
                if try_index + 1 == policy.attempts {
                    return Err(NetError::SourceUnavailable(msg));
                }
            }
            Err(FetchFailure::RateLimited) => {
                last_rate_limited = true;
                if try_index + 1 == policy.attempts {
                    return Err(NetError::QuotaExceeded);
                }
            }
            Err(FetchFailure::NoRoute) => return Err(NetError::NoRouteFound),
            Err(FetchFailure::Fatal(msg)) => return Err(NetError::SourceUnavailable(msg)),
        }
        clock.sleep(policy.base_delay * 2u32.pow(try_index));
    }
    // attempts == 0 is a misconfiguration; treat as unavailable.
    if last_rate_limited {
        Err(NetError::QuotaExceeded)
    } else {
        Err(NetError::SourceUnavailable("no attempts configured".into()))
    }
}

/// Fetched measurements plus the parser's per-page drop accounting.
#[derive(Debug, Clone, Default)]
pub struct FetchedMeasurements {
    pub measurements: Vec<Measurement>,
    pub records_seen: usize,
    pub dropped: DropCounts,
    pub pages: u32,
}

/// Upper bound on pages per fetch; a source that never clears `has_next`
/// is broken, not big.
pub const MAX_PAGES: u32 = 10_000;

/// Pull every page for a query, feed each through the OpenAQ parser, and
/// concatenate. Empty results are an empty list, not an error.
pub fn fetch_measurements(
    source: &mut dyn AqSource,
    query: &AqQuery,
    policy: &RetryPolicy,
    clock: &mut dyn Clock,
) -> Result<FetchedMeasurements, NetError> {
    let mut out = FetchedMeasurements::default();
    let mut page = 1u32;
    loop {
        if page > MAX_PAGES {
            return Err(NetError::SourceUnavailable(format!(
                "source did not terminate pagination within {MAX_PAGES} pages"
            )));
        }
        let fetched = with_retries(policy, clock, || source.fetch_page(query, page))?;
        let batch = parse_openaq_json(&fetched.body)?;
        out.measurements.extend(batch.measurements);
        out.records_seen += batch.records_seen;
        out.dropped.unknown_parameter += batch.dropped.unknown_parameter;
        out.dropped.unsupported_unit += batch.dropped.unsupported_unit;
        out.dropped.negative_value += batch.dropped.negative_value;
        out.dropped.malformed_record += batch.dropped.malformed_record;
        out.pages = page;
        if !fetched.has_next {
            return Ok(out);
        }
        page += 1;
    }
}

/// Fetch a route and decode its polyline into a [`PlannedRoute`] departing
/// at `departure`.
pub fn fetch_route(
    source: &mut dyn RouteSource,
    origin: (f64, f64),
    destination: (f64, f64),
    mode: TransportMode,
    departure: DateTime<Utc>,
    policy: &RetryPolicy,
    clock: &mut dyn Clock,
) -> Result<PlannedRoute, NetError> {
    let response = with_retries(policy, clock, || source.fetch(origin, destination, mode))?;
    let points = decode_polyline(&response.polyline, response.precision)?;
    Ok(PlannedRoute::new(points, mode, departure)?)
}

// ---------------------------------------------------------------------------
// Fixture sources
// ---------------------------------------------------------------------------

/// Replays a scripted sequence of page outcomes. The simplest way to build
/// one is [`FixtureAqSource::from_pages`] with ready-made wire bytes; tests
/// exercising the retry path push failures into the script directly.
#[derive(Debug, Default)]
pub struct FixtureAqSource {
    pub script: VecDeque<Result<Page, FetchFailure>>,
}

impl FixtureAqSource {
    pub fn from_pages(pages: Vec<Vec<u8>>) -> FixtureAqSource {
        let n = pages.len();
        FixtureAqSource {
            script: pages
                .into_iter()
                .enumerate()
                .map(|(i, body)| {
                    Ok(Page {
                        body,
                        has_next: i + 1 < n,
                    })
                })
                .collect(),
        }
    }

    /// Read page files from disk, in the order given.
    pub fn from_files(paths: &[std::path::PathBuf]) -> std::io::Result<FixtureAqSource> {
        let mut pages = Vec::with_capacity(paths.len());
        for p in paths {
            pages.push(std::fs::read(p)?);
        }
        Ok(FixtureAqSource::from_pages(pages))
    }
}

impl AqSource for FixtureAqSource {
    fn fetch_page(&mut self, _query: &AqQuery, _page: u32) -> Result<Page, FetchFailure> {
        self.script
            .pop_front()
            .unwrap_or_else(|| Err(FetchFailure::Fatal("fixture script exhausted".into())))
    }
}

/// Fixture directions source: a fixed polyline, or `NoRoute` when origin and
/// destination coincide (mirroring how real services answer degenerate trips).
#[derive(Debug, Clone)]
pub struct FixtureRouteSource {
    pub polyline: String,
    pub precision: u32,
}

impl RouteSource for FixtureRouteSource {
    fn fetch(
        &mut self,
        origin: (f64, f64),
        destination: (f64, f64),
        _mode: TransportMode,
    ) -> Result<RouteResponse, FetchFailure> {
        if origin == destination {
            return Err(FetchFailure::NoRoute);
        }
        Ok(RouteResponse {
            polyline: self.polyline.clone(),
            precision: self.precision,
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP sources
// ---------------------------------------------------------------------------

/// OpenAQ-compatible HTTP source. Sends `X-API-Key` when [`ENV_AQ_KEY`] is
/// set. Status mapping: 429 → rate limited, 5xx → transient, other
/// non-success → fatal.
pub struct HttpAqSource {
    base_url: String,
    page_size: u32,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpAqSource {
    pub fn new(base_url: impl Into<String>, page_size: u32) -> HttpAqSource {
        HttpAqSource {
            base_url: base_url.into(),
            page_size: page_size.max(1),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
            api_key: std::env::var(ENV_AQ_KEY).ok(),
        }
    }
}

impl AqSource for HttpAqSource {
    fn fetch_page(&mut self, query: &AqQuery, page: u32) -> Result<Page, FetchFailure> {
        let parameters = query
            .pollutants
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(",");
        let bbox = format!(
            "{},{},{},{}",
            query.bbox.min_lon, query.bbox.min_lat, query.bbox.max_lon, query.bbox.max_lat
        );
        let mut request = self
            .agent
            .get(&self.base_url)
            .query("bbox", &bbox)
            .query("date_from", &query.from.to_rfc3339())
            .query("date_to", &query.to.to_rfc3339())
            .query("parameters", &parameters)
            .query("page", &page.to_string())
            .query("limit", &self.page_size.to_string());
        if let Some(key) = &self.api_key {
            request = request.set("X-API-Key", key);
        }
        let body = match request.call() {
            Ok(response) => {
                let mut buf = Vec::new();
                response
                    .into_reader()
                    .read_to_end(&mut buf)
                    .map_err(|e| FetchFailure::Transient(format!("read failed: {e}")))?;
                buf
            }
            Err(ureq::Error::Status(429, _)) => return Err(FetchFailure::RateLimited),
            Err(ureq::Error::Status(code, _)) if (500..600).contains(&code) => {
                return Err(FetchFailure::Transient(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(FetchFailure::Fatal(format!("HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(FetchFailure::Transient(t.to_string()))
            }
        };
        // Trust an explicit meta block; otherwise a full page implies more.
        let has_next = serde_json::from_slice::<serde_json::Value>(&body)
            .ok()
            .and_then(|v| {
                let results = v.get("results")?.as_array()?.len() as u64;
                match v.get("meta").and_then(|m| {
                    Some((m.get("found")?.as_u64()?, m.get("limit")?.as_u64()?))
                }) {
                    Some((found, limit)) => Some(u64::from(page) * limit < found),
                    None => Some(results == u64::from(self.page_size)),
                }
            })
            .unwrap_or(false);
        Ok(Page { body, has_next })
    }
}

/// Directions-style HTTP source returning `{"polyline": "...", "precision": 5}`.
/// Sends `X-API-Key` when [`ENV_ROUTE_KEY`] is set.
pub struct HttpRouteSource {
    base_url: String,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpRouteSource {
    pub fn new(base_url: impl Into<String>) -> HttpRouteSource {
        HttpRouteSource {
            base_url: base_url.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
            api_key: std::env::var(ENV_ROUTE_KEY).ok(),
        }
    }
}

impl RouteSource for HttpRouteSource {
    fn fetch(
        &mut self,
        origin: (f64, f64),
        destination: (f64, f64),
        mode: TransportMode,
    ) -> Result<RouteResponse, FetchFailure> {
        let mut request = self
            .agent
            .get(&self.base_url)
            .query("origin", &format!("{},{}", origin.0, origin.1))
            .query("destination", &format!("{},{}", destination.0, destination.1))
            .query("mode", mode.name());
        if let Some(key) = &self.api_key {
            request = request.set("X-API-Key", key);
        }
        let response = match request.call() {
            Ok(r) => r,
            Err(ureq::Error::Status(404, _)) => return Err(FetchFailure::NoRoute),
            Err(ureq::Error::Status(429, _)) => return Err(FetchFailure::RateLimited),
            Err(ureq::Error::Status(code, _)) if (500..600).contains(&code) => {
                return Err(FetchFailure::Transient(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(FetchFailure::Fatal(format!("HTTP {code}")))
            }
            Err(ureq::Error::Transport(t)) => return Err(FetchFailure::Transient(t.to_string())),
        };
        let body = response
            .into_string()
            .map_err(|e| FetchFailure::Transient(format!("read failed: {e}")))?;
        let doc: serde_json::Value = serde_json::from_str(&body)
            .map_err(|e| FetchFailure::Fatal(format!("bad response body: {e}")))?;
        let polyline = doc
            .get("polyline")
            .and_then(|v| v.as_str())
            .ok_or_else(|| FetchFailure::Fatal("response missing `polyline`".into()))?
            .to_owned();
        if polyline.is_empty() {
            return Err(FetchFailure::NoRoute);
        }
        let precision = doc
            .get("precision")
            .and_then(|v| v.as_u64())
            .unwrap_or(u64::from(crate::route::DEFAULT_POLYLINE_PRECISION)) as u32;
        Ok(RouteResponse { polyline, precision })
    }
}

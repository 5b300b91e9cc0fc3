//! GPS activity ingestion.
//!
//! Parses GPX 1.1 files and Strava-style stream JSON into a validated,
//! time-ordered [`ActivityTrack`], then cuts the track into [`Segment`]s
//! ready for the exposure join. The canonical in-memory/JSON shape is the
//! serde form of [`ActivityTrack`] (see `docs/formats.md`).

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default segment gap threshold in seconds. Pairs further apart than this
/// (pauses, tunnels, dropouts) are recorded as gap time instead of being
/// interpolated into fabricated dose.
pub const DEFAULT_MAX_GAP_S: f64 = 60.0;

/// Heart-rate plausibility window, exclusive. Values outside are treated
/// as sensor glitches and dropped from the point at parse time.
pub const HR_PLAUSIBLE_BPM: (f64, f64) = (25.0, 260.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sport {
    Run,
    Ride,
    Walk,
    Other,
}

impl Sport {
    fn from_label(label: &str) -> Sport {
        match label.trim().to_ascii_lowercase().as_str() {
            "run" | "running" => Sport::Run,
            "ride" | "cycling" | "biking" | "bike" | "virtualride" => Sport::Ride,
            "walk" | "walking" | "hike" | "hiking" => Sport::Walk,
            _ => Sport::Other,
        }
    }
}

/// One timestamped GPS sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    #[serde(rename = "t")]
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heart_rate_bpm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
}

/// A validated activity: at least two points, strictly increasing timestamps,
/// coordinates in bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTrack {
    pub activity_id: String,
    pub sport: Sport,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("track point without a timestamp")]
    NoTimestamps,
    #[error("fewer than 2 valid track points")]
    EmptyTrack,
    #[error("stream `{stream}` has {got} entries, expected {expected}")]
    ArrayLengthMismatch {
        stream: String,
        expected: usize,
        got: usize,
    },
}

fn check_coords(lat: f64, lon: f64) -> Result<(), ActivityError> {
    if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon)
    {
        return Err(ActivityError::MalformedInput(format!(
            "coordinates out of bounds: ({lat}, {lon})"
        )));
    }
    Ok(())
}

fn plausible_hr(hr: f64) -> Option<f64> {
    (hr.is_finite() && hr > HR_PLAUSIBLE_BPM.0 && hr < HR_PLAUSIBLE_BPM.1).then_some(hr)
}

fn plausible_power(w: f64) -> Option<f64> {
    (w.is_finite() && w >= 0.0).then_some(w)
}

impl ActivityTrack {
    /// Build a track from raw points: sorts by timestamp (stable), collapses
    /// duplicate timestamps to the last occurrence, enforces invariants.
    pub fn from_points(
        activity_id: String,
        sport: Sport,
        mut points: Vec<TrackPoint>,
    ) -> Result<ActivityTrack, ActivityError> {
        for p in &points {
            check_coords(p.lat, p.lon)?;
        }
        points.sort_by_key(|p| p.timestamp);
        // Keep the last occurrence per timestamp: GPS devices emit corrections late.
        let mut deduped: Vec<TrackPoint> = Vec::with_capacity(points.len());
        for p in points {
            match deduped.last_mut() {
                Some(last) if last.timestamp == p.timestamp => *last = p,
                _ => deduped.push(p),
            }
        }
        if deduped.len() < 2 {
            return Err(ActivityError::EmptyTrack);
        }
        Ok(ActivityTrack {
            activity_id,
            sport,
            points: deduped,
        })
    }

    /// Elapsed time, first to last point, in seconds.
    pub fn elapsed_s(&self) -> f64 {
        duration_s(self.points[0].timestamp, self.points[self.points.len() - 1].timestamp)
    }
}

fn duration_s(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    // i64 nanoseconds cover ±292 years; activities are hours.
    (to - from).num_nanoseconds().expect("duration overflow") as f64 / 1e9
}

/// Parse a GPX 1.1 document. Track points must carry `lat`/`lon` attributes
/// and a `<time>` child; heart rate is read from the track-point extension
/// element (`<gpxtpx:hr>` or any element with local name `hr`).
pub fn parse_gpx(bytes: &[u8]) -> Result<ActivityTrack, ActivityError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ActivityError::MalformedInput(format!("not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| ActivityError::MalformedInput(format!("invalid XML: {e}")))?;

    let mut activity_id = String::from("gpx-activity");
    let mut sport = Sport::Other;
    if let Some(trk) = doc.descendants().find(|n| n.has_tag_name("trk")) {
        if let Some(name) = trk.children().find(|n| n.has_tag_name("name")).and_then(|n| n.text()) {
            let name = name.trim();
            if !name.is_empty() {
                activity_id = name.to_owned();
            }
        }
        if let Some(kind) = trk.children().find(|n| n.has_tag_name("type")).and_then(|n| n.text()) {
            sport = Sport::from_label(kind);
        }
    }

    let mut points = Vec::new();
    for trkpt in doc.descendants().filter(|n| n.has_tag_name("trkpt")) {
        let lat: f64 = trkpt
            .attribute("lat")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| ActivityError::MalformedInput("trkpt missing lat".into()))?;
        let lon: f64 = trkpt
            .attribute("lon")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| ActivityError::MalformedInput("trkpt missing lon".into()))?;
        check_coords(lat, lon)?;

        let time_text = trkpt
            .children()
            .find(|n| n.has_tag_name("time"))
            .and_then(|n| n.text())
            .ok_or(ActivityError::NoTimestamps)?;
        let timestamp = DateTime::parse_from_rfc3339(time_text.trim())
            .map_err(|e| ActivityError::MalformedInput(format!("bad <time> `{time_text}`: {e}")))?
            .with_timezone(&Utc);

        let elevation_m = trkpt
            .children()
            .find(|n| n.has_tag_name("ele"))
            .and_then(|n| n.text())
            .and_then(|t| t.trim().parse::<f64>().ok());
        // Extension elements are namespaced per device vendor; match local names.
        let heart_rate_bpm = trkpt
            .descendants()
            .find(|n| n.tag_name().name() == "hr")
            .and_then(|n| n.text())
            .and_then(|t| t.trim().parse::<f64>().ok())
            .and_then(plausible_hr);
        let power_w = trkpt
            .descendants()
            .find(|n| n.tag_name().name() == "power" || n.tag_name().name() == "watts")
            .and_then(|n| n.text())
            .and_then(|t| t.trim().parse::<f64>().ok())
            .and_then(plausible_power);

        points.push(TrackPoint {
            timestamp,
            lat,
            lon,
            elevation_m,
            heart_rate_bpm,
            power_w,
        });
    }

    ActivityTrack::from_points(activity_id, sport, points)
}

/// Parse Strava-style stream JSON: parallel arrays `time` (seconds offset)
/// and `latlng` plus optional `heartrate`, `watts`, `altitude`, anchored at
/// `start_date`.
pub fn parse_strava_streams(bytes: &[u8]) -> Result<ActivityTrack, ActivityError> {
    let doc: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| ActivityError::MalformedInput(format!("invalid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| ActivityError::MalformedInput("expected a JSON object".into()))?;

    let activity_id = match obj.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => "strava-activity".to_owned(),
    };
    let sport = obj
        .get("type")
        .or_else(|| obj.get("sport"))
        .and_then(|v| v.as_str())
        .map(Sport::from_label)
        .unwrap_or(Sport::Other);

    let start_text = obj
        .get("start_date")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ActivityError::MalformedInput("missing `start_date`".into()))?;
    let start = DateTime::parse_from_rfc3339(start_text)
        .map_err(|e| ActivityError::MalformedInput(format!("bad start_date: {e}")))?
        .with_timezone(&Utc);

    fn number_array(obj: &serde_json::Map<String, serde_json::Value>, key: &str) -> Result<Option<Vec<f64>>, ActivityError> {
        match obj.get(key) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| ActivityError::MalformedInput(format!("non-numeric entry in `{key}`")))
                })
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
            Some(_) => Err(ActivityError::MalformedInput(format!("`{key}` is not an array"))),
        }
    }

    let time = number_array(obj, "time")?
        .ok_or_else(|| ActivityError::MalformedInput("missing `time` stream".into()))?;
    let latlng = match obj.get("latlng") {
        Some(serde_json::Value::Array(a)) => a
            .iter()
            .map(|v| {
                let pair = v.as_array().filter(|p| p.len() == 2);
                let lat = pair.and_then(|p| p[0].as_f64());
                let lon = pair.and_then(|p| p[1].as_f64());
                match (lat, lon) {
                    (Some(lat), Some(lon)) => Ok((lat, lon)),
                    _ => Err(ActivityError::MalformedInput("bad `latlng` entry".into())),
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(ActivityError::MalformedInput("missing `latlng` stream".into())),
    };
    let heartrate = number_array(obj, "heartrate")?;
    let watts = number_array(obj, "watts")?;
    let altitude = number_array(obj, "altitude")?;

    let n = time.len();
    for (name, len) in [
        ("latlng", Some(latlng.len())),
        ("heartrate", heartrate.as_ref().map(Vec::len)),
        ("watts", watts.as_ref().map(Vec::len)),
        ("altitude", altitude.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len {
            if len != n {
                return Err(ActivityError::ArrayLengthMismatch {
                    stream: name.to_owned(),
                    expected: n,
                    got: len,
                });
            }
        }
    }

    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let (lat, lon) = latlng[i];
        check_coords(lat, lon)?;
        let offset_ms = (time[i] * 1000.0).round() as i64;
        points.push(TrackPoint {
            timestamp: start + Duration::milliseconds(offset_ms),
            lat,
            lon,
            elevation_m: altitude.as_ref().map(|a| a[i]),
            heart_rate_bpm: heartrate.as_ref().and_then(|h| plausible_hr(h[i])),
            power_w: watts.as_ref().and_then(|w| plausible_power(w[i])),
        });
    }

    ActivityTrack::from_points(activity_id, sport, points)
}

/// One interval between two consecutive track points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    /// Index of the first endpoint in the source track.
    pub start_index: usize,
    pub start_lat: f64,
    pub start_lon: f64,
    pub end_lat: f64,
    pub end_lon: f64,
    /// Arithmetic midpoint of the endpoints. At typical sample spacing the
    /// difference from the great-circle midpoint is far below sensor noise.
    pub mid_lat: f64,
    pub mid_lon: f64,
    pub mid_time: DateTime<Utc>,
    pub duration_s: f64,
}

/// The segment cut of a track: kept intervals plus the total dropped gap time.
#[derive(Debug, Clone, Default)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
    /// Total duration of dropped pairs (Δt > max_gap_s), in seconds.
    pub gap_s: f64,
    pub gap_count: usize,
}

/// Cut a track into per-pair segments. Pairs with Δt > `max_gap_s` are
/// dropped and recorded as gap time.
pub fn segmentize(track: &ActivityTrack, max_gap_s: f64) -> Segmentation {
    assert!(max_gap_s > 0.0, "max_gap_s must be positive");
    let mut out = Segmentation::default();
    for (i, pair) in track.points.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = duration_s(a.timestamp, b.timestamp);
        if dt > max_gap_s {
            out.gap_s += dt;
            out.gap_count += 1;
            continue;
        }
        out.segments.push(Segment {
            start_index: i,
            start_lat: a.lat,
            start_lon: a.lon,
            end_lat: b.lat,
            end_lon: b.lon,
            mid_lat: (a.lat + b.lat) / 2.0,
            mid_lon: (a.lon + b.lon) / 2.0,
            mid_time: a.timestamp + (b.timestamp - a.timestamp) / 2,
            duration_s: dt,
        });
    }
    out
}

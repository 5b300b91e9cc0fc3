//! Planned-route exposure forecasting.
//!
//! A route arrives as a coordinate list or a standard encoded polyline.
//! Per-mode speed turns legs into durations, per-mode effort drives the
//! ventilation ramp, and the forecast then runs the exact same pipeline as
//! a recorded activity (so the two are testably equivalent).

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{ActivityTrack, Sport, TrackPoint};
use crate::cig_equiv::EquivalenceTable;
use crate::geo_index::{haversine_km, QueryLimits, StationIndex};
use crate::physio::{PhysioError, PhysioProfile};
use crate::pipeline::{analyze_track, AnalysisOptions, AnalysisOutcome};

pub const DEFAULT_POLYLINE_PRECISION: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMode {
    Walk,
    Run,
    Cycle,
    Drive,
}

impl TransportMode {
    pub fn name(self) -> &'static str {
        match self {
            TransportMode::Walk => "walk",
            TransportMode::Run => "run",
            TransportMode::Cycle => "cycle",
            TransportMode::Drive => "drive",
        }
    }

    fn sport(self) -> Sport {
        match self {
            TransportMode::Walk => Sport::Walk,
            TransportMode::Run => Sport::Run,
            TransportMode::Cycle => Sport::Ride,
            TransportMode::Drive => Sport::Other,
        }
    }
}

/// Speed and effort assumptions for one transport mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProfile {
    pub speed_kmh: f64,
    /// Fraction of heart-rate reserve sustained in this mode, in [0, 1].
    pub effort_fraction: f64,
}

/// Per-mode defaults (config-overridable; forecasts must be reproducible,
/// so these are fixed rather than guessed per user).
pub fn default_mode_profiles() -> BTreeMap<TransportMode, ModeProfile> {
    BTreeMap::from([
        (TransportMode::Walk, ModeProfile { speed_kmh: 5.0, effort_fraction: 0.2 }),
        (TransportMode::Run, ModeProfile { speed_kmh: 10.0, effort_fraction: 0.7 }),
        (TransportMode::Cycle, ModeProfile { speed_kmh: 20.0, effort_fraction: 0.6 }),
        (TransportMode::Drive, ModeProfile { speed_kmh: 40.0, effort_fraction: 0.0 }),
    ])
}

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("malformed polyline: {0}")]
    MalformedPolyline(String),
    #[error("a route needs at least 2 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("no speed/effort profile for mode `{0}`")]
    UnknownMode(String),
    #[error(transparent)]
    Physio(#[from] PhysioError),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
}

/// A planned trip: ordered coordinates, transport mode, departure time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRoute {
    pub points: Vec<(f64, f64)>,
    pub mode: TransportMode,
    pub departure: DateTime<Utc>,
}

impl PlannedRoute {
    /// Collapses consecutive duplicate points and validates the remainder.
    pub fn new(
        points: Vec<(f64, f64)>,
        mode: TransportMode,
        departure: DateTime<Utc>,
    ) -> Result<PlannedRoute, RouteError> {
        let mut collapsed: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for p in points {
            if !(-90.0..=90.0).contains(&p.0) || !(-180.0..=180.0).contains(&p.1) {
                return Err(RouteError::InvalidRoute(format!("point out of bounds: {p:?}")));
            }
            if collapsed.last() != Some(&p) {
                collapsed.push(p);
            }
        }
        if collapsed.len() < 2 {
            return Err(RouteError::TooFewPoints(collapsed.len()));
        }
        Ok(PlannedRoute {
            points: collapsed,
            mode,
            departure,
        })
    }

    /// Total great-circle length in km.
    pub fn length_km(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| haversine_km(w[0].0, w[0].1, w[1].0, w[1].1))
            .sum()
    }
}

// ---------------------------------------------------------------------------
// Encoded polyline codec (standard 5-bit chunked delta encoding)
// ---------------------------------------------------------------------------

/// Decode an encoded polyline at the given precision (decimal places).
/// `decode_polyline(encode_polyline(x, p), p)` reproduces `x` within
/// 10⁻ᵖ per coordinate.
pub fn decode_polyline(encoded: &str, precision: u32) -> Result<Vec<(f64, f64)>, RouteError> {
    let factor = 10f64.powi(precision as i32);
    let mut points = Vec::new();
    let mut lat_scaled: i64 = 0;
    let mut lon_scaled: i64 = 0;
    let mut bytes = encoded.bytes().enumerate();

    let next_value = |bytes: &mut std::iter::Enumerate<std::str::Bytes>| -> Result<Option<i64>, RouteError> {
        let mut shift = 0u32;
        let mut accum: u64 = 0;
        let mut seen_any = false;
        loop {
            let Some((idx, byte)) = bytes.next() else {
                if seen_any {
                    return Err(RouteError::MalformedPolyline("truncated chunk at end of input".into()));
                }
                return Ok(None);
            };
            if !(63..=126).contains(&byte) {
                return Err(RouteError::MalformedPolyline(format!(
                    "byte 0x{byte:02x} at offset {idx} is outside the polyline alphabet"
                )));
            }
            if shift > 63 {
                return Err(RouteError::MalformedPolyline(format!("chunk overflow at offset {idx}")));
            }
            seen_any = true;
            let chunk = (byte - 63) as u64;
            accum |= (chunk & 0x1f) << shift;
            shift += 5;
            if chunk & 0x20 == 0 {
                break;
            }
        }
        // Undo zigzag: low bit is the sign.
        let value = if accum & 1 != 0 {
            !(accum >> 1) as i64
        } else {
            (accum >> 1) as i64
        };
        Ok(Some(value))
    };

    while let Some(dlat) = next_value(&mut bytes)? {
        let Some(dlon) = next_value(&mut bytes)? else {
            return Err(RouteError::MalformedPolyline(
                "latitude delta without a longitude delta".into(),
            ));
        };
        lat_scaled += dlat;
        lon_scaled += dlon;
        let lat = lat_scaled as f64 / factor;
        let lon = lon_scaled as f64 / factor;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(RouteError::MalformedPolyline(format!(
                "decoded coordinate ({lat}, {lon}) out of bounds"
            )));
        }
        points.push((lat, lon));
    }
    Ok(points)
}

/// Encode a coordinate list as a standard polyline at the given precision.
pub fn encode_polyline(points: &[(f64, f64)], precision: u32) -> String {
    let factor = 10f64.powi(precision as i32);
    let mut out = String::new();
    let mut prev = (0i64, 0i64);
    for &(lat, lon) in points {
        let scaled = ((lat * factor).round() as i64, (lon * factor).round() as i64);
        for delta in [scaled.0 - prev.0, scaled.1 - prev.1] {
            let mut zigzag = ((delta << 1) ^ (delta >> 63)) as u64;
            loop {
                let chunk = (zigzag & 0x1f) as u8;
                zigzag >>= 5;
                if zigzag != 0 {
                    out.push((chunk | 0x20).wrapping_add(63) as char);
                } else {
                    out.push((chunk + 63) as char);
                    break;
                }
            }
        }
        prev = scaled;
    }
    out
}

// ---------------------------------------------------------------------------
// Forecast
// ---------------------------------------------------------------------------

/// Predict exposure along a planned route.
///
/// Builds a synthetic constant-effort track — leg durations from the mode
/// speed, heart rate pinned at the mode's effort fraction of reserve — and
/// runs the regular analysis pipeline on it with gap dropping disabled
/// (planned legs are not recording gaps). The report is flagged
/// `forecast: true`.
pub fn forecast(
    route: &PlannedRoute,
    profile: &PhysioProfile,
    index: &StationIndex,
    table: &EquivalenceTable,
    mode_profiles: &BTreeMap<TransportMode, ModeProfile>,
    limits: QueryLimits,
) -> Result<AnalysisOutcome, RouteError> {
    let mode = mode_profiles
        .get(&route.mode)
        .ok_or_else(|| RouteError::UnknownMode(route.mode.name().into()))?;
    if !mode.speed_kmh.is_finite() || mode.speed_kmh <= 0.0 {
        return Err(RouteError::InvalidRoute(format!(
            "mode speed must be positive, got {}",
            mode.speed_kmh
        )));
    }

    let track = synthetic_track(route, profile, mode)?;
    let options = AnalysisOptions {
        max_gap_s: f64::INFINITY,
        limits,
        pollutants: None,
        equivalence: table.clone(),
        forecast: true,
    };
    let outcome = analyze_track(&track, profile, index, &options)?;
    Ok(outcome)
}

/// The synthetic activity a forecast analyzes: one point per route vertex,
/// timestamps from cumulative leg travel time, heart rate constant at the
/// mode's effort fraction.
pub fn synthetic_track(
    route: &PlannedRoute,
    profile: &PhysioProfile,
    mode: &ModeProfile,
) -> Result<ActivityTrack, RouteError> {
    let hr = profile.hr_rest_bpm + mode.effort_fraction * (profile.hr_max_bpm - profile.hr_rest_bpm);
    let mut elapsed_s = 0.0f64;
    let mut points = Vec::with_capacity(route.points.len());
    for (i, &(lat, lon)) in route.points.iter().enumerate() {
        if i > 0 {
            let (plat, plon) = route.points[i - 1];
            let leg_km = haversine_km(plat, plon, lat, lon);
            elapsed_s += leg_km / mode.speed_kmh * 3600.0;
        }
        points.push(TrackPoint {
            timestamp: route.departure + Duration::nanoseconds((elapsed_s * 1e9).round() as i64),
            lat,
            lon,
            elevation_m: None,
            heart_rate_bpm: Some(hr),
            power_w: None,
        });
    }
    ActivityTrack::from_points(
        format!("route-forecast-{}", route.mode.name()),
        route.mode.sport(),
        points,
    )
    .map_err(|e| RouteError::InvalidRoute(e.to_string()))
}

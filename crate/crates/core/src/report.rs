//! Report serialization: the self-contained analysis report (schema v1) and
//! the GeoJSON exposure map.
//!
//! Everything is written through a canonical JSON writer — sorted keys,
//! floats at 6 significant digits, no whitespace — so identical analyses
//! produce byte-identical files that tests can diff.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::activity::Sport;
use crate::aq::Pollutant;
use crate::cig_equiv::CigaretteReport;
use crate::dose::{DoseTotals, ExposureSegment, PollutantExposure};
use crate::physio::PhysioProfile;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const BAND_LABELS: [&str; 4] = ["low", "moderate", "high", "very_high"];
pub const BAND_NO_DATA: &str = "no_data";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("serialization failure: {0}")]
    SerializationFailure(String),
}

/// Per-pollutant concentration breakpoints mapping onto the four band
/// labels. Three strictly increasing breakpoints cover [0, ∞) in four bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandScale {
    pub breakpoints_ug_m3: BTreeMap<Pollutant, [f64; 3]>,
}

impl BandScale {
    /// Defaults follow widely published 24-hour AQI-style breakpoints,
    /// rounded where the published tables are stated in ppb.
    pub fn default_scale() -> BandScale {
        BandScale {
            breakpoints_ug_m3: BTreeMap::from([
                (Pollutant::Pm25, [12.0, 35.4, 150.4]),
                (Pollutant::Pm10, [54.0, 154.0, 354.0]),
                (Pollutant::O3, [100.0, 160.0, 240.0]),
                (Pollutant::No2, [40.0, 100.0, 200.0]),
                (Pollutant::So2, [90.0, 200.0, 500.0]),
                (Pollutant::Co, [5000.0, 10000.0, 15000.0]),
                (Pollutant::Bc, [1.0, 5.0, 10.0]),
            ]),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (p, bp) in &self.breakpoints_ug_m3 {
            if !(bp[0].is_finite() && bp[0] >= 0.0 && bp[0] < bp[1] && bp[1] < bp[2]) {
                return Err(format!("breakpoints for {p} must be strictly increasing, got {bp:?}"));
            }
        }
        Ok(())
    }

    /// Band label for a concentration. A pure function of (pollutant, value).
    pub fn band(&self, pollutant: Pollutant, concentration_ug_m3: f64) -> &'static str {
        match self.breakpoints_ug_m3.get(&pollutant) {
            Some(bp) => {
                let idx = bp.iter().take_while(|&&b| concentration_ug_m3 > b).count();
                BAND_LABELS[idx]
            }
            None => BAND_LABELS[BAND_LABELS.len() - 1],
        }
    }
}

impl Default for BandScale {
    fn default() -> Self {
        BandScale::default_scale()
    }
}

// ---------------------------------------------------------------------------
// Report schema v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ProfileEcho {
    pub sex: crate::physio::Sex,
    pub height_in: f64,
    pub age_y: f64,
    pub hr_rest_bpm: f64,
    pub hr_max_bpm: f64,
    pub br_rest: f64,
    pub br_max: f64,
    pub ftp_w: f64,
    pub tidal_volume_l: f64,
}

impl ProfileEcho {
    pub fn new(profile: &PhysioProfile, tidal_volume_l: f64) -> ProfileEcho {
        ProfileEcho {
            sex: profile.sex,
            height_in: profile.height_in,
            age_y: profile.age_y,
            hr_rest_bpm: profile.hr_rest_bpm,
            hr_max_bpm: profile.hr_max_bpm,
            br_rest: profile.br_rest,
            br_max: profile.br_max,
            ftp_w: profile.ftp_w,
            tidal_volume_l,
        }
    }
}

/// Every assumption a reader needs to reproduce the numbers.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub v_day_m3: f64,
    pub max_distance_km: f64,
    pub max_time_offset_s: f64,
    pub max_gap_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VentilationSummary {
    pub mean_l_min: f64,
    pub samples_from_heart_rate: usize,
    pub samples_from_power: usize,
    pub samples_from_rest_fallback: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PollutantSummary {
    pub total_ug: f64,
    /// Absent when the pollutant has no equivalence entry.
    pub cigarettes: Option<f64>,
    pub coverage: f64,
    pub matched_s: f64,
    pub unmatched_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CigaretteSummary {
    pub total: f64,
    pub uncovered: Vec<Pollutant>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// Per-segment provenance: which station and measurement backed each number.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentRecord {
    pub mid_time: DateTime<Utc>,
    pub duration_s: f64,
    pub start: LatLon,
    pub end: LatLon,
    pub ventilation_l_min: f64,
    pub pollutants: BTreeMap<Pollutant, PollutantExposure>,
}

/// The self-contained analysis report. Re-rendering needs no other inputs.
#[derive(Debug, Clone, Serialize)]
pub struct ExposureReport {
    pub schema_version: u32,
    pub forecast: bool,
    pub activity_id: String,
    pub sport: Sport,
    pub profile: ProfileEcho,
    pub config: ConfigEcho,
    pub elapsed_s: f64,
    pub duration_s: f64,
    pub gap_s: f64,
    pub ventilation: VentilationSummary,
    pub pollutants: BTreeMap<Pollutant, PollutantSummary>,
    pub cigarettes: CigaretteSummary,
    pub segments: Vec<SegmentRecord>,
    pub warnings: Vec<String>,
}

impl ExposureReport {
    /// Do all analyzed pollutants have zero coverage? (Vacuously true when
    /// nothing was analyzed.)
    pub fn coverage_is_zero(&self) -> bool {
        self.pollutants.values().all(|p| p.coverage == 0.0)
    }

    pub fn summarize_pollutants(
        totals: &DoseTotals,
        cig: &CigaretteReport,
    ) -> BTreeMap<Pollutant, PollutantSummary> {
        totals
            .per_pollutant
            .iter()
            .map(|(&p, t)| {
                (
                    p,
                    PollutantSummary {
                        total_ug: t.total_ug,
                        cigarettes: cig.per_pollutant.get(&p).copied(),
                        coverage: t.coverage,
                        matched_s: t.matched_s,
                        unmatched_s: t.unmatched_s,
                    },
                )
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// GeoJSON export
// ---------------------------------------------------------------------------

/// Render one pollutant's exposure over the segments as an RFC 7946
/// FeatureCollection of LineStrings (coordinates in lon, lat order).
pub fn to_geojson(segments: &[ExposureSegment], pollutant: Pollutant, scale: &BandScale) -> Value {
    let features: Vec<Value> = segments
        .iter()
        .map(|s| {
            let (concentration, band, dose_ug, station_id) = match s.pollutants.get(&pollutant) {
                Some(PollutantExposure::Matched {
                    concentration_ug_m3,
                    dose_ug,
                    station_id,
                    ..
                }) => (
                    Value::from(*concentration_ug_m3),
                    scale.band(pollutant, *concentration_ug_m3),
                    *dose_ug,
                    Value::from(station_id.as_str()),
                ),
                _ => (Value::Null, BAND_NO_DATA, 0.0, Value::Null),
            };
            serde_json::json!({
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [
                        [s.segment.start_lon, s.segment.start_lat],
                        [s.segment.end_lon, s.segment.end_lat],
                    ],
                },
                "properties": {
                    "pollutant": pollutant.name(),
                    "concentration_ug_m3": concentration,
                    "band": band,
                    "dose_ug": dose_ug,
                    "station_id": station_id,
                },
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

/// Structural RFC 7946 checks: FeatureCollection shape, Feature members,
/// LineString positions with in-range lon/lat in that order.
pub fn lint_geojson(doc: &Value) -> Result<(), String> {
    let obj = doc.as_object().ok_or("document is not an object")?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err("type must be \"FeatureCollection\"".into());
    }
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or("missing features array")?;
    for (i, f) in features.iter().enumerate() {
        let f = f.as_object().ok_or(format!("feature {i} is not an object"))?;
        if f.get("type").and_then(Value::as_str) != Some("Feature") {
            return Err(format!("feature {i}: type must be \"Feature\""));
        }
        if !f.contains_key("properties") {
            return Err(format!("feature {i}: missing properties"));
        }
        let geometry = f
            .get("geometry")
            .and_then(Value::as_object)
            .ok_or(format!("feature {i}: missing geometry"))?;
        if geometry.get("type").and_then(Value::as_str) != Some("LineString") {
            return Err(format!("feature {i}: geometry must be LineString"));
        }
        let coords = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or(format!("feature {i}: missing coordinates"))?;
        if coords.len() < 2 {
            return Err(format!("feature {i}: LineString needs at least 2 positions"));
        }
        for (j, pos) in coords.iter().enumerate() {
            let pos = pos.as_array().ok_or(format!("feature {i} pos {j}: not an array"))?;
            if pos.len() < 2 {
                return Err(format!("feature {i} pos {j}: needs lon and lat"));
            }
            let lon = pos[0].as_f64().ok_or(format!("feature {i} pos {j}: lon not a number"))?;
            let lat = pos[1].as_f64().ok_or(format!("feature {i} pos {j}: lat not a number"))?;
            if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                return Err(format!(
                    "feature {i} pos {j}: ({lon}, {lat}) out of range — lon,lat order required"
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Serialize a report to canonical JSON bytes. Fails only on non-finite
/// numbers, which upstream invariants forbid.
pub fn write_report(report: &ExposureReport) -> Result<Vec<u8>, ReportError> {
    check_report_finite(report)?;
    let value = serde_json::to_value(report)
        .map_err(|e| ReportError::SerializationFailure(e.to_string()))?;
    Ok(to_canonical_json(&value)?.into_bytes())
}

/// GeoJSON documents go through the same canonical writer.
pub fn write_geojson(doc: &Value) -> Result<Vec<u8>, ReportError> {
    Ok(to_canonical_json(doc)?.into_bytes())
}

fn check_report_finite(report: &ExposureReport) -> Result<(), ReportError> {
    let bad = |what: &str| Err(ReportError::SerializationFailure(format!("non-finite {what}")));
    for v in [report.elapsed_s, report.duration_s, report.gap_s, report.cigarettes.total] {
        if !v.is_finite() {
            return bad("duration or total");
        }
    }
    for (p, s) in &report.pollutants {
        if ![s.total_ug, s.coverage, s.matched_s, s.unmatched_s]
            .iter()
            .all(|v| v.is_finite())
            || s.cigarettes.is_some_and(|c| !c.is_finite())
        {
            return bad(&format!("value for {p}"));
        }
    }
    for seg in &report.segments {
        if !seg.duration_s.is_finite() || !seg.ventilation_l_min.is_finite() {
            return bad("segment value");
        }
        for e in seg.pollutants.values() {
            if let PollutantExposure::Matched {
                concentration_ug_m3,
                dose_ug,
                distance_km,
                time_offset_s,
                ..
            } = e
            {
                if ![*concentration_ug_m3, *dose_ug, *distance_km, *time_offset_s]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return bad("segment exposure");
                }
            }
        }
    }
    Ok(())
}

/// Canonical rendering of a JSON value: object keys sorted, arrays in order,
/// floats at 6 significant digits, compact separators, trailing newline.
pub fn to_canonical_json(value: &Value) -> Result<String, ReportError> {
    let mut out = String::new();
    write_value(value, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn write_value(value: &Value, out: &mut String) -> Result<(), ReportError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let x = n
                    .as_f64()
                    .ok_or_else(|| ReportError::SerializationFailure(format!("bad number {n}")))?;
                out.push_str(&format_sig6(x)?);
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"))
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                write_value(&map[key.as_str()], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// Fixed float formatting at 6 significant digits, trailing zeros trimmed.
fn format_sig6(x: f64) -> Result<String, ReportError> {
    if !x.is_finite() {
        return Err(ReportError::SerializationFailure(format!("non-finite number {x}")));
    }
    if x == 0.0 {
        return Ok("0".to_string());
    }
    let formatted = format!("{:.5e}", x.abs());
    let (mantissa, exponent) = formatted.split_once('e').expect("exponential form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if (-4..=15).contains(&exponent) {
        if exponent >= 5 {
            format!("{digits}{}", "0".repeat((exponent - 5) as usize))
        } else if exponent >= 0 {
            let split = (exponent + 1) as usize;
            let fraction = digits[split..].trim_end_matches('0');
            if fraction.is_empty() {
                digits[..split].to_string()
            } else {
                format!("{}.{}", &digits[..split], fraction)
            }
        } else {
            let fraction = format!("{}{}", "0".repeat((-exponent - 1) as usize), digits);
            format!("0.{}", fraction.trim_end_matches('0'))
        }
    } else {
        let fraction = digits[1..].trim_end_matches('0');
        if fraction.is_empty() {
            format!("{}e{exponent}", &digits[..1])
        } else {
            format!("{}.{fraction}e{exponent}", &digits[..1])
        }
    };
    Ok(if x < 0.0 { format!("-{body}") } else { body })
}

//! Air-quality measurement ingestion.
//!
//! Parses OpenAQ-style JSON and CSV feeds into [`Measurement`]s carrying a
//! single canonical concentration unit (µg/m³) per pollutant. Public feeds
//! are dirty: individual bad records are dropped and counted, never abort
//! a batch. Only structurally broken input is an error.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo_index::haversine_km;

/// Molar volume of an ideal gas at 25 °C and 1 atm, in L/mol.
/// This is the convention of the public reporting networks.
pub const MOLAR_VOLUME_L_MOL: f64 = 24.45;

/// Station coordinate drift beyond this is flagged when aggregating.
pub const STATION_DRIFT_KM: f64 = 0.1;

/// The closed set of pollutants this pipeline understands.
///
/// Unknown parameter strings in a feed are skipped and counted, never
/// coerced into one of these.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Pollutant {
    Co,
    No2,
    O3,
    So2,
    Pm25,
    Pm10,
    Bc,
}

impl Pollutant {
    /// All pollutants, in canonical (sorted) order.
    pub const ALL: [Pollutant; 7] = [
        Pollutant::Co,
        Pollutant::No2,
        Pollutant::O3,
        Pollutant::So2,
        Pollutant::Pm25,
        Pollutant::Pm10,
        Pollutant::Bc,
    ];

    /// Parse a feed parameter string. Returns `None` for unknown parameters.
    pub fn from_parameter(s: &str) -> Option<Pollutant> {
        match s.trim().to_ascii_lowercase().as_str() {
            "co" => Some(Pollutant::Co),
            "no2" => Some(Pollutant::No2),
            "o3" => Some(Pollutant::O3),
            "so2" => Some(Pollutant::So2),
            "pm25" | "pm2.5" => Some(Pollutant::Pm25),
            "pm10" => Some(Pollutant::Pm10),
            "bc" => Some(Pollutant::Bc),
            _ => None,
        }
    }

    /// Molecular weight in g/mol for gases; `None` for particulates,
    /// which have no defined ppm/ppb conversion.
    pub fn molecular_weight_g_mol(self) -> Option<f64> {
        match self {
            Pollutant::Co => Some(28.01),
            Pollutant::No2 => Some(46.01),
            Pollutant::O3 => Some(48.00),
            Pollutant::So2 => Some(64.07),
            Pollutant::Pm25 | Pollutant::Pm10 | Pollutant::Bc => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pollutant::Co => "co",
            Pollutant::No2 => "no2",
            Pollutant::O3 => "o3",
            Pollutant::So2 => "so2",
            Pollutant::Pm25 => "pm25",
            Pollutant::Pm10 => "pm10",
            Pollutant::Bc => "bc",
        }
    }
}

impl std::fmt::Display for Pollutant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A source concentration unit accepted by the parsers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcentrationUnit {
    UgM3,
    MgM3,
    Ppm,
    Ppb,
}

impl ConcentrationUnit {
    /// Parse a feed unit string. Returns `None` for unknown units.
    pub fn from_str_lenient(s: &str) -> Option<ConcentrationUnit> {
        match s.trim().to_ascii_lowercase().as_str() {
            "µg/m³" | "µg/m3" | "ug/m3" | "ug/m³" | "ugm3" => Some(ConcentrationUnit::UgM3),
            "mg/m³" | "mg/m3" => Some(ConcentrationUnit::MgM3),
            "ppm" => Some(ConcentrationUnit::Ppm),
            "ppb" => Some(ConcentrationUnit::Ppb),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum UnitError {
    /// ppm/ppb are mixing ratios; particulates have no molar mass to convert with.
    #[error("no gas-phase conversion defined for {pollutant}: {unit:?} unsupported")]
    UnsupportedConversion {
        pollutant: Pollutant,
        unit: ConcentrationUnit,
    },
}

/// Convert a source value to the canonical unit (µg/m³ at 25 °C, 1 atm).
///
/// Gas conversions use µg/m³ = ppm × 1000 × MW / 24.45. The conversion is
/// linear and invertible; see [`ug_m3_to_ppm`].
pub fn convert_units(
    value: f64,
    unit: ConcentrationUnit,
    pollutant: Pollutant,
) -> Result<f64, UnitError> {
    match unit {
        ConcentrationUnit::UgM3 => Ok(value),
        ConcentrationUnit::MgM3 => Ok(value * 1000.0),
        ConcentrationUnit::Ppm | ConcentrationUnit::Ppb => {
            let mw = pollutant
                .molecular_weight_g_mol()
                .ok_or(UnitError::UnsupportedConversion { pollutant, unit })?;
            let ppm = match unit {
                ConcentrationUnit::Ppb => value / 1000.0,
                _ => value,
            };
            Ok(ppm * 1000.0 * mw / MOLAR_VOLUME_L_MOL)
        }
    }
}

/// Inverse of the gas conversion: canonical µg/m³ back to ppm.
pub fn ug_m3_to_ppm(value_ug_m3: f64, pollutant: Pollutant) -> Result<f64, UnitError> {
    let mw = pollutant
        .molecular_weight_g_mol()
        .ok_or(UnitError::UnsupportedConversion {
            pollutant,
            unit: ConcentrationUnit::Ppm,
        })?;
    Ok(value_ug_m3 * MOLAR_VOLUME_L_MOL / (1000.0 * mw))
}

/// One sensor reading, normalized to canonical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub station_id: String,
    pub pollutant: Pollutant,
    /// Concentration in the canonical unit, µg/m³.
    pub value_ug_m3: f64,
    /// For CO the source mixing ratio is kept alongside the canonical value
    /// because the cigarette equivalence for CO is stated in ppm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_ppm: Option<f64>,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
}

/// A fixed-location sensor and the pollutants it has been seen reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStation {
    pub station_id: String,
    pub lat: f64,
    pub lon: f64,
    pub pollutants_reported: BTreeSet<Pollutant>,
}

/// Per-reason tally of records dropped during parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounts {
    pub unknown_parameter: usize,
    pub unsupported_unit: usize,
    pub negative_value: usize,
    pub malformed_record: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.unknown_parameter + self.unsupported_unit + self.negative_value + self.malformed_record
    }
}

/// The outcome of parsing one feed: every input record is either a
/// measurement or a counted drop.
#[derive(Debug, Clone, Default)]
pub struct IngestBatch {
    pub measurements: Vec<Measurement>,
    pub records_seen: usize,
    pub dropped: DropCounts,
}

#[derive(Debug, Error)]
pub enum AqError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("empty input")]
    EmptyInput,
}

fn in_bounds(lat: f64, lon: f64) -> bool {
    lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

/// One feed record before classification.
struct RawRecord {
    station_id: String,
    parameter: String,
    value: f64,
    unit: String,
    lat: f64,
    lon: f64,
    timestamp: DateTime<Utc>,
}

/// Turn one decoded feed record into a measurement, or classify the drop.
fn record_to_measurement(record: RawRecord, dropped: &mut DropCounts) -> Option<Measurement> {
    let Some(pollutant) = Pollutant::from_parameter(&record.parameter) else {
        dropped.unknown_parameter += 1;
        return None;
    };
    let Some(unit) = ConcentrationUnit::from_str_lenient(&record.unit) else {
        dropped.unsupported_unit += 1;
        return None;
    };
    if !record.value.is_finite() || record.value < 0.0 {
        dropped.negative_value += 1;
        return None;
    }
    if !in_bounds(record.lat, record.lon) || record.station_id.is_empty() {
        dropped.malformed_record += 1;
        return None;
    }
    let value_ug_m3 = match convert_units(record.value, unit, pollutant) {
        Ok(v) => v,
        Err(UnitError::UnsupportedConversion { .. }) => {
            dropped.unsupported_unit += 1;
            return None;
        }
    };
    let source_ppm = match (pollutant, unit) {
        (Pollutant::Co, ConcentrationUnit::Ppm) => Some(record.value),
        (Pollutant::Co, ConcentrationUnit::Ppb) => Some(record.value / 1000.0),
        _ => None,
    };
    Some(Measurement {
        station_id: record.station_id,
        pollutant,
        value_ug_m3,
        source_ppm,
        timestamp: record.timestamp,
        lat: record.lat,
        lon: record.lon,
    })
}

/// Parse an OpenAQ v2-style JSON document (object with a `results` array).
///
/// Per-record problems are dropped and counted; only a structurally broken
/// document is a [`AqError::MalformedInput`].
pub fn parse_openaq_json(bytes: &[u8]) -> Result<IngestBatch, AqError> {
    let doc: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| AqError::MalformedInput(format!("invalid JSON: {e}")))?;
    let results = doc
        .get("results")
        .and_then(|r| r.as_array())
        .ok_or_else(|| AqError::MalformedInput("missing `results` array".into()))?;

    let mut batch = IngestBatch {
        records_seen: results.len(),
        ..IngestBatch::default()
    };
    for entry in results {
        let record = (|| {
            let coords = entry.get("coordinates")?;
            Some(RawRecord {
                station_id: entry.get("location")?.as_str()?.to_owned(),
                parameter: entry.get("parameter")?.as_str()?.to_owned(),
                value: entry.get("value")?.as_f64()?,
                unit: entry.get("unit")?.as_str()?.to_owned(),
                lat: coords.get("latitude")?.as_f64()?,
                lon: coords.get("longitude")?.as_f64()?,
                timestamp: DateTime::parse_from_rfc3339(entry.get("date")?.get("utc")?.as_str()?)
                    .ok()?
                    .with_timezone(&Utc),
            })
        })();
        match record {
            Some(record) => {
                if let Some(m) = record_to_measurement(record, &mut batch.dropped) {
                    batch.measurements.push(m);
                }
            }
            None => batch.dropped.malformed_record += 1,
        }
    }
    Ok(batch)
}

/// Parse the CSV alternative: header `station_id,parameter,value,unit,lat,lon,utc`.
pub fn parse_openaq_csv(bytes: &[u8]) -> Result<IngestBatch, AqError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| AqError::MalformedInput(format!("invalid CSV: {e}")))?
        .clone();
    let expected = ["station_id", "parameter", "value", "unit", "lat", "lon", "utc"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(AqError::MalformedInput(format!(
            "unexpected CSV header {:?}, want {:?}",
            headers.iter().collect::<Vec<_>>(),
            expected
        )));
    }

    let mut batch = IngestBatch::default();
    for row in reader.records() {
        batch.records_seen += 1;
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                batch.dropped.malformed_record += 1;
                continue;
            }
        };
        let record = (|| {
            Some(RawRecord {
                station_id: row.get(0)?.to_owned(),
                parameter: row.get(1)?.to_owned(),
                value: row.get(2)?.trim().parse().ok()?,
                unit: row.get(3)?.to_owned(),
                lat: row.get(4)?.trim().parse().ok()?,
                lon: row.get(5)?.trim().parse().ok()?,
                timestamp: DateTime::parse_from_rfc3339(row.get(6)?.trim())
                    .ok()?
                    .with_timezone(&Utc),
            })
        })();
        match record {
            Some(record) => {
                if let Some(m) = record_to_measurement(record, &mut batch.dropped) {
                    batch.measurements.push(m);
                }
            }
            None => batch.dropped.malformed_record += 1,
        }
    }
    Ok(batch)
}

/// The station table derived from a measurement batch.
#[derive(Debug, Clone, Default)]
pub struct StationTable {
    /// One station per id, sorted by id.
    pub stations: Vec<SensorStation>,
    /// Ids whose coordinates drifted more than [`STATION_DRIFT_KM`] across
    /// the batch. First-seen coordinates win.
    pub drift_station_ids: Vec<String>,
}

/// Aggregate measurements into one [`SensorStation`] per station id.
pub fn build_station_table(measurements: &[Measurement]) -> Result<StationTable, AqError> {
    if measurements.is_empty() {
        return Err(AqError::EmptyInput);
    }
    let mut by_id: BTreeMap<&str, SensorStation> = BTreeMap::new();
    let mut drift: BTreeSet<String> = BTreeSet::new();
    for m in measurements {
        match by_id.get_mut(m.station_id.as_str()) {
            Some(station) => {
                station.pollutants_reported.insert(m.pollutant);
                if haversine_km(station.lat, station.lon, m.lat, m.lon) > STATION_DRIFT_KM {
                    drift.insert(m.station_id.clone());
                }
            }
            None => {
                by_id.insert(
                    m.station_id.as_str(),
                    SensorStation {
                        station_id: m.station_id.clone(),
                        lat: m.lat,
                        lon: m.lon,
                        pollutants_reported: BTreeSet::from([m.pollutant]),
                    },
                );
            }
        }
    }
    Ok(StationTable {
        stations: by_id.into_values().collect(),
        drift_station_ids: drift.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand oracle: µg/m³ = ppm × 1000 × MW / 24.45 (25 °C, 1 atm).
    const CO_UG_PER_PPM: f64 = 1145.60327198364;
    const NO2_UG_PER_PPM: f64 = 1881.799591002045;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn co_ppm_to_canonical() {
        let v = convert_units(1.0, ConcentrationUnit::Ppm, Pollutant::Co).unwrap();
        assert!(rel(v, CO_UG_PER_PPM) < 1e-12, "got {v}");
    }

    #[test]
    fn no2_ppm_to_canonical() {
        let v = convert_units(1.0, ConcentrationUnit::Ppm, Pollutant::No2).unwrap();
        assert!(rel(v, NO2_UG_PER_PPM) < 1e-12, "got {v}");
    }

    #[test]
    fn ug_m3_is_identity() {
        let v = convert_units(5.0, ConcentrationUnit::UgM3, Pollutant::Pm25).unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn ppm_for_particulates_is_unsupported() {
        let err = convert_units(1.0, ConcentrationUnit::Ppm, Pollutant::Pm10).unwrap_err();
        assert!(matches!(err, UnitError::UnsupportedConversion { .. }));
    }

    #[test]
    fn gas_conversion_round_trips() {
        for p in [Pollutant::Co, Pollutant::No2, Pollutant::O3, Pollutant::So2] {
            for x in [0.01, 1.0, 37.5, 900.0] {
                let ug = convert_units(x, ConcentrationUnit::Ppm, p).unwrap();
                let back = ug_m3_to_ppm(ug, p).unwrap();
                assert!(rel(back, x) < 1e-9, "{p}: {x} -> {ug} -> {back}");
            }
        }
    }

    fn openaq_doc(entries: &str) -> Vec<u8> {
        format!(r#"{{"results":[{entries}]}}"#).into_bytes()
    }

    fn entry(station: &str, parameter: &str, value: f64, unit: &str) -> String {
        format!(
            r#"{{"location":"{station}","parameter":"{parameter}","value":{value},"unit":"{unit}",
                "coordinates":{{"latitude":33.64,"longitude":-117.84}},
                "date":{{"utc":"2019-06-01T06:30:00Z"}}}}"#
        )
    }

    #[test]
    fn parses_pm25_entry() {
        let batch = parse_openaq_json(&openaq_doc(&entry("A", "pm25", 6.4, "µg/m³"))).unwrap();
        assert_eq!(batch.measurements.len(), 1);
        let m = &batch.measurements[0];
        assert_eq!(m.pollutant, Pollutant::Pm25);
        assert_eq!(m.value_ug_m3, 6.4);
        assert_eq!(m.source_ppm, None);
    }

    #[test]
    fn zero_ppb_converts_to_zero() {
        let batch = parse_openaq_json(&openaq_doc(&entry("A", "no2", 0.0, "ppb"))).unwrap();
        assert_eq!(batch.measurements[0].value_ug_m3, 0.0);
    }

    #[test]
    fn co_ppm_entry_keeps_source_ppm() {
        let batch = parse_openaq_json(&openaq_doc(&entry("A", "co", 1.0, "ppm"))).unwrap();
        let m = &batch.measurements[0];
        assert!(rel(m.value_ug_m3, CO_UG_PER_PPM) < 1e-12);
        assert_eq!(m.source_ppm, Some(1.0));
        // ppb feeds are mixing ratios too; the retained value is still ppm.
        let batch = parse_openaq_json(&openaq_doc(&entry("A", "co", 500.0, "ppb"))).unwrap();
        assert_eq!(batch.measurements[0].source_ppm, Some(0.5));
    }

    #[test]
    fn bad_records_are_counted_not_fatal() {
        let entries = [
            entry("A", "pm25", 6.4, "µg/m³"),
            entry("A", "radon", 1.0, "µg/m³"),  // unknown parameter
            entry("A", "pm25", -3.0, "µg/m³"),  // negative
            entry("A", "pm25", 1.0, "furlongs"), // unknown unit
            entry("A", "pm10", 2.0, "ppm"),     // unconvertible
        ];
        let batch = parse_openaq_json(&openaq_doc(&entries.join(","))).unwrap();
        assert_eq!(batch.records_seen, 5);
        assert_eq!(batch.measurements.len(), 1);
        assert_eq!(batch.dropped.unknown_parameter, 1);
        assert_eq!(batch.dropped.negative_value, 1);
        assert_eq!(batch.dropped.unsupported_unit, 2);
        assert_eq!(batch.records_seen, batch.measurements.len() + batch.dropped.total());
    }

    #[test]
    fn broken_json_is_malformed() {
        assert!(matches!(
            parse_openaq_json(b"{\"results\": 5}"),
            Err(AqError::MalformedInput(_))
        ));
        assert!(matches!(
            parse_openaq_json(b"not json"),
            Err(AqError::MalformedInput(_))
        ));
    }

    #[test]
    fn csv_parses_and_conserves_records() {
        let csv = b"station_id,parameter,value,unit,lat,lon,utc\n\
            A,pm25,6.4,ug/m3,33.64,-117.84,2019-06-01T06:30:00Z\n\
            A,bogus,1.0,ug/m3,33.64,-117.84,2019-06-01T06:30:00Z\n\
            B,co,1.0,ppm,33.7,-117.9,2019-06-01T06:30:00Z\n";
        let batch = parse_openaq_csv(csv).unwrap();
        assert_eq!(batch.records_seen, 3);
        assert_eq!(batch.measurements.len(), 2);
        assert_eq!(batch.dropped.unknown_parameter, 1);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let csv = b"id,parameter,value\nA,pm25,6.4\n";
        assert!(matches!(parse_openaq_csv(csv), Err(AqError::MalformedInput(_))));
    }

    fn meas(station: &str, pollutant: Pollutant, lat: f64, lon: f64) -> Measurement {
        Measurement {
            station_id: station.into(),
            pollutant,
            value_ug_m3: 1.0,
            source_ppm: None,
            timestamp: "2019-06-01T06:30:00Z".parse().unwrap(),
            lat,
            lon,
        }
    }

    #[test]
    fn station_table_aggregates_pollutants() {
        let ms = vec![
            meas("A", Pollutant::Pm25, 33.0, -117.0),
            meas("A", Pollutant::Co, 33.0, -117.0),
            meas("A", Pollutant::Pm25, 33.0, -117.0),
        ];
        let table = build_station_table(&ms).unwrap();
        assert_eq!(table.stations.len(), 1);
        assert_eq!(
            table.stations[0].pollutants_reported,
            BTreeSet::from([Pollutant::Co, Pollutant::Pm25])
        );
        assert!(table.drift_station_ids.is_empty());
    }

    #[test]
    fn station_drift_is_flagged_first_coords_win() {
        // ~0.0015 deg latitude is ~167 m, above the 100 m drift threshold.
        let ms = vec![
            meas("A", Pollutant::Pm25, 33.0, -117.0),
            meas("A", Pollutant::Pm25, 33.0015, -117.0),
        ];
        let table = build_station_table(&ms).unwrap();
        assert_eq!(table.stations.len(), 1);
        assert_eq!(table.stations[0].lat, 33.0);
        assert_eq!(table.drift_station_ids, vec!["A".to_string()]);
    }

    #[test]
    fn station_table_sorted_by_id() {
        let ms = vec![
            meas("B", Pollutant::Pm25, 34.0, -118.0),
            meas("A", Pollutant::Pm25, 33.0, -117.0),
        ];
        let table = build_station_table(&ms).unwrap();
        let ids: Vec<_> = table.stations.iter().map(|s| s.station_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
    }

    #[test]
    fn empty_measurements_is_an_error() {
        assert!(matches!(build_station_table(&[]), Err(AqError::EmptyInput)));
    }
}

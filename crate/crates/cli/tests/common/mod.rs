//! Fixture builders and a binary runner shared by the CLI and acceptance
//! suites.

use std::path::Path;
use std::process::Command;

/// The closed-form fixture ride: `points` samples, `interval_s` apart,
/// constant heart rate, near (33.64, -117.84) with a small westward drift so
/// map lines are not degenerate.
pub fn fixture_gpx(points: usize, interval_s: i64, hr: u32) -> String {
    let start = chrono::DateTime::parse_from_rfc3339("2019-06-01T06:00:00Z").unwrap();
    let body: String = (0..points)
        .map(|i| {
            let t = (start + chrono::Duration::seconds(interval_s * i as i64))
                .format("%Y-%m-%dT%H:%M:%SZ");
            let lon = -117.84 - 1e-6 * i as f64;
            format!(
                r#"<trkpt lat="33.64" lon="{lon}"><time>{t}</time><extensions><gpxtpx:TrackPointExtension><gpxtpx:hr>{hr}</gpxtpx:hr></gpxtpx:TrackPointExtension></extensions></trkpt>"#
            )
        })
        .collect();
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<gpx version="1.1" creator="fixture" xmlns="http://www.topografix.com/GPX/1/1" xmlns:gpxtpx="http://www.garmin.com/xmlschemas/TrackPointExtension/v1">
<trk><name>fixture-ride</name><type>cycling</type><trkseg>{body}</trkseg></trk>
</gpx>"#
    )
}

/// One OpenAQ-style entry at the fixture station.
pub fn aq_entry(station: &str, parameter: &str, value: f64, utc: &str) -> String {
    format!(
        r#"{{"location":"{station}","parameter":"{parameter}","value":{value},"unit":"µg/m³","coordinates":{{"latitude":33.64,"longitude":-117.84}},"date":{{"utc":"{utc}"}}}}"#
    )
}

pub fn aq_doc(entries: &[String]) -> String {
    format!(r#"{{"results":[{}]}}"#, entries.join(","))
}

/// Uniform PM2.5 field of 10 µg/m³ measured mid-ride.
pub fn fixture_aq() -> String {
    aq_doc(&[aq_entry("S1", "pm25", 10.0, "2019-06-01T06:30:00Z")])
}

/// Male, 70 in, resting 60 bpm, max 180 bpm: heart rate 120 sits at half
/// reserve, giving 28.5 breaths/min against a 0.876 L tidal volume.
pub fn fixture_profile() -> &'static str {
    r#"{"sex":"male","height_in":70,"age_y":30,"hr_rest_bpm":60,"hr_max_bpm":180}"#
}

#[allow(dead_code)] // not every suite reads stdout
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_exposome(dir: &Path, args: &[&str]) -> RunOutput {
    let output = Command::new(env!("CARGO_BIN_EXE_exposome"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    RunOutput {
        code: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

//! The three subcommands. Each returns the process exit code:
//! 0 = report written, 1 = input/config error (handled in main via `Err`),
//! 2 = the pipeline ran but matched nothing (report still written, coverage 0).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, Utc};

use exposome_core::{
    analyze_track, build_station_table, decode_polyline, forecast, to_geojson, write_geojson,
    write_report, AnalysisOptions, AnalysisOutcome, BandScale, CompensatedSum, ExposureSegment,
    PlannedRoute, Pollutant, StationIndex, StationTable, TransportMode,
    DEFAULT_POLYLINE_PRECISION, REPORT_SCHEMA_VERSION,
};

use crate::config::AppConfig;
use crate::io_util::{load_activity, load_measurements, load_profile, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_COVERAGE: i32 = 2;

pub struct AnalyzeArgs {
    pub activity: PathBuf,
    pub aq: PathBuf,
    pub profile: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub geojson: Option<PathBuf>,
    pub pollutant: Option<String>,
    pub config: Option<PathBuf>,
}

pub struct BatchArgs {
    pub dir: PathBuf,
    pub aq: PathBuf,
    pub profile: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

pub struct RouteArgs {
    pub polyline: Option<String>,
    pub points: Option<PathBuf>,
    pub precision: u32,
    pub mode: Option<String>,
    pub depart: Option<String>,
    pub aq: PathBuf,
    pub profile: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub geojson: Option<PathBuf>,
    pub pollutant: Option<String>,
    pub config: Option<PathBuf>,
}

fn profile_path(flag: Option<PathBuf>, config: &AppConfig) -> Result<PathBuf> {
    flag.or_else(|| config.profile.clone())
        .ok_or_else(|| anyhow!("missing --profile <json> (or `profile` in --config)"))
}

/// Build the station index from a measurement file and carry the ingest
/// bookkeeping forward as report warnings.
fn build_index(aq_path: &Path) -> Result<(StationIndex, Vec<String>)> {
    let batch = load_measurements(aq_path)?;
    let StationTable {
        stations,
        drift_station_ids,
    } = build_station_table(&batch.measurements)?;
    let index = StationIndex::build(&stations, &batch.measurements)?;
    let mut warnings = Vec::new();
    if batch.dropped.total() > 0 {
        warnings.push(format!(
            "{} of {} measurement record(s) dropped (unknown parameter {}, unsupported unit {}, negative value {}, malformed {})",
            batch.dropped.total(),
            batch.records_seen,
            batch.dropped.unknown_parameter,
            batch.dropped.unsupported_unit,
            batch.dropped.negative_value,
            batch.dropped.malformed_record,
        ));
    }
    if !drift_station_ids.is_empty() {
        warnings.push(format!(
            "station coordinates drifted more than 100 m for: {}; first-seen coordinates used",
            drift_station_ids.join(", ")
        ));
    }
    Ok((index, warnings))
}

fn pick_geojson_pollutant(
    requested: Option<&str>,
    analyzed: &BTreeMap<Pollutant, exposome_core::report::PollutantSummary>,
) -> Result<Pollutant> {
    match requested {
        Some(name) => {
            let p = Pollutant::from_parameter(name).ok_or_else(|| {
                anyhow!(
                    "unknown pollutant `{name}`; expected one of: co, no2, o3, so2, pm25, pm10, bc"
                )
            })?;
            Ok(p)
        }
        None => analyzed
            .keys()
            .copied()
            .find(|&p| p == Pollutant::Pm25)
            .or_else(|| analyzed.keys().next().copied())
            .ok_or_else(|| anyhow!("no pollutants analyzed; nothing to map")),
    }
}

fn write_outputs(
    outcome: &AnalysisOutcome,
    segments: &[ExposureSegment],
    out: &Path,
    geojson: Option<(&Path, Option<&str>, &BandScale)>,
) -> Result<()> {
    let bytes = write_report(&outcome.report)?;
    write_atomic(out, &bytes)?;
    println!("report written to {}", out.display());

    if let Some((path, pollutant, scale)) = geojson {
        let pollutant = pick_geojson_pollutant(pollutant, &outcome.report.pollutants)?;
        let doc = to_geojson(segments, pollutant, scale);
        write_atomic(path, &write_geojson(&doc)?)?;
        println!("geojson ({pollutant}) written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let config = AppConfig::load(args.config.as_ref())?;
    let profile = load_profile(&profile_path(args.profile, &config)?)?;
    let track = load_activity(&args.activity)?;
    let (index, extra_warnings) = build_index(&args.aq)?;

    let options = AnalysisOptions {
        max_gap_s: config.max_gap_s(),
        limits: config.limits(),
        pollutants: None,
        equivalence: config.equivalence_table()?,
        forecast: false,
    };
    let mut outcome = analyze_track(&track, &profile, &index, &options)?;
    outcome.report.warnings.extend(extra_warnings);

    let out = args.out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("report.json"));
    let geojson_path = args.geojson.or_else(|| config.geojson.clone());
    let pollutant = args.pollutant.or_else(|| config.pollutant.clone());
    let scale = config.band_scale()?;
    let segments = outcome.segments.clone();
    write_outputs(
        &outcome,
        &segments,
        &out,
        geojson_path.as_deref().map(|p| (p, pollutant.as_deref(), &scale)),
    )?;

    if outcome.report.coverage_is_zero() {
        eprintln!("warning: no pollutant measurements matched; coverage is zero");
        return Ok(EXIT_NO_COVERAGE);
    }
    Ok(EXIT_OK)
}

pub fn cmd_batch(args: BatchArgs) -> Result<i32> {
    let config = AppConfig::load(args.config.as_ref())?;
    let profile = load_profile(&profile_path(args.profile, &config)?)?;
    let (index, extra_warnings) = build_index(&args.aq)?;
    let out_dir = args
        .out_dir
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("reports"));

    let mut files: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .with_context(|| format!("cannot read directory {}", args.dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().is_some_and(|e| {
                    e.eq_ignore_ascii_case("gpx") || e.eq_ignore_ascii_case("json")
                })
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no activity files (*.gpx, *.json) in {}", args.dir.display());
    }

    let options = AnalysisOptions {
        max_gap_s: config.max_gap_s(),
        limits: config.limits(),
        pollutants: None,
        equivalence: config.equivalence_table()?,
        forecast: false,
    };

    let mut processed = 0usize;
    let mut failed = 0usize;
    let mut report_names: Vec<String> = Vec::new();
    let mut dose_sums: BTreeMap<Pollutant, CompensatedSum> = BTreeMap::new();
    let mut cig_sums: BTreeMap<Pollutant, CompensatedSum> = BTreeMap::new();
    let mut cig_total = CompensatedSum::default();

    for file in &files {
        let result = (|| -> Result<()> {
            let track = load_activity(file)?;
            let mut outcome = analyze_track(&track, &profile, &index, &options)?;
            outcome.report.warnings.extend(extra_warnings.iter().cloned());

            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "activity".to_string());
            let report_name = format!("{stem}.report.json");
            write_atomic(&out_dir.join(&report_name), &write_report(&outcome.report)?)?;

            for (p, summary) in &outcome.report.pollutants {
                dose_sums.entry(*p).or_default().add(summary.total_ug);
                if let Some(c) = summary.cigarettes {
                    cig_sums.entry(*p).or_default().add(c);
                }
            }
            cig_total.add(outcome.report.cigarettes.total);
            report_names.push(report_name);
            Ok(())
        })();
        match result {
            Ok(()) => processed += 1,
            Err(e) => {
                failed += 1;
                eprintln!("skipping {}: {e:#}", file.display());
            }
        }
    }

    if processed == 0 {
        bail!("all {failed} activity file(s) failed");
    }

    let pollutants: serde_json::Map<String, serde_json::Value> = dose_sums
        .iter()
        .map(|(p, dose)| {
            let mut entry = serde_json::Map::new();
            entry.insert("total_ug".into(), dose.total().into());
            if let Some(cig) = cig_sums.get(p) {
                entry.insert("cigarettes".into(), cig.total().into());
            }
            (p.name().to_string(), serde_json::Value::Object(entry))
        })
        .collect();
    let aggregate = serde_json::json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "aggregate": true,
        "activities_processed": processed,
        "activities_failed": failed,
        "pollutants": pollutants,
        "cigarettes_total": cig_total.total(),
        "reports": report_names,
    });
    let aggregate_path = out_dir.join("aggregate.json");
    write_atomic(
        &aggregate_path,
        exposome_core::to_canonical_json(&aggregate)?.as_bytes(),
    )?;
    println!(
        "{processed} report(s) plus aggregate written to {} ({failed} failed)",
        out_dir.display()
    );
    Ok(EXIT_OK)
}

fn parse_mode(s: &str) -> Result<TransportMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "walk" => Ok(TransportMode::Walk),
        "run" => Ok(TransportMode::Run),
        "cycle" => Ok(TransportMode::Cycle),
        "drive" => Ok(TransportMode::Drive),
        other => bail!("unknown mode `{other}`; expected one of: walk, run, cycle, drive"),
    }
}

fn parse_depart(s: &str) -> Result<DateTime<Utc>> {
    Ok(DateTime::parse_from_rfc3339(s.trim())
        .map_err(|e| anyhow!("invalid --depart `{s}` (want RFC 3339, e.g. 2019-06-01T06:00:00Z): {e}"))?
        .with_timezone(&Utc))
}

/// The route JSON wire shape: `points` or `polyline` plus optional
/// `precision`, `mode`, `departure`. A bare `[[lat, lon], …]` array is also
/// accepted when mode and departure come from flags.
#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    points: Option<Vec<(f64, f64)>>,
    polyline: Option<String>,
    precision: Option<u32>,
    mode: Option<TransportMode>,
    departure: Option<DateTime<Utc>>,
}

pub fn cmd_route(args: RouteArgs) -> Result<i32> {
    let config = AppConfig::load(args.config.as_ref())?;
    let profile = load_profile(&profile_path(args.profile, &config)?)?;
    let (index, extra_warnings) = build_index(&args.aq)?;

    if !(args.precision == 5 || args.precision == 6) {
        bail!("--precision must be 5 or 6, got {}", args.precision);
    }
    let mut file_mode: Option<TransportMode> = None;
    let mut file_departure: Option<DateTime<Utc>> = None;
    let points: Vec<(f64, f64)> = match (&args.polyline, &args.points) {
        (Some(_), Some(_)) => bail!("pass either --polyline or --points, not both"),
        (Some(encoded), None) => decode_polyline(encoded, args.precision)?,
        (None, Some(path)) => {
            let bytes = std::fs::read(path)
                .with_context(|| format!("cannot read route {}", path.display()))?;
            if let Ok(bare) = serde_json::from_slice::<Vec<(f64, f64)>>(&bytes) {
                bare
            } else {
                let route: RouteFile = serde_json::from_slice(&bytes)
                    .with_context(|| format!("invalid route JSON {}", path.display()))?;
                file_mode = route.mode;
                file_departure = route.departure;
                match (route.points, route.polyline) {
                    (Some(points), None) => points,
                    (None, Some(encoded)) => decode_polyline(
                        &encoded,
                        route.precision.unwrap_or(DEFAULT_POLYLINE_PRECISION),
                    )?,
                    _ => bail!("route JSON needs exactly one of `points` or `polyline`"),
                }
            }
        }
        (None, None) => bail!("missing route: pass --polyline <str> or --points <file>"),
    };

    let mode = match &args.mode {
        Some(s) => parse_mode(s)?,
        None => file_mode.ok_or_else(|| anyhow!("missing --mode (walk|run|cycle|drive)"))?,
    };
    let departure = match &args.depart {
        Some(s) => parse_depart(s)?,
        None => file_departure.ok_or_else(|| anyhow!("missing --depart <RFC 3339 UTC>"))?,
    };

    let route = PlannedRoute::new(points, mode, departure)?;
    let modes = config.mode_profiles()?;
    let mut outcome = forecast(
        &route,
        &profile,
        &index,
        &config.equivalence_table()?,
        &modes,
        config.limits(),
    )?;
    outcome.report.warnings.extend(extra_warnings);

    let out = args.out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("forecast.json"));
    let geojson_path = args.geojson.or_else(|| config.geojson.clone());
    let pollutant = args.pollutant.or_else(|| config.pollutant.clone());
    let scale = config.band_scale()?;
    let segments = outcome.segments.clone();
    write_outputs(
        &outcome,
        &segments,
        &out,
        geojson_path.as_deref().map(|p| (p, pollutant.as_deref(), &scale)),
    )?;

    if outcome.report.coverage_is_zero() {
        eprintln!("warning: no pollutant measurements matched the planned route; coverage is zero");
        return Ok(EXIT_NO_COVERAGE);
    }
    Ok(EXIT_OK)
}

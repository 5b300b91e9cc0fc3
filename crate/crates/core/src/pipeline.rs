//! End-to-end analysis: track → segments → ventilation → spatiotemporal
//! join → dose totals → cigarette equivalents → report.
//!
//! The route forecast funnels through this same function, so a forecast and
//! an equivalent recorded activity produce identical numbers.

use crate::activity::{segmentize, ActivityTrack, DEFAULT_MAX_GAP_S};
use crate::aq::Pollutant;
use crate::cig_equiv::{cigarettes, EquivalenceTable};
use crate::dose::{integrate, CompensatedSum, ExposureSegment};
use crate::geo_index::{QueryLimits, StationIndex};
use crate::physio::{tidal_volume_l, ventilation_series, PhysioError, PhysioProfile, VentilationSource};
use crate::report::{
    CigaretteSummary, ConfigEcho, ExposureReport, ProfileEcho, VentilationSummary,
    REPORT_SCHEMA_VERSION,
};

/// Knobs for one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub max_gap_s: f64,
    pub limits: QueryLimits,
    /// Pollutants to join. `None` analyzes everything the index reports.
    pub pollutants: Option<Vec<Pollutant>>,
    pub equivalence: EquivalenceTable,
    /// Marks the report as a prediction rather than a recorded activity.
    pub forecast: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            max_gap_s: DEFAULT_MAX_GAP_S,
            limits: QueryLimits::default(),
            pollutants: None,
            equivalence: EquivalenceTable::default_table(),
            forecast: false,
        }
    }
}

/// A finished analysis: the report plus the joined segments backing it
/// (the segments feed the GeoJSON export).
#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub report: ExposureReport,
    pub segments: Vec<ExposureSegment>,
}

/// Run the full pipeline over one track.
pub fn analyze_track(
    track: &ActivityTrack,
    profile: &PhysioProfile,
    index: &StationIndex,
    options: &AnalysisOptions,
) -> Result<AnalysisOutcome, PhysioError> {
    let tidal = tidal_volume_l(profile)?;
    let ventilation = ventilation_series(track, profile)?;
    let segmentation = segmentize(track, options.max_gap_s);

    let pollutants: Vec<Pollutant> = match &options.pollutants {
        Some(list) => list.clone(),
        None => index.pollutants(),
    };

    let analysis = integrate(&segmentation, &ventilation, index, &pollutants, options.limits);
    let cig = cigarettes(&analysis.totals, &options.equivalence);

    let mut mean_vent = CompensatedSum::default();
    let mut from_hr = 0usize;
    let mut from_power = 0usize;
    let mut from_rest = 0usize;
    for s in &ventilation {
        mean_vent.add(s.ventilation_l_min);
        match s.source {
            VentilationSource::HeartRate => from_hr += 1,
            VentilationSource::Power => from_power += 1,
            VentilationSource::RestFallback => from_rest += 1,
        }
    }

    let mut warnings = Vec::new();
    if pollutants.is_empty() {
        warnings.push("no pollutants available to analyze: the station index is empty".to_string());
    }
    if from_rest > 0 {
        warnings.push(format!(
            "{from_rest} point(s) had neither heart rate nor power; resting breathing rate assumed"
        ));
    }
    if segmentation.gap_count > 0 {
        warnings.push(format!(
            "{} recording gap(s) totalling {} s excluded from the dose integral",
            segmentation.gap_count, segmentation.gap_s
        ));
    }
    if !cig.uncovered.is_empty() {
        let names: Vec<&str> = cig.uncovered.iter().map(|p| p.name()).collect();
        warnings.push(format!(
            "no cigarette equivalence is defined for: {}; their dose contributes 0 to the total",
            names.join(", ")
        ));
    }

    let report = ExposureReport {
        schema_version: REPORT_SCHEMA_VERSION,
        forecast: options.forecast,
        activity_id: track.activity_id.clone(),
        sport: track.sport,
        profile: ProfileEcho::new(profile, tidal),
        config: ConfigEcho {
            v_day_m3: options.equivalence.v_day_m3,
            max_distance_km: options.limits.max_distance_km,
            max_time_offset_s: options.limits.max_time_offset_s,
            max_gap_s: options.max_gap_s,
        },
        elapsed_s: track.elapsed_s(),
        duration_s: analysis.totals.duration_s,
        gap_s: analysis.totals.gap_s,
        ventilation: VentilationSummary {
            mean_l_min: if ventilation.is_empty() {
                0.0
            } else {
                mean_vent.total() / ventilation.len() as f64
            },
            samples_from_heart_rate: from_hr,
            samples_from_power: from_power,
            samples_from_rest_fallback: from_rest,
        },
        pollutants: ExposureReport::summarize_pollutants(&analysis.totals, &cig),
        cigarettes: CigaretteSummary {
            total: cig.total,
            uncovered: cig.uncovered,
        },
        segments: analysis
            .segments
            .iter()
            .map(|s| crate::report::SegmentRecord {
                mid_time: s.segment.mid_time,
                duration_s: s.segment.duration_s,
                start: crate::report::LatLon {
                    lat: s.segment.start_lat,
                    lon: s.segment.start_lon,
                },
                end: crate::report::LatLon {
                    lat: s.segment.end_lat,
                    lon: s.segment.end_lon,
                },
                ventilation_l_min: s.ventilation_l_min,
                pollutants: s.pollutants.clone(),
            })
            .collect(),
        warnings,
    };

    let mut report = report;
    if !report.pollutants.is_empty() && report.coverage_is_zero() {
        report
            .warnings
            .push("no measurements matched within the configured windows; all doses are zero".to_string());
    }

    Ok(AnalysisOutcome {
        report,
        segments: analysis.segments,
    })
}

//! Geospatial exposure analytics: fuse GPS-tracked activities with public
//! air-quality sensor streams to estimate per-pollutant inhaled dose, score
//! it in cigarette equivalents, and forecast exposure for planned routes.
//!
//! The pipeline, front to back:
//! - [`activity`] — GPX / Strava-stream parsing into validated tracks and segments
//! - [`aq`] — OpenAQ-style JSON/CSV ingestion with canonical-unit normalization
//! - [`geo_index`] — exact nearest-station / nearest-in-time spatiotemporal join
//! - [`physio`] — tidal volume and heart-rate-driven minute ventilation
//! - [`dose`] — concentration × ventilation × time integration
//! - [`cig_equiv`] — per-pollutant cigarette-equivalent conversion
//! - [`route`] — polyline codec and planned-route forecasting
//! - [`report`] — canonical JSON reports and GeoJSON exposure maps
//! - [`net`] — pluggable measurement/route sources (fixtures and HTTP)
//!
//! [`pipeline::analyze_track`] wires the whole thing together; the CLI and
//! the route forecast are both thin layers over it.

pub mod activity;
pub mod aq;
pub mod cig_equiv;
pub mod dose;
pub mod geo_index;
pub mod net;
pub mod physio;
pub mod pipeline;
pub mod report;
pub mod route;

pub use activity::{
    parse_gpx, parse_strava_streams, segmentize, ActivityError, ActivityTrack, Segment,
    Segmentation, Sport, TrackPoint, DEFAULT_MAX_GAP_S,
};
pub use aq::{
    build_station_table, convert_units, parse_openaq_csv, parse_openaq_json, ug_m3_to_ppm,
    AqError, ConcentrationUnit, IngestBatch, Measurement, Pollutant, SensorStation, StationTable,
    UnitError,
};
pub use cig_equiv::{cigarettes, CigaretteReport, EquivalenceTable, DEFAULT_V_DAY_M3};
pub use dose::{
    integrate, reduce_totals, segment_dose_ug, CompensatedSum, DoseTotals, ExposureAnalysis,
    ExposureSegment, PollutantExposure, PollutantTotals,
};
pub use geo_index::{
    haversine_km, GeoIndexError, JoinResult, NoMatchReason, QueryLimits, QueryResult,
    StationIndex, DEFAULT_MAX_DISTANCE_KM, DEFAULT_MAX_TIME_OFFSET_S, EARTH_RADIUS_KM,
};
pub use physio::{
    breathing_rate, breathing_rate_from_power, tidal_volume_l, ventilation_series, PhysioError,
    PhysioProfile, ProfileConfig, Sex, VentilationSample, VentilationSource,
};
pub use pipeline::{analyze_track, AnalysisOptions, AnalysisOutcome};
pub use report::{
    lint_geojson, to_canonical_json, to_geojson, write_geojson, write_report, BandScale,
    ExposureReport, ReportError, REPORT_SCHEMA_VERSION,
};
pub use route::{
    decode_polyline, default_mode_profiles, encode_polyline, forecast, ModeProfile, PlannedRoute,
    RouteError, TransportMode, DEFAULT_POLYLINE_PRECISION,
};

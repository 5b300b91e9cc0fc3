//! A forecast must be the same computation as analyzing a recorded activity
//! with the matching constant effort: same geometry, same field, same
//! numbers. The synthetic comparison track here is built independently of
//! the forecast code path (own leg timing, own heart-rate inversion).

use chrono::{DateTime, Duration, Utc};
use std::collections::BTreeSet;

use exposome_core::{
    analyze_track, default_mode_profiles, forecast, haversine_km, AnalysisOptions, ActivityTrack,
    EquivalenceTable, Measurement, PhysioProfile, PlannedRoute, Pollutant, QueryLimits,
    SensorStation, Sex, Sport, StationIndex, TrackPoint, TransportMode,
};

fn profile() -> PhysioProfile {
    PhysioProfile {
        sex: Sex::Male,
        height_in: 70.0,
        age_y: 30.0,
        weight_kg: None,
        hr_rest_bpm: 60.0,
        hr_max_bpm: 180.0,
        br_rest: 12.0,
        br_max: 45.0,
        ftp_w: 200.0,
        tidal_volume_override_l: None,
    }
}

/// A uniform field: one station at the route start reporting PM2.5 and NO2
/// around the departure time.
fn uniform_index(lat: f64, lon: f64, when: &str) -> StationIndex {
    let stations = [SensorStation {
        station_id: "S".into(),
        lat,
        lon,
        pollutants_reported: BTreeSet::from([Pollutant::Pm25, Pollutant::No2]),
    }];
    let ts: DateTime<Utc> = when.parse().unwrap();
    let ms: Vec<Measurement> = [(Pollutant::Pm25, 10.0), (Pollutant::No2, 30.0)]
        .into_iter()
        .map(|(pollutant, value_ug_m3)| Measurement {
            station_id: "S".into(),
            pollutant,
            value_ug_m3,
            source_ppm: None,
            timestamp: ts,
            lat,
            lon,
        })
        .collect();
    StationIndex::build(&stations, &ms).unwrap()
}

fn route_points() -> Vec<(f64, f64)> {
    // Seven points, ~200 m legs heading north: 40 s per leg at cycle speed.
    (0..7).map(|i| (33.64 + 0.0018 * i as f64, -117.84)).collect()
}

/// Independent reconstruction of the constant-effort activity the forecast
/// is defined to equal.
fn equivalent_recorded_track(
    points: &[(f64, f64)],
    departure: DateTime<Utc>,
    speed_kmh: f64,
    effort: f64,
    profile: &PhysioProfile,
) -> ActivityTrack {
    let hr = profile.hr_rest_bpm + effort * (profile.hr_max_bpm - profile.hr_rest_bpm);
    let mut elapsed = 0.0f64;
    let mut track_points = Vec::new();
    for (i, &(lat, lon)) in points.iter().enumerate() {
        if i > 0 {
            let (plat, plon) = points[i - 1];
            elapsed += haversine_km(plat, plon, lat, lon) / speed_kmh * 3600.0;
        }
        track_points.push(TrackPoint {
            timestamp: departure + Duration::nanoseconds((elapsed * 1e9).round() as i64),
            lat,
            lon,
            elevation_m: None,
            heart_rate_bpm: Some(hr),
            power_w: None,
        });
    }
    ActivityTrack::from_points("recorded-equivalent".into(), Sport::Ride, track_points).unwrap()
}

#[test]
fn forecast_equals_constant_effort_activity() {
    let departure: DateTime<Utc> = "2019-06-01T06:00:00Z".parse().unwrap();
    let profile = profile();
    let index = uniform_index(33.64, -117.84, "2019-06-01T06:05:00Z");
    let modes = default_mode_profiles();
    let table = EquivalenceTable::default_table();

    let route = PlannedRoute::new(route_points(), TransportMode::Cycle, departure).unwrap();
    let forecasted = forecast(&route, &profile, &index, &table, &modes, QueryLimits::default()).unwrap();
    assert!(forecasted.report.forecast);

    let cycle = modes[&TransportMode::Cycle];
    let track = equivalent_recorded_track(
        &route.points,
        departure,
        cycle.speed_kmh,
        cycle.effort_fraction,
        &profile,
    );
    let options = AnalysisOptions {
        max_gap_s: f64::INFINITY,
        equivalence: table,
        ..AnalysisOptions::default()
    };
    let recorded = analyze_track(&track, &profile, &index, &options).unwrap();

    for p in [Pollutant::Pm25, Pollutant::No2] {
        let f = forecasted.report.pollutants[&p].total_ug;
        let r = recorded.report.pollutants[&p].total_ug;
        assert!(f > 0.0);
        assert!(((f - r) / r).abs() < 1e-9, "{p}: forecast {f} vs recorded {r}");
    }
    let (fc, rc) = (forecasted.report.cigarettes.total, recorded.report.cigarettes.total);
    assert!(((fc - rc) / rc).abs() < 1e-9, "cigarettes: {fc} vs {rc}");
    assert_eq!(forecasted.report.duration_s, recorded.report.duration_s);
}

#[test]
fn forecast_dose_monotone_in_route_length() {
    let departure: DateTime<Utc> = "2019-06-01T06:00:00Z".parse().unwrap();
    let profile = profile();
    let index = uniform_index(33.64, -117.84, "2019-06-01T06:05:00Z");
    let modes = default_mode_profiles();
    let table = EquivalenceTable::default_table();

    let mut previous = 0.0f64;
    for n in [3usize, 5, 7] {
        let points: Vec<(f64, f64)> =
            (0..n).map(|i| (33.64 + 0.0018 * i as f64, -117.84)).collect();
        let route = PlannedRoute::new(points, TransportMode::Run, departure).unwrap();
        let outcome = forecast(&route, &profile, &index, &table, &modes, QueryLimits::default()).unwrap();
        let total = outcome.report.pollutants[&Pollutant::Pm25].total_ug;
        assert!(total > previous, "length {n}: {total} !> {previous}");
        previous = total;
    }
}

#[test]
fn higher_effort_at_equal_speed_never_lowers_dose() {
    // Effort monotonicity is an equal-speed statement: a slower low-effort
    // mode can still out-inhale a faster hard one by spending longer in the
    // plume, which is why speeds are held fixed here.
    let departure: DateTime<Utc> = "2019-06-01T06:00:00Z".parse().unwrap();
    let profile = profile();
    let index = uniform_index(33.64, -117.84, "2019-06-01T06:05:00Z");
    let table = EquivalenceTable::default_table();

    let mut previous = -1.0f64;
    for effort in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let mut modes = default_mode_profiles();
        modes.insert(
            TransportMode::Cycle,
            exposome_core::ModeProfile {
                speed_kmh: 20.0,
                effort_fraction: effort,
            },
        );
        let route = PlannedRoute::new(route_points(), TransportMode::Cycle, departure).unwrap();
        let outcome = forecast(&route, &profile, &index, &table, &modes, QueryLimits::default()).unwrap();
        let total = outcome.report.pollutants[&Pollutant::Pm25].total_ug;
        assert!(total >= previous, "effort {effort}: {total} < {previous}");
        previous = total;
    }
}

#[test]
fn departure_outside_data_window_gives_zero_coverage() {
    let departure: DateTime<Utc> = "2019-08-01T06:00:00Z".parse().unwrap(); // two months later
    let profile = profile();
    let index = uniform_index(33.64, -117.84, "2019-06-01T06:05:00Z");
    let route = PlannedRoute::new(route_points(), TransportMode::Cycle, departure).unwrap();
    let outcome = forecast(
        &route,
        &profile,
        &index,
        &EquivalenceTable::default_table(),
        &default_mode_profiles(),
        QueryLimits::default(),
    )
    .unwrap();
    assert!(outcome.report.coverage_is_zero());
    assert_eq!(outcome.report.cigarettes.total, 0.0);
}

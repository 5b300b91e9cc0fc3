//! Inhaled-dose integration: concentration × ventilation × time, summed per
//! pollutant over the activity's segments.
//!
//! Units are fixed end to end: µg/m³ × (L/min ÷ 1000) × (s ÷ 60) = µg.
//! Totals use compensated summation so results do not depend on segment
//! processing order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::activity::{Segment, Segmentation};
use crate::aq::Pollutant;
use crate::geo_index::{NoMatchReason, QueryLimits, QueryResult, StationIndex};
use crate::physio::VentilationSample;

/// Neumaier compensated summation. Keeps totals reproducible to ~1 ulp
/// regardless of term order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Inhaled mass for one segment, in µg.
/// Bilinear in concentration and ventilation; zero if either factor or the
/// duration is zero.
pub fn segment_dose_ug(concentration_ug_m3: f64, ventilation_l_min: f64, duration_s: f64) -> f64 {
    concentration_ug_m3 * (ventilation_l_min / 1000.0) * (duration_s / 60.0)
}

/// Join outcome for one pollutant on one segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PollutantExposure {
    Matched {
        concentration_ug_m3: f64,
        dose_ug: f64,
        station_id: String,
        distance_km: f64,
        time_offset_s: f64,
    },
    Unmatched {
        reason: NoMatchReason,
    },
}

impl PollutantExposure {
    pub fn dose_ug(&self) -> f64 {
        match self {
            PollutantExposure::Matched { dose_ug, .. } => *dose_ug,
            PollutantExposure::Unmatched { .. } => 0.0,
        }
    }

    pub fn is_matched(&self) -> bool {
        matches!(self, PollutantExposure::Matched { .. })
    }
}

/// One track segment with its ventilation and per-pollutant join results.
#[derive(Debug, Clone, Serialize)]
pub struct ExposureSegment {
    pub segment: Segment,
    pub ventilation_l_min: f64,
    pub pollutants: BTreeMap<Pollutant, PollutantExposure>,
}

/// Per-pollutant totals over an activity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PollutantTotals {
    pub total_ug: f64,
    pub matched_s: f64,
    pub unmatched_s: f64,
    /// matched duration / total segment duration; 0 when nothing matched.
    pub coverage: f64,
}

/// Dose totals plus the duration bookkeeping behind the coverage fractions.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DoseTotals {
    pub per_pollutant: BTreeMap<Pollutant, PollutantTotals>,
    /// Sum of kept segment durations, seconds.
    pub duration_s: f64,
    /// Dropped gap time from segmentation, seconds.
    pub gap_s: f64,
}

/// Result of joining a segmented activity against the station index.
#[derive(Debug, Clone, Default)]
pub struct ExposureAnalysis {
    pub segments: Vec<ExposureSegment>,
    pub totals: DoseTotals,
}

/// Ventilation for a segment: mean of its endpoint samples
/// (piecewise-constant within the segment).
fn segment_ventilation(ventilation: &[VentilationSample], segment: &Segment) -> f64 {
    let a = ventilation[segment.start_index].ventilation_l_min;
    let b = ventilation[segment.start_index + 1].ventilation_l_min;
    (a + b) / 2.0
}

/// Join every segment against the index for every listed pollutant and
/// reduce totals. Unmatched pollutants contribute zero dose and shrink the
/// coverage fraction; measurements are never extrapolated past the windows.
pub fn integrate(
    segmentation: &Segmentation,
    ventilation: &[VentilationSample],
    index: &StationIndex,
    pollutants: &[Pollutant],
    limits: QueryLimits,
) -> ExposureAnalysis {
    let segments: Vec<ExposureSegment> = segmentation
        .segments
        .iter()
        .map(|seg| {
            let vent = segment_ventilation(ventilation, seg);
            let pollutants = pollutants
                .iter()
                .map(|&p| {
                    let exposure = match index.query(seg.mid_lat, seg.mid_lon, seg.mid_time, p, limits)
                    {
                        QueryResult::Matched(j) => PollutantExposure::Matched {
                            concentration_ug_m3: j.measurement.value_ug_m3,
                            dose_ug: segment_dose_ug(
                                j.measurement.value_ug_m3,
                                vent,
                                seg.duration_s,
                            ),
                            station_id: j.station_id,
                            distance_km: j.distance_km,
                            time_offset_s: j.time_offset_s,
                        },
                        QueryResult::NoMatch(reason) => PollutantExposure::Unmatched { reason },
                    };
                    (p, exposure)
                })
                .collect();
            ExposureSegment {
                segment: *seg,
                ventilation_l_min: vent,
                pollutants,
            }
        })
        .collect();

    let totals = reduce_totals(&segments, segmentation.gap_s, pollutants);
    ExposureAnalysis { segments, totals }
}

/// Reduce joined segments into per-pollutant totals. Order-independent to
/// ~1 ulp thanks to compensated sums.
pub fn reduce_totals(
    segments: &[ExposureSegment],
    gap_s: f64,
    pollutants: &[Pollutant],
) -> DoseTotals {
    let mut duration = CompensatedSum::default();
    for s in segments {
        duration.add(s.segment.duration_s);
    }
    let duration_s = duration.total();

    let mut per_pollutant = BTreeMap::new();
    for &p in pollutants {
        let mut dose = CompensatedSum::default();
        let mut matched = CompensatedSum::default();
        let mut unmatched = CompensatedSum::default();
        for s in segments {
            match s.pollutants.get(&p) {
                Some(e) if e.is_matched() => {
                    dose.add(e.dose_ug());
                    matched.add(s.segment.duration_s);
                }
                _ => unmatched.add(s.segment.duration_s),
            }
        }
        let matched_s = matched.total();
        per_pollutant.insert(
            p,
            PollutantTotals {
                total_ug: dose.total(),
                matched_s,
                unmatched_s: unmatched.total(),
                coverage: if duration_s > 0.0 { matched_s / duration_s } else { 0.0 },
            },
        );
    }

    DoseTotals {
        per_pollutant,
        duration_s,
        gap_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{ActivityTrack, Sport, TrackPoint};
    use crate::aq::{Measurement, SensorStation};
    use crate::physio::{ventilation_series, PhysioProfile, Sex};
    use chrono::{DateTime, Duration, Utc};
    use std::collections::BTreeSet;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn segment_dose_hand_value() {
        // 6.4 µg/m³ × 25 L/min × 1 h: 6.4 × 0.025 × 60 = 9.6 µg.
        let d = segment_dose_ug(6.4, 25.0, 3600.0);
        assert!(rel(d, 9.6) < 1e-12, "got {d}");
    }

    #[test]
    fn segment_dose_zero_factors() {
        assert_eq!(segment_dose_ug(0.0, 25.0, 3600.0), 0.0);
        assert_eq!(segment_dose_ug(6.4, 25.0, 0.0), 0.0);
        assert_eq!(segment_dose_ug(6.4, 0.0, 3600.0), 0.0);
    }

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

    /// The closed-form fixture: 60 one-minute segments, hr 120, male 70 in,
    /// uniform PM2.5 10 µg/m³.
    fn fixture() -> (ActivityTrack, StationIndex) {
        let start: DateTime<Utc> = "2019-06-01T06:00:00Z".parse().unwrap();
        let points = (0..=60)
            .map(|i| TrackPoint {
                timestamp: start + Duration::seconds(60 * i),
                lat: 33.64,
                lon: -117.84,
                elevation_m: None,
                heart_rate_bpm: Some(120.0),
                power_w: None,
            })
            .collect();
        let track = ActivityTrack::from_points("fixture".into(), Sport::Ride, points).unwrap();
        let stations = [SensorStation {
            station_id: "S".into(),
            lat: 33.64,
            lon: -117.84,
            pollutants_reported: BTreeSet::from([Pollutant::Pm25]),
        }];
        let ms = [Measurement {
            station_id: "S".into(),
            pollutant: Pollutant::Pm25,
            value_ug_m3: 10.0,
            source_ppm: None,
            timestamp: "2019-06-01T06:30:00Z".parse().unwrap(),
            lat: 33.64,
            lon: -117.84,
        }];
        (track, StationIndex::build(&stations, &ms).unwrap())
    }

    #[test]
    fn fixture_ride_matches_closed_form() {
        let (track, index) = fixture();
        let seg = crate::activity::segmentize(&track, 60.0);
        let vent = ventilation_series(&track, &profile()).unwrap();
        let analysis = integrate(&seg, &vent, &index, &[Pollutant::Pm25], QueryLimits::default());
        let totals = &analysis.totals.per_pollutant[&Pollutant::Pm25];
        // Hand computation: 10 × (28.5 × 0.876 / 1000) × 60 = 14.9796 µg.
        assert!(rel(totals.total_ug, 14.9796) < 1e-9, "got {}", totals.total_ug);
        assert_eq!(totals.coverage, 1.0);
        assert_eq!(analysis.totals.duration_s, 3600.0);
    }

    #[test]
    fn additivity_two_equal_segments() {
        let (track, index) = fixture();
        let seg = crate::activity::segmentize(&track, 60.0);
        let vent = ventilation_series(&track, &profile()).unwrap();
        let analysis = integrate(&seg, &vent, &index, &[Pollutant::Pm25], QueryLimits::default());
        let one = analysis.segments[0].pollutants[&Pollutant::Pm25].dose_ug();
        let two = reduce_totals(&analysis.segments[..2], 0.0, &[Pollutant::Pm25]);
        assert!(rel(two.per_pollutant[&Pollutant::Pm25].total_ug, 2.0 * one) < 1e-12);
    }

    #[test]
    fn doubling_concentration_doubles_totals_exactly() {
        let (track, index) = fixture();
        let seg = crate::activity::segmentize(&track, 60.0);
        let vent = ventilation_series(&track, &profile()).unwrap();
        let base = integrate(&seg, &vent, &index, &[Pollutant::Pm25], QueryLimits::default());

        // Same fixture with every concentration ×2.
        let stations = [SensorStation {
            station_id: "S".into(),
            lat: 33.64,
            lon: -117.84,
            pollutants_reported: BTreeSet::from([Pollutant::Pm25]),
        }];
        let ms = [Measurement {
            station_id: "S".into(),
            pollutant: Pollutant::Pm25,
            value_ug_m3: 20.0,
            source_ppm: None,
            timestamp: "2019-06-01T06:30:00Z".parse().unwrap(),
            lat: 33.64,
            lon: -117.84,
        }];
        let doubled_index = StationIndex::build(&stations, &ms).unwrap();
        let doubled = integrate(&seg, &vent, &doubled_index, &[Pollutant::Pm25], QueryLimits::default());
        assert_eq!(
            doubled.per_total(Pollutant::Pm25),
            2.0 * base.per_total(Pollutant::Pm25)
        );
    }

    impl ExposureAnalysis {
        fn per_total(&self, p: Pollutant) -> f64 {
            self.totals.per_pollutant[&p].total_ug
        }
    }

    #[test]
    fn unmatched_contributes_zero_and_reduces_coverage() {
        let (track, index) = fixture();
        let seg = crate::activity::segmentize(&track, 60.0);
        let vent = ventilation_series(&track, &profile()).unwrap();
        // O3 has no stations: everything unmatched.
        let analysis = integrate(
            &seg,
            &vent,
            &index,
            &[Pollutant::Pm25, Pollutant::O3],
            QueryLimits::default(),
        );
        let o3 = &analysis.totals.per_pollutant[&Pollutant::O3];
        assert_eq!(o3.total_ug, 0.0);
        assert_eq!(o3.coverage, 0.0);
        assert_eq!(o3.unmatched_s, 3600.0);
        // Conservation per pollutant: matched + unmatched = duration.
        for totals in analysis.totals.per_pollutant.values() {
            assert_eq!(totals.matched_s + totals.unmatched_s, analysis.totals.duration_s);
        }
    }

    #[test]
    fn permuting_segments_leaves_totals_stable() {
        let (track, index) = fixture();
        let seg = crate::activity::segmentize(&track, 60.0);
        let vent = ventilation_series(&track, &profile()).unwrap();
        let analysis = integrate(&seg, &vent, &index, &[Pollutant::Pm25], QueryLimits::default());
        let forward = reduce_totals(&analysis.segments, seg.gap_s, &[Pollutant::Pm25]);
        let mut reversed = analysis.segments.clone();
        reversed.reverse();
        let backward = reduce_totals(&reversed, seg.gap_s, &[Pollutant::Pm25]);
        let a = forward.per_pollutant[&Pollutant::Pm25].total_ug;
        let b = backward.per_pollutant[&Pollutant::Pm25].total_ug;
        assert!(rel(a, b) < 1e-12);
    }
}

//! Spatiotemporal join: nearest station reporting a pollutant, and that
//! station's measurement nearest in time.
//!
//! Stations are embedded as 3-D unit vectors and indexed with a k-d tree, so
//! queries near the antimeridian or poles behave exactly like anywhere else.
//! The index is exact: query results are defined to equal a brute-force scan
//! under the lexicographic order (distance, |Δt|, later timestamp,
//! station id). Great-circle distance is monotone in chord distance, which
//! lets the tree prune in Euclidean space while the final comparisons use
//! [`haversine_km`] values identical to what a scan would compute.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aq::{Measurement, Pollutant, SensorStation};

/// Mean Earth radius in kilometers (IUGG R1).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default search windows: beyond these the nearest-sensor approximation is
/// too wrong to report as a match, so gaps are surfaced instead.
pub const DEFAULT_MAX_DISTANCE_KM: f64 = 50.0;
pub const DEFAULT_MAX_TIME_OFFSET_S: f64 = 5400.0;

/// Great-circle distance between two lat/lon points in degrees, in km.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Spatial and temporal match windows for [`StationIndex::query`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryLimits {
    pub max_distance_km: f64,
    pub max_time_offset_s: f64,
}

impl Default for QueryLimits {
    fn default() -> Self {
        QueryLimits {
            max_distance_km: DEFAULT_MAX_DISTANCE_KM,
            max_time_offset_s: DEFAULT_MAX_TIME_OFFSET_S,
        }
    }
}

/// A successful join: the chosen station, its distance, and the measurement
/// nearest in time.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinResult {
    pub station_id: String,
    pub distance_km: f64,
    pub measurement: Measurement,
    pub time_offset_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoMatchReason {
    /// No station in the index reports this pollutant.
    NoStation,
    /// Stations report it, but none within `max_distance_km`.
    TooFar,
    /// A station is in range, but none of its measurements falls within
    /// `max_time_offset_s` of the query time.
    NoTimelyMeasurement,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    Matched(JoinResult),
    NoMatch(NoMatchReason),
}

impl QueryResult {
    pub fn matched(&self) -> Option<&JoinResult> {
        match self {
            QueryResult::Matched(j) => Some(j),
            QueryResult::NoMatch(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GeoIndexError {
    #[error("measurement references unknown station `{0}`")]
    UnknownStation(String),
}

fn unit_vector(lat: f64, lon: f64) -> [f64; 3] {
    let phi = lat.to_radians();
    let lambda = lon.to_radians();
    [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()]
}

#[derive(Debug, Clone)]
struct StationEntry {
    station_id: String,
    lat: f64,
    lon: f64,
    position: [f64; 3],
    /// Per-pollutant time-sorted measurement indices (ties collapsed to the
    /// latest-ingested at build time).
    series: BTreeMap<Pollutant, Vec<usize>>,
}

#[derive(Debug, Clone)]
struct KdNode {
    /// Station indices in `entries` covered by this node.
    start: usize,
    end: usize,
    /// Axis-aligned bounds of the covered unit vectors.
    min: [f64; 3],
    max: [f64; 3],
    children: Option<(usize, usize)>,
}

/// Immutable spatial index over stations plus per-station, per-pollutant
/// time-sorted measurements. Build once, query from any number of threads.
#[derive(Debug, Clone)]
pub struct StationIndex {
    entries: Vec<StationEntry>,
    /// Permutation of entry indices arranged by the k-d tree.
    order: Vec<usize>,
    nodes: Vec<KdNode>,
    measurements: Vec<Measurement>,
    stations_reporting: BTreeMap<Pollutant, usize>,
}

const LEAF_SIZE: usize = 8;

impl StationIndex {
    /// Build the index. Fails if a measurement references a station id that
    /// is not in `stations`.
    pub fn build(
        stations: &[SensorStation],
        measurements: &[Measurement],
    ) -> Result<StationIndex, GeoIndexError> {
        let mut entries: Vec<StationEntry> = stations
            .iter()
            .map(|s| StationEntry {
                station_id: s.station_id.clone(),
                lat: s.lat,
                lon: s.lon,
                position: unit_vector(s.lat, s.lon),
                series: BTreeMap::new(),
            })
            .collect();
        entries.sort_by(|a, b| a.station_id.cmp(&b.station_id));

        let lookup: BTreeMap<String, usize> = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.station_id.clone(), i))
            .collect();

        let measurements: Vec<Measurement> = measurements.to_vec();
        for (mi, m) in measurements.iter().enumerate() {
            let &si = lookup
                .get(m.station_id.as_str())
                .ok_or_else(|| GeoIndexError::UnknownStation(m.station_id.clone()))?;
            entries[si].series.entry(m.pollutant).or_default().push(mi);
        }

        let mut stations_reporting: BTreeMap<Pollutant, usize> = BTreeMap::new();
        for e in &mut entries {
            for (&pollutant, series) in e.series.iter_mut() {
                // Stable sort by timestamp keeps ingest order within ties,
                // then each tie collapses to its latest-ingested entry.
                series.sort_by_key(|&mi| measurements[mi].timestamp);
                let mut deduped: Vec<usize> = Vec::with_capacity(series.len());
                for &mi in series.iter() {
                    match deduped.last_mut() {
                        Some(last) if measurements[*last].timestamp == measurements[mi].timestamp => {
                            *last = mi
                        }
                        _ => deduped.push(mi),
                    }
                }
                *series = deduped;
                *stations_reporting.entry(pollutant).or_insert(0) += 1;
            }
        }

        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            build_node(&entries, &mut order, 0, n, &mut nodes);
        }

        Ok(StationIndex {
            entries,
            order,
            nodes,
            measurements,
            stations_reporting,
        })
    }

    /// Pollutants reported by at least one indexed station, sorted.
    pub fn pollutants(&self) -> Vec<Pollutant> {
        self.stations_reporting.keys().copied().collect()
    }

    pub fn station_count(&self) -> usize {
        self.entries.len()
    }

    pub fn measurement_count(&self) -> usize {
        self.measurements.len()
    }

    /// Find the nearest station reporting `pollutant` with a measurement
    /// within the time window, then that station's measurement nearest to
    /// `t` (ties broken toward the later timestamp). Ordering is the
    /// documented lexicographic key (distance, |Δt|, later timestamp,
    /// station id); the result equals a brute-force scan.
    pub fn query(
        &self,
        lat: f64,
        lon: f64,
        t: DateTime<Utc>,
        pollutant: Pollutant,
        limits: QueryLimits,
    ) -> QueryResult {
        if self.stations_reporting.get(&pollutant).copied().unwrap_or(0) == 0 {
            return QueryResult::NoMatch(NoMatchReason::NoStation);
        }

        let query_vec = unit_vector(lat, lon);
        let mut best: Option<Candidate> = None;
        self.search(
            0,
            &query_vec,
            lat,
            lon,
            t,
            pollutant,
            limits,
            &mut best,
        );

        match best {
            Some(c) => {
                let mi = c.measurement_index;
                QueryResult::Matched(JoinResult {
                    station_id: self.entries[c.station].station_id.clone(),
                    distance_km: c.distance_km,
                    measurement: self.measurements[mi].clone(),
                    time_offset_s: c.time_offset_s,
                })
            }
            None => {
                // Nothing matched; distinguish "too far" from "stale data".
                if self.any_station_within(&query_vec, lat, lon, pollutant, limits.max_distance_km) {
                    QueryResult::NoMatch(NoMatchReason::NoTimelyMeasurement)
                } else {
                    QueryResult::NoMatch(NoMatchReason::TooFar)
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        node: usize,
        query_vec: &[f64; 3],
        lat: f64,
        lon: f64,
        t: DateTime<Utc>,
        pollutant: Pollutant,
        limits: QueryLimits,
        best: &mut Option<Candidate>,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let nd = &self.nodes[node];
        let limit_km = best
            .as_ref()
            .map(|b| b.distance_km.min(limits.max_distance_km))
            .unwrap_or(limits.max_distance_km);
        if gc_lower_bound_km(query_vec, &nd.min, &nd.max) > prune_slack(limit_km) {
            return;
        }
        match nd.children {
            Some((left, right)) => {
                // Visit the child whose box is nearer first; better best
                // values make the second visit cheaper.
                let dl = gc_lower_bound_km(query_vec, &self.nodes[left].min, &self.nodes[left].max);
                let dr = gc_lower_bound_km(query_vec, &self.nodes[right].min, &self.nodes[right].max);
                let (first, second) = if dl <= dr { (left, right) } else { (right, left) };
                self.search(first, query_vec, lat, lon, t, pollutant, limits, best);
                self.search(second, query_vec, lat, lon, t, pollutant, limits, best);
            }
            None => {
                for &si in &self.order[nd.start..nd.end] {
                    self.consider(si, lat, lon, t, pollutant, limits, best);
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn consider(
        &self,
        station: usize,
        lat: f64,
        lon: f64,
        t: DateTime<Utc>,
        pollutant: Pollutant,
        limits: QueryLimits,
        best: &mut Option<Candidate>,
    ) {
        let entry = &self.entries[station];
        let Some(series) = entry.series.get(&pollutant) else {
            return;
        };
        let distance_km = haversine_km(lat, lon, entry.lat, entry.lon);
        if distance_km > limits.max_distance_km {
            return;
        }
        let Some((measurement_index, time_offset_s)) =
            nearest_in_time(&self.measurements, series, t, limits.max_time_offset_s)
        else {
            return;
        };
        let candidate = Candidate {
            station,
            distance_km,
            time_offset_s,
            timestamp: self.measurements[measurement_index].timestamp,
            measurement_index,
        };
        let replace = match best {
            None => true,
            Some(b) => candidate.key(&self.entries) < b.key(&self.entries),
        };
        if replace {
            *best = Some(candidate);
        }
    }

    /// Does any station reporting `pollutant` lie within `max_distance_km`,
    /// regardless of measurement timeliness?
    fn any_station_within(
        &self,
        query_vec: &[f64; 3],
        lat: f64,
        lon: f64,
        pollutant: Pollutant,
        max_distance_km: f64,
    ) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let nd = &self.nodes[node];
            if gc_lower_bound_km(query_vec, &nd.min, &nd.max) > prune_slack(max_distance_km) {
                continue;
            }
            match nd.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => {
                    for &si in &self.order[nd.start..nd.end] {
                        let e = &self.entries[si];
                        if e.series.contains_key(&pollutant)
                            && haversine_km(lat, lon, e.lat, e.lon) <= max_distance_km
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    station: usize,
    distance_km: f64,
    time_offset_s: f64,
    timestamp: DateTime<Utc>,
    measurement_index: usize,
}

impl Candidate {
    /// The documented total order; smaller is better. `Reverse` on the
    /// timestamp prefers the later measurement at equal |Δt|.
    fn key<'a>(
        &self,
        entries: &'a [StationEntry],
    ) -> (f64, f64, std::cmp::Reverse<DateTime<Utc>>, &'a str) {
        (
            self.distance_km,
            self.time_offset_s,
            std::cmp::Reverse(self.timestamp),
            entries[self.station].station_id.as_str(),
        )
    }
}

/// Among a time-sorted series, the measurement minimizing |t − timestamp|
/// within the window; equal offsets resolve to the later timestamp.
fn nearest_in_time(
    measurements: &[Measurement],
    series: &[usize],
    t: DateTime<Utc>,
    max_offset_s: f64,
) -> Option<(usize, f64)> {
    let split = series.partition_point(|&mi| measurements[mi].timestamp < t);
    let offset = |mi: usize| {
        (t - measurements[mi].timestamp)
            .num_nanoseconds()
            .expect("offset overflow")
            .abs() as f64
            / 1e9
    };
    let before = split.checked_sub(1).map(|i| series[i]);
    let after = series.get(split).copied();
    let best = match (before, after) {
        (None, None) => return None,
        (Some(b), None) => b,
        (None, Some(a)) => a,
        // The `after` side is the later timestamp, so it wins ties.
        (Some(b), Some(a)) => {
            if offset(a) <= offset(b) {
                a
            } else {
                b
            }
        }
    };
    let off = offset(best);
    (off <= max_offset_s).then_some((best, off))
}

/// Lower bound on the great-circle distance from a unit vector to any point
/// in an axis-aligned box of unit vectors.
fn gc_lower_bound_km(q: &[f64; 3], min: &[f64; 3], max: &[f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for axis in 0..3 {
        let v = q[axis].clamp(min[axis], max[axis]) - q[axis];
        d2 += v * v;
    }
    let chord = d2.sqrt();
    2.0 * EARTH_RADIUS_KM * (chord / 2.0).min(1.0).asin()
}

/// Pruning threshold with slack so chord-space bounds can never discard a
/// station that the haversine comparison would keep (the two formulas agree
/// only to a few ulp).
fn prune_slack(limit_km: f64) -> f64 {
    limit_km * (1.0 + 1e-12) + 1e-9
}

fn build_node(
    entries: &[StationEntry],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<KdNode>,
) -> usize {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in &order[start..end] {
        for axis in 0..3 {
            min[axis] = min[axis].min(entries[i].position[axis]);
            max[axis] = max[axis].max(entries[i].position[axis]);
        }
    }
    let id = nodes.len();
    nodes.push(KdNode {
        start,
        end,
        min,
        max,
        children: None,
    });

    let len = end - start;
    if len > LEAF_SIZE {
        // Split on the widest axis at the median station.
        let axis = (0..3)
            .max_by(|&a, &b| {
                (max[a] - min[a])
                    .partial_cmp(&(max[b] - min[b]))
                    .expect("finite extents")
            })
            .expect("three axes");
        let mid = start + len / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            entries[a].position[axis]
                .partial_cmp(&entries[b].position[axis])
                .expect("finite coordinates")
                .then_with(|| entries[a].station_id.cmp(&entries[b].station_id))
        });
        let left = build_node(entries, order, start, mid, nodes);
        let right = build_node(entries, order, mid, end, nodes);
        nodes[id].children = Some((left, right));
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn station(id: &str, lat: f64, lon: f64, pollutants: &[Pollutant]) -> SensorStation {
        SensorStation {
            station_id: id.into(),
            lat,
            lon,
            pollutants_reported: BTreeSet::from_iter(pollutants.iter().copied()),
        }
    }

    fn measurement(id: &str, p: Pollutant, value: f64, ts: &str, lat: f64, lon: f64) -> Measurement {
        Measurement {
            station_id: id.into(),
            pollutant: p,
            value_ug_m3: value,
            source_ppm: None,
            timestamp: ts.parse().unwrap(),
            lat,
            lon,
        }
    }

    #[test]
    fn haversine_zero_for_identical_points() {
        assert_eq!(haversine_km(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(haversine_km(33.64, -117.84, 33.64, -117.84), 0.0);
    }

    #[test]
    fn haversine_one_degree_longitude_at_equator() {
        // Hand oracle: R × 1° in radians = 6371.0088 × π/180.
        let d = haversine_km(0.0, 0.0, 0.0, 1.0);
        assert!(((d - 111.1950802335329) / 111.1950802335329).abs() < 1e-9, "got {d}");
    }

    #[test]
    fn haversine_symmetry_exact() {
        let mut x = 0.1_f64;
        for _ in 0..1000 {
            // Cheap deterministic scatter over the globe.
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let a = (x / 233280.0) * 180.0 - 90.0;
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let b = (x / 233280.0) * 360.0 - 180.0;
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let c = (x / 233280.0) * 180.0 - 90.0;
            x = (x * 9301.0 + 49297.0) % 233280.0;
            let d = (x / 233280.0) * 360.0 - 180.0;
            assert_eq!(haversine_km(a, b, c, d), haversine_km(c, d, a, b));
        }
    }

    #[test]
    fn empty_index_reports_no_station() {
        let index = StationIndex::build(&[], &[]).unwrap();
        let r = index.query(0.0, 0.0, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        assert_eq!(r, QueryResult::NoMatch(NoMatchReason::NoStation));
    }

    #[test]
    fn singleton_station_always_wins_spatially() {
        let stations = [station("A", 10.0, 20.0, &[Pollutant::Pm25])];
        let ms = [measurement("A", Pollutant::Pm25, 7.0, "2019-01-01T00:00:00Z", 10.0, 20.0)];
        let index = StationIndex::build(&stations, &ms).unwrap();
        for (lat, lon) in [(10.0, 20.0), (10.1, 20.1), (9.9, 19.9)] {
            let r = index.query(lat, lon, "2019-01-01T00:10:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
            assert_eq!(r.matched().unwrap().station_id, "A");
        }
    }

    #[test]
    fn exact_hit_has_zero_distance_and_offset() {
        let stations = [station("A", 33.64, -117.84, &[Pollutant::Pm25])];
        let ms = [measurement("A", Pollutant::Pm25, 7.0, "2019-01-01T00:00:00Z", 33.64, -117.84)];
        let index = StationIndex::build(&stations, &ms).unwrap();
        let r = index.query(33.64, -117.84, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        let j = r.matched().unwrap();
        assert_eq!(j.distance_km, 0.0);
        assert_eq!(j.time_offset_s, 0.0);
        assert_eq!(j.measurement.value_ug_m3, 7.0);
    }

    #[test]
    fn distance_beats_measurement_recency() {
        // Near station has a stale-but-timely measurement; far station has a
        // fresher one. Distance-first ordering picks the near station.
        let stations = [
            station("near", 0.009, 0.0, &[Pollutant::Pm25]), // ~1 km
            station("far", 0.045, 0.0, &[Pollutant::Pm25]),  // ~5 km
        ];
        let t: DateTime<Utc> = "2019-01-01T01:00:00Z".parse().unwrap();
        let ms = [
            measurement("near", Pollutant::Pm25, 1.0, "2019-01-01T00:20:00Z", 0.009, 0.0),
            measurement("far", Pollutant::Pm25, 2.0, "2019-01-01T01:00:00Z", 0.045, 0.0),
        ];
        let index = StationIndex::build(&stations, &ms).unwrap();
        let r = index.query(0.0, 0.0, t, Pollutant::Pm25, QueryLimits::default());
        assert_eq!(r.matched().unwrap().station_id, "near");
    }

    #[test]
    fn equal_offsets_resolve_to_later_timestamp() {
        let stations = [station("A", 0.0, 0.0, &[Pollutant::Pm25])];
        let ms = [
            measurement("A", Pollutant::Pm25, 1.0, "2019-01-01T00:00:00Z", 0.0, 0.0),
            measurement("A", Pollutant::Pm25, 2.0, "2019-01-01T00:20:00Z", 0.0, 0.0),
        ];
        let index = StationIndex::build(&stations, &ms).unwrap();
        let r = index.query(0.0, 0.0, "2019-01-01T00:10:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        let j = r.matched().unwrap();
        assert_eq!(j.measurement.value_ug_m3, 2.0);
        assert_eq!(j.time_offset_s, 600.0);
    }

    #[test]
    fn duplicate_timestamps_collapse_to_latest_ingested() {
        let stations = [station("A", 0.0, 0.0, &[Pollutant::Pm25])];
        let ms = [
            measurement("A", Pollutant::Pm25, 1.0, "2019-01-01T00:00:00Z", 0.0, 0.0),
            measurement("A", Pollutant::Pm25, 9.0, "2019-01-01T00:00:00Z", 0.0, 0.0),
        ];
        let index = StationIndex::build(&stations, &ms).unwrap();
        let r = index.query(0.0, 0.0, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        assert_eq!(r.matched().unwrap().measurement.value_ug_m3, 9.0);
    }

    #[test]
    fn too_far_and_stale_reasons() {
        let stations = [station("A", 0.0, 0.0, &[Pollutant::Pm25])];
        let ms = [measurement("A", Pollutant::Pm25, 1.0, "2019-01-01T00:00:00Z", 0.0, 0.0)];
        let index = StationIndex::build(&stations, &ms).unwrap();
        // ~111 km away: beyond the 50 km window.
        let far = index.query(1.0, 0.0, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        assert_eq!(far, QueryResult::NoMatch(NoMatchReason::TooFar));
        // In range, but the only measurement is a day old.
        let stale = index.query(0.0, 0.0, "2019-01-02T12:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        assert_eq!(stale, QueryResult::NoMatch(NoMatchReason::NoTimelyMeasurement));
        // Pollutant nobody reports.
        let none = index.query(0.0, 0.0, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::O3, QueryLimits::default());
        assert_eq!(none, QueryResult::NoMatch(NoMatchReason::NoStation));
    }

    #[test]
    fn unknown_station_measurement_fails_build() {
        let stations = [station("A", 0.0, 0.0, &[Pollutant::Pm25])];
        let ms = [measurement("B", Pollutant::Pm25, 1.0, "2019-01-01T00:00:00Z", 0.0, 0.0)];
        assert!(matches!(
            StationIndex::build(&stations, &ms),
            Err(GeoIndexError::UnknownStation(id)) if id == "B"
        ));
    }

    #[test]
    fn antimeridian_neighbors_are_found() {
        let stations = [
            station("west", 0.0, 179.99, &[Pollutant::Pm25]),
            station("far", 0.0, 170.0, &[Pollutant::Pm25]),
        ];
        let ms = [
            measurement("west", Pollutant::Pm25, 1.0, "2019-01-01T00:00:00Z", 0.0, 179.99),
            measurement("far", Pollutant::Pm25, 2.0, "2019-01-01T00:00:00Z", 0.0, 170.0),
        ];
        let index = StationIndex::build(&stations, &ms).unwrap();
        // Query just across the antimeridian: the 179.99 station is ~2 km away.
        let r = index.query(0.0, -179.99, "2019-01-01T00:00:00Z".parse().unwrap(), Pollutant::Pm25, QueryLimits::default());
        assert_eq!(r.matched().unwrap().station_id, "west");
    }
}

//! Cigarette-equivalent scoring.
//!
//! Published equivalences are exposure rates — a concentration sustained
//! over a day corresponds to some number of passively smoked cigarettes per
//! day. Converting them to per-cigarette doses needs a reference daily
//! inhaled volume (`v_day_m3`, default 11 m³); that assumption is echoed in
//! every report. Pollutants without a published equivalence contribute zero
//! and are reported as uncovered rather than guessed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aq::{convert_units, ConcentrationUnit, Pollutant};
use crate::dose::{CompensatedSum, DoseTotals};

/// Typical adult daily inhaled volume, m³/day.
pub const DEFAULT_V_DAY_M3: f64 = 11.0;

/// Per-pollutant reference dose of one cigarette, in µg inhaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceTable {
    pub v_day_m3: f64,
    pub dose_per_cigarette_ug: BTreeMap<Pollutant, f64>,
}

impl EquivalenceTable {
    /// The default table, derived from published daily-exposure equivalences:
    /// 10 µg/m³ of PM2.5 ≍ 5.5 cig/day, 10 µg/m³ of NO2 ≍ 2.5 cig/day,
    /// 1 µg/m³ of black carbon ≍ 4 cig/day, 1 ppm of CO ≍ 1 cig/day.
    /// O3, SO2 and PM10 have no published equivalence and are absent.
    ///
    /// Black carbon is carried for completeness but is inactive in practice:
    /// the supported feeds do not report it.
    pub fn default_table() -> EquivalenceTable {
        EquivalenceTable::with_v_day(DEFAULT_V_DAY_M3)
    }

    /// Same derivation at a non-default reference volume.
    pub fn with_v_day(v_day_m3: f64) -> EquivalenceTable {
        let co_ug_m3_per_ppm = convert_units(1.0, ConcentrationUnit::Ppm, Pollutant::Co)
            .expect("CO has a molecular weight");
        let dose_per_cigarette_ug = BTreeMap::from([
            (Pollutant::Pm25, 10.0 * v_day_m3 / 5.5),
            (Pollutant::No2, 10.0 * v_day_m3 / 2.5),
            (Pollutant::Bc, 1.0 * v_day_m3 / 4.0),
            (Pollutant::Co, co_ug_m3_per_ppm * v_day_m3),
        ]);
        EquivalenceTable {
            v_day_m3,
            dose_per_cigarette_ug,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.v_day_m3.is_finite() || self.v_day_m3 <= 0.0 {
            return Err(format!("v_day_m3 must be positive, got {}", self.v_day_m3));
        }
        for (p, &d) in &self.dose_per_cigarette_ug {
            if !d.is_finite() || d <= 0.0 {
                return Err(format!("dose_per_cigarette_ug[{p}] must be positive, got {d}"));
            }
        }
        Ok(())
    }
}

impl Default for EquivalenceTable {
    fn default() -> Self {
        EquivalenceTable::default_table()
    }
}

/// Per-pollutant and total cigarette equivalents for one dose vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CigaretteReport {
    pub per_pollutant: BTreeMap<Pollutant, f64>,
    pub total: f64,
    /// Pollutants with nonzero dose but no table entry. They contribute zero.
    pub uncovered: Vec<Pollutant>,
}

/// Convert dose totals into cigarette equivalents: dose / reference dose,
/// summed over covered pollutants.
pub fn cigarettes(totals: &DoseTotals, table: &EquivalenceTable) -> CigaretteReport {
    let mut per_pollutant = BTreeMap::new();
    let mut uncovered = Vec::new();
    let mut total = CompensatedSum::default();
    for (&p, t) in &totals.per_pollutant {
        match table.dose_per_cigarette_ug.get(&p) {
            Some(&reference) => {
                let equivalent = t.total_ug / reference;
                total.add(equivalent);
                per_pollutant.insert(p, equivalent);
            }
            None => {
                if t.total_ug > 0.0 {
                    uncovered.push(p);
                }
            }
        }
    }
    CigaretteReport {
        per_pollutant,
        total: total.total(),
        uncovered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dose::PollutantTotals;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn totals_of(entries: &[(Pollutant, f64)]) -> DoseTotals {
        DoseTotals {
            per_pollutant: entries
                .iter()
                .map(|&(p, total_ug)| {
                    (
                        p,
                        PollutantTotals {
                            total_ug,
                            matched_s: 3600.0,
                            unmatched_s: 0.0,
                            coverage: 1.0,
                        },
                    )
                })
                .collect(),
            duration_s: 3600.0,
            gap_s: 0.0,
        }
    }

    #[test]
    fn default_table_reference_doses() {
        let t = EquivalenceTable::default_table();
        // Hand arithmetic from the published constants at V_day = 11 m³.
        assert!(rel(t.dose_per_cigarette_ug[&Pollutant::Pm25], 20.0) < 1e-12);
        assert!(rel(t.dose_per_cigarette_ug[&Pollutant::No2], 44.0) < 1e-12);
        assert!(rel(t.dose_per_cigarette_ug[&Pollutant::Bc], 2.75) < 1e-12);
        // 1145.6032719836401 µg/m³ (1 ppm CO) × 11 m³; in the ballpark of a
        // cigarette's physical CO yield (~13 mg), which supports the reading.
        assert!(rel(t.dose_per_cigarette_ug[&Pollutant::Co], 12601.635991820041) < 1e-12);
        assert!(!t.dose_per_cigarette_ug.contains_key(&Pollutant::O3));
        assert!(!t.dose_per_cigarette_ug.contains_key(&Pollutant::So2));
        assert!(!t.dose_per_cigarette_ug.contains_key(&Pollutant::Pm10));
    }

    #[test]
    fn pm25_dose_to_cigarettes() {
        let report = cigarettes(&totals_of(&[(Pollutant::Pm25, 9.6)]), &EquivalenceTable::default_table());
        assert!(rel(report.per_pollutant[&Pollutant::Pm25], 0.48) < 1e-12);
        assert!(rel(report.total, 0.48) < 1e-12);
        assert!(report.uncovered.is_empty());
    }

    #[test]
    fn zero_dose_vector() {
        let report = cigarettes(
            &totals_of(&[(Pollutant::Pm25, 0.0), (Pollutant::Pm10, 0.0)]),
            &EquivalenceTable::default_table(),
        );
        assert_eq!(report.total, 0.0);
        assert!(report.uncovered.is_empty());
    }

    #[test]
    fn pm10_only_dose_is_uncovered() {
        let report = cigarettes(&totals_of(&[(Pollutant::Pm10, 5.0)]), &EquivalenceTable::default_table());
        assert_eq!(report.total, 0.0);
        assert_eq!(report.uncovered, vec![Pollutant::Pm10]);
    }

    #[test]
    fn scaling_doses_scales_equivalents() {
        let table = EquivalenceTable::default_table();
        let base = cigarettes(&totals_of(&[(Pollutant::Pm25, 9.6), (Pollutant::No2, 11.0)]), &table);
        let scaled = cigarettes(&totals_of(&[(Pollutant::Pm25, 4.0 * 9.6), (Pollutant::No2, 4.0 * 11.0)]), &table);
        assert_eq!(scaled.total, 4.0 * base.total);
    }

    #[test]
    fn increasing_a_covered_dose_strictly_increases_total() {
        let table = EquivalenceTable::default_table();
        let base = cigarettes(&totals_of(&[(Pollutant::Pm25, 9.6), (Pollutant::Co, 100.0)]), &table);
        let more = cigarettes(&totals_of(&[(Pollutant::Pm25, 9.7), (Pollutant::Co, 100.0)]), &table);
        assert!(more.total > base.total);
    }

    #[test]
    fn table_config_round_trip_is_bit_exact() {
        let table = EquivalenceTable::default_table();
        let json = serde_json::to_string(&table).unwrap();
        let back: EquivalenceTable = serde_json::from_str(&json).unwrap();
        assert_eq!(table, back);
    }
}


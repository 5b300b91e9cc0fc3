//! Optional config file. Every field has a documented default; unknown keys
//! are rejected so typos fail loudly instead of silently using defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use exposome_core::{
    default_mode_profiles, BandScale, EquivalenceTable, ModeProfile, Pollutant, QueryLimits,
    TransportMode, DEFAULT_MAX_GAP_S, DEFAULT_V_DAY_M3,
};

/// Partial equivalence-table override: a new reference volume rebuilds the
/// derived defaults, explicit per-pollutant doses then replace individual
/// entries.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceOverride {
    pub v_day_m3: Option<f64>,
    pub dose_per_cigarette_ug: Option<BTreeMap<Pollutant, f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    /// Physiology profile path; the `--profile` flag overrides it.
    pub profile: Option<PathBuf>,
    /// Cigarette-equivalence overrides (default: published constants at
    /// v_day = 11 m³).
    pub equivalence: Option<EquivalenceOverride>,
    /// Spatial join window, km (default 50).
    pub max_distance_km: Option<f64>,
    /// Temporal join window, seconds (default 5400).
    pub max_time_offset_s: Option<f64>,
    /// Segment gap threshold, seconds (default 60).
    pub max_gap_s: Option<f64>,
    /// Per-mode speed/effort overrides (defaults: walk 5 km/h @ 0.2,
    /// run 10 @ 0.7, cycle 20 @ 0.6, drive 40 @ 0.0).
    pub modes: Option<BTreeMap<TransportMode, ModeProfile>>,
    /// Per-pollutant band breakpoint overrides (defaults: 24-h AQI-style).
    pub bands: Option<BTreeMap<Pollutant, [f64; 3]>>,
    /// Default report output path (default `report.json`).
    pub out: Option<PathBuf>,
    /// Default batch output directory (default `reports`).
    pub out_dir: Option<PathBuf>,
    /// Default GeoJSON output path (default: none).
    pub geojson: Option<PathBuf>,
    /// Default pollutant for GeoJSON export (default: pm25 when analyzed,
    /// else the first analyzed pollutant).
    pub pollutant: Option<String>,
}

impl AppConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<AppConfig> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: AppConfig = serde_json::from_slice(&bytes)
            .with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("max_distance_km", self.max_distance_km),
            ("max_time_offset_s", self.max_time_offset_s),
            ("max_gap_s", self.max_gap_s),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    bail!("config: {name} must be positive, got {v}");
                }
            }
        }
        Ok(())
    }

    pub fn limits(&self) -> QueryLimits {
        let default = QueryLimits::default();
        QueryLimits {
            max_distance_km: self.max_distance_km.unwrap_or(default.max_distance_km),
            max_time_offset_s: self.max_time_offset_s.unwrap_or(default.max_time_offset_s),
        }
    }

    pub fn max_gap_s(&self) -> f64 {
        self.max_gap_s.unwrap_or(DEFAULT_MAX_GAP_S)
    }

    pub fn equivalence_table(&self) -> Result<EquivalenceTable> {
        let overrides = self.equivalence.clone().unwrap_or_default();
        let mut table =
            EquivalenceTable::with_v_day(overrides.v_day_m3.unwrap_or(DEFAULT_V_DAY_M3));
        if let Some(doses) = overrides.dose_per_cigarette_ug {
            for (p, d) in doses {
                table.dose_per_cigarette_ug.insert(p, d);
            }
        }
        table.validate().map_err(|e| anyhow::anyhow!("config: {e}"))?;
        Ok(table)
    }

    pub fn mode_profiles(&self) -> Result<BTreeMap<TransportMode, ModeProfile>> {
        let mut modes = default_mode_profiles();
        if let Some(overrides) = &self.modes {
            for (mode, profile) in overrides {
                if !profile.speed_kmh.is_finite() || profile.speed_kmh <= 0.0 {
                    bail!("config: speed for mode {} must be positive", mode.name());
                }
                if !(0.0..=1.0).contains(&profile.effort_fraction) {
                    bail!("config: effort_fraction for mode {} must be in [0, 1]", mode.name());
                }
                modes.insert(*mode, *profile);
            }
        }
        Ok(modes)
    }

    pub fn band_scale(&self) -> Result<BandScale> {
        let mut scale = BandScale::default_scale();
        if let Some(overrides) = &self.bands {
            for (p, bp) in overrides {
                scale.breakpoints_ug_m3.insert(*p, *bp);
            }
        }
        scale.validate().map_err(|e| anyhow::anyhow!("config: {e}"))?;
        Ok(scale)
    }
}

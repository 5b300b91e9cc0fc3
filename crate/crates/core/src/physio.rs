//! Ventilation modeling: tidal volume from anthropometrics, breathing rate
//! from heart rate (or power), minute ventilation as their product.
//!
//! Tidal volume comes from the ideal-body-weight formula and is held
//! constant per activity; effort enters only through the breathing rate.
//! The heart-rate → breathing-rate mapping is a clamped linear ramp on
//! heart-rate reserve with configurable endpoints, monotone by construction.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::ActivityTrack;

pub const DEFAULT_HR_REST_BPM: f64 = 60.0;
pub const DEFAULT_BR_REST: f64 = 12.0;
pub const DEFAULT_BR_MAX: f64 = 45.0;
pub const DEFAULT_FTP_W: f64 = 200.0;
/// Power saturates the ramp at 1.2 × FTP: above that, breathing is at max
/// for any sustainable duration.
pub const POWER_SATURATION_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// Who is breathing. Heights are in inches because the tidal-volume formula
/// is stated in inches; the formula domain starts at 60 in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysioProfile {
    pub sex: Sex,
    pub height_in: f64,
    pub age_y: f64,
    pub weight_kg: Option<f64>,
    pub hr_rest_bpm: f64,
    pub hr_max_bpm: f64,
    /// Resting breathing rate, breaths/min.
    pub br_rest: f64,
    /// Peak breathing rate, breaths/min.
    pub br_max: f64,
    /// Functional threshold power for the power fallback, watts.
    pub ftp_w: f64,
    /// Optional hook overriding the formula-derived tidal volume. No
    /// effort-dependent model ships; the formula value is the default.
    pub tidal_volume_override_l: Option<f64>,
}

#[derive(Debug, Error)]
pub enum PhysioError {
    #[error("height {height_in} in is below the 60 in formula domain")]
    HeightOutOfDomain { height_in: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// On-disk profile shape; unset fields take documented defaults
/// (hr_rest 60, hr_max 220 − age, br_rest 12, br_max 45, ftp 200).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub sex: Sex,
    pub height_in: f64,
    pub age_y: f64,
    #[serde(default)]
    pub weight_kg: Option<f64>,
    #[serde(default)]
    pub hr_rest_bpm: Option<f64>,
    #[serde(default)]
    pub hr_max_bpm: Option<f64>,
    #[serde(default)]
    pub br_rest: Option<f64>,
    #[serde(default)]
    pub br_max: Option<f64>,
    #[serde(default)]
    pub ftp_w: Option<f64>,
    #[serde(default)]
    pub tidal_volume_override_l: Option<f64>,
}

impl PhysioProfile {
    pub fn from_config(cfg: ProfileConfig) -> Result<PhysioProfile, PhysioError> {
        let profile = PhysioProfile {
            sex: cfg.sex,
            height_in: cfg.height_in,
            age_y: cfg.age_y,
            weight_kg: cfg.weight_kg,
            hr_rest_bpm: cfg.hr_rest_bpm.unwrap_or(DEFAULT_HR_REST_BPM),
            hr_max_bpm: cfg.hr_max_bpm.unwrap_or(220.0 - cfg.age_y),
            br_rest: cfg.br_rest.unwrap_or(DEFAULT_BR_REST),
            br_max: cfg.br_max.unwrap_or(DEFAULT_BR_MAX),
            ftp_w: cfg.ftp_w.unwrap_or(DEFAULT_FTP_W),
            tidal_volume_override_l: cfg.tidal_volume_override_l,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_json(bytes: &[u8]) -> Result<PhysioProfile, PhysioError> {
        let cfg: ProfileConfig = serde_json::from_slice(bytes)
            .map_err(|e| PhysioError::InvalidProfile(e.to_string()))?;
        PhysioProfile::from_config(cfg)
    }

    pub fn validate(&self) -> Result<(), PhysioError> {
        let err = |msg: String| Err(PhysioError::InvalidProfile(msg));
        let finite = [
            self.height_in,
            self.age_y,
            self.hr_rest_bpm,
            self.hr_max_bpm,
            self.br_rest,
            self.br_max,
            self.ftp_w,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return err("profile fields must be finite numbers".into());
        }
        if self.height_in <= 36.0 {
            return err(format!("height_in must exceed 36, got {}", self.height_in));
        }
        if self.hr_rest_bpm >= self.hr_max_bpm {
            return err(format!(
                "hr_rest_bpm ({}) must be below hr_max_bpm ({})",
                self.hr_rest_bpm, self.hr_max_bpm
            ));
        }
        if self.br_rest >= self.br_max {
            return err(format!(
                "br_rest ({}) must be below br_max ({})",
                self.br_rest, self.br_max
            ));
        }
        if self.br_rest <= 0.0 || self.ftp_w <= 0.0 || self.age_y < 0.0 {
            return err("br_rest and ftp_w must be positive, age_y non-negative".into());
        }
        if let Some(tv) = self.tidal_volume_override_l {
            if !tv.is_finite() || tv <= 0.0 {
                return err(format!("tidal_volume_override_l must be positive, got {tv}"));
            }
        }
        Ok(())
    }
}

/// Tidal volume in liters:
/// men ((50 + 2.3·(height − 60))·12)/1000, women ((45 + 2.3·(height − 60))·12)/1000.
pub fn tidal_volume_l(profile: &PhysioProfile) -> Result<f64, PhysioError> {
    if let Some(tv) = profile.tidal_volume_override_l {
        return Ok(tv);
    }
    if profile.height_in < 60.0 {
        return Err(PhysioError::HeightOutOfDomain {
            height_in: profile.height_in,
        });
    }
    let base = match profile.sex {
        Sex::Male => 50.0,
        Sex::Female => 45.0,
    };
    Ok((base + 2.3 * (profile.height_in - 60.0)) * 12.0 / 1000.0)
}

/// Effort fraction → breathing rate through the linear ramp.
fn ramp(profile: &PhysioProfile, f: f64) -> f64 {
    profile.br_rest + f * (profile.br_max - profile.br_rest)
}

/// Breathing rate from heart rate via clamped heart-rate reserve.
/// Monotone non-decreasing over the whole real line.
pub fn breathing_rate(hr_bpm: f64, profile: &PhysioProfile) -> f64 {
    let f = ((hr_bpm - profile.hr_rest_bpm) / (profile.hr_max_bpm - profile.hr_rest_bpm))
        .clamp(0.0, 1.0);
    ramp(profile, f)
}

/// Breathing rate from power when heart rate is absent; saturates at
/// [`POWER_SATURATION_FACTOR`] × FTP.
pub fn breathing_rate_from_power(power_w: f64, profile: &PhysioProfile) -> f64 {
    let f = (power_w / profile.ftp_w).clamp(0.0, POWER_SATURATION_FACTOR) / POWER_SATURATION_FACTOR;
    ramp(profile, f)
}

/// How a sample's breathing rate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VentilationSource {
    HeartRate,
    Power,
    RestFallback,
}

/// Minute ventilation at one track point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VentilationSample {
    pub timestamp: DateTime<Utc>,
    pub breathing_rate: f64,
    pub tidal_volume_l: f64,
    /// breathing_rate × tidal_volume_l, the quantity the dose integral uses.
    pub ventilation_l_min: f64,
    pub source: VentilationSource,
}

/// One ventilation sample per track point. Heart rate drives the ramp when
/// present; power is the fallback; with neither the resting rate applies
/// (the sample is marked so reports can flag it).
pub fn ventilation_series(
    track: &ActivityTrack,
    profile: &PhysioProfile,
) -> Result<Vec<VentilationSample>, PhysioError> {
    let tv = tidal_volume_l(profile)?;
    Ok(track
        .points
        .iter()
        .map(|p| {
            let (breathing_rate, source) = match (p.heart_rate_bpm, p.power_w) {
                (Some(hr), _) => (breathing_rate(hr, profile), VentilationSource::HeartRate),
                (None, Some(w)) => (
                    breathing_rate_from_power(w, profile),
                    VentilationSource::Power,
                ),
                (None, None) => (profile.br_rest, VentilationSource::RestFallback),
            };
            VentilationSample {
                timestamp: p.timestamp,
                breathing_rate,
                tidal_volume_l: tv,
                ventilation_l_min: breathing_rate * tv,
                source,
            }
        })
        .collect())
}

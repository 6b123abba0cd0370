//! Thermal contact features.
//!
//! Per window: the thermal power loss per unit core temperature
//! (mean flux times the electrode-weighted contact area over mean core
//! temperature), plus the slope and RMS residual of a least-squares line
//! through the flux samples. Contact area sums per-electrode disc areas
//! `pi * r_i^2`, each scaled by a piece-wise linear engagement factor of
//! the electrode's mean impedance drop below its resting level.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exec;
use crate::stream::{RecordingHeader, SensorWindow};

/// Default impedance delta at which an electrode counts as fully engaged
/// (counts below resting).
pub const DEFAULT_E_M: f64 = -400.0;
/// Default core-temperature floor in counts; below it the power division
/// is treated as a sensor fault.
pub const DEFAULT_TEMP_FLOOR: f64 = 1.0;

/// Contact-area configuration: engagement threshold plus per-electrode
/// geometry and resting levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactConfig {
    /// Full-engagement impedance delta (negative counts).
    pub e_m: f64,
    /// Per-electrode disc radii in mm.
    pub radii: Vec<f64>,
    /// Per-electrode resting impedance in counts.
    pub resting: Vec<f64>,
}

impl ContactConfig {
    /// Build from a recording header and an engagement threshold.
    pub fn from_header(header: &RecordingHeader, e_m: f64) -> Self {
        ContactConfig {
            e_m,
            radii: header.electrode_radii.clone(),
            resting: header.electrode_resting.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_m < 0.0) {
            return Err(Error::Parameter(format!(
                "engagement threshold e_m must be negative, got {}",
                self.e_m
            )));
        }
        if self.radii.len() != self.resting.len() {
            return Err(Error::Parameter(format!(
                "{} radii vs {} resting levels",
                self.radii.len(),
                self.resting.len()
            )));
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Parameter(
                "electrode radii must be finite and strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Three thermal features of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalFeature {
    /// Mean flux times contact area over mean core temperature
    /// ((flux counts * mm^2) / temperature counts).
    pub power_per_temp: f64,
    /// Fitted flux slope in counts per second.
    pub flux_slope: f64,
    /// RMS residual of the flux regression in counts.
    pub flux_err: f64,
}

impl ThermalFeature {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.power_per_temp, self.flux_slope, self.flux_err])
    }
}

/// Engagement factor of one electrode: 0 at or above resting, rising
/// linearly to 1 at delta `e_m`, and 1 below it. Total on all real inputs.
pub fn contact_scale(e_avg: f64, resting: f64, e_m: f64) -> f64 {
    debug_assert!(e_m < 0.0);
    let delta = e_avg - resting;
    if delta >= 0.0 {
        0.0
    } else if delta <= e_m {
        1.0
    } else {
        (delta / e_m).clamp(0.0, 1.0)
    }
}

/// Contact area in mm^2: the engagement-weighted sum of electrode disc
/// areas.
pub fn contact_area(e_avgs: &[f64], cfg: &ContactConfig) -> Result<f64> {
    if e_avgs.len() != cfg.radii.len() || e_avgs.len() != cfg.resting.len() {
        return Err(Error::Parameter(format!(
            "{} electrode means for {} configured electrodes",
            e_avgs.len(),
            cfg.radii.len()
        )));
    }
    let mut area = 0.0;
    for ((&e, &r), &rest) in e_avgs.iter().zip(&cfg.radii).zip(&cfg.resting) {
        area += contact_scale(e, rest, cfg.e_m) * std::f64::consts::PI * r * r;
    }
    Ok(area)
}

/// Ordinary least-squares line through `(k / lowrate, flux[k])`.
///
/// Returns `(slope, rms_residual)`.
pub fn flux_regression(flux: &[f64], lowrate: f64) -> Result<(f64, f64)> {
    let n = flux.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "flux regression needs at least 2 samples, got {n}"
        )));
    }
    let ts: Vec<f64> = (0..n).map(|k| k as f64 / lowrate).collect();
    let mean_t = crate::numeric::mean(&ts);
    let mean_y = crate::numeric::mean(flux);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, y) in ts.iter().zip(flux) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let ss: f64 = ts
        .iter()
        .zip(flux)
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    Ok((slope, (ss / n as f64).sqrt()))
}

/// Thermal feature vector of one window.
///
/// Errors with `TemperatureUnderflow` when the mean core temperature is
/// below `temp_floor`.
pub fn thermal_feature(
    window: &SensorWindow,
    cfg: &ContactConfig,
    temp_floor: f64,
) -> Result<ThermalFeature> {
    let temp = window.mean_core_temp();
    if !(temp >= temp_floor) {
        return Err(Error::TemperatureUnderflow {
            mean: temp,
            floor: temp_floor,
        });
    }
    let mean_flux = window.mean_flux();
    let area = contact_area(&window.mean_electrodes(), cfg)?;
    let (flux_slope, flux_err) = flux_regression(&window.flux_series(), window.header.lowrate as f64)?;
    Ok(ThermalFeature {
        power_per_temp: mean_flux * area / temp,
        flux_slope,
        flux_err,
    })
}

/// Thermal features for a batch of windows (data-parallel under
/// `parallel`).
pub fn batch_thermal(
    windows: &[SensorWindow],
    cfg: &ContactConfig,
    temp_floor: f64,
) -> Result<Vec<ThermalFeature>> {
    exec::map_collect(windows, |w| thermal_feature(w, cfg, temp_floor))
        .into_iter()
        .collect()
}

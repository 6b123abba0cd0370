//! Versioned JSON model files.
//!
//! One file holds everything classification needs: window length and
//! band, the spectral projection (complex mean as re/im pairs, basis
//! rows), per-material mixtures (covariances flattened row-major), the
//! thermal configuration, and the training provenance. Numbers are
//! written in shortest round-trip decimal form, so write → read → write
//! reproduces the file byte for byte.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{Gmm, MaterialModel};
use crate::pipeline::{TrainConfig, TrainedModel};
use crate::spectral::ProjectionModel;
use crate::stream::RecordingHeader;

/// Current model file format version.
pub const MODEL_VERSION: u32 = 1;

/// Tag recorded for how spectra are scaled: plain FFT magnitudes, no 1/n
/// normalization.
pub const SPECTRUM_SCALING: &str = "magnitude-unscaled";

/// Tag recorded for the flux regression error definition.
pub const REGRESSION_ERROR_TAG: &str = "rms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dt: f64,
    pub band: [f64; 2],
    pub spectrum_scaling: String,
    pub rates: RatesSection,
    pub projection: ProjectionSection,
    pub materials: Vec<MaterialSection>,
    pub thermal: ThermalSection,
    pub training: TrainingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSection {
    pub vibration_rate: u32,
    pub lowrate: u32,
    pub electrode_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSection {
    /// Complex mean per retained bin as [re, im].
    pub complex_mean: Vec<[f64; 2]>,
    /// Orthonormal basis rows (d rows of bin-count entries).
    pub basis: Vec<Vec<f64>>,
    /// Output dimension.
    pub d: usize,
    /// Variance fraction the basis retains on its training set.
    pub retained_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSection {
    pub name: String,
    pub vib_gmm: GmmSection,
    pub thermal_gmm: GmmSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSection {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// One flattened row-major d*d matrix per component.
    pub covariances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalSection {
    pub e_m: f64,
    pub regression_error: String,
    pub temp_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSection {
    pub seed: u64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub eps_cov_scale: f64,
    pub variance_target: f64,
    pub k_max: usize,
    pub holdout_fraction: f64,
    pub tau_knee: f64,
    pub posterior_floor: f64,
    /// Chosen vibration mixture size per material.
    pub vib_components: Vec<usize>,
    /// Chosen thermal mixture size per material.
    pub thermal_components: Vec<usize>,
}

fn gmm_section(g: &Gmm) -> GmmSection {
    GmmSection {
        weights: g.weights.clone(),
        means: g.means.iter().map(|m| m.iter().cloned().collect()).collect(),
        covariances: g
            .covariances
            .iter()
            .map(|c| {
                let d = c.nrows();
                let mut flat = Vec::with_capacity(d * d);
                for r in 0..d {
                    for col in 0..d {
                        flat.push(c[(r, col)]);
                    }
                }
                flat
            })
            .collect(),
    }
}

fn gmm_from_section(s: &GmmSection, expected_dim: usize, what: &str) -> Result<Gmm> {
    let k = s.weights.len();
    if s.means.len() != k || s.covariances.len() != k {
        return Err(Error::Format(format!(
            "{what}: {k} weights vs {} means / {} covariances",
            s.means.len(),
            s.covariances.len()
        )));
    }
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for (i, (m, c)) in s.means.iter().zip(&s.covariances).enumerate() {
        if m.len() != expected_dim {
            return Err(Error::Format(format!(
                "{what}: component {i} mean has dim {}, expected {expected_dim}",
                m.len()
            )));
        }
        if c.len() != expected_dim * expected_dim {
            return Err(Error::Format(format!(
                "{what}: component {i} covariance has {} entries, expected {}",
                c.len(),
                expected_dim * expected_dim
            )));
        }
        means.push(DVector::from_column_slice(m));
        covariances.push(DMatrix::from_row_slice(expected_dim, expected_dim, c));
    }
    let gmm = Gmm {
        weights: s.weights.clone(),
        means,
        covariances,
    };
    gmm.validate()?;
    Ok(gmm)
}

impl ModelFile {
    /// Capture a trained model.
    pub fn from_trained(model: &TrainedModel) -> ModelFile {
        let cfg = &model.config;
        let p = &model.projection;
        ModelFile {
            version: MODEL_VERSION,
            dt: cfg.dt,
            band: [cfg.f_lo, cfg.f_hi],
            spectrum_scaling: SPECTRUM_SCALING.to_string(),
            rates: RatesSection {
                vibration_rate: model.vibration_rate,
                lowrate: model.lowrate,
                electrode_count: model.electrode_count,
            },
            projection: ProjectionSection {
                complex_mean: p.complex_mean.iter().map(|c| [c.re, c.im]).collect(),
                basis: (0..p.basis.nrows())
                    .map(|r| p.basis.row(r).iter().cloned().collect())
                    .collect(),
                d: p.output_dim(),
                retained_variance: p.retained_variance,
            },
            materials: model
                .materials
                .iter()
                .map(|m| MaterialSection {
                    name: m.name.clone(),
                    vib_gmm: gmm_section(&m.vib_gmm),
                    thermal_gmm: gmm_section(&m.thermal_gmm),
                })
                .collect(),
            thermal: ThermalSection {
                e_m: cfg.e_m,
                regression_error: REGRESSION_ERROR_TAG.to_string(),
                temp_floor: cfg.temp_floor,
            },
            training: TrainingSection {
                seed: cfg.seed,
                em_tol: cfg.em.tol,
                em_max_iter: cfg.em.max_iter,
                eps_cov_scale: cfg.em.eps_cov_scale,
                variance_target: cfg.variance_target,
                k_max: cfg.k_max,
                holdout_fraction: cfg.holdout_fraction,
                tau_knee: cfg.tau_knee,
                posterior_floor: crate::classifier::DEFAULT_POSTERIOR_FLOOR,
                vib_components: model.vib_components.clone(),
                thermal_components: model.thermal_components.clone(),
            },
        }
    }

    /// Reconstruct the runtime model, validating every invariant.
    pub fn to_trained(&self) -> Result<TrainedModel> {
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "model: unsupported version {}",
                self.version
            )));
        }
        let bins = self.projection.complex_mean.len();
        let d = self.projection.d;
        if self.projection.basis.len() != d {
            return Err(Error::Format(format!(
                "model: basis has {} rows, d = {d}",
                self.projection.basis.len()
            )));
        }
        if self.projection.basis.iter().any(|r| r.len() != bins) {
            return Err(Error::Format(format!(
                "model: basis rows must have {bins} entries"
            )));
        }
        let mut basis = DMatrix::zeros(d, bins);
        for (r, row) in self.projection.basis.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                basis[(r, c)] = *v;
            }
        }
        let projection = ProjectionModel {
            complex_mean: self
                .projection
                .complex_mean
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            basis,
            retained_variance: self.projection.retained_variance,
        };
        if self.materials.len() < 2 {
            return Err(Error::Format(format!(
                "model: needs at least 2 materials, found {}",
                self.materials.len()
            )));
        }
        let mut materials = Vec::with_capacity(self.materials.len());
        for m in &self.materials {
            materials.push(MaterialModel {
                name: m.name.clone(),
                vib_gmm: gmm_from_section(&m.vib_gmm, d, &format!("{} vibration", m.name))?,
                thermal_gmm: gmm_from_section(&m.thermal_gmm, 3, &format!("{} thermal", m.name))?,
            });
        }
        let config = TrainConfig {
            dt: self.dt,
            f_lo: self.band[0],
            f_hi: self.band[1],
            variance_target: self.training.variance_target,
            k_max: self.training.k_max,
            holdout_fraction: self.training.holdout_fraction,
            tau_knee: self.training.tau_knee,
            em: crate::gmm::EmConfig {
                tol: self.training.em_tol,
                max_iter: self.training.em_max_iter,
                eps_cov_scale: self.training.eps_cov_scale,
            },
            e_m: self.thermal.e_m,
            temp_floor: self.thermal.temp_floor,
            seed: self.training.seed,
        };
        config.validate()?;
        Ok(TrainedModel {
            projection,
            materials,
            vib_components: self.training.vib_components.clone(),
            thermal_components: self.training.thermal_components.clone(),
            config,
            vibration_rate: self.rates.vibration_rate,
            lowrate: self.rates.lowrate,
            electrode_count: self.rates.electrode_count,
        })
    }

    /// Check that a recording can be classified with this model;
    /// mismatches report both shapes.
    pub fn check_compatible(&self, header: &RecordingHeader) -> Result<()> {
        if header.vibration_rate != self.rates.vibration_rate
            || header.lowrate != self.rates.lowrate
        {
            return Err(Error::Shape(format!(
                "recording rates {} Hz / {} Hz vs model rates {} Hz / {} Hz",
                header.vibration_rate,
                header.lowrate,
                self.rates.vibration_rate,
                self.rates.lowrate
            )));
        }
        if header.electrode_count != self.rates.electrode_count {
            return Err(Error::Shape(format!(
                "recording has {} electrodes, model expects {}",
                header.electrode_count, self.rates.electrode_count
            )));
        }
        Ok(())
    }

    /// Serialize to the canonical single-line JSON form.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("model: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

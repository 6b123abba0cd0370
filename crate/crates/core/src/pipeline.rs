//! Model training: shared spectral projection plus per-material,
//! per-modality mixture fitting.
//!
//! The projection is fitted on the pooled training spectra of all
//! materials; each material then gets one vibration mixture (over
//! projected features) and one thermal mixture (over the three thermal
//! features), with component counts chosen per material and modality.
//! Distinct (material, modality) fits run concurrently under the
//! `parallel` feature; every fit draws from its own derived seed, so the
//! result does not depend on scheduling.

use crate::error::{Error, Result};
use crate::exec;
use crate::gmm::{self, EmConfig, Gmm, MaterialModel};
use crate::numeric::derive_seed;
use crate::spectral::{self, ProjectionModel};
use crate::stream::{RecordingHeader, SensorWindow, Tick};
use crate::thermal::{self, ContactConfig};

/// Everything the trainer needs to know, with defaults matching the
/// standard protocol (0.25 s windows, 4–500 Hz band, 97% retained
/// variance).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Window length in seconds.
    pub dt: f64,
    /// Analysis band lower edge in Hz.
    pub f_lo: f64,
    /// Analysis band upper edge in Hz.
    pub f_hi: f64,
    /// PCA variance target in (0, 1].
    pub variance_target: f64,
    /// Largest mixture size considered per material and modality.
    pub k_max: usize,
    /// Held-out fraction for component selection.
    pub holdout_fraction: f64,
    /// Knee threshold for component selection.
    pub tau_knee: f64,
    /// EM settings.
    pub em: EmConfig,
    /// Electrode full-engagement threshold (counts, negative).
    pub e_m: f64,
    /// Core-temperature floor (counts).
    pub temp_floor: f64,
    /// Base RNG seed; all fits derive their own streams from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dt: crate::stream::DEFAULT_DT,
            f_lo: spectral::DEFAULT_F_LO,
            f_hi: spectral::DEFAULT_F_HI,
            variance_target: spectral::DEFAULT_VARIANCE_TARGET,
            k_max: 4,
            holdout_fraction: gmm::DEFAULT_HOLDOUT_FRACTION,
            tau_knee: gmm::DEFAULT_TAU_KNEE,
            em: EmConfig::default(),
            e_m: thermal::DEFAULT_E_M,
            temp_floor: thermal::DEFAULT_TEMP_FLOOR,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.variance_target > 0.0 && self.variance_target <= 1.0) {
            return Err(Error::Parameter(format!(
                "variance target must be in (0, 1], got {}",
                self.variance_target
            )));
        }
        if !(self.f_lo > 0.0 && self.f_lo < self.f_hi) {
            return Err(Error::Parameter(format!(
                "band [{}, {}) is empty",
                self.f_lo, self.f_hi
            )));
        }
        if self.k_max == 0 {
            return Err(Error::Parameter("k_max must be at least 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "holdout fraction must be in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        if !(self.e_m < 0.0) {
            return Err(Error::Parameter(format!(
                "e_m must be negative, got {}",
                self.e_m
            )));
        }
        Ok(())
    }
}

/// A labeled recording held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRecording {
    pub name: String,
    pub header: RecordingHeader,
    pub ticks: Vec<Tick>,
}

/// A material's windows, ready for feature extraction.
pub struct MaterialWindows<'a> {
    pub name: String,
    pub header: &'a RecordingHeader,
    pub windows: Vec<SensorWindow<'a>>,
}

/// Window every recording, checking that rates and electrode counts
/// agree across materials.
pub fn window_materials<'a>(
    recordings: &'a [MaterialRecording],
    dt: f64,
) -> Result<Vec<MaterialWindows<'a>>> {
    let Some(first) = recordings.first() else {
        return Err(Error::Config("no materials in dataset".into()));
    };
    let mut out = Vec::with_capacity(recordings.len());
    for rec in recordings {
        if rec.header.vibration_rate != first.header.vibration_rate
            || rec.header.lowrate != first.header.lowrate
            || rec.header.electrode_count != first.header.electrode_count
        {
            return Err(Error::Shape(format!(
                "recording `{}` rates ({} Hz / {} Hz / {} electrodes) differ from `{}` ({} Hz / {} Hz / {})",
                rec.name,
                rec.header.vibration_rate,
                rec.header.lowrate,
                rec.header.electrode_count,
                first.name,
                first.header.vibration_rate,
                first.header.lowrate,
                first.header.electrode_count,
            )));
        }
        out.push(MaterialWindows {
            name: rec.name.clone(),
            header: &rec.header,
            windows: crate::stream::windows(&rec.ticks, &rec.header, dt)?,
        });
    }
    Ok(out)
}

/// Seed tags: one independent stream per (material, modality, purpose).
fn fit_seed(base: u64, material: usize, tag: u64) -> u64 {
    derive_seed(base, (material as u64) << 3 | tag)
}

/// Fit the shared projection and one vibration mixture per material.
/// Returns the projection and, per material, the chosen component count
/// and the mixture.
pub fn fit_vibration_models(
    materials: &[MaterialWindows],
    cfg: &TrainConfig,
) -> Result<(ProjectionModel, Vec<(usize, Gmm)>)> {
    cfg.validate()?;
    // Pooled spectra in material order for the shared projection.
    let per_material: Result<Vec<_>> = materials
        .iter()
        .map(|m| spectral::batch_spectra(&m.windows, cfg.f_lo, cfg.f_hi))
        .collect();
    let per_material = per_material?;
    let pooled: Vec<spectral::Spectrum> = per_material.iter().flatten().cloned().collect();
    let projection = spectral::fit_projection(&pooled, cfg.variance_target)?;

    let fits: Result<Vec<(usize, Gmm)>> = exec::map_indices(materials.len(), |i| {
        let feats = spectral::batch_project(&per_material[i], &projection)?;
        let data: Vec<_> = feats.into_iter().map(|f| f.0).collect();
        let k = gmm::select_components_with(
            &data,
            cfg.k_max,
            cfg.holdout_fraction,
            cfg.tau_knee,
            fit_seed(cfg.seed, i, 0),
            &cfg.em,
        )?;
        let fit = gmm::em_fit_with(&data, k, fit_seed(cfg.seed, i, 1), &cfg.em)?;
        Ok((k, fit.gmm))
    })
    .into_iter()
    .collect();
    Ok((projection, fits?))
}

/// Fit one thermal mixture per material. This is the only training path
/// that touches the thermal channels.
pub fn fit_thermal_models(
    materials: &[MaterialWindows],
    cfg: &TrainConfig,
) -> Result<Vec<(usize, Gmm)>> {
    cfg.validate()?;
    exec::map_indices(materials.len(), |i| {
        let m = &materials[i];
        let contact = ContactConfig::from_header(m.header, cfg.e_m);
        let feats = thermal::batch_thermal(&m.windows, &contact, cfg.temp_floor)?;
        let data: Vec<_> = feats.iter().map(|f| f.to_vector()).collect();
        let k = gmm::select_components_with(
            &data,
            cfg.k_max,
            cfg.holdout_fraction,
            cfg.tau_knee,
            fit_seed(cfg.seed, i, 2),
            &cfg.em,
        )?;
        let fit = gmm::em_fit_with(&data, k, fit_seed(cfg.seed, i, 3), &cfg.em)?;
        Ok((k, fit.gmm))
    })
    .into_iter()
    .collect()
}

/// A fully trained model: shared projection, both mixtures per material,
/// and the provenance needed to reproduce or serialize it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub projection: ProjectionModel,
    pub materials: Vec<MaterialModel>,
    /// Chosen vibration component count per material.
    pub vib_components: Vec<usize>,
    /// Chosen thermal component count per material.
    pub thermal_components: Vec<usize>,
    pub config: TrainConfig,
    pub vibration_rate: u32,
    pub lowrate: u32,
    pub electrode_count: usize,
}

/// Train on full recordings: both modalities, one model per material.
pub fn train(recordings: &[MaterialRecording], cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if recordings.len() < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 labeled materials, got {}",
            recordings.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in recordings {
        if !seen.insert(r.name.as_str()) {
            return Err(Error::Config(format!("duplicate material label `{}`", r.name)));
        }
    }

    let materials = window_materials(recordings, cfg.dt)?;
    for m in &materials {
        if m.windows.is_empty() {
            return Err(Error::Config(format!(
                "material `{}` has no complete {} s window",
                m.name, cfg.dt
            )));
        }
    }

    let (projection, vib) = fit_vibration_models(&materials, cfg)?;
    let thermal_fits = fit_thermal_models(&materials, cfg)?;

    let header = &recordings[0].header;
    let mut models = Vec::with_capacity(materials.len());
    let mut vib_components = Vec::with_capacity(materials.len());
    let mut thermal_components = Vec::with_capacity(materials.len());
    for ((m, (vk, vg)), (tk, tg)) in materials.iter().zip(vib).zip(thermal_fits) {
        vib_components.push(vk);
        thermal_components.push(tk);
        models.push(MaterialModel {
            name: m.name.clone(),
            vib_gmm: vg,
            thermal_gmm: tg,
        });
    }
    Ok(TrainedModel {
        projection,
        materials: models,
        vib_components,
        thermal_components,
        config: cfg.clone(),
        vibration_rate: header.vibration_rate,
        lowrate: header.lowrate,
        electrode_count: header.electrode_count,
    })
}

//! Recursive Bayesian posterior over materials.
//!
//! Each window multiplies the running prior by the per-material feature
//! likelihoods (vibration, and thermal when present, fused as
//! conditionally independent) and renormalizes; the posterior becomes the
//! next window's prior. All accumulation happens in log space — the
//! printed product form underflows long before a realistic session ends.
//!
//! A small posterior floor (configurable, 0 disables it) keeps one
//! outlier window from locking any material at exactly zero forever.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gmm::{MaterialModel, PreparedGmm};
use crate::numeric::logsumexp;
use crate::spectral::VibrationFeature;
use crate::thermal::ThermalFeature;

/// Default posterior floor applied after each update.
pub const DEFAULT_POSTERIOR_FLOOR: f64 = 1e-12;

/// Posterior over N materials after `step` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    probs: Vec<f64>,
    step: u64,
}

impl PosteriorState {
    /// Current material probabilities (sum to 1).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// Outcome of reading the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Index of the most probable material; `None` when a confidence
    /// threshold is set and unmet.
    pub material_index: Option<usize>,
    /// The maximum posterior probability.
    pub confidence: f64,
    /// Set when the maximum is an exact tie (broken to the lowest index).
    pub tie_flag: bool,
}

/// A material's likelihood models with cached factorizations.
pub struct PreparedMaterial {
    pub name: String,
    pub vib: PreparedGmm,
    pub thermal: PreparedGmm,
}

impl PreparedMaterial {
    pub fn from_model(model: &MaterialModel) -> Result<Self> {
        Ok(PreparedMaterial {
            name: model.name.clone(),
            vib: model.vib_gmm.prepare()?,
            thermal: model.thermal_gmm.prepare()?,
        })
    }
}

/// Uniform prior over `n >= 2` materials.
pub fn init_uniform(n: usize) -> Result<PosteriorState> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "classification needs at least 2 materials, got {n}"
        )));
    }
    Ok(PosteriorState {
        probs: vec![1.0 / n as f64; n],
        step: 0,
    })
}

/// Per-material joint log-likelihood of one window's features.
///
/// The thermal term is skipped when `theta` is absent (vibration-only
/// operation). Errors name the material and modality when a likelihood
/// is not finite.
pub fn window_log_likelihoods(
    rho: &VibrationFeature,
    theta: Option<&ThermalFeature>,
    models: &[PreparedMaterial],
) -> Result<Vec<f64>> {
    let theta_vec: Option<DVector<f64>> = theta.map(|t| t.to_vector());
    let mut out = Vec::with_capacity(models.len());
    for m in models {
        let mut ll = m.vib.log_density(&rho.0)?;
        if !ll.is_finite() {
            return Err(Error::NonFiniteLikelihood {
                material: m.name.clone(),
                modality: "vibration",
            });
        }
        if let Some(t) = &theta_vec {
            let lt = m.thermal.log_density(t)?;
            if !lt.is_finite() {
                return Err(Error::NonFiniteLikelihood {
                    material: m.name.clone(),
                    modality: "thermal",
                });
            }
            ll += lt;
        }
        out.push(ll);
    }
    Ok(out)
}

/// One recursive Bayes update from a window's features.
pub fn update(
    state: &PosteriorState,
    rho: &VibrationFeature,
    theta: Option<&ThermalFeature>,
    models: &[PreparedMaterial],
    floor: f64,
) -> Result<PosteriorState> {
    if models.len() != state.probs.len() {
        return Err(Error::Shape(format!(
            "{} models against a posterior over {} materials",
            models.len(),
            state.probs.len()
        )));
    }
    let log_liks = window_log_likelihoods(rho, theta, models)?;
    update_with_log_likelihoods(state, &log_liks, floor)
}

/// Recursive Bayes update from precomputed per-material joint
/// log-likelihoods. This is the arithmetic core of [`update`]; the
/// evaluation harness feeds it cached likelihood rows.
pub fn update_with_log_likelihoods(
    state: &PosteriorState,
    log_liks: &[f64],
    floor: f64,
) -> Result<PosteriorState> {
    let n = state.probs.len();
    if log_liks.len() != n {
        return Err(Error::Shape(format!(
            "{} likelihoods against a posterior over {n} materials",
            log_liks.len()
        )));
    }
    if log_liks.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::Parameter(
            "non-finite log-likelihood in posterior update".into(),
        ));
    }

    let scores: Vec<f64> = state
        .probs
        .iter()
        .zip(log_liks)
        .map(|(&p, &ll)| p.ln() + ll)
        .collect();
    let norm = logsumexp(&scores);
    if !norm.is_finite() {
        return Err(Error::Parameter(
            "posterior normalization is not finite (all materials at zero likelihood)".into(),
        ));
    }
    let mut probs: Vec<f64> = scores.iter().map(|s| (s - norm).exp()).collect();
    floor_and_normalize(&mut probs, floor)?;
    Ok(PosteriorState {
        probs,
        step: state.step + 1,
    })
}

/// Clamp entries below `floor` up to it and rescale the rest so the
/// vector still sums to one, with no entry ending below the floor.
fn floor_and_normalize(probs: &mut [f64], floor: f64) -> Result<()> {
    let n = probs.len();
    if floor < 0.0 || floor * n as f64 >= 1.0 {
        return Err(Error::Parameter(format!(
            "posterior floor {floor} infeasible for {n} materials"
        )));
    }
    if floor == 0.0 {
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        return Ok(());
    }
    let mut floored = vec![false; n];
    loop {
        let mut fixed = 0usize;
        for (p, f) in probs.iter_mut().zip(&mut floored) {
            if *p < floor {
                *f = true;
            }
            if *f {
                *p = floor;
                fixed += 1;
            }
        }
        let free_sum: f64 = probs
            .iter()
            .zip(&floored)
            .filter(|(_, f)| !**f)
            .map(|(p, _)| *p)
            .sum();
        let target = 1.0 - fixed as f64 * floor;
        let scale = target / free_sum;
        let mut violated = false;
        for (p, f) in probs.iter_mut().zip(&floored) {
            if !*f {
                *p *= scale;
                violated |= *p < floor;
            }
        }
        if !violated {
            return Ok(());
        }
    }
}

/// Read the posterior: argmax (ties to the lowest index, flagged), or
/// undecided when `threshold` is set and the maximum falls short.
pub fn classify(state: &PosteriorState, threshold: Option<f64>) -> Decision {
    let mut best = 0;
    for (i, &p) in state.probs.iter().enumerate() {
        if p > state.probs[best] {
            best = i;
        }
    }
    let confidence = state.probs[best];
    let tie_flag = state
        .probs
        .iter()
        .enumerate()
        .any(|(i, &p)| i != best && p == confidence);
    let material_index = match threshold {
        Some(t) if confidence < t => None,
        _ => Some(best),
    };
    Decision {
        material_index,
        confidence,
        tie_flag,
    }
}

//! Cross-validated evaluation: contiguous fold splits, suffix-truncation
//! recognition-time measurement, error accounting, and the
//! vibration-only vs multi-modal comparison.
//!
//! Each fold trains on the other folds' contiguous segments and replays
//! the held-out segment as a batch of sessions: session `s` starts with
//! uniform priors at window `s` and runs to the end of the segment, so a
//! `W`-window segment yields `W` sessions of every length down to one
//! window. A session counts as recognized at the first window from which
//! the true material holds the posterior argmax through to the end
//! (`stable-to-end`; `first-hit` relaxes this to the first correct
//! argmax), and as misclassified when no such window exists.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify, init_uniform, update_with_log_likelihoods};
use crate::error::{Error, Result};
use crate::exec;
use crate::gmm::PreparedGmm;
use crate::numeric::{derive_seed, mean, population_std};
use crate::pipeline::{
    fit_thermal_models, fit_vibration_models, MaterialRecording, MaterialWindows, TrainConfig,
};
use crate::spectral;
use crate::stream::SensorWindow;
use crate::synth::{recording_seed, synth_recording, BenchSuite, Manifest};
use crate::thermal::{self, ContactConfig};

/// Which feature channels drive the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    VibrationOnly,
    MultiModal,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::VibrationOnly => "vibration",
            Modality::MultiModal => "multimodal",
        }
    }
}

/// When a session counts as recognized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeRule {
    /// Correct argmax that persists to the end of the session.
    StableToEnd,
    /// First window with the correct argmax, later flips ignored.
    FirstHit,
}

impl TimeRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeRule::StableToEnd => "stable-to-end",
            TimeRule::FirstHit => "first-hit",
        }
    }
}

/// Evaluation settings on top of the training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub train: TrainConfig,
    pub folds: usize,
    pub time_rule: TimeRule,
    pub posterior_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train: TrainConfig::default(),
            folds: 10,
            time_rule: TimeRule::StableToEnd,
            posterior_floor: crate::classifier::DEFAULT_POSTERIOR_FLOOR,
        }
    }
}

/// A labeled dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub materials: Vec<MaterialRecording>,
}

impl Dataset {
    /// Generate every suite material (data-parallel, seeded per
    /// material).
    pub fn from_suite(suite: &BenchSuite) -> Result<Dataset> {
        suite.validate(
            crate::stream::DEFAULT_DT,
            spectral::DEFAULT_F_LO,
            spectral::DEFAULT_F_HI,
        )?;
        let generated: Result<Vec<MaterialRecording>> =
            exec::map_indices(suite.specs.len(), |i| {
                let spec = &suite.specs[i];
                let (header, ticks) = synth_recording(
                    spec,
                    suite.duration_per_material,
                    recording_seed(suite.seed, i),
                )?;
                Ok(MaterialRecording {
                    name: spec.name.clone(),
                    header,
                    ticks,
                })
            })
            .into_iter()
            .collect();
        Ok(Dataset {
            materials: generated?,
        })
    }

    /// Load every recording listed in a manifest (paths relative to the
    /// manifest's directory).
    pub fn from_manifest(manifest: &Manifest, base_dir: &Path) -> Result<Dataset> {
        let mut materials = Vec::with_capacity(manifest.recordings.len());
        for entry in &manifest.recordings {
            let (header, ticks) = crate::stream::load_recording(&base_dir.join(&entry.path))?;
            materials.push(MaterialRecording {
                name: entry.label.clone(),
                header,
                ticks,
            });
        }
        Ok(Dataset { materials })
    }
}

/// Contiguous, disjoint, equal-length tick ranges per material and fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub folds: usize,
    /// `segments[material][fold]` is the held-out tick range of that fold.
    pub segments: Vec<Vec<Range<usize>>>,
}

/// Plan `folds` equal window-aligned segments per material. Trailing
/// ticks that do not fill a whole segment are unused.
pub fn fold_plan(dataset: &Dataset, dt: f64, folds: usize) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::Parameter(format!(
            "cross validation needs at least 2 folds, got {folds}"
        )));
    }
    let mut segments = Vec::with_capacity(dataset.materials.len());
    for m in &dataset.materials {
        let tpw = m.header.ticks_per_window(dt)?;
        let total_windows = m.ticks.len() / tpw;
        let wpf = total_windows / folds;
        if wpf == 0 {
            return Err(Error::Config(format!(
                "material `{}`: {total_windows} windows cannot fill {folds} folds",
                m.name
            )));
        }
        let seg_ticks = wpf * tpw;
        segments.push(
            (0..folds)
                .map(|f| f * seg_ticks..(f + 1) * seg_ticks)
                .collect(),
        );
    }
    Ok(FoldPlan { folds, segments })
}

/// Recognition time of one session given its per-window argmax sequence,
/// or `None` when the session never recognizes the true material.
pub fn session_recognition_time(
    argmax: &[usize],
    truth: usize,
    dt: f64,
    rule: TimeRule,
) -> Option<f64> {
    if argmax.is_empty() {
        return None;
    }
    match rule {
        TimeRule::StableToEnd => {
            let trailing = argmax.iter().rev().take_while(|&&a| a == truth).count();
            (trailing > 0).then(|| dt * (argmax.len() - trailing + 1) as f64)
        }
        TimeRule::FirstHit => argmax
            .iter()
            .position(|&a| a == truth)
            .map(|i| dt * (i + 1) as f64),
    }
}

/// Session tallies for one material within one fold (or aggregated).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMetrics {
    pub material: String,
    pub sessions: usize,
    pub misclassified: usize,
    /// Recognition times of the successful sessions, in session order.
    pub times: Vec<f64>,
}

/// Metrics of a single fold, in test-material order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub per_material: Vec<MaterialMetrics>,
}

struct FoldModels {
    names: Vec<String>,
    projection: spectral::ProjectionModel,
    vib: Vec<PreparedGmm>,
    thermal: Option<Vec<PreparedGmm>>,
}

fn fit_fold_models(
    train: &[MaterialWindows],
    modality: Modality,
    cfg: &TrainConfig,
) -> Result<FoldModels> {
    let (projection, vib_fits) = fit_vibration_models(train, cfg)?;
    let vib = vib_fits
        .iter()
        .map(|(_, g)| g.prepare())
        .collect::<Result<Vec<_>>>()?;
    let thermal = match modality {
        Modality::VibrationOnly => None,
        Modality::MultiModal => Some(
            fit_thermal_models(train, cfg)?
                .iter()
                .map(|(_, g)| g.prepare())
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    Ok(FoldModels {
        names: train.iter().map(|m| m.name.clone()).collect(),
        projection,
        vib,
        thermal,
    })
}

/// Joint log-likelihood rows (one per window, one entry per material).
fn likelihood_rows(
    windows: &[SensorWindow],
    models: &FoldModels,
    cfg: &TrainConfig,
) -> Result<Vec<Vec<f64>>> {
    let spectra = spectral::batch_spectra(windows, cfg.f_lo, cfg.f_hi)?;
    let feats = spectral::batch_project(&spectra, &models.projection)?;
    let thermal_feats = match (&models.thermal, windows.first()) {
        (Some(_), Some(w)) => {
            let contact = ContactConfig::from_header(w.header, cfg.e_m);
            Some(thermal::batch_thermal(windows, &contact, cfg.temp_floor)?)
        }
        _ => None,
    };

    let mut rows = Vec::with_capacity(windows.len());
    for (t, feat) in feats.iter().enumerate() {
        let mut row = Vec::with_capacity(models.names.len());
        for (j, vib) in models.vib.iter().enumerate() {
            let mut ll = vib.log_density(&feat.0)?;
            if !ll.is_finite() {
                return Err(Error::NonFiniteLikelihood {
                    material: models.names[j].clone(),
                    modality: "vibration",
                });
            }
            if let (Some(thermal_gmms), Some(tf)) = (&models.thermal, &thermal_feats) {
                let lt = thermal_gmms[j].log_density(&tf[t].to_vector())?;
                if !lt.is_finite() {
                    return Err(Error::NonFiniteLikelihood {
                        material: models.names[j].clone(),
                        modality: "thermal",
                    });
                }
                ll += lt;
            }
            row.push(ll);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Train on `train` and replay every suffix session of each `test`
/// segment.
pub fn run_fold(
    train: &[MaterialWindows],
    test: &[MaterialWindows],
    modality: Modality,
    cfg: &EvalConfig,
) -> Result<FoldMetrics> {
    for t in test {
        if !train.iter().any(|m| m.name == t.name) {
            return Err(Error::Config(format!(
                "material `{}` present in test but absent in train",
                t.name
            )));
        }
        if t.windows.is_empty() {
            return Err(Error::Config(format!(
                "material `{}` has no test windows",
                t.name
            )));
        }
    }
    let models = fit_fold_models(train, modality, &cfg.train)?;

    let per_material: Result<Vec<MaterialMetrics>> = exec::map_indices(test.len(), |ti| {
        let t = &test[ti];
        let truth = models.names.iter().position(|n| n == &t.name).unwrap();
        let rows = likelihood_rows(&t.windows, &models, &cfg.train)?;
        let w = rows.len();
        let n = models.names.len();
        let mut times = Vec::new();
        let mut misclassified = 0;
        for start in 0..w {
            let mut state = init_uniform(n)?;
            let mut argmax = Vec::with_capacity(w - start);
            for row in &rows[start..] {
                state = update_with_log_likelihoods(&state, row, cfg.posterior_floor)?;
                argmax.push(classify(&state, None).material_index.unwrap());
            }
            match session_recognition_time(&argmax, truth, cfg.train.dt, cfg.time_rule) {
                Some(t) => times.push(t),
                None => misclassified += 1,
            }
        }
        Ok(MaterialMetrics {
            material: t.name.clone(),
            sessions: w,
            misclassified,
            times,
        })
    })
    .into_iter()
    .collect();

    Ok(FoldMetrics {
        per_material: per_material?,
    })
}

/// Per-material row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialReport {
    pub material: String,
    pub sessions: usize,
    pub misclassified: usize,
    /// misclassified / sessions, exactly.
    pub error_rate: f64,
    /// Mean recognition time over successful sessions; null when none
    /// succeeded.
    pub mean_time_s: Option<f64>,
    /// Population standard deviation of those times.
    pub std_time_s: Option<f64>,
}

/// Averages across materials (times) and totals (sessions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallReport {
    pub sessions: usize,
    pub misclassified: usize,
    pub error_rate: f64,
    /// Mean of the per-material mean times.
    pub mean_time_s: Option<f64>,
    /// Mean of the per-material time standard deviations.
    pub std_time_s: Option<f64>,
}

/// Configuration snapshot embedded in each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub band: [f64; 2],
    pub variance_target: f64,
    pub k_max: usize,
    pub holdout_fraction: f64,
    pub tau_knee: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub posterior_floor: f64,
    pub time_rule: String,
}

/// Cross-validated evaluation results for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub modality: String,
    pub dt: f64,
    pub folds: usize,
    pub seed: u64,
    pub config: ReportConfig,
    pub per_material: Vec<MaterialReport>,
    pub overall: OverallReport,
}

/// CSV column header shared by single-modality and comparison reports.
pub const REPORT_CSV_HEADER: &str =
    "modality,material,sessions,misclassified,error_rate,mean_time_s,std_time_s";

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

impl EvalReport {
    pub fn material(&self, name: &str) -> Option<&MaterialReport> {
        self.per_material.iter().find(|m| m.material == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    fn csv_rows(&self) -> String {
        let mut out = String::new();
        for m in &self.per_material {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.modality,
                m.material,
                m.sessions,
                m.misclassified,
                m.error_rate,
                csv_opt(m.mean_time_s),
                csv_opt(m.std_time_s)
            ));
        }
        out.push_str(&format!(
            "{},ALL,{},{},{},{},{}\n",
            self.modality,
            self.overall.sessions,
            self.overall.misclassified,
            self.overall.error_rate,
            csv_opt(self.overall.mean_time_s),
            csv_opt(self.overall.std_time_s)
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}", self.csv_rows())
    }
}

fn material_report(metrics: &MaterialMetrics) -> MaterialReport {
    let (mean_time_s, std_time_s) = if metrics.times.is_empty() {
        (None, None)
    } else {
        (
            Some(mean(&metrics.times)),
            Some(population_std(&metrics.times)),
        )
    };
    MaterialReport {
        material: metrics.material.clone(),
        sessions: metrics.sessions,
        misclassified: metrics.misclassified,
        error_rate: metrics.misclassified as f64 / metrics.sessions as f64,
        mean_time_s,
        std_time_s,
    }
}

/// Run the full fold loop for one modality. Folds execute in parallel
/// under the `parallel` feature; aggregation follows fold order, so the
/// report is identical either way.
pub fn cross_validate(
    dataset: &Dataset,
    modality: Modality,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.train.validate()?;
    let plan = fold_plan(dataset, cfg.train.dt, cfg.folds)?;

    let fold_results: Result<Vec<FoldMetrics>> = exec::map_indices(plan.folds, |f| {
        let mut train_refs = Vec::with_capacity(dataset.materials.len());
        let mut test_refs = Vec::with_capacity(dataset.materials.len());
        for (mi, m) in dataset.materials.iter().enumerate() {
            let held = &plan.segments[mi][f];
            let end = plan.segments[mi].last().unwrap().end;
            let mut train_windows = Vec::new();
            for range in [0..held.start, held.end..end] {
                if !range.is_empty() {
                    train_windows.extend(crate::stream::windows(
                        &m.ticks[range],
                        &m.header,
                        cfg.train.dt,
                    )?);
                }
            }
            train_refs.push(MaterialWindows {
                name: m.name.clone(),
                header: &m.header,
                windows: train_windows,
            });
            test_refs.push(MaterialWindows {
                name: m.name.clone(),
                header: &m.header,
                windows: crate::stream::windows(
                    &m.ticks[held.clone()],
                    &m.header,
                    cfg.train.dt,
                )?,
            });
        }
        let fold_cfg = EvalConfig {
            train: TrainConfig {
                seed: derive_seed(cfg.train.seed, 1000 + f as u64),
                ..cfg.train.clone()
            },
            ..cfg.clone()
        };
        run_fold(&train_refs, &test_refs, modality, &fold_cfg)
    })
    .into_iter()
    .collect();

    // Merge fold metrics per material, in material and fold order.
    let mut merged: Vec<MaterialMetrics> = dataset
        .materials
        .iter()
        .map(|m| MaterialMetrics {
            material: m.name.clone(),
            sessions: 0,
            misclassified: 0,
            times: Vec::new(),
        })
        .collect();
    for fold in fold_results? {
        for (acc, fm) in merged.iter_mut().zip(&fold.per_material) {
            acc.sessions += fm.sessions;
            acc.misclassified += fm.misclassified;
            acc.times.extend_from_slice(&fm.times);
        }
    }

    let per_material: Vec<MaterialReport> = merged.iter().map(material_report).collect();
    let sessions: usize = per_material.iter().map(|m| m.sessions).sum();
    let misclassified: usize = per_material.iter().map(|m| m.misclassified).sum();
    let means: Vec<f64> = per_material.iter().filter_map(|m| m.mean_time_s).collect();
    let stds: Vec<f64> = per_material.iter().filter_map(|m| m.std_time_s).collect();
    let overall = OverallReport {
        sessions,
        misclassified,
        error_rate: misclassified as f64 / sessions as f64,
        mean_time_s: (!means.is_empty()).then(|| mean(&means)),
        std_time_s: (!stds.is_empty()).then(|| mean(&stds)),
    };

    Ok(EvalReport {
        version: 1,
        modality: modality.as_str().to_string(),
        dt: cfg.train.dt,
        folds: cfg.folds,
        seed: cfg.train.seed,
        config: ReportConfig {
            band: [cfg.train.f_lo, cfg.train.f_hi],
            variance_target: cfg.train.variance_target,
            k_max: cfg.train.k_max,
            holdout_fraction: cfg.train.holdout_fraction,
            tau_knee: cfg.train.tau_knee,
            em_tol: cfg.train.em.tol,
            em_max_iter: cfg.train.em.max_iter,
            posterior_floor: cfg.posterior_floor,
            time_rule: cfg.time_rule.as_str().to_string(),
        },
        per_material,
        overall,
    })
}

/// Both modalities plus headline deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub version: u32,
    pub vibration: EvalReport,
    pub multimodal: EvalReport,
    pub comparison: ComparisonSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSection {
    pub mean_time_vibration_s: Option<f64>,
    pub mean_time_multimodal_s: Option<f64>,
    /// (vibration - multimodal) / vibration mean time.
    pub time_improvement_fraction: Option<f64>,
    pub error_rate_vibration: f64,
    pub error_rate_multimodal: f64,
    /// (vibration - multimodal) / vibration error rate.
    pub error_reduction_fraction: Option<f64>,
}

impl ComparisonReport {
    pub fn new(vibration: EvalReport, multimodal: EvalReport) -> ComparisonReport {
        let time_improvement_fraction = match (
            vibration.overall.mean_time_s,
            multimodal.overall.mean_time_s,
        ) {
            (Some(v), Some(m)) if v > 0.0 => Some((v - m) / v),
            _ => None,
        };
        let ev = vibration.overall.error_rate;
        let em = multimodal.overall.error_rate;
        let error_reduction_fraction = (ev > 0.0).then(|| (ev - em) / ev);
        ComparisonReport {
            version: 1,
            comparison: ComparisonSection {
                mean_time_vibration_s: vibration.overall.mean_time_s,
                mean_time_multimodal_s: multimodal.overall.mean_time_s,
                time_improvement_fraction,
                error_rate_vibration: ev,
                error_rate_multimodal: em,
                error_reduction_fraction,
            },
            vibration,
            multimodal,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    /// One CSV with both modalities' rows.
    pub fn to_csv(&self) -> String {
        format!(
            "{REPORT_CSV_HEADER}\n{}{}",
            self.vibration.csv_rows(),
            self.multimodal.csv_rows()
        )
    }
}

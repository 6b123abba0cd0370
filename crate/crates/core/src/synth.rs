//! Seeded synthetic recordings for configurable virtual materials.
//!
//! Each material is a set of texture tones (on-bin frequencies so clean
//! specs produce leak-free spectra), Gaussian vibration noise, a relative
//! thermal conductivity driving the mean heat flux, a per-electrode
//! contact profile, and a centered linear flux drift. Generation is a
//! pure function of (spec, duration, seed), so suites regenerate
//! bit-identically.
//!
//! The default suite contains eight materials, two pairs of which share
//! identical texture tones and differ only 2x in conductivity — the
//! vibration channel cannot tell pair members apart, the thermal channel
//! can.

use std::f64::consts::PI;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::numeric::derive_seed;
use crate::stream::{RecordingHeader, Tick, DEFAULT_DT};

/// Mean flux emitted by a material of conductivity 1 (counts).
pub const BASE_FLUX: f64 = 100.0;
/// Resting impedance level written into generated headers (counts).
pub const RESTING_LEVEL: f64 = 3000.0;
/// Core temperature of the default suite's materials (counts).
pub const DEFAULT_CORE_TEMP: f64 = 2500.0;

/// A virtual material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    /// Texture tones as (frequency Hz, amplitude counts), inside the
    /// analysis band.
    pub texture_peaks: Vec<(f64, f64)>,
    /// Vibration noise standard deviation (counts).
    pub vib_noise: f64,
    /// Relative thermal conductivity; mean flux = conductivity * BASE_FLUX.
    pub conductivity: f64,
    /// Per-electrode mean impedance delta from resting (counts).
    pub contact_profile: Vec<f64>,
    /// Linear flux drift in counts/s, centered on the recording midpoint
    /// so the recording-mean flux stays conductivity * BASE_FLUX.
    pub flux_drift: f64,
    /// Flux noise standard deviation (counts); electrode jitter shares
    /// this scale.
    pub flux_noise: f64,
    /// Core temperature (counts), constant over the recording.
    pub core_temp: f64,
}

impl MaterialSpec {
    /// Check invariants against the analysis band `[f_lo, f_hi)`.
    pub fn validate(&self, f_lo: f64, f_hi: f64) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.contains("..") {
            return Err(Error::Parameter(format!(
                "material name `{}` is empty or not filename-safe",
                self.name
            )));
        }
        for &(f, a) in &self.texture_peaks {
            if !(f >= f_lo && f < f_hi) {
                return Err(Error::Parameter(format!(
                    "{}: texture peak at {f} Hz outside band [{f_lo}, {f_hi})",
                    self.name
                )));
            }
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Parameter(format!(
                    "{}: texture amplitude {a} invalid",
                    self.name
                )));
            }
        }
        if !(self.conductivity > 0.0 && self.conductivity.is_finite()) {
            return Err(Error::Parameter(format!(
                "{}: conductivity must be positive, got {}",
                self.name, self.conductivity
            )));
        }
        if !(self.core_temp > 0.0 && self.core_temp.is_finite()) {
            return Err(Error::Parameter(format!(
                "{}: core temperature must be positive, got {}",
                self.name, self.core_temp
            )));
        }
        if self.vib_noise < 0.0 || self.flux_noise < 0.0 {
            return Err(Error::Parameter(format!(
                "{}: noise standard deviations must be non-negative",
                self.name
            )));
        }
        if !self.contact_profile.iter().all(|d| d.is_finite()) {
            return Err(Error::Parameter(format!(
                "{}: contact profile must be finite",
                self.name
            )));
        }
        Ok(())
    }
}

/// A benchmark: materials, per-material duration, fold count, base seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSuite {
    pub specs: Vec<MaterialSpec>,
    pub duration_per_material: f64,
    pub folds: usize,
    pub seed: u64,
}

impl BenchSuite {
    /// Check that the duration splits into `folds` groups of whole
    /// windows of length `dt`, and that every spec is valid.
    pub fn validate(&self, dt: f64, f_lo: f64, f_hi: f64) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Parameter(format!(
                "suite needs at least 2 folds, got {}",
                self.folds
            )));
        }
        let windows = self.duration_per_material / dt;
        if (windows - windows.round()).abs() > 1e-9 || windows < 1.0 {
            return Err(Error::Parameter(format!(
                "duration {} s is not a whole number of {dt} s windows",
                self.duration_per_material
            )));
        }
        if windows.round() as usize % self.folds != 0 {
            return Err(Error::Parameter(format!(
                "{} windows do not divide into {} folds",
                windows.round(),
                self.folds
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.specs {
            spec.validate(f_lo, f_hi)?;
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::Parameter(format!(
                    "duplicate material name `{}`",
                    spec.name
                )));
            }
        }
        Ok(())
    }
}

/// The seed for one material's recording within a suite.
pub fn recording_seed(suite_seed: u64, material_index: usize) -> u64 {
    derive_seed(suite_seed, 0x4ec0 + material_index as u64)
}

/// Generate one recording: header plus `duration * lowrate` ticks.
///
/// Deterministic in (spec, duration, seed).
pub fn synth_recording(
    spec: &MaterialSpec,
    duration: f64,
    seed: u64,
) -> Result<(RecordingHeader, Vec<Tick>)> {
    spec.validate(crate::spectral::DEFAULT_F_LO, crate::spectral::DEFAULT_F_HI)?;
    if !(duration >= DEFAULT_DT) {
        return Err(Error::Parameter(format!(
            "duration {duration} s is shorter than one {DEFAULT_DT} s window"
        )));
    }
    let header = RecordingHeader {
        material_label: Some(spec.name.clone()),
        ..Default::default()
    };
    if spec.contact_profile.len() != header.electrode_count {
        return Err(Error::Parameter(format!(
            "{}: contact profile has {} entries for {} electrodes",
            spec.name,
            spec.contact_profile.len(),
            header.electrode_count
        )));
    }

    let lowrate = header.lowrate as f64;
    let vib_rate = header.vibration_rate as f64;
    let vpt = header.vib_per_tick();
    let tick_count = (duration * lowrate).round() as usize;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let phases: Vec<f64> = spec
        .texture_peaks
        .iter()
        .map(|_| rng.random::<f64>() * 2.0 * PI)
        .collect();

    let mean_flux = spec.conductivity * BASE_FLUX;
    let mut ticks = Vec::with_capacity(tick_count);
    for k in 0..tick_count {
        let mut vibration = Vec::with_capacity(vpt);
        for s in 0..vpt {
            let t = (k * vpt + s) as f64 / vib_rate;
            let mut v = 0.0;
            for (&(f, a), &phase) in spec.texture_peaks.iter().zip(&phases) {
                v += a * (2.0 * PI * f * t + phase).sin();
            }
            let z: f64 = rng.sample(StandardNormal);
            vibration.push(v + spec.vib_noise * z);
        }
        // Flux drift uses the tick midpoint so the recording average
        // stays exactly at the conductivity-scaled base flux.
        let t_mid = (k as f64 + 0.5) / lowrate;
        let zf: f64 = rng.sample(StandardNormal);
        let flux = mean_flux + spec.flux_drift * (t_mid - duration / 2.0) + spec.flux_noise * zf;
        let electrodes = spec
            .contact_profile
            .iter()
            .zip(&header.electrode_resting)
            .map(|(&d, &rest)| {
                let ze: f64 = rng.sample(StandardNormal);
                rest + d + spec.flux_noise * ze
            })
            .collect();
        ticks.push(Tick {
            vibration,
            flux,
            core_temp: spec.core_temp,
            electrodes,
        });
    }
    Ok((header, ticks))
}

fn suite_contact_profile() -> Vec<f64> {
    let mut p = vec![0.0; 19];
    p[..6].fill(-600.0);
    p[6..12].fill(-300.0);
    p
}

fn suite_spec(
    name: &str,
    peaks: &[(f64, f64)],
    vib_noise: f64,
    conductivity: f64,
    flux_drift: f64,
) -> MaterialSpec {
    MaterialSpec {
        name: name.to_string(),
        texture_peaks: peaks.to_vec(),
        vib_noise,
        conductivity,
        contact_profile: suite_contact_profile(),
        flux_drift,
        flux_noise: 30.0,
        core_temp: DEFAULT_CORE_TEMP,
    }
}

/// The standard eight-material benchmark: two vibration-confusable pairs
/// (identical tones, 2x conductivity apart), two spectrally distinct
/// singles, and one near-ambiguous single pair (slate/steel share their
/// strong tone; steel adds one near-noise-floor tone and sits close in
/// conductivity, so neither channel alone resolves them instantly).
/// 60 s per material, 10 folds.
pub fn default_suite(seed: u64) -> BenchSuite {
    let foam = [(60.0, 40.0), (180.0, 25.0)];
    let laminate = [(120.0, 35.0), (320.0, 30.0)];
    BenchSuite {
        specs: vec![
            suite_spec("foam_a", &foam, 6.0, 0.5, 0.3),
            suite_spec("foam_b", &foam, 6.0, 1.0, 0.3),
            suite_spec("laminate_a", &laminate, 6.0, 1.5, -0.2),
            suite_spec("laminate_b", &laminate, 6.0, 3.0, -0.2),
            suite_spec("cork", &[(24.0, 45.0)], 5.0, 0.8, 0.15),
            suite_spec(
                "denim",
                &[(88.0, 30.0), (240.0, 35.0), (400.0, 20.0)],
                5.0,
                1.2,
                0.25,
            ),
            suite_spec("slate", &[(200.0, 50.0)], 5.0, 2.2, -0.2),
            suite_spec("steel", &[(200.0, 50.0), (452.0, 1.8)], 5.0, 2.45, 0.1),
        ],
        duration_per_material: 60.0,
        folds: 10,
        seed,
    }
}

/// Names of the suite's vibration-confusable pairs: materials sharing
/// identical texture tones with another material.
pub fn confusable_pairs(suite: &BenchSuite) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for i in 0..suite.specs.len() {
        for j in (i + 1)..suite.specs.len() {
            if suite.specs[i].texture_peaks == suite.specs[j].texture_peaks {
                pairs.push((suite.specs[i].name.clone(), suite.specs[j].name.clone()));
            }
        }
    }
    pairs
}

/// Dataset manifest: what `synth` wrote, for `train`/`eval` to consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub duration_per_material: f64,
    pub folds: usize,
    pub recordings: Vec<ManifestEntry>,
}

/// One recording file and its material label. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
}

/// Current manifest format version.
pub const MANIFEST_VERSION: u32 = 1;

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "manifest: unsupported version {}",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Generate every suite recording and write it (plus the manifest) under
/// `out_dir`. Returns the manifest path.
pub fn write_suite(suite: &BenchSuite, out_dir: &Path) -> Result<std::path::PathBuf> {
    suite.validate(
        DEFAULT_DT,
        crate::spectral::DEFAULT_F_LO,
        crate::spectral::DEFAULT_F_HI,
    )?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let generated: Result<Vec<(RecordingHeader, Vec<Tick>)>> =
        exec::map_indices(suite.specs.len(), |i| {
            synth_recording(
                &suite.specs[i],
                suite.duration_per_material,
                recording_seed(suite.seed, i),
            )
        })
        .into_iter()
        .collect();

    let mut entries = Vec::with_capacity(suite.specs.len());
    for (spec, (header, ticks)) in suite.specs.iter().zip(generated?) {
        let file = format!("{}.rec", spec.name);
        crate::stream::save_recording(&out_dir.join(&file), &header, &ticks)?;
        entries.push(ManifestEntry {
            path: file,
            label: spec.name.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: suite.seed,
        duration_per_material: suite.duration_per_material,
        folds: suite.folds,
        recordings: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::compute_spectrum;
    use crate::stream::windows;
    use crate::thermal::{batch_thermal, contact_area, ContactConfig};

    fn clean_spec(peaks: &[(f64, f64)], conductivity: f64) -> MaterialSpec {
        MaterialSpec {
            name: "probe".into(),
            texture_peaks: peaks.to_vec(),
            vib_noise: 0.0,
            conductivity,
            contact_profile: suite_contact_profile(),
            flux_drift: 0.0,
            flux_noise: 0.0,
            core_temp: DEFAULT_CORE_TEMP,
        }
    }

    #[test]
    fn single_tone_dominates_its_bin() {
        let spec = clean_spec(&[(100.0, 50.0)], 1.0);
        let (header, ticks) = synth_recording(&spec, 2.0, 3).unwrap();
        let ws = windows(&ticks, &header, 0.25).unwrap();
        for w in &ws {
            let s = compute_spectrum(w, 4.0, 500.0).unwrap();
            let peak_idx = 24;
            let peak = s.values[peak_idx].norm();
            let worst = s
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != peak_idx)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
            // >= 40 dB of power separation.
            assert!(worst * worst <= 1e-4 * peak * peak, "{worst} vs {peak}");
        }
    }

    #[test]
    fn off_peak_energy_is_negligible_for_clean_specs() {
        let spec = clean_spec(&[(60.0, 40.0), (180.0, 25.0)], 1.0);
        let (header, ticks) = synth_recording(&spec, 1.0, 9).unwrap();
        let ws = windows(&ticks, &header, 0.25).unwrap();
        let peak_bins = [14usize, 44]; // (60-4)/4, (180-4)/4
        for w in &ws {
            let s = compute_spectrum(w, 4.0, 500.0).unwrap();
            let peak_energy: f64 = peak_bins.iter().map(|&i| s.values[i].norm_sqr()).sum();
            let rest: f64 = s
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| !peak_bins.contains(i))
                .map(|(_, v)| v.norm_sqr())
                .sum();
            assert!(rest < 1e-6 * peak_energy);
        }
    }

    #[test]
    fn conductivity_ratio_shows_up_in_power_per_temp() {
        let a = clean_spec(&[(100.0, 30.0)], 1.0);
        let b = MaterialSpec {
            conductivity: 2.0,
            ..a.clone()
        };
        let (ha, ta) = synth_recording(&a, 1.0, 5).unwrap();
        let (hb, tb) = synth_recording(&b, 1.0, 5).unwrap();
        let wa = windows(&ta, &ha, 0.25).unwrap();
        let wb = windows(&tb, &hb, 0.25).unwrap();
        let cfg_a = ContactConfig::from_header(&ha, -400.0);
        let cfg_b = ContactConfig::from_header(&hb, -400.0);
        let fa = batch_thermal(&wa, &cfg_a, 1.0).unwrap();
        let fb = batch_thermal(&wb, &cfg_b, 1.0).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            let ratio = y.power_per_temp / x.power_per_temp;
            assert!((ratio - 2.0).abs() <= 1e-9, "ratio {ratio}");
        }
    }

    #[test]
    fn recording_mean_power_matches_configured_conductivity() {
        // Noise-free but with drift: the centered drift must cancel in
        // the recording mean.
        let mut spec = clean_spec(&[(100.0, 30.0)], 1.7);
        spec.flux_drift = 0.9;
        let duration = 6.0;
        let (header, ticks) = synth_recording(&spec, duration, 21).unwrap();
        let ws = windows(&ticks, &header, 0.25).unwrap();
        let cfg = ContactConfig::from_header(&header, -400.0);
        let feats = batch_thermal(&ws, &cfg, 1.0).unwrap();
        let mean_power: f64 =
            feats.iter().map(|f| f.power_per_temp).sum::<f64>() / feats.len() as f64;

        let e_avgs: Vec<f64> = header
            .electrode_resting
            .iter()
            .zip(&spec.contact_profile)
            .map(|(r, d)| r + d)
            .collect();
        let area = contact_area(&e_avgs, &cfg).unwrap();
        let expected = spec.conductivity * BASE_FLUX * area / spec.core_temp;
        assert!(
            (mean_power - expected).abs() <= 1e-9 * expected.abs(),
            "{mean_power} vs {expected}"
        );
    }

    #[test]
    fn drift_is_recovered_by_the_slope_feature() {
        let mut spec = clean_spec(&[], 1.0);
        spec.flux_drift = 0.7;
        let (header, ticks) = synth_recording(&spec, 1.0, 2).unwrap();
        let ws = windows(&ticks, &header, 0.25).unwrap();
        let cfg = ContactConfig::from_header(&header, -400.0);
        let feats = batch_thermal(&ws, &cfg, 1.0).unwrap();
        for f in &feats {
            assert!((f.flux_slope - 0.7).abs() < 1e-9);
            assert!(f.flux_err < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = default_suite(7).specs[0].clone();
        let a = synth_recording(&spec, 2.0, 42).unwrap();
        let b = synth_recording(&spec, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let text_a = crate::stream::format_recording(&a.0, &a.1);
        let text_b = crate::stream::format_recording(&b.0, &b.1);
        assert_eq!(text_a, text_b);
    }

    #[test]
    fn writer_round_trips_bit_exact() {
        let spec = default_suite(7).specs[3].clone();
        let (header, ticks) = synth_recording(&spec, 1.0, 42).unwrap();
        let text = crate::stream::format_recording(&header, &ticks);
        let (h2, t2) = crate::stream::parse_recording(&text).unwrap();
        assert_eq!(header, h2);
        assert_eq!(ticks, t2);
    }

    #[test]
    fn default_suite_shape() {
        for seed in [0u64, 7, 123] {
            let suite = default_suite(seed);
            assert_eq!(suite.specs.len(), 8);
            assert_eq!(confusable_pairs(&suite).len(), 2);
            suite.validate(0.25, 4.0, 500.0).unwrap();
            assert_eq!(suite.seed, seed);
            // 60 s at 0.25 s windows.
            assert_eq!((suite.duration_per_material / 0.25) as usize, 240);
            for (a, b) in confusable_pairs(&suite) {
                let ka = suite.specs.iter().find(|s| s.name == a).unwrap().conductivity;
                let kb = suite.specs.iter().find(|s| s.name == b).unwrap().conductivity;
                let ratio = (ka / kb).max(kb / ka);
                assert!((ratio - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut bad = clean_spec(&[(900.0, 10.0)], 1.0);
        assert!(bad.validate(4.0, 500.0).is_err());
        bad.texture_peaks = vec![(100.0, 1.0)];
        bad.conductivity = 0.0;
        assert!(bad.validate(4.0, 500.0).is_err());
        bad.conductivity = 1.0;
        bad.name = "a/b".into();
        assert!(bad.validate(4.0, 500.0).is_err());
    }

    #[test]
    fn too_short_duration_is_rejected() {
        let spec = clean_spec(&[], 1.0);
        assert!(matches!(
            synth_recording(&spec, 0.1, 0),
            Err(Error::Parameter(_))
        ));
    }
}

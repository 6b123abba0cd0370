//! Spectral vibration features: band-limited DFT and complex-mean-centered
//! PCA projection.
//!
//! A window's vibration signal is transformed with an unscaled complex
//! FFT (rectangular window, magnitudes unnormalized), restricted to the
//! analysis band, and projected to a low-dimensional feature vector. The
//! projection centers each retained bin with the *complex* mean of the
//! training spectra and applies PCA to the moduli of the centered values;
//! the output dimension is the smallest that retains the configured
//! fraction of modulus-space variance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec;
use crate::stream::SensorWindow;

/// Default analysis band lower edge in Hz (the bin spacing at the default
/// window length, i.e. the lowest resolvable frequency).
pub const DEFAULT_F_LO: f64 = 4.0;
/// Default analysis band upper edge in Hz.
pub const DEFAULT_F_HI: f64 = 500.0;
/// Default fraction of modulus-space variance the projection retains.
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.97;

/// Band-limited complex spectrum of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Complex amplitudes of the retained bins, by increasing frequency.
    pub values: Vec<Complex64>,
    /// Center frequency of each retained bin in Hz.
    pub bin_freqs: Vec<f64>,
}

impl Spectrum {
    pub fn bin_count(&self) -> usize {
        self.values.len()
    }
}

/// Fitted spectral projection: complex centering plus an orthonormal PCA
/// basis over bin moduli.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    /// Entrywise complex mean of the training spectra.
    pub complex_mean: Vec<Complex64>,
    /// PCA basis, one orthonormal row per output dimension (d x bins).
    pub basis: DMatrix<f64>,
    /// Fraction of training variance the basis actually retains.
    pub retained_variance: f64,
}

impl ProjectionModel {
    /// Output feature dimension d.
    pub fn output_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Retained spectral bin count.
    pub fn bin_count(&self) -> usize {
        self.basis.ncols()
    }
}

/// Reduced spectral feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VibrationFeature(pub DVector<f64>);

/// Unscaled complex DFT of a real signal (all n bins, no 1/n factor).
pub fn full_spectrum(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Indices of DFT bins falling in `[f_lo, f_hi)` for an n-point transform
/// at sampling rate `fs`. The half-open upper edge keeps the retained bin
/// count at 124 for the default 550-sample window and 4–500 Hz band.
fn band_bins(fs: f64, n: usize, f_lo: f64, f_hi: f64) -> Result<(usize, usize)> {
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi <= fs / 2.0) {
        return Err(Error::Parameter(format!(
            "frequency band [{f_lo}, {f_hi}) invalid for sampling rate {fs}"
        )));
    }
    let df = fs / n as f64;
    let k_lo = (f_lo / df - 1e-9).ceil().max(1.0) as usize;
    let k_hi = ((f_hi / df - 1e-9).ceil() as usize).saturating_sub(1);
    if k_lo > k_hi {
        return Err(Error::Parameter(format!(
            "frequency band [{f_lo}, {f_hi}) contains no bins at spacing {df} Hz"
        )));
    }
    Ok((k_lo, k_hi))
}

/// Complex DFT of the window's vibration signal restricted to
/// `[f_lo, f_hi)`, bins ordered by increasing frequency.
pub fn compute_spectrum(window: &SensorWindow, f_lo: f64, f_hi: f64) -> Result<Spectrum> {
    let samples = window.vibration();
    spectrum_of_samples(&samples, window.header.vibration_rate as f64, f_lo, f_hi)
}

fn spectrum_of_samples(samples: &[f64], fs: f64, f_lo: f64, f_hi: f64) -> Result<Spectrum> {
    if samples.is_empty() {
        return Err(Error::Parameter("empty window".into()));
    }
    let n = samples.len();
    let (k_lo, k_hi) = band_bins(fs, n, f_lo, f_hi)?;
    let full = full_spectrum(samples);
    let df = fs / n as f64;
    Ok(Spectrum {
        values: full[k_lo..=k_hi].to_vec(),
        bin_freqs: (k_lo..=k_hi).map(|k| k as f64 * df).collect(),
    })
}

/// Band-limited spectra for a batch of equal-length windows.
///
/// Runs data-parallel under the `parallel` feature; output order matches
/// input order either way.
pub fn batch_spectra(windows: &[SensorWindow], f_lo: f64, f_hi: f64) -> Result<Vec<Spectrum>> {
    let Some(first) = windows.first() else {
        return Ok(Vec::new());
    };
    let n = first.ticks.len() * first.header.vib_per_tick();
    let fs = first.header.vibration_rate as f64;
    for w in windows {
        if w.ticks.len() * w.header.vib_per_tick() != n
            || w.header.vibration_rate as f64 != fs
        {
            return Err(Error::Shape(
                "batch windows must share sample count and rate".into(),
            ));
        }
    }
    let (k_lo, k_hi) = band_bins(fs, n, f_lo, f_hi)?;
    let plan = FftPlanner::new().plan_fft_forward(n);
    let df = fs / n as f64;
    let bin_freqs: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * df).collect();

    let out = exec::map_collect(windows, |w| {
        let mut buf: Vec<Complex64> = w
            .vibration()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(&mut buf, &mut scratch);
        Spectrum {
            values: buf[k_lo..=k_hi].to_vec(),
            bin_freqs: bin_freqs.clone(),
        }
    });
    Ok(out)
}

/// Modulus of a spectrum after complex-mean centering.
fn centered_modulus(values: &[Complex64], mean: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(
        values.len(),
        values.iter().zip(mean).map(|(v, m)| (v - m).norm()),
    )
}

/// Fit the spectral projection on training spectra.
///
/// Centers with the entrywise complex mean, takes moduli, and keeps the
/// smallest number of principal directions whose cumulative explained
/// variance reaches `variance_target`. Basis rows are sign-normalized
/// (largest-magnitude entry positive) so repeated fits serialize
/// identically.
pub fn fit_projection(spectra: &[Spectrum], variance_target: f64) -> Result<ProjectionModel> {
    if spectra.len() < 2 {
        return Err(Error::Parameter(format!(
            "projection fit needs at least 2 spectra, got {}",
            spectra.len()
        )));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Parameter(format!(
            "variance target must be in (0, 1], got {variance_target}"
        )));
    }
    let bins = spectra[0].bin_count();
    if spectra.iter().any(|s| s.bin_count() != bins) {
        return Err(Error::Shape("spectra bin counts differ".into()));
    }

    let m = spectra.len();
    let mut complex_mean = vec![Complex64::new(0.0, 0.0); bins];
    for s in spectra {
        for (acc, v) in complex_mean.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let inv_m = 1.0 / m as f64;
    complex_mean.iter_mut().for_each(|v| *v *= inv_m);

    // Moduli after complex centering, one row per training spectrum.
    let mut data = DMatrix::zeros(m, bins);
    for (i, s) in spectra.iter().enumerate() {
        data.row_mut(i)
            .copy_from(&centered_modulus(&s.values, &complex_mean).transpose());
    }
    let row_mean = data.row_mean();
    for i in 0..m {
        for j in 0..bins {
            data[(i, j)] -= row_mean[j];
        }
    }
    let cov = data.transpose() * &data / (m as f64 - 1.0);

    let total: f64 = cov.diagonal().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Degenerate(
            "zero total variance in training spectra".into(),
        ));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..bins).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut cum = 0.0;
    let mut d = bins;
    let mut retained = 1.0;
    for (rank, &idx) in order.iter().enumerate() {
        cum += eig.eigenvalues[idx].max(0.0);
        let frac = cum / total;
        if frac + 1e-12 >= variance_target {
            d = rank + 1;
            retained = frac.min(1.0);
            break;
        }
    }

    let mut basis = DMatrix::zeros(d, bins);
    for (row, &idx) in order.iter().take(d).enumerate() {
        let col = eig.eigenvectors.column(idx);
        // Sign convention: largest-magnitude entry positive.
        let mut pivot = 0;
        for j in 1..bins {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..bins {
            basis[(row, j)] = sign * col[j];
        }
    }

    Ok(ProjectionModel {
        complex_mean,
        basis,
        retained_variance: retained,
    })
}

/// Project a spectrum through a fitted model:
/// `basis * |values - complex_mean|`.
pub fn project(spectrum: &Spectrum, model: &ProjectionModel) -> Result<VibrationFeature> {
    if spectrum.bin_count() != model.bin_count() {
        return Err(Error::Shape(format!(
            "spectrum has {} bins, projection expects {}",
            spectrum.bin_count(),
            model.bin_count()
        )));
    }
    let v = centered_modulus(&spectrum.values, &model.complex_mean);
    Ok(VibrationFeature(&model.basis * v))
}

/// Project a batch of spectra (data-parallel under `parallel`).
pub fn batch_project(
    spectra: &[Spectrum],
    model: &ProjectionModel,
) -> Result<Vec<VibrationFeature>> {
    if let Some(s) = spectra.iter().find(|s| s.bin_count() != model.bin_count()) {
        return Err(Error::Shape(format!(
            "spectrum has {} bins, projection expects {}",
            s.bin_count(),
            model.bin_count()
        )));
    }
    Ok(exec::map_collect(spectra, |s| {
        VibrationFeature(&model.basis * centered_modulus(&s.values, &model.complex_mean))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{RecordingHeader, Tick};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    /// O(n^2) reference DFT, written independently of the FFT path.
    fn naive_dft(samples: &[f64]) -> Vec<Complex64> {
        let n = samples.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &x) in samples.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    acc += Complex64::new(x * ang.cos(), x * ang.sin());
                }
                acc
            })
            .collect()
    }

    fn window_from_samples(samples: &[f64], header: &RecordingHeader) -> Vec<Tick> {
        let vpt = header.vib_per_tick();
        assert_eq!(samples.len() % vpt, 0);
        samples
            .chunks(vpt)
            .map(|c| Tick {
                vibration: c.to_vec(),
                flux: 0.0,
                core_temp: 2500.0,
                electrodes: vec![3000.0; header.electrode_count],
            })
            .collect()
    }

    fn sine_samples(freq: f64, amp: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn default_band_keeps_124_bins() {
        let header = RecordingHeader::default();
        let ticks = window_from_samples(&vec![0.0; 550], &header);
        let w = SensorWindow {
            ticks: &ticks,
            header: &header,
        };
        let s = compute_spectrum(&w, DEFAULT_F_LO, DEFAULT_F_HI).unwrap();
        assert_eq!(s.bin_count(), 124);
        assert_relative_eq!(s.bin_freqs[0], 4.0);
        assert_relative_eq!(s.bin_freqs[1] - s.bin_freqs[0], 4.0);
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn pure_tone_lands_on_its_bin() {
        let header = RecordingHeader::default();
        let samples = sine_samples(100.0, 1.0, 550, 2200.0);
        let ticks = window_from_samples(&samples, &header);
        let w = SensorWindow {
            ticks: &ticks,
            header: &header,
        };
        let s = compute_spectrum(&w, 4.0, 500.0).unwrap();
        let peak_idx = 24; // (100 - 4) / 4
        assert_relative_eq!(s.bin_freqs[peak_idx], 100.0);
        let peak = s.values[peak_idx].norm();
        assert!(peak > 100.0);
        for (i, v) in s.values.iter().enumerate() {
            if i != peak_idx {
                assert!(v.norm() <= 1e-9 * peak, "leak at bin {i}: {}", v.norm());
            }
        }
    }

    #[test]
    fn matches_naive_dft_on_seeded_window() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let header = RecordingHeader::default();
        let samples: Vec<f64> = (0..550).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ticks = window_from_samples(&samples, &header);
        let w = SensorWindow {
            ticks: &ticks,
            header: &header,
        };
        let s = compute_spectrum(&w, 4.0, 500.0).unwrap();
        let reference = naive_dft(&samples);
        let scale = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, v) in s.values.iter().enumerate() {
            let r = reference[i + 1]; // band starts at bin 1
            assert!(
                (v - r).norm() <= 1e-9 * scale.max(r.norm()),
                "bin {i}: {v} vs {r}"
            );
        }
    }

    #[test]
    fn empty_band_is_a_parameter_error() {
        let header = RecordingHeader::default();
        let ticks = window_from_samples(&vec![0.0; 550], &header);
        let w = SensorWindow {
            ticks: &ticks,
            header: &header,
        };
        assert!(matches!(
            compute_spectrum(&w, 5.0, 7.9),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            compute_spectrum(&w, 0.0, 500.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            compute_spectrum(&w, 4.0, 1200.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn parseval_holds_on_full_spectrum() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..550).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let spec = full_spectrum(&samples);
        let freq_energy: f64 =
            spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let time_energy: f64 = samples.iter().map(|x| x * x).sum();
        assert_relative_eq!(freq_energy, time_energy, max_relative = 1e-6);
    }

    #[test]
    fn batch_matches_single_window_path() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let header = RecordingHeader::default();
        let samples: Vec<f64> = (0..1100).map(|_| rng.random::<f64>()).collect();
        let ticks = window_from_samples(&samples, &header);
        let ws = crate::stream::windows(&ticks, &header, 0.25).unwrap();
        let batch = batch_spectra(&ws, 4.0, 500.0).unwrap();
        for (w, b) in ws.iter().zip(&batch) {
            let single = compute_spectrum(w, 4.0, 500.0).unwrap();
            assert_eq!(&single, b);
        }
    }

    fn toy_spectrum(values: &[f64]) -> Spectrum {
        Spectrum {
            values: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            bin_freqs: (0..values.len()).map(|i| 4.0 * (i + 1) as f64).collect(),
        }
    }

    #[test]
    fn identical_spectra_are_degenerate() {
        let spectra = vec![toy_spectrum(&[1.0, 2.0]); 5];
        assert!(matches!(
            fit_projection(&spectra, 0.9),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn too_few_spectra_is_a_parameter_error() {
        let spectra = vec![toy_spectrum(&[1.0, 2.0])];
        assert!(matches!(
            fit_projection(&spectra, 0.9),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rank_one_data_gives_one_component_along_the_line() {
        // Moduli after centering lie on a line through the origin with
        // direction (3, 4)/5: use real positive spectra and mirrored
        // deviations so the complex mean is the midpoint.
        let spectra = vec![
            toy_spectrum(&[10.0 + 3.0, 20.0 + 4.0]),
            toy_spectrum(&[10.0 - 3.0, 20.0 - 4.0]),
            toy_spectrum(&[10.0 + 6.0, 20.0 + 8.0]),
            toy_spectrum(&[10.0 - 6.0, 20.0 - 8.0]),
        ];
        let model = fit_projection(&spectra, 0.999).unwrap();
        assert_eq!(model.output_dim(), 1);
        let row = model.basis.row(0);
        assert_relative_eq!(row[0].abs(), 0.6, epsilon = 1e-9);
        assert_relative_eq!(row[1].abs(), 0.8, epsilon = 1e-9);
        assert!(model.retained_variance >= 0.999);
    }

    #[test]
    fn basis_rows_are_orthonormal() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let spectra: Vec<Spectrum> = (0..40)
            .map(|_| {
                let vals: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 10.0).collect();
                toy_spectrum(&vals)
            })
            .collect();
        let model = fit_projection(&spectra, 0.95).unwrap();
        let gram = &model.basis * model.basis.transpose();
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_of_complex_mean_is_zero() {
        let spectra = vec![
            toy_spectrum(&[1.0, 5.0, 2.0]),
            toy_spectrum(&[3.0, 1.0, 4.0]),
            toy_spectrum(&[2.0, 2.0, 9.0]),
        ];
        let model = fit_projection(&spectra, 0.99).unwrap();
        let mean_spectrum = Spectrum {
            values: model.complex_mean.clone(),
            bin_freqs: spectra[0].bin_freqs.clone(),
        };
        let feat = project(&mean_spectrum, &model).unwrap();
        assert!(feat.0.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn projection_matches_matrix_multiply_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let spectra: Vec<Spectrum> = (0..30)
            .map(|_| Spectrum {
                values: (0..8)
                    .map(|_| Complex64::new(rng.random::<f64>() * 5.0, rng.random::<f64>()))
                    .collect(),
                bin_freqs: (0..8).map(|i| 4.0 * (i + 1) as f64).collect(),
            })
            .collect();
        let model = fit_projection(&spectra, 0.9).unwrap();
        let probe = &spectra[7];
        let feat = project(probe, &model).unwrap();
        // Direct elementwise oracle.
        for r in 0..model.output_dim() {
            let mut acc = 0.0;
            for b in 0..8 {
                acc += model.basis[(r, b)] * (probe.values[b] - model.complex_mean[b]).norm();
            }
            assert!((feat.0[r] - acc).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let spectra = vec![
            toy_spectrum(&[1.0, 5.0]),
            toy_spectrum(&[3.0, 1.0]),
            toy_spectrum(&[7.0, 2.0]),
        ];
        let model = fit_projection(&spectra, 0.9).unwrap();
        let other = toy_spectrum(&[1.0, 2.0, 3.0]);
        assert!(matches!(project(&other, &model), Err(Error::Shape(_))));
    }

    #[test]
    fn variance_selection_matches_eigen_oracle() {
        // Correlated 5-bin data with a planted spectrum of eigenvalues:
        // the chosen d must agree with an independent computation from
        // the sample covariance, and must be minimal. Anchor spectra at
        // complex zero pull the complex mean strictly below the data
        // cloud, so the centered moduli are an affine image of the
        // planted Gaussian and its eigenvalue fractions carry over.
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let eigvals = [10.0f64, 5.0, 1.0, 0.1, 0.01];
        let bins = eigvals.len();
        // Random orthonormal frame via Gram-Schmidt on a random matrix.
        let mut frame: Vec<DVector<f64>> = Vec::new();
        while frame.len() < bins {
            let mut v = DVector::from_iterator(
                bins,
                (0..bins).map(|_| rng.random::<f64>() * 2.0 - 1.0),
            );
            for u in &frame {
                let dot = v.dot(u);
                v -= u * dot;
            }
            if v.norm() > 1e-6 {
                v /= v.norm();
                frame.push(v);
            }
        }
        let bin_freqs: Vec<f64> = (0..bins).map(|i| 4.0 * (i + 1) as f64).collect();
        let mut spectra: Vec<Spectrum> = (0..200)
            .map(|_| {
                let mut x = DVector::from_element(bins, 50.0);
                for (lam, u) in eigvals.iter().zip(&frame) {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    x += u * (z * lam.sqrt());
                }
                Spectrum {
                    values: x.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                    bin_freqs: bin_freqs.clone(),
                }
            })
            .collect();
        spectra.extend((0..200).map(|_| Spectrum {
            values: vec![Complex64::new(0.0, 0.0); bins],
            bin_freqs: bin_freqs.clone(),
        }));

        let target = 0.97;
        let model = fit_projection(&spectra, target).unwrap();

        // Oracle: explicit sample covariance of the centered moduli and a
        // Jacobi eigensolver, independent of the fit path.
        let m = spectra.len();
        let mut cmean = vec![Complex64::new(0.0, 0.0); bins];
        for s in &spectra {
            for (acc, v) in cmean.iter_mut().zip(&s.values) {
                *acc += v;
            }
        }
        cmean.iter_mut().for_each(|v| *v /= m as f64);
        let rows: Vec<Vec<f64>> = spectra
            .iter()
            .map(|s| {
                s.values
                    .iter()
                    .zip(&cmean)
                    .map(|(v, c)| (v - c).norm())
                    .collect()
            })
            .collect();
        let col_mean: Vec<f64> =
            (0..bins).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect();
        let mut cov = vec![vec![0.0; bins]; bins];
        for r in &rows {
            for i in 0..bins {
                for j in 0..bins {
                    cov[i][j] += (r[i] - col_mean[i]) * (r[j] - col_mean[j]);
                }
            }
        }
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= (m - 1) as f64;
            }
        }
        let mut evs = jacobi_eigenvalues(&cov);
        evs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = evs.iter().sum();
        let mut cum = 0.0;
        let mut d_oracle = bins;
        for (i, lam) in evs.iter().enumerate() {
            cum += lam;
            if cum / total >= target {
                d_oracle = i + 1;
                break;
            }
        }

        assert_eq!(model.output_dim(), d_oracle);
        assert_eq!(d_oracle, 3, "planted eigenvalue gap should put the knee at 3");
        assert!(model.retained_variance >= target);
        // Minimality: one fewer component misses the target.
        let cum_prev: f64 = evs.iter().take(d_oracle - 1).sum();
        assert!(cum_prev / total < target);
    }

    /// Jacobi rotation eigenvalues for a symmetric matrix (test oracle).
    fn jacobi_eigenvalues(mat: &[Vec<f64>]) -> Vec<f64> {
        let n = mat.len();
        let mut a: Vec<Vec<f64>> = mat.to_vec();
        for _ in 0..200 {
            let mut p = 0;
            let mut q = 1;
            let mut max = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[i][j].abs() > max {
                        max = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if max < 1e-14 {
                break;
            }
            let theta = if (a[p][p] - a[q][q]).abs() < 1e-30 {
                PI / 4.0
            } else {
                0.5 * ((2.0 * a[p][q]) / (a[p][p] - a[q][q])).atan()
            };
            let (s, c) = theta.sin_cos();
            let mut next = a.clone();
            for i in 0..n {
                if i != p && i != q {
                    next[i][p] = c * a[i][p] + s * a[i][q];
                    next[p][i] = next[i][p];
                    next[i][q] = -s * a[i][p] + c * a[i][q];
                    next[q][i] = next[i][q];
                }
            }
            next[p][p] = c * c * a[p][p] + 2.0 * s * c * a[p][q] + s * s * a[q][q];
            next[q][q] = s * s * a[p][p] - 2.0 * s * c * a[p][q] + c * c * a[q][q];
            next[p][q] = 0.0;
            next[q][p] = 0.0;
            a = next;
        }
        (0..n).map(|i| a[i][i]).collect()
    }
}

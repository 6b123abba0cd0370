//! Multi-rate recording data model, on-disk format, and windowing.
//!
//! A recording carries one fast vibration channel (2.2 kHz by default)
//! interleaved with low-rate channels (100 Hz): heat flux, core
//! temperature, and one impedance reading per electrode. Each low-rate
//! sample period is one [`Tick`]; the windowing slices a tick sequence
//! into non-overlapping fixed-duration frames for the feature extractors.
//!
//! On disk a recording is a UTF-8 text file: line 1 is a JSON header
//! object (the [`RecordingHeader`] fields plus `"version": 1`), and each
//! following line is one tick as CSV — the vibration samples, then flux,
//! then core temperature, then the electrode impedances (43 numeric
//! fields at default rates), LF line endings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current recording file format version.
pub const RECORDING_VERSION: u32 = 1;

/// Default fast-channel (vibration) sampling rate in Hz.
pub const DEFAULT_VIBRATION_RATE: u32 = 2200;
/// Default low-rate channel (flux, temperature, impedance) rate in Hz.
pub const DEFAULT_LOWRATE: u32 = 100;
/// Default electrode count.
pub const DEFAULT_ELECTRODE_COUNT: usize = 19;
/// Default per-electrode contact disc radius in mm (half the typical
/// nearest-neighbour electrode spacing).
pub const DEFAULT_ELECTRODE_RADIUS_MM: f64 = 2.0;
/// Default analysis window length in seconds.
pub const DEFAULT_DT: f64 = 0.25;

/// Static description of a recording: channel rates, electrode geometry,
/// per-electrode resting impedance levels, and an optional material label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingHeader {
    /// Vibration sampling rate in Hz. Must be an integer multiple of
    /// `lowrate`.
    pub vibration_rate: u32,
    /// Low-rate channel sampling rate in Hz.
    pub lowrate: u32,
    /// Number of impedance electrodes.
    pub electrode_count: usize,
    /// Ground-truth material label, if known.
    pub material_label: Option<String>,
    /// Per-electrode contact disc radius in mm; all strictly positive.
    pub electrode_radii: Vec<f64>,
    /// Per-electrode resting (no contact) impedance level in counts.
    pub electrode_resting: Vec<f64>,
}

impl Default for RecordingHeader {
    fn default() -> Self {
        RecordingHeader {
            vibration_rate: DEFAULT_VIBRATION_RATE,
            lowrate: DEFAULT_LOWRATE,
            electrode_count: DEFAULT_ELECTRODE_COUNT,
            material_label: None,
            electrode_radii: vec![DEFAULT_ELECTRODE_RADIUS_MM; DEFAULT_ELECTRODE_COUNT],
            electrode_resting: vec![crate::synth::RESTING_LEVEL; DEFAULT_ELECTRODE_COUNT],
        }
    }
}

impl RecordingHeader {
    /// Number of vibration samples carried by each tick.
    pub fn vib_per_tick(&self) -> usize {
        (self.vibration_rate / self.lowrate) as usize
    }

    /// Ticks per window of length `dt` seconds, or an error when
    /// `dt * lowrate` is not a positive integer.
    pub fn ticks_per_window(&self, dt: f64) -> Result<usize> {
        let x = dt * self.lowrate as f64;
        let n = x.round();
        if !(n >= 1.0 && (x - n).abs() <= 1e-9) {
            return Err(Error::Parameter(format!(
                "dt * lowrate must be a positive integer; dt={dt} at {} Hz gives {x}",
                self.lowrate
            )));
        }
        Ok(n as usize)
    }

    /// Check the header invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.lowrate == 0 {
            return Err(Error::Format("header field `lowrate`: must be positive".into()));
        }
        if self.vibration_rate == 0 || self.vibration_rate % self.lowrate != 0 {
            return Err(Error::Format(format!(
                "header field `vibration_rate`: {} is not a positive integer multiple of lowrate {}",
                self.vibration_rate, self.lowrate
            )));
        }
        if self.electrode_count == 0 {
            return Err(Error::Format(
                "header field `electrode_count`: must be positive".into(),
            ));
        }
        if self.electrode_radii.len() != self.electrode_count {
            return Err(Error::Format(format!(
                "header field `electrode_radii`: expected {} entries, found {}",
                self.electrode_count,
                self.electrode_radii.len()
            )));
        }
        if self.electrode_resting.len() != self.electrode_count {
            return Err(Error::Format(format!(
                "header field `electrode_resting`: expected {} entries, found {}",
                self.electrode_count,
                self.electrode_resting.len()
            )));
        }
        if self
            .electrode_radii
            .iter()
            .any(|r| !(r.is_finite() && *r > 0.0))
        {
            return Err(Error::Format(
                "header field `electrode_radii`: radii must be finite and strictly positive".into(),
            ));
        }
        if self.electrode_resting.iter().any(|e| !e.is_finite()) {
            return Err(Error::Format(
                "header field `electrode_resting`: values must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// One low-rate sample period of raw signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    /// Fast-channel pressure-band samples for this period
    /// (`vibration_rate / lowrate` of them), raw ADC counts.
    pub vibration: Vec<f64>,
    /// Heat-flux reading in sensor counts.
    pub flux: f64,
    /// Finger core temperature in sensor counts.
    pub core_temp: f64,
    /// Per-electrode impedance readings in counts.
    pub electrodes: Vec<f64>,
}

/// A non-overlapping slice of `dt * lowrate` consecutive ticks.
///
/// Windows borrow the recording; slicing is zero-copy and windows can be
/// processed concurrently.
#[derive(Debug, Clone, Copy)]
pub struct SensorWindow<'a> {
    pub ticks: &'a [Tick],
    pub header: &'a RecordingHeader,
}

impl<'a> SensorWindow<'a> {
    /// Concatenated vibration samples, in time order
    /// (`dt * vibration_rate` of them).
    pub fn vibration(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ticks.len() * self.header.vib_per_tick());
        for t in self.ticks {
            out.extend_from_slice(&t.vibration);
        }
        out
    }

    /// Flux readings, one per tick.
    pub fn flux_series(&self) -> Vec<f64> {
        self.ticks.iter().map(|t| t.flux).collect()
    }

    /// Mean flux over the window.
    pub fn mean_flux(&self) -> f64 {
        crate::numeric::mean(&self.flux_series())
    }

    /// Mean core temperature over the window.
    pub fn mean_core_temp(&self) -> f64 {
        let temps: Vec<f64> = self.ticks.iter().map(|t| t.core_temp).collect();
        crate::numeric::mean(&temps)
    }

    /// Per-electrode mean impedance over the window.
    pub fn mean_electrodes(&self) -> Vec<f64> {
        let n = self.header.electrode_count;
        let mut sums = vec![0.0; n];
        for t in self.ticks {
            for (s, e) in sums.iter_mut().zip(&t.electrodes) {
                *s += e;
            }
        }
        let count = self.ticks.len().max(1) as f64;
        sums.iter_mut().for_each(|s| *s /= count);
        sums
    }
}

/// Slice `ticks` into non-overlapping windows of `dt` seconds, in order.
///
/// A trailing remainder shorter than one window is dropped. Errors when
/// `dt * lowrate` is not a positive integer.
pub fn windows<'a>(
    ticks: &'a [Tick],
    header: &'a RecordingHeader,
    dt: f64,
) -> Result<Vec<SensorWindow<'a>>> {
    let tpw = header.ticks_per_window(dt)?;
    Ok(ticks
        .chunks_exact(tpw)
        .map(|c| SensorWindow { ticks: c, header })
        .collect())
}

/// Estimate per-electrode resting impedance as the mean over the first
/// `span` ticks of a no-contact calibration recording.
pub fn resting_from_prefix(ticks: &[Tick], span: usize) -> Result<Vec<f64>> {
    if span == 0 || ticks.len() < span {
        return Err(Error::Parameter(format!(
            "calibration span {span} exceeds available ticks {}",
            ticks.len()
        )));
    }
    let n = ticks[0].electrodes.len();
    let mut sums = vec![0.0; n];
    for t in &ticks[..span] {
        if t.electrodes.len() != n {
            return Err(Error::Parameter(
                "inconsistent electrode count across calibration ticks".into(),
            ));
        }
        for (s, e) in sums.iter_mut().zip(&t.electrodes) {
            *s += e;
        }
    }
    sums.iter_mut().for_each(|s| *s /= span as f64);
    Ok(sums)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    version: u32,
    vibration_rate: u32,
    lowrate: u32,
    electrode_count: usize,
    material_label: Option<String>,
    electrode_radii: Vec<f64>,
    electrode_resting: Vec<f64>,
}

/// Serialize a recording to its text format.
pub fn format_recording(header: &RecordingHeader, ticks: &[Tick]) -> String {
    let line = HeaderLine {
        version: RECORDING_VERSION,
        vibration_rate: header.vibration_rate,
        lowrate: header.lowrate,
        electrode_count: header.electrode_count,
        material_label: header.material_label.clone(),
        electrode_radii: header.electrode_radii.clone(),
        electrode_resting: header.electrode_resting.clone(),
    };
    let mut out = serde_json::to_string(&line).expect("header serialization cannot fail");
    out.push('\n');
    let fields = header.vib_per_tick() + 2 + header.electrode_count;
    out.reserve(ticks.len() * fields * 8);
    for t in ticks {
        let mut first = true;
        let mut push = |v: f64| {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        };
        for &v in &t.vibration {
            push(v);
        }
        push(t.flux);
        push(t.core_temp);
        for &e in &t.electrodes {
            push(e);
        }
        out.push('\n');
    }
    out
}

/// Parse a recording from its text format.
pub fn parse_recording(text: &str) -> Result<(RecordingHeader, Vec<Tick>)> {
    let mut lines = text.split('\n');
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty recording".into()))?;
    let parsed: HeaderLine = serde_json::from_str(header_line.trim_end_matches('\r'))
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    if parsed.version != RECORDING_VERSION {
        return Err(Error::Format(format!(
            "header field `version`: unsupported version {}",
            parsed.version
        )));
    }
    let header = RecordingHeader {
        vibration_rate: parsed.vibration_rate,
        lowrate: parsed.lowrate,
        electrode_count: parsed.electrode_count,
        material_label: parsed.material_label,
        electrode_radii: parsed.electrode_radii,
        electrode_resting: parsed.electrode_resting,
    };
    header.validate()?;

    let vib = header.vib_per_tick();
    let ec = header.electrode_count;
    let expected = vib + 2 + ec;
    let mut ticks = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let raw: Vec<&str> = line.split(',').collect();
        if raw.len() != expected {
            // A short/long line almost always means a wrong vibration
            // sample count; report it in those terms when it fits.
            if raw.len() >= 2 + ec {
                return Err(Error::Format(format!(
                    "tick {idx}: expected {vib} vibration samples, found {}",
                    raw.len() - 2 - ec
                )));
            }
            return Err(Error::Format(format!(
                "tick {idx}: expected {expected} fields, found {}",
                raw.len()
            )));
        }
        let mut values = Vec::with_capacity(expected);
        for tok in &raw {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Format(format!("tick {idx}: invalid number `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "tick {idx}: non-finite value `{tok}`"
                )));
            }
            values.push(v);
        }
        let electrodes = values.split_off(vib + 2);
        let core_temp = values.pop().unwrap();
        let flux = values.pop().unwrap();
        ticks.push(Tick {
            vibration: values,
            flux,
            core_temp,
            electrodes,
        });
    }
    Ok((header, ticks))
}

/// Load a recording file.
pub fn load_recording(path: &Path) -> Result<(RecordingHeader, Vec<Tick>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_recording(&text)
}

/// Write a recording file.
pub fn save_recording(path: &Path, header: &RecordingHeader, ticks: &[Tick]) -> Result<()> {
    std::fs::write(path, format_recording(header, ticks)).map_err(|e| Error::io(path, e))
}

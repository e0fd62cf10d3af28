//! Impulse-driven modal synthesis.
//!
//! An impulse `a·d` at vertex `v` and time `t₀` gives mode `i` the modal
//! impulse `g_i = a · U[v, i] · d` and the response
//! `p_i(x) · (g_i/ω'_i) · e^{−ξ_i ω_i τ} · sin(ω'_i τ)`, `τ = t − t₀ ≥ 0`,
//! evaluated in closed form at every output sample.

use std::io::Read;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::ModeSet;
use crate::error::{Error, Result};
use crate::ffat::{query, FfatMap};

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
/// −1 dBFS as a linear amplitude.
pub const NORMALIZED_PEAK: f64 = 0.891_250_938_133_745_5;

/// An impulsive force. Serialized as `{t, vertex, dir, amp}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceEvent {
    /// Time, s.
    #[serde(rename = "t")]
    pub time: f64,
    pub vertex: usize,
    /// Unit direction.
    #[serde(rename = "dir")]
    pub direction: [f64; 3],
    /// Impulse, N·s.
    #[serde(rename = "amp")]
    pub amplitude: f64,
}

impl ForceEvent {
    pub fn validate(&self) -> Result<()> {
        if !(self.time >= 0.0 && self.time.is_finite()) {
            return Err(Error::InvalidInput(format!("event time must be finite and ≥ 0, got {}", self.time)));
        }
        let len = self.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !((len - 1.0).abs() < 1e-6) {
            return Err(Error::InvalidInput(format!("event direction must be a unit vector, has length {len}")));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidInput("event amplitude must be finite".into()));
        }
        Ok(())
    }
}

pub fn read_events<R: Read>(r: R) -> Result<Vec<ForceEvent>> {
    let events: Vec<ForceEvent> = serde_json::from_reader(r)?;
    for e in &events {
        e.validate()?;
    }
    Ok(events)
}

/// `g_i = amp · U[vertex, i] · dir` for every mode.
pub fn project_impulse(modes: &ModeSet, ev: &ForceEvent) -> Result<Vec<f64>> {
    ev.validate()?;
    let nv = modes.ndof() / 3;
    if ev.vertex >= nv {
        return Err(Error::InvalidInput(format!("event vertex {} out of range (body has {nv} vertices)", ev.vertex)));
    }
    let rows = modes.vectors.rows(3 * ev.vertex, 3);
    Ok((0..modes.len())
        .map(|i| ev.amplitude * (0..3).map(|a| rows[(a, i)] * ev.direction[a]).sum::<f64>())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    /// Pressure, Pa.
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// Renders with per-mode transfer gains read from the maps at
/// `center + listener`.
pub fn render(
    modes: &ModeSet,
    maps: &[FfatMap],
    events: &[ForceEvent],
    listener: [f64; 3],
    rate: u32,
    duration: f64,
) -> Result<AudioBuffer> {
    if maps.len() != modes.len() {
        return Err(Error::InvalidInput(format!(
            "{} transfer maps for {} modes; every mode needs a map",
            maps.len(),
            modes.len()
        )));
    }
    let gains = maps
        .iter()
        .map(|m| {
            let r = listener.iter().map(|v| v * v).sum::<f64>().sqrt();
            if let Some(&inner) = m.radii.first() {
                if r < inner {
                    return Err(Error::InvalidInput(format!(
                        "listener at {r:.3} m is inside the innermost map radius {inner:.3} m"
                    )));
                }
            }
            query(m, [0, 1, 2].map(|k| m.center[k] + listener[k]))
        })
        .collect::<Result<Vec<_>>>()?;
    render_with_gains(modes, &gains, events, rate, duration)
}

/// Renders with explicit per-mode transfer magnitudes `|p_i(x)|`.
pub fn render_with_gains(
    modes: &ModeSet,
    gains: &[f64],
    events: &[ForceEvent],
    rate: u32,
    duration: f64,
) -> Result<AudioBuffer> {
    if gains.len() != modes.len() {
        return Err(Error::DimensionMismatch { expected: modes.len(), actual: gains.len() });
    }
    if rate == 0 {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    let last = events.iter().map(|e| e.time).fold(0.0, f64::max);
    if !(duration > last && duration.is_finite()) {
        return Err(Error::InvalidInput(format!("duration {duration} s must exceed the last event time {last} s")));
    }
    let impulses = events.iter().map(|e| project_impulse(modes, e)).collect::<Result<Vec<_>>>()?;
    let n = (duration * rate as f64).ceil() as usize;
    let dt = 1.0 / rate as f64;
    let nyquist = rate as f64 / 2.0;

    let audible: Vec<usize> = (0..modes.len())
        .filter(|&i| {
            if modes.is_overdamped(i) {
                warn!("mode {i} is overdamped (ξ = {:.3}), skipped", modes.xi[i]);
                return false;
            }
            if modes.omega_damped[i] / (2.0 * std::f64::consts::PI) >= nyquist {
                warn!("mode {i} lies above the Nyquist frequency, skipped");
                return false;
            }
            gains[i] != 0.0
        })
        .collect();

    let tracks: Vec<Vec<f64>> = audible
        .par_iter()
        .map(|&i| {
            let (wd, decay) = (modes.omega_damped[i], modes.xi[i] * modes.lambdas[i].sqrt());
            let mut out = vec![0.0; n];
            for (e, g) in events.iter().zip(&impulses) {
                let amp = gains[i] * g[i] / wd;
                if amp == 0.0 {
                    continue;
                }
                let start = (e.time * rate as f64).ceil() as usize;
                for (k, s) in out.iter_mut().enumerate().skip(start) {
                    let tau = k as f64 * dt - e.time;
                    *s += amp * (-decay * tau).exp() * (wd * tau).sin();
                }
            }
            out
        })
        .collect();

    let mut samples = vec![0.0; n];
    for t in &tracks {
        for (s, v) in samples.iter_mut().zip(t) {
            *s += v;
        }
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("rendered waveform is not finite".into()));
    }
    Ok(AudioBuffer { sample_rate: rate, samples })
}

fn to_pcm(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16
}

/// Mono 16-bit PCM WAV. With `peak_normalize` the peak is mapped to −1 dBFS,
/// otherwise samples are written as-is and clipped to ±1.
pub fn wav_export(buf: &AudioBuffer, path: &Path, peak_normalize: bool) -> Result<()> {
    if buf.samples.is_empty() {
        return Err(Error::InvalidInput("cannot export an empty buffer".into()));
    }
    let peak = buf.peak();
    let scale = if peak_normalize && peak > 0.0 { NORMALIZED_PEAK / peak } else { 1.0 };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_error)?;
    for &s in &buf.samples {
        w.write_sample(to_pcm(s * scale)).map_err(wav_error)?;
    }
    w.finalize().map_err(wav_error)
}

/// Reads a mono 16-bit WAV back to samples in `[−1, 1]`.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let mut r = hound::WavReader::open(path).map_err(wav_error)?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 {
        return Err(Error::Format("expected mono 16-bit PCM".into()));
    }
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
        .collect::<std::result::Result<_, _>>()
        .map_err(wav_error)?;
    Ok(AudioBuffer { sample_rate: spec.sample_rate, samples })
}

fn wav_error(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

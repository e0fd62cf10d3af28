//! Mel-scale frequency metrics over the 20 Hz – 20 kHz audible band.

pub const MIN_AUDIBLE_HZ: f64 = 20.0;
pub const MAX_AUDIBLE_HZ: f64 = 20000.0;

/// `2595 · log10(1 + f/700)` with `f` clamped to the audible band.
pub fn mel(f_hz: f64) -> f64 {
    let f = f_hz.clamp(MIN_AUDIBLE_HZ, MAX_AUDIBLE_HZ);
    2595.0 * (1.0 + f / 700.0).log10()
}

/// Length of the audible band in mel.
pub fn mel_span() -> f64 {
    mel(MAX_AUDIBLE_HZ) - mel(MIN_AUDIBLE_HZ)
}

/// Min-max normalized mel value in `[0, 1]`.
pub fn mel_normalized(f_hz: f64) -> f64 {
    (mel(f_hz) - mel(MIN_AUDIBLE_HZ)) / mel_span()
}

/// Mean squared mel-frequency error, normalized by the squared band length.
/// Pairs are matched by position; extra entries in the longer slice are
/// ignored.
pub fn freq_error(pred_hz: &[f64], truth_hz: &[f64]) -> f64 {
    let n = pred_hz.len().min(truth_hz.len());
    if n == 0 {
        return 0.0;
    }
    let span = mel_span();
    pred_hz
        .iter()
        .zip(truth_hz)
        .map(|(&p, &t)| ((mel(p) - mel(t)) / span).powi(2))
        .sum::<f64>()
        / n as f64
}

//! Signal analyses exported for plotting: averaged periodogram and delay
//! embedding.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::txchain::SymbolSequence;

/// Bartlett averaged periodogram: non-overlapping rectangular segments of
/// `segment_len` samples, one-sided density in power per Hz from 0 to
/// `fs/2`. Integrating the density over frequency gives the mean power of
/// the analysed samples.
pub fn power_spectrum(signal: &SampledSignal, segment_len: usize) -> Result<Vec<(f64, f64)>> {
    if segment_len < 2 {
        return Err(Error::config("waveform.segment_len", "segment length must be at least 2"));
    }
    if segment_len > signal.len() {
        return Err(Error::config(
            "waveform.segment_len",
            format!("segment length {segment_len} exceeds signal length {}", signal.len()),
        ));
    }
    let fs = signal.sample_rate();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let segments = signal.len() / segment_len;
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    for seg in signal.samples().chunks_exact(segment_len) {
        for (b, &v) in buf.iter_mut().zip(seg) {
            *b = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
    }
    let l = segment_len as f64;
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let one_sided = if k == 0 || (segment_len.is_multiple_of(2) && k == segment_len / 2) { 1.0 } else { 2.0 };
            (k as f64 * fs / l, one_sided * s / (segments as f64 * fs * l))
        })
        .collect())
}

/// `(u(t), u(t + delay/fs), s_[t f])` for every sample with a delayed
/// partner. The symbol coordinate is 0 where no symbol is active.
pub fn delay_embedding(
    signal: &SampledSignal,
    symbols: &SymbolSequence,
    delay: usize,
    symbol_rate: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if delay < 1 {
        return Err(Error::config("waveform.delay", "embedding delay must be at least one sample"));
    }
    let sps = (signal.sample_rate() / symbol_rate).round() as i64;
    let x = signal.samples();
    let s = symbols.as_slice();
    Ok((0..x.len().saturating_sub(delay))
        .map(|i| {
            let m = (signal.start_index() + i as i64).div_euclid(sps);
            let sym = if m >= 0 && (m as usize) < s.len() { s[m as usize] as f64 } else { 0.0 };
            (x[i], x[i + delay], sym)
        })
        .collect())
}

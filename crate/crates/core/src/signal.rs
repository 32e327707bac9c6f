use crate::error::{Error, Result};

/// Uniformly sampled real signal.
///
/// The time base is anchored to a global grid: sample `i` sits at
/// `(start + i) / sample_rate` seconds. Every signal in a link shares the
/// same grid, so alignment between stages is integer arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate: f64,
    start: i64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64, start: i64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::config("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::config("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self { samples, sample_rate, start })
    }

    /// Internal constructor for stage outputs whose finiteness follows from their inputs.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: f64, start: i64) -> Self {
        debug_assert!(sample_rate > 0.0);
        Self { samples, sample_rate, start }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Grid index of the first sample.
    pub fn start_index(&self) -> i64 {
        self.start
    }

    /// Grid index one past the last sample.
    pub fn end_index(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn t_start(&self) -> f64 {
        self.start as f64 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 / self.sample_rate
    }

    /// Sample at global grid index, zero outside the support.
    pub fn at_index(&self, index: i64) -> f64 {
        let local = index - self.start;
        if local < 0 {
            return 0.0;
        }
        self.samples.get(local as usize).copied().unwrap_or(0.0)
    }

    /// Mean square of all samples.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.time_at(i))
    }
}

pub(crate) fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Converts a time in seconds to the nearest grid index, rejecting times that
/// are off the grid by more than `1e-6` of a sample.
pub(crate) fn grid_index(t: f64, sample_rate: f64, key: &str) -> Result<i64> {
    let x = t * sample_rate;
    let r = x.round();
    if (x - r).abs() > 1e-6 * r.abs().max(1.0) {
        return Err(Error::config(
            key,
            format!("{t} s is not aligned to the 1/{sample_rate} s sample grid"),
        ));
    }
    Ok(r as i64)
}

/// Whole number of samples per symbol, or a configuration error.
pub(crate) fn samples_per_symbol(sample_rate: f64, symbol_rate: f64) -> Result<usize> {
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(Error::config("symbol_rate", format!("must be positive, got {symbol_rate}")));
    }
    let ratio = sample_rate / symbol_rate;
    let sps = ratio.round();
    if (ratio - sps).abs() > 1e-9 * sps.max(1.0) || sps < 1.0 {
        return Err(Error::config(
            "sample_rate",
            format!("{sample_rate} Hz is not an integer multiple of the symbol rate {symbol_rate} Hz"),
        ));
    }
    Ok(sps as usize)
}

//! Receive side: coherent demodulation, matched filtering, decision-point
//! sampling, tap-gain tables, threshold decoding with past-ISI cancellation
//! and the symbol-spaced MMSE equalizer of the baseline receiver.

use nalgebra::{DMatrix, DVector};

use crate::channel::MultipathSpec;
use crate::error::{Error, Result};
use crate::signal::{grid_index, SampledSignal};
use crate::txchain::{mix, CarrierParams, SymbolSequence};
use crate::waveforms::{autocorrelation_samples, PulseShape};

/// Default decoder window in symbols.
pub const DEFAULT_WINDOW: usize = 20;

/// Multiplies by the synchronized local carrier. The output holds `u/2`
/// plus a component at twice the carrier frequency.
pub fn demodulate_coherent(passband: &SampledSignal, carrier: &CarrierParams) -> SampledSignal {
    mix(passband, carrier)
}

fn check_rates(signal: &SampledSignal, pulse: &PulseShape) -> Result<()> {
    let (a, b) = (signal.sample_rate(), pulse.sample_rate());
    if (a - b).abs() > 1e-9 * a {
        return Err(Error::config(
            "chain.fs_hz",
            format!("signal sampled at {a} Hz but pulse at {b} Hz"),
        ));
    }
    Ok(())
}

/// Convolution with the time-reversed pulse, scaled by `1/fs`:
/// `y(t) = sum_i p[i] d(t + t_i) / fs`. The output spans the full
/// convolution support.
pub fn matched_filter(signal: &SampledSignal, pulse: &PulseShape) -> Result<SampledSignal> {
    check_rates(signal, pulse)?;
    let p = pulse.samples();
    let d = signal.samples();
    if d.is_empty() {
        return Ok(SampledSignal::from_parts(Vec::new(), signal.sample_rate(), signal.start_index()));
    }
    let plen = p.len();
    let out_len = d.len() + plen - 1;
    let scale = 1.0 / signal.sample_rate();
    let mut out = vec![0.0; out_len];
    // out[j] = sum_i p[i] d[j - (plen - 1) + i]
    for (j, o) in out.iter_mut().enumerate() {
        let lo = (plen - 1).saturating_sub(j);
        let hi = plen.min(d.len() + plen - 1 - j);
        let base = j + lo + 1 - plen;
        *o = p[lo..hi].iter().zip(&d[base..]).map(|(a, b)| a * b).sum::<f64>() * scale;
    }
    let start = signal.start_index() - pulse.start_index() - (plen as i64 - 1);
    Ok(SampledSignal::from_parts(out, signal.sample_rate(), start))
}

/// Matched-filter output at a single grid index, without forming the whole
/// output signal.
pub fn matched_output_at(signal: &SampledSignal, pulse: &PulseShape, index: i64) -> f64 {
    let p = pulse.samples();
    let d = signal.samples();
    // d local index for pulse tap i: index + pulse_start + i - signal_start
    let base = index + pulse.start_index() - signal.start_index();
    let lo = (-base).clamp(0, p.len() as i64) as usize;
    let hi = (d.len() as i64 - base).clamp(0, p.len() as i64) as usize;
    if lo >= hi {
        return 0.0;
    }
    let d0 = (base + lo as i64) as usize;
    p[lo..hi].iter().zip(&d[d0..]).map(|(a, b)| a * b).sum::<f64>() / signal.sample_rate()
}

/// How the decision threshold is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `theta_n = 0`.
    Zero,
    /// `theta_n` = ISI of the already decided past symbols.
    PastIsi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub threshold_mode: ThresholdMode,
    pub window: usize,
    /// Decision instant within the symbol period, in seconds.
    pub sample_offset: f64,
}

impl DecoderConfig {
    pub fn new(threshold_mode: ThresholdMode, window: usize, sample_offset: f64, symbol_rate: f64) -> Result<Self> {
        if window < 1 {
            return Err(Error::config("rx.window", "window must be at least one symbol"));
        }
        if !(sample_offset >= 0.0 && sample_offset < 1.0 / symbol_rate) {
            return Err(Error::config(
                "rx.sample_offset",
                format!("offset {sample_offset} s must lie in [0, {}) s", 1.0 / symbol_rate),
            ));
        }
        Ok(Self { threshold_mode, window, sample_offset })
    }
}

/// Symbol-rate impulse response: `y_n = sum_j taps[main + j] s_{n+j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolResponse {
    pub taps: Vec<f64>,
    pub main: usize,
}

impl SymbolResponse {
    pub fn gain(&self, j: i64) -> f64 {
        let idx = self.main as i64 + j;
        if idx < 0 {
            return 0.0;
        }
        self.taps.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Gains of the past symbols at lags `-1, -2, ..., -window`.
    pub fn past_taps(&self, window: usize) -> Vec<f64> {
        (1..=window as i64).map(|k| self.gain(-k)).collect()
    }

    /// Extent `(past, future)` in symbols.
    fn extent(&self) -> (usize, usize) {
        (self.main, self.taps.len() - 1 - self.main)
    }
}

/// Correlation gains `C[l][j] = alpha_l R_p(tau_l + j/f - offset)` for
/// `j = -W..=W`, with aggregate power `P = sum_l C[l][0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TapGainTable {
    gains: Vec<Vec<f64>>,
    window: usize,
    aggregate_power: f64,
    offset: i64,
    truncation_residual: f64,
}

impl TapGainTable {
    /// `C[l][j]`; zero outside the window.
    pub fn gain(&self, path: usize, lag: i64) -> f64 {
        if lag.unsigned_abs() as usize > self.window {
            return 0.0;
        }
        self.gains[path][(lag + self.window as i64) as usize]
    }

    /// `sum_l C[l][j]`.
    pub fn combined(&self, lag: i64) -> f64 {
        (0..self.gains.len()).map(|l| self.gain(l, lag)).sum()
    }

    pub fn paths(&self) -> usize {
        self.gains.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `P`, the gain of the current symbol summed over paths.
    pub fn aggregate_power(&self) -> f64 {
        self.aggregate_power
    }

    /// Decision offset (in samples) the table was computed for.
    pub fn offset_samples(&self) -> i64 {
        self.offset
    }

    /// Largest `|C[l][j]|` beyond the window, relative to the largest gain.
    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    pub fn past_taps(&self) -> Vec<f64> {
        (1..=self.window as i64).map(|k| self.combined(-k)).collect()
    }

    pub fn response(&self) -> SymbolResponse {
        let w = self.window as i64;
        SymbolResponse {
            taps: (-w..=w).map(|j| self.combined(j)).collect(),
            main: self.window,
        }
    }

    /// Noise-free decision statistic `s_n P + I` for symbol `n`.
    pub fn noiseless_output(&self, symbols: &[i8], n: usize) -> f64 {
        let w = self.window as i64;
        (-w..=w)
            .filter_map(|j| {
                let m = n as i64 + j;
                (m >= 0 && (m as usize) < symbols.len()).then(|| symbols[m as usize] as f64 * self.combined(j))
            })
            .sum()
    }
}

/// Tap gains at the nominal decision instant.
pub fn compute_tap_gains(spec: &MultipathSpec, pulse: &PulseShape, window: usize) -> Result<TapGainTable> {
    compute_tap_gains_at(spec, pulse, window, 0)
}

/// Tap gains for decisions taken `offset` samples after each symbol start.
pub fn compute_tap_gains_at(
    spec: &MultipathSpec,
    pulse: &PulseShape,
    window: usize,
    offset: i64,
) -> Result<TapGainTable> {
    if window < 1 {
        return Err(Error::config("rx.window", "window must be at least one symbol"));
    }
    let sps = pulse.samples_per_symbol() as i64;
    let taps = spec.delay_samples(pulse.sample_rate())?;
    let w = window as i64;
    let gain = |alpha: f64, delay: usize, j: i64| alpha * autocorrelation_samples(pulse, delay as i64 + j * sps - offset);
    let gains: Vec<Vec<f64>> = taps
        .iter()
        .map(|&(alpha, delay)| (-w..=w).map(|j| gain(alpha, delay, j)).collect())
        .collect();
    let aggregate_power = gains.iter().map(|row| row[window]).sum::<f64>();
    if !(aggregate_power > 0.0) {
        return Err(Error::Numerical(format!(
            "aggregate power {aggregate_power} is not positive at offset {offset}"
        )));
    }
    let max_in = gains.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    // support of R_p is |lag| < len, so lags beyond that reach are exactly zero
    let reach = (pulse.len() as i64 + taps.iter().map(|t| t.1 as i64).max().unwrap_or(0)) / sps + 2;
    let max_out = taps
        .iter()
        .flat_map(|&(alpha, delay)| {
            (w + 1..=reach.max(w + 1)).flat_map(move |j| [gain(alpha, delay, j), gain(alpha, delay, -j)])
        })
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(TapGainTable {
        gains,
        window,
        aggregate_power,
        offset,
        truncation_residual: max_out / max_in,
    })
}

fn decision_index(n: usize, config: &DecoderConfig, symbol_rate: f64, sample_rate: f64) -> Result<i64> {
    grid_index(n as f64 / symbol_rate + config.sample_offset, sample_rate, "rx.sample_offset")
}

/// Samples `y` at `t = n/f + sample_offset` for `n = 0..symbol_count`.
pub fn sample_decisions(
    y: &SampledSignal,
    symbol_count: usize,
    config: &DecoderConfig,
    symbol_rate: f64,
) -> Result<Vec<f64>> {
    (0..symbol_count)
        .map(|n| {
            let idx = decision_index(n, config, symbol_rate, y.sample_rate())?;
            if idx < y.start_index() || idx >= y.end_index() {
                return Err(Error::Decode(format!(
                    "matched-filter output does not cover symbol {n} (index {idx}, output spans {}..{})",
                    y.start_index(),
                    y.end_index()
                )));
            }
            Ok(y.at_index(idx))
        })
        .collect()
}

/// Matched-filter decisions computed directly from the filter input; equal
/// to `sample_decisions(matched_filter(d, pulse))` at a fraction of the cost.
pub fn matched_decisions(
    d: &SampledSignal,
    pulse: &PulseShape,
    symbol_count: usize,
    offset_samples: i64,
) -> Result<Vec<f64>> {
    check_rates(d, pulse)?;
    let sps = pulse.samples_per_symbol() as i64;
    Ok((0..symbol_count as i64)
        .map(|n| matched_output_at(d, pulse, n * sps + offset_samples))
        .collect())
}

/// Sequential sign decisions against `theta_n`. In past-ISI mode `theta_n =
/// sum_k past[k-1] s_{n-k}` using decided symbols, or the supplied true
/// symbols when `genie` is given. `sign(0) = +1`.
pub fn decide(y: &[f64], past: &[f64], mode: ThresholdMode, genie: Option<&[i8]>) -> Vec<i8> {
    let mut out: Vec<i8> = Vec::with_capacity(y.len());
    for (n, &yn) in y.iter().enumerate() {
        let theta = match mode {
            ThresholdMode::Zero => 0.0,
            ThresholdMode::PastIsi => {
                let history = genie.unwrap_or(&out);
                past.iter()
                    .take(n)
                    .enumerate()
                    .map(|(k, c)| c * history[n - 1 - k] as f64)
                    .sum()
            }
        };
        out.push(if yn - theta >= 0.0 { 1 } else { -1 });
    }
    out
}

/// Threshold decoder over sampled matched-filter outputs.
pub fn decode_threshold(y: &[f64], gains: &TapGainTable, config: &DecoderConfig) -> Result<SymbolSequence> {
    if gains.window() < config.window {
        return Err(Error::config(
            "rx.window",
            format!("tap table window {} is smaller than decoder window {}", gains.window(), config.window),
        ));
    }
    let past: Vec<f64> = gains.past_taps().into_iter().take(config.window).collect();
    SymbolSequence::new(decide(y, &past, config.threshold_mode, None))
}

/// Mean decision margin `s_n (y_n - theta_n)` over a known preamble, using
/// the true past symbols for the threshold.
fn preamble_margin(y: &[f64], preamble: &[i8], past: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(preamble)
        .enumerate()
        .map(|(n, (&yn, &s))| {
            let theta: f64 = past
                .iter()
                .take(n)
                .enumerate()
                .map(|(k, c)| c * preamble[n - 1 - k] as f64)
                .sum();
            s as f64 * (yn - theta)
        })
        .sum();
    total / preamble.len() as f64
}

/// Picks the decision instant in `[0, 1/f)` that maximizes the mean
/// past-ISI-compensated margin over a known preamble. Every sample-grid
/// offset is tried, each with tap gains recomputed for that instant.
pub fn calibrate_offset(
    y: &SampledSignal,
    preamble: &SymbolSequence,
    spec: &MultipathSpec,
    pulse: &PulseShape,
    window: usize,
) -> Result<f64> {
    let sps = pulse.samples_per_symbol();
    let fs = pulse.sample_rate();
    let mut scores = Vec::with_capacity(sps);
    for k in 0..sps as i64 {
        // an instant with non-positive main gain cannot carry decisions
        let gains = match compute_tap_gains_at(spec, pulse, window, k) {
            Ok(g) => g,
            Err(Error::Numerical(_)) => {
                scores.push(f64::NEG_INFINITY);
                continue;
            }
            Err(e) => return Err(e),
        };
        let config = DecoderConfig::new(ThresholdMode::PastIsi, window, k as f64 / fs, pulse.symbol_rate())?;
        let yn = sample_decisions(y, preamble.len(), &config, pulse.symbol_rate())?;
        scores.push(preamble_margin(&yn, preamble.as_slice(), &gains.past_taps()));
    }
    let (best, &max) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one offset");
    let min = scores.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    if !max.is_finite() || (max - min).abs() <= 1e-12 * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Calibration("decision margin is flat across all offsets".into()));
    }
    Ok(best as f64 / fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EqualizerConfig {
    pub num_taps: usize,
    pub decision_delay: usize,
}

impl EqualizerConfig {
    pub fn new(num_taps: usize, decision_delay: usize) -> Result<Self> {
        if num_taps == 0 || num_taps.is_multiple_of(2) {
            return Err(Error::config("eq.num_taps", format!("must be a positive odd number, got {num_taps}")));
        }
        if decision_delay >= num_taps {
            return Err(Error::config(
                "eq.decision_delay",
                format!("must be below num_taps ({num_taps}), got {decision_delay}"),
            ));
        }
        Ok(Self { num_taps, decision_delay })
    }
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self { num_taps: 11, decision_delay: 5 }
    }
}

/// Symbol-spaced linear equalizer `z_n = sum_i w_i y_{n-i}`, read out
/// `decision_delay` symbols late so that output `n` estimates `s_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseEqualizer {
    weights: Vec<f64>,
    decision_delay: usize,
    residual: Option<SymbolResponse>,
    normal_residual: f64,
}

impl MmseEqualizer {
    /// Equalizer with given weights and no design information.
    pub fn from_weights(weights: Vec<f64>, decision_delay: usize) -> Self {
        Self { weights, decision_delay, residual: None, normal_residual: 0.0 }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decision_delay(&self) -> usize {
        self.decision_delay
    }

    /// Channel-plus-equalizer response seen by the aligned output.
    pub fn residual_response(&self) -> Option<&SymbolResponse> {
        self.residual.as_ref()
    }

    /// `||(H'H + s2 I) w - H'e|| / ||H'e||` of the design solve.
    pub fn normal_equation_residual(&self) -> f64 {
        self.normal_residual
    }
}

/// Composite symbol-rate response of pulse, channel and matched filter
/// with enough lags to cover the whole correlation support.
pub fn composite_response(spec: &MultipathSpec, pulse: &PulseShape) -> Result<SymbolResponse> {
    composite_response_at(spec, pulse, 0)
}

/// [`composite_response`] for decisions `offset` samples into the symbol.
pub fn composite_response_at(spec: &MultipathSpec, pulse: &PulseShape, offset: i64) -> Result<SymbolResponse> {
    let sps = pulse.samples_per_symbol();
    let max_delay = spec
        .delay_samples(pulse.sample_rate())?
        .iter()
        .map(|t| t.1)
        .max()
        .unwrap_or(0);
    let reach = (pulse.len() + max_delay) / sps + 2;
    let table = compute_tap_gains_at(spec, pulse, reach, offset)?;
    // trim lags that are exactly zero
    let resp = table.response();
    let first = resp.taps.iter().position(|v| *v != 0.0).unwrap_or(resp.main);
    let last = resp.taps.iter().rposition(|v| *v != 0.0).unwrap_or(resp.main);
    let (first, last) = (first.min(resp.main), last.max(resp.main));
    Ok(SymbolResponse {
        taps: resp.taps[first..=last].to_vec(),
        main: resp.main - first,
    })
}

/// Genie-aided linear MMSE design for a known channel. `noise_var` is the
/// noise variance of the sampled decision statistic `y_n`.
pub fn mmse_design(
    spec: &MultipathSpec,
    noise_var: f64,
    pulse: &PulseShape,
    config: &EqualizerConfig,
) -> Result<MmseEqualizer> {
    let response = composite_response(spec, pulse)?;
    mmse_design_from_response(&response, noise_var, config)
}

/// Solves `(H'H + noise_var I) w = H'e_d` for the convolution matrix `H` of
/// the given symbol-rate response.
pub fn mmse_design_from_response(
    response: &SymbolResponse,
    noise_var: f64,
    config: &EqualizerConfig,
) -> Result<MmseEqualizer> {
    if !(noise_var >= 0.0) {
        return Err(Error::config("noise_var", format!("must be non-negative, got {noise_var}")));
    }
    let (past, future) = response.extent();
    let t = config.num_taps;
    // causal form: y_n = sum_m h_m s_{n + future - m}
    let h: Vec<f64> = response.taps.iter().rev().copied().collect();
    let rows = h.len() + t - 1;
    let mut hm = DMatrix::<f64>::zeros(rows, t);
    for i in 0..t {
        for (m, &v) in h.iter().enumerate() {
            hm[(i + m, i)] = v;
        }
    }
    let target = future + config.decision_delay;
    let mut e = DVector::<f64>::zeros(rows);
    e[target] = 1.0;
    let rhs = hm.transpose() * &e;
    let normal = hm.transpose() * &hm + DMatrix::<f64>::identity(t, t) * noise_var;
    let w = if noise_var.is_infinite() {
        DVector::<f64>::zeros(t)
    } else {
        normal
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("MMSE normal matrix is singular".into()))?
            .solve(&rhs)
    };
    let normal_residual = if noise_var.is_infinite() {
        0.0
    } else {
        (&normal * &w - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
    };
    let combined = &hm * &w;
    // aligned output n sees s_{n+j} through combined[target - j]
    let len = combined.len();
    let main = len - 1 - target;
    let residual = SymbolResponse {
        taps: combined.iter().rev().copied().collect(),
        main,
    };
    debug_assert_eq!(past + future + t, len);
    Ok(MmseEqualizer {
        weights: w.iter().copied().collect(),
        decision_delay: config.decision_delay,
        residual: Some(residual),
        normal_residual,
    })
}

/// Applies the equalizer; output `n` is aligned with input symbol `n`.
pub fn equalize(y: &[f64], equalizer: &MmseEqualizer) -> Vec<f64> {
    let d = equalizer.decision_delay;
    let w = &equalizer.weights;
    (0..y.len())
        .map(|n| {
            let z = n + d;
            w.iter()
                .enumerate()
                .filter_map(|(i, wi)| z.checked_sub(i).and_then(|k| y.get(k)).map(|v| wi * v))
                .sum()
        })
        .collect()
}

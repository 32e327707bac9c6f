//! Transmit side: bipolar mapping, pulse shaping and DSB-SC modulation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::SampledSignal;
use crate::waveforms::PulseShape;

/// Non-empty sequence of bipolar symbols, each exactly `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence(Vec<i8>);

impl SymbolSequence {
    pub fn new(symbols: Vec<i8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::config("symbols", "symbol sequence must not be empty"));
        }
        if let Some(i) = symbols.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::config("symbols", format!("symbol {i} is {}, expected +1 or -1", symbols[i])));
        }
        Ok(Self(symbols))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }

    /// Inverse of [`bits_to_symbols`].
    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&s| u8::from(s > 0)).collect()
    }
}

/// Maps 1 to +1 and 0 to -1.
pub fn bits_to_symbols(bits: &[u8]) -> Result<SymbolSequence> {
    if bits.is_empty() {
        return Err(Error::config("bits", "bit stream must not be empty"));
    }
    let symbols = bits
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(-1),
            1 => Ok(1),
            other => Err(Error::config("bits", format!("bit {i} is {other}, expected 0 or 1"))),
        })
        .collect::<Result<Vec<i8>>>()?;
    SymbolSequence::new(symbols)
}

/// Carrier of the DSB-SC modulator and the coherent demodulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierParams {
    fc: f64,
    theta: f64,
}

impl CarrierParams {
    pub fn new(fc: f64, theta: f64) -> Result<Self> {
        if !(fc.is_finite() && fc > 0.0) {
            return Err(Error::config("chain.fc_hz", format!("must be positive, got {fc}")));
        }
        if !theta.is_finite() {
            return Err(Error::config("chain.theta_rad", "must be finite"));
        }
        Ok(Self { fc, theta })
    }

    pub fn frequency(&self) -> f64 {
        self.fc
    }

    pub fn phase(&self) -> f64 {
        self.theta
    }

    /// Checks that the carrier is an integer multiple of the symbol rate.
    pub fn check_symbol_locked(&self, symbol_rate: f64) -> Result<()> {
        let ratio = self.fc / symbol_rate;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config(
                "chain.fc_hz",
                format!("carrier {} Hz must be a multiple of the symbol rate {symbol_rate} Hz", self.fc),
            ));
        }
        Ok(())
    }

    /// `cos(2 pi fc t + theta)` at absolute time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        (2.0 * PI * self.fc * t + self.theta).cos()
    }

    fn check_alias(&self, sample_rate: f64) -> Result<()> {
        if self.fc >= sample_rate / 2.0 {
            return Err(Error::config(
                "chain.fc_hz",
                format!("carrier {} Hz aliases at sample rate {sample_rate} Hz", self.fc),
            ));
        }
        Ok(())
    }
}

/// Superposes `amplitudes[m] * p(t - m/f)`. Accepts any real amplitudes;
/// [`shape_pulses`] is the bipolar special case.
pub fn superpose(amplitudes: &[f64], pulse: &PulseShape) -> SampledSignal {
    let sps = pulse.samples_per_symbol();
    let p = pulse.samples();
    let len = if amplitudes.is_empty() {
        0
    } else {
        (amplitudes.len() - 1) * sps + p.len()
    };
    let mut out = vec![0.0; len];
    for (m, &a) in amplitudes.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let dst = &mut out[m * sps..m * sps + p.len()];
        for (o, &v) in dst.iter_mut().zip(p) {
            *o += a * v;
        }
    }
    SampledSignal::from_parts(out, pulse.sample_rate(), pulse.start_index())
}

/// Baseband waveform `u(t) = sum_m s_m p(t - m/f)`; symbol `m` occupies
/// `[m/f, (m+1)/f)`.
pub fn shape_pulses(symbols: &SymbolSequence, pulse: &PulseShape) -> SampledSignal {
    superpose(&symbols.amplitudes(), pulse)
}

/// Multiplies by the carrier evaluated at each sample's absolute time.
pub fn modulate_dsbsc(baseband: &SampledSignal, carrier: &CarrierParams) -> Result<SampledSignal> {
    carrier.check_alias(baseband.sample_rate())?;
    Ok(mix(baseband, carrier))
}

pub(crate) fn mix(signal: &SampledSignal, carrier: &CarrierParams) -> SampledSignal {
    let samples = signal
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * carrier.value_at(signal.time_at(i)))
        .collect();
    SampledSignal::from_parts(samples, signal.sample_rate(), signal.start_index())
}

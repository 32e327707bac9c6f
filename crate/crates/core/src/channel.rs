//! Wireless channel: a finite tapped delay line followed by additive white
//! Gaussian noise calibrated to a target SNR.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{grid_index, mean_square, SampledSignal};
use crate::txchain::CarrierParams;

/// One propagation path: attenuation and delay in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub alpha: f64,
    pub delay: f64,
}

/// Where the tapped delay line acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelDomain {
    /// On the modulated carrier, between transmitter and demodulator.
    #[default]
    Passband,
    /// Directly on the shaped baseband, with no carrier in the chain.
    Baseband,
}

impl ChannelDomain {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelDomain::Passband => "passband",
            ChannelDomain::Baseband => "baseband",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathSpec {
    taps: Vec<Tap>,
    domain: ChannelDomain,
}

impl MultipathSpec {
    pub fn new(taps: Vec<Tap>, domain: ChannelDomain) -> Result<Self> {
        const KEY: &str = "channel.taps";
        let first = taps.first().ok_or_else(|| Error::config(KEY, "at least one tap is required"))?;
        if !(first.alpha > 0.0) {
            return Err(Error::config(KEY, "first tap attenuation must be positive"));
        }
        for (i, tap) in taps.iter().enumerate() {
            if !tap.alpha.is_finite() {
                return Err(Error::config(KEY, format!("tap {i} attenuation is not finite")));
            }
            if !(tap.delay.is_finite() && tap.delay >= 0.0) {
                return Err(Error::config(KEY, format!("tap {i} delay must be non-negative")));
            }
            if i > 0 && tap.delay <= taps[i - 1].delay {
                return Err(Error::config(KEY, "tap delays must be strictly increasing"));
            }
        }
        Ok(Self { taps, domain })
    }

    /// Unit single-path channel.
    pub fn single_path() -> Self {
        Self {
            taps: vec![Tap { alpha: 1.0, delay: 0.0 }],
            domain: ChannelDomain::Passband,
        }
    }

    /// Two-path channel `alpha = [1, 0.6]`, `tau = [0, Ts]`.
    pub fn two_path(symbol_period: f64) -> Self {
        Self {
            taps: vec![
                Tap { alpha: 1.0, delay: 0.0 },
                Tap { alpha: 0.6, delay: symbol_period },
            ],
            domain: ChannelDomain::Passband,
        }
    }

    pub fn with_domain(mut self, domain: ChannelDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn domain(&self) -> ChannelDomain {
        self.domain
    }

    /// Delays converted to whole samples, rejecting off-grid delays.
    pub fn delay_samples(&self, sample_rate: f64) -> Result<Vec<(f64, usize)>> {
        self.taps
            .iter()
            .map(|t| Ok((t.alpha, grid_index(t.delay, sample_rate, "channel.taps")? as usize)))
            .collect()
    }

    /// Baseband taps seen by a coherent receiver. A passband echo delayed by
    /// `tau` is demodulated with gain `alpha cos(2 pi fc tau)`.
    pub fn coherent_equivalent(&self, carrier: Option<&CarrierParams>) -> MultipathSpec {
        match (self.domain, carrier) {
            (ChannelDomain::Passband, Some(c)) => MultipathSpec {
                taps: self
                    .taps
                    .iter()
                    .map(|t| Tap {
                        alpha: t.alpha * (2.0 * PI * c.frequency() * t.delay).cos(),
                        delay: t.delay,
                    })
                    .collect(),
                domain: ChannelDomain::Baseband,
            },
            _ => self.clone(),
        }
    }
}

/// Noise level and RNG seed of one channel realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Target SNR in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::config("sim.snr_db", format!("invalid SNR {snr_db}")));
        }
        Ok(Self { snr_db, seed })
    }

    pub fn noiseless() -> Self {
        Self { snr_db: f64::INFINITY, seed: 0 }
    }
}

/// `output[n] = sum_l alpha_l input[n - tau_l fs]`, zero-filled, extended by
/// the largest delay.
pub fn apply_multipath(signal: &SampledSignal, spec: &MultipathSpec) -> Result<SampledSignal> {
    let taps = spec.delay_samples(signal.sample_rate())?;
    let max_delay = taps.iter().map(|t| t.1).max().unwrap_or(0);
    let x = signal.samples();
    let mut out = vec![0.0; x.len() + max_delay];
    for (alpha, d) in taps {
        for (o, v) in out[d..d + x.len()].iter_mut().zip(x) {
            *o += alpha * v;
        }
    }
    Ok(SampledSignal::from_parts(out, signal.sample_rate(), signal.start_index()))
}

/// Mean square over the occupied region, i.e. samples at `t >= 0`; the
/// acausal lead-in of the first pulse is excluded.
pub fn reference_power(signal: &SampledSignal) -> f64 {
    let skip = (-signal.start_index()).clamp(0, signal.len() as i64) as usize;
    let occupied = &signal.samples()[skip..];
    let p = mean_square(occupied);
    if p > 0.0 {
        p
    } else {
        signal.power()
    }
}

/// Per-sample noise variance giving `snr_db` against [`reference_power`].
pub fn awgn_variance(signal: &SampledSignal, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    reference_power(signal) / 10f64.powf(snr_db / 10.0)
}

/// Adds i.i.d. zero-mean Gaussian noise of the given variance.
pub fn add_noise(signal: &SampledSignal, variance: f64, seed: u64) -> SampledSignal {
    if variance == 0.0 {
        return signal.clone();
    }
    let sigma = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples()
        .iter()
        .map(|&v| {
            let n: f64 = StandardNormal.sample(&mut rng);
            v + sigma * n
        })
        .collect();
    SampledSignal::from_parts(samples, signal.sample_rate(), signal.start_index())
}

/// Adds white Gaussian noise at `noise.snr_db` relative to the signal's
/// occupied-region power. Deterministic for a given seed.
pub fn add_awgn(signal: &SampledSignal, noise: &NoiseSpec) -> SampledSignal {
    add_noise(signal, awgn_variance(signal, noise.snr_db), noise.seed)
}

/// Multipath followed by noise referenced to the multipath output.
pub fn apply_channel(signal: &SampledSignal, spec: &MultipathSpec, noise: &NoiseSpec) -> Result<SampledSignal> {
    let faded = apply_multipath(signal, spec)?;
    Ok(add_awgn(&faded, noise))
}

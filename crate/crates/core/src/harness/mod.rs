//! Monte Carlo engine: end-to-end trials of each link variant, BER sweeps
//! with Wilson confidence intervals, and signal analyses.

mod analysis;
mod stats;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use analysis::{delay_embedding, power_spectrum};
pub use stats::{bpsk_awgn_ber, q_function, substream, trial_seed, wilson_interval, Z95};

use crate::channel::{add_noise, apply_multipath, awgn_variance, ChannelDomain, MultipathSpec};
use crate::error::{Error, Result};
use crate::rxchain::{
    calibrate_offset, composite_response_at, compute_tap_gains_at, decide, demodulate_coherent, equalize,
    matched_decisions, matched_filter, mmse_design_from_response, EqualizerConfig, SymbolResponse, TapGainTable,
    ThresholdMode, DEFAULT_WINDOW,
};
use crate::signal::{grid_index, samples_per_symbol, SampledSignal};
use crate::txchain::{bits_to_symbols, modulate_dsbsc, shape_pulses, CarrierParams, SymbolSequence};
use crate::waveforms::{
    sample_chaotic_basis, sample_rrc, ChaoticBasisParams, PulseShape, RrcParams, DEFAULT_RRC_SPAN, DEFAULT_TAIL_TOL,
};

/// Gain applied after coherent demodulation so that decision statistics are
/// in tap-gain units (the demodulator alone yields `u/2`).
pub const DEMOD_GAIN: f64 = 2.0;

/// Trials evaluated per parallel batch. Part of the reproducibility
/// contract: the stopping rule is applied in trial order within batches.
const BATCH_TRIALS: usize = 16;

/// The five compared link variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    ChaosZero,
    ChaosPastIsi,
    ChaosPastIsiMmse,
    Bpsk,
    BpskMmse,
}

impl System {
    pub const ALL: [System; 5] = [
        System::ChaosZero,
        System::ChaosPastIsi,
        System::ChaosPastIsiMmse,
        System::Bpsk,
        System::BpskMmse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            System::ChaosZero => "chaos_zero",
            System::ChaosPastIsi => "chaos_past_isi",
            System::ChaosPastIsiMmse => "chaos_past_isi_mmse",
            System::Bpsk => "bpsk",
            System::BpskMmse => "bpsk_mmse",
        }
    }

    pub fn parse(s: &str) -> Option<System> {
        System::ALL.into_iter().find(|sys| sys.name() == s)
    }

    pub fn is_chaotic(&self) -> bool {
        matches!(self, System::ChaosZero | System::ChaosPastIsi | System::ChaosPastIsiMmse)
    }

    pub fn uses_mmse(&self) -> bool {
        matches!(self, System::ChaosPastIsiMmse | System::BpskMmse)
    }

    pub fn threshold_mode(&self) -> ThresholdMode {
        match self {
            System::ChaosPastIsi | System::ChaosPastIsiMmse => ThresholdMode::PastIsi,
            _ => ThresholdMode::Zero,
        }
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical parameters of the transmit/receive chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    pub f_hz: f64,
    pub fs_hz: f64,
    pub fc_hz: f64,
    pub theta_rad: f64,
    pub gamma: f64,
    pub span: usize,
    pub tail_tol: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            f_hz: 600.0,
            fs_hz: 9600.0,
            fc_hz: 1800.0,
            theta_rad: 0.0,
            gamma: 0.35,
            span: DEFAULT_RRC_SPAN,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl ChainParams {
    pub fn symbol_period(&self) -> f64 {
        1.0 / self.f_hz
    }

    pub fn samples_per_symbol(&self) -> Result<usize> {
        samples_per_symbol(self.fs_hz, self.f_hz)
    }

    pub fn carrier(&self) -> Result<CarrierParams> {
        CarrierParams::new(self.fc_hz, self.theta_rad)
    }

    pub fn chaotic_pulse(&self) -> Result<PulseShape> {
        sample_chaotic_basis(&ChaoticBasisParams::new(self.f_hz)?, self.fs_hz, self.tail_tol)
    }

    pub fn rrc_pulse(&self) -> Result<PulseShape> {
        sample_rrc(&RrcParams::new(self.gamma, self.symbol_period(), self.span)?, self.fs_hz)
    }

    pub fn pulse_for(&self, system: System) -> Result<PulseShape> {
        if system.is_chaotic() {
            self.chaotic_pulse()
        } else {
            self.rrc_pulse()
        }
    }

    /// `Eb/N0` in dB for a receiver-input SNR in dB. Bit energy is the
    /// received power times `Ts`; the two-sided noise density is `var/fs`.
    pub fn ebn0_db(&self, snr_db: f64) -> f64 {
        snr_db + 10.0 * (self.fs_hz / self.f_hz / 2.0).log10()
    }

    pub fn snr_db_for_ebn0(&self, ebn0_db: f64) -> f64 {
        ebn0_db - 10.0 * (self.fs_hz / self.f_hz / 2.0).log10()
    }
}

/// Everything a BER sweep of one system needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: System,
    pub chain: ChainParams,
    pub channel: MultipathSpec,
    pub snr_grid: Vec<f64>,
    pub bits_per_trial: usize,
    pub max_bits: u64,
    pub target_errors: u64,
    pub master_seed: u64,
    /// Decoder window `W`; also the number of edge symbols discarded.
    pub window: usize,
    pub sample_offset: f64,
    pub equalizer: EqualizerConfig,
    /// Use true instead of decided symbols for the past-ISI threshold.
    pub genie_feedback: bool,
    /// Find the decision instant from a known preamble in every trial.
    pub calibrate: bool,
    pub preamble_len: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: System::ChaosPastIsi,
            chain: ChainParams::default(),
            channel: MultipathSpec::single_path(),
            snr_grid: default_snr_grid(),
            bits_per_trial: 2000,
            max_bits: 10_000_000,
            target_errors: 100,
            master_seed: 1,
            window: DEFAULT_WINDOW,
            sample_offset: 0.0,
            equalizer: EqualizerConfig::default(),
            genie_feedback: false,
            calibrate: false,
            preamble_len: 64,
        }
    }
}

/// -6 dB to 4 dB in 2 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..6).map(|i| -6.0 + 2.0 * i as f64).collect()
}

impl ExperimentConfig {
    pub fn with_system(&self, system: System) -> Self {
        Self { system, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.chain;
        let sps = c.samples_per_symbol()?;
        if sps < 4 {
            return Err(Error::config("chain.fs_hz", "need at least 4 samples per symbol"));
        }
        let carrier = c.carrier()?;
        if c.fc_hz >= c.fs_hz / 2.0 {
            return Err(Error::config("chain.fc_hz", format!("carrier {} Hz aliases at {} Hz", c.fc_hz, c.fs_hz)));
        }
        carrier.check_symbol_locked(c.f_hz)?;
        ChaoticBasisParams::new(c.f_hz)?;
        RrcParams::new(c.gamma, c.symbol_period(), c.span)?;
        if !(c.tail_tol > 0.0 && c.tail_tol < 1.0) {
            return Err(Error::config("chain.tail_tol", "must lie in (0, 1)"));
        }
        self.channel.delay_samples(c.fs_hz)?;
        if self.snr_grid.is_empty() {
            return Err(Error::config("sim.snr_db", "SNR grid must not be empty"));
        }
        if self.snr_grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::config("sim.snr_db", "SNR values must be finite or inf"));
        }
        if self.target_errors < 1 {
            return Err(Error::config("sim.target_errors", "must be at least 1"));
        }
        if self.max_bits < 1 {
            return Err(Error::config("sim.max_bits", "must be at least 1"));
        }
        if self.window < 1 {
            return Err(Error::config("rx.window", "must be at least 1"));
        }
        let skip = self.discarded_head();
        if self.bits_per_trial <= skip + self.window {
            return Err(Error::config(
                "sim.bits_per_trial",
                format!("must exceed the {} discarded edge symbols", skip + self.window),
            ));
        }
        if !(self.sample_offset >= 0.0 && self.sample_offset < c.symbol_period()) {
            return Err(Error::config("rx.sample_offset", "must lie in [0, Ts)"));
        }
        grid_index(self.sample_offset, c.fs_hz, "rx.sample_offset")?;
        EqualizerConfig::new(self.equalizer.num_taps, self.equalizer.decision_delay)?;
        if self.equalizer.decision_delay > self.window {
            return Err(Error::config("eq.decision_delay", "must not exceed the edge window"));
        }
        if self.calibrate && self.preamble_len < 2 {
            return Err(Error::config("rx.preamble_len", "calibration needs at least 2 preamble symbols"));
        }
        Ok(())
    }

    fn discarded_head(&self) -> usize {
        if self.calibrate {
            self.window.max(self.preamble_len)
        } else {
            self.window
        }
    }

    /// Symbols counted per trial.
    pub fn counted_per_trial(&self) -> usize {
        self.bits_per_trial - self.discarded_head() - self.window
    }
}

/// Result of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bits_counted: u64,
    pub errors: u64,
}

/// One measured point of a BER curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ebn0_db: f64,
    pub bits_counted: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub elapsed_seconds: f64,
}

/// Prepared link: pulses, carrier and genie channel knowledge for one
/// configuration. Trials only add the random bits and noise.
#[derive(Debug, Clone)]
pub struct Link {
    config: ExperimentConfig,
    pulse: PulseShape,
    carrier: CarrierParams,
    /// Baseband-equivalent channel seen by the coherent receiver.
    genie_channel: MultipathSpec,
    offset: i64,
    gains: TapGainTable,
    response: SymbolResponse,
}

/// Receiver-side quantities of one trial before decoding.
#[derive(Debug, Clone)]
pub struct Reception {
    pub symbols: SymbolSequence,
    /// Decision statistics `y_n` in tap-gain units.
    pub decisions: Vec<f64>,
    /// Noise variance of each `y_n`.
    pub decision_noise_var: f64,
    pub gains: TapGainTable,
    pub response: SymbolResponse,
}

impl Link {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let pulse = config.chain.pulse_for(config.system)?;
        let carrier = config.chain.carrier()?;
        let genie_channel = config.channel.coherent_equivalent(Some(&carrier));
        let offset = grid_index(config.sample_offset, config.chain.fs_hz, "rx.sample_offset")?;
        let gains = compute_tap_gains_at(&genie_channel, &pulse, config.window, offset)?;
        let response = composite_response_at(&genie_channel, &pulse, offset)?;
        Ok(Self { config: config.clone(), pulse, carrier, genie_channel, offset, gains, response })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn gains(&self) -> &TapGainTable {
        &self.gains
    }

    fn passband(&self) -> bool {
        self.config.channel.domain() == ChannelDomain::Passband
    }

    /// Random bits of a trial.
    pub fn trial_bits(&self, trial_seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        (0..self.config.bits_per_trial).map(|_| rng.gen_range(0..=1u8)).collect()
    }

    /// Transmitter output (passband, or baseband in baseband channel mode).
    pub fn transmit(&self, symbols: &SymbolSequence) -> Result<SampledSignal> {
        let u = shape_pulses(symbols, &self.pulse);
        if self.passband() {
            modulate_dsbsc(&u, &self.carrier)
        } else {
            Ok(u)
        }
    }

    /// Runs bits through transmitter, channel and matched filter and samples
    /// the decision statistics.
    pub fn receive(&self, symbols: SymbolSequence, snr_db: f64, noise_seed: u64) -> Result<Reception> {
        let tx = self.transmit(&symbols)?;
        let faded = apply_multipath(&tx, &self.config.channel)?;
        let noise_var = awgn_variance(&faded, snr_db);
        let rx = add_noise(&faded, noise_var, noise_seed);
        let (d, gain, var_factor) = if self.passband() {
            // 2 n cos has variance 2 var; after the gain of 2 that is var * 4 / 2
            (demodulate_coherent(&rx, &self.carrier), DEMOD_GAIN, DEMOD_GAIN * DEMOD_GAIN / 2.0)
        } else {
            (rx, 1.0, 1.0)
        };
        let decision_noise_var = var_factor * noise_var * self.pulse.energy() / self.pulse.sample_rate();

        let (offset, gains, response) = if self.config.calibrate {
            let n = self.config.preamble_len.min(symbols.len());
            let preamble = SymbolSequence::new(symbols.as_slice()[..n].to_vec())?;
            let y = matched_filter(&d, &self.pulse)?;
            let y = SampledSignal::from_parts(
                y.samples().iter().map(|v| v * gain).collect(),
                y.sample_rate(),
                y.start_index(),
            );
            let t = calibrate_offset(&y, &preamble, &self.genie_channel, &self.pulse, self.config.window)?;
            let offset = (t * self.pulse.sample_rate()).round() as i64;
            (
                offset,
                compute_tap_gains_at(&self.genie_channel, &self.pulse, self.config.window, offset)?,
                composite_response_at(&self.genie_channel, &self.pulse, offset)?,
            )
        } else {
            (self.offset, self.gains.clone(), self.response.clone())
        };

        let mut decisions = matched_decisions(&d, &self.pulse, symbols.len(), offset)?;
        for v in &mut decisions {
            *v *= gain;
        }
        Ok(Reception { symbols, decisions, decision_noise_var, gains, response })
    }

    /// Decodes a reception according to the configured system.
    pub fn decode(&self, rx: &Reception) -> Result<Vec<i8>> {
        let w = self.config.window;
        let mode = self.config.system.threshold_mode();
        let genie = self.config.genie_feedback.then(|| rx.symbols.as_slice());
        if self.config.system.uses_mmse() {
            let eq = mmse_design_from_response(&rx.response, rx.decision_noise_var, &self.config.equalizer)?;
            let z = equalize(&rx.decisions, &eq);
            let past = eq.residual_response().map(|r| r.past_taps(w)).unwrap_or_default();
            Ok(decide(&z, &past, mode, genie))
        } else {
            let past = rx.gains.past_taps();
            Ok(decide(&rx.decisions, &past[..w.min(past.len())], mode, genie))
        }
    }

    /// One full trial: random bits, chain, error count over interior symbols.
    pub fn run(&self, snr_db: f64, trial_seed: u64) -> Result<TrialOutcome> {
        let bits = self.trial_bits(trial_seed);
        let symbols = bits_to_symbols(&bits)?;
        let rx = self.receive(symbols, snr_db, substream(trial_seed, 1))?;
        let decided = self.decode(&rx)?;
        let head = self.config.discarded_head();
        let tail = bits.len() - self.config.window;
        let errors = rx.symbols.as_slice()[head..tail]
            .iter()
            .zip(&decided[head..tail])
            .filter(|(a, b)| a != b)
            .count();
        Ok(TrialOutcome { bits_counted: (tail - head) as u64, errors: errors as u64 })
    }
}

/// Runs one trial of `config` at `snr_db`.
pub fn run_trial(config: &ExperimentConfig, snr_db: f64, trial_seed: u64) -> Result<TrialOutcome> {
    Link::new(config)?.run(snr_db, trial_seed).map_err(|e| Error::Trial {
        snr_db,
        trial: trial_seed,
        source: Box::new(e),
    })
}

/// Totals of one Monte Carlo point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PointTotals {
    pub bits: u64,
    pub errors: u64,
    pub trials: u64,
}

/// Accumulates trials `0, 1, 2, ...` until `target_errors` errors or
/// `max_bits` bits. Trials are evaluated in parallel batches but summed in
/// index order, so the stopping trial and the totals do not depend on the
/// thread count.
pub fn accumulate_trials<F>(target_errors: u64, max_bits: u64, trial: F) -> Result<PointTotals>
where
    F: Fn(u64) -> Result<TrialOutcome> + Sync,
{
    let mut totals = PointTotals::default();
    let mut next = 0u64;
    loop {
        let batch: Vec<Result<TrialOutcome>> = (next..next + BATCH_TRIALS as u64)
            .into_par_iter()
            .map(&trial)
            .collect();
        for outcome in batch {
            let outcome = outcome?;
            totals.bits += outcome.bits_counted;
            totals.errors += outcome.errors;
            totals.trials += 1;
            if totals.errors >= target_errors || totals.bits >= max_bits {
                return Ok(totals);
            }
        }
        next += BATCH_TRIALS as u64;
    }
}

/// BER at every SNR of the grid. Trial seeds depend only on the master seed
/// and the (point, trial) indices, so different systems swept with the same
/// seed see the same bits and noise.
pub fn ber_sweep(config: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    let link = Link::new(config)?;
    config
        .snr_grid
        .iter()
        .enumerate()
        .map(|(point, &snr_db)| {
            let started = Instant::now();
            let totals = accumulate_trials(config.target_errors, config.max_bits, |trial| {
                let seed = trial_seed(config.master_seed, point as u64, trial);
                link.run(snr_db, seed).map_err(|e| Error::Trial { snr_db, trial, source: Box::new(e) })
            })?;
            let (ci_low, ci_high) = wilson_interval(totals.errors, totals.bits);
            Ok(BerPoint {
                snr_db,
                ebn0_db: config.chain.ebn0_db(snr_db),
                bits_counted: totals.bits,
                errors: totals.errors,
                ber: totals.errors as f64 / totals.bits as f64,
                ci_low,
                ci_high,
                trials: totals.trials,
                elapsed_seconds: started.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

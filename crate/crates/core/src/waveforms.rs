//! Pulse-shaping basis functions: the chaotic hybrid-system basis and the
//! root raised cosine, their sampled realizations and their autocorrelation.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::signal::samples_per_symbol;

/// Default truncation tolerance of the chaotic basis tail, `2^-20`.
pub const DEFAULT_TAIL_TOL: f64 = 1.0 / 1_048_576.0;

/// Default RRC half-length in symbol periods.
pub const DEFAULT_RRC_SPAN: usize = 4;

/// Parameters of the chaotic basis function. Only the base frequency is
/// stored; the decay rate and angular frequency are derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaoticBasisParams {
    f: f64,
}

impl ChaoticBasisParams {
    pub fn new(base_frequency: f64) -> Result<Self> {
        if !(base_frequency.is_finite() && base_frequency > 0.0) {
            return Err(Error::config("chain.f_hz", format!("must be positive, got {base_frequency}")));
        }
        Ok(Self { f: base_frequency })
    }

    /// Base frequency `f` in Hz, which is also the symbol rate.
    pub fn base_frequency(&self) -> f64 {
        self.f
    }

    /// `beta = f ln 2`, in 1/s.
    pub fn beta(&self) -> f64 {
        self.f * LN_2
    }

    /// `omega = 2 pi f`, in rad/s.
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.f
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.f
    }
}

/// Evaluates the chaotic basis `p(t)`.
///
/// For `t < 0` the pulse is a growing oscillation with envelope `2^(t f)`,
/// on `[0, 1/f)` it approaches the fixed point 1 and it vanishes from `1/f`
/// on. The function is continuous; `p(0) = 1/2`.
pub fn eval_chaotic_basis(params: &ChaoticBasisParams, t: f64) -> f64 {
    let f = params.f;
    let beta = params.beta();
    let omega = params.omega();
    let oscillation = (omega * t).cos() - beta / omega * (omega * t).sin();
    if t < 0.0 {
        (1.0 - (-beta / f).exp()) * (beta * t).exp() * oscillation
    } else if t < 1.0 / f {
        1.0 - (beta * (t - 1.0 / f)).exp() * oscillation
    } else {
        0.0
    }
}

/// Root-raised-cosine parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrcParams {
    gamma: f64,
    symbol_period: f64,
    span: usize,
}

impl RrcParams {
    pub fn new(gamma: f64, symbol_period: f64, span: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config("chain.gamma", format!("roll-off must lie in (0, 1], got {gamma}")));
        }
        if !(symbol_period.is_finite() && symbol_period > 0.0) {
            return Err(Error::config("chain.f_hz", format!("symbol period must be positive, got {symbol_period}")));
        }
        if span < 1 {
            return Err(Error::config("chain.span", "span must be at least one symbol period"));
        }
        Ok(Self { gamma, symbol_period, span })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn symbol_period(&self) -> f64 {
        self.symbol_period
    }

    pub fn span(&self) -> usize {
        self.span
    }
}

/// Evaluates the unit-energy root-raised-cosine impulse response.
///
/// The removable singularities at `t = 0` and `|t| = Ts/(4 gamma)` are
/// replaced by their closed-form limits within a guard band of `Ts * 1e-8`.
pub fn eval_rrc(params: &RrcParams, t: f64) -> f64 {
    let g = params.gamma;
    let ts = params.symbol_period;
    let guard = ts * 1e-8;
    if t.abs() < guard {
        return (1.0 - g + 4.0 * g / PI) / ts.sqrt();
    }
    if (t.abs() - ts / (4.0 * g)).abs() < guard {
        let a = PI / (4.0 * g);
        return g / (2.0 * ts).sqrt()
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let x = t / ts;
    let num = (PI * x * (1.0 - g)).sin() + 4.0 * g * x * (PI * x * (1.0 + g)).cos();
    let den = PI * x * (1.0 - (4.0 * g * x).powi(2));
    num / den / ts.sqrt()
}

/// A sampled, truncated pulse on the global sample grid.
///
/// Samples outside `[t_start, t_start + len / sample_rate)` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    samples: Vec<f64>,
    sample_rate: f64,
    symbol_rate: f64,
    start: i64,
    energy: f64,
}

impl PulseShape {
    /// Wraps arbitrary taps as a pulse; `start` is the grid index of the
    /// first sample.
    pub fn new(samples: Vec<f64>, sample_rate: f64, symbol_rate: f64, start: i64) -> Result<Self> {
        samples_per_symbol(sample_rate, symbol_rate)?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("pulse", "non-finite sample"));
        }
        let energy = samples.iter().map(|v| v * v).sum::<f64>() / sample_rate;
        if !(energy > 0.0) {
            return Err(Error::config("pulse", "pulse energy must be positive"));
        }
        Ok(Self { samples, sample_rate, symbol_rate, start, energy })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    /// Grid index of the first sample (negative for acausal pulses).
    pub fn start_index(&self) -> i64 {
        self.start
    }

    pub fn t_start(&self) -> f64 {
        self.start as f64 / self.sample_rate
    }

    /// `sum p[n]^2 / fs`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pulse value at a global grid index, zero outside the support.
    pub fn at_index(&self, index: i64) -> f64 {
        let local = index - self.start;
        if local < 0 {
            return 0.0;
        }
        self.samples.get(local as usize).copied().unwrap_or(0.0)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| (self.start + i as i64) as f64 / self.sample_rate)
    }

    /// Same pulse scaled to a new energy. Used to build same-energy probe
    /// filters and fault injection in the self test.
    pub fn with_energy(&self, energy: f64) -> Result<Self> {
        let k = (energy / self.energy).sqrt();
        Self::new(
            self.samples.iter().map(|v| v * k).collect(),
            self.sample_rate,
            self.symbol_rate,
            self.start,
        )
    }
}

/// Samples the chaotic basis on the grid `n / sample_rate`.
///
/// The acausal tail is cut at the latest symbol boundary `-K/f` whose
/// envelope `2^-K` is below `tail_tol` times the pulse peak. The support ends
/// just before `1/f`.
pub fn sample_chaotic_basis(
    params: &ChaoticBasisParams,
    sample_rate: f64,
    tail_tol: f64,
) -> Result<PulseShape> {
    let sps = samples_per_symbol(sample_rate, params.f)?;
    if sps < 4 {
        return Err(Error::config("chain.fs_hz", format!("need at least 4 samples per symbol, got {sps}")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::config("chain.tail_tol", format!("must lie in (0, 1), got {tail_tol}")));
    }
    let eval = |n: i64| eval_chaotic_basis(params, n as f64 / sample_rate);
    let peak = (0..sps as i64).map(|n| eval(n).abs()).fold(0.0_f64, f64::max);
    let threshold = tail_tol * peak;
    let mut k = 1i64;
    while 2f64.powi(-(k as i32)) >= threshold {
        k += 1;
    }
    let start = -k * sps as i64;
    let samples = (start..sps as i64).map(eval).collect();
    PulseShape::new(samples, sample_rate, params.f, start)
}

/// Samples the RRC pulse symmetrically over `[-span Ts, +span Ts]`.
pub fn sample_rrc(params: &RrcParams, sample_rate: f64) -> Result<PulseShape> {
    let symbol_rate = 1.0 / params.symbol_period;
    let sps = samples_per_symbol(sample_rate, symbol_rate)?;
    if sps < 4 {
        return Err(Error::config("chain.fs_hz", format!("need at least 4 samples per symbol, got {sps}")));
    }
    let half = (params.span * sps) as i64;
    let samples = (-half..=half)
        .map(|n| eval_rrc(params, n as f64 / sample_rate))
        .collect();
    PulseShape::new(samples, sample_rate, symbol_rate, -half)
}

/// Discrete autocorrelation `R_p(lag) = sum p[n] p[n + lag fs] / fs`.
///
/// The lag is rounded to the nearest sample.
pub fn autocorrelation(pulse: &PulseShape, lag: f64) -> f64 {
    autocorrelation_samples(pulse, (lag * pulse.sample_rate).round() as i64)
}

/// Autocorrelation at an integer sample lag.
pub fn autocorrelation_samples(pulse: &PulseShape, lag: i64) -> f64 {
    let lag = lag.unsigned_abs() as usize;
    let p = &pulse.samples;
    if lag >= p.len() {
        return 0.0;
    }
    p[..p.len() - lag]
        .iter()
        .zip(&p[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / pulse.sample_rate
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 600.0;
    const FS: f64 = 9600.0;

    fn chaos() -> ChaoticBasisParams {
        ChaoticBasisParams::new(F).unwrap()
    }

    fn rrc(gamma: f64) -> RrcParams {
        RrcParams::new(gamma, 1.0 / F, 4).unwrap()
    }

    // Raw formula without limit handling, used as the numeric-limit oracle.
    fn rrc_raw(g: f64, ts: f64, t: f64) -> f64 {
        let x = t / ts;
        ((PI * x * (1.0 - g)).sin() + 4.0 * g * x * (PI * x * (1.0 + g)).cos())
            / (PI * x * (1.0 - (4.0 * g * x).powi(2)))
            / ts.sqrt()
    }

    #[test]
    fn derived_parameters() {
        let p = chaos();
        assert_eq!(p.omega(), 2.0 * PI * F);
        assert_eq!(p.beta(), F * LN_2);
        assert!(ChaoticBasisParams::new(0.0).is_err());
        assert!(ChaoticBasisParams::new(f64::NAN).is_err());
    }

    #[test]
    fn chaotic_basis_branch_values() {
        let p = chaos();
        assert!((eval_chaotic_basis(&p, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(eval_chaotic_basis(&p, 1.0 / F), 0.0);
        assert_eq!(eval_chaotic_basis(&p, 3.0 / F), 0.0);
        // left limit: (1 - e^{-ln 2}) e^0 (cos 0 - 0) = 1/2
        assert!((eval_chaotic_basis(&p, -1e-15) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chaotic_basis_tail_envelope() {
        let p = chaos();
        let bound = 0.5 * 2f64.powi(-10) * (1.0 + p.beta() / p.omega());
        assert!(eval_chaotic_basis(&p, -10.0 / F).abs() <= bound);
        for k in 1..100 {
            let t = -10.0 / F - k as f64 / (37.0 * F);
            assert!(eval_chaotic_basis(&p, t).abs() <= bound);
        }
    }

    #[test]
    fn chaotic_basis_is_continuous_at_junctions() {
        let p = chaos();
        let eps = 1e-9 / F;
        let peak = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        for t0 in [0.0, 1.0 / F] {
            let vals = [t0 - eps, t0, t0 + eps].map(|t| eval_chaotic_basis(&p, t));
            assert!((vals[0] - vals[1]).abs() < 1e-6 * peak);
            assert!((vals[1] - vals[2]).abs() < 1e-6 * peak);
        }
    }

    #[test]
    fn chaotic_pulse_grid() {
        let pulse = sample_chaotic_basis(&chaos(), FS, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(pulse.samples_per_symbol(), 16);
        assert!(pulse.t_start() <= -20.0 / F + 1e-12);
        // last sample sits before 1/f
        let last_t = pulse.times().last().unwrap();
        assert!(last_t < 1.0 / F);
        assert_eq!(pulse.at_index(16), 0.0);
        // the first retained sample is below the tolerance relative to the peak
        assert!(pulse.samples()[0].abs() <= DEFAULT_TAIL_TOL * pulse.peak());
    }

    #[test]
    fn chaotic_tail_scan_oracle() {
        // scan backwards from t = 0 until the envelope drops below tol * peak
        let p = chaos();
        let pulse = sample_chaotic_basis(&p, FS, DEFAULT_TAIL_TOL).unwrap();
        let mut k = 0;
        while 0.5 * 2f64.powi(-k) * (1.0 + p.beta() / p.omega()) >= DEFAULT_TAIL_TOL * pulse.peak() {
            k += 1;
        }
        assert!(pulse.t_start() <= -(k as f64 - 1.0) / F);
    }

    #[test]
    fn rejects_fractional_samples_per_symbol() {
        assert!(sample_chaotic_basis(&chaos(), 9601.0, DEFAULT_TAIL_TOL).is_err());
        assert!(sample_chaotic_basis(&chaos(), 1800.0, DEFAULT_TAIL_TOL).is_err());
        assert!(sample_chaotic_basis(&chaos(), FS, 0.0).is_err());
        assert!(sample_rrc(&rrc(0.35), 9601.0).is_err());
    }

    #[test]
    fn rrc_limit_at_origin() {
        let g = 0.35;
        let ts = 1.0 / F;
        let expected = (1.0 - g + 4.0 * g / PI) / ts.sqrt();
        let got = eval_rrc(&rrc(g), 0.0);
        assert!((got - expected).abs() < 1e-12 * expected);
        let h = ts * 1e-6;
        let numeric = 0.5 * (rrc_raw(g, ts, h) + rrc_raw(g, ts, -h));
        assert!(((got - numeric) / numeric).abs() < 1e-6);
    }

    #[test]
    fn rrc_limit_at_singular_point() {
        let ts = 1.0 / F;
        for g in [0.2, 0.35, 0.5, 1.0] {
            let ts4g = ts / (4.0 * g);
            let got = eval_rrc(&rrc(g), ts4g);
            let h = ts * 1e-6;
            let numeric = 0.5 * (rrc_raw(g, ts, ts4g + h) + rrc_raw(g, ts, ts4g - h));
            assert!(((got - numeric) / numeric).abs() < 1e-6, "gamma {g}: {got} vs {numeric}");
            assert_eq!(eval_rrc(&rrc(g), -ts4g), got);
        }
    }

    #[test]
    fn rrc_is_even() {
        let p = rrc(0.35);
        for k in 0..200 {
            let t = k as f64 * 1.37e-5;
            assert_eq!(eval_rrc(&p, t), eval_rrc(&p, -t));
        }
    }

    #[test]
    fn rrc_grid() {
        let pulse = sample_rrc(&rrc(0.35), FS).unwrap();
        assert_eq!(pulse.len(), 129);
        assert!((pulse.t_start() + 4.0 / F).abs() < 1e-15);
        let (imax, _) = pulse
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(pulse.start_index() + imax as i64, 0);
        // side lobes decay: outer symbol is much smaller than the main lobe
        assert!(pulse.samples()[0].abs() < 0.01 * pulse.peak());
    }

    #[test]
    fn rrc_energy_is_unit_for_long_span() {
        for span in [8, 12] {
            let p = RrcParams::new(0.35, 1.0 / F, span).unwrap();
            let e = sample_rrc(&p, FS).unwrap().energy();
            assert!((e - 1.0).abs() < 0.01, "span {span}: {e}");
        }
    }

    #[test]
    fn autocorrelation_basics() {
        let pulse = sample_chaotic_basis(&chaos(), FS, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(autocorrelation(&pulse, 0.0), pulse.energy());
        for lag in [1, 5, 16, 40, 300] {
            assert_eq!(autocorrelation_samples(&pulse, lag), autocorrelation_samples(&pulse, -lag));
        }
        assert_eq!(autocorrelation_samples(&pulse, pulse.len() as i64), 0.0);
    }

    #[test]
    fn chaotic_autocorrelation_decays_geometrically() {
        let pulse = sample_chaotic_basis(&chaos(), FS, DEFAULT_TAIL_TOL).unwrap();
        let r0 = pulse.energy();
        let r = |k: i64| autocorrelation(&pulse, -(k as f64) / F);
        // |R(-k/f)| <= c 2^-k R(0) with a k-independent constant
        let c = (1..=15).map(|k| r(k).abs() / r0 * 2f64.powi(k as i32)).fold(0.0, f64::max);
        assert!(c < 0.2, "c = {c}");
        for k in 1..=10 {
            let ratio = (r(k + 1) / r(k)).abs();
            assert!(ratio <= 0.6, "k {k}: {ratio}");
        }
    }

    #[test]
    fn tail_truncation_changes_integral_below_tolerance() {
        let p = chaos();
        let integral = |tol: f64| {
            let pulse = sample_chaotic_basis(&p, FS, tol).unwrap();
            (pulse.samples().iter().sum::<f64>() / FS, pulse.peak())
        };
        let (coarse, peak) = integral(DEFAULT_TAIL_TOL);
        let (fine, _) = integral(DEFAULT_TAIL_TOL / 2.0);
        assert!(coarse.is_finite());
        assert!((coarse - fine).abs() < DEFAULT_TAIL_TOL * peak / F);
    }

    #[test]
    fn pulse_rejects_zero_energy() {
        assert!(PulseShape::new(vec![0.0; 16], FS, F, 0).is_err());
    }
}

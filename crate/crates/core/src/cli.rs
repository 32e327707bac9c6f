//! Batch front end: flat `key=value` configuration, presets, and the `ber`,
//! `waveform` and `selftest` subcommands.
//!
//! Every artifact is written to a temporary file and renamed into place, so
//! a failed run never leaves partial outputs behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{add_noise, awgn_variance, reference_power, ChannelDomain, MultipathSpec, Tap};
use crate::error::{Error, Result};
use crate::harness::{
    ber_sweep, delay_embedding, power_spectrum, run_trial, BerPoint, ExperimentConfig, Link, System,
};
use crate::rxchain::{mmse_design, EqualizerConfig};
use crate::signal::SampledSignal;
use crate::txchain::{bits_to_symbols, modulate_dsbsc, shape_pulses, SymbolSequence};
use crate::waveforms::{eval_chaotic_basis, eval_rrc, ChaoticBasisParams, RrcParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CSV_HEADER: &str = "system,snr_db,bits,errors,ber,ci_low,ci_high,seed";

/// Path delay as written in the config: seconds, or symbol periods (`1Ts`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TapDelay {
    Seconds(f64),
    Symbols(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapSpec {
    pub alpha: f64,
    pub delay: TapDelay,
}

impl TapSpec {
    fn resolve(&self, symbol_period: f64) -> Tap {
        let delay = match self.delay {
            TapDelay::Seconds(s) => s,
            TapDelay::Symbols(k) => k * symbol_period,
        };
        Tap { alpha: self.alpha, delay }
    }
}

fn format_taps(taps: &[TapSpec]) -> String {
    taps.iter()
        .map(|t| match t.delay {
            TapDelay::Seconds(s) => format!("{}@{}", t.alpha, s),
            TapDelay::Symbols(k) => format!("{}@{}Ts", t.alpha, k),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_taps(value: &str) -> Result<Vec<TapSpec>> {
    const KEY: &str = "channel.taps";
    value
        .split(',')
        .map(|item| {
            let (a, d) = item
                .trim()
                .split_once('@')
                .ok_or_else(|| Error::config(KEY, format!("expected alpha@delay, got {item:?}")))?;
            let alpha = parse_f64(KEY, a)?;
            let d = d.trim();
            let delay = match d.strip_suffix("Ts") {
                Some(k) => TapDelay::Symbols(if k.is_empty() { 1.0 } else { parse_f64(KEY, k)? }),
                None => TapDelay::Seconds(parse_f64(KEY, d)?),
            };
            Ok(TapSpec { alpha, delay })
        })
        .collect()
}

/// Settings of the `waveform` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformConfig {
    /// `chaos` or `rrc`.
    pub pulse: String,
    /// Explicit symbol list; random symbols from the seed when `None`.
    pub symbols: Option<Vec<i8>>,
    pub num_symbols: usize,
    pub segment_len: usize,
    pub delay: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self { pulse: "chaos".into(), symbols: None, num_symbols: 256, segment_len: 512, delay: 4 }
    }
}

/// Complete run configuration: the shared experiment settings plus the
/// list of systems to sweep and the waveform export settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub base: ExperimentConfig,
    pub systems: Vec<System>,
    pub taps: Vec<TapSpec>,
    pub domain: ChannelDomain,
    pub waveform: WaveformConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            base: ExperimentConfig::default(),
            systems: System::ALL.to_vec(),
            taps: vec![TapSpec { alpha: 1.0, delay: TapDelay::Seconds(0.0) }],
            domain: ChannelDomain::Passband,
            waveform: WaveformConfig::default(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::config(key, format!("expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::config(key, format!("expected a non-negative integer, got {v:?}")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    let v = v.trim();
    // accept 1e7 style counts
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(Error::config(key, format!("expected a non-negative integer, got {v:?}"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got {v:?}"))),
    }
}

fn parse_list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| item(key, s)).collect()
}

fn fmt_list<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Named parameter sets of the single-path and two-path comparisons.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        match name {
            "fig7" => {
                cfg.systems = vec![System::ChaosZero, System::ChaosPastIsi, System::Bpsk];
            }
            "fig8" => {
                cfg.set("channel.taps", "1@0,0.6@1Ts")?;
            }
            other => return Err(Error::config("preset", format!("unknown preset {other:?} (fig7, fig8)"))),
        }
        Ok(cfg)
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let b = &mut self.base;
        let v = value.trim();
        match key {
            "chain.f_hz" => b.chain.f_hz = parse_f64(key, v)?,
            "chain.fs_hz" => b.chain.fs_hz = parse_f64(key, v)?,
            "chain.fc_hz" => b.chain.fc_hz = parse_f64(key, v)?,
            "chain.theta_rad" => b.chain.theta_rad = parse_f64(key, v)?,
            "chain.gamma" => b.chain.gamma = parse_f64(key, v)?,
            "chain.span" => b.chain.span = parse_usize(key, v)?,
            "chain.tail_tol" => b.chain.tail_tol = parse_f64(key, v)?,
            "channel.taps" => self.taps = parse_taps(v)?,
            "channel.domain" => {
                self.domain = match v {
                    "passband" => ChannelDomain::Passband,
                    "baseband" => ChannelDomain::Baseband,
                    _ => return Err(Error::config(key, format!("expected passband or baseband, got {v:?}"))),
                }
            }
            "sim.systems" => {
                self.systems = parse_list(key, v, |k, s| {
                    System::parse(s.trim()).ok_or_else(|| Error::config(k, format!("unknown system {s:?}")))
                })?
            }
            "sim.snr_db" => b.snr_grid = parse_list(key, v, parse_f64)?,
            "sim.bits_per_trial" => b.bits_per_trial = parse_usize(key, v)?,
            "sim.max_bits" => b.max_bits = parse_u64(key, v)?,
            "sim.target_errors" => b.target_errors = parse_u64(key, v)?,
            "sim.seed" => b.master_seed = parse_u64(key, v)?,
            "rx.window" => b.window = parse_usize(key, v)?,
            "rx.sample_offset" => b.sample_offset = parse_f64(key, v)?,
            "rx.calibrate" => b.calibrate = parse_bool(key, v)?,
            "rx.genie_feedback" => b.genie_feedback = parse_bool(key, v)?,
            "rx.preamble_len" => b.preamble_len = parse_usize(key, v)?,
            "eq.num_taps" => b.equalizer.num_taps = parse_usize(key, v)?,
            "eq.decision_delay" => b.equalizer.decision_delay = parse_usize(key, v)?,
            "waveform.pulse" => {
                if v != "chaos" && v != "rrc" {
                    return Err(Error::config(key, format!("expected chaos or rrc, got {v:?}")));
                }
                self.waveform.pulse = v.to_string();
            }
            "waveform.symbols" => {
                let symbols = parse_list(key, v, |k, s| match s.trim() {
                    "1" | "+1" => Ok(1i8),
                    "-1" => Ok(-1i8),
                    other => Err(Error::config(k, format!("symbols must be +1 or -1, got {other:?}"))),
                })?;
                self.waveform.symbols = Some(symbols);
            }
            "waveform.num_symbols" => self.waveform.num_symbols = parse_usize(key, v)?,
            "waveform.segment_len" => self.waveform.segment_len = parse_usize(key, v)?,
            "waveform.delay" => self.waveform.delay = parse_usize(key, v)?,
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies a config file body: one `key=value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected key=value, got {line:?}"))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every setting as `key -> value`, in a form [`RunConfig::set`] reads back
    /// to an identical configuration.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let b = &self.base;
        let mut m = BTreeMap::new();
        m.insert("chain.f_hz", b.chain.f_hz.to_string());
        m.insert("chain.fs_hz", b.chain.fs_hz.to_string());
        m.insert("chain.fc_hz", b.chain.fc_hz.to_string());
        m.insert("chain.theta_rad", b.chain.theta_rad.to_string());
        m.insert("chain.gamma", b.chain.gamma.to_string());
        m.insert("chain.span", b.chain.span.to_string());
        m.insert("chain.tail_tol", b.chain.tail_tol.to_string());
        m.insert("channel.taps", format_taps(&self.taps));
        m.insert("channel.domain", self.domain.name().to_string());
        m.insert("sim.systems", self.systems.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
        m.insert("sim.snr_db", fmt_list(&b.snr_grid));
        m.insert("sim.bits_per_trial", b.bits_per_trial.to_string());
        m.insert("sim.max_bits", b.max_bits.to_string());
        m.insert("sim.target_errors", b.target_errors.to_string());
        m.insert("sim.seed", b.master_seed.to_string());
        m.insert("rx.window", b.window.to_string());
        m.insert("rx.sample_offset", b.sample_offset.to_string());
        m.insert("rx.calibrate", b.calibrate.to_string());
        m.insert("rx.genie_feedback", b.genie_feedback.to_string());
        m.insert("rx.preamble_len", b.preamble_len.to_string());
        m.insert("eq.num_taps", b.equalizer.num_taps.to_string());
        m.insert("eq.decision_delay", b.equalizer.decision_delay.to_string());
        m.insert("waveform.pulse", self.waveform.pulse.clone());
        if let Some(s) = &self.waveform.symbols {
            m.insert("waveform.symbols", fmt_list(s));
        }
        m.insert("waveform.num_symbols", self.waveform.num_symbols.to_string());
        m.insert("waveform.segment_len", self.waveform.segment_len.to_string());
        m.insert("waveform.delay", self.waveform.delay.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn channel(&self) -> Result<MultipathSpec> {
        let ts = self.base.chain.symbol_period();
        MultipathSpec::new(self.taps.iter().map(|t| t.resolve(ts)).collect(), self.domain)
    }

    /// Experiment of one system, validated.
    pub fn experiment(&self, system: System) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig { system, channel: self.channel()?, ..self.base.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(Error::config("sim.systems", "at least one system is required"));
        }
        for &s in &self.systems {
            self.experiment(s)?;
        }
        Ok(())
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// One CSV row of a BER run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRow {
    pub system: System,
    #[serde(flatten)]
    pub point: BerPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

/// Everything needed to rerun a BER sweep: the full config echo, the seed
/// and the results.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp_unix: u64,
    pub master_seed: u64,
    pub config: BTreeMap<&'static str, String>,
    pub environment: Environment,
    pub points: Vec<BerRow>,
}

pub fn ber_csv(rows: &[BerRow], seed: u64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{}",
            r.system, p.snr_db, p.bits_counted, p.errors, p.ber, p.ci_low, p.ci_high, seed
        );
    }
    out
}

/// Sweeps every configured system.
pub fn run_ber(cfg: &RunConfig) -> Result<Vec<BerRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &system in &cfg.systems {
        for point in ber_sweep(&cfg.experiment(system)?)? {
            rows.push(BerRow { system, point });
        }
    }
    Ok(rows)
}

/// Runs the BER sweep and writes `ber.csv` and `manifest.json` into `out`.
pub fn cmd_ber(cfg: &RunConfig, out: &Path, threads: usize) -> Result<Vec<BerRow>> {
    let rows = in_pool(threads, || run_ber(cfg))?;
    let seed = cfg.base.master_seed;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        master_seed: seed,
        config: cfg.entries(),
        environment: Environment { os: std::env::consts::OS, arch: std::env::consts::ARCH, threads },
        points: rows.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
    write_atomic(&out.join("ber.csv"), ber_csv(&rows, seed).as_bytes())?;
    write_atomic(&out.join("manifest.json"), json.as_bytes())?;
    Ok(rows)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(f)
}

fn series_csv(header: &str, rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{header}\n");
    for (a, b) in rows {
        let _ = writeln!(out, "{a:.9e},{b:.9e}");
    }
    out
}

/// Minimal SVG line or scatter plot.
fn svg_plot(title: &str, points: &[(f64, f64)], scatter: Option<&[f64]>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 40.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = if x1 > x0 { (W - 2.0 * M) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (H - 2.0 * M) / (y1 - y0) } else { 1.0 };
    let px = |x: f64| M + (x - x0) * sx;
    let py = |y: f64| H - M - (y - y0) * sy;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{M}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        W - 2.0 * M,
        H - 2.0 * M
    );
    match scatter {
        Some(class) => {
            for (&(x, y), &c) in points.iter().zip(class) {
                let color = if c > 0.0 { "#c03020" } else if c < 0.0 { "#2040c0" } else { "#888" };
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{color}\"/>", px(x), py(y));
            }
        }
        None => {
            s.push_str("<polyline fill=\"none\" stroke=\"#2040c0\" stroke-width=\"1\" points=\"");
            for &(x, y) in points {
                let _ = write!(s, "{:.2},{:.2} ", px(x), py(y));
            }
            s.push_str("\"/>\n");
        }
    }
    s.push_str("</svg>\n");
    s
}

fn write_series(out: &Path, stem: &str, header: &str, title: &str, pts: &[(f64, f64)]) -> Result<()> {
    write_atomic(&out.join(format!("{stem}.csv")), series_csv(header, pts.iter().copied()).as_bytes())?;
    write_atomic(&out.join(format!("{stem}.svg")), svg_plot(title, pts, None).as_bytes())
}

/// Files written by [`cmd_waveform`].
pub const WAVEFORM_FILES: [&str; 5] = ["pulse", "baseband", "spectrum", "passband_spectrum", "embedding"];

/// Exports the pulse, the shaped baseband for a symbol list, the spectra of
/// baseband and passband signals and a delay embedding.
pub fn cmd_waveform(cfg: &RunConfig, out: &Path) -> Result<()> {
    let w = &cfg.waveform;
    let chain = cfg.base.chain;
    let system = if w.pulse == "rrc" { System::Bpsk } else { System::ChaosZero };
    cfg.experiment(system)?;
    let symbols = match &w.symbols {
        Some(s) if s.is_empty() => return Err(Error::config("waveform.symbols", "symbol list is empty")),
        Some(s) => s.clone(),
        None => {
            if w.num_symbols == 0 {
                return Err(Error::config("waveform.num_symbols", "symbol list is empty"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.base.master_seed);
            (0..w.num_symbols).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
        }
    };
    if w.delay < 1 {
        return Err(Error::config("waveform.delay", "delay must be at least 1 sample"));
    }
    let symbols = SymbolSequence::new(symbols)?;
    let pulse = chain.pulse_for(system)?;
    let u = shape_pulses(&symbols, &pulse);
    let m = modulate_dsbsc(&u, &chain.carrier()?)?;
    if w.segment_len > u.len() {
        return Err(Error::config(
            "waveform.segment_len",
            format!("segment of {} samples exceeds the {}-sample signal", w.segment_len, u.len()),
        ));
    }
    let spectrum = power_spectrum(&u, w.segment_len)?;
    let passband = power_spectrum(&m, w.segment_len)?;
    let embedding = delay_embedding(&u, &symbols, w.delay, chain.f_hz)?;

    let pulse_pts: Vec<_> = pulse.times().zip(pulse.samples().iter().copied()).collect();
    let u_pts: Vec<_> = u.times().zip(u.samples().iter().copied()).collect();
    write_series(out, "pulse", "t,amplitude", &format!("{} pulse", w.pulse), &pulse_pts)?;
    write_series(out, "baseband", "t,amplitude", "shaped baseband", &u_pts)?;
    write_series(out, "spectrum", "freq_hz,density", "baseband spectrum", &spectrum)?;
    write_series(out, "passband_spectrum", "freq_hz,density", "passband spectrum", &passband)?;

    let mut csv = String::from("x,y,s\n");
    for &(x, y, s) in &embedding {
        let _ = writeln!(csv, "{x:.9e},{y:.9e},{s}");
    }
    let xy: Vec<_> = embedding.iter().map(|&(x, y, _)| (x, y)).collect();
    let class: Vec<_> = embedding.iter().map(|&(_, _, s)| s).collect();
    write_atomic(&out.join("embedding.csv"), csv.as_bytes())?;
    write_atomic(&out.join("embedding.svg"), svg_plot("delay embedding", &xy, Some(&class)).as_bytes())?;
    Ok(())
}

/// Deliberate corruption for exercising the self test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    PulseEnergy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
    }
}

/// Energy of the continuous chaotic basis over its truncated support, by
/// composite Simpson integration on a grid 64 times finer than `fs`.
fn chaotic_energy_reference(params: &ChaoticBasisParams, t0: f64, t1: f64, fs: f64) -> f64 {
    let n = (((t1 - t0) * fs).round() as usize) * 64;
    let h = (t1 - t0) / n as f64;
    let f = |t: f64| eval_chaotic_basis(params, t).powi(2);
    let mut acc = f(t0) + f(t1);
    for i in 1..n {
        acc += f(t0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Analytic-limit, loopback and calibration invariants of the default chain.
pub fn selftest(fault: Option<Fault>) -> Vec<CheckResult> {
    let base = ExperimentConfig::default();
    let chain = base.chain;
    let f = chain.f_hz;
    let ts = 1.0 / f;
    let mut results = Vec::new();

    let params = ChaoticBasisParams::new(f).expect("default frequency");
    results.push(check("basis_value_at_zero", {
        let v = eval_chaotic_basis(&params, 0.0);
        Ok(((v - 0.5).abs() < 1e-12, format!("p(0) = {v}")))
    }));
    results.push(check("basis_zero_after_period", {
        let v = eval_chaotic_basis(&params, ts);
        Ok((v.abs() < 1e-12, format!("p(1/f) = {v:e}")))
    }));
    results.push(check("basis_continuity", {
        let peak = 1.0 + 0.5f64.sqrt();
        let eps = 1e-12 * ts;
        let j0 = (eval_chaotic_basis(&params, -eps) - eval_chaotic_basis(&params, eps)).abs();
        let j1 = (eval_chaotic_basis(&params, ts - eps) - eval_chaotic_basis(&params, ts + eps)).abs();
        Ok((j0.max(j1) < 1e-6 * peak, format!("jumps {j0:e}, {j1:e}")))
    }));

    let rrc = RrcParams::new(chain.gamma, ts, chain.span).expect("default rrc");
    for (name, t) in [("rrc_limit_at_zero", 0.0), ("rrc_limit_at_quarter", ts / (4.0 * chain.gamma))] {
        results.push(check(name, {
            let h = ts * 1e-5;
            let limit = 0.5 * (eval_rrc(&rrc, t - h) + eval_rrc(&rrc, t + h));
            let v = eval_rrc(&rrc, t);
            let rel = (v - limit).abs() / limit.abs();
            Ok((rel < 1e-6, format!("value {v:.9}, two-sided limit {limit:.9}")))
        }));
    }

    results.push(check("pulse_energy", (|| {
        let mut pulse = chain.chaotic_pulse()?;
        if fault == Some(Fault::PulseEnergy) {
            pulse = pulse.with_energy(pulse.energy() * 1.1)?;
        }
        let t0 = pulse.t_start();
        let reference = chaotic_energy_reference(&params, t0, ts, chain.fs_hz);
        let rel = (pulse.energy() - reference).abs() / reference;
        Ok((rel < 0.01, format!("sampled {:.6e}, integral {:.6e}", pulse.energy(), reference)))
    })()));

    results.push(check("rrc_nyquist", (|| {
        let pulse = chain.rrc_pulse()?;
        let e = pulse.energy();
        let worst = (1..=3)
            .map(|k| crate::waveforms::autocorrelation(&pulse, k as f64 * ts).abs() / e)
            .fold(0.0, f64::max);
        Ok((worst < 0.01, format!("largest ISI / energy {worst:.2e}")))
    })()));

    for (name, system, two_path) in [
        ("loopback_chaos_zero", System::ChaosZero, false),
        ("loopback_chaos_past_isi", System::ChaosPastIsi, false),
        ("loopback_chaos_past_isi_mmse", System::ChaosPastIsiMmse, false),
        ("loopback_bpsk", System::Bpsk, false),
        ("loopback_bpsk_mmse", System::BpskMmse, false),
        ("loopback_two_path_chaos_past_isi", System::ChaosPastIsi, true),
        ("loopback_two_path_bpsk_mmse", System::BpskMmse, true),
    ] {
        results.push(check(name, (|| {
            let channel = if two_path { MultipathSpec::two_path(ts) } else { MultipathSpec::single_path() };
            let cfg = ExperimentConfig { system, channel, bits_per_trial: 2000, ..base.clone() };
            let out = run_trial(&cfg, f64::INFINITY, 11)?;
            Ok((out.errors == 0, format!("{} errors in {} bits", out.errors, out.bits_counted)))
        })()));
    }

    results.push(check("tap_gain_decomposition", (|| {
        let cfg = ExperimentConfig {
            system: System::ChaosZero,
            // the passband chain adds a small double-frequency residual
            channel: MultipathSpec::two_path(ts).with_domain(ChannelDomain::Baseband),
            bits_per_trial: 200,
            ..base.clone()
        };
        let link = Link::new(&cfg)?;
        let bits = link.trial_bits(5);
        let rx = link.receive(bits_to_symbols(&bits)?, f64::INFINITY, 0)?;
        let w = cfg.window;
        let mut worst = 0.0f64;
        for n in w..bits.len() - w {
            let predicted = rx.gains.noiseless_output(rx.symbols.as_slice(), n);
            worst = worst.max((rx.decisions[n] - predicted).abs() / rx.gains.combined(0).abs());
        }
        Ok((worst < 1e-6, format!("largest relative deviation {worst:.2e}")))
    })()));

    results.push(check("snr_calibration", (|| {
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let s = SampledSignal::new(x.clone(), chain.fs_hz, 0)?;
        let var = awgn_variance(&s, 5.0);
        let noisy = add_noise(&s, var, 4);
        let noise: f64 = noisy.samples().iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
        let measured = 10.0 * (reference_power(&s) / noise).log10();
        Ok(((measured - 5.0).abs() < 0.2, format!("requested 5 dB, measured {measured:.3} dB")))
    })()));

    results.push(check("mmse_normal_equations", (|| {
        let pulse = chain.rrc_pulse()?;
        let eq = mmse_design(&MultipathSpec::two_path(ts), 1e-3, &pulse, &EqualizerConfig::default())?;
        let r = eq.normal_equation_residual();
        Ok((r < 1e-9, format!("residual {r:.2e}")))
    })()));

    results.push(check("trial_determinism", (|| {
        let cfg = ExperimentConfig { channel: MultipathSpec::two_path(ts), bits_per_trial: 1000, ..base.clone() };
        let a = run_trial(&cfg, 0.0, 99)?;
        let b = run_trial(&cfg, 0.0, 99)?;
        Ok((a == b, format!("{} and {} errors", a.errors, b.errors)))
    })()));

    results
}

pub fn selftest_report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} checks, {} failed", results.len(), failed);
    out
}

#[derive(Debug, Parser)]
#[command(name = "chaosradio", version, about = "Chaotic pulse-shaping radio link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo BER sweep; writes ber.csv and manifest.json.
    Ber(CommonArgs),
    /// Pulse, baseband, spectrum and delay-embedding exports.
    Waveform(CommonArgs),
    /// Runs the built-in invariant checks.
    Selftest {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_parser = ["fig7", "fig8"])]
    pub preset: Option<String>,
    /// Comma-separated SNR list in dB (`inf` for a noise-free run).
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long, value_parser = ["single", "two"])]
    pub paths: Option<String>,
}

/// Splits `--section.key=value` overrides from the remaining arguments.
pub fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, v)) if k.contains('.') => overrides.push((k.to_string(), v.to_string())),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

/// Builds the run configuration: preset, then config file, then flags, then
/// `--key=value` overrides.
pub fn resolve_config(args: &CommonArgs, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &args.preset {
        Some(p) => RunConfig::preset(p)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(seed) = args.seed {
        cfg.base.master_seed = seed;
    }
    if let Some(snr) = &args.snr {
        cfg.set("sim.snr_db", snr)?;
    }
    match args.paths.as_deref() {
        Some("single") => cfg.set("channel.taps", "1@0")?,
        Some("two") => cfg.set("channel.taps", "1@0,0.6@1Ts")?,
        _ => {}
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    if args.threads == 0 {
        return Err(Error::config("threads", "must be at least 1"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let (args, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Ber(a) => resolve_config(&a, &overrides).and_then(|cfg| {
            let rows = cmd_ber(&cfg, &a.out, a.threads)?;
            for r in &rows {
                eprintln!(
                    "{:<20} {:>6} dB  ber {:.3e}  [{:.3e}, {:.3e}]  {} errors / {} bits",
                    r.system.name(),
                    r.point.snr_db,
                    r.point.ber,
                    r.point.ci_low,
                    r.point.ci_high,
                    r.point.errors,
                    r.point.bits_counted
                );
            }
            Ok(EXIT_OK)
        }),
        Command::Waveform(a) => {
            resolve_config(&a, &overrides).and_then(|cfg| cmd_waveform(&cfg, &a.out)).map(|_| EXIT_OK)
        }
        Command::Selftest { inject_fault } => {
            if !overrides.is_empty() {
                eprintln!("error: selftest takes no configuration overrides");
                return EXIT_CONFIG;
            }
            let fault = match inject_fault.as_deref() {
                None => None,
                Some("pulse-energy") => Some(Fault::PulseEnergy),
                Some(other) => {
                    eprintln!("error: unknown fault {other:?}");
                    return EXIT_CONFIG;
                }
            };
            let results = selftest(fault);
            print!("{}", selftest_report(&results));
            Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_RUNTIME })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

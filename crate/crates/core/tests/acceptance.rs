//! Acceptance suite. Each criterion prints one PASS/FAIL line; the target
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p chaosradio --test acceptance`.

use std::collections::HashMap;
use std::fs;
use std::process::Command;
use std::time::Instant;

use chaosradio::channel::{apply_channel, apply_multipath, reference_power, ChannelDomain, MultipathSpec, NoiseSpec};
use chaosradio::harness::{
    ber_sweep, bpsk_awgn_ber, default_snr_grid, run_trial, BerPoint, ChainParams, ExperimentConfig, Link, System,
};
use chaosradio::rxchain::{demodulate_coherent, matched_decisions};
use chaosradio::txchain::{bits_to_symbols, modulate_dsbsc, shape_pulses, SymbolSequence};
use chaosradio::waveforms::{eval_chaotic_basis, eval_rrc, ChaoticBasisParams, PulseShape, RrcParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const BASIS_ABS_TOL: f64 = 1e-12;
const CONTINUITY_TOL: f64 = 1e-6;
const RRC_LIMIT_TOL: f64 = 1e-6;
const LOOPBACK_BITS: usize = 10_000;
const DECOMPOSITION_TOL: f64 = 1e-6;
const PATTERN_LEN: usize = 7;
const ORACLE_SIGMAS: f64 = 3.0;
const ORACLE_MIN_ERRORS: u64 = 100;
const MF_SNR_DB: f64 = 5.0;
const MF_RANDOM_FILTERS: usize = 50;
const MIN_SEPARATED_POINTS: usize = 3;
const SNR_CAL_SAMPLES: usize = 1_000_000;
const SNR_CAL_TOL_DB: f64 = 0.2;

const TS: f64 = 1.0 / 600.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn criterion_1() -> Outcome {
    let p = ChaoticBasisParams::new(600.0).unwrap();
    let peak = 1.0 + 0.5f64.sqrt();
    let v0 = eval_chaotic_basis(&p, 0.0);
    let v1 = eval_chaotic_basis(&p, TS);
    let eps = 1e-9 * TS;
    let j0 = (eval_chaotic_basis(&p, -eps) - eval_chaotic_basis(&p, eps)).abs();
    let j1 = (eval_chaotic_basis(&p, TS - eps) - eval_chaotic_basis(&p, TS + eps)).abs();
    let passed = (v0 - 0.5).abs() <= BASIS_ABS_TOL
        && v1.abs() <= BASIS_ABS_TOL
        && j0 <= CONTINUITY_TOL * peak
        && j1 <= CONTINUITY_TOL * peak;
    outcome(passed, format!("p(0)={v0}, p(1/f)={v1:.1e}, jumps {j0:.1e} and {j1:.1e}"))
}

fn criterion_2() -> Outcome {
    let gamma = 0.35;
    let params = RrcParams::new(gamma, TS, 4).unwrap();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for t in [0.0, TS / (4.0 * gamma)] {
        // symmetric difference average with one Richardson step
        let avg = |h: f64| 0.5 * (eval_rrc(&params, t - h) + eval_rrc(&params, t + h));
        let h = 1e-4 * TS;
        let limit = (4.0 * avg(h / 2.0) - avg(h)) / 3.0;
        let rel = (eval_rrc(&params, t) - limit).abs() / limit.abs();
        worst = worst.max(rel);
        detail.push(format!("t={t:.3e}: rel {rel:.1e}"));
    }
    outcome(worst <= RRC_LIMIT_TOL, detail.join(", "))
}

fn criterion_3() -> Outcome {
    let mut cases: Vec<(System, MultipathSpec)> =
        System::ALL.iter().map(|&s| (s, MultipathSpec::single_path())).collect();
    cases.push((System::ChaosPastIsi, MultipathSpec::two_path(TS)));
    cases.push((System::BpskMmse, MultipathSpec::two_path(TS)));
    let mut failures = Vec::new();
    let mut counted = u64::MAX;
    for (system, channel) in cases {
        let paths = channel.taps().len();
        let cfg = ExperimentConfig {
            system,
            channel,
            bits_per_trial: LOOPBACK_BITS + 2 * chaosradio::rxchain::DEFAULT_WINDOW,
            ..Default::default()
        };
        let out = run_trial(&cfg, f64::INFINITY, 2024).unwrap();
        counted = counted.min(out.bits_counted);
        if out.errors != 0 {
            failures.push(format!("{system}/{paths}-path: {} errors", out.errors));
        }
    }
    let passed = failures.is_empty() && counted >= LOOPBACK_BITS as u64;
    outcome(passed, if passed { format!("7 links, {counted} bits each, 0 errors") } else { failures.join("; ") })
}

fn decomposition_deviation(channel: MultipathSpec) -> f64 {
    let cfg = ExperimentConfig { system: System::ChaosZero, channel, ..Default::default() };
    let link = Link::new(&cfg).unwrap();
    let mut worst = 0.0f64;
    for code in 0..1u32 << PATTERN_LEN {
        let s: Vec<i8> = (0..PATTERN_LEN).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect();
        let rx = link.receive(SymbolSequence::new(s.clone()).unwrap(), f64::INFINITY, 0).unwrap();
        let p = rx.gains.aggregate_power();
        for n in 0..PATTERN_LEN {
            let predicted = rx.gains.noiseless_output(&s, n);
            worst = worst.max((rx.decisions[n] - predicted).abs() / p);
        }
    }
    worst
}

fn criterion_4() -> Outcome {
    let single = decomposition_deviation(MultipathSpec::single_path().with_domain(ChannelDomain::Baseband));
    let two = decomposition_deviation(MultipathSpec::two_path(TS).with_domain(ChannelDomain::Baseband));
    let passband = decomposition_deviation(MultipathSpec::two_path(TS));
    outcome(
        single.max(two) <= DECOMPOSITION_TOL,
        format!(
            "all {} patterns; max deviation / P: single {single:.1e}, two-path {two:.1e} \
             (passband chain, not gated: {passband:.1e})",
            1 << PATTERN_LEN
        ),
    )
}

fn criterion_5() -> Outcome {
    let chain = ChainParams::default();
    let ebn0: Vec<f64> = (0..=5).map(|i| 2.0 * i as f64).collect();
    let cfg = ExperimentConfig {
        system: System::Bpsk,
        snr_grid: ebn0.iter().map(|&e| chain.snr_db_for_ebn0(e)).collect(),
        target_errors: ORACLE_MIN_ERRORS,
        max_bits: 200_000_000,
        master_seed: 5,
        ..Default::default()
    };
    let pts = ber_sweep(&cfg).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for (p, e) in pts.iter().zip(&ebn0) {
        let theory = bpsk_awgn_ber(*e);
        let band = ORACLE_SIGMAS * (theory * (1.0 - theory) / p.bits_counted as f64).sqrt();
        let ok = (p.ber - theory).abs() <= band && p.errors >= ORACLE_MIN_ERRORS;
        passed &= ok;
        detail.push(format!("{e}dB {:.2e}/{:.2e}{}", p.ber, theory, if ok { "" } else { "!" }));
    }
    outcome(passed, detail.join(", "))
}

/// Decision-point SNR `mean^2 / var` of `s_n z_n`.
fn decision_snr(z: &[f64], s: &[i8]) -> f64 {
    let v: Vec<f64> = z.iter().zip(s).map(|(a, &b)| a * b as f64).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    mean * mean / var
}

fn criterion_6() -> Outcome {
    let chain = ChainParams::default();
    let pulse = chain.chaotic_pulse().unwrap();
    let carrier = chain.carrier().unwrap();
    let n = 4000;
    let w = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    let s = bits_to_symbols(&bits).unwrap();
    let m = modulate_dsbsc(&shape_pulses(&s, &pulse), &carrier).unwrap();
    let rx = apply_channel(&m, &MultipathSpec::single_path(), &NoiseSpec::new(MF_SNR_DB, 7).unwrap()).unwrap();
    let d = demodulate_coherent(&rx, &carrier);
    let counted = &s.as_slice()[w..n - w];

    let snr_of = |filter: &PulseShape, offset: i64| {
        let z = matched_decisions(&d, filter, n, offset).unwrap();
        decision_snr(&z[w..n - w], counted)
    };
    let matched = snr_of(&pulse, 0);
    let sps = chain.samples_per_symbol().unwrap() as i64;
    let mut best_random = 0.0f64;
    for _ in 0..MF_RANDOM_FILTERS {
        let taps: Vec<f64> = (0..pulse.len()).map(|_| rng.sample(StandardNormal)).collect();
        let probe = PulseShape::new(taps, pulse.sample_rate(), pulse.symbol_rate(), pulse.start_index())
            .unwrap()
            .with_energy(pulse.energy())
            .unwrap();
        // each probe gets its best sampling instant
        let snr = (0..sps).map(|k| snr_of(&probe, k)).fold(0.0, f64::max);
        best_random = best_random.max(snr);
    }
    outcome(
        matched > best_random,
        format!(
            "matched {:.1} dB, best of {MF_RANDOM_FILTERS} random {:.1} dB",
            10.0 * matched.log10(),
            10.0 * best_random.log10()
        ),
    )
}

fn separated_below(a: &BerPoint, b: &BerPoint) -> bool {
    a.ci_high < b.ci_low
}

fn criterion_7() -> Outcome {
    let base = ExperimentConfig {
        snr_grid: default_snr_grid(),
        target_errors: 400,
        max_bits: 20_000_000,
        master_seed: 7,
        ..Default::default()
    };
    let sweep = |system| ber_sweep(&base.with_system(system)).unwrap();
    let zero = sweep(System::ChaosZero);
    let past = sweep(System::ChaosPastIsi);
    let bpsk = sweep(System::Bpsk);
    let all_le = past.iter().zip(&zero).all(|(p, z)| p.ber <= z.ber);
    let separated = past.iter().zip(&zero).filter(|(p, z)| separated_below(p, z)).count();
    let bpsk_better = bpsk.iter().zip(&past).filter(|(b, p)| b.ber <= p.ber).count();
    let curve = |pts: &[BerPoint]| pts.iter().map(|p| format!("{:.1e}", p.ber)).collect::<Vec<_>>().join(" ");
    outcome(
        all_le && separated >= MIN_SEPARATED_POINTS && bpsk_better >= MIN_SEPARATED_POINTS,
        format!(
            "past<=zero at all points: {all_le}, CI-separated at {separated}, bpsk<=past at {bpsk_better}; \
             zero [{}] past [{}] bpsk [{}]",
            curve(&zero),
            curve(&past),
            curve(&bpsk)
        ),
    )
}

fn run_fig8(threads: &str) -> Result<Vec<u8>, String> {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chaosradio"))
        .args(["ber", "--preset", "fig8", "--threads", threads, "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(fs::read(dir.path().join("ber.csv")).unwrap())
}

fn parse_csv(bytes: &[u8]) -> HashMap<String, Vec<BerPoint>> {
    let mut map: HashMap<String, Vec<BerPoint>> = HashMap::new();
    for line in String::from_utf8_lossy(bytes).lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().unwrap();
        map.entry(f[0].to_string()).or_default().push(BerPoint {
            snr_db: num(1),
            ebn0_db: 0.0,
            bits_counted: f[2].parse().unwrap(),
            errors: f[3].parse().unwrap(),
            ber: num(4),
            ci_low: num(5),
            ci_high: num(6),
            trials: 0,
            elapsed_seconds: 0.0,
        });
    }
    map
}

fn criterion_8(csv: &[u8]) -> Outcome {
    let m = parse_csv(csv);
    let get = |s: &str| m.get(s).cloned().unwrap_or_default();
    let (zero, past, bpsk, mmse) = (get("chaos_zero"), get("chaos_past_isi"), get("bpsk"), get("bpsk_mmse"));
    if past.is_empty() || mmse.is_empty() || bpsk.is_empty() || zero.is_empty() {
        return outcome(false, "missing systems in fig8 output");
    }
    let upper = past.len() / 2;
    let chaos_beats_mmse = past[upper..].iter().zip(&mmse[upper..]).all(|(p, q)| separated_below(p, q));
    let eq_helps = mmse.iter().zip(&bpsk).filter(|(q, b)| separated_below(q, b)).count();
    let past_helps = past.iter().zip(&zero).filter(|(p, z)| separated_below(p, z)).count();
    let upper_detail: Vec<String> = past[upper..]
        .iter()
        .zip(&mmse[upper..])
        .map(|(p, q)| format!("{}dB {:.1e}<{:.1e}", p.snr_db, p.ber, q.ber))
        .collect();
    outcome(
        chaos_beats_mmse && eq_helps >= MIN_SEPARATED_POINTS && past_helps >= MIN_SEPARATED_POINTS,
        format!(
            "chaos_past_isi vs bpsk_mmse separated on upper half: {chaos_beats_mmse} [{}]; \
             bpsk_mmse<bpsk at {eq_helps}, past<zero at {past_helps}",
            upper_detail.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let chain = ChainParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sps = chain.samples_per_symbol().unwrap();
    let bits: Vec<u8> = (0..SNR_CAL_SAMPLES / sps).map(|_| rng.gen_range(0..=1)).collect();
    let s = bits_to_symbols(&bits).unwrap();
    let m = modulate_dsbsc(&shape_pulses(&s, &chain.chaotic_pulse().unwrap()), &chain.carrier().unwrap()).unwrap();
    let spec = MultipathSpec::two_path(TS);
    let faded = apply_multipath(&m, &spec).unwrap();
    let signal_power = reference_power(&faded);
    let mut worst = 0.0f64;
    for snr_db in [-6.0, 0.0, 4.0, 10.0] {
        let rx = apply_channel(&m, &spec, &NoiseSpec::new(snr_db, 11).unwrap()).unwrap();
        let noise: Vec<f64> = rx.samples().iter().zip(faded.samples()).map(|(a, b)| a - b).collect();
        let noise_power = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        worst = worst.max((10.0 * (signal_power / noise_power).log10() - snr_db).abs());
    }
    outcome(worst <= SNR_CAL_TOL_DB, format!("{} samples, worst deviation {worst:.3} dB", faded.len()))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {id:>2} {} {name}: {} [{secs:.1}s]", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o, secs));
    };
    timed(1, "chaotic basis analytic values", &criterion_1);
    timed(2, "RRC removable singularities", &criterion_2);
    timed(3, "noise-free loopback", &criterion_3);
    timed(4, "tap-gain decomposition", &criterion_4);
    timed(5, "BPSK AWGN oracle", &criterion_5);
    timed(6, "matched-filter optimality", &criterion_6);
    timed(7, "single-path ordering", &criterion_7);

    let t = Instant::now();
    let first = run_fig8("1");
    let second = run_fig8("4");
    let fig8_secs = t.elapsed().as_secs_f64();
    timed(8, "two-path ordering", &|| match &first {
        Ok(csv) => criterion_8(csv),
        Err(e) => outcome(false, format!("fig8 run failed: {e}")),
    });
    timed(9, "reproducibility across thread counts", &|| match (&first, &second) {
        (Ok(a), Ok(b)) => outcome(
            a == b,
            format!("fig8 CSV {} bytes, identical at 1 and 4 threads: {} ({fig8_secs:.0}s for both runs)", a.len(), a == b),
        ),
        _ => outcome(false, "fig8 run failed"),
    });
    timed(10, "SNR calibration", &criterion_10);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaosradio")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: [&str; 3] = ["--sim.snr_db=-4", "--sim.target_errors=30", "--sim.bits_per_trial=500"];

fn ber(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["ber", "--out", out.to_str().unwrap()];
    args.extend_from_slice(&QUICK);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn missing_config_is_a_config_error_without_outputs() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["ber", "--config", "/no/such/file.cfg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn bad_override_names_the_key() {
    let dir = tempdir().unwrap();
    let o = ber(dir.path(), &["--chain.fc_hz=5000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("chain.fc_hz"), "{}", stderr(&o));
    let o = ber(dir.path(), &["--sim.bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sim.bogus"));
    assert!(!dir.path().join("ber.csv").exists());
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = ber(&file.join("sub"), &["--sim.systems=bpsk"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn noise_free_loopback_rows_have_no_errors() {
    let dir = tempdir().unwrap();
    let o = run(&[
        "ber",
        "--snr",
        "inf",
        "--paths",
        "single",
        "--out",
        dir.path().to_str().unwrap(),
        "--sim.max_bits=20000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("ber.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("system,snr_db,bits,errors,ber,ci_low,ci_high,seed"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r[1], "inf");
        assert_eq!(r[3], "0");
    }
}

#[test]
fn equal_seeds_give_identical_csv() {
    let (a, b, c) = (tempdir().unwrap(), tempdir().unwrap(), tempdir().unwrap());
    assert!(ber(a.path(), &["--seed", "9", "--preset", "fig8"]).status.success());
    assert!(ber(b.path(), &["--seed", "9", "--preset", "fig8", "--threads", "3"]).status.success());
    assert!(ber(c.path(), &["--seed", "10", "--preset", "fig8"]).status.success());
    let read = |d: &Path| fs::read(d.join("ber.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn manifest_reproduces_the_run() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    assert!(ber(a.path(), &["--preset", "fig8", "--seed", "4", "--sim.systems=chaos_past_isi,bpsk_mmse"])
        .status
        .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 4);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["points"].as_array().unwrap().len(), 2);
    let text: String = manifest["config"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| format!("{k}={}\n", v.as_str().unwrap()))
        .collect();
    let cfg = b.path().join("echo.cfg");
    fs::write(&cfg, text).unwrap();
    let o = run(&["ber", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.path().join("ber.csv")).unwrap(), fs::read(b.path().join("ber.csv")).unwrap());
}

#[test]
fn waveform_exports() {
    let dir = tempdir().unwrap();
    let o = run(&["waveform", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (stem, header) in [
        ("pulse", "t,amplitude"),
        ("baseband", "t,amplitude"),
        ("spectrum", "freq_hz,density"),
        ("passband_spectrum", "freq_hz,density"),
        ("embedding", "x,y,s"),
    ] {
        let csv = fs::read_to_string(dir.path().join(format!("{stem}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(header));
        assert!(csv.lines().count() > 10);
        let svg = fs::read_to_string(dir.path().join(format!("{stem}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
    // the chaotic basis is 0.5 at t = 0 and peaks near 1 + 1/sqrt(2)
    let pulse = fs::read_to_string(dir.path().join("pulse.csv")).unwrap();
    let rows: Vec<(f64, f64)> = pulse
        .lines()
        .skip(1)
        .map(|l| {
            let (t, a) = l.split_once(',').unwrap();
            (t.parse().unwrap(), a.parse().unwrap())
        })
        .collect();
    let at_zero = rows.iter().find(|r| r.0 == 0.0).unwrap().1;
    assert!((at_zero - 0.5).abs() < 1e-9);
    let peak = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    assert!((peak - (1.0 + 0.5f64.sqrt())).abs() < 0.01);

    let rrc = tempdir().unwrap();
    let o = run(&["waveform", "--out", rrc.path().to_str().unwrap(), "--waveform.pulse=rrc"]);
    assert!(o.status.success());
    let amps: Vec<f64> = fs::read_to_string(rrc.path().join("pulse.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    let n = amps.len();
    assert!((0..n).all(|i| (amps[i] - amps[n - 1 - i]).abs() < 1e-9));
}

#[test]
fn empty_symbol_list_is_rejected() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("w");
    let o = run(&["waveform", "--out", out.to_str().unwrap(), "--waveform.symbols="]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("waveform.symbols"));
    assert!(!out.exists());
}

#[test]
fn selftest_passes_and_reports_injected_faults() {
    let o = run(&["selftest"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 10);

    let o = run(&["selftest", "--inject-fault", "pulse-energy"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_ne!(o.status.code(), Some(0));
    assert!(text.lines().any(|l| l.starts_with("FAIL pulse_energy")), "{text}");
}

use statrs::function::erf::erfc;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Analytic BPSK error rate over AWGN at the given `Eb/N0` in dB.
pub fn bpsk_awgn_ber(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `point`, a pure function of the
/// indices so that scheduling cannot change results.
pub fn trial_seed(master_seed: u64, point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ point) ^ trial.rotate_left(32))
}

/// Independent stream derived from a trial seed (e.g. the channel noise).
pub fn substream(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0xA5A5_A5A5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (e, n) in [(0, 10), (1, 10), (5, 10), (10, 10), (100, 1_000_000)] {
            let (lo, hi) = wilson_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{e}/{n}: {lo} {hi}");
        }
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(50, 100);
        // textbook value for 50/100
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        let q1 = q_function(1.0);
        assert!((q1 - 0.158_655_253_931_457).abs() < 1e-9, "{q1:e}");
        assert!((bpsk_awgn_ber(0.0) - 0.078_649_603_525_143_2).abs() < 1e-9);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seed(7, 0, 0);
        assert_eq!(a, trial_seed(7, 0, 0));
        assert_ne!(a, trial_seed(7, 0, 1));
        assert_ne!(a, trial_seed(7, 1, 0));
        assert_ne!(a, trial_seed(8, 0, 0));
        assert_ne!(substream(a, 0), substream(a, 1));
    }
}

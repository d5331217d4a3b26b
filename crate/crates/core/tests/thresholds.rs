use proptest::prelude::*;
use shelterq::desim::{ArrivalMix, ScenarioConfig};
use shelterq::erlang::{erlang_a_metrics, SystemParams};
use shelterq::population::ClassMix;
use shelterq::staffing::WaitCap;
use shelterq::thresholds::{
    calibrate_thresholds_by_simulation, class_delay_profile, cumulative_loads, thresholds_for_wait_caps,
    CalibrationCaps, DegeneracyHandling, ThresholdPolicy,
};

/// Straight transcription of the recursion for non-degenerate loads.
fn oracle(rates: &[f64], n: u32, mu: f64, caps: &[WaitCap], p_wait_lowest: f64) -> Vec<u32> {
    let cap = n as f64 * mu;
    let sigma: Vec<f64> = rates.iter().scan(0.0, |s, r| {
        *s += r / cap;
        Some(*s)
    }).collect();
    let mut k = vec![0u32; rates.len()];
    let mut pw = p_wait_lowest;
    for j in (0..rates.len() - 1).rev() {
        let omega = 1.0 / (cap * (1.0 - sigma[j + 1]) * (1.0 - sigma[j]));
        let raw = (caps[j].fraction * caps[j].horizon / (pw * omega)).ln() / sigma[j].ln();
        let d = if raw <= 0.0 { 0 } else { (raw - 1e-9 * raw).ceil() as u32 };
        k[j] = d; // increment for now
        pw *= sigma[j].powi(d as i32);
    }
    let mut out = vec![0u32; rates.len()];
    for j in 1..rates.len() {
        out[j] = out[j - 1] + k[j - 1];
    }
    out
}

fn scenario() -> impl Strategy<Value = (Vec<f64>, u32, Vec<WaitCap>)> {
    (2usize..=6, 5u32..200, 0.3f64..0.93).prop_flat_map(|(classes, n, total)| {
        (
            prop::collection::vec(0.05f64..1.0, classes),
            Just(n),
            Just(total),
            prop::collection::vec((0.005f64..0.3, 0.05f64..3.0), classes - 1),
        )
            .prop_map(|(weights, n, total, caps)| {
                let sum: f64 = weights.iter().sum();
                let rates = weights.iter().map(|w| w / sum * total * n as f64).collect();
                let caps = caps.into_iter().map(|(fraction, horizon)| WaitCap { fraction, horizon }).collect();
                (rates, n, caps)
            })
    })
}

#[test]
fn shelter_qed_baseline_is_flagged() {
    let rates = [0.888, 1.0656, 0.7459, 0.2350, 0.9573, 0.5483];
    let loads = cumulative_loads(&rates, 270, 0.016).unwrap();
    assert!((loads.sigma[5] - 4.44 / 4.32).abs() < 1e-3);
    assert!(loads.any_degenerate());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recursion_matches_transcription((rates, n, caps) in scenario(), pw in 0.01f64..1.0) {
        let loads = cumulative_loads(&rates, n, 1.0).unwrap();
        prop_assume!(!loads.any_degenerate());
        let got = thresholds_for_wait_caps(&loads, &caps, pw, DegeneracyHandling::Fail).unwrap();
        prop_assert_eq!(got.policy.thresholds(), &oracle(&rates, n, 1.0, &caps, pw)[..]);
        prop_assert!(!got.analytically_degenerate);
    }

    #[test]
    fn policy_shape_and_profile_order((rates, n, caps) in scenario(), pw in 0.0f64..1.0) {
        let loads = cumulative_loads(&rates, n, 1.0).unwrap();
        let got = thresholds_for_wait_caps(&loads, &caps, pw, DegeneracyHandling::Clamp).unwrap();
        let k = got.policy.thresholds();
        prop_assert_eq!(k[0], 0);
        prop_assert!(k.windows(2).all(|w| w[0] <= w[1]));
        let p = &got.profile.p_wait_by_class;
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        let again = class_delay_profile(&got.policy, &loads, pw, DegeneracyHandling::Clamp).unwrap();
        prop_assert_eq!(&again, &got.profile);
    }

    #[test]
    fn scale_invariant((rates, n, caps) in scenario(), factor in 0.01f64..100.0, theta in 0.1f64..3.0) {
        // rescaling every rate is a change of time unit, so the day-valued
        // horizons rescale with it
        let mu = 0.5;
        let total: f64 = rates.iter().sum();
        let base = SystemParams::new(total * mu, mu, theta).unwrap();
        let scaled = base.scaled(factor);
        let scaled_caps: Vec<WaitCap> =
            caps.iter().map(|c| WaitCap { fraction: c.fraction, horizon: c.horizon / factor }).collect();
        let run = |p: &SystemParams, caps: &[WaitCap]| {
            let r: Vec<f64> = rates.iter().map(|r| r * p.mu).collect();
            let loads = cumulative_loads(&r, n, p.mu).unwrap();
            let pw = erlang_a_metrics(n, p).unwrap().p_wait;
            (loads.sigma.clone(), pw, thresholds_for_wait_caps(&loads, caps, pw, DegeneracyHandling::Clamp).unwrap())
        };
        let (s1, pw1, t1) = run(&base, &caps);
        let (s2, pw2, t2) = run(&scaled, &scaled_caps);
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((pw1 - pw2).abs() < 1e-9);
        prop_assert_eq!(t1.policy, t2.policy);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn calibration_tracks_the_recursion(
        n in 10u32..=50,
        s1 in 0.25f64..0.45,
        s2 in 0.7f64..0.88,
        theta in 0.5f64..2.0,
        x in 0.01f64..0.05,
        t in 0.05f64..0.25,
    ) {
        let rates = [s1 * n as f64, (s2 - s1) * n as f64];
        let p = SystemParams::new(s2 * n as f64, 1.0, theta).unwrap();
        let loads = cumulative_loads(&rates, n, 1.0).unwrap();
        let pw = erlang_a_metrics(n, &p).unwrap().p_wait;
        let caps = [WaitCap { fraction: x, horizon: t }];
        let analytic = thresholds_for_wait_caps(&loads, &caps, pw, DegeneracyHandling::Fail).unwrap();

        let mut config = ScenarioConfig::shelter(p, n);
        config.mix = ArrivalMix::Classes(ClassMix::from_rates(vec!["hi".into(), "lo".into()], rates.to_vec()).unwrap());
        config.policy = ThresholdPolicy::zeros(2);
        config.horizon_days = 200.0;
        config.warmup_days = 20.0;
        let calibrated =
            calibrate_thresholds_by_simulation(&config, &CalibrationCaps::LongWait(caps.to_vec()), n, 40, 3).unwrap();
        let (a, c) = (analytic.policy.max_threshold() as i64, calibrated.policy.max_threshold() as i64);
        prop_assert!((a - c).abs() <= 10, "analytic {} calibrated {}", a, c);
    }
}

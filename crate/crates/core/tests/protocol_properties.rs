use diqkd::analysis::compute_opt;
use diqkd::devices::DeviceKind;
use diqkd::protocol::{
    disclosed_bits, recompute_eta_observed, run_protocol_a, run_protocol_b, AbortReason, Message, Party, ProtocolParams,
    PublicMessage, SessionResult,
};
use diqkd::rng::stream;
use proptest::prelude::*;

/// Re-derives the abort decision from the public log alone.
fn audit(messages: &[Message], params: &ProtocolParams) -> Option<AbortReason> {
    if recompute_eta_observed(messages).unwrap() > params.eta && params.enforce_bell_test {
        return Some(AbortReason::BellTest);
    }
    let mut reveals = messages.iter().filter_map(|m| match m.decode().unwrap() {
        PublicMessage::InputReveal(v) => Some((m.from, v)),
        _ => None,
    });
    let (Some((Party::A, x)), Some((Party::B, y))) = (reveals.next(), reveals.next()) else {
        panic!("inputs not revealed by both parties in order");
    };
    let c = x.iter().zip(&y).filter(|&(&x, &y)| x == 2 && y == 1).count() as f64;
    let m = params.m as f64;
    if (c - m / 6.0).abs() > 10.0 * m.sqrt() {
        return Some(AbortReason::CheckCount);
    }
    let verdict = messages.iter().find_map(|msg| match msg.decode().unwrap() {
        PublicMessage::ReconVerdict(ok) => Some(ok),
        _ => None,
    });
    (verdict == Some(false)).then_some(AbortReason::ReconFail)
}

fn device_strategy() -> impl Strategy<Value = DeviceKind> {
    prop_oneof![
        (0.0..0.08f64).prop_map(|noise| DeviceKind::Honest { noise }),
        (any::<[bool; 3]>(), any::<[bool; 2]>()).prop_map(|(alice, bob)| DeviceKind::Deterministic { alice, bob }),
        any::<[u8; 4]>().prop_map(|t| DeviceKind::Memory { tape: t.to_vec() }),
        (prop::collection::vec(any::<bool>(), 1..6), 0.0..0.1f64)
            .prop_map(|(secret, flip_rate)| DeviceKind::Covert { secret, flip_rate, tape: b"t".to_vec() }),
    ]
}

fn run(device: &DeviceKind, params: &ProtocolParams, seed: u64) -> SessionResult {
    let mut rng = stream(seed, 0);
    let mut pair = device.build(&mut rng).unwrap();
    run_protocol_a(&mut pair, None, params, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn transcript_is_self_consistent(
        device in device_strategy(),
        m in 2000usize..6000,
        bell_frac in 0.1..0.35f64,
        eta in 0.005..0.06f64,
        enforce in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let params = ProtocolParams { m, eta, enforce_bell_test: enforce, ..ProtocolParams::default() }
            .with_bell_size((bell_frac * m as f64) as usize);
        let r = run(&device, &params, seed);

        prop_assert_eq!(recompute_eta_observed(&r.messages).unwrap().to_bits(), r.eta_observed.to_bits());
        prop_assert_eq!(audit(&r.messages, &params), r.abort);
        prop_assert_eq!(r.bell_set.len(), params.bell_size());
        prop_assert!(r.bell_set.windows(2).all(|w| w[0] < w[1]));

        if r.abort != Some(AbortReason::BellTest) {
            let c: Vec<usize> = (0..m).filter(|&i| r.x[i] == 2 && r.y[i] == 1).collect();
            prop_assert_eq!(&r.check_set, &c);
            let expected: Vec<usize> = c.into_iter().filter(|i| !r.bell_set.contains(i)).collect();
            prop_assert_eq!(r.raw_key_positions(), expected);
        }
        prop_assert_eq!(r.leakage_bits, disclosed_bits(&r.messages, Party::B).unwrap());
        if !r.aborted() {
            prop_assert_eq!(&r.alice_key, &r.bob_key);
        } else {
            prop_assert!(r.alice_key.is_empty() && r.bob_key.is_empty());
        }

        // Outputs only ever appear in the Bell announcements, and only on B.
        let mut announced = 0;
        for msg in &r.messages {
            if let PublicMessage::BellAnnouncement { inputs, outputs } = msg.decode().unwrap() {
                let (own_in, own_out): (Vec<u8>, Vec<bool>) = match msg.from {
                    Party::A => r.bell_set.iter().map(|&i| (r.x[i], r.a[i])).unzip(),
                    Party::B => r.bell_set.iter().map(|&i| (r.y[i], r.b[i])).unzip(),
                };
                prop_assert_eq!(inputs, own_in);
                prop_assert_eq!(outputs, own_out);
                announced += 1;
            }
        }
        prop_assert_eq!(announced, 2);
        prop_assert_eq!(SessionResult::from_json(&r.to_json().unwrap()).unwrap(), r);
    }
}

#[test]
fn check_set_size_is_centred_on_m_over_six() {
    let (m, sessions) = (6000usize, 400u64);
    let params = ProtocolParams { m, enforce_bell_test: false, ..ProtocolParams::default() }.with_bell_size(600);
    let total: usize = (0..sessions).map(|s| run(&DeviceKind::Honest { noise: 0.0 }, &params, 7000 + s).check_set.len()).sum();
    let mean = total as f64 / sessions as f64;
    let tol = 3.0 * (m as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt() / (sessions as f64).sqrt();
    assert!((mean - m as f64 / 6.0).abs() <= tol, "mean |C| = {mean}, tolerance {tol}");
}

/// Honest abort probability against the normal approximation P(Z > η/σ), σ² = opt(1−opt)/|B|.
#[test]
fn honest_bell_abort_rate_follows_bell_set_size() {
    let opt = compute_opt();
    let sessions = 300u64;
    for (bell, seed) in [(4000usize, 1u64), (20_000, 2)] {
        let params = ProtocolParams { m: 60_000, ..ProtocolParams::default() }.with_bell_size(bell);
        let aborts = (0..sessions)
            .filter(|&s| {
                let mut rng = stream(seed, s);
                let mut pair = DeviceKind::Honest { noise: 0.0 }.build(&mut rng).unwrap();
                run_protocol_b(&mut pair, &params, &mut rng).unwrap().aborted()
            })
            .count();
        let z = params.eta / (opt * (1.0 - opt) / bell as f64).sqrt();
        let expected = 0.5 * erfc(z / std::f64::consts::SQRT_2);
        let rate = aborts as f64 / sessions as f64;
        let sigma = (expected * (1.0 - expected) / sessions as f64).sqrt();
        assert!((rate - expected).abs() <= 3.0 * sigma + 1.0 / sessions as f64, "|B| = {bell}: {rate} vs {expected}");
    }
}

/// Complementary error function, Abramowitz–Stegun 7.1.26 (|error| < 1.5e-7).
fn erfc(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    poly * (-x * x).exp()
}

#[test]
fn single_round_session_does_not_crash() {
    let params = ProtocolParams { m: 1, ..ProtocolParams::default() }.with_bell_size(1);
    for device in [DeviceKind::Honest { noise: 0.0 }, DeviceKind::best_deterministic()] {
        let r = run(&device, &params, 3);
        assert_eq!(r.bell_set, vec![0]);
        assert!(r.eta_observed == compute_opt() - 1.0 || r.eta_observed == compute_opt());
    }
}

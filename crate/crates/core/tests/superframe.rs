mod common;

use common::*;
use mbprecode::channel::{random_coupled_channel, ChannelMatrix};
use mbprecode::precoding::{mmse, mmse_pac, optl, zero_forcing, OptlParams, PacParams, PrecodingMatrix};
use mbprecode::seed::{derive_seed, rng_from_seed};
use mbprecode::superframe::{
    add_awgn, build_superframe, detect_sosf, estimate_channel_via_pilots, estimate_csi, measure_ser, pilot_matrix,
    sosf_sequence, transmit, Constellation, SuperframeConfig, SymbolStreams,
};
use mbprecode::{CMatrix, Complex64};
use proptest::prelude::*;
use rand::Rng;

fn small_config(constellation: Constellation) -> SuperframeConfig {
    SuperframeConfig {
        sosf_length: 64,
        pilot_length: 8,
        payload_length: 200,
        constellation,
    }
}

#[test]
fn noiseless_pilots_recover_channel_and_precoders() {
    let h = random_coupled_channel(4, 4, 0.6, 77).unwrap();
    let cfg = small_config(Constellation::Qpsk);
    let (_, s) = cfg.constellation.random_symbols(4, cfg.payload_length, 1);
    let w_any = mmse(&h, 0.5).unwrap();
    let tx = build_superframe(&s, &w_any, &cfg).unwrap();
    let rx = transmit(&h, &tx, 0.0, 0).unwrap();
    let h_hat = estimate_csi(&rx.pilot_field(), &pilot_matrix(4, cfg.pilot_length).unwrap()).unwrap();
    assert!(max_diff(h_hat.matrix(), h.matrix()) < 1e-12);

    let pairs = [
        (zero_forcing(&h).unwrap(), zero_forcing(&h_hat).unwrap()),
        (mmse(&h, 0.1).unwrap(), mmse(&h_hat, 0.1).unwrap()),
    ];
    for (a, b) in &pairs {
        assert!(max_diff(a.matrix(), b.matrix()) < 1e-12);
    }
    let pac = |x: &ChannelMatrix| mmse_pac(x, &PacParams::default()).unwrap().precoder;
    let hs = ChannelMatrix::new(h.matrix() * c(0.5, 0.0)).unwrap();
    let hs_hat = ChannelMatrix::new(h_hat.matrix() * c(0.5, 0.0)).unwrap();
    assert!(max_diff(pac(&hs).matrix(), pac(&hs_hat).matrix()) < 1e-12);
    let params = OptlParams::with_targets(vec![2.0; 4]);
    let (a, _) = optl(&h, 0.1, &params).unwrap();
    let (b, _) = optl(&h_hat, 0.1, &params).unwrap();
    assert!(max_diff(a.matrix(), b.matrix()) < 1e-12);
}

#[test]
fn scaled_pilot_loop_is_exact_without_noise() {
    let h = random_coupled_channel(3, 4, 0.6, 5).unwrap();
    let est = estimate_channel_via_pilots(&h, 4, 2.8, 0.0, 0).unwrap();
    assert!(max_diff(est.matrix(), h.matrix()) < 1e-12);
}

#[test]
fn frame_layout_and_reference_fields() {
    let h = random_coupled_channel(4, 4, 0.6, 8).unwrap();
    let cfg = small_config(Constellation::Psk8);
    let (_, s) = cfg.constellation.random_symbols(4, cfg.payload_length, 2);
    let a = build_superframe(&s, &PrecodingMatrix::new(CMatrix::identity(4, 4)).unwrap(), &cfg).unwrap();
    let b = build_superframe(&s, &zero_forcing(&h).unwrap(), &cfg).unwrap();
    assert_eq!(a.len(), cfg.total_length());
    assert!(max_diff(&a.payload_field(), &s) == 0.0);
    // Only the payload depends on W.
    assert_eq!(a.field(&a.sosf), b.field(&b.sosf));
    assert_eq!(a.pilot_field(), b.pilot_field());
    let hadamard = mbprecode::superframe::walsh_hadamard(cfg.pilot_length).unwrap();
    for n in 0..4 {
        for t in 0..cfg.pilot_length {
            assert_eq!(a.pilot_field()[(n, t)], c(hadamard[(n, t)], 0.0));
        }
    }
}

#[test]
fn zf_payload_is_error_free_without_noise() {
    let h = random_coupled_channel(4, 4, 0.6, 9).unwrap();
    for constellation in [Constellation::Qpsk, Constellation::Psk8, Constellation::Apsk16] {
        let cfg = small_config(constellation);
        let (_, s) = constellation.random_symbols(4, cfg.payload_length, 3);
        let tx = build_superframe(&s, &zero_forcing(&h).unwrap(), &cfg).unwrap();
        let rx = transmit(&h, &tx, 0.0, 0).unwrap();
        let rep = measure_ser(&rx.payload_field(), &s, constellation).unwrap();
        assert!(rep.ser.iter().all(|x| *x == 0.0));
        assert!(rep.ber.iter().all(|x| *x == 0.0));
        assert!(rep.evm.iter().all(|x| *x < 1e-12));
    }
}

#[test]
fn transmit_noise_variance_matches() {
    let streams = SymbolStreams {
        samples: CMatrix::zeros(1, 100_000),
        sosf: 0..0,
        pilots: 0..0,
        payload: 0..100_000,
    };
    let rx = transmit(&ChannelMatrix::identity(1), &streams, 0.3, 4).unwrap();
    let var = rx.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / 100_000.0;
    assert!((var / 0.3 - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn transmit_rejects_mismatched_channel() {
    let cfg = small_config(Constellation::Qpsk);
    let (_, s) = cfg.constellation.random_symbols(3, cfg.payload_length, 1);
    let tx = build_superframe(&s, &PrecodingMatrix::new(CMatrix::identity(3, 3)).unwrap(), &cfg).unwrap();
    assert!(transmit(&ChannelMatrix::identity(4), &tx, 0.0, 0).is_err());
}

fn embed(sosf: &[f64], offset: usize, total: usize) -> Vec<Complex64> {
    let mut rx = vec![c(0.0, 0.0); total];
    for (t, chip) in sosf.iter().enumerate() {
        rx[offset + t] = c(*chip, 0.0);
    }
    rx
}

#[test]
fn sosf_noiseless_detection_at_zero_offset() {
    let sosf = sosf_sequence(256).unwrap();
    assert_eq!(detect_sosf(&embed(&sosf, 0, 300), &sosf).unwrap(), 0);
}

#[test]
fn sosf_detection_rate_at_zero_db() {
    let sosf = sosf_sequence(256).unwrap();
    let mut hits = 0;
    for trial in 0..1000 {
        let mut rx = CMatrix::from_row_slice(1, 320, &embed(&sosf, 17, 320));
        add_awgn(&mut rx, 1.0, derive_seed(31, trial));
        if detect_sosf(rx.as_slice(), &sosf).unwrap() == 17 {
            hits += 1;
        }
    }
    assert!(hits >= 990, "{hits}/1000");
}

#[test]
fn sosf_detection_under_equal_power_interference() {
    let sosf = sosf_sequence(256).unwrap();
    let mut hits = 0;
    for trial in 0..1000 {
        let mut rng = rng_from_seed(derive_seed(32, trial));
        let mut rx = embed(&sosf, 17, 320);
        for z in rx.iter_mut() {
            *z += c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0);
        }
        if detect_sosf(&rx, &sosf).unwrap() == 17 {
            hits += 1;
        }
    }
    assert!(hits >= 950, "{hits}/1000");
}

#[test]
fn qpsk_bit_error_rate_follows_q_function() {
    let n = 1_000_000;
    let (_, s) = Constellation::Qpsk.random_symbols(1, n, 5);
    let mut rx = s.clone();
    add_awgn(&mut rx, 0.1, 6);
    let rep = measure_ser(&rx, &s, Constellation::Qpsk).unwrap();
    let expected = q_function(10f64.sqrt());
    assert!(
        (rep.ber[0] / expected - 1.0).abs() < 0.15,
        "{} vs {expected}",
        rep.ber[0]
    );
}

fn qpsk_ser_at(noise_variance: f64, seed: u64) -> f64 {
    let n = 100_000;
    let (_, s) = Constellation::Qpsk.random_symbols(1, n, seed);
    let mut rx = s.clone();
    add_awgn(&mut rx, noise_variance, seed + 1);
    measure_ser(&rx, &s, Constellation::Qpsk).unwrap().ser[0]
}

#[test]
fn qpsk_ser_at_minus_twenty_db_matches_exact_theory() {
    // Exact QPSK SER is 1 - (1 - Q(sqrt(Es/N0)))^2, about 0.7086 at -20 dB.
    let p = q_function(0.01f64.sqrt());
    let exact = 1.0 - (1.0 - p).powi(2);
    let ser = qpsk_ser_at(100.0, 7);
    assert!((ser - exact).abs() < 0.01, "{ser} vs {exact}");
}

#[test]
fn qpsk_ser_approaches_random_guessing() {
    let ser = qpsk_ser_at(1e4, 9);
    assert!((ser - 0.75).abs() < 0.02, "{ser}");
}

fn pilot_error_variance(pilot_length: usize, trials: u64) -> f64 {
    let h = random_coupled_channel(4, 4, 0.6, 10).unwrap();
    let sigma2 = 0.1;
    let mut acc = 0.0;
    for t in 0..trials {
        let est = estimate_channel_via_pilots(&h, pilot_length, 1.0, sigma2, derive_seed(11, t)).unwrap();
        acc += (est.matrix() - h.matrix()).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    acc / (trials as f64 * 16.0)
}

#[test]
fn pilot_estimation_error_variance() {
    let v = pilot_error_variance(64, 10_000);
    assert!((v / (0.1 / 64.0) - 1.0).abs() < 0.05, "{v}");
}

#[test]
fn pilot_error_scales_inversely_with_length() {
    let ratio = pilot_error_variance(16, 2000) / pilot_error_variance(64, 2000);
    assert!((ratio / 4.0 - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn pilot_length_below_antennas_is_rejected() {
    let rx = CMatrix::zeros(4, 2);
    assert!(estimate_csi(&rx, &nalgebra::DMatrix::from_element(4, 2, 1.0)).is_err());
    assert!(pilot_matrix(4, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transmit_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let h = random_coupled_channel(3, 4, 0.8, seed).unwrap();
        let x = random_coupled_channel(4, 10, 1.0, seed ^ 1).unwrap().into_matrix();
        let y = random_coupled_channel(4, 10, 1.0, seed ^ 2).unwrap().into_matrix();
        let wrap = |m: CMatrix| SymbolStreams { samples: m, sosf: 0..0, pilots: 0..0, payload: 0..10 };
        let lhs = transmit(&h, &wrap(&x * c(a, 0.0) + &y * c(b, 0.0)), 0.0, 0).unwrap().samples;
        let rx = transmit(&h, &wrap(x), 0.0, 0).unwrap().samples;
        let ry = transmit(&h, &wrap(y), 0.0, 0).unwrap().samples;
        let rhs = rx * c(a, 0.0) + ry * c(b, 0.0);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }
}

use myo_core::synthemg::{synthesize_emg, EmgSynthesizer, MovementProfile, SynergyModel};
use myo_core::N_ELECTRODES;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const SAMPLES: usize = 1_000_000;

/// Monte-Carlo estimate of E|a N(0, 1)|.
fn folded_normal_mean(a: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let sum: f64 = (0..draws)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (a * z).abs()
        })
        .sum();
    sum / draws as f64
}

fn long_run_mav(
    profile: MovementProfile,
    synergy: &SynergyModel,
    seed: u64,
) -> [f64; N_ELECTRODES] {
    let mut sum = [0.0; N_ELECTRODES];
    let mut n = 0usize;
    for f in EmgSynthesizer::new(profile, synergy.clone(), seed).unwrap() {
        for (s, x) in sum.iter_mut().zip(&f.samples) {
            *s += x.abs();
        }
        n += 1;
    }
    assert!(n >= SAMPLES);
    sum.map(|s| s / n as f64)
}

fn held(frames: usize, kin: [f64; 6], label: &str) -> MovementProfile {
    let mut p = MovementProfile::rest(frames);
    p.trajectory = vec![kin; frames];
    p.segment_labels = vec![label.to_string(); frames];
    p
}

#[test]
fn rest_mav_matches_folded_normal() {
    let synergy = SynergyModel::forearm_default();
    let mav = long_run_mav(MovementProfile::rest(SAMPLES / 40), &synergy, 11);
    for (e, (&got, &amp)) in mav.iter().zip(&synergy.rest_noise_amplitude).enumerate() {
        let expected = folded_normal_mean(amp, SAMPLES, 100 + e as u64);
        let rel = (got - expected).abs() / expected;
        assert!(rel < 0.05, "electrode {e}: {got} vs {expected}");
    }
}

#[test]
fn flexion_mav_matches_folded_normal() {
    let synergy = SynergyModel::forearm_default();
    let mav = long_run_mav(
        held(SAMPLES / 40, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], "D1-flex"),
        &synergy,
        12,
    );
    let g = synergy.gains[0][0][0];
    assert!(g > 0.0);
    let expected = folded_normal_mean(synergy.rest_noise_amplitude[0] + g, SAMPLES, 7);
    let rel = (mav[0] - expected).abs() / expected;
    assert!(rel < 0.05, "{} vs {expected}", mav[0]);
}

#[test]
fn rest_noise_is_band_limited() {
    let n = 1 << 16;
    let frames = synthesize_emg(
        &MovementProfile::rest(n / 40 + 1),
        &SynergyModel::forearm_default(),
        5,
    )
    .unwrap();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for e in 0..N_ELECTRODES {
        let mut buf: Vec<Complex<f64>> = frames[..n]
            .iter()
            .map(|f| Complex::new(f.samples[e], 0.0))
            .collect();
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        let cutoff = (475.0 / 1000.0 * n as f64).ceil() as usize;
        let high: f64 = power[cutoff..].iter().sum();
        assert!(high / total < 0.01, "electrode {e}: {}", high / total);
    }
}

#[test]
fn stream_length_matches_duration() {
    for frames in [1usize, 7, 250] {
        let p = MovementProfile::rest(frames);
        let out = synthesize_emg(&p, &SynergyModel::forearm_default(), 0).unwrap();
        let expected = p.duration_ms() as i64;
        assert!((out.len() as i64 - expected).abs() <= 1);
        assert!(out.windows(2).all(|w| w[1].t_ms == w[0].t_ms + 1));
    }
}

#[test]
fn fixed_seed_is_bit_identical() {
    let p = held(100, [0.0, -0.5, 0.0, 0.0, 0.0, 0.0], "D2-ext");
    let a = synthesize_emg(&p, &SynergyModel::forearm_default(), 99).unwrap();
    let b = synthesize_emg(&p, &SynergyModel::forearm_default(), 99).unwrap();
    assert_eq!(a, b);
    let c = synthesize_emg(&p, &SynergyModel::forearm_default(), 98).unwrap();
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn amplitude_monotone_in_effort(
        d in 0usize..6,
        lo in 0.0f64..1.0,
        step in 0.0f64..1.0,
        negative in any::<bool>(),
    ) {
        let synergy = SynergyModel::forearm_default();
        let hi = (lo + step).min(1.0);
        let sign = if negative { -1.0 } else { 1.0 };
        let mut k_lo = [0.0; 6];
        let mut k_hi = [0.0; 6];
        k_lo[d] = sign * lo;
        k_hi[d] = sign * hi;
        let (a_lo, a_hi) = (synergy.amplitudes(&k_lo), synergy.amplitudes(&k_hi));
        for e in 0..N_ELECTRODES {
            prop_assert!(a_hi[e] >= a_lo[e]);
        }
    }
}

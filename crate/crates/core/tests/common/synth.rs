//! Synthetic "speech" for end-to-end tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cqcc_artifact::audio::AudioSignal;

pub const RATE: u32 = 16_000;

/// Background level in dB re full scale for the `index`-th utterance of a
/// corpus: mostly far below the quantization step of coarse codecs,
/// occasionally above it. A golden-ratio sequence spreads the levels evenly
/// over any contiguous block of indices.
pub fn background_level_db(index: u64) -> f64 {
    let u = (index as f64 * 0.618_033_988_749_894_9).fract();
    -115.0 + 75.0 * u.powi(5)
}

/// Noise excitation through three cascaded resonators with drifting centre
/// frequencies, a syllable-rate envelope with pauses, and an additive white
/// background at `background_db` dB re full scale.
pub fn synthetic_utterance(seed: u64, background_db: f64) -> AudioSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let fs = RATE as f64;
    let len = (rng.gen_range(1.0..2.0) * fs) as usize;
    let tau = 2.0 * std::f64::consts::PI;

    struct Formant {
        base: f64,
        depth: f64,
        rate: f64,
        phase: f64,
        bw: f64,
    }
    let formants: Vec<Formant> = [(300.0, 900.0), (900.0, 2400.0), (2000.0, 3600.0)]
        .iter()
        .map(|&(lo, hi)| Formant {
            base: rng.gen_range(lo..hi),
            depth: rng.gen_range(0.05..0.25),
            rate: rng.gen_range(0.5..4.0),
            phase: rng.gen_range(0.0..tau),
            bw: rng.gen_range(60.0..250.0),
        })
        .collect();
    let syllable_rate = rng.gen_range(3.0..6.0);
    let syllable_phase = rng.gen_range(0.0..tau);

    let mut state = vec![[0.0f64; 2]; formants.len()];
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let t = i as f64 / fs;
        let mut x = normal.sample(&mut rng);
        for (f, s) in formants.iter().zip(state.iter_mut()) {
            let freq = f.base * (1.0 + f.depth * (tau * f.rate * t + f.phase).sin());
            let r = (-std::f64::consts::PI * f.bw / fs).exp();
            let a1 = 2.0 * r * (tau * freq / fs).cos();
            let a2 = -r * r;
            let y = (1.0 - r) * x + a1 * s[0] + a2 * s[1];
            s[1] = s[0];
            s[0] = y;
            x = y;
        }
        // syllables separated by pauses of true silence
        let env = ((tau * syllable_rate * t + syllable_phase).sin() + 0.2).max(0.0);
        out.push(x * env * env);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = rng.gen_range(0.3..0.9) / peak;
    let floor = 10f64.powf(background_db / 20.0);
    let out: Vec<f64> = out.iter().map(|v| v * gain + floor * normal.sample(&mut rng)).collect();
    AudioSignal::new(out, RATE).unwrap()
}

/// Mu-law companding (mu = 255) with the companded value quantized to `bits`.
pub fn mu_law(signal: &AudioSignal, bits: u32) -> AudioSignal {
    let mu = 255.0f64;
    let levels = (1u32 << bits) as f64;
    let samples = signal
        .samples()
        .iter()
        .map(|&x| {
            let x = x.clamp(-1.0, 1.0);
            let c = x.signum() * (1.0 + mu * x.abs()).ln() / (1.0 + mu).ln();
            // mid-rise quantizer on [-1, 1]
            let q = ((c * 0.5 + 0.5) * levels).floor().min(levels - 1.0);
            let c = (q + 0.5) / levels * 2.0 - 1.0;
            c.signum() * ((1.0 + mu).powf(c.abs()) - 1.0) / mu
        })
        .collect();
    AudioSignal::new(samples, signal.sample_rate()).unwrap()
}


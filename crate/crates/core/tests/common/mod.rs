//! Synthetic audio fixtures and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use echotrace_core::corpus::{ClipId, CorpusManifest, ManifestEntry, CLIP_SAMPLES, SAMPLE_RATE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A clip made of a quiet coloured-noise bed plus 2-5 tone or noise bursts at
/// random times, frequencies and levels.
pub fn event_clip(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = CLIP_SAMPLES;
    let sr = SAMPLE_RATE as f64;
    let mut x = vec![0.0f64; n];

    // noise bed through a one-pole low-pass with a random corner
    let bed_level = 10f64.powf(rng.gen_range(-2.5..-1.3));
    let a = rng.gen_range(0.05..0.95);
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = a * y + (1.0 - a) * rng.gen_range(-1.0..1.0);
        *v = bed_level * y;
    }

    let events = rng.gen_range(2..=5);
    for _ in 0..events {
        let dur = (rng.gen_range(0.15..1.8) * sr) as usize;
        let start = rng.gen_range(0..n - dur);
        let amp = rng.gen_range(0.1..0.8);
        if rng.gen_bool(0.6) {
            let f0 = 10f64.powf(rng.gen_range(2.3..3.8));
            let harmonics = rng.gen_range(1..=4);
            let glide = rng.gen_range(-0.3..0.3);
            for i in 0..dur {
                let t = i as f64 / sr;
                let env = (PI * i as f64 / dur as f64).sin().powi(2);
                let f = f0 * (1.0 + glide * i as f64 / dur as f64);
                let mut s = 0.0;
                for h in 1..=harmonics {
                    if f * h as f64 >= sr / 2.0 {
                        break;
                    }
                    s += (2.0 * PI * f * h as f64 * t).sin() / h as f64;
                }
                x[start + i] += amp * env * s;
            }
        } else {
            // two-pole resonator driven by white noise
            let fc = 10f64.powf(rng.gen_range(2.5..3.8));
            let r = rng.gen_range(0.90..0.995);
            let (c1, c2) = (2.0 * r * (2.0 * PI * fc / sr).cos(), -r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            let gain = (1.0 - r) * 2.0;
            for i in 0..dur {
                let env = (PI * i as f64 / dur as f64).sin();
                let y0 = gain * rng.gen_range(-1.0..1.0) + c1 * y1 + c2 * y2;
                y2 = y1;
                y1 = y0;
                x[start + i] += amp * env * y0;
            }
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.99 { 0.99 / peak } else { 1.0 };
    x.iter().map(|v| (v * scale) as f32).collect()
}

/// `x` plus white noise at the given signal-to-noise ratio.
pub fn noisy_copy(x: &[f32], snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let power = x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64;
    let noise_power = power / 10f64.powf(snr_db / 10.0);
    // uniform noise on [-a, a] has variance a^2 / 3
    let a = (3.0 * noise_power).sqrt();
    x.iter()
        .map(|&v| (v as f64 + rng.gen_range(-a..a)).clamp(-1.0, 1.0) as f32)
        .collect()
}

pub fn white_noise(rng: &mut ChaCha8Rng, level: f64) -> Vec<f32> {
    (0..CLIP_SAMPLES).map(|_| (level * rng.gen_range(-1.0..1.0)) as f32).collect()
}

pub fn write_wav(path: &Path, samples: &[f32]) {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

/// Writes each `(id, samples)` as `<dir>/<corpus>/<id>.wav` and returns the
/// manifest plus the manifest file path.
pub fn write_corpus(dir: &Path, corpus: &str, clips: &[(String, Vec<f32>)]) -> (CorpusManifest, PathBuf) {
    let root = dir.join(corpus);
    std::fs::create_dir_all(&root).unwrap();
    let mut lines = String::new();
    let mut entries = Vec::new();
    for (id, samples) in clips {
        let path = root.join(format!("{id}.wav"));
        write_wav(&path, samples);
        lines.push_str(&format!("{{\"id\":\"{id}\",\"path\":\"{corpus}/{id}.wav\"}}\n"));
        entries.push(ManifestEntry {
            id: ClipId::new(id.clone()).unwrap(),
            path,
            caption: None,
        });
    }
    let mpath = dir.join(format!("{corpus}.jsonl"));
    std::fs::write(&mpath, lines).unwrap();
    (CorpusManifest::new(corpus, entries).unwrap(), mpath)
}

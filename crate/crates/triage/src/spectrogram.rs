//! Log-magnitude spectrogram images for visual comparison of a pair.
//!
//! Every clip is padded or truncated to the standard clip length, so all
//! images have the same size: one column per STFT frame (time left to
//! right) and one row per frequency bin (high frequencies at the top).
//! Magnitudes are in dB relative to a full-scale sine and mapped onto a
//! fixed colour ramp over [-80, 0] dB.

use echotrace_core::corpus::{AudioClip, CLIP_SAMPLES, SAMPLE_RATE};
use echotrace_core::melspec::{Stft, StftConfig, WindowKind};

use crate::error::{Error, Result};

pub const WINDOW: usize = 512;
pub const HOP: usize = 256;
pub const DB_MIN: f64 = -80.0;
pub const DB_MAX: f64 = 0.0;

pub fn stft_config() -> StftConfig {
    StftConfig {
        window_len: WINDOW,
        hop: HOP,
        fft_len: WINDOW,
        window: WindowKind::Hann,
        centered: true,
    }
}

/// Image width and height in pixels.
pub fn dimensions() -> (usize, usize) {
    let cfg = stft_config();
    (cfg.n_frames(CLIP_SAMPLES), cfg.n_bins())
}

/// Image row holding frequency `hz`.
pub fn row_for_hz(hz: f64) -> usize {
    let (_, h) = dimensions();
    let bin = (hz * WINDOW as f64 / SAMPLE_RATE as f64).round() as usize;
    h - 1 - bin.min(h - 1)
}

/// dB values clamped to the display range, row-major in image order.
pub fn spectrogram_db(clip: &AudioClip) -> Result<Vec<f64>> {
    if clip.samples.len() != CLIP_SAMPLES {
        return Err(Error::Core(echotrace_core::Error::Contract(format!(
            "clip {} has {} samples, expected {CLIP_SAMPLES}",
            clip.id,
            clip.samples.len()
        ))));
    }
    let spec = Stft::new(stft_config())?.transform(&clip.samples)?;
    // a full-scale sine peaks at sum(window) / 2 = WINDOW / 4 for periodic Hann
    let reference = WINDOW as f64 / 4.0;
    let (w, h) = (spec.frames, spec.bins);
    let mut out = vec![DB_MIN; w * h];
    for t in 0..w {
        for (bin, c) in spec.frame(t).iter().enumerate() {
            let mag = c.norm() / reference;
            let db = if mag > 0.0 { 20.0 * mag.log10() } else { DB_MIN };
            out[(h - 1 - bin) * w + t] = db.clamp(DB_MIN, DB_MAX);
        }
    }
    Ok(out)
}

/// PNG bytes of the clip's spectrogram. Identical input gives identical bytes.
pub fn render_spectrogram(clip: &AudioClip) -> Result<Vec<u8>> {
    let db = spectrogram_db(clip)?;
    let (w, h) = dimensions();
    let lut = palette();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for v in db {
        let i = ((v - DB_MIN) / (DB_MAX - DB_MIN) * 255.0).round() as usize;
        pixels.extend_from_slice(&lut[i.min(255)]);
    }
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Image(e.to_string()))?;
        writer.write_image_data(&pixels).map_err(|e| Error::Image(e.to_string()))?;
    }
    Ok(bytes)
}

/// 256-step ramp from near-black through purple and orange to pale yellow.
fn palette() -> Vec<[u8; 3]> {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 4.0],
        [87.0, 16.0, 110.0],
        [188.0, 55.0, 84.0],
        [249.0, 142.0, 9.0],
        [252.0, 255.0, 164.0],
    ];
    (0..256)
        .map(|i| {
            let x = i as f64 / 255.0 * (STOPS.len() - 1) as f64;
            let k = (x.floor() as usize).min(STOPS.len() - 2);
            let f = x - k as f64;
            let mut c = [0u8; 3];
            for ch in 0..3 {
                c[ch] = (STOPS[k][ch] + f * (STOPS[k + 1][ch] - STOPS[k][ch])).round() as u8;
            }
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use echotrace_core::corpus::ClipId;

    fn clip(samples: Vec<f32>) -> AudioClip {
        AudioClip::from_samples(ClipId::new("c").unwrap(), samples, CLIP_SAMPLES)
    }

    fn decode(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
        let dec = png::Decoder::new(bytes);
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info.width, info.height, buf)
    }

    #[test]
    fn silent_clip_is_uniform_minimum_colour() {
        let bytes = render_spectrogram(&clip(vec![0.0; CLIP_SAMPLES])).unwrap();
        let (w, h, px) = decode(&bytes);
        assert_eq!((w as usize, h as usize), dimensions());
        assert!(px.chunks(3).all(|p| p == palette()[0]));
    }

    #[test]
    fn sine_is_a_band_at_its_row() {
        let x: Vec<f32> = (0..CLIP_SAMPLES)
            .map(|n| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16000.0).sin() as f32)
            .collect();
        let db = spectrogram_db(&clip(x)).unwrap();
        let (w, h) = dimensions();
        let row = row_for_hz(1000.0);
        assert_eq!(row, h - 1 - 32);
        for t in 1..w - 1 {
            let col: Vec<f64> = (0..h).map(|r| db[r * w + t]).collect();
            let best = (0..h).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(best, row, "frame {t}");
            // amplitude 0.5 is -6 dB relative to full scale
            assert!((col[row] + 6.02).abs() < 0.1, "{}", col[row]);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let x: Vec<f32> = (0..CLIP_SAMPLES).map(|n| ((n * 7919) % 1000) as f32 / 1000.0 - 0.5).collect();
        let a = render_spectrogram(&clip(x.clone())).unwrap();
        let b = render_spectrogram(&clip(x)).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }
}

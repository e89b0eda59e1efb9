//! Low-dimensional log-mel descriptor.
//!
//! A clip of 163,872 samples is analysed with a centered, reflect-padded
//! STFT (2048-sample periodic Hann window, hop 1536) giving 107 frames. The
//! power spectrogram is projected onto 16 triangular mel filters, divided by
//! its global maximum, converted to dB and floored at -40 dB. Flattening
//! frame-major yields 107 x 16 = 1712 values.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::corpus::{AudioClip, ClipId, CLIP_SAMPLES, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const N_FRAMES: usize = 107;
pub const N_MELS: usize = 16;
pub const DESCRIPTOR_LEN: usize = N_FRAMES * N_MELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
    pub centered: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 2048,
            hop: 1536,
            fft_len: 2048,
            window: WindowKind::Hann,
            centered: true,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.hop == 0 {
            return Err(Error::Config("window length and hop must be positive".into()));
        }
        if self.fft_len < self.window_len {
            return Err(Error::Config(format!(
                "fft length {} is shorter than the window ({})",
                self.fft_len, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        let padded = if self.centered { len + 2 * (self.window_len / 2) } else { len };
        if padded < self.window_len {
            0
        } else {
            1 + (padded - self.window_len) / self.hop
        }
    }

    pub fn window(&self) -> Vec<f64> {
        match self.window {
            WindowKind::Hann => (0..self.window_len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / self.window_len as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// Linear below 1 kHz, logarithmic above.
    Slaney,
    /// `2595 log10(1 + f / 700)`.
    Htk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterNorm {
    /// Each triangle scaled by `2 / (f_hi - f_lo)` (constant area).
    Slaney,
    /// Unit-peak triangles.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub scale: MelScale,
    pub norm: FilterNorm,
    pub floor_db: f64,
    /// Exponent applied to STFT magnitudes (2 = power).
    pub spectrogram_power: f64,
    /// Multiplier in `k * log10(x)` (10 for power).
    pub db_multiplier: f64,
    pub sample_rate: u32,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_mels: N_MELS,
            f_min: 0.0,
            f_max: 8000.0,
            scale: MelScale::Slaney,
            norm: FilterNorm::Slaney,
            floor_db: -40.0,
            spectrogram_power: 2.0,
            db_multiplier: 10.0,
            sample_rate: SAMPLE_RATE,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be positive".into()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if !(self.floor_db < 0.0 && self.floor_db.is_finite()) {
            return Err(Error::Config(format!("floor_db must be negative, got {}", self.floor_db)));
        }
        if !(self.spectrogram_power > 0.0 && self.db_multiplier > 0.0) {
            return Err(Error::Config("spectrogram_power and db_multiplier must be positive".into()));
        }
        Ok(())
    }
}

/// Everything that determines a mel descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorConfig {
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub target_samples: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            target_samples: CLIP_SAMPLES,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mel.validate()?;
        let len = self.stft.n_frames(self.target_samples) * self.mel.n_mels;
        if len != DESCRIPTOR_LEN {
            return Err(Error::Config(format!(
                "configuration yields {len}-element descriptors, mel descriptors have {DESCRIPTOR_LEN}"
            )));
        }
        Ok(())
    }

    /// Canonical text used to key cached descriptors.
    pub fn fingerprint(&self) -> String {
        format!(
            "echotrace-mel-v1:{}",
            serde_json::to_string(self).expect("config serializes")
        )
    }
}

pub fn hz_to_mel(hz: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
        MelScale::Slaney => {
            const F_SP: f64 = 200.0 / 3.0;
            const MIN_LOG_HZ: f64 = 1000.0;
            let min_log_mel = MIN_LOG_HZ / F_SP;
            let logstep = 6.4f64.ln() / 27.0;
            if hz >= MIN_LOG_HZ {
                min_log_mel + (hz / MIN_LOG_HZ).ln() / logstep
            } else {
                hz / F_SP
            }
        }
    }
}

pub fn mel_to_hz(mel: f64, scale: MelScale) -> f64 {
    match scale {
        MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
        MelScale::Slaney => {
            const F_SP: f64 = 200.0 / 3.0;
            const MIN_LOG_HZ: f64 = 1000.0;
            let min_log_mel = MIN_LOG_HZ / F_SP;
            let logstep = 6.4f64.ln() / 27.0;
            if mel >= min_log_mel {
                MIN_LOG_HZ * (logstep * (mel - min_log_mel)).exp()
            } else {
                F_SP * mel
            }
        }
    }
}

/// Complex STFT, `frames x bins`, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<Complex<f64>>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex<f64>] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }
}

/// Triangular mel filter weights, `n_mels x n_bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
    /// `n_mels + 2` band edges in Hz; filter `m` spans `edges[m]..edges[m + 2]`
    /// and peaks at `edges[m + 1]`.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    /// Projects one frame of power values onto the mel bands.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self.row(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Builds the mel filterbank; every filter must cover at least one FFT bin.
pub fn mel_filterbank(cfg: &MelConfig, stft: &StftConfig) -> Result<MelFilterbank> {
    cfg.validate()?;
    stft.validate()?;
    let n_bins = stft.n_bins();
    let lo = hz_to_mel(cfg.f_min, cfg.scale);
    let hi = hz_to_mel(cfg.f_max, cfg.scale);
    let n_pts = cfg.n_mels + 2;
    let edges_hz: Vec<f64> = (0..n_pts)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_pts - 1) as f64, cfg.scale))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * cfg.sample_rate as f64 / stft.fft_len as f64)
        .collect();

    let mut weights = vec![0.0; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let scale = match cfg.norm {
            FilterNorm::Slaney => 2.0 / (right - left),
            FilterNorm::None => 1.0,
        };
        let row = &mut weights[m * n_bins..(m + 1) * n_bins];
        for (w, &f) in row.iter_mut().zip(&bin_hz) {
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            *w = rising.min(falling).max(0.0) * scale;
        }
        if row.iter().all(|&w| w <= 0.0) {
            return Err(Error::Config(format!(
                "mel filter {m} ({left:.1}-{right:.1} Hz) covers no FFT bin; too many mel bands for fft_len {}",
                stft.fft_len
            )));
        }
    }
    Ok(MelFilterbank {
        n_mels: cfg.n_mels,
        n_bins,
        weights,
        edges_hz,
    })
}

/// Reusable STFT engine (window and FFT plan).
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
        Ok(Stft {
            window: cfg.window(),
            cfg,
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Transforms an arbitrary-length signal. Centered framing reflect-pads
    /// `window_len / 2` samples at both ends, which needs a signal longer
    /// than that pad.
    pub fn transform(&self, signal: &[f32]) -> Result<Spectrogram> {
        let pad = if self.cfg.centered { self.cfg.window_len / 2 } else { 0 };
        if pad > 0 && signal.len() <= pad {
            return Err(Error::contract(format!(
                "signal of {} samples is too short for reflect padding by {pad}",
                signal.len()
            )));
        }
        let padded = reflect_pad(signal, pad);
        let frames = self.cfg.n_frames(signal.len());
        let bins = self.cfg.n_bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(0.0, 0.0); self.cfg.fft_len];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * self.cfg.hop;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            // window centered inside the FFT frame when fft_len > window_len
            let offset = (self.cfg.fft_len - self.cfg.window_len) / 2;
            for (i, w) in self.window.iter().enumerate() {
                buf[offset + i] = Complex::new(padded[start + i] * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(Spectrogram { frames, bins, data })
    }
}

fn reflect_pad(signal: &[f32], pad: usize) -> Vec<f64> {
    let n = signal.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| signal[i] as f64));
    out.extend(signal.iter().map(|&s| s as f64));
    out.extend((1..=pad).map(|i| signal[n - 1 - i] as f64));
    out
}

/// STFT of a fixed-length clip.
pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<Spectrogram> {
    if clip.samples.len() != CLIP_SAMPLES {
        return Err(Error::contract(format!(
            "clip {} has {} samples, expected {CLIP_SAMPLES}",
            clip.id,
            clip.samples.len()
        )));
    }
    Stft::new(cfg.clone())?.transform(&clip.samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelDescriptor {
    pub clip_id: ClipId,
    /// Frame-major: `values[frame * n_mels + band]`.
    pub values: Vec<f32>,
    /// Set when the clip was silent and the all-floor descriptor was emitted.
    pub degenerate: bool,
}

/// Precomputed STFT plan and filterbank for repeated extraction.
#[derive(Debug, Clone)]
pub struct MelExtractor {
    cfg: DescriptorConfig,
    stft: Stft,
    bank: MelFilterbank,
}

impl MelExtractor {
    pub fn new(cfg: DescriptorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MelExtractor {
            stft: Stft::new(cfg.stft.clone())?,
            bank: mel_filterbank(&cfg.mel, &cfg.stft)?,
            cfg,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    /// Mel-projected spectrogram before normalization, frame-major.
    pub fn mel_power(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        if clip.samples.len() != self.cfg.target_samples {
            return Err(Error::contract(format!(
                "clip {} has {} samples, expected {}",
                clip.id,
                clip.samples.len(),
                self.cfg.target_samples
            )));
        }
        let spec = self.stft.transform(&clip.samples)?;
        let p = self.cfg.mel.spectrogram_power;
        let mut power = vec![0.0; spec.bins];
        let mut out = vec![0.0; spec.frames * self.bank.n_mels];
        for t in 0..spec.frames {
            for (dst, c) in power.iter_mut().zip(spec.frame(t)) {
                *dst = if p == 2.0 { c.norm_sqr() } else { c.norm().powf(p) };
            }
            self.bank
                .apply(&power, &mut out[t * self.bank.n_mels..(t + 1) * self.bank.n_mels]);
        }
        Ok(out)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<MelDescriptor> {
        let mel = self.mel_power(clip)?;
        let floor = self.cfg.mel.floor_db;
        let max = mel.iter().copied().fold(0.0f64, f64::max);
        if max <= 0.0 || !max.is_finite() {
            return Ok(MelDescriptor {
                clip_id: clip.id.clone(),
                values: vec![floor as f32; mel.len()],
                degenerate: true,
            });
        }
        let k = self.cfg.mel.db_multiplier;
        let values = mel
            .iter()
            .map(|&v| (k * (v / max).log10()).max(floor) as f32)
            .collect();
        Ok(MelDescriptor {
            clip_id: clip.id.clone(),
            values,
            degenerate: false,
        })
    }
}

pub fn mel_descriptor(clip: &AudioClip, cfg: &MelConfig, stft_cfg: &StftConfig) -> Result<MelDescriptor> {
    MelExtractor::new(DescriptorConfig {
        stft: stft_cfg.clone(),
        mel: cfg.clone(),
        target_samples: CLIP_SAMPLES,
    })?
    .extract(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clip(samples: Vec<f32>) -> AudioClip {
        AudioClip::from_samples(ClipId::new("t").unwrap(), samples, CLIP_SAMPLES)
    }

    fn sine(freq: f64, amp: f64) -> Vec<f32> {
        (0..CLIP_SAMPLES)
            .map(|n| (amp * (2.0 * std::f64::consts::PI * freq * n as f64 / 16_000.0).sin()) as f32)
            .collect()
    }

    /// O(n^2) DFT of one frame, written independently of the FFT path.
    fn naive_frame(signal: &[f32], t: usize) -> Vec<Complex<f64>> {
        let (n, hop, half) = (2048usize, 1536usize, 1024isize);
        let len = signal.len() as isize;
        let sample = |i: isize| -> f64 {
            let j = if i < 0 { -i } else if i >= len { 2 * (len - 1) - i } else { i };
            signal[j as usize] as f64
        };
        let framed: Vec<f64> = (0..n)
            .map(|i| {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
                w * sample((t * hop + i) as isize - half)
            })
            .collect();
        (0..=n / 2)
            .map(|k| {
                framed.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (i, &x)| {
                    let ang = -2.0 * std::f64::consts::PI * (k * i % n) as f64 / n as f64;
                    acc + Complex::new(x * ang.cos(), x * ang.sin())
                })
            })
            .collect()
    }

    #[test]
    fn default_geometry_gives_1712_values() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.window_len, (0.128 * 16_000.0) as usize);
        assert_eq!(cfg.hop * 4, cfg.window_len * 3);
        assert_eq!(cfg.n_frames(CLIP_SAMPLES), 107);
        assert_eq!(cfg.n_bins(), 1025);
        assert_eq!(cfg.n_frames(CLIP_SAMPLES) * N_MELS, 1712);
        DescriptorConfig::default().validate().unwrap();
    }

    #[test]
    fn stft_shape_and_zero_input() {
        let spec = stft(&clip(vec![0.0; CLIP_SAMPLES]), &StftConfig::default()).unwrap();
        assert_eq!((spec.frames, spec.bins), (107, 1025));
        assert!(spec.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_rejects_wrong_length() {
        let mut c = clip(vec![0.0; 10]);
        c.samples.truncate(1000);
        assert!(matches!(stft(&c, &StftConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn sine_energy_sits_in_the_1khz_bin_and_matches_dft() {
        let x = sine(1000.0, 1.0);
        let spec = stft(&clip(x.clone()), &StftConfig::default()).unwrap();
        let bin = (1000.0f64 / (16_000.0 / 2048.0)).round() as usize;
        for t in 0..spec.frames {
            let frame = spec.frame(t);
            let peak = (0..frame.len())
                .max_by(|&a, &b| frame[a].norm().total_cmp(&frame[b].norm()))
                .unwrap();
            let total: f64 = frame.iter().map(|c| c.norm_sqr()).sum();
            let near: f64 = frame[bin - 3..=bin + 3].iter().map(|c| c.norm_sqr()).sum();
            if t > 0 {
                assert!(near / total > 0.99, "frame {t}");
                assert_eq!(peak, bin, "frame {t}");
            } else {
                // the first frame is half reflection, which flips the phase
                assert!(peak.abs_diff(bin) <= 1);
            }
        }
        for t in [0, 1, 53, 106] {
            let oracle = naive_frame(&x, t);
            let scale = oracle.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in spec.frame(t).iter().zip(&oracle) {
                assert!((a - b).norm() <= 1e-4 * scale, "frame {t}");
            }
        }
    }

    #[test]
    fn random_frames_match_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f32> = (0..CLIP_SAMPLES).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = stft(&clip(x.clone()), &StftConfig::default()).unwrap();
        for t in [0, 40, 106] {
            let oracle = naive_frame(&x, t);
            let scale = oracle.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let err = spec
                .frame(t)
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-4 * scale);
        }
    }

    #[test]
    fn filterbank_properties() {
        let bank = mel_filterbank(&MelConfig::default(), &StftConfig::default()).unwrap();
        assert_eq!((bank.n_mels, bank.n_bins), (16, 1025));
        assert!(bank.weights.iter().all(|&w| w >= 0.0));
        for m in 1..16 {
            assert!(bank.center_hz(m) > bank.center_hz(m - 1));
        }
        let ones = vec![1.0; 1025];
        let mut out = vec![0.0; 16];
        bank.apply(&ones, &mut out);
        assert!(out.iter().all(|&v| v > 0.0), "{out:?}");
    }

    #[test]
    fn mel_scale_round_trips() {
        for scale in [MelScale::Slaney, MelScale::Htk] {
            for hz in [0.0, 440.0, 1000.0, 3000.0, 8000.0] {
                assert!((mel_to_hz(hz_to_mel(hz, scale), scale) - hz).abs() < 1e-9);
            }
        }
        assert!((hz_to_mel(1000.0, MelScale::Slaney) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_bands_is_a_config_error() {
        let cfg = MelConfig {
            n_mels: 1500,
            ..MelConfig::default()
        };
        assert!(matches!(mel_filterbank(&cfg, &StftConfig::default()), Err(Error::Config(_))));
        let cfg = MelConfig {
            f_max: 9000.0,
            ..MelConfig::default()
        };
        assert!(mel_filterbank(&cfg, &StftConfig::default()).is_err());
    }

    #[test]
    fn silent_clip_gives_the_floor_descriptor() {
        let d = mel_descriptor(&clip(vec![]), &MelConfig::default(), &StftConfig::default()).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.values.len(), 1712);
        assert!(d.values.iter().all(|&v| v == -40.0));
    }

    #[test]
    fn normalized_range_and_gain_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f32> = (0..CLIP_SAMPLES).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let d = mel_descriptor(&clip(x.clone()), &MelConfig::default(), &StftConfig::default()).unwrap();
        assert!(!d.degenerate);
        assert_eq!(d.values.iter().copied().fold(f32::MIN, f32::max), 0.0);
        assert!(d.values.iter().all(|&v| (-40.0..=0.0).contains(&v)));
        let scaled: Vec<f32> = x.iter().map(|v| v * 0.01).collect();
        let e = mel_descriptor(&clip(scaled), &MelConfig::default(), &StftConfig::default()).unwrap();
        for (a, b) in d.values.iter().zip(&e.values) {
            assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn shifting_a_transient_changes_the_descriptor() {
        let mut a = vec![0.0f32; CLIP_SAMPLES];
        let mut b = vec![0.0f32; CLIP_SAMPLES];
        for i in 0..400 {
            let v = ((i as f32) * 0.3).sin();
            a[50_000 + i] = v;
            b[50_000 + 1536 + i] = v;
        }
        let cfgs = (MelConfig::default(), StftConfig::default());
        let da = mel_descriptor(&clip(a), &cfgs.0, &cfgs.1).unwrap();
        let db = mel_descriptor(&clip(b), &cfgs.0, &cfgs.1).unwrap();
        assert_ne!(da.values, db.values);
    }

    #[test]
    fn fingerprint_tracks_config() {
        let a = DescriptorConfig::default();
        let mut b = a.clone();
        b.mel.scale = MelScale::Htk;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), DescriptorConfig::default().fingerprint());
    }
}

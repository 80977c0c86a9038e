//! WAV decoding and sample-rate conversion.
//!
//! Only RIFF/WAVE files holding 16-bit mono PCM are accepted. Multichannel
//! input is rejected rather than mixed down, so corpus errors surface early.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A mono waveform with amplitudes nominally in `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidRate("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

const PCM_SCALE: f64 = 32768.0;

/// Read a 16-bit mono PCM WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Decode an in-memory RIFF/WAVE image.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::CorruptHeader("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                Error::CorruptHeader(format!(
                    "chunk '{}' overruns the file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::CorruptHeader("fmt chunk shorter than 16 bytes".into()));
                }
                fmt = Some((
                    le_u16(&body[0..2]),
                    le_u16(&body[2..4]),
                    le_u32(&body[4..8]),
                    le_u16(&body[14..16]),
                ));
            }
            b"data" => {
                let (format, channels, rate, bits) = fmt
                    .ok_or_else(|| Error::CorruptHeader("data chunk before fmt chunk".into()))?;
                if format != 1 {
                    return Err(Error::UnsupportedFormat(format!(
                        "audio format tag {format} (only PCM=1 is supported)"
                    )));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat(format!(
                        "{bits}-bit samples (only 16-bit is supported)"
                    )));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedChannels(channels));
                }
                if rate == 0 {
                    return Err(Error::CorruptHeader("sample rate is zero".into()));
                }
                if !body.len().is_multiple_of(2) {
                    return Err(Error::CorruptHeader("odd data chunk length".into()));
                }
                let samples = body
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / PCM_SCALE)
                    .collect();
                return AudioSignal::new(samples, rate);
            }
            _ => {}
        }
        pos = body_end + (size & 1);
    }
    Err(Error::CorruptHeader("no data chunk".into()))
}

/// Encode a signal as 16-bit mono PCM. Samples are clipped to the 16-bit range.
pub fn encode_wav(signal: &AudioSignal) -> Vec<u8> {
    let data_len = signal.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &signal.samples {
        let v = (s * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_wav(signal)).map_err(|e| Error::io(path, e))
}

/// Half-length of the interpolation kernel; 64 taps per phase.
const HALF_TAPS: usize = 32;
const TAPS: usize = 2 * HALF_TAPS;
const KAISER_BETA: f64 = 8.0;
/// Above this many phases the kernel is evaluated per output sample instead of tabulated.
const MAX_TABLE_PHASES: u64 = 4096;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Kaiser-windowed sinc taps for an output instant `frac` input samples past
/// the anchor tap, normalized to unit DC gain.
fn kernel_taps(frac: f64, cutoff: f64, i0_beta: f64, taps: &mut [f64; TAPS]) {
    let mut sum = 0.0;
    for (j, t) in taps.iter_mut().enumerate() {
        // tap j sits at input offset (j - HALF_TAPS + 1) from floor(position)
        let x = j as f64 - (HALF_TAPS as f64 - 1.0) - frac;
        let r = x / HALF_TAPS as f64;
        let w = if r.abs() >= 1.0 {
            0.0
        } else {
            bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
        };
        let arg = std::f64::consts::PI * cutoff * x;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        *t = cutoff * sinc * w;
        sum += *t;
    }
    for t in taps.iter_mut() {
        *t /= sum;
    }
}

/// Band-limited sample-rate conversion with a 64-tap Kaiser-windowed sinc kernel.
///
/// The low-pass cutoff sits at the smaller of the two Nyquist frequencies.
/// Equal rates return the input unchanged.
pub fn resample(signal: &AudioSignal, target_rate: u32) -> Result<AudioSignal> {
    if target_rate == 0 {
        return Err(Error::InvalidRate("target rate must be positive".into()));
    }
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let source_rate = signal.sample_rate;
    if source_rate == target_rate {
        return Ok(signal.clone());
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;
    let n_in = signal.len() as u64;
    let n_out = ((2 * n_in * up + down) / (2 * down)).max(1) as usize;
    let cutoff = (target_rate as f64 / source_rate as f64).min(1.0);
    let i0_beta = bessel_i0(KAISER_BETA);

    let table: Option<Vec<[f64; TAPS]>> = (up <= MAX_TABLE_PHASES).then(|| {
        (0..up)
            .map(|phase| {
                let mut taps = [0.0; TAPS];
                kernel_taps(phase as f64 / up as f64, cutoff, i0_beta, &mut taps);
                taps
            })
            .collect()
    });

    let x = &signal.samples;
    let mut out = Vec::with_capacity(n_out);
    let mut scratch = [0.0; TAPS];
    for n in 0..n_out as u64 {
        // output n sits at input position n * down / up
        let num = n * down;
        let base = (num / up) as i64;
        let phase = num % up;
        let taps = match &table {
            Some(t) => &t[phase as usize],
            None => {
                kernel_taps(phase as f64 / up as f64, cutoff, i0_beta, &mut scratch);
                &scratch
            }
        };
        let first = base - (HALF_TAPS as i64 - 1);
        let mut acc = 0.0;
        for (j, &h) in taps.iter().enumerate() {
            let idx = first + j as i64;
            if idx >= 0 && (idx as u64) < n_in {
                acc += h * x[idx as usize];
            }
        }
        out.push(acc);
    }
    AudioSignal::new(out, target_rate)
}

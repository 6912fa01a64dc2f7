//! RIFF/WAVE reading and writing, restricted to 16-bit PCM mono.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

const RIFF_MAGIC: &[u8; 4] = b"RIFF";
const WAVE_MAGIC: &[u8; 4] = b"WAVE";
const FMT_CHUNK: &[u8; 4] = b"fmt ";
const DATA_CHUNK: &[u8; 4] = b"data";
const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("wav file not found: {0}")]
    NotFound(String),
    #[error("malformed wav header: {0}")]
    MalformedHeader(String),
    #[error("unsupported wav encoding: {0}")]
    Unsupported(String),
    #[error("sample {index} = {value} outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("cannot write an empty waveform")]
    Empty,
    #[error("wav i/o error: {0}")]
    Io(#[from] io::Error),
}

impl WavError {
    pub fn is_out_of_range(&self) -> bool {
        matches!(self, WavError::OutOfRange { .. } | WavError::Empty)
    }
}

/// Mono audio with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Serialize a waveform as a canonical 44-byte-header PCM16 mono file.
pub fn encode_wav(waveform: &Waveform) -> Result<Vec<u8>, WavError> {
    if waveform.samples.is_empty() {
        return Err(WavError::Empty);
    }
    if let Some((index, &value)) = waveform
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
    {
        return Err(WavError::OutOfRange { index, value });
    }
    let data_len = waveform.samples.len() * 2;
    let sr = waveform.sample_rate;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(RIFF_MAGIC);
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(WAVE_MAGIC);
    out.extend_from_slice(FMT_CHUNK);
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sr.to_le_bytes());
    out.extend_from_slice(&(sr * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(DATA_CHUNK);
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &waveform.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    Ok(out)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parse an in-memory RIFF/WAVE file.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::MalformedHeader("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != RIFF_MAGIC {
        return Err(WavError::MalformedHeader(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != WAVE_MAGIC {
        return Err(WavError::MalformedHeader("missing WAVE form type".into()));
    }
    let riff_len = u32_at(bytes, 4) as usize;
    if riff_len + 8 > bytes.len() || riff_len < 4 {
        return Err(WavError::MalformedHeader(format!(
            "RIFF size {riff_len} inconsistent with file length {}",
            bytes.len()
        )));
    }
    let end = riff_len + 8;

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= end {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > end {
            return Err(WavError::MalformedHeader(format!(
                "chunk {:?} overruns file",
                String::from_utf8_lossy(id)
            )));
        }
        if id == FMT_CHUNK {
            if size < 16 {
                return Err(WavError::MalformedHeader("fmt chunk too small".into()));
            }
            let mut tag = u16_at(bytes, body);
            let channels = u16_at(bytes, body + 2);
            let rate = u32_at(bytes, body + 4);
            let bits = u16_at(bytes, body + 14);
            if tag == FORMAT_EXTENSIBLE && size >= 40 {
                // first two bytes of the sub-format GUID carry the real tag
                tag = u16_at(bytes, body + 24);
            }
            fmt = Some((tag, channels, rate, bits));
        } else if id == DATA_CHUNK {
            let (tag, channels, rate, bits) =
                fmt.ok_or_else(|| WavError::MalformedHeader("data chunk precedes fmt chunk".into()))?;
            if tag != FORMAT_PCM {
                return Err(WavError::Unsupported(format!("format tag {tag:#x} is not PCM")));
            }
            if channels != 1 {
                return Err(WavError::Unsupported(format!("{channels} channels, expected mono")));
            }
            if bits != 16 {
                return Err(WavError::Unsupported(format!("{bits}-bit samples, expected 16")));
            }
            if rate == 0 {
                return Err(WavError::MalformedHeader("sample rate is zero".into()));
            }
            if size % 2 != 0 {
                return Err(WavError::MalformedHeader("odd data chunk length".into()));
            }
            let samples = bytes[body..body + size]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                .collect();
            return Ok(Waveform::new(samples, rate));
        }
        // chunks are padded to even length
        pos = body + size + (size & 1);
    }
    Err(WavError::MalformedHeader("no data chunk".into()))
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => WavError::NotFound(path.display().to_string()),
        _ => WavError::Io(e),
    })?;
    decode_wav(&bytes)
}

pub fn save_wav(waveform: &Waveform, path: impl AsRef<Path>) -> Result<(), WavError> {
    let bytes = encode_wav(waveform)?;
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: &[u8; 4], tag: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(magic);
        b.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&tag.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&24000u32.to_le_bytes());
        b.extend_from_slice(&(24000u32 * 2).to_le_bytes());
        b.extend_from_slice(&2u16.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(data);
        b
    }

    #[test]
    fn single_sample_scaling() {
        let bytes = header(b"RIFF", 1, 1, 16, &16384i16.to_le_bytes());
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.samples, vec![0.5]);
        assert_eq!(w.sample_rate, 24000);
    }

    #[test]
    fn rifx_is_malformed() {
        let bytes = header(b"RIFX", 1, 1, 16, &[0, 0]);
        assert!(matches!(decode_wav(&bytes), Err(WavError::MalformedHeader(_))));
    }

    #[test]
    fn truncated_chunk_is_malformed() {
        let mut bytes = header(b"RIFF", 1, 1, 16, &[0, 0, 1, 0]);
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(decode_wav(&bytes), Err(WavError::MalformedHeader(_))));
    }

    #[test]
    fn unsupported_encodings() {
        let stereo = header(b"RIFF", 1, 2, 16, &[0, 0, 0, 0]);
        assert!(matches!(decode_wav(&stereo), Err(WavError::Unsupported(_))));
        let float = header(b"RIFF", 3, 1, 32, &[0, 0, 0, 0]);
        assert!(matches!(decode_wav(&float), Err(WavError::Unsupported(_))));
        let pcm8 = header(b"RIFF", 1, 1, 8, &[0, 0]);
        assert!(matches!(decode_wav(&pcm8), Err(WavError::Unsupported(_))));
    }

    #[test]
    fn missing_file() {
        let err = load_wav("/definitely/not/here.wav").unwrap_err();
        assert!(matches!(err, WavError::NotFound(_)));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]); // odd chunk plus pad byte
        let tail = header(b"RIFF", 1, 1, 16, &(-16384i16).to_le_bytes());
        bytes.extend_from_slice(&tail[12..]);
        let len = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&len.to_le_bytes());
        assert_eq!(decode_wav(&bytes).unwrap().samples, vec![-0.5]);
    }

    #[test]
    fn save_rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        assert!(save_wav(&Waveform::new(vec![], 24000), &p)
            .unwrap_err()
            .is_out_of_range());
        assert!(save_wav(&Waveform::new(vec![0.1, 1.5], 24000), &p)
            .unwrap_err()
            .is_out_of_range());
        assert!(save_wav(&Waveform::new(vec![f64::NAN], 24000), &p)
            .unwrap_err()
            .is_out_of_range());
    }

    #[test]
    fn full_scale_positive_clips_to_max_code() {
        let bytes = encode_wav(&Waveform::new(vec![1.0, -1.0], 16000)).unwrap();
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.samples, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn round_trip_random_signals_on_disk() {
        use rand::{Rng, SeedableRng};
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in 0..100 {
            let n = rng.random_range(1..2000);
            let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = Waveform::new(samples, 24000);
            let p = dir.path().join(format!("{k}.wav"));
            save_wav(&w, &p).unwrap();
            let back = load_wav(&p).unwrap();
            assert_eq!(back.sample_rate, 24000);
            assert_eq!(back.len(), w.len());
            for (a, b) in w.samples.iter().zip(&back.samples) {
                assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_within_one_lsb(samples in proptest::collection::vec(-1.0f64..1.0, 1..256), rate in 1u32..96000) {
            let w = Waveform::new(samples, rate);
            let back = decode_wav(&encode_wav(&w).unwrap()).unwrap();
            prop_assert_eq!(back.sample_rate, rate);
            for (a, b) in w.samples.iter().zip(&back.samples) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}

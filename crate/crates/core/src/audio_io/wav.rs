//! Minimal RIFF/WAVE codec: PCM16 and IEEE float32, any channel count.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xfffe;

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn format_err(chunk: &str, reason: impl Into<String>) -> AudioError {
    AudioError::Format {
        chunk: chunk.to_string(),
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(format_err(
            "fmt ",
            format!("expected at least 16 bytes, found {}", body.len()),
        ));
    }
    let mut format_tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if format_tag == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(format_err("fmt ", "truncated WAVE_FORMAT_EXTENSIBLE block"));
        }
        // The first two bytes of the sub-format GUID carry the real tag.
        format_tag = u16_at(body, 24);
    }
    if channels == 0 {
        return Err(format_err("fmt ", "zero channels"));
    }
    if sample_rate == 0 {
        return Err(format_err("fmt ", "zero sample rate"));
    }
    Ok(FmtChunk {
        format_tag,
        channels,
        sample_rate,
        bits,
    })
}

/// Decodes a WAV file into a mono clip.
///
/// Multi-channel audio is downmixed by the per-frame channel mean and PCM16
/// samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes, &path.display().to_string())
}

pub(crate) fn decode_wav(bytes: &[u8], source_id: &str) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(format_err("RIFF", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(format_err("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(format_err("RIFF", "form type is not WAVE"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let name = String::from_utf8_lossy(id).into_owned();
        let body_end = body_start.saturating_add(size);
        if body_end > bytes.len() {
            // Some writers leave a bogus size on a trailing data chunk; take
            // what is there rather than refusing the file.
            if id == b"data" {
                data = Some(&bytes[body_start..]);
                break;
            }
            return Err(format_err(
                &name,
                format!(
                    "declares {size} bytes but only {} remain",
                    bytes.len() - body_start
                ),
            ));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| format_err("fmt ", "chunk not found"))?;
    let data = data.ok_or_else(|| format_err("data", "chunk not found"))?;

    let channels = usize::from(fmt.channels);
    let interleaved: Vec<f32> = match (fmt.format_tag, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                format_tag: tag,
                bits,
            })
        }
    };
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(format_err("data", "non-finite float sample"));
    }
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(format_err("data", "no complete sample frames"));
    }
    let inv = 1.0 / channels as f32;
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().sum::<f32>() * inv).clamp(-1.0, 1.0))
        .collect();
    AudioClip::new(samples, fmt.sample_rate, source_id)
}

fn write_riff(
    path: &Path,
    format_tag: u16,
    bits: u16,
    sample_rate: u32,
    payload: &[u8],
) -> Result<(), AudioError> {
    let block_align = bits / 8;
    let mut out = Vec::with_capacity(44 + payload.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + payload.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    let io = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&out).map_err(io)
}

/// Writes a mono PCM16 file. Samples are rounded to the nearest step of
/// 1/32768 and saturated at the i16 range.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let payload: Vec<u8> = clip
        .samples()
        .iter()
        .flat_map(|&s| {
            let q = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            q.to_le_bytes()
        })
        .collect();
    write_riff(path.as_ref(), FORMAT_PCM, 16, clip.sample_rate(), &payload)
}

/// Writes a mono IEEE float32 file.
pub fn write_wav_f32(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let payload: Vec<u8> = clip
        .samples()
        .iter()
        .flat_map(|s| s.to_le_bytes())
        .collect();
    write_riff(path.as_ref(), FORMAT_FLOAT, 32, clip.sample_rate(), &payload)
}

//! `.olnt` model files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "OLNT" | u32 version | u32 param_count | u32 desc_len | desc (UTF-8)
//!        | f64 norm_min | f64 norm_max | f32 weights[param_count]
//! ```
//!
//! `desc` is the architecture's one-line description, optionally followed by
//! a ` threshold=<value>` token.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{count_params, ArchError, ArchSpec};
use crate::nn::{Network, NnError};

pub const BUNDLE_MAGIC: &[u8; 4] = b"OLNT";
pub const BUNDLE_VERSION: u32 = 1;
/// Magic, version, parameter count, description length and the two f64
/// normalisation bounds.
pub const FIXED_HEADER_BYTES: usize = 4 + 4 + 4 + 4 + 8 + 8;

const THRESHOLD_KEY: &str = "threshold=";

/// Min/max of the training log-Mel values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub arch: ArchSpec,
    pub weights: Vec<f32>,
    pub norm: NormStats,
    pub threshold: Option<f64>,
    pub format_version: u32,
}

impl ModelBundle {
    pub fn new(arch: ArchSpec, weights: Vec<f32>, norm: NormStats) -> Result<Self, ArchError> {
        let expected = count_params(&arch);
        if weights.len() != expected {
            return Err(ArchError::WeightCountMismatch {
                expected,
                found: weights.len(),
            });
        }
        if !(norm.min < norm.max) || !norm.min.is_finite() || !norm.max.is_finite() {
            return Err(ArchError::Invalid(format!(
                "normalisation stats need finite min < max, got {} / {}",
                norm.min, norm.max
            )));
        }
        Ok(Self {
            arch,
            weights,
            norm,
            threshold: None,
            format_version: BUNDLE_VERSION,
        })
    }

    pub fn network(&self) -> Result<Network<f32>, NnError> {
        Network::from_flat(self.arch.layers().to_vec(), self.arch.input_shape(), &self.weights)
    }

    fn description(&self) -> String {
        match self.threshold {
            Some(t) => format!("{} {THRESHOLD_KEY}{t:?}", self.arch.describe()),
            None => self.arch.describe(),
        }
    }

    pub fn header_bytes(&self) -> usize {
        FIXED_HEADER_BYTES + self.description().len()
    }

    /// Exact on-disk size.
    pub fn file_bytes(&self) -> usize {
        self.header_bytes() + 4 * self.weights.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let desc = self.description();
        let mut out = Vec::with_capacity(self.file_bytes());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
        out.extend_from_slice(desc.as_bytes());
        out.extend_from_slice(&self.norm.min.to_le_bytes());
        out.extend_from_slice(&self.norm.max.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if &magic != BUNDLE_MAGIC {
            return Err(ArchError::BadMagic(magic));
        }
        let version = r.u32("version")?;
        if version != BUNDLE_VERSION {
            return Err(ArchError::VersionMismatch {
                found: version,
                expected: BUNDLE_VERSION,
            });
        }
        let declared = r.u32("parameter count")? as usize;
        let desc_len = r.u32("description length")? as usize;
        let desc = std::str::from_utf8(r.take(desc_len, "architecture description")?)
            .map_err(|_| ArchError::Invalid("description is not UTF-8".into()))?;
        let (arch_text, threshold) = split_threshold(desc)?;
        let arch = ArchSpec::parse_description(arch_text)?;
        let min = f64::from_le_bytes(r.take(8, "normalisation min")?.try_into().unwrap());
        let max = f64::from_le_bytes(r.take(8, "normalisation max")?.try_into().unwrap());

        let expected = count_params(&arch);
        if declared != expected {
            return Err(ArchError::WeightCountMismatch {
                expected,
                found: declared,
            });
        }
        let payload = &bytes[r.pos..];
        if payload.len() != 4 * expected {
            return Err(ArchError::WeightCountMismatch {
                expected,
                found: payload.len() / 4,
            });
        }
        let weights = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut bundle = ModelBundle::new(arch, weights, NormStats { min, max })?;
        bundle.threshold = threshold;
        bundle.format_version = version;
        Ok(bundle)
    }
}

fn split_threshold(desc: &str) -> Result<(&str, Option<f64>), ArchError> {
    match desc.rsplit_once(' ') {
        Some((head, last)) if last.starts_with(THRESHOLD_KEY) => {
            let v = last[THRESHOLD_KEY.len()..]
                .parse::<f64>()
                .map_err(|_| ArchError::Invalid(format!("bad threshold token `{last}`")))?;
            Ok((head, Some(v)))
        }
        _ => Ok((desc, None)),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ArchError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(ArchError::Truncated(format!("file ends inside the {what}"))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, ArchError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Writes a bundle via a temporary file and rename.
pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), ArchError> {
    let path = path.as_ref();
    let io = |source| ArchError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("olnt.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&bundle.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle, ArchError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ArchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ModelBundle::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{make_template, Family};

    fn bundle() -> ModelBundle {
        let arch = make_template(Family::FanConv, 0.5, 2, None).unwrap();
        let n = count_params(&arch);
        let weights = (0..n).map(|i| (i as f32 * 0.37).sin()).collect();
        ModelBundle::new(arch, weights, NormStats { min: -10.0, max: 2.5 }).unwrap()
    }

    #[test]
    fn bytes_roundtrip_and_size() {
        let mut b = bundle();
        let bytes = b.to_bytes();
        assert_eq!(bytes.len(), b.file_bytes());
        assert_eq!(bytes.len(), 4 * b.weights.len() + FIXED_HEADER_BYTES + b.arch.describe().len());
        assert_eq!(ModelBundle::from_bytes(&bytes).unwrap(), b);

        b.threshold = Some(0.012_345_678_9);
        let back = ModelBundle::from_bytes(&b.to_bytes()).unwrap();
        assert_eq!(back.threshold, b.threshold);
        assert_eq!(back, b);
    }

    #[test]
    fn load_errors_are_distinct() {
        let bytes = bundle().to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(ModelBundle::from_bytes(&bad), Err(ArchError::BadMagic(_))));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            ModelBundle::from_bytes(&bad),
            Err(ArchError::VersionMismatch { found: 9, .. })
        ));

        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(
            ModelBundle::from_bytes(truncated),
            Err(ArchError::WeightCountMismatch { .. })
        ));

        let mut bad = bytes.clone();
        bad[8] = bad[8].wrapping_add(1);
        assert!(matches!(
            ModelBundle::from_bytes(&bad),
            Err(ArchError::WeightCountMismatch { .. })
        ));

        assert!(matches!(
            ModelBundle::from_bytes(&bytes[..20]),
            Err(ArchError::Truncated(_))
        ));
    }

    #[test]
    fn invariants_checked_on_construction() {
        let arch = make_template(Family::FanConv, 0.5, 2, None).unwrap();
        let n = count_params(&arch);
        assert!(ModelBundle::new(arch.clone(), vec![0.0; n - 1], NormStats { min: 0.0, max: 1.0 }).is_err());
        assert!(ModelBundle::new(arch, vec![0.0; n], NormStats { min: 1.0, max: 1.0 }).is_err());
    }
}

//! A trained model together with everything needed to use it, and its file
//! format.
//!
//! ```text
//! tsmps-model <version>\n
//! header-bytes <n>\n
//! <n bytes of TOML: shapes, preprocessor, feature map, training config, payload digest>
//! payload-bytes <m>\n
//! <m bytes: every site tensor, row-major, little-endian f64>
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::{FeatureMap, FeatureMapSpec, Preprocessor};
use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::tensor::DenseTensor;
use crate::trainer::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "tsmps-model";

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub mps: Mps,
    pub preprocessor: Preprocessor,
    pub feature_map: FeatureMap,
    pub config: TrainConfig,
    pub format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct Header {
    length: usize,
    d: usize,
    n_labels: usize,
    label_site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ortho_center: Option<usize>,
    site_shapes: Vec<[usize; 4]>,
    payload_sha256: String,
    preprocessor: Preprocessor,
    feature_map: FeatureMapSpec,
    train_config: TrainConfig,
}

impl ModelBundle {
    pub fn new(mps: Mps, preprocessor: Preprocessor, feature_map: FeatureMap, config: TrainConfig) -> Result<Self> {
        if mps.d() != feature_map.d() {
            return Err(Error::Dimension(format!(
                "model has d={} but the feature map has d={}",
                mps.d(),
                feature_map.d()
            )));
        }
        Ok(Self {
            mps,
            preprocessor,
            feature_map,
            config,
            format_version: FORMAT_VERSION,
        })
    }

    pub fn series_len(&self) -> usize {
        self.mps.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        for s in self.mps.sites() {
            for v in s.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            length: self.mps.len(),
            d: self.mps.d(),
            n_labels: self.mps.n_labels(),
            label_site: self.mps.label_site(),
            ortho_center: self.mps.ortho_center(),
            site_shapes: self
                .mps
                .sites()
                .iter()
                .map(|s| [s.shape()[0], s.shape()[1], s.shape()[2], s.shape()[3]])
                .collect(),
            payload_sha256: hex::encode(Sha256::digest(&payload)),
            preprocessor: self.preprocessor.clone(),
            feature_map: self.feature_map.spec(),
            train_config: self.config.clone(),
        };
        let header = toml::to_string(&header).expect("model header serializes");
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\nheader-bytes {}\n", header.len()).into_bytes();
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(format!("payload-bytes {}\n", payload.len()).as_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let first = cur.line()?;
        let version = first
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Parse("not a model file".into()))?
            .parse::<u32>()
            .map_err(|_| Error::Parse("bad format version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = cur.counted("header-bytes")?;
        let header = std::str::from_utf8(cur.take(header_len)?).map_err(|_| Error::Parse("header is not UTF-8".into()))?;
        let header: Header = toml::from_str(header).map_err(|e| Error::Parse(format!("model header: {e}")))?;
        let payload_len = cur.counted("payload-bytes")?;
        let payload = cur.take(payload_len)?;
        if cur.pos != bytes.len() {
            return Err(Error::Parse("trailing bytes after payload".into()));
        }
        if hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
            return Err(Error::Parse("payload checksum mismatch".into()));
        }
        let expected: usize = header.site_shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if payload.len() != expected * 8 || header.site_shapes.len() != header.length {
            return Err(Error::Parse("payload size does not match site shapes".into()));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let sites = header
            .site_shapes
            .iter()
            .map(|sh| DenseTensor::new(sh.to_vec(), values.by_ref().take(sh.iter().product()).collect()))
            .collect::<Result<Vec<_>>>()?;
        let mut mps = Mps::from_sites(sites, header.n_labels, header.label_site)
            .map_err(|e| Error::Parse(format!("inconsistent tensors: {e}")))?;
        if mps.d() != header.d {
            return Err(Error::Parse("physical dimension disagrees with site shapes".into()));
        }
        mps.ortho_center = header.ortho_center;
        let feature_map = FeatureMap::from_spec(header.feature_map)?;
        Self::new(mps, header.preprocessor, feature_map, header.train_config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Parse("truncated model file".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::Parse("malformed model file".into()))
    }

    fn counted(&mut self, key: &str) -> Result<usize> {
        self.line()?
            .strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("expected `{key} <n>`")))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Parse("truncated model file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::PreprocessKind;

    fn bundle() -> ModelBundle {
        let mps = Mps::random_init(5, 3, 4, 2, 17).unwrap();
        let pre = Preprocessor::fit(&[0.1, 0.7, -2.3, 4.4, 1.0 / 3.0], PreprocessKind::RobustSigmoid, (-1.0, 1.0)).unwrap();
        let fm = FeatureMap::with_grid(3, 64).unwrap();
        let cfg = TrainConfig { d: 3, eta: 0.1 / 3.0, loss_tolerance: Some(1e-7), ..Default::default() };
        ModelBundle::new(mps, pre, fm, cfg).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsmps");
        b.save(&path).unwrap();
        let back = ModelBundle::load(&path).unwrap();
        assert_eq!(back.mps, b.mps);
        assert_eq!(back.preprocessor, b.preprocessor);
        assert_eq!(back.config, b.config);
        assert_eq!(back.feature_map.spec(), b.feature_map.spec());
        assert_eq!(back.format_version, FORMAT_VERSION);
        assert_eq!(back.to_bytes(), b.to_bytes());
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let bytes = bundle().to_bytes();
        for cut in [5, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(ModelBundle::from_bytes(&bytes[..cut]), Err(Error::Parse(_))), "cut at {cut}");
        }
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = bundle().to_bytes();
        let pos = bytes.iter().position(|&b| b == b'\n').unwrap();
        bytes.splice(..pos, b"tsmps-model 2".iter().copied());
        assert!(matches!(
            ModelBundle::from_bytes(&bytes),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn corrupted_payload_is_detected() {
        let mut bytes = bundle().to_bytes();
        let last = bytes.len() - 3;
        bytes[last] ^= 0x40;
        assert!(matches!(ModelBundle::from_bytes(&bytes), Err(Error::Parse(_))));
    }

    #[test]
    fn mismatched_feature_map_is_rejected() {
        let b = bundle();
        let fm = FeatureMap::with_grid(4, 64).unwrap();
        assert!(matches!(
            ModelBundle::new(b.mps, b.preprocessor, fm, b.config),
            Err(Error::Dimension(_))
        ));
    }
}

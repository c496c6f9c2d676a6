//! Binary interchange format for frozen-backbone feature vectors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "PADEMB\0\x01"
//! version      u32       1
//! dim          u32
//! n            u32       number of samples
//! replicas     u32       augmented rows stored after each clean row
//! backbone_id  u16 length + UTF-8 bytes
//! sample_ids   n x (u16 length + UTF-8 bytes)
//! payload      n * (1 + replicas) * dim f32, row-major; per sample the clean
//!              row comes first, then its augmented rows
//! ```

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use thiserror::Error;

use crate::manifest::{Label, Manifest, PaiSpecies, Partition};

pub const MAGIC: [u8; 8] = *b"PADEMB\x00\x01";
pub const FORMAT_VERSION: u32 = 1;

/// Output widths of the backbones the extractor knows about.
pub const KNOWN_BACKBONES: [(&str, usize); 6] = [
    ("dinov2-vits14", 384),
    ("dinov2-vitb14", 768),
    ("dinov2-vitl14", 1024),
    ("clip-vit-b32", 512),
    ("clip-vit-b16", 512),
    ("clip-vit-l14", 768),
];

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("bad magic bytes {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("truncated payload: {what} needs bytes {start}..{end} but file has {len} bytes")]
    TruncatedPayload {
        what: &'static str,
        start: u64,
        end: u64,
        len: u64,
    },
    #[error("dimension mismatch for `{backbone}`: expected {expected}, found {found}")]
    DimMismatch {
        backbone: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid UTF-8 in {what} at byte {offset}")]
    InvalidString { what: &'static str, offset: u64 },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(u64),
    #[error("no embedding for sample `{0}`")]
    MissingEmbedding(String),
}

/// Expected output width for a recognised backbone id. Ids may carry a
/// checkpoint suffix, e.g. `clip-vit-l14-laion400m_e32`.
pub fn expected_dim(backbone_id: &str) -> Option<usize> {
    let id = backbone_id.to_ascii_lowercase();
    KNOWN_BACKBONES.iter().find_map(|(name, dim)| {
        let rest = id.strip_prefix(name)?;
        (rest.is_empty() || rest.starts_with('-') || rest.starts_with('_')).then_some(*dim)
    })
}

/// Feature matrix for `n` samples, each with one clean row and
/// `augmented_replicas` augmented rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub backbone_id: String,
    pub dim: usize,
    pub sample_ids: Vec<String>,
    /// Row-major, `n * (1 + augmented_replicas)` rows of `dim` values.
    pub vectors: Vec<f32>,
    pub augmented_replicas: usize,
}

impl EmbeddingSet {
    pub fn rows_per_sample(&self) -> usize {
        1 + self.augmented_replicas
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_samples() * self.rows_per_sample()
    }

    /// `replica == 0` is the clean row.
    pub fn row(&self, sample: usize, replica: usize) -> &[f32] {
        let r = sample * self.rows_per_sample() + replica;
        &self.vectors[r * self.dim..(r + 1) * self.dim]
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::InvariantViolation(
                "dim must be positive".into(),
            ));
        }
        if self.vectors.len() != self.n_rows() * self.dim {
            return Err(EmbeddingError::InvariantViolation(format!(
                "{} values for {} samples x {} rows x dim {}",
                self.vectors.len(),
                self.n_samples(),
                self.rows_per_sample(),
                self.dim
            )));
        }
        if let Some(i) = self.vectors.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvariantViolation(format!(
                "non-finite value at row {} column {}",
                i / self.dim,
                i % self.dim
            )));
        }
        if let Some(expected) = expected_dim(&self.backbone_id) {
            if expected != self.dim {
                return Err(EmbeddingError::DimMismatch {
                    backbone: self.backbone_id.clone(),
                    expected,
                    found: self.dim,
                });
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(self.sample_ids.len());
        for id in &self.sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::InvariantViolation(format!(
                    "duplicate sample id `{id}`"
                )));
            }
        }
        for s in std::iter::once(&self.backbone_id).chain(&self.sample_ids) {
            if s.len() > u16::MAX as usize {
                return Err(EmbeddingError::InvariantViolation(format!(
                    "string of {} bytes exceeds u16 length prefix",
                    s.len()
                )));
            }
        }
        for v in [self.dim, self.n_samples(), self.augmented_replicas] {
            if v > u32::MAX as usize {
                return Err(EmbeddingError::InvariantViolation(format!(
                    "header field {v} exceeds u32"
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbeddingError> {
        self.validate()?;
        let mut out = Vec::with_capacity(32 + self.vectors.len() * 4);
        self.write_to(&mut out)?;
        Ok(out)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u32::<LittleEndian>(self.n_samples() as u32)?;
        w.write_u32::<LittleEndian>(self.augmented_replicas as u32)?;
        write_str(w, &self.backbone_id)?;
        for id in &self.sample_ids {
            write_str(w, id)?;
        }
        for v in &self.vectors {
            w.write_f32::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(EmbeddingError::BadMagic {
                found: magic.to_vec(),
            });
        }
        let version = cur.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(EmbeddingError::VersionUnsupported(version));
        }
        let dim = cur.u32("dim")? as usize;
        let n = cur.u32("sample count")? as usize;
        let replicas = cur.u32("replica count")? as usize;
        if dim == 0 {
            return Err(EmbeddingError::InvariantViolation(
                "dim must be positive".into(),
            ));
        }
        let backbone_id = cur.string("backbone id")?;
        if let Some(expected) = expected_dim(&backbone_id) {
            if expected != dim {
                return Err(EmbeddingError::DimMismatch {
                    backbone: backbone_id,
                    expected,
                    found: dim,
                });
            }
        }

        // Each id needs at least its 2-byte prefix; check before allocating.
        cur.require(n as u64 * 2, "sample id table")?;
        let mut sample_ids = Vec::with_capacity(n);
        for _ in 0..n {
            sample_ids.push(cur.string("sample id")?);
        }

        let n_values = (n as u64)
            .checked_mul(1 + replicas as u64)
            .and_then(|rows| rows.checked_mul(dim as u64))
            .ok_or_else(|| EmbeddingError::InvariantViolation("payload size overflows".into()))?;
        let payload = cur.take_u64(n_values.saturating_mul(4), "payload")?;
        let mut vectors = vec![0f32; n_values as usize];
        LittleEndian::read_f32_into(payload, &mut vectors);

        let trailing = bytes.len() - cur.pos;
        if trailing > 0 {
            return Err(EmbeddingError::TrailingBytes(trailing as u64));
        }
        let set = EmbeddingSet {
            backbone_id,
            dim,
            sample_ids,
            vectors,
            augmented_replicas: replicas,
        };
        set.validate()?;
        Ok(set)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u16::<LittleEndian>(s.len() as u16)?;
    w.write_all(s.as_bytes())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn require(&self, len: u64, what: &'static str) -> Result<(), EmbeddingError> {
        let end = self.pos as u64 + len;
        if end > self.bytes.len() as u64 {
            return Err(EmbeddingError::TruncatedPayload {
                what,
                start: self.pos as u64,
                end,
                len: self.bytes.len() as u64,
            });
        }
        Ok(())
    }

    fn take_u64(&mut self, len: u64, what: &'static str) -> Result<&'a [u8], EmbeddingError> {
        self.require(len, what)?;
        let start = self.pos;
        self.pos += len as usize;
        Ok(&self.bytes[start..self.pos])
    }

    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8], EmbeddingError> {
        self.take_u64(len as u64, what)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, EmbeddingError> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    fn string(&mut self, what: &'static str) -> Result<String, EmbeddingError> {
        let len = LittleEndian::read_u16(self.take(2, what)?) as usize;
        let offset = self.pos as u64;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| EmbeddingError::InvalidString { what, offset })
    }
}

/// Validates and writes `set` to `path`.
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let bytes = set.to_bytes()?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet, EmbeddingError> {
    let bytes = std::fs::read(path)?;
    EmbeddingSet::from_bytes(&bytes)
}

/// Identity of one sample in an aligned dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMeta {
    pub sample_id: String,
    pub label: Label,
    pub pai_species: PaiSpecies,
}

/// Features and labels for one partition, rows in manifest order.
/// Values are promoted to `f64` for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub replicas: usize,
    pub samples: Vec<SampleMeta>,
    /// `samples.len() x dim`, clean rows only.
    pub clean: Vec<f64>,
    /// `samples.len() x replicas x dim`, grouped by sample.
    pub augmented: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clean_row(&self, i: usize) -> &[f64] {
        &self.clean[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        f64::from(self.samples[i].label.target())
    }

    /// Rows used for training: every clean row followed by every augmented row.
    pub fn n_training_rows(&self) -> usize {
        self.len() * (1 + self.replicas)
    }

    /// `(features, target)` of training row `k` in `0..n_training_rows()`.
    pub fn training_row(&self, k: usize) -> (&[f64], f64) {
        let n = self.len();
        if k < n {
            (self.clean_row(k), self.target(k))
        } else {
            let a = k - n;
            let sample = a / self.replicas;
            (
                &self.augmented[a * self.dim..(a + 1) * self.dim],
                self.target(sample),
            )
        }
    }

    pub fn has_both_classes(&self) -> bool {
        let bf = self.samples.iter().any(|s| s.label == Label::BonaFide);
        let at = self.samples.iter().any(|s| s.label == Label::Attack);
        bf && at
    }

    /// Builds a dataset directly from clean rows (no augmentation).
    pub fn from_rows(dim: usize, samples: Vec<SampleMeta>, clean: Vec<f64>) -> Self {
        assert_eq!(
            clean.len(),
            samples.len() * dim,
            "row data does not match dim"
        );
        Dataset {
            dim,
            replicas: 0,
            samples,
            clean,
            augmented: Vec::new(),
        }
    }
}

/// Aligns the manifest's `partition` records with their embeddings.
pub fn join(
    manifest: &Manifest,
    set: &EmbeddingSet,
    partition: Partition,
) -> Result<Dataset, EmbeddingError> {
    let index: HashMap<&str, usize> = set
        .sample_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut samples = Vec::new();
    let mut clean = Vec::new();
    let mut augmented = Vec::new();
    for rec in manifest.partition(partition) {
        let &i = index
            .get(rec.sample_id.as_str())
            .ok_or_else(|| EmbeddingError::MissingEmbedding(rec.sample_id.clone()))?;
        samples.push(SampleMeta {
            sample_id: rec.sample_id.clone(),
            label: rec.label,
            pai_species: rec.pai_species.clone(),
        });
        clean.extend(set.row(i, 0).iter().map(|&v| f64::from(v)));
        for rep in 1..=set.augmented_replicas {
            augmented.extend(set.row(i, rep).iter().map(|&v| f64::from(v)));
        }
    }
    Ok(Dataset {
        dim: set.dim,
        replicas: set.augmented_replicas,
        samples,
        clean,
        augmented,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, dim: usize, r: usize) -> EmbeddingSet {
        EmbeddingSet {
            backbone_id: "test".into(),
            dim,
            sample_ids: (0..n).map(|i| format!("s{i}")).collect(),
            vectors: (0..n * (1 + r) * dim).map(|v| v as f32 * 0.5).collect(),
            augmented_replicas: r,
        }
    }

    fn header_len(s: &EmbeddingSet) -> usize {
        8 + 16 + 2 + s.backbone_id.len() + s.sample_ids.iter().map(|i| 2 + i.len()).sum::<usize>()
    }

    #[test]
    fn single_zero_vector_size() {
        let s = EmbeddingSet {
            backbone_id: "test".into(),
            dim: 2,
            sample_ids: vec!["a".into()],
            vectors: vec![0.0, 0.0],
            augmented_replicas: 0,
        };
        let bytes = s.to_bytes().unwrap();
        assert_eq!(bytes.len(), header_len(&s) + 8);
    }

    #[test]
    fn payload_size_with_replicas() {
        let s = set(3, 4, 1);
        let bytes = s.to_bytes().unwrap();
        // n(1+r) * d * 4
        assert_eq!(bytes.len() - header_len(&s), 96);
    }

    #[test]
    fn nan_is_rejected() {
        let mut s = set(1, 2, 0);
        s.vectors[1] = f32::NAN;
        assert!(matches!(
            s.to_bytes(),
            Err(EmbeddingError::InvariantViolation(_))
        ));
        s.vectors[1] = f32::INFINITY;
        assert!(matches!(
            s.to_bytes(),
            Err(EmbeddingError::InvariantViolation(_))
        ));
    }

    #[test]
    fn truncated_mid_payload() {
        let bytes = set(2, 3, 0).to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(
            EmbeddingSet::from_bytes(cut),
            Err(EmbeddingError::TruncatedPayload {
                what: "payload",
                ..
            })
        ));
    }

    #[test]
    fn short_payload_reports_offsets() {
        // Header claims a dinov2-vitb14 set (dim 768) but carries 10 floats.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        for v in [1u32, 768, 1, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let id = b"dinov2-vitb14";
        bytes.extend_from_slice(&(id.len() as u16).to_le_bytes());
        bytes.extend_from_slice(id);
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(b'x');
        let payload_start = bytes.len() as u64;
        bytes.extend_from_slice(&[0u8; 40]);
        let err = EmbeddingSet::from_bytes(&bytes).unwrap_err();
        match &err {
            EmbeddingError::TruncatedPayload {
                start, end, len, ..
            } => {
                assert_eq!(*start, payload_start);
                assert_eq!(*end, payload_start + 768 * 4);
                assert_eq!(*len, payload_start + 40);
            }
            other => panic!("unexpected {other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains(&payload_start.to_string()), "{msg}");
        assert!(msg.contains(&(payload_start + 3072).to_string()), "{msg}");
    }

    #[test]
    fn known_backbone_dims() {
        assert_eq!(expected_dim("dinov2-vitb14"), Some(768));
        assert_eq!(expected_dim("clip-vit-l14-laion400m_e32"), Some(768));
        assert_eq!(expected_dim("CLIP-ViT-B32"), Some(512));
        assert_eq!(expected_dim("dinov2-vitb140"), None);
        assert_eq!(expected_dim("synthetic"), None);
        let mut s = set(1, 16, 0);
        s.backbone_id = "dinov2-vits14".into();
        assert!(matches!(
            s.to_bytes(),
            Err(EmbeddingError::DimMismatch {
                expected: 384,
                found: 16,
                ..
            })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = set(1, 1, 0).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingSet::from_bytes(&bytes),
            Err(EmbeddingError::BadMagic { .. })
        ));
        let mut bytes = set(1, 1, 0).to_bytes().unwrap();
        bytes[8] = 2;
        assert!(matches!(
            EmbeddingSet::from_bytes(&bytes),
            Err(EmbeddingError::VersionUnsupported(2))
        ));
    }

    #[test]
    fn rows_are_clean_then_augmented() {
        let s = set(2, 2, 2);
        assert_eq!(s.row(1, 0), &[3.0, 3.5]);
        assert_eq!(s.row(1, 2), &[5.0, 5.5]);
    }
}

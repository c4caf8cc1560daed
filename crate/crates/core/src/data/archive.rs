//! Versioned binary container for trained artifacts.
//!
//! Layout: magic `XMRB`, u32 format version, u32 payload tag, u64 payload
//! length, payload, u32 CRC-32 of the payload bytes. Integers and floats
//! are little-endian; matrices are stored row-major as IEEE-754 doubles.

use std::path::Path;

use super::wire::{Reader, Writer};
use super::DataError;
use crate::bank::{RbmBank, Regime};
use crate::features::{GaborBankSpec, WarpModel};
use crate::head::ProjectionHead;
use crate::multimodal::MultiModalRbmParams;
use crate::rbm::{GaussianNormalizer, WhiteningKind};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"XMRB";
pub const ARCHIVE_VERSION: u32 = 1;

const TAG_RBM_BANK: u32 = 1;
const TAG_PROJECTION_HEAD: u32 = 2;
const TAG_GABOR_BANK_SPEC: u32 = 3;
const TAG_WARP_MODEL: u32 = 4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArchiveError {
    #[error("not a model archive (bad magic)")]
    BadMagic,
    #[error("unsupported archive version {0} (this build reads version {ARCHIVE_VERSION})")]
    UnsupportedVersion(u32),
    #[error("unknown payload tag {0}")]
    UnknownTag(u32),
    #[error("archive truncated")]
    Truncated,
    #[error("payload checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("{0} unexpected bytes after the archive")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelArchive {
    RbmBank(RbmBank),
    ProjectionHead(ProjectionHead),
    GaborBankSpec(GaborBankSpec),
    WarpModel(WarpModel),
}

impl ModelArchive {
    fn tag(&self) -> u32 {
        match self {
            ModelArchive::RbmBank(_) => TAG_RBM_BANK,
            ModelArchive::ProjectionHead(_) => TAG_PROJECTION_HEAD,
            ModelArchive::GaborBankSpec(_) => TAG_GABOR_BANK_SPEC,
            ModelArchive::WarpModel(_) => TAG_WARP_MODEL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelArchive::RbmBank(_) => "rbm bank",
            ModelArchive::ProjectionHead(_) => "projection head",
            ModelArchive::GaborBankSpec(_) => "gabor bank spec",
            ModelArchive::WarpModel(_) => "warp model",
        }
    }
}

fn write_normalizer(w: &mut Writer, n: &GaussianNormalizer) {
    w.u8(match n.kind {
        WhiteningKind::Zca => 0,
        WhiteningKind::Wpca => 1,
    });
    w.vector(&n.mean);
    w.matrix(&n.transform);
}

fn read_normalizer(r: &mut Reader) -> Result<GaussianNormalizer, ArchiveError> {
    let kind = match r.u8()? {
        0 => WhiteningKind::Zca,
        1 => WhiteningKind::Wpca,
        k => {
            return Err(ArchiveError::Malformed(format!(
                "unknown whitening kind {k}"
            )))
        }
    };
    let mean = r.vector()?;
    let transform = r.matrix()?;
    if transform.nrows() != mean.len() || transform.ncols() != mean.len() {
        return Err(ArchiveError::Malformed(
            "normalizer transform is not square in the mean's dimension".into(),
        ));
    }
    Ok(GaussianNormalizer {
        mean,
        transform,
        kind,
    })
}

fn write_payload(w: &mut Writer, a: &ModelArchive) {
    match a {
        ModelArchive::RbmBank(b) => {
            w.u8(b.regime.tag());
            w.len(b.jet_dim);
            w.len(b.normalizers.len());
            for pair in &b.normalizers {
                write_normalizer(w, &pair[0]);
                write_normalizer(w, &pair[1]);
            }
            w.len(b.rbms.len());
            for m in &b.rbms {
                w.vector(&m.bias_a);
                w.vector(&m.bias_b);
                w.vector(&m.hidden_bias);
                w.matrix(&m.weights_a);
                w.matrix(&m.weights_b);
            }
        }
        ModelArchive::ProjectionHead(h) => {
            w.vector(&h.mean);
            w.matrix(&h.basis);
            w.vector(&h.eigenvalues);
            w.len(h.removed_k);
        }
        ModelArchive::GaborBankSpec(s) => {
            w.len(s.n_orientations);
            w.len(s.n_scales);
            w.f64(s.k_max);
            w.f64(s.k_step);
            w.f64(s.sigma);
            w.len(s.patch_radius);
        }
        ModelArchive::WarpModel(m) => {
            w.len(m.control_src.len());
            for p in m.control_src.iter().chain(&m.control_dst) {
                w.f64(p[0]);
                w.f64(p[1]);
            }
            w.f64(m.kernel_width);
            w.matrix(&m.rbf_weights);
            w.matrix(&m.affine);
        }
    }
}

fn read_count(r: &mut Reader) -> Result<usize, ArchiveError> {
    let v = r.u64()?;
    usize::try_from(v).map_err(|_| ArchiveError::Malformed(format!("count {v} out of range")))
}

fn read_payload(tag: u32, r: &mut Reader) -> Result<ModelArchive, ArchiveError> {
    let malformed = |e: &dyn std::fmt::Display| ArchiveError::Malformed(e.to_string());
    match tag {
        TAG_RBM_BANK => {
            let regime = Regime::from_tag(r.u8()?)
                .ok_or_else(|| ArchiveError::Malformed("unknown regime".into()))?;
            let jet_dim = read_count(r)?;
            // each normalizer occupies at least 1 + 3*8 bytes
            let points = r.len(2 * 25)?;
            let mut normalizers = Vec::with_capacity(points);
            for _ in 0..points {
                normalizers.push([read_normalizer(r)?, read_normalizer(r)?]);
            }
            let count = r.len(5 * 8)?;
            let mut rbms = Vec::with_capacity(count);
            for _ in 0..count {
                let bias_a = r.vector()?;
                let bias_b = r.vector()?;
                let hidden_bias = r.vector()?;
                let weights_a = r.matrix()?;
                let weights_b = r.matrix()?;
                let n = hidden_bias.len();
                if weights_a.shape() != (bias_a.len(), n) || weights_b.shape() != (bias_b.len(), n)
                {
                    return Err(ArchiveError::Malformed(
                        "rbm weight shape does not match biases".into(),
                    ));
                }
                rbms.push(MultiModalRbmParams {
                    bias_a,
                    bias_b,
                    hidden_bias,
                    weights_a,
                    weights_b,
                });
            }
            let bank = RbmBank {
                regime,
                rbms,
                normalizers,
                jet_dim,
            };
            bank.validate().map_err(|e| malformed(&e))?;
            Ok(ModelArchive::RbmBank(bank))
        }
        TAG_PROJECTION_HEAD => {
            let mean = r.vector()?;
            let basis = r.matrix()?;
            let eigenvalues = r.vector()?;
            let removed_k = read_count(r)?;
            let head = ProjectionHead {
                mean,
                basis,
                eigenvalues,
                removed_k,
            };
            head.validate().map_err(|e| malformed(&e))?;
            Ok(ModelArchive::ProjectionHead(head))
        }
        TAG_GABOR_BANK_SPEC => {
            let spec = GaborBankSpec {
                n_orientations: read_count(r)?,
                n_scales: read_count(r)?,
                k_max: r.f64()?,
                k_step: r.f64()?,
                sigma: r.f64()?,
                patch_radius: read_count(r)?,
            };
            spec.validate().map_err(|e| malformed(&e))?;
            Ok(ModelArchive::GaborBankSpec(spec))
        }
        TAG_WARP_MODEL => {
            let n = r.len(32)?;
            let mut pts = Vec::with_capacity(2 * n);
            for _ in 0..2 * n {
                pts.push([r.f64()?, r.f64()?]);
            }
            let control_dst = pts.split_off(n);
            let kernel_width = r.f64()?;
            let rbf_weights = r.matrix()?;
            let affine = r.matrix()?;
            if rbf_weights.shape() != (n, 2) || affine.shape() != (2, 3) {
                return Err(ArchiveError::Malformed("warp coefficient shapes".into()));
            }
            if !(kernel_width.is_finite() && kernel_width > 0.0) {
                return Err(ArchiveError::Malformed(
                    "warp kernel width must be positive".into(),
                ));
            }
            Ok(ModelArchive::WarpModel(WarpModel {
                control_src: pts,
                control_dst,
                kernel_width,
                rbf_weights,
                affine,
            }))
        }
        t => Err(ArchiveError::UnknownTag(t)),
    }
}

pub fn save_model(archive: &ModelArchive) -> Vec<u8> {
    let mut payload = Writer::default();
    write_payload(&mut payload, archive);
    let mut w = Writer::default();
    w.buf.extend_from_slice(ARCHIVE_MAGIC);
    w.u32(ARCHIVE_VERSION);
    w.u32(archive.tag());
    w.len(payload.buf.len());
    w.buf.extend_from_slice(&payload.buf);
    w.u32(crc32fast::hash(&payload.buf));
    w.buf
}

pub fn load_model(bytes: &[u8]) -> Result<ModelArchive, ArchiveError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| ArchiveError::BadMagic)? != ARCHIVE_MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    let version = r.u32()?;
    if version != ARCHIVE_VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let tag = r.u32()?;
    if !(TAG_RBM_BANK..=TAG_WARP_MODEL).contains(&tag) {
        return Err(ArchiveError::UnknownTag(tag));
    }
    let len = r.u64()?;
    let len = usize::try_from(len).map_err(|_| ArchiveError::Truncated)?;
    if len.checked_add(4).map_or(true, |n| n > r.remaining()) {
        return Err(ArchiveError::Truncated);
    }
    let payload = r.take(len)?;
    let stored = r.u32()?;
    if r.remaining() != 0 {
        return Err(ArchiveError::TrailingBytes(r.remaining()));
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(ArchiveError::ChecksumMismatch { stored, computed });
    }
    let mut pr = Reader::new(payload);
    let archive = read_payload(tag, &mut pr)?;
    if pr.remaining() != 0 {
        return Err(ArchiveError::Malformed(format!(
            "{} unread payload bytes",
            pr.remaining()
        )));
    }
    Ok(archive)
}

pub fn write_archive(path: &Path, archive: &ModelArchive) -> Result<(), DataError> {
    std::fs::write(path, save_model(archive)).map_err(|e| DataError::io(path, e))
}

pub fn read_archive(path: &Path) -> Result<ModelArchive, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
    Ok(load_model(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn bank() -> RbmBank {
        let mut m = MultiModalRbmParams::zeros(2, 2, 3);
        m.weights_a[(1, 2)] = 0.25;
        m.hidden_bias[0] = -1.5;
        let mut m2 = m.clone();
        m2.bias_b[1] = 7.0;
        RbmBank {
            regime: Regime::Local,
            rbms: vec![m, m2],
            normalizers: vec![
                [
                    GaussianNormalizer::identity(2),
                    GaussianNormalizer::identity(2)
                ];
                2
            ],
            jet_dim: 2,
        }
    }

    #[test]
    fn bank_round_trip() {
        let a = ModelArchive::RbmBank(bank());
        assert_eq!(load_model(&save_model(&a)).unwrap(), a);
    }

    #[test]
    fn other_payloads_round_trip() {
        let head = ProjectionHead {
            mean: DVector::from_vec(vec![1.0, 2.0]),
            basis: DMatrix::identity(2, 2),
            eigenvalues: DVector::from_vec(vec![3.0, 1.0]),
            removed_k: 1,
        };
        let warp = crate::features::fit_warp_points(
            &[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [7.0, 7.0]],
            &[[1.0, 0.0], [11.0, 1.0], [0.0, 12.0], [8.0, 8.0]],
            2.0,
        )
        .unwrap();
        for a in [
            ModelArchive::ProjectionHead(head),
            ModelArchive::GaborBankSpec(GaborBankSpec::default()),
            ModelArchive::WarpModel(warp),
        ] {
            assert_eq!(load_model(&save_model(&a)).unwrap(), a);
        }
    }

    #[test]
    fn flipped_payload_byte_fails_checksum() {
        let mut bytes = save_model(&ModelArchive::RbmBank(bank()));
        bytes[25] ^= 0x10;
        assert!(matches!(
            load_model(&bytes),
            Err(ArchiveError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn future_version_rejected() {
        let mut bytes = save_model(&ModelArchive::GaborBankSpec(GaborBankSpec::default()));
        bytes[4..8].copy_from_slice(&(ARCHIVE_VERSION + 1).to_le_bytes());
        assert_eq!(
            load_model(&bytes),
            Err(ArchiveError::UnsupportedVersion(ARCHIVE_VERSION + 1))
        );
    }

    #[test]
    fn structural_errors() {
        let bytes = save_model(&ModelArchive::GaborBankSpec(GaborBankSpec::default()));
        assert_eq!(load_model(b"XM"), Err(ArchiveError::BadMagic));
        assert_eq!(
            load_model(&bytes[..bytes.len() - 1]),
            Err(ArchiveError::Truncated)
        );
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(load_model(&extra), Err(ArchiveError::TrailingBytes(1)));
        let mut tag = bytes.clone();
        tag[8] = 9;
        assert_eq!(load_model(&tag), Err(ArchiveError::UnknownTag(9)));
    }
}

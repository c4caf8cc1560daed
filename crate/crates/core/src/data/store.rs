//! Per-sample jet storage.
//!
//! Binary layout: magic `XMFS`, u32 version, u64 body length, body, u32
//! CRC-32 of the body. The body holds the jet dimension, the point count
//! per half, the sample count, then per sample its id, subject, modality
//! byte and `2 × points × jet_dim` little-endian doubles (left half first).

use std::path::Path;

use nalgebra::DMatrix;

use super::archive::ArchiveError;
use super::wire::{Reader, Writer};
use super::DataError;
use crate::features::FaceJets;
use crate::types::{Half, Modality};

pub const STORE_MAGIC: &[u8; 4] = b"XMFS";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFeatures {
    pub sample_id: String,
    pub subject_id: String,
    pub modality: Modality,
    pub jets: FaceJets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub jet_dim: usize,
    pub n_points: usize,
    pub samples: Vec<SampleFeatures>,
}

impl FeatureStore {
    pub fn new(jet_dim: usize, n_points: usize) -> Self {
        Self {
            jet_dim,
            n_points,
            samples: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut ids = std::collections::HashSet::new();
        for s in &self.samples {
            if !ids.insert(s.sample_id.as_str()) {
                return Err(DataError::DuplicateId(s.sample_id.clone()));
            }
            for half in &s.jets.jets {
                if half.len() != self.n_points || half.iter().any(|j| j.len() != self.jet_dim) {
                    return Err(DataError::Invalid(format!(
                        "sample {} does not have {} jets of length {} per half",
                        s.sample_id, self.n_points, self.jet_dim
                    )));
                }
                if half.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(DataError::Invalid(format!(
                        "sample {} has non-finite jet values",
                        s.sample_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, sample_id: &str) -> Option<&SampleFeatures> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    /// Distinct subject ids, sorted.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.samples.iter().map(|x| x.subject_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Jets at `point` of `half` for the given samples, one row per sample.
    pub fn point_matrix(
        &self,
        samples: &[&SampleFeatures],
        half: Half,
        point: usize,
    ) -> DMatrix<f64> {
        DMatrix::from_fn(samples.len(), self.jet_dim, |i, j| {
            samples[i].jets.jets[half.index()][point][j]
        })
    }

    /// Whole half faces for the given samples, one row per sample.
    pub fn half_matrix(&self, samples: &[&SampleFeatures], half: Half) -> DMatrix<f64> {
        let d = self.jet_dim;
        DMatrix::from_fn(samples.len(), d * self.n_points, |i, j| {
            samples[i].jets.jets[half.index()][j / d][j % d]
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Writer::default();
        body.len(self.jet_dim);
        body.len(self.n_points);
        body.len(self.samples.len());
        for s in &self.samples {
            body.str(&s.sample_id);
            body.str(&s.subject_id);
            body.u8(s.modality.index() as u8);
            for half in &s.jets.jets {
                for jet in half {
                    for v in jet {
                        body.f64(*v);
                    }
                }
            }
        }
        let mut w = Writer::default();
        w.buf.extend_from_slice(STORE_MAGIC);
        w.u32(STORE_VERSION);
        w.len(body.buf.len());
        w.buf.extend_from_slice(&body.buf);
        w.u32(crc32fast::hash(&body.buf));
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        let mut r = Reader::new(bytes);
        if r.take(4).map_err(|_| ArchiveError::BadMagic)? != STORE_MAGIC {
            return Err(ArchiveError::BadMagic.into());
        }
        let version = r.u32()?;
        if version != STORE_VERSION {
            return Err(ArchiveError::UnsupportedVersion(version).into());
        }
        let len = r.len(1)?;
        let body = r.take(len)?;
        let stored = r.u32()?;
        if r.remaining() != 0 {
            return Err(ArchiveError::TrailingBytes(r.remaining()).into());
        }
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(ArchiveError::ChecksumMismatch { stored, computed }.into());
        }
        let mut b = Reader::new(body);
        let jet_dim = b.u64()? as usize;
        let n_points = b.u64()? as usize;
        let per_sample = jet_dim
            .checked_mul(n_points)
            .and_then(|x| x.checked_mul(16))
            .ok_or(ArchiveError::Malformed("store dimensions overflow".into()))?;
        // every sample needs its jets plus two length prefixes and a modality byte
        let count = b.len(per_sample.saturating_add(17))?;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let sample_id = b.str()?;
            let subject_id = b.str()?;
            let modality = match b.u8()? {
                0 => Modality::A,
                1 => Modality::B,
                m => return Err(ArchiveError::Malformed(format!("modality byte {m}")).into()),
            };
            let mut jets: [Vec<Vec<f64>>; 2] =
                [Vec::with_capacity(n_points), Vec::with_capacity(n_points)];
            for half in jets.iter_mut() {
                for _ in 0..n_points {
                    let mut jet = Vec::with_capacity(jet_dim);
                    for _ in 0..jet_dim {
                        jet.push(b.f64()?);
                    }
                    half.push(jet);
                }
            }
            samples.push(SampleFeatures {
                sample_id,
                subject_id,
                modality,
                jets: FaceJets { jets },
            });
        }
        if b.remaining() != 0 {
            return Err(
                ArchiveError::Malformed(format!("{} unread store bytes", b.remaining())).into(),
            );
        }
        let store = Self {
            jet_dim,
            n_points,
            samples,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| DataError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> FeatureStore {
        let mut s = FeatureStore::new(3, 2);
        for (i, m) in [Modality::A, Modality::B].into_iter().enumerate() {
            let jets = FaceJets {
                jets: [
                    vec![vec![i as f64, 1.0, 2.0], vec![3.0, 4.0, -5.5]],
                    vec![vec![0.25, 0.5, 0.75], vec![1e-300, 1e300, 0.0]],
                ],
            };
            s.samples.push(SampleFeatures {
                sample_id: format!("x{i}"),
                subject_id: "s".into(),
                modality: m,
                jets,
            });
        }
        s
    }

    #[test]
    fn round_trip() {
        let s = store();
        assert_eq!(FeatureStore::from_bytes(&s.to_bytes()).unwrap(), s);
        let empty = FeatureStore::new(40, 176);
        assert_eq!(FeatureStore::from_bytes(&empty.to_bytes()).unwrap(), empty);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = store().to_bytes();
        let n = bytes.len();
        bytes[n - 10] ^= 1;
        assert!(matches!(
            FeatureStore::from_bytes(&bytes),
            Err(DataError::Archive(ArchiveError::ChecksumMismatch { .. }))
        ));
        assert!(FeatureStore::from_bytes(&bytes[..n - 3]).is_err());
    }

    #[test]
    fn matrices() {
        let s = store();
        let refs: Vec<&SampleFeatures> = s.samples.iter().collect();
        let p = s.point_matrix(&refs, Half::Right, 1);
        assert_eq!(
            p.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1e-300, 1e300, 0.0]
        );
        let h = s.half_matrix(&refs, Half::Left);
        assert_eq!(h.ncols(), 6);
        assert_eq!(h[(1, 0)], 1.0);
        assert_eq!(h[(0, 5)], -5.5);
    }
}

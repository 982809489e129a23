//! Community fingerprints: a one-class model per detected community over
//! variance-selected, IDF-weighted hashed features, persisted in a
//! versioned signature database.
//!
//! Fingerprints operate on the concatenation of every configured content's
//! hashed vector (category block offset = position in the configured list
//! times `L`), not on the PCA digests.
//!
//! # Signature database layout (little endian)
//!
//! ```text
//! magic `FAMNSIG\0` | u32 version (1) | u64 config digest | u32 iterations
//! | u32 next community id | u32 fingerprint count | fingerprints...
//!
//! fingerprint:
//!   u32 community id | u32 training size | f64 nu
//!   | u8 kernel kind (0 rbf, 1 linear) | f64 gamma | f64 rho
//!   | u32 vector len L | u8 category count | category ordinals (u8 each)
//!   | f64 variance threshold | u32 selected count d
//!   | kept indices (u32 * d) | idf weights (f64 * d)
//!   | u32 support count | support vectors...
//!
//! support vector:
//!   f64 alpha | u32 nonzero count | (u32 position, f64 value) pairs
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bundle::ContentCategory;
use crate::error::{Error, Result};
use crate::hashing::HashedVector;
use crate::svm::{solve_one_class, Kernel, KKT_TOLERANCE};

const MAGIC: &[u8; 8] = b"FAMNSIG\0";
const FORMAT_VERSION: u32 = 1;

/// Minimum community size accepted for fingerprint training.
pub const MIN_FINGERPRINT_TRAINING: usize = 5;

/// Kernel request; `Rbf { gamma: None }` resolves to `1 / selected_dims`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Rbf { gamma: Option<f64> },
    Linear,
}

/// One sample's hashed features over the concatenated category space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcatFeatures {
    pub space_len: u64,
    /// `(index, count)` sorted by index.
    pub entries: Vec<(u32, u64)>,
}

/// Concatenates per-category hashed vectors in the order of `categories`.
/// Missing categories contribute nothing (zero block).
pub fn concat_features(
    by_category: &BTreeMap<ContentCategory, HashedVector>,
    categories: &[ContentCategory],
    vector_len: u32,
) -> Result<ConcatFeatures> {
    let mut entries = Vec::new();
    for (block, &category) in categories.iter().enumerate() {
        if let Some(v) = by_category.get(&category) {
            if v.len != vector_len {
                return Err(Error::LengthMismatch {
                    expected: vector_len as usize,
                    got: v.len as usize,
                });
            }
            if v.category != category {
                return Err(Error::CategoryMismatch {
                    expected: category.name().into(),
                    got: v.category.name().into(),
                });
            }
            let offset = block as u64 * u64::from(vector_len);
            entries.extend(
                v.entries
                    .iter()
                    .map(|&(i, c)| ((offset + u64::from(i)) as u32, c)),
            );
        }
    }
    Ok(ConcatFeatures {
        space_len: categories.len() as u64 * u64::from(vector_len),
        entries,
    })
}

/// Variance-selected feature set with IDF weights for the survivors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub variance_threshold: f64,
    /// Surviving indices of the concatenated space, sorted.
    pub kept: Vec<u32>,
    /// `idf[k] = ln(n / (1 + df))` for `kept[k]`, df counting community
    /// members with a nonzero value there. Negative values are legitimate
    /// (features present in every member).
    pub idf: Vec<f64>,
}

/// Drops features whose variance over the community is at most
/// `variance_threshold` and weights the survivors by IDF.
pub fn select_features(
    vectors: &[ConcatFeatures],
    variance_threshold: f64,
) -> Result<FeatureSelection> {
    if vectors.len() < 2 {
        return Err(Error::TooFewTrainingVectors {
            required: 2,
            got: vectors.len(),
        });
    }
    if !(variance_threshold.is_finite() && variance_threshold >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "variance threshold must be finite and non-negative, got {variance_threshold}"
        )));
    }
    let space_len = vectors[0].space_len;
    for v in vectors {
        if v.space_len != space_len {
            return Err(Error::ShapeMismatch {
                expected: space_len,
                got: v.space_len,
            });
        }
    }

    #[derive(Default)]
    struct Acc {
        sum: f64,
        sum_sq: f64,
        present: u32,
    }
    let mut acc: BTreeMap<u32, Acc> = BTreeMap::new();
    for v in vectors {
        for &(i, c) in &v.entries {
            let slot = acc.entry(i).or_default();
            let x = c as f64;
            slot.sum += x;
            slot.sum_sq += x * x;
            slot.present += 1;
        }
    }

    let n = vectors.len() as f64;
    let mut kept = Vec::new();
    let mut idf = Vec::new();
    for (index, slot) in acc {
        let mean = slot.sum / n;
        let variance = (slot.sum_sq / n - mean * mean).max(0.0);
        if variance > variance_threshold {
            kept.push(index);
            idf.push((n / (1.0 + f64::from(slot.present))).ln());
        }
    }
    if kept.is_empty() {
        return Err(Error::AllFeaturesDropped {
            threshold: variance_threshold,
        });
    }
    Ok(FeatureSelection {
        variance_threshold,
        kept,
        idf,
    })
}

impl FeatureSelection {
    /// Projects a concatenated vector onto the selected space, weighted by
    /// IDF: positions index into `kept`.
    pub fn project(&self, v: &ConcatFeatures) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        let mut k = 0usize;
        for &(index, count) in &v.entries {
            while k < self.kept.len() && self.kept[k] < index {
                k += 1;
            }
            if k == self.kept.len() {
                break;
            }
            if self.kept[k] == index {
                let value = count as f64 * self.idf[k];
                if value != 0.0 {
                    out.push((k as u32, value));
                }
                k += 1;
            }
        }
        out
    }
}

/// Support vector in the selected space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub alpha: f64,
    /// `(position-in-kept, idf-weighted value)` sorted by position.
    pub entries: Vec<(u32, f64)>,
    #[serde(skip)]
    norm_sq: f64,
}

impl SupportVector {
    fn new(alpha: f64, entries: Vec<(u32, f64)>) -> Self {
        let norm_sq = entries.iter().map(|&(_, v)| v * v).sum();
        SupportVector {
            alpha,
            entries,
            norm_sq,
        }
    }
}

/// Trained one-class model for one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityFingerprint {
    pub community_id: u32,
    pub categories: Vec<ContentCategory>,
    pub vector_len: u32,
    pub nu: f64,
    pub kernel: Kernel,
    pub rho: f64,
    pub training_size: u32,
    pub selection: FeatureSelection,
    pub support: Vec<SupportVector>,
}

/// Trains a community fingerprint on the members' concatenated vectors.
pub fn train_fingerprint(
    community_id: u32,
    vectors: &[ConcatFeatures],
    categories: &[ContentCategory],
    vector_len: u32,
    selection: FeatureSelection,
    nu: f64,
    kernel: KernelSpec,
) -> Result<CommunityFingerprint> {
    if vectors.len() < MIN_FINGERPRINT_TRAINING {
        return Err(Error::TooFewTrainingVectors {
            required: MIN_FINGERPRINT_TRAINING,
            got: vectors.len(),
        });
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParam(format!("nu must be in (0, 1], got {nu}")));
    }
    let expected_space = categories.len() as u64 * u64::from(vector_len);
    for v in vectors {
        if v.space_len != expected_space {
            return Err(Error::ShapeMismatch {
                expected: expected_space,
                got: v.space_len,
            });
        }
    }

    let kernel = match kernel {
        KernelSpec::Linear => Kernel::Linear,
        KernelSpec::Rbf { gamma: Some(g) } => {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "rbf gamma must be positive and finite, got {g}"
                )));
            }
            Kernel::Rbf { gamma: g }
        }
        KernelSpec::Rbf { gamma: None } => Kernel::Rbf {
            gamma: 1.0 / selection.kept.len() as f64,
        },
    };

    let rows: Vec<Vec<(u32, f64)>> = vectors.iter().map(|v| selection.project(v)).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|&(_, v)| v * v).sum())
        .collect();
    let n = rows.len();
    let mut q = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let dot = sparse_dot(&rows[i], &rows[j]);
            let value = kernel.value(dot, norms[i], norms[j]);
            q[[i, j]] = value;
            q[[j, i]] = value;
        }
    }
    let solution = solve_one_class(&q, nu, KKT_TOLERANCE)?;

    let support = rows
        .into_iter()
        .zip(&solution.alpha)
        .filter(|(_, &a)| a > 1e-12)
        .map(|(entries, &a)| SupportVector::new(a, entries))
        .collect();
    Ok(CommunityFingerprint {
        community_id,
        categories: categories.to_vec(),
        vector_len,
        nu,
        kernel,
        rho: solution.rho,
        training_size: vectors.len() as u32,
        selection,
        support,
    })
}

fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let mut acc = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl CommunityFingerprint {
    /// Decision value for one sample; inside the boundary iff `>= 0`.
    pub fn decision(&self, sample: &ConcatFeatures) -> Result<f64> {
        let expected = self.categories.len() as u64 * u64::from(self.vector_len);
        if sample.space_len != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: sample.space_len,
            });
        }
        let projected = self.selection.project(sample);
        let norm_sq: f64 = projected.iter().map(|&(_, v)| v * v).sum();
        let mut acc = 0.0;
        for sv in &self.support {
            let dot = sparse_dot(&sv.entries, &projected);
            acc += sv.alpha * self.kernel.value(dot, sv.norm_sq, norm_sq);
        }
        Ok(acc - self.rho)
    }
}

/// A database match: the fingerprint accepted the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerprintMatch {
    pub community_id: u32,
    pub decision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DbMeta {
    /// FNV digest of the producing pipeline config.
    pub config_digest: u64,
    /// Completed pipeline iterations.
    pub iterations: u32,
    /// Next community id to assign; ids are unique across iterations.
    pub next_community_id: u32,
}

/// Versioned, append-only store of community fingerprints.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SignatureDatabase {
    pub meta: DbMeta,
    pub fingerprints: Vec<CommunityFingerprint>,
}

impl SignatureDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, fingerprint: CommunityFingerprint) -> Result<()> {
        if self
            .fingerprints
            .iter()
            .any(|f| f.community_id == fingerprint.community_id)
        {
            return Err(Error::InvalidParam(format!(
                "fingerprint for community {} already stored",
                fingerprint.community_id
            )));
        }
        self.meta.next_community_id = self
            .meta
            .next_community_id
            .max(fingerprint.community_id + 1);
        self.fingerprints.push(fingerprint);
        Ok(())
    }

    /// Evaluates every fingerprint; matches are the ones accepting the
    /// sample. Shape mismatches are reported per fingerprint while the
    /// rest still evaluate.
    pub fn match_sample(
        &self,
        sample: &ConcatFeatures,
    ) -> (Vec<FingerprintMatch>, Vec<(u32, Error)>) {
        let mut matches = Vec::new();
        let mut errors = Vec::new();
        for fp in &self.fingerprints {
            match fp.decision(sample) {
                Ok(decision) if decision >= 0.0 => matches.push(FingerprintMatch {
                    community_id: fp.community_id,
                    decision,
                }),
                Ok(_) => {}
                Err(e) => errors.push((fp.community_id, e)),
            }
        }
        (matches, errors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.meta.config_digest.to_le_bytes());
        buf.extend_from_slice(&self.meta.iterations.to_le_bytes());
        buf.extend_from_slice(&self.meta.next_community_id.to_le_bytes());
        buf.extend_from_slice(&(self.fingerprints.len() as u32).to_le_bytes());
        for fp in &self.fingerprints {
            buf.extend_from_slice(&fp.community_id.to_le_bytes());
            buf.extend_from_slice(&fp.training_size.to_le_bytes());
            buf.extend_from_slice(&fp.nu.to_le_bytes());
            match fp.kernel {
                Kernel::Rbf { gamma } => {
                    buf.push(0);
                    buf.extend_from_slice(&gamma.to_le_bytes());
                }
                Kernel::Linear => {
                    buf.push(1);
                    buf.extend_from_slice(&0.0f64.to_le_bytes());
                }
            }
            buf.extend_from_slice(&fp.rho.to_le_bytes());
            buf.extend_from_slice(&fp.vector_len.to_le_bytes());
            buf.push(fp.categories.len() as u8);
            for c in &fp.categories {
                buf.push(c.ordinal());
            }
            buf.extend_from_slice(&fp.selection.variance_threshold.to_le_bytes());
            buf.extend_from_slice(&(fp.selection.kept.len() as u32).to_le_bytes());
            for &i in &fp.selection.kept {
                buf.extend_from_slice(&i.to_le_bytes());
            }
            for &w in &fp.selection.idf {
                buf.extend_from_slice(&w.to_le_bytes());
            }
            buf.extend_from_slice(&(fp.support.len() as u32).to_le_bytes());
            for sv in &fp.support {
                buf.extend_from_slice(&sv.alpha.to_le_bytes());
                buf.extend_from_slice(&(sv.entries.len() as u32).to_le_bytes());
                for &(pos, value) in &sv.entries {
                    buf.extend_from_slice(&pos.to_le_bytes());
                    buf.extend_from_slice(&value.to_le_bytes());
                }
            }
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SignatureDatabase> {
        let path = path.as_ref();
        let corrupt = |message: String| Error::CorruptFile {
            what: "signature database",
            path: path.to_path_buf(),
            message,
        };
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader { buf: &buf, pos: 0 };
        let magic = r.bytes(8).ok_or_else(|| corrupt("truncated magic".into()))?;
        if magic != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header".into()))?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let meta = DbMeta {
            config_digest: r.u64().ok_or_else(|| corrupt("truncated header".into()))?,
            iterations: r.u32().ok_or_else(|| corrupt("truncated header".into()))?,
            next_community_id: r.u32().ok_or_else(|| corrupt("truncated header".into()))?,
        };
        let count = r.u32().ok_or_else(|| corrupt("truncated header".into()))?;
        let mut fingerprints = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let community_id = r.u32().ok_or_else(|| corrupt("truncated record".into()))?;
            let training_size = r.u32().ok_or_else(|| corrupt("truncated record".into()))?;
            let nu = r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
            let kind = r.u8().ok_or_else(|| corrupt("truncated record".into()))?;
            let gamma = r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
            let kernel = match kind {
                0 => Kernel::Rbf { gamma },
                1 => Kernel::Linear,
                other => return Err(corrupt(format!("unknown kernel kind {other}"))),
            };
            let rho = r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
            let vector_len = r.u32().ok_or_else(|| corrupt("truncated record".into()))?;
            let cat_count = r.u8().ok_or_else(|| corrupt("truncated record".into()))?;
            let mut categories = Vec::with_capacity(cat_count as usize);
            for _ in 0..cat_count {
                let ordinal = r.u8().ok_or_else(|| corrupt("truncated record".into()))?;
                categories.push(
                    ContentCategory::from_ordinal(ordinal)
                        .ok_or_else(|| corrupt(format!("unknown category ordinal {ordinal}")))?,
                );
            }
            let variance_threshold =
                r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
            let selected = r.u32().ok_or_else(|| corrupt("truncated record".into()))? as usize;
            let mut kept = Vec::with_capacity(selected);
            for _ in 0..selected {
                kept.push(r.u32().ok_or_else(|| corrupt("truncated record".into()))?);
            }
            let mut idf = Vec::with_capacity(selected);
            for _ in 0..selected {
                idf.push(r.f64().ok_or_else(|| corrupt("truncated record".into()))?);
            }
            let sv_count = r.u32().ok_or_else(|| corrupt("truncated record".into()))?;
            let mut support = Vec::with_capacity(sv_count as usize);
            for _ in 0..sv_count {
                let alpha = r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
                let nnz = r.u32().ok_or_else(|| corrupt("truncated record".into()))? as usize;
                let mut entries = Vec::with_capacity(nnz);
                for _ in 0..nnz {
                    let pos = r.u32().ok_or_else(|| corrupt("truncated record".into()))?;
                    let value = r.f64().ok_or_else(|| corrupt("truncated record".into()))?;
                    entries.push((pos, value));
                }
                support.push(SupportVector::new(alpha, entries));
            }
            fingerprints.push(CommunityFingerprint {
                community_id,
                categories,
                vector_len,
                nu,
                kernel,
                rho,
                training_size,
                selection: FeatureSelection {
                    variance_threshold,
                    kept,
                    idf,
                },
                support,
            });
        }
        if !r.at_end() {
            return Err(corrupt("trailing bytes".into()));
        }
        Ok(SignatureDatabase { meta, fingerprints })
    }

    /// Human-readable JSON dump for debugging.
    pub fn to_debug_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("database serializes")
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        let out = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(out)
    }
    fn u8(&mut self) -> Option<u8> {
        self.bytes(1).map(|b| b[0])
    }
    fn u32(&mut self) -> Option<u32> {
        self.bytes(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u64(&mut self) -> Option<u64> {
        self.bytes(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
    fn f64(&mut self) -> Option<f64> {
        self.bytes(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concat(space_len: u64, entries: &[(u32, u64)]) -> ConcatFeatures {
        ConcatFeatures {
            space_len,
            entries: entries.to_vec(),
        }
    }

    #[test]
    fn concat_offsets_categories() {
        let mut by_cat = BTreeMap::new();
        by_cat.insert(
            ContentCategory::ApkBytes,
            HashedVector {
                category: ContentCategory::ApkBytes,
                len: 16,
                entries: vec![(1, 2)],
            },
        );
        by_cat.insert(
            ContentCategory::Permissions,
            HashedVector {
                category: ContentCategory::Permissions,
                len: 16,
                entries: vec![(3, 1)],
            },
        );
        let categories = [ContentCategory::ApkBytes, ContentCategory::Permissions];
        let v = concat_features(&by_cat, &categories, 16).unwrap();
        assert_eq!(v.space_len, 32);
        assert_eq!(v.entries, vec![(1, 2), (19, 1)]);

        // absent category yields a zero block
        by_cat.remove(&ContentCategory::Permissions);
        let v = concat_features(&by_cat, &categories, 16).unwrap();
        assert_eq!(v.entries, vec![(1, 2)]);
    }

    #[test]
    fn constant_features_are_dropped_at_zero_threshold() {
        let vectors = vec![
            concat(64, &[(0, 3), (5, 1)]),
            concat(64, &[(0, 3), (5, 2)]),
            concat(64, &[(0, 3), (5, 3)]),
        ];
        let selection = select_features(&vectors, 0.0).unwrap();
        assert_eq!(selection.kept, vec![5]);
    }

    #[test]
    fn idf_matches_formula() {
        // 10 vectors; feature 1 present in 4, feature 2 in all 10, feature 3
        // varies for half so it survives selection as well.
        let mut vectors = Vec::new();
        for i in 0..10u64 {
            let mut entries = vec![(2u32, 5 + (i % 2))];
            if i < 4 {
                entries.insert(0, (1u32, i + 1));
            }
            vectors.push(concat(64, &entries));
        }
        let selection = select_features(&vectors, 0.0).unwrap();
        let idx_of = |target: u32| selection.kept.iter().position(|&k| k == target).unwrap();
        let idf1 = selection.idf[idx_of(1)];
        assert!((idf1 - (10.0f64 / 5.0).ln()).abs() < 1e-12, "{idf1}");
        let idf2 = selection.idf[idx_of(2)];
        assert!((idf2 - (10.0f64 / 11.0).ln()).abs() < 1e-12);
        assert!(idf2 < 0.0, "ubiquitous features get negative idf");
    }

    #[test]
    fn all_features_dropped_is_an_error() {
        let vectors = vec![concat(8, &[(0, 3)]), concat(8, &[(0, 3)])];
        assert!(matches!(
            select_features(&vectors, 0.0),
            Err(Error::AllFeaturesDropped { .. })
        ));
        assert!(matches!(
            select_features(&vectors[..1], 0.0),
            Err(Error::TooFewTrainingVectors { .. })
        ));
    }

    /// Family-like cloud: a shared feature pool carried as overlapping
    /// subsets with sizable counts, plus a few rare features. Subset
    /// presence keeps the pool's document frequency below the community
    /// size, which is what gives shared features real idf weight.
    fn family_vectors(n: usize, seed: u64) -> Vec<ConcatFeatures> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut entries: Vec<(u32, u64)> = Vec::new();
                for i in 0..40u32 {
                    if rng.random::<f64>() < 0.7 {
                        entries.push((i, 4 + rng.random_range(0..4u64)));
                    }
                }
                for i in 40..70u32 {
                    if rng.random::<f64>() < 0.15 {
                        entries.push((i, 1 + rng.random_range(0..2u64)));
                    }
                }
                concat(256, &entries)
            })
            .collect()
    }

    #[test]
    fn fingerprint_accepts_members_and_rejects_outliers() {
        let vectors = family_vectors(30, 2);
        let selection = select_features(&vectors, 0.0).unwrap();
        let fp = train_fingerprint(
            7,
            &vectors,
            &[ContentCategory::ApkBytes],
            256,
            selection,
            0.1,
            KernelSpec::Rbf { gamma: None },
        )
        .unwrap();
        assert_eq!(fp.community_id, 7);
        assert_eq!(fp.training_size, 30);
        assert!(fp.nu > 0.0 && fp.nu <= 1.0);

        let inside = vectors
            .iter()
            .filter(|v| fp.decision(v).unwrap() >= 0.0)
            .count() as f64
            / vectors.len() as f64;
        assert!(inside >= 1.0 - 0.1 - 0.05, "inside fraction {inside}");

        // far outlier: completely different support
        let outlier = concat(256, &[(200, 50), (210, 80), (220, 60)]);
        assert!(fp.decision(&outlier).unwrap() < 0.0);
    }

    #[test]
    fn train_rejects_small_or_invalid_input() {
        let vectors = family_vectors(4, 3);
        let selection = select_features(&vectors, 0.0).unwrap();
        assert!(matches!(
            train_fingerprint(
                0,
                &vectors,
                &[ContentCategory::ApkBytes],
                256,
                selection.clone(),
                0.1,
                KernelSpec::Rbf { gamma: None },
            ),
            Err(Error::TooFewTrainingVectors { required: 5, .. })
        ));
        let vectors = family_vectors(6, 3);
        let selection = select_features(&vectors, 0.0).unwrap();
        assert!(train_fingerprint(
            0,
            &vectors,
            &[ContentCategory::ApkBytes],
            256,
            selection.clone(),
            1.5,
            KernelSpec::Rbf { gamma: None },
        )
        .is_err());
        assert!(train_fingerprint(
            0,
            &vectors,
            &[ContentCategory::ApkBytes],
            256,
            selection,
            0.1,
            KernelSpec::Rbf { gamma: Some(-1.0) },
        )
        .is_err());
    }

    #[test]
    fn database_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signatures.db");
        let mut db = SignatureDatabase::new();
        db.meta.config_digest = 0xDEADBEEF;
        for id in 0..3 {
            let vectors = family_vectors(10, id as u64 + 10);
            let selection = select_features(&vectors, 0.0).unwrap();
            let fp = train_fingerprint(
                id,
                &vectors,
                &[ContentCategory::ApkBytes],
                256,
                selection,
                0.2,
                KernelSpec::Rbf { gamma: None },
            )
            .unwrap();
            db.append(fp).unwrap();
        }
        db.meta.iterations = 1;
        db.save(&path).unwrap();
        let loaded = SignatureDatabase::load(&path).unwrap();
        assert_eq!(db, loaded);
        let path2 = dir.path().join("signatures2.db");
        loaded.save(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());

        // decision values reproduce exactly after the round trip
        let probe = family_vectors(1, 99).pop().unwrap();
        for (a, b) in db.fingerprints.iter().zip(&loaded.fingerprints) {
            let da = a.decision(&probe).unwrap();
            let db_ = b.decision(&probe).unwrap();
            assert!((da - db_).abs() <= 1e-9);
        }
    }

    #[test]
    fn duplicate_community_ids_rejected() {
        let vectors = family_vectors(8, 5);
        let selection = select_features(&vectors, 0.0).unwrap();
        let fp = train_fingerprint(
            3,
            &vectors,
            &[ContentCategory::ApkBytes],
            256,
            selection,
            0.2,
            KernelSpec::Rbf { gamma: None },
        )
        .unwrap();
        let mut db = SignatureDatabase::new();
        db.append(fp.clone()).unwrap();
        assert!(db.append(fp).is_err());
        assert_eq!(db.meta.next_community_id, 4);
    }

    #[test]
    fn matching_reports_shape_errors_per_fingerprint() {
        let vectors = family_vectors(8, 6);
        let selection = select_features(&vectors, 0.0).unwrap();
        let fp = train_fingerprint(
            0,
            &vectors,
            &[ContentCategory::ApkBytes],
            256,
            selection,
            0.2,
            KernelSpec::Rbf { gamma: None },
        )
        .unwrap();
        let mut db = SignatureDatabase::new();
        db.append(fp).unwrap();

        let empty = SignatureDatabase::new();
        let sample = concat(256, &[(0, 5)]);
        let (matches, errors) = empty.match_sample(&sample);
        assert!(matches.is_empty() && errors.is_empty());

        let wrong_shape = concat(512, &[(0, 5)]);
        let (matches, errors) = db.match_sample(&wrong_shape);
        assert!(matches.is_empty());
        assert_eq!(errors.len(), 1);
        assert!(matches!(errors[0].1, Error::ShapeMismatch { .. }));

        // training members match at a rate bounded by the nu property
        let hit_rate = vectors
            .iter()
            .filter(|v| !db.match_sample(v).0.is_empty())
            .count() as f64
            / vectors.len() as f64;
        assert!(hit_rate >= 0.9 - 0.2, "hit rate {hit_rate}");
    }

    #[test]
    fn corrupt_database_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.db");
        let db = SignatureDatabase::new();
        db.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[1] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            SignatureDatabase::load(&path),
            Err(Error::CorruptFile { .. })
        ));
    }
}

//! PCA compression of hashed count vectors into short dense digests.
//!
//! Fitting uses the Gram-matrix route: the sampled rows are centered, the
//! `n x n` Gram matrix is eigendecomposed, and components are recovered by
//! back-projection. That keeps the cost bounded by the sample cap instead
//! of the (large) vector length.
//!
//! # Model file layout (little endian)
//!
//! | offset | size  | field                                   |
//! |--------|-------|-----------------------------------------|
//! | 0      | 8     | magic `FAMNPCA\0`                       |
//! | 8      | 4     | u32 format version (1)                  |
//! | 12     | 4     | u32 content category ordinal            |
//! | 16     | 4     | u32 vector length L                     |
//! | 20     | 4     | u32 embedding dim S                     |
//! | 24     | 8     | u64 fit seed                            |
//! | 32     | 4     | u32 sample size n                       |
//! | 36     | 4     | u32 hash name length h                  |
//! | 40     | h     | hash name bytes (`fnv1a64`)             |
//! | 40+h   | 8*S   | explained variance per component (f64)  |
//! | ..     | 8*L   | mean vector (f64)                       |
//! | ..     | 8*S*L | components, row major (f64)             |

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::bundle::ContentCategory;
use crate::error::{Error, Result};
use crate::hashing::{HashedVector, HASH_NAME};
use crate::util::stage_rng;

const MAGIC: &[u8; 8] = b"FAMNPCA\0";
const FORMAT_VERSION: u32 = 1;

/// Dense digest of one hashed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub category: ContentCategory,
    pub values: Vec<f64>,
}

/// Fitted per-category PCA basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub category: ContentCategory,
    pub vector_len: u32,
    pub embedding_dim: u32,
    pub seed: u64,
    pub sample_size: u32,
    /// Sample-covariance eigenvalue per component (descending).
    pub explained_variance: Vec<f64>,
    /// Column means of the sampled rows, length `vector_len`.
    pub mean: Vec<f64>,
    /// Orthonormal rows, `embedding_dim x vector_len`.
    pub components: Array2<f64>,
    /// components . mean, cached for embedding.
    comp_mean: Vec<f64>,
}

/// Fits a PCA basis on a uniform sample of at most `sample_cap` vectors.
///
/// All vectors must share one category and length. Components follow a
/// deterministic sign convention: the largest-magnitude coordinate of
/// each row is positive.
pub fn fit_pca(
    vectors: &[HashedVector],
    embedding_dim: u32,
    sample_cap: u32,
    seed: u64,
) -> Result<PcaModel> {
    if embedding_dim == 0 {
        return Err(Error::InvalidParam("embedding dim must be positive".into()));
    }
    if sample_cap == 0 {
        return Err(Error::InvalidParam("sample cap must be positive".into()));
    }
    let first = vectors
        .first()
        .ok_or(Error::PcaTooFewSamples {
            required: embedding_dim as usize,
            available: 0,
        })?;
    let category = first.category;
    let len = first.len;
    for v in vectors {
        if v.category != category {
            return Err(Error::CategoryMismatch {
                expected: category.name().into(),
                got: v.category.name().into(),
            });
        }
        if v.len != len {
            return Err(Error::LengthMismatch {
                expected: len as usize,
                got: v.len as usize,
            });
        }
    }
    if embedding_dim > len {
        return Err(Error::InvalidParam(format!(
            "embedding dim {embedding_dim} exceeds vector length {len}"
        )));
    }

    // Uniform sample without replacement, then sorted so the arithmetic
    // order does not depend on the draw order.
    let mut indices: Vec<usize> = (0..vectors.len()).collect();
    if vectors.len() > sample_cap as usize {
        let mut rng = stage_rng(seed, "pca-sample");
        indices.shuffle(&mut rng);
        indices.truncate(sample_cap as usize);
        indices.sort_unstable();
    }
    let n = indices.len();
    if n < embedding_dim as usize {
        return Err(Error::PcaTooFewSamples {
            required: embedding_dim as usize,
            available: n,
        });
    }

    let rows: Vec<&HashedVector> = indices.iter().map(|&i| &vectors[i]).collect();
    let l = len as usize;
    let total_nnz: usize = rows.iter().map(|v| v.entries.len()).sum();
    let dense = total_nnz as f64 >= 0.125 * (n * l) as f64;

    // Centered Gram matrix. Dense inputs go through one big matrix
    // product; sparse inputs use sparse dot products plus the centering
    // identity Gc_ij = G_ij - a_i - a_j + |mean|^2 with a = X mean.
    let mut mean = Array1::<f64>::zeros(l);
    for v in &rows {
        for &(i, c) in &v.entries {
            mean[i as usize] += c as f64;
        }
    }
    mean /= n as f64;

    let (gram, x_dense) = if dense {
        let mut x = Array2::<f64>::zeros((n, l));
        for (row, v) in rows.iter().enumerate() {
            for &(i, c) in &v.entries {
                x[[row, i as usize]] = c as f64;
            }
        }
        x -= &mean;
        (x.dot(&x.t()), Some(x))
    } else {
        let dots: Vec<f64> = rows
            .iter()
            .map(|v| v.entries.iter().map(|&(i, c)| c as f64 * mean[i as usize]).sum())
            .collect();
        let mean_sq: f64 = mean.iter().map(|m| m * m).sum();
        let upper: Vec<Vec<f64>> = rows
            .par_iter()
            .enumerate()
            .map(|(i, vi)| {
                let mut scatter = vec![0.0f64; l];
                for &(k, c) in &vi.entries {
                    scatter[k as usize] = c as f64;
                }
                rows[i..]
                    .iter()
                    .map(|vj| {
                        vj.entries
                            .iter()
                            .map(|&(k, c)| c as f64 * scatter[k as usize])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let mut gram = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let value = upper[i][j - i] - dots[i] - dots[j] + mean_sq;
                gram[[i, j]] = value;
                gram[[j, i]] = value;
            }
        }
        (gram, None)
    };

    let gram = nalgebra::DMatrix::from_row_iterator(n, n, gram.iter().copied());
    let eigen = gram.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let lambda_max = eigen.eigenvalues[order[0]].max(0.0);
    let rank_tol = lambda_max.max(1.0) * 1e-12;

    let s = embedding_dim as usize;
    let denom = (n.max(2) - 1) as f64;
    let mut explained_variance = Vec::with_capacity(s);
    let mut valid = 0usize;
    for &ei in order.iter().take(s) {
        let lambda = eigen.eigenvalues[ei].max(0.0);
        explained_variance.push(lambda / denom);
        if lambda > rank_tol {
            valid += 1;
        }
    }

    // Back-project the top eigenvectors: C = diag(1/sigma) U^T Xc.
    let mut components = Array2::<f64>::zeros((s, l));
    if valid > 0 {
        let mut u = Array2::<f64>::zeros((valid, n));
        for (row, &ei) in order.iter().take(valid).enumerate() {
            let sigma = eigen.eigenvalues[ei].max(0.0).sqrt();
            for j in 0..n {
                u[[row, j]] = eigen.eigenvectors[(j, ei)] / sigma;
            }
        }
        match &x_dense {
            Some(x) => {
                let projected = u.dot(x);
                components
                    .slice_mut(ndarray::s![0..valid, ..])
                    .assign(&projected);
            }
            None => {
                let scaled_rows: Vec<Vec<f64>> = (0..valid)
                    .into_par_iter()
                    .map(|row| {
                        let mut out = vec![0.0f64; l];
                        let mut coeff_sum = 0.0;
                        for (j, v) in rows.iter().enumerate() {
                            let coeff = u[[row, j]];
                            coeff_sum += coeff;
                            for &(k, c) in &v.entries {
                                out[k as usize] += coeff * c as f64;
                            }
                        }
                        for (slot, m) in out.iter_mut().zip(mean.iter()) {
                            *slot -= coeff_sum * m;
                        }
                        out
                    })
                    .collect();
                for (row, values) in scaled_rows.into_iter().enumerate() {
                    for (col, value) in values.into_iter().enumerate() {
                        components[[row, col]] = value;
                    }
                }
            }
        }
    }
    // Degenerate directions (zero variance) get a deterministic
    // orthonormal completion so the basis stays usable.
    for row in valid..s {
        complete_row(&mut components, row);
    }
    for mut row in components.rows_mut() {
        fix_sign(row.as_slice_mut().expect("row is contiguous"));
    }

    let comp_mean = components.dot(&mean).to_vec();
    Ok(PcaModel {
        category,
        vector_len: len,
        embedding_dim,
        seed,
        sample_size: n as u32,
        explained_variance,
        mean: mean.to_vec(),
        components,
        comp_mean,
    })
}

/// Fills `components[row]` with a unit vector orthogonal to rows above it,
/// derived from the first standard basis vector that is not already spanned.
fn complete_row(components: &mut Array2<f64>, row: usize) {
    let len = components.ncols();
    for basis in 0..len {
        let mut v = vec![0.0f64; len];
        v[basis] = 1.0;
        for prev in 0..row {
            let coeff = components[[prev, basis]];
            if coeff != 0.0 {
                for (vi, ci) in v.iter_mut().zip(components.row(prev).iter()) {
                    *vi -= coeff * ci;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            for (col, value) in v.into_iter().enumerate() {
                components[[row, col]] = value / norm;
            }
            return;
        }
    }
    unreachable!("fewer orthogonal directions than dimensions");
}

/// Makes the largest-magnitude coordinate positive (first index wins ties).
fn fix_sign(row: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = i;
        }
    }
    if row[best] < 0.0 {
        for v in row.iter_mut() {
            *v = -*v;
        }
    }
}

impl PcaModel {
    /// Projects a hashed vector onto the basis: `C (x - mean)`.
    pub fn embed(&self, v: &HashedVector) -> Result<Embedding> {
        if v.category != self.category {
            return Err(Error::CategoryMismatch {
                expected: self.category.name().into(),
                got: v.category.name().into(),
            });
        }
        if v.len != self.vector_len {
            return Err(Error::LengthMismatch {
                expected: self.vector_len as usize,
                got: v.len as usize,
            });
        }
        let s = self.embedding_dim as usize;
        let mut values = vec![0.0f64; s];
        for k in 0..s {
            let row = self.components.row(k);
            let mut acc = 0.0;
            for &(i, c) in &v.entries {
                acc += row[i as usize] * c as f64;
            }
            values[k] = acc - self.comp_mean[k];
        }
        Ok(Embedding {
            category: self.category,
            values,
        })
    }

    pub fn embed_batch(&self, vectors: &[HashedVector]) -> Result<Vec<Embedding>> {
        vectors.par_iter().map(|v| self.embed(v)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(
            48 + 8 * (self.embedding_dim as usize
                + self.vector_len as usize
                + self.embedding_dim as usize * self.vector_len as usize),
        );
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&u32::from(self.category.ordinal()).to_le_bytes());
        buf.extend_from_slice(&self.vector_len.to_le_bytes());
        buf.extend_from_slice(&self.embedding_dim.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.sample_size.to_le_bytes());
        buf.extend_from_slice(&(HASH_NAME.len() as u32).to_le_bytes());
        buf.extend_from_slice(HASH_NAME.as_bytes());
        for &v in &self.explained_variance {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.mean {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in self.components.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PcaModel> {
        let path = path.as_ref();
        let corrupt = |message: &str| Error::CorruptFile {
            what: "pca model",
            path: path.to_path_buf(),
            message: message.into(),
        };
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut reader = ByteReader::new(&buf);
        if reader.take(8).ok_or_else(|| corrupt("truncated magic"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = reader.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let ordinal = reader.u32().ok_or_else(|| corrupt("truncated header"))?;
        let category = u8::try_from(ordinal)
            .ok()
            .and_then(ContentCategory::from_ordinal)
            .ok_or_else(|| corrupt(&format!("unknown category ordinal {ordinal}")))?;
        let vector_len = reader.u32().ok_or_else(|| corrupt("truncated header"))?;
        let embedding_dim = reader.u32().ok_or_else(|| corrupt("truncated header"))?;
        let seed = reader.u64().ok_or_else(|| corrupt("truncated header"))?;
        let sample_size = reader.u32().ok_or_else(|| corrupt("truncated header"))?;
        let name_len = reader.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let name = reader.take(name_len).ok_or_else(|| corrupt("truncated hash name"))?;
        if name != HASH_NAME.as_bytes() {
            return Err(corrupt(&format!(
                "model built with hash {:?}, this build uses {HASH_NAME}",
                String::from_utf8_lossy(name)
            )));
        }
        let s = embedding_dim as usize;
        let l = vector_len as usize;
        let explained_variance = reader.f64s(s).ok_or_else(|| corrupt("truncated variances"))?;
        let mean = reader.f64s(l).ok_or_else(|| corrupt("truncated mean"))?;
        let flat = reader.f64s(s * l).ok_or_else(|| corrupt("truncated components"))?;
        if !reader.at_end() {
            return Err(corrupt("trailing bytes"));
        }
        let components =
            Array2::from_shape_vec((s, l), flat).expect("shape matches by construction");
        let mean_arr = Array1::from_vec(mean);
        let comp_mean = components.dot(&mean_arr).to_vec();
        Ok(PcaModel {
            category,
            vector_len,
            embedding_dim,
            seed,
            sample_size,
            explained_variance,
            mean: mean_arr.to_vec(),
            components,
            comp_mean,
        })
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let slice = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(slice)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Option<Vec<f64>> {
        let bytes = self.take(8 * n)?;
        Some(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ContentCategory;

    const CAT: ContentCategory = ContentCategory::DexBytes;

    fn hv(len: u32, entries: &[(u32, u64)]) -> HashedVector {
        HashedVector {
            category: CAT,
            len,
            entries: entries.to_vec(),
        }
    }

    fn random_vectors(n: usize, len: u32, seed: u64) -> Vec<HashedVector> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut entries = Vec::new();
                for i in 0..len {
                    if rng.random::<f64>() < 0.5 {
                        entries.push((i, rng.random_range(1..10u64)));
                    }
                }
                hv(len, &entries)
            })
            .collect()
    }

    fn orthonormality_residual(model: &PcaModel) -> f64 {
        let gram = model.components.dot(&model.components.t());
        let mut worst = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn exact_rank_data_reconstructs() {
        // Rows lie in a 2-dim affine subspace: m + a*u + b*w.
        let len = 24u32;
        let mut vectors = Vec::new();
        for a in 0..4u64 {
            for b in 0..3u64 {
                let entries: Vec<(u32, u64)> = (0..len)
                    .map(|i| {
                        let u = u64::from(i % 3);
                        let w = u64::from(i % 5);
                        (i, 7 + a * u + b * w)
                    })
                    .collect();
                vectors.push(hv(len, &entries));
            }
        }
        let model = fit_pca(&vectors, 2, 100, 0).unwrap();
        for v in &vectors {
            let e = model.embed(v).unwrap();
            // reconstruction: mean + C^T e
            let dense = v.to_dense_f64();
            let mut err = 0.0f64;
            for i in 0..len as usize {
                let mut rec = model.mean[i];
                for k in 0..2 {
                    rec += model.components[[k, i]] * e.values[k];
                }
                err += (rec - dense[i]).powi(2);
            }
            assert!(err.sqrt() <= 1e-6, "reconstruction error {}", err.sqrt());
        }
        assert!(orthonormality_residual(&model) <= 1e-6);
    }

    #[test]
    fn components_are_orthonormal_on_random_data() {
        let vectors = random_vectors(40, 64, 3);
        let model = fit_pca(&vectors, 10, 100, 0).unwrap();
        assert!(orthonormality_residual(&model) <= 1e-6);
        // sign convention: largest-magnitude coordinate positive
        for row in model.components.rows() {
            let mut best = 0usize;
            for (i, v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = i;
                }
            }
            assert!(row[best] > 0.0);
        }
    }

    #[test]
    fn explained_variance_matches_svd_oracle() {
        let vectors = random_vectors(60, 40, 11);
        let model = fit_pca(&vectors, 12, 100, 0).unwrap();

        // Oracle: full dense SVD of the centered matrix.
        let n = vectors.len();
        let l = 40usize;
        let mut x = Array2::<f64>::zeros((n, l));
        for (r, v) in vectors.iter().enumerate() {
            for &(i, c) in &v.entries {
                x[[r, i as usize]] = c as f64;
            }
        }
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        x -= &mean;
        let m = nalgebra::DMatrix::from_row_iterator(n, l, x.iter().copied());
        let svd = nalgebra::SVD::new(m, false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (k, &ev) in model.explained_variance.iter().enumerate() {
            let oracle = sv[k] * sv[k] / (n as f64 - 1.0);
            assert!(
                (ev - oracle).abs() <= 1e-6,
                "component {k}: {ev} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn identical_vectors_embed_to_zero() {
        let v = hv(16, &[(1, 4), (7, 2)]);
        let vectors = vec![v.clone(); 6];
        let model = fit_pca(&vectors, 2, 100, 0).unwrap();
        // every vector equals the mean, so embeddings are zero
        let e = model.embed(&v).unwrap();
        assert!(e.values.iter().all(|x| x.abs() < 1e-9));
        assert_eq!(model.embed(&v).unwrap(), e);
        assert!(orthonormality_residual(&model) <= 1e-6);
    }

    #[test]
    fn embedding_is_affine() {
        let vectors = random_vectors(30, 32, 5);
        let model = fit_pca(&vectors, 5, 100, 0).unwrap();
        let v1 = hv(32, &[(0, 4), (3, 8)]);
        let v2 = hv(32, &[(3, 2), (9, 6)]);
        let mid = hv(32, &[(0, 2), (3, 5), (9, 3)]);
        let e1 = model.embed(&v1).unwrap();
        let e2 = model.embed(&v2).unwrap();
        let em = model.embed(&mid).unwrap();
        for k in 0..5 {
            let expected = 0.5 * e1.values[k] + 0.5 * e2.values[k];
            assert!((em.values[k] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_non_expansive() {
        let vectors = random_vectors(30, 32, 6);
        let model = fit_pca(&vectors, 8, 100, 0).unwrap();
        for v in &vectors {
            let e = model.embed(v).unwrap();
            let en: f64 = e.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dense = v.to_dense_f64();
            let vn: f64 = dense
                .iter()
                .zip(&model.mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum::<f64>()
                .sqrt();
            assert!(en <= vn + 1e-6, "{en} > {vn}");
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let vectors = random_vectors(4, 16, 7);
        match fit_pca(&vectors, 8, 100, 0) {
            Err(Error::PcaTooFewSamples { required, available }) => {
                assert_eq!(required, 8);
                assert_eq!(available, 4);
            }
            other => panic!("expected too-few-samples, got {other:?}"),
        }
        // sampling below the cap triggers the same check
        let vectors = random_vectors(20, 16, 7);
        assert!(matches!(
            fit_pca(&vectors, 8, 4, 0),
            Err(Error::PcaTooFewSamples { available: 4, .. })
        ));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let a = hv(16, &[(0, 1)]);
        let mut b = hv(16, &[(1, 1)]);
        b.category = ContentCategory::ApkBytes;
        assert!(matches!(
            fit_pca(&[a.clone(), b], 1, 10, 0),
            Err(Error::CategoryMismatch { .. })
        ));
        let c = hv(32, &[(1, 1)]);
        assert!(matches!(
            fit_pca(&[a.clone(), c.clone()], 1, 10, 0),
            Err(Error::LengthMismatch { .. })
        ));
        let model = fit_pca(&random_vectors(10, 16, 8), 2, 10, 0).unwrap();
        assert!(matches!(model.embed(&c), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn fit_is_deterministic() {
        let vectors = random_vectors(50, 32, 9);
        let a = fit_pca(&vectors, 6, 20, 123).unwrap();
        let b = fit_pca(&vectors, 6, 20, 123).unwrap();
        assert_eq!(a, b);
        let c = fit_pca(&vectors, 6, 20, 124).unwrap();
        assert!(a.sample_size == c.sample_size);
    }

    #[test]
    fn model_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pca");
        let vectors = random_vectors(30, 48, 10);
        let model = fit_pca(&vectors, 7, 100, 42).unwrap();
        model.save(&path).unwrap();
        let loaded = PcaModel::load(&path).unwrap();
        assert_eq!(model, loaded);
        // re-saving yields identical bytes
        let path2 = dir.path().join("model2.pca");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn load_rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pca");
        let model = fit_pca(&random_vectors(10, 16, 12), 2, 10, 0).unwrap();
        model.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            PcaModel::load(&path),
            Err(Error::CorruptFile { .. })
        ));
        std::fs::write(&path, &[1, 2, 3]).unwrap();
        assert!(PcaModel::load(&path).is_err());
    }
}

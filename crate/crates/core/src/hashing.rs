//! Feature hashing: items are folded into a fixed-length count vector via
//! `index = fnv1a64(seed, item) mod L`.
//!
//! The hash is seeded FNV-1a (64-bit, offset basis XOR seed, prime
//! 0x100000001b3), chosen because it is trivial to reimplement bit-exactly
//! in any language, which keeps signature databases portable across
//! machines. Vectors are stored sparsely; the logical length `L` is part of
//! the type.

use serde::{Deserialize, Serialize};

use crate::bundle::ContentCategory;
use crate::error::{Error, Result};
use crate::features::FeatureMultiset;

/// Name of the item hash, recorded in persisted model headers.
pub const HASH_NAME: &str = "fnv1a64";

/// Hash seed used unless a config overrides it.
pub const DEFAULT_HASH_SEED: u64 = 0;

/// Default hashed vector length.
pub const DEFAULT_VECTOR_LEN: u32 = 1 << 16;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit FNV-1a. With `seed == 0` this is the textbook function.
pub fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET_BASIS ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Fixed-length count vector over hashed feature indices, stored sparsely.
/// Entries are sorted by index and the entry sum equals the source
/// multiset's total count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedVector {
    pub category: ContentCategory,
    /// Logical vector length `L`.
    pub len: u32,
    /// `(index, count)` pairs with `count >= 1`, sorted by index.
    pub entries: Vec<(u32, u64)>,
}

impl HashedVector {
    /// All-zero vector, used for samples missing a content category.
    pub fn zero(category: ContentCategory, len: u32) -> Self {
        HashedVector {
            category,
            len,
            entries: Vec::new(),
        }
    }

    /// Sum of all entries, i.e. the total feature count.
    pub fn sum(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn get(&self, index: u32) -> u64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }

    pub fn to_dense_f64(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.len as usize];
        for &(i, c) in &self.entries {
            dense[i as usize] = c as f64;
        }
        dense
    }

    /// Euclidean distance between two hashed vectors of the same shape.
    pub fn distance(&self, other: &HashedVector) -> Result<f64> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len as usize,
                got: other.len as usize,
            });
        }
        Ok(sparse_distance(&self.entries, &other.entries))
    }
}

/// Euclidean distance of two sorted sparse count vectors.
pub(crate) fn sparse_distance(a: &[(u32, u64)], b: &[(u32, u64)]) -> f64 {
    let mut sum = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        let diff = match (a.get(i), b.get(j)) {
            (Some(&(ia, ca)), Some(&(ib, cb))) => {
                if ia == ib {
                    i += 1;
                    j += 1;
                    ca as f64 - cb as f64
                } else if ia < ib {
                    i += 1;
                    ca as f64
                } else {
                    j += 1;
                    -(cb as f64)
                }
            }
            (Some(&(_, ca)), None) => {
                i += 1;
                ca as f64
            }
            (None, Some(&(_, cb))) => {
                j += 1;
                -(cb as f64)
            }
            (None, None) => break,
        };
        sum += diff * diff;
    }
    sum.sqrt()
}

/// Folds a feature multiset into a hashed count vector of length `len`.
///
/// Every item occurrence increments exactly one slot, so the vector sum
/// equals the multiset total regardless of collisions.
pub fn hash_features(ms: &FeatureMultiset, len: u32, seed: u64) -> Result<HashedVector> {
    if len < 2 {
        return Err(Error::InvalidParam(format!(
            "hashed vector length must be at least 2, got {len}"
        )));
    }
    let mut slots: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    for (item, &count) in &ms.counts {
        let index = (fnv1a64(seed, item) % u64::from(len)) as u32;
        *slots.entry(index).or_insert(0) += count;
    }
    Ok(HashedVector {
        category: ms.category,
        len,
        entries: slots.into_iter().collect(),
    })
}

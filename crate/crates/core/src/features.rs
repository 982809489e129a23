//! Feature extraction: N-gram multisets for byte streams, raw token counts
//! for set-valued contents.

use std::collections::BTreeMap;

use crate::bundle::{ContentCategory, ContentPayload, SampleBundle};
use crate::error::{Error, Result};

/// Extracted feature items with their occurrence counts. Items are opaque
/// byte strings (n-grams or token bytes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMultiset {
    pub category: ContentCategory,
    pub counts: BTreeMap<Vec<u8>, u64>,
}

impl FeatureMultiset {
    pub fn empty(category: ContentCategory) -> Self {
        FeatureMultiset {
            category,
            counts: BTreeMap::new(),
        }
    }

    /// Total number of extracted items (sum of counts).
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Per-category N-gram window lengths for byte-stream contents; stride is
/// always 1 and token contents ignore it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NgramConfig {
    pub n_by_category: BTreeMap<ContentCategory, usize>,
}

impl Default for NgramConfig {
    fn default() -> Self {
        let n_by_category = ContentCategory::ALL
            .into_iter()
            .filter(|c| c.is_byte_blob())
            .map(|c| (c, 3))
            .collect();
        NgramConfig { n_by_category }
    }
}

impl NgramConfig {
    pub fn n_for(&self, category: ContentCategory) -> usize {
        self.n_by_category.get(&category).copied().unwrap_or(3)
    }

    pub fn validate(&self) -> Result<()> {
        for (category, &n) in &self.n_by_category {
            if !category.is_byte_blob() {
                return Err(Error::InvalidConfig(format!(
                    "ngram length configured for token category {category}"
                )));
            }
            if n == 0 {
                return Err(Error::InvalidConfig(format!(
                    "ngram length for {category} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

/// Sliding-window n-grams with stride 1: a blob of length `b >= n` yields
/// exactly `b - n + 1` items, shorter blobs yield none.
pub fn extract_ngrams(category: ContentCategory, blob: &[u8], n: usize) -> FeatureMultiset {
    assert!(n >= 1, "ngram window must be at least 1");
    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    if blob.len() >= n {
        for gram in blob.windows(n) {
            *counts.entry(gram.to_vec()).or_insert(0) += 1;
        }
    }
    FeatureMultiset { category, counts }
}

/// Identity mapping of a token multiset into counts. Tokens are kept as
/// opaque byte strings.
pub fn extract_tokens(category: ContentCategory, tokens: &[String]) -> FeatureMultiset {
    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_bytes().to_vec()).or_insert(0) += 1;
    }
    FeatureMultiset { category, counts }
}

/// Extracts one multiset per content present in the bundle. Absent
/// categories yield no entry; downstream treats them as zero vectors.
pub fn extract_sample(
    bundle: &SampleBundle,
    cfg: &NgramConfig,
) -> BTreeMap<ContentCategory, FeatureMultiset> {
    bundle
        .contents
        .iter()
        .map(|(&category, payload)| {
            let ms = match payload {
                ContentPayload::ByteBlob(blob) => {
                    extract_ngrams(category, blob, cfg.n_for(category))
                }
                ContentPayload::TokenSet(tokens) => extract_tokens(category, tokens),
            };
            (category, ms)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CAT: ContentCategory = ContentCategory::DexBytes;

    /// Naive re-implementation used as the oracle: enumerate every start
    /// offset and count grams in a flat list.
    fn naive_ngram_total(blob: &[u8], n: usize) -> usize {
        let mut total = 0;
        let mut start = 0usize;
        loop {
            if start + n > blob.len() {
                break;
            }
            total += 1;
            start += 1;
        }
        total
    }

    #[test]
    fn ngrams_abcd_window_two() {
        let ms = extract_ngrams(CAT, b"ABCD", 2);
        assert_eq!(ms.counts.len(), 3);
        assert_eq!(ms.counts[b"AB".as_slice()], 1);
        assert_eq!(ms.counts[b"BC".as_slice()], 1);
        assert_eq!(ms.counts[b"CD".as_slice()], 1);
    }

    #[test]
    fn ngrams_count_repeats() {
        let ms = extract_ngrams(CAT, b"AAAA", 2);
        assert_eq!(ms.counts.len(), 1);
        assert_eq!(ms.counts[b"AA".as_slice()], 3);
    }

    #[test]
    fn ngrams_of_random_blob_match_naive_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let blob: Vec<u8> = (0..1000).map(|_| rng.random()).collect();
        let ms = extract_ngrams(CAT, &blob, 3);
        assert_eq!(ms.total(), 998);
        assert_eq!(ms.total() as usize, naive_ngram_total(&blob, 3));
    }

    #[test]
    fn ngrams_short_blob_is_empty() {
        assert!(extract_ngrams(CAT, b"AB", 3).counts.is_empty());
        assert!(extract_ngrams(CAT, b"", 1).counts.is_empty());
    }

    #[test]
    fn tokens_counted_as_multiset() {
        let ms = extract_tokens(ContentCategory::Permissions, &[]);
        assert!(ms.counts.is_empty());
        let tokens = vec!["SEND_SMS".to_string(), "INTERNET".into(), "SEND_SMS".into()];
        let ms = extract_tokens(ContentCategory::Permissions, &tokens);
        assert_eq!(ms.counts[b"SEND_SMS".as_slice()], 2);
        assert_eq!(ms.counts[b"INTERNET".as_slice()], 1);
    }

    #[test]
    fn tokens_preserve_non_ascii_bytes() {
        let tokens = vec!["péríl\u{7f}".to_string()];
        let ms = extract_tokens(ContentCategory::FileNames, &tokens);
        assert_eq!(ms.counts["péríl\u{7f}".as_bytes()], 1);
    }

    #[test]
    fn extract_sample_covers_present_categories_only() {
        use crate::bundle::ContentPayload;
        use std::collections::BTreeMap;
        let cfg = NgramConfig::default();
        let mut contents = BTreeMap::new();
        contents.insert(CAT, ContentPayload::ByteBlob(b"ABCDEF".to_vec()));
        let bundle = SampleBundle {
            id: "s".into(),
            author: None,
            truth_family: None,
            contents,
        };
        let by_cat = extract_sample(&bundle, &cfg);
        assert_eq!(by_cat.len(), 1);
        assert_eq!(by_cat[&CAT].total(), 4);
        assert_eq!(by_cat, extract_sample(&bundle, &cfg));
    }

    #[test]
    fn extract_sample_with_all_categories() {
        use crate::bundle::ContentPayload;
        use std::collections::BTreeMap;
        let cfg = NgramConfig::default();
        let mut contents = BTreeMap::new();
        for category in ContentCategory::ALL {
            let payload = if category.is_byte_blob() {
                ContentPayload::ByteBlob(vec![1, 2, 3, 4, 5])
            } else {
                ContentPayload::TokenSet(vec!["t".into()])
            };
            contents.insert(category, payload);
        }
        let bundle = SampleBundle {
            id: "s".into(),
            author: None,
            truth_family: None,
            contents,
        };
        assert_eq!(extract_sample(&bundle, &cfg).len(), 10);
    }

    proptest! {
        #[test]
        fn ngram_total_matches_window_formula(blob in proptest::collection::vec(any::<u8>(), 0..200), n in 1usize..6) {
            let ms = extract_ngrams(CAT, &blob, n);
            let expected = if blob.len() >= n { blob.len() - n + 1 } else { 0 };
            prop_assert_eq!(ms.total() as usize, expected);
            prop_assert!(ms.counts.values().all(|&c| c >= 1));
        }

        #[test]
        fn token_extraction_is_permutation_invariant(tokens in proptest::collection::vec("[a-z]{1,6}", 0..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = tokens.clone();
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            let a = extract_tokens(ContentCategory::AndroidApi, &tokens);
            let b = extract_tokens(ContentCategory::AndroidApi, &shuffled);
            prop_assert_eq!(a, b);
        }
    }
}

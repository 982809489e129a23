//! Synthetic planted-family datasets.
//!
//! Content model, chosen to mirror the shape of real static features:
//!
//! * Byte contents are low-entropy: every sample writes over a small
//!   per-sample symbol alphabet (drawn from a global per-category
//!   alphabet), the way real code sections reuse a narrow instruction
//!   vocabulary. A family plants one symbol sequence; members carry it
//!   with in-alphabet point mutations at the noise rate, so noise moves
//!   n-gram counts around instead of inventing new n-grams.
//! * Token contents are overlapping subsets: a family plants a token pool
//!   with per-token multiplicities and every member carries a random
//!   subset of it, plus a few background tokens and count jitter at the
//!   noise rate.
//! * Benign singletons get their own alphabets and pools, sharing nothing
//!   with anyone beyond the global background vocabulary.
//!
//! The generator is deterministic under its seed. At noise 0 a family
//! member's byte blobs equal the planted sequences verbatim.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::bundle::{ContentCategory, ContentPayload, SampleBundle, BENIGN_LABEL};
use crate::error::{Error, Result};
use crate::util::stage_rng;

/// Number of distinct opcodes; opcode-stream bytes stay below this.
pub const OPCODE_ALPHABET: u8 = 200;

/// Global symbol vocabulary per byte category.
const GLOBAL_SYMBOLS: usize = 64;
/// Symbols each sample actually uses.
const SAMPLE_SYMBOLS: usize = 6;
/// Probability that a member carries a given pool token.
const TOKEN_INCLUDE_PROB: f64 = 0.7;
/// Shared background vocabulary per token category.
const BACKGROUND_TOKENS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub families: usize,
    pub per_family: usize,
    pub benign: usize,
    /// Fraction of each sample's content that is randomized: byte mutation
    /// probability, token count jitter and background token volume.
    pub noise: f64,
    /// Planted payload size per content category: sequence length in bytes
    /// for blob contents, pool size in tokens for token contents.
    pub payload_sizes: BTreeMap<ContentCategory, usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let payload_sizes = BTreeMap::from([
            (ContentCategory::ApkBytes, 1500),
            (ContentCategory::DexBytes, 1500),
            (ContentCategory::NativeLibBytes, 1000),
            (ContentCategory::OpcodeStream, 1200),
            (ContentCategory::AndroidApi, 40),
            (ContentCategory::Permissions, 12),
            (ContentCategory::Activities, 24),
            (ContentCategory::Services, 12),
            (ContentCategory::IpsUrls, 6),
            (ContentCategory::FileNames, 24),
        ]);
        SyntheticSpec {
            families: 2,
            per_family: 10,
            benign: 0,
            noise: 0.0,
            payload_sizes,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.families * self.per_family + self.benign == 0 {
            return Err(Error::EmptySynthetic);
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParam(format!(
                "noise rate must be in [0, 1], got {}",
                self.noise
            )));
        }
        if self.payload_sizes.values().any(|&s| s == 0) {
            return Err(Error::InvalidParam(
                "payload sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn family_label(family: usize) -> String {
        format!("fam{family:02}")
    }
}

/// The global symbol vocabulary of one byte category.
fn global_alphabet(category: ContentCategory) -> Vec<u8> {
    let stride = if category == ContentCategory::OpcodeStream {
        (OPCODE_ALPHABET as usize) / GLOBAL_SYMBOLS
    } else {
        256 / GLOBAL_SYMBOLS
    };
    (0..GLOBAL_SYMBOLS).map(|i| (i * stride) as u8).collect()
}

fn fresh_token(rng: &mut ChaCha12Rng) -> String {
    format!("{:016x}", rng.random::<u64>())
}

/// Per-token copy count in a planted pool; varies so counts carry signal.
fn multiplicity(index: usize) -> u64 {
    2 + (index % 4) as u64
}

/// One actor's identity: a symbol sub-alphabet per byte category and a
/// token pool per token category.
struct ContentProfile {
    symbols: BTreeMap<ContentCategory, Vec<u8>>,
    sequences: BTreeMap<ContentCategory, Vec<u8>>,
    pools: BTreeMap<ContentCategory, Vec<String>>,
}

fn make_profile(
    rng: &mut ChaCha12Rng,
    payload_sizes: &BTreeMap<ContentCategory, usize>,
) -> ContentProfile {
    let mut symbols = BTreeMap::new();
    let mut sequences = BTreeMap::new();
    let mut pools = BTreeMap::new();
    for (&category, &size) in payload_sizes {
        if category.is_byte_blob() {
            let global = global_alphabet(category);
            let mut own: Vec<u8> = Vec::new();
            while own.len() < SAMPLE_SYMBOLS {
                let s = *global.choose(rng).expect("alphabet nonempty");
                if !own.contains(&s) {
                    own.push(s);
                }
            }
            let sequence: Vec<u8> = (0..size)
                .map(|_| own[rng.random_range(0..own.len())])
                .collect();
            symbols.insert(category, own);
            sequences.insert(category, sequence);
        } else {
            pools.insert(category, (0..size).map(|_| fresh_token(rng)).collect());
        }
    }
    ContentProfile {
        symbols,
        sequences,
        pools,
    }
}

/// Generates `families * per_family` family samples plus `benign`
/// singletons. Family samples carry `truth_family = famNN`; benign
/// samples carry [`BENIGN_LABEL`]. Byte-identical across runs for the
/// same spec and seed.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<SampleBundle>> {
    spec.validate()?;
    let mut rng = stage_rng(seed, "synth");

    // Background vocabulary shared by everyone, per token category.
    let mut background: BTreeMap<ContentCategory, Vec<String>> = BTreeMap::new();
    for (&category, _) in spec.payload_sizes.iter().filter(|(c, _)| !c.is_byte_blob()) {
        background.insert(
            category,
            (0..BACKGROUND_TOKENS).map(|_| fresh_token(&mut rng)).collect(),
        );
    }

    let profiles: Vec<ContentProfile> = (0..spec.families)
        .map(|_| make_profile(&mut rng, &spec.payload_sizes))
        .collect();

    let mut bundles = Vec::new();
    for (family, profile) in profiles.iter().enumerate() {
        for sample in 0..spec.per_family {
            let contents = member_contents(&mut rng, profile, &background, spec.noise);
            bundles.push(SampleBundle {
                id: format!("fam{family:02}-s{sample:03}"),
                author: None,
                truth_family: Some(SyntheticSpec::family_label(family)),
                contents,
            });
        }
    }
    for b in 0..spec.benign {
        let profile = make_profile(&mut rng, &spec.payload_sizes);
        // A benign app carries its full own profile; only the background
        // vocabulary is shared with the rest of the dataset.
        let mut contents = BTreeMap::new();
        for (&category, sequence) in &profile.sequences {
            contents.insert(category, ContentPayload::ByteBlob(sequence.clone()));
        }
        for (&category, pool) in &profile.pools {
            let mut tokens = Vec::new();
            for (index, token) in pool.iter().enumerate() {
                for _ in 0..multiplicity(index) {
                    tokens.push(token.clone());
                }
            }
            let extras = (spec.noise * pool.len() as f64).round() as usize;
            for _ in 0..extras {
                tokens.push(background[&category][rng.random_range(0..BACKGROUND_TOKENS)].clone());
            }
            contents.insert(category, ContentPayload::TokenSet(tokens));
        }
        bundles.push(SampleBundle {
            id: format!("ben-{b:04}"),
            author: None,
            truth_family: Some(BENIGN_LABEL.to_string()),
            contents,
        });
    }
    bundles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(bundles)
}

/// One family member's contents: planted byte sequences with in-alphabet
/// mutations, and a pool subset with count jitter plus background tokens.
fn member_contents(
    rng: &mut ChaCha12Rng,
    profile: &ContentProfile,
    background: &BTreeMap<ContentCategory, Vec<String>>,
    noise: f64,
) -> BTreeMap<ContentCategory, ContentPayload> {
    let mut contents = BTreeMap::new();
    for (&category, sequence) in &profile.sequences {
        let own = &profile.symbols[&category];
        let mut blob = sequence.clone();
        if noise > 0.0 {
            for byte in blob.iter_mut() {
                if rng.random::<f64>() < noise {
                    *byte = own[rng.random_range(0..own.len())];
                }
            }
        }
        contents.insert(category, ContentPayload::ByteBlob(blob));
    }
    for (&category, pool) in &profile.pools {
        let mut tokens = Vec::new();
        for (index, token) in pool.iter().enumerate() {
            if rng.random::<f64>() >= TOKEN_INCLUDE_PROB {
                continue;
            }
            let mut count = multiplicity(index);
            if noise > 0.0 && rng.random::<f64>() < noise {
                count = if rng.random::<bool>() {
                    count + 1
                } else {
                    count.saturating_sub(1).max(1)
                };
            }
            for _ in 0..count {
                tokens.push(token.clone());
            }
        }
        let extras = (noise * pool.len() as f64).round() as usize;
        for _ in 0..extras {
            tokens.push(background[&category][rng.random_range(0..BACKGROUND_TOKENS)].clone());
        }
        contents.insert(category, ContentPayload::TokenSet(tokens));
    }
    contents
}

/// Renames each token with probability `rate` (obfuscation stand-in).
pub fn rename_tokens(bundles: &[SampleBundle], rate: f64, seed: u64) -> Vec<SampleBundle> {
    let mut rng = stage_rng(seed, "perturb-rename");
    bundles
        .iter()
        .map(|bundle| {
            let mut out = bundle.clone();
            for payload in out.contents.values_mut() {
                if let ContentPayload::TokenSet(tokens) = payload {
                    for token in tokens.iter_mut() {
                        if rng.random::<f64>() < rate {
                            *token = fresh_token(&mut rng);
                        }
                    }
                }
            }
            out
        })
        .collect()
}

/// Inserts `round(rate * len)` junk bytes at random positions of every byte
/// blob (repackaging stand-in).
pub fn insert_junk_bytes(bundles: &[SampleBundle], rate: f64, seed: u64) -> Vec<SampleBundle> {
    let mut rng = stage_rng(seed, "perturb-junk");
    bundles
        .iter()
        .map(|bundle| {
            let mut out = bundle.clone();
            for (&category, payload) in out.contents.iter_mut() {
                if let ContentPayload::ByteBlob(blob) = payload {
                    let inserts = (rate * blob.len() as f64).round() as usize;
                    for _ in 0..inserts {
                        let pos = rng.random_range(0..=blob.len());
                        let junk = if category == ContentCategory::OpcodeStream {
                            rng.random_range(0..OPCODE_ALPHABET)
                        } else {
                            rng.random()
                        };
                        blob.insert(pos, junk);
                    }
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token_set(bundle: &SampleBundle, category: ContentCategory) -> Vec<&str> {
        match &bundle.contents[&category] {
            ContentPayload::TokenSet(tokens) => tokens.iter().map(|s| s.as_str()).collect(),
            _ => panic!("not a token set"),
        }
    }

    fn jaccard(a: &[&str], b: &[&str]) -> f64 {
        use std::collections::BTreeSet;
        let sa: BTreeSet<&str> = a.iter().copied().collect();
        let sb: BTreeSet<&str> = b.iter().copied().collect();
        let inter = sa.intersection(&sb).count() as f64;
        let union = sa.union(&sb).count() as f64;
        if union == 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    #[test]
    fn counts_and_labels() {
        let spec = SyntheticSpec {
            families: 2,
            per_family: 5,
            benign: 0,
            ..Default::default()
        };
        let bundles = generate_synthetic(&spec, 1).unwrap();
        assert_eq!(bundles.len(), 10);
        let families: std::collections::BTreeSet<_> =
            bundles.iter().map(|b| b.truth_family.clone().unwrap()).collect();
        assert_eq!(families.len(), 2);

        let spec = SyntheticSpec {
            families: 3,
            per_family: 4,
            benign: 5,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&spec, 1).unwrap().len(), 17);
    }

    #[test]
    fn empty_spec_is_an_error() {
        let spec = SyntheticSpec {
            families: 0,
            per_family: 10,
            benign: 0,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic(&spec, 1),
            Err(Error::EmptySynthetic)
        ));
    }

    #[test]
    fn zero_noise_plants_byte_payload_verbatim() {
        let spec = SyntheticSpec {
            families: 1,
            per_family: 3,
            ..Default::default()
        };
        let bundles = generate_synthetic(&spec, 2).unwrap();
        for category in ContentCategory::ALL.into_iter().filter(|c| c.is_byte_blob()) {
            // all members share the identical planted sequence
            assert_eq!(bundles[0].contents[&category], bundles[1].contents[&category]);
            assert_eq!(bundles[1].contents[&category], bundles[2].contents[&category]);
        }
    }

    #[test]
    fn opcode_streams_stay_in_the_opcode_alphabet() {
        let spec = SyntheticSpec {
            families: 2,
            per_family: 3,
            benign: 2,
            noise: 0.3,
            ..Default::default()
        };
        for bundle in generate_synthetic(&spec, 3).unwrap() {
            if let ContentPayload::ByteBlob(blob) = &bundle.contents[&ContentCategory::OpcodeStream]
            {
                assert!(blob.iter().all(|&b| b < OPCODE_ALPHABET));
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec {
            families: 3,
            per_family: 4,
            benign: 5,
            noise: 0.2,
            ..Default::default()
        };
        let a = generate_synthetic(&spec, 77).unwrap();
        let b = generate_synthetic(&spec, 77).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&spec, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn intra_family_jaccard_exceeds_inter_family_at_zero_noise() {
        let spec = SyntheticSpec {
            families: 2,
            per_family: 4,
            benign: 2,
            ..Default::default()
        };
        let bundles = generate_synthetic(&spec, 5).unwrap();
        let by_family = |label: &str| -> Vec<&SampleBundle> {
            bundles
                .iter()
                .filter(|b| b.truth_family.as_deref() == Some(label))
                .collect()
        };
        let fam0 = by_family("fam00");
        let fam1 = by_family("fam01");
        for category in [ContentCategory::Permissions, ContentCategory::AndroidApi] {
            let intra = jaccard(&token_set(fam0[0], category), &token_set(fam0[1], category));
            let inter = jaccard(&token_set(fam0[0], category), &token_set(fam1[0], category));
            assert!(intra > inter, "{category}: intra {intra} <= inter {inter}");
        }
    }

    #[test]
    fn family_members_share_byte_alphabet_benign_does_not_cluster() {
        use std::collections::BTreeSet;
        let spec = SyntheticSpec {
            families: 2,
            per_family: 3,
            benign: 3,
            noise: 0.05,
            ..Default::default()
        };
        let bundles = generate_synthetic(&spec, 7).unwrap();
        let symbols = |b: &SampleBundle| -> BTreeSet<u8> {
            match &b.contents[&ContentCategory::DexBytes] {
                ContentPayload::ByteBlob(blob) => blob.iter().copied().collect(),
                _ => unreachable!(),
            }
        };
        // members of one family draw from one small alphabet
        let fam: Vec<&SampleBundle> = bundles
            .iter()
            .filter(|b| b.truth_family.as_deref() == Some("fam00"))
            .collect();
        let union: BTreeSet<u8> = fam.iter().flat_map(|b| symbols(b)).collect();
        assert!(union.len() <= SAMPLE_SYMBOLS, "family union {}", union.len());
        // benign samples use their own alphabets
        let benign: Vec<&SampleBundle> = bundles
            .iter()
            .filter(|b| b.truth_family.as_deref() == Some(BENIGN_LABEL))
            .collect();
        let overlap = symbols(benign[0])
            .intersection(&symbols(benign[1]))
            .count();
        assert!(overlap < SAMPLE_SYMBOLS, "benign profiles should differ");
    }

    #[test]
    fn perturbations_are_deterministic_and_bounded() {
        let spec = SyntheticSpec {
            families: 1,
            per_family: 2,
            benign: 1,
            noise: 0.1,
            ..Default::default()
        };
        let bundles = generate_synthetic(&spec, 9).unwrap();
        let renamed = rename_tokens(&bundles, 0.1, 3);
        assert_eq!(renamed, rename_tokens(&bundles, 0.1, 3));
        assert_eq!(renamed.len(), bundles.len());
        // rate 0 keeps everything
        assert_eq!(rename_tokens(&bundles, 0.0, 3), bundles);

        let junked = insert_junk_bytes(&bundles, 0.1, 4);
        assert_eq!(junked, insert_junk_bytes(&bundles, 0.1, 4));
        for (before, after) in bundles.iter().zip(&junked) {
            for (category, payload) in &before.contents {
                if let (ContentPayload::ByteBlob(old), ContentPayload::ByteBlob(new)) =
                    (payload, &after.contents[category])
                {
                    let expected = old.len() + (0.1 * old.len() as f64).round() as usize;
                    assert_eq!(new.len(), expected);
                }
            }
        }
        // opcode alphabet survives junk insertion
        for bundle in &junked {
            if let ContentPayload::ByteBlob(blob) = &bundle.contents[&ContentCategory::OpcodeStream]
            {
                assert!(blob.iter().all(|&b| b < OPCODE_ALPHABET));
            }
        }
    }
}

//! Sample bundles: the neutral on-disk form of one sample's static contents.
//!
//! A bundle file holds one JSON object per sample, either as a single
//! document or line-delimited. Byte-valued contents are base64 encoded:
//!
//! ```json
//! {"id": "a", "author": null, "truth_family": "famA",
//!  "contents": {"DexBytes": {"bytes_b64": "AAEC"},
//!               "Permissions": {"tokens": ["SEND_SMS"]}}}
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::stage_rng;

/// Truth label used for benign samples in labeled datasets.
pub const BENIGN_LABEL: &str = "benign";

/// The implemented content categories. Ordinals are part of the on-disk
/// formats and must not be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContentCategory {
    ApkBytes = 0,
    DexBytes = 1,
    NativeLibBytes = 2,
    OpcodeStream = 3,
    AndroidApi = 6,
    Permissions = 8,
    Activities = 9,
    Services = 10,
    IpsUrls = 12,
    FileNames = 13,
}

impl ContentCategory {
    pub const ALL: [ContentCategory; 10] = [
        ContentCategory::ApkBytes,
        ContentCategory::DexBytes,
        ContentCategory::NativeLibBytes,
        ContentCategory::OpcodeStream,
        ContentCategory::AndroidApi,
        ContentCategory::Permissions,
        ContentCategory::Activities,
        ContentCategory::Services,
        ContentCategory::IpsUrls,
        ContentCategory::FileNames,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ord: u8) -> Option<ContentCategory> {
        Self::ALL.into_iter().find(|c| c.ordinal() == ord)
    }

    /// Byte-stream categories carry raw byte blobs; the rest carry token sets.
    pub fn is_byte_blob(self) -> bool {
        self.ordinal() <= 3
    }

    pub fn name(self) -> &'static str {
        match self {
            ContentCategory::ApkBytes => "ApkBytes",
            ContentCategory::DexBytes => "DexBytes",
            ContentCategory::NativeLibBytes => "NativeLibBytes",
            ContentCategory::OpcodeStream => "OpcodeStream",
            ContentCategory::AndroidApi => "AndroidApi",
            ContentCategory::Permissions => "Permissions",
            ContentCategory::Activities => "Activities",
            ContentCategory::Services => "Services",
            ContentCategory::IpsUrls => "IpsUrls",
            ContentCategory::FileNames => "FileNames",
        }
    }

    pub fn parse(name: &str) -> Option<ContentCategory> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ContentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One content's payload: a raw byte sequence or a multiset of tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPayload {
    ByteBlob(Vec<u8>),
    TokenSet(Vec<String>),
}

impl ContentPayload {
    pub fn is_byte_blob(&self) -> bool {
        matches!(self, ContentPayload::ByteBlob(_))
    }
}

/// One sample's static contents plus metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBundle {
    pub id: String,
    pub author: Option<String>,
    /// Ground-truth family, used by evaluation only. `BENIGN_LABEL` marks
    /// benign samples; `None` means unlabeled.
    pub truth_family: Option<String>,
    pub contents: BTreeMap<ContentCategory, ContentPayload>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PayloadRepr {
    Bytes { bytes_b64: String },
    Tokens { tokens: Vec<String> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleRepr {
    id: String,
    #[serde(default)]
    author: Option<String>,
    #[serde(default)]
    truth_family: Option<String>,
    contents: BTreeMap<String, PayloadRepr>,
}

impl SampleBundle {
    fn from_repr(repr: BundleRepr) -> std::result::Result<SampleBundle, String> {
        if repr.id.is_empty() {
            return Err("sample id must be nonempty".into());
        }
        let mut contents = BTreeMap::new();
        for (name, payload) in repr.contents {
            let category = ContentCategory::parse(&name)
                .ok_or_else(|| format!("unknown content category `{name}`"))?;
            let payload = match payload {
                PayloadRepr::Bytes { bytes_b64 } => {
                    if !category.is_byte_blob() {
                        return Err(format!("category {category} takes tokens, not bytes"));
                    }
                    let bytes = BASE64
                        .decode(bytes_b64.as_bytes())
                        .map_err(|e| format!("bad base64 for {category}: {e}"))?;
                    ContentPayload::ByteBlob(bytes)
                }
                PayloadRepr::Tokens { tokens } => {
                    if category.is_byte_blob() {
                        return Err(format!("category {category} takes bytes, not tokens"));
                    }
                    ContentPayload::TokenSet(tokens)
                }
            };
            contents.insert(category, payload);
        }
        Ok(SampleBundle {
            id: repr.id,
            author: repr.author,
            truth_family: repr.truth_family,
            contents,
        })
    }

    fn to_repr(&self) -> BundleRepr {
        let contents = self
            .contents
            .iter()
            .map(|(category, payload)| {
                let repr = match payload {
                    ContentPayload::ByteBlob(bytes) => PayloadRepr::Bytes {
                        bytes_b64: BASE64.encode(bytes),
                    },
                    ContentPayload::TokenSet(tokens) => PayloadRepr::Tokens {
                        tokens: tokens.clone(),
                    },
                };
                (category.name().to_string(), repr)
            })
            .collect();
        BundleRepr {
            id: self.id.clone(),
            author: self.author.clone(),
            truth_family: self.truth_family.clone(),
            contents,
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<SampleBundle, String> {
        let repr: BundleRepr = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_repr(repr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_repr()).expect("bundle serialization cannot fail")
    }
}

/// A record that failed to parse. Loading continues past these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file.display(), line, self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

#[derive(Debug, Default)]
pub struct LoadedDataset {
    /// Parsed bundles, ordered lexicographically by id.
    pub bundles: Vec<SampleBundle>,
    /// Per-record parse failures.
    pub errors: Vec<RecordError>,
}

/// Loads bundles from a line-delimited file or a directory of such files.
///
/// Malformed records are reported in [`LoadedDataset::errors`]; a duplicate
/// id is fatal and names both source records.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mut files = Vec::new();
    if meta.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        files.extend(entries);
    } else {
        files.push(path.to_path_buf());
    }

    let mut out = LoadedDataset::default();
    // id -> "file:line" of the first occurrence, for duplicate reporting
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let records = split_records(&file, &text);
        for (line, record) in records {
            match SampleBundle::from_json(record) {
                Ok(bundle) => {
                    let origin = match line {
                        Some(l) => format!("{}:{}", file.display(), l),
                        None => file.display().to_string(),
                    };
                    if let Some(first) = seen.get(&bundle.id) {
                        return Err(Error::DuplicateId {
                            id: bundle.id,
                            first: first.clone(),
                            second: origin,
                        });
                    }
                    seen.insert(bundle.id.clone(), origin);
                    out.bundles.push(bundle);
                }
                Err(message) => out.errors.push(RecordError {
                    file: file.clone(),
                    line,
                    message,
                }),
            }
        }
    }
    out.bundles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Splits a file into records: a whole-file JSON object, or one per line.
fn split_records<'a>(_file: &Path, text: &'a str) -> Vec<(Option<usize>, &'a str)> {
    if serde_json::from_str::<serde_json::Value>(text).is_ok() {
        return vec![(None, text)];
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (Some(i + 1), l))
        .collect()
}

/// Writes bundles as one line-delimited JSON file.
pub fn write_dataset(path: impl AsRef<Path>, bundles: &[SampleBundle]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for bundle in bundles {
        text.push_str(&bundle.to_json());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of sibling deduplication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiblingFilter {
    /// Survivors, in input order.
    pub kept: Vec<SampleBundle>,
    /// Excluded sample ids grouped by author, so verdicts on the kept
    /// representative can be propagated to its siblings afterwards.
    pub siblings: BTreeMap<String, Vec<String>>,
}

/// Keeps one uniformly chosen representative per author; authorless bundles
/// always survive. Deterministic under `seed`.
pub fn filter_siblings(dataset: Vec<SampleBundle>, seed: u64) -> SiblingFilter {
    let mut by_author: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, bundle) in dataset.iter().enumerate() {
        if let Some(author) = &bundle.author {
            by_author.entry(author.clone()).or_default().push(idx);
        }
    }

    let mut rng = stage_rng(seed, "sibling-filter");
    let mut drop = vec![false; dataset.len()];
    let mut siblings = BTreeMap::new();
    for (author, mut indices) in by_author {
        indices.sort_by(|&a, &b| dataset[a].id.cmp(&dataset[b].id));
        let keep = indices[rng.random_range(0..indices.len())];
        let excluded: Vec<String> = indices
            .iter()
            .filter(|&&i| i != keep)
            .map(|&i| dataset[i].id.clone())
            .collect();
        for &i in &indices {
            drop[i] = i != keep;
        }
        if !excluded.is_empty() {
            siblings.insert(author, excluded);
        }
    }

    let kept = dataset
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop[*i])
        .map(|(_, b)| b)
        .collect();
    SiblingFilter { kept, siblings }
}

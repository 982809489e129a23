//! Full pipeline orchestration: match new samples against the signature
//! database, cluster the active dataset, fingerprint the detected
//! communities, and carry the remainder into the next iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bundle::{filter_siblings, ContentCategory, SampleBundle};
use crate::community::{detect_communities, filter_communities, Graph};
use crate::error::{Error, Result};
use crate::features::{extract_sample, NgramConfig};
use crate::fingerprint::{
    concat_features, select_features, train_fingerprint, ConcatFeatures, KernelSpec,
    SignatureDatabase, MIN_FINGERPRINT_TRAINING,
};
use crate::hashing::{fnv1a64, hash_features, HashedVector};
use crate::metrics::{evaluate, EvaluationReport, RunTimings};
use crate::network::{
    build_layers, homogenize, BlockedBackend, EmbeddingMatrix, SimilarityNetwork,
    ThresholdPolicy,
};
use crate::pca::{fit_pca, PcaModel};
use crate::util::stage_seed;

/// Dataset composition the run expects; mixed datasets enable degree
/// filtering of isolated nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    MalwareOnly,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintParams {
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// RBF width; `None` resolves to `1 / selected_dims`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub variance_threshold: f64,
    #[serde(default = "default_min_train")]
    pub min_train_size: usize,
}

fn default_nu() -> f64 {
    0.1
}
fn default_min_train() -> usize {
    MIN_FINGERPRINT_TRAINING
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            nu: default_nu(),
            gamma: None,
            variance_threshold: 0.0,
            min_train_size: default_min_train(),
        }
    }
}

/// Declarative run configuration; serialized as a single JSON document
/// with a version field. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub hash_seed: u64,
    #[serde(default = "default_vector_len")]
    pub vector_len: u32,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: u32,
    #[serde(default = "default_pca_sample_cap")]
    pub pca_sample_cap: u32,
    #[serde(default)]
    pub ngram: NgramConfig,
    #[serde(default = "default_categories")]
    pub categories: Vec<ContentCategory>,
    #[serde(default = "default_percentage")]
    pub similarity_percentage: f64,
    #[serde(default = "default_content_threshold")]
    pub content_threshold: usize,
    #[serde(default = "default_min_community")]
    pub min_community_size: usize,
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default)]
    pub fingerprint: FingerprintParams,
    #[serde(default = "default_true")]
    pub benign_communities_are_suspicious: bool,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_seed() -> u64 {
    42
}
fn default_vector_len() -> u32 {
    crate::hashing::DEFAULT_VECTOR_LEN
}
fn default_embedding_dim() -> u32 {
    100
}
fn default_pca_sample_cap() -> u32 {
    1000
}
fn default_categories() -> Vec<ContentCategory> {
    ContentCategory::ALL.to_vec()
}
fn default_percentage() -> f64 {
    0.5
}
fn default_content_threshold() -> usize {
    3
}
fn default_min_community() -> usize {
    3
}
fn default_scenario() -> Scenario {
    Scenario::MalwareOnly
}
fn default_true() -> bool {
    true
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: 1,
            seed: default_seed(),
            hash_seed: 0,
            vector_len: default_vector_len(),
            embedding_dim: default_embedding_dim(),
            pca_sample_cap: default_pca_sample_cap(),
            ngram: NgramConfig::default(),
            categories: default_categories(),
            similarity_percentage: default_percentage(),
            content_threshold: default_content_threshold(),
            min_community_size: default_min_community(),
            scenario: default_scenario(),
            fingerprint: FingerprintParams::default(),
            benign_communities_are_suspicious: true,
            input: None,
            output: None,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        if self.vector_len < 2 {
            return Err(Error::InvalidConfig("vector_len must be at least 2".into()));
        }
        if self.embedding_dim == 0 || self.embedding_dim > self.vector_len {
            return Err(Error::InvalidConfig(format!(
                "embedding_dim must be in 1..=vector_len, got {}",
                self.embedding_dim
            )));
        }
        if self.pca_sample_cap == 0 {
            return Err(Error::InvalidConfig("pca_sample_cap must be positive".into()));
        }
        if self.categories.is_empty() {
            return Err(Error::InvalidConfig("at least one category required".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.categories {
            if !seen.insert(c) {
                return Err(Error::InvalidConfig(format!("duplicate category {c}")));
            }
        }
        self.ngram.validate()?;
        self.threshold_policy().validate(self.categories.len())?;
        if self.min_community_size < 1 {
            return Err(Error::InvalidConfig(
                "min_community_size must be at least 1".into(),
            ));
        }
        let fp = &self.fingerprint;
        if !(fp.nu > 0.0 && fp.nu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fingerprint nu must be in (0, 1], got {}",
                fp.nu
            )));
        }
        if let Some(g) = fp.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "fingerprint gamma must be positive, got {g}"
                )));
            }
        }
        if !(fp.variance_threshold.is_finite() && fp.variance_threshold >= 0.0) {
            return Err(Error::InvalidConfig(
                "fingerprint variance_threshold must be non-negative".into(),
            ));
        }
        if fp.min_train_size < MIN_FINGERPRINT_TRAINING {
            return Err(Error::InvalidConfig(format!(
                "fingerprint min_train_size must be at least {MIN_FINGERPRINT_TRAINING}"
            )));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Stable digest of the full configuration, recorded in the database.
    pub fn digest(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("config serializes");
        fnv1a64(0, canonical.as_bytes())
    }

    fn threshold_policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            percentage: self.similarity_percentage,
            content_threshold: self.content_threshold,
            degree_filter_enabled: self.scenario == Scenario::Mixed,
        }
    }

    fn kernel_spec(&self) -> KernelSpec {
        KernelSpec::Rbf {
            gamma: self.fingerprint.gamma,
        }
    }
}

/// Samples awaiting assignment, carried between iterations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveDataset {
    pub pending: BTreeSet<String>,
}

impl ActiveDataset {
    pub fn load(path: impl AsRef<Path>) -> Result<ActiveDataset> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Where each offered sample ended up. Exactly one disposition per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Disposition {
    MatchedByDb,
    CommunityMember,
    Remainder,
    FilteredBenign,
    SiblingExcluded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedSample {
    pub id: String,
    pub community_id: u32,
    pub decision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityReport {
    pub id: u32,
    pub members: Vec<String>,
    pub internal_edges: usize,
    pub fingerprinted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiblingVerdict {
    pub author: String,
    pub representative: String,
    pub representative_disposition: Disposition,
    pub siblings: Vec<String>,
}

/// Everything one iteration produced.
#[derive(Debug)]
pub struct IterationOutcome {
    pub communities: Vec<CommunityReport>,
    pub modularity: f64,
    pub louvain_passes: usize,
    pub network: SimilarityNetwork,
    pub matched: Vec<MatchedSample>,
    pub sibling_verdicts: Vec<SiblingVerdict>,
    pub filtered_benign: BTreeSet<String>,
    pub remainder: BTreeSet<String>,
    /// Communities kept but not fingerprinted, with the reason.
    pub skipped_fingerprints: Vec<(u32, String)>,
    pub dispositions: BTreeMap<String, Disposition>,
    pub evaluation: Option<EvaluationReport>,
    pub timings: RunTimings,
    pub pca_models: BTreeMap<ContentCategory, PcaModel>,
}

/// Hashed vectors of one sample across the configured categories.
fn hash_bundle(
    bundle: &SampleBundle,
    config: &PipelineConfig,
) -> Result<BTreeMap<ContentCategory, HashedVector>> {
    let multisets = extract_sample(bundle, &config.ngram);
    let mut out = BTreeMap::new();
    for &category in &config.categories {
        let vector = match multisets.get(&category) {
            Some(ms) => hash_features(ms, config.vector_len, config.hash_seed)?,
            None => HashedVector::zero(category, config.vector_len),
        };
        out.insert(category, vector);
    }
    Ok(out)
}

/// Runs one detection iteration over the offered samples.
///
/// Stage order: match new samples against the database, route unmatched
/// ones (plus carried-over pending samples) into the active dataset,
/// deduplicate siblings, extract and hash features, fit and apply PCA,
/// build and homogenize the similarity layers, detect and size-filter
/// communities, fingerprint the survivors, and hand the remainder to the
/// next iteration.
pub fn run_iteration(
    config: &PipelineConfig,
    samples: Vec<SampleBundle>,
    db: &mut SignatureDatabase,
    state: &mut ActiveDataset,
) -> Result<IterationOutcome> {
    config.validate()?;
    let total_start = Instant::now();
    let stage = |name: &'static str| move |e: Error| e.in_stage(name);

    let mut dispositions: BTreeMap<String, Disposition> = BTreeMap::new();
    let mut hashed: BTreeMap<String, BTreeMap<ContentCategory, HashedVector>> = BTreeMap::new();
    let mut concat: BTreeMap<String, ConcatFeatures> = BTreeMap::new();
    for bundle in &samples {
        let by_cat = hash_bundle(bundle, config).map_err(stage("hashing"))?;
        let cc = concat_features(&by_cat, &config.categories, config.vector_len)
            .map_err(stage("hashing"))?;
        hashed.insert(bundle.id.clone(), by_cat);
        concat.insert(bundle.id.clone(), cc);
    }

    // Match new arrivals against the database; carried-over pending samples
    // go straight back into the active pool.
    let mut matched = Vec::new();
    let mut active: Vec<SampleBundle> = Vec::new();
    for bundle in samples {
        if state.pending.contains(&bundle.id) {
            active.push(bundle);
            continue;
        }
        let (hits, errors) = db.match_sample(&concat[&bundle.id]);
        if let Some((community_id, err)) = errors.into_iter().next() {
            return Err(Error::Stage {
                stage: "matching",
                source: Box::new(Error::InvalidConfig(format!(
                    "fingerprint {community_id} incompatible with sample {}: {err}",
                    bundle.id
                ))),
            });
        }
        if hits.is_empty() {
            active.push(bundle);
        } else {
            dispositions.insert(bundle.id.clone(), Disposition::MatchedByDb);
            matched.extend(hits.into_iter().map(|hit| MatchedSample {
                id: bundle.id.clone(),
                community_id: hit.community_id,
                decision: hit.decision,
            }));
        }
    }

    // Sibling deduplication over the active pool.
    let sibling_filter = filter_siblings(active, config.seed);
    let mut author_of: BTreeMap<String, String> = BTreeMap::new();
    for bundle in &sibling_filter.kept {
        if let Some(author) = &bundle.author {
            author_of.insert(author.clone(), bundle.id.clone());
        }
    }
    for ids in sibling_filter.siblings.values() {
        for id in ids {
            dispositions.insert(id.clone(), Disposition::SiblingExcluded);
        }
    }
    let active = sibling_filter.kept;
    let ids: Vec<String> = active.iter().map(|b| b.id.clone()).collect();

    if active.is_empty() {
        // Fixpoint: everything matched or excluded; nothing to cluster.
        let outcome = IterationOutcome {
            communities: Vec::new(),
            modularity: 0.0,
            louvain_passes: 0,
            network: SimilarityNetwork {
                samples: Vec::new(),
                layers: BTreeMap::new(),
                homogenized: Vec::new(),
                s_total: config.categories.len(),
                filtered_benign: Vec::new(),
            },
            matched,
            sibling_verdicts: sibling_verdicts(&sibling_filter.siblings, &author_of, &dispositions),
            filtered_benign: BTreeSet::new(),
            remainder: state.pending.clone(),
            skipped_fingerprints: Vec::new(),
            dispositions,
            evaluation: None,
            timings: RunTimings {
                network_build_s: 0.0,
                community_detection_s: 0.0,
                total_s: total_start.elapsed().as_secs_f64(),
            },
            pca_models: BTreeMap::new(),
        };
        db.meta.iterations += 1;
        db.meta.config_digest = config.digest();
        return Ok(outcome);
    }

    // PCA per category over the active dataset, then embedding.
    let mut pca_models = BTreeMap::new();
    let mut matrices: BTreeMap<ContentCategory, EmbeddingMatrix> = BTreeMap::new();
    for &category in &config.categories {
        let vectors: Vec<HashedVector> = active
            .iter()
            .map(|b| hashed[&b.id][&category].clone())
            .collect();
        let model = fit_pca(
            &vectors,
            config.embedding_dim,
            config.pca_sample_cap,
            stage_seed(config.seed, category.name()),
        )
        .map_err(stage("pca"))?;
        let embeddings = model.embed_batch(&vectors).map_err(stage("pca"))?;
        matrices.insert(
            category,
            EmbeddingMatrix::from_embeddings(&embeddings).map_err(stage("pca"))?,
        );
        pca_models.insert(category, model);
    }

    // Similarity layers and majority-vote homogenization.
    let network_start = Instant::now();
    let policy = config.threshold_policy();
    let backend = BlockedBackend::default();
    let network = build_layers(ids.clone(), &matrices, &policy, &backend, config.seed)
        .map_err(stage("similarity-network"))?;
    let network = homogenize(network, &policy);
    let network_build_s = network_start.elapsed().as_secs_f64();

    let filtered_benign: BTreeSet<String> = network
        .filtered_benign
        .iter()
        .map(|&i| ids[i as usize].clone())
        .collect();
    for id in &filtered_benign {
        dispositions.insert(id.clone(), Disposition::FilteredBenign);
    }

    // Community detection on the non-filtered nodes.
    let detection_start = Instant::now();
    let mut cluster_nodes: Vec<u32> = Vec::new();
    let mut compact_of: BTreeMap<u32, u32> = BTreeMap::new();
    let filtered_set: BTreeSet<u32> = network.filtered_benign.iter().copied().collect();
    for i in 0..ids.len() as u32 {
        if !filtered_set.contains(&i) {
            compact_of.insert(i, cluster_nodes.len() as u32);
            cluster_nodes.push(i);
        }
    }
    let edges: Vec<(u32, u32)> = network
        .homogenized
        .iter()
        .map(|e| (compact_of[&e.a], compact_of[&e.b]))
        .collect();
    let graph =
        Graph::new(cluster_nodes.len(), edges).map_err(stage("community-detection"))?;
    let partition = detect_communities(&graph, stage_seed(config.seed, "louvain"));
    let (kept, remainder_nodes) =
        filter_communities(&graph, &partition, config.min_community_size)
            .map_err(stage("community-detection"))?;
    let community_detection_s = detection_start.elapsed().as_secs_f64();

    let mut remainder: BTreeSet<String> = remainder_nodes
        .into_iter()
        .map(|c| ids[cluster_nodes[c as usize] as usize].clone())
        .collect();
    // Pending ids that were not offered this iteration stay pending.
    for id in state.pending.iter() {
        if !hashed.contains_key(id) {
            remainder.insert(id.clone());
        }
    }
    for id in &remainder {
        dispositions.entry(id.clone()).or_insert(Disposition::Remainder);
    }

    // Fingerprint the kept communities and append to the database.
    let min_train = config.fingerprint.min_train_size.max(MIN_FINGERPRINT_TRAINING);
    let mut communities = Vec::new();
    let mut skipped = Vec::new();
    let id_base = db.meta.next_community_id;
    for (index, community) in kept.iter().enumerate() {
        let members: Vec<String> = community
            .members
            .iter()
            .map(|&c| ids[cluster_nodes[c as usize] as usize].clone())
            .collect();
        for id in &members {
            dispositions.insert(id.clone(), Disposition::CommunityMember);
        }
        let community_id = id_base + index as u32;
        let mut fingerprinted = false;
        if members.len() >= min_train {
            let vectors: Vec<ConcatFeatures> =
                members.iter().map(|id| concat[id].clone()).collect();
            let trained = select_features(&vectors, config.fingerprint.variance_threshold)
                .and_then(|selection| {
                    train_fingerprint(
                        community_id,
                        &vectors,
                        &config.categories,
                        config.vector_len,
                        selection,
                        config.fingerprint.nu,
                        config.kernel_spec(),
                    )
                });
            match trained {
                Ok(fp) => {
                    db.append(fp).map_err(stage("fingerprinting"))?;
                    fingerprinted = true;
                }
                Err(e) => skipped.push((community_id, e.to_string())),
            }
        } else {
            skipped.push((
                community_id,
                format!("community size {} below training minimum {min_train}", members.len()),
            ));
        }
        communities.push(CommunityReport {
            id: community_id,
            members,
            internal_edges: community.internal_edges,
            fingerprinted,
        });
    }
    db.meta.next_community_id = id_base + kept.len() as u32;
    db.meta.iterations += 1;
    db.meta.config_digest = config.digest();

    // Evaluation runs when every clustered sample carries a truth label.
    let labels: BTreeMap<String, String> = active
        .iter()
        .filter_map(|b| b.truth_family.clone().map(|f| (b.id.clone(), f)))
        .collect();
    let evaluation = if active.iter().all(|b| b.truth_family.is_some()) {
        let community_members: Vec<(u32, Vec<String>)> = communities
            .iter()
            .map(|c| (c.id, c.members.clone()))
            .collect();
        let eval_remainder: BTreeSet<String> = remainder
            .iter()
            .filter(|id| labels.contains_key(*id))
            .cloned()
            .collect();
        Some(
            evaluate(
                &community_members,
                &eval_remainder,
                &filtered_benign,
                &labels,
                config.benign_communities_are_suspicious,
            )
            .map_err(stage("evaluation"))?,
        )
    } else {
        None
    };

    state.pending = remainder.clone();
    Ok(IterationOutcome {
        communities,
        modularity: partition.modularity,
        louvain_passes: partition.passes,
        network,
        matched,
        sibling_verdicts: sibling_verdicts(&sibling_filter.siblings, &author_of, &dispositions),
        filtered_benign,
        remainder,
        skipped_fingerprints: skipped,
        dispositions,
        evaluation,
        timings: RunTimings {
            network_build_s,
            community_detection_s,
            total_s: total_start.elapsed().as_secs_f64(),
        },
        pca_models,
    })
}

fn sibling_verdicts(
    siblings: &BTreeMap<String, Vec<String>>,
    author_of: &BTreeMap<String, String>,
    dispositions: &BTreeMap<String, Disposition>,
) -> Vec<SiblingVerdict> {
    siblings
        .iter()
        .filter_map(|(author, excluded)| {
            let representative = author_of.get(author)?.clone();
            let disposition = dispositions
                .get(&representative)
                .copied()
                .unwrap_or(Disposition::Remainder);
            Some(SiblingVerdict {
                author: author.clone(),
                representative,
                representative_disposition: disposition,
                siblings: excluded.clone(),
            })
        })
        .collect()
}

/// Serializable run report (everything except the raw network dumps).
#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub config_digest: u64,
    pub samples_offered: usize,
    pub matched: &'a [MatchedSample],
    pub communities: &'a [CommunityReport],
    pub modularity: f64,
    pub louvain_passes: usize,
    pub layer_thresholds: BTreeMap<String, serde_json::Value>,
    pub sibling_verdicts: &'a [SiblingVerdict],
    pub filtered_benign: &'a BTreeSet<String>,
    pub remainder: &'a BTreeSet<String>,
    pub skipped_fingerprints: &'a [(u32, String)],
    pub dispositions: &'a BTreeMap<String, Disposition>,
    pub evaluation: &'a Option<EvaluationReport>,
}

/// Writes every artifact of one iteration under `dir`: report.json,
/// partition.json, network.graphml, network.json, signatures.db (plus a
/// JSON debug dump), timings.json, state.json and the per-category PCA
/// models. Timings stay out of report.json so reports are byte-stable
/// across identical runs.
pub fn write_run_outputs(
    dir: impl AsRef<Path>,
    config: &PipelineConfig,
    outcome: &IterationOutcome,
    db: &SignatureDatabase,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let layer_thresholds: BTreeMap<String, serde_json::Value> = outcome
        .network
        .layers
        .values()
        .map(|layer| {
            (
                layer.category.name().to_string(),
                serde_json::json!({
                    "mean_distance": layer.mean_distance,
                    "threshold": layer.threshold_used,
                    "edges": layer.edges.len(),
                }),
            )
        })
        .collect();
    let report = RunReport {
        config_digest: config.digest(),
        samples_offered: outcome.dispositions.len(),
        matched: &outcome.matched,
        communities: &outcome.communities,
        modularity: outcome.modularity,
        louvain_passes: outcome.louvain_passes,
        layer_thresholds,
        sibling_verdicts: &outcome.sibling_verdicts,
        filtered_benign: &outcome.filtered_benign,
        remainder: &outcome.remainder,
        skipped_fingerprints: &outcome.skipped_fingerprints,
        dispositions: &outcome.dispositions,
        evaluation: &outcome.evaluation,
    };
    write_json(dir.join("report.json"), &serde_json::to_value(&report)?)?;

    let partition: BTreeMap<String, &Vec<String>> = outcome
        .communities
        .iter()
        .map(|c| (c.id.to_string(), &c.members))
        .collect();
    write_json(dir.join("partition.json"), &serde_json::to_value(&partition)?)?;

    fs::write(dir.join("network.graphml"), outcome.network.to_graphml())
        .map_err(|e| Error::io(dir.join("network.graphml"), e))?;
    write_json(dir.join("network.json"), &outcome.network.to_json())?;

    db.save(dir.join("signatures.db"))?;
    write_json(dir.join("signatures.json"), &db.to_debug_json())?;
    write_json(dir.join("timings.json"), &serde_json::to_value(outcome.timings)?)?;
    ActiveDataset {
        pending: outcome.remainder.clone(),
    }
    .save(dir.join("state.json"))?;

    let pca_dir = dir.join("pca");
    fs::create_dir_all(&pca_dir).map_err(|e| Error::io(&pca_dir, e))?;
    for (category, model) in &outcome.pca_models {
        model.save(pca_dir.join(format!("{category}.pca")))?;
    }
    Ok(())
}

fn write_json(path: PathBuf, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// One cell of a hyper-parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub similarity_percentage: f64,
    pub content_threshold: usize,
    pub min_community_size: usize,
    pub purity: f64,
    pub coverage: f64,
    pub communities: usize,
    pub modularity: f64,
}

/// Sweeps `p x content_threshold x min_size` over one labeled dataset.
/// Feature extraction, hashing and PCA run once; layers are rebuilt per
/// `p` from cached distances, so the grid stays cheap at desk scale.
pub fn run_sweep(
    config: &PipelineConfig,
    samples: Vec<SampleBundle>,
    p_values: &[f64],
    content_thresholds: &[usize],
    min_sizes: &[usize],
) -> Result<Vec<SweepCell>> {
    config.validate()?;
    if p_values.is_empty() || content_thresholds.is_empty() || min_sizes.is_empty() {
        return Err(Error::InvalidParam("sweep grid must be nonempty".into()));
    }
    if let Some(id) = samples.iter().find(|b| b.truth_family.is_none()) {
        return Err(Error::UnlabeledSamples {
            ids: vec![id.id.clone()],
        });
    }

    let sibling_filter = filter_siblings(samples, config.seed);
    let active = sibling_filter.kept;
    let ids: Vec<String> = active.iter().map(|b| b.id.clone()).collect();
    let labels: BTreeMap<String, String> = active
        .iter()
        .map(|b| (b.id.clone(), b.truth_family.clone().expect("checked")))
        .collect();

    let mut matrices = BTreeMap::new();
    for &category in &config.categories {
        let vectors: Vec<HashedVector> = active
            .iter()
            .map(|b| {
                let by_cat = hash_bundle(b, config)?;
                Ok(by_cat[&category].clone())
            })
            .collect::<Result<_>>()?;
        let model = fit_pca(
            &vectors,
            config.embedding_dim,
            config.pca_sample_cap,
            stage_seed(config.seed, category.name()),
        )?;
        let embeddings = model.embed_batch(&vectors)?;
        matrices.insert(category, EmbeddingMatrix::from_embeddings(&embeddings)?);
    }

    let backend = BlockedBackend::default();
    let mut cells = Vec::new();
    for &p in p_values {
        let policy = ThresholdPolicy {
            percentage: p,
            content_threshold: 1,
            degree_filter_enabled: config.scenario == Scenario::Mixed,
        };
        policy.validate(config.categories.len())?;
        let base = build_layers(ids.clone(), &matrices, &policy, &backend, config.seed)?;
        for &content_threshold in content_thresholds {
            let policy = ThresholdPolicy {
                percentage: p,
                content_threshold,
                degree_filter_enabled: config.scenario == Scenario::Mixed,
            };
            policy.validate(config.categories.len())?;
            let net = homogenize(base.clone(), &policy);
            let filtered_set: BTreeSet<u32> = net.filtered_benign.iter().copied().collect();
            let mut cluster_nodes = Vec::new();
            let mut compact_of = BTreeMap::new();
            for i in 0..ids.len() as u32 {
                if !filtered_set.contains(&i) {
                    compact_of.insert(i, cluster_nodes.len() as u32);
                    cluster_nodes.push(i);
                }
            }
            let edges: Vec<(u32, u32)> = net
                .homogenized
                .iter()
                .map(|e| (compact_of[&e.a], compact_of[&e.b]))
                .collect();
            let graph = Graph::new(cluster_nodes.len(), edges)?;
            let partition = detect_communities(&graph, stage_seed(config.seed, "louvain"));
            let filtered_ids: BTreeSet<String> = net
                .filtered_benign
                .iter()
                .map(|&i| ids[i as usize].clone())
                .collect();
            for &min_size in min_sizes {
                let (kept, remainder_nodes) =
                    filter_communities(&graph, &partition, min_size)?;
                let community_members: Vec<(u32, Vec<String>)> = kept
                    .iter()
                    .map(|c| {
                        (
                            c.id,
                            c.members
                                .iter()
                                .map(|&n| ids[cluster_nodes[n as usize] as usize].clone())
                                .collect(),
                        )
                    })
                    .collect();
                let remainder: BTreeSet<String> = remainder_nodes
                    .iter()
                    .map(|&n| ids[cluster_nodes[n as usize] as usize].clone())
                    .collect();
                let report = evaluate(
                    &community_members,
                    &remainder,
                    &filtered_ids,
                    &labels,
                    config.benign_communities_are_suspicious,
                )?;
                cells.push(SweepCell {
                    similarity_percentage: p,
                    content_threshold,
                    min_community_size: min_size,
                    purity: report.purity,
                    coverage: report.coverage,
                    communities: kept.len(),
                    modularity: partition.modularity,
                });
            }
        }
    }
    Ok(cells)
}

/// CSV rendering of sweep results, one row per cell.
pub fn sweep_to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "similarity_percentage,content_threshold,min_community_size,purity,coverage,communities,modularity\n",
    );
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{:.6}\n",
            cell.similarity_percentage,
            cell.content_threshold,
            cell.min_community_size,
            cell.purity,
            cell.coverage,
            cell.communities,
            cell.modularity
        ));
    }
    out
}

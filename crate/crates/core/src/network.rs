//! Per-content similarity layers and their majority-vote homogenization.
//!
//! An edge exists in a content layer when the Euclidean distance between
//! two digests is at most `p * mean pairwise distance` for that content.
//! The homogenized view keeps a pair when it is linked in at least
//! `content_threshold` layers.

use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::ContentCategory;
use crate::error::{Error, Result};
use crate::pca::Embedding;
use crate::util::stage_rng;

/// Above this many pairs the layer mean is estimated from a fixed-size
/// uniform pair sample instead of an exact pass.
pub const EXACT_MEAN_MAX_PAIRS: u64 = 5_000_000;
/// Pair sample size for the estimated mean.
pub const MEAN_SAMPLE_PAIRS: usize = 1_000_000;

/// Edge selection policy for one run.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ThresholdPolicy {
    /// Similarity threshold as a fraction of the mean pairwise distance.
    pub percentage: f64,
    /// Minimum number of content layers that must link a pair.
    pub content_threshold: usize,
    /// Mixed-dataset mode: nodes with no homogenized edge are reported as
    /// filtered benign.
    pub degree_filter_enabled: bool,
}

impl ThresholdPolicy {
    pub fn validate(&self, configured_contents: usize) -> Result<()> {
        if !(self.percentage.is_finite() && self.percentage > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "similarity percentage must be a positive finite number, got {}",
                self.percentage
            )));
        }
        if self.content_threshold < 1 || self.content_threshold > configured_contents {
            return Err(Error::InvalidConfig(format!(
                "content threshold {} outside 1..={configured_contents}",
                self.content_threshold
            )));
        }
        Ok(())
    }
}

/// One similarity link inside a content layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerEdge {
    pub a: u32,
    pub b: u32,
    pub distance: f64,
}

/// Similarity links of one content category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentLayer {
    pub category: ContentCategory,
    pub edges: Vec<LayerEdge>,
    /// `None` when the dataset has fewer than two samples.
    pub threshold_used: Option<f64>,
    pub mean_distance: Option<f64>,
}

/// Pair kept by majority voting, with its layer vote count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HomogenizedEdge {
    pub a: u32,
    pub b: u32,
    pub votes: u32,
}

/// Multi-layer similarity network over one sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityNetwork {
    pub samples: Vec<String>,
    pub layers: BTreeMap<ContentCategory, ContentLayer>,
    pub homogenized: Vec<HomogenizedEdge>,
    /// Number of configured contents (the `S` of the vote ratio `s / S`).
    pub s_total: usize,
    /// Nodes with homogenized degree zero, when degree filtering is on.
    pub filtered_benign: Vec<u32>,
}

/// Row-major matrix of embeddings with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn from_embeddings(embeddings: &[Embedding]) -> Result<EmbeddingMatrix> {
        let dim = embeddings.first().map(|e| e.values.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(embeddings.len() * dim);
        for e in embeddings {
            if e.values.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: e.values.len(),
                });
            }
            data.extend_from_slice(&e.values);
        }
        Ok(EmbeddingMatrix {
            n: embeddings.len(),
            dim,
            data,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<EmbeddingMatrix> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingMatrix {
            n: rows.len(),
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n, self.dim), &self.data).expect("consistent shape")
    }

    fn norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x * x).sum())
            .collect()
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn pairwise_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Edge extraction backend. An exact brute-force implementation exists as
/// the oracle; any faster backend must reproduce its edge sets with recall
/// and precision at least 0.99.
pub trait SimilarityBackend: Sync {
    fn name(&self) -> &'static str;

    /// All unordered pairs `(a, b)` with `a < b` and distance <= threshold,
    /// ordered by `(a, b)`.
    fn edges_within(&self, data: &EmbeddingMatrix, threshold: f64) -> Vec<LayerEdge>;
}

/// Reference implementation: direct double loop. This is the test oracle.
#[derive(Debug, Clone, Copy, Default)]
pub struct BruteForceBackend;

impl SimilarityBackend for BruteForceBackend {
    fn name(&self) -> &'static str {
        "brute-force"
    }

    fn edges_within(&self, data: &EmbeddingMatrix, threshold: f64) -> Vec<LayerEdge> {
        let mut edges = Vec::new();
        for i in 0..data.len() {
            for j in (i + 1)..data.len() {
                let d = pairwise_distance(data.row(i), data.row(j)).expect("same dim");
                if d <= threshold {
                    edges.push(LayerEdge {
                        a: i as u32,
                        b: j as u32,
                        distance: d,
                    });
                }
            }
        }
        edges
    }
}

/// Default backend: upper-triangle tiles computed as small matrix products
/// (`d^2 = |x|^2 + |y|^2 - 2 x.y`), parallel over tiles.
#[derive(Debug, Clone, Copy)]
pub struct BlockedBackend {
    pub tile: usize,
}

impl Default for BlockedBackend {
    fn default() -> Self {
        BlockedBackend { tile: 512 }
    }
}

impl SimilarityBackend for BlockedBackend {
    fn name(&self) -> &'static str {
        "blocked-exact"
    }

    fn edges_within(&self, data: &EmbeddingMatrix, threshold: f64) -> Vec<LayerEdge> {
        let n = data.len();
        if n < 2 {
            return Vec::new();
        }
        let tile = self.tile.max(16);
        let norms = data.norms();
        let view = data.view();
        // transposed copy so every tile product runs on contiguous operands
        let transposed = {
            let mut t = Array2::<f64>::zeros((data.dim(), n));
            t.assign(&view.t());
            t
        };
        let thr_sq = threshold * threshold;
        let blocks = n.div_ceil(tile);
        let mut tasks = Vec::new();
        for bi in 0..blocks {
            for bj in bi..blocks {
                tasks.push((bi, bj));
            }
        }
        let per_task: Vec<Vec<LayerEdge>> = tasks
            .par_iter()
            .map(|&(bi, bj)| {
                let i0 = bi * tile;
                let i1 = (i0 + tile).min(n);
                let j0 = bj * tile;
                let j1 = (j0 + tile).min(n);
                let a = view.slice(ndarray::s![i0..i1, ..]);
                let b = transposed.slice(ndarray::s![.., j0..j1]);
                let mut prod = Array2::<f64>::zeros((i1 - i0, j1 - j0));
                general_mat_mul(1.0, &a, &b, 0.0, &mut prod);
                let mut edges = Vec::new();
                for i in i0..i1 {
                    let j_start = if bi == bj { i + 1 } else { j0 };
                    for j in j_start..j1 {
                        let d_sq = norms[i] + norms[j] - 2.0 * prod[[i - i0, j - j0]];
                        if d_sq <= thr_sq {
                            edges.push(LayerEdge {
                                a: i as u32,
                                b: j as u32,
                                distance: d_sq.max(0.0).sqrt(),
                            });
                        }
                    }
                }
                edges
            })
            .collect();
        let mut edges: Vec<LayerEdge> = per_task.into_iter().flatten().collect();
        // tile order is (row, col)-major but rows interleave across tiles
        edges.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
        edges
    }
}

/// Mean pairwise Euclidean distance: exact up to [`EXACT_MEAN_MAX_PAIRS`]
/// pairs, estimated from [`MEAN_SAMPLE_PAIRS`] seeded uniform draws beyond
/// that. `None` when fewer than two samples exist.
pub fn mean_pairwise_distance(data: &EmbeddingMatrix, seed: u64) -> Option<f64> {
    let n = data.len();
    if n < 2 {
        return None;
    }
    let pairs = n as u64 * (n as u64 - 1) / 2;
    if pairs <= EXACT_MEAN_MAX_PAIRS {
        let sums: Vec<f64> = (0..n - 1)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in (i + 1)..n {
                    acc += pairwise_distance(data.row(i), data.row(j)).expect("same dim");
                }
                acc
            })
            .collect();
        Some(sums.iter().sum::<f64>() / pairs as f64)
    } else {
        let mut rng = stage_rng(seed, "mean-distance");
        let mut acc = 0.0;
        for _ in 0..MEAN_SAMPLE_PAIRS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            acc += pairwise_distance(data.row(i), data.row(j)).expect("same dim");
        }
        Some(acc / MEAN_SAMPLE_PAIRS as f64)
    }
}

/// Edge threshold for one content: `p` times the mean pairwise distance.
pub fn compute_threshold(distances: &[f64], percentage: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::NoPairs);
    }
    if !percentage.is_finite() || percentage < 0.0 {
        return Err(Error::InvalidParam(format!(
            "threshold percentage must be finite and non-negative, got {percentage}"
        )));
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(percentage * mean)
}

/// Builds one layer per content category. Every matrix must carry one row
/// per sample (zero-derived embeddings where the content is absent).
pub fn build_layers(
    samples: Vec<String>,
    per_category: &BTreeMap<ContentCategory, EmbeddingMatrix>,
    policy: &ThresholdPolicy,
    backend: &dyn SimilarityBackend,
    seed: u64,
) -> Result<SimilarityNetwork> {
    policy.validate(per_category.len().max(1))?;
    let mut layers = BTreeMap::new();
    for (&category, matrix) in per_category {
        if matrix.len() != samples.len() {
            return Err(Error::LengthMismatch {
                expected: samples.len(),
                got: matrix.len(),
            });
        }
        let mean = mean_pairwise_distance(matrix, crate::util::stage_seed(seed, category.name()));
        let (threshold, edges) = match mean {
            Some(mean) => {
                let threshold = policy.percentage * mean;
                (Some(threshold), backend.edges_within(matrix, threshold))
            }
            None => (None, Vec::new()),
        };
        layers.insert(
            category,
            ContentLayer {
                category,
                edges,
                threshold_used: threshold,
                mean_distance: mean,
            },
        );
    }
    Ok(SimilarityNetwork {
        samples,
        layers,
        homogenized: Vec::new(),
        s_total: per_category.len(),
        filtered_benign: Vec::new(),
    })
}

/// Majority voting: a pair survives when at least `content_threshold`
/// layers link it. With degree filtering on, nodes left with no
/// homogenized edge are reported as filtered benign.
pub fn homogenize(mut net: SimilarityNetwork, policy: &ThresholdPolicy) -> SimilarityNetwork {
    let mut votes: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for layer in net.layers.values() {
        for edge in &layer.edges {
            *votes.entry((edge.a, edge.b)).or_insert(0) += 1;
        }
    }
    net.homogenized = votes
        .into_iter()
        .filter(|&(_, v)| v as usize >= policy.content_threshold)
        .map(|((a, b), votes)| HomogenizedEdge { a, b, votes })
        .collect();
    net.filtered_benign.clear();
    if policy.degree_filter_enabled {
        let mut degree = vec![0usize; net.samples.len()];
        for e in &net.homogenized {
            degree[e.a as usize] += 1;
            degree[e.b as usize] += 1;
        }
        net.filtered_benign = degree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 0)
            .map(|(i, _)| i as u32)
            .collect();
    }
    net
}

impl SimilarityNetwork {
    /// GraphML export. Layer edges carry `{kind, category, distance}`;
    /// homogenized edges carry `{kind, votes}`.
    pub fn to_graphml(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        out.push_str("  <key id=\"kind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n");
        out.push_str(
            "  <key id=\"category\" for=\"edge\" attr.name=\"category\" attr.type=\"string\"/>\n",
        );
        out.push_str(
            "  <key id=\"distance\" for=\"edge\" attr.name=\"distance\" attr.type=\"double\"/>\n",
        );
        out.push_str("  <key id=\"votes\" for=\"edge\" attr.name=\"votes\" attr.type=\"int\"/>\n");
        out.push_str("  <graph id=\"similarity\" edgedefault=\"undirected\">\n");
        for id in &self.samples {
            out.push_str(&format!("    <node id=\"{}\"/>\n", xml_escape(id)));
        }
        for layer in self.layers.values() {
            for e in &layer.edges {
                out.push_str(&format!(
                    "    <edge source=\"{}\" target=\"{}\"><data key=\"kind\">layer</data><data key=\"category\">{}</data><data key=\"distance\">{}</data></edge>\n",
                    xml_escape(&self.samples[e.a as usize]),
                    xml_escape(&self.samples[e.b as usize]),
                    layer.category,
                    e.distance,
                ));
            }
        }
        for e in &self.homogenized {
            out.push_str(&format!(
                "    <edge source=\"{}\" target=\"{}\"><data key=\"kind\">homogenized</data><data key=\"votes\">{}</data></edge>\n",
                xml_escape(&self.samples[e.a as usize]),
                xml_escape(&self.samples[e.b as usize]),
                e.votes,
            ));
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }

    /// JSON export mirroring the GraphML content.
    pub fn to_json(&self) -> serde_json::Value {
        let layers: BTreeMap<String, serde_json::Value> = self
            .layers
            .values()
            .map(|layer| {
                let edges: Vec<serde_json::Value> = layer
                    .edges
                    .iter()
                    .map(|e| {
                        serde_json::json!([
                            self.samples[e.a as usize],
                            self.samples[e.b as usize],
                            e.distance
                        ])
                    })
                    .collect();
                (
                    layer.category.name().to_string(),
                    serde_json::json!({
                        "mean_distance": layer.mean_distance,
                        "threshold": layer.threshold_used,
                        "edges": edges,
                    }),
                )
            })
            .collect();
        let homogenized: Vec<serde_json::Value> = self
            .homogenized
            .iter()
            .map(|e| {
                serde_json::json!([
                    self.samples[e.a as usize],
                    self.samples[e.b as usize],
                    e.votes
                ])
            })
            .collect();
        let filtered: Vec<&str> = self
            .filtered_benign
            .iter()
            .map(|&i| self.samples[i as usize].as_str())
            .collect();
        serde_json::json!({
            "samples": self.samples,
            "contents_total": self.s_total,
            "layers": layers,
            "homogenized": homogenized,
            "filtered_benign": filtered,
        })
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn random_matrix(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        EmbeddingMatrix::from_rows(
            (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
        .unwrap()
    }

    fn policy(p: f64, ct: usize, filter: bool) -> ThresholdPolicy {
        ThresholdPolicy {
            percentage: p,
            content_threshold: ct,
            degree_filter_enabled: filter,
        }
    }

    #[test]
    fn distance_basics() {
        assert_eq!(pairwise_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(pairwise_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(pairwise_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn threshold_from_mean() {
        assert_eq!(compute_threshold(&[1.0, 2.0, 3.0], 0.5).unwrap(), 1.0);
        assert_eq!(compute_threshold(&[2.0, 2.0], 1.0).unwrap(), 2.0);
        assert_eq!(compute_threshold(&[2.0, 2.0], 0.0).unwrap(), 0.0);
        assert!(matches!(compute_threshold(&[], 0.5), Err(Error::NoPairs)));
        assert!(compute_threshold(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn threshold_examples_drive_edges() {
        // 1-d points 0, 1, 3 have pairwise distances {1, 2, 3}
        let m = matrix(&[&[0.0], &[1.0], &[3.0]]);
        let mean = mean_pairwise_distance(&m, 0).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
        let edges = BruteForceBackend.edges_within(&m, 0.5 * mean);
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].a, edges[0].b), (0, 1));

        // p = 0 keeps only exact duplicates
        let dup = matrix(&[&[1.0, 1.0], &[1.0, 1.0], &[2.0, 2.0]]);
        let edges = BruteForceBackend.edges_within(&dup, 0.0);
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].a, edges[0].b), (0, 1));

        // all-equal distances at p = 1 link every pair
        let eq = matrix(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, 3f64.sqrt() / 2.0]]);
        let mean = mean_pairwise_distance(&eq, 0).unwrap();
        let edges = BruteForceBackend.edges_within(&eq, 1.0 * mean);
        assert_eq!(edges.len(), 3);
    }

    #[test]
    fn blocked_matches_brute_force() {
        let m = random_matrix(150, 16, 4);
        let mean = mean_pairwise_distance(&m, 0).unwrap();
        for p in [0.25, 0.5, 1.0, 1.5] {
            let expected = BruteForceBackend.edges_within(&m, p * mean);
            let got = BlockedBackend { tile: 32 }.edges_within(&m, p * mean);
            let key = |edges: &[LayerEdge]| -> Vec<(u32, u32)> {
                edges.iter().map(|e| (e.a, e.b)).collect()
            };
            assert_eq!(key(&expected), key(&got), "p={p}");
            for (a, b) in expected.iter().zip(&got) {
                assert!((a.distance - b.distance).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_mean_matches_direct_average() {
        let m = random_matrix(40, 8, 5);
        let mut distances = Vec::new();
        for i in 0..40 {
            for j in (i + 1)..40 {
                distances.push(pairwise_distance(m.row(i), m.row(j)).unwrap());
            }
        }
        let direct = distances.iter().sum::<f64>() / distances.len() as f64;
        let mean = mean_pairwise_distance(&m, 9).unwrap();
        assert!((mean - direct).abs() < 1e-12);
        assert_eq!(compute_threshold(&distances, 0.5).unwrap(), 0.5 * direct);
    }

    #[test]
    fn triangle_inequality_holds_on_sampled_triples() {
        use rand::{Rng, SeedableRng};
        let m = random_matrix(60, 10, 6);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..500 {
            let a = rng.random_range(0..60);
            let b = rng.random_range(0..60);
            let c = rng.random_range(0..60);
            let dab = pairwise_distance(m.row(a), m.row(b)).unwrap();
            let dbc = pairwise_distance(m.row(b), m.row(c)).unwrap();
            let dac = pairwise_distance(m.row(a), m.row(c)).unwrap();
            assert!(dac <= dab + dbc + 1e-9);
        }
    }

    #[test]
    fn identical_samples_link_in_every_layer() {
        let mut per_category = BTreeMap::new();
        for category in ContentCategory::ALL {
            per_category.insert(category, matrix(&[&[1.0, 2.0], &[1.0, 2.0]]));
        }
        let net = build_layers(
            vec!["a".into(), "b".into()],
            &per_category,
            &policy(0.5, 3, false),
            &BlockedBackend::default(),
            0,
        )
        .unwrap();
        assert_eq!(net.layers.len(), 10);
        for layer in net.layers.values() {
            assert_eq!(layer.edges.len(), 1, "{}", layer.category);
        }
        let net = homogenize(net, &policy(0.5, 3, false));
        assert_eq!(net.homogenized.len(), 1);
        assert_eq!(net.homogenized[0].votes, 10);
    }

    #[test]
    fn empty_and_singleton_networks() {
        let mut per_category = BTreeMap::new();
        per_category.insert(ContentCategory::DexBytes, matrix(&[]));
        let net = build_layers(
            Vec::new(),
            &per_category,
            &policy(0.5, 1, false),
            &BlockedBackend::default(),
            0,
        )
        .unwrap();
        assert!(net.layers[&ContentCategory::DexBytes].edges.is_empty());
        assert!(net.layers[&ContentCategory::DexBytes].threshold_used.is_none());

        let mut per_category = BTreeMap::new();
        per_category.insert(ContentCategory::DexBytes, matrix(&[&[1.0]]));
        let net = build_layers(
            vec!["only".into()],
            &per_category,
            &policy(0.5, 1, false),
            &BlockedBackend::default(),
            0,
        )
        .unwrap();
        let layer = &net.layers[&ContentCategory::DexBytes];
        assert!(layer.edges.is_empty());
        assert!(layer.mean_distance.is_none());
    }

    fn fabricated_network(pair_layers: usize) -> SimilarityNetwork {
        let mut layers = BTreeMap::new();
        for (i, category) in ContentCategory::ALL.into_iter().enumerate() {
            let edges = if i < pair_layers {
                vec![LayerEdge {
                    a: 0,
                    b: 1,
                    distance: 0.1,
                }]
            } else {
                Vec::new()
            };
            layers.insert(
                category,
                ContentLayer {
                    category,
                    edges,
                    threshold_used: Some(1.0),
                    mean_distance: Some(2.0),
                },
            );
        }
        SimilarityNetwork {
            samples: vec!["a".into(), "b".into(), "c".into()],
            layers,
            homogenized: Vec::new(),
            s_total: 10,
            filtered_benign: Vec::new(),
        }
    }

    #[test]
    fn homogenize_applies_content_threshold() {
        let net = homogenize(fabricated_network(3), &policy(0.5, 3, false));
        assert_eq!(net.homogenized.len(), 1);
        assert_eq!(net.homogenized[0].votes, 3);

        let net = homogenize(fabricated_network(2), &policy(0.5, 3, false));
        assert!(net.homogenized.is_empty());
    }

    #[test]
    fn degree_filter_reports_isolated_nodes() {
        let net = homogenize(fabricated_network(3), &policy(0.5, 3, true));
        assert_eq!(net.filtered_benign, vec![2]);
        let net = homogenize(fabricated_network(3), &policy(0.5, 3, false));
        assert!(net.filtered_benign.is_empty());
    }

    #[test]
    fn raising_content_threshold_never_adds_edges() {
        let mut per_category = BTreeMap::new();
        for (i, category) in ContentCategory::ALL.into_iter().take(5).enumerate() {
            per_category.insert(category, random_matrix(30, 4, 10 + i as u64));
        }
        let samples: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
        let base = build_layers(
            samples,
            &per_category,
            &policy(1.0, 1, false),
            &BlockedBackend::default(),
            3,
        )
        .unwrap();
        let mut prev = usize::MAX;
        for ct in 1..=5 {
            let net = homogenize(base.clone(), &policy(1.0, ct, false));
            assert!(net.homogenized.len() <= prev);
            prev = net.homogenized.len();
        }
    }

    #[test]
    fn raising_percentage_never_removes_layer_edges() {
        let m = random_matrix(40, 6, 2);
        let mean = mean_pairwise_distance(&m, 0).unwrap();
        let mut prev = 0usize;
        for p in [0.1, 0.3, 0.5, 0.8, 1.0, 1.3] {
            let edges = BlockedBackend::default().edges_within(&m, p * mean);
            assert!(edges.len() >= prev, "p={p}");
            prev = edges.len();
        }
    }

    #[test]
    fn exports_are_well_formed() {
        let net = homogenize(fabricated_network(4), &policy(0.5, 3, true));
        let graphml = net.to_graphml();
        assert!(graphml.contains("<node id=\"a\"/>"));
        assert!(graphml.contains("homogenized"));
        assert_eq!(graphml.matches("<edge ").count(), 5);
        let json = net.to_json();
        assert_eq!(json["homogenized"].as_array().unwrap().len(), 1);
        assert_eq!(json["filtered_benign"].as_array().unwrap().len(), 1);
        assert_eq!(json["contents_total"], 10);
    }

    #[test]
    fn xml_escaping() {
        assert_eq!(xml_escape("a<b>&\"c\""), "a&lt;b&gt;&amp;&quot;c&quot;");
    }
}

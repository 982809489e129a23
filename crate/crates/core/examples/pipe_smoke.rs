use famnet_core::pipeline::{run_iteration, ActiveDataset, PipelineConfig};
use famnet_core::fingerprint::SignatureDatabase;
use famnet_core::synth::{generate_synthetic, SyntheticSpec};

fn main() {
    let spec = SyntheticSpec {
        families: 10,
        per_family: 30,
        benign: 150,
        noise: 0.05,
        ..Default::default()
    };
    let bundles = generate_synthetic(&spec, 42).unwrap();
    let config = PipelineConfig::default();
    let mut db = SignatureDatabase::new();
    let mut state = ActiveDataset::default();
    let t = std::time::Instant::now();
    let outcome = run_iteration(&config, bundles, &mut db, &mut state).unwrap();
    println!("elapsed {:?}", t.elapsed());
    println!("communities: {}", outcome.communities.len());
    for c in &outcome.communities {
        println!("  id {} size {} fp {}", c.id, c.members.len(), c.fingerprinted);
    }
    println!("modularity {:.4} passes {}", outcome.modularity, outcome.louvain_passes);
    println!("remainder {} filtered {}", outcome.remainder.len(), outcome.filtered_benign.len());
    println!("skipped: {:?}", outcome.skipped_fingerprints);
    if let Some(eval) = &outcome.evaluation {
        println!("purity {:.4} coverage {:.4} C1={} C2={} C4={}",
            eval.purity, eval.coverage, eval.detected_communities, eval.pure_communities, eval.benign_communities);
    }
    println!("timings: {:?}", outcome.timings);
    for (cat, layer) in &outcome.network.layers {
        println!("layer {cat}: edges {} mean {:?} thr {:?}", layer.edges.len(), layer.mean_distance.map(|m| m.round()), layer.threshold_used.map(|t| t.round()));
    }
}

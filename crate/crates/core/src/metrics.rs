//! App-level and community-level evaluation against ground-truth labels,
//! plus run timing plumbing.
//!
//! Labels are family names; [`BENIGN_LABEL`](crate::bundle::BENIGN_LABEL)
//! marks benign samples. A community is *pure* when all members carry one
//! label; `k`-mixed communities carry `k >= 2` distinct labels (benign
//! counts as a label there). Communities without any malware member are
//! benign communities.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bundle::BENIGN_LABEL;
use crate::error::{Error, Result};

/// Labeled communities plus the unassigned pools, evaluated in one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// A1: malware samples inside detected communities.
    pub true_malware: u64,
    /// A2: benign samples inside communities treated as suspicious.
    pub false_malware: u64,
    /// A3: benign samples filtered out or left unassigned.
    pub true_benign: u64,
    /// A4: malware samples filtered out or left unassigned.
    pub false_benign: u64,
    /// A5: true malware over total malware.
    pub coverage: f64,
    /// Community-assigned samples over all samples, reported separately.
    pub coverage_overall: f64,
    /// C1: communities containing at least one malware sample.
    pub detected_communities: usize,
    /// C2: single-label malware communities.
    pub pure_communities: usize,
    /// C3: k -> number of communities with exactly k labels (k >= 2).
    pub mixed_communities: BTreeMap<usize, usize>,
    /// C4: communities whose members are all benign.
    pub benign_communities: usize,
    /// Plurality purity over community-assigned samples.
    pub purity: f64,
    pub total_malware: u64,
    pub total_benign: u64,
}

/// Computes the report. `benign_communities_are_suspicious` controls
/// whether members of all-benign communities count as false malware (the
/// mixed-dataset reading) or as recognized benign.
pub fn evaluate(
    communities: &[(u32, Vec<String>)],
    remainder: &BTreeSet<String>,
    filtered_benign: &BTreeSet<String>,
    labels: &BTreeMap<String, String>,
    benign_communities_are_suspicious: bool,
) -> Result<EvaluationReport> {
    let all_ids: Vec<&String> = communities
        .iter()
        .flat_map(|(_, members)| members.iter())
        .chain(remainder.iter())
        .chain(filtered_benign.iter())
        .collect();
    let unlabeled: Vec<String> = all_ids
        .iter()
        .filter(|id| !labels.contains_key(**id))
        .map(|id| (**id).clone())
        .collect();
    if !unlabeled.is_empty() {
        let mut ids = unlabeled;
        ids.sort();
        ids.dedup();
        return Err(Error::UnlabeledSamples { ids });
    }

    let is_malware = |id: &String| labels[id] != BENIGN_LABEL;
    let total_samples = all_ids.len() as u64;
    let total_malware = all_ids.iter().filter(|id| is_malware(id)).count() as u64;
    let total_benign = total_samples - total_malware;

    let mut true_malware = 0u64;
    let mut false_malware = 0u64;
    let mut assigned = 0u64;
    let mut detected = 0usize;
    let mut pure = 0usize;
    let mut mixed: BTreeMap<usize, usize> = BTreeMap::new();
    let mut benign_communities = 0usize;
    let mut plurality_sum = 0u64;

    for (_, members) in communities {
        assigned += members.len() as u64;
        let mut label_counts: BTreeMap<&str, u64> = BTreeMap::new();
        for id in members {
            *label_counts.entry(labels[id].as_str()).or_insert(0) += 1;
        }
        plurality_sum += label_counts.values().copied().max().unwrap_or(0);
        let malware_members: u64 = members.iter().filter(|id| is_malware(id)).count() as u64;
        let benign_members = members.len() as u64 - malware_members;
        if malware_members == 0 {
            benign_communities += 1;
            if benign_communities_are_suspicious {
                false_malware += benign_members;
            }
        } else {
            detected += 1;
            true_malware += malware_members;
            false_malware += benign_members;
            match label_counts.len() {
                1 => pure += 1,
                k => *mixed.entry(k).or_insert(0) += 1,
            }
        }
    }

    let false_benign = total_malware - true_malware;
    let true_benign = total_benign - false_malware;
    Ok(EvaluationReport {
        true_malware,
        false_malware,
        true_benign,
        false_benign,
        coverage: if total_malware == 0 {
            0.0
        } else {
            true_malware as f64 / total_malware as f64
        },
        coverage_overall: if total_samples == 0 {
            0.0
        } else {
            assigned as f64 / total_samples as f64
        },
        detected_communities: detected,
        pure_communities: pure,
        mixed_communities: mixed,
        benign_communities,
        purity: if assigned == 0 {
            1.0
        } else {
            plurality_sum as f64 / assigned as f64
        },
        total_malware,
        total_benign,
    })
}

/// Per-stage wall-clock timings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTimings {
    pub network_build_s: f64,
    pub community_detection_s: f64,
    pub total_s: f64,
}

/// Mean and population variance over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub mean: RunTimings,
    pub variance: RunTimings,
}

pub fn timing_stats(runs: &[RunTimings]) -> Option<TimingStats> {
    if runs.is_empty() {
        return None;
    }
    let n = runs.len() as f64;
    let mean = RunTimings {
        network_build_s: runs.iter().map(|r| r.network_build_s).sum::<f64>() / n,
        community_detection_s: runs.iter().map(|r| r.community_detection_s).sum::<f64>() / n,
        total_s: runs.iter().map(|r| r.total_s).sum::<f64>() / n,
    };
    let var = |f: fn(&RunTimings) -> f64, m: f64| runs.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n;
    let variance = RunTimings {
        network_build_s: var(|r| r.network_build_s, mean.network_build_s),
        community_detection_s: var(|r| r.community_detection_s, mean.community_detection_s),
        total_s: var(|r| r.total_s, mean.total_s),
    };
    Some(TimingStats { mean, variance })
}

/// Renders the report as two aligned text tables (app metrics, community
/// metrics).
pub fn render_report_tables(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let row = |out: &mut String, name: &str, value: String| {
        out.push_str(&format!("{name:<o$}{value:>10}\n", o = 30));
    };
    out.push_str("App metrics\n");
    out.push_str(&"-".repeat(40));
    out.push('\n');
    row(&mut out, "True Malware A1", report.true_malware.to_string());
    row(&mut out, "False Malware A2", report.false_malware.to_string());
    row(&mut out, "True Benign A3", report.true_benign.to_string());
    row(&mut out, "False Benign A4", report.false_benign.to_string());
    row(&mut out, "Coverage A5", format!("{:.4}", report.coverage));
    row(
        &mut out,
        "Overall coverage",
        format!("{:.4}", report.coverage_overall),
    );
    out.push('\n');
    out.push_str("Community metrics\n");
    out.push_str(&"-".repeat(40));
    out.push('\n');
    row(
        &mut out,
        "Detected C1",
        report.detected_communities.to_string(),
    );
    row(
        &mut out,
        "Pure Detected C2",
        report.pure_communities.to_string(),
    );
    for (k, count) in &report.mixed_communities {
        row(&mut out, &format!("{k}-Mixed C3"), count.to_string());
    }
    row(
        &mut out,
        "Benign Communities C4",
        report.benign_communities.to_string(),
    );
    row(&mut out, "Purity", format!("{:.4}", report.purity));
    out
}

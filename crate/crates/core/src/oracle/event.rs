//! The good event `E` and the checks that hold on it.
//!
//! `E` is the conjunction of the length event `L`, the existence of a stable
//! subtree `S`, every anchor event on the stable subtree and every bias
//! event on the adversarial reconstructions of its nodes. On `E` the
//! reconstruction recovers every true shift inside the stable subtree, and
//! its root output is right wherever the adversarial reconstruction is.

use serde::{Deserialize, Serialize};

use super::anchors::{anchor_correlation_stats, rounds, shifted_windows, true_shift};
use super::gateway::{adversarial_reconstruct, AdversarialReconstruction};
use super::stability::{classify_stability, extract_stable_subtree, StabilityReport, StableSubtree};
use super::verify::verify_bias_concentration;
use crate::evolution::{EvolvedTree, LengthStats};
use crate::recon::{ReconConfig, RootReconstruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubEvent {
    Length,
    Stable,
    Anchors,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCertificate {
    pub holds: bool,
    pub first_failure: Option<SubEvent>,
    pub length: LengthStats,
    pub anchor_events: usize,
    pub anchor_failures: usize,
    pub bias_events: usize,
    pub bias_failures: usize,
    /// Plug-in `beta'` per level: the pooled disagreement rate of the
    /// adversarial reconstructions of stable-subtree nodes on that level.
    pub beta_prime: Vec<f64>,
    pub report: StabilityReport,
    pub subtree: Option<StableSubtree>,
}

impl EventCertificate {
    pub fn stable(&self) -> bool {
        self.subtree.is_some()
    }
}

/// Evaluates `L`, `S`, the anchor events and the bias events in that order
/// and stops at the first that fails. `seed` keys the random trims.
pub fn certify_event_e(tree: &EvolvedTree, config: &ReconConfig, zeta: f64, seed: u64) -> EventCertificate {
    let (ell, a) = (config.ell, config.a);
    let report = classify_stability(tree, ell, a);
    let subtree = extract_stable_subtree(&report, &tree.shape(), seed);
    let mut cert = EventCertificate {
        holds: false,
        first_failure: None,
        length: tree.length_stats(zeta),
        anchor_events: 0,
        anchor_failures: 0,
        bias_events: 0,
        bias_failures: 0,
        beta_prime: Vec::new(),
        report,
        subtree,
    };
    if !cert.length.holds {
        cert.first_failure = Some(SubEvent::Length);
        return cert;
    }
    let Some(stable) = cert.subtree.as_ref() else {
        cert.first_failure = Some(SubEvent::Stable);
        return cert;
    };

    let anchors = anchor_correlation_stats(tree, stable, ell, a);
    cert.anchor_events = anchors.samples.len();
    cert.anchor_failures = anchors
        .samples
        .iter()
        .filter(|s| !s.event(config.delta, config.theta_sq()))
        .count();
    if cert.anchor_failures > 0 {
        cert.first_failure = Some(SubEvent::Anchors);
        return cert;
    }

    let (events, failures, beta_prime) = bias_events(tree, &cert.report, stable, config, seed);
    cert.bias_events = events;
    cert.bias_failures = failures;
    cert.beta_prime = beta_prime;
    if failures > 0 {
        cert.first_failure = Some(SubEvent::Bias);
        return cert;
    }
    cert.holds = true;
    cert
}

fn bias_events(
    tree: &EvolvedTree,
    report: &StabilityReport,
    stable: &StableSubtree,
    config: &ReconConfig,
    seed: u64,
) -> (usize, usize, Vec<f64>) {
    let shape = tree.shape();
    let mut agreement: Vec<Option<Vec<u8>>> = vec![None; shape.node_count()];
    let mut beta_prime = vec![0.0; shape.height + 1];
    for level in 1..=shape.height {
        let (mut wrong, mut total) = (0usize, 0usize);
        for v in shape.level_nodes(level).filter(|&v| stable.contains(v)) {
            let lambda = if shape.is_leaf(v) {
                vec![1u8; tree.sequences[v].len()]
            } else {
                let adv = adversarial_reconstruct(tree, report, stable, v, seed).expect("member of the subtree");
                wrong += adv.disagreements();
                adv.agreement
            };
            total += lambda.len();
            agreement[v] = Some(lambda);
        }
        if total > 0 {
            beta_prime[level] = wrong as f64 / total as f64;
        }
    }

    let (ell, a) = (config.ell, config.a);
    let (mut events, mut failures) = (0, 0);
    for v in stable.nodes().filter(|&v| !shape.is_leaf(v)) {
        let kids = stable.children(&shape, v);
        let bp = beta_prime[shape.level_of(v) + 1];
        for r in rounds(tree, v, ell) {
            let t = (ell * r) as i64;
            let wins: Vec<Option<[&[u8]; 3]>> = kids
                .iter()
                .map(|&c| shifted_windows(agreement[c].as_ref()?, t + true_shift(tree, c, r, ell)?, a))
                .collect();
            for x in 0..kids.len() {
                for y in x + 1..kids.len() {
                    let (Some([dx, ax, ix]), Some([dy, ay, iy])) = (wins[x], wins[y]) else { continue };
                    events += 1;
                    let ok = [(ax, ay), (ax, dy), (ax, iy), (ay, dx), (ay, ix)].iter().all(|(l, m)| {
                        verify_bias_concentration(l, m, config.beta, bp)
                            .expect("equal window lengths")
                            .holds()
                    });
                    failures += !ok as usize;
                }
            }
        }
    }
    (events, failures, beta_prime)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub checked: usize,
    pub violations: usize,
    /// Stable-subtree nodes the reconstruction declared radioactive.
    pub radioactive_members: usize,
}

impl ShiftCheck {
    pub fn exact(&self) -> bool {
        self.violations == 0 && self.radioactive_members == 0
    }
}

/// Compares every anchor-tested shift estimate at internal stable-subtree
/// nodes with the true shift of each stable-subtree child.
pub fn check_shifts(tree: &EvolvedTree, recon: &RootReconstruction, stable: &StableSubtree, ell: usize) -> ShiftCheck {
    let shape = tree.shape();
    let mut check = ShiftCheck::default();
    for v in stable.nodes().filter(|&v| !shape.is_leaf(v)) {
        let node = &recon.nodes[v];
        if node.radioactive {
            check.radioactive_members += 1;
            continue;
        }
        for c in stable.children(&shape, v) {
            let i = shape.child_index(c);
            for r in 1..=node.rounds.len() {
                let (Some(est), Some(truth)) = (node.shift(i, r), true_shift(tree, c, r, ell)) else { continue };
                check.checked += 1;
                check.violations += (est != truth) as usize;
            }
        }
    }
    check
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominationCheck {
    /// Root sites where the adversarial reconstruction is right.
    pub checked: usize,
    /// Those of them where the reconstruction is wrong.
    pub violations: usize,
}

pub fn check_domination(truth: &[u8], reconstruction: &[u8], adversarial: &AdversarialReconstruction) -> DominationCheck {
    let mut check = DominationCheck::default();
    for (t, &l) in adversarial.agreement.iter().enumerate() {
        if l == 1 {
            check.checked += 1;
            check.violations += (reconstruction.get(t) != truth.get(t)) as usize;
        }
    }
    check
}

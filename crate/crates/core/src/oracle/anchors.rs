//! Anchor windows on true sequences.
//!
//! For a parent, a child `c` and a round `r`, the true shift is
//! `s_c(r) = F_c(ℓr) - ℓr`, where `F_c` is the edge map. The aligned anchor of
//! `c` starts at `ℓr + s_c(r)`; the deletion and insertion windows start one
//! site to the left and to the right. A round whose windows do not all fit in
//! both sequences is vacuous and produces no sample.

use serde::{Deserialize, Serialize};

use super::stability::StableSubtree;
use crate::evolution::EvolvedTree;
use crate::recon::correlation;
use crate::tree::NodeId;

/// `F_child(ℓr) - ℓr` on the edge into `child`, if parent site `ℓr` survives.
pub fn true_shift(tree: &EvolvedTree, child: NodeId, r: usize, ell: usize) -> Option<i64> {
    let t = ell * r;
    let q = tree.edge(child)?.map.get(t)?;
    Some(q as i64 - t as i64)
}

/// The deletion, aligned and insertion windows of length `a` around `start`.
pub(crate) fn shifted_windows(seq: &[u8], start: i64, a: usize) -> Option<[&[u8]; 3]> {
    if start < 1 || start as usize + 1 + a > seq.len() {
        return None;
    }
    let s = start as usize;
    Some([&seq[s - 1..s - 1 + a], &seq[s..s + a], &seq[s + 1..s + 1 + a]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorSample {
    pub parent: NodeId,
    pub left: NodeId,
    pub right: NodeId,
    pub round: usize,
    /// `cor(A^left, A^right)`.
    pub aligned: f64,
    /// `cor(A^left, D^right)`, `cor(A^left, I^right)`, `cor(A^right, D^left)`,
    /// `cor(A^right, I^left)`.
    pub misaligned: [f64; 4],
}

impl AnchorSample {
    /// The anchor event: aligned above `(1 - delta) theta_s^2`, every
    /// misaligned pair below `delta`.
    pub fn event(&self, delta: f64, theta_sq: f64) -> bool {
        self.aligned > (1.0 - delta) * theta_sq && self.misaligned.iter().all(|&c| c < delta)
    }

    /// Aligned at or above `gamma` and every misaligned pair below it.
    pub fn separated(&self, gamma: f64) -> bool {
        self.aligned >= gamma && self.misaligned.iter().all(|&c| c < gamma)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnchorStats {
    pub samples: Vec<AnchorSample>,
    pub vacuous: usize,
}

/// Rounds `r = 1, 2, ...` while `ℓr` lies inside the parent.
pub(crate) fn rounds(tree: &EvolvedTree, parent: NodeId, ell: usize) -> impl Iterator<Item = usize> {
    let len = tree.sequences[parent].len();
    (1..).take_while(move |r| ell * r < len)
}

/// Samples for every unordered pair of `children` of `parent`.
pub fn anchor_samples(tree: &EvolvedTree, parent: NodeId, children: &[NodeId], ell: usize, a: usize) -> AnchorStats {
    let mut stats = AnchorStats::default();
    for r in rounds(tree, parent, ell) {
        let t = (ell * r) as i64;
        let wins: Vec<Option<[&[u8]; 3]>> = children
            .iter()
            .map(|&c| shifted_windows(&tree.sequences[c].bits, t + true_shift(tree, c, r, ell)?, a))
            .collect();
        for x in 0..children.len() {
            for y in x + 1..children.len() {
                let (Some([dl, al, il]), Some([dr, ar, ir])) = (wins[x], wins[y]) else {
                    stats.vacuous += 1;
                    continue;
                };
                let cor = |u: &[u8], v: &[u8]| correlation(u, v).expect("equal window lengths");
                stats.samples.push(AnchorSample {
                    parent,
                    left: children[x],
                    right: children[y],
                    round: r,
                    aligned: cor(al, ar),
                    misaligned: [cor(al, dr), cor(al, ir), cor(ar, dl), cor(ar, il)],
                });
            }
        }
    }
    stats
}

/// Samples at every internal node of the stable subtree, over pairs of its
/// stable-subtree children.
pub fn anchor_correlation_stats(tree: &EvolvedTree, stable: &StableSubtree, ell: usize, a: usize) -> AnchorStats {
    let shape = tree.shape();
    let mut all = AnchorStats::default();
    for v in stable.nodes().filter(|&v| !shape.is_leaf(v)) {
        let s = anchor_samples(tree, v, &stable.children(&shape, v), ell, a);
        all.samples.extend(s.samples);
        all.vacuous += s.vacuous;
    }
    all
}

//! Gateway subtrees and the adversarial reconstruction.
//!
//! Fix a node `top` of the stable subtree and a site `t` of its sequence. A
//! stable-subtree node `u` below `top` is a gateway for `t` when the site
//! survives down to `u` and no edge on the way holds it in a corrupted island.
//! At every gateway the gateway children are trimmed to exactly `d - 2`, at
//! random, with the `GatewayTrim` substream keyed by the node and the site's
//! position in it. The adversarial reconstruction then runs recursive majority
//! with gateway leaves reporting their true bit and every other leaf reporting
//! the complement of the true bit at `top`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stability::{StabilityReport, StableSubtree};
use crate::error::{Error, Result};
use crate::evolution::EvolvedTree;
use crate::rng::{substream2, Domain};
use crate::tree::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewaySubtree {
    pub top: NodeId,
    pub site: usize,
    /// `(node, position of the site in that node)`, in depth-first order.
    pub nodes: Vec<(NodeId, usize)>,
    /// Every internal gateway kept exactly `d - 2` gateway children.
    pub exact: bool,
}

impl GatewaySubtree {
    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.iter().any(|&(u, _)| u == v)
    }
}

pub(crate) struct GatewayWalk<'a> {
    pub tree: &'a EvolvedTree,
    pub report: &'a StabilityReport,
    pub stable: &'a StableSubtree,
    pub seed: u64,
}

impl GatewayWalk<'_> {
    /// Gateway children of gateway `u` holding the site at `pos`, trimmed to
    /// `d - 2`, with the site's position in each.
    fn children(&self, u: NodeId, pos: usize) -> Vec<(NodeId, usize)> {
        let shape = self.tree.shape();
        let island = pos / self.report.ell;
        let mut kids: Vec<(NodeId, usize)> = shape
            .children(u)
            .filter(|&c| self.stable.contains(c) && !self.report.corrupted(c, island))
            .filter_map(|c| Some((c, self.tree.edge(c)?.map.get(pos)?)))
            .collect();
        let keep = shape.d - 2;
        if kids.len() > keep {
            kids.shuffle(&mut substream2(self.seed, Domain::GatewayTrim, u as u64, pos as u64));
            kids.truncate(keep);
            kids.sort_unstable();
        }
        kids
    }

    fn collect(&self, u: NodeId, pos: usize, out: &mut Vec<(NodeId, usize)>, exact: &mut bool) {
        out.push((u, pos));
        if self.tree.shape().is_leaf(u) {
            return;
        }
        let kids = self.children(u, pos);
        *exact &= kids.len() == self.tree.shape().d - 2;
        for (c, q) in kids {
            self.collect(c, q, out, exact);
        }
    }

    /// Recursive majority below gateway `u`; non-gateway children vote `wrong`.
    fn value(&self, u: NodeId, pos: usize, wrong: u8) -> u8 {
        let shape = self.tree.shape();
        if shape.is_leaf(u) {
            return self.tree.sequences[u].bits[pos];
        }
        let kids = self.children(u, pos);
        let adversaries = shape.d - kids.len();
        let wrong_votes = adversaries + kids.iter().filter(|&&(c, q)| self.value(c, q, wrong) == wrong).count();
        if 2 * wrong_votes > shape.d {
            wrong
        } else {
            1 - wrong
        }
    }
}

fn check_top(tree: &EvolvedTree, stable: &StableSubtree, top: NodeId) -> Result<()> {
    if !stable.contains(top) {
        return Err(Error::InvalidConfig(format!("node {top} is not in the stable subtree")));
    }
    debug_assert!(tree.shape().d >= 3);
    Ok(())
}

/// Gateways for `site` of node `top`.
pub fn compute_gateways(
    tree: &EvolvedTree,
    report: &StabilityReport,
    stable: &StableSubtree,
    top: NodeId,
    site: usize,
    seed: u64,
) -> Result<GatewaySubtree> {
    check_top(tree, stable, top)?;
    let len = tree.sequences[top].len();
    if site >= len {
        return Err(Error::SiteOutOfRange { site, len });
    }
    let walk = GatewayWalk {
        tree,
        report,
        stable,
        seed,
    };
    let mut nodes = Vec::new();
    let mut exact = true;
    walk.collect(top, site, &mut nodes, &mut exact);
    Ok(GatewaySubtree {
        top,
        site,
        nodes,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialReconstruction {
    pub top: NodeId,
    pub bits: Vec<u8>,
    /// Agreement vector: `1` where `bits` matches the true sequence at `top`.
    pub agreement: Vec<u8>,
}

impl AdversarialReconstruction {
    pub fn disagreements(&self) -> usize {
        self.agreement.iter().filter(|&&l| l == 0).count()
    }
}

/// The adversarial reconstruction of every site of `top`.
pub fn adversarial_reconstruct(
    tree: &EvolvedTree,
    report: &StabilityReport,
    stable: &StableSubtree,
    top: NodeId,
    seed: u64,
) -> Result<AdversarialReconstruction> {
    check_top(tree, stable, top)?;
    let walk = GatewayWalk {
        tree,
        report,
        stable,
        seed,
    };
    let truth = &tree.sequences[top].bits;
    let bits: Vec<u8> = (0..truth.len())
        .into_par_iter()
        .map(|t| walk.value(top, t, 1 - truth[t]))
        .collect();
    let agreement = bits.iter().zip(truth).map(|(b, x)| (b == x) as u8).collect();
    Ok(AdversarialReconstruction { top, bits, agreement })
}

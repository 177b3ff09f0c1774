use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ReconConfig;
use super::step::{recursive_step, Abort, NodeResult, RoundTrace};
use crate::error::{Error, Result};
use crate::rng::TieCoins;
use crate::tree::{NodeId, TreeShape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootReconstruction {
    /// Exactly `k` bits.
    pub bits: Vec<u8>,
    /// The root aborted; `bits` is all zeros.
    pub failed: bool,
    pub padded: usize,
    pub truncated: usize,
    /// Per node id; leaves carry their input.
    pub nodes: Vec<NodeResult>,
}

impl RootReconstruction {
    pub fn radioactive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.radioactive).count()
    }

    /// Everything but the sequences, for internal nodes only.
    pub fn diagnostics(&self) -> Diagnostics {
        let nodes: Vec<NodeDiagnostics> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.rounds.is_empty() || n.radioactive)
            .map(|(node, n)| NodeDiagnostics {
                node,
                radioactive: n.radioactive,
                abort: n.abort,
                output_len: n.bits.len(),
                aligned_counts: n.rounds.iter().map(|r| r.aligned.len()).collect(),
                rounds: n.rounds.clone(),
            })
            .collect();
        Diagnostics {
            failed: self.failed,
            padded: self.padded,
            truncated: self.truncated,
            radioactive_nodes: nodes.iter().filter(|n| n.radioactive).map(|n| n.node).collect(),
            nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub failed: bool,
    pub padded: usize,
    pub truncated: usize,
    pub radioactive_nodes: Vec<NodeId>,
    pub nodes: Vec<NodeDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDiagnostics {
    pub node: NodeId,
    pub radioactive: bool,
    pub abort: Option<Abort>,
    pub output_len: usize,
    /// `|G_r|` per round.
    pub aligned_counts: Vec<usize>,
    pub rounds: Vec<RoundTrace>,
}

/// Runs the recursive step bottom-up, one level at a time, and forces the
/// root output to length `k`.
pub fn reconstruct_root(
    leaves: &[Vec<u8>],
    shape: TreeShape,
    config: &ReconConfig,
    ties: &TieCoins,
) -> Result<RootReconstruction> {
    if leaves.len() != shape.leaf_count() {
        return Err(Error::InvalidConfig(format!(
            "expected {} leaf sequences, got {}",
            shape.leaf_count(),
            leaves.len()
        )));
    }
    if config.d != shape.d {
        return Err(Error::InvalidConfig(format!(
            "config arity {} does not match tree arity {}",
            config.d, shape.d
        )));
    }
    let mut nodes: Vec<Option<NodeResult>> = vec![None; shape.node_count()];
    for (v, leaf) in shape.leaves().zip(leaves) {
        nodes[v] = Some(NodeResult::leaf(leaf.clone()));
    }
    for level in (0..shape.height).rev() {
        let done: Vec<NodeResult> = shape
            .level_nodes(level)
            .into_par_iter()
            .map(|v| {
                let children: Vec<&[u8]> = shape
                    .children(v)
                    .map(|c| nodes[c].as_ref().expect("child level is complete").bits.as_slice())
                    .collect();
                recursive_step(&children, config, v, ties)
            })
            .collect();
        for (v, res) in shape.level_nodes(level).zip(done) {
            if res.radioactive {
                log::debug!("node {v} declared radioactive: {:?}", res.abort);
            }
            nodes[v] = Some(res);
        }
    }
    let nodes: Vec<NodeResult> = nodes.into_iter().map(|n| n.expect("every node reconstructed")).collect();

    let k = config.k;
    let root = &nodes[0];
    let (bits, failed, padded, truncated) = if root.radioactive {
        (vec![0u8; k], true, 0, 0)
    } else {
        let got = root.bits.len();
        let mut bits = root.bits.clone();
        bits.resize(k, 0);
        (bits, false, k.saturating_sub(got), got.saturating_sub(k))
    };
    Ok(RootReconstruction {
        bits,
        failed,
        padded,
        truncated,
        nodes,
    })
}

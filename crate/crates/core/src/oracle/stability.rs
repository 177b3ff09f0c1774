//! Radioactive and stable nodes, read off the edge records.
//!
//! A parent is radioactive when one of its child edges has an indel inside an
//! anchor (B1), when two child edges have an indel in the same island (B2), or
//! when one child edge has two or more indels in one island (B3). Positions are
//! parent positions; an insertion counts at the parent site it follows.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::evolution::EvolvedTree;
use crate::rng::{substream, Domain};
use crate::tree::{NodeId, TreeShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instability {
    /// An indel in an anchor.
    B1,
    /// Two children with an indel in the same island.
    B2,
    /// Two or more indels in one child island.
    B3,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStability {
    pub b1: bool,
    pub b2: bool,
    pub b3: bool,
}

impl NodeStability {
    pub fn stable(&self) -> bool {
        !(self.b1 || self.b2 || self.b3)
    }

    /// The first event that holds, in the order B1, B2, B3.
    pub fn trigger(&self) -> Option<Instability> {
        [(self.b1, Instability::B1), (self.b2, Instability::B2), (self.b3, Instability::B3)]
            .into_iter()
            .find_map(|(hit, ev)| hit.then_some(ev))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub ell: usize,
    pub a: usize,
    /// Per node id; leaves are always stable.
    pub nodes: Vec<NodeStability>,
    /// Per child node id: `(parent island, indel count)` for every island of
    /// the parent where this edge has at least one indel. These are the
    /// child's corrupted islands.
    pub island_indels: Vec<Vec<(usize, usize)>>,
}

impl StabilityReport {
    pub fn is_stable(&self, v: NodeId) -> bool {
        self.nodes[v].stable()
    }

    /// Whether `island` of `child`'s parent holds an indel on the edge to `child`.
    pub fn corrupted(&self, child: NodeId, island: usize) -> bool {
        self.island_indels[child].binary_search_by_key(&island, |&(i, _)| i).is_ok()
    }

    pub fn radioactive_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.stable()).count()
    }
}

/// Classifies every node with islands of length `ell` and anchors of length `a`.
pub fn classify_stability(tree: &EvolvedTree, ell: usize, a: usize) -> StabilityReport {
    let shape = tree.shape();
    let mut island_indels = vec![Vec::new(); shape.node_count()];
    for (v, edge) in tree.edges.iter().enumerate() {
        let Some(edge) = edge else { continue };
        let per: &mut Vec<(usize, usize)> = &mut island_indels[v];
        for p in edge.indel_positions() {
            let island = p / ell;
            match per.last_mut() {
                Some((i, c)) if *i == island => *c += 1,
                _ => per.push((island, 1)),
            }
        }
    }

    let nodes = (0..shape.node_count())
        .map(|v| {
            let mut s = NodeStability::default();
            let mut seen = std::collections::HashSet::new();
            for c in shape.children(v) {
                let edge = tree.edge(c).expect("child edge");
                s.b1 |= edge.indel_positions().any(|p| p % ell < a);
                for &(island, count) in &island_indels[c] {
                    s.b3 |= count >= 2;
                    s.b2 |= !seen.insert(island);
                }
            }
            s
        })
        .collect();

    StabilityReport {
        ell,
        a,
        nodes,
        island_indels,
    }
}

/// A `(d-1)`-ary subtree of stable nodes hanging from the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableSubtree {
    /// Per node id.
    pub members: Vec<bool>,
    /// Per node id: children of a member that are left out, whether they failed
    /// to qualify or were trimmed.
    pub dropped: Vec<Vec<NodeId>>,
}

impl StableSubtree {
    pub fn contains(&self, v: NodeId) -> bool {
        self.members.get(v).copied().unwrap_or(false)
    }

    pub fn children(&self, shape: &TreeShape, v: NodeId) -> Vec<NodeId> {
        shape.children(v).filter(|&c| self.contains(c)).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(v, _)| v)
    }
}

/// Greedy bottom-up extraction. A node qualifies when it is stable and at
/// least `d - 1` of its children qualify; surplus children are dropped at
/// random with the `StableTrim` substream of the node.
pub fn extract_stable_subtree(report: &StabilityReport, shape: &TreeShape, seed: u64) -> Option<StableSubtree> {
    let count = shape.node_count();
    let mut qualifies = vec![false; count];
    for v in (0..count).rev() {
        qualifies[v] =
            report.is_stable(v) && (shape.is_leaf(v) || shape.children(v).filter(|&c| qualifies[c]).count() + 1 >= shape.d);
    }
    if !qualifies[0] {
        return None;
    }

    let mut members = vec![false; count];
    let mut dropped = vec![Vec::new(); count];
    members[0] = true;
    for v in 0..count {
        if !members[v] || shape.is_leaf(v) {
            continue;
        }
        let mut keep: Vec<NodeId> = shape.children(v).filter(|&c| qualifies[c]).collect();
        keep.shuffle(&mut substream(seed, Domain::StableTrim, v as u64));
        keep.truncate(shape.d - 1);
        keep.sort_unstable();
        for c in shape.children(v) {
            if keep.binary_search(&c).is_ok() {
                members[c] = true;
            } else {
                dropped[v].push(c);
            }
        }
    }
    Some(StableSubtree { members, dropped })
}

fn g(nu: f64, d: usize) -> f64 {
    let d = d as i32;
    nu.powi(d) + d as f64 * nu.powi(d - 1) * (1.0 - nu)
}

/// `nu_H` from `nu_0 = 1`, `nu_r = (1 - alpha) g(nu_{r-1})`, with
/// `g(nu) = nu^d + d nu^{d-1} (1 - nu)`.
pub fn stable_subtree_bound(alpha: f64, d: usize, height: usize) -> f64 {
    (0..height).fold(1.0, |nu, _| (1.0 - alpha) * g(nu, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve_tree, EdgeRecord, ModelParams};

    fn quiet_tree(d: usize, h: usize, k: usize) -> EvolvedTree {
        evolve_tree(&ModelParams::new(d, h, k, 0.0, 0.0, 0.0).unwrap(), 1).unwrap()
    }

    /// Deletes parent position `p` on the edge into `child`.
    fn delete_at(tree: &mut EvolvedTree, child: NodeId, p: usize) {
        let edge = tree.edges[child].as_mut().unwrap();
        edge.deletions.push(p);
        edge.deletions.sort_unstable();
        edge.map.0[p] = None;
        let mut next = 0;
        for slot in edge.map.0.iter_mut().flatten() {
            *slot = next;
            next += 1;
        }
    }

    fn insert_at(tree: &mut EvolvedTree, child: NodeId, p: usize) {
        let edge: &mut EdgeRecord = tree.edges[child].as_mut().unwrap();
        edge.insertions.push((p, 1));
        edge.insertions.sort_unstable();
    }

    #[test]
    fn quiet_tree_is_stable() {
        let t = quiet_tree(3, 2, 60);
        let r = classify_stability(&t, 10, 4);
        assert_eq!(r.radioactive_count(), 0);
        assert!(r.island_indels.iter().all(Vec::is_empty));
    }

    #[test]
    fn anchor_deletion_is_b1() {
        let mut t = quiet_tree(3, 1, 60);
        delete_at(&mut t, 2, 22); // island 2, offset 2 < a
        let r = classify_stability(&t, 10, 4);
        assert_eq!(r.nodes[0].trigger(), Some(Instability::B1));
        assert!(r.corrupted(2, 2));
        assert!(!r.corrupted(1, 2));
    }

    #[test]
    fn island_events() {
        let mut t = quiet_tree(3, 1, 60);
        delete_at(&mut t, 1, 15);
        let r = classify_stability(&t, 10, 4);
        assert!(r.is_stable(0));
        assert_eq!(r.island_indels[1], vec![(1, 1)]);

        insert_at(&mut t, 2, 17);
        let r = classify_stability(&t, 10, 4);
        assert_eq!(r.nodes[0].trigger(), Some(Instability::B2));

        let mut t = quiet_tree(3, 1, 60);
        delete_at(&mut t, 3, 15);
        insert_at(&mut t, 3, 18);
        let r = classify_stability(&t, 10, 4);
        assert_eq!(r.nodes[0].trigger(), Some(Instability::B3));
        assert!(!r.nodes[0].b2);
    }

    #[test]
    fn insertion_after_anchor_end_counts_in_anchor() {
        let mut t = quiet_tree(3, 1, 60);
        insert_at(&mut t, 1, 23);
        assert!(classify_stability(&t, 10, 4).nodes[0].b1);
        let mut t = quiet_tree(3, 1, 60);
        insert_at(&mut t, 1, 24);
        assert!(classify_stability(&t, 10, 4).is_stable(0));
    }

    #[test]
    fn leaves_are_stable() {
        let p = ModelParams::new(3, 2, 200, 0.1, 0.05, 0.05).unwrap();
        let t = evolve_tree(&p, 4).unwrap();
        let r = classify_stability(&t, 6, 3);
        for v in t.shape().leaves() {
            assert!(r.is_stable(v));
        }
        assert!(r.radioactive_count() > 0);
    }

    #[test]
    fn classification_is_idempotent() {
        let p = ModelParams::new(5, 2, 300, 0.1, 0.002, 0.002).unwrap();
        let t = evolve_tree(&p, 9).unwrap();
        assert_eq!(classify_stability(&t, 7, 3), classify_stability(&t, 7, 3));
    }

    #[test]
    fn all_stable_drops_one_child_per_node() {
        let t = quiet_tree(5, 2, 30);
        let shape = t.shape();
        let r = classify_stability(&t, 5, 2);
        let s = extract_stable_subtree(&r, &shape, 3).unwrap();
        assert_eq!(s.nodes().count(), 1 + 4 + 16);
        for v in s.nodes().filter(|&v| !shape.is_leaf(v)) {
            assert_eq!(s.children(&shape, v).len(), 4);
            assert_eq!(s.dropped[v].len(), 1);
        }
        assert_eq!(s, extract_stable_subtree(&r, &shape, 3).unwrap());
    }

    #[test]
    fn radioactive_root_has_no_subtree() {
        let mut t = quiet_tree(3, 1, 60);
        delete_at(&mut t, 1, 0);
        let r = classify_stability(&t, 10, 4);
        assert!(extract_stable_subtree(&r, &t.shape(), 0).is_none());
    }

    #[test]
    fn one_radioactive_child_is_tolerated_two_are_not() {
        let mut t = quiet_tree(3, 2, 60);
        let shape = t.shape();
        delete_at(&mut t, shape.children(1).start, 1);
        let r = classify_stability(&t, 10, 4);
        let s = extract_stable_subtree(&r, &shape, 0).unwrap();
        assert!(!s.contains(1));
        assert_eq!(s.children(&shape, 0), vec![2, 3]);

        delete_at(&mut t, shape.children(2).start, 1);
        let r = classify_stability(&t, 10, 4);
        assert!(extract_stable_subtree(&r, &shape, 0).is_none());
    }

    #[test]
    fn bound_edges() {
        for h in 0..6 {
            assert_eq!(stable_subtree_bound(0.0, 5, h), 1.0);
        }
        assert_eq!(stable_subtree_bound(1.0, 5, 1), 0.0);
        assert_eq!(stable_subtree_bound(1.0, 5, 4), 0.0);
    }

    #[test]
    fn bound_matches_expanded_polynomial() {
        // g(nu) = d nu^{d-1} - (d-1) nu^d
        let expanded = |nu: f64, d: i32| d as f64 * nu.powi(d - 1) - (d - 1) as f64 * nu.powi(d);
        let (alpha, d) = (0.01, 5);
        let mut nu = 1.0;
        for _ in 0..3 {
            nu = (1.0 - alpha) * expanded(nu, d);
        }
        assert!((stable_subtree_bound(alpha, 5, 3) - nu).abs() < 1e-15);
        assert!((stable_subtree_bound(alpha, 5, 1) - 0.99).abs() < 1e-15);
    }
}

//! Complete d-ary tree layout.
//!
//! Nodes are numbered in level order: the root is 0 and the children of `v`
//! are `d*v + 1 ..= d*v + d`. Within a level, increasing ids follow the planar
//! left-to-right order.

use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub d: usize,
    pub height: usize,
}

impl TreeShape {
    pub fn new(d: usize, height: usize) -> Self {
        Self { d, height }
    }

    /// Exact node count `(d^{H+1} - 1) / (d - 1)`, or `None` on overflow.
    pub fn checked_node_count(&self) -> Option<u128> {
        let d = self.d as u128;
        let mut total: u128 = 0;
        let mut level: u128 = 1;
        for _ in 0..=self.height {
            total = total.checked_add(level)?;
            level = level.checked_mul(d)?;
        }
        Some(total)
    }

    pub fn node_count(&self) -> usize {
        self.level_start(self.height + 1)
    }

    pub fn leaf_count(&self) -> usize {
        self.d.pow(self.height as u32)
    }

    /// Id of the first node on `level`.
    pub fn level_start(&self, level: usize) -> usize {
        (0..level).map(|l| self.d.pow(l as u32)).sum()
    }

    pub fn level_nodes(&self, level: usize) -> std::ops::Range<NodeId> {
        let start = self.level_start(level);
        start..start + self.d.pow(level as u32)
    }

    pub fn leaves(&self) -> std::ops::Range<NodeId> {
        self.level_nodes(self.height)
    }

    pub fn level_of(&self, mut node: NodeId) -> usize {
        let mut level = 0;
        while node > 0 {
            node = (node - 1) / self.d;
            level += 1;
        }
        level
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        (node > 0).then(|| (node - 1) / self.d)
    }

    pub fn children(&self, node: NodeId) -> std::ops::Range<NodeId> {
        if self.level_of(node) >= self.height {
            return 0..0;
        }
        node * self.d + 1..node * self.d + self.d + 1
    }

    /// Position of `node` among its siblings.
    pub fn child_index(&self, node: NodeId) -> usize {
        (node - 1) % self.d
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.level_of(node) == self.height
    }

    /// Nodes from `node` up to the root, inclusive.
    pub fn path_to_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let t = TreeShape::new(3, 2);
        assert_eq!(t.node_count(), 13);
        assert_eq!(t.checked_node_count(), Some(13));
        assert_eq!(t.leaf_count(), 9);
        assert_eq!(t.leaves(), 4..13);
        assert_eq!(TreeShape::new(5, 0).node_count(), 1);
    }

    #[test]
    fn navigation() {
        let t = TreeShape::new(3, 2);
        assert_eq!(t.children(0), 1..4);
        assert_eq!(t.children(2), 7..10);
        assert_eq!(t.children(7), 0..0);
        assert_eq!(t.parent(8), Some(2));
        assert_eq!(t.parent(0), None);
        assert_eq!(t.level_of(12), 2);
        assert_eq!(t.child_index(8), 1);
        assert_eq!(t.path_to_root(9), vec![9, 2, 0]);
    }
}

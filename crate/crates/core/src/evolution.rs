//! Ground-truth sequence evolution on a complete d-ary tree.
//!
//! Each edge copies the parent sequence site by site. Per parent site three
//! independent coins decide deletion (`p_d`), substitution (`p_s`) and an
//! insertion of a uniform bit immediately to its right (`p_i`). A deleted site
//! still honors its insertion coin; inserted sites are not mutated again on
//! the same edge. Every site carries a lineage id so homology is exact.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::tree::{NodeId, TreeShape};

/// Default cap on the number of tree nodes `evolve_tree` will build.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub height: usize,
    pub k: usize,
    pub p_s: f64,
    pub p_d: f64,
    pub p_i: f64,
}

impl ModelParams {
    pub fn new(d: usize, height: usize, k: usize, p_s: f64, p_d: f64, p_i: f64) -> Result<Self> {
        let params = Self {
            d,
            height,
            k,
            p_s,
            p_d,
            p_i,
        };
        params.validate()?;
        Ok(params)
    }

    /// Splits a combined indel rate evenly between insertions and deletions.
    pub fn with_indel_rate(d: usize, height: usize, k: usize, p_s: f64, p_id: f64) -> Result<Self> {
        Self::new(d, height, k, p_s, p_id / 2.0, p_id / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 || self.d % 2 == 0 {
            return Err(Error::InvalidConfig(format!("arity must be odd and >= 3, got {}", self.d)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("root length k must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.p_s) {
            return Err(Error::InvalidConfig(format!("p_s must lie in [0, 1/2), got {}", self.p_s)));
        }
        for (name, p) in [("p_d", self.p_d), ("p_i", self.p_i)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> TreeShape {
        TreeShape::new(self.d, self.height)
    }

    pub fn theta_s(&self) -> f64 {
        1.0 - 2.0 * self.p_s
    }

    pub fn p_id(&self) -> f64 {
        self.p_i + self.p_d
    }

    pub fn leaf_count(&self) -> usize {
        self.shape().leaf_count()
    }
}

/// A binary sequence with one lineage id per site.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sequence {
    pub bits: Vec<u8>,
    pub lineage: Vec<u64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Parent position -> child position, `None` for a deleted site.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SiteMap(pub Vec<Option<usize>>);

impl SiteMap {
    pub fn identity(len: usize) -> Self {
        SiteMap((0..len).map(Some).collect())
    }

    pub fn get(&self, pos: usize) -> Option<usize> {
        self.0.get(pos).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `other ∘ self`: positions of `self`'s domain carried through both maps.
    pub fn then(&self, other: &SiteMap) -> SiteMap {
        SiteMap(self.0.iter().map(|p| p.and_then(|q| other.get(q))).collect())
    }

    pub fn is_monotone(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .try_fold(None::<usize>, |prev, &p| match prev {
                Some(q) if p <= q => None,
                _ => Some(Some(p)),
            })
            .is_some()
    }
}

/// Everything that happened on one edge, in parent coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub map: SiteMap,
    pub substitutions: Vec<usize>,
    pub deletions: Vec<usize>,
    /// `(parent position, inserted bit)`; the new site sits right after it.
    pub insertions: Vec<(usize, u8)>,
}

impl EdgeRecord {
    /// Parent positions that received an indel, in order, one entry per event.
    pub fn indel_positions(&self) -> impl Iterator<Item = usize> + '_ {
        let mut dels = self.deletions.iter().copied().peekable();
        let mut ins = self.insertions.iter().map(|&(p, _)| p).peekable();
        std::iter::from_fn(move || match (dels.peek(), ins.peek()) {
            (Some(&a), Some(&b)) if a <= b => dels.next(),
            (Some(_), Some(_)) => ins.next(),
            (Some(_), None) => dels.next(),
            (None, Some(_)) => ins.next(),
            (None, None) => None,
        })
    }

    /// Rebuilds the child bits from the parent bits and the recorded events.
    pub fn replay(&self, parent: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(parent.len());
        let mut subs = self.substitutions.iter().peekable();
        let mut dels = self.deletions.iter().peekable();
        let mut ins = self.insertions.iter().peekable();
        for (t, &bit) in parent.iter().enumerate() {
            let flipped = subs.next_if(|&&p| p == t).is_some();
            if dels.next_if(|&&p| p == t).is_none() {
                out.push(bit ^ flipped as u8);
            }
            while let Some(&(_, b)) = ins.next_if(|&&(p, _)| p == t) {
                out.push(b);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvedTree {
    pub params: ModelParams,
    pub seed: u64,
    /// Indexed by node id.
    pub sequences: Vec<Sequence>,
    /// Indexed by node id; `None` for the root.
    pub edges: Vec<Option<EdgeRecord>>,
}

impl EvolvedTree {
    pub fn shape(&self) -> TreeShape {
        self.params.shape()
    }

    pub fn root(&self) -> &Sequence {
        &self.sequences[0]
    }

    pub fn edge(&self, child: NodeId) -> Option<&EdgeRecord> {
        self.edges.get(child).and_then(Option::as_ref)
    }

    pub fn leaf_bits(&self) -> Vec<Vec<u8>> {
        self.shape().leaves().map(|v| self.sequences[v].bits.clone()).collect()
    }

    /// `F_node`: root position -> position in `node`, `None` if deleted on the path.
    pub fn compose_maps(&self, node: NodeId) -> SiteMap {
        let shape = self.shape();
        let mut path = shape.path_to_root(node);
        path.reverse();
        let mut map = SiteMap::identity(self.root().len());
        for &v in &path[1..] {
            map = map.then(&self.edge(v).expect("non-root node has an edge").map);
        }
        map
    }

    /// `F_u` for every node, computed top-down in one pass.
    pub fn all_root_maps(&self) -> Vec<SiteMap> {
        let shape = self.shape();
        let mut maps: Vec<SiteMap> = Vec::with_capacity(shape.node_count());
        maps.push(SiteMap::identity(self.root().len()));
        for v in 1..shape.node_count() {
            let parent = shape.parent(v).unwrap();
            let m = maps[parent].then(&self.edge(v).unwrap().map);
            maps.push(m);
        }
        maps
    }

    /// Whether every node length lies in `[(1-zeta)k, (1+zeta)k]`, with the extremes.
    pub fn length_stats(&self, zeta: f64) -> LengthStats {
        let k = self.params.k as f64;
        let (min_len, max_len) = self
            .sequences
            .iter()
            .map(Sequence::len)
            .fold((usize::MAX, 0), |(lo, hi), l| (lo.min(l), hi.max(l)));
        let lo = (1.0 - zeta) * k;
        let hi = (1.0 + zeta) * k;
        LengthStats {
            holds: min_len as f64 >= lo && max_len as f64 <= hi,
            min_len,
            max_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthStats {
    pub holds: bool,
    pub min_len: usize,
    pub max_len: usize,
}

/// Uniform root sequence with lineage ids `1..=k`.
pub fn sample_root(k: usize, rng: &mut impl Rng) -> Result<Sequence> {
    if k == 0 {
        return Err(Error::InvalidConfig("root length k must be >= 1".into()));
    }
    Ok(Sequence {
        bits: (0..k).map(|_| rng.random::<bool>() as u8).collect(),
        lineage: (1..=k as u64).collect(),
    })
}

/// Mutates one edge. `next_id` is the next unused lineage id and is advanced
/// past every inserted site.
pub fn mutate_edge(
    parent: &Sequence,
    params: &ModelParams,
    rng: &mut impl Rng,
    next_id: &mut u64,
) -> (Sequence, EdgeRecord) {
    let mut child = Sequence {
        bits: Vec::with_capacity(parent.len() + 8),
        lineage: Vec::with_capacity(parent.len() + 8),
    };
    let mut rec = EdgeRecord {
        map: SiteMap(Vec::with_capacity(parent.len())),
        ..Default::default()
    };
    for (t, (&bit, &id)) in parent.bits.iter().zip(&parent.lineage).enumerate() {
        let deleted = rng.random_bool(params.p_d);
        let substituted = rng.random_bool(params.p_s);
        let inserted = rng.random_bool(params.p_i);
        if deleted {
            rec.deletions.push(t);
            rec.map.0.push(None);
        } else {
            if substituted {
                rec.substitutions.push(t);
            }
            rec.map.0.push(Some(child.bits.len()));
            child.bits.push(bit ^ substituted as u8);
            child.lineage.push(id);
        }
        if inserted {
            let b = rng.random::<bool>() as u8;
            rec.insertions.push((t, b));
            child.bits.push(b);
            child.lineage.push(*next_id);
            *next_id += 1;
        }
    }
    (child, rec)
}

/// Runs the full process with the default node budget.
pub fn evolve_tree(params: &ModelParams, seed: u64) -> Result<EvolvedTree> {
    evolve_tree_with_budget(params, seed, DEFAULT_NODE_BUDGET)
}

/// Runs the full process. Edge `v` draws from substream `(seed, Edge, v)`.
pub fn evolve_tree_with_budget(params: &ModelParams, seed: u64, node_budget: usize) -> Result<EvolvedTree> {
    params.validate()?;
    let shape = params.shape();
    match shape.checked_node_count() {
        Some(n) if n <= node_budget as u128 => {}
        n => {
            return Err(Error::NodeBudget {
                nodes: n.unwrap_or(u128::MAX),
                budget: node_budget,
            })
        }
    }
    let count = shape.node_count();
    let root = sample_root(params.k, &mut substream(seed, Domain::Root, 0))?;
    let mut next_id = params.k as u64 + 1;
    let mut sequences = Vec::with_capacity(count);
    let mut edges = Vec::with_capacity(count);
    sequences.push(root);
    edges.push(None);
    for v in 1..count {
        let parent = shape.parent(v).unwrap();
        let mut rng: ChaCha8Rng = substream(seed, Domain::Edge, v as u64);
        let (child, rec) = mutate_edge(&sequences[parent], params, &mut rng, &mut next_id);
        sequences.push(child);
        edges.push(Some(rec));
    }
    Ok(EvolvedTree {
        params: *params,
        seed,
        sequences,
        edges,
    })
}

//! One parent from its `d` reconstructed children.
//!
//! Rounds walk the parent's islands left to right. Round `r` looks at the
//! anchor that opens island `r + 1`, read from each child at its current shift.
//! Children whose anchor agrees with at least `d - 2` anchors (itself
//! included) are aligned: no indel in island `r`, shift kept. Any other child
//! is re-tested one site to the left (a deletion, shift `-1`) and one site to
//! the right (an insertion, shift `+1`). Island `r` is then filled by sitewise
//! majority over the aligned children.

use serde::{Deserialize, Serialize};

use super::config::{ReconConfig, UnresolvedChild};
use super::{correlation_unchecked, majority_vote};
use crate::rng::TieCoins;
use crate::tree::NodeId;

/// Why a parent was declared radioactive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Abort {
    TooFewAligned { round: usize, aligned: usize },
    Unresolved { round: usize, child: usize },
    Ambiguous { round: usize, child: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    /// Aligned children `G_r`.
    pub aligned: Vec<usize>,
    /// Shift of every child after the round's update.
    pub shifts: Vec<i64>,
    /// The closing round, run without an anchor.
    pub tail: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeResult {
    pub bits: Vec<u8>,
    pub radioactive: bool,
    pub abort: Option<Abort>,
    pub rounds: Vec<RoundTrace>,
}

impl NodeResult {
    pub fn leaf(bits: Vec<u8>) -> Self {
        Self {
            bits,
            radioactive: false,
            abort: None,
            rounds: Vec::new(),
        }
    }

    /// Shift estimate of `child` after round `r` (1-based), if that round ran
    /// an anchor test.
    pub fn shift(&self, child: usize, r: usize) -> Option<i64> {
        let round = self.rounds.get(r.checked_sub(1)?)?;
        (!round.tail).then(|| round.shifts[child])
    }
}

fn window(seq: &[u8], start: i64, len: usize) -> &[u8] {
    if start < 0 || start as usize >= seq.len() {
        return &[];
    }
    let s = start as usize;
    &seq[s..(s + len).min(seq.len())]
}

/// Number of reference anchors (other than `skip`) that `probe` matches at
/// threshold `gamma`, over their common prefix.
fn votes(probe: &[u8], anchors: &[&[u8]], skip: Option<usize>, gamma: f64) -> usize {
    anchors
        .iter()
        .enumerate()
        .filter(|&(j, other)| {
            let m = probe.len().min(other.len());
            Some(j) != skip && m > 0 && correlation_unchecked(&probe[..m], &other[..m]) >= gamma
        })
        .count()
}

/// Reconstructs a parent from its children. `node` keys the tie coins.
pub fn recursive_step(children: &[&[u8]], config: &ReconConfig, node: NodeId, ties: &TieCoins) -> NodeResult {
    let d = children.len();
    assert_eq!(d, config.d, "expected {} children", config.d);
    let (ell, a, gamma) = (config.ell, config.a, config.gamma);
    let need = d.saturating_sub(2);

    let mut shifts = vec![0i64; d];
    let mut bits = Vec::with_capacity(children.iter().map(|c| c.len()).max().unwrap_or(0));
    let mut rounds = Vec::new();

    let radioactive = |abort: Abort, rounds: Vec<RoundTrace>| NodeResult {
        bits: children[0].to_vec(),
        radioactive: true,
        abort: Some(abort),
        rounds,
    };

    for r in 1.. {
        let t = (ell * r) as i64;
        let island_start = t - ell as i64;
        if children
            .iter()
            .zip(&shifts)
            .any(|(c, &s)| island_start + s < 0 || island_start + s >= c.len() as i64)
        {
            break;
        }

        let remaining: Vec<i64> = children.iter().zip(&shifts).map(|(c, &s)| c.len() as i64 - (t + s)).collect();
        let tail = remaining.iter().any(|&rem| rem < 1);
        let aligned: Vec<usize>;
        let len: usize;
        if tail {
            // No anchor left to test: every child votes at its current shift,
            // and the island ends where most children end.
            aligned = (0..d).collect();
            let mut left: Vec<i64> = children
                .iter()
                .zip(&shifts)
                .map(|(c, &s)| (c.len() as i64 - (island_start + s)).max(0))
                .collect();
            left.sort_unstable();
            len = (left[d / 2] as usize).min(ell);
        } else {
            // Short-tail rule: anchors shrink to the shortest remainder.
            let m = (a as i64).min(*remaining.iter().min().unwrap()) as usize;
            let anchors: Vec<&[u8]> = children.iter().zip(&shifts).map(|(c, &s)| window(c, t + s, m)).collect();
            aligned = (0..d).filter(|&i| votes(anchors[i], &anchors, None, gamma) >= need).collect();
            if aligned.len() < need {
                return radioactive(
                    Abort::TooFewAligned {
                        round: r,
                        aligned: aligned.len(),
                    },
                    rounds,
                );
            }
            let old = shifts.clone();
            for i in (0..d).filter(|i| !aligned.contains(i)) {
                let del = window(children[i], t + old[i] - 1, m);
                let ins = window(children[i], t + old[i] + 1, m);
                let del_ok = del.len() == m && votes(del, &anchors, Some(i), gamma) >= need;
                let ins_ok = !ins.is_empty() && votes(ins, &anchors, Some(i), gamma) >= need;
                match (del_ok, ins_ok) {
                    (true, true) => return radioactive(Abort::Ambiguous { round: r, child: i }, rounds),
                    (true, false) => shifts[i] -= 1,
                    (false, true) => shifts[i] += 1,
                    (false, false) => {
                        if config.unresolved == UnresolvedChild::Abort {
                            return radioactive(Abort::Unresolved { round: r, child: i }, rounds);
                        }
                    }
                }
            }
            len = ell;
        }

        // Sitewise majority over the aligned children; a child that has run
        // out of sites abstains.
        let mut ballot = vec![None; d];
        for p in 0..len {
            let pos = island_start as usize + p;
            ballot.fill(None);
            for &i in &aligned {
                let q = (island_start + shifts[i]) as usize + p;
                ballot[i] = children[i].get(q).copied();
            }
            bits.push(majority_vote(&ballot, ties.coin(node, pos)));
        }
        rounds.push(RoundTrace {
            aligned,
            shifts: shifts.clone(),
            tail,
        });
        if tail {
            break;
        }
    }

    NodeResult {
        bits,
        radioactive: false,
        abort: None,
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve_tree, ModelParams};
    use crate::rng::{substream, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    fn config(d: usize, k: usize, p_s: f64, ell: usize, a: usize, policy: UnresolvedChild) -> ReconConfig {
        let p = ModelParams::new(d, 1, k, p_s, 0.0, 0.0).unwrap();
        ReconConfig::derive(&p, 8.0, Some(0.01))
            .unwrap()
            .with_layout(ell, a)
            .unwrap()
            .with_unresolved(policy)
    }

    fn random_bits(k: usize, seed: u64) -> Vec<u8> {
        let mut rng = substream(seed, Domain::Fixture, 0);
        (0..k).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn run(children: &[Vec<u8>], cfg: &ReconConfig) -> NodeResult {
        let refs: Vec<&[u8]> = children.iter().map(Vec::as_slice).collect();
        recursive_step(&refs, cfg, 0, &TieCoins::new(0))
    }

    #[test]
    fn identical_children_return_the_parent() {
        let parent = random_bits(400, 1);
        let cfg = config(5, 400, 0.0, 40, 20, UnresolvedChild::Skip);
        let res = run(&vec![parent.clone(); 5], &cfg);
        assert_eq!(res.bits, parent);
        assert!(!res.radioactive);
        assert!(res.rounds.iter().all(|r| r.aligned.len() == 5 && r.shifts.iter().all(|&s| s == 0)));
        assert!(res.rounds.last().unwrap().tail);
        assert_eq!(res.rounds.len(), 10);
    }

    #[test]
    fn deletion_outside_the_anchor_shifts_left() {
        let parent = random_bits(400, 2);
        let mut children = vec![parent.clone(); 5];
        children[2].remove(110); // island 2, past its anchor
        let cfg = config(5, 400, 0.0, 40, 20, UnresolvedChild::Abort);
        let res = run(&children, &cfg);
        assert!(!res.radioactive, "{:?}", res.abort);
        assert_eq!(res.bits, parent);
        assert_eq!(res.shift(2, 2), Some(0));
        assert_eq!(res.shift(2, 3), Some(-1));
        assert_eq!(res.shift(2, 9), Some(-1));
        assert!(!res.rounds[2].aligned.contains(&2));
        assert!(res.rounds[3].aligned.contains(&2));
    }

    #[test]
    fn insertion_outside_the_anchor_shifts_right() {
        let parent = random_bits(400, 3);
        let mut children = vec![parent.clone(); 5];
        children[3].insert(151, 1 - parent[151]);
        let res = run(&children, &config(5, 400, 0.0, 40, 20, UnresolvedChild::Abort));
        assert!(!res.radioactive);
        assert_eq!(res.bits, parent);
        assert_eq!(res.shift(3, 3), Some(0));
        assert_eq!(res.shift(3, 4), Some(1));
    }

    #[test]
    fn destroyed_anchor() {
        let parent = random_bits(400, 4);
        let mut children = vec![parent.clone(); 5];
        for b in &mut children[1][120..140] {
            *b ^= 1;
        }
        let res = run(&children, &config(5, 400, 0.0, 40, 20, UnresolvedChild::Abort));
        assert!(res.radioactive);
        assert_eq!(res.abort, Some(Abort::Unresolved { round: 3, child: 1 }));
        assert_eq!(res.bits, children[0]);

        let res = run(&children, &config(5, 400, 0.0, 40, 20, UnresolvedChild::Skip));
        assert!(!res.radioactive);
        assert_eq!(res.rounds[2].aligned, vec![0, 2, 3, 4]);
        assert_eq!(res.shift(1, 3), Some(0));
        assert_eq!(res.bits, parent);
    }

    #[test]
    fn too_few_aligned() {
        let parent = random_bits(400, 5);
        let mut children = vec![parent.clone(); 5];
        for (c, flip) in [(0, 0), (1, 1), (2, 3)] {
            for b in &mut children[c][40 + 5 * flip..60] {
                *b ^= 1;
            }
        }
        let res = run(&children, &config(5, 400, 0.0, 40, 20, UnresolvedChild::Skip));
        assert!(res.radioactive);
        assert!(matches!(res.abort, Some(Abort::TooFewAligned { round: 1, .. })));
    }

    #[test]
    fn ambiguous_shift() {
        // Around t = 80 the parent is all zeros. Child 1 carries ones at
        // t, t + 10, t + 19: three in its own window, two in either neighbour.
        let mut parent = random_bits(400, 6);
        parent[79..101].fill(0);
        let mut children = vec![parent.clone(); 5];
        for p in [80, 90, 99] {
            children[1][p] = 1;
        }
        let res = run(&children, &config(5, 400, 0.0, 40, 20, UnresolvedChild::Skip));
        assert_eq!(res.abort, Some(Abort::Ambiguous { round: 2, child: 1 }));
    }

    #[test]
    fn ragged_tail_takes_the_median_length() {
        let parent = random_bits(130, 7);
        let mut children = vec![parent.clone(); 5];
        children[0].truncate(125);
        children[4].extend([1, 1, 1]);
        let res = run(&children, &config(5, 130, 0.0, 40, 20, UnresolvedChild::Skip));
        assert_eq!(res.bits, parent);
        assert!(res.rounds.last().unwrap().tail);
    }

    #[test]
    fn empty_children() {
        let res = run(&vec![Vec::new(); 3], &config(3, 100, 0.0, 10, 4, UnresolvedChild::Skip));
        assert!(res.bits.is_empty() && !res.radioactive && res.rounds.is_empty());
    }

    fn leaves(d: usize, k: usize, p_s: f64, p_id: f64, seed: u64) -> Vec<Vec<u8>> {
        let p = ModelParams::with_indel_rate(d, 1, k, p_s, p_id).unwrap();
        evolve_tree(&p, seed).unwrap().leaf_bits()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shifts_move_at_most_one_per_round(seed in 0u64..1_000_000, p_id in 0.0f64..0.02) {
            let kids = leaves(5, 300, 0.05, p_id, seed);
            let res = run(&kids, &config(5, 300, 0.05, 30, 12, UnresolvedChild::Skip));
            let mut prev = vec![0i64; 5];
            for round in &res.rounds {
                for (a, b) in round.shifts.iter().zip(&prev) {
                    prop_assert!((a - b).abs() <= 1);
                }
                prev = round.shifts.clone();
            }
            prop_assert_eq!(&res, &run(&kids, &config(5, 300, 0.05, 30, 12, UnresolvedChild::Skip)));
        }

        #[test]
        fn full_alignment_is_plain_majority(seed in 0u64..1_000_000, p_s in 0.0f64..0.1) {
            let kids = leaves(5, 300, p_s, 0.0, seed);
            let res = run(&kids, &config(5, 300, p_s, 30, 20, UnresolvedChild::Skip));
            if !res.radioactive && res.rounds.iter().all(|r| r.aligned.len() == 5) {
                let plain: Vec<u8> = (0..300)
                    .map(|t| (kids.iter().filter(|c| c[t] == 1).count() >= 3) as u8)
                    .collect();
                prop_assert_eq!(res.bits, plain);
            }
        }
    }
}

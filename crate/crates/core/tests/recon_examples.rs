use indeltree::evolution::{evolve_tree, ModelParams};
use indeltree::recon::{indel_rate_bound, reconstruct_root, ReconConfig};
use indeltree::rng::{substream, Domain};
use indeltree::{TieCoins, TreeShape};
use rand::Rng;
use proptest::prelude::*;

fn agreement(x: &[u8], y: &[u8]) -> f64 {
    x.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / x.len() as f64
}

// column-wise majority, straight down the tree, no alignment
fn plain_majority(leaves: &[Vec<u8>], d: usize) -> Vec<u8> {
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(d)
            .map(|kids| {
                (0..kids[0].len())
                    .map(|j| {
                        let ones = kids.iter().filter(|c| c[j] == 1).count();
                        (2 * ones > d) as u8
                    })
                    .collect()
            })
            .collect();
    }
    level.pop().unwrap()
}

fn mean_agreement(p: &ModelParams, cfg: &ReconConfig, seeds: std::ops::Range<u64>) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    for s in seeds {
        let t = evolve_tree(p, s).unwrap();
        let rec = reconstruct_root(&t.leaf_bits(), t.shape(), cfg, &TieCoins::new(s)).unwrap();
        hit += agreement(&rec.bits, &t.root().bits) * p.k as f64;
        total += p.k as f64;
    }
    hit / total
}

#[test]
fn zero_rates_recover_the_root() {
    let p = ModelParams::new(5, 2, 500, 0.0, 0.0, 0.0).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap();
    for s in 0..5 {
        let t = evolve_tree(&p, s).unwrap();
        let rec = reconstruct_root(&t.leaf_bits(), t.shape(), &cfg, &TieCoins::new(s)).unwrap();
        assert_eq!(rec.bits, t.root().bits);
        assert!(!rec.failed);
        assert_eq!((rec.padded, rec.truncated), (0, 0));
    }
}

#[test]
fn substitutions_only_beat_one_minus_one_over_d() {
    let p = ModelParams::new(5, 2, 3375, 0.05, 0.0, 0.0).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(1000, 600).unwrap();
    let acc = mean_agreement(&p, &cfg, 0..50);
    assert!(acc >= 1.0 - 1.0 / 5.0, "{acc}");
}

#[test]
fn indels_at_the_bound_keep_agreement_high() {
    let (ell, a) = (130, 65);
    let p_id = indel_rate_bound(0.2, 5, 3375, a);
    let p = ModelParams::with_indel_rate(5, 2, 3375, 0.05, p_id).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(ell, a).unwrap();
    let acc = mean_agreement(&p, &cfg, 0..50);
    assert!(acc > 0.9, "{acc}");
}

#[test]
fn wrong_leaf_count_is_an_error() {
    let p = ModelParams::new(3, 2, 100, 0.0, 0.0, 0.0).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap();
    let leaves = vec![vec![0u8; 100]; 8];
    assert!(reconstruct_root(&leaves, TreeShape::new(3, 2), &cfg, &TieCoins::new(0)).is_err());
    let wrong_arity = vec![vec![0u8; 100]; 25];
    assert!(reconstruct_root(&wrong_arity, TreeShape::new(5, 2), &cfg, &TieCoins::new(0)).is_err());
}

#[test]
fn short_output_is_padded_and_long_output_truncated() {
    let p = ModelParams::new(3, 1, 200, 0.0, 0.0, 0.0).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(50, 20).unwrap();
    let shape = TreeShape::new(3, 1);
    let short = vec![vec![1u8; 180]; 3];
    let rec = reconstruct_root(&short, shape, &cfg, &TieCoins::new(0)).unwrap();
    assert_eq!(rec.bits.len(), 200);
    assert_eq!((rec.padded, rec.truncated), (20, 0));
    assert!(rec.bits[180..].iter().all(|&b| b == 0));
    let long = vec![vec![1u8; 230]; 3];
    let rec = reconstruct_root(&long, shape, &cfg, &TieCoins::new(0)).unwrap();
    assert_eq!(rec.bits, vec![1u8; 200]);
    assert_eq!((rec.padded, rec.truncated), (0, 30));
}

#[test]
fn failed_root_yields_zeros_and_diagnostics() {
    // five unrelated children never align
    let p = ModelParams::new(5, 1, 400, 0.0, 0.0, 0.0).unwrap();
    let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(200, 100).unwrap();
    let leaves: Vec<Vec<u8>> = (0..5u64)
        .map(|c| {
            let mut r = substream(c, Domain::Root, 0);
            (0..400).map(|_| r.random_range(0..2u8)).collect()
        })
        .collect();
    let rec = reconstruct_root(&leaves, TreeShape::new(5, 1), &cfg, &TieCoins::new(0)).unwrap();
    assert!(rec.failed);
    assert_eq!(rec.bits, vec![0u8; 400]);
    let diag = rec.diagnostics();
    assert!(diag.failed);
    assert_eq!(diag.radioactive_nodes, vec![0]);
    assert!(diag.nodes[0].abort.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn without_indels_it_is_plain_majority(seed in any::<u64>(), d in prop::sample::select(vec![3usize, 5]), ps in 0.0..0.05f64) {
        let p = ModelParams::new(d, 2, 600, ps, 0.0, 0.0).unwrap();
        let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(300, 200).unwrap();
        let t = evolve_tree(&p, seed).unwrap();
        let rec = reconstruct_root(&t.leaf_bits(), t.shape(), &cfg, &TieCoins::new(seed)).unwrap();
        let diag = rec.diagnostics();
        let unshifted = diag.nodes.iter().all(|n| n.rounds.iter().all(|r| r.shifts.iter().all(|&s| s == 0)));
        prop_assume!(unshifted && diag.radioactive_nodes.is_empty());
        prop_assert_eq!(rec.bits, plain_majority(&t.leaf_bits(), d));
    }

    #[test]
    fn reconstruction_is_deterministic(seed in any::<u64>()) {
        let p = ModelParams::with_indel_rate(3, 2, 900, 0.05, 1e-3).unwrap();
        let cfg = ReconConfig::derive(&p, 8.0, Some(0.01)).unwrap().with_layout(150, 60).unwrap();
        let t = evolve_tree(&p, seed).unwrap();
        let a = reconstruct_root(&t.leaf_bits(), t.shape(), &cfg, &TieCoins::new(seed)).unwrap();
        let b = reconstruct_root(&t.leaf_bits(), t.shape(), &cfg, &TieCoins::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

//! Recursive majority against an adversary.
//!
//! A single site with root state `0` evolves by substitution alone down a
//! `(d-2)`-ary tree of height `H0`. Every internal node then receives two
//! extra children stuck at state `1`, and recursive majority is run on the
//! completed `d`-ary tree.

use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

fn check(d: usize) {
    assert!(d >= 3 && d % 2 == 1, "d must be odd and at least 3, got {d}");
}

fn majority_below(d: usize, depth: usize, state: u8, p_s: f64, rng: &mut impl Rng) -> u8 {
    if depth == 0 {
        return state;
    }
    let zeros = (0..d - 2)
        .filter(|_| {
            let child = state ^ rng.random_bool(p_s) as u8;
            majority_below(d, depth - 1, child, p_s, rng) == 0
        })
        .count();
    (2 * zeros <= d) as u8
}

/// One draw; `true` when recursive majority returns the root state `0`.
pub fn simulate_adversarial_majority(d: usize, h0: usize, p_s: f64, rng: &mut impl Rng) -> bool {
    check(d);
    majority_below(d, h0, 0, p_s, rng) == 0
}

/// Exact success probability of [`simulate_adversarial_majority`].
///
/// With `P_h(s)` the chance that a height-`h` subtree whose root holds `s`
/// votes `0`, each of the `d - 2` real children votes `0` independently with
/// probability `c = (1 - p_s) P_{h-1}(s) + p_s P_{h-1}(1 - s)`, and the node
/// votes `0` iff at least `(d + 1) / 2` of them do.
pub fn adversarial_majority_success(d: usize, h0: usize, p_s: f64) -> f64 {
    check(d);
    let need = (d as u64 + 1) / 2;
    let mut p = [1.0, 0.0];
    for _ in 0..h0 {
        let tail = |s: usize| {
            let c = ((1.0 - p_s) * p[s] + p_s * p[1 - s]).clamp(0.0, 1.0);
            Binomial::new(c, d as u64 - 2).expect("valid binomial").sf(need - 1)
        };
        p = [tail(0), tail(1)];
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    #[test]
    fn noiseless_always_succeeds() {
        let mut rng = substream(1, Domain::Fixture, 0);
        for h in 1..4 {
            assert!((0..200).all(|_| simulate_adversarial_majority(5, h, 0.0, &mut rng)));
            assert_eq!(adversarial_majority_success(5, h, 0.0), 1.0);
        }
    }

    #[test]
    fn d3_is_hopeless() {
        // one real leaf against two adversaries
        let mut rng = substream(2, Domain::Fixture, 0);
        assert!((0..500).all(|_| !simulate_adversarial_majority(3, 1, 0.5, &mut rng)));
        assert_eq!(adversarial_majority_success(3, 1, 0.5), 0.0);
        assert_eq!(adversarial_majority_success(3, 1, 0.0), 0.0);
    }

    #[test]
    fn height_one_is_a_binomial_tail() {
        // P[Bin(7, 0.9) >= 5] summed by hand
        let choose = |n: u64, k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        let expected: f64 = (5..=7).map(|z| choose(7, z) * 0.9f64.powi(z as i32) * 0.1f64.powi(7 - z as i32)).sum();
        assert!((adversarial_majority_success(9, 1, 0.1) - expected).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_agrees_with_recursion() {
        let mut rng = substream(3, Domain::Fixture, 1);
        let (d, h, p_s) = (7, 3, 0.08);
        let n = 20_000;
        let wins = (0..n).filter(|_| simulate_adversarial_majority(d, h, p_s, &mut rng)).count();
        let p = adversarial_majority_success(d, h, p_s);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((wins as f64 / n as f64 - p).abs() < 4.0 * sigma + 1e-9, "{wins} vs {p}");
    }

    #[test]
    #[should_panic]
    fn even_arity_rejected() {
        adversarial_majority_success(4, 1, 0.1);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::ModelParams;

/// Default anchor-length constant: `a = ceil(C ln n)`.
pub const DEFAULT_ANCHOR_CONSTANT: f64 = 8.0;

/// What a parent does with a misaligned child whose anchor matches neither
/// the one-site-left nor the one-site-right window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnresolvedChild {
    /// Abort the parent and declare it radioactive.
    Abort,
    /// Keep the child's shift, leave it out of this island's vote.
    #[default]
    Skip,
}

impl std::str::FromStr for UnresolvedChild {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abort" => Ok(UnresolvedChild::Abort),
            "skip" => Ok(UnresolvedChild::Skip),
            _ => Err(Error::InvalidConfig(format!("unresolved-child policy must be skip or abort, got {s:?}"))),
        }
    }
}

/// Island/anchor layout and alignment thresholds for the recursive step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub p_s: f64,
    /// Island length.
    pub ell: usize,
    /// Anchor length.
    pub a: usize,
    pub anchor_constant: f64,
    /// Whether `a` was cut down to `ell - 1`.
    pub anchor_clamped: bool,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub unresolved: UnresolvedChild,
}

/// Smallest `c` with `c^3 >= k`.
pub fn ceil_cbrt(k: usize) -> usize {
    let mut c = (k as f64).cbrt().round() as usize;
    while c.pow(3) < k {
        c += 1;
    }
    while c > 0 && (c - 1).pow(3) >= k {
        c -= 1;
    }
    c
}

/// Separation margin and alignment threshold for a given `theta_s^2` and `beta`.
///
/// `delta` is the midpoint of the interval of values satisfying
/// `(1 - delta) theta^2 - 8 beta > delta + 8 beta`, i.e. of
/// `(0, (theta^2 - 16 beta) / (1 + theta^2))`, and
/// `gamma = (1 - delta) theta^2 - 4 beta`.
pub fn thresholds(theta_sq: f64, beta: f64) -> Result<(f64, f64)> {
    let upper = (theta_sq - 16.0 * beta) / (1.0 + theta_sq);
    if !(upper > 0.0) {
        return Err(Error::InfeasibleParameters { theta_sq, beta });
    }
    let delta = upper / 2.0;
    let gamma = (1.0 - delta) * theta_sq - 4.0 * beta;
    Ok((delta, gamma))
}

impl ReconConfig {
    /// Island length `ceil(k^{1/3})`, anchor length `ceil(C ln n)` (clamped to
    /// `ell - 1`), `beta = 1/d` unless overridden.
    pub fn derive(params: &ModelParams, anchor_constant: f64, beta_override: Option<f64>) -> Result<Self> {
        params.validate()?;
        if !(anchor_constant > 0.0) {
            return Err(Error::InvalidConfig(format!("anchor constant must be positive, got {anchor_constant}")));
        }
        let beta = beta_override.unwrap_or(1.0 / params.d as f64);
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("beta must lie in [0, 1), got {beta}")));
        }
        let ell = ceil_cbrt(params.k);
        if ell <= 2 {
            return Err(Error::InvalidConfig(format!(
                "island length {ell} leaves no room for an anchor (k = {})",
                params.k
            )));
        }
        let n = params.leaf_count();
        let wanted = ((anchor_constant * (n as f64).ln()).ceil() as usize).max(1);
        let anchor_clamped = wanted >= ell;
        let a = if anchor_clamped { ell - 1 } else { wanted };
        let (delta, gamma) = thresholds(params.theta_s().powi(2), beta)?;
        Ok(Self {
            k: params.k,
            d: params.d,
            n,
            p_s: params.p_s,
            ell,
            a,
            anchor_constant,
            anchor_clamped,
            beta,
            delta,
            gamma,
            unresolved: UnresolvedChild::default(),
        })
    }

    /// Replaces the island/anchor layout, keeping the thresholds.
    pub fn with_layout(mut self, ell: usize, a: usize) -> Result<Self> {
        if a == 0 || a >= ell {
            return Err(Error::InvalidConfig(format!("need 1 <= a < ell, got a = {a}, ell = {ell}")));
        }
        self.ell = ell;
        self.a = a;
        self.anchor_clamped = false;
        Ok(self)
    }

    pub fn with_unresolved(mut self, policy: UnresolvedChild) -> Self {
        self.unresolved = policy;
        self
    }

    pub fn theta_sq(&self) -> f64 {
        (1.0 - 2.0 * self.p_s).powi(2)
    }

    /// Island index of a 0-based position.
    pub fn island_of(&self, pos: usize) -> usize {
        pos / self.ell
    }

    /// Whether a 0-based position lies in the anchor of its island.
    pub fn in_anchor(&self, pos: usize) -> bool {
        pos % self.ell < self.a
    }
}

/// Per-site indel rate at which each node is radioactive with probability at
/// most `alpha`: `alpha / (4 d k^{2/3} a)`.
pub fn indel_rate_bound(alpha: f64, d: usize, k: usize, a: usize) -> f64 {
    alpha / (4.0 * d as f64 * (k as f64).powf(2.0 / 3.0) * a as f64)
}

/// Anchor length `ceil(C ln n)` before any clamping.
pub fn unclamped_anchor_length(anchor_constant: f64, n: usize) -> usize {
    ((anchor_constant * (n as f64).ln()).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, h: usize, k: usize, p_s: f64) -> ModelParams {
        ModelParams::new(d, h, k, p_s, 0.0, 0.0).unwrap()
    }

    #[test]
    fn cube_root_ceiling() {
        assert_eq!(ceil_cbrt(1000), 10);
        assert_eq!(ceil_cbrt(1001), 11);
        assert_eq!(ceil_cbrt(3375), 15);
        assert_eq!(ceil_cbrt(2000), 13);
        assert_eq!(ceil_cbrt(1), 1);
        assert_eq!(ceil_cbrt(64), 4);
    }

    #[test]
    fn noiseless_zero_beta_thresholds() {
        // (1 - delta) - 0 > delta  =>  delta < 1/2, midpoint 1/4, gamma = 3/4
        let (delta, gamma) = thresholds(1.0, 0.0).unwrap();
        assert!((delta - 0.25).abs() < 1e-15);
        assert!((gamma - 0.75).abs() < 1e-15);
        let cfg = ReconConfig::derive(&params(3, 2, 1000, 0.0), 8.0, Some(0.0)).unwrap();
        assert_eq!(cfg.delta, 0.25);
        assert_eq!(cfg.gamma, 0.75);
    }

    #[test]
    fn half_substitution_is_infeasible() {
        assert!(matches!(thresholds(0.0, 0.0), Err(Error::InfeasibleParameters { .. })));
        // default beta = 1/d is far too large for d = 5 at p_s = 0.05
        assert!(matches!(
            ReconConfig::derive(&params(5, 2, 3375, 0.05), 8.0, None),
            Err(Error::InfeasibleParameters { .. })
        ));
    }

    #[test]
    fn threshold_inequality_holds_strictly() {
        for &(theta_sq, beta) in &[(0.81, 0.01), (0.5, 0.02), (0.9, 0.0), (0.3, 0.018)] {
            let (delta, _) = thresholds(theta_sq, beta).unwrap();
            assert!(delta > 0.0);
            assert!((1.0 - delta) * theta_sq - 8.0 * beta > delta + 8.0 * beta);
        }
    }

    #[test]
    fn layout() {
        let cfg = ReconConfig::derive(&params(3, 2, 1000, 0.0), 1.0, Some(0.0)).unwrap();
        assert_eq!(cfg.ell, 10);
        // ceil(ln 9) = 3
        assert_eq!(cfg.a, 3);
        assert!(!cfg.anchor_clamped);
        let cfg = ReconConfig::derive(&params(5, 2, 3375, 0.05), 8.0, Some(0.01)).unwrap();
        assert_eq!(cfg.ell, 15);
        assert_eq!(cfg.a, 14);
        assert!(cfg.anchor_clamped);
        assert_eq!(unclamped_anchor_length(8.0, 25), 26);
    }

    #[test]
    fn tiny_islands_rejected() {
        assert!(ReconConfig::derive(&params(3, 1, 8, 0.0), 8.0, Some(0.0)).is_err());
    }

    #[test]
    fn custom_layout_validation() {
        let cfg = ReconConfig::derive(&params(3, 1, 1000, 0.0), 1.0, Some(0.0)).unwrap();
        assert!(cfg.with_layout(500, 400).is_ok());
        assert!(cfg.with_layout(10, 10).is_err());
        assert!(cfg.with_layout(10, 0).is_err());
    }

    #[test]
    fn bound_value() {
        let p = indel_rate_bound(0.2, 5, 3375, 26);
        assert!((p - 0.2 / (4.0 * 5.0 * 225.0 * 26.0)).abs() < 1e-18);
    }
}

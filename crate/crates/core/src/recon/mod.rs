//! Recursive anchor/island reconstruction of the root sequence.

mod config;
mod root;
mod step;

pub use config::{
    ceil_cbrt, indel_rate_bound, thresholds, unclamped_anchor_length, ReconConfig, UnresolvedChild,
    DEFAULT_ANCHOR_CONSTANT,
};
pub use root::{reconstruct_root, Diagnostics, NodeDiagnostics, RootReconstruction};
pub use step::{recursive_step, Abort, NodeResult, RoundTrace};

use crate::error::{Error, Result};

/// `±1` spin of a bit.
#[inline]
pub fn spin(bit: u8) -> i32 {
    2 * bit as i32 - 1
}

/// Empirical spin correlation `(1/m) Σ σ(y_j) σ(z_j)`.
pub fn correlation(y: &[u8], z: &[u8]) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: z.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok(correlation_unchecked(y, z))
}

#[inline]
pub(crate) fn correlation_unchecked(y: &[u8], z: &[u8]) -> f64 {
    let matches = y.iter().zip(z).filter(|(a, b)| a == b).count() as i64;
    let m = y.len() as i64;
    (2 * matches - m) as f64 / m as f64
}

/// Majority over the non-`None` votes; `tie` decides ties, including the all-`None` case.
pub fn majority_vote(values: &[Option<u8>], tie: u8) -> u8 {
    let (ones, total) = values
        .iter()
        .flatten()
        .fold((0usize, 0usize), |(o, t), &b| (o + b as usize, t + 1));
    match (2 * ones).cmp(&total) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => tie,
    }
}

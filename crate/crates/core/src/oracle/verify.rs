//! Empirical checks on agreement vectors.
//!
//! An agreement vector holds `1` where a reconstruction matches the truth.
//! Its spin is `+1` on agreement and `-1` on disagreement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::{correlation, spin};

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasCheck {
    pub m: usize,
    /// `(1/m) Σ σ(λ_i) σ(θ_i)`.
    pub product_mean: f64,
    /// Fraction of `-1` spins in each vector.
    pub lambda_flips: f64,
    pub theta_flips: f64,
    pub product_ok: bool,
    pub lambda_ok: bool,
    pub theta_ok: bool,
}

impl BiasCheck {
    pub fn holds(&self) -> bool {
        self.product_ok && self.lambda_ok && self.theta_ok
    }
}

/// The three concentration inequalities around `beta_prime`, each within
/// `beta / 2`: the product mean near `(1 - 2 beta')^2` and either flip rate
/// near `beta'`.
pub fn verify_bias_concentration(lambda: &[u8], theta: &[u8], beta: f64, beta_prime: f64) -> Result<BiasCheck> {
    same_len(lambda.len(), theta.len())?;
    if lambda.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let m = lambda.len() as f64;
    let product_mean = lambda.iter().zip(theta).map(|(&l, &t)| spin(l) * spin(t)).sum::<i32>() as f64 / m;
    let flips = |v: &[u8]| v.iter().filter(|&&b| b == 0).count() as f64 / m;
    let (lambda_flips, theta_flips) = (flips(lambda), flips(theta));
    let tol = beta / 2.0;
    Ok(BiasCheck {
        m: lambda.len(),
        product_mean,
        lambda_flips,
        theta_flips,
        product_ok: (product_mean - (1.0 - 2.0 * beta_prime).powi(2)).abs() <= tol,
        lambda_ok: (lambda_flips - beta_prime).abs() <= tol,
        theta_ok: (theta_flips - beta_prime).abs() <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBound {
    /// `|cor(X, Y) - cor(X̂, Ŷ)|`.
    pub lhs: f64,
    /// `1 - (1/m) Σ (σ(λ_i) σ(θ_i) - [σ(λ_i) = -1] - [σ(θ_i) = -1])`.
    pub rhs: f64,
    /// The agreement vectors of `X̂, Ŷ` dominate `Λ, Θ` pointwise.
    pub dominated: bool,
    pub holds: bool,
}

/// Compares the correlation drift of `(X̂, Ŷ)` against the bound driven by
/// the adversarial agreement vectors `Λ, Θ`.
pub fn verify_correlation_bound(
    x: &[u8],
    y: &[u8],
    x_hat: &[u8],
    y_hat: &[u8],
    lambda: &[u8],
    theta: &[u8],
) -> Result<CorrelationBound> {
    let m = x.len();
    for len in [y.len(), x_hat.len(), y_hat.len(), lambda.len(), theta.len()] {
        same_len(m, len)?;
    }
    let lhs = (correlation(x, y)? - correlation(x_hat, y_hat)?).abs();
    let sum: i32 = lambda
        .iter()
        .zip(theta)
        .map(|(&l, &t)| spin(l) * spin(t) - (l == 0) as i32 - (t == 0) as i32)
        .sum();
    let rhs = 1.0 - sum as f64 / m as f64;
    let dominated = (0..m).all(|i| (x_hat[i] == x[i]) as u8 >= lambda[i] && (y_hat[i] == y[i]) as u8 >= theta[i]);
    Ok(CorrelationBound {
        lhs,
        rhs,
        dominated,
        holds: lhs <= rhs + 1e-12,
    })
}

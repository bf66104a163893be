//! Closed-form inversion at q = 0, where every α_k vanishes and the system
//! decouples: μ_0 = 2Δ̃(0)/Σ0 and μ_n = μ_0 − iκ_nΦ_n/Σ1.

use std::f64::consts::PI;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::geometry::StarGeometry;
use crate::stability::sigma_moments;

/// |Σ0| below this marks μ_0 as poorly conditioned.
pub const POOR_SIGMA0: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Q0Solution {
    /// μ_n(0), n = −n_max..=n_max.
    pub mu: Vec<C>,
    /// 2/(LΣ0), the gain from Σ_n Φ_n to μ_0; None when μ_0 was supplied.
    pub mu0_gain: Option<f64>,
    pub poorly_conditioned: bool,
}

/// `phi` holds Φ_n(0) for n = −n_max..=n_max and `delta0` the boundary
/// average Δ̃(0). A supplied `mu0` (from a ballistic measurement) replaces
/// the Σ0 step.
pub fn solve_q0(g: &StarGeometry, phi: &[C], delta0: C, mu0: Option<C>) -> Result<Q0Solution> {
    if phi.len() % 2 == 0 {
        return Err(Error::Dimension { expected: phi.len() + 1, got: phi.len() });
    }
    let sig = sigma_moments(g);
    let scale: f64 = g.rays().iter().map(|r| r.weight().abs() / r.uz().abs()).sum();
    let tol = 1e-9 * scale;
    if sig.sigma1.abs() <= tol {
        return Err(Error::Solver("Sigma1 = 0: the q = 0 slice cannot be inverted".into()));
    }
    let l = g.strip_width();
    let (m0, gain, poor) = match mu0 {
        Some(m) => (m, None, false),
        None => {
            if sig.sigma0.abs() <= tol {
                return Err(Error::Solver("Sigma0 = 0 and no ballistic mu_0 supplied".into()));
            }
            (2.0 * delta0 / sig.sigma0, Some(2.0 / (l * sig.sigma0)), sig.sigma0.abs() < POOR_SIGMA0)
        }
    };
    let nm = (phi.len() / 2) as i64;
    let mu = (-nm..=nm)
        .zip(phi)
        .map(|(n, p)| {
            if n == 0 {
                m0
            } else {
                let kappa = 2.0 * PI * n as f64 / l;
                m0 - C::new(0.0, kappa) * p / sig.sigma1
            }
        })
        .collect();
    Ok(Q0Solution { mu, mu0_gain: gain, poorly_conditioned: poor })
}

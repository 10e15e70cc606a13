//! Parameter schedule, recovery of `a₀` and `σ`, and the Hölder fit.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::OrthonormalBasis;
use crate::forward::solve_dirichlet;
use crate::grid::GridSpec;
use crate::math::{exp, ln, sqrt};
use crate::stats::log_log_slope;
use crate::system::{gradients, laplacian, VectorField};
use crate::{Error, Result};

/// Range of `λ` used when clamping the schedule.
pub const LAMBDA_CLAMP: (f64, f64) = (1.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub lam: f64,
    pub gamma: f64,
    pub theta: f64,
    pub clamped: bool,
}

/// `θ = c/(8m)`, `λ = (2θ/c) ln(1/σ)`, `γ = σ^{2θ}`; with `clamp`, `λ` is
/// confined to [1, 3] and `γ = e^{−λc}`.
pub fn schedule_params(noise_level: f64, m: f64, c: f64, clamp: bool) -> Result<Schedule> {
    if !(noise_level > 0.0 && noise_level < 1.0) {
        return Err(Error::invalid("noise level", "must lie in (0, 1)"));
    }
    if !(m > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("m, c", "must be positive"));
    }
    let theta = c / (8.0 * m);
    let lam = (2.0 * theta / c) * ln(1.0 / noise_level);
    // e^{−λc} rather than σ^{2θ}, so the identity holds bit for bit
    let gamma = exp(-lam * c);
    if clamp {
        let l = lam.clamp(LAMBDA_CLAMP.0, LAMBDA_CLAMP.1);
        if l != lam {
            return Ok(Schedule {
                lam: l,
                gamma: exp(-l * c),
                theta,
                clamped: true,
            });
        }
    }
    Ok(Schedule {
        lam,
        gamma,
        theta,
        clamped: false,
    })
}

/// `ρ = c/(m + c)`.
pub fn theoretical_rho(c: f64, m: f64) -> f64 {
    c / (m + c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct A0Reconstruction {
    /// `a₀` on the Ω grid; the boundary ring is left at zero.
    pub a0: Vec<f64>,
    /// Largest standard deviation over samples of the per-sample estimate.
    pub spread: f64,
}

/// `a₀ = −mean_{x₀}(Δv + |∇v|²)` with `v = Σ_k V_k ψ_k(x₀)`.
pub fn reconstruct_a0(
    v: &VectorField,
    basis: &OrthonormalBasis,
    x0_samples: &[f64],
    h: f64,
) -> Result<A0Reconstruction> {
    if v.n != basis.len() {
        return Err(Error::ShapeMismatch {
            what: "V against basis",
        });
    }
    if x0_samples.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let lap = laplacian(v, h);
    let (gx, gy) = gradients(v, h);
    let nodes = v.nodes();
    let psi: Vec<Vec<f64>> = x0_samples.iter().map(|&x| basis.values_at(x)).collect();
    let mut a0 = vec![0.0; nodes];
    let mut spread = 0.0f64;
    let ks = x0_samples.len() as f64;
    for j in 1..v.n2 - 1 {
        for i in 1..v.n1 - 1 {
            let q = j * v.n1 + i;
            let (mut s, mut s2) = (0.0, 0.0);
            for row in &psi {
                let (mut l, mut x, mut y) = (0.0, 0.0, 0.0);
                for (k, p) in row.iter().enumerate() {
                    l += p * lap.data[k * nodes + q];
                    x += p * gx.data[k * nodes + q];
                    y += p * gy.data[k * nodes + q];
                }
                let est = -(l + x * x + y * y);
                s += est;
                s2 += est * est;
            }
            let mean = s / ks;
            a0[q] = mean;
            spread = spread.max(sqrt((s2 / ks - mean * mean).max(0.0)));
        }
    }
    Ok(A0Reconstruction { a0, spread })
}

/// Solves `Δw − a₀w = 0` in Ω with `w = 1` on ∂Ω and returns `σ = w²`.
pub fn recover_sigma(a0: &[f64], g: &GridSpec) -> Result<Vec<f64>> {
    if a0.len() != g.omega_len() {
        return Err(Error::ShapeMismatch { what: "a₀ on Ω" });
    }
    let ones = vec![1.0; a0.len()];
    let w = solve_dirichlet(g.n1, g.n2, g.h, a0, &vec![0.0; a0.len()], &ones)?;
    if let Some(&bad) = w.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Positivity {
            what: "w = √σ",
            value: bad,
        });
    }
    Ok(w.iter().map(|x| x * x).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
    pub rho_theory: f64,
}

/// Least-squares slope of `ln error` against `ln level`.
pub fn holder_fit(levels: &[f64], errors: &[f64], c: f64, m: f64) -> Result<HolderFit> {
    if levels.len() < 3 {
        return Err(Error::TooFewSamples {
            got: levels.len(),
            need: 3,
        });
    }
    let (slope, intercept) = log_log_slope(levels, errors)?;
    Ok(HolderFit {
        slope,
        intercept,
        rho_theory: theoretical_rho(c, m),
    })
}

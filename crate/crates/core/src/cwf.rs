//! Level-set geometry and Carleman weight functions `φ_λ = exp(λξ)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::GridSpec;
use crate::math::{exp, powf, sqrt};
use crate::stats::median;
use crate::{Error, Result};

/// Largest exponent accepted by the weight evaluation.
pub const MAX_EXPONENT: f64 = 700.0;

/// `[x₂ + (x₁ − 1/2)²/ω² + 1/4]^{−ν}`.
pub fn xi_elliptic(x1: f64, x2: f64, omega_param: f64, nu: f64) -> f64 {
    let base = x2 + (x1 - 0.5) * (x1 - 0.5) / (omega_param * omega_param) + 0.25;
    powf(base, -nu)
}

/// `[x₂ + (x₁ − 1/2)²/ω² + (t − T/2)² + 1/4]^{−ν}`.
pub fn xi_parabolic(x1: f64, x2: f64, t: f64, omega_param: f64, nu: f64, period: f64) -> f64 {
    let dt = t - 0.5 * period;
    let base = x2 + (x1 - 0.5) * (x1 - 0.5) / (omega_param * omega_param) + dt * dt + 0.25;
    powf(base, -nu)
}

/// `|x|² − ϱ²(t − T/2)²`.
pub fn xi_hyperbolic(x: &[f64], t: f64, rho_param: f64, period: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let dt = t - 0.5 * period;
    r2 - rho_param * rho_param * dt * dt
}

/// Exponents of the simplified weights: `(x₂ − B − b₁)²`, `−x₂` and `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimpleKind {
    PlanarSq,
    PlanarExp,
    Radial,
}

/// `coords` is `(x₁, x₂)`; `top` is `B`.
pub fn xi_simple(kind: SimpleKind, coords: (f64, f64), top: f64, b1: f64) -> f64 {
    let (x1, x2) = coords;
    match kind {
        SimpleKind::PlanarSq => {
            let s = x2 - top - b1;
            s * s
        }
        SimpleKind::PlanarExp => -x2,
        SimpleKind::Radial => sqrt(x1 * x1 + x2 * x2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CwfKind {
    Elliptic64,
    Parabolic76,
    Hyperbolic810,
    PlanarSq,
    PlanarExp,
    Radial,
}

impl CwfKind {
    pub fn name(self) -> &'static str {
        match self {
            CwfKind::Elliptic64 => "elliptic_64",
            CwfKind::Parabolic76 => "parabolic_76",
            CwfKind::Hyperbolic810 => "hyperbolic_810",
            CwfKind::PlanarSq => "planar_sq",
            CwfKind::PlanarExp => "planar_exp",
            CwfKind::Radial => "radial",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "elliptic_64" => CwfKind::Elliptic64,
            "parabolic_76" => CwfKind::Parabolic76,
            "hyperbolic_810" => CwfKind::Hyperbolic810,
            "planar_sq" => CwfKind::PlanarSq,
            "planar_exp" => CwfKind::PlanarExp,
            "radial" => CwfKind::Radial,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwfSpec {
    pub kind: CwfKind,
    /// ω
    pub omega_param: f64,
    /// ν
    pub nu: f64,
    /// λ
    pub lam: f64,
    pub d: f64,
    pub c: f64,
    pub b1: f64,
    /// ϱ
    pub rho_param: f64,
    /// T
    pub period: f64,
}

impl Default for CwfSpec {
    fn default() -> Self {
        CwfSpec {
            kind: CwfKind::Elliptic64,
            omega_param: 2.0,
            nu: 2.0,
            lam: 2.0,
            d: 2.0,
            c: 1.0,
            b1: 0.5,
            rho_param: 0.5,
            period: 2.0,
        }
    }
}

impl CwfSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lam >= 0.0) || !self.lam.is_finite() {
            return Err(Error::invalid("λ", "must be finite and ≥ 0"));
        }
        if !(self.nu > 1.0) {
            return Err(Error::invalid("ν", "must exceed 1"));
        }
        if !(self.omega_param > 1.0) {
            return Err(Error::invalid("ω", "must exceed 1"));
        }
        if !(self.d > 0.0) || !(self.c > 0.0) {
            return Err(Error::invalid("d, c", "must be positive"));
        }
        Ok(())
    }

    /// Spatial `ξ` at `(x₁, x₂)` for a domain of height `top`. Time-dependent
    /// kinds have no spatial restriction and return `None`.
    pub fn xi(&self, x1: f64, x2: f64, top: f64) -> Option<f64> {
        match self.kind {
            CwfKind::Elliptic64 => Some(xi_elliptic(x1, x2, self.omega_param, self.nu)),
            CwfKind::PlanarSq => Some(xi_simple(SimpleKind::PlanarSq, (x1, x2), top, self.b1)),
            CwfKind::PlanarExp => Some(xi_simple(SimpleKind::PlanarExp, (x1, x2), top, self.b1)),
            CwfKind::Radial => Some(xi_simple(SimpleKind::Radial, (x1, x2), top, self.b1)),
            CwfKind::Parabolic76 | CwfKind::Hyperbolic810 => None,
        }
    }
}

/// Membership masks on the Ω grid together with `ξ` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub n1: usize,
    pub n2: usize,
    pub xi: Vec<f64>,
    pub omega: Vec<bool>,
    pub gamma: Vec<bool>,
    pub omega_d: Vec<bool>,
    pub omega_dc: Vec<bool>,
    pub gamma_d: Vec<bool>,
    /// Nodes of Ω_d with a grid neighbour outside Ω_d (discrete `ξ = d`).
    pub levelset_d: Vec<bool>,
    /// `max ξ` over Ω̄_d.
    pub m_value: f64,
    pub d: f64,
    pub c: f64,
}

pub fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

impl RegionMasks {
    /// Columns `i` of the Γ nodes, left to right.
    pub fn gamma_columns(&self) -> Vec<usize> {
        (0..self.n1).filter(|&i| self.gamma[i]).collect()
    }

    /// Nodes pinned by zero Cauchy data: Γ and the row above it.
    pub fn cauchy_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for i in self.gamma_columns() {
            out.push(i);
            out.push(self.n1 + i);
        }
        out
    }

    /// `true` at nodes that are not pinned by zero Cauchy data.
    pub fn free_nodes(&self) -> Vec<bool> {
        let mut free = vec![true; self.n1 * self.n2];
        for k in self.cauchy_nodes() {
            free[k] = false;
        }
        free
    }
}

/// Level sets `Ω_d = {ξ > d}`, `Ω_{d+c}`, `Γ_d` and the band at `ξ = d`.
///
/// Γ is the open bottom segment `{x₂ = 0, (x₁ − 1/2)²/ω² < 1/4}` of ∂Ω.
pub fn build_masks(g: &GridSpec, spec: &CwfSpec) -> Result<RegionMasks> {
    spec.validate()?;
    let (n1, n2) = (g.n1, g.n2);
    let top = g.omega_height();
    let mut xi = vec![0.0; n1 * n2];
    for j in 0..n2 {
        for i in 0..n1 {
            let (x1, x2) = g.omega_point(i, j);
            xi[g.idx(i, j)] = spec.xi(x1, x2, top).ok_or_else(|| {
                Error::invalid("cwf kind", "time-dependent weights have no spatial masks")
            })?;
        }
    }
    let omega = vec![true; n1 * n2];
    let mut gamma = vec![false; n1 * n2];
    for i in 0..n1 {
        let (x1, _) = g.omega_point(i, 0);
        let w = (x1 - 0.5) / spec.omega_param;
        gamma[i] = w * w < 0.25;
    }
    let omega_d: Vec<bool> = xi.iter().map(|&v| v > spec.d).collect();
    if count(&omega_d) == 0 {
        return Err(Error::EmptyRegion { region: "Ω_d" });
    }
    let omega_dc: Vec<bool> = xi.iter().map(|&v| v > spec.d + spec.c).collect();
    if count(&omega_dc) == 0 {
        return Err(Error::EmptyRegion { region: "Ω_{d+c}" });
    }
    let gamma_d: Vec<bool> = gamma.iter().zip(&omega_d).map(|(&a, &b)| a && b).collect();
    let mut levelset_d = vec![false; n1 * n2];
    for j in 0..n2 {
        for i in 0..n1 {
            let k = g.idx(i, j);
            if !omega_d[k] {
                continue;
            }
            let outside = |ii: usize, jj: usize| !omega_d[g.idx(ii, jj)];
            levelset_d[k] = (i > 0 && outside(i - 1, j))
                || (i + 1 < n1 && outside(i + 1, j))
                || (j > 0 && outside(i, j - 1))
                || (j + 1 < n2 && outside(i, j + 1));
        }
    }
    let m_value = xi
        .iter()
        .zip(&omega_d)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RegionMasks {
        n1,
        n2,
        xi,
        omega,
        gamma,
        omega_d,
        omega_dc,
        gamma_d,
        levelset_d,
        m_value,
        d: spec.d,
        c: spec.c,
    })
}

/// `φ_λ² = exp(2λξ)` at every Ω node.
pub fn cwf_field(masks: &RegionMasks, spec: &CwfSpec) -> Result<Vec<f64>> {
    let top = 2.0 * spec.lam * masks.m_value;
    if top > MAX_EXPONENT {
        return Err(Error::WeightOverflow { exponent: top });
    }
    Ok(masks.xi.iter().map(|&x| exp(2.0 * spec.lam * x)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanReport {
    pub lambda: f64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Empirical check of the integrated Carleman estimate on Ω_d.
///
/// Each trial draws a random combination of `(1 − r²)⁴` bumps of radius `H/8`
/// (at least 3 cells) centred on a coarse lattice, all supported at least two cells inside Ω_d, and evaluates
/// `∫(Δh)²φ² / (λ∫|∇h|²φ² + λ³∫h²φ²)`. The same test functions are reused for
/// every λ, so trends in λ are not Monte-Carlo noise.
pub fn carleman_probe(
    g: &GridSpec,
    masks: &RegionMasks,
    trials: usize,
    lambdas: &[f64],
    seed: u64,
) -> Result<Vec<CarlemanReport>> {
    if trials < 50 {
        return Err(Error::invalid("trials", "need at least 50"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("λ", "probe values must be positive"));
    }
    let (n1, n2, h) = (g.n1, g.n2, g.h);
    // Bumps much narrower than 1/(λ|∇ξ|) only see the weight at one cell and
    // lose the λ-growth of the estimate, so their size is fixed in physical units.
    let radius_cells = ((n2 - 1) / 8).max(3);
    let spacing = (radius_cells / 2).max(1);
    let radius = radius_cells as f64 * h;
    let reach = radius_cells + 2;
    let mut centers = Vec::new();
    for j in (reach..n2.saturating_sub(reach)).step_by(spacing) {
        for i in (reach..n1.saturating_sub(reach)).step_by(spacing) {
            let mut ok = true;
            'scan: for jj in j - reach..=j + reach {
                for ii in i - reach..=i + reach {
                    let di = ii as f64 - i as f64;
                    let dj = jj as f64 - j as f64;
                    if di * di + dj * dj <= (reach * reach) as f64 && !masks.omega_d[g.idx(ii, jj)]
                    {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            if ok {
                centers.push((i, j));
            }
        }
    }
    if centers.is_empty() {
        return Err(Error::EmptyRegion {
            region: "Ω_d shrunk by the probe support",
        });
    }

    let bump = |r2: f64| {
        if r2 >= 1.0 {
            0.0
        } else {
            let t = 1.0 - r2;
            t * t * t * t
        }
    };
    let mut samples = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(t as u64),
        );
        let field = loop {
            let mut field = vec![0.0; n1 * n2];
            let mut any = false;
            for &(ci, cj) in &centers {
                if rng.gen::<f64>() > 0.3 {
                    continue;
                }
                let a: f64 = rng.gen_range(-1.0..1.0);
                any |= a != 0.0;
                for jj in cj - radius_cells..=cj + radius_cells {
                    for ii in ci - radius_cells..=ci + radius_cells {
                        let dx = (ii as f64 - ci as f64) * h / radius;
                        let dy = (jj as f64 - cj as f64) * h / radius;
                        field[g.idx(ii, jj)] += a * bump(dx * dx + dy * dy);
                    }
                }
            }
            if any && field.iter().any(|v| v.abs() > 0.0) {
                break field;
            }
        };
        samples.push(field);
    }

    let mut out = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let weight: Vec<f64> = masks
            .xi
            .iter()
            .map(|&x| exp(2.0 * lam * (x - masks.m_value)))
            .collect();
        let mut ratios: Vec<f64> = samples
            .iter()
            .map(|f| {
                let (mut lap2, mut grad2, mut val2) = (0.0, 0.0, 0.0);
                for j in 1..n2 - 1 {
                    for i in 1..n1 - 1 {
                        let k = g.idx(i, j);
                        if !masks.omega_d[k] {
                            continue;
                        }
                        let c = f[k];
                        let (l, r, d, u) = (f[k - 1], f[k + 1], f[k - n1], f[k + n1]);
                        let lap = (l + r + d + u - 4.0 * c) / (h * h);
                        let gx = (r - l) / (2.0 * h);
                        let gy = (u - d) / (2.0 * h);
                        lap2 += lap * lap * weight[k];
                        grad2 += (gx * gx + gy * gy) * weight[k];
                        val2 += c * c * weight[k];
                    }
                }
                lap2 / (lam * grad2 + lam * lam * lam * val2)
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        out.push(CarlemanReport {
            lambda: lam,
            min_ratio: ratios[0],
            median_ratio: median(&ratios),
            trials,
            seed,
        });
    }
    Ok(out)
}

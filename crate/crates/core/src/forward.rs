//! Forward elliptic solves `Δu + a₀u = −f(x₁ − x₀)χ(x₂ − x̄⁰)` on the padded
//! grid G with `u = 0` on ∂G, and extraction of restricted Dirichlet and
//! Neumann data on Γ.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{evaluate_expansion, OrthonormalBasis};
use crate::cwf::RegionMasks;
use crate::grid::{GridSpec, SOURCE_LINE};
use crate::linalg::{conjugate_gradient, LinearOperator};
use crate::math::{exp, ln};
use crate::system::{BcClass, VectorField};
use crate::{Error, Result};

/// Relative residual at which the forward CG stops.
pub const SOLVER_TOLERANCE: f64 = 1e-10;
/// Default number of source positions.
pub const DEFAULT_SAMPLES: usize = 64;

/// Gaussian bump `amplitude · exp(−|x − center|² / radius²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: (f64, f64),
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub background: f64,
    pub inclusions: Vec<Inclusion>,
}

impl TruthSpec {
    /// Zero background with one absorbing inclusion of amplitude −0.5.
    pub fn default_truth() -> Self {
        TruthSpec {
            background: 0.0,
            inclusions: vec![Inclusion {
                center: (0.5, 0.25),
                radius: 0.1,
                amplitude: -0.5,
            }],
        }
    }

    pub fn homogeneous(background: f64) -> Self {
        TruthSpec {
            background,
            inclusions: Vec::new(),
        }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        let mut v = self.background;
        for inc in &self.inclusions {
            let dx = x1 - inc.center.0;
            let dy = x2 - inc.center.1;
            v += inc.amplitude * exp(-(dx * dx + dy * dy) / (inc.radius * inc.radius));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background <= 0.0) {
            return Err(Error::CoefficientSign {
                value: self.background,
            });
        }
        for inc in &self.inclusions {
            if !(inc.radius > 0.0) {
                return Err(Error::invalid("inclusion radius", "must be positive"));
            }
            if !(inc.amplitude <= 0.0) {
                return Err(Error::CoefficientSign {
                    value: inc.amplitude,
                });
            }
        }
        Ok(())
    }
}

/// `a₀` sampled on G: the truth inside Ω̄, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub values: Vec<f64>,
    pub truth: Option<TruthSpec>,
}

impl CoefficientField {
    pub fn from_truth(t: &TruthSpec, g: &GridSpec) -> Result<Self> {
        t.validate()?;
        let mut omega = vec![0.0; g.omega_len()];
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let (x1, x2) = g.omega_point(i, j);
                omega[g.idx(i, j)] = t.value(x1, x2);
            }
        }
        let mut f = Self::from_omega(&omega, g)?;
        f.truth = Some(t.clone());
        Ok(f)
    }

    /// Embeds values given on the Ω grid.
    pub fn from_omega(omega: &[f64], g: &GridSpec) -> Result<Self> {
        if omega.len() != g.omega_len() {
            return Err(Error::ShapeMismatch { what: "a₀ on Ω" });
        }
        let mut values = vec![0.0; g.g_len()];
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                values[g.g_idx_of_omega(i, j)] = omega[g.idx(i, j)];
            }
        }
        let f = CoefficientField {
            values,
            truth: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self.values.iter().copied().find(|v| !(*v <= 0.0)) {
            Some(value) => Err(Error::CoefficientSign { value }),
            None => Ok(()),
        }
    }
}

/// `C²` bump `(1 − (z/ε)²)³` on `|z| < ε`.
pub fn bump(z: f64, eps: f64) -> f64 {
    let t = z / eps;
    if t * t >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        s * s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub x0: f64,
    /// Second coordinate of the source line.
    pub xbar0: f64,
    pub eps_width: f64,
    pub amplitude: f64,
}

impl SourceSpec {
    pub fn new(x0: f64, eps_width: f64, amplitude: f64) -> Self {
        SourceSpec {
            x0,
            xbar0: SOURCE_LINE,
            eps_width,
            amplitude,
        }
    }

    pub fn at(&self, x0: f64) -> Self {
        SourceSpec { x0, ..*self }
    }

    pub fn value(&self, x1: f64, x2: f64) -> f64 {
        self.amplitude * bump(x1 - self.x0, self.eps_width) * bump(x2 - self.xbar0, self.eps_width)
    }

    pub fn validate(&self, g: &GridSpec) -> Result<()> {
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(Error::invalid("x₀", "must lie in [0, 1]"));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        if !g.admits_source(self.eps_width) {
            return Err(Error::invalid(
                "eps_width",
                "source support must be positive and fit strictly inside G below Ω",
            ));
        }
        Ok(())
    }
}

/// Dirichlet problem `(−Δ_h + c) u = f` on an `nx × ny` node grid with the
/// boundary ring of `u` fixed to `boundary`. Only interior nodes are unknown.
pub fn solve_dirichlet(
    nx: usize,
    ny: usize,
    h: f64,
    shift: &[f64],
    rhs: &[f64],
    boundary: &[f64],
) -> Result<Vec<f64>> {
    let len = nx * ny;
    if shift.len() != len || rhs.len() != len || boundary.len() != len || nx < 3 || ny < 3 {
        return Err(Error::ShapeMismatch {
            what: "dirichlet problem",
        });
    }
    let (mx, my) = (nx - 2, ny - 2);
    let inv_h2 = 1.0 / (h * h);
    let op = Interior {
        mx,
        my,
        nx,
        inv_h2,
        shift,
    };
    // move known boundary values to the right-hand side
    let mut b = vec![0.0; mx * my];
    for j in 0..my {
        for i in 0..mx {
            let (gi, gj) = (i + 1, j + 1);
            let k = gj * nx + gi;
            let mut v = rhs[k];
            if gi == 1 {
                v += boundary[k - 1] * inv_h2;
            }
            if gi == nx - 2 {
                v += boundary[k + 1] * inv_h2;
            }
            if gj == 1 {
                v += boundary[k - nx] * inv_h2;
            }
            if gj == ny - 2 {
                v += boundary[k + nx] * inv_h2;
            }
            b[j * mx + i] = v;
        }
    }
    let mut x = vec![0.0; mx * my];
    conjugate_gradient(&op, &b, &mut x, SOLVER_TOLERANCE, 20 * (mx + my) + 200)?;
    let mut u = boundary.to_vec();
    for j in 0..my {
        for i in 0..mx {
            u[(j + 1) * nx + i + 1] = x[j * mx + i];
        }
    }
    Ok(u)
}

struct Interior<'a> {
    mx: usize,
    my: usize,
    nx: usize,
    inv_h2: f64,
    shift: &'a [f64],
}

impl LinearOperator for Interior<'_> {
    fn dim(&self) -> usize {
        self.mx * self.my
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (mx, my) = (self.mx, self.my);
        for j in 0..my {
            for i in 0..mx {
                let k = j * mx + i;
                let c = x[k];
                let l = if i > 0 { x[k - 1] } else { 0.0 };
                let r = if i + 1 < mx { x[k + 1] } else { 0.0 };
                let d = if j > 0 { x[k - mx] } else { 0.0 };
                let u = if j + 1 < my { x[k + mx] } else { 0.0 };
                let s = self.shift[(j + 1) * self.nx + i + 1];
                y[k] = (4.0 * c - l - r - d - u) * self.inv_h2 + s * c;
            }
        }
    }
}

/// Solves `Δu + a₀u = −rhs` on G with `u = 0` on ∂G.
pub fn solve_field(a0: &CoefficientField, g: &GridSpec, rhs: &[f64]) -> Result<Vec<f64>> {
    a0.validate()?;
    let (gx, gy) = g.g_dims();
    if a0.values.len() != gx * gy || rhs.len() != gx * gy {
        return Err(Error::ShapeMismatch { what: "field on G" });
    }
    let shift: Vec<f64> = a0.values.iter().map(|v| -v).collect();
    solve_dirichlet(gx, gy, g.h, &shift, rhs, &vec![0.0; gx * gy])
}

/// The forward solution for one source position, as a field on G.
pub fn solve_source(a0: &CoefficientField, src: &SourceSpec, g: &GridSpec) -> Result<Vec<f64>> {
    src.validate(g)?;
    let (gx, gy) = g.g_dims();
    let mut rhs = vec![0.0; gx * gy];
    for gj in 0..gy {
        for gi in 0..gx {
            let (x1, x2) = g.g_point(gi, gj);
            rhs[gj * gx + gi] = src.value(x1, x2);
        }
    }
    solve_field(a0, g, &rhs)
}

/// Dirichlet trace and outward normal derivative of a G field on Γ.
pub fn extract_dn(u: &[f64], g: &GridSpec, masks: &RegionMasks) -> (Vec<f64>, Vec<f64>) {
    let cols = masks.gamma_columns();
    let mut g0 = Vec::with_capacity(cols.len());
    let mut g1 = Vec::with_capacity(cols.len());
    for i in cols {
        let u0 = u[g.g_idx_of_omega(i, 0)];
        let u1 = u[g.g_idx_of_omega(i, 1)];
        let u2 = u[g.g_idx_of_omega(i, 2)];
        g0.push(u0);
        g1.push(-(-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * g.h));
    }
    (g0, g1)
}

/// `K` equally spaced source positions covering [0, 1].
pub fn x0_samples(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

/// Restricted DN data: rows are source positions, columns are Γ nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DnData {
    pub x0_samples: Vec<f64>,
    /// `x₁` of the Γ nodes.
    pub gamma_x1: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

impl DnData {
    pub fn samples(&self) -> usize {
        self.x0_samples.len()
    }

    pub fn gamma_len(&self) -> usize {
        self.gamma_x1.len()
    }

    pub fn g0_row(&self, r: usize) -> &[f64] {
        let n = self.gamma_len();
        &self.g0[r * n..(r + 1) * n]
    }

    pub fn g1_row(&self, r: usize) -> &[f64] {
        let n = self.gamma_len();
        &self.g1[r * n..(r + 1) * n]
    }

    /// Stacks per-sample rows; checks shape and positivity of `g0`.
    pub fn from_rows(
        x0_samples: Vec<f64>,
        gamma_x1: Vec<f64>,
        rows: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        if rows.len() != x0_samples.len() {
            return Err(Error::ShapeMismatch { what: "DN rows" });
        }
        let n = gamma_x1.len();
        let mut g0 = Vec::with_capacity(rows.len() * n);
        let mut g1 = Vec::with_capacity(rows.len() * n);
        for (r0, r1) in rows {
            if r0.len() != n || r1.len() != n {
                return Err(Error::ShapeMismatch { what: "DN rows" });
            }
            g0.extend(r0);
            g1.extend(r1);
        }
        let d = DnData {
            x0_samples,
            gamma_x1,
            g0,
            g1,
            noise_level: 0.0,
            seed: 0,
        };
        d.check_positive()?;
        Ok(d)
    }

    pub fn check_positive(&self) -> Result<()> {
        if self.x0_samples.len() < crate::basis::MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: self.x0_samples.len(),
                need: crate::basis::MIN_SAMPLES,
            });
        }
        if self.g0.len() != self.samples() * self.gamma_len() || self.g1.len() != self.g0.len() {
            return Err(Error::ShapeMismatch { what: "DN data" });
        }
        match self.g0.iter().copied().find(|v| !(*v > 0.0)) {
            Some(value) => Err(Error::Positivity { what: "g0", value }),
            None => Ok(()),
        }
    }
}

/// Forward field and DN rows for one source position.
pub fn solve_sample(
    a0: &CoefficientField,
    src: &SourceSpec,
    g: &GridSpec,
    masks: &RegionMasks,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let u = solve_source(a0, src, g)?;
    let (g0, g1) = extract_dn(&u, g, masks);
    Ok((u, g0, g1))
}

pub fn gamma_x1(g: &GridSpec, masks: &RegionMasks) -> Vec<f64> {
    masks
        .gamma_columns()
        .into_iter()
        .map(|i| g.omega_point(i, 0).0)
        .collect()
}

/// Noiseless data for `k` source positions, solved one after another.
pub fn synthesize_dataset(
    a0: &CoefficientField,
    g: &GridSpec,
    masks: &RegionMasks,
    src: &SourceSpec,
    k: usize,
) -> Result<DnData> {
    if k < crate::basis::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: k,
            need: crate::basis::MIN_SAMPLES,
        });
    }
    let xs = x0_samples(k);
    let mut rows = Vec::with_capacity(k);
    for &x0 in &xs {
        let (_, g0, g1) = solve_sample(a0, &src.at(x0), g, masks)?;
        rows.push((g0, g1));
    }
    DnData::from_rows(xs, gamma_x1(g, masks), rows)
}

/// Multiplicative noise `g ← g·(1 + level·θ)` with `θ ~ U[−1, 1]`.
pub fn add_noise(d: &DnData, level: f64, seed: u64) -> Result<DnData> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid("noise level", "must lie in [0, 1)"));
    }
    let mut out = d.clone();
    out.noise_level = level;
    out.seed = seed;
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.g0.iter_mut().chain(out.g1.iter_mut()) {
        let theta: f64 = rng.gen_range(-1.0..=1.0);
        *v *= 1.0 + level * theta;
    }
    out.check_positive()?;
    Ok(out)
}

/// Interior quantities available only for synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorTruth {
    pub x0_samples: Vec<f64>,
    /// `v = ln u` on Ω, one row of `|Ω|` values per sample.
    pub v: Vec<f64>,
    pub v_star: VectorField,
    pub beta_min: f64,
    /// Largest `|Σ_k V*_k ψ_k(x₀ᵢ) − v(x, x₀ᵢ)|`.
    pub truncation_residual: f64,
}

impl InteriorTruth {
    pub fn v_row(&self, r: usize) -> &[f64] {
        let n = self.v.len() / self.x0_samples.len();
        &self.v[r * n..(r + 1) * n]
    }
}

/// Builds the interior truth from forward fields `u` on G, one per sample.
pub fn interior_truth_from_fields(
    fields: &[Vec<f64>],
    x0s: &[f64],
    g: &GridSpec,
    basis: &OrthonormalBasis,
) -> Result<InteriorTruth> {
    if fields.len() != x0s.len() {
        return Err(Error::ShapeMismatch {
            what: "forward fields",
        });
    }
    let k = x0s.len();
    let n_omega = g.omega_len();
    let mut beta_min = f64::INFINITY;
    let mut v = Vec::with_capacity(k * n_omega);
    for u in fields {
        let w = g.restrict(u);
        for &val in &w {
            if !(val > 0.0) {
                return Err(Error::Positivity {
                    what: "u on Ω̄",
                    value: val,
                });
            }
            beta_min = beta_min.min(val);
        }
        v.extend(w.iter().map(|&x| ln(x)));
    }
    let projector = basis.projector(k)?;
    let n = basis.len();
    let mut v_star = VectorField::zeros(n, g.n1, g.n2, BcClass::Free);
    let mut column = vec![0.0; k];
    let mut residual = 0.0f64;
    for node in 0..n_omega {
        for r in 0..k {
            column[r] = v[r * n_omega + node];
        }
        let coeffs = projector.project(&column)?;
        for (m, c) in coeffs.iter().enumerate() {
            v_star.component_mut(m)[node] = *c;
        }
        for (r, &x0) in x0s.iter().enumerate() {
            residual = residual.max((evaluate_expansion(&coeffs, basis, x0) - column[r]).abs());
        }
    }
    Ok(InteriorTruth {
        x0_samples: x0s.to_vec(),
        v,
        v_star,
        beta_min,
        truncation_residual: residual,
    })
}

pub fn interior_truth(
    a0: &CoefficientField,
    g: &GridSpec,
    src: &SourceSpec,
    k: usize,
    basis: &OrthonormalBasis,
) -> Result<InteriorTruth> {
    if k < crate::basis::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: k,
            need: crate::basis::MIN_SAMPLES,
        });
    }
    let xs = x0_samples(k);
    let mut fields = Vec::with_capacity(k);
    for &x0 in &xs {
        fields.push(solve_source(a0, &src.at(x0), g)?);
    }
    interior_truth_from_fields(&fields, &xs, g, basis)
}

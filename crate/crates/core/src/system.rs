//! Reduction of the inverse problem to a coupled quasilinear system for the
//! coefficient vector `V` of `ln u` in the basis `{ψ_k}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{
    derivative_matrix, triple_tensor, DerivativeMatrix, OrthonormalBasis, TripleTensor,
};
use crate::cwf::RegionMasks;
use crate::forward::DnData;
use crate::grid::GridSpec;
use crate::math::ln;
use crate::{Error, Result};

/// Tolerance of the zero Cauchy class check.
pub const CLASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LogDnData {
    pub x0_samples: Vec<f64>,
    pub gamma_x1: Vec<f64>,
    /// `ln g₀`
    pub gt0: Vec<f64>,
    /// `g₁ / g₀`
    pub gt1: Vec<f64>,
}

pub fn log_transform(d: &DnData) -> Result<LogDnData> {
    let mut gt0 = Vec::with_capacity(d.g0.len());
    let mut gt1 = Vec::with_capacity(d.g1.len());
    for (&a, &b) in d.g0.iter().zip(&d.g1) {
        if !(a > 0.0) {
            return Err(Error::Positivity {
                what: "g0",
                value: a,
            });
        }
        gt0.push(ln(a));
        gt1.push(b / a);
    }
    Ok(LogDnData {
        x0_samples: d.x0_samples.clone(),
        gamma_x1: d.gamma_x1.clone(),
        gt0,
        gt1,
    })
}

/// How traces are turned into basis coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Project `g̃` onto `ψ_k`.
    #[default]
    Direct,
    /// Project `∂_{x₀} g̃` onto `ψ_m` and solve with `M_N`.
    Derivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoefficients {
    pub n: usize,
    pub gamma_len: usize,
    /// `p0[k * gamma_len + t]`
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl BoundaryCoefficients {
    pub fn p0_row(&self, k: usize) -> &[f64] {
        &self.p0[k * self.gamma_len..(k + 1) * self.gamma_len]
    }

    pub fn p1_row(&self, k: usize) -> &[f64] {
        &self.p1[k * self.gamma_len..(k + 1) * self.gamma_len]
    }
}

/// Derivative in `x₀` of uniformly sampled data, fourth order everywhere.
fn sample_derivative(y: &[f64], dx: f64) -> Vec<f64> {
    let n = y.len();
    let c = 1.0 / (12.0 * dx);
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) * c;
    }
    let edge0 = |f: &dyn Fn(usize) -> f64| {
        (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * c
    };
    let edge1 = |f: &dyn Fn(usize) -> f64| {
        (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * c
    };
    d[0] = edge0(&|k| y[k]);
    d[1] = edge1(&|k| y[k]);
    d[n - 1] = -edge0(&|k| y[n - 1 - k]);
    d[n - 2] = -edge1(&|k| y[n - 1 - k]);
    d
}

pub fn boundary_coefficients(
    ld: &LogDnData,
    basis: &OrthonormalBasis,
    mode: BoundaryMode,
) -> Result<BoundaryCoefficients> {
    let k = ld.x0_samples.len();
    let gl = ld.gamma_x1.len();
    let n = basis.len();
    if ld.gt0.len() != k * gl || ld.gt1.len() != k * gl {
        return Err(Error::ShapeMismatch { what: "log data" });
    }
    let projector = basis.projector(k)?;
    let mat = match mode {
        BoundaryMode::Direct => None,
        BoundaryMode::Derivative => Some(derivative_matrix(basis)?),
    };
    let dx = if k > 1 {
        ld.x0_samples[1] - ld.x0_samples[0]
    } else {
        1.0
    };
    let mut p0 = vec![0.0; n * gl];
    let mut p1 = vec![0.0; n * gl];
    let mut col = vec![0.0; k];
    for (src, dst) in [(&ld.gt0, &mut p0), (&ld.gt1, &mut p1)] {
        for t in 0..gl {
            for r in 0..k {
                col[r] = src[r * gl + t];
            }
            let coeffs = match &mat {
                None => projector.project(&col)?,
                Some(m) => {
                    let q = projector.project(&sample_derivative(&col, dx))?;
                    (0..n)
                        .map(|a| (0..n).map(|b| m.inverse_entry(a, b) * q[b]).sum())
                        .collect()
                }
            };
            for (kk, c) in coeffs.into_iter().enumerate() {
                dst[kk * gl + t] = c;
            }
        }
    }
    Ok(BoundaryCoefficients {
        n,
        gamma_len: gl,
        p0,
        p1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcClass {
    Free,
    /// Zero trace and zero normal difference on Γ.
    ZeroCauchy,
}

/// `N` scalar fields on the Ω grid, stored component after component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<f64>,
    pub class: BcClass,
}

impl VectorField {
    pub fn zeros(n: usize, n1: usize, n2: usize, class: BcClass) -> Self {
        VectorField {
            n,
            n1,
            n2,
            data: vec![0.0; n * n1 * n2],
            class,
        }
    }

    pub fn from_data(
        n: usize,
        n1: usize,
        n2: usize,
        data: Vec<f64>,
        class: BcClass,
    ) -> Result<Self> {
        if data.len() != n * n1 * n2 {
            return Err(Error::ShapeMismatch {
                what: "vector field",
            });
        }
        Ok(VectorField {
            n,
            n1,
            n2,
            data,
            class,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let s = self.nodes();
        &self.data[k * s..(k + 1) * s]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.nodes();
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn same_shape(&self, o: &VectorField) -> bool {
        self.n == o.n && self.n1 == o.n1 && self.n2 == o.n2
    }

    /// `self + a·o`, keeping the class of `self` when both agree.
    pub fn axpy(&self, a: f64, o: &VectorField) -> VectorField {
        debug_assert!(self.same_shape(o));
        let class = if self.class == o.class {
            self.class
        } else {
            BcClass::Free
        };
        VectorField {
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(x, y)| x + a * y)
                .collect(),
            class,
            ..*self
        }
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        VectorField {
            data: self.data.iter().map(|x| a * x).collect(),
            class: self.class,
            ..*self
        }
    }

    pub fn dot(&self, o: &VectorField) -> f64 {
        self.data.iter().zip(&o.data).map(|(x, y)| x * y).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zeroes the nodes pinned by the Cauchy data and marks the class.
    pub fn constrain(&mut self, masks: &RegionMasks) {
        let pinned = masks.cauchy_nodes();
        for k in 0..self.n {
            let c = self.component_mut(k);
            for &i in &pinned {
                c[i] = 0.0;
            }
        }
        self.class = BcClass::ZeroCauchy;
    }

    pub fn constrained(mut self, masks: &RegionMasks) -> Self {
        self.constrain(masks);
        self
    }

    /// Largest trace or normal-difference value on Γ (scaled by `h`).
    pub fn class_violation(&self, masks: &RegionMasks) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.n {
            let c = self.component(k);
            for i in masks.gamma_columns() {
                worst = worst.max(c[i].abs()).max((c[self.n1 + i] - c[i]).abs());
            }
        }
        worst
    }

    pub fn check_class(&self, masks: &RegionMasks) -> Result<()> {
        let v = self.class_violation(masks);
        if v > CLASS_TOLERANCE {
            Err(Error::BoundaryClass { max_violation: v })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionField {
    pub p: VectorField,
    pub cutoff_depth: f64,
}

/// `C²` cutoff: 1 on `[0, δ/2]`, 0 from `δ` on.
pub fn cutoff(x2: f64, delta: f64) -> f64 {
    let half = 0.5 * delta;
    if x2 <= half {
        1.0
    } else if x2 >= delta {
        0.0
    } else {
        let t = (x2 - half) / half;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// Number of cells over which traces fade out at interior ends of Γ.
const TAPER_CELLS: usize = 3;

/// `p_k = [p0_k(x₁) − x₂·p1_k(x₁)]·η(x₂)`, so that `p = p0` and `∂_n p = p1` on Γ.
pub fn extend_boundary(
    bc: &BoundaryCoefficients,
    g: &GridSpec,
    masks: &RegionMasks,
    cutoff_depth: Option<f64>,
) -> Result<ExtensionField> {
    let cols = masks.gamma_columns();
    if cols.len() != bc.gamma_len {
        return Err(Error::ShapeMismatch {
            what: "boundary coefficients",
        });
    }
    let delta = cutoff_depth.unwrap_or(0.25 * g.omega_height());
    if !(delta > 0.0) {
        return Err(Error::invalid("cutoff_depth", "must be positive"));
    }
    // taper only where Γ ends strictly inside the bottom edge
    let mut taper = vec![1.0; cols.len()];
    if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
        for (t, &i) in cols.iter().enumerate() {
            let mut w = 1.0f64;
            if first > 0 {
                w = w.min(cutoff_ramp(i - first));
            }
            if last + 1 < g.n1 {
                w = w.min(cutoff_ramp(last - i));
            }
            taper[t] = w;
        }
    }
    let mut p = VectorField::zeros(bc.n, g.n1, g.n2, BcClass::Free);
    for k in 0..bc.n {
        let (r0, r1) = (bc.p0_row(k), bc.p1_row(k));
        let comp = p.component_mut(k);
        for j in 0..g.n2 {
            let x2 = j as f64 * g.h;
            let eta = cutoff(x2, delta);
            if eta == 0.0 {
                break;
            }
            for (t, &i) in cols.iter().enumerate() {
                comp[g.idx(i, j)] = taper[t] * (r0[t] - x2 * r1[t]) * eta;
            }
        }
    }
    Ok(ExtensionField {
        p,
        cutoff_depth: delta,
    })
}

fn cutoff_ramp(cells_from_end: usize) -> f64 {
    if cells_from_end >= TAPER_CELLS {
        return 1.0;
    }
    let t = cells_from_end as f64 / TAPER_CELLS as f64;
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// Extension matching a known field on the two bottom rows above Γ, so that
/// `V − p` lies in the zero Cauchy class.
pub fn extension_from_field(
    v: &VectorField,
    g: &GridSpec,
    masks: &RegionMasks,
    cutoff_depth: Option<f64>,
) -> Result<ExtensionField> {
    let cols = masks.gamma_columns();
    let gl = cols.len();
    let mut p0 = vec![0.0; v.n * gl];
    let mut p1 = vec![0.0; v.n * gl];
    for k in 0..v.n {
        let c = v.component(k);
        for (t, &i) in cols.iter().enumerate() {
            p0[k * gl + t] = c[i];
            p1[k * gl + t] = -(c[g.n1 + i] - c[i]) / g.h;
        }
    }
    let bc = BoundaryCoefficients {
        n: v.n,
        gamma_len: gl,
        p0,
        p1,
    };
    extend_boundary(&bc, g, masks, cutoff_depth)
}

/// `ΔV = P(x, ∇V)` with `P_m = Σ_{j,k} C[m][j][k] ∇V_j·∇V_k` and `C = −2 M⁻¹B`.
#[derive(Debug, Clone)]
pub struct QuasilinearSystem {
    pub n: usize,
    pub matrix: DerivativeMatrix,
    pub tensor: TripleTensor,
    /// `−2 M⁻¹(B + Bᵀ)` in `(j, k)`.
    coupling: Vec<f64>,
    pub grid: GridSpec,
    pub masks: RegionMasks,
}

impl QuasilinearSystem {
    pub fn new(basis: &OrthonormalBasis, grid: &GridSpec, masks: &RegionMasks) -> Result<Self> {
        let matrix = derivative_matrix(basis)?;
        let tensor = triple_tensor(basis);
        let n = basis.len();
        let mut coupling = vec![0.0; n * n * n];
        for m in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += matrix.inverse_entry(m, l)
                            * (tensor.get(l, j, k) + tensor.get(l, k, j));
                    }
                    coupling[(m * n + j) * n + k] = -2.0 * s;
                }
            }
        }
        Ok(QuasilinearSystem {
            n,
            matrix,
            tensor,
            coupling,
            grid: *grid,
            masks: masks.clone(),
        })
    }

    pub fn coupling(&self, m: usize, j: usize, k: usize) -> f64 {
        self.coupling[(m * self.n + j) * self.n + k]
    }
}

/// Centered gradients at interior nodes; zero on the boundary ring.
pub fn gradients(v: &VectorField, h: f64) -> (VectorField, VectorField) {
    let mut gx = VectorField::zeros(v.n, v.n1, v.n2, BcClass::Free);
    let mut gy = gx.clone();
    let n1 = v.n1;
    for k in 0..v.n {
        let c = v.component(k);
        let (ox, oy) = (k * v.nodes(), k * v.nodes());
        for j in 1..v.n2 - 1 {
            for i in 1..n1 - 1 {
                let q = j * n1 + i;
                gx.data[ox + q] = (c[q + 1] - c[q - 1]) / (2.0 * h);
                gy.data[oy + q] = (c[q + n1] - c[q - n1]) / (2.0 * h);
            }
        }
    }
    (gx, gy)
}

/// Five-point Laplacian at interior nodes; zero on the boundary ring.
pub fn laplacian(v: &VectorField, h: f64) -> VectorField {
    let mut out = VectorField::zeros(v.n, v.n1, v.n2, BcClass::Free);
    let n1 = v.n1;
    let ih2 = 1.0 / (h * h);
    for k in 0..v.n {
        let c = v.component(k);
        let o = out.component_mut(k);
        for j in 1..v.n2 - 1 {
            for i in 1..n1 - 1 {
                let q = j * n1 + i;
                o[q] = (c[q - 1] + c[q + 1] + c[q - n1] + c[q + n1] - 4.0 * c[q]) * ih2;
            }
        }
    }
    out
}

/// `P(x, ∇V)` from precomputed gradient components.
pub fn quadratic_rhs(q: &QuasilinearSystem, gx: &VectorField, gy: &VectorField) -> VectorField {
    let n = q.n;
    let nodes = gx.nodes();
    let mut out = VectorField::zeros(n, gx.n1, gx.n2, BcClass::Free);
    let mut dots = vec![0.0; n * n];
    for node in 0..nodes {
        for j in 0..n {
            for k in j..n {
                let d = gx.data[j * nodes + node] * gx.data[k * nodes + node]
                    + gy.data[j * nodes + node] * gy.data[k * nodes + node];
                dots[j * n + k] = d;
                dots[k * n + j] = d;
            }
        }
        for m in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += q.coupling(m, j, k) * dots[j * n + k];
                }
            }
            // the symmetrized coupling counts each pair twice
            out.data[m * nodes + node] = 0.5 * s;
        }
    }
    out
}

/// `L = Δ(W + p) − P(x, ∇(W + p))` at interior nodes of Ω.
pub fn residual_l(
    q: &QuasilinearSystem,
    p: &ExtensionField,
    w: &VectorField,
) -> Result<VectorField> {
    w.check_class(&q.masks)?;
    Ok(residual_of_sum(q, &p.p.axpy(1.0, w)))
}

/// `ΔU − P(x, ∇U)` without any class check.
pub fn residual_of_sum(q: &QuasilinearSystem, u: &VectorField) -> VectorField {
    let h = q.grid.h;
    let (gx, gy) = gradients(u, h);
    let pr = quadratic_rhs(q, &gx, &gy);
    laplacian(u, h).axpy(-1.0, &pr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::cwf::{build_masks, CwfSpec};
    use proptest::prelude::*;

    fn setup(n: usize, nb: usize) -> (GridSpec, RegionMasks, OrthonormalBasis, QuasilinearSystem) {
        let g = GridSpec::new(n, n).unwrap();
        let m = build_masks(&g, &CwfSpec::default()).unwrap();
        let b = build_basis(nb).unwrap();
        let q = QuasilinearSystem::new(&b, &g, &m).unwrap();
        (g, m, b, q)
    }

    fn smooth_field(n: usize, g: &GridSpec, seed: f64) -> VectorField {
        let mut v = VectorField::zeros(n, g.n1, g.n2, BcClass::Free);
        for k in 0..n {
            let c = v.component_mut(k);
            for j in 0..g.n2 {
                for i in 0..g.n1 {
                    let (x, y) = g.omega_point(i, j);
                    c[g.idx(i, j)] = ((k as f64 + 1.0) * x + seed).sin() * (y * (1.0 + seed)).cos()
                        + 0.3 * x * y;
                }
            }
        }
        v
    }

    #[test]
    fn log_examples() {
        let e = core::f64::consts::E;
        let d = DnData {
            x0_samples: (0..32).map(|i| i as f64 / 31.0).collect(),
            gamma_x1: vec![0.0, 1.0],
            g0: vec![e; 64],
            g1: vec![e; 64],
            noise_level: 0.0,
            seed: 0,
        };
        let l = log_transform(&d).unwrap();
        assert!(l.gt0.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(l.gt1.iter().all(|&v| v == 1.0));
        let mut bad = d.clone();
        bad.g0[3] = 0.0;
        assert!(matches!(log_transform(&bad), Err(Error::Positivity { .. })));
    }

    #[test]
    fn boundary_projection_of_basis_element() {
        let b = build_basis(4).unwrap();
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let gl = 3;
        let mut gt0 = vec![0.0; 64 * gl];
        for (r, &x) in xs.iter().enumerate() {
            for t in 0..gl {
                gt0[r * gl + t] = b.element(2).eval(x);
            }
        }
        let ld = LogDnData {
            x0_samples: xs.clone(),
            gamma_x1: vec![0.0, 0.5, 1.0],
            gt0: gt0.clone(),
            gt1: gt0.iter().map(|v| 2.0 * v).collect(),
        };
        let bc = boundary_coefficients(&ld, &b, BoundaryMode::Direct).unwrap();
        for k in 0..4 {
            for t in 0..gl {
                let want = if k == 2 { 1.0 } else { 0.0 };
                assert!((bc.p0_row(k)[t] - want).abs() < 1e-12);
                assert!((bc.p1_row(k)[t] - 2.0 * bc.p0_row(k)[t]).abs() < 1e-12);
            }
        }
        let dv = boundary_coefficients(&ld, &b, BoundaryMode::Derivative).unwrap();
        for k in 0..4 {
            assert!(
                (dv.p0_row(k)[1] - bc.p0_row(k)[1]).abs() < 1e-3,
                "{k} {}",
                dv.p0_row(k)[1]
            );
        }
    }

    #[test]
    fn extension_traces() {
        let (g, m, _, _) = setup(33, 3);
        let gl = m.gamma_columns().len();
        let zero = BoundaryCoefficients {
            n: 3,
            gamma_len: gl,
            p0: vec![0.0; 3 * gl],
            p1: vec![0.0; 3 * gl],
        };
        assert!(extend_boundary(&zero, &g, &m, None)
            .unwrap()
            .p
            .data
            .iter()
            .all(|&v| v == 0.0));
        let p0: Vec<f64> = (0..3 * gl).map(|i| (i as f64 * 0.1).sin()).collect();
        let p1: Vec<f64> = (0..3 * gl).map(|i| (i as f64 * 0.2).cos()).collect();
        let bc = BoundaryCoefficients {
            n: 3,
            gamma_len: gl,
            p0,
            p1,
        };
        let e = extend_boundary(&bc, &g, &m, None).unwrap();
        for k in 0..3 {
            let c = e.p.component(k);
            for (t, i) in m.gamma_columns().into_iter().enumerate() {
                assert_eq!(c[i], bc.p0_row(k)[t]);
                let dn = -(-3.0 * c[i] + 4.0 * c[g.n1 + i] - c[2 * g.n1 + i]) / (2.0 * g.h);
                assert!((dn - bc.p1_row(k)[t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cutoff_is_smooth() {
        let d = 0.25;
        assert_eq!(cutoff(0.1, d), 1.0);
        assert_eq!(cutoff(0.3, d), 0.0);
        assert!((cutoff(0.1875, d) - 0.5).abs() < 1e-15);
        let e = 1e-6;
        for x in [0.125, 0.25] {
            let s = (cutoff(x + e, d) - cutoff(x - e, d)) / (2.0 * e);
            assert!(s.abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_extension_gives_class_member() {
        let (g, m, _, _) = setup(17, 3);
        let v = smooth_field(3, &g, 0.4);
        let p = extension_from_field(&v, &g, &m, None).unwrap();
        let w = v.axpy(-1.0, &p.p);
        assert!(w.class_violation(&m) < 1e-13);
    }

    #[test]
    fn zero_inputs_give_zero_rhs() {
        let (g, m, _, q) = setup(17, 4);
        let z = VectorField::zeros(4, g.n1, g.n2, BcClass::ZeroCauchy);
        let (gx, gy) = gradients(&z, g.h);
        assert!(quadratic_rhs(&q, &gx, &gy).data.iter().all(|&v| v == 0.0));
        let p = ExtensionField {
            p: z.clone(),
            cutoff_depth: 0.25,
        };
        assert!(residual_l(&q, &p, &z.clone().constrained(&m))
            .unwrap()
            .data
            .iter()
            .all(|&v| v == 0.0));
        let mut bad = z;
        bad.data[3] = 1.0;
        assert!(matches!(
            residual_l(&q, &p, &bad),
            Err(Error::BoundaryClass { .. })
        ));
    }

    #[test]
    fn rhs_matches_direct_formula() {
        // against −2 M⁻¹ r with r_m = Σ B[m][j][k] ∇v_j·∇v_k written out directly
        let (g, _, _, q) = setup(9, 3);
        let v = smooth_field(3, &g, 0.2);
        let (gx, gy) = gradients(&v, g.h);
        let pr = quadratic_rhs(&q, &gx, &gy);
        let nodes = v.nodes();
        let node = g.idx(4, 3);
        let mut r = [0.0; 3];
        for (m, rm) in r.iter_mut().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    let d = gx.data[j * nodes + node] * gx.data[k * nodes + node]
                        + gy.data[j * nodes + node] * gy.data[k * nodes + node];
                    *rm += q.tensor.get(m, j, k) * d;
                }
            }
        }
        for m in 0..3 {
            let want: f64 = (0..3)
                .map(|l| -2.0 * q.matrix.inverse_entry(m, l) * r[l])
                .sum();
            assert!((pr.data[m * nodes + node] - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rhs_is_quadratic(t in -3.0f64..3.0, s1 in 0.0f64..2.0, s2 in 0.0f64..2.0) {
            let (g, _, _, q) = setup(9, 3);
            let a = smooth_field(3, &g, s1);
            let b = smooth_field(3, &g, s2);
            let (ax, ay) = gradients(&a, g.h);
            let (bx, by) = gradients(&b, g.h);
            let pa = quadratic_rhs(&q, &ax, &ay);
            let pt = quadratic_rhs(&q, &ax.scaled(t), &ay.scaled(t));
            for (x, y) in pt.data.iter().zip(&pa.data) {
                prop_assert!((x - t * t * y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
            // polarization B(a, b) = (P(a+b) − P(a) − P(b)) / 2 is additive in b
            let pb = quadratic_rhs(&q, &bx, &by);
            let pab = quadratic_rhs(&q, &ax.axpy(1.0, &bx), &ay.axpy(1.0, &by));
            let pa2b = quadratic_rhs(&q, &ax.axpy(2.0, &bx), &ay.axpy(2.0, &by));
            for i in 0..pa.data.len() {
                let b1 = pab.data[i] - pa.data[i] - pb.data[i];
                let b2 = pa2b.data[i] - pa.data[i] - 4.0 * pb.data[i];
                prop_assert!((b2 - 2.0 * b1).abs() <= 1e-10 * (1.0 + b1.abs()));
            }
        }

        #[test]
        fn residual_depends_on_sum_only(s in 0.0f64..2.0, shift in -1.0f64..1.0) {
            let (g, m, _, q) = setup(9, 3);
            let base = smooth_field(3, &g, s);
            let p = extension_from_field(&base, &g, &m, None).unwrap();
            let w = base.axpy(-1.0, &p.p).constrained(&m);
            let mut extra = smooth_field(3, &g, s + 0.5).scaled(shift);
            extra.constrain(&m);
            let p2 = ExtensionField { p: p.p.axpy(-1.0, &extra), cutoff_depth: p.cutoff_depth };
            let w2 = w.axpy(1.0, &extra);
            let l1 = residual_l(&q, &p, &w).unwrap();
            let l2 = residual_l(&q, &p2, &w2).unwrap();
            for (a, b) in l1.data.iter().zip(&l2.data) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}

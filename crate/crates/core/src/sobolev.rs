//! Discrete `H^s(Ω)` norm built from finite-difference derivatives of every
//! order up to `s`, its Gram operator and the associated Riesz map.

use alloc::vec;
use alloc::vec::Vec;

use crate::cwf::RegionMasks;
use crate::linalg::BandedCholesky;
use crate::system::{BcClass, VectorField};
use crate::{Error, Result};

pub const MAX_SOBOLEV_ORDER: usize = 3;

/// Sparse 1-D difference operator, row by row.
#[derive(Debug, Clone)]
struct Stencil {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Stencil {
    fn identity(n: usize) -> Self {
        Stencil {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    fn first(n: usize, h: f64) -> Self {
        let mut rows = Vec::with_capacity(n);
        rows.push(vec![(0, -1.0 / h), (1, 1.0 / h)]);
        for i in 1..n - 1 {
            rows.push(vec![(i - 1, -0.5 / h), (i + 1, 0.5 / h)]);
        }
        rows.push(vec![(n - 2, -1.0 / h), (n - 1, 1.0 / h)]);
        Stencil { rows }
    }

    fn second(n: usize, h: f64) -> Self {
        let ih2 = 1.0 / (h * h);
        let mut inner: Vec<Vec<(usize, f64)>> = (1..n - 1)
            .map(|i| vec![(i - 1, ih2), (i, -2.0 * ih2), (i + 1, ih2)])
            .collect();
        let mut rows = Vec::with_capacity(n);
        rows.push(inner[0].clone());
        let last = inner[inner.len() - 1].clone();
        rows.append(&mut inner);
        rows.push(last);
        Stencil { rows }
    }

    fn compose(&self, inner: &Stencil) -> Stencil {
        let n = self.rows.len();
        let mut rows = Vec::with_capacity(n);
        for r in &self.rows {
            let mut acc = vec![0.0; n];
            for &(k, a) in r {
                for &(l, b) in &inner.rows[k] {
                    acc[l] += a * b;
                }
            }
            rows.push(
                acc.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect(),
            );
        }
        Stencil { rows }
    }

    fn of_order(order: usize, n: usize, h: f64) -> Stencil {
        match order {
            0 => Self::identity(n),
            1 => Self::first(n, h),
            2 => Self::second(n, h),
            _ => Self::first(n, h).compose(&Self::of_order(order - 1, n, h)),
        }
    }

    /// Dense `DᵀD`.
    fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        let mut g = vec![vec![0.0; n]; n];
        for r in &self.rows {
            for &(a, x) in r {
                for &(b, y) in r {
                    g[a][b] += x * y;
                }
            }
        }
        g
    }
}

fn bandwidth(m: &[Vec<f64>]) -> usize {
    let mut bw = 0;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// Norm `‖W‖² = h² Σ_m Σ_{a+b≤s} ‖D_x^a D_y^b W_m‖²` over all Ω nodes.
#[derive(Debug, Clone)]
pub struct SobolevNorm {
    pub n1: usize,
    pub n2: usize,
    pub order: usize,
    pub h: f64,
    dx: Vec<Stencil>,
    dy: Vec<Stencil>,
    gx: Vec<Vec<Vec<f64>>>,
    gy: Vec<Vec<Vec<f64>>>,
}

impl SobolevNorm {
    pub fn new(n1: usize, n2: usize, h: f64, order: usize) -> Result<Self> {
        if !(1..=MAX_SOBOLEV_ORDER).contains(&order) {
            return Err(Error::invalid("s_order", "must be 1, 2 or 3"));
        }
        if n1 < 4 || n2 < 4 {
            return Err(Error::invalid(
                "grid",
                "needs at least 4 nodes per direction",
            ));
        }
        let dx: Vec<Stencil> = (0..=order).map(|a| Stencil::of_order(a, n1, h)).collect();
        let dy: Vec<Stencil> = (0..=order).map(|a| Stencil::of_order(a, n2, h)).collect();
        let gx = dx.iter().map(Stencil::gram).collect();
        let gy = dy.iter().map(Stencil::gram).collect();
        Ok(SobolevNorm {
            n1,
            n2,
            order,
            h,
            dx,
            dy,
            gx,
            gy,
        })
    }

    fn multi_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.order).flat_map(move |a| (0..=self.order - a).map(move |b| (a, b)))
    }

    /// `D_x^a D_y^b` applied to one scalar field.
    fn derivative(&self, f: &[f64], a: usize, b: usize) -> Vec<f64> {
        let (n1, n2) = (self.n1, self.n2);
        let mut tmp = vec![0.0; n1 * n2];
        for j in 0..n2 {
            for (i, row) in self.dx[a].rows.iter().enumerate() {
                tmp[j * n1 + i] = row.iter().map(|&(k, c)| c * f[j * n1 + k]).sum();
            }
        }
        let mut out = vec![0.0; n1 * n2];
        for (j, row) in self.dy[b].rows.iter().enumerate() {
            for &(k, c) in row {
                for i in 0..n1 {
                    out[j * n1 + i] += c * tmp[k * n1 + i];
                }
            }
        }
        out
    }

    pub fn norm_sq_scalar(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.multi_indices() {
            s += self.derivative(f, a, b).iter().map(|v| v * v).sum::<f64>();
        }
        self.h * self.h * s
    }

    pub fn norm_sq(&self, w: &VectorField) -> f64 {
        (0..w.n).map(|k| self.norm_sq_scalar(w.component(k))).sum()
    }

    pub fn norm(&self, w: &VectorField) -> f64 {
        crate::math::sqrt(self.norm_sq(w))
    }

    /// `h²⟨v, w⟩_{H^s}`-free inner product `⟨v, w⟩_{H^s}`.
    pub fn inner(&self, v: &VectorField, w: &VectorField) -> f64 {
        let sw = self.apply_gram(w);
        self.h * self.h * v.dot(&sw)
    }

    /// `Ŝ W = Σ_{a+b≤s} (DᵀD)_x ⊗ (DᵀD)_y W`, componentwise.
    pub fn apply_gram(&self, w: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(w.n, w.n1, w.n2, BcClass::Free);
        let (n1, n2) = (self.n1, self.n2);
        let mut tmp = vec![0.0; n1 * n2];
        for k in 0..w.n {
            let f = w.component(k);
            let o = out.component_mut(k);
            for (a, b) in self.multi_indices() {
                let (ax, ay) = (&self.gx[a], &self.gy[b]);
                let bx = bandwidth_hint(a);
                for j in 0..n2 {
                    for i in 0..n1 {
                        let lo = i.saturating_sub(bx);
                        let hi = (i + bx + 1).min(n1);
                        let mut s = 0.0;
                        for ii in lo..hi {
                            s += ax[i][ii] * f[j * n1 + ii];
                        }
                        tmp[j * n1 + i] = s;
                    }
                }
                let by = bandwidth_hint(b);
                for j in 0..n2 {
                    let lo = j.saturating_sub(by);
                    let hi = (j + by + 1).min(n2);
                    for jj in lo..hi {
                        let c = ay[j][jj];
                        if c != 0.0 {
                            for i in 0..n1 {
                                o[j * n1 + i] += c * tmp[jj * n1 + i];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Factorization of `Ŝ` restricted to the free nodes.
    pub fn riesz(&self, masks: &RegionMasks) -> Result<RieszMap> {
        let free = masks.free_nodes();
        let n1 = self.n1;
        let bx = self.gx.iter().map(|m| bandwidth(m)).max().unwrap_or(0);
        let by = self.gy.iter().map(|m| bandwidth(m)).max().unwrap_or(0);
        let bw = by * n1 + bx;
        let pairs: Vec<(usize, usize)> = self.multi_indices().collect();
        let chol = BandedCholesky::factor(self.n1 * self.n2, bw, |p, q| {
            if !free[p] || !free[q] {
                return if p == q { 1.0 } else { 0.0 };
            }
            let (i, j) = (p % n1, p / n1);
            let (ii, jj) = (q % n1, q / n1);
            pairs
                .iter()
                .map(|&(a, b)| self.gx[a][i][ii] * self.gy[b][j][jj])
                .sum()
        })?;
        Ok(RieszMap {
            chol,
            free,
            h2: self.h * self.h,
        })
    }
}

/// Widest stencil of `DᵀD` for derivative order `a`, end rows included.
fn bandwidth_hint(a: usize) -> usize {
    2 * a + 1
}

/// Solves `h² Ŝ x = g` on the free nodes, leaving pinned nodes at zero.
#[derive(Debug, Clone)]
pub struct RieszMap {
    chol: BandedCholesky,
    free: Vec<bool>,
    h2: f64,
}

impl RieszMap {
    pub fn apply(&self, g: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(g.n, g.n1, g.n2, BcClass::ZeroCauchy);
        for k in 0..g.n {
            let o = out.component_mut(k);
            for (q, (&v, &f)) in g.component(k).iter().zip(&self.free).enumerate() {
                o[q] = if f { v / self.h2 } else { 0.0 };
            }
            self.chol.solve_in_place(o);
        }
        out
    }
}

/// `(h² Σ_{x ∈ mask} Σ_m (w_m² + |∇w_m|²))^{1/2}` with the first-order
/// stencils of the norm (one-sided on ∂Ω).
pub fn h1_norm_masked(w: &VectorField, mask: &[bool], h: f64) -> f64 {
    let (n1, n2) = (w.n1, w.n2);
    let mut s = 0.0;
    for k in 0..w.n {
        let c = w.component(k);
        for j in 0..n2 {
            for i in 0..n1 {
                let q = j * n1 + i;
                if !mask[q] {
                    continue;
                }
                let dx = if i == 0 {
                    (c[q + 1] - c[q]) / h
                } else if i == n1 - 1 {
                    (c[q] - c[q - 1]) / h
                } else {
                    (c[q + 1] - c[q - 1]) / (2.0 * h)
                };
                let dy = if j == 0 {
                    (c[q + n1] - c[q]) / h
                } else if j == n2 - 1 {
                    (c[q] - c[q - n1]) / h
                } else {
                    (c[q + n1] - c[q - n1]) / (2.0 * h)
                };
                s += c[q] * c[q] + dx * dx + dy * dy;
            }
        }
    }
    crate::math::sqrt(h * h * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwf::{build_masks, CwfSpec};
    use crate::grid::GridSpec;

    fn bump_field(n1: usize, n2: usize, h: f64) -> VectorField {
        let mut w = VectorField::zeros(1, n1, n2, BcClass::Free);
        for j in 0..n2 {
            for i in 0..n1 {
                let (x, y) = (i as f64 * h, j as f64 * h);
                w.data[j * n1 + i] = (-((x - 0.5).powi(2) + (y - 0.4).powi(2)) / 0.02).exp();
            }
        }
        w
    }

    // independent summation with explicit stencils at every node
    fn direct(w: &[f64], n1: usize, n2: usize, h: f64, order: usize) -> f64 {
        let d1 = |f: &dyn Fn(usize) -> f64, i: usize, n: usize| -> f64 {
            if i == 0 {
                (f(1) - f(0)) / h
            } else if i == n - 1 {
                (f(n - 1) - f(n - 2)) / h
            } else {
                (f(i + 1) - f(i - 1)) / (2.0 * h)
            }
        };
        let d2 = |f: &dyn Fn(usize) -> f64, i: usize, n: usize| -> f64 {
            let c = i.clamp(1, n - 2);
            (f(c - 1) - 2.0 * f(c) + f(c + 1)) / (h * h)
        };
        let apply = |f: &dyn Fn(usize) -> f64, a: usize, i: usize, n: usize| -> f64 {
            match a {
                0 => f(i),
                1 => d1(f, i, n),
                2 => d2(f, i, n),
                _ => d1(&|t| d2(f, t, n), i, n),
            }
        };
        let mut s = 0.0;
        for a in 0..=order {
            for b in 0..=order - a {
                for j in 0..n2 {
                    for i in 0..n1 {
                        let col = |jj: usize| apply(&|ii| w[jj * n1 + ii], a, i, n1);
                        let v = apply(&col, b, j, n2);
                        s += v * v;
                    }
                }
            }
        }
        h * h * s
    }

    #[test]
    fn matches_direct_summation() {
        let (n1, n2, h) = (21, 17, 0.05);
        let w = bump_field(n1, n2, h);
        for order in 1..=3 {
            let s = SobolevNorm::new(n1, n2, h, order).unwrap();
            let want = direct(&w.data, n1, n2, h, order);
            assert!(
                (s.norm_sq(&w) - want).abs() <= 1e-10 * want,
                "order {order}"
            );
        }
    }

    #[test]
    fn masked_h1_on_full_mask_is_order_one_norm() {
        let (n1, n2, h) = (13, 11, 0.08);
        let w = bump_field(n1, n2, h);
        let s = SobolevNorm::new(n1, n2, h, 1).unwrap();
        let full = vec![true; n1 * n2];
        assert!((h1_norm_masked(&w, &full, h) - s.norm(&w)).abs() < 1e-12);
        assert_eq!(h1_norm_masked(&w, &vec![false; n1 * n2], h), 0.0);
    }

    #[test]
    fn zero_and_monotone() {
        let (n1, n2, h) = (13, 13, 1.0 / 12.0);
        let w = bump_field(n1, n2, h);
        let norms: Vec<f64> = (1..=3)
            .map(|o| SobolevNorm::new(n1, n2, h, o).unwrap().norm(&w))
            .collect();
        assert!(norms[0] <= norms[1] && norms[1] <= norms[2]);
        let z = VectorField::zeros(2, n1, n2, BcClass::Free);
        assert_eq!(SobolevNorm::new(n1, n2, h, 2).unwrap().norm(&z), 0.0);
        assert!(SobolevNorm::new(n1, n2, h, 4).is_err());
    }

    #[test]
    fn gram_is_the_norm() {
        let (n1, n2, h) = (15, 11, 0.07);
        let w = bump_field(n1, n2, h);
        for order in 1..=3 {
            let s = SobolevNorm::new(n1, n2, h, order).unwrap();
            let q = h * h * w.dot(&s.apply_gram(&w));
            assert!((q - s.norm_sq(&w)).abs() <= 1e-11 * q);
        }
    }

    #[test]
    fn riesz_inverts_gram_on_free_nodes() {
        let g = GridSpec::new(17, 17).unwrap();
        let m = build_masks(&g, &CwfSpec::default()).unwrap();
        for order in 1..=3 {
            let s = SobolevNorm::new(17, 17, g.h, order).unwrap();
            let r = s.riesz(&m).unwrap();
            let mut x = bump_field(17, 17, g.h);
            x.constrain(&m);
            let gx = s.apply_gram(&x).scaled(g.h * g.h);
            let back = r.apply(&gx);
            for (a, b) in back.data.iter().zip(&x.data) {
                assert!((a - b).abs() < 1e-9, "order {order}");
            }
        }
    }
}

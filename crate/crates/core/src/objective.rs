//! The Carleman-weighted functional
//! `J(W) = e^{−2λ(d+c)} ∫ |L(x, p, W)|² φ_λ² dx + γ‖W‖²_{H^s}` and its exact
//! discrete gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::cwf::MAX_EXPONENT;
use crate::math::exp;
use crate::sobolev::{RieszMap, SobolevNorm};
use crate::system::{
    gradients, residual_of_sum, BcClass, ExtensionField, QuasilinearSystem, VectorField,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub lam: f64,
    pub gamma: f64,
    pub s_order: usize,
    /// Ball radius `R`.
    pub radius: f64,
    /// Drop the Carleman weight and the `e^{−2λ(d+c)}` factor.
    pub unweighted: bool,
    /// Keep only the penalty term.
    pub penalty_only: bool,
    pub form: ResidualForm,
}

/// Which residual enters the weighted term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// `L = ΔV − P(x, ∇V)`.
    Reduced,
    /// `M_N L = M_N ΔV + 2r`, the projected equation before inverting `M_N`.
    /// `M_N⁻¹` amplifies the truncation error of neglected modes, so this is
    /// the default.
    #[default]
    Projected,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            lam: 2.0,
            gamma: 0.1,
            s_order: 2,
            radius: 10.0,
            unweighted: false,
            penalty_only: false,
            form: ResidualForm::Projected,
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lam >= 0.0) || !self.lam.is_finite() {
            return Err(Error::invalid("λ", "must be finite and ≥ 0"));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("γ", "must be finite and ≥ 0"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("R", "must be positive"));
        }
        Ok(())
    }
}

/// `J` bound to a system, an extension and its quadrature weights.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub spec: ObjectiveSpec,
    pub system: &'a QuasilinearSystem,
    pub extension: &'a ExtensionField,
    pub sobolev: SobolevNorm,
    /// `h² e^{−2λ(d+c)} φ_λ²` at interior nodes, zero on the boundary ring.
    pub weight: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(
        spec: ObjectiveSpec,
        system: &'a QuasilinearSystem,
        extension: &'a ExtensionField,
    ) -> Result<Self> {
        spec.validate()?;
        let g = &system.grid;
        let masks = &system.masks;
        if extension.p.n != system.n || extension.p.n1 != g.n1 || extension.p.n2 != g.n2 {
            return Err(Error::ShapeMismatch { what: "extension" });
        }
        let top = 2.0 * spec.lam * masks.m_value;
        if !spec.unweighted && top > MAX_EXPONENT {
            return Err(Error::WeightOverflow { exponent: top });
        }
        let h2 = g.h * g.h;
        let shift = masks.d + masks.c;
        let mut weight = vec![0.0; g.omega_len()];
        for j in 1..g.n2 - 1 {
            for i in 1..g.n1 - 1 {
                let k = g.idx(i, j);
                weight[k] = if spec.unweighted {
                    h2
                } else {
                    h2 * exp(2.0 * spec.lam * (masks.xi[k] - shift))
                };
            }
        }
        let sobolev = SobolevNorm::new(g.n1, g.n2, g.h, spec.s_order)?;
        Ok(Objective {
            spec,
            system,
            extension,
            sobolev,
            weight,
        })
    }

    pub fn zero_field(&self) -> VectorField {
        VectorField::zeros(
            self.system.n,
            self.system.grid.n1,
            self.system.grid.n2,
            BcClass::ZeroCauchy,
        )
    }

    pub fn riesz(&self) -> Result<RieszMap> {
        self.sobolev.riesz(&self.system.masks)
    }

    fn check(&self, w: &VectorField) -> Result<()> {
        if !w.same_shape(&self.extension.p) {
            return Err(Error::ShapeMismatch { what: "W" });
        }
        w.check_class(&self.system.masks)
    }

    /// Weighted residual term alone.
    pub fn residual_term(&self, w: &VectorField) -> Result<f64> {
        self.check(w)?;
        if self.spec.penalty_only {
            return Ok(0.0);
        }
        let l = self.transformed(
            residual_of_sum(self.system, &self.extension.p.axpy(1.0, w)),
            false,
        );
        let nodes = w.nodes();
        let mut s = 0.0;
        for m in 0..w.n {
            for (q, &wt) in self.weight.iter().enumerate() {
                let v = l.data[m * nodes + q];
                s += wt * v * v;
            }
        }
        Ok(s)
    }

    /// Applies `M_N` (or `M_Nᵀ` when `transpose`) pointwise for the projected
    /// form; identity otherwise.
    fn transformed(&self, l: VectorField, transpose: bool) -> VectorField {
        if self.spec.form == ResidualForm::Reduced {
            return l;
        }
        let n = l.n;
        let nodes = l.nodes();
        let mat = &self.system.matrix;
        let mut out = l.clone();
        for q in 0..nodes {
            for a in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    let e = if transpose {
                        mat.entry(b, a)
                    } else {
                        mat.entry(a, b)
                    };
                    s += e * l.data[b * nodes + q];
                }
                out.data[a * nodes + q] = s;
            }
        }
        out
    }

    pub fn evaluate(&self, w: &VectorField) -> Result<f64> {
        let r = self.residual_term(w)?;
        Ok(r + self.spec.gamma * self.sobolev.norm_sq(w))
    }

    /// Exact gradient of the discrete functional in the Euclidean pairing,
    /// zero at pinned nodes.
    pub fn gradient(&self, w: &VectorField) -> Result<VectorField> {
        self.check(w)?;
        let sys = self.system;
        let (n, n1, n2) = (w.n, w.n1, w.n2);
        let nodes = n1 * n2;
        let h = sys.grid.h;
        let mut grad = self
            .sobolev
            .apply_gram(w)
            .scaled(2.0 * self.spec.gamma * h * h);
        if !self.spec.penalty_only {
            let u = self.extension.p.axpy(1.0, w);
            let l = self.transformed(residual_of_sum(sys, &u), false);
            let (gx, gy) = gradients(&u, h);
            // R = 2 w Tᵀ T L
            let mut r = vec![0.0; n * nodes];
            for m in 0..n {
                for q in 0..nodes {
                    r[m * nodes + q] = 2.0 * self.weight[q] * l.data[m * nodes + q];
                }
            }
            let r = self
                .transformed(VectorField::from_data(n, n1, n2, r, BcClass::Free)?, true)
                .data;
            let ih2 = 1.0 / (h * h);
            let i2h = 0.5 / h;
            for jc in 0..n {
                let gc = grad.component_mut(jc);
                for j in 1..n2 - 1 {
                    for i in 1..n1 - 1 {
                        let q = j * n1 + i;
                        let rj = r[jc * nodes + q];
                        if rj != 0.0 {
                            gc[q - 1] += rj * ih2;
                            gc[q + 1] += rj * ih2;
                            gc[q - n1] += rj * ih2;
                            gc[q + n1] += rj * ih2;
                            gc[q] -= 4.0 * rj * ih2;
                        }
                        // Z_j = Σ_m R_m Σ_k C[m][j][k] ∇U_k
                        let (mut zx, mut zy) = (0.0, 0.0);
                        for m in 0..n {
                            let rm = r[m * nodes + q];
                            if rm == 0.0 {
                                continue;
                            }
                            for k in 0..n {
                                let c = rm * sys.coupling(m, jc, k);
                                zx += c * gx.data[k * nodes + q];
                                zy += c * gy.data[k * nodes + q];
                            }
                        }
                        gc[q + 1] -= zx * i2h;
                        gc[q - 1] += zx * i2h;
                        gc[q + n1] -= zy * i2h;
                        gc[q - n1] += zy * i2h;
                    }
                }
            }
        }
        grad.constrain(&sys.masks);
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::cwf::{build_masks, CwfSpec};
    use crate::grid::GridSpec;
    use crate::system::extension_from_field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth(n: usize, g: &GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> VectorField {
        let mut v = VectorField::zeros(n, g.n1, g.n2, BcClass::Free);
        for k in 0..n {
            let (a, b, c, d): (f64, f64, f64, f64) = (
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen(),
                rng.gen(),
            );
            let comp = v.component_mut(k);
            for j in 0..g.n2 {
                for i in 0..g.n1 {
                    let (x, y) = g.omega_point(i, j);
                    comp[g.idx(i, j)] =
                        amp * ((a * x + 6.0 * c).sin() * (b * y + 6.0 * d).cos() + x * y);
                }
            }
        }
        v
    }

    struct Setup {
        q: QuasilinearSystem,
        p: ExtensionField,
    }

    fn setup(n: usize, nb: usize, d: f64) -> Setup {
        let g = GridSpec::new(n, n).unwrap();
        let m = build_masks(
            &g,
            &CwfSpec {
                d,
                c: 1.0,
                ..CwfSpec::default()
            },
        )
        .unwrap();
        let b = build_basis(nb).unwrap();
        let q = QuasilinearSystem::new(&b, &g, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = smooth(nb, &g, &mut rng, 0.3);
        let p = extension_from_field(&v, &g, &m, None).unwrap();
        Setup { q, p }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = setup(17, 3, 2.0);
        for form in [ResidualForm::Reduced, ResidualForm::Projected] {
            let spec = ObjectiveSpec {
                lam: 0.5,
                gamma: 0.01,
                form,
                ..ObjectiveSpec::default()
            };
            let obj = Objective::new(spec, &s.q, &s.p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..5 {
                let w = smooth(3, &s.q.grid, &mut rng, 0.2).constrained(&s.q.masks);
                let dir = smooth(3, &s.q.grid, &mut rng, 1.0).constrained(&s.q.masks);
                let g = obj.gradient(&w).unwrap();
                let exact = g.dot(&dir);
                let eps = 1e-5;
                let fd = (obj.evaluate(&w.axpy(eps, &dir)).unwrap()
                    - obj.evaluate(&w.axpy(-eps, &dir)).unwrap())
                    / (2.0 * eps);
                assert!(((exact - fd) / exact).abs() < 1e-6, "{exact} {fd}");
            }
        }
    }

    #[test]
    fn penalty_isolation() {
        let s = setup(17, 3, 2.0);
        let spec = ObjectiveSpec {
            gamma: 0.3,
            penalty_only: true,
            ..ObjectiveSpec::default()
        };
        let obj = Objective::new(spec, &s.q, &s.p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = smooth(3, &s.q.grid, &mut rng, 1.0).constrained(&s.q.masks);
        let g = obj.gradient(&w).unwrap();
        let h2 = s.q.grid.h * s.q.grid.h;
        let want = obj
            .sobolev
            .apply_gram(&w)
            .scaled(2.0 * 0.3 * h2)
            .constrained(&s.q.masks);
        for (a, b) in g.data.iter().zip(&want.data) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!((obj.evaluate(&w).unwrap() - 0.3 * obj.sobolev.norm_sq(&w)).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_is_stationary() {
        let s = setup(17, 3, 2.0);
        let zero_p = ExtensionField {
            p: s.p.p.scaled(0.0),
            cutoff_depth: 0.25,
        };
        let spec = ObjectiveSpec {
            gamma: 0.0,
            ..ObjectiveSpec::default()
        };
        let obj = Objective::new(spec, &s.q, &zero_p).unwrap();
        let w = obj.zero_field();
        assert_eq!(obj.evaluate(&w).unwrap(), 0.0);
        assert!(obj.gradient(&w).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn penalty_lower_bound() {
        let s = setup(17, 3, 2.0);
        let spec = ObjectiveSpec {
            lam: 1.0,
            gamma: 0.7,
            ..ObjectiveSpec::default()
        };
        let obj = Objective::new(spec, &s.q, &s.p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let w = smooth(3, &s.q.grid, &mut rng, 1.0).constrained(&s.q.masks);
            assert!(obj.evaluate(&w).unwrap() >= 0.7 * obj.sobolev.norm_sq(&w));
        }
    }

    #[test]
    fn overflow_guard() {
        let s = setup(17, 3, 2.0);
        let spec = ObjectiveSpec {
            lam: 40.0,
            ..ObjectiveSpec::default()
        };
        assert!(matches!(
            Objective::new(spec, &s.q, &s.p),
            Err(Error::WeightOverflow { .. })
        ));
    }
}

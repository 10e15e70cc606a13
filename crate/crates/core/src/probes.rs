//! Monte-Carlo probes of strict convexity and of the Lipschitz continuity of
//! the gradient on the ball `B(R)`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{cos, sin, sqrt};
use crate::objective::Objective;
use crate::optimize::{direction, Metric};
use crate::system::{BcClass, VectorField};
use crate::{Error, Result};

/// Smallest number of pairs a probe accepts.
pub const MIN_PAIRS: usize = 50;

/// Random smooth field in the zero Cauchy class with `‖W‖_{H^s} = norm`.
pub fn random_field(obj: &Objective<'_>, rng: &mut ChaCha8Rng, norm: f64) -> VectorField {
    let g = &obj.system.grid;
    let mut w = VectorField::zeros(obj.system.n, g.n1, g.n2, BcClass::Free);
    let modes = 4;
    for k in 0..w.n {
        let mut params = Vec::with_capacity(modes);
        for _ in 0..modes {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let f1: f64 = rng.gen_range(0.5..4.0);
            let f2: f64 = rng.gen_range(0.5..4.0);
            let ph1: f64 = rng.gen_range(0.0..6.3);
            let ph2: f64 = rng.gen_range(0.0..6.3);
            params.push((a, f1, f2, ph1, ph2));
        }
        let c = w.component_mut(k);
        for j in 0..g.n2 {
            for i in 0..g.n1 {
                let (x1, x2) = g.omega_point(i, j);
                let mut s = 0.0;
                for &(a, f1, f2, ph1, ph2) in &params {
                    s += a * sin(f1 * x1 + ph1) * cos(f2 * x2 + ph2);
                }
                c[g.idx(i, j)] = x2 * x2 * s;
            }
        }
    }
    w.constrain(&obj.system.masks);
    let n = obj.sobolev.norm(&w);
    if n > 0.0 {
        w = w.scaled(norm / n);
    }
    w
}

fn pair_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    /// `J(W₂) − J(W₁) − ⟨J′(W₁), W₂ − W₁⟩ − (γ/2)‖W₂ − W₁‖²`
    pub margins: Vec<f64>,
    /// The same without the `γ/2` term.
    pub gaps: Vec<f64>,
    pub fraction_nonneg: f64,
    pub lam: f64,
    pub gamma: f64,
    pub seed: u64,
}

/// Bregman margin of one pair.
pub fn bregman_margin(
    obj: &Objective<'_>,
    w1: &VectorField,
    w2: &VectorField,
) -> Result<(f64, f64)> {
    let j1 = obj.evaluate(w1)?;
    let j2 = obj.evaluate(w2)?;
    let g1 = obj.gradient(w1)?;
    let dw = w2.axpy(-1.0, w1);
    let gap = j2 - j1 - g1.dot(&dw);
    Ok((gap - 0.5 * obj.spec.gamma * obj.sobolev.norm_sq(&dw), gap))
}

/// Draws `pairs` pairs in `B(R)` and records the Bregman margins. Margins
/// above `−1e-12·(|J(W₁)| + |J(W₂)|)` count as nonnegative (round-off).
pub fn convexity_probe(obj: &Objective<'_>, pairs: usize, seed: u64) -> Result<ConvexityReport> {
    if pairs < MIN_PAIRS {
        return Err(Error::invalid("pairs", "need at least 50"));
    }
    let r = obj.spec.radius;
    let mut margins = Vec::with_capacity(pairs);
    let mut gaps = Vec::with_capacity(pairs);
    let mut nonneg = 0;
    for t in 0..pairs {
        let mut rng = pair_rng(seed, t);
        let n1 = r * rng.gen::<f64>();
        let n2 = r * rng.gen::<f64>();
        let w1 = random_field(obj, &mut rng, n1);
        let w2 = random_field(obj, &mut rng, n2);
        let (m, gap) = bregman_margin(obj, &w1, &w2)?;
        let scale = obj.evaluate(&w1)?.abs() + obj.evaluate(&w2)?.abs();
        if m >= -1e-12 * scale {
            nonneg += 1;
        }
        margins.push(m);
        gaps.push(gap);
    }
    Ok(ConvexityReport {
        margins,
        gaps,
        fraction_nonneg: nonneg as f64 / pairs as f64,
        lam: obj.spec.lam,
        gamma: obj.spec.gamma,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub metric: Metric,
    pub seed: u64,
}

/// `‖J′(W₁) − J′(W₂)‖ / ‖W₁ − W₂‖` over random pairs in the ball. In the
/// Sobolev metric the gradients are Riesz representatives and both norms are
/// `H^s` norms; in the Euclidean metric both are nodal 2-norms.
pub fn lipschitz_probe(
    obj: &Objective<'_>,
    trials: usize,
    seed: u64,
    metric: Metric,
) -> Result<LipschitzReport> {
    if trials < MIN_PAIRS {
        return Err(Error::invalid("trials", "need at least 50"));
    }
    let riesz = match metric {
        Metric::Sobolev => Some(obj.riesz()?),
        Metric::Euclidean => None,
    };
    let r = obj.spec.radius;
    let mut ratios = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = pair_rng(seed.wrapping_add(0x5bd1_e995), t);
        let (n1, n2) = (r * rng.gen::<f64>(), r * rng.gen::<f64>());
        let w1 = random_field(obj, &mut rng, n1);
        let w2 = random_field(obj, &mut rng, n2);
        let dg = obj.gradient(&w1)?.axpy(-1.0, &obj.gradient(&w2)?);
        let dw = w1.axpy(-1.0, &w2);
        let (num, den) = match metric {
            Metric::Sobolev => (
                direction(&dg, metric, riesz.as_ref()).1,
                obj.sobolev.norm(&dw),
            ),
            Metric::Euclidean => (sqrt(dg.dot(&dg)), sqrt(dw.dot(&dw))),
        };
        if den > 0.0 {
            ratios.push(num / den);
        }
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzReport {
        ratios,
        max_ratio,
        metric,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    /// `|⟨J′(W), h⟩ − central difference| / |⟨J′(W), h⟩|` per pair.
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
    pub seed: u64,
}

/// Compares `⟨J′(W), h⟩` with `(J(W + εh) − J(W − εh))/(2ε)` on random pairs,
/// `W` in the ball and `h` of unit `H^s` norm, with `ε = ∛eps·(1 + ‖W‖_∞)/‖h‖_∞`
/// (the step that balances truncation and rounding for central differences).
pub fn gradient_check(obj: &Objective<'_>, pairs: usize, seed: u64) -> Result<GradientCheckReport> {
    if pairs == 0 {
        return Err(Error::invalid("pairs", "need at least one"));
    }
    let r = obj.spec.radius;
    let mut rel_errors = Vec::with_capacity(pairs);
    for t in 0..pairs {
        let mut rng = pair_rng(seed.wrapping_add(0x2545_f491), t);
        let nw = r * rng.gen::<f64>();
        let w = random_field(obj, &mut rng, nw);
        let h = random_field(obj, &mut rng, 1.0);
        let exact = obj.gradient(&w)?.dot(&h);
        let eps = libm::cbrt(f64::EPSILON) * (1.0 + w.max_abs()) / h.max_abs();
        let fd = (obj.evaluate(&w.axpy(eps, &h))? - obj.evaluate(&w.axpy(-eps, &h))?) / (2.0 * eps);
        rel_errors.push(((exact - fd) / exact).abs());
    }
    let max_rel_error = rel_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradientCheckReport {
        rel_errors,
        max_rel_error,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::cwf::{build_masks, CwfSpec};
    use crate::grid::GridSpec;
    use crate::objective::ObjectiveSpec;
    use crate::system::{ExtensionField, QuasilinearSystem};

    fn sys() -> QuasilinearSystem {
        let g = GridSpec::new(13, 13).unwrap();
        let m = build_masks(&g, &CwfSpec::default()).unwrap();
        QuasilinearSystem::new(&build_basis(2).unwrap(), &g, &m).unwrap()
    }

    fn zero_ext(q: &QuasilinearSystem) -> ExtensionField {
        ExtensionField {
            p: VectorField::zeros(q.n, q.grid.n1, q.grid.n2, BcClass::Free),
            cutoff_depth: 0.25,
        }
    }

    #[test]
    fn pure_penalty_margins() {
        let q = sys();
        let p = zero_ext(&q);
        let spec = ObjectiveSpec {
            gamma: 0.4,
            penalty_only: true,
            radius: 3.0,
            ..ObjectiveSpec::default()
        };
        let obj = Objective::new(spec, &q, &p).unwrap();
        let rep = convexity_probe(&obj, 50, 1).unwrap();
        assert_eq!(rep.fraction_nonneg, 1.0);
        for (m, g) in rep.margins.iter().zip(&rep.gaps) {
            assert!((m - 0.5 * g).abs() <= 1e-10 * g.abs().max(1e-300));
        }
        let mut rng = pair_rng(0, 0);
        let w = random_field(&obj, &mut rng, 1.0);
        assert!((obj.sobolev.norm(&w) - 1.0).abs() < 1e-12);
        assert!(w.class_violation(&q.masks) == 0.0);
        assert_eq!(bregman_margin(&obj, &w, &w).unwrap().0, 0.0);
    }

    #[test]
    fn pure_penalty_lipschitz() {
        let q = sys();
        let p = zero_ext(&q);
        let spec = ObjectiveSpec {
            gamma: 0.4,
            penalty_only: true,
            radius: 3.0,
            ..ObjectiveSpec::default()
        };
        let obj = Objective::new(spec, &q, &p).unwrap();
        let rep = lipschitz_probe(&obj, 50, 2, Metric::Sobolev).unwrap();
        for r in &rep.ratios {
            assert!((r - 0.8).abs() < 1e-8);
        }
        let e = lipschitz_probe(&obj, 50, 2, Metric::Euclidean).unwrap();
        assert!(e.max_ratio.is_finite() && e.max_ratio > 0.0);
        assert!(lipschitz_probe(&obj, 10, 2, Metric::Sobolev).is_err());
    }

    #[test]
    fn gradient_check_on_nonlinear_problem() {
        let g = GridSpec::new(17, 17).unwrap();
        let m = build_masks(&g, &CwfSpec::default()).unwrap();
        let q = QuasilinearSystem::new(&build_basis(3).unwrap(), &g, &m).unwrap();
        let mut p = zero_ext(&q);
        for k in 0..q.n {
            for (idx, x) in p.p.component_mut(k).iter_mut().enumerate() {
                let (i, j) = (idx % g.n1, idx / g.n1);
                let (x1, x2) = g.omega_point(i, j);
                *x = (1.0 + k as f64) * 0.3 * sin(2.0 * x1 + k as f64) * cos(1.5 * x2);
            }
        }
        for lam in [0.0, 1.0] {
            let spec = ObjectiveSpec {
                lam,
                gamma: 0.01,
                radius: 1.0,
                ..ObjectiveSpec::default()
            };
            let obj = Objective::new(spec, &q, &p).unwrap();
            let rep = gradient_check(&obj, 5, 0).unwrap();
            assert!(rep.max_rel_error <= 1e-6, "{:?}", rep.rel_errors);
        }
    }
}

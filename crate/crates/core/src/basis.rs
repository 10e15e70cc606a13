//! Orthonormal basis `ψ_k(x₀) = P_k(x₀)e^{x₀}` of `L₂(0, 1)`.
//!
//! Every inner product reduces to exponential moments
//! `μ_j(s) = ∫₀¹ x^j e^{s x} dx`, so the basis, the derivative matrix and the
//! triple-product tensor are computed without quadrature.

use alloc::vec;
use alloc::vec::Vec;

use crate::dd::Dd;
use crate::math::{exp, sqrt};
use crate::{Error, Result};

/// Largest supported truncation order; orthonormality degrades in double
/// precision beyond it.
pub const MAX_ORDER: usize = 8;
/// Default truncation order.
pub const DEFAULT_ORDER: usize = 4;
/// Accepted `max |⟨ψ_i, ψ_j⟩ − δ_ij|`.
pub const GRAM_TOLERANCE: f64 = 1e-8;
/// Minimum number of x₀ samples for the projection quadrature.
pub const MIN_SAMPLES: usize = 32;

/// `μ_j(s) = ∫₀¹ x^j e^{s x} dx`.
///
/// Evaluated with the positive series `Σ_k s^k / (k! (j + k + 1))`. The upward
/// recurrence `μ_j = e^s/s − (j/s) μ_{j−1}` amplifies rounding by `j!/s^j`
/// and is only used as a cross-check in tests.
pub fn exp_moment(j: usize, scale: f64) -> f64 {
    exp_moment_dd(j, scale).to_f64()
}

fn exp_moment_dd(j: usize, scale: f64) -> Dd {
    debug_assert!(scale >= 0.0);
    let mut term = Dd::new(1.0); // s^k / k!
    let mut sum = Dd::default();
    let mut k = 0usize;
    loop {
        let contrib = term.div_f64((j + k + 1) as f64);
        sum = sum + contrib;
        k += 1;
        if contrib.hi <= 1e-34 * sum.hi && k as f64 > scale {
            break;
        }
        term = (term * Dd::new(scale)).div_f64(k as f64);
        if k > 400 {
            break;
        }
    }
    sum
}

/// Table of `μ_0(s) … μ_len−1(s)`.
#[derive(Debug, Clone)]
struct Moments(Vec<Dd>);

impl Moments {
    fn new(len: usize, scale: f64) -> Self {
        Moments((0..len).map(|j| exp_moment_dd(j, scale)).collect())
    }
}

/// `P(x₀)e^{x₀}` stored through the monomial coefficients of `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolynomial {
    coeffs: Vec<f64>,
}

impl ExpPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        ExpPolynomial { coeffs }
    }

    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        ExpPolynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree of `P` (index of the last nonzero coefficient).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// `P(x₀)`.
    pub fn poly(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `P(x₀)e^{x₀}`.
    pub fn eval(&self, x: f64) -> f64 {
        self.poly(x) * exp(x)
    }

    pub fn scaled(&self, a: f64) -> Self {
        ExpPolynomial::new(self.coeffs.iter().map(|c| a * c).collect())
    }

    fn axpy(&mut self, a: f64, other: &ExpPolynomial) {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0.0);
        }
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }
}

/// `(P e^{x₀})′ = (P + P′)e^{x₀}`.
pub fn basis_derivative(e: &ExpPolynomial) -> ExpPolynomial {
    let mut coeffs = e.coeffs.clone();
    for (j, &c) in e.coeffs.iter().enumerate().skip(1) {
        coeffs[j - 1] += j as f64 * c;
    }
    ExpPolynomial::new(coeffs)
}

/// `⟨P e^x, Q e^x⟩` given moments at scale 2.
fn inner(p: &ExpPolynomial, q: &ExpPolynomial, mu: &Moments) -> f64 {
    let mut s = Dd::default();
    for (a, &pa) in p.coeffs.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (b, &qb) in q.coeffs.iter().enumerate() {
            s = s + Dd::new(pa) * Dd::new(qb) * mu.0[a + b];
        }
    }
    s.to_f64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    elements: Vec<ExpPolynomial>,
    gram_residual: f64,
}

impl OrthonormalBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ExpPolynomial] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &ExpPolynomial {
        &self.elements[k]
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// `(ψ_0(x₀), …, ψ_{N−1}(x₀))`.
    pub fn values_at(&self, x0: f64) -> Vec<f64> {
        self.elements.iter().map(|e| e.eval(x0)).collect()
    }

    /// Quadrature table for projecting `samples` uniform x₀ samples.
    pub fn projector(&self, samples: usize) -> Result<Projector> {
        if samples < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: samples,
                need: MIN_SAMPLES,
            });
        }
        let w = simpson_weights(samples);
        let step = 1.0 / (samples - 1) as f64;
        let raw: Vec<Vec<f64>> = self
            .elements
            .iter()
            .map(|e| {
                w.iter()
                    .enumerate()
                    .map(|(i, wi)| wi * e.eval(i as f64 * step))
                    .collect()
            })
            .collect();
        // Correct by the inverse of the discrete Gram matrix so that the
        // projection reproduces every element of the span exactly.
        let n = self.len();
        let mut gram = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                gram[a * n + b] = (0..samples)
                    .map(|i| raw[a][i] * self.elements[b].eval(i as f64 * step))
                    .sum();
            }
        }
        let ginv = invert_dense(&gram, n).ok_or(Error::BasisConditioning {
            n,
            residual: f64::INFINITY,
        })?;
        let table = (0..n)
            .map(|a| {
                (0..samples)
                    .map(|i| (0..n).map(|b| ginv[a * n + b] * raw[b][i]).sum())
                    .collect()
            })
            .collect();
        Ok(Projector { table })
    }
}

/// Modified Gram-Schmidt, two passes, on `{x₀^k e^{x₀}}_{k<n}`.
pub fn build_basis(n: usize) -> Result<OrthonormalBasis> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::invalid(
            "N",
            alloc::format!("basis size must lie in 1..={MAX_ORDER}, got {n}"),
        ));
    }
    let mu = Moments::new(2 * n, 2.0);
    let mut elements: Vec<ExpPolynomial> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = ExpPolynomial::monomial(k);
        for _pass in 0..2 {
            for psi in &elements {
                let r = inner(&v, psi, &mu);
                v.axpy(-r, psi);
            }
        }
        let norm = sqrt(inner(&v, &v, &mu));
        // the sweeps never touch the leading coefficient, so deg P_k = k
        elements.push(v.scaled(1.0 / norm));
    }
    let mut residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((inner(&elements[i], &elements[j], &mu) - target).abs());
        }
    }
    if !(residual <= GRAM_TOLERANCE) {
        return Err(Error::BasisConditioning { n, residual });
    }
    Ok(OrthonormalBasis {
        elements,
        gram_residual: residual,
    })
}

/// `M_N` with `a_mk = ⟨ψ_k′, ψ_m⟩`, its inverse and determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    n: usize,
    entries: Vec<f64>,
    inverse: Vec<f64>,
    det: f64,
}

impl DerivativeMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `a_mk` (row `m`, column `k`).
    pub fn entry(&self, m: usize, k: usize) -> f64 {
        self.entries[m * self.n + k]
    }

    pub fn inverse_entry(&self, m: usize, k: usize) -> f64 {
        self.inverse[m * self.n + k]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// `max |(M_N M_N⁻¹ − I)_{ij}|`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n)
                    .map(|l| self.entry(i, l) * self.inverse_entry(l, j))
                    .sum();
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - t).abs());
            }
        }
        worst
    }
}

pub fn derivative_matrix(b: &OrthonormalBasis) -> Result<DerivativeMatrix> {
    let n = b.len();
    let mu = Moments::new(2 * n + 1, 2.0);
    let derivs: Vec<_> = b.elements.iter().map(basis_derivative).collect();
    let mut entries = vec![0.0; n * n];
    for m in 0..n {
        for k in 0..n {
            entries[m * n + k] = inner(&derivs[k], &b.elements[m], &mu);
        }
    }
    for m in 0..n {
        let diag = entries[m * n + m];
        if (diag - 1.0).abs() > 1e-8 {
            return Err(Error::DerivativeMatrix {
                reason: alloc::format!("a_{m}{m} = {diag:.12}"),
            });
        }
        for k in 0..m {
            let v = entries[m * n + k];
            if v.abs() > 1e-8 {
                return Err(Error::DerivativeMatrix {
                    reason: alloc::format!("a_{m}{k} = {v:.3e} below the diagonal"),
                });
            }
        }
    }
    // The computed matrix is only numerically triangular, so invert it in
    // full; a triangular solve would leave the tiny sub-diagonal entries out
    // of the residual.
    let inverse = invert_dense(&entries, n).ok_or_else(|| Error::DerivativeMatrix {
        reason: "singular".into(),
    })?;
    let det = (0..n).map(|m| entries[m * n + m]).product::<f64>();
    let dm = DerivativeMatrix {
        n,
        entries,
        inverse,
        det,
    };
    if (det - 1.0).abs() > 1e-6 {
        return Err(Error::DerivativeMatrix {
            reason: alloc::format!("det = {det:.12}"),
        });
    }
    let res = dm.inverse_residual();
    if res > 1e-8 {
        return Err(Error::DerivativeMatrix {
            reason: alloc::format!("inverse residual {res:.3e}"),
        });
    }
    Ok(dm)
}

/// Gauss-Jordan elimination with partial pivoting.
fn invert_dense(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x * n + c].abs().total_cmp(&m[y * n + c].abs()))?;
        if m[p * n + c] == 0.0 {
            return None;
        }
        for j in 0..n {
            m.swap(c * n + j, p * n + j);
            inv.swap(c * n + j, p * n + j);
        }
        let d = m[c * n + c];
        for j in 0..n {
            m[c * n + j] /= d;
            inv[c * n + j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                if f != 0.0 {
                    for j in 0..n {
                        m[r * n + j] -= f * m[c * n + j];
                        inv[r * n + j] -= f * inv[c * n + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// `values[m][j][k] = ∫₀¹ ψ_j ψ_k′ ψ_m dx₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTensor {
    n: usize,
    values: Vec<f64>,
}

impl TripleTensor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, j: usize, k: usize) -> f64 {
        self.values[(m * self.n + j) * self.n + k]
    }
}

pub fn triple_tensor(b: &OrthonormalBasis) -> TripleTensor {
    let n = b.len();
    let mu = Moments::new(3 * n + 1, 3.0);
    let derivs: Vec<_> = b.elements.iter().map(basis_derivative).collect();
    let mut values = vec![0.0; n * n * n];
    for m in 0..n {
        for j in 0..n {
            for k in 0..n {
                values[(m * n + j) * n + k] =
                    triple(&b.elements[j], &derivs[k], &b.elements[m], &mu);
            }
        }
    }
    TripleTensor { n, values }
}

fn triple(p: &ExpPolynomial, q: &ExpPolynomial, r: &ExpPolynomial, mu: &Moments) -> f64 {
    let mut s = Dd::default();
    for (a, &pa) in p.coeffs.iter().enumerate() {
        for (b, &qb) in q.coeffs.iter().enumerate() {
            let pq = Dd::new(pa) * Dd::new(qb);
            for (c, &rc) in r.coeffs.iter().enumerate() {
                s = s + pq * Dd::new(rc) * mu.0[a + b + c];
            }
        }
    }
    s.to_f64()
}

/// Composite Simpson weights on `n` uniform points of `[0, 1]`. An odd number
/// of intervals closes with the 3/8 rule on the last three.
pub fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n >= 4, "Simpson weights need at least 4 points");
    let intervals = n - 1;
    let h = 1.0 / intervals as f64;
    let mut w = vec![0.0; n];
    let simpson_end = if intervals.is_multiple_of(2) {
        intervals
    } else {
        intervals - 3
    };
    let mut i = 0;
    while i < simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end < intervals {
        let s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Precomputed `w_i ψ_k(x₀ᵢ)` for a fixed uniform x₀ grid.
#[derive(Debug, Clone)]
pub struct Projector {
    table: Vec<Vec<f64>>,
}

impl Projector {
    pub fn samples(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    /// Coefficients of the Simpson-weighted least-squares fit in the span,
    /// approximately `⟨v, ψ_k⟩`.
    pub fn project(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.samples() {
            return Err(Error::ShapeMismatch {
                what: "x₀ samples vs projector",
            });
        }
        Ok(self
            .table
            .iter()
            .map(|row| row.iter().zip(samples).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Coefficients `⟨v, ψ_k⟩` of samples of `v` on a uniform grid of `[0, 1]`
/// (endpoints included).
pub fn project_function(samples: &[f64], b: &OrthonormalBasis) -> Result<Vec<f64>> {
    b.projector(samples.len())?.project(samples)
}

/// `Σ_k coeffs[k] ψ_k(x₀)`.
pub fn evaluate_expansion(coeffs: &[f64], b: &OrthonormalBasis, x0: f64) -> f64 {
    debug_assert_eq!(coeffs.len(), b.len());
    coeffs
        .iter()
        .zip(&b.elements)
        .map(|(c, e)| c * e.eval(x0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::integrate;
    use core::f64::consts::E;

    fn upward_recurrence(j: usize, s: f64) -> f64 {
        let mut mu = (exp(s) - 1.0) / s;
        for i in 1..=j {
            mu = exp(s) / s - (i as f64 / s) * mu;
        }
        mu
    }

    #[test]
    fn exp_moment_examples() {
        assert!((exp_moment(0, 2.0) - (E * E - 1.0) / 2.0).abs() < 1e-14);
        assert!((exp_moment(1, 2.0) - (E * E + 1.0) / 4.0).abs() < 1e-14);
        assert!((exp_moment(0, 1.0) - (E - 1.0)).abs() < 1e-14);
        assert!((exp_moment(0, 2.0) - 3.194528).abs() < 1e-6);
        assert!((exp_moment(1, 2.0) - 2.097264).abs() < 1e-6);
    }

    #[test]
    fn exp_moment_matches_recurrence_where_it_is_stable() {
        for s in [1.0, 2.0, 3.0] {
            for j in 0..6 {
                assert!((exp_moment(j, s) - upward_recurrence(j, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_moment_matches_quadrature() {
        for s in [1.0, 2.0, 3.0] {
            for j in 0..=16 {
                let q = integrate(|x| x.powi(j as i32) * libm::exp(s * x), 0.0, 1.0);
                assert!((exp_moment(j, s) - q).abs() < 1e-10, "j={j} s={s}");
            }
        }
    }

    #[test]
    fn single_element_basis() {
        let b = build_basis(1).unwrap();
        let p0 = b.element(0).coeffs()[0];
        assert!((p0 - 1.0 / exp_moment(0, 2.0).sqrt()).abs() < 1e-14);
        assert!((p0 - 0.5594956).abs() < 1e-7);
    }

    #[test]
    fn rejects_out_of_range_sizes() {
        assert!(matches!(
            build_basis(0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            build_basis(9),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            build_basis(12),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn degrees_are_exact() {
        let b = build_basis(6).unwrap();
        for k in 0..6 {
            assert_eq!(b.element(k).degree(), k);
            assert_eq!(b.element(k).coeffs().len(), k + 1);
        }
    }

    #[test]
    fn gram_matrix_against_quadrature() {
        for n in 1..=8 {
            let b = build_basis(n).unwrap();
            assert!(b.gram_residual() <= GRAM_TOLERANCE);
            for i in 0..n {
                for j in 0..n {
                    let q = integrate(|x| b.element(i).eval(x) * b.element(j).eval(x), 0.0, 1.0);
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((q - t).abs() <= 1e-8, "n={n} ({i},{j}) {q}");
                }
            }
        }
    }

    #[test]
    fn derivative_of_polynomials() {
        let c = basis_derivative(&ExpPolynomial::new(vec![3.5]));
        assert_eq!(c.coeffs(), &[3.5]);
        let x = basis_derivative(&ExpPolynomial::new(vec![0.0, 1.0]));
        assert_eq!(x.coeffs(), &[1.0, 1.0]);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let b = build_basis(5).unwrap();
        let eps = 1e-5;
        for k in 0..5 {
            let d = basis_derivative(b.element(k));
            for i in 1..=10 {
                let x = i as f64 / 11.0;
                let fd = (b.element(k).eval(x + eps) - b.element(k).eval(x - eps)) / (2.0 * eps);
                assert!((d.eval(x) - fd).abs() < 1e-6, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn derivative_matrix_is_unit_upper_triangular() {
        for n in 2..=6 {
            let m = derivative_matrix(&build_basis(n).unwrap()).unwrap();
            for i in 0..n {
                assert!((m.entry(i, i) - 1.0).abs() <= 1e-8);
                for k in 0..i {
                    assert!(m.entry(i, k).abs() <= 1e-8);
                }
            }
            assert!((m.det() - 1.0).abs() <= 1e-6);
            assert!(m.inverse_residual() <= 1e-8);
        }
    }

    #[test]
    fn derivative_minus_element_lies_in_lower_span() {
        let n = 6;
        let b = build_basis(n).unwrap();
        for k in 0..n {
            let d = basis_derivative(b.element(k));
            for j in k..n {
                let q = integrate(
                    |x| (d.eval(x) - b.element(k).eval(x)) * b.element(j).eval(x),
                    0.0,
                    1.0,
                );
                assert!(q.abs() <= 1e-8, "k={k} j={j} {q}");
            }
        }
    }

    #[test]
    fn triple_tensor_single_element() {
        let b = build_basis(1).unwrap();
        let t = triple_tensor(&b);
        let p0 = b.element(0).coeffs()[0];
        let expected = p0.powi(3) * (exp(3.0) - 1.0) / 3.0;
        assert!((t.get(0, 0, 0) - expected).abs() < 1e-13);
    }

    #[test]
    fn triple_tensor_matches_quadrature() {
        for n in [5, 8] {
            let b = build_basis(n).unwrap();
            let t = triple_tensor(&b);
            for m in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let dk = basis_derivative(b.element(k));
                        let q = integrate(
                            |x| b.element(j).eval(x) * dk.eval(x) * b.element(m).eval(x),
                            0.0,
                            1.0,
                        );
                        assert!((t.get(m, j, k) - q).abs() < 1e-8, "N={n} ({m},{j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn triple_tensor_is_linear_in_each_factor() {
        let b = build_basis(3).unwrap();
        let mu = Moments::new(12, 3.0);
        let d1 = basis_derivative(b.element(1));
        let base = triple(b.element(2), &d1, b.element(0), &mu);
        let doubled = triple(&b.element(2).scaled(2.0), &d1, b.element(0), &mu);
        assert!((doubled - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for n in [33, 64, 65] {
            let w = simpson_weights(n);
            let h = 1.0 / (n - 1) as f64;
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * (i as f64 * h).powi(3))
                .sum();
            assert!((s - 0.25).abs() < 1e-14, "n={n}");
        }
    }

    fn samples_of(f: impl Fn(f64) -> f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| f(i as f64 / (k - 1) as f64)).collect()
    }

    #[test]
    fn projecting_an_element_gives_a_unit_vector() {
        let b = build_basis(4).unwrap();
        let c = project_function(&samples_of(|x| b.element(2).eval(x), 64), &b).unwrap();
        for (k, ck) in c.iter().enumerate() {
            let t = if k == 2 { 1.0 } else { 0.0 };
            assert!((ck - t).abs() < 1e-6, "{k}: {ck}");
        }
    }

    #[test]
    fn projection_is_linear_and_needs_enough_samples() {
        let b = build_basis(4).unwrap();
        let f = samples_of(|x| x.sin(), 40);
        let g = samples_of(|x| (2.0 * x).exp(), 40);
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, c)| 2.0 * a - 0.5 * c).collect();
        let pf = project_function(&f, &b).unwrap();
        let pg = project_function(&g, &b).unwrap();
        let pfg = project_function(&fg, &b).unwrap();
        for k in 0..4 {
            assert!((pfg[k] - (2.0 * pf[k] - 0.5 * pg[k])).abs() < 1e-12);
        }
        assert!(matches!(
            project_function(&f[..31], &b),
            Err(Error::TooFewSamples { got: 31, need: 32 })
        ));
    }

    #[test]
    fn evaluate_expansion_basics() {
        let b = build_basis(4).unwrap();
        assert_eq!(evaluate_expansion(&[0.0; 4], &b, 0.3), 0.0);
        let e3 = [0.0, 0.0, 0.0, 1.0];
        assert!((evaluate_expansion(&e3, &b, 0.3) - b.element(3).eval(0.3)).abs() < 1e-15);
        let c = project_function(&samples_of(|x| b.element(1).eval(x), 64), &b).unwrap();
        for x in [0.0, 0.25, 0.5, 0.9] {
            assert!((evaluate_expansion(&c, &b, x) - b.element(1).eval(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn project_evaluate_roundtrip_on_span() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = build_basis(4).unwrap();
        for _ in 0..5 {
            let coeffs: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = samples_of(|x| evaluate_expansion(&coeffs, &b, x), 64);
            let back = project_function(&s, &b).unwrap();
            for k in 0..4 {
                assert!((back[k] - coeffs[k]).abs() < 1e-6);
            }
        }
    }
}

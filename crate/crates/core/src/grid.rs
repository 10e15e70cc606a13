//! Uniform finite-difference grids for Ω and the enclosing box G.
//!
//! Ω is `[0, 1] × [0, H_Ω]` with `n1 × n2` nodes and spacing `h = 1/(n1 − 1)`.
//! G extends Ω by a whole number of cells on every side and contains the
//! source line `x₂ = −1`. Fields are stored row-major with `x₁` fastest:
//! node `(i, j)` sits at `x = (i h, j h)`.

use crate::math::ceil;
use crate::{Error, Result};

/// Height of the source line below Ω.
pub const SOURCE_LINE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub pad_left: usize,
    pub pad_right: usize,
    pub pad_bottom: usize,
    pub pad_top: usize,
}

impl GridSpec {
    /// Ω grid of `n1 × n2` nodes inside a G that reaches 0.5 beyond Ω on the
    /// sides and top and down to `x₂ = −1.5` below.
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 5 || n2 < 5 {
            return Err(Error::invalid("grid", "need at least 5 nodes per axis"));
        }
        let h = 1.0 / (n1 - 1) as f64;
        let cells = |len: f64| ceil(len / h - 1e-9) as usize;
        Self::with_padding(n1, n2, cells(0.5), cells(0.5), cells(1.5), cells(0.5))
    }

    pub fn with_padding(
        n1: usize,
        n2: usize,
        pad_left: usize,
        pad_right: usize,
        pad_bottom: usize,
        pad_top: usize,
    ) -> Result<Self> {
        if n1 < 5 || n2 < 5 {
            return Err(Error::invalid("grid", "need at least 5 nodes per axis"));
        }
        if pad_left == 0 || pad_right == 0 || pad_top == 0 || pad_bottom == 0 {
            return Err(Error::invalid("grid", "∂Ω and ∂G must be disjoint"));
        }
        let h = 1.0 / (n1 - 1) as f64;
        if (pad_bottom as f64) * h <= -SOURCE_LINE {
            return Err(Error::invalid(
                "grid",
                "G must extend below the source line x₂ = −1",
            ));
        }
        Ok(GridSpec {
            n1,
            n2,
            h,
            pad_left,
            pad_right,
            pad_bottom,
            pad_top,
        })
    }

    pub fn omega_len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn omega_height(&self) -> f64 {
        (self.n2 - 1) as f64 * self.h
    }

    /// Node counts of G along `x₁` and `x₂`.
    pub fn g_dims(&self) -> (usize, usize) {
        (
            self.n1 + self.pad_left + self.pad_right,
            self.n2 + self.pad_bottom + self.pad_top,
        )
    }

    pub fn g_len(&self) -> usize {
        let (a, b) = self.g_dims();
        a * b
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    #[inline]
    pub fn omega_point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.h, j as f64 * self.h)
    }

    #[inline]
    pub fn g_point(&self, gi: usize, gj: usize) -> (f64, f64) {
        (
            (gi as f64 - self.pad_left as f64) * self.h,
            (gj as f64 - self.pad_bottom as f64) * self.h,
        )
    }

    /// Index in G of Ω node `(i, j)`.
    #[inline]
    pub fn g_idx_of_omega(&self, i: usize, j: usize) -> usize {
        let (g1, _) = self.g_dims();
        (j + self.pad_bottom) * g1 + i + self.pad_left
    }

    /// Ω node `(i, j)` for a G index, if it lies in Ω̄.
    pub fn omega_of_g(&self, gi: usize, gj: usize) -> Option<(usize, usize)> {
        let i = gi.checked_sub(self.pad_left)?;
        let j = gj.checked_sub(self.pad_bottom)?;
        (i < self.n1 && j < self.n2).then_some((i, j))
    }

    /// Whether Ω node `(i, j)` is not on ∂Ω.
    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.n1 && j + 1 < self.n2
    }

    /// Restriction of a G field to Ω̄.
    pub fn restrict(&self, g_field: &[f64]) -> alloc::vec::Vec<f64> {
        let mut out = alloc::vec![0.0; self.omega_len()];
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out[self.idx(i, j)] = g_field[self.g_idx_of_omega(i, j)];
            }
        }
        out
    }

    /// Whether the strip `{|x₂ + 1| < ε, x₁ ∈ (−ε, 1 + ε)}` stays strictly
    /// inside G and away from Ω̄ by at least one cell.
    pub fn admits_source(&self, eps: f64) -> bool {
        let (x1_lo, x2_lo) = self.g_point(0, 0);
        let (g1, g2) = self.g_dims();
        let (x1_hi, _) = self.g_point(g1 - 1, g2 - 1);
        eps > 0.0
            && SOURCE_LINE - eps > x2_lo + self.h
            && SOURCE_LINE + eps < -self.h
            && -eps > x1_lo + self.h
            && 1.0 + eps < x1_hi - self.h
    }
}

//! Gradient projection `W_n = P_B(W_{n−1} − ς J′(W_{n−1}))` on a Sobolev ball.

use alloc::vec::Vec;

use crate::linalg::dot;
use crate::math::sqrt;
use crate::objective::Objective;
use crate::sobolev::{RieszMap, SobolevNorm};
use crate::system::VectorField;
use crate::{Error, Result};

/// Consecutive increases of `J` tolerated before giving up.
pub const DIVERGENCE_WINDOW: usize = 10;

/// Radial projection onto `{‖W‖_{H^s} ≤ R}`.
pub fn project_ball(w: &VectorField, radius: f64, norm: &SobolevNorm) -> (VectorField, bool) {
    let n = norm.norm(w);
    if n <= radius {
        (w.clone(), false)
    } else {
        (w.scaled(radius / n), true)
    }
}

/// Inner product in which the gradient step is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// Plain nodal gradient.
    Euclidean,
    /// Riesz representative in `H^s`.
    #[default]
    Sobolev,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// `ς = factor / L̂` with `L̂` from power iteration on the Hessian at `W₀`.
    Auto {
        factor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientProjectionOptions {
    pub step: StepRule,
    pub max_iter: usize,
    pub tol: f64,
    pub metric: Metric,
}

impl Default for GradientProjectionOptions {
    fn default() -> Self {
        GradientProjectionOptions {
            step: StepRule::Auto { factor: 1.0 },
            max_iter: 500,
            tol: 1e-8,
            metric: Metric::Sobolev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub n: usize,
    pub j_value: f64,
    pub grad_norm: f64,
    pub projected: bool,
    pub error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterState {
    pub w: VectorField,
    pub j_value: f64,
    pub grad_norm: f64,
    pub n: usize,
    pub projected: bool,
}

#[derive(Debug, Clone)]
pub struct GradientProjectionRun {
    pub history: Vec<IterRecord>,
    pub last: IterState,
    pub step: f64,
    pub converged: bool,
}

/// Step direction and its norm in the chosen metric.
pub(crate) fn direction(
    g: &VectorField,
    metric: Metric,
    riesz: Option<&RieszMap>,
) -> (VectorField, f64) {
    match (metric, riesz) {
        (Metric::Sobolev, Some(r)) => {
            let d = r.apply(g);
            let n2 = dot(&d.data, &g.data).max(0.0);
            (d, sqrt(n2))
        }
        _ => (g.clone(), sqrt(g.dot(g))),
    }
}

/// Largest curvature of `J` at `w` in the step metric, by power iteration on
/// finite-difference Hessian-vector products.
pub fn curvature_estimate(
    obj: &Objective<'_>,
    w: &VectorField,
    metric: Metric,
    riesz: Option<&RieszMap>,
    iters: usize,
) -> Result<f64> {
    let masks = &obj.system.masks;
    let mut v = obj.zero_field();
    for (q, x) in v.data.iter_mut().enumerate() {
        *x = 1.0 + 0.5 * crate::math::sin(0.37 * q as f64);
    }
    v.constrain(masks);
    let metric_norm = |x: &VectorField| match metric {
        Metric::Sobolev => obj.sobolev.norm(x),
        Metric::Euclidean => sqrt(x.dot(x)),
    };
    let mut est = 0.0;
    let scale = 1e-4 * (1.0 + metric_norm(w));
    for _ in 0..iters {
        let nv = metric_norm(&v);
        if nv == 0.0 {
            break;
        }
        v = v.scaled(1.0 / nv);
        let gp = obj.gradient(&w.axpy(scale, &v))?;
        let gm = obj.gradient(&w.axpy(-scale, &v))?;
        let hv = gp.axpy(-1.0, &gm).scaled(0.5 / scale);
        let (next, _) = direction(&hv, metric, riesz);
        est = metric_norm(&next);
        v = next;
        v.constrain(masks);
    }
    Ok(est)
}

/// Runs gradient projection from `w0`. `observer` receives each iterate and
/// may return an error measure to store in the history.
pub fn gradient_projection(
    obj: &Objective<'_>,
    w0: &VectorField,
    opts: &GradientProjectionOptions,
    mut observer: Option<&mut dyn FnMut(&VectorField) -> f64>,
) -> Result<GradientProjectionRun> {
    let masks = &obj.system.masks;
    let radius = obj.spec.radius;
    let riesz = match opts.metric {
        Metric::Sobolev => Some(obj.riesz()?),
        Metric::Euclidean => None,
    };
    let (mut w, mut projected) = project_ball(w0, radius, &obj.sobolev);
    w.constrain(masks);
    let step = match opts.step {
        StepRule::Fixed(s) => s,
        StepRule::Auto { factor } => {
            let l = curvature_estimate(obj, &w, opts.metric, riesz.as_ref(), 30)?;
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid("step", "curvature estimate is not positive"));
            }
            factor / l
        }
    };
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", "must be positive"));
    }
    let mut history = Vec::new();
    let mut increases = 0;
    let mut prev = f64::INFINITY;
    let mut n = 0;
    loop {
        let j_value = obj.evaluate(&w)?;
        if !j_value.is_finite() {
            return Err(Error::Divergence {
                iteration: n,
                value: j_value,
            });
        }
        let g = obj.gradient(&w)?;
        let (dir, grad_norm) = direction(&g, opts.metric, riesz.as_ref());
        let error = observer.as_mut().map(|f| f(&w));
        history.push(IterRecord {
            n,
            j_value,
            grad_norm,
            projected,
            error,
        });
        if j_value > prev {
            increases += 1;
            if increases >= DIVERGENCE_WINDOW {
                return Err(Error::Divergence {
                    iteration: n,
                    value: j_value,
                });
            }
        } else {
            increases = 0;
        }
        prev = j_value;
        if grad_norm <= opts.tol || n >= opts.max_iter {
            let converged = grad_norm <= opts.tol;
            return Ok(GradientProjectionRun {
                history,
                last: IterState {
                    w,
                    j_value,
                    grad_norm,
                    n,
                    projected,
                },
                step,
                converged,
            });
        }
        let (next, p) = project_ball(&w.axpy(-step, &dir), radius, &obj.sobolev);
        w = next;
        w.constrain(masks);
        projected = p;
        n += 1;
    }
}

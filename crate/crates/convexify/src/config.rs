//! Run configuration: a TOML file with one table per stage.
//!
//! Parsing is strict (unknown keys are rejected) and every numeric constraint
//! of the core modules is checked again at load, so a bad value is reported
//! with its field path before any work starts.

use std::fmt;

use convexify_core::basis::{build_basis, MAX_ORDER, MIN_SAMPLES};
use convexify_core::cwf::{build_masks, count, CwfKind, CwfSpec};
use convexify_core::forward::{CoefficientField, Inclusion, SourceSpec, TruthSpec};
use convexify_core::grid::GridSpec;
use convexify_core::objective::{ObjectiveSpec, ResidualForm};
use convexify_core::optimize::Metric;
use convexify_core::reconstruct::schedule_params;
use convexify_core::system::BoundaryMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub cwf: CwfSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Ω is `[0, 1] × [0, (n2 − 1)h]` with `h = 1/(n1 − 1)`. Padding is the
/// number of cells G adds on each side; zero selects the default extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n1: usize,
    pub n2: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub pad_bottom: usize,
    pub pad_top: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n1: 33,
            n2: 33,
            pad_left: 0,
            pad_right: 0,
            pad_bottom: 0,
            pad_top: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSection {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthSection {
    pub background: f64,
    pub inclusions: Vec<InclusionSection>,
}

impl Default for TruthSection {
    fn default() -> Self {
        let t = TruthSpec::default_truth();
        TruthSection {
            background: t.background,
            inclusions: t
                .inclusions
                .iter()
                .map(|i| InclusionSection {
                    center: [i.center.0, i.center.1],
                    radius: i.radius,
                    amplitude: i.amplitude,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    /// Number of source positions `K` on [0, 1].
    pub samples: usize,
    pub eps_width: f64,
    pub amplitude: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            samples: 64,
            eps_width: 0.125,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryModeName {
    Direct,
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub n: usize,
    pub boundary_mode: BoundaryModeName,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection {
            n: 4,
            boundary_mode: BoundaryModeName::Direct,
        }
    }
}

/// A number, or the string `"auto"` for the noise-driven schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub fn value(self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(v),
            AutoOr::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CwfSection {
    pub kind: String,
    pub omega: f64,
    pub nu: f64,
    pub d: f64,
    pub c: f64,
    pub lambda: AutoOr,
    pub gamma: AutoOr,
    /// Confine a scheduled λ to [1, 3].
    pub clamp: bool,
}

impl Default for CwfSection {
    fn default() -> Self {
        CwfSection {
            kind: CwfKind::Elliptic64.name().to_string(),
            omega: 2.0,
            nu: 2.0,
            d: 2.0,
            c: 1.0,
            lambda: AutoOr::Value(1.0),
            gamma: AutoOr::Value(1e-3),
            clamp: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Sobolev,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualName {
    Projected,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    /// Ball radius `R`.
    pub radius: f64,
    /// Fixed step ς, or `"auto"` for `step_factor / L̂`.
    pub step: AutoOr,
    pub step_factor: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub s_order: usize,
    pub initial: InitialGuess,
    pub metric: MetricName,
    pub residual: ResidualName,
    /// Depth δ of the extension cutoff. Any δ ≥ 2H keeps the Taylor profile
    /// uncut on all of Ω.
    pub cutoff_depth: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            radius: 10.0,
            step: AutoOr::Auto(AutoTag::Auto),
            step_factor: 1.0,
            max_iter: 500,
            tol: 1e-8,
            s_order: 2,
            initial: InitialGuess::Zero,
            metric: MetricName::Sobolev,
            residual: ResidualName::Projected,
            cutoff_depth: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            level: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub dump_intermediates: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".to_string(),
            dump_intermediates: false,
        }
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Parses and checks a configuration file.
pub fn validate_config(raw: &str) -> Result<RunConfig, ConfigErrors> {
    let cfg: RunConfig = toml::from_str(raw).map_err(|e| {
        ConfigErrors(vec![FieldError {
            path: "<parse>".to_string(),
            message: e.message().to_string()
                + &e.span()
                    .map(|s| format!(" (at byte {})", s.start))
                    .unwrap_or_default(),
        }])
    })?;
    let errors = cfg.check();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

impl RunConfig {
    /// Every violated constraint, in file order.
    pub fn check(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let mut push = |path: &str, message: String| {
            errs.push(FieldError {
                path: path.to_string(),
                message,
            })
        };

        let grid = self.grid_spec();
        if let Err(e) = &grid {
            push("grid", e.to_string());
        }
        if self.grid.n1.is_multiple_of(2) {
            push("grid.n1", "must be odd so x₁ = ½ is a node".to_string());
        }

        if self.truth.background > 0.0 {
            push("truth.background", "violates a₀ ≤ 0 on Ω".to_string());
        }
        for (i, inc) in self.truth.inclusions.iter().enumerate() {
            if !(inc.radius > 0.0) {
                push(
                    &format!("truth.inclusions[{i}].radius"),
                    "must be positive".to_string(),
                );
            }
            if inc.amplitude > 0.0 {
                push(
                    &format!("truth.inclusions[{i}].amplitude"),
                    "violates a₀ ≤ 0 on Ω".to_string(),
                );
            }
        }
        if let Err(e) = self.truth_spec().validate() {
            push("truth", e.to_string());
        } else if let Ok(g) = &grid {
            if let Err(e) = CoefficientField::from_truth(&self.truth_spec(), g) {
                push("truth", e.to_string());
            }
        }

        if self.source.samples < MIN_SAMPLES {
            push(
                "source.samples",
                format!("need at least {MIN_SAMPLES} source positions"),
            );
        }
        if let Ok(g) = &grid {
            if let Err(e) = self.source_spec().validate(g) {
                push("source", e.to_string());
            }
        }

        if self.basis.n == 0 || self.basis.n > MAX_ORDER {
            push(
                "basis.n",
                format!("basis cap: N must lie in 1..={MAX_ORDER}"),
            );
        } else if let Err(e) = build_basis(self.basis.n) {
            push("basis.n", e.to_string());
        }

        if CwfKind::from_name(&self.cwf.kind) != Some(CwfKind::Elliptic64) {
            push(
                "cwf.kind",
                "the inversion uses the elliptic weight \"elliptic_64\"".to_string(),
            );
        }
        let lam = self.cwf.lambda.value();
        match lam {
            Some(l) if !(l >= 0.0 && l.is_finite()) => {
                push("cwf.lambda", "must be finite and ≥ 0".to_string())
            }
            None if !(self.noise.level > 0.0) => push(
                "cwf.lambda",
                "\"auto\" needs a noise level in (0, 1)".to_string(),
            ),
            _ => {}
        }
        match self.cwf.gamma.value() {
            Some(g) if !(g >= 0.0 && g.is_finite()) => {
                push("cwf.gamma", "must be finite and ≥ 0".to_string())
            }
            None if !(self.noise.level > 0.0) => push(
                "cwf.gamma",
                "\"auto\" needs a noise level in (0, 1)".to_string(),
            ),
            _ => {}
        }
        let cwf = self.cwf_spec_with(lam.unwrap_or(1.0));
        if let Err(e) = cwf.validate() {
            push("cwf", e.to_string());
        } else if let Ok(g) = &grid {
            match build_masks(g, &cwf) {
                Ok(m) => {
                    if count(&m.omega_dc) == 0 {
                        push("cwf", "Ω_{d+c} is empty on this grid".to_string());
                    }
                    if let Ok(p) = self.resolved_params() {
                        if 2.0 * p.lam * m.m_value > convexify_core::cwf::MAX_EXPONENT {
                            push("cwf.lambda", "e^{2λξ} overflows".to_string());
                        }
                    }
                }
                Err(e) => push("cwf", e.to_string()),
            }
        }

        let o = &self.optimizer;
        if !(o.radius > 0.0) {
            push("optimizer.radius", "must be positive".to_string());
        }
        match o.step {
            AutoOr::Value(s) if !(s > 0.0 && s.is_finite()) => {
                push("optimizer.step", "must be positive".to_string())
            }
            _ => {}
        }
        if !(o.step_factor > 0.0 && o.step_factor < 2.0) {
            push("optimizer.step_factor", "must lie in (0, 2)".to_string());
        }
        if o.max_iter == 0 {
            push("optimizer.max_iter", "must be positive".to_string());
        }
        if !(o.tol >= 0.0) {
            push("optimizer.tol", "must be ≥ 0".to_string());
        }
        if !(1..=3).contains(&o.s_order) {
            push("optimizer.s_order", "must be 1, 2 or 3".to_string());
        }
        if !(o.cutoff_depth > 0.0) {
            push("optimizer.cutoff_depth", "must be positive".to_string());
        }

        if !(0.0..1.0).contains(&self.noise.level) {
            push("noise.level", "must lie in [0, 1)".to_string());
        }
        if self.output.directory.is_empty() {
            push("output.directory", "must not be empty".to_string());
        }
        errs
    }

    pub fn grid_spec(&self) -> convexify_core::Result<GridSpec> {
        let s = &self.grid;
        if s.pad_left == 0 && s.pad_right == 0 && s.pad_bottom == 0 && s.pad_top == 0 {
            GridSpec::new(s.n1, s.n2)
        } else {
            GridSpec::with_padding(s.n1, s.n2, s.pad_left, s.pad_right, s.pad_bottom, s.pad_top)
        }
    }

    pub fn truth_spec(&self) -> TruthSpec {
        TruthSpec {
            background: self.truth.background,
            inclusions: self
                .truth
                .inclusions
                .iter()
                .map(|i| Inclusion {
                    center: (i.center[0], i.center[1]),
                    radius: i.radius,
                    amplitude: i.amplitude,
                })
                .collect(),
        }
    }

    pub fn source_spec(&self) -> SourceSpec {
        SourceSpec::new(0.5, self.source.eps_width, self.source.amplitude)
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        match self.basis.boundary_mode {
            BoundaryModeName::Direct => BoundaryMode::Direct,
            BoundaryModeName::Derivative => BoundaryMode::Derivative,
        }
    }

    pub fn cwf_spec_with(&self, lam: f64) -> CwfSpec {
        CwfSpec {
            kind: CwfKind::from_name(&self.cwf.kind).unwrap_or(CwfKind::Elliptic64),
            omega_param: self.cwf.omega,
            nu: self.cwf.nu,
            lam,
            d: self.cwf.d,
            c: self.cwf.c,
            ..CwfSpec::default()
        }
    }

    /// λ and γ after resolving `"auto"` against the noise level.
    pub fn resolved_params(&self) -> convexify_core::Result<ResolvedParams> {
        let (lam, gamma) = (self.cwf.lambda.value(), self.cwf.gamma.value());
        if let (Some(lam), Some(gamma)) = (lam, gamma) {
            return Ok(ResolvedParams {
                lam,
                gamma,
                scheduled: false,
                clamped: false,
            });
        }
        let g = self.grid_spec()?;
        let m = build_masks(&g, &self.cwf_spec_with(lam.unwrap_or(1.0)))?;
        let s = schedule_params(self.noise.level, m.m_value, self.cwf.c, self.cwf.clamp)?;
        Ok(ResolvedParams {
            lam: lam.unwrap_or(s.lam),
            gamma: gamma.unwrap_or(s.gamma),
            scheduled: true,
            clamped: s.clamped,
        })
    }

    pub fn objective_spec(&self, p: &ResolvedParams) -> ObjectiveSpec {
        ObjectiveSpec {
            lam: p.lam,
            gamma: p.gamma,
            s_order: self.optimizer.s_order,
            radius: self.optimizer.radius,
            unweighted: false,
            penalty_only: false,
            form: match self.optimizer.residual {
                ResidualName::Projected => ResidualForm::Projected,
                ResidualName::Reduced => ResidualForm::Reduced,
            },
        }
    }

    pub fn metric(&self) -> Metric {
        match self.optimizer.metric {
            MetricName::Sobolev => Metric::Sobolev,
            MetricName::Euclidean => Metric::Euclidean,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub lam: f64,
    pub gamma: f64,
    pub scheduled: bool,
    pub clamped: bool,
}

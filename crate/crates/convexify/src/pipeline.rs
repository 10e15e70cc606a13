//! The four-step inversion: basis, data and system, gradient projection,
//! recovery of `a₀` and `σ`. Also the noise-level stability study.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use convexify_core::basis::{build_basis, derivative_matrix, OrthonormalBasis};
use convexify_core::cwf::{build_masks, count, RegionMasks};
use convexify_core::forward::{
    add_noise, gamma_x1, interior_truth_from_fields, solve_sample, x0_samples, CoefficientField,
    DnData, InteriorTruth,
};
use convexify_core::grid::GridSpec;
use convexify_core::objective::Objective;
use convexify_core::optimize::{
    gradient_projection, GradientProjectionOptions, GradientProjectionRun, StepRule,
};
use convexify_core::probes::random_field;
use convexify_core::reconstruct::{
    holder_fit, reconstruct_a0, recover_sigma, theoretical_rho, HolderFit,
};
use convexify_core::sobolev::h1_norm_masked;
use convexify_core::system::{
    boundary_coefficients, extend_boundary, log_transform, ExtensionField, QuasilinearSystem,
    VectorField,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AutoOr, ConfigErrors, InitialGuess, ResolvedParams, RunConfig};
use crate::io::{self, Cell, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Basis,
    Synthesis,
    System,
    Optimization,
    Reconstruction,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Basis => "basis",
            Stage::Synthesis => "synthesis",
            Stage::System => "system",
            Stage::Optimization => "optimization",
            Stage::Reconstruction => "reconstruction",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration rejected:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        source: convexify_core::Error,
    },
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PipelineError {
    /// 2 for configuration errors, 3 for numerical failures, 4 for violated
    /// invariants and 1 for file-system trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { source, .. } if source.is_numerical() => 3,
            PipelineError::Stage { .. } => 4,
            PipelineError::Io(_) => 1,
        }
    }
}

pub type PResult<T> = Result<T, PipelineError>;

trait StageExt<T> {
    fn at(self, stage: Stage) -> PResult<T>;
}

impl<T> StageExt<T> for convexify_core::Result<T> {
    fn at(self, stage: Stage) -> PResult<T> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDiagnostics {
    pub n: usize,
    pub gram_residual: f64,
    pub det_m: f64,
    pub inverse_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub samples: usize,
    pub gamma_len: usize,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub min_g0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub iterations: usize,
    pub j_initial: f64,
    pub j_final: f64,
    pub grad_norm_final: f64,
    pub step: f64,
    pub converged: bool,
    pub projected_steps: usize,
}

/// Errors against the synthetic truth on Ω_{d+c}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthErrors {
    /// `‖V − V*‖_{H¹(Ω_{d+c})}`.
    pub v_h1_omega_dc: f64,
    /// Same, divided by the error of the initial guess.
    pub v_h1_omega_dc_relative: f64,
    /// Discrete `L²(Ω_{d+c})` error of `a₀`.
    pub a0_l2_omega_dc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub params: ResolvedParams,
    pub m_value: f64,
    pub theoretical_rho: f64,
    pub omega_d_nodes: usize,
    pub omega_dc_nodes: usize,
    pub basis: BasisDiagnostics,
    pub data: DataSummary,
    /// `min u` over Ω̄ and samples; only for synthetic runs.
    pub beta_min: Option<f64>,
    pub truncation_residual: Option<f64>,
    pub history: HistorySummary,
    pub errors: Option<TruthErrors>,
    pub a0_max_abs: f64,
    pub a0_spread: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Seconds per stage. Not part of the reproducible content.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    /// The report without wall-clock times, for reproducibility checks.
    pub fn without_timings(&self) -> RunReport {
        RunReport {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub grid: GridSpec,
    pub data: DnData,
    pub truth: Option<InteriorTruth>,
    pub a0_true: Vec<f64>,
    pub extension: ExtensionField,
    pub v: VectorField,
    pub w: VectorField,
    pub a0: Vec<f64>,
    pub sigma: Vec<f64>,
    pub history: GradientProjectionRun,
    pub masks: RegionMasks,
    pub weight: Vec<f64>,
}

fn check(cfg: &RunConfig) -> PResult<()> {
    let errs = cfg.check();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ConfigErrors(errs).into())
    }
}

fn basis_stage(cfg: &RunConfig) -> PResult<(OrthonormalBasis, BasisDiagnostics)> {
    let b = build_basis(cfg.basis.n).at(Stage::Basis)?;
    let m = derivative_matrix(&b).at(Stage::Basis)?;
    let diag = BasisDiagnostics {
        n: b.len(),
        gram_residual: b.gram_residual(),
        det_m: m.det(),
        inverse_residual: m.inverse_residual(),
    };
    Ok((b, diag))
}

/// Noiseless forward solves for every source position, plus the interior
/// truth built from the same fields.
pub fn synthesize(
    cfg: &RunConfig,
    g: &GridSpec,
    masks: &RegionMasks,
    basis: &OrthonormalBasis,
) -> PResult<(DnData, InteriorTruth)> {
    let a0 = CoefficientField::from_truth(&cfg.truth_spec(), g).at(Stage::Synthesis)?;
    let src = cfg.source_spec();
    let xs = x0_samples(cfg.source.samples);
    let solved = xs
        .par_iter()
        .map(|&x0| solve_sample(&a0, &src.at(x0), g, masks))
        .collect::<convexify_core::Result<Vec<_>>>()
        .at(Stage::Synthesis)?;
    let mut fields = Vec::with_capacity(solved.len());
    let mut rows = Vec::with_capacity(solved.len());
    for (u, g0, g1) in solved {
        fields.push(u);
        rows.push((g0, g1));
    }
    let data = DnData::from_rows(xs.clone(), gamma_x1(g, masks), rows).at(Stage::Synthesis)?;
    let truth = interior_truth_from_fields(&fields, &xs, g, basis).at(Stage::Synthesis)?;
    Ok((data, truth))
}

/// Dataset with the configured noise applied.
pub fn noisy_dataset(cfg: &RunConfig, clean: &DnData) -> PResult<DnData> {
    add_noise(clean, cfg.noise.level, cfg.noise.seed).at(Stage::Synthesis)
}

/// Steps 1 to 4 on synthetic data.
pub fn run_pipeline(cfg: &RunConfig) -> PResult<RunOutcome> {
    check(cfg)?;
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let (basis, diag) = basis_stage(cfg)?;
    timings.insert("basis".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let g = cfg.grid_spec().at(Stage::Synthesis)?;
    let params = cfg.resolved_params().at(Stage::Synthesis)?;
    let masks = build_masks(&g, &cfg.cwf_spec_with(params.lam)).at(Stage::Synthesis)?;
    let (clean, truth) = synthesize(cfg, &g, &masks, &basis)?;
    let data = noisy_dataset(cfg, &clean)?;
    timings.insert("synthesis".to_string(), t.elapsed().as_secs_f64());
    invert_with(cfg, data, Some(truth), basis, diag, timings)
}

/// Steps 1 to 4 on a given dataset. The configured truth is used for error
/// reporting only.
pub fn invert(cfg: &RunConfig, data: DnData, with_truth: bool) -> PResult<RunOutcome> {
    check(cfg)?;
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let (basis, diag) = basis_stage(cfg)?;
    timings.insert("basis".to_string(), t.elapsed().as_secs_f64());
    let truth = if with_truth {
        let t = Instant::now();
        let g = cfg.grid_spec().at(Stage::Synthesis)?;
        let params = cfg.resolved_params().at(Stage::Synthesis)?;
        let masks = build_masks(&g, &cfg.cwf_spec_with(params.lam)).at(Stage::Synthesis)?;
        let (_, truth) = synthesize(cfg, &g, &masks, &basis)?;
        timings.insert("synthesis".to_string(), t.elapsed().as_secs_f64());
        Some(truth)
    } else {
        None
    };
    invert_with(cfg, data, truth, basis, diag, timings)
}

fn invert_with(
    cfg: &RunConfig,
    data: DnData,
    truth: Option<InteriorTruth>,
    basis: OrthonormalBasis,
    diag: BasisDiagnostics,
    mut timings: BTreeMap<String, f64>,
) -> PResult<RunOutcome> {
    let t = Instant::now();
    let g = cfg.grid_spec().at(Stage::System)?;
    let params = cfg.resolved_params().at(Stage::System)?;
    let masks = build_masks(&g, &cfg.cwf_spec_with(params.lam)).at(Stage::System)?;
    if data.gamma_len() != masks.gamma_columns().len() || data.samples() != cfg.source.samples {
        return Err(PipelineError::Stage {
            stage: Stage::System,
            source: convexify_core::Error::ShapeMismatch {
                what: "dataset against grid and source configuration",
            },
        });
    }
    let ld = log_transform(&data).at(Stage::System)?;
    let bc = boundary_coefficients(&ld, &basis, cfg.boundary_mode()).at(Stage::System)?;
    let extension =
        extend_boundary(&bc, &g, &masks, Some(cfg.optimizer.cutoff_depth)).at(Stage::System)?;
    let system = QuasilinearSystem::new(&basis, &g, &masks).at(Stage::System)?;
    timings.insert("system".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let obj =
        Objective::new(cfg.objective_spec(&params), &system, &extension).at(Stage::Optimization)?;
    let w0 = match cfg.optimizer.initial {
        InitialGuess::Zero => obj.zero_field(),
        InitialGuess::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_field(&obj, &mut rng, 0.5 * cfg.optimizer.radius)
        }
    };
    let opts = GradientProjectionOptions {
        step: match cfg.optimizer.step {
            AutoOr::Value(s) => StepRule::Fixed(s),
            AutoOr::Auto(_) => StepRule::Auto {
                factor: cfg.optimizer.step_factor,
            },
        },
        max_iter: cfg.optimizer.max_iter,
        tol: cfg.optimizer.tol,
        metric: cfg.metric(),
    };
    let v_star = truth.as_ref().map(|t| t.v_star.clone());
    let h = g.h;
    let run = match &v_star {
        Some(vs) => {
            let p = &extension.p;
            let dc = &masks.omega_dc;
            let mut obs = |w: &VectorField| h1_norm_masked(&w.axpy(1.0, p).axpy(-1.0, vs), dc, h);
            gradient_projection(&obj, &w0, &opts, Some(&mut obs))
        }
        None => gradient_projection(&obj, &w0, &opts, None),
    }
    .at(Stage::Optimization)?;
    let weight = obj.weight.clone();
    timings.insert("optimization".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let w = run.last.w.clone();
    let v = w.axpy(1.0, &extension.p);
    let rec = reconstruct_a0(&v, &basis, &data.x0_samples, h).at(Stage::Reconstruction)?;
    let sigma = recover_sigma(&rec.a0, &g).at(Stage::Reconstruction)?;
    timings.insert("reconstruction".to_string(), t.elapsed().as_secs_f64());

    let a0_true: Vec<f64> = (0..g.omega_len())
        .map(|q| {
            let (x1, x2) = g.omega_point(q % g.n1, q / g.n1);
            cfg.truth_spec().value(x1, x2)
        })
        .collect();
    let errors = v_star.as_ref().map(|vs| {
        let e = h1_norm_masked(&v.axpy(-1.0, vs), &masks.omega_dc, h);
        let e0 = h1_norm_masked(
            &w0.axpy(1.0, &extension.p).axpy(-1.0, vs),
            &masks.omega_dc,
            h,
        );
        let mut s = 0.0;
        for (q, &inside) in masks.omega_dc.iter().enumerate() {
            let (i, j) = (q % g.n1, q / g.n1);
            if inside && g.is_interior(i, j) {
                let d = rec.a0[q] - a0_true[q];
                s += h * h * d * d;
            }
        }
        TruthErrors {
            v_h1_omega_dc: e,
            v_h1_omega_dc_relative: if e0 > 0.0 { e / e0 } else { 0.0 },
            a0_l2_omega_dc: s.sqrt(),
        }
    });
    let hist = &run.history;
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        params,
        m_value: masks.m_value,
        theoretical_rho: theoretical_rho(cfg.cwf.c, masks.m_value),
        omega_d_nodes: count(&masks.omega_d),
        omega_dc_nodes: count(&masks.omega_dc),
        basis: diag,
        data: DataSummary {
            samples: data.samples(),
            gamma_len: data.gamma_len(),
            noise_level: data.noise_level,
            noise_seed: data.seed,
            min_g0: data.g0.iter().copied().fold(f64::INFINITY, f64::min),
        },
        beta_min: truth.as_ref().map(|t| t.beta_min),
        truncation_residual: truth.as_ref().map(|t| t.truncation_residual),
        history: HistorySummary {
            iterations: run.last.n,
            j_initial: hist.first().map_or(f64::NAN, |r| r.j_value),
            j_final: run.last.j_value,
            grad_norm_final: run.last.grad_norm,
            step: run.step,
            converged: run.converged,
            projected_steps: hist.iter().filter(|r| r.projected).count(),
        },
        errors,
        a0_max_abs: rec.a0.iter().fold(0.0, |m, x| m.max(x.abs())),
        a0_spread: rec.spread,
        sigma_min: sigma.iter().copied().fold(f64::INFINITY, f64::min),
        sigma_max: sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        timings,
    };
    Ok(RunOutcome {
        report,
        grid: g,
        data,
        truth,
        a0_true,
        extension,
        v,
        w,
        a0: rec.a0,
        sigma,
        history: run,
        masks,
        weight,
    })
}

pub const REPORT_JSON: &str = "report.json";
pub const HISTORY_CSV: &str = "history.csv";

/// Writes the report, the history and the reconstructed grids; with
/// `intermediates`, also the dataset, masks, weight, extension and `W`.
pub fn write_outcome(dir: &Path, out: &RunOutcome, intermediates: bool) -> PResult<()> {
    io::ensure_dir(dir)?;
    let g = &out.grid;
    io::write_json(&dir.join(REPORT_JSON), &out.report)?;
    let rows = out.history.history.iter().map(|r| {
        vec![
            Cell::Int(r.n),
            Cell::Real(r.j_value),
            Cell::Real(r.grad_norm),
            Cell::Real(r.error.unwrap_or(f64::NAN)),
        ]
    });
    io::write_csv(
        &dir.join(HISTORY_CSV),
        &["n", "J", "grad_norm", "err_H1_omega_dc"],
        rows,
    )?;
    io::write_grid_columns(
        &dir.join("a0.csv"),
        g,
        &["a0", "a0_true"],
        &[&out.a0, &out.a0_true],
    )?;
    io::write_grid_csv(&dir.join("sigma.csv"), g, &out.sigma)?;
    io::write_field_csv(&dir.join("V.csv"), g, &out.v)?;
    if intermediates {
        io::write_dataset(&dir.join("data"), g, &out.data)?;
        io::write_field_csv(&dir.join("p.csv"), g, &out.extension.p)?;
        io::write_field_csv(&dir.join("W.csv"), g, &out.w)?;
        if let Some(t) = &out.truth {
            io::write_field_csv(&dir.join("V_star.csv"), g, &t.v_star)?;
        }
        let flag = |m: &[bool]| {
            m.iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect::<Vec<_>>()
        };
        io::write_grid_columns(
            &dir.join("cwf.csv"),
            g,
            &["xi", "weight", "omega", "omega_d", "omega_dc", "gamma"],
            &[
                &out.masks.xi,
                &out.weight,
                &flag(&out.masks.omega),
                &flag(&out.masks.omega_d),
                &flag(&out.masks.omega_dc),
                &flag(&out.masks.gamma),
            ],
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: f64,
    pub seed: u64,
    pub err_h1_omega_dc: f64,
    pub lam: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    /// Fit over the strictly positive levels.
    pub slope: f64,
    pub intercept: f64,
    pub rho_theory: f64,
    /// Errors non-decreasing in level up to 5 % slack.
    pub monotone: bool,
}

/// Noise seed used for the `i`-th level of a study.
pub fn study_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(i as u64 + 1)
}

/// One pipeline run per level, in parallel. Level 0 reuses the noiseless data.
pub fn run_stability_study(cfg: &RunConfig, levels: &[f64]) -> PResult<StudyReport> {
    check(cfg)?;
    if levels.len() < 3 {
        return Err(PipelineError::Stage {
            stage: Stage::Synthesis,
            source: convexify_core::Error::TooFewSamples {
                got: levels.len(),
                need: 3,
            },
        });
    }
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let rows = order
        .par_iter()
        .map(|&i| {
            let mut c = cfg.clone();
            c.noise.level = levels[i];
            c.noise.seed = study_seed(cfg.noise.seed, i);
            let out = run_pipeline(&c)?;
            let e = out
                .report
                .errors
                .as_ref()
                .map_or(f64::NAN, |e| e.v_h1_omega_dc);
            Ok(StudyRow {
                level: levels[i],
                seed: c.noise.seed,
                err_h1_omega_dc: e,
                lam: out.report.params.lam,
                gamma: out.report.params.gamma,
            })
        })
        .collect::<PResult<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].err_h1_omega_dc >= 0.95 * w[0].err_h1_omega_dc);
    let positive: Vec<&StudyRow> = rows.iter().filter(|r| r.level > 0.0).collect();
    let g = cfg.grid_spec().at(Stage::Synthesis)?;
    let lam = cfg.cwf.lambda.value().unwrap_or(1.0);
    let m = build_masks(&g, &cfg.cwf_spec_with(lam))
        .at(Stage::Synthesis)?
        .m_value;
    let fit: HolderFit = holder_fit(
        &positive.iter().map(|r| r.level).collect::<Vec<_>>(),
        &positive
            .iter()
            .map(|r| r.err_h1_omega_dc)
            .collect::<Vec<_>>(),
        cfg.cwf.c,
        m,
    )
    .at(Stage::Reconstruction)?;
    Ok(StudyReport {
        rows,
        slope: fit.slope,
        intercept: fit.intercept,
        rho_theory: fit.rho_theory,
        monotone,
    })
}

pub fn write_study(dir: &Path, s: &StudyReport) -> PResult<()> {
    io::ensure_dir(dir)?;
    io::write_json(&dir.join("study.json"), s)?;
    io::write_csv(
        &dir.join("study.csv"),
        &["level", "err_H1_omega_dc"],
        s.rows
            .iter()
            .map(|r| vec![Cell::Real(r.level), Cell::Real(r.err_h1_omega_dc)]),
    )?;
    Ok(())
}

/// The assembled problem of a configuration, for the probes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: GridSpec,
    pub masks: RegionMasks,
    pub basis: OrthonormalBasis,
    pub system: QuasilinearSystem,
    pub extension: ExtensionField,
    pub truth: InteriorTruth,
    pub data: DnData,
    pub params: ResolvedParams,
}

/// Synthesizes the configured data and assembles system and extension.
pub fn build_problem(cfg: &RunConfig) -> PResult<Problem> {
    check(cfg)?;
    let (basis, _) = basis_stage(cfg)?;
    let g = cfg.grid_spec().at(Stage::Synthesis)?;
    let params = cfg.resolved_params().at(Stage::Synthesis)?;
    let masks = build_masks(&g, &cfg.cwf_spec_with(params.lam)).at(Stage::Synthesis)?;
    let (clean, truth) = synthesize(cfg, &g, &masks, &basis)?;
    let data = noisy_dataset(cfg, &clean)?;
    let ld = log_transform(&data).at(Stage::System)?;
    let bc = boundary_coefficients(&ld, &basis, cfg.boundary_mode()).at(Stage::System)?;
    let extension =
        extend_boundary(&bc, &g, &masks, Some(cfg.optimizer.cutoff_depth)).at(Stage::System)?;
    let system = QuasilinearSystem::new(&basis, &g, &masks).at(Stage::System)?;
    Ok(Problem {
        grid: g,
        masks,
        basis,
        system,
        extension,
        truth,
        data,
        params,
    })
}

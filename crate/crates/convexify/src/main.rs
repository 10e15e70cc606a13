use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use convexify::config::{validate_config, ConfigErrors, FieldError, RunConfig};
use convexify::io::{self, read_dataset, write_dataset};
use convexify::pipeline::{
    build_problem, invert, run_pipeline, run_stability_study, synthesize, write_outcome,
    write_study, PResult, PipelineError, Stage,
};
use convexify_core::basis::{build_basis, derivative_matrix};
use convexify_core::cwf::{build_masks, carleman_probe, cwf_field, CarlemanReport};
use convexify_core::objective::Objective;
use convexify_core::probes::{convexity_probe, gradient_check};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "convexify",
    version,
    about = "Convexification inversion with restricted DN data"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the noise and the probes (overrides `noise.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write datasets, masks, the weight and intermediate fields.
    #[arg(long, global = true)]
    dump_intermediates: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormality and derivative-matrix diagnostics.
    BasisReport {
        /// Largest N to report; every size from 1 up to it is listed.
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Forward solves and (noisy) DN data.
    Synth,
    /// Inversion of a dataset written by `synth`.
    Invert {
        /// Dataset directory; defaults to the output directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Skip the comparison with the configured truth.
        #[arg(long)]
        no_truth: bool,
    },
    /// Synthesis and inversion in one process.
    FullPipeline,
    /// Bregman-margin probe of strict convexity.
    ProbeConvexity {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
    },
    /// Empirical Carleman-estimate ratios.
    ProbeCarleman {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        lambdas: Vec<f64>,
    },
    /// Adjoint gradient against central differences.
    GradientCheck {
        #[arg(long, default_value_t = 5)]
        pairs: usize,
    },
    /// Reconstruction error against the noise level.
    StudyStability {
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
        levels: Vec<f64>,
    },
}

fn load_config(common: &Common) -> PResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let raw = fs::read_to_string(path).map_err(|e| {
                ConfigErrors(vec![FieldError {
                    path: path.display().to_string(),
                    message: e.to_string(),
                }])
            })?;
            validate_config(&raw)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.directory = out.display().to_string();
    }
    if let Some(seed) = common.seed {
        cfg.noise.seed = seed;
    }
    cfg.output.dump_intermediates |= common.dump_intermediates;
    let errs = cfg.check();
    if !errs.is_empty() {
        return Err(ConfigErrors(errs).into());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(&cfg.output.directory)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> PResult<()> {
    io::ensure_dir(dir)?;
    io::write_json(&dir.join(name), v)?;
    Ok(())
}

fn core<T>(stage: Stage, r: convexify_core::Result<T>) -> PResult<T> {
    r.map_err(|source| PipelineError::Stage { stage, source })
}

fn basis_report(cfg: &RunConfig, max_n: Option<usize>) -> PResult<()> {
    let top = max_n.unwrap_or(cfg.basis.n);
    let mut rows = Vec::new();
    for n in 1..=top {
        let b = core(Stage::Basis, build_basis(n))?;
        let m = core(Stage::Basis, derivative_matrix(&b))?;
        let mut max_diag: f64 = 0.0;
        let mut max_lower: f64 = 0.0;
        for i in 0..n {
            max_diag = max_diag.max((m.entry(i, i) - 1.0).abs());
            for k in 0..i {
                max_lower = max_lower.max(m.entry(i, k).abs());
            }
        }
        println!(
            "N={n} gram_residual={:.3e} det={:.15} |a_mm-1|={:.3e} |a_mk,k<m|={:.3e} inverse_residual={:.3e}",
            b.gram_residual(),
            m.det(),
            max_diag,
            max_lower,
            m.inverse_residual()
        );
        rows.push(json!({
            "n": n,
            "gram_residual": b.gram_residual(),
            "det": m.det(),
            "max_diag_deviation": max_diag,
            "max_lower": max_lower,
            "inverse_residual": m.inverse_residual(),
            "matrix": m.entries(),
        }));
    }
    write_json(&out_dir(cfg), "basis_report.json", &rows)
}

fn synth(cfg: &RunConfig) -> PResult<()> {
    let b = core(Stage::Basis, build_basis(cfg.basis.n))?;
    let g = core(Stage::Synthesis, cfg.grid_spec())?;
    let params = core(Stage::Synthesis, cfg.resolved_params())?;
    let masks = core(
        Stage::Synthesis,
        build_masks(&g, &cfg.cwf_spec_with(params.lam)),
    )?;
    let (clean, truth) = synthesize(cfg, &g, &masks, &b)?;
    let data = convexify::pipeline::noisy_dataset(cfg, &clean)?;
    let dir = out_dir(cfg);
    write_dataset(&dir, &g, &data)?;
    let summary = json!({
        "samples": data.samples(),
        "gamma_len": data.gamma_len(),
        "noise_level": data.noise_level,
        "seed": data.seed,
        "beta_min": truth.beta_min,
        "truncation_residual": truth.truncation_residual,
    });
    if cfg.output.dump_intermediates {
        io::write_field_csv(&dir.join("V_star.csv"), &g, &truth.v_star)?;
        write_dataset(&dir.join("clean"), &g, &clean)?;
    }
    println!(
        "wrote {} samples x {} Γ nodes to {}; beta_min={:.6e}",
        data.samples(),
        data.gamma_len(),
        dir.display(),
        truth.beta_min
    );
    write_json(&dir, "synth.json", &summary)
}

fn summarize(report: &convexify::pipeline::RunReport) {
    let h = &report.history;
    println!(
        "iterations={} J: {:.6e} -> {:.6e} step={:.3e} converged={}",
        h.iterations, h.j_initial, h.j_final, h.step, h.converged
    );
    if let Some(e) = &report.errors {
        println!(
            "err_H1(Ω_d+c)={:.6e} (relative {:.4}) a0_L2(Ω_d+c)={:.6e}",
            e.v_h1_omega_dc, e.v_h1_omega_dc_relative, e.a0_l2_omega_dc
        );
    }
    if let Some(b) = report.beta_min {
        println!("beta_min={b:.6e}");
    }
}

fn probe_convexity(cfg: &RunConfig, pairs: usize, lambda: f64, gamma: f64) -> PResult<()> {
    let p = build_problem(cfg)?;
    let mut spec = cfg.objective_spec(&p.params);
    let mut reports = Vec::new();
    for (lam, gam, unweighted) in [(lambda, gamma, false), (0.0, gamma, true)] {
        spec.lam = lam;
        spec.gamma = gam;
        spec.unweighted = unweighted;
        let obj = core(
            Stage::Optimization,
            Objective::new(spec, &p.system, &p.extension),
        )?;
        let r = core(
            Stage::Optimization,
            convexity_probe(&obj, pairs, cfg.noise.seed),
        )?;
        let min_margin = r.margins.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "lambda={lam} gamma={gam} unweighted={unweighted} fraction_nonneg={} min_margin={min_margin:.6e}",
            r.fraction_nonneg
        );
        reports.push(json!({
            "lambda": lam,
            "gamma": gam,
            "unweighted": unweighted,
            "fraction_nonneg": r.fraction_nonneg,
            "min_margin": min_margin,
            "margins": r.margins,
            "gaps": r.gaps,
            "seed": r.seed,
        }));
    }
    write_json(&out_dir(cfg), "convexity.json", &reports)
}

fn probe_carleman(cfg: &RunConfig, trials: usize, lambdas: &[f64]) -> PResult<()> {
    let g = core(Stage::Synthesis, cfg.grid_spec())?;
    let masks = core(Stage::Synthesis, build_masks(&g, &cfg.cwf_spec_with(1.0)))?;
    let reps: Vec<CarlemanReport> = core(
        Stage::Synthesis,
        carleman_probe(&g, &masks, trials, lambdas, cfg.noise.seed),
    )?;
    let dir = out_dir(cfg);
    let mut rows = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![masks.xi.clone()];
    let mut names = vec!["xi".to_string()];
    for r in &reps {
        println!(
            "lambda={} min_ratio={:.6e} median_ratio={:.6e}",
            r.lambda, r.min_ratio, r.median_ratio
        );
        rows.push(json!({
            "lambda": r.lambda,
            "min_ratio": r.min_ratio,
            "median_ratio": r.median_ratio,
            "trials": r.trials,
            "seed": r.seed,
        }));
        let phi = core(
            Stage::Synthesis,
            cwf_field(&masks, &cfg.cwf_spec_with(r.lambda)),
        )?;
        cols.push(phi);
        names.push(format!("phi2_lambda_{}", r.lambda));
    }
    write_json(&dir, "carleman.json", &rows)?;
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let cols: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    io::write_grid_columns(&dir.join("cwf.csv"), &g, &names, &cols)?;
    Ok(())
}

fn run_gradient_check(cfg: &RunConfig, pairs: usize) -> PResult<()> {
    let p = build_problem(cfg)?;
    let obj = core(
        Stage::Optimization,
        Objective::new(cfg.objective_spec(&p.params), &p.system, &p.extension),
    )?;
    let r = core(
        Stage::Optimization,
        gradient_check(&obj, pairs, cfg.noise.seed),
    )?;
    println!("max_rel_error={:.3e} over {pairs} pairs", r.max_rel_error);
    write_json(
        &out_dir(cfg),
        "gradient_check.json",
        &json!({
            "rel_errors": r.rel_errors,
            "max_rel_error": r.max_rel_error,
            "seed": r.seed,
        }),
    )
}

fn run(cli: Cli) -> PResult<()> {
    let cfg = load_config(&cli.common)?;
    match cli.cmd {
        Command::BasisReport { max_n } => basis_report(&cfg, max_n),
        Command::Synth => synth(&cfg),
        Command::Invert { data, no_truth } => {
            let dir = data.unwrap_or_else(|| out_dir(&cfg));
            let (_, d) = read_dataset(&dir)?;
            let out = invert(&cfg, d, !no_truth)?;
            summarize(&out.report);
            write_outcome(&out_dir(&cfg), &out, cfg.output.dump_intermediates)
        }
        Command::FullPipeline => {
            let out = run_pipeline(&cfg)?;
            summarize(&out.report);
            write_outcome(&out_dir(&cfg), &out, cfg.output.dump_intermediates)
        }
        Command::ProbeConvexity {
            pairs,
            lambda,
            gamma,
        } => probe_convexity(&cfg, pairs, lambda, gamma),
        Command::ProbeCarleman { trials, lambdas } => probe_carleman(&cfg, trials, &lambdas),
        Command::GradientCheck { pairs } => run_gradient_check(&cfg, pairs),
        Command::StudyStability { levels } => {
            let s = run_stability_study(&cfg, &levels)?;
            for r in &s.rows {
                println!(
                    "level={:e} err_H1(Ω_d+c)={:.6e}",
                    r.level, r.err_h1_omega_dc
                );
            }
            println!(
                "slope={:.4} rho_theory={:.4} monotone={}",
                s.slope, s.rho_theory, s.monotone
            );
            write_study(&out_dir(&cfg), &s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

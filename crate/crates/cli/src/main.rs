//! Command-line front end: frame inspection, image degradation, SF/AF
//! restoration runs, and the small-size dense-oracle self check.
//!
//! Exit codes: 0 ok, 2 frame error, 3 I/O error, 4 solver error.

mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use framedeconv_core::error::{Error, Result};
use framedeconv_core::frame::{
    build_filter_bank, build_from_descriptor, FrameDescriptor, FrameOperator, SemiOrthogonal,
    DEFAULT_TIGHT_TOL,
};
use framedeconv_core::image_io::{read_fsig, read_pgm, write_fsig, write_pgm};
use framedeconv_core::restore::{degrade, snr, ssim, Metrics, NoiseKind, RestorationProblem};
use framedeconv_core::rng::CounterRng;
use framedeconv_core::signal::Shape;
use framedeconv_core::solver::{
    dense_oracle_solve, precompute_inverse, solve_quadratic, ConvolutiveTerm, FrameTerm,
    ProblemForm, SolverProblem,
};
use framedeconv_core::{MimoFilter, ScalarPotential, SeparableFunction, Signal, SisoFilter};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "framedeconv",
    about = "Frame-based variational deconvolution: construct frames, degrade images, run SF/AF restorations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print frame structure, bounds, and the tightness certificate.
    FrameInfo {
        /// Frame descriptor JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Blur and degrade the input image; write the observation and a sidecar.
    Degrade {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Restore an observation; write the image, metrics, and the trace.
    Restore {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the frequency-domain quadratic solver against dense direct
    /// solves on small instances.
    OracleCheck {
        /// Seed for the probe signals.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::FrameInfo { config } => cmd_frame_info(&config),
        Command::Degrade { config, out, seed } => cmd_degrade(&config, out, seed),
        Command::Restore { config, out, seed } => cmd_restore(&config, out, seed),
        Command::OracleCheck { seed } => cmd_oracle_check(seed),
    };
    match outcome {
        Ok(()) => (),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) => 3,
        Error::Preconditioner(_)
        | Error::StalePreconditioner(_)
        | Error::Solver(_)
        | Error::OracleTooLarge(_) => 4,
        _ => 2,
    }
}

fn load_image(path: &Path) -> Result<Signal> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        Some("fsig") => read_fsig(path),
        other => Err(Error::Parse(format!(
            "unknown image extension {:?} (expected .pgm or .fsig)",
            other
        ))),
    }
}

fn cmd_frame_info(descriptor_path: &Path) -> Result<()> {
    let desc = FrameDescriptor::from_path(descriptor_path)?;
    let base = descriptor_path.parent().unwrap_or_else(|| Path::new("."));
    let frame = build_from_descriptor(&desc, base, None)?;
    let bounds = frame.bounds(DEFAULT_TIGHT_TOL)?;
    println!("kind: {}", desc.kind);
    println!("shape: {:?}", frame.shape());
    println!(
        "D: {} (effective {}), N: {}, Q: {}, mu_U: {}",
        frame.decimation(),
        frame.d_eff(),
        frame.bank_channels(),
        frame.q_channels(),
        frame.mu_u()
    );
    println!("redundancy: {}", frame.redundancy());
    println!(
        "bounds: [{:.12}, {:.12}] (ratio {:.6})",
        bounds.lower,
        bounds.upper,
        bounds.upper / bounds.lower
    );
    println!("tight: {}", bounds.tight);
    println!(
        "worst-case bins: argmin {}, argmax {}",
        bounds.argmin_bin, bounds.argmax_bin
    );
    Ok(())
}

#[derive(Serialize)]
struct DegradeReport<'a> {
    kind: &'a str,
    alpha: Option<f64>,
    seed: u64,
    snr_vs_original: Option<f64>,
}

fn noise_kind_name(kind: &NoiseKind) -> (&'static str, Option<f64>) {
    match kind {
        NoiseKind::None => ("none", None),
        NoiseKind::Poisson { alpha } => ("poisson", Some(*alpha)),
        NoiseKind::Laplace { alpha, .. } => ("laplace", Some(*alpha)),
    }
}

fn cmd_degrade(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let out_dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let ybar = load_image(&cfg.input_image)?;
    let blur = cfg.blur.to_operator(ybar.shape().rank())?;
    let kind = cfg.noise.to_kind()?;
    let seed = seed.unwrap_or(cfg.noise.seed);
    let z = degrade(&ybar, &blur, &kind, seed)?;
    write_fsig(&out_dir.join("degraded.fsig"), &z)?;
    let preview = kind.rescale_to_image(&z);
    if preview.shape().rank() == 2 {
        write_pgm(&out_dir.join("degraded.pgm"), &preview)?;
    }
    let snr_db = snr(&ybar, &preview)?;
    let (name, alpha) = noise_kind_name(&kind);
    let report = DegradeReport {
        kind: name,
        alpha,
        seed,
        snr_vs_original: snr_db.is_finite().then_some(snr_db),
    };
    let line = serde_json::to_string(&report).expect("report serializes");
    std::fs::write(out_dir.join("degrade.json"), format!("{line}\n"))?;
    println!("{line}");
    Ok(())
}

fn cmd_restore(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let out_dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let ybar = load_image(&cfg.input_image)?;
    let blur = cfg.blur.to_operator(ybar.shape().rank())?;
    let kind = cfg.noise.to_kind()?;
    let seed = seed.unwrap_or(cfg.noise.seed);
    let z = match &cfg.observation {
        Some(path) => load_image(path)?,
        None => degrade(&ybar, &blur, &kind, seed)?,
    };
    let desc = FrameDescriptor::from_path(&cfg.frame)?;
    let base = cfg.frame.parent().unwrap_or_else(|| Path::new("."));
    let frame = build_from_descriptor(&desc, base, Some(ybar.shape()))?;
    let problem = RestorationProblem::build_weighted(
        z,
        blur,
        frame,
        cfg.tau,
        cfg.form.to_form(),
        kind,
        (cfg.r#box[0], cfg.r#box[1]),
        cfg.solver.weights,
    )?;
    let params = cfg.solver.to_params()?;
    let result = problem.solve(&params)?;
    let restored = problem.restored_image(&result);
    write_fsig(&out_dir.join("restored.fsig"), &restored)?;
    if restored.shape().rank() == 2 {
        write_pgm(&out_dir.join("restored.pgm"), &restored)?;
    }
    let metrics = Metrics {
        snr_db: snr(&ybar, &restored)?,
        ssim: ssim(&ybar, &restored)?,
        iterations: result.iterations,
        seconds: result.trace.entries.last().map(|e| e.seconds).unwrap_or(0.0),
    };
    let line = metrics.to_json(cfg.record_timing);
    std::fs::write(out_dir.join("metrics.json"), format!("{line}\n"))?;
    std::fs::write(
        out_dir.join("trace.jsonl"),
        result.trace.to_jsonl(cfg.record_timing),
    )?;
    println!("{line}");
    if !result.converged {
        eprintln!(
            "note: stopped at max_iter = {} without reaching tol = {}",
            params.max_iter, params.tol
        );
    }
    Ok(())
}

fn random_signal(shape: Shape, rng: &mut CounterRng) -> Signal {
    Signal::from_shape(shape, (0..shape.len()).map(|_| rng.next_symmetric()).collect())
        .expect("shape matches")
}

/// A small left-invertible 3-channel bank with 2-fold decimation (an
/// identity block plus one mixing row), lifted separably in 2D.
fn oracle_bank(shape: Shape, rng: &mut CounterRng) -> Result<FrameOperator> {
    let mix0 = SisoFilter::from_taps_1d(0, vec![0.4 * rng.next_symmetric(), 0.3])?;
    let mix1 = SisoFilter::from_taps_1d(-1, vec![0.2, 0.5 * rng.next_symmetric()])?;
    let bank = MimoFilter::new(
        3,
        2,
        vec![
            SisoFilter::identity(1),
            SisoFilter::zero(1),
            SisoFilter::zero(1),
            SisoFilter::identity(1),
            mix0,
            mix1,
        ],
    )?;
    build_filter_bank(&bank, 2, shape)
}

fn oracle_case(name: &str, mode: ProblemForm, shape: Shape, rng: &mut CounterRng) -> Result<f64> {
    let frame = oracle_bank(shape, rng)?;
    let rank = shape.rank();
    let blur = match rank {
        1 => SisoFilter::from_taps_1d(-1, vec![0.25, 0.5, 0.25])?,
        _ => SisoFilter::outer(
            &SisoFilter::from_taps_1d(-1, vec![0.25, 0.5, 0.25])?,
            &SisoFilter::from_taps_1d(-1, vec![0.25, 0.5, 0.25])?,
        )?,
    };
    let l1 = SeparableFunction::Broadcast(ScalarPotential::abs_shifted(1.0, 0.0)?);
    let boxp = SeparableFunction::Broadcast(ScalarPotential::box_indicator(0.0, 1.0)?);
    let t1 = ConvolutiveTerm::new(blur, l1.clone(), 1.3, 2, shape)?;
    let t2 = ConvolutiveTerm::identity(boxp, 0.7, 2, shape)?;
    let problem = SolverProblem::new(frame, vec![t1, t2], vec![FrameTerm::new(l1, 1.9)?])?;
    let pre = precompute_inverse(mode, problem.frame(), problem.conv_terms(), problem.kappa())?;
    let p = vec![random_signal(shape, rng), random_signal(shape, rng)];
    let r = vec![random_signal(problem.frame().coeff_shape(), rng)];
    let fast = solve_quadratic(&problem, &pre, &p, &r)?;
    let slow = dense_oracle_solve(&problem, mode, &p, &r)?;
    let rel = fast.sub(&slow).norm() / slow.norm().max(1e-30);
    let status = if rel < 1e-8 { "PASS" } else { "FAIL" };
    println!("oracle-check {name}: {status} (relative error {rel:.3e})");
    Ok(rel)
}

fn cmd_oracle_check(seed: u64) -> Result<()> {
    let mut rng = CounterRng::new(seed);
    let cases = [
        ("sf-1d-n32-d2", ProblemForm::Synthesis, Shape::One(32)),
        ("af-1d-n32-d2", ProblemForm::Analysis, Shape::One(32)),
        ("sf-2d-16x16-d2", ProblemForm::Synthesis, Shape::Two(16, 16)),
        ("af-2d-16x16-d2", ProblemForm::Analysis, Shape::Two(16, 16)),
    ];
    let mut worst: f64 = 0.0;
    for (name, mode, shape) in cases {
        worst = worst.max(oracle_case(name, mode, shape, &mut rng)?);
    }
    // A plain identity frame sanity case: solution is the weighted average.
    let frame = FrameOperator::new(
        MimoFilter::identity(1, 1),
        SemiOrthogonal::Identity,
        1,
        Shape::One(16),
    )?;
    let l1 = SeparableFunction::Broadcast(ScalarPotential::abs_shifted(1.0, 0.0)?);
    let problem = SolverProblem::new(frame, vec![], vec![FrameTerm::new(l1, 2.0)?])?;
    let pre = precompute_inverse(
        ProblemForm::Synthesis,
        problem.frame(),
        problem.conv_terms(),
        problem.kappa(),
    )?;
    let r = vec![random_signal(Shape::One(16), &mut rng)];
    let fast = solve_quadratic(&problem, &pre, &[], &r)?;
    let rel = fast.sub(&r[0]).norm() / r[0].norm();
    println!(
        "oracle-check identity-average: {} (relative error {rel:.3e})",
        if rel < 1e-12 { "PASS" } else { "FAIL" }
    );
    worst = worst.max(if rel < 1e-12 { 0.0 } else { rel });
    if worst >= 1e-8 {
        return Err(Error::Solver(format!(
            "dense-oracle equivalence failed (worst relative error {worst:.3e})"
        )));
    }
    Ok(())
}

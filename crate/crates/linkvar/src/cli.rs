//! Configuration-driven pipeline: grid -> spectrum -> constants ->
//! geometry checks -> solve -> Maxwell bridge -> reports.
//!
//! Exit codes: 0 success, 2 validation error, 3 solver failure,
//! 4 geometry failure. Human diagnostics go to stderr; a machine JSON
//! report is always written, including on failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::{config_sha256, RunConfig};
use crate::error::{Error, Result};
use crate::functional::FunctionalContext;
use crate::geometry;
use crate::grid::{assemble_operator, build_grid, StateVector};
use crate::report::{ErrorPayload, Report};
use crate::solver::{self, LinkingData};
use crate::spectral::eigendecompose;
use crate::{formats, maxwell, nonlinearity, toylink};

#[derive(Parser)]
#[command(name = "linkvar", version, about = "Linking-minimax solver and verification suite for strongly indefinite variational problems")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file path.
    #[arg(long, global = true, default_value = "linkvar.cfg")]
    config: PathBuf,
    /// Output directory (overrides the config; LINKVAR_OUT overrides both).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker count override (recorded in reports; stages run
    /// deterministically regardless).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress lines on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Eigendecomposition and spectrum export.
    Spectrum,
    /// Nonlinearity axiom verification report.
    VerifyNonlinearity,
    /// Certified constants: kappa, mu0, growth/lower constants, the lambda
    /// threshold, linking radii and the K-search.
    Constants,
    /// Composite linking-geometry verification.
    CheckGeometry,
    /// Full linking minimax solve.
    Solve,
    /// Maxwell reconstruction, identity checks and L(t).
    Maxwell,
    /// Finite-dimensional ordering-chain validation.
    Toy,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::VerifyNonlinearity => "verify-nonlinearity",
            Command::Constants => "constants",
            Command::CheckGeometry => "check-geometry",
            Command::Solve => "solve",
            Command::Maxwell => "maxwell",
            Command::Toy => "toy",
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    run(&cli)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidSpec(_)
        | Error::Format(_)
        | Error::Io(_)
        | Error::InvalidResolution { .. }
        | Error::ShapeMismatch { .. }
        | Error::LambdaNotZero { .. }
        | Error::DegenerateNonlinearity
        | Error::NonCoerciveF { .. }
        | Error::NotMaxwellCase => 2,
        Error::GeometryFailure(_)
        | Error::NoAnticoercivity { .. }
        | Error::SpectralGapViolation { .. }
        | Error::NoNegativeSpectrum
        | Error::RhoTooLarge { .. } => 4,
        Error::InnerDivergence { .. }
        | Error::LineSearchStall
        | Error::CollapseToZero { .. }
        | Error::MaxIterExceeded(_)
        | Error::UnresolvedComponent { .. } => 3,
    }
}

fn run(cli: &Cli) -> i32 {
    let name = cli.command.name();
    match dispatch(cli) {
        Ok(()) => 0,
        Err((err, report_ctx)) => {
            eprintln!("linkvar {name}: error: {err}");
            if let Some((out_dir, sha, seed)) = report_ctx {
                let payload = ErrorPayload {
                    error: err.to_string(),
                };
                let report = Report::new(name, &sha, seed, payload);
                let _ = std::fs::create_dir_all(&out_dir);
                let _ = report.write(&out_dir.join(format!("{name}.json")));
            }
            exit_code_for(&err)
        }
    }
}

type ReportCtx = Option<(PathBuf, String, u64)>;

fn dispatch(cli: &Cli) -> std::result::Result<(), (Error, ReportCtx)> {
    // config and overrides; failures here have no report context yet
    let (mut cfg, text) = RunConfig::load(&cli.config).map_err(|e| (e, None))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Ok(env_out) = std::env::var("LINKVAR_OUT") {
        if !env_out.is_empty() {
            cfg.out_dir = PathBuf::from(env_out);
        }
    }
    let sha = config_sha256(&text);
    let ctx: ReportCtx = Some((cfg.out_dir.clone(), sha.clone(), cfg.seed));
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| (Error::Io(e), ctx.clone()))?;
    execute(cli.command, &cfg, &sha, cli.quiet).map_err(|e| (e, ctx))
}

struct Stage<'a> {
    cfg: &'a RunConfig,
    sha: &'a str,
    quiet: bool,
}

impl Stage<'_> {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn out(&self, file: &str) -> PathBuf {
        self.cfg.out_dir.join(file)
    }
}

fn execute(cmd: Command, cfg: &RunConfig, sha: &str, quiet: bool) -> Result<()> {
    let stage = Stage { cfg, sha, quiet };
    match cmd {
        Command::VerifyNonlinearity => {
            let spec = cfg.problem_spec()?;
            let report = nonlinearity::verify_axioms(&spec.nonlinearity, spec.lambda);
            stage.say(&format!(
                "nonlinearity axioms: {}",
                if report.all_pass { "all pass" } else { "FAILURES" }
            ));
            Report::new("verify-nonlinearity", sha, cfg.seed, &report)
                .write(&stage.out("nonlinearity.json"))?;
            if !report.all_pass {
                return Err(Error::InvalidSpec(
                    "nonlinearity axiom verification failed (see nonlinearity.json)".into(),
                ));
            }
            Ok(())
        }
        Command::Toy => {
            let tp = toylink::ToyProblem::new(
                cfg.toy_n_plus,
                cfg.toy_n_minus,
                cfg.toy_p,
                cfg.toy_q,
                cfg.toy_lambda,
            )?;
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            let chain = toylink::toy_chain(
                &tp,
                cfg.toy_directions,
                cfg.toy_density,
                cfg.toy_samples,
                &mut rng,
            )?;
            stage.say(&format!(
                "toy chain: inf_S J = {:.9} <= c_upper = {:.9} <= inf_N J = {:.9}  ({})",
                chain.inf_sphere,
                chain.c_upper,
                chain.nehari_infimum,
                if chain.chain_ok { "ok" } else { "VIOLATED" }
            ));
            Report::new("toy", sha, cfg.seed, &chain).write(&stage.out("toy.json"))?;
            if !chain.chain_ok {
                return Err(Error::GeometryFailure("toy ordering chain violated".into()));
            }
            Ok(())
        }
        _ => execute_pde(cmd, &stage),
    }
}

fn execute_pde(cmd: Command, stage: &Stage<'_>) -> Result<()> {
    let cfg = stage.cfg;
    let sha = stage.sha;
    let spec = cfg.problem_spec()?;
    let grid = build_grid(&spec, cfg.nr, cfg.nz, cfg.rmax, cfg.zhalf)?;
    let op = assemble_operator(&spec, &grid);
    let split = eigendecompose(&op, &grid)?;
    stage.say(&format!(
        "spectrum: {} resolved modes, n_minus = {}, mu0 = {:.6}",
        split.resolved(),
        split.n_minus(),
        split.mu0()
    ));

    if cmd == Command::Spectrum {
        std::fs::write(
            stage.out("spectrum.csv"),
            formats::spectrum_to_csv(split.eigvals()),
        )?;
        Report::new("spectrum", sha, cfg.seed, split.summary())
            .write(&stage.out("spectrum.json"))?;
        return Ok(());
    }

    let ctx = FunctionalContext::new(&grid, &split, &op, &spec);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let geo = geometry::verify_geometry(&ctx, &cfg.geometry, &mut rng)?;
    stage.say(&format!(
        "geometry: r = {:.4}, R = {:.4}, delta = {:.4}, lambda_max = {:.6}, (A3) margin = {:.3e}",
        geo.constants.r_link,
        geo.constants.r_upper,
        geo.constants.delta_link,
        geo.constants.lambda_max,
        geo.a3_margin
    ));

    match cmd {
        Command::Constants => {
            Report::new("constants", sha, cfg.seed, &geo.constants)
                .write(&stage.out("constants.json"))?;
            Ok(())
        }
        Command::CheckGeometry => {
            Report::new("check-geometry", sha, cfg.seed, &geo)
                .write(&stage.out("geometry.json"))?;
            if !geo.a3_pass {
                return Err(Error::GeometryFailure(format!(
                    "(A3) composite check failed with margin {:.3e}",
                    geo.a3_margin
                )));
            }
            Ok(())
        }
        Command::Solve | Command::Maxwell => {
            let linking = LinkingData {
                r_link: geo.constants.r_link,
                inf_sphere: geo.constants.inf_sphere,
                r_upper: geo.constants.r_upper,
                delta: geo.constants.delta_link,
            };
            let u_star: StateVector;
            let mut solved: Option<solver::SolveReport> = None;
            if cmd == Command::Maxwell && cfg.input_snapshot.is_some() {
                let path = cfg.input_snapshot.as_ref().expect("checked");
                let (nr, nz, values) = formats::read_snapshot(path)?;
                if nr != grid.nr || nz != grid.nz {
                    return Err(Error::ShapeMismatch {
                        expected: grid.len(),
                        got: nr * nz,
                    });
                }
                u_star = StateVector::new(values);
            } else {
                let report = solver::solve(&ctx, &linking, &cfg.solver, &mut rng)?;
                stage.say(&format!(
                    "solve: J = {:.8}, cerami residual = {:.3e}, tau = {:.4} (delta/2 = {:.4})",
                    report.j_value,
                    report.cerami_residual,
                    report.tau_norm_value,
                    report.delta_half
                ));
                std::fs::write(
                    stage.out("solution.csv"),
                    formats::field_to_csv(&grid, report.u_star.values()),
                )?;
                formats::write_snapshot(
                    &stage.out("solution.snapshot"),
                    grid.nr,
                    grid.nz,
                    report.u_star.values(),
                )?;
                Report::new("solve", sha, cfg.seed, &report).write(&stage.out("solve.json"))?;
                u_star = report.u_star.clone();
                solved = Some(report);
            }
            if cmd == Command::Solve {
                return Ok(());
            }
            let field = maxwell::reconstruct_e(&spec, &grid, &u_star, cfg.n_phi, cfg.omega)?;
            let energy = maxwell::energy_match(&ctx, &u_star, &field)?;
            let div_residual = maxwell::divergence_residual(&field, cfg.lattice_density);
            let series = maxwell::em_energy_l(&ctx, &u_star, cfg.omega, cfg.t_samples)?;
            let l0 = series.values[0];
            let max_drift = series
                .values
                .iter()
                .fold(0.0_f64, |m, v| m.max((v - l0).abs()));
            stage.say(&format!(
                "maxwell: E(E) = {:.8}, J(u) = {:.8}, gap = {:.3e}, div residual = {:.3e}, max |L(t)-L(0)| = {:.3e}",
                energy.e_value, energy.j_value, energy.relative_gap, div_residual, max_drift
            ));
            std::fs::write(
                stage.out("field3.csv"),
                formats::field3_to_csv(&field.points, &field.components),
            )?;
            std::fs::write(
                stage.out("lt.csv"),
                formats::lt_series_to_csv(&series.times, &series.values),
            )?;
            #[derive(serde::Serialize)]
            struct MaxwellReport<'a> {
                energy: &'a maxwell::EnergyMatch,
                divergence_residual: f64,
                lattice_density: usize,
                n_phi: usize,
                omega: f64,
                l0: f64,
                max_l_drift: f64,
                variation_coefficient: f64,
                solve: Option<&'a solver::SolveReport>,
            }
            let payload = MaxwellReport {
                energy: &energy,
                divergence_residual: div_residual,
                lattice_density: cfg.lattice_density,
                n_phi: cfg.n_phi,
                omega: cfg.omega,
                l0,
                max_l_drift: max_drift,
                variation_coefficient: series.variation_coefficient,
                solve: solved.as_ref(),
            };
            Report::new("maxwell", sha, cfg.seed, payload).write(&stage.out("maxwell.json"))?;
            Ok(())
        }
        Command::Spectrum | Command::VerifyNonlinearity | Command::Toy => unreachable!(),
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use pnpflow::degrade::{DataTerm, OperatorKind};
use pnpflow::flowfield::{write_checkpoint, GaussianOracleField, VectorField};
use pnpflow::fmtrain::oracle_grid;
use pnpflow::harness::{
    ablate, format_psnr, load_field, psnr, run_experiment, run_seed, test_problem, train_field, write_image, Axis,
    ExperimentConfig,
};
use pnpflow::schedule::{BoundCase, BoundInputs};
use pnpflow::sdelab::{
    convergence_certificate, discrete_vs_sde, measured_field_lipschitz, measured_grad_bound, simulate_ensemble,
    uniform_grid, DiscrepancyOptions, PathEnsemble, SdeProcess,
};
use pnpflow::solver::{cauchy_diagnostic, restore};
use pnpflow::{Error, RngStream, Tensor};

/// Flow-matching plug-and-play restoration: training, restoration,
/// experiments, ablations and continuous-limit diagnostics.
#[derive(Parser, Debug)]
#[command(name = "pnpflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seeds with this one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lifts the cap on the extrapolation coefficient.
    #[arg(long)]
    unsafe_h: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
            if let Some(t) = cfg.train.as_mut() {
                t.seed = seed;
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if self.unsafe_h {
            cfg.solver.unsafe_h = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Result<PathBuf> {
        if cfg.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("no output directory: pass --out or set out_dir".into()).into());
        }
        fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
        Ok(cfg.out_dir.clone())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trains a flow-matching field from the [model] and [train] sections.
    Train(Common),
    /// Restores one test image and writes its trajectory.
    Restore {
        #[command(flatten)]
        common: Common,
        /// Test image index within the seed.
        #[arg(long, default_value_t = 0)]
        image: usize,
    },
    /// Runs the full experiment over every seed and image.
    Experiment(Common),
    /// Repeats the experiment along one axis.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Simulates the continuous surrogate from the warm-up iterate.
    SimulateSde {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sde: SdeArgs,
    },
    /// Checks the convergence inequality on a simulated ensemble.
    CertifyBounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sde: SdeArgs,
        /// Regularity class; strongly-convex for denoising, convex otherwise.
        #[arg(long)]
        case: Option<BoundCase>,
    },
    /// Dumps the exact field of an isotropic Gaussian on a grid.
    OracleField {
        /// Comma-separated mean, one entry per dimension (two for a grid).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,-1")]
        mean: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        std: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 10)]
        side: usize,
        /// Comma-separated flow times in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,0.95")]
        times: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SdeArgs {
    #[arg(long, default_value_t = 200)]
    paths: usize,
    /// Grid intervals over the surrogate's horizon.
    #[arg(long, default_value_t = 64)]
    points: usize,
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    Ok(())
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let out = common.out_dir(&cfg)?;
    let data = cfg.data.open()?;
    let field = train_field(&cfg, &data)?;
    let path = out.join("field.ckpt");
    write_checkpoint(&path, &field)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_restore(common: &Common, image: usize) -> Result<()> {
    let cfg = common.load()?;
    let out = common.out_dir(&cfg)?;
    let data = cfg.data.open()?;
    let field = load_field(&cfg, &data)?;
    let seed = first_seed(&cfg);
    let (clean, problem) = test_problem(&cfg, &data, seed, image)?;
    let solver = cfg.solver.build(cfg.task, run_seed(seed, image))?;
    let run = restore(&problem, field.as_ref(), &solver, Some(&clean))?;
    write_text(&out.join("trajectory.csv"), &run.trajectory.to_csv())?;
    if let Some((step, reason)) = run.divergence {
        return Err(Error::Diverged { step, reason }.into());
    }
    let restored = run.final_state();
    if clean.image_dims().is_ok() {
        write_image(&out.join("clean.pgm"), &clean)?;
        write_image(&out.join("restored.pgm"), restored)?;
        write_image(&out.join("initial.pgm"), &run.trajectory.records[0].state)?;
    }
    let cauchy = cauchy_diagnostic(&run.trajectory)?;
    println!(
        "seed {seed} image {image}: psnr {} -> {} dB, step sum {:.4}",
        format_psnr(psnr(&clean, &run.trajectory.records[0].state)?),
        format_psnr(psnr(&clean, restored)?),
        cauchy.total()
    );
    Ok(())
}

fn cmd_experiment(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    common.out_dir(&cfg)?;
    let report = run_experiment(&cfg)?;
    let a = &report.aggregate;
    println!(
        "psnr {} +- {:.3} dB over {} seeds (initial {}), config {}",
        format_psnr(a.psnr.mean),
        a.psnr.std,
        cfg.seeds.len(),
        format_psnr(a.psnr_initial.mean),
        &report.config_hash[..12]
    );
    Ok(())
}

fn cmd_ablate(common: &Common, axis: Axis, values: &[f64]) -> Result<()> {
    let cfg = common.load()?;
    let out = common.out_dir(&cfg)?;
    let table = ablate(&cfg, axis, values, Some(&out))?;
    print!("{}", table.to_csv());
    print!("{}", table.verdicts_text());
    Ok(())
}

struct Surrogate {
    cfg: ExperimentConfig,
    field: Box<dyn VectorField>,
    problem: pnpflow::degrade::FidelityProblem,
    clean: Tensor,
    anchor: Tensor,
}

/// The first test problem of the seed and its iterate at the warm-up index.
fn surrogate_setup(common: &Common) -> Result<Surrogate> {
    let cfg = common.load()?;
    let data = cfg.data.open()?;
    let field = load_field(&cfg, &data)?;
    let seed = first_seed(&cfg);
    let (clean, problem) = test_problem(&cfg, &data, seed, 0)?;
    let solver = cfg.solver.build(cfg.task, run_seed(seed, 0))?;
    if solver.warmup >= solver.schedule.iterations() {
        bail!(Error::Config("the warm-up index leaves no iterations to simulate".into()));
    }
    let run = restore(&problem, field.as_ref(), &solver, Some(&clean))?;
    if let Some((step, reason)) = run.divergence {
        return Err(Error::Diverged { step, reason }.into());
    }
    let anchor = run.trajectory.state(solver.warmup).expect("warm-up within the run").clone();
    Ok(Surrogate {
        cfg,
        field,
        problem,
        clean,
        anchor,
    })
}

fn build_process<'a>(s: &'a Surrogate) -> Result<SdeProcess<'a>> {
    let solver = s.cfg.solver.build(s.cfg.task, 0)?;
    let mut p = SdeProcess::from_schedule(s.field.as_ref(), &s.problem, &solver.schedule, solver.warmup)?;
    if solver.schedule.max_h() > 0.0 {
        p = p.with_schedule_alpha(&solver.schedule, solver.warmup)?;
    }
    Ok(p)
}

fn simulate(s: &Surrogate, process: &SdeProcess<'_>, sde: &SdeArgs) -> Result<PathEnsemble> {
    let grid = uniform_grid(process.t0, process.t_end, sde.points);
    Ok(simulate_ensemble(process, &s.anchor, &grid, sde.paths, first_seed(&s.cfg))?)
}

fn cmd_simulate_sde(common: &Common, sde: &SdeArgs) -> Result<()> {
    let s = surrogate_setup(common)?;
    let out = common.out_dir(&s.cfg)?;
    let process = build_process(&s)?;
    let ens = simulate(&s, &process, sde)?;
    let gaps = ens.squared_gaps()?;
    let mut csv = String::from("t,mean_gap_sq\n");
    for (j, t) in ens.grid.iter().enumerate() {
        let m = gaps.iter().map(|g| g[j]).sum::<f64>() / gaps.len() as f64;
        csv.push_str(&format!("{t:.10},{m:.10e}\n"));
    }
    write_text(&out.join("sde_gaps.csv"), &csv)?;
    let mut terminal = s.anchor.zeros_like();
    for p in &ens.paths {
        terminal = terminal.add(p.states.last().expect("non-empty"))?;
    }
    let terminal = terminal.scale(1.0 / ens.len() as f64);
    println!(
        "{} paths on [{:.4}, {:.4}]: terminal-mean psnr {} dB",
        ens.len(),
        process.t0,
        process.t_end,
        format_psnr(psnr(&s.clean, &terminal)?)
    );
    let solver = s.cfg.solver.build(s.cfg.task, run_seed(first_seed(&s.cfg), 0))?;
    if solver.schedule.max_h() == 0.0 && solver.noise_draws == 1 {
        let x0 = solver.initial_state(&s.problem)?;
        let report = discrete_vs_sde(&s.problem, &x0, s.field.as_ref(), &solver, &DiscrepancyOptions::default())?;
        write_text(&out.join("discrepancy.csv"), &report.to_csv())?;
        println!("iteration vs surrogate: sup discrepancy {:.4e}", report.sup_global());
    }
    Ok(())
}

fn cmd_certify(common: &Common, sde: &SdeArgs, case: Option<BoundCase>) -> Result<()> {
    let s = surrogate_setup(common)?;
    let out = common.out_dir(&s.cfg)?;
    let process = build_process(&s)?;
    let ens = simulate(&s, &process, sde)?;
    let identity = matches!(s.cfg.operator_kind(), OperatorKind::IdentityNoise);
    let case = case.unwrap_or(if identity { BoundCase::StronglyConvex } else { BoundCase::Convex });
    let mut rng = RngStream::new(first_seed(&s.cfg), 0);
    let mut inputs = BoundInputs::new(process.t0, process.t_end, s.anchor.len());
    inputs.lip_u = measured_field_lipschitz(&process, &ens, 16, &mut rng)?;
    inputs.lip_f = s.problem.lipschitz_constant(&mut rng)?;
    inputs.grad_bound = measured_grad_bound(&ens, &s.problem as &dyn DataTerm)?;
    inputs.strong_convexity = if identity { 1.0 } else { 0.0 };
    inputs.beta = process.beta.clone();
    inputs.sigma = process.sigma.clone();
    let alpha = (process.alpha)(process.t0) > 0.0 || (process.alpha)(process.t_end) > 0.0;
    let cert = convergence_certificate(&ens, &inputs, case, alpha.then(|| process.alpha.clone()))?;
    write_text(&out.join("certificate.csv"), &cert.to_csv())?;
    let violations = cert.violations(3.0);
    println!(
        "{} of {} grid points violate the inequality beyond 3 standard errors (worst z {:.2})",
        violations,
        cert.rows.len(),
        cert.worst_z()
    );
    Ok(())
}

fn cmd_oracle(mean: &[f64], std: f64, side: usize, times: &[f64], out: &Path) -> Result<()> {
    let oracle = GaussianOracleField::new(Tensor::from_vec(&[mean.len()], mean.to_vec())?, std)
        .map_err(|e| Error::Config(e.to_string()))?;
    if mean.len() != 2 {
        bail!(Error::Config("the grid dump needs a two-dimensional mean".into()));
    }
    if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        bail!(Error::Config("flow times must lie in [0, 1]".into()));
    }
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut csv = String::from("t,x0,x1,u0,u1\n");
    for (t, x) in oracle_grid(&oracle, side, times)? {
        let u = oracle.eval(t, &x)?;
        let (x, u) = (x.data(), u.data());
        csv.push_str(&format!("{t},{:.10},{:.10},{:.10},{:.10}\n", x[0], x[1], u[0], u[1]));
    }
    write_text(&out.join("oracle.csv"), &csv)?;
    println!("wrote {} points", side * side * times.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Restore { common, image } => cmd_restore(common, *image),
        Command::Experiment(c) => cmd_experiment(c),
        Command::Ablate { common, axis, values } => cmd_ablate(common, *axis, values),
        Command::SimulateSde { common, sde } => cmd_simulate_sde(common, sde),
        Command::CertifyBounds { common, sde, case } => cmd_certify(common, sde, *case),
        Command::OracleField {
            mean,
            std,
            side,
            times,
            out,
        } => cmd_oracle(mean, *std, *side, times, out),
    }
}

/// 2 for configuration errors, 3 for divergence, 4 for I/O, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::Diverged { .. } | Error::NonFinite(_) => 3,
                Error::Io { .. } | Error::Format { .. } => 4,
                Error::ShapeMismatch { .. } | Error::InvalidShape(_) => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

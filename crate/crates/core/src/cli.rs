//! Command-line front end: `lubsim surface|fem|train|eval|compare|bench-freq`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig, SurfaceSpec, SEED_ENV};
use crate::femref::{self, FemError, PressureField};
use crate::ffnet::FrequencyMode;
use crate::io;
use crate::metrics;
use crate::residual::{BcMode, ResidualError};
use crate::trainer::{self, TrainError, TrainOptions, TrainOutcome};

pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const SURFACE: i32 = 3;
    pub const SOLVER: i32 = 4;
    pub const DIVERGED: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "lubsim", version, about = "Slider-bearing lubrication: FD reference and Fourier-feature PINN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the film thickness on the evaluation grid as `x,y,h` CSV.
    Surface(CommonArgs),
    /// Solve the finite-difference reference problem.
    Fem(CommonArgs),
    /// Train the network and evaluate it on the evaluation grid.
    Train(CommonArgs),
    /// Evaluate a saved model on the evaluation grid.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Model file; defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare two pressure fields (directories containing `field.csv`, or CSV paths).
    Compare {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "cand")]
        candidate: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ppm: bool,
    },
    /// Reference solve plus trainable- and fixed-frequency training at one seed.
    BenchFreq(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (output CSV path for `surface`).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single worker thread and zeroed wall times in JSON outputs.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub fixed_freq: bool,
    #[arg(long)]
    pub soft_bc: bool,
    /// Also write PPM heatmaps.
    #[arg(long)]
    pub ppm: bool,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(exit::IO, e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(exit::USAGE, e)
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        match e {
            FemError::Surface(s) => CliError::new(exit::SURFACE, s),
            other => CliError::new(exit::SOLVER, other),
        }
    }
}

impl From<ResidualError> for CliError {
    fn from(e: ResidualError) -> Self {
        match e {
            ResidualError::Surface(s) => CliError::new(exit::SURFACE, s),
            other => CliError::new(exit::USAGE, other),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. } => exit::DIVERGED,
            TrainError::Residual(ResidualError::Surface(_)) => exit::SURFACE,
            TrainError::Io(_) => exit::IO,
            _ => exit::USAGE,
        };
        CliError::new(code, e)
    }
}

/// Run flags recorded in `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFlags {
    pub command: String,
    pub frequency: FrequencyMode,
    pub bc: BcMode,
    pub chain_through_h: bool,
    pub lr_schedule: String,
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub max_pressure: f64,
    pub load_capacity: f64,
    pub wall_time_s: f64,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
    pub mode: ModeFlags,
}

/// Parsed configuration plus the per-invocation flags.
pub struct Session {
    pub config: RunConfig,
    pub out: PathBuf,
    pub deterministic: bool,
    pub ppm: bool,
    command: &'static str,
}

impl Session {
    pub fn open(args: &CommonArgs, command: &'static str) -> Result<Self, CliError> {
        let mut config = RunConfig::load(&args.config)?;
        let env = std::env::var(SEED_ENV).ok();
        config.resolve_seed(args.seed, env.as_deref())?;
        if args.fixed_freq {
            config.training.mode = FrequencyMode::Fixed;
        }
        if args.soft_bc {
            config.boundary.mode = BcMode::Soft;
        }
        config.validate()?;
        Ok(Self {
            config,
            out: args.out.clone(),
            deterministic: args.deterministic,
            ppm: args.ppm,
            command,
        })
    }

    fn summary(&self, field: &PressureField, wall: f64, epochs: usize, loss: Option<f64>) -> RunSummary {
        let (max_pressure, _) = metrics::max_pressure(field);
        RunSummary {
            max_pressure,
            load_capacity: metrics::load_capacity(field),
            wall_time_s: if self.deterministic { 0.0 } else { wall },
            epochs_run: epochs,
            final_loss: loss,
            config_hash: self.config.hash(),
            seed: self.config.training.seed,
            mode: ModeFlags {
                command: self.command.to_string(),
                frequency: self.config.training.mode,
                bc: self.config.boundary.mode,
                chain_through_h: self.config.chain_through_h,
                lr_schedule: format!(
                    "inverse_time: {} / (1 + {} * t)",
                    self.config.training.lr0, self.config.training.decay
                ),
                deterministic: self.deterministic,
            },
        }
    }

    /// Real wall times go to a plain-text sidecar so the JSON stays
    /// reproducible under `--deterministic`.
    fn write_timing(&self, lines: &[(&str, f64)]) -> Result<(), CliError> {
        let mut s = String::new();
        for (name, t) in lines {
            let _ = writeln!(s, "{name} {t:.3}");
        }
        io::write_atomic(&self.out.join("timing.txt"), s.as_bytes())?;
        Ok(())
    }

    fn write_notes(&self) -> Result<(), CliError> {
        io::write_atomic(&self.out.join("notes.txt"), notes(&self.config).as_bytes())?;
        Ok(())
    }
}

/// Human-readable labels for values that are inferred rather than known.
pub fn notes(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "geometry: wedge_k = {} and L/B = {} (inferred defaults, not known values for these cases)",
        cfg.geometry.wedge_k, cfg.geometry.aspect
    );
    match &cfg.surface {
        SurfaceSpec::Sinusoid { .. } => {
            let _ = writeln!(s, "surface: sinusoid form and parameters are inferred");
        }
        SurfaceSpec::Gaussian { seed, .. } => {
            let _ = writeln!(s, "surface: own Gaussian realization (seed {seed}), not a measured surface");
        }
        _ => {}
    }
    let _ = writeln!(s, "reference: conservative finite-difference solver on the evaluation grid");
    s
}

pub fn parse_and_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match run(&cli) {
            Ok(()) => exit::OK,
            Err(e) => {
                eprintln!("error: {e}");
                e.code
            }
        },
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = match &cli.command {
        Command::Compare { .. } => None,
        Command::Surface(c) | Command::Fem(c) | Command::Train(c) | Command::BenchFreq(c) => {
            thread_count(c)
        }
        Command::Eval { common, .. } => thread_count(common),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::new(exit::USAGE, e))?;
    pool.install(|| dispatch(cli))
}

fn thread_count(c: &CommonArgs) -> Option<usize> {
    if c.deterministic {
        Some(1)
    } else {
        c.threads
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Surface(a) => cmd_surface(&Session::open(a, "surface")?),
        Command::Fem(a) => cmd_fem(&Session::open(a, "fem")?),
        Command::Train(a) => cmd_train(&Session::open(a, "train")?),
        Command::Eval { common, model } => {
            let s = Session::open(common, "eval")?;
            let model = model.clone().unwrap_or_else(|| s.out.join("model.json"));
            cmd_eval(&s, &model)
        }
        Command::Compare {
            reference,
            candidate,
            out,
            ppm,
        } => cmd_compare(reference, candidate, out, *ppm),
        Command::BenchFreq(a) => cmd_bench_freq(&Session::open(a, "bench-freq")?),
    }
}

pub fn cmd_surface(s: &Session) -> Result<(), CliError> {
    let surface = s.config.surface_model().map_err(|e| CliError::new(exit::SURFACE, e))?;
    let (nx, ny) = (s.config.grids.eval_nx, s.config.grids.eval_ny);
    let grid = PressureField::zeros(nx, ny);
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (grid.x(i), grid.y(j));
            let h = surface.height(x, y).map_err(|e| CliError::new(exit::SURFACE, e))?;
            nodes.push((x, y, h));
        }
    }
    io::write_atomic(&s.out, io::surface_csv(&nodes).as_bytes())?;
    Ok(())
}

/// Reference solve on the evaluation grid.
pub fn reference_field(cfg: &RunConfig) -> Result<(PressureField, femref::FemSummary), CliError> {
    let surface = cfg.surface_model().map_err(|e| CliError::new(exit::SURFACE, e))?;
    Ok(femref::solve_case(
        &surface,
        cfg.grids.eval_nx,
        cfg.grids.eval_ny,
        cfg.geometry.aspect,
    )?)
}

fn write_field_outputs(s: &Session, stem: &str, field: &PressureField) -> Result<(), CliError> {
    io::write_atomic(&s.out.join(format!("{stem}.csv")), io::field_csv(field).as_bytes())?;
    if s.ppm {
        io::write_heatmap(&s.out, stem, field)?;
    }
    Ok(())
}

pub fn cmd_fem(s: &Session) -> Result<(), CliError> {
    let (field, fem) = reference_field(&s.config)?;
    fs::create_dir_all(&s.out)?;
    write_field_outputs(s, "field", &field)?;
    io::write_json(&s.out.join("summary.json"), &s.summary(&field, fem.wall_time_s, 0, None))?;
    s.write_timing(&[("fem", fem.wall_time_s)])?;
    s.write_notes()?;
    println!(
        "fem: max P {:.6} at ({:.4}, {:.4}), load {:.6}, {} CG iterations",
        fem.max_pressure, fem.max_location.0, fem.max_location.1, fem.load_capacity, fem.iterations
    );
    Ok(())
}

/// Trains per the session config and samples the result on the eval grid.
pub fn train_model(
    cfg: &RunConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(TrainOutcome, PressureField), CliError> {
    let surface = cfg.surface_model().map_err(|e| CliError::new(exit::SURFACE, e))?;
    let problem = cfg.problem(surface);
    let opts = TrainOptions {
        checkpoint_dir: checkpoint_dir.map(Path::to_path_buf),
    };
    let outcome = trainer::train(
        &cfg.train_config(),
        &cfg.network.architecture(),
        &problem,
        &cfg.collocation(),
        cfg.boundary.soft_points_per_edge,
        &opts,
    )?;
    let field = problem.pressure_field(&outcome.params, cfg.grids.eval_nx, cfg.grids.eval_ny)?;
    Ok((outcome, field))
}

pub fn cmd_train(s: &Session) -> Result<(), CliError> {
    fs::create_dir_all(&s.out)?;
    let (outcome, field) = train_model(&s.config, Some(&s.out))?;
    let model = io::ModelFile::new(outcome.params.clone(), s.config.training.mode);
    io::save_model(&s.out.join("model.json"), &model)?;
    io::write_atomic(&s.out.join("loss.csv"), io::loss_csv(&outcome.history).as_bytes())?;
    write_field_outputs(s, "field", &field)?;
    let summary = s.summary(
        &field,
        outcome.wall_time_s,
        outcome.epochs_run,
        Some(outcome.final_loss.total),
    );
    io::write_json(&s.out.join("summary.json"), &summary)?;
    s.write_timing(&[("train", outcome.wall_time_s)])?;
    s.write_notes()?;
    println!(
        "train: {} epochs, final loss {:.4e}, max P {:.6}, load {:.6}",
        outcome.epochs_run, outcome.final_loss.total, summary.max_pressure, summary.load_capacity
    );
    Ok(())
}

pub fn cmd_eval(s: &Session, model_path: &Path) -> Result<(), CliError> {
    let model = io::load_model(model_path).map_err(|e| CliError::new(exit::USAGE, e))?;
    let arch = s.config.network.architecture();
    if model.params.architecture() != arch {
        return Err(CliError::new(
            exit::USAGE,
            format!("{} does not match the configured network", model_path.display()),
        ));
    }
    let start = Instant::now();
    let surface = s.config.surface_model().map_err(|e| CliError::new(exit::SURFACE, e))?;
    let problem = s.config.problem(surface);
    let field = problem.pressure_field(&model.params, s.config.grids.eval_nx, s.config.grids.eval_ny)?;
    let wall = start.elapsed().as_secs_f64();
    fs::create_dir_all(&s.out)?;
    write_field_outputs(s, "field", &field)?;
    io::write_json(&s.out.join("summary.json"), &s.summary(&field, wall, 0, None))?;
    s.write_timing(&[("eval", wall)])?;
    Ok(())
}

fn field_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("field.csv")
    } else {
        p.to_path_buf()
    }
}

pub fn cmd_compare(reference: &Path, candidate: &Path, out: &Path, ppm: bool) -> Result<(), CliError> {
    let r = io::read_field_csv(&field_path(reference)).map_err(|e| CliError::new(exit::USAGE, e))?;
    let c = io::read_field_csv(&field_path(candidate)).map_err(|e| CliError::new(exit::USAGE, e))?;
    let cmp = metrics::compare(&r, &c).map_err(|e| CliError::new(exit::USAGE, e))?;
    fs::create_dir_all(out)?;
    io::write_atomic(&out.join("comparison.csv"), io::comparison_csv(&cmp.rows).as_bytes())?;
    io::write_atomic(&out.join("centerline.csv"), io::centerline_csv(&cmp.centerline).as_bytes())?;
    io::write_atomic(&out.join("error.csv"), io::field_csv(&cmp.error).as_bytes())?;
    if ppm {
        io::write_heatmap(out, "error", &cmp.error)?;
    }
    for row in &cmp.rows {
        println!(
            "{:<14} reference {:.6}  candidate {:.6}  error {:.2}%",
            row.metric, row.reference, row.candidate, row.rel_error_pct
        );
    }
    Ok(())
}

/// One row of the frequency benchmark table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub metric: String,
    pub fem: f64,
    pub mlnn: f64,
    pub mlnn_err: f64,
    pub ffn: f64,
    pub ffn_err: f64,
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub trainable: TrainOutcome,
    pub fixed: TrainOutcome,
    pub fem_wall_s: f64,
}

impl BenchResult {
    pub fn csv(&self) -> String {
        let mut s = String::from("metric,fem,mlnn,mlnn_err,ffn,ffn_err\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?}",
                r.metric, r.fem, r.mlnn, r.mlnn_err, r.ffn, r.ffn_err
            );
        }
        s
    }
}

/// Reference plus trainable (`mlnn`) and fixed-frequency (`ffn`) training at
/// the configured seed.
pub fn bench_freq(cfg: &RunConfig) -> Result<BenchResult, CliError> {
    let (fem, fem_summary) = reference_field(cfg)?;
    let run = |mode| -> Result<(TrainOutcome, PressureField), CliError> {
        let mut c = cfg.clone();
        c.training.mode = mode;
        train_model(&c, None)
    };
    let (trainable, f_t) = run(FrequencyMode::Trainable)?;
    let (fixed, f_f) = run(FrequencyMode::Fixed)?;
    let err = |e| CliError::new(exit::USAGE, e);
    let ct = metrics::compare(&fem, &f_t).map_err(err)?;
    let cf = metrics::compare(&fem, &f_f).map_err(err)?;
    let rows = ct
        .rows
        .iter()
        .zip(&cf.rows)
        .map(|(t, f)| BenchRow {
            metric: t.metric.clone(),
            fem: t.reference,
            mlnn: t.candidate,
            mlnn_err: t.rel_error_pct,
            ffn: f.candidate,
            ffn_err: f.rel_error_pct,
        })
        .collect();
    Ok(BenchResult {
        rows,
        trainable,
        fixed,
        fem_wall_s: fem_summary.wall_time_s,
    })
}

pub fn cmd_bench_freq(s: &Session) -> Result<(), CliError> {
    let bench = bench_freq(&s.config)?;
    fs::create_dir_all(&s.out)?;
    io::write_atomic(&s.out.join("bench_freq.csv"), bench.csv().as_bytes())?;
    s.write_timing(&[
        ("fem", bench.fem_wall_s),
        ("mlnn", bench.trainable.wall_time_s),
        ("ffn", bench.fixed.wall_time_s),
    ])?;
    s.write_notes()?;
    for r in &bench.rows {
        println!(
            "{:<14} fem {:.6}  mlnn {:.6} ({:.2}%)  ffn {:.6} ({:.2}%)",
            r.metric, r.fem, r.mlnn, r.mlnn_err, r.ffn, r.ffn_err
        );
    }
    println!(
        "wall time: mlnn {:.1}s, ffn {:.1}s",
        bench.trainable.wall_time_s, bench.fixed.wall_time_s
    );
    Ok(())
}

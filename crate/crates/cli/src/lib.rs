//! Command-line pipeline: simulate, render particle images, estimate and
//! correct flow, train the corrector, evaluate and export plot data.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use fluidest::correct::correct_sequence;
use fluidest::eval::{displacement_histogram, evaluate_sequence, reconstruction_residual, wake_profile};
use fluidest::io::{self, RunConfig};
use fluidest::predict::estimate_hs;
use fluidest::sim::{cylinder_obstacle, render_sequence, simulate, Preset};
use fluidest::{estimate_variational, train_corrector, Error, ErrorKind, Result, VectorField2D};

mod layout;

use layout::{frame_name, list_frames, Kind};

/// Exit code of a run that failed on bad arguments.
pub const EXIT_USAGE: i32 = 1;
/// Exit code of a run that failed on missing or malformed data.
pub const EXIT_DATA: i32 = 2;
/// Exit code of a run that failed numerically.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fluidest", version, about = "Physics-corrected optical flow for fluid imagery")]
struct Cli {
    /// TOML run configuration; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a flow preset and write velocity and tracer frames.
    Simulate(SimulateArgs),
    /// Render particle images carried by a flow sequence.
    GenImages(GenImagesArgs),
    /// Estimate flow between consecutive images, optionally corrected.
    Estimate(EstimateArgs),
    /// Fit corrector parameters to a predicted flow sequence.
    TrainCorrector(TrainArgs),
    /// Compare estimated flows with ground truth.
    Eval(EvalArgs),
    /// Export histograms, wake profiles and reconstruction residuals as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(Preset::NAMES))]
    preset: Option<String>,
    /// Grid height and width.
    #[arg(long, num_args = 2, value_names = ["H", "W"])]
    size: Option<Vec<usize>>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenImagesArgs {
    #[arg(long)]
    flows: PathBuf,
    #[arg(long)]
    particles: Option<usize>,
    /// Particle image radius in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Hs,
    Variational,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    lambda_s: Option<f64>,
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Also write the physically corrected sequence.
    #[arg(long)]
    correct: bool,
    /// Trained corrector parameters; the untrained corrector when absent.
    #[arg(long, requires = "correct")]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Image sequence, estimated first when no predicted flows are given.
    #[arg(long, required_unless_present = "flows_pred")]
    images: Option<PathBuf>,
    #[arg(long)]
    flows_pred: Option<PathBuf>,
    /// Ground truth; adds per-frame errors before and after correction.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    /// Parameter file; the loss curve goes next to it as `<stem>_loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Report errors per 100 pixels of image width.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    images: Option<PathBuf>,
    /// Column of the wake profile; behind the cylinder by default.
    #[arg(long)]
    wake_column: Option<usize>,
    #[arg(long, default_value_t = 41)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Messages go to the error stream.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// Caps the worker pool at `FLUIDEST_THREADS` when set to a positive count.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("FLUIDEST_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("FLUIDEST_THREADS must be a thread count, got \"{value}\"")))?;
    if n > 0 {
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => cmd_simulate(cfg, a),
        Command::GenImages(a) => cmd_gen_images(cfg, a),
        Command::Estimate(a) => cmd_estimate(cfg, a),
        Command::TrainCorrector(a) => cmd_train(cfg, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_parent(file: &Path) -> Result<()> {
    match file.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => create_dir(parent),
        None => Ok(()),
    }
}

fn cmd_simulate(mut cfg: RunConfig, a: SimulateArgs) -> Result<()> {
    let s = &mut cfg.simulation;
    if let Some(p) = a.preset {
        s.preset = p;
    }
    if let Some(size) = a.size {
        (s.height, s.width) = (size[0], size[1]);
    }
    s.nu = a.nu.unwrap_or(s.nu);
    s.dt = a.dt.unwrap_or(s.dt);
    s.steps = a.steps.unwrap_or(s.steps);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;

    let s = &cfg.simulation;
    let sim = cfg.sim_config();
    let states = simulate(&Preset::from_name(&s.preset)?, &sim, s.height, s.width, s.steps, cfg.seed)?;
    create_dir(&a.out)?;
    for (t, state) in states.iter().enumerate() {
        io::write_image(a.out.join(frame_name(Kind::Tracer, t)), &state.tracer.map(|c| c.clamp(0.0, 1.0)))?;
        if t > 0 {
            io::write_flow(a.out.join(frame_name(Kind::Flow, t - 1)), &state.velocity.scale(sim.dt))?;
        }
    }
    eprintln!("wrote {} flow frames to {}", states.len() - 1, a.out.display());
    Ok(())
}

fn read_flows(dir: &Path) -> Result<Vec<VectorField2D>> {
    list_frames(dir, Kind::Flow)?.iter().map(io::read_flow).collect()
}

fn cmd_gen_images(mut cfg: RunConfig, a: GenImagesArgs) -> Result<()> {
    cfg.dataset.particles = a.particles.unwrap_or(cfg.dataset.particles);
    cfg.dataset.sigma = a.sigma.unwrap_or(cfg.dataset.sigma);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;

    let flows = read_flows(&a.flows)?;
    let images = render_sequence(&flows, cfg.dataset.particles, cfg.dataset.sigma, cfg.seed)?;
    let gt = a.out.join("gt");
    create_dir(&gt)?;
    for (t, img) in images.iter().enumerate() {
        io::write_image(a.out.join(frame_name(Kind::Image, t)), img)?;
    }
    for (t, f) in flows.iter().enumerate() {
        io::write_flow(gt.join(frame_name(Kind::Flow, t)), f)?;
    }
    eprintln!("wrote {} images to {}", images.len(), a.out.display());
    Ok(())
}

fn read_images(dir: &Path) -> Result<Vec<fluidest::ScalarField2D>> {
    let images: Vec<_> = list_frames(dir, Kind::Image)?.iter().map(io::read_image).collect::<Result<_>>()?;
    if images.len() < 2 {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            offset: 0,
            message: format!("need at least 2 images, found {}", images.len()),
        });
    }
    Ok(images)
}

/// Forward flow of every consecutive image pair, pairs estimated in parallel.
fn predict(cfg: &RunConfig, images: &[fluidest::ScalarField2D]) -> Result<Vec<VectorField2D>> {
    let method = cfg.predictor.method.as_str();
    let (pc, hs) = (cfg.predictor_config(), cfg.hs_config());
    images
        .par_windows(2)
        .map(|p| match method {
            "hs" => estimate_hs(&p[0], &p[1], &hs).map(|r| r.flow),
            _ => estimate_variational(&p[0], &p[1], &pc).map(|f| f.forward),
        })
        .collect()
}

fn write_flows(dir: &Path, flows: &[VectorField2D]) -> Result<()> {
    create_dir(dir)?;
    for (t, f) in flows.iter().enumerate() {
        io::write_flow(dir.join(frame_name(Kind::Flow, t)), f)?;
    }
    Ok(())
}

fn cmd_estimate(mut cfg: RunConfig, a: EstimateArgs) -> Result<()> {
    let p = &mut cfg.predictor;
    if let Some(m) = a.method {
        p.method = match m {
            Method::Hs => "hs",
            Method::Variational => "variational",
        }
        .into();
    }
    p.lambda_s = a.lambda_s.unwrap_or(p.lambda_s);
    p.lambda_d = a.lambda_d.unwrap_or(p.lambda_d);
    p.levels = a.levels.unwrap_or(p.levels);
    p.iterations = a.iters.unwrap_or(p.iterations);
    cfg.validate()?;

    let images = read_images(&a.images)?;
    let pred = predict(&cfg, &images)?;
    write_flows(&a.out.join("pred"), &pred)?;
    if a.correct {
        let params = match &a.params {
            Some(path) => io::read_params(path)?,
            None => cfg.corrector_params(),
        };
        let corrected = correct_sequence(&pred, &params)?;
        write_flows(&a.out.join("corrected"), &corrected)?;
    }
    eprintln!("estimated {} pairs into {}", pred.len(), a.out.display());
    Ok(())
}

fn cmd_train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    cfg.corrector.epochs = a.epochs.unwrap_or(cfg.corrector.epochs);
    cfg.corrector.step = a.step.unwrap_or(cfg.corrector.step);
    cfg.validate()?;

    let pred = match (&a.flows_pred, &a.images) {
        (Some(dir), _) => read_flows(dir)?,
        (None, Some(dir)) => predict(&cfg, &read_images(dir)?)?,
        (None, None) => unreachable!("clap requires one of the two"),
    };
    let report = train_corrector(&pred, &cfg.corrector_params(), &cfg.train_config())?;
    create_parent(&a.out)?;
    io::write_params(&a.out, &report.params)?;
    let loss_path = sibling(&a.out, "loss");
    io::write_table(
        &loss_path,
        &["epoch", "loss"],
        report.losses.iter().enumerate().map(|(i, l)| [i.to_string(), l.to_string()]),
    )?;
    eprintln!(
        "corrector loss {:.6e} -> {:.6e} (best)",
        report.initial_loss, report.best_loss
    );
    if let Some(gt_dir) = &a.gt {
        let gt = read_flows(gt_dir)?;
        let corrected = correct_sequence(&pred, &report.params)?;
        let before = evaluate_sequence(&pred, &gt, false)?;
        let after = evaluate_sequence(&corrected, &gt, false)?;
        io::write_table(
            sibling(&a.out, "aepe"),
            &["frame", "predicted", "corrected"],
            before
                .frames
                .iter()
                .zip(&after.frames)
                .map(|(b, c)| [b.frame.to_string(), b.aepe.to_string(), c.aepe.to_string()]),
        )?;
        eprintln!("mean AEPE {:.4} -> {:.4}", before.mean_aepe(), after.mean_aepe());
    }
    Ok(())
}

/// `dir/<stem>_<suffix>.csv` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "params".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let est_files = list_frames(&a.est, Kind::Flow)?;
    let mut est = Vec::with_capacity(est_files.len());
    let mut gt = Vec::with_capacity(est_files.len());
    for path in &est_files {
        let name = path.file_name().expect("listed files have names");
        est.push(io::read_flow(path)?);
        gt.push(io::read_flow(a.gt.join(name))?);
    }
    let report = evaluate_sequence(&est, &gt, a.normalize)?;
    create_parent(&a.out)?;
    io::write_metric_report(&a.out, &report)?;
    eprintln!(
        "{} frames: mean AEPE {:.4}, mean AAE {:.3} deg",
        report.frames.len(),
        report.mean_aepe(),
        report.mean_aae()
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let flows = read_flows(&a.est)?;
    let Some(first) = flows.first() else {
        return Err(Error::Format {
            path: a.est.clone(),
            offset: 0,
            message: "no flow frames found".into(),
        });
    };
    let (h, w) = first.dims();
    create_dir(&a.out)?;

    let limit = flows.iter().map(|f| f.max_norm()).fold(0.0, f64::max).max(1e-9);
    let mut counts: Option<fluidest::eval::Histogram> = None;
    for f in &flows {
        let hist = displacement_histogram(f, a.bins, (-limit, limit))?;
        counts = Some(match counts {
            None => hist,
            Some(mut acc) => {
                acc.u.iter_mut().zip(&hist.u).for_each(|(a, b)| *a += b);
                acc.v.iter_mut().zip(&hist.v).for_each(|(a, b)| *a += b);
                acc
            }
        });
    }
    let hist = counts.expect("at least one frame");
    io::write_table(
        a.out.join("histogram.csv"),
        &["lo", "hi", "u", "v"],
        (0..hist.bins()).map(|k| {
            let (lo, hi) = hist.edges(k);
            [lo.to_string(), hi.to_string(), hist.u[k].to_string(), hist.v[k].to_string()]
        }),
    )?;

    let column = a.wake_column.unwrap_or_else(|| cylinder_obstacle(h, w).cx.round() as usize);
    if column >= w {
        return Err(Error::InvalidParameter(format!("wake column {column} outside width {w}")));
    }
    let profile = wake_profile(&flows, column)?;
    io::write_table(
        a.out.join("wake_profile.csv"),
        &["y", "u", "v"],
        profile.iter().enumerate().map(|(y, (u, v))| [y.to_string(), u.to_string(), v.to_string()]),
    )?;

    if let Some(dir) = &a.images {
        let images = read_images(dir)?;
        let mut summary = Vec::new();
        for (t, f) in flows.iter().enumerate().take(images.len() - 1) {
            let (rec, mean) = reconstruction_residual(&images[t], &images[t + 1], f)?;
            let res = rec.zip_map(&images[t + 1], |r, i| r - i);
            io::write_table(
                a.out.join(format!("residual_{t:04}.csv")),
                &["x", "y", "residual"],
                (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| {
                    [x.to_string(), y.to_string(), res.get(x, y).to_string()]
                }),
            )?;
            summary.push([t.to_string(), mean.to_string()]);
        }
        io::write_table(a.out.join("residual_summary.csv"), &["frame", "mean_abs_residual"], summary)?;
    }
    eprintln!("wrote report to {}", a.out.display());
    Ok(())
}

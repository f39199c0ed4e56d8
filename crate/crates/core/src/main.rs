use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Array3};

use curvisynth::augment;
use curvisynth::dataset::{self, PipelineConfig, Preset, TargetFit};
use curvisynth::error::{Error, Result};
use curvisynth::exec::Execution;
use curvisynth::fda::{self, SynthMeta};
use curvisynth::imageio::{self, GrayMode};
use curvisynth::liot::{self, Direction};
use curvisynth::losses::{self, KeyCaps, PixelSource};
use curvisynth::raster::FractalImage;
use curvisynth::rng::{item_rng, seeded};
use curvisynth::tensor::{Tensor, MAGIC_F32, MAGIC_U8};

/// Synthetic curvilinear-structure segmentation data.
#[derive(Parser, Debug)]
#[command(name = "curvisynth", version)]
struct Cli {
    /// TOML pipeline configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output directory, or output file for single-image commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rasterize fractal trees and their masks without fusion.
    GenFractals {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fuse a fractal image with a target image.
    Synthesize(SynthesizeArgs),
    /// Intensity-order transform of one image.
    Liot(LiotArgs),
    /// Augment an image and optional mask.
    Augment(AugmentArgs),
    /// Run the full pipeline over a directory of target images.
    Dataset(DatasetArgs),
    /// Evaluate the training losses on maps stored as tensor files or PNGs.
    LossEval(LossArgs),
    /// Segmentation metrics of a prediction against ground truth.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
struct SynthesizeArgs {
    /// Fractal intensity image.
    #[arg(long)]
    fractal: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    ksize: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Also write the amplitude-swapped image before blurring.
    #[arg(long)]
    fused_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LiotArgs {
    #[arg(long)]
    input: PathBuf,
    /// Write four PNGs `<stem>_left.png` ... instead of a tensor file.
    #[arg(long)]
    png: bool,
    #[arg(long, value_enum)]
    gray: Option<GrayMode>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Where to write the augmented mask.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long)]
    count: Option<usize>,
    /// Directory of unlabeled target images.
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    no_liot: bool,
    /// Dump intermediate images.
    #[arg(long)]
    debug: bool,
    #[arg(long, value_enum)]
    fit: Option<TargetFit>,
    #[arg(long, value_enum)]
    gray: Option<GrayMode>,
    /// Disable the worker pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct LossArgs {
    /// Discriminator output on synthetic predictions.
    #[arg(long)]
    d_syn: Option<PathBuf>,
    /// Discriminator output on target predictions.
    #[arg(long)]
    d_tgt: Option<PathBuf>,
    /// Synthetic ground-truth mask.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Segmentation probabilities on the synthetic image.
    #[arg(long)]
    y_syn: Option<PathBuf>,
    /// Segmentation probabilities on the target image.
    #[arg(long)]
    y_tgt: Option<PathBuf>,
    /// Projected features of the synthetic image, `C x H x W`.
    #[arg(long)]
    z_syn: Option<PathBuf>,
    /// Projected features of the target image, `C x H x W`.
    #[arg(long)]
    z_tgt: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 0.4)]
    lambda: f64,
    #[arg(long, num_args = 3, value_names = ["QUERY", "POSITIVE", "NEGATIVE"])]
    caps: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    /// Prediction; values of at least 0.5 (128 for 8-bit data) are foreground.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Foreground probabilities for AUC.
    #[arg(long)]
    scores: Option<PathBuf>,
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path, cli.preset)?,
        None => PipelineConfig::preset(cli.preset.unwrap_or_default()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn is_tensor(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut magic = [0u8; 4];
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let n = f.read(&mut magic).map_err(|e| Error::io(path, e))?;
    Ok(n == 4 && (&magic == MAGIC_U8 || &magic == MAGIC_F32))
}

/// A single-channel map in `[0, 1]` from a tensor file or a PNG. 8-bit data
/// is divided by 255.
fn read_map(path: &Path) -> Result<Array2<f64>> {
    if is_tensor(path)? {
        Tensor::read(path)?.single_channel(true)
    } else {
        Ok(imageio::read_gray(path, GrayMode::Luminance)?.mapv(|v| f64::from(v) / 255.0))
    }
}

/// Nonzero 8-bit values are foreground; float maps are thresholded at 0.5.
fn read_binary(path: &Path) -> Result<Array2<bool>> {
    if is_tensor(path)? {
        match Tensor::read(path)? {
            t @ Tensor::U8(_) => Ok(t.single_channel(false)?.mapv(|v| v > 0.0)),
            t => Ok(t.single_channel(false)?.mapv(|v| v >= 0.5)),
        }
    } else {
        imageio::read_mask(path)
    }
}

/// `C x H x W` tensor file as `H x W x C`.
fn read_features(path: &Path) -> Result<Array3<f64>> {
    let t = Tensor::read(path)?.to_f64(false);
    Ok(t.permuted_axes([1, 2, 0]).as_standard_layout().into_owned())
}

fn print_value(key: &str, v: Option<f64>) {
    match v {
        Some(v) => println!("{key}={v}"),
        None => println!("{key}=none"),
    }
}

fn gen_fractals(cli: &Cli, count: Option<usize>) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    cfg.validate()?;
    let out = require_out(cli)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let count = count.unwrap_or(cfg.count);
    let results = Execution::default().map_indexed(count, |i| -> Result<()> {
        let seed = curvisynth::rng::derive_seed(cfg.seed, i as u64);
        let (frac, _) = dataset::generate_fractal(&cfg.lsystem, cfg.canvas, seed, &mut item_rng(cfg.seed, i as u64, 0))?;
        let id = dataset::sample_id(i);
        imageio::write_gray(&out.join(format!("{id}_frac.png")), &frac.pixels)?;
        imageio::write_mask(&out.join(format!("{id}_mask.png")), &frac.mask)
    });
    results.into_iter().collect()
}

fn synthesize(cli: &Cli, a: &SynthesizeArgs) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    cfg.fda.beta = a.beta.unwrap_or(cfg.fda.beta);
    cfg.fda.ksize = a.ksize.unwrap_or(cfg.fda.ksize);
    cfg.fda.sigma = a.sigma.unwrap_or(cfg.fda.sigma);
    let out = require_out(cli)?;
    let pixels = imageio::read_gray(&a.fractal, GrayMode::Luminance)?;
    let frac = FractalImage {
        mask: pixels.mapv(|v| v > 0),
        pixels,
    };
    let raw = imageio::read_gray(&a.target, cfg.gray_mode)?;
    let target = dataset::fit_target(&raw, frac.dims(), cfg.target_fit, &mut seeded(cfg.seed));
    let meta = SynthMeta {
        target_id: a.target.display().to_string(),
        seed: cfg.seed,
    };
    let (pair, stages) = fda::synthesize_staged(&frac, &target, &cfg.fda, meta, Execution::default())?;
    imageio::write_gray(out, &pair.image)?;
    if let Some(p) = &a.fused_out {
        imageio::write_gray(p, &fda::quantize(&stages.fused))?;
    }
    Ok(())
}

fn run_liot(cli: &Cli, a: &LiotArgs) -> Result<()> {
    let out = require_out(cli)?;
    let img = imageio::read_gray(&a.input, a.gray.unwrap_or_default())?;
    let t = liot::transform(&img);
    if a.png {
        let stem = out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let dir = out.parent().unwrap_or(Path::new(""));
        for d in Direction::ALL {
            let path = dir.join(format!("{stem}_{}.png", d.suffix()));
            imageio::write_gray(&path, &t.channel(d).to_owned())?;
        }
        Ok(())
    } else {
        imageio::write_atomic(out, &Tensor::from(t).encode())
    }
}

fn run_augment(cli: &Cli, a: &AugmentArgs) -> Result<()> {
    let cfg = pipeline_config(cli)?;
    let out = require_out(cli)?;
    let image = imageio::read_any(&a.image)?;
    let mask = a.mask.as_deref().map(imageio::read_mask).transpose()?;
    let res = augment::apply(image.view(), mask.as_ref(), &cfg.augment, &mut seeded(cfg.seed))?;
    imageio::write_atomic(out, &imageio::encode_image(&res.image)?)?;
    if let (Some(m), Some(p)) = (&res.mask, &a.mask_out) {
        imageio::write_mask(p, m)?;
    }
    println!("{}", serde_json::to_string(&res.record).expect("record serializes"));
    Ok(())
}

fn run_dataset(cli: &Cli, a: &DatasetArgs) -> Result<()> {
    let mut cfg = pipeline_config(cli)?;
    if let Some(c) = a.count {
        cfg.count = c;
    }
    if let Some(t) = &a.targets {
        cfg.target_dir = Some(t.clone());
    }
    if a.no_liot {
        cfg.emit_liot = false;
    }
    if a.debug {
        cfg.debug = true;
    }
    if let Some(f) = a.fit {
        cfg.target_fit = f;
    }
    if let Some(g) = a.gray {
        cfg.gray_mode = g;
    }
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let manifest = dataset::run(&cfg, exec)?;
    eprintln!(
        "wrote {} samples to {}",
        manifest.records.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn loss_eval(cli: &Cli, a: &LossArgs) -> Result<()> {
    let opt = |p: &Option<PathBuf>| p.as_deref().map(read_map).transpose();
    let d_syn = opt(&a.d_syn)?;
    let d_tgt = opt(&a.d_tgt)?;
    let y_syn = opt(&a.y_syn)?;
    let y_tgt = opt(&a.y_tgt)?;
    let gt = a.gt.as_deref().map(read_binary).transpose()?;

    if let (Some(s), Some(t)) = (&d_syn, &d_tgt) {
        print_value("discriminator", Some(losses::discriminator_loss(s.view(), t.view())?));
    }
    let psal = d_tgt.as_ref().map(|t| losses::psal(t.view())).transpose()?;
    if psal.is_some() {
        print_value("psal", psal);
    }
    let seg = match (&gt, &y_syn) {
        (Some(g), Some(y)) => Some(losses::seg_loss(g.view(), y.view())?),
        _ => None,
    };
    if seg.is_some() {
        print_value("seg", seg);
    }

    let mut cmcl = None;
    if let (Some(zs), Some(zt), Some(g), Some(yt)) = (&a.z_syn, &a.z_tgt, &gt, &y_tgt) {
        let (zs, zt) = (read_features(zs)?, read_features(zt)?);
        let parts_syn = losses::partition_mask(g.view());
        let parts_tgt = losses::partition_pixels(yt.view(), PixelSource::Target, a.alpha)?;
        let caps = match a.caps.as_deref() {
            Some(&[query, positive, negative]) => KeyCaps {
                query,
                positive,
                negative,
            },
            _ => KeyCaps::default(),
        };
        let mut rng = seeded(cli.seed.unwrap_or(0));
        match losses::sample_keys(zs.view(), zt.view(), &parts_syn, &parts_tgt, a.sigma, caps, &mut rng) {
            Ok(keys) => cmcl = Some(losses::cmcl(&keys, a.tau)?),
            Err(Error::DegenerateBatch(reason)) => eprintln!("cmcl skipped: {reason}"),
            Err(e) => return Err(e),
        }
        print_value("cmcl", cmcl);
    }
    if let (Some(s), Some(p)) = (seg, psal) {
        print_value("total", Some(losses::total_loss(s, p, cmcl.unwrap_or(0.0), a.lambda)));
    }
    Ok(())
}

fn run_metrics(a: &MetricsArgs) -> Result<()> {
    let pred = read_binary(&a.pred)?;
    let gt = read_binary(&a.gt)?;
    let scores = a.scores.as_deref().map(read_map).transpose()?;
    let m = losses::metrics(pred.view(), gt.view(), scores.as_ref().map(|s| s.view()))?;
    let c = m.confusion;
    for (k, v) in [("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)] {
        println!("{k}={v}");
    }
    print_value("jaccard", Some(m.jaccard));
    print_value("dice", Some(m.dice));
    print_value("accuracy", Some(m.accuracy));
    print_value("sensitivity", m.sensitivity);
    print_value("specificity", m.specificity);
    print_value("auc", m.auc);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenFractals { count } => gen_fractals(cli, *count),
        Command::Synthesize(a) => synthesize(cli, a),
        Command::Liot(a) => run_liot(cli, a),
        Command::Augment(a) => run_augment(cli, a),
        Command::Dataset(a) => run_dataset(cli, a),
        Command::LossEval(a) => loss_eval(cli, a),
        Command::Metrics(a) => run_metrics(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // invalid configuration is a usage problem, not a runtime failure
            let code = if matches!(e, Error::Config(_)) { 1 } else { 2 };
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(code)
        }
    }
}

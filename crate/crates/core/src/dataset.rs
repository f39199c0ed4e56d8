//! The end-to-end synthesis pipeline.
//!
//! For every sample index the pipeline derives its own random streams, draws
//! fractal parameters, rasterizes the tree, fuses it with a target image,
//! augments the pair and optionally encodes it (and an augmented target
//! crop) with the intensity-order transform. Samples are independent, so
//! the output does not depend on how they are scheduled.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifest.jsonl        one record per sample, in index order
//! images/{id}.png       fused, augmented image
//! masks/{id}.png        label, 0 or 255
//! liot/{id}.lio         transform of the image
//! liot_target/{id}.lio  transform of an augmented target crop
//! debug/{id}_*.png      intermediate stages, when enabled
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentConfig, AugmentRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fda::{self, FdaParams, SynthMeta};
use crate::imageio::{self, GrayMode};
use crate::liot;
use crate::lsystem::{build_program, expand, LSystemSpec, Rule, RuleSelection, SymbolString};
use crate::raster::{rasterize, FractalImage, TurtleProgram};
use crate::rng::{derive_seed, item_rng, SynthRng};
use crate::tensor::Tensor;

const STREAM_FRACTAL: u64 = 0;
const STREAM_TARGET: u64 = 1;
const STREAM_AUGMENT: u64 = 2;
const STREAM_TARGET_AUGMENT: u64 = 3;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Coronary angiograms, 512 x 512.
    #[default]
    Xcad,
    /// Retinal fundus photographs, 584 x 565.
    Retina,
    /// Pavement cracks, 600 x 800, thin strokes.
    Crack,
    /// Same defaults as `xcad`; intended for fully configured runs.
    Custom,
}

/// How a target image is brought to the canvas size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TargetFit {
    /// Random crop when the target is at least as large as the canvas,
    /// otherwise resize.
    #[default]
    Crop,
    /// Always resize.
    Resize,
}

/// Ranges from which each tree's grammar parameters are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LSystemRanges {
    pub axiom: String,
    pub ruleset: Vec<Rule>,
    pub iterations: u32,
    pub w_init: (f64, f64),
    pub l_init: (f64, f64),
    pub gamma: (f64, f64),
    pub angle_init_range: (f64, f64),
    pub angle_delta_range: (f64, f64),
    pub intensity_range: (u8, u8),
    pub rule_selection: RuleSelection,
    pub trees_per_image: usize,
}

impl Default for LSystemRanges {
    fn default() -> Self {
        LSystemRanges {
            axiom: "F".into(),
            ruleset: ["F[+F-F]", "F[-F-F]", "F-F-F", "F+F+F"]
                .iter()
                .map(|r| r.parse().expect("static rule"))
                .collect(),
            iterations: 4,
            w_init: (8.0, 14.0),
            l_init: (120.0, 200.0),
            gamma: (0.7, 1.0),
            angle_init_range: (20.0, 120.0),
            angle_delta_range: (10.0, 40.0),
            intensity_range: (1, 254),
            rule_selection: RuleSelection::PerPass,
            trees_per_image: 1,
        }
    }
}

/// Per-tree draws recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeDraw {
    pub w_init: f64,
    pub l_init: f64,
    pub gamma: f64,
    pub symbols: usize,
    pub segments: usize,
}

fn draw_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

impl LSystemRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("w_init", self.w_init), ("l_init", self.l_init), ("gamma", self.gamma)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::param(name, format!("({lo}, {hi}) is not a valid positive range")));
            }
        }
        if self.trees_per_image == 0 {
            return Err(Error::param("trees_per_image", "must be at least 1"));
        }
        let spec = self.spec(self.axiom.parse()?, self.w_init.0, self.l_init.0, self.gamma.1, 0);
        spec.validate()
    }

    fn spec(&self, axiom: SymbolString, w_init: f64, l_init: f64, gamma: f64, seed: u64) -> LSystemSpec {
        LSystemSpec {
            axiom,
            ruleset: self.ruleset.clone(),
            iterations: self.iterations,
            w_init,
            l_init,
            gamma,
            angle_init_range: self.angle_init_range,
            angle_delta_range: self.angle_delta_range,
            intensity_range: self.intensity_range,
            rule_selection: self.rule_selection,
            seed,
        }
    }

    /// Draws one tree's concrete parameters.
    pub fn sample<R: Rng + ?Sized>(&self, seed: u64, rng: &mut R) -> Result<LSystemSpec> {
        let w = draw_in(rng, self.w_init);
        let l = draw_in(rng, self.l_init);
        let g = draw_in(rng, self.gamma);
        let spec = self.spec(self.axiom.parse()?, w, l, g, seed);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preset: Preset,
    pub count: usize,
    pub seed: u64,
    /// `(height, width)`
    pub canvas: (usize, usize),
    pub target_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub emit_liot: bool,
    pub target_fit: TargetFit,
    pub gray_mode: GrayMode,
    pub debug: bool,
    /// Accepted range of the augmented mask's foreground fraction. Trees and
    /// crops are redrawn until the fraction falls inside it.
    pub foreground_band: (f64, f64),
    /// Draws per sample before the last one is kept regardless of the band.
    pub max_attempts: u32,
    pub fda: FdaParams,
    pub lsystem: LSystemRanges,
    pub augment: AugmentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::preset(Preset::Xcad)
    }
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut cfg = PipelineConfig {
            preset,
            count: 150,
            seed: 0,
            canvas: (512, 512),
            target_dir: None,
            output_dir: PathBuf::from("out"),
            emit_liot: true,
            target_fit: TargetFit::Crop,
            gray_mode: GrayMode::Luminance,
            debug: false,
            foreground_band: (0.01, 0.40),
            max_attempts: 32,
            fda: FdaParams::default(),
            lsystem: LSystemRanges::default(),
            augment: AugmentConfig::default(),
        };
        match preset {
            Preset::Xcad | Preset::Custom => {}
            Preset::Retina => {
                cfg.count = 600;
                cfg.canvas = (584, 565);
                cfg.gray_mode = GrayMode::Green;
            }
            Preset::Crack => {
                cfg.canvas = (600, 800);
                cfg.lsystem.w_init = (2.0, 6.0);
            }
        }
        cfg
    }

    /// Parses a TOML document over the defaults of its preset.
    ///
    /// `preset` overrides the document's own `preset` key when given. Keys
    /// absent from the document keep the preset value, including keys
    /// inside the `[fda]`, `[lsystem]` and `[augment]` sections.
    pub fn from_toml(text: &str, preset: Option<Preset>) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = match preset {
            Some(p) => p,
            None => match doc.get("preset") {
                Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?,
                None => Preset::default(),
            },
        };
        let base = toml::Table::try_from(PipelineConfig::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = base;
        merge(&mut merged, doc);
        merged.insert("preset".into(), toml::Value::try_from(preset).expect("enum"));
        let cfg: PipelineConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, preset: Option<Preset>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml(&text, preset).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.canvas;
        if h < crate::raster::MIN_CANVAS || w < crate::raster::MIN_CANVAS {
            return Err(Error::param("canvas", format!("{h}x{w} is below the minimum canvas")));
        }
        if !(self.fda.beta >= 0.0 && self.fda.beta < 1.0) {
            return Err(Error::param("beta", format!("{} not in [0, 1)", self.fda.beta)));
        }
        fda::gaussian_kernel(self.fda.ksize, self.fda.sigma)?;
        let (lo, hi) = self.foreground_band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::param("foreground_band", format!("({lo}, {hi}) is not a range within [0, 1]")));
        }
        if self.max_attempts == 0 {
            return Err(Error::param("max_attempts", "must be at least 1"));
        }
        self.lsystem.validate()?;
        self.augment.validate()?;
        if let Some((ch, cw)) = self.augment.crop {
            let fits = |(a, b): (usize, usize)| ch <= a && cw <= b;
            // a quarter turn swaps the canvas sides before cropping
            if !fits((h, w)) || (self.augment.rotation_prob > 0.0 && !fits((w, h))) {
                return Err(Error::CropTooLarge {
                    crop: (ch, cw),
                    image: (h, w),
                });
            }
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// One manifest line. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub id: String,
    pub seed: u64,
    pub image: String,
    pub mask: String,
    pub liot: Option<String>,
    pub liot_target: Option<String>,
    pub target_id: String,
    pub height: usize,
    pub width: usize,
    pub foreground_fraction: f64,
    /// Draws needed to land in the foreground band.
    pub attempts: u32,
    pub trees: Vec<TreeDraw>,
    pub augment: AugmentRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_targets(dir: &Path) -> Result<Vec<PathBuf>> {
    const EXTENSIONS: [&str; 7] = ["png", "jpg", "jpeg", "tif", "tiff", "bmp", "gif"];
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        if path.is_file() && EXTENSIONS.contains(&ext.as_str()) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyTargetDir(dir.to_path_buf()));
    }
    Ok(files)
}

/// Brings `target` to exactly `canvas`.
pub fn fit_target<R: Rng + ?Sized>(
    target: &Array2<u8>,
    canvas: (usize, usize),
    mode: TargetFit,
    rng: &mut R,
) -> Array2<u8> {
    let (th, tw) = target.dim();
    let (h, w) = canvas;
    if mode == TargetFit::Crop && th >= h && tw >= w {
        let r = rng.random_range(0..=th - h);
        let c = rng.random_range(0..=tw - w);
        return target.slice(s![r..r + h, c..c + w]).to_owned();
    }
    if (th, tw) == (h, w) {
        return target.clone();
    }
    let buf = image::GrayImage::from_raw(tw as u32, th as u32, target.iter().copied().collect())
        .expect("buffer size");
    let resized = image::imageops::resize(&buf, w as u32, h as u32, image::imageops::FilterType::Triangle);
    Array2::from_shape_vec((h, w), resized.into_raw()).expect("buffer size")
}

/// Every fractal tree of one sample, rasterized.
pub fn generate_fractal<R: Rng + ?Sized>(
    ranges: &LSystemRanges,
    canvas: (usize, usize),
    seed: u64,
    rng: &mut R,
) -> Result<(FractalImage, Vec<TreeDraw>)> {
    let mut program = TurtleProgram::default();
    let mut draws = Vec::with_capacity(ranges.trees_per_image);
    for _ in 0..ranges.trees_per_image {
        let spec = ranges.sample(seed, rng)?;
        let symbols = expand(&spec, rng)?;
        let tree = build_program(&symbols, &spec, canvas, rng)?;
        draws.push(TreeDraw {
            w_init: spec.w_init,
            l_init: spec.l_init,
            gamma: spec.gamma,
            symbols: symbols.len(),
            segments: tree.segments.len(),
        });
        program.extend(tree);
    }
    Ok((rasterize(&program, canvas.0, canvas.1)?, draws))
}

struct Targets {
    paths: Vec<PathBuf>,
    ids: Vec<String>,
}

impl Targets {
    fn load(dir: &Path) -> Result<Self> {
        let paths = list_targets(dir)?;
        let ids = paths
            .iter()
            .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
            .collect();
        Ok(Targets { paths, ids })
    }
}

fn foreground(mask: &Array2<bool>) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 / mask.len().max(1) as f64
}

pub fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

fn run_sample(
    cfg: &PipelineConfig,
    targets: &Targets,
    index: usize,
    out: &Path,
) -> Result<ManifestRecord> {
    let id = sample_id(index);
    let seed = derive_seed(cfg.seed, index as u64);
    let rng = |stream| -> SynthRng { item_rng(cfg.seed, index as u64, stream) };

    // the augmentation stream is cloned before each probe so the accepted
    // decisions can be replayed on the fused image
    let mut frng = rng(STREAM_FRACTAL);
    let mut arng = rng(STREAM_AUGMENT);
    let mut attempts = 0;
    let (frac, trees, mut aug_rng) = loop {
        attempts += 1;
        let (frac, trees) = generate_fractal(&cfg.lsystem, cfg.canvas, seed, &mut frng)?;
        let replay = arng.clone();
        let (_, probe, _) = augment::apply_gray(&frac.mask.mapv(u8::from), Some(&frac.mask), &cfg.augment, &mut arng)?;
        let fg = foreground(&probe.expect("mask was supplied"));
        let (lo, hi) = cfg.foreground_band;
        if (lo..=hi).contains(&fg) || attempts >= cfg.max_attempts {
            break (frac, trees, replay);
        }
    };

    let mut trng = rng(STREAM_TARGET);
    let pick = trng.random_range(0..targets.paths.len());
    let raw = imageio::read_gray(&targets.paths[pick], cfg.gray_mode)?;
    let target = fit_target(&raw, cfg.canvas, cfg.target_fit, &mut trng);

    let meta = SynthMeta {
        target_id: targets.ids[pick].clone(),
        seed,
    };
    let (pair, stages) = fda::synthesize_staged(&frac, &target, &cfg.fda, meta, Execution::Sequential)?;

    let (image, mask, record) = augment::apply_gray(&pair.image, Some(&pair.mask), &cfg.augment, &mut aug_rng)?;
    let mask = mask.expect("mask was supplied");

    let image_rel = format!("images/{id}.png");
    let mask_rel = format!("masks/{id}.png");
    imageio::write_gray(&out.join(&image_rel), &image)?;
    imageio::write_mask(&out.join(&mask_rel), &mask)?;

    let (mut liot_rel, mut liot_target_rel) = (None, None);
    if cfg.emit_liot {
        let rel = format!("liot/{id}.lio");
        let t = Tensor::from(liot::transform_with(image.view(), Execution::Sequential));
        imageio::write_atomic(&out.join(&rel), &t.encode())?;
        liot_rel = Some(rel);

        let (tgt_aug, _, _) = augment::apply_gray(&target, None, &cfg.augment, &mut rng(STREAM_TARGET_AUGMENT))?;
        let rel = format!("liot_target/{id}.lio");
        let t = Tensor::from(liot::transform_with(tgt_aug.view(), Execution::Sequential));
        imageio::write_atomic(&out.join(&rel), &t.encode())?;
        liot_target_rel = Some(rel);
    }

    if cfg.debug {
        let dbg = out.join("debug");
        imageio::write_gray(&dbg.join(format!("{id}_frac.png")), &frac.pixels)?;
        imageio::write_gray(&dbg.join(format!("{id}_target.png")), &target)?;
        imageio::write_gray(&dbg.join(format!("{id}_fused.png")), &fda::quantize(&stages.fused))?;
        imageio::write_gray(&dbg.join(format!("{id}_blurred.png")), &pair.image)?;
    }

    let (height, width) = mask.dim();
    Ok(ManifestRecord {
        index,
        id,
        seed,
        image: image_rel,
        mask: mask_rel,
        liot: liot_rel,
        liot_target: liot_target_rel,
        target_id: targets.ids[pick].clone(),
        height,
        width,
        foreground_fraction: foreground(&mask),
        attempts,
        trees,
        augment: record,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs the whole pipeline and writes `manifest.jsonl` last.
pub fn run(cfg: &PipelineConfig, exec: Execution) -> Result<Manifest> {
    cfg.validate()?;
    let target_dir = cfg
        .target_dir
        .as_deref()
        .ok_or_else(|| Error::Config("no target directory configured".into()))?;
    let targets = Targets::load(target_dir)?;

    let out = cfg.output_dir.as_path();
    create_dir(out)?;
    for sub in ["images", "masks"] {
        create_dir(&out.join(sub))?;
    }
    if cfg.emit_liot {
        create_dir(&out.join("liot"))?;
        create_dir(&out.join("liot_target"))?;
    }
    if cfg.debug {
        create_dir(&out.join("debug"))?;
    }

    let results = exec.map_indexed(cfg.count, |index| {
        run_sample(cfg, &targets, index, out).map_err(|source| Error::Sample {
            index,
            seed: cfg.seed,
            source: Box::new(source),
        })
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { records };
    imageio::write_atomic(&out.join(MANIFEST_NAME), manifest.to_jsonl().as_bytes())?;
    Ok(manifest)
}

//! Subcommand implementations. Each resolves its settings (flag, then
//! config file, then default), validates them, does the work and writes a
//! provenance sidecar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use cartoseg::backend::{ExternalBackend, ExternalConfig, HeuristicBackend, OracleBackend, SegmentationBackend};
use cartoseg::bias::{build_design, ols_fit, read_metadata, OlsOptions, DEFAULT_MIN_COUNT};
use cartoseg::evaluation::{aggregate, confusion, count_all, load_pairs, ClassSet, MetricsReport, Normalization, Strategy};
use cartoseg::geodata::{scale_to_zoom, MapScale};
use cartoseg::inference::{multiscale_infer, InferOptions, Upsample};
use cartoseg::synth::{default_lexicon, fit_color_model, load_lexicon, ColorModel, Corpus, Generator};
use cartoseg::{LabelMask, SemanticClass};

use crate::config::{existing, required, RunConfig};
use crate::{provenance, BiasArgs, ColorfitArgs, EvalArgs, FixturesArgs, InferArgs, Invalid, SynthArgs};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn parse_with<T: serde::de::DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| invalid(format!("--{flag}: unrecognized value `{value}`")))
}

fn load_colors(path: Option<&Path>) -> Result<ColorModel> {
    match path {
        None => Ok(ColorModel::default_palette()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("color model {}: {e}", p.display())))?;
            ColorModel::from_json(&text).map_err(|e| invalid(format!("color model {}: {e}", p.display())))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct SynthResolved {
    features: PathBuf,
    colors: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    count: u64,
    seed: u64,
    out: PathBuf,
    generation: cartoseg::synth::GenerationConfig,
}

pub fn synth(cfg: &RunConfig, a: SynthArgs) -> Result<()> {
    let s = &cfg.synth;
    let r = SynthResolved {
        features: existing(required("features", [a.features, s.features.clone()])?, "feature directory")?,
        colors: a.colors.or(s.colors.clone()),
        lexicon: a.lexicon.or(s.lexicon.clone()),
        count: a.count.or(s.count).unwrap_or(1),
        seed: a.seed.or(s.seed).or(cfg.seed).unwrap_or(0),
        out: cfg.output(required("out", [a.out, s.out.clone(), cfg.out_dir.clone()])?),
        generation: s.generation.clone().unwrap_or_default(),
    };
    r.generation.validate().map_err(|e| invalid(e.to_string()))?;
    let colors = load_colors(r.colors.as_deref())?;
    let lexicon = match &r.lexicon {
        Some(p) => load_lexicon(p).map_err(|e| invalid(format!("lexicon {}: {e}", p.display())))?,
        None => default_lexicon(),
    };
    let zoom = scale_to_zoom(MapScale::new(r.generation.default_scale_denominator).map_err(|e| invalid(e.to_string()))?);
    let corpus = Corpus::load(&r.features, zoom).map_err(|e| invalid(format!("{}: {e}", r.features.display())))?;
    let generator =
        Generator::new(corpus, r.generation.clone(), colors, lexicon).map_err(|e| invalid(e.to_string()))?;

    create_dir(&r.out)?;
    (0..r.count).into_par_iter().try_for_each(|i| -> Result<()> {
        let seed = r.seed.wrapping_add(i);
        let sample = generator.generate(seed).with_context(|| format!("sample {i} (seed {seed})"))?;
        sample.save(&r.out, &format!("sample_{i:05}")).with_context(|| format!("saving sample {i}"))?;
        Ok(())
    })?;
    log::info!("wrote {} samples to {}", r.count, r.out.display());
    provenance::write(&r.out, "synth", Some(r.seed), &r)
}

#[derive(Serialize)]
struct InferResolved {
    input: PathBuf,
    backend: String,
    options: InferOptions,
    out: PathBuf,
    logits: Option<PathBuf>,
    timeout_ms: Option<u64>,
    workers: usize,
}

enum BackendSpec {
    Oracle(PathBuf),
    Heuristic(ColorModel),
    Extern(ExternalConfig),
}

fn parse_backend(spec: &str, timeout_ms: Option<u64>, workers: usize) -> Result<BackendSpec> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "oracle" if !arg.is_empty() => Ok(BackendSpec::Oracle(existing(PathBuf::from(arg), "oracle mask path")?)),
        "heuristic" if arg.is_empty() || arg == "default" => Ok(BackendSpec::Heuristic(ColorModel::default_palette())),
        "heuristic" => Ok(BackendSpec::Heuristic(load_colors(Some(Path::new(arg)))?)),
        "extern" if !arg.is_empty() => {
            let mut c = ExternalConfig::new(arg);
            c.timeout = timeout_ms.map(Duration::from_millis);
            c.max_workers = workers;
            Ok(BackendSpec::Extern(c))
        }
        _ => Err(invalid(format!("--backend `{spec}`: expected oracle:DIR, heuristic:FILE or extern:CMD"))),
    }
}

fn is_image(p: &Path) -> bool {
    let ext = p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) && !stem.ends_with("_mask")
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The ground-truth mask for `image_stem` under an oracle path.
fn oracle_mask(root: &Path, image_stem: &str) -> Result<LabelMask> {
    let path = if root.is_file() {
        root.to_path_buf()
    } else {
        [root.join(format!("{image_stem}_mask.png")), root.join(format!("{image_stem}.png"))]
            .into_iter()
            .find(|p| p.is_file())
            .ok_or_else(|| invalid(format!("no oracle mask for `{image_stem}` in {}", root.display())))?
    };
    LabelMask::load_png(&path).map_err(|e| invalid(format!("oracle mask {}: {e}", path.display())))
}

pub fn infer(cfg: &RunConfig, a: InferArgs) -> Result<()> {
    let s = &cfg.infer;
    let defaults = InferOptions::default();
    let upsample = match a.upsample {
        Some(u) => Some(parse_with::<Upsample>("upsample", &u)?),
        None => s.upsample,
    };
    let r = InferResolved {
        input: existing(required("input", [a.input, s.input.clone()])?, "input")?,
        backend: required("backend", [a.backend, s.backend.clone()])?,
        options: InferOptions {
            scales: a.scales.or(s.scales.clone()).unwrap_or(defaults.scales),
            patch: a.patch.or(s.patch).unwrap_or(defaults.patch),
            overlap: a.overlap.or(s.overlap).unwrap_or(defaults.overlap),
            upsample: upsample.unwrap_or_default(),
        },
        out: cfg.output(required("out", [a.out, s.out.clone()])?),
        logits: a.logits.or(s.logits.clone()).map(|p| cfg.output(p)),
        timeout_ms: a.timeout_ms.or(s.timeout_ms),
        workers: a.workers.or(s.workers).unwrap_or(1).max(1),
    };
    r.options.validate().map_err(|e| invalid(e.to_string()))?;
    let spec = parse_backend(&r.backend, r.timeout_ms, r.workers)?;

    let batch = r.input.is_dir();
    let inputs: Vec<PathBuf> = if batch {
        let mut v: Vec<PathBuf> = std::fs::read_dir(&r.input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_image(p))
            .collect();
        v.sort();
        if v.is_empty() {
            return Err(invalid(format!("no images in {}", r.input.display())));
        }
        v
    } else {
        vec![r.input.clone()]
    };
    if batch {
        create_dir(&r.out)?;
        if let Some(l) = &r.logits {
            create_dir(l)?;
        }
    } else {
        create_parent(&r.out)?;
        if let Some(l) = &r.logits {
            create_parent(l)?;
        }
    }

    // Long-lived backends are built once; the oracle is per image.
    let shared: Option<Box<dyn SegmentationBackend>> = match &spec {
        BackendSpec::Oracle(_) => None,
        BackendSpec::Heuristic(m) => Some(Box::new(HeuristicBackend::new(m).map_err(|e| invalid(e.to_string()))?)),
        BackendSpec::Extern(c) => Some(Box::new(
            ExternalBackend::spawn(c.clone()).with_context(|| format!("starting `{}`", c.command))?,
        )),
    };
    for path in &inputs {
        let name = stem(path);
        let image = image::open(path).with_context(|| format!("reading {}", path.display()))?.to_rgb8();
        let oracle;
        let backend: &dyn SegmentationBackend = match (&spec, &shared) {
            (BackendSpec::Oracle(root), _) => {
                oracle = OracleBackend::new(oracle_mask(root, &name)?);
                &oracle
            }
            (_, Some(b)) => b.as_ref(),
            _ => unreachable!("non-oracle backends are built up front"),
        };
        let pred = multiscale_infer(&image, backend, &r.options).with_context(|| format!("inferring {}", path.display()))?;
        let mask_path = if batch { r.out.join(format!("{name}.png")) } else { r.out.clone() };
        pred.mask.save_png(&mask_path).with_context(|| format!("writing {}", mask_path.display()))?;
        if let Some(l) = &r.logits {
            let lgt = if batch { l.join(format!("{name}.lgt")) } else { l.clone() };
            let file = std::fs::File::create(&lgt).with_context(|| format!("creating {}", lgt.display()))?;
            pred.logits.write_lgt(std::io::BufWriter::new(file)).with_context(|| format!("writing {}", lgt.display()))?;
        }
        log::info!("{} -> {}", path.display(), mask_path.display());
    }
    provenance::write(&r.out, "infer", cfg.seed, &r)
}

#[derive(Serialize)]
struct EvalResolved {
    pred: PathBuf,
    gt: PathBuf,
    strategy: Strategy,
    classes: ClassSet,
    report: PathBuf,
    confusion: Option<PathBuf>,
    normalize: Normalization,
}

pub fn eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let s = &cfg.eval;
    let strategy_name = a.strategy.or(s.strategy.clone()).unwrap_or_else(|| "sample-normalized-macro".into());
    let classes = match a.classes {
        Some(c) => parse_with::<ClassSet>("classes", &c)?,
        None => s.classes.unwrap_or_default(),
    };
    let normalize = match a.normalize {
        Some(n) => parse_with::<Normalization>("normalize", &n)?,
        None => s.normalize.unwrap_or_default(),
    };
    let r = EvalResolved {
        pred: existing(required("pred", [a.pred, s.pred.clone()])?, "prediction directory")?,
        gt: existing(required("gt", [a.gt, s.gt.clone()])?, "ground-truth directory")?,
        strategy: strategy_name.parse().map_err(|e: cartoseg::evaluation::EvalError| invalid(e.to_string()))?,
        classes,
        report: cfg.output(required("report", [a.report, s.report.clone()])?),
        confusion: a.confusion.or(s.confusion.clone()).map(|p| cfg.output(p)),
        normalize,
    };
    let pairs = load_pairs(&r.pred, &r.gt).context("loading masks")?;
    let counts = count_all(&pairs)?;
    let report = aggregate(&counts, r.strategy, r.classes)?;
    create_parent(&r.report)?;
    std::fs::write(&r.report, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", r.report.display()))?;
    if let Some(path) = &r.confusion {
        let m = confusion(pairs.iter().map(|(_, p, g)| (p, g)))?;
        create_parent(path)?;
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        m.write_csv(r.normalize, file)?;
    }
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} images, {}: mIoU {} mR {} mP {} Acc {:.4}",
        report.images,
        r.strategy,
        show(report.miou),
        show(report.mean_recall),
        show(report.mean_precision),
        report.accuracy
    );
    provenance::write(&r.report, "eval", cfg.seed, &r)
}

#[derive(Serialize)]
struct BiasResolved {
    metrics: PathBuf,
    metadata: PathBuf,
    out: PathBuf,
    min_count: usize,
}

#[derive(Serialize)]
struct BiasOutput {
    coefficients: Vec<cartoseg::bias::Coefficient>,
    r2: f64,
    n: usize,
    dropped_columns: Vec<String>,
    excluded_ids: Vec<String>,
    unscored_ids: Vec<String>,
}

pub fn bias(cfg: &RunConfig, a: BiasArgs) -> Result<()> {
    let s = &cfg.bias;
    let r = BiasResolved {
        metrics: existing(required("metrics", [a.metrics, s.metrics.clone()])?, "metrics report")?,
        metadata: existing(required("metadata", [a.metadata, s.metadata.clone()])?, "metadata CSV")?,
        out: cfg.output(required("out", [a.out, s.out.clone()])?),
        min_count: a.min_count.or(s.min_count).unwrap_or(DEFAULT_MIN_COUNT),
    };
    let text = std::fs::read_to_string(&r.metrics)?;
    let report: MetricsReport =
        serde_json::from_str(&text).map_err(|e| invalid(format!("metrics report {}: {e}", r.metrics.display())))?;
    let scores: BTreeMap<String, f64> =
        report.per_image.iter().filter_map(|i| i.miou.map(|m| (i.id.clone(), m))).collect();
    let csv = std::fs::File::open(&r.metadata)?;
    let (records, unscored) = read_metadata(csv, &scores).map_err(|e| invalid(e.to_string()))?;
    if !unscored.is_empty() {
        log::warn!("{} metadata rows have no score and were skipped", unscored.len());
    }
    let design = build_design(&records, r.min_count).map_err(|e| invalid(e.to_string()))?;
    let fit = ols_fit(&design, OlsOptions::default())?;
    let out = BiasOutput {
        coefficients: fit.coefficients,
        r2: fit.r2,
        n: fit.n,
        dropped_columns: fit.dropped_columns,
        excluded_ids: design.excluded,
        unscored_ids: unscored,
    };
    create_parent(&r.out)?;
    std::fs::write(&r.out, serde_json::to_string_pretty(&out)? + "\n")
        .with_context(|| format!("writing {}", r.out.display()))?;
    println!("n = {}, R² = {:.4}, {} coefficients", out.n, out.r2, out.coefficients.len());
    provenance::write(&r.out, "bias", cfg.seed, &r)
}

#[derive(Serialize)]
struct ColorfitResolved {
    images: PathBuf,
    masks: PathBuf,
    components: usize,
    max_iter: usize,
    tol: f64,
    samples_per_class: usize,
    out: PathBuf,
}

pub fn colorfit(cfg: &RunConfig, a: ColorfitArgs) -> Result<()> {
    let s = &cfg.colorfit;
    let images = existing(required("images", [a.images, s.images.clone()])?, "image directory")?;
    let r = ColorfitResolved {
        masks: existing(a.masks.or(s.masks.clone()).unwrap_or_else(|| images.clone()), "mask directory")?,
        images,
        components: a.components.or(s.components).unwrap_or(3),
        max_iter: a.max_iter.or(s.max_iter).unwrap_or(100),
        tol: a.tol.or(s.tol).unwrap_or(1e-6),
        samples_per_class: a.samples_per_class.or(s.samples_per_class).unwrap_or(20_000),
        out: cfg.output(required("out", [a.out, s.out.clone()])?),
    };
    if r.components == 0 || r.max_iter == 0 || !(r.tol > 0.0) || r.samples_per_class == 0 {
        return Err(invalid("--components, --max-iter, --tol and --samples-per-class must be positive"));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&r.images)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    paths.sort();
    let mut pixels: BTreeMap<SemanticClass, Vec<[f64; 3]>> = BTreeMap::new();
    let mut used = 0;
    for path in &paths {
        let name = stem(path);
        let mask_path = [r.masks.join(format!("{name}_mask.png")), r.masks.join(format!("{name}.png"))]
            .into_iter()
            .find(|p| p.is_file() && p != path);
        let Some(mask_path) = mask_path else {
            log::warn!("no mask for {}; skipped", path.display());
            continue;
        };
        let image = image::open(path).with_context(|| format!("reading {}", path.display()))?.to_rgb8();
        let mask = LabelMask::load_png(&mask_path).with_context(|| format!("reading {}", mask_path.display()))?;
        if image.dimensions() != mask.dims() {
            return Err(invalid(format!("{} and its mask differ in size", path.display())));
        }
        for (p, &c) in image.pixels().zip(mask.as_raw()) {
            let class = SemanticClass::from_id(c).expect("mask ids are validated on load");
            pixels.entry(class).or_default().push(p.0.map(f64::from));
        }
        used += 1;
    }
    if used == 0 {
        return Err(invalid(format!("no image/mask pairs in {}", r.images.display())));
    }
    // Evenly spaced thinning keeps the fit deterministic.
    for v in pixels.values_mut() {
        if v.len() > r.samples_per_class {
            let step = v.len().div_ceil(r.samples_per_class);
            *v = v.iter().step_by(step).copied().collect();
        }
    }
    let need = r.components * 10;
    let sparse: Vec<SemanticClass> =
        SemanticClass::ALL.into_iter().filter(|c| pixels.get(c).is_none_or(|v| v.len() < need)).collect();
    pixels.retain(|c, _| !sparse.contains(c));
    if pixels.is_empty() {
        return Err(invalid(format!("no class has the {need} pixels needed to fit {} components", r.components)));
    }
    let (mut model, report) = fit_color_model(&pixels, r.components, r.max_iter, r.tol)?;
    // Classes too rare to fit keep their default-palette mixture.
    let palette = ColorModel::default_palette();
    for c in &sparse {
        log::warn!("class {c} has fewer than {need} pixels; using the default palette entry");
        model.classes.insert(*c, palette.get(*c)?.clone());
    }
    create_parent(&r.out)?;
    std::fs::write(&r.out, model.to_json() + "\n").with_context(|| format!("writing {}", r.out.display()))?;
    for (class, ll) in &report.log_likelihood {
        log::info!("{class}: {} iterations, final mean log-likelihood {:.4}", ll.len(), ll.last().unwrap_or(&f64::NAN));
    }
    println!("fitted {} classes from {used} images", model.classes.len() - sparse.len());
    #[derive(Serialize)]
    struct Record<'a> {
        #[serde(flatten)]
        settings: &'a ColorfitResolved,
        palette_classes: Vec<SemanticClass>,
    }
    provenance::write(&r.out, "colorfit", cfg.seed, &Record { settings: &r, palette_classes: sparse })
}

#[derive(Serialize)]
struct FixturesResolved {
    regions: usize,
    seed: u64,
    out: PathBuf,
}

pub fn fixtures(cfg: &RunConfig, a: FixturesArgs) -> Result<()> {
    let s = &cfg.fixtures;
    let r = FixturesResolved {
        regions: a.regions.or(s.regions).unwrap_or(12),
        seed: a.seed.or(s.seed).or(cfg.seed).unwrap_or(0),
        out: cfg.output(required("out", [a.out, s.out.clone(), cfg.out_dir.clone()])?),
    };
    if r.regions == 0 {
        return Err(invalid("--regions must be at least 1"));
    }
    let corpus = Corpus::fixture(r.seed, r.regions)?;
    corpus.save(&r.out)?;
    std::fs::write(r.out.join("colors.json"), ColorModel::default_palette().to_json() + "\n")?;
    println!("wrote {} regions to {}", r.regions, r.out.display());
    provenance::write(&r.out, "fixtures", Some(r.seed), &r)
}

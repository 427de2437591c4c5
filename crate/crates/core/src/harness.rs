//! Batch commands behind the `scanpath` binary.
//!
//! Every command writes its outputs plus a `manifest.txt` (command, flags,
//! inputs, format versions) into an output directory, and is deterministic
//! given its arguments.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::data::{
    load_scanpath_dataset, preprocess, raw_images, read_checkpoint, synth_dataset, write_pgm, write_scanpath_dataset,
    write_tensor, Dataset, GrayImage, Split, CHECKPOINT_VERSION,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::metrics::{evaluate_set, human_baseline, random_baseline, MetricConfig, MetricReport};
use crate::model::{stream_rng, FeatureProvider, FeatureSourceKind, PrecomputedFeatures, ScanpathModel};
use crate::tensor::Tensor;
use crate::train::{model_from_checkpoint, train, TrainExample, TrainOutput, TrainRun, TrainState};
use crate::types::{gaussian_map, GridSpec, Scanpath};

/// Stream offset for the random baseline drawn by `evaluate`.
const RANDOM_BASELINE_STREAM: u64 = 1 << 40;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `manifest.txt`: one `key=value` line per entry after the fixed header.
pub fn write_manifest(out: &Path, command: &str, entries: &[(&str, String)]) -> Result<()> {
    let mut text = format!(
        "command={command}\nversion={}\ncheckpoint_format={CHECKPOINT_VERSION}\n",
        env!("CARGO_PKG_VERSION")
    );
    for (k, v) in entries {
        text.push_str(&format!("{k}={v}\n"));
    }
    write_text(&out.join("manifest.txt"), &text)
}

/// Model inputs for `d`: raw pixels for a trainable stack, feature files
/// otherwise.
pub fn feature_provider(
    source: FeatureSourceKind,
    grid: GridSpec,
    d: &Dataset,
    features_dir: Option<&Path>,
) -> Result<Box<dyn FeatureProvider>> {
    match source {
        FeatureSourceKind::Trainable => {
            if let Some(img) = d.images.iter().find(|i| i.pixels.is_none()) {
                return Err(Error::Format(format!(
                    "image '{}' has no pixels; a trainable feature stack needs them",
                    img.id
                )));
            }
            Ok(Box::new(raw_images(d, grid)?))
        }
        FeatureSourceKind::Precomputed => {
            let dir = features_dir.ok_or_else(|| Error::Usage("precomputed features need paths.features".into()))?;
            Ok(Box::new(PrecomputedFeatures::new(dir)))
        }
    }
}

/// Images of the test split, or every image when there is no test split.
pub fn evaluation_images(d: &Dataset) -> Dataset {
    let test = d.split(Split::Test);
    if test.images.is_empty() {
        log::warn!("dataset has no test split; using all images");
        return d.clone();
    }
    test
}

fn training_images(d: &Dataset) -> Result<Dataset> {
    let train = d.split(Split::Train);
    if train.images.is_empty() {
        return Err(Error::Empty("dataset has no training images".into()));
    }
    Ok(train)
}

/// Prepared training examples for the train split of `d`.
pub fn training_examples(cfg: &RunConfig, d: &Dataset) -> Result<Vec<TrainExample>> {
    let m = &cfg.train.model;
    let train_set = training_images(d)?;
    let provider = feature_provider(m.feature_source, m.grid, &train_set, cfg.features.as_deref())?;
    preprocess(&train_set, m.grid, m.seq_len, m.sigma)?
        .into_iter()
        .map(|image| {
            Ok(TrainExample {
                input: provider.input(&image.image_id)?,
                image,
            })
        })
        .collect()
}

/// Trains on the dataset named by `cfg.dataset`, optionally resuming from a
/// checkpoint. Writes `config.txt`, `loss.csv` and checkpoints into `out`.
pub fn cmd_train(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<TrainRun> {
    cfg.validate()?;
    let data_path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Error::Usage("train needs a dataset (paths.dataset or --dataset)".into()))?;
    let d = load_scanpath_dataset(data_path)?;
    let examples = training_examples(cfg, &d)?;
    create_dir(out)?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    let state = match resume {
        Some(p) => Some(TrainState::from_checkpoint(&read_checkpoint(p)?, &cfg.train)?),
        None => None,
    };
    let run = train(&examples, &cfg.train, state, Some(&TrainOutput { dir: out.into() }))?;
    write_manifest(
        out,
        "train",
        &[
            ("dataset", data_path.display().to_string()),
            ("resume", resume.map(|p| p.display().to_string()).unwrap_or_default()),
            ("seed", cfg.train.seed.to_string()),
            ("images", examples.len().to_string()),
            ("steps", run.state.step.to_string()),
        ],
    )?;
    Ok(run)
}

/// Loads a checkpoint's model, optionally overriding the sampling threshold.
pub fn load_for_sampling(checkpoint: &Path, th: Option<f64>) -> Result<ScanpathModel> {
    let mut model = model_from_checkpoint(&read_checkpoint(checkpoint)?)?;
    if let Some(th) = th {
        model.cfg.th = th;
        model.cfg.validate()?;
    }
    Ok(model)
}

/// Options shared by the sampling commands.
#[derive(Clone, Debug, Default)]
pub struct SampleOptions {
    pub seed: u64,
    pub exec: Exec,
    pub features: Option<PathBuf>,
}

/// Predicted scanpaths in native pixels with one `[N, H, W]` tSPM stack per
/// rollout.
#[derive(Clone, Debug)]
pub struct Predictions {
    pub dataset: Dataset,
    pub tspms: Vec<(String, Tensor)>,
}

/// `count` free rollouts per evaluation image. Rollout `k` of image `i` uses
/// stream `i * count + k`.
pub fn predict(model: &ScanpathModel, d: &Dataset, count: usize, opts: &SampleOptions) -> Result<Predictions> {
    if count == 0 {
        return Err(Error::Parameter("count must be positive".into()));
    }
    let eval = evaluation_images(d);
    let grid = model.cfg.grid;
    let provider = feature_provider(model.cfg.feature_source, grid, &eval, opts.features.as_deref())?;
    let mut scanpaths = Vec::new();
    let mut tspms = Vec::new();
    for (i, img) in eval.images.iter().enumerate() {
        let feat = model.build_features(&img.id, provider.as_ref())?;
        let streams: Vec<u64> = (0..count as u64).map(|k| i as u64 * count as u64 + k).collect();
        let rollouts = model.rollout_batch(&feat, &[], opts.seed, &streams, opts.exec)?;
        for (k, r) in rollouts.into_iter().enumerate() {
            let name = format!("model{k:02}");
            let mut stack = Vec::with_capacity(r.frames.len() * grid.len());
            for f in &r.frames {
                stack.extend_from_slice(f.values());
            }
            tspms.push((
                format!("{}_{name}", img.id),
                Tensor::from_vec(vec![r.frames.len(), grid.height, grid.width], stack)?,
            ));
            let points = r.points.iter().map(|p| grid.rescale(*p, img.grid())).collect();
            scanpaths.push(Scanpath::new(img.id.clone(), name, points));
        }
    }
    Ok(Predictions {
        dataset: without_pixels(&eval, scanpaths),
        tspms,
    })
}

fn without_pixels(d: &Dataset, scanpaths: Vec<Scanpath>) -> Dataset {
    let mut images = d.images.clone();
    for img in &mut images {
        img.pixels = None;
    }
    Dataset { images, scanpaths }
}

/// Writes `predicted.csv` (plus its index) and, when asked, `tspm/*.ftns`.
pub fn cmd_predict(
    checkpoint: &Path,
    dataset: &Path,
    count: usize,
    th: Option<f64>,
    dump_tspm: bool,
    opts: &SampleOptions,
    out: &Path,
) -> Result<PathBuf> {
    let model = load_for_sampling(checkpoint, th)?;
    let d = load_scanpath_dataset(dataset)?;
    let pred = predict(&model, &d, count, opts)?;
    create_dir(out)?;
    let csv = out.join("predicted.csv");
    write_scanpath_dataset(&csv, &pred.dataset)?;
    if dump_tspm {
        let dir = out.join("tspm");
        create_dir(&dir)?;
        for (name, t) in &pred.tspms {
            write_tensor(&dir.join(format!("{name}.ftns")), t)?;
        }
    }
    write_manifest(
        out,
        "predict",
        &[
            ("checkpoint", checkpoint.display().to_string()),
            ("dataset", dataset.display().to_string()),
            ("count", count.to_string()),
            ("th", model.cfg.th.to_string()),
            ("seed", opts.seed.to_string()),
            ("dump_tspm", dump_tspm.to_string()),
        ],
    )?;
    Ok(csv)
}

/// `repeats` completions of every evaluation scanpath from its first
/// `prefix_len` fixations. The prefix is kept verbatim in native pixels;
/// observer ids are `<observer>#<k>`. Scanpaths shorter than the prefix are
/// skipped.
pub fn complete(
    model: &ScanpathModel,
    d: &Dataset,
    prefix_len: usize,
    repeats: usize,
    opts: &SampleOptions,
) -> Result<Dataset> {
    let n = model.cfg.seq_len;
    if prefix_len == 0 || prefix_len >= n {
        return Err(Error::Parameter(format!(
            "prefix length must be in 1..{n}, got {prefix_len}"
        )));
    }
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be positive".into()));
    }
    let eval = evaluation_images(d);
    let grid = model.cfg.grid;
    let provider = feature_provider(model.cfg.feature_source, grid, &eval, opts.features.as_deref())?;
    let mut out = Vec::new();
    let mut job = 0u64;
    for (img, paths) in eval.grouped() {
        let native = img.grid();
        let feat = model.build_features(&img.id, provider.as_ref())?;
        for s in paths {
            if s.len() < prefix_len {
                log::warn!("{}/{} is shorter than the prefix; skipped", s.image_id, s.observer_id);
                continue;
            }
            let prefix: Vec<_> = s.points[..prefix_len]
                .iter()
                .map(|p| native.rescale(*p, grid))
                .collect();
            let streams: Vec<u64> = (0..repeats as u64).map(|k| job * repeats as u64 + k).collect();
            job += 1;
            let rollouts = model.rollout_batch(&feat, &prefix, opts.seed, &streams, opts.exec)?;
            for (k, r) in rollouts.into_iter().enumerate() {
                let mut points = s.points[..prefix_len].to_vec();
                points.extend(r.points[prefix_len..].iter().map(|p| grid.rescale(*p, native)));
                out.push(Scanpath::new(img.id.clone(), format!("{}#{k}", s.observer_id), points));
            }
        }
    }
    Ok(without_pixels(&eval, out))
}

pub fn cmd_complete(
    checkpoint: &Path,
    dataset: &Path,
    prefix_len: usize,
    repeats: usize,
    opts: &SampleOptions,
    out: &Path,
) -> Result<PathBuf> {
    let model = load_for_sampling(checkpoint, None)?;
    let d = load_scanpath_dataset(dataset)?;
    let done = complete(&model, &d, prefix_len, repeats, opts)?;
    create_dir(out)?;
    let csv = out.join("completions.csv");
    write_scanpath_dataset(&csv, &done)?;
    write_manifest(
        out,
        "complete",
        &[
            ("checkpoint", checkpoint.display().to_string()),
            ("dataset", dataset.display().to_string()),
            ("prefix_len", prefix_len.to_string()),
            ("repeats", repeats.to_string()),
            ("seed", opts.seed.to_string()),
        ],
    )?;
    Ok(csv)
}

/// Native image sizes by id.
pub fn image_spaces(d: &Dataset) -> HashMap<String, GridSpec> {
    d.images.iter().map(|i| (i.id.clone(), i.grid())).collect()
}

/// Model report and, optionally, human and random baselines.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub model: MetricReport,
    pub human: Option<MetricReport>,
    pub random: Option<MetricReport>,
}

/// Scores `predicted` against `truth`. The random baseline draws as many
/// scanpaths per image as were predicted for it, each as long as the
/// image's first ground-truth scanpath.
pub fn evaluate(
    predicted: &Dataset,
    truth: &Dataset,
    cfg: &MetricConfig,
    baselines: bool,
    seed: u64,
    exec: Exec,
) -> Result<Evaluation> {
    let spaces = image_spaces(truth);
    let model = evaluate_set(&predicted.scanpaths, &truth.scanpaths, &spaces, cfg, exec)?;
    if !baselines {
        return Ok(Evaluation {
            model,
            human: None,
            random: None,
        });
    }
    let human = human_baseline(&truth.scanpaths, &spaces, cfg, exec)?;
    let mut per_image: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &predicted.scanpaths {
        *per_image.entry(s.image_id.as_str()).or_default() += 1;
    }
    let mut rng = stream_rng(seed, RANDOM_BASELINE_STREAM);
    let mut random = Vec::new();
    for (id, count) in per_image {
        let n = truth.scanpaths_for(id).first().map_or(0, |s| s.len());
        let space = spaces[id];
        random.extend(random_baseline(id, space, n.max(1), count, &mut rng)?);
    }
    let random = evaluate_set(&random, &truth.scanpaths, &spaces, cfg, exec)?;
    Ok(Evaluation {
        model,
        human: Some(human),
        random: Some(random),
    })
}

/// Writes `report.csv` and, with baselines, `human.csv` and `random.csv`.
pub fn cmd_evaluate(
    predicted: &Path,
    truth: &Path,
    cfg: &MetricConfig,
    baselines: bool,
    seed: u64,
    out: &Path,
) -> Result<Evaluation> {
    let pred = load_scanpath_dataset(predicted)?;
    let gt = load_scanpath_dataset(truth)?;
    let ev = evaluate(&pred, &gt, cfg, baselines, seed, Exec::default())?;
    create_dir(out)?;
    ev.model.write_csv(&out.join("report.csv"))?;
    if let Some(h) = &ev.human {
        h.write_csv(&out.join("human.csv"))?;
    }
    if let Some(r) = &ev.random {
        r.write_csv(&out.join("random.csv"))?;
    }
    write_manifest(
        out,
        "evaluate",
        &[
            ("predicted", predicted.display().to_string()),
            ("truth", truth.display().to_string()),
            ("baselines", baselines.to_string()),
            ("seed", seed.to_string()),
            ("metrics.bins_x", cfg.bins_x.to_string()),
            ("metrics.bins_y", cfg.bins_y.to_string()),
            ("metrics.radius_frac", cfg.radius_frac.to_string()),
            ("metrics.min_line", cfg.min_line.to_string()),
            ("metrics.tde_k", cfg.tde_k.to_string()),
        ],
    )?;
    Ok(ev)
}

/// Sum of fixation Gaussians over every fixation in `paths`, computed on
/// `grid` after rescaling from the native size.
pub fn saliency_map(paths: &[&Scanpath], native: GridSpec, grid: GridSpec, sigma: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; grid.len()];
    for s in paths {
        for p in &s.points {
            let m = gaussian_map(native.rescale(*p, grid), grid, sigma)?;
            for (a, v) in acc.iter_mut().zip(m.values()) {
                *a += v;
            }
        }
    }
    Ok(acc)
}

/// Max-normalized 8-bit rendering of a nonnegative map.
pub fn heatmap_image(map: &[f64], grid: GridSpec) -> GrayImage {
    let max = map.iter().copied().fold(0.0, f64::max);
    let pixels = map
        .iter()
        .map(|v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
        .collect();
    GrayImage {
        width: grid.width,
        height: grid.height,
        pixels,
    }
}

/// Per-image saliency maps of every image that has scanpaths. `grid = None`
/// keeps each image's native size.
pub fn saliency_maps(
    d: &Dataset,
    grid: Option<GridSpec>,
    sigma: f64,
) -> Result<BTreeMap<String, (GridSpec, Vec<f64>)>> {
    let mut out = BTreeMap::new();
    for (img, paths) in d.grouped() {
        if paths.is_empty() {
            continue;
        }
        let g = grid.unwrap_or(img.grid());
        out.insert(img.id.clone(), (g, saliency_map(&paths, img.grid(), g, sigma)?));
    }
    Ok(out)
}

/// One `<image_id>.pgm` heatmap per image.
pub fn cmd_saliency(scanpaths: &Path, grid: Option<GridSpec>, sigma: f64, out: &Path) -> Result<Vec<PathBuf>> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let d = load_scanpath_dataset(scanpaths)?;
    create_dir(out)?;
    let mut written = Vec::new();
    for (id, (g, map)) in saliency_maps(&d, grid, sigma)? {
        let path = out.join(format!("{id}.pgm"));
        write_pgm(&path, &heatmap_image(&map, g))?;
        written.push(path);
    }
    write_manifest(
        out,
        "saliency",
        &[
            ("scanpaths", scanpaths.display().to_string()),
            (
                "grid",
                grid.map(|g| format!("{}x{}", g.width, g.height))
                    .unwrap_or_else(|| "native".into()),
            ),
            ("sigma", sigma.to_string()),
        ],
    )?;
    Ok(written)
}

/// KL divergence between two nonnegative maps after normalizing each to
/// unit mass. `eps` is added to every cell of both maps first.
pub fn map_kl(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Shape(format!("maps of {} and {} cells", p.len(), q.len())));
    }
    let sp: f64 = p.iter().map(|v| v + eps).sum();
    let sq: f64 = q.iter().map(|v| v + eps).sum();
    if !(sp > 0.0 && sq > 0.0) {
        return Err(Error::Numerical("map with zero mass".into()));
    }
    Ok(p.iter()
        .zip(q)
        .map(|(a, b)| {
            let a = (a + eps) / sp;
            let b = (b + eps) / sq;
            if a > 0.0 {
                a * (a / b).ln()
            } else {
                0.0
            }
        })
        .sum())
}

/// Writes a synthetic benchmark as `fixations.csv` plus index and images.
pub fn cmd_synth(cfg: &RunConfig, seed: u64, out: &Path) -> Result<PathBuf> {
    cfg.synth.validate()?;
    let d = synth_dataset(&cfg.synth, &mut ChaCha8Rng::seed_from_u64(seed))?;
    create_dir(out)?;
    let csv = out.join("fixations.csv");
    write_scanpath_dataset(&csv, &d)?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    write_manifest(
        out,
        "synth",
        &[
            ("seed", seed.to_string()),
            ("images", d.images.len().to_string()),
            ("scanpaths", d.scanpaths.len().to_string()),
        ],
    )?;
    Ok(csv)
}

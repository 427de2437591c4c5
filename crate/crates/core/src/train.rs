//! Training loop: one image per step, Adam updates, loss log and checkpoints.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{model_pairs, train_config_from_pairs, train_config_pairs};
use crate::data::{write_checkpoint, Checkpoint, PreparedImage};
use crate::error::{Error, Result};
use crate::loss::{kl_dtw_loss, CenterPrior, LossConfig};
use crate::model::{sample_next_point, stream_rng, ImageInput, ModelConfig, ModelParams, ModelVars, ScanpathModel};
use crate::tensor::{adam_step, AdamConfig, AdamState, Graph, Tensor, Var};
use crate::types::{gaussian_map, ProbMap};

/// Stream offsets keep per-step and per-epoch generators apart from each
/// other and from the stream used for weight initialization.
const STEP_STREAM: u64 = 1 << 47;
const EPOCH_STREAM: u64 = 1 << 48;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_steps: u64,
    /// Checkpoint cadence in steps.
    pub checkpoint_every: u64,
    pub seed: u64,
    pub loss: LossConfig,
    pub model: ModelConfig,
    /// Feed ground-truth fixations of the anchor scanpath as inputs. When
    /// false, each step's input is sampled from the previous frame instead.
    pub teacher_forcing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self {
            lr: 1e-4,
            max_steps: 1000,
            checkpoint_every: 500,
            seed: 0,
            loss: LossConfig {
                sigma: model.sigma,
                ..LossConfig::default()
            },
            model,
            teacher_forcing: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Parameter(format!("lr must be positive, got {}", self.lr)));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Parameter("checkpoint_every must be positive".into()));
        }
        self.model.validate()?;
        self.loss.validate()
    }
}

/// One image with its prepared ground truth and model input.
#[derive(Clone, Debug)]
pub struct TrainExample {
    pub image: PreparedImage,
    pub input: ImageInput,
}

/// Parameters, optimizer moments and the number of completed steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: ScanpathModel,
    pub adam: AdamState,
    pub step: u64,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let model = ScanpathModel::new(cfg.model, cfg.seed)?;
        let adam = AdamState::new(model.params.named().into_iter().map(|(_, t)| t));
        Ok(Self { model, adam, step: 0 })
    }

    pub fn to_checkpoint(&self, cfg: &TrainConfig) -> Checkpoint {
        let named = self.model.params.named();
        let mut tensors: Vec<(String, Tensor)> = named.iter().map(|(n, t)| (n.clone(), (*t).clone())).collect();
        for ((n, _), m) in named.iter().zip(&self.adam.first_moment) {
            tensors.push((format!("adam.m.{n}"), m.clone()));
        }
        for ((n, _), v) in named.iter().zip(&self.adam.second_moment) {
            tensors.push((format!("adam.v.{n}"), v.clone()));
        }
        let mut meta: std::collections::BTreeMap<String, String> = train_config_pairs(cfg).into_iter().collect();
        meta.insert("state.step".into(), self.step.to_string());
        meta.insert("state.adam_step".into(), self.adam.step.to_string());
        Checkpoint { tensors, meta }
    }

    /// Restores training state. Model, loss and seed settings in `cfg` must
    /// agree with the checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint, cfg: &TrainConfig) -> Result<Self> {
        let stored = checkpoint_train_config(ck)?;
        let ours = train_config_pairs(cfg);
        let theirs = train_config_pairs(&stored);
        for ((k, a), (_, b)) in ours.iter().zip(&theirs) {
            let pinned = k.starts_with("model.") || k.starts_with("loss.") || k == "train.seed";
            if pinned && a != b {
                return Err(Error::ConfigMismatch(format!(
                    "{k}: checkpoint has {b}, config has {a}"
                )));
            }
        }
        let model = load_model(ck, cfg.model)?;
        let names: Vec<String> = model.params.named().into_iter().map(|(n, _)| n).collect();
        let moments = |prefix: &str| -> Result<Vec<Tensor>> {
            names
                .iter()
                .map(|n| ck.tensor(&format!("{prefix}.{n}")).cloned())
                .collect()
        };
        let adam = AdamState {
            step: parse_meta(ck, "state.adam_step")?,
            first_moment: moments("adam.m")?,
            second_moment: moments("adam.v")?,
        };
        Ok(Self {
            model,
            adam,
            step: parse_meta(ck, "state.step")?,
        })
    }
}

fn parse_meta(ck: &Checkpoint, key: &str) -> Result<u64> {
    let v = ck.meta(key)?;
    v.parse()
        .map_err(|_| Error::Format(format!("checkpoint entry {key}='{v}' is not an integer")))
}

/// Training configuration stored in a checkpoint.
pub fn checkpoint_train_config(ck: &Checkpoint) -> Result<TrainConfig> {
    for (k, _) in model_pairs(&ModelConfig::default()) {
        ck.meta(&k)?;
    }
    train_config_from_pairs(ck.meta.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

/// Model parameters from a checkpoint, checked against `cfg`.
pub fn load_model(ck: &Checkpoint, cfg: ModelConfig) -> Result<ScanpathModel> {
    let stored = checkpoint_train_config(ck)?.model;
    if model_pairs(&stored) != model_pairs(&cfg) {
        return Err(Error::ConfigMismatch(
            "checkpoint was trained with a different model configuration".into(),
        ));
    }
    let mut params = ModelParams::init(&cfg, &mut stream_rng(0, 0));
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for (slot, name) in params.tensors_mut().into_iter().zip(&names) {
        let t = ck.tensor(name)?;
        if t.shape() != slot.shape() {
            return Err(Error::ConfigMismatch(format!(
                "tensor {name} is {:?}, expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t.clone();
    }
    ScanpathModel::from_parts(cfg, params)
}

/// Model stored in a checkpoint, using the checkpoint's own configuration.
pub fn model_from_checkpoint(ck: &Checkpoint) -> Result<ScanpathModel> {
    load_model(ck, checkpoint_train_config(ck)?.model)
}

/// Differentiable tSPM frames for one training rollout. The Bayesian weights
/// are drawn first, then (in free-running mode) the fixation samples.
pub fn training_frames<R: Rng + ?Sized>(
    g: &Graph,
    model: &ScanpathModel,
    vars: &ModelVars,
    ex: &TrainExample,
    anchor: usize,
    teacher_forcing: bool,
    rng: &mut R,
) -> Result<Vec<Var>> {
    let features = model.feature_var(g, vars, &ex.input)?;
    let n = model.cfg.seq_len;
    if teacher_forcing {
        let inputs = &ex.image.scanpaths[anchor].points;
        return model.teacher_forced(g, vars, features, inputs, n, rng);
    }
    let grid = model.cfg.grid;
    let mut session = model.session(g, vars, features, rng)?;
    let mut fix = model.center_prior()?;
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let frame = session.step(g.constant(fix.to_tensor()))?;
        let map = ProbMap::from_weights(grid, g.value(frame).data())?;
        let p = sample_next_point(&map, model.cfg.th, model.cfg.threshold_mode, rng);
        fix = gaussian_map(p, grid, model.cfg.sigma)?;
        frames.push(frame);
    }
    Ok(frames)
}

/// One optimization step on a single image. Returns the loss before the
/// update.
pub fn train_step<R: Rng + ?Sized>(
    state: &mut TrainState,
    ex: &TrainExample,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let truth = &ex.image.maps;
    if truth.is_empty() {
        return Err(Error::Empty(format!("image '{}' has no scanpaths", ex.image.image_id)));
    }
    let anchor = rng.random_range(0..truth.len());
    let g = Graph::new();
    let vars = state.model.params.register(&g, true);
    let frames = training_frames(&g, &state.model, &vars, ex, anchor, cfg.teacher_forcing, rng)?;
    let prior = CenterPrior::new(state.model.cfg.grid, cfg.loss.sigma)?;
    let loss = kl_dtw_loss(&g, &frames, truth, &prior, &cfg.loss)?;
    let value = g.scalar_value(loss);
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "loss is {value} at step {} on image '{}'",
            state.step, ex.image.image_id
        )));
    }
    g.backward(loss)?;
    // `all` follows the order of `tensors_mut`.
    let grads: Vec<Tensor> = vars.all().into_iter().map(|v| g.grad(v)).collect();
    if grads.iter().any(|t| t.data().iter().any(|x| !x.is_finite())) {
        return Err(Error::Numerical(format!("non-finite gradient at step {}", state.step)));
    }
    let mut params = state.model.params.tensors_mut();
    adam_step(&mut params, &grads, &mut state.adam, &AdamConfig::with_lr(cfg.lr))?;
    state.step += 1;
    Ok(value)
}

/// Example index used at `step`: a fresh seeded permutation every epoch.
pub fn example_order(seed: u64, n: usize, step: u64) -> usize {
    let epoch = step / n as u64;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, EPOCH_STREAM + epoch));
    order[(step % n as u64) as usize]
}

/// Generator for step `step`.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    stream_rng(seed, STEP_STREAM + step)
}

/// Where [`train`] writes its files.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub dir: PathBuf,
}

impl TrainOutput {
    pub fn loss_log(&self) -> PathBuf {
        self.dir.join("loss.csv")
    }

    pub fn checkpoint(&self, step: u64) -> PathBuf {
        self.dir.join(format!("checkpoint_{step:06}.spck"))
    }

    pub fn last_checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint_last.spck")
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub state: TrainState,
    /// `(step, loss)` for every step taken in this call.
    pub losses: Vec<(u64, f64)>,
}

pub fn loss_csv_line(step: u64, loss: f64) -> String {
    format!("{step},{loss}\n")
}

/// Runs steps until `cfg.max_steps` steps have been completed in total,
/// starting from `state` (fresh when `None`). With an output directory the
/// loss log and checkpoints are written as training proceeds; a fresh run
/// also writes its initial checkpoint.
pub fn train(
    examples: &[TrainExample],
    cfg: &TrainConfig,
    state: Option<TrainState>,
    out: Option<&TrainOutput>,
) -> Result<TrainRun> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("training needs at least one image".into()));
    }
    let mut state = match state {
        Some(s) => s,
        None => TrainState::new(cfg)?,
    };
    let mut log = match out {
        Some(o) => Some(open_log(o, state.step)?),
        None => None,
    };
    if let Some(o) = out {
        if state.step == 0 {
            save(o, &state, cfg, true)?;
        }
    }
    let mut losses = Vec::new();
    while state.step < cfg.max_steps {
        let t = state.step;
        let ex = &examples[example_order(cfg.seed, examples.len(), t)];
        let loss = train_step(&mut state, ex, cfg, &mut step_rng(cfg.seed, t))?;
        log::debug!("step {t}: loss {loss}");
        losses.push((t, loss));
        if let (Some((path, file)), Some(o)) = (log.as_mut(), out) {
            file.write_all(loss_csv_line(t, loss).as_bytes())
                .map_err(|e| Error::io(path.as_path(), e))?;
            if state.step % cfg.checkpoint_every == 0 {
                save(o, &state, cfg, true)?;
            }
        }
    }
    if let Some(o) = out {
        save(o, &state, cfg, false)?;
    }
    Ok(TrainRun { state, losses })
}

fn open_log(o: &TrainOutput, step: u64) -> Result<(PathBuf, std::fs::File)> {
    let path = o.loss_log();
    std::fs::create_dir_all(&o.dir).map_err(|e| Error::io(&o.dir, e))?;
    let mut file = if step == 0 {
        std::fs::File::create(&path)
    } else {
        OpenOptions::new().append(true).create(true).open(&path)
    }
    .map_err(|e| Error::io(&path, e))?;
    if step == 0 {
        file.write_all(b"step,loss\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok((path, file))
}

fn save(o: &TrainOutput, state: &TrainState, cfg: &TrainConfig, numbered: bool) -> Result<()> {
    let ck = state.to_checkpoint(cfg);
    if numbered {
        write_checkpoint(&o.checkpoint(state.step), &ck)?;
    }
    write_checkpoint(&o.last_checkpoint(), &ck)
}

/// Reads a `step,loss` log.
pub fn read_loss_log(path: &Path) -> Result<Vec<(u64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let bad = || Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                msg: format!("expected step,loss, got '{l}'"),
            };
            let (s, v) = l.split_once(',').ok_or_else(bad)?;
            Ok((s.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{preprocess, raw_images, synth_dataset, SynthConfig};
    use crate::loss::soft_dtw_value;
    use crate::model::{FeatureProvider, FeatureSourceKind};
    use crate::types::{GazePoint, GridSpec, Scanpath};
    use rand::SeedableRng;

    fn small_cfg() -> TrainConfig {
        let model = ModelConfig {
            grid: GridSpec::square(8).unwrap(),
            layers: 2,
            hidden_channels: 2,
            feature_channels: 2,
            seq_len: 4,
            sigma: 1.5,
            ..ModelConfig::default()
        };
        TrainConfig {
            lr: 1e-2,
            max_steps: 6,
            checkpoint_every: 2,
            seed: 9,
            loss: LossConfig {
                sigma: model.sigma,
                ..LossConfig::default()
            },
            model,
            teacher_forcing: true,
        }
    }

    fn examples(cfg: &TrainConfig) -> Vec<TrainExample> {
        let synth = SynthConfig {
            n_images: 3,
            observers: 3,
            width: 40,
            height: 40,
            seq_len: cfg.model.seq_len,
            ..SynthConfig::default()
        };
        let d = synth_dataset(&synth, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let raw = raw_images(&d, cfg.model.grid).unwrap();
        preprocess(&d, cfg.model.grid, cfg.model.seq_len, cfg.model.sigma)
            .unwrap()
            .into_iter()
            .map(|image| TrainExample {
                input: raw.input(&image.image_id).unwrap(),
                image,
            })
            .collect()
    }

    #[test]
    fn zero_lambda_loss_matches_the_plain_oracle() {
        let mut cfg = small_cfg();
        cfg.loss.lambda_base = 0.0;
        cfg.loss.lambda_slope = 0.0;
        let ex = &examples(&cfg)[0];
        let state = TrainState::new(&cfg).unwrap();
        let loss = train_step(&mut state.clone(), ex, &cfg, &mut step_rng(1, 0)).unwrap();

        // Same draws, computed without the autodiff loss.
        let mut rng = step_rng(1, 0);
        let anchor = rng.random_range(0..ex.image.maps.len());
        let g = Graph::new();
        let vars = state.model.params.register(&g, true);
        let frames = training_frames(&g, &state.model, &vars, ex, anchor, true, &mut rng).unwrap();
        let preds: Vec<Vec<f64>> = frames.iter().map(|f| g.value(*f).data().to_vec()).collect();
        let kl = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum::<f64>();
        let n = preds.len();
        let mut total = 0.0;
        for s in &ex.image.maps {
            let delta: Vec<f64> = preds
                .iter()
                .flat_map(|p| s.maps.iter().map(move |m| kl(p, m.values())))
                .collect();
            total += soft_dtw_value(&delta, n, s.len(), cfg.loss.gamma).unwrap();
        }
        let oracle = total / ex.image.maps.len() as f64;
        assert!(
            (loss - oracle).abs() < 1e-9 * oracle.abs().max(1.0),
            "{loss} vs {oracle}"
        );
    }

    #[test]
    fn one_step_moves_every_layer() {
        let cfg = small_cfg();
        let ex = &examples(&cfg)[1];
        let mut state = TrainState::new(&cfg).unwrap();
        let before = state.model.params.clone();
        train_step(&mut state, ex, &cfg, &mut step_rng(cfg.seed, 0)).unwrap();
        let after = &state.model.params;
        let moved = |a: &Tensor, b: &Tensor| a.max_abs_diff(b) > 0.0;
        for (a, b) in before.features.iter().zip(&after.features) {
            assert!(moved(&a.kernel, &b.kernel) || moved(&a.bias, &b.bias));
        }
        for (a, b) in before.lstm.iter().zip(&after.lstm) {
            assert!(moved(&a.mu, &b.mu) && moved(&a.rho, &b.rho));
        }
        assert!(moved(&before.head.kernel, &after.head.kernel));
        assert_eq!(state.step, 1);
        assert_eq!(state.adam.step, 1);
    }

    #[test]
    fn repeated_step_differs_only_through_adam() {
        let cfg = small_cfg();
        let ex = &examples(&cfg)[0];
        let mut state = TrainState::new(&cfg).unwrap();
        let l1 = train_step(&mut state, ex, &cfg, &mut step_rng(3, 3)).unwrap();
        let l2 = train_step(&mut state, ex, &cfg, &mut step_rng(3, 3)).unwrap();
        assert_ne!(l1, l2);
        let mut fresh = TrainState::new(&cfg).unwrap();
        assert_eq!(train_step(&mut fresh, ex, &cfg, &mut step_rng(3, 3)).unwrap(), l1);
    }

    #[test]
    fn empty_truth_is_rejected() {
        let cfg = small_cfg();
        let mut ex = examples(&cfg).remove(0);
        ex.image.maps.clear();
        ex.image.scanpaths.clear();
        let mut state = TrainState::new(&cfg).unwrap();
        assert!(matches!(
            train_step(&mut state, &ex, &cfg, &mut step_rng(0, 0)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn free_running_mode_trains() {
        let cfg = TrainConfig {
            teacher_forcing: false,
            max_steps: 2,
            ..small_cfg()
        };
        let run = train(&examples(&cfg), &cfg, None, None).unwrap();
        assert_eq!(run.losses.len(), 2);
        assert!(run.losses.iter().all(|(_, l)| l.is_finite()));
    }

    #[test]
    fn deterministic_logs_and_checkpoint_cadence() {
        let cfg = small_cfg();
        let ex = examples(&cfg);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let oa = TrainOutput { dir: a.path().into() };
        let ob = TrainOutput { dir: b.path().into() };
        train(&ex, &cfg, None, Some(&oa)).unwrap();
        train(&ex, &cfg, None, Some(&ob)).unwrap();
        let la = std::fs::read(oa.loss_log()).unwrap();
        assert_eq!(la, std::fs::read(ob.loss_log()).unwrap());
        assert_eq!(read_loss_log(&oa.loss_log()).unwrap().len(), 6);
        for s in [0, 2, 4, 6] {
            assert!(oa.checkpoint(s).exists(), "checkpoint {s}");
        }
        assert!(!oa.checkpoint(1).exists());
        assert_eq!(
            std::fs::read(oa.last_checkpoint()).unwrap(),
            std::fs::read(ob.last_checkpoint()).unwrap()
        );
    }

    #[test]
    fn zero_steps_writes_the_initial_checkpoint_only() {
        let cfg = TrainConfig {
            max_steps: 0,
            ..small_cfg()
        };
        let dir = tempfile::tempdir().unwrap();
        let o = TrainOutput { dir: dir.path().into() };
        let run = train(&examples(&cfg), &cfg, None, Some(&o)).unwrap();
        assert!(run.losses.is_empty());
        assert!(o.checkpoint(0).exists());
        assert_eq!(std::fs::read_to_string(o.loss_log()).unwrap(), "step,loss\n");
        let ck = crate::data::read_checkpoint(&o.last_checkpoint()).unwrap();
        assert_eq!(
            TrainState::from_checkpoint(&ck, &cfg).unwrap(),
            TrainState::new(&cfg).unwrap()
        );
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let cfg = TrainConfig {
            max_steps: 5,
            ..small_cfg()
        };
        let ex = examples(&cfg);
        let full = train(&ex, &cfg, None, None).unwrap();
        let first = train(
            &ex,
            &TrainConfig {
                max_steps: 2,
                ..cfg.clone()
            },
            None,
            None,
        )
        .unwrap();
        let ck = crate::data::Checkpoint::decode(&first.state.to_checkpoint(&cfg).encode()).unwrap();
        let resumed = TrainState::from_checkpoint(&ck, &cfg).unwrap();
        let rest = train(&ex, &cfg, Some(resumed), None).unwrap();
        let joined: Vec<_> = first.losses.iter().chain(&rest.losses).copied().collect();
        assert_eq!(joined.len(), 5);
        for ((s, a), (t, b)) in full.losses.iter().zip(&joined) {
            assert_eq!(s, t);
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(rest.state, full.state);
    }

    #[test]
    fn mismatched_checkpoint_is_rejected() {
        let cfg = small_cfg();
        let ck = TrainState::new(&cfg).unwrap().to_checkpoint(&cfg);
        let mut other = cfg.clone();
        other.model.hidden_channels = 3;
        assert!(matches!(
            TrainState::from_checkpoint(&ck, &other),
            Err(Error::ConfigMismatch(_))
        ));
        let mut other = cfg.clone();
        other.seed += 1;
        assert!(matches!(
            TrainState::from_checkpoint(&ck, &other),
            Err(Error::ConfigMismatch(_))
        ));
        let mut longer = cfg.clone();
        longer.max_steps = 100;
        longer.lr = 1e-3;
        assert!(TrainState::from_checkpoint(&ck, &longer).is_ok());
        assert_eq!(
            model_from_checkpoint(&ck).unwrap(),
            TrainState::new(&cfg).unwrap().model
        );
    }

    #[test]
    fn shuffle_visits_every_image_each_epoch() {
        for epoch in 0..4u64 {
            let mut seen: Vec<usize> = (0..7).map(|k| example_order(5, 7, epoch * 7 + k)).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..7).collect::<Vec<_>>());
        }
        let e0: Vec<_> = (0..7).map(|k| example_order(5, 7, k)).collect();
        let e1: Vec<_> = (7..14).map(|k| example_order(5, 7, k)).collect();
        assert_ne!(e0, e1);
    }

    /// A one-layer, one-channel network wired so that the head emits the
    /// fixation map of a stationary observer. Gates are saturated (input and
    /// output open, forget closed), so `h = tanh(tanh(f))` for the single
    /// feature channel `f`; the feature is chosen to invert that map.
    #[test]
    fn hand_set_network_reaches_the_loss_floor() {
        let grid = GridSpec::square(6).unwrap();
        let model = ModelConfig {
            grid,
            layers: 1,
            hidden_channels: 1,
            kernel_size: 1,
            seq_len: 4,
            sigma: 1.5,
            feature_source: FeatureSourceKind::Precomputed,
            feature_channels: 1,
            rho_init: -40.0,
            ..ModelConfig::default()
        };
        let gamma = 1e-3;
        let cfg = TrainConfig {
            loss: LossConfig {
                gamma,
                lambda_base: 0.0,
                lambda_slope: 0.0,
                sigma: model.sigma,
            },
            model,
            ..TrainConfig::default()
        };
        let p = GazePoint::new(2.0, 3.0);
        let target = gaussian_map(p, grid, model.sigma).unwrap();
        let logs: Vec<f64> = target.values().iter().map(|v| v.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let spread = logs.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        let w = 2.0 * spread;
        let feature: Vec<f64> = logs.iter().map(|v| ((v - mean) / w).atanh().atanh()).collect();

        let mut state = TrainState::new(&cfg).unwrap();
        let lstm = &mut state.model.params.lstm[0];
        // Channels: feature, fixation, two coordinate planes, hidden.
        let mut kernel = vec![0.0; 4 * 5];
        kernel[3 * 5] = 1.0;
        lstm.mu = Tensor::from_vec(vec![4, 5, 1, 1], kernel).unwrap();
        lstm.bias_mu = Tensor::from_vec(vec![4], vec![40.0, -40.0, 40.0, 0.0]).unwrap();
        state.model.params.head.kernel = Tensor::from_vec(vec![1, 1, 1, 1], vec![w]).unwrap();

        let path = Scanpath::new("img", "o", vec![p; 4]);
        let image = PreparedImage {
            image_id: "img".into(),
            native: grid,
            maps: vec![crate::types::spatialize(&path, grid, model.sigma).unwrap()],
            scanpaths: vec![path],
        };
        let ex = TrainExample {
            image,
            input: ImageInput::Features(Tensor::from_vec(vec![1, 6, 6], feature).unwrap()),
        };
        let loss = train_step(&mut state, &ex, &cfg, &mut step_rng(0, 0)).unwrap();
        // All-zero costs: soft-DTW is -gamma * ln(number of alignments), and
        // a 4x4 grid has 63 monotone alignments.
        let floor = -gamma * 63f64.ln();
        assert!((loss - floor).abs() < 1e-6, "{loss} vs {floor}");
    }
}

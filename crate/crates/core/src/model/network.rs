use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::{convlstm_step, tspm_head, LayerState, LstmState};
use super::config::{FeatureSourceKind, ModelConfig};
use super::features::{coord_planes, FeatureProvider, FeatureStack, ImageInput};
use super::sampler::sample_next_point;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::tensor::{sample_bayes_kernel, BayesConvParams, BayesConvVars, Graph, Tensor, Var};
use crate::types::{gaussian_map, GazePoint, ProbMap, Scanpath};

/// Plain convolution weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    fn init<R: Rng + ?Sized>(c_out: usize, c_in: usize, k: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((c_in * k * k) as f64).sqrt();
        let n = c_out * c_in * k * k;
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            kernel: Tensor::from_vec(vec![c_out, c_in, k, k], data).expect("kernel shape"),
            bias: Tensor::zeros(&[c_out]),
        }
    }
}

/// Every trainable tensor of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Trainable feature stack; empty when features are precomputed.
    pub features: Vec<ConvParams>,
    pub lstm: Vec<BayesConvParams>,
    pub head: ConvParams,
}

/// [`ModelParams`] registered on one graph.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub features: Vec<(Var, Var)>,
    pub lstm: Vec<BayesConvVars>,
    pub head: (Var, Var),
}

impl ModelVars {
    /// Same order as [`ModelParams::named`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for (k, b) in &self.features {
            out.extend([*k, *b]);
        }
        for l in &self.lstm {
            out.extend([l.mu, l.rho, l.bias_mu, l.bias_rho]);
        }
        out.extend([self.head.0, self.head.1]);
        out
    }
}

pub const FEATURE_LAYERS: usize = 3;

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let k = cfg.kernel_size;
        let f = cfg.feature_channels;
        let features = match cfg.feature_source {
            FeatureSourceKind::Trainable => (0..FEATURE_LAYERS)
                .map(|i| ConvParams::init(f, if i == 0 { 1 } else { f }, k, rng))
                .collect(),
            FeatureSourceKind::Precomputed => Vec::new(),
        };
        let hid = cfg.hidden_channels;
        let lstm = (0..cfg.layers)
            .map(|l| {
                let c_x = if l == 0 { cfg.input_channels() } else { hid };
                BayesConvParams::init(4 * hid, c_x + hid, k, cfg.rho_init, rng)
            })
            .collect();
        let head = ConvParams::init(1, hid, 1, rng);
        Self { features, lstm, head }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, p) in self.features.iter().enumerate() {
            out.push((format!("feature.{i}.kernel"), &p.kernel));
            out.push((format!("feature.{i}.bias"), &p.bias));
        }
        for (i, p) in self.lstm.iter().enumerate() {
            out.push((format!("lstm.{i}.mu"), &p.mu));
            out.push((format!("lstm.{i}.rho"), &p.rho));
            out.push((format!("lstm.{i}.bias_mu"), &p.bias_mu));
            out.push((format!("lstm.{i}.bias_rho"), &p.bias_rho));
        }
        out.push(("head.kernel".into(), &self.head.kernel));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for p in &mut self.features {
            out.push(&mut p.kernel);
            out.push(&mut p.bias);
        }
        for p in &mut self.lstm {
            out.push(&mut p.mu);
            out.push(&mut p.rho);
            out.push(&mut p.bias_mu);
            out.push(&mut p.bias_rho);
        }
        out.push(&mut self.head.kernel);
        out.push(&mut self.head.bias);
        out
    }

    pub fn register(&self, g: &Graph, requires_grad: bool) -> ModelVars {
        ModelVars {
            features: self
                .features
                .iter()
                .map(|p| {
                    (
                        g.leaf(p.kernel.clone(), requires_grad),
                        g.leaf(p.bias.clone(), requires_grad),
                    )
                })
                .collect(),
            lstm: self.lstm.iter().map(|p| p.register(g, requires_grad)).collect(),
            head: (
                g.leaf(self.head.kernel.clone(), requires_grad),
                g.leaf(self.head.bias.clone(), requires_grad),
            ),
        }
    }
}

/// One sampled scanpath together with the tSPM frame behind each point.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub points: Vec<GazePoint>,
    pub frames: Vec<ProbMap>,
}

impl Rollout {
    pub fn into_scanpath(self, image_id: &str, observer_id: &str) -> Scanpath {
        Scanpath::new(image_id, observer_id, self.points)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanpathModel {
    pub cfg: ModelConfig,
    pub params: ModelParams,
}

/// Recurrent state of one virtual observer on one graph: Bayesian weights
/// drawn once, plus the evolving ConvLSTM state.
pub struct Session<'g> {
    g: &'g Graph,
    features: Var,
    coord: Var,
    weights: Vec<(Var, Var)>,
    head: (Var, Var),
    state: LstmState,
}

impl Session<'_> {
    /// Feeds one fixation map (`[H, W]`) and returns the next tSPM frame.
    pub fn step(&mut self, fixation: Var) -> Result<Var> {
        let g = self.g;
        let s = g.shape(fixation);
        if s.len() != 2 {
            return Err(Error::Shape(format!("fixation map must be [H, W], got {s:?}")));
        }
        let fix = g.reshape(fixation, &[1, s[0], s[1]])?;
        let mut x = g.concat(&[self.features, fix, self.coord])?;
        for (layer, (k, b)) in self.state.layers.iter_mut().zip(&self.weights) {
            *layer = convlstm_step(g, x, *layer, *k, *b)?;
            x = layer.h;
        }
        tspm_head(g, x, self.head.0, self.head.1)
    }

    pub fn state(&self) -> &LstmState {
        &self.state
    }
}

/// Per-rollout generator: one independent ChaCha stream per `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ScanpathModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            params: ModelParams::init(&cfg, &mut rng),
            cfg,
        })
    }

    pub fn from_parts(cfg: ModelConfig, params: ModelParams) -> Result<Self> {
        cfg.validate()?;
        let expect = ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let (a, b) = (expect.named(), params.named());
        if a.len() != b.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} parameter tensors, got {}",
                a.len(),
                b.len()
            )));
        }
        for ((name, t), (other, u)) in a.iter().zip(&b) {
            if name != other || t.shape() != u.shape() {
                return Err(Error::ConfigMismatch(format!(
                    "parameter {other} {:?} does not fit {name} {:?}",
                    u.shape(),
                    t.shape()
                )));
            }
        }
        Ok(Self { cfg, params })
    }

    /// Center-prior Gaussian used as the first fixation input.
    pub fn center_prior(&self) -> Result<ProbMap> {
        gaussian_map(self.cfg.grid.center(), self.cfg.grid, self.cfg.sigma)
    }

    /// Image features on `g`, differentiable through the trainable stack.
    pub fn feature_var(&self, g: &Graph, vars: &ModelVars, input: &ImageInput) -> Result<Var> {
        let grid = self.cfg.grid;
        match (input, self.cfg.feature_source) {
            (ImageInput::Raw(img), FeatureSourceKind::Trainable) => {
                if img.shape() != [1, grid.height, grid.width] {
                    return Err(Error::Shape(format!(
                        "raw image {:?} does not match grid {}x{}",
                        img.shape(),
                        grid.width,
                        grid.height
                    )));
                }
                let mut x = g.constant(img.clone());
                for (k, b) in &vars.features {
                    x = g.tanh(g.conv2d(x, *k, Some(*b))?);
                }
                Ok(x)
            }
            (ImageInput::Features(f), FeatureSourceKind::Precomputed) => {
                if f.shape() != [self.cfg.feature_channels, grid.height, grid.width] {
                    return Err(Error::ConfigMismatch(format!(
                        "feature tensor {:?} but the model expects [{}, {}, {}]",
                        f.shape(),
                        self.cfg.feature_channels,
                        grid.height,
                        grid.width
                    )));
                }
                Ok(g.constant(f.clone()))
            }
            (_, kind) => Err(Error::ConfigMismatch(format!(
                "provider input does not match feature source '{}'",
                kind.as_str()
            ))),
        }
    }

    pub fn build_features(&self, image_id: &str, provider: &dyn FeatureProvider) -> Result<FeatureStack> {
        let input = provider.input(image_id)?;
        let g = Graph::new();
        let vars = self.params.register(&g, false);
        let f = self.feature_var(&g, &vars, &input)?;
        Ok(FeatureStack {
            features: (*g.value(f)).clone(),
            coord: coord_planes(self.cfg.grid),
            source: self.cfg.feature_source,
        })
    }

    /// Draws this observer's Bayesian weights (layer by layer, kernel noise
    /// before bias noise) and starts from zero state.
    pub fn session<'g, R: Rng + ?Sized>(
        &self,
        g: &'g Graph,
        vars: &ModelVars,
        features: Var,
        rng: &mut R,
    ) -> Result<Session<'g>> {
        let grid = self.cfg.grid;
        let weights = vars
            .lstm
            .iter()
            .map(|v| sample_bayes_kernel(g, v, rng))
            .collect::<Result<Vec<_>>>()?;
        let shape = [self.cfg.hidden_channels, grid.height, grid.width];
        let layers = (0..self.cfg.layers)
            .map(|_| LayerState {
                h: g.constant(Tensor::zeros(&shape)),
                c: g.constant(Tensor::zeros(&shape)),
            })
            .collect();
        Ok(Session {
            g,
            features,
            coord: g.constant(coord_planes(grid)),
            weights,
            head: vars.head,
            state: LstmState { layers },
        })
    }

    /// Frames for a teacher-forced pass: step 0 sees the center prior, step
    /// `t > 0` sees the map of `inputs[t - 1]`. Produces `steps` frames.
    pub fn teacher_forced<R: Rng + ?Sized>(
        &self,
        g: &Graph,
        vars: &ModelVars,
        features: Var,
        inputs: &[GazePoint],
        steps: usize,
        rng: &mut R,
    ) -> Result<Vec<Var>> {
        if steps == 0 || inputs.len() + 1 < steps {
            return Err(Error::Parameter(format!(
                "{steps} steps need at least {} input points, got {}",
                steps.saturating_sub(1),
                inputs.len()
            )));
        }
        let mut session = self.session(g, vars, features, rng)?;
        let mut frames = Vec::with_capacity(steps);
        let mut fix = self.center_prior()?;
        for t in 0..steps {
            if t > 0 {
                fix = gaussian_map(inputs[t - 1], self.cfg.grid, self.cfg.sigma)?;
            }
            frames.push(session.step(g.constant(fix.to_tensor()))?);
        }
        Ok(frames)
    }

    /// Generates a length-N scanpath. The first `prefix.len()` points are the
    /// prefix itself; later points are drawn from the tSPM frames. Step 0 is
    /// fed the center prior and every later step the map of the previous
    /// point, so the frame count is always N.
    pub fn rollout<R: Rng + ?Sized>(&self, feat: &FeatureStack, prefix: &[GazePoint], rng: &mut R) -> Result<Rollout> {
        let n = self.cfg.seq_len;
        let grid = self.cfg.grid;
        if prefix.len() >= n {
            return Err(Error::Parameter(format!(
                "prefix of length {} leaves nothing to generate for N = {n}",
                prefix.len()
            )));
        }
        for p in prefix {
            grid.check(*p)?;
        }
        let g = Graph::new();
        let vars = self.params.register(&g, false);
        let features = g.constant(feat.features.clone());
        let mut session = self.session(&g, &vars, features, rng)?;
        let mut fix = self.center_prior()?;
        let mut points = Vec::with_capacity(n);
        let mut frames = Vec::with_capacity(n);
        for t in 0..n {
            let frame = session.step(g.constant(fix.to_tensor()))?;
            let map = ProbMap::from_weights(grid, g.value(frame).data())?;
            let p = match prefix.get(t) {
                Some(p) => *p,
                None => sample_next_point(&map, self.cfg.th, self.cfg.threshold_mode, rng),
            };
            frames.push(map);
            points.push(p);
            fix = gaussian_map(p, grid, self.cfg.sigma)?;
        }
        Ok(Rollout { points, frames })
    }

    /// Teacher-forced completion of a non-empty prefix to length N.
    pub fn complete_scanpath<R: Rng + ?Sized>(
        &self,
        feat: &FeatureStack,
        prefix: &Scanpath,
        rng: &mut R,
    ) -> Result<Scanpath> {
        if prefix.is_empty() {
            return Err(Error::Empty("completion needs a non-empty prefix".into()));
        }
        let r = self.rollout(feat, &prefix.points, rng)?;
        Ok(r.into_scanpath(&prefix.image_id, &prefix.observer_id))
    }

    /// Independent rollouts, one per `(seed, stream)` in `streams`, in order.
    pub fn rollout_batch(
        &self,
        feat: &FeatureStack,
        prefix: &[GazePoint],
        seed: u64,
        streams: &[u64],
        exec: Exec,
    ) -> Result<Vec<Rollout>> {
        exec.map(streams, |s| self.rollout(feat, prefix, &mut stream_rng(seed, *s)))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::features::{PrecomputedFeatures, RawImages};
    use crate::types::GridSpec;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            grid: GridSpec::square(8).unwrap(),
            hidden_channels: 3,
            feature_channels: 2,
            seq_len: 5,
            ..ModelConfig::default()
        }
    }

    fn raw_provider(grid: GridSpec, value: f64) -> RawImages {
        let mut p = RawImages::default();
        p.images
            .insert("img".into(), Tensor::full(&[1, grid.height, grid.width], value));
        p
    }

    #[test]
    fn zero_image_gives_zero_features() {
        let m = ScanpathModel::new(small_cfg(), 1).unwrap();
        let f = m.build_features("img", &raw_provider(m.cfg.grid, 0.0)).unwrap();
        assert_eq!(f.features.shape(), &[2, 8, 8]);
        assert!(f.features.data().iter().all(|v| *v == 0.0));
        assert_eq!(f.coord, coord_planes(m.cfg.grid));
    }

    #[test]
    fn missing_or_mismatched_features_are_errors() {
        let cfg = ModelConfig {
            feature_source: FeatureSourceKind::Precomputed,
            ..small_cfg()
        };
        let m = ScanpathModel::new(cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = PrecomputedFeatures::new(dir.path());
        assert!(matches!(m.build_features("nope", &p), Err(Error::Format(_))));
        crate::data::write_tensor(&p.path_for("three"), &Tensor::zeros(&[3, 8, 8])).unwrap();
        assert!(matches!(m.build_features("three", &p), Err(Error::ConfigMismatch(_))));
        crate::data::write_tensor(&p.path_for("two"), &Tensor::full(&[2, 8, 8], 0.25)).unwrap();
        assert_eq!(
            m.build_features("two", &p).unwrap().features,
            Tensor::full(&[2, 8, 8], 0.25)
        );
    }

    #[test]
    fn prefix_is_kept_and_length_is_n() {
        let m = ScanpathModel::new(small_cfg(), 2).unwrap();
        let f = m.build_features("img", &raw_provider(m.cfg.grid, 0.3)).unwrap();
        let prefix = vec![
            GazePoint::new(1.0, 2.0),
            GazePoint::new(6.0, 6.0),
            GazePoint::new(0.0, 7.0),
            GazePoint::new(3.0, 3.0),
        ];
        let mut rng = stream_rng(5, 0);
        let r = m.rollout(&f, &prefix, &mut rng).unwrap();
        assert_eq!(r.points.len(), 5);
        assert_eq!(r.frames.len(), 5);
        assert_eq!(&r.points[..4], &prefix[..]);
        for fr in &r.frames {
            assert!((fr.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(fr.values().iter().all(|v| *v >= 0.0));
        }
        let long = vec![GazePoint::new(0.0, 0.0); 5];
        assert!(m.rollout(&f, &long, &mut rng).is_err());
        let sp = Scanpath::new("img", "o", vec![]);
        assert!(m.complete_scanpath(&f, &sp, &mut rng).is_err());
    }

    #[test]
    fn rollouts_are_seed_deterministic() {
        let m = ScanpathModel::new(small_cfg(), 3).unwrap();
        let f = m.build_features("img", &raw_provider(m.cfg.grid, 0.6)).unwrap();
        let a = m.rollout_batch(&f, &[], 11, &[0, 1, 2, 3], Exec::Parallel).unwrap();
        let b = m.rollout_batch(&f, &[], 11, &[0, 1, 2, 3], Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_head_samples_uniformly_at_step_zero() {
        let mut m = ScanpathModel::new(small_cfg(), 4).unwrap();
        m.params.head.kernel = Tensor::zeros(m.params.head.kernel.shape());
        let f = m.build_features("img", &raw_provider(m.cfg.grid, 0.5)).unwrap();
        let streams: Vec<u64> = (0..1000).collect();
        let rs = m.rollout_batch(&f, &[], 8, &streams, Exec::default()).unwrap();
        // 2x2 blocks on the 8x8 grid: 16 equiprobable bins.
        let mut counts = [0usize; 16];
        for r in &rs {
            let (c, row) = r.points[0].rounded();
            counts[(row / 2) * 4 + c / 2] += 1;
            for fr in &r.frames {
                assert!(fr.values().iter().all(|v| (v - 1.0 / 64.0).abs() < 1e-12));
            }
        }
        let expect = 1000.0 / 16.0;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expect).powi(2) / expect).sum();
        let p = 1.0 - ChiSquared::new(15.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }

    #[test]
    fn from_parts_checks_shapes() {
        let m = ScanpathModel::new(small_cfg(), 5).unwrap();
        assert!(ScanpathModel::from_parts(m.cfg, m.params.clone()).is_ok());
        let other = ModelConfig {
            hidden_channels: 4,
            ..small_cfg()
        };
        assert!(matches!(
            ScanpathModel::from_parts(other, m.params.clone()),
            Err(Error::ConfigMismatch(_))
        ));
    }
}

//! Spatio-temporal training objective.
//!
//! Predicted tSPM frames are compared against spatialized ground-truth
//! fixations with a KL divergence; the resulting cost matrix is aligned with
//! soft-DTW and averaged over every ground-truth scanpath of the image. A
//! center-bias penalty `lambda_i / KL(r'_i || g_c)` is folded into every
//! cost, with `lambda_i` growing logarithmically in the fixation index.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};
use crate::types::{gaussian_map, GridSpec, ProbMap, SpatializedScanpath};

/// Floor on the center-prior divergence before taking its reciprocal.
pub const CENTER_KL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Soft-min temperature.
    pub gamma: f64,
    pub lambda_base: f64,
    pub lambda_slope: f64,
    /// Spatialization standard deviation in grid pixels.
    pub sigma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            lambda_base: 0.05,
            lambda_slope: 0.05,
            sigma: 2.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Parameter(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.lambda_base >= 0.0 && self.lambda_slope >= 0.0) {
            return Err(Error::Parameter("lambda coefficients must be nonnegative".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Gaussian map at the grid's center pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterPrior {
    pub g_c: ProbMap,
}

impl CenterPrior {
    pub fn new(grid: GridSpec, sigma: f64) -> Result<Self> {
        Ok(Self {
            g_c: gaussian_map(grid.center(), grid, sigma)?,
        })
    }
}

/// `lambda(t) = a + b ln(t + 1)`.
pub fn lambda_schedule(t: f64, cfg: &LossConfig) -> f64 {
    cfg.lambda_base + cfg.lambda_slope * (t + 1.0).ln()
}

pub fn kl_div(g: &Graph, p: Var, q: Var) -> Result<Var> {
    g.kl_div(p, q)
}

pub fn soft_min(g: &Graph, values: &[Var], gamma: f64) -> Result<Var> {
    g.soft_min(values, gamma)
}

pub fn soft_dtw(g: &Graph, delta: Var, gamma: f64) -> Result<Var> {
    let shape = g.shape(delta);
    if shape.len() != 2 || shape.contains(&0) {
        return Err(Error::Empty("soft_dtw needs a non-empty cost matrix".into()));
    }
    g.soft_dtw(delta, gamma)
}

/// Soft-DTW value on a plain row-major `n x m` cost matrix.
pub fn soft_dtw_value(delta: &[f64], n: usize, m: usize, gamma: f64) -> Result<f64> {
    if n == 0 || m == 0 || delta.len() != n * m {
        return Err(Error::Empty("soft_dtw needs a non-empty n x m matrix".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let table = crate::tensor::soft_dtw_table(delta, n, m, gamma);
    Ok(table[(n + 1) * (m + 1) - 1])
}

/// `KL(r_i || g^s_j) + lambda / max(KL(r_i || g_c), floor)`. The regularizer
/// is omitted entirely when `lambda == 0`.
pub fn pairwise_cost(g: &Graph, pred: Var, target: Var, lambda: f64, prior: Var) -> Result<Var> {
    let kl = g.kl_div(pred, target)?;
    if lambda == 0.0 {
        return Ok(kl);
    }
    let reg = center_penalty(g, pred, lambda, prior)?;
    g.add(kl, reg)
}

fn center_penalty(g: &Graph, pred: Var, lambda: f64, prior: Var) -> Result<Var> {
    let to_center = g.clamp_min(g.kl_div(pred, prior)?, CENTER_KL_FLOOR);
    Ok(g.scalar_mul(g.recip(to_center), lambda))
}

/// Mean soft-DTW over all ground-truth scanpaths, using KL pairwise costs
/// with the center-bias penalty indexed by prediction step.
pub fn kl_dtw_loss(
    g: &Graph,
    preds: &[Var],
    truth: &[SpatializedScanpath],
    prior: &CenterPrior,
    cfg: &LossConfig,
) -> Result<Var> {
    if truth.is_empty() {
        return Err(Error::Empty(
            "kl_dtw_loss needs at least one ground-truth scanpath".into(),
        ));
    }
    if preds.is_empty() {
        return Err(Error::Empty("kl_dtw_loss needs at least one predicted frame".into()));
    }
    cfg.validate()?;
    let pred_shape = g.shape(preds[0]);
    let prior_var = g.constant(prior.g_c.to_tensor());
    let penalties = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let lambda = lambda_schedule(i as f64, cfg);
            if lambda == 0.0 {
                Ok(None)
            } else {
                center_penalty(g, *p, lambda, prior_var).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut terms = Vec::with_capacity(truth.len());
    for s in truth {
        if s.is_empty() {
            return Err(Error::Empty("ground-truth scanpath with no fixations".into()));
        }
        let targets: Vec<Var> = s
            .maps
            .iter()
            .map(|m| {
                let t = m.to_tensor();
                if t.shape() != pred_shape.as_slice() {
                    return Err(Error::Shape(format!(
                        "prediction {:?} vs ground-truth map {:?}",
                        pred_shape,
                        t.shape()
                    )));
                }
                Ok(g.constant(t))
            })
            .collect::<Result<_>>()?;
        let mut cells = Vec::with_capacity(preds.len() * targets.len());
        for (p, pen) in preds.iter().zip(&penalties) {
            for t in &targets {
                let kl = g.kl_div(*p, *t)?;
                cells.push(match pen {
                    Some(r) => g.add(kl, *r)?,
                    None => kl,
                });
            }
        }
        let delta = g.stack(&cells, &[preds.len(), targets.len()])?;
        terms.push(g.soft_dtw(delta, cfg.gamma)?);
    }
    let n = terms.len();
    let total = g.stack(&terms, &[n])?;
    Ok(g.scalar_mul(g.sum(total), 1.0 / n as f64))
}

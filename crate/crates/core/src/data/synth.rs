//! Seeded synthetic benchmark.
//!
//! Each image holds a few Gaussian regions of interest (ROIs) of random
//! salience; its pixels are the rendered salience field. A virtual observer
//! starts near the image center, then jumps to the most salient ROI with
//! probability `first_bias` (otherwise to another one), and after that keeps
//! switching to a different ROI with probability `switch_prob` per fixation.
//! All fixations carry isotropic Gaussian noise. The ROI marginal drifts
//! towards uniform with the fixation index, so the spread across observers
//! grows over time.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{Dataset, ImageInfo, Split};
use crate::error::{Error, Result};
use crate::types::{GazePoint, GridSpec, Scanpath};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_images: usize,
    pub observers: usize,
    pub rois: usize,
    /// Native image size.
    pub width: usize,
    pub height: usize,
    pub seq_len: usize,
    /// Fixation noise standard deviation as a fraction of the width.
    pub noise_frac: f64,
    /// Rendered ROI radius (Gaussian std) as a fraction of the width.
    pub roi_radius_frac: f64,
    /// ROI centers are drawn uniformly in `[lo, hi]` of each side.
    pub roi_lo: f64,
    pub roi_hi: f64,
    /// Minimum distance between ROI centers as a fraction of the width.
    pub roi_separation_frac: f64,
    pub first_bias: f64,
    pub switch_prob: f64,
    /// The last `test_images` images are marked as the test split.
    pub test_images: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_images: 10,
            observers: 15,
            rois: 2,
            width: 128,
            height: 128,
            seq_len: 8,
            noise_frac: 0.03,
            roi_radius_frac: 0.06,
            roi_lo: 0.15,
            roi_hi: 0.85,
            roi_separation_frac: 0.3,
            first_bias: 0.9,
            switch_prob: 0.25,
            test_images: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        GridSpec::new(self.width, self.height)?;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.rois == 0 || self.seq_len == 0 {
            return Err(Error::Parameter("rois and seq_len must be positive".into()));
        }
        if !(self.noise_frac >= 0.0 && self.roi_radius_frac > 0.0) {
            return Err(Error::Parameter("noise must be >= 0 and ROI radius > 0".into()));
        }
        if !(unit(self.roi_lo) && unit(self.roi_hi) && self.roi_lo <= self.roi_hi) {
            return Err(Error::Parameter("ROI range must satisfy 0 <= lo <= hi <= 1".into()));
        }
        if !(unit(self.first_bias) && unit(self.switch_prob)) {
            return Err(Error::Parameter(
                "first_bias and switch_prob must be probabilities".into(),
            ));
        }
        if self.test_images > self.n_images {
            return Err(Error::Parameter("more test images than images".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Roi {
    center: GazePoint,
    weight: f64,
}

fn place_rois<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Vec<Roi> {
    let (w, h) = ((cfg.width - 1) as f64, (cfg.height - 1) as f64);
    let min_sep = cfg.roi_separation_frac * cfg.width as f64;
    let mut rois: Vec<Roi> = Vec::with_capacity(cfg.rois);
    while rois.len() < cfg.rois {
        let mut center = GazePoint::new(0.0, 0.0);
        for _ in 0..1000 {
            center = GazePoint::new(
                w * (cfg.roi_lo + (cfg.roi_hi - cfg.roi_lo) * rng.random::<f64>()),
                h * (cfg.roi_lo + (cfg.roi_hi - cfg.roi_lo) * rng.random::<f64>()),
            );
            if rois.iter().all(|r| r.center.distance(&center) >= min_sep) {
                break;
            }
        }
        rois.push(Roi {
            center,
            weight: rng.random_range(0.5..=1.0),
        });
    }
    rois
}

fn render(cfg: &SynthConfig, rois: &[Roi]) -> Vec<u8> {
    let r = cfg.roi_radius_frac * cfg.width as f64;
    let inv = 1.0 / (2.0 * r * r);
    let field: Vec<f64> = (0..cfg.height)
        .flat_map(|y| (0..cfg.width).map(move |x| (x as f64, y as f64)))
        .map(|(x, y)| {
            rois.iter()
                .map(|roi| {
                    let d2 = (x - roi.center.x).powi(2) + (y - roi.center.y).powi(2);
                    roi.weight * (-d2 * inv).exp()
                })
                .sum()
        })
        .collect();
    let max = field.iter().copied().fold(0.0, f64::max);
    field
        .iter()
        .map(|v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
        .collect()
}

fn other_roi<R: Rng + ?Sized>(current: usize, n: usize, rng: &mut R) -> usize {
    if n == 1 {
        return current;
    }
    let k = rng.random_range(0..n - 1);
    if k >= current {
        k + 1
    } else {
        k
    }
}

pub fn synth_dataset<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<Dataset> {
    cfg.validate()?;
    let native = GridSpec::new(cfg.width, cfg.height)?;
    let sd = cfg.noise_frac * cfg.width as f64;
    let noise = Normal::new(0.0, sd.max(f64::MIN_POSITIVE)).expect("finite std");
    let (xmax, ymax) = ((cfg.width - 1) as f64, (cfg.height - 1) as f64);
    let jitter = |p: GazePoint, rng: &mut R| -> GazePoint {
        if sd == 0.0 {
            return p;
        }
        GazePoint::new(
            (p.x + noise.sample(rng)).clamp(0.0, xmax),
            (p.y + noise.sample(rng)).clamp(0.0, ymax),
        )
    };

    let mut images = Vec::with_capacity(cfg.n_images);
    let mut scanpaths = Vec::with_capacity(cfg.n_images * cfg.observers);
    for i in 0..cfg.n_images {
        let id = format!("synth{i:03}");
        let rois = place_rois(cfg, rng);
        let salient = (0..rois.len())
            .max_by(|a, b| rois[*a].weight.total_cmp(&rois[*b].weight))
            .expect("at least one ROI");
        for o in 0..cfg.observers {
            let mut points = Vec::with_capacity(cfg.seq_len);
            points.push(jitter(native.center(), rng));
            let mut roi = if rng.random::<f64>() < cfg.first_bias {
                salient
            } else {
                other_roi(salient, rois.len(), rng)
            };
            for t in 1..cfg.seq_len {
                if t > 1 && rng.random::<f64>() < cfg.switch_prob {
                    roi = other_roi(roi, rois.len(), rng);
                }
                points.push(jitter(rois[roi].center, rng));
            }
            scanpaths.push(Scanpath::new(id.clone(), format!("obs{o:02}"), points));
        }
        images.push(ImageInfo {
            id,
            width: cfg.width,
            height: cfg.height,
            split: if i + cfg.test_images >= cfg.n_images {
                Split::Test
            } else {
                Split::Train
            },
            pixels: Some(render(cfg, &rois)),
        });
    }
    Ok(Dataset { images, scanpaths })
}

//! Scanpaths, grids and probability maps.
//!
//! A fixation is represented on the model grid as an isotropic Gaussian
//! probability map centered on it (its *spatialized* form). All maps are
//! smoothed with [`MAP_EPSILON`] before normalization so that every entry is
//! strictly positive and KL divergences between any two maps stay finite.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor added to every pixel of a probability map before normalization.
pub const MAP_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || width * height < 4 {
            return Err(Error::Parameter(format!(
                "grid {width}x{height} must have positive sides and at least 4 pixels"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn contains(&self, p: GazePoint) -> bool {
        p.x.is_finite()
            && p.y.is_finite()
            && p.x >= 0.0
            && p.y >= 0.0
            && p.x < self.width as f64
            && p.y < self.height as f64
    }

    pub fn check(&self, p: GazePoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// The center pixel, `((w - 1) / 2, (h - 1) / 2)` in integer arithmetic.
    pub fn center(&self) -> GazePoint {
        GazePoint::new(((self.width - 1) / 2) as f64, ((self.height - 1) / 2) as f64)
    }

    /// Pixel-center preserving rescale of a point from `self` into `to`,
    /// clamped to the target bounds.
    pub fn rescale(&self, p: GazePoint, to: GridSpec) -> GazePoint {
        let sx = to.width as f64 / self.width as f64;
        let sy = to.height as f64 / self.height as f64;
        let x = ((p.x + 0.5) * sx - 0.5).clamp(0.0, (to.width - 1) as f64);
        let y = ((p.y + 0.5) * sy - 0.5).clamp(0.0, (to.height - 1) as f64);
        GazePoint::new(x, y)
    }
}

/// A fixation location in pixel coordinates (`x` = column, `y` = row).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazePoint {
    pub x: f64,
    pub y: f64,
}

impl GazePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &GazePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.x * factor, self.y * factor)
    }

    pub fn rounded(&self) -> (usize, usize) {
        (self.x.round() as usize, self.y.round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scanpath {
    pub image_id: String,
    pub observer_id: String,
    pub points: Vec<GazePoint>,
}

impl Scanpath {
    pub fn new(image_id: impl Into<String>, observer_id: impl Into<String>, points: Vec<GazePoint>) -> Self {
        Self {
            image_id: image_id.into(),
            observer_id: observer_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_bounds(&self, grid: GridSpec) -> Result<()> {
        self.points.iter().try_for_each(|p| grid.check(*p))
    }
}

/// Per-pixel probability distribution over a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ProbMap {
    /// Builds a map from nonnegative weights: adds [`MAP_EPSILON`] to every
    /// pixel and normalizes to unit mass.
    pub fn from_weights(grid: GridSpec, weights: &[f64]) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} weights for a {}x{} grid",
                weights.len(),
                grid.width,
                grid.height
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Parameter("map weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().map(|w| w + MAP_EPSILON).sum();
        let values = weights.iter().map(|w| (w + MAP_EPSILON) / total).collect();
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: GridSpec) -> Self {
        let v = 1.0 / grid.len() as f64;
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid.width + col]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(vec![self.grid.height, self.grid.width], self.values.clone()).expect("grid-sized buffer")
    }
}

/// One probability map per fixation of a scanpath.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatializedScanpath {
    pub maps: Vec<ProbMap>,
}

impl SpatializedScanpath {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// Isotropic Gaussian centered on `p`, sampled at pixel centers, smoothed and
/// normalized.
pub fn gaussian_map(p: GazePoint, grid: GridSpec, sigma: f64) -> Result<ProbMap> {
    grid.check(p)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut weights = Vec::with_capacity(grid.len());
    for row in 0..grid.height {
        let dy = row as f64 - p.y;
        for col in 0..grid.width {
            let dx = col as f64 - p.x;
            weights.push((-(dx * dx + dy * dy) * inv).exp());
        }
    }
    ProbMap::from_weights(grid, &weights)
}

pub fn spatialize(s: &Scanpath, grid: GridSpec, sigma: f64) -> Result<SpatializedScanpath> {
    if s.is_empty() {
        return Err(Error::Empty("cannot spatialize an empty scanpath".into()));
    }
    let maps = s
        .points
        .iter()
        .map(|p| gaussian_map(*p, grid, sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpatializedScanpath { maps })
}

/// Pixel of maximum probability; ties go to the smallest row, then column.
pub fn map_argmax(m: &ProbMap) -> GazePoint {
    let mut best = 0;
    for (i, v) in m.values.iter().enumerate() {
        if *v > m.values[best] {
            best = i;
        }
    }
    let w = m.grid.width;
    GazePoint::new((best % w) as f64, (best / w) as f64)
}

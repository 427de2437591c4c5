//! Per-image feature tensors and CoordConv planes.

use std::collections::HashMap;
use std::path::PathBuf;

use super::config::FeatureSourceKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::types::GridSpec;

/// What a provider hands the model for one image.
#[derive(Clone, Debug, PartialEq)]
pub enum ImageInput {
    /// Grayscale intensities in `[0, 1]` at grid resolution, `[1, H, W]`.
    Raw(Tensor),
    /// Finished features, `[F, H, W]`.
    Features(Tensor),
}

pub trait FeatureProvider: Sync {
    fn input(&self, image_id: &str) -> Result<ImageInput>;
}

/// Features stored as one tensor file per image: `<dir>/<image_id>.ftns`.
#[derive(Clone, Debug)]
pub struct PrecomputedFeatures {
    pub dir: PathBuf,
}

impl PrecomputedFeatures {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, image_id: &str) -> PathBuf {
        self.dir.join(format!("{image_id}.ftns"))
    }
}

impl FeatureProvider for PrecomputedFeatures {
    fn input(&self, image_id: &str) -> Result<ImageInput> {
        let path = self.path_for(image_id);
        if !path.exists() {
            return Err(Error::Format(format!(
                "missing feature file {} for image '{image_id}'",
                path.display()
            )));
        }
        Ok(ImageInput::Features(crate::data::read_tensor(&path)?))
    }
}

/// Grayscale images already resampled to the model grid.
#[derive(Clone, Debug, Default)]
pub struct RawImages {
    pub images: HashMap<String, Tensor>,
}

impl FeatureProvider for RawImages {
    fn input(&self, image_id: &str) -> Result<ImageInput> {
        self.images
            .get(image_id)
            .cloned()
            .map(ImageInput::Raw)
            .ok_or_else(|| Error::Format(format!("no raw pixels for image '{image_id}'")))
    }
}

/// Image features plus CoordConv planes at grid resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub features: Tensor,
    pub coord: Tensor,
    pub source: FeatureSourceKind,
}

/// Channel 0 holds the column index and channel 1 the row index, each mapped
/// linearly onto `[-1, 1]`.
pub fn coord_planes(grid: GridSpec) -> Tensor {
    let (w, h) = (grid.width, grid.height);
    let norm = |i: usize, n: usize| {
        if n > 1 {
            2.0 * i as f64 / (n - 1) as f64 - 1.0
        } else {
            0.0
        }
    };
    let mut data = Vec::with_capacity(2 * w * h);
    for _row in 0..h {
        for col in 0..w {
            data.push(norm(col, w));
        }
    }
    for row in 0..h {
        for _col in 0..w {
            data.push(norm(row, h));
        }
    }
    Tensor::from_vec(vec![2, h, w], data).expect("coord plane shape")
}

/// Box-filter resample of 8-bit grayscale pixels (row-major, `width x
/// height`) onto the grid, scaled to `[0, 1]`.
pub fn resample_to_grid(pixels: &[u8], width: usize, height: usize, grid: GridSpec) -> Result<Tensor> {
    if pixels.len() != width * height || width == 0 || height == 0 {
        return Err(Error::Shape(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(grid.len());
    for gy in 0..grid.height {
        let y0 = gy * height / grid.height;
        let y1 = ((gy + 1) * height / grid.height).max(y0 + 1).min(height);
        for gx in 0..grid.width {
            let x0 = gx * width / grid.width;
            let x1 = ((gx + 1) * width / grid.width).max(x0 + 1).min(width);
            let mut acc = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += pixels[y * width + x] as f64;
                }
            }
            out.push(acc / ((y1 - y0) * (x1 - x0)) as f64 / 255.0);
        }
    }
    Tensor::from_vec(vec![1, grid.height, grid.width], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coord_planes_on_3x3() {
        let c = coord_planes(GridSpec::square(3).unwrap());
        let d = c.data();
        for row in 0..3 {
            assert_eq!(&d[row * 3..row * 3 + 3], &[-1.0, 0.0, 1.0]);
            assert!(d[9 + row * 3..9 + row * 3 + 3]
                .iter()
                .all(|v| *v == [-1.0, 0.0, 1.0][row]));
        }
    }

    #[test]
    fn resample_averages_blocks() {
        let px: Vec<u8> = vec![0, 255, 0, 255, 0, 0, 255, 255, 255, 255, 0, 0, 255, 255, 0, 0];
        let t = resample_to_grid(&px, 4, 4, GridSpec::square(2).unwrap()).unwrap();
        assert_eq!(t.shape(), &[1, 2, 2]);
        assert!((t.data()[0] - 0.25).abs() < 1e-12);
        assert!((t.data()[1] - 0.75).abs() < 1e-12);
        assert!((t.data()[2] - 1.0).abs() < 1e-12);
        assert!(t.data()[3].abs() < 1e-12);
        assert!(resample_to_grid(&px, 3, 4, GridSpec::square(2).unwrap()).is_err());
    }
}

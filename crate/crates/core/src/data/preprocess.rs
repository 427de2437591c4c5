use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{spatialize, GazePoint, GridSpec, Scanpath, SpatializedScanpath};

/// Scanpaths with fewer fixations are dropped.
pub const MIN_SCANPATH_LEN: usize = 4;

/// One image's ground truth on the model grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedImage {
    pub image_id: String,
    pub native: GridSpec,
    /// Length-N scanpaths in grid coordinates.
    pub scanpaths: Vec<Scanpath>,
    pub maps: Vec<SpatializedScanpath>,
}

/// Truncates to `n` points or pads by repeating the last one. Returns `None`
/// for scanpaths shorter than [`MIN_SCANPATH_LEN`].
pub fn fit_length(points: &[GazePoint], n: usize) -> Option<Vec<GazePoint>> {
    if points.len() < MIN_SCANPATH_LEN {
        return None;
    }
    let mut out: Vec<GazePoint> = points.iter().take(n).copied().collect();
    let last = *out.last().expect("non-empty");
    out.resize(n, last);
    Some(out)
}

pub fn preprocess(d: &Dataset, grid: GridSpec, n: usize, sigma: f64) -> Result<Vec<PreparedImage>> {
    if n == 0 {
        return Err(Error::Parameter("target length must be positive".into()));
    }
    d.validate()?;
    let mut out = Vec::new();
    for (img, paths) in d.grouped() {
        let native = img.grid();
        let mut scanpaths = Vec::new();
        let mut maps = Vec::new();
        for s in paths {
            let Some(points) = fit_length(&s.points, n) else {
                continue;
            };
            let points = points.into_iter().map(|p| native.rescale(p, grid)).collect();
            let sp = Scanpath::new(s.image_id.clone(), s.observer_id.clone(), points);
            maps.push(spatialize(&sp, grid, sigma)?);
            scanpaths.push(sp);
        }
        if scanpaths.is_empty() {
            log::warn!(
                "image '{}' has no scanpath of length >= {MIN_SCANPATH_LEN}; skipped",
                img.id
            );
            continue;
        }
        out.push(PreparedImage {
            image_id: img.id.clone(),
            native,
            scanpaths,
            maps,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::{ImageInfo, Split};

    fn pts(n: usize) -> Vec<GazePoint> {
        (0..n).map(|i| GazePoint::new(i as f64, 2.0 * i as f64)).collect()
    }

    #[test]
    fn length_rules() {
        assert_eq!(fit_length(&pts(3), 8), None);
        assert_eq!(fit_length(&pts(12), 8).unwrap(), pts(8));
        let padded = fit_length(&pts(5), 8).unwrap();
        assert_eq!(&padded[..5], &pts(5)[..]);
        assert!(padded[5..].iter().all(|p| *p == GazePoint::new(4.0, 8.0)));
    }

    #[test]
    fn rescales_and_drops_empty_images() {
        let img = |id: &str| ImageInfo {
            id: id.into(),
            width: 64,
            height: 32,
            split: Split::Train,
            pixels: None,
        };
        let d = Dataset {
            images: vec![img("a"), img("b")],
            scanpaths: vec![
                Scanpath::new("a", "1", vec![GazePoint::new(63.0, 31.0); 4]),
                Scanpath::new("a", "2", pts(2)),
                Scanpath::new("b", "1", pts(3)),
            ],
        };
        let grid = GridSpec::square(16).unwrap();
        let out = preprocess(&d, grid, 8, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].scanpaths.len(), 1);
        let s = &out[0].scanpaths[0];
        assert_eq!(s.len(), 8);
        // (63.5 / 64) * 16 - 0.5 = 15.375 lies past the last pixel and is clamped.
        assert_eq!(s.points[0].x, 15.0);
        assert!((s.points[0].y - 15.0).abs() < 1e-12);
        assert!(s.check_bounds(grid).is_ok());
        assert_eq!(out[0].maps[0].len(), 8);
    }
}

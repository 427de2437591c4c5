//! String-alignment metrics: fixations become bin indices on a coarse grid.

use super::MetricConfig;
use crate::types::{GazePoint, GridSpec};

/// Bin index (row-major over `bins_x x bins_y`) of every fixation.
pub fn encode(points: &[GazePoint], space: GridSpec, cfg: &MetricConfig) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let col = ((p.x / space.width as f64 * cfg.bins_x as f64).floor().max(0.0) as usize).min(cfg.bins_x - 1);
            let row = ((p.y / space.height as f64 * cfg.bins_y as f64).floor().max(0.0) as usize).min(cfg.bins_y - 1);
            row * cfg.bins_x + col
        })
        .collect()
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn bin_center(bin: usize, space: GridSpec, cfg: &MetricConfig) -> GazePoint {
    let (col, row) = (bin % cfg.bins_x, bin / cfg.bins_x);
    GazePoint::new(
        (col as f64 + 0.5) * space.width as f64 / cfg.bins_x as f64,
        (row as f64 + 0.5) * space.height as f64 / cfg.bins_y as f64,
    )
}

/// Needleman-Wunsch with zero gap penalty. Two bins score
/// `1 - d / d_max`, with `d_max` the distance between opposite corner bins,
/// and the total is divided by the longer string length.
pub fn scam(a: &[usize], b: &[usize], space: GridSpec, cfg: &MetricConfig) -> f64 {
    let d_max = bin_center(0, space, cfg).distance(&bin_center(cfg.bins_x * cfg.bins_y - 1, space, cfg));
    let score = |x: usize, y: usize| {
        if d_max == 0.0 {
            return 1.0;
        }
        1.0 - bin_center(x, space, cfg).distance(&bin_center(y, space, cfg)) / d_max
    };
    let m = b.len();
    let mut prev = vec![0.0; m + 1];
    let mut cur = vec![0.0; m + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + score(*x, *y)).max(prev[j + 1]).max(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m] / a.len().max(b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> GridSpec {
        GridSpec::new(800, 600).unwrap()
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(levenshtein(b"AB", b"AC"), 1);
        assert_eq!(levenshtein(b"", b"ABC"), 3);
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"flaw", b"lawn"), 2);
    }

    #[test]
    fn encoding_uses_an_8x5_layout() {
        let cfg = MetricConfig::default();
        let pts = [
            GazePoint::new(0.0, 0.0),
            GazePoint::new(799.0, 599.0),
            GazePoint::new(150.0, 130.0),
        ];
        assert_eq!(encode(&pts, space(), &cfg), vec![0, 39, 9]);
    }

    #[test]
    fn identical_strings_score_one_and_far_strings_zero() {
        let cfg = MetricConfig::default();
        assert!((scam(&[3, 17, 22], &[3, 17, 22], space(), &cfg) - 1.0).abs() < 1e-12);
        assert!(scam(&[0, 0, 0], &[39, 39, 39], space(), &cfg).abs() < 1e-9);
        // A single matching bin out of a longer path counts once.
        assert!((scam(&[5], &[5, 39], space(), &cfg) - 0.5).abs() < 1e-12);
    }
}

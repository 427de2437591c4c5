use rand::Rng;

use super::config::ThresholdMode;
use crate::types::{GazePoint, ProbMap};

/// Indices of the pixels that survive the threshold. The maximum always
/// survives, so the result is never empty.
pub fn surviving_pixels(tspm: &ProbMap, th: f64, mode: ThresholdMode) -> Vec<usize> {
    let max = tspm.max();
    let cutoff = match mode {
        ThresholdMode::Relative => th * max,
        ThresholdMode::Absolute => th.min(max),
    };
    tspm.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= cutoff)
        .map(|(i, _)| i)
        .collect()
}

/// Draws the next fixation from the thresholded, renormalized map.
pub fn sample_next_point<R: Rng + ?Sized>(tspm: &ProbMap, th: f64, mode: ThresholdMode, rng: &mut R) -> GazePoint {
    let survivors = surviving_pixels(tspm, th, mode);
    let values = tspm.values();
    let total: f64 = survivors.iter().map(|i| values[*i]).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = *survivors.last().expect("maximum always survives");
    for i in &survivors {
        acc += values[*i];
        if acc > target {
            pick = *i;
            break;
        }
    }
    let w = tspm.grid().width;
    GazePoint::new((pick % w) as f64, (pick / w) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn map(w: usize, h: usize, weights: &[f64]) -> ProbMap {
        ProbMap::from_weights(GridSpec::new(w, h).unwrap(), weights).unwrap()
    }

    #[test]
    fn delta_map_always_gives_its_peak() {
        let mut weights = vec![0.0; 16];
        weights[6] = 1.0;
        let m = map(4, 4, &weights);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            assert_eq!(
                sample_next_point(&m, 0.7, ThresholdMode::Relative, &mut rng),
                GazePoint::new(2.0, 1.0)
            );
        }
    }

    #[test]
    fn sub_threshold_pixel_is_never_drawn() {
        let m = map(2, 2, &[1.0, 0.5, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert_eq!(
                sample_next_point(&m, 0.7, ThresholdMode::Relative, &mut rng),
                GazePoint::new(0.0, 0.0)
            );
        }
    }

    #[test]
    fn equal_survivors_split_evenly() {
        let m = map(2, 2, &[0.0, 1.0, 1.0, 0.1]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hits = (0..10_000)
            .filter(|_| sample_next_point(&m, 0.7, ThresholdMode::Relative, &mut rng) == GazePoint::new(1.0, 0.0))
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn argmax_survives_every_threshold() {
        let m = map(3, 2, &[0.1, 0.3, 0.2, 0.9, 0.5, 0.9]);
        for th in [1.0, 0.9, 0.5, 0.1, 1e-6] {
            let s = surviving_pixels(&m, th, ThresholdMode::Relative);
            assert!(s.contains(&3) && s.contains(&5));
        }
        assert_eq!(surviving_pixels(&m, 1.0, ThresholdMode::Relative), vec![3, 5]);
        // Absolute mode above the peak falls back to the maximum.
        assert_eq!(surviving_pixels(&m, 0.99, ThresholdMode::Absolute), vec![3, 5]);
        assert_eq!(surviving_pixels(&m, 0.01, ThresholdMode::Absolute).len(), 6);
    }

    #[test]
    fn seeded_draws_repeat() {
        let m = map(4, 4, &(0..16).map(|i| i as f64).collect::<Vec<_>>());
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_next_point(&m, 0.3, ThresholdMode::Relative, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }
}

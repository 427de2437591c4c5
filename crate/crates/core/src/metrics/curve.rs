use crate::types::GazePoint;

fn directed_hausdorff(a: &[GazePoint], b: &[GazePoint]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

pub fn hausdorff(a: &[GazePoint], b: &[GazePoint]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Discrete Fréchet distance by the coupled-walk recurrence.
pub fn frechet(a: &[GazePoint], b: &[GazePoint]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = p.distance(q);
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = d.max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> GazePoint {
        GazePoint::new(x, y)
    }

    #[test]
    fn hand_examples() {
        let a = [p(0.0, 0.0)];
        let b = [p(3.0, 4.0)];
        assert_eq!(hausdorff(&a, &b), 5.0);
        assert_eq!(frechet(&a, &b), 5.0);
        let b = [p(0.0, 0.0), p(0.0, 3.0)];
        assert_eq!(hausdorff(&a, &b), 3.0);
        assert_eq!(frechet(&a, &b), 3.0);
        let s = [p(1.0, 2.0), p(5.0, 5.0), p(0.0, 9.0)];
        assert_eq!(hausdorff(&s, &s), 0.0);
        assert_eq!(frechet(&s, &s), 0.0);
    }

    /// Fréchet as a minimum over every monotone coupling, enumerated.
    fn brute_frechet(a: &[GazePoint], b: &[GazePoint]) -> f64 {
        fn walk(a: &[GazePoint], b: &[GazePoint], i: usize, j: usize, worst: f64) -> f64 {
            let worst = worst.max(a[i].distance(&b[j]));
            if i + 1 == a.len() && j + 1 == b.len() {
                return worst;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, i + 1, j, worst));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, i, j + 1, worst));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, i + 1, j + 1, worst));
            }
            best
        }
        walk(a, b, 0, 0, 0.0)
    }

    #[test]
    fn frechet_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let m = rng.random_range(1..6);
            let a: Vec<_> = (0..n)
                .map(|_| p(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
                .collect();
            let b: Vec<_> = (0..m)
                .map(|_| p(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
                .collect();
            assert!((frechet(&a, &b) - brute_frechet(&a, &b)).abs() < 1e-12);
            assert!((frechet(&a, &b) - frechet(&b, &a)).abs() < 1e-12);
            let ends = a[0].distance(&b[0]).max(a[n - 1].distance(&b[m - 1]));
            assert!(frechet(&a, &b) >= ends - 1e-12);
        }
    }
}

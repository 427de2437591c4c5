use crate::types::GazePoint;

/// Hard DTW over an `[n, m]` row-major cost matrix.
pub fn dtw_matrix(delta: &[f64], n: usize, m: usize) -> f64 {
    let w = m + 1;
    let mut r = vec![f64::INFINITY; (n + 1) * w];
    r[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = r[(i - 1) * w + j].min(r[i * w + j - 1]).min(r[(i - 1) * w + j - 1]);
            r[i * w + j] = delta[(i - 1) * m + j - 1] + best;
        }
    }
    r[n * w + m]
}

pub fn euclidean_costs(a: &[GazePoint], b: &[GazePoint]) -> Vec<f64> {
    a.iter().flat_map(|p| b.iter().map(move |q| p.distance(q))).collect()
}

pub fn fdtw(a: &[GazePoint], b: &[GazePoint]) -> f64 {
    dtw_matrix(&euclidean_costs(a, b), a.len(), b.len())
}

/// Time-delay embedding distance: every `k`-window of `a` (flattened to a
/// `2k` vector) is matched to its nearest window of `b`; the result is the
/// mean of those distances. `None` when either path is shorter than `k`.
pub fn tde(a: &[GazePoint], b: &[GazePoint], k: usize) -> Option<f64> {
    if k == 0 || a.len() < k || b.len() < k {
        return None;
    }
    let dist = |wa: &[GazePoint], wb: &[GazePoint]| {
        wa.iter()
            .zip(wb)
            .map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let wins_b: Vec<&[GazePoint]> = b.windows(k).collect();
    let total: f64 = a
        .windows(k)
        .map(|wa| wins_b.iter().map(|wb| dist(wa, wb)).fold(f64::INFINITY, f64::min))
        .sum();
    Some(total / (a.len() - k + 1) as f64)
}

//! Cross-recurrence quantification between two fixation sequences.

use crate::types::GazePoint;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recurrence {
    pub rec: f64,
    pub det: f64,
    pub lam: f64,
    pub corm: f64,
}

/// `R[i][j]` is set when `a[i]` and `b[j]` lie within `radius`.
pub fn recurrence_matrix(a: &[GazePoint], b: &[GazePoint], radius: f64) -> Vec<Vec<bool>> {
    a.iter()
        .map(|p| b.iter().map(|q| p.distance(q) <= radius).collect())
        .collect()
}

/// Marks every cell of a run of at least `min_line` set cells along the path
/// produced by `cells`.
fn mark_runs(r: &[Vec<bool>], cells: impl Iterator<Item = (usize, usize)>, min_line: usize, marks: &mut [Vec<bool>]) {
    let mut run: Vec<(usize, usize)> = Vec::new();
    let mut flush = |run: &mut Vec<(usize, usize)>| {
        if run.len() >= min_line {
            for (i, j) in run.iter() {
                marks[*i][*j] = true;
            }
        }
        run.clear();
    };
    for (i, j) in cells {
        if r[i][j] {
            run.push((i, j));
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
}

pub fn quantify(r: &[Vec<bool>], min_line: usize) -> Recurrence {
    let n = r.len();
    let m = r.first().map_or(0, Vec::len);
    let c: usize = r.iter().map(|row| row.iter().filter(|v| **v).count()).sum();
    if c == 0 {
        return Recurrence {
            rec: 0.0,
            det: 0.0,
            lam: 0.0,
            corm: 0.0,
        };
    }
    let count = |marks: &[Vec<bool>]| {
        marks
            .iter()
            .map(|row| row.iter().filter(|v| **v).count())
            .sum::<usize>()
    };

    let mut diag = vec![vec![false; m]; n];
    for start in 0..n + m - 1 {
        let (i0, j0) = if start < n {
            (n - 1 - start, 0)
        } else {
            (0, start - n + 1)
        };
        let len = (n - i0).min(m - j0);
        mark_runs(r, (0..len).map(|t| (i0 + t, j0 + t)), min_line, &mut diag);
    }

    let mut lines = vec![vec![false; m]; n];
    for i in 0..n {
        mark_runs(r, (0..m).map(|j| (i, j)), min_line, &mut lines);
    }
    for j in 0..m {
        mark_runs(r, (0..n).map(|i| (i, j)), min_line, &mut lines);
    }

    let corm = if m > 1 {
        let lag: f64 = r
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v)
                    .map(move |(j, _)| j as f64 - i as f64)
            })
            .sum();
        100.0 * lag / ((m - 1) as f64 * c as f64)
    } else {
        0.0
    };
    let c = c as f64;
    Recurrence {
        rec: 100.0 * c / (n * m) as f64,
        det: 100.0 * count(&diag) as f64 / c,
        lam: 100.0 * count(&lines) as f64 / c,
        corm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_bits(rows: &[&str]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect()
    }

    #[test]
    fn identity_matrix() {
        let q = quantify(&from_bits(&["100", "010", "001"]), 2);
        assert!((q.rec - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(q.det, 100.0);
        assert_eq!(q.lam, 0.0);
        assert_eq!(q.corm, 0.0);
    }

    #[test]
    fn empty_and_full() {
        let q = quantify(&from_bits(&["00", "00"]), 2);
        assert_eq!((q.rec, q.det, q.lam, q.corm), (0.0, 0.0, 0.0, 0.0));
        // All ones: only the two corner cells sit on length-1 diagonals.
        let q = quantify(&from_bits(&["111", "111", "111"]), 2);
        assert_eq!(q.rec, 100.0);
        assert!((q.det - 700.0 / 9.0).abs() < 1e-12);
        assert_eq!(q.lam, 100.0);
        assert_eq!(q.corm, 0.0);
    }

    #[test]
    fn hand_counted_rectangle() {
        // a has 3 points, b has 4.
        let r = from_bits(&["1100", "0010", "0011"]);
        let q = quantify(&r, 2);
        assert!((q.rec - 500.0 / 12.0).abs() < 1e-12);
        // Diagonal runs: (0,1)-(1,2)-(2,3) has length 3; (0,0) and (2,2) are alone.
        assert!((q.det - 60.0).abs() < 1e-12);
        // Horizontal runs: (0,0)-(0,1) and (2,2)-(2,3); vertical: (1,2)-(2,2).
        assert!((q.lam - 100.0).abs() < 1e-12);
        // Lags j - i: 0, 1, 1, 0, 1 -> 3, over (m - 1) * C = 15.
        assert!((q.corm - 20.0).abs() < 1e-12);
    }
}

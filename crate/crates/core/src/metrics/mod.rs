//! Scanpath similarity metrics and baseline reports.
//!
//! Ten measures in four families: string alignment (LEV, SCAM), curve
//! similarity (HAU, FRE), time series (fDTW, TDE) and cross-recurrence
//! (REC, DET, LAM, CORM). Metrics are computed in native image pixels; the
//! image size is passed alongside each pair as a [`GridSpec`].

mod curve;
mod recurrence;
mod report;
mod series;
mod string;

pub use curve::{frechet, hausdorff};
pub use recurrence::{quantify, recurrence_matrix, Recurrence};
pub use report::{evaluate_set, human_baseline, random_baseline, MetricReport, ReportRow};
pub use series::{dtw_matrix, euclidean_costs, fdtw, tde};
pub use string::{encode, levenshtein, scam};

use crate::error::{Error, Result};
use crate::types::{GridSpec, Scanpath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Lev,
    Scam,
    Hau,
    Fre,
    Fdtw,
    Tde,
    Rec,
    Det,
    Lam,
    Corm,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Lev,
        Metric::Scam,
        Metric::Hau,
        Metric::Fre,
        Metric::Fdtw,
        Metric::Tde,
        Metric::Rec,
        Metric::Det,
        Metric::Lam,
        Metric::Corm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Lev => "LEV",
            Metric::Scam => "SCAM",
            Metric::Hau => "HAU",
            Metric::Fre => "FRE",
            Metric::Fdtw => "fDTW",
            Metric::Tde => "TDE",
            Metric::Rec => "REC",
            Metric::Det => "DET",
            Metric::Lam => "LAM",
            Metric::Corm => "CORM",
        }
    }

    pub fn lower_is_better(self) -> bool {
        matches!(
            self,
            Metric::Lev | Metric::Hau | Metric::Fre | Metric::Fdtw | Metric::Tde
        )
    }

    pub fn index(self) -> usize {
        Metric::ALL.iter().position(|m| *m == self).expect("listed")
    }

    /// Whether `a` is strictly better than `b` for this metric.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.lower_is_better() {
            a < b
        } else {
            a > b
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricConfig {
    /// String-encoding bins across the image width and height.
    pub bins_x: usize,
    pub bins_y: usize,
    /// Recurrence radius as a fraction of the image diagonal.
    pub radius_frac: f64,
    /// Shortest line counted by DET and LAM.
    pub min_line: usize,
    /// Window length of the delay embedding.
    pub tde_k: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            bins_x: 8,
            bins_y: 5,
            radius_frac: 0.1,
            min_line: 2,
            tde_k: 3,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins_x == 0 || self.bins_y == 0 || self.tde_k == 0 {
            return Err(Error::Parameter("bins and tde_k must be positive".into()));
        }
        if self.min_line < 2 {
            return Err(Error::Parameter(format!(
                "min_line must be >= 2, got {}",
                self.min_line
            )));
        }
        if !(self.radius_frac > 0.0 && self.radius_frac.is_finite()) {
            return Err(Error::Parameter(format!(
                "radius_frac must be positive, got {}",
                self.radius_frac
            )));
        }
        Ok(())
    }

    pub fn radius(&self, space: GridSpec) -> f64 {
        self.radius_frac * space.diagonal()
    }
}

/// All ten values for one pair; `None` marks an undefined metric.
pub type MetricValues = [Option<f64>; 10];

/// Scores `a` against `b` on an image of size `space`.
pub fn compare(a: &Scanpath, b: &Scanpath, space: GridSpec, cfg: &MetricConfig) -> Result<MetricValues> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("metrics need non-empty scanpaths".into()));
    }
    let (pa, pb) = (&a.points, &b.points);
    let (sa, sb) = (encode(pa, space, cfg), encode(pb, space, cfg));
    let r = quantify(&recurrence_matrix(pa, pb, cfg.radius(space)), cfg.min_line);
    Ok([
        Some(levenshtein(&sa, &sb) as f64),
        Some(scam(&sa, &sb, space, cfg)),
        Some(hausdorff(pa, pb)),
        Some(frechet(pa, pb)),
        Some(fdtw(pa, pb)),
        tde(pa, pb, cfg.tde_k),
        Some(r.rec),
        Some(r.det),
        Some(r.lam),
        Some(r.corm),
    ])
}

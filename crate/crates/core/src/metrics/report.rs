use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use super::{compare, Metric, MetricConfig, MetricValues};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::types::{GazePoint, GridSpec, Scanpath};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportRow {
    pub metric: Metric,
    pub mean: f64,
    /// Population standard deviation across evaluated scanpaths.
    pub std: f64,
    /// Scanpaths for which the metric was defined.
    pub count: usize,
}

/// One row per metric in the fixed LEV..CORM order.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

impl MetricReport {
    /// Aggregates per-scanpath values; undefined entries are skipped.
    pub fn from_values(values: &[MetricValues]) -> Self {
        let rows = Metric::ALL
            .iter()
            .map(|m| {
                let xs: Vec<f64> = values.iter().filter_map(|v| v[m.index()]).collect();
                let n = xs.len();
                let (mean, std) = if n == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let mean = xs.iter().sum::<f64>() / n as f64;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                    (mean, var.sqrt())
                };
                ReportRow {
                    metric: *m,
                    mean,
                    std,
                    count: n,
                }
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, m: Metric) -> &ReportRow {
        &self.rows[m.index()]
    }

    pub fn mean(&self, m: Metric) -> f64 {
        self.row(m).mean
    }

    /// Metrics where `self` is strictly better than `other`.
    pub fn wins_over(&self, other: &MetricReport) -> Vec<Metric> {
        Metric::ALL
            .iter()
            .copied()
            .filter(|m| m.better(self.mean(*m), other.mean(*m)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,std,direction\n");
        for r in &self.rows {
            let dir = if r.metric.lower_is_better() { "lower" } else { "higher" };
            out.push_str(&format!("{},{},{},{dir}\n", r.metric.name(), r.mean, r.std));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Mean of each metric over a set of pairs, skipping undefined values.
fn average(values: &[MetricValues]) -> MetricValues {
    let mut out = [None; 10];
    for (k, slot) in out.iter_mut().enumerate() {
        let xs: Vec<f64> = values.iter().filter_map(|v| v[k]).collect();
        if !xs.is_empty() {
            *slot = Some(xs.iter().sum::<f64>() / xs.len() as f64);
        }
    }
    out
}

fn group(paths: &[Scanpath]) -> HashMap<&str, Vec<&Scanpath>> {
    let mut out: HashMap<&str, Vec<&Scanpath>> = HashMap::new();
    for s in paths {
        out.entry(s.image_id.as_str()).or_default().push(s);
    }
    out
}

fn space_of(spaces: &HashMap<String, GridSpec>, id: &str) -> Result<GridSpec> {
    spaces
        .get(id)
        .copied()
        .ok_or_else(|| Error::Format(format!("no image size known for '{id}'")))
}

/// Scores every predicted scanpath against all ground-truth scanpaths of its
/// image. Each prediction contributes its pair-averaged values; the report
/// gives mean and std over predictions.
pub fn evaluate_set(
    predicted: &[Scanpath],
    ground_truth: &[Scanpath],
    spaces: &HashMap<String, GridSpec>,
    cfg: &MetricConfig,
    exec: Exec,
) -> Result<MetricReport> {
    cfg.validate()?;
    if predicted.is_empty() || ground_truth.is_empty() {
        return Err(Error::Empty(
            "evaluation needs predicted and ground-truth scanpaths".into(),
        ));
    }
    let truth = group(ground_truth);
    let per_pred = exec.map(predicted, |p| -> Result<MetricValues> {
        let gts = truth
            .get(p.image_id.as_str())
            .ok_or_else(|| Error::Format(format!("predicted image '{}' has no ground truth", p.image_id)))?;
        let space = space_of(spaces, &p.image_id)?;
        let vals = gts
            .iter()
            .map(|g| compare(p, g, space, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&vals))
    });
    let values = per_pred.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_values(&values))
}

/// Leave-one-out agreement among ground-truth observers. Images with a single
/// scanpath are skipped.
pub fn human_baseline(
    ground_truth: &[Scanpath],
    spaces: &HashMap<String, GridSpec>,
    cfg: &MetricConfig,
    exec: Exec,
) -> Result<MetricReport> {
    cfg.validate()?;
    let truth = group(ground_truth);
    let mut ids: Vec<&str> = truth.keys().copied().collect();
    ids.sort_unstable();
    for id in &ids {
        if truth[id].len() < 2 {
            log::warn!("image '{id}' has a single scanpath; left out of the human baseline");
        }
    }
    let jobs: Vec<(&str, usize)> = ids
        .iter()
        .filter(|id| truth[**id].len() >= 2)
        .flat_map(|id| (0..truth[*id].len()).map(move |k| (*id, k)))
        .collect();
    if jobs.is_empty() {
        return Err(Error::Empty("no image has two or more ground-truth scanpaths".into()));
    }
    let per = exec.map(&jobs, |(id, k)| -> Result<MetricValues> {
        let paths = &truth[id];
        let space = space_of(spaces, id)?;
        let vals = paths
            .iter()
            .enumerate()
            .filter(|(j, _)| j != k)
            .map(|(_, g)| compare(paths[*k], g, space, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&vals))
    });
    let values = per.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_values(&values))
}

/// `count` scanpaths of `n` fixations drawn uniformly inside the image.
pub fn random_baseline<R: Rng + ?Sized>(
    image_id: &str,
    space: GridSpec,
    n: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Scanpath>> {
    if count == 0 || n == 0 {
        return Err(Error::Parameter("random baseline needs count >= 1 and n >= 1".into()));
    }
    Ok((0..count)
        .map(|k| {
            let points = (0..n)
                .map(|_| {
                    GazePoint::new(
                        rng.random_range(0.0..space.width as f64),
                        rng.random_range(0.0..space.height as f64),
                    )
                })
                .collect();
            Scanpath::new(image_id, format!("random{k}"), points)
        })
        .collect())
}

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::experiment::{format_err, io_err, write_csv, CliError, MetricsRow, RunSummary, SeedRun};

/// Mean and 95% Student-t confidence half-width of one quantity over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// `None` with a single run.
    pub ci95: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(metric: &str, values: &[f64]) -> Stat {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        Stat {
            metric: metric.to_string(),
            n,
            mean,
            ci95: ci95_half_width(values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Overlap test of two confidence intervals (a missing interval is a point).
    pub fn overlaps(&self, other: &Stat) -> bool {
        let (a, b) = (self.ci95.unwrap_or(0.0), other.ci95.unwrap_or(0.0));
        (self.mean - other.mean).abs() <= a + b
    }
}

pub fn ci95_half_width(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    Some(t.inverse_cdf(0.975) * (var / n as f64).sqrt())
}

/// Per-iteration curve point across seeds. Runs that already stopped
/// contribute their final values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub running: usize,
    pub communities_found: f64,
    pub communities_found_ci95: Option<f64>,
    pub isolated: f64,
    pub isolated_ci95: Option<f64>,
    pub active: f64,
    pub wrong_assoc_pct: f64,
    pub wrong_assoc_pct_ci95: Option<f64>,
    pub mean_acc: f64,
    pub mean_acc_ci95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub stats: Vec<Stat>,
    pub curve: Vec<CurvePoint>,
}

impl Aggregate {
    pub fn stat(&self, metric: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.metric == metric)
    }
}

pub fn aggregate(runs: &[SeedRun]) -> Aggregate {
    let summaries: Vec<&RunSummary> = runs.iter().map(|r| &r.summary).collect();
    let col = |f: &dyn Fn(&RunSummary) -> f64| summaries.iter().map(|s| f(s)).collect::<Vec<f64>>();
    let stats = vec![
        Stat::of("communities_found", &col(&|s| s.final_metrics.communities_found as f64)),
        Stat::of("wrong_assoc_pct", &col(&|s| s.final_metrics.wrong_assoc_pct)),
        Stat::of("isolated_start", &col(&|s| s.initial.isolated_count as f64)),
        Stat::of("isolated_end", &col(&|s| s.final_metrics.isolated_count as f64)),
        Stat::of("acc_init", &col(&|s| s.initial.mean_acc)),
        Stat::of("acc_end", &col(&|s| s.final_metrics.mean_acc)),
        Stat::of(
            "acc_improvement_pct",
            &col(&|s| 100.0 * (s.final_metrics.mean_acc - s.initial.mean_acc) / s.initial.mean_acc),
        ),
        Stat::of("iterations", &col(&|s| s.iterations as f64)),
        Stat::of("total_clusters", &col(&|s| s.federation.total_clusters as f64)),
        Stat::of("mean_k", &col(&|s| s.federation.mean_k)),
    ];

    let longest = runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    let curve = (0..longest)
        .map(|i| {
            let at: Vec<&MetricsRow> = runs
                .iter()
                .filter_map(|r| r.rows.get(i).or(r.rows.last()))
                .collect();
            let values = |f: fn(&MetricsRow) -> f64| at.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            let (g, iso, w, acc) = (
                values(|r| r.communities_found as f64),
                values(|r| r.isolated as f64),
                values(|r| r.wrong_assoc_pct),
                values(|r| r.mean_acc),
            );
            CurvePoint {
                iteration: i,
                running: runs.iter().filter(|r| r.rows.len() > i).count(),
                communities_found: mean(&g),
                communities_found_ci95: ci95_half_width(&g),
                isolated: mean(&iso),
                isolated_ci95: ci95_half_width(&iso),
                active: mean(&values(|r| r.active as f64)),
                wrong_assoc_pct: mean(&w),
                wrong_assoc_pct_ci95: ci95_half_width(&w),
                mean_acc: mean(&acc),
                mean_acc_ci95: ci95_half_width(&acc),
            }
        })
        .collect();

    Aggregate {
        seeds: summaries.iter().map(|s| s.seed).collect(),
        stats,
        curve,
    }
}

/// Writes `aggregate.json`, `aggregate.csv` and `aggregate_iterations.csv`.
pub fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<(), CliError> {
    let path = dir.join("aggregate.json");
    let mut text = serde_json::to_string_pretty(agg).map_err(|e| format_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    write_csv(&dir.join("aggregate.csv"), &agg.stats)?;
    write_csv(&dir.join("aggregate_iterations.csv"), &agg.curve)
}

/// Reads every `seed-*` directory under `dir`, sorted by seed.
pub fn load_runs(dir: &Path) -> Result<Vec<SeedRun>, CliError> {
    let mut runs = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.starts_with("seed-") || !entry.path().is_dir() {
            continue;
        }
        let summary_path = entry.path().join("summary.json");
        let text = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
        let summary: RunSummary = serde_json::from_str(&text).map_err(|e| format_err(&summary_path, e))?;
        let csv_path = entry.path().join("metrics.csv");
        let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| format_err(&csv_path, e))?;
        let rows = reader
            .deserialize()
            .collect::<Result<Vec<MetricsRow>, _>>()
            .map_err(|e| format_err(&csv_path, e))?;
        runs.push(SeedRun { summary, rows });
    }
    if runs.is_empty() {
        return Err(format_err(dir, "no seed-* run directories"));
    }
    runs.sort_by_key(|r| r.summary.seed);
    Ok(runs)
}

/// Recomputes and rewrites the aggregate of an existing run directory.
pub fn aggregate_dir(dir: &Path) -> Result<Aggregate, CliError> {
    let agg = aggregate(&load_runs(dir)?);
    write_aggregate(dir, &agg)?;
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_matches_t_table() {
        // t(0.975, 4) = 2.776; sd of 1..5 is sqrt(2.5)
        let ci = ci95_half_width(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((ci - 2.776445 * (2.5f64 / 5.0).sqrt()).abs() < 1e-5, "{ci}");
        assert_eq!(ci95_half_width(&[1.0]), None);
        assert_eq!(ci95_half_width(&[2.0, 2.0, 2.0]), Some(0.0));
    }

    #[test]
    fn overlap_of_intervals() {
        let a = Stat::of("x", &[1.0, 1.1, 0.9]);
        let b = Stat::of("x", &[1.05, 1.0, 1.1]);
        let c = Stat::of("x", &[5.0, 5.0, 5.0]);
        assert!(a.overlaps(&b));
        assert!(!a.overlaps(&c));
    }
}

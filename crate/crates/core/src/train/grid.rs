use rayon::prelude::*;
use serde::Serialize;

use super::config::TrainConfig;
use super::fit::fit;
use crate::corpus::{split_by_time, Dataset, SplitSpec, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::recommend::{evaluate, EvalOptions, ModelRecommender};
use crate::text::TopicArtifacts;

pub const DEFAULT_DIMS: [usize; 5] = [5, 10, 15, 20, 25];
pub const DEFAULT_DECAYS: [f64; 8] = [0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dims: DEFAULT_DIMS.to_vec(),
            alphas: DEFAULT_DECAYS.to_vec(),
            betas: DEFAULT_DECAYS.to_vec(),
        }
    }
}

impl GridSpec {
    /// Configurations in a fixed order: embedding size, then alpha, then beta.
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &d in &self.dims {
            for &alpha in &self.alphas {
                for &beta in &self.betas {
                    out.push(TrainConfig { d, alpha, beta, ..base.clone() });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub validation_map: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    /// Highest validation MAP; the earliest configuration wins ties.
    pub best: TrainConfig,
}

/// Fits every grid configuration on `train` minus its last day and scores it on that day.
/// Runs up to `jobs` fits at once.
pub fn grid_search(
    train: &Dataset,
    topics: &TopicArtifacts,
    train_end: f64,
    base: &TrainConfig,
    grid: &GridSpec,
    jobs: usize,
) -> Result<GridResult> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        return Err(Error::Config("grid search needs at least one value per axis".into()));
    }
    let inner_end = train_end - SECONDS_PER_DAY;
    let (inner, validation) = split_by_time(train, SplitSpec::new(inner_end, train_end)?)?;
    if validation.is_empty() {
        return Err(Error::Split(format!("no training events in the held-out day before {train_end}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let points: Vec<GridPoint> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let ck = fit::<f64>(&inner, topics, cfg, inner_end)?.checkpoint;
                let rec = ModelRecommender::new(&ck, &inner)?;
                let report = evaluate(&rec, &validation, EvalOptions::at(inner_end))?;
                log::info!("grid d={} alpha={} beta={}: MAP {:.4}", cfg.d, cfg.alpha, cfg.beta, report.map_at_n);
                Ok(GridPoint { d: cfg.d, alpha: cfg.alpha, beta: cfg.beta, validation_map: report.map_at_n })
            })
            .collect::<Result<_>>()
    })?;
    let best_index = points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.validation_map > points[best].validation_map { i } else { best });
    Ok(GridResult { best: configs[best_index].clone(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::dataset;
    use crate::text::fixtures::artifacts;

    #[test]
    fn grid_order_and_default_size() {
        let g = GridSpec::default();
        assert_eq!(g.configs(&TrainConfig::default()).len(), 5 * 8 * 8);
        let small = GridSpec { dims: vec![2, 3], alphas: vec![0.1], betas: vec![0.5, 1.0] };
        let c = small.configs(&TrainConfig::default());
        assert_eq!((c[1].d, c[1].beta, c[2].d), (2, 1.0, 3));
    }

    #[test]
    fn picks_a_configuration_deterministically() {
        let day = SECONDS_PER_DAY;
        let mut rows = Vec::new();
        for i in 0..30u64 {
            let t = (i as f64 + 0.5) * day / 6.0;
            rows.push((i + 1, (i % 4) as usize, (i % 3) as usize, t, None));
        }
        let ds = dataset(4, 3, &rows);
        let topics = artifacts(&ds, 2);
        let train_end = 5.0 * day;
        let base = TrainConfig { epochs: 1, ..Default::default() };
        let grid = GridSpec { dims: vec![2, 3], alphas: vec![0.5], betas: vec![0.001, 1.0] };
        let a = grid_search(&ds, &topics, train_end, &base, &grid, 2).unwrap();
        let b = grid_search(&ds, &topics, train_end, &base, &grid, 1).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.best, b.best);
        assert_eq!(a.points.len(), 4);
        let top = a.points.iter().map(|p| p.validation_map).fold(f64::MIN, f64::max);
        let first = a.points.iter().find(|p| p.validation_map == top).unwrap();
        assert_eq!((a.best.d, a.best.beta), (first.d, first.beta));
    }
}

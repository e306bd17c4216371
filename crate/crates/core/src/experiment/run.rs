use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Variant};
use super::pipeline::{build_datasets, decompose, load_frame, split_ranges, Datasets, DecompositionSummary};
use crate::error::{Error, Result};
use crate::evaluation::{compute_metrics, Metrics};
use crate::models::{build_model, predict, InputSpec};
use crate::seed::{child_seed, labelled_seed};
use crate::training::{train_model, History, TrainConfig};

/// One (model, horizon, replicate) unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub variant: Variant,
    pub horizon: usize,
    pub replicate: usize,
}

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/h{}/r{}", self.variant, self.horizon, self.replicate)
    }
}

impl CellId {
    /// File stem for per-cell outputs.
    pub fn stem(&self) -> String {
        format!("{}_h{}_r{}", self.variant, self.horizon, self.replicate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub id: CellId,
    pub seed: u64,
    pub metrics: Metrics,
    pub history: History,
    pub timestamps: Vec<NaiveDateTime>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub id: CellId,
    pub error: String,
}

/// Everything a run produced, before any file is written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub rows: usize,
    pub split_sizes: [usize; 3],
    pub decomposition: Option<DecompositionSummary>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

impl RunOutcome {
    pub fn cell(&self, variant: Variant, horizon: usize, replicate: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.id.variant == variant && c.id.horizon == horizon && c.id.replicate == replicate)
    }
}

fn run_cell(id: CellId, data: &Datasets, config: &ExperimentConfig) -> Result<CellResult> {
    let seed = labelled_seed(config.seed, &id.to_string());
    let spec = InputSpec::from_dataset(&data.train)?;
    let mut model = build_model(id.variant.kind, spec, &config.model_config(), child_seed(seed, 0))?;
    let train_cfg = TrainConfig {
        seed: child_seed(seed, 1),
        ..config.train.clone()
    };
    let history = train_model(model.as_mut(), &data.train, &data.validation, &train_cfg)?;
    let predicted = predict(model.as_ref(), &data.test, 512)?;
    let actual = data.test.targets();
    let metrics = compute_metrics(&actual, &predicted)?;
    if !predicted.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("non-finite test predictions".into()));
    }
    log::info!("{id}: test MAPE {:.4}", metrics.mape);
    Ok(CellResult {
        id,
        seed,
        metrics,
        history,
        timestamps: (0..data.test.len()).map(|i| data.test.target_time(i)).collect(),
        actual,
        predicted,
    })
}

/// Every cell in the grid, in a fixed order.
pub fn cell_grid(config: &ExperimentConfig) -> Vec<CellId> {
    let mut cells = Vec::new();
    for replicate in 0..config.robustness_runs {
        for &horizon in &config.models.horizons {
            for &variant in &config.models.names {
                cells.push(CellId { variant, horizon, replicate });
            }
        }
    }
    cells
}

/// Runs the whole grid on a pool of `jobs` threads. A failing cell is
/// recorded and the others continue. Results are merged by cell id, so the
/// outcome does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<RunOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<RunOutcome> {
    let frame = load_frame(&config.data)?;
    let ranges = split_ranges(&config.data, &frame)?;
    let decomposed = if config.needs_decomposition() {
        let d = decompose(&frame, &ranges, &config.decomposition)?;
        log::info!(
            "decomposition: {} IMFs, reconstruction error {:.3e}",
            d.result.imfs.len(),
            d.reconstruction_error
        );
        Some(d)
    } else {
        None
    };

    let mut datasets: BTreeMap<(bool, usize), Result<Datasets>> = BTreeMap::new();
    for &h in &config.models.horizons {
        for flag in [false, true] {
            if !config.models.names.iter().any(|v| v.decomposed == flag) {
                continue;
            }
            let source = match (&decomposed, flag) {
                (Some(d), true) => &d.frame,
                _ => &frame,
            };
            datasets.insert((flag, h), build_datasets(source, &ranges, config.models.history, h));
        }
    }

    let grid = cell_grid(config);
    let results: Vec<std::result::Result<CellResult, CellFailure>> = grid
        .par_iter()
        .map(|&id| {
            let data = datasets[&(id.variant.decomposed, id.horizon)].as_ref();
            data.map_err(|e| e.to_string())
                .and_then(|d| run_cell(id, d, config).map_err(|e| e.to_string()))
                .map_err(|error| {
                    log::error!("{id} failed: {error}");
                    CellFailure { id, error }
                })
        })
        .collect();

    let (mut cells, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }
    cells.sort_by_key(|c| c.id);
    failures.sort_by_key(|f| f.id);
    Ok(RunOutcome {
        config: config.clone(),
        rows: frame.len(),
        split_sizes: ranges.sizes(),
        decomposition: decomposed.map(|d| d.summary()),
        cells,
        failures,
    })
}

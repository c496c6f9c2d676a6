//! Training loop, learning-rate grid search and scoring for [`MlpHead`].
//!
//! A run is a pure function of (data, config): initialization and per-epoch
//! shuffles both draw from one ChaCha8 stream seeded with `TrainConfig::seed`.
//! The head returned is the epoch checkpoint with the lowest validation EER;
//! ties go to the lower validation loss, then to the earlier epoch. Training
//! itself always runs every epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Dataset;
use crate::head::{HeadError, MlpHead};
use crate::metrics::{self, MetricsError, PaiScope};
use crate::scores::{ScoreEntry, ScoreSet};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("metrics error: {0}")]
    Metrics(#[from] MetricsError),
    #[error("every grid cell failed: {0}")]
    AllCellsFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_width: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub lr_grid: Vec<f64>,
    /// Loss weights for (bona fide, attack) rows; `None` weighs all rows 1.
    pub class_weights: Option<[f64; 2]>,
}

pub const DEFAULT_LR_GRID: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 100,
            batch_size: 128,
            hidden_width: 256,
            seed: 42,
            optimizer: Optimizer::default(),
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.hidden_width == 0 {
            return bad("hidden_width must be positive");
        }
        if self.lr_grid.is_empty() {
            return bad("lr_grid must not be empty");
        }
        if self.lr_grid.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return bad("lr_grid entries must be positive");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad("class weights must be positive");
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return bad("Adam needs 0 <= beta < 1 and eps > 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean BCE over all training rows after the epoch's updates.
    pub train_loss: f64,
    /// Mean BCE over the validation clean rows.
    pub val_loss: f64,
    pub val_eer: f64,
    pub val_bpcer10: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub head: MlpHead,
    /// 1-based epoch of the returned checkpoint.
    pub best_epoch: usize,
    pub val_scores: ScoreSet,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_record(&self) -> &EpochRecord {
        &self.history[self.best_epoch - 1]
    }
}

enum OptState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl OptState {
    fn new(opt: Optimizer, n_params: usize) -> Self {
        match opt {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam { beta1, beta2, eps } => OptState::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
        }
    }

    fn step(&mut self, head: &mut MlpHead, grads: &crate::head::Gradients, lr: f64) {
        let params = head
            .w1
            .iter_mut()
            .chain(head.b1.iter_mut())
            .chain(head.w2.iter_mut())
            .chain(std::iter::once(&mut head.b2));
        match self {
            OptState::Sgd => {
                for (p, g) in params.zip(grads.iter()) {
                    *p -= lr * g;
                }
            }
            OptState::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                t,
            } => {
                *t = t.saturating_add(1);
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for (((p, g), m), v) in params.zip(grads.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                {
                    *m = *beta1 * *m + (1.0 - *beta1) * g;
                    *v = *beta2 * *v + (1.0 - *beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + *eps);
                }
            }
        }
    }
}

fn check_split(data: &Dataset, name: &str) -> Result<(), TrainError> {
    if data.is_empty() {
        return Err(TrainError::DegenerateData(format!("{name} split is empty")));
    }
    if !data.has_both_classes() {
        return Err(TrainError::DegenerateData(format!(
            "{name} split contains a single class"
        )));
    }
    Ok(())
}

/// Trains a head on `train`, selecting the checkpoint with the lowest EER on
/// `val`.
pub fn train(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_split(train, "train")?;
    check_split(val, "val")?;
    if train.dim != val.dim {
        return Err(HeadError::DimMismatch {
            expected: train.dim,
            found: val.dim,
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut head = MlpHead::init(train.dim, cfg.hidden_width, &mut rng);
    let mut opt = OptState::new(cfg.optimizer, head.n_params());
    let mut order: Vec<usize> = (0..train.n_training_rows()).collect();
    let weight = |y: f64| match cfg.class_weights {
        None => 1.0,
        Some([bf, at]) => {
            if y > 0.5 {
                at
            } else {
                bf
            }
        }
    };

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<((f64, f64), usize, MlpHead, ScoreSet)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (grads, _) = head.backward_weighted(batch.iter().map(|&k| {
                let (x, y) = train.training_row(k);
                (x, y, weight(y))
            }))?;
            opt.step(&mut head, &grads, cfg.learning_rate);
        }

        let train_loss =
            head.mean_loss((0..train.n_training_rows()).map(|k| train.training_row(k)))?;
        if !train_loss.is_finite() || !head.is_finite() {
            return Err(TrainError::NanLoss { epoch });
        }
        let val_loss = head.mean_loss((0..val.len()).map(|i| (val.clean_row(i), val.target(i))))?;
        let val_scores = score(&head, val)?;
        let curve = metrics::det_curve(&val_scores, &PaiScope::Pooled)?;
        let val_eer = metrics::eer_from_curve(&curve.points).value;
        let val_bpcer10 =
            metrics::operating_point_from_curve(&curve.points, metrics::BPCER10_TARGET).bpcer;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_eer,
            val_bpcer10,
        });
        let key = (val_eer, val_loss);
        if best.as_ref().is_none_or(|(b, ..)| key < *b) {
            best = Some((key, epoch, head.clone(), val_scores));
        }
    }

    let (_, best_epoch, head, val_scores) = best.expect("epochs >= 1");
    Ok(TrainOutcome {
        head,
        best_epoch,
        val_scores,
        history,
    })
}

/// Attack-probability scores for the clean rows of `data`.
pub fn score(head: &MlpHead, data: &Dataset) -> Result<ScoreSet, TrainError> {
    if data.is_empty() {
        return Err(TrainError::DegenerateData("nothing to score".into()));
    }
    let mut entries = Vec::with_capacity(data.len());
    for (i, meta) in data.samples.iter().enumerate() {
        let p = head.forward(data.clean_row(i))?;
        entries.push(ScoreEntry {
            sample_id: meta.sample_id.clone(),
            label: meta.label,
            pai_species: meta.pai_species.clone(),
            score: p,
        });
    }
    ScoreSet::new(entries).map_err(|e| TrainError::DegenerateData(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok {
        val_eer: f64,
        val_bpcer10: f64,
        best_epoch: usize,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best_config: TrainConfig,
    pub best: TrainOutcome,
    pub rows: Vec<GridRow>,
}

/// Runs [`train`] once per learning rate (cell `i` seeded with `seed + i`)
/// and picks the cell with the lowest validation EER, breaking ties by lower
/// BPCER10 and then by smaller learning rate.
pub fn grid_search(
    train_data: &Dataset,
    val: &Dataset,
    base: &TrainConfig,
    lr_grid: &[f64],
) -> Result<GridOutcome, TrainError> {
    let mut base = base.clone();
    base.lr_grid = lr_grid.to_vec();
    base.validate()?;

    let cells: Vec<(TrainConfig, Result<TrainOutcome, TrainError>)> = lr_grid
        .par_iter()
        .enumerate()
        .map(|(i, &lr)| {
            let cfg = TrainConfig {
                learning_rate: lr,
                seed: base.seed.wrapping_add(i as u64),
                ..base.clone()
            };
            let result = train(train_data, val, &cfg);
            (cfg, result)
        })
        .collect();

    let rows: Vec<GridRow> = cells
        .iter()
        .map(|(cfg, result)| GridRow {
            learning_rate: cfg.learning_rate,
            seed: cfg.seed,
            status: match result {
                Ok(out) => {
                    let rec = out.best_record();
                    CellStatus::Ok {
                        val_eer: rec.val_eer,
                        val_bpcer10: rec.val_bpcer10,
                        best_epoch: out.best_epoch,
                    }
                }
                Err(e) => CellStatus::Failed {
                    error: e.to_string(),
                },
            },
        })
        .collect();

    let best_index = cells
        .iter()
        .enumerate()
        .filter_map(|(i, (cfg, r))| r.as_ref().ok().map(|out| (i, cfg, out.best_record())))
        .min_by(|(_, ca, a), (_, cb, b)| {
            a.val_eer
                .total_cmp(&b.val_eer)
                .then(a.val_bpcer10.total_cmp(&b.val_bpcer10))
                .then(ca.learning_rate.total_cmp(&cb.learning_rate))
        })
        .map(|(i, ..)| i);

    let Some(best_index) = best_index else {
        let errors: Vec<String> = rows
            .iter()
            .map(|r| match &r.status {
                CellStatus::Failed { error } => format!("lr {}: {error}", r.learning_rate),
                CellStatus::Ok { .. } => unreachable!(),
            })
            .collect();
        return Err(TrainError::AllCellsFailed(errors.join("; ")));
    };
    let (best_config, best) = cells
        .into_iter()
        .nth(best_index)
        .map(|(cfg, r)| (cfg, r.expect("selected cell succeeded")))
        .expect("index in range");
    Ok(GridOutcome {
        best_index,
        best_config,
        best,
        rows,
    })
}

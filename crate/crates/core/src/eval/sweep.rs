//! Embedding-dimension sweep: one training run per candidate k, scored by
//! verification performance on a held-out validation subset of the test split.

use super::{joint_verification, Metric};
use crate::data::Manifest;
use crate::error::{Error, Result};
use crate::train::{embed_split, train, validation_subset, RunConfig};
use serde::{Deserialize, Serialize};

/// Sweep settings: candidate dimensionalities and the validation-subset size.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub n_validation: usize,
    pub metric: Metric,
    pub base: RunConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            dims: vec![4, 8, 16, 32],
            n_validation: 50,
            metric: Metric::Seuclidean,
            base: RunConfig::default(),
        }
    }
}

/// One row of the sweep table. The accuracy scalar reported per dimension is
/// TMR at 5% FMR on the validation subset, and is labeled as such.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub tmr_at_5pct_fmr: f64,
    pub tmr_at_1pct_fmr: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metric: Metric,
    pub accuracy_definition: String,
    pub rows: Vec<SweepRow>,
    /// argmax of tmr_at_5pct_fmr; first dimension wins ties.
    pub selected_k: usize,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,tmr_at_5pct_fmr,tmr_at_1pct_fmr\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.k, r.tmr_at_5pct_fmr, r.tmr_at_1pct_fmr));
        }
        out
    }
}

/// Trains one model per requested dimension and reports validation
/// verification accuracy per dimension.
pub fn sweep_dimension(manifest: &Manifest, cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.dims.is_empty() {
        return Err(Error::Config("sweep needs at least one dimension".into()));
    }
    let validation = validation_subset(manifest, cfg.n_validation, cfg.base.seed)?;
    let mut rows = Vec::with_capacity(cfg.dims.len());
    for &k in &cfg.dims {
        let run = RunConfig {
            embedding_dim: k,
            ..cfg.base.clone()
        };
        let outcome = train(manifest, &run)?;
        let embeddings = embed_split(&validation, &outcome.params, None)?;
        let roc = joint_verification(&embeddings, cfg.metric)?;
        rows.push(SweepRow {
            k,
            tmr_at_5pct_fmr: roc.tmr_at_5pct_fmr,
            tmr_at_1pct_fmr: roc.tmr_at_1pct_fmr,
            n_genuine: roc.n_genuine,
            n_impostor: roc.n_impostor,
        });
    }
    let selected_k = rows
        .iter()
        .max_by(|a, b| {
            a.tmr_at_5pct_fmr
                .partial_cmp(&b.tmr_at_5pct_fmr)
                .unwrap()
                .then(std::cmp::Ordering::Greater) // keep the earlier row on ties
        })
        .map(|r| r.k)
        .unwrap();
    Ok(SweepReport {
        metric: cfg.metric,
        accuracy_definition: "tmr_at_5pct_fmr on the validation subset".into(),
        rows,
        selected_k,
    })
}

//! Training objectives and tuple miners.
//!
//! Distances inside hinge terms are squared Euclidean; N-pair similarity is
//! the raw dot product. Every loss returns its gradients with respect to the
//! participating embeddings so the caller can push them back through the
//! network.

mod contrastive;
mod mining;
mod npair;
mod triplet;

pub use contrastive::{contrastive_dm, contrastive_sm};
pub use mining::{
    mine_npair, mine_offline_triplets, mine_online, NPairMode, NPairTuple, OfflineMining,
    OnlineStrategy, TripletIdx,
};
pub use npair::npair_loss;
pub use triplet::triplet_loss;

/// Margin hyperparameters for the pairwise and triplet losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginConfig {
    /// Single-margin contrastive margin.
    pub contrastive: f64,
    /// Double-margin contrastive (m1, m2).
    pub double: (f64, f64),
    /// Triplet hinge margin.
    pub triplet: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            contrastive: 1.0,
            double: (0.5, 0.5),
            triplet: 1.0,
        }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [self.contrastive, self.double.0, self.double.1, self.triplet];
        if all.iter().any(|&m| !(m > 0.0)) {
            return Err(crate::Error::Config(format!(
                "all margins must be positive, got {all:?}"
            )));
        }
        Ok(())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Train / held-out partition grouped by trajectory.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use thiserror::Error;

use super::ContrastiveTuple;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("split fractions must be positive and sum to 1, got {0} and {1}")]
    BadFractions(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<ContrastiveTuple>,
    pub heldout: Vec<ContrastiveTuple>,
    /// Set when a side came out empty at this dataset size.
    pub degenerate: bool,
}

/// Assigns whole trajectories to one side. Input order is kept within each
/// side.
pub fn split(tuples: &[ContrastiveTuple], fractions: (f64, f64), seed: u64) -> Result<Split, SplitError> {
    let (tr, ho) = fractions;
    if !(tr > 0.0 && ho > 0.0 && tr.is_finite() && ho.is_finite() && ((tr + ho) - 1.0).abs() < 1e-9) {
        return Err(SplitError::BadFractions(tr, ho));
    }
    let ids: BTreeSet<&str> = tuples.iter().map(|t| t.trajectory_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.shuffle(&mut stream_rng(seed, stream::SPLIT));
    let n_train = ((tr * ids.len() as f64).round() as usize).min(ids.len());
    let train_ids: BTreeSet<&str> = ids[..n_train].iter().copied().collect();
    let (train, heldout): (Vec<_>, Vec<_>) = tuples
        .iter()
        .cloned()
        .partition(|t| train_ids.contains(t.trajectory_id.as_str()));
    let degenerate = train.is_empty() || heldout.is_empty();
    if degenerate {
        tracing::warn!(
            n_trajectories = ids.len(),
            n_train = train.len(),
            n_heldout = heldout.len(),
            "split left one side empty"
        );
    }
    Ok(Split {
        train,
        heldout,
        degenerate,
    })
}

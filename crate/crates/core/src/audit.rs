//! Fit-scope discipline: every fitted artifact records which rows it saw, and
//! the pipeline proves per-fold that no artifact saw test rows. Also the
//! leaky-vs-clean demonstration of the metric inflation caused by training on
//! test data.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::LabeledDataset;
use crate::models::{self, Hyperparams, ModelKind};
use crate::validation::{evaluate, Metrics};

/// Order-independent digest of the row indices an artifact was fitted on.
/// The indices themselves are retained so subset checks can name offenders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFingerprint {
    pub artifact_id: String,
    pub row_index_digest: String,
    indices: Vec<usize>,
}

impl FitFingerprint {
    pub fn new(artifact_id: impl Into<String>, indices: &[usize]) -> Self {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut hasher = Sha256::new();
        for i in &sorted {
            hasher.update((*i as u64).to_le_bytes());
        }
        Self {
            artifact_id: artifact_id.into(),
            row_index_digest: hex::encode(hasher.finalize()),
            indices: sorted,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Outcome of a scope check. A violation is a result, not an error; callers
/// that need a hard failure convert it themselves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ScopeCheck {
    Pass {
        artifact_id: String,
    },
    Violation {
        artifact_id: String,
        offending_indices: Vec<usize>,
    },
}

impl ScopeCheck {
    pub fn is_pass(&self) -> bool {
        matches!(self, ScopeCheck::Pass { .. })
    }

    /// Escalate a violation to a hard error.
    pub fn into_result(self) -> Result<()> {
        match self {
            ScopeCheck::Pass { .. } => Ok(()),
            ScopeCheck::Violation {
                artifact_id,
                offending_indices,
            } => Err(Error::AuditViolation(format!(
                "artifact '{}' was fitted on {} rows outside its allowance (first few: {:?})",
                artifact_id,
                offending_indices.len(),
                &offending_indices[..offending_indices.len().min(8)]
            ))),
        }
    }
}

/// Pass iff every fitted index is inside `allowed`.
pub fn assert_fit_scope(fingerprint: &FitFingerprint, allowed: &[usize]) -> ScopeCheck {
    let mut allowed_sorted: Vec<usize> = allowed.to_vec();
    allowed_sorted.sort_unstable();
    let offending: Vec<usize> = fingerprint
        .indices
        .iter()
        .copied()
        .filter(|i| allowed_sorted.binary_search(i).is_err())
        .collect();
    if offending.is_empty() {
        ScopeCheck::Pass {
            artifact_id: fingerprint.artifact_id.clone(),
        }
    } else {
        ScopeCheck::Violation {
            artifact_id: fingerprint.artifact_id.clone(),
            offending_indices: offending,
        }
    }
}

/// Paired result of the leakage demonstration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakagePair {
    pub leaky: Metrics,
    pub clean: Metrics,
}

/// Train twice on the same data — once with the held-out tail included in
/// training (leaky) and once without (clean) — and score both on that tail.
/// High-capacity models inflate the leaky score by memorising test rows.
pub fn leaky_vs_clean(
    data: &LabeledDataset,
    kind: ModelKind,
    hp: &Hyperparams,
    seed: u64,
) -> Result<LeakagePair> {
    let n = data.n_rows();
    if n < 100 {
        return Err(Error::Config(format!(
            "leaky_vs_clean needs at least 100 rows, got {n}"
        )));
    }
    let split = n - n / 5;
    let train_idx: Vec<usize> = (0..split).collect();
    let all_idx: Vec<usize> = (0..n).collect();
    let test_idx: Vec<usize> = (split..n).collect();

    let x_test = data.x.select_rows(&test_idx);
    let y_test: Vec<u8> = test_idx.iter().map(|i| data.y[*i]).collect();

    let clean_model = models::fit_scoped(kind, &data.x, &data.y, &train_idx, hp, seed)?;
    let leaky_model = models::fit_scoped(kind, &data.x, &data.y, &all_idx, hp, seed)?;

    let clean = evaluate(&clean_model.predict_proba(&x_test)?, &y_test, 0.5)?;
    let leaky = evaluate(&leaky_model.predict_proba(&x_test)?, &y_test, 0.5)?;
    Ok(LeakagePair { leaky, clean })
}

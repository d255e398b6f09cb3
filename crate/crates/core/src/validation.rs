//! Predictivity coefficient and K-fold cross-validation.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `Q2 = 1 - sum (y - y_hat)^2 / sum (y - mean(y))^2`.
pub fn q2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidData("Q2 needs at least two observations".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedQ2);
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - sse / sst)
}

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldPlan {
    seed: u64,
    k: usize,
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > n {
            return Err(Error::InvalidConfig(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = alloc::vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            assignment[i] = pos % k;
        }
        Ok(Self { seed, k, assignment })
    }

    /// Leave-one-out: `K = n`.
    pub fn leave_one_out(n: usize) -> Result<Self> {
        Self::new(n, n, 0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KFoldOutcome {
    pub q2: f64,
    /// Out-of-fold prediction for every observation, in sample order.
    pub predictions: Vec<f64>,
}

/// Pools the out-of-fold predictions of `procedure` over all folds and
/// returns one Q2 against the full output vector. `procedure` receives the
/// training part and the held-out inputs, and must return one prediction per
/// held-out row. Any fold failure fails the whole evaluation.
pub fn kfold_q2<P>(ts: &TrainingSet, plan: &FoldPlan, procedure: P) -> Result<KFoldOutcome>
where
    P: Fn(&TrainingSet, &Matrix) -> Result<Vec<f64>> + Sync,
{
    if plan.n() != ts.n() {
        return Err(Error::DimensionMismatch {
            expected: ts.n(),
            found: plan.n(),
        });
    }
    let run_fold = |fold: usize| -> Result<(Vec<usize>, Vec<f64>)> {
        let wrap = |e: Error| Error::FoldFailed {
            fold,
            source: Box::new(e),
        };
        let test = plan.test_indices(fold);
        let train = ts.subset(&plan.train_indices(fold)).map_err(wrap)?;
        let preds = procedure(&train, &ts.inputs().select_rows(&test)).map_err(wrap)?;
        if preds.len() != test.len() {
            return Err(wrap(Error::DimensionMismatch {
                expected: test.len(),
                found: preds.len(),
            }));
        }
        Ok((test, preds))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..plan.k()).into_par_iter().map(run_fold).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..plan.k()).map(run_fold).collect();

    let mut predictions = alloc::vec![0.0; ts.n()];
    for r in results {
        let (idx, preds) = r?;
        for (i, p) in idx.into_iter().zip(preds) {
            predictions[i] = p;
        }
    }
    Ok(KFoldOutcome {
        q2: q2(ts.outputs(), &predictions)?,
        predictions,
    })
}

//! Bernoulli naive Bayes over features binarized at a threshold, with
//! Laplace smoothing. Posteriors are exact Bayes-rule quantities, which the
//! tests pin against brute-force enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::models::Hyperparams;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BnbState {
    binarize: f64,
    alpha: f64,
    log_prior: [f64; 2],
    /// per feature, per class: (log p, log (1-p)) for the Bernoulli parameter
    feat_log: Vec<[[f64; 2]; 2]>,
}

pub(crate) fn fit(x: &Matrix, y: &[u8], hp: &Hyperparams) -> Result<BnbState> {
    let alpha = hp.float("alpha").unwrap_or(1.0);
    if alpha <= 0.0 {
        return Err(Error::Config(format!(
            "bnb alpha must be positive, got {alpha}"
        )));
    }
    let binarize = hp.float("binarize").unwrap_or(0.0);

    let n = x.n_rows();
    let d = x.n_cols();
    let n1 = y.iter().filter(|v| **v == 1).count();
    let n0 = n - n1;

    let mut ones = vec![[0usize; 2]; d]; // ones[j][class]
    for i in 0..n {
        let class = y[i] as usize;
        for (j, v) in x.row(i).iter().enumerate() {
            if *v > binarize {
                ones[j][class] += 1;
            }
        }
    }

    let class_n = [n0 as f64, n1 as f64];
    let mut feat_log = vec![[[0.0; 2]; 2]; d];
    for j in 0..d {
        for class in 0..2 {
            let p = (ones[j][class] as f64 + alpha) / (class_n[class] + 2.0 * alpha);
            feat_log[j][class] = [p.ln(), (1.0 - p).ln()];
        }
    }

    Ok(BnbState {
        binarize,
        alpha,
        log_prior: [(n0 as f64 / n as f64).ln(), (n1 as f64 / n as f64).ln()],
        feat_log,
    })
}

impl BnbState {
    pub fn n_features(&self) -> usize {
        self.feat_log.len()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                let mut log_joint = self.log_prior;
                for (j, v) in row.iter().enumerate() {
                    let bit = usize::from(*v > self.binarize);
                    for class in 0..2 {
                        // bit=1 -> log p, bit=0 -> log (1-p)
                        log_joint[class] += self.feat_log[j][class][1 - bit];
                    }
                }
                // normalize via log-sum-exp
                let m = log_joint[0].max(log_joint[1]);
                let z = (log_joint[0] - m).exp() + (log_joint[1] - m).exp();
                ((log_joint[1] - m).exp() / z).clamp(0.0, 1.0)
            })
            .collect()
    }
}

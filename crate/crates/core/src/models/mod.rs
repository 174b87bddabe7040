//! Native implementations of the four classifiers behind a shared
//! fit/predict contract: soft-margin SVM trained by SMO, gradient-boosted
//! regression trees on logistic loss, a bagged random forest, and Bernoulli
//! naive Bayes. Every fit is deterministic given `(X, y, hp, seed)` and
//! records a fit-scope fingerprint for the audit.

mod bernoulli_nb;
mod gradient_boost;
mod random_forest;
mod svm;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audit::FitFingerprint;
use crate::error::{Error, Result};
use crate::features::Matrix;

pub use bernoulli_nb::BnbState;
pub use gradient_boost::BoostState;
pub use random_forest::ForestState;
pub use svm::SvmState;

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    XgbLike,
    RandomForest,
    BernoulliNb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Svm,
        ModelKind::XgbLike,
        ModelKind::RandomForest,
        ModelKind::BernoulliNb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::XgbLike => "xgb",
            ModelKind::RandomForest => "rfc",
            ModelKind::BernoulliNb => "bnb",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HpValue {
    Int(i64),
    Float(f64),
    Cat(String),
}

/// Named hyperparameter assignment. Models read what they know and apply
/// documented defaults for the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams(BTreeMap<String, HpValue>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_float(mut self, name: &str, v: f64) -> Self {
        self.0.insert(name.to_string(), HpValue::Float(v));
        self
    }

    pub fn with_int(mut self, name: &str, v: i64) -> Self {
        self.0.insert(name.to_string(), HpValue::Int(v));
        self
    }

    pub fn with_cat(mut self, name: &str, v: &str) -> Self {
        self.0.insert(name.to_string(), HpValue::Cat(v.to_string()));
        self
    }

    pub fn set(&mut self, name: &str, v: HpValue) {
        self.0.insert(name.to_string(), v);
    }

    pub fn get(&self, name: &str) -> Option<&HpValue> {
        self.0.get(name)
    }

    pub fn float(&self, name: &str) -> Option<f64> {
        match self.0.get(name)? {
            HpValue::Float(v) => Some(*v),
            HpValue::Int(v) => Some(*v as f64),
            HpValue::Cat(_) => None,
        }
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.0.get(name)? {
            HpValue::Int(v) => Some(*v),
            HpValue::Float(v) if v.fract() == 0.0 => Some(*v as i64),
            _ => None,
        }
    }

    pub fn cat(&self, name: &str) -> Option<&str> {
        match self.0.get(name)? {
            HpValue::Cat(v) => Some(v.as_str()),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &HpValue)> {
        self.0.iter()
    }
}

/// Fitted per-kind state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind_state", rename_all = "snake_case")]
pub enum ModelState {
    Bnb(BnbState),
    Forest(ForestState),
    Boost(BoostState),
    Svm(SvmState),
}

/// A trained model exposing class-1 probabilities, plus the fit-scope
/// fingerprint the audit checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classifier {
    pub version: u32,
    pub kind: ModelKind,
    pub hp: Hyperparams,
    pub seed: u64,
    pub fingerprint: FitFingerprint,
    state: ModelState,
}

/// Fit on the given rows, fingerprinting them as indices `0..n`.
pub fn fit(kind: ModelKind, x: &Matrix, y: &[u8], hp: &Hyperparams, seed: u64) -> Result<Classifier> {
    let scope: Vec<usize> = (0..x.n_rows()).collect();
    fit_scoped(kind, x, y, &scope, hp, seed)
}

/// Fit on the rows of `x` selected by `row_scope` (global indices), which is
/// exactly what the fit fingerprint records.
pub fn fit_scoped(
    kind: ModelKind,
    x: &Matrix,
    y: &[u8],
    row_scope: &[usize],
    hp: &Hyperparams,
    seed: u64,
) -> Result<Classifier> {
    if x.n_rows() != y.len() {
        return Err(Error::Integrity(format!(
            "fit: {} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if row_scope.is_empty() {
        return Err(Error::Config("fit: empty row scope".into()));
    }
    let xs = x.select_rows(row_scope);
    let ys: Vec<u8> = row_scope.iter().map(|i| y[*i]).collect();
    if ys.iter().any(|v| *v > 1) {
        return Err(Error::Integrity("fit: labels must be 0/1".into()));
    }
    if xs.rows_iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Integrity("fit: non-finite feature values".into()));
    }
    let pos = ys.iter().filter(|v| **v == 1).count();
    if pos == 0 || pos == ys.len() {
        return Err(Error::DegenerateLabels(format!(
            "{} of {} rows positive",
            pos,
            ys.len()
        )));
    }

    let state = match kind {
        ModelKind::BernoulliNb => ModelState::Bnb(bernoulli_nb::fit(&xs, &ys, hp)?),
        ModelKind::RandomForest => ModelState::Forest(random_forest::fit(&xs, &ys, hp, seed)?),
        ModelKind::XgbLike => ModelState::Boost(gradient_boost::fit(&xs, &ys, hp, seed)?),
        ModelKind::Svm => ModelState::Svm(svm::fit(&xs, &ys, hp)?),
    };

    Ok(Classifier {
        version: CLASSIFIER_FORMAT_VERSION,
        kind,
        hp: hp.clone(),
        seed,
        fingerprint: FitFingerprint::new(format!("model.{}", kind.name()), row_scope),
        state,
    })
}

impl Classifier {
    pub fn n_features(&self) -> usize {
        match &self.state {
            ModelState::Bnb(s) => s.n_features(),
            ModelState::Forest(s) => s.n_features(),
            ModelState::Boost(s) => s.n_features(),
            ModelState::Svm(s) => s.n_features(),
        }
    }

    /// Class-1 probability per row, in `[0, 1]`.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: x.n_cols(),
            });
        }
        let probs = match &self.state {
            ModelState::Bnb(s) => s.predict_proba(x),
            ModelState::Forest(s) => s.predict_proba(x),
            ModelState::Boost(s) => s.predict_proba(x),
            ModelState::Svm(s) => s.predict_proba(x),
        };
        debug_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        Ok(probs)
    }

    /// Hard labels at a probability threshold.
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= threshold))
            .collect())
    }

    /// Mean impurity decrease per feature, normalised to sum 1. Random
    /// forest only.
    pub fn feature_importance(&self) -> Result<Vec<f64>> {
        match &self.state {
            ModelState::Forest(s) => Ok(s.feature_importance()),
            _ => Err(Error::Unsupported(format!(
                "feature_importance is only defined for random forests, not {}",
                self.kind.name()
            ))),
        }
    }

    /// Direct access to the fitted SVM state (diagnostics).
    pub fn svm_state(&self) -> Option<&SvmState> {
        match &self.state {
            ModelState::Svm(s) => Some(s),
            _ => None,
        }
    }

    /// Versioned JSON document with kind, hp, seed, fitted parameters and the
    /// fit fingerprint. `trading` runs from these without refitting.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Classifier> {
        let c: Classifier = serde_json::from_str(s)?;
        if c.version != CLASSIFIER_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported classifier format version {}",
                c.version
            )));
        }
        Ok(c)
    }
}

/// Split one seed into independent per-component streams.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 over seed ^ salt
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn toy(n: usize, d: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut x = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                x.set(i, j, rng.random_range(-2.0..2.0));
            }
        }
        let y: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) > 0.0)).collect();
        (x, y)
    }

    #[test]
    fn single_class_labels_rejected() {
        let (x, _) = toy(20, 3, 1);
        let y = vec![1u8; 20];
        for kind in ModelKind::ALL {
            let err = fit(kind, &x, &y, &Hyperparams::new(), 42).unwrap_err();
            assert!(matches!(err, Error::DegenerateLabels(_)), "{kind:?}");
        }
    }

    #[test]
    fn determinism_bit_for_bit() {
        let (x, y) = toy(80, 4, 9);
        let (xt, _) = toy(30, 4, 10);
        for kind in ModelKind::ALL {
            let a = fit(kind, &x, &y, &Hyperparams::new(), 42).unwrap();
            let b = fit(kind, &x, &y, &Hyperparams::new(), 42).unwrap();
            let pa = a.predict_proba(&xt).unwrap();
            let pb = b.predict_proba(&xt).unwrap();
            assert_eq!(pa, pb, "{kind:?} predictions differ across identical fits");
        }
    }

    #[test]
    fn proba_label_consistency_at_any_threshold() {
        let (x, y) = toy(60, 3, 21);
        for kind in ModelKind::ALL {
            let model = fit(kind, &x, &y, &Hyperparams::new(), 7).unwrap();
            let probs = model.predict_proba(&x).unwrap();
            for theta in [0.0, 0.2, 0.5, 0.77, 1.0] {
                let labels = model.predict(&x, theta).unwrap();
                for (p, l) in probs.iter().zip(&labels) {
                    assert_eq!(*l, u8::from(*p >= theta));
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (x, y) = toy(40, 3, 33);
        let model = fit(ModelKind::BernoulliNb, &x, &y, &Hyperparams::new(), 1).unwrap();
        let wrong = Matrix::zeros(5, 4);
        assert!(matches!(
            model.predict_proba(&wrong),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn importance_unsupported_off_forest() {
        let (x, y) = toy(40, 3, 35);
        let model = fit(ModelKind::Svm, &x, &y, &Hyperparams::new(), 1).unwrap();
        assert!(matches!(
            model.feature_importance(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn classifier_json_round_trip() {
        let (x, y) = toy(50, 3, 40);
        for kind in ModelKind::ALL {
            let model = fit(kind, &x, &y, &Hyperparams::new(), 13).unwrap();
            let back = Classifier::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(
                back.predict_proba(&x).unwrap(),
                model.predict_proba(&x).unwrap(),
                "{kind:?}"
            );
            assert_eq!(back.fingerprint, model.fingerprint);
        }
    }

    #[test]
    fn scoped_fit_records_global_indices() {
        let (x, y) = toy(50, 3, 44);
        let scope: Vec<usize> = (10..40).collect();
        let model =
            fit_scoped(ModelKind::BernoulliNb, &x, &y, &scope, &Hyperparams::new(), 1).unwrap();
        assert_eq!(model.fingerprint.indices(), scope.as_slice());
    }
}

//! Feature standardisation and PCA projection to an explained-variance
//! target, fitted strictly on training rows. Both artifacts carry fit-scope
//! fingerprints so the audit can prove which rows they saw.
//!
//! The projection contract matters here: `transform` maps data rows into
//! component coordinates. The components themselves are never handed out as
//! if they were data.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::audit::FitFingerprint;
use crate::error::{Error, Result};
use crate::features::Matrix;

/// Per-feature mean/std fitted over a declared row scope. Constant columns
/// get std 1 so they standardise to identically zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub fingerprint: FitFingerprint,
}

pub fn fit_standardizer(x: &Matrix, row_scope: &[usize]) -> Result<Standardizer> {
    if row_scope.is_empty() {
        return Err(Error::Config("fit_standardizer: empty row scope".into()));
    }
    let d = x.n_cols();
    let n = row_scope.len() as f64;
    let mut means = vec![0.0; d];
    for &i in row_scope {
        for (j, v) in x.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Integrity(format!(
                    "non-finite value at row {i}, column {j}"
                )));
            }
            means[j] += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut stds = vec![0.0; d];
    if row_scope.len() > 1 {
        for &i in row_scope {
            for (j, v) in x.row(i).iter().enumerate() {
                let dlt = v - means[j];
                stds[j] += dlt * dlt;
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    for s in stds.iter_mut() {
        if *s == 0.0 || !s.is_finite() {
            *s = 1.0;
        }
    }
    Ok(Standardizer {
        means,
        stds,
        fingerprint: FitFingerprint::new("standardizer", row_scope),
    })
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.means.len() {
            return Err(Error::Dimension {
                expected: self.means.len(),
                got: x.n_cols(),
            });
        }
        let mut out = Matrix::zeros(x.n_rows(), x.n_cols());
        for i in 0..x.n_rows() {
            for j in 0..x.n_cols() {
                out.set(i, j, (x.get(i, j) - self.means[j]) / self.stds[j]);
            }
        }
        Ok(out)
    }
}

/// Full principal-axis decomposition of a (standardised) feature matrix over
/// a row scope. Holds every component so models for several explained-
/// variance targets can be derived from one fit.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>, // one orthonormal vector per row, eigenvalue-descending
    evr: Vec<f64>,             // sums to 1 over all components
    fingerprint: FitFingerprint,
}

impl PcaBasis {
    pub fn fit(x_std: &Matrix, row_scope: &[usize]) -> Result<PcaBasis> {
        if row_scope.len() < 2 {
            return Err(Error::Config(
                "fit_pca: row scope must contain at least 2 rows".into(),
            ));
        }
        let d = x_std.n_cols();
        let n = row_scope.len() as f64;

        let mut mean = vec![0.0; d];
        for &i in row_scope {
            for (j, v) in x_std.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }

        // sample covariance of the scoped rows
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for &i in row_scope {
            let row = x_std.row(i);
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / (n - 1.0);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::Integrity(
                "fit_pca: zero total variance in scoped rows".into(),
            ));
        }

        let mut components = Vec::with_capacity(d);
        let mut evr = Vec::with_capacity(d);
        for &idx in &order {
            let col = eig.eigenvectors.column(idx);
            let mut v: Vec<f64> = col.iter().copied().collect();
            // deterministic sign: the largest-magnitude loading is positive
            let mut pivot = 0;
            for (j, c) in v.iter().enumerate() {
                if c.abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            if v[pivot] < 0.0 {
                for c in v.iter_mut() {
                    *c = -*c;
                }
            }
            components.push(v);
            evr.push(eig.eigenvalues[idx].max(0.0) / total);
        }

        Ok(PcaBasis {
            mean,
            components,
            evr,
            fingerprint: FitFingerprint::new("pca", row_scope),
        })
    }

    /// Smallest k whose cumulative explained variance reaches `target`.
    pub fn k_for_target(&self, target: f64) -> Result<usize> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::Config(format!(
                "explained-variance target must be in (0, 1], got {target}"
            )));
        }
        let mut cum = 0.0;
        for (k, r) in self.evr.iter().enumerate() {
            cum += r;
            if cum >= target - 1e-12 {
                return Ok(k + 1);
            }
        }
        // rank-deficient data with target 1.0: every direction with variance
        // is already included
        Ok(self.evr.iter().filter(|r| **r > 0.0).count().max(1))
    }

    /// Materialise the k-component model for one explained-variance target.
    pub fn model_for_target(&self, target: f64) -> Result<PcaModel> {
        let k = self.k_for_target(target)?;
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            evr: self.evr[..k].to_vec(),
            target,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

/// PCA projection model: `k` orthonormal components with non-increasing
/// explained-variance ratios, chosen as the smallest count whose cumulative
/// ratio reaches `target`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub evr: Vec<f64>,
    pub target: f64,
    pub fingerprint: FitFingerprint,
}

/// Fit PCA on standardised data over `row_scope` and keep the smallest
/// component count reaching `target` cumulative explained variance.
pub fn fit_pca(x_std: &Matrix, target: f64, row_scope: &[usize]) -> Result<PcaModel> {
    PcaBasis::fit(x_std, row_scope)?.model_for_target(target)
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn cumulative_evr(&self) -> f64 {
        self.evr.iter().sum()
    }

    /// Project rows into component coordinates: standardise, centre on the
    /// PCA mean, and take dot products with each component. One output row
    /// per input row, k columns.
    pub fn transform(&self, standardizer: &Standardizer, x: &Matrix) -> Result<Matrix> {
        let z = standardizer.apply(x)?;
        self.transform_standardized(&z)
    }

    /// Same, for data already standardised.
    pub fn transform_standardized(&self, z: &Matrix) -> Result<Matrix> {
        if z.n_cols() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                got: z.n_cols(),
            });
        }
        let k = self.k();
        let mut out = Matrix::zeros(z.n_rows(), k);
        let mut centered = vec![0.0; self.mean.len()];
        for i in 0..z.n_rows() {
            let row = z.row(i);
            for (j, c) in centered.iter_mut().enumerate() {
                *c = row[j] - self.mean[j];
            }
            for (c, comp) in self.components.iter().enumerate() {
                let score: f64 = centered.iter().zip(comp).map(|(a, b)| a * b).sum();
                out.set(i, c, score);
            }
        }
        Ok(out)
    }

    /// Map component coordinates back into the standardised feature space.
    pub fn reconstruct(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.n_cols() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: scores.n_cols(),
            });
        }
        let d = self.mean.len();
        let mut out = Matrix::zeros(scores.n_rows(), d);
        for i in 0..scores.n_rows() {
            for j in 0..d {
                let mut v = self.mean[j];
                for (c, comp) in self.components.iter().enumerate() {
                    v += scores.get(i, c) * comp[j];
                }
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<PcaModel> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn scope(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn standardizer_sample_std() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![3.0]]).unwrap();
        let s = fit_standardizer(&x, &scope(2)).unwrap();
        assert!((s.means[0] - 2.0).abs() < 1e-12);
        assert!((s.stds[0] - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn standardized_training_columns_have_zero_mean_unit_std() {
        let mut rng = StdRng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.random_range(-4.0..9.0), rng.random_range(100.0..200.0)])
            .collect();
        let x = Matrix::from_rows(rows).unwrap();
        let s = fit_standardizer(&x, &scope(50)).unwrap();
        let z = s.apply(&x).unwrap();
        for j in 0..2 {
            let mean: f64 = (0..50).map(|i| z.get(i, j)).sum::<f64>() / 50.0;
            let var: f64 =
                (0..50).map(|i| (z.get(i, j) - mean).powi(2)).sum::<f64>() / 49.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = Matrix::from_rows(vec![vec![7.0, 1.0], vec![7.0, 2.0], vec![7.0, 3.0]]).unwrap();
        let s = fit_standardizer(&x, &scope(3)).unwrap();
        assert_eq!(s.stds[0], 1.0);
        let z = s.apply(&x).unwrap();
        for i in 0..3 {
            assert_eq!(z.get(i, 0), 0.0);
        }
    }

    #[test]
    fn empty_scope_is_error() {
        let x = Matrix::zeros(3, 2);
        assert!(fit_standardizer(&x, &[]).is_err());
    }

    #[test]
    fn collinear_data_needs_one_component() {
        // points exactly on the line y = 2x
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let model = fit_pca(&x, 0.99, &scope(20)).unwrap();
        assert_eq!(model.k(), 1);
        assert!((model.evr[0] - 1.0).abs() < 1e-10);
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = StdRng::seed_from_u64(seed);
        // mix a few shared latent factors in so variance concentrates
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let f1: f64 = rng.random_range(-1.0..1.0);
                let f2: f64 = rng.random_range(-1.0..1.0);
                (0..d)
                    .map(|j| {
                        f1 * (j as f64 + 1.0).sin() + f2 * (j as f64).cos()
                            + 0.3 * rng.random_range(-1.0..1.0)
                    })
                    .collect()
            })
            .collect();
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn nested_targets_need_nondecreasing_k() {
        let x = random_matrix(60, 8, 3);
        let s = fit_standardizer(&x, &scope(60)).unwrap();
        let z = s.apply(&x).unwrap();
        let basis = PcaBasis::fit(&z, &scope(60)).unwrap();
        let k80 = basis.k_for_target(0.80).unwrap();
        let k90 = basis.k_for_target(0.90).unwrap();
        let k95 = basis.k_for_target(0.95).unwrap();
        assert!(k80 <= k90 && k90 <= k95);
    }

    #[test]
    fn components_are_orthonormal() {
        let x = random_matrix(40, 6, 5);
        let model = fit_pca(&x, 1.0, &scope(40)).unwrap();
        for (i, a) in model.components.iter().enumerate() {
            for (j, b) in model.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() <= 1e-8, "({i},{j}) dot {dot}");
            }
        }
    }

    #[test]
    fn evr_non_increasing_and_sums_to_one() {
        let x = random_matrix(50, 7, 11);
        let basis = PcaBasis::fit(&x, &scope(50)).unwrap();
        let model = basis.model_for_target(1.0).unwrap();
        for pair in model.evr.windows(2) {
            assert!(pair[0] >= pair[1] - 1e-12);
        }
        let total: f64 = basis.evr.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transform_preserves_row_count_and_projects() {
        let x = random_matrix(30, 5, 13);
        let s = fit_standardizer(&x, &scope(30)).unwrap();
        let model = fit_pca(&s.apply(&x).unwrap(), 0.95, &scope(30)).unwrap();
        let out = model.transform(&s, &x).unwrap();
        assert_eq!(out.n_rows(), 30);
        assert_eq!(out.n_cols(), model.k());
    }

    #[test]
    fn span_basis_has_zero_residual() {
        let x = random_matrix(25, 4, 17);
        let s = fit_standardizer(&x, &scope(25)).unwrap();
        let z = s.apply(&x).unwrap();
        let model = fit_pca(&z, 1.0, &scope(25)).unwrap();
        // rows made of the components themselves (shifted by the mean) lie in
        // the span, so reconstruction is exact
        let rows: Vec<Vec<f64>> = model
            .components
            .iter()
            .map(|c| c.iter().zip(&model.mean).map(|(v, m)| v + m).collect())
            .collect();
        let basis_rows = Matrix::from_rows(rows).unwrap();
        let scores = model.transform_standardized(&basis_rows).unwrap();
        let back = model.reconstruct(&scores).unwrap();
        for i in 0..back.n_rows() {
            for j in 0..back.n_cols() {
                assert!((back.get(i, j) - basis_rows.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reconstruction_captures_target_variance() {
        let x = random_matrix(80, 10, 23);
        let s = fit_standardizer(&x, &scope(80)).unwrap();
        let z = s.apply(&x).unwrap();
        let model = fit_pca(&z, 0.95, &scope(80)).unwrap();
        let scores = model.transform_standardized(&z).unwrap();
        let back = model.reconstruct(&scores).unwrap();
        let mut total = 0.0;
        let mut resid = 0.0;
        for i in 0..z.n_rows() {
            for j in 0..z.n_cols() {
                let c = z.get(i, j) - model.mean[j];
                total += c * c;
                let r = z.get(i, j) - back.get(i, j);
                resid += r * r;
            }
        }
        assert!(1.0 - resid / total >= 0.95 - 1e-9);
    }

    #[test]
    fn unseen_rows_match_direct_dot_products() {
        let x = random_matrix(30, 5, 29);
        let s = fit_standardizer(&x, &scope(30)).unwrap();
        let model = fit_pca(&s.apply(&x).unwrap(), 0.9, &scope(30)).unwrap();
        let unseen = random_matrix(7, 5, 31);
        let got = model.transform(&s, &unseen).unwrap();
        let z = s.apply(&unseen).unwrap();
        for i in 0..7 {
            for (c, comp) in model.components.iter().enumerate() {
                let want: f64 = (0..5).map(|j| (z.get(i, j) - model.mean[j]) * comp[j]).sum();
                assert!((got.get(i, c) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let x = random_matrix(40, 6, 37);
        let a = fit_pca(&x, 1.0, &scope(40)).unwrap();
        let b = fit_pca(&x, 1.0, &scope(40)).unwrap();
        assert_eq!(a.components, b.components);
        for comp in &a.components {
            let pivot = comp
                .iter()
                .enumerate()
                .max_by(|(_, p), (_, q)| p.abs().partial_cmp(&q.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            assert!(comp[pivot] > 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let x = random_matrix(20, 4, 41);
        let s = fit_standardizer(&x, &scope(20)).unwrap();
        let model = fit_pca(&s.apply(&x).unwrap(), 0.9, &scope(20)).unwrap();
        let wrong = Matrix::zeros(3, 6);
        assert!(model.transform(&s, &wrong).is_err());
    }

    #[test]
    fn json_round_trip() {
        let x = random_matrix(20, 4, 43);
        let model = fit_pca(&x, 0.9, &scope(20)).unwrap();
        let back = PcaModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back.components, model.components);
        assert_eq!(back.fingerprint, model.fingerprint);
    }
}

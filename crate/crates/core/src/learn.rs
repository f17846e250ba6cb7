//! Kernel ridge regression and alignment diagnostics.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};
// Unused when another crate in the graph links std and its inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernels::{center_gram, KernelMatrix};
use crate::linalg::{mean, symmetric_eigen, symmetric_eigenvalues};

/// Systems with `λ = 0` and a larger condition number are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Fitted predictor `f(x) = Σ α_i k(x_i, x) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub dual_weights: DVector<f64>,
    pub mean_offset: f64,
    pub lambda: f64,
}

impl RegressionModel {
    pub fn n_train(&self) -> usize {
        self.dual_weights.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub kta: f64,
    /// `C(i)` for `i = 1..=n`.
    pub curve: Vec<f64>,
}

/// Solves `(K + λ I) α = y − mean(y)`.
pub fn krr_fit(k_train: &KernelMatrix, y: &[f64], lambda: f64) -> Result<RegressionModel> {
    let n = k_train.n();
    check_dim(n, y.len())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be finite and non-negative"));
    }
    if n == 0 {
        return Err(invalid("empty training set"));
    }
    let offset = mean(y);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - offset));
    let mut system = k_train.entries().clone();
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    if lambda == 0.0 {
        let eig = symmetric_eigenvalues(&system);
        let (hi, lo) = (eig[0].abs(), eig[n - 1]);
        let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
        if condition > MAX_CONDITION {
            return Err(Error::Singular { condition });
        }
    }
    let chol = Cholesky::new(system).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    Ok(RegressionModel {
        dual_weights: chol.solve(&yc),
        mean_offset: offset,
        lambda,
    })
}

/// `K_cross α + offset`, with `K_cross` of shape `n_test × n_train`.
pub fn krr_predict(model: &RegressionModel, k_cross: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_dim(model.n_train(), k_cross.ncols())?;
    Ok((k_cross * &model.dual_weights).add_scalar(model.mean_offset))
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_dim(truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(invalid("mse of empty vectors"));
    }
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / pred.len() as f64)
}

fn centered_inputs(k: &KernelMatrix, y: &[f64], centered: bool) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dim(k.n(), y.len())?;
    if !centered {
        return Ok((k.entries().clone(), DVector::from_column_slice(y)));
    }
    let kc = if k.is_centered() {
        k.entries().clone()
    } else {
        center_gram(k).entries().clone()
    };
    let m = mean(y);
    Ok((kc, DVector::from_iterator(y.len(), y.iter().map(|v| v - m))))
}

/// `⟨K, y yᵀ⟩_F / (‖K‖_F ‖y yᵀ‖_F)`. With `centered`, `K` is centered (unless
/// already flagged so) and `y` is mean-subtracted first.
pub fn kernel_target_alignment(k: &KernelMatrix, y: &[f64], centered: bool) -> Result<f64> {
    let (km, yv) = centered_inputs(k, y, centered)?;
    let y_norm_sq = yv.norm_squared();
    let k_norm = km.norm();
    if y_norm_sq <= 1e-300 || k_norm <= 1e-300 {
        return Err(Error::UndefinedAlignment);
    }
    let inner = yv.dot(&(&km * &yv));
    Ok((inner / (k_norm * y_norm_sq)).clamp(-1.0, 1.0))
}

/// Cumulative fraction `C(i)` of `‖y‖²` carried by the top-`i` eigenvectors of
/// the centered kernel. Inputs are centered as in [`kernel_target_alignment`].
pub fn task_model_alignment(k: &KernelMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if k.n() < 2 {
        return Err(invalid("alignment curve needs n >= 2"));
    }
    let (km, yv) = centered_inputs(k, y, true)?;
    let total = yv.norm_squared();
    if total <= 1e-300 {
        return Err(Error::UndefinedAlignment);
    }
    let (_, vectors) = symmetric_eigen(&km);
    let mut acc = 0.0;
    let mut curve: Vec<f64> = vectors
        .column_iter()
        .map(|v| {
            acc += v.dot(&yv).powi(2);
            acc / total
        })
        .collect();
    for c in curve.iter_mut() {
        *c = c.min(1.0);
    }
    Ok(curve)
}

pub fn alignment_report(k: &KernelMatrix, y: &[f64]) -> Result<AlignmentReport> {
    Ok(AlignmentReport {
        kta: kernel_target_alignment(k, y, true)?,
        curve: task_model_alignment(k, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{cosine_kernel, KernelKind};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn km(m: DMatrix<f64>) -> KernelMatrix {
        KernelMatrix::new(m, KernelKind::Full, false).unwrap()
    }

    fn cosine_system(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, KernelMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>() * 6.0).collect()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| cosine_kernel(&pts[i], &pts[j]).unwrap());
        (pts, km(m))
    }

    /// Gauss–Jordan inverse, independent of the Cholesky path.
    fn explicit_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        let mut inv = DMatrix::<f64>::identity(n, n);
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs())).unwrap();
            a.swap_rows(c, p);
            inv.swap_rows(c, p);
            let d = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= d;
                inv[(c, j)] /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = a[(r, c)];
                    for j in 0..n {
                        a[(r, j)] -= f * a[(c, j)];
                        inv[(r, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn identity_system() {
        let model = krr_fit(&km(DMatrix::identity(2, 2)), &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(model.mean_offset, 1.5);
        assert!((model.dual_weights - DVector::from_vec(vec![-0.5, 0.5])).norm() < 1e-15);
        let pre = krr_fit(&km(DMatrix::identity(2, 2)), &[-0.5, 0.5], 0.0).unwrap();
        assert_eq!(pre.mean_offset, 0.0);
    }

    #[test]
    fn matches_explicit_inverse() {
        let (_, k) = cosine_system(5, 2, 2);
        let y = [0.3, -1.0, 2.0, 0.5, 0.1];
        let model = krr_fit(&k, &y, 0.1).unwrap();
        let m = mean(&y);
        let yc = DVector::from_iterator(5, y.iter().map(|v| v - m));
        let oracle = explicit_inverse(&(k.entries() + DMatrix::identity(5, 5) * 0.1)) * yc;
        assert!((model.dual_weights - oracle).amax() < 1e-10);
    }

    #[test]
    fn large_ridge_shrinks_weights() {
        let (_, k) = cosine_system(8, 2, 4);
        let y: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let model = krr_fit(&k, &y, 1e6).unwrap();
        let m = mean(&y);
        let yc_norm = y.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt();
        assert!(model.dual_weights.norm() <= yc_norm / 1e6 * (1.0 + 1e-3));
        let pred = krr_predict(&model, k.entries()).unwrap();
        assert!(pred.iter().all(|p| (p - m).abs() < 1e-5));
    }

    #[test]
    fn singular_system_refused_at_zero_lambda() {
        let ones = km(DMatrix::from_element(3, 3, 1.0));
        assert!(matches!(krr_fit(&ones, &[1.0, 2.0, 3.0], 0.0), Err(Error::Singular { .. })));
        assert!(krr_fit(&ones, &[1.0, 2.0, 3.0], 1e-3).is_ok());
        assert!(krr_fit(&ones, &[1.0, 2.0, 3.0], -1.0).is_err());
        assert!(krr_fit(&ones, &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn interpolation_and_representer_oracle() {
        let (pts, k) = cosine_system(6, 2, 9);
        let y = [1.0, -0.5, 0.2, 0.7, -1.3, 0.4];
        let model = krr_fit(&k, &y, 0.0).unwrap();
        let pred = krr_predict(&model, k.entries()).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-8);
        }
        let x_star = [0.4, 2.2];
        let cross = DMatrix::from_fn(1, 6, |_, j| cosine_kernel(&x_star, &pts[j]).unwrap());
        let got = krr_predict(&model, &cross).unwrap()[0];
        let oracle: f64 = (0..6).map(|i| model.dual_weights[i] * cosine_kernel(&pts[i], &x_star).unwrap()).sum::<f64>()
            + model.mean_offset;
        assert!((got - oracle).abs() < 1e-12);
        assert!(krr_predict(&model, &DMatrix::zeros(1, 5)).is_err());
    }

    #[test]
    fn training_error_grows_with_lambda() {
        let (_, k) = cosine_system(30, 5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let mut last = -1.0;
        for step in 0..15 {
            let lambda = 10f64.powf(-6.0 + 10.0 * step as f64 / 14.0);
            let model = krr_fit(&k, &y, lambda).unwrap();
            let train = mse(krr_predict(&model, k.entries()).unwrap().as_slice(), &y).unwrap();
            assert!(train >= last - 1e-12);
            last = train;
        }
    }

    #[test]
    fn mse_examples() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 3.0, 4.0], &t).unwrap(), 1.0);
        assert!(mse(&[1.0], &t).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for i in 0..100 {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert!((mse(&a, &b).unwrap() - acc / 100.0).abs() < 1e-14);
    }

    #[test]
    fn alignment_examples() {
        let y = [1.0, -2.0, 0.5, 0.5];
        let outer = km(DMatrix::from_fn(4, 4, |i, j| y[i] * y[j]));
        assert!((kernel_target_alignment(&outer, &y, false).unwrap() - 1.0).abs() < 1e-12);

        let v = [1.0, 1.0, 0.0, 0.0];
        let rank_one = km(DMatrix::from_fn(4, 4, |i, j| v[i] * v[j]));
        assert!(kernel_target_alignment(&rank_one, &[1.0, -1.0, 3.0, 2.0], false).unwrap().abs() < 1e-15);

        assert!(matches!(
            kernel_target_alignment(&outer, &[2.0; 4], true),
            Err(Error::UndefinedAlignment)
        ));
    }

    #[test]
    fn alignment_is_scale_invariant() {
        let (_, k) = cosine_system(12, 2, 3);
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let base = kernel_target_alignment(&k, &y, true).unwrap();
        let scaled_k = km(k.entries() * 3.5);
        let scaled_y: Vec<f64> = y.iter().map(|v| v * 0.2).collect();
        assert!((kernel_target_alignment(&scaled_k, &scaled_y, true).unwrap() - base).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn cumulative_curve_examples() {
        let diag = km(DMatrix::from_diagonal(&DVector::from_vec(vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0])));
        // Centered kernel built from contrast eigenvectors.
        let u1 = DVector::from_vec(vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]).normalize();
        let u2 = DVector::from_vec(vec![0.0, 0.0, 1.0, -1.0, 0.0, 0.0]).normalize();
        let u3 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, -1.0]).normalize();
        let k = &u1 * u1.transpose() * 3.0 + &u2 * u2.transpose() * 2.0 + &u3 * u3.transpose();
        let k = KernelMatrix::new(k, KernelKind::Full, true).unwrap();

        let c = task_model_alignment(&k, u1.as_slice()).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12);
        let spread: Vec<f64> = (&u1 + &u2 + &u3).iter().copied().collect();
        let c = task_model_alignment(&k, &spread).unwrap();
        for (i, ci) in c.iter().enumerate() {
            let want = ((i + 1).min(3)) as f64 / 3.0;
            assert!((ci - want).abs() < 1e-12, "{i} {ci}");
        }
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
        assert!(task_model_alignment(&diag, &[1.0; 6]).is_err());
    }
}

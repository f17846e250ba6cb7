//! Closed-form checks of the one-qubit cosine embedding and its tensor powers.

use std::f64::consts::PI;

use qkl_core::kernels::FeatureMapConfig;
use qkl_core::linalg::{modulus, CMatrix, C64};
use qkl_core::spectral::{
    eigenfunction_eval, operator_spectrum, product_spectrum, purity_bound_check, second_moment_operator, MeasureSpec,
};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub const MATRIX_TOL: f64 = 1e-8;
pub const EIGEN_TOL: f64 = 1e-6;
pub const GRID: usize = 50;

/// `(1/8)[[3,0,0,1],[0,1,−1,0],[0,−1,1,0],[1,0,0,3]]`.
pub fn expected_one_qubit_operator() -> CMatrix {
    let v = [3.0, 0.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 3.0];
    CMatrix::from_row_slice(4, 4, &v.map(|x| C64::new(x / 8.0, 0.0)))
}

/// `{2^{-d-l}` with multiplicity `2^l C(d, l)`, plus the zero eigenvalue
/// filling the remaining `4^d − 3^d` slots, expanded and sorted.
pub fn expected_product_eigenvalues(d: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut binom = 1u64;
    for l in 0..=d {
        if l > 0 {
            binom = binom * (d - l + 1) as u64 / l as u64;
        }
        let value = 2f64.powi(-((d + l) as i32));
        out.extend(std::iter::repeat_n(value, (1u64 << l) as usize * binom as usize));
    }
    out.resize(1 << (2 * d), 0.0);
    out
}

pub fn spectral_oracle() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cfg = FeatureMapConfig::cosine(1)?;
    let measure = MeasureSpec::uniform_gauss_legendre(-PI, PI, 1, 64)?;
    let a = second_moment_operator(&cfg, &measure)?;
    let err = (&a - expected_one_qubit_operator()).map(modulus).max();
    checks.push(Check::new(
        "second-moment operator",
        err <= MATRIX_TOL,
        format!("max entry error {err:.2e}"),
    ));

    let spec = operator_spectrum(&a)?;
    let expected = [0.5, 0.25, 0.25, 0.0];
    let err = spec
        .eigenvalues
        .iter()
        .zip(expected)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "eigenvalues",
        err <= EIGEN_TOL,
        format!("{:?} (max error {err:.2e})", spec.eigenvalues),
    ));

    // Eigen-matrices are Hilbert–Schmidt normalized; √2 rescales them to
    // Pauli normalization so that f₁ ≡ 1.
    let ops = spec.operators().unwrap_or_default();
    let mut errs = [0.0f64; 3];
    for k in 0..GRID {
        let x = -PI + 2.0 * PI * k as f64 / (GRID - 1) as f64;
        let f = |i: usize| -> Result<f64> { Ok(2f64.sqrt() * eigenfunction_eval(&ops[i], &[x], &cfg)?) };
        errs[0] = errs[0].max((f(0)? - 1.0).abs());
        errs[1] = errs[1].max((f(1)? - x.cos()).abs());
        errs[2] = errs[2].max((f(2)?.abs() - x.sin().abs()).abs());
    }
    for (i, (name, e)) in ["f1 = 1", "f2 = cos", "|f3| = |sin|"].iter().zip(errs).enumerate() {
        checks.push(Check::new(
            &format!("eigenfunction {}", i + 1),
            ops.len() == 4 && e <= EIGEN_TOL,
            format!("{name}, max error {e:.2e} on {GRID} points"),
        ));
    }

    let bound = purity_bound_check(&cfg, &measure, &spec)?;
    checks.push(Check::new(
        "purity bound (d = 1)",
        bound.gamma_max <= bound.bound + 1e-12,
        format!("gamma_max {:.6} <= sqrt(Tr rho_mu^2) {:.6}", bound.gamma_max, bound.bound),
    ));

    let cfg2 = FeatureMapConfig::cosine(2)?;
    let measure2 = MeasureSpec::uniform_gauss_legendre(-PI, PI, 2, 16)?;
    let spec2 = operator_spectrum(&second_moment_operator(&cfg2, &measure2)?)?;
    let want = expected_product_eigenvalues(2);
    let err = spec2
        .eigenvalues
        .iter()
        .zip(&want)
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "two-qubit operator spectrum",
        spec2.eigenvalues.len() == want.len() && err <= EIGEN_TOL,
        format!("max error {err:.2e} against 2^(-2-l) with multiplicity 2^l C(2,l)"),
    ));
    let bound2 = purity_bound_check(&cfg2, &measure2, &spec2)?;
    checks.push(Check::new(
        "purity bound (d = 2)",
        bound2.gamma_max <= bound2.bound + 1e-12,
        format!("gamma_max {:.6} <= {:.6}", bound2.gamma_max, bound2.bound),
    ));

    for d in 3..=6 {
        let spectrum = product_spectrum(&expected, d);
        let total: f64 = spectrum.iter().map(|(v, m)| v * *m as f64).sum();
        checks.push(Check::new(
            &format!("product spectrum d = {d}"),
            (total - 1.0).abs() <= 1e-12,
            format!("sum {total:.15}"),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_eigenvalues_have_the_right_mass() {
        for d in 1..=4 {
            let v = expected_product_eigenvalues(d);
            assert_eq!(v.len(), 1 << (2 * d));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }
        assert_eq!(expected_product_eigenvalues(1), vec![0.5, 0.25, 0.25, 0.0]);
    }

    #[test]
    fn oracle_passes() {
        for check in spectral_oracle().unwrap() {
            assert!(check.passed, "{}", check.line());
        }
    }
}

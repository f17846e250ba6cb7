//! Spectra of kernel integral operators.
//!
//! For an embedding `x ↦ ρ(x)` the integral operator of `k(x, x′) = Tr[ρ(x)ρ(x′)]`
//! acts on the RKHS functions `f_M(x) = Tr[ρ(x) M]` through the finite matrix
//! `A_μ = ∫ vec(ρ(y)) vec(ρ(y))† μ(dy)` (row-major `vec`). Eigenvectors of
//! `A_μ`, reshaped into Hermitian matrices `A_i`, give the Mercer
//! eigenfunctions `f_i(x) = Tr[ρ(x) A_i]` with eigenvalues `γ_i`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
// Unused when another crate in the graph links std and its inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernels::{embed, FeatureMapConfig, KernelMatrix};
use crate::linalg::{
    hermitian_defect, hermitian_eigen, hermitian_part, log2_exact, symmetric_eigen, trace_product,
    unvec_row_major, vec_row_major, CMatrix, CVector, C64, ONE, ZERO,
};
use crate::quantum::{purity, DensityMatrix, Observable};

/// Eigenvalues whose magnitude falls below this are reported as zero.
pub const CLIP: f64 = 1e-12;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Largest reduced register for which `A_μ` (`16^q` entries) is assembled.
pub const MAX_OPERATOR_QUBITS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum EigenObjects {
    /// Eigenvectors of an empirical Gram matrix.
    Vectors(Vec<DVector<f64>>),
    /// Hilbert–Schmidt orthonormal Hermitian eigen-matrices of `A_μ`.
    Operators(Vec<Observable>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Sorted non-increasing.
    pub eigenvalues: Vec<f64>,
    pub eigenobjects: EigenObjects,
    /// `Σ γ_i = 1` within `1e-6`.
    pub trace_normalized: bool,
}

impl SpectralDecomposition {
    fn new(eigenvalues: Vec<f64>, eigenobjects: EigenObjects) -> Self {
        let total: f64 = eigenvalues.iter().sum();
        Self {
            eigenvalues,
            eigenobjects,
            trace_normalized: (total - 1.0).abs() <= 1e-6,
        }
    }

    pub fn top(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn operators(&self) -> Option<&[Observable]> {
        match &self.eigenobjects {
            EigenObjects::Operators(ops) => Some(ops),
            EigenObjects::Vectors(_) => None,
        }
    }

    pub fn vectors(&self) -> Option<&[DVector<f64>]> {
        match &self.eigenobjects {
            EigenObjects::Vectors(v) => Some(v),
            EigenObjects::Operators(_) => None,
        }
    }
}

/// Data distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    /// Uniform on `[lo, hi]^dim`.
    UniformBox { lo: f64, hi: f64, dim: usize },
    PointMass(Vec<f64>),
    /// Uniform weights on the given points.
    Empirical(Vec<Vec<f64>>),
}

/// How integrals over a [`MeasureKind::UniformBox`] are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    MonteCarlo { samples: usize, seed: u64 },
    /// Tensor Gauss–Legendre rule with `nodes` points per axis.
    GaussLegendre { nodes: usize },
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::MonteCarlo {
            samples: 4096,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    kind: MeasureKind,
    quadrature: Quadrature,
}

impl MeasureSpec {
    pub fn new(kind: MeasureKind, quadrature: Quadrature) -> Result<Self> {
        match (&kind, quadrature) {
            (MeasureKind::UniformBox { lo, hi, dim }, q) => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) || *dim == 0 {
                    return Err(invalid("uniform box needs finite lo < hi and dim >= 1"));
                }
                if let Quadrature::GaussLegendre { nodes } = q {
                    if *dim > 2 {
                        return Err(invalid("Gauss-Legendre quadrature is limited to dim <= 2"));
                    }
                    if nodes == 0 {
                        return Err(invalid("need at least one quadrature node"));
                    }
                }
                if let Quadrature::MonteCarlo { samples: 0, .. } = q {
                    return Err(invalid("need at least one Monte Carlo sample"));
                }
            }
            (MeasureKind::PointMass(x), _) if x.is_empty() => {
                return Err(invalid("point mass needs a location"))
            }
            (MeasureKind::Empirical(points), _) => {
                let d = points.first().map(Vec::len).ok_or_else(|| invalid("empty empirical measure"))?;
                if d == 0 || points.iter().any(|p| p.len() != d) {
                    return Err(invalid("empirical points must share a nonzero dimension"));
                }
            }
            _ => {}
        }
        Ok(Self { kind, quadrature })
    }

    pub fn uniform_gauss_legendre(lo: f64, hi: f64, dim: usize, nodes: usize) -> Result<Self> {
        Self::new(MeasureKind::UniformBox { lo, hi, dim }, Quadrature::GaussLegendre { nodes })
    }

    pub fn uniform_monte_carlo(lo: f64, hi: f64, dim: usize, samples: usize, seed: u64) -> Result<Self> {
        Self::new(MeasureKind::UniformBox { lo, hi, dim }, Quadrature::MonteCarlo { samples, seed })
    }

    pub fn point_mass(x: Vec<f64>) -> Result<Self> {
        Self::new(MeasureKind::PointMass(x), Quadrature::default())
    }

    pub fn empirical(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(MeasureKind::Empirical(points), Quadrature::default())
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            MeasureKind::UniformBox { dim, .. } => *dim,
            MeasureKind::PointMass(x) => x.len(),
            MeasureKind::Empirical(p) => p[0].len(),
        }
    }

    /// Weighted nodes `(y, w)` with `Σ w = 1`.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        match &self.kind {
            MeasureKind::PointMass(x) => vec![(x.clone(), 1.0)],
            MeasureKind::Empirical(points) => {
                let w = 1.0 / points.len() as f64;
                points.iter().map(|p| (p.clone(), w)).collect()
            }
            MeasureKind::UniformBox { lo, hi, dim } => match self.quadrature {
                Quadrature::MonteCarlo { samples, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let w = 1.0 / samples as f64;
                    (0..samples)
                        .map(|_| ((0..*dim).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect(), w))
                        .collect()
                }
                Quadrature::GaussLegendre { nodes } => {
                    let (x, w) = gauss_legendre(nodes);
                    let axis: Vec<(f64, f64)> = x
                        .iter()
                        .zip(&w)
                        .map(|(&t, &wt)| (lo + (hi - lo) * (t + 1.0) / 2.0, wt / 2.0))
                        .collect();
                    let mut grid: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                    for _ in 0..*dim {
                        grid = grid
                            .into_iter()
                            .flat_map(|(p, wp)| {
                                axis.iter().map(move |&(t, wt)| {
                                    let mut q = p.clone();
                                    q.push(t);
                                    (q, wp * wt)
                                })
                            })
                            .collect();
                    }
                    grid
                }
            },
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `ρ_μ = ∫ ρ(y) μ(dy)`.
pub fn mean_density(cfg: &FeatureMapConfig, measure: &MeasureSpec) -> Result<DensityMatrix> {
    check_dim(cfg.num_qubits(), measure.dim())?;
    let dim = 1usize << cfg.embedded_qubits();
    let mut acc = CMatrix::zeros(dim, dim);
    for (y, w) in measure.nodes() {
        acc += embed(&y, cfg)?.entries().scale(w);
    }
    Ok(DensityMatrix::from_matrix_unchecked(hermitian_part(&acc)))
}

/// `A_μ = ∫ vec(ρ(y)) vec(ρ(y))† μ(dy)` of shape `4^q × 4^q`.
pub fn second_moment_operator(cfg: &FeatureMapConfig, measure: &MeasureSpec) -> Result<CMatrix> {
    let q = cfg.embedded_qubits();
    if q > MAX_OPERATOR_QUBITS {
        return Err(Error::Capacity {
            what: "embedded qubits",
            value: q,
            limit: MAX_OPERATOR_QUBITS,
        });
    }
    check_dim(cfg.num_qubits(), measure.dim())?;
    let size = 1usize << (2 * q);
    let mut acc = CMatrix::zeros(size, size);
    for (y, w) in measure.nodes() {
        let v = vec_row_major(embed(&y, cfg)?.entries());
        acc.ger(C64::new(w, 0.0), &v, &v.map(|z| z.conj()), ONE);
    }
    Ok(hermitian_part(&acc))
}

/// Eigendecomposition of `A_μ` into eigenvalues `γ_i` and Hermitian,
/// Hilbert–Schmidt orthonormal eigen-matrices `A_i`.
///
/// Inside a degenerate cluster the basis is fixed by projecting Pauli
/// strings onto the eigenspace, taken in order of decreasing overlap and,
/// among equal overlaps, diagonal strings first (I < Z < X < Y per factor).
pub fn operator_spectrum(a_mu: &CMatrix) -> Result<SpectralDecomposition> {
    if !a_mu.is_square() {
        return Err(invalid("operator must be square"));
    }
    if hermitian_defect(a_mu) > 1e-8 {
        return Err(invalid("second-moment operator must be Hermitian"));
    }
    let size = a_mu.nrows();
    let q = log2_exact(size)
        .filter(|b| b % 2 == 0)
        .map(|b| b / 2)
        .ok_or_else(|| invalid("operator size must be 4^q"))?;
    let dim = 1usize << q;
    let (mut values, vectors) = hermitian_eigen(a_mu);
    for v in values.iter_mut() {
        if v.abs() < CLIP {
            *v = 0.0;
        }
    }
    let paulis = PauliBasis::new(q);
    let mut operators = Vec::with_capacity(size);
    let mut start = 0;
    while start < size {
        let mut end = start + 1;
        while end < size && (values[end - 1] - values[end]).abs() < DEGENERACY_GAP {
            end += 1;
        }
        let cluster = vectors.columns(start, end - start).into_owned();
        operators.extend(hermitian_cluster_basis(&cluster, &paulis, dim));
        start = end;
    }
    Ok(SpectralDecomposition::new(values, EigenObjects::Operators(operators)))
}

/// Normalized Pauli strings on `q` qubits in canonical order.
struct PauliBasis {
    dim: usize,
    /// Per string: for each row `r`, the column of its single nonzero entry
    /// and the entry's value (already scaled by `1/√dim`).
    strings: Vec<Vec<(usize, C64)>>,
}

impl PauliBasis {
    fn new(q: usize) -> Self {
        let dim = 1usize << q;
        let norm = 1.0 / (dim as f64).sqrt();
        // Per-factor order I, Z, X, Y: diagonal operators first.
        let single = |label: usize, bit: usize| -> (usize, C64) {
            match label {
                0 => (bit, ONE),
                1 => (bit, if bit == 0 { ONE } else { -ONE }),
                2 => (bit ^ 1, ONE),
                _ => (bit ^ 1, if bit == 0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) }),
            }
        };
        let mut labels: Vec<Vec<usize>> = (0..1usize << (2 * q))
            .map(|code| (0..q).map(|f| (code >> (2 * (q - 1 - f))) & 3).collect())
            .collect();
        labels.sort_by_key(|l| (l.iter().filter(|&&x| x != 0).count(), l.clone()));
        let strings = labels
            .iter()
            .map(|l| {
                (0..dim)
                    .map(|row| {
                        let mut col = 0;
                        let mut val = C64::new(norm, 0.0);
                        for (f, &label) in l.iter().enumerate() {
                            let bit = (row >> (q - 1 - f)) & 1;
                            let (c, v) = single(label, bit);
                            col = col << 1 | c;
                            val *= v;
                        }
                        (col, val)
                    })
                    .collect()
            })
            .collect();
        Self { dim, strings }
    }

    /// `cluster† vec(P_k)`.
    fn coefficients(&self, k: usize, cluster: &CMatrix) -> CVector {
        let mut c = CVector::zeros(cluster.ncols());
        for (j, cj) in c.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (row, &(col, val)) in self.strings[k].iter().enumerate() {
                acc += cluster[(row * self.dim + col, j)].conj() * val;
            }
            *cj = acc;
        }
        c
    }
}

fn hermitian_cluster_basis(cluster: &CMatrix, paulis: &PauliBasis, dim: usize) -> Vec<Observable> {
    let k = cluster.ncols();
    let mut ranked: Vec<(usize, f64)> = (0..paulis.strings.len())
        .map(|p| (p, paulis.coefficients(p, cluster).norm_squared()))
        .collect();
    ranked.sort_by(|a, b| {
        let diff = b.1 - a.1;
        if diff.abs() <= DEGENERACY_GAP {
            a.0.cmp(&b.0)
        } else {
            b.1.total_cmp(&a.1)
        }
    });
    let mut basis: Vec<CVector> = Vec::with_capacity(k);
    for (p, overlap) in ranked {
        if basis.len() == k || overlap <= 1e-12 {
            break;
        }
        let projected = cluster * paulis.coefficients(p, cluster);
        let mut u = vec_row_major(&hermitian_part(&unvec_row_major(&projected, dim)));
        for b in &basis {
            let c = b.dotc(&u);
            u -= b * c;
        }
        let norm = u.norm();
        if norm > 1e-6 {
            basis.push(u / C64::new(norm, 0.0));
        }
    }
    // Fallback when Pauli projections do not span the cluster numerically.
    if basis.len() < k {
        for j in 0..k {
            let m = unvec_row_major(&cluster.column(j).into_owned(), dim);
            for candidate in [hermitian_part(&m), hermitian_part(&(m * C64::new(0.0, 1.0)))] {
                if basis.len() == k {
                    break;
                }
                let mut u = vec_row_major(&candidate);
                for b in &basis {
                    let c = b.dotc(&u);
                    u -= b * c;
                }
                let norm = u.norm();
                if norm > 1e-6 {
                    basis.push(u / C64::new(norm, 0.0));
                }
            }
        }
    }
    basis
        .iter()
        .map(|v| Observable::from_matrix_unchecked(hermitian_part(&unvec_row_major(v, dim))))
        .collect()
}

/// `f_A(x) = Tr[ρ(x) A]`.
pub fn eigenfunction_eval(a: &Observable, x: &[f64], cfg: &FeatureMapConfig) -> Result<f64> {
    let rho = embed(x, cfg)?;
    check_dim(rho.dim(), a.matrix().nrows())?;
    Ok(trace_product(rho.entries(), a.matrix()).re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityBoundReport {
    pub gamma_max: f64,
    /// `√Tr[ρ_μ²]`.
    pub bound: f64,
    /// Sampling slack `3/√n` added to the bound.
    pub slack: f64,
    pub holds: bool,
}

/// Compares the top eigenvalue of an empirical spectrum (eigenvalues of
/// `K/n`) with `√Tr[ρ_μ²]`.
pub fn purity_bound_check(
    cfg: &FeatureMapConfig,
    measure: &MeasureSpec,
    spectrum: &SpectralDecomposition,
) -> Result<PurityBoundReport> {
    let rho_mu = mean_density(cfg, measure)?;
    let bound = purity(&rho_mu).max(0.0).sqrt();
    let n = spectrum.eigenvalues.len().max(1);
    let slack = 3.0 / (n as f64).sqrt();
    let gamma_max = spectrum.top();
    Ok(PurityBoundReport {
        gamma_max,
        bound,
        slack,
        holds: gamma_max <= bound + slack,
    })
}

/// All `d`-fold products of `factor_eigenvalues` with their multiplicities,
/// equal values merged, sorted non-increasing.
pub fn product_spectrum(factor_eigenvalues: &[f64], d: usize) -> Vec<(f64, u64)> {
    let r = factor_eigenvalues.len();
    let mut out: Vec<(f64, u64)> = Vec::new();
    if r == 0 {
        return out;
    }
    let mut counts = vec![0usize; r];
    fn walk(idx: usize, left: usize, counts: &mut Vec<usize>, eig: &[f64], d: usize, out: &mut Vec<(f64, u64)>) {
        if idx + 1 == counts.len() {
            counts[idx] = left;
            let value: f64 = eig.iter().zip(counts.iter()).map(|(e, &c)| e.powi(c as i32)).product();
            // Multinomial d! / Π c_j!, built from binomials to stay exact.
            let mut mult: u64 = 1;
            let mut remaining = d;
            for &c in counts.iter() {
                mult *= binomial(remaining, c);
                remaining -= c;
            }
            out.push((value, mult));
            return;
        }
        for c in 0..=left {
            counts[idx] = c;
            walk(idx + 1, left - c, counts, eig, d, out);
        }
    }
    walk(0, d, &mut counts, factor_eigenvalues, d, &mut out);
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut merged: Vec<(f64, u64)> = Vec::new();
    for (v, m) in out {
        match merged.last_mut() {
            Some((last, lm)) if (*last - v).abs() <= 1e-12 * last.abs().max(1.0) => *lm += m,
            _ => merged.push((v, m)),
        }
    }
    merged
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Eigenvalues of `K/n` (sorted non-increasing, clipped) with eigenvectors.
pub fn gram_spectrum(k: &KernelMatrix) -> SpectralDecomposition {
    let n = k.n();
    let scaled: DMatrix<f64> = k.entries() / n as f64;
    let (mut values, vectors) = symmetric_eigen(&scaled);
    for v in values.iter_mut() {
        if v.abs() < CLIP {
            *v = 0.0;
        }
    }
    let vecs = (0..n).map(|j| vectors.column(j).into_owned()).collect();
    SpectralDecomposition::new(values, EigenObjects::Vectors(vecs))
}

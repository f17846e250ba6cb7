//! Feature maps and kernels.
//!
//! The quantum feature map encodes `x ∈ ℝ^d` as `V ⊗_i R_X(x_i)|0⟩` and the
//! kernels are Hilbert–Schmidt inner products of the resulting (possibly
//! reduced) density matrices.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
// Unused when another crate in the graph links std and its inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::trace_product;
use crate::quantum::{
    haar_random_unitary, random_layers_unitary, rx_gate, DensityMatrix, Statevector, UnitaryMatrix,
};

/// How the entangling unitary `V` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntanglerSpec {
    /// `V = id`.
    None,
    /// Haar-random `V` drawn from `ChaCha8Rng::seed_from_u64(seed)`.
    Haar { seed: u64 },
    /// [`random_layers_unitary`] with `depth` blocks.
    Layers { seed: u64, depth: usize },
}

impl EntanglerSpec {
    pub fn build(&self, num_qubits: usize) -> Result<Option<UnitaryMatrix>> {
        match *self {
            EntanglerSpec::None => Ok(None),
            EntanglerSpec::Haar { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                haar_random_unitary(1 << num_qubits, &mut rng).map(Some)
            }
            EntanglerSpec::Layers { seed, depth } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                random_layers_unitary(num_qubits, depth, &mut rng).map(Some)
            }
        }
    }
}

/// `x ↦ ρ^V(x)` on `num_qubits` qubits, optionally reduced to `projection`.
///
/// The unitary is materialized once at construction and shared between
/// clones, so the full and projected variants of one feature map can be
/// derived cheaply with [`FeatureMapConfig::with_projection`].
#[derive(Debug, Clone)]
pub struct FeatureMapConfig {
    num_qubits: usize,
    entangler: EntanglerSpec,
    unitary: Option<Arc<UnitaryMatrix>>,
    projection: Option<Vec<usize>>,
}

impl FeatureMapConfig {
    pub fn new(num_qubits: usize, entangler: EntanglerSpec, projection: Option<Vec<usize>>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(invalid("feature map needs at least one qubit"));
        }
        let unitary = entangler.build(num_qubits)?.map(Arc::new);
        Self {
            num_qubits,
            entangler,
            unitary,
            projection: None,
        }
        .with_projection(projection)
    }

    /// Cosine embedding without entangler or projection.
    pub fn cosine(num_qubits: usize) -> Result<Self> {
        Self::new(num_qubits, EntanglerSpec::None, None)
    }

    /// Same map with a different projection; the unitary is shared.
    pub fn with_projection(&self, projection: Option<Vec<usize>>) -> Result<Self> {
        let projection = match projection {
            None => None,
            Some(mut keep) => {
                keep.sort_unstable();
                keep.dedup();
                if keep.is_empty() || keep.iter().any(|&q| q >= self.num_qubits) {
                    return Err(invalid("projection must be a nonempty subset of the qubits"));
                }
                Some(keep)
            }
        };
        Ok(Self {
            projection,
            ..self.clone()
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entangler(&self) -> EntanglerSpec {
        self.entangler
    }

    pub fn unitary(&self) -> Option<&UnitaryMatrix> {
        self.unitary.as_deref()
    }

    pub fn projection(&self) -> Option<&[usize]> {
        self.projection.as_deref()
    }

    /// Number of qubits of the embedding after projection.
    pub fn embedded_qubits(&self) -> usize {
        self.projection.as_ref().map_or(self.num_qubits, Vec::len)
    }

    /// `|ψ^V(x)⟩ = V ⊗_i R_X(x_i)|0⟩`.
    pub fn state(&self, x: &[f64]) -> Result<Statevector> {
        check_dim(self.num_qubits, x.len())?;
        let mut psi = Statevector::zero(self.num_qubits)?;
        for (qubit, &angle) in x.iter().enumerate() {
            psi.apply(&rx_gate(angle)?, &[qubit])?;
        }
        if let Some(v) = &self.unitary {
            psi.apply_full(v)?;
        }
        Ok(psi)
    }

    fn embedding(&self, x: &[f64]) -> Result<Embedding> {
        let psi = self.state(x)?;
        match &self.projection {
            None => Ok(Embedding::Pure(psi)),
            Some(keep) => Ok(Embedding::Mixed(psi.reduced_density(keep)?)),
        }
    }
}

/// Cached embedding of one point: a pure state for the full kernel, a
/// reduced density matrix for projected kernels.
#[derive(Debug, Clone)]
enum Embedding {
    Pure(Statevector),
    Mixed(DensityMatrix),
}

impl Embedding {
    fn inner(&self, other: &Embedding) -> f64 {
        match (self, other) {
            (Embedding::Pure(a), Embedding::Pure(b)) => a.amplitudes().dotc(b.amplitudes()).norm_sqr(),
            (Embedding::Mixed(a), Embedding::Mixed(b)) => trace_product(a.entries(), b.entries()).re,
            _ => unreachable!("embeddings of one feature map share a representation"),
        }
    }
}

/// `ρ^V(x)`, or its partial trace onto `cfg.projection()`.
pub fn embed(x: &[f64], cfg: &FeatureMapConfig) -> Result<DensityMatrix> {
    match cfg.embedding(x)? {
        Embedding::Pure(psi) => Ok(psi.to_density()),
        Embedding::Mixed(rho) => Ok(rho),
    }
}

/// `Π_i cos²((x_i − x′_i)/2)`.
pub fn cosine_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    if x.is_empty() {
        return Err(invalid("cosine kernel needs at least one coordinate"));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| {
            let c = ((a - b) / 2.0).cos();
            c * c
        })
        .product())
}

/// `exp(−‖x − x′‖²/2)` (unit bandwidth).
pub fn rbf_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-sq / 2.0).exp())
}

/// `Tr[ρ̃(x) ρ̃(x′)]` for the feature map `cfg`.
pub fn kernel_value(x: &[f64], y: &[f64], cfg: &FeatureMapConfig) -> Result<f64> {
    Ok(cfg.embedding(x)?.inner(&cfg.embedding(y)?))
}

/// Which kernel a Gram matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KernelKind {
    /// Projected kernel on the qubit carrying the target (`q`).
    Biased,
    /// Projected kernel on a different qubit (`q_w`).
    BiasedWrong,
    /// Full quantum kernel (`k`).
    Full,
    Rbf,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] = [KernelKind::Biased, KernelKind::BiasedWrong, KernelKind::Full, KernelKind::Rbf];

    pub fn tag(&self) -> &'static str {
        match self {
            KernelKind::Biased => "q",
            KernelKind::BiasedWrong => "qw",
            KernelKind::Full => "k",
            KernelKind::Rbf => "rbf",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, KernelKind::Rbf)
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A kernel that can be assembled into a Gram matrix.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// Closed-form cosine product kernel (equal to the simulated full kernel
    /// for any `V`).
    Cosine,
    Rbf,
    /// Simulated quantum kernel; `kind` tags the resulting matrices.
    Quantum { cfg: FeatureMapConfig, kind: KernelKind },
}

impl KernelSpec {
    /// Simulated kernel, tagged `Full` without projection, `Biased` when the
    /// projection keeps qubit 0 and `BiasedWrong` otherwise.
    pub fn quantum(cfg: FeatureMapConfig) -> Self {
        let kind = match cfg.projection() {
            None => KernelKind::Full,
            Some(keep) if keep.contains(&0) => KernelKind::Biased,
            Some(_) => KernelKind::BiasedWrong,
        };
        KernelSpec::Quantum { cfg, kind }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            KernelSpec::Cosine => KernelKind::Full,
            KernelSpec::Rbf => KernelKind::Rbf,
            KernelSpec::Quantum { kind, .. } => *kind,
        }
    }
}

/// Symmetric Gram matrix tagged with its kernel and centering state.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    kind: KernelKind,
    centered: bool,
}

impl KernelMatrix {
    pub fn new(entries: DMatrix<f64>, kind: KernelKind, centered: bool) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("kernel matrix must be square"));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-10 {
                    return Err(invalid("kernel matrix must be symmetric"));
                }
            }
        }
        Ok(Self { entries, kind, centered })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

/// Per-point cache of whatever the kernel needs, so that an `n`-point Gram
/// matrix costs `n` simulations instead of `n²`.
enum Features<'a> {
    Points(&'a [Vec<f64>]),
    Embedded(Vec<Embedding>),
}

fn features<'a>(points: &'a [Vec<f64>], kernel: &KernelSpec) -> Result<Features<'a>> {
    let d = points.first().map_or(0, Vec::len);
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    match kernel {
        KernelSpec::Quantum { cfg, .. } => points
            .iter()
            .map(|p| cfg.embedding(p))
            .collect::<Result<Vec<_>>>()
            .map(Features::Embedded),
        _ => Ok(Features::Points(points)),
    }
}

fn pair_value(kernel: &KernelSpec, a: &Features<'_>, i: usize, b: &Features<'_>, j: usize) -> Result<f64> {
    match (kernel, a, b) {
        (KernelSpec::Cosine, Features::Points(p), Features::Points(q)) => cosine_kernel(&p[i], &q[j]),
        (KernelSpec::Rbf, Features::Points(p), Features::Points(q)) => rbf_kernel(&p[i], &q[j]),
        (_, Features::Embedded(p), Features::Embedded(q)) => Ok(p[i].inner(&q[j])),
        _ => unreachable!("feature cache matches the kernel"),
    }
}

/// `K_ij = k(x_i, x_j)`.
pub fn gram(points: &[Vec<f64>], kernel: &KernelSpec) -> Result<KernelMatrix> {
    if points.is_empty() {
        return Err(invalid("Gram matrix needs at least one point"));
    }
    let cache = features(points, kernel)?;
    let n = points.len();
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = pair_value(kernel, &cache, i, &cache, j)?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(KernelMatrix {
        entries,
        kind: kernel.kind(),
        centered: false,
    })
}

/// Rectangular `K_ij = k(rows_i, cols_j)`, used for prediction.
pub fn cross_gram(rows: &[Vec<f64>], cols: &[Vec<f64>], kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    if let (Some(r), Some(c)) = (rows.first(), cols.first()) {
        check_dim(c.len(), r.len())?;
    }
    let a = features(rows, kernel)?;
    let b = features(cols, kernel)?;
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for i in 0..rows.len() {
        for j in 0..cols.len() {
            out[(i, j)] = pair_value(kernel, &a, i, &b, j)?;
        }
    }
    Ok(out)
}

/// `(id − 11ᵀ/n) K (id − 11ᵀ/n)`.
pub fn center_gram(k: &KernelMatrix) -> KernelMatrix {
    let n = k.n();
    let m = &k.entries;
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            // K symmetric: column means equal row means.
            let v = m[(i, j)] - row_means[i] - row_means[j] + grand;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    KernelMatrix {
        entries,
        kind: k.kind,
        centered: true,
    }
}

/// Mean of `shots` Bernoulli(p) outcomes.
pub fn sample_fidelity<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    let p = p.clamp(0.0, 1.0);
    let hits = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidArgument(alloc::format!("{e}")))?
        .sample(rng);
    Ok(hits as f64 / shots as f64)
}

/// Shot-noise estimate of the full kernel: the fraction of `shots` runs of
/// `U(x′)† U(x)|0⟩` that return all zeros, drawn from the exact fidelity.
pub fn shot_estimate<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    cfg: &FeatureMapConfig,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if cfg.projection().is_some() {
        return Err(invalid("shot estimation is defined for the full kernel only"));
    }
    if shots == 0 {
        return Err(invalid("need at least one shot"));
    }
    let p = kernel_value(x, y, cfg)?;
    sample_fidelity(p, shots, rng)
}

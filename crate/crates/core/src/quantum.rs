//! Dense statevector and density-matrix algebra.
//!
//! Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
//! basis-state index. Every gate convention below follows
//! `R(θ) = exp(-i θ/2 σ)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

// Unused when another crate in the graph links std and its inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{
    self, hermitian_defect, hermitian_eigenvalues, log2_exact, modulus, trace_product, CMatrix, CVector,
    C64, ONE, ZERO,
};

pub const NORM_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;

/// Pure state of `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: CVector,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(invalid("a statevector needs at least one qubit"));
        }
        let mut amplitudes = CVector::zeros(1 << num_qubits);
        amplitudes[0] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let num_qubits = log2_exact(amplitudes.len())
            .filter(|&q| q >= 1)
            .ok_or_else(|| invalid("amplitude count must be a power of two >= 2"))?;
        let state = Self {
            num_qubits,
            amplitudes: CVector::from_vec(amplitudes),
        };
        if (state.norm() - 1.0).abs() > NORM_TOL {
            return Err(invalid("statevector is not normalized"));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Result<C64> {
        check_dim(self.amplitudes.len(), other.amplitudes.len())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// In-place version of [`apply_gate`].
    pub fn apply(&mut self, gate: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
        validate_targets(self.num_qubits, gate, targets)?;
        apply_gate_slice(
            self.amplitudes.as_mut_slice(),
            self.num_qubits,
            &gate.matrix,
            targets,
        );
        Ok(())
    }

    /// Multiplies by a unitary acting on all qubits.
    pub fn apply_full(&mut self, unitary: &UnitaryMatrix) -> Result<()> {
        check_dim(self.amplitudes.len(), unitary.dim())?;
        self.amplitudes = &unitary.matrix * &self.amplitudes;
        Ok(())
    }

    pub fn to_density(&self) -> DensityMatrix {
        let entries = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            num_qubits: self.num_qubits,
            entries,
        }
    }

    /// Reduced density matrix on `keep`, computed straight from the
    /// amplitudes. Equal to `partial_trace(&self.to_density(), keep)` but
    /// never materializes the full `2^d × 2^d` matrix.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let layout = SplitLayout::new(self.num_qubits, keep)?;
        let k = layout.keep_offsets.len();
        let psi = self.amplitudes.as_slice();
        let mut entries = CMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let mut acc = ZERO;
                for &t in &layout.trace_offsets {
                    acc += psi[layout.keep_offsets[i] + t] * psi[layout.keep_offsets[j] + t].conj();
                }
                entries[(i, j)] = acc;
                entries[(j, i)] = acc.conj();
            }
        }
        for i in 0..k {
            entries[(i, i)].im = 0.0;
        }
        Ok(DensityMatrix {
            num_qubits: layout.kept,
            entries,
        })
    }
}

/// Hermitian PSD unit-trace matrix on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian and unit trace within `1e-10`,
    /// smallest eigenvalue at least `-1e-8`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("density matrix must be square"));
        }
        let num_qubits = log2_exact(entries.nrows())
            .ok_or_else(|| invalid("density matrix dimension must be a power of two"))?;
        let dm = Self {
            num_qubits,
            entries,
        };
        dm.validate()?;
        Ok(dm)
    }

    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        let num_qubits = log2_exact(entries.nrows()).unwrap_or(0);
        Self {
            num_qubits,
            entries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if hermitian_defect(&self.entries) > HERMITIAN_TOL {
            return Err(invalid("density matrix is not Hermitian"));
        }
        let tr = self.entries.trace();
        if modulus(tr - ONE) > NORM_TOL {
            return Err(invalid("density matrix does not have unit trace"));
        }
        if self.min_eigenvalue() < -PSD_TOL {
            return Err(invalid("density matrix is not positive semidefinite"));
        }
        Ok(())
    }

    /// `id / 2^q`.
    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self {
            num_qubits,
            entries: CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)
            .last()
            .copied()
            .unwrap_or(0.0)
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            num_qubits: self.num_qubits + other.num_qubits,
            entries: self.entries.kronecker(&other.entries),
        }
    }
}

/// Square unitary matrix whose dimension is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    matrix: CMatrix,
}

impl UnitaryMatrix {
    /// Checks `U U† = id` within `1e-10` (Frobenius norm, which bounds the
    /// spectral norm from above).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || log2_exact(matrix.nrows()).is_none() {
            return Err(invalid("unitary dimension must be a power of two"));
        }
        let u = Self { matrix };
        if u.unitarity_defect() > NORM_TOL {
            return Err(invalid("matrix is not unitary"));
        }
        Ok(u)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        log2_exact(self.dim()).unwrap_or(0)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `‖U U† − id‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (&self.matrix * self.matrix.adjoint() - CMatrix::identity(n, n)).norm()
    }

    /// `gate ⊗ id` placed on `targets`, multiplied onto `self` from the left.
    pub fn left_apply(&mut self, gate: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
        let n = self.num_qubits();
        validate_targets(n, gate, targets)?;
        let dim = self.dim();
        for column in self.matrix.as_mut_slice().chunks_mut(dim) {
            apply_gate_slice(column, n, &gate.matrix, targets);
        }
        Ok(())
    }
}

/// Hermitian operator on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    num_qubits: usize,
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("observable must be square"));
        }
        let num_qubits = log2_exact(matrix.nrows())
            .ok_or_else(|| invalid("observable dimension must be a power of two"))?;
        if hermitian_defect(&matrix) > HERMITIAN_TOL {
            return Err(invalid("observable is not Hermitian"));
        }
        Ok(Self { num_qubits, matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        let num_qubits = log2_exact(matrix.nrows()).unwrap_or(0);
        Self { num_qubits, matrix }
    }

    pub fn pauli_z() -> Self {
        Self::from_matrix_unchecked(linalg::pauli_z())
    }

    pub fn identity(num_qubits: usize) -> Self {
        Self::from_matrix_unchecked(linalg::identity(1 << num_qubits))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            num_qubits: self.num_qubits,
            matrix: self.matrix.scale(factor),
        }
    }
}

/// `exp(-i·angle/2·σ_x)`.
pub fn rx_gate(angle: f64) -> Result<UnitaryMatrix> {
    rotation_gate(Axis::X, angle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `exp(-i·angle/2·σ)` for the Pauli matrix of `axis`.
pub fn rotation_gate(axis: Axis, angle: f64) -> Result<UnitaryMatrix> {
    if !angle.is_finite() {
        return Err(invalid("rotation angle must be finite"));
    }
    let (s, c) = (angle / 2.0).sin_cos();
    let sigma = match axis {
        Axis::X => linalg::pauli_x(),
        Axis::Y => linalg::pauli_y(),
        Axis::Z => linalg::pauli_z(),
    };
    let m = linalg::identity(2).scale(c) - sigma * C64::new(0.0, s);
    Ok(UnitaryMatrix::from_matrix_unchecked(m))
}

pub fn cnot_gate() -> UnitaryMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    UnitaryMatrix::from_matrix_unchecked(m)
}

/// Applies `gate` to the ordered `targets` of `state` (identity elsewhere).
/// `targets[0]` is the most significant qubit of the gate's own index.
pub fn apply_gate(state: &Statevector, gate: &UnitaryMatrix, targets: &[usize]) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply(gate, targets)?;
    Ok(out)
}

fn validate_targets(num_qubits: usize, gate: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(invalid("gate needs at least one target"));
    }
    check_dim(1 << targets.len(), gate.dim())?;
    for (k, &t) in targets.iter().enumerate() {
        if t >= num_qubits {
            return Err(invalid("target qubit index out of range"));
        }
        if targets[..k].contains(&t) {
            return Err(invalid("target qubits must be distinct"));
        }
    }
    Ok(())
}

fn apply_gate_slice(amps: &mut [C64], num_qubits: usize, gate: &CMatrix, targets: &[usize]) {
    let k = targets.len();
    let gdim = 1usize << k;
    let offsets: Vec<usize> = (0..gdim)
        .map(|g| {
            targets
                .iter()
                .enumerate()
                .filter(|(pos, _)| g >> (k - 1 - pos) & 1 == 1)
                .map(|(_, &t)| 1usize << (num_qubits - 1 - t))
                .sum()
        })
        .collect();
    let mask: usize = targets.iter().map(|&t| 1usize << (num_qubits - 1 - t)).sum();
    let mut buf = vec![ZERO; gdim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (b, &off) in buf.iter_mut().zip(&offsets) {
            *b = amps[base + off];
        }
        for (row, &off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (col, b) in buf.iter().enumerate() {
                acc += gate[(row, col)] * b;
            }
            amps[base + off] = acc;
        }
    }
}

/// Haar-distributed unitary on `U(dim)`: QR of a complex Ginibre matrix with
/// the columns of `Q` rephased by the phases of `R`'s diagonal.
pub fn haar_random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if log2_exact(dim).is_none() {
        return Err(invalid("dimension must be a power of two"));
    }
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    let ginibre = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let modulus = modulus(d);
        let phase = if modulus > 0.0 { d / modulus } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryMatrix::from_matrix_unchecked(q))
}

/// Product of `num_layers` random blocks. Each block is one rotation about a
/// uniformly chosen axis in {X, Y, Z} by a uniform angle in `[0, 2π)` on a
/// uniformly chosen qubit, followed by a CNOT on a uniformly chosen ordered
/// pair of distinct qubits (omitted for a single qubit).
pub fn random_layers_unitary<R: Rng + ?Sized>(
    num_qubits: usize,
    num_layers: usize,
    rng: &mut R,
) -> Result<UnitaryMatrix> {
    if num_qubits == 0 {
        return Err(invalid("random layers need at least one qubit"));
    }
    let mut u = UnitaryMatrix::identity(1 << num_qubits);
    let cnot = cnot_gate();
    for _ in 0..num_layers {
        let qubit = rng.random_range(0..num_qubits);
        let axis = match rng.random_range(0..3u8) {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        };
        let angle = rng.random::<f64>() * 2.0 * PI;
        u.left_apply(&rotation_gate(axis, angle)?, &[qubit])?;
        if num_qubits > 1 {
            let control = rng.random_range(0..num_qubits);
            let mut target = rng.random_range(0..num_qubits - 1);
            if target >= control {
                target += 1;
            }
            u.left_apply(&cnot, &[control, target])?;
        }
    }
    Ok(u)
}

/// Index bookkeeping for splitting a register into kept and traced qubits.
struct SplitLayout {
    kept: usize,
    keep_offsets: Vec<usize>,
    trace_offsets: Vec<usize>,
}

impl SplitLayout {
    fn new(num_qubits: usize, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(invalid("partial trace must keep at least one qubit"));
        }
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.len() != keep.len() {
            return Err(invalid("kept qubits must be distinct"));
        }
        if kept.iter().any(|&q| q >= num_qubits) {
            return Err(invalid("kept qubit index out of range"));
        }
        let traced: Vec<usize> = (0..num_qubits).filter(|q| !kept.contains(q)).collect();
        let offsets = |qubits: &[usize]| -> Vec<usize> {
            let m = qubits.len();
            (0..1usize << m)
                .map(|idx| {
                    qubits
                        .iter()
                        .enumerate()
                        .filter(|(pos, _)| idx >> (m - 1 - pos) & 1 == 1)
                        .map(|(_, &q)| 1usize << (num_qubits - 1 - q))
                        .sum()
                })
                .collect()
        };
        Ok(Self {
            kept: kept.len(),
            keep_offsets: offsets(&kept),
            trace_offsets: offsets(&traced),
        })
    }
}

/// Reduced density matrix on the qubits in `keep` (ascending order defines
/// the reduced register). The result is re-symmetrized to `(ρ + ρ†)/2`.
pub fn partial_trace(dm: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = SplitLayout::new(dm.num_qubits, keep)?;
    let k = layout.keep_offsets.len();
    let rho = &dm.entries;
    let mut entries = CMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = ZERO;
            for &t in &layout.trace_offsets {
                acc += rho[(layout.keep_offsets[i] + t, layout.keep_offsets[j] + t)];
            }
            entries[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix {
        num_qubits: layout.kept,
        entries: linalg::hermitian_part(&entries),
    })
}

/// `Tr[ρ²]`.
pub fn purity(dm: &DensityMatrix) -> f64 {
    trace_product(&dm.entries, &dm.entries).re
}

/// `Tr[a b]`.
pub fn hs_inner(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(trace_product(&a.entries, &b.entries).re)
}

/// `Tr[ρ M]`.
pub fn expectation(dm: &DensityMatrix, obs: &Observable) -> Result<f64> {
    check_dim(dm.dim(), obs.matrix.nrows())?;
    if hermitian_defect(&obs.matrix) > HERMITIAN_TOL {
        return Err(Error::InvalidArgument("observable is not Hermitian".into()));
    }
    Ok(trace_product(&dm.entries, &obs.matrix).re)
}

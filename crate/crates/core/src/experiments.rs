//! Seeded data generation and experiment runners.
//!
//! Every experiment is split into independent cells (one `(d, seed)` pair,
//! or one sampled unitary) that own their generators. The `run_*` functions
//! evaluate cells sequentially and sort the resulting rows; callers that want
//! parallelism can evaluate the `*_cell` functions in any order and merge with
//! the same sort.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
// Unused when another crate in the graph links std and its inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::kernels::{
    cross_gram, gram, sample_fidelity, EntanglerSpec, FeatureMapConfig, KernelKind, KernelMatrix, KernelSpec,
};
use crate::learn::{kernel_target_alignment, krr_fit, krr_predict, mse, task_model_alignment};
use crate::linalg::{mean, variance, CMatrix, C64};
use crate::quantum::{expectation, haar_random_unitary, Observable};
use crate::spectral::{gram_spectrum, purity_bound_check, MeasureSpec, PurityBoundReport};

/// Targets with a smaller sample variance are redrawn.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Redraws allowed before giving up on a cell.
pub const MAX_REDRAWS: u32 = 16;
/// Ridge used when `λ = 0` is refused by the conditioning guard.
pub const FALLBACK_LAMBDA: f64 = 1e-10;
pub const GRID_POINTS: usize = 15;

/// `10^-6 … 10^4`, log-spaced, endpoints exact.
pub fn lambda_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|k| {
            if k == 0 {
                1e-6
            } else if k == GRID_POINTS - 1 {
                1e4
            } else {
                10f64.powf(-6.0 + 10.0 * k as f64 / (GRID_POINTS - 1) as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentId {
    Generalization = 1,
    Spectrum = 2,
    Alignment = 3,
    HaarMoments = 4,
    Concentration = 5,
    ShotCost = 6,
}

/// Draw purposes inside one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Unitary = 0,
    Data = 1,
    Shots = 2,
}

/// Location of a cell in the seed tree: master seed, experiment, `d`, seed
/// index and redraw attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath {
    pub master: u64,
    pub experiment: ExperimentId,
    pub d: usize,
    pub index: u64,
    pub attempt: u32,
}

impl SeedPath {
    pub fn new(master: u64, experiment: ExperimentId, d: usize, index: u64) -> Self {
        Self {
            master,
            experiment,
            d,
            index,
            attempt: 0,
        }
    }

    pub fn next_attempt(self) -> Self {
        Self {
            attempt: self.attempt + 1,
            ..self
        }
    }

    /// ChaCha stream id: experiment, `d`, attempt and purpose packed into the
    /// top 32 bits, the seed index in the low 32.
    pub fn stream_id(&self, stream: Stream) -> u64 {
        (self.experiment as u64) << 56
            | (self.d as u64 & 0xff) << 48
            | (self.attempt as u64 & 0xff) << 40
            | (stream as u64) << 32
            | (self.index & 0xffff_ffff)
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream_id(stream));
        rng
    }

    /// A 64-bit seed for sub-generators keyed by a single integer.
    pub fn derive(&self, stream: Stream) -> u64 {
        self.rng(stream).next_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntanglerKind {
    #[default]
    Haar,
    /// Random rotation and CNOT blocks, `d²` of them.
    Layers,
}

impl EntanglerKind {
    pub fn spec(&self, d: usize, seed: u64) -> EntanglerSpec {
        match self {
            EntanglerKind::Haar => EntanglerSpec::Haar { seed },
            EntanglerKind::Layers => EntanglerSpec::Layers { seed, depth: d * d },
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            EntanglerKind::Haar => "haar",
            EntanglerKind::Layers => "layers",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub d: usize,
    pub n: usize,
    pub entangler: EntanglerSpec,
    /// Seed of the generator that drew inputs and noise.
    pub data_seed: u64,
    /// Target observable on qubit 0.
    pub observable: Observable,
    pub noise_variance: f64,
    /// `c = 1/√Var(f*)` over the drawn inputs.
    pub scale: f64,
    /// Rejected `V` draws before this one.
    pub redraws: u32,
}

/// `(x_train, y_train, x_test, y_test)`.
pub type Split<'a> = (&'a [Vec<f64>], &'a [f64], &'a [Vec<f64>], &'a [f64]);

#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// `c f*(x)` before noise.
    pub clean_labels: Vec<f64>,
    pub meta: DatasetMeta,
    /// The full feature map `x ↦ V ⊗ R_X(x_i)|0⟩` that defines `f*`.
    pub feature_map: FeatureMapConfig,
}

impl Dataset {
    /// Rebuilds the dataset from its metadata.
    pub fn regenerate(meta: &DatasetMeta) -> Result<Dataset> {
        let mut ds = generate_dataset(meta.d, meta.n, meta.entangler, meta.noise_variance, meta.data_seed)?;
        ds.meta.redraws = meta.redraws;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    pub fn split(&self, n_train: usize) -> Split<'_> {
        let (xa, xb) = self.inputs.split_at(n_train);
        let (ya, yb) = self.labels.split_at(n_train);
        (xa, ya, xb, yb)
    }
}

/// Uniform inputs on `[0, 2π)^d`, labels `c·Tr[ρ̃₁(x) σ_z] + N(0, noise)`.
pub fn generate_dataset(
    d: usize,
    n: usize,
    entangler: EntanglerSpec,
    noise_variance: f64,
    data_seed: u64,
) -> Result<Dataset> {
    if d == 0 || n < 2 {
        return Err(invalid("dataset needs d >= 1 and n >= 2"));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(invalid("noise variance must be finite and non-negative"));
    }
    let feature_map = FeatureMapConfig::new(d, entangler, None)?;
    let target_map = feature_map.with_projection(Some(vec![0]))?;
    let observable = Observable::pauli_z();
    let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 * PI).collect())
        .collect();
    let f_star = inputs
        .iter()
        .map(|x| expectation(&crate::kernels::embed(x, &target_map)?, &observable))
        .collect::<Result<Vec<f64>>>()?;
    let var = variance(&f_star);
    if var < DEGENERATE_VARIANCE {
        return Err(Error::DegenerateTarget { variance: var });
    }
    let scale = 1.0 / var.sqrt();
    let noise = Normal::new(0.0, noise_variance.sqrt()).map_err(|e| invalid(format!("{e}")))?;
    let clean_labels: Vec<f64> = f_star.iter().map(|f| scale * f).collect();
    let labels = clean_labels.iter().map(|c| c + noise.sample(&mut rng)).collect();
    Ok(Dataset {
        inputs,
        labels,
        clean_labels,
        meta: DatasetMeta {
            d,
            n,
            entangler,
            data_seed,
            observable,
            noise_variance,
            scale,
            redraws: 0,
        },
        feature_map,
    })
}

/// Dataset of one cell; degenerate targets are redrawn under the next
/// attempt and the number of redraws is recorded in the metadata.
pub fn cell_dataset(path: SeedPath, n: usize, entangler: EntanglerKind, noise_variance: f64) -> Result<Dataset> {
    let mut path = path;
    loop {
        let spec = entangler.spec(path.d, path.derive(Stream::Unitary));
        match generate_dataset(path.d, n, spec, noise_variance, path.derive(Stream::Data)) {
            Err(Error::DegenerateTarget { variance }) => {
                if path.attempt >= MAX_REDRAWS {
                    return Err(Error::DegenerateTarget { variance });
                }
                path = path.next_attempt();
            }
            Ok(mut ds) => {
                ds.meta.redraws = path.attempt;
                return Ok(ds);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// One `λ` for every kernel; `None` picks the per-kernel default.
    Fixed(Option<f64>),
    /// Every value of [`lambda_grid`].
    Grid,
}

/// `λ = 0` for the projected kernels, `10⁻³` otherwise.
pub fn default_lambda(kind: KernelKind) -> f64 {
    match kind {
        KernelKind::Biased | KernelKind::BiasedWrong => 0.0,
        KernelKind::Full | KernelKind::Rbf => 1e-3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d_range: Vec<usize>,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub noise_variance: f64,
    pub train_fraction: f64,
    pub lambda_policy: LambdaPolicy,
    pub kernels: Vec<KernelKind>,
    pub entangler: EntanglerKind,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d_range: (1..=7).collect(),
            n: 200,
            seeds: (0..10).collect(),
            noise_variance: 1e-4,
            train_fraction: 2.0 / 3.0,
            lambda_policy: LambdaPolicy::Fixed(None),
            kernels: KernelKind::ALL.to_vec(),
            entangler: EntanglerKind::Haar,
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_range.is_empty() || self.d_range.iter().any(|&d| d == 0 || d > 12) {
            return Err(invalid("qubit range must be nonempty within 1..=12"));
        }
        if self.n < 3 {
            return Err(invalid("need at least 3 samples"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("need at least one seed"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train fraction must lie in (0, 1)"));
        }
        let n_train = self.n_train();
        if n_train == 0 || n_train >= self.n {
            return Err(invalid("split leaves an empty train or test set"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(invalid("noise variance must be finite and non-negative"));
        }
        if let LambdaPolicy::Fixed(Some(l)) = self.lambda_policy {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(invalid("lambda must be finite and non-negative"));
            }
        }
        if self.kernels.is_empty() {
            return Err(invalid("need at least one kernel"));
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        (self.n as f64 * self.train_fraction).round() as usize
    }

    /// `(d, seed)` pairs in output order.
    pub fn cells(&self) -> Vec<(usize, u64)> {
        self.d_range
            .iter()
            .flat_map(|&d| self.seeds.iter().map(move |&s| (d, s)))
            .collect()
    }

    /// Kernels that are defined at `d` (`q_w` needs a second qubit).
    pub fn kernels_at(&self, d: usize) -> Vec<KernelKind> {
        let mut kinds: Vec<KernelKind> = self
            .kernels
            .iter()
            .copied()
            .filter(|k| d >= 2 || *k != KernelKind::BiasedWrong)
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

/// Kernel of `kind` built on the dataset's feature map.
pub fn kernel_spec(kind: KernelKind, feature_map: &FeatureMapConfig) -> Result<KernelSpec> {
    Ok(match kind {
        KernelKind::Biased => KernelSpec::quantum(feature_map.with_projection(Some(vec![0]))?),
        KernelKind::BiasedWrong => {
            if feature_map.num_qubits() < 2 {
                return Err(invalid("the wrong-qubit kernel needs at least two qubits"));
            }
            KernelSpec::quantum(feature_map.with_projection(Some(vec![1]))?)
        }
        KernelKind::Full => KernelSpec::quantum(feature_map.with_projection(None)?),
        KernelKind::Rbf => KernelSpec::Rbf,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationRow {
    pub d: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    pub lambda: f64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub best_test: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub d: usize,
    pub seed: u64,
    /// 1-based.
    pub rank: usize,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRow {
    pub d: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    pub kta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentCurveRow {
    pub d: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    /// 1-based number of leading components.
    pub i: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarMomentRow {
    pub moment_id: String,
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub d: usize,
    /// Mean of `(ρ̃₁ − id/2)₀₀` over unitaries.
    pub mean_dev: f64,
    /// Mean squared entry of `ρ̃₁ − id/2`.
    pub variance: f64,
    /// Standard error of `mean_dev`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotCostRow {
    pub d: usize,
    /// Median `|q(x, x′) − 1/2|` over unitaries.
    pub signal: f64,
    /// Median single-shot variance of the swap-test estimate of `q`.
    pub per_shot_variance: f64,
    /// Median shots for a standard error of 10% of the signal.
    pub shots_needed: f64,
}

/// One fitted `(kernel, λ)` pair.
fn fit_and_score(
    k_train: &KernelMatrix,
    k_test: &DMatrix<f64>,
    y_train: &[f64],
    y_test: &[f64],
    lambda: f64,
    fallback: bool,
) -> Result<(f64, f64, f64)> {
    let (model, lambda) = match krr_fit(k_train, y_train, lambda) {
        Err(Error::Singular { .. }) if fallback && lambda == 0.0 => {
            (krr_fit(k_train, y_train, FALLBACK_LAMBDA)?, FALLBACK_LAMBDA)
        }
        other => (other?, lambda),
    };
    let train = mse(krr_predict(&model, k_train.entries())?.as_slice(), y_train)?;
    let test = mse(krr_predict(&model, k_test)?.as_slice(), y_test)?;
    Ok((lambda, train, test))
}

pub fn generalization_cell(config: &ExperimentConfig, d: usize, seed: u64) -> Result<Vec<GeneralizationRow>> {
    let path = SeedPath::new(config.master_seed, ExperimentId::Generalization, d, seed);
    let ds = cell_dataset(path, config.n, config.entangler, config.noise_variance)?;
    let (x_train, y_train, x_test, y_test) = ds.split(config.n_train());
    let mut rows = Vec::new();
    for kind in config.kernels_at(d) {
        let spec = kernel_spec(kind, &ds.feature_map)?;
        let k_train = gram(x_train, &spec)?;
        let k_test = cross_gram(x_test, x_train, &spec)?;
        match config.lambda_policy {
            LambdaPolicy::Fixed(lambda) => {
                let lambda = lambda.unwrap_or_else(|| default_lambda(kind));
                let (lambda, train_mse, test_mse) = fit_and_score(&k_train, &k_test, y_train, y_test, lambda, true)?;
                rows.push(GeneralizationRow {
                    d,
                    seed,
                    kernel: kind,
                    lambda,
                    train_mse,
                    test_mse,
                    best_test: true,
                });
            }
            LambdaPolicy::Grid => {
                let start = rows.len();
                for lambda in lambda_grid() {
                    let (lambda, train_mse, test_mse) = fit_and_score(&k_train, &k_test, y_train, y_test, lambda, false)?;
                    rows.push(GeneralizationRow {
                        d,
                        seed,
                        kernel: kind,
                        lambda,
                        train_mse,
                        test_mse,
                        best_test: false,
                    });
                }
                let best = (start..rows.len())
                    .min_by(|&a, &b| rows[a].test_mse.total_cmp(&rows[b].test_mse))
                    .unwrap_or(start);
                rows[best].best_test = true;
            }
        }
    }
    Ok(rows)
}

pub fn sort_generalization(rows: &mut [GeneralizationRow]) {
    rows.sort_by(|a, b| {
        (a.d, a.seed, a.kernel)
            .cmp(&(b.d, b.seed, b.kernel))
            .then(a.lambda.total_cmp(&b.lambda))
    });
}

pub fn run_generalization(config: &ExperimentConfig) -> Result<Vec<GeneralizationRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (d, seed) in config.cells() {
        rows.extend(generalization_cell(config, d, seed)?);
    }
    sort_generalization(&mut rows);
    Ok(rows)
}

/// Number of leading eigenvalues reported per cell.
pub const SPECTRUM_TOP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCell {
    pub rows: Vec<SpectrumRow>,
    /// Lemma check against the empirical measure of the inputs.
    pub bound: PurityBoundReport,
}

pub fn spectrum_cell(config: &ExperimentConfig, d: usize, seed: u64) -> Result<SpectrumCell> {
    let path = SeedPath::new(config.master_seed, ExperimentId::Spectrum, d, seed);
    let ds = cell_dataset(path, config.n, config.entangler, config.noise_variance)?;
    let biased = ds.feature_map.with_projection(Some(vec![0]))?;
    let spectrum = gram_spectrum(&gram(&ds.inputs, &KernelSpec::quantum(biased.clone()))?);
    let bound = purity_bound_check(&biased, &MeasureSpec::empirical(ds.inputs.clone())?, &spectrum)?;
    let rows = spectrum
        .eigenvalues
        .iter()
        .take(SPECTRUM_TOP)
        .enumerate()
        .map(|(r, &eigenvalue)| SpectrumRow {
            d,
            seed,
            rank: r + 1,
            eigenvalue,
        })
        .collect();
    Ok(SpectrumCell { rows, bound })
}

pub fn sort_spectrum(rows: &mut [SpectrumRow]) {
    rows.sort_by_key(|r| (r.d, r.seed, r.rank));
}

pub fn run_spectrum(config: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for (d, seed) in config.cells() {
        rows.extend(spectrum_cell(config, d, seed)?.rows);
    }
    sort_spectrum(&mut rows);
    Ok(rows)
}

pub fn alignment_cell(
    config: &ExperimentConfig,
    d: usize,
    seed: u64,
) -> Result<(Vec<AlignmentRow>, Vec<AlignmentCurveRow>)> {
    let path = SeedPath::new(config.master_seed, ExperimentId::Alignment, d, seed);
    let ds = cell_dataset(path, config.n, config.entangler, config.noise_variance)?;
    let mut scores = Vec::new();
    let mut curves = Vec::new();
    for kind in config.kernels_at(d) {
        let k = gram(&ds.inputs, &kernel_spec(kind, &ds.feature_map)?)?;
        scores.push(AlignmentRow {
            d,
            seed,
            kernel: kind,
            kta: kernel_target_alignment(&k, &ds.labels, true)?,
        });
        curves.extend(
            task_model_alignment(&k, &ds.labels)?
                .into_iter()
                .enumerate()
                .map(|(i, c)| AlignmentCurveRow {
                    d,
                    seed,
                    kernel: kind,
                    i: i + 1,
                    c,
                }),
        );
    }
    Ok((scores, curves))
}

pub fn sort_alignment(scores: &mut [AlignmentRow], curves: &mut [AlignmentCurveRow]) {
    scores.sort_by_key(|r| (r.d, r.seed, r.kernel));
    curves.sort_by_key(|r| (r.d, r.seed, r.kernel, r.i));
}

pub fn run_alignment(config: &ExperimentConfig) -> Result<(Vec<AlignmentRow>, Vec<AlignmentCurveRow>)> {
    config.validate()?;
    let (mut scores, mut curves) = (Vec::new(), Vec::new());
    for (d, seed) in config.cells() {
        let (s, c) = alignment_cell(config, d, seed)?;
        scores.extend(s);
        curves.extend(c);
    }
    sort_alignment(&mut scores, &mut curves);
    Ok((scores, curves))
}

/// A monomial `V_{i₁j₁}…V*_{i′₁j′₁}…`: one factor of each kind for first
/// moments, two for second moments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub v: Vec<(usize, usize)>,
    pub v_conj: Vec<(usize, usize)>,
}

impl Monomial {
    pub fn first(i: usize, j: usize, ip: usize, jp: usize) -> Self {
        Self {
            v: vec![(i, j)],
            v_conj: vec![(ip, jp)],
        }
    }

    pub fn second(a: [(usize, usize); 2], b: [(usize, usize); 2]) -> Self {
        Self {
            v: a.to_vec(),
            v_conj: b.to_vec(),
        }
    }

    pub fn order(&self) -> usize {
        self.v.len()
    }

    pub fn id(&self) -> String {
        let fmt = |f: &[(usize, usize)]| {
            f.iter()
                .map(|(i, j)| format!("{i}{j}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("m{}[{};{}]", self.order(), fmt(&self.v), fmt(&self.v_conj))
    }

    pub fn evaluate(&self, u: &CMatrix) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for &(i, j) in &self.v {
            acc *= u[(i, j)];
        }
        for &(i, j) in &self.v_conj {
            acc *= u[(i, j)].conj();
        }
        acc
    }

    /// Which Weingarten terms contribute: `[(id,id), (swap,swap), (id,swap), (swap,id)]`
    /// for (row, column) permutations. First moments report the first slot.
    pub fn weingarten_terms(&self) -> [bool; 4] {
        if self.order() == 1 {
            return [self.v[0] == self.v_conj[0], false, false, false];
        }
        let (a, b) = (&self.v, &self.v_conj);
        let rows = |swap: bool| {
            if swap {
                a[0].0 == b[1].0 && a[1].0 == b[0].0
            } else {
                a[0].0 == b[0].0 && a[1].0 == b[1].0
            }
        };
        let cols = |swap: bool| {
            if swap {
                a[0].1 == b[1].1 && a[1].1 == b[0].1
            } else {
                a[0].1 == b[0].1 && a[1].1 == b[1].1
            }
        };
        [
            rows(false) && cols(false),
            rows(true) && cols(true),
            rows(false) && cols(true),
            rows(true) && cols(false),
        ]
    }

    /// Haar average on `U(dim)`.
    pub fn analytic(&self, dim: usize) -> f64 {
        let n = dim as f64;
        let t = self.weingarten_terms();
        if self.order() == 1 {
            return if t[0] { 1.0 / n } else { 0.0 };
        }
        let same = 1.0 / (n * n - 1.0);
        let cross = -1.0 / (n * (n * n - 1.0));
        let count = |b: bool| if b { 1.0 } else { 0.0 };
        same * (count(t[0]) + count(t[1])) + cross * (count(t[2]) + count(t[3]))
    }
}

/// Every first-moment tuple on a `dim`-dimensional unitary plus a sample of
/// second-moment tuples. The second-moment set always contains both
/// diagonal coincidence patterns and tuples built to trigger each of the
/// four Weingarten terms.
pub fn haar_monomials<R: Rng + ?Sized>(dim: usize, second: usize, rng: &mut R) -> Vec<Monomial> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            for ip in 0..dim {
                for jp in 0..dim {
                    out.push(Monomial::first(i, j, ip, jp));
                }
            }
        }
    }
    let last = dim - 1;
    let fixed = [
        Monomial::second([(0, 0), (last, last)], [(0, 0), (last, last)]),
        Monomial::second([(0, 0), (0, last)], [(0, 0), (0, last)]),
        Monomial::second([(0, 0), (0, 0)], [(0, 0), (0, 0)]),
        Monomial::second([(0, 0), (last, last)], [(0, last), (last, 0)]),
        Monomial::second([(0, 0), (last, last)], [(last, 0), (0, last)]),
    ];
    out.extend(fixed.iter().cloned());
    let mut generated = 0;
    while generated < second {
        let a = [
            (rng.random_range(0..dim), rng.random_range(0..dim)),
            (rng.random_range(0..dim), rng.random_range(0..dim)),
        ];
        let pattern = rng.random_range(0..5u8);
        let rows = match pattern {
            1 | 3 => [a[1].0, a[0].0],
            4 => [rng.random_range(0..dim), rng.random_range(0..dim)],
            _ => [a[0].0, a[1].0],
        };
        let cols = match pattern {
            1 | 2 => [a[1].1, a[0].1],
            4 => [rng.random_range(0..dim), rng.random_range(0..dim)],
            _ => [a[0].1, a[1].1],
        };
        let m = Monomial::second(a, [(rows[0], cols[0]), (rows[1], cols[1])]);
        if !out.contains(&m) {
            out.push(m);
            generated += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarMomentReport {
    /// Real and imaginary parts as separate rows.
    pub rows: Vec<HaarMomentRow>,
    pub first_moment_max_err: f64,
    pub second_moment_max_err: f64,
    /// Largest `5·SE` over all rows.
    pub tolerance: f64,
    /// Every row within five standard errors.
    pub within_tolerance: bool,
    /// Weingarten terms exercised by at least one second-moment tuple.
    pub terms_exercised: [bool; 4],
    pub second_moment_tuples: usize,
}

/// Monte Carlo check of Haar moments on `U(2^d)`.
pub fn verify_haar_moments<R: Rng + ?Sized>(d: usize, num_samples: usize, rng: &mut R) -> Result<HaarMomentReport> {
    if d == 0 || d > 4 {
        return Err(invalid("Haar moment check supports 1 <= d <= 4"));
    }
    if num_samples < 2 {
        return Err(invalid("need at least two unitaries"));
    }
    let dim = 1usize << d;
    let monomials = haar_monomials(dim, 64, rng);
    let mut sum = vec![C64::new(0.0, 0.0); monomials.len()];
    let mut sum_sq = vec![(0.0f64, 0.0f64); monomials.len()];
    for _ in 0..num_samples {
        let u = haar_random_unitary(dim, rng)?;
        for (k, m) in monomials.iter().enumerate() {
            let v = m.evaluate(u.matrix());
            sum[k] += v;
            sum_sq[k].0 += v.re * v.re;
            sum_sq[k].1 += v.im * v.im;
        }
    }
    let n = num_samples as f64;
    let mut rows = Vec::with_capacity(2 * monomials.len());
    let (mut first_err, mut second_err, mut tolerance) = (0.0f64, 0.0f64, 0.0f64);
    let mut within = true;
    let mut terms = [false; 4];
    for (k, m) in monomials.iter().enumerate() {
        if m.order() == 2 {
            for (t, hit) in terms.iter_mut().zip(m.weingarten_terms()) {
                *t |= hit;
            }
        }
        let analytic = m.analytic(dim);
        let mean = sum[k] / n;
        let parts = [
            ("re", mean.re, sum_sq[k].0, analytic),
            ("im", mean.im, sum_sq[k].1, 0.0),
        ];
        for (part, emp, sq, exact) in parts {
            let var = ((sq / n - emp * emp) * n / (n - 1.0)).max(0.0);
            let stderr = (var / n).sqrt();
            let err = (emp - exact).abs();
            if m.order() == 1 {
                first_err = first_err.max(err);
            } else {
                second_err = second_err.max(err);
            }
            tolerance = tolerance.max(5.0 * stderr);
            within &= err <= 5.0 * stderr + 1e-12;
            rows.push(HaarMomentRow {
                moment_id: format!("{}.{part}", m.id()),
                empirical: emp,
                analytic: exact,
                stderr,
            });
        }
    }
    Ok(HaarMomentReport {
        rows,
        first_moment_max_err: first_err,
        second_moment_max_err: second_err,
        tolerance,
        within_tolerance: within,
        terms_exercised: terms,
        second_moment_tuples: monomials.iter().filter(|m| m.order() == 2).count(),
    })
}

/// Components of `ρ̃₁ − id/2` for one Haar unitary at the probe point
/// `x = (π/2, …)`: `[Δ₀₀, Re Δ₀₁, Im Δ₀₁]`.
pub fn concentration_sample(d: usize, index: u64, master_seed: u64) -> Result<[f64; 3]> {
    let path = SeedPath::new(master_seed, ExperimentId::Concentration, d, index);
    let cfg = FeatureMapConfig::new(d, EntanglerSpec::Haar { seed: path.derive(Stream::Unitary) }, Some(vec![0]))?;
    let rho = crate::kernels::embed(&vec![PI / 2.0; d], &cfg)?;
    let m = rho.entries();
    Ok([m[(0, 0)].re - 0.5, m[(0, 1)].re, m[(0, 1)].im])
}

pub fn summarize_concentration(d: usize, samples: &[[f64; 3]]) -> ConcentrationRow {
    let diag: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    let mean_dev = mean(&diag);
    let n = samples.len() as f64;
    let stderr = if samples.len() > 1 {
        (variance(&diag) * n / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    // ‖Δ‖_F² / 4 = (2Δ₀₀² + 2|Δ₀₁|²) / 4.
    let sq: Vec<f64> = samples
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]) / 2.0)
        .collect();
    ConcentrationRow {
        d,
        mean_dev,
        variance: mean(&sq),
        stderr,
    }
}

pub fn verify_concentration(d_range: &[usize], num_unitaries: usize, master_seed: u64) -> Result<Vec<ConcentrationRow>> {
    if num_unitaries == 0 {
        return Err(invalid("need at least one unitary"));
    }
    d_range
        .iter()
        .map(|&d| {
            let samples = (0..num_unitaries as u64)
                .map(|u| concentration_sample(d, u, master_seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_concentration(d, &samples))
        })
        .collect()
}

/// Shots per repetition in the shot-cost estimate.
pub const SHOT_BATCH: u64 = 1000;
/// Repetitions used to measure the single-shot variance.
pub const SHOT_REPETITIONS: usize = 200;

/// `(signal, per-shot variance)` for one unitary: the swap test returns 0
/// with probability `(1 + q)/2`, and `q̂ = 2p̂ − 1`.
pub fn shot_cost_sample(d: usize, index: u64, master_seed: u64) -> Result<(f64, f64)> {
    let path = SeedPath::new(master_seed, ExperimentId::ShotCost, d, index);
    let cfg = FeatureMapConfig::new(d, EntanglerSpec::Haar { seed: path.derive(Stream::Unitary) }, Some(vec![0]))?;
    let x = vec![PI / 2.0; d];
    let xp = vec![0.0; d];
    let q = crate::kernels::kernel_value(&x, &xp, &cfg)?;
    let p = (1.0 + q) / 2.0;
    let mut rng = path.rng(Stream::Shots);
    let estimates = (0..SHOT_REPETITIONS)
        .map(|_| sample_fidelity(p, SHOT_BATCH, &mut rng).map(|ph| 2.0 * ph - 1.0))
        .collect::<Result<Vec<f64>>>()?;
    let reps = SHOT_REPETITIONS as f64;
    let per_shot = variance(&estimates) * reps / (reps - 1.0) * SHOT_BATCH as f64;
    Ok(((q - 0.5).abs(), per_shot))
}

pub fn summarize_shot_cost(d: usize, samples: &[(f64, f64)]) -> ShotCostRow {
    let signal = median(samples.iter().map(|s| s.0).collect());
    let per_shot_variance = median(samples.iter().map(|s| s.1).collect());
    let shots_needed = median(
        samples
            .iter()
            .map(|&(s, v)| if s > 0.0 { v / (0.1 * s).powi(2) } else { f64::INFINITY })
            .collect(),
    );
    ShotCostRow {
        d,
        signal,
        per_shot_variance,
        shots_needed,
    }
}

pub fn shot_cost(d_range: &[usize], num_unitaries: usize, master_seed: u64) -> Result<Vec<ShotCostRow>> {
    if num_unitaries == 0 {
        return Err(invalid("need at least one unitary"));
    }
    d_range
        .iter()
        .map(|&d| {
            let samples = (0..num_unitaries as u64)
                .map(|u| shot_cost_sample(d, u, master_seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_shot_cost(d, &samples))
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

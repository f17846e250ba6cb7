use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qkl_core::kernels::{center_gram, gram, EntanglerSpec, FeatureMapConfig, KernelMatrix, KernelSpec};
use qkl_core::learn::{kernel_target_alignment, krr_fit, krr_predict, task_model_alignment};
use qkl_core::linalg::{modulus, symmetric_eigenvalues, trace_product, CMatrix, C64};
use qkl_core::quantum::{
    haar_random_unitary, partial_trace, purity, rotation_gate, Axis, DensityMatrix, Statevector,
};

fn random_density(qubits: usize, rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let dim = 1 << qubits;
    let weights: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = weights.iter().sum();
    let mut rho = CMatrix::zeros(dim, dim);
    for w in weights {
        let psi = haar_random_unitary(dim, rng).unwrap().matrix().column(0).into_owned();
        rho += &psi * psi.adjoint() * C64::new(w / total, 0.0);
    }
    DensityMatrix::new(rho).unwrap()
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-PI..PI)).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn partial_trace_is_dual_to_lifting(seed in any::<u64>(), qubits in 2usize..=4, suffix in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kept = rng.random_range(1..qubits);
        let rho = random_density(qubits, 3, &mut rng);
        let obs = random_hermitian(1 << kept, &mut rng);
        let rest = CMatrix::identity(1 << (qubits - kept), 1 << (qubits - kept));
        let (keep, lifted): (Vec<usize>, CMatrix) = if suffix {
            ((qubits - kept..qubits).collect(), rest.kronecker(&obs))
        } else {
            ((0..kept).collect(), obs.kronecker(&rest))
        };
        let reduced = partial_trace(&rho, &keep).unwrap();
        let err = modulus(trace_product(reduced.entries(), &obs) - trace_product(rho.entries(), &lifted));
        prop_assert!(err <= 1e-10, "error {err:e}");
    }

    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), qubits in 1usize..=5, layers in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = Statevector::zero(qubits).unwrap();
        for _ in 0..layers {
            let axis = [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)];
            let gate = rotation_gate(axis, rng.random_range(-PI..PI)).unwrap();
            state.apply(&gate, &[rng.random_range(0..qubits)]).unwrap();
        }
        state.apply_full(&haar_random_unitary(1 << qubits, &mut rng).unwrap()).unwrap();
        prop_assert!((state.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn purity_is_bounded(seed in any::<u64>(), qubits in 1usize..=4, rank in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(qubits, rank, &mut rng);
        let p = purity(&rho);
        prop_assert!(p <= 1.0 + 1e-10 && p >= 1.0 / (1 << qubits) as f64 - 1e-10);
        let keep = vec![rng.random_range(0..qubits)];
        let reduced = partial_trace(&rho, &keep).unwrap();
        prop_assert!((reduced.trace().re - 1.0).abs() <= 1e-10);
        prop_assert!(reduced.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn quantum_gram_is_psd_and_centering_is_idempotent(seed in any::<u64>(), d in 1usize..=4, n in 2usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = FeatureMapConfig::new(d, EntanglerSpec::Haar { seed }, None).unwrap();
        let xs = points(n, d, &mut rng);
        for spec in [KernelSpec::quantum(cfg.clone()), KernelSpec::quantum(cfg.with_projection(Some(vec![0])).unwrap()), KernelSpec::Rbf] {
            let k = gram(&xs, &spec).unwrap();
            let min = symmetric_eigenvalues(k.entries()).into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-10, "min eigenvalue {min:e}");
            let once = center_gram(&k);
            let twice = center_gram(&KernelMatrix::new(once.entries().clone(), k.kind(), false).unwrap());
            prop_assert!((once.entries() - twice.entries()).amax() <= 1e-12);
            prop_assert!(once.entries().row_sum().amax() <= 1e-10 * n as f64);
        }
    }

    #[test]
    fn alignment_is_bounded_and_curve_monotone(seed in any::<u64>(), n in 3usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = points(n, 3, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = gram(&xs, &KernelSpec::Cosine).unwrap();
        let kta = kernel_target_alignment(&k, &y, true).unwrap();
        prop_assert!((-1.0..=1.0).contains(&kta));
        let curve = task_model_alignment(&k, &y).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert!(curve.iter().all(|&c| (0.0..=1.0).contains(&c)));
    }

    #[test]
    fn ridge_predictions_shrink_toward_mean(seed in any::<u64>(), n in 5usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = points(n, 2, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = gram(&xs, &KernelSpec::Rbf).unwrap();
        let model = krr_fit(&k, &y, 1e8).unwrap();
        let pred = krr_predict(&model, k.entries()).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        prop_assert!(pred.iter().all(|p| (p - mean).abs() <= 1e-6));
    }
}

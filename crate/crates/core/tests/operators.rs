mod common;

use nalgebra::{DMatrix, DVector};
use pnp_admm::operators::{
    data_fidelity, grad_data_fidelity, prox_data, standard_kernels, DataFidelity, Kernel, L2Fidelity, MeasurementModel,
    ProxSolverConfig,
};
use pnp_admm::{ImageBuffer, Rng, Shape};
use proptest::prelude::*;

fn random(shape: Shape, rng: &mut Rng) -> ImageBuffer {
    ImageBuffer::from_fn(shape, |_, _, _| rng.standard_normal())
}

/// Dense matrix of the forward operator, one column per unit image.
fn dense(model: &MeasurementModel, shape: Shape) -> DMatrix<f64> {
    let m = model.measurement_shape(shape).unwrap().len();
    let mut a = DMatrix::zeros(m, shape.len());
    for j in 0..shape.len() {
        let mut e = ImageBuffer::zeros(shape);
        e.as_mut_slice()[j] = 1.0;
        let col = model.forward(&e).unwrap();
        for (i, v) in col.as_slice().iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

#[test]
fn prox_matches_dense_normal_equations() {
    let shape = Shape::gray(8, 8);
    let mut rng = Rng::new(21);
    for (kernel, scale) in [(Kernel::gaussian(1.0).unwrap(), 2), (standard_kernels()[5].1.clone(), 1), (Kernel::dirac(), 4)] {
        let model = MeasurementModel::new(kernel, scale, 0.0).unwrap();
        let a = dense(&model, shape);
        let y = random(model.measurement_shape(shape).unwrap(), &mut rng);
        let v = random(shape, &mut rng);
        let gamma = 0.7;
        let lhs = DMatrix::identity(shape.len(), shape.len()) + a.transpose() * &a * gamma;
        let rhs = DVector::from_column_slice(v.as_slice()) + a.transpose() * DVector::from_column_slice(y.as_slice()) * gamma;
        let oracle = lhs.cholesky().expect("positive definite").solve(&rhs);
        for cfg in [ProxSolverConfig::default(), ProxSolverConfig::conjugate_gradient(1e-13, 1000)] {
            let got = prox_data(&model, &y, &v, gamma, &cfg).unwrap();
            let err = (DVector::from_column_slice(got.as_slice()) - &oracle).norm() / oracle.norm();
            assert!(err < 1e-10, "{cfg:?}: {err}");
        }
    }
}

#[test]
fn normal_operator_is_positive_semidefinite() {
    let shape = Shape::gray(8, 8);
    let model = MeasurementModel::new(standard_kernels()[7].1.clone(), 2, 0.0).unwrap();
    let a = dense(&model, shape);
    let eig = (a.transpose() * &a).symmetric_eigenvalues();
    assert!(eig.iter().all(|&l| l > -1e-12));
    // A blurring kernel that sums to one is non-expansive.
    assert!(eig.max() <= 1.0 + 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    let shape = Shape::gray(6, 6);
    let mut rng = Rng::new(4);
    let model = MeasurementModel::new(Kernel::gaussian(0.8).unwrap(), 2, 0.0).unwrap();
    let y = random(model.measurement_shape(shape).unwrap(), &mut rng);
    let x = random(shape, &mut rng);
    let g = grad_data_fidelity(&model, &y, &x).unwrap();
    for j in [0, 7, 20, 35] {
        let f = |t: f64| {
            let mut p = x.clone();
            p.as_mut_slice()[j] = t;
            data_fidelity(&model, &y, &p).unwrap()
        };
        let fd = common::central_difference(&f, x.as_slice()[j], 1e-5);
        assert!((g.as_slice()[j] - fd).abs() < 1e-7);
    }
}

#[test]
fn descent_prox_agrees_with_closed_form() {
    struct Plain(L2Fidelity);
    impl DataFidelity for Plain {
        fn signal_shape(&self) -> Shape {
            self.0.signal_shape()
        }
        fn value(&self, x: &ImageBuffer) -> pnp_admm::Result<f64> {
            self.0.value(x)
        }
        fn grad(&self, x: &ImageBuffer) -> pnp_admm::Result<ImageBuffer> {
            self.0.grad(x)
        }
    }
    let mut rng = Rng::new(8);
    let shape = Shape::gray(8, 8);
    let model = MeasurementModel::new(Kernel::gaussian(1.2).unwrap(), 2, 0.0).unwrap();
    let y = random(model.measurement_shape(shape).unwrap(), &mut rng);
    let fid = L2Fidelity::new(model, y, ProxSolverConfig::default());
    let v = random(shape, &mut rng);
    let exact = fid.prox(&v, 0.5).unwrap();
    let generic = Plain(fid).prox(&v, 0.5).unwrap();
    assert!(generic.distance(&exact) < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity(seed in any::<u64>(), k in 0usize..8, scale in prop::sample::select(vec![1usize, 2, 4]), h in 1usize..5, w in 1usize..5) {
        let shape = Shape::gray(4 * h, 4 * w);
        let mut rng = Rng::new(seed);
        let model = MeasurementModel::new(standard_kernels()[k].1.clone(), scale, 0.0).unwrap();
        let x = random(shape, &mut rng);
        let y = random(model.measurement_shape(shape).unwrap(), &mut rng);
        let lhs = model.forward(&x).unwrap().dot(&y);
        let rhs = x.dot(&model.adjoint(&y, shape).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * shape.len() as f64);
    }

    #[test]
    fn prox_is_firmly_nonexpansive(seed in any::<u64>(), gamma in 0.01f64..10.0, scale in prop::sample::select(vec![1usize, 2])) {
        let shape = Shape::gray(8, 8);
        let mut rng = Rng::new(seed);
        let model = MeasurementModel::new(Kernel::gaussian(1.2).unwrap(), scale, 0.0).unwrap();
        let y = random(model.measurement_shape(shape).unwrap(), &mut rng);
        let (a, b) = (random(shape, &mut rng), random(shape, &mut rng));
        let cfg = ProxSolverConfig::default();
        let pa = prox_data(&model, &y, &a, gamma, &cfg).unwrap();
        let pb = prox_data(&model, &y, &b, gamma, &cfg).unwrap();
        let d = pa.sub(&pb);
        prop_assert!(d.norm_sq() <= d.dot(&a.sub(&b)) + 1e-10);
    }
}

use fodkit::model::{
    build_r_matrix, fractional_anisotropy, single_tensor_fit, synthesize_signal, DiffusionTensor, FiberConfiguration,
    KernelParams, ResponseKernel,
};
use fodkit::sphere::{dense_grid, eval_sh_basis, geodesic_face_centers, sh_count, Direction, GradientTable, Hemisphere};
use nalgebra::{DVector, Matrix3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel(b: f64) -> KernelParams {
    KernelParams::new(1.7e-3, 3e-4, b, 1.0).unwrap()
}

/// Signal of a band-limited FOD by brute-force quadrature of the convolution
/// integral over the dense grid, against the SH-domain product Φ·R·f.
fn convolution_mismatch(l_max: usize, b: f64, seed: u64) -> f64 {
    let params = kernel(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<f64> = (0..sh_count(l_max)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gradients = geodesic_face_centers(3, Hemisphere::Upper).unwrap();

    let grid = dense_grid();
    let weights = grid.weights().unwrap();
    let fod_on_grid = eval_sh_basis(grid.directions(), l_max).unwrap().values() * DVector::from_column_slice(&f);
    let quadrature: Vec<f64> = gradients
        .directions()
        .iter()
        .map(|x| {
            grid.directions()
                .iter()
                .zip(weights)
                .zip(fod_on_grid.iter())
                .map(|((v, w), fv)| w * params.signal(x.dot(v)) * fv)
                .sum()
        })
        .collect();

    let r = build_r_matrix(&ResponseKernel::new(params, l_max).unwrap().r, l_max).unwrap();
    let rf: Vec<f64> = f.iter().zip(r.diag()).map(|(a, b)| a * b).collect();
    let product = eval_sh_basis(gradients.directions(), l_max).unwrap().values() * DVector::from_vec(rf);

    let scale = quadrature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    quadrature.iter().zip(product.iter()).fold(0.0f64, |m, (q, p)| m.max((q - p).abs())) / scale
}

#[test]
fn convolution_theorem_matches_quadrature() {
    for (l_max, b) in [(6, 1000.0), (8, 3000.0), (10, 3000.0)] {
        for seed in 0..3 {
            let rel = convolution_mismatch(l_max, b, seed);
            assert!(rel < 1e-3, "l_max {l_max}, b {b}: relative mismatch {rel}");
        }
    }
}

#[test]
fn point_mass_synthesis_equals_tensor_mixture() {
    let params = kernel(3000.0);
    let grid = geodesic_face_centers(2, Hemisphere::Upper).unwrap();
    let gradients = GradientTable::from_grid(&grid, 3000.0).unwrap();
    let d = Direction::normalize(0.3, -0.5, 0.8).unwrap();
    let fibers = FiberConfiguration::new(vec![Direction::Z, d], vec![0.4, 0.6]).unwrap();
    let signal = synthesize_signal(&fibers, &params, &gradients);
    // D = λ_minor·I + (λ_major − λ_minor)·ddᵀ for each fiber.
    let tensor = |u: Direction| {
        let v = nalgebra::Vector3::new(u.x(), u.y(), u.z());
        Matrix3::identity() * 3e-4 + v * v.transpose() * (1.7e-3 - 3e-4)
    };
    for (g, s) in gradients.directions().iter().zip(&signal) {
        let x = nalgebra::Vector3::new(g.x(), g.y(), g.z());
        let expected: f64 = [(Direction::Z, 0.4), (d, 0.6)]
            .iter()
            .map(|(u, w)| w * (-3000.0 * (x.transpose() * tensor(*u) * x)[(0, 0)]).exp())
            .sum();
        assert!((expected - s).abs() < 1e-14, "{expected} vs {s}");
    }
}

proptest! {
    #[test]
    fn fa_is_scale_invariant(a in 1e-4f64..3e-3, b in 1e-4f64..3e-3, c in 1e-4f64..3e-3, k in 0.01f64..100.0) {
        let t = DiffusionTensor::diagonal(a, b, c);
        let scaled = DiffusionTensor::new(t.matrix() * k);
        prop_assert!((fractional_anisotropy(&t) - fractional_anisotropy(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn synthesis_is_linear_in_weights(w in 0.05f64..0.95, theta in 0.1f64..1.5, k in 0.1f64..10.0) {
        let params = kernel(1000.0);
        let grid = geodesic_face_centers(2, Hemisphere::Upper).unwrap();
        let gradients = GradientTable::from_grid(&grid, 1000.0).unwrap();
        let d = Direction::from_spherical(theta, 0.4);
        let mixed = FiberConfiguration::new(vec![Direction::Z, d], vec![w, 1.0 - w]).unwrap();
        let a = synthesize_signal(&FiberConfiguration::new(vec![Direction::Z], vec![1.0]).unwrap(), &params, &gradients);
        let b = synthesize_signal(&FiberConfiguration::new(vec![d], vec![1.0]).unwrap(), &params, &gradients);
        let s = synthesize_signal(&mixed, &params, &gradients);
        for i in 0..s.len() {
            prop_assert!((s[i] - (w * a[i] + (1.0 - w) * b[i])).abs() < 1e-14);
        }
        let scaled = KernelParams { s0: k, ..params };
        let sk = synthesize_signal(&mixed, &scaled, &gradients);
        for i in 0..s.len() {
            prop_assert!((sk[i] - k * s[i]).abs() < 1e-12 * k.max(1.0));
        }
    }

    #[test]
    fn tensor_fit_round_trip(l1 in 1.2e-3f64..2.5e-3, l2 in 2e-4f64..8e-4, theta in 0.0f64..3.1, phi in 0.0f64..6.2) {
        let u = Direction::from_spherical(theta, phi);
        let v = nalgebra::Vector3::new(u.x(), u.y(), u.z());
        let d = Matrix3::identity() * l2 + v * v.transpose() * (l1 - l2);
        let grid = geodesic_face_centers(2, Hemisphere::Upper).unwrap();
        let gradients = GradientTable::from_grid(&grid, 1000.0).unwrap();
        let signal: Vec<f64> = gradients
            .directions()
            .iter()
            .map(|g| {
                let x = nalgebra::Vector3::new(g.x(), g.y(), g.z());
                (-1000.0 * (x.transpose() * d * x)[(0, 0)]).exp()
            })
            .collect();
        let fit = single_tensor_fit(&signal, 1.0, &gradients).unwrap();
        prop_assert!((fit.matrix() - d).amax() < 1e-10);
    }
}

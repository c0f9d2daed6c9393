use contact_core::eigen::jacobi_eigen;
use contact_core::sampling::{self, stream_rng};
use contact_core::spectrum::{max_sigma, max_sigma_minpm, max_sigma_signed, vee_spectrum};
use contact_core::tensor::{complement_projection, frame_expand, vee, vee_hess, Direction, GradMatrix};
use contact_core::vecops::{self, dot, norm};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vee_contraction_identities(seed in any::<u64>(), big in 1usize..6) {
        let mut rng = stream_rng(seed, 1);
        let a = sampling::normal_vec(&mut rng, big);
        let b = sampling::normal_vec(&mut rng, big);
        let x = sampling::gaussian_sym(&mut rng, big);
        let ab = vee(&a, &b).unwrap();
        let via_vee = ab.frob_dot(&x);
        let outer = GradMatrix::outer(&a, &b);
        let via_outer: f64 = (0..big).flat_map(|i| (0..big).map(move |j| (i, j))).map(|(i, j)| x.get(i, j) * outer.get(i, j)).sum();
        let bilinear = x.bilinear(&a, &b);
        prop_assert!(rel(via_vee, bilinear) < 1e-12);
        prop_assert!(rel(via_outer, bilinear) < 1e-12);
    }

    #[test]
    fn product_norms(seed in any::<u64>(), big in 1usize..6) {
        let mut rng = stream_rng(seed, 2);
        let a = sampling::normal_vec(&mut rng, big);
        let b = sampling::normal_vec(&mut rng, big);
        let (na, nb, ab) = (dot(&a, &a), dot(&b, &b), dot(&a, &b));
        prop_assert!(rel(GradMatrix::outer(&a, &b).norm().powi(2), na * nb) < 1e-12);
        prop_assert!(rel(vee(&a, &b).unwrap().frob_norm().powi(2), 0.5 * (na * nb + ab * ab)) < 1e-12);
    }

    #[test]
    fn vee_hess_is_pair_symmetric(seed in any::<u64>(), big in 1usize..4, small in 1usize..4) {
        let mut rng = stream_rng(seed, 3);
        let xi = sampling::direction(&mut rng, big);
        let x = sampling::gaussian_hess(&mut rng, big, small);
        let f = vee_hess(&xi, &x).unwrap();
        for a in 0..big { for i in 0..small { for b in 0..big { for j in 0..small {
            prop_assert_eq!(f.get(a, i, b, j), f.get(b, j, a, i));
        }}}}
    }

    #[test]
    fn vee_spectrum_eigen_equation(seed in any::<u64>(), big in 1usize..6, scale in -6i32..6) {
        let mut rng = stream_rng(seed, 4);
        let xi = sampling::direction(&mut rng, big);
        let r = vecops::scale(&sampling::normal_vec(&mut rng, big), 10f64.powi(scale));
        let vs = vee_spectrum(&xi, &r).unwrap();
        let m = vee(xi.as_slice(), &r).unwrap();
        for (l, e) in vs.spectrum.eigenvalues.iter().zip(&vs.spectrum.eigenvectors) {
            let res = vecops::axpy(&m.mul_vec(e), -l, e);
            prop_assert!(norm(&res) < 1e-10 * norm(&r).max(1.0));
            prop_assert!((norm(e) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_expansion_reconstructs(seed in any::<u64>(), big in 2usize..6) {
        let mut rng = stream_rng(seed, 5);
        let xi = sampling::direction(&mut rng, big);
        let eta = sampling::direction(&mut rng, big);
        prop_assume!(1.0 - xi.along(eta.as_slice()).abs() > 1e-6);
        let pi = complement_projection(&xi, &eta).unwrap();
        let a = sampling::normal_vec(&mut rng, big);
        let (l, m, rest) = frame_expand(&a, &xi, &eta, &pi).unwrap();
        let rebuilt = vecops::add(&vecops::axpy(&vecops::scale(xi.as_slice(), l), m, eta.as_slice()), &rest);
        prop_assert!(norm(&vecops::sub(&rebuilt, &a)) < 1e-9 * norm(&a).max(1.0));
    }

    #[test]
    fn jacobi_matches_nalgebra(seed in any::<u64>(), d in 1usize..8) {
        let mut rng = stream_rng(seed, 6);
        let a = sampling::gaussian_sym(&mut rng, d);
        let ours = jacobi_eigen(&a);
        let m = nalgebra::DMatrix::from_fn(d, d, |i, j| a.get(i, j));
        let mut theirs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (x, y) in ours.eigenvalues.iter().zip(&theirs) {
            prop_assert!((x - y).abs() < 1e-10 * a.frob_norm().max(1.0));
        }
        for (l, v) in ours.eigenvalues.iter().zip(&ours.eigenvectors) {
            prop_assert!(norm(&vecops::axpy(&a.mul_vec(v), -l, v)) < 1e-10 * a.frob_norm().max(1.0));
        }
    }
}

#[test]
fn max_sigma_representations_agree_on_ten_thousand_inputs() {
    let mut rng = stream_rng(7, 7);
    for k in 0..10_000 {
        let big = 2 + k % 4;
        let xi = sampling::direction(&mut rng, big);
        let mut r = sampling::normal_vec(&mut rng, big);
        // include inputs aligned with ±ξ and tiny ones
        match k % 10 {
            0 => r = vecops::scale(xi.as_slice(), r[0]),
            1 => r = vecops::scale(&r, 1e-9),
            _ => {}
        }
        let a = max_sigma(&xi, &r);
        let tol = 1e-12 * norm(&r).max(1.0);
        assert!((a - max_sigma_signed(&xi, &r)).abs() <= tol, "signed form at sample {k}");
        assert!((a - max_sigma_minpm(&xi, &r)).abs() <= tol, "min-over-sign form at sample {k}");
        let top = vee(xi.as_slice(), &r).unwrap().max_eig();
        assert!((a - top.max(0.0)).abs() <= 1e-10 * norm(&r).max(1.0), "eigenvalue solver at sample {k}");
    }
}

#[test]
fn degenerate_frame_is_rejected() {
    let xi = Direction::basis(3, 0);
    assert!(complement_projection(&xi, &xi.neg()).is_err());
}

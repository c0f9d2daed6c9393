use std::sync::Arc;

use contact_core::ellipticity::{
    check_ellipticity_sampled, check_quasilinear, constant_h, convert, eigen_nonlinearity, replay, verify_contact_solution,
    ArgumentSampler, EigenFunction, EllipticityOptions, EllipticityVerdict, FnNonlinearity, Nonlinearity, SolutionOptions,
};
use contact_core::fixtures::{self, SmoothScalar};
use contact_core::jets::RadiiSchedule;
use contact_core::orderings::{min_rank_one_value, CertifierOptions, RankOneVerdict};
use contact_core::sampling::{self, stream_rng};
use contact_core::tensor::{BiForm, GradMatrix, HessTensor, SymMatrix};
use contact_core::vecops;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// G_α(𝐗) = ∂_αΦ(s) with s_β = tr(C X_β), Φ(s) = ½sᵀQs + Σ_k log cosh(a_kᵀs).
///
/// With C ⪰ 0 and Q ⪰ 0 this is the gradient of a convex function of the
/// traces, so η·(G(𝐘 + η⊗M) − G(𝐘)) ≥ 0 for every M ⪰ 0.
fn trace_gradient_map(big: usize, small: usize, c: SymMatrix, q: SymMatrix, a: Vec<Vec<f64>>) -> FnNonlinearity {
    FnNonlinearity::new(big, small, move |_, _, _, hx| {
        let s: Vec<f64> = (0..big).map(|b| c.frob_dot(&hx.component(b))).collect();
        let mut g = q.mul_vec(&s);
        for ak in &a {
            g = vecops::axpy(&g, vecops::dot(ak, &s).tanh(), ak);
        }
        g
    })
}

fn monotone_g(rng: &mut ChaCha8Rng, big: usize, small: usize) -> FnNonlinearity {
    let c = sampling::psd_matrix(rng, small, 1.0);
    let q = sampling::psd_matrix(rng, big, 1.0);
    let a = (0..2).map(|_| sampling::normal_vec(rng, big)).collect();
    trace_gradient_map(big, small, c, q, a)
}

fn non_monotone_g(rng: &mut ChaCha8Rng, big: usize, small: usize) -> FnNonlinearity {
    let c = sampling::psd_matrix(rng, small, 1.0).add(&SymMatrix::identity(small).scale(0.2));
    // Q with a clearly negative direction
    let v = sampling::unit_vec(rng, big);
    let q = sampling::psd_matrix(rng, big, 0.5).sub(&SymMatrix::outer_self(&v).scale(2.0));
    trace_gradient_map(big, small, c, q, vec![])
}

#[test]
fn direct_and_directional_routes_agree() {
    let mut rng = stream_rng(41, 1);
    let opts = EllipticityOptions { budget: 512, ..Default::default() };
    for k in 0..200 {
        let (big, small) = (1 + k % 3, 1 + (k / 3) % 3);
        let g = monotone_g(&mut rng, big, small);
        let r = check_ellipticity_sampled(&g, &ArgumentSampler::standard(small), &opts).unwrap();
        assert_eq!(r.verdict, EllipticityVerdict::CertifiedSampled, "monotone sample {k}: {:?}", r.counterexample);
        assert!(r.routes.iter().all(|s| s.violations == 0 && s.samples > 0));
    }
    let mut found = 0;
    for k in 0..200 {
        let (big, small) = (1 + k % 3, 1 + (k / 3) % 3);
        let g = non_monotone_g(&mut rng, big, small);
        let r = check_ellipticity_sampled(&g, &ArgumentSampler::standard(small), &opts).unwrap();
        if let Some(ce) = &r.counterexample {
            found += 1;
            assert!(replay(&g, ce) > 0.0, "sample {k}: witness does not replay");
            let other = convert(&g, ce).expect("convertible witness");
            assert_ne!(other.route, ce.route);
            assert!(other.value > 0.0, "sample {k}: converted witness holds");
            assert_eq!(r.conversion_confirmed, Some(true));
        }
    }
    assert_eq!(found, 200, "only {found} non-monotone maps were caught");
}

fn positive_form(rng: &mut ChaCha8Rng, big: usize, small: usize) -> BiForm {
    let d = big * small;
    let g: Vec<Vec<f64>> = (0..d).map(|_| sampling::normal_vec(rng, d)).collect();
    BiForm::from_fn(big, small, |a, i, b, j| (0..d).map(|k| g[a * small + i][k] * g[b * small + j][k]).sum())
}

#[test]
fn quasilinear_routes_agree_on_random_forms() {
    let mut rng = stream_rng(42, 1);
    let (mut violated, mut certified) = (0, 0);
    for k in 0..500 {
        let (big, small) = (1 + k % 3, 1 + (k / 3) % 3);
        let a = match k % 4 {
            0 => {
                let m = sampling::gaussian_sym(&mut rng, big * small);
                BiForm::from_fn(big, small, |a, i, b, j| m.get(a * small + i, b * small + j))
            }
            1 => positive_form(&mut rng, big, small),
            2 if big == 2 && small == 2 => {
                let c = 3.0 * rng.random::<f64>();
                positive_form(&mut rng, 2, 2).scale(0.1).add(&BiForm::determinant_form().scale(c))
            }
            _ => positive_form(&mut rng, big, small).scale(-1.0).add(&positive_form(&mut rng, big, small).scale(0.5)),
        };
        let rep = check_quasilinear(&a, k as u64).unwrap_or_else(|e| panic!("sample {k}: {e}"));
        match rep.verdict {
            EllipticityVerdict::Violated => violated += 1,
            _ => certified += 1,
        }
        // positivity is sufficient, never necessary
        if rep.is_positive {
            assert_eq!(rep.verdict, EllipticityVerdict::CertifiedSampled, "sample {k}");
        }
    }
    assert!(violated > 50 && certified > 50, "{violated} violated, {certified} certified");
}

#[test]
fn eigenvalue_systems_respect_directional_order() {
    let mut rng = stream_rng(43, 1);
    for small in [2usize, 3] {
        let builtins = [
            EigenFunction::max_eig(),
            EigenFunction::min_eig_power(1),
            EigenFunction::determinant(small),
            EigenFunction::laplacian_power(1),
        ];
        for g in builtins {
            let psd_only = g.name == "det";
            let big = 2;
            let f = eigen_nonlinearity(small, vec![g.clone(), g.clone()], constant_h(vec![0.3, -0.2])).unwrap();
            let mut checked = 0;
            while checked < 100 {
                let xi = sampling::direction(&mut rng, big);
                let hx = if psd_only {
                    let comps: Vec<SymMatrix> = (0..big).map(|_| sampling::psd_matrix(&mut rng, small, 3.0)).collect();
                    HessTensor::from_components(&comps).unwrap()
                } else {
                    sampling::gaussian_hess(&mut rng, big, small)
                };
                // 𝐘 = 𝐗 + ξ⊗M with M ⪰ 0, so ξ∨(𝐗 − 𝐘) ≤ 0
                let m = sampling::psd_matrix(&mut rng, small, sampling::PSD_SIZES[1 + checked % 3]);
                let hy = hx.add(&HessTensor::outer(xi.as_slice(), &m));
                if psd_only && (0..big).any(|a| hy.component(a).min_eig() < -1e-10) {
                    continue;
                }
                checked += 1;
                let p = GradMatrix::zeros(big, small);
                let fx = f.eval(&vec![0.0; small], &[0.0; 2], &p, &hx);
                let fy = f.eval(&vec![0.0; small], &[0.0; 2], &p, &hy);
                let scale = (vecops::norm(&fx) + vecops::norm(&fy)).max(1.0);
                assert!(xi.along(&vecops::sub(&fx, &fy)) <= 1e-9 * scale, "{} n={small}", g.name);
            }
        }
    }
}

type ScalarOp = Arc<dyn Fn(&[f64], f64, &[f64], &SymMatrix) -> f64 + Send + Sync>;

/// Twenty scalar operators F(x, η, p, X), tagged with whether they are nondecreasing in X.
fn scalar_operators() -> Vec<(&'static str, ScalarOp, bool)> {
    fn op(f: impl Fn(&[f64], f64, &[f64], &SymMatrix) -> f64 + Send + Sync + 'static) -> ScalarOp {
        Arc::new(f)
    }
    let a_psd = SymMatrix::new(2, vec![2.0, 1.0, 1.0, 1.0]).unwrap();
    let a_ind = SymMatrix::new(2, vec![1.0, 0.0, 0.0, -0.5]).unwrap();
    let pucci = |x: &SymMatrix, lo: f64, hi: f64| {
        x.eigen().eigenvalues.iter().map(|&l| if l > 0.0 { hi * l } else { lo * l }).sum::<f64>()
    };
    vec![
        ("trace", op(|_, _, _, x| x.trace()), true),
        ("neg_trace", op(|_, _, _, x| -x.trace()), false),
        ("max_eig", op(|_, _, _, x| x.max_eig()), true),
        ("min_eig", op(|_, _, _, x| x.min_eig()), true),
        ("neg_min_eig", op(|_, _, _, x| -x.min_eig()), false),
        ("eig_spread", op(|_, _, _, x| x.max_eig() - x.min_eig()), false),
        ("entry_11", op(|_, _, _, x| x.get(0, 0)), true),
        ("neg_entry_12", op(|_, _, _, x| -x.get(0, 1)), false),
        ("weighted_psd", op(move |_, _, _, x| a_psd.frob_dot(x)), true),
        ("weighted_indefinite", op(move |_, _, _, x| a_ind.frob_dot(x)), false),
        ("arctan_trace", op(|_, _, _, x| x.trace().atan()), true),
        ("exp_max_eig", op(|_, _, _, x| x.max_eig().exp()), true),
        ("gradient_weighted", op(|_, _, p, x| vecops::norm(p) * x.trace()), true),
        ("position_weighted", op(|y, _, _, x| y[0] * x.trace()), false),
        ("value_weighted", op(|_, e, _, x| e * x.trace()), false),
        ("sine_trace", op(|_, _, _, x| x.trace().sin()), false),
        ("trace_plus_lower", op(|y, e, p, x| x.trace() + y[0].sin() - e * e + vecops::norm(p)), true),
        ("pucci_max", op(move |_, _, _, x| pucci(x, 0.5, 2.0)), true),
        ("pucci_min", op(move |_, _, _, x| pucci(x, 2.0, 0.5)), true),
        ("cubic_trace_minus", op(|_, _, _, x| x.trace() - 0.1 * x.trace().powi(3)), false),
    ]
}

/// F(X + M) ≥ F(X) for sampled M ⪰ 0.
fn classically_monotone(f: &ScalarOp, rng: &mut ChaCha8Rng) -> bool {
    for _ in 0..2000 {
        let y: Vec<f64> = (0..2).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let e: f64 = sampling::normal_vec(rng, 1)[0];
        let p = sampling::normal_vec(rng, 2);
        let x = sampling::gaussian_sym(rng, 2);
        let size = sampling::PSD_SIZES[1 + rng.random_range(0..3)];
        let m = sampling::psd_matrix(rng, 2, size);
        let (a, b) = (f(&y, e, &p, &x.add(&m)), f(&y, e, &p, &x));
        if a - b < -1e-9 * a.abs().max(b.abs()).max(1.0) {
            return false;
        }
    }
    true
}

#[test]
fn scalar_ellipticity_is_classical_monotonicity() {
    let mut rng = stream_rng(44, 1);
    let ops = scalar_operators();
    assert_eq!(ops.len(), 20);
    for (name, f, expected) in ops {
        let classical = classically_monotone(&f, &mut rng);
        assert_eq!(classical, expected, "{name}: reference test");
        let g = f.clone();
        let nl = FnNonlinearity::new(1, 2, move |x, eta, p, hx| vec![g(x, eta[0], &p.row(0), &hx.component(0))]);
        let r = check_ellipticity_sampled(&nl, &ArgumentSampler::standard(2), &EllipticityOptions { budget: 2000, ..Default::default() })
            .unwrap();
        assert_eq!(r.verdict == EllipticityVerdict::CertifiedSampled, classical, "{name}: {:?}", r.verdict);
    }
}

#[test]
fn scalar_verifier_matches_viscosity_inequalities() {
    // u is smooth, so the superjets at x are (Du, D²u + A) and the subjets (Du, D²u − A), A ⪰ 0
    let u = fixtures::smooth_map(2, vec![SmoothScalar::quadratic(0.0, vec![0.5, 0.0], SymMatrix::diag(&[1.0, 3.0]))
        .sum(SmoothScalar::sine(vec![1.0, 1.0], 0.0))]);
    let points: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![-0.5, 0.4]];
    let s = RadiiSchedule::for_dim(2);
    let opts = SolutionOptions { random_directions: 0, ..Default::default() };
    let mut rng = stream_rng(45, 1);
    let psd: Vec<SymMatrix> = std::iter::once(SymMatrix::zeros(2))
        .chain(sampling::PSD_SIZES[1..].iter().flat_map(|&z| (0..4).map(move |_| z)).map(|z| sampling::psd_matrix(&mut rng, 2, z)))
        .collect();
    let mut outcomes = (0, 0);
    for (name, f, _) in scalar_operators().into_iter().filter(|o| o.2) {
        for shift in [-1.0, 0.0, 1.0, 8.0] {
            let g = f.clone();
            let nl = FnNonlinearity::new(1, 2, move |x, eta, p, hx| vec![g(x, eta[0], &p.row(0), &hx.component(0)) - shift]);
            // the contact inequality at ξ = +1 on superjets and at ξ = −1 on subjets
            let mut sub = true;
            let mut sup = true;
            for x in &points {
                let (v, p, h) = (u.eval(x)[0], u.grad(x).unwrap().row(0).to_vec(), u.hess(x).unwrap().component(0));
                for a in &psd {
                    sub &= f(x, v, &p, &h.add(a)) - shift >= -1e-8;
                    sup &= f(x, v, &p, &h.sub(a)) - shift <= 1e-8;
                }
            }
            let rep = verify_contact_solution(u.as_ref(), &nl, &points, None, &s, &opts).unwrap();
            assert_eq!(rep.consistent, sub && sup, "{name} shift {shift}");
            if rep.consistent {
                outcomes.0 += 1;
            } else {
                outcomes.1 += 1;
            }
        }
    }
    assert!(outcomes.1 > 0);
}

#[test]
fn rank_one_certifier_matches_quasilinear_verdict() {
    let mut rng = stream_rng(46, 1);
    for k in 0..50 {
        let c = 4.0 * rng.random::<f64>() - 2.0;
        let a = positive_form(&mut rng, 2, 2).scale(0.05).add(&BiForm::determinant_form().scale(c));
        let rep = check_quasilinear(&a, k).unwrap();
        let cert = min_rank_one_value(&a, &CertifierOptions::default()).unwrap();
        assert_eq!(rep.verdict == EllipticityVerdict::Violated, cert.verdict == RankOneVerdict::Indefinite);
    }
}

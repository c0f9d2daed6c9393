use std::sync::Arc;

use contact_core::fit::loglog_slope;
use contact_core::fixtures::{self, Kink, SmoothScalar};
use contact_core::jets::{
    classical_superjet, jet_enumerate_smooth, perp_modify, remainder, test_membership, test_structural, theorem31_forms,
    theorem31_forms_of,
    JetCandidate, JetStatus, RadiiSchedule,
};
use contact_core::maps::{fd_grad, FnMap, MapHandle};
use contact_core::orderings::{vee_nonpos_hess, CertifierOptions};
use contact_core::sampling::{self, stream_rng};
use contact_core::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use contact_core::vecops::{self, norm};

fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> MapHandle {
    FnMap::new(1, 1, move |x| vec![f(x[0])]).handle()
}

/// Twenty scalar fixtures with a point and a list of (p, X) candidates.
fn scalar_cases() -> Vec<(String, MapHandle, Vec<f64>, Vec<(Vec<f64>, SymMatrix)>)> {
    let one = |v: f64| SymMatrix::diag(&[v]);
    let mut out: Vec<(String, MapHandle, Vec<f64>, Vec<(Vec<f64>, SymMatrix)>)> = Vec::new();
    let line = |name: &str, m: MapHandle, cands: Vec<(f64, f64)>| {
        (name.to_string(), m, vec![0.0], cands.into_iter().map(|(p, x)| (vec![p], one(x))).collect::<Vec<_>>())
    };
    out.push(line("abs", scalar(f64::abs), vec![(0.0, 0.0), (0.5, 3.0), (1.2, 0.0)]));
    out.push(line("neg_abs", scalar(|z| -z.abs()), vec![(0.0, 0.0), (0.9, -5.0), (1.0, -1.0), (1.1, 0.0)]));
    out.push(line("square", scalar(|z| z * z), vec![(0.0, 2.0), (0.0, 1.5), (0.0, 3.0), (0.1, 2.0)]));
    out.push(line("neg_square", scalar(|z| -z * z), vec![(0.0, -2.0), (0.0, -3.0), (0.0, 0.0)]));
    out.push(line("cube", scalar(|z| z * z * z), vec![(0.0, 0.0), (0.0, -0.1)]));
    out.push(line("sine", scalar(f64::sin), vec![(1.0, 0.0), (1.0, -0.01), (0.99, 0.0)]));
    out.push(line("cos", scalar(f64::cos), vec![(0.0, -1.0), (0.0, -1.1), (0.0, -0.5)]));
    out.push(line("exp", scalar(f64::exp), vec![(1.0, 1.0), (1.0, 0.9), (1.0, 2.0)]));
    out.push(line("neg_sqrt_abs", scalar(|z| -z.abs().sqrt()), vec![(0.0, 0.0), (5.0, -100.0)]));
    out.push(line("sqrt_abs", scalar(|z| z.abs().sqrt()), vec![(0.0, 0.0), (0.0, 1e3)]));
    out.push(line("holder", scalar(|z| -z.abs().powf(1.5)), vec![(0.0, 0.0), (0.0, -1.0)]));
    out.push(line("quartic", scalar(|z| z.powi(4)), vec![(0.0, 0.0), (0.0, -0.1)]));
    out.push(line("min_pair", scalar(|z: f64| z.min(-z).min(0.5 * z)), vec![(0.0, 0.0), (-0.2, 0.0), (0.3, 0.0)]));
    out.push(line("max_pair", scalar(|z: f64| z.max(0.0)), vec![(0.5, 0.0), (1.0, 0.0), (0.0, 1.0)]));
    out.push(line("oscillating", scalar(|z| if z == 0.0 { 0.0 } else { z * z * (1.0 / z).sin() }), vec![(0.0, 0.0), (0.0, 3.0)]));
    out.push(line("log_cosh", scalar(|z: f64| z.cosh().ln()), vec![(0.0, 1.0), (0.0, 0.8)]));
    let sq2 = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1]];
    out.push((
        "saddle".into(),
        FnMap::new(2, 1, sq2).handle(),
        vec![0.0, 0.0],
        vec![
            (vec![0.0, 0.0], SymMatrix::diag(&[2.0, -2.0])),
            (vec![0.0, 0.0], SymMatrix::diag(&[2.0, -1.0])),
            (vec![0.0, 0.0], SymMatrix::diag(&[1.0, -2.0])),
        ],
    ));
    out.push((
        "cone".into(),
        FnMap::new(2, 1, |x| vec![-norm(x)]).handle(),
        vec![0.0, 0.0],
        vec![(vec![0.0, 0.0], SymMatrix::zeros(2)), (vec![0.5, 0.0], SymMatrix::zeros(2)), (vec![2.0, 0.0], SymMatrix::zeros(2))],
    ));
    out.push((
        "bowl".into(),
        FnMap::new(2, 1, |x| vec![vecops::dot(x, x)]).handle(),
        vec![0.3, -0.2],
        vec![
            (vec![0.6, -0.4], SymMatrix::identity(2).scale(2.0)),
            (vec![0.6, -0.4], SymMatrix::identity(2)),
            (vec![0.6, -0.4], SymMatrix::identity(2).scale(2.5)),
        ],
    ));
    out.push((
        "wedge".into(),
        FnMap::new(2, 1, |x| vec![x[0].abs().min(x[1].abs())]).handle(),
        vec![0.0, 0.0],
        vec![(vec![0.0, 0.0], SymMatrix::zeros(2)), (vec![0.0, 0.0], SymMatrix::identity(2))],
    ));
    out
}

#[test]
fn scalar_reduction_matches_classical_semijets() {
    let cases = scalar_cases();
    assert_eq!(cases.len(), 20);
    for (name, u, x, cands) in cases {
        let s = RadiiSchedule::for_dim(x.len());
        for (p, hx) in cands {
            let classical = classical_superjet(u.as_ref(), &x, &p, &hx, &s).unwrap();
            let c = JetCandidate::second(
                x.clone(),
                Direction::basis(1, 0),
                GradMatrix::new(1, x.len(), p.clone()).unwrap(),
                HessTensor::from_components(std::slice::from_ref(&hx)).unwrap(),
            )
            .unwrap();
            let ours = test_membership(u.as_ref(), &c, &s).unwrap();
            assert_eq!(ours.status, classical.status, "{name} p={p:?} X={hx:?}");
        }
    }
}

fn battery_points() -> Vec<(String, MapHandle, Vec<f64>)> {
    fixtures::smooth_battery()
        .into_iter()
        .map(|(name, m)| {
            let x = (0..m.input_dim()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
            (name, m, x)
        })
        .collect()
}

#[test]
fn gradient_is_forced_by_both_signs() {
    let mut rng = stream_rng(21, 1);
    for (name, u, x) in battery_points() {
        let s = RadiiSchedule::for_dim(x.len());
        let du = u.grad(&x).unwrap();
        let xi = sampling::direction(&mut rng, u.output_dim());
        let mut tried = vec![du.clone()];
        for size in [1e-2, 1e-1, 1.0] {
            tried.push(du.add(&sampling::gaussian_matrix(&mut rng, du.big(), du.small()).scale(size)));
        }
        for p in tried {
            let plus = JetCandidate::first(x.clone(), xi.clone(), p.clone()).unwrap();
            let minus = plus.with_direction(xi.neg());
            let both = test_membership(u.as_ref(), &plus, &s).unwrap().member && test_membership(u.as_ref(), &minus, &s).unwrap().member;
            if both {
                let fd = fd_grad(u.as_ref(), &x, 1e-6);
                assert!(p.sub(&fd).norm() < 1e-6, "{name}: {}", p.sub(&fd).norm());
            }
        }
        let c = JetCandidate::first(x.clone(), xi.clone(), du).unwrap();
        assert!(test_membership(u.as_ref(), &c, &s).unwrap().member, "{name}: gradient rejected");
    }
}

#[test]
fn two_sided_hessian_inequality() {
    let mut rng = stream_rng(22, 1);
    for (name, u, x) in battery_points() {
        let s = RadiiSchedule::for_dim(x.len());
        let n = x.len();
        let xi = sampling::direction(&mut rng, u.output_dim());
        let up = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap().candidate(&sampling::psd_matrix(&mut rng, n, 1.0)).unwrap();
        let down = jet_enumerate_smooth(u.as_ref(), &x, &xi.neg()).unwrap().candidate(&sampling::psd_matrix(&mut rng, n, 1.0)).unwrap();
        assert!(test_membership(u.as_ref(), &up, &s).unwrap().member, "{name}: upper");
        assert!(test_membership(u.as_ref(), &down, &s).unwrap().member, "{name}: lower");
        let diff = down.x.clone().unwrap().sub(up.x.as_ref().unwrap());
        assert!(vee_nonpos_hess(&xi, &diff, &CertifierOptions::default()).unwrap().holds, "{name}");
    }
}

#[test]
fn members_form_convex_sets_closed_under_rays() {
    let mut rng = stream_rng(23, 1);
    for (name, u, x) in battery_points() {
        let s = RadiiSchedule::for_dim(x.len());
        let n = x.len();
        let xi = sampling::direction(&mut rng, u.output_dim());
        let fam = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap();
        let a = fam.candidate(&sampling::psd_matrix(&mut rng, n, 1.0)).unwrap();
        let b = fam.candidate(&sampling::psd_matrix(&mut rng, n, 10.0)).unwrap();
        for t in [0.0, 0.25, 0.5, 0.9] {
            let mix = a.x.as_ref().unwrap().scale(1.0 - t).add(&b.x.as_ref().unwrap().scale(t));
            let c = JetCandidate::second(x.clone(), xi.clone(), fam.gradient.clone(), mix).unwrap();
            assert!(test_membership(u.as_ref(), &c, &s).unwrap().member, "{name}: mix {t}");
        }
        let ray = a.x.as_ref().unwrap().add(&HessTensor::outer(xi.as_slice(), &sampling::psd_matrix(&mut rng, n, 3.0)));
        let c = JetCandidate::second(x.clone(), xi.clone(), fam.gradient.clone(), ray).unwrap();
        assert!(test_membership(u.as_ref(), &c, &s).unwrap().member, "{name}: ray");
    }
    // first order on the kink: convex combinations of the interval endpoints
    let k = Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, -0.2]);
    let xi = k.jet_direction();
    let s = RadiiSchedule::for_dim(1);
    for t in [-1.0, -0.3, 0.0, 0.6, 1.0] {
        let c = JetCandidate::first(vec![0.0], xi.clone(), k.gradient(t)).unwrap();
        assert!(test_membership(k.map().as_ref(), &c, &s).unwrap().member, "kink t={t}");
    }
}

fn kink_fixtures() -> Vec<Kink> {
    vec![
        Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]),
        Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, -1.0]),
        Kink::new(vec![2.0, 1.0], vec![-0.5, 1.0], vec![1.0, 1.0]),
        Kink::new(vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 2.0]),
    ]
}

/// Candidates paired with their maps: members and non-members of both orders.
fn equivalence_cases() -> Vec<(String, MapHandle, JetCandidate)> {
    let mut out = Vec::new();
    let mut rng = stream_rng(24, 1);
    for (name, u, x) in battery_points() {
        let xi = sampling::direction(&mut rng, u.output_dim());
        let fam = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap();
        out.push((format!("{name}/classical"), u.clone(), fam.classical()));
        let bad = fam.classical().x.unwrap().sub(&HessTensor::outer(xi.as_slice(), &SymMatrix::identity(x.len())));
        out.push((format!("{name}/below"), u.clone(), JetCandidate::second(x.clone(), xi.clone(), fam.gradient.clone(), bad).unwrap()));
        let off = fam.gradient.add(&sampling::gaussian_matrix(&mut rng, fam.gradient.big(), x.len()).scale(0.3));
        out.push((format!("{name}/tilted"), u.clone(), JetCandidate::first(x.clone(), xi.clone(), off).unwrap()));
    }
    for (i, k) in kink_fixtures().into_iter().enumerate() {
        let xi = k.jet_direction();
        for t in [-1.5, -1.0, 0.0, 0.5, 1.0, 2.0] {
            out.push((format!("kink{i}/t{t}"), k.map(), JetCandidate::first(vec![0.0], xi.clone(), k.gradient(t)).unwrap()));
        }
        let sum = vecops::add(&k.a, &k.b);
        let on_stratum = k.hessian(&vecops::sub(&k.c, &sum));
        let off_stratum = k.hessian(&vecops::add(&k.c, &sum));
        out.push((format!("kink{i}/second"), k.map(), JetCandidate::second(vec![0.0], xi.clone(), k.gradient(1.0), on_stratum).unwrap()));
        out.push((format!("kink{i}/second_off"), k.map(), JetCandidate::second(vec![0.0], xi.clone(), k.gradient(1.0), off_stratum).unwrap()));
    }
    let holder = fixtures::holder_well(0.5);
    let e1 = Direction::basis(2, 0);
    out.push(("holder/first".into(), holder.clone(), JetCandidate::first(vec![0.0], e1.clone(), GradMatrix::zeros(2, 1)).unwrap()));
    out.push((
        "holder/second".into(),
        holder.clone(),
        JetCandidate::second(vec![0.0], e1.clone(), GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![0.0, 2.0]).unwrap()).unwrap(),
    ));
    out.push((
        "holder/second_off_axis".into(),
        holder,
        JetCandidate::second(vec![0.0], Direction::normalized(&[1.0, 1.0]).unwrap(), GradMatrix::zeros(2, 1), HessTensor::zeros(2, 1)).unwrap(),
    ));
    out
}

#[test]
fn membership_and_structural_tests_agree() {
    for (name, u, c) in equivalence_cases() {
        let s = RadiiSchedule::for_dim(c.small());
        let a = test_membership(u.as_ref(), &c, &s).unwrap();
        let b = test_structural(u.as_ref(), &c, &s).unwrap();
        assert_eq!(a.member, b.member, "{name}: {:?} vs {:?}", a.status, b.status);
    }
}

#[test]
fn four_decay_forms_are_unanimous() {
    for (name, u, c) in equivalence_cases() {
        let s = RadiiSchedule::for_dim(c.small());
        let forms = theorem31_forms_of(u.as_ref(), &c, &s).unwrap();
        assert!(forms.unanimous(), "{name}: {:?}", forms.holds());
        // as a black box the remainder of an exact jet is bare rounding, so only compare the rest
        if !name.ends_with("/classical") {
            let (uu, cc) = (u.clone(), c.clone());
            let rmap = FnMap::new(c.small(), c.big(), move |z| remainder(uu.as_ref(), &cc, z).unwrap()).handle();
            let boxed = theorem31_forms(&rmap, &c.direction, c.order, &s).unwrap();
            assert_eq!(boxed.holds(), forms.holds(), "{name}: black-box remainder");
        }
        let direct = test_membership(u.as_ref(), &c, &s).unwrap();
        assert_eq!(forms.holds()[0], direct.member, "{name}");
    }
}

#[test]
fn codimension_one_bootstrap_on_kinks() {
    let s = RadiiSchedule::for_dim(1);
    for (i, k) in kink_fixtures().into_iter().enumerate() {
        let xi = k.jet_direction();
        let u = k.map();
        for t in [-1.0, -0.5, 0.0, 0.7, 1.0] {
            let c = JetCandidate::first(vec![0.0], xi.clone(), k.gradient(t)).unwrap();
            if !test_membership(u.as_ref(), &c, &s).unwrap().member {
                continue;
            }
            let mut along = Vec::new();
            let mut perp = Vec::new();
            for r in s.radii() {
                let (mut a, mut p) = (0.0f64, 0.0f64);
                for z in [r, -r] {
                    let l = remainder(u.as_ref(), &c, &[z]).unwrap();
                    a = a.max(xi.along(&l).abs());
                    p = p.max(norm(&xi.perp(&l)));
                }
                along.push((r, a));
                perp.push((r, p));
            }
            let beta = loglog_slope(&along).expect("ξ-part is nonzero");
            // a vanishing perpendicular part decays faster than any power
            if let Some(gamma) = loglog_slope(&perp).filter(|_| perp.iter().any(|p| p.1 > 1e-14)) {
                assert!(gamma > (1.0 + beta) / 2.0 - 0.1, "kink{i} t={t}: {gamma} vs β={beta}");
            }
        }
    }
}

#[test]
fn perp_modification_requires_its_hypothesis() {
    let u: MapHandle = Arc::new(FnMap::new(1, 2, |x| vec![x[0] * x[0], 0.0]));
    let xi = Direction::basis(2, 0);
    let eta = Direction::basis(2, 1);
    let s = RadiiSchedule::for_dim(1);
    let c = JetCandidate::second(vec![0.0], xi, GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![2.0, 0.0]).unwrap()).unwrap();
    let v = perp_modify(&u, &c, &eta, &SymMatrix::diag(&[1.0]), &s).unwrap();
    assert_eq!(v.status, JetStatus::HypothesisFailed);
    // with ηᵀu ≡ 0 the hypothesis holds for A = 0 and the modification is the identity
    let v = perp_modify(&u, &c, &eta, &SymMatrix::zeros(1), &s).unwrap();
    assert!(v.member);
    let quad = fixtures::smooth_map(1, vec![SmoothScalar::quadratic(0.0, vec![0.0], SymMatrix::diag(&[2.0])), SmoothScalar::quadratic(0.0, vec![0.0], SymMatrix::diag(&[-2.0]))]);
    let c = JetCandidate::second(vec![0.0], Direction::basis(2, 0), GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![2.0, -2.0]).unwrap()).unwrap();
    let v = perp_modify(&quad, &c, &Direction::basis(2, 1), &SymMatrix::diag(&[1.0]), &s).unwrap();
    assert_eq!(v.status, JetStatus::HypothesisFailed);
}

#[test]
fn structural_test_survives_tiny_radii() {
    // ξ^⊥ remainder of size r² next to a ξ part of size r^{3/2}
    let u = fixtures::holder_well(0.5);
    let c = JetCandidate::second(vec![0.0], Direction::basis(2, 0), GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![0.0, 2.0]).unwrap()).unwrap();
    let s = RadiiSchedule { count: 24, ..RadiiSchedule::for_dim(1) };
    let a = test_membership(u.as_ref(), &c, &s).unwrap();
    let b = test_structural(u.as_ref(), &c, &s).unwrap();
    assert!(a.member && b.member, "{:?} {:?}", a.status, b.status);
}

#[test]
fn exact_kink_member_never_rejected_at_tight_tolerance() {
    // zero remainder on one side; a tiny tolerance may leave it undecided but not rejected
    let k = Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]);
    let c = JetCandidate::first(vec![0.0], k.jet_direction(), k.gradient(-1.0)).unwrap();
    for tol in [1e-3, 1e-8, 1e-12] {
        let s = RadiiSchedule { decay_tol: tol, ..RadiiSchedule::for_dim(1) };
        let a = test_membership(k.map().as_ref(), &c, &s).unwrap();
        let b = test_structural(k.map().as_ref(), &c, &s).unwrap();
        assert_ne!(a.status, JetStatus::NonMember, "tol {tol}");
        assert_ne!(b.status, JetStatus::NonMember, "tol {tol}");
    }
}

use contact_core::fixtures::{self, Kink};
use contact_core::jets::{jet_enumerate_smooth, test_membership, JetCandidate, RadiiSchedule};
use contact_core::maps::MapHandle;
use contact_core::sampling::{self, stream_rng};
use contact_core::stability::{
    approximation_experiment, hyperplane_relation, mollify, test_approx_jet, ApproxJetCandidate, HyperplaneHypothesis,
    RelationStatus, ResonantRadii,
};
use contact_core::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use contact_core::vecops;

fn battery() -> Vec<(String, MapHandle, Vec<f64>)> {
    fixtures::smooth_battery()
        .into_iter()
        .map(|(name, m)| {
            let x = (0..m.input_dim()).map(|i| 0.15 * (i as f64 + 1.0)).collect();
            (name, m, x)
        })
        .collect()
}

#[test]
fn smooth_maps_have_only_classical_approximate_jets() {
    let mut rng = stream_rng(51, 1);
    let cases = battery();
    assert_eq!(cases.len(), 10);
    for (name, u, x) in cases {
        let s = RadiiSchedule::for_dim(x.len());
        let du = u.grad(&x).unwrap();
        let d2u = u.hess(&x).unwrap();
        let first = ApproxJetCandidate::first(x.clone(), du.clone()).unwrap();
        assert!(test_approx_jet(u.as_ref(), &first, &s, None).unwrap().member, "{name}: Du rejected");
        let second = ApproxJetCandidate::second(x.clone(), du.clone(), d2u.clone()).unwrap();
        assert!(test_approx_jet(u.as_ref(), &second, &s, None).unwrap().member, "{name}: (Du, D²u) rejected");
        for size in [0.1, 1.0] {
            let tilt = sampling::gaussian_matrix(&mut rng, du.big(), du.small());
            let tilt = tilt.scale(size / tilt.norm());
            let bad = ApproxJetCandidate::first(x.clone(), du.add(&tilt)).unwrap();
            assert!(!test_approx_jet(u.as_ref(), &bad, &s, None).unwrap().member, "{name}: tilted P accepted");
            let bend = sampling::gaussian_hess(&mut rng, du.big(), du.small());
            let bend = bend.scale(size / bend.norm());
            let bad = ApproxJetCandidate::second(x.clone(), du.clone(), d2u.add(&bend)).unwrap();
            assert!(!test_approx_jet(u.as_ref(), &bad, &s, None).unwrap().member, "{name}: bent 𝐗 accepted");
        }
    }
}

#[test]
fn oscillating_line_recovers_the_unit_interval() {
    let u = fixtures::oscillating_line();
    let s = RadiiSchedule::for_dim(1);
    let accepted: Vec<f64> = (-30..=30)
        .map(|k| k as f64 * 0.05)
        .filter(|&p| {
            let c = ApproxJetCandidate::first(vec![0.0], GradMatrix::new(1, 1, vec![p]).unwrap()).unwrap();
            test_approx_jet(u.as_ref(), &c, &s, Some(&ResonantRadii::cosine_level(p, 8))).unwrap().member
        })
        .collect();
    let (lo, hi) = (accepted[0], accepted[accepted.len() - 1]);
    assert!((lo + 1.0).abs() <= 0.05 + 1e-12 && (hi - 1.0).abs() <= 0.05 + 1e-12, "accepted [{lo}, {hi}]");
    // no gaps inside the interval
    assert_eq!(accepted.len(), ((hi - lo) / 0.05).round() as usize + 1);
    // the geometric schedule alone sees only the liminf at its own radii
    let c = ApproxJetCandidate::first(vec![0.0], GradMatrix::new(1, 1, vec![1.0]).unwrap()).unwrap();
    let plain = test_approx_jet(u.as_ref(), &c, &s, None).unwrap();
    let tuned = test_approx_jet(u.as_ref(), &c, &s, Some(&ResonantRadii::cosine_level(1.0, 8))).unwrap();
    assert!(tuned.min_ratio < plain.min_ratio);
}

#[test]
fn hyperplane_relation_on_smooth_maps() {
    let mut rng = stream_rng(52, 1);
    let mut holds = 0;
    for (name, u, x) in battery().into_iter().filter(|c| c.1.output_dim() >= 2) {
        let s = RadiiSchedule::for_dim(x.len());
        let big = u.output_dim();
        let xi = sampling::direction(&mut rng, big);
        // e leans on ξ but stays well away from ±ξ
        let side = xi.perp(&sampling::normal_vec(&mut rng, big));
        let e = Direction::normalized(&vecops::axpy(&vecops::scale(&side, 1.0 / vecops::norm(&side)), 0.6, xi.as_slice())).unwrap();
        let fam = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap();
        let eperp = SymMatrix::identity(big).sub(&SymMatrix::outer_self(e.as_slice()));
        let jets = [
            JetCandidate::first(x.clone(), xi.clone(), fam.gradient.clone()).unwrap(),
            fam.classical(),
            fam.candidate(&sampling::psd_matrix(&mut rng, x.len(), 1.0)).unwrap(),
        ];
        for jet in &jets {
            let q = jet.p.left_mul(&eperp);
            let approx = match &jet.x {
                Some(_) => ApproxJetCandidate::second(x.clone(), q.clone(), u.hess(&x).unwrap().left_mul(&eperp)).unwrap(),
                None => ApproxJetCandidate::first(x.clone(), q.clone()).unwrap(),
            };
            let rep = hyperplane_relation(&u, jet, &e, &approx, &s, None).unwrap();
            assert!(rep.jet_verified && rep.approx_verified, "{name}");
            assert_eq!(rep.status, RelationStatus::Holds, "{name}: {rep:?}");
            holds += 1;
            // a wrong Q is not an approximate jet of e^⊥u, so nothing can be violated
            let off = ApproxJetCandidate::first(x.clone(), q.add(&sampling::gaussian_matrix(&mut rng, big, x.len()).scale(0.5))).unwrap();
            let rep = hyperplane_relation(&u, jet, &e, &off, &s, None).unwrap();
            assert_eq!(rep.status, RelationStatus::Unverified, "{name}");
            assert!(!rep.approx_verified);
        }
    }
    assert!(holds >= 20);
}

#[test]
fn oscillating_well_along_xi_is_not_asserted() {
    let xi = Direction::basis(2, 0);
    let u = fixtures::oscillating_well(&xi);
    let s = RadiiSchedule::for_dim(1);
    let zero = GradMatrix::zeros(2, 1);
    // cos²(1/z) vanishes at 1/z = π/2 + 2πk
    let res = ResonantRadii { theta: std::f64::consts::FRAC_PI_2, period: std::f64::consts::TAU, count: 8 };
    let jet = JetCandidate::first(vec![0.0], xi.clone(), zero.clone()).unwrap();
    assert!(test_membership(u.as_ref(), &jet, &s).unwrap().member);
    let approx = ApproxJetCandidate::first(vec![0.0], zero.clone()).unwrap();
    let a = test_approx_jet(u.as_ref(), &approx, &s, Some(&res)).unwrap();
    assert!(a.member, "0 ∉ A¹u(0): {}", a.min_ratio);
    // without the resonant radii the liminf is not reached on the geometric schedule
    assert!(!test_approx_jet(u.as_ref(), &approx, &s, None).unwrap().member);
    let rep = hyperplane_relation(&u, &jet, &xi, &approx, &s, Some(&res)).unwrap();
    assert!(rep.excluded && rep.jet_verified && rep.approx_verified);
    assert_eq!(rep.status, RelationStatus::NotAsserted);
}

#[test]
fn kink_projection_has_no_approximate_jet() {
    let k = Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]);
    let u = k.map();
    let s = RadiiSchedule::for_dim(1);
    let jet = JetCandidate::first(vec![0.0], k.jet_direction(), k.gradient(0.0)).unwrap();
    assert!(test_membership(u.as_ref(), &jet, &s).unwrap().member);
    let e1 = Direction::basis(2, 0);
    let q = GradMatrix::new(2, 1, vec![0.0, 0.5]).unwrap();
    let approx = ApproxJetCandidate::first(vec![0.0], q.clone()).unwrap();
    let rep = hyperplane_relation(&u, &jet, &e1, &approx, &s, None).unwrap();
    // Q = e₁^⊥P exactly, yet e₁^⊥u = (0, z⁺) has a corner that no Q can follow
    assert!(rep.first_order_defect < 1e-15);
    assert!(rep.jet_verified && !rep.approx_verified);
    assert_eq!(rep.status, RelationStatus::Unverified);
    let projected = fixtures::Kink::new(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]).map();
    let best = test_approx_jet(projected.as_ref(), &approx, &s, None).unwrap();
    assert!((best.min_ratio - 0.5).abs() < 1e-12);
    for q2 in [0.0, 0.25, 0.75, 1.0] {
        let c = ApproxJetCandidate::first(vec![0.0], GradMatrix::new(2, 1, vec![0.0, q2]).unwrap()).unwrap();
        assert!(test_approx_jet(projected.as_ref(), &c, &s, None).unwrap().min_ratio >= 0.5 - 1e-12);
    }
}

#[test]
fn smooth_approximation_converges_fully() {
    let mut rng = stream_rng(53, 1);
    let scales = [0.1, 0.05, 0.025, 0.0125];
    for (name, u, x) in battery().into_iter().filter(|c| c.1.input_dim() <= 2).take(4) {
        let s = RadiiSchedule::for_dim(x.len());
        let xi = sampling::direction(&mut rng, u.output_dim());
        let jet = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap().classical();
        let rep = approximation_experiment(&u, &jet, &scales, &s, None).unwrap();
        assert!(!rep.inconclusive, "{name}");
        assert!(rep.along_converges && rep.perp_converges, "{name}: {:?}", rep.rows);
        assert!(rep.rows.iter().all(|r| r.member), "{name}");
    }
}

#[test]
fn holder_well_mollifies_inside_its_line() {
    let u = fixtures::holder_well(0.5);
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let um = mollify(&u, eps).unwrap();
        for k in -10..=10 {
            let z = [k as f64 * 0.03];
            assert_eq!(um.eval(&z)[1], 0.0);
            assert_eq!(um.grad(&z).unwrap().get(1, 0), 0.0);
            assert_eq!(um.hess(&z).unwrap().get(1, 0, 0), 0.0);
            assert!(um.hess(&z).unwrap().get(0, 0, 0) < 0.0);
        }
    }
    // the hypothesis with e = ξ = e₁ holds with distance exactly 0
    let xi = Direction::basis(2, 0);
    let jet = JetCandidate::second(vec![0.0], xi.clone(), GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![0.0, 2.0]).unwrap()).unwrap();
    let s = RadiiSchedule { count: 24, ..RadiiSchedule::for_dim(1) };
    let hyp = HyperplaneHypothesis { e: xi, q: GradMatrix::zeros(2, 1) };
    let rep = approximation_experiment(&u, &jet, &[0.1, 0.05, 0.025], &s, Some(&hyp)).unwrap();
    assert_eq!(rep.hypothesis_verified, Some(true));
    assert!(rep.rows.iter().all(|r| r.hypothesis_distance == Some(0.0)));
    assert!(!rep.perp_converges);
}

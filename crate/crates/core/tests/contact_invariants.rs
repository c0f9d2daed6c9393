use contact_core::contact::{
    absorb_remainder, contact_calculus_check, contact_map_from_jet, is_contact_map, jet_from_contact_map, strictify,
    ContactCandidate, ConeSchedule,
};
use contact_core::fixtures;
use contact_core::jets::{jet_enumerate_smooth, test_membership, JetCandidate, RadiiSchedule};
use contact_core::maps::{FnMap, MapHandle};
use contact_core::sampling::{self, stream_rng};
use contact_core::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use contact_core::vecops;

fn battery() -> Vec<(String, MapHandle, Vec<f64>)> {
    fixtures::smooth_battery()
        .into_iter()
        .map(|(name, m)| {
            let x = (0..m.input_dim()).map(|i| 0.2 - 0.1 * i as f64).collect();
            (name, m, x)
        })
        .collect()
}

/// ψ(y) = u(y) + k|y − x|²ξ + T(y − x) with analytic derivatives.
fn lifted(u: &MapHandle, x0: &[f64], xi: &Direction, k: f64, t: &GradMatrix) -> MapHandle {
    let n = x0.len();
    let (u1, u2, u3) = (u.clone(), u.clone(), u.clone());
    let (x1, x2) = (x0.to_vec(), x0.to_vec());
    let (xi1, xi2, xi3) = (xi.to_vec(), xi.to_vec(), xi.to_vec());
    let (t1, t2) = (t.clone(), t.clone());
    FnMap::new(n, xi.dim(), move |y| {
        let z = vecops::sub(y, &x1);
        vecops::add(&vecops::axpy(&u1.eval(y), k * vecops::dot(&z, &z), &xi1), &t1.apply(&z))
    })
    .with_grad(move |y| {
        let z = vecops::sub(y, &x2);
        u2.grad(y).unwrap().add(&GradMatrix::outer(&xi2, &vecops::scale(&z, 2.0 * k))).add(&t2)
    })
    .with_hess(move |y| u3.hess(y).unwrap().add(&HessTensor::outer(&xi3, &SymMatrix::identity(n).scale(2.0 * k))))
    .handle()
}

#[test]
fn jets_and_contact_maps_round_trip() {
    let mut rng = stream_rng(31, 1);
    let cones = ConeSchedule::default();
    for (name, u, x) in battery() {
        let s = RadiiSchedule::for_dim(x.len());
        let xi = sampling::direction(&mut rng, u.output_dim());
        let fam = jet_enumerate_smooth(u.as_ref(), &x, &xi).unwrap();
        let jets = vec![
            JetCandidate::first(x.clone(), xi.clone(), fam.gradient.clone()).unwrap(),
            fam.classical(),
            fam.candidate(&sampling::psd_matrix(&mut rng, x.len(), 1.0)).unwrap(),
        ];
        for jc in jets {
            let c = contact_map_from_jet(&u, &jc, &s).unwrap();
            let v = is_contact_map(u.as_ref(), &c, &cones, &s).unwrap();
            assert!(v.holds, "{name} order {}: {v:?}", jc.order);
            let back = jet_from_contact_map(&c).unwrap();
            assert!(back.p.sub(&jc.p).norm() < 1e-8, "{name}: gradient drifted");
            if jc.order == 2 {
                assert!(back.x.unwrap().sub(jc.x.as_ref().unwrap()).norm() < 1e-8, "{name}: hessian drifted");
                let abs = absorb_remainder(&u, &c, &cones, &s).unwrap();
                assert!(abs.jet_defect < 1e-8 && abs.perp_remainder < 1e-12, "{name}: {} {}", abs.jet_defect, abs.perp_remainder);
                assert!(is_contact_map(u.as_ref(), &abs.candidate, &cones, &s).unwrap().holds, "{name}: absorbed map");
            }
        }
    }
}

#[test]
fn contact_maps_yield_member_jets() {
    let mut rng = stream_rng(32, 1);
    let cones = ConeSchedule::default();
    for (name, u, x) in battery() {
        let s = RadiiSchedule::for_dim(x.len());
        let xi = sampling::direction(&mut rng, u.output_dim());
        let same = ContactCandidate::new(u.clone(), x.clone(), xi.clone(), 2).unwrap();
        for c in [same.clone(), strictify(&same, 0.5).unwrap()] {
            assert!(is_contact_map(u.as_ref(), &c, &cones, &s).unwrap().holds, "{name}");
            let jc = jet_from_contact_map(&c).unwrap();
            assert!(test_membership(u.as_ref(), &jc, &s).unwrap().member, "{name}: jet of a contact map");
        }
        let strict = strictify(&same, 0.5).unwrap();
        let rep = contact_calculus_check(&u, &strict, &cones, &s).unwrap();
        assert!(rep.consistent && rep.contact.holds, "{name}: {rep:?}");
        assert!(rep.xi_hessian_top.unwrap() < -0.9, "{name}");
    }
}

#[test]
fn first_order_contact_iff_gradients_match() {
    let mut rng = stream_rng(33, 1);
    let cones = ConeSchedule::default();
    let cases = battery();
    assert_eq!(cases.len(), 10);
    for (name, u, x) in cases {
        let s = RadiiSchedule::for_dim(x.len());
        let xi = sampling::direction(&mut rng, u.output_dim());
        let zero = GradMatrix::zeros(u.output_dim(), x.len());
        let tilt = sampling::gaussian_matrix(&mut rng, u.output_dim(), x.len()).scale(0.5);
        // a tilt with ξᵀT = 0 only moves the perpendicular part
        let flat = tilt.sub(&GradMatrix::outer(xi.as_slice(), &tilt.left(xi.as_slice())));
        for t in [zero, tilt, flat] {
            // for N = 1 the flat tilt vanishes
            let expect = t.norm() == 0.0;
            let c = ContactCandidate::new(lifted(&u, &x, &xi, 1.0, &t), x.clone(), xi.clone(), 1).unwrap();
            let rep = contact_calculus_check(&u, &c, &cones, &s).unwrap();
            assert_eq!(rep.contact.holds, expect, "{name}: defect {}", rep.gradient_defect);
            assert_eq!(rep.gradient_defect <= 1e-8, expect, "{name}");
            assert!(rep.consistent, "{name}");
        }
    }
}

#[test]
fn perpendicular_hessian_mismatch_breaks_second_contact() {
    let cones = ConeSchedule::default();
    for (name, u, x) in battery().into_iter().filter(|c| c.1.output_dim() >= 2) {
        let s = RadiiSchedule::for_dim(x.len());
        let xi = Direction::basis(u.output_dim(), 0);
        let eta = Direction::basis(u.output_dim(), 1);
        let same = ContactCandidate::new(u.clone(), x.clone(), xi.clone(), 2).unwrap();
        let strict = strictify(&same, 0.5).unwrap();
        // ψ̂ = ψ + ½η⊗I:(y−x)⊗(y−x) leaves u − ψ̂ with a perpendicular part of order |z|²
        let base = strict.psi.clone();
        let (x1, e1) = (x.clone(), eta.to_vec());
        let n = x.len();
        let (b2, b3, e2, e3) = (base.clone(), base.clone(), e1.clone(), e1.clone());
        let x2 = x.clone();
        let bent = FnMap::new(n, xi.dim(), move |y| {
            let z = vecops::sub(y, &x1);
            vecops::axpy(&base.eval(y), 0.5 * vecops::dot(&z, &z), &e1)
        })
        .with_grad(move |y| b2.grad(y).unwrap().add(&GradMatrix::outer(&e2, &vecops::sub(y, &x2))))
        .with_hess(move |y| b3.hess(y).unwrap().add(&HessTensor::outer(&e3, &SymMatrix::identity(n))))
        .handle();
        let c = ContactCandidate::new(bent, x.clone(), xi.clone(), 2).unwrap();
        let rep = contact_calculus_check(&u, &c, &cones, &s).unwrap();
        assert!(!rep.contact.holds, "{name}");
        assert!(!rep.hessian_ordering.as_ref().unwrap().holds, "{name}");
        assert!(rep.consistent, "{name}");
    }
}

//! Candidate families shared by the `t_grid` check and the suite.

use contact_core::fixtures::{self, Kink};
use contact_core::jets::{jet_enumerate_smooth, JetCandidate};
use contact_core::maps::MapHandle;
use contact_core::sampling::{self, stream_rng};
use contact_core::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use contact_core::vecops;

/// Kink candidates along the parameter grid with their closed-form
/// expectations. First order: P(t) for ±ξ. With `strata`, second order at
/// each t: points of the stratum ray, of the opposite ray, an off-line
/// offset and the other endpoint's offset.
pub fn kink_cases(k: &Kink, ts: &[f64], strata: bool) -> Vec<(String, JetCandidate, bool)> {
    let xi = k.jet_direction();
    let sum = vecops::add(&k.a, &k.b);
    let big = sum.len();
    // a unit vector orthogonal to A + B, when N ≥ 2
    let perp = (big >= 2).then(|| {
        let mut w = vec![0.0; big];
        w[0] = -sum[1];
        w[1] = sum[0];
        let nw = vecops::norm(&w);
        if nw > 0.0 {
            vecops::scale(&w, 1.0 / nw)
        } else {
            w[0] = 1.0;
            w
        }
    });
    let mut out = Vec::new();
    for &t in ts {
        let p = k.gradient(t);
        let first = JetCandidate::first(vec![0.0], xi.clone(), p.clone()).expect("kink candidate");
        out.push((format!("t={t}/first"), first.clone(), k.oracle_first(&xi, &p)));
        let flipped = first.with_direction(xi.neg());
        out.push((format!("t={t}/flipped"), flipped, k.oracle_first(&xi.neg(), &p)));
        if !strata {
            continue;
        }
        let (offset, other) = if t < 0.0 { (vec![0.0; big], k.c.clone()) } else { (k.c.clone(), vec![0.0; big]) };
        let mut xs: Vec<(String, Vec<f64>)> = Vec::new();
        for s in [0.0, 1.0, 10.0] {
            xs.push((format!("stratum_s{s}"), vecops::axpy(&offset, -s, &sum)));
        }
        for s in [1.0, 10.0] {
            xs.push((format!("anti_s{s}"), vecops::axpy(&offset, s, &sum)));
        }
        if let Some(w) = &perp {
            xs.push(("off_line".into(), vecops::add(&offset, w)));
        }
        if vecops::norm(&k.c) > 0.0 {
            xs.push(("swapped".into(), vecops::axpy(&other, -1.0, &sum)));
        }
        for (label, xv) in xs {
            let hx = k.hessian(&xv);
            let expect = k.oracle_second(&xi, &p, &hx);
            let c = JetCandidate::second(vec![0.0], xi.clone(), p.clone(), hx).expect("kink candidate");
            out.push((format!("t={t}/{label}"), c, expect));
        }
    }
    out
}

/// Kinks with nonzero curvature term, in two and three components.
pub fn suite_kinks() -> Vec<Kink> {
    vec![
        Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, -1.0]),
        Kink::new(vec![2.0, 1.0], vec![-0.5, 1.0], vec![1.0, 1.0]),
        Kink::new(vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 2.0]),
    ]
}

/// The parameter grid −1.5, −1.25, …, 1.5.
pub fn t_grid() -> Vec<f64> {
    (0..13).map(|i| -1.5 + 0.25 * i as f64).collect()
}

/// Smooth fixtures evaluated away from the origin.
pub fn battery_points() -> Vec<(String, MapHandle, Vec<f64>)> {
    fixtures::smooth_battery()
        .into_iter()
        .map(|(name, m)| {
            let x = (0..m.input_dim()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
            (name, m, x)
        })
        .collect()
}

/// Members and non-members of both orders on smooth maps, kinks and the
/// Hölder well, used to compare the equivalent membership tests.
pub fn equivalence_cases(seed: u64) -> Vec<(String, MapHandle, JetCandidate)> {
    let mut out = Vec::new();
    let mut rng = stream_rng(seed, sampling::stream_id("equivalence_cases"));
    for (name, u, x) in battery_points() {
        let xi = sampling::direction(&mut rng, u.output_dim());
        let fam = jet_enumerate_smooth(u.as_ref(), &x, &xi).expect("smooth fixture");
        out.push((format!("{name}/classical"), u.clone(), fam.classical()));
        let below = fam.classical().x.expect("second order").sub(&HessTensor::outer(xi.as_slice(), &SymMatrix::identity(x.len())));
        out.push((format!("{name}/below"), u.clone(), JetCandidate::second(x.clone(), xi.clone(), fam.gradient.clone(), below).expect("valid")));
        let off = fam.gradient.add(&sampling::gaussian_matrix(&mut rng, fam.gradient.big(), x.len()).scale(0.3));
        out.push((format!("{name}/tilted"), u.clone(), JetCandidate::first(x.clone(), xi.clone(), off).expect("valid")));
    }
    let mut kinks = vec![Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0])];
    kinks.extend(suite_kinks());
    for (i, k) in kinks.into_iter().enumerate() {
        let xi = k.jet_direction();
        for t in [-1.5, -1.0, 0.0, 0.5, 1.0, 2.0] {
            out.push((format!("kink{i}/t{t}"), k.map(), JetCandidate::first(vec![0.0], xi.clone(), k.gradient(t)).expect("valid")));
        }
        let sum = vecops::add(&k.a, &k.b);
        let on = k.hessian(&vecops::sub(&k.c, &sum));
        let off = k.hessian(&vecops::add(&k.c, &sum));
        out.push((format!("kink{i}/second"), k.map(), JetCandidate::second(vec![0.0], xi.clone(), k.gradient(1.0), on).expect("valid")));
        out.push((format!("kink{i}/second_off"), k.map(), JetCandidate::second(vec![0.0], xi.clone(), k.gradient(1.0), off).expect("valid")));
    }
    let holder = fixtures::holder_well(0.5);
    let e1 = Direction::basis(2, 0);
    out.push(("holder/first".into(), holder.clone(), JetCandidate::first(vec![0.0], e1.clone(), GradMatrix::zeros(2, 1)).expect("valid")));
    out.push((
        "holder/second".into(),
        holder.clone(),
        JetCandidate::second(vec![0.0], e1, GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![0.0, 2.0]).expect("finite")).expect("valid"),
    ));
    out.push((
        "holder/second_off_axis".into(),
        holder,
        JetCandidate::second(vec![0.0], Direction::normalized(&[1.0, 1.0]).expect("nonzero"), GradMatrix::zeros(2, 1), HessTensor::zeros(2, 1))
            .expect("valid"),
    ));
    out
}

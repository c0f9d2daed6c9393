//! Closed-form maps with known jets, used as oracles by tests, the CLI and
//! the acceptance battery.

use std::sync::Arc;

use crate::maps::{FnMap, MapHandle};
use crate::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, dot, norm};

// ---------------------------------------------------------------------------
// Piecewise linear/quadratic map on the line with a kink at 0

/// u(z) = −A z for z ≤ 0 and B z + C z²/2 for z > 0, with n = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Kink {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Kink {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        Self { a, b, c }
    }

    pub fn map(&self) -> MapHandle {
        let s = self.clone();
        FnMap::new(1, self.a.len(), move |x| {
            let z = x[0];
            if z <= 0.0 {
                vecops::scale(&s.a, -z)
            } else {
                vecops::axpy(&vecops::scale(&s.b, z), 0.5 * z * z, &s.c)
            }
        })
        .handle()
    }

    /// The only direction with nonempty jets: −(A+B)/|A+B|.
    pub fn jet_direction(&self) -> Direction {
        Direction::normalized(&vecops::scale(&vecops::add(&self.a, &self.b), -1.0)).expect("A + B nonzero")
    }

    /// P(t) = (B − A)/2 + t (A + B)/2 as an N×1 matrix.
    pub fn gradient(&self, t: f64) -> GradMatrix {
        let p: Vec<f64> = self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (b - a) + 0.5 * t * (a + b)).collect();
        GradMatrix::new(p.len(), 1, p).expect("finite")
    }

    pub fn hessian(&self, x: &[f64]) -> HessTensor {
        HessTensor::new(x.len(), 1, x.to_vec()).expect("finite")
    }

    fn sum(&self) -> Vec<f64> {
        vecops::add(&self.a, &self.b)
    }

    /// Recovers t with P = P(t), or `None` if P is off the line.
    fn parameter(&self, p: &GradMatrix) -> Option<f64> {
        let s = self.sum();
        let base: Vec<f64> = self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (b - a)).collect();
        let d: Vec<f64> = (0..s.len()).map(|k| p.get(k, 0) - base[k]).collect();
        let t = 2.0 * dot(&d, &s) / dot(&s, &s);
        let resid = vecops::axpy(&d, -0.5 * t, &s);
        (norm(&resid) <= 1e-9).then_some(t)
    }

    /// First-order jet predicate derived from the definition of contact jets.
    pub fn oracle_first(&self, xi: &Direction, p: &GradMatrix) -> bool {
        let dir = self.jet_direction();
        if norm(&vecops::sub(xi.as_slice(), dir.as_slice())) > 1e-12 {
            return false;
        }
        matches!(self.parameter(p), Some(t) if t.abs() <= 1.0 + 1e-12)
    }

    /// Second-order jet predicate: interior t with any 𝐗; at t = −1 the
    /// stratum {−s(A+B)}, at t = +1 the stratum {C − s(A+B)}, s ≥ 0.
    pub fn oracle_second(&self, xi: &Direction, p: &GradMatrix, x: &HessTensor) -> bool {
        if !self.oracle_first(xi, p) {
            return false;
        }
        let t = self.parameter(p).expect("checked above");
        let xv: Vec<f64> = (0..x.big()).map(|k| x.get(k, 0, 0)).collect();
        let s = self.sum();
        let on_ray = |offset: &[f64]| {
            // X = offset − s (A+B) with s ≥ 0
            let d = vecops::sub(offset, &xv);
            let coef = dot(&d, &s) / dot(&s, &s);
            coef >= -1e-12 && norm(&vecops::axpy(&d, -coef, &s)) <= 1e-9
        };
        if (t + 1.0).abs() <= 1e-12 {
            on_ray(&vec![0.0; xv.len()])
        } else if (t - 1.0).abs() <= 1e-12 {
            on_ray(&self.c)
        } else {
            true
        }
    }
}

// ---------------------------------------------------------------------------
// Oscillating examples

/// u(z) = z cos(1/|z|), u(0) = 0.
pub fn oscillating_line() -> MapHandle {
    FnMap::new(1, 1, |x| {
        let z = x[0];
        if z == 0.0 {
            vec![0.0]
        } else {
            vec![z * (1.0 / z.abs()).cos()]
        }
    })
    .handle()
}

/// u(z) = −|z| cos²(1/z) ξ, u(0) = 0.
pub fn oscillating_well(xi: &Direction) -> MapHandle {
    let d = xi.to_vec();
    FnMap::new(1, d.len(), move |x| {
        let z = x[0];
        let s = if z == 0.0 { 0.0 } else { -z.abs() * (1.0 / z).cos().powi(2) };
        vecops::scale(&d, s)
    })
    .handle()
}

// ---------------------------------------------------------------------------
// Hölder-gradient example and its quadratic contact map

/// u(z) = (−|z|^{1+α}, 0).
pub fn holder_well(alpha: f64) -> MapHandle {
    FnMap::new(1, 2, move |x| vec![-x[0].abs().powf(1.0 + alpha), 0.0])
        .with_grad(move |x| {
            let z = x[0];
            let g = if z == 0.0 { 0.0 } else { -(1.0 + alpha) * z.abs().powf(alpha) * z.signum() };
            GradMatrix::new(2, 1, vec![g, 0.0]).expect("finite")
        })
        .handle()
}

/// ψ(z) = (0, k z²).
pub fn perp_parabola(k: f64) -> MapHandle {
    FnMap::new(1, 2, move |x| vec![0.0, k * x[0] * x[0]])
        .with_grad(move |x| GradMatrix::new(2, 1, vec![0.0, 2.0 * k * x[0]]).expect("finite"))
        .with_hess(move |_| HessTensor::new(2, 1, vec![0.0, 2.0 * k]).expect("finite"))
        .handle()
}

// ---------------------------------------------------------------------------
// Smooth maps with analytic derivatives

type Scalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ScalarGrad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ScalarHess = Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;

/// A smooth scalar function with its gradient and Hessian.
#[derive(Clone)]
pub struct SmoothScalar {
    pub f: Scalar,
    pub g: ScalarGrad,
    pub h: ScalarHess,
}

impl SmoothScalar {
    pub fn new(
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        h: impl Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), g: Arc::new(g), h: Arc::new(h) }
    }

    /// c + bᵀx + ½ xᵀAx
    pub fn quadratic(c: f64, b: Vec<f64>, a: SymMatrix) -> Self {
        let (b1, a1, a2) = (b.clone(), a.clone(), a.clone());
        Self::new(
            move |x| c + dot(&b, x) + 0.5 * a.bilinear(x, x),
            move |x| vecops::add(&b1, &a1.mul_vec(x)),
            move |_| a2.clone(),
        )
    }

    /// sin(kᵀx + φ)
    pub fn sine(k: Vec<f64>, phase: f64) -> Self {
        let (k1, k2) = (k.clone(), k.clone());
        Self::new(
            move |x| (dot(&k, x) + phase).sin(),
            move |x| vecops::scale(&k1, (dot(&k1, x) + phase).cos()),
            move |x| SymMatrix::outer_self(&k2).scale(-(dot(&k2, x) + phase).sin()),
        )
    }

    /// exp(kᵀx) − 1
    pub fn exponential(k: Vec<f64>) -> Self {
        let (k1, k2) = (k.clone(), k.clone());
        Self::new(
            move |x| dot(&k, x).exp() - 1.0,
            move |x| vecops::scale(&k1, dot(&k1, x).exp()),
            move |x| SymMatrix::outer_self(&k2).scale(dot(&k2, x).exp()),
        )
    }

    /// c (kᵀx)³
    pub fn cubic(k: Vec<f64>, c: f64) -> Self {
        let (k1, k2) = (k.clone(), k.clone());
        Self::new(
            move |x| c * dot(&k, x).powi(3),
            move |x| vecops::scale(&k1, 3.0 * c * dot(&k1, x).powi(2)),
            move |x| SymMatrix::outer_self(&k2).scale(6.0 * c * dot(&k2, x)),
        )
    }

    pub fn sum(self, o: Self) -> Self {
        let (f1, g1, h1) = (self.f, self.g, self.h);
        let (f2, g2, h2) = (o.f, o.g, o.h);
        Self::new(move |x| f1(x) + f2(x), move |x| vecops::add(&g1(x), &g2(x)), move |x| h1(x).add(&h2(x)))
    }
}

/// Map with the given smooth components.
pub fn smooth_map(n: usize, comps: Vec<SmoothScalar>) -> MapHandle {
    let big = comps.len();
    let (c1, c2, c3) = (comps.clone(), comps.clone(), comps);
    FnMap::new(n, big, move |x| c1.iter().map(|c| (c.f)(x)).collect())
        .with_grad(move |x| {
            let rows: Vec<Vec<f64>> = c2.iter().map(|c| (c.g)(x)).collect();
            GradMatrix::from_rows(&rows).expect("consistent")
        })
        .with_hess(move |x| {
            let hs: Vec<SymMatrix> = c3.iter().map(|c| (c.h)(x)).collect();
            HessTensor::from_components(&hs).expect("consistent")
        })
        .handle()
}

/// Ten smooth maps with moderate third derivatives, mixing dimensions.
pub fn smooth_battery() -> Vec<(String, MapHandle)> {
    let q = |c: f64, b: Vec<f64>, a: SymMatrix| SmoothScalar::quadratic(c, b, a);
    let s = SmoothScalar::sine;
    let e = SmoothScalar::exponential;
    let cu = SmoothScalar::cubic;
    let n2 = |a: f64, b: f64, c: f64| SymMatrix::new(2, vec![a, b, b, c]).expect("symmetric");
    vec![
        ("sine_times_vector".into(), smooth_map(2, vec![s(vec![1.0, 0.0], 0.0), s(vec![1.0, 0.0], 0.0).sum(s(vec![1.0, 0.0], 0.0))])),
        ("paraboloid_pair".into(), smooth_map(2, vec![q(0.0, vec![0.0, 0.0], n2(2.0, 0.0, 2.0)), q(0.0, vec![0.0, 0.0], n2(2.0, 0.0, 2.0))])),
        ("mixed_three".into(), smooth_map(2, vec![q(0.0, vec![0.0, 0.0], n2(0.0, 1.0, 0.0)), e(vec![1.0, 0.0]), s(vec![0.0, 1.0], 1.0)])),
        ("saddle_cubic".into(), smooth_map(2, vec![q(0.5, vec![1.0, -1.0], n2(1.0, 0.0, -1.0)).sum(cu(vec![1.0, 1.0], 0.2)), s(vec![0.7, -0.4], 0.3)])),
        ("line_trio".into(), smooth_map(1, vec![s(vec![1.3], 0.2), e(vec![-0.8]), cu(vec![1.0], 0.5)])),
        ("line_pair".into(), smooth_map(1, vec![q(0.0, vec![0.3], SymMatrix::diag(&[-1.0])), s(vec![2.0], -0.5)])),
        ("space_pair".into(), smooth_map(3, vec![e(vec![0.3, -0.2, 0.5]), s(vec![0.5, 0.5, -0.5], 0.1).sum(q(0.0, vec![0.0; 3], SymMatrix::diag(&[1.0, -2.0, 0.5])))])),
        ("exp_sine".into(), smooth_map(2, vec![e(vec![0.5, 0.5]), s(vec![1.0, -1.0], 0.0), cu(vec![0.3, 0.9], -0.4)])),
        ("scalar_bump".into(), smooth_map(2, vec![s(vec![1.0, 2.0], 0.4).sum(q(1.0, vec![0.0, 0.0], n2(-1.0, 0.5, 1.5)))])),
        ("four_components".into(), smooth_map(2, vec![
            q(0.0, vec![1.0, 0.0], n2(0.0, 0.0, 1.0)),
            s(vec![0.2, 1.1], 0.0),
            e(vec![-0.6, 0.1]),
            cu(vec![1.0, -1.0], 0.3),
        ])),
    ]
}

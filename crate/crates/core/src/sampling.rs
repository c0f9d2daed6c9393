//! Deterministic sampling: counter-based random streams, low-discrepancy
//! point sets and the random tensors used by the certifiers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, norm};

/// Random stream `stream` derived from `seed`. ChaCha is counter based, so
/// distinct streams are independent of scheduling order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit label for a named stream.
pub fn stream_id(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn normal_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, d);
        let n = norm(&v);
        if n > 1e-8 {
            return vecops::scale(&v, 1.0 / n);
        }
    }
}

pub fn direction<R: Rng>(rng: &mut R, d: usize) -> Direction {
    Direction::normalized(&unit_vec(rng, d)).expect("unit vector")
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, big: usize, small: usize) -> GradMatrix {
    GradMatrix::new(big, small, normal_vec(rng, big * small)).expect("finite entries")
}

pub fn gaussian_sym<R: Rng>(rng: &mut R, d: usize) -> SymMatrix {
    let v = normal_vec(rng, d * d);
    SymMatrix::from_fn(d, |i, j| v[i * d + j])
}

pub fn gaussian_hess<R: Rng>(rng: &mut R, big: usize, small: usize) -> HessTensor {
    let comps: Vec<SymMatrix> = (0..big).map(|_| gaussian_sym(rng, small)).collect();
    HessTensor::from_components(&comps).expect("consistent dimensions")
}

/// BᵀB with Gaussian B, rescaled to Frobenius norm `size` (`size = 0` gives 0).
pub fn psd_matrix<R: Rng>(rng: &mut R, d: usize, size: f64) -> SymMatrix {
    if size == 0.0 {
        return SymMatrix::zeros(d);
    }
    let b = normal_vec(rng, d * d);
    let a = SymMatrix::from_fn(d, |i, j| (0..d).map(|k| b[k * d + i] * b[k * d + j]).sum());
    let f = a.frob_norm();
    if f < 1e-300 {
        SymMatrix::identity(d).scale(size / (d as f64).sqrt())
    } else {
        a.scale(size / f)
    }
}

/// Norms used for the PSD parameter of jet rays.
pub const PSD_SIZES: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

/// Radical inverse of `k` in base `b`.
pub fn radical_inverse(mut k: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % b) as f64;
        k /= b;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
    103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Halton point `k` (k ≥ 1) in [0,1)^d.
pub fn halton(k: u64, d: usize) -> Vec<f64> {
    (0..d).map(|j| radical_inverse(k, PRIMES[j % PRIMES.len()])).collect()
}

/// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9 relative).
fn inv_normal(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2,
        -3.066479806614716e1, 2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734,
        4.374664141464968, 2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    let pl = 0.02425;
    if p < pl {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - pl {
        -inv_normal(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Low-discrepancy unit vector number `k` in ℝ^d (Halton mapped through the
/// normal quantile, then normalised).
pub fn halton_unit(k: u64, d: usize) -> Vec<f64> {
    let mut j = k;
    loop {
        let g: Vec<f64> = halton(j, d).into_iter().map(inv_normal).collect();
        let n = norm(&g);
        if n > 1e-6 {
            return vecops::scale(&g, 1.0 / n);
        }
        j += 7919;
    }
}

/// Sample directions on S^{d−1}: `count` low-discrepancy points plus the 2d
/// signed coordinate vectors, with duplicates removed.
pub fn sphere_points(d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    match d {
        1 => {}
        2 => {
            for k in 0..count {
                // offset keeps the grid off the coordinate axes
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                pts.push(vec![t.cos(), t.sin()]);
            }
        }
        _ => {
            for k in 1..=count as u64 {
                pts.push(halton_unit(k, d));
            }
        }
    }
    for k in 0..d {
        pts.push(vecops::unit(d, k));
        pts.push(vecops::scale(&vecops::unit(d, k), -1.0));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        if !out.iter().any(|q| vecops::sub(q, &p).iter().all(|x| x.abs() < 1e-12)) {
            out.push(p);
        }
    }
    out
}

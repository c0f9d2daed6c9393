//! Small helpers on plain `f64` slices.

/// Zero test used for sign maps and division guards.
pub const ZERO_TOL: f64 = 1e-14;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Scalar sign with `sgn(0) = 0`.
pub fn sgn(a: f64) -> f64 {
    if a.abs() < ZERO_TOL {
        0.0
    } else {
        a.signum()
    }
}

/// Vector sign `a / |a|`, the zero vector when `|a|` vanishes.
pub fn sgn_vec(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n < ZERO_TOL {
        vec![0.0; a.len()]
    } else {
        scale(a, 1.0 / n)
    }
}

pub fn unit(dim: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[k] = 1.0;
    e
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Orthonormal completion: returns unit vectors spanning the orthogonal
/// complement of the (orthonormal) vectors in `basis`.
pub fn orthonormal_complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::new();
    for k in 0..dim {
        if all.len() == dim {
            break;
        }
        let mut v = unit(dim, k);
        // two passes of Gram-Schmidt keep the result orthogonal to round-off
        for _ in 0..2 {
            for b in &all {
                let c = dot(&v, b);
                v = axpy(&v, -c, b);
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            let v = scale(&v, 1.0 / nv);
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}

//! Dense multilinear algebra over ℝ^n, ℝ^N, ℝ^{N×n}, ℝ^N⊗ℝ_s^{n×n} and
//! the space of fourth-order forms acting on N×n matrices.
//!
//! Throughout, `big` is the target dimension N and `small` the domain
//! dimension n. Both are runtime values capped at [`MAX_DIM`].

use serde::{Deserialize, Serialize};

use crate::eigen::{jacobi_eigen, Spectrum};
use crate::error::{Error, Result};
use crate::vecops::{self, dot, norm, ZERO_TOL};

pub const MAX_DIM: usize = 16;

const UNIT_TOL: f64 = 1e-12;
const HESS_DEFECT_TOL: f64 = 1e-10;

fn check_dim(name: &str, d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::Dimension(format!("{name} = {d} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if !vecops::all_finite(v) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Direction

/// A unit vector ξ ∈ S^{N−1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    components: Vec<f64>,
}

impl Direction {
    /// Accepts `v` only if it is already unit within 1e-12.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        check_dim("N", v.len())?;
        check_finite("direction", &v)?;
        let n = norm(&v);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!("direction has norm {n}, expected 1")));
        }
        Ok(Self { components: v })
    }

    /// Normalises a nonzero vector.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        check_dim("N", v.len())?;
        check_finite("direction", v)?;
        let n = norm(v);
        if n < ZERO_TOL {
            return Err(Error::InvalidInput("cannot normalise the zero vector".into()));
        }
        Ok(Self { components: vecops::scale(v, 1.0 / n) })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        Self { components: vecops::unit(dim, k) }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.components.clone()
    }

    pub fn neg(&self) -> Self {
        Self { components: vecops::scale(&self.components, -1.0) }
    }

    /// ξᵀv
    pub fn along(&self, v: &[f64]) -> f64 {
        dot(&self.components, v)
    }

    /// ξ^⊥v = v − (ξᵀv)ξ
    pub fn perp(&self, v: &[f64]) -> Vec<f64> {
        let c = self.along(v);
        vecops::axpy(v, -c, &self.components)
    }
}

// ---------------------------------------------------------------------------
// GradMatrix

/// P ∈ ℝ^{N×n}, row-major with rows indexed by α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradMatrix {
    big: usize,
    small: usize,
    entries: Vec<f64>,
}

impl GradMatrix {
    pub fn new(big: usize, small: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim("N", big)?;
        check_dim("n", small)?;
        check_len("gradient entries", entries.len(), big * small)?;
        check_finite("gradient", &entries)?;
        Ok(Self { big, small, entries })
    }

    pub fn zeros(big: usize, small: usize) -> Self {
        Self { big, small, entries: vec![0.0; big * small] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let big = rows.len();
        let small = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(big * small);
        for r in rows {
            check_len("gradient row", r.len(), small)?;
            entries.extend_from_slice(r);
        }
        Self::new(big, small, entries)
    }

    /// a ⊗ b for a ∈ ℝ^N, b ∈ ℝ^n.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut entries = Vec::with_capacity(a.len() * b.len());
        for x in a {
            for y in b {
                entries.push(x * y);
            }
        }
        Self { big: a.len(), small: b.len(), entries }
    }

    pub fn big(&self) -> usize {
        self.big
    }
    pub fn small(&self) -> usize {
        self.small
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn get(&self, a: usize, i: usize) -> f64 {
        self.entries[a * self.small + i]
    }
    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.small..(a + 1) * self.small]
    }

    /// Pz ∈ ℝ^N
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        (0..self.big).map(|a| dot(self.row(a), z)).collect()
    }

    /// ηᵀP ∈ ℝ^n
    pub fn left(&self, eta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.small];
        for a in 0..self.big {
            for i in 0..self.small {
                out[i] += eta[a] * self.get(a, i);
            }
        }
        out
    }

    /// ξ^⊥P = (I − ξ⊗ξ)P
    pub fn perp(&self, xi: &Direction) -> Self {
        let along = self.left(xi.as_slice());
        let mut out = self.clone();
        for a in 0..self.big {
            for i in 0..self.small {
                out.entries[a * self.small + i] -= xi.as_slice()[a] * along[i];
            }
        }
        out
    }

    /// Applies a linear map M ∈ ℝ^{N×N} (given as a symmetric matrix) on the left.
    pub fn left_mul(&self, m: &SymMatrix) -> Self {
        let mut out = Self::zeros(self.big, self.small);
        for a in 0..self.big {
            for b in 0..self.big {
                let c = m.get(a, b);
                for i in 0..self.small {
                    out.entries[a * self.small + i] += c * self.get(b, i);
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::add(&self.entries, &o.entries) }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::sub(&self.entries, &o.entries) }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::scale(&self.entries, s) }
    }
    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }
    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor { big: self.big, small: self.small, q: 1, s: 1, data: self.entries.clone() }
    }
}

// ---------------------------------------------------------------------------
// SymMatrix

/// Symmetric d×d matrix; used both for N×N values of vee products and for
/// n×n Hessian slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Accepts entries symmetric within 1e-14 (relative to the largest entry)
    /// and stores the exact symmetrisation.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_len("matrix entries", entries.len(), dim * dim)?;
        check_finite("matrix", &entries)?;
        let scale = vecops::max_abs(&entries).max(1.0);
        for i in 0..dim {
            for j in 0..i {
                let d = (entries[i * dim + j] - entries[j * dim + i]).abs();
                if d > 1e-14 * scale {
                    return Err(Error::InvalidInput(format!("matrix not symmetric (defect {d:e})")));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| 0.5 * (entries[i * dim + j] + entries[j * dim + i])))
    }

    /// Builds `(f(i,j) + f(j,i)) / 2`.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = if i == j { f(i, i) } else { 0.5 * (f(i, j) + f(j, i)) };
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim] }
    }
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }
    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }
    /// a ⊗ a
    pub fn outer_self(a: &[f64]) -> Self {
        Self::from_fn(a.len(), |i, j| a[i] * a[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(&self.entries[i * self.dim..(i + 1) * self.dim], v)).collect()
    }

    /// aᵀXb
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mul_vec(b))
    }

    /// X : Y = Σ X_ij Y_ij
    pub fn frob_dot(&self, o: &Self) -> f64 {
        dot(&self.entries, &o.entries)
    }
    pub fn frob_norm(&self) -> f64 {
        norm(&self.entries)
    }
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { dim: self.dim, entries: vecops::add(&self.entries, &o.entries) }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Self { dim: self.dim, entries: vecops::sub(&self.entries, &o.entries) }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: vecops::scale(&self.entries, s) }
    }

    pub fn eigen(&self) -> Spectrum {
        jacobi_eigen(self)
    }
    pub fn min_eig(&self) -> f64 {
        self.eigen().eigenvalues[0]
    }
    pub fn max_eig(&self) -> f64 {
        *self.eigen().eigenvalues.last().expect("nonempty spectrum")
    }
}

// ---------------------------------------------------------------------------
// HessTensor

/// 𝐗 ∈ ℝ^N⊗ℝ_s^{n×n}, stored as `entries[α][i][j]` with exact symmetry in (i,j).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessTensor {
    big: usize,
    small: usize,
    entries: Vec<f64>,
}

impl HessTensor {
    /// Symmetrises the trailing pair of indices by averaging. Asymmetry above
    /// 1e-10 is rejected rather than silently corrected.
    pub fn new(big: usize, small: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim("N", big)?;
        check_dim("n", small)?;
        check_len("hessian entries", entries.len(), big * small * small)?;
        check_finite("hessian", &entries)?;
        let mut defect: f64 = 0.0;
        let mut out = entries.clone();
        for a in 0..big {
            for i in 0..small {
                for j in 0..i {
                    let p = (a * small + i) * small + j;
                    let q = (a * small + j) * small + i;
                    defect = defect.max((entries[p] - entries[q]).abs());
                    let m = 0.5 * (entries[p] + entries[q]);
                    out[p] = m;
                    out[q] = m;
                }
            }
        }
        if defect > HESS_DEFECT_TOL {
            return Err(Error::Asymmetric { defect });
        }
        Ok(Self { big, small, entries: out })
    }

    pub fn zeros(big: usize, small: usize) -> Self {
        Self { big, small, entries: vec![0.0; big * small * small] }
    }

    pub fn from_components(comps: &[SymMatrix]) -> Result<Self> {
        let big = comps.len();
        check_dim("N", big)?;
        let small = comps[0].dim();
        check_dim("n", small)?;
        let mut entries = Vec::with_capacity(big * small * small);
        for c in comps {
            check_len("hessian component", c.dim(), small)?;
            entries.extend_from_slice(c.entries());
        }
        Ok(Self { big, small, entries })
    }

    /// ξ ⊗ A
    pub fn outer(xi: &[f64], a: &SymMatrix) -> Self {
        let comps: Vec<SymMatrix> = xi.iter().map(|&c| a.scale(c)).collect();
        Self::from_components(&comps).expect("consistent dimensions")
    }

    pub fn big(&self) -> usize {
        self.big
    }
    pub fn small(&self) -> usize {
        self.small
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn get(&self, a: usize, i: usize, j: usize) -> f64 {
        self.entries[(a * self.small + i) * self.small + j]
    }

    pub fn component(&self, a: usize) -> SymMatrix {
        let s2 = self.small * self.small;
        SymMatrix { dim: self.small, entries: self.entries[a * s2..(a + 1) * s2].to_vec() }
    }

    /// 𝐗 : w⊗v ∈ ℝ^N
    pub fn contract_pair(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.big).map(|a| self.component(a).bilinear(w, v)).collect()
    }

    /// 𝐗 : z⊗z
    pub fn quadratic(&self, z: &[f64]) -> Vec<f64> {
        self.contract_pair(z, z)
    }

    /// ηᵀ𝐗 = Σ_α η_α X_α ∈ ℝ_s^{n×n}
    pub fn left(&self, eta: &[f64]) -> SymMatrix {
        let mut acc = SymMatrix::zeros(self.small);
        for a in 0..self.big {
            acc = acc.add(&self.component(a).scale(eta[a]));
        }
        acc
    }

    /// ξ^⊥𝐗
    pub fn perp(&self, xi: &Direction) -> Self {
        let along = self.left(xi.as_slice());
        self.sub(&Self::outer(xi.as_slice(), &along))
    }

    /// M𝐗 for a matrix M acting on the ℝ^N factor.
    pub fn left_mul(&self, m: &SymMatrix) -> Self {
        let comps: Vec<SymMatrix> = (0..self.big)
            .map(|a| {
                let row: Vec<f64> = (0..self.big).map(|b| m.get(a, b)).collect();
                self.left(&row)
            })
            .collect();
        Self::from_components(&comps).expect("consistent dimensions")
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::add(&self.entries, &o.entries) }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::sub(&self.entries, &o.entries) }
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::scale(&self.entries, s) }
    }
    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }
    pub fn to_dense(&self) -> DenseTensor {
        DenseTensor { big: self.big, small: self.small, q: 1, s: 2, data: self.entries.clone() }
    }
}

// ---------------------------------------------------------------------------
// BiForm

/// Ξ ∈ ℝ_s^{Nn×Nn}, stored as `entries[α][i][β][j]`. Flattening pairs (α,i)
/// into the row index `α·n + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiForm {
    big: usize,
    small: usize,
    entries: Vec<f64>,
}

impl BiForm {
    /// Requires Ξ_{αiβj} = Ξ_{βjαi} within 1e-12 relative; stores the exact symmetrisation.
    pub fn new(big: usize, small: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim("N", big)?;
        check_dim("n", small)?;
        let m = big * small;
        check_len("biform entries", entries.len(), m * m)?;
        check_finite("biform", &entries)?;
        let scale = vecops::max_abs(&entries).max(1.0);
        for r in 0..m {
            for c in 0..r {
                let d = (entries[r * m + c] - entries[c * m + r]).abs();
                if d > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!("biform lacks pair symmetry (defect {d:e})")));
                }
            }
        }
        Ok(Self::from_flat_fn(big, small, |r, c| 0.5 * (entries[r * m + c] + entries[c * m + r])))
    }

    /// Builds the pair-symmetrisation of an arbitrary index function.
    pub fn from_fn(big: usize, small: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        Self::from_flat_fn(big, small, |r, c| {
            let (a, i) = (r / small, r % small);
            let (b, j) = (c / small, c % small);
            0.5 * (f(a, i, b, j) + f(b, j, a, i))
        })
    }

    fn from_flat_fn(big: usize, small: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let m = big * small;
        let mut entries = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..=r {
                let v = f(r, c);
                entries[r * m + c] = v;
                entries[c * m + r] = v;
            }
        }
        Self { big, small, entries }
    }

    /// Ξ : P⊗P = |P|²
    pub fn identity(big: usize, small: usize) -> Self {
        Self::from_flat_fn(big, small, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    /// The N = n = 2 form with Ξ : P⊗P = 2 det P.
    pub fn determinant_form() -> Self {
        Self::from_fn(2, 2, |a, i, b, j| {
            if a != b && i != j {
                if a == i {
                    1.0
                } else {
                    -1.0
                }
            } else {
                0.0
            }
        })
    }

    pub fn big(&self) -> usize {
        self.big
    }
    pub fn small(&self) -> usize {
        self.small
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn get(&self, a: usize, i: usize, b: usize, j: usize) -> f64 {
        let m = self.big * self.small;
        self.entries[(a * self.small + i) * m + b * self.small + j]
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    pub fn scale(&self, s: f64) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::scale(&self.entries, s) }
    }
    pub fn add(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::add(&self.entries, &o.entries) }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Self { big: self.big, small: self.small, entries: vecops::sub(&self.entries, &o.entries) }
    }
    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }

    /// The Nn×Nn flattening.
    pub fn flatten(&self) -> SymMatrix {
        SymMatrix { dim: self.big * self.small, entries: self.entries.clone() }
    }

    /// Ξ : P⊗Q
    pub fn bilinear(&self, p: &GradMatrix, q: &GradMatrix) -> f64 {
        self.flatten().bilinear(p.entries(), q.entries())
    }

    /// Ξ : (η⊗w)⊗(η⊗w)
    pub fn rank_one_value(&self, eta: &[f64], w: &[f64]) -> f64 {
        let p = GradMatrix::outer(eta, w);
        self.bilinear(&p, &p)
    }

    /// M(w)_{αβ} = Ξ_{αiβj} w_i w_j
    pub fn m_of_w(&self, w: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(self.big, |a, b| {
            let mut s = 0.0;
            for i in 0..self.small {
                for j in 0..self.small {
                    s += self.get(a, i, b, j) * w[i] * w[j];
                }
            }
            s
        })
    }

    /// K(η)_{ij} = Ξ_{αiβj} η_α η_β
    pub fn k_of_eta(&self, eta: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(self.small, |i, j| {
            let mut s = 0.0;
            for a in 0..self.big {
                for b in 0..self.big {
                    s += self.get(a, i, b, j) * eta[a] * eta[b];
                }
            }
            s
        })
    }

    /// Ξ : 𝐗 ∈ ℝ^N, contracting (β,i,j) against 𝐗_{βij}.
    pub fn apply_hess(&self, x: &HessTensor) -> Vec<f64> {
        (0..self.big)
            .map(|a| {
                let mut s = 0.0;
                for i in 0..self.small {
                    for b in 0..self.big {
                        for j in 0..self.small {
                            s += self.get(a, i, b, j) * x.get(b, i, j);
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Defect of the separate symmetry Ξ_{αiβj} = Ξ_{βiαj}.
    pub fn separate_symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..self.big {
            for i in 0..self.small {
                for b in 0..self.big {
                    for j in 0..self.small {
                        d = d.max((self.get(a, i, b, j) - self.get(b, i, a, j)).abs());
                    }
                }
            }
        }
        d
    }

    /// Averages over the swap α↔β, giving a separately symmetric form.
    pub fn separately_symmetrised(&self) -> Self {
        Self::from_fn(self.big, self.small, |a, i, b, j| 0.5 * (self.get(a, i, b, j) + self.get(b, i, a, j)))
    }

    /// Layout (α, β, i, j) so that the first index stays free under [`contract`].
    pub fn to_dense(&self) -> DenseTensor {
        let (nb, ns) = (self.big, self.small);
        let mut data = Vec::with_capacity(nb * nb * ns * ns);
        for a in 0..nb {
            for b in 0..nb {
                for i in 0..ns {
                    for j in 0..ns {
                        data.push(self.get(a, i, b, j));
                    }
                }
            }
        }
        DenseTensor { big: nb, small: ns, q: 2, s: 2, data }
    }
}

// ---------------------------------------------------------------------------
// Generic contraction

/// Tensor in ⊗^q ℝ^N ⊗ ⊗^s ℝ^n, row-major with the q target indices first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    pub big: usize,
    pub small: usize,
    pub q: usize,
    pub s: usize,
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(big: usize, small: usize, q: usize, s: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("N", big)?;
        check_dim("n", small)?;
        check_len("tensor data", data.len(), big.pow(q as u32) * small.pow(s as u32))?;
        check_finite("tensor", &data)?;
        Ok(Self { big, small, q, s, data })
    }
}

/// S : T, summing over the last p target indices and all s domain indices
/// of S against the indices of T. The result has order (q − p, 0).
pub fn contract(s: &DenseTensor, t: &DenseTensor) -> Result<DenseTensor> {
    if s.big != t.big || s.small != t.small {
        return Err(Error::Dimension("contract: base dimensions differ".into()));
    }
    if s.s != t.s || s.q < t.q {
        return Err(Error::Dimension(format!(
            "contract: orders ({},{}) and ({},{}) are incompatible",
            s.q, s.s, t.q, t.s
        )));
    }
    let inner = t.data.len();
    let free = s.big.pow((s.q - t.q) as u32);
    let data = (0..free).map(|f| dot(&s.data[f * inner..(f + 1) * inner], &t.data)).collect();
    Ok(DenseTensor { big: s.big, small: s.small, q: s.q - t.q, s: 0, data })
}

// ---------------------------------------------------------------------------
// Symmetrised products and projections

/// a ∨ b = ½(a⊗b + b⊗a)
pub fn vee(a: &[f64], b: &[f64]) -> Result<SymMatrix> {
    check_len("vee", b.len(), a.len())?;
    Ok(SymMatrix::from_fn(a.len(), |i, j| 0.5 * (a[i] * b[j] + a[j] * b[i])))
}

/// (ξ∨P)_{αβi} = ½(ξ_α P_{βi} + ξ_β P_{αi}), an order-(2,1) tensor.
pub fn vee_grad(xi: &Direction, p: &GradMatrix) -> Result<DenseTensor> {
    check_len("vee_grad", p.big(), xi.dim())?;
    let (nb, ns) = (p.big(), p.small());
    let x = xi.as_slice();
    let mut data = Vec::with_capacity(nb * nb * ns);
    for a in 0..nb {
        for b in 0..nb {
            for i in 0..ns {
                data.push(0.5 * (x[a] * p.get(b, i) + x[b] * p.get(a, i)));
            }
        }
    }
    Ok(DenseTensor { big: nb, small: ns, q: 2, s: 1, data })
}

/// (ξ∨𝐗)_{αiβj} = ½(ξ_α X_{βij} + ξ_β X_{αij})
pub fn vee_hess(xi: &Direction, x: &HessTensor) -> Result<BiForm> {
    check_len("vee_hess", x.big(), xi.dim())?;
    let v = xi.as_slice();
    Ok(BiForm::from_fn(x.big(), x.small(), |a, i, b, j| 0.5 * (v[a] * x.get(b, i, j) + v[b] * x.get(a, i, j))))
}

/// ξ⊗ξ
pub fn project_along(xi: &Direction) -> SymMatrix {
    SymMatrix::outer_self(xi.as_slice())
}

/// I − ξ⊗ξ
pub fn project_perp(xi: &Direction) -> SymMatrix {
    SymMatrix::identity(xi.dim()).sub(&project_along(xi))
}

/// max over unit η of |A : η⊗η|, which is the largest |eigenvalue|.
pub fn numerical_radius(a: &SymMatrix) -> f64 {
    a.eigen().eigenvalues.iter().fold(0.0, |m: f64, l| m.max(l.abs()))
}

/// Orthogonal projection onto (span{ξ, η})^⊥.
pub fn complement_projection(xi: &Direction, eta: &Direction) -> Result<SymMatrix> {
    let c = xi.along(eta.as_slice());
    if 1.0 - c.abs() < 1e-12 {
        return Err(Error::InvalidInput("degenerate frame: |ξᵀη| = 1".into()));
    }
    // orthonormal basis {ξ, η̃} of the span
    let t = vecops::axpy(eta.as_slice(), -c, xi.as_slice());
    let t = vecops::scale(&t, 1.0 / norm(&t));
    let x = xi.as_slice();
    Ok(SymMatrix::from_fn(xi.dim(), |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - x[i] * x[j] - t[i] * t[j]
    }))
}

/// Decomposes a = λξ + μη + Πa with Π the projection onto (span{ξ,η})^⊥.
pub fn frame_expand(a: &[f64], xi: &Direction, eta: &Direction, pi: &SymMatrix) -> Result<(f64, f64, Vec<f64>)> {
    check_len("frame_expand", a.len(), xi.dim())?;
    check_len("frame_expand", eta.dim(), xi.dim())?;
    let c = xi.along(eta.as_slice());
    let det = 1.0 - c * c;
    if det < 1e-12 {
        return Err(Error::InvalidInput("degenerate frame: |ξᵀη| = 1".into()));
    }
    let xa = xi.along(a);
    let ea = eta.along(a);
    let lambda = (xa - c * ea) / det;
    let mu = (ea - c * xa) / det;
    Ok((lambda, mu, pi.mul_vec(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hess_constructor_symmetrises_and_rejects() {
        let x = HessTensor::new(1, 2, vec![1.0, 2.0, 2.0 + 1e-12, 3.0]).unwrap();
        assert_eq!(x.get(0, 0, 1), x.get(0, 1, 0));
        assert!(matches!(HessTensor::new(1, 2, vec![1.0, 2.0, 2.1, 3.0]), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn determinant_form_values() {
        let d = BiForm::determinant_form();
        let p = GradMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        assert!((d.bilinear(&p, &p) - 2.0 * (5.0 - 6.0)).abs() < 1e-14);
        assert!(d.rank_one_value(&[0.3, -0.7], &[1.1, 0.2]).abs() < 1e-14);
    }

    #[test]
    fn direction_rejects_non_unit() {
        assert!(Direction::new(vec![1.0, 1.0]).is_err());
        assert!(Direction::normalized(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn dimension_caps() {
        assert!(GradMatrix::new(17, 1, vec![0.0; 17]).is_err());
        assert!(vee(&[1.0], &[1.0, 2.0]).is_err());
    }
}

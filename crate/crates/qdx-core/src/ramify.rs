//! Ramification z = z_r^r and its inverse constructions: the μ_r-averaging
//! projector, descent of μ_r-fixed classes through the Hilbert-90 averaging
//! trick, and the embedding of a ramified object into the restriction of an
//! unramified one.
//!
//! Throughout, τ is the Galois generator z_r ↦ ζ_r z_r of the cyclic
//! extension; it acts on series by exponent-wise roots of unity and
//! commutes with σ_q.

use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::formal::{t_matrix, z_matrix};
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::{LaurentSeries, QParams};
use crate::qdmod::BlockSystem;
use crate::rat::Rat;
use crate::C;

/// A system written in the ramified variable z_r over the base q_r.
#[derive(Clone, Debug)]
pub struct RamifiedSystem {
    pub r: u32,
    pub a_prime: LaurentMatrix,
    /// the unramified source, when the system came from one
    pub origin: Option<LaurentMatrix>,
}

/// Ram_r: substitute z = z_r^r in every entry; slopes multiply by r with
/// unchanged multiplicities.
pub fn ram(a: &BlockSystem, r: u32, qp: &QParams) -> Result<RamifiedSystem> {
    let source = a.to_laurent(qp);
    Ok(RamifiedSystem { r, a_prime: source.ramify(r), origin: Some(source) })
}

/// Newton data of the ramified system: slopes r·μ_i, multiplicities kept.
pub fn ram_newton(a: &BlockSystem, r: u32) -> Vec<(Rat, usize)> {
    a.newton()
        .slopes
        .iter()
        .zip(a.newton().mults)
        .map(|(s, m)| (s.mul_int(r as i64), m))
        .collect()
}

/// μ_r-averaging projector (1/r) Σ_j G(ζ_r^j z_r): kills every exponent not
/// divisible by r exactly, and reindexes the survivors in z.
pub fn mu_r_project(g: &LaurentMatrix, r: u32) -> LaurentMatrix {
    g.unramify_project(r)
}

/// Hilbert-90 style descent. Input: B over z_r with gauge G : B → τB in the
/// unipotent group of `shape`. The twisted products P_0 = I, P_{k+1} = (τP_k)·G
/// must close up (P_r = I); then H := (1/r)(P_0 + ⋯ + P_{r−1}) satisfies
/// H = (τH)·G, and C := H[B] is τ-invariant, i.e. a matrix in z.
/// Returns (C reindexed in z, H).
pub fn hilbert90_descend(
    b: &LaurentMatrix,
    g: &LaurentMatrix,
    r: u32,
    shape: &[usize],
    qp_r: &QParams,
) -> Result<(LaurentMatrix, LaurentMatrix)> {
    let n = b.rows();
    if g.rows() != n || g.cols() != n {
        return Err(Error::ShapeMismatch("gauge and system sizes differ".into()));
    }
    let scale = b.max_abs().max(1.0);
    // cocycle closure: the r-fold twisted product must be the identity
    let mut products = vec![LaurentMatrix::identity(n)];
    for _ in 0..r {
        let last = products.last().unwrap();
        products.push(last.galois_twist(r).mul(g));
    }
    let closure = products[r as usize].max_coeff_diff(&LaurentMatrix::identity(n));
    if closure > 1e-8 * scale {
        return Err(Error::CocycleNotClosed(closure));
    }
    let mut h = LaurentMatrix::zeros(n, n);
    for p in products.iter().take(r as usize) {
        h = h.add(p);
    }
    let h = h.scale(C::new(1.0 / r as f64, 0.0));
    // H = (τH)·G up to the closure defect
    let twist_res = h.galois_twist(r).mul(g).max_coeff_diff(&h);
    if twist_res > 1e-8 * scale {
        return Err(Error::DescentFailed(twist_res));
    }
    let h_inv = h.inverse_unipotent(shape)?;
    let c = h.sigma_q(qp_r).mul(b).mul(&h_inv);
    // τ-invariance: only exponents divisible by r may survive
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for (e, v) in c[(i, j)].terms() {
                if e.rem_euclid(r as i64) != 0 {
                    residual = residual.max(v.norm());
                }
            }
        }
    }
    if residual > 1e-9 * scale {
        return Err(Error::DescentFailed(residual));
    }
    Ok((c.unramify_project(r), h))
}

/// The embedding of a ramified object into a τ-invariant ambient system:
/// stack the Galois twists B = Diag(A', τA', …, τ^{r−1}A'), diagonalize the
/// cyclic permutation through the Fourier matrix, and absorb the remaining
/// τ-action with the monomial gauge Diag(1, z_r, …, z_r^{r−1}).
#[derive(Clone, Debug)]
pub struct Embedding {
    /// the ambient system, in the unramified variable z
    pub ambient: LaurentMatrix,
    /// the same matrix in z_r (exponents multiplied by r)
    pub ambient_in_zr: LaurentMatrix,
    /// the inclusion column map A' → ambient, over z_r
    pub inclusion: LaurentMatrix,
}

pub fn embed_in_restriction(a_prime: &LaurentMatrix, r: u32, qp_r: &QParams) -> Result<Embedding> {
    let n = a_prime.rows();
    if n != a_prime.cols() {
        return Err(Error::ShapeMismatch("system must be square".into()));
    }
    let nr = n * r as usize;
    // B := Diag(A', τA', …)
    let mut b = LaurentMatrix::zeros(nr, nr);
    let mut twist = a_prime.clone();
    for k in 0..r as usize {
        b.set_submatrix(k * n, k * n, &twist);
        twist = twist.galois_twist(r);
    }
    // conjugate by Z̄^{-1}: τ then acts diagonally
    let zbar = z_matrix(r).kron(&CMatrix::identity(n));
    let zbar_inv = zbar.inverse()?;
    let c = LaurentMatrix::mul_const_left(&zbar_inv, &b.mul_const_right(&zbar));
    // gauge by F̄ = Diag(z_r^k) ⊗ I
    let mut fbar = LaurentMatrix::zeros(nr, nr);
    for k in 0..r as usize {
        for i in 0..n {
            fbar[(k * n + i, k * n + i)] = LaurentSeries::monomial(k as i64, C::new(1.0, 0.0));
        }
    }
    let mut fbar_inv = LaurentMatrix::zeros(nr, nr);
    for k in 0..r as usize {
        for i in 0..n {
            fbar_inv[(k * n + i, k * n + i)] =
                LaurentSeries::monomial(-(k as i64), C::new(1.0, 0.0));
        }
    }
    let d = fbar.sigma_q(qp_r).mul(&c).mul(&fbar_inv);
    // exponents must be divisible by r, exactly
    for i in 0..nr {
        for j in 0..nr {
            for (e, v) in d[(i, j)].terms() {
                if e.rem_euclid(r as i64) != 0 && v.norm() > 1e-12 * d.max_abs() {
                    return Err(Error::DescentFailed(v.norm()));
                }
            }
        }
    }
    // inclusion: F̄ · Z̄^{-1} · ι with ι the first column block
    let mut iota = LaurentMatrix::zeros(nr, n);
    for i in 0..n {
        iota[(i, i)] = LaurentSeries::one();
    }
    let inclusion = fbar.mul(&LaurentMatrix::mul_const_left(&zbar_inv, &iota));
    Ok(Embedding { ambient: d.unramify_project(r), ambient_in_zr: d, inclusion })
}

/// τ-conjugation matrix of a diagonalized two-block pure system:
/// T = Diag(T_{r₁}^{d₁} ⊗ I_{m₁}, T_{r₂}^{d₂} ⊗ I_{m₂}).
pub fn tau_conjugator(r1: u32, d1: i64, m1: usize, r2: u32, d2: i64, m2: usize) -> Result<CMatrix> {
    let t1 = t_matrix(r1).pow_i(d1)?.kron(&CMatrix::identity(m1));
    let t2 = t_matrix(r2).pow_i(d2)?.kron(&CMatrix::identity(m2));
    let n = t1.rows() + t2.rows();
    let mut out = CMatrix::zeros(n, n);
    out.set_submatrix(0, 0, &t1);
    out.set_submatrix(t1.rows(), t1.rows(), &t2);
    Ok(out)
}

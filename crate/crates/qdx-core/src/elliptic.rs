//! Points of the elliptic curve E_q = C*/q^Z and the discrete machinery
//! living on it: canonical representatives in the fundamental annulus,
//! the characters γ₁/γ₂, δ-th root grids c_{l,m}, the index-shift function
//! ℓ(δ, β), and residues of q-invariant functions.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::numkernel::QParams;
use crate::C;

/// Tolerance for equality of canonical representatives.
pub const POINT_TOL: f64 = 1e-9;

/// A class c̄ ∈ E_q, held as its canonical representative with
/// 1 ≤ |rep| < |q_base|. `base_r` = 1 means the base is q itself,
/// otherwise the class lives on E_{q_r}.
#[derive(Clone, Copy, Debug)]
pub struct EllipticPoint {
    pub rep: C,
    pub base_r: u32,
}

impl EllipticPoint {
    pub fn eq_tol(&self, other: &EllipticPoint, tol: f64) -> bool {
        self.base_r == other.base_r && (self.rep - other.rep).norm() < tol
    }
}

/// Reduce c to the annulus 1 ≤ |c·q^{−k}| < |q| of the working base.
pub fn canonicalize(c: C, qp: &QParams) -> Result<EllipticPoint> {
    Ok(EllipticPoint { rep: canonical_rep(c, qp)?, base_r: qp.ram_index() })
}

pub fn canonical_rep(c: C, qp: &QParams) -> Result<C> {
    if c == C::new(0.0, 0.0) {
        return Err(Error::ZeroPoint);
    }
    let lq = qp.q().norm().ln();
    let mut k = (c.norm().ln() / lq).floor() as i64;
    let mut rep = c * qp.q_powi(-k);
    // guard the floating-point boundary
    if rep.norm() < 1.0 {
        k -= 1;
        rep = c * qp.q_powi(-k);
    } else if rep.norm() >= qp.q().norm() {
        k += 1;
        rep = c * qp.q_powi(-k);
    }
    Ok(rep)
}

/// Whether c and d represent the same class of E_q.
pub fn same_class(c: C, d: C, qp: &QParams, tol: f64) -> bool {
    match (canonical_rep(c, qp), canonical_rep(d, qp)) {
        (Ok(a), Ok(b)) => {
            // representatives near |rep| = 1 can land on either end of the annulus
            (a - b).norm() < tol
                || (a - b * qp.q()).norm() < tol * qp.q().norm()
                || (a * qp.q() - b).norm() < tol * qp.q().norm()
        }
        _ => false,
    }
}

/// γ₁(u q^y) = u and γ₂(u q^y) = e^{2iπy}, where c = u q^y with |u| = 1 and
/// y = log|c| / log|q| on the fixed branch. Both satisfy γ(q) = 1.
pub fn character_gamma(kind: u8, c: C, qp: &QParams) -> Result<C> {
    if c == C::new(0.0, 0.0) {
        return Err(Error::ZeroPoint);
    }
    let mut y = c.norm().ln() / qp.q().norm().ln();
    if y.abs() < 1e-14 {
        y = 0.0; // roots of unity sit exactly on |c| = 1
    }
    match kind {
        1 => Ok(c * qp.q_pow(-y)),
        2 => Ok((C::i() * TAU * y).exp()),
        _ => Err(Error::InvalidInput("character kind must be 1 or 2".into())),
    }
}

/// The grid of δ-th roots attached to a class β: d is the representative of
/// β^{-1} with d^{-1} in the fundamental annulus, c the unique δ-th root of
/// d with argument in (−2π/δ, 0], and c_{l,m} = ζ_δ^{−l} q_δ^{−m} c.
#[derive(Clone, Debug)]
pub struct RootGrid {
    pub delta: u32,
    pub d: C,
    pub c: C,
    /// grid[l][m] = c_{l,m}, l and m running over 0..δ
    pub grid: Vec<Vec<C>>,
}

impl RootGrid {
    pub fn point(&self, l: i64, m: i64) -> C {
        let d = self.delta as i64;
        self.grid[l.rem_euclid(d) as usize][m.rem_euclid(d) as usize]
    }

    /// Classes ᾱ_{l,m} flattened row by row.
    pub fn classes(&self, qp: &QParams) -> Vec<EllipticPoint> {
        let mut out = Vec::new();
        for row in &self.grid {
            for &c in row {
                out.push(canonicalize(c, qp).expect("grid points are nonzero"));
            }
        }
        out
    }
}

/// Distinguished δ-th root of d with argument in (−2π/δ, 0].
pub fn distinguished_root(d: C, delta: u32) -> C {
    let theta0 = d.arg(); // in (−π, π]
    let shift = if theta0 > 0.0 { -TAU } else { 0.0 };
    let a = (theta0 + shift) / delta as f64;
    C::from_polar(d.norm().powf(1.0 / delta as f64), a)
}

pub fn root_grid(delta: u32, beta: &EllipticPoint, qp: &QParams) -> RootGrid {
    assert!(delta >= 1);
    let d = 1.0 / beta.rep;
    let c = distinguished_root(d, delta);
    let zeta = QParams::zeta(delta);
    let q_delta = qp.q_root(delta);
    let mut grid = Vec::with_capacity(delta as usize);
    for l in 0..delta {
        let mut row = Vec::with_capacity(delta as usize);
        for m in 0..delta {
            row.push(zeta.powi(-(l as i32)) * q_delta.powi(-(m as i32)) * c);
        }
        grid.push(row);
    }
    RootGrid { delta, d, c, grid }
}

/// ℓ(δ, β) = ⌊φ/2π − δ/r⌋, with φ ∈ [0, 2π) the argument of the canonical
/// representative of β in the base-q_r annulus.
pub fn shift_ell(delta: u32, beta: &EllipticPoint, r: u32) -> i64 {
    let mut phi = beta.rep.arg();
    if phi < 0.0 {
        phi += TAU;
    }
    (phi / TAU - delta as f64 / r as f64).floor() as i64
}

/// Residue of a q-invariant meromorphic function at the class of c₀:
/// Res = (1/c₀) · res_{c=c₀}, with the ordinary residue computed by
/// trapezoidal sampling on a circle of radius ρ around c₀.
pub fn residue_on_eq(
    f: &mut dyn FnMut(C) -> Result<C>,
    c0: C,
    rho: f64,
    samples: usize,
) -> Result<C> {
    let mut rho = rho;
    for _attempt in 0..3 {
        match contour_residue(f, c0, rho, samples) {
            Ok(res) => return Ok(res / c0),
            Err(Error::PoleOnCircle(_)) => {
                rho *= 0.37;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::PoleOnCircle(rho))
}

fn contour_residue(
    f: &mut dyn FnMut(C) -> Result<C>,
    c0: C,
    rho: f64,
    samples: usize,
) -> Result<C> {
    let mut acc = C::new(0.0, 0.0);
    let mut max_val = 0.0f64;
    for k in 0..samples {
        let w = C::from_polar(rho, TAU * k as f64 / samples as f64);
        let v = f(c0 + w)?;
        max_val = max_val.max(v.norm());
        acc += v * w;
    }
    // a pole essentially on the circle makes the quadrature explode
    if !max_val.is_finite() || max_val > 1e14 * (acc.norm() / rho).max(1.0) {
        return Err(Error::PoleOnCircle(max_val));
    }
    Ok(acc / samples as f64)
}

//! The formal (pure) Galois group calculus: irreducible objects E(r,d,c),
//! unipotent factors U_m, the cyclic-shift / Fourier / character-diagonal
//! matrix formulaire, evaluation of group elements on pure objects, the
//! twisted multiplication law, the wild group, and the action on alien
//! symbols Ψ_l^(δ,β).

use std::f64::consts::TAU;

use crate::cmatrix::CMatrix;
use crate::elliptic::{canonicalize, character_gamma, root_grid, shift_ell, EllipticPoint};
use crate::error::{Error, Result};
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::{LaurentSeries, QParams};
use crate::rat::Rat;
use crate::C;

pub use crate::alien::{act_unramified_check, gamma2_bar, ActionKind};

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// D_r = Diag(1, ζ_r, …, ζ_r^{r−1}).
pub fn d_matrix(r: u32) -> CMatrix {
    let zeta = QParams::zeta(r);
    CMatrix::diag(&(0..r).map(|i| zeta.powi(i as i32)).collect::<Vec<_>>())
}

/// Cyclic permutation matrix with ones on the superdiagonal and in the
/// lower-left corner.
pub fn t_matrix(r: u32) -> CMatrix {
    let r = r as usize;
    CMatrix::from_fn(r, r, |i, j| {
        if j == (i + 1) % r { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }
    })
}

/// Z_r = (ζ_r^{−ij}), the Fourier-type conjugator with Z_r T_r Z_r^{-1} = D_r.
pub fn z_matrix(r: u32) -> CMatrix {
    let zeta = QParams::zeta(r);
    CMatrix::from_fn(r as usize, r as usize, |i, j| zeta.powi(-((i * j) as i32)))
}

/// Checks the identities tying D_r, T_r and Z_r together and returns the
/// worst deviation over all of them.
#[derive(Clone, Debug)]
pub struct FormulaireReport {
    pub r: u32,
    pub items: Vec<(String, f64)>,
    pub max_deviation: f64,
}

pub fn formulaire_check(r: u32) -> FormulaireReport {
    let d = d_matrix(r);
    let t = t_matrix(r);
    let z = z_matrix(r);
    let zeta = QParams::zeta(r);
    let mut items = Vec::new();

    let zinv = z.inverse().expect("Z_r is invertible");
    let dev1 = zinv.sub(&z.conj().scale(C::new(1.0 / r as f64, 0.0))).max_abs();
    items.push(("Z^{-1} = (1/r) conj(Z)".into(), dev1));
    let dev1b = z.sub(&z.transpose()).max_abs();
    items.push(("Z = transpose(Z)".into(), dev1b));

    let dev2 = d.inverse().expect("D_r invertible").sub(&d.conj()).max_abs();
    items.push(("D^{-1} = conj(D)".into(), dev2));

    let mut dev3 = 0.0f64;
    for k in -3i64..=3 {
        for l in -3i64..=3 {
            let tk = t.pow_i(k).unwrap();
            let dl = d.pow_i(l).unwrap();
            let lhs = tk.mul(&dl);
            let rhs = dl.mul(&tk).scale(zeta.powi((k * l).rem_euclid(r as i64) as i32));
            dev3 = dev3.max(lhs.sub(&rhs).max_abs());
        }
    }
    items.push(("T^k D^l = ζ^{kl} D^l T^k".into(), dev3));

    let dev4a = z.mul(&t).mul(&zinv).sub(&d).max_abs();
    let dev4b = z.mul(&d.inverse().unwrap()).mul(&zinv).sub(&t).max_abs();
    items.push(("Z T Z^{-1} = D".into(), dev4a));
    items.push(("Z D^{-1} Z^{-1} = T".into(), dev4b));

    let max_deviation = items.iter().map(|i| i.1).fold(0.0, f64::max);
    FormulaireReport { r, items, max_deviation }
}

/// The standard irreducible pure object of slope d/r: companion-type matrix
/// with ones on the superdiagonal and u = q^{d(r−1)/2} c z^d in the corner.
#[derive(Clone, Debug)]
pub struct IrreducibleObject {
    pub r: u32,
    pub d: i64,
    pub c: C,
    /// fixed r-th root of c, principal by default
    pub a: C,
}

impl IrreducibleObject {
    pub fn new(r: u32, d: i64, c: C) -> Result<Self> {
        if r == 0 || c == C::new(0.0, 0.0) {
            return Err(Error::InvalidInput("need r ≥ 1 and c ≠ 0".into()));
        }
        if gcd(d, r as i64) != 1 {
            return Err(Error::InvalidInput(format!("gcd({d}, {r}) must be 1")));
        }
        let a = (c.ln() / r as f64).exp();
        Ok(IrreducibleObject { r, d, c, a })
    }

    pub fn slope(&self) -> Rat {
        Rat::new(self.d, self.r as i64)
    }

    pub fn size(&self) -> usize {
        self.r as usize
    }

    /// E(r,d,c) as a matrix over C[z, z^{-1}].
    pub fn matrix(&self, qp: &QParams) -> LaurentMatrix {
        let r = self.r as usize;
        let u = qp.q_pow(self.d as f64 * (self.r as f64 - 1.0) / 2.0) * self.c;
        let mut m = LaurentMatrix::zeros(r, r);
        for i in 0..r.saturating_sub(1) {
            m[(i, i + 1)] = LaurentSeries::one();
        }
        if r == 1 {
            m[(0, 0)] = LaurentSeries::monomial(self.d, u);
        } else {
            m[(r - 1, 0)] = LaurentSeries::monomial(self.d, u);
        }
        m
    }

    /// Conjugators G, F over the ramified base: diagonal G with entries
    /// g_j = q^{−j(j−1)d/2r} a^{−j} z_r^{−jd}, and F = Z_r G, satisfying
    /// G[E] = a z_r^d T_r and F[E] = a z_r^d D_r in the base q_r.
    pub fn conjugators(&self, qp: &QParams) -> (LaurentMatrix, LaurentMatrix) {
        let r = self.r;
        let mut g = LaurentMatrix::zeros(r as usize, r as usize);
        for j in 0..r as i64 {
            let coeff = qp.q_pow(-(j * (j - 1)) as f64 * self.d as f64 / (2.0 * r as f64))
                * self.a.powi(-(j as i32));
            g[(j as usize, j as usize)] = LaurentSeries::monomial(-j * self.d, coeff);
        }
        let f = LaurentMatrix::mul_const_left(&z_matrix(r), &g);
        (g, f)
    }

    /// G and F evaluated at the base-point root z_{0,r}.
    pub fn conjugators_at_base_point(&self, qp: &QParams) -> Result<(CMatrix, CMatrix)> {
        let (g, f) = self.conjugators(qp);
        let z0r = qp.z0_root(self.r);
        Ok((g.evaluate(z0r)?, f.evaluate(z0r)?))
    }

    /// Target of G: the diagonalized form a z_r^d T_r (as a matrix in z_r).
    pub fn twisted_shift_form(&self) -> LaurentMatrix {
        LaurentMatrix::monomial_times(self.d, &t_matrix(self.r).scale(self.a))
    }

    /// Target of F: the diagonal form a z_r^d D_r (as a matrix in z_r).
    pub fn diagonal_form(&self) -> LaurentMatrix {
        LaurentMatrix::monomial_times(self.d, &d_matrix(self.r).scale(self.a))
    }
}

/// Standard unipotent Jordan block U_m (ones on the diagonal and the
/// superdiagonal).
pub fn unipotent_jordan(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, j| {
        if j == i || j == i + 1 { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }
    })
}

/// U_m^λ = Σ_k binom(λ, k) N^k with N the nilpotent part; exact polynomial
/// in λ.
pub fn u_power(m: usize, lambda: C) -> CMatrix {
    let n = unipotent_jordan(m).sub(&CMatrix::identity(m));
    let mut acc = CMatrix::identity(m);
    let mut term = CMatrix::identity(m);
    let mut binom = C::new(1.0, 0.0);
    for k in 1..m {
        binom *= (lambda - (k as f64 - 1.0)) / k as f64;
        term = term.mul(&n);
        acc = acc.add(&term.scale(binom));
    }
    acc
}

/// An element of the pure group, coded as (λ, t, k₁, k₂):
/// λ the unipotent exponent, t = h(1/r) ∈ C* the theta-torus value, and
/// (k₁, k₂) the exponents of the dense character lattice γ₁^{k₁} γ₂^{k₂}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormalElement {
    pub lambda: C,
    pub t: C,
    pub k1: i64,
    pub k2: i64,
}

impl FormalElement {
    pub fn identity() -> Self {
        FormalElement { lambda: C::new(0.0, 0.0), t: C::new(1.0, 0.0), k1: 0, k2: 0 }
    }

    pub fn theta_torus(t: C) -> Self {
        FormalElement { t, ..Self::identity() }
    }

    pub fn gamma1() -> Self {
        FormalElement { k1: 1, ..Self::identity() }
    }

    pub fn gamma2() -> Self {
        FormalElement { k2: 1, ..Self::identity() }
    }

    pub fn unipotent(lambda: C) -> Self {
        FormalElement { lambda, ..Self::identity() }
    }
}

/// Twisted multiplication: (λ,h,γ) ⋆ (λ',h',γ') = (λ+λ', h h' ε(γ,γ'), γγ')
/// with ε evaluated on the generator lattice as ζ_r^{−k₂ k₁'}.
pub fn multiply(phi: &FormalElement, psi: &FormalElement, r: u32) -> FormalElement {
    let zeta = QParams::zeta(r);
    let twist = zeta.powi(-(phi.k2 * psi.k1).rem_euclid(r as i64) as i32);
    FormalElement {
        lambda: phi.lambda + psi.lambda,
        t: phi.t * psi.t * twist,
        k1: phi.k1 + psi.k1,
        k2: phi.k2 + psi.k2,
    }
}

/// η(γ₁^{k₁}γ₂^{k₂}, γ₁^{l₁}γ₂^{l₂}) = ζ_r^{−k₂ l₁}, the cocycle of the
/// central extension, evaluated at 1/r.
pub fn eta(k: (i64, i64), l: (i64, i64), r: u32) -> C {
    QParams::zeta(r).powi(-(k.1 * l.0).rem_euclid(r as i64) as i32)
}

/// φ(E(r,d,c) ⊗ U_m) = φ(E) ⊗ U_m^λ with
/// φ(E) = h(d/r) γ(a) G₀^{-1} T_r^{k₁} D_r^{k₂ d} G₀.
///
/// The value t codes the theta-torus element through t = h(1/session_r),
/// so on an object of inner denominator r | session_r the scalar is
/// h(d/r) = t^{d · session_r/r}. Calls with session_r = obj.r recover the
/// plain convention t^d.
pub fn evaluate_element(
    phi: &FormalElement,
    obj: &IrreducibleObject,
    m: usize,
    session_r: u32,
    qp: &QParams,
) -> Result<CMatrix> {
    if session_r % obj.r != 0 {
        return Err(Error::InvalidInput(format!(
            "object denominator {} must divide the session denominator {session_r}",
            obj.r
        )));
    }
    let (g0, _f0) = obj.conjugators_at_base_point(qp)?;
    let h_val = phi.t.powi((obj.d * (session_r / obj.r) as i64) as i32);
    let g1a = character_gamma(1, obj.a, qp)?.powi(phi.k1 as i32);
    let g2a = character_gamma(2, obj.a, qp)?.powi(phi.k2 as i32);
    let core = t_matrix(obj.r)
        .pow_i(phi.k1)?
        .mul(&d_matrix(obj.r).pow_i(phi.k2 * obj.d)?);
    let phi_e = g0.inverse()?.mul(&core).mul(&g0).scale(h_val * g1a * g2a);
    Ok(phi_e.kron(&u_power(m, phi.lambda)))
}

/// Element of the wild group: (x mod 1, k₁, k₂) with the law
/// (x,k₁,k₂) * (y,l₁,l₂) = (x + y − k₂l₁/r mod 1, k₁+l₁, k₂+l₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WildGroupElement {
    pub x: Rat,
    pub k1: i64,
    pub k2: i64,
}

impl WildGroupElement {
    pub fn new(x: Rat, k1: i64, k2: i64) -> Self {
        WildGroupElement { x: x.mod_one(), k1, k2 }
    }

    pub fn identity() -> Self {
        WildGroupElement { x: Rat::zero(), k1: 0, k2: 0 }
    }
}

pub fn wild_multiply(g: &WildGroupElement, h: &WildGroupElement, r: u32) -> WildGroupElement {
    let twist = Rat::new(g.k2 * h.k1, r as i64);
    WildGroupElement {
        x: g.x.add(&h.x).sub(&twist).mod_one(),
        k1: g.k1 + h.k1,
        k2: g.k2 + h.k2,
    }
}

/// A basis symbol of the graded Lie algebra of alien derivatives, with a
/// complex coefficient: either the log-degree symbol Ψ^(0), or a graded
/// symbol Ψ_l^(δ,β) with β ∈ E_{q_r} and l counted mod δ.
#[derive(Clone, Debug)]
pub enum PsiKind {
    Tau,
    Graded { delta: u32, beta: EllipticPoint, l: i64 },
}

#[derive(Clone, Debug)]
pub struct PsiSymbol {
    pub kind: PsiKind,
    pub coeff: C,
}

impl PsiSymbol {
    pub fn tau() -> Self {
        PsiSymbol { kind: PsiKind::Tau, coeff: C::new(1.0, 0.0) }
    }

    pub fn graded(delta: u32, beta: EllipticPoint, l: i64) -> Self {
        PsiSymbol {
            kind: PsiKind::Graded { delta, beta, l: l.rem_euclid(delta as i64) },
            coeff: C::new(1.0, 0.0),
        }
    }

    pub fn eq_tol(&self, other: &PsiSymbol, tol: f64) -> bool {
        if (self.coeff - other.coeff).norm() > tol {
            return false;
        }
        match (&self.kind, &other.kind) {
            (PsiKind::Tau, PsiKind::Tau) => true,
            (
                PsiKind::Graded { delta, beta, l },
                PsiKind::Graded { delta: d2, beta: b2, l: l2 },
            ) => delta == d2 && l == l2 && beta.eq_tol(b2, 1e-7),
            _ => false,
        }
    }
}

/// One generator of the wild group acting on symbols.
#[derive(Clone, Copy, Debug)]
pub enum GeneratorAction {
    /// theta-torus element h with h(1/r) = t; multiplies Ψ_l^(δ,β) by t^δ
    Theta(C),
    /// torsion part (x, 0, 0); multiplies Ψ_l^(δ,β) by e^{2iπδx}
    Torsion(Rat),
    /// γ₁: multiplies by γ₁(β)
    Gamma1,
    /// γ₂: scalar γ₂(c_l^{-1})^δ, index shift l → l + ℓ(δ,β), β → ζ_r^{−δ}β
    Gamma2,
    /// inverse of the γ₂ action
    Gamma2Inv,
}

/// Action of a single generator on a symbol. The γ₂ scalar is
/// γ₂(c_l^{−1})^δ: the δ-th power, forced by the matrix side of the
/// calculus (the δ = 1 printed form does not reproduce the conjugation
/// action, already for unramified classes with δ > 1).
pub fn act_on_psi(g: &GeneratorAction, sym: &PsiSymbol, r: u32, qp: &QParams) -> Result<PsiSymbol> {
    let (delta, beta, l) = match &sym.kind {
        // the log symbol is fixed by the whole pure group
        PsiKind::Tau => return Ok(sym.clone()),
        PsiKind::Graded { delta, beta, l } => (*delta, *beta, *l),
    };
    let qpr = qp.ramified(r);
    let zeta_r = QParams::zeta(r);
    match g {
        GeneratorAction::Theta(t) => Ok(PsiSymbol {
            kind: sym.kind.clone(),
            coeff: sym.coeff * t.powi(delta as i32),
        }),
        GeneratorAction::Torsion(x) => {
            let phase = (C::i() * TAU * (delta as f64) * x.as_f64()).exp();
            Ok(PsiSymbol { kind: sym.kind.clone(), coeff: sym.coeff * phase })
        }
        GeneratorAction::Gamma1 => {
            let s = character_gamma(1, beta.rep, qp)?;
            Ok(PsiSymbol { kind: sym.kind.clone(), coeff: sym.coeff * s })
        }
        GeneratorAction::Gamma2 => {
            let grid = root_grid(delta, &beta, &qpr);
            let c_l = grid.point(l, 0);
            let s = character_gamma(2, 1.0 / c_l, qp)?.powi(delta as i32);
            let ell = shift_ell(delta, &beta, r);
            let beta_new = canonicalize(zeta_r.powi(-(delta as i32)) * beta.rep, &qpr)?;
            Ok(PsiSymbol {
                kind: PsiKind::Graded {
                    delta,
                    beta: beta_new,
                    l: (l + ell).rem_euclid(delta as i64),
                },
                coeff: sym.coeff * s,
            })
        }
        GeneratorAction::Gamma2Inv => {
            let beta_old = canonicalize(zeta_r.powi(delta as i32) * beta.rep, &qpr)?;
            let ell = shift_ell(delta, &beta_old, r);
            let l_old = (l - ell).rem_euclid(delta as i64);
            let grid = root_grid(delta, &beta_old, &qpr);
            let c_l = grid.point(l_old, 0);
            let s = character_gamma(2, 1.0 / c_l, qp)?.powi(delta as i32);
            Ok(PsiSymbol {
                kind: PsiKind::Graded { delta, beta: beta_old, l: l_old },
                coeff: sym.coeff / s,
            })
        }
    }
}

/// Action of a full wild-group element, decomposed through the canonical
/// word (x,0,0)·(0,1,0)^{k₁}·(0,0,1)^{k₂}. This is a right action:
/// acting by g then by h equals acting by g * h.
pub fn act_wild(g: &WildGroupElement, sym: &PsiSymbol, r: u32, qp: &QParams) -> Result<PsiSymbol> {
    let mut s = act_on_psi(&GeneratorAction::Torsion(g.x), sym, r, qp)?;
    if g.k1 != 0 {
        if let PsiKind::Graded { beta, .. } = &s.kind {
            let scalar = character_gamma(1, beta.rep, qp)?.powi(g.k1 as i32);
            s.coeff *= scalar;
        }
    }
    let step = if g.k2 >= 0 { GeneratorAction::Gamma2 } else { GeneratorAction::Gamma2Inv };
    for _ in 0..g.k2.unsigned_abs() {
        s = act_on_psi(&step, &s, r, qp)?;
    }
    Ok(s)
}

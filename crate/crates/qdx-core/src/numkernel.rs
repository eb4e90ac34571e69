//! Global q-parameters and truncated two-sided Laurent arithmetic.
//!
//! The base of the calculus is a complex q with |q| > 1, fixed through a
//! choice of τ with q = e^{2iπτ}. All fractional powers of q are taken with
//! the branch q^x := e^{2iπτx}, so the roots q_r := q^{1/r} automatically
//! satisfy the coherence rule q_{rs}^s = q_r. Base-point roots z_{0,r} are
//! chosen the same way from a principal logarithm of z₀.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::C;

/// Widest window a series is allowed to occupy after arithmetic.
pub const MAX_WINDOW_WIDTH: i64 = 8192;

/// Relative threshold below which coefficients are pruned after arithmetic.
pub const PRUNE_REL: f64 = 1e-15;

/// Default symmetric window for generic constructions.
pub const DEFAULT_WINDOW: (i64, i64) = (-60, 60);

/// The fixed q-data: τ, the derived q, the current ramification index and
/// the base point z₀ with its coherent roots.
#[derive(Clone, Debug)]
pub struct QParams {
    tau: C,
    q: C,
    r: u32,
    z0: C,
    log_z0: C,
}

impl QParams {
    /// Build from τ; q = e^{2iπτ} must satisfy |q| > 1.
    pub fn new(tau: C, r: u32, z0: C) -> Result<Self> {
        let q = (C::i() * TAU * tau).exp();
        if q.norm() <= 1.0 {
            return Err(Error::QModulusNotExpanding(q.norm()));
        }
        if z0 == C::new(0.0, 0.0) {
            return Err(Error::ZeroPoint);
        }
        if r == 0 {
            return Err(Error::InvalidInput("ramification index must be positive".into()));
        }
        Ok(QParams { tau, q, r, z0, log_z0: z0.ln() })
    }

    /// Build from q directly; τ is the principal choice log(q)/(2iπ).
    pub fn from_q(q: C, r: u32, z0: C) -> Result<Self> {
        if q.norm() <= 1.0 {
            return Err(Error::QModulusNotExpanding(q.norm()));
        }
        let tau = q.ln() / (C::i() * TAU);
        Self::new(tau, r, z0)
    }

    pub fn tau(&self) -> C {
        self.tau
    }

    pub fn q(&self) -> C {
        self.q
    }

    pub fn ram_index(&self) -> u32 {
        self.r
    }

    pub fn z0(&self) -> C {
        self.z0
    }

    /// q^x := e^{2iπτx} on the fixed branch.
    pub fn q_pow(&self, x: f64) -> C {
        (C::i() * TAU * self.tau * x).exp()
    }

    /// Integer power of q by repeated squaring.
    pub fn q_powi(&self, m: i64) -> C {
        let mut base = if m < 0 { 1.0 / self.q } else { self.q };
        let mut e = m.unsigned_abs();
        let mut acc = C::new(1.0, 0.0);
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// The coherent root q_r = q^{1/r}.
    pub fn q_root(&self, r: u32) -> C {
        self.q_pow(1.0 / r as f64)
    }

    /// ζ_r = e^{2iπ/r}.
    pub fn zeta(r: u32) -> C {
        (C::i() * TAU / r as f64).exp()
    }

    /// Coherent root z_{0,r} of the base point: e^{log(z₀)/r}.
    pub fn z0_root(&self, r: u32) -> C {
        (self.log_z0 / r as f64).exp()
    }

    /// Parameters of the ramified base q_r: τ/r with base point z_{0,r}.
    /// The ramification index accumulates so classes stay tagged with the
    /// base they live on.
    pub fn ramified(&self, r: u32) -> QParams {
        QParams {
            tau: self.tau / r as f64,
            q: self.q_root(r),
            r: self.r * r,
            z0: self.z0_root(r),
            log_z0: self.log_z0 / r as f64,
        }
    }
}

/// Truncated two-sided power series Σ f_m z^m with an explicit exponent
/// window. Coefficients outside the window are treated as absent.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentSeries {
    coeffs: BTreeMap<i64, C>,
    lo: i64,
    hi: i64,
}

impl LaurentSeries {
    pub fn zero(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "window must be ordered");
        LaurentSeries { coeffs: BTreeMap::new(), lo, hi }
    }

    pub fn constant(c: C) -> Self {
        let mut s = Self::zero(0, 0);
        s.set(0, c);
        s
    }

    pub fn one() -> Self {
        Self::constant(C::new(1.0, 0.0))
    }

    /// c · z^n.
    pub fn monomial(n: i64, c: C) -> Self {
        let mut s = Self::zero(n, n);
        s.set(n, c);
        s
    }

    pub fn from_terms(terms: &[(i64, C)]) -> Self {
        let lo = terms.iter().map(|t| t.0).min().unwrap_or(0);
        let hi = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let mut s = Self::zero(lo, hi);
        for &(e, c) in terms {
            let v = s.coeff(e) + c;
            s.set(e, v);
        }
        s
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn coeff(&self, e: i64) -> C {
        self.coeffs.get(&e).copied().unwrap_or(C::new(0.0, 0.0))
    }

    pub fn set(&mut self, e: i64, c: C) {
        self.lo = self.lo.min(e);
        self.hi = self.hi.max(e);
        if c == C::new(0.0, 0.0) {
            self.coeffs.remove(&e);
        } else {
            self.coeffs.insert(e, c);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, C)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }

    pub fn support(&self) -> Vec<i64> {
        self.coeffs.keys().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drop coefficients below `PRUNE_REL` relative to the largest one.
    pub fn prune(&mut self) {
        let m = self.max_abs();
        if m == 0.0 {
            return;
        }
        let cut = PRUNE_REL * m;
        self.coeffs.retain(|_, c| c.norm() >= cut);
    }

    pub fn truncate(&self, lo: i64, hi: i64) -> Self {
        let mut s = Self::zero(lo, hi);
        for (&e, &c) in self.coeffs.range(lo..=hi) {
            s.coeffs.insert(e, c);
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut s = Self::zero(self.lo.min(other.lo), self.hi.max(other.hi));
        for (e, c) in self.terms() {
            s.set(e, c);
        }
        for (e, c) in other.terms() {
            let v = s.coeff(e) + c;
            s.set(e, v);
        }
        s
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C) -> Self {
        let mut out = Self::zero(self.lo, self.hi);
        if s == C::new(0.0, 0.0) {
            return out;
        }
        for (e, c) in self.terms() {
            out.coeffs.insert(e, s * c);
        }
        out
    }

    /// Multiply by z^n.
    pub fn shift(&self, n: i64) -> Self {
        let mut out = Self::zero(self.lo + n, self.hi + n);
        for (e, c) in self.terms() {
            out.coeffs.insert(e + n, c);
        }
        out
    }

    /// Product with window [lo₁+lo₂, hi₁+hi₂], clipped to `MAX_WINDOW_WIDTH`
    /// by shrinking the end farthest from zero.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.mul_full(other);
        out.prune();
        out
    }

    /// Product without the relative pruning pass; used where coefficients of
    /// very different magnitudes must all survive (theta coefficient tables).
    pub fn mul_full(&self, other: &Self) -> Self {
        let (mut lo, mut hi) = (self.lo + other.lo, self.hi + other.hi);
        while hi - lo + 1 > MAX_WINDOW_WIDTH {
            if hi.abs() > lo.abs() {
                hi -= 1;
            } else {
                lo += 1;
            }
        }
        let mut out = Self::zero(lo, hi);
        for (e1, c1) in self.terms() {
            for (e2, c2) in other.terms() {
                let e = e1 + e2;
                if e < lo || e > hi {
                    continue;
                }
                let v = out.coeff(e) + c1 * c2;
                out.set(e, v);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// (σ_q f)(z) = f(qz): the coefficient at z^m becomes q^m f_m.
    pub fn sigma_q(&self, qp: &QParams) -> Self {
        let mut out = Self::zero(self.lo, self.hi);
        for (e, c) in self.terms() {
            out.coeffs.insert(e, qp.q_powi(e) * c);
        }
        out
    }

    /// Inverse dilation f(z/q); used to undo σ_q exactly.
    pub fn sigma_q_inv(&self, qp: &QParams) -> Self {
        let mut out = Self::zero(self.lo, self.hi);
        for (e, c) in self.terms() {
            out.coeffs.insert(e, qp.q_powi(-e) * c);
        }
        out
    }

    /// f^λ(z) := f(λz); λ = q recovers σ_q.
    pub fn dilate(&self, lambda: C) -> Result<Self> {
        if lambda == C::new(0.0, 0.0) {
            return Err(Error::ZeroDilation);
        }
        let mut out = Self::zero(self.lo, self.hi);
        let inv = 1.0 / lambda;
        // walk outward from 0 so powers stay cheap and accurate
        let mut pow_cache: BTreeMap<i64, C> = BTreeMap::new();
        let mut lam_pow = |e: i64| -> C {
            *pow_cache.entry(e).or_insert_with(|| {
                let mut acc = C::new(1.0, 0.0);
                let b = if e < 0 { inv } else { lambda };
                for _ in 0..e.unsigned_abs() {
                    acc *= b;
                }
                acc
            })
        };
        for (e, c) in self.terms() {
            out.coeffs.insert(e, lam_pow(e) * c);
        }
        Ok(out)
    }

    /// Substitute z = w^r: the exponent m maps to r·m in the new variable.
    pub fn ramify(&self, r: u32) -> Self {
        let r = r as i64;
        let mut out = Self::zero(self.lo * r, self.hi * r);
        for (e, c) in self.terms() {
            out.coeffs.insert(e * r, c);
        }
        out
    }

    /// Keep only exponents divisible by r and reindex them by e/r.
    /// This is the μ_r-averaging projector (1/r) Σ_j f(ζ_r^j w), written
    /// directly on exponents, followed by the variable change w^r = z.
    pub fn unramify_project(&self, r: u32) -> Self {
        let r = r as i64;
        let mut out = Self::zero(self.lo.div_euclid(r), self.hi.div_euclid(r));
        for (e, c) in self.terms() {
            if e.rem_euclid(r) == 0 {
                out.set(e / r, c);
            }
        }
        out
    }

    /// Exponents not divisible by r are zeroed, no reindexing.
    pub fn mu_r_average(&self, r: u32) -> Self {
        let r = r as i64;
        let mut out = Self::zero(self.lo, self.hi);
        for (e, c) in self.terms() {
            if e.rem_euclid(r) == 0 {
                out.set(e, c);
            }
        }
        out
    }

    /// Coefficientwise action of the Galois generator w ↦ ζ_r w.
    pub fn galois_twist(&self, r: u32) -> Self {
        let zeta = QParams::zeta(r);
        let mut out = Self::zero(self.lo, self.hi);
        for (e, c) in self.terms() {
            out.coeffs.insert(e, zeta.powi(e.rem_euclid(r as i64) as i32) * c);
        }
        out
    }

    /// Σ f_m c^m over the stored window.
    pub fn evaluate(&self, c: C) -> Result<C> {
        if c == C::new(0.0, 0.0) {
            return Err(Error::ZeroEvaluationPoint);
        }
        let mut acc = C::new(0.0, 0.0);
        let inv = 1.0 / c;
        for (e, v) in self.terms() {
            let p = if e >= 0 { pow_c(c, e) } else { pow_c(inv, -e) };
            acc += v * p;
        }
        Ok(acc)
    }

    /// max |f_m − g_m| over the union of supports.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut m = 0.0f64;
        for (e, c) in self.terms() {
            m = m.max((c - other.coeff(e)).norm());
        }
        for (e, c) in other.terms() {
            m = m.max((c - self.coeff(e)).norm());
        }
        m
    }
}

fn pow_c(base: C, e: i64) -> C {
    debug_assert!(e >= 0);
    let mut acc = C::new(1.0, 0.0);
    let mut b = base;
    let mut e = e as u64;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Convenience alias for the free operations of this module.
pub fn sigma_q(f: &LaurentSeries, qp: &QParams) -> LaurentSeries {
    f.sigma_q(qp)
}

pub fn dilate(f: &LaurentSeries, lambda: C) -> Result<LaurentSeries> {
    f.dilate(lambda)
}

pub fn ramify_series(f: &LaurentSeries, r: u32) -> LaurentSeries {
    f.ramify(r)
}

pub fn evaluate(f: &LaurentSeries, c: C) -> Result<C> {
    f.evaluate(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn qp4() -> QParams {
        QParams::from_q(C::new(4.0, 0.0), 1, C::new(1.31, 0.47)).unwrap()
    }

    fn random_series(rng: &mut Rng, lo: i64, hi: i64) -> LaurentSeries {
        let mut f = LaurentSeries::zero(lo, hi);
        for e in lo..=hi {
            f.set(e, C::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)));
        }
        f
    }

    #[test]
    fn rejects_contracting_q() {
        assert!(QParams::from_q(C::new(0.5, 0.0), 1, C::new(1.0, 0.0)).is_err());
        // τ = +0.22i gives |q| < 1 under q = e^{2iπτ}
        assert!(QParams::new(C::new(0.0, 0.22), 1, C::new(1.0, 0.0)).is_err());
        assert!(QParams::new(C::new(0.0, -0.22), 1, C::new(1.0, 0.0)).is_ok());
    }

    #[test]
    fn coherent_roots() {
        let qp = QParams::from_q(C::new(2.0, 1.0), 1, C::new(1.2, 0.3)).unwrap();
        for r in 1..=6u32 {
            for s in 1..=6u32 {
                let lhs = pow_c(qp.q_root(r * s), s as i64);
                assert!((lhs - qp.q_root(r)).norm() < 1e-12, "q_{{rs}}^s = q_r failed");
                let z = pow_c(qp.z0_root(r * s), s as i64);
                assert!((z - qp.z0_root(r)).norm() < 1e-12, "z0 root coherence failed");
            }
        }
        let q2 = qp.q_root(2);
        assert!((q2 * q2 - qp.q()).norm() < 1e-12);
    }

    #[test]
    fn sigma_q_basics() {
        let qp = qp4();
        let one = LaurentSeries::one();
        assert_eq!(one.sigma_q(&qp), one);
        let z = LaurentSeries::monomial(1, C::new(1.0, 0.0));
        let sz = z.sigma_q(&qp);
        assert!((sz.coeff(1) - C::new(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dilation_rules() {
        let qp = qp4();
        let mut rng = Rng::new(7);
        let f = random_series(&mut rng, -5, 5);
        assert!(f.dilate(C::new(1.0, 0.0)).unwrap().max_coeff_diff(&f) < 1e-15);
        // f^q = σ_q f
        let a = f.dilate(qp.q()).unwrap();
        let b = f.sigma_q(&qp);
        assert!(a.max_coeff_diff(&b) < 1e-12);
        // dilate(z², 3) = 9 z²
        let z2 = LaurentSeries::monomial(2, C::new(1.0, 0.0));
        let d = z2.dilate(C::new(3.0, 0.0)).unwrap();
        assert!((d.coeff(2) - C::new(9.0, 0.0)).norm() < 1e-14);
        // composition: dilate twice = dilate by the product
        let l1 = C::new(0.7, 0.2);
        let l2 = C::new(-1.1, 0.4);
        let lhs = f.dilate(l1).unwrap().dilate(l2).unwrap();
        let rhs = f.dilate(l1 * l2).unwrap();
        assert!(lhs.max_coeff_diff(&rhs) < 1e-13 * rhs.max_abs().max(1.0));
        assert!(f.dilate(C::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn sigma_q_is_multiplicative() {
        let qp = qp4();
        let mut rng = Rng::new(11);
        let f = random_series(&mut rng, -4, 4);
        let g = random_series(&mut rng, -3, 6);
        let lhs = f.mul(&g).sigma_q(&qp);
        let rhs = f.sigma_q(&qp).mul(&g.sigma_q(&qp));
        assert!(lhs.max_coeff_diff(&rhs) < 1e-10 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn ramify_is_substitution() {
        let z = LaurentSeries::monomial(1, C::new(1.0, 0.0));
        let r2 = z.ramify(2);
        assert_eq!(r2.support(), vec![2]);
        let f = LaurentSeries::from_terms(&[(0, C::new(1.0, 0.0)), (-1, C::new(1.0, 0.0))]);
        let r3 = f.ramify(3);
        assert_eq!(r3.support(), vec![-3, 0]);

        // evaluate(ramify(f, r), c) = evaluate(f, c^r) on random points
        let mut rng = Rng::new(3);
        for _ in 0..20 {
            let g = random_series(&mut rng, -6, 6);
            let r = rng.int(1, 4) as u32;
            let c = rng.annulus(0.5, 1.8);
            let lhs = g.ramify(r).evaluate(c).unwrap();
            let rhs = g.evaluate(pow_c(c, r as i64)).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn ramify_is_a_ring_morphism() {
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let f = random_series(&mut rng, -4, 4);
            let g = random_series(&mut rng, -2, 5);
            let r = rng.int(2, 4) as u32;
            assert!(f.add(&g).ramify(r).max_coeff_diff(&f.ramify(r).add(&g.ramify(r))) == 0.0);
            let lhs = f.mul(&g).ramify(r);
            let rhs = f.ramify(r).mul(&g.ramify(r));
            assert!(lhs.max_coeff_diff(&rhs) < 1e-13 * rhs.max_abs().max(1.0));
        }
    }

    #[test]
    fn evaluation() {
        let f = LaurentSeries::from_terms(&[(0, C::new(1.0, 0.0)), (1, C::new(1.0, 0.0))]);
        assert!((f.evaluate(C::new(2.0, 0.0)).unwrap() - C::new(3.0, 0.0)).norm() < 1e-15);
        let zi = LaurentSeries::monomial(-1, C::new(1.0, 0.0));
        assert!((zi.evaluate(C::new(2.0, 0.0)).unwrap() - C::new(0.5, 0.0)).norm() < 1e-15);
        assert!(zi.evaluate(C::new(0.0, 0.0)).is_err());

        // evaluate(σ_q f, c) = evaluate(f, qc)
        let qp = qp4();
        let mut rng = Rng::new(9);
        for _ in 0..20 {
            let g = random_series(&mut rng, -5, 5);
            let c = rng.annulus(0.4, 2.0);
            let lhs = g.sigma_q(&qp).evaluate(c).unwrap();
            let rhs = g.evaluate(qp.q() * c).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }
    }
}

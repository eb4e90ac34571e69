//! Jacobi theta machinery: θ_q, shifted thetas, the triple product, the
//! Laurent coefficients t_n^(δ) of θ_q^δ, the good-value-of-q certificate,
//! and the hexagonal-lattice series controlling t_0^(3) on the negative axis.
//!
//! Conventions: θ_q(z) := Σ_m q^{−m(m+1)/2} z^m for |q| > 1, so that
//! θ_q(qz) = z θ_q(z) = θ_q(1/z), with zeros exactly on the spiral [−1; q].

use crate::error::{Error, Result};
use crate::numkernel::{LaurentSeries, QParams};
use crate::C;

/// Smallest truncation order N with |q|^{−N(N+1)/2} R^N < 1e−16, padded a
/// little; R should bound max(|z|, 1/|z|) over the intended arguments.
pub fn theta_trunc_order(qp: &QParams, big_r: f64) -> i64 {
    let lq = qp.q().norm().ln();
    let lr = big_r.max(1.0).ln();
    let mut n = 4i64;
    while -(n * (n + 1)) as f64 / 2.0 * lq + n as f64 * lr > -16.0 * std::f64::consts::LN_10 {
        n += 1;
        if n > 2000 {
            break;
        }
    }
    n + 4
}

/// Truncation of θ_q as a Laurent series on the window [−n, n].
pub fn theta_series(qp: &QParams, n: i64) -> LaurentSeries {
    let mut s = LaurentSeries::zero(-n, n);
    for m in -n..=n {
        s.set(m, qp.q_powi(-m * (m + 1) / 2));
    }
    s
}

/// θ_q^δ truncated so that coefficients relevant for arguments of modulus
/// up to `big_r` carry full double precision.
pub fn theta_pow_series(qp: &QParams, delta: u32, big_r: f64) -> LaurentSeries {
    let n = theta_trunc_order(qp, big_r);
    let base = theta_series(qp, n + 2 * delta as i64);
    let mut acc = base.clone();
    for _ in 1..delta {
        // no relative pruning: small far-out coefficients matter once the
        // series is reweighted by powers of a shift c
        acc = acc.mul_full(&base);
    }
    acc
}

/// θ_q(z), evaluated after reduction to the fundamental annulus via
/// θ(q^k w) = q^{k(k−1)/2} w^k θ(w).
pub fn theta(qp: &QParams, z: C) -> Result<C> {
    if z == C::new(0.0, 0.0) {
        return Err(Error::ZeroArgument);
    }
    let lq = qp.q().norm().ln();
    let k = (z.norm().ln() / lq).floor() as i64;
    let w = z * qp.q_powi(-k);
    let n = theta_trunc_order(qp, qp.q().norm());
    let mut acc = C::new(0.0, 0.0);
    for m in -n..=n {
        acc += qp.q_powi(-m * (m + 1) / 2) * w.powi(m as i32);
    }
    Ok(qp.q_powi(k * (k - 1) / 2) * w.powi(k as i32) * acc)
}

/// θ_{q,c}(z) := θ_q(z/c).
pub fn theta_shifted(qp: &QParams, c: C, z: C) -> Result<C> {
    if c == C::new(0.0, 0.0) {
        return Err(Error::ZeroArgument);
    }
    theta(qp, z / c)
}

/// Jacobi triple product: with p := q^{-1},
/// θ_q(z) = (p; p)∞ · (−pz; p)∞ · (−z^{-1}; p)∞,
/// which puts the zeros on the spiral [−1; q].
pub fn triple_product(qp: &QParams, z: C) -> Result<C> {
    if z == C::new(0.0, 0.0) {
        return Err(Error::ZeroArgument);
    }
    let p = 1.0 / qp.q();
    let p1 = pochhammer(-p, p);
    let p2 = pochhammer(p * z, p);
    let p3 = pochhammer(1.0 / z, p);
    Ok(p1 * p2 * p3)
}

/// (−a; w)∞ = Π_{m≥0} (1 + w^m a), truncated at 200 factors or when the
/// running factor is within 1e−16 of 1, whichever comes first.
fn pochhammer(a: C, w: C) -> C {
    let mut acc = C::new(1.0, 0.0);
    let mut term = a;
    for _ in 0..200 {
        acc *= C::new(1.0, 0.0) + term;
        term *= w;
        if term.norm() < 1e-16 {
            break;
        }
    }
    acc
}

/// Table of the Laurent coefficients t_n^(δ) of θ_q^δ, built by repeated
/// convolution from the δ = 1 row. Immutable once constructed.
pub struct ThetaCoeffTable {
    delta_max: u32,
    n_bound: i64,
    rows: Vec<LaurentSeries>,
}

impl ThetaCoeffTable {
    pub fn build(qp: &QParams, delta_max: u32, n_bound: i64) -> Self {
        assert!(delta_max >= 1);
        let pad = theta_trunc_order(qp, 1.0);
        let base = theta_series(qp, n_bound + pad + delta_max as i64);
        let mut rows = vec![base.clone()];
        for _ in 1..delta_max {
            let next = rows.last().unwrap().mul_full(&base);
            rows.push(next);
        }
        ThetaCoeffTable { delta_max, n_bound, rows }
    }

    pub fn delta_max(&self) -> u32 {
        self.delta_max
    }

    pub fn n_bound(&self) -> i64 {
        self.n_bound
    }

    /// t_n^(δ)(q) from the table.
    pub fn get(&self, delta: u32, n: i64) -> C {
        assert!(delta >= 1 && delta <= self.delta_max);
        self.rows[(delta - 1) as usize].coeff(n)
    }

    /// Worst relative deviation between row δ+1 and row δ ⋆ row 1 on the
    /// guarded range.
    pub fn convolution_consistency(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in 1..self.delta_max {
            let conv = self.rows[(d - 1) as usize].mul_full(&self.rows[0]);
            let direct = &self.rows[d as usize];
            let scale = direct.max_abs().max(1e-300);
            for n in -self.n_bound..=self.n_bound {
                worst = worst.max((conv.coeff(n) - direct.coeff(n)).norm() / scale);
            }
        }
        worst
    }
}

/// t_n^(δ)(q). Direct multi-index summation for δ ≤ 3 (the closed form for
/// δ = 1), repeated convolution above that.
pub fn theta_power_coeff(qp: &QParams, delta: u32, n: i64) -> C {
    assert!(delta >= 1);
    match delta {
        1 => qp.q_powi(-n * (n + 1) / 2),
        2 | 3 => {
            let m = direct_sum_bound(qp, n);
            let mut acc = C::new(0.0, 0.0);
            if delta == 2 {
                for m1 in -m..=m {
                    let m2 = n - m1;
                    acc += qp.q_powi(-(m1 * (m1 + 1) + m2 * (m2 + 1)) / 2);
                }
            } else {
                for m1 in -m..=m {
                    for m2 in -m..=m {
                        let m3 = n - m1 - m2;
                        if m3.abs() > m + n.abs() {
                            continue;
                        }
                        acc += qp.q_powi(-(m1 * (m1 + 1) + m2 * (m2 + 1) + m3 * (m3 + 1)) / 2);
                    }
                }
            }
            acc
        }
        _ => {
            let table = ThetaCoeffTable::build(qp, delta, n.abs());
            table.get(delta, n)
        }
    }
}

fn direct_sum_bound(qp: &QParams, n: i64) -> i64 {
    let lq = qp.q().norm().ln();
    let mut m = 8i64;
    while (m * m) as f64 / 2.0 * lq < 40.0 * std::f64::consts::LN_10 {
        m += 1;
        if m > 400 {
            break;
        }
    }
    m + n.abs()
}

/// Finite certificate for the "good value" property: scans |t_n^(δ)| for
/// δ ≤ delta_max, |n| ≤ n_bound. Each coefficient is compared against its
/// cancellation mass Σ |q|^{−(m₁(m₁+1)+⋯)/2} (the same multi-index sum with
/// absolute values), so a small ratio means genuine cancellation and not
/// just super-geometric decay in n. Evidence over the tested range only,
/// not a proof that q is good.
#[derive(Clone, Debug)]
pub struct GoodValueReport {
    pub delta_max: u32,
    pub n_bound: i64,
    pub tol: f64,
    pub min_abs: f64,
    pub min_rel: f64,
    pub argmin: (u32, i64),
    /// true when no coefficient fell below tol relative to its mass
    pub good_in_range: bool,
}

pub fn is_good_value(qp: &QParams, delta_max: u32, n_bound: i64, tol: f64) -> Result<GoodValueReport> {
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let table = ThetaCoeffTable::build(qp, delta_max, n_bound);
    // absolute-value companion rows measure how much mass could cancel
    let abs_qp = QParams::from_q(C::new(qp.q().norm(), 0.0), 1, C::new(1.0, 0.0))?;
    let mass = ThetaCoeffTable::build(&abs_qp, delta_max, n_bound);
    let mut min_rel = f64::INFINITY;
    let mut min_abs = f64::INFINITY;
    let mut argmin = (1u32, 0i64);
    for d in 1..=delta_max {
        for n in -n_bound..=n_bound {
            let a = table.get(d, n).norm();
            let rel = a / mass.get(d, n).norm().max(1e-300);
            if rel < min_rel {
                min_rel = rel;
                min_abs = a;
                argmin = (d, n);
            }
        }
    }
    Ok(GoodValueReport {
        delta_max,
        n_bound,
        tol,
        min_abs,
        min_rel,
        argmin,
        good_in_range: min_rel >= tol,
    })
}

/// The hexagonal-lattice counting data behind t_0^(3): representation
/// counts r(n) of a² + ab + b² = n with their cumulative sums R(n).
#[derive(Clone, Debug)]
pub struct HexFormSeries {
    pub n_max: usize,
    pub counts: Vec<u64>,
    pub cumulative: Vec<u64>,
}

impl HexFormSeries {
    pub fn build(n_max: usize) -> Self {
        let counts = hex_counts(n_max);
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0u64;
        for &r in &counts {
            acc += r;
            cumulative.push(acc);
        }
        HexFormSeries { n_max, counts, cumulative }
    }

    /// R(n)/n, which approaches the ellipse area 2π/√3.
    pub fn density(&self, n: usize) -> f64 {
        self.cumulative[n] as f64 / n as f64
    }
}

/// r(n) = #{(a,b) ∈ Z² : a² + ab + b² = n} for n = 0..=n_max, by direct
/// enumeration over the ellipse.
pub fn hex_counts(n_max: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_max + 1];
    let bound = (2.0 * (n_max as f64 / 3.0).sqrt()).ceil() as i64 + 1;
    for a in -bound..=bound {
        for b in -bound..=bound {
            let v = a * a + a * b + b * b;
            if v >= 0 && (v as usize) <= n_max {
                counts[v as usize] += 1;
            }
        }
    }
    counts
}

/// f(x) = Σ_{a,b} x^{a²+ab+b²} = Σ_n r(n) xⁿ for |x| < 1.
pub fn hex_series(x: f64) -> Result<f64> {
    if x.abs() >= 1.0 {
        return Err(Error::DomainError(format!("|x| = {} must be < 1", x.abs())));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    // r(n) ≤ 6(n+1), so a geometric tail bound fixes the cutoff.
    let ax = x.abs();
    let mut n_max = 16usize;
    while 6.0 * (n_max as f64 + 2.0) * ax.powi(n_max as i32) / (1.0 - ax) > 1e-14 {
        n_max = n_max * 2;
        if n_max > 2_000_000 {
            return Err(Error::DomainError("x too close to ±1 for the tail bound".into()));
        }
    }
    let counts = hex_counts(n_max);
    let mut acc = 0.0f64;
    let mut xp = 1.0f64;
    for &r in counts.iter() {
        acc += r as f64 * xp;
        xp *= x;
    }
    Ok(acc)
}

/// Located zero of t_0^(3) on the real axis left of −1.
#[derive(Clone, Debug)]
pub struct BadQ {
    /// zero of f inside (−1, 0)
    pub x_star: f64,
    /// q* = 1/x*, the bad value of q
    pub q_star: f64,
    /// |f(x*)|
    pub f_residual: f64,
    /// |t_0^(3)(q*)| recomputed by the multi-index sum
    pub t03_residual: f64,
}

/// Locate a real q* < −1 with t_0^(3)(q*) = 0 by bracketing the sign change
/// of f on (−1, 0) and using t_0^(3)(q) = f(q^{−1}).
pub fn find_bad_q() -> Result<BadQ> {
    let mut prev_x = -0.001f64;
    let mut prev_f = hex_series(prev_x)?;
    let mut bracket = None;
    let mut x = prev_x;
    while x > -0.999 {
        x -= 0.01;
        let f = hex_series(x.max(-0.999))?;
        if prev_f.signum() != f.signum() {
            bracket = Some((x.max(-0.999), prev_x));
            break;
        }
        prev_x = x;
        prev_f = f;
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::BracketingFailed)?;
    let mut flo = hex_series(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = hex_series(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let x_star = 0.5 * (lo + hi);
    let q_star = 1.0 / x_star;
    let f_residual = hex_series(x_star)?.abs();
    let qp = QParams::from_q(C::new(q_star, 0.0), 1, C::new(1.0, 0.0))?;
    let t03_residual = theta_power_coeff(&qp, 3, 0).norm();
    Ok(BadQ { x_star, q_star, f_residual, t03_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn qp(q: C) -> QParams {
        QParams::from_q(q, 1, C::new(1.31, 0.47)).unwrap()
    }

    #[test]
    fn functional_equations_at_random_points() {
        let mut rng = Rng::new(42);
        for q in [C::new(4.0, 0.0), C::new(2.0, 1.0), C::new(-3.0, 0.0)] {
            let p = qp(q);
            for _ in 0..50 {
                let z = rng.annulus(1.0, q.norm());
                let t = theta(&p, z).unwrap();
                let tq = theta(&p, q * z).unwrap();
                let ti = theta(&p, 1.0 / z).unwrap();
                let scale = (z * t).norm().max(1.0);
                assert!((tq - z * t).norm() < 1e-10 * scale, "θ(qz) = zθ(z) at {z}");
                assert!((ti - z * t).norm() < 1e-10 * scale, "θ(1/z) = zθ(z) at {z}");
            }
        }
    }

    #[test]
    fn triple_product_matches_series() {
        let mut rng = Rng::new(1);
        for q in [C::new(4.0, 0.0), C::new(2.0, 1.0), C::new(-3.0, 0.0)] {
            let p = qp(q);
            for _ in 0..20 {
                let z = rng.annulus(1.0, q.norm());
                let a = theta(&p, z).unwrap();
                let b = triple_product(&p, z).unwrap();
                assert!((a - b).norm() < 1e-10 * a.norm().max(1.0), "q={q} z={z}");
            }
        }
    }

    #[test]
    fn triple_product_vanishes_at_minus_one() {
        let p = qp(C::new(4.0, 0.0));
        let v = triple_product(&p, C::new(-1.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn triple_product_positive_on_positive_axis() {
        let p = qp(C::new(3.0, 0.0));
        for x in [0.3, 1.0, 2.5, 7.0] {
            let v = triple_product(&p, C::new(x, 0.0)).unwrap();
            assert!(v.re > 0.0 && v.im.abs() < 1e-12 * v.re);
        }
    }

    #[test]
    fn zeros_on_the_spiral() {
        let p = qp(C::new(4.0, 0.0));
        for k in 0..3 {
            let z = -p.q_powi(-k);
            let v = theta(&p, z).unwrap();
            assert!(v.norm() < 1e-9, "θ(−q^−{k}) = {v}");
        }
    }

    #[test]
    fn theta_truncation_matches_series_object() {
        let p = qp(C::new(4.0, 0.0));
        let n = theta_trunc_order(&p, 2.0);
        let s = theta_series(&p, n);
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let z = rng.annulus(1.0, 2.0);
            let a = s.evaluate(z).unwrap();
            let b = theta(&p, z).unwrap();
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
        // σ_q θ = z·θ as truncated series, checked on the annulus
        let sq = s.sigma_q(&p);
        let zs = s.shift(1);
        for _ in 0..10 {
            let z = rng.annulus(1.0, 2.0);
            let a = sq.evaluate(z).unwrap();
            let b = zs.evaluate(z).unwrap();
            assert!((a - b).norm() < 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn power_coeff_closed_forms() {
        for q in [C::new(4.0, 0.0), C::new(2.0, 1.0)] {
            let p = qp(q);
            for n in -10..=10i64 {
                let direct = theta_power_coeff(&p, 1, n);
                assert!((direct - p.q_powi(-n * (n + 1) / 2)).norm() < 1e-14 * direct.norm());
                // t_n^(2) = q^{−n(n+1)/2} θ_{q²}(q^{n+1})
                let p2 = QParams::from_q(q * q, 1, C::new(1.0, 0.0)).unwrap();
                let rhs = p.q_powi(-n * (n + 1) / 2) * theta(&p2, p.q_powi(n + 1)).unwrap();
                let lhs = theta_power_coeff(&p, 2, n);
                assert!(
                    (lhs - rhs).norm() < 1e-10 * rhs.norm().max(1e-300),
                    "t_n^(2) closed form, q={q} n={n}"
                );
            }
        }
    }

    #[test]
    fn convolution_agrees_with_direct_sums() {
        let p = qp(C::new(4.0, 0.0));
        let table = ThetaCoeffTable::build(&p, 4, 15);
        for delta in 2..=3u32 {
            for n in -15..=15i64 {
                let a = theta_power_coeff(&p, delta, n);
                let b = table.get(delta, n);
                assert!((a - b).norm() < 1e-10 * a.norm().max(1e-300), "δ={delta} n={n}");
            }
        }
        assert!(table.convolution_consistency() < 1e-10);
    }

    #[test]
    fn theta_square_splitting() {
        // θ_q²(z) = θ_{q²}(q)θ_{q²}(z²) + θ_{q²}(1)θ_{q²}(qz²) z^{−1}
        let mut rng = Rng::new(8);
        for q in [C::new(4.0, 0.0), C::new(2.0, 1.0)] {
            let p = qp(q);
            let p2 = QParams::from_q(q * q, 1, C::new(1.0, 0.0)).unwrap();
            for _ in 0..10 {
                let z = rng.annulus(0.8, q.norm());
                let lhs = theta(&p, z).unwrap().powi(2);
                let rhs = theta(&p2, q).unwrap() * theta(&p2, z * z).unwrap()
                    + theta(&p2, C::new(1.0, 0.0)).unwrap() * theta(&p2, q * z * z).unwrap() / z;
                assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn shifted_theta_covariance() {
        // θ_{q,qc}(z) = (qc/z) θ_{q,c}(z)
        let p = qp(C::new(4.0, 0.0));
        let mut rng = Rng::new(13);
        for _ in 0..20 {
            let c = rng.annulus(0.7, 2.5);
            let z = rng.annulus(1.0, 3.0);
            let lhs = theta_shifted(&p, p.q() * c, z).unwrap();
            let rhs = (p.q() * c / z) * theta_shifted(&p, c, z).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn good_value_q4() {
        let p = qp(C::new(4.0, 0.0));
        let rep = is_good_value(&p, 4, 20, 1e-12).unwrap();
        assert!(rep.good_in_range, "q = 4 flagged bad: {rep:?}");
    }

    #[test]
    fn hex_counts_small_values() {
        let counts = hex_counts(12);
        assert_eq!(counts[0], 1);
        assert_eq!(counts[1], 6);
        assert_eq!(counts[2], 0);
        assert_eq!(counts[3], 6);
        assert_eq!(counts[4], 6);
        assert_eq!(counts[7], 12);
    }

    #[test]
    fn hex_counts_density() {
        // R(n)/n → 2π/√3
        let n = 10_000usize;
        let series = HexFormSeries::build(n);
        let c = 2.0 * std::f64::consts::PI / 3.0f64.sqrt();
        let ratio = series.density(n);
        assert!((ratio - c).abs() / c < 0.05, "R(n)/n = {ratio}, want ≈ {c}");
        assert_eq!(series.counts[1], 6);
        assert_eq!(series.cumulative[1], 7);
    }

    #[test]
    fn hex_series_values() {
        assert_eq!(hex_series(0.0).unwrap(), 1.0);
        let eps = 1e-6;
        let f = hex_series(eps).unwrap();
        assert!((f - (1.0 + 6.0 * eps)).abs() < 1e-10);
        assert!(hex_series(1.0).is_err());
        // parity identity f(−x) = 2 f(x⁴) − f(x)
        for x in [0.3, 0.6, 0.9] {
            let lhs = hex_series(-x).unwrap();
            let rhs = 2.0 * hex_series(x.powi(4)).unwrap() - hex_series(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn hex_series_sign_change() {
        assert!(hex_series(-0.1).unwrap() > 0.0);
        assert!(hex_series(-0.99).unwrap() < 0.0);
    }

    #[test]
    fn bad_q_is_located() {
        let bad = find_bad_q().unwrap();
        assert!(bad.x_star > -1.0 && bad.x_star < 0.0);
        assert!(bad.q_star < -1.0);
        assert!(bad.q_star.abs() > 1.0);
        assert!(bad.f_residual < 1e-12, "f residual {}", bad.f_residual);
        assert!(bad.t03_residual < 1e-9, "t03 residual {}", bad.t03_residual);
        // t_0^(3)(q) = f(q^{−1}) away from the zero as well
        let p = qp(C::new(3.0, 0.0));
        let lhs = theta_power_coeff(&p, 3, 0);
        let rhs = hex_series(1.0 / 3.0).unwrap();
        assert!((lhs - C::new(rhs, 0.0)).norm() < 1e-10 * rhs.abs());
    }
}

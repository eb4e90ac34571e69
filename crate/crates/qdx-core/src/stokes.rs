//! Algebraic summation of the divergent formal gauge in a direction of E_q,
//! resonance sets of forbidden directions, spectral projectors, and the
//! privileged Stokes cocycles F_{c̄,d̄} = F_c̄^{-1} F_d̄.
//!
//! For a two-slope block [[z^{μ₁}A₁, V],[0, z^{μ₂}A₂]] the summed gauge is
//! F_c̄ = [[I, f],[0, I]] with f = g / θ_{q,c}^δ, δ = μ₂ − μ₁, where the
//! entire numerator g solves, coefficient by coefficient,
//!   (q^m c^δ Id − Φ_{A₁,A₂}) g_m = (θ_{q,c}^δ V)^{(m+μ₁)} A₂^{-1},
//! Φ_{A₁,A₂}(X) = A₁ X A₂^{-1}. Poles of F_c̄ sit on the spiral [−c; q]
//! with order at most δ.

use std::collections::BTreeMap;

use crate::cmatrix::CMatrix;
use crate::elliptic::{canonicalize, root_grid, EllipticPoint};
use crate::error::{Error, Result};
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::{LaurentSeries, QParams};
use crate::qdmod::{BlockSystem, DiagBlock};
use crate::theta::{theta, theta_pow_series};
use crate::C;

/// Relative gap below which a direction counts as resonant.
pub const DIRECTION_TOL: f64 = 1e-6;

/// A forbidden direction with the data that generated it.
#[derive(Clone, Debug)]
pub struct ResonancePoint {
    pub pair: (usize, usize),
    pub eig_ratio: C,
    pub l: u32,
    pub m: u32,
    pub class: EllipticPoint,
}

#[derive(Clone, Debug)]
pub struct ResonanceSet {
    pub points: Vec<EllipticPoint>,
    pub provenance: Vec<ResonancePoint>,
}

impl ResonanceSet {
    pub fn contains(&self, p: &EllipticPoint, tol: f64) -> bool {
        self.points.iter().any(|x| x.eq_tol(p, tol))
    }
}

/// Forbidden directions of the graded system: classes c̄ with
/// q^m c^{μ_j−μ_i} hitting an eigenvalue ratio of (A_i, A_j) for some i < j.
/// Fractional-slope systems are handled through ramification elsewhere;
/// here the slope gaps must be integral.
pub fn resonance_set(a0: &BlockSystem, qp: &QParams) -> Result<ResonanceSet> {
    let mut points: Vec<EllipticPoint> = Vec::new();
    let mut provenance = Vec::new();
    for i in 0..a0.k() {
        for j in i + 1..a0.k() {
            let level = a0.level(i, j);
            if !level.is_integer() {
                return Err(Error::Unsupported(
                    "resonance set needs integral slope gaps; ramify first".into(),
                ));
            }
            let delta = level.num as u32;
            if delta == 0 {
                continue;
            }
            let mut ratios: Vec<C> = Vec::new();
            for li in a0.blocks[i].eigenvalues() {
                for lj in a0.blocks[j].eigenvalues() {
                    let d = li / lj;
                    if !ratios.iter().any(|r| (*r - d).norm() < 1e-12 * d.norm()) {
                        ratios.push(d);
                    }
                }
            }
            for d in ratios {
                let beta = canonicalize(1.0 / d, qp)?;
                let grid = root_grid(delta, &beta, qp);
                for l in 0..delta {
                    for m in 0..delta {
                        let class = canonicalize(grid.point(l as i64, m as i64), qp)?;
                        if !points.iter().any(|p| p.eq_tol(&class, 1e-9)) {
                            points.push(class);
                        }
                        provenance.push(ResonancePoint {
                            pair: (i, j),
                            eig_ratio: d,
                            l,
                            m,
                            class,
                        });
                    }
                }
            }
        }
    }
    Ok(ResonanceSet { points, provenance })
}

/// The spectral projector Π_λ of Φ_{P,Q}(X) = P X Q^{-1} for P, Q given in
/// characteristic-block form: keeps the sub-blocks X_{i,j} with λ_i/μ_j = λ.
#[derive(Clone, Debug)]
pub struct SpectralProjector {
    pub row_parts: Vec<(C, usize)>,
    pub col_parts: Vec<(C, usize)>,
    pub lambda: C,
    pub tol: f64,
}

pub fn spectral_projector(
    row_parts: &[(C, usize)],
    col_parts: &[(C, usize)],
    lambda: C,
    tol: f64,
) -> SpectralProjector {
    SpectralProjector {
        row_parts: row_parts.to_vec(),
        col_parts: col_parts.to_vec(),
        lambda,
        tol,
    }
}

impl SpectralProjector {
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.rows(), x.cols());
        let mut r0 = 0usize;
        for &(li, ri) in &self.row_parts {
            let mut c0 = 0usize;
            for &(mj, cj) in &self.col_parts {
                let ratio = li / mj;
                if (ratio - self.lambda).norm() < self.tol * self.lambda.norm().max(1e-300) {
                    out.set_submatrix(r0, c0, &x.submatrix(r0, c0, ri, cj));
                }
                c0 += cj;
            }
            r0 += ri;
        }
        out
    }
}

/// The per-coefficient solver for one two-slope layer. When both constant
/// parts are block-diagonal with respect to their characteristic partitions
/// the resolvent splits into small independent sub-blocks; otherwise a full
/// vectorized solve is used.
pub struct TwoSlopeSolver {
    pub mu1: i64,
    pub mu2: i64,
    pub delta: i64,
    pub p1: CMatrix,
    pub p2: CMatrix,
    pub p2_inv: CMatrix,
    pub parts1: Vec<(C, usize)>,
    pub parts2: Vec<(C, usize)>,
    split: bool,
}

impl TwoSlopeSolver {
    pub fn new(mu1: i64, p1: CMatrix, parts1: Vec<(C, usize)>, mu2: i64, p2: CMatrix, parts2: Vec<(C, usize)>) -> Result<Self> {
        if mu2 <= mu1 {
            return Err(Error::InvalidInput("slopes must increase".into()));
        }
        let p2_inv = p2.inverse()?;
        let split = is_partition_diagonal(&p1, &parts1) && is_partition_diagonal(&p2, &parts2);
        Ok(TwoSlopeSolver { mu1, mu2, delta: mu2 - mu1, p1, p2, p2_inv, parts1, parts2, split })
    }

    /// Minimal relative gap between s = q^m c^δ over the window and the
    /// eigenvalue ratios of Φ.
    pub fn direction_gap(&self, c: C, m_range: (i64, i64), qp: &QParams) -> f64 {
        let cd = c.powi(self.delta as i32);
        let mut gap = f64::INFINITY;
        for m in m_range.0..=m_range.1 {
            let s = qp.q_powi(m) * cd;
            for &(li, _) in &self.parts1 {
                for &(lj, _) in &self.parts2 {
                    let d = li / lj;
                    gap = gap.min((s - d).norm() / d.norm().max(1e-300));
                }
            }
        }
        gap
    }

    /// Solve (s Id − Φ) X = B with Φ(X) = P₁ X P₂^{-1}.
    pub fn resolvent_solve(&self, s: C, b: &CMatrix) -> Result<CMatrix> {
        if self.split {
            let mut out = CMatrix::zeros(b.rows(), b.cols());
            let mut r0 = 0usize;
            for &(_, ri) in &self.parts1 {
                let p1b = self.p1.submatrix(r0, r0, ri, ri);
                let mut c0 = 0usize;
                for &(_, cj) in &self.parts2 {
                    let p2b = self.p2.submatrix(c0, c0, cj, cj);
                    let rhs = b.submatrix(r0, c0, ri, cj);
                    out.set_submatrix(r0, c0, &sylvester_solve(s, &p1b, &p2b, &rhs)?);
                    c0 += cj;
                }
                r0 += ri;
            }
            Ok(out)
        } else {
            sylvester_solve(s, &self.p1, &self.p2, b)
        }
    }
}

fn is_partition_diagonal(p: &CMatrix, parts: &[(C, usize)]) -> bool {
    let scale = p.max_abs().max(1e-300);
    let mut r0 = 0usize;
    for &(_, ri) in parts {
        for i in r0..r0 + ri {
            for j in 0..p.cols() {
                if (j < r0 || j >= r0 + ri) && p[(i, j)].norm() > 1e-13 * scale {
                    return false;
                }
            }
        }
        r0 += ri;
    }
    r0 == p.rows()
}

/// Solve s X − P₁ X P₂^{-1} = B by vectorization (column-major), i.e.
/// (s I − (P₂^{-T} ⊗ P₁)) vec(X) = vec(B).
fn sylvester_solve(s: C, p1: &CMatrix, p2: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let (n1, n2) = (p1.rows(), p2.rows());
    let p2_inv_t = p2.inverse()?.transpose();
    let op = CMatrix::scalar(n1 * n2, s).sub(&p2_inv_t.kron(p1));
    let rhs = b.vec_col_major();
    let rhs_m = CMatrix::from_fn(n1 * n2, 1, |i, _| rhs[i]);
    let x = op.solve(&rhs_m)?;
    Ok(CMatrix::from_vec_col_major(n1, n2, x.entries()))
}

/// A summed gauge transform: block (i,j) is g_{ij} / θ_{q,c}^{δ_{ij}} with
/// entire numerators g_{ij} stored as truncated Laurent matrices.
#[derive(Clone, Debug)]
pub struct SummationResult {
    pub direction: C,
    pub shape: Vec<usize>,
    pub slopes: Vec<i64>,
    pub numerators: BTreeMap<(usize, usize), LaurentMatrix>,
    qp: QParams,
}

impl SummationResult {
    pub fn qp(&self) -> &QParams {
        &self.qp
    }

    pub fn size(&self) -> usize {
        self.shape.iter().sum()
    }

    fn start(&self, i: usize) -> usize {
        self.shape[..i].iter().sum()
    }

    /// Class of the pole spiral [−c; q].
    pub fn pole_class(&self) -> Result<EllipticPoint> {
        canonicalize(-self.direction, &self.qp)
    }

    /// Evaluate the meromorphic gauge at a point off the pole spiral.
    pub fn eval(&self, z: C) -> Result<CMatrix> {
        let mut out = CMatrix::identity(self.size());
        for (&(i, j), g) in &self.numerators {
            let delta = (self.slopes[j] - self.slopes[i]) as i32;
            let th = theta(&self.qp, z / self.direction)?.powi(delta);
            if th.norm() < 1e-250 {
                return Err(Error::PoleOnCircle(th.norm()));
            }
            let block = g.evaluate(z)?.scale(1.0 / th);
            out.set_submatrix(self.start(i), self.start(j), &block);
        }
        Ok(out)
    }

    /// Exact inverse of the evaluation: the matrix is unipotent, so the
    /// Neumann series terminates no matter how large the entries get near
    /// the pole spiral.
    pub fn eval_inverse(&self, z: C) -> Result<CMatrix> {
        let v = self.eval(z)?;
        let n = v.rows();
        let nil = v.sub(&CMatrix::identity(n));
        let mut acc = CMatrix::identity(n);
        let mut term = CMatrix::identity(n);
        for _ in 0..self.shape.len() {
            term = term.mul(&nil).scale(C::new(-1.0, 0.0));
            if term.max_abs() == 0.0 {
                break;
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// One block F_{ij}(z).
    pub fn eval_block(&self, i: usize, j: usize, z: C) -> Result<CMatrix> {
        let delta = (self.slopes[j] - self.slopes[i]) as i32;
        match self.numerators.get(&(i, j)) {
            None => Ok(CMatrix::zeros(self.shape[i], self.shape[j])),
            Some(g) => {
                let th = theta(&self.qp, z / self.direction)?.powi(delta);
                Ok(g.evaluate(z)?.scale(1.0 / th))
            }
        }
    }

    /// Largest numerator coefficient magnitude beyond the given exponent
    /// radius; bounded growth certifies that θ^δ · f stays entire.
    pub fn numerator_tail(&self, radius: i64) -> f64 {
        let mut worst = 0.0f64;
        for g in self.numerators.values() {
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    for (e, v) in g[(r, c)].terms() {
                        if e.abs() > radius {
                            worst = worst.max(v.norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

fn const_block_data(b: &DiagBlock) -> Result<(i64, CMatrix, Vec<(C, usize)>)> {
    match b {
        DiagBlock::ConstPower { mu, mat, .. } => Ok((*mu, mat.clone(), b.char_partition())),
        DiagBlock::Irreducible { .. } => Err(Error::Unsupported(
            "summation needs constant-times-power blocks; ramify and conjugate first".into(),
        )),
    }
}

/// Shared worker: given already-summed lower levels, solve layer (i, j).
fn solve_layer(
    solver: &TwoSlopeSolver,
    w: &LaurentMatrix,
    c: C,
    qp: &QParams,
) -> Result<LaurentMatrix> {
    let support = w.support();
    let (ri, rj) = (solver.p1.rows(), solver.p2.rows());
    let mut g = LaurentMatrix::zeros(ri, rj);
    if support.is_empty() {
        return Ok(g);
    }
    let (e_lo, e_hi) = (support[0], *support.last().unwrap());
    let m_range = (e_lo - solver.mu1, e_hi - solver.mu1);
    let gap = solver.direction_gap(c, m_range, qp);
    if gap < DIRECTION_TOL {
        return Err(Error::ForbiddenDirection(gap));
    }
    let cd = c.powi(solver.delta as i32);
    for m in m_range.0..=m_range.1 {
        let b = w.coeff_matrix(m + solver.mu1).mul(&solver.p2_inv);
        if b.max_abs() == 0.0 {
            continue;
        }
        let s = qp.q_powi(m) * cd;
        let gm = solver.resolvent_solve(s, &b)?;
        for r in 0..ri {
            for cc in 0..rj {
                if gm[(r, cc)] != C::new(0.0, 0.0) {
                    let mut series = g[(r, cc)].clone();
                    series.set(m, gm[(r, cc)]);
                    g[(r, cc)] = series;
                }
            }
        }
    }
    Ok(g)
}

/// Truncated θ_{q,c}^δ as a series in z (coefficients t_n^(δ) c^{−n}).
pub fn theta_shifted_pow_series(qp: &QParams, c: C, delta: u32, big_r: f64) -> LaurentSeries {
    let tp = theta_pow_series(qp, delta, big_r * c.norm().max(1.0 / c.norm()));
    let mut out = LaurentSeries::zero(tp.window().0, tp.window().1);
    let ln_c = c.ln();
    for (n, v) in tp.terms() {
        // c^{-n} with n of either sign
        let cn = (-ln_c * n as f64).exp();
        out.set(n, v * cn);
    }
    out
}

fn eval_radius(qp: &QParams) -> f64 {
    let z0 = qp.z0().norm();
    qp.q().norm() * z0.max(1.0 / z0) * 2.0
}

/// Algebraic summation for arbitrarily many integral slopes: layers are
/// solved in increasing q-Gevrey level, lower-level numerators feeding the
/// right-hand sides of higher ones. For k = 2 this is exactly the one-layer
/// resolvent formula.
pub fn multi_slope_sum(a: &BlockSystem, c: C, qp: &QParams) -> Result<SummationResult> {
    if !a.all_integer_slopes() {
        return Err(Error::Unsupported("summation requires integral slopes; ramify first".into()));
    }
    let k = a.k();
    let mut data = Vec::new();
    for b in &a.blocks {
        data.push(const_block_data(b)?);
    }
    let slopes: Vec<i64> = data.iter().map(|d| d.0).collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((i, j));
        }
    }
    pairs.sort_by_key(|&(i, j)| (slopes[j] - slopes[i], i, j));

    let big_r = eval_radius(qp);
    let mut numerators: BTreeMap<(usize, usize), LaurentMatrix> = BTreeMap::new();
    for &(i, j) in &pairs {
        let delta_ij = (slopes[j] - slopes[i]) as u32;
        // the truncated θ^δ must fit the window cap, otherwise coefficients
        // would be dropped silently
        let order = crate::theta::theta_trunc_order(qp, big_r * c.norm().max(1.0 / c.norm()));
        let width = 2 * delta_ij as i64 * (order + 2 * delta_ij as i64);
        if width >= crate::numkernel::MAX_WINDOW_WIDTH {
            return Err(Error::WindowOverflow);
        }
        let theta_ij = theta_shifted_pow_series(qp, c, delta_ij, big_r);
        // W = θ^{δij} U_{ij} + Σ_l θ^{δil} U_{il} g_{lj}
        let mut w = a.upper_block(i, j).map(|e| e.mul_full(&theta_ij));
        for l in i + 1..j {
            if let Some(glj) = numerators.get(&(l, j)) {
                let delta_il = (slopes[l] - slopes[i]) as u32;
                let theta_il = theta_shifted_pow_series(qp, c, delta_il, big_r);
                let u_il = a.upper_block(i, l);
                w = w.add(&u_il.map(|e| e.mul_full(&theta_il)).mul(glj));
            }
        }
        let solver = TwoSlopeSolver::new(
            slopes[i],
            data[i].1.clone(),
            data[i].2.clone(),
            slopes[j],
            data[j].1.clone(),
            data[j].2.clone(),
        )?;
        let g = solve_layer(&solver, &w, c, qp)?;
        if !g.support().is_empty() {
            numerators.insert((i, j), g);
        }
    }
    Ok(SummationResult { direction: c, shape: a.shape(), slopes, numerators, qp: qp.clone() })
}

/// The two-slope case of the summation.
pub fn algebraic_sum_two_slopes(a: &BlockSystem, c: C, qp: &QParams) -> Result<SummationResult> {
    if a.k() != 2 {
        return Err(Error::ShapeMismatch("expected exactly two slopes".into()));
    }
    multi_slope_sum(a, c, qp)
}

/// The privileged cocycle F_{c̄,d̄} := F_c̄^{-1} F_d̄, an automorphism of the
/// graded system with poles on [−c, −d; q].
pub struct StokesCocycle {
    pub fc: SummationResult,
    pub fd: SummationResult,
}

impl StokesCocycle {
    pub fn eval(&self, z: C) -> Result<CMatrix> {
        Ok(self.fc.eval_inverse(z)?.mul(&self.fd.eval(z)?))
    }
}

pub fn stokes_cocycle(a: &BlockSystem, c: C, d: C, qp: &QParams) -> Result<StokesCocycle> {
    Ok(StokesCocycle { fc: multi_slope_sum(a, c, qp)?, fd: multi_slope_sum(a, d, qp)? })
}

/// Max residual of ‖F(qz)A(z) − B(z)F(z)‖ over sample points, relative to
/// the local scale.
pub fn sampled_gauge_residual(
    f_eval: &mut dyn FnMut(C) -> Result<CMatrix>,
    a: &LaurentMatrix,
    b: &LaurentMatrix,
    qp: &QParams,
    samples: &[C],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &z in samples {
        let lhs = f_eval(qp.q() * z)?.mul(&a.evaluate(z)?);
        let rhs = b.evaluate(z)?.mul(&f_eval(z)?);
        let scale = rhs.max_abs().max(a.evaluate(z)?.max_abs()).max(1.0);
        worst = worst.max(lhs.sub(&rhs).max_abs() / scale);
    }
    Ok(worst)
}

/// Distance between the classes of x and s in E_q, measured on canonical
/// representatives with a wrap around the annulus seam.
pub fn class_distance(x: C, s: C, qp: &QParams) -> f64 {
    let a = match crate::elliptic::canonical_rep(x, qp) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let b = match crate::elliptic::canonical_rep(s, qp) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let d1 = (a - b).norm();
    let d2 = (a - b * qp.q()).norm();
    let d3 = (a * qp.q() - b).norm();
    d1.min(d2).min(d3)
}

/// Sample points on the base-point circle staying away from the given
/// pole spirals by at least `min_dist` in canonical distance. Among the
/// admissible candidates the farthest ones are kept, which matters in
/// thin annuli where evaluations near a spiral lose precision.
pub fn sample_points_avoiding(
    qp: &QParams,
    spirals: &[C],
    count: usize,
    min_dist: f64,
    seed: u64,
) -> Vec<C> {
    let mut rng = crate::rng::Rng::new(seed);
    let radius = qp.z0().norm();
    let mut candidates: Vec<(f64, C)> = Vec::new();
    for _ in 0..30 * count {
        let z = C::from_polar(radius, rng.range(0.0, std::f64::consts::TAU));
        let dist = spirals
            .iter()
            .map(|&s| class_distance(z, -s, qp))
            .fold(f64::INFINITY, f64::min);
        if dist >= min_dist {
            candidates.push((dist, z));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates.into_iter().take(count).map(|(_, z)| z).collect()
}

/// Independent construction route for the two-slope numerator: one joint
/// dense solve over all coefficients at once instead of per-mode resolvent
/// inversions. Used as the uniqueness surrogate.
pub fn two_slope_joint_solve(a: &BlockSystem, c: C, qp: &QParams) -> Result<LaurentMatrix> {
    if a.k() != 2 {
        return Err(Error::ShapeMismatch("expected exactly two slopes".into()));
    }
    let (mu1, p1, _) = const_block_data(&a.blocks[0])?;
    let (mu2, p2, _) = const_block_data(&a.blocks[1])?;
    let delta = (mu2 - mu1) as u32;
    let theta_c = theta_shifted_pow_series(qp, c, delta, eval_radius(qp));
    let w = a.upper_block(0, 1).map(|e| e.mul_full(&theta_c));
    let support = w.support();
    if support.is_empty() {
        return Ok(LaurentMatrix::zeros(p1.rows(), p2.rows()));
    }
    let (e_lo, e_hi) = (support[0], *support.last().unwrap());
    let (m_lo, m_hi) = (e_lo - mu1, e_hi - mu1);
    let (n1, n2) = (p1.rows(), p2.rows());
    let blk = n1 * n2;
    let modes = (m_hi - m_lo + 1) as usize;
    let dim = blk * modes;
    let p2_inv_t = p2.inverse()?.transpose();
    let phi_op = p2_inv_t.kron(&p1);
    let mut big = CMatrix::zeros(dim, dim);
    let mut rhs = CMatrix::zeros(dim, 1);
    let cd = c.powi(delta as i32);
    for (idx, m) in (m_lo..=m_hi).enumerate() {
        let s = qp.q_powi(m) * cd;
        // equilibrate: the mode magnitudes span many orders of q
        let row_scale = C::new(1.0 / s.norm().max(1.0), 0.0);
        for r in 0..blk {
            for cc in 0..blk {
                let v = if r == cc { s } else { C::new(0.0, 0.0) };
                big[(idx * blk + r, idx * blk + cc)] = (v - phi_op[(r, cc)]) * row_scale;
            }
        }
        let b = w.coeff_matrix(m + mu1).mul(&p2.inverse()?);
        for (r, v) in b.vec_col_major().iter().enumerate() {
            rhs[(idx * blk + r, 0)] = *v * row_scale;
        }
    }
    let sol = big.solve(&rhs)?;
    let mut g = LaurentMatrix::zeros(n1, n2);
    for (idx, m) in (m_lo..=m_hi).enumerate() {
        let slice: Vec<C> = (0..blk).map(|r| sol[(idx * blk + r, 0)]).collect();
        let gm = CMatrix::from_vec_col_major(n1, n2, &slice);
        for r in 0..n1 {
            for cc in 0..n2 {
                if gm[(r, cc)] != C::new(0.0, 0.0) {
                    let mut s = g[(r, cc)].clone();
                    s.set(m, gm[(r, cc)]);
                    g[(r, cc)] = s;
                }
            }
        }
    }
    Ok(g)
}

//! Block q-difference systems: the gauge action F[A], Newton polygons,
//! graded objects, the q-Gevrey filtration of the unipotent gauge group,
//! and Birkhoff-Guenther normalization for integral slopes.

use std::collections::BTreeMap;

use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::formal::IrreducibleObject;
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::QParams;
use crate::rat::Rat;
use crate::C;

/// Slopes with multiplicities: μ₁ < … < μ_k, r_i μ_i ∈ Z, Σ r_i = n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonData {
    pub slopes: Vec<Rat>,
    pub mults: Vec<usize>,
}

impl NewtonData {
    pub fn validate(&self) -> Result<()> {
        if self.slopes.len() != self.mults.len() {
            return Err(Error::ShapeMismatch("slopes and multiplicities differ in length".into()));
        }
        for w in self.slopes.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput("slopes must be strictly increasing".into()));
            }
        }
        for (s, &m) in self.slopes.iter().zip(&self.mults) {
            if (m as i64 * s.num) % s.den != 0 {
                return Err(Error::InvalidInput(format!("r·μ = {m}·{s} is not an integer")));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.mults.iter().sum()
    }

    /// Newton function μ ↦ r(μ).
    pub fn mult_of(&self, mu: Rat) -> usize {
        self.slopes.iter().position(|s| *s == mu).map(|i| self.mults[i]).unwrap_or(0)
    }
}

/// One pure isoclinic diagonal block.
#[derive(Clone, Debug)]
pub enum DiagBlock {
    /// z^μ · A with constant invertible A (integral slope μ); `eigs` lists
    /// the eigenvalues in diagonal order, one per row.
    ConstPower { mu: i64, mat: CMatrix, eigs: Vec<C> },
    /// E(r,d,c) ⊗ U_m, slope d/r.
    Irreducible { obj: IrreducibleObject, m: usize },
}

impl DiagBlock {
    pub fn const_power(mu: i64, mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::ShapeMismatch("diagonal block must be square".into()));
        }
        if mat.det().norm() < 1e-12 {
            return Err(Error::InvalidInput("diagonal block must be invertible".into()));
        }
        let eigs = triangular_eigs(&mat).ok_or_else(|| {
            Error::InvalidInput(
                "constant block must be triangular (or supply the spectrum explicitly)".into(),
            )
        })?;
        Ok(DiagBlock::ConstPower { mu, mat, eigs })
    }

    pub fn const_power_with_eigs(mu: i64, mat: CMatrix, eigs: Vec<C>) -> Result<Self> {
        if eigs.len() != mat.rows() {
            return Err(Error::ShapeMismatch("one eigenvalue per row required".into()));
        }
        Ok(DiagBlock::ConstPower { mu, mat, eigs })
    }

    pub fn scalar(mu: i64, a: C) -> Self {
        DiagBlock::ConstPower { mu, mat: CMatrix::diag(&[a]), eigs: vec![a] }
    }

    pub fn size(&self) -> usize {
        match self {
            DiagBlock::ConstPower { mat, .. } => mat.rows(),
            DiagBlock::Irreducible { obj, m } => obj.size() * m,
        }
    }

    pub fn slope(&self) -> Rat {
        match self {
            DiagBlock::ConstPower { mu, .. } => Rat::int(*mu),
            DiagBlock::Irreducible { obj, .. } => obj.slope(),
        }
    }

    pub fn to_laurent(&self, qp: &QParams) -> LaurentMatrix {
        match self {
            DiagBlock::ConstPower { mu, mat, .. } => LaurentMatrix::monomial_times(*mu, mat),
            DiagBlock::Irreducible { obj, m } => {
                obj.matrix(qp).kron_const(&crate::formal::unipotent_jordan(*m))
            }
        }
    }

    /// Eigenvalues with multiplicity, in diagonal order. For irreducible
    /// blocks these are the eigenvalues a ζ_r^i of the constant part
    /// a D_r ⊗ U_m obtained after diagonalization over the ramified base.
    pub fn eigenvalues(&self) -> Vec<C> {
        match self {
            DiagBlock::ConstPower { eigs, .. } => eigs.clone(),
            DiagBlock::Irreducible { obj, m } => {
                let zeta = QParams::zeta(obj.r);
                let mut out = Vec::new();
                for i in 0..obj.r {
                    for _ in 0..*m {
                        out.push(obj.a * zeta.powi(i as i32));
                    }
                }
                out
            }
        }
    }

    /// Characteristic partition: consecutive equal eigenvalues grouped as
    /// (eigenvalue, block size).
    pub fn char_partition(&self) -> Vec<(C, usize)> {
        let eigs = self.eigenvalues();
        let mut out: Vec<(C, usize)> = Vec::new();
        for e in eigs {
            match out.last_mut() {
                Some((v, n)) if (*v - e).norm() < 1e-9 * e.norm().max(1.0) => *n += 1,
                _ => out.push((e, 1)),
            }
        }
        out
    }
}

fn triangular_eigs(m: &CMatrix) -> Option<Vec<C>> {
    let n = m.rows();
    let scale = m.max_abs().max(1e-300);
    let mut upper = true;
    let mut lower = true;
    for i in 0..n {
        for j in 0..n {
            if i > j && m[(i, j)].norm() > 1e-14 * scale {
                upper = false;
            }
            if i < j && m[(i, j)].norm() > 1e-14 * scale {
                lower = false;
            }
        }
    }
    if upper || lower {
        Some((0..n).map(|i| m[(i, i)]).collect())
    } else {
        None
    }
}

/// Block-upper-triangular system A_U: pure isoclinic diagonal blocks with
/// strictly increasing slopes, Laurent-polynomial blocks above.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub blocks: Vec<DiagBlock>,
    pub upper: BTreeMap<(usize, usize), LaurentMatrix>,
}

impl BlockSystem {
    pub fn new(
        blocks: Vec<DiagBlock>,
        upper: BTreeMap<(usize, usize), LaurentMatrix>,
    ) -> Result<Self> {
        for w in blocks.windows(2) {
            if w[0].slope() >= w[1].slope() {
                return Err(Error::InvalidInput("slopes must be strictly increasing".into()));
            }
        }
        for (&(i, j), m) in &upper {
            if i >= j || j >= blocks.len() {
                return Err(Error::ShapeMismatch(format!("bad block index ({i},{j})")));
            }
            if m.rows() != blocks[i].size() || m.cols() != blocks[j].size() {
                return Err(Error::ShapeMismatch(format!("upper block ({i},{j}) has wrong shape")));
            }
        }
        Ok(BlockSystem { blocks, upper })
    }

    pub fn graded_of(blocks: Vec<DiagBlock>) -> Result<Self> {
        Self::new(blocks, BTreeMap::new())
    }

    /// Two-slope convenience constructor.
    pub fn two_slope(b1: DiagBlock, b2: DiagBlock, upper: LaurentMatrix) -> Result<Self> {
        let mut map = BTreeMap::new();
        map.insert((0usize, 1usize), upper);
        Self::new(vec![b1, b2], map)
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.size()).sum()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size()).collect()
    }

    pub fn block_start(&self, i: usize) -> usize {
        self.blocks[..i].iter().map(|b| b.size()).sum()
    }

    pub fn slopes(&self) -> Vec<Rat> {
        self.blocks.iter().map(|b| b.slope()).collect()
    }

    /// q-Gevrey level of the (i,j) layer.
    pub fn level(&self, i: usize, j: usize) -> Rat {
        self.blocks[j].slope().sub(&self.blocks[i].slope())
    }

    pub fn newton(&self) -> NewtonData {
        NewtonData {
            slopes: self.slopes(),
            mults: self.blocks.iter().map(|b| b.size()).collect(),
        }
    }

    /// Zero all upper blocks.
    pub fn graded(&self) -> BlockSystem {
        BlockSystem { blocks: self.blocks.clone(), upper: BTreeMap::new() }
    }

    pub fn upper_block(&self, i: usize, j: usize) -> LaurentMatrix {
        self.upper
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| LaurentMatrix::zeros(self.blocks[i].size(), self.blocks[j].size()))
    }

    pub fn to_laurent(&self, qp: &QParams) -> LaurentMatrix {
        let n = self.size();
        let mut m = LaurentMatrix::zeros(n, n);
        for (i, b) in self.blocks.iter().enumerate() {
            m.set_submatrix(self.block_start(i), self.block_start(i), &b.to_laurent(qp));
        }
        for (&(i, j), u) in &self.upper {
            m.set_submatrix(self.block_start(i), self.block_start(j), u);
        }
        m
    }

    pub fn all_integer_slopes(&self) -> bool {
        self.blocks.iter().all(|b| b.slope().is_integer())
    }
}

/// Element of the unipotent gauge group attached to a block shape: identity
/// diagonal blocks, zero below, arbitrary Laurent blocks above.
#[derive(Clone, Debug)]
pub struct GaugeTransform {
    pub mat: LaurentMatrix,
    pub shape: Vec<usize>,
}

impl GaugeTransform {
    pub fn identity(shape: &[usize]) -> Self {
        let n = shape.iter().sum();
        GaugeTransform { mat: LaurentMatrix::identity(n), shape: shape.to_vec() }
    }

    pub fn from_blocks(
        shape: &[usize],
        blocks: &BTreeMap<(usize, usize), LaurentMatrix>,
    ) -> Result<Self> {
        let mut g = Self::identity(shape);
        let start = |i: usize| -> usize { shape[..i].iter().sum() };
        for (&(i, j), m) in blocks {
            if i >= j || j >= shape.len() {
                return Err(Error::ShapeMismatch(format!("bad gauge block ({i},{j})")));
            }
            if m.rows() != shape[i] || m.cols() != shape[j] {
                return Err(Error::ShapeMismatch(format!("gauge block ({i},{j}) has wrong shape")));
            }
            g.mat.set_submatrix(start(i), start(j), m);
        }
        Ok(g)
    }

    pub fn block(&self, i: usize, j: usize) -> LaurentMatrix {
        let start = |i: usize| -> usize { self.shape[..i].iter().sum() };
        self.mat.submatrix(start(i), start(j), self.shape[i], self.shape[j])
    }

    pub fn inverse(&self) -> Result<GaugeTransform> {
        Ok(GaugeTransform {
            mat: self.mat.inverse_unipotent(&self.shape)?,
            shape: self.shape.clone(),
        })
    }

    pub fn compose(&self, other: &GaugeTransform) -> GaugeTransform {
        GaugeTransform { mat: self.mat.mul(&other.mat), shape: self.shape.clone() }
    }
}

/// F[A] := (σ_q F) A F^{-1} for F in the unipotent gauge group of A's shape.
/// The graded part is untouched; the upper blocks are re-extracted.
pub fn gauge(f: &GaugeTransform, a: &BlockSystem, qp: &QParams) -> Result<BlockSystem> {
    if f.shape != a.shape() {
        return Err(Error::ShapeMismatch("gauge and system shapes differ".into()));
    }
    let al = a.to_laurent(qp);
    let f_inv = f.inverse()?;
    let m = f.mat.sigma_q(qp).mul(&al).mul(&f_inv.mat);
    // re-read the block structure
    let mut upper = BTreeMap::new();
    let k = a.k();
    for i in 0..k {
        for j in i + 1..k {
            let blk = m.submatrix(a.block_start(i), a.block_start(j), a.blocks[i].size(), a.blocks[j].size());
            if !blk.support().is_empty() {
                upper.insert((i, j), blk);
            }
        }
    }
    // sanity: diagonal blocks must be reproduced and nothing appears below
    let scale = al.max_abs().max(1.0);
    for i in 0..k {
        let d = m.submatrix(a.block_start(i), a.block_start(i), a.blocks[i].size(), a.blocks[i].size());
        if d.max_coeff_diff(&a.blocks[i].to_laurent(qp)) > 1e-9 * scale {
            return Err(Error::SingularGauge);
        }
        for j in 0..i {
            let low = m.submatrix(a.block_start(i), a.block_start(j), a.blocks[i].size(), a.blocks[j].size());
            if low.max_abs() > 1e-9 * scale {
                return Err(Error::SingularGauge);
            }
        }
    }
    BlockSystem::new(a.blocks.clone(), upper)
}

/// Verify (σ_q F) A = B F coefficientwise; returns (within_tol, residual).
pub fn is_gauge_between(
    f: &LaurentMatrix,
    a: &BlockSystem,
    b: &BlockSystem,
    qp: &QParams,
    tol: f64,
) -> (bool, f64) {
    let res = crate::lmatrix::morphism_residual(f, &a.to_laurent(qp), &b.to_laurent(qp), qp);
    let scale = a.to_laurent(qp).max_abs().max(1.0);
    (res <= tol * scale, res)
}

/// Newton polygon of a scalar operator Σ a_k σ^k from the valuations
/// (k, v(a_k)) of its nonzero coefficients: lower convex hull, module slopes
/// being the negatives of the geometric slopes, multiplicities the
/// horizontal widths. Calibrated so σ − a z^μ has slope μ.
pub fn newton_polygon_scalar(points: &[(i64, i64)]) -> Result<NewtonData> {
    if points.len() < 2 {
        return Err(Error::EmptyOperator);
    }
    let mut pts = points.to_vec();
    pts.sort_unstable();
    for w in pts.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidInput("duplicate operator degree".into()));
        }
    }
    // Andrew's monotone chain, lower hull only
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // keep the turn strictly convex downward
            if (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1) <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut slopes = Vec::new();
    let mut mults = Vec::new();
    for w in hull.windows(2) {
        let run = w[1].0 - w[0].0;
        let rise = w[1].1 - w[0].1;
        slopes.push(Rat::new(-rise, run));
        mults.push(run as usize);
    }
    // module slopes are the negated geometric ones, so reverse to ascend
    slopes.reverse();
    mults.reverse();
    let nd = NewtonData { slopes, mults };
    nd.validate()?;
    Ok(nd)
}

/// Graded part of a morphism F : A → B between block systems: the block
/// F_{j,i} survives only when the row slope ν_j equals the column slope μ_i.
pub fn graded_morphism(
    f: &LaurentMatrix,
    row_data: &[(Rat, usize)],
    col_data: &[(Rat, usize)],
) -> LaurentMatrix {
    let mut out = LaurentMatrix::zeros(f.rows(), f.cols());
    let mut r0 = 0usize;
    for &(nu, sr) in row_data {
        let mut c0 = 0usize;
        for &(mu, sc) in col_data {
            if nu == mu {
                out.set_submatrix(r0, c0, &f.submatrix(r0, c0, sr, sc));
            }
            c0 += sc;
        }
        r0 += sr;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GevreyMode {
    /// keep levels ≥ δ
    Geq,
    /// keep levels > δ
    Gt,
    /// keep exactly the level δ
    Layer,
}

/// Zero gauge blocks by their q-Gevrey level μ_j − μ_i relative to δ.
pub fn gevrey_truncate(
    f: &GaugeTransform,
    slopes: &[Rat],
    delta: Rat,
    mode: GevreyMode,
) -> GaugeTransform {
    let mut out = GaugeTransform::identity(&f.shape);
    let start = |i: usize, shape: &[usize]| -> usize { shape[..i].iter().sum() };
    for i in 0..f.shape.len() {
        for j in i + 1..f.shape.len() {
            let level = slopes[j].sub(&slopes[i]);
            let keep = match mode {
                GevreyMode::Geq => level >= delta,
                GevreyMode::Gt => level > delta,
                GevreyMode::Layer => level == delta,
            };
            if keep {
                out.mat.set_submatrix(start(i, &f.shape), start(j, &f.shape), &f.block(i, j));
            }
        }
    }
    out
}

/// log on the unipotent gauge group: log(I + N) with N strictly block-upper;
/// the series stops after #blocks terms.
pub fn gauge_log(f: &GaugeTransform) -> LaurentMatrix {
    let n: usize = f.shape.iter().sum();
    let id = LaurentMatrix::identity(n);
    let x = f.mat.sub(&id);
    let mut term = x.clone();
    let mut acc = LaurentMatrix::zeros(n, n);
    for k in 1..=f.shape.len() {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc = acc.add(&term.scale(C::new(sign / k as f64, 0.0)));
        term = term.mul(&x);
    }
    acc
}

/// exp of a strictly block-upper Laurent matrix.
pub fn gauge_exp(x: &LaurentMatrix, shape: &[usize]) -> GaugeTransform {
    let n: usize = shape.iter().sum();
    let mut acc = LaurentMatrix::identity(n);
    let mut term = LaurentMatrix::identity(n);
    for k in 1..=shape.len() {
        term = term.mul(x).scale(C::new(1.0 / k as f64, 0.0));
        acc = acc.add(&term);
    }
    GaugeTransform { mat: acc, shape: shape.to_vec() }
}

/// Birkhoff-Guenther normalization for integral slopes: the unique gauge
/// equivalent of A whose block (i,j) is supported on exponents [μ_i, μ_j),
/// together with the certifying unipotent gauge F (so F[A] is the output).
///
/// Layers are processed in increasing q-Gevrey level; each layer reduces to
/// the linear recursion
///   q^{e−μ_j} F^{(e−μ_j)} A_j − A_i F^{(e−μ_i)} = V^{(e)} − Ũ^{(e)},
/// solved downward above the window and upward below it, the window
/// coefficients of V being whatever remains.
pub fn bg_normalize(a: &BlockSystem, qp: &QParams) -> Result<(BlockSystem, GaugeTransform)> {
    if !a.all_integer_slopes() {
        return Err(Error::Unsupported("normal form requires integral slopes".into()));
    }
    let k = a.k();
    let mut consts: Vec<(i64, CMatrix)> = Vec::new();
    for b in &a.blocks {
        match b {
            DiagBlock::ConstPower { mu, mat, .. } => consts.push((*mu, mat.clone())),
            _ => {
                return Err(Error::Unsupported(
                    "normal form requires constant-times-power diagonal blocks".into(),
                ))
            }
        }
    }
    // pairs sorted by level, then lexicographically
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((i, j));
        }
    }
    pairs.sort_by_key(|&(i, j)| (consts[j].0 - consts[i].0, i, j));

    let mut f_blocks: BTreeMap<(usize, usize), LaurentMatrix> = BTreeMap::new();
    let mut v_blocks: BTreeMap<(usize, usize), LaurentMatrix> = BTreeMap::new();

    for &(i, j) in &pairs {
        let (mu_i, ref a_i) = consts[i];
        let (mu_j, ref a_j) = consts[j];
        let delta = mu_j - mu_i;
        let a_j_inv = a_j.inverse().map_err(|_| Error::ResonantNormalization { i, j, exp: mu_j })?;
        let a_i_inv = a_i.inverse().map_err(|_| Error::ResonantNormalization { i, j, exp: mu_i })?;

        // effective right-hand side: U_{i,j} plus the cross terms of
        // already-solved lower levels
        let mut u_eff = a.upper_block(i, j);
        for l in i + 1..j {
            if let Some(fil) = f_blocks.get(&(i, l)) {
                u_eff = u_eff.add(&fil.sigma_q(qp).mul(&a.upper_block(l, j)));
            }
            if let (Some(vil), Some(flj)) = (v_blocks.get(&(i, l)), f_blocks.get(&(l, j))) {
                u_eff = u_eff.sub(&vil.mul(flj));
            }
        }

        let (ri, rj) = (a.blocks[i].size(), a.blocks[j].size());
        let support = u_eff.support();
        let mut f_coeffs: BTreeMap<i64, CMatrix> = BTreeMap::new();
        if let (Some(&e_lo), Some(&e_hi)) = (support.first(), support.last()) {
            // above the window: solve F^{(n)} down from the top
            let mut n = e_hi - mu_j;
            while n >= 0 {
                let upper_f = f_coeffs
                    .get(&(n + delta))
                    .cloned()
                    .unwrap_or_else(|| CMatrix::zeros(ri, rj));
                let rhs = a_i.mul(&upper_f).sub(&u_eff.coeff_matrix(n + mu_j));
                f_coeffs.insert(n, rhs.mul(&a_j_inv).scale(qp.q_powi(-n)));
                n -= 1;
            }
            // below the window: solve F^{(m)} up from the bottom
            let mut m = e_lo - mu_i;
            while m <= -1 {
                let lower_f = f_coeffs
                    .get(&(m - delta))
                    .cloned()
                    .unwrap_or_else(|| CMatrix::zeros(ri, rj));
                let rhs = lower_f.scale(qp.q_powi(m - delta)).mul(a_j).add(&u_eff.coeff_matrix(m + mu_i));
                f_coeffs.insert(m, a_i_inv.mul(&rhs));
                m += 1;
            }
        }
        let mut f_ij = LaurentMatrix::zeros(ri, rj);
        for (&e, mat) in &f_coeffs {
            for r in 0..ri {
                for c in 0..rj {
                    if mat[(r, c)] != C::new(0.0, 0.0) {
                        let mut s = f_ij[(r, c)].clone();
                        s.set(e, mat[(r, c)]);
                        f_ij[(r, c)] = s;
                    }
                }
            }
        }
        // window coefficients of the normal form
        let mut v_ij = LaurentMatrix::zeros(ri, rj);
        for e in mu_i..mu_j {
            let f_top = f_coeffs.get(&(e - mu_j)).cloned().unwrap_or_else(|| CMatrix::zeros(ri, rj));
            let f_bot = f_coeffs.get(&(e - mu_i)).cloned().unwrap_or_else(|| CMatrix::zeros(ri, rj));
            let v_e = f_top.scale(qp.q_powi(e - mu_j)).mul(a_j).sub(&a_i.mul(&f_bot)).add(&u_eff.coeff_matrix(e));
            for r in 0..ri {
                for c in 0..rj {
                    if v_e[(r, c)] != C::new(0.0, 0.0) {
                        let mut s = v_ij[(r, c)].clone();
                        s.set(e, v_e[(r, c)]);
                        v_ij[(r, c)] = s;
                    }
                }
            }
        }
        if !f_ij.support().is_empty() {
            f_blocks.insert((i, j), f_ij);
        }
        if !v_ij.support().is_empty() {
            v_blocks.insert((i, j), v_ij);
        }
    }

    let shape = a.shape();
    let f = GaugeTransform::from_blocks(&shape, &f_blocks)?;
    let normal = BlockSystem::new(a.blocks.clone(), v_blocks)?;
    Ok((normal, f))
}

/// Dimension of the normal-form coordinate space Σ_{i<j} r_i r_j (μ_j − μ_i).
pub fn normal_form_dimension(a: &BlockSystem) -> i64 {
    let mut acc = 0i64;
    for i in 0..a.k() {
        for j in i + 1..a.k() {
            let level = a.level(i, j);
            acc += (a.blocks[i].size() * a.blocks[j].size()) as i64 * level.num / level.den;
        }
    }
    acc
}

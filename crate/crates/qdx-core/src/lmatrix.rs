//! Matrices with truncated Laurent-series entries: the working form of
//! q-difference systems and gauge transforms.

use crate::cmatrix::CMatrix;
use crate::error::{Error, Result};
use crate::numkernel::{LaurentSeries, QParams};
use crate::C;

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentMatrix {
    rows: usize,
    cols: usize,
    data: Vec<LaurentSeries>,
}

impl LaurentMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LaurentMatrix { rows, cols, data: vec![LaurentSeries::zero(0, 0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = LaurentSeries::one();
        }
        m
    }

    pub fn from_constant(c: &CMatrix) -> Self {
        Self::from_fn(c.rows(), c.cols(), |i, j| LaurentSeries::constant(c[(i, j)]))
    }

    /// z^k · C for a constant matrix C.
    pub fn monomial_times(k: i64, c: &CMatrix) -> Self {
        Self::from_fn(c.rows(), c.cols(), |i, j| LaurentSeries::monomial(k, c[(i, j)]))
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> LaurentSeries,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        LaurentMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn map(&self, mut f: impl FnMut(&LaurentSeries) -> LaurentSeries) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(&self[(i, j)]))
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].add(&o[(i, j)]))
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].sub(&o[(i, j)]))
    }

    pub fn scale(&self, s: C) -> Self {
        self.map(|e| e.scale(s))
    }

    pub fn scale_series(&self, s: &LaurentSeries) -> Self {
        self.map(|e| e.mul(s))
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "inner dimensions must agree");
        Self::from_fn(self.rows, o.cols, |i, j| {
            let mut acc = LaurentSeries::zero(0, 0);
            for k in 0..self.cols {
                if self[(i, k)].is_zero() || o[(k, j)].is_zero() {
                    continue;
                }
                acc = acc.add(&self[(i, k)].mul(&o[(k, j)]));
            }
            acc
        })
    }

    pub fn mul_const_right(&self, c: &CMatrix) -> Self {
        self.mul(&Self::from_constant(c))
    }

    pub fn mul_const_left(c: &CMatrix, m: &Self) -> Self {
        Self::from_constant(c).mul(m)
    }

    pub fn sigma_q(&self, qp: &QParams) -> Self {
        self.map(|e| e.sigma_q(qp))
    }

    pub fn dilate(&self, lambda: C) -> Result<Self> {
        if lambda == C::new(0.0, 0.0) {
            return Err(Error::ZeroDilation);
        }
        Ok(self.map(|e| e.dilate(lambda).expect("nonzero λ")))
    }

    /// Substitute z = w^r in every entry.
    pub fn ramify(&self, r: u32) -> Self {
        self.map(|e| e.ramify(r))
    }

    /// Keep exponents divisible by r, reindexed by e/r.
    pub fn unramify_project(&self, r: u32) -> Self {
        self.map(|e| e.unramify_project(r))
    }

    /// μ_r-averaging without reindexing.
    pub fn mu_r_average(&self, r: u32) -> Self {
        self.map(|e| e.mu_r_average(r))
    }

    /// Entrywise action of w ↦ ζ_r w.
    pub fn galois_twist(&self, r: u32) -> Self {
        self.map(|e| e.galois_twist(r))
    }

    pub fn evaluate(&self, z: C) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].evaluate(z)?;
            }
        }
        Ok(out)
    }

    /// The constant matrix of coefficients at exponent e.
    pub fn coeff_matrix(&self, e: i64) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].coeff(e))
    }

    /// Union of entry supports.
    pub fn support(&self) -> Vec<i64> {
        let mut s: Vec<i64> = Vec::new();
        for e in &self.data {
            for (k, _) in e.terms() {
                if !s.contains(&k) {
                    s.push(k);
                }
            }
        }
        s.sort_unstable();
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn max_coeff_diff(&self, o: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let mut m = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self[(i, j)].max_coeff_diff(&o[(i, j)]));
            }
        }
        m
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }

    /// Kronecker product with a constant matrix on the right.
    pub fn kron_const(&self, other: &CMatrix) -> Self {
        let mut out = Self::zeros(self.rows * other.rows(), self.cols * other.cols());
        for i in 0..self.rows {
            for j in 0..self.cols {
                for p in 0..other.rows() {
                    for q in 0..other.cols() {
                        out[(i * other.rows() + p, j * other.cols() + q)] =
                            self[(i, j)].scale(other[(p, q)]);
                    }
                }
            }
        }
        out
    }

    /// Exact inverse of I + N with N strictly upper by blocks of the given
    /// sizes: the Neumann series terminates after #blocks steps.
    pub fn inverse_unipotent(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().sum();
        if n != self.rows || !is_unipotent(self, shape) {
            return Err(Error::SingularGauge);
        }
        let id = Self::identity(n);
        let nil = self.sub(&id);
        let mut acc = id.clone();
        let mut term = id;
        for _ in 0..shape.len() {
            term = term.mul(&nil).scale(C::new(-1.0, 0.0));
            if term.max_abs() == 0.0 {
                break;
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Inverse of D + N with D an invertible graded diagonal (per block a
    /// z-power times a constant) and N strictly block-upper: factor as
    /// D (I + D^{-1} N) and invert both parts exactly.
    pub fn inverse_graded_unipotent(
        &self,
        shape: &[usize],
        diag: &[(i64, CMatrix)],
    ) -> Result<Self> {
        let n: usize = shape.iter().sum();
        assert_eq!(n, self.rows);
        let mut d_inv = Self::zeros(n, n);
        let mut off = 0usize;
        for (b, sz) in shape.iter().enumerate() {
            let inv = diag[b].1.inverse()?;
            d_inv.set_submatrix(off, off, &Self::monomial_times(-diag[b].0, &inv));
            off += sz;
        }
        let u = d_inv.mul(self);
        let u_inv = u.inverse_unipotent(shape)?;
        Ok(u_inv.mul(&d_inv))
    }
}

fn is_unipotent(m: &LaurentMatrix, shape: &[usize]) -> bool {
    let mut starts = vec![0usize];
    for s in shape {
        starts.push(starts.last().unwrap() + s);
    }
    let n = *starts.last().unwrap();
    if m.rows() != n || m.cols() != n {
        return false;
    }
    for (b, &s0) in starts[..shape.len()].iter().enumerate() {
        let s1 = starts[b + 1];
        for i in s0..s1 {
            for j in 0..s0 {
                if !m[(i, j)].is_zero() {
                    return false;
                }
            }
            for j in s0..s1 {
                let want =
                    if i == j { LaurentSeries::one() } else { LaurentSeries::zero(0, 0) };
                if m[(i, j)].max_coeff_diff(&want) > 1e-12 {
                    return false;
                }
            }
        }
    }
    true
}

impl std::ops::Index<(usize, usize)> for LaurentMatrix {
    type Output = LaurentSeries;
    fn index(&self, (i, j): (usize, usize)) -> &LaurentSeries {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for LaurentMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut LaurentSeries {
        let c = self.cols;
        &mut self.data[i * c + j]
    }
}

/// Gauge action F[A] := (σ_q F) · A · F^{-1}; the caller supplies the inverse
/// so that the exact structural inversion can be used.
pub fn gauge_with_inverse(
    f: &LaurentMatrix,
    f_inv: &LaurentMatrix,
    a: &LaurentMatrix,
    qp: &QParams,
) -> LaurentMatrix {
    f.sigma_q(qp).mul(a).mul(f_inv)
}

/// Gauge action by a constant invertible matrix.
pub fn gauge_const(f: &CMatrix, a: &LaurentMatrix) -> Result<LaurentMatrix> {
    let inv = f.inverse()?;
    Ok(LaurentMatrix::mul_const_left(f, &a.mul_const_right(&inv)))
}

/// Residual of the morphism equation (σ_q F) A − B F, coefficientwise.
pub fn morphism_residual(
    f: &LaurentMatrix,
    a: &LaurentMatrix,
    b: &LaurentMatrix,
    qp: &QParams,
) -> f64 {
    let lhs = f.sigma_q(qp).mul(a);
    let rhs = b.mul(f);
    lhs.max_coeff_diff(&rhs)
}

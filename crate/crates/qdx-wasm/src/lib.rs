//! Thin wasm-bindgen surface over qdx-core for the browser demo:
//! the modulus landscape of θ_q with its zero spiral, the hexagonal-lattice
//! series whose sign change locates a bad value of q, and the root grids
//! c_{l,m} of forbidden summation directions.

use num_complex::Complex64 as C;
use qdx_core::elliptic::{canonicalize, character_gamma, root_grid};
use qdx_core::numkernel::QParams;
use qdx_core::theta::{find_bad_q, hex_series, theta};
use wasm_bindgen::prelude::*;

fn qparams(q_abs: f64, q_arg: f64) -> Result<QParams, JsValue> {
    let q = C::from_polar(q_abs, q_arg);
    QParams::from_q(q, 1, C::new(1.31, 0.47)).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// log₁₀|θ_q| sampled on an n×n grid over the square [−rmax, rmax]².
/// Returns n·n values in row-major order; the origin is masked with NaN.
#[wasm_bindgen]
pub fn theta_field(q_abs: f64, q_arg: f64, n: usize, rmax: f64) -> Result<Vec<f64>, JsValue> {
    let qp = qparams(q_abs, q_arg)?;
    let mut out = Vec::with_capacity(n * n);
    for iy in 0..n {
        let im = rmax - 2.0 * rmax * iy as f64 / (n - 1) as f64;
        for ix in 0..n {
            let re = -rmax + 2.0 * rmax * ix as f64 / (n - 1) as f64;
            let z = C::new(re, im);
            if z.norm() < 1e-3 * rmax {
                out.push(f64::NAN);
                continue;
            }
            match theta(&qp, z) {
                Ok(v) => out.push(v.norm().max(1e-300).log10()),
                Err(_) => out.push(f64::NAN),
            }
        }
    }
    Ok(out)
}

/// Zeros of θ_q inside |z| ≤ rmax: the spiral points −q^k, flattened as
/// [re, im, …].
#[wasm_bindgen]
pub fn theta_zeros(q_abs: f64, q_arg: f64, rmax: f64) -> Result<Vec<f64>, JsValue> {
    let qp = qparams(q_abs, q_arg)?;
    let mut out = Vec::new();
    for k in -40i64..=40 {
        let z = -qp.q_powi(k);
        if z.norm() <= rmax {
            out.push(z.re);
            out.push(z.im);
        }
    }
    Ok(out)
}

/// Samples of the lattice series f(x) = Σ r(n) xⁿ on x ∈ [x_lo, x_hi].
/// Returns interleaved [x, f(x), …].
#[wasm_bindgen]
pub fn hex_curve(x_lo: f64, x_hi: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let x = x_lo + (x_hi - x_lo) * k as f64 / (points - 1) as f64;
        let y = hex_series(x).map_err(|e| JsValue::from_str(&e.to_string()))?;
        out.push(x);
        out.push(y);
    }
    Ok(out)
}

/// The located bad value: [x*, q*, |f(x*)|, |t₀^(3)(q*)|].
#[wasm_bindgen]
pub fn bad_q_root() -> Result<Vec<f64>, JsValue> {
    let bad = find_bad_q().map_err(|e| JsValue::from_str(&e.to_string()))?;
    Ok(vec![bad.x_star, bad.q_star, bad.f_residual, bad.t03_residual])
}

/// The δ² grid points c_{l,m} of the class of 1/a, flattened as
/// [re, im, l, m, …]. These are the forbidden directions of the two-slope
/// model system (a, u; 0, z^δ).
#[wasm_bindgen]
pub fn grid_points(
    q_abs: f64,
    q_arg: f64,
    delta: u32,
    a_re: f64,
    a_im: f64,
) -> Result<Vec<f64>, JsValue> {
    let qp = qparams(q_abs, q_arg)?;
    let a = C::new(a_re, a_im);
    let beta = canonicalize(1.0 / a, &qp).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let grid = root_grid(delta, &beta, &qp);
    let mut out = Vec::new();
    for l in 0..delta as i64 {
        for m in 0..delta as i64 {
            let c = grid.point(l, m);
            out.push(c.re);
            out.push(c.im);
            out.push(l as f64);
            out.push(m as f64);
        }
    }
    Ok(out)
}

/// Character values of a point: [γ₁re, γ₁im, γ₂re, γ₂im].
#[wasm_bindgen]
pub fn gamma_values(q_abs: f64, q_arg: f64, c_re: f64, c_im: f64) -> Result<Vec<f64>, JsValue> {
    let qp = qparams(q_abs, q_arg)?;
    let c = C::new(c_re, c_im);
    let g1 = character_gamma(1, c, &qp).map_err(|e| JsValue::from_str(&e.to_string()))?;
    let g2 = character_gamma(2, c, &qp).map_err(|e| JsValue::from_str(&e.to_string()))?;
    Ok(vec![g1.re, g1.im, g2.re, g2.im])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_and_grid_shapes() {
        let f = theta_field(4.0, 0.0, 16, 4.0).unwrap();
        assert_eq!(f.len(), 256);
        assert!(f.iter().filter(|v| v.is_finite()).count() > 200);
        let g = grid_points(4.0, 0.0, 3, 1.5, 0.4).unwrap();
        assert_eq!(g.len(), 9 * 4);
        let z = theta_zeros(4.0, 0.0, 4.0).unwrap();
        assert!(z.len() >= 2);
        let b = bad_q_root().unwrap();
        assert!(b[1] < -1.0);
        let curve = hex_curve(-0.9, -0.1, 32).unwrap();
        assert_eq!(curve.len(), 64);
        assert!(curve[1] < 0.0 && curve[63] > 0.0, "sign change along the curve");
        let gam = gamma_values(4.0, 0.0, 2.0, 0.0).unwrap();
        assert_eq!(gam.len(), 4);
        // γ₁(2) = 1 (positive real point), γ₂(2) = e^{2iπ·log_4 2} = e^{iπ} = −1
        assert!((gam[0] - 1.0).abs() < 1e-12 && gam[1].abs() < 1e-12);
        assert!((gam[2] + 1.0).abs() < 1e-12 && gam[3].abs() < 1e-12);
    }
}

//! JSON forms of the artifact types. Shapes are part of the external
//! interface, so encoding and parsing are written out explicitly rather
//! than derived.
//!
//! - complex numbers: `[re, im]`
//! - `LaurentSeries`: `{"window":[lo,hi],"coeffs":{"<exp>":[re,im],…}}`
//! - `QParams`: `{"tau":[re,im],"r":r,"z0":[re,im]}`
//! - `EllipticPoint`: `{"rep":[re,im],"base":"q"|"qr","base_r":r}`
//! - `BlockSystem`: `{"newton":{…},"diag":[…],"upper":{"i,j":…}}`
//! - `AlienBlock`: `{"delta":δ,"alpha":…,"beta":…,"block":[i,j],"N":[[…]]}`

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::alien::AlienBlock;
use crate::cmatrix::CMatrix;
use crate::elliptic::EllipticPoint;
use crate::error::{Error, Result};
use crate::formal::{FormalElement, IrreducibleObject, PsiKind, PsiSymbol, WildGroupElement};
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::{LaurentSeries, QParams};
use crate::qdmod::{BlockSystem, DiagBlock, NewtonData};
use crate::rat::Rat;
use crate::C;

fn bad(msg: &str) -> Error {
    Error::InvalidInput(format!("json: {msg}"))
}

pub fn complex_to_json(c: C) -> Value {
    json!([c.re, c.im])
}

pub fn complex_from_json(v: &Value) -> Result<C> {
    let arr = v.as_array().ok_or_else(|| bad("expected [re, im]"))?;
    if arr.len() != 2 {
        return Err(bad("expected [re, im]"));
    }
    Ok(C::new(
        arr[0].as_f64().ok_or_else(|| bad("re must be a number"))?,
        arr[1].as_f64().ok_or_else(|| bad("im must be a number"))?,
    ))
}

pub fn series_to_json(s: &LaurentSeries) -> Value {
    let (lo, hi) = s.window();
    let mut coeffs = Map::new();
    for (e, c) in s.terms() {
        coeffs.insert(e.to_string(), complex_to_json(c));
    }
    json!({"window": [lo, hi], "coeffs": Value::Object(coeffs)})
}

pub fn series_from_json(v: &Value) -> Result<LaurentSeries> {
    let window = v.get("window").ok_or_else(|| bad("series needs a window"))?;
    let warr = window.as_array().ok_or_else(|| bad("window must be [lo, hi]"))?;
    let lo = warr[0].as_i64().ok_or_else(|| bad("lo"))?;
    let hi = warr[1].as_i64().ok_or_else(|| bad("hi"))?;
    let mut s = LaurentSeries::zero(lo, hi);
    if let Some(coeffs) = v.get("coeffs").and_then(|c| c.as_object()) {
        for (k, cv) in coeffs {
            let e: i64 = k.parse().map_err(|_| bad("exponent key"))?;
            s.set(e, complex_from_json(cv)?);
        }
    }
    Ok(s)
}

pub fn qparams_to_json(qp: &QParams) -> Value {
    json!({
        "tau": complex_to_json(qp.tau()),
        "r": qp.ram_index(),
        "z0": complex_to_json(qp.z0()),
    })
}

pub fn qparams_from_json(v: &Value) -> Result<QParams> {
    let tau = complex_from_json(v.get("tau").ok_or_else(|| bad("tau"))?)?;
    let r = v.get("r").and_then(|x| x.as_u64()).unwrap_or(1) as u32;
    let z0 = match v.get("z0") {
        Some(z) => complex_from_json(z)?,
        None => C::new(1.31, 0.47),
    };
    QParams::new(tau, r, z0)
}

pub fn point_to_json(p: &EllipticPoint) -> Value {
    json!({
        "rep": complex_to_json(p.rep),
        "base": if p.base_r == 1 { "q" } else { "qr" },
        "base_r": p.base_r,
    })
}

pub fn point_from_json(v: &Value) -> Result<EllipticPoint> {
    let rep = complex_from_json(v.get("rep").ok_or_else(|| bad("rep"))?)?;
    let base_r = v.get("base_r").and_then(|x| x.as_u64()).unwrap_or(1) as u32;
    Ok(EllipticPoint { rep, base_r })
}

pub fn cmatrix_to_json(m: &CMatrix) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| Value::Array((0..m.cols()).map(|j| complex_to_json(m[(i, j)])).collect()))
        .collect();
    Value::Array(rows)
}

pub fn cmatrix_from_json(v: &Value) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| bad("matrix rows"))?;
    let r = rows.len();
    let c = rows
        .first()
        .and_then(|x| x.as_array())
        .map(|x| x.len())
        .unwrap_or(0);
    let mut m = CMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| bad("matrix row"))?;
        if row.len() != c {
            return Err(bad("ragged matrix"));
        }
        for (j, cv) in row.iter().enumerate() {
            m[(i, j)] = complex_from_json(cv)?;
        }
    }
    Ok(m)
}

pub fn lmatrix_to_json(m: &LaurentMatrix) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| Value::Array((0..m.cols()).map(|j| series_to_json(&m[(i, j)])).collect()))
        .collect();
    json!({"rows": m.rows(), "cols": m.cols(), "entries": rows})
}

pub fn lmatrix_from_json(v: &Value) -> Result<LaurentMatrix> {
    let rows = v.get("rows").and_then(|x| x.as_u64()).ok_or_else(|| bad("rows"))? as usize;
    let cols = v.get("cols").and_then(|x| x.as_u64()).ok_or_else(|| bad("cols"))? as usize;
    let entries = v.get("entries").and_then(|x| x.as_array()).ok_or_else(|| bad("entries"))?;
    let mut m = LaurentMatrix::zeros(rows, cols);
    for (i, row) in entries.iter().enumerate().take(rows) {
        let row = row.as_array().ok_or_else(|| bad("entry row"))?;
        for (j, sv) in row.iter().enumerate().take(cols) {
            m[(i, j)] = series_from_json(sv)?;
        }
    }
    Ok(m)
}

fn rat_to_json(r: &Rat) -> Value {
    json!([r.num, r.den])
}

fn rat_from_json(v: &Value) -> Result<Rat> {
    let arr = v.as_array().ok_or_else(|| bad("rational must be [num, den]"))?;
    Ok(Rat::new(
        arr[0].as_i64().ok_or_else(|| bad("num"))?,
        arr[1].as_i64().ok_or_else(|| bad("den"))?,
    ))
}

pub fn newton_to_json(n: &NewtonData) -> Value {
    json!({
        "slopes": n.slopes.iter().map(rat_to_json).collect::<Vec<_>>(),
        "mults": n.mults,
    })
}

pub fn newton_from_json(v: &Value) -> Result<NewtonData> {
    let slopes = v
        .get("slopes")
        .and_then(|x| x.as_array())
        .ok_or_else(|| bad("slopes"))?
        .iter()
        .map(rat_from_json)
        .collect::<Result<Vec<_>>>()?;
    let mults = v
        .get("mults")
        .and_then(|x| x.as_array())
        .ok_or_else(|| bad("mults"))?
        .iter()
        .map(|x| x.as_u64().map(|u| u as usize).ok_or_else(|| bad("mult")))
        .collect::<Result<Vec<_>>>()?;
    let nd = NewtonData { slopes, mults };
    nd.validate()?;
    Ok(nd)
}

fn diag_to_json(b: &DiagBlock) -> Value {
    match b {
        DiagBlock::ConstPower { mu, mat, eigs } => json!({
            "type": "const",
            "mu": mu,
            "mat": cmatrix_to_json(mat),
            "eigs": eigs.iter().map(|&e| complex_to_json(e)).collect::<Vec<_>>(),
        }),
        DiagBlock::Irreducible { obj, m } => json!({
            "type": "irreducible",
            "r": obj.r,
            "d": obj.d,
            "c": complex_to_json(obj.c),
            "m": m,
        }),
    }
}

fn diag_from_json(v: &Value) -> Result<DiagBlock> {
    match v.get("type").and_then(|t| t.as_str()) {
        Some("const") => {
            let mu = v.get("mu").and_then(|x| x.as_i64()).ok_or_else(|| bad("mu"))?;
            let mat = cmatrix_from_json(v.get("mat").ok_or_else(|| bad("mat"))?)?;
            match v.get("eigs").and_then(|x| x.as_array()) {
                Some(eigs) => {
                    let eigs = eigs.iter().map(complex_from_json).collect::<Result<Vec<_>>>()?;
                    DiagBlock::const_power_with_eigs(mu, mat, eigs)
                }
                None => DiagBlock::const_power(mu, mat),
            }
        }
        Some("irreducible") => {
            let r = v.get("r").and_then(|x| x.as_u64()).ok_or_else(|| bad("r"))? as u32;
            let d = v.get("d").and_then(|x| x.as_i64()).ok_or_else(|| bad("d"))?;
            let c = complex_from_json(v.get("c").ok_or_else(|| bad("c"))?)?;
            let m = v.get("m").and_then(|x| x.as_u64()).unwrap_or(1) as usize;
            Ok(DiagBlock::Irreducible { obj: IrreducibleObject::new(r, d, c)?, m })
        }
        _ => Err(bad("block type must be 'const' or 'irreducible'")),
    }
}

pub fn system_to_json(a: &BlockSystem) -> Value {
    let mut upper = Map::new();
    for (&(i, j), m) in &a.upper {
        upper.insert(format!("{i},{j}"), lmatrix_to_json(m));
    }
    json!({
        "newton": newton_to_json(&a.newton()),
        "diag": a.blocks.iter().map(diag_to_json).collect::<Vec<_>>(),
        "upper": Value::Object(upper),
    })
}

pub fn system_from_json(v: &Value) -> Result<BlockSystem> {
    let diag = v
        .get("diag")
        .and_then(|x| x.as_array())
        .ok_or_else(|| bad("diag"))?
        .iter()
        .map(diag_from_json)
        .collect::<Result<Vec<_>>>()?;
    let mut upper = BTreeMap::new();
    if let Some(obj) = v.get("upper").and_then(|x| x.as_object()) {
        for (k, mv) in obj {
            let mut it = k.split(',');
            let i: usize = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("upper key"))?;
            let j: usize = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("upper key"))?;
            upper.insert((i, j), lmatrix_from_json(mv)?);
        }
    }
    let sys = BlockSystem::new(diag, upper)?;
    if let Some(nv) = v.get("newton") {
        let declared = newton_from_json(nv)?;
        if declared != sys.newton() {
            return Err(bad("declared newton data disagrees with the blocks"));
        }
    }
    Ok(sys)
}

pub fn alien_block_to_json(b: &AlienBlock) -> Value {
    json!({
        "delta": b.delta,
        "alpha": point_to_json(&b.alpha),
        "beta": point_to_json(&b.beta),
        "block": [b.block.0, b.block.1],
        "N": cmatrix_to_json(&b.n),
    })
}

pub fn alien_block_from_json(v: &Value) -> Result<AlienBlock> {
    Ok(AlienBlock {
        delta: v.get("delta").and_then(|x| x.as_i64()).ok_or_else(|| bad("delta"))?,
        alpha: point_from_json(v.get("alpha").ok_or_else(|| bad("alpha"))?)?,
        beta: point_from_json(v.get("beta").ok_or_else(|| bad("beta"))?)?,
        block: {
            let arr = v.get("block").and_then(|x| x.as_array()).ok_or_else(|| bad("block"))?;
            (
                arr[0].as_u64().ok_or_else(|| bad("block i"))? as usize,
                arr[1].as_u64().ok_or_else(|| bad("block j"))? as usize,
            )
        },
        n: cmatrix_from_json(v.get("N").ok_or_else(|| bad("N"))?)?,
    })
}

pub fn formal_element_to_json(f: &FormalElement) -> Value {
    json!({
        "lambda": complex_to_json(f.lambda),
        "t": complex_to_json(f.t),
        "k1": f.k1,
        "k2": f.k2,
    })
}

pub fn formal_element_from_json(v: &Value) -> Result<FormalElement> {
    Ok(FormalElement {
        lambda: match v.get("lambda") {
            Some(x) => complex_from_json(x)?,
            None => C::new(0.0, 0.0),
        },
        t: match v.get("t") {
            Some(x) => complex_from_json(x)?,
            None => C::new(1.0, 0.0),
        },
        k1: v.get("k1").and_then(|x| x.as_i64()).unwrap_or(0),
        k2: v.get("k2").and_then(|x| x.as_i64()).unwrap_or(0),
    })
}

pub fn wild_to_json(g: &WildGroupElement) -> Value {
    json!({"x": [g.x.num, g.x.den], "k1": g.k1, "k2": g.k2})
}

pub fn wild_from_json(v: &Value) -> Result<WildGroupElement> {
    let x = match v.get("x") {
        Some(x) => rat_from_json(x)?,
        None => Rat::zero(),
    };
    Ok(WildGroupElement::new(
        x,
        v.get("k1").and_then(|x| x.as_i64()).unwrap_or(0),
        v.get("k2").and_then(|x| x.as_i64()).unwrap_or(0),
    ))
}

pub fn psi_to_json(s: &PsiSymbol) -> Value {
    match &s.kind {
        PsiKind::Tau => json!({"kind": "tau", "coeff": complex_to_json(s.coeff)}),
        PsiKind::Graded { delta, beta, l } => json!({
            "kind": "graded",
            "delta": delta,
            "beta": point_to_json(beta),
            "l": l,
            "coeff": complex_to_json(s.coeff),
        }),
    }
}

pub fn psi_from_json(v: &Value) -> Result<PsiSymbol> {
    let coeff = match v.get("coeff") {
        Some(x) => complex_from_json(x)?,
        None => C::new(1.0, 0.0),
    };
    match v.get("kind").and_then(|k| k.as_str()) {
        Some("tau") => Ok(PsiSymbol { kind: PsiKind::Tau, coeff }),
        _ => {
            let delta =
                v.get("delta").and_then(|x| x.as_u64()).ok_or_else(|| bad("delta"))? as u32;
            let beta = point_from_json(v.get("beta").ok_or_else(|| bad("beta"))?)?;
            let l = v.get("l").and_then(|x| x.as_i64()).unwrap_or(0);
            Ok(PsiSymbol {
                kind: PsiKind::Graded { delta, beta, l: l.rem_euclid(delta as i64) },
                coeff,
            })
        }
    }
}

/// Scalar operator input for the Newton polygon: a list of (degree,
/// valuation) pairs.
pub fn operator_points_from_json(v: &Value) -> Result<Vec<(i64, i64)>> {
    let arr = v.as_array().ok_or_else(|| bad("operator must be [[k, v], …]"))?;
    let mut out = Vec::new();
    for p in arr {
        let pair = p.as_array().ok_or_else(|| bad("point must be [k, v]"))?;
        out.push((
            pair[0].as_i64().ok_or_else(|| bad("k"))?,
            pair[1].as_i64().ok_or_else(|| bad("v"))?,
        ));
    }
    Ok(out)
}

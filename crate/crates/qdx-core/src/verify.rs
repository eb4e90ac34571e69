//! Named invariant suites behind `qdx verify`: each runs a module's
//! numerical identities against explicit thresholds and reports one line
//! per check. Reports are deterministic for a fixed seed and configuration.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::alien::{self, ActionKind, ClosedFormVariant, ETwoBlock};
use crate::elliptic::canonicalize;
use crate::error::{Error, Result};
use crate::formal::{
    act_wild, eta, formulaire_check, multiply, u_power, wild_multiply, FormalElement,
    IrreducibleObject, PsiSymbol, WildGroupElement,
};
use crate::lmatrix::LaurentMatrix;
use crate::numkernel::{LaurentSeries, QParams};
use crate::qdmod::{BlockSystem, DiagBlock};
use crate::rat::Rat;
use crate::rng::Rng;
use crate::stokes;
use crate::theta;
use crate::C;

/// Numeric configuration shared by the CLI and the harness.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub tau: C,
    pub r: u32,
    pub z0: C,
    pub window: i64,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RunConfig {
    pub fn with_q(q: C) -> Result<Self> {
        let qp = QParams::from_q(q, 1, C::new(1.31, 0.47))?;
        Ok(RunConfig {
            tau: qp.tau(),
            r: 1,
            z0: qp.z0(),
            window: 60,
            tolerances: BTreeMap::new(),
            seed: 12345,
        })
    }

    pub fn qparams(&self) -> Result<QParams> {
        QParams::new(self.tau, self.r, self.z0)
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.tolerances {
            if *v <= 0.0 {
                return Err(Error::InvalidInput(format!("tolerance {k} must be positive")));
            }
        }
        self.qparams().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub deviation: f64,
    pub threshold: f64,
    pub note: String,
}

impl CheckResult {
    fn graded(name: &str, deviation: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            status: if deviation <= threshold { Status::Pass } else { Status::Fail },
            deviation,
            threshold,
            note: String::new(),
        }
    }

    fn skip(name: &str, note: &str) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Skip,
            deviation: 0.0,
            threshold: 0.0,
            note: note.into(),
        }
    }
}

pub fn all_pass(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}

pub fn results_to_json(suite: &str, results: &[CheckResult]) -> Value {
    json!({
        "suite": suite,
        "pass": all_pass(results),
        "checks": results
            .iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "status": match r.status {
                        Status::Pass => "pass",
                        Status::Fail => "fail",
                        Status::Skip => "skip",
                    },
                    "deviation": r.deviation,
                    "threshold": r.threshold,
                    "note": r.note,
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn run_suite(suite: &str, cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    // the randomized draws and their separation constants are calibrated
    // for |q| ≥ 1.2; closer to the unit circle, theta values near the
    // negative ray shrink like e^{−π²/(2 ln|q|)} and every residue is
    // ill-conditioned in double precision. The suppression bites hardest
    // when q sits near the positive real axis, so that case needs more
    // margin.
    let q = cfg.qparams()?.q();
    if q.norm() < 1.2 || (q.norm() < 1.45 && q.arg().abs() < 0.15) {
        return Err(Error::InvalidInput(format!(
            "verification suites are calibrated for |q| ≥ 1.2 (≥ 1.45 near the positive real axis), got q = {q}"
        )));
    }
    match suite {
        "theta" => suite_theta(cfg),
        "stokes" => suite_stokes(cfg),
        "alien" => suite_alien(cfg),
        "formal" => suite_formal(cfg),
        "ramify" => suite_ramify(cfg),
        "all" => {
            let mut out = Vec::new();
            for s in ["theta", "stokes", "alien", "formal", "ramify"] {
                out.extend(run_suite(s, cfg)?);
            }
            Ok(out)
        }
        other => Err(Error::UnknownSuite(other.into())),
    }
}

fn random_series(rng: &mut Rng, lo: i64, hi: i64) -> LaurentSeries {
    let mut f = LaurentSeries::zero(lo, hi);
    for e in lo..=hi {
        f.set(e, C::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)));
    }
    f
}

fn suite_theta(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let qp = cfg.qparams()?;
    let mut rng = Rng::new(cfg.seed);
    let mut out = Vec::new();

    // functional equations on the fundamental annulus
    let mut dev = 0.0f64;
    for _ in 0..50 {
        let z = rng.annulus(1.0, qp.q().norm());
        let t = theta::theta(&qp, z)?;
        let tq = theta::theta(&qp, qp.q() * z)?;
        let ti = theta::theta(&qp, 1.0 / z)?;
        let scale = (z * t).norm().max(1.0);
        dev = dev.max((tq - z * t).norm() / scale).max((ti - z * t).norm() / scale);
    }
    out.push(CheckResult::graded("theta.functional_equations", dev, cfg.tol("theta", 1e-10)));

    // triple product
    let mut dev = 0.0f64;
    for _ in 0..30 {
        let z = rng.annulus(1.0, qp.q().norm());
        let a = theta::theta(&qp, z)?;
        let b = theta::triple_product(&qp, z)?;
        dev = dev.max((a - b).norm() / a.norm().max(1.0));
    }
    out.push(CheckResult::graded("theta.triple_product", dev, cfg.tol("theta", 1e-10)));

    // convolution table vs direct multi-index sums; the difference is
    // measured against the cancellation mass so the check stays meaningful
    // at bad values of q where the coefficients themselves nearly vanish
    let table = theta::ThetaCoeffTable::build(&qp, 3, 15);
    let abs_qp = QParams::from_q(C::new(qp.q().norm(), 0.0), 1, C::new(1.0, 0.0))?;
    let mass = theta::ThetaCoeffTable::build(&abs_qp, 3, 15);
    let mut dev = 0.0f64;
    for delta in 2..=3u32 {
        for n in -15..=15i64 {
            let a = theta::theta_power_coeff(&qp, delta, n);
            let b = table.get(delta, n);
            dev = dev.max((a - b).norm() / mass.get(delta, n).norm().max(1e-300));
        }
    }
    out.push(CheckResult::graded("theta.convolution_vs_direct", dev, cfg.tol("theta", 1e-10)));

    // shifted covariance θ_{q,qc}(z) = (qc/z) θ_{q,c}(z)
    let mut dev = 0.0f64;
    for _ in 0..20 {
        let c = rng.annulus(0.7, 2.5);
        let z = rng.annulus(1.0, 3.0);
        let lhs = theta::theta_shifted(&qp, qp.q() * c, z)?;
        let rhs = (qp.q() * c / z) * theta::theta_shifted(&qp, c, z)?;
        dev = dev.max((lhs - rhs).norm() / rhs.norm().max(1.0));
    }
    out.push(CheckResult::graded("theta.shifted_covariance", dev, cfg.tol("theta", 1e-10)));

    // hex counts against one-dimensional series products over the 4n lattice
    let n_max = 200usize;
    let counts = theta::hex_counts(n_max);
    let mut dev = 0.0f64;
    {
        let cap = 4 * n_max;
        let mut sq_even = vec![0u64; cap + 1];
        let mut sq_odd = vec![0u64; cap + 1];
        let mut th_even = vec![0u64; cap + 1];
        let mut th_odd = vec![0u64; cap + 1];
        let bound = (cap as f64).sqrt() as i64 + 1;
        for u in -bound..=bound {
            let k = (u * u) as usize;
            if k <= cap {
                if u.rem_euclid(2) == 0 {
                    sq_even[k] += 1;
                } else {
                    sq_odd[k] += 1;
                }
            }
            let k3 = (3 * u * u) as usize;
            if k3 <= cap {
                if u.rem_euclid(2) == 0 {
                    th_even[k3] += 1;
                } else {
                    th_odd[k3] += 1;
                }
            }
        }
        for n in 0..=n_max {
            let mut acc = 0u64;
            for k in 0..=4 * n {
                acc += sq_even[k] * th_even[4 * n - k] + sq_odd[k] * th_odd[4 * n - k];
            }
            if acc != counts[n] {
                dev = dev.max((acc as f64 - counts[n] as f64).abs());
            }
        }
    }
    out.push(CheckResult::graded("theta.hex_counts_vs_series_product", dev, 0.5));

    // good-value-dependent: nonvanishing certificate
    let report = theta::is_good_value(&qp, 4, 20, cfg.tol("good_q", 1e-12))?;
    if report.good_in_range {
        out.push(CheckResult::graded("theta.good_value_certificate", 0.0, 1.0));
    } else {
        out.push(CheckResult::skip(
            "theta.good_value_certificate",
            &format!(
                "q is bad in range: |t_{}^{}| = {:.3e}; dependent checks skipped",
                report.argmin.1, report.argmin.0, report.min_abs
            ),
        ));
    }
    Ok(out)
}

fn two_slope_sample(rng: &mut Rng, qp: &QParams) -> (BlockSystem, C) {
    loop {
        let delta = rng.int(1, 3);
        let a = rng.annulus(0.8, 3.0);
        let u = random_series(rng, -2, 2);
        let sys = BlockSystem::two_slope(
            DiagBlock::scalar(0, a),
            DiagBlock::scalar(delta, C::new(1.0, 0.0)),
            LaurentMatrix::from_fn(1, 1, |_, _| u.clone()),
        )
        .unwrap();
        let res = stokes::resonance_set(&sys.graded(), qp).unwrap();
        for _ in 0..40 {
            let c = rng.annulus(1.0, qp.q().norm());
            let class = canonicalize(c, qp).unwrap();
            if res.points.iter().all(|p| (p.rep - class.rep).norm() > 0.1) {
                return (sys, c);
            }
        }
    }
}

fn suite_stokes(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let qp = cfg.qparams()?;
    let mut rng = Rng::new(cfg.seed.wrapping_add(1));
    let mut out = Vec::new();

    // uniqueness surrogate: per-mode resolvent route vs joint dense solve
    let mut dev = 0.0f64;
    for _ in 0..4 {
        let (sys, c) = two_slope_sample(&mut rng, &qp);
        let f = stokes::algebraic_sum_two_slopes(&sys, c, &qp)?;
        let g1 = f.numerators.get(&(0, 1)).cloned().unwrap_or_else(|| LaurentMatrix::zeros(1, 1));
        let g2 = stokes::two_slope_joint_solve(&sys, c, &qp)?;
        dev = dev.max(g1.max_coeff_diff(&g2) / g1.max_abs().max(1e-10));
    }
    out.push(CheckResult::graded("stokes.two_routes_agree", dev, cfg.tol("stokes", 1e-9)));

    // summation certificate, qc-invariance and the cocycle relation
    let mut dev_gauge = 0.0f64;
    let mut dev_qc = 0.0f64;
    let mut dev_cocycle = 0.0f64;
    for _ in 0..3 {
        let (sys, c) = two_slope_sample(&mut rng, &qp);
        let (_, d) = two_slope_sample(&mut rng, &qp);
        let (_, e) = two_slope_sample(&mut rng, &qp);
        let f = stokes::algebraic_sum_two_slopes(&sys, c, &qp)?;
        let a0 = sys.graded().to_laurent(&qp);
        let al = sys.to_laurent(&qp);
        let samples = stokes::sample_points_avoiding(&qp, &[c, d, e], 12, 0.05, cfg.seed);
        let mut eval = |z: C| f.eval(z);
        dev_gauge = dev_gauge.max(stokes::sampled_gauge_residual(&mut eval, &a0, &al, &qp, &samples)?);
        let fq = stokes::algebraic_sum_two_slopes(&sys, qp.q() * c, &qp)?;
        for &z in samples.iter().take(6) {
            let fz = f.eval(z)?;
            dev_qc = dev_qc.max(fz.sub(&fq.eval(z)?).max_abs() / fz.max_abs().max(1.0));
        }
        let fcd = stokes::stokes_cocycle(&sys, c, d, &qp)?;
        let fde = stokes::stokes_cocycle(&sys, d, e, &qp)?;
        let fce = stokes::stokes_cocycle(&sys, c, e, &qp)?;
        for &z in samples.iter().take(6) {
            let lhs = fcd.eval(z)?.mul(&fde.eval(z)?);
            let rhs = fce.eval(z)?;
            dev_cocycle = dev_cocycle.max(lhs.sub(&rhs).max_abs() / rhs.max_abs().max(1.0));
        }
    }
    out.push(CheckResult::graded("stokes.gauge_certificate", dev_gauge, cfg.tol("stokes", 1e-9)));
    out.push(CheckResult::graded("stokes.qc_invariance", dev_qc, cfg.tol("stokes", 1e-9)));
    out.push(CheckResult::graded("stokes.cocycle_relation", dev_cocycle, cfg.tol("stokes", 1e-9)));

    // pole certificate: the entire numerators decay, so widening the
    // examined window can only shrink the tail mass
    let (sys, c) = two_slope_sample(&mut rng, &qp);
    let f = stokes::algebraic_sum_two_slopes(&sys, c, &qp)?;
    let scale = f.numerators.values().map(|g| g.max_abs()).fold(1e-300, f64::max);
    let radius = f
        .numerators
        .values()
        .flat_map(|g| g.support())
        .map(|e| e.abs())
        .max()
        .unwrap_or(0)
        / 2;
    let inner = f.numerator_tail(radius);
    let outer = f.numerator_tail(radius + 10);
    let dev = (outer - inner).max(0.0) / scale;
    out.push(CheckResult::graded("stokes.numerator_tail", dev, 1e-10));
    Ok(out)
}

fn suite_alien(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let qp = cfg.qparams()?;
    let mut rng = Rng::new(cfg.seed.wrapping_add(2));
    let mut out = Vec::new();

    // closed form vs contour oracle; draws that land on a theta zero
    // spiral or a resonance are rejected and retried, mirroring the
    // base-point policy of the engines
    let mut dev = 0.0f64;
    let mut constraint = 0.0f64;
    let mut done = 0;
    let mut guard = 0;
    while done < 6 && guard < 200 {
        guard += 1;
        let delta = rng.int(1, 3) as u32;
        let a = rng.annulus(1.0, qp.q().norm() * 0.95);
        let u = random_series(&mut rng, -1, 2);
        let engine = alien::rank1_engine(a, 0, C::new(1.0, 0.0), delta as i64, &u, &qp)?;
        let beta = canonicalize(1.0 / a, &qp)?;
        let grid = crate::elliptic::root_grid(delta, &beta, &qp);
        let l = rng.int(0, delta as i64 - 1);
        let m = rng.int(0, delta as i64 - 1);
        let c0 = grid.point(l, m);
        let attempt = (|| -> Result<(f64, f64)> {
            let closed = engine.residue_closed(c0, ClosedFormVariant::ZPowM)?;
            let oracle = engine.residue_numeric(c0, 256)?;
            let d = closed.sub(&oracle).max_abs() / closed.max_abs().max(1e-300);
            let mut con = 0.0f64;
            for b in alien::alien_two_by_two(a, delta, &u, &qp)? {
                if b.n.max_abs() > 1e-12 {
                    con = con.max(b.index_constraint_residual(&qp));
                }
            }
            Ok((d, con))
        })();
        match attempt {
            Ok((d, con)) => {
                dev = dev.max(d);
                constraint = constraint.max(con);
                done += 1;
            }
            Err(Error::BasePointOnSpiral(_)) | Err(Error::PoleOnCircle(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    out.push(CheckResult::graded("alien.oracle_equivalence", dev, cfg.tol("alien_oracle", 1e-6)));
    out.push(CheckResult::graded("alien.index_constraint", constraint, 1e-9));

    // dilation covariance
    let mut dev = 0.0f64;
    let mut degenerate_dilation = false;
    'dilation: for delta in 1..=3u32 {
        let mut guard = 0;
        loop {
            guard += 1;
            let a = rng.annulus(0.3, 0.95);
            let u = random_series(&mut rng, 0, delta as i64);
            let lambda = rng.annulus(0.6, 1.7);
            let attempt = (|| -> Result<f64> {
                let mut d = alien::alien_dilated(a, delta, &u, QParams::zeta(delta), &qp)?;
                d = d.max(alien::alien_dilated(a, delta, &u, qp.q_root(delta), &qp)?);
                Ok(d.max(alien::alien_dilated(a, delta, &u, lambda, &qp)?))
            })();
            match attempt {
                Ok(d) => {
                    dev = dev.max(d);
                    break;
                }
                Err(Error::BasePointOnSpiral(_)) | Err(Error::PoleOnCircle(_)) if guard < 50 => {
                    continue
                }
                Err(Error::BasePointOnSpiral(_)) | Err(Error::PoleOnCircle(_)) => {
                    degenerate_dilation = true;
                    break 'dilation;
                }
                Err(e) => return Err(e),
            }
        }
    }
    if degenerate_dilation {
        out.push(CheckResult::skip(
            "alien.dilation_covariance",
            "draws keep hitting the base-point spiral at this q; pick another z0",
        ));
    } else {
        out.push(CheckResult::graded("alien.dilation_covariance", dev, cfg.tol("alien", 1e-8)));
    }

    // good-q dependent: canonical basis factorization
    let report = theta::is_good_value(&qp, 4, 20, cfg.tol("good_q", 1e-12))?;
    if report.good_in_range {
        let mut dev = 0.0f64;
        let mut degenerate = false;
        'outer: for delta in 1..=4u32 {
            let mut guard = 0;
            loop {
                guard += 1;
                let beta = canonicalize(rng.annulus(1.05, qp.q().norm() * 0.95), &qp)?;
                match alien::canonical_basis(delta, &beta, &qp) {
                    Ok(basis) => {
                        dev = dev.max(basis.vandermonde_residual);
                        break;
                    }
                    Err(Error::BasePointOnSpiral(_)) if guard < 50 => continue,
                    Err(Error::BasePointOnSpiral(_)) => {
                        degenerate = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if degenerate {
            out.push(CheckResult::skip(
                "alien.canonical_basis_vandermonde",
                "grids keep hitting the base-point spiral at this q; pick another z0",
            ));
        } else {
            out.push(CheckResult::graded(
                "alien.canonical_basis_vandermonde",
                dev,
                cfg.tol("alien", 1e-8),
            ));
        }
    } else {
        out.push(CheckResult::skip(
            "alien.canonical_basis_vandermonde",
            "q is bad in the tested range; no canonical basis is selected",
        ));
    }

    // q-invariance of the evaluation map
    let mut dev = 0.0f64;
    let mut done = 0;
    let mut guard = 0;
    while done < 6 && guard < 100 {
        guard += 1;
        let a = rng.annulus(1.1, qp.q().norm() * 0.9);
        let u = random_series(&mut rng, 0, 2);
        let engine = alien::rank1_engine(a, 0, C::new(1.0, 0.0), 2, &u, &qp)?;
        let c = rng.annulus(0.9, 1.6);
        if engine.solver.direction_gap(c, (-40, 40), &qp) < 1e-3 {
            continue;
        }
        match (engine.phi(c), engine.phi(qp.q() * c)) {
            (Ok(v1), Ok(v2)) => {
                dev = dev.max(v1.sub(&v2).max_abs() / v1.max_abs().max(1.0));
                done += 1;
            }
            (Err(Error::BasePointOnSpiral(_)), _) | (_, Err(Error::BasePointOnSpiral(_))) => {
                continue
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    out.push(CheckResult::graded("alien.evaluation_q_invariance", dev, cfg.tol("stokes", 1e-9)));

    // wild action on a small ramified system
    let mut guard = 0;
    let wild = loop {
        guard += 1;
        let e1 = IrreducibleObject::new(1, 0, rng.annulus(1.05, 3.5))?;
        let e2 = IrreducibleObject::new(2, 1, rng.annulus(1.05, 3.5))?;
        let upper = LaurentMatrix::from_fn(1, 2, |_, _| random_series(&mut rng, 0, 1));
        let sys = ETwoBlock { e1, m1: 1, e2, m2: 1, upper };
        let t = rng.annulus(0.5, 2.0);
        let attempt = (|| -> Result<f64> {
            let mut d = alien::act_unramified_check(ActionKind::Theta(t), &sys, &qp)?;
            d = d.max(alien::act_unramified_check(ActionKind::Gamma1, &sys, &qp)?);
            Ok(d.max(alien::act_unramified_check(ActionKind::Gamma2, &sys, &qp)?))
        })();
        match attempt {
            Ok(d) => break Some(d),
            Err(Error::BasePointOnSpiral(_)) | Err(Error::PoleOnCircle(_)) if guard < 50 => {
                continue
            }
            Err(Error::BasePointOnSpiral(_)) | Err(Error::PoleOnCircle(_)) => break None,
            Err(e) => return Err(e),
        }
    };
    match wild {
        Some(dev) => {
            out.push(CheckResult::graded("alien.wild_action", dev, cfg.tol("alien", 1e-8)))
        }
        None => out.push(CheckResult::skip(
            "alien.wild_action",
            "draws keep hitting the base-point spiral at this q; pick another z0",
        )),
    }
    Ok(out)
}

fn suite_formal(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let qp = cfg.qparams()?;
    let mut rng = Rng::new(cfg.seed.wrapping_add(3));
    let mut out = Vec::new();

    let mut dev = 0.0f64;
    for r in 1..=6u32 {
        dev = dev.max(formulaire_check(r).max_deviation);
    }
    out.push(CheckResult::graded("formal.formulaire", dev, cfg.tol("formulaire", 1e-12)));

    // U^λ one-parameter group
    let mut dev = 0.0f64;
    for m in 1..=4usize {
        for _ in 0..5 {
            let a = C::new(rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
            let b = C::new(rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
            dev = dev.max(u_power(m, a + b).sub(&u_power(m, a).mul(&u_power(m, b))).max_abs());
        }
    }
    out.push(CheckResult::graded("formal.unipotent_powers", dev, 1e-12));

    // evaluation is multiplicative for the twisted law
    let mut dev = 0.0f64;
    for (r, d) in [(2u32, 1i64), (3, 2), (4, 3)] {
        let obj = IrreducibleObject::new(r, d, rng.annulus(1.0, 3.5))?;
        for _ in 0..4 {
            let phi = FormalElement {
                lambda: C::new(rng.range(-1.0, 1.0), 0.0),
                t: rng.annulus(0.5, 2.0),
                k1: rng.int(-2, 2),
                k2: rng.int(-2, 2),
            };
            let psi = FormalElement {
                lambda: C::new(rng.range(-1.0, 1.0), 0.0),
                t: rng.annulus(0.5, 2.0),
                k1: rng.int(-2, 2),
                k2: rng.int(-2, 2),
            };
            let prod = multiply(&phi, &psi, r);
            let lhs = crate::formal::evaluate_element(&prod, &obj, 1, r, &qp)?;
            let rhs = crate::formal::evaluate_element(&phi, &obj, 1, r, &qp)?
                .mul(&crate::formal::evaluate_element(&psi, &obj, 1, r, &qp)?);
            dev = dev.max(lhs.sub(&rhs).max_abs() / rhs.max_abs().max(1.0));
        }
    }
    out.push(CheckResult::graded("formal.twisted_multiplication", dev, cfg.tol("formal", 1e-10)));

    // η table, exactly
    let mut dev = 0.0f64;
    for r in 2..=5u32 {
        let zeta = QParams::zeta(r);
        dev = dev.max((eta((0, 1), (1, 0), r) - zeta.powi(-1)).norm());
        dev = dev.max((eta((1, 0), (0, 1), r) - C::new(1.0, 0.0)).norm());
    }
    out.push(CheckResult::graded("formal.eta_table", dev, 1e-14));

    // wild group: associativity and the action property
    let r = 3u32;
    let mut assoc_fail = 0.0f64;
    for _ in 0..100 {
        let make = |rng: &mut Rng| {
            WildGroupElement::new(Rat::new(rng.int(-12, 12), rng.int(1, 12)), rng.int(-3, 3), rng.int(-3, 3))
        };
        let (g, h, k) = (make(&mut rng), make(&mut rng), make(&mut rng));
        if wild_multiply(&wild_multiply(&g, &h, r), &k, r)
            != wild_multiply(&g, &wild_multiply(&h, &k, r), r)
        {
            assoc_fail = 1.0;
        }
    }
    out.push(CheckResult::graded("formal.wild_associativity", assoc_fail, 0.5));

    let qpr = qp.ramified(r);
    let mut dev = 0.0f64;
    for _ in 0..50 {
        let delta = rng.int(1, 4) as u32;
        let beta = canonicalize(rng.annulus(0.4, 1.2), &qpr)?;
        let sym = PsiSymbol::graded(delta, beta, rng.int(0, delta as i64 - 1));
        let g = WildGroupElement::new(Rat::new(rng.int(-6, 6), rng.int(1, 8)), rng.int(-3, 3), rng.int(-3, 3));
        let h = WildGroupElement::new(Rat::new(rng.int(-6, 6), rng.int(1, 8)), rng.int(-3, 3), rng.int(-3, 3));
        let seq = act_wild(&h, &act_wild(&g, &sym, r, &qp)?, r, &qp)?;
        let composite = act_wild(&wild_multiply(&g, &h, r), &sym, r, &qp)?;
        dev = dev.max((seq.coeff - composite.coeff).norm() / seq.coeff.norm().max(1.0));
        if !seq.eq_tol(&composite, 1e-9 * seq.coeff.norm().max(1.0)) {
            dev = dev.max(1.0);
        }
    }
    out.push(CheckResult::graded("formal.psi_group_action", dev, cfg.tol("formal", 1e-12)));
    Ok(out)
}

fn suite_ramify(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let qp = cfg.qparams()?;
    let mut rng = Rng::new(cfg.seed.wrapping_add(4));
    let mut out = Vec::new();

    // descent round trip
    let mut dev = 0.0f64;
    for r in [2u32, 3] {
        let qpr = qp.ramified(r);
        let mut upper = BTreeMap::new();
        upper.insert(
            (0usize, 1usize),
            LaurentMatrix::from_fn(1, 1, |_, _| random_series(&mut rng, 0, 2)),
        );
        let c0 = BlockSystem::new(
            vec![
                DiagBlock::scalar(0, rng.annulus(0.8, 2.0)),
                DiagBlock::scalar(1, rng.annulus(0.8, 2.0)),
            ],
            upper,
        )?;
        let c0_z = c0.to_laurent(&qp);
        let c0_ram = c0_z.ramify(r);
        let shape = [1usize, 1];
        let mut w = LaurentMatrix::identity(2);
        w[(0, 1)] = random_series(&mut rng, -2, 3);
        let w_inv = w.inverse_unipotent(&shape)?;
        let b = w.sigma_q(&qpr).mul(&c0_ram).mul(&w_inv);
        let g = w.galois_twist(r).mul(&w_inv);
        let (c, h) = crate::ramify::hilbert90_descend(&b, &g, r, &shape, &qpr)?;
        let f = crate::ramify::mu_r_project(&h.mul(&w), r);
        dev = dev.max(
            crate::lmatrix::morphism_residual(&f, &c0_z, &c, &qp) / c0_z.max_abs().max(1.0),
        );
    }
    out.push(CheckResult::graded("ramify.descent_round_trip", dev, cfg.tol("ramify", 1e-9)));

    // projector idempotence, exact
    let g = LaurentMatrix::from_fn(2, 2, |_, _| random_series(&mut rng, -5, 5));
    let avg = g.mu_r_average(3);
    let dev = avg.mu_r_average(3).max_coeff_diff(&avg);
    out.push(CheckResult::graded("ramify.projector_idempotent", dev, 1e-300));

    // embedding: closed form at r = 2 and integer exponents at r = 3
    let qp2 = qp.ramified(2);
    let a_prime = LaurentMatrix::from_fn(1, 1, |_, _| LaurentSeries::monomial(1, C::new(1.0, 0.0)));
    let emb = crate::ramify::embed_in_restriction(&a_prime, 2, &qp2)?;
    let mut dev = (emb.ambient[(0, 1)].coeff(0) - C::new(1.0, 0.0)).norm();
    dev = dev.max((emb.ambient[(1, 0)].coeff(1) - qp2.q()).norm());
    let qp3 = qp.ramified(3);
    let a3 = LaurentMatrix::from_fn(2, 2, |_, _| random_series(&mut rng, -2, 2));
    let emb3 = crate::ramify::embed_in_restriction(&a3, 3, &qp3)?;
    dev = dev.max(
        crate::lmatrix::morphism_residual(&emb3.inclusion, &a3, &emb3.ambient_in_zr, &qp3)
            / a3.max_abs().max(1.0),
    );
    out.push(CheckResult::graded("ramify.embedding", dev, cfg.tol("ramify", 1e-10)));

    // τ-conjugation of a diagonalized two-block system
    let e1 = IrreducibleObject::new(1, 0, rng.annulus(1.05, 3.5))?;
    let e2 = IrreducibleObject::new(2, 1, rng.annulus(1.05, 3.5))?;
    let sys = BlockSystem::two_slope(
        DiagBlock::Irreducible { obj: e1, m: 1 },
        DiagBlock::Irreducible { obj: e2, m: 1 },
        LaurentMatrix::from_fn(1, 2, |_, _| random_series(&mut rng, 0, 1)),
    )?;
    let engine = alien::pair_engine(&sys, 0, 1, 2, &qp)?;
    let n1 = 1usize;
    let mut b = LaurentMatrix::zeros(3, 3);
    b.set_submatrix(0, 0, &LaurentMatrix::monomial_times(engine.mu1, &engine.solver.p1));
    b.set_submatrix(n1, n1, &LaurentMatrix::monomial_times(engine.mu2, &engine.solver.p2));
    b.set_submatrix(0, n1, &engine.v);
    let t = crate::ramify::tau_conjugator(1, 0, 1, 2, 1, 1)?;
    let lhs = b.galois_twist(2);
    let rhs = LaurentMatrix::mul_const_left(&t, &b.mul_const_right(&t.inverse()?));
    let dev = lhs.max_coeff_diff(&rhs) / b.max_abs();
    out.push(CheckResult::graded("ramify.tau_conjugation", dev, cfg.tol("formulaire", 1e-12)));

    // nilpotent log/exp on gauge matrices
    let shape = [1usize, 2, 1];
    let mut fb = BTreeMap::new();
    fb.insert((0usize, 1usize), LaurentMatrix::from_fn(1, 2, |_, _| random_series(&mut rng, -1, 2)));
    fb.insert((1usize, 2usize), LaurentMatrix::from_fn(2, 1, |_, _| random_series(&mut rng, 0, 1)));
    let f = crate::qdmod::GaugeTransform::from_blocks(&shape, &fb)?;
    let back = crate::qdmod::gauge_exp(&crate::qdmod::gauge_log(&f), &shape);
    let dev = back.mat.max_coeff_diff(&f.mat) / f.mat.max_abs().max(1.0);
    out.push(CheckResult::graded("ramify.gauge_log_exp", dev, 1e-12));
    Ok(out)
}

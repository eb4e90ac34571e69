//! `qdx` — command-line front end for the q-difference toolkit.
//!
//! Machine-readable JSON goes to stdout, a short human summary to stderr.
//! Exit codes: 0 success/pass, 1 verification failure, 2 input error.

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use qdx_core::alien::{alien_general, canonical_basis};
use qdx_core::elliptic::canonicalize;
use qdx_core::formal::{act_wild, formulaire_check, GeneratorAction};
use qdx_core::json as qjson;
use qdx_core::numkernel::QParams;
use qdx_core::qdmod::{bg_normalize, newton_polygon_scalar};
use qdx_core::stokes::{algebraic_sum_two_slopes, multi_slope_sum, resonance_set, stokes_cocycle};
use qdx_core::theta::{find_bad_q, is_good_value};
use qdx_core::verify::{run_suite, RunConfig, Status};
use qdx_core::{Error, C};

#[derive(Parser)]
#[command(name = "qdx", about = "Local analytic toolkit for linear q-difference equations", version)]
struct Cli {
    /// τ with q = e^{2iπτ} (format: re,im); |q| > 1 required
    #[arg(long, global = true)]
    tau: Option<String>,
    /// q given directly (format: re,im); τ is derived on the principal branch
    #[arg(long, global = true)]
    q: Option<String>,
    /// base point z₀ (format: re,im)
    #[arg(long, global = true)]
    z0: Option<String>,
    /// ramification index of the working base
    #[arg(long, global = true, default_value_t = 1)]
    r: u32,
    /// seed for randomized checks
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; the QDX_CONFIG environment variable is the fallback
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scan |t_n^(δ)(q)| over δ ≤ delta-max, |n| ≤ n-bound and report the
    /// good-value certificate
    GoodQ {
        #[arg(long, default_value_t = 4)]
        delta_max: u32,
        #[arg(long, default_value_t = 20)]
        n_bound: i64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Locate the real q* < −1 where t_0^(3) vanishes
    BadQ,
    /// Newton polygon of a scalar operator from (degree, valuation) pairs
    Newton {
        /// JSON file [[k, v], …]
        #[arg(long)]
        op: String,
    },
    /// Graded part of a block system (zero the upper blocks)
    Gr {
        #[arg(long)]
        system: String,
    },
    /// Birkhoff-Guenther normal form with its gauge certificate
    Normalize {
        #[arg(long)]
        system: String,
    },
    /// Algebraic summation in a direction
    Sum {
        #[arg(long)]
        system: String,
        /// direction c (format: re,im)
        #[arg(long)]
        direction: String,
    },
    /// Stokes cocycle between two directions, with residual norms
    Cocycle {
        #[arg(long)]
        system: String,
        #[arg(long)]
        c: String,
        #[arg(long)]
        d: String,
    },
    /// q-alien derivatives of a block system
    Alien {
        #[arg(long)]
        system: String,
        /// emit the whole family
        #[arg(long)]
        all: bool,
        /// filter to one class α (format: re,im)
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Act on an alien symbol by a wild group element
    Act {
        /// element JSON {"x":[num,den],"k1":…,"k2":…} or {"t":[re,im]}
        #[arg(long)]
        element: String,
        /// symbol JSON {"delta":…,"beta":{"rep":[re,im]},"l":…}
        #[arg(long)]
        symbol: String,
    },
    /// Check the cyclic-shift / Fourier / diagonal matrix identities
    /// for the global ramification index --r
    Formulaire,
    /// Ramify a system; optionally descend a μ_r-fixed one or embed it
    Ramify {
        #[arg(long)]
        system: String,
        /// Hilbert-90 descent; the file must hold {"b":…,"g":…,"shape":[…]}
        #[arg(long)]
        descend: bool,
        /// embed a ramified matrix into the restriction of an unramified one
        #[arg(long)]
        embed: bool,
    },
    /// Run a named invariant suite
    Verify {
        /// one of: theta, stokes, alien, formal, ramify, all
        suite: String,
    },
    /// Thread a system file through a list of steps
    Pipeline {
        #[arg(long)]
        input: String,
        /// comma-separated steps from
        /// {newton, gr, normalize, resonance, sum, cocycle, alien, ramify, act}
        #[arg(long, default_value = "")]
        steps: String,
        #[arg(long)]
        direction: Option<String>,
        #[arg(long)]
        d: Option<String>,
        /// element JSON for the act step
        #[arg(long)]
        element: Option<String>,
        /// symbol JSON for the act step
        #[arg(long)]
        symbol: Option<String>,
    },
    /// Canonical basis data for a class β = class(1/a)
    Basis {
        #[arg(long)]
        a: String,
        #[arg(long)]
        delta: u32,
    },
}

fn parse_complex(s: &str) -> Result<C, Error> {
    let parts: Vec<&str> = s.split(',').collect();
    let re: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad complex number {s}")))?;
    let im: f64 = if parts.len() > 1 {
        parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad complex number {s}")))?
    } else {
        0.0
    };
    Ok(C::new(re, im))
}

fn load_json(path: &str) -> Result<Value, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("bad json in {path}: {e}")))
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::with_q(C::new(4.0, 0.0))?;
    let config_path = cli
        .config
        .clone()
        .or_else(|| std::env::var("QDX_CONFIG").ok());
    if let Some(path) = config_path {
        let v = load_json(&path)?;
        if let Some(t) = v.get("tau") {
            cfg.tau = qjson::complex_from_json(t)?;
        }
        if let Some(z) = v.get("z0") {
            cfg.z0 = qjson::complex_from_json(z)?;
        }
        if let Some(r) = v.get("r").and_then(|x| x.as_u64()) {
            cfg.r = r as u32;
        }
        if let Some(s) = v.get("seed").and_then(|x| x.as_u64()) {
            cfg.seed = s;
        }
        if let Some(w) = v.get("window").and_then(|x| x.as_i64()) {
            cfg.window = w;
        }
        if let Some(tols) = v.get("tolerances").and_then(|x| x.as_object()) {
            for (k, tv) in tols {
                if let Some(t) = tv.as_f64() {
                    cfg.tolerances.insert(k.clone(), t);
                }
            }
        }
    }
    if let Some(tau) = &cli.tau {
        cfg.tau = parse_complex(tau)?;
    }
    if let Some(q) = &cli.q {
        let qp = QParams::from_q(parse_complex(q)?, 1, cfg.z0)?;
        cfg.tau = qp.tau();
    }
    if let Some(z0) = &cli.z0 {
        cfg.z0 = parse_complex(z0)?;
    }
    cfg.r = cli.r;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

/// Apply an element to a symbol. Accepts the pure-group form
/// {"lambda":…,"t":[…],"k1":…,"k2":…} (λ acts trivially on symbols, t is
/// the theta-torus value) as well as the wild form {"x":[num,den],…}.
fn act_element_on_symbol(
    ev: &Value,
    sym: &qdx_core::formal::PsiSymbol,
    ram: u32,
    qp: &QParams,
) -> Result<qdx_core::formal::PsiSymbol, Error> {
    if ev.get("x").is_some() {
        let g = qjson::wild_from_json(ev)?;
        return act_wild(&g, sym, ram, qp);
    }
    let fe = qjson::formal_element_from_json(ev)?;
    let after_t =
        qdx_core::formal::act_on_psi(&GeneratorAction::Theta(fe.t), sym, ram, qp)?;
    let lattice = qdx_core::formal::WildGroupElement::new(
        qdx_core::rat::Rat::zero(),
        fe.k1,
        fe.k2,
    );
    act_wild(&lattice, &after_t, ram, qp)
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let cfg = build_config(cli)?;
    // the base parameters always carry the unramified tag; cfg.r is the
    // session denominator handed to the commands that need one
    let qp = QParams::new(cfg.tau, 1, cfg.z0)?;
    match &cli.cmd {
        Cmd::GoodQ { delta_max, n_bound, tol } => {
            let rep = is_good_value(&qp, *delta_max, *n_bound, *tol)?;
            emit(&json!({
                "min_abs": rep.min_abs,
                "min_rel": rep.min_rel,
                "argmin": [rep.argmin.0, rep.argmin.1],
                "verdict": if rep.good_in_range { "good-in-range" } else { "bad-in-range" },
                "delta_max": rep.delta_max,
                "n_bound": rep.n_bound,
                "tol": rep.tol,
            }));
            eprintln!(
                "good-q: min |t| = {:.3e} (relative {:.3e}) at (δ, n) = {:?} → {}",
                rep.min_abs,
                rep.min_rel,
                rep.argmin,
                if rep.good_in_range { "good in range" } else { "BAD in range" }
            );
            Ok(0)
        }
        Cmd::BadQ => {
            let bad = find_bad_q()?;
            emit(&json!({
                "x_star": bad.x_star,
                "q_star": bad.q_star,
                "f_residual": bad.f_residual,
                "t03_residual": bad.t03_residual,
            }));
            eprintln!("bad-q: q* = {:.9} with |t_0^(3)(q*)| = {:.3e}", bad.q_star, bad.t03_residual);
            Ok(0)
        }
        Cmd::Newton { op } => {
            let points = qjson::operator_points_from_json(&load_json(op)?)?;
            let nd = newton_polygon_scalar(&points)?;
            emit(&qjson::newton_to_json(&nd));
            Ok(0)
        }
        Cmd::Gr { system } => {
            let sys = qjson::system_from_json(&load_json(system)?)?;
            emit(&qjson::system_to_json(&sys.graded()));
            Ok(0)
        }
        Cmd::Normalize { system } => {
            let sys = qjson::system_from_json(&load_json(system)?)?;
            let (normal, gauge) = bg_normalize(&sys, &qp)?;
            let (ok, res) = qdx_core::qdmod::is_gauge_between(&gauge.mat, &sys, &normal, &qp, 1e-10);
            emit(&json!({
                "normal": qjson::system_to_json(&normal),
                "gauge": qjson::lmatrix_to_json(&gauge.mat),
                "residual": res,
                "certified": ok,
            }));
            eprintln!("normalize: residual {res:.3e}");
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Sum { system, direction } => {
            let sys = qjson::system_from_json(&load_json(system)?)?;
            let c = parse_complex(direction)?;
            let f = multi_slope_sum(&sys, c, &qp)?;
            let mut numerators = serde_json::Map::new();
            for (&(i, j), g) in &f.numerators {
                numerators.insert(format!("{i},{j}"), qjson::lmatrix_to_json(g));
            }
            let pole = f.pole_class()?;
            emit(&json!({
                "direction": qjson::complex_to_json(c),
                "pole_class": qjson::point_to_json(&pole),
                "slopes": f.slopes,
                "numerators": Value::Object(numerators),
            }));
            eprintln!("sum: {} nonzero layer(s), poles on the spiral of −c", f.numerators.len());
            Ok(0)
        }
        Cmd::Cocycle { system, c, d } => {
            let sys = qjson::system_from_json(&load_json(system)?)?;
            let (c, d) = (parse_complex(c)?, parse_complex(d)?);
            let coc = stokes_cocycle(&sys, c, d, &qp)?;
            let a0 = sys.graded().to_laurent(&qp);
            let samples = qdx_core::stokes::sample_points_avoiding(&qp, &[c, d], 12, 0.05, cfg.seed);
            let mut eval = |z: C| coc.eval(z);
            let res = qdx_core::stokes::sampled_gauge_residual(&mut eval, &a0, &a0, &qp, &samples)?;
            let mut values = Vec::new();
            for &z in samples.iter().take(4) {
                values.push(json!({
                    "z": qjson::complex_to_json(z),
                    "value": qjson::cmatrix_to_json(&coc.eval(z)?),
                }));
            }
            emit(&json!({
                "automorphism_residual": res,
                "samples": values,
            }));
            eprintln!("cocycle: automorphism residual {res:.3e}");
            Ok(0)
        }
        Cmd::Alien { system, all, alpha } => {
            let sys = qjson::system_from_json(&load_json(system)?)?;
            let filter = match alpha {
                Some(a) => Some(canonicalize(parse_complex(a)?, &qp)?),
                None => None,
            };
            if !all && filter.is_none() {
                return Err(Error::InvalidInput("pass --all or --alpha re,im".into()));
            }
            let blocks = alien_general(&sys, filter.as_ref(), &qp)?;
            emit(&Value::Array(blocks.iter().map(qjson::alien_block_to_json).collect()));
            eprintln!("alien: {} block(s)", blocks.len());
            Ok(0)
        }
        Cmd::Act { element, symbol } => {
            let ev: Value = serde_json::from_str(element)
                .map_err(|e| Error::InvalidInput(format!("bad element json: {e}")))?;
            let sv: Value = serde_json::from_str(symbol)
                .map_err(|e| Error::InvalidInput(format!("bad symbol json: {e}")))?;
            let sym = qjson::psi_from_json(&sv)?;
            let out = act_element_on_symbol(&ev, &sym, cfg.r, &qp)?;
            emit(&qjson::psi_to_json(&out));
            Ok(0)
        }
        Cmd::Formulaire => {
            let rep = formulaire_check(cfg.r);
            emit(&json!({
                "r": rep.r,
                "max_deviation": rep.max_deviation,
                "items": rep.items.iter().map(|(n, d)| json!({"name": n, "deviation": d})).collect::<Vec<_>>(),
            }));
            eprintln!("formulaire r = {}: max deviation {:.3e}", rep.r, rep.max_deviation);
            Ok(if rep.max_deviation < 1e-12 { 0 } else { 1 })
        }
        Cmd::Ramify { system, descend, embed } => {
            let v = load_json(system)?;
            let ram = &cfg.r;
            let qpr = qp.ramified(*ram);
            if *descend {
                let b = qjson::lmatrix_from_json(v.get("b").ok_or_else(|| Error::InvalidInput("descend needs {\"b\":…}".into()))?)?;
                let g = qjson::lmatrix_from_json(v.get("g").ok_or_else(|| Error::InvalidInput("descend needs {\"g\":…}".into()))?)?;
                let shape: Vec<usize> = v
                    .get("shape")
                    .and_then(|s| s.as_array())
                    .ok_or_else(|| Error::InvalidInput("descend needs {\"shape\":[…]}".into()))?
                    .iter()
                    .filter_map(|x| x.as_u64().map(|u| u as usize))
                    .collect();
                let (c, h) = qdx_core::ramify::hilbert90_descend(&b, &g, *ram, &shape, &qpr)?;
                emit(&json!({
                    "descended": qjson::lmatrix_to_json(&c),
                    "averaging_gauge": qjson::lmatrix_to_json(&h),
                }));
            } else if *embed {
                let a_prime = qjson::lmatrix_from_json(&v)?;
                let emb = qdx_core::ramify::embed_in_restriction(&a_prime, *ram, &qpr)?;
                emit(&json!({
                    "ambient": qjson::lmatrix_to_json(&emb.ambient),
                    "inclusion": qjson::lmatrix_to_json(&emb.inclusion),
                }));
            } else {
                let sys = qjson::system_from_json(&v)?;
                let rs = qdx_core::ramify::ram(&sys, *ram, &qp)?;
                emit(&json!({
                    "r": rs.r,
                    "matrix": qjson::lmatrix_to_json(&rs.a_prime),
                    "newton": qdx_core::ramify::ram_newton(&sys, *ram)
                        .iter()
                        .map(|(s, m)| json!({"slope": [s.num, s.den], "mult": m}))
                        .collect::<Vec<_>>(),
                }));
            }
            Ok(0)
        }
        Cmd::Verify { suite } => {
            let results = run_suite(suite, &cfg)?;
            emit(&qdx_core::verify::results_to_json(suite, &results));
            let mut failed = false;
            for r in &results {
                let tag = match r.status {
                    Status::Pass => "PASS",
                    Status::Fail => {
                        failed = true;
                        "FAIL"
                    }
                    Status::Skip => "SKIP",
                };
                eprintln!(
                    "{tag} {} (deviation {:.3e}, threshold {:.3e}) {}",
                    r.name, r.deviation, r.threshold, r.note
                );
            }
            Ok(if failed { 1 } else { 0 })
        }
        Cmd::Pipeline { input, steps, direction, d, element, symbol } => {
            let mut sys = qjson::system_from_json(&load_json(input)?)?;
            let mut artifacts = Vec::new();
            if steps.is_empty() {
                artifacts.push(json!({"step": "echo", "artifact": qjson::system_to_json(&sys)}));
            }
            for (idx, step) in steps.split(',').filter(|s| !s.is_empty()).enumerate() {
                let tag = |e: Error| Error::InvalidInput(format!("step {idx} ({step}): {e}"));
                match step.trim() {
                    "newton" => {
                        artifacts.push(json!({"step": "newton", "artifact": qjson::newton_to_json(&sys.newton())}));
                    }
                    "gr" => {
                        sys = sys.graded();
                        artifacts.push(json!({"step": "gr", "artifact": qjson::system_to_json(&sys)}));
                    }
                    "normalize" => {
                        let (normal, gauge) = bg_normalize(&sys, &qp).map_err(tag)?;
                        artifacts.push(json!({
                            "step": "normalize",
                            "artifact": {
                                "normal": qjson::system_to_json(&normal),
                                "gauge": qjson::lmatrix_to_json(&gauge.mat),
                            }
                        }));
                        sys = normal;
                    }
                    "resonance" => {
                        let res = resonance_set(&sys.graded(), &qp).map_err(tag)?;
                        artifacts.push(json!({
                            "step": "resonance",
                            "artifact": res.points.iter().map(qjson::point_to_json).collect::<Vec<_>>(),
                        }));
                    }
                    "sum" => {
                        let c = parse_complex(
                            direction.as_deref().ok_or_else(|| tag(Error::InvalidInput("needs --direction".into())))?,
                        )?;
                        let f = algebraic_sum_two_slopes(&sys, c, &qp).map_err(tag)?;
                        let mut numerators = serde_json::Map::new();
                        for (&(i, j), g) in &f.numerators {
                            numerators.insert(format!("{i},{j}"), qjson::lmatrix_to_json(g));
                        }
                        artifacts.push(json!({"step": "sum", "artifact": Value::Object(numerators)}));
                    }
                    "cocycle" => {
                        let c = parse_complex(
                            direction.as_deref().ok_or_else(|| tag(Error::InvalidInput("needs --direction".into())))?,
                        )?;
                        let dd = parse_complex(
                            d.as_deref().ok_or_else(|| tag(Error::InvalidInput("needs --d".into())))?,
                        )?;
                        let coc = stokes_cocycle(&sys, c, dd, &qp).map_err(tag)?;
                        let z = qp.z0();
                        artifacts.push(json!({
                            "step": "cocycle",
                            "artifact": {"at_z0": qjson::cmatrix_to_json(&coc.eval(z).map_err(tag)?)},
                        }));
                    }
                    "alien" => {
                        let blocks = alien_general(&sys, None, &qp).map_err(tag)?;
                        artifacts.push(json!({
                            "step": "alien",
                            "artifact": blocks.iter().map(qjson::alien_block_to_json).collect::<Vec<_>>(),
                        }));
                    }
                    "ramify" => {
                        let r = cfg.r;
                        let rs = qdx_core::ramify::ram(&sys, r, &qp).map_err(tag)?;
                        artifacts.push(json!({
                            "step": "ramify",
                            "artifact": {"r": rs.r, "matrix": qjson::lmatrix_to_json(&rs.a_prime)},
                        }));
                    }
                    "act" => {
                        let ev: Value = serde_json::from_str(
                            element.as_deref().ok_or_else(|| tag(Error::InvalidInput("needs --element".into())))?,
                        )
                        .map_err(|e| tag(Error::InvalidInput(format!("bad element json: {e}"))))?;
                        let sv: Value = serde_json::from_str(
                            symbol.as_deref().ok_or_else(|| tag(Error::InvalidInput("needs --symbol".into())))?,
                        )
                        .map_err(|e| tag(Error::InvalidInput(format!("bad symbol json: {e}"))))?;
                        let sym = qjson::psi_from_json(&sv).map_err(tag)?;
                        let out = act_element_on_symbol(&ev, &sym, cfg.r, &qp).map_err(tag)?;
                        artifacts.push(json!({"step": "act", "artifact": qjson::psi_to_json(&out)}));
                    }
                    other => {
                        return Err(Error::InvalidInput(format!("step {idx}: unknown step '{other}'")));
                    }
                }
            }
            emit(&Value::Array(artifacts));
            Ok(0)
        }
        Cmd::Basis { a, delta } => {
            let a = parse_complex(a)?;
            let beta = canonicalize(1.0 / a, &qp)?;
            let basis = canonical_basis(*delta, &beta, &qp)?;
            emit(&json!({
                "delta": basis.delta,
                "beta": qjson::point_to_json(&basis.beta),
                "vandermonde_residual": basis.vandermonde_residual,
                "condition": basis.condition,
                "entries": basis
                    .entries
                    .iter()
                    .map(|e| {
                        json!({
                            "l": e.l,
                            "alpha": qjson::point_to_json(&e.alpha),
                            "c_l": qjson::complex_to_json(e.c_l),
                            "delta_row": e.delta_row.iter().map(|&x| qjson::complex_to_json(x)).collect::<Vec<_>>(),
                            "psi_row": e.psi_row.iter().map(|&x| qjson::complex_to_json(x)).collect::<Vec<_>>(),
                        })
                    })
                    .collect::<Vec<_>>(),
            }));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! The acceptance suite: sixteen numbered checks, each returning its metrics,
//! verdict and wall-clock time.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fields::{self, CompactBump, Dilate, Field, Gaussian, LeftTranslate, LinComb, PolyBump, Product, SeparableProduct};
use crate::fracop::{self, Engine, FracParams};
use crate::gauge::{check_gauge_properties, Gauge, GaugeKind};
use crate::group::{CoordBox, GroupSpec, Point};
use crate::quadrature::{self, Estimate, QuadratureConfig};
use crate::sobolev::{self, GridField, GridOperator, GridOptions, OptimizeOptions};

/// Sample budgets and tolerances. `quick` divides budgets by ten and doubles tolerances.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Profile {
    pub quick: bool,
    pub seed: u64,
}

impl Profile {
    pub fn full(seed: u64) -> Self {
        Profile { quick: false, seed }
    }
    pub fn quick(seed: u64) -> Self {
        Profile { quick: true, seed }
    }
    pub fn cfg(&self) -> QuadratureConfig {
        let base = QuadratureConfig::default();
        QuadratureConfig { seed: self.seed, n_samples: self.samples(base.n_samples), ..base }
    }
    pub fn samples(&self, n: usize) -> usize {
        if self.quick {
            (n / 10).max(100)
        } else {
            n
        }
    }
    pub fn tol(&self, t: f64) -> f64 {
        if self.quick {
            2.0 * t
        } else {
            t
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub seed: u64,
    pub seconds: f64,
    pub metrics: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub profile: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub total_seconds: f64,
    pub criteria: Vec<CriterionResult>,
}

pub const TITLES: [&str; 16] = [
    "group algebra",
    "gauge axioms",
    "polar-coordinate identity",
    "constants",
    "operator equivalence",
    "euclidean cross-check",
    "limits s->0 and s->1",
    "invariances",
    "form symmetry and product rule",
    "decay",
    "sobolev inequality",
    "extremal search",
    "mollifier and truncation",
    "translation difference",
    "rellich defect",
    "counterexample",
];

fn val<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn pt(x: &[f64]) -> Point {
    x.iter().copied().collect()
}

fn heis1() -> GroupSpec {
    GroupSpec::heisenberg(1).expect("builtin")
}

fn gauge(spec: &GroupSpec, kind: GaugeKind) -> Result<Gauge> {
    Gauge::new(kind, spec)
}

/// The built-in groups with their default (symmetric) gauges.
pub fn builtin_defaults() -> Vec<(GroupSpec, GaugeKind)> {
    vec![
        (GroupSpec::euclidean(1, None).expect("builtin"), GaugeKind::EuclideanPower),
        (GroupSpec::euclidean(2, None).expect("builtin"), GaugeKind::EuclideanPower),
        (GroupSpec::parabolic_r2(), GaugeKind::Parabolic),
        (heis1(), GaugeKind::Koranyi),
        (GroupSpec::heisenberg(2).expect("builtin"), GaugeKind::Koranyi),
    ]
}

/// Every built-in (group, gauge) pair that the gauge constructor accepts.
pub fn builtin_pairs() -> Vec<(GroupSpec, Gauge)> {
    let kinds = [
        GaugeKind::Koranyi,
        GaugeKind::BallGauge { r: 1.0 },
        GaugeKind::Parabolic,
        GaugeKind::EuclideanPower,
        GaugeKind::Max,
    ];
    let mut out = Vec::new();
    for (spec, _) in builtin_defaults() {
        for k in kinds {
            if let Ok(g) = Gauge::new(k, &spec) {
                out.push((spec.clone(), g));
            }
        }
    }
    out
}

pub fn run_criterion(id: u32, prof: &Profile) -> CriterionResult {
    let t = Instant::now();
    let out = match id {
        1 => c01(prof),
        2 => c02(prof),
        3 => c03(prof),
        4 => c04(prof),
        5 => c05(prof),
        6 => c06(prof),
        7 => c07(prof),
        8 => c08(prof),
        9 => c09(prof),
        10 => c10(prof),
        11 => c11(prof),
        12 => c12(prof),
        13 => c13(prof),
        14 => c14(prof),
        15 => c15(prof),
        16 => c16(prof),
        _ => Err(Error::Config(format!("no criterion {}", id))),
    };
    let (passed, metrics) = match out {
        Ok(x) => x,
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    CriterionResult {
        id,
        title: TITLES.get(id.wrapping_sub(1) as usize).unwrap_or(&"unknown").to_string(),
        passed,
        seed: prof.seed,
        seconds: t.elapsed().as_secs_f64(),
        metrics,
    }
}

pub fn run_report(prof: &Profile, ids: &[u32]) -> Report {
    let t = Instant::now();
    let criteria: Vec<CriterionResult> = ids.iter().map(|&i| run_criterion(i, prof)).collect();
    Report {
        profile: if prof.quick { "quick" } else { "full" },
        seed: prof.seed,
        passed: criteria.iter().all(|c| c.passed),
        total_seconds: t.elapsed().as_secs_f64(),
        criteria,
    }
}

type Outcome = Result<(bool, Value)>;

fn c01(prof: &Profile) -> Outcome {
    let groups = [
        GroupSpec::euclidean(2, Some(&[1.0, 1.0]))?,
        GroupSpec::parabolic_r2(),
        heis1(),
        GroupSpec::heisenberg(2)?,
    ];
    let reps: Vec<_> = groups.iter().map(|g| g.algebra_check(1000, prof.seed)).collect();
    let worst = reps.iter().map(|r| r.max_error()).fold(0.0, f64::max);
    Ok((worst <= 1e-10, json!({ "max_error": worst, "groups": val(&reps) })))
}

fn c02(prof: &Profile) -> Outcome {
    let n = prof.samples(100_000);
    let mut rows = Vec::new();
    let mut ok = true;
    for (spec, g) in builtin_pairs() {
        let r = check_gauge_properties(&g, &spec, n, prof.seed);
        ok &= r.triangle_max_violation <= 1e-10 && r.homogeneity_max_err <= 1e-10 && r.symmetry_max_err <= 1e-10;
        rows.push(r);
    }
    Ok((ok, json!({ "pairs": val(&rows), "samples": n })))
}

fn c03(prof: &Profile) -> Outcome {
    let cfg = prof.cfg();
    let mut rows = Vec::new();
    let mut ok = true;
    for (spec, kind) in builtin_defaults().into_iter().skip(1) {
        let g = gauge(&spec, kind)?;
        let q = spec.q();
        for gamma in [0.0, q / 2.0, q, q + 1.0] {
            let pc = quadrature::polar_check(&spec, &g, gamma, 0.5, 2.0, &cfg)?;
            ok &= pc.passed;
            rows.push(json!({ "group": spec.name(), "gauge": g.label(), "check": val(&pc) }));
        }
    }
    let e2 = GroupSpec::euclidean(2, Some(&[1.0, 1.0]))?;
    let ge = gauge(&e2, GaugeKind::EuclideanPower)?;
    let exact = quadrature::annulus_power_integral(&e2, &ge, 3.0, 0.5, 1.0, &cfg)?;
    let target = std::f64::consts::TAU;
    ok &= exact.contains(target);
    Ok((ok, json!({ "identities": rows, "exact": { "estimate": val(&exact), "target": target } })))
}

fn c04(prof: &Profile) -> Outcome {
    let cfg = prof.cfg();
    let tol_diag = prof.tol(0.02);
    let mut rows = Vec::new();
    let mut ok = true;
    for (spec, kind) in builtin_defaults() {
        let g = gauge(&spec, kind)?;
        let sigma = quadrature::sigma_q(&spec, &g, &cfg)?;
        let sigma_ext = quadrature::sigma_q_exterior(&spec, &g, 0.5, &cfg)?;
        let tau = quadrature::tau_m(&spec, &g, &cfg)?;
        let hz: Vec<usize> = spec.horizontal().collect();
        let m = hz.len() as f64;
        let mut moments = Vec::new();
        let mut tau_dual = None;
        for s in [0.25, 0.5, 0.75] {
            let pred = tau.value / (2.0 * m * (1.0 - s));
            let mut diag_sum = Estimate::exact(0.0);
            for &i in &hz {
                let d = quadrature::moment_integral(&spec, &g, i, i, s, &cfg)?;
                let rel = (d.value - pred).abs() / pred;
                ok &= rel <= tol_diag;
                diag_sum = diag_sum.plus(&d);
                moments.push(json!({ "s": s, "i": i, "j": i, "estimate": val(&d), "predicted": pred, "rel_err": rel }));
            }
            if s == 0.5 {
                tau_dual = Some(diag_sum.scale(2.0 * (1.0 - s)));
            }
            if hz.len() >= 2 {
                let off = quadrature::moment_integral(&spec, &g, hz[0], hz[1], s, &cfg)?;
                ok &= off.value.abs() <= prof.tol(2.0) * off.std_err;
                moments.push(json!({ "s": s, "i": hz[0], "j": hz[1], "estimate": val(&off), "predicted": 0.0 }));
            }
        }
        let tau_dual = tau_dual.expect("s = 0.5 is on the grid");
        let sigma_ok = sigma.agrees(&sigma_ext, prof.tol(2.0));
        let tau_ok = tau.agrees(&tau_dual, prof.tol(2.0));
        ok &= sigma_ok && tau_ok;
        let mut row = json!({
            "group": spec.name(), "gauge": g.label(), "Q": spec.q(),
            "sigma_q": val(&sigma), "sigma_q_exterior": val(&sigma_ext), "sigma_agree": sigma_ok,
            "tau_m": val(&tau), "tau_m_moments": val(&tau_dual), "tau_agree": tau_ok,
            "moments": moments,
        });
        if spec.dim() == 2 && spec.weights() == [1.0, 1.0] {
            let target = std::f64::consts::TAU;
            let (rs, rt) = ((sigma.value - target).abs() / target, (tau.value - target).abs() / target);
            ok &= rs <= prof.tol(0.01) && rt <= prof.tol(0.01);
            row["exact"] = json!({ "target": target, "sigma_rel_err": rs, "tau_rel_err": rt });
        }
        rows.push(row);
    }
    Ok((ok, json!({ "groups": rows })))
}

fn c05(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let p = eng.params(0.5)?;
    let u = CompactBump::new(&h, 1.0)?;
    let eps = 2f64.powi(-8);
    let points = [[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [0.5, 0.5, 0.0], [-0.4, 0.1, 0.3], [1.5, 0.0, 0.0]];
    let mut rows = Vec::new();
    let mut ok = true;
    for g in points {
        let a = eng.eval_ls(&p, &u, &g)?;
        let b = eng.eval_ls_pv(&p, &u, &g, &[eps])?.remove(0);
        let agree = a.agrees(&b, prof.tol(2.0));
        ok &= agree;
        rows.push(json!({ "point": g, "second_difference": val(&a), "principal_value": val(&b), "agree": agree }));
    }
    Ok((ok, json!({ "eps": eps, "s": 0.5, "rows": rows })))
}

fn c06(prof: &Profile) -> Outcome {
    let e1 = GroupSpec::euclidean(1, Some(&[1.0]))?;
    let g = gauge(&e1, GaugeKind::EuclideanPower)?;
    // one-dimensional runs are cheap; a larger budget keeps the 2σ band inside 2%
    let cfg = prof.cfg().with_samples(prof.samples(600_000));
    let eng = Engine::new(&e1, &g, &cfg)?;
    let u = Gaussian::new(1);
    let mut rows = Vec::new();
    let mut ok = true;
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(&e1, s)?;
        for x in [0.0, 0.5, 1.0] {
            let est = eng.eval_ls(&p, &u, &[x])?;
            let oracle = fracop::ls_gaussian_1d_oracle(s, x);
            let rel = (est.value - oracle).abs() / oracle.abs();
            ok &= rel <= prof.tol(0.02);
            rows.push(json!({ "s": s, "x": x, "estimate": val(&est), "oracle": oracle, "rel_err": rel }));
        }
    }
    Ok((ok, json!({ "samples": cfg.n_samples, "rows": rows })))
}

fn c07(prof: &Profile) -> Outcome {
    let cfg = prof.cfg();
    let e2 = GroupSpec::euclidean(2, Some(&[1.0, 1.0]))?;
    let ge = gauge(&e2, GaugeKind::EuclideanPower)?;
    let mut rows = fracop::limit_probe(&e2, &ge, &Gaussian::new(2), &[pt(&[0.0, 0.0])], &[0.02, 0.98], &cfg)?;
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let bump = CompactBump::new(&h, 1.0)?;
    rows.extend(fracop::limit_probe(&h, &k, &bump, &[pt(&[0.0, 0.0, 0.0]), pt(&[0.3, 0.2, 0.1])], &[0.02, 0.98], &cfg)?);
    let tol = prof.tol(0.10);
    let ok = rows.iter().all(|r| r.rel_err <= tol);
    Ok((ok, json!({ "tolerance": tol, "rows": val(&rows) })))
}

fn c08(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let s = 0.5;
    let p = eng.params(s)?;
    let u: Field = Arc::new(CompactBump::new(&h, 1.0)?);
    let k2 = prof.tol(2.0);
    let g0 = [0.3, -0.2, 0.1];
    let g = [0.2, 0.1, -0.1];
    let lt = LeftTranslate::new(&h, &g0, u.clone());
    let a = eng.eval_ls(&p, &lt, &g)?;
    let b = eng.eval_ls(&p, u.as_ref(), &h.multiply(&g0, &g))?;
    let trans_ok = a.agrees(&b, k2);
    let mut dil = Vec::new();
    let mut dil_ok = true;
    for lam in [2.0f64, 0.5] {
        let d = Dilate::new(&h, lam, 1.0, u.clone());
        let lhs = eng.eval_ls(&p, &d, &g)?;
        let rhs = eng.eval_ls(&p, u.as_ref(), &h.dilate(lam, &g))?.scale(lam.powf(2.0 * s));
        let okd = lhs.agrees(&rhs, k2);
        dil_ok &= okd;
        dil.push(json!({ "lambda": lam, "lhs": val(&lhs), "rhs": val(&rhs), "agree": okd }));
    }
    let base = eng.seminorm_sq(&p, u.as_ref())?;
    let mut sem = Vec::new();
    let mut sem_ok = true;
    for lam in [2.0f64, 0.5] {
        let amp = lam.powf((h.q() - 2.0 * s) / 2.0);
        let d = Dilate::new(&h, lam, amp, u.clone());
        let e = eng.seminorm_sq(&p, &d)?;
        let oks = e.agrees(&base, k2);
        sem_ok &= oks;
        sem.push(json!({ "lambda": lam, "seminorm_sq": val(&e), "agree": oks }));
    }
    Ok((
        trans_ok && dil_ok && sem_ok,
        json!({
            "translation": { "g0": g0, "g": g, "lhs": val(&a), "rhs": val(&b), "agree": trans_ok },
            "dilation": dil,
            "seminorm_scaling": { "base": val(&base), "rows": sem },
        }),
    ))
}

fn c09(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let p = eng.params(0.5)?;
    let u = CompactBump::new(&h, 1.0)?;
    let v = LeftTranslate::new(&h, &[0.3, 0.0, 0.2], Arc::new(CompactBump::new(&h, 1.2)?));
    let form = eng.dirichlet_form(&p, &u, &v)?;
    let pair = eng.pairing(&p, &v, &u)?;
    let diff = form.minus(&pair);
    let form_ok = diff.value.abs() <= prof.tol(2.0) * form.std_err.hypot(pair.std_err) + form.tail_bound + pair.tail_bound;
    let g = [0.1, 0.2, -0.1];
    let w = Gaussian::new(3);
    let pr = eng.product_rule_check(&p, &u, &w, &g)?;
    let r = &pr.residual;
    let pr_ok = r.value.abs() <= prof.tol(2.0) * r.std_err + r.tail_bound;
    Ok((
        form_ok && pr_ok,
        json!({
            "dirichlet_form": val(&form), "pairing": val(&pair), "difference": val(&diff), "form_ok": form_ok,
            "product_rule": val(&pr), "point": g, "product_rule_ok": pr_ok,
        }),
    ))
}

fn c10(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let p = eng.params(0.5)?;
    let u = CompactBump::new(&h, 1.0)?;
    let big_r = fields::support_radius(&u, &k).ok_or_else(|| Error::Domain("bump has no support".into()))?;
    let (_, rows) = fracop::decay_profile(&eng, &p, &u, &[2.0 * big_r, 4.0 * big_r, 8.0 * big_r])?;
    let mut ok = true;
    let mut out = Vec::new();
    for r in &rows {
        let bound_ok = r.scaled <= r.bound;
        let direct_ok = (r.value.value - r.direct).abs() <= prof.tol(2.0) * r.value.std_err + r.value.tail_bound;
        ok &= bound_ok && direct_ok;
        out.push(json!({ "row": val(r), "bound_ok": bound_ok, "direct_ok": direct_ok }));
    }
    Ok((ok, json!({ "support_radius": big_r, "rows": out })))
}

/// Test fields used for the embedding inequality on `spec`.
pub fn sobolev_test_fields(spec: &GroupSpec) -> Result<Vec<Field>> {
    let n = spec.dim();
    let mut powers = vec![0; n];
    powers[0] = 1;
    let mut v: Vec<Field> = vec![
        Arc::new(Gaussian::new(n)),
        Arc::new(CompactBump::new(spec, 1.0)?),
        Arc::new(PolyBump::new(spec, powers, 1.0)?),
    ];
    if n == 2 {
        v.push(Arc::new(SeparableProduct::new(1.0, 1.0)));
    }
    Ok(v)
}

fn c11(prof: &Profile) -> Outcome {
    let s = 0.5;
    let cfg = prof.cfg();
    let slack = 1.05;
    let mut rows = Vec::new();
    let mut ok = true;
    for (spec, g) in builtin_pairs() {
        if spec.q() <= 2.0 * s {
            continue;
        }
        let eng = Engine::new(&spec, &g, &cfg)?;
        let p = eng.params(s)?;
        let pexp = p.critical_exponent();
        let factor = sobolev::sobolev_factor(spec.q(), s, eng.sigma.value)?;
        for u in sobolev_test_fields(&spec)? {
            let semi = eng.seminorm(&p, u.as_ref())?;
            let lp = eng.lp_pow(u.as_ref(), pexp)?;
            let norm = lp.value.max(0.0).powf(1.0 / pexp);
            let ratio = norm / (factor * semi.value);
            ok &= ratio <= slack;
            rows.push(json!({
                "group": spec.name(), "gauge": g.label(), "field": u.describe(),
                "lp_norm": norm, "lp_pow": val(&lp), "seminorm": val(&semi), "sigma_q": val(&eng.sigma),
                "factor": factor, "ratio": ratio,
            }));
        }
    }
    let bracket = sobolev::hedberg_bracket(4.0, 0.5)?;
    let target = 3f64.powf(0.25) + 3f64.powf(-0.75);
    ok &= (bracket - 1.7548).abs() <= 1e-3;
    Ok((ok, json!({ "s": s, "slack": slack, "rows": rows, "bracket": bracket, "bracket_closed_form": target })))
}

fn c12(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let cfg = prof.cfg();
    let sigma = quadrature::sigma_q(&h, &k, &cfg)?;
    let p = FracParams::new(&h, 0.5)?;
    let init_field = CompactBump::new(&h, 3.0)?;
    let init = GridField::sample(&k, 6.0, &[16, 16, 16], &init_field)?;
    let opts = GridOptions { exterior_samples: prof.samples(16_384), seed: prof.seed, ..Default::default() };
    let op = GridOperator::new(&h, &k, &p, &init, sigma.value, &opts)?;
    let res = sobolev::optimize_quotient(&op, &init, &OptimizeOptions::default())?;
    let monotone = res.trace.windows(2).all(|w| w[1].quotient <= w[0].quotient);
    let first10 = res.trace.iter().take(11).collect::<Vec<_>>();
    let strict10 = first10.windows(2).all(|w| w[1].quotient < w[0].quotient);
    let final_q = op.quotient(&res.field)?;
    let lam: f64 = 2.0;
    let amp = lam.powf(-h.q() / p.critical_exponent());
    let scaled = res.field.dilated(&h, lam, amp);
    let op2 = GridOperator::new(&h, &k, &p, &scaled, sigma.value, &opts)?;
    let q2 = op2.quotient(&scaled)?;
    let rescale_rel = (q2 - final_q).abs() / final_q;
    let factor = sobolev::sobolev_factor(h.q(), 0.5, sigma.value)?;
    let ok = monotone && res.residual <= prof.tol(0.05) && rescale_rel <= prof.tol(0.03);
    Ok((
        ok,
        json!({
            "grid": [16, 16, 16], "box": 6.0, "iterations": res.trace.len() - 1,
            "initial_quotient": res.trace[0].quotient, "final_quotient": final_q,
            "monotone": monotone, "strict_first_10": strict10,
            "euler_lagrange_residual": res.residual, "multiplier": res.multiplier,
            "stagnated": res.stagnated, "clamped_steps": res.clamped_steps, "min_value": res.min_value,
            "rescaled_quotient": q2, "rescale_rel_diff": rescale_rel,
            "quotient_times_factor_sq": final_q * factor * factor,
            "sigma_q": val(&sigma),
        }),
    ))
}

/// The truncation test field: a Gaussian spread to scale 4.
pub fn truncation_test_field(spec: &GroupSpec) -> Field {
    Arc::new(Dilate::new(spec, 0.25, 1.0, Arc::new(Gaussian::new(spec.dim()))))
}

fn c13(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let p = eng.params(0.5)?;
    let rho = sobolev::standard_mollifier(&h)?;
    let u: Field = Arc::new(CompactBump::new(&h, 1.0)?);
    let base = eng.seminorm(&p, u.as_ref())?;
    let mut moll = Vec::new();
    let mut contraction_ok = true;
    let mut diffs = Vec::new();
    for eps in [0.5, 0.25, 0.125] {
        let ue: Field = Arc::new(sobolev::mollify(&h, rho.as_ref(), eps, u.clone(), 4)?);
        let se = eng.seminorm(&p, ue.as_ref())?;
        let okc = se.value <= (1.0 + prof.tol(0.03)) * base.value;
        contraction_ok &= okc;
        let diff = LinComb::new(vec![(1.0, ue.clone()), (-1.0, u.clone())]);
        let sd = eng.seminorm(&p, &diff)?;
        diffs.push(sd.value);
        moll.push(json!({ "eps": eps, "seminorm": val(&se), "contraction_ok": okc, "diff_seminorm": val(&sd) }));
    }
    let diff_ok = diffs.windows(2).all(|w| w[1] < w[0]);
    let w = truncation_test_field(&h);
    let mut trunc = Vec::new();
    let mut tvals = Vec::new();
    for r in [4.0, 8.0, 16.0] {
        let phi: Field = Arc::new(sobolev::truncation_field(&k, r)?);
        let pu = Product::new(phi, w.clone());
        let e = eng.seminorm(&p, &pu)?;
        tvals.push(e.value);
        trunc.push(json!({ "R": r, "seminorm": val(&e) }));
    }
    let trunc_ok = tvals.windows(2).all(|w| w[1] < w[0]);
    Ok((
        contraction_ok && diff_ok && trunc_ok,
        json!({
            "seminorm_u": val(&base), "mollified": moll, "contraction_ok": contraction_ok, "diff_decreasing": diff_ok,
            "truncation_field": w.describe(), "truncation": trunc, "truncation_decreasing": trunc_ok,
        }),
    ))
}

fn c14(prof: &Profile) -> Outcome {
    let h = heis1();
    let k = gauge(&h, GaugeKind::Koranyi)?;
    let eng = Engine::new(&h, &k, &prof.cfg())?;
    let p = eng.params(0.5)?;
    let u = CompactBump::new(&h, 1.0)?;
    let semi = eng.seminorm(&p, &u)?;
    let dir = [1.0, 1.0, 1.0];
    let dir = h.dilate(1.0 / k.eval(&dir), &dir);
    let mut rows = Vec::new();
    for j in 0..=5 {
        let hv = h.dilate(2f64.powi(-j), &dir);
        rows.push(eng.translation_difference(&p, &u, &hv, &semi)?);
    }
    let c = rows.iter().map(|r| r.ratio.value).fold(0.0, f64::max);
    let finite = rows.iter().all(|r| r.ratio.value.is_finite() && r.ratio.value > 0.0);
    let last = rows.last().map(|r| r.ratio.value).unwrap_or(f64::NAN);
    let first = rows[0].ratio.value;
    let ok = finite && c.is_finite() && last <= first;
    Ok((ok, json!({ "seminorm": val(&semi), "constant": c, "rows": val(&rows) })))
}

fn c15(prof: &Profile) -> Outcome {
    let h = heis1();
    let m = gauge(&h, GaugeKind::Max)?;
    let s = 0.5;
    let u = CompactBump::new(&h, 1.0)?;
    let omega = CoordBox::centered(&[1.0, 1.0, 1.0]);
    let mut rows = Vec::new();
    let mut ds = Vec::new();
    let mut vs = Vec::new();
    for delta in [0.4, 0.2, 0.1] {
        let balls = sobolev::max_gauge_tiling(&h, &m, delta, &omega)?;
        let d = sobolev::rellich_defect(&h, &m, &u, &balls, &omega, if prof.quick { 3 } else { 4 })?;
        ds.push(delta);
        vs.push(d.defect.value);
        rows.push(d);
    }
    let slope = fields::loglog_slope(&ds, &vs);
    let eng = Engine::new(&h, &m, &prof.cfg())?;
    let semi = eng.seminorm_sq(&eng.params(s)?, &u)?;
    let consts: Vec<f64> = rows.iter().map(|r| r.defect.value / (r.delta.powf(2.0 * s) * semi.value)).collect();
    let ok = slope >= 2.0 * s - 0.2;
    Ok((ok, json!({ "slope": slope, "threshold": 2.0 * s - 0.2, "rows": val(&rows), "seminorm_sq": val(&semi), "constants": consts })))
}

fn c16(_prof: &Profile) -> Outcome {
    let ks = [1.0, 4.0, 16.0, 64.0, 256.0];
    let etas = [0.1, 0.01, 0.001];
    let rows = sobolev::counterexample_sweep(&fields::bump1d, 1.0, &ks, &etas)?;
    let disjoint_ok = rows.iter().filter(|r| r.disjoint).all(|r| r.ratio >= 0.9 * r.disjoint_value);
    let at_001 = rows.iter().filter(|r| r.eta == 0.01).map(|r| r.ratio).fold(0.0, f64::max);
    let base = rows.iter().find(|r| r.k == 1.0 && r.eta == 0.1).map(|r| r.ratio).unwrap_or(f64::NAN);
    let best = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let ok = disjoint_ok && at_001 > 12.0 && best > 10.0 * base;
    Ok((ok, json!({ "rows": val(&rows), "max_at_eta_0.01": at_001, "max_ratio": best, "ratio_k1_eta0.1": base })))
}

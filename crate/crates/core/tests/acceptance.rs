//! Acceptance suite: one test per numbered criterion, full budgets, seed 7.
//! Each test prints a PASS/FAIL line (bypassing output capture) and then checks
//! the reported metrics against oracles computed here.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use homfrac_core::report::{run_criterion, CriterionResult, Profile};
use homfrac_core::GroupSpec;
use serde_json::Value;

const SEED: u64 = 7;

fn run(id: u32) -> CriterionResult {
    let r = run_criterion(id, &Profile::full(SEED));
    let line = format!(
        "criterion {:>2} [{}]: {} ({:.1}s)\n",
        r.id,
        r.title,
        if r.passed { "PASS" } else { "FAIL" },
        r.seconds
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(r.passed, "criterion {} failed: {}", id, r.metrics);
    r
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {}", v))
}

fn arr(v: &Value) -> &Vec<Value> {
    v.as_array().unwrap_or_else(|| panic!("not an array: {}", v))
}

/// Simpson's rule on `[a, b]` with `n` (even) panels.
fn simpson(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = g(a) + g(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Lanczos approximation (g = 7, nine terms) for positive arguments.
fn gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Kummer's series `₁F₁(a; b; z)`.
fn hyp1f1(a: f64, b: f64, z: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 0..500 {
        let k = k as f64;
        term *= (a + k) / (b + k) * z / (k + 1.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `ℒ_s e^{−x²}` on the line. `(−Δ)^s e^{−x²} = 4^s Γ(½+s)/Γ(½) ₁F₁(½+s; ½; −x²)`
/// and `ℒ_s = (2/C(1,s))(−Δ)^s` with `C(1,s) = 4^s Γ(½+s)/(π^{½}|Γ(−s)|)`, which
/// leaves `2|Γ(−s)| ₁F₁(½+s; ½; −x²)`.
fn ls_gaussian_line(s: f64, x: f64) -> f64 {
    let g_neg_s = gamma(1.0 - s) / -s;
    2.0 * g_neg_s.abs() * hyp1f1(0.5 + s, 0.5, -x * x)
}

#[test]
fn oracle_self_checks() {
    assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
    assert!((gamma(5.0) - 24.0).abs() < 1e-11);
    // ₁F₁(a; a; z) = e^z
    assert!((hyp1f1(0.7, 0.7, -0.8) - (-0.8f64).exp()).abs() < 1e-14);
    // positive at the peak, negative past the inflection
    assert!(ls_gaussian_line(0.5, 0.0) > 0.0 && ls_gaussian_line(0.5, 1.0) < 0.0);
}

#[test]
fn criterion_01_group_algebra() {
    let r = run(1);
    assert!(f(&r.metrics["max_error"]) <= 1e-10);
    // the heisenberg(1) law written out by hand
    let h = GroupSpec::heisenberg(1).unwrap();
    let pts = [[0.3, -1.2, 0.7], [1.5, 0.4, -0.2], [-0.8, 2.0, 1.1]];
    for a in &pts {
        for b in &pts {
            let expect = [a[0] + b[0], a[1] + b[1], a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0])];
            let got = h.multiply(a, b);
            for j in 0..3 {
                assert!((got[j] - expect[j]).abs() < 1e-14, "{:?}·{:?}", a, b);
            }
        }
    }
    let groups = arr(&r.metrics["groups"]);
    assert_eq!(groups.len(), 4);
    for g in groups {
        assert_eq!(g["triples"], 1000);
    }
}

#[test]
fn criterion_02_gauge_axioms() {
    let r = run(2);
    assert_eq!(r.metrics["samples"], 100_000);
    for p in arr(&r.metrics["pairs"]) {
        for k in ["triangle_max_violation", "homogeneity_max_err", "symmetry_max_err"] {
            assert!(f(&p[k]) <= 1e-10, "{} {} {}", p["group"], p["gauge"], k);
        }
    }
}

#[test]
fn criterion_03_polar_identity() {
    let r = run(3);
    // ∫_{½<|x|<1} |x|^{-3} dx in the plane, in polar form
    let oracle = simpson(0.5, 1.0, 2000, |t| TAU * t * t.powi(-3));
    assert!((oracle - TAU).abs() < 1e-9);
    let e = &r.metrics["exact"]["estimate"];
    let half = 2.0 * f(&e["std_err"]) + f(&e["tail_bound"]);
    assert!((f(&e["value"]) - oracle).abs() <= half);
    assert_eq!(arr(&r.metrics["identities"]).len(), 16);
}

#[test]
fn criterion_04_constants() {
    let r = run(4);
    // unit circle: σ is its length, τ = ∫(x² + y²)dσ the same number; polygon length as oracle
    let n = 100_000;
    let chord = 2.0 * (PI / n as f64).sin();
    let circle = n as f64 * chord;
    assert!((circle - TAU).abs() < 1e-8);
    let e2 = arr(&r.metrics["groups"]).iter().find(|g| g["group"] == "euclidean(2)").expect("euclidean(2) row");
    for k in ["sigma_q", "tau_m"] {
        let v = f(&e2[k]["value"]);
        assert!((v - circle).abs() / circle <= 0.01, "{} = {}", k, v);
    }
}

#[test]
fn criterion_05_operator_equivalence() {
    let r = run(5);
    let rows = arr(&r.metrics["rows"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(f(&r.metrics["eps"]), 2f64.powi(-8));
}

#[test]
fn criterion_06_euclidean_cross_check() {
    let r = run(6);
    let rows = arr(&r.metrics["rows"]);
    assert_eq!(rows.len(), 9);
    for row in rows {
        let (s, x) = (f(&row["s"]), f(&row["x"]));
        let oracle = ls_gaussian_line(s, x);
        let est = f(&row["estimate"]["value"]);
        assert!((est - oracle).abs() <= 0.02 * oracle.abs(), "s={} x={}: {} vs {}", s, x, est, oracle);
    }
}

#[test]
fn criterion_07_limits() {
    let r = run(7);
    let rows = arr(&r.metrics["rows"]);
    // euclidean(2) Gaussian: u(0) = 1, −Δu(0) = 4, ∫u² = π/2, ∫|∇u|² = π
    let e2: Vec<&Value> = rows.iter().filter(|x| arr(&x["point"]).len() <= 2).take(4).collect();
    let oracle = |row: &Value| match (row["kind"].as_str().unwrap(), f(&row["s"]) < 0.5) {
        ("operator", true) => 1.0,
        ("operator", false) => 4.0,
        ("seminorm", true) => PI / 2.0,
        _ => PI,
    };
    assert_eq!(e2.len(), 4);
    for row in e2 {
        let t = oracle(row);
        let v = f(&row["normalized_value"]);
        assert!((v - t).abs() <= 0.1 * t, "{} s={}: {} vs {}", row["kind"], row["s"], v, t);
    }
    for row in rows {
        assert!(f(&row["rel_err"]) <= 0.1);
    }
}

#[test]
fn criterion_08_invariances() {
    let r = run(8);
    assert_eq!(r.metrics["translation"]["agree"], true);
    assert_eq!(arr(&r.metrics["dilation"]).len(), 2);
}

#[test]
fn criterion_09_form_and_product_rule() {
    let r = run(9);
    let m = &r.metrics;
    let d = f(&m["dirichlet_form"]["value"]) - f(&m["pairing"]["value"]);
    let band = 2.0 * f(&m["dirichlet_form"]["std_err"]).hypot(f(&m["pairing"]["std_err"]));
    assert!(d.abs() <= band + 1e-9);
}

#[test]
fn criterion_10_decay() {
    let r = run(10);
    let rows = arr(&r.metrics["rows"]);
    assert_eq!(rows.len(), 3);
    let big_r = f(&r.metrics["support_radius"]);
    for (k, row) in rows.iter().enumerate() {
        let row = &row["row"];
        assert!((f(&row["radius"]) - big_r * 2f64.powi(k as i32 + 1)).abs() < 1e-12);
        assert!(f(&row["scaled"]) <= f(&row["bound"]));
    }
}

#[test]
fn criterion_11_sobolev_inequality() {
    let r = run(11);
    // at Q = 4, s = ½ the bracket is 3^{1/4} + 3^{-3/4}
    let closed = 3f64.powf(0.25) + 3f64.powf(-0.75);
    assert!((closed - 1.7548).abs() < 1e-4);
    assert!((f(&r.metrics["bracket"]) - closed).abs() < 1e-9);
    for row in arr(&r.metrics["rows"]) {
        assert!(f(&row["ratio"]) <= 1.05, "{}", row);
    }
}

#[test]
fn criterion_12_extremal_search() {
    let r = run(12);
    let m = &r.metrics;
    assert_eq!(m["monotone"], true);
    assert!(f(&m["euler_lagrange_residual"]) <= 0.05);
    let (a, b) = (f(&m["final_quotient"]), f(&m["rescaled_quotient"]));
    assert!((a - b).abs() <= 0.03 * a);
    assert!(a < f(&m["initial_quotient"]));
}

#[test]
fn criterion_13_mollifier_and_truncation() {
    let r = run(13);
    let base = f(&r.metrics["seminorm_u"]["value"]);
    let moll = arr(&r.metrics["mollified"]);
    for w in moll.windows(2) {
        assert!(f(&w[1]["diff_seminorm"]["value"]) < f(&w[0]["diff_seminorm"]["value"]));
    }
    for row in moll {
        assert!(f(&row["seminorm"]["value"]) <= 1.03 * base);
    }
    let t = arr(&r.metrics["truncation"]);
    assert!(t.windows(2).all(|w| f(&w[1]["seminorm"]["value"]) < f(&w[0]["seminorm"]["value"])));
}

#[test]
fn criterion_14_translation_difference() {
    let r = run(14);
    let rows = arr(&r.metrics["rows"]);
    assert_eq!(rows.len(), 6);
    let c = rows.iter().map(|x| f(&x["ratio"]["value"])).fold(0.0, f64::max);
    assert_eq!(c, f(&r.metrics["constant"]));
    for (j, row) in rows.iter().enumerate() {
        assert!((f(&row["h_norm"]) - 2f64.powi(-(j as i32))).abs() < 1e-12);
        assert!(f(&row["ratio"]["value"]) <= c);
    }
}

#[test]
fn criterion_15_rellich_defect() {
    let r = run(15);
    let rows = arr(&r.metrics["rows"]);
    let xs: Vec<f64> = rows.iter().map(|x| f(&x["delta"]).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|x| f(&x["defect"]["value"]).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = cov / var;
    assert!((slope - f(&r.metrics["slope"])).abs() < 1e-9);
    assert!(slope >= 2.0 * 0.5 - 0.2);
}

#[test]
fn criterion_16_counterexample() {
    let r = run(16);
    let bump = |x: f64| if x.abs() < 1.0 { (-1.0 / (1.0 - x * x)).exp() } else { 0.0 };
    // k = 256, η = 0.01: shift 2.56 separates the two copies
    let (eta, a): (f64, f64) = (0.01, 2.56);
    let norm_sq = simpson(-1.0, 1.0, 4000, |x| bump(x).powi(2));
    let diff_sq = simpson(-1.0 - a, 1.0, 16000, |x| (bump(x + a) - bump(x)).powi(2));
    let ratio = (diff_sq / norm_sq).sqrt() / eta.sqrt();
    assert!((ratio - 2f64.sqrt() / eta.sqrt()).abs() < 1e-6);
    let row = arr(&r.metrics["rows"])
        .iter()
        .find(|x| f(&x["k"]) == 256.0 && f(&x["eta"]) == eta)
        .expect("k = 256, η = 0.01");
    assert!((f(&row["ratio"]) - ratio).abs() < 1e-6 * ratio);
    assert!(f(&r.metrics["max_at_eta_0.01"]) > 12.0);
}

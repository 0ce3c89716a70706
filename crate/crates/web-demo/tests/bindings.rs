use homfrac_web_demo::{counterexample, gauge_probe, hedberg};

fn parse(s: Result<String, wasm_bindgen::JsValue>) -> serde_json::Value {
    serde_json::from_str(&s.unwrap_or_else(|_| panic!("binding failed"))).unwrap()
}

#[test]
fn gauge_probe_reports_homogeneity_and_symmetry() {
    let v = parse(gauge_probe("heisenberg:1", "koranyi", "1,0.5,-0.3", "0,1,0.2", 2.0));
    let f = |k: &str| v[k].as_f64().unwrap();
    assert!((f("norm_dilated") - f("lambda_norm_x")).abs() < 1e-12);
    assert!((f("norm_x") - f("norm_x_inverse")).abs() < 1e-12);
    assert!(f("norm_product") <= f("norm_sum"));
    assert!((v["product"][2].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn hedberg_bracket_at_q4() {
    let v = parse(hedberg(4.0, 0.5, 1.0));
    assert!((v["bracket"].as_f64().unwrap() - 1.7548).abs() < 1e-3);
}

#[test]
fn sweep_has_one_row_per_pair() {
    let v = parse(counterexample("1,256", "0.01"));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["disjoint"], true);
}

//! Browser bindings for three small computations: gauge values on a group,
//! the Hedberg constant, and the translation-ratio sweep on the line.

use homfrac_core::{fields, sobolev, Gauge, GaugeKind, GroupSpec};
use wasm_bindgen::prelude::*;

fn js(e: homfrac_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_list(s: &str) -> Result<Vec<f64>, JsValue> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| JsValue::from_str(&format!("not a number: `{}`", t.trim()))))
        .collect()
}

/// Gauge of `x`, of `x⁻¹`, and of `δ_λ x`, with the product `x·y`, as JSON.
#[wasm_bindgen]
pub fn gauge_probe(group: &str, gauge: &str, x: &str, y: &str, lambda: f64) -> Result<String, JsValue> {
    let spec = GroupSpec::parse_selector(group).map_err(js)?;
    let g = Gauge::new(GaugeKind::parse(gauge).map_err(js)?, &spec).map_err(js)?;
    let (x, y) = (parse_list(x)?, parse_list(y)?);
    if x.len() != spec.dim() || y.len() != spec.dim() {
        return Err(JsValue::from_str(&format!("{} needs {} coordinates", spec.name(), spec.dim())));
    }
    let xy = spec.multiply(&x, &y);
    let out = serde_json::json!({
        "group": spec.name(),
        "Q": spec.q(),
        "gauge": g.label(),
        "norm_x": g.eval(&x),
        "norm_x_inverse": g.eval(&spec.inverse(&x)),
        "norm_dilated": g.eval(&spec.dilate(lambda, &x)),
        "lambda_norm_x": lambda * g.eval(&x),
        "product": xy.to_vec(),
        "norm_product": g.eval(&xy),
        "norm_sum": g.eval(&x) + g.eval(&y),
    });
    Ok(out.to_string())
}

/// Hedberg bracket, constant and embedding factor for `Q`, `s` and `σ_Q`.
#[wasm_bindgen]
pub fn hedberg(q: f64, s: f64, sigma_q: f64) -> Result<String, JsValue> {
    let r = sobolev::hedberg_report(q, s, sigma_q).map_err(js)?;
    serde_json::to_string(&r).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// `r(k, η)` for the one-dimensional bump over comma-separated `k` and `η` lists.
#[wasm_bindgen]
pub fn counterexample(ks: &str, etas: &str) -> Result<String, JsValue> {
    let rows = sobolev::counterexample_sweep(&fields::bump1d, 1.0, &parse_list(ks)?, &parse_list(etas)?).map_err(js)?;
    serde_json::to_string(&rows).map_err(|e| JsValue::from_str(&e.to_string()))
}

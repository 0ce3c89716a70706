//! Scalar fields on a group, invariant vector fields and the order-2 Taylor apparatus.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::group::{Coeff, CoordBox, GroupSpec, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Schwartz,
    CompactSmooth,
    Grid,
}

/// A real function on the group.
///
/// Implementations must be deterministic and safe to evaluate concurrently.
pub trait ScalarField: Send + Sync {
    fn eval(&self, g: &[f64]) -> f64;

    /// Euclidean gradient in exponential coordinates, when known in closed form.
    fn gradient(&self, _g: &[f64]) -> Option<Point> {
        None
    }

    /// Coordinate box outside which the field vanishes, or is bounded by `tail_mass`.
    fn support(&self) -> Option<CoordBox>;

    fn smoothness(&self) -> Smoothness;

    /// Upper bound for `|u|`.
    fn sup_norm(&self) -> f64;

    /// Upper bound for `∫|u|` outside `support()`.
    fn tail_mass(&self) -> f64 {
        0.0
    }

    fn constant_value(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;
}

pub type Field = Arc<dyn ScalarField>;

impl std::fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Gauge radius of the support box: every point of the support has gauge at most this.
pub fn support_radius(u: &dyn ScalarField, gauge: &Gauge) -> Option<f64> {
    u.support().map(|b| gauge.sup_over_box(&b))
}

pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn eval(&self, _g: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        Some(smallvec::smallvec![0.0; g.len()])
    }
    fn support(&self) -> Option<CoordBox> {
        None
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Schwartz
    }
    fn sup_norm(&self) -> f64 {
        self.0.abs()
    }
    fn constant_value(&self) -> Option<f64> {
        Some(self.0)
    }
    fn describe(&self) -> String {
        format!("constant:c={}", self.0)
    }
}

/// `exp(-‖x‖²)`; the support box has half-width 5 with the remaining mass as `tail_mass`.
pub struct Gaussian {
    dim: usize,
}

pub const GAUSSIAN_HALF_WIDTH: f64 = 5.0;

impl Gaussian {
    pub fn new(dim: usize) -> Self {
        Gaussian { dim }
    }
}

fn erfc_bound(a: f64) -> f64 {
    // ∫_a^∞ e^{-x²} dx ≤ e^{-a²}/(2a)
    (-a * a).exp() / (2.0 * a)
}

impl ScalarField for Gaussian {
    fn eval(&self, g: &[f64]) -> f64 {
        (-g.iter().map(|x| x * x).sum::<f64>()).exp()
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let u = self.eval(g);
        Some(g.iter().map(|x| -2.0 * x * u).collect())
    }
    fn support(&self) -> Option<CoordBox> {
        Some(CoordBox::centered(&vec![GAUSSIAN_HALF_WIDTH; self.dim]))
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Schwartz
    }
    fn sup_norm(&self) -> f64 {
        1.0
    }
    fn tail_mass(&self) -> f64 {
        let full = std::f64::consts::PI.sqrt();
        self.dim as f64 * 2.0 * erfc_bound(GAUSSIAN_HALF_WIDTH) * full.powi(self.dim as i32 - 1)
    }
    fn describe(&self) -> String {
        "gaussian".into()
    }
}

/// `exp(-1/(1-q))` with `q = Σ x_j²/R^{2d_j}`, zero for `q ≥ 1`.
pub struct CompactBump {
    inv_r2: Vec<f64>,
    half: Vec<f64>,
    r: f64,
}

impl CompactBump {
    pub fn new(spec: &GroupSpec, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Domain("bump radius must be positive".into()));
        }
        let half: Vec<f64> = spec.weights().iter().map(|d| r.powf(*d)).collect();
        Ok(CompactBump { inv_r2: half.iter().map(|h| 1.0 / (h * h)).collect(), half, r })
    }

    #[inline]
    fn q(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.inv_r2).map(|(x, w)| x * x * w).sum()
    }
}

impl ScalarField for CompactBump {
    #[inline]
    fn eval(&self, g: &[f64]) -> f64 {
        let q = self.q(g);
        if q >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - q)).exp()
        }
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let q = self.q(g);
        if q >= 1.0 {
            return Some(smallvec::smallvec![0.0; g.len()]);
        }
        let u = (-1.0 / (1.0 - q)).exp();
        let f = -u / ((1.0 - q) * (1.0 - q));
        Some(g.iter().zip(&self.inv_r2).map(|(x, w)| f * 2.0 * x * w).collect())
    }
    fn support(&self) -> Option<CoordBox> {
        Some(CoordBox::centered(&self.half))
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactSmooth
    }
    fn sup_norm(&self) -> f64 {
        (-1.0f64).exp()
    }
    fn describe(&self) -> String {
        format!("compact_bump:R={}", self.r)
    }
}

/// Coordinate monomial times a compact bump.
pub struct PolyBump {
    powers: Vec<i32>,
    bump: CompactBump,
    sup: f64,
}

impl PolyBump {
    pub fn new(spec: &GroupSpec, powers: Vec<i32>, r: f64) -> Result<Self> {
        if powers.len() != spec.dim() || powers.iter().any(|p| *p < 0) {
            return Err(Error::Domain("poly_bump needs one nonnegative power per coordinate".into()));
        }
        let bump = CompactBump::new(spec, r)?;
        let sup = bump.half.iter().zip(&powers).map(|(h, p)| h.powi(*p)).product::<f64>()
            * (-1.0f64).exp();
        Ok(PolyBump { powers, bump, sup })
    }
}

impl ScalarField for PolyBump {
    fn eval(&self, g: &[f64]) -> f64 {
        let b = self.bump.eval(g);
        if b == 0.0 {
            return 0.0;
        }
        b * g.iter().zip(&self.powers).map(|(x, p)| x.powi(*p)).product::<f64>()
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let b = self.bump.eval(g);
        let db = self.bump.gradient(g)?;
        let mono: f64 = g.iter().zip(&self.powers).map(|(x, p)| x.powi(*p)).product();
        Some(
            (0..g.len())
                .map(|j| {
                    let p = self.powers[j];
                    let dm = if p == 0 {
                        0.0
                    } else {
                        p as f64
                            * g.iter()
                                .zip(&self.powers)
                                .enumerate()
                                .map(|(i, (x, q))| if i == j { x.powi(q - 1) } else { x.powi(*q) })
                                .product::<f64>()
                    };
                    dm * b + mono * db[j]
                })
                .collect(),
        )
    }
    fn support(&self) -> Option<CoordBox> {
        self.bump.support()
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactSmooth
    }
    fn sup_norm(&self) -> f64 {
        self.sup
    }
    fn describe(&self) -> String {
        format!("poly_bump:p={:?},R={}", self.powers, self.bump.r)
    }
}

/// One-dimensional bump `exp(-1/(1-x²))` on `(-1, 1)`.
pub fn bump1d(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// `φ(x_1)·ψ(x_2)` on a two-dimensional group, both factors `bump1d` scaled to `(-a, a)`.
pub struct SeparableProduct {
    a: f64,
    b: f64,
}

impl SeparableProduct {
    pub fn new(a: f64, b: f64) -> Self {
        SeparableProduct { a, b }
    }
}

impl ScalarField for SeparableProduct {
    fn eval(&self, g: &[f64]) -> f64 {
        bump1d(g[0] / self.a) * bump1d(g[1] / self.b)
    }
    fn support(&self) -> Option<CoordBox> {
        Some(CoordBox::centered(&[self.a, self.b]))
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactSmooth
    }
    fn sup_norm(&self) -> f64 {
        (-2.0f64).exp()
    }
    fn describe(&self) -> String {
        format!("product:phi=bump1d,psi=bump1d,a={},b={}", self.a, self.b)
    }
}

/// `g ↦ u(g₀·g)`.
pub struct LeftTranslate {
    spec: GroupSpec,
    g0: Point,
    inner: Field,
}

impl LeftTranslate {
    pub fn new(spec: &GroupSpec, g0: &[f64], inner: Field) -> Self {
        LeftTranslate { spec: spec.clone(), g0: g0.iter().cloned().collect(), inner }
    }
}

impl ScalarField for LeftTranslate {
    fn eval(&self, g: &[f64]) -> f64 {
        self.inner.eval(&self.spec.multiply(&self.g0, g))
    }
    fn support(&self) -> Option<CoordBox> {
        let inv = self.spec.inverse(&self.g0);
        self.inner.support().map(|b| self.spec.translate_box(&inv, &b))
    }
    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }
    fn tail_mass(&self) -> f64 {
        self.inner.tail_mass()
    }
    fn constant_value(&self) -> Option<f64> {
        self.inner.constant_value()
    }
    fn describe(&self) -> String {
        format!("({})∘L[{:?}]", self.inner.describe(), self.g0.as_slice())
    }
}

/// `g ↦ u(g·h)`.
pub struct RightTranslate {
    spec: GroupSpec,
    h: Point,
    inner: Field,
}

impl RightTranslate {
    pub fn new(spec: &GroupSpec, h: &[f64], inner: Field) -> Self {
        RightTranslate { spec: spec.clone(), h: h.iter().cloned().collect(), inner }
    }
}

impl ScalarField for RightTranslate {
    fn eval(&self, g: &[f64]) -> f64 {
        self.inner.eval(&self.spec.multiply(g, &self.h))
    }
    fn support(&self) -> Option<CoordBox> {
        let inv = self.spec.inverse(&self.h);
        let pt = CoordBox { lo: inv.clone(), hi: inv };
        self.inner.support().map(|b| self.spec.product_box(&b, &pt))
    }
    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }
    fn tail_mass(&self) -> f64 {
        self.inner.tail_mass()
    }
    fn constant_value(&self) -> Option<f64> {
        self.inner.constant_value()
    }
    fn describe(&self) -> String {
        format!("({})∘R[{:?}]", self.inner.describe(), self.h.as_slice())
    }
}

/// `g ↦ a·u(δ_λ g)`.
pub struct Dilate {
    spec: GroupSpec,
    lambda: f64,
    amp: f64,
    inner: Field,
}

impl Dilate {
    pub fn new(spec: &GroupSpec, lambda: f64, amp: f64, inner: Field) -> Self {
        Dilate { spec: spec.clone(), lambda, amp, inner }
    }
}

impl ScalarField for Dilate {
    fn eval(&self, g: &[f64]) -> f64 {
        self.amp * self.inner.eval(&self.spec.dilate(self.lambda, g))
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let f = self.spec.dilation_factors(self.lambda);
        let gi = self.inner.gradient(&self.spec.dilate(self.lambda, g))?;
        Some(gi.iter().zip(&f).map(|(a, b)| self.amp * a * b).collect())
    }
    fn support(&self) -> Option<CoordBox> {
        self.inner.support().map(|b| self.spec.dilate_box(1.0 / self.lambda, &b))
    }
    fn smoothness(&self) -> Smoothness {
        self.inner.smoothness()
    }
    fn sup_norm(&self) -> f64 {
        self.amp.abs() * self.inner.sup_norm()
    }
    fn tail_mass(&self) -> f64 {
        self.amp.abs() * self.inner.tail_mass() * self.lambda.powf(-self.spec.q())
    }
    fn constant_value(&self) -> Option<f64> {
        self.inner.constant_value().map(|c| c * self.amp)
    }
    fn describe(&self) -> String {
        format!("{}·({})∘δ[{}]", self.amp, self.inner.describe(), self.lambda)
    }
}

/// Pointwise product `u·v`.
pub struct Product {
    u: Field,
    v: Field,
}

impl Product {
    pub fn new(u: Field, v: Field) -> Self {
        Product { u, v }
    }
}

fn intersect(a: Option<CoordBox>, b: Option<CoordBox>) -> Option<CoordBox> {
    match (a, b) {
        (Some(a), Some(b)) => Some(CoordBox {
            lo: a.lo.iter().zip(&b.lo).map(|(x, y)| x.max(*y)).collect(),
            hi: a.hi.iter().zip(&b.hi).map(|(x, y)| x.min(*y)).collect(),
        }),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    }
}

impl ScalarField for Product {
    fn eval(&self, g: &[f64]) -> f64 {
        let a = self.u.eval(g);
        if a == 0.0 {
            return 0.0;
        }
        a * self.v.eval(g)
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let (gu, gv) = (self.u.gradient(g)?, self.v.gradient(g)?);
        let (a, b) = (self.u.eval(g), self.v.eval(g));
        Some(gu.iter().zip(&gv).map(|(x, y)| x * b + a * y).collect())
    }
    fn support(&self) -> Option<CoordBox> {
        intersect(self.u.support(), self.v.support())
    }
    fn smoothness(&self) -> Smoothness {
        match (self.u.smoothness(), self.v.smoothness()) {
            (Smoothness::Grid, _) | (_, Smoothness::Grid) => Smoothness::Grid,
            (Smoothness::Schwartz, Smoothness::Schwartz) => Smoothness::Schwartz,
            _ => Smoothness::CompactSmooth,
        }
    }
    fn sup_norm(&self) -> f64 {
        self.u.sup_norm() * self.v.sup_norm()
    }
    fn tail_mass(&self) -> f64 {
        let tu = if self.u.support().is_some() { self.u.tail_mass() * self.v.sup_norm() } else { 0.0 };
        let tv = if self.v.support().is_some() { self.v.tail_mass() * self.u.sup_norm() } else { 0.0 };
        tu.max(tv)
    }
    fn describe(&self) -> String {
        format!("({})·({})", self.u.describe(), self.v.describe())
    }
}

/// Linear combination `Σ c_i u_i`.
pub struct LinComb {
    terms: Vec<(f64, Field)>,
}

impl LinComb {
    pub fn new(terms: Vec<(f64, Field)>) -> Self {
        LinComb { terms }
    }
}

impl ScalarField for LinComb {
    fn eval(&self, g: &[f64]) -> f64 {
        self.terms.iter().map(|(c, u)| c * u.eval(g)).sum()
    }
    fn gradient(&self, g: &[f64]) -> Option<Point> {
        let mut acc: Point = smallvec::smallvec![0.0; g.len()];
        for (c, u) in &self.terms {
            let gu = u.gradient(g)?;
            for j in 0..g.len() {
                acc[j] += c * gu[j];
            }
        }
        Some(acc)
    }
    fn support(&self) -> Option<CoordBox> {
        let mut it = self.terms.iter().map(|(_, u)| u.support());
        let first = it.next()??;
        it.try_fold(first, |acc, b| b.map(|b| acc.union(&b)))
    }
    fn smoothness(&self) -> Smoothness {
        self.terms.iter().map(|(_, u)| u.smoothness()).fold(Smoothness::Schwartz, |a, b| match (a, b) {
            (Smoothness::Grid, _) | (_, Smoothness::Grid) => Smoothness::Grid,
            (Smoothness::CompactSmooth, _) | (_, Smoothness::CompactSmooth) => Smoothness::CompactSmooth,
            _ => Smoothness::Schwartz,
        })
    }
    fn sup_norm(&self) -> f64 {
        self.terms.iter().map(|(c, u)| c.abs() * u.sup_norm()).sum()
    }
    fn tail_mass(&self) -> f64 {
        self.terms.iter().map(|(c, u)| c.abs() * u.tail_mass()).sum()
    }
    fn describe(&self) -> String {
        let parts: Vec<String> =
            self.terms.iter().map(|(c, u)| format!("{}·({})", c, u.describe())).collect();
        parts.join(" + ")
    }
}

/// Closure-backed field.
pub struct FnField<F: Fn(&[f64]) -> f64 + Send + Sync> {
    pub f: F,
    pub support: Option<CoordBox>,
    pub sup: f64,
    pub name: String,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn eval(&self, g: &[f64]) -> f64 {
        (self.f)(g)
    }
    fn support(&self) -> Option<CoordBox> {
        self.support.clone()
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactSmooth
    }
    fn sup_norm(&self) -> f64 {
        self.sup
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

fn parse_kv(rest: &str) -> Vec<(String, String)> {
    rest.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let mut p = kv.splitn(2, '=');
            (p.next().unwrap_or("").trim().to_string(), p.next().unwrap_or("").trim().to_string())
        })
        .collect()
}

/// Parses `gaussian`, `compact_bump:R=1`, `poly_bump:p=1;0;0,R=1`, `constant:c=2`,
/// `product:phi=bump1d,psi=bump1d`.
pub fn parse_field(sel: &str, spec: &GroupSpec) -> Result<Field> {
    let (head, rest) = match sel.split_once(':') {
        Some((h, r)) => (h, r),
        None => (sel, ""),
    };
    let kv = parse_kv(rest);
    let get = |k: &str| kv.iter().find(|(a, _)| a.eq_ignore_ascii_case(k)).map(|(_, v)| v.as_str());
    let num = |k: &str, d: f64| -> Result<f64> {
        get(k).map(|v| v.parse::<f64>()).unwrap_or(Ok(d)).map_err(|_| Error::Config(format!("bad `{}` in `{}`", k, sel)))
    };
    match head {
        "gaussian" => Ok(Arc::new(Gaussian::new(spec.dim()))),
        "compact_bump" | "bump" => Ok(Arc::new(CompactBump::new(spec, num("R", 1.0)?)?)),
        "constant" => Ok(Arc::new(Constant(num("c", 1.0)?))),
        "poly_bump" => {
            let p = get("p").ok_or_else(|| Error::Config("poly_bump needs p=..".into()))?;
            let powers: std::result::Result<Vec<i32>, _> = p.split(';').map(|x| x.parse()).collect();
            let powers = powers.map_err(|_| Error::Config(format!("bad powers in `{}`", sel)))?;
            Ok(Arc::new(PolyBump::new(spec, powers, num("R", 1.0)?)?))
        }
        "product" => {
            if spec.dim() != 2 {
                return Err(Error::Config("product fields need a two-dimensional group".into()));
            }
            for k in ["phi", "psi"] {
                if let Some(v) = get(k) {
                    if v != "bump1d" {
                        return Err(Error::Config(format!("unknown factor `{}`", v)));
                    }
                }
            }
            Ok(Arc::new(SeparableProduct::new(num("a", 1.0)?, num("b", 1.0)?)))
        }
        _ => Err(Error::Config(format!("unknown field `{}`", sel))),
    }
}

/// Dual numbers for exact first derivatives of the BCH polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Dual {
    v: f64,
    d: f64,
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { v: self.v * o.v, d: self.v * o.d + self.d * o.v }
    }
}
impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { v: -self.v, d: -self.d }
    }
}
impl Coeff for Dual {
    fn constant(c: f64) -> Self {
        Dual { v: c, d: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Column-major matrix `A` with `X_j = Σ_k A[k][j] ∂_k`; `cols[j]` is column j.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCoefficients {
    pub cols: Vec<Point>,
}

fn field_coeffs(spec: &GroupSpec, g: &[f64], side: Side) -> FieldCoefficients {
    let n = spec.dim();
    let gd: Vec<Dual> = g.iter().map(|&v| Dual::constant(v)).collect();
    let cols = (0..n)
        .map(|j| {
            let e: Vec<Dual> =
                (0..n).map(|k| Dual { v: 0.0, d: if k == j { 1.0 } else { 0.0 } }).collect();
            let z = match side {
                Side::Left => spec.product(&gd, &e),
                Side::Right => spec.product(&e, &gd),
            };
            z.iter().map(|c| c.d).collect()
        })
        .collect();
    FieldCoefficients { cols }
}

/// Coefficients of the left-invariant fields `X_j f(g) = d/dt f(g·exp(tX_j))`.
pub fn left_field_coeffs(spec: &GroupSpec, g: &[f64]) -> FieldCoefficients {
    field_coeffs(spec, g, Side::Left)
}

/// Coefficients of the right-invariant fields `Y_j f(g) = d/dt f(exp(tX_j)·g)`.
pub fn right_field_coeffs(spec: &GroupSpec, g: &[f64]) -> FieldCoefficients {
    field_coeffs(spec, g, Side::Right)
}

fn fd_step(g: &[f64]) -> f64 {
    let nrm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    1e-5f64.max(1e-5 * (1.0 + nrm))
}

fn five_point(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Coordinate gradient: oracle if present, else 5-point differences (with one
/// Richardson halving for Schwartz fields).
pub fn gradient(u: &dyn ScalarField, g: &[f64]) -> Result<Point> {
    if let Some(gr) = u.gradient(g) {
        return Ok(gr);
    }
    let mut h = fd_step(g);
    loop {
        let mut x: Point = g.iter().cloned().collect();
        let mut out = Point::new();
        let mut finite = true;
        for k in 0..g.len() {
            let f = |t: f64| {
                let old = x[k];
                let mut y = x.clone();
                y[k] = old + t;
                u.eval(&y)
            };
            let mut d = five_point(&f, h);
            if u.smoothness() == Smoothness::Schwartz {
                let d2 = five_point(&f, h / 2.0);
                d = (16.0 * d2 - d) / 15.0;
            }
            finite &= d.is_finite();
            out.push(d);
            x[k] = g[k];
        }
        if finite {
            return Ok(out);
        }
        h /= 2.0;
        if h < 1e-8 {
            return Err(Error::StepUnderflow);
        }
    }
}

/// `X_j u(g)` (left) or `Y_j u(g)` (right).
pub fn apply_field(spec: &GroupSpec, j: usize, side: Side, u: &dyn ScalarField, g: &[f64]) -> Result<f64> {
    let a = field_coeffs(spec, g, side);
    let gr = gradient(u, g)?;
    Ok(a.cols[j].iter().zip(&gr).map(|(c, d)| c * d).sum())
}

/// Second derivative of `t ↦ u(g·exp(tv))` at 0 by symmetric differences with Richardson.
pub fn flow_second(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64], v: &[f64]) -> f64 {
    let h = 1e-3 * (1.0 + g.iter().map(|x| x * x).sum::<f64>().sqrt());
    let u0 = u.eval(g);
    let at = |t: f64| {
        let w: Point = v.iter().map(|x| x * t).collect();
        u.eval(&spec.multiply(g, &w))
    };
    let d = |h: f64| (at(h) + at(-h) - 2.0 * u0) / (h * h);
    let (a, b) = (d(h), d(h / 2.0));
    (4.0 * b - a) / 3.0
}

/// First derivative of `t ↦ u(g·exp(tv))` at 0.
pub fn flow_first(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64], v: &[f64]) -> f64 {
    let h = 1e-3 * (1.0 + g.iter().map(|x| x * x).sum::<f64>().sqrt());
    let at = |t: f64| {
        let w: Point = v.iter().map(|x| x * t).collect();
        u.eval(&spec.multiply(g, &w))
    };
    let d = |h: f64| (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
    let (a, b) = (d(h), d(h / 2.0));
    (16.0 * b - a) / 15.0
}

/// `Σ_{d_i = 1} X_i² u(g)` along the flows `t ↦ g·exp(tX_i)`.
pub fn horizontal_laplacian(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64]) -> Result<f64> {
    if spec.m() == 0 {
        return Err(Error::Domain("group has no horizontal coordinates".into()));
    }
    let n = spec.dim();
    Ok(spec
        .horizontal()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            flow_second(spec, u, g, &e)
        })
        .sum())
}

/// `Σ_{d_i = 1} X_i(X_i u)(g)` by nested coefficient contraction.
pub fn horizontal_laplacian_nested(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64]) -> Result<f64> {
    let n = spec.dim();
    let mut total = 0.0;
    for i in spec.horizontal() {
        let xi = |p: &[f64]| apply_field(spec, i, Side::Left, u, p);
        let a = field_coeffs(spec, g, Side::Left);
        let h = 1e-3 * (1.0 + g.iter().map(|x| x * x).sum::<f64>().sqrt());
        let mut grad = vec![0.0; n];
        for (k, gk) in grad.iter_mut().enumerate() {
            let f = |t: f64| -> f64 {
                let mut y: Point = g.iter().cloned().collect();
                y[k] += t;
                xi(&y).unwrap_or(f64::NAN)
            };
            *gk = five_point(&f, h);
        }
        let v: f64 = a.cols[i].iter().zip(&grad).map(|(c, d)| c * d).sum();
        if !v.is_finite() {
            return Err(Error::StepUnderflow);
        }
        total += v;
    }
    Ok(total)
}

/// Left Taylor polynomial of order 2 of `u` at `g`, evaluated at `h`.
pub fn taylor_p2(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64], h: &[f64]) -> f64 {
    let w: Point = h.iter().zip(spec.weights()).map(|(x, d)| if *d <= 2.0 + 1e-12 { *x } else { 0.0 }).collect();
    let v: Point = h
        .iter()
        .zip(spec.weights())
        .map(|(x, d)| if (*d - 1.0).abs() < 1e-12 { *x } else { 0.0 })
        .collect();
    let first = if w.iter().all(|x| *x == 0.0) { 0.0 } else { flow_first(spec, u, g, &w) };
    let second = if v.iter().all(|x| *x == 0.0) { 0.0 } else { flow_second(spec, u, g, &v) };
    u.eval(g) + first + 0.5 * second
}

/// `u(g·h) + u(g·h⁻¹) − 2u(g)`.
pub fn second_difference(spec: &GroupSpec, u: &dyn ScalarField, g: &[f64], h: &[f64]) -> f64 {
    u.eval(&spec.multiply(g, h)) + u.eval(&spec.multiply(g, &spec.inverse(h))) - 2.0 * u.eval(g)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis() -> GroupSpec {
        GroupSpec::heisenberg(1).unwrap()
    }

    #[test]
    fn coefficients_at_identity_and_signs() {
        let h = heis();
        let a = left_field_coeffs(&h, &[0.0, 0.0, 0.0]);
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(a.cols[j][k], if j == k { 1.0 } else { 0.0 });
            }
        }
        let l = left_field_coeffs(&h, &[0.0, 1.0, 0.0]);
        assert_eq!(l.cols[0].as_slice(), &[1.0, 0.0, -0.5]);
        let r = right_field_coeffs(&h, &[0.0, 1.0, 0.0]);
        assert_eq!(r.cols[0][2], 0.5);
        let e = GroupSpec::euclidean(2, None).unwrap();
        assert_eq!(left_field_coeffs(&e, &[3.0, -1.0]).cols[1].as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn horizontal_laplacian_of_r2() {
        let h = heis();
        let u = FnField { f: |g: &[f64]| g[0] * g[0] + g[1] * g[1], support: None, sup: 0.0, name: "r2".into() };
        for g in [[0.0, 0.0, 0.0], [1.0, -2.0, 3.0], [0.5, 0.25, -4.0]] {
            assert!((horizontal_laplacian(&h, &u, &g).unwrap() - 4.0).abs() < 1e-6);
            assert!((horizontal_laplacian_nested(&h, &u, &g).unwrap() - 4.0).abs() < 1e-4);
        }
    }

    #[test]
    fn parabolic_laplacian_uses_x_only() {
        let p = GroupSpec::parabolic_r2();
        let u = FnField {
            f: |g: &[f64]| (-g[0] * g[0] - g[1] * g[1]).exp(),
            support: None,
            sup: 1.0,
            name: "g".into(),
        };
        assert!((horizontal_laplacian(&p, &u, &[0.0, 0.0]).unwrap() + 2.0).abs() < 1e-7);
    }

    #[test]
    fn field_of_constant_vanishes() {
        let h = heis();
        let c = Constant(3.0);
        assert_eq!(apply_field(&h, 0, Side::Left, &c, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let g = Gaussian::new(2);
        let e = GroupSpec::euclidean(2, None).unwrap();
        assert_eq!(apply_field(&e, 0, Side::Left, &g, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let h = heis();
        let b = CompactBump::new(&h, 1.3).unwrap();
        let g = [0.2, -0.4, 0.3];
        let exact = b.gradient(&g).unwrap();
        let fd = FnField { f: |p: &[f64]| b.eval(p), support: None, sup: 1.0, name: "b".into() };
        let approx = gradient(&fd, &g).unwrap();
        for k in 0..3 {
            assert!((exact[k] - approx[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn parse_fields() {
        let h = heis();
        assert!(parse_field("compact_bump:R=2", &h).is_ok());
        assert!(parse_field("gaussian", &h).is_ok());
        assert!(parse_field("poly_bump:p=1;0;0,R=1", &h).is_ok());
        assert!(parse_field("product:phi=bump1d,psi=bump1d", &GroupSpec::parabolic_r2()).is_ok());
        assert!(parse_field("wat", &h).is_err());
    }
}

//! Sobolev embedding constants, the approximation pipeline (mollifiers and
//! truncations), the multiplication-operator bound and the non-Carnot
//! counterexample. The discrete extremal search lives in [`grid`], the
//! compactness defect in [`rellich`].

pub mod grid;
pub mod rellich;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{CompactBump, Field, ScalarField, Smoothness};
use crate::fracop::{gauss_legendre, sqrt_estimate, Engine, FracParams};
use crate::gauge::Gauge;
use crate::group::{CoordBox, GroupSpec, Point};
use crate::quadrature::Estimate;
use crate::rng;

pub use grid::{
    grid_seminorm, optimize_quotient, read_hfg1, sobolev_quotient, write_hfg1, GridField, GridOperator,
    GridOptions, GridSeminorm, OptimizeOptions, OptimizeResult, QuotientTrace,
};
pub use rellich::{greedy_packing, max_gauge_tiling, rellich_defect, validate_disjoint, Ball, RellichDefect};

fn check_qs(q: f64, s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) || !(2.0 * s < q) || !q.is_finite() {
        return Err(Error::Domain(format!("need 0 < s < 1 and 2s < Q, got Q = {}, s = {}", q, s)));
    }
    Ok(())
}

/// `2* = 2Q/(Q − 2s)`.
pub fn critical_exponent(q: f64, s: f64) -> Result<f64> {
    check_qs(q, s)?;
    Ok(2.0 * q / (q - 2.0 * s))
}

/// Minimizer and minimum of `f(r) = A r^a + B r^{-b}` on `r > 0`.
pub fn min_power_sum(a: f64, b: f64, big_a: f64, big_b: f64) -> Result<(f64, f64)> {
    if [a, b, big_a, big_b].iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("min_power_sum needs positive finite arguments".into()));
    }
    let r_star = (b * big_b / (a * big_a)).powf(1.0 / (a + b));
    let ratio = b / a;
    let f_min = (ratio.powf(a / (a + b)) + ratio.powf(-b / (a + b)))
        * big_a.powf(b / (a + b))
        * big_b.powf(a / (a + b));
    Ok((r_star, f_min))
}

/// `((Q−2s)/(2s))^{2s/Q} + ((Q−2s)/(2s))^{−(Q−2s)/4}`.
pub fn hedberg_bracket(q: f64, s: f64) -> Result<f64> {
    check_qs(q, s)?;
    let x = (q - 2.0 * s) / (2.0 * s);
    Ok(x.powf(2.0 * s / q) + x.powf(-(q - 2.0 * s) / 4.0))
}

/// `C_{Q,s} = σ_Q^{−(Q+2s)/(4(Q−2s))}` times [`hedberg_bracket`].
pub fn hedberg_constant(q: f64, s: f64, sigma_q: f64) -> Result<f64> {
    check_qs(q, s)?;
    if !(sigma_q > 0.0) {
        return Err(Error::Domain("σ_Q must be positive".into()));
    }
    Ok(sigma_q.powf(-0.25 * (q + 2.0 * s) / (q - 2.0 * s)) * hedberg_bracket(q, s)?)
}

/// The embedding factor `C_{Q,s}^{Q/(Q−2s)}` in `‖u‖_{2*} ≤ C^{Q/(Q−2s)} [u]_{s,2}`.
pub fn sobolev_factor(q: f64, s: f64, sigma_q: f64) -> Result<f64> {
    Ok(hedberg_constant(q, s, sigma_q)?.powf(q / (q - 2.0 * s)))
}

#[derive(Clone, Debug, Serialize)]
pub struct HedbergReport {
    pub q: f64,
    pub s: f64,
    pub sigma_q: f64,
    pub critical_exponent: f64,
    pub bracket: f64,
    pub constant: f64,
    pub embedding_factor: f64,
    /// Bracket of the minimization lemma at `a = s`, `b = (Q−2s)/2`.
    pub lemma_bracket: f64,
}

pub fn hedberg_report(q: f64, s: f64, sigma_q: f64) -> Result<HedbergReport> {
    let (_, lemma) = min_power_sum(s, (q - 2.0 * s) / 2.0, 1.0, 1.0)?;
    Ok(HedbergReport {
        q,
        s,
        sigma_q,
        critical_exponent: critical_exponent(q, s)?,
        bracket: hedberg_bracket(q, s)?,
        constant: hedberg_constant(q, s, sigma_q)?,
        embedding_factor: sobolev_factor(q, s, sigma_q)?,
        lemma_bracket: lemma,
    })
}

/// Tensor Gauss–Legendre rule over a box; `f` returns the integrand.
pub(crate) fn tensor_gl<F: Fn(&[f64]) -> f64>(bx: &CoordBox, nodes: usize, f: F) -> f64 {
    let (xs, ws) = gauss_legendre(nodes);
    let n = bx.dim();
    let total = nodes.pow(n as u32);
    let mut x = vec![0.0; n];
    let mut acc = Vec::with_capacity(total);
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        for j in 0..n {
            let t = r % nodes;
            r /= nodes;
            let half = 0.5 * (bx.hi[j] - bx.lo[j]);
            x[j] = bx.lo[j] + half * (xs[t] + 1.0);
            w *= ws[t] * half;
        }
        acc.push(w * f(&x));
    }
    rng::pairwise_sum(&acc)
}

// ---------------------------------------------------------------------------
// truncation

/// Smooth monotone step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, slope at most 2.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `φ_R(g) = η(|g|)` with `η(t) = step(t/R − 1)`: zero on `B_R`, one off `B_{2R}`.
/// The complement `1 − φ_R` is compactly supported in `B_{2R}`.
#[derive(Clone, Debug)]
pub struct Truncation {
    gauge: Gauge,
    r: f64,
    complement: bool,
}

impl Truncation {
    pub fn complement_of(&self) -> Truncation {
        Truncation { complement: !self.complement, ..self.clone() }
    }
    pub fn radius(&self) -> f64 {
        self.r
    }
}

impl ScalarField for Truncation {
    fn eval(&self, g: &[f64]) -> f64 {
        let v = smooth_step(self.gauge.eval(g) / self.r - 1.0);
        if self.complement {
            1.0 - v
        } else {
            v
        }
    }
    fn support(&self) -> Option<CoordBox> {
        self.complement.then(|| self.gauge.ball_box(2.0 * self.r))
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CompactSmooth
    }
    fn sup_norm(&self) -> f64 {
        1.0
    }
    fn describe(&self) -> String {
        if self.complement {
            format!("1-phi_R:R={}", self.r)
        } else {
            format!("phi_R:R={}", self.r)
        }
    }
}

pub fn truncation_field(gauge: &Gauge, r: f64) -> Result<Truncation> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("truncation radius must be positive, got {}", r)));
    }
    Ok(Truncation { gauge: gauge.clone(), r, complement: false })
}

/// Largest `|φ(g) − φ(h)|·R/(2|h⁻¹g|)` over `n_pairs` seeded pairs near the ramp.
pub fn lipschitz_probe(spec: &GroupSpec, phi: &Truncation, n_pairs: usize, seed: u64) -> f64 {
    let n = spec.dim();
    let bx = phi.gauge.ball_box(2.5 * phi.r);
    let mut r = rng::stream(seed, rng::region(seed, 0x71B), 0);
    let mut u = vec![0.0; 2 * n + 1];
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        rng::fill_unit(&mut r, &mut u);
        let mut g = vec![0.0; n];
        bx.map_unit(&u[..n], &mut g);
        // second point at a random scale from g
        let mut d = vec![0.0; n];
        CoordBox::centered(&phi.gauge.unit_half_widths().to_vec()).map_unit(&u[n..2 * n], &mut d);
        let lam = phi.r * 2f64.powf(-8.0 * u[2 * n]);
        let h = spec.multiply(&g, &spec.dilate(lam, &d));
        let dist = phi.gauge.distance(spec, &g, &h);
        if dist > 0.0 {
            worst = worst.max((phi.eval(&g) - phi.eval(&h)).abs() * phi.r / (2.0 * dist));
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// mollification

/// The bump `exp(-1/(1-q))` of radius 1 divided by its Gauss–Legendre mass.
pub fn standard_mollifier(spec: &GroupSpec) -> Result<Field> {
    let bump = CompactBump::new(spec, 1.0)?;
    let bx = bump.support().expect("bump has a support box");
    let mass = tensor_gl(&bx, mass_nodes(spec.dim()), |x| bump.eval(x));
    Ok(std::sync::Arc::new(crate::fields::Dilate::new(spec, 1.0, 1.0 / mass, std::sync::Arc::new(bump))))
}

fn mass_nodes(dim: usize) -> usize {
    match dim {
        0..=3 => 24,
        4..=5 => 10,
        _ => 6,
    }
}

/// `u_ε(x) = Σ_k w_k u(δ_ε(z_k)⁻¹·x)`, a discrete form of `∫ρ(z)u((δ_ε z⁻¹)·x)dz`
/// on tensor Gauss–Legendre nodes `z_k` of `supp ρ`. The weights are
/// `ρ(z_k)·w_k` normalized to sum to one.
pub struct Mollified {
    spec: GroupSpec,
    inner: Field,
    shifts: Vec<Point>,
    weights: Vec<f64>,
    support: Option<CoordBox>,
    eps: f64,
}

impl Mollified {
    pub fn mass_before_normalization(&self) -> f64 {
        self.weights.iter().sum()
    }
    pub fn nodes(&self) -> usize {
        self.shifts.len()
    }
}

/// Mollifies `u` at scale `eps`. `∫ρ` is checked by quadrature to within 1%.
pub fn mollify(spec: &GroupSpec, rho: &dyn ScalarField, eps: f64, u: Field, nodes_per_axis: usize) -> Result<Mollified> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("mollifier scale must be positive, got {}", eps)));
    }
    let bx = rho
        .support()
        .ok_or_else(|| Error::Domain("mollifier must be compactly supported".into()))?;
    let mass = tensor_gl(&bx, mass_nodes(spec.dim()), |x| rho.eval(x));
    if (mass - 1.0).abs() > 0.01 {
        return Err(Error::Normalization(mass));
    }
    let (xs, ws) = gauss_legendre(nodes_per_axis.max(1));
    let n = spec.dim();
    let total = nodes_per_axis.max(1).pow(n as u32);
    let mut shifts = Vec::new();
    let mut weights = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        let mut z: Point = smallvec::smallvec![0.0; n];
        for j in 0..n {
            let t = r % xs.len();
            r /= xs.len();
            let half = 0.5 * (bx.hi[j] - bx.lo[j]);
            z[j] = bx.lo[j] + half * (xs[t] + 1.0);
            w *= ws[t] * half;
        }
        let rz = rho.eval(&z);
        if rz != 0.0 {
            shifts.push(spec.inverse(&spec.dilate(eps, &z)));
            weights.push(rz * w);
        }
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::Normalization(sum));
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    let support = u.support().map(|b| spec.product_box(&spec.dilate_box(eps, &bx), &b));
    Ok(Mollified { spec: spec.clone(), inner: u, shifts, weights, support, eps })
}

impl ScalarField for Mollified {
    fn eval(&self, x: &[f64]) -> f64 {
        if let Some(c) = self.inner.constant_value() {
            return c;
        }
        let mut acc = 0.0;
        for (a, w) in self.shifts.iter().zip(&self.weights) {
            acc += w * self.inner.eval(&self.spec.multiply(a, x));
        }
        acc
    }
    fn support(&self) -> Option<CoordBox> {
        self.support.clone()
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
        format!("mollify[eps={}]({})", self.eps, self.inner.describe())
    }
}

// ---------------------------------------------------------------------------
// multiplication operator

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicationReport {
    /// `½[φu]²`.
    pub lhs: Estimate,
    /// `‖φ‖²_∞[u]²`.
    pub main_term: Estimate,
    /// `∫_{|y|≥2R} |u(y)|² Γ_s(φ,φ)(y) dy`.
    pub a: Estimate,
    /// `∫_{|y|<2R} |u(y)|² Γ_s(φ,φ)(y) dy`.
    pub b: Estimate,
    pub rhs: Estimate,
    pub slack: f64,
    pub passed: bool,
}

/// Estimates both sides of `½[φu]² ≤ ‖φ‖²_∞[u]² + A + B` for `supp φ ⊂ B_R`.
pub fn multiplication_bound_check(
    eng: &Engine,
    p: &FracParams,
    phi: Field,
    u: Field,
    r: f64,
) -> Result<MultiplicationReport> {
    let s = p.s;
    let pbox = eng.support_of(phi.as_ref())?;
    let ubox = eng.support_of(u.as_ref())?;
    let ball = eng.gauge.ball_box(r);
    if pbox.lo.iter().zip(&ball.lo).any(|(a, b)| a < b) || pbox.hi.iter().zip(&ball.hi).any(|(a, b)| a > b) {
        return Err(Error::Domain(format!("support of {} is not inside B_{}", phi.describe(), r)));
    }
    let zero = || Estimate { seed: eng.cfg.seed, ..Estimate::exact(0.0) };
    if phi.constant_value() == Some(0.0) {
        return Ok(MultiplicationReport {
            lhs: zero(),
            main_term: zero(),
            a: zero(),
            b: zero(),
            rhs: zero(),
            slack: 0.0,
            passed: true,
        });
    }
    let prod = crate::fields::Product::new(phi.clone(), u.clone());
    let lhs = eng.seminorm_sq(p, &prod)?.scale(0.5);
    let main = eng.seminorm_sq(p, u.as_ref())?.scale(phi.sup_norm().powi(2));
    let gauge = eng.gauge;
    let spec = eng.spec;
    let split = |y: &[f64]| usize::from(gauge.eval(y) < 2.0 * r);
    let (ph, uu) = (phi.as_ref(), u.as_ref());
    let inner = eng.inner(s, 0x3A, Some(&ubox), 2, eng.cfg.k_in, true, |y, h, _, o| {
        let w = uu.eval(y);
        if w == 0.0 {
            return;
        }
        let d = ph.eval(y) - ph.eval(&spec.multiply(y, h));
        o[split(y)] = w * w * d * d;
    });
    let vol_x = pbox.volume();
    let outer = eng.outer(0x3B, &ubox, Some(&pbox), 4, |y, x, o| {
        let w = uu.eval(y);
        if w == 0.0 {
            return;
        }
        let w2 = w * w;
        let (py, px) = (ph.eval(y), ph.eval(x));
        let i = split(y);
        o[i] = w2 * py * py / vol_x;
        if px != 0.0 {
            let (d, k) = eng.kernel(s, &spec.inverse(y), x);
            if d >= 1.0 {
                o[2 + i] = w2 * (px * px - 2.0 * px * py) * k;
            }
        }
    });
    let part = |i: usize| {
        let mut e = inner.value[i].plus(&eng.exterior(s, &outer[i])).plus(&outer[2 + i]);
        e.tail_bound += uu.tail_mass() * uu.sup_norm() * 4.0 * (eng.sigma.value / s + 1.0);
        e.seed = eng.cfg.seed;
        e
    };
    let (a, b) = (part(0), part(1));
    let rhs = main.plus(&a).plus(&b);
    let combined = lhs.std_err.hypot(rhs.std_err);
    let slack = rhs.value - lhs.value;
    Ok(MultiplicationReport { passed: slack >= -2.0 * combined - lhs.tail_bound - rhs.tail_bound, lhs, main_term: main, a, b, rhs, slack })
}

// ---------------------------------------------------------------------------
// counterexample

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub eta: f64,
    pub shift: f64,
    pub ratio: f64,
    /// `√2·η^{-1/2}`, the value once the two supports are disjoint.
    pub disjoint_value: f64,
    pub disjoint: bool,
}

fn composite_gl<F: Fn(f64) -> f64>(a: f64, b: f64, panels: usize, f: F) -> f64 {
    let (xs, ws) = gauss_legendre(8);
    let h = (b - a) / panels as f64;
    let mut acc = Vec::with_capacity(panels);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        acc.push(xs.iter().zip(&ws).map(|(x, w)| 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0))).sum::<f64>());
    }
    rng::pairwise_sum(&acc)
}

/// `‖ψ(·+a) − ψ‖²_2` for `ψ` supported in `[-w, w]`.
fn shift_diff_sq(psi: &dyn Fn(f64) -> f64, w: f64, a: f64) -> f64 {
    let f = |x: f64| {
        let d = psi(x + a) - psi(x);
        d * d
    };
    let a = a.abs();
    if a >= 2.0 * w {
        // two disjoint copies
        composite_gl(-w, w, 256, &f) + composite_gl(-w - a, w - a, 256, &f)
    } else {
        composite_gl(-w - a, w + a, 512, &f)
    }
}

/// `r(k, η) = ‖ψ(·+kη) − ψ‖_2 / (η^{1/2}‖ψ‖_2)` over the grid `k_list × eta_list`.
pub fn counterexample_sweep(psi: &dyn Fn(f64) -> f64, half_width: f64, k_list: &[f64], eta_list: &[f64]) -> Result<Vec<SweepRow>> {
    if k_list.iter().any(|k| !(*k > 0.0)) || eta_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("k and η must be positive".into()));
    }
    let norm_sq = composite_gl(-half_width, half_width, 256, |x| psi(x) * psi(x));
    let mut rows = Vec::new();
    for &k in k_list {
        for &eta in eta_list {
            let shift = k * eta;
            let ratio = (shift_diff_sq(psi, half_width, shift) / norm_sq).sqrt() / eta.sqrt();
            rows.push(SweepRow {
                k,
                eta,
                shift,
                ratio,
                disjoint_value: 2f64.sqrt() / eta.sqrt(),
                disjoint: shift >= 2.0 * half_width,
            });
        }
    }
    Ok(rows)
}

/// `[u]_{s,2}` with its error, as used by the pipeline checks.
pub fn seminorm_of(eng: &Engine, p: &FracParams, u: &dyn ScalarField) -> Result<Estimate> {
    Ok(sqrt_estimate(&eng.seminorm_sq(p, u)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeKind;

    #[test]
    fn exponents_and_brackets() {
        assert!((critical_exponent(4.0, 0.5).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        assert!((critical_exponent(3.0, 0.5).unwrap() - 3.0).abs() < 1e-15);
        assert!(critical_exponent(1.0, 0.5).is_err());
        let b = hedberg_bracket(4.0, 0.5).unwrap();
        assert!((b - (3f64.powf(0.25) + 3f64.powf(-0.75))).abs() < 1e-14);
        assert_eq!(min_power_sum(1.0, 1.0, 1.0, 1.0).unwrap(), (1.0, 2.0));
    }

    #[test]
    fn step_slope_is_two() {
        let m = (1..10000)
            .map(|i| {
                let t = i as f64 / 10000.0;
                (smooth_step(t + 1e-6) - smooth_step(t - 1e-6)) / 2e-6
            })
            .fold(0.0, f64::max);
        assert!((m - 2.0).abs() < 1e-6, "{}", m);
    }

    #[test]
    fn truncation_support_conditions() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let phi = truncation_field(&k, 2.0).unwrap();
        assert_eq!(phi.eval(&[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(phi.eval(&[6.0, 0.0, 0.0]), 1.0);
        assert!(lipschitz_probe(&h, &phi, 10_000, 3) <= 1.0 + 1e-6);
        assert!(truncation_field(&k, 0.0).is_err());
    }

    #[test]
    fn mollifier_keeps_constants() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let rho = standard_mollifier(&h).unwrap();
        let c: Field = std::sync::Arc::new(crate::fields::Constant(2.5));
        let m = mollify(&h, rho.as_ref(), 0.25, c, 4).unwrap();
        assert_eq!(m.eval(&[0.3, 0.1, -2.0]), 2.5);
        let bad = crate::fields::Dilate::new(&h, 1.0, 1.05, rho.clone());
        let c: Field = std::sync::Arc::new(crate::fields::Constant(1.0));
        assert!(matches!(mollify(&h, &bad, 0.25, c, 4), Err(Error::Normalization(_))));
    }

    #[test]
    fn disjoint_counterexample_value() {
        let rows = counterexample_sweep(&crate::fields::bump1d, 1.0, &[256.0], &[0.01]).unwrap();
        assert!((rows[0].ratio - 200f64.sqrt()).abs() < 1e-9);
    }
}

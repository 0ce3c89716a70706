//! Haar-measure Monte Carlo on coordinate boxes and gauge annuli, and the
//! geometric constants `σ_Q`, `τ_m`.
//!
//! Haar measure is Lebesgue measure in exponential coordinates. Samples are
//! drawn in independently keyed blocks and merged in a fixed tree, so an
//! estimate depends only on `(seed, region, n)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::group::{CoordBox, GroupSpec};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub k_in: usize,
    pub k_out: usize,
    pub box_margin: f64,
    pub target_rel_err: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { n_samples: 200_000, seed: 7, k_in: 20, k_out: 20, box_margin: 0.0, target_rel_err: 0.01 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::Config("n_samples must be at least 100".into()));
        }
        if self.k_in < 1 || self.k_out < 1 {
            return Err(Error::Config("k_in and k_out must be at least 1".into()));
        }
        if !(self.target_rel_err > 0.0) || !(self.box_margin >= 0.0) {
            return Err(Error::Config("target_rel_err must be positive, box_margin nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        QuadratureConfig { seed, ..self.clone() }
    }

    pub fn with_samples(&self, n: usize) -> Self {
        QuadratureConfig { n_samples: n.max(100), ..self.clone() }
    }
}

/// A value with its 1σ statistical error and a deterministic truncation bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub tail_bound: f64,
    pub n_evals: u64,
    pub seed: u64,
    /// Set when `std_err/|value|` exceeded the configured target.
    pub flagged: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_err: 0.0, tail_bound: 0.0, n_evals: 0, seed: 0, flagged: false }
    }

    /// Half-width of the reported interval `value ± (2σ + tail)`.
    pub fn half_width(&self) -> f64 {
        2.0 * self.std_err + self.tail_bound
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.value - x).abs() <= self.half_width()
    }

    pub fn rel_err(&self) -> f64 {
        if self.value == 0.0 {
            if self.std_err == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.std_err / self.value.abs()
        }
    }

    /// Sum, treating errors as independent.
    pub fn plus(&self, o: &Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            std_err: self.std_err.hypot(o.std_err),
            tail_bound: self.tail_bound + o.tail_bound,
            n_evals: self.n_evals + o.n_evals,
            seed: self.seed,
            flagged: self.flagged || o.flagged,
        }
    }

    pub fn minus(&self, o: &Estimate) -> Estimate {
        self.plus(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Estimate {
        Estimate {
            value: c * self.value,
            std_err: c.abs() * self.std_err,
            tail_bound: c.abs() * self.tail_bound,
            ..self.clone()
        }
    }

    /// `|a − b| ≤ k·sqrt(σ_a² + σ_b²) + tails`.
    pub fn agrees(&self, o: &Estimate, k: f64) -> bool {
        (self.value - o.value).abs() <= k * self.std_err.hypot(o.std_err) + self.tail_bound + o.tail_bound
    }

    fn flag(mut self, target: f64) -> Self {
        self.flagged = self.rel_err() > target;
        self
    }
}

/// Running mean and centered second moment, mergeable.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Stats {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(a: Stats, b: Stats) -> Stats {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Stats {
            n,
            mean: a.mean + d * b.n as f64 / n as f64,
            m2: a.m2 + b.m2 + d * d * (a.n as f64 * b.n as f64) / n as f64,
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn merge_tree(v: &[Stats]) -> Stats {
    match v.len() {
        0 => Stats::default(),
        1 => v[0],
        n => Stats::merge(merge_tree(&v[..n / 2]), merge_tree(&v[n / 2..])),
    }
}

/// Monte Carlo of `k` integrands at once over `bx`. `f(x, out)` writes the
/// integrand values at `x`; each output is scaled by the box volume.
pub fn mc_box<F>(seed: u64, region: u64, bx: &CoordBox, n: usize, k: usize, f: F) -> Vec<Estimate>
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    let dim = bx.dim();
    let nblocks = n.div_ceil(rng::BLOCK);
    let blocks = rng::map_blocks(nblocks, |b| {
        let mut r = rng::stream(seed, region, b as u64);
        let count = (n - b * rng::BLOCK).min(rng::BLOCK);
        let mut u = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut out = vec![0.0; k];
        let mut st = vec![Stats::default(); k];
        for _ in 0..count {
            rng::fill_unit(&mut r, &mut u);
            bx.map_unit(&u, &mut x);
            out.iter_mut().for_each(|o| *o = 0.0);
            f(&x, &mut out);
            for (s, o) in st.iter_mut().zip(&out) {
                s.push(*o);
            }
        }
        st
    });
    let vol = bx.volume();
    (0..k)
        .map(|i| {
            let col: Vec<Stats> = blocks.iter().map(|b| b[i]).collect();
            let s = merge_tree(&col);
            Estimate {
                value: vol * s.mean,
                std_err: vol * s.sem(),
                tail_bound: 0.0,
                n_evals: n as u64,
                seed,
                flagged: false,
            }
        })
        .collect()
}

/// Integration region.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Box(CoordBox),
    /// `{ r ≤ |g| < R }`.
    Annulus { r: f64, big_r: f64 },
}

/// `∫_region f dg`. Annuli are split into dyadic strata `[r2^i, r2^{i+1})`, each
/// sampled from the bounding box of its outer ball.
pub fn integrate_haar<F>(spec: &GroupSpec, gauge: &Gauge, f: F, region: &Region, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    cfg.validate()?;
    let _ = spec;
    let reg = rng::region(cfg.seed, 0x1A7E);
    match region {
        Region::Box(b) => {
            Ok(mc_box(cfg.seed, reg, b, cfg.n_samples, 1, |x, o| o[0] = f(x)).remove(0).flag(cfg.target_rel_err))
        }
        Region::Annulus { r, big_r } => {
            if !(*r >= 0.0 && r < big_r) {
                return Err(Error::Domain("annulus needs 0 ≤ r < R".into()));
            }
            let strata = annulus_strata(*r, *big_r);
            let mut acc = Estimate::exact(0.0);
            for (i, (a, b)) in strata.iter().enumerate() {
                let bx = gauge.ball_box(*b);
                let e = mc_box(cfg.seed, rng::region(reg, i as u64), &bx, cfg.n_samples, 1, |x, o| {
                    let n = gauge.eval(x);
                    if n >= *a && n < *b {
                        o[0] = f(x);
                    }
                })
                .remove(0);
                acc = acc.plus(&e);
            }
            acc.seed = cfg.seed;
            Ok(acc.flag(cfg.target_rel_err))
        }
    }
}

/// Dyadic strata of `[r, R)`; when `r = 0` the innermost stratum is a ball.
pub fn annulus_strata(r: f64, big_r: f64) -> Vec<(f64, f64)> {
    if r == 0.0 {
        return vec![(0.0, big_r)];
    }
    let mut v = Vec::new();
    let mut a = r;
    while a < big_r {
        let b = (2.0 * a).min(big_r);
        v.push((a, b));
        a = b;
    }
    v
}

/// `|B_1|`, estimated over the unit-ball bounding box.
pub fn unit_ball_volume(gauge: &Gauge, cfg: &QuadratureConfig) -> Estimate {
    let bx = gauge.ball_box(1.0);
    mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, 1, |x, o| {
        if gauge.eval(x) < 1.0 {
            o[0] = 1.0
        }
    })
    .remove(0)
}

/// `σ_Q = Q·|B_1|`.
pub fn sigma_q(spec: &GroupSpec, gauge: &Gauge, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    Ok(unit_ball_volume(gauge, cfg).scale(spec.q()).flag(cfg.target_rel_err))
}

/// `2s·∫_{|h|≥1} |h|^{-Q-2s} dh`, summed over the strata `[2^k, 2^{k+1})`, `k < K_out`.
///
/// Uses the same unit-box stream as [`sigma_q`]: the stratum of scale `2^{k+1}`
/// is the image of that sample under `δ_{2^{k+1}}`.
pub fn sigma_q_exterior(spec: &GroupSpec, gauge: &Gauge, s: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_s(s)?;
    let q = spec.q();
    let bx = gauge.ball_box(1.0);
    let ko = cfg.k_out;
    let mut est = mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, 1, |x, o| {
        let r = gauge.eval(x);
        if (0.5..1.0).contains(&r) {
            // ∫ over δ_λ A_0 of |h|^{-Q-2s} = λ^{-2s}∫_{A_0}|w|^{-Q-2s}
            let base = r.powf(-q - 2.0 * s);
            let mut acc = 0.0;
            for k in 0..ko {
                acc += 2f64.powf(-2.0 * s * (k + 1) as f64);
            }
            o[0] = 2.0 * s * base * acc;
        }
    })
    .remove(0);
    let tail = est.value * 2f64.powf(-2.0 * s * ko as f64) / (1.0 - 2f64.powf(-2.0 * s * ko as f64));
    est.tail_bound = tail.abs();
    Ok(est.flag(cfg.target_rel_err))
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if !(0.01..=0.99).contains(&s) {
        return Err(Error::Domain(format!("s = {} outside [0.01, 0.99]", s)));
    }
    Ok(())
}

fn require_symmetry(spec: &GroupSpec, gauge: &Gauge) -> Result<()> {
    if spec.m() == 0 {
        return Err(Error::Domain("group has no horizontal coordinates".into()));
    }
    if !(gauge.horizontal_radial() || gauge.horizontal_even()) {
        return Err(Error::SymmetryViolation(gauge.label()));
    }
    Ok(())
}

/// `τ_m = (Q+2)·∫_{B_1} Σ_{d_i=1} x_i² dh`.
pub fn tau_m(spec: &GroupSpec, gauge: &Gauge, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    require_symmetry(spec, gauge)?;
    let hz: Vec<usize> = spec.horizontal().collect();
    let bx = gauge.ball_box(1.0);
    Ok(mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, 1, |x, o| {
        if gauge.eval(x) < 1.0 {
            o[0] = hz.iter().map(|&i| x[i] * x[i]).sum();
        }
    })
    .remove(0)
    .scale(spec.q() + 2.0)
    .flag(cfg.target_rel_err))
}

/// Per-coordinate `τ̂_i² = (Q+2)·∫_{B_1} x_i² dh` for each horizontal `i`.
pub fn tau_hat(spec: &GroupSpec, gauge: &Gauge, cfg: &QuadratureConfig) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    require_symmetry(spec, gauge)?;
    let hz: Vec<usize> = spec.horizontal().collect();
    let bx = gauge.ball_box(1.0);
    let k = hz.len();
    Ok(mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, k, |x, o| {
        if gauge.eval(x) < 1.0 {
            for (a, &i) in hz.iter().enumerate() {
                o[a] = x[i] * x[i];
            }
        }
    })
    .into_iter()
    .map(|e| e.scale(spec.q() + 2.0))
    .collect())
}

/// `∫_{B_1} x_i x_j |h|^{-Q-2s} dh` over the annuli `A_k = {2^{-k-1} ≤ |h| < 2^{-k}}`.
///
/// Each unit-box sample `w ∈ A_0` stands for `δ_{2^{-k}} w ∈ A_k` on every level
/// `k < K_in`; the integrand has degree `2 − Q − 2s`, so level `k` carries the
/// factor `2^{-k(2-2s)}` and the levels below `K_in` sum geometrically. The stream
/// is the one used by [`sigma_q`] and [`tau_m`].
pub fn moment_integral(spec: &GroupSpec, gauge: &Gauge, i: usize, j: usize, s: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_s(s)?;
    let w = spec.weights();
    if i >= spec.dim() || j >= spec.dim() || w[i] != 1.0 || w[j] != 1.0 {
        return Err(Error::Domain("moment_integral needs two horizontal indices".into()));
    }
    let q = spec.q();
    let ratio = 2f64.powf(-(2.0 - 2.0 * s));
    let levels: f64 = (0..cfg.k_in).map(|k| ratio.powi(k as i32)).sum::<f64>()
        + ratio.powi(cfg.k_in as i32) / (1.0 - ratio);
    let bx = gauge.ball_box(1.0);
    Ok(mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, 1, |x, o| {
        let r = gauge.eval(x);
        if (0.5..1.0).contains(&r) {
            o[0] = x[i] * x[j] * r.powf(-q - 2.0 * s) * levels;
        }
    })
    .remove(0)
    .flag(cfg.target_rel_err))
}

/// `∫_{r<|g|<R} |g|^{-γ} dg` over dyadic strata.
pub fn annulus_power_integral(spec: &GroupSpec, gauge: &Gauge, gamma: f64, r: f64, big_r: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Domain("annulus needs 0 < r < R".into()));
    }
    integrate_haar(spec, gauge, |x| gauge.eval(x).powf(-gamma), &Region::Annulus { r, big_r }, cfg)
}

/// Polar-formula prediction `σ_Q/(Q−γ)(R^{Q−γ} − r^{Q−γ})`, or `σ_Q ln(R/r)` at `γ = Q`.
pub fn polar_closed_form(q: f64, sigma: &Estimate, gamma: f64, r: f64, big_r: f64) -> Estimate {
    let f = if (q - gamma).abs() < 1e-12 {
        (big_r / r).ln()
    } else {
        (big_r.powf(q - gamma) - r.powf(q - gamma)) / (q - gamma)
    };
    sigma.scale(f)
}

/// Annulus integral and the polar closed form evaluated on one shared sample
/// stream: each unit-box sample `u` feeds every stratum through `δ_b u` and
/// also the volume `|B_1|`.
#[derive(Clone, Debug, Serialize)]
pub struct PolarCheck {
    pub gamma: f64,
    pub r: f64,
    pub big_r: f64,
    pub integral: Estimate,
    pub closed_form: Estimate,
    pub difference: Estimate,
    pub passed: bool,
}

pub fn polar_check(spec: &GroupSpec, gauge: &Gauge, gamma: f64, r: f64, big_r: f64, cfg: &QuadratureConfig) -> Result<PolarCheck> {
    cfg.validate()?;
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Domain("annulus needs 0 < r < R".into()));
    }
    let q = spec.q();
    let strata = annulus_strata(r, big_r);
    let bx = gauge.ball_box(1.0);
    let factor = if (q - gamma).abs() < 1e-12 {
        (big_r / r).ln()
    } else {
        (big_r.powf(q - gamma) - r.powf(q - gamma)) / (q - gamma)
    };
    let est = mc_box(cfg.seed, rng::region(cfg.seed, 0xB1), &bx, cfg.n_samples, 3, |u, o| {
        let ru = gauge.eval(u);
        if ru >= 1.0 {
            return;
        }
        let mut acc = 0.0;
        for (a, b) in &strata {
            // g = δ_b u, dg = b^Q du
            let rg = b * ru;
            if rg >= *a {
                acc += b.powf(q) * rg.powf(-gamma);
            }
        }
        o[0] = acc;
        o[1] = q * factor;
        o[2] = acc - q * factor;
    });
    let (integral, closed_form, difference) = (est[0].clone(), est[1].clone(), est[2].clone());
    let passed = (integral.value - closed_form.value).abs()
        <= 2.0 * integral.std_err.hypot(closed_form.std_err) + integral.tail_bound + closed_form.tail_bound;
    Ok(PolarCheck { gamma, r, big_r, integral, closed_form, difference, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeKind;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig { n_samples: 50_000, ..Default::default() }
    }

    #[test]
    fn disk_area_and_sigma() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        let g = Gauge::new(GaugeKind::EuclideanPower, &e).unwrap();
        let v = unit_ball_volume(&g, &cfg());
        assert!(v.contains(std::f64::consts::PI) || (v.value - std::f64::consts::PI).abs() < 3.0 * v.std_err);
        let s = sigma_q(&e, &g, &cfg()).unwrap();
        assert!((s.value / std::f64::consts::TAU - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_integrand_is_exactly_zero() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        let g = Gauge::new(GaugeKind::EuclideanPower, &e).unwrap();
        let est = integrate_haar(&e, &g, |_| 0.0, &Region::Annulus { r: 0.5, big_r: 3.0 }, &cfg()).unwrap();
        assert_eq!((est.value, est.std_err), (0.0, 0.0));
    }

    #[test]
    fn reproducible_bitwise() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let g = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let a = sigma_q(&h, &g, &cfg()).unwrap();
        let b = sigma_q(&h, &g, &cfg()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn line_constants() {
        let e = GroupSpec::euclidean(1, None).unwrap();
        let g = Gauge::new(GaugeKind::EuclideanPower, &e).unwrap();
        assert!((sigma_q(&e, &g, &cfg()).unwrap().value - 2.0).abs() < 1e-12);
        assert!((tau_m(&e, &g, &cfg()).unwrap().value - 2.0).abs() < 0.03);
    }

    #[test]
    fn stats_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut a = Stats::default();
        xs.iter().for_each(|x| a.push(*x));
        let mut b = Stats::default();
        let mut c = Stats::default();
        xs[..40].iter().for_each(|x| b.push(*x));
        xs[40..].iter().for_each(|x| c.push(*x));
        let m = Stats::merge(b, c);
        assert!((m.mean - a.mean).abs() < 1e-14 && (m.m2 - a.m2).abs() < 1e-12);
    }
}

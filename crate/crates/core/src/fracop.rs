//! The fractional operator `ℒ_s`, the Gagliardo seminorm, the Dirichlet form
//! and the carré du champ.
//!
//! All singular integrals are split at `|h| = 1`.
//!
//! * Inside, a sample `w` of the unit annulus `A_0 = {½ ≤ |w| < 1}` is reused on
//!   every level `h = δ_{2^{-k}} w`, `k < K_in`, with weight `2^{2sk}|w|^{-Q-2s}`.
//!   Levels below `2^{-K_in}` are closed by the geometric law of the leading
//!   quadratic term, ratio `2^{-(2-2s)}` per level.
//! * Outside, the constant part integrates exactly against `σ_Q/(2s)` and the
//!   remaining bounded integrand is sampled over the support box of the field.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{self, ScalarField};
use crate::gauge::Gauge;
use crate::group::{CoordBox, GroupSpec, Point};
use crate::quadrature::{self, check_s, mc_box, Estimate, QuadratureConfig};
use crate::rng;

/// Fractional order with its derived exponents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FracParams {
    pub s: f64,
    pub q: f64,
}

impl FracParams {
    pub fn new(spec: &GroupSpec, s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(FracParams { s, q: spec.q() })
    }

    pub fn kernel_exponent(&self) -> f64 {
        self.q + 2.0 * self.s
    }

    /// `2Q/(Q−2s)`; meaningful only when `2s < Q`.
    pub fn critical_exponent(&self) -> f64 {
        2.0 * self.q / (self.q - 2.0 * self.s)
    }
}

const R_INNER: u64 = 0x11;
const R_OUTER: u64 = 0x22;

/// Shared geometry for one (group, gauge, budget): the unit-annulus box, the
/// dyadic dilation factors and a `σ_Q` estimate.
pub struct Engine<'a> {
    pub spec: &'a GroupSpec,
    pub gauge: &'a Gauge,
    pub cfg: QuadratureConfig,
    pub sigma: Estimate,
    unit: CoordBox,
    levels: Vec<Point>,
}

/// Per-sample contributions of an inner term: value and extrapolated tail.
pub(crate) struct Inner {
    pub(crate) value: Vec<Estimate>,
}

impl<'a> Engine<'a> {
    pub fn new(spec: &'a GroupSpec, gauge: &'a Gauge, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let sigma = quadrature::sigma_q(spec, gauge, cfg)?;
        Ok(Self::with_sigma(spec, gauge, cfg, sigma))
    }

    pub fn with_sigma(spec: &'a GroupSpec, gauge: &'a Gauge, cfg: &QuadratureConfig, sigma: Estimate) -> Self {
        let levels = (0..cfg.k_in.max(1)).map(|k| spec.dilation_factors(2f64.powi(-(k as i32)))).collect();
        Engine { spec, gauge, cfg: cfg.clone(), sigma, unit: gauge.ball_box(1.0), levels }
    }

    pub fn params(&self, s: f64) -> Result<FracParams> {
        FracParams::new(self.spec, s)
    }

    /// Multiscale inner integral. `f(y, h, k, out)` adds the integrand at `h` (level `k`);
    /// `y` is an extra sample from `ybox` when given. Returns `nout` estimates.
    pub(crate) fn inner<F>(&self, s: f64, region: u64, ybox: Option<&CoordBox>, nout: usize, levels: usize, extrapolate: bool, f: F) -> Inner
    where
        F: Fn(&[f64], &[f64], usize, &mut [f64]) + Sync + Send,
    {
        let n = self.spec.dim();
        let q = self.spec.q();
        let ny = ybox.map_or(0, |b| b.dim());
        let joint = match ybox {
            Some(b) => CoordBox {
                lo: self.unit.lo.iter().chain(&b.lo).cloned().collect(),
                hi: self.unit.hi.iter().chain(&b.hi).cloned().collect(),
            },
            None => self.unit.clone(),
        };
        let ratio = 2f64.powf(-(2.0 - 2.0 * s));
        let levels = levels.min(self.levels.len());
        let tail_factor = if extrapolate { ratio / (1.0 - ratio) } else { 0.0 };
        let est = mc_box(self.cfg.seed, rng::region(self.cfg.seed, region), &joint, self.cfg.n_samples, 2 * nout, |x, out| {
            let w = &x[..n];
            let r = self.gauge.eval(w);
            if !(0.5..1.0).contains(&r) {
                return;
            }
            let y = &x[n..n + ny];
            let base = r.powf(-q - 2.0 * s);
            let mut h: Point = smallvec::smallvec![0.0; n];
            let mut tmp = vec![0.0; nout];
            for k in 0..levels {
                GroupSpec::dilate_with(&self.levels[k], w, &mut h);
                tmp.iter_mut().for_each(|t| *t = 0.0);
                f(y, &h, k, &mut tmp);
                let c = base * 2f64.powf(2.0 * s * k as f64);
                for i in 0..nout {
                    out[i] += c * tmp[i];
                }
                if k + 1 == levels {
                    for i in 0..nout {
                        out[nout + i] = c * tmp[i] * tail_factor;
                        out[i] += out[nout + i];
                    }
                }
            }
        });
        let value = (0..nout)
            .map(|i| {
                let mut e = est[i].clone();
                // third-order remainder of the extrapolated levels
                e.tail_bound = est[nout + i].value.abs() * 2f64.powi(3 - levels as i32).min(1.0);
                e
            })
            .collect();
        Inner { value }
    }

    /// Outer sampling of `x` over `bx` (and `y` over `ybox` when given).
    pub(crate) fn outer<F>(&self, region: u64, bx: &CoordBox, ybox: Option<&CoordBox>, nout: usize, f: F) -> Vec<Estimate>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Sync + Send,
    {
        let n = bx.dim();
        let joint = match ybox {
            Some(b) => CoordBox {
                lo: bx.lo.iter().chain(&b.lo).cloned().collect(),
                hi: bx.hi.iter().chain(&b.hi).cloned().collect(),
            },
            None => bx.clone(),
        };
        mc_box(self.cfg.seed, rng::region(self.cfg.seed, region), &joint, self.cfg.n_samples, nout, |z, out| {
            f(&z[..n], &z[n..], out)
        })
    }

    pub(crate) fn support_of(&self, u: &dyn ScalarField) -> Result<CoordBox> {
        u.support().ok_or_else(|| Error::Domain(format!("field `{}` needs a support box", u.describe())))
    }

    #[inline]
    pub(crate) fn kernel(&self, s: f64, g_inv: &[f64], x: &[f64]) -> (f64, f64) {
        let d = self.gauge.eval(&self.spec.multiply(g_inv, x));
        (d, d.powf(-self.spec.q() - 2.0 * s))
    }

    /// `σ_Q/(2s)` times `c`, with the error of `σ_Q` propagated.
    pub(crate) fn exterior(&self, s: f64, c: &Estimate) -> Estimate {
        let k = self.sigma.value / (2.0 * s);
        Estimate {
            value: k * c.value,
            std_err: (k * c.std_err).hypot(c.value * self.sigma.std_err / (2.0 * s)),
            tail_bound: k * c.tail_bound,
            n_evals: c.n_evals,
            seed: self.cfg.seed,
            flagged: false,
        }
    }

    /// `∫_{|h|≥1} u(g·h)|h|^{-Q-2s} dh`, sampled as `∫ u(x) K(g⁻¹x) 1[|g⁻¹x| ≥ 1] dx`.
    fn far_integral(&self, s: f64, u: &dyn ScalarField, g: &[f64], bx: &CoordBox) -> Estimate {
        let gi = self.spec.inverse(g);
        let mut e = self.outer(R_OUTER, bx, None, 1, |x, _, o| {
            let ux = u.eval(x);
            if ux != 0.0 {
                let (d, k) = self.kernel(s, &gi, x);
                if d >= 1.0 {
                    o[0] = ux * k;
                }
            }
        })
        .remove(0);
        e.tail_bound += u.tail_mass();
        e
    }

    /// `ℒ_s u(g)` by the second-difference form.
    pub fn eval_ls(&self, p: &FracParams, u: &dyn ScalarField, g: &[f64]) -> Result<Estimate> {
        self.eval_ls_in(p, u, g, None)
    }

    /// As [`Engine::eval_ls`], sampling the far field over `outer_box` when given.
    pub fn eval_ls_in(&self, p: &FracParams, u: &dyn ScalarField, g: &[f64], outer_box: Option<&CoordBox>) -> Result<Estimate> {
        let s = p.s;
        if u.constant_value().is_some() {
            return Ok(Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) });
        }
        let bx = match outer_box {
            Some(b) => b.clone(),
            None => self.support_of(u)?,
        };
        let ug = u.eval(g);
        let spec = self.spec;
        let inner = self.inner(s, R_INNER, None, 1, self.cfg.k_in, true, |_, h, _, o| {
            let a = u.eval(&spec.multiply(g, h));
            let b = u.eval(&spec.multiply(g, &spec.inverse(h)));
            o[0] = 2.0 * ug - a - b;
        });
        let near = inner.value[0].clone();
        let far = self.far_integral(s, u, g, &bx);
        let ext = self.exterior(s, &Estimate::exact(2.0 * ug));
        let mut out = near.plus(&ext).plus(&far.scale(-2.0));
        out.seed = self.cfg.seed;
        Ok(out)
    }

    /// Principal-value form `2∫_{|h|≥ε}(u(g) − u(g·h))|h|^{-Q-2s} dh` for each ε.
    ///
    /// `tail_bound` carries the magnitude of the omitted ball `|h| < ε`, measured
    /// with the second-difference integrand on the same samples.
    pub fn eval_ls_pv(&self, p: &FracParams, u: &dyn ScalarField, g: &[f64], eps: &[f64]) -> Result<Vec<Estimate>> {
        let s = p.s;
        if eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Domain("eps_list must decrease within (0, 1]".into()));
        }
        if u.constant_value().is_some() {
            return Ok(eps.iter().map(|_| Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) }).collect());
        }
        let bx = self.support_of(u)?;
        let ug = u.eval(g);
        let spec = self.spec;
        let gauge = self.gauge;
        let ne = eps.len();
        let levels = self.cfg.k_in;
        // outputs: PV part for each ε, then the ε-ball part for each ε
        let inner = self.inner(s, R_INNER, None, 2 * ne, levels, true, |_, h, _, o| {
            let a = u.eval(&spec.multiply(g, h));
            let b = u.eval(&spec.multiply(g, &spec.inverse(h)));
            let r = gauge.eval(h);
            for (i, e) in eps.iter().enumerate() {
                if r >= *e {
                    o[i] = 2.0 * (ug - a);
                } else {
                    o[ne + i] = 2.0 * ug - a - b;
                }
            }
        });
        let far = self.far_integral(s, u, g, &bx);
        let ext = self.exterior(s, &Estimate::exact(2.0 * ug));
        Ok((0..ne)
            .map(|i| {
                let mut pv = inner.value[i].clone();
                // PV levels above ε are not extrapolated
                pv.tail_bound = 0.0;
                let mut e = pv.plus(&ext).plus(&far.scale(-2.0));
                let ball = &inner.value[ne + i];
                e.tail_bound += ball.value.abs() + 2.0 * ball.std_err + ball.tail_bound;
                e.seed = self.cfg.seed;
                e
            })
            .collect())
    }

    /// PV inner sums do not extrapolate; the ε-ball part carries the tail.
    /// `Γ_s(u, v)(g) = ∫(u(g)−u(gh))(v(g)−v(gh))|h|^{-Q-2s} dh`.
    pub fn carre_du_champ(&self, p: &FracParams, u: &dyn ScalarField, v: &dyn ScalarField, g: &[f64]) -> Result<Estimate> {
        let bx = match (u.support(), v.support()) {
            (Some(a), Some(b)) => a.union(&b),
            (Some(a), None) if v.constant_value().is_some() => a,
            (None, Some(b)) if u.constant_value().is_some() => b,
            _ => {
                if u.constant_value().is_some() || v.constant_value().is_some() {
                    return Ok(Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) });
                }
                return Err(Error::Domain("carre du champ needs supported fields".into()));
            }
        };
        self.carre_du_champ_in(p, u, v, g, &bx)
    }

    pub fn carre_du_champ_in(&self, p: &FracParams, u: &dyn ScalarField, v: &dyn ScalarField, g: &[f64], bx: &CoordBox) -> Result<Estimate> {
        let s = p.s;
        if u.constant_value().is_some() || v.constant_value().is_some() {
            return Ok(Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) });
        }
        let (a, b) = (u.eval(g), v.eval(g));
        let spec = self.spec;
        let inner = self.inner(s, R_INNER, None, 1, self.cfg.k_in, true, |_, h, _, o| {
            let p1 = spec.multiply(g, h);
            let p2 = spec.multiply(g, &spec.inverse(h));
            o[0] = 0.5 * ((a - u.eval(&p1)) * (b - v.eval(&p1)) + (a - u.eval(&p2)) * (b - v.eval(&p2)));
        });
        let gi = spec.inverse(g);
        let far = self.outer(R_OUTER, bx, None, 1, |x, _, o| {
            let (ux, vx) = (u.eval(x), v.eval(x));
            if ux != 0.0 || vx != 0.0 {
                let (d, k) = self.kernel(s, &gi, x);
                if d >= 1.0 {
                    o[0] = (ux * vx - a * vx - b * ux) * k;
                }
            }
        })
        .remove(0);
        let ext = self.exterior(s, &Estimate::exact(a * b));
        let mut out = inner.value[0].plus(&ext).plus(&far);
        out.tail_bound += (u.tail_mass() * (v.sup_norm() + b.abs())) + (v.tail_mass() * (u.sup_norm() + a.abs()));
        out.seed = self.cfg.seed;
        Ok(out)
    }

    /// Box of `g` for double integrals over `|h| < 1`: `supp·B_1`.
    fn inner_g_box(&self, b: &CoordBox) -> CoordBox {
        self.spec.product_box(b, &self.unit)
    }

    /// `𝒟_s(u, v) = ∫∫ (u(g)−u(gh))(v(g)−v(gh)) |h|^{-Q-2s} dh dg`.
    pub fn dirichlet_form(&self, p: &FracParams, u: &dyn ScalarField, v: &dyn ScalarField) -> Result<Estimate> {
        let s = p.s;
        if u.constant_value().is_some() || v.constant_value().is_some() {
            return Ok(Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) });
        }
        let bx = self.support_of(u)?.union(&self.support_of(v)?);
        let gbox = self.inner_g_box(&bx);
        let spec = self.spec;
        let inner = self.inner(s, R_INNER ^ 0xD, Some(&gbox), 1, self.cfg.k_in, true, |g, h, _, o| {
            let gh = spec.multiply(g, h);
            o[0] = (u.eval(g) - u.eval(&gh)) * (v.eval(g) - v.eval(&gh));
        });
        let outer = self.outer(R_OUTER ^ 0xD, &bx, Some(&bx), 2, |g, x, o| {
            let (ug, vg) = (u.eval(g), v.eval(g));
            o[0] = ug * vg * bx.volume().recip();
            if ug == 0.0 && vg == 0.0 {
                return;
            }
            let (ux, vx) = (u.eval(x), v.eval(x));
            if ux == 0.0 && vx == 0.0 {
                return;
            }
            let (d, k) = self.kernel(s, &spec.inverse(g), x);
            if d >= 1.0 {
                o[1] = (ug * vx + vg * ux) * k;
            }
        });
        let ext = self.exterior(s, &outer[0].scale(2.0));
        let mut out = inner.value[0].plus(&ext).minus(&outer[1]);
        out.tail_bound += self.double_tail(s, u, v);
        out.seed = self.cfg.seed;
        Ok(out)
    }

    fn double_tail(&self, s: f64, u: &dyn ScalarField, v: &dyn ScalarField) -> f64 {
        let t = u.tail_mass() * v.sup_norm() + v.tail_mass() * u.sup_norm();
        t * (self.sigma.value / s + 2.0)
    }

    /// `∫ v·ℒ_s u dg`, on the same sample design as [`Engine::dirichlet_form`].
    pub fn pairing(&self, p: &FracParams, v: &dyn ScalarField, u: &dyn ScalarField) -> Result<Estimate> {
        let s = p.s;
        if u.constant_value().is_some() {
            return Ok(Estimate { seed: self.cfg.seed, ..Estimate::exact(0.0) });
        }
        let bx = self.support_of(u)?.union(&self.support_of(v)?);
        let gbox = self.inner_g_box(&bx);
        let spec = self.spec;
        let inner = self.inner(s, R_INNER ^ 0xD, Some(&gbox), 1, self.cfg.k_in, true, |g, h, _, o| {
            let vg = v.eval(g);
            if vg != 0.0 {
                let a = u.eval(&spec.multiply(g, h));
                let b = u.eval(&spec.multiply(g, &spec.inverse(h)));
                o[0] = vg * (2.0 * u.eval(g) - a - b);
            }
        });
        let outer = self.outer(R_OUTER ^ 0xD, &bx, Some(&bx), 2, |g, x, o| {
            let vg = v.eval(g);
            if vg == 0.0 {
                return;
            }
            o[0] = vg * u.eval(g) * bx.volume().recip();
            let ux = u.eval(x);
            if ux == 0.0 {
                return;
            }
            let (d, k) = self.kernel(s, &spec.inverse(g), x);
            if d >= 1.0 {
                o[1] = 2.0 * vg * ux * k;
            }
        });
        let ext = self.exterior(s, &outer[0].scale(2.0));
        let mut out = inner.value[0].plus(&ext).minus(&outer[1]);
        out.tail_bound += self.double_tail(s, u, v);
        out.seed = self.cfg.seed;
        Ok(out)
    }

    /// `[u]²_{s,2}`.
    pub fn seminorm_sq(&self, p: &FracParams, u: &dyn ScalarField) -> Result<Estimate> {
        self.dirichlet_form(p, u, u)
    }

    /// `[u]_{s,2}`, with the error of the square propagated.
    pub fn seminorm(&self, p: &FracParams, u: &dyn ScalarField) -> Result<Estimate> {
        Ok(sqrt_estimate(&self.seminorm_sq(p, u)?))
    }

    /// `ℒ_s(uv) − uℒ_sv − vℒ_su + 2Γ_s(u,v)` at `g`; each term uses the same
    /// streams and far-field box, so the residual cancels sample by sample.
    pub fn product_rule_check(&self, p: &FracParams, u: &dyn ScalarField, v: &dyn ScalarField, g: &[f64]) -> Result<ProductRule> {
        let bx = self.support_of(u)?.union(&self.support_of(v)?);
        let uv = ProductRef(u, v);
        let l_uv = self.eval_ls_in(p, &uv, g, Some(&bx))?;
        let l_u = self.eval_ls_in(p, u, g, Some(&bx))?;
        let l_v = self.eval_ls_in(p, v, g, Some(&bx))?;
        let gam = self.carre_du_champ_in(p, u, v, g, &bx)?;
        let (a, b) = (u.eval(g), v.eval(g));
        let value = l_uv.value - a * l_v.value - b * l_u.value + 2.0 * gam.value;
        let combined = (l_uv.std_err.powi(2)
            + (a * l_v.std_err).powi(2)
            + (b * l_u.std_err).powi(2)
            + (2.0 * gam.std_err).powi(2))
        .sqrt();
        let tails = l_uv.tail_bound + a.abs() * l_v.tail_bound + b.abs() * l_u.tail_bound + 2.0 * gam.tail_bound;
        Ok(ProductRule {
            residual: Estimate {
                value,
                std_err: combined,
                tail_bound: tails,
                n_evals: l_uv.n_evals * 4,
                seed: self.cfg.seed,
                flagged: false,
            },
            l_uv,
            l_u,
            l_v,
            gamma: gam,
        })
    }

    /// `‖R_h u − u‖_2 / (|h|^s [u]_{s,2})` with `R_h u(g) = u(g·h)`.
    pub fn translation_difference(&self, p: &FracParams, u: &dyn ScalarField, h: &[f64], semi: &Estimate) -> Result<TransDiff> {
        let hn = self.gauge.eval(h);
        let b = self.support_of(u)?;
        let hi = self.spec.inverse(h);
        let bx = b.union(&self.spec.product_box(&b, &CoordBox { lo: hi.clone(), hi: hi.clone() }));
        let spec = self.spec;
        let l2 = if hn == 0.0 {
            Estimate::exact(0.0)
        } else {
            quadrature::mc_box(self.cfg.seed, rng::region(self.cfg.seed, 0x7D), &bx, self.cfg.n_samples, 1, |g, o| {
                let d = u.eval(&spec.multiply(g, h)) - u.eval(g);
                o[0] = d * d;
            })
            .remove(0)
        };
        let num = sqrt_estimate(&l2);
        let ratio = if hn == 0.0 {
            Estimate::exact(0.0)
        } else {
            ratio_estimate(&num, &semi.scale(hn.powf(p.s)))
        };
        Ok(TransDiff { h_norm: hn, l2_diff: num, ratio })
    }

    /// `‖u‖²_2` over the support box.
    pub fn l2_sq(&self, u: &dyn ScalarField) -> Result<Estimate> {
        let b = self.support_of(u)?;
        let mut e = quadrature::mc_box(self.cfg.seed, rng::region(self.cfg.seed, 0x12), &b, self.cfg.n_samples, 1, |x, o| {
            let v = u.eval(x);
            o[0] = v * v;
        })
        .remove(0);
        e.tail_bound += u.tail_mass() * u.sup_norm();
        Ok(e)
    }

    /// `‖u‖^p_p` over the support box.
    pub fn lp_pow(&self, u: &dyn ScalarField, pexp: f64) -> Result<Estimate> {
        let b = self.support_of(u)?;
        let mut e = quadrature::mc_box(self.cfg.seed, rng::region(self.cfg.seed, 0x13), &b, self.cfg.n_samples, 1, |x, o| {
            o[0] = u.eval(x).abs().powf(pexp);
        })
        .remove(0);
        e.tail_bound += u.tail_mass() * u.sup_norm().powf(pexp - 1.0);
        Ok(e)
    }

    /// `‖X_i u‖²_2` for each horizontal `i`.
    pub fn horizontal_energy(&self, u: &dyn ScalarField) -> Result<Vec<Estimate>> {
        let b = self.support_of(u)?;
        let hz: Vec<usize> = self.spec.horizontal().collect();
        let spec = self.spec;
        Ok(quadrature::mc_box(self.cfg.seed, rng::region(self.cfg.seed, 0x14), &b, self.cfg.n_samples, hz.len(), |x, o| {
            for (a, &i) in hz.iter().enumerate() {
                let d = fields::apply_field(spec, i, fields::Side::Left, u, x).unwrap_or(f64::NAN);
                o[a] = d * d;
            }
        }))
    }

    /// Far field `−2∫u(x)|g⁻¹x|^{-Q-2s}dx` by tensor Gauss–Legendre over the support box.
    pub fn far_field_direct(&self, p: &FracParams, u: &dyn ScalarField, g: &[f64], nodes: usize) -> Result<f64> {
        let b = self.support_of(u)?;
        let gi = self.spec.inverse(g);
        let (xs, ws) = gauss_legendre(nodes);
        let n = b.dim();
        let total = nodes.pow(n as u32);
        let mut x = vec![0.0; n];
        let mut acc = Vec::with_capacity(total);
        for idx in 0..total {
            let mut r = idx;
            let mut w = 1.0;
            for j in 0..n {
                let t = r % nodes;
                r /= nodes;
                let half = 0.5 * (b.hi[j] - b.lo[j]);
                x[j] = b.lo[j] + half * (xs[t] + 1.0);
                w *= ws[t] * half;
            }
            let ux = u.eval(&x);
            acc.push(if ux == 0.0 { 0.0 } else { w * ux * self.kernel(p.s, &gi, &x).1 });
        }
        Ok(-2.0 * rng::pairwise_sum(&acc))
    }
}

/// Pointwise product of two borrowed fields.
struct ProductRef<'a>(&'a dyn ScalarField, &'a dyn ScalarField);

impl ScalarField for ProductRef<'_> {
    fn eval(&self, g: &[f64]) -> f64 {
        let a = self.0.eval(g);
        if a == 0.0 {
            0.0
        } else {
            a * self.1.eval(g)
        }
    }
    fn support(&self) -> Option<CoordBox> {
        match (self.0.support(), self.1.support()) {
            (Some(a), Some(b)) => Some(a.union(&b)),
            _ => None,
        }
    }
    fn smoothness(&self) -> fields::Smoothness {
        self.0.smoothness()
    }
    fn sup_norm(&self) -> f64 {
        self.0.sup_norm() * self.1.sup_norm()
    }
    fn tail_mass(&self) -> f64 {
        self.0.tail_mass() * self.1.sup_norm() + self.1.tail_mass() * self.0.sup_norm()
    }
    fn describe(&self) -> String {
        format!("({})·({})", self.0.describe(), self.1.describe())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton on the recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

pub fn sqrt_estimate(e: &Estimate) -> Estimate {
    let v = e.value.max(0.0).sqrt();
    let d = if v > 0.0 { 0.5 / v } else { 0.0 };
    Estimate {
        value: v,
        std_err: e.std_err * d,
        tail_bound: if v > 0.0 { e.tail_bound * d } else { e.tail_bound.sqrt() },
        ..e.clone()
    }
}

pub fn ratio_estimate(a: &Estimate, b: &Estimate) -> Estimate {
    let v = a.value / b.value;
    let rel = (a.std_err / a.value.abs().max(1e-300)).hypot(b.std_err / b.value.abs());
    let relt = a.tail_bound / a.value.abs().max(1e-300) + b.tail_bound / b.value.abs();
    Estimate {
        value: v,
        std_err: v.abs() * rel,
        tail_bound: v.abs() * relt,
        n_evals: a.n_evals + b.n_evals,
        seed: a.seed,
        flagged: a.flagged || b.flagged,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductRule {
    pub residual: Estimate,
    pub l_uv: Estimate,
    pub l_u: Estimate,
    pub l_v: Estimate,
    pub gamma: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransDiff {
    pub h_norm: f64,
    pub l2_diff: Estimate,
    pub ratio: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitProbeRow {
    pub kind: String,
    pub s: f64,
    pub point: Vec<f64>,
    pub normalized_value: f64,
    pub std_err: f64,
    pub target: f64,
    pub rel_err: f64,
}

/// Normalized operator and seminorm values against their `s → 0⁺` and `s → 1⁻`
/// limits. Rows with `s < ½` use the first, the rest the second.
pub fn limit_probe(
    spec: &GroupSpec,
    gauge: &Gauge,
    u: &dyn ScalarField,
    points: &[Point],
    s_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<LimitProbeRow>> {
    let eng = Engine::new(spec, gauge, cfg)?;
    let tau = quadrature::tau_m(spec, gauge, cfg)?;
    let tau_hat = quadrature::tau_hat(spec, gauge, cfg)?;
    let m = spec.m() as f64;
    let hz: Vec<usize> = spec.horizontal().collect();
    // weights τ̂_i²/(τ_m/m); all 1 for radial gauges
    let wts: Vec<f64> = if gauge.horizontal_radial() {
        vec![1.0; hz.len()]
    } else {
        tau_hat.iter().map(|t| t.value / (tau.value / m)).collect()
    };
    let l2 = eng.l2_sq(u)?;
    let energy = eng.horizontal_energy(u)?;
    let energy_target: f64 = energy.iter().zip(&wts).map(|(e, w)| e.value * w).sum();
    let mut rows = Vec::new();
    let row = |kind: &str, s: f64, g: &[f64], val: f64, se: f64, target: f64| LimitProbeRow {
        kind: kind.into(),
        s,
        point: g.to_vec(),
        normalized_value: val,
        std_err: se,
        target,
        rel_err: (val - target).abs() / target.abs().max(1e-12),
    };
    for &s in s_grid {
        let p = FracParams::new(spec, s)?;
        let near_zero = s < 0.5;
        let norm = if near_zero { s / eng.sigma.value } else { 2.0 * m * (1.0 - s) / tau.value };
        for g in points {
            let l = eng.eval_ls(&p, u, g)?;
            let target = if near_zero {
                u.eval(g)
            } else {
                let mut acc = 0.0;
                for (a, &i) in hz.iter().enumerate() {
                    let mut e = vec![0.0; spec.dim()];
                    e[i] = 1.0;
                    acc -= wts[a] * fields::flow_second(spec, u, g, &e);
                }
                acc
            };
            rows.push(row("operator", s, g, norm * l.value, norm * l.std_err, target));
        }
        let sn = eng.seminorm_sq(&p, u)?;
        let target = if near_zero { l2.value } else { energy_target };
        rows.push(row("seminorm", s, &[], norm * sn.value, norm * sn.std_err, target));
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub radius: f64,
    pub point: Vec<f64>,
    pub value: Estimate,
    pub scaled: f64,
    pub bound: f64,
    pub direct: f64,
}

/// `|g|^{Q+2s}|ℒ_s u(g)|` at `g = δ_ρ e_1/|e_1|` for each radius, with the bound
/// `2^{Q+2s+1}σ_Q R^Q ‖u‖_∞` and the direct far-field integral.
pub fn decay_profile(eng: &Engine, p: &FracParams, u: &dyn ScalarField, radii: &[f64]) -> Result<(f64, Vec<DecayRow>)> {
    let spec = eng.spec;
    let big_r = fields::support_radius(u, eng.gauge).ok_or_else(|| Error::Domain("decay needs a compact field".into()))?;
    if radii.iter().any(|r| *r < 2.0 * big_r - 1e-12) {
        return Err(Error::Domain(format!("radii must be at least 2R = {}", 2.0 * big_r)));
    }
    let q = spec.q();
    let bound = 2f64.powf(q + 2.0 * p.s + 1.0) * eng.sigma.value * big_r.powf(q) * u.sup_norm();
    let mut e1: Point = smallvec::smallvec![0.0; spec.dim()];
    e1[0] = 1.0;
    let e1n = eng.gauge.eval(&e1);
    let mut rows = Vec::new();
    for &rho in radii {
        let g = spec.dilate(rho / e1n, &e1);
        let v = eng.eval_ls(p, u, &g)?;
        let direct = eng.far_field_direct(p, u, &g, 24)?;
        rows.push(DecayRow {
            radius: rho,
            point: g.to_vec(),
            scaled: rho.powf(q + 2.0 * p.s) * v.value.abs(),
            value: v,
            bound,
            direct,
        });
    }
    Ok((big_r, rows))
}

/// `C(n, s) = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(−s)|)`.
pub fn c_ns(n: f64, s: f64) -> f64 {
    use statrs::function::gamma::gamma;
    4f64.powf(s) * gamma(n / 2.0 + s) / (std::f64::consts::PI.powf(n / 2.0) * gamma(-s).abs())
}

/// `(−Δ)^s e^{−x²}` on the line by numerical Fourier inversion:
/// `π^{-1/2} ∫_0^∞ ξ^{2s} e^{−ξ²/4} cos(ξx) dξ`, with `ξ = t²` and composite Simpson.
pub fn fourier_fraclap_gaussian_1d(s: f64, x: f64) -> f64 {
    let n = 40_000;
    let top = 7.0f64;
    let h = top / n as f64;
    let f = |t: f64| {
        let xi = t * t;
        2.0 * t * xi.powf(2.0 * s) * (-xi * xi / 4.0).exp() * (xi * x).cos()
    };
    let mut acc = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.push(w * f(i as f64 * h));
    }
    rng::pairwise_sum(&acc) * h / 3.0 / std::f64::consts::PI.sqrt()
}

/// `ℒ_s e^{−x²}` on the line from the Fourier oracle: `(2/C(1,s))(−Δ)^s`.
pub fn ls_gaussian_1d_oracle(s: f64, x: f64) -> f64 {
    2.0 / c_ns(1.0, s) * fourier_fraclap_gaussian_1d(s, x)
}

/// Convenience: `ℒ_s u(g)` with a fresh engine.
pub fn eval_ls(spec: &GroupSpec, gauge: &Gauge, p: &FracParams, u: &dyn ScalarField, g: &[f64], cfg: &QuadratureConfig) -> Result<Estimate> {
    Engine::new(spec, gauge, cfg)?.eval_ls(p, u, g)
}

/// Convenience: `[u]_{s,2}` with a fresh engine.
pub fn seminorm(spec: &GroupSpec, gauge: &Gauge, p: &FracParams, u: &dyn ScalarField, cfg: &QuadratureConfig) -> Result<Estimate> {
    Engine::new(spec, gauge, cfg)?.seminorm(p, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{CompactBump, Constant, Gaussian};
    use crate::gauge::GaugeKind;

    fn small() -> QuadratureConfig {
        QuadratureConfig { n_samples: 20_000, ..Default::default() }
    }

    #[test]
    fn constants_are_annihilated() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let g = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let eng = Engine::new(&h, &g, &small()).unwrap();
        let p = eng.params(0.5).unwrap();
        let e = eng.eval_ls(&p, &Constant(3.0), &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!((e.value, e.std_err), (0.0, 0.0));
    }

    #[test]
    fn s_clamp() {
        let h = GroupSpec::heisenberg(1).unwrap();
        assert!(FracParams::new(&h, 0.005).is_err());
        assert!(FracParams::new(&h, 0.995).is_err());
        let e = GroupSpec::euclidean(1, None).unwrap();
        // the operator exists at 2s = Q; the critical exponent does not
        assert!(FracParams::new(&e, 0.5).is_ok());
        assert!(crate::sobolev::critical_exponent(1.0, 0.5).is_err());
    }

    #[test]
    fn gaussian_plane_origin() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        let g = Gauge::new(GaugeKind::EuclideanPower, &e).unwrap();
        let eng = Engine::new(&e, &g, &small()).unwrap();
        let s = 0.5;
        let p = eng.params(s).unwrap();
        let v = eng.eval_ls(&p, &Gaussian::new(2), &[0.0, 0.0]).unwrap();
        let exact = 2.0 * std::f64::consts::PI * statrs::function::gamma::gamma(1.0 - s) / s;
        assert!((v.value - exact).abs() < 4.0 * v.std_err + v.tail_bound + 1e-3 * exact, "{:?} {}", v, exact);
    }

    #[test]
    fn bump_decays_far_away() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let g = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let eng = Engine::new(&h, &g, &small()).unwrap();
        let p = eng.params(0.5).unwrap();
        let b = CompactBump::new(&h, 1.0).unwrap();
        let near = eng.eval_ls(&p, &b, &[0.0, 0.0, 0.0]).unwrap();
        let far = eng.eval_ls(&p, &b, &[8.0, 0.0, 0.0]).unwrap();
        assert!(near.value > 0.0 && far.value < 0.0 && far.value.abs() < near.value);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }
}

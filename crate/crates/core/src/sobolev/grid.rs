//! Uniform coordinate grids, the discrete Gagliardo seminorm and the descent
//! on the Sobolev quotient `[u]² / ‖u‖²_{2*}`.
//!
//! The box is the bounding box of `B_L`; nodes include the faces, which carry
//! zeros. Pairs with one point outside the box reduce to a weight `d_a` per
//! interior node: the boundary-node sum, a Monte Carlo sum over gauge shells
//! up to `ρ_cut`, and the exact tail `σ_Q ρ_cut^{-2s}/(2s)`. The shells are
//! fixed fractions of `ρ_cut` and reuse one set of samples, so the discrete
//! quotient is covariant under `L ↦ λL`.

use std::io::{Read, Write};

use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, Smoothness};
use crate::fracop::FracParams;
use crate::gauge::Gauge;
use crate::group::{CoordBox, GroupSpec, Point};
use crate::rng;

use super::critical_exponent;

/// Values on a uniform grid over `[-h_j, h_j]`, `h` the bounding box of `B_L`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridField {
    pub l: f64,
    pub half: Vec<f64>,
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(gauge: &Gauge, l: f64, counts: &[usize]) -> Result<Self> {
        if !(l > 0.0) || counts.iter().any(|c| *c < 3) || counts.len() != gauge.unit_half_widths().len() {
            return Err(Error::Domain("grid needs L > 0 and at least 3 points on every axis".into()));
        }
        let half = gauge.ball_box(l).hi.to_vec();
        let len = counts.iter().product();
        Ok(GridField { l, half, counts: counts.to_vec(), values: vec![0.0; len] })
    }

    /// Samples `u` at the nodes; the boundary shell is set to zero.
    pub fn sample(gauge: &Gauge, l: f64, counts: &[usize], u: &dyn ScalarField) -> Result<Self> {
        let mut g = Self::zeros(gauge, l, counts)?;
        for i in 0..g.len() {
            if !g.is_boundary(i) {
                g.values[i] = u.eval(&g.node(i));
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn spacing(&self, j: usize) -> f64 {
        2.0 * self.half[j] / (self.counts[j] - 1) as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    pub fn bounding_box(&self) -> CoordBox {
        CoordBox::centered(&self.half)
    }

    fn multi_index(&self, mut idx: usize) -> SmallVec<[usize; 8]> {
        let mut m: SmallVec<[usize; 8]> = smallvec::smallvec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            m[j] = idx % self.counts[j];
            idx /= self.counts[j];
        }
        m
    }

    pub fn node(&self, idx: usize) -> Point {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(j, &i)| -self.half[j] + i as f64 * self.spacing(j))
            .collect()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx).iter().zip(&self.counts).any(|(i, n)| *i == 0 || *i + 1 == *n)
    }

    /// Finite values with a zero boundary shell.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.counts.iter().product::<usize>() {
            return Err(Error::Domain("value count does not match grid shape".into()));
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite grid value at {}", i)));
            }
            if *v != 0.0 && self.is_boundary(i) {
                return Err(Error::Domain(format!("nonzero boundary value at {}", i)));
            }
        }
        Ok(())
    }

    /// `Σ |u|^p · cellvol`.
    pub fn lp_pow(&self, p: f64) -> f64 {
        let v: Vec<f64> = self.values.iter().map(|x| x.abs().powf(p)).collect();
        rng::pairwise_sum(&v) * self.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_pow(p).powf(1.0 / p)
    }

    pub fn scaled(&self, c: f64) -> GridField {
        GridField { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// `amp·u∘δ_{1/λ}` on the grid of `B_{λL}` with the same counts.
    pub fn dilated(&self, spec: &GroupSpec, lambda: f64, amp: f64) -> GridField {
        GridField {
            l: self.l * lambda,
            half: self.half.iter().zip(spec.weights()).map(|(h, d)| h * lambda.powf(*d)).collect(),
            counts: self.counts.clone(),
            values: self.values.iter().map(|v| amp * v).collect(),
        }
    }

    /// Same grid with new values.
    pub fn with_values(&self, values: Vec<f64>) -> GridField {
        GridField { values, ..self.clone() }
    }
}

/// Multilinear interpolation, zero outside the box.
impl ScalarField for GridField {
    fn eval(&self, g: &[f64]) -> f64 {
        let n = self.dim();
        let mut base = 0usize;
        let mut frac: SmallVec<[f64; 8]> = SmallVec::new();
        let mut strides: SmallVec<[usize; 8]> = smallvec::smallvec![1; n];
        for j in (0..n.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.counts[j + 1];
        }
        for j in 0..n {
            let t = (g[j] + self.half[j]) / self.spacing(j);
            if !(t >= 0.0 && t <= (self.counts[j] - 1) as f64) {
                return 0.0;
            }
            let i = (t.floor() as usize).min(self.counts[j] - 2);
            frac.push(t - i as f64);
            base += i * strides[j];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for j in 0..n {
                if corner >> j & 1 == 1 {
                    w *= frac[j];
                    idx += strides[j];
                } else {
                    w *= 1.0 - frac[j];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
    fn support(&self) -> Option<CoordBox> {
        Some(self.bounding_box())
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Grid
    }
    fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
    fn describe(&self) -> String {
        format!("grid{:?}:L={}", self.counts, self.l)
    }
}

/// Construction options of [`GridOperator`].
#[derive(Clone, Debug, Serialize)]
pub struct GridOptions {
    /// Uniform draws in the unit-annulus box for the exterior shells.
    pub exterior_samples: usize,
    pub seed: u64,
    /// Largest interior-pair count kept as a dense matrix.
    pub dense_cap: usize,
    /// Largest interior-pair count accepted at all.
    pub pair_cap: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { exterior_samples: 16_384, seed: 7, dense_cap: 16_000_000, pair_cap: 2_000_000_000 }
    }
}

/// The discrete seminorm on one grid geometry.
pub struct GridOperator {
    spec: GroupSpec,
    gauge: Gauge,
    s: f64,
    q: f64,
    cell: f64,
    shape: GridField,
    interior: Vec<usize>,
    nodes: Vec<Point>,
    rowsum: Vec<f64>,
    /// Boundary-node, shell and tail weights; `[0]` even samples, `[1]` odd samples.
    shell: [Vec<f64>; 2],
    boundary: Vec<f64>,
    dense: Option<Vec<f64>>,
    pub rho_cut: f64,
    pub tail_coeff: f64,
}

/// A discrete seminorm split into its parts.
#[derive(Clone, Debug, Serialize)]
pub struct GridSeminorm {
    pub value: f64,
    pub pair_part: f64,
    pub boundary_part: f64,
    pub shell_part: f64,
    pub tail_part: f64,
    /// Half the gap between the even- and odd-sample shell estimates.
    pub shell_err: f64,
    pub rho_cut: f64,
}

impl GridOperator {
    /// `sigma_q` closes the kernel beyond `ρ_cut = 4·diam(box)`.
    pub fn new(spec: &GroupSpec, gauge: &Gauge, p: &FracParams, shape: &GridField, sigma_q: f64, opts: &GridOptions) -> Result<Self> {
        let s = p.s;
        let q = spec.q();
        critical_exponent(q, s)?;
        let bx = shape.bounding_box();
        let interior: Vec<usize> = (0..shape.len()).filter(|i| !shape.is_boundary(*i)).collect();
        let ni = interior.len();
        if (ni as f64).powi(2) > opts.pair_cap as f64 {
            return Err(Error::ResourceLimit(format!("{} interior pairs exceed the cap {}", ni * ni, opts.pair_cap)));
        }
        let nodes: Vec<Point> = interior.iter().map(|i| shape.node(*i)).collect();
        let bnodes: Vec<Point> = (0..shape.len()).filter(|i| shape.is_boundary(*i)).map(|i| shape.node(i)).collect();
        let cell = shape.cell_volume();
        let kexp = -(q + 2.0 * s);
        let kern = |a: &[f64], b: &[f64]| gauge.eval(&spec.multiply(&spec.inverse(b), a)).powf(kexp);

        let chunk = 64;
        let nchunks = ni.div_ceil(chunk);
        let dense = if ni * ni <= opts.dense_cap {
            let rows = rng::map_blocks(nchunks, |c| {
                let mut out = Vec::with_capacity(chunk * ni);
                for a in c * chunk..((c + 1) * chunk).min(ni) {
                    for b in 0..ni {
                        out.push(if a == b { 0.0 } else { kern(&nodes[a], &nodes[b]) });
                    }
                }
                out
            });
            Some(rows.concat())
        } else {
            None
        };
        let rowsum: Vec<f64> = match &dense {
            Some(m) => (0..ni).map(|a| rng::pairwise_sum(&m[a * ni..(a + 1) * ni])).collect(),
            None => rng::map_blocks(nchunks, |c| {
                (c * chunk..((c + 1) * chunk).min(ni))
                    .map(|a| {
                        let row: Vec<f64> =
                            (0..ni).map(|b| if a == b { 0.0 } else { kern(&nodes[a], &nodes[b]) }).collect();
                        rng::pairwise_sum(&row)
                    })
                    .collect::<Vec<f64>>()
            })
            .concat(),
        };
        let boundary: Vec<f64> = rng::map_blocks(nchunks, |c| {
            (c * chunk..((c + 1) * chunk).min(ni))
                .map(|a| {
                    let row: Vec<f64> = bnodes.iter().map(|b| kern(&nodes[a], b)).collect();
                    cell * rng::pairwise_sum(&row)
                })
                .collect::<Vec<f64>>()
        })
        .concat();

        // exterior shells [ρ2^{-j}, ρ2^{1-j})
        let diam = 2.0 * gauge.sup_over_box(&bx);
        let rho_cut = 4.0 * diam;
        let inside = |a: &[f64], r: f64| {
            let t = spec.translate_box(a, &gauge.ball_box(r));
            t.lo.iter().zip(&bx.lo).all(|(x, y)| x >= y) && t.hi.iter().zip(&bx.hi).all(|(x, y)| x <= y)
        };
        let mut nshell = 1;
        while !nodes.iter().all(|a| inside(a, rho_cut * 2f64.powi(-(nshell as i32)))) {
            nshell += 1;
            if nshell > 60 {
                return Err(Error::ResourceLimit("exterior shells do not resolve the grid".into()));
            }
        }
        let unit = gauge.ball_box(1.0);
        let mut r = rng::stream(opts.seed, rng::region(opts.seed, 0xE7), 0);
        let mut ys: Vec<(Point, f64)> = Vec::new();
        let mut buf = vec![0.0; spec.dim()];
        let draws = opts.exterior_samples.max(2);
        for _ in 0..draws {
            rng::fill_unit(&mut r, &mut buf);
            let mut y: Point = smallvec::smallvec![0.0; spec.dim()];
            unit.map_unit(&buf, &mut y);
            let ny = gauge.eval(&y);
            if (0.5..1.0).contains(&ny) {
                ys.push((y, ny.powf(kexp)));
            }
        }
        // each half-sample estimate uses draws/2 uniform points
        let base = unit.volume() / (draws as f64 / 2.0);
        let factors: Vec<(f64, Point)> = (0..nshell)
            .map(|j| {
                let rh = rho_cut * 2f64.powi(-(j as i32));
                (rh, spec.dilation_factors(rh))
            })
            .collect();
        let shell_pairs: Vec<[f64; 2]> = rng::map_blocks(nchunks, |c| {
            (c * chunk..((c + 1) * chunk).min(ni))
                .map(|a| {
                    let an = &nodes[a];
                    let mut acc = [0.0f64; 2];
                    let mut z: Point = smallvec::smallvec![0.0; an.len()];
                    for (rh, f) in &factors {
                        if inside(an, *rh) {
                            continue;
                        }
                        let w = base * rh.powf(-2.0 * s);
                        let mut part = [Vec::new(), Vec::new()];
                        for (m, (y, ky)) in ys.iter().enumerate() {
                            GroupSpec::dilate_with(f, y, &mut z);
                            if !bx.contains(&spec.multiply(an, &z)) {
                                part[m & 1].push(w * ky);
                            }
                        }
                        acc[0] += rng::pairwise_sum(&part[0]);
                        acc[1] += rng::pairwise_sum(&part[1]);
                    }
                    acc
                })
                .collect::<Vec<[f64; 2]>>()
        })
        .concat();
        let shell = [shell_pairs.iter().map(|p| p[0]).collect(), shell_pairs.iter().map(|p| p[1]).collect()];
        let tail_coeff = sigma_q * rho_cut.powf(-2.0 * s) / (2.0 * s);
        Ok(GridOperator {
            spec: spec.clone(),
            gauge: gauge.clone(),
            s,
            q,
            cell,
            shape: shape.with_values(vec![0.0; shape.len()]),
            interior,
            nodes,
            rowsum,
            shell,
            boundary,
            dense,
            rho_cut,
            tail_coeff,
        })
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn shape(&self) -> &GridField {
        &self.shape
    }

    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.q, self.s).expect("validated at construction")
    }

    fn check_shape(&self, u: &GridField) -> Result<()> {
        if u.counts != self.shape.counts || u.half.iter().zip(&self.shape.half).any(|(a, b)| (a - b).abs() > 1e-12 * b) {
            return Err(Error::Domain("grid field does not match the operator geometry".into()));
        }
        u.validate()
    }

    pub fn restrict(&self, u: &GridField) -> Vec<f64> {
        self.interior.iter().map(|i| u.values[*i]).collect()
    }

    pub fn extend(&self, v: &[f64]) -> GridField {
        let mut g = self.shape.clone();
        for (i, x) in self.interior.iter().zip(v) {
            g.values[*i] = *x;
        }
        g
    }

    fn diag(&self, a: usize) -> f64 {
        self.boundary[a] + 0.5 * (self.shell[0][a] + self.shell[1][a]) + self.tail_coeff
    }

    /// `Σ_b K_ab v_b` over interior nodes.
    fn kv(&self, v: &[f64]) -> Vec<f64> {
        let ni = self.interior.len();
        let chunk = 64;
        let kexp = -(self.q + 2.0 * self.s);
        rng::map_blocks(ni.div_ceil(chunk), |c| {
            (c * chunk..((c + 1) * chunk).min(ni))
                .map(|a| match &self.dense {
                    Some(m) => {
                        let row = &m[a * ni..(a + 1) * ni];
                        row.iter().zip(v).map(|(k, x)| k * x).sum::<f64>()
                    }
                    None => (0..ni)
                        .filter(|b| *b != a && v[*b] != 0.0)
                        .map(|b| {
                            let d = self.gauge.eval(&self.spec.multiply(&self.spec.inverse(&self.nodes[b]), &self.nodes[a]));
                            d.powf(kexp) * v[b]
                        })
                        .sum::<f64>(),
                })
                .collect::<Vec<f64>>()
        })
        .concat()
    }

    /// Discrete operator `L_a = 2·cell·Σ_b (v_a − v_b)K_ab + 2 d_a v_a`; the
    /// gradient of the seminorm is `2·cell·L`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let kv = self.kv(v);
        (0..v.len())
            .map(|a| 2.0 * self.cell * (self.rowsum[a] * v[a] - kv[a]) + 2.0 * self.diag(a) * v[a])
            .collect()
    }

    /// `cell·⟨v, L v⟩`.
    pub fn seminorm_sq_interior(&self, v: &[f64]) -> f64 {
        let l = self.apply(v);
        let terms: Vec<f64> = v.iter().zip(&l).map(|(a, b)| a * b).collect();
        self.cell * rng::pairwise_sum(&terms)
    }

    pub fn seminorm(&self, u: &GridField) -> Result<GridSeminorm> {
        self.check_shape(u)?;
        let v = self.restrict(u);
        let kv = self.kv(&v);
        let cell = self.cell;
        let pairs: Vec<f64> = (0..v.len()).map(|a| 2.0 * cell * cell * v[a] * (self.rowsum[a] * v[a] - kv[a])).collect();
        let sq = |w: &dyn Fn(usize) -> f64| -> f64 {
            let t: Vec<f64> = (0..v.len()).map(|a| 2.0 * cell * w(a) * v[a] * v[a]).collect();
            rng::pairwise_sum(&t)
        };
        let pair_part = rng::pairwise_sum(&pairs);
        let boundary_part = sq(&|a| self.boundary[a]);
        let even = sq(&|a| self.shell[0][a]);
        let odd = sq(&|a| self.shell[1][a]);
        let tail_part = sq(&|_| self.tail_coeff);
        let shell_part = 0.5 * (even + odd);
        Ok(GridSeminorm {
            value: pair_part + boundary_part + shell_part + tail_part,
            pair_part,
            boundary_part,
            shell_part,
            tail_part,
            shell_err: 0.5 * (even - odd).abs(),
            rho_cut: self.rho_cut,
        })
    }

    /// `cell·Σ |v|^p` over interior values.
    pub fn lp_pow_interior(&self, v: &[f64], p: f64) -> f64 {
        let t: Vec<f64> = v.iter().map(|x| x.abs().powf(p)).collect();
        self.cell * rng::pairwise_sum(&t)
    }

    pub fn quotient_interior(&self, v: &[f64]) -> Result<(f64, f64, f64)> {
        let p = self.critical_exponent();
        let np = self.lp_pow_interior(v, p);
        if !(np > 0.0) {
            return Err(Error::ZeroField);
        }
        let lp = np.powf(1.0 / p);
        let s = self.seminorm_sq_interior(v);
        Ok((s / (lp * lp), s, lp))
    }

    pub fn quotient(&self, u: &GridField) -> Result<f64> {
        self.check_shape(u)?;
        Ok(self.quotient_interior(&self.restrict(u))?.0)
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell
    }
}

/// `[u]²` of a grid field with a fresh operator.
pub fn grid_seminorm(spec: &GroupSpec, gauge: &Gauge, p: &FracParams, u: &GridField, sigma_q: f64, opts: &GridOptions) -> Result<GridSeminorm> {
    GridOperator::new(spec, gauge, p, u, sigma_q, opts)?.seminorm(u)
}

/// `[u]² / ‖u‖²_{2*}` with a fresh operator.
pub fn sobolev_quotient(spec: &GroupSpec, gauge: &Gauge, p: &FracParams, u: &GridField, sigma_q: f64, opts: &GridOptions) -> Result<f64> {
    GridOperator::new(spec, gauge, p, u, sigma_q, opts)?.quotient(u)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientTrace {
    pub iteration: usize,
    pub quotient: f64,
    pub seminorm_sq: f64,
    pub lp_norm: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeOptions {
    pub iters: usize,
    /// Initial Armijo step, relative to `‖u‖_2`.
    pub step: f64,
    pub max_backtracks: usize,
    /// Stop once the Euler–Lagrange residual is below this.
    pub tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { iters: 200, step: 0.5, max_backtracks: 25, tol: 1e-3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeResult {
    #[serde(skip)]
    pub field: GridField,
    pub trace: Vec<QuotientTrace>,
    /// `‖L u − μ u^{2*−1}‖ / ‖L u‖` at the returned field.
    pub residual: f64,
    pub multiplier: f64,
    pub stagnated: bool,
    /// Accepted steps in which the nonnegativity clamp changed a value.
    pub clamped_steps: usize,
    pub min_value: f64,
}

/// Clamp to `[0, ∞)` (or take `|·|` if nothing survives) and rescale to unit `2*`-norm.
fn project(op: &GridOperator, v: &mut [f64], p: f64) -> bool {
    let clamped = v.iter().any(|x| *x < 0.0);
    if v.iter().all(|x| *x <= 0.0) {
        v.iter_mut().for_each(|x| *x = x.abs());
    } else {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
    }
    let n = op.lp_pow_interior(v, p);
    if n > 0.0 {
        let c = n.powf(-1.0 / p);
        v.iter_mut().for_each(|x| *x *= c);
    }
    clamped
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(L u − μ |u|^{p−2}u, μ)` at unit norm, with `μ` the quotient.
fn el_parts(op: &GridOperator, v: &[f64], p: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let l = op.apply(v);
    let terms: Vec<f64> = v.iter().zip(&l).map(|(a, b)| a * b).collect();
    let s = op.cell * rng::pairwise_sum(&terms);
    let np = op.lp_pow_interior(v, p);
    let mu = s / np.powf(2.0 / p);
    // gradient of the quotient divided by 2·cell (at unit norm)
    let g: Vec<f64> = v
        .iter()
        .zip(&l)
        .map(|(x, lx)| lx - mu / np * x.abs().powf(p - 2.0) * x)
        .collect();
    (g, l, mu)
}

/// Normalized gradient descent with Armijo backtracking, clamping and `2*`-normalization.
pub fn optimize_quotient(op: &GridOperator, init: &GridField, opt: &OptimizeOptions) -> Result<OptimizeResult> {
    op.check_shape(init)?;
    let p = op.critical_exponent();
    let mut v = op.restrict(init);
    if v.iter().all(|x| *x == 0.0) {
        return Err(Error::ZeroField);
    }
    let n0 = op.lp_pow_interior(&v, p);
    v.iter_mut().for_each(|x| *x *= n0.powf(-1.0 / p));
    let (mut q, mut s, mut lp) = op.quotient_interior(&v)?;
    let mut trace = vec![QuotientTrace { iteration: 0, quotient: q, seminorm_sq: s, lp_norm: lp, step_size: 0.0 }];
    let mut alpha = opt.step;
    let mut stagnated = false;
    let mut clamped_steps = 0;
    let c1 = 1e-4;
    for it in 1..=opt.iters {
        let (g, l, _) = el_parts(op, &v, p);
        let (gn, ln, un) = (norm2(&g), norm2(&l), norm2(&v));
        if gn <= opt.tol * ln || gn == 0.0 {
            break;
        }
        let slope = 2.0 * op.cell * gn * un;
        let mut a = (2.0 * alpha).min(opt.step);
        let mut accepted = None;
        for _ in 0..opt.max_backtracks {
            let mut t: Vec<f64> = v.iter().zip(&g).map(|(x, d)| x - a * un / gn * d).collect();
            let clamped = project(op, &mut t, p);
            if let Ok((qt, st, lt)) = op.quotient_interior(&t) {
                if qt <= q - c1 * a * slope {
                    accepted = Some((t, qt, st, lt, clamped));
                    break;
                }
            }
            a *= 0.5;
        }
        match accepted {
            Some((t, qt, st, lt, clamped)) => {
                v = t;
                q = qt;
                s = st;
                lp = lt;
                alpha = a;
                clamped_steps += usize::from(clamped);
                trace.push(QuotientTrace { iteration: it, quotient: q, seminorm_sq: s, lp_norm: lp, step_size: a });
            }
            None => {
                stagnated = true;
                break;
            }
        }
    }
    let (g, l, mu) = el_parts(op, &v, p);
    let residual = norm2(&g) / norm2(&l);
    let min_value = v.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OptimizeResult { field: op.extend(&v), trace, residual, multiplier: mu, stagnated, clamped_steps, min_value })
}

const MAGIC: &[u8; 4] = b"HFG1";

/// Binary dump: `HFG1`, `u32` dimension, `u32` counts, `f64` L, `f64` half-widths,
/// then the row-major values; all little-endian.
pub fn write_hfg1<W: Write>(w: &mut W, f: &GridField) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(f.dim() as u32).to_le_bytes())?;
    for c in &f.counts {
        w.write_all(&(*c as u32).to_le_bytes())?;
    }
    w.write_all(&f.l.to_le_bytes())?;
    for h in &f.half {
        w.write_all(&h.to_le_bytes())?;
    }
    for v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_hfg1<R: Read>(r: &mut R) -> Result<GridField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not an HFG1 stream".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut counts = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut b4)?;
        counts.push(u32::from_le_bytes(b4) as usize);
    }
    r.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let mut half = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut b8)?;
        half.push(f64::from_le_bytes(b8));
    }
    let len: usize = counts.iter().product();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(GridField { l, half, counts, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::GaugeKind;

    fn setup() -> (GroupSpec, Gauge) {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        (h, k)
    }

    #[test]
    fn zero_grid_has_zero_seminorm() {
        let (h, k) = setup();
        let p = FracParams::new(&h, 0.5).unwrap();
        let g = GridField::zeros(&k, 2.0, &[6, 6, 6]).unwrap();
        let opts = GridOptions { exterior_samples: 512, ..Default::default() };
        assert_eq!(grid_seminorm(&h, &k, &p, &g, 4.93, &opts).unwrap().value, 0.0);
        assert!(matches!(sobolev_quotient(&h, &k, &p, &g, 4.93, &opts), Err(Error::ZeroField)));
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let (h, k) = setup();
        let bump = crate::fields::CompactBump::new(&h, 1.5).unwrap();
        let g = GridField::sample(&k, 2.0, &[7, 7, 9], &bump).unwrap();
        for i in [100, 150, 200] {
            assert!((g.eval(&g.node(i)) - g.values[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn hfg1_round_trip() {
        let (h, k) = setup();
        let bump = crate::fields::CompactBump::new(&h, 1.5).unwrap();
        let g = GridField::sample(&k, 2.0, &[5, 6, 7], &bump).unwrap();
        let mut buf = Vec::new();
        write_hfg1(&mut buf, &g).unwrap();
        assert_eq!(&buf[..4], b"HFG1");
        assert_eq!(read_hfg1(&mut buf.as_slice()).unwrap(), g);
    }
}

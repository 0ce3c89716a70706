//! Disjoint ball families and the projection defect `‖u − Pu‖²_{L²(Ω)}`, where
//! `Pu` replaces `u` on each ball by its mean.
//!
//! Balls of the max gauge are coordinate boxes left-translated by their
//! centers; a lattice of such balls tiles the group. Other gauges use a greedy
//! packing of radius `δ/2`, which leaves gaps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::fracop::gauss_legendre;
use crate::gauge::{Gauge, GaugeKind};
use crate::group::{CoordBox, GroupSpec, Point};
use crate::quadrature::Estimate;
use crate::rng;

use super::tensor_gl;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    fn coord_box(&self, spec: &GroupSpec, gauge: &Gauge) -> CoordBox {
        spec.translate_box(&self.center, &gauge.ball_box(self.radius))
    }
}

fn boxes_meet(a: &CoordBox, b: &CoordBox) -> bool {
    (0..a.dim()).all(|j| a.lo[j] < b.hi[j] && b.lo[j] < a.hi[j])
}

fn is_max(gauge: &Gauge) -> bool {
    gauge.kind() == GaugeKind::Max
}

/// Exact disjointness of two open max-gauge balls. `None` for other gauges.
fn max_balls_disjoint(spec: &GroupSpec, gauge: &Gauge, a: &Ball, b: &Ball) -> Option<bool> {
    if !is_max(gauge) {
        return None;
    }
    let tol = 1e-9 * a.radius.max(b.radius);
    // d = c_b⁻¹ c_a; the balls meet iff d·B_{r_a} meets B_{r_b}
    let d = spec.multiply(&spec.inverse(&b.center), &a.center);
    let ha = gauge.ball_box(a.radius).hi;
    let hb = gauge.ball_box(b.radius).hi;
    let n = d.len();
    if spec.is_abelian() {
        return Some((0..n).any(|j| d[j].abs() >= ha[j] + hb[j] - tol * spec.weights()[j]));
    }
    // heisenberg: y ∈ (-ha, ha) with d_i + y_i ∈ (-hb, hb) on the horizontal block
    let nz = n - 1;
    let mut lo = vec![0.0; nz];
    let mut hi = vec![0.0; nz];
    for i in 0..nz {
        lo[i] = (-ha[i]).max(-hb[i] - d[i]);
        hi[i] = ha[i].min(hb[i] - d[i]);
        if hi[i] - lo[i] <= tol {
            return Some(true);
        }
    }
    // t-coordinate of d·y: d_t + y_t + ½Σ(dx_k yy_k − dy_k yx_k)
    let k = nz / 2;
    let (mut lmin, mut lmax) = (0.0, 0.0);
    for j in 0..k {
        for (coef, idx) in [(0.5 * d[j], k + j), (-0.5 * d[k + j], j)] {
            let (u, v) = (coef * lo[idx], coef * hi[idx]);
            lmin += u.min(v);
            lmax += u.max(v);
        }
    }
    let low = d[nz] - ha[nz] + lmin;
    let high = d[nz] + ha[nz] + lmax;
    let tt = 1e-9 * ha[nz].max(hb[nz]);
    Some(!(low < hb[nz] - tt && high > -hb[nz] + tt))
}

/// Fails with the first overlapping pair. A pair is accepted when
/// `|c_j⁻¹c_i| ≥ r_i + r_j`, or by the exact box test for the max gauge.
pub fn validate_disjoint(spec: &GroupSpec, gauge: &Gauge, balls: &[Ball]) -> Result<()> {
    let boxes: Vec<CoordBox> = balls.iter().map(|b| b.coord_box(spec, gauge)).collect();
    let axis = spec.dim() - 1;
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| boxes[a].lo[axis].total_cmp(&boxes[b].lo[axis]));
    let bad = rng::map_blocks(order.len().div_ceil(256), |c| {
        for p in c * 256..((c + 1) * 256).min(order.len()) {
            let i = order[p];
            for &j in &order[p + 1..] {
                if boxes[j].lo[axis] >= boxes[i].hi[axis] {
                    break;
                }
                if !boxes_meet(&boxes[i], &boxes[j]) {
                    continue;
                }
                let (a, b) = (&balls[i], &balls[j]);
                if gauge.distance(spec, &a.center, &b.center) >= (a.radius + b.radius) * (1.0 - 1e-12) {
                    continue;
                }
                if max_balls_disjoint(spec, gauge, a, b) == Some(true) {
                    continue;
                }
                return Some((i.min(j), i.max(j)));
            }
        }
        None
    });
    match bad.into_iter().flatten().min() {
        Some((i, j)) => Err(Error::Overlap(i, j)),
        None => Ok(()),
    }
}

/// Lattice of max-gauge balls of radius `δ` meeting `omega`; they tile the group.
pub fn max_gauge_tiling(spec: &GroupSpec, gauge: &Gauge, delta: f64, omega: &CoordBox) -> Result<Vec<Ball>> {
    if !is_max(gauge) {
        return Err(Error::Domain("tiling needs the max gauge".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain("δ must be positive".into()));
    }
    let h = gauge.ball_box(delta).hi;
    let n = spec.dim();
    let range = |lo: f64, hi: f64, step: f64| ((lo / step).floor() as i64 - 1)..=((hi / step).ceil() as i64 + 1);
    let mut out = Vec::new();
    let horiz = if spec.is_abelian() { n } else { n - 1 };
    let ranges: Vec<Vec<i64>> = (0..horiz).map(|j| range(omega.lo[j], omega.hi[j], 2.0 * h[j]).collect()).collect();
    let total: usize = ranges.iter().map(|r| r.len()).product();
    for idx in 0..total {
        let mut r = idx;
        let mut c: Point = smallvec::smallvec![0.0; n];
        for j in 0..horiz {
            let len = ranges[j].len();
            c[j] = 2.0 * h[j] * ranges[j][r % len] as f64;
            r /= len;
        }
        if horiz == n {
            let b = Ball { center: c, radius: delta };
            if boxes_meet(&b.coord_box(spec, gauge), omega) {
                out.push(b);
            }
            continue;
        }
        // stack along the center: the column over this horizontal cell
        let probe = Ball { center: c.clone(), radius: delta };
        let pb = probe.coord_box(spec, gauge);
        let shear = pb.hi[n - 1] - h[n - 1];
        let step = 2.0 * h[n - 1];
        for kt in range(omega.lo[n - 1] - shear, omega.hi[n - 1] + shear, step) {
            let mut cc = c.clone();
            cc[n - 1] = step * kt as f64;
            let b = Ball { center: cc, radius: delta };
            if boxes_meet(&b.coord_box(spec, gauge), omega) {
                out.push(b);
            }
        }
    }
    Ok(out)
}

/// Greedy packing of radius-`δ/2` balls with centers on a sub-grid of `omega`.
pub fn greedy_packing(spec: &GroupSpec, gauge: &Gauge, delta: f64, omega: &CoordBox) -> Result<Vec<Ball>> {
    if !(delta > 0.0) {
        return Err(Error::Domain("δ must be positive".into()));
    }
    let r = 0.5 * delta;
    let step = gauge.ball_box(r).hi;
    let n = spec.dim();
    let counts: Vec<usize> = (0..n).map(|j| (((omega.hi[j] - omega.lo[j]) / step[j]).floor() as usize + 1).max(1)).collect();
    let total: usize = counts.iter().product();
    if total > 2_000_000 {
        return Err(Error::ResourceLimit(format!("{} packing candidates", total)));
    }
    let mut out: Vec<Ball> = Vec::new();
    for idx in 0..total {
        let mut k = idx;
        let mut c: Point = smallvec::smallvec![0.0; n];
        for j in 0..n {
            c[j] = omega.lo[j] + step[j] * (k % counts[j]) as f64;
            k /= counts[j];
        }
        if out.iter().all(|b| gauge.distance(spec, &c, &b.center) >= 2.0 * r) {
            out.push(Ball { center: c, radius: r });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RellichDefect {
    pub delta: f64,
    pub balls: usize,
    pub defect: Estimate,
    /// `∫_{Ω∖∪B} u²`, included in `defect`.
    pub uncovered: f64,
}

/// Per-ball mean and defect by tensor Gauss–Legendre in ball coordinates `g = c·y`.
fn ball_terms(spec: &GroupSpec, gauge: &Gauge, u: &dyn ScalarField, b: &Ball, omega: &CoordBox, nodes: usize) -> (f64, f64) {
    let bx = gauge.ball_box(b.radius);
    let (xs, ws) = gauss_legendre(nodes);
    let n = spec.dim();
    let total = nodes.pow(n as u32);
    let exact_box = is_max(gauge);
    let mut pts = Vec::with_capacity(total);
    let mut y = vec![0.0; n];
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        for j in 0..n {
            let t = r % nodes;
            r /= nodes;
            let half = 0.5 * (bx.hi[j] - bx.lo[j]);
            y[j] = bx.lo[j] + half * (xs[t] + 1.0);
            w *= ws[t] * half;
        }
        if !exact_box && gauge.eval(&y) >= b.radius {
            continue;
        }
        let g = spec.multiply(&b.center, &y);
        pts.push((w, u.eval(&g), omega.contains(&g)));
    }
    let vol: f64 = pts.iter().map(|p| p.0).sum();
    let mean = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / vol;
    let dev = pts.iter().filter(|p| p.2).map(|p| p.0 * (p.1 - mean).powi(2)).sum::<f64>();
    let mass = pts.iter().filter(|p| p.2).map(|p| p.0 * p.1 * p.1).sum::<f64>();
    (dev, mass)
}

/// `‖u − Pu‖²_{L²(Ω)}`; `tail_bound` is the change between `nodes` and `nodes + 1`
/// points per axis.
pub fn rellich_defect(
    spec: &GroupSpec,
    gauge: &Gauge,
    u: &dyn ScalarField,
    balls: &[Ball],
    omega: &CoordBox,
    nodes: usize,
) -> Result<RellichDefect> {
    validate_disjoint(spec, gauge, balls)?;
    let usupp = u.support();
    let relevant: Vec<&Ball> = balls
        .iter()
        .filter(|b| {
            let bb = b.coord_box(spec, gauge);
            boxes_meet(&bb, omega) && usupp.as_ref().is_none_or(|s| boxes_meet(&bb, s))
        })
        .collect();
    let run = |k: usize| {
        let parts = rng::map_blocks(relevant.len().div_ceil(64), |c| {
            relevant[c * 64..((c + 1) * 64).min(relevant.len())]
                .iter()
                .map(|b| ball_terms(spec, gauge, u, b, omega, k))
                .collect::<Vec<_>>()
        })
        .concat();
        let dev: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let mass: Vec<f64> = parts.iter().map(|p| p.1).collect();
        (rng::pairwise_sum(&dev), rng::pairwise_sum(&mass))
    };
    let (d1, m1) = run(nodes);
    let (d2, m2) = run(nodes + 1);
    let region = match &usupp {
        Some(s) => CoordBox {
            lo: omega.lo.iter().zip(&s.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: omega.hi.iter().zip(&s.hi).map(|(a, b)| a.min(*b)).collect(),
        },
        None => omega.clone(),
    };
    let total = if region.lo.iter().zip(&region.hi).all(|(a, b)| a < b) {
        let nn = if spec.dim() <= 3 { 32 } else { 10 };
        tensor_gl(&region, nn, |x| u.eval(x).powi(2))
    } else {
        0.0
    };
    let uncovered = (total - m2).max(0.0);
    let value = d2 + uncovered;
    Ok(RellichDefect {
        delta: balls.iter().map(|b| b.radius).fold(0.0, f64::max),
        balls: balls.len(),
        defect: Estimate {
            value,
            std_err: 0.0,
            tail_bound: (d2 - d1).abs() + (m2 - m1).abs(),
            n_evals: 0,
            seed: 0,
            flagged: false,
        },
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_tiles_are_disjoint_and_cover() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let g = Gauge::new(GaugeKind::Max, &h).unwrap();
        let omega = CoordBox::centered(&[0.5, 0.5, 0.3]);
        let balls = max_gauge_tiling(&h, &g, 0.2, &omega).unwrap();
        validate_disjoint(&h, &g, &balls).unwrap();
        // every sampled point of omega lies in exactly one ball
        let mut r = rng::stream(1, 2, 3);
        let mut u = [0.0; 3];
        for _ in 0..2000 {
            rng::fill_unit(&mut r, &mut u);
            let mut x = [0.0; 3];
            omega.map_unit(&u, &mut x);
            let hits = balls.iter().filter(|b| g.distance(&h, &x, &b.center) < b.radius).count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn overlap_is_reported() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let g = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let balls = vec![
            Ball { center: smallvec::smallvec![0.0, 0.0, 0.0], radius: 1.0 },
            Ball { center: smallvec::smallvec![1.5, 0.0, 0.0], radius: 1.0 },
        ];
        assert_eq!(validate_disjoint(&h, &g, &balls), Err(Error::Overlap(0, 1)));
    }

    #[test]
    fn linear_field_variance_on_one_ball() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        let g = Gauge::new(GaugeKind::Max, &e).unwrap();
        let u = crate::fields::FnField { f: |x: &[f64]| x[0], support: None, sup: 1.0, name: "x".into() };
        let r = 0.3;
        let ball = Ball { center: smallvec::smallvec![0.0, 0.0], radius: r };
        let omega = CoordBox::centered(&[r, r]);
        let d = rellich_defect(&e, &g, &u, &[ball], &omega, 4).unwrap();
        // ∫_{[-r,r]²} x² = 4r⁴/3
        assert!((d.defect.value - 4.0 * r.powi(4) / 3.0).abs() < 1e-12);
    }
}

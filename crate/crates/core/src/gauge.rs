//! Homogeneous norms and the left-invariant distance `d(g, h) = |h⁻¹g|`.
//!
//! Every variant is nondecreasing in each `|x_j|`. Hence the unit ball's
//! bounding box has half-widths `|e_j|^{-d_j}`, and the supremum of a gauge
//! over a coordinate box is attained at the corner of largest moduli.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{CoordBox, GroupSpec, Point};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeKind {
    /// `(|z|^4 + 16 t^2)^{1/4}` on Heisenberg groups.
    Koranyi,
    /// `inf{λ : ‖δ_{1/λ}x‖ < r}`; its unit ball is the Euclidean ball of radius r.
    BallGauge { r: f64 },
    /// `|x| + |y|^{1/2}` on the parabolic plane.
    Parabolic,
    /// `(Σ |x_j|^{2L/d_j})^{1/(2L)}` with L the least integer making every `L/d_j` integral.
    EuclideanPower,
    /// `max(|x_j|^{1/d_j})` on abelian groups, `max(|z_i|, (2|t|/n)^{1/2})` on heisenberg(n).
    /// Its balls tile the group by left translation.
    Max,
}

impl GaugeKind {
    pub fn label(&self) -> String {
        match self {
            GaugeKind::Koranyi => "koranyi".into(),
            GaugeKind::BallGauge { r } => format!("ball_gauge:{}", r),
            GaugeKind::Parabolic => "parabolic".into(),
            GaugeKind::EuclideanPower => "euclidean_power".into(),
            GaugeKind::Max => "max".into(),
        }
    }

    /// Parses `koranyi`, `ball_gauge:R`, `parabolic`, `euclidean_power` (alias `euclidean`), `max`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut it = s.splitn(2, ':');
        let head = it.next().unwrap_or("");
        let arg = it.next();
        match head {
            "koranyi" => Ok(GaugeKind::Koranyi),
            "parabolic" => Ok(GaugeKind::Parabolic),
            "euclidean_power" | "euclidean" => Ok(GaugeKind::EuclideanPower),
            "max" => Ok(GaugeKind::Max),
            "ball_gauge" | "ball" => {
                let r = arg
                    .map(|a| a.trim_start_matches("r=").parse::<f64>())
                    .unwrap_or(Ok(1.0))
                    .map_err(|_| Error::Config(format!("bad ball_gauge radius in `{}`", s)))?;
                if !(r > 0.0) {
                    return Err(Error::Domain("ball_gauge radius must be positive".into()));
                }
                Ok(GaugeKind::BallGauge { r })
            }
            _ => Err(Error::Config(format!("unknown gauge `{}`", s))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Koranyi { nz: usize },
    Ball { r2: f64 },
    Parabolic,
    Power { exps: Vec<i32>, inv: f64 },
    MaxAbelian,
    MaxHeis { nz: usize, tau: f64 },
}

/// A gauge bound to a group.
#[derive(Clone, Debug, PartialEq)]
pub struct Gauge {
    kind: GaugeKind,
    repr: Repr,
    weights: Vec<f64>,
    group: String,
    horizontal_radial: bool,
    horizontal_even: bool,
    unit_half: Point,
}

impl Gauge {
    pub fn new(kind: GaugeKind, spec: &GroupSpec) -> Result<Self> {
        let mismatch = || Error::GaugeGroupMismatch { gauge: kind.label(), group: spec.name().into() };
        let n = spec.dim();
        let m = spec.m();
        let (repr, radial) = match kind {
            GaugeKind::Koranyi => {
                let k = spec.heisenberg_rank().ok_or_else(mismatch)?;
                (Repr::Koranyi { nz: 2 * k }, true)
            }
            GaugeKind::BallGauge { r } => {
                if !(r > 0.0) {
                    return Err(Error::Domain("ball_gauge radius must be positive".into()));
                }
                (Repr::Ball { r2: r * r }, true)
            }
            GaugeKind::Parabolic => {
                if !(spec.is_abelian() && spec.weights() == [1.0, 2.0]) {
                    return Err(mismatch());
                }
                (Repr::Parabolic, true)
            }
            GaugeKind::EuclideanPower => {
                // offered where the Korányi gauge is undefined; on heisenberg(n) the
                // power sum x⁴ + y⁴ + t² breaks the triangle inequality
                if spec.heisenberg_rank().is_some() {
                    return Err(mismatch());
                }
                let l = (1..=64u32)
                    .find(|&l| {
                        spec.weights().iter().all(|d| {
                            let q = l as f64 / d;
                            (q - q.round()).abs() < 1e-9
                        })
                    })
                    .ok_or_else(mismatch)?;
                let exps: Vec<i32> =
                    spec.weights().iter().map(|d| (2.0 * l as f64 / d).round() as i32).collect();
                let radial = m == 1 || spec.horizontal().all(|j| exps[j] == 2);
                (Repr::Power { exps, inv: 1.0 / (2.0 * l as f64) }, radial)
            }
            GaugeKind::Max => {
                if spec.is_abelian() {
                    (Repr::MaxAbelian, m == 1)
                } else if let Some(k) = spec.heisenberg_rank() {
                    (Repr::MaxHeis { nz: 2 * k, tau: k as f64 / 2.0 }, false)
                } else {
                    return Err(mismatch());
                }
            }
        };
        let mut g = Gauge {
            kind,
            repr,
            weights: spec.weights().to_vec(),
            group: spec.name().into(),
            horizontal_radial: radial,
            horizontal_even: true,
            unit_half: Point::new(),
        };
        g.unit_half = (0..n)
            .map(|j| {
                let mut e: Point = smallvec::smallvec![0.0; n];
                e[j] = 1.0;
                g.eval(&e).powf(-spec.weights()[j])
            })
            .collect();
        Ok(g)
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }
    pub fn label(&self) -> String {
        self.kind.label()
    }
    pub fn horizontal_radial(&self) -> bool {
        self.horizontal_radial
    }
    pub fn horizontal_even(&self) -> bool {
        self.horizontal_even
    }

    /// Gauge of a point.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.repr {
            Repr::Koranyi { nz } => {
                let z2: f64 = x[..*nz].iter().map(|v| v * v).sum();
                let t = x[*nz];
                (z2 * z2 + 16.0 * t * t).sqrt().sqrt()
            }
            Repr::Ball { r2 } => ball_root(&self.weights, *r2, x).unwrap_or(f64::NAN),
            Repr::Parabolic => x[0].abs() + x[1].abs().sqrt(),
            Repr::Power { exps, inv } => {
                let s: f64 = x.iter().zip(exps).map(|(v, e)| v.abs().powi(*e)).sum();
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(*inv)
                }
            }
            Repr::MaxAbelian => x
                .iter()
                .zip(&self.weights)
                .map(|(v, d)| if *d == 1.0 { v.abs() } else { v.abs().powf(1.0 / d) })
                .fold(0.0, f64::max),
            Repr::MaxHeis { nz, tau } => {
                let z = x[..*nz].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                z.max((x[*nz].abs() / tau).sqrt())
            }
        }
    }

    /// `d(g, h) = |h⁻¹ g|`.
    pub fn distance(&self, spec: &GroupSpec, g: &[f64], h: &[f64]) -> f64 {
        self.eval(&spec.multiply(&spec.inverse(h), g))
    }

    /// Half-widths of the bounding box of the unit ball.
    pub fn unit_half_widths(&self) -> &[f64] {
        &self.unit_half
    }

    /// Bounding box of the centered ball `B_R`.
    pub fn ball_box(&self, radius: f64) -> CoordBox {
        let half: Point =
            self.unit_half.iter().zip(&self.weights).map(|(w, d)| w * radius.powf(*d)).collect();
        CoordBox::centered(&half)
    }

    /// Supremum of the gauge over a coordinate box.
    pub fn sup_over_box(&self, b: &CoordBox) -> f64 {
        self.eval(&b.max_abs())
    }
}

/// Root of `Σ x_j² λ^{-2d_j} = r²`, by Newton iteration in `ln λ` started
/// left of the root; the map is convex and decreasing there, so iterates
/// increase monotonically.
pub fn ball_root(weights: &[f64], r2: f64, x: &[f64]) -> Result<f64> {
    let r = r2.sqrt();
    let mut mu = f64::NEG_INFINITY;
    for (v, d) in x.iter().zip(weights) {
        if *v != 0.0 {
            mu = mu.max((v.abs() / r).ln() / d);
        }
    }
    if mu == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    for _ in 0..200 {
        let mut phi = -r2;
        let mut dphi = 0.0;
        for (v, d) in x.iter().zip(weights) {
            let t = v * v * (-2.0 * d * mu).exp();
            phi += t;
            dphi -= 2.0 * d * t;
        }
        let step = phi / dphi;
        mu -= step;
        if step.abs() <= 1e-15 * mu.abs().max(1.0) || phi <= 0.0 {
            return Ok(mu.exp());
        }
    }
    Err(Error::RootBracketFailure(200))
}

/// `ball_gauge` evaluated directly from a group, radius and point.
pub fn ball_gauge(spec: &GroupSpec, r: f64, g: &[f64]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain("ball_gauge radius must be positive".into()));
    }
    ball_root(spec.weights(), r * r, g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizontalProbe {
    pub horizontal_radial: bool,
    pub horizontal_even: bool,
    pub rotation_max_err: f64,
    pub sign_flip_max_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeReport {
    pub group: String,
    pub gauge: String,
    pub samples: usize,
    pub triangle_max_violation: f64,
    pub homogeneity_max_err: f64,
    pub symmetry_max_err: f64,
    pub horizontal_probe: HorizontalProbe,
}

/// Samples a point spread over many scales: a unit-box point dilated by `2^{U(-4,4)}`.
pub fn sample_multiscale(spec: &GroupSpec, gauge: &Gauge, u: &[f64]) -> Point {
    let n = spec.dim();
    let half = gauge.unit_half_widths();
    let x: Point = (0..n).map(|j| (2.0 * u[j] - 1.0) * half[j]).collect();
    spec.dilate(2f64.powf(8.0 * u[n] - 4.0), &x)
}

/// Random orthogonal matrix on the horizontal block via Gram–Schmidt.
fn random_orthogonal(m: usize, u: &[f64]) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for c in 0..m {
        let mut v: Vec<f64> = (0..m)
            .map(|i| {
                let a = u[(c * m + i) * 2].max(1e-300);
                let b = u[(c * m + i) * 2 + 1];
                (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
            })
            .collect();
        for p in &cols {
            let d: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            for i in 0..m {
                v[i] -= d * p[i];
            }
        }
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= nrm);
        cols.push(v);
    }
    cols
}

/// Statistical check of the gauge axioms on `n_samples` pairs.
pub fn check_gauge_properties(
    gauge: &Gauge,
    spec: &GroupSpec,
    n_samples: usize,
    seed: u64,
) -> GaugeReport {
    let n = spec.dim();
    let hidx: Vec<usize> = spec.horizontal().collect();
    let m = hidx.len();
    let reg = rng::region(seed, 0x6A06E);
    let nblocks = n_samples.div_ceil(rng::BLOCK);
    let per_block = rng::map_blocks(nblocks, |b| {
        let mut r = rng::stream(seed, reg, b as u64);
        let count = (n_samples - b * rng::BLOCK).min(rng::BLOCK);
        let mut u = vec![0.0; 2 * (n + 1) + 2 * m * m + m];
        let mut out = [0.0f64; 5];
        for _ in 0..count {
            rng::fill_unit(&mut r, &mut u);
            let g = sample_multiscale(spec, gauge, &u[..n + 1]);
            let h = sample_multiscale(spec, gauge, &u[n + 1..2 * n + 2]);
            let (ng, nh) = (gauge.eval(&g), gauge.eval(&h));
            let ngh = gauge.eval(&spec.multiply(&g, &h));
            out[0] = out[0].max((ngh - ng - nh) / (ng + nh));
            for lam in [1e-3, 1.0, 1e3] {
                let nd = gauge.eval(&spec.dilate(lam, &g));
                out[1] = out[1].max((nd - lam * ng).abs() / (lam * ng));
            }
            out[2] = out[2].max((gauge.eval(&spec.inverse(&g)) - ng).abs() / ng);
            if m > 0 {
                let q = random_orthogonal(m, &u[2 * n + 2..2 * n + 2 + 2 * m * m]);
                let mut gr = g.clone();
                for (a, &ia) in hidx.iter().enumerate() {
                    gr[ia] = (0..m).map(|b| q[b][a] * g[hidx[b]]).sum();
                }
                out[3] = out[3].max((gauge.eval(&gr) - ng).abs() / ng);
                let mut gf = g.clone();
                for (a, &ia) in hidx.iter().enumerate() {
                    if u[2 * n + 2 + 2 * m * m + a] < 0.5 {
                        gf[ia] = -gf[ia];
                    }
                }
                out[4] = out[4].max((gauge.eval(&gf) - ng).abs() / ng);
            }
        }
        out
    });
    let mut agg = [0.0f64; 5];
    for b in per_block {
        for i in 0..5 {
            agg[i] = agg[i].max(b[i]);
        }
    }
    let tol = 1e-10;
    let radial_ok = !gauge.horizontal_radial || agg[3] <= tol;
    let even_ok = !gauge.horizontal_even || agg[4] <= tol;
    GaugeReport {
        group: spec.name().into(),
        gauge: gauge.label(),
        samples: n_samples,
        triangle_max_violation: agg[0].max(0.0),
        homogeneity_max_err: agg[1],
        symmetry_max_err: agg[2],
        horizontal_probe: HorizontalProbe {
            horizontal_radial: gauge.horizontal_radial,
            horizontal_even: gauge.horizontal_even,
            rotation_max_err: agg[3],
            sign_flip_max_err: agg[4],
            passed: radial_ok && even_ok,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_values() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        assert!((k.eval(&[0.0, 0.0, 1.0]) - 2.0).abs() < 1e-15);
        assert_eq!(k.eval(&[0.0, 0.0, 0.0]), 0.0);
        let p = Gauge::new(GaugeKind::Parabolic, &GroupSpec::parabolic_r2()).unwrap();
        assert_eq!(p.eval(&[1.0, 4.0]), 3.0);
    }

    #[test]
    fn ball_gauge_roots() {
        let h = GroupSpec::heisenberg(1).unwrap();
        assert!((ball_gauge(&h, 1.0, &[0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-13);
        assert!((ball_gauge(&h, 1.0, &[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-13);
        let g = [0.3, -0.7, 0.2];
        let a = ball_gauge(&h, 1.0, &h.dilate(2.0, &g)).unwrap();
        let b = ball_gauge(&h, 1.0, &g).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12 * a);
    }

    #[test]
    fn mismatch_errors() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        assert!(matches!(Gauge::new(GaugeKind::Koranyi, &e), Err(Error::GaugeGroupMismatch { .. })));
        assert!(Gauge::new(GaugeKind::Parabolic, &e).is_err());
    }

    #[test]
    fn unit_box_is_tight() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        assert_eq!(k.unit_half_widths(), &[1.0, 1.0, 0.25]);
        let mx = Gauge::new(GaugeKind::Max, &h).unwrap();
        let w = mx.unit_half_widths();
        assert!((w[0] - 1.0).abs() + (w[1] - 1.0).abs() + (w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn euclidean_norm_exact() {
        let e = GroupSpec::euclidean(2, None).unwrap();
        let g = Gauge::new(GaugeKind::EuclideanPower, &e).unwrap();
        assert_eq!(g.eval(&[3.0, 4.0]), 5.0);
        let rep = check_gauge_properties(&g, &e, 2000, 1);
        assert!(rep.triangle_max_violation <= 1e-12);
        assert!(rep.horizontal_probe.passed);
    }
}

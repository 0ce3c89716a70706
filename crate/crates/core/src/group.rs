//! Graded nilpotent Lie groups in exponential coordinates of the first kind.
//!
//! A group is given by its dilation weights and structure constants. The
//! product is the Baker–Campbell–Hausdorff series truncated at bracket
//! length four, which is exact for groups of step at most four.

use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A group element in exponential coordinates.
pub type Point = SmallVec<[f64; 8]>;

const TOL: f64 = 1e-12;

/// Scalars the BCH polynomial can be evaluated over.
pub trait Coeff:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
}

impl Coeff for f64 {
    #[inline]
    fn constant(c: f64) -> Self {
        c
    }
}

/// Closed interval used to bound images of coordinate boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo: lo.min(hi), hi: lo.max(hi) }
    }
}

impl Add for Interval {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Interval { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }
}

impl Sub for Interval {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Interval { lo: self.lo - o.hi, hi: self.hi - o.lo }
    }
}

impl Neg for Interval {
    type Output = Self;
    fn neg(self) -> Self {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        Interval {
            lo: c.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl Coeff for Interval {
    fn constant(c: f64) -> Self {
        Interval { lo: c, hi: c }
    }
}

/// Axis-aligned box in exponential coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordBox {
    pub lo: Point,
    pub hi: Point,
}

impl CoordBox {
    pub fn centered(half: &[f64]) -> Self {
        CoordBox {
            lo: half.iter().map(|h| -h.abs()).collect(),
            hi: half.iter().map(|h| h.abs()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| Interval::new(l, h)).collect()
    }

    pub fn from_intervals(iv: &[Interval]) -> Self {
        CoordBox { lo: iv.iter().map(|i| i.lo).collect(), hi: iv.iter().map(|i| i.hi).collect() }
    }

    pub fn union(&self, other: &CoordBox) -> CoordBox {
        CoordBox {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Largest absolute value of each coordinate over the box.
    pub fn max_abs(&self) -> Point {
        self.lo.iter().zip(&self.hi).map(|(l, h)| l.abs().max(h.abs())).collect()
    }

    /// Maps a point of the unit cube `[0,1)^n` into the box.
    pub fn map_unit(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..self.dim() {
            out[j] = self.lo[j] + u[j] * (self.hi[j] - self.lo[j]);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawBracket {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// Unvalidated group description, matching the JSON file format (1-based indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGroupSpec {
    pub name: String,
    pub n: usize,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub brackets: Vec<RawBracket>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Offending (i, j, k) triples, 1-based.
    pub offenders: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        let msgs: Vec<String> = self
            .failures()
            .map(|c| {
                if c.offenders.is_empty() {
                    format!("{}: {}", c.name, c.detail)
                } else {
                    format!("{}: {} at {:?}", c.name, c.detail, c.offenders)
                }
            })
            .collect();
        if msgs.is_empty() {
            "all checks passed".into()
        } else {
            msgs.join("; ")
        }
    }
}

/// Checks the weight normalization, antisymmetry, grading and Jacobi identity.
pub fn validate_spec(raw: &RawGroupSpec) -> ValidationReport {
    let n = raw.n;
    let mut checks = Vec::new();

    let dims_ok = raw.weights.len() == n && n > 0;
    checks.push(Check {
        name: "dimension",
        passed: dims_ok,
        detail: format!("n = {}, {} weights", n, raw.weights.len()),
        offenders: vec![],
    });
    let idx_bad: Vec<_> = raw
        .brackets
        .iter()
        .filter(|b| b.i == 0 || b.j == 0 || b.k == 0 || b.i > n || b.j > n || b.k > n)
        .map(|b| (b.i, b.j, b.k))
        .collect();
    checks.push(Check {
        name: "bracket_indices",
        passed: idx_bad.is_empty(),
        detail: "indices must lie in 1..=n".into(),
        offenders: idx_bad.clone(),
    });
    if !dims_ok || !idx_bad.is_empty() {
        return ValidationReport { checks };
    }

    let w = &raw.weights;
    checks.push(Check {
        name: "weight_normalization",
        passed: (w[0] - 1.0).abs() <= TOL,
        detail: format!("d_1 = {}", w[0]),
        offenders: vec![],
    });
    let mono = w.windows(2).all(|p| p[1] >= p[0] - TOL) && w.iter().all(|d| *d > 0.0);
    checks.push(Check {
        name: "weight_order",
        passed: mono,
        detail: "weights must be positive and nondecreasing".into(),
        offenders: vec![],
    });

    let table = dense_table(raw);
    let at = |i: usize, j: usize, k: usize| table[(i * n + j) * n + k];

    let mut anti = Vec::new();
    let mut grading = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = at(i, j, k);
                if (c + at(j, i, k)).abs() > TOL {
                    anti.push((i + 1, j + 1, k + 1));
                }
                if c.abs() > TOL && (w[k] - w[i] - w[j]).abs() > TOL && i < j {
                    grading.push((i + 1, j + 1, k + 1));
                }
            }
        }
    }
    anti.retain(|&(i, j, _)| i <= j);
    checks.push(Check {
        name: "antisymmetry",
        passed: anti.is_empty(),
        detail: "c_ij^k = -c_ji^k".into(),
        offenders: anti,
    });
    checks.push(Check {
        name: "grading",
        passed: grading.is_empty(),
        detail: "c_ij^k != 0 requires d_k = d_i + d_j".into(),
        offenders: grading,
    });

    let mut jacobi = Vec::new();
    let br = |x: &[f64], y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let p = x[i] * y[j];
                if p != 0.0 {
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += p * at(i, j, k);
                    }
                }
            }
        }
        out
    };
    let e = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    };
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                let (ea, eb, ec) = (e(a), e(b), e(c));
                let t1 = br(&ea, &br(&eb, &ec));
                let t2 = br(&eb, &br(&ec, &ea));
                let t3 = br(&ec, &br(&ea, &eb));
                if (0..n).any(|k| (t1[k] + t2[k] + t3[k]).abs() > TOL) {
                    jacobi.push((a + 1, b + 1, c + 1));
                }
            }
        }
    }
    checks.push(Check {
        name: "jacobi",
        passed: jacobi.is_empty(),
        detail: "Jacobi identity on basis triples".into(),
        offenders: jacobi,
    });

    let step = w[n - 1].floor() as usize;
    checks.push(Check {
        name: "step",
        passed: step <= 4,
        detail: format!("step {} (supported up to 4)", step),
        offenders: vec![],
    });
    ValidationReport { checks }
}

fn dense_table(raw: &RawGroupSpec) -> Vec<f64> {
    let n = raw.n;
    let mut t = vec![0.0; n * n * n];
    let mut given = vec![false; n * n * n];
    for b in &raw.brackets {
        let idx = ((b.i - 1) * n + (b.j - 1)) * n + (b.k - 1);
        t[idx] += b.c;
        given[idx] = true;
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = (i * n + j) * n + k;
                let m = (j * n + i) * n + k;
                if given[a] && !given[m] && i != j {
                    t[m] = -t[a];
                }
            }
        }
    }
    t
}

/// A validated graded nilpotent Lie group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    name: String,
    weights: Vec<f64>,
    /// Structure constants with i < j, 0-based.
    brackets: Vec<(usize, usize, usize, f64)>,
    q: f64,
    m: usize,
    step: usize,
}

impl GroupSpec {
    pub fn from_raw(raw: &RawGroupSpec) -> Result<Self> {
        let report = validate_spec(raw);
        if !report.passed() {
            if report.checks.iter().any(|c| c.name == "step" && !c.passed) {
                return Err(Error::UnsupportedStep { step: raw.weights[raw.n - 1].floor() as usize });
            }
            return Err(Error::InvalidSpec(report.summary()));
        }
        let n = raw.n;
        let table = dense_table(raw);
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let c = table[(i * n + j) * n + k];
                    if c != 0.0 {
                        brackets.push((i, j, k, c));
                    }
                }
            }
        }
        let weights = raw.weights.clone();
        let q = weights.iter().sum();
        let m = weights.iter().filter(|d| (**d - 1.0).abs() <= TOL).count();
        let step = weights[n - 1].floor() as usize;
        Ok(GroupSpec { name: raw.name.clone(), weights, brackets, q, m, step })
    }

    pub fn to_raw(&self) -> RawGroupSpec {
        RawGroupSpec {
            name: self.name.clone(),
            n: self.dim(),
            weights: self.weights.clone(),
            brackets: self
                .brackets
                .iter()
                .map(|&(i, j, k, c)| RawBracket { i: i + 1, j: j + 1, k: k + 1, c })
                .collect(),
        }
    }

    pub fn euclidean(n: usize, weights: Option<&[f64]>) -> Result<Self> {
        let weights = weights.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; n]);
        let raw = RawGroupSpec {
            name: format!("euclidean({})", n),
            n,
            weights,
            brackets: vec![],
        };
        Self::from_raw(&raw)
    }

    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("heisenberg(n) needs n >= 1".into()));
        }
        let dim = 2 * n + 1;
        let mut weights = vec![1.0; dim];
        weights[dim - 1] = 2.0;
        let brackets = (1..=n).map(|j| RawBracket { i: j, j: n + j, k: dim, c: 1.0 }).collect();
        Self::from_raw(&RawGroupSpec { name: format!("heisenberg({})", n), n: dim, weights, brackets })
    }

    pub fn parabolic_r2() -> Self {
        let mut g = Self::euclidean(2, Some(&[1.0, 2.0])).expect("valid builtin");
        g.name = "parabolic_r2".into();
        g
    }

    /// Builds a built-in group by name with its integer/weight parameters.
    pub fn builtin(name: &str, n: Option<usize>, weights: Option<&[f64]>) -> Result<Self> {
        match name {
            "euclidean" => Self::euclidean(n.unwrap_or(2), weights),
            "heisenberg" => Self::heisenberg(n.unwrap_or(1)),
            "parabolic_r2" => Ok(Self::parabolic_r2()),
            other => Err(Error::UnknownGroup(other.into())),
        }
    }

    /// Parses `heisenberg:N`, `euclidean:N`, `euclidean:N:w1,w2,..`, `parabolic_r2`
    /// or a path to a JSON group file.
    pub fn parse_selector(sel: &str) -> Result<Self> {
        let parts: Vec<&str> = sel.split(':').collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Config(format!("bad dimension `{}` in `{}`", s, sel)))
        };
        match parts[0] {
            "heisenberg" => Self::heisenberg(if parts.len() > 1 { num(parts[1])? } else { 1 }),
            "parabolic_r2" => Ok(Self::parabolic_r2()),
            "euclidean" => {
                let n = if parts.len() > 1 { num(parts[1])? } else { 2 };
                if parts.len() > 2 {
                    let w: std::result::Result<Vec<f64>, _> =
                        parts[2].split(',').map(|x| x.trim().parse::<f64>()).collect();
                    let w = w.map_err(|_| Error::Config(format!("bad weights in `{}`", sel)))?;
                    Self::euclidean(n, Some(&w))
                } else {
                    Self::euclidean(n, None)
                }
            }
            _ if sel.ends_with(".json") || Path::new(sel).exists() => {
                let text = std::fs::read_to_string(sel)?;
                let raw: RawGroupSpec = serde_json::from_str(&text)?;
                Self::from_raw(&raw)
            }
            other => Err(Error::UnknownGroup(other.into())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Homogeneous dimension.
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Number of horizontal (weight one) coordinates.
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn step(&self) -> usize {
        self.step
    }
    pub fn is_abelian(&self) -> bool {
        self.brackets.is_empty()
    }
    pub fn brackets(&self) -> &[(usize, usize, usize, f64)] {
        &self.brackets
    }
    pub fn horizontal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(|&j| (self.weights[j] - 1.0).abs() <= TOL)
    }

    pub fn identity(&self) -> Point {
        smallvec::smallvec![0.0; self.dim()]
    }

    /// `[x, y]_k = Σ x_i y_j c_ij^k`.
    pub fn bracket<T: Coeff>(&self, x: &[T], y: &[T]) -> SmallVec<[T; 8]> {
        let mut out: SmallVec<[T; 8]> = smallvec::smallvec![T::constant(0.0); x.len()];
        for &(i, j, k, c) in &self.brackets {
            out[k] = out[k] + T::constant(c) * (x[i] * y[j] - x[j] * y[i]);
        }
        out
    }

    /// Group product over any coefficient ring.
    pub fn product<T: Coeff>(&self, x: &[T], y: &[T]) -> SmallVec<[T; 8]> {
        let mut z: SmallVec<[T; 8]> = x.iter().zip(y).map(|(a, b)| *a + *b).collect();
        if self.brackets.is_empty() || self.step < 2 {
            return z;
        }
        let b1 = self.bracket(x, y);
        let half = T::constant(0.5);
        for k in 0..z.len() {
            z[k] = z[k] + half * b1[k];
        }
        if self.step >= 3 {
            let xb = self.bracket(x, &b1);
            let yb = self.bracket(y, &b1);
            let c = T::constant(1.0 / 12.0);
            for k in 0..z.len() {
                z[k] = z[k] + c * (xb[k] - yb[k]);
            }
            if self.step >= 4 {
                let yxb = self.bracket(y, &xb);
                let c = T::constant(1.0 / 24.0);
                for k in 0..z.len() {
                    z[k] = z[k] - c * yxb[k];
                }
            }
        }
        z
    }

    pub fn multiply(&self, g: &[f64], h: &[f64]) -> Point {
        self.product(g, h)
    }

    pub fn inverse(&self, g: &[f64]) -> Point {
        g.iter().map(|x| -x).collect()
    }

    pub fn dilate(&self, lambda: f64, g: &[f64]) -> Point {
        g.iter().zip(&self.weights).map(|(x, d)| x * lambda.powf(*d)).collect()
    }

    /// `dilate` with a checked positive factor.
    pub fn try_dilate(&self, lambda: f64, g: &[f64]) -> Result<Point> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("dilation factor {} must be positive", lambda)));
        }
        Ok(self.dilate(lambda, g))
    }

    /// Dilation written into a buffer, with precomputed factors `λ^{d_j}`.
    #[inline]
    pub fn dilate_with(factors: &[f64], g: &[f64], out: &mut [f64]) {
        for j in 0..g.len() {
            out[j] = factors[j] * g[j];
        }
    }

    pub fn dilation_factors(&self, lambda: f64) -> Point {
        self.weights.iter().map(|d| lambda.powf(*d)).collect()
    }

    /// Bounding box of the set `{ a·b : a ∈ A, b ∈ B }`.
    pub fn product_box(&self, a: &CoordBox, b: &CoordBox) -> CoordBox {
        let ia = a.intervals();
        let ib = b.intervals();
        CoordBox::from_intervals(&self.product(&ia, &ib))
    }

    /// Bounding box of the left translate `g·A`.
    pub fn translate_box(&self, g: &[f64], a: &CoordBox) -> CoordBox {
        let pt = CoordBox { lo: g.iter().cloned().collect(), hi: g.iter().cloned().collect() };
        self.product_box(&pt, a)
    }

    /// Inverse image box `A⁻¹` (coordinate negation).
    pub fn inverse_box(&self, a: &CoordBox) -> CoordBox {
        CoordBox { lo: a.hi.iter().map(|x| -x).collect(), hi: a.lo.iter().map(|x| -x).collect() }
    }

    pub fn dilate_box(&self, lambda: f64, a: &CoordBox) -> CoordBox {
        CoordBox { lo: self.dilate(lambda, &a.lo), hi: self.dilate(lambda, &a.hi) }
    }

    /// Largest errors of associativity, inversion and the dilation automorphism
    /// over `n` seeded triples drawn from `[-2, 2]^dim`.
    pub fn algebra_check(&self, n: usize, seed: u64) -> AlgebraReport {
        let d = self.dim();
        let mut r = crate::rng::stream(seed, crate::rng::region(seed, 0xA15), 0);
        let mut u = vec![0.0; 3 * d + 1];
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let mut rep = AlgebraReport { group: self.name.clone(), triples: n, ..Default::default() };
        for _ in 0..n {
            crate::rng::fill_unit(&mut r, &mut u);
            let p: Vec<f64> = u.iter().map(|x| 4.0 * x - 2.0).collect();
            let (g, h, k) = (&p[..d], &p[d..2 * d], &p[2 * d..3 * d]);
            let lam = 2f64.powf(4.0 * u[3 * d] - 2.0);
            let lhs = self.multiply(&self.multiply(g, h), k);
            let rhs = self.multiply(g, &self.multiply(h, k));
            rep.associativity = rep.associativity.max(dist(&lhs, &rhs));
            let e = self.identity();
            rep.inverse = rep
                .inverse
                .max(dist(&self.multiply(g, &self.inverse(g)), &e))
                .max(dist(&self.multiply(&self.inverse(g), g), &e));
            let a = self.dilate(lam, &self.multiply(g, h));
            let b = self.multiply(&self.dilate(lam, g), &self.dilate(lam, h));
            rep.automorphism = rep.automorphism.max(dist(&a, &b));
        }
        rep
    }

    /// True when this is `heisenberg(k)` up to naming; returns k.
    pub fn heisenberg_rank(&self) -> Option<usize> {
        let dim = self.dim();
        if dim < 3 || dim % 2 == 0 {
            return None;
        }
        let k = (dim - 1) / 2;
        let h = Self::heisenberg(k).ok()?;
        (h.weights == self.weights && h.brackets == self.brackets).then_some(k)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AlgebraReport {
    pub group: String,
    pub triples: usize,
    pub associativity: f64,
    pub inverse: f64,
    pub automorphism: f64,
}

impl AlgebraReport {
    pub fn max_error(&self) -> f64 {
        self.associativity.max(self.inverse).max(self.automorphism)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_product_sign() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let z = h.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(z.as_slice(), &[1.0, 1.0, 0.5]);
        assert_eq!(h.q(), 4.0);
        assert_eq!(h.m(), 2);
    }

    #[test]
    fn abelian_is_addition() {
        let p = GroupSpec::euclidean(2, Some(&[1.0, 2.0])).unwrap();
        assert_eq!(p.multiply(&[1.0, 2.0], &[3.0, 4.0]).as_slice(), &[4.0, 6.0]);
        assert_eq!(p.dilate(2.0, &[1.0, 1.0]).as_slice(), &[2.0, 4.0]);
        let pr = GroupSpec::parabolic_r2();
        assert_eq!((pr.q(), pr.m()), (3.0, 1));
    }

    #[test]
    fn bracket_contraction() {
        let h = GroupSpec::heisenberg(1).unwrap();
        assert_eq!(h.bracket(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).as_slice(), &[0.0, 0.0, 1.0]);
        let x = [0.3, -1.2, 2.0];
        assert!(h.bracket(&x, &x).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grading_violation_reported() {
        let raw = RawGroupSpec {
            name: "bad".into(),
            n: 2,
            weights: vec![1.0, 1.0],
            brackets: vec![RawBracket { i: 1, j: 2, k: 1, c: 1.0 }],
        };
        let rep = validate_spec(&raw);
        let g = rep.checks.iter().find(|c| c.name == "grading").unwrap();
        assert!(!g.passed);
        assert_eq!(g.offenders, vec![(1, 2, 1)]);
        assert!(GroupSpec::from_raw(&raw).is_err());
    }

    #[test]
    fn weight_normalization_violation() {
        let raw = RawGroupSpec { name: "w".into(), n: 2, weights: vec![2.0, 2.0], brackets: vec![] };
        let rep = validate_spec(&raw);
        assert!(!rep.checks.iter().find(|c| c.name == "weight_normalization").unwrap().passed);
    }

    #[test]
    fn jacobi_violation_reported() {
        // [e1,[e2,e3]] = e2 while the other two cyclic terms vanish.
        let raw = RawGroupSpec {
            name: "nj".into(),
            n: 3,
            weights: vec![1.0, 1.0, 1.0],
            brackets: vec![
                RawBracket { i: 1, j: 2, k: 3, c: 1.0 },
                RawBracket { i: 2, j: 3, k: 3, c: 1.0 },
                RawBracket { i: 1, j: 3, k: 2, c: 1.0 },
            ],
        };
        let rep = validate_spec(&raw);
        assert!(!rep.checks.iter().find(|c| c.name == "jacobi").unwrap().passed);
    }

    #[test]
    fn step_five_rejected() {
        let raw = RawGroupSpec { name: "s5".into(), n: 2, weights: vec![1.0, 5.0], brackets: vec![] };
        assert_eq!(GroupSpec::from_raw(&raw), Err(Error::UnsupportedStep { step: 5 }));
    }

    #[test]
    fn interval_box_image_contains_samples() {
        let h = GroupSpec::heisenberg(1).unwrap();
        let a = CoordBox::centered(&[1.0, 2.0, 0.5]);
        let b = CoordBox::centered(&[0.5, 0.5, 3.0]);
        let ab = h.product_box(&a, &b);
        for i in 0..50 {
            let t = i as f64 / 49.0;
            let x = [t * 2.0 - 1.0, 2.0 - 4.0 * t * t, 0.5 * (1.0 - 2.0 * t)];
            let y = [0.5 - t, 0.5 * t, -3.0 + 6.0 * t * t];
            assert!(ab.contains(&h.multiply(&x, &y)));
        }
    }

    #[test]
    fn selectors() {
        assert_eq!(GroupSpec::parse_selector("heisenberg:2").unwrap().dim(), 5);
        assert_eq!(GroupSpec::parse_selector("euclidean:2:1,2").unwrap().q(), 3.0);
        assert!(matches!(GroupSpec::parse_selector("nope"), Err(Error::UnknownGroup(_))));
        assert_eq!(GroupSpec::heisenberg(1).unwrap().heisenberg_rank(), Some(1));
        assert_eq!(GroupSpec::parabolic_r2().heisenberg_rank(), None);
    }
}

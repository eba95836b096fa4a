//! Zero-field phase diagram of the mean-field dynamics.
//!
//! Equilibria solve `m1 = tanh(a m1 + c1 m2)`, `m2 = tanh(c2 m1 + b m2)` with
//! `a = alpha j11`, `b = (1 - alpha) j22`, `c1 = (1 - alpha) j12` and
//! `c2 = alpha j12`. For `j12 != 0` the first equation is inverted into the
//! curve `m2 = gamma1(m1)` and the remaining scalar equation
//!
//! ```text
//! g(m1) = gamma1(m1) - tanh(c2 m1 + b gamma1(m1)) = 0
//! ```
//!
//! is scanned for sign changes and near-tangencies, bracketed, solved with
//! Brent's method and polished by Newton on the full system. For `j12 = 0`
//! the system splits into two scalar Curie-Weiss equations.
//!
//! Phase labels follow the case analysis in `alpha j11`, `(1 - alpha) j22`
//! and `|j12|`:
//!
//! | label | condition | equilibria |
//! |-------|-----------|------------|
//! | A1 | both subcritical, `|j12| <= j12_c` | 1 |
//! | A2 | both subcritical, `|j12| > j12_c` | 3 |
//! | B  | exactly one supercritical | 3 |
//! | C1 | both supercritical, `|j12| < j12_t` | 9 |
//! | C2 | both supercritical, `j12_t < |j12| < j12_c` | 5 |
//! | C3 | both supercritical, `|j12| >= j12_c` | 3 |

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::{eigenvalues, vector_field};
use crate::model::{free_energy, free_energy_gradient, free_energy_hessian, MagnetizationPair, ModelParams};

/// Uniform samples of the `gamma1` scan.
pub const SCAN_POINTS: usize = 4001;
/// Distance of the scan interval from `+-1`.
const EDGE_GAP: f64 = 1e-9;
/// Equilibria closer than this (sup norm) are merged.
pub const MERGE_TOL: f64 = 1e-7;
/// Eigenvalues within this of zero count as neutral.
pub const CLASSIFY_EPS: f64 = 1e-8;
/// Parameters this close to a threshold are flagged.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Target `|V|_inf` after polishing.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Final bracket width of the count bisection for the tangency threshold.
pub const TILDE_BRACKET: f64 = 1e-8;
/// Short in-band windows of the `gamma1` curve are re-sampled with
/// [`SCAN_POINTS`] points until they hold at least this many samples.
const MIN_WINDOW_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Saddle,
    Unstable,
    Neutral,
}

impl Stability {
    /// Sign pattern of `(lambda_minus, lambda_plus)` with tolerance
    /// [`CLASSIFY_EPS`].
    pub fn classify(lambda_minus: f64, lambda_plus: f64) -> Self {
        let eps = CLASSIFY_EPS;
        if lambda_minus.abs() <= eps || lambda_plus.abs() <= eps {
            Stability::Neutral
        } else if lambda_plus < -eps {
            Stability::Stable
        } else if lambda_minus > eps {
            Stability::Unstable
        } else {
            Stability::Saddle
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A zero of the mean-field vector field with its linear stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    #[serde(flatten)]
    pub m: MagnetizationPair,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub stability: Stability,
}

impl EquilibriumPoint {
    fn from_point(m: MagnetizationPair, p: &ModelParams) -> Result<Self> {
        let (lambda_minus, lambda_plus) = eigenvalues(m, p)?;
        Ok(Self {
            m,
            lambda_minus,
            lambda_plus,
            stability: Stability::classify(lambda_minus, lambda_plus),
        })
    }

    /// `|V(m)|_inf`.
    pub fn residual(&self, p: &ModelParams) -> f64 {
        let v = vector_field(self.m, p);
        v[0].abs().max(v[1].abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    A1,
    A2,
    B,
    C1,
    C2,
    C3,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 6] = [
        RegionLabel::A1,
        RegionLabel::A2,
        RegionLabel::B,
        RegionLabel::C1,
        RegionLabel::C2,
        RegionLabel::C3,
    ];

    pub fn expected_count(self) -> usize {
        match self {
            RegionLabel::A1 => 1,
            RegionLabel::A2 | RegionLabel::B | RegionLabel::C3 => 3,
            RegionLabel::C1 => 9,
            RegionLabel::C2 => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::A1 => "A1",
            RegionLabel::A2 => "A2",
            RegionLabel::B => "B",
            RegionLabel::C1 => "C1",
            RegionLabel::C2 => "C2",
            RegionLabel::C3 => "C3",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Phase of a zero-field parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRegion {
    pub label: RegionLabel,
    pub expected_count: usize,
    /// Set when the point lies within [`BOUNDARY_TOL`] of a threshold; the
    /// label is then the side the point nominally falls on.
    pub boundary: bool,
    pub j12_critical: Option<f64>,
    pub j12_tilde_critical: Option<f64>,
}

fn require_zero_field(p: &ModelParams) -> Result<()> {
    p.validate()?;
    if p.is_zero_field() {
        Ok(())
    } else {
        Err(Error::NonzeroField)
    }
}

/// `m2 = [atanh(m1) - alpha j11 m1] / ((1 - alpha) j12)`.
pub fn gamma1(m1: f64, p: &ModelParams) -> Result<f64> {
    if p.j12 == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    if !(m1.abs() < 1.0) {
        return Err(Error::Domain {
            what: "m1",
            value: m1,
            domain: "(-1, 1)",
        });
    }
    let x = m1.abs();
    Ok(m1.signum() * (x.atanh() - p.beta1() * x) / ((1.0 - p.alpha) * p.j12))
}

/// `m1 = [atanh(m2) - (1 - alpha) j22 m2] / (alpha j12)`.
pub fn gamma2(m2: f64, p: &ModelParams) -> Result<f64> {
    if p.j12 == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    if !(m2.abs() < 1.0) {
        return Err(Error::Domain {
            what: "m2",
            value: m2,
            domain: "(-1, 1)",
        });
    }
    let x = m2.abs();
    Ok(m2.signum() * (x.atanh() - p.beta2() * x) / (p.alpha * p.j12))
}

/// Reduced coefficients of the stationarity system.
#[derive(Debug, Clone, Copy)]
struct Stationarity {
    a: f64,
    b: f64,
    c1: f64,
    c2: f64,
}

impl Stationarity {
    fn new(p: &ModelParams) -> Self {
        Self {
            a: p.beta1(),
            b: p.beta2(),
            c1: (1.0 - p.alpha) * p.j12,
            c2: p.alpha * p.j12,
        }
    }

    fn gamma1(&self, x: f64) -> f64 {
        (x.atanh() - self.a * x) / self.c1
    }

    fn g(&self, x: f64) -> f64 {
        let y = self.gamma1(x);
        y - (self.c2 * x + self.b * y).tanh()
    }

    /// `F(m) = m - tanh(u(m))` and its Jacobian.
    fn system(&self, m: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let u1 = self.a * m[0] + self.c1 * m[1];
        let u2 = self.c2 * m[0] + self.b * m[1];
        let (t1, t2) = (u1.tanh(), u2.tanh());
        let (s1, s2) = (1.0 - t1 * t1, 1.0 - t2 * t2);
        (
            [m[0] - t1, m[1] - t2],
            [[1.0 - self.a * s1, -self.c1 * s1], [-self.c2 * s2, 1.0 - self.b * s2]],
        )
    }
}

fn sup2(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

fn field_residual(m: [f64; 2], p: &ModelParams) -> f64 {
    sup2(vector_field(MagnetizationPair::from(m), p))
}

/// Newton iteration on `m - tanh(u(m)) = 0`, keeping only steps that reduce
/// `|V|_inf`.
fn polish(m0: [f64; 2], eq: &Stationarity, p: &ModelParams) -> [f64; 2] {
    let mut m = m0;
    let mut best = field_residual(m, p);
    for _ in 0..30 {
        if best < 1e-15 {
            break;
        }
        let (f, j) = eq.system(m);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let d0 = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let d1 = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let next = [m[0] - d0, m[1] - d1];
        if !(next[0].abs() < 1.0 && next[1].abs() < 1.0) {
            break;
        }
        let r = field_residual(next, p);
        if r < best {
            best = r;
            m = next;
        } else {
            break;
        }
    }
    m
}

/// Brent's method on a bracket with `f(a) f(b) < 0`.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb == 0.0 {
            return b;
        }
        let tol = 4.0 * f64::EPSILON * b.abs() + 1e-300;
        if (b - a).abs() <= tol {
            return b;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let between = if lo < b { s > lo && s < b } else { s > b && s < lo };
        let reject = !between
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol);
        if reject {
            s = (a + b) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}

/// Golden-section minimization on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..100 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        if f1.min(f2) < 0.0 {
            break;
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { hi } else { lo + step * i as f64 })
}

/// Abscissas for the scan: a uniform grid, geometric clusters at `0` and at
/// `+-1`, the extrema of `gamma1`, and dense re-sampling of every short
/// window in which `gamma1` stays inside `[-1, 1]`.
fn scan_abscissas(eq: &Stationarity) -> Vec<f64> {
    let lim = 1.0 - EDGE_GAP;
    let mut xs: Vec<f64> = linspace(-lim, lim, SCAN_POINTS).collect();
    for k in 0..=160 {
        let d = 10f64.powf(-1.0 - 0.05 * k as f64);
        xs.extend([d, -d, 1.0 - d, d - 1.0]);
    }
    if eq.a > 1.0 {
        let e = (1.0 - 1.0 / eq.a).sqrt();
        xs.extend([e, -e]);
    }
    xs.push(0.0);
    xs.retain(|x| x.abs() <= lim);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    for _ in 0..3 {
        let ys: Vec<f64> = xs.iter().map(|&x| eq.gamma1(x)).collect();
        let touches = |i: usize| ys[i].min(ys[i + 1]) <= 1.0 && ys[i].max(ys[i + 1]) >= -1.0;
        let mut extra = Vec::new();
        let mut i = 0;
        while i + 1 < xs.len() {
            if !touches(i) {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < xs.len() && touches(i) {
                i += 1;
            }
            // intervals start..i touch the band; samples start..=i
            if i - start + 1 < MIN_WINDOW_SAMPLES {
                extra.extend(linspace(xs[start], xs[i], SCAN_POINTS));
            }
        }
        if extra.is_empty() {
            break;
        }
        xs.extend(extra);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
    }
    xs
}

/// Roots `m1` of `g`.
fn coupled_roots(eq: &Stationarity) -> Vec<f64> {
    let xs = scan_abscissas(eq);
    let gs: Vec<f64> = xs.iter().map(|&x| eq.g(x)).collect();
    let g = |x: f64| eq.g(x);
    let mut roots = Vec::new();
    let n = xs.len();
    for i in 0..n {
        if gs[i] == 0.0 {
            roots.push(xs[i]);
        } else if i + 1 < n && gs[i] * gs[i + 1] < 0.0 {
            roots.push(brent(g, xs[i], xs[i + 1], gs[i], gs[i + 1]));
        }
    }
    // A pair of roots closer than the sample spacing shows up as a local
    // minimum of |g| without a sign change.
    for i in 1..n.saturating_sub(1) {
        let s = gs[i].signum();
        if gs[i] == 0.0 || gs[i - 1].signum() != s || gs[i + 1].signum() != s {
            continue;
        }
        if gs[i].abs() > gs[i - 1].abs() || gs[i].abs() > gs[i + 1].abs() {
            continue;
        }
        if eq.gamma1(xs[i]).abs() > 1.0 {
            continue;
        }
        let (x_min, v_min) = golden_min(|x| s * eq.g(x), xs[i - 1], xs[i + 1]);
        if v_min < 0.0 {
            let fm = eq.g(x_min);
            roots.push(brent(g, xs[i - 1], x_min, gs[i - 1], fm));
            roots.push(brent(g, x_min, xs[i + 1], fm, gs[i + 1]));
        } else if v_min == 0.0 {
            roots.push(x_min);
        }
    }
    roots
}

/// Non-negative roots of `x = tanh(beta x)`.
fn curie_weiss_roots(beta: f64) -> Vec<f64> {
    if beta <= 1.0 {
        return vec![0.0];
    }
    let f = |x: f64| (beta * x).tanh() - x;
    let mut lo = (3.0 * (beta - 1.0) / beta.powi(3)).sqrt().min(0.5);
    while f(lo) <= 0.0 && lo > 1e-300 {
        lo *= 0.5;
    }
    let hi = 1.0;
    let r = brent(f, lo, hi, f(lo), f(hi));
    vec![0.0, r]
}

fn canonical(m: [f64; 2]) -> [f64; 2] {
    if m[0] < 0.0 || (m[0] == 0.0 && m[1] < 0.0) {
        [-m[0], -m[1]]
    } else {
        m
    }
}

/// All equilibria at zero field, sorted by `(m1, m2)`, closed under
/// negation and always containing the origin.
pub fn find_equilibria(p: &ModelParams) -> Result<Vec<EquilibriumPoint>> {
    require_zero_field(p)?;
    let eq = Stationarity::new(p);
    let mut reps: Vec<[f64; 2]> = Vec::new();
    if p.j12 == 0.0 {
        let r1 = curie_weiss_roots(eq.a);
        let r2 = curie_weiss_roots(eq.b);
        for &x in &r1 {
            for &y in &r2 {
                reps.push([x, y]);
                if x != 0.0 && y != 0.0 {
                    reps.push([x, -y]);
                }
            }
        }
    } else {
        for x in coupled_roots(&eq) {
            let m = polish([x, eq.gamma1(x)], &eq, p);
            reps.push(canonical(m));
        }
    }

    let mut merged: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for m in reps {
        if merged.iter().all(|q| sup2([q[0] - m[0], q[1] - m[1]]) >= MERGE_TOL) {
            merged.push(m);
        } else if let Some(q) = merged
            .iter_mut()
            .find(|q| sup2([q[0] - m[0], q[1] - m[1]]) < MERGE_TOL && (q[0] != 0.0 || q[1] != 0.0))
        {
            if field_residual(m, p) < field_residual(*q, p) {
                *q = m;
            }
        }
    }

    let mut points = Vec::with_capacity(2 * merged.len());
    for m in merged {
        let m = MagnetizationPair::from(m);
        points.push(EquilibriumPoint::from_point(m, p)?);
        if m != MagnetizationPair::ORIGIN {
            points.push(EquilibriumPoint::from_point(-m, p)?);
        }
    }
    points.sort_by(|x, y| x.m.m1.total_cmp(&y.m.m1).then(x.m.m2.total_cmp(&y.m.m2)));
    Ok(points)
}

/// Number of equilibria at zero field.
pub fn equilibrium_count(p: &ModelParams) -> Result<usize> {
    Ok(find_equilibria(p)?.len())
}

/// `sqrt((1 - alpha j11)(1 - (1 - alpha) j22) / (alpha (1 - alpha)))`.
pub fn j12_critical(p: &ModelParams) -> Result<f64> {
    let radicand = (1.0 - p.beta1()) * (1.0 - p.beta2()) / (p.alpha * (1.0 - p.alpha));
    if radicand < 0.0 {
        return Err(Error::Domain {
            what: "(1 - alpha j11)(1 - (1 - alpha) j22)",
            value: radicand,
            domain: "[0, inf): exactly one group is supercritical",
        });
    }
    Ok(radicand.sqrt())
}

fn require_doubly_supercritical(p: &ModelParams) -> Result<()> {
    require_zero_field(p)?;
    if p.beta1() > 1.0 && p.beta2() > 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "tangency threshold needs alpha j11 > 1 and (1 - alpha) j22 > 1, got {} and {}",
            p.beta1(),
            p.beta2()
        )))
    }
}

/// Bracket `(lo, hi)` with nine equilibria at `lo`, five at `hi` and
/// `hi - lo <= TILDE_BRACKET`.
fn tilde_bracket(p: &ModelParams) -> Result<(f64, f64)> {
    require_doubly_supercritical(p)?;
    let jc = j12_critical(p)?;
    let count = |j: f64| equilibrium_count(&p.with_j12(j));
    let at_zero = count(0.0)?;
    if at_zero != 9 {
        return Err(Error::Bisection(format!("{at_zero} equilibria at j12 = 0, expected 9")));
    }
    let mut hi = None;
    for k in 2..=9 {
        let j = jc * (1.0 - 10f64.powi(-k));
        match count(j)? {
            5 => {
                hi = Some(j);
                break;
            }
            c if c >= 7 => continue,
            c => return Err(Error::Bisection(format!("{c} equilibria at j12 = {j} below j12_c"))),
        }
    }
    let mut hi = hi.ok_or_else(|| Error::Bisection("no five-equilibria coupling below j12_c".into()))?;
    let mut lo = 0.0;
    while hi - lo > TILDE_BRACKET {
        let mid = 0.5 * (lo + hi);
        match count(mid)? {
            c if c >= 7 => lo = mid,
            5 => hi = mid,
            c => return Err(Error::Bisection(format!("{c} equilibria at j12 = {mid}"))),
        }
    }
    Ok((lo, hi))
}

/// Coupling `j12_t` in `(0, j12_c)` separating nine from five equilibria
/// when both groups are supercritical. The sign of `p.j12` is ignored.
pub fn j12_tilde_critical(p: &ModelParams) -> Result<f64> {
    let (lo, hi) = tilde_bracket(p)?;
    Ok(0.5 * (lo + hi))
}

/// Residual of the tangency system at the count-bisection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeCritical {
    pub j12: f64,
    pub bracket: (f64, f64),
    /// Tangency point refined by Newton with `j12` free.
    pub tangency_point: MagnetizationPair,
    /// Coupling solving the tangency system from that point.
    pub tangency_j12: f64,
    /// Sup norm of the three tangency equations at `(tangency_point, j12)`.
    pub residual: f64,
}

/// The three tangency equations in `(m1, m2, j12)`.
fn tangency_system(x: Vector3<f64>, p: &ModelParams) -> Vector3<f64> {
    let (m1, m2, j) = (x[0], x[1], x[2]);
    let a = p.alpha;
    let b = 1.0 - a;
    let r1 = m1 - (p.beta1() * m1 + b * j * m2).tanh();
    let r2 = m2 - (a * j * m1 + p.beta2() * m2).tanh();
    let radicand = (1.0 / (1.0 - m1 * m1) - p.beta1()) * (1.0 / (1.0 - m2 * m2) - p.beta2()) / (a * b);
    Vector3::new(r1, r2, j - radicand.sqrt())
}

fn newton3(start: Vector3<f64>, p: &ModelParams) -> Option<Vector3<f64>> {
    let mut x = start;
    for _ in 0..60 {
        let f = tangency_system(x, p);
        if !f.iter().all(|v| v.is_finite()) {
            return None;
        }
        if f.amax() < 1e-13 {
            return Some(x);
        }
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let col = (tangency_system(xp, p) - tangency_system(xm, p)) / (2.0 * h);
            jac.set_column(k, &col);
        }
        let step = jac.lu().solve(&f)?;
        x -= step;
        if !(x[0].abs() < 1.0 && x[1].abs() < 1.0) {
            return None;
        }
    }
    let f = tangency_system(x, p);
    (f.amax() < 1e-10).then_some(x)
}

/// [`j12_tilde_critical`] together with the tangency-system consistency
/// check: each non-trivial equilibrium just below the threshold seeds a
/// Newton solve of the tangency system, and the smallest residual at the
/// bisection threshold is reported.
pub fn j12_tilde_critical_checked(p: &ModelParams) -> Result<TildeCritical> {
    let (lo, hi) = tilde_bracket(p)?;
    let j = 0.5 * (lo + hi);
    let q = p.with_j12(lo);
    let mut best: Option<TildeCritical> = None;
    for e in find_equilibria(&q)? {
        if e.m == MagnetizationPair::ORIGIN {
            continue;
        }
        // Tangencies come in +- pairs; one representative is enough.
        if e.m.m1 < 0.0 {
            continue;
        }
        let Some(x) = newton3(Vector3::new(e.m.m1, e.m.m2, lo), p) else {
            continue;
        };
        let residual = tangency_system(Vector3::new(x[0], x[1], j), p).amax();
        if best.is_none_or(|b| residual < b.residual) {
            best = Some(TildeCritical {
                j12: j,
                bracket: (lo, hi),
                tangency_point: MagnetizationPair::new(x[0], x[1]),
                tangency_j12: x[2],
                residual,
            });
        }
    }
    best.ok_or_else(|| Error::Solver("tangency system did not converge from any equilibrium".into()))
}

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= BOUNDARY_TOL
}

/// Label a parameter point; `tilde` is only called in the doubly
/// supercritical case below `j12_c`.
fn classify_region(p: &ModelParams, tilde: impl FnOnce() -> Result<f64>) -> Result<PhaseRegion> {
    require_zero_field(p)?;
    let (a, b) = (p.beta1(), p.beta2());
    let j = p.j12.abs();
    let mut boundary = near(a, 1.0) || near(b, 1.0);
    let region = |label: RegionLabel, boundary: bool, jc: Option<f64>, jt: Option<f64>| PhaseRegion {
        label,
        expected_count: label.expected_count(),
        boundary,
        j12_critical: jc,
        j12_tilde_critical: jt,
    };
    if a <= 1.0 && b <= 1.0 {
        let jc = j12_critical(p)?;
        boundary |= near(j, jc);
        let label = if j <= jc { RegionLabel::A1 } else { RegionLabel::A2 };
        Ok(region(label, boundary, Some(jc), None))
    } else if (a <= 1.0) != (b <= 1.0) {
        Ok(region(RegionLabel::B, boundary, None, None))
    } else {
        let jc = j12_critical(p)?;
        boundary |= near(j, jc);
        if j >= jc {
            return Ok(region(RegionLabel::C3, boundary, Some(jc), None));
        }
        let jt = tilde()?;
        boundary |= near(j, jt);
        let label = if j < jt { RegionLabel::C1 } else { RegionLabel::C2 };
        Ok(region(label, boundary, Some(jc), Some(jt)))
    }
}

/// Phase label of a zero-field parameter point.
pub fn phase_region(p: &ModelParams) -> Result<PhaseRegion> {
    classify_region(p, || j12_tilde_critical(p))
}

/// Evenly spaced axis `lo..=hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n).collect()
    }
}

/// Sweep over `(alpha j11, j12)` at fixed `alpha` and `(1 - alpha) j22`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alpha: f64,
    pub beta2: f64,
    pub beta1_axis: GridAxis,
    pub j12_axis: GridAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub alpha_j11: f64,
    pub j12: f64,
    pub region: Option<RegionLabel>,
    pub expected_count: Option<usize>,
    /// Number of equilibria actually found.
    pub count: Option<usize>,
    pub boundary: bool,
    pub j12_tilde_critical: Option<f64>,
    pub error: Option<String>,
}

impl SweepCell {
    /// Found count equals the label's count.
    pub fn consistent(&self) -> bool {
        self.count.is_some() && self.count == self.expected_count
    }
}

/// Label and count every cell, row-major with `alpha j11` outer. The
/// tangency threshold is computed once per `alpha j11` column.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{} is not in (0, 1)", spec.alpha),
        });
    }
    for (name, axis) in [("alpha_j11 range", spec.beta1_axis), ("j12 range", spec.j12_axis)] {
        if axis.n == 0 || !axis.lo.is_finite() || !axis.hi.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                reason: "need at least one finite grid point".into(),
            });
        }
    }
    let j22 = spec.beta2 / (1.0 - spec.alpha);
    let j12s = spec.j12_axis.values();
    let columns: Vec<Vec<SweepCell>> = spec
        .beta1_axis
        .values()
        .into_par_iter()
        .map(|aj11| {
            let base = ModelParams::zero_field(spec.alpha, aj11 / spec.alpha, 0.0, j22);
            let mut tilde: Option<Result<f64>> = None;
            j12s.iter()
                .map(|&j12| {
                    let mut cell = SweepCell {
                        alpha_j11: aj11,
                        j12,
                        region: None,
                        expected_count: None,
                        count: None,
                        boundary: false,
                        j12_tilde_critical: None,
                        error: None,
                    };
                    let p = match &base {
                        Ok(b) => b.with_j12(j12),
                        Err(e) => {
                            cell.error = Some(e.to_string());
                            return cell;
                        }
                    };
                    let region = classify_region(&p, || tilde.get_or_insert_with(|| j12_tilde_critical(&p)).clone());
                    match region {
                        Ok(r) => {
                            cell.region = Some(r.label);
                            cell.expected_count = Some(r.expected_count);
                            cell.boundary = r.boundary;
                            cell.j12_tilde_critical = r.j12_tilde_critical;
                        }
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                    match equilibrium_count(&p) {
                        Ok(c) => cell.count = Some(c),
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                    cell
                })
                .collect()
        })
        .collect();
    Ok(columns.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curvature {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
    Degenerate,
}

impl Curvature {
    fn of(h: [[f64; 2]; 2]) -> Self {
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let scale = h.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if det.abs() <= 1e-12 * scale * scale {
            Curvature::Degenerate
        } else if det < 0.0 {
            Curvature::Indefinite
        } else if h[0][0] + h[1][1] > 0.0 {
            Curvature::PositiveDefinite
        } else {
            Curvature::NegativeDefinite
        }
    }

    /// Curvature a critical point of the free energy must have for the
    /// given dynamical stability.
    pub fn matches(self, s: Stability) -> bool {
        matches!(
            (self, s),
            (Curvature::PositiveDefinite, Stability::Stable)
                | (Curvature::Indefinite, Stability::Saddle)
                | (Curvature::NegativeDefinite, Stability::Unstable)
                | (Curvature::Degenerate, Stability::Neutral)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEntry {
    pub point: EquilibriumPoint,
    pub free_energy: f64,
    pub gradient_norm: f64,
    pub curvature: Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyReport {
    pub entries: Vec<FreeEnergyEntry>,
    /// Equilibrium with the lowest free energy (the `m1 >= 0` member of the pair).
    pub global_minimum: Option<EquilibriumPoint>,
    pub mismatches: Vec<String>,
}

impl FreeEnergyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Gradient tolerance of [`free_energy_check`].
pub const GRADIENT_TOL: f64 = 1e-8;

/// Compare the equilibria with the critical points of the free energy:
/// vanishing gradient, Hessian type matching stability, and the global
/// minimum among equilibria attained by a stable `+-` pair.
pub fn free_energy_check(p: &ModelParams) -> Result<FreeEnergyReport> {
    let points = find_equilibria(p)?;
    let mut entries = Vec::with_capacity(points.len());
    let mut mismatches = Vec::new();
    for e in &points {
        let g = free_energy_gradient(e.m, p)?;
        let gradient_norm = sup2(g);
        let curvature = Curvature::of(free_energy_hessian(e.m, p)?);
        let value = free_energy(e.m, p)?;
        if gradient_norm >= GRADIENT_TOL {
            mismatches.push(format!("gradient {gradient_norm:e} at ({}, {})", e.m.m1, e.m.m2));
        }
        if !curvature.matches(e.stability) {
            mismatches.push(format!(
                "{:?} curvature at {} point ({}, {})",
                curvature, e.stability, e.m.m1, e.m.m2
            ));
        }
        entries.push(FreeEnergyEntry {
            point: *e,
            free_energy: value,
            gradient_norm,
            curvature,
        });
    }
    let min = entries
        .iter()
        .filter(|x| x.point.m.m1 >= 0.0)
        .min_by(|x, y| x.free_energy.total_cmp(&y.free_energy))
        .copied();
    if let Some(min) = min {
        if min.point.stability != Stability::Stable && points.len() > 1 {
            mismatches.push(format!("free-energy minimum at {} point", min.point.stability));
        }
        let partner = entries.iter().find(|x| x.point.m == -min.point.m);
        match partner {
            Some(q) if (q.free_energy - min.free_energy).abs() <= 1e-12 * min.free_energy.abs().max(1.0) => {}
            _ if min.point.m == MagnetizationPair::ORIGIN => {}
            _ => mismatches.push("global minimum is not attained by a symmetric pair".into()),
        }
    }
    Ok(FreeEnergyReport {
        entries,
        global_minimum: min.map(|m| m.point),
        mismatches,
    })
}

//! Infinite-volume dynamics of the pair of group magnetizations.
//!
//! The law of a typical spin in group `i` is a two-point measure `q_i`
//! driven by the flux `e^{-eta (R_i + h_i)} q_i(eta)`; its mean obeys
//!
//! ```text
//! dm_i/dt = 2 sinh(R_i(m) + h_i) - 2 m_i cosh(R_i(m) + h_i)
//! ```
//!
//! which is the planar vector field [`vector_field`]. The square `[-1, 1]^2`
//! is forward invariant: on the edge `m_i = 1` the drift is
//! `-2 e^{-(R_i + h_i)} < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{local_field, MagnetizationPair, ModelParams, Population};

pub fn vector_field(m: MagnetizationPair, p: &ModelParams) -> [f64; 2] {
    let u1 = local_field(Population::First, m, p);
    let u2 = local_field(Population::Second, m, p);
    [
        2.0 * u1.sinh() - 2.0 * m.m1 * u1.cosh(),
        2.0 * u2.sinh() - 2.0 * m.m2 * u2.cosh(),
    ]
}

/// A real 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Jacobian2 {
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn is_finite(&self) -> bool {
        [self.a11, self.a12, self.a21, self.a22].iter().all(|x| x.is_finite())
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }
}

/// Full analytic Jacobian of [`vector_field`] at any point and any field.
pub fn jacobian(m: MagnetizationPair, p: &ModelParams) -> Jacobian2 {
    let a = p.alpha;
    let b = 1.0 - a;
    let u1 = local_field(Population::First, m, p);
    let u2 = local_field(Population::Second, m, p);
    // d/dx [2 sinh u - 2 m cosh u] = 2 (cosh u - m sinh u) du/dx - 2 cosh u [x == m]
    let g1 = 2.0 * (u1.cosh() - m.m1 * u1.sinh());
    let g2 = 2.0 * (u2.cosh() - m.m2 * u2.sinh());
    Jacobian2 {
        a11: g1 * a * p.j11 - 2.0 * u1.cosh(),
        a12: g1 * b * p.j12,
        a21: g2 * a * p.j12,
        a22: g2 * b * p.j22 - 2.0 * u2.cosh(),
    }
}

/// Linearization in the form it takes at an equilibrium, where
/// `m_i = tanh(R_i + h_i)` turns `cosh u - m sinh u` into
/// `(1 - m_i^2) cosh u`. Agrees with [`jacobian`] at every equilibrium and
/// nowhere else in general.
pub fn stationary_linearization(m: MagnetizationPair, p: &ModelParams) -> Jacobian2 {
    let a = p.alpha;
    let b = 1.0 - a;
    let c1 = local_field(Population::First, m, p).cosh();
    let c2 = local_field(Population::Second, m, p).cosh();
    let s1 = 1.0 - m.m1 * m.m1;
    let s2 = 1.0 - m.m2 * m.m2;
    Jacobian2 {
        a11: 2.0 * (a * p.j11 * s1 - 1.0) * c1,
        a12: 2.0 * b * p.j12 * s1 * c1,
        a21: 2.0 * a * p.j12 * s2 * c2,
        a22: 2.0 * (b * p.j22 * s2 - 1.0) * c2,
    }
}

/// Half-diagonal terms and discriminant of the closed-form eigenvalues.
fn eigen_parts(m: MagnetizationPair, p: &ModelParams) -> (f64, f64, f64) {
    let a = p.alpha;
    let b = 1.0 - a;
    let c1 = local_field(Population::First, m, p).cosh();
    let c2 = local_field(Population::Second, m, p).cosh();
    let s1 = 1.0 - m.m1 * m.m1;
    let s2 = 1.0 - m.m2 * m.m2;
    let d1 = (a * p.j11 * s1 - 1.0) * c1;
    let d2 = (b * p.j22 * s2 - 1.0) * c2;
    let disc = (d1 - d2).powi(2) + 4.0 * a * b * p.j12 * p.j12 * s1 * s2 * c1 * c2;
    (d1, d2, disc)
}

/// The expression under the square root in [`eigenvalues`].
pub fn eigen_discriminant(m: MagnetizationPair, p: &ModelParams) -> f64 {
    eigen_parts(m, p).2
}

/// Closed-form eigenvalues `(lambda_minus, lambda_plus)` of
/// [`stationary_linearization`]. Zero field only.
pub fn eigenvalues(m: MagnetizationPair, p: &ModelParams) -> Result<(f64, f64)> {
    if !p.is_zero_field() {
        return Err(Error::NonzeroField);
    }
    let (d1, d2, disc) = eigen_parts(m, p);
    let root = disc.max(0.0).sqrt();
    Ok((d1 + d2 - root, d1 + d2 + root))
}

/// Time stepping scheme for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OdeMethod {
    /// Classic fourth-order Runge-Kutta with a fixed step.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with error control.
    Adaptive { rtol: f64, atol: f64 },
}

impl Default for OdeMethod {
    fn default() -> Self {
        OdeMethod::Rk4 { dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub m0: MagnetizationPair,
    pub t_end: f64,
    pub method: OdeMethod,
    /// Stop as soon as `|V(m)|_inf < 1e-10`.
    pub stop_at_equilibrium: bool,
}

/// Convergence threshold used by `stop_at_equilibrium`.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

impl OdeConfig {
    pub fn new(m0: MagnetizationPair, t_end: f64) -> Self {
        Self {
            m0,
            t_end,
            method: OdeMethod::default(),
            stop_at_equilibrium: false,
        }
    }

    pub fn with_method(mut self, method: OdeMethod) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        MagnetizationPair::checked(self.m0.m1, self.m0.m2)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("{} is not a positive time", self.t_end),
            });
        }
        match self.method {
            OdeMethod::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("{dt} is not a positive step"),
            }),
            OdeMethod::Adaptive { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("rtol = {rtol}, atol = {atol} must both be positive"),
            }),
            _ => Ok(()),
        }
    }
}

fn axpy(m: MagnetizationPair, h: f64, k: [f64; 2]) -> MagnetizationPair {
    MagnetizationPair::new(m.m1 + h * k[0], m.m2 + h * k[1])
}

fn rk4_step(m: MagnetizationPair, h: f64, p: &ModelParams) -> MagnetizationPair {
    let k1 = vector_field(m, p);
    let k2 = vector_field(axpy(m, 0.5 * h, k1), p);
    let k3 = vector_field(axpy(m, 0.5 * h, k2), p);
    let k4 = vector_field(axpy(m, h, k3), p);
    MagnetizationPair::new(
        m.m1 + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        m.m2 + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    )
}

// Dormand-Prince 5(4) tableau (autonomous field, so the nodes are not needed).
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: fifth-order solution and scaled error norm.
fn dopri_step(m: MagnetizationPair, h: f64, p: &ModelParams, rtol: f64, atol: f64) -> (MagnetizationPair, f64) {
    let mut k = [[0.0; 2]; 7];
    for stage in 0..7 {
        let mut y = m.to_array();
        for (j, kj) in k.iter().enumerate().take(stage) {
            y[0] += h * DP_A[stage][j] * kj[0];
            y[1] += h * DP_A[stage][j] * kj[1];
        }
        k[stage] = vector_field(MagnetizationPair::from(y), p);
    }
    let mut y5 = m.to_array();
    let mut err = [0.0; 2];
    for i in 0..7 {
        for d in 0..2 {
            y5[d] += h * DP_B5[i] * k[i][d];
            err[d] += h * (DP_B5[i] - DP_B4[i]) * k[i][d];
        }
    }
    let m0 = m.to_array();
    let norm = (0..2)
        .map(|d| {
            let scale = atol + rtol * m0[d].abs().max(y5[d].abs());
            (err[d] / scale).powi(2)
        })
        .sum::<f64>()
        / 2.0;
    (MagnetizationPair::from(y5), norm.sqrt())
}

fn sup_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Numerical solution of the mean-field ODE. Returns every accepted step,
/// starting with `(0, m0)`; the last sample is at `t_end` unless the run
/// stopped early at an equilibrium.
pub fn integrate(cfg: &OdeConfig, p: &ModelParams) -> Result<Vec<(f64, MagnetizationPair)>> {
    cfg.validate()?;
    let mut out = vec![(0.0, cfg.m0)];
    let mut t = 0.0;
    let mut m = cfg.m0;
    let converged = |m: MagnetizationPair| cfg.stop_at_equilibrium && sup_norm(vector_field(m, p)) < EQUILIBRIUM_TOL;
    if converged(m) {
        return Ok(out);
    }
    match cfg.method {
        OdeMethod::Rk4 { dt } => {
            let steps = (cfg.t_end / dt).ceil() as usize;
            for i in 1..=steps {
                let t_next = (i as f64 * dt).min(cfg.t_end);
                m = rk4_step(m, t_next - t, p);
                t = t_next;
                out.push((t, m));
                if converged(m) {
                    break;
                }
            }
        }
        OdeMethod::Adaptive { rtol, atol } => {
            let mut h = (cfg.t_end * 1e-3).min(1e-2);
            let h_min = cfg.t_end * 1e-14;
            while t < cfg.t_end {
                h = h.min(cfg.t_end - t);
                let (trial, err) = dopri_step(m, h, p, rtol, atol);
                if !err.is_finite() {
                    h *= 0.2;
                } else if err <= 1.0 {
                    t = if cfg.t_end - (t + h) < h_min { cfg.t_end } else { t + h };
                    m = trial;
                    out.push((t, m));
                    if converged(m) {
                        break;
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    h *= factor;
                } else {
                    h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
                if h < h_min {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step {h:e} below minimum"),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// RK4 solution sampled exactly at the given non-decreasing times, with
/// steps no longer than `max_dt`.
pub fn integrate_on_grid(m0: MagnetizationPair, p: &ModelParams, times: &[f64], max_dt: f64) -> Result<Vec<MagnetizationPair>> {
    MagnetizationPair::checked(m0.m1, m0.m2)?;
    if !(max_dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("{max_dt} is not a positive step"),
        });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut m = m0;
    for &target in times {
        if target < t {
            return Err(Error::Precondition("time grid must be non-decreasing".into()));
        }
        let n = ((target - t) / max_dt).ceil() as usize;
        if n > 0 {
            let h = (target - t) / n as f64;
            for _ in 0..n {
                m = rk4_step(m, h, p);
            }
        }
        t = target;
        out.push(m);
    }
    Ok(out)
}

/// Two-point law on `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPoint {
    pub plus: f64,
    pub minus: f64,
}

impl TwoPoint {
    /// `sum_eta eta q(eta)`.
    pub fn mean(&self) -> f64 {
        self.plus - self.minus
    }

    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }
}

/// `q_i(+1) = (1 + m_i) / 2`, `q_i(-1) = (1 - m_i) / 2`.
pub fn measure_form(m: MagnetizationPair) -> Result<[TwoPoint; 2]> {
    let m = MagnetizationPair::checked(m.m1, m.m2)?;
    let q = |x: f64| TwoPoint {
        plus: (1.0 + x) / 2.0,
        minus: (1.0 - x) / 2.0,
    };
    Ok([q(m.m1), q(m.m2)])
}

/// Right-hand side of the two-point forward equation,
/// `(L_i q_i)(eta) = e^{eta u_i} q_i(-eta) - e^{-eta u_i} q_i(eta)` with
/// `u_i = R_i(m_q) + h_i` evaluated at the means of `q`.
pub fn two_point_rhs(q: &[TwoPoint; 2], p: &ModelParams) -> [TwoPoint; 2] {
    let m = MagnetizationPair::new(q[0].mean(), q[1].mean());
    let rhs = |qi: &TwoPoint, u: f64| {
        let out_of_plus = (-u).exp() * qi.plus;
        let out_of_minus = u.exp() * qi.minus;
        TwoPoint {
            plus: out_of_minus - out_of_plus,
            minus: out_of_plus - out_of_minus,
        }
    };
    [
        rhs(&q[0], local_field(Population::First, m, p)),
        rhs(&q[1], local_field(Population::Second, m, p)),
    ]
}

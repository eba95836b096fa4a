//! Static definition of the two-population Curie-Weiss model.
//!
//! Spins live on the complete graph and are split into two groups of sizes
//! `n1` and `n2`. Couplings are block constant (`j11` inside group 1, `j22`
//! inside group 2, `j12` across) and each group feels its own field. Every
//! quantity here depends on a configuration only through the pair of group
//! magnetizations, which is what makes the lumped `(k1, k2)` description
//! exact.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Parameter vector `(alpha, j11, j12, j22, h1, h2)`.
///
/// `alpha` is the fraction of sites in the first group. The intra-group
/// couplings must be non-negative; `j12` may take either sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub j11: f64,
    pub j12: f64,
    pub j22: f64,
    pub h1: f64,
    pub h2: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, j11: f64, j12: f64, j22: f64, h1: f64, h2: f64) -> Result<Self> {
        let p = Self {
            alpha,
            j11,
            j12,
            j22,
            h1,
            h2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `h1 = h2 = 0`.
    pub fn zero_field(alpha: f64, j11: f64, j12: f64, j22: f64) -> Result<Self> {
        Self::new(alpha, j11, j12, j22, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("j11", self.j11),
            ("j12", self.j12),
            ("j22", self.j22),
            ("h1", self.h1),
            ("h2", self.h2),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is not finite"),
                });
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{} is not in (0, 1)", self.alpha),
            });
        }
        if self.j11 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "j11",
                reason: format!("{} is negative", self.j11),
            });
        }
        if self.j22 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "j22",
                reason: format!("{} is negative", self.j22),
            });
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_j12(mut self, j12: f64) -> Self {
        self.j12 = j12;
        self
    }

    /// The same couplings and fields with `alpha` replaced by `n1 / (n1 + n2)`.
    pub fn finite_size(&self, sizes: PopulationSizes) -> Self {
        self.with_alpha(sizes.alpha())
    }

    pub fn is_zero_field(&self) -> bool {
        self.h1 == 0.0 && self.h2 == 0.0
    }

    pub fn field(&self, pop: Population) -> f64 {
        match pop {
            Population::First => self.h1,
            Population::Second => self.h2,
        }
    }

    /// `alpha * j11`, the effective inverse temperature of group 1 alone.
    pub fn beta1(&self) -> f64 {
        self.alpha * self.j11
    }

    /// `(1 - alpha) * j22`.
    pub fn beta2(&self) -> f64 {
        (1.0 - self.alpha) * self.j22
    }

    /// Exchange the roles of the two groups.
    pub fn swapped(&self) -> Self {
        Self {
            alpha: 1.0 - self.alpha,
            j11: self.j22,
            j12: self.j12,
            j22: self.j11,
            h1: self.h2,
            h2: self.h1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    First,
    Second,
}

impl Population {
    pub const BOTH: [Population; 2] = [Population::First, Population::Second];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Group sizes `(n1, n2)`, both at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PopulationSizes {
    pub n1: usize,
    pub n2: usize,
}

impl PopulationSizes {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidParameter {
                name: "n1",
                reason: "population 1 is empty".into(),
            });
        }
        if n2 == 0 {
            return Err(Error::InvalidParameter {
                name: "n2",
                reason: "population 2 is empty".into(),
            });
        }
        Ok(Self { n1, n2 })
    }

    /// Split `n` sites as `n1 = round(alpha * n)`, `n2 = n - n1`.
    pub fn split(n: usize, alpha: f64) -> Result<Self> {
        let n1 = (alpha * n as f64).round() as usize;
        Self::new(n1, n.saturating_sub(n1))
    }

    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }

    /// Finite-size fraction `n1 / (n1 + n2)`.
    pub fn alpha(&self) -> f64 {
        self.n1 as f64 / self.total() as f64
    }

    pub fn size(&self, pop: Population) -> usize {
        match pop {
            Population::First => self.n1,
            Population::Second => self.n2,
        }
    }

    /// Number of lumped states `(n1 + 1)(n2 + 1)`.
    pub fn num_states(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    /// Row-major index over `(k1, k2)`.
    pub fn index(&self, s: LumpedState) -> usize {
        s.k1 * (self.n2 + 1) + s.k2
    }

    pub fn state(&self, index: usize) -> LumpedState {
        LumpedState {
            k1: index / (self.n2 + 1),
            k2: index % (self.n2 + 1),
        }
    }

    /// All lumped states in index order.
    pub fn states(&self) -> impl Iterator<Item = LumpedState> + '_ {
        (0..self.num_states()).map(move |i| self.state(i))
    }
}

/// Number of `+1` spins in each group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LumpedState {
    pub k1: usize,
    pub k2: usize,
}

impl LumpedState {
    pub fn new(k1: usize, k2: usize) -> Self {
        Self { k1, k2 }
    }

    pub fn is_valid(&self, sizes: PopulationSizes) -> bool {
        self.k1 <= sizes.n1 && self.k2 <= sizes.n2
    }

    pub fn count(&self, pop: Population) -> usize {
        match pop {
            Population::First => self.k1,
            Population::Second => self.k2,
        }
    }

    /// `m_i = (2 k_i - n_i) / n_i`.
    pub fn magnetization(&self, sizes: PopulationSizes) -> MagnetizationPair {
        let m = |k: usize, n: usize| (2.0 * k as f64 - n as f64) / n as f64;
        MagnetizationPair::new(m(self.k1, sizes.n1), m(self.k2, sizes.n2))
    }

    /// Global spin flip `(k1, k2) -> (n1 - k1, n2 - k2)`.
    pub fn flipped(&self, sizes: PopulationSizes) -> Self {
        Self::new(sizes.n1 - self.k1, sizes.n2 - self.k2)
    }
}

/// A point `(m1, m2)` of the magnetization plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MagnetizationPair {
    pub m1: f64,
    pub m2: f64,
}

impl MagnetizationPair {
    pub const ORIGIN: Self = Self { m1: 0.0, m2: 0.0 };

    pub const fn new(m1: f64, m2: f64) -> Self {
        Self { m1, m2 }
    }

    /// Construct and require both components to lie in `[-1, 1]`.
    pub fn checked(m1: f64, m2: f64) -> Result<Self> {
        for (what, v) in [("m1", m1), ("m2", m2)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    what,
                    value: v,
                    domain: "[-1, 1]",
                });
            }
        }
        Ok(Self { m1, m2 })
    }

    pub fn in_square(&self) -> bool {
        (-1.0..=1.0).contains(&self.m1) && (-1.0..=1.0).contains(&self.m2)
    }

    pub fn get(&self, pop: Population) -> f64 {
        match pop {
            Population::First => self.m1,
            Population::Second => self.m2,
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.m1, self.m2]
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        (self.m1 - other.m1).abs().max((self.m2 - other.m2).abs())
    }
}

impl std::ops::Neg for MagnetizationPair {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.m1, -self.m2)
    }
}

impl From<[f64; 2]> for MagnetizationPair {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

/// Interaction functions `R_1(x) = a j11 x1 + (1-a) j12 x2` and
/// `R_2(x) = a j12 x1 + (1-a) j22 x2`.
pub fn interaction(pop: Population, x: MagnetizationPair, p: &ModelParams) -> f64 {
    let a = p.alpha;
    match pop {
        Population::First => a * p.j11 * x.m1 + (1.0 - a) * p.j12 * x.m2,
        Population::Second => a * p.j12 * x.m1 + (1.0 - a) * p.j22 * x.m2,
    }
}

/// `R_i(x) + h_i`.
pub fn local_field(pop: Population, x: MagnetizationPair, p: &ModelParams) -> f64 {
    interaction(pop, x, p) + p.field(pop)
}

/// Glauber rate `exp(-spin * (R_i(x) + h_i))` for a spin of the given value
/// in group `pop`.
pub fn flip_rate(spin: Spin, pop: Population, x: MagnetizationPair, p: &ModelParams) -> f64 {
    (-spin.value() * local_field(pop, x, p)).exp()
}

/// Two-population Hamiltonian evaluated at a lumped state, using the
/// finite-size fraction `n1 / N` in place of `alpha`.
pub fn hamiltonian(s: LumpedState, sizes: PopulationSizes, p: &ModelParams) -> f64 {
    let n = sizes.total() as f64;
    let a = sizes.alpha();
    let m = s.magnetization(sizes);
    let quad = a * a * p.j11 * m.m1 * m.m1
        + 2.0 * a * (1.0 - a) * p.j12 * m.m1 * m.m2
        + (1.0 - a) * (1.0 - a) * p.j22 * m.m2 * m.m2;
    -0.5 * n * quad - n * a * p.h1 * m.m1 - n * (1.0 - a) * p.h2 * m.m2
}

/// `ln[C(n1,k1) C(n2,k2)] - H_N(s)`: unnormalized log-probability of a lumped
/// state under the Gibbs measure.
pub fn gibbs_log_weight(s: LumpedState, sizes: PopulationSizes, p: &ModelParams) -> f64 {
    ln_binomial(sizes.n1 as u64, s.k1 as u64) + ln_binomial(sizes.n2 as u64, s.k2 as u64)
        - hamiltonian(s, sizes, p)
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Entropy of a symmetric Bernoulli mean, with `0 ln 0 = 0` at the endpoints.
pub fn cramer_entropy(nu: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&nu) {
        return Err(Error::Domain {
            what: "nu",
            value: nu,
            domain: "[-1, 1]",
        });
    }
    Ok(xlogx((1.0 - nu) / 2.0) + xlogx((1.0 + nu) / 2.0))
}

/// Asymptotic free energy of the Gibbs measure as a function of the
/// magnetization pair.
///
/// For nonzero fields the linear term `-a h1 nu1 - (1-a) h2 nu2` is added.
pub fn free_energy(nu: MagnetizationPair, p: &ModelParams) -> Result<f64> {
    let nu = MagnetizationPair::checked(nu.m1, nu.m2)?;
    let a = p.alpha;
    let b = 1.0 - a;
    let quad = a * a * p.j11 * nu.m1 * nu.m1
        + 2.0 * a * b * p.j12 * nu.m1 * nu.m2
        + b * b * p.j22 * nu.m2 * nu.m2;
    let field = a * p.h1 * nu.m1 + b * p.h2 * nu.m2;
    Ok(-0.5 * quad - field + a * cramer_entropy(nu.m1)? + b * cramer_entropy(nu.m2)?)
}

fn require_interior(nu: MagnetizationPair) -> Result<()> {
    for (what, v) in [("nu1", nu.m1), ("nu2", nu.m2)] {
        if !(v.abs() < 1.0) {
            return Err(Error::Singular(format!("{what} = {v}: entropy gradient diverges at |nu| = 1")));
        }
    }
    Ok(())
}

/// Analytic gradient of [`free_energy`]; zero exactly on solutions of
/// `m_i = tanh(R_i(m) + h_i)`.
pub fn free_energy_gradient(nu: MagnetizationPair, p: &ModelParams) -> Result<[f64; 2]> {
    require_interior(nu)?;
    let a = p.alpha;
    let b = 1.0 - a;
    Ok([
        a * (nu.m1.atanh() - local_field(Population::First, nu, p)),
        b * (nu.m2.atanh() - local_field(Population::Second, nu, p)),
    ])
}

/// Hessian of [`free_energy`] at an interior point.
pub fn free_energy_hessian(nu: MagnetizationPair, p: &ModelParams) -> Result<[[f64; 2]; 2]> {
    require_interior(nu)?;
    let a = p.alpha;
    let b = 1.0 - a;
    let off = -a * b * p.j12;
    Ok([
        [a * (1.0 / (1.0 - nu.m1 * nu.m1) - a * p.j11), off],
        [off, b * (1.0 / (1.0 - nu.m2 * nu.m2) - b * p.j22)],
    ])
}

//! Exact finite-N analysis of the lumped chain.
//!
//! States are indexed row-major over `(k1, k2)` (see
//! [`PopulationSizes::index`]); the same convention is used by the
//! simulator and by the exported distributions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{gibbs_log_weight, LumpedState, MagnetizationPair, ModelParams, PopulationSizes};
use crate::sim::{total_rates, Channel, LumpedRates};
use crate::stats::{compensated_sum, total_variation};

/// Default cap on `(n1 + 1)(n2 + 1)`.
pub const DEFAULT_STATE_BUDGET: usize = 4_000_000;

/// Largest state space handled by the dense null-space cross-check.
pub const DENSE_STATE_LIMIT: usize = 4096;

/// Uniformization steps are split so that `rate * dt` never exceeds this.
const UNIFORMIZATION_CHUNK: f64 = 32.0;
const POISSON_TAIL: f64 = 1e-15;

/// Generator of the lumped chain. Each row has at most four off-diagonal
/// entries (the channels of [`LumpedRates`]) and the diagonal is minus the
/// exit rate.
#[derive(Debug, Clone)]
pub struct LumpedGenerator {
    sizes: PopulationSizes,
    params: ModelParams,
    rows: Vec<LumpedRates>,
    /// Target index per channel; closed channels point back at the row.
    targets: Vec<[usize; 4]>,
}

pub fn build_generator(sizes: PopulationSizes, p: &ModelParams) -> Result<LumpedGenerator> {
    build_generator_with_budget(sizes, p, DEFAULT_STATE_BUDGET)
}

pub fn build_generator_with_budget(sizes: PopulationSizes, p: &ModelParams, budget: usize) -> Result<LumpedGenerator> {
    p.validate()?;
    let states = sizes.num_states();
    if states > budget {
        return Err(Error::BudgetExceeded { states, budget });
    }
    let rows = sizes.states().map(|s| total_rates(s, sizes, p)).collect();
    let targets = sizes
        .states()
        .map(|s| Channel::ALL.map(|c| sizes.index(c.apply(s, sizes).unwrap_or(s))))
        .collect();
    Ok(LumpedGenerator {
        sizes,
        params: *p,
        rows,
        targets,
    })
}

impl LumpedGenerator {
    pub fn sizes(&self) -> PopulationSizes {
        self.sizes
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn rates(&self, index: usize) -> &LumpedRates {
        &self.rows[index]
    }

    pub fn exit_rate(&self, index: usize) -> f64 {
        self.rows[index].total()
    }

    pub fn diagonal(&self, index: usize) -> f64 {
        -self.exit_rate(index)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.rows.iter().map(LumpedRates::total).fold(0.0, f64::max)
    }

    /// Off-diagonal entries `(target index, rate)` of one row. Closed
    /// channels carry zero rate and are skipped.
    pub fn off_diagonal(&self, index: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets[index]
            .into_iter()
            .zip(self.rows[index].as_array())
            .filter(move |&(t, rate)| t != index && rate > 0.0)
    }

    /// `diagonal + sum of off-diagonal entries` of one row.
    pub fn row_sum(&self, index: usize) -> f64 {
        self.diagonal(index) + self.off_diagonal(index).map(|(_, r)| r).sum::<f64>()
    }

    /// Entry `Q[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal(i);
        }
        self.off_diagonal(i).filter(|&(t, _)| t == j).map(|(_, r)| r).sum()
    }

    /// Row-vector product `out = p^T Q`.
    pub fn left_apply(&self, p: &[f64], out: &mut [f64]) {
        for (o, (pi, r)) in out.iter_mut().zip(p.iter().zip(&self.rows)) {
            *o = -pi * r.total();
        }
        for (i, &pi) in p.iter().enumerate() {
            for (t, rate) in self.targets[i].into_iter().zip(self.rows[i].as_array()) {
                out[t] += pi * rate;
            }
        }
    }

    /// `out = p^T (I + Q / lambda)` for `lambda >= max exit rate`. Every
    /// coefficient is non-negative, so non-negative input stays non-negative.
    pub fn uniformized_apply(&self, p: &[f64], out: &mut [f64], lambda: f64) {
        let inv = 1.0 / lambda;
        for (o, (pi, r)) in out.iter_mut().zip(p.iter().zip(&self.rows)) {
            *o = pi * (1.0 - r.total() * inv).max(0.0);
        }
        for (i, &pi) in p.iter().enumerate() {
            for (t, rate) in self.targets[i].into_iter().zip(self.rows[i].as_array()) {
                out[t] += pi * (rate * inv);
            }
        }
    }

    /// `max_j |(p^T Q)_j|`.
    pub fn residual(&self, d: &LumpedDistribution) -> f64 {
        let mut out = vec![0.0; self.num_states()];
        self.left_apply(&d.probabilities, &mut out);
        out.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Dense copy of the generator, for small state spaces.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.num_states();
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = self.diagonal(i);
            for (j, r) in self.off_diagonal(i) {
                q[(i, j)] += r;
            }
        }
        q
    }
}

/// Probability vector over the lumped states.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedDistribution {
    pub sizes: PopulationSizes,
    pub probabilities: Vec<f64>,
}

impl LumpedDistribution {
    pub fn new(sizes: PopulationSizes, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != sizes.num_states() {
            return Err(Error::InvalidParameter {
                name: "probabilities",
                reason: format!("length {} but {} states", probabilities.len(), sizes.num_states()),
            });
        }
        if probabilities.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "probabilities",
                reason: "negative or NaN entry".into(),
            });
        }
        let total = compensated_sum(probabilities.iter().copied());
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter {
                name: "probabilities",
                reason: format!("sum is {total}"),
            });
        }
        Ok(Self { sizes, probabilities })
    }

    pub fn point_mass(sizes: PopulationSizes, s: LumpedState) -> Self {
        let mut probabilities = vec![0.0; sizes.num_states()];
        probabilities[sizes.index(s)] = 1.0;
        Self { sizes, probabilities }
    }

    /// Law of the counts when every spin is independently `+1` with
    /// probability `lambda_plus`.
    pub fn product_binomial(sizes: PopulationSizes, lambda_plus: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_plus) {
            return Err(Error::InvalidParameter {
                name: "lambda_plus",
                reason: format!("{lambda_plus} is not a probability"),
            });
        }
        let pmf = |n: usize| -> Vec<f64> {
            (0..=n)
                .map(|k| {
                    let ln_c = statrs::function::factorial::ln_binomial(n as u64, k as u64);
                    let a = if k == 0 { 0.0 } else { k as f64 * lambda_plus.ln() };
                    let b = if k == n { 0.0 } else { (n - k) as f64 * (1.0 - lambda_plus).ln() };
                    (ln_c + a + b).exp()
                })
                .collect()
        };
        let p1 = pmf(sizes.n1);
        let p2 = pmf(sizes.n2);
        let probabilities = sizes.states().map(|s| p1[s.k1] * p2[s.k2]).collect();
        Ok(Self { sizes, probabilities })
    }

    /// Normalized `exp(log_weight)` computed with a max shift.
    pub fn from_log_weights(sizes: PopulationSizes, log_w: &[f64]) -> Self {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|x| (x - max).exp()).collect();
        let z = compensated_sum(w.iter().copied());
        Self {
            sizes,
            probabilities: w.into_iter().map(|x| x / z).collect(),
        }
    }

    /// Gibbs measure from [`gibbs_log_weight`].
    pub fn gibbs(sizes: PopulationSizes, p: &ModelParams) -> Self {
        let log_w: Vec<f64> = sizes.states().map(|s| gibbs_log_weight(s, sizes, p)).collect();
        Self::from_log_weights(sizes, &log_w)
    }

    pub fn prob(&self, s: LumpedState) -> f64 {
        self.probabilities[self.sizes.index(s)]
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.probabilities.iter().copied())
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        total_variation(&self.probabilities, &other.probabilities)
    }

    /// Marginal law of `k1`.
    pub fn marginal_first(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sizes.n1 + 1];
        for (i, p) in self.probabilities.iter().enumerate() {
            out[self.sizes.state(i).k1] += p;
        }
        out
    }
}

fn tail_below(weight: f64, q: f64, k: usize, tol: f64) -> bool {
    let r = q / (k + 1) as f64;
    r < 1.0 && weight * r / (1.0 - r) <= tol
}

/// Solve `dp/dt = p^T Q` from `p0` up to time `t` by uniformization.
///
/// The horizon is split into pieces with `Lambda * dt <= 32` so the Poisson
/// weights never underflow; each piece truncates the series once the
/// remaining Poisson tail is below `1e-15`.
pub fn evolve(gen: &LumpedGenerator, p0: &LumpedDistribution, t: f64) -> Result<LumpedDistribution> {
    if p0.sizes != gen.sizes {
        return Err(Error::Precondition("distribution and generator use different sizes".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("{t} is not a non-negative time"),
        });
    }
    let lambda = gen.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(p0.clone());
    }
    let pieces = ((lambda * t) / UNIFORMIZATION_CHUNK).ceil().max(1.0) as usize;
    let dt = t / pieces as f64;
    let q = lambda * dt;
    let max_terms = (q + 12.0 * q.sqrt() + 60.0) as usize;

    let n = gen.num_states();
    let mut current = p0.probabilities.clone();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for piece in 0..pieces {
        let mut weight = (-q).exp();
        term.copy_from_slice(&current);
        for (a, x) in acc.iter_mut().zip(&term) {
            *a = weight * x;
        }
        let mut k = 0usize;
        // Past the mode the tail after term k is below w_k r / (1 - r) with
        // r = q / (k + 1); summing the weights instead loses the tail to
        // rounding near 1.
        while !tail_below(weight, q, k, POISSON_TAIL) {
            k += 1;
            if k > max_terms {
                return Err(Error::StepFailure {
                    t: piece as f64 * dt,
                    reason: format!("Poisson series did not converge in {max_terms} terms"),
                });
            }
            gen.uniformized_apply(&term, &mut next, lambda);
            std::mem::swap(&mut term, &mut next);
            weight *= q / k as f64;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
        }
        std::mem::swap(&mut current, &mut acc);
    }
    Ok(LumpedDistribution {
        sizes: p0.sizes,
        probabilities: current,
    })
}

/// Evolve along a non-decreasing time grid, returning the distribution at
/// every grid time.
pub fn evolve_on_grid(gen: &LumpedGenerator, p0: &LumpedDistribution, times: &[f64]) -> Result<Vec<LumpedDistribution>> {
    let mut out = Vec::with_capacity(times.len());
    let mut current = p0.clone();
    let mut t_prev = 0.0;
    for &t in times {
        if t < t_prev {
            return Err(Error::Precondition("time grid must be non-decreasing".into()));
        }
        current = evolve(gen, &current, t - t_prev)?;
        t_prev = t;
        out.push(current.clone());
    }
    Ok(out)
}

/// Stationary law of an irreducible lumped chain.
///
/// The chain is reversible, so the answer is the normalized Gibbs weight;
/// the result is checked against `p^T Q = 0` and rejected if the residual
/// exceeds `1e-9 * max(1, Lambda)`.
pub fn stationary(gen: &LumpedGenerator) -> Result<LumpedDistribution> {
    let d = LumpedDistribution::gibbs(gen.sizes, &gen.params);
    let residual = gen.residual(&d);
    let scale = gen.max_exit_rate().max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::Solver(format!("Gibbs vector has generator residual {residual:e}")));
    }
    Ok(d)
}

/// Stationary law from a dense solve of `Q^T p = 0`, `sum p = 1` (one
/// balance equation replaced by the normalization). Independent of the Gibbs
/// formula; limited to [`DENSE_STATE_LIMIT`] states.
pub fn stationary_nullspace(gen: &LumpedGenerator) -> Result<LumpedDistribution> {
    let n = gen.num_states();
    if n > DENSE_STATE_LIMIT {
        return Err(Error::BudgetExceeded {
            states: n,
            budget: DENSE_STATE_LIMIT,
        });
    }
    let mut a = gen.to_dense().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Solver("singular balance system".into()))?;
    let probabilities: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    LumpedDistribution::new(gen.sizes, probabilities)
}

/// Expected magnetization pair under `d`.
pub fn mean_magnetization(d: &LumpedDistribution) -> MagnetizationPair {
    let mut m1 = crate::stats::CompensatedSum::default();
    let mut m2 = crate::stats::CompensatedSum::default();
    for (i, &p) in d.probabilities.iter().enumerate() {
        let m = d.sizes.state(i).magnetization(d.sizes);
        m1.add(p * m.m1);
        m2.add(p * m.m2);
    }
    MagnetizationPair::new(m1.value(), m2.value())
}

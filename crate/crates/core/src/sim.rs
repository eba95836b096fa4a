//! Exact continuous-time Glauber dynamics on the lumped chain.
//!
//! Flip rates depend on a spin only through its value and its group, so the
//! counts `(k1, k2)` of `+1` spins form a Markov chain on their own. Each
//! state has four channels (one up-flip and one down-flip per group) and is
//! advanced with the direct-method SSA.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{flip_rate, LumpedState, MagnetizationPair, ModelParams, Population, PopulationSizes, Spin};
use crate::stats::{compensated_sum, CompensatedSum};

/// Random stream used for trial `trial` of a run seeded with `seed`.
///
/// Streams of the ChaCha generator are disjoint, so every trial gets its own
/// sequence no matter which thread runs it.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordMode {
    /// One sample per jump.
    Events,
    /// Right-continuous samples on `0, dt, 2dt, ...` plus `t_end`.
    UniformGrid { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub sizes: PopulationSizes,
    pub t_end: f64,
    /// Probability that an initial spin is `+1`.
    pub lambda_plus: f64,
    pub seed: u64,
    pub record_mode: RecordMode,
}

impl SimConfig {
    pub fn new(
        params: ModelParams,
        sizes: PopulationSizes,
        t_end: f64,
        lambda_plus: f64,
        seed: u64,
        record_mode: RecordMode,
    ) -> Result<Self> {
        let cfg = Self {
            params,
            sizes,
            t_end,
            lambda_plus,
            seed,
            record_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("{} is not a positive time", self.t_end),
            });
        }
        if !(0.0..=1.0).contains(&self.lambda_plus) {
            return Err(Error::InvalidParameter {
                name: "lambda_plus",
                reason: format!("{} is not a probability", self.lambda_plus),
            });
        }
        if let RecordMode::UniformGrid { dt } = self.record_mode {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "dt",
                    reason: format!("{dt} is not a positive step"),
                });
            }
        }
        Ok(())
    }
}

/// Magnetization path of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<(f64, MagnetizationPair)>,
    pub jump_count: u64,
}

/// Draw the initial counts from the product law `lambda^{otimes N}`.
pub fn init_state<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> LumpedState {
    sample_product_law(cfg.sizes, cfg.lambda_plus, rng)
}

pub(crate) fn sample_product_law<R: Rng + ?Sized>(sizes: PopulationSizes, lambda_plus: f64, rng: &mut R) -> LumpedState {
    let draw = |n: usize, rng: &mut R| -> usize {
        // n >= 1 and lambda in [0, 1] always form a valid binomial.
        Binomial::new(n as u64, lambda_plus).expect("valid binomial").sample(rng) as usize
    };
    let k1 = draw(sizes.n1, rng);
    let k2 = draw(sizes.n2, rng);
    LumpedState::new(k1, k2)
}

/// Total rates of the four lumped channels out of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedRates {
    pub up1: f64,
    pub down1: f64,
    pub up2: f64,
    pub down2: f64,
}

impl LumpedRates {
    pub fn total(&self) -> f64 {
        self.up1 + self.down1 + self.up2 + self.down2
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.up1, self.down1, self.up2, self.down2]
    }
}

/// Which count a channel moves and in which direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Up1,
    Down1,
    Up2,
    Down2,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Up1, Channel::Down1, Channel::Up2, Channel::Down2];

    /// Target state, or `None` when the channel is closed at the boundary.
    pub fn apply(self, s: LumpedState, sizes: PopulationSizes) -> Option<LumpedState> {
        match self {
            Channel::Up1 if s.k1 < sizes.n1 => Some(LumpedState::new(s.k1 + 1, s.k2)),
            Channel::Down1 if s.k1 > 0 => Some(LumpedState::new(s.k1 - 1, s.k2)),
            Channel::Up2 if s.k2 < sizes.n2 => Some(LumpedState::new(s.k1, s.k2 + 1)),
            Channel::Down2 if s.k2 > 0 => Some(LumpedState::new(s.k1, s.k2 - 1)),
            _ => None,
        }
    }
}

/// `up_i = (n_i - k_i) * rate(-1)`, `down_i = k_i * rate(+1)`, with the rates
/// evaluated at the current magnetizations and the finite-size `alpha`.
pub fn total_rates(s: LumpedState, sizes: PopulationSizes, p: &ModelParams) -> LumpedRates {
    let q = p.finite_size(sizes);
    let m = s.magnetization(sizes);
    let up = |pop: Population| (sizes.size(pop) - s.count(pop)) as f64 * flip_rate(Spin::Down, pop, m, &q);
    let down = |pop: Population| s.count(pop) as f64 * flip_rate(Spin::Up, pop, m, &q);
    LumpedRates {
        up1: up(Population::First),
        down1: down(Population::First),
        up2: up(Population::Second),
        down2: down(Population::Second),
    }
}

/// One SSA event: exponential holding time, then a channel chosen with
/// probability proportional to its rate.
pub fn step<R: Rng + ?Sized>(
    s: LumpedState,
    t: f64,
    sizes: PopulationSizes,
    p: &ModelParams,
    rng: &mut R,
) -> (LumpedState, f64) {
    let rates = total_rates(s, sizes, p);
    step_with_rates(s, t, sizes, &rates, rng)
}

fn step_with_rates<R: Rng + ?Sized>(
    s: LumpedState,
    t: f64,
    sizes: PopulationSizes,
    rates: &LumpedRates,
    rng: &mut R,
) -> (LumpedState, f64) {
    let total = rates.total();
    let hold: f64 = Exp1.sample(rng);
    let dt = hold / total;
    let mut u = rng.random::<f64>() * total;
    let r = rates.as_array();
    let mut chosen = None;
    for (channel, rate) in Channel::ALL.into_iter().zip(r) {
        if rate > 0.0 {
            chosen = Some(channel);
            if u < rate {
                break;
            }
            u -= rate;
        }
    }
    // At least one channel is open since every group has n_i >= 1.
    let channel = chosen.expect("lumped state with no open channel");
    let next = channel.apply(s, sizes).expect("open channel has a target");
    (next, t + dt)
}

/// Advance `s` from time 0 and report the state right after every grid time.
///
/// Grid values are right-continuous: the state at `g` includes jumps at
/// times `<= g`. `grid` must be non-decreasing and start at or after 0.
pub fn lumped_on_grid<R: Rng + ?Sized>(
    s0: LumpedState,
    sizes: PopulationSizes,
    p: &ModelParams,
    grid: &[f64],
    rng: &mut R,
) -> (Vec<LumpedState>, u64) {
    let mut out = Vec::with_capacity(grid.len());
    let mut s = s0;
    let mut t = 0.0;
    let mut jumps = 0u64;
    if grid.is_empty() {
        return (out, 0);
    }
    let mut pending = step(s, t, sizes, p, rng);
    for &g in grid {
        while pending.1 <= g {
            s = pending.0;
            t = pending.1;
            jumps += 1;
            pending = step(s, t, sizes, p, rng);
        }
        out.push(s);
    }
    (out, jumps)
}

/// Lumped state at time `t` of trial `trial` (initial draw included).
pub fn lumped_state_at(cfg: &SimConfig, trial: u64, t: f64) -> LumpedState {
    let mut rng = trial_rng(cfg.seed, trial);
    let s0 = init_state(cfg, &mut rng);
    lumped_on_grid(s0, cfg.sizes, &cfg.params, &[t], &mut rng).0[0]
}

/// Grid `0, dt, 2dt, ...` with `t_end` appended when it is not on the grid.
pub fn uniform_grid(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let last = *grid.last().unwrap();
    if t_end - last > 1e-9 * dt {
        grid.push(t_end);
    } else if let Some(l) = grid.last_mut() {
        *l = t_end;
    }
    grid
}

/// Simulate one trajectory from the initial law to `t_end`. Uses the stream
/// of trial 0.
pub fn simulate(cfg: &SimConfig) -> Trajectory {
    simulate_trial(cfg, 0)
}

fn simulate_trial(cfg: &SimConfig, trial: u64) -> Trajectory {
    let mut rng = trial_rng(cfg.seed, trial);
    let s0 = init_state(cfg, &mut rng);
    match cfg.record_mode {
        RecordMode::Events => {
            let mut samples = vec![(0.0, s0.magnetization(cfg.sizes))];
            let mut s = s0;
            let mut t = 0.0;
            let mut jumps = 0u64;
            loop {
                let (next, t_next) = step(s, t, cfg.sizes, &cfg.params, &mut rng);
                if t_next > cfg.t_end {
                    break;
                }
                s = next;
                t = t_next;
                jumps += 1;
                samples.push((t, s.magnetization(cfg.sizes)));
            }
            if t < cfg.t_end {
                samples.push((cfg.t_end, s.magnetization(cfg.sizes)));
            }
            Trajectory {
                samples,
                jump_count: jumps,
            }
        }
        RecordMode::UniformGrid { dt } => {
            let grid = uniform_grid(cfg.t_end, dt);
            let (states, jumps) = lumped_on_grid(s0, cfg.sizes, &cfg.params, &grid, &mut rng);
            Trajectory {
                samples: grid
                    .iter()
                    .zip(states)
                    .map(|(&t, s)| (t, s.magnetization(cfg.sizes)))
                    .collect(),
                jump_count: jumps,
            }
        }
    }
}

/// Per-time empirical moments of the magnetization over independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<MagnetizationPair>,
    /// Unbiased sample variance; zero when `trials == 1`.
    pub variance: Vec<MagnetizationPair>,
    pub trials: usize,
    pub total_jumps: u64,
}

/// Run `trials` independent realizations on `grid`. Trial `i` uses
/// [`trial_rng`]`(cfg.seed, i)`. Results do not depend on the thread count.
pub fn ensemble(cfg: &SimConfig, trials: usize, grid: &[f64]) -> Result<EnsembleStats> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "at least one trial is required".into(),
        });
    }
    let runs: Vec<(Vec<MagnetizationPair>, u64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let s0 = init_state(cfg, &mut rng);
            let (states, jumps) = lumped_on_grid(s0, cfg.sizes, &cfg.params, grid, &mut rng);
            (states.into_iter().map(|s| s.magnetization(cfg.sizes)).collect(), jumps)
        })
        .collect();

    let n = trials as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let m1 = compensated_sum(runs.iter().map(|r| r.0[j].m1)) / n;
        let m2 = compensated_sum(runs.iter().map(|r| r.0[j].m2)) / n;
        let (v1, v2) = if trials > 1 {
            let mut s1 = CompensatedSum::default();
            let mut s2 = CompensatedSum::default();
            for r in &runs {
                s1.add((r.0[j].m1 - m1).powi(2));
                s2.add((r.0[j].m2 - m2).powi(2));
            }
            (s1.value() / (n - 1.0), s2.value() / (n - 1.0))
        } else {
            (0.0, 0.0)
        };
        mean.push(MagnetizationPair::new(m1, m2));
        variance.push(MagnetizationPair::new(v1, v2));
    }
    Ok(EnsembleStats {
        times: grid.to_vec(),
        mean,
        variance,
        trials,
        total_jumps: runs.iter().map(|r| r.1).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_params() -> ModelParams {
        ModelParams::zero_field(0.5, 0.0, 0.0, 0.0).unwrap()
    }

    fn cfg(n1: usize, n2: usize, lambda_plus: f64, mode: RecordMode) -> SimConfig {
        SimConfig::new(
            free_params(),
            PopulationSizes::new(n1, n2).unwrap(),
            1.0,
            lambda_plus,
            7,
            mode,
        )
        .unwrap()
    }

    #[test]
    fn init_state_deterministic_limits() {
        let mut rng = trial_rng(1, 0);
        let c = cfg(5, 8, 1.0, RecordMode::Events);
        assert_eq!(init_state(&c, &mut rng), LumpedState::new(5, 8));
        let c = cfg(5, 8, 0.0, RecordMode::Events);
        assert_eq!(init_state(&c, &mut rng), LumpedState::new(0, 0));
    }

    #[test]
    fn init_state_binomial_mean() {
        let c = cfg(10_000, 10_000, 0.5, RecordMode::Events);
        let mut rng = trial_rng(3, 0);
        let draws = 1000;
        let mean: f64 = (0..draws).map(|_| init_state(&c, &mut rng).k1 as f64 / 1e4).sum::<f64>() / draws as f64;
        let sigma = 0.005 / (draws as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn rates_at_boundaries() {
        let sizes = PopulationSizes::new(1, 1).unwrap();
        let r = total_rates(LumpedState::new(1, 1), sizes, &free_params());
        assert_eq!(r.as_array(), [0.0, 1.0, 0.0, 1.0]);
        let q = ModelParams::zero_field(0.4, 1.3, 0.2, 0.9).unwrap();
        let sizes = PopulationSizes::new(4, 6).unwrap();
        assert_eq!(total_rates(LumpedState::new(4, 2), sizes, &q).up1, 0.0);
    }

    #[test]
    fn full_state_only_flips_down() {
        let sizes = PopulationSizes::new(3, 4).unwrap();
        let mut rng = trial_rng(11, 0);
        for _ in 0..200 {
            let (next, t) = step(LumpedState::new(3, 4), 0.0, sizes, &free_params(), &mut rng);
            assert!(t > 0.0);
            assert!(next == LumpedState::new(2, 4) || next == LumpedState::new(3, 3));
        }
    }

    #[test]
    fn mean_holding_time() {
        let q = ModelParams::new(0.5, 1.0, 0.5, 2.0, 0.1, -0.3).unwrap();
        let sizes = PopulationSizes::new(6, 6).unwrap();
        let s = LumpedState::new(2, 5);
        let expected = 1.0 / total_rates(s, sizes, &q).total();
        let mut rng = trial_rng(5, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| step(s, 0.0, sizes, &q, &mut rng).1).sum::<f64>() / n as f64;
        assert!((mean / expected - 1.0).abs() < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn mixed_single_spins_choose_evenly() {
        let sizes = PopulationSizes::new(1, 1).unwrap();
        let mut rng = trial_rng(9, 0);
        let n = 100_000;
        let mut down1 = 0usize;
        for _ in 0..n {
            let (next, _) = step(LumpedState::new(1, 0), 0.0, sizes, &free_params(), &mut rng);
            match next {
                s if s == LumpedState::new(0, 0) => down1 += 1,
                s => assert_eq!(s, LumpedState::new(1, 1)),
            }
        }
        let f = down1 as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn event_trajectory_shape() {
        let q = ModelParams::new(0.5, 1.0, -0.5, 1.5, 0.2, 0.0).unwrap();
        let sizes = PopulationSizes::new(7, 5).unwrap();
        let c = SimConfig::new(q, sizes, 3.0, 0.3, 42, RecordMode::Events).unwrap();
        let tr = simulate(&c);
        assert_eq!(tr.samples[0].0, 0.0);
        assert_eq!(tr.samples.last().unwrap().0, 3.0);
        assert!(tr.samples.windows(2).all(|w| w[1].0 > w[0].0));
        assert_eq!(tr.samples.len() as u64, tr.jump_count + 2);
        for w in tr.samples[..tr.samples.len() - 1].windows(2) {
            let d1 = (w[1].1.m1 - w[0].1.m1).abs();
            let d2 = (w[1].1.m2 - w[0].1.m2).abs();
            let one = ((d1 - 2.0 / 7.0).abs() < 1e-12 && d2 == 0.0) || ((d2 - 2.0 / 5.0).abs() < 1e-12 && d1 == 0.0);
            assert!(one, "{d1} {d2}");
        }
    }

    #[test]
    fn seed_determinism() {
        let q = ModelParams::new(0.5, 1.0, 1.0, 1.0, 0.0, 0.1).unwrap();
        let sizes = PopulationSizes::new(30, 20).unwrap();
        let c = SimConfig::new(q, sizes, 2.0, 0.6, 123, RecordMode::Events).unwrap();
        assert_eq!(simulate(&c), simulate(&c));
        let mut other = c;
        other.seed = 124;
        assert_ne!(simulate(&c), simulate(&other));
    }

    #[test]
    fn grid_trajectory_matches_single_ensemble() {
        let q = ModelParams::zero_field(0.5, 1.0, 0.5, 1.0).unwrap();
        let sizes = PopulationSizes::new(20, 20).unwrap();
        let c = SimConfig::new(q, sizes, 1.0, 0.8, 3, RecordMode::UniformGrid { dt: 0.1 }).unwrap();
        let tr = simulate(&c);
        let grid: Vec<f64> = tr.samples.iter().map(|s| s.0).collect();
        assert_eq!(grid.len(), 11);
        let ens = ensemble(&c, 1, &grid).unwrap();
        for (s, m) in tr.samples.iter().zip(&ens.mean) {
            assert_eq!(s.1, *m);
        }
        assert!(ens.variance.iter().all(|v| v.m1 == 0.0 && v.m2 == 0.0));
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = uniform_grid(1.05, 0.1);
        assert_eq!(*g.last().unwrap(), 1.05);
        assert_eq!(g.len(), 12);
    }
}

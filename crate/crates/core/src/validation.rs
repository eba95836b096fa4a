//! Cross-checks between the particle system, the master equation and the
//! mean-field limit, plus the pinned suites behind `bicw validate`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::master::{build_generator, evolve, evolve_on_grid, mean_magnetization, stationary_nullspace, LumpedDistribution};
use crate::mean_field::integrate_on_grid;
use crate::model::{gibbs_log_weight, MagnetizationPair, ModelParams, PopulationSizes};
use crate::sim::{lumped_on_grid, sample_product_law, total_rates, trial_rng, uniform_grid, Channel};
use crate::stats::quantile;

/// Largest state space accepted by [`mc_vs_master`].
pub const MC_STATE_LIMIT: usize = 10_000;
/// RK4 step used for every ODE reference in this module.
pub const ODE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlnRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub median_sup_dev: f64,
    pub p90_sup_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlnReport {
    pub rows: Vec<LlnRow>,
}

impl LlnReport {
    /// Median deviation strictly decreasing in `N`.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median_sup_dev < w[0].median_sup_dev)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnConfig {
    pub params: ModelParams,
    pub lambda_plus: f64,
    pub n_list: Vec<usize>,
    pub t_end: f64,
    pub grid_dt: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Seed of the run at system size `n`; keeps different sizes independent.
fn size_seed(seed: u64, n: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sup-norm deviation between `N`-particle trajectories, started from the
/// product law with `P(+1) = lambda_plus`, and the ODE started at
/// `m1 = m2 = 2 lambda_plus - 1`, on a uniform grid over `[0, t_end]`.
pub fn lln_experiment(cfg: &LlnConfig) -> Result<LlnReport> {
    cfg.params.validate()?;
    if !(0.0..=1.0).contains(&cfg.lambda_plus) {
        return Err(Error::InvalidParameter {
            name: "lambda_plus",
            reason: format!("{} is not a probability", cfg.lambda_plus),
        });
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "need at least one trial".into(),
        });
    }
    let grid = uniform_grid(cfg.t_end, cfg.grid_dt);
    let m_lambda = 2.0 * cfg.lambda_plus - 1.0;
    let ode = integrate_on_grid(MagnetizationPair::new(m_lambda, m_lambda), &cfg.params, &grid, ODE_DT)?;

    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let mut rows = Vec::with_capacity(n_list.len());
    for n in n_list {
        let sizes = PopulationSizes::split(n, cfg.params.alpha)?;
        let seed = size_seed(cfg.seed, n);
        let devs: Vec<f64> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(seed, trial);
                let s0 = sample_product_law(sizes, cfg.lambda_plus, &mut rng);
                let (path, _) = lumped_on_grid(s0, sizes, &cfg.params, &grid, &mut rng);
                path.iter()
                    .zip(&ode)
                    .map(|(s, m)| s.magnetization(sizes).sup_distance(m))
                    .fold(0.0, f64::max)
            })
            .collect();
        rows.push(LlnRow {
            n: sizes.total(),
            trials: cfg.trials,
            median_sup_dev: quantile(&devs, 0.5),
            p90_sup_dev: quantile(&devs, 0.9),
        });
    }
    Ok(LlnReport { rows })
}

/// Empirical lumped law at time `t` over `trials` simulations.
pub fn empirical_law(p: &ModelParams, sizes: PopulationSizes, lambda_plus: f64, t: f64, trials: usize, seed: u64) -> Vec<f64> {
    let states: Vec<usize> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let s0 = sample_product_law(sizes, lambda_plus, &mut rng);
            sizes.index(lumped_on_grid(s0, sizes, p, &[t], &mut rng).0[0])
        })
        .collect();
    let mut hist = vec![0.0; sizes.num_states()];
    for i in states {
        hist[i] += 1.0;
    }
    hist.iter_mut().for_each(|x| *x /= trials as f64);
    hist
}

/// Total-variation distance between the Monte-Carlo law at time `t` and
/// the master-equation solution from the same initial product law.
pub fn mc_vs_master(
    p: &ModelParams,
    sizes: PopulationSizes,
    lambda_plus: f64,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if sizes.num_states() > MC_STATE_LIMIT {
        return Err(Error::Precondition(format!(
            "{} lumped states exceed the Monte-Carlo comparison limit {MC_STATE_LIMIT}",
            sizes.num_states()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "need at least one trial".into(),
        });
    }
    let gen = build_generator(sizes, p)?;
    let exact = evolve(&gen, &LumpedDistribution::product_binomial(sizes, lambda_plus)?, t)?;
    let empirical = empirical_law(p, sizes, lambda_plus, t, trials, seed);
    Ok(crate::stats::total_variation(&empirical, &exact.probabilities))
}

/// Sup over `times` of the distance between the master-equation mean
/// magnetization and the ODE solution from `m1 = m2 = 2 lambda_plus - 1`.
pub fn master_vs_ode(p: &ModelParams, sizes: PopulationSizes, lambda_plus: f64, times: &[f64]) -> Result<f64> {
    let gen = build_generator(sizes, p)?;
    let p0 = LumpedDistribution::product_binomial(sizes, lambda_plus)?;
    let laws = evolve_on_grid(&gen, &p0, times)?;
    let m = 2.0 * lambda_plus - 1.0;
    let ode = integrate_on_grid(MagnetizationPair::new(m, m), p, times, ODE_DT)?;
    Ok(laws
        .iter()
        .zip(&ode)
        .map(|(d, m)| mean_magnetization(d).sup_distance(m))
        .fold(0.0, f64::max))
}

/// Largest relative mismatch `|q(s->s') pi(s) / (q(s'->s) pi(s')) - 1|`
/// over all edges of the lumped graph, with `pi` the Gibbs weights.
pub fn detailed_balance_error(sizes: PopulationSizes, p: &ModelParams) -> f64 {
    let mut worst = 0.0f64;
    for s in sizes.states() {
        let out = total_rates(s, sizes, p).as_array();
        for (c, rate) in Channel::ALL.iter().zip(out) {
            let Some(t) = c.apply(s, sizes) else { continue };
            let back = Channel::ALL
                .iter()
                .zip(total_rates(t, sizes, p).as_array())
                .find(|(b, _)| b.apply(t, sizes) == Some(s))
                .map(|(_, r)| r)
                .expect("every lumped edge has a reverse");
            let log_ratio = rate.ln() - back.ln() + gibbs_log_weight(s, sizes, p) - gibbs_log_weight(t, sizes, p);
            worst = worst.max(log_ratio.exp_m1().abs());
        }
    }
    worst
}

/// Random parameters for the suites: `alpha` in `[0.1, 0.9]`, `j11, j22` in
/// `[0, 3]`, `j12` in `[-3, 3]`, fields in `[-1, 1]`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> ModelParams {
    ModelParams::new(
        rng.random_range(0.1..0.9),
        rng.random_range(0.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(0.0..3.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
    .expect("sampled parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Balance,
    Gibbs,
    Master,
    Lln,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Balance, Suite::Gibbs, Suite::Master, Suite::Lln];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Balance => "balance",
            Suite::Gibbs => "gibbs",
            Suite::Master => "master",
            Suite::Lln => "lln",
        }
    }

    pub fn parse(s: &str) -> Option<Vec<Suite>> {
        match s {
            "all" => Some(Self::ALL.to_vec()),
            _ => Self::ALL.into_iter().find(|x| x.name() == s).map(|x| vec![x]),
        }
    }
}

/// One measured quantity against its threshold (`value < threshold` passes
/// unless stated otherwise in `name`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
        }
    }

    fn error(name: impl Into<String>, e: &Error) -> Self {
        Self {
            name: format!("{}: {e}", name.into()),
            value: f64::NAN,
            threshold: f64::NAN,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

/// Seed shared by the pinned suites.
pub const SUITE_SEED: u64 = 20_240_611;

fn balance_suite() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let sizes = PopulationSizes::new(4, 4).expect("positive sizes");
    let worst = (0..100)
        .map(|_| detailed_balance_error(sizes, &random_params(&mut rng)))
        .fold(0.0, f64::max);
    vec![Check::below("detailed balance, 100 draws, n1=n2=4 (max relative error)", worst, 1e-12)]
}

fn gibbs_suite() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED ^ 1);
    let sizes = PopulationSizes::new(3, 3).expect("positive sizes");
    let mut tv = 0.0f64;
    let mut residual = 0.0f64;
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let gen = match build_generator(sizes, &p) {
            Ok(g) => g,
            Err(e) => return vec![Check::error("generator", &e)],
        };
        let gibbs = LumpedDistribution::gibbs(sizes, &p);
        match stationary_nullspace(&gen) {
            Ok(d) => tv = tv.max(d.total_variation(&gibbs)),
            Err(e) => return vec![Check::error("null space", &e)],
        }
        residual = residual.max(gen.residual(&gibbs));
    }
    vec![
        Check::below("null space vs Gibbs, 20 draws, n1=n2=3 (max TV)", tv, 1e-10),
        Check::below("Gibbs residual |p^T Q|_inf, 20 draws", residual, 1e-9),
    ]
}

/// Ferromagnetic, antiferromagnetic and field-driven parameter sets used by
/// the Monte-Carlo comparisons.
pub fn mc_parameter_sets() -> [(&'static str, ModelParams); 3] {
    [
        ("ferro", ModelParams::zero_field(0.5, 1.0, 1.0, 1.0).expect("valid")),
        ("antiferro", ModelParams::zero_field(0.5, 1.0, -1.0, 1.0).expect("valid")),
        ("fields", ModelParams::new(0.5, 1.2, 0.6, 0.8, 0.4, -0.3).expect("valid")),
    ]
}

fn master_suite() -> Vec<Check> {
    let sizes = PopulationSizes::new(3, 3).expect("positive sizes");
    let mut checks = Vec::new();
    for (i, (name, p)) in mc_parameter_sets().into_iter().enumerate() {
        let label = format!("MC vs master, {name}, n1=n2=3, t=1, 1e5 trials (TV)");
        match mc_vs_master(&p, sizes, 0.5, 1.0, 100_000, SUITE_SEED + i as u64) {
            Ok(tv) => checks.push(Check::below(label, tv, 0.02)),
            Err(e) => checks.push(Check::error(label, &e)),
        }
    }
    let p = ModelParams::zero_field(0.5, 1.0, 0.5, 1.0).expect("valid");
    let grid = uniform_grid(5.0, 0.05);
    let label = "master mean vs ODE, A1, n1=n2=200, [0,5] (sup deviation)";
    match master_vs_ode(&p, PopulationSizes::new(200, 200).expect("positive sizes"), 0.75, &grid) {
        Ok(d) => checks.push(Check::below(label, d, 0.02)),
        Err(e) => checks.push(Check::error(label, &e)),
    }
    checks
}

fn lln_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let free = LlnConfig {
        params: ModelParams::zero_field(0.5, 0.0, 0.0, 0.0).expect("valid"),
        lambda_plus: 1.0,
        n_list: vec![10_000],
        t_end: 2.0,
        grid_dt: 0.01,
        trials: 20,
        seed: SUITE_SEED,
    };
    let label = "free spins, N=1e4 (median sup deviation)";
    match lln_experiment(&free) {
        Ok(r) => checks.push(Check::below(label, r.rows[0].median_sup_dev, 0.05)),
        Err(e) => checks.push(Check::error(label, &e)),
    }
    let decay = LlnConfig {
        params: ModelParams::zero_field(0.5, 1.0, 0.5, 1.0).expect("valid"),
        lambda_plus: 0.75,
        n_list: vec![100, 400, 1600],
        t_end: 2.0,
        grid_dt: 0.01,
        trials: 100,
        seed: SUITE_SEED,
    };
    let label = "A1 median deviation decreasing over N=100,400,1600 (last ratio, must be < 1)";
    match lln_experiment(&decay) {
        Ok(r) => {
            let ratio = r.rows[2].median_sup_dev / r.rows[1].median_sup_dev;
            checks.push(Check {
                name: label.into(),
                value: ratio,
                threshold: 1.0,
                passed: r.strictly_decreasing(),
            });
        }
        Err(e) => checks.push(Check::error(label, &e)),
    }
    checks
}

/// Run one pinned suite.
pub fn run_suite(suite: Suite) -> SuiteReport {
    let start = Instant::now();
    let checks = match suite {
        Suite::Balance => balance_suite(),
        Suite::Gibbs => gibbs_suite(),
        Suite::Master => master_suite(),
        Suite::Lln => lln_suite(),
    };
    SuiteReport {
        suite,
        passed: checks.iter().all(|c| c.passed),
        seconds: start.elapsed().as_secs_f64(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!(Suite::parse("all").unwrap().len(), 4);
        assert_eq!(Suite::parse("gibbs").unwrap(), vec![Suite::Gibbs]);
        assert!(Suite::parse("nope").is_none());
    }

    #[test]
    fn balance_and_gibbs_suites_pass() {
        for s in [Suite::Balance, Suite::Gibbs] {
            let r = run_suite(s);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn free_spins_mean_solves_ode_exactly() {
        let p = ModelParams::zero_field(0.5, 0.0, 0.0, 0.0).unwrap();
        let grid = uniform_grid(2.0, 0.1);
        let d = master_vs_ode(&p, PopulationSizes::new(5, 5).unwrap(), 0.9, &grid).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn mc_limit_enforced() {
        let p = ModelParams::zero_field(0.5, 1.0, 1.0, 1.0).unwrap();
        let s = PopulationSizes::new(100, 100).unwrap();
        assert!(matches!(mc_vs_master(&p, s, 0.5, 1.0, 10, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn lln_reproducible() {
        let cfg = LlnConfig {
            params: ModelParams::zero_field(0.6, 2.0, 0.7, 3.0).unwrap(),
            lambda_plus: 0.75,
            n_list: vec![200, 50],
            t_end: 1.0,
            grid_dt: 0.05,
            trials: 8,
            seed: 3,
        };
        let a = lln_experiment(&cfg).unwrap();
        assert_eq!(a, lln_experiment(&cfg).unwrap());
        assert_eq!(a.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![50, 200]);
        assert!(a.rows.iter().all(|r| r.median_sup_dev >= 0.0 && r.p90_sup_dev >= r.median_sup_dev));
    }
}

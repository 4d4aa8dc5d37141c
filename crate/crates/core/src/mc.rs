//! Monte-Carlo semivalue estimation with multi-chain Gelman-Rubin stopping.
//!
//! Each chain runs the sampling loop independently: per valued point and
//! iteration, draw a cardinality k uniformly from [1, n], draw a subset S of
//! the other points with |S| = k - 1 uniformly, and fold the increment
//! `w~(k) * (U(S + z) - U(S))` into a running mean. Chains are compared with
//! the Gelman-Rubin statistic every 100 iterations; sampling stops once every
//! point's R-hat falls below the threshold or the iteration cap is hit.
//!
//! Chain c draws from ChaCha stream (seed, c), so results are bit-identical
//! for any execution interleaving or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PointId;
use crate::error::{Error, Result};
use crate::exact::{ValueEntry, ValueMode, ValueVector};
use crate::game::Utility;
use crate::rng::{partial_shuffle, rng_for_stream, uniform_below};
use crate::weights::WeightScheme;

/// Convergence is evaluated at iteration multiples of this barrier.
pub const CHECK_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Independent chains; at least 2 (between-chain variance must exist).
    pub chains: usize,
    /// Gelman-Rubin termination threshold, strictly above 1.
    pub rho: f64,
    /// Iterations per chain before the first convergence check.
    pub min_iterations_per_chain: usize,
    /// Hard cap per chain; hitting it flags the report as non-converged.
    pub max_iterations_per_chain: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            chains: 10,
            rho: 1.0005,
            min_iterations_per_chain: 100,
            max_iterations_per_chain: 50_000,
            seed: 0,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.chains < 2 {
            return Err(Error::InvalidParameter(
                "Gelman-Rubin needs at least 2 chains".into(),
            ));
        }
        if self.rho.is_nan() || self.rho <= 1.0 {
            return Err(Error::InvalidParameter("rho must exceed 1".into()));
        }
        if self.min_iterations_per_chain < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 iterations per chain".into(),
            ));
        }
        if self.max_iterations_per_chain < self.min_iterations_per_chain {
            return Err(Error::InvalidParameter(
                "max iterations must be >= min iterations".into(),
            ));
        }
        Ok(())
    }
}

/// Running mean and squared-deviation sum of one point's increments within
/// one chain (Welford update).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChainState {
    mean: f64,
    m2: f64,
    count: u64,
}

impl ChainState {
    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance of the increments seen so far.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// Gelman-Rubin statistic for one scalar tracked by several chains:
/// `R = sqrt((B-1)/B + Bhat / (B * W))` with `W` the mean within-chain
/// variance and `Bhat = B * var(chain means)`.
///
/// Fully degenerate input (all chains constant and identical) returns 1 by
/// convention; constant chains that disagree return infinity.
pub fn gelman_rubin(
    chain_means: &[f64],
    chain_variances: &[f64],
    iterations_per_chain: usize,
) -> Result<f64> {
    let c = chain_means.len();
    if c < 2 || chain_variances.len() != c {
        return Err(Error::InsufficientData(
            "need means and variances from at least 2 chains".into(),
        ));
    }
    if iterations_per_chain < 2 {
        return Err(Error::InsufficientData(
            "each chain needs at least 2 iterations".into(),
        ));
    }
    let b = iterations_per_chain as f64;
    let w = chain_variances.iter().sum::<f64>() / c as f64;
    let grand = chain_means.iter().sum::<f64>() / c as f64;
    let var_means = chain_means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (c - 1) as f64;
    let b_hat = b * var_means;
    if w == 0.0 {
        return Ok(if b_hat == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(((b - 1.0) / b + b_hat / (b * w)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Monte-Carlo estimate plus its convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub values: ValueVector,
    /// Per-point standard error: sd(chain means) / sqrt(chains).
    pub standard_errors: Vec<f64>,
    /// Per-point Gelman-Rubin statistic at termination.
    pub rhat: Vec<f64>,
    pub chains: usize,
    pub iterations_per_chain: usize,
    /// Utility invocations actually performed (zero-weight draws skip both).
    pub total_utility_evaluations: u64,
    pub terminated_by: Termination,
}

impl ValueReport {
    pub fn converged(&self) -> bool {
        self.terminated_by == Termination::Converged
    }
}

struct Chain {
    rng: rand_chacha::ChaCha8Rng,
    states: Vec<ChainState>,
    evals: u64,
}

fn run_segment<U: Utility + ?Sized>(
    chain: &mut Chain,
    iterations: usize,
    u: &U,
    weights: &[f64],
) -> Result<()> {
    let ids = u.ids();
    let n = ids.len();
    let mut others: Vec<usize> = Vec::with_capacity(n - 1);
    let mut subset: Vec<PointId> = Vec::with_capacity(n);
    for _ in 0..iterations {
        for p in 0..n {
            let k = uniform_below(&mut chain.rng, n as u64) as usize + 1;
            others.clear();
            others.extend((0..n).filter(|&q| q != p));
            partial_shuffle(&mut chain.rng, &mut others, k - 1);
            let w = weights[k - 1];
            let x = if w == 0.0 {
                0.0
            } else {
                subset.clear();
                subset.extend(others[..k - 1].iter().map(|&q| ids[q]));
                let without = u.eval(&subset)?;
                subset.push(ids[p]);
                let with = u.eval(&subset)?;
                chain.evals += 2;
                w * (with - without)
            };
            chain.states[p].update(x);
        }
    }
    Ok(())
}

fn rhat_per_point(chains: &[Chain], n: usize, iterations: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|p| {
            let means: Vec<f64> = chains.iter().map(|c| c.states[p].mean()).collect();
            let vars: Vec<f64> = chains.iter().map(|c| c.states[p].variance()).collect();
            gelman_rubin(&means, &vars, iterations)
        })
        .collect()
}

/// Estimate the semivalue of every point under `scheme` by Monte-Carlo
/// sampling. The estimator is unbiased for the exact semivalue; the returned
/// value is the average of the chain means.
pub fn mc_estimate<U: Utility + ?Sized>(
    u: &U,
    scheme: &WeightScheme,
    config: &McConfig,
) -> Result<ValueReport> {
    config.validate()?;
    let n = u.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "Monte-Carlo estimation needs at least 2 points".into(),
        ));
    }
    if scheme.n() != n {
        return Err(Error::InvalidParameter(format!(
            "scheme is over {} cardinalities, game has {n} points",
            scheme.n()
        )));
    }
    let weights = scheme.normalized();

    let mut chains: Vec<Chain> = (0..config.chains)
        .map(|c| Chain {
            rng: rng_for_stream(config.seed, c as u64),
            states: vec![ChainState::default(); n],
            evals: 0,
        })
        .collect();

    let mut done = 0usize;
    let mut rhat = vec![f64::INFINITY; n];
    let mut terminated_by = Termination::MaxIterations;
    loop {
        let target = ((done / CHECK_INTERVAL + 1) * CHECK_INTERVAL)
            .min(config.max_iterations_per_chain);
        let step = target - done;
        chains
            .par_iter_mut()
            .try_for_each(|chain| run_segment(chain, step, u, weights))?;
        done = target;
        if done >= config.min_iterations_per_chain {
            rhat = rhat_per_point(&chains, n, done)?;
            if rhat.iter().all(|r| *r < config.rho) {
                terminated_by = Termination::Converged;
                break;
            }
        }
        if done >= config.max_iterations_per_chain {
            break;
        }
    }

    let c = config.chains as f64;
    let mut entries = Vec::with_capacity(n);
    let mut standard_errors = Vec::with_capacity(n);
    for p in 0..n {
        let means: Vec<f64> = chains.iter().map(|ch| ch.states[p].mean()).collect();
        let value = means.iter().sum::<f64>() / c;
        let var = means.iter().map(|m| (m - value) * (m - value)).sum::<f64>()
            / (c - 1.0);
        entries.push(ValueEntry {
            id: u.ids()[p],
            value,
        });
        standard_errors.push((var / c).sqrt());
    }
    Ok(ValueReport {
        values: ValueVector {
            mode: ValueMode::Mc,
            scheme: scheme.clone(),
            entries,
        },
        standard_errors,
        rhat,
        chains: config.chains,
        iterations_per_chain: done,
        total_utility_evaluations: chains.iter().map(|c| c.evals).sum(),
        terminated_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::semivalue_exact;
    use crate::game::TableUtility;
    use crate::weights::BetaParams;

    fn beta_scheme(n: usize, a: f64, b: f64) -> WeightScheme {
        WeightScheme::beta(n, BetaParams::new(a, b).unwrap()).unwrap()
    }

    #[test]
    fn chain_state_mean_matches_replay_log() {
        let mut rng = crate::rng::rng_from_seed(1);
        let log: Vec<f64> = (0..977).map(|_| crate::rng::next_f64(&mut rng) - 0.3).collect();
        let mut state = ChainState::default();
        for &x in &log {
            state.update(x);
        }
        let naive = log.iter().sum::<f64>() / log.len() as f64;
        assert!((state.mean() - naive).abs() < 1e-12);
        assert_eq!(state.count(), log.len() as u64);
    }

    #[test]
    fn gelman_rubin_degenerate_conventions() {
        // identical constant chains
        assert_eq!(gelman_rubin(&[2.0, 2.0, 2.0], &[0.0, 0.0, 0.0], 50).unwrap(), 1.0);
        // constant chains that disagree never converge
        assert_eq!(
            gelman_rubin(&[1.0, 2.0], &[0.0, 0.0], 50).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn gelman_rubin_equal_means_formula() {
        let b = 10_000usize;
        let r = gelman_rubin(&[0.7, 0.7], &[1.3, 1.3], b).unwrap();
        let want = ((b as f64 - 1.0) / b as f64).sqrt();
        assert_eq!(r, want);
        assert!(r < 1.0);
    }

    #[test]
    fn gelman_rubin_converges_for_iid_chains() {
        let b = 100_000;
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|c| {
                let mut src = crate::rng::NormalSource::new(rng_for_stream(3, c));
                (0..b).map(|_| src.next_normal()).collect()
            })
            .collect();
        let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / b as f64).collect();
        let vars: Vec<f64> = chains
            .iter()
            .zip(&means)
            .map(|(c, m)| c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64)
            .collect();
        let r = gelman_rubin(&means, &vars, b).unwrap();
        assert!((r - 1.0).abs() < 0.01, "r = {r}");
    }

    #[test]
    fn gelman_rubin_insufficient_data() {
        assert!(gelman_rubin(&[1.0], &[1.0], 10).is_err());
        assert!(gelman_rubin(&[1.0, 2.0], &[1.0, 1.0], 1).is_err());
    }

    #[test]
    fn constant_utility_estimates_zero_and_converges_immediately() {
        let ids = (0..5u64).map(PointId).collect();
        let g = TableUtility::from_fn(ids, |_| 4.5).unwrap();
        let scheme = beta_scheme(5, 1.0, 1.0);
        let report = mc_estimate(&g, &scheme, &McConfig::default()).unwrap();
        assert!(report.converged());
        assert_eq!(report.iterations_per_chain, 100);
        assert!(report.values.entries.iter().all(|e| e.value == 0.0));
        assert!(report.rhat.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn same_seed_reproduces_report_bitwise() {
        let g = TableUtility::random_game(6, 11).unwrap();
        let scheme = beta_scheme(6, 4.0, 1.0);
        let config = McConfig {
            max_iterations_per_chain: 300,
            seed: 42,
            ..McConfig::default()
        };
        let a = mc_estimate(&g, &scheme, &config).unwrap();
        let b = mc_estimate(&g, &scheme, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let g = TableUtility::random_game(6, 13).unwrap();
        let scheme = beta_scheme(6, 1.0, 1.0);
        let config = McConfig {
            max_iterations_per_chain: 200,
            seed: 9,
            ..McConfig::default()
        };
        let parallel = mc_estimate(&g, &scheme, &config).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_estimate(&g, &scheme, &config))
            .unwrap();
        assert_eq!(parallel, single);
    }

    #[test]
    fn converges_close_to_exact_on_small_game() {
        let g = TableUtility::random_game(8, 3).unwrap();
        let scheme = beta_scheme(8, 1.0, 1.0);
        let exact = semivalue_exact(&g, &scheme).unwrap();
        let report = mc_estimate(
            &g,
            &scheme,
            &McConfig {
                seed: 20,
                ..McConfig::default()
            },
        )
        .unwrap();
        assert!(report.converged());
        for (i, (mc, ex)) in report
            .values
            .entries
            .iter()
            .zip(&exact.entries)
            .enumerate()
        {
            let err = (mc.value - ex.value).abs();
            assert!(
                err <= 3.0 * report.standard_errors[i],
                "point {i}: err {err} > 3 se {}",
                report.standard_errors[i]
            );
        }
    }

    #[test]
    fn explicit_uniform_weights_factor_identically() {
        let g = TableUtility::random_game(7, 21).unwrap();
        let beta = beta_scheme(7, 1.0, 1.0);
        let explicit = WeightScheme::explicit_normalized(7, vec![1.0; 7]).unwrap();
        let config = McConfig {
            max_iterations_per_chain: 200,
            seed: 5,
            ..McConfig::default()
        };
        let a = mc_estimate(&g, &beta, &config).unwrap();
        let b = mc_estimate(&g, &explicit, &config).unwrap();
        assert_eq!(a.values.entries, b.values.entries);
        assert_eq!(a.rhat, b.rhat);
        assert_eq!(a.total_utility_evaluations, b.total_utility_evaluations);
    }

    #[test]
    fn zero_weight_cardinalities_skip_utility_calls() {
        let g = TableUtility::random_game(6, 2).unwrap();
        let loo = WeightScheme::loo_last(6).unwrap();
        let config = McConfig {
            min_iterations_per_chain: 100,
            max_iterations_per_chain: 100,
            ..McConfig::default()
        };
        let report = mc_estimate(&g, &loo, &config).unwrap();
        // only k = n draws evaluate: expect ~ 2 * draws / n evaluations
        let draws = (config.chains * 100 * 6) as u64;
        assert!(report.total_utility_evaluations < draws);
        assert!(report.total_utility_evaluations > 0);
    }

    #[test]
    fn estimator_is_unbiased_over_many_runs() {
        let g = TableUtility::random_game(8, 77).unwrap();
        let scheme = beta_scheme(8, 4.0, 1.0);
        let exact = semivalue_exact(&g, &scheme).unwrap();
        let runs = 200;
        let mut sums = [0.0; 8];
        let mut sq = [0.0; 8];
        for seed in 0..runs {
            let report = mc_estimate(
                &g,
                &scheme,
                &McConfig {
                    chains: 2,
                    min_iterations_per_chain: 500,
                    max_iterations_per_chain: 500,
                    rho: 1.0001,
                    seed: 1000 + seed,
                },
            )
            .unwrap();
            for (p, e) in report.values.entries.iter().enumerate() {
                sums[p] += e.value;
                sq[p] += e.value * e.value;
            }
        }
        for p in 0..8 {
            let grand = sums[p] / runs as f64;
            let var = (sq[p] - sums[p] * sums[p] / runs as f64) / (runs - 1) as f64;
            let se = (var / runs as f64).sqrt();
            let gap = (grand - exact.entries[p].value).abs();
            assert!(gap <= 4.0 * se, "point {p}: gap {gap}, se {se}");
        }
    }

    #[test]
    fn doubling_iterations_does_not_hurt_accuracy() {
        let g = TableUtility::random_game(8, 55).unwrap();
        let scheme = beta_scheme(8, 1.0, 1.0);
        let exact = semivalue_exact(&g, &scheme).unwrap();
        let avg_max_err = |iters: usize| {
            let mut total = 0.0;
            for seed in 0..20 {
                let report = mc_estimate(
                    &g,
                    &scheme,
                    &McConfig {
                        chains: 2,
                        min_iterations_per_chain: iters,
                        max_iterations_per_chain: iters,
                        rho: 1.0001,
                        seed: 4000 + seed,
                    },
                )
                .unwrap();
                total += report
                    .values
                    .entries
                    .iter()
                    .zip(&exact.entries)
                    .map(|(a, b)| (a.value - b.value).abs())
                    .fold(0.0f64, f64::max);
            }
            total / 20.0
        };
        let e250 = avg_max_err(250);
        let e500 = avg_max_err(500);
        let e1000 = avg_max_err(1000);
        assert!(e500 <= e250, "{e500} > {e250}");
        assert!(e1000 <= e500, "{e1000} > {e500}");
    }

    #[test]
    fn config_validation() {
        let g = TableUtility::random_game(4, 1).unwrap();
        let scheme = beta_scheme(4, 1.0, 1.0);
        let bad = McConfig {
            chains: 1,
            ..McConfig::default()
        };
        assert!(mc_estimate(&g, &scheme, &bad).is_err());
        let bad = McConfig {
            rho: 1.0,
            ..McConfig::default()
        };
        assert!(mc_estimate(&g, &scheme, &bad).is_err());
    }
}

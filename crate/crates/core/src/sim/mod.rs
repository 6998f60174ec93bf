//! Unsealed-transaction backlog under Poisson load.
//!
//! Each second `t` brings `A_t ~ Poisson(lambda / T)` new transactions and
//! the chain can seal `c_t = floor(mu * (t + 1)) - floor(mu * t)` of them, so
//! fractional sealing capacity carries over while idle whole-transaction
//! capacity is lost. The backlog follows
//! `B_{t+1} = max(0, B_t + A_t - c_t)` from `B_0 = 0`, and its end-of-horizon
//! value is compared against the closed form `max(0, lambda - mu * T)`.

pub mod capacity;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

pub use capacity::{
    capacity_grid, encounters_per_day, sidechains_needed, tx_per_patient_day, CapacityQuery,
    ChainPreset, DEFAULT_TX_PER_PATIENT_DAY, REFERENCE_PATIENT_COUNTS,
};

/// Seconds in a simulated day.
pub const DAY_SECONDS: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("arrival rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("sealing rate must be finite and positive, got {0}")]
    InvalidSealRate(f64),
    #[error("horizon must be at least one second")]
    EmptyHorizon,
    #[error("division by zero encounters")]
    DivideByZero,
    #[error("sweep needs at least one sealing rate")]
    EmptySweep,
}

/// Poisson arrival description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    /// Expected arrivals over the horizon (a day by default).
    pub lambda_day: f64,
    pub horizon_seconds: u64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn per_day(lambda_day: f64, seed: u64) -> Self {
        WorkloadSpec {
            lambda_day,
            horizon_seconds: DAY_SECONDS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.lambda_day.is_finite() || self.lambda_day < 0.0 {
            return Err(SimError::InvalidRate(self.lambda_day));
        }
        if self.horizon_seconds == 0 {
            return Err(SimError::EmptyHorizon);
        }
        Ok(())
    }

    pub fn per_second_mean(&self) -> f64 {
        self.lambda_day / self.horizon_seconds as f64
    }
}

/// A chain technology's sealing throughput.
#[derive(Debug, Clone, PartialEq)]
pub struct SealModel {
    pub name: String,
    pub mu_tps: f64,
}

impl SealModel {
    pub fn new(name: impl Into<String>, mu_tps: f64) -> Result<Self, SimError> {
        if !mu_tps.is_finite() || mu_tps <= 0.0 {
            return Err(SimError::InvalidSealRate(mu_tps));
        }
        Ok(SealModel {
            name: name.into(),
            mu_tps,
        })
    }

    /// Whole transactions sealable during second `t`.
    pub fn credit(&self, t: u64) -> u64 {
        let cum = |s: u64| (self.mu_tps * s as f64).floor() as u64;
        cum(t + 1) - cum(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimResult {
    pub end_backlog: u64,
    /// Backlog after each second, when requested.
    pub trajectory: Option<Vec<u64>>,
    pub sealed_total: u64,
    pub arrived_total: u64,
}

fn arrival_stream(spec: &WorkloadSpec) -> Result<impl Iterator<Item = u64>, SimError> {
    spec.validate()?;
    let mean = spec.per_second_mean();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = if mean > 0.0 {
        Some(Poisson::new(mean).map_err(|_| SimError::InvalidRate(spec.lambda_day))?)
    } else {
        None
    };
    Ok((0..spec.horizon_seconds).map(move |_| match &dist {
        Some(d) => d.sample(&mut rng) as u64,
        None => 0,
    }))
}

/// Per-second arrival counts over the horizon.
pub fn poisson_arrivals(spec: &WorkloadSpec) -> Result<Vec<u64>, SimError> {
    Ok(arrival_stream(spec)?.collect())
}

/// Runs the backlog recursion, optionally keeping the per-second series.
pub fn simulate(
    spec: &WorkloadSpec,
    seal: &SealModel,
    keep_trajectory: bool,
) -> Result<SimResult, SimError> {
    let arrivals = arrival_stream(spec)?;
    let mut backlog = 0u64;
    let mut sealed_total = 0u64;
    let mut arrived_total = 0u64;
    let mut trajectory = keep_trajectory.then(|| Vec::with_capacity(spec.horizon_seconds as usize));
    for (t, a) in arrivals.enumerate() {
        arrived_total += a;
        let available = backlog + a;
        let sealed = available.min(seal.credit(t as u64));
        sealed_total += sealed;
        backlog = available - sealed;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(backlog);
        }
    }
    Ok(SimResult {
        end_backlog: backlog,
        trajectory,
        sealed_total,
        arrived_total,
    })
}

/// One simulated day without the trajectory.
pub fn simulate_day(spec: &WorkloadSpec, seal: &SealModel) -> Result<SimResult, SimError> {
    simulate(spec, seal, false)
}

/// Closed-form end-of-horizon backlog: `max(0, lambda - mu * T)`.
pub fn expected_backlog(lambda_day: f64, mu_tps: f64, horizon_seconds: u64) -> f64 {
    (lambda_day - mu_tps * horizon_seconds as f64).max(0.0)
}

/// Mean simulated end backlog over seeds `base_seed .. base_seed + runs`.
pub fn mean_backlog(
    lambda_day: f64,
    seal: &SealModel,
    horizon_seconds: u64,
    base_seed: u64,
    runs: u64,
) -> Result<f64, SimError> {
    let total = (0..runs)
        .into_par_iter()
        .map(|i| {
            let spec = WorkloadSpec {
                lambda_day,
                horizon_seconds,
                seed: base_seed + i,
            };
            simulate_day(&spec, seal).map(|r| r.end_backlog)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(total as f64 / runs.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu_tps: f64,
    pub expected: f64,
    pub simulated: u64,
    pub seed: u64,
}

/// Expected and simulated backlog for each sealing rate, sorted by rate.
/// Row `i` (after sorting) is simulated with seed `base_seed + i`.
pub fn sweep(
    lambda_day: f64,
    mu_list: &[f64],
    horizon_seconds: u64,
    base_seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    if mu_list.is_empty() {
        return Err(SimError::EmptySweep);
    }
    let mut mus = mu_list.to_vec();
    for &mu in &mus {
        SealModel::new("sweep", mu)?;
    }
    mus.sort_by(f64::total_cmp);
    mus.into_par_iter()
        .enumerate()
        .map(|(i, mu)| {
            let seed = base_seed + i as u64;
            let spec = WorkloadSpec {
                lambda_day,
                horizon_seconds,
                seed,
            };
            let seal = SealModel::new("sweep", mu)?;
            Ok(SweepRow {
                mu_tps: mu,
                expected: expected_backlog(lambda_day, mu, horizon_seconds),
                simulated: simulate_day(&spec, &seal)?.end_backlog,
                seed,
            })
        })
        .collect()
}

/// Largest arrival rate on a `step` grid, scanning down from `upper`, whose
/// closed-form backlog at `mu_tps` is zero.
pub fn viability_threshold(
    mu_tps: f64,
    upper: u64,
    step: u64,
    horizon_seconds: u64,
) -> Option<u64> {
    let mut lambda = upper - upper % step.max(1);
    loop {
        if expected_backlog(lambda as f64, mu_tps, horizon_seconds) == 0.0 {
            return Some(lambda);
        }
        lambda = lambda.checked_sub(step)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_rate_sample_mean() {
        let spec = WorkloadSpec::per_day(86_400.0, 11);
        let a = poisson_arrivals(&spec).unwrap();
        assert_eq!(a.len(), 86_400);
        let mean = a.iter().sum::<u64>() as f64 / a.len() as f64;
        let bound = 3.0 * (1.0f64 / 86_400.0).sqrt();
        assert!((mean - 1.0).abs() < bound, "mean {mean}");
    }

    #[test]
    fn zero_rate_is_all_zeros() {
        let a = poisson_arrivals(&WorkloadSpec::per_day(0.0, 1)).unwrap();
        assert!(a.iter().all(|&x| x == 0));
    }

    #[test]
    fn fixed_seed_repeats() {
        let spec = WorkloadSpec::per_day(1_000_000.0, 42);
        assert_eq!(
            poisson_arrivals(&spec).unwrap(),
            poisson_arrivals(&spec).unwrap()
        );
        let other = WorkloadSpec { seed: 43, ..spec };
        assert_ne!(
            poisson_arrivals(&spec).unwrap(),
            poisson_arrivals(&other).unwrap()
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(poisson_arrivals(&WorkloadSpec::per_day(-1.0, 0)).is_err());
        assert!(poisson_arrivals(&WorkloadSpec {
            lambda_day: 1.0,
            horizon_seconds: 0,
            seed: 0
        })
        .is_err());
        assert!(SealModel::new("x", 0.0).is_err());
        assert!(SealModel::new("x", f64::NAN).is_err());
        assert_eq!(sweep(1.0, &[], DAY_SECONDS, 0), Err(SimError::EmptySweep));
    }

    #[test]
    fn fractional_credit_sums_exactly() {
        for mu in [7.0, 0.25, 2.5, 115.740_740_740_740_74] {
            let seal = SealModel::new("x", mu).unwrap();
            let total: u64 = (0..DAY_SECONDS).map(|t| seal.credit(t)).sum();
            assert_eq!(total, (mu * DAY_SECONDS as f64).floor() as u64, "mu {mu}");
        }
    }

    #[test]
    fn ethereum_ten_million() {
        let seal = SealModel::new("ethereum", 25.0).unwrap();
        let r = simulate_day(&WorkloadSpec::per_day(10_000_000.0, 1), &seal).unwrap();
        let rel = (r.end_backlog as f64 - 7_840_000.0).abs() / 7_840_000.0;
        assert!(rel < 1e-3, "backlog {}", r.end_backlog);
        assert_eq!(r.arrived_total, r.sealed_total + r.end_backlog);
    }

    #[test]
    fn bitcoin_thirty_million() {
        let seal = SealModel::new("bitcoin", 7.0).unwrap();
        let r = simulate_day(&WorkloadSpec::per_day(30_000_000.0, 2), &seal).unwrap();
        let rel = (r.end_backlog as f64 - 29_395_200.0).abs() / 29_395_200.0;
        assert!(rel < 1e-3, "backlog {}", r.end_backlog);
        // the chain never idles under this load, so it seals exactly mu*T
        assert_eq!(r.sealed_total, 7 * DAY_SECONDS);
    }

    #[test]
    fn under_capacity_drains() {
        let seal = SealModel::new("ethereum", 25.0).unwrap();
        let r = simulate(&WorkloadSpec::per_day(2_000_000.0, 3), &seal, true).unwrap();
        assert!(r.end_backlog < 100, "backlog {}", r.end_backlog);
        let tr = r.trajectory.unwrap();
        assert_eq!(tr.len(), 86_400);
        assert_eq!(*tr.last().unwrap(), r.end_backlog);
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(
            expected_backlog(10_000_000.0, 25.0, DAY_SECONDS),
            7_840_000.0
        );
        assert_eq!(
            expected_backlog(10_000_000.0, 10_000_000.0 / 86_400.0, DAY_SECONDS),
            0.0
        );
        assert_eq!(
            expected_backlog(33_000_000.0, 7.0, DAY_SECONDS),
            32_395_200.0
        );
    }

    #[test]
    fn sweep_rows() {
        let rows = sweep(10_000_000.0, &[50.0, 7.0, 25.0], DAY_SECONDS, 100).unwrap();
        let mus: Vec<_> = rows.iter().map(|r| r.mu_tps).collect();
        assert_eq!(mus, vec![7.0, 25.0, 50.0]);
        let expected: Vec<_> = rows.iter().map(|r| r.expected).collect();
        assert_eq!(expected, vec![9_395_200.0, 7_840_000.0, 5_680_000.0]);
        assert_eq!(
            rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
            vec![100, 101, 102]
        );
        assert!(rows.windows(2).all(|w| w[0].simulated >= w[1].simulated));
    }

    #[test]
    fn sweep_above_capacity_is_zero() {
        let rows = sweep(1_000_000.0, &[20.0, 50.0, 100.0], DAY_SECONDS, 0).unwrap();
        assert!(rows.iter().all(|r| r.expected == 0.0));
        assert!(rows.iter().all(|r| r.simulated < 50), "{rows:?}");
    }

    #[test]
    fn threshold_for_ethereum() {
        assert_eq!(
            viability_threshold(25.0, 10_000_000, 10_000, DAY_SECONDS),
            Some(2_160_000)
        );
    }
}

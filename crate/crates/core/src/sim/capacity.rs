//! How many sidechains a patient population needs.

use super::{SimError, DAY_SECONDS};

/// Transactions per patient per day: the 30M/day workload over ~273,973
/// daily encounters.
pub const DEFAULT_TX_PER_PATIENT_DAY: f64 = 110.0;

/// Patient counts of the reference capacity table.
pub const REFERENCE_PATIENT_COUNTS: [u64; 7] =
    [1, 1_000, 10_000, 50_000, 100_000, 200_000, 300_000];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityQuery {
    pub n_patients: u64,
    pub r_per_patient_day: f64,
    pub mu_tps: f64,
}

/// `max(1, ceil(n * r / (mu * 86400)))`.
pub fn sidechains_needed(q: &CapacityQuery) -> u64 {
    let daily = q.n_patients as f64 * q.r_per_patient_day;
    let per_chain = q.mu_tps * DAY_SECONDS as f64;
    ((daily / per_chain).ceil() as u64).max(1)
}

/// Whole encounters per day from a yearly count (365-day year, floored).
pub fn encounters_per_day(annual: u64) -> u64 {
    annual / 365
}

/// Daily transactions per encounter, rounded up to a whole transaction.
pub fn tx_per_patient_day(daily_tx: u64, daily_encounters: u64) -> Result<u64, SimError> {
    if daily_encounters == 0 {
        return Err(SimError::DivideByZero);
    }
    Ok(daily_tx.div_ceil(daily_encounters))
}

/// A named chain technology and its sealing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPreset {
    pub name: String,
    pub mu_tps: f64,
}

impl ChainPreset {
    pub const CARDANO_DEFAULT_TPS: f64 = 257.0;

    pub fn new(name: impl Into<String>, mu_tps: f64) -> Self {
        ChainPreset {
            name: name.into(),
            mu_tps,
        }
    }

    /// Bitcoin 7, Ethereum 25, IOTA 50 and Cardano at `cardano_tps`.
    pub fn reference_set(cardano_tps: f64) -> Vec<ChainPreset> {
        vec![
            ChainPreset::new("bitcoin", 7.0),
            ChainPreset::new("ethereum", 25.0),
            ChainPreset::new("iota", 50.0),
            ChainPreset::new("cardano", cardano_tps),
        ]
    }

    /// Looks up a reference chain by case-insensitive name.
    pub fn named(name: &str, cardano_tps: f64) -> Option<ChainPreset> {
        Self::reference_set(cardano_tps)
            .into_iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

/// Sidechain counts for every (patients, chain) pair, row-major.
pub fn capacity_grid(
    patients: &[u64],
    chains: &[ChainPreset],
    r_per_patient_day: f64,
) -> Vec<Vec<u64>> {
    patients
        .iter()
        .map(|&n| {
            chains
                .iter()
                .map(|c| {
                    sidechains_needed(&CapacityQuery {
                        n_patients: n,
                        r_per_patient_day,
                        mu_tps: c.mu_tps,
                    })
                })
                .collect()
        })
        .collect()
}

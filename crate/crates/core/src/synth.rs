//! Deterministic synthetic listings with planted mispricings.
//!
//! Log price is an additive function of bedrooms, bathrooms, neighborhood and
//! rental type plus Gaussian noise. Bedrooms enter with diminishing returns and
//! interact with a premium-neighborhood indicator, so tree ensembles have an
//! edge over a purely linear fit. A fixed 2% of rows are repriced to exactly
//! twice or half of their noise-free price and recorded as planted anomalies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::Listing;

/// Fraction of rows that receive a planted mispricing.
pub const ANOMALY_FRACTION: f64 = 0.02;
/// Standard deviation of the log-price noise on ordinary rows.
pub const NOISE_SD: f64 = 0.12;

const INTERCEPT: f64 = 7.75;

// (name, log-price effect, sampling weight)
const LOCATIONS: [(&str, f64, f64); 20] = [
    ("Upper West Side", 0.05, 9.0),
    ("Upper East Side", 0.02, 8.0),
    ("Midtown", 0.25, 6.0),
    ("Chelsea", 0.22, 5.0),
    ("East Village", 0.08, 5.0),
    ("Hell's Kitchen", -0.02, 5.0),
    ("Financial District", 0.12, 5.0),
    ("Murray Hill", 0.0, 4.0),
    ("Lincoln Square", 0.28, 3.0),
    ("Tribeca", 0.45, 3.0),
    ("Soho", 0.40, 2.0),
    ("West Village", 0.35, 3.0),
    ("Gramercy Park", 0.15, 2.0),
    ("Lower East Side", -0.05, 3.0),
    ("East Harlem", -0.35, 4.0),
    ("Central Harlem", -0.30, 4.0),
    ("Hamilton Heights", -0.38, 2.0),
    ("Washington Heights", -0.45, 3.0),
    ("Yorkville", -0.08, 3.0),
    ("Battery Park City", 0.20, 2.0),
];

const RENTAL_TYPES: [(&str, f64, f64); 4] = [
    ("rental unit", 0.0, 60.0),
    ("condo", 0.10, 20.0),
    ("co-op", -0.06, 15.0),
    ("townhouse", 0.30, 5.0),
];

const BED_WEIGHTS: [f64; 7] = [17.0, 34.0, 29.0, 14.0, 4.0, 1.5, 0.5];

const STREETS: [&str; 12] = [
    "Broadway",
    "West End Avenue",
    "Broome Street",
    "Third Avenue",
    "Lexington Avenue",
    "West 23rd Street",
    "East 86th Street",
    "Wall Street",
    "Amsterdam Avenue",
    "Second Avenue",
    "Fifth Avenue",
    "Park Avenue",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub listing_id: u64,
    /// 2.0 (overpriced) or 0.5 (underpriced).
    pub multiplier: f64,
    /// Noise-free price before the multiplier.
    pub base_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub listings: Vec<Listing>,
    /// Ground truth, sorted by listing id.
    pub anomalies: Vec<PlantedAnomaly>,
}

impl SyntheticDataset {
    pub fn is_planted(&self, id: u64) -> bool {
        self.anomalies.binary_search_by_key(&id, |a| a.listing_id).is_ok()
    }
}

fn weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], weight: impl Fn(&T) -> f64) -> &'a T {
    let total: f64 = items.iter().map(&weight).sum();
    let mut pick = rng.random::<f64>() * total;
    for item in items {
        pick -= weight(item);
        if pick < 0.0 {
            return item;
        }
    }
    items.last().expect("non-empty table")
}

/// Noise-free log price for a feature combination.
pub fn expected_log_price(beds: u32, baths: f64, location: &str, rental_type: &str) -> f64 {
    let loc = LOCATIONS.iter().find(|l| l.0 == location).map_or(0.0, |l| l.1);
    let kind = RENTAL_TYPES.iter().find(|t| t.0 == rental_type).map_or(0.0, |t| t.1);
    let beds = beds as f64;
    let premium = if loc >= 0.2 { 1.0 } else { 0.0 };
    INTERCEPT + loc + kind + 0.45 * (1.0 + beds).ln() + 0.05 * beds + 0.16 * (baths - 1.0)
        + 0.07 * beds * premium
}

/// Generates `n` listings; identical output for identical `(seed, n)`.
pub fn synthesize_fixture(seed: u64, n: usize) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SD).expect("valid sd");
    let bed_table: Vec<(u32, f64)> = BED_WEIGHTS.iter().enumerate().map(|(b, w)| (b as u32, *w)).collect();

    let mut listings = Vec::with_capacity(n);
    let mut base_log = Vec::with_capacity(n);
    for id in 0..n as u64 {
        let location = weighted(&mut rng, &LOCATIONS, |l| l.2).0;
        let rental_type = weighted(&mut rng, &RENTAL_TYPES, |t| t.2).0;
        let beds = weighted(&mut rng, &bed_table, |b| b.1).0;
        let extra_half_baths: u32 = rng.random_range(0..=beds.max(1));
        let baths = if beds <= 1 {
            1.0 + if rng.random::<f64>() < 0.1 { 0.5 } else { 0.0 }
        } else {
            1.0 + 0.5 * extra_half_baths as f64
        };
        let mu = expected_log_price(beds, baths, location, rental_type);
        let price = (mu + noise.sample(&mut rng)).exp().round().max(1.0);
        let street = STREETS[rng.random_range(0..STREETS.len())];
        let number: u32 = rng.random_range(1..800);
        let unit: u32 = rng.random_range(1..40);
        let address = format!("{number} {street} #{unit}");
        base_log.push(mu);
        listings.push(Listing {
            id,
            price,
            beds,
            baths,
            baths_imputed: false,
            location: location.to_string(),
            rental_type: rental_type.to_string(),
            street: Some(street.to_string()),
            address,
        });
    }

    let planted = (n as f64 * ANOMALY_FRACTION).round() as usize;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut anomalies: Vec<PlantedAnomaly> = ids[..planted]
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let multiplier = if rank % 2 == 0 { 2.0 } else { 0.5 };
            let base_price = base_log[i].exp();
            listings[i].price = multiplier * base_price;
            PlantedAnomaly { listing_id: i as u64, multiplier, base_price }
        })
        .collect();
    anomalies.sort_by_key(|a| a.listing_id);
    SyntheticDataset { listings, anomalies }
}

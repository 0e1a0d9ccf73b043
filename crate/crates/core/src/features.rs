//! Drop-first one-hot design matrix with a log-price target.
//!
//! Column layout: `beds`, `baths`, then one indicator per non-baseline
//! location, then one per non-baseline rental type. Category lists are sorted
//! so the fitted schema depends only on the set of listings, not their order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Listing;
use crate::matrix::Matrix;

pub const CONTINUOUS: [&str; 2] = ["beds", "baths"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalGroup {
    /// `location` or `rental_type`.
    pub field: String,
    /// Sorted; `categories[0]` is the dropped baseline.
    pub categories: Vec<String>,
}

impl CategoricalGroup {
    pub fn baseline(&self) -> &str {
        &self.categories[0]
    }

    /// Number of emitted columns.
    pub fn width(&self) -> usize {
        self.categories.len().saturating_sub(1)
    }

    /// Column offset within the group, `None` for the baseline or an unseen level.
    fn slot(&self, value: &str) -> Result<Option<usize>, ()> {
        match self.categories.binary_search_by(|c| c.as_str().cmp(value)) {
            Ok(0) => Ok(None),
            Ok(i) => Ok(Some(i - 1)),
            Err(_) => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub continuous: Vec<String>,
    pub categorical: Vec<CategoricalGroup>,
    pub total_width: usize,
}

impl FeatureSchema {
    /// Human-readable column names, e.g. `location=Tribeca`.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.continuous.clone();
        for g in &self.categorical {
            names.extend(g.categories.iter().skip(1).map(|c| format!("{}={}", g.field, c)));
        }
        names
    }

    fn group(&self, field: &str) -> Option<&CategoricalGroup> {
        self.categorical.iter().find(|g| g.field == field)
    }
}

fn field_value<'a>(listing: &'a Listing, field: &str) -> &'a str {
    match field {
        "location" => &listing.location,
        "rental_type" => &listing.rental_type,
        _ => "",
    }
}

pub fn fit_schema(listings: &[Listing]) -> Result<FeatureSchema> {
    if listings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let categorical: Vec<CategoricalGroup> = ["location", "rental_type"]
        .into_iter()
        .map(|field| {
            let levels: BTreeSet<&str> = listings.iter().map(|l| field_value(l, field)).collect();
            CategoricalGroup {
                field: field.to_string(),
                categories: levels.into_iter().map(str::to_string).collect(),
            }
        })
        .collect();
    let total_width = CONTINUOUS.len() + categorical.iter().map(CategoricalGroup::width).sum::<usize>();
    Ok(FeatureSchema {
        continuous: CONTINUOUS.iter().map(|s| s.to_string()).collect(),
        categorical,
        total_width,
    })
}

/// A category value not present when the schema was fitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnseenCategory {
    pub listing_id: u64,
    pub field: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub x: Matrix,
    /// Natural log of price.
    pub target: Vec<f64>,
    pub listing_ids: Vec<u64>,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn cols(&self) -> usize {
        self.x.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select_rows(idx),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            listing_ids: idx.iter().map(|&i| self.listing_ids[i]).collect(),
        }
    }
}

/// Encodes one listing; unseen categories encode as the baseline.
pub fn encode_row(schema: &FeatureSchema, listing: &Listing, out: &mut [f64], unseen: &mut Vec<UnseenCategory>) {
    out.fill(0.0);
    out[0] = listing.beds as f64;
    out[1] = listing.baths;
    let mut offset = schema.continuous.len();
    for g in &schema.categorical {
        let value = field_value(listing, &g.field);
        match g.slot(value) {
            Ok(Some(j)) => out[offset + j] = 1.0,
            Ok(None) => {}
            Err(()) => unseen.push(UnseenCategory {
                listing_id: listing.id,
                field: g.field.clone(),
                value: value.to_string(),
            }),
        }
        offset += g.width();
    }
}

/// Builds the design matrix. The second value lists every unseen category
/// occurrence (each was encoded as its group's baseline).
pub fn transform(schema: &FeatureSchema, listings: &[Listing]) -> (DesignMatrix, Vec<UnseenCategory>) {
    let mut x = Matrix::zeros(listings.len(), schema.total_width);
    let mut unseen = Vec::new();
    for (i, l) in listings.iter().enumerate() {
        encode_row(schema, l, x.row_mut(i), &mut unseen);
    }
    let design = DesignMatrix {
        x,
        target: listings.iter().map(|l| l.price.ln()).collect(),
        listing_ids: listings.iter().map(|l| l.id).collect(),
    };
    (design, unseen)
}

/// Maps a log-price prediction back to dollars.
pub fn inverse_target(y_log: f64) -> f64 {
    y_log.exp()
}

impl FeatureSchema {
    /// Index of the indicator column for `field=value`, if it is not the baseline.
    pub fn column_of(&self, field: &str, value: &str) -> Option<usize> {
        let mut offset = self.continuous.len();
        for g in &self.categorical {
            if g.field == field {
                return g.slot(value).ok().flatten().map(|j| offset + j);
            }
            offset += g.width();
        }
        None
    }

    pub fn baseline_of(&self, field: &str) -> Option<&str> {
        self.group(field).map(CategoricalGroup::baseline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listing(id: u64, location: &str, rental_type: &str, price: f64) -> Listing {
        Listing {
            id,
            price,
            beds: 2,
            baths: 1.5,
            baths_imputed: false,
            location: location.into(),
            rental_type: rental_type.into(),
            street: None,
            address: String::new(),
        }
    }

    fn sample() -> Vec<Listing> {
        vec![
            listing(0, "Tribeca", "condo", 9000.0),
            listing(1, "Chelsea", "rental unit", 4000.0),
            listing(2, "East Harlem", "co-op", 2981.0),
            listing(3, "Chelsea", "condo", 5000.0),
        ]
    }

    #[test]
    fn width_rule() {
        let s = fit_schema(&sample()).unwrap();
        // 3 locations, 3 rental types
        assert_eq!(s.total_width, 2 + 2 + 2);
        assert_eq!(s.baseline_of("location"), Some("Chelsea"));
        assert_eq!(s.baseline_of("rental_type"), Some("co-op"));
        assert_eq!(s.feature_names().len(), s.total_width);
    }

    #[test]
    fn width_for_53_locations_and_4_types() {
        let mut ls = Vec::new();
        for i in 0..53 {
            ls.push(listing(i, &format!("Loc {i:02}"), ["a", "b", "c", "d"][i as usize % 4], 1000.0));
        }
        assert_eq!(fit_schema(&ls).unwrap().total_width, 57);
    }

    #[test]
    fn single_levels_give_width_two() {
        let ls = vec![listing(0, "Chelsea", "condo", 1.0), listing(1, "Chelsea", "condo", 2.0)];
        assert_eq!(fit_schema(&ls).unwrap().total_width, 2);
    }

    #[test]
    fn shuffled_input_same_schema() {
        let mut ls = sample();
        let a = fit_schema(&ls).unwrap();
        ls.reverse();
        assert_eq!(a, fit_schema(&ls).unwrap());
    }

    #[test]
    fn baseline_and_unseen_rows() {
        let s = fit_schema(&sample()).unwrap();
        let (m, unseen) = transform(&s, &sample());
        assert!(unseen.is_empty());
        // Chelsea is the location baseline.
        assert_eq!(&m.x.row(1)[2..4], &[0.0, 0.0]);
        assert_eq!(m.x.get(0, s.column_of("location", "Tribeca").unwrap()), 1.0);
        assert!((m.target[2] - 2981f64.ln()).abs() < 1e-15);
        assert!((m.target[2] - 8.0).abs() < 1e-4);

        let (m, unseen) = transform(&s, &[listing(9, "Atlantis", "condo", 1000.0)]);
        assert_eq!(unseen.len(), 1);
        assert_eq!(unseen[0].value, "Atlantis");
        assert_eq!(&m.x.row(0)[2..4], &[0.0, 0.0]);
    }

    #[test]
    fn inverse_target_values() {
        assert_eq!(inverse_target(0.0), 1.0);
        assert!((inverse_target(3495f64.ln()) - 3495.0).abs() <= 1e-9 * 3495.0);
        assert!((inverse_target(8.0) - 2980.957987).abs() < 1e-5);
    }
}

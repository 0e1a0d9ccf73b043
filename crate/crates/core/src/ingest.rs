//! Listing ingestion: parse raw or processed CSV rows into validated
//! [`Listing`] records, and descriptive summaries over them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_BEDS: u32 = 20;
pub const MAX_BATHS: f64 = 20.0;

pub const RAW_HEADERS: [&str; 5] = ["title", "address", "price", "details", "listing_by"];
pub const PROCESSED_HEADERS: [&str; 7] =
    ["price", "beds", "baths", "location", "rental_type", "street", "address"];

/// One scraped row before any interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawListing {
    pub title: String,
    pub address: String,
    pub price_text: String,
    pub details: String,
    pub listing_by: String,
}

/// A cleaned rental record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub id: u64,
    /// Dollars per month.
    pub price: f64,
    /// 0 is a studio.
    pub beds: u32,
    pub baths: f64,
    /// True when the source had no bath count and 1 was assumed.
    #[serde(default)]
    pub baths_imputed: bool,
    pub location: String,
    pub rental_type: String,
    pub street: Option<String>,
    pub address: String,
}

impl Listing {
    /// Checks the record invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.price > 0.0) || !self.price.is_finite() {
            return Err(Error::NonPositivePrice(self.price));
        }
        if self.beds > MAX_BEDS {
            return Err(Error::OutOfRange { field: "beds", value: self.beds as f64 });
        }
        if !(self.baths > 0.0 && self.baths <= MAX_BATHS) {
            return Err(Error::OutOfRange { field: "baths", value: self.baths });
        }
        if self.location.trim().is_empty() {
            return Err(Error::EmptyLocation);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    Raw,
    Processed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    /// 0-based data row ordinal (header excluded).
    pub row: u64,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_dropped: u64,
    pub baths_imputed: u64,
    pub drops: Vec<DroppedRow>,
}

impl IngestReport {
    /// Drop counts keyed by reason name.
    pub fn drop_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for d in &self.drops {
            *counts.entry(d.reason.clone()).or_insert(0) += 1;
        }
        counts
    }
}

/// Parses a price like `"$3,495"` or `"1650/month"` into dollars.
pub fn parse_price(price_text: &str) -> Result<f64> {
    let mut s = price_text.trim().to_ascii_lowercase();
    for suffix in ["/month", "/mo"] {
        if let Some(stripped) = s.strip_suffix(suffix) {
            s = stripped.trim_end().to_string();
            break;
        }
    }
    let cleaned: String = s.chars().filter(|c| *c != '$' && *c != ',').collect();
    let cleaned = cleaned.trim();
    if !cleaned.bytes().any(|b| b.is_ascii_digit()) {
        return Err(Error::NonNumericPrice(price_text.to_string()));
    }
    let value: f64 = cleaned
        .parse()
        .map_err(|_| Error::NonNumericPrice(price_text.to_string()))?;
    if !value.is_finite() {
        return Err(Error::NonNumericPrice(price_text.to_string()));
    }
    if value <= 0.0 {
        return Err(Error::NonPositivePrice(value));
    }
    Ok(value)
}

/// Formats whole dollars the way listing sites print them: `$3,495`.
pub fn format_price(dollars: u64) -> String {
    let digits = dollars.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
    out.push('$');
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Bedroom and bathroom counts extracted from a details string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Details {
    pub beds: u32,
    pub baths: f64,
    pub baths_imputed: bool,
}

static BEDS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*beds?\b").unwrap());
static BATHS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*baths?\b").unwrap());
static STUDIO_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bstudio\b").unwrap());

/// Parses `"2 Beds | 2 Baths"`, `"Studio | 1 Bath"` and similar.
///
/// A missing bath token yields one bath with `baths_imputed` set.
pub fn parse_details(details: &str) -> Result<Details> {
    let unparseable = || Error::UnparseableDetails(details.to_string());
    let beds = if let Some(cap) = BEDS_RE.captures(details) {
        let v: f64 = cap[1].parse().map_err(|_| unparseable())?;
        if v.fract() != 0.0 {
            return Err(unparseable());
        }
        v as u32
    } else if STUDIO_RE.is_match(details) {
        0
    } else {
        return Err(unparseable());
    };
    let (baths, baths_imputed) = match BATHS_RE.captures(details) {
        Some(cap) => (cap[1].parse().map_err(|_| unparseable())?, false),
        None => (1.0, true),
    };
    Ok(Details { beds, baths, baths_imputed })
}

/// Extracts the street name from an address: the leading house number and a
/// trailing `#unit` token are removed.
pub fn parse_street(address: &str) -> Option<String> {
    let mut tokens: Vec<&str> = address.split_whitespace().collect();
    if tokens.last().is_some_and(|t| t.starts_with('#')) {
        tokens.pop();
    }
    if tokens.first().is_some_and(|t| t.starts_with(|c: char| c.is_ascii_digit())) {
        tokens.remove(0);
    }
    let street = tokens.join(" ");
    let street = street.trim_matches(|c: char| c == ',' || c.is_whitespace());
    (!street.is_empty()).then(|| street.to_string())
}

/// Trims, collapses whitespace and title-cases each word.
pub fn canonical_location(name: &str) -> String {
    name.split_whitespace()
        .map(|word| {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

fn canonical_rental_type(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Splits a title such as `"Rental unit in Upper West Side"` into
/// `(rental_type, location)`.
pub fn parse_title(title: &str) -> Result<(String, String)> {
    let lower = title.to_lowercase();
    let Some(pos) = lower.find(" in ") else {
        return Err(Error::UnparseableTitle(title.to_string()));
    };
    // Lowercasing can change byte lengths for non-ASCII text; fall back to
    // the lowercased string in that case.
    let source = if lower.len() == title.len() { title } else { lower.as_str() };
    let rental_type = canonical_rental_type(&source[..pos]);
    let location = canonical_location(&source[pos + 4..]);
    if rental_type.is_empty() || location.is_empty() {
        return Err(Error::UnparseableTitle(title.to_string()));
    }
    Ok((rental_type, location))
}

/// Converts one raw scraped row into a listing.
pub fn listing_from_raw(id: u64, raw: &RawListing) -> Result<Listing> {
    let price = parse_price(&raw.price_text)?;
    let details = parse_details(&raw.details)?;
    let (rental_type, location) = parse_title(&raw.title)?;
    let listing = Listing {
        id,
        price,
        beds: details.beds,
        baths: details.baths,
        baths_imputed: details.baths_imputed,
        location,
        rental_type,
        street: parse_street(&raw.address),
        address: raw.address.trim().to_string(),
    };
    listing.validate()?;
    Ok(listing)
}

struct Columns {
    index: BTreeMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord, required: &[&str]) -> Result<Self> {
        let index: BTreeMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase(), i))
            .collect();
        let missing: Vec<String> = required
            .iter()
            .filter(|h| !index.contains_key(**h))
            .map(|h| h.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingColumns(missing));
        }
        Ok(Columns { index })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, name: &str) -> &'r str {
        self.index.get(name).and_then(|&i| record.get(i)).unwrap_or("")
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

fn listing_from_processed(id: u64, cols: &Columns, rec: &csv::StringRecord) -> Result<Listing> {
    let price = parse_price(cols.get(rec, "price"))?;
    let beds_text = cols.get(rec, "beds").trim();
    let beds: f64 = if beds_text.eq_ignore_ascii_case("studio") {
        0.0
    } else {
        beds_text
            .parse()
            .map_err(|_| Error::UnparseableDetails(format!("beds={beds_text:?}")))?
    };
    if beds.fract() != 0.0 || beds < 0.0 {
        return Err(Error::OutOfRange { field: "beds", value: beds });
    }
    if beds > MAX_BEDS as f64 {
        return Err(Error::OutOfRange { field: "beds", value: beds });
    }
    let baths_text = cols.get(rec, "baths").trim();
    let (baths, baths_imputed) = if baths_text.is_empty() {
        (1.0, true)
    } else {
        let b: f64 = baths_text
            .parse()
            .map_err(|_| Error::UnparseableDetails(format!("baths={baths_text:?}")))?;
        (b, false)
    };
    let address = cols.get(rec, "address").trim().to_string();
    let street = match cols.get(rec, "street").trim() {
        "" => parse_street(&address),
        s => Some(s.to_string()),
    };
    let listing = Listing {
        id,
        price,
        beds: beds as u32,
        baths,
        baths_imputed,
        location: canonical_location(cols.get(rec, "location")),
        rental_type: canonical_rental_type(cols.get(rec, "rental_type")),
        street,
        address,
    };
    listing.validate()?;
    Ok(listing)
}

/// Reads listings from any CSV source.
///
/// Listing ids are data-row ordinals starting at 0, so a dropped row leaves
/// a gap. In processed mode an optional `id` column overrides the ordinal,
/// which keeps ids stable when a cleaned file is re-read.
pub fn ingest_reader<R: Read>(reader: R, mode: SchemaMode) -> Result<(Vec<Listing>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let required: &[&str] = match mode {
        SchemaMode::Raw => &RAW_HEADERS,
        SchemaMode::Processed => &PROCESSED_HEADERS,
    };
    let cols = Columns::new(&headers, required)?;
    let mut listings = Vec::new();
    let mut report = IngestReport::default();
    for (row, rec) in rdr.records().enumerate() {
        let row = row as u64;
        report.rows_read += 1;
        let parsed = rec.map_err(Error::from).and_then(|rec| match mode {
            SchemaMode::Raw => {
                let raw = RawListing {
                    title: cols.get(&rec, "title").to_string(),
                    address: cols.get(&rec, "address").to_string(),
                    price_text: cols.get(&rec, "price").to_string(),
                    details: cols.get(&rec, "details").to_string(),
                    listing_by: cols.get(&rec, "listing_by").to_string(),
                };
                listing_from_raw(row, &raw)
            }
            SchemaMode::Processed => {
                let id = if cols.has("id") {
                    let text = cols.get(&rec, "id").trim();
                    text.parse().map_err(|_| Error::OutOfRange { field: "id", value: f64::NAN })?
                } else {
                    row
                };
                listing_from_processed(id, &cols, &rec)
            }
        });
        match parsed {
            Ok(listing) => {
                if listing.baths_imputed {
                    report.baths_imputed += 1;
                }
                listings.push(listing);
            }
            Err(e) => report.drops.push(DroppedRow {
                row,
                reason: e.name().to_string(),
                detail: e.to_string(),
            }),
        }
    }
    report.rows_kept = listings.len() as u64;
    report.rows_dropped = report.drops.len() as u64;
    Ok((listings, report))
}

/// Reads listings from a CSV file.
pub fn ingest_csv(path: impl AsRef<Path>, mode: SchemaMode) -> Result<(Vec<Listing>, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::FileUnreadable { path: path.to_path_buf(), source })?;
    ingest_reader(file, mode)
}

/// Guesses the schema from a header line.
pub fn detect_mode(header_line: &str) -> SchemaMode {
    let lower = header_line.to_ascii_lowercase();
    if lower.contains("details") && lower.contains("title") {
        SchemaMode::Raw
    } else {
        SchemaMode::Processed
    }
}

/// Writes listings in the processed schema, with a leading `id` column.
pub fn write_listings<W: Write>(writer: W, listings: &[Listing]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "price", "beds", "baths", "location", "rental_type", "street", "address"])?;
    for l in listings {
        w.write_record([
            l.id.to_string(),
            l.price.to_string(),
            l.beds.to_string(),
            l.baths.to_string(),
            l.location.clone(),
            l.rental_type.clone(),
            l.street.clone().unwrap_or_default(),
            l.address.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Price statistics for one bedroom count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BedroomSummary {
    pub bedrooms: u32,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    /// Sample (n - 1) standard deviation; absent for a single listing.
    pub std_dev: Option<f64>,
    pub count: usize,
}

pub fn summarize_by_bedrooms(listings: &[Listing]) -> Result<Vec<BedroomSummary>> {
    if listings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for l in listings {
        groups.entry(l.beds).or_default().push(l.price);
    }
    Ok(groups
        .into_iter()
        .map(|(bedrooms, mut prices)| {
            prices.sort_by(f64::total_cmp);
            let count = prices.len();
            let mean = prices.iter().sum::<f64>() / count as f64;
            let median = if count % 2 == 1 {
                prices[count / 2]
            } else {
                (prices[count / 2 - 1] + prices[count / 2]) / 2.0
            };
            let std_dev = (count >= 2).then(|| {
                let ss: f64 = prices.iter().map(|p| (p - mean).powi(2)).sum();
                (ss / (count - 1) as f64).sqrt()
            });
            BedroomSummary {
                bedrooms,
                min: prices[0],
                max: prices[count - 1],
                median,
                mean,
                std_dev,
                count,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountKey {
    Street,
    Location,
}

/// Most frequent streets or locations, descending by count with ties in
/// name order. Listings without a street are skipped for `CountKey::Street`.
pub fn top_counts(listings: &[Listing], key: CountKey, k: usize) -> Result<Vec<(String, usize)>> {
    if listings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::InvalidSpec { name: "k", value: 0.0 });
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in listings {
        let name = match key {
            CountKey::Location => Some(l.location.as_str()),
            CountKey::Street => l.street.as_deref(),
        };
        if let Some(name) = name {
            *counts.entry(name).or_insert(0) += 1;
        }
    }
    let mut pairs: Vec<(String, usize)> = counts.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
    // BTreeMap iteration is already name-ordered; a stable sort keeps it for ties.
    pairs.sort_by(|a, b| b.1.cmp(&a.1));
    pairs.truncate(k);
    Ok(pairs)
}

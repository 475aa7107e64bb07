use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{DatasetError, ImageRecord};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryArea {
    pub country_code: String,
    pub area_km2: f64,
}

/// Reads a `country_code,area_km2` CSV table.
pub fn read_country_areas<R: Read>(reader: R) -> Result<Vec<CountryArea>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::Areas(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["country_code", "area_km2"] {
        return Err(DatasetError::Areas(format!(
            "expected header country_code,area_km2, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut areas = Vec::new();
    for (i, row) in rdr.deserialize::<CountryArea>().enumerate() {
        let mut row = row.map_err(|e| DatasetError::Areas(format!("row {}: {e}", i + 2)))?;
        row.country_code = row.country_code.to_ascii_uppercase();
        areas.push(row);
    }
    validate_areas(&areas)?;
    Ok(areas)
}

fn validate_areas(areas: &[CountryArea]) -> Result<(), DatasetError> {
    let mut seen = BTreeSet::new();
    for a in areas {
        if !(a.area_km2 > 0.0 && a.area_km2.is_finite()) {
            return Err(DatasetError::Areas(format!(
                "area for {} must be positive, got {}",
                a.country_code, a.area_km2
            )));
        }
        if !seen.insert(a.country_code.as_str()) {
            return Err(DatasetError::Areas(format!(
                "duplicate country {}",
                a.country_code
            )));
        }
    }
    Ok(())
}

/// Splits `total` seats in proportion to `weights` by the largest-remainder
/// method. Ties go to the larger weight, then the earlier index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut seats: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = seats.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
            .then(weights[b].total_cmp(&weights[a]))
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        seats[i] += 1;
    }
    seats
}

/// Per-country quotas after capping at availability.
#[derive(Debug, Clone, PartialEq)]
pub struct Apportionment {
    pub quotas: BTreeMap<String, usize>,
    /// Seats no country could fill.
    pub shortfall: usize,
    pub warnings: Vec<String>,
}

/// Area-proportional quotas with shortfall redistribution: any country
/// with fewer records than its quota is capped, and the remainder is
/// re-apportioned over the uncapped countries until every quota fits.
pub fn apportion(
    areas: &[CountryArea],
    available: &BTreeMap<String, usize>,
    total: usize,
) -> Apportionment {
    let mut sorted: Vec<&CountryArea> = areas.iter().collect();
    sorted.sort_by(|a, b| a.country_code.cmp(&b.country_code));
    let capacity = |code: &str| available.get(code).copied().unwrap_or(0);

    let mut capped: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings = Vec::new();
    loop {
        let open: Vec<&CountryArea> = sorted
            .iter()
            .copied()
            .filter(|a| !capped.contains_key(&a.country_code))
            .collect();
        let remaining = total - capped.values().sum::<usize>();
        let seats = largest_remainder(
            remaining,
            &open.iter().map(|a| a.area_km2).collect::<Vec<_>>(),
        );

        let over: Vec<(&CountryArea, usize)> = open
            .iter()
            .zip(&seats)
            .filter(|(a, &s)| s > capacity(&a.country_code))
            .map(|(a, &s)| (*a, s))
            .collect();
        if over.is_empty() {
            let mut quotas = capped;
            for (a, s) in open.iter().zip(seats) {
                quotas.insert(a.country_code.clone(), s);
            }
            let shortfall = if open.is_empty() { remaining } else { 0 };
            if shortfall > 0 {
                warnings.push(format!(
                    "{shortfall} of {total} samples could not be filled by any country"
                ));
            }
            return Apportionment {
                quotas,
                shortfall,
                warnings,
            };
        }
        for (a, wanted) in over {
            let have = capacity(&a.country_code);
            warnings.push(format!(
                "country {} has {have} records for a quota of {wanted}; redistributing {}",
                a.country_code,
                wanted - have
            ));
            capped.insert(a.country_code.clone(), have);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    /// Selected records in their original manifest order.
    pub records: Vec<ImageRecord>,
    pub apportionment: Apportionment,
}

/// Draws `total` records with per-country quotas proportional to area.
/// Within a country, records are sampled without replacement from a
/// stream seeded by `(seed, country)`.
pub fn sample_by_area(
    records: &[ImageRecord],
    areas: &[CountryArea],
    total: usize,
    seed: u64,
) -> Result<SampleOutcome, DatasetError> {
    if total == 0 {
        return Err(DatasetError::InvalidTotal);
    }
    validate_areas(areas)?;
    let known: BTreeSet<&str> = areas.iter().map(|a| a.country_code.as_str()).collect();

    let mut by_country: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if !known.contains(r.country_code.as_str()) {
            return Err(DatasetError::UnknownCountry {
                id: r.id.clone(),
                country: r.country_code.clone(),
            });
        }
        by_country
            .entry(r.country_code.clone())
            .or_default()
            .push(i);
    }
    let available = by_country
        .iter()
        .map(|(c, v)| (c.clone(), v.len()))
        .collect();
    let apportionment = apportion(areas, &available, total);

    let mut chosen = Vec::new();
    for (country, &quota) in &apportionment.quotas {
        let Some(members) = by_country.get(country) else {
            continue;
        };
        let mut rng = seed::rng(seed, country);
        if quota == members.len() {
            chosen.extend_from_slice(members);
        } else {
            chosen.extend(
                index::sample(&mut rng, members.len(), quota)
                    .iter()
                    .map(|k| members[k]),
            );
        }
    }
    chosen.sort_unstable();
    Ok(SampleOutcome {
        records: chosen.into_iter().map(|i| records[i].clone()).collect(),
        apportionment,
    })
}

/// Disjoint train/test partition of record ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Number of training records: `train_fraction * n` rounded half up.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    ((train_fraction * n as f64) + 0.5).floor() as usize
}

/// Seeded shuffle followed by a prefix split. Id lists are emitted sorted.
pub fn split(
    records: &[ImageRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<SplitManifest, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let mut ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
    ids.shuffle(&mut seed::rng(seed, "split"));
    let n_train = train_size(ids.len(), train_fraction);
    let mut train_ids: Vec<String> = ids[..n_train].iter().map(|s| s.to_string()).collect();
    let mut test_ids: Vec<String> = ids[n_train..].iter().map(|s| s.to_string()).collect();
    train_ids.sort();
    test_ids.sort();
    Ok(SplitManifest {
        seed,
        train_ids,
        test_ids,
    })
}

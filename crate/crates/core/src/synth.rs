//! Synthetic transaction and sociodemographic data with planted behavioral
//! archetypes.
//!
//! Each client belongs to one archetype. Category `k` is active with the
//! archetype's `activity_prob[k]`; an active amount is `exp(N(mean, std))`
//! rounded to cents, negative for expense categories and positive for
//! income categories. Amounts are yearly averages per category. Every
//! client draws from its own random stream, derived from `(seed, client
//! index)`, so generation is parallel and still reproducible.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::table::{SociodemoTable, TransactionTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    /// Relative share of clients drawn from this archetype.
    #[serde(default = "one")]
    pub weight: f64,
    pub activity_prob: Vec<f64>,
    pub log_amount_mean: Vec<f64>,
    pub log_amount_std: Vec<f64>,
    /// Categories whose amounts are positive (income).
    #[serde(default)]
    pub income_categories: BTreeSet<usize>,
}

fn one() -> f64 {
    1.0
}

impl ArchetypeSpec {
    pub fn validate(&self, n_categories: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("archetype {:?}: {m}", self.name)));
        if self.activity_prob.len() != n_categories
            || self.log_amount_mean.len() != n_categories
            || self.log_amount_std.len() != n_categories
        {
            return bad(format!("expected {n_categories} per-category parameters"));
        }
        if self.activity_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("activity probabilities must lie in [0, 1]".into());
        }
        if self.log_amount_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("log-amount standard deviations must be finite and >= 0".into());
        }
        if self.log_amount_mean.iter().any(|m| !m.is_finite()) {
            return bad("log-amount means must be finite".into());
        }
        if self.income_categories.iter().any(|&k| k >= n_categories) {
            return bad("income category out of range".into());
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return bad("weight must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_clients: usize,
    pub n_categories: usize,
    pub n_archetypes: usize,
    pub seed: u64,
    /// Probability that a client's sociodemographic attributes follow its
    /// archetype's preferred values instead of being drawn uniformly.
    #[serde(default)]
    pub sociodemo_correlation: f64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 || self.n_categories == 0 || self.n_archetypes == 0 {
            return Err(Error::Config("client, category and archetype counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sociodemo_correlation) {
            return Err(Error::Config("sociodemo_correlation must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub transactions: TransactionTable,
    pub sociodemo: SociodemoTable,
    /// Archetype index per client.
    pub archetypes: Vec<usize>,
    pub archetype_names: Vec<String>,
}

impl SyntheticDataset {
    pub fn write_archetype_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["client_id", "archetype", "archetype_name"])?;
        for (id, &a) in self.transactions.client_ids().iter().zip(&self.archetypes) {
            wtr.write_record([id.as_str(), &a.to_string(), &self.archetype_names[a]])?;
        }
        wtr.flush()
    }

    /// Writes `transactions.csv`, `sociodemo.csv` and `archetypes.csv` under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.transactions.save_csv(dir.join("transactions.csv"))?;
        self.sociodemo.save_csv(dir.join("sociodemo.csv"))?;
        let path = dir.join("archetypes.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.write_archetype_csv(file).map_err(|e| Error::io(&path, e))
    }
}

const AGE_RANGES: [&str; 6] = ["18-24", "25-34", "35-44", "45-54", "55-64", "65+"];
const GENDERS: [&str; 2] = ["F", "M"];
const INCOME_RANGES: [&str; 5] = ["<12k", "12-24k", "24-36k", "36-60k", ">60k"];
const N_POSTCODES: usize = 30;
const N_CITIES: usize = 10;
const N_PROVINCES: usize = 5;

fn sociodemo_vocabularies() -> [Vec<String>; 6] {
    [
        AGE_RANGES.iter().map(|s| s.to_string()).collect(),
        GENDERS.iter().map(|s| s.to_string()).collect(),
        INCOME_RANGES.iter().map(|s| s.to_string()).collect(),
        (0..N_POSTCODES).map(|p| format!("{:05}", 28000 + p)).collect(),
        (0..N_CITIES).map(|c| format!("CITY{c:02}")).collect(),
        (0..N_PROVINCES).map(|p| format!("PROV{p}")).collect(),
    ]
}

/// Sociodemographic codes; city and province follow from the postcode.
fn draw_sociodemo<R: Rng>(rng: &mut R, archetype: usize, correlation: f64) -> [u32; 6] {
    let follow = correlation > 0.0 && rng.random::<f64>() < correlation;
    let (age, gender, income, postcode) = if follow {
        let a = seed::splitmix64(archetype as u64 + 1);
        (
            (a % 6) as u32,
            ((a >> 8) % 2) as u32,
            ((a >> 16) % 5) as u32,
            ((a >> 24) % N_POSTCODES as u64) as u32,
        )
    } else {
        (
            rng.random_range(0..6),
            rng.random_range(0..2),
            rng.random_range(0..5),
            rng.random_range(0..N_POSTCODES as u32),
        )
    };
    let city = postcode % N_CITIES as u32;
    let province = city % N_PROVINCES as u32;
    [age, gender, income, postcode, city, province]
}

/// Generate a dataset from explicit archetypes; categories are labeled
/// `CAT1..CATK` and clients `client1..clientN`.
pub fn generate(config: &GenConfig, archetypes: &[ArchetypeSpec]) -> Result<SyntheticDataset> {
    config.validate()?;
    if archetypes.is_empty() {
        return Err(Error::Config("at least one archetype is required".into()));
    }
    if archetypes.len() != config.n_archetypes {
        return Err(Error::Config(format!(
            "n_archetypes is {} but {} archetypes were given",
            config.n_archetypes,
            archetypes.len()
        )));
    }
    let k = config.n_categories;
    for a in archetypes {
        a.validate(k)?;
    }
    let total_weight: f64 = archetypes.iter().map(|a| a.weight).sum();
    let cumulative: Vec<f64> = archetypes
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a.weight / total_weight;
            Some(*acc)
        })
        .collect();
    let normals: Vec<Vec<Normal<f64>>> = archetypes
        .iter()
        .map(|a| {
            a.log_amount_mean
                .iter()
                .zip(&a.log_amount_std)
                .map(|(&m, &s)| Normal::new(m, s).expect("validated std"))
                .collect()
        })
        .collect();

    let rows: Vec<(usize, Vec<Option<f64>>, [u32; 6])> = (0..config.n_clients)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive_indexed(config.seed, "synth/client", i as u64));
            let u: f64 = rng.random();
            let arch = cumulative.iter().position(|&c| u < c).unwrap_or(archetypes.len() - 1);
            let spec = &archetypes[arch];
            let row = (0..k)
                .map(|c| {
                    let active = rng.random::<f64>() < spec.activity_prob[c];
                    let magnitude = normals[arch][c].sample(&mut rng).exp();
                    if !active {
                        return None;
                    }
                    let cents = ((magnitude * 100.0).round() / 100.0).max(0.01);
                    Some(if spec.income_categories.contains(&c) { cents } else { -cents })
                })
                .collect();
            let socio = draw_sociodemo(&mut rng, arch, config.sociodemo_correlation);
            (arch, row, socio)
        })
        .collect();

    let ids: Vec<String> = (1..=config.n_clients).map(|i| format!("client{i}")).collect();
    let labels = (1..=k).map(|c| format!("CAT{c}")).collect();
    let mut values = Vec::with_capacity(config.n_clients * k);
    let mut codes = Vec::with_capacity(config.n_clients);
    let mut labels_out = Vec::with_capacity(config.n_clients);
    for (arch, row, socio) in rows {
        labels_out.push(arch);
        values.extend(row);
        codes.push(socio);
    }
    Ok(SyntheticDataset {
        transactions: TransactionTable::new(ids.clone(), labels, values)?,
        sociodemo: SociodemoTable::new(ids, sociodemo_vocabularies(), codes)?,
        archetypes: labels_out,
        archetype_names: archetypes.iter().map(|a| a.name.clone()).collect(),
    })
}

/// A named archetype set with category labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub category_labels: Vec<String>,
    pub archetypes: Vec<ArchetypeSpec>,
}

impl Preset {
    pub fn n_categories(&self) -> usize {
        self.category_labels.len()
    }

    pub fn category(&self, label: &str) -> Option<usize> {
        self.category_labels.iter().position(|l| l == label)
    }

    /// Generate with this preset's archetypes and category labels. The
    /// category and archetype counts of `config` are taken from the preset.
    pub fn generate(&self, n_clients: usize, seed: u64, sociodemo_correlation: f64) -> Result<SyntheticDataset> {
        let config = GenConfig {
            n_clients,
            n_categories: self.n_categories(),
            n_archetypes: self.archetypes.len(),
            seed,
            sociodemo_correlation,
        };
        let mut ds = generate(&config, &self.archetypes)?;
        let t = &ds.transactions;
        let values = t.rows().flat_map(|r| r.iter().copied()).collect();
        ds.transactions = TransactionTable::new(t.client_ids().to_vec(), self.category_labels.clone(), values)?;
        Ok(ds)
    }

    pub fn by_name(name: &str, n_categories: usize, seed: u64) -> Result<Self> {
        match name {
            "random" | "default" => Ok(Self::random(5, n_categories, seed)),
            "travel" => Ok(Self::travel()),
            "targeting" => Ok(Self::targeting()),
            other => Err(Error::Config(format!("unknown preset {other:?} (random, travel, targeting)"))),
        }
    }

    /// Random archetypes over three kinds of category. The first two are
    /// income. The next block is segment-specific: each archetype uses a
    /// core quarter of it often and the rest rarely. The last block (about
    /// 3/5 of the expense categories) is idiosyncratic: usage does not depend
    /// on the archetype at all.
    pub fn random(n_archetypes: usize, n_categories: usize, seed: u64) -> Self {
        let k = n_categories;
        let mut rng = seed::rng(seed::derive_seed(seed, "synth/archetypes"));
        let n_income = 2.min(k);
        let n_noise = (k - n_income) * 3 / 5;
        let structured = n_income..k - n_noise;
        let core_size = (structured.len() / 4).max(1);
        let base_mean: Vec<f64> = (0..k).map(|_| rng.random_range(3.0..6.5)).collect();
        let noise_prob: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..0.5)).collect();
        let income: BTreeSet<usize> = (0..n_income).collect();
        let archetypes = (0..n_archetypes)
            .map(|a| {
                let mut pool: Vec<usize> = structured.clone().collect();
                rand::seq::SliceRandom::shuffle(pool.as_mut_slice(), &mut rng);
                let core: BTreeSet<usize> = pool.into_iter().take(core_size).collect();
                let activity_prob = (0..k)
                    .map(|c| {
                        if c == 0 {
                            0.85
                        } else if c < n_income {
                            0.3
                        } else if c >= structured.end {
                            noise_prob[c]
                        } else if core.contains(&c) {
                            rng.random_range(0.4..0.75)
                        } else {
                            rng.random_range(0.02..0.1)
                        }
                    })
                    .collect();
                let log_amount_mean = base_mean.iter().map(|m| m + rng.random_range(-0.5..0.5)).collect();
                ArchetypeSpec {
                    name: format!("archetype{a}"),
                    weight: 1.0,
                    activity_prob,
                    log_amount_mean,
                    log_amount_std: vec![0.5; k],
                    income_categories: income.clone(),
                }
            })
            .collect();
        Self {
            name: "random".into(),
            category_labels: (1..=k).map(|c| format!("CAT{c}")).collect(),
            archetypes,
        }
    }

    /// Travel case study: travel-active archetypes are also hotel-active.
    pub fn travel() -> Self {
        let labels = [
            "SALARY", "TRANSFERS_IN", "GROCERIES", "RESTAURANTS", "UTILITIES", "RENT", "FUEL",
            "HIGHWAY_TOLL", "CAR_REPAIR", "CAR_INSURANCE", "HOTELS", "TRAVEL", "AIRLINES",
            "CLOTHING", "ELECTRONICS", "PHARMACY", "EDUCATION", "SPORTS", "SAVINGS", "LEISURE",
        ];
        let profiles: [(&str, &[(&str, f64)]); 6] = [
            ("frequent_traveler", &[("TRAVEL", 0.95), ("AIRLINES", 0.85), ("HOTELS", 0.9), ("RESTAURANTS", 0.85), ("LEISURE", 0.6)]),
            ("road_traveler", &[("TRAVEL", 0.8), ("HOTELS", 0.75), ("FUEL", 0.9), ("HIGHWAY_TOLL", 0.85), ("CAR_INSURANCE", 0.7)]),
            ("commuter", &[("FUEL", 0.95), ("HIGHWAY_TOLL", 0.8), ("CAR_REPAIR", 0.6), ("CAR_INSURANCE", 0.85), ("UTILITIES", 0.8)]),
            ("family", &[("GROCERIES", 0.95), ("EDUCATION", 0.85), ("PHARMACY", 0.8), ("CLOTHING", 0.75), ("UTILITIES", 0.9)]),
            ("student", &[("RESTAURANTS", 0.8), ("ELECTRONICS", 0.7), ("SPORTS", 0.75), ("RENT", 0.85), ("LEISURE", 0.7)]),
            ("saver", &[("SAVINGS", 0.95), ("UTILITIES", 0.85), ("GROCERIES", 0.8), ("PHARMACY", 0.5), ("RENT", 0.4)]),
        ];
        Self::from_profiles("travel", &labels, &profiles, 0.05, &[0.0; 0])
    }

    /// Descriptor-level campaign scenario: car owners split into holders of
    /// the in-house car policy, holders of one external insurer's policy, and
    /// owners with neither; everyone else has little car-related activity.
    /// Shares follow a database where about 7000 in 3E5 hold the in-house policy.
    pub fn targeting() -> Self {
        let labels = [
            "SALARY", "TRANSFERS_IN", "GROCERIES", "RESTAURANTS", "UTILITIES", "RENT",
            "OWN_CAR_POLICY", "EXTERNAL_CAR_POLICY", "FUEL", "HIGHWAY_TOLL", "CAR_REPAIR",
            "PARKING", "HOTELS", "TRAVEL", "CLOTHING", "ELECTRONICS", "PHARMACY", "EDUCATION",
            "SPORTS", "SAVINGS", "LEISURE", "PUBLIC_TRANSPORT", "TELECOM", "STREAMING",
        ];
        let car: &[(&str, f64)] = &[("FUEL", 0.9), ("HIGHWAY_TOLL", 0.7), ("CAR_REPAIR", 0.55), ("PARKING", 0.6)];
        let with = |extra: &[(&'static str, f64)]| -> Vec<(&'static str, f64)> {
            car.iter().copied().chain(extra.iter().copied()).collect()
        };
        let own = with(&[("OWN_CAR_POLICY", 1.0), ("UTILITIES", 0.8)]);
        let external = with(&[("EXTERNAL_CAR_POLICY", 1.0), ("UTILITIES", 0.8)]);
        let other_car = with(&[("UTILITIES", 0.8), ("GROCERIES", 0.7)]);
        let profiles: [(&str, &[(&str, f64)]); 7] = [
            ("car_own_policy", &own),
            ("car_external_policy", &external),
            ("car_other", &other_car),
            ("urban_transit", &[("PUBLIC_TRANSPORT", 0.95), ("RESTAURANTS", 0.8), ("STREAMING", 0.7), ("RENT", 0.8)]),
            ("family", &[("GROCERIES", 0.95), ("EDUCATION", 0.85), ("PHARMACY", 0.8), ("CLOTHING", 0.75)]),
            ("traveler", &[("TRAVEL", 0.9), ("HOTELS", 0.85), ("RESTAURANTS", 0.8), ("LEISURE", 0.6)]),
            ("saver", &[("SAVINGS", 0.95), ("TELECOM", 0.8), ("UTILITIES", 0.85), ("SPORTS", 0.4)]),
        ];
        // in-house policy holders are 7000 / 3E5 of the database
        let weights = [7000.0 / 3e5, 0.06, 0.25];
        Self::from_profiles("targeting", &labels, &profiles, 0.04, &weights)
    }

    fn from_profiles(
        name: &str,
        labels: &[&str],
        profiles: &[(&str, &[(&str, f64)])],
        background: f64,
        leading_weights: &[f64],
    ) -> Self {
        let k = labels.len();
        let index = |l: &str| labels.iter().position(|x| *x == l).expect("known label");
        let mut rng = seed::rng(seed::fnv1a64(name.as_bytes()));
        let base_mean: Vec<f64> = (0..k).map(|_| rng.random_range(3.5..6.5)).collect();
        let rest = 1.0 - leading_weights.iter().sum::<f64>();
        let n_rest = (profiles.len() - leading_weights.len()).max(1) as f64;
        let archetypes = profiles
            .iter()
            .enumerate()
            .map(|(a, (pname, active))| {
                let mut activity_prob = vec![background; k];
                activity_prob[0] = 0.85;
                activity_prob[1] = 0.25;
                // policy descriptors only appear where a profile sets them
                for l in ["OWN_CAR_POLICY", "EXTERNAL_CAR_POLICY"] {
                    if let Some(c) = labels.iter().position(|x| *x == l) {
                        activity_prob[c] = 0.0;
                    }
                }
                for (l, p) in active.iter() {
                    activity_prob[index(l)] = *p;
                }
                let log_amount_mean = base_mean
                    .iter()
                    .enumerate()
                    .map(|(c, m)| m + if c == 0 { 2.5 } else { rng.random_range(-0.3..0.3) })
                    .collect();
                ArchetypeSpec {
                    name: pname.to_string(),
                    weight: leading_weights.get(a).copied().unwrap_or(rest / n_rest),
                    activity_prob,
                    log_amount_mean,
                    log_amount_std: vec![0.5; k],
                    income_categories: [0, 1].into_iter().collect(),
                }
            })
            .collect();
        Self {
            name: name.into(),
            category_labels: labels.iter().map(|s| s.to_string()).collect(),
            archetypes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_active(k: usize) -> ArchetypeSpec {
        ArchetypeSpec {
            name: "a".into(),
            weight: 1.0,
            activity_prob: vec![1.0; k],
            log_amount_mean: vec![4.0; k],
            log_amount_std: vec![0.3; k],
            income_categories: [0].into_iter().collect(),
        }
    }

    fn config(n: usize, k: usize, a: usize, seed: u64) -> GenConfig {
        GenConfig {
            n_clients: n,
            n_categories: k,
            n_archetypes: a,
            seed,
            sociodemo_correlation: 0.0,
        }
    }

    #[test]
    fn full_activity_has_no_absent_cells() {
        let ds = generate(&config(200, 6, 1, 1), &[all_active(6)]).unwrap();
        assert_eq!(ds.transactions.present_count(), 200 * 6);
        for row in ds.transactions.rows() {
            assert!(row[0].unwrap() > 0.0);
            assert!(row[1..].iter().all(|v| v.unwrap() < 0.0));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let preset = Preset::random(4, 12, 3);
        let a = preset.generate(500, 9, 0.0).unwrap();
        let b = preset.generate(500, 9, 0.0).unwrap();
        assert_eq!(a.transactions, b.transactions);
        assert_eq!(a.sociodemo, b.sociodemo);
        assert_eq!(a.archetypes, b.archetypes);
        let c = preset.generate(500, 10, 0.0).unwrap();
        assert_ne!(a.transactions, c.transactions);
    }

    #[test]
    fn config_validation() {
        assert!(generate(&config(10, 3, 1, 0), &[]).is_err());
        assert!(generate(&config(10, 4, 1, 0), &[all_active(3)]).is_err());
        let mut bad = all_active(3);
        bad.activity_prob[1] = 1.5;
        assert!(generate(&config(10, 3, 1, 0), &[bad]).is_err());
        let mut c = config(10, 3, 1, 0);
        c.sociodemo_correlation = 2.0;
        assert!(generate(&c, &[all_active(3)]).is_err());
    }

    #[test]
    fn travel_preset_links_travel_and_hotels() {
        let p = Preset::travel();
        let (travel, hotels) = (p.category("TRAVEL").unwrap(), p.category("HOTELS").unwrap());
        for a in &p.archetypes {
            if a.activity_prob[travel] > 0.5 {
                assert!(a.activity_prob[hotels] > 0.5, "{}", a.name);
            }
        }
        let ds = p.generate(300, 1, 0.0).unwrap();
        assert_eq!(ds.transactions.category_index("HOTELS"), Some(hotels));
    }

    #[test]
    fn targeting_preset_prevalence() {
        let p = Preset::targeting();
        let total: f64 = p.archetypes.iter().map(|a| a.weight).sum();
        assert!((p.archetypes[0].weight / total - 7000.0 / 3e5).abs() < 1e-12);
    }
}

//! Reproducible development/test splits and cross-validation folds.
//!
//! Splits are stratified primarily on the class label and secondarily,
//! best-effort, on age-decade x gender cells: each cell contributes to
//! the development side in proportion to its size, with largest-remainder
//! apportionment making the per-class totals exact. All randomness comes
//! from one seeded ChaCha8 stream consumed in a fixed order (non-COVID
//! cells first, then COVID, cells in ascending key order), so a split is
//! a pure function of (records, seed).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Gender, ParticipantRecord, Pools};

/// Id lists of every subset, plus the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub development: Vec<String>,
    pub test: Vec<String>,
    /// Disjoint stratified folds partitioning `development`. Empty until
    /// folds are made.
    pub folds: Vec<Vec<String>>,
    pub observation: Vec<String>,
    pub recovered: Vec<String>,
}

impl DatasetSplit {
    /// Checks the subset algebra: no duplicate ids, development and test
    /// disjoint, folds partition development, observation and recovered
    /// outside both. Any violation is train/test leakage.
    pub fn verify(&self) -> Result<()> {
        let dev = unique_set(&self.development, "development")?;
        let test = unique_set(&self.test, "test")?;
        if let Some(id) = dev.intersection(&test).next() {
            return Err(Error::Leakage(format!(
                "id {id:?} appears in both development and test"
            )));
        }
        if !self.folds.is_empty() {
            let mut seen: HashSet<&str> = HashSet::new();
            for (i, fold) in self.folds.iter().enumerate() {
                for id in fold {
                    if !dev.contains(id.as_str()) {
                        return Err(Error::Leakage(format!(
                            "fold {i} id {id:?} is not a development id"
                        )));
                    }
                    if !seen.insert(id) {
                        return Err(Error::Leakage(format!(
                            "id {id:?} appears in more than one fold"
                        )));
                    }
                }
            }
            if seen.len() != dev.len() {
                return Err(Error::Leakage(format!(
                    "folds cover {} of {} development ids",
                    seen.len(),
                    dev.len()
                )));
            }
        }
        for (name, list) in [
            ("observation", &self.observation),
            ("recovered", &self.recovered),
        ] {
            for id in list {
                if dev.contains(id.as_str()) || test.contains(id.as_str()) {
                    return Err(Error::Leakage(format!(
                        "{name} id {id:?} leaked into development or test"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Training and validation id lists for one cross-validation fold:
    /// the fold itself validates, the remaining folds train.
    pub fn fold_train_val(&self, fold: usize) -> Result<(Vec<String>, Vec<String>)> {
        if fold >= self.folds.len() {
            return Err(Error::Config(format!(
                "fold {fold} out of range 0..{}",
                self.folds.len()
            )));
        }
        let val: HashSet<&str> = self.folds[fold].iter().map(String::as_str).collect();
        let train = self
            .development
            .iter()
            .filter(|id| !val.contains(id.as_str()))
            .cloned()
            .collect();
        Ok((train, self.folds[fold].clone()))
    }

    /// Writes the split as pretty JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("split serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a split back and verifies its subset algebra.
    pub fn load(path: &Path) -> Result<DatasetSplit> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let split: DatasetSplit = serde_json::from_str(&text).map_err(|e| Error::Dataset(format!(
            "split file {}: {e}",
            path.display()
        )))?;
        split.verify()?;
        Ok(split)
    }
}

fn unique_set<'a>(list: &'a [String], what: &str) -> Result<HashSet<&'a str>> {
    let mut set = HashSet::with_capacity(list.len());
    for id in list {
        if !set.insert(id.as_str()) {
            return Err(Error::Leakage(format!("duplicate id {id:?} in {what}")));
        }
    }
    Ok(set)
}

/// Stratification cell: age decade and gender.
fn cell_key(record: &ParticipantRecord) -> (u32, Gender) {
    (record.age / 10, record.gender)
}

fn cells_of<'a>(class: &[&'a ParticipantRecord]) -> BTreeMap<(u32, Gender), Vec<&'a str>> {
    let mut cells: BTreeMap<(u32, Gender), Vec<&str>> = BTreeMap::new();
    for record in class {
        cells.entry(cell_key(record)).or_default().push(&record.id);
    }
    for ids in cells.values_mut() {
        ids.sort_unstable();
    }
    cells
}

/// Integer quotas per cell summing exactly to `target`: floor of the
/// proportional share, with the remainder going to the largest
/// fractional parts (ties to the earlier cell).
fn apportion(sizes: &[usize], ratio: f64, target: usize) -> Vec<usize> {
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&n| (ratio * n as f64).floor() as usize)
        .collect();
    let mut by_remainder: Vec<(f64, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| (ratio * n as f64 - quotas[i] as f64, i))
        .collect();
    by_remainder.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut leftover = target.saturating_sub(quotas.iter().sum::<usize>());
    for (_, i) in by_remainder {
        if leftover == 0 {
            break;
        }
        if quotas[i] < sizes[i] {
            quotas[i] += 1;
            leftover -= 1;
        }
    }
    quotas
}

/// Draws one class's development/test membership, cell by cell.
fn draw_class(
    class: &[&ParticipantRecord],
    ratio: f64,
    rng: &mut ChaCha8Rng,
    development: &mut Vec<String>,
    test: &mut Vec<String>,
) {
    let cells = cells_of(class);
    let sizes: Vec<usize> = cells.values().map(Vec::len).collect();
    let target = (ratio * class.len() as f64).round() as usize;
    let quotas = apportion(&sizes, ratio, target);
    for (ids, quota) in cells.into_values().zip(quotas) {
        let mut ids: Vec<&str> = ids;
        ids.shuffle(rng);
        for (i, id) in ids.into_iter().enumerate() {
            if i < quota {
                development.push(id.to_string());
            } else {
                test.push(id.to_string());
            }
        }
    }
}

/// Stratified development/test split of the splittable pools.
///
/// Each class lands `round(ratio * class size)` members in development.
/// Folds are left empty; see [`make_folds`] or [`split_dataset`].
pub fn split_dev_test(pools: &Pools, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must be inside (0, 1), got {ratio}"
        )));
    }
    let (non_covid, covid) = pools.splittable();
    for (name, class) in [("non-COVID", &non_covid), ("COVID", &covid)] {
        if class.is_empty() {
            return Err(Error::Dataset(format!(
                "cannot split: the {name} class is empty"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut development = Vec::new();
    let mut test = Vec::new();
    draw_class(&non_covid, ratio, &mut rng, &mut development, &mut test);
    draw_class(&covid, ratio, &mut rng, &mut development, &mut test);
    development.sort_unstable();
    test.sort_unstable();

    let mut observation: Vec<String> = pools.observation_ids.iter().cloned().collect();
    observation.sort_unstable();
    let mut recovered: Vec<String> = pools.recovered.iter().map(|r| r.id.clone()).collect();
    recovered.sort_unstable();

    let split = DatasetSplit {
        seed,
        development,
        test,
        folds: Vec::new(),
        observation,
        recovered,
    };
    split.verify()?;
    Ok(split)
}

/// Splits development records into k disjoint stratified folds.
///
/// Within each class, members are shuffled inside their stratification
/// cells and dealt round-robin with a cursor that runs on across
/// classes, so every fold's class counts differ by at most one and the
/// fold sizes stay balanced.
pub fn make_folds(
    development: &[&ParticipantRecord],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let mut classes: [Vec<&ParticipantRecord>; 2] = [Vec::new(), Vec::new()];
    for record in development {
        classes[record.health_status.is_covid() as usize].push(record);
    }
    for (class, name) in classes.iter().zip(["non-COVID", "COVID"]) {
        if class.len() < k {
            return Err(Error::Dataset(format!(
                "cannot make {k} folds: the {name} class has only {} members",
                class.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for class in &classes {
        for (_, mut ids) in cells_of(class) {
            ids.shuffle(&mut rng);
            for id in ids {
                folds[cursor % k].push(id.to_string());
                cursor += 1;
            }
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Development/test split plus k folds in one step, sharing the seed.
pub fn split_dataset(pools: &Pools, ratio: f64, k: usize, seed: u64) -> Result<DatasetSplit> {
    let mut split = split_dev_test(pools, ratio, seed)?;
    let dev_ids: HashSet<&str> = split.development.iter().map(String::as_str).collect();
    let dev_records: Vec<&ParticipantRecord> = pools
        .non_covid
        .iter()
        .chain(pools.covid.iter())
        .filter(|r| dev_ids.contains(r.id.as_str()))
        .collect();
    split.folds = make_folds(&dev_records, k, seed)?;
    split.verify()?;
    Ok(split)
}

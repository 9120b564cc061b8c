//! Participant manifest ingest, filtering, pooling and symptom encoding.
//!
//! A manifest row describes one participant: demographics, self-reported
//! health status, recording date, eight symptom flags and paths to the
//! three sound recordings. This module turns manifests into typed
//! records, screens them against the intake criteria, groups them into
//! the non-COVID / COVID / recovered pools, and derives the binary
//! symptom features and their per-symptom odds ratios.

pub mod split;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::audio;
use crate::error::{Error, Result};

pub use split::{make_folds, split_dataset, split_dev_test, DatasetSplit};

/// Recording modalities every participant contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Breathing,
    Cough,
    Speech,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Breathing, Modality::Cough, Modality::Speech];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Breathing => "breathing",
            Modality::Cough => "cough",
            Modality::Speech => "speech",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        match s.trim().to_ascii_lowercase().as_str() {
            "breathing" => Some(Modality::Breathing),
            "cough" => Some(Modality::Cough),
            "speech" => Some(Modality::Speech),
            _ => None,
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
    Other,
}

impl Gender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        }
    }

    fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Some(Gender::Female),
            "male" | "m" => Some(Gender::Male),
            "other" | "o" => Some(Gender::Other),
            _ => None,
        }
    }
}

/// Self-declared health status from the questionnaire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HealthStatus {
    Healthy,
    Exposed,
    RespiratoryAilment,
    CovidMild,
    CovidModerate,
    CovidAsymptomatic,
    Recovered,
}

impl HealthStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            HealthStatus::Healthy => "healthy",
            HealthStatus::Exposed => "exposed",
            HealthStatus::RespiratoryAilment => "respiratory_ailment",
            HealthStatus::CovidMild => "covid_mild",
            HealthStatus::CovidModerate => "covid_moderate",
            HealthStatus::CovidAsymptomatic => "covid_asymptomatic",
            HealthStatus::Recovered => "recovered",
        }
    }

    fn parse(s: &str) -> Option<HealthStatus> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" => Some(HealthStatus::Healthy),
            "exposed" => Some(HealthStatus::Exposed),
            "respiratory_ailment" => Some(HealthStatus::RespiratoryAilment),
            "covid_mild" => Some(HealthStatus::CovidMild),
            "covid_moderate" => Some(HealthStatus::CovidModerate),
            "covid_asymptomatic" => Some(HealthStatus::CovidAsymptomatic),
            "recovered" => Some(HealthStatus::Recovered),
            _ => None,
        }
    }

    /// Positive class: an active COVID infection of any severity.
    pub fn is_covid(&self) -> bool {
        matches!(
            self,
            HealthStatus::CovidMild | HealthStatus::CovidModerate | HealthStatus::CovidAsymptomatic
        )
    }

    /// Negative class: healthy, exposed-but-untested, or a non-COVID
    /// respiratory condition. Recovered participants are neither.
    pub fn is_non_covid(&self) -> bool {
        matches!(
            self,
            HealthStatus::Healthy | HealthStatus::Exposed | HealthStatus::RespiratoryAilment
        )
    }
}

/// Symptom flags in their fixed feature order. Bit i of a
/// [`SymptomVector`] refers to `SYMPTOM_NAMES[i]`.
pub const SYMPTOM_NAMES: [&str; 8] = [
    "fever",
    "cold",
    "cough",
    "fatigue",
    "muscle_pain",
    "loss_of_smell",
    "sore_throat",
    "breathing_difficulty",
];

/// Feature layout identifier of the 8 binary symptom flags.
pub const SYMPTOM_LAYOUT_ID: &str = "symptoms-v1-8";

/// 8-dimensional binary symptom feature vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SymptomVector {
    pub bits: [u8; 8],
}

impl SymptomVector {
    /// Bits as floating-point features for the classifiers.
    pub fn to_features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// File paths of the three recordings, where uploaded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AudioPaths {
    pub breathing: Option<PathBuf>,
    pub cough: Option<PathBuf>,
    pub speech: Option<PathBuf>,
}

impl AudioPaths {
    pub fn get(&self, modality: Modality) -> Option<&Path> {
        match modality {
            Modality::Breathing => self.breathing.as_deref(),
            Modality::Cough => self.cough.as_deref(),
            Modality::Speech => self.speech.as_deref(),
        }
    }

    pub fn set(&mut self, modality: Modality, path: PathBuf) {
        match modality {
            Modality::Breathing => self.breathing = Some(path),
            Modality::Cough => self.cough = Some(path),
            Modality::Speech => self.speech = Some(path),
        }
    }
}

/// One manifest row: a participant and their uploaded recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub health_status: HealthStatus,
    pub recording_date: NaiveDate,
    /// Flag i follows `SYMPTOM_NAMES[i]`.
    pub symptoms: [bool; 8],
    pub audio_paths: AudioPaths,
}

/// Manifest column order: identity and demographics, the eight symptom
/// flags in feature order, then one path column per modality.
pub const MANIFEST_COLUMNS: [&str; 16] = [
    "id",
    "age",
    "gender",
    "status",
    "date",
    "fever",
    "cold",
    "cough",
    "fatigue",
    "muscle_pain",
    "loss_of_smell",
    "sore_throat",
    "breathing_difficulty",
    "audio_breathing",
    "audio_cough",
    "audio_speech",
];

/// Reads a delimiter-separated manifest with a header row.
///
/// Columns are matched by header name; unknown columns are ignored.
/// Missing symptom or audio-path columns (or empty cells) mean absent.
/// Relative audio paths are resolved against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ParticipantRecord>> {
    let manifest_err = |line: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| manifest_err(0, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| manifest_err(1, e.to_string()))?
        .clone();
    let column: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, name)| (name, i))
        .collect();
    for required in ["id", "age", "gender", "status", "date"] {
        if !column.contains_key(required) {
            return Err(manifest_err(1, format!("missing column {required:?}")));
        }
    }

    let base_dir = path.parent().unwrap_or(Path::new(""));
    let mut records = Vec::new();
    let mut seen_ids = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            manifest_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |name: &str| column.get(name).and_then(|&i| row.get(i)).unwrap_or("");

        let id = cell("id").to_string();
        if id.is_empty() {
            return Err(manifest_err(line, "empty id".into()));
        }
        if !seen_ids.insert(id.clone()) {
            return Err(manifest_err(line, format!("duplicate id {id:?}")));
        }
        let age: u32 = cell("age")
            .parse()
            .map_err(|_| manifest_err(line, format!("invalid age {:?}", cell("age"))))?;
        let gender = Gender::parse(cell("gender"))
            .ok_or_else(|| manifest_err(line, format!("unknown gender {:?}", cell("gender"))))?;
        let health_status = HealthStatus::parse(cell("status"))
            .ok_or_else(|| manifest_err(line, format!("unknown status {:?}", cell("status"))))?;
        let recording_date = NaiveDate::parse_from_str(cell("date"), "%Y-%m-%d")
            .map_err(|_| manifest_err(line, format!("invalid date {:?}", cell("date"))))?;

        let mut symptoms = [false; 8];
        for (i, name) in SYMPTOM_NAMES.iter().enumerate() {
            symptoms[i] = parse_flag(cell(name))
                .ok_or_else(|| manifest_err(line, format!("invalid {name} flag {:?}", cell(name))))?;
        }

        let mut audio_paths = AudioPaths::default();
        for modality in Modality::ALL {
            let value = cell(&format!("audio_{modality}"));
            if !value.is_empty() {
                let p = PathBuf::from(value);
                let p = if p.is_absolute() { p } else { base_dir.join(p) };
                audio_paths.set(modality, p);
            }
        }

        records.push(ParticipantRecord {
            id,
            age,
            gender,
            health_status,
            recording_date,
            symptoms,
            audio_paths,
        });
    }
    Ok(records)
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" => Some(false),
        "1" | "true" | "yes" => Some(true),
        _ => None,
    }
}

/// Writes records back out in the canonical column order.
pub fn save_manifest(path: &Path, records: &[ParticipantRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::FeatureFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let io_err = |e: csv::Error| Error::FeatureFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    writer.write_record(MANIFEST_COLUMNS).map_err(io_err)?;
    for r in records {
        let mut row: Vec<String> = vec![
            r.id.clone(),
            r.age.to_string(),
            r.gender.as_str().into(),
            r.health_status.as_str().into(),
            r.recording_date.format("%Y-%m-%d").to_string(),
        ];
        for &flag in &r.symptoms {
            row.push(if flag { "1".into() } else { "0".into() });
        }
        for modality in Modality::ALL {
            row.push(
                r.audio_paths
                    .get(modality)
                    .map(|p| p.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            );
        }
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Intake screening thresholds.
#[derive(Debug, Clone, Copy)]
pub struct FilterOptions {
    pub min_age: u32,
    pub max_age: u32,
    pub min_duration_ms: f64,
    pub min_peak: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            min_age: 15,
            max_age: 80,
            min_duration_ms: audio::MIN_DURATION_MS,
            min_peak: audio::MIN_PEAK,
        }
    }
}

/// One excluded participant and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub id: String,
    /// Set when a specific recording caused the rejection.
    pub modality: Option<Modality>,
    pub reason: String,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.modality {
            Some(m) => write!(f, "{}: {} ({m})", self.id, self.reason),
            None => write!(f, "{}: {}", self.id, self.reason),
        }
    }
}

/// Screens records against age bounds and per-recording duration/peak
/// floors. A record is retained only if every one of the three
/// recordings is present, readable and passes the floors on the loaded
/// (pre-normalization) signal.
///
/// Returns the retained records and a rejection log. Unreadable audio
/// rejects the record; it is not a fatal error.
pub fn filter_participants(
    records: Vec<ParticipantRecord>,
    options: &FilterOptions,
) -> (Vec<ParticipantRecord>, Vec<Rejection>) {
    let mut retained = Vec::new();
    let mut rejections = Vec::new();
    'record: for record in records {
        if record.age < options.min_age || record.age > options.max_age {
            rejections.push(Rejection {
                id: record.id.clone(),
                modality: None,
                reason: "age".into(),
            });
            continue;
        }
        for modality in Modality::ALL {
            let Some(path) = record.audio_paths.get(modality) else {
                rejections.push(Rejection {
                    id: record.id.clone(),
                    modality: Some(modality),
                    reason: "missing".into(),
                });
                continue 'record;
            };
            let loaded = match audio::read_wav(path) {
                Ok(a) => a,
                Err(_) => {
                    rejections.push(Rejection {
                        id: record.id.clone(),
                        modality: Some(modality),
                        reason: "unreadable".into(),
                    });
                    continue 'record;
                }
            };
            if let Err(reason) = audio::validate(&loaded, options.min_duration_ms, options.min_peak)
            {
                rejections.push(Rejection {
                    id: record.id.clone(),
                    modality: Some(modality),
                    reason: reason.label().into(),
                });
                continue 'record;
            }
        }
        retained.push(record);
    }
    (retained, rejections)
}

/// Inclusive date window of the observation subset: non-COVID
/// participants recorded while local case counts were surging.
pub fn observation_window() -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::from_ymd_opt(2021, 4, 1).unwrap(),
        NaiveDate::from_ymd_opt(2021, 5, 7).unwrap(),
    )
}

/// The three health-status pools plus the observation subset.
///
/// `observation_ids` members stay inside `non_covid` but are excluded
/// from development/test splitting; they are scored separately.
#[derive(Debug, Clone, Default)]
pub struct Pools {
    pub non_covid: Vec<ParticipantRecord>,
    pub covid: Vec<ParticipantRecord>,
    pub recovered: Vec<ParticipantRecord>,
    pub observation_ids: BTreeSet<String>,
}

impl Pools {
    /// Records eligible for the development/test split: both classes
    /// with the observation subset removed.
    pub fn splittable(&self) -> (Vec<&ParticipantRecord>, Vec<&ParticipantRecord>) {
        let non_covid = self
            .non_covid
            .iter()
            .filter(|r| !self.observation_ids.contains(&r.id))
            .collect();
        let covid = self.covid.iter().collect();
        (non_covid, covid)
    }

    /// Observation-subset records (a view into `non_covid`).
    pub fn observation(&self) -> Vec<&ParticipantRecord> {
        self.non_covid
            .iter()
            .filter(|r| self.observation_ids.contains(&r.id))
            .collect()
    }
}

/// Groups records into pools by health status and marks the
/// observation subset by recording date.
pub fn assign_pools(records: Vec<ParticipantRecord>) -> Pools {
    let (start, end) = observation_window();
    let mut pools = Pools::default();
    for record in records {
        if record.health_status.is_covid() {
            pools.covid.push(record);
        } else if record.health_status == HealthStatus::Recovered {
            pools.recovered.push(record);
        } else {
            if record.recording_date >= start && record.recording_date <= end {
                pools.observation_ids.insert(record.id.clone());
            }
            pools.non_covid.push(record);
        }
    }
    pools
}

/// Encodes the eight symptom flags as a binary vector in
/// [`SYMPTOM_NAMES`] order.
pub fn encode_symptoms(record: &ParticipantRecord) -> SymptomVector {
    let mut bits = [0u8; 8];
    for (bit, &flag) in bits.iter_mut().zip(&record.symptoms) {
        *bit = flag as u8;
    }
    SymptomVector { bits }
}

/// Odds ratio of one symptom between the COVID and non-COVID classes:
/// (a/b)/(c/d) with a,b the with/without counts among COVID
/// participants and c,d among non-COVID. Recovered participants belong
/// to neither class and are skipped.
///
/// When any cell is zero, 0.5 is added to all four cells so the ratio
/// stays finite.
pub fn odds_ratio(records: &[ParticipantRecord], symptom: usize) -> Result<f64> {
    if symptom >= SYMPTOM_NAMES.len() {
        return Err(Error::Config(format!(
            "symptom index {symptom} out of range 0..{}",
            SYMPTOM_NAMES.len()
        )));
    }
    let mut with = [0.0f64; 2]; // [non-COVID, COVID]
    let mut without = [0.0f64; 2];
    for record in records {
        let class = if record.health_status.is_covid() {
            1
        } else if record.health_status.is_non_covid() {
            0
        } else {
            continue;
        };
        if record.symptoms[symptom] {
            with[class] += 1.0;
        } else {
            without[class] += 1.0;
        }
    }
    for (class, name) in [(1, "COVID"), (0, "non-COVID")] {
        if with[class] + without[class] == 0.0 {
            return Err(Error::Dataset(format!(
                "odds ratio for {:?} needs at least one {name} participant",
                SYMPTOM_NAMES[symptom]
            )));
        }
    }
    let (mut a, mut b, mut c, mut d) = (with[1], without[1], with[0], without[0]);
    if a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0 {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
    }
    Ok((a / b) / (c / d))
}

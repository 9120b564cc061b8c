//! Pipeline operations behind the command-line interface.
//!
//! Each operation reads its inputs from the configured paths, writes
//! its artifacts into the output directory and returns the data it
//! produced, so the crate examples can drive the same entry points the
//! binary exposes. Artifacts are named by channel, model family,
//! feature layout and seed; each embeds the configuration hash and the
//! seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::cv::{self, CvReport, GridPoint, ModelFamily};
use crate::classifiers::model_io::{load_model, save_model, SavedModel};
use crate::config::{hex_sha256, RunConfig};
use crate::dataset::split::{split_dataset, DatasetSplit};
use crate::dataset::{
    assign_pools, encode_symptoms, filter_participants, load_manifest, FilterOptions, Modality,
    ParticipantRecord, Rejection, SYMPTOM_LAYOUT_ID, SYMPTOM_NAMES,
};
use crate::eval::ablation::{ablation, AblationRow, ABLATION_GROUPS};
use crate::eval::{self, ScoredSet};
use crate::featfile::{self, FeatureRow, FeatureTable};
use crate::functionals::{self, layout};
use crate::lld;
use crate::report::{self, RunSummary, Stamp};
use crate::{audio, Error, Result};

/// The four screening channels: three recordings plus the symptom
/// report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Acoustic(Modality),
    Symptoms,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::Acoustic(Modality::Breathing),
        Channel::Acoustic(Modality::Cough),
        Channel::Acoustic(Modality::Speech),
        Channel::Symptoms,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Acoustic(m) => m.as_str(),
            Channel::Symptoms => "symptoms",
        }
    }

    pub fn parse(s: &str) -> Result<Channel> {
        if s == "symptoms" {
            return Ok(Channel::Symptoms);
        }
        Modality::parse(s).map(Channel::Acoustic).ok_or_else(|| {
            Error::Config(format!(
                "unknown channel {s}; expected breathing, cough, speech or symptoms"
            ))
        })
    }

    /// Feature layout this channel's vectors follow.
    pub fn layout_id(&self, config: &RunConfig) -> String {
        match self {
            Channel::Acoustic(_) => config.layout_id.clone(),
            Channel::Symptoms => SYMPTOM_LAYOUT_ID.to_string(),
        }
    }

    /// Model family for this channel: acoustic channels follow the
    /// configured family, the symptom report always uses the tree.
    pub fn family(&self, config: &RunConfig) -> Result<ModelFamily> {
        match self {
            Channel::Acoustic(_) => ModelFamily::parse(&config.family),
            Channel::Symptoms => Ok(ModelFamily::SymptomTree),
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Channels selected by an optional command-line argument; all four
/// when absent.
pub fn selected_channels(arg: Option<&str>) -> Result<Vec<Channel>> {
    match arg {
        None => Ok(Channel::ALL.to_vec()),
        Some(s) => Ok(vec![Channel::parse(s)?]),
    }
}

fn stamp(config: &RunConfig) -> Stamp {
    Stamp {
        config_hash: config.hash(),
        seed: config.seed,
    }
}

// Artifact paths. Feature files are keyed by channel and layout only:
// extraction does not depend on the seed or the model family.

pub fn features_path(config: &RunConfig, channel: Channel) -> PathBuf {
    let ext = if config.binary_features { "bin" } else { "csv" };
    config.output_dir.join(format!(
        "features_{}_{}.{ext}",
        channel.as_str(),
        channel.layout_id(config)
    ))
}

fn tagged_path(config: &RunConfig, prefix: &str, tag: &str, family: &str, layout: &str, ext: &str) -> PathBuf {
    config.output_dir.join(format!(
        "{prefix}_{tag}_{family}_{layout}_s{}.{ext}",
        config.seed
    ))
}

fn channel_path(config: &RunConfig, prefix: &str, channel: Channel, ext: &str) -> Result<PathBuf> {
    Ok(tagged_path(
        config,
        prefix,
        channel.as_str(),
        channel.family(config)?.as_str(),
        &channel.layout_id(config),
        ext,
    ))
}

pub fn model_path(config: &RunConfig, channel: Channel) -> Result<PathBuf> {
    channel_path(config, "model", channel, "json")
}

pub fn scores_path(config: &RunConfig, channel: Channel) -> Result<PathBuf> {
    channel_path(config, "scores", channel, "csv")
}

fn fused_path(config: &RunConfig, prefix: &str, ext: &str) -> PathBuf {
    tagged_path(config, prefix, "fused", &config.family, &config.layout_id, ext)
}

pub fn split_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join(format!("split_s{}.json", config.seed))
}

fn extract_state_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join("extract_state.json")
}

fn rejections_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join("rejections.csv")
}

fn ensure_output_dir(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))
}

/// Rejects a configuration whose acoustic layout does not match the
/// extractor built into this binary.
fn check_acoustic_layout(config: &RunConfig) -> Result<()> {
    if config.layout_id != layout::LAYOUT_ID {
        return Err(Error::Config(format!(
            "layout_id {} is not supported; this build extracts {}",
            config.layout_id,
            layout::LAYOUT_ID
        )));
    }
    Ok(())
}

/// Manifest records with audio paths optionally rebased onto
/// `audio_root`: paths that resolve under the manifest's directory are
/// re-rooted, absolute paths outside it stay as loaded.
fn load_records(config: &RunConfig) -> Result<Vec<ParticipantRecord>> {
    let mut records = load_manifest(&config.manifest)?;
    if let Some(root) = &config.audio_root {
        let base = config.manifest.parent().unwrap_or(Path::new(""));
        for record in &mut records {
            for modality in Modality::ALL {
                if let Some(path) = record.audio_paths.get(modality) {
                    let rebased = match path.strip_prefix(base) {
                        Ok(rel) => root.join(rel),
                        Err(_) => path.to_path_buf(),
                    };
                    record.audio_paths.set(modality, rebased);
                }
            }
        }
    }
    Ok(records)
}

fn filter_options(config: &RunConfig) -> FilterOptions {
    FilterOptions {
        min_age: config.min_age,
        max_age: config.max_age,
        min_duration_ms: config.min_duration_ms,
        min_peak: config.min_peak,
    }
}

/// Class labels for every active-class participant in the manifest.
/// Recovered participants carry no label and are absent.
fn load_labels(records: &[ParticipantRecord]) -> BTreeMap<String, u8> {
    let mut labels = BTreeMap::new();
    for record in records {
        if record.health_status.is_covid() {
            labels.insert(record.id.clone(), 1u8);
        } else if record.health_status.is_non_covid() {
            labels.insert(record.id.clone(), 0u8);
        }
    }
    labels
}

fn labels_for(ids: &[String], labels: &BTreeMap<String, u8>) -> Result<Vec<u8>> {
    ids.iter()
        .map(|id| {
            labels.get(id).copied().ok_or_else(|| {
                Error::Dataset(format!("participant {id} has no class label in the manifest"))
            })
        })
        .collect()
}

// Split artifact: the split plus the configuration that produced it.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitArtifact {
    config_hash: String,
    split: DatasetSplit,
}

fn save_split(config: &RunConfig, split: &DatasetSplit) -> Result<PathBuf> {
    let path = split_path(config);
    let body = SplitArtifact {
        config_hash: config.hash(),
        split: split.clone(),
    };
    let mut text = serde_json::to_string_pretty(&body).expect("split serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads the run's split and re-verifies its subset algebra.
pub fn load_split(config: &RunConfig) -> Result<DatasetSplit> {
    let path = split_path(config);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let body: SplitArtifact = serde_json::from_str(&text).map_err(|e| Error::Artifact {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    body.split.verify()?;
    if body.split.seed != config.seed {
        return Err(Error::Config(format!(
            "split was made under seed {}, configuration says {}",
            body.split.seed, config.seed
        )));
    }
    Ok(body.split)
}

// Extraction.

/// Resume index for extraction: the hash of the extraction-relevant
/// configuration plus, per recording, the content hash of its source
/// WAV. A row is reused only when both still match.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ExtractState {
    config_hash: String,
    seed: u64,
    extract_hash: String,
    rows: BTreeMap<String, String>,
}

fn row_key(id: &str, modality: Modality) -> String {
    format!("{id}/{}", modality.as_str())
}

/// What extraction did, for reporting and exit-code selection.
#[derive(Debug)]
pub struct ExtractOutcome {
    pub n_retained: usize,
    pub rejections: Vec<Rejection>,
    /// Recordings that passed intake but failed extraction, with the
    /// failure text.
    pub failures: Vec<(String, String)>,
    pub recomputed: usize,
    pub reused: usize,
    pub feature_files: Vec<PathBuf>,
}

impl ExtractOutcome {
    /// Data was lost: a recording could not be decoded at intake or
    /// failed during extraction. The run still produced its other rows.
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
            || self
                .rejections
                .iter()
                .any(|r| r.reason == "unreadable")
    }
}

fn save_rejections(path: &Path, rejections: &[Rejection], stamp: &Stamp) -> Result<()> {
    let mut out = format!(
        "# config_hash = {}\n# seed = {}\nid,modality,reason\n",
        stamp.config_hash, stamp.seed
    );
    for r in rejections {
        let modality = r.modality.map(|m| m.as_str()).unwrap_or("");
        out.push_str(&format!("{},{},{}\n", r.id, modality, r.reason));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Extracts feature files for all four channels.
///
/// Intake screening rejections are expected filtering; undecodable or
/// extraction-failing recordings additionally mark the outcome partial.
/// Recordings whose source bytes and extraction settings are unchanged
/// since the recorded state are reused, not recomputed. Acoustic rows
/// are computed on a worker pool bounded by `workers`; output order is
/// manifest order regardless of worker count.
pub fn cmd_extract(config: &RunConfig) -> Result<ExtractOutcome> {
    check_acoustic_layout(config)?;
    ensure_output_dir(config)?;
    let run_stamp = stamp(config);
    let extract_hash = config.extract_section_hash();

    let records = load_records(config)?;
    let (retained, rejections) = filter_participants(records, &filter_options(config));
    save_rejections(&rejections_path(config), &rejections, &run_stamp)?;

    // Previous state and tables, rejected wholesale if the extraction
    // settings changed.
    let state_path = extract_state_path(config);
    let old_state: ExtractState = fs::read_to_string(&state_path)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .filter(|s: &ExtractState| s.extract_hash == extract_hash)
        .unwrap_or_default();
    let mut old_rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if !old_state.rows.is_empty() {
        for modality in Modality::ALL {
            let path = features_path(config, Channel::Acoustic(modality));
            if let Ok(table) = featfile::load(&path) {
                if table.layout_id == config.layout_id {
                    for row in table.rows {
                        old_rows.insert(row_key(&row.id, modality), row.values);
                    }
                }
            }
        }
    }

    // Decide per recording: reuse or recompute.
    struct Job {
        key: String,
        id: String,
        path: PathBuf,
    }
    let mut wav_hashes: BTreeMap<String, String> = BTreeMap::new();
    let mut jobs: Vec<Job> = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut reused: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for record in &retained {
        for modality in Modality::ALL {
            let key = row_key(&record.id, modality);
            let path = record
                .audio_paths
                .get(modality)
                .expect("retained records have all three recordings")
                .to_path_buf();
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => {
                    failures.push((key, format!("read failed: {e}")));
                    continue;
                }
            };
            let wav_hash = hex_sha256(&bytes);
            let unchanged = old_state.rows.get(&key) == Some(&wav_hash);
            wav_hashes.insert(key.clone(), wav_hash);
            match old_rows.get(&key) {
                Some(values) if unchanged => {
                    reused.insert(key, values.clone());
                }
                _ => jobs.push(Job {
                    key,
                    id: record.id.clone(),
                    path,
                }),
            }
        }
    }

    // Compute missing rows in parallel; results keep job order.
    let frame = config.frame_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Other(format!("worker pool: {e}")))?;
    let computed: Vec<Result<Vec<f64>>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let segment = audio::preprocess_file(&job.path, &job.id)?;
                let matrix = lld::extract_lld_matrix(&segment.samples, segment.sample_rate, &frame)?;
                let vector = functionals::assemble_feature_vector(&matrix)?;
                Ok(vector.values)
            })
            .collect()
    });

    let mut fresh: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (job, result) in jobs.iter().zip(computed) {
        match result {
            Ok(values) => {
                fresh.insert(job.key.clone(), values);
            }
            Err(e) => failures.push((job.key.clone(), e.to_string())),
        }
    }
    let recomputed = fresh.len();
    let n_reused = reused.len();

    // Assemble and write the tables in manifest order.
    let mut feature_files = Vec::new();
    let mut final_rows: BTreeMap<String, String> = BTreeMap::new();
    for modality in Modality::ALL {
        let mut table = FeatureTable::new(config.layout_id.clone(), layout::N_DIMENSIONS);
        for record in &retained {
            let key = row_key(&record.id, modality);
            let values = reused.get(&key).or_else(|| fresh.get(&key));
            if let Some(values) = values {
                table.push(FeatureRow {
                    id: record.id.clone(),
                    modality: modality.as_str().to_string(),
                    values: values.clone(),
                })?;
                final_rows.insert(key.clone(), wav_hashes[&key].clone());
            }
        }
        let path = features_path(config, Channel::Acoustic(modality));
        save_table(&table, &path, config)?;
        feature_files.push(path);
    }

    let mut symptoms = FeatureTable::new(SYMPTOM_LAYOUT_ID, SYMPTOM_NAMES.len());
    for record in &retained {
        symptoms.push(FeatureRow {
            id: record.id.clone(),
            modality: "symptoms".to_string(),
            values: encode_symptoms(record).to_features(),
        })?;
    }
    let symptoms_path = features_path(config, Channel::Symptoms);
    save_table(&symptoms, &symptoms_path, config)?;
    feature_files.push(symptoms_path);

    let state = ExtractState {
        config_hash: run_stamp.config_hash.clone(),
        seed: run_stamp.seed,
        extract_hash,
        rows: final_rows,
    };
    let mut text = serde_json::to_string_pretty(&state).expect("state serializes");
    text.push('\n');
    fs::write(&state_path, text).map_err(|e| Error::io(&state_path, e))?;

    Ok(ExtractOutcome {
        n_retained: retained.len(),
        rejections,
        failures,
        recomputed,
        reused: n_reused,
        feature_files,
    })
}

fn save_table(table: &FeatureTable, path: &Path, config: &RunConfig) -> Result<()> {
    if config.binary_features {
        featfile::save_binary(table, path)
    } else {
        featfile::save_text(table, path)
    }
}

// Splitting.

/// Screens the manifest, pools by health status and writes the
/// stratified development/test split with its cross-validation folds.
pub fn cmd_split(config: &RunConfig) -> Result<DatasetSplit> {
    ensure_output_dir(config)?;
    let records = load_records(config)?;
    let (retained, _) = filter_participants(records, &filter_options(config));
    let pools = assign_pools(retained);
    let split = split_dataset(&pools, config.dev_ratio, config.folds, config.seed)?;
    save_split(config, &split)?;
    Ok(split)
}

// Training and grid search.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CvArtifact {
    config_hash: String,
    seed: u64,
    channel: String,
    report: CvReport,
}

/// Hyperparameter grid from the configured lists. Equal to the
/// built-in defaults unless the configuration overrides them.
fn build_grid(
    family: ModelFamily,
    features: &[Vec<f64>],
    config: &RunConfig,
) -> Result<Vec<GridPoint>> {
    let mut grid = Vec::new();
    match family {
        ModelFamily::Logistic | ModelFamily::LinearSvm => {
            for &lambda in &config.lambda_grid {
                grid.push(GridPoint {
                    lambda,
                    gamma: None,
                    min_samples_leaf: None,
                });
            }
        }
        ModelFamily::RbfSvm => {
            // gamma_grid scales the median pairwise squared distance by
            // the built-in scale list, whose middle entry is 1; that
            // entry recovers the median itself.
            debug_assert_eq!(cv::GAMMA_SCALES[2], 1.0);
            let median = cv::gamma_grid(features)?[2];
            for &lambda in &config.lambda_grid {
                for &scale in &config.gamma_scales {
                    grid.push(GridPoint {
                        lambda,
                        gamma: Some(scale * median),
                        min_samples_leaf: None,
                    });
                }
            }
        }
        ModelFamily::SymptomTree => {
            for &leaf in &config.min_samples_leaf_grid {
                grid.push(GridPoint {
                    lambda: 0.0,
                    gamma: None,
                    min_samples_leaf: Some(leaf),
                });
            }
        }
    }
    Ok(grid)
}

struct TrainedChannel {
    report: CvReport,
    model: SavedModel,
}

fn train_channel(
    config: &RunConfig,
    channel: Channel,
    split: &DatasetSplit,
    labels: &BTreeMap<String, u8>,
) -> Result<TrainedChannel> {
    let table = featfile::load(&features_path(config, channel))?;
    let expected_layout = channel.layout_id(config);
    if table.layout_id != expected_layout {
        return Err(Error::Config(format!(
            "feature file for {channel} uses layout {}, expected {expected_layout}",
            table.layout_id
        )));
    }
    let dev_ids = split.development.clone();
    let features = table.select(&dev_ids)?;
    let dev_labels = labels_for(&dev_ids, labels)?;
    let folds = cv::index_folds(&dev_ids, &split.folds)?;
    let family = channel.family(config)?;
    let grid = build_grid(family, &features, config)?;
    let (report, fitted) = cv::cross_validate(
        &features,
        &dev_labels,
        &folds,
        family,
        &grid,
        config.balanced,
    )?;
    let model = SavedModel::from_fitted(fitted, expected_layout, dev_ids);
    Ok(TrainedChannel { report, model })
}

fn save_cv_report(config: &RunConfig, channel: Channel, report: &CvReport) -> Result<PathBuf> {
    let path = channel_path(config, "cv", channel, "json")?;
    let body = CvArtifact {
        config_hash: config.hash(),
        seed: config.seed,
        channel: channel.as_str().to_string(),
        report: report.clone(),
    };
    let mut text = serde_json::to_string_pretty(&body).expect("cv report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Grid search only: cross-validates each channel and writes the
/// candidate table without saving a model.
pub fn cmd_cv(config: &RunConfig, channels: &[Channel]) -> Result<Vec<(Channel, CvReport)>> {
    ensure_output_dir(config)?;
    let records = load_manifest(&config.manifest)?;
    let labels = load_labels(&records);
    let split = load_split(config)?;
    let mut out = Vec::new();
    for &channel in channels {
        let trained = train_channel(config, channel, &split, &labels)?;
        save_cv_report(config, channel, &trained.report)?;
        out.push((channel, trained.report));
    }
    Ok(out)
}

/// Cross-validates, refits the winner on the full development set and
/// writes both the model file and the grid-search report.
pub fn cmd_train(
    config: &RunConfig,
    channels: &[Channel],
) -> Result<Vec<(Channel, CvReport, PathBuf)>> {
    ensure_output_dir(config)?;
    let records = load_manifest(&config.manifest)?;
    let labels = load_labels(&records);
    let split = load_split(config)?;
    let mut out = Vec::new();
    for &channel in channels {
        let trained = train_channel(config, channel, &split, &labels)?;
        save_cv_report(config, channel, &trained.report)?;
        let path = model_path(config, channel)?;
        save_model(&trained.model, &path)?;
        out.push((channel, trained.report, path));
    }
    Ok(out)
}

// Evaluation.

/// Scores the held-out test participants with a trained model and
/// writes the score file, the ROC points and the summary document.
///
/// Any overlap between the test ids and the ids the model was trained
/// on is train/test leakage and aborts the evaluation.
pub fn cmd_evaluate(config: &RunConfig, channels: &[Channel]) -> Result<Vec<RunSummary>> {
    ensure_output_dir(config)?;
    let records = load_manifest(&config.manifest)?;
    let labels = load_labels(&records);
    let split = load_split(config)?;
    let run_stamp = stamp(config);
    let mut out = Vec::new();
    for &channel in channels {
        let model = load_model(&model_path(config, channel)?)?;
        model.check_layout(&channel.layout_id(config))?;
        let train_ids: BTreeSet<&str> = model.train_ids.iter().map(String::as_str).collect();
        let contaminated: Vec<&str> = split
            .test
            .iter()
            .map(String::as_str)
            .filter(|id| train_ids.contains(id))
            .collect();
        if !contaminated.is_empty() {
            return Err(Error::Leakage(format!(
                "{} test ids were part of the {channel} model's training set: {}",
                contaminated.len(),
                contaminated.join(", ")
            )));
        }

        let table = featfile::load(&features_path(config, channel))?;
        let rows = table.select(&split.test)?;
        let mut scores = Vec::with_capacity(rows.len());
        for row in &rows {
            scores.push(model.predict(row)?);
        }
        let test_labels = labels_for(&split.test, &labels)?;
        let scored = ScoredSet::new(channel.as_str(), split.test.clone(), scores, test_labels)?;
        let eval_report = eval::evaluate(&scored, config.target_specificity)?;

        report::save_scores(&scores_path(config, channel)?, &scored, &run_stamp)?;
        report::save_roc_points(&channel_path(config, "roc", channel, "csv")?, &eval_report, &run_stamp)?;
        let summary = RunSummary::new(
            &eval_report,
            &run_stamp,
            channel.family(config)?.as_str(),
            &channel.layout_id(config),
        );
        summary.save(&channel_path(config, "eval", channel, "json")?)?;
        out.push(summary);
    }
    Ok(out)
}

// Fusion.

/// Mean-fuses the configured channels' score files and evaluates the
/// fused scores. Input files must come from runs under the same seed.
pub fn cmd_fuse(config: &RunConfig) -> Result<RunSummary> {
    ensure_output_dir(config)?;
    let run_stamp = stamp(config);
    let mut sets = Vec::new();
    for member in &config.fusion {
        let channel = Channel::parse(member)?;
        let (set, member_stamp) = report::load_scores(&scores_path(config, channel)?)?;
        if member_stamp.seed != config.seed {
            return Err(Error::Config(format!(
                "score file for {member} was produced under seed {}, configuration says {}",
                member_stamp.seed, config.seed
            )));
        }
        sets.push(set);
    }
    let fused = eval::fuse(&sets)?;
    let eval_report = eval::evaluate(&fused, config.target_specificity)?;
    report::save_scores(&fused_path(config, "scores", "csv"), &fused, &run_stamp)?;
    report::save_roc_points(&fused_path(config, "roc", "csv"), &eval_report, &run_stamp)?;
    let summary = RunSummary::new(&eval_report, &run_stamp, &config.family, &config.layout_id);
    summary.save(&fused_path(config, "eval", "json"))?;
    Ok(summary)
}

// Ablation.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AblationArtifact {
    config_hash: String,
    seed: u64,
    family: String,
    per_modality: Vec<(String, Vec<AblationRow>)>,
}

fn ablation_csv_path(config: &RunConfig) -> PathBuf {
    tagged_path(config, "ablation", "table", &config.family, &config.layout_id, "csv")
}

fn ablation_json_path(config: &RunConfig) -> PathBuf {
    tagged_path(config, "ablation", "table", &config.family, &config.layout_id, "json")
}

/// Per-group feature ablation over the acoustic modalities: for every
/// descriptor group, the test AUC with only that group and with
/// everything but it, hyperparameters re-selected per cell. The last
/// row carries the full feature set.
pub fn cmd_ablate(
    config: &RunConfig,
    modalities: &[Modality],
) -> Result<Vec<(String, Vec<AblationRow>)>> {
    check_acoustic_layout(config)?;
    ensure_output_dir(config)?;
    let records = load_manifest(&config.manifest)?;
    let labels = load_labels(&records);
    let split = load_split(config)?;
    let family = ModelFamily::parse(&config.family)?;
    let contours = layout::contour_labels();
    let mut groups: Vec<String> = ABLATION_GROUPS.iter().map(|s| s.to_string()).collect();
    groups.push("all".to_string());

    let mut per_modality = Vec::new();
    for &modality in modalities {
        let table = featfile::load(&features_path(config, Channel::Acoustic(modality)))?;
        let dev = table.select(&split.development)?;
        let dev_labels = labels_for(&split.development, &labels)?;
        let test = table.select(&split.test)?;
        let test_labels = labels_for(&split.test, &labels)?;
        let folds = cv::index_folds(&split.development, &split.folds)?;
        let rows = ablation(
            family,
            &dev,
            &dev_labels,
            &folds,
            &test,
            &test_labels,
            &contours,
            layout::N_FUNCTIONALS,
            &groups,
            config.balanced,
        )?;
        per_modality.push((modality.as_str().to_string(), rows));
    }

    let run_stamp = stamp(config);
    report::save_ablation_table(&ablation_csv_path(config), &per_modality, &run_stamp)?;
    let body = AblationArtifact {
        config_hash: run_stamp.config_hash.clone(),
        seed: run_stamp.seed,
        family: config.family.clone(),
        per_modality: per_modality.clone(),
    };
    let json_path = ablation_json_path(config);
    let mut text = serde_json::to_string_pretty(&body).expect("ablation serializes");
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(per_modality)
}

// Inference.

/// One participant's inputs: three recordings plus reported symptoms.
#[derive(Debug, Clone)]
pub struct InferInput {
    pub breathing: PathBuf,
    pub cough: PathBuf,
    pub speech: PathBuf,
    /// Symptom names from the documented list; empty means none
    /// reported.
    pub symptoms: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct InferOutput {
    /// One score per channel, in [`Channel::ALL`] order.
    pub scores: Vec<(String, f64)>,
    pub fused: f64,
    pub elapsed_ms: f64,
}

/// Encodes reported symptom names as the 8-bit feature vector.
pub fn symptom_bits(names: &[String]) -> Result<Vec<f64>> {
    let mut bits = vec![0.0; SYMPTOM_NAMES.len()];
    for name in names {
        let i = SYMPTOM_NAMES
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown symptom {name}; expected one of {}",
                    SYMPTOM_NAMES.join(", ")
                ))
            })?;
        bits[i] = 1.0;
    }
    Ok(bits)
}

/// Scores one participant end to end: preprocess and extract each
/// recording, apply the per-channel models, fuse by mean.
pub fn cmd_infer(config: &RunConfig, input: &InferInput) -> Result<InferOutput> {
    check_acoustic_layout(config)?;
    let start = Instant::now();
    let frame = config.frame_config();
    let mut scores = Vec::with_capacity(Channel::ALL.len());
    for (channel, path) in [
        (Channel::Acoustic(Modality::Breathing), &input.breathing),
        (Channel::Acoustic(Modality::Cough), &input.cough),
        (Channel::Acoustic(Modality::Speech), &input.speech),
    ] {
        let model = load_model(&model_path(config, channel)?)?;
        model.check_layout(&channel.layout_id(config))?;
        let segment = audio::preprocess_file(path, channel.as_str())?;
        let matrix = lld::extract_lld_matrix(&segment.samples, segment.sample_rate, &frame)?;
        let vector = functionals::assemble_feature_vector(&matrix)?;
        scores.push((channel.as_str().to_string(), model.predict(&vector.values)?));
    }
    let tree = load_model(&model_path(config, Channel::Symptoms)?)?;
    tree.check_layout(SYMPTOM_LAYOUT_ID)?;
    let bits = symptom_bits(&input.symptoms)?;
    scores.push(("symptoms".to_string(), tree.predict(&bits)?));

    let fused = (scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64).clamp(0.0, 1.0);
    Ok(InferOutput {
        scores,
        fused,
        elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

// Combined report.

/// Aggregates whatever artifacts the output directory holds into one
/// plain-text report: per-channel metric summaries, the fused result,
/// score cross-correlation, per-class score histograms and the ablation
/// table. Returns the report path and its text.
pub fn cmd_report(config: &RunConfig) -> Result<(PathBuf, String)> {
    ensure_output_dir(config)?;
    let run_stamp = stamp(config);

    let mut summaries = Vec::new();
    let mut sets = Vec::new();
    for channel in Channel::ALL {
        if let Ok(summary) = RunSummary::load(&channel_path(config, "eval", channel, "json")?) {
            summaries.push(summary);
        }
        if let Ok((set, _)) = report::load_scores(&scores_path(config, channel)?) {
            sets.push(set);
        }
    }
    if let Ok(summary) = RunSummary::load(&fused_path(config, "eval", "json")) {
        summaries.push(summary);
    }

    let names: Vec<String> = sets.iter().map(|s| s.modality.clone()).collect();
    let correlation = if sets.len() >= 2 {
        eval::score_cross_correlation(&sets).ok()
    } else {
        None
    };

    let mut distributions = Vec::new();
    if let Some(first) = sets.first() {
        let mut subsets: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let split_ids = |label: u8| -> Vec<String> {
            first
                .ids
                .iter()
                .zip(&first.labels)
                .filter(|&(_, &l)| l == label)
                .map(|(id, _)| id.clone())
                .collect()
        };
        subsets.insert("negative".to_string(), split_ids(0));
        subsets.insert("positive".to_string(), split_ids(1));
        distributions = eval::score_distributions(&sets, &subsets);
    }

    let ablation_rows: Option<Vec<(String, Vec<AblationRow>)>> =
        fs::read_to_string(ablation_json_path(config))
            .ok()
            .and_then(|text| serde_json::from_str::<AblationArtifact>(&text).ok())
            .map(|body| body.per_modality);

    let text = report::render_text_report(
        &run_stamp,
        &summaries,
        correlation.as_ref().map(|m| (names.as_slice(), m.as_slice())),
        &distributions,
        ablation_rows.as_deref(),
    );
    let path = tagged_path(config, "report", "run", &config.family, &config.layout_id, "txt");
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    Ok((path, text))
}

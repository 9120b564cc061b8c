//! Run artifacts: score files, ROC point files, summary documents and
//! the ablation table.
//!
//! Every artifact embeds the configuration hash and the seed that
//! produced it, and every writer is deterministic, so two runs over
//! identical inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::ablation::AblationRow;
use crate::eval::{DistributionTable, EvalReport, OperatingPoint, ScoredSet};
use crate::{Error, Result};

/// Provenance written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    /// The two comment lines that open every delimiter-separated artifact.
    fn comment_header(&self) -> String {
        format!(
            "# config_hash = {}\n# seed = {}\n",
            self.config_hash, self.seed
        )
    }
}

fn artifact_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Artifact {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Recovers the stamp from an artifact's leading comment lines.
pub fn parse_stamp(text: &str, path: &Path) -> Result<Stamp> {
    let mut config_hash = None;
    let mut seed = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some((key, value)) = body.split_once('=') {
            match key.trim() {
                "config_hash" => config_hash = Some(value.trim().to_string()),
                "seed" => seed = value.trim().parse::<u64>().ok(),
                _ => {}
            }
        }
    }
    match (config_hash, seed) {
        (Some(config_hash), Some(seed)) => Ok(Stamp { config_hash, seed }),
        _ => Err(artifact_err(
            path,
            "missing config_hash/seed stamp in leading comments",
        )),
    }
}

/// Writes per-participant scores with their labels.
///
/// Format: the stamp comments, a header line, then one
/// `id,modality,score,label` row per participant. Scores print in
/// shortest round-trip form, so reading the file back reproduces them
/// bit for bit.
pub fn save_scores(path: &Path, set: &ScoredSet, stamp: &Stamp) -> Result<()> {
    let mut out = stamp.comment_header();
    out.push_str("id,modality,score,label\n");
    for i in 0..set.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_field(&set.ids[i]),
            csv_field(&set.modality),
            set.scores[i],
            set.labels[i]
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a score file back into a scored set plus its stamp.
pub fn load_scores(path: &Path) -> Result<(ScoredSet, Stamp)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stamp = parse_stamp(&text, path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| artifact_err(path, e.to_string()))?;
        let expected = ["id", "modality", "score", "label"];
        if headers.iter().ne(expected) {
            return Err(artifact_err(
                path,
                format!("header {headers:?}, expected {expected:?}"),
            ));
        }
    }
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut modality: Option<String> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| artifact_err(path, e.to_string()))?;
        let row_err = |what: &str| artifact_err(path, format!("row {}: {what}", i + 1));
        if record.len() != 4 {
            return Err(row_err("expected 4 fields"));
        }
        match &modality {
            None => modality = Some(record[1].to_string()),
            Some(m) if *m != record[1] => {
                return Err(row_err("modality differs from earlier rows"))
            }
            Some(_) => {}
        }
        ids.push(record[0].to_string());
        scores.push(
            record[2]
                .parse::<f64>()
                .map_err(|_| row_err("score is not a number"))?,
        );
        labels.push(
            record[3]
                .parse::<u8>()
                .map_err(|_| row_err("label is not an integer"))?,
        );
    }
    let modality = modality.ok_or_else(|| artifact_err(path, "no score rows"))?;
    let set = ScoredSet::new(modality, ids, scores, labels)?;
    Ok((set, stamp))
}

/// Quotes a field only when it contains a delimiter, quote or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes ROC points as `threshold,sensitivity,specificity` rows,
/// threshold ascending, for external plotting.
pub fn save_roc_points(path: &Path, report: &EvalReport, stamp: &Stamp) -> Result<()> {
    let mut out = stamp.comment_header();
    out.push_str("threshold,sensitivity,specificity\n");
    for point in &report.roc {
        let _ = writeln!(
            out,
            "{},{},{}",
            point.threshold, point.sensitivity, point.specificity
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Structured per-run summary document: the evaluation metrics of one
/// scored set without the full ROC sweep (that lives in the point file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub family: String,
    pub layout_id: String,
    pub modality: String,
    pub n_participants: usize,
    pub n_positive: usize,
    pub auc: f64,
    pub operating: OperatingPoint,
}

impl RunSummary {
    pub fn new(report: &EvalReport, stamp: &Stamp, family: &str, layout_id: &str) -> RunSummary {
        RunSummary {
            config_hash: stamp.config_hash.clone(),
            seed: stamp.seed,
            family: family.to_string(),
            layout_id: layout_id.to_string(),
            modality: report.modality.clone(),
            n_participants: report.n_participants,
            n_positive: report.n_positive,
            auc: report.auc,
            operating: report.operating,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunSummary> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| artifact_err(path, e.to_string()))
    }
}

/// Writes the ablation table: one row per feature group, and per
/// modality a pair of columns holding the AUC with only that group
/// (`fset`) and with everything except it (`rest`).
///
/// All modalities must carry the same group sequence.
pub fn save_ablation_table(
    path: &Path,
    per_modality: &[(String, Vec<AblationRow>)],
    stamp: &Stamp,
) -> Result<()> {
    let (_, first) = per_modality
        .first()
        .ok_or_else(|| artifact_err(path, "no ablation results"))?;
    for (modality, rows) in per_modality {
        let matches = rows.len() == first.len()
            && rows
                .iter()
                .zip(first)
                .all(|(a, b)| a.group == b.group && a.fset_dims == b.fset_dims);
        if !matches {
            return Err(artifact_err(
                path,
                format!("group sequence for {modality} differs from the first modality"),
            ));
        }
    }
    let mut out = stamp.comment_header();
    out.push_str("group,dims");
    for (modality, _) in per_modality {
        let _ = write!(out, ",{modality}_fset,{modality}_rest");
    }
    out.push('\n');
    for i in 0..first.len() {
        let _ = write!(out, "{},{}", csv_field(&first[i].group), first[i].fset_dims);
        for (_, rows) in per_modality {
            let _ = write!(out, ",{},{}", rows[i].fset_auc, rows[i].rest_auc);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Renders the combined plain-text run report.
///
/// Sections appear only for the inputs provided: per-modality metric
/// summaries, the score cross-correlation matrix, score histograms per
/// subset, and the ablation table.
pub fn render_text_report(
    stamp: &Stamp,
    summaries: &[RunSummary],
    correlation: Option<(&[String], &[Vec<f64>])>,
    distributions: &[DistributionTable],
    ablation: Option<&[(String, Vec<AblationRow>)]>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "respiratory screening run report");
    let _ = writeln!(out, "config_hash: {}", stamp.config_hash);
    let _ = writeln!(out, "seed: {}", stamp.seed);

    if !summaries.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<28} {:>5} {:>4} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "modality", "n", "pos", "auc", "thresh", "sens", "spec", "ppv", "npv", "acc", "cwa"
        );
        for s in summaries {
            let op = &s.operating;
            let _ = writeln!(
                out,
                "{:<28} {:>5} {:>4} {:>7.4} {:>7.4} {:>6.4} {:>6.4} {:>6.4} {:>6.4} {:>6.4} {:>6.4}{}",
                s.modality,
                s.n_participants,
                s.n_positive,
                s.auc,
                op.threshold,
                op.sensitivity,
                op.specificity,
                op.ppv,
                op.npv,
                op.accuracy,
                op.class_weighted_accuracy,
                if op.reachable {
                    ""
                } else {
                    "  (target specificity unreachable)"
                }
            );
        }
    }

    if let Some((names, matrix)) = correlation {
        let _ = writeln!(out);
        let _ = writeln!(out, "score cross-correlation");
        let _ = write!(out, "{:<28}", "");
        for name in names {
            let _ = write!(out, " {name:>12}");
        }
        let _ = writeln!(out);
        for (name, row) in names.iter().zip(matrix) {
            let _ = write!(out, "{name:<28}");
            for value in row {
                let _ = write!(out, " {value:>12.4}");
            }
            let _ = writeln!(out);
        }
    }

    if !distributions.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "score histograms (bin width 0.05, low to high)");
        for table in distributions {
            let counts = table
                .histogram
                .counts
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                "{} / {} (n={}): {}",
                table.modality, table.subset, table.histogram.total, counts
            );
        }
    }

    if let Some(per_modality) = ablation {
        if let Some((_, first)) = per_modality.first() {
            let _ = writeln!(out);
            let _ = writeln!(out, "feature-group ablation (test AUC)");
            let _ = write!(out, "{:<28} {:>6}", "group", "dims");
            for (modality, _) in per_modality {
                let _ = write!(out, " {:>14} {:>14}", format!("{modality}"), "rest");
            }
            let _ = writeln!(out);
            for i in 0..first.len() {
                let _ = write!(out, "{:<28} {:>6}", first[i].group, first[i].fset_dims);
                for (_, rows) in per_modality {
                    let _ = write!(out, " {:>14.4} {:>14.4}", rows[i].fset_auc, rows[i].rest_auc);
                }
                let _ = writeln!(out);
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval;
    use tempfile::tempdir;

    fn stamp() -> Stamp {
        Stamp {
            config_hash: "c".repeat(64),
            seed: 7,
        }
    }

    fn toy_set() -> ScoredSet {
        ScoredSet::new(
            "cough",
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![0.9, 0.2, 0.75, 0.1],
            vec![1, 0, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn score_files_round_trip_bit_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let set = ScoredSet::new(
            "cough",
            vec!["a".into(), "b,with comma".into(), "c".into()],
            vec![0.1 + 0.2, 1.0, f64::MIN_POSITIVE],
            vec![1, 0, 1],
        )
        .unwrap();
        save_scores(&path, &set, &stamp()).unwrap();
        let (loaded, loaded_stamp) = load_scores(&path).unwrap();
        assert_eq!(loaded_stamp, stamp());
        assert_eq!(loaded.ids, set.ids);
        assert_eq!(loaded.labels, set.labels);
        for (a, b) in loaded.scores.iter().zip(&set.scores) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn missing_stamp_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        std::fs::write(&path, "id,modality,score,label\na,cough,0.5,1\n").unwrap();
        assert!(load_scores(&path).is_err());
    }

    #[test]
    fn writers_are_deterministic() {
        let dir = tempdir().unwrap();
        let set = toy_set();
        let report = eval::evaluate(&set, 0.95).unwrap();
        let roc_a = dir.path().join("roc_a.csv");
        let roc_b = dir.path().join("roc_b.csv");
        save_roc_points(&roc_a, &report, &stamp()).unwrap();
        save_roc_points(&roc_b, &report, &stamp()).unwrap();
        assert_eq!(
            std::fs::read(&roc_a).unwrap(),
            std::fs::read(&roc_b).unwrap()
        );
        let text = std::fs::read_to_string(&roc_a).unwrap();
        assert!(text.starts_with("# config_hash = "));
        assert_eq!(text.lines().count(), 2 + 1 + report.roc.len());
    }

    #[test]
    fn summary_documents_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.json");
        let report = eval::evaluate(&toy_set(), 0.95).unwrap();
        let summary = RunSummary::new(&report, &stamp(), "logistic", "llf-v1-7668");
        summary.save(&path).unwrap();
        let loaded = RunSummary::load(&path).unwrap();
        assert_eq!(loaded, summary);
    }

    #[test]
    fn ablation_table_requires_matching_group_sequences() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ablation.csv");
        let row = |group: &str, auc: f64| AblationRow {
            group: group.into(),
            fset_dims: 108,
            fset_auc: auc,
            rest_auc: auc - 0.1,
        };
        let good = vec![
            ("breathing".to_string(), vec![row("mfcc", 0.74)]),
            ("cough".to_string(), vec![row("mfcc", 0.7)]),
        ];
        save_ablation_table(&path, &good, &stamp()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("group,dims,breathing_fset,breathing_rest,cough_fset,cough_rest"));
        assert!(text.contains("mfcc,108,0.74,0.64"));

        let bad = vec![
            ("breathing".to_string(), vec![row("mfcc", 0.74)]),
            ("cough".to_string(), vec![row("f0", 0.7)]),
        ];
        assert!(save_ablation_table(&path, &bad, &stamp()).is_err());
    }

    #[test]
    fn text_report_lists_every_section() {
        let report = eval::evaluate(&toy_set(), 0.5).unwrap();
        let summary = RunSummary::new(&report, &stamp(), "logistic", "llf-v1-7668");
        let names = vec!["cough".to_string(), "speech".to_string()];
        let matrix = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        let tables = vec![DistributionTable {
            modality: "cough".into(),
            subset: "positive".into(),
            histogram: eval::score_histogram(&[0.9, 0.75]),
        }];
        let ablation = vec![(
            "cough".to_string(),
            vec![AblationRow {
                group: "mfcc".into(),
                fset_dims: 1512,
                fset_auc: 0.74,
                rest_auc: 0.7,
            }],
        )];
        let text = render_text_report(
            &stamp(),
            &[summary],
            Some((&names, &matrix)),
            &tables,
            Some(&ablation),
        );
        assert!(text.contains("config_hash: cccc"));
        assert!(text.contains("cough"));
        assert!(text.contains("score cross-correlation"));
        assert!(text.contains("score histograms"));
        assert!(text.contains("feature-group ablation"));
        // Two renders agree byte for byte.
        let again = render_text_report(
            &stamp(),
            &[RunSummary::new(&report, &stamp(), "logistic", "llf-v1-7668")],
            Some((&names, &matrix)),
            &tables,
            Some(&ablation),
        );
        assert_eq!(text, again);
    }
}

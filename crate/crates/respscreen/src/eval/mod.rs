//! Threshold-sweep ROC evaluation, score fusion and score analysis.
//!
//! Scores are posterior probabilities in [0, 1]. The decision rule is
//! non-strict: at threshold t a participant with score p >= t is
//! predicted positive. ROC curves sweep t over {0, 1e-4, ..., 1}, and
//! the AUC is the trapezoidal integral of sensitivity over
//! (1 - specificity), which agrees with the rank statistic within 2e-3.

pub mod ablation;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of points in the threshold sweep: k / 10000 for k in 0..=10000.
pub const N_THRESHOLDS: usize = 10_001;

/// Bin width of score-distribution histograms.
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;

/// Number of histogram bins covering [0, 1]; a score of exactly 1.0
/// falls in the last bin.
pub const N_HISTOGRAM_BINS: usize = 20;

/// Scores for one participant set under one modality.
///
/// Rows are positional: `ids[i]`, `scores[i]` and `labels[i]` describe
/// the same participant. Ids are unique, scores are finite probabilities
/// in [0, 1] and labels are 0 (non-COVID) or 1 (COVID).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub modality: String,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(
        modality: impl Into<String>,
        ids: Vec<String>,
        scores: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if ids.len() != scores.len() || ids.len() != labels.len() {
            return Err(Error::Config(format!(
                "scored set fields disagree in length: {} ids, {} scores, {} labels",
                ids.len(),
                scores.len(),
                labels.len()
            )));
        }
        for (id, &s) in ids.iter().zip(&scores) {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!(
                    "score {s} for participant {id} is outside [0, 1]"
                )));
            }
        }
        for (id, &y) in ids.iter().zip(&labels) {
            if y > 1 {
                return Err(Error::Config(format!(
                    "label {y} for participant {id} is not binary"
                )));
            }
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != ids.len() {
            return Err(Error::Config("scored set has duplicate ids".into()));
        }
        Ok(Self {
            modality: modality.into(),
            ids,
            scores,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Copy with rows reordered so ids ascend; used to align sets
    /// before fusion and correlation.
    pub fn sorted_by_id(&self) -> ScoredSet {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));
        ScoredSet {
            modality: self.modality.clone(),
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            scores: order.iter().map(|&i| self.scores[i]).collect(),
            labels: order.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// One point of the ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// ROC curve over the fixed threshold grid, ordered by ascending
/// threshold. Sensitivity is non-increasing and specificity
/// non-decreasing along the sweep.
pub fn roc_curve(scored: &ScoredSet) -> Result<Vec<RocPoint>> {
    let pos = scored.positives();
    let neg = scored.negatives();
    if pos == 0 || neg == 0 {
        return Err(Error::Dataset(format!(
            "roc curve needs both classes, got {pos} positive / {neg} negative"
        )));
    }
    // Descending score order lets each threshold extend the predicted
    // positive set of the previous (higher) threshold.
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored.scores[b]
            .total_cmp(&scored.scores[a])
            .then(a.cmp(&b))
    });
    let mut points = Vec::with_capacity(N_THRESHOLDS);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut next = 0usize;
    for k in (0..N_THRESHOLDS).rev() {
        let t = k as f64 / 10_000.0;
        while next < order.len() && scored.scores[order[next]] >= t {
            if scored.labels[order[next]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            next += 1;
        }
        points.push(RocPoint {
            threshold: t,
            sensitivity: tp as f64 / pos as f64,
            specificity: (neg - fp) as f64 / neg as f64,
        });
    }
    points.reverse();
    Ok(points)
}

/// Area under the ROC curve by the trapezoidal rule over
/// (1 - specificity, sensitivity).
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut area = 0.0;
    for w in points.windows(2) {
        let x0 = 1.0 - w[0].specificity;
        let x1 = 1.0 - w[1].specificity;
        area += (x0 - x1) * (w[0].sensitivity + w[1].sensitivity) / 2.0;
    }
    area
}

/// AUC computed directly from a scored set.
pub fn auc_from_scores(scored: &ScoredSet) -> Result<f64> {
    Ok(auc(&roc_curve(scored)?))
}

/// Counts of the four decision outcomes at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl Confusion {
    pub fn sensitivity(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.true_neg, self.true_neg + self.false_pos)
    }

    /// Positive predictive value; 0 when nothing is predicted positive.
    pub fn ppv(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    /// Negative predictive value; 0 when nothing is predicted negative.
    pub fn npv(&self) -> f64 {
        ratio(self.true_neg, self.true_neg + self.false_neg)
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.true_pos + self.false_pos + self.true_neg + self.false_neg;
        ratio(self.true_pos + self.true_neg, total)
    }

    /// Mean of sensitivity and specificity.
    pub fn class_weighted_accuracy(&self) -> f64 {
        (self.sensitivity() + self.specificity()) / 2.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Decision metrics at the operating threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// False when no sweep threshold reaches the target specificity;
    /// the metrics are then reported at threshold 1.
    pub reachable: bool,
    pub confusion: Confusion,
    pub sensitivity: f64,
    pub specificity: f64,
    pub ppv: f64,
    pub npv: f64,
    pub accuracy: f64,
    pub class_weighted_accuracy: f64,
}

/// Metrics at the smallest threshold whose specificity reaches the
/// target.
pub fn operating_point(scored: &ScoredSet, target_specificity: f64) -> Result<OperatingPoint> {
    if !(0.0..=1.0).contains(&target_specificity) {
        return Err(Error::Config(format!(
            "target specificity {target_specificity} is outside [0, 1]"
        )));
    }
    let points = roc_curve(scored)?;
    let hit = points.iter().find(|p| p.specificity >= target_specificity);
    let (threshold, reachable) = match hit {
        Some(p) => (p.threshold, true),
        None => (1.0, false),
    };
    let mut confusion = Confusion {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (&s, &y) in scored.scores.iter().zip(&scored.labels) {
        match (y == 1, s >= threshold) {
            (true, true) => confusion.true_pos += 1,
            (true, false) => confusion.false_neg += 1,
            (false, true) => confusion.false_pos += 1,
            (false, false) => confusion.true_neg += 1,
        }
    }
    Ok(OperatingPoint {
        threshold,
        reachable,
        confusion,
        sensitivity: confusion.sensitivity(),
        specificity: confusion.specificity(),
        ppv: confusion.ppv(),
        npv: confusion.npv(),
        accuracy: confusion.accuracy(),
        class_weighted_accuracy: confusion.class_weighted_accuracy(),
    })
}

/// Full evaluation of one scored set: ROC curve, AUC and the operating
/// point at the target specificity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub modality: String,
    pub n_participants: usize,
    pub n_positive: usize,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub operating: OperatingPoint,
}

pub fn evaluate(scored: &ScoredSet, target_specificity: f64) -> Result<EvalReport> {
    let roc = roc_curve(scored)?;
    Ok(EvalReport {
        modality: scored.modality.clone(),
        n_participants: scored.len(),
        n_positive: scored.positives(),
        auc: auc(&roc),
        operating: operating_point(scored, target_specificity)?,
        roc,
    })
}

/// Arithmetic-mean fusion of score sets over one participant set.
///
/// Sets are aligned by id; the fused score for a participant is the
/// mean of that participant's scores. The mean is computed as
/// offset-plus-residual so that fusing identical sets reproduces the
/// input scores bit for bit.
pub fn fuse(sets: &[ScoredSet]) -> Result<ScoredSet> {
    let aligned = aligned_sets(sets)?;
    let first = &aligned[0];
    let k = aligned.len() as f64;
    let mut scores = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let base = first.scores[i];
        let residual: f64 = aligned.iter().map(|s| s.scores[i] - base).sum();
        scores.push((base + residual / k).clamp(0.0, 1.0));
    }
    let modality = aligned
        .iter()
        .map(|s| s.modality.as_str())
        .collect::<Vec<_>>()
        .join("+");
    ScoredSet::new(modality, first.ids.clone(), scores, first.labels.clone())
}

/// Pearson correlation between each pair of score sets, aligned by id.
///
/// The diagonal is exactly 1. A zero-variance set correlates 0 with
/// every other set by convention, and 1 with itself.
pub fn score_cross_correlation(sets: &[ScoredSet]) -> Result<Vec<Vec<f64>>> {
    let aligned = aligned_sets(sets)?;
    let n = aligned.len();
    let mut matrix = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        matrix[i][i] = 1.0;
        for j in 0..i {
            let r = pearson(&aligned[i].scores, &aligned[j].scores);
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(matrix)
}

fn aligned_sets(sets: &[ScoredSet]) -> Result<Vec<ScoredSet>> {
    if sets.is_empty() {
        return Err(Error::Config("no score sets given".into()));
    }
    let aligned: Vec<ScoredSet> = sets.iter().map(|s| s.sorted_by_id()).collect();
    let first = &aligned[0];
    for s in &aligned[1..] {
        if s.ids != first.ids {
            return Err(Error::Dataset(format!(
                "score sets {} and {} cover different participants",
                first.modality, s.modality
            )));
        }
        if s.labels != first.labels {
            return Err(Error::Dataset(format!(
                "score sets {} and {} disagree on labels",
                first.modality, s.modality
            )));
        }
    }
    Ok(aligned)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Histogram of scores over fixed 0.05-wide bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub total: usize,
    /// Set when the subset had no scores.
    pub empty: bool,
}

pub fn score_histogram(scores: &[f64]) -> Histogram {
    let mut counts = vec![0u64; N_HISTOGRAM_BINS];
    for &s in scores {
        let bin = ((s * N_HISTOGRAM_BINS as f64).floor() as usize).min(N_HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    Histogram {
        counts,
        total: scores.len(),
        empty: scores.is_empty(),
    }
}

/// One histogram table: scores of one modality restricted to one
/// participant subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub modality: String,
    pub subset: String,
    pub histogram: Histogram,
}

/// Score distributions per modality per named subset, for external
/// plotting. Subsets map a name to the participant ids it contains;
/// ids absent from a score set are skipped. An empty intersection
/// yields an empty table with its flag set rather than an error.
pub fn score_distributions(
    sets: &[ScoredSet],
    subsets: &BTreeMap<String, Vec<String>>,
) -> Vec<DistributionTable> {
    let mut tables = Vec::new();
    for set in sets {
        let by_id: BTreeMap<&str, f64> = set
            .ids
            .iter()
            .map(String::as_str)
            .zip(set.scores.iter().copied())
            .collect();
        for (subset, ids) in subsets {
            let scores: Vec<f64> = ids
                .iter()
                .filter_map(|id| by_id.get(id.as_str()).copied())
                .collect();
            tables.push(DistributionTable {
                modality: set.modality.clone(),
                subset: subset.clone(),
                histogram: score_histogram(&scores),
            });
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set_from(scores: Vec<f64>, labels: Vec<u8>) -> ScoredSet {
        let ids = (0..scores.len()).map(|i| format!("p{i:04}")).collect();
        ScoredSet::new("test", ids, scores, labels).unwrap()
    }

    fn random_set(seed: u64, n: usize) -> ScoredSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let set = set_from(scores, labels);
        assert!(set.positives() > 0 && set.negatives() > 0);
        set
    }

    /// Probability that a random positive outscores a random negative,
    /// ties half credit; the O(n^2) definition of the AUC.
    fn rank_auc(set: &ScoredSet) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in set.scores.iter().enumerate() {
            if set.labels[i] != 1 {
                continue;
            }
            for (j, &sj) in set.scores.iter().enumerate() {
                if set.labels[j] != 0 {
                    continue;
                }
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn threshold_zero_predicts_everything_positive() {
        let set = random_set(3, 50);
        let roc = roc_curve(&set).unwrap();
        assert_eq!(roc.len(), N_THRESHOLDS);
        assert_eq!(roc[0].threshold, 0.0);
        assert_eq!(roc[0].sensitivity, 1.0);
        assert_eq!(roc[0].specificity, 0.0);
        assert_eq!(roc.last().unwrap().threshold, 1.0);
    }

    #[test]
    fn separable_scores_trace_a_step_roc() {
        let set = set_from(vec![0.1, 0.1, 0.1, 0.9, 0.9], vec![0, 0, 0, 1, 1]);
        let roc = roc_curve(&set).unwrap();
        assert_eq!(auc(&roc), 1.0);
        assert!(roc
            .iter()
            .any(|p| p.sensitivity == 1.0 && p.specificity == 1.0));
    }

    #[test]
    fn identical_scores_give_half_auc() {
        let set = set_from(vec![0.7; 6], vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(auc_from_scores(&set).unwrap(), 0.5);
    }

    #[test]
    fn roc_is_monotone_in_threshold() {
        let set = random_set(9, 300);
        let roc = roc_curve(&set).unwrap();
        for w in roc.windows(2) {
            assert!(w[1].sensitivity <= w[0].sensitivity);
            assert!(w[1].specificity >= w[0].specificity);
        }
    }

    #[test]
    fn sweep_auc_matches_rank_oracle() {
        for seed in 0..5 {
            let set = random_set(100 + seed, 200);
            let sweep = auc_from_scores(&set).unwrap();
            let oracle = rank_auc(&set);
            assert!(
                (sweep - oracle).abs() <= 2e-3,
                "seed {seed}: sweep {sweep} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transform() {
        let set = random_set(42, 200);
        let squared = set_from(
            set.scores.iter().map(|&s| s * s).collect(),
            set.labels.clone(),
        );
        let a = auc_from_scores(&set).unwrap();
        let b = auc_from_scores(&squared).unwrap();
        assert!((a - b).abs() <= 2e-3, "{a} vs {b}");
        assert_eq!(rank_auc(&set), rank_auc(&squared));
    }

    #[test]
    fn single_class_roc_is_rejected() {
        let set = set_from(vec![0.2, 0.8], vec![1, 1]);
        assert!(roc_curve(&set).is_err());
    }

    #[test]
    fn operating_point_on_separable_set_hits_both_targets() {
        let set = set_from(vec![0.1, 0.1, 0.1, 0.9, 0.9], vec![0, 0, 0, 1, 1]);
        let op = operating_point(&set, 0.95).unwrap();
        assert!(op.reachable);
        // Specificity first reaches 1 one sweep step above the negative
        // scores at 0.1.
        assert!((op.threshold - 0.1001).abs() < 1e-12);
        assert_eq!(op.sensitivity, 1.0);
        assert_eq!(op.specificity, 1.0);
        assert_eq!(op.ppv, 1.0);
        assert_eq!(op.npv, 1.0);
        assert_eq!(op.class_weighted_accuracy, 1.0);
    }

    #[test]
    fn operating_point_reports_unreachable_specificity() {
        // The negative participant scores 1.0, so it is predicted
        // positive at every sweep threshold and specificity stays 0.
        let set = set_from(vec![1.0, 0.3, 0.4], vec![0, 1, 1]);
        let op = operating_point(&set, 0.95).unwrap();
        assert!(!op.reachable);
        assert_eq!(op.threshold, 1.0);
        assert_eq!(op.specificity, 0.0);
    }

    #[test]
    fn operating_point_metrics_match_confusion_matrix() {
        let set = random_set(21, 120);
        let op = operating_point(&set, 0.95).unwrap();
        let c = op.confusion;
        assert_eq!(
            c.true_pos + c.false_neg,
            set.positives(),
            "positives conserved"
        );
        assert_eq!(op.sensitivity, c.sensitivity());
        assert_eq!(op.specificity, c.specificity());
        assert_eq!(op.ppv, c.ppv());
        assert_eq!(op.npv, c.npv());
        assert_eq!(op.accuracy, c.accuracy());
        assert_eq!(op.class_weighted_accuracy, c.class_weighted_accuracy());
    }

    #[test]
    fn fusing_identical_sets_preserves_scores_exactly() {
        let set = random_set(7, 101);
        let fused = fuse(&[set.clone(), set.clone(), set.clone()]).unwrap();
        let sorted = set.sorted_by_id();
        for (a, b) in fused.scores.iter().zip(&sorted.scores) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(
            auc_from_scores(&fused).unwrap(),
            auc_from_scores(&set).unwrap()
        );
    }

    #[test]
    fn fusion_averages_aligned_scores() {
        // The same two participants in different row orders per set.
        let a = ScoredSet::new(
            "br",
            vec!["x".into(), "y".into()],
            vec![0.2, 0.8],
            vec![1, 0],
        )
        .unwrap();
        let b = ScoredSet::new(
            "co",
            vec!["y".into(), "x".into()],
            vec![0.6, 0.4],
            vec![0, 1],
        )
        .unwrap();
        let c = ScoredSet::new(
            "sp",
            vec!["x".into(), "y".into()],
            vec![0.6, 0.4],
            vec![1, 0],
        )
        .unwrap();
        let fused = fuse(&[a, b, c]).unwrap();
        assert_eq!(fused.ids, vec!["x".to_string(), "y".to_string()]);
        assert!((fused.scores[0] - 0.4).abs() < 1e-12);
        assert!((fused.scores[1] - 0.6).abs() < 1e-12);
        assert_eq!(fused.modality, "br+co+sp");
    }

    #[test]
    fn fusion_rejects_mismatched_ids() {
        let a = set_from(vec![0.2, 0.8], vec![0, 1]);
        let mut b = a.clone();
        b.ids[0] = "other".into();
        assert!(fuse(&[a, b]).is_err());
    }

    #[test]
    fn cross_correlation_handles_affine_and_degenerate_sets() {
        let base = random_set(5, 80);
        let affine = set_from(
            base.scores.iter().map(|&s| 0.4 * s + 0.3).collect(),
            base.labels.clone(),
        );
        let constant = set_from(vec![0.5; 80], base.labels.clone());
        let m = score_cross_correlation(&[base, affine, constant]).unwrap();
        assert!((m[0][1] - 1.0).abs() < 1e-12, "affine image correlates 1");
        assert_eq!(m[0][2], 0.0, "zero variance correlates 0");
        assert_eq!(m[2][2], 1.0, "diagonal stays 1");
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn histogram_buckets_scores_and_conserves_mass() {
        let h = score_histogram(&[0.52]);
        assert_eq!(h.counts[10], 1, "0.52 lands in [0.50, 0.55)");
        assert_eq!(h.total, 1);
        let set = random_set(13, 500);
        let h = score_histogram(&set.scores);
        assert_eq!(h.counts.iter().sum::<u64>(), 500);
        assert_eq!(score_histogram(&[1.0]).counts[19], 1);
    }

    #[test]
    fn empty_subset_yields_flagged_empty_table() {
        let set = random_set(1, 10);
        let mut subsets = BTreeMap::new();
        subsets.insert("observation".to_string(), vec!["absent".to_string()]);
        subsets.insert("test".to_string(), set.ids.clone());
        let tables = score_distributions(&[set], &subsets);
        assert_eq!(tables.len(), 2);
        assert!(tables[0].histogram.empty);
        assert_eq!(tables[1].histogram.total, 10);
        assert!(!tables[1].histogram.empty);
    }

    #[test]
    fn uniform_scores_fill_bins_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = score_histogram(&scores);
        let expected = 10_000.0 / N_HISTOGRAM_BINS as f64;
        let chi2: f64 = h
            .counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // Chi-squared critical value at p = 0.01 with 19 degrees of
        // freedom.
        assert!(chi2 < 36.19, "chi2 {chi2}");
    }
}

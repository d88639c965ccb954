//! Detection-quality metrics: greedy IoU matching, precision / recall /
//! F1, 101-point interpolated average precision, mAP at IoU 0.5 and
//! averaged over 0.50:0.95, confidence sweeps and a normalized confusion
//! matrix with a background class.
//!
//! Conventions: any 0/0 ratio is 0; true negatives are never counted;
//! classes without ground truth have no AP and are left out of the means.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{iou, BBox, ClassLabel, FrameGeometry, Timeline};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

pub const RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ClassLabel,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class: ClassLabel,
    pub bbox: BBox,
}

/// Predictions and ground truth of one image (or video frame).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalImage {
    pub id: String,
    pub predictions: Vec<Prediction>,
    pub ground_truth: Vec<GroundTruth>,
}

impl EvalImage {
    /// Pairs frames of a prediction timeline with a ground-truth timeline.
    /// Every frame present in either becomes one image, keyed by frame.
    pub fn from_timelines(predictions: &Timeline, ground_truth: &Timeline) -> Vec<EvalImage> {
        let mut frames: Vec<u64> = predictions
            .detections()
            .iter()
            .chain(ground_truth.detections())
            .map(|d| d.frame)
            .collect();
        frames.sort_unstable();
        frames.dedup();
        frames
            .into_iter()
            .map(|f| EvalImage {
                id: f.to_string(),
                predictions: predictions
                    .detections()
                    .iter()
                    .filter(|d| d.frame == f)
                    .map(|d| Prediction {
                        class: d.class,
                        bbox: d.bbox,
                        confidence: d.confidence,
                    })
                    .collect(),
                ground_truth: ground_truth
                    .detections()
                    .iter()
                    .filter(|d| d.frame == f)
                    .map(|d| GroundTruth {
                        class: d.class,
                        bbox: d.bbox,
                    })
                    .collect(),
            })
            .collect()
    }
}

fn box_iou(a: &BBox, b: &BBox) -> f64 {
    // IoU is unchanged by independent x/y scaling, so unit geometry suffices.
    iou(
        &a.to_pixels(&FrameGeometry::UNIT),
        &b.to_pixels(&FrameGeometry::UNIT),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchTag {
    TruePositive { gt: usize },
    FalsePositive,
}

/// Outcome of matching one image's predictions against its ground truth.
/// Both vectors follow the input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub predictions: Vec<MatchTag>,
    /// Index of the matching prediction, `None` for a false negative.
    pub ground_truth: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.ground_truth.iter().filter(|m| m.is_some()).count()
    }

    pub fn fp(&self) -> usize {
        self.predictions.len() - self.tp()
    }

    pub fn fn_count(&self) -> usize {
        self.ground_truth.len() - self.tp()
    }
}

/// Indices of `confidences` by descending value; ties keep input order.
fn confidence_order(confidences: impl Iterator<Item = f64>) -> Vec<usize> {
    let conf: Vec<f64> = confidences.collect();
    let mut order: Vec<usize> = (0..conf.len()).collect();
    order.sort_by(|&a, &b| conf[b].total_cmp(&conf[a]));
    order
}

/// Greedy matching in descending confidence: each prediction claims the
/// still-unmatched ground truth of highest IoU, provided it reaches
/// `iou_threshold`. Class labels are ignored; callers pass one class.
pub fn match_detections(
    preds: &[Prediction],
    gts: &[GroundTruth],
    iou_threshold: f64,
) -> MatchResult {
    let mut result = MatchResult {
        predictions: vec![MatchTag::FalsePositive; preds.len()],
        ground_truth: vec![None; gts.len()],
    };
    for pi in confidence_order(preds.iter().map(|p| p.confidence)) {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if result.ground_truth[gi].is_some() {
                continue;
            }
            let overlap = box_iou(&preds[pi].bbox, &gt.bbox);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        if let Some((gi, _)) = best {
            result.predictions[pi] = MatchTag::TruePositive { gt: gi };
            result.ground_truth[gi] = Some(pi);
        }
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn precision_recall_f1(tp: usize, fp: usize, fn_count: usize) -> PrecisionRecall {
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let recall = ratio(tp as f64, (tp + fn_count) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    PrecisionRecall {
        precision,
        recall,
        f1,
    }
}

/// Predictions of the selected classes over a dataset, tagged TP/FP and
/// ranked by descending confidence (ties in dataset order).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDetections {
    /// `(confidence, is_true_positive)`.
    pub ranked: Vec<(f64, bool)>,
    pub num_ground_truth: usize,
}

pub fn rank_detections(
    images: &[EvalImage],
    classes: &[ClassLabel],
    iou_threshold: f64,
) -> RankedDetections {
    let mut tagged = Vec::new();
    let mut num_ground_truth = 0;
    for image in images {
        for &class in classes {
            let preds: Vec<Prediction> = image
                .predictions
                .iter()
                .filter(|p| p.class == class)
                .copied()
                .collect();
            let gts: Vec<GroundTruth> = image
                .ground_truth
                .iter()
                .filter(|g| g.class == class)
                .copied()
                .collect();
            num_ground_truth += gts.len();
            let m = match_detections(&preds, &gts, iou_threshold);
            tagged.extend(
                preds
                    .iter()
                    .zip(&m.predictions)
                    .map(|(p, tag)| (p.confidence, matches!(tag, MatchTag::TruePositive { .. }))),
            );
        }
    }
    let order = confidence_order(tagged.iter().map(|t| t.0));
    RankedDetections {
        ranked: order.into_iter().map(|i| tagged[i]).collect(),
        num_ground_truth,
    }
}

/// `(precision, recall)` after each ranked prediction.
pub fn pr_curve(ranked: &RankedDetections) -> Vec<(f64, f64)> {
    let mut tp = 0usize;
    ranked
        .ranked
        .iter()
        .enumerate()
        .map(|(k, &(_, hit))| {
            tp += usize::from(hit);
            (
                tp as f64 / (k + 1) as f64,
                ratio(tp as f64, ranked.num_ground_truth as f64),
            )
        })
        .collect()
}

/// 101-point interpolated AP from a PR curve: the envelope precision at
/// recall `r` is the best precision among points with recall >= `r`.
pub fn interpolated_ap(curve: &[(f64, f64)]) -> f64 {
    // Suffix maximum of precision, so envelope[i] covers points i..
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.0).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut total = 0.0;
    let mut idx = 0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        // Recall is non-decreasing along the curve.
        while idx < curve.len() && curve[idx].1 < r {
            idx += 1;
        }
        if idx < curve.len() {
            total += envelope[idx];
        }
    }
    total / RECALL_POINTS as f64
}

/// AP for one class over the dataset; `None` when the class has no
/// ground truth.
pub fn average_precision(
    images: &[EvalImage],
    class: ClassLabel,
    iou_threshold: f64,
) -> Option<f64> {
    let ranked = rank_detections(images, &[class], iou_threshold);
    if ranked.num_ground_truth == 0 {
        return None;
    }
    Some(interpolated_ap(&pr_curve(&ranked)))
}

pub fn mean_ap(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Classes that have at least one ground-truth box.
pub fn evaluated_classes(images: &[EvalImage]) -> Vec<ClassLabel> {
    ClassLabel::ALL
        .into_iter()
        .filter(|c| {
            images
                .iter()
                .any(|im| im.ground_truth.iter().any(|g| g.class == *c))
        })
        .collect()
}

pub fn map_50(images: &[EvalImage]) -> f64 {
    let aps: Vec<f64> = evaluated_classes(images)
        .into_iter()
        .filter_map(|c| average_precision(images, c, 0.5))
        .collect();
    mean_ap(&aps)
}

/// Mean AP over the ten COCO IoU thresholds and all evaluated classes.
pub fn map_50_95(images: &[EvalImage]) -> f64 {
    let classes = evaluated_classes(images);
    let aps: Vec<f64> = coco_thresholds()
        .into_iter()
        .flat_map(|t| {
            classes
                .iter()
                .filter_map(move |&c| average_precision(images, c, t))
        })
        .collect();
    mean_ap(&aps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSweep {
    pub max_f1: f64,
    /// Cut at which `max_f1` is reached; the highest one on ties.
    pub max_f1_threshold: Option<f64>,
    /// Lowest cut at which every kept prediction is correct.
    pub precision_one_threshold: Option<f64>,
}

/// Evaluates precision, recall and F1 at every distinct confidence cut
/// (keeping predictions with confidence >= cut).
pub fn f1_sweep(ranked: &RankedDetections) -> ConfidenceSweep {
    let mut sweep = ConfidenceSweep {
        max_f1: 0.0,
        max_f1_threshold: None,
        precision_one_threshold: None,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let r = &ranked.ranked;
    for (i, &(conf, hit)) in r.iter().enumerate() {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        if i + 1 < r.len() && r[i + 1].0 == conf {
            continue;
        }
        let m = precision_recall_f1(tp, fp, ranked.num_ground_truth.saturating_sub(tp));
        if sweep.max_f1_threshold.is_none() || m.f1 > sweep.max_f1 {
            sweep.max_f1 = m.f1;
            sweep.max_f1_threshold = Some(conf);
        }
        if m.precision == 1.0 {
            sweep.precision_one_threshold = Some(conf);
        }
    }
    sweep
}

/// Row/column index of the background class in [`ConfusionMatrix`].
pub const BACKGROUND: usize = 3;

/// Rows are predicted classes, columns ground-truth classes; index 3 is
/// background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
    /// Each column divided by its total; all-zero columns stay zero.
    pub normalized: [[f64; 4]; 4],
}

pub fn confusion_matrix(
    images: &[EvalImage],
    confidence_threshold: f64,
    iou_threshold: f64,
) -> ConfusionMatrix {
    let mut counts = [[0u64; 4]; 4];
    for image in images {
        let preds: Vec<&Prediction> = image
            .predictions
            .iter()
            .filter(|p| p.confidence >= confidence_threshold)
            .collect();
        let mut used = vec![false; image.ground_truth.len()];
        for pi in confidence_order(preds.iter().map(|p| p.confidence)) {
            let pred = preds[pi];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in image.ground_truth.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let overlap = box_iou(&pred.bbox, &gt.bbox);
                if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            match best {
                Some((gi, _)) => {
                    used[gi] = true;
                    counts[pred.class.index()][image.ground_truth[gi].class.index()] += 1;
                }
                None => counts[pred.class.index()][BACKGROUND] += 1,
            }
        }
        for (gt, _) in image.ground_truth.iter().zip(&used).filter(|(_, u)| !**u) {
            counts[BACKGROUND][gt.class.index()] += 1;
        }
    }

    let mut normalized = [[0.0; 4]; 4];
    for col in 0..4 {
        let total: u64 = (0..4).map(|row| counts[row][col]).sum();
        if total > 0 {
            for row in 0..4 {
                normalized[row][col] = counts[row][col] as f64 / total as f64;
            }
        }
    }
    ConfusionMatrix { counts, normalized }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassLabel,
    pub ground_truth: usize,
    pub predictions: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap50: Option<f64>,
    pub ap50_95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub map50: f64,
    pub map50_95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// IoU for precision/recall/F1, the sweep and the confusion matrix.
    pub iou_threshold: f64,
    /// Confidence floor for precision/recall/F1 and the confusion matrix.
    pub confidence_threshold: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            confidence_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub settings: EvalSettings,
    pub ap_method: String,
    pub images: usize,
    pub classes: Vec<ClassMetrics>,
    pub all: AggregateMetrics,
    pub sweep: ConfidenceSweep,
    pub confusion: ConfusionMatrix,
}

fn filtered(images: &[EvalImage], min_conf: f64) -> Vec<EvalImage> {
    images
        .iter()
        .map(|im| EvalImage {
            id: im.id.clone(),
            predictions: im
                .predictions
                .iter()
                .filter(|p| p.confidence >= min_conf)
                .copied()
                .collect(),
            ground_truth: im.ground_truth.clone(),
        })
        .collect()
}

pub fn evaluate(images: &[EvalImage], settings: EvalSettings) -> EvalReport {
    let kept = filtered(images, settings.confidence_threshold);
    let thresholds = coco_thresholds();
    let (mut sum_tp, mut sum_fp, mut sum_fn) = (0, 0, 0);
    let mut ap50s = Vec::new();
    let mut ap_all = Vec::new();

    let classes: Vec<ClassMetrics> = ClassLabel::ALL
        .into_iter()
        .map(|class| {
            let (mut tp, mut fp, mut fn_count) = (0, 0, 0);
            for im in &kept {
                let preds: Vec<Prediction> = im
                    .predictions
                    .iter()
                    .filter(|p| p.class == class)
                    .copied()
                    .collect();
                let gts: Vec<GroundTruth> = im
                    .ground_truth
                    .iter()
                    .filter(|g| g.class == class)
                    .copied()
                    .collect();
                let m = match_detections(&preds, &gts, settings.iou_threshold);
                tp += m.tp();
                fp += m.fp();
                fn_count += m.fn_count();
            }
            sum_tp += tp;
            sum_fp += fp;
            sum_fn += fn_count;
            let pr = precision_recall_f1(tp, fp, fn_count);
            let ap50 = average_precision(images, class, 0.5);
            let per_threshold: Option<Vec<f64>> = thresholds
                .iter()
                .map(|&t| average_precision(images, class, t))
                .collect();
            if let (Some(a), Some(all)) = (ap50, per_threshold.as_ref()) {
                ap50s.push(a);
                ap_all.extend_from_slice(all);
            }
            ClassMetrics {
                class,
                ground_truth: tp + fn_count,
                predictions: images
                    .iter()
                    .flat_map(|im| &im.predictions)
                    .filter(|p| p.class == class)
                    .count(),
                tp,
                fp,
                fn_count,
                precision: pr.precision,
                recall: pr.recall,
                f1: pr.f1,
                ap50,
                ap50_95: per_threshold.map(|v| mean_ap(&v)),
            }
        })
        .collect();

    let pooled = precision_recall_f1(sum_tp, sum_fp, sum_fn);
    let ranked = rank_detections(images, &ClassLabel::ALL, settings.iou_threshold);
    EvalReport {
        settings,
        ap_method: format!("{RECALL_POINTS}-point interpolated"),
        images: images.len(),
        classes,
        all: AggregateMetrics {
            precision: pooled.precision,
            recall: pooled.recall,
            f1: pooled.f1,
            map50: mean_ap(&ap50s),
            map50_95: mean_ap(&ap_all),
        },
        sweep: f1_sweep(&ranked),
        confusion: confusion_matrix(
            images,
            settings.confidence_threshold,
            settings.iou_threshold,
        ),
    }
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "–".to_owned(), |x| format!("{x:.prec$}"))
}

impl EvalReport {
    /// Aligned plain-text tables: per-class detection metrics, threshold
    /// metrics and the normalized confusion matrix.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>10} {:>10} {:>10} {:>14}",
            "Class", "P", "R", "F1", "mAP@0.5", "mAP@0.5:0.95"
        );
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<14} {:>10.3} {:>10.3} {:>10.3} {:>10} {:>14}",
                c.class.name(),
                c.precision,
                c.recall,
                c.f1,
                opt(c.ap50, 3),
                opt(c.ap50_95, 3)
            );
        }
        let a = &self.all;
        let _ = writeln!(
            s,
            "{:<14} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>14.3}",
            "All Classes", a.precision, a.recall, a.f1, a.map50, a.map50_95
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<20} {:>12} {:>22}",
            "Metric", "Peak Value", "Confidence Threshold"
        );
        let _ = writeln!(
            s,
            "{:<20} {:>12.3} {:>22}",
            "Max F1 Score",
            self.sweep.max_f1,
            opt(self.sweep.max_f1_threshold, 3)
        );
        let peak = if self.sweep.precision_one_threshold.is_some() {
            "1.000"
        } else {
            "–"
        };
        let _ = writeln!(
            s,
            "{:<20} {:>12} {:>22}",
            "Precision at 100%",
            peak,
            opt(self.sweep.precision_one_threshold, 3)
        );
        let _ = writeln!(s);
        let labels = ["BeardedDragon", "HeatingLamp", "Cricket", "background"];
        let _ = write!(s, "{:<14}", "pred \\ true");
        for l in labels {
            let _ = write!(s, " {l:>14}");
        }
        let _ = writeln!(s);
        for (row, label) in labels.iter().enumerate() {
            let _ = write!(s, "{label:<14}");
            for col in 0..4 {
                let _ = write!(s, " {:>14.3}", self.confusion.normalized[row][col]);
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(
            s,
            "\niou={} conf={} ap={}",
            self.settings.iou_threshold, self.settings.confidence_threshold, self.ap_method
        );
        s
    }
}

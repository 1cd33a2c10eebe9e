//! Detection scoring: per-image greedy matching against ground truth,
//! FPPI/miss-rate curve construction, log-average miss rate, and the
//! shift-robustness sweep.

use crate::geometry::{enclosing_box, iou, BoundingBox, ScoredBox};
use crate::homography::{warp_box, HomographyError, HomographyMatrix};
use crate::io::{Detections, ImageGroups, Modality};
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no positives to evaluate")]
    NoPositives,
    #[error("unknown image ids in detections: {0:?}")]
    UnknownImages(Vec<String>),
    #[error("missing detections for direction {direction} deg, level {level}: {detail}")]
    MissingDetections {
        direction: u32,
        level: i32,
        detail: String,
    },
    #[error(transparent)]
    Homography(#[from] HomographyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// FPPI reference range, log-spaced.
    pub fppi_min: f64,
    pub fppi_max: f64,
    pub n_ref_points: usize,
    /// Miss rates are clamped here before the log average (reported, not
    /// hidden: a perfect detector scores exactly this).
    pub mr_floor: f64,
    /// Optional ground-truth pre-filter: drop GT boxes shorter than this.
    pub min_gt_height: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            fppi_min: 1e-2,
            fppi_max: 1.0,
            n_ref_points: 9,
            mr_floor: 1e-4,
            min_gt_height: None,
        }
    }
}

/// Matching outcome for one image: detection `(score, is_tp)` labels in
/// descending-score order plus the ground-truth count. Labels are valid
/// for every score threshold at once because matching is greedy in score
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatch {
    pub dets: Vec<(f64, bool)>,
    pub n_gt: usize,
}

/// Greedy detection-to-GT matching: detections in descending score order
/// (ties: lower index first) claim the unmatched GT with the highest IoU
/// at or above the threshold (ties: lower GT index).
pub fn match_image(dets: &[ScoredBox], gts: &[BoundingBox], iou_threshold: f64) -> ImageMatch {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then_with(|| a.cmp(&b)));
    let mut gt_taken = vec![false; gts.len()];
    let mut labels = Vec::with_capacity(dets.len());
    for &d in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_taken[g] {
                continue;
            }
            let overlap = iou(&dets[d].bbox, gt);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, _)) = best {
            gt_taken[g] = true;
            labels.push((dets[d].score, true));
        } else {
            labels.push((dets[d].score, false));
        }
    }
    ImageMatch {
        dets: labels,
        n_gt: gts.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub fppi: f64,
    pub miss_rate: f64,
}

/// `(FPPI, miss rate)` operating points from the threshold sweep, ordered
/// by descending threshold (FPPI ascending), plus the log-average miss
/// rate over the configured reference points.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub points: Vec<CurvePoint>,
    pub lamr: f64,
}

/// Geometric mean, factored around the first value so a list of identical
/// inputs returns that value exactly.
fn geometric_mean(values: &[f64]) -> f64 {
    let first = values[0];
    let log_sum: f64 = values.iter().map(|&v| (v / first).ln()).sum();
    first * (log_sum / values.len() as f64).exp()
}

/// Builds the FPPI/miss-rate curve by sweeping a threshold over all
/// distinct detection scores and summarizes it as the log-average miss
/// rate over `n_ref_points` log-spaced FPPI references: each reference
/// takes the miss rate at the largest achieved FPPI at or below it (the
/// highest observed miss rate when none is), clamped at `mr_floor`.
pub fn build_curve(
    matches: &[ImageMatch],
    n_images: usize,
    cfg: &EvalConfig,
) -> Result<EvalCurve, EvalError> {
    let total_gt: usize = matches.iter().map(|m| m.n_gt).sum();
    if total_gt == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut dets: Vec<(f64, bool)> = matches.iter().flat_map(|m| m.dets.iter().copied()).collect();
    dets.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0usize;
    while i < dets.len() {
        let threshold = dets[i].0;
        while i < dets.len() && dets[i].0 == threshold {
            if dets[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(CurvePoint {
            fppi: fp as f64 / n_images as f64,
            miss_rate: (total_gt - tp) as f64 / total_gt as f64,
        });
    }

    let mut ref_miss_rates = Vec::with_capacity(cfg.n_ref_points);
    let log_min = cfg.fppi_min.log10();
    let log_max = cfg.fppi_max.log10();
    for k in 0..cfg.n_ref_points {
        let t = if cfg.n_ref_points == 1 {
            0.0
        } else {
            k as f64 / (cfg.n_ref_points - 1) as f64
        };
        let reference = 10f64.powf(log_min + t * (log_max - log_min));
        // miss rate is non-increasing along the sweep, so the last point
        // with fppi <= reference carries the best rate at that budget
        let mr = points
            .iter()
            .rev()
            .find(|p| p.fppi <= reference)
            .map(|p| p.miss_rate)
            .unwrap_or_else(|| points.first().map_or(1.0, |p| p.miss_rate));
        ref_miss_rates.push(mr.max(cfg.mr_floor));
    }
    Ok(EvalCurve {
        points,
        lamr: geometric_mean(&ref_miss_rates),
    })
}

/// Which boxes to score: one modality's, or the enclosing box of each
/// group/pair (modal-shared protocol).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSide {
    Modality(Modality),
    Enclosing,
}

impl std::fmt::Display for EvalSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalSide::Modality(m) => write!(f, "{m}"),
            EvalSide::Enclosing => write!(f, "enclosing"),
        }
    }
}

fn gt_boxes_for(groups: &ImageGroups, side: EvalSide, cfg: &EvalConfig) -> Vec<BoundingBox> {
    groups
        .groups
        .iter()
        .filter_map(|g| match side {
            EvalSide::Modality(Modality::Rgb) => g.rgb,
            EvalSide::Modality(Modality::Thermal) => g.thermal,
            EvalSide::Enclosing => match (g.rgb, g.thermal) {
                (Some(r), Some(t)) => Some(enclosing_box(&r, &t)),
                (Some(r), None) => Some(r),
                (None, Some(t)) => Some(t),
                (None, None) => None,
            },
        })
        .filter(|b| cfg.min_gt_height.is_none_or(|min| b.height() >= min))
        .collect()
}

fn det_boxes_for(dets: &Detections, side: EvalSide) -> BTreeMap<String, Vec<ScoredBox>> {
    let mut map: BTreeMap<String, Vec<ScoredBox>> = BTreeMap::new();
    match dets {
        Detections::PerModality(records) => {
            for rec in records {
                let wanted = match side {
                    EvalSide::Modality(m) => rec.modality == m,
                    // modal-shared protocol over per-modality files scores
                    // whatever boxes are present
                    EvalSide::Enclosing => true,
                };
                if wanted {
                    map.entry(rec.image_id.clone()).or_default().extend(rec.boxes.iter().copied());
                }
            }
        }
        Detections::Paired(records) => {
            for rec in records {
                let entry = map.entry(rec.image_id.clone()).or_default();
                for pair in &rec.pairs {
                    match side {
                        EvalSide::Modality(Modality::Rgb) => entry.extend(pair.rgb),
                        EvalSide::Modality(Modality::Thermal) => entry.extend(pair.thermal),
                        EvalSide::Enclosing => {
                            let score = pair
                                .rgb
                                .map_or(0.0, |b| b.score)
                                .max(pair.thermal.map_or(0.0, |b| b.score));
                            let bbox = pair.enclosing.or_else(|| match (pair.rgb, pair.thermal) {
                                (Some(r), Some(t)) => Some(enclosing_box(&r.bbox, &t.bbox)),
                                (Some(r), None) => Some(r.bbox),
                                (None, Some(t)) => Some(t.bbox),
                                (None, None) => None,
                            });
                            entry.extend(bbox.map(|b| ScoredBox::new(b, score)));
                        }
                    }
                }
            }
        }
    }
    map
}

/// Scores one modality (or the enclosing-box protocol) of a detection set
/// against ground-truth groups. Every detection image id must exist in the
/// ground truth; ground-truth images without detections count their GT as
/// missed.
pub fn evaluate_modality(
    dets: &Detections,
    gt: &[ImageGroups],
    side: EvalSide,
    cfg: &EvalConfig,
) -> Result<EvalCurve, EvalError> {
    let gt_ids: HashSet<&str> = gt.iter().map(|g| g.image_id.as_str()).collect();
    let det_map = det_boxes_for(dets, side);
    let mut offenders: Vec<String> = det_map
        .keys()
        .filter(|id| !gt_ids.contains(id.as_str()))
        .cloned()
        .collect();
    if !offenders.is_empty() {
        offenders.sort();
        return Err(EvalError::UnknownImages(offenders));
    }

    let empty: Vec<ScoredBox> = Vec::new();
    let matches: Vec<ImageMatch> = gt
        .iter()
        .map(|g| {
            let gts = gt_boxes_for(g, side, cfg);
            let dets = det_map.get(&g.image_id).unwrap_or(&empty);
            match_image(dets, &gts, cfg.iou_threshold)
        })
        .collect();
    build_curve(&matches, gt.len(), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSweepConfig {
    /// Shift directions in degrees; the standard sweep uses 0/45/90/135.
    pub directions_deg: Vec<u32>,
    /// Shift magnitudes in pixels, 0 meaning the unshifted set.
    pub levels: Vec<i32>,
    /// Leave level 0 out of the per-direction averages.
    pub exclude_zero: bool,
    /// The modality that gets shifted and scored.
    pub shifted: Modality,
}

impl Default for ShiftSweepConfig {
    fn default() -> Self {
        ShiftSweepConfig {
            directions_deg: vec![0, 45, 90, 135],
            levels: (-10..=10).collect(),
            exclude_zero: false,
            shifted: Modality::Thermal,
        }
    }
}

/// Integer-pixel shift vector for a direction/level: `level * (cos, sin)`
/// rounded per component.
pub fn shift_vector(direction_deg: u32, level: i32) -> (i32, i32) {
    let theta = f64::from(direction_deg).to_radians();
    let dx = (f64::from(level) * theta.cos()).round() as i32;
    let dy = (f64::from(level) * theta.sin()).round() as i32;
    (dx, dy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub direction: u32,
    pub level: i32,
    pub shift: (i32, i32),
    pub miss_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-direction arithmetic mean of the swept miss rates.
    pub rho: Vec<(u32, f64)>,
}

/// Translates the shifted modality's ground-truth boxes through the
/// homography translation path.
pub fn shift_groups(
    gt: &[ImageGroups],
    shifted: Modality,
    shift: (i32, i32),
) -> Result<Vec<ImageGroups>, EvalError> {
    let t = HomographyMatrix::translation(f64::from(shift.0), f64::from(shift.1));
    let mut out = Vec::with_capacity(gt.len());
    for image in gt {
        let mut shifted_groups = Vec::with_capacity(image.groups.len());
        for g in &image.groups {
            let mut g = g.clone();
            let side = match shifted {
                Modality::Rgb => &mut g.rgb,
                Modality::Thermal => &mut g.thermal,
            };
            if let Some(b) = side {
                *b = warp_box(b, &t)?;
            }
            shifted_groups.push(g);
        }
        out.push(ImageGroups {
            image_id: image.image_id.clone(),
            groups: shifted_groups,
        });
    }
    Ok(out)
}

/// Runs the robustness sweep: for every direction/level the shifted
/// modality's ground truth is translated by the rounded shift vector and
/// the provider's detections for that configuration are scored on it.
pub fn shift_sweep<F>(
    gt: &[ImageGroups],
    sweep: &ShiftSweepConfig,
    cfg: &EvalConfig,
    mut provider: F,
) -> Result<SweepResult, EvalError>
where
    F: FnMut(u32, i32, (i32, i32)) -> Result<Detections, EvalError>,
{
    let mut rows = Vec::new();
    let mut rho = Vec::new();
    for &direction in &sweep.directions_deg {
        let mut rates = Vec::new();
        for &level in &sweep.levels {
            let shift = shift_vector(direction, level);
            let dets = provider(direction, level, shift)?;
            let shifted_gt = shift_groups(gt, sweep.shifted, shift)?;
            let curve = evaluate_modality(
                &dets,
                &shifted_gt,
                EvalSide::Modality(sweep.shifted),
                cfg,
            )?;
            rows.push(SweepRow {
                direction,
                level,
                shift,
                miss_rate: curve.lamr,
            });
            if !(sweep.exclude_zero && level == 0) {
                rates.push(curve.lamr);
            }
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        rho.push((direction, mean));
    }
    Ok(SweepResult { rows, rho })
}

//! Post-processing for paired RGB/thermal detections: classic greedy NMS,
//! decoupled per-modality NMS, and pair-wise NMS that suppresses or keeps
//! an anchor's two boxes together via a gate-weighted fused box.

use crate::geometry::{iou, ScoredBox};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NmsError {
    #[error("ungated empty group: both modality scores gated to zero")]
    UngatedEmptyGroup,
}

/// One anchor's paired prediction. At least one side is present; the
/// anchor id is the cross-modality identity and is unique within an image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPair {
    pub anchor_id: u64,
    pub rgb: Option<ScoredBox>,
    pub thermal: Option<ScoredBox>,
}

impl DetectionPair {
    pub fn new(anchor_id: u64, rgb: Option<ScoredBox>, thermal: Option<ScoredBox>) -> Self {
        DetectionPair {
            anchor_id,
            rgb,
            thermal,
        }
    }

    /// Group score: the higher of the two modality scores, a missing side
    /// counting as 0.
    pub fn group_score(&self) -> f64 {
        let r = self.rgb.map_or(0.0, |b| b.score);
        let t = self.thermal.map_or(0.0, |b| b.score);
        r.max(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    pub iou_threshold: f64,
    /// Gate threshold: scores below it contribute nothing to a fused box
    /// and sub-threshold modality entries are dropped from survivors.
    pub tau: f64,
    /// Minimum score for a box to enter decoupled NMS at all.
    pub score_floor: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig {
            iou_threshold: 0.65,
            tau: 0.45,
            score_floor: 0.0,
        }
    }
}

/// Standard greedy suppression. Iterates by descending score (ties broken
/// by lower original index); a box is kept iff its IoU with every
/// previously kept box is below the threshold. Returns kept indices in
/// processing order.
pub fn greedy_nms(dets: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &candidate in &order {
        let suppressed = kept
            .iter()
            .any(|&k| iou(&dets[k].bbox, &dets[candidate].bbox) >= iou_threshold);
        if !suppressed {
            kept.push(candidate);
        }
    }
    kept
}

/// Runs traditional NMS separately in the two modalities. Cross-modality
/// identity is not retained: each output is an independent kept list in
/// descending-score order.
pub fn decoupled_nms(pairs: &[DetectionPair], cfg: &NmsConfig) -> (Vec<ScoredBox>, Vec<ScoredBox>) {
    let run = |side: &dyn Fn(&DetectionPair) -> Option<ScoredBox>| {
        let boxes: Vec<ScoredBox> = pairs
            .iter()
            .filter_map(side)
            .filter(|b| b.score >= cfg.score_floor)
            .collect();
        greedy_nms(&boxes, cfg.iou_threshold)
            .into_iter()
            .map(|k| boxes[k])
            .collect()
    };
    (run(&|p| p.rgb), run(&|p| p.thermal))
}

/// Gate function: zeroes scores below `tau`, passes them through otherwise
/// (equality passes).
pub fn gate(x: f64, tau: f64) -> f64 {
    if x < tau {
        0.0
    } else {
        x
    }
}

/// Fuses a pair into a single scored box: the group score is the max of
/// the two sides, the group box the gate-normalized weighted average of
/// the two boxes. A side below the gate contributes nothing, so the group
/// box then depends entirely on the other side. Missing sides count as
/// score 0.
pub fn fuse_group(p: &DetectionPair, tau: f64) -> Result<ScoredBox, NmsError> {
    let rgb_score = p.rgb.map_or(0.0, |b| b.score);
    let t_score = p.thermal.map_or(0.0, |b| b.score);
    let fr = gate(rgb_score, tau);
    let ft = gate(t_score, tau);
    let denom = fr + ft;
    if denom <= 0.0 {
        return Err(NmsError::UngatedEmptyGroup);
    }
    let alpha = fr / denom;
    let beta = ft / denom;
    let zero = crate::geometry::BoundingBox::new(0.0, 0.0, 0.0, 0.0);
    let rb = p.rgb.map_or(zero, |b| b.bbox);
    let tb = p.thermal.map_or(zero, |b| b.bbox);
    let fused = crate::geometry::BoundingBox::new(
        alpha * rb.x1 + beta * tb.x1,
        alpha * rb.y1 + beta * tb.y1,
        alpha * rb.x2 + beta * tb.x2,
        alpha * rb.y2 + beta * tb.y2,
    );
    Ok(ScoredBox::new(fused, rgb_score.max(t_score)))
}

/// Pair-wise NMS: pairs whose group score clears `tau` are fused into
/// scored group boxes, greedy NMS runs on those, and the surviving
/// original pairs are returned (anchor ids intact) with sub-`tau` modality
/// entries removed.
pub fn pairwise_nms(pairs: &[DetectionPair], cfg: &NmsConfig) -> Vec<DetectionPair> {
    let candidates: Vec<&DetectionPair> = pairs
        .iter()
        .filter(|p| p.group_score() >= cfg.tau)
        .collect();
    let fused: Vec<ScoredBox> = candidates
        .iter()
        .map(|p| fuse_group(p, cfg.tau).expect("group score >= tau implies a gated side"))
        .collect();
    greedy_nms(&fused, cfg.iou_threshold)
        .into_iter()
        .map(|k| {
            let p = candidates[k];
            DetectionPair {
                anchor_id: p.anchor_id,
                rgb: p.rgb.filter(|b| b.score >= cfg.tau),
                thermal: p.thermal.filter(|b| b.score >= cfg.tau),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sb(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> ScoredBox {
        ScoredBox::new(BoundingBox::new(x1, y1, x2, y2), score)
    }

    #[test]
    fn greedy_single_box_kept() {
        assert_eq!(greedy_nms(&[sb(0.0, 0.0, 10.0, 10.0, 0.9)], 0.5), vec![0]);
        assert_eq!(greedy_nms(&[], 0.5), Vec::<usize>::new());
    }

    #[test]
    fn greedy_dominance() {
        let dets = [sb(0.0, 0.0, 10.0, 10.0, 0.9), sb(0.5, 0.0, 10.5, 10.0, 0.7)];
        assert!(iou(&dets[0].bbox, &dets[1].bbox) > 0.8);
        assert_eq!(greedy_nms(&dets, 0.5), vec![0]);
    }

    #[test]
    fn greedy_tie_breaks_by_lower_index() {
        let dets = [
            sb(0.0, 0.0, 10.0, 10.0, 0.9),
            sb(100.0, 0.0, 110.0, 10.0, 0.9),
        ];
        assert_eq!(greedy_nms(&dets, 0.5), vec![0, 1]);
        let reversed = [dets[1], dets[0]];
        assert_eq!(greedy_nms(&reversed, 0.5), vec![0, 1]);
    }

    /// Step-by-step reference following the same greedy rule.
    fn brute_force_nms(dets: &[ScoredBox], thr: f64) -> Vec<usize> {
        let mut remaining: Vec<usize> = (0..dets.len()).collect();
        let mut kept = Vec::new();
        while !remaining.is_empty() {
            let best = *remaining
                .iter()
                .min_by(|&&a, &&b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)))
                .unwrap();
            kept.push(best);
            remaining.retain(|&i| i != best && iou(&dets[best].bbox, &dets[i].bbox) < thr);
        }
        kept
    }

    #[test]
    fn greedy_matches_brute_force_on_random_scene() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let dets: Vec<ScoredBox> = (0..12)
                .map(|_| {
                    let x = rng.gen_range(0.0..50.0);
                    let y = rng.gen_range(0.0..50.0);
                    sb(
                        x,
                        y,
                        x + rng.gen_range(5.0..20.0),
                        y + rng.gen_range(5.0..20.0),
                        rng.gen_range(0.0..1.0),
                    )
                })
                .collect();
            assert_eq!(greedy_nms(&dets, 0.5), brute_force_nms(&dets, 0.5));
        }
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gate(0.3, 0.45), 0.0);
        assert_eq!(gate(0.45, 0.45), 0.45);
        assert_eq!(gate(0.9, 0.45), 0.9);
    }

    #[test]
    fn fuse_identical_boxes() {
        let b = sb(1.0, 2.0, 3.0, 4.0, 0.8);
        let p = DetectionPair::new(0, Some(b), Some(b));
        let fused = fuse_group(&p, 0.45).unwrap();
        assert_eq!(fused.bbox, b.bbox);
        assert_eq!(fused.score, 0.8);
    }

    #[test]
    fn fuse_gated_side_contributes_nothing() {
        let r = sb(0.0, 0.0, 10.0, 10.0, 0.8);
        let t = sb(50.0, 50.0, 60.0, 60.0, 0.3);
        let p = DetectionPair::new(0, Some(r), Some(t));
        let fused = fuse_group(&p, 0.45).unwrap();
        assert_eq!(fused.bbox, r.bbox);
        assert_eq!(fused.score, 0.8);
    }

    #[test]
    fn fuse_equal_weights_average_corners() {
        let r = sb(0.0, 0.0, 10.0, 10.0, 0.6);
        let t = sb(2.0, 0.0, 12.0, 10.0, 0.6);
        let fused = fuse_group(&DetectionPair::new(0, Some(r), Some(t)), 0.45).unwrap();
        assert_eq!(fused.bbox, BoundingBox::new(1.0, 0.0, 11.0, 10.0));
    }

    #[test]
    fn fuse_rejects_fully_gated_pair() {
        let p = DetectionPair::new(
            0,
            Some(sb(0.0, 0.0, 1.0, 1.0, 0.1)),
            Some(sb(0.0, 0.0, 1.0, 1.0, 0.2)),
        );
        assert_eq!(fuse_group(&p, 0.45), Err(NmsError::UngatedEmptyGroup));
    }

    #[test]
    fn pairwise_keeps_single_modality_survivor() {
        let p = DetectionPair::new(
            42,
            Some(sb(0.0, 0.0, 10.0, 10.0, 0.9)),
            Some(sb(3.0, 0.0, 13.0, 10.0, 0.3)),
        );
        let out = pairwise_nms(&[p], &NmsConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].anchor_id, 42);
        assert_eq!(out[0].rgb, Some(sb(0.0, 0.0, 10.0, 10.0, 0.9)));
        assert_eq!(out[0].thermal, None);
    }

    #[test]
    fn pairwise_all_below_tau_empty() {
        let pairs = vec![
            DetectionPair::new(0, Some(sb(0.0, 0.0, 1.0, 1.0, 0.2)), None),
            DetectionPair::new(1, None, Some(sb(0.0, 0.0, 1.0, 1.0, 0.4))),
        ];
        assert!(pairwise_nms(&pairs, &NmsConfig::default()).is_empty());
    }

    #[test]
    fn pairwise_equals_decoupled_under_perfect_registration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = NmsConfig::default();
        let pairs: Vec<DetectionPair> = (0..10)
            .map(|k| {
                let x = rng.gen_range(0.0..80.0);
                let y = rng.gen_range(0.0..80.0);
                let b = sb(
                    x,
                    y,
                    x + rng.gen_range(8.0..20.0),
                    y + rng.gen_range(8.0..20.0),
                    rng.gen_range(cfg.tau..1.0),
                );
                DetectionPair::new(k, Some(b), Some(b))
            })
            .collect();
        let survivors = pairwise_nms(&pairs, &cfg);
        let (rgb_kept, t_kept) = decoupled_nms(&pairs, &cfg);
        assert_eq!(rgb_kept, t_kept);
        let survivor_rgb: Vec<ScoredBox> = survivors.iter().map(|p| p.rgb.unwrap()).collect();
        assert_eq!(survivor_rgb, rgb_kept);
    }

    #[test]
    fn decoupled_handles_unpaired() {
        let pairs = vec![
            DetectionPair::new(0, None, Some(sb(0.0, 0.0, 10.0, 10.0, 0.9))),
            DetectionPair::new(1, Some(sb(20.0, 0.0, 30.0, 10.0, 0.8)), None),
        ];
        let (rgb, th) = decoupled_nms(&pairs, &NmsConfig::default());
        assert_eq!(rgb, vec![sb(20.0, 0.0, 30.0, 10.0, 0.8)]);
        assert_eq!(th, vec![sb(0.0, 0.0, 10.0, 10.0, 0.9)]);
    }

    #[test]
    fn decoupled_matches_manually_split_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = NmsConfig {
            score_floor: 0.2,
            ..NmsConfig::default()
        };
        let pairs: Vec<DetectionPair> = (0..10)
            .map(|k| {
                let mk = |rng: &mut ChaCha8Rng| {
                    let x = rng.gen_range(0.0..60.0);
                    let y = rng.gen_range(0.0..60.0);
                    sb(x, y, x + 12.0, y + 24.0, rng.gen_range(0.0..1.0))
                };
                DetectionPair::new(
                    k,
                    rng.gen_bool(0.8).then(|| mk(&mut rng)),
                    rng.gen_bool(0.8).then(|| mk(&mut rng)),
                )
            })
            .map(|p| {
                if p.rgb.is_none() && p.thermal.is_none() {
                    DetectionPair::new(p.anchor_id, Some(sb(0.0, 0.0, 5.0, 5.0, 0.5)), None)
                } else {
                    p
                }
            })
            .collect();
        let (rgb, th) = decoupled_nms(&pairs, &cfg);
        for (kept, side) in [(rgb, 0), (th, 1)] {
            let split: Vec<ScoredBox> = pairs
                .iter()
                .filter_map(|p| if side == 0 { p.rgb } else { p.thermal })
                .filter(|b| b.score >= cfg.score_floor)
                .collect();
            let expect: Vec<ScoredBox> = greedy_nms(&split, cfg.iou_threshold)
                .into_iter()
                .map(|k| split[k])
                .collect();
            assert_eq!(kept, expect);
        }
    }

    proptest! {
        #[test]
        fn gate_monotone_and_weights_normalized(
            x in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
            tau in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(gate(lo, tau) <= gate(hi, tau));
            let (fr, ft) = (gate(x, tau), gate(y, tau));
            if fr + ft > 0.0 {
                let alpha = fr / (fr + ft);
                let beta = ft / (fr + ft);
                prop_assert!((alpha + beta - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn greedy_scores_non_increasing_and_suppression_justified(
            raw in proptest::collection::vec((0.0f64..50.0, 0.0f64..50.0, 1.0f64..20.0, 1.0f64..20.0, 0.0f64..1.0), 0..15),
            thr in 0.1f64..0.9,
        ) {
            let dets: Vec<ScoredBox> = raw
                .into_iter()
                .map(|(x, y, w, h, s)| sb(x, y, x + w, y + h, s))
                .collect();
            let kept = greedy_nms(&dets, thr);
            for pair in kept.windows(2) {
                prop_assert!(dets[pair[0]].score >= dets[pair[1]].score);
            }
            for i in 0..dets.len() {
                if !kept.contains(&i) {
                    let justified = kept.iter().any(|&k| {
                        dets[k].score >= dets[i].score
                            && iou(&dets[k].bbox, &dets[i].bbox) >= thr
                    });
                    prop_assert!(justified);
                }
            }
        }

        #[test]
        fn pairwise_never_invents_boxes(
            raw in proptest::collection::vec(
                ((0.0f64..60.0, 0.0f64..60.0, 0.0f64..=1.0), (0.0f64..60.0, 0.0f64..60.0, 0.0f64..=1.0), 0u8..3),
                0..12,
            ),
        ) {
            let pairs: Vec<DetectionPair> = raw
                .into_iter()
                .enumerate()
                .map(|(k, ((rx, ry, rs), (tx, ty, ts), which))| {
                    let r = sb(rx, ry, rx + 10.0, ry + 20.0, rs);
                    let t = sb(tx, ty, tx + 10.0, ty + 20.0, ts);
                    match which {
                        0 => DetectionPair::new(k as u64, Some(r), Some(t)),
                        1 => DetectionPair::new(k as u64, Some(r), None),
                        _ => DetectionPair::new(k as u64, None, Some(t)),
                    }
                })
                .collect();
            let cfg = NmsConfig::default();
            for survivor in pairwise_nms(&pairs, &cfg) {
                let origin = pairs
                    .iter()
                    .find(|p| p.anchor_id == survivor.anchor_id)
                    .expect("anchor id existed in the input");
                if let Some(b) = survivor.rgb {
                    prop_assert_eq!(Some(b), origin.rgb);
                }
                if let Some(b) = survivor.thermal {
                    prop_assert_eq!(Some(b), origin.thermal);
                }
                prop_assert!(survivor.rgb.is_some() || survivor.thermal.is_some());
            }
        }
    }
}

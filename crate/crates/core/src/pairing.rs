//! Pairs per-modality ground-truth annotations of one image into pedestrian
//! groups with the Hungarian algorithm, flagging unpaired pedestrians, and
//! computes dataset misalignment statistics.

use crate::geometry::{iou, BoundingBox};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PairingError {
    #[error("no paired groups to average")]
    NoPairedGroups,
}

/// One pedestrian's annotations across modalities. At least one side is
/// present; `person_id` is unique per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonGroup {
    pub person_id: u64,
    pub rgb: Option<BoundingBox>,
    pub thermal: Option<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCost {
    CenterDistance,
    OneMinusIou,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingConfig {
    pub cost: PairCost,
    /// Assignments with center distance above this break into two unpaired
    /// groups (center-distance cost).
    pub gate_distance: f64,
    /// Assignments with IoU below this break into two unpaired groups
    /// (IoU cost).
    pub gate_iou: f64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        // CVC-14-scale shifts put IoU near zero on narrow pedestrians, so
        // center distance is the default cost.
        PairingConfig {
            cost: PairCost::CenterDistance,
            gate_distance: 50.0,
            gate_iou: 1e-9,
        }
    }
}

/// Minimum-total-cost one-to-one assignment of `min(n, m)` row/column
/// pairs, returned as `(row, col)` sorted by row.
///
/// Shortest-augmenting-path formulation with dual potentials, O(n^2 m).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    if n > m {
        // solve the transpose and swap back
        let t: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..n).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> =
            hungarian(&t).into_iter().map(|(r, c)| (c, r)).collect();
        pairs.sort_unstable();
        return pairs;
    }

    // potentials u (rows) / v (columns); matched_row[j] = row assigned to
    // column j; index 0 is a virtual unmatched slot
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut path = vec![0usize; m + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let slack = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    path[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while j0 != 0 {
            let j1 = path[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| matched_row[j] != 0)
        .map(|j| (matched_row[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Pairs the two modality annotation lists of one image into person
/// groups. Hungarian assignments violating the gate break into two
/// unpaired groups; person ids run over the RGB boxes in index order, then
/// the remaining thermal boxes.
pub fn pair_annotations(
    rgb: &[BoundingBox],
    thermal: &[BoundingBox],
    cfg: &PairingConfig,
) -> Vec<PersonGroup> {
    let cost: Vec<Vec<f64>> = rgb
        .iter()
        .map(|r| {
            thermal
                .iter()
                .map(|t| match cfg.cost {
                    PairCost::CenterDistance => center_distance(r, t),
                    PairCost::OneMinusIou => 1.0 - iou(r, t),
                })
                .collect()
        })
        .collect();

    let mut partner_of_rgb = vec![None; rgb.len()];
    let mut thermal_taken = vec![false; thermal.len()];
    for (i, j) in hungarian(&cost) {
        let gated = match cfg.cost {
            PairCost::CenterDistance => center_distance(&rgb[i], &thermal[j]) > cfg.gate_distance,
            PairCost::OneMinusIou => iou(&rgb[i], &thermal[j]) < cfg.gate_iou,
        };
        if !gated {
            partner_of_rgb[i] = Some(j);
            thermal_taken[j] = true;
        }
    }

    let mut groups = Vec::with_capacity(rgb.len() + thermal.len());
    let mut next_id = 0u64;
    for (i, r) in rgb.iter().enumerate() {
        groups.push(PersonGroup {
            person_id: next_id,
            rgb: Some(*r),
            thermal: partner_of_rgb[i].map(|j| thermal[j]),
        });
        next_id += 1;
    }
    for (j, t) in thermal.iter().enumerate() {
        if !thermal_taken[j] {
            groups.push(PersonGroup {
                person_id: next_id,
                rgb: None,
                thermal: Some(*t),
            });
            next_id += 1;
        }
    }
    groups
}

/// Mean Euclidean distance between paired boxes' centers across all paired
/// groups of a dataset.
pub fn mean_pair_shift(groups: &[PersonGroup]) -> Result<f64, PairingError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for g in groups {
        if let (Some(r), Some(t)) = (&g.rgb, &g.thermal) {
            sum += center_distance(r, t);
            count += 1;
        }
    }
    if count == 0 {
        return Err(PairingError::NoPairedGroups);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hungarian_single_cell() {
        assert_eq!(hungarian(&[vec![3.0]]), vec![(0, 0)]);
    }

    #[test]
    fn hungarian_diagonal_optimum() {
        assert_eq!(
            hungarian(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            vec![(0, 0), (1, 1)]
        );
    }

    #[test]
    fn hungarian_rectangular() {
        // 2x3: rows must all be assigned
        let pairs = hungarian(&[vec![5.0, 1.0, 9.0], vec![4.0, 2.0, 7.0]]);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        // 3x2: only two rows assigned
        let pairs = hungarian(&[vec![5.0, 4.0], vec![1.0, 2.0], vec![9.0, 7.0]]);
        assert_eq!(pairs.len(), 2);
        let total: f64 = pairs.iter().map(|&(i, j)| [[5.0, 4.0], [1.0, 2.0], [9.0, 7.0]][i][j]).sum();
        assert_eq!(total, 5.0);
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for (k, &head) in items.iter().enumerate() {
            let rest: Vec<usize> = items
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &v)| v)
                .collect();
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    /// Exhaustive search over all assignments of rows to distinct columns.
    fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let m = cost[0].len();
        assert!(n <= m);
        let cols: Vec<usize> = (0..m).collect();
        let mut best = f64::INFINITY;
        for perm in permutations(&cols) {
            let total: f64 = (0..n).map(|i| cost[i][perm[i]]).sum();
            if total < best {
                best = total;
            }
        }
        best
    }

    #[test]
    fn hungarian_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..60 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(n..=6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let pairs = hungarian(&cost);
            assert_eq!(pairs.len(), n);
            let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
            let expected = brute_force_min_cost(&cost);
            assert_eq!(total, expected, "trial {trial}: {cost:?}");
        }
    }

    #[test]
    fn hungarian_invariant_under_constant_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cost: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..5).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = cost
            .iter()
            .map(|row| row.iter().map(|v| v + 3.5).collect())
            .collect();
        assert_eq!(hungarian(&cost), hungarian(&shifted));
    }

    fn boxes_at(centers: &[(f64, f64)]) -> Vec<BoundingBox> {
        centers
            .iter()
            .map(|&(x, y)| BoundingBox::from_center_size(x, y, 20.0, 50.0))
            .collect()
    }

    #[test]
    fn pair_identical_lists() {
        let rgb = boxes_at(&[(50.0, 50.0), (150.0, 80.0), (300.0, 60.0)]);
        let groups = pair_annotations(&rgb, &rgb, &PairingConfig::default());
        assert_eq!(groups.len(), 3);
        for g in &groups {
            assert_eq!(g.rgb, g.thermal);
        }
        assert_eq!(mean_pair_shift(&groups).unwrap(), 0.0);
    }

    #[test]
    fn extra_rgb_box_is_unpaired() {
        let rgb = boxes_at(&[(50.0, 50.0), (630.0, 40.0)]);
        let thermal = boxes_at(&[(52.0, 50.0)]);
        let groups = pair_annotations(&rgb, &thermal, &PairingConfig::default());
        assert_eq!(groups.len(), 2);
        assert!(groups[0].rgb.is_some() && groups[0].thermal.is_some());
        assert!(groups[1].rgb.is_some() && groups[1].thermal.is_none());
    }

    #[test]
    fn outlier_breaks_into_unpaired_groups() {
        // 5 rgb vs 5 thermal: four 3 px shifts and one 400 px outlier
        let rgb = boxes_at(&[(50.0, 50.0), (150.0, 50.0), (250.0, 50.0), (350.0, 50.0), (450.0, 50.0)]);
        let mut thermal_centers = vec![(53.0, 50.0), (153.0, 50.0), (253.0, 50.0), (353.0, 50.0)];
        thermal_centers.push((450.0, 450.0)); // 400 px vertical outlier
        let thermal = boxes_at(&thermal_centers);
        let groups = pair_annotations(&rgb, &thermal, &PairingConfig::default());
        let paired = groups
            .iter()
            .filter(|g| g.rgb.is_some() && g.thermal.is_some())
            .count();
        let unpaired = groups.len() - paired;
        assert_eq!((paired, unpaired), (4, 2));
    }

    #[test]
    fn mean_shift_arithmetic() {
        let g1 = PersonGroup {
            person_id: 0,
            rgb: Some(BoundingBox::from_center_size(10.0, 10.0, 4.0, 4.0)),
            thermal: Some(BoundingBox::from_center_size(13.0, 10.0, 4.0, 4.0)),
        };
        let g2 = PersonGroup {
            person_id: 1,
            rgb: Some(BoundingBox::from_center_size(30.0, 10.0, 4.0, 4.0)),
            thermal: Some(BoundingBox::from_center_size(30.0, 15.0, 4.0, 4.0)),
        };
        let unpaired = PersonGroup {
            person_id: 2,
            rgb: Some(BoundingBox::from_center_size(60.0, 10.0, 4.0, 4.0)),
            thermal: None,
        };
        assert_eq!(mean_pair_shift(&[g1, g2, unpaired.clone()]).unwrap(), 4.0);
        assert_eq!(mean_pair_shift(&[unpaired]), Err(PairingError::NoPairedGroups));
    }

    #[test]
    fn pairing_covers_every_box_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..30 {
            let rgb = boxes_at(
                &(0..rng.gen_range(0..8))
                    .map(|_| (rng.gen_range(0.0..600.0), rng.gen_range(0.0..450.0)))
                    .collect::<Vec<_>>(),
            );
            let thermal = boxes_at(
                &(0..rng.gen_range(0..8))
                    .map(|_| (rng.gen_range(0.0..600.0), rng.gen_range(0.0..450.0)))
                    .collect::<Vec<_>>(),
            );
            let groups = pair_annotations(&rgb, &thermal, &PairingConfig::default());
            let rgb_out = groups.iter().filter(|g| g.rgb.is_some()).count();
            let t_out = groups.iter().filter(|g| g.thermal.is_some()).count();
            assert_eq!(rgb_out, rgb.len());
            assert_eq!(t_out, thermal.len());
            let mut ids: Vec<u64> = groups.iter().map(|g| g.person_id).collect();
            ids.dedup();
            assert_eq!(ids.len(), groups.len());
        }
    }

    #[test]
    fn pairing_relation_symmetric_in_argument_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let a = boxes_at(
                &(0..rng.gen_range(1..6))
                    .map(|_| (rng.gen_range(0.0..600.0), rng.gen_range(0.0..450.0)))
                    .collect::<Vec<_>>(),
            );
            let b = boxes_at(
                &(0..rng.gen_range(1..6))
                    .map(|_| (rng.gen_range(0.0..600.0), rng.gen_range(0.0..450.0)))
                    .collect::<Vec<_>>(),
            );
            let cfg = PairingConfig::default();
            let mut ab: Vec<(BoundingBox, BoundingBox)> = pair_annotations(&a, &b, &cfg)
                .into_iter()
                .filter_map(|g| g.rgb.zip(g.thermal))
                .collect();
            let mut ba: Vec<(BoundingBox, BoundingBox)> = pair_annotations(&b, &a, &cfg)
                .into_iter()
                .filter_map(|g| g.rgb.zip(g.thermal))
                .map(|(x, y)| (y, x))
                .collect();
            let key = |p: &(BoundingBox, BoundingBox)| (p.0.x1.to_bits(), p.0.y1.to_bits());
            ab.sort_by_key(key);
            ba.sort_by_key(key);
            assert_eq!(ab, ba);
        }
    }
}

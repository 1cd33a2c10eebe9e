//! Shared fixture builders for the kernel benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgbt_core::codec::KernelGrid;
use rgbt_core::geometry::{BoundingBox, ScoredBox};
use rgbt_core::mining::{ConvWeights, FeatureTensor, OffsetField};
use rgbt_core::nms::DetectionPair;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_boxes(rng: &mut ChaCha8Rng, n: usize, span: f64) -> Vec<ScoredBox> {
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0..span);
            let y = rng.gen_range(0.0..span);
            ScoredBox::new(
                BoundingBox::from_tlwh(x, y, rng.gen_range(8.0..40.0), rng.gen_range(16.0..90.0)),
                rng.gen_range(0.0..1.0),
            )
        })
        .collect()
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<DetectionPair> {
    random_boxes(rng, n, 600.0)
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let shifted = ScoredBox::new(
                rgbt_core::geometry::translate(&b.bbox, rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)),
                b.score,
            );
            DetectionPair::new(k as u64, Some(b), Some(shifted))
        })
        .collect()
}

pub struct MiningFixture {
    pub features: FeatureTensor,
    pub decoded: OffsetField,
    pub weights: ConvWeights,
    pub kernel: KernelGrid,
}

pub fn mining_fixture(c: usize, h: usize, w: usize, k: usize, groups: usize, out_c: usize) -> MiningFixture {
    let mut rng = rng(77);
    let kernel = KernelGrid::new(k).unwrap();
    let features = FeatureTensor::from_vec(
        1,
        c,
        h,
        w,
        (0..c * h * w).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let decoded = OffsetField::from_vec(
        groups,
        2 * k * k,
        h,
        w,
        (0..groups * 2 * k * k * h * w)
            .map(|_| rng.gen_range(-4.0..4.0))
            .collect(),
    )
    .unwrap();
    let weights = ConvWeights::new(
        out_c,
        c,
        k,
        (0..out_c * c * k * k).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        (0..out_c).map(|_| rng.gen_range(-0.1..0.1)).collect(),
    )
    .unwrap();
    MiningFixture {
        features,
        decoded,
        weights,
        kernel,
    }
}

pub fn cost_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..100.0)).collect())
        .collect()
}

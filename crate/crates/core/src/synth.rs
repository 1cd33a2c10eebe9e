//! Deterministic synthetic fixtures: rectangle "pedestrians" with a
//! configurable inter-modality shift, planted misses and false positives
//! with known TP/FP labels, and optional rendered images. Everything
//! derives from the seed, so identical configs produce identical bytes.

use crate::geometry::{BoundingBox, ScoredBox};
use crate::homography::{self, HomographyMatrix};
use crate::io::{
    ImageGroups, ImagePairs, ManifestEntry, ModalAnnotations, ModalDetections, Modality,
    PairRecord, Tag,
};
use crate::mining::FeatureTensor;
use crate::pairing::PersonGroup;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftModel {
    /// Thermal boxes are the RGB boxes translated by a fixed vector.
    Translation { dx: f64, dy: f64 },
    /// Thermal boxes go through a per-image corner-jitter homography.
    Homography { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_images: usize,
    pub n_persons: usize,
    pub width: u32,
    pub height: u32,
    pub shift: ShiftModel,
    /// Fraction of persons left undetected, planted by count so the
    /// dataset-level miss fraction is exact when it divides evenly.
    pub miss_rate: f64,
    /// False positives planted per image, disjoint from every pedestrian.
    pub fp_per_image: usize,
    /// Uniform perturbation amplitude on detection scores.
    pub score_noise: f64,
    /// Extra overlapping (suppressible) detections per detected person.
    pub dup_per_person: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_images: 10,
            n_persons: 6,
            width: 640,
            height: 512,
            shift: ShiftModel::Translation { dx: 3.0, dy: 0.0 },
            miss_rate: 0.0,
            fp_per_image: 0,
            score_noise: 0.0,
            dup_per_person: 0,
            seed: 0,
        }
    }
}

/// Known detection labels for one image: one flag per emitted detection
/// (in file order) and the number of planted misses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLabels {
    pub image_id: String,
    pub rgb: Vec<bool>,
    pub thermal: Vec<bool>,
    pub missed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFixture {
    pub manifest: Vec<ManifestEntry>,
    pub gt: Vec<ImageGroups>,
    pub rgb_annotations: Vec<ModalAnnotations>,
    pub thermal_annotations: Vec<ModalAnnotations>,
    /// Per-modality detections, one rgb and one thermal line per image.
    pub detections: Vec<ModalDetections>,
    pub paired: Vec<ImagePairs>,
    pub labels: Vec<SynthLabels>,
}

const CELL_GAP: f64 = 24.0;
const MAX_PERSON_W: f64 = 28.0;
const MAX_PERSON_H: f64 = 80.0;

fn slot_capacity(width: u32, height: u32) -> (usize, usize) {
    let cols = ((f64::from(width) - CELL_GAP) / (MAX_PERSON_W + CELL_GAP)).floor() as usize;
    let rows = ((f64::from(height) - CELL_GAP) / (MAX_PERSON_H + CELL_GAP)).floor() as usize;
    (cols, rows)
}

/// Disjoint integer-coordinate rectangle for slot `k` of an image.
fn slot_box(rng: &mut ChaCha8Rng, cols: usize, k: usize) -> BoundingBox {
    let col = k % cols;
    let row = k / cols;
    let w = f64::from(rng.gen_range(16..=MAX_PERSON_W as i32));
    let h = f64::from(rng.gen_range(40..=MAX_PERSON_H as i32));
    let jitter_x = f64::from(rng.gen_range(0..=8));
    let jitter_y = f64::from(rng.gen_range(0..=8));
    let x = CELL_GAP + col as f64 * (MAX_PERSON_W + CELL_GAP) + jitter_x;
    let y = CELL_GAP + row as f64 * (MAX_PERSON_H + CELL_GAP) + jitter_y;
    BoundingBox::from_tlwh(x, y, w, h)
}

fn image_id(index: usize) -> String {
    format!("synth_{index:04}")
}

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Per-image thermal transform under the shift model.
fn thermal_transform(cfg: &SynthConfig, index: usize) -> HomographyMatrix {
    match cfg.shift {
        ShiftModel::Translation { dx, dy } => HomographyMatrix::translation(dx, dy),
        ShiftModel::Homography { alpha } => {
            let corners =
                homography::image_corners(cfg.width as usize, cfg.height as usize);
            let jitter = homography::jitter_for_image(alpha, cfg.seed ^ 0x9e37_79b9, index as u64);
            let moved = homography::apply_jitter(&corners, &jitter);
            homography::solve_homography(&corners, &moved)
                .expect("corner jitter within alpha keeps the quad non-degenerate")
        }
    }
}

pub fn synth_fixture(cfg: &SynthConfig) -> SynthFixture {
    let (cols, rows) = slot_capacity(cfg.width, cfg.height);
    let capacity = cols * rows;
    assert!(
        cfg.n_persons + cfg.fp_per_image <= capacity,
        "{} persons + {} FPs exceed the {capacity} disjoint slots of a {}x{} image",
        cfg.n_persons,
        cfg.fp_per_image,
        cfg.width,
        cfg.height
    );

    let total_persons = cfg.n_images * cfg.n_persons;
    let mut fixture = SynthFixture {
        manifest: Vec::new(),
        gt: Vec::new(),
        rgb_annotations: Vec::new(),
        thermal_annotations: Vec::new(),
        detections: Vec::new(),
        paired: Vec::new(),
        labels: Vec::new(),
    };
    let mut global_person = 0usize;

    for index in 0..cfg.n_images {
        let id = image_id(index);
        let mut rng = image_rng(cfg.seed, index);
        let warp = thermal_transform(cfg, index);

        let mut groups = Vec::with_capacity(cfg.n_persons);
        let mut rgb_boxes = Vec::new();
        let mut thermal_boxes = Vec::new();
        let mut rgb_dets: Vec<ScoredBox> = Vec::new();
        let mut thermal_dets: Vec<ScoredBox> = Vec::new();
        let mut rgb_labels = Vec::new();
        let mut thermal_labels = Vec::new();
        let mut pairs = Vec::new();
        let mut missed = 0usize;
        let mut anchor = 0u64;

        for p in 0..cfg.n_persons {
            let rgb = slot_box(&mut rng, cols, p);
            let thermal = homography::warp_box(&rgb, &warp)
                .expect("translation and small jitter warps cannot hit infinity");
            groups.push(PersonGroup {
                person_id: p as u64,
                rgb: Some(rgb),
                thermal: Some(thermal),
            });
            rgb_boxes.push(rgb);
            thermal_boxes.push(thermal);

            // Bresenham-style planting keeps the dataset miss count exact
            let dropped = ((global_person + 1) as f64 * cfg.miss_rate).floor()
                - (global_person as f64 * cfg.miss_rate).floor()
                >= 1.0;
            global_person += 1;
            if dropped {
                missed += 1;
                continue;
            }

            let base = 0.95 - 0.55 * (global_person - 1) as f64 / total_persons.max(1) as f64;
            let noise = if cfg.score_noise > 0.0 {
                rng.gen_range(-cfg.score_noise..=cfg.score_noise)
            } else {
                0.0
            };
            let score = (base + noise).clamp(0.05, 1.0);
            rgb_dets.push(ScoredBox::new(rgb, score));
            thermal_dets.push(ScoredBox::new(thermal, score));
            rgb_labels.push(true);
            thermal_labels.push(true);
            pairs.push(PairRecord {
                anchor_id: anchor,
                rgb: Some(ScoredBox::new(rgb, score)),
                thermal: Some(ScoredBox::new(thermal, score)),
                enclosing: None,
            });
            anchor += 1;

            for d in 0..cfg.dup_per_person {
                let grow = 2.0 * (d + 1) as f64;
                let dup_rgb = BoundingBox::new(
                    rgb.x1 - grow,
                    rgb.y1 - grow,
                    rgb.x2 + grow,
                    rgb.y2 + grow,
                );
                let dup_thermal = BoundingBox::new(
                    thermal.x1 - grow,
                    thermal.y1 - grow,
                    thermal.x2 + grow,
                    thermal.y2 + grow,
                );
                let dup_score = (score - 0.15 * (d + 1) as f64).max(0.01);
                rgb_dets.push(ScoredBox::new(dup_rgb, dup_score));
                thermal_dets.push(ScoredBox::new(dup_thermal, dup_score));
                rgb_labels.push(false);
                thermal_labels.push(false);
                pairs.push(PairRecord {
                    anchor_id: anchor,
                    rgb: Some(ScoredBox::new(dup_rgb, dup_score)),
                    thermal: Some(ScoredBox::new(dup_thermal, dup_score)),
                    enclosing: None,
                });
                anchor += 1;
            }
        }

        for k in 0..cfg.fp_per_image {
            let fp_rgb = slot_box(&mut rng, cols, cfg.n_persons + k);
            let fp_thermal = homography::warp_box(&fp_rgb, &warp).unwrap();
            let noise = if cfg.score_noise > 0.0 {
                rng.gen_range(-cfg.score_noise..=cfg.score_noise)
            } else {
                0.0
            };
            let score = (0.4 - 0.3 * k as f64 / cfg.fp_per_image.max(1) as f64 + noise)
                .clamp(0.01, 0.45);
            rgb_dets.push(ScoredBox::new(fp_rgb, score));
            thermal_dets.push(ScoredBox::new(fp_thermal, score));
            rgb_labels.push(false);
            thermal_labels.push(false);
            pairs.push(PairRecord {
                anchor_id: anchor,
                rgb: Some(ScoredBox::new(fp_rgb, score)),
                thermal: Some(ScoredBox::new(fp_thermal, score)),
                enclosing: None,
            });
            anchor += 1;
        }

        fixture.manifest.push(ManifestEntry {
            image_id: id.clone(),
            rgb_path: format!("{id}_rgb.ppm"),
            thermal_path: format!("{id}_thermal.pgm"),
            tag: if index % 2 == 0 { Tag::Day } else { Tag::Night },
            width: cfg.width,
            height: cfg.height,
        });
        fixture.gt.push(ImageGroups {
            image_id: id.clone(),
            groups,
        });
        fixture.rgb_annotations.push(ModalAnnotations {
            image_id: id.clone(),
            boxes: rgb_boxes,
        });
        fixture.thermal_annotations.push(ModalAnnotations {
            image_id: id.clone(),
            boxes: thermal_boxes,
        });
        fixture.detections.push(ModalDetections {
            image_id: id.clone(),
            modality: Modality::Rgb,
            boxes: rgb_dets,
        });
        fixture.detections.push(ModalDetections {
            image_id: id.clone(),
            modality: Modality::Thermal,
            boxes: thermal_dets,
        });
        fixture.paired.push(ImagePairs {
            image_id: id.clone(),
            pairs,
        });
        fixture.labels.push(SynthLabels {
            image_id: id,
            rgb: rgb_labels,
            thermal: thermal_labels,
            missed,
        });
    }
    fixture
}

/// Renders one modality of a fixture image: a soft gradient background
/// with bright pedestrian rectangles, RGB as 3 channels, thermal as 1.
pub fn synth_image(cfg: &SynthConfig, index: usize, modality: Modality) -> FeatureTensor {
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let channels = match modality {
        Modality::Rgb => 3,
        Modality::Thermal => 1,
    };
    let (cols, rows) = slot_capacity(cfg.width, cfg.height);
    assert!(
        cfg.n_persons <= cols * rows,
        "{} persons exceed the {} slots of a {}x{} image",
        cfg.n_persons,
        cols * rows,
        cfg.width,
        cfg.height
    );
    let mut img = FeatureTensor::zeros(1, channels, h, w);
    for y in 0..h {
        for x in 0..w {
            let base = 40.0 + 60.0 * (x as f64 / w as f64) + 40.0 * (y as f64 / h as f64);
            for c in 0..channels {
                img.set(0, c, y, x, base + 10.0 * c as f64);
            }
        }
    }
    let mut rng = image_rng(cfg.seed, index);
    let warp = thermal_transform(cfg, index);
    for p in 0..cfg.n_persons {
        let rgb = slot_box(&mut rng, cols, p);
        let b = match modality {
            Modality::Rgb => rgb,
            Modality::Thermal => homography::warp_box(&rgb, &warp).unwrap(),
        };
        let x1 = b.x1.max(0.0) as usize;
        let y1 = b.y1.max(0.0) as usize;
        let x2 = (b.x2.min(w as f64 - 1.0)) as usize;
        let y2 = (b.y2.min(h as f64 - 1.0)) as usize;
        for y in y1..=y2.min(h - 1) {
            for x in x1..=x2.min(w - 1) {
                for c in 0..channels {
                    img.set(0, c, y, x, 220.0 - 15.0 * c as f64);
                }
            }
        }
    }
    img
}

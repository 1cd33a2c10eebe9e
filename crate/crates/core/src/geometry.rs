//! Axis-aligned box algebra shared by every other module.
//!
//! Boxes are continuous (sub-pixel) corner pairs; area is
//! `(x2 - x1) * (y2 - y1)` with no half-open pixel semantics. Zero-area
//! boxes are legal inputs everywhere and score 0 IoU with everything.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Axis-aligned box in pixel coordinates, stored as top-left and
/// bottom-right corners.
///
/// Serializes as a `[x1, y1, x2, y2]` array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BoundingBox { x1, y1, x2, y2 }
    }

    /// Center-size view: builds the box from `(cx, cy, w, h)`.
    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x1: cx - 0.5 * w,
            y1: cy - 0.5 * h,
            x2: cx + 0.5 * w,
            y2: cy + 0.5 * h,
        }
    }

    /// Top-left + size view: builds the box from `(x, y, w, h)`.
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x1: x,
            y1: y,
            x2: x + w,
            y2: y + h,
        }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    /// Top-left + size view of the corners.
    pub fn tlwh(&self) -> (f64, f64, f64, f64) {
        (self.x1, self.y1, self.width(), self.height())
    }

    /// True when all coordinates are finite and corners are ordered.
    pub fn is_valid(&self) -> bool {
        self.x1.is_finite()
            && self.y1.is_finite()
            && self.x2.is_finite()
            && self.y2.is_finite()
            && self.x2 >= self.x1
            && self.y2 >= self.y1
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    /// Intersects the box with `[0, width] x [0, height]`; `None` when the
    /// box lies entirely outside.
    pub fn clip_to(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let clipped = BoundingBox {
            x1: self.x1.max(0.0),
            y1: self.y1.max(0.0),
            x2: self.x2.min(width),
            y2: self.y2.min(height),
        };
        if clipped.x2 >= clipped.x1 && clipped.y2 >= clipped.y1 {
            Some(clipped)
        } else {
            None
        }
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x1, self.y1, self.x2, self.y2].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = <Vec<f64>>::deserialize(deserializer)?;
        if v.len() != 4 {
            return Err(D::Error::custom(format!(
                "box must have 4 coordinates, got {}",
                v.len()
            )));
        }
        Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
    }
}

/// A box with a detection confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BoundingBox, score: f64) -> Self {
        ScoredBox { bbox, score }
    }
}

/// Intersection over union. Symmetric, in `[0, 1]`, and 0 whenever the
/// union has zero area (degenerate boxes score 0 by convention).
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Smallest axis-aligned box containing both inputs.
pub fn enclosing_box(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    BoundingBox {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }
}

/// Offsets all corners by `(dx, dy)`.
pub fn translate(b: &BoundingBox, dx: f64, dy: f64) -> BoundingBox {
    BoundingBox {
        x1: b.x1 + dx,
        y1: b.y1 + dy,
        x2: b.x2 + dx,
        y2: b.y2 + dy,
    }
}

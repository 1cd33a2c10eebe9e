//! Homography augmentation: random corner jitter, 4-point projective
//! solve, inverse-mapping image warp, and box transformation.
//!
//! Jitter is drawn from a seedable, splittable generator so augmentation is
//! reproducible under any parallel schedule: an image's shifts derive from
//! `(global seed, image index)`.

use crate::geometry::BoundingBox;
use crate::mining::{bilinear_sample, FeatureTensor};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HomographyError {
    #[error("degenerate corner configuration")]
    DegenerateCorners,
    #[error("point at infinity (homogeneous depth {depth:e})")]
    PointAtInfinity { depth: f64 },
    #[error("singular homography matrix")]
    Singular,
    #[error("warp expects a single-image tensor (batch 1), got batch {0}")]
    BadBatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Per-corner random shifts bounded by `alpha`, reproducible from the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerJitter {
    pub alpha: f64,
    pub shifts: [(f64, f64); 4],
    pub seed: u64,
}

/// 3x3 projective transform normalized to `m[2][2] = 1`, together with the
/// four corner correspondences it was solved from.
#[derive(Debug, Clone, PartialEq)]
pub struct HomographyMatrix {
    m: [[f64; 3]; 3],
    pub src: [Point; 4],
    pub dst: [Point; 4],
}

impl HomographyMatrix {
    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    /// Pure translation by `(dx, dy)`. Projecting through it computes
    /// `x + dx` exactly, which keeps integer-pixel shifts bit-exact.
    pub fn translation(dx: f64, dy: f64) -> Self {
        let src = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let dst = [
            Point::new(dx, dy),
            Point::new(1.0 + dx, dy),
            Point::new(1.0 + dx, 1.0 + dy),
            Point::new(dx, 1.0 + dy),
        ];
        HomographyMatrix {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
            src,
            dst,
        }
    }

    pub fn is_translation(&self) -> bool {
        self.m[0][0] == 1.0
            && self.m[0][1] == 0.0
            && self.m[1][0] == 0.0
            && self.m[1][1] == 1.0
            && self.m[2][0] == 0.0
            && self.m[2][1] == 0.0
            && self.m[2][2] == 1.0
    }

    /// Inverse transform (adjugate over determinant), renormalized to
    /// `m[2][2] = 1`, with the corner correspondences swapped.
    pub fn inverse(&self) -> Result<HomographyMatrix, HomographyError> {
        if self.is_translation() {
            let mut t = HomographyMatrix::translation(-self.m[0][2], -self.m[1][2]);
            t.src = self.dst;
            t.dst = self.src;
            return Ok(t);
        }
        let m = &self.m;
        let cof = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let det = m[0][0] * cof[0][0] + m[0][1] * cof[1][0] + m[0][2] * cof[2][0];
        if det.abs() < 1e-15 {
            return Err(HomographyError::Singular);
        }
        let mut inv = [[0.0; 3]; 3];
        for (r, row) in cof.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                inv[r][c] = v / det;
            }
        }
        let scale = inv[2][2];
        if scale.abs() < 1e-15 {
            return Err(HomographyError::Singular);
        }
        for row in &mut inv {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
        Ok(HomographyMatrix {
            m: inv,
            src: self.dst,
            dst: self.src,
        })
    }
}

/// Four independent shifts drawn from `U(-alpha, alpha)` per coordinate,
/// deterministic in `seed`.
pub fn sample_jitter(alpha: f64, seed: u64) -> CornerJitter {
    jitter_for_image(alpha, seed, 0)
}

/// Jitter for one image of a dataset: the generator derives from the global
/// seed with the image index as the stream, so images can be processed in
/// any order or in parallel.
pub fn jitter_for_image(alpha: f64, seed: u64, image_index: u64) -> CornerJitter {
    assert!(alpha >= 0.0, "alpha must be nonnegative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(image_index);
    let dist = Uniform::new_inclusive(-alpha, alpha);
    let mut shifts = [(0.0, 0.0); 4];
    for shift in &mut shifts {
        let tx = dist.sample(&mut rng);
        let ty = dist.sample(&mut rng);
        *shift = (tx, ty);
    }
    CornerJitter {
        alpha,
        shifts,
        seed,
    }
}

/// Corners of the continuous image domain `[0, W-1] x [0, H-1]`, the region
/// bilinear sampling treats as in-bounds.
pub fn image_corners(width: usize, height: usize) -> [Point; 4] {
    let w = (width - 1) as f64;
    let h = (height - 1) as f64;
    [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
    ]
}

pub fn apply_jitter(corners: &[Point; 4], jitter: &CornerJitter) -> [Point; 4] {
    let mut out = *corners;
    for (p, &(tx, ty)) in out.iter_mut().zip(&jitter.shifts) {
        p.x += tx;
        p.y += ty;
    }
    out
}

/// Solves the projective map sending each `src` corner to its `dst` corner
/// by direct linear transform: 8 equations, 8 unknowns, `m[2][2] = 1`.
///
/// A uniform shift of all four corners is solved as an exact translation
/// (identity included), so integer-pixel shifts stay bit-exact.
pub fn solve_homography(
    src: &[Point; 4],
    dst: &[Point; 4],
) -> Result<HomographyMatrix, HomographyError> {
    let d0 = (dst[0].x - src[0].x, dst[0].y - src[0].y);
    if (1..4).all(|k| (dst[k].x - src[k].x, dst[k].y - src[k].y) == d0) {
        let mut t = HomographyMatrix::translation(d0.0, d0.1);
        t.src = *src;
        t.dst = *dst;
        return Ok(t);
    }

    // rows: a*x + b*y + c - g*x*u - h*y*u = u  (and the v analogue)
    let mut a = [[0.0f64; 9]; 8];
    for k in 0..4 {
        let (x, y) = (src[k].x, src[k].y);
        let (u, v) = (dst[k].x, dst[k].y);
        a[2 * k] = [x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u, u];
        a[2 * k + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v, v];
    }
    let sol = solve_linear_8(&mut a).ok_or(HomographyError::DegenerateCorners)?;
    let h = HomographyMatrix {
        m: [
            [sol[0], sol[1], sol[2]],
            [sol[3], sol[4], sol[5]],
            [sol[6], sol[7], 1.0],
        ],
        src: *src,
        dst: *dst,
    };
    // near-degenerate configurations survive elimination with a huge residual
    for k in 0..4 {
        let p = project(&h, src[k]).map_err(|_| HomographyError::DegenerateCorners)?;
        if (p.x - dst[k].x).abs() > 1e-6 || (p.y - dst[k].y).abs() > 1e-6 {
            return Err(HomographyError::DegenerateCorners);
        }
    }
    Ok(h)
}

/// Gaussian elimination with partial pivoting on an 8x9 augmented system.
fn solve_linear_8(a: &mut [[f64; 9]; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let pivot_row = (col..8).max_by(|&r, &s| {
            a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap()
        })?;
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        for row in (col + 1)..8 {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..9 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0f64; 8];
    for row in (0..8).rev() {
        let mut acc = a[row][8];
        for k in (row + 1)..8 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Applies the transform to a point: `(u, v, d) = m * (x, y, 1)`, result
/// `(u/d, v/d)`.
pub fn project(h: &HomographyMatrix, p: Point) -> Result<Point, HomographyError> {
    let m = &h.m;
    let u = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
    let v = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
    let d = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if d.abs() <= 1e-12 {
        return Err(HomographyError::PointAtInfinity { depth: d });
    }
    Ok(Point::new(u / d, v / d))
}

/// Inverse-mapping warp of a `(1, C, H, W)` tensor: each output pixel
/// bilinearly samples the source at its preimage; pixels mapping outside
/// the source (or to infinity) are zero.
pub fn warp_image(
    img: &FeatureTensor,
    h: &HomographyMatrix,
) -> Result<FeatureTensor, HomographyError> {
    let (n, c, height, width) = img.dims();
    if n != 1 {
        return Err(HomographyError::BadBatch(n));
    }
    let inv = h.inverse()?;
    let mut out = FeatureTensor::zeros(1, c, height, width);
    for y in 0..height {
        for x in 0..width {
            match project(&inv, Point::new(x as f64, y as f64)) {
                Ok(p) => {
                    for ch in 0..c {
                        out.set(0, ch, y, x, bilinear_sample(img, 0, ch, p.x, p.y));
                    }
                }
                Err(_) => {
                    // preimage at infinity: leave zeros
                }
            }
        }
    }
    Ok(out)
}

/// Transforms a box: projects all four corners and returns their
/// axis-aligned hull (conservative, never clips the content).
pub fn warp_box(b: &BoundingBox, h: &HomographyMatrix) -> Result<BoundingBox, HomographyError> {
    if h.is_translation() {
        return Ok(crate::geometry::translate(b, h.m[0][2], h.m[1][2]));
    }
    let corners = [
        Point::new(b.x1, b.y1),
        Point::new(b.x2, b.y1),
        Point::new(b.x2, b.y2),
        Point::new(b.x1, b.y2),
    ];
    let mut x1 = f64::INFINITY;
    let mut y1 = f64::INFINITY;
    let mut x2 = f64::NEG_INFINITY;
    let mut y2 = f64::NEG_INFINITY;
    for corner in corners {
        let p = project(h, corner)?;
        x1 = x1.min(p.x);
        y1 = y1.min(p.y);
        x2 = x2.max(p.x);
        y2 = y2.max(p.y);
    }
    Ok(BoundingBox::new(x1, y1, x2, y2))
}

/// Warps a ground-truth box into a `width x height` frame: clips boxes
/// pushed partially outside to the image bounds and drops (returns `None`
/// for) boxes landing fully outside.
pub fn warp_box_clipped(
    b: &BoundingBox,
    h: &HomographyMatrix,
    width: usize,
    height: usize,
) -> Result<Option<BoundingBox>, HomographyError> {
    let warped = warp_box(b, h)?;
    Ok(warped
        .clip_to(width as f64, height as f64)
        .filter(|c| c.area() > 0.0))
}

//! Encode/decode transforms between detection-head parameterizations and
//! pixel-space boxes: anchor-grid decode and its inverse, residual box
//! refinement and its inverse, and the proposal-guided decode of deformable
//! sampling offsets.
//!
//! All functions here are purely affine/log-affine; the sigmoid that
//! normalizes raw offset logits lives in [`crate::mining`].

use crate::geometry::BoundingBox;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("degenerate box not encodable (w={w}, h={h})")]
    DegenerateBox { w: f64, h: f64 },
    #[error("cell ({i}, {j}) outside {width}x{height} grid")]
    CellOutOfGrid {
        i: usize,
        j: usize,
        width: usize,
        height: usize,
    },
    #[error("offset not sigmoid-normalized: component {index} = {value}")]
    OffsetNotNormalized { index: usize, value: f64 },
    #[error("non-finite input in {context}")]
    NonFinite { context: &'static str },
    #[error("kernel size must be odd and positive, got {0}")]
    BadKernelSize(usize),
    #[error("expected {expected} offset components, got {got}")]
    OffsetLength { expected: usize, got: usize },
}

/// One stage of the detection pyramid: a `width x height` grid of anchor
/// cells, `stride` input pixels apart.
///
/// The default pyramid uses strides 8/16/32 for stages 3/4/5 (YOLOX
/// convention); all of it stays configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub stride: f64,
    pub width: usize,
    pub height: usize,
    pub stage: u32,
}

impl GridSpec {
    pub fn new(stride: f64, width: usize, height: usize, stage: u32) -> Self {
        assert!(stride > 0.0, "stride must be positive");
        assert!(width >= 1 && height >= 1, "grid must be at least 1x1");
        GridSpec {
            stride,
            width,
            height,
            stage,
        }
    }

    /// Grid for pyramid stage `k` with stride `2^k`, sized to cover an
    /// `image_width x image_height` input.
    pub fn for_stage(stage: u32, image_width: usize, image_height: usize) -> Self {
        let s = 1usize << stage;
        GridSpec::new(
            s as f64,
            image_width.div_ceil(s),
            image_height.div_ceil(s),
            stage,
        )
    }

    pub fn contains_cell(&self, cell: (usize, usize)) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }
}

/// Head-space box parameterization at one anchor cell: normalized center
/// offsets plus log-scale size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedBox {
    pub x: f64,
    pub y: f64,
    pub log_w: f64,
    pub log_h: f64,
    pub cell: (usize, usize),
}

/// Normalized corner residual refining a proposal box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualDelta {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl ResidualDelta {
    pub fn new(d1: f64, d2: f64, d3: f64, d4: f64) -> Self {
        ResidualDelta { d1, d2, d3, d4 }
    }
}

/// The fixed tap lattice of a `K x K` deformable kernel: primary offsets
/// `(q_x, q_y)` in `{-(K-1)/2 ..= (K-1)/2}^2`, enumerated row-major
/// (`q_y` outer, `q_x` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    kernel_size: usize,
    offsets: Vec<(i32, i32)>,
}

impl KernelGrid {
    pub fn new(kernel_size: usize) -> Result<Self, CodecError> {
        if kernel_size == 0 || kernel_size % 2 == 0 {
            return Err(CodecError::BadKernelSize(kernel_size));
        }
        let half = (kernel_size as i32 - 1) / 2;
        let mut offsets = Vec::with_capacity(kernel_size * kernel_size);
        for qy in -half..=half {
            for qx in -half..=half {
                offsets.push((qx, qy));
            }
        }
        Ok(KernelGrid {
            kernel_size,
            offsets,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    /// Number of taps, `K^2`.
    pub fn taps(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Decodes the grid parameterization into a pixel-space box:
/// `center = stride * (encoded + cell)`, `size = stride * exp(log size)`.
pub fn decode_anchor(e: &EncodedBox, g: &GridSpec) -> Result<BoundingBox, CodecError> {
    if !(e.x.is_finite() && e.y.is_finite() && e.log_w.is_finite() && e.log_h.is_finite()) {
        return Err(CodecError::NonFinite {
            context: "decode_anchor",
        });
    }
    if !g.contains_cell(e.cell) {
        return Err(CodecError::CellOutOfGrid {
            i: e.cell.0,
            j: e.cell.1,
            width: g.width,
            height: g.height,
        });
    }
    let s = g.stride;
    let cx = s * e.x + e.cell.0 as f64 * s;
    let cy = s * e.y + e.cell.1 as f64 * s;
    let w = s * e.log_w.exp();
    let h = s * e.log_h.exp();
    Ok(BoundingBox::from_center_size(cx, cy, w, h))
}

/// Exact algebraic inverse of [`decode_anchor`] at the given cell.
pub fn encode_anchor(
    b: &BoundingBox,
    g: &GridSpec,
    cell: (usize, usize),
) -> Result<EncodedBox, CodecError> {
    let (w, h) = (b.width(), b.height());
    if !(w > 0.0 && h > 0.0) {
        return Err(CodecError::DegenerateBox { w, h });
    }
    if !g.contains_cell(cell) {
        return Err(CodecError::CellOutOfGrid {
            i: cell.0,
            j: cell.1,
            width: g.width,
            height: g.height,
        });
    }
    let s = g.stride;
    let (cx, cy) = b.center();
    Ok(EncodedBox {
        x: cx / s - cell.0 as f64,
        y: cy / s - cell.1 as f64,
        log_w: (w / s).ln(),
        log_h: (h / s).ln(),
        cell,
    })
}

/// Applies a corner residual to a proposal (top-left/size view):
/// top-left moves by `(d1*w, d2*h)`, bottom-right by `(d3*w, d4*h)`.
///
/// The output may be degenerate; callers validate.
pub fn decode_residual(proposal: &BoundingBox, d: &ResidualDelta) -> BoundingBox {
    let (x, y, w, h) = proposal.tlwh();
    BoundingBox {
        x1: x + d.d1 * w,
        y1: y + d.d2 * h,
        x2: (x + w) + d.d3 * w,
        y2: (y + h) + d.d4 * h,
    }
}

/// Exact algebraic inverse of [`decode_residual`].
pub fn encode_residual(
    proposal: &BoundingBox,
    target: &BoundingBox,
) -> Result<ResidualDelta, CodecError> {
    let (x, y, w, h) = proposal.tlwh();
    if !(w > 0.0 && h > 0.0) {
        return Err(CodecError::DegenerateBox { w, h });
    }
    Ok(ResidualDelta {
        d1: (target.x1 - x) / w,
        d2: (target.y1 - y) / h,
        d3: (target.x2 - (x + w)) / w,
        d4: (target.y2 - (y + h)) / h,
    })
}

/// Sampling center of the deformable kernel at a cell: `(0.5 + i, 0.5 + j)`
/// in feature-map units.
pub fn deform_center(cell: (usize, usize)) -> (f64, f64) {
    (0.5 + cell.0 as f64, 0.5 + cell.1 as f64)
}

/// Decodes sigmoid-normalized offsets at one cell against a proposal box.
///
/// `raw` holds `2*K^2` values in `[0, 1]`, interleaved `(x, y)` per tap in
/// the tap order of `kernel`. The proposal is given in input-image pixels.
/// Decoded so that every absolute sampling location
/// `center + primary + decoded` lands inside the proposal rectangle
/// expressed in feature-map units (closed interval).
pub fn decode_offsets(
    raw: &[f64],
    proposal: &BoundingBox,
    g: &GridSpec,
    cell: (usize, usize),
    kernel: &KernelGrid,
) -> Result<Vec<f64>, CodecError> {
    let expected = 2 * kernel.taps();
    if raw.len() != expected {
        return Err(CodecError::OffsetLength {
            expected,
            got: raw.len(),
        });
    }
    for (index, &value) in raw.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(CodecError::OffsetNotNormalized { index, value });
        }
    }
    let s = g.stride;
    let (x, y, w, h) = proposal.tlwh();
    let (xc, yc) = deform_center(cell);
    let mut out = Vec::with_capacity(expected);
    for (tap, &(qx, qy)) in kernel.offsets().iter().enumerate() {
        let ox = raw[2 * tap];
        let oy = raw[2 * tap + 1];
        out.push(ox * w / s + (x / s - xc) - f64::from(qx));
        out.push(oy * h / s + (y / s - yc) - f64::from(qy));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn decode_anchor_zero_logits() {
        let g = GridSpec::new(8.0, 80, 64, 3);
        let e = EncodedBox {
            x: 0.0,
            y: 0.0,
            log_w: 0.0,
            log_h: 0.0,
            cell: (0, 0),
        };
        let b = decode_anchor(&e, &g).unwrap();
        assert_eq!(b.center(), (0.0, 0.0));
        assert_eq!(b.width(), 8.0);
        assert_eq!(b.height(), 8.0);
    }

    #[test]
    fn decode_anchor_worked_example() {
        let g = GridSpec::new(16.0, 40, 32, 4);
        let e = EncodedBox {
            x: 0.5,
            y: -0.5,
            log_w: 2f64.ln(),
            log_h: 0.0,
            cell: (3, 2),
        };
        let b = decode_anchor(&e, &g).unwrap();
        assert_relative_eq!(b.center().0, 56.0, max_relative = 1e-12);
        assert_relative_eq!(b.center().1, 24.0, max_relative = 1e-12);
        assert_relative_eq!(b.width(), 32.0, max_relative = 1e-12);
        assert_relative_eq!(b.height(), 16.0, max_relative = 1e-12);
    }

    #[test]
    fn encode_anchor_inverse_of_example() {
        let g = GridSpec::new(16.0, 40, 32, 4);
        let b = BoundingBox::from_center_size(56.0, 24.0, 32.0, 16.0);
        let e = encode_anchor(&b, &g, (3, 2)).unwrap();
        assert_relative_eq!(e.x, 0.5, max_relative = 1e-12);
        assert_relative_eq!(e.y, -0.5, max_relative = 1e-12);
        assert_relative_eq!(e.log_w, 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(e.log_h, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn encode_anchor_rejects_degenerate() {
        let g = GridSpec::new(8.0, 10, 10, 3);
        let b = BoundingBox::new(5.0, 5.0, 5.0, 9.0);
        assert!(matches!(
            encode_anchor(&b, &g, (0, 0)),
            Err(CodecError::DegenerateBox { .. })
        ));
    }

    #[test]
    fn decode_anchor_cell_equivariance() {
        let g = GridSpec::new(8.0, 32, 32, 3);
        let e0 = EncodedBox {
            x: 0.25,
            y: 0.75,
            log_w: 0.3,
            log_h: -0.2,
            cell: (4, 5),
        };
        let e1 = EncodedBox {
            cell: (7, 9),
            ..e0
        };
        let b0 = decode_anchor(&e0, &g).unwrap();
        let b1 = decode_anchor(&e1, &g).unwrap();
        assert_relative_eq!(b1.center().0 - b0.center().0, 8.0 * 3.0, max_relative = 1e-12);
        assert_relative_eq!(b1.center().1 - b0.center().1, 8.0 * 4.0, max_relative = 1e-12);
        assert_eq!(b0.width(), b1.width());
        assert_eq!(b0.height(), b1.height());
    }

    #[test]
    fn residual_zero_is_identity() {
        let p = BoundingBox::from_tlwh(10.0, 20.0, 40.0, 80.0);
        assert_eq!(decode_residual(&p, &ResidualDelta::new(0.0, 0.0, 0.0, 0.0)), p);
    }

    #[test]
    fn residual_worked_example() {
        let p = BoundingBox::from_tlwh(10.0, 20.0, 40.0, 80.0);
        let d = ResidualDelta::new(0.1, -0.1, 0.05, 0.0);
        let b = decode_residual(&p, &d);
        assert_relative_eq!(b.x1, 14.0, max_relative = 1e-12);
        assert_relative_eq!(b.y1, 12.0, max_relative = 1e-12);
        assert_relative_eq!(b.x2, 52.0, max_relative = 1e-12);
        assert_relative_eq!(b.y2, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn residual_encode_inverse() {
        let p = BoundingBox::from_tlwh(10.0, 20.0, 40.0, 80.0);
        let t = BoundingBox::new(14.0, 12.0, 52.0, 100.0);
        let d = encode_residual(&p, &t).unwrap();
        assert_relative_eq!(d.d1, 0.1, max_relative = 1e-12);
        assert_relative_eq!(d.d2, -0.1, max_relative = 1e-12);
        assert_relative_eq!(d.d3, 0.05, max_relative = 1e-12);
        assert_relative_eq!(d.d4, 0.0, epsilon = 1e-12);

        let zero_w = BoundingBox::from_tlwh(0.0, 0.0, 0.0, 10.0);
        assert!(encode_residual(&zero_w, &t).is_err());
    }

    #[test]
    fn deform_center_examples() {
        assert_eq!(deform_center((0, 0)), (0.5, 0.5));
        assert_eq!(deform_center((3, 7)), (3.5, 7.5));
    }

    #[test]
    fn kernel_grid_row_major() {
        let k = KernelGrid::new(3).unwrap();
        assert_eq!(
            k.offsets(),
            &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (0, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1)
            ]
        );
        assert!(KernelGrid::new(4).is_err());
        assert!(KernelGrid::new(0).is_err());
    }

    #[test]
    fn decode_offsets_worked_example() {
        // o_x = 0.5 at tap q_x = -1 of a 3x3 kernel, cell (1, 0), stride 8,
        // proposal at (16, 0) sized 32x16: decoded x-offset 3.5, absolute
        // sample lands on the proposal center column (4.0 feature units).
        let g = GridSpec::new(8.0, 16, 16, 3);
        let kernel = KernelGrid::new(3).unwrap();
        let proposal = BoundingBox::from_tlwh(16.0, 0.0, 32.0, 16.0);
        let raw = vec![0.5; 18];
        let decoded = decode_offsets(&raw, &proposal, &g, (1, 0), &kernel).unwrap();
        // tap 3 is (q_x, q_y) = (-1, 0)
        assert_relative_eq!(decoded[6], 3.5, max_relative = 1e-12);
        let (xc, _) = deform_center((1, 0));
        let absolute = xc + f64::from(-1) + decoded[6];
        assert_relative_eq!(absolute, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn decode_offsets_boundary_hits_proposal_edges() {
        let g = GridSpec::new(8.0, 16, 16, 3);
        let kernel = KernelGrid::new(3).unwrap();
        let proposal = BoundingBox::from_tlwh(24.0, 8.0, 40.0, 24.0);
        let cell = (2, 1);
        let (xc, yc) = deform_center(cell);

        let lo = decode_offsets(&vec![0.0; 18], &proposal, &g, cell, &kernel).unwrap();
        let hi = decode_offsets(&vec![1.0; 18], &proposal, &g, cell, &kernel).unwrap();
        for (tap, &(qx, qy)) in kernel.offsets().iter().enumerate() {
            let ax = xc + f64::from(qx) + lo[2 * tap];
            let ay = yc + f64::from(qy) + lo[2 * tap + 1];
            assert_relative_eq!(ax, proposal.x1 / 8.0, max_relative = 1e-12);
            assert_relative_eq!(ay, proposal.y1 / 8.0, max_relative = 1e-12);
            let bx = xc + f64::from(qx) + hi[2 * tap];
            let by = yc + f64::from(qy) + hi[2 * tap + 1];
            assert_relative_eq!(bx, proposal.x2 / 8.0, max_relative = 1e-12);
            assert_relative_eq!(by, proposal.y2 / 8.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn decode_offsets_rejects_unnormalized() {
        let g = GridSpec::new(8.0, 16, 16, 3);
        let kernel = KernelGrid::new(3).unwrap();
        let proposal = BoundingBox::from_tlwh(0.0, 0.0, 8.0, 8.0);
        let mut raw = vec![0.5; 18];
        raw[4] = 1.5;
        assert_eq!(
            decode_offsets(&raw, &proposal, &g, (0, 0), &kernel),
            Err(CodecError::OffsetNotNormalized {
                index: 4,
                value: 1.5
            })
        );
    }

    proptest! {
        #[test]
        fn anchor_round_trip(
            cx in -100.0f64..700.0,
            cy in -100.0f64..700.0,
            w in 0.5f64..300.0,
            h in 0.5f64..300.0,
            stage in 3u32..6,
            i in 0usize..20,
            j in 0usize..20,
        ) {
            let g = GridSpec::for_stage(stage, 640, 640);
            let b = BoundingBox::from_center_size(cx, cy, w, h);
            let e = encode_anchor(&b, &g, (i, j)).unwrap();
            let back = decode_anchor(&e, &g).unwrap();
            prop_assert!((back.x1 - b.x1).abs() <= 1e-9 * b.x1.abs().max(1.0));
            prop_assert!((back.y1 - b.y1).abs() <= 1e-9 * b.y1.abs().max(1.0));
            prop_assert!((back.x2 - b.x2).abs() <= 1e-9 * b.x2.abs().max(1.0));
            prop_assert!((back.y2 - b.y2).abs() <= 1e-9 * b.y2.abs().max(1.0));
        }

        #[test]
        fn offset_containment(
            px in 0.0f64..600.0,
            py in 0.0f64..450.0,
            w in 0.0f64..200.0,
            h in 0.0f64..200.0,
            raw in proptest::collection::vec(0.0f64..=1.0, 18),
            i in 0usize..16,
            j in 0usize..16,
        ) {
            let g = GridSpec::new(8.0, 16, 16, 3);
            let kernel = KernelGrid::new(3).unwrap();
            let proposal = BoundingBox::from_tlwh(px, py, w, h);
            let decoded = decode_offsets(&raw, &proposal, &g, (i, j), &kernel).unwrap();
            let (xc, yc) = deform_center((i, j));
            for (tap, &(qx, qy)) in kernel.offsets().iter().enumerate() {
                let ax = xc + f64::from(qx) + decoded[2 * tap];
                let ay = yc + f64::from(qy) + decoded[2 * tap + 1];
                prop_assert!(ax >= proposal.x1 / 8.0 - 1e-9 && ax <= proposal.x2 / 8.0 + 1e-9);
                prop_assert!(ay >= proposal.y1 / 8.0 - 1e-9 && ay <= proposal.y2 / 8.0 + 1e-9);
            }
        }
    }
}

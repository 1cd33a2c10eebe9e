//! Proposal-guided feature mining: sigmoid normalization of raw offset
//! logits, bilinear sampling, and the grouped deformable-convolution
//! forward pass.
//!
//! Inference-side only. There is no backward pass; numerical Jacobians used
//! to check the kernel live in test code.

use crate::codec::{self, CodecError, GridSpec, KernelGrid};
use crate::geometry::BoundingBox;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("shape mismatch in {context}: {left} vs {right}")]
    ShapeMismatch {
        context: &'static str,
        left: String,
        right: String,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Dense rank-4 tensor, row-major `(batch, channel, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        FeatureTensor {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        data: Vec<f64>,
    ) -> Result<Self, MiningError> {
        if data.len() != n * c * h * w {
            return Err(MiningError::ShapeMismatch {
                context: "FeatureTensor::from_vec",
                left: format!("({n},{c},{h},{w}) = {} elements", n * c * h * w),
                right: format!("{} elements", data.len()),
            });
        }
        Ok(FeatureTensor { n, c, h, w, data })
    }

    /// `(batch, channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    #[inline]
    fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(n, c, y, x)]
    }

    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx(n, c, y, x);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Per-group deformable offsets, row-major `(groups, values, height, width)`
/// where `values = 2 * K^2`, interleaved `(x, y)` per tap.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    groups: usize,
    values: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl OffsetField {
    pub fn zeros(groups: usize, values: usize, h: usize, w: usize) -> Self {
        OffsetField {
            groups,
            values,
            h,
            w,
            data: vec![0.0; groups * values * h * w],
        }
    }

    pub fn from_vec(
        groups: usize,
        values: usize,
        h: usize,
        w: usize,
        data: Vec<f64>,
    ) -> Result<Self, MiningError> {
        if data.len() != groups * values * h * w {
            return Err(MiningError::ShapeMismatch {
                context: "OffsetField::from_vec",
                left: format!("({groups},{values},{h},{w}) = {} elements", groups * values * h * w),
                right: format!("{} elements", data.len()),
            });
        }
        Ok(OffsetField {
            groups,
            values,
            h,
            w,
            data,
        })
    }

    /// `(groups, values_per_cell, height, width)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.groups, self.values, self.h, self.w)
    }

    #[inline]
    fn idx(&self, g: usize, v: usize, y: usize, x: usize) -> usize {
        ((g * self.values + v) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, g: usize, v: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(g, v, y, x)]
    }

    pub fn set(&mut self, g: usize, v: usize, y: usize, x: usize, value: f64) {
        let i = self.idx(g, v, y, x);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Dense convolution weights `(out_channels, in_channels, K, K)` plus a bias
/// per output channel. Offset groups partition the input channels only; the
/// kernel itself spans all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, MiningError> {
        let expected = out_channels * in_channels * kernel_size * kernel_size;
        if weights.len() != expected {
            return Err(MiningError::ShapeMismatch {
                context: "ConvWeights::new",
                left: format!("({out_channels},{in_channels},{kernel_size},{kernel_size}) = {expected} weights"),
                right: format!("{} weights", weights.len()),
            });
        }
        if bias.len() != out_channels {
            return Err(MiningError::ShapeMismatch {
                context: "ConvWeights::new",
                left: format!("{out_channels} bias terms"),
                right: format!("{} bias terms", bias.len()),
            });
        }
        Ok(ConvWeights {
            out_channels,
            in_channels,
            kernel_size,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn weight(&self, oc: usize, ic: usize, tap: usize) -> f64 {
        let k2 = self.kernel_size * self.kernel_size;
        self.weights[(oc * self.in_channels + ic) * k2 + tap]
    }

    pub fn bias(&self, oc: usize) -> f64 {
        self.bias[oc]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps raw offset logits into `(0, 1)` elementwise.
pub fn sigmoid_map(raw: &OffsetField) -> OffsetField {
    OffsetField {
        groups: raw.groups,
        values: raw.values,
        h: raw.h,
        w: raw.w,
        data: raw.data.iter().map(|&x| sigmoid(x)).collect(),
    }
}

/// Bilinear interpolation of the four lattice neighbors of `(x, y)` in
/// channel `(n, c)`. Neighbors outside `[0, W-1] x [0, H-1]` contribute
/// zero (zero padding).
pub fn bilinear_sample(f: &FeatureTensor, n: usize, c: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let dx = x - x0;
    let dy = y - y0;
    let x0 = x0 as i64;
    let y0 = y0 as i64;

    let mut acc = 0.0;
    let mut term = |xi: i64, yi: i64, weight: f64| {
        if xi >= 0 && yi >= 0 && (xi as usize) < f.w && (yi as usize) < f.h {
            acc += weight * f.get(n, c, yi as usize, xi as usize);
        }
    };
    term(x0, y0, (1.0 - dx) * (1.0 - dy));
    term(x0 + 1, y0, dx * (1.0 - dy));
    term(x0, y0 + 1, (1.0 - dx) * dy);
    term(x0 + 1, y0 + 1, dx * dy);
    acc
}

/// Decodes a full raw offset field (already sigmoid-normalized) against the
/// dense proposal field. `proposals` holds one image-scale box per cell in
/// row-major order (`cell (i, j)` at index `j * width + i`); every offset
/// group at a cell decodes against the same proposal.
pub fn decode_offset_field(
    raw: &OffsetField,
    proposals: &[BoundingBox],
    grid: &GridSpec,
    kernel: &KernelGrid,
) -> Result<OffsetField, MiningError> {
    if raw.h != grid.height || raw.w != grid.width {
        return Err(MiningError::ShapeMismatch {
            context: "decode_offset_field",
            left: format!("offset field {}x{}", raw.w, raw.h),
            right: format!("grid {}x{}", grid.width, grid.height),
        });
    }
    if raw.values != 2 * kernel.taps() {
        return Err(MiningError::ShapeMismatch {
            context: "decode_offset_field",
            left: format!("{} offset values per cell", raw.values),
            right: format!("2*K^2 = {}", 2 * kernel.taps()),
        });
    }
    if proposals.len() != grid.width * grid.height {
        return Err(MiningError::ShapeMismatch {
            context: "decode_offset_field",
            left: format!("{} proposals", proposals.len()),
            right: format!("{} cells", grid.width * grid.height),
        });
    }
    let mut out = OffsetField::zeros(raw.groups, raw.values, raw.h, raw.w);
    let mut cell_raw = vec![0.0; raw.values];
    for j in 0..grid.height {
        for i in 0..grid.width {
            let proposal = &proposals[j * grid.width + i];
            for g in 0..raw.groups {
                for v in 0..raw.values {
                    cell_raw[v] = raw.get(g, v, j, i);
                }
                let decoded = codec::decode_offsets(&cell_raw, proposal, grid, (i, j), kernel)?;
                for (v, &value) in decoded.iter().enumerate() {
                    out.set(g, v, j, i, value);
                }
            }
        }
    }
    Ok(out)
}

/// Deformable-convolution forward pass over decoded offsets.
///
/// Output location `(n, oc, j, i)` accumulates
/// `bias + sum over (ic, tap) of weight * bilinear_sample` at
/// `(center + primary + decoded)` where the decoded offset comes from the
/// group owning channel `ic` (contiguous channel blocks). Stride 1, no
/// dilation, zero padding.
pub fn deform_conv_forward(
    f: &FeatureTensor,
    decoded: &OffsetField,
    w: &ConvWeights,
    kernel: &KernelGrid,
) -> Result<FeatureTensor, MiningError> {
    let (n, c, h, width) = f.dims();
    let (groups, values, oh, ow) = decoded.dims();
    if (oh, ow) != (h, width) {
        return Err(MiningError::ShapeMismatch {
            context: "deform_conv_forward",
            left: format!("features {width}x{h}"),
            right: format!("offsets {ow}x{oh}"),
        });
    }
    if values != 2 * kernel.taps() {
        return Err(MiningError::ShapeMismatch {
            context: "deform_conv_forward",
            left: format!("{values} offset values per cell"),
            right: format!("2*K^2 = {}", 2 * kernel.taps()),
        });
    }
    if w.kernel_size != kernel.kernel_size() {
        return Err(MiningError::ShapeMismatch {
            context: "deform_conv_forward",
            left: format!("weights K={}", w.kernel_size),
            right: format!("kernel grid K={}", kernel.kernel_size()),
        });
    }
    if w.in_channels != c {
        return Err(MiningError::ShapeMismatch {
            context: "deform_conv_forward",
            left: format!("features C={c}"),
            right: format!("weights in_channels={}", w.in_channels),
        });
    }
    if c % groups != 0 {
        return Err(MiningError::ShapeMismatch {
            context: "deform_conv_forward",
            left: format!("features C={c}"),
            right: format!("{groups} offset groups"),
        });
    }
    let channels_per_group = c / groups;
    let mut out = FeatureTensor::zeros(n, w.out_channels, h, width);

    // rows are independent; each output value is a fixed-order reduction
    out.data
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row_index, row)| {
            let j = row_index % h;
            let oc = (row_index / h) % w.out_channels;
            let batch = row_index / (h * w.out_channels);
            for (i, slot) in row.iter_mut().enumerate() {
                let (xc, yc) = codec::deform_center((i, j));
                let mut acc = w.bias(oc);
                for ic in 0..c {
                    let g = ic / channels_per_group;
                    for (tap, &(qx, qy)) in kernel.offsets().iter().enumerate() {
                        let ox = decoded.get(g, 2 * tap, j, i);
                        let oy = decoded.get(g, 2 * tap + 1, j, i);
                        let sx = xc + f64::from(qx) + ox;
                        let sy = yc + f64::from(qy) + oy;
                        acc += w.weight(oc, ic, tap) * bilinear_sample(f, batch, ic, sx, sy);
                    }
                }
                *slot = acc;
            }
        });
    Ok(out)
}

/// Decoded offsets that reproduce a classic convolution's sampling lattice:
/// every absolute location becomes `(i + q_x, j + q_y)`.
pub fn classic_grid_offsets(groups: usize, kernel: &KernelGrid, h: usize, w: usize) -> OffsetField {
    let values = 2 * kernel.taps();
    OffsetField {
        groups,
        values,
        h,
        w,
        data: vec![-0.5; groups * values * h * w],
    }
}

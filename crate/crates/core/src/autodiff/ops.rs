//! Forward and backward kernels for the sequence operations.
//!
//! Every forward function accumulates an output element as
//! `bias, then + w·x for each input channel in order, then each tap in order`.
//! The sparse generation path in `model` depends on this order to reproduce
//! full forward passes bit for bit.

use super::{AutodiffError, ConvKernel, SequenceGrid};

/// Elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Tanh,
    Relu,
    /// `ln(1 + e^z) + eps`
    SoftplusEps(f64),
    Identity,
}

/// Per-variable same-day visibility for the masked day convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DayMask([bool; 4]);

impl DayMask {
    pub const fn new(bits: [bool; 4]) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> [bool; 4] {
        self.0
    }

    pub fn as_f64(&self) -> [f64; 4] {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl TryFrom<&[f64]> for DayMask {
    type Error = AutodiffError;

    fn try_from(v: &[f64]) -> Result<Self, Self::Error> {
        if v.len() != 4 {
            return Err(AutodiffError::MaskLength(v.len()));
        }
        let mut bits = [false; 4];
        for (b, &x) in bits.iter_mut().zip(v) {
            *b = match x {
                0.0 => false,
                1.0 => true,
                other => {
                    return Err(AutodiffError::InvalidKernel(format!(
                        "mask entry {other} is not 0 or 1"
                    )))
                }
            };
        }
        Ok(Self(bits))
    }
}

/// Numerically stable `ln(1 + e^z)`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_channels(input: &SequenceGrid, kernel: &ConvKernel) -> Result<(), AutodiffError> {
    if input.channels() != kernel.in_channels() {
        return Err(AutodiffError::DimensionMismatch {
            axis: "channels",
            expected: kernel.in_channels(),
            found: input.channels(),
        });
    }
    Ok(())
}

/// Valid (unpadded) dilated convolution.
///
/// Output length is `input.length - (width - 1) * dilation`.
pub fn dilated_conv(input: &SequenceGrid, kernel: &ConvKernel, dilation: usize) -> Result<SequenceGrid, AutodiffError> {
    check_channels(input, kernel)?;
    if dilation == 0 {
        return Err(AutodiffError::InvalidKernel("dilation must be at least 1".into()));
    }
    let span = (kernel.width() - 1) * dilation;
    if input.length() < span + 1 {
        return Err(AutodiffError::InsufficientLength {
            required: span + 1,
            found: input.length(),
        });
    }
    let out_len = input.length() - span;
    let mut out = SequenceGrid::zeros(kernel.out_channels(), out_len);
    for c in 0..kernel.out_channels() {
        let row = out.row_mut(c);
        if let Some(b) = kernel.bias() {
            row.fill(b[c]);
        }
        for i in 0..kernel.in_channels() {
            let x = input.row(i);
            for k in 0..kernel.width() {
                let w = kernel.weight(c, i, k);
                let xs = &x[k * dilation..k * dilation + out_len];
                for (o, &xv) in row.iter_mut().zip(xs) {
                    *o += w * xv;
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn dilated_conv_backward(
    input: &SequenceGrid,
    kernel: &ConvKernel,
    dilation: usize,
    grad_out: &[f64],
    grad_in: &mut [f64],
    grad_params: &mut [f64],
) {
    let out_len = input.length() - (kernel.width() - 1) * dilation;
    let in_len = input.length();
    let n_weights = kernel.weights().len();
    let (grad_w, grad_b) = grad_params.split_at_mut(n_weights);
    for c in 0..kernel.out_channels() {
        let g = &grad_out[c * out_len..(c + 1) * out_len];
        if kernel.bias().is_some() {
            grad_b[c] += g.iter().sum::<f64>();
        }
        for i in 0..kernel.in_channels() {
            let x = input.row(i);
            let gi = &mut grad_in[i * in_len..(i + 1) * in_len];
            for k in 0..kernel.width() {
                let w = kernel.weight(c, i, k);
                let off = k * dilation;
                let mut acc = 0.0;
                for (t, &gv) in g.iter().enumerate() {
                    acc += gv * x[off + t];
                    gi[off + t] += w * gv;
                }
                grad_w[(c * kernel.in_channels() + i) * kernel.width() + k] += acc;
            }
        }
    }
}

fn check_masked(input: &SequenceGrid, kernel: &ConvKernel) -> Result<(), AutodiffError> {
    if input.channels() != 4 {
        return Err(AutodiffError::DimensionMismatch {
            axis: "channels",
            expected: 4,
            found: input.channels(),
        });
    }
    check_channels(input, kernel)?;
    if kernel.width() != 2 {
        return Err(AutodiffError::InvalidKernel(format!(
            "masked day convolution needs width 2, got {}",
            kernel.width()
        )));
    }
    if kernel.bias().is_some() {
        return Err(AutodiffError::InvalidKernel(
            "masked day convolution takes no bias".into(),
        ));
    }
    Ok(())
}

/// Two-column day convolution: position `t` combines the whole column `t-1`
/// with the mask-selected entries of column `t`. A zero column is prepended,
/// so the output has the input's length and position 0 is always zero.
pub fn masked_day_conv(input: &SequenceGrid, kernel: &ConvKernel, mask: &[f64]) -> Result<SequenceGrid, AutodiffError> {
    let mask = DayMask::try_from(mask)?;
    masked_day_conv_with(input, kernel, mask)
}

pub(crate) fn masked_day_conv_with(
    input: &SequenceGrid,
    kernel: &ConvKernel,
    mask: DayMask,
) -> Result<SequenceGrid, AutodiffError> {
    check_masked(input, kernel)?;
    let len = input.length();
    let mut out = SequenceGrid::zeros(kernel.out_channels(), len);
    if len < 2 {
        return Ok(out);
    }
    let bits = mask.bits();
    for c in 0..kernel.out_channels() {
        let row = &mut out.row_mut(c)[1..];
        for i in 0..4 {
            let x = input.row(i);
            let w_prev = kernel.weight(c, i, 0);
            for (o, &xv) in row.iter_mut().zip(&x[..len - 1]) {
                *o += w_prev * xv;
            }
            if bits[i] {
                let w_same = kernel.weight(c, i, 1);
                for (o, &xv) in row.iter_mut().zip(&x[1..]) {
                    *o += w_same * xv;
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn masked_day_conv_backward(
    input: &SequenceGrid,
    kernel: &ConvKernel,
    mask: DayMask,
    grad_out: &[f64],
    grad_in: &mut [f64],
    grad_w: &mut [f64],
) {
    let len = input.length();
    if len < 2 {
        return;
    }
    let bits = mask.bits();
    for c in 0..kernel.out_channels() {
        let g = &grad_out[c * len + 1..(c + 1) * len];
        for i in 0..4 {
            let x = input.row(i);
            let gi = &mut grad_in[i * len..(i + 1) * len];
            let w_prev = kernel.weight(c, i, 0);
            let mut acc = 0.0;
            for (t, &gv) in g.iter().enumerate() {
                acc += gv * x[t];
                gi[t] += w_prev * gv;
            }
            grad_w[(c * 4 + i) * 2] += acc;
            if bits[i] {
                let w_same = kernel.weight(c, i, 1);
                let mut acc = 0.0;
                for (t, &gv) in g.iter().enumerate() {
                    acc += gv * x[t + 1];
                    gi[t + 1] += w_same * gv;
                }
                grad_w[(c * 4 + i) * 2 + 1] += acc;
            }
        }
    }
}

/// 1×1 convolution: a per-position affine map across channels.
pub fn pointwise_conv(input: &SequenceGrid, kernel: &ConvKernel) -> Result<SequenceGrid, AutodiffError> {
    if kernel.width() != 1 {
        return Err(AutodiffError::InvalidKernel(format!(
            "pointwise convolution needs width 1, got {}",
            kernel.width()
        )));
    }
    dilated_conv(input, kernel, 1)
}

pub fn activation(input: &SequenceGrid, kind: Activation) -> SequenceGrid {
    let mut out = input.clone();
    apply_activation(out.values_mut(), kind);
    out
}

pub(crate) fn apply_activation(values: &mut [f64], kind: Activation) {
    match kind {
        Activation::Tanh => values.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Relu => values.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::SoftplusEps(eps) => values.iter_mut().for_each(|v| *v = softplus(*v) + eps),
        Activation::Identity => {}
    }
}

pub(crate) fn activation_backward(
    input: &[f64],
    output: &[f64],
    kind: Activation,
    grad_out: &[f64],
    grad_in: &mut [f64],
) {
    for (((gi, &g), &x), &y) in grad_in.iter_mut().zip(grad_out).zip(input).zip(output) {
        *gi += match kind {
            Activation::Tanh => g * (1.0 - y * y),
            Activation::Relu => {
                if x > 0.0 {
                    g
                } else {
                    0.0
                }
            }
            Activation::SoftplusEps(_) => g * sigmoid(x),
            Activation::Identity => g,
        };
    }
}

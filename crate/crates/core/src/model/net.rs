use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{param_count, ArchitectureSpec, ModelError};
use crate::autodiff::ops::{self, apply_activation};
use crate::autodiff::{
    Activation, AutodiffError, ConvKernel, DayMask, Gradients, KernelId, NodeId, ParameterStore, SequenceGrid, Tape,
};
use crate::data::{StandardizationStats, DEFAULT_ZERO_FLOOR};
use crate::likelihood::{DayDistribution, HeadFamily};
use crate::Variable;

/// Four masked input streams (one per variable) feeding one shared trunk of
/// dilated and 1×1 convolutions.
///
/// A stream over a standardized grid of length `L` yields `L - T + 1` raw
/// head outputs; output `j` sees columns `j..j+T-2` fully and column
/// `j+T-1` only through the variable's same-day mask.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherNet {
    spec: ArchitectureSpec,
    params: ParameterStore,
    masked: [KernelId; 4],
    dilated: Vec<KernelId>,
    pointwise: Vec<KernelId>,
    stats: StandardizationStats,
    zero_floor: f64,
}

fn identity_stats() -> StandardizationStats {
    StandardizationStats {
        mean: [0.0; 4],
        std: [1.0; 4],
        fitted_start: NaiveDate::default(),
        fitted_end: NaiveDate::default(),
    }
}

impl WeatherNet {
    /// Fresh network. Weights are uniform in `±1/sqrt(fan_in)`, biases zero.
    /// Standardization starts as the identity.
    pub fn build(spec: &ArchitectureSpec, init_seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut params = ParameterStore::new();
        let mut init = |out: usize, input: usize, width: usize, bias: bool| -> Result<ConvKernel, AutodiffError> {
            let bound = 1.0 / ((input * width) as f64).sqrt();
            let weights = (0..out * input * width)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            ConvKernel::new(out, input, width, weights, bias.then(|| vec![0.0; out]))
        };

        let mut masked = Vec::with_capacity(4);
        for var in Variable::ALL {
            let k = init(spec.channels.masked, 4, 2, false)?;
            masked.push(params.insert(format!("masked.{var}"), k)?);
        }
        let mut prev = spec.channels.masked;
        let mut dilated = Vec::new();
        for (k, &c) in spec.channels.dilated.iter().enumerate() {
            let kern = init(c, prev, spec.plan.base_filter, true)?;
            dilated.push(params.insert(format!("dilated.{}", k + 1), kern)?);
            prev = c;
        }
        let mut pointwise = Vec::new();
        for (k, &c) in spec.channels.pointwise.iter().enumerate() {
            let kern = init(c, prev, 1, true)?;
            pointwise.push(params.insert(format!("pointwise.{}", k + 1), kern)?);
            prev = c;
        }
        debug_assert_eq!(params.total_count(), param_count(spec));
        Ok(Self {
            spec: spec.clone(),
            params,
            masked: [masked[0], masked[1], masked[2], masked[3]],
            dilated,
            pointwise,
            stats: identity_stats(),
            zero_floor: DEFAULT_ZERO_FLOOR,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.total_count()
    }

    pub fn stats(&self) -> &StandardizationStats {
        &self.stats
    }

    pub fn zero_floor(&self) -> f64 {
        self.zero_floor
    }

    pub fn set_standardization(&mut self, stats: StandardizationStats, zero_floor: f64) {
        self.stats = stats;
        self.zero_floor = zero_floor;
    }

    pub fn window_len(&self) -> usize {
        self.spec.window_len()
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    /// Model-space days to a standardized 4×len grid.
    pub fn standardize(&self, days: &[[f64; 4]]) -> SequenceGrid {
        let len = days.len();
        let mut grid = SequenceGrid::zeros(4, len);
        for (t, d) in days.iter().enumerate() {
            for v in 0..4 {
                grid.set(v, t, self.stats.apply_value(v, d[v]));
            }
        }
        grid
    }

    fn check_window(&self, window: &[[f64; 4]]) -> Result<(), ModelError> {
        if window.len() != self.window_len() {
            return Err(ModelError::WindowLength {
                expected: self.window_len(),
                found: window.len(),
            });
        }
        Ok(())
    }

    fn mask(var: Variable) -> DayMask {
        DayMask::new(var.same_day_mask())
    }

    /// Raw two-row head output of one stream over an already standardized
    /// grid (no padding added).
    pub fn stream_raw(&self, var: Variable, grid: &SequenceGrid) -> Result<SequenceGrid, ModelError> {
        let p = &self.params;
        let mut h = ops::masked_day_conv_with(grid, p.kernel(self.masked[var.index()]), Self::mask(var))?;
        h = h.trim_left(1)?;
        for (k, &id) in self.dilated.iter().enumerate() {
            h = ops::dilated_conv(&h, p.kernel(id), self.spec.plan.dilation(k))?;
            apply_activation(h.values_mut(), Activation::Tanh);
        }
        let last = self.pointwise.len() - 1;
        for (k, &id) in self.pointwise.iter().enumerate() {
            h = ops::pointwise_conv(&h, p.kernel(id))?;
            if k < last {
                apply_activation(h.values_mut(), Activation::Relu);
            }
        }
        Ok(h)
    }

    /// Predictive distributions for the `horizon` target days of a
    /// `T`-day window. The first `t0` days condition; target-day inputs
    /// are used only where causality allows.
    pub fn forward(&self, window: &[[f64; 4]]) -> Result<Vec<DayDistribution>, ModelError> {
        self.check_window(window)?;
        let grid = self.standardize(window).pad_left(self.spec.plan.padding());
        let horizon = self.horizon();
        let mut raw = vec![[0.0; 8]; horizon];
        for var in Variable::ALL {
            let out = self.stream_raw(var, &grid)?;
            debug_assert_eq!(out.length(), horizon);
            for (j, r) in raw.iter_mut().enumerate() {
                r[2 * var.index()] = out.get(0, j);
                r[2 * var.index() + 1] = out.get(1, j);
            }
        }
        Ok(raw.iter().map(|r| self.activate(r)).collect())
    }

    fn activate(&self, raw: &[f64; 8]) -> DayDistribution {
        crate::likelihood::head_activation(raw, self.spec.epsilon)
    }

    /// Records the four streams for one window on `tape`; each returned node
    /// is a 2×horizon raw grid.
    pub fn record_streams(&self, tape: &mut Tape<'_>, window: &[[f64; 4]]) -> Result<[NodeId; 4], ModelError> {
        self.check_window(window)?;
        let grid = self.standardize(window);
        let x = tape.input(grid);
        let x = tape.pad_left(x, self.spec.plan.padding())?;
        let mut out = [x; 4];
        for var in Variable::ALL {
            let mut h = tape.masked_day_conv(x, self.masked[var.index()], Self::mask(var))?;
            h = tape.trim_left(h, 1)?;
            for (k, &id) in self.dilated.iter().enumerate() {
                h = tape.dilated_conv(h, id, self.spec.plan.dilation(k))?;
                h = tape.activation(h, Activation::Tanh)?;
            }
            let last = self.pointwise.len() - 1;
            for (k, &id) in self.pointwise.iter().enumerate() {
                h = tape.pointwise_conv(h, id)?;
                if k < last {
                    h = tape.activation(h, Activation::Relu)?;
                }
            }
            out[var.index()] = h;
        }
        Ok(out)
    }

    /// Summed negative log-likelihood of the window's target days (model
    /// space, not standardized) as a scalar node.
    pub fn record_loss(
        &self,
        tape: &mut Tape<'_>,
        window: &[[f64; 4]],
        targets: &[[f64; 4]],
    ) -> Result<NodeId, ModelError> {
        if targets.len() != self.horizon() {
            return Err(ModelError::TargetLength {
                expected: self.horizon(),
                found: targets.len(),
            });
        }
        let streams = self.record_streams(tape, window)?;
        let mut terms = Vec::with_capacity(4);
        for var in Variable::ALL {
            let xs: Vec<f64> = targets.iter().map(|d| d[var.index()]).collect();
            terms.push(tape.head_nll(
                streams[var.index()],
                HeadFamily::for_variable(var),
                self.spec.epsilon,
                &xs,
            )?);
        }
        Ok(tape.add(&terms)?)
    }

    /// Loss and parameter gradient for one window.
    pub fn loss_and_gradient(&self, window: &[[f64; 4]], targets: &[[f64; 4]]) -> Result<(f64, Gradients), ModelError> {
        let mut tape = Tape::new(&self.params);
        let loss = self.record_loss(&mut tape, window, targets)?;
        let value = tape.value(loss).get(0, 0);
        let grads = tape.backward(loss)?;
        Ok((value, grads))
    }

    /// Loss only, without recording a tape.
    pub fn window_loss(&self, window: &[[f64; 4]], targets: &[[f64; 4]]) -> Result<f64, ModelError> {
        if targets.len() != self.horizon() {
            return Err(ModelError::TargetLength {
                expected: self.horizon(),
                found: targets.len(),
            });
        }
        let dists = self.forward(window)?;
        let mut total = 0.0;
        for (d, x) in dists.iter().zip(targets) {
            total += crate::likelihood::day_nll(x, d)?;
        }
        Ok(total)
    }

    /// Raw head output for the last column of a standardized `4×T` grid,
    /// computing only the positions that feed it.
    ///
    /// Bitwise equal to the last output of [`stream_raw`](Self::stream_raw)
    /// on the same grid: each element accumulates in the same order.
    pub fn last_raw(&self, var: Variable, grid: &SequenceGrid) -> Result<(f64, f64), ModelError> {
        let t = self.window_len();
        if grid.length() != t || grid.channels() != 4 {
            return Err(ModelError::WindowLength {
                expected: t,
                found: grid.length(),
            });
        }
        let p = &self.params;
        let l = self.spec.plan.base_filter;

        // Masked layer, positions 1..T of the grid (the trimmed output).
        let mk = p.kernel(self.masked[var.index()]);
        let bits = var.same_day_mask();
        let n0 = t - 1;
        let c0 = mk.out_channels();
        let mut h = vec![0.0; c0 * n0];
        for c in 0..c0 {
            let row = &mut h[c * n0..(c + 1) * n0];
            for i in 0..4 {
                let x = grid.row(i);
                let w_prev = mk.weight(c, i, 0);
                for (o, &xv) in row.iter_mut().zip(&x[..n0]) {
                    *o += w_prev * xv;
                }
                if bits[i] {
                    let w_same = mk.weight(c, i, 1);
                    for (o, &xv) in row.iter_mut().zip(&x[1..]) {
                        *o += w_same * xv;
                    }
                }
            }
        }

        // Dilated layers in compact coordinates: layer k keeps only the
        // positions that are multiples of l^k, which makes each one a
        // stride-l convolution over the previous compact layer.
        let mut n = n0;
        let mut cin = c0;
        for &id in &self.dilated {
            let kern = p.kernel(id);
            let nout = n / l;
            let cout = kern.out_channels();
            let mut next = vec![0.0; cout * nout];
            let bias = kern.bias();
            for c in 0..cout {
                let row = &mut next[c * nout..(c + 1) * nout];
                if let Some(b) = bias {
                    row.fill(b[c]);
                }
                for i in 0..cin {
                    let x = &h[i * n..(i + 1) * n];
                    for k in 0..l {
                        let w = kern.weight(c, i, k);
                        for (q, o) in row.iter_mut().enumerate() {
                            *o += w * x[q * l + k];
                        }
                    }
                }
            }
            apply_activation(&mut next, Activation::Tanh);
            h = next;
            n = nout;
            cin = cout;
        }
        debug_assert_eq!(n, 1);

        let last = self.pointwise.len() - 1;
        for (k, &id) in self.pointwise.iter().enumerate() {
            let kern = p.kernel(id);
            let mut next = vec![0.0; kern.out_channels()];
            for (c, o) in next.iter_mut().enumerate() {
                if let Some(b) = kern.bias() {
                    *o = b[c];
                }
                for (i, &xv) in h.iter().enumerate() {
                    *o += kern.weight(c, i, 0) * xv;
                }
            }
            if k < last {
                apply_activation(&mut next, Activation::Relu);
            }
            h = next;
        }
        Ok((h[0], h[1]))
    }

    /// Head parameters for the last column of a standardized `4×T` grid.
    pub fn last_params(&self, var: Variable, grid: &SequenceGrid) -> Result<(f64, f64), ModelError> {
        let (r0, r1) = self.last_raw(var, grid)?;
        Ok(HeadFamily::for_variable(var).activate(r0, r1, self.spec.epsilon))
    }

    pub(crate) fn from_parts(
        spec: ArchitectureSpec,
        flat: &[f64],
        stats: StandardizationStats,
        zero_floor: f64,
    ) -> Result<Self, ModelError> {
        let mut net = Self::build(&spec, 0)?;
        net.params.assign_flat(flat)?;
        net.stats = stats;
        net.zero_floor = zero_floor;
        Ok(net)
    }
}

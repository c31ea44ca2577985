use super::ops::{self, Activation, DayMask};
use super::{AutodiffError, Gradients, KernelId, ParameterStore, SequenceGrid};
use crate::likelihood::HeadFamily;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    PadLeft {
        src: usize,
        count: usize,
    },
    TrimLeft {
        src: usize,
        count: usize,
    },
    DilatedConv {
        src: usize,
        kernel: KernelId,
        dilation: usize,
    },
    MaskedDayConv {
        src: usize,
        kernel: KernelId,
        mask: DayMask,
    },
    Activation {
        src: usize,
        kind: Activation,
    },
    HeadNll {
        src: usize,
        family: HeadFamily,
        eps: f64,
        targets: Vec<f64>,
    },
    SumAll {
        src: usize,
    },
    Add {
        srcs: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: SequenceGrid,
    op: Op,
}

/// Records a forward computation over a parameter snapshot so that
/// [`Tape::backward`] can accumulate parameter gradients in reverse order.
///
/// A tape supports a single backward pass; record a new tape per forward.
#[derive(Debug)]
pub struct Tape<'p> {
    params: &'p ParameterStore,
    nodes: Vec<Node>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParameterStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParameterStore {
        self.params
    }

    fn push(&mut self, value: SequenceGrid, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<usize, AutodiffError> {
        if id.0 < self.nodes.len() {
            Ok(id.0)
        } else {
            Err(AutodiffError::UnknownNode(id.0))
        }
    }

    pub fn value(&self, id: NodeId) -> &SequenceGrid {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, grid: SequenceGrid) -> NodeId {
        self.push(grid, Op::Input)
    }

    pub fn pad_left(&mut self, x: NodeId, count: usize) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = self.nodes[src].value.pad_left(count);
        Ok(self.push(value, Op::PadLeft { src, count }))
    }

    pub fn trim_left(&mut self, x: NodeId, count: usize) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = self.nodes[src].value.trim_left(count)?;
        Ok(self.push(value, Op::TrimLeft { src, count }))
    }

    pub fn dilated_conv(&mut self, x: NodeId, kernel: KernelId, dilation: usize) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = ops::dilated_conv(&self.nodes[src].value, self.params.kernel(kernel), dilation)?;
        Ok(self.push(value, Op::DilatedConv { src, kernel, dilation }))
    }

    pub fn pointwise_conv(&mut self, x: NodeId, kernel: KernelId) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = ops::pointwise_conv(&self.nodes[src].value, self.params.kernel(kernel))?;
        Ok(self.push(
            value,
            Op::DilatedConv {
                src,
                kernel,
                dilation: 1,
            },
        ))
    }

    pub fn masked_day_conv(&mut self, x: NodeId, kernel: KernelId, mask: DayMask) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = ops::masked_day_conv_with(&self.nodes[src].value, self.params.kernel(kernel), mask)?;
        Ok(self.push(value, Op::MaskedDayConv { src, kernel, mask }))
    }

    pub fn activation(&mut self, x: NodeId, kind: Activation) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let value = ops::activation(&self.nodes[src].value, kind);
        Ok(self.push(value, Op::Activation { src, kind }))
    }

    /// Applies the distribution head to a 2-row raw grid and sums the
    /// negative log-likelihood of `targets` (one per position). Produces a
    /// 1×1 grid.
    pub fn head_nll(
        &mut self,
        raw: NodeId,
        family: HeadFamily,
        eps: f64,
        targets: &[f64],
    ) -> Result<NodeId, AutodiffError> {
        let src = self.check(raw)?;
        let grid = &self.nodes[src].value;
        if grid.channels() != 2 {
            return Err(AutodiffError::DimensionMismatch {
                axis: "channels",
                expected: 2,
                found: grid.channels(),
            });
        }
        if targets.len() != grid.length() {
            return Err(AutodiffError::DimensionMismatch {
                axis: "length",
                expected: grid.length(),
                found: targets.len(),
            });
        }
        let mut total = 0.0;
        for (t, &x) in targets.iter().enumerate() {
            total += family.nll_from_raw(x, grid.get(0, t), grid.get(1, t), eps)?;
        }
        let value = SequenceGrid::from_raw(1, 1, vec![total]);
        Ok(self.push(
            value,
            Op::HeadNll {
                src,
                family,
                eps,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Sum of every element, as a 1×1 grid.
    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let src = self.check(x)?;
        let total = self.nodes[src].value.values().iter().sum();
        Ok(self.push(SequenceGrid::from_raw(1, 1, vec![total]), Op::SumAll { src }))
    }

    /// Elementwise sum of same-shaped grids, accumulated in argument order.
    pub fn add(&mut self, xs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let srcs = xs.iter().map(|&x| self.check(x)).collect::<Result<Vec<_>, _>>()?;
        let first = srcs.first().ok_or(AutodiffError::EmptySum)?;
        let mut value = self.nodes[*first].value.clone();
        for &s in &srcs[1..] {
            let other = &self.nodes[s].value;
            if other.channels() != value.channels() || other.length() != value.length() {
                return Err(AutodiffError::DimensionMismatch {
                    axis: "shape",
                    expected: value.values().len(),
                    found: other.values().len(),
                });
            }
            for (a, b) in value.values_mut().iter_mut().zip(other.values()) {
                *a += b;
            }
        }
        Ok(self.push(value, Op::Add { srcs }))
    }

    /// Reverse-mode accumulation of `d loss / d params` from a scalar node.
    ///
    /// Gradients of every recorded grid are stored on the grid afterwards.
    /// Calling `backward` twice on one tape is an error.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        if self.nodes.is_empty() {
            return Err(AutodiffError::BackwardBeforeForward);
        }
        if self.consumed {
            return Err(AutodiffError::BackwardAlreadyRun);
        }
        let root = self.check(loss)?;
        let loss_grid = &self.nodes[root].value;
        if loss_grid.values().len() != 1 {
            return Err(AutodiffError::NotScalar(loss_grid.values().len()));
        }
        let loss_value = loss_grid.values()[0];
        if !loss_value.is_finite() {
            return Err(AutodiffError::NonFiniteLoss(loss_value));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(vec![1.0]);
        let mut param_grads = Gradients::zeros(self.params.total_count());

        for idx in (0..=root).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::PadLeft { src, count } => {
                    let src_grid = &self.nodes[*src].value;
                    let gi = slot(&mut grads, *src, src_grid);
                    let out_len = node.value.length();
                    for c in 0..src_grid.channels() {
                        let go = &g[c * out_len + count..(c + 1) * out_len];
                        let dst = &mut gi[c * src_grid.length()..(c + 1) * src_grid.length()];
                        for (d, s) in dst.iter_mut().zip(go) {
                            *d += s;
                        }
                    }
                }
                Op::TrimLeft { src, count } => {
                    let src_grid = &self.nodes[*src].value;
                    let gi = slot(&mut grads, *src, src_grid);
                    let out_len = node.value.length();
                    let in_len = src_grid.length();
                    for c in 0..src_grid.channels() {
                        let go = &g[c * out_len..(c + 1) * out_len];
                        let dst = &mut gi[c * in_len + count..(c + 1) * in_len];
                        for (d, s) in dst.iter_mut().zip(go) {
                            *d += s;
                        }
                    }
                }
                Op::DilatedConv { src, kernel, dilation } => {
                    let src_grid = &self.nodes[*src].value;
                    let k = self.params.kernel(*kernel);
                    let off = self.params.offset(*kernel);
                    let gp = &mut param_grads.as_mut_slice()[off..off + k.element_count()];
                    let gi = slot(&mut grads, *src, src_grid);
                    ops::dilated_conv_backward(src_grid, k, *dilation, &g, gi, gp);
                }
                Op::MaskedDayConv { src, kernel, mask } => {
                    let src_grid = &self.nodes[*src].value;
                    let k = self.params.kernel(*kernel);
                    let off = self.params.offset(*kernel);
                    let gp = &mut param_grads.as_mut_slice()[off..off + k.element_count()];
                    let gi = slot(&mut grads, *src, src_grid);
                    ops::masked_day_conv_backward(src_grid, k, *mask, &g, gi, gp);
                }
                Op::Activation { src, kind } => {
                    let src_grid = &self.nodes[*src].value;
                    let gi = slot(&mut grads, *src, src_grid);
                    ops::activation_backward(src_grid.values(), node.value.values(), *kind, &g, gi);
                }
                Op::HeadNll {
                    src,
                    family,
                    eps,
                    targets,
                } => {
                    let src_grid = &self.nodes[*src].value;
                    let len = src_grid.length();
                    let upstream = g[0];
                    let mut local = vec![0.0; 2 * len];
                    for (t, &x) in targets.iter().enumerate() {
                        let (d0, d1) = family.nll_grad_raw(x, src_grid.get(0, t), src_grid.get(1, t), *eps);
                        local[t] = upstream * d0;
                        local[len + t] = upstream * d1;
                    }
                    let gi = slot(&mut grads, *src, src_grid);
                    for (d, s) in gi.iter_mut().zip(&local) {
                        *d += s;
                    }
                }
                Op::SumAll { src } => {
                    let src_grid = &self.nodes[*src].value;
                    let gi = slot(&mut grads, *src, src_grid);
                    gi.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Add { srcs } => {
                    for &s in srcs {
                        let src_grid = &self.nodes[s].value;
                        let gi = slot(&mut grads, s, src_grid);
                        for (d, v) in gi.iter_mut().zip(&g) {
                            *d += v;
                        }
                    }
                }
            }
            self.nodes[idx].value.set_gradient(g);
        }
        Ok(param_grads)
    }
}

fn slot<'a>(grads: &'a mut [Option<Vec<f64>>], idx: usize, grid: &SequenceGrid) -> &'a mut Vec<f64> {
    grads[idx].get_or_insert_with(|| vec![0.0; grid.values().len()])
}

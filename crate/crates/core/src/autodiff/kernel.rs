use super::AutodiffError;

/// A 1-D convolution kernel. Weights are laid out `[out][in][width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    out_channels: usize,
    in_channels: usize,
    width: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        width: usize,
        weights: Vec<f64>,
        bias: Option<Vec<f64>>,
    ) -> Result<Self, AutodiffError> {
        if width == 0 {
            return Err(AutodiffError::InvalidKernel("width must be at least 1".into()));
        }
        let expected = out_channels * in_channels * width;
        if weights.len() != expected {
            return Err(AutodiffError::DimensionMismatch {
                axis: "weights",
                expected,
                found: weights.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != out_channels {
                return Err(AutodiffError::DimensionMismatch {
                    axis: "bias",
                    expected: out_channels,
                    found: b.len(),
                });
            }
        }
        if weights.iter().chain(bias.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(AutodiffError::InvalidKernel("non-finite parameter".into()));
        }
        Ok(Self {
            out_channels,
            in_channels,
            width,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, width: usize, with_bias: bool) -> Self {
        Self {
            out_channels,
            in_channels,
            width: width.max(1),
            weights: vec![0.0; out_channels * in_channels * width.max(1)],
            bias: with_bias.then(|| vec![0.0; out_channels]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    #[inline]
    pub fn weight(&self, out: usize, input: usize, tap: usize) -> f64 {
        self.weights[(out * self.in_channels + input) * self.width + tap]
    }

    /// Weights followed by bias.
    pub fn element_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut().flatten())
    }

    pub(crate) fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter().flatten())
    }
}

/// Index of a kernel inside a [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelId(pub(crate) usize);

impl KernelId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    name: String,
    kernel: ConvKernel,
    offset: usize,
}

/// Ordered, named collection of kernels.
///
/// Flattening order is fixed: kernels in insertion order; within a kernel,
/// weights by output channel, then input channel, then tap; then the bias.
/// Optimizer state, gradients and checkpoints all use this order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    total_count: usize,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, kernel: ConvKernel) -> Result<KernelId, AutodiffError> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(AutodiffError::DuplicateName(name));
        }
        let offset = self.total_count;
        self.total_count += kernel.element_count();
        self.entries.push(Entry { name, kernel, offset });
        Ok(KernelId(self.entries.len() - 1))
    }

    pub fn total_count(&self) -> usize {
        self.total_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kernel(&self, id: KernelId) -> &ConvKernel {
        &self.entries[id.0].kernel
    }

    pub fn name(&self, id: KernelId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<KernelId> {
        self.entries.iter().position(|e| e.name == name).map(KernelId)
    }

    pub(crate) fn offset(&self, id: KernelId) -> usize {
        self.entries[id.0].offset
    }

    pub fn ids(&self) -> impl Iterator<Item = KernelId> {
        (0..self.entries.len()).map(KernelId)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_count);
        for e in &self.entries {
            out.extend(e.kernel.values());
        }
        out
    }

    /// Overwrites every parameter from a flat vector in flattening order.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<(), AutodiffError> {
        if flat.len() != self.total_count {
            return Err(AutodiffError::Misaligned {
                expected: self.total_count,
                found: flat.len(),
            });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::InvalidKernel("non-finite parameter".into()));
        }
        for (dst, src) in self.values_mut().zip(flat) {
            *dst = *src;
        }
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.entries.iter_mut().flat_map(|e| e.kernel.values_mut())
    }
}

/// Flat gradient buffer aligned with a [`ParameterStore`]'s flattening order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Gradient slice for one kernel (weights then bias).
    pub fn kernel<'a>(&'a self, store: &ParameterStore, id: KernelId) -> &'a [f64] {
        let start = store.offset(id);
        &self.values[start..start + store.kernel(id).element_count()]
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<(), AutodiffError> {
        if other.len() != self.len() {
            return Err(AutodiffError::Misaligned {
                expected: self.len(),
                found: other.len(),
            });
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }
}

use super::AutodiffError;

/// A channelled 1-D sequence: `channels` rows of `length` values, stored
/// row-major (channel-major).
///
/// `gradient` is populated by [`Tape::backward`](super::Tape::backward) on the
/// grids recorded in a tape; grids built directly carry no gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceGrid {
    channels: usize,
    length: usize,
    values: Vec<f64>,
    gradient: Option<Vec<f64>>,
}

impl SequenceGrid {
    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            values: vec![0.0; channels * length],
            gradient: None,
        }
    }

    /// Builds a grid from channel-major values, rejecting non-finite entries.
    pub fn new(channels: usize, length: usize, values: Vec<f64>) -> Result<Self, AutodiffError> {
        if values.len() != channels * length {
            return Err(AutodiffError::DimensionMismatch {
                axis: "values",
                expected: channels * length,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFiniteValue {
                channel: pos / length.max(1),
                position: pos % length.max(1),
            });
        }
        Ok(Self::from_raw(channels, length, values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AutodiffError> {
        let length = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * length);
        for row in rows {
            if row.len() != length {
                return Err(AutodiffError::DimensionMismatch {
                    axis: "length",
                    expected: length,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), length, values)
    }

    pub(crate) fn from_raw(channels: usize, length: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), channels * length);
        Self {
            channels,
            length,
            values,
            gradient: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.values[channel * self.length..(channel + 1) * self.length]
    }

    pub(crate) fn row_mut(&mut self, channel: usize) -> &mut [f64] {
        &mut self.values[channel * self.length..(channel + 1) * self.length]
    }

    pub fn get(&self, channel: usize, position: usize) -> f64 {
        self.values[channel * self.length + position]
    }

    pub fn set(&mut self, channel: usize, position: usize, value: f64) {
        self.values[channel * self.length + position] = value;
    }

    pub fn column(&self, position: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, position)).collect()
    }

    /// Gradient of the recorded loss with respect to this grid, if computed.
    pub fn gradient(&self) -> Option<&[f64]> {
        self.gradient.as_deref()
    }

    pub(crate) fn set_gradient(&mut self, gradient: Vec<f64>) {
        debug_assert_eq!(gradient.len(), self.values.len());
        self.gradient = Some(gradient);
    }

    /// Prepends `count` all-zero columns.
    pub fn pad_left(&self, count: usize) -> Self {
        let length = self.length + count;
        let mut out = Self::zeros(self.channels, length);
        for c in 0..self.channels {
            out.row_mut(c)[count..].copy_from_slice(self.row(c));
        }
        out
    }

    /// Drops the first `count` columns.
    pub fn trim_left(&self, count: usize) -> Result<Self, AutodiffError> {
        if count > self.length {
            return Err(AutodiffError::InsufficientLength {
                required: count,
                found: self.length,
            });
        }
        let length = self.length - count;
        let mut values = Vec::with_capacity(self.channels * length);
        for c in 0..self.channels {
            values.extend_from_slice(&self.row(c)[count..]);
        }
        Ok(Self::from_raw(self.channels, length, values))
    }
}

use super::AutodiffError;

/// Dense row-major array of finite reals.
///
/// Ranks 1 and 2 are what the graph operates on; a rank-1 tensor of width
/// `n` is viewed as a single `1 x n` row wherever a matrix is expected.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, AutodiffError> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(AutodiffError::InvalidShape(shape));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(AutodiffError::DataLength {
                shape,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: "tensor" });
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor without validation. Callers guarantee the invariants.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "tensor dimensions must be positive: {shape:?}"
        );
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// A `1 x n` row.
    pub fn row(values: Vec<f64>) -> Result<Self, AutodiffError> {
        Self::new(vec![1, values.len()], values)
    }

    pub fn vector(values: Vec<f64>) -> Result<Self, AutodiffError> {
        Self::new(vec![values.len()], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the values. Finiteness is the caller's contract.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Rows of the matrix view.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            _ => self.shape[0],
        }
    }

    /// Columns of the matrix view.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0; 3]),
            Err(AutodiffError::DataLength { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2, 0], vec![]),
            Err(AutodiffError::InvalidShape(_))
        ));
        assert!(matches!(
            Tensor::new(vec![1], vec![f64::NAN]),
            Err(AutodiffError::NonFinite { .. })
        ));
    }

    #[test]
    fn matrix_view() {
        let v = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!((v.rows(), v.cols()), (1, 3));
        let m = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
    }
}

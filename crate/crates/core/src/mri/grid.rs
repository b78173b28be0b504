use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A complex H×W grid stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexGrid {
    pub fn new(height: usize, width: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != height * width || im.len() != height * width {
            return Err(Error::shape(format!("{height}×{width} grid needs {} values per plane", height * width)));
        }
        Ok(ComplexGrid { height, width, re, im })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        ComplexGrid { height, width, re: vec![0.0; height * width], im: vec![0.0; height * width] }
    }

    /// A purely real grid.
    pub fn from_real(height: usize, width: usize, re: Vec<f64>) -> Result<Self> {
        Self::new(height, width, re, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    pub(crate) fn check_same_dims(&self, height: usize, width: usize) -> Result<()> {
        if (self.height, self.width) != (height, width) {
            return Err(Error::shape(format!("grid is {}×{}, expected {height}×{width}", self.height, self.width)));
        }
        Ok(())
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(a, b)| a.hypot(*b)).collect()
    }

    /// Real inner product Re⟨self, other⟩ = Σ (a_re·b_re + a_im·b_im).
    pub fn dot(&self, other: &ComplexGrid) -> f64 {
        self.re.iter().zip(&other.re).map(|(a, b)| a * b).sum::<f64>()
            + self.im.iter().zip(&other.im).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Imaginary part of ⟨self, other⟩ = Σ conj(a)·b.
    pub fn dot_imag(&self, other: &ComplexGrid) -> f64 {
        self.re.iter().zip(&other.im).map(|(a, b)| a * b).sum::<f64>()
            - self.im.iter().zip(&other.re).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, x: &ComplexGrid) {
        self.re.iter_mut().zip(&x.re).for_each(|(y, v)| *y += a * v);
        self.im.iter_mut().zip(&x.im).for_each(|(y, v)| *y += a * v);
    }

    pub fn scaled(&self, a: f64) -> ComplexGrid {
        ComplexGrid {
            height: self.height,
            width: self.width,
            re: self.re.iter().map(|v| a * v).collect(),
            im: self.im.iter().map(|v| a * v).collect(),
        }
    }

    /// 2×H×W tensor view: channel 0 real, channel 1 imaginary.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(2 * self.len());
        data.extend_from_slice(&self.re);
        data.extend_from_slice(&self.im);
        Tensor::new(&[2, self.height, self.width], data).expect("extents are consistent")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.chw()?;
        if c != 2 {
            return Err(Error::shape(format!("complex view needs 2 channels, got {c}")));
        }
        let (re, im) = t.data().split_at(h * w);
        Self::new(h, w, re.to_vec(), im.to_vec())
    }
}

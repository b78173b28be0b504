use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// Binary 1-D Cartesian undersampling pattern over an H×W k-space grid.
///
/// Columns are indexed in FFT-native order (zero frequency at column 0), so
/// the "center" of k-space is the band of columns around frequency 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    columns: Vec<bool>,
    pub acceleration: f64,
    pub center_fraction: f64,
    pub seed: u64,
}

/// Column index of signed frequency `f` on a width-`w` axis.
fn freq_to_col(f: isize, w: usize) -> usize {
    f.rem_euclid(w as isize) as usize
}

fn center_columns(width: usize, count: usize) -> Vec<usize> {
    let lo = -((count / 2) as isize);
    (0..count as isize).map(|i| freq_to_col(lo + i, width)).collect()
}

impl SamplingMask {
    pub fn from_columns(height: usize, width: usize, columns: Vec<bool>) -> Result<Self> {
        if columns.len() != width || height == 0 {
            return Err(Error::shape(format!("mask needs {width} column flags")));
        }
        let kept = columns.iter().filter(|&&c| c).count().max(1);
        Ok(SamplingMask {
            height,
            width,
            columns,
            acceleration: width as f64 / kept as f64,
            center_fraction: 0.0,
            seed: 0,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::from_columns(height, width, vec![true; width]).expect("width matches")
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self::from_columns(height, width, vec![false; width]).expect("width matches")
    }

    /// Keeps ⌈center_fraction·W⌉ low-frequency columns plus uniformly drawn
    /// columns up to round(W/R) in total. Deterministic per seed.
    pub fn generate(height: usize, width: usize, acceleration: f64, center_fraction: f64, seed: u64) -> Result<Self> {
        if !(center_fraction > 0.0 && center_fraction < 1.0) {
            return Err(Error::invalid(format!("center fraction must be in (0,1), got {center_fraction}")));
        }
        if !(acceleration >= 1.0) {
            return Err(Error::invalid(format!("acceleration must be ≥ 1, got {acceleration}")));
        }
        let n_center = (center_fraction * width as f64).ceil() as usize;
        let target = ((width as f64 / acceleration).round() as usize).min(width);
        if n_center > target {
            return Err(Error::invalid(format!(
                "{n_center} center columns exceed the {target} columns allowed at R={acceleration}"
            )));
        }
        let mut columns = vec![false; width];
        for c in center_columns(width, n_center) {
            columns[c] = true;
        }
        let outer: Vec<usize> = (0..width).filter(|&c| !columns[c]).collect();
        let mut rng = seed::rng(seed, &[seed::tag::MASK]);
        for i in index::sample(&mut rng, outer.len(), target - n_center) {
            columns[outer[i]] = true;
        }
        Ok(SamplingMask { height, width, columns, acceleration, center_fraction, seed })
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

    pub fn column(&self, c: usize) -> bool {
        self.columns[c]
    }

    pub fn columns(&self) -> &[bool] {
        &self.columns
    }

    pub fn kept_columns(&self) -> usize {
        self.columns.iter().filter(|&&c| c).count()
    }

    /// 0/1 indicator at flat index `i` of the H×W grid.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        if self.columns[i % self.width] {
            1.0
        } else {
            0.0
        }
    }

    /// Row-major 0/1 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.height * self.width).map(|i| self.at(i) as u8).collect()
    }

    /// Parses row-major 0/1 bytes; every column must be uniformly kept or dropped.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width {
            return Err(Error::Format("mask byte count does not match extents".into()));
        }
        let mut columns = vec![false; width];
        for (c, col) in columns.iter_mut().enumerate() {
            let v = bytes[c];
            if v > 1 || (0..height).any(|r| bytes[r * width + c] != v) {
                return Err(Error::Format(format!("mask column {c} is not a binary full column")));
            }
            *col = v == 1;
        }
        Self::from_columns(height, width, columns)
    }

    pub fn is_center_column(&self, c: usize) -> bool {
        let n_center = (self.center_fraction * self.width as f64).ceil() as usize;
        center_columns(self.width, n_center).contains(&c)
    }
}

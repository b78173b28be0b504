use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// The candidate operation set. Declaration order is the canonical order
/// used for tie-breaking and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    StdConv3,
    StdConv5,
    StdConv7,
    Dil2Conv3,
    Dil3Conv3,
    SepConv3,
    SepConv5,
    SepConv7,
}

impl OpKind {
    pub const ALL: [OpKind; 8] = [
        OpKind::StdConv3,
        OpKind::StdConv5,
        OpKind::StdConv7,
        OpKind::Dil2Conv3,
        OpKind::Dil3Conv3,
        OpKind::SepConv3,
        OpKind::SepConv5,
        OpKind::SepConv7,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::StdConv3 => "std_conv_3",
            OpKind::StdConv5 => "std_conv_5",
            OpKind::StdConv7 => "std_conv_7",
            OpKind::Dil2Conv3 => "dil2_conv_3",
            OpKind::Dil3Conv3 => "dil3_conv_3",
            OpKind::SepConv3 => "sep_conv_3",
            OpKind::SepConv5 => "sep_conv_5",
            OpKind::SepConv7 => "sep_conv_7",
        }
    }

    pub fn kernel(self) -> usize {
        match self {
            OpKind::StdConv5 | OpKind::SepConv5 => 5,
            OpKind::StdConv7 | OpKind::SepConv7 => 7,
            _ => 3,
        }
    }

    pub fn dilation(self) -> usize {
        match self {
            OpKind::Dil2Conv3 => 2,
            OpKind::Dil3Conv3 => 3,
            _ => 1,
        }
    }

    pub fn is_separable(self) -> bool {
        matches!(self, OpKind::SepConv3 | OpKind::SepConv5 | OpKind::SepConv7)
    }

    /// Parameter tensors (name suffix, shape) this op allocates at `channels`.
    pub fn param_shapes(self, channels: usize) -> Vec<(&'static str, Vec<usize>)> {
        let (c, k) = (channels, self.kernel());
        if self.is_separable() {
            vec![
                ("dw.weight", vec![c, 1, k, k]),
                ("dw.bias", vec![c]),
                ("pw.weight", vec![c, c, 1, 1]),
                ("pw.bias", vec![c]),
            ]
        } else {
            vec![("conv.weight", vec![c, c, k, k]), ("conv.bias", vec![c])]
        }
    }

    /// Uniform fan-in initialisation; biases start at zero.
    pub(crate) fn init_value(shape: &[usize], rng: &mut impl Rng) -> Vec<f64> {
        let n: usize = shape.iter().product();
        if shape.len() == 1 {
            return vec![0.0; n];
        }
        let fan_in: usize = shape[1..].iter().product();
        let bound = 1.0 / (fan_in as f64).sqrt();
        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Format(format!("unknown operation `{s}`")))
    }
}

//! Periodic discrete signals, channel stacks, and the polyphase isometry.
//!
//! Signals are finite real sequences indexed modulo their length; images are
//! row-major with periodic wrap along each axis. Every convolutive operator
//! in this crate acts circularly, so the DFT diagonalizes it exactly.

use crate::error::{Error, Result};

/// Extent of a signal: a 1D length or a 2D (rows, cols) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    One(usize),
    Two(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::One(n) => n,
            Shape::Two(n1, n2) => n1 * n2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self) -> usize {
        match self {
            Shape::One(_) => 1,
            Shape::Two(_, _) => 2,
        }
    }

    /// Per-axis dimensions; a 1D shape reports a single axis.
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::One(n) => vec![n],
            Shape::Two(n1, n2) => vec![n1, n2],
        }
    }

    /// Shape of one polyphase channel after decimating every axis by `d`.
    pub fn decimated(&self, d: usize) -> Result<Shape> {
        let check = |n: usize| -> Result<usize> {
            if d == 0 || !n.is_multiple_of(d) {
                Err(Error::Divisibility { length: n, factor: d })
            } else {
                Ok(n / d)
            }
        };
        Ok(match *self {
            Shape::One(n) => Shape::One(check(n)?),
            Shape::Two(n1, n2) => Shape::Two(check(n1)?, check(n2)?),
        })
    }

    /// Shape after upsampling every axis by `c` (inverse of `decimated`).
    pub fn upsampled(&self, c: usize) -> Shape {
        match *self {
            Shape::One(n) => Shape::One(n * c),
            Shape::Two(n1, n2) => Shape::Two(n1 * c, n2 * c),
        }
    }

    fn flat(&self, i1: i64, i2: i64) -> usize {
        match *self {
            Shape::One(n) => i1.rem_euclid(n as i64) as usize,
            Shape::Two(n1, n2) => {
                let r = i1.rem_euclid(n1 as i64) as usize;
                let c = i2.rem_euclid(n2 as i64) as usize;
                r * n2 + c
            }
        }
    }

    fn coords(&self, flat: usize) -> (i64, i64) {
        match *self {
            Shape::One(_) => (flat as i64, 0),
            Shape::Two(_, n2) => ((flat / n2) as i64, (flat % n2) as i64),
        }
    }
}

/// A finite-length real periodic signal (1D sequence or row-major 2D image).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    shape: Shape,
    values: Vec<f64>,
}

impl Signal {
    pub fn new_1d(values: Vec<f64>) -> Signal {
        let n = values.len();
        Signal { shape: Shape::One(n), values }
    }

    pub fn new_2d(rows: usize, cols: usize, values: Vec<f64>) -> Result<Signal> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {}x{} image",
                values.len(),
                rows,
                cols
            )));
        }
        Ok(Signal { shape: Shape::Two(rows, cols), values })
    }

    pub fn from_shape(shape: Shape, values: Vec<f64>) -> Result<Signal> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for shape of length {}",
                values.len(),
                shape.len()
            )));
        }
        Ok(Signal { shape, values })
    }

    pub fn zeros(shape: Shape) -> Signal {
        Signal { shape, values: vec![0.0; shape.len()] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Periodic lookup with arbitrary integer coordinates.
    pub fn at(&self, i1: i64, i2: i64) -> f64 {
        self.values[self.shape.flat(i1, i2)]
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Signal {
        Signal {
            shape: self.shape,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// self + factor * other
    pub fn axpy(&self, factor: f64, other: &Signal) -> Signal {
        debug_assert_eq!(self.len(), other.len());
        Signal {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Signal) -> Signal {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        self.axpy(-1.0, other)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        Signal {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn coords(&self, flat: usize) -> (i64, i64) {
        self.shape.coords(flat)
    }
}

/// An ordered stack of equal-shape channels, e.g. the polyphase components of
/// a signal or the output of a multichannel analysis bank.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSignal {
    channels: Vec<Signal>,
}

impl MultiSignal {
    pub fn new(channels: Vec<Signal>) -> Result<MultiSignal> {
        if channels.is_empty() {
            return Err(Error::Shape("a channel stack needs at least one channel".into()));
        }
        let shape = channels[0].shape();
        for (i, c) in channels.iter().enumerate() {
            if c.shape() != shape {
                return Err(Error::Shape(format!(
                    "channel {} has shape {:?}, expected {:?}",
                    i,
                    c.shape(),
                    shape
                )));
            }
        }
        Ok(MultiSignal { channels })
    }

    pub fn zeros(channels: usize, shape: Shape) -> MultiSignal {
        MultiSignal {
            channels: (0..channels).map(|_| Signal::zeros(shape)).collect(),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_shape(&self) -> Shape {
        self.channels[0].shape()
    }

    pub fn channels(&self) -> &[Signal] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &Signal {
        &self.channels[i]
    }

    pub fn into_channels(self) -> Vec<Signal> {
        self.channels
    }

    pub fn dot(&self, other: &MultiSignal) -> f64 {
        debug_assert_eq!(self.channel_count(), other.channel_count());
        self.channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Number of polyphase channels produced by factor `d` on a given rank:
/// `d` in 1D, `d*d` in 2D (factor `d` along each axis).
pub fn polyphase_channels(shape: Shape, d: usize) -> usize {
    match shape {
        Shape::One(_) => d,
        Shape::Two(_, _) => d * d,
    }
}

/// Splits `y` into its polyphase components of order `d` (per axis).
///
/// Channel `j` of a 1D signal is `m -> y(d*m + j)`; for images the channels
/// are indexed row-major by the per-axis phases `(j1, j2)`.
pub fn polyphase_decompose(y: &Signal, d: usize) -> Result<MultiSignal> {
    let sub = y.shape().decimated(d)?;
    let mut channels = Vec::with_capacity(polyphase_channels(y.shape(), d));
    match y.shape() {
        Shape::One(_) => {
            for j in 0..d {
                let m = sub.len();
                let mut vals = Vec::with_capacity(m);
                for idx in 0..m {
                    vals.push(y.at((d * idx + j) as i64, 0));
                }
                channels.push(Signal::from_shape(sub, vals)?);
            }
        }
        Shape::Two(_, _) => {
            let (m1, m2) = match sub {
                Shape::Two(a, b) => (a, b),
                _ => unreachable!(),
            };
            for j1 in 0..d {
                for j2 in 0..d {
                    let mut vals = Vec::with_capacity(m1 * m2);
                    for a in 0..m1 {
                        for b in 0..m2 {
                            vals.push(y.at((d * a + j1) as i64, (d * b + j2) as i64));
                        }
                    }
                    channels.push(Signal::from_shape(sub, vals)?);
                }
            }
        }
    }
    MultiSignal::new(channels)
}

/// Interleaves polyphase components back into a single signal; the exact
/// inverse (and adjoint) of [`polyphase_decompose`].
pub fn polyphase_recompose(u: &MultiSignal) -> Result<Signal> {
    let c = u.channel_count();
    let sub = u.channel_shape();
    match sub {
        Shape::One(m) => {
            let d = c;
            let mut vals = vec![0.0; d * m];
            for (j, ch) in u.channels().iter().enumerate() {
                for idx in 0..m {
                    vals[d * idx + j] = ch.values()[idx];
                }
            }
            Ok(Signal::new_1d(vals))
        }
        Shape::Two(m1, m2) => {
            let d = (c as f64).sqrt().round() as usize;
            if d * d != c {
                return Err(Error::Shape(format!(
                    "cannot interleave {} channels into a 2D signal (not a square count)",
                    c
                )));
            }
            let (n1, n2) = (d * m1, d * m2);
            let mut vals = vec![0.0; n1 * n2];
            for (flat, ch) in u.channels().iter().enumerate() {
                let (j1, j2) = (flat / d, flat % d);
                for a in 0..m1 {
                    for b in 0..m2 {
                        vals[(d * a + j1) * n2 + (d * b + j2)] = ch.values()[a * m2 + b];
                    }
                }
            }
            Signal::new_2d(n1, n2, vals)
        }
    }
}

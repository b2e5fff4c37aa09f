//! Orthonormal dyadic wavelet transforms with periodic boundary handling.
//!
//! A level maps a length-m signal to m/2 approximation and m/2 detail
//! coefficients via `a(k) = sum_t h(t) s(2k + t mod m)` (likewise `g` for the
//! details); levels recurse on the approximation band and the pyramid is
//! packed in place as `[a_J | d_J | ... | d_1]`. For paraunitary pairs the
//! periodized transform is exactly orthogonal at every even length, so the
//! adjoint inverts it.

use crate::error::{Error, Result};
use crate::signal::{Shape, Signal};

/// A two-band analysis pair (lowpass, highpass), both anchored at offset 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPair {
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

/// Tolerance for the load-time paraunitarity validation.
pub const PARAUNITARY_TOL: f64 = 1e-10;

impl WaveletPair {
    /// Builds a pair from explicit lowpass/highpass taps and validates the
    /// paraunitarity conditions (unit even-lag autocorrelations, vanishing
    /// even-lag cross-correlation).
    pub fn new(lowpass: Vec<f64>, highpass: Vec<f64>) -> Result<WaveletPair> {
        let pair = WaveletPair { lowpass, highpass };
        pair.validate(PARAUNITARY_TOL)?;
        Ok(pair)
    }

    /// Derives the quadrature-mirror highpass `g(t) = (-1)^t h(L-1-t)`.
    pub fn from_lowpass(lowpass: Vec<f64>) -> Result<WaveletPair> {
        let l = lowpass.len();
        let highpass = (0..l)
            .map(|t| if t % 2 == 0 { lowpass[l - 1 - t] } else { -lowpass[l - 1 - t] })
            .collect();
        WaveletPair::new(lowpass, highpass)
    }

    pub fn haar() -> WaveletPair {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        WaveletPair::new(vec![s, s], vec![s, -s]).unwrap()
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    fn validate(&self, tol: f64) -> Result<()> {
        if self.lowpass.len() != self.highpass.len() || self.lowpass.is_empty() {
            return Err(Error::Construction(
                "wavelet pair needs equal, nonzero filter lengths".into(),
            ));
        }
        if !self.lowpass.len().is_multiple_of(2) {
            return Err(Error::Construction(
                "orthonormal two-band filters have even length".into(),
            ));
        }
        let corr = |a: &[f64], b: &[f64], lag: i64| -> f64 {
            let mut s = 0.0;
            for (t, &x) in a.iter().enumerate() {
                let j = t as i64 + lag;
                if j >= 0 && (j as usize) < b.len() {
                    s += x * b[j as usize];
                }
            }
            s
        };
        let l = self.lowpass.len() as i64;
        for lag in (0..l).step_by(2) {
            let want = if lag == 0 { 1.0 } else { 0.0 };
            let hh = corr(&self.lowpass, &self.lowpass, lag);
            let gg = corr(&self.highpass, &self.highpass, lag);
            let hg = corr(&self.lowpass, &self.highpass, lag);
            let gh = corr(&self.lowpass, &self.highpass, -lag);
            if (hh - want).abs() > tol
                || (gg - want).abs() > tol
                || hg.abs() > tol
                || gh.abs() > tol
            {
                return Err(Error::Construction(format!(
                    "filter pair not paraunitary at lag {} (hh={}, gg={}, hg={})",
                    lag, hh, gg, hg
                )));
            }
        }
        Ok(())
    }
}

fn analysis_step(pair: &WaveletPair, data: &mut [f64], len: usize) {
    let half = len / 2;
    let mut out = vec![0.0; len];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (t, (&h, &g)) in pair.lowpass.iter().zip(&pair.highpass).enumerate() {
            let src = data[(2 * k + t) % len];
            a += h * src;
            d += g * src;
        }
        out[k] = a;
        out[half + k] = d;
    }
    data[..len].copy_from_slice(&out);
}

fn synthesis_step(pair: &WaveletPair, data: &mut [f64], len: usize) {
    let half = len / 2;
    let mut out = vec![0.0; len];
    for k in 0..half {
        let a = data[k];
        let d = data[half + k];
        for (t, (&h, &g)) in pair.lowpass.iter().zip(&pair.highpass).enumerate() {
            out[(2 * k + t) % len] += h * a + g * d;
        }
    }
    data[..len].copy_from_slice(&out);
}

fn dwt_slice(pair: &WaveletPair, data: &mut [f64], levels: usize, adjoint: bool) {
    let n = data.len();
    if adjoint {
        for level in (0..levels).rev() {
            synthesis_step(pair, data, n >> level);
        }
    } else {
        for level in 0..levels {
            analysis_step(pair, data, n >> level);
        }
    }
}

/// J-level orthonormal DWT of a signal (tensor transform in 2D: every row,
/// then every column). The adjoint is the exact inverse.
pub fn dwt_apply(pair: &WaveletPair, levels: usize, y: &Signal, adjoint: bool) -> Result<Signal> {
    dwt_apply_axes(&[pair.clone(), pair.clone()], levels, y, adjoint)
}

/// Like [`dwt_apply`] but with a distinct pair per axis (`pairs[0]` along
/// axis 0, `pairs[1]` along axis 1); 1D signals use `pairs[0]`.
pub fn dwt_apply_axes(
    pairs: &[WaveletPair; 2],
    levels: usize,
    y: &Signal,
    adjoint: bool,
) -> Result<Signal> {
    let shape = y.shape();
    for n in shape.dims() {
        if levels > 0 && n % (1 << levels) != 0 {
            return Err(Error::Divisibility { length: n, factor: 1 << levels });
        }
    }
    if levels == 0 {
        return Ok(y.clone());
    }
    let mut vals = y.values().to_vec();
    match shape {
        Shape::One(_) => dwt_slice(&pairs[0], &mut vals, levels, adjoint),
        Shape::Two(n1, n2) => {
            let rows_pass = |vals: &mut Vec<f64>| {
                for r in 0..n1 {
                    dwt_slice(&pairs[1], &mut vals[r * n2..(r + 1) * n2], levels, adjoint);
                }
            };
            let cols_pass = |vals: &mut Vec<f64>| {
                let mut col = vec![0.0; n1];
                for c in 0..n2 {
                    for r in 0..n1 {
                        col[r] = vals[r * n2 + c];
                    }
                    dwt_slice(&pairs[0], &mut col, levels, adjoint);
                    for r in 0..n1 {
                        vals[r * n2 + c] = col[r];
                    }
                }
            };
            // adjoint of (cols o rows) is (rows^T o cols^T)
            if adjoint {
                cols_pass(&mut vals);
                rows_pass(&mut vals);
            } else {
                rows_pass(&mut vals);
                cols_pass(&mut vals);
            }
        }
    }
    Signal::from_shape(shape, vals)
}

//! DFT helpers shared by the frequency-domain operator algebra.
//!
//! Forward transforms are plain (unnormalized) DFTs; inverses carry the 1/n
//! factor, so `idft(dft(x)) == x` up to rounding.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::signal::{Shape, Signal};

/// Planned forward/inverse transforms for one signal shape. Plans are
/// immutable and shareable across threads.
#[derive(Clone)]
pub struct FftPlan {
    shape: Shape,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("shape", &self.shape).finish()
    }
}

impl FftPlan {
    pub fn new(shape: Shape) -> FftPlan {
        let mut planner = FftPlanner::new();
        let dims = shape.dims();
        let forward = dims
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = dims
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        FftPlan { shape, forward, inverse }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        match self.shape {
            Shape::One(n) => {
                debug_assert_eq!(data.len(), n);
                plans[0].process(data);
            }
            Shape::Two(n1, n2) => {
                debug_assert_eq!(data.len(), n1 * n2);
                for row in data.chunks_exact_mut(n2) {
                    plans[1].process(row);
                }
                let mut col = vec![Complex64::default(); n1];
                for c in 0..n2 {
                    for r in 0..n1 {
                        col[r] = data[r * n2 + c];
                    }
                    plans[0].process(&mut col);
                    for r in 0..n1 {
                        data[r * n2 + c] = col[r];
                    }
                }
            }
        }
    }

    /// DFT of a real signal, row-major over the frequency grid.
    pub fn dft(&self, x: &Signal) -> Vec<Complex64> {
        debug_assert_eq!(x.shape(), self.shape);
        let mut data: Vec<Complex64> = x
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.run(&mut data, false);
        data
    }

    /// Normalized inverse DFT; the imaginary part is dropped (callers only
    /// invert spectra of real operators applied to real data).
    pub fn idft_real(&self, spectrum: &[Complex64]) -> Signal {
        let mut data = spectrum.to_vec();
        self.run(&mut data, true);
        let scale = 1.0 / self.shape.len() as f64;
        let values = data.iter().map(|z| z.re * scale).collect();
        Signal::from_shape(self.shape, values).expect("plan shape matches data")
    }
}

/// One-shot DFT for tests and non-hot paths.
pub fn dft(x: &Signal) -> Vec<Complex64> {
    FftPlan::new(x.shape()).dft(x)
}

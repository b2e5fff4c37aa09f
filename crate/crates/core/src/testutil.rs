//! Deterministic pseudo-random fixtures for unit tests.

use crate::rng::CounterRng;
use crate::signal::Signal;

pub fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = CounterRng::new(seed.wrapping_mul(0x9E37_79B9).wrapping_add(12345));
    (0..n).map(|_| rng.next_symmetric()).collect()
}

pub fn lcg_signal(n: usize, seed: u64) -> Signal {
    Signal::new_1d(lcg_values(n, seed))
}

pub fn lcg_signal_2d(rows: usize, cols: usize, seed: u64) -> Signal {
    Signal::new_2d(rows, cols, lcg_values(rows * cols, seed)).unwrap()
}

//! SISO/MIMO circular filtering, frequency-response matrices, per-bin Gram
//! assembly, and the left-invertibility test behind every frame construction.
//!
//! Convention: `(h * y)(m) = sum_k h(k) y(m - k mod n)`; the adjoint filter
//! has time-reversed taps (conjugate frequency response).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{MultiSignal, Shape, Signal};

/// A finitely supported real impulse response with integer support offsets,
/// in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SisoFilter {
    rank: usize,
    offsets: [i64; 2],
    dims: [usize; 2],
    taps: Vec<f64>,
}

impl SisoFilter {
    /// 1D filter: `taps[k]` sits at time index `offset + k`.
    pub fn from_taps_1d(offset: i64, taps: Vec<f64>) -> Result<SisoFilter> {
        if taps.is_empty() {
            return Err(Error::Parameter("a filter needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("filter taps must be finite".into()));
        }
        let n = taps.len();
        Ok(SisoFilter { rank: 1, offsets: [offset, 0], dims: [n, 1], taps })
    }

    /// 2D filter over the support box starting at `offsets` with extent `dims`,
    /// taps row-major.
    pub fn from_taps_2d(offsets: [i64; 2], dims: [usize; 2], taps: Vec<f64>) -> Result<SisoFilter> {
        if dims[0] * dims[1] != taps.len() || taps.is_empty() {
            return Err(Error::Parameter(format!(
                "{} taps cannot fill a {}x{} support box",
                taps.len(),
                dims[0],
                dims[1]
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parameter("filter taps must be finite".into()));
        }
        Ok(SisoFilter { rank: 2, offsets, dims, taps })
    }

    /// Kronecker delta (identity filter) of the given rank.
    pub fn identity(rank: usize) -> SisoFilter {
        match rank {
            1 => SisoFilter::from_taps_1d(0, vec![1.0]).unwrap(),
            2 => SisoFilter::from_taps_2d([0, 0], [1, 1], vec![1.0]).unwrap(),
            _ => panic!("rank must be 1 or 2"),
        }
    }

    pub fn zero(rank: usize) -> SisoFilter {
        match rank {
            1 => SisoFilter::from_taps_1d(0, vec![0.0]).unwrap(),
            2 => SisoFilter::from_taps_2d([0, 0], [1, 1], vec![0.0]).unwrap(),
            _ => panic!("rank must be 1 or 2"),
        }
    }

    /// Separable 2D filter `t(k1, k2) = a(k1) * b(k2)` from two 1D factors.
    pub fn outer(a: &SisoFilter, b: &SisoFilter) -> Result<SisoFilter> {
        if a.rank != 1 || b.rank != 1 {
            return Err(Error::Parameter("outer product needs 1D factors".into()));
        }
        let dims = [a.dims[0], b.dims[0]];
        let mut taps = Vec::with_capacity(dims[0] * dims[1]);
        for ta in &a.taps {
            for tb in &b.taps {
                taps.push(ta * tb);
            }
        }
        SisoFilter::from_taps_2d([a.offsets[0], b.offsets[0]], dims, taps)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    /// Iterate `(k1, k2, value)` over the support box (k2 = 0 in 1D).
    pub fn taps(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let (d1, o) = (self.dims[1], self.offsets);
        self.taps.iter().enumerate().map(move |(i, &t)| {
            let k1 = o[0] + (i / d1) as i64;
            let k2 = o[1] + (i % d1) as i64;
            (k1, k2, t)
        })
    }

    pub fn scaled(&self, factor: f64) -> SisoFilter {
        let mut out = self.clone();
        for t in &mut out.taps {
            *t *= factor;
        }
        out
    }

    /// Time-reversed filter, i.e. the adjoint of circular convolution.
    pub fn reversed(&self) -> SisoFilter {
        let mut map = BTreeMap::new();
        for (k1, k2, t) in self.taps() {
            map.insert((-k1, -k2), t);
        }
        SisoFilter::from_tap_map(self.rank, &map).expect("reversal preserves validity")
    }

    pub(crate) fn from_tap_map(rank: usize, map: &BTreeMap<(i64, i64), f64>) -> Result<SisoFilter> {
        if map.is_empty() {
            return Ok(SisoFilter::zero(rank));
        }
        let min1 = map.keys().map(|k| k.0).min().unwrap();
        let max1 = map.keys().map(|k| k.0).max().unwrap();
        let min2 = map.keys().map(|k| k.1).min().unwrap();
        let max2 = map.keys().map(|k| k.1).max().unwrap();
        let dims = [(max1 - min1 + 1) as usize, (max2 - min2 + 1) as usize];
        let mut taps = vec![0.0; dims[0] * dims[1]];
        for (&(k1, k2), &t) in map {
            taps[(k1 - min1) as usize * dims[1] + (k2 - min2) as usize] = t;
        }
        if rank == 1 {
            if dims[1] != 1 {
                return Err(Error::Parameter("1D filter with 2D support".into()));
            }
            SisoFilter::from_taps_1d(min1, taps)
        } else {
            SisoFilter::from_taps_2d([min1, min2], dims, taps)
        }
    }

    /// Circular convolution (or its adjoint) against a signal of matching rank.
    pub fn convolve(&self, x: &Signal, adjoint: bool) -> Result<Signal> {
        if self.rank != x.shape().rank() {
            return Err(Error::Shape(format!(
                "rank-{} filter applied to rank-{} signal",
                self.rank,
                x.shape().rank()
            )));
        }
        let mut out = vec![0.0; x.len()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let (i1, i2) = x.coords(flat);
            let mut acc = 0.0;
            for (k1, k2, t) in self.taps() {
                let v = if adjoint {
                    x.at(i1 + k1, i2 + k2)
                } else {
                    x.at(i1 - k1, i2 - k2)
                };
                acc += t * v;
            }
            *slot = acc;
        }
        Signal::from_shape(x.shape(), out)
    }

    /// Frequency response at normalized frequency `nu` (one entry per axis):
    /// `sum_k taps(k) exp(-i 2 pi <nu, k>)`.
    pub fn frequency_response(&self, nu: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k1, k2, t) in self.taps() {
            let mut phase = -2.0 * std::f64::consts::PI * nu[0] * k1 as f64;
            if self.rank == 2 {
                phase -= 2.0 * std::f64::consts::PI * nu[1] * k2 as f64;
            }
            acc += Complex64::new(phase.cos(), phase.sin()) * t;
        }
        acc
    }
}

/// A P x Q grid of SISO filters acting on Q-channel stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoFilter {
    rows: usize,
    cols: usize,
    entries: Vec<SisoFilter>,
}

impl MimoFilter {
    pub fn new(rows: usize, cols: usize, entries: Vec<SisoFilter>) -> Result<MimoFilter> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter("MIMO filter needs at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot fill a {}x{} filter grid",
                entries.len(),
                rows,
                cols
            )));
        }
        let rank = entries[0].rank();
        if entries.iter().any(|e| e.rank() != rank) {
            return Err(Error::Shape("mixed filter ranks in one MIMO grid".into()));
        }
        Ok(MimoFilter { rows, cols, entries })
    }

    /// Identity MIMO filter (delta on the diagonal).
    pub fn identity(channels: usize, rank: usize) -> MimoFilter {
        let entries = (0..channels * channels)
            .map(|i| {
                if i / channels == i % channels {
                    SisoFilter::identity(rank)
                } else {
                    SisoFilter::zero(rank)
                }
            })
            .collect();
        MimoFilter::new(channels, channels, entries).unwrap()
    }

    /// Stack of 1xQ rows built from a column of filters (Q = 1).
    pub fn column(filters: Vec<SisoFilter>) -> Result<MimoFilter> {
        let rows = filters.len();
        MimoFilter::new(rows, 1, filters)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.entries[0].rank()
    }

    pub fn entry(&self, i: usize, j: usize) -> &SisoFilter {
        &self.entries[i * self.cols + j]
    }

    /// Transposed grid of time-reversed taps; realizes the adjoint operator.
    pub fn adjoint(&self) -> MimoFilter {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.entry(i, j).reversed());
            }
        }
        MimoFilter::new(self.cols, self.rows, entries).unwrap()
    }

    /// Applies the filter grid: output channel `i = sum_j V_ij * x_j`.
    /// With `adjoint` set, applies the transposed-conjugate-response grid.
    pub fn apply(&self, x: &MultiSignal, adjoint: bool) -> Result<MultiSignal> {
        let (n_in, n_out) = if adjoint { (self.rows, self.cols) } else { (self.cols, self.rows) };
        if x.channel_count() != n_in {
            return Err(Error::Shape(format!(
                "filter expects {} input channels, got {}",
                n_in,
                x.channel_count()
            )));
        }
        let shape = x.channel_shape();
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let mut acc = Signal::zeros(shape);
            for j in 0..n_in {
                let f = if adjoint { self.entry(j, i) } else { self.entry(i, j) };
                acc = acc.add(&f.convolve(x.channel(j), adjoint)?);
            }
            out.push(acc);
        }
        MultiSignal::new(out)
    }

    /// The matrix `[v_ij(nu)]` of frequency responses at one grid point.
    pub fn frequency_matrix(&self, nu: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.entry(i, j).frequency_response(nu)
        })
    }

    /// Separable 2D grid from a 1D grid: channel `(i1, i2)` and phase
    /// `(j1, j2)` get the outer product of the 1D entries.
    pub fn separable_2d(&self) -> Result<MimoFilter> {
        if self.rank() != 1 {
            return Err(Error::Parameter("separable lift needs 1D entries".into()));
        }
        let (p, q) = (self.rows, self.cols);
        let mut entries = Vec::with_capacity(p * p * q * q);
        for i1 in 0..p {
            for i2 in 0..p {
                for j1 in 0..q {
                    for j2 in 0..q {
                        entries.push(SisoFilter::outer(self.entry(i1, j1), self.entry(i2, j2))?);
                    }
                }
            }
        }
        MimoFilter::new(p * p, q * q, entries)
    }
}

/// The uniform DFT grid attached to signals of one shape: bin `l` of an axis
/// of length `m` sits at normalized frequency `l / m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    shape: Shape,
}

impl FrequencyGrid {
    pub fn new(shape: Shape) -> FrequencyGrid {
        FrequencyGrid { shape }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bin_count(&self) -> usize {
        self.shape.len()
    }

    /// Normalized frequency coordinates of a flat (row-major) bin index.
    pub fn bin_frequency(&self, flat: usize) -> Vec<f64> {
        match self.shape {
            Shape::One(m) => vec![flat as f64 / m as f64],
            Shape::Two(m1, m2) => {
                vec![(flat / m2) as f64 / m1 as f64, (flat % m2) as f64 / m2 as f64]
            }
        }
    }

    pub fn bins(&self) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        (0..self.bin_count()).map(move |l| (l, self.bin_frequency(l)))
    }
}

/// Per-bin weighted Gram matrices `sum_r eta_r w_r(nu)^H w_r(nu)`.
///
/// All filters must share a column count; the result is one Hermitian PSD
/// matrix per grid bin.
pub fn weighted_gram(
    filters: &[(f64, &MimoFilter)],
    grid: &FrequencyGrid,
) -> Result<Vec<DMatrix<Complex64>>> {
    if filters.is_empty() {
        return Err(Error::Parameter("weighted Gram needs at least one filter".into()));
    }
    let q = filters[0].1.cols();
    for (weight, f) in filters {
        if *weight <= 0.0 || !weight.is_finite() {
            return Err(Error::Parameter(format!("nonpositive Gram weight {}", weight)));
        }
        if f.cols() != q {
            return Err(Error::Shape(format!(
                "Gram filters must share {} columns, got {}",
                q,
                f.cols()
            )));
        }
    }
    let mut out = Vec::with_capacity(grid.bin_count());
    for (_, nu) in grid.bins() {
        let mut acc = DMatrix::<Complex64>::zeros(q, q);
        for (weight, f) in filters {
            let m = f.frequency_matrix(&nu);
            acc += m.adjoint() * &m * Complex64::new(*weight, 0.0);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Outcome of scanning `sigma_min(v(nu))` over a frequency grid.
#[derive(Debug, Clone, Copy)]
pub struct InvertibilityReport {
    pub ok: bool,
    pub min_singular_value: f64,
    pub argmin_bin: usize,
}

/// Checks that the response matrix keeps full column rank on every grid bin,
/// i.e. the filter bank is left invertible on periodic signals.
pub fn left_invertibility_check(
    v: &MimoFilter,
    grid: &FrequencyGrid,
    tol: f64,
) -> Result<InvertibilityReport> {
    if v.rows() < v.cols() {
        return Err(Error::Construction(format!(
            "a {}x{} response matrix cannot have rank {}",
            v.rows(),
            v.cols(),
            v.cols()
        )));
    }
    let mut min_sv = f64::INFINITY;
    let mut argmin = 0;
    for (bin, nu) in grid.bins() {
        let m = v.frequency_matrix(&nu);
        let gram = m.adjoint() * &m;
        let eig = gram.symmetric_eigen();
        let lam_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let sv = lam_min.max(0.0).sqrt();
        if sv < min_sv {
            min_sv = sv;
            argmin = bin;
        }
    }
    Ok(InvertibilityReport {
        ok: min_sv > tol,
        min_singular_value: min_sv,
        argmin_bin: argmin,
    })
}

/// Blocked polyphase form of a full-rate SISO filter: the `d^rank x d^rank`
/// MIMO grid `B` with `Pi_d L = B Pi_d`, so `L = Pi_d^* B Pi_d`.
///
/// Entry `(i, j)` collects the taps `t(i - j + d q)` (per axis) at offset `q`.
pub fn blocked_polyphase(filter: &SisoFilter, d: usize) -> Result<MimoFilter> {
    if d == 0 {
        return Err(Error::Parameter("decimation factor must be positive".into()));
    }
    let rank = filter.rank();
    let di = d as i64;
    let channels = if rank == 1 { d } else { d * d };
    let mut maps: Vec<BTreeMap<(i64, i64), f64>> = vec![BTreeMap::new(); channels * channels];
    let phase_count = if rank == 1 { d } else { d * d };
    for (k1, k2, t) in filter.taps() {
        if t == 0.0 {
            continue;
        }
        for i in 0..phase_count {
            let (i1, i2) = if rank == 1 { (i as i64, 0) } else { ((i / d) as i64, (i % d) as i64) };
            let j1 = (i1 - k1).rem_euclid(di);
            let j2 = if rank == 1 { 0 } else { (i2 - k2).rem_euclid(di) };
            let q1 = (k1 - i1 + j1) / di;
            let q2 = if rank == 1 { 0 } else { (k2 - i2 + j2) / di };
            let j = if rank == 1 { j1 as usize } else { (j1 * di + j2) as usize };
            *maps[i * channels + j].entry((q1, q2)).or_insert(0.0) += t;
        }
    }
    let entries = maps
        .iter()
        .map(|m| SisoFilter::from_tap_map(rank, m))
        .collect::<Result<Vec<_>>>()?;
    MimoFilter::new(channels, channels, entries)
}

/// Parses the text coefficient format: a `P Q` header line, then one line
/// per entry (row-major): `offset tapcount t1 ... tk`. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_filter_bank(text: &str) -> Result<MimoFilter> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty coefficient file".into()))?;
    let mut hp = header.split_whitespace();
    let p: usize = hp
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("bad row count in header".into()))?;
    let q: usize = hp
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse("bad column count in header".into()))?;
    if hp.next().is_some() {
        return Err(Error::Parse("header must be exactly 'P Q'".into()));
    }
    let mut entries = Vec::with_capacity(p * q);
    for idx in 0..p * q {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing entry {} of {}", idx + 1, p * q)))?;
        let mut toks = line.split_whitespace();
        let offset: i64 = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad offset on entry {}", idx + 1)))?;
        let count: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad tap count on entry {}", idx + 1)))?;
        let taps: Vec<f64> = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad tap '{}' on entry {}", t, idx + 1)))
            })
            .collect::<Result<_>>()?;
        if taps.len() != count {
            return Err(Error::Parse(format!(
                "entry {} announces {} taps but carries {}",
                idx + 1,
                count,
                taps.len()
            )));
        }
        entries.push(SisoFilter::from_taps_1d(offset, taps)?);
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing data after last entry".into()));
    }
    MimoFilter::new(p, q, entries)
}

/// Reads a coefficient file from disk. See [`parse_filter_bank`].
pub fn load_filter_bank(path: &Path) -> Result<MimoFilter> {
    let text = std::fs::read_to_string(path)?;
    parse_filter_bank(&text)
}

/// Serializes a 1D MIMO grid in the text coefficient format.
pub fn format_filter_bank(v: &MimoFilter) -> Result<String> {
    if v.rank() != 1 {
        return Err(Error::Parameter("coefficient files carry 1D filters".into()));
    }
    let mut out = String::new();
    writeln!(out, "{} {}", v.rows(), v.cols()).unwrap();
    for i in 0..v.rows() {
        for j in 0..v.cols() {
            let e = v.entry(i, j);
            let taps: Vec<(i64, i64, f64)> = e.taps().collect();
            write!(out, "{} {}", taps[0].0, taps.len()).unwrap();
            for (_, _, t) in taps {
                write!(out, " {}", t).unwrap();
            }
            writeln!(out).unwrap();
        }
    }
    Ok(out)
}

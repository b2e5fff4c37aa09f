//! Frame operators of the form `F = Pi_Q^* U V Pi_D`: a polyphase split, a
//! left-invertible MIMO filter bank, a semi-orthogonal transform, and an
//! interleave back into a single coefficient signal.
//!
//! On periodic signals the Gram `F^*F = mu_U Pi_D^* V^*V Pi_D` is
//! block-circulant, so its spectrum is exactly the set of eigenvalues of the
//! response Grams `v(nu)^H v(nu)` over the DFT grid of the polyphase
//! channels; the frame bounds are those extremes times `mu_U`.

use std::path::Path;

use serde::Deserialize;

use crate::dwt::{dwt_apply, dwt_apply_axes, WaveletPair};
use crate::error::{Error, Result};
use crate::filter::{
    left_invertibility_check, load_filter_bank, FrequencyGrid, MimoFilter, SisoFilter,
};
use crate::rng::CounterRng;
use crate::signal::{
    polyphase_decompose, polyphase_recompose, MultiSignal, Shape, Signal,
};

/// Default tolerance below which the smallest response singular value marks
/// a construction as "not a frame".
pub const DEFAULT_INVERTIBILITY_TOL: f64 = 1e-9;

/// Default relative gap under which bounds certify a tight frame.
pub const DEFAULT_TIGHT_TOL: f64 = 1e-10;

const SEMI_ORTHO_PROBE_TOL: f64 = 1e-10;

/// A linear transform `U` on channel stacks with `U^*U = mu_U I`.
#[derive(Debug, Clone)]
pub enum SemiOrthogonal {
    /// Passes channels through unchanged (`mu_U = 1`).
    Identity,
    /// Stacks `copies` copies of the input channels (`mu_U = copies`).
    Replicate { copies: usize },
    /// Per-channel J-level orthonormal DWT (`mu_U = 1`).
    Dwt { pair: WaveletPair, levels: usize },
    /// Two parallel orthonormal wavelet trees (four in 2D: one pair per
    /// axis combination) followed by the orthogonal butterfly `Phi` that
    /// mixes the trees per position (`mu_U = 1`).
    DualTree { pairs: [WaveletPair; 2], levels: usize },
}

impl SemiOrthogonal {
    pub fn mu(&self) -> f64 {
        match self {
            SemiOrthogonal::Replicate { copies } => *copies as f64,
            _ => 1.0,
        }
    }

    /// Output channel count for a given input channel count and signal rank.
    pub fn out_channels(&self, input: usize, rank: usize) -> Result<usize> {
        match self {
            SemiOrthogonal::Identity | SemiOrthogonal::Dwt { .. } => Ok(input),
            SemiOrthogonal::Replicate { copies } => {
                if *copies == 0 {
                    return Err(Error::Parameter("replication needs at least one copy".into()));
                }
                Ok(input * copies)
            }
            SemiOrthogonal::DualTree { .. } => {
                let want = if rank == 1 { 2 } else { 4 };
                if input != want {
                    return Err(Error::Shape(format!(
                        "dual tree expects {} input channels in rank {}, got {}",
                        want, rank, input
                    )));
                }
                Ok(want)
            }
        }
    }

    fn butterfly(a: &Signal, b: &Signal) -> (Signal, Signal) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (a.scaled(s).axpy(s, b), a.scaled(s).axpy(-s, b))
    }

    pub fn apply(&self, x: &MultiSignal, adjoint: bool) -> Result<MultiSignal> {
        let rank = x.channel_shape().rank();
        match self {
            SemiOrthogonal::Identity => Ok(x.clone()),
            SemiOrthogonal::Replicate { copies } => {
                if adjoint {
                    let n = x.channel_count() / copies;
                    if n * copies != x.channel_count() {
                        return Err(Error::Shape("channel count not a copy multiple".into()));
                    }
                    let mut out = Vec::with_capacity(n);
                    for i in 0..n {
                        let mut acc = x.channel(i).clone();
                        for g in 1..*copies {
                            acc = acc.add(x.channel(g * n + i));
                        }
                        out.push(acc);
                    }
                    MultiSignal::new(out)
                } else {
                    let mut out = Vec::with_capacity(x.channel_count() * copies);
                    for _ in 0..*copies {
                        out.extend(x.channels().iter().cloned());
                    }
                    MultiSignal::new(out)
                }
            }
            SemiOrthogonal::Dwt { pair, levels } => {
                let out = x
                    .channels()
                    .iter()
                    .map(|c| dwt_apply(pair, *levels, c, adjoint))
                    .collect::<Result<Vec<_>>>()?;
                MultiSignal::new(out)
            }
            SemiOrthogonal::DualTree { pairs, levels } => {
                self.out_channels(x.channel_count(), rank)?;
                let tree_pass = |chs: &[Signal], adj: bool| -> Result<Vec<Signal>> {
                    if rank == 1 {
                        chs.iter()
                            .enumerate()
                            .map(|(i, c)| dwt_apply(&pairs[i], *levels, c, adj))
                            .collect()
                    } else {
                        chs.iter()
                            .enumerate()
                            .map(|(i, c)| {
                                let axes = [pairs[i / 2].clone(), pairs[i % 2].clone()];
                                dwt_apply_axes(&axes, *levels, c, adj)
                            })
                            .collect()
                    }
                };
                // Phi is its own adjoint (commuting per-axis butterflies).
                let mix = |chs: &[Signal]| -> Vec<Signal> {
                    if rank == 1 {
                        let (p, q) = Self::butterfly(&chs[0], &chs[1]);
                        vec![p, q]
                    } else {
                        let (a, b) = Self::butterfly(&chs[0], &chs[2]);
                        let (c, d) = Self::butterfly(&chs[1], &chs[3]);
                        let (p, q) = Self::butterfly(&a, &c);
                        let (r, s) = Self::butterfly(&b, &d);
                        vec![p, q, r, s]
                    }
                };
                if adjoint {
                    let mixed = mix(x.channels());
                    MultiSignal::new(tree_pass(&mixed, true)?)
                } else {
                    let transformed = tree_pass(x.channels(), false)?;
                    MultiSignal::new(mix(&transformed))
                }
            }
        }
    }
}

/// Frame constants and the certificate of tightness.
#[derive(Debug, Clone, Copy)]
pub struct FrameBounds {
    /// Lower frame constant (infimum of Rayleigh quotients).
    pub lower: f64,
    /// Upper frame constant.
    pub upper: f64,
    pub tight: bool,
    /// Grid bin achieving the lower bound.
    pub argmin_bin: usize,
    /// Grid bin achieving the upper bound.
    pub argmax_bin: usize,
}

/// The composite analysis operator `F = Pi_Q^* U V Pi_D` on periodic
/// signals of one fixed shape. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct FrameOperator {
    shape: Shape,
    sub_shape: Shape,
    coeff_shape: Shape,
    d: usize,
    v: MimoFilter,
    u: SemiOrthogonal,
    mu_u: f64,
    q_channels: usize,
    out_factor: usize,
}

impl FrameOperator {
    /// Assembles and validates a frame: `d` must divide every axis, `v` must
    /// be left invertible on the polyphase grid, and `u` must probe as
    /// semi-orthogonal.
    pub fn new(v: MimoFilter, u: SemiOrthogonal, d: usize, shape: Shape) -> Result<FrameOperator> {
        Self::build(v, u, d, shape, true)
    }

    /// Like [`FrameOperator::new`] but skips the left-invertibility check.
    /// The result may fail to be a frame; bound computation and the solver
    /// preconditioners will report the offending frequency bin.
    pub fn new_unchecked(
        v: MimoFilter,
        u: SemiOrthogonal,
        d: usize,
        shape: Shape,
    ) -> Result<FrameOperator> {
        Self::build(v, u, d, shape, false)
    }

    fn build(
        v: MimoFilter,
        u: SemiOrthogonal,
        d: usize,
        shape: Shape,
        check_invertibility: bool,
    ) -> Result<FrameOperator> {
        if shape.is_empty() {
            return Err(Error::Parameter("frames need a positive signal length".into()));
        }
        let sub_shape = shape.decimated(d)?;
        let d_eff = crate::signal::polyphase_channels(shape, d);
        if v.rank() != shape.rank() {
            return Err(Error::Shape(format!(
                "rank-{} filters cannot act on a rank-{} signal",
                v.rank(),
                shape.rank()
            )));
        }
        if v.cols() != d_eff {
            return Err(Error::Shape(format!(
                "filter bank has {} columns but decimation by {} yields {} polyphase channels",
                v.cols(),
                d,
                d_eff
            )));
        }
        if check_invertibility {
            let grid = FrequencyGrid::new(sub_shape);
            let report = left_invertibility_check(&v, &grid, DEFAULT_INVERTIBILITY_TOL)?;
            if !report.ok {
                return Err(Error::NotAFrame(format!(
                    "response matrix drops rank near bin {} (sigma_min = {:.3e})",
                    report.argmin_bin, report.min_singular_value
                )));
            }
        }
        let q_channels = u.out_channels(v.rows(), shape.rank())?;
        let out_factor = match shape {
            Shape::One(_) => q_channels,
            Shape::Two(_, _) => {
                let c = (q_channels as f64).sqrt().round() as usize;
                if c * c != q_channels {
                    return Err(Error::Construction(format!(
                        "{} output channels cannot interleave into a 2D coefficient image",
                        q_channels
                    )));
                }
                c
            }
        };
        for n in sub_shape.dims() {
            if let SemiOrthogonal::Dwt { levels, .. } | SemiOrthogonal::DualTree { levels, .. } = &u
            {
                if *levels > 0 && n % (1 << *levels) != 0 {
                    return Err(Error::Divisibility { length: n, factor: 1 << *levels });
                }
            }
        }
        let frame = FrameOperator {
            shape,
            sub_shape,
            coeff_shape: sub_shape.upsampled(out_factor),
            d,
            mu_u: u.mu(),
            q_channels,
            out_factor,
            v,
            u,
        };
        frame.probe_semi_orthogonality()?;
        Ok(frame)
    }

    fn probe_semi_orthogonality(&self) -> Result<()> {
        let mut rng = CounterRng::new(0x5EA1_0DD1);
        for _ in 0..3 {
            let chans = (0..self.v.rows())
                .map(|_| {
                    Signal::from_shape(
                        self.sub_shape,
                        (0..self.sub_shape.len()).map(|_| rng.next_symmetric()).collect(),
                    )
                    .unwrap()
                })
                .collect::<Vec<_>>();
            let x = MultiSignal::new(chans)?;
            let uu = self.u.apply(&self.u.apply(&x, false)?, true)?;
            let mut err = 0.0;
            let mut norm = 0.0;
            for (a, b) in uu.channels().iter().zip(x.channels()) {
                err += a.sub(&b.scaled(self.mu_u)).norm_sq();
                norm += b.norm_sq();
            }
            if err.sqrt() > SEMI_ORTHO_PROBE_TOL * (self.mu_u * norm.sqrt() + 1.0) {
                return Err(Error::Construction(format!(
                    "transform fails the semi-orthogonality probe (residual {:.3e})",
                    err.sqrt()
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Shape of one polyphase channel (the frequency grid the bounds live on).
    pub fn sub_shape(&self) -> Shape {
        self.sub_shape
    }

    pub fn coeff_shape(&self) -> Shape {
        self.coeff_shape
    }

    pub fn coeff_len(&self) -> usize {
        self.coeff_shape.len()
    }

    /// Per-axis decimation factor D.
    pub fn decimation(&self) -> usize {
        self.d
    }

    /// Effective polyphase channel count (D in 1D, D^2 in 2D).
    pub fn d_eff(&self) -> usize {
        self.v.cols()
    }

    /// Channel count N of the filter bank V.
    pub fn bank_channels(&self) -> usize {
        self.v.rows()
    }

    /// Output channel count Q of the transform U.
    pub fn q_channels(&self) -> usize {
        self.q_channels
    }

    pub fn mu_u(&self) -> f64 {
        self.mu_u
    }

    pub fn filters(&self) -> &MimoFilter {
        &self.v
    }

    pub fn transform(&self) -> &SemiOrthogonal {
        &self.u
    }

    /// Redundancy of the representation: coefficient count over sample count.
    pub fn redundancy(&self) -> f64 {
        self.coeff_len() as f64 / self.shape.len() as f64
    }

    /// `F y`: polyphase split, bank, transform, interleave.
    pub fn analyze(&self, y: &Signal) -> Result<Signal> {
        if y.shape() != self.shape {
            return Err(Error::Shape(format!(
                "frame expects shape {:?}, got {:?}",
                self.shape,
                y.shape()
            )));
        }
        let p = polyphase_decompose(y, self.d)?;
        let filtered = self.v.apply(&p, false)?;
        let transformed = self.u.apply(&filtered, false)?;
        polyphase_recompose(&transformed)
    }

    /// `F^* x` for a coefficient signal `x`.
    pub fn synthesize(&self, x: &Signal) -> Result<Signal> {
        if x.shape() != self.coeff_shape {
            return Err(Error::Shape(format!(
                "frame coefficients have shape {:?}, got {:?}",
                self.coeff_shape,
                x.shape()
            )));
        }
        let stacked = polyphase_decompose(x, self.out_factor)?;
        let back = self.u.apply(&stacked, true)?;
        let vf = self.v.apply(&back, true)?;
        polyphase_recompose(&vf)
    }

    /// `F^*F y = mu_U Pi_D^* V^* V Pi_D y`, computed without touching `U`.
    pub fn gram_apply(&self, y: &Signal) -> Result<Signal> {
        if y.shape() != self.shape {
            return Err(Error::Shape(format!(
                "frame expects shape {:?}, got {:?}",
                self.shape,
                y.shape()
            )));
        }
        let p = polyphase_decompose(y, self.d)?;
        let vp = self.v.apply(&p, false)?;
        let vvp = self.v.apply(&vp, true)?;
        Ok(polyphase_recompose(&vvp)?.scaled(self.mu_u))
    }

    /// Frame constants over the polyphase DFT grid (exact for periodic
    /// signals) and the tightness certificate at relative tolerance `tol`.
    pub fn bounds(&self, tol: f64) -> Result<FrameBounds> {
        let grid = FrequencyGrid::new(self.sub_shape);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut argmin = 0;
        let mut argmax = 0;
        for (bin, nu) in grid.bins() {
            let m = self.v.frequency_matrix(&nu);
            let gram = m.adjoint() * &m;
            let eig = gram.symmetric_eigen();
            for lam in eig.eigenvalues.iter() {
                if *lam < lo {
                    lo = *lam;
                    argmin = bin;
                }
                if *lam > hi {
                    hi = *lam;
                    argmax = bin;
                }
            }
        }
        let lower = self.mu_u * lo.max(0.0);
        let upper = self.mu_u * hi;
        if lower <= 1e-12 * upper.max(1.0) {
            return Err(Error::NotAFrame(format!(
                "lower bound vanishes at bin {} (lambda_min = {:.3e})",
                argmin, lower
            )));
        }
        Ok(FrameBounds {
            lower,
            upper,
            tight: upper - lower <= tol * upper,
            argmin_bin: argmin,
            argmax_bin: argmax,
        })
    }
}

/// Perfect-reconstruction analysis bank: `U = I`, `Q = N`, redundancy `N/D`.
/// 1D coefficient grids on 2D signals are lifted separably.
pub fn build_filter_bank(coeffs: &MimoFilter, d: usize, shape: Shape) -> Result<FrameOperator> {
    let v = match shape {
        Shape::One(_) => coeffs.clone(),
        Shape::Two(_, _) => {
            if coeffs.rank() == 1 {
                coeffs.separable_2d()?
            } else {
                coeffs.clone()
            }
        }
    };
    FrameOperator::new(v, SemiOrthogonal::Identity, d, shape)
}

/// Dual-tree wavelet frame: per-tree prefilters (the `N x 1` bank `V`,
/// `D = 1`), parallel orthonormal trees, and the orthogonal butterfly.
pub fn build_dtt(
    trees: [WaveletPair; 2],
    prefilters: [SisoFilter; 2],
    levels: usize,
    shape: Shape,
) -> Result<FrameOperator> {
    for p in &prefilters {
        if p.rank() != 1 {
            return Err(Error::Parameter("prefilters are 1D; 2D use is separable".into()));
        }
    }
    let v = match shape {
        Shape::One(_) => MimoFilter::column(vec![prefilters[0].clone(), prefilters[1].clone()])?,
        Shape::Two(_, _) => {
            let mut entries = Vec::with_capacity(4);
            for a in 0..2 {
                for b in 0..2 {
                    entries.push(SisoFilter::outer(&prefilters[a], &prefilters[b])?);
                }
            }
            MimoFilter::new(4, 1, entries)?
        }
    };
    FrameOperator::new(v, SemiOrthogonal::DualTree { pairs: trees, levels }, 1, shape)
}

/// Orthonormal wavelet basis as a (trivially tight) frame: `V = I`, `D = 1`.
pub fn build_orthonormal_dwt(pair: WaveletPair, levels: usize, shape: Shape) -> Result<FrameOperator> {
    FrameOperator::new(
        MimoFilter::identity(1, shape.rank()),
        SemiOrthogonal::Dwt { pair, levels },
        1,
        shape,
    )
}

/// The default dual-tree prefilters: tree 1 passes through, tree 2 applies
/// the half-sample-shift average. Deliberately non-flat, so the frame is
/// genuinely non-tight.
pub fn default_dtt_prefilters() -> [SisoFilter; 2] {
    [
        SisoFilter::identity(1),
        SisoFilter::from_taps_1d(0, vec![0.5, 0.5]).unwrap(),
    ]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DescriptorLength {
    Scalar(usize),
    Pair([usize; 2]),
}

/// On-disk frame description: the construction kind, the coefficient file,
/// the level count for wavelet trees, and the signal length it serves.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDescriptor {
    pub kind: String,
    pub coeff_file: String,
    #[serde(default)]
    pub levels: Option<usize>,
    n: DescriptorLength,
}

impl FrameDescriptor {
    pub fn from_path(path: &Path) -> Result<FrameDescriptor> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("frame descriptor: {}", e)))
    }

    pub fn shape(&self) -> Shape {
        match self.n {
            DescriptorLength::Scalar(n) => Shape::One(n),
            DescriptorLength::Pair([a, b]) => Shape::Two(a, b),
        }
    }
}

/// Builds the frame named by a descriptor file. `shape_override` substitutes
/// the signal shape (e.g. the shape of an image being restored); the
/// descriptor's own `n` is used when absent.
///
/// For `kind = "dtt"` the coefficient file is a 3x2 grid: row 0 the per-tree
/// prefilters, rows 1-2 the per-tree lowpass/highpass taps.
pub fn build_from_descriptor(
    descriptor: &FrameDescriptor,
    base_dir: &Path,
    shape_override: Option<Shape>,
) -> Result<FrameOperator> {
    let shape = shape_override.unwrap_or_else(|| descriptor.shape());
    let coeff_path = base_dir.join(&descriptor.coeff_file);
    let bank = load_filter_bank(&coeff_path)?;
    match descriptor.kind.as_str() {
        "filter_bank" => build_filter_bank(&bank, bank.cols(), shape),
        "dtt" => {
            if bank.rows() != 3 || bank.cols() != 2 {
                return Err(Error::Parse(format!(
                    "a dtt coefficient file is a 3x2 grid (prefilter/lowpass/highpass per tree), got {}x{}",
                    bank.rows(),
                    bank.cols()
                )));
            }
            let levels = descriptor.levels.ok_or_else(|| {
                Error::Parse("dtt descriptor needs a 'levels' field".into())
            })?;
            let tap_vec = |f: &SisoFilter| -> Vec<f64> { f.taps().map(|(_, _, t)| t).collect() };
            let trees = [
                WaveletPair::new(tap_vec(bank.entry(1, 0)), tap_vec(bank.entry(2, 0)))?,
                WaveletPair::new(tap_vec(bank.entry(1, 1)), tap_vec(bank.entry(2, 1)))?,
            ];
            let prefilters = [bank.entry(0, 0).clone(), bank.entry(0, 1).clone()];
            build_dtt(trees, prefilters, levels, shape)
        }
        other => Err(Error::Parse(format!("unknown frame kind '{}'", other))),
    }
}

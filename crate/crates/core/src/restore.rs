//! Deconvolution problem assembly: circular blur operators, Poisson and
//! Laplace degradation simulators, the two-term restoration objective, and
//! the SNR/SSIM report metrics.
//!
//! A restoration instance carries two data terms and one regularizer:
//! `f_1` the noise minus log-likelihood composed with the blur `T`, `f_2`
//! the box indicator on the identity, and `g_1 = tau ||.||_1` in the frame
//! coefficient domain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::FrameOperator;
use crate::prox::{ScalarPotential, SeparableFunction};
use crate::rng::CounterRng;
use crate::signal::{Shape, Signal};
use crate::solver::{
    af_warm_start, ppxa_af, ppxa_sf, sf_warm_start, ConvolutiveTerm, FrameTerm, ProblemForm,
    SolveResult, SolverParams, SolverProblem,
};
use crate::SisoFilter;

/// A finitely supported blur kernel acting by circular convolution.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    kernel: SisoFilter,
}

impl BlurOperator {
    pub fn new(kernel: SisoFilter) -> BlurOperator {
        BlurOperator { kernel }
    }

    /// Centered uniform kernel (`1/size` per tap in 1D, `1/size^2` in 2D).
    pub fn uniform(size: usize, rank: usize) -> Result<BlurOperator> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "uniform blur size must be odd and positive, got {}",
                size
            )));
        }
        let half = (size / 2) as i64;
        let kernel = match rank {
            1 => SisoFilter::from_taps_1d(-half, vec![1.0 / size as f64; size])?,
            2 => SisoFilter::from_taps_2d(
                [-half, -half],
                [size, size],
                vec![1.0 / (size * size) as f64; size * size],
            )?,
            _ => return Err(Error::Parameter("blur rank must be 1 or 2".into())),
        };
        Ok(BlurOperator { kernel })
    }

    /// Identity (no blur).
    pub fn none(rank: usize) -> BlurOperator {
        BlurOperator { kernel: SisoFilter::identity(rank) }
    }

    pub fn kernel(&self) -> &SisoFilter {
        &self.kernel
    }

    pub fn apply(&self, y: &Signal) -> Result<Signal> {
        self.kernel.convolve(y, false)
    }

    pub fn apply_adjoint(&self, y: &Signal) -> Result<Signal> {
        self.kernel.convolve(y, true)
    }
}

/// Observation noise attached to a blurred image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Counts `z_k ~ Poisson(alpha * (T ybar)_k)`.
    Poisson { alpha: f64 },
    /// `z = T ybar + eps` with i.i.d. zero-mean Laplace noise of the given
    /// scale; `alpha` is the resulting L1 fidelity weight (1/scale by
    /// default, but the two knobs are independent).
    Laplace { alpha: f64, scale: f64 },
}

impl NoiseKind {
    pub fn poisson(alpha: f64) -> Result<NoiseKind> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::Parameter(format!("Poisson scaling must be positive, got {}", alpha)));
        }
        Ok(NoiseKind::Poisson { alpha })
    }

    pub fn laplace(alpha: f64) -> Result<NoiseKind> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::Parameter(format!("Laplace weight must be positive, got {}", alpha)));
        }
        Ok(NoiseKind::Laplace { alpha, scale: 1.0 / alpha })
    }

    pub fn laplace_with_scale(alpha: f64, scale: f64) -> Result<NoiseKind> {
        if alpha <= 0.0 || scale <= 0.0 || !alpha.is_finite() || !scale.is_finite() {
            return Err(Error::Parameter("Laplace weight and scale must be positive".into()));
        }
        Ok(NoiseKind::Laplace { alpha, scale })
    }

    /// Maps an observation back to image units (counts are divided by
    /// `alpha`; additive models pass through).
    pub fn rescale_to_image(&self, z: &Signal) -> Signal {
        match self {
            NoiseKind::Poisson { alpha } => z.scaled(1.0 / alpha),
            _ => z.clone(),
        }
    }
}

/// Applies the observation model `z = D_alpha(T ybar)` with the documented
/// counter-based generator (one uniform per pixel, row-major order).
pub fn degrade(ybar: &Signal, blur: &BlurOperator, noise: &NoiseKind, seed: u64) -> Result<Signal> {
    let blurred = blur.apply(ybar)?;
    match noise {
        NoiseKind::None => Ok(blurred),
        NoiseKind::Poisson { alpha } => {
            let mut rng = CounterRng::new(seed);
            let mut vals = Vec::with_capacity(blurred.len());
            for &v in blurred.values() {
                let mean = alpha * v;
                if mean < 0.0 {
                    return Err(Error::Parameter(format!(
                        "negative blurred intensity {} under Poisson noise",
                        v
                    )));
                }
                vals.push(rng.poisson(mean) as f64);
            }
            Signal::from_shape(blurred.shape(), vals)
        }
        NoiseKind::Laplace { scale, .. } => {
            let mut rng = CounterRng::new(seed);
            let vals = blurred.values().iter().map(|&v| v + rng.laplace(*scale)).collect();
            Signal::from_shape(blurred.shape(), vals)
        }
    }
}

/// Signal-to-noise ratio `10 log10(||ybar||^2 / ||ybar - y||^2)` in dB;
/// `+inf` when the arguments coincide.
pub fn snr(ybar: &Signal, y: &Signal) -> Result<f64> {
    if ybar.shape() != y.shape() {
        return Err(Error::Shape("SNR arguments must share a shape".into()));
    }
    let ref_energy = ybar.norm_sq();
    if ref_energy == 0.0 {
        return Err(Error::Parameter("SNR reference signal is zero".into()));
    }
    let err_energy = ybar.sub(y).norm_sq();
    if err_energy == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ref_energy / err_energy).log10())
}

/// Window side for the mean local SSIM.
pub const SSIM_WINDOW: usize = 8;

/// Mean structural similarity with 8x8 sliding windows, dynamic range 255,
/// `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`. 1D signals use length-8
/// windows.
pub fn ssim(ybar: &Signal, y: &Signal) -> Result<f64> {
    if ybar.shape() != y.shape() {
        return Err(Error::Shape("SSIM arguments must share a shape".into()));
    }
    let c1 = (0.01 * 255.0) * (0.01 * 255.0);
    let c2 = (0.03 * 255.0) * (0.03 * 255.0);
    let w = SSIM_WINDOW;
    let (rows, cols) = match ybar.shape() {
        Shape::Two(r, c) => (r, c),
        Shape::One(n) => (1, n),
    };
    let win_rows = if rows == 1 { 1 } else { w };
    if rows < win_rows || cols < w {
        return Err(Error::Shape(format!(
            "SSIM needs at least {}x{} samples, got {}x{}",
            win_rows, w, rows, cols
        )));
    }
    let a = ybar.values();
    let b = y.values();
    let mut total = 0.0;
    let mut windows = 0usize;
    let count = (win_rows * w) as f64;
    for r0 in 0..=(rows - win_rows) {
        for c0 in 0..=(cols - w) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dr in 0..win_rows {
                for dc in 0..w {
                    let idx = (r0 + dr) * cols + (c0 + dc);
                    let (x, z) = (a[idx], b[idx]);
                    sa += x;
                    sb += z;
                    saa += x * x;
                    sbb += z * z;
                    sab += x * z;
                }
            }
            let ma = sa / count;
            let mb = sb / count;
            let va = saa / count - ma * ma;
            let vb = sbb / count - mb * mb;
            let cov = sab / count - ma * mb;
            let val = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            total += val;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Restoration run summary written next to each restored image.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Metrics {
    pub snr_db: f64,
    pub ssim: f64,
    pub iterations: usize,
    pub seconds: f64,
}

impl Metrics {
    /// JSON with a fixed field order. Wall seconds are zeroed unless
    /// `record_timing` is set, keeping reruns byte-identical.
    pub fn to_json(&self, record_timing: bool) -> String {
        let mut m = *self;
        if !record_timing {
            m.seconds = 0.0;
        }
        serde_json::to_string(&m).expect("metrics serialize")
    }
}

/// Deterministic piecewise-smooth test scene: a gradient background, two
/// constant blocks, and a disk, quantized to integer gray levels in
/// [0, 255]. Used by the end-to-end fixtures.
pub fn piecewise_smooth_image(rows: usize, cols: usize) -> Signal {
    let mut vals = Vec::with_capacity(rows * cols);
    let (cr, cc) = (0.62 * rows as f64, 0.58 * cols as f64);
    let radius = 0.21 * rows.min(cols) as f64;
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 40.0 + 70.0 * (r as f64 / rows as f64);
            if r >= rows / 8 && r < rows / 2 && c >= cols / 8 && c < cols / 2 {
                v = 210.0;
            }
            if r >= 3 * rows / 4 && c < cols / 4 {
                v = 90.0;
            }
            let dr = r as f64 - cr;
            let dc = c as f64 - cc;
            if (dr * dr + dc * dc).sqrt() < radius {
                v = 160.0;
            }
            vals.push(v.round().clamp(0.0, 255.0));
        }
    }
    Signal::new_2d(rows, cols, vals).expect("generator fills the grid")
}

/// A fully assembled two-data-term restoration instance.
#[derive(Debug, Clone)]
pub struct RestorationProblem {
    observation: Signal,
    blur: BlurOperator,
    fidelity: NoiseKind,
    form: ProblemForm,
    tau: f64,
    box_bounds: (f64, f64),
    problem: SolverProblem,
    initial: Signal,
}

impl RestorationProblem {
    /// Assembles the two data terms and the L1 frame regularizer with unit
    /// weights. `fidelity` selects the minus log-likelihood: Poisson counts
    /// (requires integer-valued nonnegative `z`), Laplace (`alpha |. - z_k|`),
    /// or `None` for a unit-weight L1 fit to a noiseless observation.
    pub fn build(
        z: Signal,
        blur: BlurOperator,
        frame: FrameOperator,
        tau: f64,
        form: ProblemForm,
        fidelity: NoiseKind,
    ) -> Result<RestorationProblem> {
        Self::build_weighted(z, blur, frame, tau, form, fidelity, (0.0, 255.0), [1.0, 1.0, 1.0])
    }

    /// Full-control builder: box bounds and the three positive weights
    /// `[eta_1 (fidelity), eta_2 (box), kappa_1 (regularizer)]`.
    #[allow(clippy::too_many_arguments)]
    pub fn build_weighted(
        z: Signal,
        blur: BlurOperator,
        frame: FrameOperator,
        tau: f64,
        form: ProblemForm,
        fidelity: NoiseKind,
        box_bounds: (f64, f64),
        weights: [f64; 3],
    ) -> Result<RestorationProblem> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::Parameter(format!("tau must be positive, got {}", tau)));
        }
        if !z.all_finite() {
            return Err(Error::Parameter("observation contains non-finite values".into()));
        }
        if z.shape() != frame.shape() {
            return Err(Error::Shape(format!(
                "observation shape {:?} does not match the frame domain {:?}",
                z.shape(),
                frame.shape()
            )));
        }
        let rank = z.shape().rank();
        if blur.kernel().rank() != rank {
            return Err(Error::Shape("blur kernel rank does not match the observation".into()));
        }
        let data_potential = match fidelity {
            NoiseKind::Poisson { alpha } => {
                let pots = z
                    .values()
                    .iter()
                    .map(|&zk| {
                        if zk < 0.0 || zk.fract() != 0.0 {
                            return Err(Error::Parameter(format!(
                                "Poisson fidelity needs integer counts >= 0, got {}",
                                zk
                            )));
                        }
                        ScalarPotential::poisson_nll(alpha, zk)
                    })
                    .collect::<Result<Vec<_>>>()?;
                SeparableFunction::PerCoordinate(pots)
            }
            NoiseKind::Laplace { alpha, .. } => SeparableFunction::PerCoordinate(
                z.values()
                    .iter()
                    .map(|&zk| ScalarPotential::abs_shifted(alpha, zk))
                    .collect::<Result<Vec<_>>>()?,
            ),
            NoiseKind::None => SeparableFunction::PerCoordinate(
                z.values()
                    .iter()
                    .map(|&zk| ScalarPotential::abs_shifted(1.0, zk))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let d = frame.decimation();
        let shape = frame.shape();
        let fidelity_term =
            ConvolutiveTerm::new(blur.kernel().clone(), data_potential, weights[0], d, shape)?;
        let box_term = ConvolutiveTerm::identity(
            SeparableFunction::Broadcast(ScalarPotential::box_indicator(
                box_bounds.0,
                box_bounds.1,
            )?),
            weights[1],
            d,
            shape,
        )?;
        let reg_term = FrameTerm::new(
            SeparableFunction::Broadcast(ScalarPotential::abs_shifted(tau, 0.0)?),
            weights[2],
        )?;
        let initial = fidelity.rescale_to_image(&z);
        let problem = SolverProblem::new(frame, vec![fidelity_term, box_term], vec![reg_term])?;
        Ok(RestorationProblem {
            observation: z,
            blur,
            fidelity,
            form,
            tau,
            box_bounds,
            problem,
            initial,
        })
    }

    pub fn observation(&self) -> &Signal {
        &self.observation
    }

    pub fn blur(&self) -> &BlurOperator {
        &self.blur
    }

    pub fn form(&self) -> ProblemForm {
        self.form
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn box_bounds(&self) -> (f64, f64) {
        self.box_bounds
    }

    pub fn fidelity(&self) -> NoiseKind {
        self.fidelity
    }

    pub fn solver_problem(&self) -> &SolverProblem {
        &self.problem
    }

    /// Image-domain warm start: the observation mapped back to image units.
    pub fn initial(&self) -> &Signal {
        &self.initial
    }

    /// Runs PPXA+ in the configured formulation from the warm start.
    pub fn solve(&self, params: &SolverParams) -> Result<SolveResult> {
        match self.form {
            ProblemForm::Synthesis => {
                let (v, w) = sf_warm_start(&self.problem, &self.initial)?;
                ppxa_sf(&self.problem, params, &v, &w)
            }
            ProblemForm::Analysis => {
                let (v, w) = af_warm_start(&self.problem, &self.initial)?;
                ppxa_af(&self.problem, params, &v, &w)
            }
        }
    }

    /// The solver output projected onto the box constraint (the image that
    /// gets written and scored).
    pub fn restored_image(&self, result: &SolveResult) -> Signal {
        let (lo, hi) = self.box_bounds;
        result.solution.map(|v| v.clamp(lo, hi))
    }

    /// Data-fidelity part of the objective at an image-domain point:
    /// `f_1(T y) + f_2(y)`.
    pub fn data_objective(&self, y: &Signal) -> Result<f64> {
        let mut acc = 0.0;
        for t in self.problem.conv_terms() {
            acc += t.potential().eval(&t.apply(y)?)?;
        }
        Ok(acc)
    }

    /// Analysis-form objective `f_1(T y) + f_2(y) + g_1(F y)` at an
    /// image-domain point (`+inf` outside the domains).
    pub fn objective_eval(&self, y: &Signal) -> Result<f64> {
        self.problem.objective(ProblemForm::Analysis, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dwt::WaveletPair;
    use crate::frame::{build_orthonormal_dwt, SemiOrthogonal};
    use crate::testutil::{lcg_signal, lcg_signal_2d};
    use crate::{FrameOperator, MimoFilter};

    fn identity_frame(shape: Shape) -> FrameOperator {
        FrameOperator::new(
            MimoFilter::identity(1, shape.rank()),
            SemiOrthogonal::Identity,
            1,
            shape,
        )
        .unwrap()
    }

    #[test]
    fn degrade_none_is_blur_exactly() {
        let y = lcg_signal_2d(6, 6, 1).map(|v| 10.0 + 3.0 * v);
        let blur = BlurOperator::uniform(3, 2).unwrap();
        let z = degrade(&y, &blur, &NoiseKind::None, 7).unwrap();
        assert_eq!(z, blur.apply(&y).unwrap());
    }

    #[test]
    fn degrade_poisson_zero_intensity_is_zero() {
        let y = Signal::new_2d(4, 4, vec![0.0; 16]).unwrap();
        let z = degrade(&y, &BlurOperator::none(2), &NoiseKind::poisson(0.1).unwrap(), 3).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degrade_poisson_sample_mean() {
        // constant 100, alpha = 0.1: mean 10 per pixel over 64^2 samples
        let y = Signal::new_2d(64, 64, vec![100.0; 64 * 64]).unwrap();
        let z = degrade(&y, &BlurOperator::none(2), &NoiseKind::poisson(0.1).unwrap(), 42).unwrap();
        let mean = z.values().iter().sum::<f64>() / z.len() as f64;
        let sigma = (10.0f64 / z.len() as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn degrade_rejects_negative_poisson_intensity() {
        let y = Signal::new_1d(vec![-1.0, 2.0]);
        let err = degrade(&y, &BlurOperator::none(1), &NoiseKind::poisson(1.0).unwrap(), 1);
        assert!(err.is_err());
    }

    #[test]
    fn degrade_deterministic_for_fixed_seed() {
        let y = lcg_signal_2d(8, 8, 4).map(|v| 50.0 + 20.0 * v);
        let n = NoiseKind::laplace(10.0).unwrap();
        let a = degrade(&y, &BlurOperator::uniform(3, 2).unwrap(), &n, 99).unwrap();
        let b = degrade(&y, &BlurOperator::uniform(3, 2).unwrap(), &n, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blur_adjoint_identity() {
        let blur = BlurOperator::uniform(5, 2).unwrap();
        let y = lcg_signal_2d(10, 10, 5);
        let u = lcg_signal_2d(10, 10, 6);
        let lhs = blur.apply(&y).unwrap().dot(&u);
        let rhs = y.dot(&blur.apply_adjoint(&u).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * (y.norm() * u.norm() + 1.0));
    }

    #[test]
    fn snr_definition() {
        let ybar = Signal::new_1d(vec![10.0, 0.0]);
        // error energy = reference energy / 100 -> 20 dB
        let y = Signal::new_1d(vec![10.0, 1.0]);
        assert!((snr(&ybar, &y).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(snr(&ybar, &ybar).unwrap(), f64::INFINITY);
        assert!(snr(&Signal::new_1d(vec![0.0]), &Signal::new_1d(vec![1.0])).is_err());
    }

    #[test]
    fn snr_invariant_under_orthonormal_transform() {
        let ybar = lcg_signal(16, 21).map(|v| v + 2.0);
        let y = lcg_signal(16, 22).map(|v| v + 2.0);
        let base = snr(&ybar, &y).unwrap();
        let pair = WaveletPair::haar();
        let f = build_orthonormal_dwt(pair, 2, Shape::One(16)).unwrap();
        let tb = f.analyze(&ybar).unwrap();
        let ty = f.analyze(&y).unwrap();
        assert!((snr(&tb, &ty).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn ssim_identical_images_is_one() {
        let img = lcg_signal_2d(16, 16, 8).map(|v| 128.0 + 60.0 * v);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn ssim_degrades_under_noise() {
        let img = lcg_signal_2d(16, 16, 9).map(|v| 128.0 + 40.0 * v);
        let noisy = degrade(
            &img,
            &BlurOperator::none(2),
            &NoiseKind::laplace_with_scale(1.0, 60.0).unwrap(),
            5,
        )
        .unwrap();
        let s = ssim(&img, &noisy).unwrap();
        assert!(s < 0.5, "ssim {s}");
        assert!(s > -1.0);
    }

    #[test]
    fn ssim_constant_shift_uses_means_only() {
        let img = Signal::new_2d(8, 8, vec![100.0; 64]).unwrap();
        let shifted = img.map(|v| v + 10.0);
        let c1 = (0.01 * 255.0) * (0.01 * 255.0);
        let want = (2.0 * 100.0 * 110.0 + c1) / (100.0 * 100.0 + 110.0 * 110.0 + c1);
        assert!((ssim(&img, &shifted).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn build_rejects_fractional_poisson_counts() {
        let z = Signal::new_1d(vec![1.5, 2.0, 0.0, 1.0]);
        let frame = identity_frame(Shape::One(4));
        let err = RestorationProblem::build(
            z,
            BlurOperator::none(1),
            frame,
            0.1,
            ProblemForm::Analysis,
            NoiseKind::poisson(0.1).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn zero_count_observation_builds_with_nonnegative_domain() {
        let z = Signal::new_1d(vec![0.0; 4]);
        let frame = identity_frame(Shape::One(4));
        let p = RestorationProblem::build(
            z,
            BlurOperator::none(1),
            frame,
            0.1,
            ProblemForm::Analysis,
            NoiseKind::poisson(0.5).unwrap(),
        )
        .unwrap();
        // zero-count potential: finite at 0 and above, infinite below
        assert_eq!(p.data_objective(&Signal::new_1d(vec![0.0; 4])).unwrap(), 0.0);
        assert_eq!(
            p.data_objective(&Signal::new_1d(vec![-1.0, 0.0, 0.0, 0.0])).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn objective_minimal_at_truth_for_noiseless_data() {
        // z = ybar (no blur, no noise), tiny tau: the objective at ybar
        // undercuts nearby probe points
        let ybar = lcg_signal(16, 44).map(|v| 100.0 + 30.0 * v);
        let frame = identity_frame(Shape::One(16));
        let p = RestorationProblem::build(
            ybar.clone(),
            BlurOperator::none(1),
            frame,
            1e-9,
            ProblemForm::Analysis,
            NoiseKind::None,
        )
        .unwrap();
        let at_truth = p.objective_eval(&ybar).unwrap();
        for seed in 0..8 {
            let probe = ybar.add(&lcg_signal(16, 800 + seed).scaled(5.0));
            assert!(p.objective_eval(&probe).unwrap() > at_truth);
        }
    }

    #[test]
    fn objective_infinite_outside_box() {
        let z = Signal::new_1d(vec![1.0, 2.0, 3.0, 4.0]);
        let frame = identity_frame(Shape::One(4));
        let p = RestorationProblem::build(
            z,
            BlurOperator::none(1),
            frame,
            0.1,
            ProblemForm::Analysis,
            NoiseKind::laplace(10.0).unwrap(),
        )
        .unwrap();
        let bad = Signal::new_1d(vec![1.0, 2.0, 3.0, 300.0]);
        assert_eq!(p.objective_eval(&bad).unwrap(), f64::INFINITY);
    }

    #[test]
    fn poisson_data_term_formula_at_rescaled_observation() {
        // with T = I and y = z / alpha the data term is
        // sum_k (-z_k ln(z_k / alpha) + z_k), empty sum over zero counts
        let alpha = 0.5;
        let z = Signal::new_1d(vec![3.0, 0.0, 5.0, 1.0]);
        let frame = identity_frame(Shape::One(4));
        let p = RestorationProblem::build(
            z.clone(),
            BlurOperator::none(1),
            frame,
            0.1,
            ProblemForm::Analysis,
            NoiseKind::poisson(alpha).unwrap(),
        )
        .unwrap();
        let y = z.scaled(1.0 / alpha);
        let got = p.data_objective(&y).unwrap();
        let want: f64 = z
            .values()
            .iter()
            .map(|&zk| if zk > 0.0 { -zk * (zk / alpha).ln() + zk } else { 0.0 })
            .sum();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn laplace_data_term_zero_at_exact_fit() {
        let ybar = lcg_signal(8, 30).map(|v| 100.0 + 10.0 * v);
        let blur = BlurOperator::uniform(3, 1).unwrap();
        let z = blur.apply(&ybar).unwrap();
        let frame = identity_frame(Shape::One(8));
        let p = RestorationProblem::build(
            z,
            blur,
            frame,
            0.1,
            ProblemForm::Analysis,
            NoiseKind::laplace(10.0).unwrap(),
        )
        .unwrap();
        assert!(p.data_objective(&ybar).unwrap().abs() < 1e-9);
    }

    #[test]
    fn sf_af_builders_share_data_terms() {
        let z = Signal::new_1d(vec![1.0, 2.0, 0.0, 3.0]);
        let frame = identity_frame(Shape::One(4));
        let sf = RestorationProblem::build(
            z.clone(),
            BlurOperator::none(1),
            frame.clone(),
            0.2,
            ProblemForm::Synthesis,
            NoiseKind::poisson(1.0).unwrap(),
        )
        .unwrap();
        let af = RestorationProblem::build(
            z,
            BlurOperator::none(1),
            frame,
            0.2,
            ProblemForm::Analysis,
            NoiseKind::poisson(1.0).unwrap(),
        )
        .unwrap();
        let y = lcg_signal(4, 3).map(|v| v.abs() + 0.5);
        assert_eq!(
            sf.data_objective(&y).unwrap(),
            af.data_objective(&y).unwrap()
        );
        assert_eq!(sf.form(), ProblemForm::Synthesis);
        assert_eq!(af.form(), ProblemForm::Analysis);
    }

    // Regenerates the committed demo fixture; run explicitly with
    // `cargo test -p framedeconv-core regenerate_fixture -- --ignored`.
    #[test]
    #[ignore]
    fn regenerate_fixture_image() {
        let img = piecewise_smooth_image(64, 64);
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/fixtures/piecewise64.pgm");
        crate::image_io::write_pgm(&path, &img).unwrap();
    }

    #[test]
    fn metrics_json_field_order_and_timing() {
        let m = Metrics { snr_db: 12.5, ssim: 0.75, iterations: 10, seconds: 3.25 };
        assert_eq!(
            m.to_json(false),
            r#"{"snr_db":12.5,"ssim":0.75,"iterations":10,"seconds":0.0}"#
        );
        assert!(m.to_json(true).contains("3.25"));
    }
}

//! Proximity operators used by the solvers, plus a brute-force scalar
//! oracle that serves as ground truth in the test suites.
//!
//! `prox_phi(v) = argmin_u 1/2 (u - v)^2 + phi(u)`; all catalog entries have
//! closed forms, including their `phi / eta` scalings.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::signal::{Shape, Signal};

/// Soft threshold `sign(xi) max(|xi| - alpha, 0)`, the prox of `alpha |.|`.
pub fn prox_soft_threshold(xi: f64, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Parameter(format!("soft threshold needs alpha > 0, got {}", alpha)));
    }
    Ok(soft(xi, alpha))
}

fn soft(xi: f64, alpha: f64) -> f64 {
    xi.signum() * (xi.abs() - alpha).max(0.0)
}

/// Prox of the Poisson minus log-likelihood potential
/// (`-chi ln(xi) + alpha xi` on its domain):
/// `(xi - alpha + sqrt((xi - alpha)^2 + 4 chi)) / 2`.
pub fn prox_poisson_nll(xi: f64, alpha: f64, chi: f64) -> Result<f64> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::Parameter(format!("Poisson prox needs alpha > 0, got {}", alpha)));
    }
    if chi < 0.0 || !chi.is_finite() {
        return Err(Error::Parameter(format!("Poisson prox needs chi >= 0, got {}", chi)));
    }
    Ok(poisson_prox(xi, alpha, chi))
}

fn poisson_prox(xi: f64, alpha: f64, chi: f64) -> f64 {
    let t = xi - alpha;
    0.5 * (t + (t * t + 4.0 * chi).sqrt())
}

/// Projection onto `[lo, hi]`, the prox of the box indicator.
pub fn prox_box(xi: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::Parameter(format!("empty box [{}, {}]", lo, hi)));
    }
    Ok(xi.clamp(lo, hi))
}

/// A per-coordinate convex potential from the solver catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarPotential {
    /// `weight * |u - shift|`.
    AbsShifted { weight: f64, shift: f64 },
    /// `-count ln(u) + weight u` for `count > 0, u > 0`;
    /// `weight u` for `count = 0, u >= 0`; `+inf` otherwise.
    PoissonNll { weight: f64, count: f64 },
    /// Indicator of `[lo, hi]`.
    BoxIndicator { lo: f64, hi: f64 },
}

impl ScalarPotential {
    pub fn abs_shifted(weight: f64, shift: f64) -> Result<ScalarPotential> {
        if weight <= 0.0 || !weight.is_finite() || !shift.is_finite() {
            return Err(Error::Parameter(format!(
                "shifted absolute value needs finite shift and weight > 0 (got {}, {})",
                weight, shift
            )));
        }
        Ok(ScalarPotential::AbsShifted { weight, shift })
    }

    pub fn poisson_nll(weight: f64, count: f64) -> Result<ScalarPotential> {
        if weight <= 0.0 || !weight.is_finite() {
            return Err(Error::Parameter(format!("Poisson potential needs weight > 0, got {}", weight)));
        }
        if count < 0.0 || !count.is_finite() {
            return Err(Error::Parameter(format!("Poisson potential needs count >= 0, got {}", count)));
        }
        Ok(ScalarPotential::PoissonNll { weight, count })
    }

    pub fn box_indicator(lo: f64, hi: f64) -> Result<ScalarPotential> {
        if lo > hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("empty or unbounded box [{}, {}]", lo, hi)));
        }
        Ok(ScalarPotential::BoxIndicator { lo, hi })
    }

    /// Extended-real evaluation (`+inf` outside the domain).
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ScalarPotential::AbsShifted { weight, shift } => weight * (u - shift).abs(),
            ScalarPotential::PoissonNll { weight, count } => {
                if count > 0.0 {
                    if u > 0.0 {
                        -count * u.ln() + weight * u
                    } else {
                        f64::INFINITY
                    }
                } else if u >= 0.0 {
                    weight * u
                } else {
                    f64::INFINITY
                }
            }
            ScalarPotential::BoxIndicator { lo, hi } => {
                if u >= lo && u <= hi {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Prox of `self / eta` at `xi`. Scaling divides the weight (and the
    /// Poisson count); the box projection is scale invariant.
    pub fn prox(&self, xi: f64, eta: f64) -> f64 {
        debug_assert!(eta > 0.0);
        match *self {
            ScalarPotential::AbsShifted { weight, shift } => {
                shift + soft(xi - shift, weight / eta)
            }
            ScalarPotential::PoissonNll { weight, count } => {
                poisson_prox(xi, weight / eta, count / eta)
            }
            ScalarPotential::BoxIndicator { lo, hi } => xi.clamp(lo, hi),
        }
    }

    /// Scaled potential `self / eta` as a value (used by the oracle tests).
    pub fn scaled(&self, eta: f64) -> Result<ScalarPotential> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::Parameter(format!("scale must be positive, got {}", eta)));
        }
        Ok(match *self {
            ScalarPotential::AbsShifted { weight, shift } => {
                ScalarPotential::AbsShifted { weight: weight / eta, shift }
            }
            ScalarPotential::PoissonNll { weight, count } => {
                ScalarPotential::PoissonNll { weight: weight / eta, count: count / eta }
            }
            ScalarPotential::BoxIndicator { lo, hi } => ScalarPotential::BoxIndicator { lo, hi },
        })
    }

    /// A bracket guaranteed to contain `prox_{self}(xi)`.
    fn oracle_bracket(&self, xi: f64) -> (f64, f64) {
        match *self {
            ScalarPotential::BoxIndicator { lo, hi } => (lo - 1.0, hi + 1.0),
            ScalarPotential::AbsShifted { weight, .. } => {
                // the prox moves xi by at most the weight
                (xi - 10.0 * weight - 10.0, xi + 10.0 * weight + 10.0)
            }
            ScalarPotential::PoissonNll { weight, count } => {
                // the positive root is at most max(xi - weight, 0) + sqrt(count)
                let hi = (xi - weight).max(0.0) + 2.0 * count.sqrt() + 1.0;
                (1e-12, hi.max(xi + 10.0))
            }
        }
    }
}

/// A coordinatewise convex function: one potential broadcast over every
/// coordinate, or an explicit per-coordinate list.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparableFunction {
    Broadcast(ScalarPotential),
    PerCoordinate(Vec<ScalarPotential>),
}

impl SeparableFunction {
    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            SeparableFunction::Broadcast(_) => Ok(()),
            SeparableFunction::PerCoordinate(ps) => {
                if ps.len() == n {
                    Ok(())
                } else {
                    Err(Error::Shape(format!(
                        "separable function over {} coordinates applied to {} values",
                        ps.len(),
                        n
                    )))
                }
            }
        }
    }

    pub fn potential_at(&self, k: usize) -> &ScalarPotential {
        match self {
            SeparableFunction::Broadcast(p) => p,
            SeparableFunction::PerCoordinate(ps) => &ps[k],
        }
    }

    /// Extended-real value `sum_k phi_k(v_k)`.
    pub fn eval(&self, v: &Signal) -> Result<f64> {
        self.check_len(v.len())?;
        let mut acc = 0.0;
        for (k, &u) in v.values().iter().enumerate() {
            acc += self.potential_at(k).eval(u);
            if acc == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
        }
        Ok(acc)
    }

    /// Coordinatewise prox of `self / eta`.
    pub fn prox(&self, v: &Signal, eta: f64) -> Result<Signal> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(Error::Parameter(format!("prox scale must be positive, got {}", eta)));
        }
        self.check_len(v.len())?;
        let vals = v
            .values()
            .iter()
            .enumerate()
            .map(|(k, &u)| self.potential_at(k).prox(u, eta))
            .collect();
        Signal::from_shape(v.shape(), vals)
    }
}

/// Brute-force scalar prox by golden-section search over a bracket that
/// provably contains the minimizer. Ground truth for the catalog tests.
pub fn prox_oracle(potential: &ScalarPotential, xi: f64, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::Parameter("oracle tolerance must be positive".into()));
    }
    let objective = |u: f64| 0.5 * (u - xi) * (u - xi) + potential.eval(u);
    let (mut lo, mut hi) = potential.oracle_bracket(xi);
    if lo >= hi {
        return Err(Error::Parameter("empty oracle bracket".into()));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = objective(a);
    let mut fb = objective(b);
    for _ in 0..400 {
        if hi - lo < tol {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Prox of `phi o L` for a linear operator with `L L^* = chi I`:
/// `v + chi^{-1} L^* (prox_{chi phi}(L v) - L v)`.
///
/// The identity is validated at construction by random probes of `L L^*`.
pub struct SemiOrthoComposition<F, A>
where
    F: Fn(&Signal) -> Result<Signal>,
    A: Fn(&Signal) -> Result<Signal>,
{
    forward: F,
    adjoint: A,
    chi: f64,
}

impl<F, A> SemiOrthoComposition<F, A>
where
    F: Fn(&Signal) -> Result<Signal>,
    A: Fn(&Signal) -> Result<Signal>,
{
    /// `codomain` is the shape of `L`'s output, probed with random vectors.
    pub fn new(forward: F, adjoint: A, chi: f64, codomain: Shape) -> Result<Self> {
        if chi <= 0.0 || !chi.is_finite() {
            return Err(Error::Parameter(format!("chi must be positive, got {}", chi)));
        }
        let comp = SemiOrthoComposition { forward, adjoint, chi };
        let mut rng = CounterRng::new(0xC0_FFEE);
        for _ in 0..3 {
            let u = Signal::from_shape(
                codomain,
                (0..codomain.len()).map(|_| rng.next_symmetric()).collect(),
            )?;
            let llstar = (comp.forward)(&(comp.adjoint)(&u)?)?;
            let resid = llstar.sub(&u.scaled(chi)).norm();
            if resid > 1e-8 * u.norm() {
                return Err(Error::CompositionUnsupported(format!(
                    "L L* differs from {} I on a random probe (residual {:.3e})",
                    chi, resid
                )));
            }
        }
        Ok(comp)
    }

    /// Applies the composition formula given the prox of `chi * phi`.
    pub fn prox(
        &self,
        prox_chi_phi: impl Fn(&Signal) -> Result<Signal>,
        v: &Signal,
    ) -> Result<Signal> {
        let lv = (self.forward)(v)?;
        let corrected = prox_chi_phi(&lv)?.sub(&lv);
        Ok(v.add(&(self.adjoint)(&corrected)?.scaled(1.0 / self.chi)))
    }
}

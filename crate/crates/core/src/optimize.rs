//! Box-constrained sequential quadratic programming.
//!
//! Each iteration solves the quadratic model
//!
//! ```text
//! min_d  ½ dᵀ B d + gᵀ d    subject to   lo - x <= d <= hi - x
//! ```
//!
//! with a primal active-set method (Cholesky on the free block), then backtracks along `d`
//! against the objective and updates `B` with a Powell-damped BFGS formula.
//! With bound constraints only, the merit function of the general method
//! reduces to the objective itself. Gradients come from forward finite
//! differences that never leave the box.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How a starting point outside the box is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundHandling {
    /// Clamp the starting point into the box.
    #[default]
    Project,
    /// Refuse a starting point outside the box.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub objective_tolerance: f64,
    pub bound_handling: BoundHandling,
    /// Finite-difference step per parameter.
    pub fd_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 200,
            objective_tolerance: 1e-8,
            bound_handling: BoundHandling::Project,
            fd_step: 1e-6,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidSettings("max_iterations must be positive".into()));
        }
        if !(self.objective_tolerance > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::InvalidSettings("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The last accepted step changed the objective by less than the tolerance.
    Tolerance,
    /// The projected quadratic model step vanished.
    Stationary,
    /// No sufficient decrease along a fresh steepest-descent model.
    LineSearchStalled,
    IterationLimit,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::Tolerance | Termination::Stationary)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

/// A scalar function of a parameter vector.
///
/// `gradient` defaults to forward differences; implementors with structure
/// (e.g. separable sums) may override it.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], fx: f64, bounds: &[(f64, f64)], step: f64, grad: &mut [f64]) {
        forward_difference(|x| self.value(x), x, fx, bounds, step, grad);
    }
}

impl<F: Fn(&[f64]) -> f64> Objective for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Forward-difference gradient; switches to a backward step where the forward
/// one would leave the box.
pub fn forward_difference<F: Fn(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    fx: f64,
    bounds: &[(f64, f64)],
    step: f64,
    grad: &mut [f64],
) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = if x[i] + step <= bounds[i].1 { step } else { -step };
        probe[i] = x[i] + h;
        grad[i] = (f(&probe) - fx) / h;
        probe[i] = x[i];
    }
}

struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    calls: Cell<usize>,
}

impl<O: Objective + ?Sized> Objective for Counted<'_, O> {
    fn value(&self, x: &[f64]) -> f64 {
        self.calls.set(self.calls.get() + 1);
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64], fx: f64, bounds: &[(f64, f64)], step: f64, grad: &mut [f64]) {
        self.calls.set(self.calls.get() + x.len());
        self.inner.gradient(x, fx, bounds, step, grad)
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

/// Minimizes `objective` over the box `bounds` starting from `x0`.
///
/// The returned point is inside the box and never worse than the (projected)
/// start. Identical inputs give bit-identical results.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    bounds: &[(f64, f64)],
    settings: &OptimizerSettings,
) -> Result<Minimum> {
    let mut x = starting_point(x0, bounds, settings)?;
    let n = x.len();
    let obj = Counted { inner: objective, calls: Cell::new(0) };
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { value: f });
    }
    let initial_value = f;
    let mut g = vec![0.0; n];
    obj.gradient(&x, f, bounds, settings.fd_step, &mut g);

    let mut b = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut first_update = true;
    let mut termination = Termination::IterationLimit;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];

    while iterations < settings.max_iterations {
        iterations += 1;
        let d = solve_box_qp(&b, &g, &x, bounds);
        let slope: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        let step_norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step_norm <= 1e-14 || slope >= 0.0 {
            if fresh {
                termination = Termination::Stationary;
                break;
            }
            b.fill_with_identity();
            fresh = true;
            first_update = true;
            continue;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = (x[i] + alpha * d[i]).clamp(bounds[i].0, bounds[i].1);
            }
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + ARMIJO * alpha * slope {
                accepted = Some(ft);
                break;
            }
            // Safeguarded quadratic interpolation of the step.
            let next = if ft.is_finite() {
                let denom = 2.0 * (ft - f - slope * alpha);
                if denom > 0.0 {
                    -slope * alpha * alpha / denom
                } else {
                    0.5 * alpha
                }
            } else {
                0.1 * alpha
            };
            alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
        }
        let Some(ft) = accepted else {
            if fresh {
                termination = Termination::LineSearchStalled;
                break;
            }
            b.fill_with_identity();
            fresh = true;
            first_update = true;
            continue;
        };

        obj.gradient(&trial, ft, bounds, settings.fd_step, &mut g_trial);
        let s = DVector::from_iterator(n, trial.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g_trial.iter().zip(&g).map(|(a, b)| a - b));
        if first_update {
            let sy = s.dot(&y);
            if sy > 0.0 {
                let scale = y.dot(&y) / sy;
                if scale.is_finite() && scale > 0.0 {
                    b.fill_with_identity();
                    b *= scale;
                }
            }
            first_update = false;
        }
        damped_bfgs_update(&mut b, &s, &y);
        fresh = false;

        let decrease = f - ft;
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        f = ft;
        if decrease < settings.objective_tolerance {
            termination = Termination::Tolerance;
            break;
        }
    }

    Ok(Minimum { x, value: f, initial_value, iterations, evaluations: obj.calls.get(), termination })
}

/// Validates settings and bounds and applies the bound handling to `x0`.
fn starting_point(x0: &[f64], bounds: &[(f64, f64)], settings: &OptimizerSettings) -> Result<Vec<f64>> {
    settings.validate()?;
    if bounds.len() != x0.len() {
        return Err(Error::ParamLength { got: bounds.len(), expected: x0.len() });
    }
    for (index, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo <= hi) {
            return Err(Error::OutOfBounds { index, value: f64::NAN, lo, hi });
        }
    }
    let mut x = x0.to_vec();
    for (index, (v, &(lo, hi))) in x.iter_mut().zip(bounds).enumerate() {
        if !(*v >= lo && *v <= hi) {
            if settings.bound_handling == BoundHandling::Reject || v.is_nan() {
                return Err(Error::OutOfBounds { index, value: *v, lo, hi });
            }
            *v = v.clamp(lo, hi);
        }
    }
    Ok(x)
}

/// Powell-damped BFGS update keeping `b` positive definite.
fn damped_bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) || !sbs.is_finite() {
        return;
    }
    let sy = s.dot(y);
    let r = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if !(sr > 0.0) || !sr.is_finite() {
        return;
    }
    b.ger(1.0 / sr, &r, &r, 1.0);
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
}

/// Penalty applied to the norm `s` of one residual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    /// `s` itself.
    Norm,
    /// `2·asin(s/2)`: the angle between two unit vectors whose difference has norm `s`.
    Chord,
}

impl Penalty {
    pub fn value(self, s: f64) -> f64 {
        match self {
            Penalty::Norm => s,
            Penalty::Chord => 2.0 * (0.5 * s).min(1.0).asin(),
        }
    }

    fn slope(self, s: f64) -> f64 {
        match self {
            Penalty::Norm => 1.0,
            Penalty::Chord => {
                let h = (0.5 * s).min(0.999);
                1.0 / (1.0 - h * h).sqrt()
            }
        }
    }
}

/// One group of consecutive residuals sharing a weight and a penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub len: usize,
    pub weight: f64,
    pub penalty: Penalty,
}

/// Objective `Σ_b weight_b · penalty_b(‖r_b(x)‖)` over smooth residual blocks `r_b`.
///
/// Sums of link angles and of absolute parameter differences both take this
/// form; the norms are non-smooth where a block vanishes but the residuals
/// themselves are smooth, which [`minimize_residuals`] exploits.
pub trait ResidualObjective {
    fn blocks(&self) -> &[Block];

    /// Writes every residual at `x`, block after block; `false` if `x` cannot be evaluated.
    fn residuals(&self, x: &[f64], out: &mut [f64]) -> bool;

    /// Residual Jacobian at `x` (`r` holds the residuals there). Returns the
    /// number of residual evaluations spent.
    fn jacobian(&self, x: &[f64], r: &[f64], bounds: &[(f64, f64)], step: f64, jac: &mut DMatrix<f64>) -> usize {
        let mut probe = x.to_vec();
        let mut shifted = vec![0.0; r.len()];
        for j in 0..x.len() {
            let h = if x[j] + step <= bounds[j].1 { step } else { -step };
            probe[j] = x[j] + h;
            self.residuals(&probe, &mut shifted);
            for (i, (a, b)) in shifted.iter().zip(r).enumerate() {
                jac[(i, j)] = (a - b) / h;
            }
            probe[j] = x[j];
        }
        x.len()
    }

    fn residual_len(&self) -> usize {
        self.blocks().iter().map(|b| b.len).sum()
    }
}

/// Objective value of the residual vector `r` laid out as `blocks`.
pub fn residual_value(blocks: &[Block], r: &[f64]) -> f64 {
    let mut offset = 0;
    let mut total = 0.0;
    for b in blocks {
        let s = r[offset..offset + b.len].iter().map(|v| v * v).sum::<f64>().sqrt();
        total += b.weight * b.penalty.value(s);
        offset += b.len;
    }
    total
}

const SMOOTHING_START: f64 = 1e-2;
const SMOOTHING_FLOOR: f64 = 1e-10;
const SMOOTHING_DECAY: f64 = 0.25;
const MAX_DAMPING_TRIALS: usize = 12;
/// Absolute ridge relative to the largest curvature; keeps directions the
/// residuals do not see (null space of `JᵀWJ`) from absorbing gradient noise.
const NULL_SPACE_RIDGE: f64 = 1e-4;

/// Minimizes a [`ResidualObjective`] over the box `bounds` starting from `x0`.
///
/// Each iteration linearizes the residuals and weights every block by
/// `weight · penalty'(s) / max(s, ε)`, turning the objective into a
/// Levenberg-damped bound-constrained least-squares subproblem solved by the
/// same active-set QP as [`minimize`]. The floor `ε` shrinks geometrically, so
/// early iterations see a smoothed objective and later ones the exact kinks.
/// Steps are accepted only if they lower the true objective, so the returned
/// point is inside the box and never worse than the (projected) start.
pub fn minimize_residuals<O: ResidualObjective + ?Sized>(
    objective: &O,
    x0: &[f64],
    bounds: &[(f64, f64)],
    settings: &OptimizerSettings,
) -> Result<Minimum> {
    let mut x = starting_point(x0, bounds, settings)?;
    let n = x.len();
    let blocks = objective.blocks();
    let rows = objective.residual_len();
    let mut r = vec![0.0; rows];
    let mut evaluations = 1;
    let mut f = if objective.residuals(&x, &mut r) { residual_value(blocks, &r) } else { f64::NAN };
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { value: f });
    }
    let initial_value = f;

    let mut jac = DMatrix::<f64>::zeros(rows, n);
    let mut weighted = DMatrix::<f64>::zeros(rows, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; rows];
    let mut eps = SMOOTHING_START;
    let mut damping = 1e-6;
    let mut termination = Termination::IterationLimit;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        iterations += 1;
        evaluations += objective.jacobian(&x, &r, bounds, settings.fd_step, &mut jac);

        // Rows scaled by the square root of the block weights give B = JᵀWJ, g = JᵀWr.
        let mut g = DVector::<f64>::zeros(n);
        // Ridge scale from the block weights alone; the IRLS factor 1/s grows without bound near exact fits.
        let mut column_scale = vec![0.0f64; n];
        let mut offset = 0;
        for b in blocks {
            let rows_b = offset..offset + b.len;
            let s = r[rows_b.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = b.weight * b.penalty.slope(s) / s.max(eps);
            let root = alpha.sqrt();
            for i in rows_b {
                for j in 0..n {
                    weighted[(i, j)] = root * jac[(i, j)];
                }
                for j in 0..n {
                    g[j] += alpha * jac[(i, j)] * r[i];
                    column_scale[j] += b.weight * jac[(i, j)] * jac[(i, j)];
                }
            }
            offset += b.len;
        }
        let hessian = weighted.tr_mul(&weighted);
        let diag_scale = column_scale.iter().copied().fold(0.0f64, f64::max).max(1e-300);
        let g_slice: Vec<f64> = g.iter().copied().collect();

        let mut accepted = None;
        for _ in 0..MAX_DAMPING_TRIALS {
            let mut damped = hessian.clone();
            for i in 0..n {
                damped[(i, i)] += damping * hessian[(i, i)] + NULL_SPACE_RIDGE * diag_scale;
            }
            let d = solve_box_qp(&damped, &g_slice, &x, bounds);
            let dv = DVector::from_column_slice(&d);
            let predicted = -(g.dot(&dv) + 0.5 * dv.dot(&(&damped * &dv)));
            if !(predicted > 0.0) || d.iter().all(|v| v.abs() <= 1e-15) {
                break;
            }
            for i in 0..n {
                trial[i] = (x[i] + d[i]).clamp(bounds[i].0, bounds[i].1);
            }
            evaluations += 1;
            let ft =
                if objective.residuals(&trial, &mut r_trial) { residual_value(blocks, &r_trial) } else { f64::NAN };
            if ft.is_finite() && ft < f {
                let ratio = (f - ft) / predicted;
                if ratio > 0.75 {
                    damping = (damping / 4.0).max(1e-12);
                } else if ratio < 0.25 {
                    damping *= 2.0;
                }
                accepted = Some(ft);
                break;
            }
            damping = (damping * 8.0).max(1e-6);
        }

        let at_floor = eps <= SMOOTHING_FLOOR;
        eps = (eps * SMOOTHING_DECAY).max(SMOOTHING_FLOOR);
        let Some(ft) = accepted else {
            if at_floor {
                termination = Termination::Stationary;
                break;
            }
            damping = 1e-6;
            continue;
        };
        let decrease = f - ft;
        x.copy_from_slice(&trial);
        r.copy_from_slice(&r_trial);
        f = ft;
        if at_floor && decrease < settings.objective_tolerance {
            termination = Termination::Tolerance;
            break;
        }
    }

    Ok(Minimum { x, value: f, initial_value, iterations, evaluations, termination })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    Free,
    Lower,
    Upper,
}

/// Solves `min ½dᵀBd + gᵀd` over `lo - x <= d <= hi - x` for positive definite `B`.
fn solve_box_qp(b: &DMatrix<f64>, g: &[f64], x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    let n = g.len();
    let lo: Vec<f64> = (0..n).map(|i| bounds[i].0 - x[i]).collect();
    let hi: Vec<f64> = (0..n).map(|i| bounds[i].1 - x[i]).collect();
    let mut d = vec![0.0; n];
    let mut state: Vec<VarState> = (0..n)
        .map(|i| {
            if lo[i] >= 0.0 && g[i] > 0.0 {
                VarState::Lower
            } else if hi[i] <= 0.0 && g[i] < 0.0 {
                VarState::Upper
            } else {
                VarState::Free
            }
        })
        .collect();
    for i in 0..n {
        if lo[i] == hi[i] {
            state[i] = VarState::Lower;
            d[i] = lo[i];
        }
    }

    for _ in 0..(4 * n + 10) {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == VarState::Free).collect();
        let target = if free.is_empty() {
            Vec::new()
        } else {
            // Reduced system on the free variables with the fixed ones held at their bounds.
            let k = free.len();
            let mut h = DMatrix::<f64>::zeros(k, k);
            let mut rhs = DVector::<f64>::zeros(k);
            for (a, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    h[(a, c)] = b[(i, j)];
                }
                let mut r = -g[i];
                for j in 0..n {
                    if state[j] != VarState::Free {
                        r -= b[(i, j)] * d[j];
                    }
                }
                rhs[a] = r;
            }
            solve_spd(h, rhs)
        };

        // Walk from the current point toward the reduced minimizer until a bound blocks.
        let mut t = 1.0;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            let delta = target[a] - d[i];
            if delta < 0.0 && target[a] < lo[i] {
                let ti = (lo[i] - d[i]) / delta;
                if ti < t {
                    t = ti.max(0.0);
                    blocking = Some((i, VarState::Lower));
                }
            } else if delta > 0.0 && target[a] > hi[i] {
                let ti = (hi[i] - d[i]) / delta;
                if ti < t {
                    t = ti.max(0.0);
                    blocking = Some((i, VarState::Upper));
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            d[i] += t * (target[a] - d[i]);
            d[i] = d[i].clamp(lo[i], hi[i]);
        }
        if let Some((i, s)) = blocking {
            state[i] = s;
            d[i] = if s == VarState::Lower { lo[i] } else { hi[i] };
            continue;
        }

        // Multipliers of the fixed variables: release the most violated one.
        let mut worst = None;
        let mut worst_val = 1e-14;
        for i in 0..n {
            if lo[i] == hi[i] || state[i] == VarState::Free {
                continue;
            }
            let q: f64 = g[i] + (0..n).map(|j| b[(i, j)] * d[j]).sum::<f64>();
            let violation = match state[i] {
                VarState::Lower => -q,
                VarState::Upper => q,
                VarState::Free => 0.0,
            };
            if violation > worst_val {
                worst_val = violation;
                worst = Some(i);
            }
        }
        match worst {
            Some(i) => state[i] = VarState::Free,
            None => break,
        }
    }
    d
}

fn solve_spd(h: DMatrix<f64>, rhs: DVector<f64>) -> Vec<f64> {
    let k = h.nrows();
    let mut ridge = 0.0;
    let scale = (0..k).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    loop {
        let mut m = h.clone();
        for i in 0..k {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(&rhs).iter().copied().collect();
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
}

//! Convex QP over a product of capped simplices.
//!
//! Each CCCP step minimizes `f(z) = zᵀQ1z − 2bᵀz` subject to
//! `Σ_{t∈video i} z_t = s` and `0 ≤ z ≤ 1`, where `b = Q2 z_anchor`. The
//! feasible set splits per video, so projected gradient with an exact
//! capped-simplex projection handles it without a general QP solver.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variance::{dot, Coeffs, GramOperators, Hyperparams, SelectionState};

/// Absolute tolerance on the bisection variable.
pub const BISECTION_TOL: f64 = 1e-12;
pub const BISECTION_MAX_ITERS: usize = 200;
/// Returned when the operator looks like zero.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;
const STALL_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `1/L` from a power-iteration estimate of the gradient's Lipschitz
    /// constant. If a sufficient-decrease check ever fails, `L` is doubled.
    Lipschitz,
    /// Start from a small `L` and double it until sufficient decrease holds.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    pub max_iters: usize,
    /// Stop once `L·‖x − P(x − ∇f(x)/L)‖` falls below this.
    pub grad_map_tol: f64,
    /// Stop once an accepted step improves `f` by less than
    /// `obj_rel_tol·(1 + |f|)`. Only used without acceleration.
    pub obj_rel_tol: f64,
    pub step_rule: StepRule,
    /// Monotone FISTA when true, plain projected gradient otherwise.
    pub accelerated: bool,
    pub power_iters: usize,
    pub safety: f64,
    pub seed: u64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_map_tol: 1e-6,
            obj_rel_tol: 1e-8,
            step_rule: StepRule::Lipschitz,
            accelerated: true,
            power_iters: 50,
            safety: 1.1,
            seed: 0,
        }
    }
}

impl QpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("qp max_iters must be >= 1".into()));
        }
        if !(self.grad_map_tol > 0.0 && self.obj_rel_tol > 0.0) {
            return Err(Error::InvalidParameter("qp tolerances must be > 0".into()));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::InvalidParameter("lipschitz safety factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// A symmetric linear operator.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
}

/// A combination of the Gram operators, e.g. `Q1`.
pub struct GramCombination<'o, 'c> {
    pub ops: &'o GramOperators<'c>,
    pub coeffs: Coeffs,
}

impl LinearOperator for GramCombination<'_, '_> {
    fn dim(&self) -> usize {
        self.ops.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.ops.apply_into(self.coeffs, x, out)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Euclidean projection onto `{z : Σz = s, 0 ≤ z ≤ 1}`.
pub fn project_capped_simplex(v: &[f64], s: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    project_capped_simplex_into(v, s, &mut out)?;
    Ok(out)
}

pub fn project_capped_simplex_into(v: &[f64], s: usize, out: &mut [f64]) -> Result<()> {
    let t = v.len();
    if s == 0 || s > t {
        return Err(Error::InvalidParameter(format!(
            "capped simplex needs 1 <= s <= T, got s={s}, T={t}"
        )));
    }
    assert_eq!(out.len(), t);
    let target = s as f64;
    if s == t {
        out.fill(1.0);
        return Ok(());
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| (0.0..=1.0).contains(&x)) && (sum - target).abs() <= 1e-12 * t as f64 {
        out.copy_from_slice(v);
        return Ok(());
    }

    let mass = |theta: f64| -> f64 { v.iter().map(|&x| (x - theta).clamp(0.0, 1.0)).sum() };
    let (mut lo, mut hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // mass(lo - 1) = T >= s and mass(hi) = 0 < s.
    lo -= 1.0;
    for _ in 0..BISECTION_MAX_ITERS {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);

    // On the bracketing segment the mass is affine in theta; solve it exactly.
    let (mut free_sum, mut free, mut ones) = (0.0, 0usize, 0usize);
    for &x in v {
        let y = x - theta;
        if y >= 1.0 {
            ones += 1;
        } else if y > 0.0 {
            free_sum += x;
            free += 1;
        }
    }
    if free > 0 {
        let exact = (free_sum - (target - ones as f64)) / free as f64;
        if (exact - theta).abs() <= 2.0 * BISECTION_TOL {
            theta = exact;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).clamp(0.0, 1.0);
    }
    Ok(())
}

/// Projects every video slice of `v` independently.
pub fn project_product(v: &[f64], offsets: &[usize], s: usize, out: &mut [f64]) -> Result<()> {
    for w in offsets.windows(2) {
        project_capped_simplex_into(&v[w[0]..w[1]], s, &mut out[w[0]..w[1]])?;
    }
    Ok(())
}

/// Power-iteration estimate of the largest eigenvalue of a PSD operator,
/// times `safety`. Never below the final Rayleigh quotient and never below
/// [`LIPSCHITZ_FLOOR`].
pub fn lipschitz_estimate(op: &dyn LinearOperator, iters: usize, safety: f64, seed: u64) -> f64 {
    let n = op.dim();
    if n == 0 {
        return LIPSCHITZ_FLOOR;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut av = vec![0.0; n];
    let mut rayleigh: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return LIPSCHITZ_FLOOR;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        op.apply_into(&v, &mut av);
        rayleigh = rayleigh.max(dot(&v, &av));
        std::mem::swap(&mut v, &mut av);
    }
    (rayleigh * safety).max(rayleigh).max(LIPSCHITZ_FLOOR)
}

/// `minimize zᵀQ1z − 2bᵀz` over the product of per-video capped simplices.
pub struct QpProblem<'a> {
    pub q1: &'a dyn LinearOperator,
    pub linear: Vec<f64>,
    pub offsets: &'a [usize],
    pub s: usize,
}

#[derive(Debug, Clone)]
pub struct QpOutcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_map_norm: f64,
    /// Lipschitz constant of the gradient in use at exit.
    pub lipschitz: f64,
    /// `f` at the start point followed by `f` after every iteration.
    pub history: Vec<f64>,
}

impl QpProblem<'_> {
    pub fn value(&self, z: &[f64]) -> f64 {
        let mut q = vec![0.0; z.len()];
        self.q1.apply_into(z, &mut q);
        self.value_with(z, &q)
    }

    fn value_with(&self, z: &[f64], q1z: &[f64]) -> f64 {
        dot(z, q1z) - 2.0 * dot(&self.linear, z)
    }

    fn gradient(&self, q1z: &[f64], out: &mut [f64]) {
        for ((g, q), b) in out.iter_mut().zip(q1z).zip(&self.linear) {
            *g = 2.0 * q - 2.0 * b;
        }
    }

    /// Lipschitz constant of `∇f = 2Q1z − 2b`.
    pub fn gradient_lipschitz(&self, opts: &QpOptions) -> f64 {
        2.0 * lipschitz_estimate(self.q1, opts.power_iters, opts.safety, opts.seed)
    }

    /// Projected gradient from a feasible `start`. `lipschitz` overrides the
    /// power-iteration estimate for [`StepRule::Lipschitz`].
    pub fn solve(&self, start: &[f64], opts: &QpOptions, lipschitz: Option<f64>) -> Result<QpOutcome> {
        opts.validate()?;
        let n = self.q1.dim();
        if start.len() != n || self.linear.len() != n || *self.offsets.last().unwrap_or(&0) != n {
            return Err(Error::ShapeMismatch("qp problem dimensions disagree".into()));
        }
        let mut lip = match opts.step_rule {
            StepRule::Lipschitz => lipschitz.unwrap_or_else(|| self.gradient_lipschitz(opts)),
            StepRule::Backtracking => 1e-3,
        }
        .max(LIPSCHITZ_FLOOR);

        let mut x = vec![0.0; n];
        project_product(start, self.offsets, self.s, &mut x)?;
        let mut qx = vec![0.0; n];
        self.q1.apply_into(&x, &mut qx);
        let mut fx = self.value_with(&x, &qx);
        let mut history = vec![fx];

        let mut y = x.clone();
        let mut qy = qx.clone();
        let mut fy = fx;
        let mut momentum = 1.0_f64;

        let mut grad = vec![0.0; n];
        let mut step = vec![0.0; n];
        let mut zc = vec![0.0; n];
        let mut qz = vec![0.0; n];
        let mut proj = vec![0.0; n];
        let mut prev_x = vec![0.0; n];
        let mut prev_qx = vec![0.0; n];
        let mut grad_map = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;

        // true while y coincides with x, so the candidate is a plain
        // projected-gradient step from the best point
        let mut at_best = true;
        while iterations < opts.max_iters {
            iterations += 1;
            self.gradient(&qy, &mut grad);
            for ((st, yv), g) in step.iter_mut().zip(&y).zip(&grad) {
                *st = yv - g / lip;
            }
            project_product(&step, self.offsets, self.s, &mut zc)?;
            self.q1.apply_into(&zc, &mut qz);
            let fz = self.value_with(&zc, &qz);

            // Sufficient decrease: f(zc) <= f(y) + <∇f(y), zc - y> + L/2 ‖zc - y‖².
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((zv, yv), g) in zc.iter().zip(&y).zip(&grad) {
                let d = zv - yv;
                lin += g * d;
                sq += d * d;
            }
            let bound = fy + lin + 0.5 * lip * sq;
            if fz > bound + 1e-12 * (1.0 + fy.abs()) && sq > 0.0 {
                lip *= 2.0;
                log::debug!("qp: sufficient decrease failed, L -> {lip:e}");
                history.push(fx);
                continue;
            }

            let accepted = fz <= fx;
            let improvement = fx - fz;
            if accepted {
                prev_x.copy_from_slice(&x);
                prev_qx.copy_from_slice(&qx);
                x.copy_from_slice(&zc);
                qx.copy_from_slice(&qz);
                fx = fz;
            }
            history.push(fx);

            // Gradient mapping at the current best point.
            grad_map = if !opts.accelerated && accepted {
                lip * sq.sqrt()
            } else {
                self.gradient(&qx, &mut grad);
                for ((st, xv), g) in step.iter_mut().zip(&x).zip(&grad) {
                    *st = xv - g / lip;
                }
                project_product(&step, self.offsets, self.s, &mut proj)?;
                lip * x.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            };
            if grad_map <= opts.grad_map_tol {
                converged = true;
                break;
            }
            if !opts.accelerated && accepted && improvement <= opts.obj_rel_tol * (1.0 + fx.abs()) {
                converged = true;
                break;
            }
            // A plain step from the best point that cannot lower f by more
            // than rounding noise: f is stationary to working precision even
            // if the gradient mapping sits just above its tolerance.
            if at_best && improvement <= STALL_ULPS * f64::EPSILON * (1.0 + fx.abs()) {
                converged = true;
                break;
            }

            if opts.accelerated && accepted {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                let beta = (momentum - 1.0) / next;
                // The candidate became x, so the extrapolation is x + beta (x - x_prev).
                for i in 0..n {
                    y[i] = x[i] + beta * (x[i] - prev_x[i]);
                    qy[i] = qx[i] + beta * (qx[i] - prev_qx[i]);
                }
                momentum = next;
                fy = self.value_with(&y, &qy);
                at_best = beta == 0.0;
            } else {
                // Plain step, or a rejected candidate: restart from the best point.
                momentum = 1.0;
                y.copy_from_slice(&x);
                qy.copy_from_slice(&qx);
                fy = fx;
                at_best = true;
            }
        }
        if !converged {
            log::warn!("qp: no convergence after {iterations} iterations (grad map {grad_map:e})");
        }
        Ok(QpOutcome {
            z: x,
            objective: fx,
            iterations,
            converged,
            grad_map_norm: grad_map,
            lipschitz: lip,
            history,
        })
    }
}

/// One CCCP inner solve: minimize `ẑᵀQ1ẑ − 2 z_anchorᵀQ2ẑ`, warm-started
/// from the anchor.
pub fn solve_qp(
    ops: &GramOperators<'_>,
    hp: &Hyperparams,
    z_anchor: &SelectionState,
    opts: &QpOptions,
) -> Result<QpOutcome> {
    solve_qp_with_lipschitz(ops, hp, z_anchor, opts, None)
}

pub(crate) fn solve_qp_with_lipschitz(
    ops: &GramOperators<'_>,
    hp: &Hyperparams,
    z_anchor: &SelectionState,
    opts: &QpOptions,
    lipschitz: Option<f64>,
) -> Result<QpOutcome> {
    let q1 = GramCombination {
        ops,
        coeffs: Coeffs::convex_part(hp),
    };
    let linear = ops.apply(Coeffs::concave_part(hp), z_anchor.as_slice());
    let problem = QpProblem {
        q1: &q1,
        linear,
        offsets: ops.corpus().offsets(),
        s: ops.s(),
    };
    problem.solve(z_anchor.as_slice(), opts, lipschitz)
}

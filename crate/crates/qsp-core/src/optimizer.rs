//! Phase-factor solvers on top of the least-squares objective: a projected
//! gradient descent whose step size, ball radius, and stopping rule realize
//! the provable local-convergence regime, and a limited-memory quasi-Newton
//! mode for targets outside that regime.
//!
//! The guarantee regime: when the target satisfies the norm condition
//! max |f| <= sqrt(3)/(20 pi d_tilde), the objective is strongly convex with
//! parameter sigma = 1/4 and smooth with parameter L = 25/4 inside the ball
//! of radius 1/(20 d_tilde) around the starting point (pi/4, 0, ..., 0), and
//! gradient descent with step 1/L projected onto that ball contracts the
//! squared distance to the minimizer by (1 - sigma/L) per step. The solver
//! records enough of the trajectory to check all of that after the fact.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::objective::ObjectiveContext;
use crate::qsp::ReducedPhases;

/// Strong-convexity constant sigma of the objective in the guarantee regime.
pub const STRONG_CONVEXITY: f64 = 0.25;

/// Smoothness (gradient Lipschitz) constant L in the guarantee regime.
pub const SMOOTHNESS: f64 = 25.0 / 4.0;

/// Largest target sup-norm for which the local strong-convexity guarantee
/// applies: sqrt(3) / (20 pi d_tilde).
pub fn norm_condition_threshold(d_tilde: usize) -> f64 {
    3f64.sqrt() / (20.0 * std::f64::consts::PI * d_tilde as f64)
}

/// Radius of the guarantee ball around the starting point.
pub fn guarantee_ball_radius(d_tilde: usize) -> f64 {
    1.0 / (20.0 * d_tilde as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    ProjectedGd,
    QuasiNewton,
}

/// Solver settings. `step_size` and `ball_radius` default (when `None`) to
/// the guarantee values 1/L and 1/(20 d_tilde); the ball default applies
/// only while the norm condition actually holds — outside the guarantee
/// regime there is no basis for the constraint and the default is
/// unconstrained descent (an explicit `ball_radius` is always honored).
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Stop when the cost drops to or below this value.
    pub epsilon: f64,
    pub max_iters: usize,
    pub step_size: Option<f64>,
    pub ball_radius: Option<f64>,
    /// Refuse targets that violate the norm condition (projected GD default).
    pub enforce_norm_condition: bool,
    /// Quasi-Newton history length.
    pub memory: usize,
    /// Sufficient-decrease constant for backtracking line search.
    pub armijo_c: f64,
    /// Step shrink factor for backtracking line search.
    pub backtrack: f64,
}

impl SolverConfig {
    pub fn projected_gd() -> Self {
        Self {
            mode: SolverMode::ProjectedGd,
            epsilon: 1e-12,
            max_iters: 100_000,
            step_size: None,
            ball_radius: None,
            enforce_norm_condition: true,
            memory: 10,
            armijo_c: 1e-4,
            backtrack: 0.5,
        }
    }

    pub fn quasi_newton() -> Self {
        Self {
            mode: SolverMode::QuasiNewton,
            enforce_norm_condition: false,
            ..Self::projected_gd()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0) {
                return Err(Error::InvalidInput("step_size must be positive".into()));
            }
        }
        if let Some(r) = self.ball_radius {
            if !(r > 0.0) {
                return Err(Error::InvalidInput("ball_radius must be positive".into()));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidInput(
                "backtrack factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidInput(
                "sufficient-decrease constant must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub dist_to_phi0: f64,
    pub projected: bool,
}

/// Post-run guarantee checks. `None` means not applicable for the mode or
/// not evaluable (e.g. the rate check on a run that never converged).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Certificate {
    pub norm_condition_met: Option<bool>,
    pub stayed_in_ball: Option<bool>,
    pub rate_bound_satisfied: Option<bool>,
}

/// A finished (or aborted) solve: the phases reached, the cost there, and
/// the per-iteration trace. Costs in the trace are the recorded values —
/// projection steps may deviate from monotone descent and are reported as
/// they happened.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub phases: ReducedPhases,
    pub final_cost: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub certificate: Certificate,
}

/// Euclidean projection onto the closed ball of the given radius around
/// `center`: points inside are untouched, points outside map to the nearest
/// sphere point along the ray from the center.
pub fn project_ball(r: &ReducedPhases, center: &ReducedPhases, radius: f64) -> ReducedPhases {
    debug_assert_eq!(r.d_tilde(), center.d_tilde());
    let dist = r.distance(center);
    if dist <= radius {
        return r.clone();
    }
    let scale = radius / dist;
    let phases = r
        .phases()
        .iter()
        .zip(center.phases())
        .map(|(p, c)| c + (p - c) * scale)
        .collect();
    ReducedPhases::new(phases, r.parity()).expect("projection preserves shape")
}

fn dist_to(phases: &[f64], other: &[f64]) -> f64 {
    phases
        .iter()
        .zip(other)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Dispatch on the configured mode.
pub fn solve(ctx: &ObjectiveContext, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.mode {
        SolverMode::ProjectedGd => solve_projected_gd(ctx, cfg),
        SolverMode::QuasiNewton => solve_quasi_newton(ctx, cfg),
    }
}

/// Gradient descent with fixed step projected onto the guarantee ball,
/// started from (pi/4, 0, ..., 0).
pub fn solve_projected_gd(ctx: &ObjectiveContext, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let d_tilde = ctx.d_tilde();
    let threshold = norm_condition_threshold(d_tilde);
    let max_norm = ctx.target().max_norm_estimate().value;
    let norm_condition_met = max_norm <= threshold;
    if cfg.enforce_norm_condition && !norm_condition_met {
        return Err(Error::InvalidTarget(format!(
            "target sup norm {max_norm:.6e} exceeds the guarantee threshold \
             {threshold:.6e} = sqrt(3)/(20 pi d_tilde) for d_tilde = {d_tilde}; \
             rerun with the condition unenforced or use the quasi-Newton mode"
        )));
    }
    let step = cfg.step_size.unwrap_or(1.0 / SMOOTHNESS);
    // The ball constraint backs the convergence guarantee; with the norm
    // condition violated (and no explicit radius) the minimizer may well lie
    // outside the default ball, so the run is unconstrained.
    let radius = cfg.ball_radius.unwrap_or(if norm_condition_met {
        guarantee_ball_radius(d_tilde)
    } else {
        f64::INFINITY
    });

    let phi0 = ctx.initial_phases();
    let mut phases = phi0.clone();
    let (mut cost, mut grad) = ctx.cost_and_gradient(&phases)?;
    let mut trace = vec![IterationRecord {
        iter: 0,
        cost,
        dist_to_phi0: 0.0,
        projected: false,
    }];
    let mut iterates: Vec<Vec<f64>> = vec![phases.phases().to_vec()];

    let mut converged = cost <= cfg.epsilon;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let stepped: Vec<f64> = phases
            .phases()
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - step * g)
            .collect();
        let candidate = ReducedPhases::new(stepped, phases.parity())?;
        let projected = candidate.distance(&phi0) > radius;
        phases = if projected {
            project_ball(&candidate, &phi0, radius)
        } else {
            candidate
        };
        let (c, g) = ctx.cost_and_gradient(&phases)?;
        cost = c;
        grad = g;
        trace.push(IterationRecord {
            iter: iterations,
            cost,
            dist_to_phi0: phases.distance(&phi0),
            projected,
        });
        iterates.push(phases.phases().to_vec());
        converged = cost <= cfg.epsilon;
    }

    let stayed_in_ball = trace
        .iter()
        .all(|rec| rec.dist_to_phi0 <= radius + 1e-14);
    let rate_bound_satisfied = converged.then(|| {
        // Squared distance to the converged point must decay at least as
        // fast as e^{-(sigma/L) l} from its initial value, at every l.
        let last = iterates.last().unwrap();
        let initial_sq = {
            let d = dist_to(&iterates[0], last);
            d * d
        };
        iterates.iter().enumerate().all(|(l, it)| {
            let d = dist_to(it, last);
            let bound = (-(STRONG_CONVEXITY / SMOOTHNESS) * l as f64).exp() * initial_sq;
            d * d <= bound * (1.0 + 1e-12) + 1e-28
        })
    });

    let report = SolveReport {
        phases,
        final_cost: cost,
        iterations,
        trace,
        certificate: Certificate {
            norm_condition_met: Some(norm_condition_met),
            stayed_in_ball: Some(stayed_in_ball),
            rate_bound_satisfied,
        },
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence {
            iterations,
            cost,
            report: Box::new(report),
        })
    }
}

/// Stopping rule for the quasi-Newton core.
#[derive(Clone, Copy, Debug)]
pub(crate) enum StopRule {
    CostBelow(f64),
    GradNormBelow(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TermReason {
    Converged,
    MaxIters,
    LineSearchStalled,
}

#[derive(Clone, Debug)]
pub(crate) struct LbfgsOutcome {
    pub phases: ReducedPhases,
    pub cost: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub reason: TermReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion: apply the implicit inverse-Hessian approximation to
/// the gradient and negate, yielding the search direction.
fn lbfgs_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Limited-memory quasi-Newton descent with backtracking line search, from
/// an arbitrary starting point. Shared by the solver front end and the
/// landscape probes (which need stationary points that are not minima of
/// cost zero, hence the gradient-norm stopping variant).
pub(crate) fn lbfgs(
    ctx: &ObjectiveContext,
    start: &ReducedPhases,
    cfg: &SolverConfig,
    stop: StopRule,
) -> Result<LbfgsOutcome> {
    cfg.validate()?;
    let phi0 = start.clone();
    let mut x = start.clone();
    let (mut cost, mut grad) = ctx.cost_and_gradient(&x)?;
    let mut grad_norm = dot(&grad, &grad).sqrt();
    let mut trace = vec![IterationRecord {
        iter: 0,
        cost,
        dist_to_phi0: 0.0,
        projected: false,
    }];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    let stop_met = |cost: f64, grad_norm: f64| match stop {
        StopRule::CostBelow(eps) => cost <= eps,
        StopRule::GradNormBelow(tol) => grad_norm <= tol,
    };

    if stop_met(cost, grad_norm) {
        return Ok(LbfgsOutcome {
            phases: x,
            cost,
            grad_norm,
            iterations: 0,
            trace,
            reason: TermReason::Converged,
        });
    }

    let mut iterations = 0;
    let mut reason = TermReason::MaxIters;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut dir = lbfgs_direction(&grad, &history);
        let mut slope = dot(&dir, &grad);
        if slope >= 0.0 {
            // Curvature information went stale; fall back to steepest
            // descent.
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad_norm * grad_norm;
        }
        if slope == 0.0 {
            reason = TermReason::LineSearchStalled;
            break;
        }

        let mut t = 1.0;
        let mut accepted: Option<(ReducedPhases, f64)> = None;
        while t >= 1e-20 {
            let stepped: Vec<f64> = x
                .phases()
                .iter()
                .zip(&dir)
                .map(|(p, d)| p + t * d)
                .collect();
            let cand = ReducedPhases::new(stepped, x.parity())?;
            let c = ctx.cost(&cand)?;
            if c <= cost + cfg.armijo_c * t * slope {
                accepted = Some((cand, c));
                break;
            }
            t *= cfg.backtrack;
        }
        let Some((next, next_cost)) = accepted else {
            reason = TermReason::LineSearchStalled;
            break;
        };

        let (_, next_grad) = ctx.cost_and_gradient(&next)?;
        let s: Vec<f64> = next
            .phases()
            .iter()
            .zip(x.phases())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        x = next;
        cost = next_cost;
        grad = next_grad;
        grad_norm = dot(&grad, &grad).sqrt();
        trace.push(IterationRecord {
            iter: iterations,
            cost,
            dist_to_phi0: x.distance(&phi0),
            projected: false,
        });
        if stop_met(cost, grad_norm) {
            reason = TermReason::Converged;
            break;
        }
    }

    Ok(LbfgsOutcome {
        phases: x,
        cost,
        grad_norm,
        iterations,
        trace,
        reason,
    })
}

/// Limited-memory quasi-Newton minimization from (pi/4, 0, ..., 0). No
/// convergence guarantee is claimed, so the certificate fields stay
/// unset; the mode exists for targets beyond the norm-condition regime.
pub fn solve_quasi_newton(ctx: &ObjectiveContext, cfg: &SolverConfig) -> Result<SolveReport> {
    let outcome = lbfgs(
        ctx,
        &ctx.initial_phases(),
        cfg,
        StopRule::CostBelow(cfg.epsilon),
    )?;
    let report = SolveReport {
        phases: outcome.phases,
        final_cost: outcome.cost,
        iterations: outcome.iterations,
        trace: outcome.trace,
        certificate: Certificate::default(),
    };
    match outcome.reason {
        TermReason::Converged => Ok(report),
        TermReason::MaxIters | TermReason::LineSearchStalled => Err(Error::NonConvergence {
            iterations: report.iterations,
            cost: report.final_cost,
            report: Box::new(report),
        }),
    }
}

/// A recomputed bound check: the measured value against its theoretical
/// bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Eigenvalue window check on the Hessian at the solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenWindow {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
}

/// Post-hoc certification of a converged solve. Checks whose hypotheses do
/// not hold are reported as `None` rather than failed.
#[derive(Clone, Debug)]
pub struct CertifyReport {
    pub distance_to_initial: f64,
    /// Distance bound (pi/sqrt(3)) * max|f|, applicable when max|f| <= 1/2.
    pub distance_bound: Option<BoundCheck>,
    /// Hessian eigenvalue window [1/4, 25/4], applicable under the norm
    /// condition.
    pub hessian_window: Option<EigenWindow>,
    /// Sup-norm of g - f on a 10x oversampled grid.
    pub sup_residual: crate::chebyshev::MaxNormEstimate,
}

pub fn certify(report: &SolveReport, ctx: &ObjectiveContext) -> Result<CertifyReport> {
    let phi0 = ctx.initial_phases();
    let distance = report.phases.distance(&phi0);
    let max_norm = ctx.target().max_norm_estimate().value;

    let distance_bound = (max_norm <= 0.5).then(|| {
        let bound = std::f64::consts::PI / 3f64.sqrt() * max_norm;
        BoundCheck {
            value: distance,
            bound,
            satisfied: distance <= bound + 1e-10,
        }
    });

    let hessian_window = if max_norm <= norm_condition_threshold(ctx.d_tilde()) {
        let rep = ctx.hessian(&report.phases)?;
        let (lo, hi) = (STRONG_CONVEXITY, SMOOTHNESS);
        Some(EigenWindow {
            lambda_min: rep.lambda_min(),
            lambda_max: rep.lambda_max(),
            lower: lo,
            upper: hi,
            within: rep.lambda_min() >= lo - 1e-9 && rep.lambda_max() <= hi + 1e-9,
        })
    } else {
        None
    };

    let sup_residual = ctx.residual_sup_norm(&report.phases, 10)?;
    Ok(CertifyReport {
        distance_to_initial: distance,
        distance_bound,
        hessian_window,
        sup_residual,
    })
}

//! Numerical studies of the cost surface backing the optimization
//! guarantees: Hessian spectra near optima with and without the palindromic
//! constraint, dense grids over the two-phase fundamental domain,
//! multi-start stationary-point probing, and the small-signal limits of the
//! enumerated direct constructions.
//!
//! Everything is seeded and aggregated in a fixed order, so a study rerun
//! with the same inputs reproduces its output bit for bit.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chebyshev::{ChebCoeffs, ChebKind, Parity, TargetPoly};
use crate::direct::{solve_enumerate, DirectConfig, PrecisionMode};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::ObjectiveContext;
use crate::optimizer::{lbfgs, solve_quasi_newton, SolverConfig, StopRule};
use crate::qsp::{site_gradients, ReducedPhases};

/// Jacobi sweep tolerance for the spectra computed here; matches the
/// objective module so recomputed values agree bitwise.
const EIG_TOL: f64 = 1e-12;

/// Cost target for the solves that anchor a study at an optimum.
const CENTER_COST: f64 = 1e-18;

/// Two converged descents closer than this are the same stationary point.
const CLUSTER_RADIUS: f64 = 1e-6;

/// A stationary point with cost at or below this is a global optimum.
const GLOBAL_COST_TOL: f64 = 1e-16;

/// Descents that end with a gradient norm above this are discarded as
/// unconverged rather than reported as stationary points.
const STATIONARY_GRAD_TOL: f64 = 1e-8;

/// Branch enumeration cap for the annotation and scaling studies.
const ENUM_LIMIT: usize = 1024;

/// Clustering radius for grouping extrapolated branch limits into classes.
/// Distinct limits differ by at least pi/4 in some phase while the
/// extrapolation is good to many digits, so anything between is safe.
const CLASS_CLUSTER_RADIUS: f64 = 1e-3;

/// The scaling study records exponents k only while 10^-k * sup|f| stays at
/// or above this, keeping every recorded solve well above the
/// factorization's small-coefficient cutoffs.
const SCALE_FLOOR: f64 = 1e-8;

/// Number of scales probed when extrapolating class limits.
const LADDER_RUNGS: usize = 4;

/// Which spectral quantity `spectrum_near_optimum` records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    /// Smallest eigenvalue of the reduced-phase (symmetric) Hessian of F.
    MinEigenvalueSymmetric,
    /// Smallest singular value of the Gram matrix (2/d_tilde) A^T A built
    /// from the unconstrained Jacobian A of g over the first d of the d+1
    /// full phases. A has d_tilde rows, so the Gram is rank-deficient at
    /// every point and the value sits at the numerical floor.
    MinSingularAsymmetric,
}

/// Spectral samples in a ball around an optimum.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSample {
    pub metric: SpectrumMode,
    pub degree: usize,
    pub parity: Parity,
    pub radius: f64,
    pub seed: u64,
    /// Reduced phases of the optimum at the ball's center.
    pub center: Vec<f64>,
    pub center_cost: f64,
    /// Perturbation added to the center for each sample, in reduced
    /// coordinates; norm at most `radius`.
    pub offsets: Vec<Vec<f64>>,
    /// The recorded quantity at center + offset, one entry per offset.
    pub values: Vec<f64>,
    /// Largest eigenvalue (resp. singular value) at the same points, for
    /// scale-relative comparisons against `values`.
    pub scale_refs: Vec<f64>,
}

/// One stationary point found and clustered by `local_min_probe`.
#[derive(Clone, Debug, Serialize)]
pub struct StationaryPoint {
    pub phases: Vec<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    /// Reduced-Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub kind: StationaryKind,
    /// How many starts descended into this cluster.
    pub basin_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryKind {
    /// Cost at the numerical floor: a solution of the interpolation problem.
    GlobalMin,
    /// Positive-definite Hessian with cost bounded away from zero.
    LocalMin,
    /// Stationary but not a minimum (some Hessian eigenvalue <= 0).
    Saddle,
}

/// One exact optimum annotated onto a `GridLandscape`.
#[derive(Clone, Debug, Serialize)]
pub struct GridOptimum {
    pub phases: Vec<f64>,
    pub cost: f64,
    pub maximal: bool,
    pub q_negated: bool,
}

/// Dense evaluation of F^(1/3) over the two-dimensional fundamental domain,
/// with the direct backend's exact optima annotated. The cube root flattens
/// the quartic wells enough to make the basin structure visible on a plot.
#[derive(Clone, Debug, Serialize)]
pub struct GridLandscape {
    pub resolution: usize,
    /// First reduced phase, `resolution` lattice points over [-pi/2, pi/2).
    pub axis0: Vec<f64>,
    /// Second reduced phase; for even degree this is the middle phase and
    /// spans [-pi, pi), otherwise [-pi/2, pi/2).
    pub axis1: Vec<f64>,
    /// `values[i][j]` = F(axis0[i], axis1[j])^(1/3).
    pub values: Vec<Vec<f64>>,
    pub optima: Vec<GridOptimum>,
}

/// One class of enumeration branches sharing a small-signal limit.
#[derive(Clone, Debug, Serialize)]
pub struct ClassLimit {
    /// 1-based; the maximal class is always label 1.
    pub label: usize,
    pub maximal: bool,
    /// Full palindromic phase vector (length d+1) the class converges to,
    /// estimated at the limit exponent.
    pub limit: Vec<f64>,
    /// Branches assigned to this class at the limit exponent.
    pub branch_count: usize,
    /// Euclidean distance between reduced phase vectors, closest branch to
    /// the limit, one entry per recorded exponent.
    pub distances: Vec<f64>,
    /// Cost per iteration of a quasi-Newton run on the trace target,
    /// started from this class's limit vector.
    pub trace_costs: Vec<f64>,
}

/// Scaling-limit study of the enumerated constructions for targets
/// 10^-k * f.
#[derive(Clone, Debug, Serialize)]
pub struct ClassLimitStudy {
    /// Exponents k actually recorded: those in 0..=k_max for which the
    /// scaled target is solvable (sup norm below one) and above the
    /// recording floor.
    pub exponents: Vec<usize>,
    /// Sup-norm estimate of the unscaled target.
    pub sup_norm: f64,
    /// The deepest exponent of the ladder the limit vectors were
    /// extrapolated from.
    pub limit_exponent: usize,
    /// The exponent whose scaled target the per-class optimizer traces run
    /// against (the largest recorded one).
    pub trace_exponent: usize,
    pub classes: Vec<ClassLimit>,
}

/// Sample the extreme of the Hessian spectrum at uniform random points in a
/// ball around the optimum of `f`, in symmetric (reduced-phase) or
/// asymmetric (free-phase Gram) form. With radius 0 every sample sits
/// exactly at the optimum.
pub fn spectrum_near_optimum(
    f: &TargetPoly,
    metric: SpectrumMode,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SpectrumSample> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::InvalidInput(
            "perturbation radius must be finite and nonnegative".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "spectrum sampling needs at least one sample".into(),
        ));
    }
    let ctx = ObjectiveContext::new(f.clone())?;
    let center = solve_center(&ctx)?;
    let center_cost = ctx.cost(&center)?;
    let d_tilde = ctx.d_tilde();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let offsets: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| ball_point(&mut rng, d_tilde, radius))
        .collect();

    let evaluated = offsets
        .par_iter()
        .map(|off| {
            let shifted: Vec<f64> = center
                .phases()
                .iter()
                .zip(off)
                .map(|(c, o)| c + o)
                .collect();
            let r = ReducedPhases::new(shifted, ctx.parity())?;
            metric_at(&ctx, metric, &r)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let (values, scale_refs) = evaluated.into_iter().unzip();
    Ok(SpectrumSample {
        metric,
        degree: f.degree(),
        parity: f.parity(),
        radius,
        seed,
        center: center.phases().to_vec(),
        center_cost,
        offsets,
        values,
        scale_refs,
    })
}

/// Recompute the quantity a `SpectrumSample` records at an arbitrary point:
/// (extreme value, scale reference). Feeding center + offset back through
/// this reproduces the stored entries.
pub fn spectrum_metric(
    f: &TargetPoly,
    metric: SpectrumMode,
    phases: &ReducedPhases,
) -> Result<(f64, f64)> {
    let ctx = ObjectiveContext::new(f.clone())?;
    metric_at(&ctx, metric, phases)
}

/// Full singular-value spectrum (ascending) of the asymmetric Gram matrix
/// at the given point. Exposed so rank assertions can count the values
/// above a relative threshold; the rank never exceeds d_tilde.
pub fn asymmetric_spectrum(f: &TargetPoly, phases: &ReducedPhases) -> Result<Vec<f64>> {
    let ctx = ObjectiveContext::new(f.clone())?;
    asymmetric_gram_spectrum(&ctx, phases)
}

fn metric_at(ctx: &ObjectiveContext, metric: SpectrumMode, r: &ReducedPhases) -> Result<(f64, f64)> {
    match metric {
        SpectrumMode::MinEigenvalueSymmetric => {
            let rep = ctx.hessian(r)?;
            Ok((rep.lambda_min(), rep.lambda_max()))
        }
        SpectrumMode::MinSingularAsymmetric => {
            let sv = asymmetric_gram_spectrum(ctx, r)?;
            Ok((sv[0], *sv.last().expect("spectrum is non-empty")))
        }
    }
}

/// Gram matrix (2/d_tilde) A^T A of the free-phase Jacobian
/// A[k][s] = d g(x_k) / d psi_s, s = 0..d, over the cost grid. The phase
/// vector is expanded palindromically before differentiation but each site
/// is then varied independently, which is exactly the "no symmetry
/// constraint" Hessian block at an optimum. A has only d_tilde rows, so d -
/// d_tilde of the returned values are zero up to roundoff.
fn asymmetric_gram_spectrum(ctx: &ObjectiveContext, r: &ReducedPhases) -> Result<Vec<f64>> {
    let full = r.symmetrize();
    let d = full.len() - 1;
    let d_tilde = ctx.d_tilde();
    let mut a = DMatrix::zeros(d_tilde, d);
    for (k, &x) in ctx.grid().nodes().iter().enumerate() {
        let g = site_gradients(x, &full)?;
        for s in 0..d {
            a[(k, s)] = g[s];
        }
    }
    let gram = (a.transpose() * &a) * (2.0 / d_tilde as f64);
    // The Gram is symmetric PSD, so its singular values are |eigenvalues|.
    // Going through a generic SVD would square it first and lift the noise
    // floor of the zero block from ~1e-16 to ~1e-8 relative.
    let mut sv: Vec<f64> = linalg::sym_eigenvalues(&gram, EIG_TOL)
        .into_iter()
        .map(f64::abs)
        .collect();
    sv.sort_by(f64::total_cmp);
    Ok(sv)
}

/// Evaluate F^(1/3) on a `resolution` x `resolution` lattice over the
/// fundamental domain and annotate every optimum the direct backend
/// enumerates. Only targets with exactly two reduced phases (degree 2 or 3)
/// have a two-dimensional domain to draw.
pub fn grid_landscape(f: &TargetPoly, resolution: usize) -> Result<GridLandscape> {
    if !(2..=2048).contains(&resolution) {
        return Err(Error::InvalidInput(format!(
            "grid resolution must lie in [2, 2048], got {resolution}"
        )));
    }
    let ctx = ObjectiveContext::new(f.clone())?;
    if ctx.d_tilde() != 2 {
        return Err(Error::InvalidInput(format!(
            "landscape grids are two-dimensional, but degree {} has {} reduced phases",
            f.degree(),
            ctx.d_tilde()
        )));
    }
    let parity = ctx.parity();
    let hi1 = match parity {
        Parity::Odd => FRAC_PI_2,
        Parity::Even => PI,
    };
    let axis0 = lattice(-FRAC_PI_2, FRAC_PI_2, resolution);
    let axis1 = lattice(-hi1, hi1, resolution);

    let values = axis0
        .par_iter()
        .map(|&p0| {
            axis1
                .iter()
                .map(|&p1| {
                    let r = ReducedPhases::new(vec![p0, p1], parity)?;
                    Ok(ctx.cost(&r)?.cbrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let sols = solve_enumerate(f, &DirectConfig::default(), ENUM_LIMIT)?;
    let mut optima = Vec::with_capacity(sols.len());
    for s in &sols {
        // Reduction already lands inside the domain; wrapping is a no-op
        // guard that keeps the annotation on the drawn axes.
        let (wrapped, _) = s.phases.wrap_to_domain();
        optima.push(GridOptimum {
            cost: ctx.cost(&wrapped)?,
            phases: wrapped.phases().to_vec(),
            maximal: s.pair.source().is_maximal(),
            q_negated: s.q_negated,
        });
    }

    Ok(GridLandscape {
        resolution,
        axis0,
        axis1,
        values,
        optima,
    })
}

/// Multi-start stationary-point search: quasi-Newton descent with a
/// gradient-norm stop from `n_starts` uniform random points of the
/// fundamental domain, clustered and classified. Returned points are sorted
/// by cost (so global solutions come first); starts that fail to reach a
/// small gradient are dropped.
pub fn local_min_probe(f: &TargetPoly, n_starts: usize, seed: u64) -> Result<Vec<StationaryPoint>> {
    if n_starts == 0 {
        return Err(Error::InvalidInput(
            "stationary-point probing needs at least one start".into(),
        ));
    }
    let ctx = ObjectiveContext::new(f.clone())?;
    let d_tilde = ctx.d_tilde();
    let parity = ctx.parity();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|_| domain_point(&mut rng, d_tilde, parity))
        .collect();

    let mut cfg = SolverConfig::quasi_newton();
    cfg.max_iters = 1000;
    let descents = starts
        .par_iter()
        .map(|s| {
            let start = ReducedPhases::new(s.clone(), parity)?;
            let out = lbfgs(&ctx, &start, &cfg, StopRule::GradNormBelow(1e-12))?;
            if out.grad_norm <= STATIONARY_GRAD_TOL {
                let (wrapped, _) = out.phases.wrap_to_domain();
                Ok(Some((wrapped.phases().to_vec(), out.cost, out.grad_norm)))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<Option<(Vec<f64>, f64, f64)>>>>()?;

    // Greedy clustering in start order; the representative is the member
    // with the smallest gradient norm.
    let mut clusters: Vec<(Vec<f64>, f64, f64, usize)> = Vec::new();
    for (phases, cost, grad_norm) in descents.into_iter().flatten() {
        match clusters
            .iter_mut()
            .find(|c| euclid(&c.0, &phases) <= CLUSTER_RADIUS)
        {
            Some(c) => {
                c.3 += 1;
                if grad_norm < c.2 {
                    c.0 = phases;
                    c.1 = cost;
                    c.2 = grad_norm;
                }
            }
            None => clusters.push((phases, cost, grad_norm, 1)),
        }
    }

    let mut points = Vec::with_capacity(clusters.len());
    for (phases, cost, grad_norm, basin_count) in clusters {
        let rep = ReducedPhases::new(phases.clone(), parity)?;
        let hess = ctx.hessian(&rep)?;
        let mut eigenvalues = hess.eigenvalues.clone();
        eigenvalues.reverse();
        let kind = if cost <= GLOBAL_COST_TOL {
            StationaryKind::GlobalMin
        } else if eigenvalues[0] > 0.0 {
            StationaryKind::LocalMin
        } else {
            StationaryKind::Saddle
        };
        points.push(StationaryPoint {
            phases,
            cost,
            grad_norm,
            eigenvalues,
            kind,
            basin_count,
        });
    }
    points.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then_with(|| lex_cmp(&a.phases, &b.phases))
    });
    Ok(points)
}

/// Track every enumeration class of `f` down the scaling family
/// 10^-k * f, k = 0..=k_max: extrapolate each class's limit vector from a
/// ladder of deep scales, record per-exponent distances of the closest
/// branch to its limit, and run an optimizer trace from each limit vector.
///
/// The input is a raw first-kind coefficient vector rather than a
/// `TargetPoly`: the unscaled polynomial may well have sup norm above one
/// (the exponents where it does are simply not recorded).
pub fn class_limit_study(f: &ChebCoeffs, k_max: usize) -> Result<ClassLimitStudy> {
    if f.kind() != ChebKind::First {
        return Err(Error::InvalidInput(
            "the scaling study takes first-kind coefficients".into(),
        ));
    }
    let sup_norm = f.max_norm(16).value;
    if sup_norm < 1e-15 {
        return Err(Error::InvalidInput(
            "the scaling study needs a nonzero target".into(),
        ));
    }

    let exponents: Vec<usize> = (0..=k_max)
        .filter(|&k| {
            let scaled = sup_norm * 10f64.powi(-(k as i32));
            scaled <= 1.0 - 1e-9 && scaled >= SCALE_FLOOR
        })
        .collect();
    if exponents.is_empty() {
        return Err(Error::InvalidTarget(format!(
            "no exponent k <= {k_max} leaves 10^-k f solvable and above the scale floor"
        )));
    }

    // Estimate limits by extrapolation along a ladder of deep scales.  The
    // slowest branches approach their limits like the cube root of the scale
    // (the complement's small roots collapse onto the origin in near-uniform
    // clusters, so every branch trajectory is a power series in that cube
    // root), while probing much below a scaled sup norm of ~1e-11 runs into
    // the factorization's own cutoffs: the zero-target bypass and the
    // vanishing leading coefficients of the non-maximal branches.  Four
    // rungs anchored there remove the first three powers, which certifies
    // the limits far beyond what any single probe can reach.
    //
    // Every exponent from the shallowest recorded one down to the ladder is
    // solved and branches are matched between neighbouring exponents, so
    // the recorded distances follow each class's own branch through phase
    // space rather than whichever branch happens to wander nearest.
    let k_lo = *exponents.first().expect("non-empty");
    let k_deep_anchor =
        ((sup_norm.log10() + 11.0).floor() as usize).max(k_lo + LADDER_RUNGS - 1);
    let mut solved: BTreeMap<usize, Vec<crate::direct::DirectSolution>> = BTreeMap::new();
    let mut chain_err = None;
    let mut k_deep = None;
    'candidates: for cand in (k_deep_anchor.saturating_sub(2)..=k_deep_anchor).rev() {
        if cand < k_lo + LADDER_RUNGS - 1 {
            break;
        }
        for k in (k_lo..=cand).rev() {
            if solved.contains_key(&k) {
                continue;
            }
            match solve_scaled(f, k) {
                Ok(s) => {
                    solved.insert(k, s);
                }
                Err(e) => {
                    chain_err = Some(e);
                    continue 'candidates;
                }
            }
        }
        k_deep = Some(cand);
        break;
    }
    let k_deep = match k_deep {
        Some(k) => k,
        None => {
            return Err(chain_err.unwrap_or_else(|| {
                Error::InvalidTarget(
                    "the scaling ladder does not fit between the target's \
                     solvable range and the factorization cutoffs"
                        .into(),
                )
            }))
        }
    };
    let limit_exponent = k_deep;
    let chain_ks: Vec<usize> = (k_lo..=k_deep).collect();
    let deep = &solved[&k_deep];
    let n_branches = deep.len();
    for k in &chain_ks {
        if solved[k].len() != n_branches {
            return Err(Error::Degenerate(format!(
                "branch count changed along the scaling chain ({} at exponent \
                 {k} vs {n_branches})",
                solved[k].len()
            )));
        }
    }
    let d_tilde = deep[0].phases.d_tilde();
    let parity = deep[0].phases.parity();
    let fulls: BTreeMap<usize, Vec<Vec<f64>>> = solved
        .iter()
        .map(|(&k, sols)| (k, sols.iter().map(|s| s.phases.symmetrize()).collect()))
        .collect();
    let d_full = fulls[&k_deep][0].len();
    let middle = if parity == Parity::Even {
        Some(d_full / 2)
    } else {
        None
    };

    // perms[k][b]: which solution at exponent k continues branch b of the
    // deepest exponent.  Working from the deep end, each branch's position
    // at the next shallower exponent is predicted by extrapolating its
    // already-matched trajectory, and solutions are assigned to predictions
    // by claiming the closest pairs first.  Matching against predictions
    // rather than the previous positions keeps the residual far below the
    // branch separation even at the shallow end, where one scaling step
    // moves a branch by a large fraction of its distance to the limit.
    let t_of = |k: usize| (sup_norm * 10f64.powi(-(k as i32))).cbrt();
    let mut perms: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    perms.insert(k_deep, (0..n_branches).collect());
    for &k in chain_ks.iter().rev().skip(1) {
        let predictors: Vec<usize> = (k + 1..=k_deep).take(3).collect();
        let ts_p: Vec<f64> = predictors.iter().map(|&kk| t_of(kk)).collect();
        let t_here = t_of(k);
        let lw: Vec<f64> = (0..ts_p.len())
            .map(|i| {
                (0..ts_p.len())
                    .filter(|&m| m != i)
                    .map(|m| (t_here - ts_p[m]) / (ts_p[i] - ts_p[m]))
                    .product()
            })
            .collect();
        let preds: Vec<Vec<f64>> = (0..n_branches)
            .map(|b| {
                let refv = &fulls[&predictors[0]][perms[&predictors[0]][b]];
                (0..d_full)
                    .map(|c| {
                        let period = chart_period(c, middle);
                        predictors
                            .iter()
                            .zip(&lw)
                            .map(|(&kk, &wgt)| {
                                let v = fulls[&kk][perms[&kk][b]][c];
                                wgt * (v - period * ((v - refv[c]) / period).round())
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let cur = &fulls[&k];
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n_branches * n_branches);
        for (b, pred) in preds.iter().enumerate() {
            for (j, v) in cur.iter().enumerate() {
                pairs.push((angular_euclid(pred, v, middle), b, j));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut perm = vec![usize::MAX; n_branches];
        let mut claimed = vec![false; n_branches];
        let mut assigned = 0;
        for (dist, b, j) in pairs {
            if perm[b] != usize::MAX || claimed[j] {
                continue;
            }
            if dist > 0.3 {
                return Err(Error::Precision(format!(
                    "branch tracking lost at exponent {k} (nearest \
                     continuation {dist:.3e} from its predicted position)"
                )));
            }
            perm[b] = j;
            claimed[j] = true;
            assigned += 1;
            if assigned == n_branches {
                break;
            }
        }
        perms.insert(k, perm);
    }

    // Snap each rung's matched vectors into the deepest rung's wrapping
    // chart and extrapolate coordinate-wise to scale zero.
    let ladder_ks = &chain_ks[chain_ks.len() - LADDER_RUNGS..];
    let ts: Vec<f64> = ladder_ks
        .iter()
        .map(|&k| (sup_norm * 10f64.powi(-(k as i32))).cbrt())
        .collect();
    let weights: Vec<f64> = (0..LADDER_RUNGS)
        .map(|i| {
            (0..LADDER_RUNGS)
                .filter(|&m| m != i)
                .map(|m| ts[m] / (ts[m] - ts[i]))
                .product()
        })
        .collect();
    let deep_fulls = &fulls[&k_deep];
    let mut limits: Vec<Vec<f64>> = vec![vec![0.0; d_full]; n_branches];
    for (ri, &k) in ladder_ks.iter().enumerate() {
        let rung = &fulls[&k];
        let perm = &perms[&k];
        for (bi, reference) in deep_fulls.iter().enumerate() {
            for (c, (acc, (&v, &r))) in limits[bi]
                .iter_mut()
                .zip(rung[perm[bi]].iter().zip(reference))
                .enumerate()
            {
                let period = chart_period(c, middle);
                let snapped = v - period * ((v - r) / period).round();
                *acc += weights[ri] * snapped;
            }
        }
    }

    // Group branch limits into classes; the class limit is the member mean.
    let mut groups: Vec<(Vec<usize>, Vec<Vec<f64>>, bool)> = Vec::new();
    for (bi, limit) in limits.into_iter().enumerate() {
        let is_max_branch = deep[bi].pair.source().is_maximal() && !deep[bi].q_negated;
        match groups
            .iter_mut()
            .find(|g| euclid(&g.1[0], &limit) <= CLASS_CLUSTER_RADIUS)
        {
            Some(g) => {
                g.0.push(bi);
                g.1.push(limit);
                g.2 |= is_max_branch;
            }
            None => groups.push((vec![bi], vec![limit], is_max_branch)),
        }
    }
    let mut classes: Vec<(Vec<f64>, bool, Vec<usize>)> = groups
        .into_iter()
        .map(|(members, member_limits, maximal)| {
            let n = member_limits.len();
            let mut mean = vec![0.0; member_limits[0].len()];
            for m in &member_limits {
                for (acc, v) in mean.iter_mut().zip(m) {
                    *acc += v / n as f64;
                }
            }
            (mean, maximal, members)
        })
        .collect();
    classes.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| lex_cmp(&a.0, &b.0)));

    let mut distances: Vec<Vec<f64>> = vec![Vec::with_capacity(exponents.len()); classes.len()];
    for &k in &exponents {
        let rung = &fulls[&k];
        let perm = &perms[&k];
        for (ci, (limit, _, members)) in classes.iter().enumerate() {
            let dmin = members
                .iter()
                .map(|&b| {
                    angular_euclid(&rung[perm[b]][..d_tilde], &limit[..d_tilde], middle)
                })
                .min_by(f64::total_cmp)
                .expect("classes have at least one member");
            distances[ci].push(dmin);
        }
    }

    // Trace against the deepest recorded exponent: there every limit vector
    // closely approximates its own branch, so the optimizer starts inside
    // the basin it is meant to demonstrate.
    let trace_exponent = *exponents.last().expect("non-empty");
    let trace_ctx = ObjectiveContext::new(scaled_target(f, trace_exponent)?)?;
    let mut cfg = SolverConfig::quasi_newton();
    cfg.max_iters = 500;
    let traces = classes
        .par_iter()
        .map(|(limit, _, _)| {
            let start = ReducedPhases::new(limit[..d_tilde].to_vec(), parity)?;
            let out = lbfgs(&trace_ctx, &start, &cfg, StopRule::CostBelow(1e-24))?;
            Ok(out.trace.iter().map(|rec| rec.cost).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let classes = classes
        .into_iter()
        .zip(distances)
        .zip(traces)
        .enumerate()
        .map(
            |(i, (((limit, maximal, members), dists), trace_costs))| ClassLimit {
                label: i + 1,
                maximal,
                limit,
                branch_count: members.len(),
                distances: dists,
                trace_costs,
            },
        )
        .collect();

    Ok(ClassLimitStudy {
        exponents,
        sup_norm,
        limit_exponent,
        trace_exponent,
        classes,
    })
}

/// Solve for the optimum the studies center on: quasi-Newton from the
/// canonical start, driven to the cost floor.
fn solve_center(ctx: &ObjectiveContext) -> Result<ReducedPhases> {
    let mut cfg = SolverConfig::quasi_newton();
    cfg.epsilon = CENTER_COST;
    cfg.max_iters = 2000;
    let report = solve_quasi_newton(ctx, &cfg)?;
    Ok(report.phases)
}

fn scaled_target(f: &ChebCoeffs, k: usize) -> Result<TargetPoly> {
    let scale = 10f64.powi(-(k as i32));
    let coeffs: Vec<f64> = f.coeffs().iter().map(|c| c * scale).collect();
    TargetPoly::new(ChebCoeffs::new(ChebKind::First, f.parity(), coeffs)?)
}

/// Enumerate all branches of the scaled target, retrying once in extended
/// precision if double-precision pairing degrades at deep scales (the roots
/// split towards 0 and infinity as the target shrinks).
fn solve_scaled(f: &ChebCoeffs, k: usize) -> Result<Vec<crate::direct::DirectSolution>> {
    let t = scaled_target(f, k)?;
    match solve_enumerate(&t, &DirectConfig::default(), ENUM_LIMIT) {
        Err(Error::Precision(_)) => {
            let cfg = DirectConfig {
                precision: PrecisionMode::Big { bits: 320 },
                ..DirectConfig::default()
            };
            solve_enumerate(&t, &cfg, ENUM_LIMIT)
        }
        other => other,
    }
}

/// Uniform draw from the closed ball: Gaussian direction, radius by the
/// dim-th-root law.
fn ball_point(rng: &mut ChaCha12Rng, dim: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; dim];
    }
    loop {
        let g: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = euclid(&g, &vec![0.0; dim]);
        if norm > 1e-12 {
            let u: f64 = rng.random();
            let scale = radius * u.powf(1.0 / dim as f64) / norm;
            return g.iter().map(|v| v * scale).collect();
        }
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Uniform draw from the fundamental domain.
fn domain_point(rng: &mut ChaCha12Rng, d_tilde: usize, parity: Parity) -> Vec<f64> {
    (0..d_tilde)
        .map(|i| {
            let half = if parity == Parity::Even && i == d_tilde - 1 {
                PI
            } else {
                FRAC_PI_2
            };
            rng.random_range(-half..half)
        })
        .collect()
}

/// `n` lattice points of [lo, hi), left-closed like the domain itself.
fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Period of the angular chart of phase coordinate `c`: the middle phase of
/// an even degree lives on a 2*pi chart, every other phase on a pi one.
fn chart_period(c: usize, middle: Option<usize>) -> f64 {
    if Some(c) == middle {
        2.0 * PI
    } else {
        PI
    }
}

/// Euclidean distance between phase vectors measured coordinate-wise on
/// their angular charts. Equals the plain distance whenever both vectors sit
/// deep inside a common chart, and stays small when one of them is folded
/// across a domain edge.
fn angular_euclid(a: &[f64], b: &[f64], middle: Option<usize>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(c, (x, y))| {
            let period = chart_period(c, middle);
            let delta = x - y;
            let delta = delta - period * (delta / period).round();
            delta * delta
        })
        .sum::<f64>()
        .sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

//! The least-squares objective over the node grid: for a degree-d target f
//! and reduced phases r,
//!
//!   F(r) = (1/d_tilde) * sum_k (g(x_k, r) - f(x_k))^2,
//!
//! together with its gradient, the Jacobian A[k][j] = dg(x_k)/dphi_j, and
//! the analytic Hessian split as (2/d_tilde) A^T A minus a residual-weighted
//! curvature term. The split is reported explicitly because the landscape
//! experiments diagnose near-singularity from the Gram part alone.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chebyshev::{cheb_nodes, MaxNormEstimate, NodeGrid, Parity, TargetPoly};
use crate::error::{Error, Result};
use crate::linalg;
use crate::qsp::{g_gradient, g_hessian, g_value, ReducedPhases};

/// Node count above which per-node work is dispatched to the global thread
/// pool. Reductions always run in index order so results are bit-identical
/// regardless of thread count.
const PARALLEL_THRESHOLD: usize = 64;

/// Off-diagonal tolerance (relative to the Frobenius norm) for the Jacobi
/// eigensolver runs performed on Hessians.
const EIG_TOL: f64 = 1e-12;

/// Immutable evaluation context: the target, its node grid, and the target
/// values on that grid, frozen at construction so repeated cost and
/// derivative calls share the precomputation.
#[derive(Clone, Debug)]
pub struct ObjectiveContext {
    target: TargetPoly,
    grid: NodeGrid,
    target_values: Vec<f64>,
}

/// The Hessian of F at a point, with its two analytic constituents:
/// `hessian = jacobian_part - residual_part` entrywise, where
/// `jacobian_part = (2/d_tilde) A^T A` and `residual_part` collects the
/// residual-weighted second derivatives of g.
#[derive(Clone, Debug)]
pub struct HessianReport {
    pub hessian: DMatrix<f64>,
    pub jacobian_part: DMatrix<f64>,
    pub residual_part: DMatrix<f64>,
    /// Eigenvalues of `hessian`, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Smallest singular value of the Jacobian A.
    pub sigma_min_jacobian: f64,
}

impl HessianReport {
    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }
}

impl ObjectiveContext {
    pub fn new(target: TargetPoly) -> Result<Self> {
        let grid = cheb_nodes(target.d_tilde())?;
        let target_values = target.values_on(&grid);
        Ok(Self {
            target,
            grid,
            target_values,
        })
    }

    pub fn target(&self) -> &TargetPoly {
        &self.target
    }

    pub fn grid(&self) -> &NodeGrid {
        &self.grid
    }

    pub fn target_values(&self) -> &[f64] {
        &self.target_values
    }

    pub fn d_tilde(&self) -> usize {
        self.grid.d_tilde()
    }

    pub fn parity(&self) -> Parity {
        self.target.parity()
    }

    /// The canonical starting point (pi/4, 0, ..., 0) for this target shape.
    pub fn initial_phases(&self) -> ReducedPhases {
        ReducedPhases::initial(self.d_tilde(), self.parity()).expect("d_tilde >= 1")
    }

    fn check_shape(&self, r: &ReducedPhases) -> Result<()> {
        if r.d_tilde() != self.d_tilde() || r.parity() != self.parity() {
            return Err(Error::InvalidInput(format!(
                "phase vector has {} {} entries, target needs {} {}",
                r.d_tilde(),
                r.parity().as_str(),
                self.d_tilde(),
                self.parity().as_str()
            )));
        }
        Ok(())
    }

    /// Evaluate `work` at every node, in parallel for large grids, always
    /// reassembled in node order.
    fn per_node<T, F>(&self, work: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, f64) -> Result<T> + Sync,
    {
        let nodes = self.grid.nodes();
        if nodes.len() >= PARALLEL_THRESHOLD {
            nodes
                .par_iter()
                .enumerate()
                .map(|(k, &x)| work(k, x))
                .collect()
        } else {
            nodes
                .iter()
                .enumerate()
                .map(|(k, &x)| work(k, x))
                .collect()
        }
    }

    /// F(r): the mean squared residual over the node grid.
    pub fn cost(&self, r: &ReducedPhases) -> Result<f64> {
        self.check_shape(r)?;
        let sq = self.per_node(|k, x| {
            let res = g_value(x, r)? - self.target_values[k];
            Ok(res * res)
        })?;
        Ok(sq.iter().sum::<f64>() / self.d_tilde() as f64)
    }

    /// Gradient of F: (2/d_tilde) sum_k residual_k * grad g(x_k).
    pub fn gradient(&self, r: &ReducedPhases) -> Result<Vec<f64>> {
        Ok(self.cost_and_gradient(r)?.1)
    }

    /// Cost and gradient from one pass over the grid.
    pub fn cost_and_gradient(&self, r: &ReducedPhases) -> Result<(f64, Vec<f64>)> {
        self.check_shape(r)?;
        let d_tilde = self.d_tilde();
        let rows = self.per_node(|k, x| {
            let res = g_value(x, r)? - self.target_values[k];
            Ok((res, g_gradient(x, r)?))
        })?;
        let mut cost = 0.0;
        let mut grad = vec![0.0; d_tilde];
        for (res, node_grad) in &rows {
            cost += res * res;
            for (gi, ni) in grad.iter_mut().zip(node_grad) {
                *gi += res * ni;
            }
        }
        let scale = 2.0 / d_tilde as f64;
        for gi in &mut grad {
            *gi *= scale;
        }
        Ok((cost / d_tilde as f64, grad))
    }

    /// The Jacobian A with A[(k, j)] = dg(x_k)/dphi_j (rows over nodes,
    /// columns over reduced phases).
    pub fn jacobian(&self, r: &ReducedPhases) -> Result<DMatrix<f64>> {
        self.check_shape(r)?;
        let d_tilde = self.d_tilde();
        let rows = self.per_node(|_, x| g_gradient(x, r))?;
        let mut a = DMatrix::<f64>::zeros(d_tilde, d_tilde);
        for (k, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                a[(k, j)] = v;
            }
        }
        Ok(a)
    }

    /// Analytic Hessian of F with its split parts and spectral summaries.
    pub fn hessian(&self, r: &ReducedPhases) -> Result<HessianReport> {
        self.check_shape(r)?;
        let d_tilde = self.d_tilde();
        let rows = self.per_node(|k, x| {
            let res = g_value(x, r)? - self.target_values[k];
            Ok((res, g_gradient(x, r)?, g_hessian(x, r)?))
        })?;

        let scale = 2.0 / d_tilde as f64;
        let mut hessian = DMatrix::<f64>::zeros(d_tilde, d_tilde);
        let mut jacobian_part = DMatrix::<f64>::zeros(d_tilde, d_tilde);
        let mut residual_part = DMatrix::<f64>::zeros(d_tilde, d_tilde);
        let mut a = DMatrix::<f64>::zeros(d_tilde, d_tilde);
        for (k, (res, grad, gh)) in rows.iter().enumerate() {
            for i in 0..d_tilde {
                a[(k, i)] = grad[i];
                for j in 0..d_tilde {
                    let gram = grad[i] * grad[j];
                    let curv = res * gh[i][j];
                    jacobian_part[(i, j)] += scale * gram;
                    residual_part[(i, j)] -= scale * curv;
                    hessian[(i, j)] += scale * (gram + curv);
                }
            }
        }

        let eigenvalues: Vec<f64> = linalg::sym_eigenvalues(&hessian, EIG_TOL)
            .into_iter()
            .rev()
            .collect();
        let sigma_min_jacobian = linalg::singular_values(&a, EIG_TOL)
            .first()
            .copied()
            .unwrap_or(0.0);

        Ok(HessianReport {
            hessian,
            jacobian_part,
            residual_part,
            eigenvalues,
            sigma_min_jacobian,
        })
    }

    /// Sampled sup-norm of g - f on an oversampled grid plus the endpoints,
    /// the final self-check a solve reports alongside the grid it used.
    pub fn residual_sup_norm(
        &self,
        r: &ReducedPhases,
        oversample: usize,
    ) -> Result<MaxNormEstimate> {
        self.check_shape(r)?;
        let n = oversample.max(1) * (self.target.degree() + 1);
        let points = (1..=n)
            .map(|j| (std::f64::consts::PI * (2 * j - 1) as f64 / (2.0 * n as f64)).cos())
            .chain([1.0, -1.0]);
        let mut value: f64 = 0.0;
        for x in points {
            let res = (g_value(x, r)? - self.target.eval(x)?).abs();
            value = value.max(res);
        }
        Ok(MaxNormEstimate {
            value,
            grid_points: n + 2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::{ChebCoeffs, ChebKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {a} and {b} within {tol}, differ by {:e}",
            (a - b).abs()
        );
    }

    fn target_from(coeffs: Vec<f64>, parity: Parity) -> TargetPoly {
        TargetPoly::new(ChebCoeffs::new(ChebKind::First, parity, coeffs).unwrap()).unwrap()
    }

    fn random_target(rng: &mut ChaCha12Rng, d: usize, norm: f64) -> TargetPoly {
        let parity = Parity::of_degree(d);
        let mut coeffs = vec![0.0; d + 1];
        for (k, slot) in coeffs.iter_mut().enumerate() {
            if parity.matches_index(k) {
                *slot = rng.random_range(-1.0..1.0);
            }
        }
        let raw = ChebCoeffs::new(ChebKind::First, parity, coeffs).unwrap();
        let scale = norm / raw.max_norm(8).value;
        TargetPoly::new(raw.scaled(scale)).unwrap()
    }

    fn random_phases(rng: &mut ChaCha12Rng, ctx: &ObjectiveContext, spread: f64) -> ReducedPhases {
        let phases = (0..ctx.d_tilde())
            .map(|_| rng.random_range(-spread..spread))
            .collect();
        ReducedPhases::new(phases, ctx.parity()).unwrap()
    }

    #[test]
    fn cost_frozen_degree_one_example() {
        // f = 0.3 x, phases (0): g = x, so the single-node residual is
        // 0.7 * cos(pi/4) and F = 0.49 * 0.5 = 0.245.
        let ctx = ObjectiveContext::new(target_from(vec![0.0, 0.3], Parity::Odd)).unwrap();
        let r = ReducedPhases::new(vec![0.0], Parity::Odd).unwrap();
        assert_close(ctx.cost(&r).unwrap(), 0.245, 1e-12);
    }

    #[test]
    fn cost_at_initial_point_is_mean_square_of_target() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for &d in &[4usize, 7, 12] {
            let t = random_target(&mut rng, d, 0.6);
            let ctx = ObjectiveContext::new(t).unwrap();
            let expect: f64 = ctx
                .target_values()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                / ctx.d_tilde() as f64;
            let got = ctx.cost(&ctx.initial_phases()).unwrap();
            assert_close(got, expect, 1e-14);
        }
    }

    #[test]
    fn cost_vanishes_at_exact_solution() {
        // d = 1, f = c x is produced exactly by phi = acos(c) / 2.
        let c = 0.3;
        let ctx = ObjectiveContext::new(target_from(vec![0.0, c], Parity::Odd)).unwrap();
        let phi = 0.5 * c.acos();
        let r = ReducedPhases::new(vec![phi], Parity::Odd).unwrap();
        assert!(ctx.cost(&r).unwrap() <= 1e-20);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let ctx = ObjectiveContext::new(target_from(vec![0.0, 0.3], Parity::Odd)).unwrap();
        let wrong_len = ReducedPhases::new(vec![0.0, 0.0], Parity::Odd).unwrap();
        assert!(ctx.cost(&wrong_len).is_err());
        let wrong_parity = ReducedPhases::new(vec![0.0], Parity::Even).unwrap();
        assert!(ctx.gradient(&wrong_parity).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let h = 1e-5;
        for &d in &[3usize, 6, 11, 14] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.5)).unwrap();
            let r = random_phases(&mut rng, &ctx, 0.8);
            let (_, grad) = ctx.cost_and_gradient(&r).unwrap();
            for i in 0..ctx.d_tilde() {
                let mut up = r.phases().to_vec();
                let mut dn = up.clone();
                up[i] += h;
                dn[i] -= h;
                let fu = ctx
                    .cost(&ReducedPhases::new(up, ctx.parity()).unwrap())
                    .unwrap();
                let fd_ = ctx
                    .cost(&ReducedPhases::new(dn, ctx.parity()).unwrap())
                    .unwrap();
                let fd = (fu - fd_) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() <= 1e-6 * grad[i].abs().max(1.0),
                    "entry {i}: analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn gradient_zero_cases() {
        // Zero residual at the initial point when f = 0.
        let zero =
            TargetPoly::new(ChebCoeffs::new(ChebKind::First, Parity::Odd, vec![0.0, 0.0]).unwrap())
                .unwrap();
        let ctx = ObjectiveContext::new(zero).unwrap();
        let grad = ctx.gradient(&ctx.initial_phases()).unwrap();
        assert!(grad.iter().all(|g| g.abs() <= 1e-14));

        // Stationarity at an exact solution.
        let c = 0.3f64;
        let ctx = ObjectiveContext::new(target_from(vec![0.0, c], Parity::Odd)).unwrap();
        let r = ReducedPhases::new(vec![0.5 * c.acos()], Parity::Odd).unwrap();
        let grad = ctx.gradient(&r).unwrap();
        assert!(grad.iter().all(|g| g.abs() <= 1e-10));
    }

    #[test]
    fn gram_at_initial_point_is_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for &d in &[4usize, 5, 8, 9] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.4)).unwrap();
            let a = ctx.jacobian(&ctx.initial_phases()).unwrap();
            let d_tilde = ctx.d_tilde();
            let gram = (2.0 / d_tilde as f64) * a.transpose() * &a;
            for i in 0..d_tilde {
                for j in 0..d_tilde {
                    let expect = if i != j {
                        0.0
                    } else if d % 2 == 0 && i == d_tilde - 1 {
                        2.0
                    } else {
                        4.0
                    };
                    assert_close(gram[(i, j)], expect, 1e-10);
                }
            }
        }
    }

    #[test]
    fn jacobian_smallest_singular_value_at_initial_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(34);
        for &d in &[5usize, 9, 8, 12] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.4)).unwrap();
            let report = ctx.hessian(&ctx.initial_phases()).unwrap();
            let d_tilde = ctx.d_tilde() as f64;
            let expect = if d % 2 == 1 {
                (2.0 * d_tilde).sqrt()
            } else {
                d_tilde.sqrt()
            };
            assert_close(report.sigma_min_jacobian, expect, 1e-10);
        }
    }

    #[test]
    fn jacobian_perturbation_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(35);
        for &d in &[6usize, 9] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.4)).unwrap();
            let base = ctx.initial_phases();
            let a0 = ctx.jacobian(&base).unwrap();
            for _ in 0..10 {
                let eps: Vec<f64> = (0..ctx.d_tilde())
                    .map(|_| rng.random_range(-0.02..0.02))
                    .collect();
                let eps_norm = eps.iter().map(|e| e * e).sum::<f64>().sqrt();
                let perturbed: Vec<f64> = base
                    .phases()
                    .iter()
                    .zip(&eps)
                    .map(|(p, e)| p + e)
                    .collect();
                let a1 = ctx
                    .jacobian(&ReducedPhases::new(perturbed, ctx.parity()).unwrap())
                    .unwrap();
                let diff_norm = crate::linalg::spectral_norm(&(a1 - &a0));
                let bound = 4.0 * (ctx.d_tilde() as f64).powf(1.5) * eps_norm;
                assert!(
                    diff_norm <= bound + 1e-12,
                    "perturbation norm {diff_norm} exceeds bound {bound}"
                );
            }
        }
    }

    #[test]
    fn hessian_split_identity_and_symmetry() {
        let mut rng = ChaCha12Rng::seed_from_u64(36);
        for &d in &[4usize, 7, 10] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.5)).unwrap();
            let r = random_phases(&mut rng, &ctx, 0.7);
            let rep = ctx.hessian(&r).unwrap();
            let d_tilde = ctx.d_tilde();
            for i in 0..d_tilde {
                for j in 0..d_tilde {
                    let recomposed = rep.jacobian_part[(i, j)] - rep.residual_part[(i, j)];
                    assert_close(rep.hessian[(i, j)], recomposed, 1e-12);
                    assert_close(rep.hessian[(i, j)], rep.hessian[(j, i)], 1e-12);
                }
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let h = 1e-5;
        for &d in &[5usize, 8] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.5)).unwrap();
            let r = random_phases(&mut rng, &ctx, 0.6);
            let rep = ctx.hessian(&r).unwrap();
            for j in 0..ctx.d_tilde() {
                let mut up = r.phases().to_vec();
                let mut dn = up.clone();
                up[j] += h;
                dn[j] -= h;
                let gu = ctx
                    .gradient(&ReducedPhases::new(up, ctx.parity()).unwrap())
                    .unwrap();
                let gd = ctx
                    .gradient(&ReducedPhases::new(dn, ctx.parity()).unwrap())
                    .unwrap();
                for i in 0..ctx.d_tilde() {
                    let fd = (gu[i] - gd[i]) / (2.0 * h);
                    assert!(
                        (rep.hessian[(i, j)] - fd).abs() <= 1e-5 * rep.hessian[(i, j)].abs().max(1.0),
                        "entry ({i},{j}): analytic {} vs fd {fd}",
                        rep.hessian[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_at_initial_point_odd_degree_is_four_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(38);
        let ctx = ObjectiveContext::new(random_target(&mut rng, 7, 0.6)).unwrap();
        let rep = ctx.hessian(&ctx.initial_phases()).unwrap();
        for i in 0..ctx.d_tilde() {
            for j in 0..ctx.d_tilde() {
                let expect = if i == j { 4.0 } else { 0.0 };
                assert_close(rep.hessian[(i, j)], expect, 1e-10);
            }
        }
        for &l in &rep.eigenvalues {
            assert_close(l, 4.0, 1e-10);
        }
    }

    #[test]
    fn hessian_at_initial_point_even_degree() {
        let mut rng = ChaCha12Rng::seed_from_u64(39);
        let ctx = ObjectiveContext::new(random_target(&mut rng, 8, 0.6)).unwrap();
        let rep = ctx.hessian(&ctx.initial_phases()).unwrap();
        let last = ctx.d_tilde() - 1;
        for i in 0..ctx.d_tilde() {
            for j in 0..ctx.d_tilde() {
                let expect = if i != j {
                    0.0
                } else if i == last {
                    2.0
                } else {
                    4.0
                };
                assert_close(rep.hessian[(i, j)], expect, 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalue_shift_bounded_by_residual_part() {
        // The eigenvalues of the Hessian and of its Gram part differ by at
        // most the Frobenius norm of the residual part, pairwise in sorted
        // order.
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        for &d in &[5usize, 8] {
            let ctx = ObjectiveContext::new(random_target(&mut rng, d, 0.5)).unwrap();
            let r = random_phases(&mut rng, &ctx, 0.5);
            let rep = ctx.hessian(&r).unwrap();
            let jac_eigs: Vec<f64> = crate::linalg::sym_eigenvalues(&rep.jacobian_part, EIG_TOL)
                .into_iter()
                .rev()
                .collect();
            let r_norm = rep.residual_part.norm();
            for (lh, lj) in rep.eigenvalues.iter().zip(&jac_eigs) {
                assert!(
                    (lh - lj).abs() <= r_norm + 1e-12,
                    "eigenvalue shift {} exceeds residual norm {r_norm}",
                    (lh - lj).abs()
                );
            }
        }
    }

    #[test]
    fn residual_sup_norm_reports_grid() {
        let c = 0.3f64;
        let ctx = ObjectiveContext::new(target_from(vec![0.0, c], Parity::Odd)).unwrap();
        let solved = ReducedPhases::new(vec![0.5 * c.acos()], Parity::Odd).unwrap();
        let est = ctx.residual_sup_norm(&solved, 10).unwrap();
        assert!(est.value <= 1e-14);
        assert_eq!(est.grid_points, 10 * 2 + 2);

        let start = ctx.initial_phases();
        let est = ctx.residual_sup_norm(&start, 10).unwrap();
        assert_close(est.value, 0.3, 1e-12);
    }
}

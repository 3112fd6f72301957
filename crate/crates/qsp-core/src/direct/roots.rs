//! Roots of the Laurent complement and their reciprocal/conjugate pairing.
//!
//! The complement 1 - f(x)^2, written as a Laurent polynomial in z with
//! x = (z + 1/z)/2, has 4d roots that come in reciprocal pairs and conjugate
//! pairs and avoid the unit circle whenever max |f| < 1. Because only even
//! powers of z appear, everything here works in the substituted variable
//! w = z^2: the w-polynomial has degree 2d, is still palindromic, and its
//! roots recover the z-roots as exact +/- square-root pairs, which keeps the
//! root set closed under negation by construction instead of by matching.
//!
//! Seeds come from a balanced companion-matrix eigendecomposition in doubles;
//! an Aberth-Ehrlich sweep then polishes all roots simultaneously in the
//! working scalar, which is how the extended-precision mode reuses the f64
//! eigensolver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::scalar::{cmp_f64, Cplx, Real};
use crate::error::{Error, Result};

/// One binary selection unit: the roots listed in `inside` lie strictly
/// inside the unit disc of the w-plane and `outside` holds their reciprocal
/// partners in matching order. Real units hold one root per side, complex
/// units a conjugate pair per side; an admissible choice takes one side of
/// every unit (times `multiplicity`).
#[derive(Clone, Debug)]
pub(crate) struct Unit<R: Real> {
    pub inside: Vec<Cplx<R>>,
    pub outside: Vec<Cplx<R>>,
    pub multiplicity: usize,
}

impl<R: Real> Unit<R> {
    /// Number of w-roots one side of this unit contributes, counting
    /// multiplicity.
    pub fn side_len(&self) -> usize {
        self.inside.len() * self.multiplicity
    }

    /// Proxy of the inside representative (the member with im >= 0).
    pub fn rep(&self) -> Complex64 {
        let w = self.inside[0].to_c64();
        if w.im >= 0.0 {
            w
        } else {
            w.conj()
        }
    }
}

/// Paired root system of the complement in the w-plane.
#[derive(Clone, Debug)]
pub(crate) struct Paired<R: Real> {
    pub d: usize,
    pub units: Vec<Unit<R>>,
    pub warnings: Vec<String>,
}

/// Tolerances for the pairing decisions; carried by the public config.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairingTols {
    pub unit_circle_tol: f64,
    pub pairing_tol: f64,
    pub merge_tol: f64,
}

/// Extract the w-polynomial coefficients (ascending, length 2d + 1) from the
/// z-coefficients of the complement (length 4d + 1). Odd z-slots must vanish;
/// anything else means the input was not built from a definite-parity target.
pub(crate) fn w_coeffs_from_h(h: &[f64]) -> Result<Vec<f64>> {
    if h.len() < 5 || h.len() % 4 != 1 {
        return Err(Error::InvalidInput(format!(
            "complement coefficient vector has length {}, expected 4d + 1",
            h.len()
        )));
    }
    let scale = h.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    for (m, &c) in h.iter().enumerate() {
        if m % 2 == 1 && c.abs() > 1e-14 * scale {
            return Err(Error::InvalidInput(format!(
                "complement has an odd-power coefficient {c:e} at z^{m}; \
                 the target must have definite parity"
            )));
        }
    }
    Ok(h.iter().step_by(2).copied().collect())
}

/// Parlett-Reinsch balancing (the EISPACK `balanc` scaling stage): diagonal
/// similarity by powers of two until every row/column norm pair is within a
/// factor of the radix. Companion matrices of palindromic polynomials have
/// entries spanning the squared coefficient range, and the eigensolver's
/// backward error tracks the norm of the balanced matrix.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c: f64 = (0..n).filter(|&j| j != i).map(|j| m[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                c *= RADIX * RADIX;
                f *= RADIX;
            }
            while c >= r * RADIX {
                c /= RADIX * RADIX;
                f /= RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if converged {
            return;
        }
    }
}

/// Eigenvalues of the balanced companion matrix of the monic polynomial with
/// ascending coefficients `monic` (the leading 1 is implicit, so the slice
/// holds the n trailing coefficients).
pub(crate) fn companion_eigen_seeds(monic_tail: &[f64]) -> Result<Vec<Complex64>> {
    let n = monic_tail.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic_tail[i];
    }
    balance(&mut m);
    let eig = m.complex_eigenvalues();
    Ok(eig.iter().map(|e| Complex64::new(e.re, e.im)).collect())
}

/// Horner evaluation of the monic polynomial and its derivative. `tail`
/// holds the n trailing coefficients ascending; the leading 1 is implicit.
fn horner_pair<R: Real>(tail: &[R], z: &Cplx<R>, cx: &R::Ctx) -> (Cplx<R>, Cplx<R>) {
    let mut p = Cplx::one(cx);
    let mut dp = Cplx::zero(cx);
    for c in tail.iter().rev() {
        dp = dp.mul(z, cx).add(&p, cx);
        p = p.mul(z, cx).add(&Cplx::real(c.clone(), cx), cx);
    }
    (p, dp)
}

/// Aberth-Ehrlich simultaneous refinement of all roots of the monic
/// polynomial with trailing coefficients `tail`. Quadratically convergent
/// from eigenvalue-quality seeds; in extended precision a handful of sweeps
/// doubles the correct bits each time. Multiple roots converge only
/// linearly and stall near the half-precision floor, which is accepted and
/// left to the merge stage.
pub(crate) fn aberth_polish<R: Real>(
    tail: &[R],
    mut roots: Vec<Cplx<R>>,
    cx: &R::Ctx,
) -> Result<Vec<Cplx<R>>> {
    let n = roots.len();
    debug_assert_eq!(n, tail.len());
    let full_gap = R::working_bits(cx) - 8;
    let floor_exp = -R::working_bits(cx);
    let mut worst_gap = 0i64;
    for _ in 0..100 {
        let mut all_converged = true;
        worst_gap = i64::MAX;
        for i in 0..n {
            let (h, dh) = horner_pair(tail, &roots[i], cx);
            if h.re.is_zero() && h.im.is_zero() {
                continue;
            }
            let scale_exp = roots[i].exp2_approx().max(floor_exp);
            // Newton ratio, with a guard against a vanishing derivative at
            // (numerically) multiple roots: fall back to a fixed shrink of
            // the residual scale so the iterate escapes the flat spot.
            let nr = if dh.exp2_approx() <= h.exp2_approx() - R::working_bits(cx) {
                Cplx::lift(Complex64::new(2f64.powi(-8), 0.0), cx)
                    .scale(&R::lift(2f64.powi(scale_exp.clamp(-600, 600) as i32), cx), cx)
            } else {
                h.div(&dh, cx)
            };
            let mut s = Cplx::zero(cx);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let diff = roots[i].sub(&roots[j], cx);
                if diff.exp2_approx() <= scale_exp - R::working_bits(cx) {
                    continue;
                }
                s = s.add(&Cplx::one(cx).div(&diff, cx), cx);
            }
            let denom = Cplx::one(cx).sub(&nr.mul(&s, cx), cx);
            let delta = if denom.exp2_approx() <= -(R::working_bits(cx) / 2) {
                nr
            } else {
                nr.div(&denom, cx)
            };
            roots[i] = roots[i].sub(&delta, cx);
            let gap = roots[i].exp2_approx().max(floor_exp) - delta.exp2_approx();
            worst_gap = worst_gap.min(gap);
            if gap < full_gap {
                all_converged = false;
            }
        }
        if all_converged {
            return Ok(roots);
        }
    }
    // Multiple roots legitimately stall around half precision; anything
    // coarser than that is a genuine failure.
    if worst_gap >= R::working_bits(cx) / 2 - 4 {
        Ok(roots)
    } else {
        Err(Error::Precision(format!(
            "root refinement stalled with {worst_gap} correct bits out of {}; \
             the complement's roots are too ill-conditioned for this precision",
            R::working_bits(cx)
        )))
    }
}

/// Organize polished w-roots into reciprocal/conjugate selection units.
///
/// Stages: snap conjugate symmetry exact, reject roots at the unit circle,
/// match reciprocal partners across the circle, link conjugate pairs into
/// quadruple units, merge numerically coincident units (with a warning), and
/// sort deterministically by (|w|, arg w) of the inside representative.
pub(crate) fn pair_roots<R: Real>(
    w_roots: Vec<Cplx<R>>,
    d: usize,
    tols: &PairingTols,
    cx: &R::Ctx,
) -> Result<Paired<R>> {
    if w_roots.len() != 2 * d {
        return Err(Error::Degenerate(format!(
            "expected {} roots in the w-plane, found {}",
            2 * d,
            w_roots.len()
        )));
    }
    let mut warnings = Vec::new();

    // Tolerances shrink with the working precision so extended-precision
    // runs can resolve structure that doubles cannot, but never loosen
    // beyond the configured double-precision defaults.
    let quarter_eps = 2f64.powi((-(R::working_bits(cx) / 4)).clamp(-600, 0) as i32);
    let axis_tol = tols.merge_tol.min(quarter_eps);
    let merge_tol = tols.merge_tol.min(quarter_eps);

    // Conjugate canonicalization: the coefficients are real, so the root
    // multiset is conjugate-closed up to noise. Snap near-axis roots onto
    // the axis and remaining roots into exactly conjugate pairs.
    let mut reals: Vec<Cplx<R>> = Vec::new();
    let mut uppers: Vec<Cplx<R>> = Vec::new(); // one exact representative per conjugate pair
    let mut pending: Vec<Cplx<R>> = Vec::new();
    for r in w_roots {
        let p = r.to_c64();
        if p.im.abs() <= axis_tol * (1.0 + p.norm()) {
            reals.push(Cplx::real(r.re, cx));
        } else {
            pending.push(r);
        }
    }
    while let Some(r) = pending.pop() {
        let rp = r.to_c64();
        let mut best: Option<(usize, f64)> = None;
        for (j, other) in pending.iter().enumerate() {
            let err = (other.to_c64() - rp.conj()).norm();
            if best.is_none_or(|(_, b)| err < b) {
                best = Some((j, err));
            }
        }
        let Some((j, err)) = best else {
            return Err(Error::Precision(
                "conjugate symmetry of the root set lost: an off-axis root has no partner"
                    .into(),
            ));
        };
        if err > 10.0 * axis_tol * (1.0 + rp.norm()) {
            return Err(Error::Precision(format!(
                "conjugate symmetry of the root set lost near w = {rp}: \
                 closest partner is {err:e} away"
            )));
        }
        pending.swap_remove(j);
        uppers.push(if rp.im > 0.0 { r } else { r.conj() });
    }

    // Unit-circle rejection happens at the z-level: |z| - 1 = sqrt|w| - 1.
    for p in reals
        .iter()
        .chain(&uppers)
        .map(|r| r.to_c64())
    {
        if (p.norm().sqrt() - 1.0).abs() < tols.unit_circle_tol {
            return Err(Error::InvalidTarget(format!(
                "a complement root sits on the unit circle (|z| - 1 = {:e}); \
                 the target is too close to the max-norm bound 1",
                p.norm().sqrt() - 1.0
            )));
        }
    }

    // Reciprocal matching: split by |w| against 1 and greedily pair each
    // inside root with the reciprocal-closest outside root. Both sides of a
    // conjugate pair are represented by the member above the axis, and the
    // reciprocal of an upper root lies below, so the test conjugates one
    // side; for real roots, that is a no-op.
    let match_err = |a: Complex64, b: Complex64| (a * b.conj() - 1.0).norm();
    let pair_up = |mut ins: Vec<Cplx<R>>, mut outs: Vec<Cplx<R>>| -> Result<Vec<(Cplx<R>, Cplx<R>)>> {
        if ins.len() != outs.len() {
            return Err(Error::Precision(format!(
                "reciprocal pairing failed: {} roots inside the unit disc vs {} outside; \
                 consider the extended-precision backend",
                ins.len(),
                outs.len()
            )));
        }
        ins.sort_by(|a, b| cmp_f64(a.to_c64().norm(), b.to_c64().norm()));
        let mut pairs = Vec::with_capacity(ins.len());
        for w in ins {
            let wp = w.to_c64();
            let (j, err) = outs
                .iter()
                .enumerate()
                .map(|(j, v)| (j, match_err(wp, v.to_c64())))
                .min_by(|a, b| cmp_f64(a.1, b.1))
                .expect("non-empty outside pool");
            if err > 4.0 * tols.pairing_tol {
                return Err(Error::Precision(format!(
                    "reciprocal pairing failed near w = {wp}: best |w w' - 1| = {err:e}; \
                     consider the extended-precision backend"
                )));
            }
            pairs.push((w, outs.swap_remove(j)));
        }
        Ok(pairs)
    };

    let (real_in, real_out): (Vec<_>, Vec<_>) =
        reals.into_iter().partition(|r| r.to_c64().norm() < 1.0);
    let (upper_in, upper_out): (Vec<_>, Vec<_>) =
        uppers.into_iter().partition(|r| r.to_c64().norm() < 1.0);

    let mut units: Vec<Unit<R>> = pair_up(real_in, real_out)?
        .into_iter()
        .map(|(w, v)| Unit {
            inside: vec![w],
            outside: vec![v],
            multiplicity: 1,
        })
        .collect();
    // Conjugate quadruples: pairing the upper representatives implies the
    // mirrored pairing below the axis, so build both members exactly.
    units.extend(pair_up(upper_in, upper_out)?.into_iter().map(|(w, v)| Unit {
        inside: vec![w.clone(), w.conj()],
        outside: vec![v.conj(), v],
        multiplicity: 1,
    }));

    // Merge numerically coincident units: a multiple root split by the
    // eigensolver comes back as a tight cluster.
    units.sort_by(|a, b| {
        let (ra, rb) = (a.rep(), b.rep());
        cmp_f64(ra.norm(), rb.norm()).then(cmp_f64(ra.arg(), rb.arg()))
    });
    let mut merged: Vec<Unit<R>> = Vec::with_capacity(units.len());
    for u in units {
        let coincident = merged.last().is_some_and(|m: &Unit<R>| {
            m.inside.len() == u.inside.len()
                && (m.rep() - u.rep()).norm() <= merge_tol * (1.0 + u.rep().norm())
        });
        if coincident {
            let m = merged.last_mut().expect("just matched");
            m.multiplicity += u.multiplicity;
            warnings.push(format!(
                "merged numerically coincident roots near w = {} (multiplicity {}); \
                 root selection treats them as one repeated root",
                m.rep(),
                m.multiplicity
            ));
        } else {
            merged.push(u);
        }
    }

    let chosen: usize = merged.iter().map(Unit::side_len).sum();
    if chosen != d {
        return Err(Error::Precision(format!(
            "root bookkeeping is inconsistent: one side of the units holds {chosen} \
             roots, expected {d}"
        )));
    }

    Ok(Paired {
        d,
        units: merged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::scalar::{BigCtx, BigReal};

    fn tols() -> PairingTols {
        PairingTols {
            unit_circle_tol: 1e-8,
            pairing_tol: 1e-6,
            merge_tol: 1e-6,
        }
    }

    /// Ascending monic tail of prod (w - r_i) computed by convolution.
    fn monic_tail_from_roots(roots: &[Complex64]) -> Vec<f64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        assert!(c.iter().all(|z| z.im.abs() < 1e-12));
        c.pop(); // implicit leading 1
        c.iter().map(|z| z.re).collect()
    }

    #[test]
    fn w_extraction_rejects_odd_content() {
        let mut h = vec![0.0; 9];
        h[0] = -0.1;
        h[4] = 1.0;
        h[8] = -0.1;
        assert_eq!(w_coeffs_from_h(&h).unwrap(), vec![-0.1, 0.0, 1.0, 0.0, -0.1]);
        h[3] = 1e-3;
        assert!(matches!(w_coeffs_from_h(&h), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn companion_plus_polish_recovers_known_roots() {
        let exact = [
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(-4.0, 0.0),
            Complex64::new(-0.25, 0.0),
        ];
        let tail = monic_tail_from_roots(&exact);
        let seeds = companion_eigen_seeds(&tail).unwrap();
        let polished = aberth_polish(
            &tail,
            seeds.into_iter().map(|s| Cplx::<f64>::lift(s, &())).collect(),
            &(),
        )
        .unwrap();
        let mut got: Vec<f64> = polished.iter().map(|r| r.to_c64().re).collect();
        got.sort_by(|a, b| cmp_f64(*a, *b));
        let mut want: Vec<f64> = exact.iter().map(|e| e.re).collect();
        want.sort_by(|a, b| cmp_f64(*a, *b));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "got {g}, want {w}");
        }
    }

    #[test]
    fn polish_reaches_extended_precision_from_coarse_seeds() {
        let cx = BigCtx { bits: 512 };
        let exact = [
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.25, 0.75),
            Complex64::new(0.25, -0.75),
        ];
        let tail_f64 = monic_tail_from_roots(&exact);
        let tail: Vec<BigReal> = tail_f64.iter().map(|&c| BigReal::lift(c, &cx)).collect();
        let seeds: Vec<Cplx<BigReal>> = exact
            .iter()
            .map(|e| Cplx::lift(e + Complex64::new(1e-4, -2e-4), &cx))
            .collect();
        let polished = aberth_polish(&tail, seeds, &cx).unwrap();
        for r in &polished {
            let best = exact
                .iter()
                .map(|e| {
                    r.sub(&Cplx::lift(*e, &cx), &cx)
                        .abs(&cx)
                        .exp2_approx()
                })
                .min()
                .unwrap();
            // Dyadic exact roots, 512-bit arithmetic: expect essentially all
            // bits correct after the quadratic phase.
            assert!(best < -480, "residual exponent {best}");
        }
    }

    #[test]
    fn pairing_builds_real_and_quadruple_units() {
        let cx = ();
        let q = Complex64::new(0.2, 0.3);
        let mut roots: Vec<Cplx<f64>> = Vec::new();
        for w in [
            Complex64::new(0.1, 0.0),
            Complex64::new(10.0, 0.0),
            q,
            q.conj(),
            1.0 / q,
            (1.0 / q).conj(),
        ] {
            roots.push(Cplx::lift(w, &cx));
        }
        let paired = pair_roots(roots, 3, &tols(), &cx).unwrap();
        assert!(paired.warnings.is_empty());
        assert_eq!(paired.units.len(), 2);
        // Sorted by |rep|: the real pair at 0.1 first, then the quadruple.
        assert_eq!(paired.units[0].inside.len(), 1);
        assert!((paired.units[0].inside[0].to_c64().re - 0.1).abs() < 1e-15);
        assert_eq!(paired.units[1].inside.len(), 2);
        assert!((paired.units[1].rep() - q).norm() < 1e-15);
        // The outside of the quadruple is the exact conjugate pair of 1/q.
        let v = paired.units[1].outside[0].to_c64();
        assert!((v - 1.0 / q).norm() < 1e-12 || (v - (1.0 / q).conj()).norm() < 1e-12);
    }

    #[test]
    fn pairing_rejects_a_missing_reciprocal_partner() {
        let cx = ();
        let roots: Vec<Cplx<f64>> = [
            Complex64::new(0.1, 0.0),
            Complex64::new(9.0, 0.0), // not 1/0.1
        ]
        .iter()
        .map(|&w| Cplx::lift(w, &cx))
        .collect();
        match pair_roots(roots, 1, &tols(), &cx) {
            Err(Error::Precision(msg)) => assert!(msg.contains("reciprocal")),
            other => panic!("expected a precision error, got {other:?}"),
        }
    }

    #[test]
    fn near_coincident_pairs_merge_with_a_warning() {
        let cx = ();
        let roots: Vec<Cplx<f64>> = [
            Complex64::new(0.3, 0.0),
            Complex64::new(0.3 + 1e-9, 0.0),
            Complex64::new(1.0 / 0.3, 0.0),
            Complex64::new(1.0 / (0.3 + 1e-9), 0.0),
        ]
        .iter()
        .map(|&w| Cplx::lift(w, &cx))
        .collect();
        let paired = pair_roots(roots, 2, &tols(), &cx).unwrap();
        assert_eq!(paired.units.len(), 1);
        assert_eq!(paired.units[0].multiplicity, 2);
        assert!(!paired.warnings.is_empty());
    }

    #[test]
    fn unit_circle_roots_are_rejected_as_invalid_targets() {
        let cx = ();
        let roots: Vec<Cplx<f64>> = [
            Complex64::new(1.0 + 1e-12, 0.0),
            Complex64::new(1.0 - 1e-12, 0.0),
        ]
        .iter()
        .map(|&w| Cplx::lift(w, &cx))
        .collect();
        assert!(matches!(
            pair_roots(roots, 1, &tols(), &cx),
            Err(Error::InvalidTarget(_))
        ));
    }
}

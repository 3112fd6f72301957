//! Symmetric phase reduction of a complementary polynomial pair.
//!
//! Given the pair (P, Q) with P = f + i * p_im of degree d and Q of degree
//! d - 1, the QSP unitary that realizes it factors one rotation at a time:
//! each level extracts the outermost phase from the ratio of leading
//! coefficients and conjugates the pair down to degree d - 2. Everything is
//! carried in Chebyshev bases - P in first-kind coefficients (complex), Q in
//! second-kind coefficients (real) - where the degree-lowering step is a
//! sparse linear map and the cost per level stays O(d).
//!
//! The recursion enforces the structural facts it relies on at runtime: the
//! two top coefficients of each workspace must cancel, the leading ratio
//! must stay unimodular, and the chain of Q leading coefficients must keep
//! its sign, never decrease in magnitude, and never exceed one. Violations
//! are precision failures, not bugs to paper over: they are exactly how
//! ill-conditioning at large degree announces itself.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::scalar::{t_to_u_g, Cplx, Real};
use crate::error::{Error, Result};

/// A Q-leading coefficient smaller than this is treated as structurally
/// vanished (the reduction cannot continue past it).
const VANISH_TOL: f64 = 1e-12;
/// Allowed deviation of |p_n / q_{n-1}| from 1 at each extraction.
const MODULUS_TOL: f64 = 1e-6;
/// Slack for the leading-chain monotonicity and upper-bound checks.
const CHAIN_SLACK: f64 = 1e-9;
/// Allowed deviation of the terminal leading coefficient from unit modulus.
const TERMINAL_TOL: f64 = 1e-9;
/// Tolerance for the two even-degree terminal identities (the middle
/// rotation's cosine must equal the last chain value, and the previous
/// level's constant term must be purely imaginary after derotation).
const MIDDLE_ID_TOL: f64 = 1e-7;

/// Diagnostics for one extraction level.
#[derive(Clone, Debug)]
pub struct ReductionLevel {
    /// Degree of P when this phase was extracted.
    pub degree: usize,
    /// Leading coefficient of P at this level.
    pub p_top: Complex64,
    /// Leading coefficient of Q at this level.
    pub q_top: f64,
    /// Extracted phase, in [-pi/2, pi/2).
    pub phi: f64,
    /// | |p_top / q_top| - 1 |; the ratio should be a pure rotation.
    pub modulus_residual: f64,
    /// Residual of sin(2 phi) against the previous level's subleading
    /// coefficient; `None` on the first level, which has no predecessor.
    pub sin_residual: Option<f64>,
}

/// Full record of a reduction run: per-level diagnostics, the chain of Q
/// leading coefficients, and the even-degree terminal data.
#[derive(Clone, Debug)]
pub struct ReductionTrace {
    pub levels: Vec<ReductionLevel>,
    /// Q leading coefficient per level; constant sign, nondecreasing in
    /// magnitude, bounded by 1.
    pub q_chain: Vec<f64>,
    /// Middle rotation angle in [-pi, pi); even degree only.
    pub middle_phase: Option<f64>,
    /// | |P| - 1 | at the terminal constant; even degree only.
    pub middle_modulus_residual: Option<f64>,
    /// |cos(middle) - last chain value|; even degree only.
    pub middle_cos_residual: Option<f64>,
    /// |Re[p_0 e^{-2 i phi}]| from the last extraction level; even degree
    /// only.
    pub middle_realpart_residual: Option<f64>,
    /// Whether the run was started on (P, -Q) to reach the mirrored
    /// solution family (even degree only).
    pub q_negated: bool,
}

/// One conjugation step: given the level's derotation e2 = e^{-2 i phi},
/// produce the untruncated workspaces for the next level,
///
///   P' = x^2 A - (1 - x^2) A* + 2 x (1 - x^2) Q,     A = e2 P,
///   Q' = (2 x^2 - 1) Q - 2 x Re[A],
///
/// as Chebyshev coefficient maps (T-basis for P', U-basis for Q'). The
/// returned vectors have lengths n + 3 and n + 2; the caller verifies that
/// the slots above degrees n - 2 and n - 3 cancel and truncates.
fn conjugation_step<R: Real>(
    p: &[Cplx<R>],
    q: &[R],
    e2: &Cplx<R>,
    cx: &R::Ctx,
) -> (Vec<Cplx<R>>, Vec<R>) {
    let n = p.len() - 1;
    let quarter = R::lift(0.25, cx);
    let half = R::lift(0.5, cx);
    let a: Vec<Cplx<R>> = p.iter().map(|c| c.mul(e2, cx)).collect();

    let mut pn = vec![Cplx::zero(cx); n + 3];
    for (k, ak) in a.iter().enumerate() {
        let km2 = k.abs_diff(2);
        // x^2 T_k = (T_{k+2} + 2 T_k + T_{|k-2|}) / 4
        let t = ak.scale(&quarter, cx);
        pn[k + 2] = pn[k + 2].add(&t, cx);
        pn[k] = pn[k].add(&t, cx).add(&t, cx);
        pn[km2] = pn[km2].add(&t, cx);
        // -(1 - x^2) T_k = (T_{k+2} + T_{|k-2|} - 2 T_k) / 4, on conj(a_k)
        let c = ak.conj().scale(&quarter, cx);
        pn[k + 2] = pn[k + 2].add(&c, cx);
        pn[km2] = pn[km2].add(&c, cx);
        pn[k] = pn[k].sub(&c, cx).sub(&c, cx);
    }
    for (k, qk) in q.iter().enumerate() {
        // 2 x (1 - x^2) U_k = (T_{|k-1|} - T_{k+3}) / 2
        let t = Cplx::real(qk.mul(&half, cx), cx);
        let km1 = k.abs_diff(1);
        pn[km1] = pn[km1].add(&t, cx);
        pn[k + 3] = pn[k + 3].sub(&t, cx);
    }

    let mut qn = vec![R::lift(0.0, cx); n + 2];
    for (k, qk) in q.iter().enumerate() {
        // (2 x^2 - 1) U_k = (U_{k+2} + U_{k-2}) / 2, U_{-1} = 0, U_{-2} = -U_0
        let t = qk.mul(&half, cx);
        qn[k + 2] = qn[k + 2].add(&t, cx);
        match k {
            0 => qn[0] = qn[0].sub(&t, cx),
            1 => {}
            _ => qn[k - 2] = qn[k - 2].add(&t, cx),
        }
    }
    // 2 x T_k = T_{k+1} + T_{|k-1|}, applied to Re[A], then rebased to U.
    let mut tx = vec![R::lift(0.0, cx); n + 2];
    for (k, ak) in a.iter().enumerate() {
        tx[k + 1] = tx[k + 1].add(&ak.re, cx);
        let km1 = k.abs_diff(1);
        tx[km1] = tx[km1].add(&ak.re, cx);
    }
    for (slot, u) in qn.iter_mut().zip(t_to_u_g(&tx, cx)) {
        *slot = slot.sub(&u, cx);
    }
    (pn, qn)
}

/// Run the reduction on coefficient vectors (P complex in the T-basis,
/// length d + 1; Q real in the U-basis, length d) and return the reduced
/// phases [phi_0, ..., phi_{ceil(d/2)}] - outermost first, middle last -
/// together with the full trace. The caller may pass Q negated (even degree
/// only); the sign is recorded, and the chain checks run on magnitudes.
pub(crate) fn reduce_generic<R: Real>(
    p_in: Vec<Cplx<R>>,
    q_in: Vec<R>,
    cx: &R::Ctx,
) -> Result<(Vec<f64>, ReductionTrace)> {
    if p_in.len() < 2 {
        return Err(Error::InvalidInput(
            "phase reduction needs degree >= 1".into(),
        ));
    }
    if q_in.len() + 1 != p_in.len() {
        return Err(Error::InvalidInput(format!(
            "pair shape mismatch: P has degree {} but Q has {} coefficients, expected {}",
            p_in.len() - 1,
            q_in.len(),
            p_in.len() - 1
        )));
    }
    let d = p_in.len() - 1;
    let mut p = p_in;
    let mut q = q_in;
    let q_negated = q.last().expect("non-empty Q").to_f64() < 0.0;

    let mut phases: Vec<f64> = Vec::with_capacity(d / 2 + 2);
    let mut levels: Vec<ReductionLevel> = Vec::new();
    let mut q_chain: Vec<f64> = Vec::new();
    // (subleading p, e^{-2 i phi}) of the previous level, for the sin check.
    let mut prev_sub: Option<(Complex64, Complex64)> = None;
    let mut middle: Option<(f64, f64, f64, f64)> = None;

    loop {
        let n = p.len() - 1;
        let q_top = q.last().expect("non-empty Q").clone();
        let q_top_f = q_top.to_f64();
        if q_top_f.abs() < VANISH_TOL {
            return Err(Error::Degenerate(format!(
                "leading coefficient of the second component vanished ({q_top_f:e}) \
                 at degree {n}"
            )));
        }
        if let Some(&prev) = q_chain.last() {
            if prev.signum() != q_top_f.signum() {
                return Err(Error::Precision(format!(
                    "leading chain changed sign at degree {n} ({prev:e} -> {q_top_f:e})"
                )));
            }
            if q_top_f.abs() < prev.abs() - CHAIN_SLACK {
                return Err(Error::Precision(format!(
                    "leading chain decreased at degree {n} ({:e} -> {:e}); \
                     the pair is not numerically consistent",
                    prev.abs(),
                    q_top_f.abs()
                )));
            }
        }
        if q_top_f.abs() > 1.0 + CHAIN_SLACK {
            return Err(Error::Precision(format!(
                "leading chain exceeded 1 at degree {n} (|q| = {:e})",
                q_top_f.abs()
            )));
        }
        q_chain.push(q_top_f);

        let ratio = Cplx::new(p[n].re.div(&q_top, cx), p[n].im.div(&q_top, cx));
        let modulus = ratio.abs(cx);
        let modulus_residual = (modulus.to_f64() - 1.0).abs();
        if modulus_residual > MODULUS_TOL {
            return Err(Error::Precision(format!(
                "|p_{n} / q_{}| = {} at degree {n}; the pair does not satisfy \
                 the unit-modulus leading relation",
                n - 1,
                modulus.to_f64()
            )));
        }
        let half = R::lift(0.5, cx);
        let mut phi = ratio.arg(cx).mul(&half, cx).to_f64();
        if phi >= FRAC_PI_2 {
            phi -= PI; // e^{2 i phi} is pi-periodic; keep [-pi/2, pi/2)
        }
        // Derotation taken from the ratio itself rather than from cos/sin of
        // the extracted angle: exactly unimodular up to one division.
        let inv_mod = R::lift(1.0, cx).div(&modulus, cx);
        let e2 = ratio.conj().scale(&inv_mod, cx);

        let sin_residual = prev_sub.map(|(sub, pe2)| {
            ((2.0 * phi).sin() - (sub * pe2).im / q_top_f).abs()
        });
        levels.push(ReductionLevel {
            degree: n,
            p_top: p[n].to_c64(),
            q_top: q_top_f,
            phi,
            modulus_residual,
            sin_residual,
        });
        phases.push(phi);

        if n == 1 {
            // Odd-degree terminal: Q is the constant +/-1 and the last phase
            // came straight from p_1.
            let dev = (q_top_f.abs() - 1.0).abs();
            if dev > TERMINAL_TOL {
                return Err(Error::Precision(format!(
                    "terminal |q_0| = {} differs from 1 by {dev:e}",
                    q_top_f.abs()
                )));
            }
            break;
        }

        prev_sub = Some((p[n - 2].to_c64(), e2.to_c64()));
        let p0_snapshot = p[0].to_c64();

        let (mut pn, mut qn) = conjugation_step(&p, &q, &e2, cx);
        // The four slots above the reduced degrees must cancel to roundoff
        // of the working precision; anything louder means the recursion has
        // lost the structure it depends on.
        let scale_exp = pn
            .iter()
            .map(Cplx::exp2_approx)
            .max()
            .expect("non-empty workspace");
        let margin = R::working_bits(cx) / 2;
        for (label, exp) in [
            ("P", pn[n + 2].exp2_approx()),
            ("P", pn[n].exp2_approx()),
            ("Q", qn[n + 1].exp2_approx()),
            ("Q", qn[n - 1].exp2_approx()),
        ] {
            if exp > scale_exp - margin {
                return Err(Error::Precision(format!(
                    "top {label} coefficient failed to cancel at degree {n} \
                     (2^{exp} against scale 2^{scale_exp}); \
                     the working precision cannot carry this reduction"
                )));
            }
        }
        pn.truncate(n - 1);
        qn.truncate(n.saturating_sub(2));
        p = pn;
        q = qn;

        if n == 2 {
            // Even-degree terminal: P is a unimodular constant, Q is gone.
            let p0 = &p[0];
            let mut mid = p0.arg(cx).to_f64();
            if mid >= PI {
                mid -= 2.0 * PI; // keep [-pi, pi)
            }
            let modulus_dev = (p0.abs(cx).to_f64() - 1.0).abs();
            if modulus_dev > TERMINAL_TOL {
                return Err(Error::Precision(format!(
                    "terminal |P| = {} differs from 1 by {modulus_dev:e}",
                    p0.abs(cx).to_f64()
                )));
            }
            let cos_residual = (mid.cos() - q_top_f).abs();
            let (_, pe2) = prev_sub.expect("set above");
            let re_residual = (p0_snapshot * pe2).re.abs();
            if cos_residual > MIDDLE_ID_TOL || re_residual > MIDDLE_ID_TOL {
                return Err(Error::Precision(format!(
                    "middle-rotation identities violated: cos residual {cos_residual:e}, \
                     real-part residual {re_residual:e}"
                )));
            }
            phases.push(mid);
            middle = Some((mid, modulus_dev, cos_residual, re_residual));
            break;
        }
    }

    let trace = ReductionTrace {
        levels,
        q_chain,
        middle_phase: middle.map(|m| m.0),
        middle_modulus_residual: middle.map(|m| m.1),
        middle_cos_residual: middle.map(|m| m.2),
        middle_realpart_residual: middle.map(|m| m.3),
        q_negated,
    };
    Ok((phases, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::{eval_t, eval_u};

    /// Evaluate complex T-series / real U-series pointwise.
    fn eval_pt(p: &[Complex64], x: f64) -> Complex64 {
        p.iter()
            .enumerate()
            .map(|(k, c)| c * eval_t(k, x).unwrap())
            .sum()
    }
    fn eval_qu(q: &[f64], x: f64) -> f64 {
        q.iter()
            .enumerate()
            .map(|(k, c)| c * eval_u(k, x).unwrap())
            .sum()
    }

    #[test]
    fn conjugation_step_matches_its_defining_formula_pointwise() {
        // The step is a polynomial identity; no admissibility is required,
        // and e2 need not even be unimodular. Exercise it on arbitrary data.
        let p: Vec<Cplx<f64>> = [
            (0.3, -0.2),
            (-1.1, 0.4),
            (0.05, 0.9),
            (0.7, 0.7),
            (-0.33, 0.21),
            (0.0, -0.6),
            (1.3, -0.05),
        ]
        .iter()
        .map(|&(re, im)| Cplx::new(re, im))
        .collect();
        let q = vec![0.4, -0.9, 0.13, 0.77, -0.21, 0.5];
        let e2 = Cplx::new(0.3, -1.1);
        let (pn, qn) = conjugation_step(&p, &q, &e2, &());

        let p64: Vec<Complex64> = p.iter().map(Cplx::to_c64).collect();
        let pn64: Vec<Complex64> = pn.iter().map(Cplx::to_c64).collect();
        for i in 0..=20 {
            let x = -0.95 + 0.09 * i as f64;
            let a = e2.to_c64() * eval_pt(&p64, x);
            let qv = eval_qu(&q, x);
            let want_p = x * x * a - (1.0 - x * x) * a.conj() + 2.0 * x * (1.0 - x * x) * qv;
            let got_p = eval_pt(&pn64, x);
            assert!((got_p - want_p).norm() < 1e-12, "P' mismatch at x = {x}");
            let want_q = (2.0 * x * x - 1.0) * qv - 2.0 * x * a.re;
            let got_q = eval_qu(&qn, x);
            assert!((got_q - want_q).abs() < 1e-12, "Q' mismatch at x = {x}");
        }
    }

    /// (i T_d, U_{d-1}) reduces to (pi/4, 0, ..., 0) for every degree: the
    /// whole chain is explicit, making it a closed-form regression anchor.
    #[test]
    fn zero_target_pair_reduces_to_the_known_phase_chain() {
        for d in [1usize, 2, 3, 6, 9, 14] {
            let mut p = vec![Cplx::<f64>::zero(&()); d + 1];
            p[d] = Cplx::new(0.0, 1.0);
            let mut q = vec![0.0; d];
            q[d - 1] = 1.0;
            let (phases, trace) = reduce_generic(p, q, &()).unwrap();
            assert_eq!(phases.len(), d / 2 + 1);
            assert!((phases[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15, "d = {d}");
            for &rest in &phases[1..] {
                assert!(rest.abs() < 1e-15, "d = {d}");
            }
            assert!(trace.q_chain.iter().all(|&c| (c - 1.0).abs() < 1e-15));
            if d % 2 == 0 {
                assert_eq!(trace.middle_phase, Some(0.0));
                assert_eq!(trace.middle_cos_residual, Some(0.0));
            } else {
                assert!(trace.middle_phase.is_none());
            }
            for lvl in &trace.levels {
                assert!(lvl.modulus_residual < 1e-15);
                if let Some(s) = lvl.sin_residual {
                    assert!(s < 1e-15);
                }
            }
        }
    }

    /// Degree-2 pair for f = T_2 / 2 in closed form: P_im = sqrt(3)/2 T_2
    /// and Q = U_1, derived by factoring 1 - f^2 over its four real Laurent
    /// roots. Both signs of Q reduce in closed form.
    #[test]
    fn analytic_degree_two_pair_reduces_in_closed_form() {
        let p = || {
            vec![
                Cplx::<f64>::zero(&()),
                Cplx::zero(&()),
                Cplx::new(0.5, 0.75f64.sqrt()),
            ]
        };

        let (phases, trace) = reduce_generic(p(), vec![0.0, 1.0], &()).unwrap();
        assert!((phases[0] - PI / 6.0).abs() < 1e-15);
        assert!((phases[1] - 0.0).abs() < 1e-15);
        assert!(!trace.q_negated);
        assert!(trace.middle_cos_residual.unwrap() < 1e-15);
        assert!(trace.middle_realpart_residual.unwrap() < 1e-15);

        // Negating Q lands in the mirrored family: (-pi/3, -pi).
        let (phases, trace) = reduce_generic(p(), vec![0.0, -1.0], &()).unwrap();
        assert!((phases[0] + PI / 3.0).abs() < 1e-15);
        assert!((phases[1] + PI).abs() < 1e-15);
        assert!(trace.q_negated);
        assert_eq!(trace.q_chain, vec![-1.0]);
        // cos(-pi) = -1 matches the negated chain value, signed.
        assert!(trace.middle_cos_residual.unwrap() < 1e-15);
    }

    #[test]
    fn vanishing_leading_coefficient_is_degenerate() {
        let p = vec![Cplx::<f64>::zero(&()), Cplx::zero(&()), Cplx::one(&())];
        let q = vec![0.3, 1e-13];
        assert!(matches!(
            reduce_generic(p, q, &()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn non_unimodular_leading_ratio_is_a_precision_failure() {
        let p = vec![
            Cplx::<f64>::zero(&()),
            Cplx::zero(&()),
            Cplx::new(0.5, 0.5),
        ];
        let q = vec![0.0, 1.0];
        assert!(matches!(
            reduce_generic(p, q, &()),
            Err(Error::Precision(_))
        ));
    }
}

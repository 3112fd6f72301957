//! Scalar abstraction for the factorization pipeline.
//!
//! Root finding, pair construction, and phase reduction run either in
//! hardware doubles or in arbitrary-precision floats, selected at runtime.
//! Rather than duplicating the pipeline, it is written once against the
//! [`Real`] trait below. Public results are always plain `f64`; extended
//! precision is an internal workhorse for degrees where the Laurent roots
//! are too ill-conditioned for doubles.
//!
//! The trait is deliberately minimal: only the operations the pipeline
//! actually performs. Contexts are threaded explicitly because big-float
//! operations need a precision argument on every call.

use std::cell::RefCell;
use std::cmp::Ordering;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_complex::Complex64;

/// Rounding used for every big-float operation. Round-to-even keeps error
/// accumulation unbiased; nothing here needs directed rounding.
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    // Cache of computed constants (pi, and the series caches behind cos/atan).
    // Thread-local rather than shared: the cache mutates on use, and the
    // enumeration stage fans out across threads.
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache allocation"));
}

/// The scalar field the pipeline is instantiated over.
///
/// Implementations: `f64` (context `()`) and [`BigReal`] (context names a
/// precision in bits). All operations take the context last; `f64` ignores
/// it and compiles to the bare operation.
pub(crate) trait Real: Clone + std::fmt::Debug + Send + Sync {
    type Ctx: Clone + Send + Sync;

    fn lift(v: f64, cx: &Self::Ctx) -> Self;
    fn to_f64(&self) -> f64;

    fn add(&self, rhs: &Self, cx: &Self::Ctx) -> Self;
    fn sub(&self, rhs: &Self, cx: &Self::Ctx) -> Self;
    fn mul(&self, rhs: &Self, cx: &Self::Ctx) -> Self;
    fn div(&self, rhs: &Self, cx: &Self::Ctx) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self, cx: &Self::Ctx) -> Self;
    fn cos(&self, cx: &Self::Ctx) -> Self;
    fn atan2(y: &Self, x: &Self, cx: &Self::Ctx) -> Self;
    fn pi(cx: &Self::Ctx) -> Self;

    fn is_zero(&self) -> bool;
    fn lt(&self, rhs: &Self) -> bool;

    /// floor(log2 |x|), or `i64::MIN` for zero. Used for relative-size
    /// comparisons (convergence, cancellation checks) without ever leaving
    /// the exponent range of the type.
    fn exp2_approx(&self) -> i64;

    /// Significand width in bits: 53 for `f64`, the configured precision
    /// for big floats. Convergence thresholds are expressed relative to this.
    fn working_bits(cx: &Self::Ctx) -> i64;
}

impl Real for f64 {
    type Ctx = ();

    fn lift(v: f64, _: &()) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self, _: &()) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self, _: &()) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self, _: &()) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self, _: &()) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self, _: &()) -> Self {
        f64::sqrt(*self)
    }
    fn cos(&self, _: &()) -> Self {
        f64::cos(*self)
    }
    fn atan2(y: &Self, x: &Self, _: &()) -> Self {
        f64::atan2(*y, *x)
    }
    fn pi(_: &()) -> Self {
        std::f64::consts::PI
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn lt(&self, rhs: &Self) -> bool {
        self < rhs
    }
    fn exp2_approx(&self) -> i64 {
        if *self == 0.0 {
            return i64::MIN;
        }
        let bits = self.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        if biased == 0 {
            // Subnormal: fall back to the slow path.
            self.abs().log2().floor() as i64
        } else {
            biased - 1023
        }
    }
    fn working_bits(_: &()) -> i64 {
        53
    }
}

/// Precision context for [`BigReal`]: significand width in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct BigCtx {
    pub bits: usize,
}

/// Arbitrary-precision scalar backed by `astro_float::BigFloat`.
#[derive(Clone, Debug)]
pub(crate) struct BigReal(pub BigFloat);

impl BigReal {
    fn bf(v: &BigFloat) -> Self {
        debug_assert!(!v.is_nan(), "big-float operation produced NaN");
        BigReal(v.clone())
    }
}

impl Real for BigReal {
    type Ctx = BigCtx;

    fn lift(v: f64, cx: &BigCtx) -> Self {
        BigReal(BigFloat::from_f64(v, cx.bits))
    }

    // `BigFloat` exposes no public conversion back to `f64`, so rebuild one
    // from the raw parts: the value is sign * 0.mantissa * 2^e with the
    // mantissa normalized (leading bit set) and stored little-endian. Two
    // words of mantissa are more than a double can hold.
    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _, sign, e, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        let mut frac = 0.0f64;
        for (i, &w) in words.iter().rev().take(2).enumerate() {
            frac += w as f64 / 2f64.powi(64 * (i as i32 + 1));
        }
        let signed = if sign == Sign::Neg { -frac } else { frac };
        signed * 2f64.powi(e)
    }

    fn add(&self, rhs: &Self, cx: &BigCtx) -> Self {
        Self::bf(&self.0.add(&rhs.0, cx.bits, RM))
    }
    fn sub(&self, rhs: &Self, cx: &BigCtx) -> Self {
        Self::bf(&self.0.sub(&rhs.0, cx.bits, RM))
    }
    fn mul(&self, rhs: &Self, cx: &BigCtx) -> Self {
        Self::bf(&self.0.mul(&rhs.0, cx.bits, RM))
    }
    fn div(&self, rhs: &Self, cx: &BigCtx) -> Self {
        Self::bf(&self.0.div(&rhs.0, cx.bits, RM))
    }
    fn neg(&self) -> Self {
        BigReal(self.0.neg())
    }
    fn abs(&self) -> Self {
        BigReal(self.0.abs())
    }
    fn sqrt(&self, cx: &BigCtx) -> Self {
        Self::bf(&self.0.sqrt(cx.bits, RM))
    }
    fn cos(&self, cx: &BigCtx) -> Self {
        CONSTS.with(|cc| Self::bf(&self.0.cos(cx.bits, RM, &mut cc.borrow_mut())))
    }

    fn atan2(y: &Self, x: &Self, cx: &BigCtx) -> Self {
        // atan gives (-pi/2, pi/2); fix up the quadrant like the libm atan2.
        let pi = Self::pi(cx);
        if x.is_zero() && y.is_zero() {
            return Self::lift(0.0, cx);
        }
        if x.is_zero() {
            let half_pi = pi.mul(&Self::lift(0.5, cx), cx);
            return if y.0.is_negative() { half_pi.neg() } else { half_pi };
        }
        let base = CONSTS.with(|cc| {
            Self::bf(&y.0.div(&x.0, cx.bits, RM).atan(cx.bits, RM, &mut cc.borrow_mut()))
        });
        if x.0.is_negative() {
            if y.0.is_negative() {
                base.sub(&pi, cx)
            } else {
                base.add(&pi, cx)
            }
        } else {
            base
        }
    }

    fn pi(cx: &BigCtx) -> Self {
        CONSTS.with(|cc| Self::bf(&cc.borrow_mut().pi(cx.bits, RM)))
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn lt(&self, rhs: &Self) -> bool {
        matches!(self.0.cmp(&rhs.0), Some(c) if c < 0)
    }

    fn exp2_approx(&self) -> i64 {
        if self.0.is_zero() {
            return i64::MIN;
        }
        match self.0.as_raw_parts() {
            // Normalized mantissa lies in [1/2, 1), so log2 is in [e-1, e).
            Some((_, _, _, e, _)) => e as i64 - 1,
            None => i64::MIN,
        }
    }

    fn working_bits(cx: &BigCtx) -> i64 {
        cx.bits as i64
    }
}

/// Complex number over an abstract [`Real`]. Only what the pipeline needs;
/// notably division is the textbook formula, fine for the magnitude ranges
/// of reciprocal root pairs well inside the exponent range.
#[derive(Clone, Debug)]
pub(crate) struct Cplx<R: Real> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cplx<R> {
    pub fn new(re: R, im: R) -> Self {
        Cplx { re, im }
    }

    pub fn lift(v: Complex64, cx: &R::Ctx) -> Self {
        Cplx::new(R::lift(v.re, cx), R::lift(v.im, cx))
    }

    pub fn real(v: R, cx: &R::Ctx) -> Self {
        Cplx::new(v, R::lift(0.0, cx))
    }

    pub fn zero(cx: &R::Ctx) -> Self {
        Cplx::new(R::lift(0.0, cx), R::lift(0.0, cx))
    }

    pub fn one(cx: &R::Ctx) -> Self {
        Cplx::new(R::lift(1.0, cx), R::lift(0.0, cx))
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(&self, rhs: &Self, cx: &R::Ctx) -> Self {
        Cplx::new(self.re.add(&rhs.re, cx), self.im.add(&rhs.im, cx))
    }

    pub fn sub(&self, rhs: &Self, cx: &R::Ctx) -> Self {
        Cplx::new(self.re.sub(&rhs.re, cx), self.im.sub(&rhs.im, cx))
    }

    pub fn mul(&self, rhs: &Self, cx: &R::Ctx) -> Self {
        let re = self.re.mul(&rhs.re, cx).sub(&self.im.mul(&rhs.im, cx), cx);
        let im = self.re.mul(&rhs.im, cx).add(&self.im.mul(&rhs.re, cx), cx);
        Cplx::new(re, im)
    }

    pub fn div(&self, rhs: &Self, cx: &R::Ctx) -> Self {
        let den = rhs.abs_sq(cx);
        let re = self.re.mul(&rhs.re, cx).add(&self.im.mul(&rhs.im, cx), cx);
        let im = self.im.mul(&rhs.re, cx).sub(&self.re.mul(&rhs.im, cx), cx);
        Cplx::new(re.div(&den, cx), im.div(&den, cx))
    }

    pub fn scale(&self, s: &R, cx: &R::Ctx) -> Self {
        Cplx::new(self.re.mul(s, cx), self.im.mul(s, cx))
    }

    pub fn conj(&self) -> Self {
        Cplx::new(self.re.clone(), self.im.neg())
    }

    pub fn neg(&self) -> Self {
        Cplx::new(self.re.neg(), self.im.neg())
    }

    pub fn abs_sq(&self, cx: &R::Ctx) -> R {
        self.re.mul(&self.re, cx).add(&self.im.mul(&self.im, cx), cx)
    }

    pub fn abs(&self, cx: &R::Ctx) -> R {
        self.abs_sq(cx).sqrt(cx)
    }

    pub fn arg(&self, cx: &R::Ctx) -> R {
        R::atan2(&self.im, &self.re, cx)
    }

    /// Principal square root: branch cut on the negative real axis, result
    /// in the closed right half plane.
    pub fn sqrt(&self, cx: &R::Ctx) -> Self {
        let m = self.abs(cx);
        let half = R::lift(0.5, cx);
        let u = m.add(&self.re, cx).mul(&half, cx).sqrt(cx);
        let v_mag = m.sub(&self.re, cx).mul(&half, cx).sqrt(cx);
        let v = if self.im.to_f64() < 0.0 { v_mag.neg() } else { v_mag };
        Cplx::new(u, v)
    }

    /// floor(log2 |.|) up to half a bit, from the larger component.
    pub fn exp2_approx(&self) -> i64 {
        self.re.exp2_approx().max(self.im.exp2_approx())
    }
}

/// Total order on f64 for sorting decisions; inputs are finite by
/// construction.
pub(crate) fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite comparison")
}

// ---------------------------------------------------------------------------
// Generic mirrors of the Chebyshev helpers in `crate::chebyshev`. Same grids,
// same weights; kept private to the factorization pipeline. The f64 versions
// remain the public API and the oracle the mirrors are tested against.
// ---------------------------------------------------------------------------

/// Positive zeros of T_{2*d_tilde}: x_k = cos((2k-1)pi/(4*d_tilde)). The
/// rational factor is formed in the target precision before multiplying by
/// pi so node accuracy tracks the working precision, not f64.
pub(crate) fn nodes_g<R: Real>(d_tilde: usize, cx: &R::Ctx) -> Vec<R> {
    let pi = R::pi(cx);
    let den = R::lift(4.0 * d_tilde as f64, cx);
    (1..=d_tilde)
        .map(|k| {
            let num = R::lift((2 * k - 1) as f64, cx);
            pi.mul(&num, cx).div(&den, cx).cos(cx)
        })
        .collect()
}

/// Clenshaw evaluation of a first-kind series with real coefficients.
pub(crate) fn clenshaw_t_g<R: Real>(coeffs: &[R], x: &R, cx: &R::Ctx) -> R {
    let two_x = x.add(x, cx);
    let mut b1 = R::lift(0.0, cx);
    let mut b2 = R::lift(0.0, cx);
    for c in coeffs.iter().rev() {
        let next = two_x.mul(&b1, cx).sub(&b2, cx).add(c, cx);
        b2 = b1;
        b1 = next;
    }
    // The k = 0 pass used the doubled recurrence; the result is b0 - x*b1.
    b1.sub(&x.mul(&b2, cx), cx)
}

/// Recover first-kind coefficients of a definite-parity polynomial of degree
/// <= d from values on the `nodes_g(d/2 + 1)` grid. Mirrors
/// `chebyshev::values_to_coeffs`.
pub(crate) fn values_to_coeffs_g<R: Real>(
    values: &[R],
    nodes: &[R],
    d: usize,
    cx: &R::Ctx,
) -> Vec<R> {
    let d_tilde = d / 2 + 1;
    debug_assert_eq!(values.len(), d_tilde);
    debug_assert_eq!(nodes.len(), d_tilde);
    let zero = R::lift(0.0, cx);
    let mut coeffs = vec![zero.clone(); d + 1];
    let two = R::lift(2.0, cx);
    for (x, v) in nodes.iter().zip(values) {
        let two_x = two.mul(x, cx);
        let mut t_prev = R::lift(1.0, cx);
        let mut t_cur = x.clone();
        for (k, slot) in coeffs.iter_mut().enumerate() {
            let t = match k {
                0 => R::lift(1.0, cx),
                1 => x.clone(),
                _ => {
                    let next = two_x.mul(&t_cur, cx).sub(&t_prev, cx);
                    t_prev = t_cur.clone();
                    t_cur = next.clone();
                    next
                }
            };
            if k % 2 == d % 2 {
                *slot = slot.add(&v.mul(&t, cx), cx);
            }
        }
    }
    let dt = R::lift(d_tilde as f64, cx);
    let two_over = two.div(&dt, cx);
    let one_over = R::lift(1.0, cx).div(&dt, cx);
    for (k, slot) in coeffs.iter_mut().enumerate() {
        let w = if k == 0 { &one_over } else { &two_over };
        *slot = slot.mul(w, cx);
    }
    coeffs
}

/// First-kind to second-kind basis change: mirrors `chebyshev::t_to_u`.
pub(crate) fn t_to_u_g<R: Real>(s: &[R], cx: &R::Ctx) -> Vec<R> {
    let zero = R::lift(0.0, cx);
    let at = |j: usize| s.get(j).cloned().unwrap_or_else(|| zero.clone());
    let half = R::lift(0.5, cx);
    let mut q = vec![zero.clone(); s.len()];
    if !q.is_empty() {
        q[0] = at(0).sub(&at(2).mul(&half, cx), cx);
    }
    for (j, slot) in q.iter_mut().enumerate().skip(1) {
        *slot = at(j).sub(&at(j + 2), cx).mul(&half, cx);
    }
    q
}

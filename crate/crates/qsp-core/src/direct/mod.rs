//! Direct construction of symmetric phase factors by root factorization.
//!
//! Where [`crate::optimizer`] descends a least-squares landscape, this
//! backend computes phases algebraically in three stages:
//!
//! 1. expand the complement 1 - f(x)^2 on the unit circle and find the
//!    roots of the resulting Laurent polynomial ([`build_laurent`],
//!    [`find_roots`]);
//! 2. pick one root of every reciprocal pair - all-inside is the canonical
//!    ("maximal") choice, every other closed choice is another branch
//!    ([`select_maximal`], [`enumerate_admissible`]) - and synthesize the
//!    complementary pair (P, Q) from the chosen factor ([`build_pair`]);
//! 3. peel one rotation per level off the pair ([`reduce_to_phases`]).
//!
//! Every solution from this backend is a genuine global optimum of the
//! least-squares landscape (its cost is zero up to roundoff), so the two
//! backends cross-validate each other; [`verify_pair`] bundles the
//! consistency identities.
//!
//! Double precision carries the factorization to moderate degree before the
//! complement's roots become too ill-conditioned; past the configured cap
//! the same pipeline runs in arbitrary-precision arithmetic (seeded by the
//! double-precision eigensolver), and only the final phases are rounded
//! back to doubles.

pub(crate) mod reduce;
pub(crate) mod roots;
pub(crate) mod scalar;

pub use reduce::{ReductionLevel, ReductionTrace};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chebyshev::{ChebCoeffs, ChebKind, Parity, TargetPoly};
use crate::error::{Error, Result};
use crate::qsp::{build_unitary, ReducedPhases};
use roots::{Paired, PairingTols};
use scalar::{nodes_g, t_to_u_g, values_to_coeffs_g, BigCtx, BigReal, Cplx, Real};

/// Targets whose sampled sup norm is below this are treated as identically
/// zero and served by the closed-form pair instead of a factorization.
const ZERO_BYPASS_TOL: f64 = 1e-12;
/// Tolerance for the pair invariants enforced at construction.
const PAIR_TOL: f64 = 1e-10;
/// Tolerance for the report-only identities in [`verify_pair`].
const REPORT_TOL: f64 = 1e-9;
/// The monomial-basis balance is only reported up to this degree; the
/// change of basis loses roughly a bit per degree.
const MONOMIAL_CHECK_CAP: usize = 20;

/// Which arithmetic the factorization pipeline runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecisionMode {
    /// Hardware doubles, adequate up to `DirectConfig::double_degree_cap`.
    Double,
    /// Arbitrary-precision significands of the given width in bits.
    Big { bits: usize },
}

/// Tunables for the direct backend, grouped so the CLI can override them
/// uniformly. The defaults are the documented contract.
#[derive(Clone, Copy, Debug)]
pub struct DirectConfig {
    pub precision: PrecisionMode,
    /// Largest degree the double backend accepts before demanding extended
    /// precision.
    pub double_degree_cap: usize,
    /// Rejection radius around |w| = 1 for complement roots; a root that
    /// close to the circle has no well-defined reciprocal partner.
    pub unit_circle_tol: f64,
    /// Acceptance threshold on |w w' - 1| when matching reciprocal pairs.
    pub pairing_tol: f64,
    /// Distance below which two roots merge into one with multiplicity.
    pub merge_tol: f64,
    /// Largest degree for which branch enumeration is allowed.
    pub enumeration_degree_cap: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        DirectConfig {
            precision: PrecisionMode::Double,
            double_degree_cap: 30,
            unit_circle_tol: 1e-8,
            pairing_tol: 1e-6,
            merge_tol: 1e-6,
            enumeration_degree_cap: 8,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("unit_circle_tol", self.unit_circle_tol),
            ("pairing_tol", self.pairing_tol),
            ("merge_tol", self.merge_tol),
        ] {
            if !(v.is_finite() && v > 0.0 && v < 1e-2) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v:e} is outside the sensible range (0, 1e-2)"
                )));
            }
        }
        if let PrecisionMode::Big { bits } = self.precision {
            if !(64..=1 << 22).contains(&bits) {
                return Err(Error::InvalidInput(format!(
                    "extended precision of {bits} bits is outside [64, 2^22]"
                )));
            }
        }
        Ok(())
    }

    fn tols(&self) -> PairingTols {
        PairingTols {
            unit_circle_tol: self.unit_circle_tol,
            pairing_tol: self.pairing_tol,
            merge_tol: self.merge_tol,
        }
    }
}

/// A working precision that makes the degree-d factorization reliable to
/// roughly `eps`: the complement's roots can lose on the order of 4d bits
/// to conditioning, each needing log2(d / eps) bits of headroom.
pub fn default_big_bits(d: usize, eps: f64) -> usize {
    let eps = eps.clamp(1e-300, 0.5);
    let d = d.max(1) as f64;
    ((4.0 * d * (d / eps).log2()).ceil() as usize).max(128)
}

/// A closed selection of complement roots in the z-plane: 2d roots, one per
/// reciprocal pair, closed under conjugation and negation, grouped into
/// orbits (a +/- pair on an axis, a quadruple otherwise) in deterministic
/// order.
#[derive(Clone, Debug)]
pub struct RootMultiset {
    roots: Vec<Complex64>,
    orbits: Vec<Vec<Complex64>>,
    is_maximal: bool,
}

impl RootMultiset {
    fn new(orbits: Vec<Vec<Complex64>>, is_maximal: bool) -> Self {
        let roots = orbits.iter().flatten().copied().collect();
        RootMultiset {
            roots,
            orbits,
            is_maximal,
        }
    }

    fn empty(is_maximal: bool) -> Self {
        Self::new(Vec::new(), is_maximal)
    }

    /// Regroup a flat root list (the serialized form) into orbits,
    /// preserving encounter order, and derive the maximal flag from the
    /// moduli. Every root must find its exact negation/conjugation partners
    /// in the list; serialization is bit-faithful, so missing partners mean
    /// a corrupted or foreign file.
    pub(crate) fn from_flat_roots(roots: &[Complex64]) -> Result<Self> {
        let mut pool: Vec<Option<Complex64>> = roots.iter().copied().map(Some).collect();
        let mut orbits = Vec::new();
        for i in 0..pool.len() {
            let Some(r) = pool[i].take() else { continue };
            let mut members = vec![r];
            let mut needed: Vec<Complex64> = Vec::new();
            for cand in [-r, r.conj(), -r.conj()] {
                if cand != r && !needed.contains(&cand) {
                    needed.push(cand);
                }
            }
            for slot in pool.iter_mut().skip(i + 1) {
                if needed.is_empty() {
                    break;
                }
                if let Some(v) = *slot {
                    if let Some(pos) = needed.iter().position(|w| *w == v) {
                        members.push(v);
                        needed.remove(pos);
                        *slot = None;
                    }
                }
            }
            if let Some(missing) = needed.first() {
                return Err(Error::InvalidInput(format!(
                    "root list is not closed under negation and conjugation: \
                     {r} has no partner {missing}"
                )));
            }
            orbits.push(members);
        }
        let is_maximal = roots.iter().all(|z| z.norm() < 1.0);
        Ok(Self::new(orbits, is_maximal))
    }

    /// All selected roots, with multiplicity (2d entries for degree d).
    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Orbit partition; each orbit is one selection-unit occurrence.
    pub fn orbits(&self) -> &[Vec<Complex64>] {
        &self.orbits
    }

    /// Whether every root lies strictly inside the unit disc.
    pub fn is_maximal(&self) -> bool {
        self.is_maximal
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// The complementary pair (P, Q) of a target f: P = f + i p_im with
/// |P(x)|^2 + (1 - x^2) Q(x)^2 = 1 on [-1, 1], deg P = d, deg Q = d - 1,
/// opposite parities, and the leading coefficient of Q positive.
///
/// Construction verifies the pointwise normalization, its coefficient-space
/// (quadrature) form, and the leading-coefficient identity
/// f_d^2 + s_d^2 = q_{d-1}^2, and fails with a precision error rather than
/// hand back a pair that would derail the reduction.
#[derive(Clone, Debug)]
pub struct AdmissiblePair {
    f: TargetPoly,
    p_im: ChebCoeffs,
    q: ChebCoeffs,
    alpha: f64,
    source: RootMultiset,
}

impl AdmissiblePair {
    pub(crate) fn from_parts(
        f: TargetPoly,
        p_im: Vec<f64>,
        q: Vec<f64>,
        alpha: f64,
        source: RootMultiset,
    ) -> Result<Self> {
        let d = f.degree();
        if d == 0 {
            return Err(Error::InvalidInput(
                "a degree-zero target has no complementary pair".into(),
            ));
        }
        let p_im = ChebCoeffs::new(ChebKind::First, f.parity(), p_im)?;
        let q = ChebCoeffs::new(ChebKind::Second, Parity::of_degree(d - 1), q)?;
        if p_im.degree() != d || q.degree() + 1 != d {
            return Err(Error::InvalidInput(format!(
                "pair shape mismatch: target degree {d}, imaginary part degree {}, \
                 second component degree {}",
                p_im.degree(),
                q.degree()
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "normalization constant alpha = {alpha:e} must be positive"
            )));
        }
        let pair = AdmissiblePair {
            f,
            p_im,
            q,
            alpha,
            source,
        };
        pair.check_invariants()?;
        Ok(pair)
    }

    fn check_invariants(&self) -> Result<()> {
        let q_lead = self.q.leading();
        if !(q_lead > 0.0) {
            return Err(Error::Precision(format!(
                "second component has non-positive leading coefficient {q_lead:e}"
            )));
        }
        let norm_res = self.normalization_residual();
        if norm_res > PAIR_TOL {
            return Err(Error::Precision(format!(
                "pair normalization violated by {norm_res:e} (tolerance {PAIR_TOL:e}); \
                 the factorization lost too much accuracy - consider the \
                 extended-precision backend"
            )));
        }
        let quad_res = self.quadrature_residual();
        if quad_res > PAIR_TOL {
            return Err(Error::Precision(format!(
                "coefficient-space normalization violated by {quad_res:e}"
            )));
        }
        let lead_res = self.leading_identity_residual();
        if lead_res > PAIR_TOL {
            return Err(Error::Precision(format!(
                "leading-coefficient identity violated by {lead_res:e}"
            )));
        }
        Ok(())
    }

    /// max |f^2 + p_im^2 + (1 - x^2) q^2 - 1| over 4(d + 1) Chebyshev
    /// points plus both endpoints.
    fn normalization_residual(&self) -> f64 {
        let n = 4 * (self.f.degree() + 1);
        let mut worst = 0.0_f64;
        for j in 0..n + 2 {
            let x = match j {
                0 => 1.0,
                1 => -1.0,
                _ => (std::f64::consts::PI * (2 * (j - 1) - 1) as f64 / (2.0 * n as f64)).cos(),
            };
            let fv = self.f.eval(x).expect("grid point in range");
            let pv = self.p_im.eval(x).expect("grid point in range");
            let qv = self.q.eval(x).expect("grid point in range");
            worst = worst.max((fv * fv + pv * pv + (1.0 - x * x) * qv * qv - 1.0).abs());
        }
        worst
    }

    /// The normalization integrated against the Chebyshev weight:
    /// f_0^2 + s_0^2 + (1/2) sum_{k>0} (f_k^2 + s_k^2)
    /// + (1/2) sum_k q_k^2 = 1.
    fn quadrature_residual(&self) -> f64 {
        let t_part =
            |c: &[f64]| c[0] * c[0] + 0.5 * c[1..].iter().map(|v| v * v).sum::<f64>();
        let u_part = 0.5 * self.q.coeffs().iter().map(|v| v * v).sum::<f64>();
        (t_part(self.f.coeffs().coeffs()) + t_part(self.p_im.coeffs()) + u_part - 1.0).abs()
    }

    /// |f_d^2 + s_d^2 - q_{d-1}^2|.
    fn leading_identity_residual(&self) -> f64 {
        let fd = self.f.coeffs().leading();
        let sd = self.p_im.leading();
        let qd = self.q.leading();
        (fd * fd + sd * sd - qd * qd).abs()
    }

    pub fn f(&self) -> &TargetPoly {
        &self.f
    }

    /// Imaginary part of P (first-kind coefficients, same parity as f).
    pub fn p_im(&self) -> &ChebCoeffs {
        &self.p_im
    }

    /// Second component Q (second-kind coefficients, opposite parity).
    pub fn q(&self) -> &ChebCoeffs {
        &self.q
    }

    /// Normalization constant of the factorization (1 for the zero-target
    /// closed form).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The root selection the pair was built from (empty for the
    /// zero-target closed form).
    pub fn source(&self) -> &RootMultiset {
        &self.source
    }
}

/// One solved branch: the pair, its reduced phases, and the reduction
/// trace. `q_negated` marks the mirrored family obtained by flipping the
/// sign of Q before reduction (even degree only).
#[derive(Clone, Debug)]
pub struct DirectSolution {
    pub pair: AdmissiblePair,
    pub phases: ReducedPhases,
    pub trace: ReductionTrace,
    pub q_negated: bool,
}

/// Reciprocally paired complement roots, ready for selection.
#[derive(Clone, Debug)]
pub struct PairedRoots {
    inner: Paired<f64>,
}

impl PairedRoots {
    pub fn degree(&self) -> usize {
        self.inner.d
    }

    /// Number of binary selection units (reciprocal pairs up to
    /// conjugation, counted without multiplicity).
    pub fn unit_count(&self) -> usize {
        self.inner.units.len()
    }

    /// Diagnostics accumulated while pairing (e.g. merged multiple roots).
    pub fn warnings(&self) -> &[String] {
        &self.inner.warnings
    }
}

fn lift_coeffs<R: Real>(f: &TargetPoly, cx: &R::Ctx) -> Vec<R> {
    f.coeffs().coeffs().iter().map(|&c| R::lift(c, cx)).collect()
}

fn snap<R: Real>(v: &[R]) -> Vec<f64> {
    v.iter().map(Real::to_f64).collect()
}

fn trimmed(f: &TargetPoly) -> Result<TargetPoly> {
    TargetPoly::new(f.coeffs().trim())
}

/// Coefficients of z^{2d} (1 - f((z + 1/z) / 2)^2), ascending in z, length
/// 4d + 1. With c_0 = f_0 and c_{+-k} = f_k / 2 the Chebyshev series of f
/// becomes a symmetric Laurent sum, and the complement is a delta at z^{2d}
/// minus the convolution square of c.
fn build_laurent_g<R: Real>(fc: &[R], cx: &R::Ctx) -> Vec<R> {
    let d = fc.len() - 1;
    let half = R::lift(0.5, cx);
    let mut c = vec![R::lift(0.0, cx); 2 * d + 1];
    for (k, coeff) in fc.iter().enumerate() {
        if k == 0 {
            c[d] = coeff.clone();
        } else {
            let h = coeff.mul(&half, cx);
            c[d + k] = h.clone();
            c[d - k] = h;
        }
    }
    let mut out = vec![R::lift(0.0, cx); 4 * d + 1];
    out[2 * d] = R::lift(1.0, cx);
    for (a, ca) in c.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (b, cb) in c.iter().enumerate() {
            out[a + b] = out[a + b].sub(&ca.mul(cb, cx), cx);
        }
    }
    out
}

/// The complement's Laurent coefficients for a target, ascending in z
/// (length 4d + 1, palindromic, odd slots zero by parity).
pub fn build_laurent(f: &TargetPoly) -> Vec<f64> {
    build_laurent_g(f.coeffs().coeffs(), &())
}

/// Shared tail of the factorization: roots in the w = z^2 plane from
/// ascending w-coefficients (length 2d + 1), via double-precision companion
/// seeds and an in-precision polish.
fn roots_from_w<R: Real>(
    wc: &[R],
    d: usize,
    cfg: &DirectConfig,
    cx: &R::Ctx,
) -> Result<Paired<R>> {
    let lead = wc.last().expect("non-empty coefficients");
    if lead.to_f64() == 0.0 {
        return Err(Error::Degenerate(
            "complement leading coefficient vanished; trim the target first".into(),
        ));
    }
    let inv = R::lift(1.0, cx).div(lead, cx);
    let tail: Vec<R> = wc[..2 * d].iter().map(|c| c.mul(&inv, cx)).collect();
    let seeds = roots::companion_eigen_seeds(&snap(&tail))?;
    let lifted: Vec<Cplx<R>> = seeds.into_iter().map(|s| Cplx::lift(s, cx)).collect();
    let polished = roots::aberth_polish(&tail, lifted, cx)?;
    roots::pair_roots(polished, d, &cfg.tols(), cx)
}

fn factor<R: Real>(f: &TargetPoly, cfg: &DirectConfig, cx: &R::Ctx) -> Result<Paired<R>> {
    let fc = lift_coeffs::<R>(f, cx);
    let h = build_laurent_g(&fc, cx);
    // Definite parity makes the odd slots exact zeros; keep the even ones.
    let wc: Vec<R> = h.into_iter().step_by(2).collect();
    roots_from_w(&wc, f.degree(), cfg, cx)
}

/// Find and pair the complement's roots from its Laurent coefficients.
pub fn find_roots(h: &[f64], cfg: &DirectConfig) -> Result<PairedRoots> {
    cfg.validate()?;
    let wc = roots::w_coeffs_from_h(h)?;
    let d = (h.len() - 1) / 4;
    Ok(PairedRoots {
        inner: roots_from_w(&wc, d, cfg, &())?,
    })
}

/// Materialize the z-plane root selection for a unit-choice bitmask (bit j
/// set = take the outside of unit j), plus its f64 bookkeeping.
fn select_units<R: Real>(
    paired: &Paired<R>,
    mask: usize,
    cx: &R::Ctx,
) -> (Vec<Cplx<R>>, RootMultiset) {
    let mut z: Vec<Cplx<R>> = Vec::with_capacity(2 * paired.d);
    let mut orbits = Vec::new();
    for (j, unit) in paired.units.iter().enumerate() {
        let side = if mask >> j & 1 == 0 {
            &unit.inside
        } else {
            &unit.outside
        };
        let upper = side
            .iter()
            .find(|r| r.to_c64().im >= 0.0)
            .expect("canonicalized side has an upper member");
        for _ in 0..unit.multiplicity {
            // Square roots of one w-side; closed under negation by
            // construction, and under conjugation for a conjugate pair.
            let s = upper.sqrt(cx);
            let members: Vec<Cplx<R>> = if side.len() == 1 {
                vec![s.clone(), s.neg()]
            } else {
                vec![s.clone(), s.conj(), s.neg(), s.conj().neg()]
            };
            orbits.push(members.iter().map(Cplx::to_c64).collect());
            z.extend(members);
        }
    }
    debug_assert_eq!(z.len(), 2 * paired.d);
    (z, RootMultiset::new(orbits, mask == 0))
}

/// The canonical selection: every root strictly inside the unit disc.
pub fn select_maximal(paired: &PairedRoots) -> RootMultiset {
    select_units(&paired.inner, 0, &()).1
}

/// All closed root selections, maximal first, in deterministic bitmask
/// order. Refuses to materialize more than `limit` multisets.
pub fn enumerate_admissible(paired: &PairedRoots, limit: usize) -> Result<Vec<RootMultiset>> {
    let units = paired.unit_count();
    if units >= usize::BITS as usize - 1 {
        return Err(Error::EnumerationLimit(format!(
            "{units} selection units cannot be enumerated"
        )));
    }
    let count = 1usize << units;
    if count > limit {
        return Err(Error::EnumerationLimit(format!(
            "{count} root selections exceed the limit {limit}"
        )));
    }
    Ok((0..count)
        .map(|mask| select_units(&paired.inner, mask, &()).1)
        .collect())
}

/// Synthesize the pair for one root selection: alpha from the value at
/// z = 1, then p_im and Q by sampling e(z) = z^{-d} prod (z - r) on the
/// recovery grids of their degrees.
fn pair_values<R: Real>(
    fc: &[R],
    z_roots: &[Cplx<R>],
    cx: &R::Ctx,
) -> Result<(Vec<R>, Vec<R>, R)> {
    let d = fc.len() - 1;
    debug_assert_eq!(z_roots.len(), 2 * d);

    let one = Cplx::<R>::one(cx);
    let mut prod = one.clone();
    for r in z_roots {
        prod = prod.mul(&one.sub(r, cx), cx);
    }
    // Conjugation closure makes the product real; a loud imaginary part
    // means the selection was not closed.
    if prod.im.exp2_approx() > prod.re.exp2_approx() - R::working_bits(cx) / 2 {
        return Err(Error::Precision(format!(
            "product over the root selection is not real ({:?}); \
             the selection is not conjugation-closed",
            prod.to_c64()
        )));
    }
    let mut f1 = R::lift(0.0, cx);
    for c in fc {
        f1 = f1.add(c, cx);
    }
    let num = R::lift(1.0, cx).sub(&f1.mul(&f1, cx), cx);
    let den = prod.re.mul(&prod.re, cx);
    let alpha = num.div(&den, cx);
    if alpha.to_f64() <= 0.0 {
        return Err(Error::Degenerate(format!(
            "normalization constant alpha = {:e} is not positive",
            alpha.to_f64()
        )));
    }
    let sa = alpha.sqrt(cx);

    let eval_e = |x: &R| -> (Cplx<R>, R) {
        let s = R::lift(1.0, cx).sub(&x.mul(x, cx), cx).sqrt(cx);
        let z = Cplx::new(x.clone(), s.clone());
        let zc = z.conj(); // = 1/z on the unit circle
        let mut e = Cplx::one(cx);
        for r in z_roots {
            e = e.mul(&z.sub(r, cx), cx);
        }
        for _ in 0..d {
            e = e.mul(&zc, cx);
        }
        (e, s)
    };

    let grid_p = nodes_g::<R>(d / 2 + 1, cx);
    let p_vals: Vec<R> = grid_p.iter().map(|x| eval_e(x).0.re.mul(&sa, cx)).collect();
    let p_im = values_to_coeffs_g(&p_vals, &grid_p, d, cx);

    let grid_q = nodes_g::<R>((d - 1) / 2 + 1, cx);
    let q_vals: Vec<R> = grid_q
        .iter()
        .map(|x| {
            let (e, s) = eval_e(x);
            e.im.mul(&sa, cx).div(&s, cx)
        })
        .collect();
    let s_q = values_to_coeffs_g(&q_vals, &grid_q, d - 1, cx);
    let q_u = t_to_u_g(&s_q, cx);

    Ok((p_im, q_u, alpha))
}

/// The closed-form pair (T_d, U_{d-1}) complementing the zero target, at
/// the target's nominal (untrimmed) degree.
fn bypass_pair(f: &TargetPoly) -> Result<AdmissiblePair> {
    let d = f.degree();
    if d == 0 {
        return Err(Error::InvalidInput(
            "a constant target is a bare rotation with no factorization \
             problem; take acos of the value directly"
                .into(),
        ));
    }
    AdmissiblePair::from_parts(
        f.clone(),
        ChebCoeffs::basis(ChebKind::First, d).coeffs().to_vec(),
        ChebCoeffs::basis(ChebKind::Second, d - 1).coeffs().to_vec(),
        1.0,
        RootMultiset::empty(true),
    )
}

/// Build the complementary pair for a root selection. An empty selection is
/// only legal for the (numerically) zero target, whose pair is the closed
/// form (T_d, U_{d-1}).
pub fn build_pair(f: &TargetPoly, selection: &RootMultiset) -> Result<AdmissiblePair> {
    if selection.is_empty() {
        if f.max_norm_estimate().value >= ZERO_BYPASS_TOL {
            return Err(Error::InvalidInput(
                "an empty root selection is only valid for the zero target".into(),
            ));
        }
        return bypass_pair(f);
    }
    let ft = trimmed(f)?;
    let d = ft.degree();
    if selection.len() != 2 * d {
        return Err(Error::InvalidInput(format!(
            "selection holds {} roots, expected {} for degree {d}",
            selection.len(),
            2 * d
        )));
    }
    let fc = lift_coeffs::<f64>(&ft, &());
    let z: Vec<Cplx<f64>> = selection
        .roots()
        .iter()
        .map(|&r| Cplx::lift(r, &()))
        .collect();
    let (p_im, q_u, alpha) = pair_values(&fc, &z, &())?;
    AdmissiblePair::from_parts(ft, p_im, q_u, alpha, selection.clone())
}

/// Reduce an admissible pair to its phases (double precision).
pub fn reduce_to_phases(pair: &AdmissiblePair) -> Result<(ReducedPhases, ReductionTrace)> {
    let p: Vec<Cplx<f64>> = pair
        .f
        .coeffs()
        .coeffs()
        .iter()
        .zip(pair.p_im.coeffs())
        .map(|(&re, &im)| Cplx::new(re, im))
        .collect();
    let (phases, trace) = reduce::reduce_generic(p, pair.q.coeffs().to_vec(), &())?;
    Ok((ReducedPhases::new(phases, pair.f.parity())?, trace))
}

/// Full pipeline for one selection in the working precision. The reduction
/// runs on the working-precision vectors; only the pair snapshot and the
/// phases are rounded to doubles.
fn build_solution<R: Real>(
    ft: &TargetPoly,
    fc: &[R],
    z_roots: &[Cplx<R>],
    multiset: RootMultiset,
    negate_q: bool,
    cx: &R::Ctx,
) -> Result<DirectSolution> {
    let (p_im, q_u, alpha) = pair_values(fc, z_roots, cx)?;
    let pair = AdmissiblePair::from_parts(
        ft.clone(),
        snap(&p_im),
        snap(&q_u),
        alpha.to_f64(),
        multiset,
    )?;
    let p: Vec<Cplx<R>> = fc
        .iter()
        .zip(&p_im)
        .map(|(re, im)| Cplx::new(re.clone(), im.clone()))
        .collect();
    let q_run: Vec<R> = if negate_q {
        q_u.iter().map(|v| v.neg()).collect()
    } else {
        q_u
    };
    let (phases, trace) = reduce::reduce_generic(p, q_run, cx)?;
    let q_negated = trace.q_negated;
    Ok(DirectSolution {
        pair,
        phases: ReducedPhases::new(phases, ft.parity())?,
        trace,
        q_negated,
    })
}

/// Closed-form solution for the (numerically) zero target.
fn bypass_solution(f: &TargetPoly, negate_q: bool) -> Result<DirectSolution> {
    let pair = bypass_pair(f)?;
    let p: Vec<Cplx<f64>> = pair
        .p_im
        .coeffs()
        .iter()
        .map(|&im| Cplx::new(0.0, im))
        .collect();
    let q: Vec<f64> = if negate_q {
        pair.q.coeffs().iter().map(|v| -v).collect()
    } else {
        pair.q.coeffs().to_vec()
    };
    let (phases, trace) = reduce::reduce_generic(p, q, &())?;
    let q_negated = trace.q_negated;
    Ok(DirectSolution {
        pair,
        phases: ReducedPhases::new(phases, f.parity())?,
        trace,
        q_negated,
    })
}

enum Route {
    /// Target is numerically zero; serve the closed form.
    Bypass,
    /// Factorize the trimmed target.
    Factor(TargetPoly),
}

fn preflight(f: &TargetPoly, cfg: &DirectConfig) -> Result<Route> {
    cfg.validate()?;
    if f.max_norm_estimate().value < ZERO_BYPASS_TOL {
        return Ok(Route::Bypass);
    }
    let ft = trimmed(f)?;
    if ft.degree() == 0 {
        return Err(Error::InvalidInput(
            "a constant target is a bare rotation; the factorization backend \
             needs degree >= 1"
                .into(),
        ));
    }
    if matches!(cfg.precision, PrecisionMode::Double) && ft.degree() > cfg.double_degree_cap {
        return Err(Error::Precision(format!(
            "degree {} exceeds the double-precision cap {}; select the \
             extended-precision backend",
            ft.degree(),
            cfg.double_degree_cap
        )));
    }
    Ok(Route::Factor(ft))
}

/// Solve for the canonical branch: all complement roots inside the unit
/// disc. Among all branches this is the one closest to the trivial phase
/// point.
pub fn solve_maximal(f: &TargetPoly, cfg: &DirectConfig) -> Result<DirectSolution> {
    let ft = match preflight(f, cfg)? {
        Route::Bypass => return bypass_solution(f, false),
        Route::Factor(ft) => ft,
    };
    match cfg.precision {
        PrecisionMode::Double => solve_maximal_impl::<f64>(&ft, cfg, &()),
        PrecisionMode::Big { bits } => solve_maximal_impl::<BigReal>(&ft, cfg, &BigCtx { bits }),
    }
}

fn solve_maximal_impl<R: Real>(
    ft: &TargetPoly,
    cfg: &DirectConfig,
    cx: &R::Ctx,
) -> Result<DirectSolution> {
    let paired = factor::<R>(ft, cfg, cx)?;
    let fc = lift_coeffs::<R>(ft, cx);
    let (z, multiset) = select_units(&paired, 0, cx);
    build_solution(ft, &fc, &z, multiset, false, cx)
}

/// Solve every branch: all root selections, and for even degree both signs
/// of Q per selection. Deterministic order: selections by ascending bitmask
/// (maximal first), positive Q before negated Q.
pub fn solve_enumerate(
    f: &TargetPoly,
    cfg: &DirectConfig,
    limit: usize,
) -> Result<Vec<DirectSolution>> {
    let ft = match preflight(f, cfg)? {
        Route::Bypass => {
            let mut out = vec![bypass_solution(f, false)?];
            if f.degree() % 2 == 0 {
                out.push(bypass_solution(f, true)?);
            }
            return Ok(out);
        }
        Route::Factor(ft) => ft,
    };
    if ft.degree() > cfg.enumeration_degree_cap {
        return Err(Error::EnumerationLimit(format!(
            "degree {} exceeds the enumeration cap {}",
            ft.degree(),
            cfg.enumeration_degree_cap
        )));
    }
    match cfg.precision {
        PrecisionMode::Double => solve_enumerate_impl::<f64>(&ft, cfg, limit, &()),
        PrecisionMode::Big { bits } => {
            solve_enumerate_impl::<BigReal>(&ft, cfg, limit, &BigCtx { bits })
        }
    }
}

fn solve_enumerate_impl<R: Real>(
    ft: &TargetPoly,
    cfg: &DirectConfig,
    limit: usize,
    cx: &R::Ctx,
) -> Result<Vec<DirectSolution>> {
    let paired = factor::<R>(ft, cfg, cx)?;
    let units = paired.units.len();
    if units >= usize::BITS as usize - 1 {
        return Err(Error::EnumerationLimit(format!(
            "{units} selection units cannot be enumerated"
        )));
    }
    let count = 1usize << units;
    let per_mask = if ft.degree() % 2 == 0 { 2 } else { 1 };
    if count * per_mask > limit {
        return Err(Error::EnumerationLimit(format!(
            "{} branches exceed the limit {limit}",
            count * per_mask
        )));
    }
    let fc = lift_coeffs::<R>(ft, cx);
    let nested: Result<Vec<Vec<DirectSolution>>> = (0..count)
        .into_par_iter()
        .map(|mask| {
            let (z, multiset) = select_units(&paired, mask, cx);
            let mut branch = vec![build_solution(ft, &fc, &z, multiset.clone(), false, cx)?];
            if per_mask == 2 {
                branch.push(build_solution(ft, &fc, &z, multiset, true, cx)?);
            }
            Ok(branch)
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// One named consistency check of a pair (or pair and phases).
#[derive(Clone, Debug)]
pub struct PairCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of [`verify_pair`]. Informational: constructing the pair already
/// enforced the hard invariants; the identities here diagnose precision
/// loss and cross-check a phase vector against its pair.
#[derive(Clone, Debug)]
pub struct PairReport {
    pub checks: Vec<PairCheck>,
}

impl PairReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn push_check(checks: &mut Vec<PairCheck>, name: &'static str, residual: f64, tolerance: f64) {
    checks.push(PairCheck {
        name,
        residual,
        tolerance,
        pass: residual <= tolerance,
    });
}

/// Evaluate the consistency identities for a pair, optionally against a
/// reduced phase vector for the same target.
pub fn verify_pair(pair: &AdmissiblePair, phases: Option<&ReducedPhases>) -> PairReport {
    let mut checks = Vec::new();
    let d = pair.f.degree();
    let f = pair.f.coeffs();
    let s = &pair.p_im;
    let q = &pair.q;

    push_check(
        &mut checks,
        "pointwise-normalization",
        pair.normalization_residual(),
        PAIR_TOL,
    );
    push_check(
        &mut checks,
        "coefficient-normalization",
        pair.quadrature_residual(),
        PAIR_TOL,
    );
    push_check(
        &mut checks,
        "leading-coefficients",
        pair.leading_identity_residual(),
        PAIR_TOL,
    );
    push_check(
        &mut checks,
        "q-leading-positive",
        (-q.leading()).max(0.0),
        0.0,
    );

    // At x = 0 the normalization pins one component completely: the odd
    // component of the pair vanishes there.
    if d % 2 == 1 {
        let q0 = q.eval(0.0).expect("0 in range");
        push_check(&mut checks, "center-q-unimodular", (q0.abs() - 1.0).abs(), PAIR_TOL);
    } else {
        let f0 = f.eval(0.0).expect("0 in range");
        let s0 = s.eval(0.0).expect("0 in range");
        push_check(
            &mut checks,
            "center-p-unimodular",
            (f0 * f0 + s0 * s0 - 1.0).abs(),
            PAIR_TOL,
        );
    }

    // alpha against its defining product over the stored roots; only
    // non-vacuous for deserialized pairs, where it catches corruption.
    if !pair.source.is_empty() {
        let mut prod = Complex64::new(1.0, 0.0);
        for r in pair.source.roots() {
            prod *= Complex64::new(1.0, 0.0) - r;
        }
        let f1 = pair.f.eval(1.0).expect("1 in range");
        let target = 1.0 - f1 * f1;
        let res = (pair.alpha * prod.re * prod.re - target).abs() / target.max(1e-6);
        push_check(&mut checks, "alpha-root-product", res, REPORT_TOL);
    }

    // e^{2 i phi_0} read off the pair's own leading coefficients.
    let rot = Complex64::new(f.leading(), s.leading()) / q.leading();
    let rot = rot / rot.norm();

    // Degree balance of the first reduction step in the monomial basis: the
    // would-be top coefficient of the reduced P must cancel, which ties the
    // subleading monomial coefficients of P to those of Q.
    if (2..=MONOMIAL_CHECK_CAP).contains(&d) {
        let fm = f.to_monomial().expect("degree under the conversion cap");
        let sm = s.to_monomial().expect("degree under the conversion cap");
        let qm = q.to_monomial().expect("degree under the conversion cap");
        let p_sub = Complex64::new(fm[d - 2], sm[d - 2]);
        let q_top = qm[d - 1];
        let q_sub = if d >= 3 { qm[d - 3] } else { 0.0 };
        let t1 = 2.0 * (rot.conj() * p_sub).re;
        let raw = t1 + q_top - 2.0 * q_sub;
        let scale = t1.abs().max(q_top.abs()).max(2.0 * q_sub.abs()).max(1.0);
        push_check(&mut checks, "monomial-balance", raw.abs() / scale, REPORT_TOL);
    }

    if let Some(ph) = phases {
        let full = ph.symmetrize();
        if full.len() == d + 1 {
            // Product form of the leading coefficients: e^{2 i phi_0} times
            // the cosines of the interior full phases.
            let prod_cos: f64 = full[1..d].iter().map(|p| f64::cos(*p)).product();
            let rot0 = Complex64::from_polar(1.0, 2.0 * full[0]);
            let lead = Complex64::new(f.leading(), s.leading());
            push_check(
                &mut checks,
                "phase-leading-product",
                (lead - rot0 * prod_cos).norm(),
                REPORT_TOL,
            );
            push_check(
                &mut checks,
                "phase-q-product",
                (prod_cos.abs() - q.leading()).abs(),
                REPORT_TOL,
            );

            // Round trip through the actual product of rotations.
            let n = 2 * (d + 1);
            let mut p_res = 0.0_f64;
            let mut q_plus = 0.0_f64;
            let mut q_minus = 0.0_f64;
            for j in 1..=n {
                let x = (std::f64::consts::PI * (2 * j - 1) as f64 / (2.0 * n as f64)).cos();
                let u = build_unitary(x, &full).expect("grid point in range");
                let fv = pair.f.eval(x).expect("grid point in range");
                let sv = s.eval(x).expect("grid point in range");
                p_res = p_res.max((u.a00 - Complex64::new(fv, sv)).norm());
                let sx = (1.0 - x * x).sqrt();
                let qv = q.eval(x).expect("grid point in range");
                let r = u.a01 * Complex64::new(0.0, -1.0) / sx;
                q_plus = q_plus.max((r - qv).norm());
                q_minus = q_minus.max((r + qv).norm());
            }
            push_check(&mut checks, "phase-unitary-roundtrip", p_res, REPORT_TOL);
            // The mirrored family realizes -Q; accept either global sign.
            push_check(
                &mut checks,
                "phase-q-roundtrip",
                q_plus.min(q_minus),
                REPORT_TOL,
            );
        } else {
            push_check(&mut checks, "phase-length", 1.0, 0.0);
        }
    }

    PairReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn target(coeffs: Vec<f64>) -> TargetPoly {
        let parity = Parity::of_degree(coeffs.len() - 1);
        TargetPoly::new(ChebCoeffs::new(ChebKind::First, parity, coeffs).unwrap()).unwrap()
    }

    /// Closed form for the degree-one target f = c x: the w-plane quadratic
    /// is -a w^2 + (1 - 2a) w - a with a = c^2 / 4, whose inside root is
    /// t - sqrt(t^2 - 1), t = (1 - 2a) / (2a) = 2 / c^2 - 1.
    fn degree_one_inside_root(c: f64) -> f64 {
        let t = 2.0 / (c * c) - 1.0;
        t - (t * t - 1.0).sqrt()
    }

    #[test]
    fn laurent_coefficients_match_the_degree_one_closed_form() {
        let f = target(vec![0.0, 0.3]);
        let h = build_laurent(&f);
        let expect = [-0.0225, 0.0, 0.955, 0.0, -0.0225];
        assert_eq!(h.len(), expect.len());
        for (got, want) in h.iter().zip(expect) {
            assert!((got - want).abs() < 3e-16, "{got} vs {want}");
        }
    }

    #[test]
    fn laurent_series_complements_the_squared_target_on_the_circle() {
        let f = target(vec![0.0, 0.21, 0.0, -0.14, 0.0, 0.09]);
        let d = f.degree();
        let h = build_laurent(&f);
        // Palindromic and supported on even powers.
        for (m, &c) in h.iter().enumerate() {
            assert!((c - h[h.len() - 1 - m]).abs() < 1e-16);
            if m % 2 == 1 {
                assert_eq!(c, 0.0);
            }
        }
        for j in 0..13 {
            let theta = 0.37 + j as f64 * 0.45;
            let z = Complex64::from_polar(1.0, theta);
            let mut val = Complex64::new(0.0, 0.0);
            for (m, &c) in h.iter().enumerate() {
                val += c * z.powi(m as i32);
            }
            let fv = f.eval(theta.cos()).unwrap();
            let want = z.powi(2 * d as i32) * (1.0 - fv * fv);
            assert!((val - want).norm() < 1e-13, "theta = {theta}");
        }
    }

    #[test]
    fn degree_one_roots_recover_the_closed_form() {
        let f = target(vec![0.0, 0.3]);
        let cfg = DirectConfig::default();
        let paired = find_roots(&build_laurent(&f), &cfg).unwrap();
        assert_eq!(paired.degree(), 1);
        assert_eq!(paired.unit_count(), 1);
        assert!(paired.warnings().is_empty());

        let w2 = degree_one_inside_root(0.3);
        let sel = select_maximal(&paired);
        assert!(sel.is_maximal());
        assert_eq!(sel.orbits().len(), 1);
        assert_eq!(sel.len(), 2);
        let r = w2.sqrt();
        assert!((sel.roots()[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!((sel.roots()[1] + Complex64::new(r, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degree_one_solution_matches_hand_values() {
        let f = target(vec![0.0, 0.3]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();

        // P = x e^{2 i phi_0} forces cos(2 phi_0) = 0.3.
        let phi0 = 0.5 * 0.3_f64.acos();
        assert_eq!(sol.phases.phases().len(), 1);
        assert!((sol.phases.phases()[0] - phi0).abs() < 1e-12);

        let s = sol.pair.p_im().coeffs();
        assert!(s[0].abs() < 1e-12);
        assert!((s[1] - 0.91_f64.sqrt()).abs() < 1e-12);
        let q = sol.pair.q().coeffs();
        assert_eq!(q.len(), 1);
        assert!((q[0] - 1.0).abs() < 1e-10);

        let w2 = degree_one_inside_root(0.3);
        let alpha_expect = 0.91 / ((1.0 - w2) * (1.0 - w2));
        assert!((sol.pair.alpha() - alpha_expect).abs() < 1e-10);

        assert!(!sol.q_negated);
        assert_eq!(sol.trace.q_chain.len(), 1);
        assert!((sol.trace.q_chain[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn maximal_solution_reproduces_the_unitary_pointwise() {
        let f = target(vec![0.0, 0.21, 0.0, -0.14, 0.0, 0.09]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let full = sol.phases.symmetrize();
        assert_eq!(full.len(), f.degree() + 1);
        for j in 0..20 {
            let x = (PI * j as f64 / 19.0).cos();
            let u = build_unitary(x, &full).unwrap();
            let want = Complex64::new(
                f.eval(x).unwrap(),
                sol.pair.p_im().eval(x).unwrap(),
            );
            assert!((u.a00 - want).norm() < 1e-9, "P mismatch at x = {x}");
            let sx = (1.0 - x * x).sqrt();
            if sx > 1e-3 {
                let r = u.a01 * Complex64::new(0.0, -1.0) / sx;
                let qv = sol.pair.q().eval(x).unwrap();
                assert!((r - qv).norm() < 1e-9, "Q mismatch at x = {x}");
            }
        }
    }

    #[test]
    fn quadratic_enumeration_yields_all_eight_branches() {
        // f = T_2 / 2: two real reciprocal pairs (2 +/- sqrt(3) and
        // negatives), so 2 units x 2 masks x 2 signs of Q.
        let f = target(vec![0.0, 0.0, 0.5]);
        let cfg = DirectConfig::default();
        let sols = solve_enumerate(&f, &cfg, 16).unwrap();
        assert_eq!(sols.len(), 8);

        // The maximal branch comes first and is the textbook solution; its
        // mirrored companion follows.
        assert!(sols[0].pair.source().is_maximal() && !sols[0].q_negated);
        assert!(sols[1].pair.source().is_maximal() && sols[1].q_negated);
        let got0 = sols[0].phases.phases();
        assert!((got0[0] - FRAC_PI_6).abs() < 1e-9 && got0[1].abs() < 1e-9);
        let got1 = sols[1].phases.phases();
        assert!((got1[0] + FRAC_PI_3).abs() < 1e-9 && (got1[1] + PI).abs() < 1e-9);

        // Every branch reproduces the target, and no two coincide.
        for (i, sol) in sols.iter().enumerate() {
            for j in 0..11 {
                let x = (PI * (2 * j + 1) as f64 / 22.0).cos();
                let g = crate::qsp::g_value(x, &sol.phases).unwrap();
                assert!((g - f.eval(x).unwrap()).abs() < 1e-9, "branch {i}");
            }
            for other in sols.iter().skip(i + 1) {
                let diff = sol
                    .phases
                    .phases()
                    .iter()
                    .zip(other.phases.phases())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                assert!(diff > 1e-3, "duplicate branches");
            }
        }

        // The two-step flow (enumerate selections, then build pairs) agrees
        // with the packaged solver.
        let paired = find_roots(&build_laurent(&f), &cfg).unwrap();
        let sets = enumerate_admissible(&paired, 16).unwrap();
        assert_eq!(sets.len(), 4);
        assert!(sets[0].is_maximal());
        for (k, sel) in sets.iter().enumerate() {
            let pair = build_pair(&f, sel).unwrap();
            let sol_pair = &sols[2 * k].pair;
            assert!((pair.alpha() - sol_pair.alpha()).abs() < 1e-12);
            for (a, b) in pair.q().coeffs().iter().zip(sol_pair.q().coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubic_enumeration_yields_four_branches() {
        // f = (x^3 - 2x) / sqrt(3) in the monomial basis; two selection
        // units, odd degree, so exactly four branches.
        let s3 = 3.0_f64.sqrt();
        let f = target(vec![0.0, -5.0 / (4.0 * s3), 0.0, 1.0 / (4.0 * s3)]);
        let sols = solve_enumerate(&f, &DirectConfig::default(), 8).unwrap();
        assert_eq!(sols.len(), 4);
        assert!(sols[0].pair.source().is_maximal());
        for sol in &sols {
            assert!(!sol.q_negated);
            for j in 0..11 {
                let x = (PI * (2 * j + 1) as f64 / 22.0).cos();
                let g = crate::qsp::g_value(x, &sol.phases).unwrap();
                assert!((g - f.eval(x).unwrap()).abs() < 1e-9);
            }
        }
        for sol in &sols[1..] {
            assert!(!sol.pair.source().is_maximal());
        }
    }

    #[test]
    fn zero_target_served_in_closed_form() {
        let f = target(vec![0.0, 0.0, 0.0]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        assert!((sol.phases.phases()[0] - FRAC_PI_4).abs() < 1e-15);
        assert!(sol.phases.phases()[1].abs() < 1e-15);
        assert_eq!(sol.pair.p_im().coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(sol.pair.q().coeffs(), &[0.0, 1.0]);
        assert_eq!(sol.pair.alpha(), 1.0);
        assert!(sol.pair.source().is_empty());

        let sols = solve_enumerate(&f, &DirectConfig::default(), 8).unwrap();
        assert_eq!(sols.len(), 2);
        assert!(sols[1].q_negated);
        let ph = sols[1].phases.phases();
        assert!((ph[0] + FRAC_PI_4).abs() < 1e-15);
        assert!((ph[1] + PI).abs() < 1e-15);
    }

    #[test]
    fn padded_targets_are_trimmed_before_factorization() {
        let f = target(vec![0.0, 0.3, 0.0, 0.0]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        assert_eq!(sol.pair.f().degree(), 1);
        assert_eq!(sol.phases.phases().len(), 1);
        assert!((sol.phases.phases()[0] - 0.5 * 0.3_f64.acos()).abs() < 1e-12);
    }

    #[test]
    fn extended_precision_agrees_with_doubles() {
        let f = target(vec![0.1, 0.0, 0.17, 0.0, -0.12, 0.0, 0.08]);
        let dbl = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let big_cfg = DirectConfig {
            precision: PrecisionMode::Big { bits: 320 },
            ..DirectConfig::default()
        };
        let big = solve_maximal(&f, &big_cfg).unwrap();
        for (a, b) in dbl.phases.phases().iter().zip(big.phases.phases()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for (a, b) in dbl.pair.q().coeffs().iter().zip(big.pair.q().coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_limits_are_enforced() {
        let mut coeffs = vec![0.0; 11];
        coeffs[10] = 0.2;
        let high = target(coeffs);
        let err = solve_enumerate(&high, &DirectConfig::default(), 1 << 20).unwrap_err();
        assert!(matches!(err, Error::EnumerationLimit(_)), "{err:?}");

        let f = target(vec![0.0, 0.0, 0.5]);
        let err = solve_enumerate(&f, &DirectConfig::default(), 4).unwrap_err();
        assert!(matches!(err, Error::EnumerationLimit(_)), "{err:?}");
    }

    #[test]
    fn leading_chain_obeys_the_coupled_recursion() {
        // Independent consistency relation between recorded trace
        // quantities: each level's leading coefficient grows by exactly
        // (sin(2 phi_l) q_l)^2 / (4 q_{l-1}).
        let f = target(vec![0.0, 0.2, 0.0, 0.1, 0.0, -0.15, 0.0, 0.05, 0.0, 0.1]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let chain = &sol.trace.q_chain;
        let levels = &sol.trace.levels;
        assert_eq!(chain.len(), levels.len());
        for l in 1..levels.len() {
            let im = (2.0 * levels[l].phi).sin() * chain[l];
            let predicted = chain[l - 1] + im * im / (4.0 * chain[l - 1]);
            assert!(
                (chain[l] - predicted).abs() < 1e-9,
                "level {l}: {} vs {predicted}",
                chain[l]
            );
            assert!(levels[l].sin_residual.unwrap() < 1e-9);
            assert!(levels[l].modulus_residual < 1e-10);
        }
    }

    #[test]
    fn verification_report_is_clean_for_solved_pairs() {
        let f = target(vec![0.1, 0.0, 0.17, 0.0, -0.12, 0.0, 0.08]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let report = verify_pair(&sol.pair, Some(&sol.phases));
        for check in &report.checks {
            assert!(
                check.pass,
                "{} failed: {:e} > {:e}",
                check.name, check.residual, check.tolerance
            );
        }
        // The mirrored family must also verify against the same pair.
        let sols = solve_enumerate(&f, &DirectConfig::default(), 64).unwrap();
        let mirrored = sols.iter().find(|s| s.q_negated).unwrap();
        assert!(verify_pair(&mirrored.pair, Some(&mirrored.phases)).all_pass());
    }

    #[test]
    fn verification_flags_wrong_phases_and_scaled_pairs() {
        let f = target(vec![0.0, 0.21, 0.0, -0.14, 0.0, 0.09]);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();

        let mut wrong = sol.phases.phases().to_vec();
        wrong[0] += 0.3;
        let wrong = ReducedPhases::new(wrong, f.parity()).unwrap();
        let report = verify_pair(&sol.pair, Some(&wrong));
        assert!(!report.all_pass());

        // A scaled Q breaks the normalization at construction time.
        let scaled: Vec<f64> = sol.pair.q().coeffs().iter().map(|v| v * 1.001).collect();
        let err = AdmissiblePair::from_parts(
            sol.pair.f().clone(),
            sol.pair.p_im().coeffs().to_vec(),
            scaled,
            sol.pair.alpha(),
            sol.pair.source().clone(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precision(_)), "{err:?}");
    }

    #[test]
    fn build_pair_input_validation() {
        let f2 = target(vec![0.0, 0.0, 0.5]);
        let f3 = target(vec![0.0, 0.3, 0.0, 0.1]);
        let paired = find_roots(&build_laurent(&f2), &DirectConfig::default()).unwrap();
        let sel = select_maximal(&paired);
        let err = build_pair(&f3, &sel).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");

        let err = build_pair(&f2, &RootMultiset::empty(true)).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");
    }

    #[test]
    fn constant_targets_are_rejected() {
        let f = target(vec![0.4]);
        let err = solve_maximal(&f, &DirectConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");

        let zero = target(vec![0.0]);
        let err = solve_maximal(&zero, &DirectConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");
    }

    #[test]
    fn degree_cap_redirects_to_extended_precision() {
        let mut coeffs = vec![0.0; 33];
        coeffs[32] = 0.3;
        let f = target(coeffs);
        let err = solve_maximal(&f, &DirectConfig::default()).unwrap_err();
        match err {
            Error::Precision(msg) => assert!(msg.contains("cap"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}

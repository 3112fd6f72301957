//! The symmetric QSP unitary and the scalar map g(x, phases) it induces,
//! together with analytic first and second derivatives with respect to the
//! reduced phases.
//!
//! The unitary for a full phase vector (phi_0, ..., phi_d) is
//!
//!   U(x) = Z(phi_0) W(x) Z(phi_1) W(x) ... W(x) Z(phi_d),
//!
//! with Z(phi) = diag(e^{i phi}, e^{-i phi}) and W(x) the X-rotation with
//! entries (x, i sqrt(1-x^2); i sqrt(1-x^2), x). Symmetric phase vectors are
//! palindromes, described by their left half ("reduced phases").
//!
//! Derivatives come from the identity Z(phi + pi/2) = iZ * Z(phi): shifting a
//! site by a quarter period inserts exactly the factor that differentiating
//! that site's rotation produces, so every partial derivative is itself a
//! (shifted) product chain and can be evaluated without finite differences.

use num_complex::Complex64;

use crate::chebyshev::Parity;
use crate::error::{Error, Result};

/// A 2x2 complex matrix produced by the rotation product; unitary up to
/// roundoff by construction.
#[derive(Clone, Copy, Debug)]
pub struct Su2Matrix {
    pub a00: Complex64,
    pub a01: Complex64,
    pub a10: Complex64,
    pub a11: Complex64,
}

impl Su2Matrix {
    pub fn identity() -> Self {
        Self {
            a00: Complex64::new(1.0, 0.0),
            a01: Complex64::new(0.0, 0.0),
            a10: Complex64::new(0.0, 0.0),
            a11: Complex64::new(1.0, 0.0),
        }
    }

    /// Z(phi) = diag(e^{i phi}, e^{-i phi}).
    pub fn z_rotation(phi: f64) -> Self {
        let e = Complex64::from_polar(1.0, phi);
        Self {
            a00: e,
            a01: Complex64::new(0.0, 0.0),
            a10: Complex64::new(0.0, 0.0),
            a11: e.conj(),
        }
    }

    /// W(x) = x I + i sqrt(1-x^2) X for x in [-1, 1]. The root is computed
    /// as sqrt((1-x)(1+x)) which stays accurate near the endpoints.
    pub fn w_rotation(x: f64) -> Result<Self> {
        if x.abs() > 1.0 || !x.is_finite() {
            return Err(Error::Domain(format!("x = {x} lies outside [-1, 1]")));
        }
        let s = ((1.0 - x) * (1.0 + x)).sqrt();
        Ok(Self {
            a00: Complex64::new(x, 0.0),
            a01: Complex64::new(0.0, s),
            a10: Complex64::new(0.0, s),
            a11: Complex64::new(x, 0.0),
        })
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a00: self.a00 * rhs.a00 + self.a01 * rhs.a10,
            a01: self.a00 * rhs.a01 + self.a01 * rhs.a11,
            a10: self.a10 * rhs.a00 + self.a11 * rhs.a10,
            a11: self.a10 * rhs.a01 + self.a11 * rhs.a11,
        }
    }

    /// Frobenius norm of A^dagger A - I; zero for exact unitaries.
    pub fn unitarity_defect(&self) -> f64 {
        let c00 = self.a00.conj() * self.a00 + self.a10.conj() * self.a10
            - Complex64::new(1.0, 0.0);
        let c01 = self.a00.conj() * self.a01 + self.a10.conj() * self.a11;
        let c11 = self.a01.conj() * self.a01 + self.a11.conj() * self.a11
            - Complex64::new(1.0, 0.0);
        (c00.norm_sqr() + 2.0 * c01.norm_sqr() + c11.norm_sqr()).sqrt()
    }

    pub fn det(&self) -> Complex64 {
        self.a00 * self.a11 - self.a01 * self.a10
    }
}

/// The left half of a palindromic phase vector: d_tilde = ceil((d+1)/2)
/// entries plus the parity of the full degree d. For odd d the last reduced
/// entry appears twice in the middle of the palindrome; for even d it is the
/// unique middle entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPhases {
    phases: Vec<f64>,
    parity: Parity,
}

impl ReducedPhases {
    pub fn new(phases: Vec<f64>, parity: Parity) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidInput(
                "reduced phase vector must be non-empty".into(),
            ));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(
                "reduced phase vector contains a non-finite entry".into(),
            ));
        }
        Ok(Self { phases, parity })
    }

    /// The initial point (pi/4, 0, ..., 0), whose induced g vanishes
    /// identically for every degree.
    pub fn initial(d_tilde: usize, parity: Parity) -> Result<Self> {
        if d_tilde == 0 {
            return Err(Error::InvalidInput(
                "reduced phase vector must be non-empty".into(),
            ));
        }
        let mut phases = vec![0.0; d_tilde];
        phases[0] = std::f64::consts::FRAC_PI_4;
        Ok(Self { phases, parity })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn d_tilde(&self) -> usize {
        self.phases.len()
    }

    /// Full degree d of the induced polynomial map.
    pub fn degree(&self) -> usize {
        match self.parity {
            Parity::Odd => 2 * self.phases.len() - 1,
            Parity::Even => 2 * self.phases.len() - 2,
        }
    }

    /// Expand into the palindromic full phase vector of length d + 1.
    pub fn symmetrize(&self) -> Vec<f64> {
        let mut full = self.phases.clone();
        match self.parity {
            Parity::Odd => full.extend(self.phases.iter().rev()),
            Parity::Even => full.extend(self.phases.iter().rev().skip(1)),
        }
        full
    }

    /// Euclidean distance to another reduced set of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.phases.len(), other.phases.len());
        self.phases
            .iter()
            .zip(&other.phases)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Canonicalize into the fundamental domain: interior entries wrapped
    /// into [-pi/2, pi/2) by multiples of pi, the even-degree middle entry
    /// into [-pi, pi) by multiples of 2*pi. The induced g is invariant under
    /// every such wrap (interior shifts act on both mirror sites, so the two
    /// sign flips cancel); per-entry flags report which interior entries
    /// moved by an odd multiple of pi, since the half-chain factors do
    /// change sign individually.
    pub fn wrap_to_domain(&self) -> (Self, Vec<bool>) {
        use std::f64::consts::PI;
        let d_tilde = self.phases.len();
        let mut wrapped = Vec::with_capacity(d_tilde);
        let mut flipped = Vec::with_capacity(d_tilde);
        for (i, &phi) in self.phases.iter().enumerate() {
            let is_middle_single = self.parity == Parity::Even && i == d_tilde - 1;
            if is_middle_single {
                let k = ((phi + PI) / (2.0 * PI)).floor();
                wrapped.push(phi - 2.0 * PI * k);
                flipped.push(false);
            } else {
                let k = ((phi + PI / 2.0) / PI).floor();
                wrapped.push(phi - PI * k);
                flipped.push((k as i64).rem_euclid(2) == 1);
            }
        }
        (
            Self {
                phases: wrapped,
                parity: self.parity,
            },
            flipped,
        )
    }
}

/// The rotation product for an arbitrary (not necessarily palindromic) full
/// phase vector, evaluated left to right.
pub fn build_unitary(x: f64, full: &[f64]) -> Result<Su2Matrix> {
    if full.is_empty() {
        return Err(Error::InvalidInput(
            "phase vector must be non-empty".into(),
        ));
    }
    let w = Su2Matrix::w_rotation(x)?;
    let mut u = Su2Matrix::z_rotation(full[0]);
    for &phi in &full[1..] {
        u = u.mul(&w).mul(&Su2Matrix::z_rotation(phi));
    }
    Ok(u)
}

/// g(x) = Re of the (0,0) entry of the symmetric rotation product.
pub fn g_value(x: f64, r: &ReducedPhases) -> Result<f64> {
    Ok(build_unitary(x, &r.symmetrize())?.a00.re)
}

/// Partial derivatives of Re U(x)_00 with respect to every full-vector site.
///
/// With P_s the product strictly before site s's rotation and B_s the
/// product from that rotation through the end, d(U)/d(phi_s) = P_s (iZ) B_s,
/// so dRe(U_00)/d(phi_s) = -Im(P_s00 B_s00 - P_s01 B_s10). Prefixes and
/// suffixes are cached, making the whole gradient as cheap as a few chain
/// evaluations.
pub(crate) fn site_gradients(x: f64, full: &[f64]) -> Result<Vec<f64>> {
    if full.is_empty() {
        return Err(Error::InvalidInput(
            "phase vector must be non-empty".into(),
        ));
    }
    let n = full.len();
    let w = Su2Matrix::w_rotation(x)?;

    // prefix[s] = product of everything strictly before rotation s.
    let mut prefix = Vec::with_capacity(n);
    prefix.push(Su2Matrix::identity());
    for s in 1..n {
        let p = prefix[s - 1]
            .mul(&Su2Matrix::z_rotation(full[s - 1]))
            .mul(&w);
        prefix.push(p);
    }

    // suffix[s] = product from rotation s through the end.
    let mut suffix = vec![Su2Matrix::identity(); n];
    suffix[n - 1] = Su2Matrix::z_rotation(full[n - 1]);
    for s in (0..n - 1).rev() {
        suffix[s] = Su2Matrix::z_rotation(full[s]).mul(&w).mul(&suffix[s + 1]);
    }

    Ok((0..n)
        .map(|s| {
            let p = &prefix[s];
            let b = &suffix[s];
            -(p.a00 * b.a00 - p.a01 * b.a10).im
        })
        .collect())
}

/// Indices in the full palindrome that a reduced entry controls: the mirror
/// pair {i, d - i}, collapsing to a single site for the even-degree middle.
fn mirror_sites(r: &ReducedPhases, i: usize) -> (usize, Option<usize>) {
    let d = r.degree();
    let j = d - i;
    if j == i {
        (i, None)
    } else {
        (i, Some(j))
    }
}

/// Gradient of g with respect to the reduced phases.
pub fn g_gradient(x: f64, r: &ReducedPhases) -> Result<Vec<f64>> {
    let full = r.symmetrize();
    let site = site_gradients(x, &full)?;
    Ok((0..r.d_tilde())
        .map(|i| match mirror_sites(r, i) {
            (a, Some(b)) => site[a] + site[b],
            (a, None) => site[a],
        })
        .collect())
}

/// Hessian of g with respect to the reduced phases (d_tilde x d_tilde,
/// symmetric). Row s of the full-site second-derivative table is the site
/// gradient of the chain with site s shifted by pi/2 — the same identity
/// that powers the first derivative, applied twice (two quarter-period
/// shifts at one site compose to the half-period shift).
pub fn g_hessian(x: f64, r: &ReducedPhases) -> Result<Vec<Vec<f64>>> {
    let full = r.symmetrize();
    let n = full.len();
    let mut table = Vec::with_capacity(n);
    for s in 0..n {
        let mut shifted = full.clone();
        shifted[s] += std::f64::consts::FRAC_PI_2;
        table.push(site_gradients(x, &shifted)?);
    }
    let d_tilde = r.d_tilde();
    let mut hess = vec![vec![0.0; d_tilde]; d_tilde];
    for i in 0..d_tilde {
        let (ia, ib) = mirror_sites(r, i);
        for j in 0..d_tilde {
            let (ja, jb) = mirror_sites(r, j);
            let mut v = table[ia][ja];
            if let Some(jb) = jb {
                v += table[ia][jb];
            }
            if let Some(ib) = ib {
                v += table[ib][ja];
                if let Some(jb) = jb {
                    v += table[ib][jb];
                }
            }
            hess[i][j] = v;
        }
    }
    Ok(hess)
}

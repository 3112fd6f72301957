//! Chebyshev polynomials of the first and second kind: evaluation, node
//! grids, coefficient recovery from samples, basis conversion, and the
//! coefficient norms used throughout the solvers.
//!
//! Everything here works on [-1, 1] and uses three-term recurrences rather
//! than `acos` composition, which keeps values exact at |x| = 1 and avoids
//! precision loss near the endpoints.

use crate::error::{Error, Result};

/// Relative tolerance for parity violations at construction. Entries at
/// parity-violating indices below this (relative to the largest coefficient)
/// are zeroed exactly; anything larger is rejected.
const PARITY_REL_TOL: f64 = 1e-12;

/// Degree cap for monomial basis conversion. The change of basis mixes
/// coefficients through factors of 2^degree, so it is ill-conditioned in
/// double precision well before the cap bites.
const CONVERSION_DEGREE_CAP: usize = 64;

/// Which Chebyshev family a coefficient vector refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChebKind {
    First,
    Second,
}

/// Parity of a polynomial with definite symmetry on [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(d: usize) -> Self {
        if d % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Whether index `k` carries a coefficient under this parity.
    pub fn matches_index(self, k: usize) -> bool {
        (k % 2 == 0) == (self == Parity::Even)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

fn check_unit_interval(x: f64) -> Result<()> {
    if x.abs() > 1.0 || !x.is_finite() {
        return Err(Error::Domain(format!("x = {x} lies outside [-1, 1]")));
    }
    Ok(())
}

/// T_n(x) by the three-term recurrence (no domain check).
fn t_rec(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// U_n(x) by the three-term recurrence (no domain check).
fn u_rec(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev polynomial of the first kind, T_n(x), for x in [-1, 1].
pub fn eval_t(n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    Ok(t_rec(n, x))
}

/// Chebyshev polynomial of the second kind, U_n(x), for x in [-1, 1].
pub fn eval_u(n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    Ok(u_rec(n, x))
}

/// A dense Chebyshev coefficient vector with definite parity.
///
/// `coeffs[k]` multiplies T_k (or U_k for the second kind). Entries whose
/// index parity disagrees with `parity` are stored as exactly 0.0; the
/// constructor rejects violations above a small relative tolerance instead
/// of silently zeroing them, since definite parity is a hard hypothesis of
/// everything downstream. The nominal degree is `coeffs.len() - 1` and must
/// itself match the parity (pad by two slots at a time); a zero leading
/// coefficient is allowed so callers can carry padded representations.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebCoeffs {
    kind: ChebKind,
    parity: Parity,
    coeffs: Vec<f64>,
}

impl ChebCoeffs {
    pub fn new(kind: ChebKind, parity: Parity, mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput(
                "coefficient vector must be non-empty".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "coefficient vector contains a non-finite entry".into(),
            ));
        }
        let nominal = coeffs.len() - 1;
        if !parity.matches_index(nominal) {
            return Err(Error::InvalidInput(format!(
                "length {} stores nominal degree {}, inconsistent with {} parity",
                coeffs.len(),
                nominal,
                parity.as_str()
            )));
        }
        let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        for (k, c) in coeffs.iter_mut().enumerate() {
            if !parity.matches_index(k) {
                if c.abs() > PARITY_REL_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "coefficient {c:e} at index {k} violates {} parity",
                        parity.as_str()
                    )));
                }
                *c = 0.0;
            }
        }
        Ok(Self {
            kind,
            parity,
            coeffs,
        })
    }

    /// The single basis polynomial T_n (or U_n) with unit coefficient.
    pub fn basis(kind: ChebKind, n: usize) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        Self {
            kind,
            parity: Parity::of_degree(n),
            coeffs,
        }
    }

    /// The zero polynomial of the given parity (shortest representation).
    pub fn zero(kind: ChebKind, parity: Parity) -> Self {
        let coeffs = match parity {
            Parity::Even => vec![0.0],
            Parity::Odd => vec![0.0, 0.0],
        };
        Self {
            kind,
            parity,
            coeffs,
        }
    }

    pub fn kind(&self) -> ChebKind {
        self.kind
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nominal degree, `coeffs.len() - 1`. The leading entry may be zero for
    /// padded representations; see [`ChebCoeffs::trim`].
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of order `k` (zero beyond the stored length).
    pub fn get(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Drop trailing zero coefficients in steps of two, preserving parity.
    pub fn trim(&self) -> Self {
        let min_len = match self.parity {
            Parity::Even => 1,
            Parity::Odd => 2,
        };
        let mut len = self.coeffs.len();
        while len > min_len && self.coeffs[len - 1] == 0.0 && self.coeffs[len - 2] == 0.0 {
            len -= 2;
        }
        Self {
            kind: self.kind,
            parity: self.parity,
            coeffs: self.coeffs[..len].to_vec(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kind: self.kind,
            parity: self.parity,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        // Clenshaw backward recurrence; for the second kind the downward pass
        // runs through k = 0 and b_0 is already the value.
        let c = &self.coeffs;
        let n = c.len() - 1;
        match self.kind {
            ChebKind::First => {
                if n == 0 {
                    return c[0];
                }
                let (mut b1, mut b2) = (0.0, 0.0);
                for k in (1..=n).rev() {
                    let b = c[k] + 2.0 * x * b1 - b2;
                    b2 = b1;
                    b1 = b;
                }
                c[0] + x * b1 - b2
            }
            ChebKind::Second => {
                let (mut b1, mut b2) = (0.0, 0.0);
                for k in (0..=n).rev() {
                    let b = c[k] + 2.0 * x * b1 - b2;
                    b2 = b1;
                    b1 = b;
                }
                b1
            }
        }
    }

    /// Evaluate the series at x in [-1, 1] by Clenshaw summation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit_interval(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Coefficient-space norm sqrt(c_0^2 + (1/2) sum_{k>=1} c_k^2), the norm
    /// induced by the weight 1/sqrt(1-x^2) on first-kind series.
    pub fn norm_t(&self) -> f64 {
        debug_assert_eq!(self.kind, ChebKind::First);
        let head = self.coeffs[0] * self.coeffs[0];
        let tail: f64 = self.coeffs[1..].iter().map(|c| c * c).sum();
        (head + 0.5 * tail).sqrt()
    }

    /// Sampled sup-norm estimate on `oversample * (degree + 1)` interior
    /// Chebyshev points plus both endpoints. A lower bound on the true
    /// sup-norm; the grid size is reported so checks against it are
    /// auditable.
    pub fn max_norm(&self, oversample: usize) -> MaxNormEstimate {
        let n = oversample.max(1) * (self.degree() + 1);
        let mut value = self
            .eval_unchecked(1.0)
            .abs()
            .max(self.eval_unchecked(-1.0).abs());
        for j in 1..=n {
            let x = (std::f64::consts::PI * (2 * j - 1) as f64 / (2.0 * n as f64)).cos();
            value = value.max(self.eval_unchecked(x).abs());
        }
        MaxNormEstimate {
            value,
            grid_points: n + 2,
        }
    }

    /// Monomial coefficients of the same polynomial, little-endian in the
    /// power. Capped at degree 64: the leading coefficient scales like
    /// 2^(degree-1), so the conversion loses digits fast.
    pub fn to_monomial(&self) -> Result<Vec<f64>> {
        let n = self.degree();
        if n > CONVERSION_DEGREE_CAP {
            return Err(Error::Precision(format!(
                "monomial conversion at degree {n} exceeds the cap of {CONVERSION_DEGREE_CAP}"
            )));
        }
        let rows = basis_rows(self.kind, n);
        let mut out = vec![0.0; n + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, &b) in rows[k].iter().enumerate() {
                out[j] += c * b;
            }
        }
        Ok(out)
    }

    /// Inverse of [`ChebCoeffs::to_monomial`]: peel coefficients from the top
    /// down. Exact division by the leading powers of two keeps the round trip
    /// tight. Parity is inferred from the highest significant output entry
    /// and the usual construction checks then apply.
    pub fn from_monomial(monomial: &[f64], kind: ChebKind) -> Result<Self> {
        if monomial.is_empty() {
            return Err(Error::InvalidInput(
                "coefficient vector must be non-empty".into(),
            ));
        }
        let n = monomial.len() - 1;
        if n > CONVERSION_DEGREE_CAP {
            return Err(Error::Precision(format!(
                "monomial conversion at degree {n} exceeds the cap of {CONVERSION_DEGREE_CAP}"
            )));
        }
        let rows = basis_rows(kind, n);
        let mut work = monomial.to_vec();
        let mut c = vec![0.0; n + 1];
        for k in (0..=n).rev() {
            let ck = work[k] / rows[k][k];
            c[k] = ck;
            if ck != 0.0 {
                for (j, &b) in rows[k].iter().enumerate() {
                    work[j] -= ck * b;
                }
            }
        }
        let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(Self::zero(kind, Parity::Even));
        }
        let top = c
            .iter()
            .rposition(|v| v.abs() > PARITY_REL_TOL * scale)
            .unwrap();
        c.truncate(top + 1);
        Self::new(kind, Parity::of_degree(top), c)
    }
}

/// A sampled sup-norm value together with the grid size that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxNormEstimate {
    pub value: f64,
    pub grid_points: usize,
}

/// Monomial coefficient rows of T_0..T_n (or U_0..U_n), row k of length k+1.
fn basis_rows(kind: ChebKind, n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    if n == 0 {
        return rows;
    }
    rows.push(match kind {
        ChebKind::First => vec![0.0, 1.0],
        ChebKind::Second => vec![0.0, 2.0],
    });
    for k in 2..=n {
        let mut row = vec![0.0; k + 1];
        for (j, &c) in rows[k - 1].iter().enumerate() {
            row[j + 1] += 2.0 * c;
        }
        for (j, &c) in rows[k - 2].iter().enumerate() {
            row[j] -= c;
        }
        rows.push(row);
    }
    rows
}

/// Rewrite a first-kind series as a second-kind series of the same degree,
/// using T_0 = U_0, T_1 = U_1/2, T_n = (U_n - U_{n-2})/2.
pub(crate) fn t_to_u(s: &[f64]) -> Vec<f64> {
    let at = |j: usize| s.get(j).copied().unwrap_or(0.0);
    let mut q = vec![0.0; s.len()];
    if !q.is_empty() {
        q[0] = at(0) - at(2) / 2.0;
    }
    for (j, slot) in q.iter_mut().enumerate().skip(1) {
        *slot = (at(j) - at(j + 2)) / 2.0;
    }
    q
}

/// The positive zeros of T_{2*d_tilde}: x_k = cos((2k-1)pi/(4*d_tilde)),
/// k = 1..d_tilde, strictly decreasing in (0, 1). This is the quadrature and
/// least-squares grid shared by the cost function and coefficient recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGrid {
    d_tilde: usize,
    nodes: Vec<f64>,
}

impl NodeGrid {
    pub fn d_tilde(&self) -> usize {
        self.d_tilde
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Build the node grid for a given number of reduced degrees of freedom.
pub fn cheb_nodes(d_tilde: usize) -> Result<NodeGrid> {
    if d_tilde == 0 {
        return Err(Error::InvalidInput(
            "node grid needs at least one node".into(),
        ));
    }
    let nodes = (1..=d_tilde)
        .map(|k| (std::f64::consts::PI * (2 * k - 1) as f64 / (4.0 * d_tilde as f64)).cos())
        .collect();
    Ok(NodeGrid { d_tilde, nodes })
}

/// Recover first-kind Chebyshev coefficients of a definite-parity polynomial
/// of degree <= d from its values on the `cheb_nodes(d/2 + 1)` grid.
///
/// The grid points are the positive zeros of T_{2*d_tilde}, where the sums
/// sum_j T_n(x_j) T_m(x_j) over parity-matching orders n, m < 2*d_tilde are
/// exactly 0 (n != m), d_tilde (n = m = 0), or d_tilde/2 (otherwise), so the
/// weighted sums below invert sampling exactly.
pub fn values_to_coeffs(values: &[f64], parity: Parity, d: usize) -> Result<ChebCoeffs> {
    if Parity::of_degree(d) != parity {
        return Err(Error::InvalidInput(format!(
            "degree {d} conflicts with {} parity",
            parity.as_str()
        )));
    }
    let d_tilde = d / 2 + 1;
    if values.len() != d_tilde {
        return Err(Error::InvalidInput(format!(
            "expected {d_tilde} samples for degree {d}, got {}",
            values.len()
        )));
    }
    let grid = cheb_nodes(d_tilde)?;
    let mut coeffs = vec![0.0; d + 1];
    for (&x, &v) in grid.nodes().iter().zip(values) {
        let mut t_prev = 1.0;
        let mut t_cur = x;
        for (k, slot) in coeffs.iter_mut().enumerate() {
            let t = match k {
                0 => 1.0,
                1 => x,
                _ => {
                    let next = 2.0 * x * t_cur - t_prev;
                    t_prev = t_cur;
                    t_cur = next;
                    next
                }
            };
            if parity.matches_index(k) {
                *slot += v * t;
            }
        }
    }
    let dt = d_tilde as f64;
    for (k, slot) in coeffs.iter_mut().enumerate() {
        *slot *= if k == 0 { 1.0 / dt } else { 2.0 / dt };
    }
    ChebCoeffs::new(ChebKind::First, parity, coeffs)
}

/// A degree-d real target polynomial: first-kind Chebyshev series with
/// definite parity and sampled sup-norm < 1. This is the input every solver
/// accepts; the norm bound is a hard validity requirement, not a convergence
/// hypothesis.
#[derive(Clone, Debug)]
pub struct TargetPoly {
    coeffs: ChebCoeffs,
    max_norm: MaxNormEstimate,
}

impl TargetPoly {
    /// Oversampling factor used for the admission sup-norm estimate.
    pub const MAX_NORM_OVERSAMPLE: usize = 8;

    pub fn new(coeffs: ChebCoeffs) -> Result<Self> {
        if coeffs.kind() != ChebKind::First {
            return Err(Error::InvalidTarget(
                "target must be a first-kind Chebyshev series".into(),
            ));
        }
        let max_norm = coeffs.max_norm(Self::MAX_NORM_OVERSAMPLE);
        if max_norm.value >= 1.0 {
            return Err(Error::InvalidTarget(format!(
                "sup norm {} (sampled on {} points) violates the requirement \
                 that a target satisfy max |f| < 1 on [-1, 1]",
                max_norm.value, max_norm.grid_points
            )));
        }
        Ok(Self { coeffs, max_norm })
    }

    pub fn coeffs(&self) -> &ChebCoeffs {
        &self.coeffs
    }

    /// Nominal degree d (the leading coefficient may be zero if padded).
    pub fn degree(&self) -> usize {
        self.coeffs.degree()
    }

    pub fn parity(&self) -> Parity {
        self.coeffs.parity()
    }

    /// Number of reduced phase-factor degrees of freedom for this degree.
    pub fn d_tilde(&self) -> usize {
        self.degree() / 2 + 1
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.coeffs.eval(x)
    }

    pub fn max_norm_estimate(&self) -> MaxNormEstimate {
        self.max_norm
    }

    /// Values on a node grid, in grid order.
    pub fn values_on(&self, grid: &NodeGrid) -> Vec<f64> {
        grid.nodes()
            .iter()
            .map(|&x| self.coeffs.eval_unchecked(x))
            .collect()
    }

    /// The target scaled by `factor` (re-validated).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.coeffs.scaled(factor))
    }
}

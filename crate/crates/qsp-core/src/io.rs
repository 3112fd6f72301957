//! JSON file formats for the three artifacts the tooling exchanges:
//! polynomials, phase vectors, and complementary pairs.
//!
//! Each format has a mirror struct deriving serde traits plus conversions
//! to and from the domain types; conversions re-run the domain validation,
//! so a corrupted file is rejected rather than round-tripped. Floats are
//! written with 17 significant digits so every double survives the trip
//! bit-exactly.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{ChebCoeffs, ChebKind, Parity, TargetPoly};
use crate::direct::{AdmissiblePair, RootMultiset};
use crate::error::{Error, Result};
use crate::qsp::ReducedPhases;

/// The one phase-vector convention this crate implements: palindromic
/// phases around W(x) rotations.
pub const PHASE_CONVENTION: &str = "symmetric-wx";

fn parity_from_str(s: &str) -> Result<Parity> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        other => Err(Error::InvalidInput(format!(
            "unknown parity {other:?}; expected \"even\" or \"odd\""
        ))),
    }
}

/// A polynomial with definite parity: `{"basis", "parity", "coeffs"}` with
/// coefficients ascending in the basis index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFile {
    pub basis: String,
    pub parity: String,
    pub coeffs: Vec<f64>,
}

impl PolynomialFile {
    pub fn from_coeffs(c: &ChebCoeffs) -> Self {
        let basis = match c.kind() {
            ChebKind::First => "chebyshev-1",
            ChebKind::Second => "chebyshev-2",
        };
        PolynomialFile {
            basis: basis.into(),
            parity: c.parity().as_str().into(),
            coeffs: c.coeffs().to_vec(),
        }
    }

    /// Reconstruct the coefficient vector, converting monomial input to the
    /// first-kind basis. The declared parity must match the coefficients.
    pub fn to_coeffs(&self) -> Result<ChebCoeffs> {
        let parity = parity_from_str(&self.parity)?;
        let c = match self.basis.as_str() {
            "chebyshev-1" => ChebCoeffs::new(ChebKind::First, parity, self.coeffs.clone())?,
            "chebyshev-2" => ChebCoeffs::new(ChebKind::Second, parity, self.coeffs.clone())?,
            "monomial" => {
                let c = ChebCoeffs::from_monomial(&self.coeffs, ChebKind::First)?;
                if c.parity() != parity && c.coeffs().iter().any(|&v| v != 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "declared parity {} but the monomial coefficients have parity {}",
                        self.parity,
                        c.parity().as_str()
                    )));
                }
                c
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown basis {other:?}; expected \"chebyshev-1\", \
                     \"chebyshev-2\", or \"monomial\""
                )))
            }
        };
        Ok(c)
    }
}

/// A symmetric phase vector: `{"d", "parity", "reduced", "full",
/// "convention"}`. `full` is derived from `reduced` and carried for
/// interoperability; on read it is cross-checked when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasesFile {
    pub d: usize,
    pub parity: String,
    pub reduced: Vec<f64>,
    #[serde(default)]
    pub full: Vec<f64>,
    pub convention: String,
}

impl PhasesFile {
    pub fn from_phases(r: &ReducedPhases) -> Self {
        PhasesFile {
            d: r.degree(),
            parity: r.parity().as_str().into(),
            reduced: r.phases().to_vec(),
            full: r.symmetrize(),
            convention: PHASE_CONVENTION.into(),
        }
    }

    pub fn to_phases(&self) -> Result<ReducedPhases> {
        if self.convention != PHASE_CONVENTION {
            return Err(Error::InvalidInput(format!(
                "unsupported phase convention {:?}; this tool implements {:?}",
                self.convention, PHASE_CONVENTION
            )));
        }
        let parity = parity_from_str(&self.parity)?;
        let r = ReducedPhases::new(self.reduced.clone(), parity)?;
        if r.degree() != self.d {
            return Err(Error::InvalidInput(format!(
                "declared degree {} but {} reduced {} phases imply degree {}",
                self.d,
                self.reduced.len(),
                self.parity,
                r.degree()
            )));
        }
        if !self.full.is_empty() {
            let derived = r.symmetrize();
            let consistent = self.full.len() == derived.len()
                && self
                    .full
                    .iter()
                    .zip(&derived)
                    .all(|(a, b)| (a - b).abs() <= 1e-12);
            if !consistent {
                return Err(Error::InvalidInput(
                    "the \"full\" phase vector does not match the palindromic \
                     expansion of \"reduced\""
                        .into(),
                ));
            }
        }
        Ok(r)
    }
}

/// A complementary pair: `{"alpha", "p_im", "q", "roots", "maximal"}`.
/// The target itself is not stored (pair files sit next to their target),
/// so reconstruction takes the target as an argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub alpha: f64,
    pub p_im: PolynomialFile,
    pub q: PolynomialFile,
    pub roots: Vec<[f64; 2]>,
    pub maximal: bool,
}

impl PairFile {
    pub fn from_pair(p: &AdmissiblePair) -> Self {
        PairFile {
            alpha: p.alpha(),
            p_im: PolynomialFile::from_coeffs(p.p_im()),
            q: PolynomialFile::from_coeffs(p.q()),
            roots: p.source().roots().iter().map(|z| [z.re, z.im]).collect(),
            maximal: p.source().is_maximal(),
        }
    }

    /// Rebuild the pair for `f`, re-running every admissibility check. The
    /// stored maximal flag must agree with the root moduli.
    pub fn to_pair(&self, f: &TargetPoly) -> Result<AdmissiblePair> {
        if self.p_im.basis != "chebyshev-1" {
            return Err(Error::InvalidInput(format!(
                "the imaginary part must be a chebyshev-1 series, not {:?}",
                self.p_im.basis
            )));
        }
        if self.q.basis != "chebyshev-2" {
            return Err(Error::InvalidInput(format!(
                "the second component must be a chebyshev-2 series, not {:?}",
                self.q.basis
            )));
        }
        let roots: Vec<Complex64> = self
            .roots
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        if !roots.is_empty() && roots.len() != 2 * f.degree() {
            return Err(Error::InvalidInput(format!(
                "{} roots stored but a degree-{} target selects {}",
                roots.len(),
                f.degree(),
                2 * f.degree()
            )));
        }
        let source = RootMultiset::from_flat_roots(&roots)?;
        if source.is_maximal() != self.maximal {
            return Err(Error::InvalidInput(format!(
                "stored maximal flag {} contradicts the root moduli",
                self.maximal
            )));
        }
        // The admissibility checks never consume alpha (the components
        // already embed it), so pin it against its defining root product
        // here or corruption would ride along silently.
        if !source.is_empty() {
            let prod: Complex64 = source
                .roots()
                .iter()
                .map(|r| Complex64::new(1.0, 0.0) - r)
                .product();
            let f1 = f.eval(1.0)?;
            let expected = 1.0 - f1 * f1;
            if (self.alpha * prod.re * prod.re - expected).abs() > 1e-6 * expected.max(1e-6) {
                return Err(Error::InvalidInput(format!(
                    "alpha = {:e} is inconsistent with the stored roots",
                    self.alpha
                )));
            }
        }
        AdmissiblePair::from_parts(
            f.clone(),
            self.p_im.to_coeffs()?.coeffs().to_vec(),
            self.q.to_coeffs()?.coeffs().to_vec(),
            self.alpha,
            source,
        )
    }
}

/// Formatter writing every float with 17 significant digits, enough for
/// any double to round-trip bit-exactly.
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: std::io::Write + ?Sized,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any artifact with the crate's float formatting, newline
/// terminated.
pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON serializer emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    Ok(fs::write(path, json_string(value)?)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_polynomial(path: &Path) -> Result<ChebCoeffs> {
    read_json::<PolynomialFile>(path)?.to_coeffs()
}

/// Read a polynomial file and admit it as a solve target (first-kind basis,
/// sup norm below one).
pub fn read_target(path: &Path) -> Result<TargetPoly> {
    TargetPoly::new(read_polynomial(path)?)
}

pub fn write_polynomial(path: &Path, c: &ChebCoeffs) -> Result<()> {
    write_json(path, &PolynomialFile::from_coeffs(c))
}

pub fn read_phases(path: &Path) -> Result<ReducedPhases> {
    read_json::<PhasesFile>(path)?.to_phases()
}

pub fn write_phases(path: &Path, r: &ReducedPhases) -> Result<()> {
    write_json(path, &PhasesFile::from_phases(r))
}

pub fn read_pair(path: &Path, f: &TargetPoly) -> Result<AdmissiblePair> {
    read_json::<PairFile>(path)?.to_pair(f)
}

pub fn write_pair(path: &Path, p: &AdmissiblePair) -> Result<()> {
    write_json(path, &PairFile::from_pair(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::{solve_enumerate, solve_maximal, verify_pair, DirectConfig};

    fn target_from(coeffs: Vec<f64>, parity: Parity) -> TargetPoly {
        TargetPoly::new(ChebCoeffs::new(ChebKind::First, parity, coeffs).unwrap()).unwrap()
    }

    fn reparse<T: Serialize + for<'de> Deserialize<'de>>(v: &T) -> T {
        serde_json::from_str(&json_string(v).unwrap()).unwrap()
    }

    #[test]
    fn float_formatting_round_trips_exactly() {
        let awkward = vec![
            0.1,
            std::f64::consts::PI,
            1.0 / 3.0,
            -2.2250738585072014e-308,
            6.02e23,
            -0.0,
        ];
        let back: Vec<f64> = reparse(&awkward);
        for (a, b) in awkward.iter().zip(&back) {
            assert!(a.to_bits() == b.to_bits() || (*a == 0.0 && *b == 0.0));
        }
    }

    #[test]
    fn polynomial_round_trip_both_kinds() {
        for (kind, parity, coeffs) in [
            (ChebKind::First, Parity::Odd, vec![0.0, 0.25, 0.0, -0.125]),
            (ChebKind::Second, Parity::Even, vec![0.5, 0.0, 0.25]),
        ] {
            let c = ChebCoeffs::new(kind, parity, coeffs).unwrap();
            let file = reparse(&PolynomialFile::from_coeffs(&c));
            let back = file.to_coeffs().unwrap();
            assert_eq!(back.kind(), c.kind());
            assert_eq!(back.parity(), c.parity());
            assert_eq!(back.coeffs(), c.coeffs());
        }
    }

    #[test]
    fn monomial_file_converts_to_first_kind() {
        // x^2 - 1/2 = T_2 / 2.
        let file = PolynomialFile {
            basis: "monomial".into(),
            parity: "even".into(),
            coeffs: vec![-0.5, 0.0, 1.0],
        };
        let c = file.to_coeffs().unwrap();
        assert_eq!(c.kind(), ChebKind::First);
        assert_eq!(c.parity(), Parity::Even);
        assert_eq!(c.coeffs(), &[0.0, 0.0, 0.5]);

        let lying = PolynomialFile {
            parity: "odd".into(),
            ..file
        };
        assert!(lying.to_coeffs().is_err());
    }

    #[test]
    fn unknown_basis_and_parity_rejected() {
        let file = PolynomialFile {
            basis: "legendre".into(),
            parity: "even".into(),
            coeffs: vec![0.1],
        };
        assert!(matches!(file.to_coeffs(), Err(Error::InvalidInput(_))));
        let file = PolynomialFile {
            basis: "chebyshev-1".into(),
            parity: "mixed".into(),
            coeffs: vec![0.1],
        };
        assert!(matches!(file.to_coeffs(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn phases_round_trip_and_validation() {
        for (phases, parity) in [
            (vec![0.3, -0.2, 0.1], Parity::Odd),
            (vec![0.3, -0.2, 2.5], Parity::Even),
        ] {
            let r = ReducedPhases::new(phases, parity).unwrap();
            let file = PhasesFile::from_phases(&r);
            assert_eq!(file.full.len(), r.degree() + 1);
            let back = reparse(&file).to_phases().unwrap();
            assert_eq!(back.phases(), r.phases());
            assert_eq!(back.parity(), r.parity());
        }

        let r = ReducedPhases::new(vec![0.3, -0.2], Parity::Odd).unwrap();
        let good = PhasesFile::from_phases(&r);

        let mut wrong_degree = good.clone();
        wrong_degree.d = 5;
        assert!(wrong_degree.to_phases().is_err());

        let mut wrong_full = good.clone();
        wrong_full.full[3] += 1e-6;
        assert!(wrong_full.to_phases().is_err());

        let mut other_convention = good.clone();
        other_convention.convention = "reflection".into();
        assert!(other_convention.to_phases().is_err());

        // Omitting the derived field is allowed for hand-written files.
        let mut bare = good;
        bare.full.clear();
        assert_eq!(bare.to_phases().unwrap().phases(), r.phases());
    }

    #[test]
    fn pair_round_trip_preserves_everything() {
        let f = target_from(vec![0.1, 0.0, 0.3, 0.0, 0.2], Parity::Even);
        let cfg = DirectConfig::default();
        for sol in solve_enumerate(&f, &cfg, 64).unwrap() {
            let file = reparse(&PairFile::from_pair(&sol.pair));
            let back = file.to_pair(&f).unwrap();
            assert_eq!(back.alpha(), sol.pair.alpha());
            assert_eq!(back.p_im().coeffs(), sol.pair.p_im().coeffs());
            assert_eq!(back.q().coeffs(), sol.pair.q().coeffs());
            assert_eq!(back.source().roots(), sol.pair.source().roots());
            assert_eq!(back.source().is_maximal(), sol.pair.source().is_maximal());
            assert_eq!(back.source().orbits().len(), sol.pair.source().orbits().len());
            // The alpha-root-product check only bites on deserialized pairs.
            assert!(verify_pair(&back, Some(&sol.phases)).all_pass());
        }
    }

    #[test]
    fn pair_corruption_rejected() {
        let f = target_from(vec![0.0, 0.2, 0.0, 0.4], Parity::Odd);
        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let good = PairFile::from_pair(&sol.pair);
        assert!(good.to_pair(&f).is_ok());

        let mut dropped_root = good.clone();
        dropped_root.roots.pop();
        assert!(dropped_root.to_pair(&f).is_err());

        let mut unpartnered = good.clone();
        unpartnered.roots[0][0] += 1e-3;
        assert!(unpartnered.to_pair(&f).is_err());

        let mut wrong_flag = good.clone();
        wrong_flag.maximal = false;
        assert!(wrong_flag.to_pair(&f).is_err());

        let mut wrong_alpha = good.clone();
        wrong_alpha.alpha *= 1.0 + 1e-3;
        assert!(wrong_alpha.to_pair(&f).is_err());

        let mut bad_coeff = good;
        bad_coeff.p_im.coeffs[1] += 1e-4;
        assert!(bad_coeff.to_pair(&f).is_err());
    }

    #[test]
    fn file_helpers_round_trip_on_disk() {
        let dir = std::env::temp_dir().join(format!("qsp-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();

        let f = target_from(vec![0.0, 0.5], Parity::Odd);
        let poly_path = dir.join("target.json");
        write_polynomial(&poly_path, f.coeffs()).unwrap();
        assert_eq!(read_target(&poly_path).unwrap().coeffs().coeffs(), f.coeffs().coeffs());

        let sol = solve_maximal(&f, &DirectConfig::default()).unwrap();
        let phases_path = dir.join("phases.json");
        write_phases(&phases_path, &sol.phases).unwrap();
        assert_eq!(read_phases(&phases_path).unwrap().phases(), sol.phases.phases());

        let pair_path = dir.join("pair.json");
        write_pair(&pair_path, &sol.pair).unwrap();
        assert_eq!(
            read_pair(&pair_path, &f).unwrap().alpha(),
            sol.pair.alpha()
        );

        fs::remove_dir_all(&dir).unwrap();
    }
}

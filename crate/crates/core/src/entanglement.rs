//! Two-qubit polarization states shared by nodes R and L.
//!
//! Matrices use the basis order `|HH⟩, |HV⟩, |VH⟩, |VV⟩` with node R as the
//! first factor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{FockState, OccupationPattern, Site};

pub const BASIS_ORDER: [&str; 4] = ["HH", "HV", "VH", "VV"];

/// Fidelity a separable strategy cannot exceed for a Bell target.
pub const CLASSICAL_FIDELITY_LIMIT: f64 = 2.0 / 3.0;

const HERMITIAN_TOLERANCE: f64 = 1e-10;
const TRACE_TOLERANCE: f64 = 1e-10;
const EIGENVALUE_FLOOR: f64 = -1e-9;

/// Two-qubit state vector in the R ⊗ L basis.
pub type Ket2 = Vector4<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BellState {
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiPlus,
        BellState::PsiMinus,
        BellState::PhiPlus,
        BellState::PhiMinus,
    ];

    /// `Ψ± = (|HV⟩ ± |VH⟩)/√2`, `Φ± = (|HH⟩ ± |VV⟩)/√2`.
    pub fn ket(self) -> Ket2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b, cc, d) = match self {
            BellState::PsiPlus => (0.0, h, h, 0.0),
            BellState::PsiMinus => (0.0, h, -h, 0.0),
            BellState::PhiPlus => (h, 0.0, 0.0, h),
            BellState::PhiMinus => (h, 0.0, 0.0, -h),
        };
        Ket2::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0))
    }

    pub fn name(self) -> &'static str {
        match self {
            BellState::PsiPlus => "psi+",
            BellState::PsiMinus => "psi-",
            BellState::PhiPlus => "phi+",
            BellState::PhiMinus => "phi-",
        }
    }

    pub fn density(self) -> TwoQubitDensity {
        TwoQubitDensity::pure(&self.ket())
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellState::ALL
            .into_iter()
            .find(|b| b.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown Bell state `{s}` (psi+, psi-, phi+, phi-)")))
    }
}

pub fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))
}

pub fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0))
}

pub fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))
}

/// `a ⊗ b` with `a` acting on node R.
pub fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// A validated 4×4 density operator for the R–L polarization qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity {
    matrix: Matrix4<Complex64>,
}

impl TwoQubitDensity {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(matrix: Matrix4<Complex64>) -> Result<Self> {
        let herm = (matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:e})")));
        }
        let trace = matrix.trace();
        if (trace - c(1.0, 0.0)).norm() > TRACE_TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {trace} is not 1")));
        }
        let rho = TwoQubitDensity { matrix };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for the normalized `ψ`.
    pub fn pure(ket: &Ket2) -> Self {
        let k = ket / Complex64::from(ket.norm());
        TwoQubitDensity {
            matrix: k * k.adjoint(),
        }
    }

    pub fn maximally_mixed() -> Self {
        TwoQubitDensity {
            matrix: Matrix4::identity() * c(0.25, 0.0),
        }
    }

    /// `p |b⟩⟨b| + (1 - p) I/4`.
    pub fn werner(bell: BellState, p: f64) -> Self {
        TwoQubitDensity {
            matrix: bell.density().matrix * c(p, 0.0)
                + TwoQubitDensity::maximally_mixed().matrix * c(1.0 - p, 0.0),
        }
    }

    /// Weighted mixture; weights are renormalized.
    pub fn mixture(parts: &[(f64, &TwoQubitDensity)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity("mixture with zero total weight".into()));
        }
        let matrix = parts
            .iter()
            .fold(Matrix4::zeros(), |acc, (w, rho)| acc + rho.matrix * c(w / total, 0.0));
        Ok(TwoQubitDensity { matrix })
    }

    /// Hermitian part, negative eigenvalues clamped to zero, trace set to 1.
    pub fn nearest_physical(matrix: &Matrix4<Complex64>) -> Result<Self> {
        let herm = (matrix + matrix.adjoint()) * c(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let clamped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity("no positive spectral weight".into()));
        }
        let mut out = Matrix4::zeros();
        for (k, &l) in clamped.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            out += v * v.adjoint() * c(l / total, 0.0);
        }
        Ok(TwoQubitDensity { matrix: out })
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (self.matrix + self.matrix.adjoint()) * c(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    /// `(U_R ⊗ U_L) ρ (U_R ⊗ U_L)†`.
    pub fn conjugate_local(&self, u_r: &Matrix2<Complex64>, u_l: &Matrix2<Complex64>) -> Self {
        let u = kron(u_r, u_l);
        TwoQubitDensity {
            matrix: u * self.matrix * u.adjoint(),
        }
    }

    /// `⟨k|ρ|k⟩` for an arbitrary (not necessarily normalized) ket.
    pub fn expectation(&self, ket: &Ket2) -> f64 {
        (ket.adjoint() * self.matrix * ket)[(0, 0)].re
    }
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    basis_order: Vec<String>,
    re: [[f64; 4]; 4],
    im: [[f64; 4]; 4],
}

impl Serialize for TwoQubitDensity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                re[i][j] = self.matrix[(i, j)].re;
                im[i][j] = self.matrix[(i, j)].im;
            }
        }
        DensityRepr {
            basis_order: BASIS_ORDER.iter().map(|s| s.to_string()).collect(),
            re,
            im,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TwoQubitDensity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DensityRepr::deserialize(deserializer)?;
        if repr.basis_order != BASIS_ORDER {
            return Err(serde::de::Error::custom(format!(
                "basis order {:?} is not {:?}",
                repr.basis_order, BASIS_ORDER
            )));
        }
        let matrix = Matrix4::from_fn(|i, j| c(repr.re[i][j], repr.im[i][j]));
        TwoQubitDensity::new(matrix).map_err(serde::de::Error::custom)
    }
}

/// `⟨t|ρ|t⟩` for a unit-norm target.
pub fn fidelity(rho: &TwoQubitDensity, target: &Ket2) -> f64 {
    rho.expectation(target)
}

fn hermitian_sqrt(m: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let eig = m.symmetric_eigen();
    let mut out = Matrix4::zeros();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * c(l.max(0.0).sqrt(), 0.0);
    }
    out
}

/// Wootters concurrence.
///
/// The eigenvalues of `ρ ρ̃` are taken from the Hermitian matrix
/// `√ρ ρ̃ √ρ`, which has the same spectrum.
pub fn concurrence(rho: &TwoQubitDensity) -> f64 {
    let yy = kron(&pauli_y(), &pauli_y());
    let tilde = yy * rho.matrix.conjugate() * yy;
    let sqrt_rho = hermitian_sqrt(&rho.matrix);
    let m = sqrt_rho * tilde * sqrt_rho;
    let m = (m + m.adjoint()) * c(0.5, 0.0);
    let mut roots: Vec<f64> = m
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    (roots[0] - roots[1] - roots[2] - roots[3]).clamp(0.0, 1.0)
}

/// True iff `f` is strictly above the classical limit 2/3.
pub fn classical_limit_check(f: f64) -> bool {
    f > CLASSICAL_FIDELITY_LIMIT
}

/// Polarization density operator of the photons at R and L.
///
/// Every term must hold exactly one photon at R and one at L. All other
/// modes, and the temporal indices of the R and L photons, are traced out.
pub fn reduce_rl(state: &FockState) -> Result<TwoQubitDensity> {
    let mut blocks: BTreeMap<(OccupationPattern, u8, u8), Ket2> = BTreeMap::new();
    for (pattern, amp) in state.terms() {
        let r = pattern.photons_at(Site::R);
        let l = pattern.photons_at(Site::L);
        let ([r], [l]) = (r.as_slice(), l.as_slice()) else {
            return Err(Error::UnsupportedSupport(format!(
                "pattern `{pattern}` does not hold exactly one photon at R and one at L"
            )));
        };
        let env = pattern.without_site(Site::R).without_site(Site::L);
        let index = 2 * r.pol.index() + l.pol.index();
        blocks.entry((env, r.temporal, l.temporal)).or_insert_with(Ket2::zeros)[index] += amp;
    }
    let matrix = blocks
        .values()
        .fold(Matrix4::zeros(), |acc, v| acc + v * v.adjoint());
    let trace = matrix.trace().re;
    if trace <= crate::fock::AMPLITUDE_EPSILON.powi(2) {
        return Err(Error::ZeroNorm { norm: trace.sqrt() });
    }
    Ok(TwoQubitDensity {
        matrix: matrix / c(trace, 0.0),
    })
}

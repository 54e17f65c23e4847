//! Linear-optical elements as mode unitaries.
//!
//! An element acting on modes `m_0 .. m_{k-1}` with matrix `U` transforms
//! creation operators as `a†_{m_i} → Σ_j U[j, i] a†_{m_j}`, so column `i` is the
//! output amplitude of a photon entering `m_i`.
//!
//! Element modes are matched on (site, polarization). Every element acts the
//! same way on each temporal index; distinguishability only decides which
//! photons can interfere.
//!
//! Jones conventions: `HWP(θ) = [[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]` and
//! `QWP(θ) = R(θ) diag(1, i) R(-θ)` with `R` the usual rotation matrix.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockState, ModeLabel, OccupationPattern, Polarization, Site};

/// Maximum entry deviation of `U U†` from identity accepted for an element.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Jones matrix acting on the (H, V) amplitudes of one spatial mode.
pub type Jones = Matrix2<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    modes: Vec<ModeLabel>,
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(modes: Vec<ModeLabel>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let k = modes.len();
        if matrix.nrows() != k || matrix.ncols() != k {
            return Err(Error::InvalidElement(format!(
                "{k} modes but a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut seen = BTreeSet::new();
        for m in &modes {
            if !seen.insert((m.site, m.pol)) {
                return Err(Error::DuplicateMode(*m));
            }
        }
        let element = ModeUnitary { modes, matrix };
        let deviation = element.unitarity_deviation();
        if deviation > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(element)
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Largest entry of `|U U† - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let k = self.modes.len();
        let product = &self.matrix * self.matrix.adjoint();
        (product - DMatrix::<Complex64>::identity(k, k))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// The inverse element `U†` on the same modes.
    pub fn inverse(&self) -> ModeUnitary {
        ModeUnitary {
            modes: self.modes.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Block-diagonal combination of two elements on disjoint modes.
    pub fn direct_sum(&self, other: &ModeUnitary) -> Result<ModeUnitary> {
        let (a, b) = (self.modes.len(), other.modes.len());
        let mut matrix = DMatrix::zeros(a + b, a + b);
        matrix.view_mut((0, 0), (a, a)).copy_from(&self.matrix);
        matrix.view_mut((a, a), (b, b)).copy_from(&other.matrix);
        let modes = self.modes.iter().chain(&other.modes).copied().collect();
        ModeUnitary::new(modes, matrix)
    }

    fn column_of(&self, mode: &ModeLabel) -> Option<usize> {
        self.modes
            .iter()
            .position(|m| m.site == mode.site && m.pol == mode.pol)
    }

    fn apply(&self, state: &FockState) -> FockState {
        let mut out = FockState::zero(state.photon_number());
        for (pattern, amp) in state.terms() {
            let mut partial = FockState::vacuum()
                .scaled(amp / pattern.factorial_product().sqrt());
            for (mode, &n) in pattern.iter() {
                let components: Vec<(ModeLabel, Complex64)> = match self.column_of(mode) {
                    Some(col) => self
                        .modes
                        .iter()
                        .enumerate()
                        .map(|(row, out_mode)| {
                            let target = ModeLabel::new(out_mode.site, out_mode.pol, mode.temporal);
                            (target, self.matrix[(row, col)])
                        })
                        .filter(|(_, c)| *c != ZERO)
                        .collect(),
                    None => vec![(*mode, ONE)],
                };
                for _ in 0..n {
                    partial = partial.create_superposed(&components);
                }
            }
            for (p, a) in partial.terms() {
                out.accumulate(p.clone(), *a);
            }
        }
        out.prune();
        out
    }
}

fn two_mode(a: ModeLabel, b: ModeLabel, m: [[Complex64; 2]; 2]) -> Result<ModeUnitary> {
    ModeUnitary::new(
        vec![a, b],
        DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
    )
}

/// 50:50 beam splitter `(1/√2)[[1, i], [i, 1]]` on two modes of equal
/// polarization and temporal index.
pub fn beam_splitter(in1: ModeLabel, in2: ModeLabel) -> Result<ModeUnitary> {
    if in1.site == in2.site && in1.pol == in2.pol {
        return Err(Error::DuplicateMode(in1));
    }
    if in1.pol != in2.pol || in1.temporal != in2.temporal {
        return Err(Error::InvalidElement(format!(
            "beam splitter ports {in1} and {in2} differ in polarization or temporal index"
        )));
    }
    let t = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let r = Complex64::new(0.0, FRAC_1_SQRT_2);
    two_mode(in1, in2, [[t, r], [r, t]])
}

/// Polarization-independent 50:50 beam splitter between two sites.
pub fn beam_splitter_sites(a: Site, b: Site) -> Result<ModeUnitary> {
    let h = beam_splitter(ModeLabel::at(a, Polarization::H), ModeLabel::at(b, Polarization::H))?;
    let v = beam_splitter(ModeLabel::at(a, Polarization::V), ModeLabel::at(b, Polarization::V))?;
    h.direct_sum(&v)
}

/// Arbitrary Jones matrix applied to the H/V pair at `site`.
pub fn polarization_element(site: Site, jones: &Jones) -> Result<ModeUnitary> {
    two_mode(
        ModeLabel::at(site, Polarization::H),
        ModeLabel::at(site, Polarization::V),
        [[jones[(0, 0)], jones[(0, 1)]], [jones[(1, 0)], jones[(1, 1)]]],
    )
}

pub fn half_wave_plate_jones(angle: f64) -> Jones {
    let (s, c) = (2.0 * angle).sin_cos();
    Jones::new(
        Complex64::new(c, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(-c, 0.0),
    )
}

pub fn quarter_wave_plate_jones(angle: f64) -> Jones {
    let (s, c) = angle.sin_cos();
    let rot = Jones::new(
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    );
    let retarder = Jones::new(ONE, ZERO, ZERO, I);
    rot * retarder * rot.transpose()
}

/// Half-wave plate with its fast axis at `angle` radians from H.
pub fn half_wave_plate(site: Site, angle: f64) -> ModeUnitary {
    polarization_element(site, &half_wave_plate_jones(angle)).expect("HWP is unitary")
}

/// Quarter-wave plate with its fast axis at `angle` radians from H.
pub fn quarter_wave_plate(site: Site, angle: f64) -> ModeUnitary {
    polarization_element(site, &quarter_wave_plate_jones(angle)).expect("QWP is unitary")
}

/// Tunable spatial splitter: a photon at `source` leaves as
/// `cos θ |target_a⟩ + sin θ |target_b⟩` with its polarization unchanged.
///
/// This is the HWP + PBS + HWP(45°) group in front of each source collapsed
/// into one element. Photons already sitting at `target_a` or `target_b` are
/// mapped elsewhere so the element stays unitary; the preparation circuits
/// never populate them.
pub fn mode_splitter(source: Site, target_a: Site, target_b: Site, theta: f64) -> Result<ModeUnitary> {
    if source == target_a || source == target_b || target_a == target_b {
        return Err(Error::InvalidElement(format!(
            "mode splitter needs three distinct sites, got {source}, {target_a}, {target_b}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let (s, c) = (Complex64::new(s, 0.0), Complex64::new(c, 0.0));
    // columns: source -> (0, c, s), target_a -> (0, -s, c), target_b -> source
    let block = |pol| -> Result<ModeUnitary> {
        ModeUnitary::new(
            vec![
                ModeLabel::at(source, pol),
                ModeLabel::at(target_a, pol),
                ModeLabel::at(target_b, pol),
            ],
            DMatrix::from_row_slice(3, 3, &[ZERO, ZERO, ONE, c, -s, ZERO, s, c, ZERO]),
        )
    };
    block(Polarization::H)?.direct_sum(&block(Polarization::V)?)
}

/// Polarizing beam splitter: H at `site_in` goes to `site_tx`, V to
/// `site_rx`, both without phase.
pub fn pbs(site_in: Site, site_tx: Site, site_rx: Site) -> Result<ModeUnitary> {
    if site_in == site_tx || site_in == site_rx || site_tx == site_rx {
        return Err(Error::InvalidElement(format!(
            "PBS needs three distinct sites, got {site_in}, {site_tx}, {site_rx}"
        )));
    }
    let swap = [[ZERO, ONE], [ONE, ZERO]];
    let h = two_mode(
        ModeLabel::at(site_in, Polarization::H),
        ModeLabel::at(site_tx, Polarization::H),
        swap,
    )?;
    let v = two_mode(
        ModeLabel::at(site_in, Polarization::V),
        ModeLabel::at(site_rx, Polarization::V),
        swap,
    )?;
    h.direct_sum(&v)
}

/// Lossless exchange of two sites for both polarizations. Beam displacers
/// that only recombine beams are modeled this way.
pub fn swap_sites(a: Site, b: Site) -> Result<ModeUnitary> {
    if a == b {
        return Err(Error::DuplicateMode(ModeLabel::at(a, Polarization::H)));
    }
    let swap = [[ZERO, ONE], [ONE, ZERO]];
    let h = two_mode(ModeLabel::at(a, Polarization::H), ModeLabel::at(b, Polarization::H), swap)?;
    let v = two_mode(ModeLabel::at(a, Polarization::V), ModeLabel::at(b, Polarization::V), swap)?;
    h.direct_sum(&v)
}

/// An ordered train of elements; the first element acts first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    elements: Vec<ModeUnitary>,
    sites: Option<BTreeSet<Site>>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the sites the circuit may touch; `apply` rejects elements
    /// outside this set with [`Error::UnknownMode`].
    pub fn restricted_to<I: IntoIterator<Item = Site>>(mut self, sites: I) -> Self {
        self.sites = Some(sites.into_iter().collect());
        self
    }

    pub fn with(mut self, element: ModeUnitary) -> Self {
        self.elements.push(element);
        self
    }

    pub fn push(&mut self, element: ModeUnitary) {
        self.elements.push(element);
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Circuit {
        let sites = match (&self.sites, &other.sites) {
            (Some(a), Some(b)) => Some(a.union(b).copied().collect()),
            _ => None,
        };
        Circuit {
            elements: self.elements.iter().chain(&other.elements).cloned().collect(),
            sites,
        }
    }

    /// The circuit undoing `self`.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            elements: self.elements.iter().rev().map(ModeUnitary::inverse).collect(),
            sites: self.sites.clone(),
        }
    }

    pub fn elements(&self) -> &[ModeUnitary] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn apply(&self, state: &FockState) -> Result<FockState> {
        if let Some(sites) = &self.sites {
            for element in &self.elements {
                if let Some(m) = element.modes.iter().find(|m| !sites.contains(&m.site)) {
                    return Err(Error::UnknownMode(*m));
                }
            }
        }
        Ok(self
            .elements
            .iter()
            .fold(state.clone(), |s, element| element.apply(&s)))
    }
}

/// Runs `circuit` on `state`.
pub fn apply(circuit: &Circuit, state: &FockState) -> Result<FockState> {
    circuit.apply(state)
}

/// Single-photon output amplitudes of `element` for a photon entering `mode`.
pub fn single_photon_response(element: &ModeUnitary, mode: ModeLabel) -> FockState {
    element.apply(&FockState::vacuum().create(mode))
}

/// Keeps the terms of `state` with no photon at `site`.
pub fn discard_site(state: &FockState, site: Site) -> FockState {
    state.filter(|p: &OccupationPattern| p.site_count(site) == 0)
}

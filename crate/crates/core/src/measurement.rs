//! Node-M measurement chain and heralding of the R–L state.
//!
//! The two photons at M meet a beam splitter whose second output is blocked,
//! then a second beam splitter that sends them to arms `M1` and `M2`. Only
//! coincidences with one photon per arm are kept; each arm is then projected
//! on a polarization basis.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{fidelity, pauli_x as sigma_x, pauli_y as sigma_y, pauli_z as sigma_z, reduce_rl, BellState, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::fock::{FockState, OccupationPattern, Site};
use crate::optics::{beam_splitter_sites, polarization_element, swap_sites, Circuit, Jones};
use crate::slocc::NodePattern;

/// Below this joint probability an outcome heralds nothing.
pub const HERALD_THRESHOLD: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[serde(rename = "hv")]
    HV,
    Circular,
    Diagonal,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::HV, Basis::Circular, Basis::Diagonal];

    pub fn projectors(self) -> [PolProjector; 2] {
        match self {
            Basis::HV => [PolProjector::H, PolProjector::V],
            Basis::Circular => [PolProjector::R, PolProjector::L],
            Basis::Diagonal => [PolProjector::D, PolProjector::C],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::HV => "hv",
            Basis::Circular => "circular",
            Basis::Diagonal => "diagonal",
        }
    }

    /// Unitary taking the basis vectors to `|H⟩`, `|V⟩`: row `k` is `⟨e_k|`.
    fn analyzer(self) -> Jones {
        let [e0, e1] = self.projectors().map(|p| p.vector());
        Matrix2::new(e0[0].conj(), e0[1].conj(), e1[0].conj(), e1[1].conj())
    }

    /// The outcome pair that singles out one M-pair state, with the R–L Bell
    /// state it heralds.
    pub fn discriminated_target(self) -> BellState {
        match self {
            Basis::HV => BellState::PsiPlus,
            Basis::Circular => BellState::PhiPlus,
            Basis::Diagonal => BellState::PhiMinus,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hv" => Ok(Basis::HV),
            "circular" | "rl" => Ok(Basis::Circular),
            "diagonal" | "dc" => Ok(Basis::Diagonal),
            _ => Err(Error::Parse(format!("unknown basis `{s}`"))),
        }
    }
}

/// Single-qubit polarization projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolProjector {
    H,
    V,
    /// `(|H⟩+|V⟩)/√2`
    #[serde(rename = "d")]
    D,
    /// `(|H⟩-|V⟩)/√2`
    #[serde(rename = "c")]
    C,
    /// `(|H⟩+i|V⟩)/√2`
    #[serde(rename = "r")]
    R,
    /// `(|H⟩-i|V⟩)/√2`
    #[serde(rename = "l")]
    L,
}

impl PolProjector {
    pub const ALL: [PolProjector; 6] = [
        PolProjector::H,
        PolProjector::V,
        PolProjector::D,
        PolProjector::C,
        PolProjector::R,
        PolProjector::L,
    ];

    pub fn vector(self) -> Vector2<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let h = FRAC_1_SQRT_2;
        match self {
            PolProjector::H => Vector2::new(one, zero),
            PolProjector::V => Vector2::new(zero, one),
            PolProjector::D => Vector2::new(Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
            PolProjector::C => Vector2::new(Complex64::new(h, 0.0), Complex64::new(-h, 0.0)),
            PolProjector::R => Vector2::new(Complex64::new(h, 0.0), Complex64::new(0.0, h)),
            PolProjector::L => Vector2::new(Complex64::new(h, 0.0), Complex64::new(0.0, -h)),
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            PolProjector::H | PolProjector::V => Basis::HV,
            PolProjector::R | PolProjector::L => Basis::Circular,
            PolProjector::D | PolProjector::C => Basis::Diagonal,
        }
    }

    /// Position within its basis.
    pub fn index(self) -> usize {
        match self {
            PolProjector::H | PolProjector::R | PolProjector::D => 0,
            _ => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolProjector::H => "H",
            PolProjector::V => "V",
            PolProjector::D => "d",
            PolProjector::C => "c",
            PolProjector::R => "r",
            PolProjector::L => "l",
        }
    }

    pub fn projector(self) -> Matrix2<Complex64> {
        let v = self.vector();
        v * v.adjoint()
    }
}

impl fmt::Display for PolProjector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolProjector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolProjector::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown projector `{s}`")))
    }
}

/// Blocked beam splitter, arm-splitting beam splitter, then relabeling of
/// the kept output as arm `M1`.
pub fn split_circuit() -> Circuit {
    Circuit::new()
        .with(beam_splitter_sites(Site::M, Site::Blocked).expect("distinct sites"))
        .with(beam_splitter_sites(Site::M, Site::M2).expect("distinct sites"))
        .with(swap_sites(Site::M, Site::M1).expect("distinct sites"))
}

/// Sends the two M photons of a state supported on `{R:1, M:2, L:1}` through
/// [`split_circuit`].
pub fn split_node_m(state: &FockState) -> Result<FockState> {
    let expected = BTreeMap::from([(Site::R, 1), (Site::M, 2), (Site::L, 1)]);
    if state.is_empty() {
        return Err(Error::UnsupportedSupport("empty state".into()));
    }
    if let Some((p, _)) = state.terms().find(|(p, _)| p.node_counts() != expected) {
        return Err(Error::UnsupportedSupport(format!(
            "pattern `{p}` is not of the form {{R:1, M:2, L:1}}"
        )));
    }
    split_circuit().apply(state)
}

/// One photon in each arm and none in the blocked port.
pub fn coincidence_pattern() -> NodePattern {
    NodePattern::new(
        BTreeMap::from([(Site::M1, 1), (Site::M2, 1)]),
        [Site::Blocked].into_iter().collect(),
    )
    .expect("valid pattern")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldRecord {
    pub m_basis: [Basis; 2],
    pub m_outcome: [PolProjector; 2],
    /// Conditional R–L state; absent when the outcome never occurs.
    pub rl_state: Option<TwoQubitDensity>,
    pub joint_probability: f64,
    /// The Bell state this outcome is designed to herald, if any.
    pub target: Option<BellState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldSet {
    pub records: Vec<HeraldRecord>,
    /// Two photons in one arm or any photon in the blocked port.
    pub non_coincidence: f64,
}

impl HeraldSet {
    pub fn total_probability(&self) -> f64 {
        self.records.iter().map(|r| r.joint_probability).sum::<f64>() + self.non_coincidence
    }

    pub fn record(&self, outcome: [PolProjector; 2]) -> Option<&HeraldRecord> {
        self.records.iter().find(|r| r.m_outcome == outcome)
    }
}

fn heralded_target(arm1: PolProjector, arm2: PolProjector) -> Option<BellState> {
    (arm1.basis() == arm2.basis() && arm1.index() != arm2.index()).then(|| arm1.basis().discriminated_target())
}

/// Projects arm `M1` on `basis1` and arm `M2` on `basis2` and returns the
/// conditional R–L state for every outcome pair. Probabilities are relative
/// to the norm of `state`.
pub fn lpsm_herald(state: &FockState, basis1: Basis, basis2: Basis) -> Result<HeraldSet> {
    let total = state.norm_sqr();
    if total <= HERALD_THRESHOLD {
        return Err(Error::ZeroNorm { norm: total.sqrt() });
    }
    let pattern = coincidence_pattern();
    let coincident = state.filter(|p| pattern.matches(p));
    let non_coincidence = (1.0 - coincident.norm_sqr() / total).max(0.0);
    let analyzed = Circuit::new()
        .with(polarization_element(Site::M1, &basis1.analyzer())?)
        .with(polarization_element(Site::M2, &basis2.analyzer())?)
        .apply(&coincident)?;

    let mut records = Vec::with_capacity(4);
    for arm1 in basis1.projectors() {
        for arm2 in basis2.projectors() {
            let selected = analyzed.filter(|p| arm_index(p, Site::M1) == arm1.index() && arm_index(p, Site::M2) == arm2.index());
            let joint_probability = selected.norm_sqr() / total;
            let rl_state = if joint_probability > HERALD_THRESHOLD {
                Some(reduce_rl(&selected)?)
            } else {
                None
            };
            records.push(HeraldRecord {
                m_basis: [basis1, basis2],
                m_outcome: [arm1, arm2],
                rl_state,
                joint_probability,
                target: heralded_target(arm1, arm2),
            });
        }
    }
    Ok(HeraldSet {
        records,
        non_coincidence,
    })
}

fn arm_index(pattern: &OccupationPattern, site: Site) -> usize {
    pattern.photons_at(site).first().map(|m| m.pol.index()).unwrap_or(usize::MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    R,
    L,
}

fn on_node(node: Node, op: &Matrix2<Complex64>) -> (Matrix2<Complex64>, Matrix2<Complex64>) {
    match node {
        Node::R => (*op, Matrix2::identity()),
        Node::L => (Matrix2::identity(), *op),
    }
}

/// Conjugation by σ_z on one node.
pub fn pauli_z(rl: &TwoQubitDensity, node: Node) -> TwoQubitDensity {
    let (r, l) = on_node(node, &sigma_z());
    rl.conjugate_local(&r, &l)
}

/// Conjugation by σ_x on one node.
pub fn pauli_x(rl: &TwoQubitDensity, node: Node) -> TwoQubitDensity {
    let (r, l) = on_node(node, &sigma_x());
    rl.conjugate_local(&r, &l)
}

/// Local Pauli correction on node R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalPauli {
    I,
    X,
    Y,
    Z,
}

impl LocalPauli {
    pub const ALL: [LocalPauli; 4] = [LocalPauli::I, LocalPauli::X, LocalPauli::Y, LocalPauli::Z];

    pub fn matrix(self) -> Matrix2<Complex64> {
        match self {
            LocalPauli::I => Matrix2::identity(),
            LocalPauli::X => sigma_x(),
            LocalPauli::Y => sigma_y(),
            LocalPauli::Z => sigma_z(),
        }
    }
}

/// The Pauli on node R that maps `from` onto `to`, if one exists.
pub fn pauli_equivalence(from: BellState, to: BellState) -> Option<LocalPauli> {
    let rho = from.density();
    LocalPauli::ALL.into_iter().find(|p| {
        let mapped = rho.conjugate_local(&p.matrix(), &Matrix2::identity());
        (fidelity(&mapped, &to.ket()) - 1.0).abs() < 1e-9
    })
}

/// True when every state of each family is Pauli-equivalent to some state of
/// the other.
pub fn families_match(lhs: &[BellState], rhs: &[BellState]) -> bool {
    let covered = |a: &[BellState], b: &[BellState]| a.iter().all(|x| b.iter().any(|y| pauli_equivalence(*x, *y).is_some()));
    !lhs.is_empty() && !rhs.is_empty() && covered(lhs, rhs) && covered(rhs, lhs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapOutcome {
    pub bsm_outcome: BellState,
    pub probability: f64,
    pub heralded: TwoQubitDensity,
    pub target: BellState,
    pub fidelity: f64,
}

/// Standard entanglement swapping on qubits `A–M1` and `M2–B` with a Bell
/// measurement on `M1, M2`.
pub fn swap_baseline(bell_in_1: BellState, bell_in_2: BellState) -> Vec<SwapOutcome> {
    let a = bell_in_1.ket();
    let b = bell_in_2.ket();
    // qubit order A, M1, M2, B; index = 8 A + 4 M1 + 2 M2 + B
    let amplitude = |qa: usize, m1: usize, m2: usize, qb: usize| a[2 * qa + m1] * b[2 * m2 + qb];
    BellState::ALL
        .into_iter()
        .map(|k| {
            let kk = k.ket();
            let mut heralded = Vector4::<Complex64>::zeros();
            for qa in 0..2 {
                for qb in 0..2 {
                    heralded[2 * qa + qb] = (0..2)
                        .flat_map(|m1| (0..2).map(move |m2| (m1, m2)))
                        .map(|(m1, m2)| kk[2 * m1 + m2].conj() * amplitude(qa, m1, m2, qb))
                        .sum();
                }
            }
            let probability = heralded.norm_squared();
            let ket = heralded / Complex64::new(probability.sqrt(), 0.0);
            let rho = TwoQubitDensity::pure(&ket);
            let (target, fid) = BellState::ALL
                .into_iter()
                .map(|t| (t, fidelity(&rho, &t.ket())))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("four Bell states");
            SwapOutcome {
                bsm_outcome: k,
                probability,
                heralded: rho,
                target,
                fidelity: fid,
            }
        })
        .collect()
}

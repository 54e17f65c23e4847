//! Source preparation, node-count post-selection and the Bell structure of
//! the post-selected four-photon state.
//!
//! Source I sends two photons (H and V) into `cos θ |R⟩ + sin θ |M⟩`; Source II
//! sends two photons (H and V) into `cos φ |M⟩ + sin φ |L⟩`. The four-photon
//! state is the product of the four creation operators of these overlapping
//! spatial modes, normalized afterwards. Counting one photon at R, two at M
//! and one at L then leaves R and L entangled with the polarization pair at M.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::BellState;
use crate::error::{Error, Result};
use crate::fock::{FockState, ModeLabel, OccupationPattern, Polarization, Site};
use crate::optics::{beam_splitter_sites, mode_splitter, Circuit};

/// Number of orthogonal temporal modes needed for four photons.
pub const TEMPORAL_MODES: usize = 4;

/// Splitter angles of the two sources, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub theta: f64,
    pub phi: f64,
}

/// Spatial amplitudes: `α = aR + bM`, `α′ = a′R + b′M`, `β = cM + dL`,
/// `β′ = c′M + d′L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceAmplitudes {
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    pub c: f64,
    pub d: f64,
    pub c_prime: f64,
    pub d_prime: f64,
}

impl SourceConfig {
    pub fn new(theta: f64, phi: f64) -> Self {
        SourceConfig { theta, phi }
    }

    /// θ = φ = π/4: every amplitude equals 1/√2.
    pub fn maximal_overlap() -> Self {
        SourceConfig::new(FRAC_PI_4, FRAC_PI_4)
    }

    pub fn amplitudes(&self) -> SourceAmplitudes {
        let (sin_t, cos_t) = self.theta.sin_cos();
        let (sin_p, cos_p) = self.phi.sin_cos();
        SourceAmplitudes {
            a: cos_t,
            b: sin_t,
            a_prime: cos_t,
            b_prime: sin_t,
            c: cos_p,
            d: sin_p,
            c_prime: cos_p,
            d_prime: sin_p,
        }
    }
}

/// Wavepacket overlaps between the four photons.
///
/// `pair_overlap_1` is the overlap of the two Source-I photons,
/// `pair_overlap_2` that of the two Source-II photons, and `cross_overlap`
/// the overlap of any Source-I photon with any Source-II photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityConfig {
    pub pair_overlap_1: f64,
    pub pair_overlap_2: f64,
    pub cross_overlap: f64,
}

impl Default for DistinguishabilityConfig {
    fn default() -> Self {
        Self::indistinguishable()
    }
}

impl DistinguishabilityConfig {
    pub fn new(pair_overlap_1: f64, pair_overlap_2: f64, cross_overlap: f64) -> Result<Self> {
        let dist = DistinguishabilityConfig {
            pair_overlap_1,
            pair_overlap_2,
            cross_overlap,
        };
        dist.temporal_vectors()?;
        Ok(dist)
    }

    pub fn indistinguishable() -> Self {
        DistinguishabilityConfig {
            pair_overlap_1: 1.0,
            pair_overlap_2: 1.0,
            cross_overlap: 1.0,
        }
    }

    /// Overlaps that reproduce the given two-photon HOM dip visibilities.
    pub fn from_visibilities(source_1: f64, source_2: f64, cross: f64) -> Result<Self> {
        Self::new(
            overlap_for_visibility(source_1)?,
            overlap_for_visibility(source_2)?,
            overlap_for_visibility(cross)?,
        )
    }

    /// Gram matrix of the photon wavepackets in the order
    /// (Source-I H, Source-I V, Source-II H, Source-II V).
    pub fn gram(&self) -> [[f64; TEMPORAL_MODES]; TEMPORAL_MODES] {
        let (p1, p2, x) = (self.pair_overlap_1, self.pair_overlap_2, self.cross_overlap);
        [
            [1.0, p1, x, x],
            [p1, 1.0, x, x],
            [x, x, 1.0, p2],
            [x, x, p2, 1.0],
        ]
    }

    /// Temporal wavepacket of each photon expanded over orthogonal temporal
    /// modes, from a Cholesky factor of the Gram matrix. The first photon sits
    /// in the reference mode 0.
    pub fn temporal_vectors(&self) -> Result<[[f64; TEMPORAL_MODES]; TEMPORAL_MODES]> {
        for (name, o) in [
            ("pair_overlap_1", self.pair_overlap_1),
            ("pair_overlap_2", self.pair_overlap_2),
            ("cross_overlap", self.cross_overlap),
        ] {
            if !(0.0..=1.0).contains(&o) {
                return Err(Error::InvalidDistinguishability(format!("{name} = {o} is outside [0, 1]")));
            }
        }
        let g = self.gram();
        let mut l = [[0.0; TEMPORAL_MODES]; TEMPORAL_MODES];
        const PIVOT: f64 = 1e-12;
        for j in 0..TEMPORAL_MODES {
            let d = g[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if d < -1e-10 {
                return Err(Error::InvalidDistinguishability(format!(
                    "overlaps {self:?} do not form a valid Gram matrix"
                )));
            }
            let pivot = d.max(0.0).sqrt();
            l[j][j] = pivot;
            for i in j + 1..TEMPORAL_MODES {
                let off = g[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if pivot <= PIVOT {
                    if off.abs() > 1e-9 {
                        return Err(Error::InvalidDistinguishability(format!(
                            "overlaps {self:?} do not form a valid Gram matrix"
                        )));
                    }
                    l[i][j] = 0.0;
                } else {
                    l[i][j] = off / pivot;
                }
            }
        }
        Ok(l)
    }
}

/// Gaussian wavepacket overlap at relative delay `delay` for width `sigma`.
pub fn delay_overlap(delay: f64, sigma: f64) -> f64 {
    (-delay * delay / (2.0 * sigma * sigma)).exp()
}

/// Visibility `(C_max - C_min)/(C_max + C_min)` of a two-photon dip whose
/// deepest point has wavepacket overlap `overlap`.
pub fn hom_visibility(overlap: f64) -> f64 {
    let o2 = overlap * overlap;
    o2 / (2.0 - o2)
}

/// Inverse of [`hom_visibility`].
pub fn overlap_for_visibility(visibility: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidDistinguishability(format!(
            "visibility {visibility} is outside [0, 1]"
        )));
    }
    Ok((2.0 * visibility / (1.0 + visibility)).sqrt())
}

struct Photon {
    sites: [(Site, f64); 2],
    pol: Polarization,
}

fn photons(sources: &SourceConfig) -> [Photon; 4] {
    let amp = sources.amplitudes();
    [
        Photon { sites: [(Site::R, amp.a), (Site::M, amp.b)], pol: Polarization::H },
        Photon { sites: [(Site::R, amp.a_prime), (Site::M, amp.b_prime)], pol: Polarization::V },
        Photon { sites: [(Site::M, amp.c), (Site::L, amp.d)], pol: Polarization::H },
        Photon { sites: [(Site::M, amp.c_prime), (Site::L, amp.d_prime)], pol: Polarization::V },
    ]
}

fn create_with_wavepacket(
    state: &FockState,
    sites: &[(Site, f64)],
    pol: Polarization,
    wavepacket: &[f64; TEMPORAL_MODES],
) -> FockState {
    let components: Vec<(ModeLabel, Complex64)> = sites
        .iter()
        .flat_map(|&(site, amp)| {
            wavepacket.iter().enumerate().map(move |(t, &w)| {
                (ModeLabel::new(site, pol, t as u8), Complex64::new(amp * w, 0.0))
            })
        })
        .filter(|(_, a)| a.norm() > 0.0)
        .collect();
    state.create_superposed(&components)
}

/// The normalized four-photon state `|α H, α′ V, β H, β′ V⟩`.
pub fn prepare_initial(sources: &SourceConfig, dist: &DistinguishabilityConfig) -> Result<FockState> {
    let wavepackets = dist.temporal_vectors()?;
    let raw = photons(sources)
        .iter()
        .zip(&wavepackets)
        .fold(FockState::vacuum(), |s, (p, w)| create_with_wavepacket(&s, &p.sites, p.pol, w));
    Ok(raw.normalize()?.0)
}

/// The four source photons before any routing: Source I emits H and V at
/// `S1`, Source II at `S2`.
pub fn source_photons(dist: &DistinguishabilityConfig) -> Result<FockState> {
    let w = dist.temporal_vectors()?;
    let s = FockState::vacuum();
    let s = create_with_wavepacket(&s, &[(Site::S1, 1.0)], Polarization::H, &w[0]);
    let s = create_with_wavepacket(&s, &[(Site::S1, 1.0)], Polarization::V, &w[1]);
    let s = create_with_wavepacket(&s, &[(Site::S2, 1.0)], Polarization::H, &w[2]);
    Ok(create_with_wavepacket(&s, &[(Site::S2, 1.0)], Polarization::V, &w[3]))
}

/// Unitary realization of the source routing: Source I is split between R
/// and M, Source II between the second input port of the node-M beam
/// splitter and L, and the two M-bound beams are combined on that beam
/// splitter. Its other output is `BLOCKED`.
pub fn preparation_circuit(sources: &SourceConfig) -> Result<Circuit> {
    Ok(Circuit::new()
        .restricted_to([Site::S1, Site::S2, Site::R, Site::M, Site::L, Site::Blocked])
        .with(mode_splitter(Site::S1, Site::R, Site::M, sources.theta)?)
        .with(mode_splitter(Site::S2, Site::Blocked, Site::L, sources.phi)?)
        .with(beam_splitter_sites(Site::M, Site::Blocked)?))
}

/// Per-node photon-count requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePattern {
    required: BTreeMap<Site, u32>,
    forbidden: BTreeSet<Site>,
}

impl NodePattern {
    pub fn new(required: BTreeMap<Site, u32>, forbidden: BTreeSet<Site>) -> Result<Self> {
        if required.is_empty() {
            return Err(Error::Config("node pattern needs at least one required site".into()));
        }
        if let Some(site) = required.keys().find(|s| forbidden.contains(s)) {
            return Err(Error::Config(format!("site {site} is both required and forbidden")));
        }
        Ok(NodePattern { required, forbidden })
    }

    /// One photon at R, two at M, one at L, none in the blocked port.
    pub fn heralding() -> Self {
        NodePattern {
            required: BTreeMap::from([(Site::R, 1), (Site::M, 2), (Site::L, 1)]),
            forbidden: BTreeSet::from([Site::Blocked]),
        }
    }

    pub fn required(&self) -> &BTreeMap<Site, u32> {
        &self.required
    }

    pub fn forbidden(&self) -> &BTreeSet<Site> {
        &self.forbidden
    }

    /// Required sites must hold exactly their count and forbidden sites must
    /// be empty; other sites are unconstrained.
    pub fn matches(&self, pattern: &OccupationPattern) -> bool {
        self.required.iter().all(|(site, &n)| pattern.site_count(*site) == n)
            && self.forbidden.iter().all(|site| pattern.site_count(*site) == 0)
    }

    /// The pattern with R and L exchanged.
    pub fn mirrored(&self) -> Self {
        NodePattern {
            required: self.required.iter().map(|(s, n)| (s.mirrored(), *n)).collect(),
            forbidden: self.forbidden.iter().map(|s| s.mirrored()).collect(),
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (site, n) in &self.required {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{site}:{n}")?;
        }
        for site in &self.forbidden {
            write!(f, ", {site}:0")?;
        }
        f.write_str("}")
    }
}

/// Probability that `state` satisfies `pattern` (zero when nothing matches).
pub fn pattern_probability(state: &FockState, pattern: &NodePattern) -> f64 {
    let total = state.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    state.filter(|p| pattern.matches(p)).norm_sqr() / total
}

/// Projects onto the node-count pattern and renormalizes. Returns the
/// conditional state and the success probability.
pub fn postselect(state: &FockState, pattern: &NodePattern) -> Result<(FockState, f64)> {
    let kept = state.filter(|p| pattern.matches(p));
    let probability = kept.norm_sqr() / state.norm_sqr();
    if kept.is_empty() || kept.norm() <= crate::fock::AMPLITUDE_EPSILON {
        return Err(Error::EmptyPostselection {
            pattern: pattern.to_string(),
        });
    }
    let (conditional, _) = kept.normalize()?;
    Ok((conditional, probability))
}

/// Two-photon polarization states of the pair sharing node M.
///
/// Both photons occupy the same spatial and temporal mode, so the
/// antisymmetric singlet does not exist and only three states remain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MPairState {
    /// `|M H, M V⟩`
    #[serde(rename = "psi")]
    Psi,
    /// `(|M V, M V⟩ + |M H, M H⟩)/√2`
    #[serde(rename = "phi+")]
    PhiPlus,
    /// `(|M V, M V⟩ - |M H, M H⟩)/√2`
    #[serde(rename = "phi-")]
    PhiMinus,
}

impl MPairState {
    pub const ALL: [MPairState; 3] = [MPairState::Psi, MPairState::PhiPlus, MPairState::PhiMinus];

    /// Fock terms of the pair at node M (temporal mode 0).
    pub fn terms(self) -> Vec<(OccupationPattern, Complex64)> {
        let mh = ModeLabel::at(Site::M, Polarization::H);
        let mv = ModeLabel::at(Site::M, Polarization::V);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            MPairState::Psi => vec![(
                OccupationPattern::from_counts([(mh, 1), (mv, 1)]),
                Complex64::new(1.0, 0.0),
            )],
            MPairState::PhiPlus => vec![
                (OccupationPattern::from_counts([(mv, 2)]), h),
                (OccupationPattern::from_counts([(mh, 2)]), h),
            ],
            MPairState::PhiMinus => vec![
                (OccupationPattern::from_counts([(mv, 2)]), h),
                (OccupationPattern::from_counts([(mh, 2)]), -h),
            ],
        }
    }

    /// The R–L Bell state this M-pair state is correlated with in the
    /// post-selected state.
    pub fn partner(self) -> BellState {
        match self {
            MPairState::Psi => BellState::PsiPlus,
            MPairState::PhiPlus => BellState::PhiPlus,
            MPairState::PhiMinus => BellState::PhiMinus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MPairState::Psi => "psi",
            MPairState::PhiPlus => "phi+",
            MPairState::PhiMinus => "phi-",
        }
    }
}

/// `|m⟩_M ⊗ |b⟩_RL` as a four-photon Fock state (temporal mode 0).
pub fn bell_product_state(m: MPairState, rl: BellState) -> FockState {
    let ket = rl.ket();
    let mut terms = Vec::new();
    for (m_pattern, m_amp) in m.terms() {
        for (index, amp) in ket.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            let r = ModeLabel::at(Site::R, Polarization::from_index(index / 2));
            let l = ModeLabel::at(Site::L, Polarization::from_index(index % 2));
            let counts = m_pattern.iter().map(|(m, n)| (*m, *n)).chain([(r, 1), (l, 1)]);
            terms.push((OccupationPattern::from_counts(counts), m_amp * amp));
        }
    }
    FockState::from_terms(4, terms).expect("four photons by construction")
}

/// Expansion over `{M-pair state} ⊗ {R–L Bell state}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellDecomposition {
    pub coefficients: BTreeMap<(MPairState, BellState), Complex64>,
    /// Norm of the part outside the spanned space, including every term in
    /// which the M photons are not both in temporal mode 0.
    pub residual: f64,
}

impl BellDecomposition {
    pub fn coefficient(&self, m: MPairState, rl: BellState) -> Complex64 {
        self.coefficients.get(&(m, rl)).copied().unwrap_or_default()
    }
}

/// Decomposes a state supported on `{R:1, M:2, L:1}`.
pub fn bell_decompose(state: &FockState) -> Result<BellDecomposition> {
    let expected = BTreeMap::from([(Site::R, 1), (Site::M, 2), (Site::L, 1)]);
    if let Some((p, _)) = state.terms().find(|(p, _)| p.node_counts() != expected) {
        return Err(Error::UnsupportedSupport(format!(
            "pattern `{p}` is not of the form {{R:1, M:2, L:1}}"
        )));
    }
    let mut coefficients = BTreeMap::new();
    let mut captured = 0.0;
    for m in MPairState::ALL {
        for rl in BellState::ALL {
            let coeff = bell_product_state(m, rl).inner_product(state);
            captured += coeff.norm_sqr();
            coefficients.insert((m, rl), coeff);
        }
    }
    let residual = (state.norm_sqr() - captured).max(0.0).sqrt();
    Ok(BellDecomposition {
        coefficients,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub theta: f64,
    pub phi: f64,
    pub probability: f64,
}

/// Success probability of `pattern` over the `thetas × phis` grid, in
/// row-major order (θ outer).
pub fn success_probability_scan(
    thetas: &[f64],
    phis: &[f64],
    pattern: &NodePattern,
    dist: &DistinguishabilityConfig,
) -> Result<Vec<ScanPoint>> {
    dist.temporal_vectors()?;
    let grid: Vec<(f64, f64)> = thetas
        .iter()
        .flat_map(|&t| phis.iter().map(move |&p| (t, p)))
        .collect();
    grid.par_iter()
        .map(|&(theta, phi)| {
            let state = prepare_initial(&SourceConfig::new(theta, phi), dist)?;
            Ok(ScanPoint {
                theta,
                phi,
                probability: pattern_probability(&state, pattern),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn ideal() -> FockState {
        prepare_initial(&SourceConfig::maximal_overlap(), &DistinguishabilityConfig::indistinguishable()).unwrap()
    }

    /// Closed form of the heralding probability for indistinguishable photons:
    /// 6 (cθ sθ cφ sφ)² / (1 + sθ² cφ²)².
    fn heralding_probability_closed_form(theta: f64, phi: f64) -> f64 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        6.0 * (ct * st * cp * sp).powi(2) / (1.0 + st * st * cp * cp).powi(2)
    }

    #[test]
    fn heralding_probability_is_six_over_twenty_five() {
        let (_, p) = postselect(&ideal(), &NodePattern::heralding()).unwrap();
        assert_abs_diff_eq!(p, 6.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn raw_postselected_norm_relative_to_normalized_input() {
        let s = ideal();
        let raw = s.filter(|p| NodePattern::heralding().matches(p));
        assert_abs_diff_eq!(raw.norm_sqr(), 6.0 / 25.0, epsilon = 1e-12);
        for (p, _) in raw.terms() {
            assert_eq!(p.node_counts(), BTreeMap::from([(Site::R, 1), (Site::M, 2), (Site::L, 1)]));
        }
    }

    #[test]
    fn postselection_is_idempotent() {
        let (conditional, _) = postselect(&ideal(), &NodePattern::heralding()).unwrap();
        let (_, p) = postselect(&conditional, &NodePattern::heralding()).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unreachable_pattern_is_empty() {
        let s = prepare_initial(&SourceConfig::new(0.0, FRAC_PI_2), &DistinguishabilityConfig::indistinguishable()).unwrap();
        assert!(matches!(
            postselect(&s, &NodePattern::heralding()),
            Err(Error::EmptyPostselection { .. })
        ));
    }

    #[test]
    fn theta_zero_routes_source_one_to_r() {
        let s = prepare_initial(&SourceConfig::new(0.0, FRAC_PI_4), &DistinguishabilityConfig::indistinguishable()).unwrap();
        for (p, _) in s.terms() {
            assert_eq!(p.site_count(Site::R), 2);
        }
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_overlaps_give_orthogonal_temporal_modes() {
        let dist = DistinguishabilityConfig::new(0.0, 0.0, 0.0).unwrap();
        let w = dist.temporal_vectors().unwrap();
        for (i, row) in w.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        let s = prepare_initial(&SourceConfig::maximal_overlap(), &dist).unwrap();
        // product of four orthogonal photons: 16 terms, each amplitude 1/4
        assert_eq!(s.len(), 16);
        for (p, a) in s.terms() {
            assert_eq!(p.iter().count(), 4);
            assert_abs_diff_eq!(a.re, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_overlap_second_photon_wavepacket() {
        let dist = DistinguishabilityConfig::new(0.6, 0.6, 0.0).unwrap();
        let w = dist.temporal_vectors().unwrap();
        assert_abs_diff_eq!(w[1][0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1][1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn gram_matrix_is_reproduced() {
        let dist = DistinguishabilityConfig::new(0.97, 0.95, 0.9).unwrap();
        let w = dist.temporal_vectors().unwrap();
        let g = dist.gram();
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..4).map(|k| w[i][k] * w[j][k]).sum();
                assert_abs_diff_eq!(dot, g[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn inconsistent_overlaps_are_rejected() {
        assert!(DistinguishabilityConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(DistinguishabilityConfig::new(1.2, 1.0, 1.0).is_err());
        assert!(DistinguishabilityConfig::new(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn visibility_inversion_round_trips() {
        for v in [0.9734, 0.9593, 0.8436, 1.0, 0.0] {
            assert_abs_diff_eq!(hom_visibility(overlap_for_visibility(v).unwrap()), v, epsilon = 1e-14);
        }
        assert!(overlap_for_visibility(1.5).is_err());
    }

    #[test]
    fn decomposition_matches_three_term_structure() {
        let (ps, _) = postselect(&ideal(), &NodePattern::heralding()).unwrap();
        let dec = bell_decompose(&ps).unwrap();
        let third = 1.0 / 3f64.sqrt();
        for m in MPairState::ALL {
            for rl in BellState::ALL {
                let expected = if m.partner() == rl { third } else { 0.0 };
                let coeff = dec.coefficient(m, rl);
                assert_abs_diff_eq!(coeff.re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(coeff.im, 0.0, epsilon = 1e-12);
            }
        }
        assert!(dec.residual < 1e-9);
        let total: f64 = dec.coefficients.values().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn single_product_term_decomposes_to_itself() {
        let s = bell_product_state(MPairState::Psi, BellState::PsiPlus);
        let dec = bell_decompose(&s).unwrap();
        assert_abs_diff_eq!(dec.coefficient(MPairState::Psi, BellState::PsiPlus).re, 1.0, epsilon = 1e-12);
        let others: f64 = dec.coefficients.values().map(|c| c.norm_sqr()).sum::<f64>() - 1.0;
        assert_abs_diff_eq!(others, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decomposition_rejects_other_supports() {
        let s = FockState::vacuum()
            .create(ModeLabel::at(Site::R, Polarization::H))
            .create(ModeLabel::at(Site::R, Polarization::V))
            .create(ModeLabel::at(Site::M, Polarization::V))
            .create(ModeLabel::at(Site::L, Polarization::H));
        assert!(matches!(bell_decompose(&s), Err(Error::UnsupportedSupport(_))));
    }

    #[test]
    fn distinguishable_photons_leave_no_coherent_bell_structure() {
        // Brute-force oracle: with Source I in temporal mode 0 and Source II in
        // mode 1, the post-selected state is
        // (|R_H, M_V0> + |R_V, M_H0>)(|M_H1, L_V> + |M_V1, L_H>)/2, so tracing
        // out M leaves R and L maximally mixed and uncorrelated.
        let dist = DistinguishabilityConfig::new(1.0, 1.0, 0.0).unwrap();
        let s = prepare_initial(&SourceConfig::maximal_overlap(), &dist).unwrap();
        let (ps, p) = postselect(&s, &NodePattern::heralding()).unwrap();
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);

        let dec = bell_decompose(&ps).unwrap();
        assert!(dec.coefficients.values().all(|c| c.norm() < 1e-12));
        assert_abs_diff_eq!(dec.residual, 1.0, epsilon = 1e-12);

        let rho = crate::entanglement::reduce_rl(&ps).unwrap();
        for (i, a) in BellState::ALL.iter().enumerate() {
            for (j, b) in BellState::ALL.iter().enumerate() {
                let elem = (a.ket().adjoint() * rho.matrix() * b.ket())[(0, 0)];
                let expected = if i == j { 0.25 } else { 0.0 };
                assert_abs_diff_eq!(elem.norm(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn unitary_route_reproduces_conditional_state() {
        for (sources, dist) in [
            (SourceConfig::maximal_overlap(), DistinguishabilityConfig::indistinguishable()),
            (SourceConfig::new(0.5, 1.1), DistinguishabilityConfig::new(0.9, 0.8, 0.7).unwrap()),
        ] {
            let (direct, _) = postselect(&prepare_initial(&sources, &dist).unwrap(), &NodePattern::heralding()).unwrap();
            let routed = preparation_circuit(&sources)
                .unwrap()
                .apply(&source_photons(&dist).unwrap())
                .unwrap();
            let (via_circuit, _) = postselect(&routed, &NodePattern::heralding()).unwrap();
            assert_abs_diff_eq!(via_circuit.inner_product(&direct).norm(), 1.0, epsilon = 1e-10);
        }
        // the shutter discards amplitude: 3/32 at the symmetric point
        let routed = preparation_circuit(&SourceConfig::maximal_overlap())
            .unwrap()
            .apply(&source_photons(&DistinguishabilityConfig::indistinguishable()).unwrap())
            .unwrap();
        let (_, p) = postselect(&routed, &NodePattern::heralding()).unwrap();
        assert_abs_diff_eq!(p, 3.0 / 32.0, epsilon = 1e-12);
    }

    fn all_node_patterns() -> Vec<NodePattern> {
        let sites = [Site::R, Site::M, Site::L, Site::Blocked];
        let mut out = Vec::new();
        for r in 0..=4u32 {
            for m in 0..=4 - r {
                for l in 0..=4 - r - m {
                    let b = 4 - r - m - l;
                    let required = sites.iter().copied().zip([r, m, l, b]).collect();
                    out.push(NodePattern::new(required, BTreeSet::new()).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn node_pattern_probabilities_are_complete() {
        let patterns = all_node_patterns();
        assert_eq!(patterns.len(), 35);
        for (sources, dist) in [
            (SourceConfig::maximal_overlap(), DistinguishabilityConfig::indistinguishable()),
            (SourceConfig::new(0.3, 1.2), DistinguishabilityConfig::new(0.9, 0.95, 0.6).unwrap()),
        ] {
            let s = prepare_initial(&sources, &dist).unwrap();
            let total: f64 = patterns.iter().map(|p| pattern_probability(&s, p)).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn scan_examples() {
        let grid = [0.0, FRAC_PI_4];
        let scan = success_probability_scan(&grid, &grid, &NodePattern::heralding(), &DistinguishabilityConfig::indistinguishable()).unwrap();
        assert_eq!(scan.len(), 4);
        assert_abs_diff_eq!(scan[0].probability, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scan[3].probability, 6.0 / 25.0, epsilon = 1e-12);
    }

    #[test]
    fn scan_matches_closed_form() {
        let thetas: Vec<f64> = (0..=6).map(|i| i as f64 * FRAC_PI_2 / 6.0).collect();
        let scan = success_probability_scan(&thetas, &thetas, &NodePattern::heralding(), &DistinguishabilityConfig::indistinguishable()).unwrap();
        for point in scan {
            assert_abs_diff_eq!(point.probability, heralding_probability_closed_form(point.theta, point.phi), epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scan_has_mirror_symmetry(theta in 0.0f64..FRAC_PI_2, phi in 0.0f64..FRAC_PI_2, idx in 0usize..35) {
            // Exchanging R and L maps Source I at θ onto Source II at π/2 - θ.
            let pattern = all_node_patterns().swap_remove(idx);
            let dist = DistinguishabilityConfig::indistinguishable();
            let a = success_probability_scan(&[theta], &[phi], &pattern, &dist).unwrap()[0].probability;
            let b = success_probability_scan(&[FRAC_PI_2 - phi], &[FRAC_PI_2 - theta], &pattern.mirrored(), &dist).unwrap()[0].probability;
            prop_assert!((a - b).abs() <= 1e-10);
        }

        #[test]
        fn every_heralding_coefficient_is_one_over_root_three_at_full_overlap(_x in 0u8..1) {
            let (ps, _) = postselect(&ideal(), &NodePattern::heralding()).unwrap();
            let dec = bell_decompose(&ps).unwrap();
            for m in MPairState::ALL {
                prop_assert!((dec.coefficient(m, m.partner()).norm() - 1.0 / 3f64.sqrt()).abs() <= 1e-9);
            }
        }
    }
}

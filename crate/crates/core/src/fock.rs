//! Sparse bosonic Fock states over labeled optical modes.
//!
//! A mode is a (site, polarization, temporal index) triple. States are sparse
//! maps from canonical occupation patterns to complex amplitudes, so every
//! four-photon expansion in this crate stays exact and easy to inspect.
//!
//! Patterns are normalized Fock basis states
//! `|n_1, n_2, ...⟩ = Π (a†_k)^{n_k} / sqrt(n_k!) |0⟩`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes with smaller magnitude are pruned after every operation.
pub const AMPLITUDE_EPSILON: f64 = 1e-12;

/// Spatial location of a mode.
///
/// `S1`/`S2` are the output ports of the two photon sources, `M1`/`M2` the two
/// arms behind the splitting beam splitter at node M, and `Blocked` the port
/// closed by the shutter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Site {
    R,
    M,
    L,
    M1,
    M2,
    Blocked,
    S1,
    S2,
}

impl Site {
    pub const ALL: [Site; 8] = [
        Site::R,
        Site::M,
        Site::L,
        Site::M1,
        Site::M2,
        Site::Blocked,
        Site::S1,
        Site::S2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Site::R => "R",
            Site::M => "M",
            Site::L => "L",
            Site::M1 => "M1",
            Site::M2 => "M2",
            Site::Blocked => "BLOCKED",
            Site::S1 => "S1",
            Site::S2 => "S2",
        }
    }

    /// The R ↔ L mirror image; every other site maps to itself.
    pub fn mirrored(self) -> Site {
        match self {
            Site::R => Site::L,
            Site::L => Site::R,
            other => other,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Site::ALL
            .into_iter()
            .find(|site| site.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown site `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    /// Index in the (H, V) Jones basis.
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_index(index: usize) -> Polarization {
        match index {
            0 => Polarization::H,
            1 => Polarization::V,
            _ => panic!("polarization index {index} out of range"),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Polarization::H),
            "V" => Ok(Polarization::V),
            _ => Err(Error::Parse(format!("unknown polarization `{s}`"))),
        }
    }
}

/// A single bosonic mode. Ordering is by site, then polarization, then
/// temporal index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub site: Site,
    pub pol: Polarization,
    /// Orthogonal temporal wavepacket index; 0 is the reference wavepacket.
    pub temporal: u8,
}

impl ModeLabel {
    pub const fn new(site: Site, pol: Polarization, temporal: u8) -> Self {
        ModeLabel {
            site,
            pol,
            temporal,
        }
    }

    /// Mode in the reference temporal wavepacket.
    pub const fn at(site: Site, pol: Polarization) -> Self {
        ModeLabel::new(site, pol, 0)
    }

    pub fn with_site(self, site: Site) -> Self {
        ModeLabel { site, ..self }
    }

    pub fn with_pol(self, pol: Polarization) -> Self {
        ModeLabel { pol, ..self }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.site, self.pol, self.temporal)
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let (Some(site), Some(pol), Some(temporal), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Parse(format!("malformed mode `{s}`")));
        };
        let temporal = temporal
            .parse::<u8>()
            .map_err(|e| Error::Parse(format!("temporal index in `{s}`: {e}")))?;
        Ok(ModeLabel::new(site.parse()?, pol.parse()?, temporal))
    }
}

/// Photon-number occupation of every mode; absent modes hold zero photons.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationPattern {
    occupations: BTreeMap<ModeLabel, u32>,
}

impl OccupationPattern {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a pattern from (mode, count) pairs. Zero counts are dropped and
    /// repeated modes accumulate.
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (ModeLabel, u32)>,
    {
        let mut occupations = BTreeMap::new();
        for (mode, n) in counts {
            if n > 0 {
                *occupations.entry(mode).or_insert(0) += n;
            }
        }
        OccupationPattern { occupations }
    }

    pub fn count(&self, mode: &ModeLabel) -> u32 {
        self.occupations.get(mode).copied().unwrap_or(0)
    }

    pub fn total_photons(&self) -> u32 {
        self.occupations.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeLabel, &u32)> {
        self.occupations.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    /// Photon counts per site, summed over polarization and temporal index.
    pub fn node_counts(&self) -> BTreeMap<Site, u32> {
        let mut counts = BTreeMap::new();
        for (mode, n) in &self.occupations {
            *counts.entry(mode.site).or_insert(0) += n;
        }
        counts
    }

    pub fn site_count(&self, site: Site) -> u32 {
        self.occupations
            .iter()
            .filter(|(m, _)| m.site == site)
            .map(|(_, n)| n)
            .sum()
    }

    /// Modes at `site`, each repeated by its occupation.
    pub fn photons_at(&self, site: Site) -> Vec<ModeLabel> {
        self.occupations
            .iter()
            .filter(|(m, _)| m.site == site)
            .flat_map(|(m, &n)| std::iter::repeat_n(*m, n as usize))
            .collect()
    }

    /// The pattern with every photon at `site` removed.
    pub fn without_site(&self, site: Site) -> Self {
        OccupationPattern {
            occupations: self
                .occupations
                .iter()
                .filter(|(m, _)| m.site != site)
                .map(|(m, n)| (*m, *n))
                .collect(),
        }
    }

    fn incremented(&self, mode: ModeLabel) -> (Self, u32) {
        let mut occupations = self.occupations.clone();
        let slot = occupations.entry(mode).or_insert(0);
        let before = *slot;
        *slot += 1;
        (OccupationPattern { occupations }, before)
    }

    /// Product of `n!` over all modes.
    pub(crate) fn factorial_product(&self) -> f64 {
        self.occupations
            .values()
            .map(|&n| (1..=n).map(f64::from).product::<f64>())
            .product()
    }
}

impl fmt::Display for OccupationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (mode, n) in &self.occupations {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{mode}={n}")?;
        }
        Ok(())
    }
}

impl FromStr for OccupationPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(OccupationPattern::empty());
        }
        let mut counts = Vec::new();
        for token in s.split(',') {
            let (mode, n) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("token `{token}` lacks `=count`")))?;
            let n = n
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("count in `{token}`: {e}")))?;
            if n == 0 {
                return Err(Error::Parse(format!("zero count in `{token}`")));
            }
            counts.push((mode.parse::<ModeLabel>()?, n));
        }
        Ok(OccupationPattern::from_counts(counts))
    }
}

/// Sparse superposition of occupation patterns with a fixed photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    terms: BTreeMap<OccupationPattern, Complex64>,
    photon_number: u32,
}

impl FockState {
    /// The zero-photon state with unit amplitude.
    pub fn vacuum() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(OccupationPattern::empty(), Complex64::new(1.0, 0.0));
        FockState {
            terms,
            photon_number: 0,
        }
    }

    /// The zero vector in the `photon_number` sector.
    pub fn zero(photon_number: u32) -> Self {
        FockState {
            terms: BTreeMap::new(),
            photon_number,
        }
    }

    /// Builds a state from explicit terms. Repeated patterns accumulate.
    pub fn from_terms<I>(photon_number: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OccupationPattern, Complex64)>,
    {
        let mut state = FockState::zero(photon_number);
        for (pattern, amp) in terms {
            if pattern.total_photons() != photon_number {
                return Err(Error::UnsupportedSupport(format!(
                    "pattern `{pattern}` holds {} photons, expected {photon_number}",
                    pattern.total_photons()
                )));
            }
            state.accumulate(pattern, amp);
        }
        state.prune();
        Ok(state)
    }

    pub fn photon_number(&self) -> u32 {
        self.photon_number
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationPattern, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, pattern: &OccupationPattern) -> Complex64 {
        self.terms.get(pattern).copied().unwrap_or_default()
    }

    /// Applies the creation operator `a†_mode`.
    pub fn create(&self, mode: ModeLabel) -> Self {
        self.create_superposed(&[(mode, Complex64::new(1.0, 0.0))])
    }

    /// Applies `Σ_k c_k a†_k`, the creation operator of a superposed mode.
    pub fn create_superposed(&self, components: &[(ModeLabel, Complex64)]) -> Self {
        let mut out = FockState::zero(self.photon_number + 1);
        for (pattern, amp) in &self.terms {
            for &(mode, coeff) in components {
                let (next, before) = pattern.incremented(mode);
                out.accumulate(next, amp * coeff * f64::from(before + 1).sqrt());
            }
        }
        out.prune();
        out
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`. Zero across photon-number
    /// sectors.
    pub fn inner_product(&self, other: &FockState) -> Complex64 {
        if self.photon_number != other.photon_number {
            return Complex64::new(0.0, 0.0);
        }
        let (small, large, flip) = if self.terms.len() <= other.terms.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (pattern, amp) in &small.terms {
            if let Some(b) = large.terms.get(pattern) {
                acc += if flip { b.conj() * amp } else { amp.conj() * b };
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns the unit-norm state and the norm it had before.
    pub fn normalize(&self) -> Result<(FockState, f64)> {
        let norm = self.norm();
        if norm <= AMPLITUDE_EPSILON {
            return Err(Error::ZeroNorm { norm });
        }
        Ok((self.scaled(Complex64::new(1.0 / norm, 0.0)), norm))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = FockState {
            terms: self.terms.iter().map(|(p, a)| (p.clone(), a * factor)).collect(),
            photon_number: self.photon_number,
        };
        out.prune();
        out
    }

    /// `self + other`. Both states must live in the same photon-number sector.
    pub fn superpose(&self, other: &FockState) -> Self {
        assert_eq!(
            self.photon_number, other.photon_number,
            "cannot superpose states with different photon numbers"
        );
        let mut out = self.clone();
        for (p, a) in &other.terms {
            out.accumulate(p.clone(), *a);
        }
        out.prune();
        out
    }

    /// Keeps only the terms whose pattern satisfies `keep`.
    pub fn filter<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&OccupationPattern) -> bool,
    {
        FockState {
            terms: self
                .terms
                .iter()
                .filter(|(p, _)| keep(p))
                .map(|(p, a)| (p.clone(), *a))
                .collect(),
            photon_number: self.photon_number,
        }
    }

    pub(crate) fn accumulate(&mut self, pattern: OccupationPattern, amp: Complex64) {
        *self.terms.entry(pattern).or_default() += amp;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= AMPLITUDE_EPSILON);
    }

    /// Text dump: one `<re> <im> <pattern>` line per term, in pattern order.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for (pattern, amp) in &self.terms {
            out.push_str(&format!("{:e} {:e} {}\n", amp.re, amp.im, pattern));
        }
        out
    }

    /// Parses the format written by [`FockState::to_dump`]. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_dump(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.splitn(3, char::is_whitespace);
            let mut number = |what: &str| -> Result<f64> {
                fields
                    .next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing {what}", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {what}: {e}", lineno + 1)))
            };
            let re = number("real part")?;
            let im = number("imaginary part")?;
            let pattern: OccupationPattern = fields.next().unwrap_or("").parse()?;
            terms.push((pattern, Complex64::new(re, im)));
        }
        let photon_number = match terms.first() {
            Some((p, _)) => p.total_photons(),
            None => return Err(Error::Parse("state dump has no terms".into())),
        };
        FockState::from_terms(photon_number, terms)
    }
}

//! Scenario files and end-to-end protocol runs.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! schema_version = 1
//! name = "ideal"
//! seed = 1
//!
//! [source]
//! theta_deg = 45.0
//! phi_deg = 45.0
//!
//! [distinguishability]            # overlaps, or the three *_visibility keys
//! pair_overlap_1 = 1.0
//! pair_overlap_2 = 1.0
//! cross_overlap = 1.0
//!
//! [measurement]
//! basis = "all"                   # hv | circular | diagonal | all
//! pauli_correction = true
//!
//! [tomography]
//! shots_per_setting = 0           # 0 = exact probabilities
//! resamples = 200
//! method = "linear_inversion"     # or maximum_likelihood
//!
//! [hom]
//! sigma = 1.0
//! span = 5.0
//! points = 41
//!
//! [scan]
//! theta_deg = { start = 0.0, stop = 90.0, points = 19 }
//! phi_deg = { start = 0.0, stop = 90.0, points = 19 }
//!
//! [swap_baseline]
//! pair_1 = "phi+"
//! pair_2 = "phi+"
//!
//! [output]
//! dir = "out/ideal"
//! ```
//!
//! Every section except `source` is optional. Unknown keys are rejected.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entanglement::{classical_limit_check, concurrence, fidelity, BellState, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::measurement::{families_match, lpsm_herald, pauli_z, split_node_m, Basis, HeraldRecord, Node, PolProjector, SwapOutcome};
use crate::slocc::{
    bell_decompose, postselect, prepare_initial, success_probability_scan, DistinguishabilityConfig, MPairState, NodePattern,
    ScanPoint, SourceConfig,
};
use crate::tomography::{
    error_bars, four_photon_hom_curve, hom_curve, reconstruct_with, simulate_counts, symmetric_grid, ErrorBars, HomCurve,
    Reconstruction,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance on the `[0, 1]` range of reported metrics.
pub const METRIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub source: SourceSection,
    #[serde(default)]
    pub distinguishability: DistinguishabilitySection,
    #[serde(default)]
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub hom: HomSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub swap_baseline: SwapSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for reports, curves and dumps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistinguishabilitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_overlap_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_overlap_2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_overlap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_1_visibility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_2_visibility: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_visibility: Option<f64>,
}

impl DistinguishabilitySection {
    /// Overlaps given directly (missing ones default to 1) or inverted from
    /// HOM visibilities; the two forms cannot be mixed.
    pub fn resolve(&self) -> Result<DistinguishabilityConfig> {
        let overlaps = [self.pair_overlap_1, self.pair_overlap_2, self.cross_overlap];
        let visibilities = [self.source_1_visibility, self.source_2_visibility, self.cross_visibility];
        let any_overlap = overlaps.iter().any(Option::is_some);
        let any_visibility = visibilities.iter().any(Option::is_some);
        match (any_overlap, any_visibility) {
            (true, true) => Err(Error::Config(
                "distinguishability takes either overlaps or visibilities, not both".into(),
            )),
            (_, true) => {
                let [a, b, c] = visibilities.map(|v| v.unwrap_or(1.0));
                DistinguishabilityConfig::from_visibilities(a, b, c)
            }
            _ => {
                let [a, b, c] = overlaps.map(|v| v.unwrap_or(1.0));
                DistinguishabilityConfig::new(a, b, c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisSelection {
    #[serde(rename = "hv")]
    HV,
    Circular,
    Diagonal,
    #[default]
    All,
}

impl BasisSelection {
    pub fn bases(self) -> Vec<Basis> {
        match self {
            BasisSelection::HV => vec![Basis::HV],
            BasisSelection::Circular => vec![Basis::Circular],
            BasisSelection::Diagonal => vec![Basis::Diagonal],
            BasisSelection::All => Basis::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default)]
    pub basis: BasisSelection,
    #[serde(default = "yes")]
    pub pauli_correction: bool,
}

fn yes() -> bool {
    true
}

impl Default for MeasurementSection {
    fn default() -> Self {
        MeasurementSection {
            basis: BasisSelection::All,
            pauli_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    #[serde(default)]
    pub shots_per_setting: u64,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub method: Reconstruction,
}

fn default_resamples() -> usize {
    200
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection {
            shots_per_setting: 0,
            resamples: default_resamples(),
            method: Reconstruction::LinearInversion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSection {
    pub sigma: f64,
    pub span: f64,
    pub points: usize,
}

impl Default for HomSection {
    fn default() -> Self {
        HomSection {
            sigma: 1.0,
            span: 5.0,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl AngleRange {
    pub fn values_deg(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl Default for AngleRange {
    fn default() -> Self {
        AngleRange {
            start: 0.0,
            stop: 90.0,
            points: 19,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default)]
    pub theta_deg: AngleRange,
    #[serde(default)]
    pub phi_deg: AngleRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapSection {
    pub pair_1: BellState,
    pub pair_2: BellState,
}

impl Default for SwapSection {
    fn default() -> Self {
        SwapSection {
            pair_1: BellState::PhiPlus,
            pair_2: BellState::PhiPlus,
        }
    }
}

fn check_angle(name: &str, deg: f64) -> Result<()> {
    if (0.0..=90.0).contains(&deg) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {deg} is outside [0, 90] degrees")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        check_angle("source.theta_deg", self.source.theta_deg)?;
        check_angle("source.phi_deg", self.source.phi_deg)?;
        self.distinguishability.resolve()?;
        if self.tomography.shots_per_setting > 0 && self.tomography.resamples < 2 {
            return Err(Error::Config("tomography.resamples must be at least 2".into()));
        }
        if !(self.hom.sigma > 0.0 && self.hom.span.is_finite() && self.hom.span >= 0.0) || self.hom.points == 0 {
            return Err(Error::Config("hom needs sigma > 0, span >= 0 and at least one point".into()));
        }
        for (name, range) in [("scan.theta_deg", self.scan.theta_deg), ("scan.phi_deg", self.scan.phi_deg)] {
            check_angle(name, range.start)?;
            check_angle(name, range.stop)?;
            if range.points == 0 {
                return Err(Error::Config(format!("{name} needs at least one point")));
            }
        }
        Ok(())
    }

    pub fn sources(&self) -> SourceConfig {
        SourceConfig::new(self.source.theta_deg.to_radians(), self.source.phi_deg.to_radians())
    }

    pub fn distinguishability(&self) -> Result<DistinguishabilityConfig> {
        self.distinguishability.resolve()
    }

    /// SHA-256 of the canonical JSON form of the scenario.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            scenario: self.name.clone(),
            config_sha256: self.config_hash(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

/// Independent seed for sub-task `index` of a run seeded with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub schema_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellWeight {
    pub m_pair: MPairState,
    pub rl: BellState,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub shots_per_setting: u64,
    pub seed: u64,
    pub method: Reconstruction,
    pub reconstructed: TwoQubitDensity,
    pub error_bars: ErrorBars,
}

/// One row of the heralded-state table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldReport {
    pub target: BellState,
    pub basis: Basis,
    /// Symmetric outcome pairs whose counts are merged.
    pub outcomes: Vec<[PolProjector; 2]>,
    pub correction: Option<String>,
    /// Joint probability of the merged outcomes given the post-selected
    /// state.
    pub probability: f64,
    pub rl_state: TwoQubitDensity,
    pub fidelity: f64,
    pub concurrence: f64,
    pub above_classical_limit: bool,
    pub tomography: Option<TomographyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub pattern: String,
    pub postselection_probability: f64,
    pub bell_weights: Vec<BellWeight>,
    pub bell_residual: f64,
    pub heralds: Vec<HeraldReport>,
    /// All outcome records per basis, before merging.
    pub records: BTreeMap<Basis, Vec<HeraldRecord>>,
    pub non_coincidence: BTreeMap<Basis, f64>,
    pub failure: Option<Failure>,
}

impl RunReport {
    /// Checks that every probability and metric lies in `[0, 1]`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let in_range = |x: f64| (-METRIC_TOLERANCE..=1.0 + METRIC_TOLERANCE).contains(&x);
        if !in_range(self.postselection_probability) {
            return Err(format!("postselection probability {}", self.postselection_probability));
        }
        for h in &self.heralds {
            let mut values = vec![("probability", h.probability), ("fidelity", h.fidelity), ("concurrence", h.concurrence)];
            if let Some(t) = &h.tomography {
                values.push(("tomography fidelity", t.error_bars.fidelity.value));
                values.push(("tomography concurrence", t.error_bars.concurrence.value));
            }
            if let Some((name, v)) = values.into_iter().find(|(_, v)| !in_range(*v)) {
                return Err(format!("{} {name} = {v}", h.target.name()));
            }
        }
        for (basis, records) in &self.records {
            let total: f64 = records.iter().map(|r| r.joint_probability).sum::<f64>() + self.non_coincidence[basis];
            if (total - 1.0).abs() > METRIC_TOLERANCE {
                return Err(format!("{basis} herald probabilities sum to {total}"));
            }
        }
        Ok(())
    }

    pub fn herald(&self, target: BellState) -> Option<&HeraldReport> {
        self.heralds.iter().find(|h| h.target == target)
    }
}

/// The state conditioned on one photon at R, two at M and one at L.
pub fn postselected_state(scenario: &Scenario) -> Result<(FockState, f64)> {
    let initial = prepare_initial(&scenario.sources(), &scenario.distinguishability()?)?;
    postselect(&initial, &NodePattern::heralding())
}

fn merged_state(records: &[&HeraldRecord]) -> Result<(TwoQubitDensity, f64)> {
    let parts: Vec<(f64, &TwoQubitDensity)> = records
        .iter()
        .filter_map(|r| r.rl_state.as_ref().map(|s| (r.joint_probability, s)))
        .collect();
    let probability = parts.iter().map(|(p, _)| p).sum();
    Ok((TwoQubitDensity::mixture(&parts)?, probability))
}

struct Herald {
    target: BellState,
    basis: Basis,
    outcomes: Vec<[PolProjector; 2]>,
    correction: Option<String>,
    probability: f64,
    rl_state: TwoQubitDensity,
}

fn herald_row(scenario: &Scenario, index: u64, herald: Herald) -> Result<HeraldReport> {
    let Herald {
        target,
        basis,
        outcomes,
        correction,
        probability,
        rl_state,
    } = herald;
    let f = fidelity(&rl_state, &target.ket());
    let tomo = &scenario.tomography;
    let tomography = if tomo.shots_per_setting > 0 {
        let seed = derive_seed(scenario.seed, index);
        let counts = simulate_counts(&rl_state, tomo.shots_per_setting, seed);
        Some(TomographyReport {
            shots_per_setting: tomo.shots_per_setting,
            seed,
            method: tomo.method,
            reconstructed: reconstruct_with(&counts, tomo.method)?,
            error_bars: error_bars(&counts, &target.ket(), tomo.resamples, derive_seed(seed, 0), tomo.method)?,
        })
    } else {
        None
    };
    Ok(HeraldReport {
        target,
        basis,
        outcomes,
        correction,
        probability,
        fidelity: f,
        concurrence: concurrence(&rl_state),
        above_classical_limit: classical_limit_check(f),
        rl_state,
        tomography,
    })
}

/// Runs preparation, post-selection, node-M splitting, LPSM heralding and
/// metrics, plus simulated tomography when shots are requested.
pub fn run_distribution(scenario: &Scenario) -> Result<RunReport> {
    scenario.validate()?;
    let pattern = NodePattern::heralding();
    let mut report = RunReport {
        provenance: scenario.provenance(),
        pattern: pattern.to_string(),
        postselection_probability: 0.0,
        bell_weights: Vec::new(),
        bell_residual: 0.0,
        heralds: Vec::new(),
        records: BTreeMap::new(),
        non_coincidence: BTreeMap::new(),
        failure: None,
    };
    let (state, probability) = match postselected_state(scenario) {
        Ok(ok) => ok,
        Err(e @ Error::EmptyPostselection { .. }) => {
            report.failure = Some(Failure {
                kind: "empty_postselection".into(),
                message: e.to_string(),
            });
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.postselection_probability = probability;
    let decomposition = bell_decompose(&state)?;
    report.bell_residual = decomposition.residual;
    report.bell_weights = decomposition
        .coefficients
        .iter()
        .filter(|(_, c)| c.norm_sqr() > 1e-15)
        .map(|(&(m_pair, rl), c)| BellWeight {
            m_pair,
            rl,
            weight: c.norm_sqr(),
        })
        .collect();

    let split = split_node_m(&state)?;
    let mut index = 0;
    for basis in scenario.measurement.basis.bases() {
        let set = lpsm_herald(&split, basis, basis)?;
        let target = basis.discriminated_target();
        let designed: Vec<&HeraldRecord> = set.records.iter().filter(|r| r.target == Some(target)).collect();
        let outcomes = designed.iter().map(|r| r.m_outcome).collect();
        if designed.iter().all(|r| r.rl_state.is_none()) {
            report.failure = Some(Failure {
                kind: "no_herald".into(),
                message: format!("no {basis} outcome heralds {}", target.name()),
            });
        } else {
            let (rho, probability) = merged_state(&designed)?;
            if basis == Basis::HV && scenario.measurement.pauli_correction {
                let corrected = Herald {
                    target: BellState::PsiMinus,
                    basis,
                    outcomes: designed.iter().map(|r| r.m_outcome).collect(),
                    correction: Some("sigma_z on R".to_string()),
                    probability,
                    rl_state: pauli_z(&rho, Node::R),
                };
                report.heralds.push(herald_row(scenario, index, Herald { target, basis, outcomes, correction: None, probability, rl_state: rho })?);
                report.heralds.push(herald_row(scenario, index + 1, corrected)?);
            } else {
                report.heralds.push(herald_row(scenario, index, Herald { target, basis, outcomes, correction: None, probability, rl_state: rho })?);
            }
        }
        index += 2;
        report.non_coincidence.insert(basis, set.non_coincidence);
        report.records.insert(basis, set.records);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub provenance: Provenance,
    pub sigma: f64,
    pub source_1: HomCurve,
    pub source_2: HomCurve,
    pub four_photon: HomCurve,
}

/// Two-photon dips of each source and the four-photon central dip.
pub fn run_hom(scenario: &Scenario) -> Result<HomReport> {
    scenario.validate()?;
    let dist = scenario.distinguishability()?;
    let grid = symmetric_grid(scenario.hom.span, scenario.hom.points);
    let sigma = scenario.hom.sigma;
    Ok(HomReport {
        provenance: scenario.provenance(),
        sigma,
        source_1: hom_curve(sigma, &grid, dist.pair_overlap_1)?,
        source_2: hom_curve(sigma, &grid, dist.pair_overlap_2)?,
        four_photon: four_photon_hom_curve(sigma, &grid, &dist)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResources {
    pub initial_entangled_pairs: u32,
    pub measurement: String,
    /// Product of the pipeline probabilities for one heralded state.
    pub success_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpsmPipeline {
    pub postselection_probability: f64,
    /// Per basis: probability of one photon in each arm given post-selection.
    pub coincidence_probability: BTreeMap<Basis, f64>,
    /// Per basis: share of coincidences landing on the designed outcomes.
    pub discriminated_fraction: BTreeMap<Basis, f64>,
    pub heralded: Vec<BellState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapReport {
    pub provenance: Provenance,
    pub input: [BellState; 2],
    pub outcomes: Vec<SwapOutcome>,
    pub bsm: ProtocolResources,
    pub lpsm: ProtocolResources,
    pub lpsm_pipeline: LpsmPipeline,
    pub families_match: bool,
}

/// Standard swapping with a complete Bell measurement next to the LPSM
/// pipeline of the same scenario.
pub fn run_swap_baseline(scenario: &Scenario) -> Result<SwapReport> {
    let input = [scenario.swap_baseline.pair_1, scenario.swap_baseline.pair_2];
    let outcomes = crate::measurement::swap_baseline(input[0], input[1]);
    let run = run_distribution(scenario)?;
    let mut pipeline = LpsmPipeline {
        postselection_probability: run.postselection_probability,
        coincidence_probability: BTreeMap::new(),
        discriminated_fraction: BTreeMap::new(),
        heralded: run.heralds.iter().map(|h| h.target).collect(),
    };
    for (basis, records) in &run.records {
        let coincident: f64 = records.iter().map(|r| r.joint_probability).sum();
        let designed: f64 = records.iter().filter(|r| r.target.is_some()).map(|r| r.joint_probability).sum();
        pipeline.coincidence_probability.insert(*basis, coincident);
        pipeline
            .discriminated_fraction
            .insert(*basis, if coincident > 0.0 { designed / coincident } else { 0.0 });
    }
    let per_basis = pipeline
        .coincidence_probability
        .iter()
        .map(|(b, c)| c * pipeline.discriminated_fraction[b])
        .fold(0.0, f64::max);
    let swapped: Vec<BellState> = outcomes.iter().map(|o| o.target).collect();
    Ok(SwapReport {
        provenance: scenario.provenance(),
        input,
        bsm: ProtocolResources {
            initial_entangled_pairs: 2,
            measurement: "BSM".into(),
            success_probability: outcomes.iter().map(|o| o.probability).sum::<f64>() / outcomes.len() as f64,
        },
        lpsm: ProtocolResources {
            initial_entangled_pairs: 0,
            measurement: "LPSM".into(),
            success_probability: run.postselection_probability * per_basis,
        },
        families_match: families_match(&swapped, &pipeline.heralded),
        lpsm_pipeline: pipeline,
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub provenance: Provenance,
    pub pattern: String,
    /// Angles in degrees.
    pub points: Vec<ScanPoint>,
}

impl ScanReport {
    /// Writes `theta_deg,phi_deg,probability` rows.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta_deg", "phi_deg", "probability"]).map_err(|e| Error::Parse(e.to_string()))?;
        for p in &self.points {
            w.serialize((p.theta, p.phi, p.probability)).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Heralding probability over the scenario's θ–φ grid.
pub fn run_scan(scenario: &Scenario) -> Result<ScanReport> {
    scenario.validate()?;
    let pattern = NodePattern::heralding();
    let thetas: Vec<f64> = scenario.scan.theta_deg.values_deg().iter().map(|d| d.to_radians()).collect();
    let phis: Vec<f64> = scenario.scan.phi_deg.values_deg().iter().map(|d| d.to_radians()).collect();
    let points = success_probability_scan(&thetas, &phis, &pattern, &scenario.distinguishability()?)?
        .into_iter()
        .map(|p| ScanPoint {
            theta: p.theta.to_degrees(),
            phi: p.phi.to_degrees(),
            probability: p.probability,
        })
        .collect();
    Ok(ScanReport {
        provenance: scenario.provenance(),
        pattern: pattern.to_string(),
        points,
    })
}

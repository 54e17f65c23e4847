//! Two-qubit state tomography on the R–L pair and HOM interference curves.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::entanglement::{concurrence, fidelity, kron, pauli_x, pauli_y, pauli_z, Ket2, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::fock::{FockState, ModeLabel, Polarization, Site};
use crate::measurement::{Basis, PolProjector};
use crate::optics::{beam_splitter_sites, half_wave_plate, Circuit};
use crate::slocc::{delay_overlap, DistinguishabilityConfig, NodePattern, TEMPORAL_MODES};

/// Projector pair measured on R and L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub r: PolProjector,
    pub l: PolProjector,
}

impl MeasurementSetting {
    pub fn new(r: PolProjector, l: PolProjector) -> Self {
        MeasurementSetting { r, l }
    }

    /// All 36 pairs from `{H, V, d, c, r, l}`.
    pub fn all() -> Vec<MeasurementSetting> {
        PolProjector::ALL
            .iter()
            .flat_map(|&r| PolProjector::ALL.iter().map(move |&l| MeasurementSetting::new(r, l)))
            .collect()
    }

    pub fn bases(&self) -> (Basis, Basis) {
        (self.r.basis(), self.l.basis())
    }

    pub fn operator(&self) -> Matrix4<Complex64> {
        kron(&self.r.projector(), &self.l.projector())
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.r, self.l)
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(r), Some(l), None) => Ok(MeasurementSetting::new(
                r.to_string().parse()?,
                l.to_string().parse()?,
            )),
            _ => Err(Error::Parse(format!("setting `{s}` is not two projector labels"))),
        }
    }
}

/// Counts for one setting. `shots = 0` marks an exact record whose
/// frequency is `expected_rate` itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub expected_rate: f64,
    pub observed: u64,
    pub shots: u64,
}

impl CountRecord {
    pub fn is_exact(&self) -> bool {
        self.shots == 0
    }

    pub fn frequency(&self) -> f64 {
        if self.is_exact() {
            self.expected_rate
        } else {
            self.observed as f64 / self.shots as f64
        }
    }
}

pub fn born_probability(rho: &TwoQubitDensity, setting: &MeasurementSetting) -> f64 {
    (rho.matrix() * setting.operator()).trace().re.clamp(0.0, 1.0)
}

/// Infinite-statistics records for all 36 settings.
pub fn exact_records(rho: &TwoQubitDensity) -> Vec<CountRecord> {
    MeasurementSetting::all()
        .into_iter()
        .map(|setting| CountRecord {
            expected_rate: born_probability(rho, &setting),
            setting,
            observed: 0,
            shots: 0,
        })
        .collect()
}

fn poisson_sample(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Poisson counts with mean `rate × shots` for all 36 settings. `shots = 0`
/// returns [`exact_records`] without touching the generator.
pub fn simulate_counts(rho: &TwoQubitDensity, shots: u64, seed: u64) -> Vec<CountRecord> {
    if shots == 0 {
        return exact_records(rho);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MeasurementSetting::all()
        .into_iter()
        .map(|setting| {
            let expected_rate = born_probability(rho, &setting);
            CountRecord {
                setting,
                expected_rate,
                observed: poisson_sample(&mut rng, expected_rate * shots as f64),
                shots,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Least-squares inversion with eigenvalue clamping.
    #[default]
    LinearInversion,
    /// Iterative `RρR` maximum likelihood.
    MaximumLikelihood,
}

fn pauli_products() -> Vec<Matrix4<Complex64>> {
    let singles: [Matrix2<Complex64>; 4] = [Matrix2::identity(), pauli_x(), pauli_y(), pauli_z()];
    singles
        .iter()
        .flat_map(|a| singles.iter().map(move |b| kron(a, b)))
        .collect()
}

/// Least-squares inverter for a fixed list of settings.
struct LinearInverter {
    paulis: Vec<Matrix4<Complex64>>,
    pseudo_inverse: DMatrix<f64>,
}

impl LinearInverter {
    fn new(records: &[CountRecord]) -> Result<Self> {
        let paulis = pauli_products();
        if records.len() < paulis.len() {
            return Err(Error::IncompleteSettings(format!(
                "{} settings cannot determine {} parameters",
                records.len(),
                paulis.len()
            )));
        }
        let design = DMatrix::from_fn(records.len(), paulis.len(), |s, k| {
            (records[s].setting.operator() * paulis[k]).trace().re / 4.0
        });
        let svd = design.svd(true, true);
        if svd.rank(1e-9) < paulis.len() {
            return Err(Error::IncompleteSettings(format!(
                "{} settings span fewer than {} operator directions",
                records.len(),
                paulis.len()
            )));
        }
        let pseudo_inverse = svd.pseudo_inverse(1e-12).map_err(|e| Error::IncompleteSettings(e.to_string()))?;
        Ok(LinearInverter { paulis, pseudo_inverse })
    }

    fn invert(&self, records: &[CountRecord]) -> Matrix4<Complex64> {
        let freqs = DVector::from_iterator(records.len(), records.iter().map(CountRecord::frequency));
        let coeffs = &self.pseudo_inverse * freqs;
        self.paulis
            .iter()
            .zip(coeffs.iter())
            .fold(Matrix4::zeros(), |acc, (p, x)| acc + p * Complex64::new(x / 4.0, 0.0))
    }

    fn estimate(&self, records: &[CountRecord], method: Reconstruction) -> Result<TwoQubitDensity> {
        let linear = TwoQubitDensity::nearest_physical(&self.invert(records))?;
        match method {
            Reconstruction::LinearInversion => Ok(linear),
            Reconstruction::MaximumLikelihood => maximum_likelihood(records, &linear),
        }
    }
}

fn maximum_likelihood(records: &[CountRecord], start: &TwoQubitDensity) -> Result<TwoQubitDensity> {
    let ops: Vec<Matrix4<Complex64>> = records.iter().map(|r| r.setting.operator()).collect();
    let weights: Vec<f64> = records.iter().map(CountRecord::frequency).collect();
    // keep full rank so that every direction can still move
    let mut rho = start.matrix() * Complex64::new(0.9, 0.0) + Matrix4::identity() * Complex64::new(0.025, 0.0);
    for _ in 0..5000 {
        let mut r = Matrix4::zeros();
        for (op, &w) in ops.iter().zip(&weights) {
            let p = (rho * op).trace().re;
            if p > 1e-15 {
                r += op * Complex64::new(w / p, 0.0);
            }
        }
        let next = r * rho * r;
        let next = next / next.trace();
        let step = (next - rho).norm();
        rho = next;
        if step < 1e-12 {
            break;
        }
    }
    TwoQubitDensity::nearest_physical(&rho)
}

/// Linear-inversion estimate projected onto the physical states.
pub fn reconstruct(records: &[CountRecord]) -> Result<TwoQubitDensity> {
    reconstruct_with(records, Reconstruction::LinearInversion)
}

pub fn reconstruct_with(records: &[CountRecord], method: Reconstruction) -> Result<TwoQubitDensity> {
    LinearInverter::new(records)?.estimate(records, method)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Value on the observed data.
    pub value: f64,
    /// Bootstrap mean.
    pub mean: f64,
    /// Bootstrap standard deviation.
    pub std: f64,
}

impl Estimate {
    fn from_samples(value: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBars {
    pub fidelity: Estimate,
    pub concurrence: Estimate,
    pub resamples: usize,
}

/// Parametric bootstrap: each resample draws every count from
/// `Poisson(observed)`; exact records are kept as they are.
pub fn error_bars(
    records: &[CountRecord],
    target: &Ket2,
    resamples: usize,
    seed: u64,
    method: Reconstruction,
) -> Result<ErrorBars> {
    if resamples < 2 {
        return Err(Error::Config(format!("need at least 2 resamples, got {resamples}")));
    }
    let inverter = LinearInverter::new(records)?;
    let rho = inverter.estimate(records, method)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fids = Vec::with_capacity(resamples);
    let mut concs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let resampled: Vec<CountRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if !r.is_exact() {
                    r.observed = poisson_sample(&mut rng, r.observed as f64);
                }
                r
            })
            .collect();
        let est = inverter.estimate(&resampled, method)?;
        fids.push(fidelity(&est, target));
        concs.push(concurrence(&est));
    }
    Ok(ErrorBars {
        fidelity: Estimate::from_samples(fidelity(&rho, target), &fids),
        concurrence: Estimate::from_samples(concurrence(&rho), &concs),
        resamples,
    })
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    setting: String,
    observed: u64,
    shots: u64,
}

/// Writes `setting,observed,shots` rows.
pub fn write_counts_csv<W: Write>(records: &[CountRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(CountRow {
            setting: r.setting.to_string(),
            observed: r.observed,
            shots: r.shots,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Reads `setting,observed,shots` rows; the expected rate is set to the
/// observed frequency.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    rd.deserialize::<CountRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
            if row.shots == 0 {
                return Err(Error::Parse(format!("row {}: shots must be positive", i + 1)));
            }
            Ok(CountRecord {
                setting: row.setting.parse()?,
                expected_rate: row.observed as f64 / row.shots as f64,
                observed: row.observed,
                shots: row.shots,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomCurve {
    pub delays: Vec<f64>,
    pub coincidences: Vec<f64>,
    pub visibility: f64,
}

impl HomCurve {
    fn from_points(delays: Vec<f64>, coincidences: Vec<f64>) -> Self {
        // normalizes -0.0 so that serialized curves are stable
        let coincidences: Vec<f64> = coincidences.into_iter().map(|c| c.max(0.0) + 0.0).collect();
        let visibility = visibility(&coincidences);
        HomCurve {
            delays,
            coincidences,
            visibility,
        }
    }

    /// Writes `delay,coincidence` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["delay", "coincidence"]).map_err(|e| Error::Parse(e.to_string()))?;
        for (d, c) in self.delays.iter().zip(&self.coincidences) {
            w.serialize((d, c)).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `(C_max - C_min)/(C_max + C_min)`.
pub fn visibility(coincidences: &[f64]) -> f64 {
    let max = coincidences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = coincidences.iter().copied().fold(f64::INFINITY, f64::min);
    if coincidences.is_empty() || max + min <= 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

fn check_grid(sigma: f64, delays: &[f64]) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("wavepacket width must be positive, got {sigma}")));
    }
    if delays.is_empty() || delays.iter().any(|d| !d.is_finite()) {
        return Err(Error::Config("delay grid must be non-empty and finite".into()));
    }
    Ok(())
}

fn check_overlap(o: f64) -> Result<()> {
    if (0.0..=1.0).contains(&o) {
        Ok(())
    } else {
        Err(Error::InvalidDistinguishability(format!("overlap {o} is outside [0, 1]")))
    }
}

fn photon(state: &FockState, site: Site, pol: Polarization, wavepacket: &[f64]) -> FockState {
    let components: Vec<(ModeLabel, Complex64)> = wavepacket
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(t, &w)| (ModeLabel::new(site, pol, t as u8), Complex64::new(w, 0.0)))
        .collect();
    state.create_superposed(&components)
}

fn coincidence_pattern(sites: &[Site]) -> NodePattern {
    NodePattern::new(sites.iter().map(|&s| (s, 1)).collect(), Default::default()).expect("non-empty pattern")
}

/// Probability that two photons with wavepacket overlap `overlap` leave a
/// balanced beam splitter through different ports.
pub fn two_photon_coincidence(overlap: f64) -> Result<f64> {
    check_overlap(overlap)?;
    let s = photon(&FockState::vacuum(), Site::S1, Polarization::H, &[1.0]);
    let s = photon(&s, Site::S2, Polarization::H, &[overlap, (1.0 - overlap * overlap).sqrt()]);
    let out = Circuit::new().with(beam_splitter_sites(Site::S1, Site::S2)?).apply(&s)?;
    Ok(crate::slocc::pattern_probability(&out, &coincidence_pattern(&[Site::S1, Site::S2])))
}

/// Two-photon dip for a pair whose overlap at zero delay is `peak_overlap`;
/// the overlap falls off as `exp(-τ²/2σ²)`.
pub fn hom_curve(sigma: f64, delays: &[f64], peak_overlap: f64) -> Result<HomCurve> {
    check_grid(sigma, delays)?;
    check_overlap(peak_overlap)?;
    let coincidences = delays
        .iter()
        .map(|&d| two_photon_coincidence(peak_overlap * delay_overlap(d, sigma)))
        .collect::<Result<Vec<_>>>()?;
    Ok(HomCurve::from_points(delays.to_vec(), coincidences))
}

/// Four-photon dip: the V photon of Source I and the H photon of Source II
/// interfere on a beam splitter while the other two photons trigger at R
/// and L. The Source-II photon is delayed.
pub fn four_photon_hom_curve(sigma: f64, delays: &[f64], dist: &DistinguishabilityConfig) -> Result<HomCurve> {
    check_grid(sigma, delays)?;
    let w = dist.temporal_vectors()?;
    let circuit = Circuit::new()
        .with(half_wave_plate(Site::S1, std::f64::consts::FRAC_PI_4))
        .with(beam_splitter_sites(Site::S1, Site::S2)?);
    let fourfold = coincidence_pattern(&[Site::R, Site::L, Site::S1, Site::S2]);
    let coincidences = delays
        .iter()
        .map(|&d| {
            let o = delay_overlap(d, sigma);
            let pad = |v: &[f64; TEMPORAL_MODES]| {
                let mut out = v.to_vec();
                out.push(0.0);
                out
            };
            let mut delayed: Vec<f64> = w[2].iter().map(|x| x * o).collect();
            delayed.push((1.0 - o * o).sqrt());
            let s = photon(&FockState::vacuum(), Site::R, Polarization::H, &pad(&w[0]));
            let s = photon(&s, Site::S1, Polarization::V, &pad(&w[1]));
            let s = photon(&s, Site::S2, Polarization::H, &delayed);
            let s = photon(&s, Site::L, Polarization::V, &pad(&w[3]));
            let out = circuit.apply(&s)?;
            Ok(crate::slocc::pattern_probability(&out, &fourfold))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HomCurve::from_points(delays.to_vec(), coincidences))
}

/// `n` points evenly spaced over `[-span, span]`.
pub fn symmetric_grid(span: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect(),
    }
}

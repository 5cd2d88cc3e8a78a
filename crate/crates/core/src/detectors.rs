//! Which-path detector couplings.
//!
//! Each coupling takes a normalized two-path atom state and returns a
//! [`CoupledState`]: the entangled global state plus the detector's record
//! projectors (which detector states count as "cold" and which as "hot").
//! The records are what later lets [`crate::branches`] group terms into
//! branches without guessing a basis.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::hilbert::{overlap_pair, random_unit_vector, Factor, StateVector, C64};
use crate::optics::{LEFT, RIGHT, RIGHT_KICKED};
use crate::rng::derive_seed;
use crate::{Error, Result, ATOM};

pub const QUBIT: &str = "qubit";
pub const MOLECULE: &str = "mol";
pub const ENVIRONMENT: &str = "env-ext";

const ENV_TAG: u64 = 0x0065_6e76_5f65_7874;

/// Factor name of bolometer molecule `k` (1-based).
pub fn molecule_name(k: usize) -> String {
    format!("mol-{k}")
}

/// Macroscopic detector reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reading {
    /// Detector untouched: qubit `|0⟩`, molecule unbumped, bolometer cold.
    Cold,
    /// Detector excited.
    Hot,
}

/// One record of a detector: a projector `|bra⟩⟨bra| ⊗ 1` on detector
/// factors. `config` numbers the microscopic hot configuration (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub reading: Reading,
    pub config: Option<usize>,
    pub bra: StateVector,
}

/// Stage of the arrow + cat observer chain attached to a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObserverStage {
    #[default]
    Absent,
    /// Arrow and cat attached; the cat has seen the arrow.
    Watching,
    /// Arrow and cat attached; the cat is entangled but has its eyes closed.
    EyesClosed,
}

/// A global state together with the detector records that label its terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    state: StateVector,
    records: Vec<Record>,
    observers: ObserverStage,
}

impl CoupledState {
    /// A state with no detector: a single record covering everything.
    pub fn unentangled(state: StateVector) -> Self {
        CoupledState {
            state,
            records: vec![Record {
                reading: Reading::Cold,
                config: None,
                bra: StateVector::scalar(C64::new(1.0, 0.0)),
            }],
            observers: ObserverStage::Absent,
        }
    }

    pub(crate) fn from_parts(state: StateVector, records: Vec<Record>, observers: ObserverStage) -> Self {
        CoupledState {
            state,
            records,
            observers,
        }
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn into_state(self) -> StateVector {
        self.state
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn observers(&self) -> ObserverStage {
        self.observers
    }

    /// Whether any record refers to a detector factor.
    pub fn has_detector(&self) -> bool {
        self.records.iter().any(|r| !r.bra.factors().is_empty())
    }

    /// `(|bra_k⟩⟨bra_k| ⊗ 1)|ψ⟩` for every record, in record order.
    pub fn components(&self) -> Result<Vec<StateVector>> {
        self.records.iter().map(|r| self.state.project(&r.bra)).collect()
    }

    /// Largest amplitude of `ψ − Σ_k P_k ψ`.
    pub fn record_residual(&self) -> Result<f64> {
        let comps = self.components()?;
        let mut sum = StateVector::zeros(self.state.factors().to_vec())?;
        for c in &comps {
            sum = sum.add(c)?;
        }
        self.state.max_abs_diff(&sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitDetector {
    pub backaction_kick: f64,
    /// Fraction of right-path probability that flips the qubit.
    pub efficiency: f64,
}

impl Default for QubitDetector {
    fn default() -> Self {
        QubitDetector {
            backaction_kick: 0.0,
            efficiency: 1.0,
        }
    }
}

/// Bloch angles of a qubit readout basis `{|b₀⟩, |b₁⟩}` with
/// `|b₀⟩ = (cos θ/2, e^{iφ} sin θ/2)` and `|b₁⟩ = (−e^{−iφ} sin θ/2, cos θ/2)`.
/// `θ = π/2, φ = 0` is the `|±⟩` eraser basis (with `|b₁⟩ = −|−⟩`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutBasis {
    pub theta: f64,
    pub phi: f64,
}

impl ReadoutBasis {
    pub const COMPUTATIONAL: ReadoutBasis = ReadoutBasis { theta: 0.0, phi: 0.0 };
    pub const PLUS_MINUS: ReadoutBasis = ReadoutBasis {
        theta: FRAC_PI_2,
        phi: 0.0,
    };

    pub fn vectors(&self) -> Result<[StateVector; 2]> {
        if !self.theta.is_finite() || !self.phi.is_finite() {
            return Err(Error::config("readout angles must be finite"));
        }
        let (s, c) = (self.theta / 2.0).sin_cos();
        let e = C64::from_polar(1.0, self.phi);
        let b0 = StateVector::from_amps(QUBIT, vec![C64::new(c, 0.0), e * s])?;
        let b1 = StateVector::from_amps(QUBIT, vec![-e.conj() * s, C64::new(c, 0.0)])?;
        Ok([b0, b1])
    }

    /// Outcome labels: `0/1`, `+/-`, or `b0/b1` for a general basis.
    pub fn labels(&self) -> [&'static str; 2] {
        let near = |a: f64, b: f64| (a - b).abs() < 1e-12;
        if near(self.theta, 0.0) && near(self.phi, 0.0) {
            ["0", "1"]
        } else if near(self.theta, FRAC_PI_2) && near(self.phi, 0.0) {
            ["+", "-"]
        } else {
            ["b0", "b1"]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoleculeDetector {
    /// Hit amplitude.
    pub alpha: f64,
    /// Miss amplitude.
    pub beta: f64,
    /// `⟨unbumped|bumped⟩`.
    pub overlap_c: f64,
    pub mol_dim: usize,
    pub seed: u64,
    pub backaction_kick: f64,
}

impl Default for MoleculeDetector {
    fn default() -> Self {
        MoleculeDetector {
            alpha: 0.1f64.sqrt(),
            beta: 0.9f64.sqrt(),
            overlap_c: 0.0,
            mol_dim: 4,
            seed: 1,
            backaction_kick: 0.0,
        }
    }
}

impl MoleculeDetector {
    /// Molecule with hit probability `alpha²` and matching miss amplitude.
    pub fn with_hit_probability(p: f64) -> Self {
        MoleculeDetector {
            alpha: p.sqrt(),
            beta: (1.0 - p).sqrt(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::config("molecule amplitudes must be nonnegative"));
        }
        let n2 = self.alpha * self.alpha + self.beta * self.beta;
        if (n2 - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("molecule needs α²+β² = 1, got {n2}")));
        }
        if !(0.0..=1.0).contains(&self.overlap_c) {
            return Err(Error::config(format!(
                "overlap_c {} outside [0, 1]",
                self.overlap_c
            )));
        }
        if self.mol_dim < 2 {
            return Err(Error::config("molecule dimension must be ≥ 2"));
        }
        check_kick(self.backaction_kick)
    }

    /// `(|unbumped⟩, |bumped⟩)`.
    pub fn states(&self) -> Result<(StateVector, StateVector)> {
        overlap_pair(MOLECULE, self.mol_dim, self.overlap_c, derive_seed(self.seed, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bolometer {
    pub n_molecules: usize,
    /// Per-molecule scattering probability.
    pub p_hit: f64,
    pub mol_dim: usize,
    pub ext_dim: usize,
    /// `⟨ε_cold|ε_n⟩` for every hot configuration.
    pub ext_overlap_kappa: f64,
    pub seed: u64,
    pub backaction_kick: f64,
}

impl Default for Bolometer {
    fn default() -> Self {
        Bolometer {
            n_molecules: 8,
            p_hit: 0.3,
            mol_dim: 2,
            ext_dim: 4,
            ext_overlap_kappa: 0.0,
            seed: 1,
            backaction_kick: 0.0,
        }
    }
}

impl Bolometer {
    pub fn validate(&self) -> Result<()> {
        if self.n_molecules == 0 {
            return Err(Error::config("bolometer needs at least one molecule"));
        }
        if !(self.p_hit > 0.0 && self.p_hit <= 1.0) {
            return Err(Error::config(format!("p_hit {} outside (0, 1]", self.p_hit)));
        }
        if self.mol_dim < 2 || self.ext_dim < 2 {
            return Err(Error::config("bolometer mol_dim and ext_dim must be ≥ 2"));
        }
        if !(0.0..=1.0).contains(&self.ext_overlap_kappa) {
            return Err(Error::config(format!(
                "ext_overlap_kappa {} outside [0, 1]",
                self.ext_overlap_kappa
            )));
        }
        check_kick(self.backaction_kick)
    }

    /// Amplitude `b_n` of first hit at molecule `n` (1-based).
    pub fn hit_amplitude(&self, n: usize) -> f64 {
        (self.p_hit * (1.0 - self.p_hit).powi(n as i32 - 1)).sqrt()
    }

    /// Amplitude of the right-path atom missing every molecule.
    pub fn miss_amplitude(&self) -> f64 {
        (1.0 - self.p_hit).powi(self.n_molecules as i32).sqrt()
    }

    /// `(|unbumped_k⟩, |bumped_k⟩)` for each molecule, orthogonal pairs.
    pub fn molecule_states(&self) -> Result<Vec<(StateVector, StateVector)>> {
        (1..=self.n_molecules)
            .map(|k| overlap_pair(&molecule_name(k), self.mol_dim, 0.0, derive_seed(self.seed, k as u64 - 1)))
            .collect()
    }

    /// `(|ε_cold⟩, [|ε_1⟩, …, |ε_N⟩])` with `⟨ε_cold|ε_n⟩ = κ`.
    pub fn environment_states(&self) -> Result<(StateVector, Vec<StateVector>)> {
        let cold = random_unit_vector(ENVIRONMENT, self.ext_dim, derive_seed(self.seed, ENV_TAG))?;
        let k = self.ext_overlap_kappa;
        let s = (1.0 - k * k).sqrt();
        let hot = (1..=self.n_molecules)
            .map(|n| {
                let perp = crate::hilbert::random::orthogonal_to(&cold, derive_seed(self.seed, ENV_TAG + n as u64))?;
                let amps = cold
                    .amps()
                    .iter()
                    .zip(perp.amps())
                    .map(|(a, p)| a * k + p * s)
                    .collect();
                StateVector::from_amps(ENVIRONMENT, amps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((cold, hot))
    }
}

fn check_kick(k: f64) -> Result<()> {
    if k.is_finite() {
        Ok(())
    } else {
        Err(Error::config("back-action kick must be finite"))
    }
}

/// Any of the three detector candidates, as read from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorModel {
    Qubit(QubitDetector),
    Molecule(MoleculeDetector),
    Bolometer(Bolometer),
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorModel::Qubit(q) => {
                if !(0.0..=1.0).contains(&q.efficiency) {
                    return Err(Error::config(format!(
                        "qubit efficiency {} outside [0, 1]",
                        q.efficiency
                    )));
                }
                check_kick(q.backaction_kick)
            }
            DetectorModel::Molecule(m) => m.validate(),
            DetectorModel::Bolometer(b) => b.validate(),
        }
    }

    pub fn backaction_kick(&self) -> f64 {
        match self {
            DetectorModel::Qubit(q) => q.backaction_kick,
            DetectorModel::Molecule(m) => m.backaction_kick,
            DetectorModel::Bolometer(b) => b.backaction_kick,
        }
    }

    /// Couples `atom` to this detector; bolometers also get their external
    /// environment.
    pub fn couple(&self, atom: &StateVector) -> Result<CoupledState> {
        match self {
            DetectorModel::Qubit(q) => couple_qubit(atom, q),
            DetectorModel::Molecule(m) => couple_molecule(atom, m),
            DetectorModel::Bolometer(b) => attach_external_environment(&couple_bolometer(atom, b)?, b),
        }
    }
}

/// Probability that a right-path atom leaves the detector hot.
pub fn detector_efficiency(det: &DetectorModel) -> f64 {
    match det {
        DetectorModel::Qubit(q) => q.efficiency,
        DetectorModel::Molecule(m) => m.alpha * m.alpha,
        DetectorModel::Bolometer(b) => 1.0 - (1.0 - b.p_hit).powi(b.n_molecules as i32),
    }
}

/// Atom path amplitudes `(cL, cR)` and the atom dimension to use (3 when a
/// kick separates `R′` from `R`).
fn atom_input(atom: &StateVector, kick: f64) -> Result<(C64, C64, usize)> {
    if atom.factors().len() != 1 || atom.factors()[0].name != ATOM || atom.dim() != 2 {
        return Err(Error::config(format!(
            "detector input must be a two-path `{ATOM}` state"
        )));
    }
    atom.require_normalized(1e-9)?;
    let dim = if kick == 0.0 { 2 } else { 3 };
    Ok((atom.amps()[LEFT], atom.amps()[RIGHT], dim))
}

fn mode(dim: usize, index: usize, amp: C64) -> Result<StateVector> {
    Ok(StateVector::basis(ATOM, dim, index)?.scale(amp))
}

fn kicked_index(dim: usize) -> usize {
    if dim == 3 {
        RIGHT_KICKED
    } else {
        RIGHT
    }
}

fn sum(terms: Vec<StateVector>) -> Result<StateVector> {
    let mut it = terms.into_iter();
    let first = it.next().ok_or_else(|| Error::config("empty superposition"))?;
    it.try_fold(first, |acc, t| acc.add(&t))
}

/// `|L⟩|0⟩ → |L⟩|0⟩`, `|R⟩|0⟩ → √(1−e)|R⟩|0⟩ + √e|R′⟩|1⟩`.
pub fn couple_qubit(atom: &StateVector, det: &QubitDetector) -> Result<CoupledState> {
    DetectorModel::Qubit(*det).validate()?;
    let (cl, cr, dim) = atom_input(atom, det.backaction_kick)?;
    let zero = StateVector::basis(QUBIT, 2, 0)?;
    let one = StateVector::basis(QUBIT, 2, 1)?;
    let e = det.efficiency;
    let state = sum(vec![
        mode(dim, LEFT, cl)?.tensor(&zero)?,
        mode(dim, RIGHT, cr * (1.0 - e).sqrt())?.tensor(&zero)?,
        mode(dim, kicked_index(dim), cr * e.sqrt())?.tensor(&one)?,
    ])?;
    let records = vec![
        Record {
            reading: Reading::Cold,
            config: None,
            bra: zero,
        },
        Record {
            reading: Reading::Hot,
            config: Some(1),
            bra: one,
        },
    ];
    Ok(CoupledState::from_parts(state, records, ObserverStage::Absent))
}

/// Effective atom amplitudes correlated with one readout outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPath {
    pub label: String,
    /// Born weight of the outcome.
    pub weight: f64,
    /// Amplitudes over the atom modes `(L, R[, R′])`.
    pub amplitudes: Vec<C64>,
}

/// Rewrites an atom ⊗ qubit state as `Σ_k |φ_k⟩|b_k⟩` for an orthonormal
/// qubit basis, returning each unnormalized `|φ_k⟩`.
pub fn rewrite_in_basis(joint: &StateVector, basis: &[StateVector], labels: &[&str]) -> Result<Vec<ConditionalPath>> {
    let names = joint.factor_names();
    if names != [ATOM, QUBIT] {
        return Err(Error::config(format!(
            "expected an `{ATOM}` ⊗ `{QUBIT}` state, got [{}]",
            names.join(", ")
        )));
    }
    if basis.len() != 2 || labels.len() != basis.len() {
        return Err(Error::config("a qubit basis needs exactly two labeled vectors"));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let ip = a.inner(b)?;
            let want = if i == j { 1.0 } else { 0.0 };
            if (ip - C64::new(want, 0.0)).norm() > 1e-12 {
                return Err(Error::config("readout basis is not orthonormal"));
            }
        }
    }
    basis
        .iter()
        .zip(labels)
        .map(|(b, label)| {
            let phi = joint.contract(b)?;
            Ok(ConditionalPath {
                label: label.to_string(),
                weight: phi.norm_sqr(),
                amplitudes: phi.amps().to_vec(),
            })
        })
        .collect()
}

/// `|L⟩|u⟩ → |L⟩|u⟩`, `|R⟩|u⟩ → α|R′⟩|b⟩ + β|R⟩|u⟩`.
///
/// With no kick `R′ = R`, and for `⟨u|b⟩ = c > 0` the right-path detector
/// state `α|b⟩ + β|u⟩` has norm `√(1+2αβc)`; it is renormalized so the map
/// stays an isometry. At `c = 0` this is exactly the three-term state.
///
/// Records are `|u⟩` (cold) and the unit vector completing `|b⟩` against
/// `|u⟩` (hot), which is `|b⟩` itself when `c = 0`.
pub fn couple_molecule(atom: &StateVector, det: &MoleculeDetector) -> Result<CoupledState> {
    det.validate()?;
    let (cl, cr, dim) = atom_input(atom, det.backaction_kick)?;
    let (u, b) = det.states()?;
    let c = det.overlap_c;
    let norm = if dim == 2 {
        (1.0 + 2.0 * det.alpha * det.beta * c).sqrt()
    } else {
        1.0
    };
    let state = sum(vec![
        mode(dim, LEFT, cl)?.tensor(&u)?,
        mode(dim, kicked_index(dim), cr * det.alpha / norm)?.tensor(&b)?,
        mode(dim, RIGHT, cr * det.beta / norm)?.tensor(&u)?,
    ])?;
    let mut records = vec![Record {
        reading: Reading::Cold,
        config: None,
        bra: u.clone(),
    }];
    if c < 1.0 {
        let perp = b
            .sub(&u.clone().scale(C64::new(c, 0.0)))?
            .normalize()?;
        records.push(Record {
            reading: Reading::Hot,
            config: Some(1),
            bra: perp,
        });
    }
    Ok(CoupledState::from_parts(state, records, ObserverStage::Absent))
}

fn product(parts: &[&StateVector]) -> Result<StateVector> {
    parts
        .iter()
        .try_fold(StateVector::scalar(C64::new(1.0, 0.0)), |acc, p| acc.tensor(p))
}

/// Single-scattering bolometer: the right-path atom meets molecules
/// `1..=N` in order and the first hit (at `n`, amplitude
/// `b_n = √(p(1−p)^(n−1))`) leaves configuration `|H_n⟩` with molecule `n`
/// bumped. Missing every molecule (amplitude `√((1−p)^N)`) leaves the cold
/// state `|C⟩ = ⊗_k |u_k⟩`, as does the left path.
pub fn couple_bolometer(atom: &StateVector, det: &Bolometer) -> Result<CoupledState> {
    det.validate()?;
    let (cl, cr, dim) = atom_input(atom, det.backaction_kick)?;
    let cap_ok = (det.mol_dim as u64)
        .checked_pow(det.n_molecules as u32)
        .and_then(|m| m.checked_mul(dim as u64 * det.ext_dim as u64))
        .is_some_and(|t| t <= crate::hilbert::MAX_DIM as u64);
    if !cap_ok {
        return Err(Error::Resource(format!(
            "bolometer with {} molecules of dim {} (ext_dim {}) exceeds the dense cap of {} amplitudes; \
             lower n_molecules or mol_dim",
            det.n_molecules,
            det.mol_dim,
            det.ext_dim,
            crate::hilbert::MAX_DIM
        )));
    }
    let mols = det.molecule_states()?;
    let unbumped: Vec<&StateVector> = mols.iter().map(|(u, _)| u).collect();
    let cold = product(&unbumped)?;

    let mut terms = vec![
        mode(dim, LEFT, cl)?.tensor(&cold)?,
        mode(dim, RIGHT, cr * det.miss_amplitude())?.tensor(&cold)?,
    ];
    for n in 1..=det.n_molecules {
        let mut parts = unbumped.clone();
        parts[n - 1] = &mols[n - 1].1;
        terms.push(mode(dim, kicked_index(dim), cr * det.hit_amplitude(n))?.tensor(&product(&parts)?)?);
    }
    let records = bolometer_records(&mols)?;
    Ok(CoupledState::from_parts(sum(terms)?, records, ObserverStage::Absent))
}

/// Cold record `⊗_k |u_k⟩`; hot record `n` fixes molecules `1..=n` to
/// `|u_1⟩…|u_(n−1)⟩|b_n⟩`.
fn bolometer_records(mols: &[(StateVector, StateVector)]) -> Result<Vec<Record>> {
    let unbumped: Vec<&StateVector> = mols.iter().map(|(u, _)| u).collect();
    let mut records = vec![Record {
        reading: Reading::Cold,
        config: None,
        bra: product(&unbumped)?,
    }];
    for n in 1..=mols.len() {
        let mut parts = unbumped[..n].to_vec();
        parts[n - 1] = &mols[n - 1].1;
        records.push(Record {
            reading: Reading::Hot,
            config: Some(n),
            bra: product(&parts)?,
        });
    }
    Ok(records)
}

/// Entangles the bolometer's configurations with an external environment:
/// the cold record gets `|ε_cold⟩`, hot configuration `n` gets `|ε_n⟩`.
pub fn attach_external_environment(joint: &CoupledState, det: &Bolometer) -> Result<CoupledState> {
    det.validate()?;
    let expected: Vec<Factor> = (1..=det.n_molecules)
        .map(|k| Factor::new(molecule_name(k), det.mol_dim))
        .collect::<Result<_>>()?;
    let state = joint.state();
    let has_all = expected.iter().all(|f| state.factor(&f.name) == Some(f));
    let expected_records = bolometer_records(&det.molecule_states()?)?;
    let same_records = joint.records().len() == expected_records.len()
        && joint.records().iter().zip(&expected_records).all(|(a, b)| {
            a.reading == b.reading
                && a.config == b.config
                && a.bra.max_abs_diff(&b.bra).is_ok_and(|d| d <= 1e-12)
        });
    if !has_all || !same_records {
        return Err(Error::config(
            "state was not produced by couple_bolometer with this detector",
        ));
    }
    if state.has_factor(ENVIRONMENT) {
        return Err(Error::config("external environment already attached"));
    }
    if joint.record_residual()? > 1e-9 {
        return Err(Error::config(
            "state is not spanned by this bolometer's cold/hot records",
        ));
    }
    let (cold, hot) = det.environment_states()?;
    let comps = joint.components()?;
    let terms = comps
        .iter()
        .zip(joint.records())
        .map(|(comp, rec)| {
            let env = match rec.config {
                Some(n) => &hot[n - 1],
                None => &cold,
            };
            comp.tensor(env)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupledState::from_parts(
        sum(terms)?,
        joint.records().to_vec(),
        joint.observers(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{
        coherence_visibility, fringe_visibility, gaussian_slit_field, path_state, pattern_conditional,
        ScreenGrid, SlitGeometry, DEFAULT_WINDOW,
    };
    use crate::rng::stream;
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn balanced() -> StateVector {
        path_state(c(H), c(H)).unwrap()
    }

    fn close(a: &[C64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - c(*y)).norm() <= tol)
    }

    #[test]
    fn qubit_balanced_full_efficiency() {
        let s = couple_qubit(&balanced(), &QubitDetector::default()).unwrap();
        assert!(close(s.state().amps(), &[H, 0.0, 0.0, H], 1e-15));
    }

    #[test]
    fn qubit_zero_efficiency_is_decoupled() {
        let det = QubitDetector {
            efficiency: 0.0,
            ..Default::default()
        };
        let s = couple_qubit(&balanced(), &det).unwrap();
        let want = balanced().tensor(&StateVector::basis(QUBIT, 2, 0).unwrap()).unwrap();
        assert_eq!(s.state(), &want);
    }

    #[test]
    fn qubit_left_path_untouched() {
        let s = couple_qubit(&path_state(c(1.0), c(0.0)).unwrap(), &QubitDetector::default()).unwrap();
        assert!(close(s.state().amps(), &[1.0, 0.0, 0.0, 0.0], 0.0));
    }

    #[test]
    fn qubit_rejects_bad_input() {
        let bad = path_state(c(1.0), c(1.0)).unwrap();
        assert!(couple_qubit(&bad, &QubitDetector::default()).is_err());
        let det = QubitDetector {
            efficiency: 1.5,
            ..Default::default()
        };
        assert!(couple_qubit(&balanced(), &det).is_err());
    }

    #[test]
    fn qubit_kick_uses_third_mode() {
        let det = QubitDetector {
            backaction_kick: 0.5,
            efficiency: 1.0,
        };
        let s = couple_qubit(&balanced(), &det).unwrap();
        assert_eq!(s.state().factor(ATOM).unwrap().dim, 3);
        assert!((s.state().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rewrite_in_computational_and_eraser_bases() {
        let joint = couple_qubit(&balanced(), &QubitDetector::default()).unwrap().into_state();
        let zb = ReadoutBasis::COMPUTATIONAL;
        let parts = rewrite_in_basis(&joint, &zb.vectors().unwrap(), &zb.labels()).unwrap();
        assert!(close(&parts[0].amplitudes, &[H, 0.0], 1e-15));
        assert!(close(&parts[1].amplitudes, &[0.0, H], 1e-15));

        let pm = ReadoutBasis::PLUS_MINUS;
        let parts = rewrite_in_basis(&joint, &pm.vectors().unwrap(), &pm.labels()).unwrap();
        assert_eq!(parts[0].label, "+");
        assert_eq!(parts[1].label, "-");
        assert!(close(&parts[0].amplitudes, &[0.5, 0.5], 1e-15));
        // |b₁⟩ = −|−⟩ so the antisymmetric combination carries an overall sign
        assert!(close(&parts[1].amplitudes, &[-0.5, 0.5], 1e-15));
        for p in &parts {
            assert!((p.weight - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rewrite_rejects_non_orthonormal_basis() {
        let joint = couple_qubit(&balanced(), &QubitDetector::default()).unwrap().into_state();
        let zero = StateVector::basis(QUBIT, 2, 0).unwrap();
        let plus = StateVector::from_amps(QUBIT, vec![c(H), c(H)]).unwrap();
        assert!(rewrite_in_basis(&joint, &[zero, plus], &["a", "b"]).is_err());
    }

    #[test]
    fn readout_basis_is_orthonormal_for_any_angles() {
        let mut rng = stream(5, 0);
        for _ in 0..50 {
            let rb = ReadoutBasis {
                theta: rng.random_range(0.0..std::f64::consts::PI),
                phi: rng.random_range(0.0..std::f64::consts::TAU),
            };
            let [b0, b1] = rb.vectors().unwrap();
            assert!((b0.norm() - 1.0).abs() < 1e-12);
            assert!((b1.norm() - 1.0).abs() < 1e-12);
            assert!(b0.inner(&b1).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn molecule_limits() {
        let none = MoleculeDetector::with_hit_probability(0.0);
        let s = couple_molecule(&balanced(), &none).unwrap();
        assert!((coherence_visibility(s.state()).unwrap() - 1.0).abs() < 1e-12);

        let full = MoleculeDetector::with_hit_probability(1.0);
        let s = couple_molecule(&balanced(), &full).unwrap();
        assert!(coherence_visibility(s.state()).unwrap() < 1e-12);
    }

    #[test]
    fn molecule_bumped_weight() {
        let det = MoleculeDetector::default();
        let s = couple_molecule(&balanced(), &det).unwrap();
        let (_, b) = det.states().unwrap();
        let w = s.state().contract(&b).unwrap().norm_sqr();
        assert!((w - 0.05).abs() < 1e-12, "{w}");
        assert!((s.state().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn molecule_overlap_dial_keeps_norm() {
        for &oc in &[0.0, 0.3, 0.5, 0.9, 1.0] {
            let det = MoleculeDetector {
                overlap_c: oc,
                ..Default::default()
            };
            let s = couple_molecule(&balanced(), &det).unwrap();
            assert!((s.state().norm() - 1.0).abs() < 1e-12);
            assert!(s.record_residual().unwrap() < 1e-12);
        }
    }

    #[test]
    fn efficiency_visibility_tradeoff() {
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            let det = MoleculeDetector::with_hit_probability(p);
            let s = couple_molecule(&balanced(), &det).unwrap();
            let eff = detector_efficiency(&DetectorModel::Molecule(det));
            let v = coherence_visibility(s.state()).unwrap();
            assert!((v - (1.0 - eff).sqrt()).abs() < 1e-9, "p={p}: {v}");
        }
    }

    #[test]
    fn bolometer_single_molecule_reduces_to_molecule() {
        let p = 0.3;
        let bolo = Bolometer {
            n_molecules: 1,
            p_hit: p,
            mol_dim: 4,
            ..Default::default()
        };
        let mol = MoleculeDetector {
            alpha: p.sqrt(),
            beta: (1.0 - p).sqrt(),
            overlap_c: 0.0,
            mol_dim: 4,
            seed: bolo.seed,
            backaction_kick: 0.0,
        };
        let a = couple_bolometer(&balanced(), &bolo).unwrap().into_state();
        let b = couple_molecule(&balanced(), &mol).unwrap().into_state();
        let a = a.rename("mol-1", MOLECULE).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn molecule_at_unit_hit_matches_qubit_after_basis_change() {
        let mol = MoleculeDetector {
            mol_dim: 2,
            ..MoleculeDetector::with_hit_probability(1.0)
        };
        let (u, b) = mol.states().unwrap();
        let s = couple_molecule(&balanced(), &mol).unwrap().into_state();
        // unitary sending u → |0⟩, b → |1⟩ is the matrix with rows ⟨u|, ⟨b|
        let m = nalgebra::DMatrix::from_fn(2, 2, |r, col| {
            let v = if r == 0 { &u } else { &b };
            v.amps()[col].conj()
        });
        let mapped = s.apply(&[MOLECULE], &m).unwrap().rename(MOLECULE, QUBIT).unwrap();
        let q = couple_qubit(&balanced(), &QubitDetector::default()).unwrap().into_state();
        assert!(mapped.max_abs_diff(&q).unwrap() < 1e-12);
    }

    #[test]
    fn bolometer_efficiency_matches_branch_weights() {
        let det = Bolometer::default();
        let s = couple_bolometer(&balanced(), &det).unwrap();
        let closed = 1.0 - 0.7f64.powi(8);
        let eff = detector_efficiency(&DetectorModel::Bolometer(det));
        assert!((eff - closed).abs() < 1e-12);
        let comps = s.components().unwrap();
        let hot: f64 = comps
            .iter()
            .zip(s.records())
            .filter(|(_, r)| r.reading == Reading::Hot)
            .map(|(c, _)| c.norm_sqr())
            .sum();
        // conditional on the right path (weight 1/2)
        assert!((hot / 0.5 - closed).abs() < 1e-12);
        assert!((s.state().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bolometer_full_hit_probability() {
        let det = Bolometer {
            p_hit: 1.0,
            n_molecules: 5,
            ..Default::default()
        };
        assert_eq!(det.miss_amplitude(), 0.0);
        assert_eq!(detector_efficiency(&DetectorModel::Bolometer(det)), 1.0);
        let s = couple_bolometer(&balanced(), &det).unwrap();
        assert!(coherence_visibility(s.state()).unwrap() < 1e-12);
    }

    #[test]
    fn bolometer_dimension_cap() {
        let det = Bolometer {
            n_molecules: 30,
            ..Default::default()
        };
        assert!(matches!(couple_bolometer(&balanced(), &det), Err(Error::Resource(_))));
    }

    #[test]
    fn left_path_is_inert() {
        let atom = path_state(c(0.6), c(0.8)).unwrap();
        let left = StateVector::basis(ATOM, 2, LEFT).unwrap();
        let det = Bolometer::default();
        let s = attach_external_environment(&couple_bolometer(&atom, &det).unwrap(), &det).unwrap();
        let mols = det.molecule_states().unwrap();
        let (eps_cold, _) = det.environment_states().unwrap();
        let mut cold = StateVector::scalar(c(1.0));
        for (u, _) in &mols {
            cold = cold.tensor(u).unwrap();
        }
        let cold = cold.tensor(&eps_cold).unwrap().scale(c(0.6));
        assert!(s.state().contract(&left).unwrap().max_abs_diff(&cold).unwrap() < 1e-15);

        let q = couple_qubit(&atom, &QubitDetector::default()).unwrap();
        let l = q.state().contract(&left).unwrap();
        assert!(close(l.amps(), &[0.6, 0.0], 0.0));
    }

    #[test]
    fn environment_with_unit_overlap_changes_nothing() {
        let det = Bolometer {
            ext_overlap_kappa: 1.0,
            ..Default::default()
        };
        let bare = couple_bolometer(&balanced(), &det).unwrap();
        let v0 = coherence_visibility(bare.state()).unwrap();
        let env = attach_external_environment(&bare, &det).unwrap();
        assert!((coherence_visibility(env.state()).unwrap() - v0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_environment_never_increases_visibility() {
        for &p in &[0.1, 0.3, 0.7] {
            let det = Bolometer {
                p_hit: p,
                n_molecules: 4,
                ..Default::default()
            };
            let bare = couple_bolometer(&balanced(), &det).unwrap();
            let env = attach_external_environment(&bare, &det).unwrap();
            let before = coherence_visibility(bare.state()).unwrap();
            let after = coherence_visibility(env.state()).unwrap();
            assert!(after <= before + 1e-12);
            assert!((env.state().norm() - 1.0).abs() < 1e-12);
        }
        let det = Bolometer {
            p_hit: 1.0,
            n_molecules: 4,
            ..Default::default()
        };
        let env = attach_external_environment(&couple_bolometer(&balanced(), &det).unwrap(), &det).unwrap();
        assert!(coherence_visibility(env.state()).unwrap() < 1e-12);
    }

    #[test]
    fn environment_requires_matching_bolometer() {
        let det = Bolometer::default();
        let q = couple_qubit(&balanced(), &QubitDetector::default()).unwrap();
        assert!(attach_external_environment(&q, &det).is_err());
        let other = Bolometer {
            seed: 99,
            ..det
        };
        let s = couple_bolometer(&balanced(), &det).unwrap();
        assert!(attach_external_environment(&s, &other).is_err());
        let once = attach_external_environment(&s, &det).unwrap();
        assert!(attach_external_environment(&once, &det).is_err());
    }

    #[test]
    fn environment_overlaps() {
        let det = Bolometer {
            ext_overlap_kappa: 0.4,
            ..Default::default()
        };
        let (cold, hot) = det.environment_states().unwrap();
        for h in &hot {
            let ov = cold.inner(h).unwrap();
            assert!((ov - c(0.4)).norm() < 1e-12);
        }
    }

    #[test]
    fn eraser_recovers_qubit_fringes() {
        let f = gaussian_slit_field(&SlitGeometry::default(), &ScreenGrid::default()).unwrap();
        let joint = couple_qubit(&balanced(), &QubitDetector::default()).unwrap().into_state();
        let [plus, _] = ReadoutBasis::PLUS_MINUS.vectors().unwrap();
        let p = pattern_conditional(&f, &joint, &plus).unwrap();
        assert!(fringe_visibility(&p, DEFAULT_WINDOW).unwrap() >= 1.0 - 1e-9);
    }

    /// Random product outcome over the bolometer's molecules and environment.
    /// With `record_basis` each molecule is read in its own `{u, b}` basis.
    fn product_outcome(det: &Bolometer, seed: u64, record_basis: bool) -> StateVector {
        let mut rng = stream(seed, 0);
        let mols = det.molecule_states().unwrap();
        let mut out = StateVector::scalar(c(1.0));
        for (k, (u, b)) in mols.iter().enumerate() {
            let o = if record_basis {
                if rng.random_bool(0.5) { u.clone() } else { b.clone() }
            } else {
                random_unit_vector(&molecule_name(k + 1), det.mol_dim, rng.random()).unwrap()
            };
            out = out.tensor(&o).unwrap();
        }
        let env = random_unit_vector(ENVIRONMENT, det.ext_dim, rng.random()).unwrap();
        out.tensor(&env).unwrap()
    }

    #[test]
    fn bolometer_record_readouts_never_restore_fringes() {
        let f = gaussian_slit_field(&SlitGeometry::default(), &ScreenGrid::default()).unwrap();
        let det = Bolometer {
            p_hit: 1.0,
            n_molecules: 4,
            ..Default::default()
        };
        let joint = det.couple_state(&balanced());
        let mut judged = 0;
        for seed in 0..100 {
            let o = product_outcome(&det, seed, true);
            // outcomes orthogonal to the state leave only roundoff
            if joint.contract(&o).unwrap().norm_sqr() < 1e-12 {
                continue;
            }
            judged += 1;
            let p = pattern_conditional(&f, &joint, &o).unwrap();
            assert!(fringe_visibility(&p, DEFAULT_WINDOW).unwrap() <= 1e-6);
        }
        assert!(judged > 10, "{judged}");
    }

    #[test]
    fn bolometer_coherence_survives_in_the_global_state() {
        // A full-control readout (arbitrary superpositions of cold and hot
        // molecule states) does bring fringes back.
        let f = gaussian_slit_field(&SlitGeometry::default(), &ScreenGrid::default()).unwrap();
        let det = Bolometer {
            p_hit: 1.0,
            n_molecules: 4,
            ..Default::default()
        };
        let joint = det.couple_state(&balanced());
        let best = (0..100)
            .map(|seed| {
                let o = product_outcome(&det, seed, false);
                fringe_visibility(&pattern_conditional(&f, &joint, &o).unwrap(), DEFAULT_WINDOW).unwrap()
            })
            .fold(0.0, f64::max);
        assert!(best > 0.1, "{best}");
    }

    #[test]
    fn molecule_overlap_visibility_closed_form() {
        // ρ_LR = ½⟨d_R|u⟩ with d_R = (αb + βu)/√(1+2αβc)
        for &oc in &[0.0, 0.2, 0.5, 0.8, 1.0] {
            for &p in &[0.1, 0.5, 0.9] {
                let det = MoleculeDetector {
                    overlap_c: oc,
                    ..MoleculeDetector::with_hit_probability(p)
                };
                let (a, b) = (det.alpha, det.beta);
                let want = (b + a * oc) / (1.0 + 2.0 * a * b * oc).sqrt();
                let s = couple_molecule(&balanced(), &det).unwrap();
                let v = coherence_visibility(s.state()).unwrap();
                assert!((v - want).abs() < 1e-12, "c={oc} p={p}: {v} vs {want}");
                assert!(v <= 1.0 + 1e-12);
            }
        }
    }

    impl Bolometer {
        fn couple_state(&self, atom: &StateVector) -> StateVector {
            DetectorModel::Bolometer(*self).couple(atom).unwrap().into_state()
        }
    }
}

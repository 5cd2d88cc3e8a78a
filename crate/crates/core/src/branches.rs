//! Branch bookkeeping: record-based decomposition of a coupled state, the
//! arrow + cat observer chain, Born weights and seeded outcome sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{CoupledState, ObserverStage, Reading};
use crate::exec::{map_range, Execution};
use crate::hilbert::{random_unit_in_range, StateVector, C64};
use crate::optics::{operator_density, PathField};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result, ATOM};

pub const ARROW: &str = "arrow";
pub const CAT: &str = "cat";

/// Tolerance for the decomposition invariants.
pub const DECOMPOSITION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arrow {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CatState {
    SawL,
    SawR,
    EyesClosedL,
    EyesClosedR,
}

impl CatState {
    fn block(self) -> usize {
        match self {
            CatState::SawL => 0,
            CatState::SawR => 1,
            CatState::EyesClosedL => 2,
            CatState::EyesClosedR => 3,
        }
    }
}

/// Macroscopic label of a branch. Arrow and cat are present only once the
/// observer chain is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MacroLabel {
    pub detector: Reading,
    pub arrow: Option<Arrow>,
    pub cat: Option<CatState>,
}

impl MacroLabel {
    fn for_stage(detector: Reading, stage: ObserverStage) -> MacroLabel {
        let left = detector == Reading::Cold;
        let arrow = if left { Arrow::Left } else { Arrow::Right };
        let (arrow, cat) = match stage {
            ObserverStage::Absent => (None, None),
            ObserverStage::Watching => (Some(arrow), Some(if left { CatState::SawL } else { CatState::SawR })),
            ObserverStage::EyesClosed => (
                Some(arrow),
                Some(if left {
                    CatState::EyesClosedL
                } else {
                    CatState::EyesClosedR
                }),
            ),
        };
        MacroLabel { detector, arrow, cat }
    }
}

impl fmt::Display for MacroLabel {
    /// `C`, `H`, or with observers e.g. `H/R/SawR`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.detector {
            Reading::Cold => "C",
            Reading::Hot => "H",
        })?;
        if let Some(a) = self.arrow {
            write!(f, "/{}", if a == Arrow::Left { "L" } else { "R" })?;
        }
        if let Some(c) = self.cat {
            write!(f, "/{c:?}")?;
        }
        Ok(())
    }
}

/// A partial label: unset fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelQuery {
    pub detector: Option<Reading>,
    pub arrow: Option<Arrow>,
    pub cat: Option<CatState>,
}

impl LabelQuery {
    pub fn arrow(a: Arrow) -> Self {
        LabelQuery {
            arrow: Some(a),
            ..Default::default()
        }
    }

    pub fn detector(r: Reading) -> Self {
        LabelQuery {
            detector: Some(r),
            ..Default::default()
        }
    }

    pub fn matches(&self, l: &MacroLabel) -> bool {
        self.detector.is_none_or(|d| d == l.detector)
            && self.arrow.is_none_or(|a| l.arrow == Some(a))
            && self.cat.is_none_or(|c| l.cat == Some(c))
    }
}

impl From<MacroLabel> for LabelQuery {
    fn from(l: MacroLabel) -> Self {
        LabelQuery {
            detector: Some(l.detector),
            arrow: l.arrow,
            cat: l.cat,
        }
    }
}

/// How terms are grouped into branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    /// One branch per macroscopic detector reading (cold line, hot line).
    Macro2,
    /// One branch per record: the cold record and each hot configuration.
    Micro,
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "macro2" | "macro" => Ok(Grouping::Macro2),
            "micro" => Ok(Grouping::Micro),
            _ => Err(Error::config(format!("unknown grouping `{s}` (expected macro2 or micro)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub label: MacroLabel,
    /// Hot configuration number in the micro grouping.
    pub config: Option<usize>,
    pub weight: f64,
    pub component: StateVector,
}

impl BranchRecord {
    /// Display name: the label, with the configuration number appended to
    /// the detector letter (`H3/R/SawR`).
    pub fn name(&self) -> String {
        let label = self.label.to_string();
        match self.config {
            Some(n) => format!("{}{n}{}", &label[..1], &label[1..]),
            None => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchDecomposition {
    pub branches: Vec<BranchRecord>,
    pub grouping: Grouping,
}

impl BranchDecomposition {
    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight).collect()
    }

    /// Sum of the branch components.
    pub fn reconstruct(&self) -> Result<StateVector> {
        let first = self
            .branches
            .first()
            .ok_or_else(|| Error::Invariant("decomposition has no branches".into()))?;
        let mut acc = StateVector::zeros(first.component.factors().to_vec())?;
        for b in &self.branches {
            acc = acc.add(&b.component)?;
        }
        Ok(acc)
    }

    /// Largest `|⟨c_i|c_j⟩|` over `i ≠ j`.
    pub fn max_overlap(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.branches.iter().enumerate() {
            for b in &self.branches[i + 1..] {
                worst = worst.max(a.component.inner(&b.component)?.norm());
            }
        }
        Ok(worst)
    }
}

/// Cat basis layout: four blocks of `micro_dim` states (saw-L, saw-R,
/// eyes-closed-L, eyes-closed-R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverChain {
    pub micro_dim: usize,
    pub seed: u64,
}

impl Default for ObserverChain {
    fn default() -> Self {
        ObserverChain { micro_dim: 2, seed: 7 }
    }
}

impl ObserverChain {
    pub fn cat_dim(&self) -> usize {
        4 * self.micro_dim
    }

    fn block(&self, c: CatState) -> Range<usize> {
        let start = c.block() * self.micro_dim;
        start..start + self.micro_dim
    }

    /// Microscopic cat state for record `k`, inside the block of `c`.
    pub fn cat_state(&self, c: CatState, k: usize) -> Result<StateVector> {
        random_unit_in_range(CAT, self.cat_dim(), self.block(c), derive_seed(self.seed, k as u64))
    }
}

fn sum_components(comps: &[StateVector]) -> Result<StateVector> {
    let first = comps
        .first()
        .ok_or_else(|| Error::config("state has no records"))?;
    let mut acc = StateVector::zeros(first.factors().to_vec())?;
    for c in comps {
        acc = acc.add(c)?;
    }
    Ok(acc)
}

/// Lets an arrow read the detector and a cat look at the arrow: record `k`
/// becomes `c_k ⊗ |arrow⟩ ⊗ |cat_k⟩` with the arrow pointing L for the cold
/// record and R otherwise, and a per-record cat microstate drawn inside the
/// saw-L or saw-R block.
pub fn attach_observer_chain(joint: &CoupledState, chain: &ObserverChain) -> Result<CoupledState> {
    if chain.micro_dim == 0 {
        return Err(Error::config("cat micro_dim must be ≥ 1"));
    }
    if !joint.has_detector() {
        return Err(Error::config("observer chain needs a which-path detector to read"));
    }
    if joint.observers() != ObserverStage::Absent || joint.state().has_factor(ARROW) || joint.state().has_factor(CAT) {
        return Err(Error::config("observer chain already attached"));
    }
    if joint.record_residual()? > DECOMPOSITION_TOL {
        return Err(Error::config("detector records do not span the state"));
    }
    let comps = joint.components()?;
    let terms = comps
        .iter()
        .zip(joint.records())
        .enumerate()
        .map(|(k, (c, rec))| {
            let label = MacroLabel::for_stage(rec.reading, ObserverStage::Watching);
            let arrow = StateVector::basis(ARROW, 2, if label.arrow == Some(Arrow::Left) { 0 } else { 1 })?;
            let cat = chain.cat_state(label.cat.expect("watching stage has a cat"), k)?;
            c.tensor(&arrow)?.tensor(&cat)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoupledState::from_parts(
        sum_components(&terms)?,
        joint.records().to_vec(),
        ObserverStage::Watching,
    ))
}

/// Swaps the saw and eyes-closed blocks of the cat factor.
fn swap_eyes(state: &StateVector, chain: &ObserverChain) -> Result<StateVector> {
    let d = chain.cat_dim();
    match state.factor(CAT) {
        Some(f) if f.dim == d => {}
        _ => return Err(Error::config(format!("no `{CAT}` factor of dimension {d}"))),
    }
    let shift = 2 * chain.micro_dim;
    let perm = DMatrix::from_fn(d, d, |r, c| {
        if r == (c + shift) % d {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    state.apply(&[CAT], &perm)
}

/// Moves every cat microstate from its saw block to the matching
/// eyes-closed block: the cat is entangled with the outcome but has not
/// looked yet. Weights are untouched.
pub fn attach_closed_eyes(joint: &CoupledState, chain: &ObserverChain) -> Result<CoupledState> {
    if joint.observers() != ObserverStage::Watching {
        return Err(Error::config("eyes can only be closed on an attached, watching observer chain"));
    }
    Ok(CoupledState::from_parts(
        swap_eyes(joint.state(), chain)?,
        joint.records().to_vec(),
        ObserverStage::EyesClosed,
    ))
}

/// Inverse of [`attach_closed_eyes`].
pub fn open_eyes(joint: &CoupledState, chain: &ObserverChain) -> Result<CoupledState> {
    if joint.observers() != ObserverStage::EyesClosed {
        return Err(Error::config("cat's eyes are not closed"));
    }
    Ok(CoupledState::from_parts(
        swap_eyes(joint.state(), chain)?,
        joint.records().to_vec(),
        ObserverStage::Watching,
    ))
}

/// Splits the state into branches by detector record and checks the
/// decomposition invariants (reconstruction, orthogonality, unit total
/// weight).
pub fn decompose(joint: &CoupledState, grouping: Grouping) -> Result<BranchDecomposition> {
    let comps = joint.components()?;
    let stage = joint.observers();
    let mut branches: Vec<BranchRecord> = Vec::new();
    for (c, rec) in comps.into_iter().zip(joint.records()) {
        let label = MacroLabel::for_stage(rec.reading, stage);
        match grouping {
            Grouping::Micro => branches.push(BranchRecord {
                label,
                config: rec.config,
                weight: 0.0,
                component: c,
            }),
            Grouping::Macro2 => match branches.iter_mut().find(|b| b.label == label) {
                Some(b) => b.component = b.component.add(&c)?,
                None => branches.push(BranchRecord {
                    label,
                    config: None,
                    weight: 0.0,
                    component: c,
                }),
            },
        }
    }
    for b in &mut branches {
        b.weight = b.component.norm_sqr();
    }
    let d = BranchDecomposition { branches, grouping };

    let residual = d.reconstruct()?.max_abs_diff(joint.state())?;
    if residual > DECOMPOSITION_TOL {
        return Err(Error::Invariant(format!(
            "branches do not reconstruct the state (residual {residual:e})"
        )));
    }
    let overlap = d.max_overlap()?;
    if overlap > DECOMPOSITION_TOL {
        return Err(Error::Invariant(format!("branches overlap by {overlap:e}")));
    }
    let total: f64 = d.weights().iter().sum();
    if (total - 1.0).abs() > DECOMPOSITION_TOL {
        return Err(Error::Invariant(format!("branch weights sum to {total}")));
    }
    Ok(d)
}

/// Largest screen density carried by cross terms between different branches,
/// `max_x |Σ_{i≠j} ⟨x| tr_rest |c_i⟩⟨c_j| |x⟩|`, on the full state's scale.
pub fn cross_branch_interference(d: &BranchDecomposition, field: &PathField) -> Result<f64> {
    if d.branches.len() < 2 {
        return Ok(0.0);
    }
    let joint = d.reconstruct()?;
    let dim = joint
        .factor(ATOM)
        .ok_or_else(|| Error::config(format!("state has no `{ATOM}` factor")))?
        .dim;
    let mut op = DMatrix::<C64>::zeros(dim, dim);
    for (i, a) in d.branches.iter().enumerate() {
        for (j, b) in d.branches.iter().enumerate() {
            if i != j {
                op += a.component.reduced_cross(&b.component, &[ATOM])?;
            }
        }
    }
    let density = operator_density(field, &joint, op)?;
    Ok(density.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Born weight of the branches matching `query`.
pub fn self_location_probability(d: &BranchDecomposition, query: impl Into<LabelQuery>) -> Result<f64> {
    let q = query.into();
    let mut found = false;
    let mut w = 0.0;
    for b in d.branches.iter().filter(|b| q.matches(&b.label)) {
        found = true;
        w += b.weight;
    }
    if found {
        Ok(w)
    } else {
        Err(Error::Query(format!("no branch matches {q:?}")))
    }
}

/// Trials drawn per independent RNG stream.
pub const SAMPLE_CHUNK: usize = 8192;

/// Outcome counts keyed by branch name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub trials: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
}

impl SampleCounts {
    pub fn count(&self, name: &str) -> u64 {
        self.counts.get(name).copied().unwrap_or(0)
    }

    pub fn frequency(&self, name: &str) -> f64 {
        self.count(name) as f64 / self.trials as f64
    }
}

/// I.i.d. draws from the branch weights. Trials are split into chunks of
/// [`SAMPLE_CHUNK`], chunk `k` using stream `k` of `seed`, so the counts do
/// not depend on the execution mode.
pub fn sample_outcomes(d: &BranchDecomposition, trials: u64, seed: u64, exec: Execution) -> Result<SampleCounts> {
    if trials == 0 {
        return Err(Error::config("trials must be ≥ 1"));
    }
    let names: Vec<String> = d.branches.iter().map(BranchRecord::name).collect();
    let mut cumulative = Vec::with_capacity(d.branches.len());
    let mut acc = 0.0;
    for b in &d.branches {
        acc += b.weight;
        cumulative.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::config("branch weights are all zero"));
    }
    let chunk = SAMPLE_CHUNK as u64;
    let n_chunks = trials.div_ceil(chunk) as usize;
    let per_chunk = map_range(exec, n_chunks, |k| {
        let n = chunk.min(trials - k as u64 * chunk);
        let mut rng = stream(seed, k as u64);
        let mut counts = vec![0u64; cumulative.len()];
        for _ in 0..n {
            let u = rng.random::<f64>() * acc;
            let i = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            counts[i] += 1;
        }
        counts
    });
    let mut counts: BTreeMap<String, u64> = names.iter().map(|n| (n.clone(), 0)).collect();
    for chunk_counts in per_chunk {
        for (name, c) in names.iter().zip(chunk_counts) {
            *counts.get_mut(name).expect("name registered") += c;
        }
    }
    Ok(SampleCounts { trials, seed, counts })
}

/// Pearson chi-squared statistic of `counts` against the branch weights,
/// over branches with nonzero weight, with its degrees of freedom.
pub fn chi_squared(d: &BranchDecomposition, counts: &SampleCounts) -> (f64, usize) {
    let total: f64 = d.weights().iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for b in d.branches.iter().filter(|b| b.weight > 0.0) {
        let expected = counts.trials as f64 * b.weight / total;
        let diff = counts.count(&b.name()) as f64 - expected;
        stat += diff * diff / expected;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::detectors::{Bolometer, DetectorModel, MoleculeDetector, QubitDetector};
    use crate::optics::{coherence_visibility, path_state};
    use proptest::prelude::*;

    fn model() -> impl Strategy<Value = DetectorModel> {
        prop_oneof![
            (0.0..=1.0f64).prop_map(|e| DetectorModel::Qubit(QubitDetector {
                efficiency: e,
                ..Default::default()
            })),
            (0.0..=1.0f64, 0.0..0.99f64).prop_map(|(p, c)| DetectorModel::Molecule(MoleculeDetector {
                overlap_c: c,
                mol_dim: 3,
                ..MoleculeDetector::with_hit_probability(p)
            })),
            (1usize..5, 0.05..=1.0f64, 0.0..=1.0f64).prop_map(|(n, p, k)| DetectorModel::Bolometer(Bolometer {
                n_molecules: n,
                p_hit: p,
                ext_dim: 2,
                ext_overlap_kappa: k,
                ..Default::default()
            })),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn decomposition_invariants(pl in 0.0..=1.0f64, m in model(), seed in any::<u64>(), micro in 1usize..3) {
            let a = path_state(C64::new(pl.sqrt(), 0.0), C64::new((1.0 - pl).sqrt(), 0.0)).unwrap();
            let bare = m.couple(&a).unwrap();
            let chain = ObserverChain { micro_dim: micro, seed };
            let watching = attach_observer_chain(&bare, &chain).unwrap();
            let closed = attach_closed_eyes(&watching, &chain).unwrap();
            let v0 = coherence_visibility(bare.state()).unwrap();
            for s in [&watching, &closed] {
                prop_assert!((s.state().norm_sqr() - 1.0).abs() < 1e-12);
                prop_assert!(coherence_visibility(s.state()).unwrap() <= v0 + 1e-12);
            }
            for g in [Grouping::Macro2, Grouping::Micro] {
                let w0 = decompose(&bare, g).unwrap().weights();
                for s in [&watching, &closed] {
                    let d = decompose(s, g).unwrap();
                    prop_assert!(d.reconstruct().unwrap().max_abs_diff(s.state()).unwrap() <= 1e-9);
                    prop_assert!(d.max_overlap().unwrap() <= 1e-9);
                    for (x, y) in w0.iter().zip(d.weights()) {
                        prop_assert!((x - y).abs() < 1e-12);
                    }
                }
            }
            let macro2 = decompose(&bare, Grouping::Macro2).unwrap();
            let micro_d = decompose(&bare, Grouping::Micro).unwrap();
            for b in &macro2.branches {
                let summed: f64 = micro_d.branches.iter().filter(|m| m.label == b.label).map(|m| m.weight).sum();
                prop_assert!((summed - b.weight).abs() < 1e-12);
            }
        }
    }
}

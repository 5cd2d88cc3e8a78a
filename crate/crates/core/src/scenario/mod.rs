//! Runnable scenarios: a JSON document binding an interferometer, a detector,
//! optional observers and sampling, and optionally a Bell experiment.
//!
//! [`evaluate`] computes everything in memory and runs the invariant checks;
//! [`write`] turns an [`Evaluation`] into files. Output bytes depend only on
//! the scenario and its seed.

mod output;

use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bell::{self, JointStatistics, MeasurementAxis, Order};
use crate::branches::{self, Arrow, Grouping, LabelQuery, ObserverChain, SampleCounts};
use crate::detectors::{self, DetectorModel, Reading, ReadoutBasis};
use crate::hilbert::C64;
use crate::optics::{self, ScreenGrid, ScreenPattern, SlitGeometry, DEFAULT_WINDOW};
use crate::{Error, Execution, Result};

pub use output::{write, OutputFormat, RunReport};

/// A complex amplitude as magnitude and phase (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub magnitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Amplitude {
    pub fn to_complex(self) -> C64 {
        C64::from_polar(self.magnitude, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomAmplitudes {
    pub amp_left: Amplitude,
    pub amp_right: Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Observers {
    pub attach_arrow_cat: bool,
    pub eyes_closed: bool,
    /// Cat microstates per block.
    pub micro_dim: usize,
    pub seed: u64,
}

impl Default for Observers {
    fn default() -> Self {
        let chain = ObserverChain::default();
        Observers {
            attach_arrow_cat: false,
            eyes_closed: false,
            micro_dim: chain.micro_dim,
            seed: chain.seed,
        }
    }
}

impl Observers {
    pub fn chain(&self) -> ObserverChain {
        ObserverChain {
            micro_dim: self.micro_dim,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub trials: u64,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { trials: 0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellConfig {
    /// "Me": the party whose marginal is checked.
    pub local: MeasurementAxis,
    /// Settings tried by "you".
    pub remote: Vec<MeasurementAxis>,
    pub orders: Vec<Order>,
    /// Random coplanar CHSH quadruples to try (0 to skip).
    pub chsh_sweep: usize,
}

impl Default for BellConfig {
    fn default() -> Self {
        BellConfig {
            local: MeasurementAxis::Z,
            remote: vec![MeasurementAxis::X, MeasurementAxis::Y, MeasurementAxis::Z],
            orders: vec![Order::RemoteFirst, Order::LocalFirst],
            chsh_sweep: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub geometry: SlitGeometry,
    #[serde(default)]
    pub grid: ScreenGrid,
    #[serde(default)]
    pub atom: Option<AtomAmplitudes>,
    #[serde(default)]
    pub detector: Option<DetectorModel>,
    #[serde(default)]
    pub readout: Option<ReadoutBasis>,
    #[serde(default)]
    pub observers: Observers,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub bell: Option<BellConfig>,
}

const BUILTINS: &[(&str, &str)] = &[
    ("fig1a", include_str!("../../scenarios/fig1a.json")),
    ("fig1b", include_str!("../../scenarios/fig1b.json")),
    ("fig1c", include_str!("../../scenarios/fig1c.json")),
    ("fig1d", include_str!("../../scenarios/fig1d.json")),
    ("fig1d-ideal", include_str!("../../scenarios/fig1d-ideal.json")),
    ("eraser", include_str!("../../scenarios/eraser.json")),
    ("born", include_str!("../../scenarios/born.json")),
    ("eyes-closed", include_str!("../../scenarios/eyes-closed.json")),
    ("bell", include_str!("../../scenarios/bell.json")),
];

/// Names and one-line descriptions of the compiled-in scenarios, in a fixed
/// order.
pub fn list_scenarios() -> Vec<(String, String)> {
    BUILTINS
        .iter()
        .map(|(name, src)| {
            let s = Scenario::parse(src, name).expect("built-in scenarios are valid");
            (s.name, s.description)
        })
        .collect()
}

impl Scenario {
    /// Parses and validates a scenario document. `origin` names the source in
    /// error messages.
    pub fn parse(src: &str, origin: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(src).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        s.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{origin}: {m}")),
            other => other,
        })?;
        Ok(s)
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, src)| Scenario::parse(src, n).expect("built-in scenarios are valid"))
    }

    /// A built-in name, or else a path to a JSON file.
    pub fn load(name_or_path: &str) -> Result<Scenario> {
        if let Some(s) = Scenario::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        let src = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "`{name_or_path}` is neither a built-in scenario nor a readable file ({e})"
            ))
        })?;
        Scenario::parse(&src, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("scenario name is empty"));
        }
        self.geometry.validate()?;
        self.grid.validate()?;
        if let Some(a) = &self.atom {
            for amp in [a.amp_left, a.amp_right] {
                if !(amp.magnitude >= 0.0 && amp.magnitude.is_finite() && amp.phase.is_finite()) {
                    return Err(Error::config("atom amplitudes need finite, nonnegative magnitudes"));
                }
            }
            let n2 = a.amp_left.magnitude.powi(2) + a.amp_right.magnitude.powi(2);
            if (n2 - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "atom amplitudes are not normalized: |amp_left|² + |amp_right|² = {n2}"
                )));
            }
        }
        if let Some(d) = &self.detector {
            if self.atom.is_none() {
                return Err(Error::config("a detector needs an `atom` section"));
            }
            d.validate()?;
        }
        if self.readout.is_some() && !matches!(self.detector, Some(DetectorModel::Qubit(_))) {
            return Err(Error::config("`readout` applies only to a qubit detector"));
        }
        if self.observers.attach_arrow_cat {
            if self.detector.is_none() {
                return Err(Error::config("observers need a detector to read"));
            }
            if self.readout.is_some() {
                return Err(Error::config("`readout` and observers cannot be combined"));
            }
            if self.observers.micro_dim == 0 {
                return Err(Error::config("observers.micro_dim must be ≥ 1"));
            }
        } else if self.observers.eyes_closed {
            return Err(Error::config("`eyes_closed` requires `attach_arrow_cat`"));
        }
        if self.sampling.trials > 0 && self.detector.is_none() {
            return Err(Error::config("sampling needs a detector"));
        }
        if let Some(b) = &self.bell {
            if b.remote.is_empty() || b.orders.is_empty() {
                return Err(Error::config("bell needs at least one remote axis and one order"));
            }
        }
        if self.atom.is_none() && self.bell.is_none() {
            return Err(Error::config("scenario has neither an `atom` nor a `bell` section"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampling.seed = seed;
        self
    }
}

/// One invariant check and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.to_string(),
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub grouping: String,
    pub name: String,
    pub detector: String,
    pub arrow: String,
    pub cat: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternVisibility {
    pub label: String,
    pub fringe_visibility: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfLocation {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub description: String,
    pub detector_efficiency: Option<f64>,
    pub coherence_visibility: Option<f64>,
    pub patterns: Vec<PatternVisibility>,
    pub self_location: Option<SelfLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellRow {
    pub remote: MeasurementAxis,
    pub local: MeasurementAxis,
    pub statistics: JointStatistics,
    /// Closed form `−a·b`.
    pub expected_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshSweep {
    pub quadruples: usize,
    pub seed: u64,
    pub max_abs_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellReport {
    pub settings: Vec<BellRow>,
    pub orders: Vec<Order>,
    pub max_marginal_deviation: f64,
    pub chsh_axes: [MeasurementAxis; 4],
    pub chsh: f64,
    pub chsh_sweep: Option<ChshSweep>,
}

/// Everything a scenario computes, before any file is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scenario: Scenario,
    pub patterns: Vec<ScreenPattern>,
    pub branches: Vec<BranchRow>,
    pub sampling: Option<SampleCounts>,
    pub bell: Option<BellReport>,
    pub summary: Summary,
    pub checks: Vec<Check>,
}

impl Evaluation {
    pub fn pattern(&self, label: &str) -> Option<&ScreenPattern> {
        self.patterns.iter().find(|p| p.label == label)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Pattern names for the cold and hot records of each detector.
fn record_labels(det: &DetectorModel) -> [&'static str; 2] {
    match det {
        DetectorModel::Qubit(_) => ["cond:0", "cond:1"],
        DetectorModel::Molecule(_) => ["cond:unbumped", "cond:bumped"],
        DetectorModel::Bolometer(_) => ["cond:C", "cond:H"],
    }
}

fn reading_name(r: Reading) -> &'static str {
    match r {
        Reading::Cold => "C",
        Reading::Hot => "H",
    }
}

fn sum_rule(total: &ScreenPattern, parts: &[&ScreenPattern]) -> f64 {
    (0..total.density.len())
        .map(|i| (total.density[i] - parts.iter().map(|p| p.density[i]).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

fn evaluate_interferometer(
    s: &Scenario,
    atom: &AtomAmplitudes,
    exec: Execution,
    ev: &mut Evaluation,
) -> Result<()> {
    let (cl, cr) = (atom.amp_left.to_complex(), atom.amp_right.to_complex());
    let input = optics::path_state(cl, cr)?;
    let kick = s.detector.as_ref().map_or(0.0, DetectorModel::backaction_kick);
    let field = optics::gaussian_slit_field(&s.geometry, &s.grid)?
        .with_kick(kick)
        .with_execution(exec);

    let mut coupled = match &s.detector {
        Some(d) => d.couple(&input)?,
        None => detectors::CoupledState::unentangled(input),
    };
    let chain = s.observers.chain();
    if s.observers.attach_arrow_cat {
        coupled = branches::attach_observer_chain(&coupled, &chain)?;
        if s.observers.eyes_closed {
            coupled = branches::attach_closed_eyes(&coupled, &chain)?;
        }
    }
    let state = coupled.state();

    ev.checks.push(Check::at_most("norm", (state.norm_sqr() - 1.0).abs(), 1e-12));
    let rho = state.partial_trace(&[crate::ATOM])?;
    ev.checks.push(Check {
        name: "atom-density-matrix".into(),
        passed: rho.validate(1e-10).is_ok(),
        value: rho.hermiticity_error(),
        tolerance: 1e-10,
    });

    let total = optics::pattern_ignore(&field, state)?;
    let mut patterns = vec![total.clone()];

    let macro2 = branches::decompose(&coupled, Grouping::Macro2)?;
    let micro = branches::decompose(&coupled, Grouping::Micro)?;
    if let Some(det) = &s.detector {
        let labels = record_labels(det);
        let conds = macro2
            .branches
            .iter()
            .map(|b| {
                let label = labels[usize::from(b.label.detector == Reading::Hot)];
                optics::pattern_component(&field, state, &b.component, label)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&ScreenPattern> = conds.iter().collect();
        ev.checks.push(Check::at_most("sum-rule", sum_rule(&total, &refs), 1e-9));
        patterns.extend(conds);
    }
    if let Some(rb) = &s.readout {
        let vectors = rb.vectors()?;
        let conds = vectors
            .iter()
            .zip(rb.labels())
            .map(|(v, l)| Ok(optics::pattern_conditional(&field, state, v)?.with_label(format!("cond:{l}"))))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&ScreenPattern> = conds.iter().collect();
        ev.checks.push(Check::at_most("sum-rule-readout", sum_rule(&total, &refs), 1e-9));
        patterns.extend(conds);
    }

    for d in [&macro2, &micro] {
        let grouping = match d.grouping {
            Grouping::Macro2 => "macro2",
            Grouping::Micro => "micro",
        };
        for b in &d.branches {
            ev.branches.push(BranchRow {
                grouping: grouping.into(),
                name: b.name(),
                detector: reading_name(b.label.detector).into(),
                arrow: b.label.arrow.map_or("", |a| if a == Arrow::Left { "L" } else { "R" }).into(),
                cat: b.label.cat.map(|c| format!("{c:?}")).unwrap_or_default(),
                weight: b.weight,
            });
        }
    }
    let weight_sum: f64 = macro2.weights().iter().sum();
    ev.checks.push(Check::at_most("branch-weights", (weight_sum - 1.0).abs(), 1e-9));
    let micro_sum: f64 = micro.weights().iter().sum();
    ev.checks.push(Check::at_most("grouping-consistency", (micro_sum - weight_sum).abs(), 1e-12));
    ev.checks.push(Check::at_most(
        "cross-branch-interference",
        branches::cross_branch_interference(&macro2, &field)?,
        1e-9,
    ));

    if s.observers.attach_arrow_cat {
        ev.summary.self_location = Some(SelfLocation {
            left: branches::self_location_probability(&macro2, LabelQuery::arrow(Arrow::Left)).unwrap_or(0.0),
            right: branches::self_location_probability(&macro2, LabelQuery::arrow(Arrow::Right)).unwrap_or(0.0),
        });
    }
    if s.sampling.trials > 0 {
        let counts = branches::sample_outcomes(&macro2, s.sampling.trials, s.sampling.seed, exec)?;
        let drawn: u64 = counts.counts.values().sum();
        ev.checks.push(Check::at_most("sample-count", drawn.abs_diff(counts.trials) as f64, 0.0));
        ev.sampling = Some(counts);
    }

    ev.summary.detector_efficiency = s.detector.as_ref().map(detectors::detector_efficiency);
    ev.summary.coherence_visibility = optics::coherence_visibility(state).ok();
    ev.summary.patterns = patterns
        .iter()
        .map(|p| {
            Ok(PatternVisibility {
                label: p.label.clone(),
                fringe_visibility: optics::fringe_visibility(p, DEFAULT_WINDOW)?,
                area: p.area(),
            })
        })
        .collect::<Result<_>>()?;
    ev.patterns = patterns;
    Ok(())
}

fn evaluate_bell(cfg: &BellConfig, seed: u64, exec: Execution, ev: &mut Evaluation) -> Result<()> {
    let settings = cfg
        .remote
        .iter()
        .map(|r| {
            Ok(BellRow {
                remote: *r,
                local: cfg.local,
                statistics: bell::joint_statistics(r, &cfg.local)?,
                expected_correlation: -r.dot(&cfg.local),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let corr_err = settings
        .iter()
        .map(|row| (row.statistics.correlation - row.expected_correlation).abs())
        .fold(0.0, f64::max);
    let deviation = bell::no_signaling_check(&cfg.remote, &cfg.local, &cfg.orders)?;
    let axes = bell::standard_chsh_axes();
    let s = bell::chsh(&axes[0], &axes[1], &axes[2], &axes[3])?;
    let tsirelson = 2.0 * SQRT_2;

    ev.checks.push(Check::at_most("bell-correlation", corr_err, 1e-12));
    ev.checks.push(Check::at_most("no-signaling", deviation, 1e-12));
    ev.checks.push(Check::at_most("chsh-standard", (s.abs() - tsirelson).abs(), 1e-9));
    let sweep = if cfg.chsh_sweep > 0 {
        let m = bell::chsh_sweep(cfg.chsh_sweep, seed, exec)?;
        ev.checks.push(Check::at_most("tsirelson-bound", (m - tsirelson).max(0.0), 1e-9));
        Some(ChshSweep {
            quadruples: cfg.chsh_sweep,
            seed,
            max_abs_s: m,
        })
    } else {
        None
    };
    ev.bell = Some(BellReport {
        settings,
        orders: cfg.orders.clone(),
        max_marginal_deviation: deviation,
        chsh_axes: axes,
        chsh: s,
        chsh_sweep: sweep,
    });
    Ok(())
}

/// Runs every computation and invariant check of `s`.
pub fn evaluate(s: &Scenario, exec: Execution) -> Result<Evaluation> {
    s.validate()?;
    let mut ev = Evaluation {
        scenario: s.clone(),
        patterns: Vec::new(),
        branches: Vec::new(),
        sampling: None,
        bell: None,
        summary: Summary {
            scenario: s.name.clone(),
            description: s.description.clone(),
            detector_efficiency: None,
            coherence_visibility: None,
            patterns: Vec::new(),
            self_location: None,
        },
        checks: Vec::new(),
    };
    if let Some(atom) = &s.atom {
        evaluate_interferometer(s, atom, exec, &mut ev)?;
    }
    if let Some(cfg) = &s.bell {
        evaluate_bell(cfg, s.sampling.seed, exec, &mut ev)?;
    }
    Ok(ev)
}

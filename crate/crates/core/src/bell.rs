//! A singlet pair measured by two observers, each of whom records the result
//! in a two-state register instead of collapsing anything.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{map_range, Execution};
use crate::hilbert::{StateVector, C64};
use crate::rng::stream;
use crate::{Error, Result};

pub const YOU: &str = "you";
pub const ME: &str = "me";
pub const YOU_OBS: &str = "you-obs";
pub const ME_OBS: &str = "me-obs";

/// Register index recording "spin up along the axis". It doubles as the
/// ready state; the event log says whether a register holds a record.
pub const SAW_UP: usize = 0;
pub const SAW_DOWN: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    You,
    Me,
}

impl Party {
    pub fn spin(self) -> &'static str {
        match self {
            Party::You => YOU,
            Party::Me => ME,
        }
    }

    pub fn observer(self) -> &'static str {
        match self {
            Party::You => YOU_OBS,
            Party::Me => ME_OBS,
        }
    }

    pub fn other(self) -> Party {
        match self {
            Party::You => Party::Me,
            Party::Me => Party::You,
        }
    }
}

/// Which party measures first in a no-signaling check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    RemoteFirst,
    LocalFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MeasurementAxis {
    v: [f64; 3],
}

impl TryFrom<[f64; 3]> for MeasurementAxis {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        MeasurementAxis::new(v[0], v[1], v[2])
    }
}

impl From<MeasurementAxis> for [f64; 3] {
    fn from(a: MeasurementAxis) -> Self {
        a.v
    }
}

impl MeasurementAxis {
    pub const X: MeasurementAxis = MeasurementAxis { v: [1.0, 0.0, 0.0] };
    pub const Y: MeasurementAxis = MeasurementAxis { v: [0.0, 1.0, 0.0] };
    pub const Z: MeasurementAxis = MeasurementAxis { v: [0.0, 0.0, 1.0] };

    /// A unit axis; the norm must be 1 within 1e-12.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("measurement axis has norm {n}, expected 1")));
        }
        Ok(MeasurementAxis { v: [x, y, z] })
    }

    /// Polar angle from z, azimuth from x.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        MeasurementAxis {
            v: [st * cp, st * sp, ct],
        }
    }

    /// Axis at angle `t` from z in the x–z plane.
    pub fn in_xz_plane(t: f64) -> Self {
        MeasurementAxis::from_angles(t, 0.0)
    }

    /// Haar-uniform direction on the sphere.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        MeasurementAxis::from_angles(z.acos(), phi)
    }

    pub fn components(&self) -> [f64; 3] {
        self.v
    }

    pub fn dot(&self, other: &MeasurementAxis) -> f64 {
        self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum()
    }

    /// `n·σ`.
    pub fn pauli(&self) -> DMatrix<C64> {
        let [x, y, z] = self.v;
        DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(z, 0.0), C64::new(x, -y), C64::new(x, y), C64::new(-z, 0.0)],
        )
    }

    /// `(1 + s n·σ)/2` for `s = ±1`.
    pub fn projector(&self, sign: f64) -> DMatrix<C64> {
        (DMatrix::identity(2, 2) + self.pauli() * C64::new(sign, 0.0)) * C64::new(0.5, 0.0)
    }
}

/// `P₊ ⊗ 1 + P₋ ⊗ X` on (spin, register): the register flips to "saw down"
/// exactly when the spin is down along `axis`. Hermitian and its own inverse.
pub fn measurement_unitary(axis: &MeasurementAxis) -> DMatrix<C64> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let flip = DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
    axis.projector(1.0).kronecker(&DMatrix::identity(2, 2)) + axis.projector(-1.0).kronecker(&flip)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPartyState {
    state: StateVector,
    log: Vec<(Party, MeasurementAxis)>,
}

impl TwoPartyState {
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn event_log(&self) -> &[(Party, MeasurementAxis)] {
        &self.log
    }

    pub fn has_measured(&self, p: Party) -> bool {
        self.log.iter().any(|(q, _)| *q == p)
    }
}

/// `(|↑↓⟩ − |↓↑⟩)/√2` with both registers ready.
pub fn singlet() -> TwoPartyState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let spins = StateVector::new(
        vec![
            crate::Factor::new(YOU, 2).expect("valid factor"),
            crate::Factor::new(ME, 2).expect("valid factor"),
        ],
        vec![z, C64::new(h, 0.0), C64::new(-h, 0.0), z],
    )
    .expect("valid singlet");
    let ready = |name| StateVector::basis(name, 2, SAW_UP).expect("valid register");
    let state = spins
        .tensor(&ready(YOU_OBS))
        .and_then(|s| s.tensor(&ready(ME_OBS)))
        .expect("distinct factors");
    TwoPartyState { state, log: Vec::new() }
}

/// Entangles `party`'s register with its spin along `axis`. No amplitude is
/// removed.
pub fn measure_local(s: &TwoPartyState, party: Party, axis: &MeasurementAxis) -> Result<TwoPartyState> {
    if s.has_measured(party) {
        return Err(Error::Usage(format!("{party:?} has already measured")));
    }
    let state = s
        .state
        .apply(&[party.spin(), party.observer()], &measurement_unitary(axis))?;
    let mut log = s.log.clone();
    log.push((party, *axis));
    Ok(TwoPartyState { state, log })
}

/// Applies the same spin rotation `exp(−i t n·σ/2)` to both spins.
pub fn rotate_both(s: &TwoPartyState, axis: &MeasurementAxis, t: f64) -> Result<TwoPartyState> {
    let (sin, cos) = (t / 2.0).sin_cos();
    let u = DMatrix::identity(2, 2) * C64::new(cos, 0.0) - axis.pauli() * C64::new(0.0, sin);
    let state = s.state.apply(&[YOU], &u)?.apply(&[ME], &u)?;
    Ok(TwoPartyState { state, log: s.log.clone() })
}

/// `[P(saw up), P(saw down)]` read from `party`'s register.
pub fn local_marginal(s: &TwoPartyState, party: Party) -> Result<[f64; 2]> {
    if !s.has_measured(party) {
        return Err(Error::Usage(format!("{party:?} has not measured")));
    }
    let rho = s.state.partial_trace(&[party.observer()])?;
    Ok([rho.entry(SAW_UP, SAW_UP).re, rho.entry(SAW_DOWN, SAW_DOWN).re])
}

/// Branch weights `w[your record][my record]` once both have measured.
pub fn outcome_weights(s: &TwoPartyState) -> Result<[[f64; 2]; 2]> {
    if !(s.has_measured(Party::You) && s.has_measured(Party::Me)) {
        return Err(Error::Usage("both parties must measure first".into()));
    }
    let rho = s.state.partial_trace(&[YOU_OBS, ME_OBS])?;
    let mut w = [[0.0; 2]; 2];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rho.entry(2 * i + j, 2 * i + j).re;
        }
    }
    Ok(w)
}

/// Outcome probabilities for you measuring along `a` and me along `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStatistics {
    pub p_up_up: f64,
    pub p_up_down: f64,
    pub p_down_up: f64,
    pub p_down_down: f64,
    /// `Σ s_a s_b P(s_a, s_b)`.
    pub correlation: f64,
}

/// Measures a fresh singlet (you first) and reads the joint record weights.
pub fn joint_statistics(a: &MeasurementAxis, b: &MeasurementAxis) -> Result<JointStatistics> {
    let s = measure_local(&measure_local(&singlet(), Party::You, a)?, Party::Me, b)?;
    let w = outcome_weights(&s)?;
    Ok(JointStatistics {
        p_up_up: w[0][0],
        p_up_down: w[0][1],
        p_down_up: w[1][0],
        p_down_down: w[1][1],
        correlation: w[0][0] - w[0][1] - w[1][0] + w[1][1],
    })
}

/// Largest `|P_local(up) − ½|` over remote settings and orders. The local
/// party is "me"; "you" is remote.
pub fn no_signaling_check(remote: &[MeasurementAxis], local: &MeasurementAxis, orders: &[Order]) -> Result<f64> {
    if remote.is_empty() || orders.is_empty() {
        return Err(Error::config("no-signaling check needs remote axes and orders"));
    }
    let mut worst: f64 = 0.0;
    for axis in remote {
        for order in orders {
            let s = singlet();
            let s = match order {
                Order::RemoteFirst => measure_local(&measure_local(&s, Party::You, axis)?, Party::Me, local)?,
                Order::LocalFirst => measure_local(&measure_local(&s, Party::Me, local)?, Party::You, axis)?,
            };
            worst = worst.max((local_marginal(&s, Party::Me)?[0] - 0.5).abs());
        }
    }
    Ok(worst)
}

/// `E(a1,b1) + E(a1,b2) + E(a2,b1) − E(a2,b2)`.
pub fn chsh(a1: &MeasurementAxis, a2: &MeasurementAxis, b1: &MeasurementAxis, b2: &MeasurementAxis) -> Result<f64> {
    let e = |a, b| joint_statistics(a, b).map(|s| s.correlation);
    Ok(e(a1, b1)? + e(a1, b2)? + e(a2, b1)? - e(a2, b2)?)
}

/// Maximal-violation settings in the x–z plane: you at 0° and 90°, me at 45°
/// and −45° (the 135° axis with its outcome labels swapped, which the sign
/// pattern of [`chsh`] needs).
pub fn standard_chsh_axes() -> [MeasurementAxis; 4] {
    use std::f64::consts::FRAC_PI_4;
    [
        MeasurementAxis::in_xz_plane(0.0),
        MeasurementAxis::in_xz_plane(2.0 * FRAC_PI_4),
        MeasurementAxis::in_xz_plane(FRAC_PI_4),
        MeasurementAxis::in_xz_plane(-FRAC_PI_4),
    ]
}

/// Largest `|S|` over `n` random coplanar setting quadruples.
pub fn chsh_sweep(n: usize, seed: u64, exec: Execution) -> Result<f64> {
    let values = map_range(exec, n, |i| {
        let mut rng = stream(seed, i as u64);
        let mut ax = || MeasurementAxis::in_xz_plane(rng.random_range(0.0..std::f64::consts::TAU));
        let (a1, a2, b1, b2) = (ax(), ax(), ax(), ax());
        chsh(&a1, &a2, &b1, &b2).map(f64::abs)
    });
    values.into_iter().try_fold(0.0, |m: f64, v| v.map(|v| m.max(v)))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn axis() -> impl Strategy<Value = MeasurementAxis> {
        (-1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, phi)| MeasurementAxis::from_angles(z.acos(), phi))
    }

    proptest! {
        #[test]
        fn measurement_preserves_norm_and_is_reversible(a in axis(), b in axis(), you_first in any::<bool>()) {
            let (p, q) = if you_first { (Party::You, Party::Me) } else { (Party::Me, Party::You) };
            let s0 = singlet();
            let s1 = measure_local(&s0, p, &a).unwrap();
            let s2 = measure_local(&s1, q, &b).unwrap();
            prop_assert!((s1.state().norm() - 1.0).abs() < 1e-12);
            prop_assert!((s2.state().norm() - 1.0).abs() < 1e-12);
            let undone = s2
                .state()
                .apply(&[q.spin(), q.observer()], &measurement_unitary(&b))
                .unwrap()
                .apply(&[p.spin(), p.observer()], &measurement_unitary(&a))
                .unwrap();
            prop_assert!(undone.max_abs_diff(s0.state()).unwrap() < 1e-12);
        }

        #[test]
        fn marginals_are_local(local in axis(), remote in axis()) {
            let d = no_signaling_check(&[remote], &local, &[Order::RemoteFirst, Order::LocalFirst]).unwrap();
            prop_assert!(d <= 1e-12);
        }
    }
}

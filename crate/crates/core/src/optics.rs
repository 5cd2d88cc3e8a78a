//! Single-path wavefunctions on a mid-field screen and the probability
//! densities built from them.
//!
//! Lengths are in units of the initial slit width σ₀ and propagation distance
//! in units of the Gaussian spreading length, so a path launched with width
//! σ₀ has density width `σ₀·√(1+ζ²)` on the screen.
//!
//! Every pattern carries two curves: the full `density` and its incoherent
//! `envelope` (the single-path terms only). Their difference is the
//! interference term, and [`fringe_visibility`] is measured against the
//! envelope so that it is insensitive to the Gaussian envelope slope.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::exec::{map_range, Execution};
use crate::hilbert::{DensityMatrix, StateVector, C64};
use crate::{Error, Result, ATOM};

/// Basis index of the left path in the atom factor.
pub const LEFT: usize = 0;
/// Basis index of the right path.
pub const RIGHT: usize = 1;
/// Basis index of the kicked right path `R′`; only present when a detector
/// imparts back-action.
pub const RIGHT_KICKED: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitGeometry {
    /// Slit-centre separation in units of σ₀.
    pub separation: f64,
    /// Propagation distance in units of the spreading length.
    pub zeta: f64,
}

impl Default for SlitGeometry {
    fn default() -> Self {
        SlitGeometry {
            separation: 8.0,
            zeta: 3.0,
        }
    }
}

impl SlitGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::config(format!(
                "slit separation must be positive, got {}",
                self.separation
            )));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::config(format!("zeta must be ≥ 0, got {}", self.zeta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for ScreenGrid {
    fn default() -> Self {
        ScreenGrid {
            x_min: -30.0,
            x_max: 30.0,
            n: 2049,
        }
    }
}

impl ScreenGrid {
    pub fn validate(&self) -> Result<()> {
        if self.x_min >= self.x_max || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::config(format!(
                "screen grid needs x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n < 2 {
            return Err(Error::config(format!("screen grid needs n ≥ 2, got {}", self.n)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * (i as f64) / ((self.n - 1) as f64)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

/// The two single-path wavefunctions sampled on the screen.
#[derive(Debug, Clone, PartialEq)]
pub struct PathField {
    grid: ScreenGrid,
    psi_l: Vec<C64>,
    psi_r: Vec<C64>,
    kick: f64,
    exec: Execution,
}

impl PathField {
    /// Transverse momentum kick (phase `exp(i·k·x)`) carried by the `R′` mode.
    pub fn with_kick(mut self, kick: f64) -> Self {
        self.kick = kick;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn grid(&self) -> &ScreenGrid {
        &self.grid
    }

    pub fn psi_l(&self) -> &[C64] {
        &self.psi_l
    }

    pub fn psi_r(&self) -> &[C64] {
        &self.psi_r
    }

    pub fn kick(&self) -> f64 {
        self.kick
    }

    /// Screen amplitudes of the atom basis modes `(L, R, R′)` at grid point `i`.
    pub fn modes(&self, i: usize) -> [C64; 3] {
        let x = self.grid.x(i);
        let r = self.psi_r[i];
        let kicked = if self.kick == 0.0 {
            r
        } else {
            r * C64::from_polar(1.0, self.kick * x)
        };
        [self.psi_l[i], r, kicked]
    }
}

/// Paraxially propagated Gaussian slits centred at `∓separation/2`.
///
/// Each path is `exp(−(x∓d/2)²/(4(1+iζ)))/√(1+iζ)`; the fields are not
/// normalized on the grid.
pub fn gaussian_slit_field(geom: &SlitGeometry, grid: &ScreenGrid) -> Result<PathField> {
    geom.validate()?;
    grid.validate()?;
    let q = C64::new(1.0, geom.zeta);
    let pre = q.sqrt().inv();
    let half = geom.separation / 2.0;
    let gauss = |u: f64| pre * (-(u * u) / (4.0 * q)).exp();
    let psi_l = (0..grid.n).map(|i| gauss(grid.x(i) + half)).collect();
    let psi_r = (0..grid.n).map(|i| gauss(grid.x(i) - half)).collect();
    Ok(PathField {
        grid: *grid,
        psi_l,
        psi_r,
        kick: 0.0,
        exec: Execution::default(),
    })
}

/// `cL|L⟩ + cR|R⟩` on the atom factor.
pub fn path_state(c_left: C64, c_right: C64) -> Result<StateVector> {
    StateVector::from_amps(ATOM, vec![c_left, c_right])
}

/// A screen probability density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenPattern {
    pub label: String,
    #[serde(skip)]
    pub grid: ScreenGrid,
    pub density: Vec<f64>,
    /// Single-path (incoherent) part of `density`.
    pub envelope: Vec<f64>,
}

impl ScreenPattern {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `Σ density·Δx`.
    pub fn area(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.dx()
    }

    /// `density − envelope`.
    pub fn interference(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(&self.envelope)
            .map(|(d, e)| d - e)
            .collect()
    }

    /// Weighted pointwise sum of patterns on the same grid.
    pub fn combine(label: &str, parts: &[(f64, &ScreenPattern)]) -> Result<ScreenPattern> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("cannot combine an empty list of patterns"))?
            .1;
        let n = first.density.len();
        let mut density = vec![0.0; n];
        let mut envelope = vec![0.0; n];
        for (w, p) in parts {
            if p.grid != first.grid {
                return Err(Error::config("patterns live on different grids"));
            }
            for i in 0..n {
                density[i] += w * p.density[i];
                envelope[i] += w * p.envelope[i];
            }
        }
        Ok(ScreenPattern {
            label: label.to_string(),
            grid: first.grid,
            density,
            envelope,
        })
    }

    /// `max_i |self_i − other_i|` of the densities.
    pub fn max_abs_diff(&self, other: &ScreenPattern) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn path_of_mode(mode: usize) -> usize {
    if mode == LEFT {
        LEFT
    } else {
        RIGHT
    }
}

/// Unscaled density and envelope for a reduced atom matrix.
fn raw_from_rho(field: &PathField, rho: &DensityMatrix) -> (Vec<f64>, Vec<f64>) {
    let d = rho.dim();
    let pairs: Vec<(f64, f64)> = map_range(field.exec, field.grid.n, |i| {
        let psi = field.modes(i);
        let mut total = 0.0;
        let mut env = 0.0;
        for a in 0..d {
            for b in 0..d {
                let term = (rho.entry(a, b) * psi[a] * psi[b].conj()).re;
                total += term;
                if path_of_mode(a) == path_of_mode(b) {
                    env += term;
                }
            }
        }
        (total, env)
    });
    pairs.into_iter().unzip()
}

/// Screen density of an arbitrary atom operator (not necessarily positive),
/// on `joint`'s scale.
pub(crate) fn operator_density(field: &PathField, joint: &StateVector, op: DMatrix<C64>) -> Result<Vec<f64>> {
    let scale = pattern_scale(field, joint)?;
    let factor = joint.factor(ATOM).cloned().ok_or_else(|| Error::config("no atom factor"))?;
    let rho = DensityMatrix::from_parts(vec![factor], op);
    let (density, _) = raw_from_rho(field, &rho);
    Ok(density.into_iter().map(|v| v * scale).collect())
}

fn atom_dim(joint: &StateVector) -> Result<usize> {
    let f = joint
        .factor(ATOM)
        .ok_or_else(|| Error::config(format!("state has no `{ATOM}` factor")))?;
    if f.dim != 2 && f.dim != 3 {
        return Err(Error::config(format!(
            "`{ATOM}` must have dimension 2 or 3, got {}",
            f.dim
        )));
    }
    Ok(f.dim)
}

fn scaled(field: &PathField, label: &str, raw: (Vec<f64>, Vec<f64>), scale: f64) -> ScreenPattern {
    let (density, envelope) = raw;
    ScreenPattern {
        label: label.to_string(),
        grid: field.grid,
        density: density.into_iter().map(|v| v * scale).collect(),
        envelope: envelope.into_iter().map(|v| v * scale).collect(),
    }
}

/// Factor that normalizes the ignore-the-detector pattern of `joint` to unit
/// area. Conditional patterns of the same state share it, so they add up to
/// the ignored pattern exactly.
pub fn pattern_scale(field: &PathField, joint: &StateVector) -> Result<f64> {
    atom_dim(joint)?;
    let rho = joint.partial_trace(&[ATOM])?;
    let (density, _) = raw_from_rho(field, &rho);
    let area = density.iter().sum::<f64>() * field.grid.dx();
    if area <= 0.0 {
        return Err(Error::config("state has zero weight on the screen"));
    }
    Ok(area.recip())
}

/// `|cL·ψ_L + cR·ψ_R|²`, normalized to unit area.
pub fn pattern_pure(field: &PathField, c_left: C64, c_right: C64) -> Result<ScreenPattern> {
    let n2 = c_left.norm_sqr() + c_right.norm_sqr();
    if (n2 - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "path amplitudes are not normalized (|cL|²+|cR|² = {n2})"
        )));
    }
    let pairs: Vec<(f64, f64)> = map_range(field.exec, field.grid.n, |i| {
        let a = c_left * field.psi_l[i];
        let b = c_right * field.psi_r[i];
        ((a + b).norm_sqr(), a.norm_sqr() + b.norm_sqr())
    });
    let (density, envelope): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let area = density.iter().sum::<f64>() * field.grid.dx();
    Ok(scaled(field, "pure", (density, envelope), area.recip()))
}

/// The pattern seen when the detector is ignored: built from the reduced atom
/// matrix of `joint`, normalized to unit area.
pub fn pattern_ignore(field: &PathField, joint: &StateVector) -> Result<ScreenPattern> {
    let scale = pattern_scale(field, joint)?;
    let rho = joint.partial_trace(&[ATOM])?;
    Ok(scaled(field, "total", raw_from_rho(field, &rho), scale))
}

/// The pattern correlated with a detector outcome.
///
/// `outcome` must cover every non-atom factor of `joint`. The result is
/// `|⟨x, outcome|ψ⟩|²` on the ignored pattern's scale, so its area is the
/// outcome's Born weight (up to the small spatial overlap of the two paths)
/// and a complete orthonormal set of outcomes sums to [`pattern_ignore`].
pub fn pattern_conditional(
    field: &PathField,
    joint: &StateVector,
    outcome: &StateVector,
) -> Result<ScreenPattern> {
    let scale = pattern_scale(field, joint)?;
    let atom = joint.contract(outcome)?;
    if atom.factors().len() != 1 || !atom.has_factor(ATOM) {
        return Err(Error::config(format!(
            "outcome must cover every non-atom factor; left with [{}]",
            atom.factor_names().join(", ")
        )));
    }
    let rho = DensityMatrix::projector(&atom);
    Ok(scaled(field, "cond", raw_from_rho(field, &rho), scale))
}

/// Pattern of a sub-normalized piece of `joint` (same factors), on `joint`'s
/// scale. Used for outcomes that are subspaces rather than single vectors.
pub fn pattern_component(
    field: &PathField,
    joint: &StateVector,
    component: &StateVector,
    label: &str,
) -> Result<ScreenPattern> {
    let scale = pattern_scale(field, joint)?;
    if component.factors() != joint.factors() {
        return Err(Error::config("component factors differ from the joint state"));
    }
    let rho = component.partial_trace(&[ATOM])?;
    Ok(scaled(field, label, raw_from_rho(field, &rho), scale))
}

/// Default half-width of the visibility window, in units of σ₀.
pub const DEFAULT_WINDOW: f64 = 4.0;

/// Peak local fringe contrast over `|x| ≤ window`.
///
/// At each point the local fringe extremes are `envelope ± |interference|`,
/// so the local `(max − min)/(max + min)` is `|density − envelope|/envelope`;
/// the maximum of that over the window is returned. Points where the envelope
/// is negligible (below 1e-12 of its window maximum) are skipped.
pub fn fringe_visibility(p: &ScreenPattern, window: f64) -> Result<f64> {
    let idx: Vec<usize> = (0..p.grid.n)
        .filter(|&i| p.grid.x(i).abs() <= window)
        .collect();
    if idx.len() < 2 {
        return Err(Error::config(format!(
            "visibility window ±{window} holds fewer than 2 grid points"
        )));
    }
    let env_max = idx.iter().map(|&i| p.envelope[i]).fold(0.0, f64::max);
    if env_max <= 0.0 {
        return Ok(0.0);
    }
    let v = idx
        .iter()
        .filter(|&&i| p.envelope[i] > 1e-12 * env_max)
        .map(|&i| ((p.density[i] - p.envelope[i]) / p.envelope[i]).abs())
        .fold(0.0, f64::max);
    Ok(v.min(1.0))
}

/// `2|ρ_LR|/(ρ_LL + ρ_RR)` of the reduced two-path atom matrix.
pub fn coherence_visibility(joint: &StateVector) -> Result<f64> {
    if atom_dim(joint)? != 2 {
        return Err(Error::config(
            "coherence visibility needs a two-mode atom factor (no back-action kick)",
        ));
    }
    let rho = joint.partial_trace(&[ATOM])?;
    let pop = rho.entry(0, 0).re + rho.entry(1, 1).re;
    if pop <= 0.0 {
        return Err(Error::config("atom factor carries no weight"));
    }
    Ok(2.0 * rho.entry(0, 1).norm() / pop)
}

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{StateVector, C64};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

fn gaussian_vector(rng: &mut impl Rng, dim: usize, support: Range<usize>) -> Vec<C64> {
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for a in &mut amps[support] {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *a = C64::new(re, im);
    }
    amps
}

/// Haar-random unit vector on one factor: normalized i.i.d. complex Gaussians.
pub fn random_unit_vector(name: &str, dim: usize, seed: u64) -> Result<StateVector> {
    random_unit_in_range(name, dim, 0..dim, seed)
}

/// Haar-random unit vector supported on the basis states `support`.
pub fn random_unit_in_range(
    name: &str,
    dim: usize,
    support: Range<usize>,
    seed: u64,
) -> Result<StateVector> {
    if dim == 0 {
        return Err(Error::config("random vector of dimension 0"));
    }
    if support.is_empty() || support.end > dim {
        return Err(Error::config(format!(
            "support {support:?} is not a nonempty subrange of 0..{dim}"
        )));
    }
    let mut rng = stream(seed, 0);
    StateVector::from_amps(name, gaussian_vector(&mut rng, dim, support))?.normalize()
}

/// Unit vectors `(u, b)` with `⟨u|b⟩ = c` exactly (real), where
/// `b = c·u + √(1−c²)·u⊥` and `u⊥` is a random vector orthogonalised against `u`.
pub fn overlap_pair(name: &str, dim: usize, c: f64, seed: u64) -> Result<(StateVector, StateVector)> {
    if dim < 2 {
        return Err(Error::config(format!("overlap pair needs dim ≥ 2, got {dim}")));
    }
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::config(format!("overlap {c} outside [0, 1]")));
    }
    let u = random_unit_vector(name, dim, seed)?;
    let perp = orthogonal_to(&u, derive_seed(seed, 1))?;
    let s = (1.0 - c * c).sqrt();
    let amps = u
        .amps()
        .iter()
        .zip(perp.amps())
        .map(|(a, p)| a * c + p * s)
        .collect();
    let b = StateVector::from_amps(name, amps)?;
    Ok((u, b))
}

/// A random unit vector orthogonal to `u` (one Gram–Schmidt step, repeated
/// once to clean up rounding).
pub(crate) fn orthogonal_to(u: &StateVector, seed: u64) -> Result<StateVector> {
    let f = &u.factors()[0];
    let mut v = random_unit_vector(&f.name, f.dim, seed)?;
    for _ in 0..2 {
        let proj = u.inner(&v)?;
        v = v.sub(&u.clone().scale(proj))?.normalize()?;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_deterministic() {
        for seed in 0..20 {
            let v = random_unit_vector("m", 7, seed).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert_eq!(v, random_unit_vector("m", 7, seed).unwrap());
        }
        assert!(random_unit_vector("m", 0, 1).is_err());
    }

    #[test]
    fn restricted_support() {
        let v = random_unit_in_range("cat", 8, 2..4, 3).unwrap();
        for (i, a) in v.amps().iter().enumerate() {
            if !(2..4).contains(&i) {
                assert_eq!(*a, C64::new(0.0, 0.0));
            }
        }
        assert!(random_unit_in_range("cat", 8, 6..9, 3).is_err());
    }

    #[test]
    fn overlap_dial_endpoints() {
        let (u, b) = overlap_pair("m", 4, 0.0, 11).unwrap();
        assert!(u.inner(&b).unwrap().norm() < 1e-12);
        let (u, b) = overlap_pair("m", 4, 1.0, 11).unwrap();
        assert_eq!(u, b);
        let (u, b) = overlap_pair("m", 4, 0.5, 11).unwrap();
        let ov = u.inner(&b).unwrap();
        assert!((ov.re - 0.5).abs() < 1e-12 && ov.im.abs() < 1e-12);
        assert!((b.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_dial_validation() {
        assert!(overlap_pair("m", 4, 1.5, 0).is_err());
        assert!(overlap_pair("m", 4, -0.1, 0).is_err());
        assert!(overlap_pair("m", 1, 0.5, 0).is_err());
    }
}

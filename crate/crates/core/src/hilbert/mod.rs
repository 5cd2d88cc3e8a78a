//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! A [`StateVector`] is an amplitude vector over an ordered list of named
//! factors; the first factor is the most significant index. Subsystems are
//! always addressed by name.

mod density;
mod layout;
pub(crate) mod random;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use layout::Split;

pub use density::DensityMatrix;
pub use random::{overlap_pair, random_unit_in_range, random_unit_vector};

pub type C64 = Complex64;

/// Largest total dimension a dense state may have.
pub const MAX_DIM: usize = 1 << 21;

/// A named tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if dim == 0 {
            return Err(Error::config(format!("factor `{name}` has dimension 0")));
        }
        if name.is_empty() {
            return Err(Error::config("factor name is empty"));
        }
        Ok(Factor { name, dim })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    factors: Vec<Factor>,
    amps: Vec<C64>,
}

fn total_dim(factors: &[Factor]) -> Result<usize> {
    let mut total: usize = 1;
    for f in factors {
        total = total
            .checked_mul(f.dim)
            .filter(|&t| t <= MAX_DIM)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "state over {} factors exceeds the dense cap of {MAX_DIM} amplitudes; \
                     reduce molecule count or per-factor dimensions",
                    factors.len()
                ))
            })?;
    }
    Ok(total)
}

fn check_unique(factors: &[Factor]) -> Result<()> {
    for (i, f) in factors.iter().enumerate() {
        if factors[..i].iter().any(|g| g.name == f.name) {
            return Err(Error::config(format!("duplicate factor name `{}`", f.name)));
        }
    }
    Ok(())
}

impl StateVector {
    pub fn new(factors: Vec<Factor>, amps: Vec<C64>) -> Result<Self> {
        check_unique(&factors)?;
        let total = total_dim(&factors)?;
        if amps.len() != total {
            return Err(Error::config(format!(
                "amplitude vector has length {} but factors span {total}",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::config("non-finite amplitude"));
        }
        Ok(StateVector { factors, amps })
    }

    /// The zero-factor state holding a single amplitude.
    pub fn scalar(c: C64) -> Self {
        StateVector {
            factors: Vec::new(),
            amps: vec![c],
        }
    }

    /// Single-factor state from raw amplitudes.
    pub fn from_amps(name: &str, amps: Vec<C64>) -> Result<Self> {
        let f = Factor::new(name, amps.len())?;
        StateVector::new(vec![f], amps)
    }

    /// Computational basis state `|index⟩` of a single factor.
    pub fn basis(name: &str, dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::config(format!(
                "basis index {index} out of range for `{name}` (dim {dim})"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        StateVector::from_amps(name, amps)
    }

    pub fn zeros(factors: Vec<Factor>) -> Result<Self> {
        let total = total_dim(&factors)?;
        StateVector::new(factors, vec![C64::new(0.0, 0.0); total])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    pub fn has_factor(&self, name: &str) -> bool {
        self.factor(name).is_some()
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::config(format!("no factor named `{name}`")))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let pos = names
            .iter()
            .map(|n| self.position(n))
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(Error::config(format!("factor `{}` listed twice", names[i])));
            }
        }
        Ok(pos)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::config("cannot normalize the zero vector"));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    /// Errors unless `|⟨ψ|ψ⟩ − 1| ≤ tol`.
    pub fn require_normalized(&self, tol: f64) -> Result<()> {
        let n2 = self.norm_sqr();
        if (n2 - 1.0).abs() > tol {
            return Err(Error::config(format!(
                "state is not normalized (norm² = {n2})"
            )));
        }
        Ok(())
    }

    pub fn scale(mut self, c: C64) -> Self {
        for a in &mut self.amps {
            *a *= c;
        }
        self
    }

    fn require_same_factors(&self, other: &StateVector) -> Result<()> {
        if self.factors != other.factors {
            return Err(Error::config(format!(
                "factor mismatch: [{}] vs [{}]",
                self.factor_names().join(", "),
                other.factor_names().join(", ")
            )));
        }
        Ok(())
    }

    pub fn factor_names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        self.require_same_factors(other)?;
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a + b)
            .collect();
        Ok(StateVector {
            factors: self.factors.clone(),
            amps,
        })
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        self.add(&other.clone().scale(C64::new(-1.0, 0.0)))
    }

    /// `‖self − other‖∞` over amplitudes.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        self.require_same_factors(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Tensor product; factor list is `self` followed by `other`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        check_unique(&factors)?;
        total_dim(&factors)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(StateVector { factors, amps })
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.require_same_factors(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Partial inner product `(⟨bra| ⊗ 1)|self⟩`.
    ///
    /// `bra` must live on a subset of this state's factors (same names and
    /// dimensions, any order). The result keeps the remaining factors in their
    /// original order.
    pub fn contract(&self, bra: &StateVector) -> Result<StateVector> {
        let split = self.split_for(bra)?;
        let factors = self.rest_factors(&bra.factor_names());
        let mut out = vec![C64::new(0.0, 0.0); split.rest_dim];
        for (i, a) in self.amps.iter().enumerate() {
            out[split.rest[i]] += bra.amps[split.sel[i]].conj() * a;
        }
        Ok(StateVector { factors, amps: out })
    }

    /// `(|b⟩⟨b| ⊗ 1)|self⟩` for a normalized `b` on a subset of factors.
    pub fn project(&self, bra: &StateVector) -> Result<StateVector> {
        let split = self.split_for(bra)?;
        let mut reduced = vec![C64::new(0.0, 0.0); split.rest_dim];
        for (i, a) in self.amps.iter().enumerate() {
            reduced[split.rest[i]] += bra.amps[split.sel[i]].conj() * a;
        }
        let amps = (0..self.dim())
            .map(|i| reduced[split.rest[i]] * bra.amps[split.sel[i]])
            .collect();
        Ok(StateVector {
            factors: self.factors.clone(),
            amps,
        })
    }

    fn split_for(&self, bra: &StateVector) -> Result<Split> {
        let names = bra.factor_names();
        let pos = self.positions(&names)?;
        for (f, &p) in bra.factors.iter().zip(&pos) {
            if self.factors[p].dim != f.dim {
                return Err(Error::config(format!(
                    "factor `{}` has dimension {} here but {} in the outcome",
                    f.name, self.factors[p].dim, f.dim
                )));
            }
        }
        Ok(Split::new(&self.factors, &pos))
    }

    fn rest_factors(&self, excluded: &[&str]) -> Vec<Factor> {
        self.factors
            .iter()
            .filter(|f| !excluded.contains(&f.name.as_str()))
            .cloned()
            .collect()
    }

    /// Applies `op` to the named factors (jointly, in the given order).
    pub fn apply(&self, names: &[&str], op: &DMatrix<C64>) -> Result<StateVector> {
        let pos = self.positions(names)?;
        let split = Split::new(&self.factors, &pos);
        if op.nrows() != split.sel_dim || op.ncols() != split.sel_dim {
            return Err(Error::config(format!(
                "operator is {}x{} but factors [{}] span {}",
                op.nrows(),
                op.ncols(),
                names.join(", "),
                split.sel_dim
            )));
        }
        let mut flat = vec![0usize; self.dim()];
        for i in 0..self.dim() {
            flat[split.rest[i] * split.sel_dim + split.sel[i]] = i;
        }
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        let d = split.sel_dim;
        for r in 0..split.rest_dim {
            let idx = &flat[r * d..(r + 1) * d];
            for (row, &out_i) in idx.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (col, &in_i) in idx.iter().enumerate() {
                    acc += op[(row, col)] * self.amps[in_i];
                }
                amps[out_i] = acc;
            }
        }
        Ok(StateVector {
            factors: self.factors.clone(),
            amps,
        })
    }

    /// Reduced density matrix over `keep` (canonical factor order).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let mut pos = self.positions(keep)?;
        pos.sort_unstable();
        let split = Split::new(&self.factors, &pos);
        let mut m = DMatrix::<C64>::zeros(split.sel_dim, split.rest_dim);
        for (i, a) in self.amps.iter().enumerate() {
            m[(split.sel[i], split.rest[i])] = *a;
        }
        let rho = &m * m.adjoint();
        let factors = pos.iter().map(|&p| self.factors[p].clone()).collect();
        Ok(DensityMatrix::from_parts(factors, rho))
    }

    /// `tr_rest |self⟩⟨other|` over `keep` (canonical factor order). Both
    /// states must share the same factors.
    pub fn reduced_cross(&self, other: &StateVector, keep: &[&str]) -> Result<DMatrix<C64>> {
        self.require_same_factors(other)?;
        let mut pos = self.positions(keep)?;
        pos.sort_unstable();
        let split = Split::new(&self.factors, &pos);
        let mut a = DMatrix::<C64>::zeros(split.sel_dim, split.rest_dim);
        let mut b = DMatrix::<C64>::zeros(split.sel_dim, split.rest_dim);
        for i in 0..self.amps.len() {
            a[(split.sel[i], split.rest[i])] = self.amps[i];
            b[(split.sel[i], split.rest[i])] = other.amps[i];
        }
        Ok(&a * b.adjoint())
    }

    /// Reorders factors to `order`, which must name every factor exactly once.
    pub fn permute(&self, order: &[&str]) -> Result<StateVector> {
        if order.len() != self.factors.len() {
            return Err(Error::config("permutation must list every factor once"));
        }
        let pos = self.positions(order)?;
        let split = Split::new(&self.factors, &pos);
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            amps[split.sel[i]] = *a;
        }
        let factors = pos.iter().map(|&p| self.factors[p].clone()).collect();
        Ok(StateVector { factors, amps })
    }

    pub fn rename(mut self, from: &str, to: &str) -> Result<StateVector> {
        if from != to && self.has_factor(to) {
            return Err(Error::config(format!("factor `{to}` already exists")));
        }
        let p = self.position(from)?;
        self.factors[p].name = to.to_string();
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn plus(name: &str) -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amps(name, vec![c(h), c(h)]).unwrap()
    }

    #[test]
    fn reduced_cross_of_self_is_partial_trace() {
        let s = random_unit_vector("a", 3, 4)
            .unwrap()
            .tensor(&random_unit_vector("b", 2, 5).unwrap())
            .unwrap()
            .add(&random_unit_vector("a", 3, 6).unwrap().tensor(&plus("b")).unwrap())
            .unwrap();
        let cross = s.reduced_cross(&s, &["a"]).unwrap();
        let rho = s.partial_trace(&["a"]).unwrap();
        assert!((&cross - rho.matrix()).norm() < 1e-15);

        // orthogonal on the traced factor ⇒ no cross operator
        let x = plus("a").tensor(&StateVector::basis("b", 2, 0).unwrap()).unwrap();
        let y = plus("a").tensor(&StateVector::basis("b", 2, 1).unwrap()).unwrap();
        assert!(x.reduced_cross(&y, &["a"]).unwrap().norm() == 0.0);
    }

    #[test]
    fn tensor_of_basis_states() {
        let s = StateVector::basis("a", 2, 0)
            .unwrap()
            .tensor(&StateVector::basis("b", 2, 1).unwrap())
            .unwrap();
        assert_eq!(s.amps(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
    }

    #[test]
    fn tensor_distributes() {
        let s = plus("a").tensor(&StateVector::basis("b", 2, 0).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in s.amps().iter().zip([h, 0.0, h, 0.0]) {
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-15);
            assert_eq!(got.im, 0.0);
        }
    }

    #[test]
    fn tensor_rejects_duplicate_names() {
        let a = StateVector::basis("q", 2, 0).unwrap();
        assert!(matches!(a.tensor(&a), Err(Error::Config(_))));
    }

    #[test]
    fn inner_products() {
        let zero = StateVector::basis("q", 2, 0).unwrap();
        let one = StateVector::basis("q", 2, 1).unwrap();
        assert_eq!(zero.inner(&one).unwrap(), c(0.0));
        assert_abs_diff_eq!(plus("q").inner(&plus("q")).unwrap().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            plus("q").inner(&zero).unwrap().re,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        let other = StateVector::basis("r", 2, 0).unwrap();
        assert!(matches!(zero.inner(&other), Err(Error::Config(_))));
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = StateVector::from_amps("q", vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let b = plus("q");
        let i = C64::new(0.0, 1.0);
        let lhs = a.clone().scale(i).inner(&b).unwrap();
        let rhs = a.inner(&b).unwrap() * i.conj();
        assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::new(
            vec![Factor::new("a", 2).unwrap(), Factor::new("b", 2).unwrap()],
            vec![c(h), c(0.0), c(0.0), c(h)],
        )
        .unwrap();
        let rho = bell.partial_trace(&["a"]).unwrap();
        assert_abs_diff_eq!(rho.entry(0, 0).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.entry(1, 1).re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.entry(0, 1).norm(), 0.0, epsilon = 1e-15);
        assert!(matches!(bell.partial_trace(&["z"]), Err(Error::Config(_))));
    }

    #[test]
    fn partial_trace_of_product_is_pure() {
        let a = StateVector::from_amps("a", vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let s = a.tensor(&plus("b")).unwrap();
        let rho = s.partial_trace(&["a"]).unwrap();
        let want = DensityMatrix::projector(&a);
        assert!((rho.matrix() - want.matrix()).norm() < 1e-12);
    }

    #[test]
    fn contract_and_project() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // (|0⟩|1⟩ + |1⟩|0⟩)/√2 contracted with ⟨1| on b leaves |0⟩/√2 on a
        let s = StateVector::new(
            vec![Factor::new("a", 2).unwrap(), Factor::new("b", 2).unwrap()],
            vec![c(0.0), c(h), c(h), c(0.0)],
        )
        .unwrap();
        let r = s.contract(&StateVector::basis("b", 2, 1).unwrap()).unwrap();
        assert_eq!(r.factor_names(), vec!["a"]);
        assert_abs_diff_eq!(r.amps()[0].re, h, epsilon = 1e-15);
        assert_eq!(r.amps()[1], c(0.0));

        let p = s.project(&StateVector::basis("b", 2, 1).unwrap()).unwrap();
        assert_eq!(p.amps(), &[c(0.0), c(h), c(0.0), c(0.0)]);

        // contracting with an empty bra is the identity
        assert_eq!(s.contract(&StateVector::scalar(c(1.0))).unwrap(), s);
    }

    #[test]
    fn apply_on_second_factor() {
        let s = StateVector::basis("a", 2, 1)
            .unwrap()
            .tensor(&StateVector::basis("b", 2, 0).unwrap())
            .unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let t = s.apply(&["b"], &x).unwrap();
        assert_eq!(t.amps(), &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        assert!(s.apply(&["a", "b"], &x).is_err());
    }

    #[test]
    fn permute_then_back() {
        let a = StateVector::from_amps("a", vec![c(0.6), c(0.8)]).unwrap();
        let b = StateVector::from_amps("b", vec![c(0.0), c(0.6), c(0.8)]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        assert_eq!(ab.permute(&["b", "a"]).unwrap(), ba);
        assert_eq!(ba.permute(&["a", "b"]).unwrap(), ab);
    }

    #[test]
    fn dimension_cap_is_a_resource_error() {
        let f: Vec<Factor> = (0..22).map(|i| Factor::new(format!("q{i}"), 2).unwrap()).collect();
        assert!(matches!(StateVector::zeros(f), Err(Error::Resource(_))));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(Factor::new("x", 0).is_err());
        assert!(StateVector::normalize(StateVector::scalar(c(0.0))).is_err());
    }
}

//! Exact Wirtinger jets of closed-form weights.
//!
//! Every chart coordinate `x^C` and its conjugate are carried as independent
//! formal variables, so a real weight `φ(x, x̄)` expands into a truncated
//! Taylor polynomial whose coefficients are the mixed derivatives
//! `∂^A ∂̄^B φ / (A! B!)`.

mod fd;
pub mod taylor;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};
use crate::models::ModelSpec;

pub use fd::{fd_jet_oracle, fd_potential_jet, FdStep};
pub use taylor::{Jet, JetSpace, Scalar};

pub const MAX_ORDER: usize = 4;

/// Per-coordinate holomorphic and antiholomorphic derivative orders.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub hol: Vec<u8>,
    pub anti: Vec<u8>,
}

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        MultiIndex {
            hol: vec![0; dim],
            anti: vec![0; dim],
        }
    }

    /// Build from lists of coordinate indices, e.g. `φ_{αj̄}` is
    /// `from_indices(dim, &[alpha], &[m + j])`.
    pub fn from_indices(dim: usize, hol: &[usize], anti: &[usize]) -> Self {
        let mut idx = MultiIndex::zero(dim);
        for &h in hol {
            idx.hol[h] += 1;
        }
        for &a in anti {
            idx.anti[a] += 1;
        }
        idx
    }

    pub fn order(&self) -> usize {
        self.hol.iter().chain(&self.anti).map(|&e| e as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.hol.len()
    }

    pub fn swapped(&self) -> Self {
        MultiIndex {
            hol: self.anti.clone(),
            anti: self.hol.clone(),
        }
    }

    /// Exponent vector in the jet variable layout `(x, x̄)`.
    pub fn exponents(&self) -> Vec<u8> {
        self.hol.iter().chain(&self.anti).copied().collect()
    }

    pub fn from_exponents(exponents: &[u8]) -> Self {
        let n = exponents.len() / 2;
        MultiIndex {
            hol: exponents[..n].to_vec(),
            anti: exponents[n..].to_vec(),
        }
    }
}

/// Base coordinates `z` (length m) and fiber coordinates `v` (length n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub z: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl ChartPoint {
    pub fn new(z: Vec<Complex64>, v: Vec<Complex64>) -> Self {
        ChartPoint { z, v }
    }

    pub fn origin(m: usize, n: usize) -> Self {
        ChartPoint {
            z: vec![Complex64::new(0.0, 0.0); m],
            v: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn m(&self) -> usize {
        self.z.len()
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn dim(&self) -> usize {
        self.z.len() + self.v.len()
    }

    /// All coordinates, base first.
    pub fn coords(&self) -> Vec<Complex64> {
        self.z.iter().chain(&self.v).copied().collect()
    }
}

/// Holomorphic coordinates and their formally independent conjugates.
#[derive(Clone, Debug)]
pub struct Coords<T> {
    pub z: Vec<T>,
    pub v: Vec<T>,
    pub zb: Vec<T>,
    pub vb: Vec<T>,
}

/// A real weight on a chart, written once against [`Scalar`].
///
/// `phi` is the relative potential on the total space; `psi` is the base
/// potential and must only read `z`/`zb`.
pub trait Potential {
    fn base_dim(&self) -> usize;
    fn fiber_dim(&self) -> usize;
    fn phi<T: Scalar>(&self, x: &Coords<T>) -> T;
    fn psi<T: Scalar>(&self, x: &Coords<T>) -> T;
}

/// Mixed Wirtinger derivatives of a weight at a chart point.
#[derive(Clone, Debug)]
pub struct WeightJet {
    pub point: ChartPoint,
    jet: Jet,
}

impl WeightJet {
    pub fn from_jet(point: ChartPoint, jet: Jet) -> Self {
        assert_eq!(jet.space().nvars(), 2 * point.dim());
        WeightJet { point, jet }
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn order(&self) -> usize {
        self.jet.space().degree()
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    /// Value of `∂^hol ∂̄^anti φ` for a multi-index; zero above the jet order.
    pub fn get(&self, idx: &MultiIndex) -> Complex64 {
        self.jet.partial(&idx.exponents())
    }

    /// Derivative by lists of coordinate indices (repetition allowed).
    pub fn d(&self, hol: &[usize], anti: &[usize]) -> Complex64 {
        self.get(&MultiIndex::from_indices(self.dim(), hol, anti))
    }

    /// Every `(multi-index, value)` pair stored in the jet.
    pub fn entries(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        self.jet
            .space()
            .monomials()
            .iter()
            .map(move |e| (MultiIndex::from_exponents(e), self.jet.partial(e)))
    }

    /// Replace one stored derivative value (used to build corrupted fixtures).
    pub fn with_entry(&self, idx: &MultiIndex, value: Complex64) -> Self {
        let e = idx.exponents();
        let k = self
            .jet
            .space()
            .index_of(&e)
            .expect("multi-index above jet order");
        let scale: f64 = e
            .iter()
            .map(|&x| (1..=x as u64).product::<u64>() as f64)
            .product();
        let mut coeffs = self.jet.coeffs().to_vec();
        coeffs[k] = value / scale;
        WeightJet {
            point: self.point.clone(),
            jet: Jet::from_coeffs(self.jet.space(), coeffs),
        }
    }
}

/// Coordinate jets `x^C = x₀^C + dx^C`, `x̄^C = conj(x₀^C) + dx̄^C`.
pub fn jet_coords(point: &ChartPoint, order: usize) -> Coords<Jet> {
    let dim = point.dim();
    let space = JetSpace::get(2 * dim, order);
    let all = point.coords();
    let hol: Vec<Jet> = (0..dim).map(|c| Jet::variable(&space, c, all[c])).collect();
    let anti: Vec<Jet> = (0..dim)
        .map(|c| Jet::variable(&space, dim + c, all[c].conj()))
        .collect();
    let m = point.m();
    Coords {
        z: hol[..m].to_vec(),
        v: hol[m..].to_vec(),
        zb: anti[..m].to_vec(),
        vb: anti[m..].to_vec(),
    }
}

fn check_dims<P: Potential>(p: &P, point: &ChartPoint) -> Result<()> {
    if point.m() != p.base_dim() || point.n() != p.fiber_dim() {
        return Err(KurvError::Dimension(format!(
            "point has (m, n) = ({}, {}), weight expects ({}, {})",
            point.m(),
            point.n(),
            p.base_dim(),
            p.fiber_dim()
        )));
    }
    Ok(())
}

/// Jet of `φ` for any [`Potential`]; no region check.
pub fn potential_jet<P: Potential>(p: &P, point: &ChartPoint, order: usize) -> Result<WeightJet> {
    if order > MAX_ORDER {
        return Err(KurvError::UnsupportedOrder(order));
    }
    check_dims(p, point)?;
    let x = jet_coords(point, order);
    Ok(WeightJet::from_jet(point.clone(), p.phi(&x)))
}

/// Jet of the base potential `ψ`, laid out in the total-space variables.
pub fn potential_base_jet<P: Potential>(
    p: &P,
    point: &ChartPoint,
    order: usize,
) -> Result<WeightJet> {
    if order > MAX_ORDER {
        return Err(KurvError::UnsupportedOrder(order));
    }
    check_dims(p, point)?;
    let x = jet_coords(point, order);
    Ok(WeightJet::from_jet(point.clone(), p.psi(&x)))
}

/// All mixed derivatives of a catalog model's weight up to `order`.
pub fn evaluate_jet(model: &ModelSpec, p: &ChartPoint, order: usize) -> Result<WeightJet> {
    if order > MAX_ORDER {
        return Err(KurvError::UnsupportedOrder(order));
    }
    model.check_point(p)?;
    potential_jet(model, p, order)
}

/// True iff `value(A, B) == conj(value(B, A))` entry-wise within `tol`.
pub fn check_reality(jet: &WeightJet, tol: f64) -> bool {
    jet.entries().all(|(idx, value)| {
        let mirror = jet.get(&idx.swapped());
        (value - mirror.conj()).norm() <= tol * (1.0 + value.norm())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    struct Constant;
    impl Potential for Constant {
        fn base_dim(&self) -> usize {
            1
        }
        fn fiber_dim(&self) -> usize {
            1
        }
        fn phi<T: Scalar>(&self, x: &Coords<T>) -> T {
            x.v[0].constant_like(1.0)
        }
        fn psi<T: Scalar>(&self, x: &Coords<T>) -> T {
            x.z[0].constant_like(0.0)
        }
    }

    #[test]
    fn product_poincare_origin() {
        let model = ModelSpec::product_poincare(1, 1);
        let jet = evaluate_jet(&model, &ChartPoint::origin(1, 1), 2).unwrap();
        assert!((jet.d(&[], &[]).re - 2f64.ln()).abs() < 1e-15);
        assert!((jet.d(&[1], &[1]).re - 2.0).abs() < 1e-14);
        assert!(jet.d(&[0], &[0]).norm() < 1e-15);
    }

    #[test]
    fn sheared_origin_mixed_terms() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let jet = evaluate_jet(&model, &ChartPoint::origin(1, 1), 4).unwrap();
        assert!(jet.d(&[0], &[1]).norm() < 1e-15);
        assert!((jet.d(&[0], &[0]).re - 1.0).abs() < 1e-14);
        // ∂_z ∂_v̄ ∂_v̄ of ε Re(z v̄²) is ε
        assert!((jet.d(&[0], &[1, 1]).re - 0.1).abs() < 1e-14);
    }

    #[test]
    fn reality_holds_and_detects_corruption() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let p = ChartPoint::new(
            vec![Complex64::new(0.1, -0.2)],
            vec![Complex64::new(0.3, 0.1)],
        );
        let jet = evaluate_jet(&model, &p, 4).unwrap();
        assert!(check_reality(&jet, 1e-12));
        let idx = MultiIndex::from_indices(2, &[0, 1], &[1]);
        let bad = jet.with_entry(&idx, jet.get(&idx) + 1e-3);
        assert!(!check_reality(&bad, 1e-9));
    }

    #[test]
    fn constant_weight_is_real_with_no_derivatives() {
        let jet = potential_jet(&Constant, &ChartPoint::origin(1, 1), 4).unwrap();
        assert!(check_reality(&jet, 1e-15));
        for (idx, value) in jet.entries() {
            if idx.order() > 0 {
                assert_eq!(value, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_order_and_region() {
        let model = ModelSpec::product_poincare(1, 1);
        assert_eq!(
            evaluate_jet(&model, &ChartPoint::origin(1, 1), 5).unwrap_err(),
            KurvError::UnsupportedOrder(5)
        );
        let far = ChartPoint::new(
            vec![Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.99, 0.0)],
        );
        assert!(matches!(
            evaluate_jet(&model, &far, 2),
            Err(KurvError::OutsideRegion { .. })
        ));
    }
}

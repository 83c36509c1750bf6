//! Chern connection and curvature of Hermitian metrics, holomorphic
//! (bi)sectional curvature and sampled Griffiths-sign tests.
//!
//! Index convention: `R_{ij̄CD̄}` has bundle indices `i, j̄` first and form
//! indices `C, D̄` last, with
//! `R_{ij̄CD̄} = -∂_C∂_D̄ h_{ij̄} + h^{l̄k} ∂_C h_{il̄} ∂_D̄ h_{kj̄}`.
//! The contraction `⟨R(X, Ȳ)U, W⟩` is `R_{ij̄CD̄} U^i W̄^j X^C Ȳ^D`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};
use crate::jets::WeightJet;

/// Strictness threshold for negativity verdicts.
pub const VERDICT_TOL: f64 = 1e-9;
/// Relative eigenvalue floor below which a metric counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

const IMAG_RTOL: f64 = 1e-10;
const IMAG_ATOL: f64 = 1e-12;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Hermitian matrix `h_{ij̄}` with `h_{ij̄} = conj(h_{jī})`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Accepts a matrix that is Hermitian up to round-off and symmetrizes it.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(KurvError::Dimension(format!(
                "metric must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let adj = m.adjoint();
        let scale = m.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let defect = (&m - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if defect > 1e-9 * scale {
            return Err(KurvError::InvalidArgument(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(HermitianMatrix {
            m: (&m + adj) * Complex64::new(0.5, 0.0),
        })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let r = diag.len();
        HermitianMatrix {
            m: DMatrix::from_fn(r, r, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    zero()
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .m
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    fn singular_threshold(&self) -> f64 {
        let r = self.dim().max(1) as f64;
        SINGULAR_RTOL * (self.trace().abs() / r)
    }

    pub fn is_positive_definite(&self) -> bool {
        let min = self.min_eigenvalue();
        min > self.singular_threshold() && min > 0.0
    }

    /// `h^{-1}` through a Cholesky factorization; fails on non-positive or
    /// near-singular metrics.
    pub fn inverse(&self) -> Result<DMatrix<Complex64>> {
        let min = self.min_eigenvalue();
        let threshold = self.singular_threshold();
        if min <= threshold || min <= 0.0 {
            return Err(KurvError::SingularMetric {
                min_eigenvalue: min,
                threshold,
            });
        }
        let chol = self.m.clone().cholesky().ok_or(KurvError::SingularMetric {
            min_eigenvalue: min,
            threshold,
        })?;
        Ok(chol.inverse())
    }

    /// Lower Cholesky factor `C` with `h = C C*`.
    pub fn cholesky_factor(&self) -> Result<DMatrix<Complex64>> {
        self.inverse()?;
        Ok(self
            .m
            .clone()
            .cholesky()
            .expect("checked positive")
            .unpack())
    }

    /// `‖ξ‖² = h_{ij̄} ξ^i conj(ξ^j)`.
    pub fn norm_sq(&self, xi: &[Complex64]) -> f64 {
        self.inner(xi, xi).re
    }

    /// `⟨ξ, η⟩ = h_{ij̄} ξ^i conj(η^j)`.
    pub fn inner(&self, xi: &[Complex64], eta: &[Complex64]) -> Complex64 {
        let r = self.dim();
        let mut acc = zero();
        for i in 0..r {
            for j in 0..r {
                acc += self.m[(i, j)] * xi[i] * eta[j].conj();
            }
        }
        acc
    }

    pub fn scaled(&self, k: f64) -> Self {
        HermitianMatrix {
            m: &self.m * Complex64::new(k, 0.0),
        }
    }
}

/// Metric together with its first and mixed second derivatives along `d`
/// coordinate directions.
#[derive(Clone, Debug)]
pub struct MetricDerivatives {
    pub h: HermitianMatrix,
    /// `dh[C] = ∂_C h`
    pub dh: Vec<DMatrix<Complex64>>,
    /// `dbh[D] = ∂_D̄ h`
    pub dbh: Vec<DMatrix<Complex64>>,
    /// `ddbh[C][D] = ∂_C ∂_D̄ h`
    pub ddbh: Vec<Vec<DMatrix<Complex64>>>,
}

impl MetricDerivatives {
    /// Metric `h_{ij̄} = ∂_{rows[i]} ∂̄_{rows[j]} φ` with derivatives along
    /// the coordinates listed in `dirs`.
    pub fn from_weight(jet: &WeightJet, rows: &[usize], dirs: &[usize]) -> Result<Self> {
        if jet.order() < 4 {
            return Err(KurvError::InvalidArgument(
                "curvature needs an order-4 weight jet".into(),
            ));
        }
        let r = rows.len();
        let h = DMatrix::from_fn(r, r, |i, j| jet.d(&[rows[i]], &[rows[j]]));
        let dh = dirs
            .iter()
            .map(|&c| DMatrix::from_fn(r, r, |i, j| jet.d(&[rows[i], c], &[rows[j]])))
            .collect();
        let dbh = dirs
            .iter()
            .map(|&d| DMatrix::from_fn(r, r, |i, j| jet.d(&[rows[i]], &[rows[j], d])))
            .collect();
        let ddbh = dirs
            .iter()
            .map(|&c| {
                dirs.iter()
                    .map(|&d| DMatrix::from_fn(r, r, |i, j| jet.d(&[rows[i], c], &[rows[j], d])))
                    .collect()
            })
            .collect();
        Ok(MetricDerivatives {
            h: HermitianMatrix::new(h)?,
            dh,
            dbh,
            ddbh,
        })
    }

    pub fn rank(&self) -> usize {
        self.h.dim()
    }

    pub fn directions(&self) -> usize {
        self.dh.len()
    }
}

/// Connection matrices `θ_C = ∂_C h · h^{-1}`, i.e.
/// `θ^j_{iC} = ∂_C h_{ik̄} h^{k̄j}`.
pub fn chern_connection(
    h: &HermitianMatrix,
    dh: &[DMatrix<Complex64>],
) -> Result<Vec<DMatrix<Complex64>>> {
    let inv = h.inverse()?;
    Ok(dh.iter().map(|d| d * &inv).collect())
}

/// Four-index Chern curvature `R_{ij̄CD̄}` of a rank-`r` bundle over `d`
/// directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernCurvature {
    r: usize,
    d: usize,
    data: Vec<Complex64>,
}

impl ChernCurvature {
    pub fn from_fn(
        r: usize,
        d: usize,
        f: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(r * r * d * d);
        for i in 0..r {
            for j in 0..r {
                for c in 0..d {
                    for dd in 0..d {
                        data.push(f(i, j, c, dd));
                    }
                }
            }
        }
        ChernCurvature { r, d, data }
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn directions(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize, d: usize) -> Complex64 {
        self.data[((i * self.r + j) * self.d + c) * self.d + d]
    }

    /// `⟨R(x, ȳ)u, w⟩` together with the sum of absolute summands.
    pub fn contract_with_scale(
        &self,
        u: &[Complex64],
        w: &[Complex64],
        x: &[Complex64],
        y: &[Complex64],
    ) -> (Complex64, f64) {
        let (r, d) = (self.r, self.d);
        let mut acc = zero();
        let mut scale = 0.0;
        let mut k = 0;
        for i in 0..r {
            for j in 0..r {
                let uw = u[i] * w[j].conj();
                for c in 0..d {
                    let uwx = uw * x[c];
                    for dd in 0..d {
                        let term = self.data[k] * uwx * y[dd].conj();
                        acc += term;
                        scale += term.norm();
                        k += 1;
                    }
                }
            }
        }
        (acc, scale)
    }

    pub fn contract(
        &self,
        u: &[Complex64],
        w: &[Complex64],
        x: &[Complex64],
        y: &[Complex64],
    ) -> Complex64 {
        self.contract_with_scale(u, w, x, y).0
    }

    /// `max |R_{ij̄CD̄} - conj(R_{jīDC̄})|`.
    pub fn conjugation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.r {
            for j in 0..self.r {
                for c in 0..self.d {
                    for d in 0..self.d {
                        let diff = self.get(i, j, c, d) - self.get(j, i, d, c).conj();
                        worst = worst.max(diff.norm());
                    }
                }
            }
        }
        worst
    }

    /// `max |R_{ij̄CD̄} - R_{CD̄ij̄}|` (tangent-bundle curvature only).
    pub fn pair_exchange_defect(&self) -> Option<f64> {
        if self.r != self.d {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.r {
            for j in 0..self.r {
                for c in 0..self.d {
                    for d in 0..self.d {
                        let diff = self.get(i, j, c, d) - self.get(c, d, i, j);
                        worst = worst.max(diff.norm());
                    }
                }
            }
        }
        Some(worst)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Curvature of the Chern connection from second-derivative metric data.
pub fn chern_curvature(md: &MetricDerivatives) -> Result<ChernCurvature> {
    let inv = md.h.inverse()?;
    let (r, d) = (md.rank(), md.directions());
    // a[C] = ∂_C h · h^{-1}, so Σ_{k,l} h^{l̄k} ∂_C h_{il̄} ∂_D̄ h_{kj̄} = (a[C] · ∂_D̄ h)_{ij}
    let a: Vec<DMatrix<Complex64>> = md.dh.iter().map(|dh| dh * &inv).collect();
    let mut quad = Vec::with_capacity(d * d);
    for ac in &a {
        for dbh in &md.dbh {
            quad.push(ac * dbh);
        }
    }
    Ok(ChernCurvature::from_fn(r, d, |i, j, c, dd| {
        -md.ddbh[c][dd][(i, j)] + quad[c * d + dd][(i, j)]
    }))
}

/// Drop the imaginary residue of a provably real curvature value.
pub fn real_part_checked(value: Complex64, scale: f64) -> Result<f64> {
    let ok = value.im.abs() <= IMAG_RTOL * value.re.abs()
        || value.im.abs() <= IMAG_ATOL * scale.max(1.0);
    if ok {
        Ok(value.re)
    } else {
        Err(KurvError::NonReal {
            re: value.re,
            im: value.im,
        })
    }
}

fn require_tangent(r: &ChernCurvature, h: &HermitianMatrix) -> Result<()> {
    if r.rank() != r.directions() || r.rank() != h.dim() {
        return Err(KurvError::Dimension(format!(
            "sectional curvature needs a tangent-bundle tensor (rank {}, directions {}, metric {})",
            r.rank(),
            r.directions(),
            h.dim()
        )));
    }
    Ok(())
}

fn nonzero(xi: &[Complex64]) -> Result<()> {
    if xi.iter().all(|c| c.norm() == 0.0) {
        Err(KurvError::ZeroVector)
    } else {
        Ok(())
    }
}

/// Holomorphic sectional curvature `R_{ξξ̄ξξ̄} / ‖ξ‖⁴`.
pub fn hsc(r: &ChernCurvature, h: &HermitianMatrix, xi: &[Complex64]) -> Result<f64> {
    require_tangent(r, h)?;
    nonzero(xi)?;
    let (value, scale) = r.contract_with_scale(xi, xi, xi, xi);
    let n2 = h.norm_sq(xi);
    if n2 <= 0.0 {
        return Err(KurvError::ZeroVector);
    }
    real_part_checked(value, scale).map(|v| v / (n2 * n2))
}

/// Holomorphic bisectional curvature `R_{ξξ̄ηη̄} / (‖ξ‖²‖η‖²)`.
pub fn hbc(
    r: &ChernCurvature,
    h: &HermitianMatrix,
    xi: &[Complex64],
    eta: &[Complex64],
) -> Result<f64> {
    require_tangent(r, h)?;
    nonzero(xi)?;
    nonzero(eta)?;
    let (value, scale) = r.contract_with_scale(xi, xi, eta, eta);
    let (nx, ne) = (h.norm_sq(xi), h.norm_sq(eta));
    if nx <= 0.0 || ne <= 0.0 {
        return Err(KurvError::ZeroVector);
    }
    real_part_checked(value, scale).map(|v| v / (nx * ne))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Negative,
    Indefinite,
}

impl Verdict {
    pub fn from_sup(sup: f64, tol: f64) -> Self {
        if sup < -tol {
            Verdict::Negative
        } else {
            Verdict::Indefinite
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriffithsSample {
    pub sup: f64,
    pub verdict: Verdict,
    pub samples: usize,
}

/// Sampled maximum of `R_{vv̄ξξ̄} / (‖v‖²‖ξ‖²)` over `(v, ξ)` pairs.
/// Empirical: a NEGATIVE verdict is evidence, not a proof.
pub fn griffiths_sample_test(
    r: &ChernCurvature,
    h_bundle: &HermitianMatrix,
    h_base: &HermitianMatrix,
    samples: &[(Vec<Complex64>, Vec<Complex64>)],
    tol: f64,
) -> Result<GriffithsSample> {
    if samples.is_empty() {
        return Err(KurvError::InvalidArgument(
            "need at least one sample".into(),
        ));
    }
    let mut sup = f64::NEG_INFINITY;
    for (v, xi) in samples {
        nonzero(v)?;
        nonzero(xi)?;
        let (value, scale) = r.contract_with_scale(v, v, xi, xi);
        let ratio = real_part_checked(value, scale)? / (h_bundle.norm_sq(v) * h_base.norm_sq(xi));
        sup = sup.max(ratio);
    }
    Ok(GriffithsSample {
        sup,
        verdict: Verdict::from_sup(sup, tol),
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{potential_jet, ChartPoint, Coords, Potential, Scalar};

    /// Disk of radius 1 with `φ = log 2 - 2 log(1 - |v|²)`, optionally
    /// scaled by `k`, and two such disks side by side.
    struct Disks {
        factors: usize,
        k: f64,
    }

    impl Potential for Disks {
        fn base_dim(&self) -> usize {
            0
        }
        fn fiber_dim(&self) -> usize {
            self.factors
        }
        fn phi<T: Scalar>(&self, x: &Coords<T>) -> T {
            let mut acc = x.v[0].constant_like(0.0);
            for i in 0..self.factors {
                let one = x.v[i].constant_like(1.0);
                let t = (one - x.v[i].clone() * x.vb[i].clone()).ln() * -2.0 + 2f64.ln();
                acc = acc + t;
            }
            acc * self.k
        }
        fn psi<T: Scalar>(&self, x: &Coords<T>) -> T {
            x.v[0].constant_like(0.0)
        }
    }

    struct FlatWeight;
    impl Potential for FlatWeight {
        fn base_dim(&self) -> usize {
            0
        }
        fn fiber_dim(&self) -> usize {
            2
        }
        fn phi<T: Scalar>(&self, x: &Coords<T>) -> T {
            x.v[0].clone() * x.vb[0].clone() + x.v[1].clone() * x.vb[1].clone()
        }
        fn psi<T: Scalar>(&self, x: &Coords<T>) -> T {
            x.v[0].constant_like(0.0)
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn curvature_at<P: Potential>(p: &P, v: Vec<Complex64>) -> (ChernCurvature, HermitianMatrix) {
        let n = v.len();
        let jet = potential_jet(p, &ChartPoint::new(vec![], v), 4).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let md = MetricDerivatives::from_weight(&jet, &all, &all).unwrap();
        (chern_curvature(&md).unwrap(), md.h)
    }

    #[test]
    fn constant_metric_has_zero_connection() {
        let h = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        let dh = vec![DMatrix::zeros(2, 2); 2];
        for th in chern_connection(&h, &dh).unwrap() {
            assert!(th.iter().all(|x| x.norm() == 0.0));
        }
    }

    #[test]
    fn poincare_connection_at_half() {
        // θ = ∂_v log h = 2 v̄ / (1 - |v|²) = 4/3 at v = 1/2
        let jet = potential_jet(
            &Disks { factors: 1, k: 1.0 },
            &ChartPoint::new(vec![], vec![c(0.5, 0.0)]),
            4,
        )
        .unwrap();
        let md = MetricDerivatives::from_weight(&jet, &[0], &[0]).unwrap();
        let th = chern_connection(&md.h, &md.dh).unwrap();
        assert!((th[0][(0, 0)] - c(4.0 / 3.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn poincare_curvature_is_minus_h_squared() {
        let (r, h) = curvature_at(&Disks { factors: 1, k: 1.0 }, vec![c(0.0, 0.0)]);
        assert!((r.get(0, 0, 0, 0) - c(-4.0, 0.0)).norm() < 1e-12);
        assert!((h.get(0, 0).re - 2.0).abs() < 1e-14);
        let v = c(0.3, -0.4);
        let (r, h) = curvature_at(&Disks { factors: 1, k: 1.0 }, vec![v]);
        let hv = h.get(0, 0).re;
        assert!((r.get(0, 0, 0, 0).re + hv * hv).abs() < 1e-10 * hv * hv);
        assert!((hsc(&r, &h, &[c(0.7, 0.2)]).unwrap() + 1.0).abs() < 1e-12);
        assert!((hbc(&r, &h, &[c(1.0, 0.0)], &[c(1.0, 0.0)]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_metric_is_flat() {
        let (r, h) = curvature_at(&FlatWeight, vec![c(0.2, 0.1), c(-0.3, 0.0)]);
        assert_eq!(r.max_abs(), 0.0);
        assert_eq!(hsc(&r, &h, &[c(1.0, 0.0), c(0.0, 1.0)]).unwrap(), 0.0);
        assert_eq!(
            hbc(
                &r,
                &h,
                &[c(1.0, 0.0), c(0.0, 0.0)],
                &[c(0.3, 0.0), c(1.0, 1.0)]
            )
            .unwrap(),
            0.0
        );
        let samples = vec![(
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 1.0), c(1.0, 0.0)],
        )];
        let g = griffiths_sample_test(&r, &h, &h, &samples, VERDICT_TOL).unwrap();
        assert_eq!(g.sup, 0.0);
        assert_eq!(g.verdict, Verdict::Indefinite);
    }

    #[test]
    fn product_of_disks_is_block_diagonal() {
        let (r, h) = curvature_at(
            &Disks { factors: 2, k: 1.0 },
            vec![c(0.1, 0.2), c(-0.3, 0.1)],
        );
        for (i, j, a, b) in [(0, 0, 1, 1), (0, 1, 0, 1), (1, 0, 0, 0), (0, 1, 1, 0)] {
            assert!(r.get(i, j, a, b).norm() < 1e-14);
        }
        let e1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let e2 = [c(0.0, 0.0), c(0.0, 1.0)];
        assert!(hbc(&r, &h, &e1, &e2).unwrap().abs() < 1e-14);
        assert!((hsc(&r, &h, &e2).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_divides_sectional_curvatures() {
        let xi = [c(0.4, -0.1), c(0.2, 0.9)];
        let eta = [c(-0.3, 0.5), c(1.0, 0.0)];
        let v = vec![c(0.1, 0.2), c(-0.3, 0.1)];
        let (r1, h1) = curvature_at(&Disks { factors: 2, k: 1.0 }, v.clone());
        let (s1, b1) = (
            hsc(&r1, &h1, &xi).unwrap(),
            hbc(&r1, &h1, &xi, &eta).unwrap(),
        );
        for k in [2.0, 10.0, 100.0] {
            let (rk, hk) = curvature_at(&Disks { factors: 2, k }, v.clone());
            let sk = hsc(&rk, &hk, &xi).unwrap();
            let bk = hbc(&rk, &hk, &xi, &eta).unwrap();
            assert!((sk * k - s1).abs() <= 1e-12 * s1.abs());
            assert!((bk * k - b1).abs() <= 1e-12 * b1.abs());
        }
    }

    #[test]
    fn zero_vector_rejected() {
        let (r, h) = curvature_at(&Disks { factors: 1, k: 1.0 }, vec![c(0.0, 0.0)]);
        assert_eq!(
            hsc(&r, &h, &[c(0.0, 0.0)]).unwrap_err(),
            KurvError::ZeroVector
        );
    }

    #[test]
    fn singular_metric_rejected() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, 1e-15]);
        assert!(matches!(h.inverse(), Err(KurvError::SingularMetric { .. })));
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(!h.is_positive_definite());
    }

    #[test]
    fn non_real_value_rejected() {
        assert!(real_part_checked(c(1.0, 1e-3), 1.0).is_err());
        assert_eq!(real_part_checked(c(-2.0, 1e-14), 2.0).unwrap(), -2.0);
    }
}

//! Relative Kähler fibration data on a chart: horizontal lift, geodesic
//! curvature `c(φ)`, Kodaira–Spencer tensor, the metric family
//! `Ω(k) = k·ψ + φ` and its curvature in the adapted frame
//! `(δ/δz^α, ∂/∂v^i)`.
//!
//! Coordinates are ordered `(z^1..z^m, v^1..v^n)`. The adapted frame vectors
//! are `δ_α = ∂_α - L^i_α ∂_i` with `L^i_α = φ_{αj̄} φ^{j̄i}`.
//!
//! Blocks are named `R_{xȳuw̄} = ⟨R(x, ȳ)u, w⟩`: the first index pair is the
//! form slot, the second the bundle slot.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};
use crate::hermitian::{chern_curvature, ChernCurvature, HermitianMatrix, MetricDerivatives};
use crate::jets::{Jet, WeightJet};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Base and relative weight jets at one chart point.
#[derive(Clone, Debug)]
pub struct FibrationJet {
    m: usize,
    n: usize,
    psi: WeightJet,
    phi: WeightJet,
}

impl FibrationJet {
    /// Checks that both jets live at the same point and that the vertical
    /// and base Hessians are positive definite.
    pub fn new(psi: WeightJet, phi: WeightJet, m: usize) -> Result<Self> {
        if psi.point != phi.point || psi.order() != phi.order() {
            return Err(KurvError::Dimension(
                "base and relative jets must share point and order".into(),
            ));
        }
        if phi.order() < 2 || m == 0 || m >= phi.dim() {
            return Err(KurvError::Dimension(format!(
                "need m ≥ 1, n ≥ 1 and order ≥ 2 (m = {m}, dim = {}, order = {})",
                phi.dim(),
                phi.order()
            )));
        }
        let fj = FibrationJet {
            m,
            n: phi.dim() - m,
            psi,
            phi,
        };
        fj.vertical_hessian().inverse()?;
        fj.base_hessian().inverse()?;
        Ok(fj)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    pub fn order(&self) -> usize {
        self.phi.order()
    }

    pub fn psi(&self) -> &WeightJet {
        &self.psi
    }

    pub fn phi(&self) -> &WeightJet {
        &self.phi
    }

    fn base_idx(&self) -> Vec<usize> {
        (0..self.m).collect()
    }

    fn fiber_idx(&self) -> Vec<usize> {
        (self.m..self.dim()).collect()
    }

    fn all_idx(&self) -> Vec<usize> {
        (0..self.dim()).collect()
    }

    /// `(φ_{AB̄})` over all coordinates.
    pub fn phi_hessian(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| self.phi.d(&[a], &[b]))
    }

    /// `(φ_{ij̄})`
    pub fn vertical_hessian(&self) -> HermitianMatrix {
        let f = self.fiber_idx();
        let h = DMatrix::from_fn(self.n, self.n, |i, j| self.phi.d(&[f[i]], &[f[j]]));
        HermitianMatrix::new(h).expect("Hessian of a real weight")
    }

    /// `(ψ_{αβ̄})`
    pub fn base_hessian(&self) -> HermitianMatrix {
        let h = DMatrix::from_fn(self.m, self.m, |a, b| self.psi.d(&[a], &[b]));
        HermitianMatrix::new(h).expect("Hessian of a real weight")
    }

    /// The same jets with the weights shifted by constants.
    pub fn shifted(&self, dpsi: f64, dphi: f64) -> Self {
        let shift =
            |w: &WeightJet, s: f64| WeightJet::from_jet(w.point.clone(), w.jet().clone() + s);
        FibrationJet {
            m: self.m,
            n: self.n,
            psi: shift(&self.psi, dpsi),
            phi: shift(&self.phi, dphi),
        }
    }

    /// Weight jet of `k·ψ + φ`.
    pub fn total_weight(&self, k: f64) -> WeightJet {
        WeightJet::from_jet(
            self.phi.point.clone(),
            self.psi.jet().clone() * k + self.phi.jet().clone(),
        )
    }
}

/// Horizontal lift coefficients and the resulting raw frame vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedFrame {
    pub m: usize,
    pub n: usize,
    /// `lift[α][i] = L^i_α`
    pub lift: Vec<Vec<Complex64>>,
}

impl AdaptedFrame {
    /// Raw coordinates of `δ/δz^α`.
    pub fn horizontal(&self, alpha: usize) -> Vec<Complex64> {
        let mut v = vec![zero(); self.m + self.n];
        v[alpha] = Complex64::new(1.0, 0.0);
        for i in 0..self.n {
            v[self.m + i] = -self.lift[alpha][i];
        }
        v
    }

    /// Raw coordinates of `∂/∂v^i`.
    pub fn vertical(&self, i: usize) -> Vec<Complex64> {
        let mut v = vec![zero(); self.m + self.n];
        v[self.m + i] = Complex64::new(1.0, 0.0);
        v
    }

    /// Raw coordinates of `a^α δ/δz^α + b^i ∂/∂v^i`.
    pub fn to_raw(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut v = vec![zero(); self.m + self.n];
        v[..self.m].copy_from_slice(&a[..self.m]);
        for i in 0..self.n {
            let mut acc = b[i];
            for alpha in 0..self.m {
                acc -= a[alpha] * self.lift[alpha][i];
            }
            v[self.m + i] = acc;
        }
        v
    }

    /// All frame vectors, horizontal first.
    pub fn basis(&self) -> Vec<Vec<Complex64>> {
        (0..self.m)
            .map(|a| self.horizontal(a))
            .chain((0..self.n).map(|i| self.vertical(i)))
            .collect()
    }
}

pub fn horizontal_lift(fj: &FibrationJet) -> Result<AdaptedFrame> {
    let (m, n) = (fj.m, fj.n);
    let g = fj.vertical_hessian().inverse()?;
    let lift = (0..m)
        .map(|alpha| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| fj.phi.d(&[alpha], &[m + j]) * g[(j, i)])
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(AdaptedFrame { m, n, lift })
}

/// `c(φ)_{αβ̄} = φ_{αβ̄} - φ_{αj̄} φ^{j̄i} φ_{iβ̄}`.
pub fn geodesic_curvature(fj: &FibrationJet) -> Result<HermitianMatrix> {
    let (m, n) = (fj.m, fj.n);
    let frame = horizontal_lift(fj)?;
    let c = DMatrix::from_fn(m, m, |a, b| {
        let mut acc = fj.phi.d(&[a], &[b]);
        for i in 0..n {
            acc -= frame.lift[a][i] * fj.phi.d(&[m + i], &[b]);
        }
        acc
    });
    HermitianMatrix::new(c)
}

/// `μ[α][k][l] = -∂_{l̄} L^k_α`, the coefficient of `∂/∂v^k ⊗ dv̄^l`.
pub fn kodaira_spencer(fj: &FibrationJet) -> Result<Vec<Vec<Vec<Complex64>>>> {
    if fj.order() < 3 {
        return Err(KurvError::InvalidArgument(
            "Kodaira–Spencer tensor needs an order-3 jet".into(),
        ));
    }
    fj.vertical_hessian().inverse()?;
    let lj = LiftJets::new(fj, 0.0);
    let d = fj.dim();
    Ok((0..fj.m)
        .map(|alpha| {
            (0..fj.n)
                .map(|k| {
                    (0..fj.n)
                        .map(|l| -first_partial(&lj.lift[alpha][k], d + fj.m + l))
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// `Ω(k)` in the adapted frame: `kψ_{αβ̄} + c(φ)_{αβ̄}` and `φ_{ij̄}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaMetric {
    pub k: f64,
    pub horizontal: HermitianMatrix,
    pub vertical: HermitianMatrix,
    pub horizontal_positive: bool,
    pub vertical_positive: bool,
}

impl OmegaMetric {
    pub fn is_valid(&self) -> bool {
        self.horizontal_positive && self.vertical_positive
    }
}

pub fn omega_metric(fj: &FibrationJet, k: f64) -> Result<OmegaMetric> {
    if k.is_nan() || k < 0.0 {
        return Err(KurvError::InvalidArgument(format!(
            "k must be ≥ 0, got {k}"
        )));
    }
    let c = geodesic_curvature(fj)?;
    let horizontal =
        HermitianMatrix::new(fj.base_hessian().matrix() * Complex64::new(k, 0.0) + c.matrix())?;
    let vertical = fj.vertical_hessian();
    Ok(OmegaMetric {
        k,
        horizontal_positive: horizontal.is_positive_definite(),
        vertical_positive: vertical.is_positive_definite(),
        horizontal,
        vertical,
    })
}

fn require_valid(fj: &FibrationJet, k: f64) -> Result<OmegaMetric> {
    if fj.order() < 4 {
        return Err(KurvError::InvalidArgument(
            "adapted curvature needs an order-4 jet".into(),
        ));
    }
    let om = omega_metric(fj, k)?;
    if !om.is_valid() {
        return Err(KurvError::DegenerateOmega {
            k,
            reason: format!(
                "horizontal block min eigenvalue {:e}",
                om.horizontal.min_eigenvalue()
            ),
        });
    }
    Ok(om)
}

/// Four-index complex array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dims: [usize; 4],
    pub data: Vec<Complex64>,
}

impl Block {
    fn from_fn(dims: [usize; 4], f: impl Fn(usize, usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        data.push(f(a, b, c, d));
                    }
                }
            }
        }
        Block { dims, data }
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let [_, d1, d2, d3] = self.dims;
        self.data[((a * d1 + b) * d2 + c) * d3 + d]
    }

    /// Max-abs norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Block) -> Block {
        assert_eq!(self.dims, other.dims);
        Block {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// `R_{γσ̄αβ̄}`
    HorizontalHorizontal,
    /// `R_{γσ̄ij̄}`
    HorizontalVertical,
    /// `R_{kl̄ij̄}`
    VerticalVertical,
    /// `R_{kβ̄ij̄}`
    CrossVhVertical,
    /// `R_{αl̄ij̄}`
    CrossHvVertical,
    /// `R_{αl̄γj̄}`
    CrossHvMixed,
    /// `R_{iσ̄αβ̄}`
    CrossVhHorizontal,
}

impl BlockKind {
    pub const ALL: [BlockKind; 7] = [
        BlockKind::HorizontalHorizontal,
        BlockKind::HorizontalVertical,
        BlockKind::VerticalVertical,
        BlockKind::CrossVhVertical,
        BlockKind::CrossHvVertical,
        BlockKind::CrossHvMixed,
        BlockKind::CrossVhHorizontal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BlockKind::HorizontalHorizontal => "R_{γσ̄αβ̄}",
            BlockKind::HorizontalVertical => "R_{γσ̄ij̄}",
            BlockKind::VerticalVertical => "R_{kl̄ij̄}",
            BlockKind::CrossVhVertical => "R_{kβ̄ij̄}",
            BlockKind::CrossHvVertical => "R_{αl̄ij̄}",
            BlockKind::CrossHvMixed => "R_{αl̄γj̄}",
            BlockKind::CrossVhHorizontal => "R_{iσ̄αβ̄}",
        }
    }

    /// `(form-x, form-y, bundle-u, bundle-w)` with `true` = horizontal.
    fn slots(self) -> [bool; 4] {
        match self {
            BlockKind::HorizontalHorizontal => [true, true, true, true],
            BlockKind::HorizontalVertical => [true, true, false, false],
            BlockKind::VerticalVertical => [false, false, false, false],
            BlockKind::CrossVhVertical => [false, true, false, false],
            BlockKind::CrossHvVertical => [true, false, false, false],
            BlockKind::CrossHvMixed => [true, false, true, false],
            BlockKind::CrossVhHorizontal => [false, true, true, true],
        }
    }

    pub fn is_cross(self) -> bool {
        !matches!(
            self,
            BlockKind::HorizontalHorizontal
                | BlockKind::HorizontalVertical
                | BlockKind::VerticalVertical
        )
    }
}

/// The seven adapted-frame curvature blocks of `Ω(k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedFrameCurvature {
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub blocks: Vec<(BlockKind, Block)>,
}

impl AdaptedFrameCurvature {
    pub fn block(&self, kind: BlockKind) -> &Block {
        &self
            .blocks
            .iter()
            .find(|(k, _)| *k == kind)
            .expect("all kinds present")
            .1
    }

    /// Largest entry over all blocks.
    pub fn scale(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, b)| b.norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - B| / max(1, scale(B))` over all blocks.
    pub fn relative_difference(&self, other: &AdaptedFrameCurvature) -> f64 {
        let scale = other.scale().max(1.0);
        BlockKind::ALL
            .iter()
            .map(|&k| self.block(k).sub(other.block(k)).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// Largest violation of the conjugation symmetry
    /// `R_{xȳuw̄} = conj(R_{yx̄wū})` among blocks that are closed under it.
    pub fn conjugation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for kind in [
            BlockKind::HorizontalHorizontal,
            BlockKind::HorizontalVertical,
            BlockKind::VerticalVertical,
        ] {
            let b = self.block(kind);
            let [d0, d1, d2, d3] = b.dims;
            for a in 0..d0 {
                for bb in 0..d1 {
                    for c in 0..d2 {
                        for d in 0..d3 {
                            let diff = b.get(a, bb, c, d) - b.get(bb, a, d, c).conj();
                            worst = worst.max(diff.norm());
                        }
                    }
                }
            }
        }
        let (p, q) = (
            self.block(BlockKind::CrossVhVertical),
            self.block(BlockKind::CrossHvVertical),
        );
        for k in 0..self.n {
            for beta in 0..self.m {
                for i in 0..self.n {
                    for j in 0..self.n {
                        let diff = p.get(k, beta, i, j) - q.get(beta, k, j, i).conj();
                        worst = worst.max(diff.norm());
                    }
                }
            }
        }
        worst
    }
}

fn basis_vector(d: usize, i: usize) -> Vec<Complex64> {
    let mut v = vec![zero(); d];
    v[i] = Complex64::new(1.0, 0.0);
    v
}

fn first_partial(f: &Jet, var: usize) -> Complex64 {
    let mut e = vec![0u8; f.space().nvars()];
    e[var] = 1;
    f.partial(&e)
}

/// First and mixed second derivatives of a degree-2 jet, evaluated as
/// forms on `(X, Ȳ)`.
struct FormData {
    value: Complex64,
    hol: Vec<Complex64>,
    anti: Vec<Complex64>,
    mixed: DMatrix<Complex64>,
}

impl FormData {
    fn new(f: &Jet) -> Self {
        let d = f.space().nvars() / 2;
        let second = |c: usize, dd: usize| {
            let mut e = vec![0u8; 2 * d];
            e[c] += 1;
            e[d + dd] += 1;
            f.partial(&e)
        };
        FormData {
            value: f.value(),
            hol: (0..d).map(|c| first_partial(f, c)).collect(),
            anti: (0..d).map(|c| first_partial(f, d + c)).collect(),
            mixed: DMatrix::from_fn(d, d, second),
        }
    }

    /// `∂f(X)`
    fn dx(&self, x: &[Complex64]) -> Complex64 {
        self.hol.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `∂̄f(Ȳ)`
    fn dy(&self, y: &[Complex64]) -> Complex64 {
        self.anti.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
    }

    /// `∂∂̄f(X, Ȳ)`
    fn ddxy(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut acc = zero();
        for c in 0..x.len() {
            for d in 0..y.len() {
                acc += self.mixed[(c, d)] * x[c] * y[d].conj();
            }
        }
        acc
    }
}

/// Square matrix of jets.
#[derive(Clone)]
struct JetMatrix {
    r: usize,
    e: Vec<Jet>,
}

impl JetMatrix {
    fn from_fn(r: usize, f: impl Fn(usize, usize) -> Jet) -> Self {
        let mut e = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                e.push(f(i, j));
            }
        }
        JetMatrix { r, e }
    }

    fn at(&self, i: usize, j: usize) -> &Jet {
        &self.e[i * self.r + j]
    }

    fn mul(&self, other: &JetMatrix) -> JetMatrix {
        JetMatrix::from_fn(self.r, |i, j| {
            let mut acc = self.at(i, 0) * other.at(0, j);
            for k in 1..self.r {
                acc = acc + self.at(i, k) * other.at(k, j);
            }
            acc
        })
    }

    /// Inverse by the finite Neumann series around the constant part.
    fn inverse(&self) -> Result<JetMatrix> {
        let space = self.e[0].space().clone();
        let h0 = DMatrix::from_fn(self.r, self.r, |i, j| self.at(i, j).value());
        let inv0 = h0.clone().try_inverse().ok_or(KurvError::SingularMetric {
            min_eigenvalue: 0.0,
            threshold: 0.0,
        })?;
        let c0 = JetMatrix::from_fn(self.r, |i, j| Jet::constant(&space, inv0[(i, j)]));
        // -h0⁻¹ · (h - h0)
        let nil = JetMatrix::from_fn(self.r, |i, j| {
            self.at(i, j) - &Jet::constant(&space, h0[(i, j)])
        });
        let step = c0.mul(&nil);
        let step = JetMatrix {
            r: self.r,
            e: step.e.into_iter().map(|x| -x).collect(),
        };
        let mut acc = c0.clone();
        let mut term = c0;
        for _ in 0..space.degree() {
            term = step.mul(&term);
            acc = JetMatrix {
                r: self.r,
                e: acc.e.iter().zip(&term.e).map(|(a, b)| a + b).collect(),
            };
        }
        Ok(acc)
    }
}

/// Degree-2 jets of the Hessian entries, the lift and `Ω(k)`.
struct LiftJets {
    /// `hess[A][B] = φ_{AB̄}`
    hess: Vec<Vec<Jet>>,
    /// `g[j][i] = φ^{j̄i}`
    g: JetMatrix,
    /// `lift[α][i] = L^i_α`
    lift: Vec<Vec<Jet>>,
    /// `lift_bar[β][l] = conj(L^l_β)`
    lift_bar: Vec<Vec<Jet>>,
    /// `psi[α][β] = ψ_{αβ̄}`
    psi: Vec<Vec<Jet>>,
    /// `geo[α][β] = c(φ)_{αβ̄}`
    geo: Vec<Vec<Jet>>,
    /// `omega[α][β] = kψ_{αβ̄} + c(φ)_{αβ̄}`
    omega: Vec<Vec<Jet>>,
}

impl LiftJets {
    fn new(fj: &FibrationJet, k: f64) -> Self {
        let (m, n, d) = (fj.m, fj.n, fj.dim());
        let hess_of =
            |w: &WeightJet, a: usize, b: usize| w.jet().differentiate(a).differentiate(d + b);
        let hess: Vec<Vec<Jet>> = (0..d)
            .map(|a| (0..d).map(|b| hess_of(&fj.phi, a, b)).collect())
            .collect();
        let vert = JetMatrix::from_fn(n, |i, j| hess[m + i][m + j].clone());
        let g = vert
            .inverse()
            .expect("vertical Hessian checked at construction");
        let lift: Vec<Vec<Jet>> = (0..m)
            .map(|alpha| {
                (0..n)
                    .map(|i| {
                        let mut acc = &hess[alpha][m] * g.at(0, i);
                        for j in 1..n {
                            acc = acc + &hess[alpha][m + j] * g.at(j, i);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let lift_bar: Vec<Vec<Jet>> = (0..m)
            .map(|beta| {
                (0..n)
                    .map(|l| {
                        let mut acc = g.at(l, 0) * &hess[m][beta];
                        for j in 1..n {
                            acc = acc + g.at(l, j) * &hess[m + j][beta];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let psi: Vec<Vec<Jet>> = (0..m)
            .map(|a| (0..m).map(|b| hess_of(&fj.psi, a, b)).collect())
            .collect();
        let geo: Vec<Vec<Jet>> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| {
                        let mut acc = hess[a][b].clone();
                        for i in 0..n {
                            acc = acc - &lift[a][i] * &hess[m + i][b];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let omega = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| psi[a][b].clone() * k + geo[a][b].clone())
                    .collect()
            })
            .collect();
        LiftJets {
            hess,
            g,
            lift,
            lift_bar,
            psi,
            geo,
            omega,
        }
    }
}

fn form_table(t: &[Vec<Jet>]) -> Vec<Vec<FormData>> {
    t.iter()
        .map(|row| row.iter().map(FormData::new).collect())
        .collect()
}

/// Curvature of `Ω(k)` on the adapted frame from the closed formulas for
/// `⟨R δ_α, δ_β⟩`, `⟨R ∂_i, ∂_j⟩` and `⟨R δ_α, ∂_l⟩` as forms.
pub fn adapted_curvature_blocks(fj: &FibrationJet, k: f64) -> Result<AdaptedFrameCurvature> {
    let om = require_valid(fj, k)?;
    let (m, n, d) = (fj.m, fj.n, fj.dim());
    let lj = LiftJets::new(fj, k);

    let hess = form_table(&lj.hess);
    let lift = form_table(&lj.lift);
    let lift_bar = form_table(&lj.lift_bar);
    let omega = form_table(&lj.omega);
    let g = DMatrix::from_fn(n, n, |j, i| lj.g.at(j, i).value());
    let oinv = om.horizontal.inverse()?;
    let phiv = |i: usize, j: usize| hess[m + i][m + j].value;

    // ⟨R(X, Ȳ) δ_α, δ_β⟩
    let hh = |alpha: usize, beta: usize, x: &[Complex64], y: &[Complex64]| {
        let mut acc = -omega[alpha][beta].ddxy(x, y);
        for s in 0..m {
            for gm in 0..m {
                acc += omega[alpha][s].dx(x) * oinv[(s, gm)] * omega[gm][beta].dy(y);
            }
        }
        for i in 0..n {
            let a = lift[alpha][i].dy(y);
            for l in 0..n {
                acc -= a * lift_bar[beta][l].dx(x) * phiv(i, l);
            }
        }
        acc
    };

    // ⟨R(X, Ȳ) ∂_i, ∂_j⟩
    let vv = |i: usize, j: usize, x: &[Complex64], y: &[Complex64]| {
        let mut acc = -hess[m + i][m + j].ddxy(x, y);
        for l in 0..n {
            let a = hess[m + i][m + l].dx(x);
            for kk in 0..n {
                acc += g[(l, kk)] * a * hess[m + kk][m + j].dy(y);
            }
        }
        let left: Vec<Complex64> = (0..m)
            .map(|beta| (0..n).map(|q| lift_bar[beta][q].dx(x) * phiv(i, q)).sum())
            .collect();
        let right: Vec<Complex64> = (0..m)
            .map(|alpha| (0..n).map(|kk| lift[alpha][kk].dy(y) * phiv(kk, j)).sum())
            .collect();
        for beta in 0..m {
            for alpha in 0..m {
                acc += left[beta] * oinv[(beta, alpha)] * right[alpha];
            }
        }
        acc
    };

    // ⟨R(X, Ȳ) δ_α, ∂_l⟩
    let hv = |alpha: usize, l: usize, x: &[Complex64], y: &[Complex64]| {
        let mut acc = zero();
        for i in 0..n {
            let mut t = -lift[alpha][i].ddxy(x, y);
            for kk in 0..n {
                let a = lift[alpha][kk].dy(y);
                for j in 0..n {
                    t -= a * hess[m + kk][m + j].dx(x) * g[(j, i)];
                }
            }
            for beta in 0..m {
                let a = omega[alpha][beta].dx(x);
                for gm in 0..m {
                    t += a * oinv[(beta, gm)] * lift[gm][i].dy(y);
                }
            }
            acc += t * phiv(i, l);
        }
        acc
    };

    let frame = horizontal_lift(fj)?;
    let hor: Vec<Vec<Complex64>> = (0..m).map(|a| frame.horizontal(a)).collect();
    let ver: Vec<Vec<Complex64>> = (0..n).map(|i| basis_vector(d, m + i)).collect();

    let blocks = vec![
        (
            BlockKind::HorizontalHorizontal,
            Block::from_fn([m, m, m, m], |gm, s, a, b| hh(a, b, &hor[gm], &hor[s])),
        ),
        (
            BlockKind::HorizontalVertical,
            Block::from_fn([m, m, n, n], |gm, s, i, j| vv(i, j, &hor[gm], &hor[s])),
        ),
        (
            BlockKind::VerticalVertical,
            Block::from_fn([n, n, n, n], |kk, l, i, j| vv(i, j, &ver[kk], &ver[l])),
        ),
        (
            BlockKind::CrossVhVertical,
            Block::from_fn([n, m, n, n], |kk, b, i, j| vv(i, j, &ver[kk], &hor[b])),
        ),
        (
            BlockKind::CrossHvVertical,
            Block::from_fn([m, n, n, n], |a, l, i, j| vv(i, j, &hor[a], &ver[l])),
        ),
        (
            BlockKind::CrossHvMixed,
            Block::from_fn([m, n, m, n], |a, l, gm, j| hv(gm, j, &hor[a], &ver[l])),
        ),
        (
            BlockKind::CrossVhHorizontal,
            Block::from_fn([n, m, m, m], |i, s, a, b| hh(a, b, &ver[i], &hor[s])),
        ),
    ];
    Ok(AdaptedFrameCurvature { m, n, k, blocks })
}

/// `R_{γσ̄αβ̄} - k·R^{T_B}_{αβ̄γσ̄}` on the adapted frame, with the `k`-linear
/// part cancelled symbolically: with `P = kψ`, `A = kψ'` and `B = c(φ)'`,
/// `A·Ω⁻¹·A - A·P⁻¹·A = -A·P⁻¹·c(φ)·Ω⁻¹·A`. Subtracting the two blocks
/// instead loses about `k·|R^{T_B}|·ε` to cancellation.
pub fn horizontal_deviation(fj: &FibrationJet, k: f64) -> Result<Block> {
    let om = require_valid(fj, k)?;
    let (m, n) = (fj.m, fj.n);
    let lj = LiftJets::new(fj, k);
    let hess = form_table(&lj.hess);
    let lift = form_table(&lj.lift);
    let lift_bar = form_table(&lj.lift_bar);
    let psi = form_table(&lj.psi);
    let geo = form_table(&lj.geo);
    let oinv = om.horizontal.inverse()?;
    let pinv = DMatrix::from_fn(m, m, |a, b| psi[a][b].value * k)
        .try_inverse()
        .ok_or(KurvError::SingularMetric {
            min_eigenvalue: 0.0,
            threshold: 0.0,
        })?;
    let c0 = DMatrix::from_fn(m, m, |a, b| geo[a][b].value);
    let corr = &pinv * c0 * &oinv;
    let phiv = |i: usize, j: usize| hess[m + i][m + j].value;

    let dev = |alpha: usize, beta: usize, x: &[Complex64], y: &[Complex64]| {
        let mut acc = -geo[alpha][beta].ddxy(x, y);
        for s in 0..m {
            let (ax, bx) = (psi[alpha][s].dx(x) * k, geo[alpha][s].dx(x));
            for gm in 0..m {
                let (ay, by) = (psi[gm][beta].dy(y) * k, geo[gm][beta].dy(y));
                acc += ax * oinv[(s, gm)] * by + bx * oinv[(s, gm)] * (ay + by)
                    - ax * corr[(s, gm)] * ay;
            }
        }
        for i in 0..n {
            let a = lift[alpha][i].dy(y);
            for l in 0..n {
                acc -= a * lift_bar[beta][l].dx(x) * phiv(i, l);
            }
        }
        acc
    };
    let frame = horizontal_lift(fj)?;
    let hor: Vec<Vec<Complex64>> = (0..m).map(|a| frame.horizontal(a)).collect();
    Ok(Block::from_fn([m, m, m, m], |gm, s, a, b| {
        dev(a, b, &hor[gm], &hor[s])
    }))
}

/// Raw Chern curvature of `Ω(k)` in the coordinates `(z, v)` and its metric.
pub fn total_curvature(fj: &FibrationJet, k: f64) -> Result<(ChernCurvature, HermitianMatrix)> {
    let md = MetricDerivatives::from_weight(&fj.total_weight(k), &fj.all_idx(), &fj.all_idx())?;
    Ok((chern_curvature(&md)?, md.h))
}

/// Chern curvature of `(φ_{ij̄})` on the vertical bundle over all directions.
pub fn vertical_curvature(fj: &FibrationJet) -> Result<ChernCurvature> {
    let md = MetricDerivatives::from_weight(&fj.phi, &fj.fiber_idx(), &fj.all_idx())?;
    chern_curvature(&md)
}

/// Chern curvature of the base metric `(ψ_{αβ̄})`.
pub fn base_curvature(fj: &FibrationJet) -> Result<(ChernCurvature, HermitianMatrix)> {
    let md = MetricDerivatives::from_weight(&fj.psi, &fj.base_idx(), &fj.base_idx())?;
    Ok((chern_curvature(&md)?, md.h))
}

/// Chern curvature of a single fiber `(φ_{ij̄})` along fiber directions.
pub fn fiber_curvature(fj: &FibrationJet) -> Result<(ChernCurvature, HermitianMatrix)> {
    let md = MetricDerivatives::from_weight(&fj.phi, &fj.fiber_idx(), &fj.fiber_idx())?;
    Ok((chern_curvature(&md)?, md.h))
}

/// Independent route: Chern curvature of the full metric `Hess(kψ + φ)` in
/// raw coordinates, contracted with the adapted frame vectors.
pub fn generic_frame_oracle(fj: &FibrationJet, k: f64) -> Result<AdaptedFrameCurvature> {
    require_valid(fj, k)?;
    let (m, n) = (fj.m, fj.n);
    let (t, _) = total_curvature(fj, k)?;
    let frame = horizontal_lift(fj)?;
    let hor: Vec<Vec<Complex64>> = (0..m).map(|a| frame.horizontal(a)).collect();
    let ver: Vec<Vec<Complex64>> = (0..n).map(|i| frame.vertical(i)).collect();
    let pick = |h: bool, i: usize| if h { &hor[i] } else { &ver[i] };
    let size = |h: bool| if h { m } else { n };
    let blocks = BlockKind::ALL
        .iter()
        .map(|&kind| {
            let [sx, sy, su, sw] = kind.slots();
            let dims = [size(sx), size(sy), size(su), size(sw)];
            let block = Block::from_fn(dims, |x, y, u, w| {
                t.contract(pick(su, u), pick(sw, w), pick(sx, x), pick(sy, y))
            });
            (kind, block)
        })
        .collect();
    Ok(AdaptedFrameCurvature { m, n, k, blocks })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResidual {
    /// `max |ω_X(δ_α, conj δ_β) - c(φ)_{αβ̄}|`
    pub horizontal: f64,
    /// `max |ω_X(δ_α, conj ∂_j)|`
    pub mixed: f64,
}

pub fn decomposition_check(fj: &FibrationJet) -> Result<DecompositionResidual> {
    let (m, n) = (fj.m, fj.n);
    let h = fj.phi_hessian();
    let frame = horizontal_lift(fj)?;
    let c = geodesic_curvature(fj)?;
    let form = |x: &[Complex64], y: &[Complex64]| {
        let mut acc = zero();
        for a in 0..x.len() {
            for b in 0..y.len() {
                acc += h[(a, b)] * x[a] * y[b].conj();
            }
        }
        acc
    };
    let mut horizontal: f64 = 0.0;
    let mut mixed: f64 = 0.0;
    for a in 0..m {
        let da = frame.horizontal(a);
        for b in 0..m {
            let r = form(&da, &frame.horizontal(b)) - c.get(a, b);
            horizontal = horizontal.max(r.norm());
        }
        for j in 0..n {
            mixed = mixed.max(form(&da, &frame.vertical(j)).norm());
        }
    }
    Ok(DecompositionResidual { horizontal, mixed })
}

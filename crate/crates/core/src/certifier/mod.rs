//! Empirical negativity checks for `Ω(k)`: sampled suprema of holomorphic
//! sectional and bisectional curvature, threshold search in `k`, asymptotic
//! order fits for the adapted blocks and the constants of the Griffiths
//! argument.
//!
//! Every result here is sampled evidence. Reports say so in their `status`
//! field and carry the seed and counts needed to reproduce them.

mod asymptotics;
mod bounds;
mod sampling;
mod threshold;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};
use crate::fibration::{
    horizontal_lift, omega_metric, total_curvature, AdaptedFrame, FibrationJet,
};
use crate::hermitian::{hbc, hsc, ChernCurvature, HermitianMatrix};
use crate::jets::ChartPoint;
use crate::models::ModelSpec;

pub use asymptotics::{
    asymptotic_check, asymptotic_check_jet, parse_k_grid, AsymptoticsReport, BlockFit, BlockLaw,
    FitVerdict, HH_DEVIATION, HV_DEVIATION, VV_DEVIATION,
};
pub use bounds::{
    companion_seed, estimate_griffiths_bounds, estimate_griffiths_bounds_jets,
    estimate_hsc_sup_base_fiber, estimate_hsc_sup_base_fiber_jets, GriffithsBounds,
    SectionalBounds,
};
pub use sampling::{
    sample_directions, Direction, DirectionPair, DirectionSample, SampleMode, CHUNK,
};
pub use threshold::{
    find_threshold, threshold_search, NegativityCertificate, ThresholdOptions, ThresholdSearch,
};

pub const EMPIRICAL: &str = "empirical";
/// Coordinate-ascent sweeps spent on each refined candidate.
pub const REFINE_STEPS: usize = 20;
const REFINE_CANDIDATES: usize = 3;
const REFINE_STEP0: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Hsc,
    Hbc,
}

impl std::str::FromStr for Quantity {
    type Err = KurvError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hsc" => Ok(Quantity::Hsc),
            "hbc" => Ok(Quantity::Hbc),
            other => Err(KurvError::InvalidArgument(format!(
                "unknown quantity `{other}`"
            ))),
        }
    }
}

/// Map from orthonormal coefficients to raw tangent vectors at one point.
#[derive(Clone, Debug)]
pub struct DirectionMap {
    frame: AdaptedFrame,
    ha: DMatrix<Complex64>,
    hb: DMatrix<Complex64>,
}

/// `(Cᵀ)⁻¹` for the Cholesky factor `C` of `h`; maps unit coefficients to
/// `h`-unit vectors.
fn unit_map(h: &HermitianMatrix) -> Result<DMatrix<Complex64>> {
    let c = h.cholesky_factor()?;
    c.transpose()
        .try_inverse()
        .ok_or(KurvError::SingularMetric {
            min_eigenvalue: h.min_eigenvalue(),
            threshold: 0.0,
        })
}

impl DirectionMap {
    pub fn new(fj: &FibrationJet) -> Result<Self> {
        Ok(DirectionMap {
            frame: horizontal_lift(fj)?,
            ha: unit_map(&fj.base_hessian())?,
            hb: unit_map(&fj.vertical_hessian())?,
        })
    }

    pub fn horizontal(&self, d: &Direction) -> Vec<Complex64> {
        (&self.ha * nalgebra::DVector::from_column_slice(&d.a))
            .iter()
            .copied()
            .collect()
    }

    pub fn vertical(&self, d: &Direction) -> Vec<Complex64> {
        (&self.hb * nalgebra::DVector::from_column_slice(&d.b))
            .iter()
            .copied()
            .collect()
    }

    /// `a^α δ/δz^α + b^i ∂/∂v^i` in raw coordinates.
    pub fn raw(&self, d: &Direction) -> Vec<Complex64> {
        self.frame.to_raw(&self.horizontal(d), &self.vertical(d))
    }

    pub fn frame(&self) -> &AdaptedFrame {
        &self.frame
    }
}

/// Curvature of `Ω(k)` at one point, ready for contraction.
struct PointCurvature {
    map: DirectionMap,
    t: ChernCurvature,
    g: HermitianMatrix,
}

impl PointCurvature {
    fn new(fj: &FibrationJet, k: f64) -> Result<Self> {
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
        let (t, g) = total_curvature(fj, k)?;
        Ok(PointCurvature {
            map: DirectionMap::new(fj)?,
            t,
            g,
        })
    }

    fn value(&self, q: Quantity, x: &Direction, w: Option<&Direction>) -> Result<f64> {
        let xr = self.map.raw(x);
        match q {
            Quantity::Hsc => hsc(&self.t, &self.g, &xr),
            Quantity::Hbc => {
                let w = w.ok_or_else(|| {
                    KurvError::InvalidArgument("bisectional curvature needs paired samples".into())
                })?;
                hbc(&self.t, &self.g, &xr, &self.map.raw(w))
            }
        }
    }
}

/// Sampled supremum and where it was attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub sup: f64,
    /// Best value over the raw samples before refinement.
    pub sampled_sup: f64,
    pub point_index: usize,
    pub argmax: DirectionPair,
    pub evaluations: usize,
}

/// Coordinate ascent on the real parameters of `start`, `REFINE_STEPS`
/// sweeps, halving the step after a sweep without improvement. Complex
/// coordinates that are zero in `start` stay zero, so a sample drawn from a
/// stratum is refined inside it.
pub(crate) fn coordinate_ascent(
    start: &[f64],
    start_value: f64,
    f: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64, usize) {
    let mut x = start.to_vec();
    let mut best = start_value;
    let mut step = REFINE_STEP0;
    let mut evals = 0;
    let free: Vec<usize> = (0..x.len())
        .filter(|&p| start[p & !1] != 0.0 || start.get(p | 1).is_some_and(|&v| v != 0.0))
        .collect();
    for _ in 0..REFINE_STEPS {
        let mut improved = false;
        for &p in &free {
            for s in [step, -step] {
                let mut trial = x.clone();
                trial[p] += s;
                let v = f(&trial);
                evals += 1;
                if v > best {
                    best = v;
                    x = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best, evals)
}

fn split_params(
    p: &[f64],
    m: usize,
    n: usize,
    paired: bool,
) -> Option<(Direction, Option<Direction>)> {
    let len = 2 * (m + n);
    let x = Direction::from_params(&p[..len], m).normalized()?;
    let w = if paired {
        Some(Direction::from_params(&p[len..], m).normalized()?)
    } else {
        None
    };
    Some((x, w))
}

/// Maximum of `quantity` for `Ω(k)` over points × directions, followed by a
/// local coordinate-ascent refinement around the best samples.
pub fn sup_curvature_jets(
    fjs: &[FibrationJet],
    k: f64,
    quantity: Quantity,
    sample: &DirectionSample,
    refine: bool,
) -> Result<SupEstimate> {
    if fjs.is_empty() {
        return Err(KurvError::InvalidArgument("need at least one point".into()));
    }
    if quantity == Quantity::Hbc && !sample.mode.is_pairs() {
        return Err(KurvError::InvalidArgument(
            "bisectional curvature needs a pairs or mixed_pairs sample".into(),
        ));
    }
    let curv: Vec<PointCurvature> = fjs
        .par_iter()
        .map(|fj| PointCurvature::new(fj, k))
        .collect::<Result<_>>()?;
    let per_point = sample.directions.len();
    let values: Vec<f64> = (0..curv.len() * per_point)
        .into_par_iter()
        .map(|idx| {
            let (p, s) = (idx / per_point, idx % per_point);
            let d = &sample.directions[s];
            curv[p].value(quantity, &d.x, d.w.as_ref())
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let best = order[0];
    let sampled_sup = values[best];
    let mut result = SupEstimate {
        sup: sampled_sup,
        sampled_sup,
        point_index: best / per_point,
        argmax: sample.directions[best % per_point].clone(),
        evaluations: values.len(),
    };
    if !refine {
        return Ok(result);
    }

    let (m, n) = (sample.m, sample.n);
    let paired = quantity == Quantity::Hbc;
    let refined: Vec<(usize, Vec<f64>, f64, usize)> = order
        .iter()
        .take(REFINE_CANDIDATES)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&idx| {
            let pc = &curv[idx / per_point];
            let d = &sample.directions[idx % per_point];
            let mut start = d.x.to_params();
            if let Some(w) = &d.w {
                start.extend(w.to_params());
            }
            let objective = |p: &[f64]| {
                split_params(p, m, n, paired)
                    .and_then(|(x, w)| pc.value(quantity, &x, w.as_ref()).ok())
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let (x, v, evals) = coordinate_ascent(&start, values[idx], objective);
            (idx, x, v, evals)
        })
        .collect();
    for (idx, x, v, evals) in refined {
        result.evaluations += evals;
        if v > result.sup {
            let (xd, wd) = split_params(&x, m, n, paired).expect("finite optimum");
            result.sup = v;
            result.point_index = idx / per_point;
            result.argmax = DirectionPair { x: xd, w: wd };
        }
    }
    Ok(result)
}

/// Fibration jets of a catalog model at the given points.
pub fn model_jets(model: &ModelSpec, points: &[ChartPoint]) -> Result<Vec<FibrationJet>> {
    points.par_iter().map(|p| model.fibration_jet(p)).collect()
}

/// [`sup_curvature_jets`] for a catalog model, with refinement.
pub fn sup_curvature(
    model: &ModelSpec,
    points: &[ChartPoint],
    k: f64,
    quantity: Quantity,
    sample: &DirectionSample,
) -> Result<SupEstimate> {
    sup_curvature_jets(&model_jets(model, points)?, k, quantity, sample, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::VERDICT_TOL;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn product_horizontal_hsc_is_minus_one_over_k() {
        let model = ModelSpec::product_poincare(1, 1);
        let pts = model.random_points(4, 2, 0.8);
        let s = sample_directions(1, 1, 64, 3, SampleMode::Horizontal).unwrap();
        for k in [1.0, 10.0] {
            let est = sup_curvature(&model, &pts, k, Quantity::Hsc, &s).unwrap();
            assert!((est.sup + 1.0 / k).abs() < 1e-10, "k = {k}: {}", est.sup);
        }
    }

    #[test]
    fn product_full_hsc_sup_is_minus_one_over_k_plus_one() {
        // HSC = -(k x² + y²)/(k x + y)² with x + y = 1 peaks at -1/(k+1).
        let model = ModelSpec::product_poincare(1, 1);
        let pts = vec![ChartPoint::new(vec![c(0.1, 0.2)], vec![c(-0.3, 0.0)])];
        let s = sample_directions(1, 1, 400, 1, SampleMode::Stratified).unwrap();
        let k = 4.0;
        let est = sup_curvature(&model, &pts, k, Quantity::Hsc, &s).unwrap();
        assert!(est.sup <= -1.0 / (k + 1.0) + 1e-12);
        assert!((est.sup + 1.0 / (k + 1.0)).abs() < 1e-6, "{}", est.sup);
        assert!(est.sup >= est.sampled_sup);
    }

    #[test]
    fn product_mixed_hbc_is_zero() {
        let model = ModelSpec::product_poincare(1, 1);
        let pts = model.random_points(3, 8, 0.8);
        let s = sample_directions(1, 1, 100, 4, SampleMode::MixedPairs).unwrap();
        for k in [1.0, 10.0, 100.0] {
            let est = sup_curvature(&model, &pts, k, Quantity::Hbc, &s).unwrap();
            assert!(est.sup.abs() <= VERDICT_TOL, "{}", est.sup);
        }
    }

    #[test]
    fn sheared_hsc_negative_at_large_k() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let s = sample_directions(1, 1, 1000, 6, SampleMode::Stratified).unwrap();
        let est =
            sup_curvature(&model, &[ChartPoint::origin(1, 1)], 1e4, Quantity::Hsc, &s).unwrap();
        assert!(est.sup < -VERDICT_TOL);
    }

    #[test]
    fn degenerate_omega_is_an_error() {
        let model = ModelSpec::product_poincare(1, 1);
        let s = sample_directions(1, 1, 4, 0, SampleMode::Full).unwrap();
        assert!(matches!(
            sup_curvature(&model, &[ChartPoint::origin(1, 1)], 0.0, Quantity::Hsc, &s),
            Err(KurvError::DegenerateOmega { .. })
        ));
    }

    #[test]
    fn hbc_requires_pairs() {
        let model = ModelSpec::product_poincare(1, 1);
        let s = sample_directions(1, 1, 4, 0, SampleMode::Full).unwrap();
        assert!(
            sup_curvature(&model, &[ChartPoint::origin(1, 1)], 1.0, Quantity::Hbc, &s).is_err()
        );
    }

    #[test]
    fn direction_map_produces_unit_block_norms() {
        let model = ModelSpec::sheared_poincare(0.2, 3.0).unwrap();
        let p = ChartPoint::new(vec![c(0.1, -0.2)], vec![c(0.3, 0.3)]);
        let fj = model.fibration_jet(&p).unwrap();
        let map = DirectionMap::new(&fj).unwrap();
        let s = sample_directions(1, 1, 20, 2, SampleMode::Full).unwrap();
        for d in &s.directions {
            let a = map.horizontal(&d.x);
            let b = map.vertical(&d.x);
            let total = fj.base_hessian().norm_sq(&a) + fj.vertical_hessian().norm_sq(&b);
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinate_ascent_climbs_a_concave_bump() {
        let f = |p: &[f64]| -(p[0] - 0.3).powi(2) - (p[1] + 0.2).powi(2);
        let (x, v, _) = coordinate_ascent(&[0.1, 0.1], f(&[0.1, 0.1]), f);
        assert!(v > -1e-3 && (x[0] - 0.3).abs() < 0.05);
    }

    #[test]
    fn coordinate_ascent_keeps_zero_coordinates() {
        let f = |p: &[f64]| -(p[0] - 0.3).powi(2) - (p[2] + 0.2).powi(2);
        let (x, _, _) = coordinate_ascent(&[0.1, 0.0, 0.0, 0.0], f(&[0.1, 0.0, 0.0, 0.0]), f);
        assert_eq!(&x[2..], &[0.0, 0.0]);
        assert!((x[0] - 0.3).abs() < 0.05);
    }
}

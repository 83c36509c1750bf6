//! Sampled constants: the base and fiber sectional bounds `eps_base`,
//! `eps_fiber`, and the Griffiths constants `c₀`, `C₀`, `c₁` with
//! `eps_griffiths = c₁ / (2 C₀)`.
//!
//! Total-space directions are measured in `Ω(1) = ψ + φ`, the first member
//! of the family that is positive for every builtin model.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    coordinate_ascent, model_jets, sample_directions, Direction, DirectionMap, DirectionSample,
    SampleMode, EMPIRICAL,
};
use crate::error::{KurvError, Result};
use crate::fibration::{
    base_curvature, fiber_curvature, total_curvature, vertical_curvature, FibrationJet,
};
use crate::hermitian::{hsc, ChernCurvature, HermitianMatrix, VERDICT_TOL};
use crate::jets::ChartPoint;
use crate::models::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionalBounds {
    pub status: String,
    /// `-(max sampled base HSC)`; positive iff strict negativity was seen.
    pub eps_base: f64,
    /// `-(max sampled fiber HSC)`.
    pub eps_fiber: f64,
    pub base_samples: usize,
    pub fiber_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GriffithsBounds {
    pub status: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    /// `min -R^V_{XX̄VV̄} / (‖X‖²‖V‖²)`
    pub c0: f64,
    /// `max -R^V_{XX̄VV̄} / (‖X‖²‖V‖²)`
    pub cap_c0: f64,
    /// `min (2√(R^V_{ZZ̄VV̄} R^V_{YȲVV̄}) - |R^V_{YZ̄VV̄} + R^V_{ZȲVV̄}|) / (‖V‖²‖Z‖‖Y‖)`
    pub c1: f64,
    /// `max(c₁, 0) / (2 C₀)`, zero when `C₀ = 0`.
    pub eps_griffiths: f64,
    pub griffiths_negative: bool,
    pub seed: u64,
    pub samples: usize,
    /// Samples whose `Y` or `Z` part vanished, left out of `c₁`.
    pub skipped: usize,
}

/// Max of `f` over unit vectors `u = map(d)`, refined by coordinate ascent
/// around the best three.
fn refined_max(
    dirs: &[Direction],
    m: usize,
    f: &(dyn Fn(&Direction) -> Option<f64> + Sync),
) -> Option<f64> {
    let mut scored: Vec<(f64, &Direction)> =
        dirs.iter().filter_map(|d| f(d).map(|v| (v, d))).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored.first()?.0;
    for (v, d) in scored.iter().take(3) {
        let (_, refined, _) = coordinate_ascent(&d.to_params(), *v, |p| {
            Direction::from_params(p, m)
                .normalized()
                .and_then(|d| f(&d))
                .unwrap_or(f64::NEG_INFINITY)
        });
        best = best.max(refined);
    }
    Some(best)
}

fn hsc_of(r: &ChernCurvature, h: &HermitianMatrix, v: &[Complex64]) -> Option<f64> {
    if v.iter().all(|c| c.norm() == 0.0) {
        return None;
    }
    hsc(r, h, v).ok()
}

/// Sampled sectional bounds of the base metric `ψ` and of the fiber
/// metrics `φ|_fiber`, from the `a` and `b` parts of `sample`.
pub fn estimate_hsc_sup_base_fiber(
    model: &ModelSpec,
    points: &[ChartPoint],
    sample: &DirectionSample,
) -> Result<SectionalBounds> {
    estimate_hsc_sup_base_fiber_jets(&model_jets(model, points)?, sample)
}

pub fn estimate_hsc_sup_base_fiber_jets(
    fjs: &[FibrationJet],
    sample: &DirectionSample,
) -> Result<SectionalBounds> {
    if fjs.is_empty() {
        return Err(KurvError::InvalidArgument("need at least one point".into()));
    }
    let m = sample.m;
    let dirs: Vec<Direction> = sample.directions.iter().map(|d| d.x.clone()).collect();
    let base_dirs: Vec<Direction> = dirs
        .iter()
        .filter_map(|d| {
            Direction {
                a: d.a.clone(),
                b: vec![Complex64::new(0.0, 0.0); d.b.len()],
            }
            .normalized()
        })
        .collect();
    let fiber_dirs: Vec<Direction> = dirs
        .iter()
        .filter_map(|d| {
            Direction {
                a: vec![Complex64::new(0.0, 0.0); m],
                b: d.b.clone(),
            }
            .normalized()
        })
        .collect();
    let per_point: Vec<(Option<f64>, Option<f64>)> = fjs
        .par_iter()
        .map(|fj| -> Result<_> {
            let map = DirectionMap::new(fj)?;
            let (tb, hb) = base_curvature(fj)?;
            let (tf, hf) = fiber_curvature(fj)?;
            let base = refined_max(&base_dirs, m, &|d| hsc_of(&tb, &hb, &map.horizontal(d)));
            let fiber = refined_max(&fiber_dirs, m, &|d| hsc_of(&tf, &hf, &map.vertical(d)));
            Ok((base, fiber))
        })
        .collect::<Result<_>>()?;
    let fold = |xs: Vec<Option<f64>>| xs.into_iter().flatten().fold(f64::NEG_INFINITY, f64::max);
    let base_sup = fold(per_point.iter().map(|p| p.0).collect());
    let fiber_sup = fold(per_point.iter().map(|p| p.1).collect());
    if !base_sup.is_finite() || !fiber_sup.is_finite() {
        return Err(KurvError::InvalidArgument(
            "sample has no usable horizontal or vertical directions".into(),
        ));
    }
    Ok(SectionalBounds {
        status: EMPIRICAL.to_string(),
        eps_base: 0.0 - base_sup,
        eps_fiber: 0.0 - fiber_sup,
        base_samples: base_dirs.len() * fjs.len(),
        fiber_samples: fiber_dirs.len() * fjs.len(),
    })
}

struct GriffithsPoint {
    rv: ChernCurvature,
    hv: HermitianMatrix,
    g1: HermitianMatrix,
    map: DirectionMap,
}

impl GriffithsPoint {
    fn new(fj: &FibrationJet) -> Result<Self> {
        let (_, g1) = total_curvature(fj, 1.0)?;
        Ok(GriffithsPoint {
            rv: vertical_curvature(fj)?,
            hv: fj.vertical_hessian(),
            g1,
            map: DirectionMap::new(fj)?,
        })
    }

    /// `⟨R^V(X, Ȳ)V, V⟩`
    fn r(&self, v: &[Complex64], x: &[Complex64], y: &[Complex64]) -> Complex64 {
        self.rv.contract(v, v, x, y)
    }
}

/// Seed of the vertical `V` sample paired with a direction sample.
pub fn companion_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Sampled Griffiths constants of the vertical bundle over the total space.
///
/// `sample` supplies `X = Y + Z` (use [`SampleMode::Stratified`] so pure
/// horizontal and vertical directions are included); `V` is drawn from
/// [`companion_seed`].
pub fn estimate_griffiths_bounds(
    model: &ModelSpec,
    points: &[ChartPoint],
    sample: &DirectionSample,
) -> Result<GriffithsBounds> {
    let fjs = model_jets(model, points)?;
    let mut b = estimate_griffiths_bounds_jets(&fjs, sample)?;
    b.model = model.name().to_string();
    b.params = model.params().clone();
    Ok(b)
}

pub fn estimate_griffiths_bounds_jets(
    fjs: &[FibrationJet],
    sample: &DirectionSample,
) -> Result<GriffithsBounds> {
    if fjs.is_empty() {
        return Err(KurvError::InvalidArgument("need at least one point".into()));
    }
    let (m, n) = (sample.m, sample.n);
    let vs = sample_directions(
        m,
        n,
        sample.count,
        companion_seed(sample.seed),
        SampleMode::Vertical,
    )?;
    let pts: Vec<GriffithsPoint> = fjs
        .par_iter()
        .map(GriffithsPoint::new)
        .collect::<Result<_>>()?;
    let zero = vec![Complex64::new(0.0, 0.0); m];
    let per_sample = sample.directions.len();

    // (ratio, Some(gap ratio) or None when Y or Z vanishes)
    let rows: Vec<(f64, Option<f64>)> = (0..pts.len() * per_sample)
        .into_par_iter()
        .map(|idx| {
            let p = &pts[idx / per_sample];
            let s = idx % per_sample;
            let d = &sample.directions[s].x;
            let v = p.map.vertical(&vs.directions[s].x);
            let nv = p.hv.norm_sq(&v);
            let x = p.map.raw(d);
            let ratio = (0.0 - p.r(&v, &x, &x).re) / (p.g1.norm_sq(&x) * nv);

            let y = p.map.raw(&Direction {
                a: d.a.clone(),
                b: vec![Complex64::new(0.0, 0.0); n],
            });
            let z = p.map.raw(&Direction {
                a: zero.clone(),
                b: d.b.clone(),
            });
            let (ny, nz) = (p.g1.norm_sq(&y), p.g1.norm_sq(&z));
            let gap = (ny > 0.0 && nz > 0.0).then(|| {
                let rzz = p.r(&v, &z, &z).re;
                let ryy = p.r(&v, &y, &y).re;
                let cross = p.r(&v, &y, &z) + p.r(&v, &z, &y);
                (2.0 * (rzz * ryy).max(0.0).sqrt() - cross.norm()) / (nv * nz.sqrt() * ny.sqrt())
            });
            (ratio, gap)
        })
        .collect();

    let c0 = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let cap_c0 = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
    let skipped = rows.len() - gaps.len();
    let c1 = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let c1 = if c1.is_finite() { c1 } else { 0.0 };
    let eps_griffiths = if cap_c0 > 0.0 {
        c1.max(0.0) / (2.0 * cap_c0)
    } else {
        0.0
    };
    Ok(GriffithsBounds {
        status: EMPIRICAL.to_string(),
        model: String::new(),
        params: BTreeMap::new(),
        c0,
        cap_c0,
        c1,
        eps_griffiths,
        griffiths_negative: c0 > VERDICT_TOL,
        seed: sample.seed,
        samples: rows.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stratified(count: usize, seed: u64) -> DirectionSample {
        sample_directions(1, 1, count, seed, SampleMode::Stratified).unwrap()
    }

    #[test]
    fn poincare_sectional_bounds_are_one() {
        let model = ModelSpec::product_poincare(1, 1);
        let b = estimate_hsc_sup_base_fiber(
            &model,
            &model.random_points(5, 1, 0.9),
            &stratified(40, 2),
        )
        .unwrap();
        assert!((b.eps_base - 1.0).abs() < 1e-10);
        assert!((b.eps_fiber - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_fiber_has_zero_bound() {
        let model = ModelSpec::flat(1, 1);
        let b =
            estimate_hsc_sup_base_fiber(&model, &[ChartPoint::origin(1, 1)], &stratified(40, 2))
                .unwrap();
        assert_eq!(b.eps_fiber, 0.0);
        assert_eq!(b.eps_base, 0.0);
    }

    #[test]
    fn shift_invariance_is_exact() {
        let fj = crate::models::random_fibration_jet(2, 2, 4).unwrap();
        let s = sample_directions(2, 2, 64, 3, SampleMode::Stratified).unwrap();
        let a = estimate_hsc_sup_base_fiber_jets(std::slice::from_ref(&fj), &s).unwrap();
        let b = estimate_hsc_sup_base_fiber_jets(&[fj.shifted(3.0, -1.5)], &s).unwrap();
        assert_eq!(a, b);
        let ga = estimate_griffiths_bounds_jets(std::slice::from_ref(&fj), &s).unwrap();
        let gb = estimate_griffiths_bounds_jets(&[fj.shifted(3.0, -1.5)], &s).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn product_is_not_griffiths_negative() {
        let model = ModelSpec::product_poincare(1, 1);
        let g =
            estimate_griffiths_bounds(&model, &model.random_points(4, 3, 0.8), &stratified(200, 5))
                .unwrap();
        assert_eq!(g.c0, 0.0);
        assert!(g.cap_c0 >= g.c0 && g.cap_c0 > 0.0);
        assert!(!g.griffiths_negative);
        assert_eq!(g.eps_griffiths, 0.0);
    }

    #[test]
    fn sheared_bounds_are_positive_off_the_zero_section() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let pts = vec![
            ChartPoint::new(
                vec![Complex64::new(0.1, 0.0)],
                vec![Complex64::new(0.3, 0.1)],
            ),
            ChartPoint::new(
                vec![Complex64::new(-0.2, 0.1)],
                vec![Complex64::new(-0.1, 0.4)],
            ),
        ];
        let g = estimate_griffiths_bounds(&model, &pts, &stratified(2000, 9)).unwrap();
        assert!(g.c0 > 0.0 && g.cap_c0 >= g.c0, "{g:?}");
        assert!(g.eps_griffiths >= 0.0);
    }
}

//! Search for the smallest `k` past which the sampled supremum stays
//! strictly negative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{model_jets, sup_curvature_jets, DirectionSample, Quantity, EMPIRICAL};
use crate::error::{KurvError, Result};
use crate::fibration::FibrationJet;
use crate::hermitian::VERDICT_TOL;
use crate::jets::ChartPoint;
use crate::models::ModelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// A supremum counts as negative when it is below `-tol`.
    pub tol: f64,
    pub scan_ratio: f64,
    pub bisection_steps: usize,
    pub refine: bool,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions {
            tol: VERDICT_TOL,
            scan_ratio: 2.0,
            bisection_steps: 30,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegativityCertificate {
    pub status: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub points: Vec<ChartPoint>,
    pub quantity: Quantity,
    pub k_min: f64,
    pub k_max: f64,
    /// Scan grid; `sups[i]` is `None` where `Ω(k)` is degenerate.
    pub k_grid: Vec<f64>,
    pub sups: Vec<Option<f64>>,
    pub threshold: Option<f64>,
    /// Supremum at the reported threshold.
    pub threshold_sup: Option<f64>,
    pub certified: bool,
    pub seed: u64,
    pub samples: usize,
    pub options: ThresholdOptions,
}

fn negative(s: Option<f64>, tol: f64) -> bool {
    matches!(s, Some(v) if v < -tol)
}

fn sup_at(
    fjs: &[FibrationJet],
    k: f64,
    quantity: Quantity,
    sample: &DirectionSample,
    refine: bool,
) -> Result<Option<f64>> {
    match sup_curvature_jets(fjs, k, quantity, sample, refine) {
        Ok(est) => Ok(Some(est.sup)),
        Err(KurvError::DegenerateOmega { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scan grid, suprema and located threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSearch {
    pub k_grid: Vec<f64>,
    pub sups: Vec<Option<f64>>,
    pub threshold: Option<f64>,
    pub threshold_sup: Option<f64>,
}

/// Threshold search over an arbitrary `k ↦ sup` map; `None` marks a
/// degenerate `k`. See [`find_threshold`].
pub fn threshold_search(
    k_min: f64,
    k_max: f64,
    options: &ThresholdOptions,
    mut sup: impl FnMut(f64) -> Result<Option<f64>>,
) -> Result<ThresholdSearch> {
    let tol = options.tol;
    if !(k_min > 0.0 && k_min < k_max && k_max.is_finite()) {
        return Err(KurvError::InvalidArgument(format!(
            "need 0 < k_min < k_max, got [{k_min}, {k_max}]"
        )));
    }
    if options.scan_ratio.is_nan() || options.scan_ratio <= 1.0 {
        return Err(KurvError::InvalidArgument(
            "scan ratio must exceed 1".into(),
        ));
    }
    let mut k_grid = vec![k_min];
    while *k_grid.last().unwrap() < k_max {
        let next = (k_grid.last().unwrap() * options.scan_ratio).min(k_max);
        k_grid.push(next);
    }
    let sups: Vec<Option<f64>> = k_grid.iter().map(|&k| sup(k)).collect::<Result<_>>()?;

    let suffix = (0..k_grid.len())
        .rev()
        .take_while(|&i| negative(sups[i], tol))
        .last();
    let (threshold, threshold_sup) = match suffix {
        None => (None, None),
        Some(0) => (Some(k_min), sups[0]),
        Some(i) => {
            let (mut lo, mut hi) = (k_grid[i - 1], k_grid[i]);
            let mut hi_sup = sups[i];
            for _ in 0..options.bisection_steps {
                let mid = (lo * hi).sqrt();
                let s = sup(mid)?;
                if negative(s, tol) {
                    hi = mid;
                    hi_sup = s;
                } else {
                    lo = mid;
                }
            }
            (Some(hi), hi_sup)
        }
    };
    Ok(ThresholdSearch {
        k_grid,
        sups,
        threshold,
        threshold_sup,
    })
}

/// Geometric scan from `k_min` by `scan_ratio` up to `k_max`, then
/// geometric bisection inside the first bracket of the scan's negative
/// suffix. Only the suffix counts: a negative value followed by a
/// non-negative one further out is not certified.
pub fn find_threshold(
    model: &ModelSpec,
    points: &[ChartPoint],
    quantity: Quantity,
    k_min: f64,
    k_max: f64,
    sample: &DirectionSample,
    options: ThresholdOptions,
) -> Result<NegativityCertificate> {
    let fjs = model_jets(model, points)?;
    let search = threshold_search(k_min, k_max, &options, |k| {
        sup_at(&fjs, k, quantity, sample, options.refine)
    })?;

    Ok(NegativityCertificate {
        status: EMPIRICAL.to_string(),
        model: model.name().to_string(),
        params: model.params().clone(),
        points: points.to_vec(),
        quantity,
        k_min,
        k_max,
        certified: search.threshold.is_some(),
        k_grid: search.k_grid,
        sups: search.sups,
        threshold: search.threshold,
        threshold_sup: search.threshold_sup,
        seed: sample.seed,
        samples: sample.count,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certifier::{sample_directions, sup_curvature, SampleMode};

    #[test]
    fn product_hsc_certifies_at_k_min() {
        let model = ModelSpec::product_poincare(1, 1);
        let pts = model.random_points(3, 1, 0.8);
        let s = sample_directions(1, 1, 200, 1, SampleMode::Stratified).unwrap();
        let cert = find_threshold(
            &model,
            &pts,
            Quantity::Hsc,
            1.0,
            64.0,
            &s,
            ThresholdOptions::default(),
        )
        .unwrap();
        assert!(cert.certified);
        assert_eq!(cert.threshold, Some(1.0));
        assert_eq!(cert.k_grid, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
        assert_eq!(cert.status, "empirical");
    }

    #[test]
    fn product_hbc_is_not_certified() {
        let model = ModelSpec::product_poincare(1, 1);
        let pts = model.random_points(2, 1, 0.8);
        let s = sample_directions(1, 1, 90, 2, SampleMode::Pairs).unwrap();
        let cert = find_threshold(
            &model,
            &pts,
            Quantity::Hbc,
            1.0,
            100.0,
            &s,
            ThresholdOptions::default(),
        )
        .unwrap();
        assert!(!cert.certified);
        assert!(cert.sups.iter().all(|s| s.unwrap().abs() <= VERDICT_TOL));
    }

    #[test]
    fn sheared_threshold_holds_at_twice_k0() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let pts = vec![ChartPoint::origin(1, 1)];
        let s = sample_directions(1, 1, 500, 11, SampleMode::Stratified).unwrap();
        let cert = find_threshold(
            &model,
            &pts,
            Quantity::Hsc,
            1.0,
            1e6,
            &s,
            ThresholdOptions::default(),
        )
        .unwrap();
        let k0 = cert.threshold.expect("certified");
        let fresh = sample_directions(1, 1, 500, 12, SampleMode::Stratified).unwrap();
        let re = sup_curvature(&model, &pts, 2.0 * k0, Quantity::Hsc, &fresh).unwrap();
        assert!(re.sup < -VERDICT_TOL);
    }

    #[test]
    fn bisection_finds_a_synthetic_crossing() {
        // sup(k) = (3 - k)/k changes sign at k = 3
        let opts = ThresholdOptions::default();
        let r = threshold_search(1.0, 100.0, &opts, |k| Ok(Some((3.0 - k) / k))).unwrap();
        let k0 = r.threshold.unwrap();
        assert!(k0 > 3.0 && k0 < 3.0 * (1.0 + 1e-6), "{k0}");
        assert!(r.threshold_sup.unwrap() < -opts.tol);
    }

    #[test]
    fn only_the_negative_suffix_counts() {
        let opts = ThresholdOptions::default();
        // negative at 1, positive at 2, negative from 4 on
        let f = |k: f64| {
            Ok(Some(if k < 1.5 {
                -1.0
            } else if k < 3.0 {
                1.0
            } else {
                -1.0
            }))
        };
        let r = threshold_search(1.0, 16.0, &opts, f).unwrap();
        let k0 = r.threshold.unwrap();
        assert!((k0 - 3.0).abs() < 1e-6, "{k0}");
        // degenerate k is never negative
        let r = threshold_search(1.0, 16.0, &opts, |k| Ok((k > 2.0).then_some(-1.0))).unwrap();
        assert!((r.threshold.unwrap() - 2.0).abs() < 1e-6);
        assert_eq!(r.sups[0], None);
        // a positive tail is not certified
        let r = threshold_search(1.0, 16.0, &opts, |k| {
            Ok(Some(if k < 10.0 { -1.0 } else { 1.0 }))
        })
        .unwrap();
        assert_eq!(r.threshold, None);
    }

    #[test]
    fn rejects_bad_interval() {
        let model = ModelSpec::product_poincare(1, 1);
        let s = sample_directions(1, 1, 4, 0, SampleMode::Full).unwrap();
        let pts = vec![ChartPoint::origin(1, 1)];
        assert!(find_threshold(
            &model,
            &pts,
            Quantity::Hsc,
            5.0,
            1.0,
            &s,
            ThresholdOptions::default()
        )
        .is_err());
    }
}

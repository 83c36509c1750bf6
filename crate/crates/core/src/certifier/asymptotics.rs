//! Large-`k` behaviour of the adapted curvature blocks.
//!
//! For each block a deviation sequence over a geometric `k` grid is fitted
//! by least squares on `log k ↦ log deviation`, dropping the smallest `k`.
//! `R_HH(k) - k·R^{T_B}` and the four cross blocks should stay bounded
//! (slope ≤ 0.2); `R_{γσ̄ij̄}(k) - R^V` and `R_{kl̄ij̄}(k) - R^V` should decay
//! like `1/k` (slope ≤ -0.8, expected band `[-1.2, -0.8]`).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EMPIRICAL;
use crate::error::{KurvError, Result};
use crate::fibration::{
    adapted_curvature_blocks, base_curvature, horizontal_deviation, horizontal_lift,
    vertical_curvature, Block, BlockKind, FibrationJet,
};
use crate::jets::ChartPoint;
use crate::models::ModelSpec;

/// Slack around the theoretical order.
pub const SLOPE_BAND: f64 = 0.2;
/// A deviation sequence counts as identically zero below this relative level.
pub const VANISHING_RTOL: f64 = 1e-12;
const MIN_GRID: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLaw {
    /// `O(1)`, expected slope 0.
    Bounded,
    /// `O(1/k)`, expected slope -1.
    InverseK,
}

impl BlockLaw {
    pub fn expected_slope(self) -> f64 {
        match self {
            BlockLaw::Bounded => 0.0,
            BlockLaw::InverseK => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVerdict {
    /// Deviations are zero at machine precision on the whole grid.
    Vanishing,
    Pass,
    Fail,
    /// Fewer than three usable points after dropping the smallest `k`.
    Insufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub block: String,
    pub law: BlockLaw,
    /// Max-abs deviation per grid point (`None` where `Ω(k)` is degenerate).
    pub deviations: Vec<Option<f64>>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// `slope ± 2·SE`.
    pub band: Option<(f64, f64)>,
    pub verdict: FitVerdict,
}

impl BlockFit {
    pub fn ok(&self) -> bool {
        matches!(self.verdict, FitVerdict::Vanishing | FitVerdict::Pass)
    }

    /// True when the fitted slope sits within ±[`SLOPE_BAND`] of the law's
    /// order (vanishing sequences have no slope and return false).
    pub fn slope_in_band(&self) -> bool {
        self.slope
            .is_some_and(|s| (s - self.law.expected_slope()).abs() <= SLOPE_BAND)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub status: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub point: ChartPoint,
    pub k_grid: Vec<f64>,
    /// Error text for grid points where `Ω(k)` is degenerate.
    pub degenerate: Vec<Option<String>>,
    /// `max |R^{T_B}|`, the scale of the leading horizontal term.
    pub base_scale: f64,
    pub fits: Vec<BlockFit>,
}

impl AsymptoticsReport {
    pub fn fit(&self, block: &str) -> Option<&BlockFit> {
        self.fits.iter().find(|f| f.block == block)
    }

    pub fn all_ok(&self) -> bool {
        self.fits.iter().all(BlockFit::ok)
    }
}

pub const HH_DEVIATION: &str = "R_{γσ̄αβ̄} - k·R^{T_B}";
pub const HV_DEVIATION: &str = "R_{γσ̄ij̄} - R^V";
pub const VV_DEVIATION: &str = "R_{kl̄ij̄} - R^V";

/// Parse `geometric:A:B:COUNT` or a comma-separated list of values.
pub fn parse_k_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| KurvError::InvalidArgument(format!("k grid `{spec}`: {why}"));
    let grid: Vec<f64> = if let Some(rest) = spec.strip_prefix("geometric:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected geometric:A:B:COUNT"));
        }
        let a: f64 = parts[0].parse().map_err(|_| bad("A is not a number"))?;
        let b: f64 = parts[1].parse().map_err(|_| bad("B is not a number"))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| bad("COUNT is not an integer"))?;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(bad("need 0 < A < B"));
        }
        if count < 2 {
            return Err(bad("COUNT must be ≥ 2"));
        }
        let ratio = (b / a).ln() / (count - 1) as f64;
        (0..count)
            .map(|i| {
                if i == count - 1 {
                    b
                } else {
                    a * (ratio * i as f64).exp()
                }
            })
            .collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect::<Result<_>>()?
    };
    if grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        || grid.iter().any(|k| k.is_nan() || *k <= 0.0)
    {
        return Err(bad("values must be positive and strictly increasing"));
    }
    Ok(grid)
}

/// Least-squares slope and its standard error.
fn fit_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}

fn fit_block(
    block: &str,
    law: BlockLaw,
    k_grid: &[f64],
    deviations: Vec<Option<f64>>,
    scale: impl Fn(f64) -> f64,
) -> BlockFit {
    let vanishing = deviations
        .iter()
        .zip(k_grid)
        .all(|(d, &k)| d.is_none_or(|d| d <= VANISHING_RTOL * scale(k)));
    let mut fit = BlockFit {
        block: block.to_string(),
        law,
        deviations: deviations.clone(),
        slope: None,
        slope_se: None,
        band: None,
        verdict: FitVerdict::Insufficient,
    };
    if vanishing && deviations.iter().any(Option::is_some) {
        fit.verdict = FitVerdict::Vanishing;
        return fit;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = deviations
        .iter()
        .zip(k_grid)
        .skip(1)
        .filter_map(|(d, &k)| d.filter(|d| *d > 0.0).map(|d| (k.ln(), d.ln())))
        .unzip();
    if xs.len() < 3 {
        return fit;
    }
    let (slope, se) = fit_slope(&xs, &ys);
    fit.slope = Some(slope);
    fit.slope_se = Some(se);
    fit.band = Some((slope - 2.0 * se, slope + 2.0 * se));
    fit.verdict = if slope <= law.expected_slope() + SLOPE_BAND {
        FitVerdict::Pass
    } else {
        FitVerdict::Fail
    };
    fit
}

/// Deviation of every adapted block from its large-`k` model over `k_grid`.
pub fn asymptotic_check_jet(fj: &FibrationJet, k_grid: &[f64]) -> Result<AsymptoticsReport> {
    if k_grid.len() < MIN_GRID {
        return Err(KurvError::InvalidArgument(format!(
            "k grid needs ≥ {MIN_GRID} points, got {}",
            k_grid.len()
        )));
    }
    if k_grid
        .windows(2)
        .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        || k_grid[0].is_nan()
        || k_grid[0] <= 0.0
    {
        return Err(KurvError::InvalidArgument(
            "k grid must be positive and strictly increasing".into(),
        ));
    }
    let (m, n) = (fj.m(), fj.n());
    let (tb, _) = base_curvature(fj)?;
    let rv = vertical_curvature(fj)?;
    let frame = horizontal_lift(fj)?;
    let hor: Vec<Vec<Complex64>> = (0..m).map(|a| frame.horizontal(a)).collect();
    let unit = |i: usize| {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[i] = Complex64::new(1.0, 0.0);
        e
    };
    let rv_hh =
        |g: usize, s: usize, i: usize, j: usize| rv.contract(&unit(i), &unit(j), &hor[g], &hor[s]);
    let rv_vv = |k: usize, l: usize, i: usize, j: usize| rv.get(i, j, m + k, m + l);
    let base_scale = tb.max_abs();
    let rv_scale = rv.max_abs();

    let mut degenerate = Vec::with_capacity(k_grid.len());
    let mut per_block: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    let cross: Vec<BlockKind> = BlockKind::ALL
        .iter()
        .copied()
        .filter(|b| b.is_cross())
        .collect();
    for &k in k_grid {
        match adapted_curvature_blocks(fj, k) {
            Ok(blocks) => {
                degenerate.push(None);
                let hh = horizontal_deviation(fj, k)?;
                per_block
                    .entry(HH_DEVIATION)
                    .or_default()
                    .push(Some(hh.norm()));
                let hv = blocks.block(BlockKind::HorizontalVertical);
                let reference = block_like(hv, rv_hh);
                per_block
                    .entry(HV_DEVIATION)
                    .or_default()
                    .push(Some(hv.sub(&reference).norm()));
                let vv = blocks.block(BlockKind::VerticalVertical);
                let reference = block_like(vv, rv_vv);
                per_block
                    .entry(VV_DEVIATION)
                    .or_default()
                    .push(Some(vv.sub(&reference).norm()));
                for kind in &cross {
                    per_block
                        .entry(kind.label())
                        .or_default()
                        .push(Some(blocks.block(*kind).norm()));
                }
            }
            Err(e @ KurvError::DegenerateOmega { .. }) => {
                degenerate.push(Some(e.to_string()));
                for name in [HH_DEVIATION, HV_DEVIATION, VV_DEVIATION]
                    .into_iter()
                    .chain(cross.iter().map(|k| k.label()))
                {
                    per_block.entry(name).or_default().push(None);
                }
            }
            Err(e) => return Err(e),
        }
    }

    let scale = |k: f64| (k * base_scale).max(rv_scale).max(1.0);
    let mut fits = vec![
        fit_block(
            HH_DEVIATION,
            BlockLaw::Bounded,
            k_grid,
            per_block[HH_DEVIATION].clone(),
            scale,
        ),
        fit_block(
            HV_DEVIATION,
            BlockLaw::InverseK,
            k_grid,
            per_block[HV_DEVIATION].clone(),
            scale,
        ),
        fit_block(
            VV_DEVIATION,
            BlockLaw::InverseK,
            k_grid,
            per_block[VV_DEVIATION].clone(),
            scale,
        ),
    ];
    for kind in &cross {
        fits.push(fit_block(
            kind.label(),
            BlockLaw::Bounded,
            k_grid,
            per_block[kind.label()].clone(),
            scale,
        ));
    }
    Ok(AsymptoticsReport {
        status: EMPIRICAL.to_string(),
        model: String::new(),
        params: BTreeMap::new(),
        point: fj.phi().point.clone(),
        k_grid: k_grid.to_vec(),
        degenerate,
        base_scale,
        fits,
    })
}

fn block_like(b: &Block, f: impl Fn(usize, usize, usize, usize) -> Complex64) -> Block {
    let [d0, d1, d2, d3] = b.dims;
    let mut data = Vec::with_capacity(b.data.len());
    for a in 0..d0 {
        for bb in 0..d1 {
            for c in 0..d2 {
                for d in 0..d3 {
                    data.push(f(a, bb, c, d));
                }
            }
        }
    }
    Block { dims: b.dims, data }
}

/// [`asymptotic_check_jet`] for a catalog model at one point.
pub fn asymptotic_check(
    model: &ModelSpec,
    point: &ChartPoint,
    k_grid: &[f64],
) -> Result<AsymptoticsReport> {
    let fj = model.fibration_jet(point)?;
    let mut report = asymptotic_check_jet(&fj, k_grid)?;
    report.model = model.name().to_string();
    report.params = model.params().clone();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        parse_k_grid("geometric:1e2:1e6:5").unwrap()
    }

    #[test]
    fn grid_parsing() {
        let g = grid();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 100.0);
        assert_eq!(g[4], 1e6);
        assert!((g[2] - 1e4).abs() < 1e-8);
        assert_eq!(parse_k_grid("1, 2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert!(parse_k_grid("geometric:5:1:4").is_err());
        assert!(parse_k_grid("1,1,2").is_err());
        assert!(parse_k_grid("geometric:1:2").is_err());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = (1..6).map(|i| (i as f64).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - x).collect();
        let (s, se) = fit_slope(&xs, &ys);
        assert!((s + 1.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn product_deviations_vanish() {
        let model = ModelSpec::product_poincare(1, 1);
        let r = asymptotic_check(&model, &ChartPoint::origin(1, 1), &grid()).unwrap();
        for f in &r.fits {
            assert_eq!(f.verdict, FitVerdict::Vanishing, "{}", f.block);
            for d in &f.deviations {
                assert!(d.unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn flat_deviations_vanish() {
        let r =
            asymptotic_check(&ModelSpec::flat(1, 1), &ChartPoint::origin(1, 1), &grid()).unwrap();
        assert!(r
            .fits
            .iter()
            .all(|f| f.deviations.iter().all(|d| *d == Some(0.0))));
    }

    #[test]
    fn sheared_vertical_block_decays_like_one_over_k() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let r = asymptotic_check(&model, &ChartPoint::origin(1, 1), &grid()).unwrap();
        let vv = r.fit(VV_DEVIATION).unwrap();
        let s = vv.slope.unwrap();
        assert!((-1.2..=-0.8).contains(&s), "{s}");
        // deviation is ε²/(2k + c) at the origin
        for (d, k) in vv.deviations.iter().zip(&r.k_grid) {
            assert!((d.unwrap() - 0.01 / (2.0 * k + 1.0)).abs() < 1e-14, "{k}");
        }
        assert!(r.all_ok());
    }

    #[test]
    fn sheared_generic_point_is_bounded() {
        let model = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let p = ChartPoint::new(
            vec![Complex64::new(0.2, -0.1)],
            vec![Complex64::new(0.3, 0.25)],
        );
        let r = asymptotic_check(&model, &p, &grid()).unwrap();
        let hh = r.fit(HH_DEVIATION).unwrap();
        assert!(hh.slope_in_band(), "{hh:?}");
        assert!(r.all_ok(), "{r:?}");
    }

    #[test]
    fn short_grid_rejected() {
        let model = ModelSpec::flat(1, 1);
        assert!(asymptotic_check(&model, &ChartPoint::origin(1, 1), &[1.0, 2.0, 3.0]).is_err());
    }
}

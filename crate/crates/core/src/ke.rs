//! Kähler–Einstein fiber families: the Liouville equation `u_{vv̄} = e^u`
//! on a disk, the determinant identity `e^φ = det(φ_{ij̄})`, the trace
//! identity for `c(φ)` and the one-dimensional-fiber Griffiths check.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certifier::{
    companion_seed, model_jets, sample_directions, DirectionMap, SampleMode, EMPIRICAL,
};
use crate::error::{KurvError, Result};
use crate::fibration::{
    geodesic_curvature, horizontal_lift, total_curvature, vertical_curvature, FibrationJet,
};
use crate::hermitian::{griffiths_sample_test, Verdict, VERDICT_TOL};
use crate::jets::ChartPoint;
use crate::models::ModelSpec;

pub const MAX_NEWTON_STEPS: usize = 50;
/// Relative tolerance on `e^φ = det(φ_{ij̄})` gating the trace identity.
pub const KE_PRECONDITION_TOL: f64 = 1e-8;

/// `u*(v) = log 2 - 2 log(1 - |v|²)`.
pub fn liouville_exact(x: f64, y: f64) -> f64 {
    std::f64::consts::LN_2 - 2.0 * (1.0 - x * x - y * y).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    /// Outside the disk but adjacent to an interior node; holds Dirichlet data.
    Boundary,
    Unused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSolution {
    pub radius: f64,
    pub n: usize,
    pub spacing: f64,
    /// Row-major `n × n` values; `NaN` on unused nodes.
    pub u: Vec<f64>,
    pub kind: Vec<NodeKind>,
    /// Max-norm of the discrete equation after the final step.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
}

impl LiouvilleSolution {
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        grid_coords(self.radius, self.spacing, self.n, idx)
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.u.len()).filter(|&i| self.kind[i] == NodeKind::Interior)
    }

    pub fn max_error(&self) -> f64 {
        self.interior()
            .map(|i| {
                let (x, y) = self.coords(i);
                (self.u[i] - liouville_exact(x, y)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `(x, y, u, u_exact, error)` for every interior node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "u", "u_exact", "error"])
            .map_err(|e| KurvError::Io(e.to_string()))?;
        for i in self.interior() {
            let (x, y) = self.coords(i);
            let exact = liouville_exact(x, y);
            w.serialize((x, y, self.u[i], exact, self.u[i] - exact))
                .map_err(|e| KurvError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| KurvError::Io(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| KurvError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn grid_coords(radius: f64, h: f64, n: usize, idx: usize) -> (f64, f64) {
    (
        -radius + (idx % n) as f64 * h,
        -radius + (idx / n) as f64 * h,
    )
}

struct Grid {
    n: usize,
    h: f64,
    kind: Vec<NodeKind>,
    /// Interior node ids in grid order and their position in the unknown vector.
    nodes: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl Grid {
    fn neighbours(&self, idx: usize) -> [usize; 4] {
        [idx - 1, idx + 1, idx - self.n, idx + self.n]
    }
}

/// Newton iteration for the 5-point discretization of `Δu = 4e^u` on the
/// disk of `radius`, on an `n × n` grid over `[-radius, radius]²`, with
/// Dirichlet data `u*` at grid nodes just outside the disk. Starts from
/// `u ≡ log 2`.
pub fn solve_liouville(radius: f64, n: usize, tol: f64) -> Result<LiouvilleSolution> {
    if n < 17 {
        return Err(KurvError::ParameterRange {
            name: "n".into(),
            value: n as f64,
            min: 17.0,
            max: f64::INFINITY,
        });
    }
    let h = 2.0 * radius / (n - 1) as f64;
    if !(radius > 0.0 && radius + h < 1.0) {
        return Err(KurvError::InvalidArgument(format!(
            "need 0 < radius and radius + spacing < 1, got radius {radius}, spacing {h}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(KurvError::InvalidArgument(
            "tolerance must be positive".into(),
        ));
    }

    let mut kind = vec![NodeKind::Unused; n * n];
    for (idx, k) in kind.iter_mut().enumerate() {
        let (x, y) = grid_coords(radius, h, n, idx);
        if x * x + y * y < radius * radius {
            *k = NodeKind::Interior;
        }
    }
    let nodes: Vec<usize> = (0..n * n)
        .filter(|&i| kind[i] == NodeKind::Interior)
        .collect();
    let mut slot = vec![None; n * n];
    for (s, &i) in nodes.iter().enumerate() {
        slot[i] = Some(s);
    }
    let mut grid = Grid {
        n,
        h,
        kind,
        nodes,
        slot,
    };
    let mut u = vec![f64::NAN; n * n];
    for s in 0..grid.nodes.len() {
        for nb in grid.neighbours(grid.nodes[s]) {
            if grid.kind[nb] == NodeKind::Unused {
                grid.kind[nb] = NodeKind::Boundary;
                let (x, y) = grid_coords(radius, h, n, nb);
                u[nb] = liouville_exact(x, y);
            }
        }
    }
    for &i in &grid.nodes {
        u[i] = std::f64::consts::LN_2;
    }

    let mut history = Vec::new();
    let mut f = residual(&grid, &u);
    let mut res = f.amax();
    history.push(res);
    let mut steps = 0;
    while res > tol {
        if steps == MAX_NEWTON_STEPS {
            return Err(KurvError::NoConvergence {
                iterations: steps,
                residual: res,
            });
        }
        let diag: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&i| 4.0 / (h * h) + 4.0 * u[i].exp())
            .collect();
        let delta = conjugate_gradient(&grid, &diag, &f, 1e-13)?;
        for (s, &i) in grid.nodes.iter().enumerate() {
            u[i] += delta[s];
        }
        steps += 1;
        f = residual(&grid, &u);
        res = f.amax();
        history.push(res);
    }

    Ok(LiouvilleSolution {
        radius,
        n,
        spacing: h,
        u,
        kind: grid.kind,
        residual: res,
        residual_history: history,
        iterations: steps,
    })
}

/// `F(u) = Δ_h u - 4e^u` at interior nodes.
fn residual(grid: &Grid, u: &[f64]) -> DVector<f64> {
    let h2 = grid.h * grid.h;
    DVector::from_iterator(
        grid.nodes.len(),
        grid.nodes.iter().map(|&i| {
            let lap: f64 = grid.neighbours(i).iter().map(|&nb| u[nb]).sum::<f64>() - 4.0 * u[i];
            lap / h2 - 4.0 * u[i].exp()
        }),
    )
}

/// `A = -(Δ_h - 4 diag(e^u))` on interior unknowns, zero Dirichlet data.
fn apply(grid: &Grid, diag: &[f64], x: &DVector<f64>) -> DVector<f64> {
    let h2 = grid.h * grid.h;
    DVector::from_iterator(
        x.len(),
        grid.nodes.iter().enumerate().map(|(s, &i)| {
            let off: f64 = grid
                .neighbours(i)
                .iter()
                .filter_map(|&nb| grid.slot[nb].map(|t| x[t]))
                .sum();
            diag[s] * x[s] - off / h2
        }),
    )
}

/// Jacobi-preconditioned CG for `A x = b`, stopping at `‖r‖ ≤ rtol ‖b‖`.
fn conjugate_gradient(
    grid: &Grid,
    diag: &[f64],
    b: &DVector<f64>,
    rtol: f64,
) -> Result<DVector<f64>> {
    let inv = DVector::from_iterator(diag.len(), diag.iter().map(|d| 1.0 / d));
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    let mut z = r.component_mul(&inv);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let target = rtol * b.norm();
    let max_iter = 20 * b.len();
    for _ in 0..max_iter {
        if r.norm() <= target {
            return Ok(x);
        }
        let ap = apply(grid, diag, &p);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = r.component_mul(&inv);
        let rz_next = r.dot(&z);
        p = &z + &p * (rz_next / rz);
        rz = rz_next;
    }
    if r.norm() <= target {
        Ok(x)
    } else {
        Err(KurvError::NoConvergence {
            iterations: max_iter,
            residual: r.norm(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetIdentity {
    pub exp_phi: f64,
    pub det: f64,
    pub residual: f64,
    pub relative: f64,
}

/// `|e^φ - det(φ_{ij̄})|` at the jet's point.
pub fn verify_ke_det_identity(fj: &FibrationJet) -> Result<DetIdentity> {
    let exp_phi = fj.phi().d(&[], &[]).re.exp();
    let det = fj.vertical_hessian().matrix().determinant().re;
    let residual = (exp_phi - det).abs();
    Ok(DetIdentity {
        exp_phi,
        det,
        residual,
        relative: residual / det.abs().max(f64::MIN_POSITIVE),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentity {
    /// `ok` or `precondition failed`.
    pub status: String,
    pub precondition: DetIdentity,
    /// Entries of `c(φ)_{αβ̄} + R^V_{αβ̄ij̄} φ^{ij̄}`.
    pub residual: Vec<Vec<Complex64>>,
    pub max_residual: f64,
    /// Largest entry of `c(φ)` and of the raw-frame contraction, for scale.
    pub max_geodesic: f64,
    pub max_raw_contraction: f64,
}

impl TraceIdentity {
    pub fn precondition_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Residual of `c(φ)_{αβ̄} = -R^V_{αβ̄ij̄} φ^{ij̄}`, with `R^V` evaluated on the
/// horizontal lifts. Flagged when `e^φ = det(φ_{ij̄})` fails at the point.
pub fn trace_identity_check(fj: &FibrationJet, precondition_tol: f64) -> Result<TraceIdentity> {
    let (m, n) = (fj.m(), fj.n());
    let pre = verify_ke_det_identity(fj)?;
    let rv = vertical_curvature(fj)?;
    let g = fj.vertical_hessian().inverse()?;
    let c = geodesic_curvature(fj)?;
    let frame = horizontal_lift(fj)?;
    let lifts: Vec<Vec<Complex64>> = (0..m).map(|a| frame.horizontal(a)).collect();
    let raw: Vec<Vec<Complex64>> = (0..m)
        .map(|a| {
            (0..fj.dim())
                .map(|c| Complex64::new((a == c) as u8 as f64, 0.0))
                .collect()
        })
        .collect();

    let trace = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let mut r = Complex64::new(0.0, 0.0);
                for (cc, xc) in x.iter().enumerate() {
                    for (dd, yd) in y.iter().enumerate() {
                        r += rv.get(i, j, cc, dd) * xc * yd.conj();
                    }
                }
                acc += r * g[(j, i)];
            }
        }
        acc
    };

    let residual: Vec<Vec<Complex64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| c.get(a, b) + trace(&lifts[a], &lifts[b]))
                .collect()
        })
        .collect();
    let max_residual = residual
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let max_geodesic = c.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_raw_contraction = (0..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .map(|(a, b)| trace(&raw[a], &raw[b]).norm())
        .fold(0.0, f64::max);
    Ok(TraceIdentity {
        status: if pre.relative <= precondition_tol {
            "ok"
        } else {
            "precondition failed"
        }
        .to_string(),
        precondition: pre,
        residual,
        max_residual,
        max_geodesic,
        max_raw_contraction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub status: String,
    pub model: String,
    pub verdict: Verdict,
    /// Max of `R^V_{XX̄VV̄} / (‖X‖²‖V‖²)`, norms in `Ω(1)` and `φ_{ij̄}`.
    pub max: f64,
    pub seed: u64,
    pub samples: usize,
    pub points: usize,
}

/// Sampled Griffiths sign of the vertical bundle for one-dimensional fibers.
/// `X` runs over a stratified sample (full, horizontal and vertical
/// directions), `V` over vertical directions; NEGATIVE iff every value is
/// below `-tol`.
pub fn corollary_1d_check(
    model: &ModelSpec,
    points: &[ChartPoint],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CorollaryReport> {
    if model.n() != 1 {
        return Err(KurvError::Dimension(format!(
            "corollary check needs one-dimensional fibers, got n = {}",
            model.n()
        )));
    }
    corollary_1d_check_jets(
        &model_jets(model, points)?,
        model.name(),
        samples,
        seed,
        tol,
    )
}

pub fn corollary_1d_check_jets(
    fjs: &[FibrationJet],
    model: &str,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CorollaryReport> {
    let first = fjs
        .first()
        .ok_or_else(|| KurvError::InvalidArgument("need at least one point".into()))?;
    let m = first.m();
    let xs = sample_directions(m, 1, samples, seed, SampleMode::Stratified)?;
    let vs = sample_directions(m, 1, samples, companion_seed(seed), SampleMode::Vertical)?;
    let mut max = f64::NEG_INFINITY;
    for fj in fjs {
        let map = DirectionMap::new(fj)?;
        let rv = vertical_curvature(fj)?;
        let (_, g1) = total_curvature(fj, 1.0)?;
        let pairs: Vec<(Vec<Complex64>, Vec<Complex64>)> = xs
            .directions
            .iter()
            .zip(&vs.directions)
            .map(|(x, v)| (map.vertical(&v.x), map.raw(&x.x)))
            .collect();
        let s = griffiths_sample_test(&rv, &fj.vertical_hessian(), &g1, &pairs, tol)?;
        max = max.max(s.sup);
    }
    Ok(CorollaryReport {
        status: EMPIRICAL.to_string(),
        model: model.to_string(),
        verdict: Verdict::from_sup(max, tol),
        max,
        seed,
        samples,
        points: fjs.len(),
    })
}

/// [`corollary_1d_check`] with the default verdict tolerance.
pub fn corollary_1d_default(
    model: &ModelSpec,
    points: &[ChartPoint],
    samples: usize,
    seed: u64,
) -> Result<CorollaryReport> {
    corollary_1d_check(model, points, samples, seed, VERDICT_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{potential_base_jet, potential_jet, Coords, Potential, Scalar};

    #[test]
    fn exact_solution_value_at_origin() {
        assert!((liouville_exact(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn exact_solution_satisfies_the_continuous_equation() {
        // ¼Δu* at (0.3, 0.2) by a fine central difference vs e^{u*}
        let (x, y, h) = (0.3, 0.2, 1e-3);
        let lap = (liouville_exact(x + h, y)
            + liouville_exact(x - h, y)
            + liouville_exact(x, y + h)
            + liouville_exact(x, y - h)
            - 4.0 * liouville_exact(x, y))
            / (h * h);
        assert!((lap / 4.0 - liouville_exact(x, y).exp()).abs() < 1e-4);
    }

    #[test]
    fn small_grid_converges_quadratically() {
        let sol = solve_liouville(0.8, 33, 1e-10).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.iterations <= 15);
        let hist = &sol.residual_history;
        let last = hist.len() - 1;
        assert!(hist[last - 1] / hist[last - 2] <= 0.1, "{hist:?}");
        assert!(sol.u.iter().all(|v| v.is_nan() || v.is_finite()));
        let (lo, hi) = (liouville_exact(0.0, 0.0), liouville_exact(0.8, 0.0));
        for i in sol.interior() {
            assert!(sol.u[i] >= lo - 1e-2 && sol.u[i] <= hi + 1e-2);
        }
        assert!(sol.max_error() < 5e-2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_liouville(0.8, 9, 1e-10).is_err());
        assert!(solve_liouville(1.0, 33, 1e-10).is_err());
        assert!(solve_liouville(0.97, 17, 1e-10).is_err());
    }

    #[test]
    fn csv_has_one_row_per_interior_node() {
        let sol = solve_liouville(0.5, 17, 1e-10).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x,y,u,u_exact,error"));
        assert_eq!(text.lines().count(), 1 + sol.interior().count());
    }

    #[test]
    fn det_identity_on_exact_and_flat_models() {
        let model = ModelSpec::product_poincare(1, 1);
        for p in model.random_points(10, 3, 0.9) {
            let r = verify_ke_det_identity(&model.fibration_jet(&p).unwrap()).unwrap();
            assert!(r.residual <= 1e-13 * r.det.max(1.0), "{r:?}");
        }
        let flat = ModelSpec::flat(1, 1);
        let at = |v: f64| {
            let p = ChartPoint::new(vec![Complex64::new(0.0, 0.0)], vec![Complex64::new(v, 0.0)]);
            verify_ke_det_identity(&flat.fibration_jet(&p).unwrap())
                .unwrap()
                .residual
        };
        assert_eq!(at(0.0), 0.0);
        assert!((at(0.5) - (0.25f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn trace_identity_on_ke_families() {
        for model in [
            ModelSpec::translation_family(0.5).unwrap(),
            ModelSpec::moebius_family(0.5).unwrap(),
        ] {
            for p in model.random_points(10, 7, 0.95) {
                let t =
                    trace_identity_check(&model.fibration_jet(&p).unwrap(), KE_PRECONDITION_TOL)
                        .unwrap();
                assert!(t.precondition_ok());
                assert!(t.max_residual <= 1e-8, "{t:?}");
                assert!(t.max_raw_contraction > 1e-3);
            }
        }
        let p = ChartPoint::new(
            vec![Complex64::new(0.1, 0.0)],
            vec![Complex64::new(0.2, 0.1)],
        );
        let product = ModelSpec::product_poincare(1, 1);
        let t =
            trace_identity_check(&product.fibration_jet(&p).unwrap(), KE_PRECONDITION_TOL).unwrap();
        assert!(t.precondition_ok() && t.max_residual == 0.0 && t.max_geodesic == 0.0);
        let sheared = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let t =
            trace_identity_check(&sheared.fibration_jet(&p).unwrap(), KE_PRECONDITION_TOL).unwrap();
        assert_eq!(t.status, "precondition failed");
    }

    struct Perturbed {
        inner: ModelSpec,
        delta: f64,
    }

    impl Potential for Perturbed {
        fn base_dim(&self) -> usize {
            1
        }
        fn fiber_dim(&self) -> usize {
            1
        }
        fn phi<T: Scalar>(&self, x: &Coords<T>) -> T {
            self.inner.phi(x)
                + x.z[0].clone() * x.zb[0].clone() * x.v[0].clone() * x.vb[0].clone() * self.delta
        }
        fn psi<T: Scalar>(&self, x: &Coords<T>) -> T {
            self.inner.psi(x)
        }
    }

    #[test]
    fn trace_residual_shrinks_with_perturbation() {
        let p = ChartPoint::new(
            vec![Complex64::new(0.15, -0.05)],
            vec![Complex64::new(0.2, 0.3)],
        );
        let residual = |delta: f64| {
            let pot = Perturbed {
                inner: ModelSpec::translation_family(0.5).unwrap(),
                delta,
            };
            let fj = FibrationJet::new(
                potential_base_jet(&pot, &p, 4).unwrap(),
                potential_jet(&pot, &p, 4).unwrap(),
                1,
            )
            .unwrap();
            trace_identity_check(&fj, KE_PRECONDITION_TOL)
                .unwrap()
                .max_residual
        };
        let (a, b, c) = (residual(1e-2), residual(1e-4), residual(0.0));
        assert!(a > b && b > c && c <= 1e-8, "{a} {b} {c}");
    }

    #[test]
    fn corollary_verdicts() {
        let sheared = ModelSpec::sheared_poincare(0.1, 1.0).unwrap();
        let r = corollary_1d_default(&sheared, &sheared.random_points(8, 5, 1.0), 400, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Negative, "{r:?}");
        for model in [ModelSpec::product_poincare(1, 1), ModelSpec::flat(1, 1)] {
            let r = corollary_1d_default(&model, &model.random_points(4, 5, 0.9), 400, 1).unwrap();
            assert_eq!(r.verdict, Verdict::Indefinite);
        }
        let two = ModelSpec::product_poincare(1, 2);
        assert!(corollary_1d_default(&two, &[ChartPoint::origin(1, 2)], 10, 1).is_err());
    }
}

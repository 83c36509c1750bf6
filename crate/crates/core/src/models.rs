//! Closed-form chart models and synthetic random jets.
//!
//! Each model is a local chart `(z, v)` on a polydisk carrying a relative
//! potential `φ(z, v)` and a base potential `ψ(z)`. The charts stand in for
//! compact families: every statement checked on them is local to the
//! validity region shipped with the entry.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};
use crate::fibration::FibrationJet;
use crate::jets::{
    potential_base_jet, potential_jet, ChartPoint, Coords, Jet, JetSpace, Potential, Scalar,
    WeightJet, MAX_ORDER,
};

/// Polydisk `|z_α| ≤ z_radius`, `|v_i| ≤ v_radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub z_radius: f64,
    pub v_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

impl ParamSpec {
    fn real(name: &str, default: f64, min: f64, max: f64) -> Self {
        ParamSpec {
            name: name.into(),
            default,
            min,
            max,
            integer: false,
        }
    }

    fn int(name: &str, default: f64, min: f64, max: f64) -> Self {
        ParamSpec {
            integer: true,
            ..ParamSpec::real(name, default, min, max)
        }
    }
}

/// Hypotheses a model satisfies on its validity region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFlags {
    pub fiberwise_positive: bool,
    pub base_negative_hsc: bool,
    pub base_negative_hbc: bool,
    pub griffiths_negative_vertical: bool,
    pub ke_family: bool,
    pub effectively_parametrized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalogEntry {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    /// Region at default parameters (`None` for synthetic jets).
    pub region: Option<Region>,
    pub flags: ModelFlags,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    ProductPoincare,
    Translation { eps: f64 },
    Moebius { eps: f64 },
    Sheared { eps: f64, c: f64 },
    Flat,
    RandomJet(RandomJetData),
}

#[derive(Clone, Debug, PartialEq)]
struct RandomJetData {
    phi: Vec<Complex64>,
    psi: Vec<Complex64>,
}

/// An instantiated catalog model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    name: String,
    params: BTreeMap<String, f64>,
    m: usize,
    n: usize,
    region: Region,
    kind: Kind,
}

pub const MODEL_NAMES: [&str; 6] = [
    "product_poincare",
    "translation_family",
    "moebius_family",
    "sheared_poincare",
    "flat",
    "random_jet",
];

const LOCAL_REGION: Region = Region {
    z_radius: 0.3,
    v_radius: 0.5,
};

fn param_specs(name: &str) -> Result<Vec<ParamSpec>> {
    Ok(match name {
        "product_poincare" | "flat" => vec![
            ParamSpec::int("m", 1.0, 1.0, 3.0),
            ParamSpec::int("n", 1.0, 1.0, 3.0),
        ],
        "translation_family" | "moebius_family" => vec![ParamSpec::real("eps", 0.5, 0.0, 1.0)],
        "sheared_poincare" => vec![
            ParamSpec::real("eps", 0.1, 0.0, 0.2),
            ParamSpec::real("c", 1.0, 0.5, 10.0),
        ],
        "random_jet" => vec![
            ParamSpec::int("m", 1.0, 1.0, 3.0),
            ParamSpec::int("n", 1.0, 1.0, 3.0),
            ParamSpec::int("seed", 0.0, 0.0, 4_294_967_295.0),
        ],
        other => return Err(KurvError::UnknownModel(other.to_string())),
    })
}

fn description(name: &str) -> &'static str {
    match name {
        "product_poincare" => "products of Poincaré disks on base and fiber; φ independent of z",
        "translation_family" => "Poincaré fiber pulled back by v ↦ v + εz",
        "moebius_family" => {
            "Poincaré fiber pulled back by the disk automorphism v ↦ (v + εz)/(1 + εzv)"
        }
        "sheared_poincare" => "Poincaré fiber with a shear term ε·Re(z v̄²) + c|z|²",
        "flat" => "Euclidean weights φ = |v|², ψ = |z|²",
        _ => "synthetic order-4 Taylor jet at the origin with positive Hessians",
    }
}

/// Flags each builtin entry claims; `tests::catalog_flags_hold` re-derives them.
fn declared_flags(name: &str, m: usize) -> ModelFlags {
    let poincare_base = ModelFlags {
        fiberwise_positive: true,
        base_negative_hsc: true,
        base_negative_hbc: m == 1,
        ..ModelFlags::default()
    };
    match name {
        "product_poincare" | "translation_family" | "moebius_family" => ModelFlags {
            ke_family: true,
            ..poincare_base
        },
        "sheared_poincare" => ModelFlags {
            effectively_parametrized: true,
            ..poincare_base
        },
        _ => ModelFlags {
            fiberwise_positive: true,
            ..ModelFlags::default()
        },
    }
}

/// Every builtin entry with its defaults.
pub fn catalog() -> Vec<ModelCatalogEntry> {
    MODEL_NAMES
        .iter()
        .map(|&name| {
            let spec = instantiate(name, &BTreeMap::new()).expect("defaults are valid");
            ModelCatalogEntry {
                name: name.to_string(),
                description: description(name).to_string(),
                params: param_specs(name).expect("builtin"),
                region: (name != "random_jet").then_some(spec.region),
                flags: spec.flags(),
            }
        })
        .collect()
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(&catalog()).expect("catalog serializes")
}

/// Build a catalog model; missing parameters take their defaults.
pub fn instantiate(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let specs = param_specs(name)?;
    for key in params.keys() {
        if !specs.iter().any(|s| &s.name == key) {
            return Err(KurvError::InvalidArgument(format!(
                "model `{name}` has no parameter `{key}`"
            )));
        }
    }
    let mut values = BTreeMap::new();
    for s in &specs {
        let value = params.get(&s.name).copied().unwrap_or(s.default);
        if !(value >= s.min && value <= s.max) {
            return Err(KurvError::ParameterRange {
                name: s.name.clone(),
                value,
                min: s.min,
                max: s.max,
            });
        }
        if s.integer && value.fract() != 0.0 {
            return Err(KurvError::InvalidArgument(format!(
                "parameter `{}` must be an integer, got {value}",
                s.name
            )));
        }
        values.insert(s.name.clone(), value);
    }
    let get = |k: &str| values[k];
    let (m, n, region, kind) = match name {
        "product_poincare" => (
            get("m") as usize,
            get("n") as usize,
            Region {
                z_radius: 0.9,
                v_radius: 0.9,
            },
            Kind::ProductPoincare,
        ),
        "translation_family" => (1, 1, LOCAL_REGION, Kind::Translation { eps: get("eps") }),
        "moebius_family" => (1, 1, LOCAL_REGION, Kind::Moebius { eps: get("eps") }),
        "sheared_poincare" => (
            1,
            1,
            LOCAL_REGION,
            Kind::Sheared {
                eps: get("eps"),
                c: get("c"),
            },
        ),
        "flat" => (
            get("m") as usize,
            get("n") as usize,
            Region {
                z_radius: 10.0,
                v_radius: 10.0,
            },
            Kind::Flat,
        ),
        _ => {
            let (m, n) = (get("m") as usize, get("n") as usize);
            let data = random_jet_data(m, n, get("seed") as u64);
            (
                m,
                n,
                Region {
                    z_radius: 0.05,
                    v_radius: 0.05,
                },
                Kind::RandomJet(data),
            )
        }
    };
    Ok(ModelSpec {
        name: name.to_string(),
        params: values,
        m,
        n,
        region,
        kind,
    })
}

impl ModelSpec {
    pub fn product_poincare(m: usize, n: usize) -> Self {
        let params = BTreeMap::from([("m".to_string(), m as f64), ("n".to_string(), n as f64)]);
        instantiate("product_poincare", &params).expect("m, n in 1..=3")
    }

    pub fn translation_family(eps: f64) -> Result<Self> {
        instantiate(
            "translation_family",
            &BTreeMap::from([("eps".to_string(), eps)]),
        )
    }

    pub fn moebius_family(eps: f64) -> Result<Self> {
        instantiate(
            "moebius_family",
            &BTreeMap::from([("eps".to_string(), eps)]),
        )
    }

    pub fn sheared_poincare(eps: f64, c: f64) -> Result<Self> {
        let params = BTreeMap::from([("eps".to_string(), eps), ("c".to_string(), c)]);
        instantiate("sheared_poincare", &params)
    }

    pub fn flat(m: usize, n: usize) -> Self {
        let params = BTreeMap::from([("m".to_string(), m as f64), ("n".to_string(), n as f64)]);
        instantiate("flat", &params).expect("m, n in 1..=3")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn flags(&self) -> ModelFlags {
        declared_flags(&self.name, self.m)
    }

    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        self.check_point_with_margin(p, 0.0)
    }

    /// Region check that also keeps a ball of radius `margin` around each
    /// coordinate inside the polydisk.
    pub fn check_point_with_margin(&self, p: &ChartPoint, margin: f64) -> Result<()> {
        if p.m() != self.m || p.n() != self.n {
            return Err(KurvError::Dimension(format!(
                "model `{}` has (m, n) = ({}, {}), point has ({}, {})",
                self.name,
                self.m,
                self.n,
                p.m(),
                p.n()
            )));
        }
        let groups = [
            ("z", &p.z, self.region.z_radius),
            ("v", &p.v, self.region.v_radius),
        ];
        for (label, coords, radius) in groups {
            for (i, c) in coords.iter().enumerate() {
                if !c.re.is_finite()
                    || !c.im.is_finite()
                    || c.norm() + margin > radius * (1.0 + 1e-12)
                {
                    return Err(KurvError::OutsideRegion {
                        coordinate: format!("{label}[{i}]"),
                        modulus: c.norm(),
                        radius,
                    });
                }
            }
        }
        Ok(())
    }

    /// Order-4 fibration jet at an in-region point.
    pub fn fibration_jet(&self, p: &ChartPoint) -> Result<FibrationJet> {
        self.check_point(p)?;
        if let Kind::RandomJet(data) = &self.kind {
            if p.coords().iter().all(|c| c.norm() == 0.0) {
                let space = JetSpace::get(2 * (self.m + self.n), MAX_ORDER);
                let phi = Jet::from_coeffs(&space, data.phi.clone());
                let psi = Jet::from_coeffs(&space, data.psi.clone());
                return FibrationJet::new(
                    WeightJet::from_jet(p.clone(), psi),
                    WeightJet::from_jet(p.clone(), phi),
                    self.m,
                );
            }
        }
        FibrationJet::new(
            potential_base_jet(self, p, MAX_ORDER)?,
            potential_jet(self, p, MAX_ORDER)?,
            self.m,
        )
    }

    /// Uniform random points in the validity region, each coordinate drawn
    /// from the disk of radius `fraction · radius`.
    pub fn random_points(&self, count: usize, seed: u64, fraction: f64) -> Vec<ChartPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut disk = |radius: f64| {
            let r = radius * fraction * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            Complex64::from_polar(r, t)
        };
        (0..count)
            .map(|_| {
                let z = (0..self.m).map(|_| disk(self.region.z_radius)).collect();
                let v = (0..self.n).map(|_| disk(self.region.v_radius)).collect();
                ChartPoint::new(z, v)
            })
            .collect()
    }

    /// Product grid over `|z|`, `|v|` rings, used for flag checks.
    pub fn grid_points(&self, radii: usize, angles: usize) -> Vec<ChartPoint> {
        let ring = |radius: f64| -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0)];
            for r in 1..=radii {
                let rho = radius * r as f64 / radii as f64;
                for a in 0..angles {
                    let t = std::f64::consts::TAU * a as f64 / angles as f64;
                    out.push(Complex64::from_polar(rho, t));
                }
            }
            out
        };
        let zs = ring(self.region.z_radius);
        let vs = ring(self.region.v_radius);
        let mut pts = Vec::new();
        for z in &zs {
            for v in &vs {
                pts.push(ChartPoint::new(vec![*z; self.m], vec![*v; self.n]));
            }
        }
        pts
    }
}

/// `log 2 - 2 log(1 - w w̄)`
fn poincare_fiber<T: Scalar>(w: &T, wb: &T) -> T {
    let one = w.constant_like(1.0);
    (one - w.clone() * wb.clone()).ln() * -2.0 + 2f64.ln()
}

/// `-2 log(1 - z z̄)`
fn poincare_base<T: Scalar>(z: &T, zb: &T) -> T {
    let one = z.constant_like(1.0);
    (one - z.clone() * zb.clone()).ln() * -2.0
}

fn eval_polynomial<T: Scalar>(coeffs: &[Complex64], vars: &[T]) -> T {
    let space = JetSpace::get(vars.len(), MAX_ORDER);
    let one = vars[0].constant_like(1.0);
    let powers: Vec<Vec<T>> = vars
        .iter()
        .map(|x| {
            let mut p = vec![one.clone()];
            for _ in 0..MAX_ORDER {
                let next = p.last().unwrap().clone() * x.clone();
                p.push(next);
            }
            p
        })
        .collect();
    let mut acc = vars[0].constant_like(0.0);
    for (c, e) in coeffs.iter().zip(space.monomials()) {
        if c.norm() == 0.0 {
            continue;
        }
        let mut term = one.clone();
        for (v, &k) in e.iter().enumerate() {
            if k > 0 {
                term = term * powers[v][k as usize].clone();
            }
        }
        acc = acc + term.mul_c(*c);
    }
    acc
}

impl Potential for ModelSpec {
    fn base_dim(&self) -> usize {
        self.m
    }

    fn fiber_dim(&self) -> usize {
        self.n
    }

    fn phi<T: Scalar>(&self, x: &Coords<T>) -> T {
        match &self.kind {
            Kind::ProductPoincare => {
                let mut acc = poincare_fiber(&x.v[0], &x.vb[0]);
                for i in 1..self.n {
                    acc = acc + poincare_fiber(&x.v[i], &x.vb[i]);
                }
                acc
            }
            Kind::Translation { eps } => {
                let w = x.v[0].clone() + x.z[0].clone() * *eps;
                let wb = x.vb[0].clone() + x.zb[0].clone() * *eps;
                poincare_fiber(&w, &wb)
            }
            Kind::Moebius { eps } => {
                let (z, v, zb, vb) = (&x.z[0], &x.v[0], &x.zb[0], &x.vb[0]);
                let one = z.constant_like(1.0);
                let den = one.clone() + z.clone() * v.clone() * *eps;
                let denb = one.clone() + zb.clone() * vb.clone() * *eps;
                let w = (v.clone() + z.clone() * *eps) / den.clone();
                let wb = (vb.clone() + zb.clone() * *eps) / denb.clone();
                // log |∂w/∂v|² is pluriharmonic, so it leaves every curvature
                // untouched and restores e^φ = det(φ_{vv̄}).
                let dw = (one.clone() - z.clone() * z.clone() * (eps * eps)) / (den.clone() * den);
                let dwb = (one - zb.clone() * zb.clone() * (eps * eps)) / (denb.clone() * denb);
                poincare_fiber(&w, &wb) + dw.ln() + dwb.ln()
            }
            Kind::Sheared { eps, c } => {
                let (z, v, zb, vb) = (&x.z[0], &x.v[0], &x.zb[0], &x.vb[0]);
                let shear = (z.clone() * vb.clone() * vb.clone()
                    + zb.clone() * v.clone() * v.clone())
                    * (0.5 * eps);
                poincare_fiber(v, vb) + shear + z.clone() * zb.clone() * *c
            }
            Kind::Flat => {
                let mut acc = x.v[0].clone() * x.vb[0].clone();
                for i in 1..self.n {
                    acc = acc + x.v[i].clone() * x.vb[i].clone();
                }
                acc
            }
            Kind::RandomJet(data) => eval_polynomial(&data.phi, &all_vars(x)),
        }
    }

    fn psi<T: Scalar>(&self, x: &Coords<T>) -> T {
        match &self.kind {
            Kind::Flat => {
                let mut acc = x.z[0].clone() * x.zb[0].clone();
                for a in 1..self.m {
                    acc = acc + x.z[a].clone() * x.zb[a].clone();
                }
                acc
            }
            Kind::RandomJet(data) => eval_polynomial(&data.psi, &all_vars(x)),
            _ => {
                let mut acc = poincare_base(&x.z[0], &x.zb[0]);
                for a in 1..self.m {
                    acc = acc + poincare_base(&x.z[a], &x.zb[a]);
                }
                acc
            }
        }
    }
}

fn all_vars<T: Clone>(x: &Coords<T>) -> Vec<T> {
    x.z.iter()
        .chain(&x.v)
        .chain(&x.zb)
        .chain(&x.vb)
        .cloned()
        .collect()
}

const RANDOM_SCALE: f64 = 0.3;
const RANDOM_MIN_EIG: f64 = 0.5;
const RANDOM_MARGIN: f64 = 0.25;

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * RANDOM_SCALE
}

/// Real-symmetrized Gaussian Taylor coefficients over the monomials accepted
/// by `keep`.
fn random_real_coeffs(
    rng: &mut ChaCha8Rng,
    space: &JetSpace,
    keep: impl Fn(&[u8]) -> bool,
) -> Vec<Complex64> {
    let half = space.nvars() / 2;
    let raw: Vec<Complex64> = space
        .monomials()
        .iter()
        .map(|e| {
            if keep(e) {
                gaussian(rng)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    space
        .monomials()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let swapped: Vec<u8> = e[half..].iter().chain(&e[..half]).copied().collect();
            let mirror = raw[space.index_of(&swapped).expect("same degree")];
            (raw[k] + mirror.conj()) * 0.5
        })
        .collect()
}

/// Hermitian `(i, j) ↦ ∂_{x_i} ∂_{x̄_j}` block of a coefficient vector
/// restricted to `vars`.
fn hessian_block(
    space: &JetSpace,
    coeffs: &[Complex64],
    vars: &[usize],
) -> nalgebra::DMatrix<Complex64> {
    let half = space.nvars() / 2;
    nalgebra::DMatrix::from_fn(vars.len(), vars.len(), |i, j| {
        let mut e = vec![0u8; space.nvars()];
        e[vars[i]] += 1;
        e[half + vars[j]] += 1;
        coeffs[space.index_of(&e).expect("degree 2")]
    })
}

fn add_shift(space: &JetSpace, coeffs: &mut [Complex64], vars: &[usize], lambda: f64) {
    let half = space.nvars() / 2;
    for &v in vars {
        let mut e = vec![0u8; space.nvars()];
        e[v] = 1;
        e[half + v] = 1;
        coeffs[space.index_of(&e).expect("degree 2")] += lambda;
    }
}

fn min_eig(h: nalgebra::DMatrix<Complex64>) -> f64 {
    let sym = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn geodesic_block(
    h: &nalgebra::DMatrix<Complex64>,
    m: usize,
    n: usize,
) -> nalgebra::DMatrix<Complex64> {
    let a = h.view((0, 0), (m, m)).into_owned();
    let b = h.view((0, m), (m, n)).into_owned();
    let c = h.view((m, 0), (n, m)).into_owned();
    let d = h.view((m, m), (n, n)).into_owned();
    let dinv = d.try_inverse().expect("vertical block positive");
    a - b * dinv * c
}

fn random_jet_data(m: usize, n: usize, seed: u64) -> RandomJetData {
    let dim = m + n;
    let space = JetSpace::get(2 * dim, MAX_ORDER);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<usize> = (0..m).collect();
    let fiber: Vec<usize> = (m..dim).collect();

    let mut phi = random_real_coeffs(&mut rng, &space, |_| true);
    let vmin = min_eig(hessian_block(&space, &phi, &fiber));
    add_shift(
        &space,
        &mut phi,
        &fiber,
        (RANDOM_MIN_EIG - vmin).max(0.0) + RANDOM_MARGIN,
    );
    let all: Vec<usize> = (0..dim).collect();
    let cmin = min_eig(geodesic_block(&hessian_block(&space, &phi, &all), m, n));
    add_shift(
        &space,
        &mut phi,
        &base,
        (RANDOM_MIN_EIG - cmin).max(0.0) + RANDOM_MARGIN,
    );

    let mut psi = random_real_coeffs(&mut rng, &space, |e| {
        e[m..dim].iter().chain(&e[dim + m..]).all(|&k| k == 0)
    });
    let bmin = min_eig(hessian_block(&space, &psi, &base));
    add_shift(
        &space,
        &mut psi,
        &base,
        (RANDOM_MIN_EIG - bmin).max(0.0) + RANDOM_MARGIN,
    );

    RandomJetData { phi, psi }
}

/// Synthetic order-4 fibration jet at the origin: Gaussian Taylor
/// coefficients, real-symmetrized, with `|v|²` and `|z|²` shifts so that the
/// vertical Hessian, `c(φ)` and the base Hessian all have eigenvalues ≥ 0.5.
pub fn random_fibration_jet(m: usize, n: usize, seed: u64) -> Result<FibrationJet> {
    let params = BTreeMap::from([
        ("m".to_string(), m as f64),
        ("n".to_string(), n as f64),
        ("seed".to_string(), seed as f64),
    ]);
    let spec = instantiate("random_jet", &params)?;
    spec.fibration_jet(&ChartPoint::origin(m, n))
}

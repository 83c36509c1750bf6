//! Central-difference oracle for Wirtinger jets. Test-only in spirit: it is
//! independent of the Taylor arithmetic and never used on the main path.

use std::collections::HashMap;

use num_complex::Complex64;

use super::{ChartPoint, Coords, MultiIndex, Potential, WeightJet, MAX_ORDER};
use crate::error::{KurvError, Result};
use crate::jets::{Jet, JetSpace};
use crate::models::ModelSpec;

/// Step selection for the finite-difference oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FdStep {
    /// `h = ε_mach^(1/(p+4))` for total order `p`, matched to the
    /// fourth-order-accurate stencils below.
    Auto,
    Fixed(f64),
}

impl FdStep {
    fn for_order(self, p: usize) -> f64 {
        match self {
            FdStep::Auto => f64::EPSILON.powf(1.0 / (p as f64 + 4.0)),
            FdStep::Fixed(h) => h,
        }
    }

    fn max_step(self) -> f64 {
        (0..=MAX_ORDER)
            .map(|p| self.for_order(p))
            .fold(0.0, f64::max)
    }
}

/// Fourth-order-accurate central stencil for the `k`-th derivative.
fn stencil(k: u8) -> &'static [(i8, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[
            (-2, 1.0 / 12.0),
            (-1, -2.0 / 3.0),
            (1, 2.0 / 3.0),
            (2, -1.0 / 12.0),
        ],
        2 => &[
            (-2, -1.0 / 12.0),
            (-1, 4.0 / 3.0),
            (0, -5.0 / 2.0),
            (1, 4.0 / 3.0),
            (2, -1.0 / 12.0),
        ],
        3 => &[
            (-3, 1.0 / 8.0),
            (-2, -1.0),
            (-1, 13.0 / 8.0),
            (1, -13.0 / 8.0),
            (2, 1.0),
            (3, -1.0 / 8.0),
        ],
        4 => &[
            (-3, -1.0 / 6.0),
            (-2, 2.0),
            (-1, -13.0 / 2.0),
            (0, 28.0 / 3.0),
            (1, -13.0 / 2.0),
            (2, 2.0),
            (3, -1.0 / 6.0),
        ],
        _ => panic!("stencil order {k} not supported"),
    }
}

/// Expand `(∂_a - i∂_b)^hol (∂_a + i∂_b)^anti / 2^(hol+anti)` into
/// `Σ c_{r,s} ∂_a^r ∂_b^s`.
fn wirtinger_expansion(hol: u8, anti: u8) -> Vec<(u8, u8, Complex64)> {
    let total = (hol + anti) as usize;
    // poly[s] = coefficient of ∂_a^{total-s} ∂_b^s
    let mut poly = vec![Complex64::new(0.0, 0.0); total + 1];
    poly[0] = Complex64::new(1.0, 0.0);
    let factors = std::iter::repeat_n(Complex64::new(0.0, -1.0), hol as usize)
        .chain(std::iter::repeat_n(Complex64::new(0.0, 1.0), anti as usize));
    for (deg, q) in factors.enumerate() {
        let mut next = vec![Complex64::new(0.0, 0.0); total + 1];
        for s in 0..=deg {
            next[s] += poly[s];
            next[s + 1] += poly[s] * q;
        }
        poly = next;
    }
    let norm = 0.5f64.powi(total as i32);
    poly.into_iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(s, c)| ((total - s) as u8, s as u8, c * norm))
        .collect()
}

struct RealSampler<'a, P: Potential> {
    potential: &'a P,
    base: Vec<f64>,
    m: usize,
    h: f64,
    cache: HashMap<Vec<i8>, f64>,
}

impl<P: Potential> RealSampler<'_, P> {
    fn value(&mut self, offsets: &[i8]) -> f64 {
        if let Some(v) = self.cache.get(offsets) {
            return *v;
        }
        let dim = self.base.len() / 2;
        let coords: Vec<Complex64> = (0..dim)
            .map(|c| {
                Complex64::new(
                    self.base[2 * c] + offsets[2 * c] as f64 * self.h,
                    self.base[2 * c + 1] + offsets[2 * c + 1] as f64 * self.h,
                )
            })
            .collect();
        let conj: Vec<Complex64> = coords.iter().map(|c| c.conj()).collect();
        let x = Coords {
            z: coords[..self.m].to_vec(),
            v: coords[self.m..].to_vec(),
            zb: conj[..self.m].to_vec(),
            vb: conj[self.m..].to_vec(),
        };
        let v = self.potential.phi(&x).re;
        self.cache.insert(offsets.to_vec(), v);
        v
    }

    /// Tensor-product stencil for the real partial `∂^orders`.
    fn partial(&mut self, orders: &[u8]) -> f64 {
        let mut terms: Vec<(Vec<i8>, f64)> = vec![(vec![0; orders.len()], 1.0)];
        for (var, &k) in orders.iter().enumerate() {
            let mut next = Vec::with_capacity(terms.len() * 7);
            for (off, w) in &terms {
                for &(o, sw) in stencil(k) {
                    let mut off = off.clone();
                    off[var] = o;
                    next.push((off, w * sw));
                }
            }
            terms = next;
        }
        let total: i32 = orders.iter().map(|&k| k as i32).sum();
        let sum: f64 = terms.iter().map(|(off, w)| w * self.value(off)).sum();
        sum / self.h.powi(total)
    }
}

/// Finite-difference jet of any [`Potential`] (no region check).
pub fn fd_potential_jet<P: Potential>(
    p: &P,
    point: &ChartPoint,
    order: usize,
    step: FdStep,
) -> Result<WeightJet> {
    if order > MAX_ORDER {
        return Err(KurvError::UnsupportedOrder(order));
    }
    if let FdStep::Fixed(h) = step {
        if h <= 0.0 || !h.is_finite() {
            return Err(KurvError::InvalidArgument(format!(
                "step must be > 0, got {h}"
            )));
        }
    }
    let dim = point.dim();
    let base: Vec<f64> = point.coords().iter().flat_map(|c| [c.re, c.im]).collect();
    let space = JetSpace::get(2 * dim, order);

    let mut samplers: Vec<RealSampler<P>> = (0..=order)
        .map(|p_ord| RealSampler {
            potential: p,
            base: base.clone(),
            m: point.m(),
            h: step.for_order(p_ord),
            cache: HashMap::new(),
        })
        .collect();

    let mut coeffs = Vec::with_capacity(space.len());
    for exps in space.monomials() {
        let idx = MultiIndex::from_exponents(exps);
        let total = idx.order();
        let per_coord: Vec<Vec<(u8, u8, Complex64)>> = (0..dim)
            .map(|c| wirtinger_expansion(idx.hol[c], idx.anti[c]))
            .collect();
        let mut value = Complex64::new(0.0, 0.0);
        let mut real_orders = vec![0u8; 2 * dim];
        expand(
            &per_coord,
            0,
            Complex64::new(1.0, 0.0),
            &mut real_orders,
            &mut |orders, coef| value += coef * samplers[total].partial(orders),
        );
        let fact: f64 = exps
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product();
        coeffs.push(value / fact);
    }
    Ok(WeightJet::from_jet(
        point.clone(),
        Jet::from_coeffs(&space, coeffs),
    ))
}

fn expand(
    per_coord: &[Vec<(u8, u8, Complex64)>],
    c: usize,
    coef: Complex64,
    orders: &mut Vec<u8>,
    visit: &mut dyn FnMut(&[u8], Complex64),
) {
    if c == per_coord.len() {
        visit(orders, coef);
        return;
    }
    for &(r, s, w) in &per_coord[c] {
        orders[2 * c] = r;
        orders[2 * c + 1] = s;
        expand(per_coord, c + 1, coef * w, orders, visit);
    }
}

/// Central-difference approximation of [`crate::jets::evaluate_jet`].
pub fn fd_jet_oracle(
    model: &ModelSpec,
    p: &ChartPoint,
    order: usize,
    step: FdStep,
) -> Result<WeightJet> {
    model.check_point(p)?;
    let reach = 3.0 * step.max_step() * std::f64::consts::SQRT_2;
    model
        .check_point_with_margin(p, reach)
        .map_err(|e| match e {
            KurvError::OutsideRegion {
                coordinate,
                modulus,
                radius,
            } => KurvError::OutsideRegion {
                coordinate: format!("{coordinate} (finite-difference stencil)"),
                modulus,
                radius,
            },
            other => other,
        })?;
    fd_potential_jet(model, p, order, step)
}

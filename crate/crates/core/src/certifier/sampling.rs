//! Seeded direction sampling.
//!
//! A direction is a pair `(a, b)` of horizontal and vertical coefficients in
//! orthonormal coordinates, `|a|² + |b|² = 1`. At a chart point they are
//! mapped through the Cholesky factors of `ψ_{αβ̄}` and `φ_{ij̄}`, so the
//! block norms `‖a‖²_ψ + ‖b‖²_φ` of the resulting tangent vector equal 1.
//!
//! Directions are generated in chunks of [`CHUNK`]; chunk `c` draws from the
//! ChaCha stream `c` of the seed, so any prefix and any worker split produce
//! the same coefficients.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KurvError, Result};

pub const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Gaussian in all coefficients.
    Full,
    Horizontal,
    Vertical,
    /// Cycles full, full, horizontal, vertical.
    Stratified,
    /// `(X, W)` pairs with both members cycling through the strata.
    Pairs,
    /// `(X, W)` pairs with `X` horizontal and `W` vertical.
    MixedPairs,
}

impl SampleMode {
    pub fn is_pairs(self) -> bool {
        matches!(self, SampleMode::Pairs | SampleMode::MixedPairs)
    }
}

impl std::str::FromStr for SampleMode {
    type Err = KurvError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => SampleMode::Full,
            "horizontal" => SampleMode::Horizontal,
            "vertical" => SampleMode::Vertical,
            "stratified" => SampleMode::Stratified,
            "pairs" => SampleMode::Pairs,
            "mixed_pairs" | "mixed-pairs" => SampleMode::MixedPairs,
            other => {
                return Err(KurvError::InvalidArgument(format!(
                    "unknown sample mode `{other}`"
                )))
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stratum {
    Full,
    Horizontal,
    Vertical,
}

/// Horizontal coefficients `a` and vertical coefficients `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl Direction {
    pub fn norm_sq(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Option<Direction> {
        let n = self.norm_sq().sqrt();
        (n > 0.0 && n.is_finite()).then(|| Direction {
            a: self.a.iter().map(|c| c / n).collect(),
            b: self.b.iter().map(|c| c / n).collect(),
        })
    }

    /// Flatten to `(re, im)` parameters.
    pub fn to_params(&self) -> Vec<f64> {
        self.a
            .iter()
            .chain(&self.b)
            .flat_map(|c| [c.re, c.im])
            .collect()
    }

    pub fn from_params(p: &[f64], m: usize) -> Direction {
        let c: Vec<Complex64> = p.chunks(2).map(|x| Complex64::new(x[0], x[1])).collect();
        Direction {
            a: c[..m].to_vec(),
            b: c[m..].to_vec(),
        }
    }
}

/// A direction `x`, and for bisectional sampling a partner `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    pub x: Direction,
    pub w: Option<Direction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub count: usize,
    pub mode: SampleMode,
    pub directions: Vec<DirectionPair>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn draw(rng: &mut ChaCha8Rng, m: usize, n: usize, stratum: Stratum) -> Direction {
    loop {
        let mut d = Direction {
            a: (0..m).map(|_| gaussian(rng)).collect(),
            b: (0..n).map(|_| gaussian(rng)).collect(),
        };
        match stratum {
            Stratum::Horizontal => d.b.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0)),
            Stratum::Vertical => d.a.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0)),
            Stratum::Full => {}
        }
        if let Some(d) = d.normalized() {
            return d;
        }
    }
}

fn cycle(i: usize) -> Stratum {
    match i % 4 {
        2 => Stratum::Horizontal,
        3 => Stratum::Vertical,
        _ => Stratum::Full,
    }
}

fn strata(mode: SampleMode, i: usize) -> (Stratum, Option<Stratum>) {
    match mode {
        SampleMode::Full => (Stratum::Full, None),
        SampleMode::Horizontal => (Stratum::Horizontal, None),
        SampleMode::Vertical => (Stratum::Vertical, None),
        SampleMode::Stratified => (cycle(i), None),
        SampleMode::Pairs => (cycle(i), Some(cycle(i / 4))),
        SampleMode::MixedPairs => (Stratum::Horizontal, Some(Stratum::Vertical)),
    }
}

/// `count` unit directions for an `(m, n)` chart, reproducible from `seed`.
pub fn sample_directions(
    m: usize,
    n: usize,
    count: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<DirectionSample> {
    if count == 0 {
        return Err(KurvError::InvalidArgument(
            "sample count must be ≥ 1".into(),
        ));
    }
    if m == 0 || n == 0 {
        return Err(KurvError::Dimension(format!(
            "need m, n ≥ 1, got ({m}, {n})"
        )));
    }
    let chunks = count.div_ceil(CHUNK);
    let directions: Vec<DirectionPair> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let end = ((c + 1) * CHUNK).min(count);
            (c * CHUNK..end)
                .map(|i| {
                    let (sx, sw) = strata(mode, i);
                    let x = draw(&mut rng, m, n, sx);
                    let w = sw.map(|s| draw(&mut rng, m, n, s));
                    DirectionPair { x, w }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(DirectionSample {
        m,
        n,
        seed,
        count,
        mode,
        directions,
    })
}

//! The four simulation designs, their generators and exact densities.
//!
//! Every [`ObservationSet`] holds `2n` draws: `n` pairs `(X_i, Y_i)` feed the
//! conditional estimators and an independent set of `n` design points feeds
//! the marginal estimator. Both halves come from separate ChaCha20 streams of
//! the same seed, so regeneration is bit-exact.

use crate::error::{ensure, Error, Result};
use crate::gauss::normal_pdf_var;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Cauchy, Distribution, Exp, Normal, StandardNormal};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Stream index of the estimation half.
const ESTIMATION_STREAM: u64 = 0;
/// Stream index of the marginal half.
const MARGINAL_STREAM: u64 = 1;

/// Mixture weight of the normal component of Examples 2 and 4.
const NORMAL_WEIGHT: f64 = 0.75;
/// Rate of the shifted exponential component of Examples 2 and 4.
const EXP_RATE: f64 = 2.0;
/// Left end of the shifted exponential component.
const EXP_SHIFT: f64 = 2.0;

/// Design of Examples 3 and 4: `0.5 N(0, 1/81) + 0.5 N(1, 1/16)`.
const MIX_MEANS: [f64; 2] = [0.0, 1.0];
const MIX_SDS: [f64; 2] = [1.0 / 9.0, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

impl ExampleId {
    pub const ALL: [ExampleId; 4] = [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex3, ExampleId::Ex4];

    /// Designs uniform on `[0, 1]` (Examples 1, 2).
    pub fn uniform_design(self) -> bool {
        matches!(self, ExampleId::Ex1 | ExampleId::Ex2)
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
            ExampleId::Ex3 => "ex3",
            ExampleId::Ex4 => "ex4",
        };
        f.write_str(s)
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" | "1" => Ok(ExampleId::Ex1),
            "ex2" | "2" => Ok(ExampleId::Ex2),
            "ex3" | "3" => Ok(ExampleId::Ex3),
            "ex4" | "4" => Ok(ExampleId::Ex4),
            other => Err(Error::Argument(format!("unknown example `{other}`"))),
        }
    }
}

/// Noise law of Example 1. The Cauchy variant is ignored by the other examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum Noise {
    #[default]
    Gaussian,
    Cauchy,
}

/// A simulation design: an example plus its noise option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Example {
    pub id: ExampleId,
    pub noise: Noise,
}

impl From<ExampleId> for Example {
    fn from(id: ExampleId) -> Self {
        Example {
            id,
            noise: Noise::Gaussian,
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.id, self.noise) {
            (ExampleId::Ex1, Noise::Cauchy) => write!(f, "ex1-cauchy"),
            (id, _) => write!(f, "{id}"),
        }
    }
}

impl FromStr for Example {
    type Err = Error;

    /// Accepts the example names plus `ex1-cauchy` for the heavy-tailed variant.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.strip_suffix("-cauchy") {
            Some("ex1") | Some("1") => Ok(Example {
                id: ExampleId::Ex1,
                noise: Noise::Cauchy,
            }),
            Some(_) => Err(Error::Argument(format!("only Example 1 has a Cauchy variant, got `{s}`"))),
            None => lower.parse::<ExampleId>().map(Example::from),
        }
    }
}

impl Example {
    pub fn heavy_tailed(self) -> bool {
        self.id == ExampleId::Ex1 && self.noise == Noise::Cauchy
    }

    /// Location and spread of `Y | X = x` for the location-scale examples
    /// (1 and 3). Spread is the standard deviation, or the Cauchy scale.
    fn location_scale(self, x: f64) -> Result<(f64, f64)> {
        match self.id {
            ExampleId::Ex1 => {
                let var = 1.3 - x.abs();
                ensure!(var > 0.0, Domain, "Example 1 needs |x| < 1.3, got {x}");
                Ok((2.0 * x * x + 5.0, var.sqrt()))
            }
            ExampleId::Ex3 => Ok((x * x + 1.0, (1.3 + x.abs()).sqrt())),
            _ => unreachable!("mixture examples have no location-scale form"),
        }
    }

    fn mixture_normal_sd(x: f64) -> Result<f64> {
        let sd = 2.0 + x;
        ensure!(sd > 0.0, Domain, "the normal component needs 2 + x > 0, got x = {x}");
        Ok(sd)
    }

    /// Exact density of `Y` given `X = x`.
    pub fn conditional_density(self, x: f64, y: f64) -> Result<f64> {
        match self.id {
            ExampleId::Ex1 | ExampleId::Ex3 => {
                let (loc, spread) = self.location_scale(x)?;
                if self.heavy_tailed() {
                    let z = (y - loc) / spread;
                    Ok(1.0 / (std::f64::consts::PI * spread * (1.0 + z * z)))
                } else {
                    Ok(normal_pdf_var(y, loc, spread * spread))
                }
            }
            ExampleId::Ex2 | ExampleId::Ex4 => {
                let sd = Self::mixture_normal_sd(x)?;
                let normal = NORMAL_WEIGHT * normal_pdf_var(y, 0.0, sd * sd);
                let exp = if y >= EXP_SHIFT {
                    EXP_RATE * (-EXP_RATE * (y - EXP_SHIFT)).exp()
                } else {
                    0.0
                };
                Ok(normal + (1.0 - NORMAL_WEIGHT) * exp)
            }
        }
    }

    /// Exact design density `f_X`.
    pub fn marginal_density(self, x: f64) -> f64 {
        if self.id.uniform_design() {
            if (0.0..=1.0).contains(&x) {
                1.0
            } else {
                0.0
            }
        } else {
            MIX_MEANS
                .iter()
                .zip(MIX_SDS)
                .map(|(&m, s)| 0.5 * normal_pdf_var(x, m, s * s))
                .sum()
        }
    }

    /// A y-interval carrying all but a negligible part of `f(x, .)`, and the
    /// points where `f(x, .)` is not smooth.
    pub fn conditional_support(self, x: f64) -> Result<((f64, f64), Vec<f64>)> {
        match self.id {
            ExampleId::Ex1 | ExampleId::Ex3 => {
                let (loc, spread) = self.location_scale(x)?;
                // Cauchy tails decay like z^-2; the squared density beyond 150
                // scales carries less than 1e-7 of its integral.
                let pad = if self.heavy_tailed() { 150.0 } else { 8.0 };
                Ok(((loc - pad * spread, loc + pad * spread), vec![]))
            }
            ExampleId::Ex2 | ExampleId::Ex4 => {
                let sd = Self::mixture_normal_sd(x)?;
                let hi = (8.0 * sd).max(EXP_SHIFT + 20.0 / EXP_RATE);
                Ok(((-8.0 * sd, hi), vec![EXP_SHIFT]))
            }
        }
    }

    fn draw_x<R: Rng>(self, rng: &mut R) -> f64 {
        if self.id.uniform_design() {
            rng.random::<f64>()
        } else {
            let k = usize::from(rng.random::<f64>() >= 0.5);
            let z: f64 = rng.sample(StandardNormal);
            MIX_MEANS[k] + MIX_SDS[k] * z
        }
    }

    fn draw_y<R: Rng>(self, x: f64, rng: &mut R) -> f64 {
        match self.id {
            ExampleId::Ex1 | ExampleId::Ex3 => {
                let (loc, spread) = self
                    .location_scale(x)
                    .expect("design draws stay inside the noise domain");
                let eps: f64 = if self.heavy_tailed() {
                    Cauchy::new(0.0, 1.0).expect("valid Cauchy").sample(rng)
                } else {
                    rng.sample(StandardNormal)
                };
                loc + spread * eps
            }
            ExampleId::Ex2 | ExampleId::Ex4 => {
                if rng.random::<f64>() < NORMAL_WEIGHT {
                    let sd = (2.0 + x).abs();
                    Normal::new(0.0, sd).expect("positive sd").sample(rng)
                } else {
                    EXP_SHIFT + Exp::new(EXP_RATE).expect("positive rate").sample(rng)
                }
            }
        }
    }
}

/// `2n` draws from one design: the estimation pairs and the marginal half.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub marginal_xs: Vec<f64>,
    pub seed: u64,
    pub example: Example,
}

impl ObservationSet {
    /// Builds a set from given data, e.g. for hand-made test fixtures.
    pub fn from_data(
        xs: Vec<f64>,
        ys: Vec<f64>,
        marginal_xs: Vec<f64>,
        example: impl Into<Example>,
    ) -> Result<Self> {
        ensure!(xs.len() == ys.len(), Argument, "x and y lengths differ");
        ensure!(!xs.is_empty(), Argument, "empty estimation half");
        Ok(Self {
            xs,
            ys,
            marginal_xs,
            seed: 0,
            example: example.into(),
        })
    }

    /// Number of estimation pairs.
    pub fn n(&self) -> usize {
        self.xs.len()
    }
}

/// Draws the `2n` observations of `example` deterministically from `seed`.
pub fn generate(example: impl Into<Example>, n: usize, seed: u64) -> Result<ObservationSet> {
    let example = example.into();
    ensure!(n >= 2, Argument, "need n >= 2, got {n}");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(ESTIMATION_STREAM);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = example.draw_x(&mut rng);
        xs.push(x);
        ys.push(example.draw_y(x, &mut rng));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(MARGINAL_STREAM);
    let marginal_xs = (0..n).map(|_| example.draw_x(&mut rng)).collect();
    Ok(ObservationSet {
        xs,
        ys,
        marginal_xs,
        seed,
        example,
    })
}

pub fn true_conditional_density(example: impl Into<Example>, x: f64, y: f64) -> Result<f64> {
    example.into().conditional_density(x, y)
}

pub fn true_marginal_density(example: impl Into<Example>, x: f64) -> f64 {
    example.into().marginal_density(x)
}

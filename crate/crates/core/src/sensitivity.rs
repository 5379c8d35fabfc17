//! Directional sensitivity of a forest whose normals come from `N(0, A)` or a
//! Gaussian mixture.
//!
//! The sensitivity in direction `n` is the spread of the normal distribution
//! along `n`, `alpha(n) = sqrt(n'An)`, which is also the half-length of the
//! projection of the ellipsoid `x'A^{-1}x = 1` onto the axis through `n`. For
//! a mixture it is the weighted sum of the component spreads. Region averages
//! (`tau`) are Monte Carlo means over uniform directions in the region.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{check_len, cholesky, dot, quadratic_form, SymMatrix};
use crate::sampling::{sample_unit_sphere, MixtureSpec, RngStream};

/// Proposals per accepted sample before a predicate region is declared empty.
pub const MAX_REGION_PROPOSALS: usize = 1_000_000;
/// Default Monte Carlo sample count for region averages.
pub const DEFAULT_TAU_SAMPLES: usize = 100_000;
/// Default number of coarse directions searched when normalizing a mixture.
pub const DEFAULT_NORMALIZE_GRID: usize = 10_000;
const ASCENT_ITERATIONS: usize = 50;
const ASCENT_STARTS: usize = 5;
/// Seed of the coarse direction set used by mixture normalization in `d >= 3`.
pub const NORMALIZE_SEED: u64 = 0x5eed_a1f0;

/// A unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`, which must be nonzero and finite.
    pub fn new(mut v: Vec<f64>) -> Result<Self> {
        let norm = dot(&v, &v).sqrt();
        if !(norm.is_finite() && norm > 1e-300) || v.is_empty() {
            return Err(Error::InvalidParameter(
                "direction must be a nonzero finite vector".into(),
            ));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(v))
    }

    /// `(cos theta, sin theta)`
    pub fn from_angle(theta: f64) -> Self {
        Self(vec![theta.cos(), theta.sin()])
    }

    /// The `i`-th coordinate axis of `R^d`.
    pub fn axis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A subset of the unit sphere.
#[derive(Clone)]
pub enum SphereRegion {
    /// Directions within `half_angle` radians of `axis`; `half_angle = pi` is
    /// the whole sphere.
    Cap { axis: Direction, half_angle: f64 },
    /// Directions accepted by a membership test.
    Predicate {
        dim: usize,
        contains: Membership,
    },
}

impl fmt::Debug for SphereRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cap { axis, half_angle } => f
                .debug_struct("Cap")
                .field("axis", axis)
                .field("half_angle", half_angle)
                .finish(),
            Self::Predicate { dim, .. } => f.debug_struct("Predicate").field("dim", dim).finish(),
        }
    }
}

impl SphereRegion {
    pub fn cap(axis: Direction, half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle <= PI) {
            return Err(Error::InvalidParameter(format!(
                "cap half-angle {half_angle} outside (0, pi]"
            )));
        }
        Ok(Self::Cap { axis, half_angle })
    }

    pub fn full(dim: usize) -> Self {
        Self::Cap {
            axis: Direction::axis(dim, 0),
            half_angle: PI,
        }
    }

    pub fn predicate<F>(dim: usize, contains: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self::Predicate {
            dim,
            contains: Arc::new(contains),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cap { axis, .. } => axis.dim(),
            Self::Predicate { dim, .. } => *dim,
        }
    }

    /// One direction uniformly distributed on the region.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        match self {
            Self::Cap { axis, half_angle } => Ok(sample_cap(axis.as_slice(), *half_angle, rng)),
            Self::Predicate { dim, contains } => {
                for _ in 0..MAX_REGION_PROPOSALS {
                    let n = sample_unit_sphere(*dim, rng);
                    if contains(&n) {
                        return Ok(n);
                    }
                }
                Err(Error::EmptyRegion {
                    proposals: MAX_REGION_PROPOSALS,
                })
            }
        }
    }
}

/// Uniform sample from the cap `{n : angle(n, axis) <= u}`.
///
/// The cosine `t = n'axis` has density proportional to `(1 - t^2)^((d-3)/2)`
/// on `[cos u, 1]`. It is drawn exactly (by angle in 2D, uniformly in 3D,
/// by rejection otherwise) and combined with a uniform tangential direction.
fn sample_cap(axis: &[f64], half_angle: f64, rng: &mut RngStream) -> Vec<f64> {
    let d = axis.len();
    if d == 1 {
        return if half_angle >= PI {
            sample_unit_sphere(1, rng)
        } else {
            axis.to_vec()
        };
    }
    if d == 2 {
        let phi = (2.0 * rng.uniform() - 1.0) * half_angle;
        let (s, c) = phi.sin_cos();
        return vec![c * axis[0] - s * axis[1], s * axis[0] + c * axis[1]];
    }
    let t_min = half_angle.cos();
    let t = if d == 3 {
        t_min + rng.uniform() * (1.0 - t_min)
    } else {
        let power = (d as f64 - 3.0) / 2.0;
        let t_peak = t_min.max(0.0);
        let bound = (1.0 - t_peak * t_peak).powf(power);
        loop {
            let t = t_min + rng.uniform() * (1.0 - t_min);
            if rng.uniform() * bound <= (1.0 - t * t).powf(power) {
                break t;
            }
        }
    };
    let tangent = loop {
        let mut g = rng.standard_normal_vec(d);
        let along = dot(&g, axis);
        g.iter_mut().zip(axis).for_each(|(gi, ai)| *gi -= along * ai);
        let norm = dot(&g, &g).sqrt();
        if norm > 1e-12 {
            g.iter_mut().for_each(|x| *x /= norm);
            break g;
        }
    };
    let radial = (1.0 - t * t).max(0.0).sqrt();
    axis.iter()
        .zip(&tangent)
        .map(|(a, v)| t * a + radial * v)
        .collect()
}

/// `sqrt(n'An / n'n)`: the spread along `n`, insensitive to rounding in the
/// normalization of `n`.
fn spread(n: &[f64], a: &SymMatrix) -> Result<f64> {
    let q = quadratic_form(n, a)?;
    Ok((q / dot(n, n)).max(0.0).sqrt())
}

/// `alpha(n) = sqrt(n'An)`
pub fn alpha(n: &Direction, a: &SymMatrix) -> Result<f64> {
    spread(n.as_slice(), a)
}

/// `sum_i pi_i sqrt(n' (c A_i) n)`
pub fn alpha_mixture(n: &Direction, m: &MixtureSpec) -> Result<f64> {
    Ok(m.scale().sqrt() * unit_scale_alpha(n.as_slice(), m)?)
}

fn unit_scale_alpha(n: &[f64], m: &MixtureSpec) -> Result<f64> {
    m.components().iter().try_fold(0.0, |acc, c| {
        Ok(acc + c.weight * spread(n, c.gaussian.cov())?)
    })
}

/// `alpha` at `(cos theta, sin theta)` for a 2x2 matrix.
pub fn alpha_polar(theta: f64, a: &SymMatrix) -> Result<f64> {
    check_len(2, a.dim())?;
    alpha(&Direction::from_angle(theta), a)
}

pub fn alpha_mixture_polar(theta: f64, m: &MixtureSpec) -> Result<f64> {
    check_len(2, m.dim())?;
    alpha_mixture(&Direction::from_angle(theta), m)
}

/// Half-length of the projection of the ellipsoid `x'A^{-1}x = 1` onto the
/// axis through `n`. The maximizer of `x'n` on the ellipsoid is
/// `An / sqrt(n'An)`, giving `sqrt(n'An)`.
pub fn ellipsoid_projection_halflength(a: &SymMatrix, n: &Direction) -> Result<f64> {
    cholesky(a)?;
    spread(n.as_slice(), a)
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

fn region_average<F>(
    region: &SphereRegion,
    samples: usize,
    rng: &mut RngStream,
    integrand: F,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "at least 100 samples required, got {samples}"
        )));
    }
    let values = (0..samples)
        .map(|_| integrand(&region.sample(rng)?))
        .collect::<Result<Vec<f64>>>()?;
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Average of `alpha` over `region`.
pub fn tau(
    region: &SphereRegion,
    a: &SymMatrix,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    check_len(a.dim(), region.dim())?;
    region_average(region, samples, rng, |n| spread(n, a))
}

/// Average of the mixture sensitivity over `region`.
pub fn tau_mixture(
    region: &SphereRegion,
    m: &MixtureSpec,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Estimate> {
    check_len(m.dim(), region.dim())?;
    let root = m.scale().sqrt();
    region_average(region, samples, rng, |n| {
        Ok(root * unit_scale_alpha(n, m)?)
    })
}

/// Largest mixture sensitivity over the sphere and a direction attaining it.
///
/// Coarse search over `grid` directions (evenly spaced angles in 2D, seeded
/// uniform draws otherwise), then projected gradient ascent with a shrinking
/// step from the best few candidates.
pub fn max_alpha_mixture(m: &MixtureSpec, grid: usize) -> Result<(f64, Direction)> {
    let (value, dir) = max_unit_scale_alpha(m, grid)?;
    Ok((m.scale().sqrt() * value, dir))
}

fn max_unit_scale_alpha(m: &MixtureSpec, grid: usize) -> Result<(f64, Direction)> {
    let d = m.dim();
    let grid = grid.max(1);
    let candidates: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..grid)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / grid as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let mut rng = RngStream::new(NORMALIZE_SEED, 0);
            let mut dirs: Vec<Vec<f64>> = (0..grid).map(|_| sample_unit_sphere(d, &mut rng)).collect();
            dirs.extend((0..d).map(|i| Direction::axis(d, i).into_vec()));
            dirs
        }
    };
    let mut scored = candidates
        .into_iter()
        .map(|n| Ok((unit_scale_alpha(&n, m)?, n)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(ASCENT_STARTS);

    let mut best = scored[0].clone();
    for (value, start) in scored {
        let refined = ascend(m, start, value)?;
        if refined.0 > best.0 {
            best = refined;
        }
    }
    Ok((best.0, Direction::new(best.1)?))
}

fn ascend(m: &MixtureSpec, mut n: Vec<f64>, mut value: f64) -> Result<(f64, Vec<f64>)> {
    let mut step = 0.1;
    for _ in 0..ASCENT_ITERATIONS {
        let mut grad = vec![0.0; n.len()];
        for c in m.components() {
            let s = spread(&n, c.gaussian.cov())?;
            if s > 0.0 {
                let an = c.gaussian.cov().mul_vec(&n)?;
                grad.iter_mut()
                    .zip(&an)
                    .for_each(|(g, v)| *g += c.weight * v / s);
            }
        }
        let radial = dot(&grad, &n);
        grad.iter_mut().zip(&n).for_each(|(g, x)| *g -= radial * x);
        let norm = dot(&grad, &grad).sqrt();
        if norm < 1e-15 {
            break;
        }
        let mut trial: Vec<f64> = n.iter().zip(&grad).map(|(x, g)| x + step * g / norm).collect();
        let tn = dot(&trial, &trial).sqrt();
        trial.iter_mut().for_each(|x| *x /= tn);
        let trial_value = unit_scale_alpha(&trial, m)?;
        if trial_value > value {
            n = trial;
            value = trial_value;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ok((value, n))
}

/// The mixture rescaled so that its largest directional sensitivity is 1.
///
/// Sensitivity scales with `sqrt(c)`, so the new scale is `1 / max^2` of the
/// unit-scale sensitivity; the input scale does not influence the result.
pub fn normalize_mixture(m: &MixtureSpec, grid: usize) -> Result<MixtureSpec> {
    let (max, _) = max_unit_scale_alpha(m, grid)?;
    if !(max > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    m.with_scale(1.0 / (max * max))
}

/// Sensitivity values over a set of directions, or over polar angles in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile {
    /// Polar angles when the profile was evaluated in the plane.
    pub thetas: Option<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl SensitivityProfile {
    pub fn polar<F>(thetas: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&Direction) -> Result<f64>,
    {
        let directions: Vec<Direction> = thetas.iter().map(|t| Direction::from_angle(*t)).collect();
        let values = directions.iter().map(&f).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thetas: Some(thetas.to_vec()),
            directions: directions.into_iter().map(Direction::into_vec).collect(),
            values,
        })
    }

    pub fn over_directions<F>(directions: Vec<Direction>, f: F) -> Result<Self>
    where
        F: Fn(&Direction) -> Result<f64>,
    {
        let values = directions.iter().map(&f).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thetas: None,
            directions: directions.into_iter().map(Direction::into_vec).collect(),
            values,
        })
    }

    /// `(header, rows)` for a two-column table: theta or direction index,
    /// then value.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        match &self.thetas {
            Some(thetas) => (
                vec!["theta".into(), "sensitivity".into()],
                thetas.iter().zip(&self.values).map(|(t, v)| vec![*t, *v]).collect(),
            ),
            None => (
                vec!["direction".into(), "sensitivity".into()],
                self.values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![i as f64, *v])
                    .collect(),
            ),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `count` evenly spaced angles in `[0, 2 pi)`.
pub fn polar_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| 2.0 * PI * k as f64 / count as f64).collect()
}

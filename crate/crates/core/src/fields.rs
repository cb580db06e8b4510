//! Analytic ground-truth scalar fields and their exact gradients, plus
//! samplers that discretize them into grids and point clouds.
//!
//! Two classic test signals are provided: a radial Gaussian intensity beam
//! and the oscillating Marschner-Lobb reconstruction benchmark, both over
//! `[-1,1]^3` by default. A multi-beam variant lines several Gaussian beams
//! of shrinking radius along the x = y diagonal for zoom studies.

use thiserror::Error;

use crate::encode::{PointCloud, ScalarGrid};
use crate::model::DomainBounds;
use crate::scalar::{real, Real, SplitMix64};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid field spec: {0}")]
    Invalid(String),
}

/// One Gaussian beam: unit-peak radial profile `exp(-(d/radius)^2 / (2 sigma^2))`
/// scaled into `[v_min, v_max]`, with the standard profile width `sigma = 1/3`
/// so the value at `d == radius` is `v_max * exp(-4.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam<T> {
    pub center: [T; 3],
    pub radius: T,
    pub v_min: T,
    pub v_max: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec<T> {
    GaussianBeam {
        v_min: T,
        v_max: T,
        mu: T,
        sigma: T,
        radius: T,
    },
    MarschnerLobb {
        f_m: T,
        alpha: T,
    },
    MultiBeam {
        beams: Vec<Beam<T>>,
    },
}

const BEAM_SIGMA: f64 = 1.0 / 3.0;

impl<T: Real> FieldSpec<T> {
    /// Radial Gaussian intensity: peak 255 at the origin, radius sqrt(3),
    /// sigma 1/3, over `[-1,1]^3`.
    pub fn gaussian_beam_default() -> Self {
        FieldSpec::GaussianBeam {
            v_min: T::zero(),
            v_max: real(255.0),
            mu: T::zero(),
            sigma: real(BEAM_SIGMA),
            radius: real(3.0f64.sqrt()),
        }
    }

    /// Marschner-Lobb with f_M = 6 and alpha = 0.25 over `[-1,1]^3`.
    pub fn marschner_lobb_default() -> Self {
        FieldSpec::MarschnerLobb {
            f_m: real(6.0),
            alpha: real(0.25),
        }
    }

    /// Four beams whose diameters cover 64, 32, 16 and 8 cells of a 128^3
    /// lattice over `[-1,1]^3`, centers on the x = y diagonal at z = 0 with
    /// disjoint supports. The layout constants are pinned so zoom studies
    /// are reproducible.
    pub fn multi_beam_zoom_study() -> Self {
        let h = 2.0 / 127.0;
        let radii = [32.0 * h, 16.0 * h, 8.0 * h, 4.0 * h];
        let margin = 2.0 * h;
        let diag = 2.0 * 2.0f64.sqrt();
        let span = 2.0 * radii.iter().sum::<f64>() + 3.0 * margin;
        let lead = (diag - span) / 2.0;

        let mut beams = Vec::with_capacity(4);
        let mut s = lead + radii[0];
        for (k, &r) in radii.iter().enumerate() {
            if k > 0 {
                s += radii[k - 1] + margin + r;
            }
            let xy = -1.0 + s / 2.0f64.sqrt();
            beams.push(Beam {
                center: [real(xy), real(xy), T::zero()],
                radius: real(r),
                v_min: T::zero(),
                v_max: real(255.0),
            });
        }
        FieldSpec::MultiBeam { beams }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        match self {
            FieldSpec::GaussianBeam {
                v_min,
                v_max,
                sigma,
                radius,
                ..
            } => {
                if *sigma <= T::zero() {
                    return Err(FieldError::Invalid("sigma must be positive".into()));
                }
                if *radius <= T::zero() {
                    return Err(FieldError::Invalid("radius must be positive".into()));
                }
                if v_min > v_max {
                    return Err(FieldError::Invalid("v_min above v_max".into()));
                }
            }
            FieldSpec::MarschnerLobb { f_m, alpha } => {
                if *f_m <= T::zero() {
                    return Err(FieldError::Invalid("f_m must be positive".into()));
                }
                if *alpha <= -T::one() {
                    return Err(FieldError::Invalid("alpha must exceed -1".into()));
                }
            }
            FieldSpec::MultiBeam { beams } => {
                if beams.is_empty() {
                    return Err(FieldError::Invalid("need at least one beam".into()));
                }
                for b in beams {
                    if b.radius <= T::zero() {
                        return Err(FieldError::Invalid("beam radius must be positive".into()));
                    }
                    if b.v_min > b.v_max {
                        return Err(FieldError::Invalid("beam v_min above v_max".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// The natural physical domain of the field.
    pub fn default_bounds(&self) -> DomainBounds<T> {
        DomainBounds::new([-T::one(); 3], [T::one(); 3])
    }

    /// Output range, for transfer-function setup and relative errors.
    pub fn value_range_hint(&self) -> (T, T) {
        match self {
            FieldSpec::GaussianBeam { v_min, v_max, .. } => (*v_min, *v_max),
            FieldSpec::MarschnerLobb { .. } => (T::zero(), T::one()),
            FieldSpec::MultiBeam { beams } => {
                let lo = beams
                    .iter()
                    .map(|b| b.v_min)
                    .fold(T::infinity(), |a, b| a.min(b));
                let hi = beams
                    .iter()
                    .map(|b| b.v_max)
                    .fold(T::neg_infinity(), |a, b| a.max(b));
                (lo, hi)
            }
        }
    }

    pub fn value(&self, p: [T; 3]) -> T {
        match self {
            FieldSpec::GaussianBeam {
                v_min,
                v_max,
                mu,
                sigma,
                radius,
            } => {
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                gaussian_profile(r, *mu, *sigma, *radius, *v_min, *v_max)
            }
            FieldSpec::MarschnerLobb { f_m, alpha } => marschner_lobb_value(p, *f_m, *alpha),
            FieldSpec::MultiBeam { beams } => {
                let mut best = T::neg_infinity();
                for b in beams {
                    let v = beam_value(b, p);
                    if v > best {
                        best = v;
                    }
                }
                best
            }
        }
    }

    /// Closed-form gradient. Radial singularities return their analytic
    /// limits (never NaN): the beam gradient at its center is zero and the
    /// Marschner-Lobb radial term vanishes on the z axis. The multi-beam
    /// gradient follows the beam that wins the per-point maximum.
    pub fn gradient(&self, p: [T; 3]) -> [T; 3] {
        match self {
            FieldSpec::GaussianBeam {
                v_min,
                v_max,
                mu,
                sigma,
                radius,
            } => gaussian_gradient(p, [T::zero(); 3], *mu, *sigma, *radius, *v_min, *v_max),
            FieldSpec::MarschnerLobb { f_m, alpha } => marschner_lobb_gradient(p, *f_m, *alpha),
            FieldSpec::MultiBeam { beams } => {
                let mut best = T::neg_infinity();
                let mut winner = &beams[0];
                for b in beams {
                    let v = beam_value(b, p);
                    if v > best {
                        best = v;
                        winner = b;
                    }
                }
                gaussian_gradient(
                    p,
                    winner.center,
                    T::zero(),
                    real(BEAM_SIGMA),
                    winner.radius,
                    winner.v_min,
                    winner.v_max,
                )
            }
        }
    }
}

fn gaussian_profile<T: Real>(dist: T, mu: T, sigma: T, radius: T, v_min: T, v_max: T) -> T {
    let l = dist / radius;
    let d = l - mu;
    let g = (-(d * d) / (real::<T>(2.0) * sigma * sigma)).exp();
    v_min + (v_max - v_min) * g
}

fn beam_value<T: Real>(b: &Beam<T>, p: [T; 3]) -> T {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let dz = p[2] - b.center[2];
    let dist = (dx * dx + dy * dy + dz * dz).sqrt();
    gaussian_profile(dist, T::zero(), real(BEAM_SIGMA), b.radius, b.v_min, b.v_max)
}

fn gaussian_gradient<T: Real>(
    p: [T; 3],
    center: [T; 3],
    mu: T,
    sigma: T,
    radius: T,
    v_min: T,
    v_max: T,
) -> [T; 3] {
    let dx = p[0] - center[0];
    let dy = p[1] - center[1];
    let dz = p[2] - center[2];
    let r = (dx * dx + dy * dy + dz * dz).sqrt();
    if r == T::zero() {
        return [T::zero(); 3];
    }
    let l = r / radius;
    let d = l - mu;
    let g = (-(d * d) / (real::<T>(2.0) * sigma * sigma)).exp();
    // dF/dr = (v_max - v_min) * g * (-(l - mu)/sigma^2) / radius
    let df_dr = (v_max - v_min) * g * (-(d / (sigma * sigma))) / radius;
    [df_dr * dx / r, df_dr * dy / r, df_dr * dz / r]
}

fn marschner_lobb_value<T: Real>(p: [T; 3], f_m: T, alpha: T) -> T {
    let half_pi = real::<T>(std::f64::consts::FRAC_PI_2);
    let two_pi = real::<T>(std::f64::consts::TAU);
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let rho = (two_pi * f_m * (half_pi * r).cos()).cos();
    let numer = T::one() - (half_pi * p[2]).sin() + alpha * (T::one() + rho);
    numer / (real::<T>(2.0) * (T::one() + alpha))
}

fn marschner_lobb_gradient<T: Real>(p: [T; 3], f_m: T, alpha: T) -> [T; 3] {
    let pi = real::<T>(std::f64::consts::PI);
    let half_pi = real::<T>(std::f64::consts::FRAC_PI_2);
    let two_pi = real::<T>(std::f64::consts::TAU);
    let denom = real::<T>(2.0) * (T::one() + alpha);

    let gz = -(half_pi) * (half_pi * p[2]).cos() / denom;

    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if r == T::zero() {
        return [T::zero(), T::zero(), gz];
    }
    // d rho / dr = pi^2 f sin(pi r / 2) sin(2 pi f cos(pi r / 2))
    let phase = two_pi * f_m * (half_pi * r).cos();
    let drho = pi * pi * f_m * (half_pi * r).sin() * phase.sin();
    let radial = alpha * drho / denom;
    [radial * p[0] / r, radial * p[1] / r, gz]
}

/// Samples a field on the cell-vertex lattice of `bounds`, both boundary
/// planes included.
pub fn sample_grid<T: Real>(
    field: &FieldSpec<T>,
    dims: [usize; 3],
    bounds: DomainBounds<T>,
) -> Result<ScalarGrid<T>, crate::encode::FitError> {
    let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let mut p = [T::zero(); 3];
                for (d, &i) in [x, y, z].iter().enumerate() {
                    let t = real::<T>(i as f64 / (dims[d] - 1) as f64);
                    p[d] = bounds.min[d] + t * bounds.extent(d);
                }
                values.push(field.value(p));
            }
        }
    }
    ScalarGrid::new(dims, bounds, values)
}

/// Seeded uniform scattered sampling of a field inside `bounds`.
pub fn sample_scattered<T: Real>(
    field: &FieldSpec<T>,
    n: usize,
    bounds: DomainBounds<T>,
    seed: u64,
) -> Result<PointCloud<T>, crate::encode::FitError> {
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = [T::zero(); 3];
        for d in 0..3 {
            let t: T = real(rng.next_f64());
            p[d] = bounds.min[d] + t * bounds.extent(d);
        }
        points.push(p);
        values.push(field.value(p));
    }
    PointCloud::new(points, values)
}

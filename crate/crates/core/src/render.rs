//! Ray-casting volume renderer: per-pixel rays, fixed-step sampling,
//! transfer functions, optional gradient shading, and front-to-back
//! compositing with early ray termination.
//!
//! The sample source is pluggable (an encoded model, a baseline filter over
//! a grid, or an analytic field for ground truth) and every source sees the
//! identical sample positions for a given config, so quality and timing
//! comparisons are apples to apples. Image rows are partitioned across
//! workers; each worker writes only its own rows and the output is
//! bit-identical for any worker count.

use rayon::prelude::*;
use thiserror::Error;

use crate::encode::ScalarGrid;
use crate::fields::FieldSpec;
use crate::filters::{filter_gradient, filter_value, FilterKind};
use crate::image::ImageRgba;
use crate::model::{DomainBounds, MfaModel, ParamPoint};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    Config(String),
    #[error("source query failed at pixel ({px}, {py}), t = {t}: {message}")]
    Source {
        px: usize,
        py: usize,
        t: f64,
        message: String,
    },
}

// ---------------------------------------------------------------------------
// camera and rays
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T> {
    /// Parallel rays; `height` is the world-space height of the viewport.
    Orthographic { height: T },
    Perspective { fov_y_deg: T },
}

#[derive(Debug, Clone)]
pub struct Camera<T> {
    pub eye: [T; 3],
    pub look_at: [T; 3],
    pub projection: Projection<T>,
    pub width: usize,
    pub height: usize,
    // orthonormal basis, fixed at construction
    forward: [T; 3],
    right: [T; 3],
    up: [T; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct Ray<T> {
    pub origin: [T; 3],
    pub dir: [T; 3],
}

fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm<T: Real>(a: [T; 3]) -> T {
    dot(a, a).sqrt()
}

fn normalize<T: Real>(a: [T; 3]) -> [T; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

impl<T: Real> Camera<T> {
    pub fn new(
        eye: [T; 3],
        look_at: [T; 3],
        up_hint: [T; 3],
        projection: Projection<T>,
        width: usize,
        height: usize,
    ) -> Result<Self, RenderError> {
        if width < 1 || height < 1 {
            return Err(RenderError::Config(format!(
                "image size {width}x{height} must be at least 1x1"
            )));
        }
        let view = sub(look_at, eye);
        if norm(view) == T::zero() {
            return Err(RenderError::Config("eye coincides with look-at".into()));
        }
        let forward = normalize(view);
        let r = cross(forward, up_hint);
        if norm(r) < real(1e-9) {
            return Err(RenderError::Config(
                "up vector is parallel to the view direction".into(),
            ));
        }
        let right = normalize(r);
        let up = cross(right, forward);
        match projection {
            Projection::Orthographic { height: h } => {
                if h <= T::zero() {
                    return Err(RenderError::Config(
                        "orthographic viewport height must be positive".into(),
                    ));
                }
            }
            Projection::Perspective { fov_y_deg } => {
                if fov_y_deg <= T::zero() || fov_y_deg >= real(180.0) {
                    return Err(RenderError::Config(format!(
                        "fov {fov_y_deg} degrees out of (0, 180)"
                    )));
                }
            }
        }
        Ok(Self {
            eye,
            look_at,
            projection,
            width,
            height,
            forward,
            right,
            up,
        })
    }

    /// Ray through the center of pixel `(px, py)`; unit direction.
    pub fn generate_ray(&self, px: usize, py: usize) -> Ray<T> {
        debug_assert!(px < self.width && py < self.height);
        let two = real::<T>(2.0);
        let u = (real::<T>(px as f64) + real(0.5)) / real(self.width as f64) * two - T::one();
        let v = T::one() - (real::<T>(py as f64) + real(0.5)) / real(self.height as f64) * two;
        let aspect = real::<T>(self.width as f64 / self.height as f64);
        match self.projection {
            Projection::Orthographic { height } => {
                let half_h = height / two;
                let half_w = half_h * aspect;
                let origin = add(
                    self.eye,
                    add(scale(self.right, u * half_w), scale(self.up, v * half_h)),
                );
                Ray {
                    origin,
                    dir: self.forward,
                }
            }
            Projection::Perspective { fov_y_deg } => {
                let tan_y = (fov_y_deg.to_radians() / two).tan();
                let tan_x = tan_y * aspect;
                let dir = add(
                    self.forward,
                    add(scale(self.right, u * tan_x), scale(self.up, v * tan_y)),
                );
                Ray {
                    origin: self.eye,
                    dir: normalize(dir),
                }
            }
        }
    }
}

/// Slab-method ray/box intersection: `Some((t_in, t_out))` or a miss when
/// the interval is empty in front of the origin.
pub fn ray_box_clip<T: Real>(ray: &Ray<T>, bounds: &DomainBounds<T>) -> Option<(T, T)> {
    let mut t_in = T::neg_infinity();
    let mut t_out = T::infinity();
    for d in 0..3 {
        if ray.dir[d] == T::zero() {
            if ray.origin[d] < bounds.min[d] || ray.origin[d] > bounds.max[d] {
                return None;
            }
            continue;
        }
        let inv = T::one() / ray.dir[d];
        let mut t0 = (bounds.min[d] - ray.origin[d]) * inv;
        let mut t1 = (bounds.max[d] - ray.origin[d]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_in {
            t_in = t0;
        }
        if t1 < t_out {
            t_out = t1;
        }
    }
    if t_out < t_in.max(T::zero()) {
        None
    } else {
        Some((t_in, t_out))
    }
}

// ---------------------------------------------------------------------------
// transfer functions
// ---------------------------------------------------------------------------

/// Sorted piecewise-linear breakpoints. A repeated abscissa makes a jump;
/// lookups clamp outside the breakpoint range. Segment-width reciprocals are
/// precomputed so a lookup never divides.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<T, V> {
    points: Vec<(T, V)>,
    inv_dx: Vec<T>,
}

pub trait Lerp<T>: Copy {
    fn lerp(a: Self, b: Self, t: T) -> Self;
    fn clamp01(self) -> Self;
}

impl<T: Real> Lerp<T> for T {
    fn lerp(a: Self, b: Self, t: T) -> Self {
        a + (b - a) * t
    }
    fn clamp01(self) -> Self {
        self.max(T::zero()).min(T::one())
    }
}

impl<T: Real> Lerp<T> for [T; 3] {
    fn lerp(a: Self, b: Self, t: T) -> Self {
        [
            a[0] + (b[0] - a[0]) * t,
            a[1] + (b[1] - a[1]) * t,
            a[2] + (b[2] - a[2]) * t,
        ]
    }
    fn clamp01(self) -> Self {
        [
            self[0].max(T::zero()).min(T::one()),
            self[1].max(T::zero()).min(T::one()),
            self[2].max(T::zero()).min(T::one()),
        ]
    }
}

impl<T: Real, V: Lerp<T>> PiecewiseLinear<T, V> {
    pub fn new(points: Vec<(T, V)>) -> Result<Self, RenderError> {
        if points.is_empty() {
            return Err(RenderError::Config(
                "transfer function needs at least one breakpoint".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(RenderError::Config(
                "transfer function breakpoints must be sorted by value".into(),
            ));
        }
        let inv_dx = points
            .windows(2)
            .map(|w| {
                let dx = w[1].0 - w[0].0;
                if dx == T::zero() {
                    T::zero()
                } else {
                    T::one() / dx
                }
            })
            .collect();
        Ok(Self { points, inv_dx })
    }

    #[inline]
    pub fn apply(&self, v: T) -> V {
        let pts = &self.points;
        // the presets are a single point or one segment
        let out = match pts.len() {
            1 => pts[0].1,
            2 => {
                // upper test first so a zero-width segment jumps at its edge
                if v >= pts[1].0 {
                    pts[1].1
                } else if v <= pts[0].0 {
                    pts[0].1
                } else {
                    V::lerp(pts[0].1, pts[1].1, (v - pts[0].0) * self.inv_dx[0])
                }
            }
            _ => {
                let idx = pts.partition_point(|p| p.0 <= v);
                if idx == 0 {
                    pts[0].1
                } else if idx == pts.len() {
                    pts[idx - 1].1
                } else {
                    let (x0, y0) = pts[idx - 1];
                    let (_, y1) = pts[idx];
                    let inv = self.inv_dx[idx - 1];
                    if inv == T::zero() {
                        y0
                    } else {
                        V::lerp(y0, y1, (v - x0) * inv)
                    }
                }
            }
        };
        out.clamp01()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunctions<T> {
    pub opacity: PiecewiseLinear<T, T>,
    pub color: PiecewiseLinear<T, [T; 3]>,
}

impl<T: Real> TransferFunctions<T> {
    /// Opacity ramps linearly from `a0` at `v0` to `a1` at `v1`; constant
    /// color.
    pub fn ramp(v0: T, v1: T, a0: T, a1: T, rgb: [T; 3]) -> Result<Self, RenderError> {
        Ok(Self {
            opacity: PiecewiseLinear::new(vec![(v0, a0), (v1, a1)])?,
            color: PiecewiseLinear::new(vec![(v0, rgb)])?,
        })
    }

    /// Opacity jumps from `low` to `high` at `edge`; constant color.
    pub fn step(edge: T, low: T, high: T, rgb: [T; 3]) -> Result<Self, RenderError> {
        Ok(Self {
            opacity: PiecewiseLinear::new(vec![(edge, low), (edge, high)])?,
            color: PiecewiseLinear::new(vec![(edge, rgb)])?,
        })
    }
}

// ---------------------------------------------------------------------------
// render configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Shading<T> {
    /// Unit vector pointing from the surface toward the light.
    pub light_dir: [T; 3],
    pub ambient: [T; 3],
    pub diffuse: [T; 3],
    pub specular: [T; 3],
    pub shininess: T,
}

impl<T: Real> Default for Shading<T> {
    fn default() -> Self {
        Self {
            light_dir: normalize([T::one(), T::one(), T::one()]),
            ambient: [real(0.15); 3],
            diffuse: [real(0.75); 3],
            specular: [real(0.2); 3],
            shininess: real(12.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderConfig<T> {
    pub camera: Camera<T>,
    pub tfs: TransferFunctions<T>,
    /// Sample distance as a fraction of the volume diagonal.
    pub step: T,
    pub shading: Option<Shading<T>>,
    /// Early-termination threshold; 1.0 disables early termination.
    pub o_max: T,
    pub background: [T; 4],
    /// Rescale opacity by step length relative to the default step (off by
    /// default: comparisons run at equal step counts).
    pub opacity_correction: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

pub const DEFAULT_STEP_FRACTION: f64 = 1e-3;

impl<T: Real> RenderConfig<T> {
    pub fn new(camera: Camera<T>, tfs: TransferFunctions<T>) -> Self {
        Self {
            camera,
            tfs,
            step: real(DEFAULT_STEP_FRACTION),
            shading: None,
            o_max: real(0.98),
            background: [T::zero(), T::zero(), T::zero(), T::one()],
            opacity_correction: false,
            workers: None,
        }
    }

    fn validate(&self) -> Result<(), RenderError> {
        if self.step <= T::zero() {
            return Err(RenderError::Config("step must be positive".into()));
        }
        if self.o_max <= T::zero() || self.o_max > T::one() {
            return Err(RenderError::Config("o_max must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// sample sources
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
#[error("{message}")]
pub struct SourceError {
    pub message: String,
}

impl SourceError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Anything the ray marcher can sample: values everywhere inside `bounds`,
/// gradients on demand when shading. Implementations must be safe for
/// concurrent queries.
pub trait SampleSource<T: Real>: Sync {
    fn bounds(&self) -> DomainBounds<T>;
    fn value(&self, p: [T; 3]) -> Result<T, SourceError>;
    fn gradient(&self, p: [T; 3]) -> Result<[T; 3], SourceError>;
}

/// Absorbs marching round-off: positions within a relative epsilon of the
/// bounds are snapped inside, anything farther out is a real domain error.
fn snap_into<T: Real>(bounds: &DomainBounds<T>, p: [T; 3]) -> Option<[T; 3]> {
    let mut q = p;
    for d in 0..3 {
        let eps = bounds.extent(d) * real(1e-9);
        if q[d] < bounds.min[d] {
            if bounds.min[d] - q[d] > eps {
                return None;
            }
            q[d] = bounds.min[d];
        } else if q[d] > bounds.max[d] {
            if q[d] - bounds.max[d] > eps {
                return None;
            }
            q[d] = bounds.max[d];
        }
    }
    Some(q)
}

/// Encoded-model source: normalizes physical positions into the parameter
/// cube, and converts the parameter-space gradient to physical space by
/// dividing each component by the domain extent. The extent reciprocals are
/// cached so the per-sample path multiplies instead of divides.
pub struct MfaSource<'a, T> {
    model: &'a MfaModel<T>,
    inv_extent: [T; 3],
}

impl<'a, T: Real> MfaSource<'a, T> {
    pub fn new(model: &'a MfaModel<T>) -> Self {
        let b = model.domain_bounds();
        Self {
            model,
            inv_extent: [
                T::one() / b.extent(0),
                T::one() / b.extent(1),
                T::one() / b.extent(2),
            ],
        }
    }

    #[inline]
    fn param(&self, p: [T; 3]) -> Result<ParamPoint<T>, SourceError> {
        let b = self.model.domain_bounds();
        let p = snap_into(b, p)
            .ok_or_else(|| SourceError::new("position outside model domain"))?;
        // the reciprocal multiply can land one ulp outside the cube
        let clamp01 = |x: T| x.max(T::zero()).min(T::one());
        Ok(ParamPoint::new(
            clamp01((p[0] - b.min[0]) * self.inv_extent[0]),
            clamp01((p[1] - b.min[1]) * self.inv_extent[1]),
            clamp01((p[2] - b.min[2]) * self.inv_extent[2]),
        ))
    }
}

impl<T: Real> SampleSource<T> for MfaSource<'_, T> {
    fn bounds(&self) -> DomainBounds<T> {
        *self.model.domain_bounds()
    }

    fn value(&self, p: [T; 3]) -> Result<T, SourceError> {
        let q = self.param(p)?;
        self.model
            .eval_value(q)
            .map_err(|e| SourceError::new(e.to_string()))
    }

    fn gradient(&self, p: [T; 3]) -> Result<[T; 3], SourceError> {
        let q = self.param(p)?;
        let g = self
            .model
            .eval_gradient(q)
            .map_err(|e| SourceError::new(e.to_string()))?;
        Ok([
            g[0] * self.inv_extent[0],
            g[1] * self.inv_extent[1],
            g[2] * self.inv_extent[2],
        ])
    }
}

/// Baseline-filter source over a discrete grid.
pub struct FilterSource<'a, T> {
    grid: &'a ScalarGrid<T>,
    kind: FilterKind,
}

impl<'a, T: Real> FilterSource<'a, T> {
    pub fn new(grid: &'a ScalarGrid<T>, kind: FilterKind) -> Self {
        Self { grid, kind }
    }
}

impl<T: Real> SampleSource<T> for FilterSource<'_, T> {
    fn bounds(&self) -> DomainBounds<T> {
        self.grid.bounds
    }

    fn value(&self, p: [T; 3]) -> Result<T, SourceError> {
        let p = snap_into(&self.grid.bounds, p)
            .ok_or_else(|| SourceError::new("position outside grid bounds"))?;
        filter_value(self.kind, self.grid, p).map_err(|e| SourceError::new(e.to_string()))
    }

    fn gradient(&self, p: [T; 3]) -> Result<[T; 3], SourceError> {
        let p = snap_into(&self.grid.bounds, p)
            .ok_or_else(|| SourceError::new("position outside grid bounds"))?;
        filter_gradient(self.kind, self.grid, p).map_err(|e| SourceError::new(e.to_string()))
    }
}

/// Analytic ground-truth source.
pub struct AnalyticSource<'a, T> {
    field: &'a FieldSpec<T>,
    bounds: DomainBounds<T>,
}

impl<'a, T: Real> AnalyticSource<'a, T> {
    pub fn new(field: &'a FieldSpec<T>, bounds: DomainBounds<T>) -> Self {
        Self { field, bounds }
    }
}

impl<T: Real> SampleSource<T> for AnalyticSource<'_, T> {
    fn bounds(&self) -> DomainBounds<T> {
        self.bounds
    }

    fn value(&self, p: [T; 3]) -> Result<T, SourceError> {
        Ok(self.field.value(p))
    }

    fn gradient(&self, p: [T; 3]) -> Result<[T; 3], SourceError> {
        Ok(self.field.gradient(p))
    }
}

/// Values from one source, gradients from another; the gradient-isolation
/// protocol for shading studies. Both must share bounds.
pub struct HybridSource<A, B> {
    values: A,
    gradients: B,
}

impl<A, B> HybridSource<A, B> {
    pub fn new(values: A, gradients: B) -> Self {
        Self { values, gradients }
    }
}

impl<T: Real, A: SampleSource<T>, B: SampleSource<T>> SampleSource<T> for HybridSource<A, B> {
    fn bounds(&self) -> DomainBounds<T> {
        self.values.bounds()
    }

    fn value(&self, p: [T; 3]) -> Result<T, SourceError> {
        self.values.value(p)
    }

    fn gradient(&self, p: [T; 3]) -> Result<[T; 3], SourceError> {
        self.gradients.gradient(p)
    }
}

// ---------------------------------------------------------------------------
// compositing and shading
// ---------------------------------------------------------------------------

/// One front-to-back compositing step:
/// `C += (1 - A) * a * C_s ; A += (1 - A) * a`.
#[inline]
pub fn composite_step<T: Real>(acc: &mut ([T; 3], T), sample_rgb: [T; 3], sample_a: T) {
    let trans = (T::one() - acc.1) * sample_a;
    for c in 0..3 {
        acc.0[c] += trans * sample_rgb[c];
    }
    acc.1 += trans;
}

/// Phong shading against a single directional light. The surface normal is
/// the negated normalized gradient; a zero gradient falls back to the
/// ambient term alone.
pub fn shade<T: Real>(
    sample_rgb: [T; 3],
    gradient: [T; 3],
    view_dir: [T; 3],
    sh: &Shading<T>,
) -> [T; 3] {
    let ambient = [
        sh.ambient[0] * sample_rgb[0],
        sh.ambient[1] * sample_rgb[1],
        sh.ambient[2] * sample_rgb[2],
    ];
    let g2 = dot(gradient, gradient);
    if g2 == T::zero() {
        return ambient.clamp01();
    }
    let n = scale(gradient, -T::one() / g2.sqrt());
    let l = sh.light_dir;
    let n_dot_l = dot(n, l).max(T::zero());
    // reflection of the light about the normal, toward the viewer
    let r = sub(scale(n, real::<T>(2.0) * dot(n, l)), l);
    let v = scale(view_dir, -T::one());
    let spec = dot(r, v).max(T::zero()).powf(sh.shininess);
    let mut out = [T::zero(); 3];
    for c in 0..3 {
        out[c] = ambient[c] + sh.diffuse[c] * n_dot_l * sample_rgb[c] + sh.specular[c] * spec;
    }
    out.clamp01()
}

// ---------------------------------------------------------------------------
// the render loop
// ---------------------------------------------------------------------------

fn quantize<T: Real>(c: T) -> u8 {
    let v = c.max(T::zero()).min(T::one()) * real(255.0);
    v.to_f64().unwrap().round() as u8
}

fn trace_pixel<T: Real, S: SampleSource<T>>(
    source: &S,
    cfg: &RenderConfig<T>,
    bounds: &DomainBounds<T>,
    step_world: T,
    correction_ref: T,
    px: usize,
    py: usize,
) -> Result<[u8; 4], RenderError> {
    let ray = cfg.camera.generate_ray(px, py);
    let bg = cfg.background;
    let mut acc = ([T::zero(); 3], T::zero());

    if let Some((t_in, t_out)) = ray_box_clip(&ray, bounds) {
        let t_start = t_in.max(T::zero());
        let mut k = 0usize;
        loop {
            let t = t_start + step_world * real::<T>(k as f64);
            if t > t_out {
                break;
            }
            let pos = add(ray.origin, scale(ray.dir, t));
            let v = source.value(pos).map_err(|e| RenderError::Source {
                px,
                py,
                t: t.to_f64().unwrap_or(f64::NAN),
                message: e.message,
            })?;
            let mut a = cfg.tfs.opacity.apply(v);
            if cfg.opacity_correction {
                let ratio = step_world / correction_ref;
                a = T::one() - (T::one() - a).powf(ratio);
            }
            if a > T::zero() {
                let mut rgb = cfg.tfs.color.apply(v);
                if let Some(sh) = &cfg.shading {
                    let g = source.gradient(pos).map_err(|e| RenderError::Source {
                        px,
                        py,
                        t: t.to_f64().unwrap_or(f64::NAN),
                        message: e.message,
                    })?;
                    rgb = shade(rgb, g, ray.dir, sh);
                }
                composite_step(&mut acc, rgb, a);
                if acc.1 > cfg.o_max {
                    break;
                }
            }
            k += 1;
        }
    }

    // remaining transmittance shows the background
    let bg_rgb = [bg[0], bg[1], bg[2]];
    composite_step(&mut acc, bg_rgb, bg[3]);
    Ok([
        quantize(acc.0[0]),
        quantize(acc.0[1]),
        quantize(acc.0[2]),
        quantize(acc.1),
    ])
}

fn render_rows<T: Real, S: SampleSource<T>>(
    source: &S,
    cfg: &RenderConfig<T>,
) -> Result<ImageRgba, RenderError> {
    cfg.validate()?;
    let bounds = source.bounds();
    let step_world = cfg.step * bounds.diagonal();
    let correction_ref = real::<T>(DEFAULT_STEP_FRACTION) * bounds.diagonal();
    let (w, h) = (cfg.camera.width, cfg.camera.height);

    let rows: Vec<Result<Vec<u8>, RenderError>> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut row = Vec::with_capacity(w * 4);
            for px in 0..w {
                let rgba =
                    trace_pixel(source, cfg, &bounds, step_world, correction_ref, px, py)?;
                row.extend_from_slice(&rgba);
            }
            Ok(row)
        })
        .collect();

    let mut pixels = Vec::with_capacity(w * h * 4);
    for row in rows {
        pixels.extend_from_slice(&row?);
    }
    Ok(ImageRgba::from_pixels(w, h, pixels).expect("row assembly"))
}

/// Renders the source through the full pipeline. With `cfg.workers` set, a
/// dedicated pool of exactly that many threads is used; the image is
/// bit-identical either way.
pub fn render<T: Real, S: SampleSource<T>>(
    source: &S,
    cfg: &RenderConfig<T>,
) -> Result<ImageRgba, RenderError> {
    match cfg.workers {
        None => render_rows(source, cfg),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| RenderError::Config(format!("worker pool: {e}")))?;
            pool.install(|| render_rows(source, cfg))
        }
    }
}

/// Ground-truth render of an analytic field.
pub fn render_ground_truth<T: Real>(
    field: &FieldSpec<T>,
    bounds: DomainBounds<T>,
    cfg: &RenderConfig<T>,
) -> Result<ImageRgba, RenderError> {
    render(&AnalyticSource::new(field, bounds), cfg)
}

/// Render of an encoded model.
pub fn render_mfa<T: Real>(
    model: &MfaModel<T>,
    cfg: &RenderConfig<T>,
) -> Result<ImageRgba, RenderError> {
    render(&MfaSource::new(model), cfg)
}

/// Render of a discrete grid through one of the baseline filters.
pub fn render_filter<T: Real>(
    grid: &ScalarGrid<T>,
    kind: FilterKind,
    cfg: &RenderConfig<T>,
) -> Result<ImageRgba, RenderError> {
    render(&FilterSource::new(grid, kind), cfg)
}

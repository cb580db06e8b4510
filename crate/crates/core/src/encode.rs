//! Fitting discrete volumes into B-spline models.
//!
//! Structured grids are fit dimension by dimension: one banded least-squares
//! curve fit per grid line along u, then along v over the intermediate
//! control values, then along w. Scattered points go through a single global
//! normal-equations solve over the tensor-product basis. The adaptive loop
//! refits after bisecting every knot span whose relative error exceeds the
//! tolerance, until the tolerance, the round cap, or the control-count cap
//! is reached.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{DomainBounds, KnotVector, MfaModel, ModelError, ParamPoint};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid encode config: {0}")]
    Config(String),
    #[error("dimension {dim}: empty knot span [{lo}, {hi}) leaves control {ctrl_index} without samples")]
    EmptySpan {
        dim: usize,
        ctrl_index: usize,
        lo: f64,
        hi: f64,
    },
    #[error("{count} control points have no sample influence; first dead indices: {preview:?}")]
    DeadControls {
        count: usize,
        preview: Vec<[usize; 3]>,
    },
    #[error("scattered system with {unknowns} unknowns exceeds the dense-solve limit {limit}")]
    TooLarge { unknowns: usize, limit: usize },
    #[error("normal equations lost positive definiteness")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl FitError {
    fn with_dim(self, d: usize) -> Self {
        match self {
            FitError::EmptySpan {
                ctrl_index, lo, hi, ..
            } => FitError::EmptySpan {
                dim: d,
                ctrl_index,
                lo,
                hi,
            },
            other => other,
        }
    }
}

#[derive(Debug, Error)]
pub enum VolumeIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Inconsistent { path: PathBuf, message: String },
}

/// Discrete structured volume: `values[x + dims[0]*(y + dims[1]*z)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid<T> {
    pub dims: [usize; 3],
    pub bounds: DomainBounds<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarGrid<T> {
    pub fn new(
        dims: [usize; 3],
        bounds: DomainBounds<T>,
        values: Vec<T>,
    ) -> Result<Self, FitError> {
        if dims.iter().any(|&d| d < 2) {
            return Err(FitError::Config(format!(
                "grid dims {dims:?} must be at least 2 per axis"
            )));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(FitError::Config(format!(
                "grid has {} values, dims {dims:?} require {}",
                values.len(),
                dims[0] * dims[1] * dims[2]
            )));
        }
        for d in 0..3 {
            if !matches!(
                bounds.min[d].partial_cmp(&bounds.max[d]),
                Some(std::cmp::Ordering::Less)
            ) {
                return Err(FitError::Config(format!(
                    "grid bounds degenerate along axis {d}"
                )));
            }
        }
        Ok(Self {
            dims,
            bounds,
            values,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> T {
        self.values[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    pub fn value_range(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &self.values {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    /// Physical position of the `(x, y, z)` lattice node.
    pub fn node_position(&self, idx: [usize; 3]) -> [T; 3] {
        let mut p = [T::zero(); 3];
        for d in 0..3 {
            let t = real::<T>(idx[d] as f64 / (self.dims[d] - 1) as f64);
            p[d] = self.bounds.min[d] + t * self.bounds.extent(d);
        }
        p
    }
}

/// Scattered samples: positions with matching values.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<[T; 3]>,
    pub values: Vec<T>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<[T; 3]>, values: Vec<T>) -> Result<Self, FitError> {
        if points.is_empty() || points.len() != values.len() {
            return Err(FitError::Config(format!(
                "point cloud needs matching nonempty lists, got {} points and {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(Self { points, values })
    }

    pub fn bounding_box(&self) -> DomainBounds<T> {
        let mut min = [T::infinity(); 3];
        let mut max = [T::neg_infinity(); 3];
        for p in &self.points {
            for d in 0..3 {
                if p[d] < min[d] {
                    min[d] = p[d];
                }
                if p[d] > max[d] {
                    max[d] = p[d];
                }
            }
        }
        DomainBounds::new(min, max)
    }
}

/// Encoder settings; `max_ctrl` and `max_rounds` only matter when `adaptive`.
#[derive(Debug, Clone)]
pub struct EncodeConfig<T> {
    pub degree: [usize; 3],
    pub nctrl: [usize; 3],
    pub adaptive: bool,
    pub e_max: T,
    pub max_rounds: usize,
    pub max_ctrl: [usize; 3],
}

impl<T: Real> EncodeConfig<T> {
    pub fn validate(&self) -> Result<(), FitError> {
        for d in 0..3 {
            if self.degree[d] < 1 {
                return Err(FitError::Config(format!(
                    "degree along axis {d} must be at least 1"
                )));
            }
            if self.nctrl[d] < self.degree[d] + 1 {
                return Err(FitError::Config(format!(
                    "nctrl {} along axis {d} below degree+1 = {}",
                    self.nctrl[d],
                    self.degree[d] + 1
                )));
            }
            if self.adaptive && self.max_ctrl[d] < self.nctrl[d] {
                return Err(FitError::Config(format!(
                    "max_ctrl {} along axis {d} below initial nctrl {}",
                    self.max_ctrl[d], self.nctrl[d]
                )));
            }
        }
        if self.e_max <= T::zero() || self.e_max > T::one() {
            return Err(FitError::Config(format!(
                "e_max {} must lie in (0, 1]",
                self.e_max
            )));
        }
        Ok(())
    }
}

/// Uniform parameters per grid dimension: `0, 1/(n-1), ..., 1`.
pub fn parameterize_grid<T: Real>(g: &ScalarGrid<T>) -> [Vec<T>; 3] {
    let mut out: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for d in 0..3 {
        let n = g.dims[d];
        out[d] = (0..n)
            .map(|i| real::<T>(i as f64 / (n - 1) as f64))
            .collect();
    }
    out
}

/// Clamped knot vector for `nctrl` controls over the given parameters.
///
/// Interior knots come from the parameter-averaging rule: the parameters are
/// first resampled to `nctrl` virtual parameters (linear interpolation in
/// index space, so it reduces to the classic rule when `nctrl` equals the
/// sample count), then interior knot `j` is the mean of the `p` virtual
/// parameters starting at index `j`.
pub fn initial_knots<T: Real>(
    params: &[T],
    degree: usize,
    nctrl: usize,
) -> Result<KnotVector<T>, FitError> {
    if nctrl < degree + 1 {
        return Err(FitError::Config(format!(
            "nctrl {nctrl} below degree+1 = {}",
            degree + 1
        )));
    }
    if params.len() < 2 {
        return Err(FitError::Config(
            "need at least two parameters to place knots".into(),
        ));
    }
    let m = params.len() - 1;
    let virt: Vec<T> = (0..nctrl)
        .map(|i| {
            let pos = i as f64 * m as f64 / (nctrl - 1) as f64;
            let base = (pos.floor() as usize).min(m - 1);
            let frac = real::<T>(pos - base as f64);
            params[base] + frac * (params[base + 1] - params[base])
        })
        .collect();

    let interior = nctrl - degree - 1;
    let mut knots = vec![T::zero(); degree + 1];
    let pf = real::<T>(degree as f64);
    for j in 1..=interior {
        let mut s = T::zero();
        for t in &virt[j..j + degree] {
            s += *t;
        }
        knots.push(s / pf);
    }
    knots.extend(std::iter::repeat_n(T::one(), degree + 1));
    Ok(KnotVector::new(degree, knots)?)
}

const RIDGE: f64 = 1e-12;

fn cholesky_factor<T: Real>(mut a: Vec<T>, n: usize) -> Result<Vec<T>, FitError> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[j * n + k];
            d -= l * l;
        }
        if d <= T::zero() {
            return Err(FitError::Singular);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(a)
}

fn cholesky_apply<T: Real>(l: &[T], n: usize, mut b: Vec<T>) -> Vec<T> {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    b
}

/// Reusable 1D least-squares fitter for a fixed parameter sequence and knot
/// vector. Building it computes the collocation rows and the Cholesky factor
/// of the (ridged) normal matrix once; `solve` then handles one line of
/// values in O(samples + unknowns^2). The grid sweeps rely on this: every
/// line along one dimension shares the same factorization.
///
/// Endpoint samples at t = 0 and t = 1 pin the first and last control values
/// so the fitted curve reproduces the line ends exactly.
pub struct CurveFitter<T> {
    nctrl: usize,
    degree: usize,
    spans: Vec<usize>,
    bases: Vec<T>, // (degree+1) per sample
    pin_first: bool,
    pin_last: bool,
    unknowns: Vec<usize>,
    col_of: Vec<usize>,
    chol: Vec<T>,
}

impl<T: Real> CurveFitter<T> {
    pub fn new(params: &[T], kv: &KnotVector<T>) -> Result<Self, FitError> {
        let n = kv.num_ctrl();
        let p = kv.degree();
        let m = params.len();
        if m < n {
            return Err(FitError::Config(format!(
                "{m} samples cannot determine {n} control values"
            )));
        }

        let mut spans = Vec::with_capacity(m);
        let mut bases = Vec::with_capacity(m * (p + 1));
        let mut support = vec![0usize; n];
        for &t in params {
            let s = kv.find_span(t)?;
            let b = kv.basis_funs(s, t);
            for (j, &w) in b.iter().enumerate() {
                if w > T::zero() {
                    support[s - p + j] += 1;
                }
            }
            spans.push(s);
            bases.extend_from_slice(&b);
        }
        if let Some(dead) = support.iter().position(|&c| c == 0) {
            // name an empty span inside the dead basis's support
            let knots = kv.knots();
            let mut lo = knots[dead];
            let mut hi = knots[dead + p + 1];
            for s in dead..=dead + p {
                let empty = params.iter().all(|&t| !(t >= knots[s] && t < knots[s + 1]));
                if empty && knots[s + 1] > knots[s] {
                    lo = knots[s];
                    hi = knots[s + 1];
                    break;
                }
            }
            return Err(FitError::EmptySpan {
                dim: 0,
                ctrl_index: dead,
                lo: lo.to_f64().unwrap_or(f64::NAN),
                hi: hi.to_f64().unwrap_or(f64::NAN),
            });
        }

        let pin_first = params[0] == T::zero();
        let pin_last = *params.last().unwrap() == T::one() && n >= 2;
        let unknowns: Vec<usize> = (0..n)
            .filter(|&i| !(pin_first && i == 0 || pin_last && i == n - 1))
            .collect();

        let nun = unknowns.len();
        let mut col_of = vec![usize::MAX; n];
        for (c, &i) in unknowns.iter().enumerate() {
            col_of[i] = c;
        }
        let mut normal = vec![T::zero(); nun * nun];
        for (j, &s) in spans.iter().enumerate() {
            let row = &bases[j * (p + 1)..(j + 1) * (p + 1)];
            for a in 0..=p {
                let ca = col_of[s - p + a];
                if ca == usize::MAX {
                    continue;
                }
                for b in 0..=p {
                    let cb = col_of[s - p + b];
                    if cb == usize::MAX {
                        continue;
                    }
                    normal[ca * nun + cb] += row[a] * row[b];
                }
            }
        }
        let ridge = real::<T>(RIDGE);
        for c in 0..nun {
            normal[c * nun + c] += ridge;
        }
        let chol = cholesky_factor(normal, nun)?;

        Ok(Self {
            nctrl: n,
            degree: p,
            spans,
            bases,
            pin_first,
            pin_last,
            unknowns,
            col_of,
            chol,
        })
    }

    pub fn solve(&self, values: &[T]) -> Vec<T> {
        let n = self.nctrl;
        let p = self.degree;
        let nun = self.unknowns.len();
        debug_assert_eq!(values.len(), self.spans.len());

        let c_first = if self.pin_first { values[0] } else { T::zero() };
        let c_last = if self.pin_last {
            *values.last().unwrap()
        } else {
            T::zero()
        };

        let mut rhs = vec![T::zero(); nun];
        for (j, &s) in self.spans.iter().enumerate() {
            let row = &self.bases[j * (p + 1)..(j + 1) * (p + 1)];
            let mut target = values[j];
            for (a, &w) in row.iter().enumerate() {
                let i = s - p + a;
                if self.pin_first && i == 0 {
                    target -= w * c_first;
                } else if self.pin_last && i == n - 1 {
                    target -= w * c_last;
                }
            }
            for (a, &w) in row.iter().enumerate() {
                let c = self.col_of[s - p + a];
                if c != usize::MAX {
                    rhs[c] += w * target;
                }
            }
        }
        let x = cholesky_apply(&self.chol, nun, rhs);

        let mut ctrl = vec![T::zero(); n];
        if self.pin_first {
            ctrl[0] = c_first;
        }
        if self.pin_last {
            ctrl[n - 1] = c_last;
        }
        for (c, &i) in self.unknowns.iter().enumerate() {
            ctrl[i] = x[c];
        }
        ctrl
    }
}

/// One-shot 1D fit: least-squares control values for `(params[j], values[j])`
/// samples over the given knot vector.
pub fn fit_curve_ls<T: Real>(
    params: &[T],
    values: &[T],
    kv: &KnotVector<T>,
) -> Result<Vec<T>, FitError> {
    if params.len() != values.len() {
        return Err(FitError::Config(format!(
            "{} parameters vs {} values",
            params.len(),
            values.len()
        )));
    }
    Ok(CurveFitter::new(params, kv)?.solve(values))
}

/// Separable tensor-product fit with explicit knot vectors: curve fits along
/// u for every (v, w) line, then along v over the intermediate control
/// values, then along w. Lines are independent and solved on the rayon pool;
/// each line lands in its own output slots, so the result does not depend on
/// the worker count.
pub fn fit_grid_with_knots<T: Real>(
    g: &ScalarGrid<T>,
    kvs: [KnotVector<T>; 3],
) -> Result<MfaModel<T>, FitError> {
    let params = parameterize_grid(g);
    let [nx, ny, nz] = g.dims;
    let nu = kvs[0].num_ctrl();
    let nv = kvs[1].num_ctrl();
    let nw = kvs[2].num_ctrl();

    // stage 1: along u for every (y, z)
    let fit_u = CurveFitter::new(&params[0], &kvs[0]).map_err(|e| e.with_dim(0))?;
    let mut stage1 = vec![T::zero(); nu * ny * nz];
    {
        let lines: Vec<Vec<T>> = (0..ny * nz)
            .into_par_iter()
            .map(|lid| {
                let (y, z) = (lid % ny, lid / ny);
                let mut line = Vec::with_capacity(nx);
                for x in 0..nx {
                    line.push(g.at(x, y, z));
                }
                fit_u.solve(&line)
            })
            .collect();
        for (lid, ctrl) in lines.into_iter().enumerate() {
            let (y, z) = (lid % ny, lid / ny);
            for (i, c) in ctrl.into_iter().enumerate() {
                stage1[i + nu * (y + ny * z)] = c;
            }
        }
    }

    // stage 2: along v for every (i, z)
    let fit_v = CurveFitter::new(&params[1], &kvs[1]).map_err(|e| e.with_dim(1))?;
    let mut stage2 = vec![T::zero(); nu * nv * nz];
    {
        let lines: Vec<Vec<T>> = (0..nu * nz)
            .into_par_iter()
            .map(|lid| {
                let (i, z) = (lid % nu, lid / nu);
                let mut line = Vec::with_capacity(ny);
                for y in 0..ny {
                    line.push(stage1[i + nu * (y + ny * z)]);
                }
                fit_v.solve(&line)
            })
            .collect();
        for (lid, ctrl) in lines.into_iter().enumerate() {
            let (i, z) = (lid % nu, lid / nu);
            for (j, c) in ctrl.into_iter().enumerate() {
                stage2[i + nu * (j + nv * z)] = c;
            }
        }
    }

    // stage 3: along w for every (i, j)
    let fit_w = CurveFitter::new(&params[2], &kvs[2]).map_err(|e| e.with_dim(2))?;
    let mut ctrl = vec![T::zero(); nu * nv * nw];
    {
        let lines: Vec<Vec<T>> = (0..nu * nv)
            .into_par_iter()
            .map(|lid| {
                let (i, j) = (lid % nu, lid / nu);
                let mut line = Vec::with_capacity(nz);
                for z in 0..nz {
                    line.push(stage2[i + nu * (j + nv * z)]);
                }
                fit_w.solve(&line)
            })
            .collect();
        for (lid, col) in lines.into_iter().enumerate() {
            let (i, j) = (lid % nu, lid / nu);
            for (k, c) in col.into_iter().enumerate() {
                ctrl[i + nu * (j + nv * k)] = c;
            }
        }
    }

    Ok(MfaModel::new(kvs, ctrl, g.value_range(), g.bounds)?)
}

/// Separable tensor-product fit with knots placed from the config.
pub fn fit_grid_separable<T: Real>(
    g: &ScalarGrid<T>,
    cfg: &EncodeConfig<T>,
) -> Result<MfaModel<T>, FitError> {
    cfg.validate()?;
    let params = parameterize_grid(g);
    let kvs = [
        initial_knots(&params[0], cfg.degree[0], cfg.nctrl[0]).map_err(|e| e.with_dim(0))?,
        initial_knots(&params[1], cfg.degree[1], cfg.nctrl[1]).map_err(|e| e.with_dim(1))?,
        initial_knots(&params[2], cfg.degree[2], cfg.nctrl[2]).map_err(|e| e.with_dim(2))?,
    ];
    fit_grid_with_knots(g, kvs)
}

/// Unknown-count guard for the dense scattered solve; beyond this the O(n^3)
/// factorization stops being a desk-scale operation.
pub const SCATTERED_UNKNOWN_LIMIT: usize = 4096;

/// Single global least-squares fit of scattered samples over the
/// tensor-product basis (uniform interior knots). Positions are normalized
/// into the parameter cube by `bounds`; the normal equations carry the same
/// ridge as the 1D fits.
pub fn fit_scattered_global<T: Real>(
    pc: &PointCloud<T>,
    cfg: &EncodeConfig<T>,
    bounds: DomainBounds<T>,
) -> Result<MfaModel<T>, FitError> {
    cfg.validate()?;
    let kvs = [
        KnotVector::uniform(cfg.degree[0], cfg.nctrl[0])?,
        KnotVector::uniform(cfg.degree[1], cfg.nctrl[1])?,
        KnotVector::uniform(cfg.degree[2], cfg.nctrl[2])?,
    ];
    let [nu, nv, nw] = cfg.nctrl;
    let total = nu * nv * nw;
    if total > SCATTERED_UNKNOWN_LIMIT {
        return Err(FitError::TooLarge {
            unknowns: total,
            limit: SCATTERED_UNKNOWN_LIMIT,
        });
    }

    let mut normal = vec![T::zero(); total * total];
    let mut rhs = vec![T::zero(); total];
    let mut support = vec![0u32; total];
    let mut cols: Vec<usize> = Vec::new();
    let mut weights: Vec<T> = Vec::new();

    for (p, &v) in pc.points.iter().zip(&pc.values) {
        for d in 0..3 {
            if p[d] < bounds.min[d] || p[d] > bounds.max[d] {
                return Err(FitError::Config(format!(
                    "point ({}, {}, {}) outside fitting bounds along axis {d}",
                    p[0], p[1], p[2]
                )));
            }
        }
        let q = bounds.normalize(*p);
        let mut spans = [0usize; 3];
        let mut bases: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for d in 0..3 {
            spans[d] = kvs[d].find_span(q[d])?;
            bases[d] = kvs[d].basis_funs(spans[d], q[d]);
        }
        cols.clear();
        weights.clear();
        for (kk, &bw) in bases[2].iter().enumerate() {
            let k = spans[2] - cfg.degree[2] + kk;
            for (jj, &bv) in bases[1].iter().enumerate() {
                let j = spans[1] - cfg.degree[1] + jj;
                for (ii, &bu) in bases[0].iter().enumerate() {
                    let i = spans[0] - cfg.degree[0] + ii;
                    let w = bu * bv * bw;
                    if w > T::zero() {
                        let c = i + nu * (j + nv * k);
                        cols.push(c);
                        weights.push(w);
                        support[c] += 1;
                    }
                }
            }
        }
        for (a, &ca) in cols.iter().enumerate() {
            rhs[ca] += weights[a] * v;
            for (b, &cb) in cols.iter().enumerate() {
                normal[ca * total + cb] += weights[a] * weights[b];
            }
        }
    }

    let dead: Vec<[usize; 3]> = (0..total)
        .filter(|&c| support[c] == 0)
        .map(|c| [c % nu, (c / nu) % nv, c / (nu * nv)])
        .collect();
    if !dead.is_empty() {
        let count = dead.len();
        let preview = dead.into_iter().take(8).collect();
        return Err(FitError::DeadControls { count, preview });
    }

    let ridge = real::<T>(RIDGE);
    for c in 0..total {
        normal[c * total + c] += ridge;
    }
    let chol = cholesky_factor(normal, total)?;
    let ctrl = cholesky_apply(&chol, total, rhs);

    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &v in &pc.values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    Ok(MfaModel::new(kvs, ctrl, (lo, hi), bounds)?)
}

/// Per-round statistics of the adaptive loop.
#[derive(Debug, Clone)]
pub struct RoundStats {
    pub round: usize,
    pub nctrl: [usize; 3],
    pub span_counts: [usize; 3],
    pub offending_spans: usize,
    pub splits_applied: usize,
    pub splits_skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct RefinementReport {
    pub e_max: f64,
    pub rounds: Vec<RoundStats>,
    pub converged: bool,
    pub caps_hit: bool,
    pub final_max_rel_error: f64,
}

impl std::fmt::Display for RefinementReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "adaptive refinement (e_max = {}):", self.e_max)?;
        for r in &self.rounds {
            writeln!(
                f,
                "  round {:>2}: nctrl {}x{}x{} spans {:?} offending {} splits {} (skipped {}) max_rel_err {:.6e}",
                r.round,
                r.nctrl[0],
                r.nctrl[1],
                r.nctrl[2],
                r.span_counts,
                r.offending_spans,
                r.splits_applied,
                r.splits_skipped,
                r.max_rel_error
            )?;
        }
        writeln!(
            f,
            "  status: {}{}, final max relative error {:.6e}",
            if self.converged {
                "tolerance met"
            } else {
                "tolerance NOT met"
            },
            if self.caps_hit { " (caps hit)" } else { "" },
            self.final_max_rel_error
        )
    }
}

/// Maximum relative error of a model against a grid over the grid's own
/// sample lattice (range-normalized, the adaptive loop's metric).
pub fn max_relative_error<T: Real>(g: &ScalarGrid<T>, m: &MfaModel<T>) -> f64 {
    let params = parameterize_grid(g);
    relative_errors(g, m, &params)
        .into_iter()
        .fold(0.0f64, f64::max)
}

/// Relative-error field of a model against its source grid, evaluated at the
/// grid's own parameter lattice. The denominator is the grid value range.
fn relative_errors<T: Real>(g: &ScalarGrid<T>, m: &MfaModel<T>, params: &[Vec<T>; 3]) -> Vec<f64> {
    let (lo, hi) = g.value_range();
    let range = (hi - lo).to_f64().unwrap_or(0.0);
    let denom = if range > 0.0 { range } else { 1.0 };
    let [nx, ny, _nz] = g.dims;
    (0..g.values.len())
        .into_par_iter()
        .map(|idx| {
            let x = idx % nx;
            let y = (idx / nx) % ny;
            let z = idx / (nx * ny);
            let q = ParamPoint::new(params[0][x], params[1][y], params[2][z]);
            let approx = m.eval_value(q).expect("lattice parameter in cube");
            (approx - g.values[idx]).to_f64().unwrap().abs() / denom
        })
        .collect()
}

/// Adaptive encode (requires `cfg.adaptive`): fit, score every input sample,
/// split each offending knot span at its midpoint, refit, until every span
/// is within `e_max` or the round/control caps stop the loop. Hitting a cap
/// is reported, not an error.
pub fn adaptive_encode<T: Real>(
    g: &ScalarGrid<T>,
    cfg: &EncodeConfig<T>,
) -> Result<(MfaModel<T>, RefinementReport), FitError> {
    cfg.validate()?;
    if !cfg.adaptive {
        return Err(FitError::Config(
            "adaptive_encode requires cfg.adaptive = true".into(),
        ));
    }
    let params = parameterize_grid(g);
    let mut kvs = [
        initial_knots(&params[0], cfg.degree[0], cfg.nctrl[0]).map_err(|e| e.with_dim(0))?,
        initial_knots(&params[1], cfg.degree[1], cfg.nctrl[1]).map_err(|e| e.with_dim(1))?,
        initial_knots(&params[2], cfg.degree[2], cfg.nctrl[2]).map_err(|e| e.with_dim(2))?,
    ];
    let e_max = cfg.e_max.to_f64().unwrap();

    let mut rounds = Vec::new();
    let mut caps_hit = false;
    let mut model = fit_grid_with_knots(g, kvs.clone())?;

    for round in 0..=cfg.max_rounds {
        let errors = relative_errors(g, &model, &params);
        let max_err = errors.iter().cloned().fold(0.0f64, f64::max);

        // per-dimension, per-span error maxima
        let mut offending: [Vec<(f64, usize)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut span_counts = [0usize; 3];
        let mut total_offending = 0usize;
        for d in 0..3 {
            let kv = &kvs[d];
            let nspans = kv.knots().len() - 1;
            let mut span_err = vec![0.0f64; nspans];
            let [nx, ny, _] = g.dims;
            for (idx, &e) in errors.iter().enumerate() {
                let coord = match d {
                    0 => idx % nx,
                    1 => (idx / nx) % ny,
                    _ => idx / (nx * ny),
                };
                let t = params[d][coord];
                let s = kv.find_span(t).expect("lattice parameter");
                if e > span_err[s] {
                    span_err[s] = e;
                }
            }
            span_counts[d] = kv.num_spans();
            for (s, &e) in span_err.iter().enumerate() {
                if kv.knots()[s + 1] > kv.knots()[s] && e > e_max {
                    offending[d].push((e, s));
                    total_offending += 1;
                }
            }
        }

        if total_offending == 0 || round == cfg.max_rounds {
            rounds.push(RoundStats {
                round,
                nctrl: model.nctrl(),
                span_counts,
                offending_spans: total_offending,
                splits_applied: 0,
                splits_skipped: 0,
                max_rel_error: max_err,
            });
            let converged = total_offending == 0;
            let report = RefinementReport {
                e_max,
                rounds,
                converged,
                caps_hit: caps_hit || !converged,
                final_max_rel_error: max_err,
            };
            return Ok((model, report));
        }

        // split offending spans at their midpoints, worst error first, while
        // the control budget lasts and both halves keep at least one sample
        let mut splits_applied = 0usize;
        let mut splits_skipped = 0usize;
        for d in 0..3 {
            if offending[d].is_empty() {
                continue;
            }
            offending[d].sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut new_knots: Vec<T> = Vec::new();
            let mut budget = cfg.max_ctrl[d].saturating_sub(kvs[d].num_ctrl());
            for &(_, s) in &offending[d] {
                if budget == 0 {
                    caps_hit = true;
                    break;
                }
                let lo = kvs[d].knots()[s];
                let hi = kvs[d].knots()[s + 1];
                let mid = (lo + hi) / real::<T>(2.0);
                let lo_ok = params[d].iter().any(|&t| t >= lo && t < mid);
                let hi_ok = params[d].iter().any(|&t| t >= mid && t < hi)
                    || (hi >= T::one() && params[d].iter().any(|&t| t >= mid));
                if !(lo_ok && hi_ok) || mid <= lo || mid >= hi {
                    splits_skipped += 1;
                    continue;
                }
                new_knots.push(mid);
                budget -= 1;
                splits_applied += 1;
            }
            if !new_knots.is_empty() {
                let mut knots = kvs[d].knots().to_vec();
                knots.extend(new_knots);
                knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
                kvs[d] = KnotVector::new(kvs[d].degree(), knots)?;
            }
        }

        rounds.push(RoundStats {
            round,
            nctrl: model.nctrl(),
            span_counts,
            offending_spans: total_offending,
            splits_applied,
            splits_skipped,
            max_rel_error: max_err,
        });

        if splits_applied == 0 {
            // every offending span is capped or unsplittable
            let report = RefinementReport {
                e_max,
                rounds,
                converged: false,
                caps_hit: true,
                final_max_rel_error: max_err,
            };
            return Ok((model, report));
        }

        model = fit_grid_with_knots(g, kvs.clone())?;
    }
    unreachable!("loop returns at the round cap")
}

// ---------------------------------------------------------------------------
// raw volume / point cloud files
// ---------------------------------------------------------------------------

fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut os = data_path.as_os_str().to_os_string();
    os.push(".meta");
    PathBuf::from(os)
}

/// Writes the header-less little-endian `f32` volume plus its plain-text
/// sidecar (`dims=...`, `bounds=...`, `order=row-major`).
pub fn write_raw_volume<T: Real>(g: &ScalarGrid<T>, data_path: &Path) -> Result<(), VolumeIoError> {
    let mut bytes = Vec::with_capacity(g.values.len() * 4);
    for &v in &g.values {
        bytes.extend_from_slice(&(v.to_f64().unwrap() as f32).to_le_bytes());
    }
    fs::write(data_path, bytes)?;
    let b = &g.bounds;
    let meta = format!(
        "dims={},{},{}\nbounds={},{},{},{},{},{}\norder=row-major\n",
        g.dims[0],
        g.dims[1],
        g.dims[2],
        b.min[0].to_f64().unwrap(),
        b.min[1].to_f64().unwrap(),
        b.min[2].to_f64().unwrap(),
        b.max[0].to_f64().unwrap(),
        b.max[1].to_f64().unwrap(),
        b.max[2].to_f64().unwrap(),
    );
    fs::write(sidecar_path(data_path), meta)?;
    Ok(())
}

pub fn read_raw_volume<T: Real>(data_path: &Path) -> Result<ScalarGrid<T>, VolumeIoError> {
    let meta_path = sidecar_path(data_path);
    let meta = fs::read_to_string(&meta_path)?;
    let mut dims: Option<[usize; 3]> = None;
    let mut bounds: Option<DomainBounds<T>> = None;
    for (lineno, raw) in meta.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| VolumeIoError::Parse {
            path: meta_path.clone(),
            line: lineno + 1,
            message: "expected key=value".into(),
        })?;
        match key.trim() {
            "dims" => {
                let parts: Vec<usize> = val
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e| VolumeIoError::Parse {
                        path: meta_path.clone(),
                        line: lineno + 1,
                        message: format!("bad dims: {e}"),
                    })?;
                if parts.len() != 3 {
                    return Err(VolumeIoError::Parse {
                        path: meta_path.clone(),
                        line: lineno + 1,
                        message: "dims needs three comma-separated integers".into(),
                    });
                }
                dims = Some([parts[0], parts[1], parts[2]]);
            }
            "bounds" => {
                let parts: Vec<f64> = val
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e| VolumeIoError::Parse {
                        path: meta_path.clone(),
                        line: lineno + 1,
                        message: format!("bad bounds: {e}"),
                    })?;
                if parts.len() != 6 {
                    return Err(VolumeIoError::Parse {
                        path: meta_path.clone(),
                        line: lineno + 1,
                        message: "bounds needs six comma-separated numbers".into(),
                    });
                }
                bounds = Some(DomainBounds::new(
                    [real(parts[0]), real(parts[1]), real(parts[2])],
                    [real(parts[3]), real(parts[4]), real(parts[5])],
                ));
            }
            "order" => {
                if val.trim() != "row-major" {
                    return Err(VolumeIoError::Parse {
                        path: meta_path.clone(),
                        line: lineno + 1,
                        message: format!("unsupported order '{}'", val.trim()),
                    });
                }
            }
            other => {
                return Err(VolumeIoError::Parse {
                    path: meta_path.clone(),
                    line: lineno + 1,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    let dims = dims.ok_or_else(|| VolumeIoError::Inconsistent {
        path: meta_path.clone(),
        message: "missing dims".into(),
    })?;
    let bounds = bounds.ok_or_else(|| VolumeIoError::Inconsistent {
        path: meta_path.clone(),
        message: "missing bounds".into(),
    })?;

    let bytes = fs::read(data_path)?;
    let expected = dims[0] * dims[1] * dims[2] * 4;
    if bytes.len() != expected {
        return Err(VolumeIoError::Inconsistent {
            path: data_path.to_path_buf(),
            message: format!("{} bytes on disk, dims require {expected}", bytes.len()),
        });
    }
    let values: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| real::<T>(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    ScalarGrid::new(dims, bounds, values).map_err(|e| VolumeIoError::Inconsistent {
        path: data_path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Plain-text point cloud: one `x y z value` line per sample.
pub fn write_point_cloud<T: Real>(pc: &PointCloud<T>, path: &Path) -> Result<(), VolumeIoError> {
    let mut out = String::new();
    for (p, v) in pc.points.iter().zip(&pc.values) {
        out.push_str(&format!(
            "{} {} {} {}\n",
            p[0].to_f64().unwrap(),
            p[1].to_f64().unwrap(),
            p[2].to_f64().unwrap(),
            v.to_f64().unwrap()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_point_cloud<T: Real>(path: &Path) -> Result<PointCloud<T>, VolumeIoError> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| VolumeIoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("bad number: {e}"),
            })?;
        if parts.len() != 4 {
            return Err(VolumeIoError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected 'x y z value', got {} fields", parts.len()),
            });
        }
        points.push([real(parts[0]), real(parts[1]), real(parts[2])]);
        values.push(real(parts[3]));
    }
    PointCloud::new(points, values).map_err(|e| VolumeIoError::Inconsistent {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

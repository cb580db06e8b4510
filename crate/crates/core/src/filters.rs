//! Classical local reconstruction filters over a [`ScalarGrid`]: trilinear,
//! tricubic, and Catmull-Rom, each with value and gradient queries.
//!
//! The tricubic filter is the per-cell 64-coefficient construction: corner
//! values, first derivatives, and cross-derivatives (estimated by
//! second-order central differences, one-sided at the grid edges) are mapped
//! to the monomial coefficients of a C1 cell polynomial on every query.
//! Catmull-Rom is the classic separable 4-tap kernel. In the interior the
//! two produce the same polynomial; they differ near the boundary, where
//! Catmull-Rom clamps stencil indices (replicating edge samples) while
//! tricubic switches to one-sided difference estimates. No filter
//! extrapolates: queries outside the grid bounds are errors.

use thiserror::Error;

use crate::encode::ScalarGrid;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Trilinear,
    Tricubic,
    CatmullRom,
}

impl FilterKind {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Trilinear => "trilinear",
            FilterKind::Tricubic => "tricubic",
            FilterKind::CatmullRom => "catmull-rom",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "trilinear" => Ok(FilterKind::Trilinear),
            "tricubic" => Ok(FilterKind::Tricubic),
            "catmull-rom" | "catmullrom" | "cr" => Ok(FilterKind::CatmullRom),
            other => Err(format!(
                "unknown filter '{other}' (expected trilinear, tricubic, or catmull-rom)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("point component {value} outside grid bounds [{min}, {max}] on axis {dim}")]
    OutOfBounds {
        dim: usize,
        value: f64,
        min: f64,
        max: f64,
    },
}

/// Cell index and local coordinates of a physical point; the point must be
/// inside the grid bounds.
fn locate<T: Real>(g: &ScalarGrid<T>, p: [T; 3]) -> Result<([usize; 3], [T; 3]), FilterError> {
    let mut cell = [0usize; 3];
    let mut local = [T::zero(); 3];
    for d in 0..3 {
        if p[d] < g.bounds.min[d] || p[d] > g.bounds.max[d] {
            return Err(FilterError::OutOfBounds {
                dim: d,
                value: p[d].to_f64().unwrap_or(f64::NAN),
                min: g.bounds.min[d].to_f64().unwrap_or(f64::NAN),
                max: g.bounds.max[d].to_f64().unwrap_or(f64::NAN),
            });
        }
        let n = g.dims[d];
        let x = (p[d] - g.bounds.min[d]) / g.bounds.extent(d) * real::<T>((n - 1) as f64);
        let i = x
            .floor()
            .to_f64()
            .map(|v| v as usize)
            .unwrap_or(0)
            .min(n - 2);
        cell[d] = i;
        local[d] = x - real::<T>(i as f64);
    }
    Ok((cell, local))
}

/// Grid spacing along one axis in physical units.
fn spacing<T: Real>(g: &ScalarGrid<T>, d: usize) -> T {
    g.bounds.extent(d) / real::<T>((g.dims[d] - 1) as f64)
}

/// Standard 8-corner interpolation; exact at grid nodes and bounded by the
/// corner values (convex combination).
pub fn trilinear_value<T: Real>(g: &ScalarGrid<T>, p: [T; 3]) -> Result<T, FilterError> {
    let (c, t) = locate(g, p)?;
    let mut acc = T::zero();
    for dz in 0..2 {
        let wz = if dz == 0 { T::one() - t[2] } else { t[2] };
        for dy in 0..2 {
            let wy = if dy == 0 { T::one() - t[1] } else { t[1] };
            for dx in 0..2 {
                let wx = if dx == 0 { T::one() - t[0] } else { t[0] };
                acc += wx * wy * wz * g.at(c[0] + dx, c[1] + dy, c[2] + dz);
            }
        }
    }
    Ok(acc)
}

/// Central-difference gradient at a grid node (one-sided at the edges),
/// already scaled to physical units.
fn node_gradient<T: Real>(g: &ScalarGrid<T>, x: usize, y: usize, z: usize) -> [T; 3] {
    let idx = [x, y, z];
    let mut grad = [T::zero(); 3];
    let two = real::<T>(2.0);
    for d in 0..3 {
        let n = g.dims[d];
        let h = spacing(g, d);
        let fetch = |i: usize| -> T {
            let mut q = idx;
            q[d] = i;
            g.at(q[0], q[1], q[2])
        };
        grad[d] = if idx[d] == 0 {
            (fetch(1) - fetch(0)) / h
        } else if idx[d] == n - 1 {
            (fetch(n - 1) - fetch(n - 2)) / h
        } else {
            (fetch(idx[d] + 1) - fetch(idx[d] - 1)) / (two * h)
        };
    }
    grad
}

fn trilinear_gradient<T: Real>(g: &ScalarGrid<T>, p: [T; 3]) -> Result<[T; 3], FilterError> {
    let (c, t) = locate(g, p)?;
    let mut acc = [T::zero(); 3];
    for dz in 0..2 {
        let wz = if dz == 0 { T::one() - t[2] } else { t[2] };
        for dy in 0..2 {
            let wy = if dy == 0 { T::one() - t[1] } else { t[1] };
            for dx in 0..2 {
                let wx = if dx == 0 { T::one() - t[0] } else { t[0] };
                let ng = node_gradient(g, c[0] + dx, c[1] + dy, c[2] + dz);
                let w = wx * wy * wz;
                for d in 0..3 {
                    acc[d] += w * ng[d];
                }
            }
        }
    }
    Ok(acc)
}

/// 4-tap stencil weights for one axis: `kernel(t)[s]` weights node `i-1+s`
/// of the cell `[i, i+1]`, in index units. `derivative` selects d/dt.
fn cubic_weights<T: Real>(kind: FilterKind, n: usize, cell: usize, t: T, derivative: bool) -> [T; 4] {
    let half = real::<T>(0.5);
    let (c1, c2, c3) = (real::<T>(1.0), real::<T>(2.0), real::<T>(3.0));
    let (c4, c5) = (real::<T>(4.0), real::<T>(5.0));
    let t2 = t * t;
    let t3 = t2 * t;
    match kind {
        FilterKind::CatmullRom => {
            if derivative {
                [
                    (-c3 * t2 + c4 * t - c1) * half,
                    (real::<T>(9.0) * t2 - real::<T>(10.0) * t) * half,
                    (-real::<T>(9.0) * t2 + real::<T>(8.0) * t + c1) * half,
                    (c3 * t2 - c2 * t) * half,
                ]
            } else {
                [
                    (-t3 + c2 * t2 - t) * half,
                    (c3 * t3 - c5 * t2 + c2) * half,
                    (-c3 * t3 + c4 * t2 + t) * half,
                    (t3 - t2) * half,
                ]
            }
        }
        FilterKind::Tricubic => {
            // Hermite basis with slope rows folded in; the slope estimates
            // depend on whether the cell touches the grid edge.
            let (h00, h10, h01, h11) = if derivative {
                (
                    real::<T>(6.0) * t2 - real::<T>(6.0) * t,
                    c3 * t2 - c4 * t + c1,
                    -real::<T>(6.0) * t2 + real::<T>(6.0) * t,
                    c3 * t2 - c2 * t,
                )
            } else {
                (
                    c2 * t3 - c3 * t2 + c1,
                    t3 - c2 * t2 + t,
                    -c2 * t3 + c3 * t2,
                    t3 - t2,
                )
            };
            let mut w = [T::zero(); 4];
            w[1] += h00;
            w[2] += h01;
            if n == 2 {
                // single cell: linear slopes at both ends
                // m = f[2] - f[1] at both nodes
                w[1] = w[1] - h10 - h11;
                w[2] = w[2] + h10 + h11;
                return w;
            }
            // slope at the left node of the cell
            if cell == 0 {
                // one-sided: (-3 f0 + 4 f1 - f2) / 2 on global nodes 0,1,2
                // = stencil entries 1, 2, 3
                w[1] -= c3 * half * h10;
                w[2] += c4 * half * h10;
                w[3] -= half * h10;
            } else {
                w[0] -= half * h10;
                w[2] += half * h10;
            }
            // slope at the right node of the cell
            if cell + 2 == n {
                // one-sided: (3 f_{n-1} - 4 f_{n-2} + f_{n-3}) / 2
                // = stencil entries 2, 1, 0
                w[2] += c3 * half * h11;
                w[1] -= c4 * half * h11;
                w[0] += half * h11;
            } else {
                w[1] -= half * h11;
                w[3] += half * h11;
            }
            w
        }
        FilterKind::Trilinear => unreachable!("trilinear does not use the 4-tap path"),
    }
}

/// Clamped 4-point stencil indices for a cell along one axis.
fn stencil_indices(n: usize, cell: usize) -> [usize; 4] {
    [
        cell.saturating_sub(1),
        cell,
        (cell + 1).min(n - 1),
        (cell + 2).min(n - 1),
    ]
}

/// Separable 4-tap evaluation; `deriv_axis` applies the derivative kernel
/// along that axis (result still in index units along it).
fn cubic_eval<T: Real>(
    g: &ScalarGrid<T>,
    kind: FilterKind,
    cell: [usize; 3],
    t: [T; 3],
    deriv_axis: Option<usize>,
) -> T {
    let wx = cubic_weights(kind, g.dims[0], cell[0], t[0], deriv_axis == Some(0));
    let wy = cubic_weights(kind, g.dims[1], cell[1], t[1], deriv_axis == Some(1));
    let wz = cubic_weights(kind, g.dims[2], cell[2], t[2], deriv_axis == Some(2));
    let sx = stencil_indices(g.dims[0], cell[0]);
    let sy = stencil_indices(g.dims[1], cell[1]);
    let sz = stencil_indices(g.dims[2], cell[2]);
    let mut acc = T::zero();
    for (kz, &wkz) in wz.iter().enumerate() {
        for (ky, &wky) in wy.iter().enumerate() {
            let mut line = T::zero();
            for (kx, &wkx) in wx.iter().enumerate() {
                line += wkx * g.at(sx[kx], sy[ky], sz[kz]);
            }
            acc += wky * wkz * line;
        }
    }
    acc
}

/// Map from 1D Hermite cell data `(f0, f1, m0, m1)` to monomial
/// coefficients of the cell's cubic (slopes in index units).
const HERMITE_TO_MONOMIAL: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [-3.0, 3.0, -2.0, -1.0],
    [2.0, -2.0, 1.0, 1.0],
];

/// Up to three taps of a node-data functional along one axis.
#[derive(Clone, Copy)]
struct Taps<T> {
    idx: [usize; 3],
    w: [T; 3],
    len: usize,
}

/// The four 1D data functionals of a cell: value and slope at its two
/// nodes. Slopes are second-order central differences, one-sided at the
/// grid edges (plain differences when the axis has only two nodes).
fn cell_functionals<T: Real>(n: usize, cell: usize) -> [Taps<T>; 4] {
    let half = real::<T>(0.5);
    let value = |i: usize| Taps {
        idx: [i, 0, 0],
        w: [T::one(), T::zero(), T::zero()],
        len: 1,
    };
    let slope = |node: usize| -> Taps<T> {
        if n == 2 {
            Taps {
                idx: [0, 1, 0],
                w: [-T::one(), T::one(), T::zero()],
                len: 2,
            }
        } else if node == 0 {
            Taps {
                idx: [0, 1, 2],
                w: [real(-1.5), real(2.0), real(-0.5)],
                len: 3,
            }
        } else if node == n - 1 {
            Taps {
                idx: [n - 3, n - 2, n - 1],
                w: [half, real(-2.0), real(1.5)],
                len: 3,
            }
        } else {
            Taps {
                idx: [node - 1, node + 1, 0],
                w: [-half, half, T::zero()],
                len: 2,
            }
        }
    };
    [value(cell), value(cell + 1), slope(cell), slope(cell + 1)]
}

/// Monomial coefficients `a[i + 4j + 16k]` of the tricubic polynomial on
/// one cell, built the Lekien-Marsden way: gather the 64 corner data
/// (values, first derivatives, and cross-derivatives estimated by nested
/// finite differences), then map them to coefficients. Recomputed on every
/// query; nothing is cached.
fn tricubic_coefficients<T: Real>(g: &ScalarGrid<T>, cell: [usize; 3]) -> [T; 64] {
    let fx = cell_functionals::<T>(g.dims[0], cell[0]);
    let fy = cell_functionals::<T>(g.dims[1], cell[1]);
    let fz = cell_functionals::<T>(g.dims[2], cell[2]);

    // corner-data tensor: value/derivative selector per axis
    let mut data = [T::zero(); 64];
    for (tz, gz) in fz.iter().enumerate() {
        for (ty, gy) in fy.iter().enumerate() {
            for (tx, gx) in fx.iter().enumerate() {
                let mut acc = T::zero();
                for c in 0..gz.len {
                    for b in 0..gy.len {
                        for a in 0..gx.len {
                            acc += gx.w[a]
                                    * gy.w[b]
                                    * gz.w[c]
                                    * g.at(gx.idx[a], gy.idx[b], gz.idx[c]);
                        }
                    }
                }
                data[tx + 4 * (ty + 4 * tz)] = acc;
            }
        }
    }

    let mut m = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = real(HERMITE_TO_MONOMIAL[i][j]);
        }
    }
    // contract the data tensor with the Hermite map along each axis
    let mut pass1 = [T::zero(); 64];
    for k in 0..4 {
        for j in 0..4 {
            for i in 0..4 {
                let mut acc = T::zero();
                for r in 0..4 {
                    acc += m[i][r] * data[r + 4 * (j + 4 * k)];
                }
                pass1[i + 4 * (j + 4 * k)] = acc;
            }
        }
    }
    let mut pass2 = [T::zero(); 64];
    for k in 0..4 {
        for j in 0..4 {
            for i in 0..4 {
                let mut acc = T::zero();
                for s in 0..4 {
                    acc += m[j][s] * pass1[i + 4 * (s + 4 * k)];
                }
                pass2[i + 4 * (j + 4 * k)] = acc;
            }
        }
    }
    let mut coeff = [T::zero(); 64];
    for k in 0..4 {
        for j in 0..4 {
            for i in 0..4 {
                let mut acc = T::zero();
                for t in 0..4 {
                    acc += m[k][t] * pass2[i + 4 * (j + 4 * t)];
                }
                coeff[i + 4 * (j + 4 * k)] = acc;
            }
        }
    }
    coeff
}

fn horner_3d<T: Real>(coeff: &[T; 64], t: [T; 3]) -> T {
    let mut val = T::zero();
    for k in (0..4).rev() {
        let mut vy = T::zero();
        for j in (0..4).rev() {
            let mut vx = T::zero();
            for i in (0..4).rev() {
                vx = vx * t[0] + coeff[i + 4 * (j + 4 * k)];
            }
            vy = vy * t[1] + vx;
        }
        val = val * t[2] + vy;
    }
    val
}

/// Partial derivative of the cell polynomial along one axis, in index units.
fn horner_3d_deriv<T: Real>(coeff: &[T; 64], t: [T; 3], axis: usize) -> T {
    let mut val = T::zero();
    let order = |d: usize, n: usize| -> T {
        if d == axis {
            real(n as f64)
        } else {
            T::one()
        }
    };
    let top = |d: usize| if d == axis { 3 } else { 4 };
    for k in (0..top(2)).rev() {
        let mut vy = T::zero();
        for j in (0..top(1)).rev() {
            let mut vx = T::zero();
            for i in (0..top(0)).rev() {
                let (ii, jj, kk) = (
                    if axis == 0 { i + 1 } else { i },
                    if axis == 1 { j + 1 } else { j },
                    if axis == 2 { k + 1 } else { k },
                );
                let scale = order(0, ii) * order(1, jj) * order(2, kk);
                vx = vx * t[0] + scale * coeff[ii + 4 * (jj + 4 * kk)];
            }
            vy = vy * t[1] + vx;
        }
        val = val * t[2] + vy;
    }
    val
}

/// C1 tricubic interpolation via the per-cell 64-coefficient construction
/// (values, derivatives, and cross-derivatives at the 8 cell corners from
/// finite differences, mapped to monomial coefficients). Exact at grid
/// nodes. The coefficients are rebuilt for every query, which is what makes
/// this filter expensive relative to an encoded model.
pub fn tricubic_value<T: Real>(g: &ScalarGrid<T>, p: [T; 3]) -> Result<T, FilterError> {
    let (cell, t) = locate(g, p)?;
    let coeff = tricubic_coefficients(g, cell);
    Ok(horner_3d(&coeff, t))
}

/// Separable Catmull-Rom interpolation; exact at grid nodes, with the
/// kernel's characteristic overshoot between them.
pub fn catmull_rom_value<T: Real>(g: &ScalarGrid<T>, p: [T; 3]) -> Result<T, FilterError> {
    let (cell, t) = locate(g, p)?;
    Ok(cubic_eval(g, FilterKind::CatmullRom, cell, t, None))
}

pub fn filter_value<T: Real>(
    kind: FilterKind,
    g: &ScalarGrid<T>,
    p: [T; 3],
) -> Result<T, FilterError> {
    match kind {
        FilterKind::Trilinear => trilinear_value(g, p),
        FilterKind::Tricubic => tricubic_value(g, p),
        FilterKind::CatmullRom => catmull_rom_value(g, p),
    }
}

/// Physical-space gradient of a filter. Trilinear interpolates the
/// central-difference node gradients; the cubic filters differentiate their
/// separable kernels analytically.
pub fn filter_gradient<T: Real>(
    kind: FilterKind,
    g: &ScalarGrid<T>,
    p: [T; 3],
) -> Result<[T; 3], FilterError> {
    match kind {
        FilterKind::Trilinear => trilinear_gradient(g, p),
        FilterKind::Tricubic => {
            let (cell, t) = locate(g, p)?;
            let coeff = tricubic_coefficients(g, cell);
            let mut grad = [T::zero(); 3];
            for d in 0..3 {
                grad[d] = horner_3d_deriv(&coeff, t, d) / spacing(g, d);
            }
            Ok(grad)
        }
        FilterKind::CatmullRom => {
            let (cell, t) = locate(g, p)?;
            let mut grad = [T::zero(); 3];
            for d in 0..3 {
                let v = cubic_eval(g, kind, cell, t, Some(d));
                grad[d] = v / spacing(g, d);
            }
            Ok(grad)
        }
    }
}

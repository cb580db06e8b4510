//! Tensor-product B-spline volume model: knot vectors, basis evaluation,
//! value and gradient queries, and the `MFAMOD1` file format.
//!
//! The model is a plain (non-rational) B-spline: all weights are fixed at 1.
//! Queries are defined on the parameter cube `[0,1]^3`; converting physical
//! coordinates into parameters is the caller's job (the render sources do it).
//! Models are immutable after construction, so any number of threads may
//! query one concurrently.

use std::io::{Read, Write};

use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {value} outside [0,1] along dimension {dim}")]
    ParamOutOfDomain { dim: usize, value: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("derivative order {order} unsupported (only order 1 is implemented)")]
    UnsupportedOrder { order: usize },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected \"MFAMOD1\"")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("truncated file at byte {offset}: {missing} more bytes expected for {what}")]
    Truncated {
        offset: usize,
        missing: usize,
        what: &'static str,
    },
    #[error("invariant violation at byte {offset}: {message}")]
    Invariant { offset: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Clamped knot vector for one spatial dimension.
///
/// `knots` is nondecreasing in `[0,1]`, the first `degree+1` entries are 0 and
/// the last `degree+1` are 1, so the spline interpolates its end control
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    degree: usize,
    knots: Vec<T>,
    // reciprocal Cox-de Boor denominators per span: they depend only on the
    // knots, so the query path runs division-free
    basis_inv: Vec<T>,
    // bucketed span lookup: O(1) span search with a short correction walk
    span_lut: Vec<u32>,
}

impl<T: Real> KnotVector<T> {
    pub fn new(degree: usize, knots: Vec<T>) -> Result<Self, ModelError> {
        let mut kv = Self {
            degree,
            knots,
            basis_inv: Vec::new(),
            span_lut: Vec::new(),
        };
        kv.validate()?;
        kv.build_inverse_denominators();
        kv.build_span_lut();
        Ok(kv)
    }

    /// Denominators in the basis recurrence are `knots[s+r+1] - knots[s+1-j+r]`
    /// for span `s`, level `j`, column `r` - independent of the parameter.
    /// One reciprocal per (span, j, r), with 0 standing in for degenerate
    /// (repeated-knot) differences to keep the 0/0 -> 0 convention.
    fn build_inverse_denominators(&mut self) {
        let p = self.degree;
        let tri = p * (p + 1) / 2;
        let first = p;
        let last = self.knots.len() - p - 2;
        let mut table = vec![T::zero(); (last - first + 1) * tri];
        for s in first..=last {
            let base = (s - first) * tri;
            for j in 1..=p {
                for r in 0..j {
                    let denom = self.knots[s + r + 1] - self.knots[s + 1 - j + r];
                    table[base + j * (j - 1) / 2 + r] = if denom == T::zero() {
                        T::zero()
                    } else {
                        T::one() / denom
                    };
                }
            }
        }
        self.basis_inv = table;
    }

    /// Each bucket stores the span of its left edge; `find_span` walks at
    /// most a few knots from there regardless of the knot distribution.
    fn build_span_lut(&mut self) {
        let p = self.degree;
        let first = p;
        let last = self.knots.len() - p - 2;
        let buckets = ((last + 1 - first) * 4).max(16);
        let mut lut = Vec::with_capacity(buckets);
        let mut s = first;
        for b in 0..buckets {
            let edge = real::<T>(b as f64 / buckets as f64);
            while s < last && self.knots[s + 1] <= edge {
                s += 1;
            }
            lut.push(s as u32);
        }
        self.span_lut = lut;
    }

    /// Uniform clamped knot vector with `nctrl` control slots.
    pub fn uniform(degree: usize, nctrl: usize) -> Result<Self, ModelError> {
        if nctrl < degree + 1 {
            return Err(ModelError::InvalidKnots(format!(
                "nctrl {nctrl} < degree+1 = {}",
                degree + 1
            )));
        }
        let interior = nctrl - degree - 1;
        let mut knots = vec![T::zero(); degree + 1];
        for j in 1..=interior {
            knots.push(real::<T>(j as f64 / (interior + 1) as f64));
        }
        knots.extend(std::iter::repeat_n(T::one(), degree + 1));
        Self::new(degree, knots)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let p = self.degree;
        if p > MAX_DEGREE {
            return Err(ModelError::InvalidKnots(format!(
                "degree {p} above the supported maximum {MAX_DEGREE}"
            )));
        }
        let n = self.knots.len();
        if n < 2 * (p + 1) {
            return Err(ModelError::InvalidKnots(format!(
                "need at least {} knots for degree {p}, got {n}",
                2 * (p + 1)
            )));
        }
        for w in self.knots.windows(2) {
            if w[1] < w[0] {
                return Err(ModelError::InvalidKnots(
                    "knots must be nondecreasing".into(),
                ));
            }
        }
        if self.knots[..=p].iter().any(|&k| k != T::zero()) {
            return Err(ModelError::InvalidKnots(format!(
                "first {} knots must be 0 (clamped)",
                p + 1
            )));
        }
        if self.knots[n - p - 1..].iter().any(|&k| k != T::one()) {
            return Err(ModelError::InvalidKnots(format!(
                "last {} knots must be 1 (clamped)",
                p + 1
            )));
        }
        // interior knots must be strictly inside (0, 1), or they would extend
        // the clamped end multiplicities
        for i in p + 1..n - p - 1 {
            if self.knots[i] <= T::zero() || self.knots[i] >= T::one() {
                return Err(ModelError::InvalidKnots(format!(
                    "interior knot {} must lie strictly inside (0, 1)",
                    self.knots[i]
                )));
            }
        }
        // interior multiplicity must not exceed the degree
        let mut run = 1usize;
        for i in p + 2..n - p - 1 {
            if self.knots[i] == self.knots[i - 1] {
                run += 1;
                if run > p {
                    return Err(ModelError::InvalidKnots(format!(
                        "interior knot {} repeated more than degree {p} times",
                        self.knots[i]
                    )));
                }
            } else {
                run = 1;
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of control values this knot vector supports.
    pub fn num_ctrl(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Number of nondegenerate spans (pieces of the piecewise polynomial).
    pub fn num_spans(&self) -> usize {
        self.knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .count()
    }

    /// Index of the span containing `u`: `knots[i] <= u < knots[i+1]`, with
    /// `u = 1` mapped to the last nondegenerate span so the whole closed
    /// domain is evaluable.
    pub fn find_span(&self, u: T) -> Result<usize, ModelError> {
        if u < T::zero() || u > T::one() {
            return Err(ModelError::ParamOutOfDomain {
                dim: 0,
                value: u.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.span_for(u))
    }

    /// Span lookup for a parameter already known to lie in `[0, 1]`.
    #[inline]
    fn span_for(&self, u: T) -> usize {
        let p = self.degree;
        let first = p;
        let last = self.knots.len() - p - 2;
        if u >= T::one() {
            return last;
        }
        let buckets = self.span_lut.len();
        let b = (u * real::<T>(buckets as f64))
            .to_f64()
            .map(|v| (v as usize).min(buckets - 1))
            .unwrap_or(0);
        let mut s = self.span_lut[b] as usize;
        // correction walks absorb bucket granularity and rounding
        while s < last && self.knots[s + 1] <= u {
            s += 1;
        }
        while s > first && self.knots[s] > u {
            s -= 1;
        }
        s
    }

    /// The `p+1` nonzero basis values `N_{span-p..=span, p}(u)`.
    ///
    /// Cox-de Boor triangular recurrence; outputs are nonnegative and sum
    /// to one.
    pub fn basis_funs(&self, span: usize, u: T) -> Vec<T> {
        let mut out = [T::zero(); MAX_ORDER];
        self.basis_into(span, u, self.degree, &mut out);
        out[..self.degree + 1].to_vec()
    }

    /// Nonzero basis values for degree `q <= self.degree` at the same span,
    /// written into a stack buffer; the query hot path allocates nothing and
    /// divides nothing (the denominators are precomputed reciprocals). The
    /// degree-1 and degree-2 recurrences are unrolled.
    fn basis_into(&self, span: usize, u: T, q: usize, out: &mut [T; MAX_ORDER]) {
        let knots = &self.knots;
        let p = self.degree;
        let tri_base = (span - p) * (p * (p + 1) / 2);
        if q == 1 {
            let t = self.basis_inv[tri_base];
            out[0] = (knots[span + 1] - u) * t;
            out[1] = (u - knots[span]) * t;
            return;
        }
        if q == 2 {
            let l1 = u - knots[span];
            let r1 = knots[span + 1] - u;
            let l2 = u - knots[span - 1];
            let r2 = knots[span + 2] - u;
            let t0 = self.basis_inv[tri_base];
            let n0 = r1 * t0;
            let n1 = l1 * t0;
            let ta = n0 * self.basis_inv[tri_base + 1];
            let tb = n1 * self.basis_inv[tri_base + 2];
            out[0] = r1 * ta;
            out[1] = l2 * ta + r2 * tb;
            out[2] = l1 * tb;
            return;
        }
        let mut left = [T::zero(); MAX_ORDER];
        let mut right = [T::zero(); MAX_ORDER];
        out[0] = T::one();
        for j in 1..=q {
            left[j] = u - knots[span + 1 - j];
            right[j] = knots[span + j] - u;
            let row = tri_base + j * (j - 1) / 2;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = out[r] * self.basis_inv[row + r];
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// First-derivative values of the active basis functions, into a stack
    /// buffer.
    fn derivs_into(&self, span: usize, u: T, out: &mut [T; MAX_ORDER]) {
        let p = self.degree;
        if p == 0 {
            out[0] = T::zero();
            return;
        }
        // dN_{i,p} = p * ( N_{i,p-1}/(k[i+p]-k[i]) - N_{i+1,p-1}/(k[i+p+1]-k[i+1]) )
        // with 0/0 treated as 0. The lower-degree nonzero values at this span
        // are N_{span-p+1..=span, p-1}.
        let mut lower = [T::zero(); MAX_ORDER];
        self.basis_into(span, u, p - 1, &mut lower);
        let knots = &self.knots;
        let pf = real::<T>(p as f64);
        for j in 0..=p {
            let i = span - p + j;
            // N_{i,p-1} is lower[j-1] (zero when j == 0)
            let a = if j == 0 {
                T::zero()
            } else {
                let denom = knots[i + p] - knots[i];
                if denom == T::zero() {
                    T::zero()
                } else {
                    lower[j - 1] / denom
                }
            };
            // N_{i+1,p-1} is lower[j] (zero when j == p)
            let b = if j == p {
                T::zero()
            } else {
                let denom = knots[i + p + 1] - knots[i + 1];
                if denom == T::zero() {
                    T::zero()
                } else {
                    lower[j] / denom
                }
            };
            out[j] = pf * (a - b);
        }
    }

    /// First derivatives of the `p+1` active basis functions at `u`.
    ///
    /// The returned values sum to zero (derivative of the partition of
    /// unity). Only `order == 1` is supported; higher orders are rejected
    /// rather than silently zeroed.
    pub fn basis_derivs(&self, span: usize, u: T, order: usize) -> Result<Vec<T>, ModelError> {
        if order != 1 {
            return Err(ModelError::UnsupportedOrder { order });
        }
        let mut out = [T::zero(); MAX_ORDER];
        self.derivs_into(span, u, &mut out);
        Ok(out[..self.degree + 1].to_vec())
    }
}

/// Highest supported polynomial degree per dimension. Degrees are small in
/// every practical encoding; the cap lets the query path run entirely on
/// fixed-size stack buffers.
pub const MAX_DEGREE: usize = 8;
const MAX_ORDER: usize = MAX_DEGREE + 1;

/// Point in the model's parameter cube `[0,1]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint<T> {
    pub u: T,
    pub v: T,
    pub w: T,
}

impl<T: Real> ParamPoint<T> {
    pub fn new(u: T, v: T, w: T) -> Self {
        Self { u, v, w }
    }

    pub fn components(&self) -> [T; 3] {
        [self.u, self.v, self.w]
    }
}

/// Physical axis-aligned bounds of the modeled volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBounds<T> {
    pub min: [T; 3],
    pub max: [T; 3],
}

impl<T: Real> DomainBounds<T> {
    pub fn new(min: [T; 3], max: [T; 3]) -> Self {
        Self { min, max }
    }

    pub fn unit() -> Self {
        Self {
            min: [T::zero(); 3],
            max: [T::one(); 3],
        }
    }

    pub fn extent(&self, dim: usize) -> T {
        self.max[dim] - self.min[dim]
    }

    pub fn diagonal(&self) -> T {
        let mut s = T::zero();
        for d in 0..3 {
            let e = self.extent(d);
            s += e * e;
        }
        s.sqrt()
    }

    pub fn contains(&self, p: [T; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    /// Physical point -> parameter cube.
    pub fn normalize(&self, p: [T; 3]) -> [T; 3] {
        let mut q = [T::zero(); 3];
        for d in 0..3 {
            q[d] = (p[d] - self.min[d]) / self.extent(d);
        }
        q
    }

    /// Parameter cube -> physical point.
    pub fn denormalize(&self, q: [T; 3]) -> [T; 3] {
        let mut p = [T::zero(); 3];
        for d in 0..3 {
            p[d] = self.min[d] + q[d] * self.extent(d);
        }
        p
    }
}

/// Continuous volume surrogate: one clamped knot vector per axis plus a 3D
/// grid of control values.
///
/// Control values are stored with `u` fastest and `w` slowest, i.e.
/// `ctrl[i + nctrl_u * (j + nctrl_v * k)]` holds the `(i, j, k)` value.
#[derive(Debug, Clone, PartialEq)]
pub struct MfaModel<T> {
    knot_vectors: [KnotVector<T>; 3],
    nctrl: [usize; 3],
    ctrl: Vec<T>,
    value_range: (T, T),
    domain_bounds: DomainBounds<T>,
}

impl<T: Real> MfaModel<T> {
    pub fn new(
        knot_vectors: [KnotVector<T>; 3],
        ctrl: Vec<T>,
        value_range: (T, T),
        domain_bounds: DomainBounds<T>,
    ) -> Result<Self, ModelError> {
        let nctrl = [
            knot_vectors[0].num_ctrl(),
            knot_vectors[1].num_ctrl(),
            knot_vectors[2].num_ctrl(),
        ];
        if ctrl.len() != nctrl[0] * nctrl[1] * nctrl[2] {
            return Err(ModelError::InvalidModel(format!(
                "control grid has {} values, knot vectors require {}x{}x{}",
                ctrl.len(),
                nctrl[0],
                nctrl[1],
                nctrl[2]
            )));
        }
        if value_range.0 > value_range.1 {
            return Err(ModelError::InvalidModel(
                "value_range.min > value_range.max".into(),
            ));
        }
        for d in 0..3 {
            if domain_bounds.min[d] >= domain_bounds.max[d] {
                return Err(ModelError::InvalidModel(format!(
                    "domain bounds degenerate along dimension {d}"
                )));
            }
        }
        Ok(Self {
            knot_vectors,
            nctrl,
            ctrl,
            value_range,
            domain_bounds,
        })
    }

    pub fn knot_vector(&self, dim: usize) -> &KnotVector<T> {
        &self.knot_vectors[dim]
    }

    pub fn degrees(&self) -> [usize; 3] {
        [
            self.knot_vectors[0].degree(),
            self.knot_vectors[1].degree(),
            self.knot_vectors[2].degree(),
        ]
    }

    pub fn nctrl(&self) -> [usize; 3] {
        self.nctrl
    }

    pub fn ctrl(&self) -> &[T] {
        &self.ctrl
    }

    pub fn ctrl_at(&self, i: usize, j: usize, k: usize) -> T {
        self.ctrl[i + self.nctrl[0] * (j + self.nctrl[1] * k)]
    }

    pub fn value_range(&self) -> (T, T) {
        self.value_range
    }

    pub fn domain_bounds(&self) -> &DomainBounds<T> {
        &self.domain_bounds
    }

    fn check_param(&self, q: &ParamPoint<T>) -> Result<(), ModelError> {
        for (d, &c) in q.components().iter().enumerate() {
            if c < T::zero() || c > T::one() {
                return Err(ModelError::ParamOutOfDomain {
                    dim: d,
                    value: c.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Value query: the tensor-product sum over the active
    /// `(p_u+1)(p_v+1)(p_w+1)` control values. Allocation-free, with a
    /// flattened path for the common all-degree-2 model.
    pub fn eval_value(&self, q: ParamPoint<T>) -> Result<T, ModelError> {
        self.check_param(&q)?;
        let [qu, qv, qw] = q.components();
        let kvs = &self.knot_vectors;
        if kvs[0].degree == 2 && kvs[1].degree == 2 && kvs[2].degree == 2 {
            return Ok(self.eval_value_deg2(qu, qv, qw));
        }
        let su = kvs[0].span_for(qu);
        let sv = kvs[1].span_for(qv);
        let sw = kvs[2].span_for(qw);
        let mut bu = [T::zero(); MAX_ORDER];
        let mut bv = [T::zero(); MAX_ORDER];
        let mut bw = [T::zero(); MAX_ORDER];
        kvs[0].basis_into(su, qu, kvs[0].degree, &mut bu);
        kvs[1].basis_into(sv, qv, kvs[1].degree, &mut bv);
        kvs[2].basis_into(sw, qw, kvs[2].degree, &mut bw);
        Ok(self.tensor_sum(su, sv, sw, &bu, &bv, &bw))
    }

    /// Quadratic tensor-product evaluation with constant loop bounds.
    fn eval_value_deg2(&self, qu: T, qv: T, qw: T) -> T {
        let kvs = &self.knot_vectors;
        let su = kvs[0].span_for(qu);
        let sv = kvs[1].span_for(qv);
        let sw = kvs[2].span_for(qw);
        let mut bu = [T::zero(); MAX_ORDER];
        let mut bv = [T::zero(); MAX_ORDER];
        let mut bw = [T::zero(); MAX_ORDER];
        kvs[0].basis_into(su, qu, 2, &mut bu);
        kvs[1].basis_into(sv, qv, 2, &mut bv);
        kvs[2].basis_into(sw, qw, 2, &mut bw);
        let (nu, nv) = (self.nctrl[0], self.nctrl[1]);
        let (i0, j0, k0) = (su - 2, sv - 2, sw - 2);
        let mut acc = T::zero();
        for kk in 0..3 {
            let base_k = nu * nv * (k0 + kk);
            let mut plane = T::zero();
            for jj in 0..3 {
                let base = base_k + nu * (j0 + jj) + i0;
                let row = &self.ctrl[base..base + 3];
                plane += bv[jj] * (bu[0] * row[0] + bu[1] * row[1] + bu[2] * row[2]);
            }
            acc += bw[kk] * plane;
        }
        acc
    }

    /// Gradient query in parameter space: `(dF/du, dF/dv, dF/dw)`.
    ///
    /// All three partials come out of one call: the span search and the
    /// basis evaluations along each axis are computed once and reused for
    /// every component. Dividing each component by the physical extent of
    /// its axis converts to a physical-space gradient.
    pub fn eval_gradient(&self, q: ParamPoint<T>) -> Result<[T; 3], ModelError> {
        self.check_param(&q)?;
        let [qu, qv, qw] = q.components();
        let su = self.knot_vectors[0].span_for(qu);
        let sv = self.knot_vectors[1].span_for(qv);
        let sw = self.knot_vectors[2].span_for(qw);
        let mut bu = [T::zero(); MAX_ORDER];
        let mut bv = [T::zero(); MAX_ORDER];
        let mut bw = [T::zero(); MAX_ORDER];
        self.knot_vectors[0].basis_into(su, qu, self.knot_vectors[0].degree, &mut bu);
        self.knot_vectors[1].basis_into(sv, qv, self.knot_vectors[1].degree, &mut bv);
        self.knot_vectors[2].basis_into(sw, qw, self.knot_vectors[2].degree, &mut bw);
        let mut du = [T::zero(); MAX_ORDER];
        let mut dv = [T::zero(); MAX_ORDER];
        let mut dw = [T::zero(); MAX_ORDER];
        self.knot_vectors[0].derivs_into(su, qu, &mut du);
        self.knot_vectors[1].derivs_into(sv, qv, &mut dv);
        self.knot_vectors[2].derivs_into(sw, qw, &mut dw);
        Ok([
            self.tensor_sum(su, sv, sw, &du, &bv, &bw),
            self.tensor_sum(su, sv, sw, &bu, &dv, &bw),
            self.tensor_sum(su, sv, sw, &bu, &bv, &dw),
        ])
    }

    fn tensor_sum(&self, su: usize, sv: usize, sw: usize, fu: &[T], fv: &[T], fw: &[T]) -> T {
        let [pu, pv, pw] = self.degrees();
        let i0 = su - pu;
        let j0 = sv - pv;
        let k0 = sw - pw;
        let (nu, nv) = (self.nctrl[0], self.nctrl[1]);
        let mut acc = T::zero();
        for (kk, &wk) in fw.iter().enumerate().take(pw + 1) {
            let base_k = nu * nv * (k0 + kk);
            for (jj, &wj) in fv.iter().enumerate().take(pv + 1) {
                let base = base_k + nu * (j0 + jj) + i0;
                let row = &self.ctrl[base..base + pu + 1];
                let mut line = T::zero();
                for (&wi, &c) in fu.iter().zip(row) {
                    line += wi * c;
                }
                acc += wj * wk * line;
            }
        }
        acc
    }

    /// Serializes in the `MFAMOD1` layout: 7-byte ASCII magic, version byte,
    /// then little-endian `u32` degrees, control counts and knot counts,
    /// `f64` value range and domain bounds, the knot runs per dimension and
    /// the control grid (u fastest, w slowest).
    pub fn save<W: Write>(&self, sink: &mut W) -> Result<(), FormatError> {
        sink.write_all(MAGIC)?;
        sink.write_all(&[VERSION])?;
        for d in 0..3 {
            sink.write_all(&(self.knot_vectors[d].degree() as u32).to_le_bytes())?;
        }
        for d in 0..3 {
            sink.write_all(&(self.nctrl[d] as u32).to_le_bytes())?;
        }
        for d in 0..3 {
            sink.write_all(&(self.knot_vectors[d].knots().len() as u32).to_le_bytes())?;
        }
        for &v in [self.value_range.0, self.value_range.1].iter() {
            sink.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        for d in 0..3 {
            sink.write_all(&self.domain_bounds.min[d].to_f64().unwrap().to_le_bytes())?;
            sink.write_all(&self.domain_bounds.max[d].to_f64().unwrap().to_le_bytes())?;
        }
        for d in 0..3 {
            for &k in self.knot_vectors[d].knots() {
                sink.write_all(&k.to_f64().unwrap().to_le_bytes())?;
            }
        }
        for &c in &self.ctrl {
            sink.write_all(&c.to_f64().unwrap().to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a model back; every invariant is revalidated and violations are
    /// reported with the byte offset of the offending field.
    pub fn load<R: Read>(source: &mut R) -> Result<Self, FormatError> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };

        let magic = cur.take(7, "magic")?;
        if magic != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = cur.take(1, "version")?[0];
        if version != VERSION {
            return Err(FormatError::BadVersion(version));
        }

        let mut degrees = [0usize; 3];
        for d in &mut degrees {
            *d = cur.read_u32("degree")? as usize;
        }
        let mut nctrl = [0usize; 3];
        for n in &mut nctrl {
            *n = cur.read_u32("nctrl")? as usize;
        }
        let mut knot_counts = [0usize; 3];
        for n in &mut knot_counts {
            *n = cur.read_u32("knot count")? as usize;
        }
        for d in 0..3 {
            if knot_counts[d] != nctrl[d] + degrees[d] + 1 {
                return Err(FormatError::Invariant {
                    offset: 8 + 24 + 4 * d,
                    message: format!(
                        "knot count {} != nctrl {} + degree {} + 1",
                        knot_counts[d], nctrl[d], degrees[d]
                    ),
                });
            }
        }

        let vr_min = cur.read_f64("value_range.min")?;
        let vr_max = cur.read_f64("value_range.max")?;
        let mut bmin = [T::zero(); 3];
        let mut bmax = [T::zero(); 3];
        for d in 0..3 {
            bmin[d] = real(cur.read_f64("domain bound min")?);
            bmax[d] = real(cur.read_f64("domain bound max")?);
        }

        let mut kvs = Vec::with_capacity(3);
        for d in 0..3 {
            let start = cur.pos;
            let mut knots = Vec::with_capacity(knot_counts[d]);
            for _ in 0..knot_counts[d] {
                knots.push(real::<T>(cur.read_f64("knot")?));
            }
            let kv = KnotVector::new(degrees[d], knots).map_err(|e| FormatError::Invariant {
                offset: start,
                message: e.to_string(),
            })?;
            kvs.push(kv);
        }
        let kvs: [KnotVector<T>; 3] = kvs.try_into().expect("three knot vectors");

        let nc = nctrl[0] * nctrl[1] * nctrl[2];
        let ctrl_start = cur.pos;
        let need = nc * 8;
        if cur.bytes.len() - cur.pos < need {
            return Err(FormatError::Truncated {
                offset: cur.bytes.len(),
                missing: need - (cur.bytes.len() - cur.pos),
                what: "control grid",
            });
        }
        let mut ctrl = Vec::with_capacity(nc);
        for _ in 0..nc {
            ctrl.push(real::<T>(cur.read_f64("control value")?));
        }

        Self::new(kvs, ctrl, (real(vr_min), real(vr_max)), DomainBounds::new(bmin, bmax)).map_err(
            |e| FormatError::Invariant {
                offset: ctrl_start,
                message: e.to_string(),
            },
        )
    }
}

const MAGIC: &[u8; 7] = b"MFAMOD1";
const VERSION: u8 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() - self.pos < n {
            return Err(FormatError::Truncated {
                offset: self.bytes.len(),
                missing: n - (self.bytes.len() - self.pos),
                what,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn read_u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn read_f64(&mut self, what: &'static str) -> Result<f64, FormatError> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Greville abscissa of control index `i`: mean of `p` consecutive interior
/// knots. A model whose control values equal its Greville abscissae along one
/// axis reproduces the coordinate ramp exactly, which makes handy fixtures.
pub fn greville_abscissa<T: Real>(kv: &KnotVector<T>, i: usize) -> T {
    let p = kv.degree();
    if p == 0 {
        // midpoint of the span, the natural degenerate choice
        let k = kv.knots();
        return (k[i] + k[i + 1]) / real(2.0);
    }
    let mut s = T::zero();
    for j in 1..=p {
        s += kv.knots()[i + j];
    }
    s / real(p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::SplitMix64;
    use approx::assert_abs_diff_eq;

    fn kv(p: usize, knots: &[f64]) -> KnotVector<f64> {
        KnotVector::new(p, knots.to_vec()).unwrap()
    }

    /// Naive Cox-de Boor recursion straight from the definition; the oracle
    /// for the optimized triangular evaluation.
    fn naive_basis(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
        if p == 0 {
            // half-open spans, closed at the top for u = 1
            let hi = knots[i + 1];
            let closed_top = hi >= 1.0 && u >= 1.0;
            return if (knots[i] <= u && u < hi) || closed_top {
                1.0
            } else {
                0.0
            };
        }
        let mut acc = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            acc += (u - knots[i]) / d1 * naive_basis(knots, i, p - 1, u);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            acc += (knots[i + p + 1] - u) / d2 * naive_basis(knots, i + 1, p - 1, u);
        }
        acc
    }

    #[test]
    fn find_span_single_span() {
        let k = kv(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(k.find_span(0.0).unwrap(), 2);
        assert_eq!(k.find_span(1.0).unwrap(), 2);
    }

    #[test]
    fn find_span_matches_linear_scan() {
        let k = kv(2, &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(k.find_span(0.7).unwrap(), 3);
        // linear-scan oracle on random parameters
        let mut rng = SplitMix64::new(11);
        for _ in 0..500 {
            let u = rng.next_f64();
            let span = k.find_span(u).unwrap();
            let knots = k.knots();
            assert!(knots[span] <= u && u < knots[span + 1]);
        }
    }

    #[test]
    fn find_span_rejects_out_of_domain() {
        let k = kv(1, &[0.0, 0.0, 1.0, 1.0]);
        assert!(k.find_span(-0.1).is_err());
        assert!(k.find_span(1.1).is_err());
    }

    #[test]
    fn basis_linear_hats() {
        let k = kv(1, &[0.0, 0.0, 1.0, 1.0]);
        let b = k.basis_funs(1, 0.5);
        assert_eq!(b, vec![0.5, 0.5]);
    }

    #[test]
    fn basis_clamped_endpoint() {
        let k = kv(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = k.basis_funs(2, 0.0);
        assert_eq!(b, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn basis_matches_naive_recursion() {
        let k = kv(2, &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        let span = k.find_span(0.25).unwrap();
        let fast = k.basis_funs(span, 0.25);
        for (j, &f) in fast.iter().enumerate() {
            let i = span - 2 + j;
            assert_abs_diff_eq!(f, naive_basis(k.knots(), i, 2, 0.25), epsilon = 1e-12);
        }
    }

    #[test]
    fn basis_partition_of_unity_randomized() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..1000 {
            let p = 1 + rng.next_index(3);
            let nctrl = p + 1 + rng.next_index(6);
            let k = KnotVector::<f64>::uniform(p, nctrl).unwrap();
            let u = rng.next_f64();
            let span = k.find_span(u).unwrap();
            let b = k.basis_funs(span, u);
            let sum: f64 = b.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(b.iter().all(|&x| (-1e-15..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn derivs_linear_slopes() {
        let k = kv(1, &[0.0, 0.0, 1.0, 1.0]);
        for &u in &[0.1, 0.5, 0.9] {
            let d = k.basis_derivs(1, u, 1).unwrap();
            assert_eq!(d, vec![-1.0, 1.0]);
        }
    }

    #[test]
    fn derivs_sum_to_zero_randomized() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..1000 {
            let p = 1 + rng.next_index(3);
            let nctrl = p + 1 + rng.next_index(6);
            let k = KnotVector::<f64>::uniform(p, nctrl).unwrap();
            let u = rng.next_f64();
            let span = k.find_span(u).unwrap();
            let d = k.basis_derivs(span, u, 1).unwrap();
            let sum: f64 = d.iter().sum();
            assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivs_match_finite_differences() {
        let k = kv(2, &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        let u = 0.25;
        let h = 1e-6;
        let span = k.find_span(u).unwrap();
        let d = k.basis_derivs(span, u, 1).unwrap();
        let lo = k.basis_funs(k.find_span(u - h).unwrap(), u - h);
        let hi = k.basis_funs(k.find_span(u + h).unwrap(), u + h);
        for j in 0..3 {
            let fd = (hi[j] - lo[j]) / (2.0 * h);
            assert_abs_diff_eq!(d[j], fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn derivs_reject_higher_order() {
        let k = kv(2, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            k.basis_derivs(2, 0.5, 2),
            Err(ModelError::UnsupportedOrder { order: 2 })
        ));
    }

    fn constant_model(c: f64) -> MfaModel<f64> {
        let kvs = [
            KnotVector::uniform(2, 4).unwrap(),
            KnotVector::uniform(1, 3).unwrap(),
            KnotVector::uniform(2, 3).unwrap(),
        ];
        let n = 4 * 3 * 3;
        MfaModel::new(kvs, vec![c; n], (c, c), DomainBounds::unit()).unwrap()
    }

    /// Model reproducing f(u,v,w) = u via Greville control values.
    fn ramp_model(p: usize, nctrl: usize) -> MfaModel<f64> {
        let kvu = KnotVector::<f64>::uniform(p, nctrl).unwrap();
        let kvv = KnotVector::<f64>::uniform(1, 2).unwrap();
        let kvw = KnotVector::<f64>::uniform(1, 2).unwrap();
        let mut ctrl = Vec::new();
        for _k in 0..2 {
            for _j in 0..2 {
                for i in 0..nctrl {
                    ctrl.push(greville_abscissa(&kvu, i));
                }
            }
        }
        MfaModel::new([kvu, kvv, kvw], ctrl, (0.0, 1.0), DomainBounds::unit()).unwrap()
    }

    #[test]
    fn eval_constant_model() {
        let m = constant_model(3.25);
        let mut rng = SplitMix64::new(5);
        for _ in 0..100 {
            let q = ParamPoint::new(rng.next_f64(), rng.next_f64(), rng.next_f64());
            assert_abs_diff_eq!(m.eval_value(q).unwrap(), 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn eval_ramp_model() {
        let m = ramp_model(2, 5);
        let q = ParamPoint::new(0.3, 0.77, 0.12);
        assert_abs_diff_eq!(m.eval_value(q).unwrap(), 0.3, epsilon = 1e-9);
    }

    #[test]
    fn eval_rejects_out_of_cube() {
        let m = constant_model(1.0);
        assert!(m.eval_value(ParamPoint::new(1.2, 0.0, 0.0)).is_err());
        assert!(m.eval_value(ParamPoint::new(0.0, -0.1, 0.5)).is_err());
    }

    #[test]
    fn eval_endpoint_interpolation() {
        let kvs = [
            KnotVector::<f64>::uniform(2, 4).unwrap(),
            KnotVector::<f64>::uniform(2, 4).unwrap(),
            KnotVector::<f64>::uniform(2, 4).unwrap(),
        ];
        let mut rng = SplitMix64::new(23);
        let ctrl: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let m = MfaModel::new(kvs, ctrl, (0.0, 1.0), DomainBounds::unit()).unwrap();
        for k in [0usize, 3] {
            for j in [0usize, 3] {
                for i in [0usize, 3] {
                    let q = ParamPoint::new(
                        if i == 0 { 0.0 } else { 1.0 },
                        if j == 0 { 0.0 } else { 1.0 },
                        if k == 0 { 0.0 } else { 1.0 },
                    );
                    assert_abs_diff_eq!(
                        m.eval_value(q).unwrap(),
                        m.ctrl_at(i, j, k),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn eval_local_support() {
        // perturbing a control value outside the active block leaves the
        // evaluation bit-identical
        let kvs = [
            KnotVector::<f64>::uniform(2, 6).unwrap(),
            KnotVector::<f64>::uniform(2, 6).unwrap(),
            KnotVector::<f64>::uniform(2, 6).unwrap(),
        ];
        let mut rng = SplitMix64::new(29);
        let ctrl: Vec<f64> = (0..216).map(|_| rng.next_f64()).collect();
        let m = MfaModel::new(kvs.clone(), ctrl.clone(), (0.0, 1.0), DomainBounds::unit()).unwrap();
        let q = ParamPoint::new(0.05, 0.05, 0.05);
        let before = m.eval_value(q).unwrap();
        // active block at q is i,j,k in 0..3; poke the far corner
        let mut poked = ctrl;
        poked[5 + 6 * (5 + 6 * 5)] += 1000.0;
        let m2 = MfaModel::new(kvs, poked, (0.0, 1.0), DomainBounds::unit()).unwrap();
        assert_eq!(before.to_bits(), m2.eval_value(q).unwrap().to_bits());
    }

    #[test]
    fn gradient_constant_model_is_zero() {
        let m = constant_model(7.0);
        let g = m.eval_gradient(ParamPoint::new(0.4, 0.6, 0.2)).unwrap();
        for c in g {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_ramp_model() {
        let m = ramp_model(2, 6);
        let g = m.eval_gradient(ParamPoint::new(0.37, 0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences_randomized() {
        let mut rng = SplitMix64::new(41);
        for _ in 0..100 {
            let mut kvs = Vec::new();
            let mut n = [0usize; 3];
            for d in 0..3 {
                let p = 1 + rng.next_index(3);
                n[d] = p + 1 + rng.next_index(4);
                kvs.push(KnotVector::<f64>::uniform(p, n[d]).unwrap());
            }
            let kvs: [KnotVector<f64>; 3] = kvs.try_into().unwrap();
            let total = n[0] * n[1] * n[2];
            let ctrl: Vec<f64> = (0..total).map(|_| rng.next_in_range(-2.0, 2.0)).collect();
            let m = MfaModel::new(kvs, ctrl, (-2.0, 2.0), DomainBounds::unit()).unwrap();
            let h = 1e-5;
            let q = [
                rng.next_in_range(h, 1.0 - h),
                rng.next_in_range(h, 1.0 - h),
                rng.next_in_range(h, 1.0 - h),
            ];
            let g = m.eval_gradient(ParamPoint::new(q[0], q[1], q[2])).unwrap();
            let range = m.value_range().1 - m.value_range().0;
            let tol = (1e-4f64).max(1e-4 * range);
            for d in 0..3 {
                let mut lo = q;
                let mut hi = q;
                lo[d] -= h;
                hi[d] += h;
                let flo = m.eval_value(ParamPoint::new(lo[0], lo[1], lo[2])).unwrap();
                let fhi = m.eval_value(ParamPoint::new(hi[0], hi[1], hi[2])).unwrap();
                let fd = (fhi - flo) / (2.0 * h);
                assert!(
                    (g[d] - fd).abs() <= tol,
                    "component {d}: analytic {} vs fd {fd}",
                    g[d]
                );
            }
        }
    }

    #[test]
    fn save_load_roundtrip_is_field_equal() {
        let m = ramp_model(2, 5);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = MfaModel::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn load_rejects_bad_magic() {
        let m = constant_model(1.0);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            MfaModel::<f64>::load(&mut buf.as_slice()),
            Err(FormatError::BadMagic)
        ));
    }

    #[test]
    fn load_rejects_decreasing_knots() {
        let m = ramp_model(2, 5);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        // knots start after magic(7)+version(1)+9*u32(36)+2*f64(16)+6*f64(48) = 108
        let idx = 108 + 3 * 8; // fourth knot of the u vector (first interior)
        buf[idx..idx + 8].copy_from_slice(&(-0.5f64).to_le_bytes());
        match MfaModel::<f64>::load(&mut buf.as_slice()) {
            Err(FormatError::Invariant { offset, .. }) => assert_eq!(offset, 108),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn interior_knot_on_boundary_rejected() {
        // an interior zero would extend the end multiplicity past degree+1
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn load_reports_truncation_with_byte_count() {
        let m = constant_model(1.0);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let full = buf.len();
        buf.truncate(full - 13);
        match MfaModel::<f64>::load(&mut buf.as_slice()) {
            Err(FormatError::Truncated {
                offset, missing, ..
            }) => {
                assert_eq!(offset, full - 13);
                assert_eq!(missing, 13);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_bit_exact_control_values() {
        let m = ramp_model(3, 7);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = MfaModel::<f64>::load(&mut buf.as_slice()).unwrap();
        for (a, b) in m.ctrl().iter().zip(back.ctrl()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut buf2 = Vec::new();
        back.save(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn f32_models_evaluate() {
        let kvs = [
            KnotVector::<f32>::uniform(2, 4).unwrap(),
            KnotVector::<f32>::uniform(2, 4).unwrap(),
            KnotVector::<f32>::uniform(2, 4).unwrap(),
        ];
        let m = MfaModel::new(kvs, vec![2.5f32; 64], (2.5, 2.5), DomainBounds::unit()).unwrap();
        let v = m.eval_value(ParamPoint::new(0.3f32, 0.9, 0.1)).unwrap();
        assert!((v - 2.5).abs() < 1e-6);
    }
}

//! Tensor-product grids, grid functions, trapezoid quadrature and the norms
//! every other module measures errors in.
//!
//! Node ordering is row-major with axis 0 varying slowest; every module in the
//! crate relies on this ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equally spaced nodes (endpoints included) on the cube `[lo, hi]^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: usize,
    lo: f64,
    hi: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("grid dimension must be at least 1"));
        }
        if points < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 points per axis, got {points}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("invalid grid box [{lo}, {hi}]")));
        }
        Ok(Grid { dim, points, lo, hi })
    }

    /// The default working box `[-1, 1]^dim`.
    pub fn unit(dim: usize, points: usize) -> Result<Self> {
        Grid::new(dim, points, -1.0, 1.0)
    }

    /// One-dimensional grid on `[-π, π]`, both endpoints included.
    pub fn periodic_pi(points: usize) -> Result<Self> {
        Grid::new(1, points, -std::f64::consts::PI, std::f64::consts::PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn side(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.side() / (self.points - 1) as f64
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    /// Total node count `m^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of the nodes along one axis.
    pub fn axis_coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.hi
                } else {
                    self.lo + i as f64 * h
                }
            })
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let coords = self.axis_coords();
        self.multi_index(flat).into_iter().map(|i| coords[i]).collect()
    }

    /// All node coordinates in row-major order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let coords = self.axis_coords();
        (0..self.len())
            .map(|k| self.multi_index(k).into_iter().map(|i| coords[i]).collect())
            .collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        let tol = 1e-12 * self.side();
        point.len() == self.dim
            && point
                .iter()
                .all(|&x| x >= self.lo - tol && x <= self.hi + tol)
    }

    /// True if every node of `self` is also a node of `other`.
    pub fn is_subgrid_of(&self, other: &Grid) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let tol = 1e-9 * other.spacing();
        if (self.lo - other.lo).abs() > tol || (self.hi - other.hi).abs() > tol {
            return false;
        }
        let intervals = self.points - 1;
        let fine = other.points - 1;
        fine % intervals == 0
    }
}

/// Samples of a real function on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "grid function value at node {bad} is not finite"
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.nodes().iter().map(|x| f(x)).collect();
        GridFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self - other`; both must live on the same grid.
    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Norms used for the input and output spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Lp { p: f64 },
    Linf,
    /// Hölder norm of order `s = k + α`; an integer `s` gives the `C^k` norm.
    Holder { s: f64 },
    SobolevH1,
}

impl NormKind {
    pub const L2: NormKind = NormKind::Lp { p: 2.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormKind::Lp { p } if !(p >= 1.0) => {
                Err(Error::invalid(format!("L^p norm needs p >= 1, got {p}")))
            }
            NormKind::Holder { s } if !(s > 0.0) => {
                Err(Error::invalid(format!("Hölder norm needs s > 0, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Composite trapezoid weights; they sum to the box volume.
pub fn quadrature_weights(grid: &Grid) -> Vec<f64> {
    let w1 = axis_weights(grid);
    (0..grid.len())
        .map(|k| grid.multi_index(k).iter().map(|&i| w1[i]).product())
        .collect()
}

pub(crate) fn axis_weights(grid: &Grid) -> Vec<f64> {
    let h = grid.spacing();
    let m = grid.points_per_axis();
    (0..m)
        .map(|i| if i == 0 || i + 1 == m { 0.5 * h } else { h })
        .collect()
}

/// Trapezoid integral of `f` over its grid box.
pub fn integrate(f: &GridFunction) -> f64 {
    quadrature_weights(f.grid())
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .sum()
}

pub fn norm(f: &GridFunction, kind: NormKind) -> Result<f64> {
    kind.validate()?;
    match kind {
        NormKind::Linf => Ok(f.max_abs()),
        NormKind::Lp { p } => Ok(lp_norm(f, p)),
        NormKind::SobolevH1 => {
            require_points(f.grid(), 3)?;
            let w = quadrature_weights(f.grid());
            let mut acc: Vec<f64> = f.values().iter().map(|v| v * v).collect();
            for axis in 0..f.grid().dim() {
                let df = partial(f, axis);
                for (a, d) in acc.iter_mut().zip(df.values()) {
                    *a += d * d;
                }
            }
            Ok(w.iter().zip(&acc).map(|(w, a)| w * a).sum::<f64>().sqrt())
        }
        NormKind::Holder { s } => holder_norm(f, s),
    }
}

fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    let w = quadrature_weights(f.grid());
    let sum: f64 = w
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v.abs().powf(p))
        .sum();
    sum.powf(1.0 / p)
}

fn require_points(grid: &Grid, needed: usize) -> Result<()> {
    if grid.points_per_axis() < needed {
        return Err(Error::invalid(format!(
            "finite differences need at least {needed} points per axis, grid has {}",
            grid.points_per_axis()
        )));
    }
    Ok(())
}

/// Finite-difference estimate of `‖f‖_{C^s}`: the sum of sup norms of all
/// derivatives up to order `k = ⌊s⌋`, plus the largest `α`-Hölder semi-norm of
/// the order-`k` derivatives when `α = s - k > 0`. This is a lower-bound
/// estimator of the continuum norm.
fn holder_norm(f: &GridFunction, s: f64) -> Result<f64> {
    let k = s.floor() as usize;
    let alpha = s - k as f64;
    require_points(f.grid(), k + 2)?;
    let mut total = 0.0;
    let mut level = vec![(0usize, f.clone())];
    for order in 0..=k {
        total += level.iter().map(|(_, g)| g.max_abs()).sum::<f64>();
        if order == k {
            break;
        }
        // Derivatives along non-decreasing axis sequences enumerate each
        // mixed partial exactly once.
        let mut next = Vec::new();
        for (last_axis, g) in &level {
            for axis in *last_axis..f.grid().dim() {
                next.push((axis, partial(g, axis)));
            }
        }
        level = next;
    }
    if alpha > 0.0 {
        let semi = level
            .iter()
            .map(|(_, g)| holder_seminorm(g, alpha))
            .collect::<Result<Vec<_>>>()?;
        total += semi.into_iter().fold(0.0, f64::max);
    }
    Ok(total)
}

/// `max_{x≠y} |f(x) − f(y)| / ‖x − y‖^α` over all pairs of grid nodes.
pub fn holder_seminorm(f: &GridFunction, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )));
    }
    let nodes = f.grid().nodes();
    let v = f.values();
    let mut best: f64 = 0.0;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let dist2: f64 = nodes[i]
                .iter()
                .zip(&nodes[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let ratio = (v[i] - v[j]).abs() / dist2.powf(0.5 * alpha);
            best = best.max(ratio);
        }
    }
    Ok(best)
}

/// Partial derivative along `axis`: central differences inside, second-order
/// one-sided differences at the two boundary layers.
pub fn partial(f: &GridFunction, axis: usize) -> GridFunction {
    let grid = f.grid();
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let stride = m.pow((grid.dim() - 1 - axis) as u32);
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let i = (k / stride) % m;
        let at = |offset: isize| v[(k as isize + offset * stride as isize) as usize];
        *o = if m == 2 {
            (v[k - i * stride + stride] - v[k - i * stride]) / h
        } else if i == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if i + 1 == m {
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
        } else {
            (at(1) - at(-1)) / (2.0 * h)
        };
    }
    GridFunction {
        grid: grid.clone(),
        values: out,
    }
}

/// Multilinear interpolation stencil for `point`: pairs of (node index, weight).
pub fn interpolation_weights(grid: &Grid, point: &[f64]) -> Result<Vec<(usize, f64)>> {
    if point.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: point.len(),
        });
    }
    if !grid.contains(point) {
        return Err(Error::OutOfDomain {
            point: point.to_vec(),
            lo: grid.lo(),
            hi: grid.hi(),
        });
    }
    let m = grid.points_per_axis();
    let h = grid.spacing();
    let mut cells = Vec::with_capacity(grid.dim());
    for &x in point {
        let s = ((x - grid.lo()) / h).clamp(0.0, (m - 1) as f64);
        let i = (s.floor() as usize).min(m - 2);
        cells.push((i, s - i as f64));
    }
    let mut stencil = Vec::with_capacity(1 << grid.dim());
    let mut idx = vec![0usize; grid.dim()];
    for corner in 0..(1usize << grid.dim()) {
        let mut w = 1.0;
        for (a, &(i, t)) in cells.iter().enumerate() {
            let upper = (corner >> a) & 1 == 1;
            idx[a] = if upper { i + 1 } else { i };
            w *= if upper { t } else { 1.0 - t };
        }
        if w != 0.0 {
            stencil.push((grid.flat_index(&idx), w));
        }
    }
    Ok(stencil)
}

/// Evaluate `f` at arbitrary points inside its box by multilinear
/// interpolation; exact at nodes.
pub fn sample_at(f: &GridFunction, locations: &[Vec<f64>]) -> Result<Vec<f64>> {
    locations
        .iter()
        .map(|p| {
            let stencil = interpolation_weights(f.grid(), p)?;
            Ok(stencil.iter().map(|&(k, w)| w * f.values()[k]).sum())
        })
        .collect()
}

/// Apply the same `out_len × in_len` matrix (row-major) along every axis of a
/// `dim`-dimensional tensor with `in_len` entries per axis.
pub fn tensor_apply(
    values: &[f64],
    dim: usize,
    in_len: usize,
    out_len: usize,
    matrix: &[f64],
) -> Vec<f64> {
    debug_assert_eq!(values.len(), in_len.pow(dim as u32));
    debug_assert_eq!(matrix.len(), in_len * out_len);
    let mut current = values.to_vec();
    let mut sizes = vec![in_len; dim];
    for axis in 0..dim {
        let outer: usize = sizes[..axis].iter().product();
        let inner: usize = sizes[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * out_len * inner];
        for o in 0..outer {
            for k in 0..out_len {
                let row = &matrix[k * in_len..(k + 1) * in_len];
                let dst = &mut next[(o * out_len + k) * inner..(o * out_len + k + 1) * inner];
                for (j, &mkj) in row.iter().enumerate() {
                    if mkj == 0.0 {
                        continue;
                    }
                    let src = &current[(o * in_len + j) * inner..(o * in_len + j + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += mkj * s;
                    }
                }
            }
        }
        sizes[axis] = out_len;
        current = next;
    }
    current
}

//! Periodic grids on the unit torus `[0,1)^d`, fields living on them and the
//! handful of differential and transport operators the solvers need.
//!
//! Nodes sit at `x_i = i h` with `h = 1/n`. In two dimensions the flat index
//! of node `(i, j)` is `i + n j`, so axis 0 is the fast axis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance on the unit mass of a [`Density`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Uniform periodic grid on the unit torus, `d = 1` or `d = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 8 {
            return Err(Error::GridTooCoarse(n));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a node, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        if self.dim == 1 {
            h
        } else {
            h * h
        }
    }

    /// Coordinates of a node; the second entry is 0 in one dimension.
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [node as f64 * h, 0.0],
            _ => [(node % self.n) as f64 * h, (node / self.n) as f64 * h],
        }
    }

    /// Flat index of the node at periodic multi-index `idx`.
    pub fn index(&self, idx: &[isize]) -> usize {
        let n = self.n as isize;
        let i = idx[0].rem_euclid(n) as usize;
        if self.dim == 1 {
            i
        } else {
            i + self.n * idx[1].rem_euclid(n) as usize
        }
    }

    /// Neighbour of `node` shifted by `offset` cells along `axis`.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        if axis == 0 {
            let i = (node % self.n) as isize;
            let base = node - i as usize;
            base + (i + offset).rem_euclid(n) as usize
        } else {
            let i = node % self.n;
            let j = (node / self.n) as isize;
            i + self.n * (j + offset).rem_euclid(n) as usize
        }
    }

    pub(crate) fn ensure_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_len(grid: &TorusGrid, len: usize) -> Result<()> {
    if grid.len() == len {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected: grid.len(), got: len })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Real-valued field on the grid (value functions, payments, test functions).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        ScalarField { grid, values }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `sup |self - other|`. Panics if the grids differ.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "sup_distance across different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + alpha * other`. Panics if the grids differ.
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "axpy across different grids");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect();
        ScalarField::from_raw(self.grid, values)
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    /// Pointwise product. Panics if the grids differ.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "mul across different grids");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        ScalarField::from_raw(self.grid, values)
    }

    /// Discrete `L^2` inner product `sum(a b) h^d`.
    pub fn inner(&self, other: &[f64]) -> f64 {
        dot(&self.values, other) * self.grid.cell_volume()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Probability density on the grid: nonnegative with `sum(values) h^d = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Density {
    /// Validates nonnegativity and unit mass (within [`MASS_TOLERANCE`]).
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        check_finite(&values)?;
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidDensity("negative value"));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity("mass differs from 1"));
        }
        Ok(Density { grid, values })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: TorusGrid, mut values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        check_finite(&values)?;
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidDensity("negative value"));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        if mass <= 0.0 {
            return Err(Error::InvalidDensity("zero mass"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Density { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Density { grid, values }
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        Density { grid, values: vec![1.0; grid.len()] }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Circular mean position along `axis`, in `[0, 1)`.
    pub fn circular_mean(&self, axis: usize) -> f64 {
        let (mut s, mut c) = (0.0, 0.0);
        for (k, &v) in self.values.iter().enumerate() {
            let x = self.grid.coords(k)[axis];
            s += v * math::sin(2.0 * PI * x);
            c += v * math::cos(2.0 * PI * x);
        }
        math::wrap_unit(math::atan2(s, c) / (2.0 * PI))
    }

    /// Circular rotation by whole cells along each axis.
    pub fn rotated(&self, cells: &[isize]) -> Density {
        let grid = self.grid;
        let mut values = vec![0.0; grid.len()];
        for (k, &v) in self.values.iter().enumerate() {
            let mut target = k;
            for (axis, &c) in cells.iter().enumerate().take(grid.dim()) {
                target = grid.neighbor(target, axis, c);
            }
            values[target] = v;
        }
        Density { grid, values }
    }

    /// `sup |self - other|`. Panics if the grids differ.
    pub fn sup_distance(&self, other: &Density) -> f64 {
        assert_eq!(self.grid, other.grid, "sup_distance across different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Vector field on the grid, stored node-major (`dim` components per node).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * grid.dim() {
            return Err(Error::LengthMismatch { expected: grid.len() * grid.dim(), got: values.len() });
        }
        check_finite(&values)?;
        Ok(VectorField { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len() * grid.dim(), values.len());
        VectorField { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        VectorField { grid, values: vec![0.0; grid.len() * grid.dim()] }
    }

    /// Spatially constant field; only the first `dim` entries are used.
    pub fn constant(grid: TorusGrid, v: [f64; 2]) -> Result<Self> {
        Self::from_fn(grid, |_| v)
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len() * d);
        for k in 0..grid.len() {
            let v = f(grid.coords(k));
            values.extend_from_slice(&v[..d]);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn component(&self, node: usize, axis: usize) -> f64 {
        self.values[node * self.grid.dim() + axis]
    }

    /// Largest Euclidean norm over nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.grid.dim())
            .map(|c| math::sqrt(c.iter().map(|v| v * v).sum()))
            .fold(0.0, f64::max)
    }

    /// Largest `sum_a |b_a|` over nodes; this is what enters the upwind CFL.
    pub fn max_l1(&self) -> f64 {
        self.values
            .chunks(self.grid.dim())
            .map(|c| c.iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// Componentwise sup distance. Panics if the grids differ.
    pub fn sup_distance(&self, other: &VectorField) -> f64 {
        assert_eq!(self.grid, other.grid, "sup_distance across different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// `(1 - theta) self + theta other`.
    pub fn lerp(&self, theta: f64, other: &VectorField) -> VectorField {
        assert_eq!(self.grid, other.grid, "lerp across different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        VectorField { grid: self.grid, values }
    }
}

/// Wrapped Gaussian standing in for a Dirac mass at `center`.
///
/// `bandwidth` is the standard deviation per axis; it must resolve at least
/// one cell. The result is renormalized to unit mass on the grid.
pub fn mollified_dirac(grid: TorusGrid, center: &[f64], bandwidth: f64) -> Result<Density> {
    let h = grid.spacing();
    if !(bandwidth >= h) || !bandwidth.is_finite() {
        return Err(Error::UnderResolved { bandwidth, spacing: h });
    }
    if center.len() < grid.dim() || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::param("center", "needs one finite coordinate per axis"));
    }
    let n = grid.points_per_axis();
    let wraps = math::ceil(6.0 * bandwidth) as i64 + 1;
    let profiles: Vec<Vec<f64>> = (0..grid.dim())
        .map(|axis| {
            let c = math::wrap_unit(center[axis]);
            (0..n)
                .map(|i| {
                    let x = i as f64 * h;
                    (-wraps..=wraps)
                        .map(|k| {
                            let d = x - c - k as f64;
                            math::exp(-d * d / (2.0 * bandwidth * bandwidth))
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    let values = (0..grid.len())
        .map(|k| match grid.dim() {
            1 => profiles[0][k],
            _ => profiles[0][k % n] * profiles[1][k / n],
        })
        .collect();
    Density::normalized(grid, values)
}

/// `∫ phi dm` by the rectangle rule (exact trapezoid on a periodic grid).
pub fn integrate(phi: &ScalarField, m: &Density) -> Result<f64> {
    phi.grid.ensure_same(&m.grid)?;
    Ok(phi.inner(&m.values))
}

/// Second-order centered Laplacian with periodic wrap.
pub fn laplacian(phi: &ScalarField) -> ScalarField {
    let grid = phi.grid;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let v = &phi.values;
    let values = (0..grid.len())
        .map(|k| {
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                acc += v[grid.neighbor(k, axis, 1)] - 2.0 * v[k] + v[grid.neighbor(k, axis, -1)];
            }
            acc * inv_h2
        })
        .collect();
    ScalarField::from_raw(grid, values)
}

/// Second-order centered gradient with periodic wrap.
pub fn gradient(phi: &ScalarField) -> VectorField {
    let grid = phi.grid;
    let d = grid.dim();
    let inv_2h = 0.5 / grid.spacing();
    let v = &phi.values;
    let mut values = Vec::with_capacity(grid.len() * d);
    for k in 0..grid.len() {
        for axis in 0..d {
            values.push((v[grid.neighbor(k, axis, 1)] - v[grid.neighbor(k, axis, -1)]) * inv_2h);
        }
    }
    VectorField::from_raw(grid, values)
}

/// Exact Wasserstein-1 distance between two densities on the circle.
///
/// With `F` the cumulative mass difference, the distance is
/// `min_c ∫ |F - c|`, attained at a median of the node values of `F`.
pub fn wasserstein1_circle(m1: &Density, m2: &Density) -> Result<f64> {
    m1.grid.ensure_same(&m2.grid)?;
    if m1.grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(m1.grid.dim()));
    }
    let h = m1.grid.spacing();
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = m1
        .values
        .iter()
        .zip(&m2.values)
        .map(|(a, b)| {
            acc += (a - b) * h;
            acc
        })
        .collect();
    let shift = median(&mut cumulative.clone());
    cumulative.iter_mut().for_each(|f| *f = (*f - shift).abs());
    Ok(cumulative.iter().sum::<f64>() * h)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

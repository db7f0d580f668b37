//! Uniform periodic tensor grids, the staggered time grid and grid functions.
//!
//! A mesh stores one node per periodic equivalence class: along an axis with
//! `M` points the nodes are `lower + i*h` for `i = 0..M`, and index `M` is
//! identified with index `0`. Grid functions are stored row-major with the
//! x index fastest.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::Spectral;

/// One axis of a periodic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
    pub spacing: f64,
}

impl Axis {
    /// Coordinate of node `i`, without wrapping.
    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.spacing
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

pub struct Mesh {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    spectral: OnceLock<Arc<Spectral>>,
}

impl Mesh {
    /// Builds a periodic mesh from per-axis `(lower, upper)` extents and point counts.
    pub fn new(extents: &[(f64, f64)], points: &[usize]) -> Result<Arc<Mesh>> {
        let dim = extents.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if points.len() != dim {
            return Err(Error::InvalidAxis {
                axis: points.len().min(dim),
                reason: format!("{} extents but {} point counts", dim, points.len()),
            });
        }
        let mut axes = Vec::with_capacity(dim);
        for (axis, (&(lower, upper), &m)) in extents.iter().zip(points).enumerate() {
            if m < 3 {
                return Err(Error::InvalidAxis {
                    axis,
                    reason: format!("need at least 3 points, got {m}"),
                });
            }
            if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
                return Err(Error::InvalidAxis {
                    axis,
                    reason: format!("extent ({lower}, {upper}) is empty or not finite"),
                });
            }
            axes.push(Axis {
                lower,
                upper,
                points: m,
                spacing: (upper - lower) / m as f64,
            });
        }
        let shape = axes.iter().map(|a| a.points).collect();
        Ok(Arc::new(Mesh {
            axes,
            shape,
            spectral: OnceLock::new(),
        }))
    }

    /// Same extent and point count along every axis.
    pub fn cube(dim: usize, extent: (f64, f64), points: usize) -> Result<Arc<Mesh>> {
        Mesh::new(&vec![extent; dim], &vec![points; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, axis: usize) -> Result<&Axis> {
        self.axes.get(axis).ok_or(Error::AxisOutOfRange {
            axis,
            dim: self.dim(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of stored values per grid function.
    #[inline]
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest spacing over all axes.
    pub fn h(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).fold(0.0, f64::max)
    }

    /// Product of the spacings; the weight of the discrete inner product.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    /// Distance between consecutive entries along `axis` in the linear layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[..axis].iter().product()
    }

    /// Linear index of a multi-index, wrapping each component periodically.
    pub fn index(&self, idx: &[isize]) -> usize {
        let mut linear = 0;
        let mut stride = 1;
        for (&i, &m) in idx.iter().zip(&self.shape) {
            linear += i.rem_euclid(m as isize) as usize * stride;
            stride *= m;
        }
        linear
    }

    /// Multi-index of a linear index; unused trailing components are zero.
    pub fn unravel(&self, mut linear: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (slot, &m) in out.iter_mut().zip(&self.shape) {
            *slot = linear % m;
            linear /= m;
        }
        out
    }

    /// Node coordinates of a linear index; unused trailing components are zero.
    pub fn node(&self, linear: usize) -> [f64; 3] {
        let idx = self.unravel(linear);
        let mut x = [0.0; 3];
        for (axis, a) in self.axes.iter().enumerate() {
            x[axis] = a.coordinate(idx[axis]);
        }
        x
    }

    /// Cached spectral symbols and FFT plans for this mesh.
    pub fn spectral(&self) -> &Spectral {
        self.spectral
            .get_or_init(|| Arc::new(Spectral::new(&self.axes)))
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

impl fmt::Debug for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mesh").field("axes", &self.axes).finish()
    }
}

/// Uniform time grid `t_n = n*tau`, `tau = T/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub tau: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<TimeGrid> {
        if steps == 0 {
            return Err(Error::TimeGrid("step count must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::TimeGrid(format!(
                "horizon {horizon} must be positive"
            )));
        }
        Ok(TimeGrid {
            horizon,
            steps,
            tau: horizon / steps as f64,
        })
    }

    /// Grid with the step count nearest to `horizon / tau`.
    pub fn with_step(horizon: f64, tau: f64) -> Result<TimeGrid> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::TimeGrid(format!("time step {tau} must be positive")));
        }
        TimeGrid::new(horizon, (horizon / tau).round().max(1.0) as usize)
    }

    #[inline]
    pub fn node(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// `t_{n+1/2}`.
    #[inline]
    pub fn half(&self, n: usize) -> f64 {
        (self.node(n) + self.node(n + 1)) / 2.0
    }

    /// `t_{1/4}`, the midpoint of the predictor step.
    #[inline]
    pub fn quarter(&self) -> f64 {
        self.tau / 4.0
    }
}

/// A periodic grid function: one value per node of its mesh.
#[derive(Clone, Debug)]
pub struct GridFunction<T> {
    mesh: Arc<Mesh>,
    values: Vec<T>,
}

/// Complex grid function.
pub type Field = GridFunction<Complex64>;
/// Real grid function.
pub type RealField = GridFunction<f64>;

impl<T: Copy> GridFunction<T> {
    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch);
        }
        Ok(GridFunction {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    pub fn constant(mesh: &Arc<Mesh>, value: T) -> Self {
        GridFunction {
            mesh: Arc::clone(mesh),
            values: vec![value; mesh.len()],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a (wrapped) multi-index.
    pub fn at(&self, idx: &[isize]) -> T {
        self.values[self.mesh.index(idx)]
    }

    pub fn same_mesh<U>(&self, other: &GridFunction<U>) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    pub fn check_mesh<U>(&self, other: &GridFunction<U>) -> Result<()> {
        if self.same_mesh(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two grid functions on the same mesh.
    pub fn zip_map<U: Copy, R: Copy>(
        &self,
        other: &GridFunction<U>,
        f: impl Fn(T, U) -> R,
    ) -> Result<GridFunction<R>> {
        self.check_mesh(other)?;
        Ok(GridFunction {
            mesh: Arc::clone(&self.mesh),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl<T: Copy + Default> GridFunction<T> {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        GridFunction::constant(mesh, T::default())
    }
}

impl Field {
    /// Pointwise squared modulus.
    pub fn modulus_squared(&self) -> RealField {
        self.map(|z| z.norm_sqr())
    }

    /// Pointwise modulus.
    pub fn modulus(&self) -> RealField {
        self.map(|z| z.norm())
    }
}

impl RealField {
    pub fn to_complex(&self) -> Field {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

/// Samples a pointwise function at every node of the mesh.
pub fn sample<T: Copy>(mesh: &Arc<Mesh>, f: impl Fn(&[f64]) -> T) -> GridFunction<T> {
    let dim = mesh.dim();
    let values = (0..mesh.len())
        .map(|linear| {
            let x = mesh.node(linear);
            f(&x[..dim])
        })
        .collect();
    GridFunction {
        mesh: Arc::clone(mesh),
        values,
    }
}

fn zip_values<T: Copy>(
    a: &GridFunction<T>,
    b: &GridFunction<T>,
    f: impl Fn(T, T) -> T,
) -> GridFunction<T> {
    assert!(a.same_mesh(b), "grid functions live on different meshes");
    GridFunction {
        mesh: Arc::clone(&a.mesh),
        values: a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| f(x, y))
            .collect(),
    }
}

impl<T: Copy + Add<Output = T>> Add for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn add(self, rhs: Self) -> GridFunction<T> {
        zip_values(self, rhs, |x, y| x + y)
    }
}

impl<T: Copy + Sub<Output = T>> Sub for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn sub(self, rhs: Self) -> GridFunction<T> {
        zip_values(self, rhs, |x, y| x - y)
    }
}

impl<T: Copy + Mul<S, Output = T>, S: Copy> Mul<S> for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn mul(self, rhs: S) -> GridFunction<T> {
        self.map(|x| x * rhs)
    }
}

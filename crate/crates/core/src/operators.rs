//! Compact and centered difference operators, discrete inner products and norms.
//!
//! The stencil operators act along one axis with periodic wrap:
//!
//! * `A` averages with weights `(1, 10, 1)/12`,
//! * `delta2` is the centered second difference `(w[i-1] - 2w[i] + w[i+1])/h^2`.
//!
//! `A_h` is the product of the axis averages and `Lambda_h` sums, over each
//! axis, its second difference times the averages of the remaining axes. All
//! of them are circulant, so the discrete Fourier transform diagonalizes them;
//! [`Spectral`] holds the eigenvalue tables and is what `A_h^{-1}` and
//! `A_h^{-1} Lambda_h` are applied through.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::mesh::{Axis, Field, GridFunction, RealField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Symbol of the axis average at frequency `k` of `m`.
pub fn average_symbol(k: usize, m: usize) -> f64 {
    (10.0 + 2.0 * (2.0 * PI * k as f64 / m as f64).cos()) / 12.0
}

/// Symbol of the axis second difference at frequency `k` of `m`.
pub fn second_difference_symbol(k: usize, m: usize, h: f64) -> f64 {
    let s = (PI * k as f64 / m as f64).sin();
    -4.0 / (h * h) * s * s
}

/// Eigenvalue tables and FFT plans of one mesh.
///
/// Tables are indexed by the linear frequency index, laid out exactly like
/// grid values (x frequency fastest).
pub struct Spectral {
    shape: Vec<usize>,
    axis_average: Vec<Vec<f64>>,
    axis_second_difference: Vec<Vec<f64>>,
    average: Vec<f64>,
    lambda: Vec<f64>,
    ratio: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Spectral {
    pub(crate) fn new(axes: &[Axis]) -> Spectral {
        let shape: Vec<usize> = axes.iter().map(|a| a.points).collect();
        let axis_average: Vec<Vec<f64>> = axes
            .iter()
            .map(|a| (0..a.points).map(|k| average_symbol(k, a.points)).collect())
            .collect();
        let axis_second_difference: Vec<Vec<f64>> = axes
            .iter()
            .map(|a| {
                (0..a.points)
                    .map(|k| second_difference_symbol(k, a.points, a.spacing))
                    .collect()
            })
            .collect();

        let len: usize = shape.iter().product();
        let mut average = Vec::with_capacity(len);
        let mut lambda = Vec::with_capacity(len);
        for linear in 0..len {
            let mut k = [0usize; 3];
            let mut rest = linear;
            for (slot, &m) in k.iter_mut().zip(&shape) {
                *slot = rest % m;
                rest /= m;
            }
            let a: Vec<f64> = (0..shape.len()).map(|ax| axis_average[ax][k[ax]]).collect();
            average.push(a.iter().product());
            let mut l = 0.0;
            for ax in 0..shape.len() {
                let others: f64 = (0..shape.len())
                    .filter(|&o| o != ax)
                    .map(|o| a[o])
                    .product();
                l += axis_second_difference[ax][k[ax]] * others;
            }
            lambda.push(l);
        }
        let ratio = lambda.iter().zip(&average).map(|(l, a)| l / a).collect();

        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse = shape.iter().map(|&m| planner.plan_fft_inverse(m)).collect();

        Spectral {
            shape,
            axis_average,
            axis_second_difference,
            average,
            lambda,
            ratio,
            forward,
            inverse,
        }
    }

    /// Symbol of the average along `axis`, indexed by frequency.
    pub fn axis_average(&self, axis: usize) -> &[f64] {
        &self.axis_average[axis]
    }

    /// Symbol of the second difference along `axis`, indexed by frequency.
    pub fn axis_second_difference(&self, axis: usize) -> &[f64] {
        &self.axis_second_difference[axis]
    }

    /// Symbol of `A_h`.
    pub fn average(&self) -> &[f64] {
        &self.average
    }

    /// Symbol of `Lambda_h`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Symbol of `A_h^{-1} Lambda_h`.
    pub fn ratio(&self) -> &[f64] {
        &self.ratio
    }

    /// Unnormalized forward DFT along every axis, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT along every axis including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let len = data.len();
        let mut stride = 1;
        for (axis, plan) in plans.iter().enumerate() {
            let m = self.shape[axis];
            let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
            if axis == 0 {
                // rows along x are contiguous
                plan.process_with_scratch(data, &mut scratch);
            } else {
                let mut line = vec![ZERO; m];
                let block = m * stride;
                for outer in (0..len).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        for (i, slot) in line.iter_mut().enumerate() {
                            *slot = data[base + i * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (i, &v) in line.iter().enumerate() {
                            data[base + i * stride] = v;
                        }
                    }
                }
            }
            stride *= m;
        }
    }

    /// Multiplies a grid function by a diagonal symbol in frequency space.
    pub fn apply_symbol(
        &self,
        values: &[Complex64],
        symbol: impl Fn(usize) -> Complex64,
    ) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.forward(&mut data);
        for (k, z) in data.iter_mut().enumerate() {
            *z *= symbol(k);
        }
        self.inverse(&mut data);
        data
    }
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("shape", &self.shape)
            .finish()
    }
}

/// Applies a three-point stencil `f(prev, cur, next)` along one axis with wrap.
fn stencil_axis(
    field: &Field,
    axis: usize,
    f: impl Fn(Complex64, Complex64, Complex64) -> Complex64,
) -> Result<Field> {
    let mesh = field.mesh();
    let m = mesh.axis(axis)?.points;
    let stride = mesh.stride(axis);
    let block = m * stride;
    let src = field.values();
    let mut out = vec![ZERO; src.len()];
    for outer in (0..src.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for i in 0..m {
                let prev = base + ((i + m - 1) % m) * stride;
                let next = base + ((i + 1) % m) * stride;
                let cur = base + i * stride;
                out[cur] = f(src[prev], src[cur], src[next]);
            }
        }
    }
    GridFunction::from_values(mesh, out)
}

/// Compact average `(w[i-1] + 10 w[i] + w[i+1]) / 12` along `axis`.
pub fn apply_a_axis(field: &Field, axis: usize) -> Result<Field> {
    stencil_axis(field, axis, |p, c, n| (p + c * 10.0 + n) / 12.0)
}

/// Centered second difference along `axis`.
pub fn apply_delta2_axis(field: &Field, axis: usize) -> Result<Field> {
    let h = field.mesh().axis(axis)?.spacing;
    let inv = 1.0 / (h * h);
    stencil_axis(field, axis, move |p, c, n| (p - c * 2.0 + n) * inv)
}

/// `A_h`: product of the axis averages.
pub fn apply_a_h(field: &Field) -> Field {
    let mut out = field.clone();
    for axis in 0..field.mesh().dim() {
        out = apply_a_axis(&out, axis).expect("axis within mesh");
    }
    out
}

/// `Lambda_h`: sum over axes of the second difference averaged along the other axes.
pub fn apply_lambda_h(field: &Field) -> Field {
    let dim = field.mesh().dim();
    let mut total = Field::zeros(field.mesh());
    for axis in 0..dim {
        let mut term = apply_delta2_axis(field, axis).expect("axis within mesh");
        for other in (0..dim).filter(|&o| o != axis) {
            term = apply_a_axis(&term, other).expect("axis within mesh");
        }
        total = &total + &term;
    }
    total
}

/// `A_h^{-1}` by spectral division.
pub fn apply_a_h_inverse(field: &Field) -> Field {
    let spectral = field.mesh().spectral();
    let average = spectral.average();
    let values = spectral.apply_symbol(field.values(), |k| Complex64::new(1.0 / average[k], 0.0));
    GridFunction::from_values(field.mesh(), values).expect("same length")
}

/// `A_h^{-1} Lambda_h`, applied through its symbol.
pub fn apply_a_inv_lambda(field: &Field) -> Field {
    let spectral = field.mesh().spectral();
    let ratio = spectral.ratio();
    let values = spectral.apply_symbol(field.values(), |k| Complex64::new(ratio[k], 0.0));
    GridFunction::from_values(field.mesh(), values).expect("same length")
}

/// Forward difference `(w[i+1] - w[i]) / h` along `axis`, stored at index `i`.
pub fn forward_difference(field: &Field, axis: usize) -> Result<Field> {
    let h = field.mesh().axis(axis)?.spacing;
    stencil_axis(field, axis, move |_, c, n| (n - c) / h)
}

/// Discrete inner product `h^d * sum v * conj(q)`.
pub fn inner(v: &Field, q: &Field) -> Result<Complex64> {
    v.check_mesh(q)?;
    let sum: Complex64 = v
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(sum * v.mesh().cell_volume())
}

/// Discrete inner product of real grid functions.
pub fn inner_real(v: &RealField, q: &RealField) -> Result<f64> {
    v.check_mesh(q)?;
    let sum: f64 = v.values().iter().zip(q.values()).map(|(a, b)| a * b).sum();
    Ok(sum * v.mesh().cell_volume())
}

/// `(v, 1)`.
pub fn integral(v: &RealField) -> f64 {
    v.values().iter().sum::<f64>() * v.mesh().cell_volume()
}

fn sqrt_clamped(x: f64, scale: f64) -> f64 {
    debug_assert!(x > -1e-14 * scale.max(1.0), "negative radicand {x}");
    x.max(0.0).sqrt()
}

pub fn norm_l2_squared(v: &Field) -> f64 {
    v.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * v.mesh().cell_volume()
}

pub fn norm_l2(v: &Field) -> f64 {
    norm_l2_squared(v).sqrt()
}

/// L2 norm of a real grid function.
pub fn norm_l2_real(v: &RealField) -> f64 {
    (v.values().iter().map(|x| x * x).sum::<f64>() * v.mesh().cell_volume()).sqrt()
}

/// `|v|_1`: root of the summed squared forward differences over all axes.
pub fn seminorm_h1(v: &Field) -> f64 {
    (0..v.mesh().dim())
        .map(|axis| norm_l2_squared(&forward_difference(v, axis).expect("axis within mesh")))
        .sum::<f64>()
        .sqrt()
}

/// Like [`seminorm_h1`] but drops the wrap-around difference on each axis,
/// so only pairs of neighbouring stored nodes contribute.
pub fn seminorm_h1_open(v: &Field) -> f64 {
    let mesh = v.mesh();
    let mut sum = 0.0;
    for axis in 0..mesh.dim() {
        let d = forward_difference(v, axis).expect("axis within mesh");
        let (stride, m) = (mesh.stride(axis), mesh.shape()[axis]);
        sum += d
            .values()
            .iter()
            .enumerate()
            .filter(|(lin, _)| (lin / stride) % m != m - 1)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>();
    }
    (sum * mesh.cell_volume()).sqrt()
}

pub fn norm_h1(v: &Field) -> f64 {
    let s = seminorm_h1(v);
    (norm_l2_squared(v) + s * s).sqrt()
}

pub fn norm_inf(v: &Field) -> f64 {
    v.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `||v||_A = sqrt(Re (A_h v, v))`.
pub fn norm_a(v: &Field) -> f64 {
    let re = inner(&apply_a_h(v), v).expect("same mesh").re;
    sqrt_clamped(re, norm_l2_squared(v))
}

/// `(A_h^{-1} Lambda_h w, w)` evaluated as a weighted sum over frequencies.
///
/// By Parseval, `sum_x |w|^2 = sum_k |w_hat(k)|^2 / len`.
pub fn quadratic_a_inv_lambda(w: &Field) -> f64 {
    let mesh = w.mesh();
    let spectral = mesh.spectral();
    let mut data = w.values().to_vec();
    spectral.forward(&mut data);
    let sum: f64 = data
        .iter()
        .zip(spectral.ratio())
        .map(|(z, q)| q * z.norm_sqr())
        .sum();
    sum * mesh.cell_volume() / mesh.len() as f64
}

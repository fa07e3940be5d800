//! Periodic uniform grids on boxes in R^N (N <= 3), fields sampled on them,
//! and the spectral calculus (FFT derivatives, quadrature, H^1 distance)
//! everything else is built on.
//!
//! Layout is row-major: the last dimension varies fastest. Box `j` is
//! `[-L_j, L_j)` sampled at `x_m = -L_j + m * dx_j`.

use std::fmt;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIMS: usize = 3;
pub const MIN_POINTS: usize = 16;

/// Serializable description of a periodic box grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-width `L_j` of the box in each dimension.
    pub extent: Vec<f64>,
    /// Number of samples `n_j` in each dimension (powers of two).
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn new(extent: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let spec = Self { extent, points };
        spec.validate()?;
        Ok(spec)
    }

    /// Same half-width and point count in every dimension.
    pub fn cube(dims: usize, half_width: f64, n: usize) -> Result<Self> {
        Self::new(vec![half_width; dims], vec![n; dims])
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.extent.len();
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidGrid(format!("dimension {dims} not in 1..=3")));
        }
        if self.points.len() != dims {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} point counts",
                dims,
                self.points.len()
            )));
        }
        for (j, (&l, &n)) in self.extent.iter().zip(&self.points).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("half-width L_{j} = {l} must be > 0")));
            }
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "n_{j} = {n} must be a power of two >= {MIN_POINTS}"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.extent.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extent[axis] / self.points[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dims())
            .map(|j| self.spacing(j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight `prod dx_j`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|j| self.spacing(j)).product()
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().map(|l| 2.0 * l).product()
    }

    pub fn coordinate(&self, axis: usize, m: usize) -> f64 {
        -self.extent[axis] + m as f64 * self.spacing(axis)
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis])
            .map(|m| self.coordinate(axis, m))
            .collect()
    }

    pub fn build(self) -> Result<Grid> {
        Grid::new(self)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.dims() {
            if j > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[-{}, {}) n={}", self.extent[j], self.extent[j], self.points[j])?;
        }
        Ok(())
    }
}

/// Per-dimension angular wave numbers for the `[-L, L)` box.
#[derive(Clone, Debug)]
pub struct WaveNumbers {
    axes: Vec<Vec<f64>>,
}

impl WaveNumbers {
    pub fn new(spec: &GridSpec) -> Self {
        let axes = (0..spec.dims())
            .map(|j| {
                let n = spec.points[j] as i64;
                let dk = std::f64::consts::PI / spec.extent[j];
                (0..n)
                    .map(|m| if m < n / 2 { m } else { m - n })
                    .map(|m| m as f64 * dk)
                    .collect()
            })
            .collect();
        Self { axes }
    }

    pub fn axis(&self, j: usize) -> &[f64] {
        &self.axes[j]
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }
}

struct Spectral {
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    waves: WaveNumbers,
    /// Wave numbers for odd derivatives: the Nyquist mode is dropped.
    deriv: Vec<Vec<f64>>,
    /// `|k|^2` at every flat index.
    k_squared: Vec<f64>,
}

impl Spectral {
    fn new(spec: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = spec.points.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = spec.points.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let waves = WaveNumbers::new(spec);
        let deriv = (0..spec.dims())
            .map(|j| {
                let mut k = waves.axis(j).to_vec();
                k[spec.points[j] / 2] = 0.0;
                k
            })
            .collect();
        let strides = strides(&spec.points);
        let k_squared = (0..spec.len())
            .map(|flat| {
                (0..spec.dims())
                    .map(|j| waves.axis(j)[(flat / strides[j]) % spec.points[j]].powi(2))
                    .sum()
            })
            .collect();
        Self {
            forward,
            inverse,
            waves,
            deriv,
            k_squared,
        }
    }

    fn transform(&self, points: &[usize], data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let dims = points.len();
        let strides = strides(points);
        for axis in 0..dims {
            let n = points[axis];
            let plan = &plans[axis];
            if axis == dims - 1 {
                plan.process(data);
                continue;
            }
            let stride = strides[axis];
            let outer = data.len() / (n * stride);
            let mut line = vec![Complex64::default(); n];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for o in 0..outer {
                for i in 0..stride {
                    let base = o * n * stride + i;
                    for (m, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, v) in line.iter().enumerate() {
                        data[base + m * stride] = *v;
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / data.len() as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

fn strides(points: &[usize]) -> [usize; MAX_DIMS] {
    let mut s = [1usize; MAX_DIMS];
    for j in (0..points.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * points[j + 1];
    }
    s
}

struct GridInner {
    spec: GridSpec,
    strides: [usize; MAX_DIMS],
    spectral: OnceLock<Spectral>,
}

/// Shared handle to a validated grid plus its lazily planned transforms.
///
/// Cloning is cheap; fields keep a `Grid` so that operations can check they
/// were sampled on the same box.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Grid").field(&self.0.spec).finish()
    }
}

impl std::ops::Deref for Grid {
    type Target = GridSpec;

    fn deref(&self) -> &GridSpec {
        &self.0.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let strides = strides(&spec.points);
        Ok(Self(Arc::new(GridInner {
            spec,
            strides,
            spectral: OnceLock::new(),
        })))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.0.spec
    }

    pub fn same(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIMS] {
        let mut idx = [0; MAX_DIMS];
        for (j, slot) in idx.iter_mut().enumerate().take(self.dims()) {
            *slot = (flat / self.0.strides[j]) % self.points[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.0.strides).map(|(i, s)| i * s).sum()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.0.strides[axis]
    }

    /// Physical coordinates of a flat index; unused trailing slots are zero.
    pub fn position(&self, flat: usize) -> [f64; MAX_DIMS] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIMS];
        for j in 0..self.dims() {
            x[j] = self.coordinate(j, idx[j]);
        }
        x
    }

    pub fn wavenumbers(&self) -> &WaveNumbers {
        &self.spectral().waves
    }

    /// `|k|^2` at every flat index of the transform layout.
    pub fn k_squared(&self) -> &[f64] {
        &self.spectral().k_squared
    }

    fn spectral(&self) -> &Spectral {
        self.0.spectral.get_or_init(|| Spectral::new(&self.0.spec))
    }

    /// In-place forward DFT (unnormalized).
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.spectral().transform(&self.points, data, false);
    }

    /// In-place inverse DFT, normalized so that `inverse(forward(f)) == f`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.spectral().transform(&self.points, data, true);
    }

    /// Transform, multiply mode-wise by `multiplier(flat)`, transform back.
    pub fn apply_multiplier(
        &self,
        values: &[Complex64],
        multiplier: impl Fn(usize) -> Complex64,
    ) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.forward(&mut data);
        data.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v *= multiplier(i));
        self.inverse(&mut data);
        data
    }

    /// Wave number used for first derivatives (Nyquist mode zeroed).
    pub fn derivative_wavenumber(&self, axis: usize, flat: usize) -> f64 {
        let spectral = self.spectral();
        spectral.deriv[axis][(flat / self.0.strides[axis]) % self.points[axis]]
    }

    fn for_each_position(&self, mut f: impl FnMut(usize, &[f64])) {
        let dims = self.dims();
        let mut x = [0.0; MAX_DIMS];
        for flat in 0..self.len() {
            let idx = self.multi_index(flat);
            for j in 0..dims {
                x[j] = self.coordinate(j, idx[j]);
            }
            f(flat, &x[..dims]);
        }
    }
}

fn check_finite<T: Copy>(values: &[T], finite: impl Fn(T) -> bool) -> Result<()> {
    match values.iter().position(|&v| !finite(v)) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Complex samples of a wave field on a grid.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values, |v: Complex64| v.is_finite())?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Samples `f` at every grid point; `f` receives a slice of length N.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_position(|_, x| values.push(f(x)));
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Mutable access for in-place propagation. Callers are responsible for
    /// keeping the entries finite.
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn modulus(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm()).collect(),
        }
    }

    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn real_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise multiplication by `g(x)`.
    pub fn modulated(&self, mut g: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut out = self.clone();
        self.grid
            .for_each_position(|i, x| out.values[i] = self.values[i] * g(x));
        out
    }

    /// `f(x - shift)` by exact spectral translation on the periodic box.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let waves = self.grid.wavenumbers().clone();
        let grid = self.grid.clone();
        let values = self.grid.apply_multiplier(&self.values, |flat| {
            let idx = grid.multi_index(flat);
            let phase: f64 = shift
                .iter()
                .enumerate()
                .map(|(j, s)| waves.axis(j)[idx[j]] * s)
                .sum();
            Complex64::from_polar(1.0, -phase)
        });
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt()
    }
}

/// Real samples on a grid (moduli, densities, profiles).
#[derive(Clone, Debug)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values, f64::is_finite)?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        grid.for_each_position(|_, x| values.push(f(x)));
        Self {
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise `f(x, value)`.
    pub fn map_with_position(&self, mut f: impl FnMut(&[f64], f64) -> f64) -> Self {
        let mut out = self.clone();
        self.grid
            .for_each_position(|i, x| out.values[i] = f(x, self.values[i]));
        out
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    }
}

fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.same(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Rectangle-rule quadrature on the periodic grid: `prod dx_j * sum f`.
pub fn integrate(f: &RealField) -> f64 {
    f.grid.cell_volume() * f.values.iter().sum::<f64>()
}

/// `integral |f|^2`.
pub fn norm_sq(f: &ComplexField) -> f64 {
    f.grid.cell_volume() * f.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// `integral |f|^2` for a real field.
pub fn norm_sq_real(f: &RealField) -> f64 {
    f.grid.cell_volume() * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// L^2 pairing `integral conj(f) g`.
pub fn inner(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    same_grid(&f.grid, &g.grid)?;
    let s: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * f.grid.cell_volume())
}

/// Spectral partial derivatives `d f / d x_j`, one field per dimension.
pub fn gradient(f: &ComplexField) -> Vec<ComplexField> {
    let grid = &f.grid;
    let mut spectrum = f.values.clone();
    grid.forward(&mut spectrum);
    (0..grid.dims())
        .map(|axis| {
            let mut d: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::new(0.0, grid.derivative_wavenumber(axis, i)))
                .collect();
            grid.inverse(&mut d);
            ComplexField {
                grid: grid.clone(),
                values: d,
            }
        })
        .collect()
}

/// Gradient of a real field; the imaginary roundoff is dropped.
pub fn gradient_real(f: &RealField) -> Vec<RealField> {
    gradient(&f.to_complex())
        .into_iter()
        .map(|g| g.real_part())
        .collect()
}

/// Spectral Laplacian: multiplier `-|k|^2`.
pub fn laplacian(f: &ComplexField) -> ComplexField {
    let grid = &f.grid;
    let ksq = grid.k_squared();
    let values = grid.apply_multiplier(&f.values, |i| Complex64::new(-ksq[i], 0.0));
    ComplexField {
        grid: grid.clone(),
        values,
    }
}

pub fn laplacian_real(f: &RealField) -> RealField {
    laplacian(&f.to_complex()).real_part()
}

/// `integral |grad f|^2` computed in transform space (Parseval).
pub fn dirichlet_energy(f: &ComplexField) -> f64 {
    let grid = &f.grid;
    let mut spectrum = f.values.clone();
    grid.forward(&mut spectrum);
    let k2: f64 = spectrum
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let kd: f64 = (0..grid.dims())
                .map(|a| grid.derivative_wavenumber(a, i).powi(2))
                .sum();
            kd * v.norm_sqr()
        })
        .sum();
    k2 * grid.cell_volume() / grid.len() as f64
}

/// `sqrt(||f - g||^2 + ||grad(f - g)||^2)`.
pub fn h1_distance(f: &ComplexField, g: &ComplexField) -> Result<f64> {
    let d = f.sub(g)?;
    Ok((norm_sq(&d) + dirichlet_energy(&d)).sqrt())
}

pub fn h1_norm(f: &ComplexField) -> f64 {
    (norm_sq(f) + dirichlet_energy(f)).sqrt()
}

/// `integral |f|^2` evaluated from the transform coefficients.
pub fn spectral_norm_sq(f: &ComplexField) -> f64 {
    let mut spectrum = f.values.clone();
    f.grid.forward(&mut spectrum);
    spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid.cell_volume()
        / f.grid.len() as f64
}

const SNAPSHOT_MAGIC: &[u8; 5] = b"NSEF1";

/// A field as stored on disk.
#[derive(Clone, Debug)]
pub enum Snapshot {
    Real(RealField),
    Complex(ComplexField),
}

impl Snapshot {
    pub fn grid(&self) -> &Grid {
        match self {
            Snapshot::Real(f) => f.grid(),
            Snapshot::Complex(f) => f.grid(),
        }
    }
}

/// Writes `magic | dims:u32 | n_j:u64.. | L_j:f64.. | kind:u8 | values:f64..`,
/// all little-endian; complex values are interleaved `re, im`.
pub fn write_snapshot(mut w: impl Write, snapshot: &Snapshot) -> Result<()> {
    let grid = snapshot.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(grid.dims() as u32).to_le_bytes())?;
    for &n in &grid.points {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in &grid.extent {
        w.write_all(&l.to_le_bytes())?;
    }
    match snapshot {
        Snapshot::Real(f) => {
            w.write_all(&[0u8])?;
            for v in f.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Snapshot::Complex(f) => {
            w.write_all(&[1u8])?;
            for v in f.values() {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(mut r: impl Read) -> Result<Snapshot> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dims = u32::from_le_bytes(b4) as usize;
    if dims == 0 || dims > MAX_DIMS {
        return Err(Error::Format(format!("dimension {dims}")));
    }
    let mut points = Vec::with_capacity(dims);
    for _ in 0..dims {
        r.read_exact(&mut b8)?;
        points.push(u64::from_le_bytes(b8) as usize);
    }
    let mut extent = Vec::with_capacity(dims);
    for _ in 0..dims {
        r.read_exact(&mut b8)?;
        extent.push(f64::from_le_bytes(b8));
    }
    let grid = GridSpec::new(extent, points)?.build()?;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let mut next = || -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    match kind[0] {
        0 => {
            let values = (0..grid.len()).map(|_| next()).collect::<Result<Vec<_>>>()?;
            Ok(Snapshot::Real(RealField::new(&grid, values)?))
        }
        1 => {
            let values = (0..grid.len())
                .map(|_| Ok(Complex64::new(next()?, next()?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Snapshot::Complex(ComplexField::new(&grid, values)?))
        }
        k => Err(Error::Format(format!("unknown field kind {k}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(l: f64, n: usize) -> Grid {
        GridSpec::cube(1, l, n).unwrap().build().unwrap()
    }

    fn sech(x: f64) -> f64 {
        1.0 / x.cosh()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(vec![1.0], vec![100]).is_err());
        assert!(GridSpec::new(vec![1.0], vec![8]).is_err());
        assert!(GridSpec::new(vec![-1.0], vec![16]).is_err());
        assert!(GridSpec::new(vec![1.0; 4], vec![16; 4]).is_err());
        assert!(GridSpec::new(vec![1.0, 2.0], vec![16]).is_err());
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = line(1.0, 16);
        assert!(RealField::new(&g, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(RealField::new(&g, v), Err(Error::NonFinite(3))));
    }

    #[test]
    fn wavenumbers_have_single_zero_mode() {
        let g = GridSpec::new(vec![4.0, 2.0], vec![32, 16]).unwrap().build().unwrap();
        let w = g.wavenumbers();
        for j in 0..2 {
            assert_eq!(w.axis(j).len(), g.points[j]);
            assert_eq!(w.axis(j).iter().filter(|&&k| k == 0.0).count(), 1);
        }
    }

    #[test]
    fn integrate_constant_is_volume() {
        let g = line(8.0, 256);
        let one = RealField::from_fn(&g, |_| 1.0);
        assert!((integrate(&one) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_sech_squared() {
        let g = line(20.0, 1024);
        let f = RealField::from_fn(&g, |x| sech(x[0]).powi(2));
        assert!((integrate(&f) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_odd_function_vanishes() {
        let g = line(10.0, 512);
        // Odd about the box center, including the periodic seam at -L.
        let f = RealField::from_fn(&g, |x| x[0] * (-x[0] * x[0]).exp());
        assert!(integrate(&f).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_fourier_mode() {
        let g = line(4.0, 64);
        let k = 5.0 * std::f64::consts::PI / 4.0;
        let f = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let d = &gradient(&f)[0];
        for (a, b) in d.values().iter().zip(f.values()) {
            assert!((a - Complex64::new(0.0, k) * b).norm() < 1e-12);
        }
        let lap = laplacian(&f);
        for (a, b) in lap.values().iter().zip(f.values()) {
            assert!((a + k * k * b).norm() < 1e-11);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = GridSpec::cube(2, 3.0, 32).unwrap().build().unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(2.5, -1.0));
        for d in gradient(&f) {
            assert!(d.sup_norm() < 1e-13);
        }
    }

    #[test]
    fn sech_derivatives() {
        let g = line(20.0, 1024);
        let f = RealField::from_fn(&g, |x| sech(x[0]));
        let d = &gradient_real(&f)[0];
        let lap = laplacian_real(&f);
        for i in 0..g.len() {
            let x = g.position(i)[0];
            if x.abs() <= 10.0 {
                let s = sech(x);
                assert!((d.values()[i] + s * x.tanh()).abs() < 1e-10);
                assert!((lap.values()[i] - (s - 2.0 * s.powi(3))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_commutes_with_gradient() {
        let g = GridSpec::new(vec![6.0, 5.0], vec![32, 64]).unwrap().build().unwrap();
        let f = ComplexField::from_fn(&g, |x| {
            Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp(), (-(x[0] - 0.5).powi(2)).exp() * (-x[1] * x[1]).exp())
        });
        let a = gradient(&laplacian(&f));
        let b: Vec<_> = gradient(&f).iter().map(laplacian).collect();
        for (u, v) in a.iter().zip(&b) {
            assert!(u.sub(v).unwrap().sup_norm() < 1e-10);
        }
    }

    #[test]
    fn h1_distance_of_sech_to_zero() {
        let g = line(20.0, 1024);
        let f = RealField::from_fn(&g, |x| sech(x[0])).to_complex();
        let z = ComplexField::zeros(&g);
        let d = h1_distance(&f, &z).unwrap();
        assert!((d - (2.0f64 + 2.0 / 3.0).sqrt()).abs() < 1e-8);
        assert!(h1_distance(&f, &f).unwrap() == 0.0);
        assert_eq!(h1_distance(&z, &f).unwrap(), d);
    }

    #[test]
    fn translation_is_exact_for_band_limited_shift() {
        let g = line(20.0, 512);
        let f = RealField::from_fn(&g, |x| sech(2.0 * x[0])).to_complex();
        let shifted = f.translated(&[1.5]);
        let expected = RealField::from_fn(&g, |x| sech(2.0 * (x[0] - 1.5))).to_complex();
        assert!(shifted.sub(&expected).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn three_dimensional_laplacian_of_gaussian() {
        let g = GridSpec::cube(3, 5.0, 32).unwrap().build().unwrap();
        let f = RealField::from_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let lap = laplacian_real(&f);
        let exact = RealField::from_fn(&g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (4.0 * r2 - 6.0) * (-r2).exp()
        });
        let err = lap
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn snapshot_rejects_bad_magic() {
        let bytes = b"NOPE1\x01\x00\x00\x00".to_vec();
        assert!(matches!(read_snapshot(&bytes[..]), Err(Error::Format(_))));
    }

    #[test]
    fn snapshot_layout_is_bit_exact() {
        let g = line(2.0, 16);
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x[0], -x[0]));
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &Snapshot::Complex(f.clone())).unwrap();
        assert_eq!(&buf[..5], b"NSEF1");
        assert_eq!(u32::from_le_bytes(buf[5..9].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[9..17].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[17..25].try_into().unwrap()), 2.0);
        assert_eq!(buf[25], 1);
        assert_eq!(buf.len(), 26 + 16 * 16);
        assert_eq!(f64::from_le_bytes(buf[26..34].try_into().unwrap()), -2.0);
        assert_eq!(f64::from_le_bytes(buf[34..42].try_into().unwrap()), 2.0);
        match read_snapshot(&buf[..]).unwrap() {
            Snapshot::Complex(back) => assert_eq!(back.values(), f.values()),
            Snapshot::Real(_) => panic!("kind lost"),
        }
    }
}

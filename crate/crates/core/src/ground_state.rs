//! Constrained minimization of the internal energy on the charge sphere in
//! rescaled (`h = 1`) units, the 1D cubic `sech` oracle, and resampling of
//! the rescaled profile onto physical grids.
//!
//! Convention: the minimizer solves `-ΔU + W'(U) = 2 mu U` with `mu < 0`,
//! and the corresponding standing wave rotates as `exp(-i mu t / h^{alpha+1})`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, Grid, GridSpec, RealField, MAX_DIMS};
use crate::physics::{ModelParams, Nonlinearity};

/// A minimizer of `J_1` on `{||u|| = sigma}`.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub profile: RealField,
    pub mu: f64,
    /// `J_1(U)`, the estimate of the minimum level `m`.
    pub energy: f64,
    pub residual: f64,
    pub sigma: f64,
    pub iterations: usize,
}

/// JSON sidecar stored next to the profile snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateMeta {
    pub sigma: f64,
    pub mu: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub grid: GridSpec,
}

impl GroundState {
    pub fn meta(&self) -> GroundStateMeta {
        GroundStateMeta {
            sigma: self.sigma,
            mu: self.mu,
            energy: self.energy,
            residual: self.residual,
            iterations: self.iterations,
            grid: self.profile.grid().spec().clone(),
        }
    }

    pub fn from_parts(profile: RealField, meta: &GroundStateMeta) -> Result<Self> {
        if profile.grid().spec() != &meta.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            profile,
            mu: meta.mu,
            energy: meta.energy,
            residual: meta.residual,
            sigma: meta.sigma,
            iterations: meta.iterations,
        })
    }

    /// Half-width at `1/e` of the peak, measured along the first axis
    /// through the maximum (linear interpolation between samples).
    pub fn half_width(&self) -> f64 {
        let grid = self.profile.grid();
        let values = self.profile.values();
        let peak_at = self.profile.argmax();
        let peak = values[peak_at];
        let level = peak / std::f64::consts::E;
        let idx = grid.multi_index(peak_at);
        let stride = grid.stride(0);
        let n = grid.points[0];
        let dx = grid.spacing(0);
        let mut prev = peak;
        for step in 1..n / 2 {
            let i = (idx[0] + step) % n;
            let v = values[peak_at - idx[0] * stride + i * stride];
            if v <= level {
                let frac = (prev - level) / (prev - v);
                return (step as f64 - 1.0 + frac) * dx;
            }
            prev = v;
        }
        grid.extent[0]
    }

    /// Samples `U((x - center) / scale)` on `grid` by band-limited
    /// interpolation of the stored profile. Points that map outside the
    /// rescaled box get zero.
    pub fn resample(&self, grid: &Grid, center: &[f64], scale: f64) -> Result<RealField> {
        let src = self.profile.grid();
        let dims = src.dims();
        if grid.dims() != dims || center.len() != dims {
            return Err(Error::InvalidArgument("dimension mismatch in resampling".into()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {scale} must be > 0")));
        }
        // Separable: contract one source axis at a time.
        let mut shape: Vec<usize> = src.points.clone();
        let mut data = self.profile.values().to_vec();
        for axis in 0..dims {
            let targets: Vec<f64> = grid
                .axis(axis)
                .iter()
                .map(|x| (x - center[axis]) / scale)
                .collect();
            let weights = interpolation_weights(src, axis, &targets);
            let n_in = shape[axis];
            let n_out = targets.len();
            let inner: usize = shape[axis + 1..].iter().product();
            let outer: usize = shape[..axis].iter().product();
            let mut out = vec![0.0; outer * n_out * inner];
            for o in 0..outer {
                for (t, row) in weights.iter().enumerate() {
                    let Some(row) = row else { continue };
                    let dst = &mut out[(o * n_out + t) * inner..(o * n_out + t + 1) * inner];
                    for (m, w) in row.iter().enumerate() {
                        if *w == 0.0 {
                            continue;
                        }
                        let s = &data[(o * n_in + m) * inner..(o * n_in + m + 1) * inner];
                        for (d, v) in dst.iter_mut().zip(s) {
                            *d += w * v;
                        }
                    }
                }
            }
            shape[axis] = n_out;
            data = out;
        }
        RealField::new(grid, data)
    }
}

/// Trigonometric interpolation weights along one axis of `src` for each
/// target coordinate; `None` for targets outside the box.
fn interpolation_weights(src: &GridSpec, axis: usize, targets: &[f64]) -> Vec<Option<Vec<f64>>> {
    let n = src.points[axis];
    let l = src.extent[axis];
    let dx = src.spacing(axis);
    targets
        .iter()
        .map(|&xi| {
            if xi < -l || xi >= l {
                return None;
            }
            let row = (0..n)
                .map(|m| {
                    let y = xi - src.coordinate(axis, m);
                    let theta = std::f64::consts::PI * y / l;
                    if (y / dx).abs() < 1e-12 {
                        1.0
                    } else {
                        // Periodic sinc with the Nyquist mode split evenly.
                        (0.5 * n as f64 * theta).sin() / ((n as f64) * (0.5 * theta).tan())
                    }
                })
                .collect();
            Some(row)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    /// Initial pseudo-time step.
    pub dtau: f64,
    /// Stop when `||u_{n+1} - u_n||_inf / dtau` drops below this...
    pub tol: f64,
    /// ...and the Euler-Lagrange residual is below this.
    pub tol_r: f64,
    pub max_iter: usize,
    /// Starting profile; a centered unit-width Gaussian when `None`.
    pub init: Option<RealField>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            dtau: 0.1,
            tol: 1e-9,
            tol_r: 1e-6,
            max_iter: 50_000,
            init: None,
        }
    }
}

/// `J_1(u) = int |grad u|^2 / 2 + W(u)`.
pub fn rescaled_energy(u: &RealField, nl: &Nonlinearity) -> f64 {
    let kinetic = 0.5 * field::dirichlet_energy(&u.to_complex());
    let potential = field::integrate(&u.map(|s| nl.w(s.abs())));
    kinetic + potential
}

/// `W'(u)` extended oddly so that sign errors show up instead of vanishing.
fn w_prime_signed(nl: &Nonlinearity, u: f64) -> f64 {
    nl.w_prime(u.abs()) * u.signum()
}

/// `2 mu = (int |grad U|^2 + int W'(U) U) / int U^2`.
pub fn lagrange_multiplier(u: &RealField, nl: &Nonlinearity) -> Result<f64> {
    let mass = field::norm_sq_real(u);
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("multiplier of a zero-charge profile".into()));
    }
    let grad = field::dirichlet_energy(&u.to_complex());
    let pairing = field::integrate(&u.map(|s| w_prime_signed(nl, s) * s));
    Ok(0.5 * (grad + pairing) / mass)
}

/// `|| -ΔU + W'(U) - 2 mu U ||_{L^2}`.
pub fn residual(u: &RealField, mu: f64, nl: &Nonlinearity) -> f64 {
    let lap = field::laplacian_real(u);
    let defect: Vec<f64> = lap
        .values()
        .iter()
        .zip(u.values())
        .map(|(l, &s)| -l + w_prime_signed(nl, s) - 2.0 * mu * s)
        .collect();
    let cell = u.grid().cell_volume();
    (defect.iter().map(|d| d * d).sum::<f64>() * cell).sqrt()
}

fn normalize(u: &mut RealField, sigma: f64) -> f64 {
    let norm = field::norm_sq_real(u).sqrt();
    if norm > 0.0 {
        let s = sigma / norm;
        u.values_mut().iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// Normalized gradient flow for `min J_1` on `||u|| = sigma`.
///
/// Each step solves `(1 - dtau Δ/2) u* = u - dtau (W'(u)/2 - mu_n u)` in
/// transform space and projects back onto the sphere. Keeping `mu_n u` in
/// the explicit part makes the Euler-Lagrange solution an exact fixed point
/// of the step. `dtau` is halved whenever the energy would increase.
pub fn minimize(nl: &Nonlinearity, grid: &Grid, sigma: f64, opts: &MinimizeOptions) -> Result<GroundState> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be > 0")));
    }
    let mut u = match &opts.init {
        Some(init) => {
            if !init.grid().same(grid) {
                return Err(Error::GridMismatch);
            }
            init.clone()
        }
        None => RealField::from_fn(grid, |x| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()),
    };
    if normalize(&mut u, sigma) == 0.0 {
        return Err(Error::Collapse(0));
    }
    let ksq = grid.k_squared().to_vec();
    let mut dtau = opts.dtau;
    let mut energy = rescaled_energy(&u, nl);
    let drift = 1e-13;

    for iter in 1..=opts.max_iter {
        let mu = lagrange_multiplier(&u, nl)?;
        let mut rhs: Vec<Complex64> = u
            .values()
            .iter()
            .map(|&s| Complex64::new(s - dtau * (0.5 * w_prime_signed(nl, s) - mu * s), 0.0))
            .collect();
        grid.forward(&mut rhs);
        rhs.iter_mut()
            .zip(&ksq)
            .for_each(|(c, k2)| *c /= 1.0 + 0.5 * dtau * k2);
        grid.inverse(&mut rhs);
        let mut next = RealField::new(grid, rhs.iter().map(|c| c.re).collect())?;
        let norm = normalize(&mut next, sigma);
        if !(norm > 1e-300) {
            return Err(Error::Collapse(iter));
        }
        let next_energy = rescaled_energy(&next, nl);
        if next_energy > energy + drift * energy.abs().max(1.0) {
            dtau *= 0.5;
            if dtau < 1e-10 {
                return Err(Error::NotConverged {
                    iterations: iter,
                    step: f64::NAN,
                    residual: residual(&u, mu, nl),
                });
            }
            continue;
        }
        let peak = next.max();
        if next.min() < -1e-8 * peak {
            return Err(Error::PositivityLost(iter));
        }
        let step = next
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / dtau;
        u = next;
        energy = next_energy;
        if step < opts.tol {
            let mu = lagrange_multiplier(&u, nl)?;
            let res = residual(&u, mu, nl);
            if res < opts.tol_r {
                if energy >= 0.0 {
                    return Err(Error::Spreading(energy));
                }
                return Ok(GroundState {
                    profile: u,
                    mu,
                    energy,
                    residual: res,
                    sigma,
                    iterations: iter,
                });
            }
        }
        if iter == opts.max_iter {
            let mu = lagrange_multiplier(&u, nl)?;
            return Err(Error::NotConverged {
                iterations: iter,
                step,
                residual: residual(&u, mu, nl),
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        step: f64::NAN,
        residual: f64::NAN,
    })
}

/// Closed-form 1D cubic (`W = -s^4/2`) ground state at charge `sigma^2`:
/// `U = eta sech(eta x)` with `eta = sigma^2/2`, `mu = -eta^2/2`,
/// `J = -eta^3/3`.
pub fn analytic_sech(sigma: f64, grid: &Grid) -> Result<GroundState> {
    if grid.dims() != 1 {
        return Err(Error::InvalidArgument("the sech oracle is one-dimensional".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be > 0")));
    }
    let eta = 0.5 * sigma * sigma;
    let profile = RealField::from_fn(grid, |x| eta / (eta * x[0]).cosh());
    let mu = -0.5 * eta * eta;
    let res = residual(&profile, mu, &Nonlinearity::cubic());
    Ok(GroundState {
        profile,
        mu,
        energy: -eta.powi(3) / 3.0,
        residual: res,
        sigma,
        iterations: 0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailReport {
    /// Fitted `r` in `U ~ C exp(-r |x|)` over the outer region.
    pub decay_rate: f64,
    pub prefactor: f64,
    /// `max (C e^{-r|x|} / U)` at the inner edge: how loosely the bound fits.
    pub looseness: f64,
    pub samples: usize,
    pub passed: bool,
}

pub const TAIL_MIN_RATE: f64 = 0.5;

/// Fits `log U` against `-|x - x_peak|` over the outer half of the radius
/// (the two outer quarters of each axis) and checks for exponential decay.
pub fn tail_check(u: &RealField) -> TailReport {
    let grid = u.grid();
    let dims = grid.dims();
    let peak_at = u.argmax();
    let peak = u.values()[peak_at];
    let center = grid.position(peak_at);
    let radius = grid.extent.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 1e-13 * peak;
    let mut pts = Vec::new();
    for (i, &v) in u.values().iter().enumerate() {
        let x = grid.position(i);
        let r = (0..dims)
            .map(|j| {
                let l = grid.extent[j];
                let d = (x[j] - center[j] + l).rem_euclid(2.0 * l) - l;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if r >= 0.5 * radius && r < radius && v > floor {
            pts.push((r, v.ln()));
        }
    }
    let n = pts.len() as f64;
    if pts.len() < 4 {
        return TailReport {
            decay_rate: f64::INFINITY,
            prefactor: 0.0,
            looseness: 1.0,
            samples: pts.len(),
            passed: true,
        };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    let log_c = pts
        .iter()
        .map(|p| p.1 + rate * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let r_in = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let looseness = pts
        .iter()
        .filter(|p| p.0 <= r_in + 1e-12)
        .map(|p| (log_c - rate * p.0 - p.1).exp())
        .fold(1.0, f64::max);
    TailReport {
        decay_rate: rate,
        prefactor: log_c.exp(),
        looseness,
        samples: pts.len(),
        passed: rate >= TAIL_MIN_RATE && looseness <= 10.0,
    }
}

/// `U(x / h^beta)` on the physical grid.
pub fn rescale_to_physical(gs: &GroundState, params: &ModelParams, grid_phys: &Grid) -> Result<RealField> {
    let dims = grid_phys.dims();
    let center = [0.0; MAX_DIMS];
    let out = gs.resample(grid_phys, &center[..dims], params.width_scale())?;
    let expected = params.physical_charge(dims) * (field::norm_sq_real(&gs.profile) / (gs.sigma * gs.sigma));
    let got = field::norm_sq_real(&out);
    if (got / expected - 1.0).abs() > 1e-6 {
        return Err(Error::Unresolved {
            dx: grid_phys.min_spacing(),
            required: f64::NAN,
        });
    }
    Ok(out)
}

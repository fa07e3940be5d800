//! Functionals of the wave field: conserved quantities, the internal /
//! dynamical energy split, barycenter and its time derivatives, the
//! Newtonian defect `H_h`, concentration statistics, orbital distance and
//! the hydrodynamic (Madelung) diagnostics.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, Grid, RealField, MAX_DIMS};
use crate::ground_state::{rescale_to_physical, GroundState};
use crate::physics::{ModelParams, Nonlinearity, Potential};

/// Relative density threshold below which phase-derived quantities are
/// not evaluated.
pub const EPS_MASK: f64 = 1e-12;

/// Default concentration radius in units of `h^beta`.
pub const DEFAULT_RHAT: f64 = 10.0;

/// `int |psi|^2`.
pub fn charge(psi: &ComplexField) -> f64 {
    field::norm_sq(psi)
}

/// `J_h(u) = int (h^2/2)|grad u|^2 + h^{-alpha} W(u)` for a modulus field.
pub fn internal_energy(u: &RealField, params: &ModelParams, nl: &Nonlinearity) -> f64 {
    let h = params.h;
    let grad = field::dirichlet_energy(&u.to_complex());
    let w = field::integrate(&u.map(|s| nl.w(s.abs())));
    0.5 * h * h * grad + h.powf(-params.alpha) * w
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergySplit {
    pub total: f64,
    pub internal: f64,
    pub dynamical: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Fraction of the charge in cells excluded from the current mask.
    pub masked_fraction: f64,
}

fn current(psi: &ComplexField, h: f64) -> (Vec<ComplexField>, Vec<Vec<f64>>) {
    let grads = field::gradient(psi);
    let p = grads
        .iter()
        .map(|g| {
            psi.values()
                .iter()
                .zip(g.values())
                .map(|(a, b)| h * (a.conj() * b).im)
                .collect()
        })
        .collect();
    (grads, p)
}

fn mask(psi: &ComplexField, eps: f64) -> Vec<bool> {
    let dens: Vec<f64> = psi.values().iter().map(|v| v.norm_sqr()).collect();
    let max = dens.iter().copied().fold(0.0, f64::max);
    dens.iter().map(|&d| d >= eps * max && d > 0.0).collect()
}

/// `E = J + G` with `G = G_kin + G_pot`.
///
/// `G_kin = (1/2) int |p|^2 / u^2` uses the current `p = h Im(conj(psi) grad psi)`
/// on the mask `u^2 >= EPS_MASK max u^2`; `J` is recovered as `E - G`.
pub fn energy_split(psi: &ComplexField, params: &ModelParams, nl: &Nonlinearity, pot: &Potential) -> EnergySplit {
    let h = params.h;
    let grid = psi.grid();
    let cell = grid.cell_volume();
    let (grads, p) = current(psi, h);
    let grad_sq: f64 = grads.iter().map(field::norm_sq).sum();
    let w = field::integrate(&psi.modulus().map(|s| nl.w(s)));
    let potential = potential_moment(psi, pot);
    let total = 0.5 * h * h * grad_sq + h.powf(-params.alpha) * w + potential;

    let m = mask(psi, EPS_MASK);
    let mut kinetic = 0.0;
    let mut masked = 0.0;
    let mut mass = 0.0;
    for (i, v) in psi.values().iter().enumerate() {
        let d = v.norm_sqr();
        mass += d;
        if m[i] {
            let p2: f64 = p.iter().map(|pj| pj[i] * pj[i]).sum();
            kinetic += p2 / d;
        } else {
            masked += d;
        }
    }
    kinetic *= 0.5 * cell;
    let dynamical = kinetic + potential;
    EnergySplit {
        total,
        internal: total - dynamical,
        dynamical,
        kinetic,
        potential,
        masked_fraction: if mass > 0.0 { masked / mass } else { 0.0 },
    }
}

/// `int V |psi|^2`.
pub fn potential_moment(psi: &ComplexField, pot: &Potential) -> f64 {
    if pot.is_zero() {
        return 0.0;
    }
    let grid = psi.grid();
    let dims = grid.dims();
    psi.values()
        .iter()
        .enumerate()
        .map(|(i, v)| pot.value(&grid.position(i)[..dims]) * v.norm_sqr())
        .sum::<f64>()
        * grid.cell_volume()
}

/// `sup |grad S|` over the mask `|psi|^2 >= eps max |psi|^2`, with
/// `grad S = h Im(conj(psi) grad psi) / |psi|^2`.
pub fn phase_gradient_sup(psi: &ComplexField, h: f64, eps: f64) -> f64 {
    let (_, p) = current(psi, h);
    let m = mask(psi, eps);
    psi.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| m[*i])
        .map(|(i, v)| p.iter().map(|pj| pj[i] * pj[i]).sum::<f64>().sqrt() / v.norm_sqr())
        .fold(0.0, f64::max)
}

/// `P_j = h Im int (d_j psi) conj(psi)`.
pub fn momentum(psi: &ComplexField, h: f64) -> Vec<f64> {
    let cell = psi.grid().cell_volume();
    field::gradient(psi)
        .iter()
        .map(|g| {
            h * cell
                * g.values()
                    .iter()
                    .zip(psi.values())
                    .map(|(d, v)| (d * v.conj()).im)
                    .sum::<f64>()
        })
        .collect()
}

/// Fraction of the charge sitting in the first or last cell layer of any
/// axis. The barycenter of a periodic field is meaningful only when this is
/// negligible.
pub fn boundary_mass_fraction(psi: &ComplexField) -> f64 {
    let grid = psi.grid();
    let dims = grid.dims();
    let mut edge = 0.0;
    let mut total = 0.0;
    for (i, v) in psi.values().iter().enumerate() {
        let d = v.norm_sqr();
        total += d;
        let idx = grid.multi_index(i);
        if (0..dims).any(|j| idx[j] == 0 || idx[j] + 1 == grid.points[j]) {
            edge += d;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

pub const BOUNDARY_MASS_LIMIT: f64 = 1e-10;

/// `q = int x |psi|^2 / int |psi|^2`.
pub fn barycenter(psi: &ComplexField) -> Result<Vec<f64>> {
    let frac = boundary_mass_fraction(psi);
    if frac > BOUNDARY_MASS_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "barycenter undefined: {frac:.2e} of the charge sits on the box boundary"
        )));
    }
    Ok(barycenter_unchecked(psi))
}

fn barycenter_unchecked(psi: &ComplexField) -> Vec<f64> {
    let grid = psi.grid();
    let dims = grid.dims();
    let mut first = [0.0; MAX_DIMS];
    let mut mass = 0.0;
    for (i, v) in psi.values().iter().enumerate() {
        let d = v.norm_sqr();
        let x = grid.position(i);
        mass += d;
        for j in 0..dims {
            first[j] += x[j] * d;
        }
    }
    first[..dims].iter().map(|f| f / mass).collect()
}

/// `qdot = h Im int conj(psi) grad psi / ||psi||^2`.
pub fn barycenter_velocity(psi: &ComplexField, h: f64) -> Vec<f64> {
    let c = charge(psi);
    momentum(psi, h).into_iter().map(|p| p / c).collect()
}

/// `qddot = -int grad V |psi|^2 / ||psi||^2`.
pub fn barycenter_accel(psi: &ComplexField, pot: &Potential) -> Vec<f64> {
    let grid = psi.grid();
    let dims = grid.dims();
    if pot.is_zero() {
        return vec![0.0; dims];
    }
    let mut acc = [0.0; MAX_DIMS];
    let mut mass = 0.0;
    for (i, v) in psi.values().iter().enumerate() {
        let d = v.norm_sqr();
        mass += d;
        let g = pot.gradient(&grid.position(i)[..dims]);
        for j in 0..dims {
            acc[j] -= g[j] * d;
        }
    }
    acc[..dims].iter().map(|a| a / mass).collect()
}

/// The integrated-by-parts form `int V grad |psi|^2 / ||psi||^2`, with
/// `grad |psi|^2 = 2 Re(conj(psi) grad psi)`.
pub fn barycenter_accel_by_parts(psi: &ComplexField, pot: &Potential) -> Vec<f64> {
    let grid = psi.grid();
    let dims = grid.dims();
    if pot.is_zero() {
        return vec![0.0; dims];
    }
    let v: Vec<f64> = pot.sample(grid);
    let mass = charge(psi) / grid.cell_volume();
    field::gradient(psi)
        .iter()
        .map(|g| {
            g.values()
                .iter()
                .zip(psi.values())
                .zip(&v)
                .map(|((d, p), vv)| vv * 2.0 * (p.conj() * d).re)
                .sum::<f64>()
                / mass
        })
        .collect()
}

/// `H_h = grad V(q) - int grad V |psi|^2 / ||psi||^2`.
pub fn hh_residual(psi: &ComplexField, pot: &Potential) -> Result<Vec<f64>> {
    let q = barycenter(psi)?;
    let g = pot.gradient(&q);
    Ok(barycenter_accel(psi, pot)
        .iter()
        .enumerate()
        .map(|(j, a)| g[j] + a)
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Concentration {
    pub qhat: Vec<f64>,
    pub fraction_outside: f64,
    pub radius: f64,
}

/// Grid point maximizing the charge inside the ball of radius
/// `rhat h^beta` (periodic window sum via FFT convolution), and the charge
/// fraction left outside that ball.
pub fn concentration(psi: &ComplexField, params: &ModelParams, rhat: f64) -> Concentration {
    let grid = psi.grid();
    let dims = grid.dims();
    let radius = rhat * params.width_scale();
    let r2 = radius * radius;
    // Ball indicator centered at the origin in minimum-image coordinates.
    let mut ball: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let idx = grid.multi_index(i);
            let d2: f64 = (0..dims)
                .map(|j| {
                    let n = grid.points[j];
                    let m = if idx[j] <= n / 2 { idx[j] as f64 } else { idx[j] as f64 - n as f64 };
                    (m * grid.spacing(j)).powi(2)
                })
                .sum();
            Complex64::new(if d2 <= r2 { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    let mut dens: Vec<Complex64> = psi.values().iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
    let total: f64 = dens.iter().map(|d| d.re).sum();
    grid.forward(&mut ball);
    grid.forward(&mut dens);
    // Ball is symmetric, so correlation equals convolution.
    dens.iter_mut().zip(&ball).for_each(|(d, b)| *d *= b);
    grid.inverse(&mut dens);
    let best = dens
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v.re > bv { (i, v.re) } else { (bi, bv) })
        .0;
    // Recount exactly at the maximizer to avoid FFT roundoff in the fraction.
    let c = grid.position(best);
    let mut exact_inside = 0.0;
    for (i, v) in psi.values().iter().enumerate() {
        let x = grid.position(i);
        let d2: f64 = (0..dims)
            .map(|j| {
                let l = grid.extent[j];
                ((x[j] - c[j] + l).rem_euclid(2.0 * l) - l).powi(2)
            })
            .sum();
        if d2 <= r2 {
            exact_inside += v.norm_sqr();
        }
    }
    Concentration {
        qhat: c[..dims].to_vec(),
        fraction_outside: if total > 0.0 { (1.0 - exact_inside / total).max(0.0) } else { 0.0 },
        radius,
    }
}

/// Precomputed orbit `{U_h(. - y)}` on one grid, for repeated distance
/// evaluations along a run.
#[derive(Clone, Debug)]
pub struct OrbitReference {
    grid: Grid,
    spectrum: Vec<Complex64>,
    weights: Vec<f64>,
    norm_sq: f64,
    width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitDistance {
    pub distance: f64,
    pub shift: Vec<f64>,
}

impl OrbitReference {
    pub fn new(gs: &GroundState, params: &ModelParams, grid: &Grid) -> Result<Self> {
        let profile = rescale_to_physical(gs, params, grid)?;
        let mut spectrum: Vec<Complex64> = profile.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.forward(&mut spectrum);
        let weights: Vec<f64> = (0..grid.len())
            .map(|i| {
                1.0 + (0..grid.dims())
                    .map(|a| grid.derivative_wavenumber(a, i).powi(2))
                    .sum::<f64>()
            })
            .collect();
        let scale = grid.cell_volume() / grid.len() as f64;
        let norm_sq = spectrum
            .iter()
            .zip(&weights)
            .map(|(s, w)| s.norm_sqr() * w)
            .sum::<f64>()
            * scale;
        Ok(Self {
            grid: grid.clone(),
            spectrum,
            weights,
            norm_sq,
            width: params.width_scale() * gs.half_width(),
        })
    }

    /// `||U_h||_{H^1}`.
    pub fn h1_norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// `inf_y || |psi| - U_h(. - y) ||_{H^1}`: coarse search around the
    /// concentration point, then golden-section refinement per axis.
    pub fn distance(&self, psi: &ComplexField, seed: &[f64]) -> Result<OrbitDistance> {
        if !psi.grid().same(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let grid = &self.grid;
        let dims = grid.dims();
        let mut target: Vec<Complex64> = psi.values().iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
        grid.forward(&mut target);
        let scale = grid.cell_volume() / grid.len() as f64;
        let target_norm: f64 = target
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| s.norm_sqr() * w)
            .sum::<f64>()
            * scale;
        let cross: Vec<Complex64> = target
            .iter()
            .zip(&self.spectrum)
            .zip(&self.weights)
            .map(|((a, b), w)| a.conj() * b * w)
            .collect();
        let waves = grid.wavenumbers();
        let eval = |y: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, c) in cross.iter().enumerate() {
                let idx = grid.multi_index(i);
                let phase: f64 = (0..dims).map(|j| waves.axis(j)[idx[j]] * y[j]).sum();
                s += (c * Complex64::from_polar(1.0, -phase)).re;
            }
            (target_norm + self.norm_sq - 2.0 * s * scale).max(0.0)
        };

        let coarse = 9usize;
        let span = 2.0 * self.width.max(grid.min_spacing());
        let step = 2.0 * span / (coarse - 1) as f64;
        let mut best = seed.to_vec();
        let mut best_val = eval(&best);
        let total = coarse.pow(dims as u32);
        for flat in 0..total {
            let mut y = seed.to_vec();
            let mut rem = flat;
            for yj in y.iter_mut() {
                *yj += -span + (rem % coarse) as f64 * step;
                rem /= coarse;
            }
            let v = eval(&y);
            if v < best_val {
                best_val = v;
                best = y;
            }
        }
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _sweep in 0..3 {
            for j in 0..dims {
                let (mut a, mut b) = (best[j] - step, best[j] + step);
                let mut y = best.clone();
                let mut f = |t: f64| {
                    y[j] = t;
                    eval(&y)
                };
                let mut c = b - phi * (b - a);
                let mut d = a + phi * (b - a);
                let (mut fc, mut fd) = (f(c), f(d));
                while b - a > 1e-10 * (1.0 + best[j].abs()) {
                    if fc < fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - phi * (b - a);
                        fc = f(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + phi * (b - a);
                        fd = f(d);
                    }
                }
                let t = 0.5 * (a + b);
                let ft = f(t);
                if ft < best_val {
                    best_val = ft;
                    best[j] = t;
                }
            }
        }
        Ok(OrbitDistance {
            distance: best_val.sqrt(),
            shift: best,
        })
    }
}

/// One-shot orbital distance from `|psi|` to the translates of the
/// physically rescaled ground state.
pub fn orbit_distance(psi: &ComplexField, gs: &GroundState, params: &ModelParams) -> Result<OrbitDistance> {
    let reference = OrbitReference::new(gs, params, psi.grid())?;
    let seed = concentration(psi, params, DEFAULT_RHAT).qhat;
    reference.distance(psi, &seed)
}

#[derive(Clone, Debug)]
pub struct Hydro {
    pub u: RealField,
    pub velocity: Vec<RealField>,
    pub quantum_potential: RealField,
    pub mask: Vec<bool>,
}

/// Madelung variables: `u = |psi|`, `vel = h Im(conj(psi) grad psi)/u^2`
/// and `Q = [-h^2 Δu + h^{-alpha} W'(u)] / (2u)`, both on the mask and zero
/// elsewhere.
pub fn hydro(psi: &ComplexField, params: &ModelParams, nl: &Nonlinearity) -> Hydro {
    let h = params.h;
    let grid = psi.grid();
    let u = psi.modulus();
    let m = mask(psi, EPS_MASK);
    let (_, p) = current(psi, h);
    let velocity = p
        .iter()
        .map(|pj| {
            let vals = pj
                .iter()
                .zip(psi.values())
                .zip(&m)
                .map(|((pp, v), &keep)| if keep { pp / v.norm_sqr() } else { 0.0 })
                .collect();
            RealField::new(grid, vals).expect("finite on mask")
        })
        .collect();
    let lap = field::laplacian_real(&u);
    let scale = h.powf(-params.alpha);
    let q_vals = u
        .values()
        .iter()
        .zip(lap.values())
        .zip(&m)
        .map(|((&s, &l), &keep)| {
            if keep {
                (-h * h * l + scale * nl.w_prime(s)) / (2.0 * s)
            } else {
                0.0
            }
        })
        .collect();
    Hydro {
        quantum_potential: RealField::new(grid, q_vals).expect("finite on mask"),
        u,
        velocity,
        mask: m,
    }
}

/// Everything recorded about the field at one instant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub charge: f64,
    pub energy: EnergySplit,
    pub momentum: Vec<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
    /// Integration-by-parts cross-check of `qddot`.
    pub qddot_by_parts: Vec<f64>,
    pub hh: Vec<f64>,
    pub qhat: Vec<f64>,
    pub fraction_outside: f64,
    pub orbit_distance: Option<f64>,
}

/// Model and options needed to evaluate an [`ObservableRecord`].
#[derive(Clone, Debug)]
pub struct ObserverContext {
    pub params: ModelParams,
    pub nl: Nonlinearity,
    pub pot: Potential,
    pub rhat: f64,
    pub orbit: Option<OrbitReference>,
}

impl ObserverContext {
    pub fn new(params: ModelParams, nl: Nonlinearity, pot: Potential) -> Self {
        Self {
            params,
            nl,
            pot,
            rhat: DEFAULT_RHAT,
            orbit: None,
        }
    }

    pub fn with_orbit(mut self, orbit: OrbitReference) -> Self {
        self.orbit = Some(orbit);
        self
    }

    pub fn with_rhat(mut self, rhat: f64) -> Self {
        self.rhat = rhat;
        self
    }

    pub fn record(&self, t: f64, psi: &ComplexField) -> Result<ObservableRecord> {
        let h = self.params.h;
        let q = barycenter(psi)?;
        let conc = concentration(psi, &self.params, self.rhat);
        let orbit_distance = match &self.orbit {
            Some(o) => Some(o.distance(psi, &conc.qhat)?.distance),
            None => None,
        };
        let qddot = barycenter_accel(psi, &self.pot);
        let gq = self.pot.gradient(&q);
        let hh = qddot.iter().enumerate().map(|(j, a)| gq[j] + a).collect();
        Ok(ObservableRecord {
            t,
            charge: charge(psi),
            energy: energy_split(psi, &self.params, &self.nl, &self.pot),
            momentum: momentum(psi, h),
            qdot: barycenter_velocity(psi, h),
            qddot_by_parts: barycenter_accel_by_parts(psi, &self.pot),
            qddot,
            hh,
            q,
            qhat: conc.qhat,
            fraction_outside: conc.fraction_outside,
            orbit_distance,
        })
    }
}

/// Records at uniform cadence, strictly increasing in `t`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dims: usize,
    pub records: Vec<ObservableRecord>,
}

fn vector_columns(name: &str, dims: usize) -> Vec<String> {
    (1..=dims).map(|j| format!("{name}_{j}")).collect()
}

impl TimeSeries {
    pub fn new(dims: usize) -> Self {
        Self {
            dims,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: ObservableRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.t > last.t) {
                return Err(Error::InvalidArgument(format!(
                    "record time {} does not follow {}",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Column names in CSV order.
    pub fn header(&self) -> Vec<String> {
        let d = self.dims;
        let mut cols: Vec<String> = ["t", "charge", "energy", "internal", "dynamical", "g_kin", "g_pot", "masked_fraction"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for name in ["momentum", "q", "qdot", "qddot", "qddot_by_parts", "hh", "qhat"] {
            cols.extend(vector_columns(name, d));
        }
        cols.push("fraction_outside".into());
        cols.push("orbit_distance".into());
        cols
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        for r in &self.records {
            let mut row: Vec<String> = [
                r.t,
                r.charge,
                r.energy.total,
                r.energy.internal,
                r.energy.dynamical,
                r.energy.kinetic,
                r.energy.potential,
                r.energy.masked_fraction,
            ]
            .iter()
            .map(f64::to_string)
            .collect();
            for v in [&r.momentum, &r.q, &r.qdot, &r.qddot, &r.qddot_by_parts, &r.hh, &r.qhat] {
                row.extend(v.iter().map(f64::to_string));
            }
            row.push(r.fraction_outside.to_string());
            row.push(r.orbit_distance.map_or_else(|| "nan".to_string(), |d| d.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `max_t |x(t) - x(0)| / |x(0)|` for a scalar extracted from each record.
    pub fn relative_drift(&self, f: impl Fn(&ObservableRecord) -> f64) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let x0 = f(first);
        let scale = x0.abs().max(f64::MIN_POSITIVE);
        self.records
            .iter()
            .map(|r| (f(r) - x0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// `max_t |P(t) - P(0)| / max(|P(0)|, floor)`; the floor keeps the ratio
    /// meaningful for data at rest.
    pub fn momentum_drift(&self, floor: f64) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(&first.momentum).max(floor).max(f64::MIN_POSITIVE);
        self.records
            .iter()
            .map(|r| {
                let d: Vec<f64> = r.momentum.iter().zip(&first.momentum).map(|(a, b)| a - b).collect();
                norm(&d) / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_hh(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.hh.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sup_fraction_outside(&self) -> f64 {
        self.records.iter().map(|r| r.fraction_outside).fold(0.0, f64::max)
    }
}

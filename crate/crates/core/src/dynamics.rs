//! Time evolution: Strang split-step propagation of the field and a
//! velocity-Verlet point particle in the same potential.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, MAX_DIMS};
use crate::observables::{self, ObserverContext, TimeSeries};
use crate::physics::{ModelParams, Nonlinearity, Potential};

/// Runs are aborted once `sup |psi|` exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 10.0;

/// Field, clock and precomputed multipliers for one propagation.
#[derive(Clone, Debug)]
pub struct PropagatorState {
    pub psi: ComplexField,
    pub t: f64,
    pub steps: u64,
    t0: f64,
    dt: f64,
    kinetic_phase: Arc<Vec<Complex64>>,
    potential: Arc<Vec<f64>>,
    pub params: ModelParams,
    pub pot: Potential,
    pub nl: Nonlinearity,
    initial_sup: f64,
}

impl PropagatorState {
    pub fn new(psi: ComplexField, params: ModelParams, nl: Nonlinearity, pot: Potential, dt: f64) -> Result<Self> {
        params.validate()?;
        if !psi.is_finite() {
            return Err(Error::NonFiniteState(0.0));
        }
        let potential = Arc::new(pot.sample(psi.grid()));
        let initial_sup = psi.sup_norm();
        let mut state = Self {
            psi,
            t: 0.0,
            steps: 0,
            t0: 0.0,
            dt: 0.0,
            kinetic_phase: Arc::new(Vec::new()),
            potential,
            params,
            pot,
            nl,
            initial_sup,
        };
        state.set_dt(dt)?;
        Ok(state)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Changes the step, rebasing the clock at the current time.
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be > 0")));
        }
        let h = self.params.h;
        let phase = self
            .psi
            .grid()
            .k_squared()
            .iter()
            .map(|k2| Complex64::from_polar(1.0, -0.5 * h * k2 * dt))
            .collect();
        self.kinetic_phase = Arc::new(phase);
        self.t0 = self.t;
        self.steps = 0;
        self.dt = dt;
        Ok(())
    }

    /// Pointwise `psi <- psi exp(-i tau [V/h + (W'(|psi|)/|psi|) / (2 h^{alpha+1})])`.
    fn phase_substep(&mut self, tau: f64) {
        let h = self.params.h;
        let v_scale = tau / h;
        let nl_scale = tau / (2.0 * h.powf(self.params.alpha + 1.0));
        let ratio = RatioKernel::new(&self.nl);
        for (psi, v) in self.psi.values_mut().iter_mut().zip(self.potential.iter()) {
            let theta = v * v_scale + nl_scale * ratio.eval(&self.nl, psi.norm_sqr());
            let (sin, cos) = theta.sin_cos();
            *psi *= Complex64::new(cos, -sin);
        }
    }

    fn kinetic_substep(&mut self) {
        let grid = self.psi.grid().clone();
        let phase = Arc::clone(&self.kinetic_phase);
        let values = self.psi.values_mut();
        grid.forward(values);
        values.iter_mut().zip(phase.iter()).for_each(|(v, p)| *v *= p);
        grid.inverse(values);
    }

    /// One Strang step: half phase, full kinetic, half phase.
    pub fn step_strang(&mut self) -> Result<()> {
        let half = 0.5 * self.dt;
        self.phase_substep(half);
        self.kinetic_substep();
        self.phase_substep(half);
        self.steps += 1;
        self.t = self.t0 + self.steps as f64 * self.dt;
        let sup = self.psi.sup_norm();
        if !sup.is_finite() || !self.psi.is_finite() {
            return Err(Error::NonFiniteState(self.t));
        }
        if sup > BLOWUP_FACTOR * self.initial_sup {
            return Err(Error::BlowUp {
                t: self.t,
                ratio: sup / self.initial_sup,
            });
        }
        Ok(())
    }

    /// Steps until `t >= T - dt/2`, calling `observer` at the start and
    /// after every `cadence` steps (and at the final step).
    pub fn evolve(
        &mut self,
        t_end: f64,
        cadence: usize,
        mut observer: impl FnMut(&PropagatorState) -> Result<()>,
    ) -> Result<()> {
        let cadence = cadence.max(1);
        let n = ((t_end - self.t) / self.dt).round().max(0.0) as usize;
        observer(self)?;
        for k in 1..=n {
            self.step_strang()?;
            if k % cadence == 0 || k == n {
                observer(self)?;
            }
        }
        Ok(())
    }

    /// Convenience wrapper recording full observables into a series.
    pub fn evolve_series(&mut self, t_end: f64, cadence: usize, ctx: &ObserverContext) -> Result<TimeSeries> {
        let mut series = TimeSeries::new(self.psi.grid().dims());
        self.evolve(t_end, cadence, |s| series.push(ctx.record(s.t, &s.psi)?))?;
        Ok(series)
    }
}

/// `W'(s)/s` as a function of `s^2`, avoiding square roots and `powf` for
/// even integer powers.
enum RatioKernel {
    Zero,
    IntPower { c: f64, k: i32 },
    General,
}

impl RatioKernel {
    fn new(nl: &Nonlinearity) -> Self {
        match *nl {
            Nonlinearity::Power { c, .. } if c == 0.0 => RatioKernel::Zero,
            Nonlinearity::Power { c, p } if (0.5 * (p - 2.0)).fract() == 0.0 && p < 64.0 => RatioKernel::IntPower {
                c,
                k: (0.5 * (p - 2.0)) as i32,
            },
            _ => RatioKernel::General,
        }
    }

    #[inline]
    fn eval(&self, nl: &Nonlinearity, s2: f64) -> f64 {
        match *self {
            RatioKernel::Zero => 0.0,
            RatioKernel::IntPower { c, k } => -c * s2.powi(k),
            RatioKernel::General => nl.w_prime_over_s(s2.sqrt()),
        }
    }
}

/// Initial guess `min(0.1 h^{alpha+1} / max|W'(u)/(2u) + V h^alpha|, 0.01)`,
/// the maximum taken where `|psi_0|^2` is above the observable mask.
pub fn initial_dt_guess(state: &PropagatorState) -> f64 {
    let h = state.params.h;
    let alpha = state.params.alpha;
    let dens_max = state.psi.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let rate = state
        .psi
        .values()
        .iter()
        .zip(state.potential.iter())
        .filter(|(v, _)| v.norm_sqr() >= observables::EPS_MASK * dens_max)
        .map(|(v, pot)| (0.5 * state.nl.w_prime_over_s(v.norm()) + pot * h.powf(alpha)).abs())
        .fold(0.0, f64::max);
    if rate > 0.0 {
        (0.1 * h.powf(alpha + 1.0) / rate).min(0.01)
    } else {
        0.01
    }
}

pub const AUTO_DT_MAX_HALVINGS: usize = 16;

fn barycenter_track(state: &PropagatorState, t_probe: f64, dt: f64, stride: usize) -> Result<Vec<Vec<f64>>> {
    let mut probe = state.clone();
    probe.set_dt(dt)?;
    let mut track = Vec::new();
    probe.evolve(probe.t + t_probe, stride, |s| {
        track.push(observables::barycenter(&s.psi)?);
        Ok(())
    })?;
    Ok(track)
}

/// Halves `dt` from [`initial_dt_guess`] until the barycenter path over
/// `t_probe` moves by less than `tol` when `dt` is halved again.
pub fn auto_dt(state: &PropagatorState, t_probe: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::UnreachableTolerance(tol));
    }
    let mut dt = initial_dt_guess(state);
    // Keep the probe an integer number of steps long.
    let steps = (t_probe / dt).ceil().max(1.0);
    dt = t_probe / steps;
    // Both tracks are sampled on the spacing of the initial guess.
    let mut stride = 1;
    let mut coarse = barycenter_track(state, t_probe, dt, stride)?;
    for _ in 0..AUTO_DT_MAX_HALVINGS {
        let fine = barycenter_track(state, t_probe, 0.5 * dt, 2 * stride)?;
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diff < tol {
            return Ok(dt);
        }
        dt *= 0.5;
        stride *= 2;
        coarse = fine;
    }
    Err(Error::UnreachableTolerance(tol))
}

/// A classical unit-mass particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl ParticleState {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() || q.is_empty() || q.len() > MAX_DIMS {
            return Err(Error::InvalidArgument("particle position and velocity must share dimension 1..=3".into()));
        }
        Ok(Self { q, v, t: 0.0 })
    }

    /// `|v|^2/2 + V(q)`.
    pub fn energy(&self, pot: &Potential) -> f64 {
        0.5 * self.v.iter().map(|v| v * v).sum::<f64>() + pot.value(&self.q)
    }
}

/// Velocity-Verlet step for `q'' = -grad V(q)`; negative `dt` runs backwards.
pub fn particle_step(p: &ParticleState, pot: &Potential, dt: f64) -> ParticleState {
    let g0 = pot.gradient(&p.q);
    let v_half: Vec<f64> = p.v.iter().enumerate().map(|(j, v)| v - 0.5 * dt * g0[j]).collect();
    let q: Vec<f64> = p.q.iter().zip(&v_half).map(|(q, v)| q + dt * v).collect();
    let g1 = pot.gradient(&q);
    let v = v_half.iter().enumerate().map(|(j, v)| v - 0.5 * dt * g1[j]).collect();
    ParticleState { q, v, t: p.t + dt }
}

/// Samples at `t = 0` and every `cadence` steps up to `T` (inclusive of the
/// final step).
pub fn particle_trajectory(
    q0: &[f64],
    v: &[f64],
    pot: &Potential,
    t_end: f64,
    dt: f64,
    cadence: usize,
) -> Result<Vec<ParticleState>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be > 0")));
    }
    let cadence = cadence.max(1);
    let n = (t_end / dt).round().max(0.0) as usize;
    let mut p = ParticleState::new(q0.to_vec(), v.to_vec())?;
    let mut out = vec![p.clone()];
    for k in 1..=n {
        p = particle_step(&p, pot, dt);
        p.t = k as f64 * dt;
        if k % cadence == 0 || k == n {
            out.push(p.clone());
        }
    }
    Ok(out)
}

//! The model: nonlinearity `W`, external potential `V`, scaling parameters,
//! sampling validators for the structural hypotheses on `W` and `V`, and
//! construction of admissible soliton initial data.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, ComplexField, Grid, MAX_DIMS};
use crate::ground_state::GroundState;
use crate::observables;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A user-supplied `W` with its first two derivatives and the exponents it
/// claims to satisfy.
#[derive(Clone)]
pub struct CustomNonlinearity {
    pub name: String,
    pub w: ScalarFn,
    pub w_prime: ScalarFn,
    pub w_second: ScalarFn,
    pub exponents: Exponents,
}

/// Declared exponents: `q, p` bound `|W''|`, `nu` bounds `W` from below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub q: f64,
    pub p: f64,
    pub nu: f64,
}

#[derive(Clone)]
pub enum Nonlinearity {
    /// `W(s) = -(c/p) s^p`. `c > 0` is focusing, `c < 0` defocusing,
    /// `c = 0` the linear equation.
    Power { c: f64, p: f64 },
    Custom(CustomNonlinearity),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Power { c, p } => write!(f, "Power {{ c: {c}, p: {p} }}"),
            Nonlinearity::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl Nonlinearity {
    pub fn focusing(c: f64, p: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("focusing coefficient {c} must be > 0")));
        }
        Self::power(c, p)
    }

    pub fn defocusing(c: f64, p: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("defocusing coefficient {c} must be > 0")));
        }
        Self::power(-c, p)
    }

    /// The cubic focusing equation, `W(s) = -s^4 / 2`.
    pub fn cubic() -> Self {
        Nonlinearity::Power { c: 2.0, p: 4.0 }
    }

    pub fn none() -> Self {
        Nonlinearity::Power { c: 0.0, p: 4.0 }
    }

    fn power(c: f64, p: f64) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponent {p} must be > 2")));
        }
        Ok(Nonlinearity::Power { c, p })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Power { c, .. } if *c == 0.0)
    }

    pub fn exponents(&self) -> Exponents {
        match self {
            Nonlinearity::Power { p, .. } => Exponents { q: *p, p: *p, nu: *p },
            Nonlinearity::Custom(c) => c.exponents,
        }
    }

    pub fn w(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { c, p } => -(c / p) * s.powf(*p),
            Nonlinearity::Custom(c) => (c.w)(s),
        }
    }

    pub fn w_prime(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { c, p } => -c * s.powf(p - 1.0),
            Nonlinearity::Custom(c) => (c.w_prime)(s),
        }
    }

    pub fn w_second(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { c, p } => -c * (p - 1.0) * s.powf(p - 2.0),
            Nonlinearity::Custom(c) => (c.w_second)(s),
        }
    }

    /// `W'(s)/s`, continued by 0 at `s = 0`.
    pub fn w_prime_over_s(&self, s: f64) -> f64 {
        match self {
            Nonlinearity::Power { c, p } => -c * s.powf(p - 2.0),
            Nonlinearity::Custom(c) => {
                if s == 0.0 {
                    0.0
                } else {
                    (c.w_prime)(s) / s
                }
            }
        }
    }
}

fn check_modulus(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("W is defined on s >= 0, got {s}")))
    }
}

pub fn w_value(nl: &Nonlinearity, s: f64) -> Result<f64> {
    check_modulus(s)?;
    Ok(nl.w(s))
}

pub fn w_prime(nl: &Nonlinearity, s: f64) -> Result<f64> {
    check_modulus(s)?;
    Ok(nl.w_prime(s))
}

pub fn w_prime_over_s(nl: &Nonlinearity, s: f64) -> Result<f64> {
    check_modulus(s)?;
    Ok(nl.w_prime_over_s(s))
}

/// Witness constants for the growth hypotheses on `V`: for `|x| > r1`,
/// `|grad V| <= V^b` and `V >= |x|^a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialWitness {
    pub a: f64,
    pub b: f64,
    pub r1: f64,
}

#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub v: PotentialFn,
    pub grad: GradientFn,
    pub witness: PotentialWitness,
}

#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V = (kappa/2) |x|^2`.
    Harmonic { kappa: f64 },
    /// `V = (lambda/4) |x|^4`.
    Quartic { lambda: f64 },
    Custom(CustomPotential),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Harmonic { kappa } => write!(f, "Harmonic {{ kappa: {kappa} }}"),
            Potential::Quartic { lambda } => write!(f, "Quartic {{ lambda: {lambda} }}"),
            Potential::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl Potential {
    pub fn harmonic(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("stiffness {kappa} must be > 0")));
        }
        Ok(Potential::Harmonic { kappa })
    }

    pub fn quartic(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("quartic coefficient {lambda} must be > 0")));
        }
        Ok(Potential::Quartic { lambda })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { kappa } => 0.5 * kappa * norm_sq(x),
            Potential::Quartic { lambda } => 0.25 * lambda * norm_sq(x).powi(2),
            Potential::Custom(c) => (c.v)(x),
        }
    }

    /// `grad V(x)`; slots past `x.len()` are zero.
    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_DIMS] {
        let mut g = [0.0; MAX_DIMS];
        match self {
            Potential::Zero => {}
            Potential::Harmonic { kappa } => {
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj = kappa * xj;
                }
            }
            Potential::Quartic { lambda } => {
                let r2 = norm_sq(x);
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj = lambda * r2 * xj;
                }
            }
            Potential::Custom(c) => (c.grad)(x, &mut g[..x.len()]),
        }
        g
    }

    /// Declared `(a, b, R_1)`; the built-in radii are the smallest for which
    /// the inequalities hold analytically (floored at 2).
    pub fn witness(&self) -> Option<PotentialWitness> {
        match self {
            Potential::Zero => None,
            Potential::Harmonic { kappa } => {
                // (k/2) r^2 >= r^1.5  <=>  r >= (2/k)^2
                // k r <= ((k/2) r^2)^0.75  <=>  r >= 2^1.5 sqrt(k)
                let r1 = 2f64
                    .max((2.0 / kappa).powi(2))
                    .max(2f64.powf(1.5) * kappa.sqrt());
                Some(PotentialWitness { a: 1.5, b: 0.75, r1 })
            }
            Potential::Quartic { lambda } => {
                // (l/4) r^4 >= r^2  <=>  r >= 2/sqrt(l)
                // l r^3 <= ((l/4) r^4)^0.8  <=>  r >= 256 l
                let r1 = 2f64.max(2.0 / lambda.sqrt()).max(256.0 * lambda);
                Some(PotentialWitness { a: 2.0, b: 0.8, r1 })
            }
            Potential::Custom(c) => Some(c.witness),
        }
    }

    /// `V` sampled on every grid point.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| self.value(&grid.position(i)[..grid.dims()]))
            .collect()
    }
}

/// Scale parameter `h`, nonlinearity exponent `alpha` and charge level `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub h: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(h: f64, alpha: f64, sigma: f64) -> Result<Self> {
        let p = Self { h, alpha, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("h = {} must be > 0", self.h)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma = {} must be > 0", self.sigma)));
        }
        Ok(())
    }

    /// `beta = 1 + alpha/2`, the concentration exponent.
    pub fn beta(&self) -> f64 {
        1.0 + 0.5 * self.alpha
    }

    /// Soliton length scale `h^beta`.
    pub fn width_scale(&self) -> f64 {
        self.h.powf(self.beta())
    }

    /// Physical charge of rescaled data, `h^{N beta} sigma^2`.
    pub fn physical_charge(&self, dims: usize) -> f64 {
        self.h.powf(dims as f64 * self.beta()) * self.sigma * self.sigma
    }

    /// Factor `h^{N beta - alpha}` relating `J_h` to the rescaled `J_1`.
    pub fn energy_scale(&self, dims: usize) -> f64 {
        self.h.powf(dims as f64 * self.beta() - self.alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One hypothesis or clause with its verdict and what was sampled.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
    /// Sample range `[lo, hi]` (in `s` for `W`, radius for `V`), if any.
    pub range: Option<(f64, f64)>,
    /// Fitted or measured value reported alongside the verdict.
    pub value: Option<f64>,
}

impl Check {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
            range: None,
            value: None,
        }
    }

    fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{tag:4} ({}) {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `2^* = 2N/(N-2)`, infinite for `N <= 2`.
pub fn critical_sobolev(dims: usize) -> f64 {
    if dims <= 2 {
        f64::INFINITY
    } else {
        2.0 * dims as f64 / (dims as f64 - 2.0)
    }
}

/// Smallest constant `c` with `num(s) <= c * den(s)` on the samples, and
/// whether the ratio is still rising over the last samples (unbounded).
fn fit_constant(samples: &[f64], num: impl Fn(f64) -> f64, den: impl Fn(f64) -> f64) -> (f64, bool) {
    let ratios: Vec<f64> = samples.iter().map(|&s| num(s) / den(s)).collect();
    let c = ratios.iter().copied().fold(0.0, f64::max);
    let n = ratios.len();
    let tail = n / 10;
    let rising = |a: f64, b: f64| b > a * (1.0 + 1e-2) + 1e-12;
    let unbounded = rising(ratios[n - 1 - tail], ratios[n - 1]) || rising(ratios[tail], ratios[0]);
    (c, unbounded || !c.is_finite())
}

/// Sampling falsifier for the hypotheses on `W` in dimension `dims`.
pub fn validate_nonlinearity(nl: &Nonlinearity, dims: usize) -> ValidationReport {
    let mut checks = Vec::new();
    let ex = nl.exponents();

    // (W): vanishing to second order at the origin.
    let at_zero = [nl.w(0.0), nl.w_prime(0.0), nl.w_second(0.0)];
    let zero_ok = at_zero.iter().all(|v| v.abs() <= 1e-12);
    let near = log_grid(1e-9, 1e-3, 61);
    let w2_small = nl.w_second(near[0]).abs();
    let w2_large = nl.w_second(near[near.len() - 1]).abs();
    let decays = w2_small <= (0.5 * w2_large).max(1e-12);
    checks.push(
        Check::new(
            "W",
            zero_ok && decays,
            format!(
                "W(0)={:.1e}, W'(0)={:.1e}, W''(0)={:.1e}; |W''| {:.2e} at s=1e-9 vs {:.2e} at s=1e-3",
                at_zero[0], at_zero[1], at_zero[2], w2_small, w2_large
            ),
        )
        .with_range(0.0, 1e-3),
    );

    // (Wp): |W''(s)| <= c (s^{q-2} + s^{p-2}).
    let two_star = critical_sobolev(dims);
    let exp_ok = 2.0 < ex.q && ex.q <= ex.p && ex.p < two_star;
    let wide = log_grid(1e-6, 1e3, 181);
    let (c_wp, unbounded) = fit_constant(
        &wide,
        |s| nl.w_second(s).abs(),
        |s| s.powf(ex.q - 2.0) + s.powf(ex.p - 2.0),
    );
    checks.push(
        Check::new(
            "Wp",
            exp_ok && !unbounded,
            format!(
                "q={}, p={} (need 2 < q <= p < {two_star}); fitted c1=c2={c_wp:.4e}{}",
                ex.q,
                ex.p,
                if unbounded { ", ratio still growing at the sample edge" } else { "" }
            ),
        )
        .with_range(1e-6, 1e3)
        .with_value(c_wp),
    );

    // (W0): W(s) >= -c s^nu for large s.
    let nu_max = 2.0 + 4.0 / dims as f64;
    let nu_ok = 2.0 < ex.nu && ex.nu < nu_max;
    let large = log_grid(1.0, 1e3, 91);
    let (c_w0, unbounded) = fit_constant(&large, |s| (-nl.w(s)).max(0.0), |s| s.powf(ex.nu));
    checks.push(
        Check::new(
            "W0",
            nu_ok && !unbounded,
            format!(
                "nu={} (need 2 < nu < {nu_max}); fitted c={c_w0:.4e}{}",
                ex.nu,
                if unbounded { ", ratio still growing at the sample edge" } else { "" }
            ),
        )
        .with_range(1.0, 1e3)
        .with_value(c_w0),
    );

    // (W1): some s0 > 0 with W(s0) < 0.
    let scan = (1..=20000).map(|i| i as f64 * 100.0 / 20000.0);
    let witness = scan.into_iter().find(|&s| nl.w(s) < 0.0);
    let mut w1 = Check::new(
        "W1",
        witness.is_some(),
        match witness {
            Some(s) => format!("W({s}) = {:.4e} < 0", nl.w(s)),
            None => "no s in (0, 100] with W(s) < 0".to_string(),
        },
    )
    .with_range(0.0, 100.0);
    if let Some(s) = witness {
        w1 = w1.with_value(s);
    }
    checks.push(w1);

    ValidationReport { checks }
}

/// Sampling falsifier for the hypotheses on `V` over `grid` and along rays
/// reaching well past both the box and the declared `R_1`.
pub fn validate_potential(pot: &Potential, grid: &Grid) -> ValidationReport {
    let dims = grid.dims();
    let mut points: Vec<[f64; MAX_DIMS]> = (0..grid.len()).map(|i| grid.position(i)).collect();
    let witness = pot.witness();
    let box_radius = grid.extent.iter().map(|l| l * l).sum::<f64>().sqrt();
    let reach = 10.0 * box_radius.max(witness.map_or(1.0, |w| w.r1));
    let mut directions: Vec<[f64; MAX_DIMS]> = Vec::new();
    for j in 0..dims {
        for sign in [1.0, -1.0] {
            let mut d = [0.0; MAX_DIMS];
            d[j] = sign;
            directions.push(d);
        }
    }
    let mut diag = [0.0; MAX_DIMS];
    diag[..dims].fill(1.0 / (dims as f64).sqrt());
    directions.push(diag);
    for r in log_grid(1e-2, reach, 400) {
        for d in &directions {
            let mut x = [0.0; MAX_DIMS];
            for j in 0..dims {
                x[j] = r * d[j];
            }
            points.push(x);
        }
    }

    let mut checks = Vec::new();
    let min_v = points
        .iter()
        .map(|x| pot.value(&x[..dims]))
        .fold(f64::INFINITY, f64::min);
    checks.push(
        Check::new("V0", min_v >= 0.0, format!("min sampled V = {min_v:.4e}"))
            .with_range(0.0, reach)
            .with_value(min_v),
    );

    match witness {
        None => {
            let msg = "no growth witness: V=0 runs valid only for V-free experiments".to_string();
            checks.push(Check::new("Vinf", false, msg.clone()));
            checks.push(Check::new("Vinf1", false, msg));
        }
        Some(w) => {
            let outer: Vec<&[f64]> = points
                .iter()
                .map(|x| &x[..dims])
                .filter(|x| norm_sq(x).sqrt() > w.r1)
                .collect();
            let declared_ok = w.r1 > 1.0;
            let b_ok = w.b > 0.0 && w.b < 1.0;
            let grad_violations = outer
                .iter()
                .filter(|x| {
                    let g = pot.gradient(x);
                    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    gn > pot.value(x).powf(w.b) * (1.0 + 1e-12)
                })
                .count();
            checks.push(
                Check::new(
                    "Vinf",
                    declared_ok && b_ok && grad_violations == 0 && !outer.is_empty(),
                    format!(
                        "|grad V| <= V^{} for |x| > {:.4}: {} of {} samples violate{}",
                        w.b,
                        w.r1,
                        grad_violations,
                        outer.len(),
                        if b_ok && declared_ok { "" } else { " (need b in (0,1), R1 > 1)" }
                    ),
                )
                .with_range(w.r1, reach),
            );
            let a_ok = w.a > 1.0;
            let growth_violations = outer
                .iter()
                .filter(|x| pot.value(x) < norm_sq(x).sqrt().powf(w.a) * (1.0 - 1e-12))
                .count();
            checks.push(
                Check::new(
                    "Vinf1",
                    declared_ok && a_ok && growth_violations == 0 && !outer.is_empty(),
                    format!(
                        "V >= |x|^{} for |x| > {:.4}: {} of {} samples violate{}",
                        w.a,
                        w.r1,
                        growth_violations,
                        outer.len(),
                        if a_ok { "" } else { " (need a > 1)" }
                    ),
                )
                .with_range(w.r1, reach),
            );
        }
    }
    ValidationReport { checks }
}

/// Position, velocity and admissibility constant of a travelling soliton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub q0: Vec<f64>,
    pub v: Vec<f64>,
    pub k: f64,
}

impl InitialData {
    pub fn build(&self, params: &ModelParams, ground: &GroundState, grid: &Grid) -> Result<ComplexField> {
        make_initial_data(params, ground, &self.q0, &self.v, grid)
    }
}

/// `psi_0(x) = U((x - q0)/h^beta) exp(i v.x / h)` on the physical grid.
pub fn make_initial_data(
    params: &ModelParams,
    ground: &GroundState,
    q0: &[f64],
    v: &[f64],
    grid: &Grid,
) -> Result<ComplexField> {
    params.validate()?;
    let dims = grid.dims();
    if q0.len() != dims || v.len() != dims {
        return Err(Error::InvalidArgument(format!(
            "q0 and v must have {dims} components"
        )));
    }
    if ground.profile.grid().dims() != dims {
        return Err(Error::InvalidArgument("ground state dimension differs from grid".into()));
    }
    let width = params.width_scale() * ground.half_width();
    let required = width / 8.0;
    let dx = grid.min_spacing();
    if dx > required {
        return Err(Error::Unresolved { dx, required });
    }
    for j in 0..dims {
        let room = grid.extent[j] - q0[j].abs();
        if room < 4.0 * width {
            return Err(Error::NearBoundary(format!(
                "axis {j}: q0 = {} leaves {room:.4} to the edge, need {:.4}",
                q0[j],
                4.0 * width
            )));
        }
    }
    let profile = ground.resample(grid, q0, params.width_scale())?;
    let h = params.h;
    let psi = profile
        .to_complex()
        .modulated(|x| {
            let phase: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / h;
            Complex64::from_polar(1.0, phase)
        });
    Ok(psi)
}

/// Clause-by-clause membership test for the admissible data class.
pub fn check_admissible(
    psi0: &ComplexField,
    params: &ModelParams,
    nl: &Nonlinearity,
    pot: &Potential,
    ground: &GroundState,
    k: f64,
) -> ValidationReport {
    let dims = psi0.grid().dims();
    let h = params.h;
    let mut checks = Vec::new();

    let charge = field::norm_sq(psi0);
    let target = params.physical_charge(dims);
    let rel = (charge / target - 1.0).abs();
    checks.push(
        Check::new(
            "charge",
            rel <= 1e-8,
            format!("||psi0||^2 = {charge:.10e}, h^(N beta) sigma^2 = {target:.10e}, rel err {rel:.2e}"),
        )
        .with_value(rel),
    );

    let j_h = observables::internal_energy(&psi0.modulus(), params, nl);
    let j_rescaled = j_h / params.energy_scale(dims);
    let bound = ground.energy + k * h.powf(params.alpha);
    checks.push(
        Check::new(
            "energy",
            j_rescaled <= bound,
            format!("J(U+w) = {j_rescaled:.6e} <= m + K h^alpha = {bound:.6e}"),
        )
        .with_value(j_rescaled),
    );

    let grad_s = observables::phase_gradient_sup(psi0, h, 1e-10);
    checks.push(
        Check::new(
            "phase_gradient",
            grad_s <= k,
            format!("sup |grad S| = {grad_s:.6e} <= K = {k}"),
        )
        .with_value(grad_s),
    );

    let moment = observables::potential_moment(psi0, pot);
    let bound = k * h.powf(dims as f64 * params.beta() - 2.0 * params.alpha);
    checks.push(
        Check::new(
            "potential",
            moment <= bound,
            format!("int V |psi0|^2 = {moment:.6e} <= K h^(N beta - 2 alpha) = {bound:.6e}"),
        )
        .with_value(moment),
    );

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let nl = Nonlinearity::cubic();
        assert_eq!(w_prime(&nl, 1.0).unwrap(), -2.0);
        assert_eq!(w_prime_over_s(&nl, 0.0).unwrap(), 0.0);
        assert_eq!(w_value(&nl, 1.0).unwrap(), -0.5);
        assert!(w_value(&nl, -1.0).is_err());
        assert!(w_prime_over_s(&nl, -1e-3).is_err());
    }

    #[test]
    fn power_ratio_matches_derivative() {
        let nl = Nonlinearity::focusing(1.3, 3.5).unwrap();
        for s in [1e-4, 0.1, 1.0, 7.0] {
            let a = nl.w_prime(s) / s;
            let b = nl.w_prime_over_s(s);
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn constructors_reject_bad_coefficients() {
        assert!(Nonlinearity::focusing(-1.0, 4.0).is_err());
        assert!(Nonlinearity::focusing(1.0, 2.0).is_err());
        assert!(Potential::harmonic(0.0).is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_is_derived() {
        let p = ModelParams::new(0.25, 1.0, 2f64.sqrt()).unwrap();
        assert_eq!(p.beta(), 1.5);
        assert!((p.physical_charge(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cubic_one_dimensional_passes_everything() {
        let r = validate_nonlinearity(&Nonlinearity::cubic(), 1);
        assert!(r.passed(), "{r}");
        assert!((r.get("Wp").unwrap().value.unwrap() - 3.0).abs() < 1e-12);
        assert!((r.get("W0").unwrap().value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cubic_in_two_dimensions_is_critical() {
        // nu = 4 = 2 + 4/2 is not strictly below the bound.
        let r = validate_nonlinearity(&Nonlinearity::cubic(), 2);
        assert!(!r.get("W0").unwrap().passed());
    }

    #[test]
    fn positive_w_has_no_negative_witness() {
        let nl = Nonlinearity::Custom(CustomNonlinearity {
            name: "s^4".into(),
            w: Arc::new(|s| s.powi(4)),
            w_prime: Arc::new(|s| 4.0 * s.powi(3)),
            w_second: Arc::new(|s| 12.0 * s * s),
            exponents: Exponents { q: 4.0, p: 4.0, nu: 4.0 },
        });
        let r = validate_nonlinearity(&nl, 1);
        assert!(!r.get("W1").unwrap().passed());
        assert!(r.get("W").unwrap().passed());
    }

    #[test]
    fn supercritical_nu_fails_w0() {
        let nl = Nonlinearity::Custom(CustomNonlinearity {
            name: "-s^8/8".into(),
            w: Arc::new(|s| -s.powi(8) / 8.0),
            w_prime: Arc::new(|s| -s.powi(7)),
            w_second: Arc::new(|s| -7.0 * s.powi(6)),
            exponents: Exponents { q: 8.0, p: 8.0, nu: 8.0 },
        });
        let r = validate_nonlinearity(&nl, 1);
        assert!(!r.get("W0").unwrap().passed());
        assert!(r.get("W1").unwrap().passed());
    }

    #[test]
    fn quadratic_w_fails_origin_condition() {
        let nl = Nonlinearity::Custom(CustomNonlinearity {
            name: "-s^2".into(),
            w: Arc::new(|s| -s * s),
            w_prime: Arc::new(|s| -2.0 * s),
            w_second: Arc::new(|_| -2.0),
            exponents: Exponents { q: 3.0, p: 3.0, nu: 3.0 },
        });
        assert!(!validate_nonlinearity(&nl, 1).get("W").unwrap().passed());
    }

    fn line(l: f64, n: usize) -> Grid {
        crate::field::GridSpec::cube(1, l, n).unwrap().build().unwrap()
    }

    #[test]
    fn harmonic_potential_passes() {
        let r = validate_potential(&Potential::harmonic(1.0).unwrap(), &line(8.0, 256));
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn builtin_witnesses_hold_for_a_range_of_coefficients() {
        for c in [0.01, 0.1, 1.0, 10.0] {
            let g = line(8.0, 64);
            assert!(validate_potential(&Potential::harmonic(c).unwrap(), &g).passed());
            assert!(validate_potential(&Potential::quartic(c).unwrap(), &g).passed());
        }
    }

    #[test]
    fn zero_potential_flags_growth_hypotheses() {
        let r = validate_potential(&Potential::Zero, &line(8.0, 64));
        assert!(r.get("V0").unwrap().passed());
        let v = r.get("Vinf1").unwrap();
        assert!(!v.passed());
        assert!(v.detail.contains("V=0 runs valid only for V-free experiments"));
    }

    #[test]
    fn linear_growth_fails_a_greater_than_one() {
        let pot = Potential::Custom(CustomPotential {
            name: "|x|".into(),
            v: Arc::new(|x| norm_sq(x).sqrt()),
            grad: Arc::new(|x, g| {
                let r = norm_sq(x).sqrt().max(1e-300);
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj = xj / r;
                }
            }),
            witness: PotentialWitness { a: 1.0, b: 0.5, r1: 2.0 },
        });
        let r = validate_potential(&pot, &line(8.0, 64));
        assert!(!r.get("Vinf1").unwrap().passed());
        assert!(r.get("Vinf").unwrap().passed());
    }

    #[test]
    fn negative_potential_fails_v0() {
        let pot = Potential::Custom(CustomPotential {
            name: "-1".into(),
            v: Arc::new(|_| -1.0),
            grad: Arc::new(|_, _| {}),
            witness: PotentialWitness { a: 2.0, b: 0.5, r1: 2.0 },
        });
        assert!(!validate_potential(&pot, &line(4.0, 16)).get("V0").unwrap().passed());
    }
}

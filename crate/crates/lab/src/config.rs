//! JSON run configuration.
//!
//! ```json
//! {
//!   "experiment": "sweep",
//!   "model": {
//!     "nonlinearity": { "kind": "focusing_power", "c": 2.0, "p": 4.0 },
//!     "potential": { "kind": "quartic", "lambda": 0.1 },
//!     "h": 0.5, "alpha": 1.0, "sigma": 1.4142135623730951,
//!     "q0": [1.0], "v": [0.0], "K": 50.0
//!   },
//!   "grid": { "n": 4096, "L": 16.0 },
//!   "time": { "T": 8.0, "cadence": 20, "dt": "auto" },
//!   "sweep": { "h": [0.5, 0.25, 0.125] }
//! }
//! ```
//!
//! Everything else has defaults; see [`RunConfig::flagship`].

use std::fmt;
use std::path::{Path, PathBuf};

use nls_core::field::{Grid, GridSpec};
use nls_core::ground_state::MinimizeOptions;
use nls_core::physics::{ModelParams, Nonlinearity, Potential};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Stationary,
    Transport,
    Sweep,
    Stability,
    Concentration,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Transport => "transport",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Concentration => "concentration",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    FocusingPower { c: f64, p: f64 },
    DefocusingPower { c: f64, p: f64 },
    None,
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<Nonlinearity> {
        Ok(match *self {
            NonlinearityConfig::FocusingPower { c, p } => Nonlinearity::focusing(c, p)?,
            NonlinearityConfig::DefocusingPower { c, p } => Nonlinearity::defocusing(c, p)?,
            NonlinearityConfig::None => Nonlinearity::none(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Harmonic { kappa: f64 },
    Quartic { lambda: f64 },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        Ok(match *self {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Harmonic { kappa } => Potential::harmonic(kappa)?,
            PotentialConfig::Quartic { lambda } => Potential::quartic(lambda)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nonlinearity: NonlinearityConfig,
    pub potential: PotentialConfig,
    pub h: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub q0: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dims: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

fn one() -> usize {
    1
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::cube(self.dims, self.l, self.n).map_err(|e| LabError::Config(format!("grid: {e}")))
    }

    pub fn build(&self) -> Result<Grid> {
        Ok(self.spec()?.build()?)
    }
}

/// Rescaled (`h = 1`) box and solver settings for the ground state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub dtau: f64,
    pub tol: f64,
    pub tol_r: f64,
    pub max_iter: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        let opts = MinimizeOptions::default();
        Self {
            n: 1024,
            l: 32.0,
            dtau: opts.dtau,
            tol: opts.tol,
            tol_r: opts.tol_r,
            max_iter: opts.max_iter,
        }
    }
}

impl GroundConfig {
    pub fn options(&self) -> MinimizeOptions {
        MinimizeOptions {
            dtau: self.dtau,
            tol: self.tol,
            tol_r: self.tol_r,
            max_iter: self.max_iter,
            init: None,
        }
    }
}

/// `"auto"` or a fixed positive step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtChoice {
    Auto,
    Fixed(f64),
}

impl Serialize for DtChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DtChoice::Auto => s.serialize_str("auto"),
            DtChoice::Fixed(dt) => s.serialize_f64(*dt),
        }
    }
}

impl<'de> Deserialize<'de> for DtChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(dt) => Ok(DtChoice::Fixed(dt)),
            Raw::Text(s) if s == "auto" => Ok(DtChoice::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("dt must be \"auto\" or a number, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Observer cadence in steps.
    pub cadence: usize,
    pub dt: DtChoice,
    /// Length of the self-convergence probe used by `"auto"`.
    #[serde(default = "default_probe")]
    pub probe: f64,
    /// Barycenter tolerance for `"auto"`.
    #[serde(default = "default_auto_tol")]
    pub auto_tol: f64,
}

fn default_probe() -> f64 {
    1.0
}

fn default_auto_tol() -> f64 {
    2e-8
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `U((1 + delta) x)`, renormalized.
    Dilation,
    /// `U + delta max(U) exp(-((x - w)/w)^2)` along every axis, renormalized.
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub delta: f64,
    pub perturbation: Perturbation,
    /// Allowed `sup_t d(t) / d(0)`.
    pub max_ratio: f64,
    /// Allowed drift over the final half window, as a fraction of `sup_t d`.
    pub max_trend: f64,
    /// Bound on `sup_t d` used instead of the ratio when `delta = 0`.
    pub exact_bound: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            perturbation: Perturbation::Dilation,
            max_ratio: 10.0,
            max_trend: 0.1,
            exact_bound: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub ground: GroundConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_rhat")]
    pub rhat: f64,
    /// Bound on `sup_t fraction_outside` for the concentration experiment.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_rhat() -> f64 {
    nls_core::observables::DEFAULT_RHAT
}

fn default_epsilon() -> f64 {
    1e-3
}

impl RunConfig {
    /// The 1D cubic soliton in a weak quartic trap, swept over
    /// `h = 1/2, 1/4, 1/8`.
    pub fn flagship() -> Self {
        Self {
            experiment: ExperimentKind::Sweep,
            model: ModelConfig {
                nonlinearity: NonlinearityConfig::FocusingPower { c: 2.0, p: 4.0 },
                potential: PotentialConfig::Quartic { lambda: 0.1 },
                h: 0.5,
                alpha: 1.0,
                sigma: 2f64.sqrt(),
                q0: vec![1.0],
                v: vec![0.0],
                k: 50.0,
            },
            grid: GridConfig { dims: 1, n: 4096, l: 16.0 },
            ground: GroundConfig::default(),
            time: TimeConfig {
                t_end: 8.0,
                cadence: 20,
                dt: DtChoice::Auto,
                probe: default_probe(),
                auto_tol: default_auto_tol(),
            },
            sweep: SweepConfig { h: vec![0.5, 0.25, 0.125] },
            rhat: default_rhat(),
            epsilon: default_epsilon(),
            stability: StabilityConfig::default(),
            output: None,
        }
    }

    /// Free soliton at `h = 1` with a dilated start, tracked to `T = 50`.
    pub fn stability_default() -> Self {
        let mut cfg = Self::flagship();
        cfg.experiment = ExperimentKind::Stability;
        cfg.model.potential = PotentialConfig::Zero;
        cfg.model.h = 1.0;
        cfg.model.q0 = vec![0.0];
        cfg.grid = GridConfig { dims: 1, n: 1024, l: 32.0 };
        cfg.time = TimeConfig {
            t_end: 50.0,
            cadence: 10,
            dt: DtChoice::Fixed(0.01),
            probe: default_probe(),
            auto_tol: default_auto_tol(),
        };
        cfg.sweep = SweepConfig::default();
        cfg
    }

    /// Free ground-state data at `h = 1` and `h = 1/2`.
    pub fn stationary_default() -> Self {
        let mut cfg = Self::flagship();
        cfg.experiment = ExperimentKind::Stationary;
        cfg.model.potential = PotentialConfig::Zero;
        cfg.model.h = 1.0;
        cfg.model.q0 = vec![0.0];
        cfg.time = TimeConfig {
            t_end: 1.0,
            cadence: 1,
            dt: DtChoice::Fixed(2.5e-4),
            probe: default_probe(),
            auto_tol: default_auto_tol(),
        };
        cfg.sweep = SweepConfig { h: vec![1.0, 0.5] };
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::Config(msg));
        let dims = self.grid.dims;
        self.grid.spec()?;
        GridSpec::cube(dims, self.ground.l, self.ground.n).map_err(|e| LabError::Config(format!("ground grid: {e}")))?;
        if self.model.q0.len() != dims || self.model.v.len() != dims {
            return bad(format!("q0 and v must have {dims} components"));
        }
        if self.model.q0.iter().chain(&self.model.v).any(|x| !x.is_finite()) {
            return bad("q0 and v must be finite".into());
        }
        ModelParams::new(self.model.h, self.model.alpha, self.model.sigma)
            .map_err(|e| LabError::Config(format!("model: {e}")))?;
        if !(self.model.k > 0.0) {
            return bad(format!("K = {} must be > 0", self.model.k));
        }
        self.model.nonlinearity.build().map_err(|e| LabError::Config(e.to_string()))?;
        self.model.potential.build().map_err(|e| LabError::Config(e.to_string()))?;
        if !(self.time.t_end > 0.0 && self.time.t_end.is_finite()) {
            return bad(format!("T = {} must be > 0", self.time.t_end));
        }
        if self.time.cadence == 0 {
            return bad("cadence must be >= 1".into());
        }
        if let DtChoice::Fixed(dt) = self.time.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt = {dt} must be > 0"));
            }
        }
        if !(self.time.probe > 0.0 && self.time.auto_tol > 0.0) {
            return bad("probe length and auto_tol must be > 0".into());
        }
        for pair in self.sweep.h.windows(2) {
            if !(pair[1] < pair[0]) {
                return bad(format!("sweep h-list must be strictly decreasing, got {:?}", self.sweep.h));
            }
        }
        if self.sweep.h.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return bad("sweep h values must be > 0".into());
        }
        if !(self.rhat > 0.0 && self.epsilon > 0.0) {
            return bad("rhat and epsilon must be > 0".into());
        }
        if !(self.stability.delta >= 0.0 && self.stability.delta < 1.0) {
            return bad(format!("stability delta = {} must lie in [0, 1)", self.stability.delta));
        }
        Ok(())
    }

    /// The sweep list, or the single model `h` when the list is empty.
    pub fn h_values(&self) -> Vec<f64> {
        if self.sweep.h.is_empty() {
            vec![self.model.h]
        } else {
            self.sweep.h.clone()
        }
    }

    pub fn params(&self, h: f64) -> Result<ModelParams> {
        Ok(ModelParams::new(h, self.model.alpha, self.model.sigma)?)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        self.model.nonlinearity.build()
    }

    pub fn potential(&self) -> Result<Potential> {
        self.model.potential.build()
    }

    pub fn ground_grid(&self) -> Result<Grid> {
        Ok(GridSpec::cube(self.grid.dims, self.ground.l, self.ground.n)?.build()?)
    }
}

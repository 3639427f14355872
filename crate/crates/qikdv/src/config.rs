//! Run configuration: a TOML document with dotted sections, validated before
//! any computation. Every validation failure names the offending key.

use serde::{Deserialize, Serialize};

use crate::deformations::DeformationSpec;
use crate::error::{QiError, Result};
use crate::grid::GridField;
use crate::pde::{Equation, EvolutionProblem, FieldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    /// steps between trajectory samples; 0 keeps only endpoints
    #[serde(default)]
    pub sample_every: usize,
}

/// Initial condition: an analytic soliton profile or tabulated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialCondition {
    Soliton {
        c: f64,
        #[serde(default)]
        eps: f64,
        x0: f64,
        #[serde(default)]
        t0: f64,
    },
    Sech2 {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Samples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub equation: Equation,
    pub initial: InitialCondition,
    /// highest charge order to track (0..=2)
    #[serde(default)]
    pub orders: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// weak-coupling sweep, used by the NLS correspondence runner
    #[serde(default)]
    pub map: Option<MapConfig>,
}

fn default_seed() -> u64 {
    0
}

/// Parameters of one weak-coupling scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub eps_list: Vec<f64>,
    /// deformation strength for the beta = 1 + 5 eps / 3 pairing; absent
    /// means the undeformed correspondence
    #[serde(default)]
    pub eps_def: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| QiError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid.length > 0.0 && self.grid.length.is_finite()) {
            return Err(QiError::validation("grid.length must be positive"));
        }
        if self.grid.n < 8 || !self.grid.n.is_power_of_two() {
            return Err(QiError::validation(
                "grid.n must be a power of two, at least 8",
            ));
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return Err(QiError::validation("time.dt must be positive"));
        }
        if !(self.time.t_end >= 0.0 && self.time.t_end.is_finite()) {
            return Err(QiError::validation("time.t_end must be nonnegative"));
        }
        if self.orders > 2 {
            return Err(QiError::validation("orders must be at most 2"));
        }
        match &self.initial {
            InitialCondition::Soliton { c, eps, .. } => {
                if !(*c > 0.0) {
                    return Err(QiError::validation("initial.c must be positive"));
                }
                if !(*eps < 1.0) {
                    return Err(QiError::validation("initial.eps must be below 1"));
                }
            }
            InitialCondition::Sech2 { width, .. } => {
                if !(*width > 0.0) {
                    return Err(QiError::validation("initial.width must be positive"));
                }
            }
            InitialCondition::Samples { values } => {
                if values.len() != self.grid.n {
                    return Err(QiError::validation(
                        "initial.values length must equal grid.n",
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(QiError::validation("initial.values must be finite"));
                }
            }
        }
        if let Some(map) = &self.map {
            if map.eps_list.len() < 2 {
                return Err(QiError::validation("map.eps_list: need >= 2 points"));
            }
            for e in &map.eps_list {
                if !(*e > 0.0 && *e <= 0.1) {
                    return Err(QiError::validation("map.eps_list entries must be in (0, 0.1]"));
                }
            }
            if let Some(d) = map.eps_def {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(QiError::validation("map.eps_def must be positive"));
                }
            }
        }
        self.problem().validate()
    }

    pub fn problem(&self) -> EvolutionProblem {
        EvolutionProblem {
            equation: self.equation,
            dt: self.time.dt,
            t_end: self.time.t_end,
        }
    }

    /// Materialize the initial field on the configured grid.
    pub fn initial_field(&self) -> Result<GridField> {
        match &self.initial {
            InitialCondition::Soliton { c, eps, x0, t0 } => {
                let f = crate::pde::soliton_scaled(*c, *eps, *x0, *t0);
                GridField::from_fn(self.grid.length, self.grid.n, |x| f(x, 0.0))
            }
            InitialCondition::Sech2 {
                amplitude,
                center,
                width,
            } => GridField::from_fn(self.grid.length, self.grid.n, |x| {
                let s = 1.0 / (((x - center) / width).cosh());
                amplitude * s * s
            }),
            InitialCondition::Samples { values } => {
                GridField::new(self.grid.length, values.clone())
            }
        }
    }

    /// Analytic reference profile at time t, when the initial condition has
    /// one (soliton under the plain or scaled flow).
    pub fn analytic_at(&self, t: f64) -> Option<GridField> {
        let (c, eps, x0, t0) = match &self.initial {
            InitialCondition::Soliton { c, eps, x0, t0 } => (*c, *eps, *x0, *t0),
            _ => return None,
        };
        let flow_eps = match self.equation {
            Equation::Kdv => 0.0,
            Equation::ScaledKdv { epsilon } => epsilon,
            _ => return None,
        };
        if flow_eps != eps {
            return None;
        }
        let f = crate::pde::soliton_scaled(c, eps, x0, t0);
        GridField::from_fn(self.grid.length, self.grid.n, |x| f(x, t)).ok()
    }

    /// The deformation pair seen by the charge machinery.
    pub fn deformation(&self) -> DeformationSpec {
        match self.equation {
            Equation::DeformedKdv { spec } => spec,
            _ => DeformationSpec::None,
        }
    }

    pub fn initial_state(&self) -> Result<FieldState> {
        Ok(FieldState::Real(self.initial_field()?))
    }
}

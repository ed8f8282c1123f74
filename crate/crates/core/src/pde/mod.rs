//! Reference solution operators for the PDE examples.

mod burgers;
mod elliptic;
mod heat;
mod lipschitz;
mod phantom;
mod poisson;
mod transport;

pub use burgers::{burgers_solve, BurgersOperator, BurgersOutput};
pub use elliptic::{elliptic_solve, Boundary, EllipticOperator};
pub use heat::{heat_lipschitz, heat_solve, HeatNormReport, HeatOperator};
pub use lipschitz::{estimate_operator_lipschitz, LipschitzReport, ScaledOperator};
pub use phantom::{phantom_media, Ellipse, PhantomFamily, PhantomSampler};
pub use poisson::{poisson_cell_average, poisson_kernel, poisson_solve, PoissonOperator};
pub use transport::{transport_solve, Drift, TransportOperator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, NormKind};

/// A forward map between grid functions.
pub trait SolutionOperator: Send + Sync {
    fn id(&self) -> String;
    fn input_grid(&self) -> &Grid;
    fn output_grid(&self) -> &Grid;
    fn apply(&self, u: &GridFunction) -> Result<GridFunction>;

    /// A provable Lipschitz bound between the given norms, if one is known.
    fn analytic_lipschitz(&self, _x: NormKind, _y: NormKind) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorKind {
    Poisson,
    Heat {
        time: f64,
    },
    Transport {
        time: f64,
        drift: Drift,
        #[serde(default = "default_rk_steps")]
        steps: usize,
    },
    Burgers {
        viscosity: f64,
        time: f64,
        #[serde(default = "default_images")]
        images: usize,
        #[serde(default = "default_gate")]
        gate_constant: f64,
    },
    Elliptic {
        boundary: Boundary,
        alpha: f64,
        beta: f64,
    },
}

fn default_rk_steps() -> usize {
    64
}

fn default_images() -> usize {
    3
}

fn default_gate() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    1e-12
}

/// Operator kind, parameters, and discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub equation: OperatorKind,
    pub input_grid: Grid,
    pub output_grid: Grid,
    /// Iterative solver tolerance where one applies.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, input_grid: Grid, output_grid: Grid) -> Self {
        OperatorSpec {
            equation: kind,
            input_grid,
            output_grid,
            tolerance: default_tolerance(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.equation {
            OperatorKind::Poisson => "poisson",
            OperatorKind::Heat { .. } => "heat",
            OperatorKind::Transport { .. } => "transport",
            OperatorKind::Burgers { .. } => "burgers",
            OperatorKind::Elliptic { .. } => "elliptic",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (gi, go) = (&self.input_grid, &self.output_grid);
        if gi.dim() != go.dim() {
            return Err(Error::invalid("input and output grids differ in dimension"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        match &self.equation {
            OperatorKind::Poisson => {
                if !(1..=3).contains(&gi.dim()) {
                    return Err(Error::Unsupported(format!(
                        "poisson in dimension {}; supported: 1, 2, 3",
                        gi.dim()
                    )));
                }
            }
            OperatorKind::Heat { time } => {
                if !(*time > 0.0) {
                    return Err(Error::invalid("heat needs T > 0"));
                }
            }
            OperatorKind::Transport { time, drift, steps } => {
                if !(*time > 0.0) {
                    return Err(Error::invalid("transport needs T > 0"));
                }
                if *steps == 0 {
                    return Err(Error::invalid("transport needs at least one RK4 step"));
                }
                drift.validate(gi.dim())?;
            }
            OperatorKind::Burgers {
                viscosity,
                time,
                gate_constant,
                ..
            } => {
                if !(*viscosity > 0.0) || !(*time > 0.0) || !(*gate_constant > 0.0) {
                    return Err(Error::invalid("burgers needs ν > 0, T > 0, and c > 0"));
                }
                if gi.dim() != 1 {
                    return Err(Error::Unsupported("burgers is one-dimensional".into()));
                }
                let pi = std::f64::consts::PI;
                for g in [gi, go] {
                    if (g.lo() + pi).abs() > 1e-12 || (g.hi() - pi).abs() > 1e-12 {
                        return Err(Error::invalid("burgers grids must span [-π, π]"));
                    }
                }
            }
            OperatorKind::Elliptic { alpha, beta, .. } => {
                if !(*alpha > 0.0 && alpha <= beta) {
                    return Err(Error::invalid("elliptic needs 0 < α ≤ β"));
                }
                if gi.dim() != 2 {
                    return Err(Error::Unsupported("elliptic is two-dimensional".into()));
                }
                if gi != go {
                    return Err(Error::invalid("elliptic solves on the media grid"));
                }
                if gi.points_per_axis() < 3 {
                    return Err(Error::invalid("elliptic grid needs an interior node"));
                }
            }
        }
        Ok(())
    }
}

/// A prepared operator of any kind.
pub enum Operator {
    Poisson(PoissonOperator),
    Heat(HeatOperator),
    Transport(TransportOperator),
    Burgers(BurgersOperator),
    Elliptic(EllipticOperator),
}

impl Operator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.equation {
            OperatorKind::Poisson => Operator::Poisson(PoissonOperator::new(spec)?),
            OperatorKind::Heat { .. } => Operator::Heat(HeatOperator::new(spec)?),
            OperatorKind::Transport { .. } => Operator::Transport(TransportOperator::new(spec)?),
            OperatorKind::Burgers { .. } => Operator::Burgers(BurgersOperator::new(spec)?),
            OperatorKind::Elliptic { .. } => Operator::Elliptic(EllipticOperator::new(spec)?),
        })
    }

    fn inner(&self) -> &dyn SolutionOperator {
        match self {
            Operator::Poisson(o) => o,
            Operator::Heat(o) => o,
            Operator::Transport(o) => o,
            Operator::Burgers(o) => o,
            Operator::Elliptic(o) => o,
        }
    }
}

impl SolutionOperator for Operator {
    fn id(&self) -> String {
        self.inner().id()
    }
    fn input_grid(&self) -> &Grid {
        self.inner().input_grid()
    }
    fn output_grid(&self) -> &Grid {
        self.inner().output_grid()
    }
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.inner().apply(u)
    }
    fn analytic_lipschitz(&self, x: NormKind, y: NormKind) -> Option<f64> {
        self.inner().analytic_lipschitz(x, y)
    }
}

pub(crate) fn check_input(u: &GridFunction, grid: &Grid) -> Result<()> {
    if u.grid() == grid {
        Ok(())
    } else if u.grid().len() != grid.len() {
        Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: u.grid().len(),
        })
    } else {
        Err(Error::invalid("input grid differs from the operator grid"))
    }
}

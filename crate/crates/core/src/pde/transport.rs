use serde::{Deserialize, Serialize};

use super::{check_input, OperatorKind, OperatorSpec, SolutionOperator};
use crate::error::{Error, Result};
use crate::grid::{interpolation_weights, Grid, GridFunction, NormKind};

/// Velocity field `a(x)` of `u_t + a·∇u = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Constant { velocity: Vec<f64> },
    /// `a(x) = rate · x`.
    Linear { rate: f64 },
    /// `a(x, y) = ω (-y, x)`.
    Rotation { omega: f64 },
}

impl Drift {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Drift::Constant { velocity } if velocity.len() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                got: velocity.len(),
            }),
            Drift::Rotation { .. } if dim != 2 => {
                Err(Error::Unsupported("rotation drift is two-dimensional".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Drift::Constant { velocity } => velocity.clone(),
            Drift::Linear { rate } => x.iter().map(|v| rate * v).collect(),
            Drift::Rotation { omega } => vec![-omega * x[1], omega * x[0]],
        }
    }

    /// `φ_T^{-1}(x)`: integrate `dx/ds = -a(x)` over `[0, T]` with classical RK4.
    pub fn foot_point(&self, x: &[f64], time: f64, steps: usize) -> Vec<f64> {
        let h = time / steps as f64;
        let axpy = |p: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            p.iter().zip(k).map(|(a, b)| a - s * b).collect()
        };
        let mut p = x.to_vec();
        for _ in 0..steps {
            let k1 = self.eval(&p);
            let k2 = self.eval(&axpy(&p, &k1, h / 2.0));
            let k3 = self.eval(&axpy(&p, &k2, h / 2.0));
            let k4 = self.eval(&axpy(&p, &k3, h));
            for a in 0..p.len() {
                p[a] -= h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
        }
        p
    }
}

/// `u(T, x) = u₀(φ_T^{-1}(x))` with multilinear interpolation of `u₀`.
pub struct TransportOperator {
    spec: OperatorSpec,
    feet: Vec<Vec<f64>>,
    stencils: Vec<Vec<(usize, f64)>>,
}

impl TransportOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        spec.validate()?;
        let OperatorKind::Transport {
            time,
            ref drift,
            steps,
        } = spec.equation
        else {
            return Err(Error::invalid("not a transport operator"));
        };
        let mut feet = Vec::with_capacity(spec.output_grid.len());
        let mut stencils = Vec::with_capacity(spec.output_grid.len());
        for (i, x) in spec.output_grid.nodes().into_iter().enumerate() {
            let foot = drift.foot_point(&x, time, steps);
            let stencil = interpolation_weights(&spec.input_grid, &foot).map_err(|_| {
                Error::invalid(format!(
                    "characteristic from output node {i} at {x:?} leaves the input box at {foot:?}"
                ))
            })?;
            feet.push(foot);
            stencils.push(stencil);
        }
        Ok(TransportOperator {
            spec: spec.clone(),
            feet,
            stencils,
        })
    }

    pub fn foot_points(&self) -> &[Vec<f64>] {
        &self.feet
    }

    /// Interpolation stencil per output node.
    pub fn stencils(&self) -> &[Vec<(usize, f64)>] {
        &self.stencils
    }
}

impl SolutionOperator for TransportOperator {
    fn id(&self) -> String {
        format!("transport(d={})", self.spec.input_grid.dim())
    }

    fn input_grid(&self) -> &Grid {
        &self.spec.input_grid
    }

    fn output_grid(&self) -> &Grid {
        &self.spec.output_grid
    }

    fn apply(&self, u0: &GridFunction) -> Result<GridFunction> {
        check_input(u0, &self.spec.input_grid)?;
        let v = u0.values();
        let values = self
            .stencils
            .iter()
            .map(|s| s.iter().map(|&(k, w)| w * v[k]).sum())
            .collect();
        GridFunction::new(self.spec.output_grid.clone(), values)
    }

    /// Multilinear interpolation with non-negative weights summing to one is a
    /// sup-norm contraction.
    fn analytic_lipschitz(&self, x: NormKind, y: NormKind) -> Option<f64> {
        match (x, y) {
            (NormKind::Linf | NormKind::Holder { .. }, NormKind::Linf) => Some(1.0),
            _ => None,
        }
    }
}

pub fn transport_solve(u0: &GridFunction, spec: &OperatorSpec) -> Result<GridFunction> {
    TransportOperator::new(spec)?.apply(u0)
}

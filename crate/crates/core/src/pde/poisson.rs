use rayon::prelude::*;

use super::{check_input, OperatorSpec, SolutionOperator};
use crate::error::Result;
use crate::grid::{quadrature_weights, Grid, GridFunction, NormKind};

use std::f64::consts::PI;

/// Fundamental solution of `Δu = δ` at distance `r > 0`.
pub fn poisson_kernel(dim: usize, r: f64) -> f64 {
    match dim {
        1 => r / 2.0,
        2 => r.ln() / (2.0 * PI),
        _ => -1.0 / (4.0 * PI * r),
    }
}

/// Mean of the kernel over the cube `[-h/2, h/2]^dim`.
pub fn poisson_cell_average(dim: usize, h: f64) -> f64 {
    match dim {
        1 => h / 8.0,
        2 => {
            // mean of ln|x| over the unit square centred at 0
            let c0 = -(2.0f64.ln()) / 2.0 - 1.5 + PI / 4.0;
            (h.ln() + c0) / (2.0 * PI)
        }
        _ => {
            // mean of 1/|x| over the unit cube centred at 0
            let c3 = 3.0 * (2.0 + 3.0f64.sqrt()).ln() - PI / 2.0;
            -c3 / (4.0 * PI * h)
        }
    }
}

/// `u(x) = Σ_y w_y Ψ(x - y) f(y)` with cell-averaged diagonal.
pub struct PoissonOperator {
    spec: OperatorSpec,
    weights: Vec<f64>,
    table: Option<Vec<f64>>,
}

const MAX_TABLE: usize = 1 << 23;

impl PoissonOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        spec.validate()?;
        let mut op = PoissonOperator {
            spec: spec.clone(),
            weights: quadrature_weights(&spec.input_grid),
            table: None,
        };
        if spec.input_grid.len() * spec.output_grid.len() <= MAX_TABLE {
            op.table = Some(op.build_table());
        }
        Ok(op)
    }

    fn row(&self, x: &[f64], inputs: &[Vec<f64>]) -> Vec<f64> {
        let g = &self.spec.input_grid;
        let d = g.dim();
        let h = g.spacing();
        inputs
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| {
                let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let k = if r < 1e-9 * h {
                    poisson_cell_average(d, h)
                } else {
                    poisson_kernel(d, r)
                };
                w * k
            })
            .collect()
    }

    fn build_table(&self) -> Vec<f64> {
        let inputs = self.spec.input_grid.nodes();
        self.spec
            .output_grid
            .nodes()
            .par_iter()
            .flat_map_iter(|x| self.row(x, &inputs))
            .collect()
    }

    /// The `out × in` matrix of the discrete convolution, row-major.
    pub fn matrix(&self) -> Vec<f64> {
        self.table.clone().unwrap_or_else(|| self.build_table())
    }

    fn sup_row_sum(&self) -> f64 {
        let n = self.spec.input_grid.len();
        match &self.table {
            Some(t) => t
                .chunks(n)
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            None => {
                let inputs = self.spec.input_grid.nodes();
                self.spec
                    .output_grid
                    .nodes()
                    .par_iter()
                    .map(|x| self.row(x, &inputs).iter().map(|v| v.abs()).sum::<f64>())
                    .reduce(|| 0.0, f64::max)
            }
        }
    }
}

impl SolutionOperator for PoissonOperator {
    fn id(&self) -> String {
        format!("poisson(d={})", self.spec.input_grid.dim())
    }

    fn input_grid(&self) -> &Grid {
        &self.spec.input_grid
    }

    fn output_grid(&self) -> &Grid {
        &self.spec.output_grid
    }

    fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        check_input(f, &self.spec.input_grid)?;
        let fv = f.values();
        let values: Vec<f64> = match &self.table {
            Some(t) => t
                .par_chunks(fv.len())
                .map(|row| row.iter().zip(fv).map(|(a, b)| a * b).sum())
                .collect(),
            None => {
                let inputs = self.spec.input_grid.nodes();
                self.spec
                    .output_grid
                    .nodes()
                    .par_iter()
                    .map(|x| self.row(x, &inputs).iter().zip(fv).map(|(a, b)| a * b).sum())
                    .collect()
            }
        };
        GridFunction::new(self.spec.output_grid.clone(), values)
    }

    /// Sup-to-sup norm of the discrete convolution (the quadrature analogue of
    /// `‖Ψ‖_{L¹}`), times `|Ω|^{1/p}` for an `L^p` output norm. Valid whenever
    /// the input norm dominates the sup norm.
    fn analytic_lipschitz(&self, x: NormKind, y: NormKind) -> Option<f64> {
        match x {
            NormKind::Linf | NormKind::Holder { .. } => {}
            _ => return None,
        }
        let b = self.sup_row_sum();
        match y {
            NormKind::Linf => Some(b),
            NormKind::Lp { p } => Some(self.spec.output_grid.volume().powf(1.0 / p) * b),
            _ => None,
        }
    }
}

pub fn poisson_solve(f: &GridFunction, spec: &OperatorSpec) -> Result<GridFunction> {
    PoissonOperator::new(spec)?.apply(f)
}

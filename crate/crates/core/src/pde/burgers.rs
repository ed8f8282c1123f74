use serde::{Deserialize, Serialize};

use super::{check_input, OperatorKind, OperatorSpec, SolutionOperator};
use crate::error::{Error, Result};
use crate::grid::{norm, quadrature_weights, Grid, GridFunction, NormKind};

use std::f64::consts::PI;

/// Terminal state together with the smallness-gate outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurgersOutput {
    pub solution: GridFunction,
    /// `T ≤ c ‖u₀‖_{H¹}^{-4}`.
    pub gate_passed: bool,
    pub gate_limit: f64,
    pub input_h1: f64,
}

/// Viscous Burgers on the periodic interval `[-π, π]` by Cole–Hopf:
/// `v₀ = exp(-(1/2ν) ∫ u₀)`, `v = K ∗ v₀`, `u = -2ν v_x / v`.
pub struct BurgersOperator {
    spec: OperatorSpec,
    viscosity: f64,
    time: f64,
    gate_constant: f64,
    images: usize,
    weights: Vec<f64>,
    // one out × in table per image shift j = -images..=images
    k_tables: Vec<Vec<f64>>,
    kx_tables: Vec<Vec<f64>>,
}

impl BurgersOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        spec.validate()?;
        let OperatorKind::Burgers {
            viscosity,
            time,
            images,
            gate_constant,
        } = spec.equation
        else {
            return Err(Error::invalid("not a burgers operator"));
        };
        let xs = spec.output_grid.axis_coords();
        let ys = spec.input_grid.axis_coords();
        let weights = quadrature_weights(&spec.input_grid);
        let nt = 4.0 * viscosity * time;
        let norm_c = (PI * nt).powf(-0.5);
        let mut k_tables = Vec::new();
        let mut kx_tables = Vec::new();
        for j in -(images as i64)..=(images as i64) {
            let shift = 2.0 * PI * j as f64;
            let mut k = Vec::with_capacity(xs.len() * ys.len());
            let mut kx = Vec::with_capacity(xs.len() * ys.len());
            for &x in &xs {
                for (&y, &w) in ys.iter().zip(&weights) {
                    let z = x - y - shift;
                    let kv = norm_c * (-z * z / nt).exp();
                    k.push(w * kv);
                    kx.push(w * kv * (-z / (2.0 * viscosity * time)));
                }
            }
            k_tables.push(k);
            kx_tables.push(kx);
        }
        Ok(BurgersOperator {
            spec: spec.clone(),
            viscosity,
            time,
            gate_constant,
            images,
            weights,
            k_tables,
            kx_tables,
        })
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    /// Image tables `(K_j, ∂ₓK_j)` for `j = -images..=images`, quadrature
    /// weights folded in.
    pub fn kernel_tables(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.k_tables, &self.kx_tables)
    }

    pub fn images(&self) -> usize {
        self.images
    }

    /// Cumulative trapezoid integral of `u₀` from `-π`.
    pub fn cumulative_integral(&self, u0: &GridFunction) -> Vec<f64> {
        let v = u0.values();
        let h = self.spec.input_grid.spacing();
        let mut out = vec![0.0; v.len()];
        for k in 1..v.len() {
            out[k] = out[k - 1] + 0.5 * h * (v[k - 1] + v[k]);
        }
        out
    }

    pub fn solve(&self, u0: &GridFunction) -> Result<BurgersOutput> {
        check_input(u0, &self.spec.input_grid)?;
        let nu = self.viscosity;
        let integral = self.cumulative_integral(u0);
        let mass = *integral.last().unwrap();
        let exps: Vec<f64> = integral.iter().map(|i| -i / (2.0 * nu)).collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v0: Vec<f64> = exps.iter().map(|e| (e - top).exp()).collect();
        let m_in = v0.len();
        let m_out = self.spec.output_grid.len();
        let mut num = vec![0.0; m_out];
        let mut den = vec![0.0; m_out];
        for (idx, j) in (-(self.images as i64)..=(self.images as i64)).enumerate() {
            let factor = (-(j as f64) * mass / (2.0 * nu)).exp();
            if !factor.is_finite() {
                return Err(Error::Numerical("image factor overflow in Cole–Hopf sum".into()));
            }
            let (k, kx) = (&self.k_tables[idx], &self.kx_tables[idx]);
            for i in 0..m_out {
                let row = i * m_in..(i + 1) * m_in;
                den[i] += factor * k[row.clone()].iter().zip(&v0).map(|(a, b)| a * b).sum::<f64>();
                num[i] += factor * kx[row].iter().zip(&v0).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let mut values = Vec::with_capacity(m_out);
        for i in 0..m_out {
            if !(den[i] > 1e-12) {
                return Err(Error::Numerical(format!(
                    "Cole–Hopf denominator {:.3e} below 1e-12 at node {i}",
                    den[i]
                )));
            }
            values.push(-2.0 * nu * num[i] / den[i]);
        }
        let solution = GridFunction::new(self.spec.output_grid.clone(), values)?;
        let input_h1 = norm(u0, NormKind::SobolevH1)?;
        let gate_limit = if input_h1 > 0.0 {
            self.gate_constant * input_h1.powi(-4)
        } else {
            f64::INFINITY
        };
        Ok(BurgersOutput {
            solution,
            gate_passed: self.time <= gate_limit,
            gate_limit,
            input_h1,
        })
    }

    pub fn input_weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SolutionOperator for BurgersOperator {
    fn id(&self) -> String {
        format!("burgers(nu={},T={})", self.viscosity, self.time)
    }

    fn input_grid(&self) -> &Grid {
        &self.spec.input_grid
    }

    fn output_grid(&self) -> &Grid {
        &self.spec.output_grid
    }

    fn apply(&self, u0: &GridFunction) -> Result<GridFunction> {
        Ok(self.solve(u0)?.solution)
    }
}

pub fn burgers_solve(u0: &GridFunction, spec: &OperatorSpec) -> Result<BurgersOutput> {
    BurgersOperator::new(spec)?.solve(u0)
}

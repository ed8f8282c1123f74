use serde::{Deserialize, Serialize};

use super::{check_input, OperatorKind, OperatorSpec, SolutionOperator};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// Dirichlet data `f` on the boundary of the square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Boundary {
    Constant { value: f64 },
    /// `gx·x + gy·y + offset`.
    Linear { gx: f64, gy: f64, offset: f64 },
    /// `x² - y²`.
    Saddle,
    /// `sin(πx) sinh(πy) / sinh(π)`.
    SinSinh,
}

impl Boundary {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Boundary::Constant { value } => value,
            Boundary::Linear { gx, gy, offset } => gx * x + gy * y + offset,
            Boundary::Saddle => x * x - y * y,
            Boundary::SinSinh => (PI * x).sin() * (PI * y).sinh() / PI.sinh(),
        }
    }
}

/// `-div(a ∇u) = 0`, `u = f` on the boundary: five-point stencil with
/// harmonic-mean face coefficients, Jacobi-preconditioned CG.
pub struct EllipticOperator {
    spec: OperatorSpec,
    boundary: Boundary,
    alpha: f64,
    beta: f64,
}

impl EllipticOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self> {
        spec.validate()?;
        let OperatorKind::Elliptic {
            ref boundary,
            alpha,
            beta,
        } = spec.equation
        else {
            return Err(Error::invalid("not an elliptic operator"));
        };
        Ok(EllipticOperator {
            spec: spec.clone(),
            boundary: boundary.clone(),
            alpha,
            beta,
        })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }
}

struct Stencil {
    m: usize,
    // face between (i, j) and (i + 1, j), index i * m + j
    ax: Vec<f64>,
    // face between (i, j) and (i, j + 1)
    ay: Vec<f64>,
}

impl Stencil {
    fn interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.m && j + 1 < self.m
    }

    /// Faces of node (i, j) as (neighbour, coefficient).
    fn faces(&self, i: usize, j: usize) -> [(usize, usize, f64); 4] {
        let m = self.m;
        [
            (i - 1, j, self.ax[(i - 1) * m + j]),
            (i + 1, j, self.ax[i * m + j]),
            (i, j - 1, self.ay[i * m + j - 1]),
            (i, j + 1, self.ay[i * m + j]),
        ]
    }

    /// `A p` on interior nodes; boundary entries of `p` are treated as zero.
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let m = self.m;
        for i in 1..m - 1 {
            for j in 1..m - 1 {
                let c = i * m + j;
                let mut acc = 0.0;
                for (ni, nj, a) in self.faces(i, j) {
                    let pn = if self.interior(ni, nj) { p[ni * m + nj] } else { 0.0 };
                    acc += a * (p[c] - pn);
                }
                out[c] = acc;
            }
        }
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl SolutionOperator for EllipticOperator {
    fn id(&self) -> String {
        format!("elliptic(alpha={},beta={})", self.alpha, self.beta)
    }

    fn input_grid(&self) -> &Grid {
        &self.spec.input_grid
    }

    fn output_grid(&self) -> &Grid {
        &self.spec.output_grid
    }

    fn apply(&self, a: &GridFunction) -> Result<GridFunction> {
        check_input(a, &self.spec.input_grid)?;
        let g = &self.spec.input_grid;
        let m = g.points_per_axis();
        let slack = 1e-12 * self.beta;
        // values indexed as i * m + j with i along axis 0
        let idx = |i: usize, j: usize| g.flat_index(&[i, j]);
        let mut coef = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let v = a.values()[idx(i, j)];
                if v < self.alpha - slack || v > self.beta + slack {
                    return Err(Error::invalid(format!(
                        "media value {v} at node ({i}, {j}) outside [{}, {}]",
                        self.alpha, self.beta
                    )));
                }
                coef[i * m + j] = v;
            }
        }
        let mut ax = vec![0.0; m * m];
        let mut ay = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                if i + 1 < m {
                    ax[i * m + j] = harmonic(coef[i * m + j], coef[(i + 1) * m + j]);
                }
                if j + 1 < m {
                    ay[i * m + j] = harmonic(coef[i * m + j], coef[i * m + j + 1]);
                }
            }
        }
        let st = Stencil { m, ax, ay };
        let coords = g.axis_coords();
        let mut u = vec![0.0; m * m];
        let mut b = vec![0.0; m * m];
        let mut diag = vec![1.0; m * m];
        for i in 0..m {
            for j in 0..m {
                if !st.interior(i, j) {
                    u[i * m + j] = self.boundary.eval(coords[i], coords[j]);
                }
            }
        }
        for i in 1..m - 1 {
            for j in 1..m - 1 {
                let mut d = 0.0;
                for (ni, nj, f) in st.faces(i, j) {
                    d += f;
                    if !st.interior(ni, nj) {
                        b[i * m + j] += f * u[ni * m + nj];
                    }
                }
                diag[i * m + j] = d;
            }
        }
        let x = pcg(&st, &b, &diag, self.spec.tolerance.min(1e-10))?;
        for i in 1..m - 1 {
            for j in 1..m - 1 {
                u[i * m + j] = x[i * m + j];
            }
        }
        let mut values = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                values[idx(i, j)] = u[i * m + j];
            }
        }
        GridFunction::new(g.clone(), values)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(st: &Stencil, b: &[f64], diag: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 100;
    for _ in 0..max_iter {
        st.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot(&r, &r).sqrt() <= tol * b_norm {
            return Ok(x);
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / b_norm,
    })
}

pub fn elliptic_solve(a: &GridFunction, spec: &OperatorSpec) -> Result<GridFunction> {
    EllipticOperator::new(spec)?.apply(a)
}

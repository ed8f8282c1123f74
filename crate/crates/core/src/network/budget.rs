use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::constraints::ConstraintSet;
use crate::error::{Error, Result};

/// Which architecture prescription to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Theorem {
    /// Sparse bounded family, general inputs.
    T1,
    /// Loose family, general inputs.
    T2,
    /// Loose family, inputs on a `d₀`-dimensional manifold.
    T3,
    /// Loose family, single-block low-complexity operator.
    T4,
    /// Loose family, multi-block low-complexity operator.
    T5,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Theorem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(Theorem::T1),
            "T2" => Ok(Theorem::T2),
            "T3" => Ok(Theorem::T3),
            "T4" => Ok(Theorem::T4),
            "T5" => Ok(Theorem::T5),
            _ => Err(Error::invalid(format!("unknown theorem `{s}`; expected T1..T5"))),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetInputs {
    pub theorem: Theorem,
    pub n: usize,
    pub d_x: usize,
    pub d_y: usize,
    #[serde(default)]
    pub d0: Option<usize>,
    #[serde(default)]
    pub d_max: Option<usize>,
    #[serde(default)]
    pub l_max: Option<usize>,
    /// Number of composed blocks `k` for T5; depth becomes `kL`.
    #[serde(default)]
    pub blocks: Option<usize>,
    /// `L_{E_Y}`.
    #[serde(default = "one")]
    pub encoder_lipschitz: f64,
    /// `R_Y`.
    #[serde(default = "one")]
    pub output_radius: f64,
    #[serde(default = "one")]
    pub c_l: f64,
    #[serde(default = "one")]
    pub c_p: f64,
}

impl BudgetInputs {
    pub fn new(theorem: Theorem, n: usize, d_x: usize, d_y: usize) -> Self {
        BudgetInputs {
            theorem,
            n,
            d_x,
            d_y,
            d0: None,
            d_max: None,
            l_max: None,
            blocks: None,
            encoder_lipschitz: 1.0,
            output_radius: 1.0,
            c_l: 1.0,
            c_p: 1.0,
        }
    }

    pub fn with_d0(mut self, d0: usize) -> Self {
        self.d0 = Some(d0);
        self
    }

    pub fn with_structure(mut self, d_max: usize, l_max: usize) -> Self {
        self.d_max = Some(d_max);
        self.l_max = Some(l_max);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureBudget {
    pub inputs: BudgetInputs,
    pub depth: usize,
    pub width: usize,
    /// `K` (T1 only).
    pub nonzeros: Option<usize>,
    /// `κ` (T1 only).
    pub weight_bound: Option<f64>,
    /// Output bound `M`.
    pub clamp: f64,
    /// The prescribed product `Lp` (or `L̃p̃` for T3).
    pub lp: Option<usize>,
}

impl ArchitectureBudget {
    pub fn constraint_set(&self) -> ConstraintSet {
        match (self.nonzeros, self.weight_bound) {
            (Some(k), Some(kappa)) => ConstraintSet::Full {
                depth: self.depth,
                width: self.width,
                nonzeros: k,
                bound: kappa,
                clamp: self.clamp,
            },
            _ => ConstraintSet::Loose {
                depth: self.depth,
                width: self.width,
                clamp: self.clamp,
            },
        }
    }
}

/// Ceiling that ignores floating-point overshoot (`4096^{1/6}` evaluates to
/// slightly above 4), floored at 1.
fn ceil_int(x: f64) -> usize {
    ((x - 1e-9).ceil() as usize).max(1)
}

fn require(v: Option<usize>, name: &str, th: Theorem) -> Result<usize> {
    match v {
        Some(x) if x >= 1 => Ok(x),
        Some(_) => Err(Error::invalid(format!("{th} needs {name} >= 1"))),
        None => Err(Error::invalid(format!("{th} needs {name}"))),
    }
}

/// Split a product `Lp` into `L = max(2, ⌈c_L √Lp⌉)` and
/// `p = ⌈c_p Lp / L⌉ · d_Y`.
fn factor(lp: usize, d_y: usize, c_l: f64, c_p: f64) -> (usize, usize) {
    let l = ceil_int(c_l * (lp as f64).sqrt()).max(2);
    let p = ceil_int(c_p * lp as f64 / l as f64) * d_y;
    (l, p)
}

pub fn budget_from_theorem(inputs: &BudgetInputs) -> Result<ArchitectureBudget> {
    let th = inputs.theorem;
    if inputs.n == 0 || inputs.d_x == 0 || inputs.d_y == 0 {
        return Err(Error::invalid("budget needs n, d_X, d_Y >= 1"));
    }
    if !(inputs.c_l >= 1.0 && inputs.c_p >= 1.0) {
        return Err(Error::invalid("budget multipliers must be >= 1"));
    }
    if !(inputs.encoder_lipschitz > 0.0 && inputs.output_radius > 0.0) {
        return Err(Error::invalid("L_EY and R_Y must be positive"));
    }
    let n = inputs.n as f64;
    let dx = inputs.d_x as f64;
    let dy = inputs.d_y as f64;
    let scale = inputs.encoder_lipschitz * inputs.output_radius;
    let mut clamp = dy.sqrt() * scale;
    let mut nonzeros = None;
    let mut weight_bound = None;
    let (depth, width, lp) = match th {
        Theorem::T1 => {
            let l = ceil_int(inputs.c_l * (n / dy).ln()).max(2);
            let p = ceil_int(inputs.c_p * dy.powf((2.0 - dx) / (2.0 + dx)) * n.powf(dx / (2.0 + dx)));
            nonzeros = Some(p * l);
            weight_bound = Some(clamp * clamp);
            (l, p, None)
        }
        Theorem::T2 => {
            let lp = ceil_int(dy.powf((4.0 - dx) / (4.0 + 2.0 * dx)) * n.powf(dx / (4.0 + 2.0 * dx)));
            let (l, p) = factor(lp, inputs.d_y, inputs.c_l, inputs.c_p);
            (l, p, Some(lp))
        }
        Theorem::T3 => {
            let d0 = require(inputs.d0, "d0", th)? as f64;
            let q = ceil_int(dy.powf(-3.0 * d0 / (4.0 + 2.0 * d0)) * n.powf(d0 / (4.0 + 2.0 * d0)));
            let lt = ceil_int((q as f64).sqrt());
            let pt = ceil_int(q as f64 / lt as f64);
            let l = ceil_int(inputs.c_l * lt as f64 * (lt as f64).ln()).max(2);
            let p = ceil_int(inputs.c_p * dx * dy * pt as f64 * (pt as f64).ln());
            (l, p, Some(q))
        }
        Theorem::T4 => {
            let d0 = require(inputs.d0, "d0", th)? as f64;
            let lp = ceil_int(dy.powf((4.0 - d0) / (4.0 + 2.0 * d0)) * n.powf(d0 / (4.0 + 2.0 * d0)));
            let (l, p) = factor(lp, inputs.d_y, inputs.c_l, inputs.c_p);
            (l, p, Some(lp))
        }
        Theorem::T5 => {
            let dm = require(inputs.d_max, "d_max", th)? as f64;
            let lmax = require(inputs.l_max, "l_max", th)? as f64;
            let k = inputs.blocks.unwrap_or(1).max(1);
            let lp = ceil_int(dy.powf((4.0 - dm) / (4.0 + 2.0 * dm)) * n.powf(dm / (4.0 + 2.0 * dm)));
            let (l, p) = factor(lp, inputs.d_y, inputs.c_l, inputs.c_p);
            clamp = lmax.sqrt() * scale;
            (k * l, p, Some(lp))
        }
    };
    Ok(ArchitectureBudget {
        inputs: inputs.clone(),
        depth,
        width,
        nonzeros,
        weight_bound,
        clamp,
        lp,
    })
}

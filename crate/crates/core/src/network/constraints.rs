use serde::{Deserialize, Serialize};

use super::net::Network;
use crate::error::{Error, Result};

/// The two network classes: the sparse bounded family and the loose family
/// constrained only by depth, width, and output bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConstraintSet {
    Full {
        depth: usize,
        width: usize,
        nonzeros: usize,
        bound: f64,
        clamp: f64,
    },
    Loose {
        depth: usize,
        width: usize,
        clamp: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub depth_ok: bool,
    pub width_ok: bool,
    pub max_abs_entry: f64,
    pub entries_ok: bool,
    pub nonzeros: usize,
    pub nonzeros_ok: bool,
    pub clamp_ok: bool,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.depth_ok && self.width_ok && self.entries_ok && self.nonzeros_ok && self.clamp_ok
    }
}

impl ConstraintSet {
    pub fn depth(&self) -> usize {
        match *self {
            ConstraintSet::Full { depth, .. } | ConstraintSet::Loose { depth, .. } => depth,
        }
    }

    pub fn width(&self) -> usize {
        match *self {
            ConstraintSet::Full { width, .. } | ConstraintSet::Loose { width, .. } => width,
        }
    }

    pub fn clamp(&self) -> f64 {
        match *self {
            ConstraintSet::Full { clamp, .. } | ConstraintSet::Loose { clamp, .. } => clamp,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, ConstraintSet::Full { .. })
    }

    /// Layer widths `[d_in, p, …, p, d_out]` with `depth` affine maps.
    pub fn widths(&self, d_in: usize, d_out: usize) -> Result<Vec<usize>> {
        if self.depth() == 0 || self.width() == 0 {
            return Err(Error::invalid("constraint set needs depth and width >= 1"));
        }
        let mut w = vec![d_in];
        w.extend(std::iter::repeat(self.width()).take(self.depth() - 1));
        w.push(d_out);
        Ok(w)
    }

    pub fn check(&self, net: &Network) -> FeasibilityReport {
        let hidden = &net.widths()[1..net.depth()];
        let max_abs_entry = net.max_abs_param();
        let nonzeros = net.nonzeros();
        let (entries_ok, nonzeros_ok) = match *self {
            ConstraintSet::Full {
                nonzeros: k, bound, ..
            } => (max_abs_entry <= bound, nonzeros <= k),
            ConstraintSet::Loose { .. } => (true, true),
        };
        FeasibilityReport {
            depth_ok: net.depth() == self.depth(),
            width_ok: hidden.iter().all(|&w| w <= self.width()),
            max_abs_entry,
            entries_ok,
            nonzeros,
            nonzeros_ok,
            clamp_ok: net.clamp <= self.clamp(),
        }
    }
}

/// Clip every entry to `[-κ, κ]`, then keep the `K` largest magnitudes
/// (ties broken by parameter order). The loose family only sets the clamp.
pub fn project_constraints(net: &Network, cs: &ConstraintSet) -> Network {
    let mut out = net.clone();
    out.clamp = cs.clamp();
    if let ConstraintSet::Full {
        nonzeros, bound, ..
    } = *cs
    {
        let mut params: Vec<f64> = out.params().iter().map(|v| v.clamp(-bound, bound)).collect();
        let nz = params.iter().filter(|v| **v != 0.0).count();
        if nz > nonzeros {
            let mut order: Vec<usize> = (0..params.len()).collect();
            order.sort_by(|&a, &b| params[b].abs().total_cmp(&params[a].abs()).then(a.cmp(&b)));
            for &i in &order[nonzeros..] {
                params[i] = 0.0;
            }
        }
        out.set_params(&params).expect("same shape");
    }
    out
}

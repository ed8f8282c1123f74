use serde::{Deserialize, Serialize};

use super::SolutionOperator;
use crate::data::FieldSampler;
use crate::error::{Error, Result};
use crate::grid::{norm, Grid, GridFunction, NormKind};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub operator: String,
    /// `max ‖Φu₁ − Φu₂‖_Y / ‖u₁ − u₂‖_X` over sampled pairs.
    pub estimate: f64,
    /// Provable bound where one is available.
    pub analytic_bound: Option<f64>,
    pub pairs_used: usize,
    /// Pairs skipped because `‖u₁ − u₂‖_X < 1e-12`.
    pub skipped: usize,
    pub degenerate: bool,
}

pub fn estimate_operator_lipschitz(
    op: &dyn SolutionOperator,
    sampler: &dyn FieldSampler,
    pairs: usize,
    x_norm: NormKind,
    y_norm: NormKind,
    seed: u64,
) -> Result<LipschitzReport> {
    if pairs == 0 {
        return Err(Error::invalid("estimate_operator_lipschitz needs pairs >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let mut best: f64 = 0.0;
    let mut used = 0;
    for _ in 0..pairs {
        let u1 = sampler.draw(&mut rng)?;
        let u2 = sampler.draw(&mut rng)?;
        let denom = norm(&u1.sub(&u2)?, x_norm)?;
        if denom < 1e-12 {
            continue;
        }
        let num = norm(&op.apply(&u1)?.sub(&op.apply(&u2)?)?, y_norm)?;
        best = best.max(num / denom);
        used += 1;
    }
    Ok(LipschitzReport {
        operator: op.id(),
        estimate: best,
        analytic_bound: op.analytic_lipschitz(x_norm, y_norm),
        pairs_used: used,
        skipped: pairs - used,
        degenerate: used == 0,
    })
}

/// `c · Φ`.
pub struct ScaledOperator<'a> {
    pub inner: &'a dyn SolutionOperator,
    pub factor: f64,
}

impl SolutionOperator for ScaledOperator<'_> {
    fn id(&self) -> String {
        format!("{}*{}", self.factor, self.inner.id())
    }
    fn input_grid(&self) -> &Grid {
        self.inner.input_grid()
    }
    fn output_grid(&self) -> &Grid {
        self.inner.output_grid()
    }
    fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        Ok(self.inner.apply(u)?.scaled(self.factor))
    }
    fn analytic_lipschitz(&self, x: NormKind, y: NormKind) -> Option<f64> {
        self.inner
            .analytic_lipschitz(x, y)
            .map(|b| b * self.factor.abs())
    }
}

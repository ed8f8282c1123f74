use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constraints::{project_constraints, ConstraintSet};
use super::net::Network;
use crate::error::{Error, Result};
use crate::seeds::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Project onto the constraint set every this many steps (Full family);
    /// capped at one epoch.
    #[serde(default = "default_cadence")]
    pub projection_every: usize,
    /// Learning rate decays geometrically to this fraction by the last epoch.
    #[serde(default = "default_final_fraction")]
    pub final_lr_fraction: f64,
    /// Rescale gradients whose norm exceeds this value.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_restarts() -> usize {
    1
}

fn default_cadence() -> usize {
    1
}

fn default_final_fraction() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            momentum: default_momentum(),
            epochs: 100,
            batch_size: 32,
            restarts: default_restarts(),
            seed: 0,
            projection_every: default_cadence(),
            final_lr_fraction: default_final_fraction(),
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.restarts == 0 || self.projection_every == 0 {
            return Err(Error::invalid("epochs, batch size, restarts, and cadence must be >= 1"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::invalid("final_lr_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub network: Network,
    /// Training loss after every epoch of the selected restart.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    pub best_restart: usize,
    /// Final loss per restart; `None` for restarts aborted on a non-finite loss.
    pub restart_losses: Vec<Option<f64>>,
}

struct RestartResult {
    network: Network,
    trace: Vec<f64>,
    final_loss: f64,
}

/// Minimize `(1/n) Σ ‖Γ(x_i) − y_i‖²` by mini-batch momentum gradient
/// descent from `cfg.restarts` independent initializations and keep the
/// restart with the lowest final training loss.
pub fn train(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    cs: &ConstraintSet,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("training needs a nonempty set of matching pairs"));
    }
    let d_in = inputs[0].len();
    let d_out = targets[0].len();
    if inputs.iter().any(|x| x.len() != d_in) || targets.iter().any(|y| y.len() != d_out) {
        return Err(Error::invalid("encoded pairs have inconsistent lengths"));
    }
    let widths = cs.widths(d_in, d_out)?;
    let results: Vec<Result<Option<RestartResult>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(inputs, targets, cfg, cs, &widths, r))
        .collect();
    let mut best: Option<(usize, RestartResult)> = None;
    let mut restart_losses = Vec::with_capacity(cfg.restarts);
    for (r, res) in results.into_iter().enumerate() {
        match res? {
            Some(rr) => {
                restart_losses.push(Some(rr.final_loss));
                if best.as_ref().is_none_or(|(_, b)| rr.final_loss < b.final_loss) {
                    best = Some((r, rr));
                }
            }
            None => restart_losses.push(None),
        }
    }
    let (best_restart, rr) = best.ok_or(Error::Diverged)?;
    Ok(TrainOutcome {
        network: rr.network,
        loss_trace: rr.trace,
        final_loss: rr.final_loss,
        best_restart,
        restart_losses,
    })
}

/// Keep the largest weights of every layer so that each layer starts with an
/// equal share of the `K` nonzeros. Global pruning of a dense initialization
/// would otherwise spend the whole budget on the layers with the largest
/// initial scale and disconnect the output.
fn balance_sparsity(net: &mut Network, nonzeros: usize) {
    let share = (nonzeros / net.layers.len()).max(1);
    for layer in &mut net.layers {
        if layer.weights.len() <= share {
            continue;
        }
        let mut order: Vec<usize> = (0..layer.weights.len()).collect();
        order.sort_by(|&a, &b| layer.weights[b].abs().total_cmp(&layer.weights[a].abs()).then(a.cmp(&b)));
        for &i in &order[share..] {
            layer.weights[i] = 0.0;
        }
    }
}

fn run_restart(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    cs: &ConstraintSet,
    widths: &[usize],
    restart: usize,
) -> Result<Option<RestartResult>> {
    let mut rng = seeds::rng_at(cfg.seed, &[stream::TRAIN, restart as u64]);
    let mut net = Network::init(widths, cs.clamp(), &mut rng)?;
    if let ConstraintSet::Full { nonzeros, .. } = *cs {
        balance_sparsity(&mut net, nonzeros);
        net = project_constraints(&net, cs);
    }
    let n = inputs.len();
    let batch = cfg.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(batch);
    let cadence = cfg.projection_every.min(steps_per_epoch);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity = vec![0.0; net.param_count()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let decay = if cfg.epochs > 1 {
        cfg.final_lr_fraction.powf(1.0 / (cfg.epochs - 1) as f64)
    } else {
        1.0
    };
    let mut lr = cfg.learning_rate;
    let mut step = 0usize;
    let mut bx = Vec::with_capacity(batch);
    let mut by = Vec::with_capacity(batch);
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(inputs[i].clone());
                by.push(targets[i].clone());
            }
            let (loss, grad) = net.backward(&bx, &by)?;
            if !loss.is_finite() {
                return Ok(None);
            }
            let mut g = grad.flat();
            if let Some(max) = cfg.max_grad_norm {
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn > max {
                    g.iter_mut().for_each(|v| *v *= max / gn);
                }
            }
            let mut params = net.params();
            for ((p, v), gi) in params.iter_mut().zip(velocity.iter_mut()).zip(&g) {
                *v = cfg.momentum * *v - lr * gi;
                *p += *v;
            }
            net.set_params(&params)?;
            step += 1;
            if cs.is_full() && step % cadence == 0 {
                net = project_constraints(&net, cs);
            }
        }
        let loss = net.loss(inputs, targets)?;
        if !loss.is_finite() {
            return Ok(None);
        }
        trace.push(loss);
        lr *= decay;
    }
    if cs.is_full() {
        net = project_constraints(&net, cs);
    }
    let final_loss = net.loss(inputs, targets)?;
    if !final_loss.is_finite() {
        return Ok(None);
    }
    Ok(Some(RestartResult {
        network: net,
        trace,
        final_loss,
    }))
}

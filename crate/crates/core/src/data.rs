//! Random input fields, bounded noise, and dataset assembly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, tensor_apply, Grid, GridFunction, NormKind};
use crate::io::Container;
use crate::pde::SolutionOperator;
use crate::seeds::{self, stream};

/// Source of random grid functions.
pub trait FieldSampler: Send + Sync {
    fn grid(&self) -> &Grid;
    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<GridFunction>;
}

/// Modes used by [`RandomFieldSampler`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `cos(k π (x - lo) / side)` per axis, `k = 0..modes-1`.
    Cosine,
    /// Periodic modes `cos(j θ), sin(j θ)` with `θ = 2π (x - lo) / side`,
    /// excluding the constant, so every draw is periodic with zero mean.
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Target smoothness `s` of the coefficient decay.
    pub smoothness: f64,
    /// Norm bound `R_X`.
    pub radius: f64,
    /// Modes per axis.
    pub modes: usize,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    /// Multiply by `Π (1 - ξ²)²` so the field vanishes on the box boundary.
    #[serde(default)]
    pub taper: bool,
    /// Extra decay `ε₀` in `k^{-(s + d/2 + ε₀)}`.
    #[serde(default = "default_decay_offset")]
    pub decay_offset: f64,
    /// Norm in which `radius` is enforced; defaults to the `C^s` norm.
    #[serde(default)]
    pub class_norm: Option<NormKind>,
}

fn default_basis() -> Basis {
    Basis::Cosine
}

fn default_decay_offset() -> f64 {
    0.1
}

impl SamplerConfig {
    pub fn new(smoothness: f64, radius: f64, modes: usize) -> Self {
        SamplerConfig {
            smoothness,
            radius,
            modes,
            basis: Basis::Cosine,
            taper: false,
            decay_offset: default_decay_offset(),
            class_norm: None,
        }
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn tapered(mut self, taper: bool) -> Self {
        self.taper = taper;
        self
    }

    pub fn with_class_norm(mut self, kind: NormKind) -> Self {
        self.class_norm = Some(kind);
        self
    }

    pub fn class_norm(&self) -> NormKind {
        self.class_norm.unwrap_or(NormKind::Holder {
            s: self.smoothness,
        })
    }
}

/// Truncated random series `Σ a_k ψ_k` with polynomially decaying uniform
/// coefficients, rescaled so the class norm never exceeds `R_X`.
#[derive(Clone, Debug)]
pub struct RandomFieldSampler {
    grid: Grid,
    config: SamplerConfig,
    modes_matrix: Vec<f64>,
    weights: Vec<f64>,
    taper: Option<Vec<f64>>,
}

impl RandomFieldSampler {
    pub fn new(grid: &Grid, config: SamplerConfig) -> Result<Self> {
        if config.modes == 0 {
            return Err(Error::invalid("sampler needs at least one mode"));
        }
        if !(config.radius >= 0.0) || !(config.smoothness > 0.0) {
            return Err(Error::invalid("sampler needs radius >= 0 and smoothness > 0"));
        }
        config.class_norm().validate()?;
        let k = config.modes;
        let d = grid.dim();
        let coords = grid.axis_coords();
        let side = grid.side();
        let m = coords.len();
        // m × K table of per-axis modes, plus the frequency of each mode.
        let mut modes_matrix = vec![0.0; m * k];
        let mut freq = vec![0.0; k];
        for j in 0..k {
            freq[j] = match config.basis {
                Basis::Cosine => j as f64,
                Basis::Fourier => j.div_ceil(2) as f64,
            };
            for (i, &x) in coords.iter().enumerate() {
                let t = (x - grid.lo()) / side;
                modes_matrix[i * k + j] = match config.basis {
                    Basis::Cosine => (j as f64 * std::f64::consts::PI * t).cos(),
                    Basis::Fourier if j == 0 => 1.0,
                    Basis::Fourier if j % 2 == 1 => {
                        (freq[j] * 2.0 * std::f64::consts::PI * t).cos()
                    }
                    Basis::Fourier => (freq[j] * 2.0 * std::f64::consts::PI * t).sin(),
                };
            }
        }
        let decay = config.smoothness + d as f64 / 2.0 + config.decay_offset;
        let weights = (0..k.pow(d as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut f2 = 0.0;
                let mut all_zero = true;
                for _ in 0..d {
                    let j = rem % k;
                    rem /= k;
                    f2 += freq[j] * freq[j];
                    all_zero &= j == 0;
                }
                if all_zero && config.basis == Basis::Fourier {
                    0.0
                } else {
                    (1.0 + f2.sqrt()).powf(-decay)
                }
            })
            .collect();
        let taper = config.taper.then(|| {
            grid.nodes()
                .iter()
                .map(|x| {
                    x.iter()
                        .map(|&xa| {
                            let xi = (2.0 * xa - grid.lo() - grid.hi()) / side;
                            (1.0 - xi * xi).powi(2)
                        })
                        .product()
                })
                .collect()
        });
        Ok(RandomFieldSampler {
            grid: grid.clone(),
            config,
            modes_matrix,
            weights,
            taper,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// The unscaled random series.
    fn raw_draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let coeffs: Vec<f64> = self
            .weights
            .iter()
            .map(|&w| {
                let a: f64 = rng.gen_range(-1.0..=1.0);
                a * w
            })
            .collect();
        let mut values = tensor_apply(
            &coeffs,
            self.grid.dim(),
            self.config.modes,
            self.grid.points_per_axis(),
            &self.modes_matrix,
        );
        if let Some(t) = &self.taper {
            for (v, w) in values.iter_mut().zip(t) {
                *v *= w;
            }
        }
        values
    }
}

impl FieldSampler for RandomFieldSampler {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
        let raw = GridFunction::new(self.grid.clone(), self.raw_draw(rng))?;
        if self.config.radius == 0.0 {
            return Ok(GridFunction::zeros(&self.grid));
        }
        let class = norm(&raw, self.config.class_norm())?;
        if class > self.config.radius {
            Ok(raw.scaled(self.config.radius / class))
        } else {
            Ok(raw)
        }
    }
}

/// Bounded, symmetrized additive noise.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub sigma: f64,
    shape: RandomFieldSampler,
    norm: NormKind,
}

impl NoiseModel {
    /// `shape` fixes the spatial structure; each draw is rescaled to
    /// `‖ε‖_Y = σ` and given a random sign.
    pub fn new(sigma: f64, shape: RandomFieldSampler, y_norm: NormKind) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::invalid("noise level must be non-negative"));
        }
        y_norm.validate()?;
        Ok(NoiseModel {
            sigma,
            shape,
            norm: y_norm,
        })
    }

    pub fn none(grid: &Grid) -> Result<Self> {
        NoiseModel::new(
            0.0,
            RandomFieldSampler::new(grid, SamplerConfig::new(1.0, 1.0, 1))?,
            NormKind::L2,
        )
    }

    pub fn grid(&self) -> &Grid {
        self.shape.grid()
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
        let grid = self.shape.grid();
        if self.sigma == 0.0 {
            return Ok(GridFunction::zeros(grid));
        }
        let raw = GridFunction::new(grid.clone(), self.shape.raw_draw(rng))?;
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let size = norm(&raw, self.norm)?;
        if size < 1e-300 {
            return Ok(GridFunction::zeros(grid));
        }
        Ok(raw.scaled(sign * self.sigma / size))
    }
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub operator: String,
    pub sampler: serde_json::Value,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// `S = {(u_i, v_i)}_{i=1..2n}`; the first `n` pairs form `S₁`, the rest `S₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<GridFunction>,
    pub outputs: Vec<GridFunction>,
    pub n: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Encoder-fitting half.
    pub fn s1(&self) -> (&[GridFunction], &[GridFunction]) {
        (&self.inputs[..self.n], &self.outputs[..self.n])
    }

    /// Training half.
    pub fn s2(&self) -> (&[GridFunction], &[GridFunction]) {
        (&self.inputs[self.n..], &self.outputs[self.n..])
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({
            "n": self.n,
            "input_grid": self.inputs[0].grid(),
            "output_grid": self.outputs[0].grid(),
            "provenance": self.provenance,
        });
        let flat = |fs: &[GridFunction]| fs.iter().flat_map(|f| f.values().to_vec()).collect();
        Container::new("dataset", meta)
            .with_array("inputs", flat(&self.inputs))
            .with_array("outputs", flat(&self.outputs))
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        c.expect_kind("dataset")?;
        let n: usize = c.meta_field("n")?;
        let in_grid: Grid = c.meta_field("input_grid")?;
        let out_grid: Grid = c.meta_field("output_grid")?;
        let provenance: Provenance = c.meta_field("provenance")?;
        let split = |data: &[f64], grid: &Grid| -> Result<Vec<GridFunction>> {
            if data.len() != 2 * n * grid.len() {
                return Err(Error::Format("dataset array has the wrong length".into()));
            }
            data.chunks(grid.len())
                .map(|ch| GridFunction::new(grid.clone(), ch.to_vec()))
                .collect()
        };
        Ok(Dataset {
            inputs: split(c.array("inputs")?, &in_grid)?,
            outputs: split(c.array("outputs")?, &out_grid)?,
            n,
            provenance,
        })
    }

    /// One row per field: `pair,split,field,v_0,...,v_{N-1}`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "pair,split,field,values...")?;
        for (i, (u, v)) in self.inputs.iter().zip(&self.outputs).enumerate() {
            let split = if i < self.n { "S1" } else { "S2" };
            for (name, f) in [("u", u), ("v", v)] {
                write!(w, "{i},{split},{name}")?;
                for x in f.values() {
                    write!(w, ",{x}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Draw `2n` inputs, solve, and add noise. Pair `i` uses its own input and
/// noise streams, so the result does not depend on thread scheduling.
pub fn make_dataset(
    op: &dyn SolutionOperator,
    sampler: &dyn FieldSampler,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
    sampler_description: serde_json::Value,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset needs n >= 1"));
    }
    if sampler.grid() != op.input_grid() {
        return Err(Error::invalid("sampler grid differs from the operator input grid"));
    }
    if noise.grid() != op.output_grid() {
        return Err(Error::invalid("noise grid differs from the operator output grid"));
    }
    let pairs: Vec<Result<(GridFunction, GridFunction)>> = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let u = sampler.draw(&mut seeds::rng_at(seed, &[stream::INPUTS, i as u64]))?;
            let clean = op.apply(&u)?;
            let eps = noise.draw(&mut seeds::rng_at(seed, &[stream::NOISE, i as u64]))?;
            Ok((u, clean.add(&eps)?))
        })
        .collect();
    let (inputs, outputs) = pairs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(Dataset {
        inputs,
        outputs,
        n,
        provenance: Provenance {
            operator: op.id(),
            sampler: sampler_description,
            noise_sigma: noise.sigma,
            seed,
        },
    })
}

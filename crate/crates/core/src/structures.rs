//! Low-complexity operator chains `G^k ∘ … ∘ G^1`, where each block maps
//! `a ↦ [g_j(V_jᵀ a)]_j` with few-input scalar nonlinearities `g_j`, and
//! the exact decompositions of the linear, transport, and Burgers maps.

use serde::{Deserialize, Serialize};

use crate::data::FieldSampler;
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::grid::{norm, NormKind};
use crate::io::Container;
use crate::pde::{BurgersOperator, SolutionOperator, TransportOperator};
use crate::seeds;

/// Registered scalar nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum Nonlinearity {
    Identity,
    /// `x ↦ exp(-x / 2ν)`.
    ExpScaled { nu: f64 },
    /// `(x, y) ↦ -2ν x / y`, defined for `|y| ≥ 1e-12`.
    Quotient { nu: f64 },
}

impl Nonlinearity {
    pub fn arity(&self) -> usize {
        match self {
            Nonlinearity::Identity | Nonlinearity::ExpScaled { .. } => 1,
            Nonlinearity::Quotient { .. } => 2,
        }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        match *self {
            Nonlinearity::Identity => Ok(z[0]),
            Nonlinearity::ExpScaled { nu } => Ok((-z[0] / (2.0 * nu)).exp()),
            Nonlinearity::Quotient { nu } => {
                if z[1].abs() < 1e-12 {
                    return Err(Error::Numerical(format!(
                        "quotient denominator {:.3e} below 1e-12",
                        z[1]
                    )));
                }
                Ok(-2.0 * nu * z[0] / z[1])
            }
        }
    }
}

/// One output of a block: `g(V a)` with `V` of shape `arity(g) × input_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockOutput {
    pub v: Vec<f64>,
    pub g: Nonlinearity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowComplexityBlock {
    pub input_dim: usize,
    pub outputs: Vec<BlockOutput>,
}

impl LowComplexityBlock {
    pub fn new(input_dim: usize, outputs: Vec<BlockOutput>) -> Result<Self> {
        let b = LowComplexityBlock { input_dim, outputs };
        b.validate()?;
        Ok(b)
    }

    /// Same `g` on every output, one row of `rows` per output.
    pub fn uniform(input_dim: usize, rows: Vec<Vec<f64>>, g: Nonlinearity) -> Result<Self> {
        let outputs = rows.into_iter().map(|v| BlockOutput { v, g }).collect();
        LowComplexityBlock::new(input_dim, outputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.outputs.is_empty() {
            return Err(Error::invalid("block needs positive input and output dimensions"));
        }
        for (j, o) in self.outputs.iter().enumerate() {
            let d = o.g.arity();
            if d > self.input_dim {
                return Err(Error::invalid(format!("output {j}: arity exceeds input dimension")));
            }
            if o.v.len() != d * self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: d * self.input_dim,
                    got: o.v.len(),
                });
            }
            if o.v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("output {j}: non-finite entry in V")));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    /// `d_i`, the largest arity among outputs.
    pub fn arity(&self) -> usize {
        self.outputs.iter().map(|o| o.g.arity()).max().unwrap_or(0)
    }

    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: a.len(),
            });
        }
        let mut z = [0.0; 2];
        self.outputs
            .iter()
            .map(|o| {
                for (r, zr) in z.iter_mut().take(o.g.arity()).enumerate() {
                    let row = &o.v[r * self.input_dim..(r + 1) * self.input_dim];
                    *zr = row.iter().zip(a).map(|(x, y)| x * y).sum();
                }
                o.g.eval(&z)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockChain {
    pub blocks: Vec<LowComplexityBlock>,
    pub d_max: usize,
    pub l_max: usize,
}

impl BlockChain {
    /// Checks adjacency and that the declared `d_max`, `ℓ_max` are the maxima.
    pub fn new(blocks: Vec<LowComplexityBlock>, d_max: usize, l_max: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("chain needs at least one block"));
        }
        for w in blocks.windows(2) {
            if w[0].output_dim() != w[1].input_dim {
                return Err(Error::DimensionMismatch {
                    expected: w[0].output_dim(),
                    got: w[1].input_dim,
                });
            }
        }
        let chain = BlockChain {
            blocks,
            d_max,
            l_max,
        };
        let (d, l) = chain.recomputed_maxima();
        if d != d_max || l != l_max {
            return Err(Error::invalid(format!(
                "declared (d_max, l_max) = ({d_max}, {l_max}) but blocks give ({d}, {l})"
            )));
        }
        Ok(chain)
    }

    /// Build with the maxima computed from the blocks.
    pub fn from_blocks(blocks: Vec<LowComplexityBlock>) -> Result<Self> {
        let d = blocks.iter().map(|b| b.arity()).max().unwrap_or(0);
        let l = blocks.iter().map(|b| b.output_dim()).max().unwrap_or(0);
        BlockChain::new(blocks, d, l)
    }

    pub fn recomputed_maxima(&self) -> (usize, usize) {
        (
            self.blocks.iter().map(|b| b.arity()).max().unwrap_or(0),
            self.blocks.iter().map(|b| b.output_dim()).max().unwrap_or(0),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.blocks[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.last().unwrap().output_dim()
    }

    /// Container with one array per block (rows of every output in order)
    /// and a manifest of the nonlinearities in the metadata.
    pub fn to_container(&self) -> Container {
        let manifest: Vec<serde_json::Value> = self
            .blocks
            .iter()
            .map(|b| {
                serde_json::json!({
                    "input_dim": b.input_dim,
                    "g": b.outputs.iter().map(|o| o.g).collect::<Vec<_>>(),
                })
            })
            .collect();
        let meta = serde_json::json!({ "d_max": self.d_max, "l_max": self.l_max, "blocks": manifest });
        let mut c = Container::new("block_chain", meta);
        for (i, b) in self.blocks.iter().enumerate() {
            c = c.with_array(
                &format!("block{}", i + 1),
                b.outputs.iter().flat_map(|o| o.v.clone()).collect(),
            );
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        c.expect_kind("block_chain")?;
        #[derive(Deserialize)]
        struct Entry {
            input_dim: usize,
            g: Vec<Nonlinearity>,
        }
        let manifest: Vec<Entry> = c.meta_field("blocks")?;
        let mut blocks = Vec::with_capacity(manifest.len());
        for (i, e) in manifest.into_iter().enumerate() {
            let data = c.array(&format!("block{}", i + 1))?;
            let mut outputs = Vec::with_capacity(e.g.len());
            let mut k = 0;
            for g in e.g {
                let len = g.arity() * e.input_dim;
                let v = data
                    .get(k..k + len)
                    .ok_or_else(|| Error::Format(format!("block {} is truncated", i + 1)))?;
                outputs.push(BlockOutput { v: v.to_vec(), g });
                k += len;
            }
            blocks.push(LowComplexityBlock::new(e.input_dim, outputs)?);
        }
        BlockChain::new(blocks, c.meta_field("d_max")?, c.meta_field("l_max")?)
    }
}

pub fn apply_chain(chain: &BlockChain, a: &[f64]) -> Result<Vec<f64>> {
    let mut x = a.to_vec();
    for b in &chain.blocks {
        x = b.apply(&x)?;
    }
    Ok(x)
}

/// Single identity block `V = E_Y ∘ Φ ∘ D_X` for a linear operator, built one
/// column at a time.
pub fn linear_decomposition(
    op: &dyn SolutionOperator,
    enc_x: &dyn Encoder,
    enc_y: &dyn Encoder,
) -> Result<BlockChain> {
    if enc_x.grid() != op.input_grid() || enc_y.grid() != op.output_grid() {
        return Err(Error::invalid("encoder grids differ from the operator grids"));
    }
    let dx = enc_x.encoded_dim();
    let dy = enc_y.encoded_dim();
    let mut rows = vec![vec![0.0; dx]; dy];
    let mut e = vec![0.0; dx];
    for c in 0..dx {
        e[c] = 1.0;
        let col = enc_y.encode(&op.apply(&enc_x.decode(&e)?)?)?;
        e[c] = 0.0;
        for (r, v) in rows.iter_mut().zip(col) {
            r[c] = v;
        }
    }
    BlockChain::new(
        vec![LowComplexityBlock::uniform(dx, rows, Nonlinearity::Identity)?],
        1,
        dy,
    )
}

/// With nodal encoders the rows are the quadrature-weighted kernel rows.
pub fn poisson_decomposition(
    op: &dyn SolutionOperator,
    enc_x: &dyn Encoder,
    enc_y: &dyn Encoder,
) -> Result<BlockChain> {
    linear_decomposition(op, enc_x, enc_y)
}

/// Interpolation rows at the characteristic foot points (nodal encoding).
pub fn transport_decomposition(op: &TransportOperator) -> Result<BlockChain> {
    let n_in = op.input_grid().len();
    let rows = op
        .stencils()
        .iter()
        .map(|s| {
            let mut row = vec![0.0; n_in];
            for &(k, w) in s {
                row[k] += w;
            }
            row
        })
        .collect::<Vec<_>>();
    let l = rows.len();
    BlockChain::new(
        vec![LowComplexityBlock::uniform(n_in, rows, Nonlinearity::Identity)?],
        1,
        l,
    )
}

/// Two blocks on nodal values: cumulative trapezoid rows followed by
/// `exp(-·/2ν)`, then the pair (`∂ₓK`, `K`) of image-summed kernel rows
/// followed by the quotient. The image sum uses unit weights, which is exact
/// for inputs with zero mean.
pub fn burgers_decomposition(op: &BurgersOperator) -> Result<BlockChain> {
    let grid = op.input_grid();
    let m = grid.len();
    let h = grid.spacing();
    let nu = op.viscosity();
    let cumulative: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut row = vec![0.0; m];
            for i in 1..=k {
                row[i - 1] += 0.5 * h;
                row[i] += 0.5 * h;
            }
            row
        })
        .collect();
    let first = LowComplexityBlock::uniform(m, cumulative, Nonlinearity::ExpScaled { nu })?;
    let (k_tables, kx_tables) = op.kernel_tables();
    let m_out = op.output_grid().len();
    let outputs = (0..m_out)
        .map(|i| {
            let mut v = vec![0.0; 2 * m];
            for (k, kx) in k_tables.iter().zip(kx_tables) {
                for c in 0..m {
                    v[c] += kx[i * m + c];
                    v[m + c] += k[i * m + c];
                }
            }
            BlockOutput {
                v,
                g: Nonlinearity::Quotient { nu },
            }
        })
        .collect();
    let second = LowComplexityBlock::new(m, outputs)?;
    BlockChain::new(vec![first, second], 2, m.max(m_out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub trials: usize,
    /// `‖D_Y(chain(E_X u)) − Π_Y Φ(u)‖_Y`.
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    /// Discrepancy divided by `‖Π_Y Φ(u)‖_Y` (skipped when that is zero).
    pub max_relative: f64,
    pub mean_relative: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn verify_chain(
    chain: &BlockChain,
    op: &dyn SolutionOperator,
    enc_x: &dyn Encoder,
    enc_y: &dyn Encoder,
    sampler: &dyn FieldSampler,
    trials: usize,
    y_norm: NormKind,
    seed: u64,
) -> Result<ChainReport> {
    if trials == 0 {
        return Err(Error::invalid("verify_chain needs trials >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let (mut max_d, mut sum_d, mut max_r, mut sum_r, mut n_r) = (0.0f64, 0.0, 0.0f64, 0.0, 0);
    for _ in 0..trials {
        let u = sampler.draw(&mut rng)?;
        let reference = enc_y.project(&op.apply(&u)?)?;
        let predicted = enc_y.decode(&apply_chain(chain, &enc_x.encode(&u)?)?)?;
        let d = norm(&predicted.sub(&reference)?, y_norm)?;
        let size = norm(&reference, y_norm)?;
        max_d = max_d.max(d);
        sum_d += d;
        if size > 0.0 {
            max_r = max_r.max(d / size);
            sum_r += d / size;
            n_r += 1;
        }
    }
    Ok(ChainReport {
        trials,
        max_discrepancy: max_d,
        mean_discrepancy: sum_d / trials as f64,
        max_relative: max_r,
        mean_relative: if n_r > 0 { sum_r / n_r as f64 } else { 0.0 },
    })
}

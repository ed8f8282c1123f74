//! Encoder/decoder pairs between grid functions and coefficient vectors.
//!
//! * [`SpectralEncoder`]: tensor Chebyshev basis of per-axis degree `< r`,
//!   coefficients fitted by discrete weighted least squares on the working
//!   grid (trapezoid weights), so `decode ∘ encode` is a projection that is the
//!   identity on the polynomial space.
//! * [`NodalEncoder`]: the tabulation of grid values.
//! * [`LagrangeUnifier`]: resamples data given on a coarse equispaced grid onto
//!   a common fine grid by piecewise tensor Lagrange interpolation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::FieldSampler;
use crate::error::{Error, Result};
use crate::grid::{self, norm, tensor_apply, Grid, GridFunction, NormKind};
use crate::seeds;

/// A linear map `X → R^d` together with its decoder `R^d → X`, where `X` is
/// the set of grid functions on [`Encoder::grid`].
pub trait Encoder: Send + Sync {
    fn grid(&self) -> &Grid;
    fn encoded_dim(&self) -> usize;
    fn encode(&self, f: &GridFunction) -> Result<Vec<f64>>;
    fn decode(&self, coeffs: &[f64]) -> Result<GridFunction>;
    fn name(&self) -> String;

    /// `Π = D ∘ E`.
    fn project(&self, f: &GridFunction) -> Result<GridFunction> {
        self.decode(&self.encode(f)?)
    }
}

/// Chebyshev polynomials `T_0..T_{r-1}` at `x ∈ [-1, 1]`.
pub fn chebyshev_values(r: usize, x: f64) -> Vec<f64> {
    let mut t = vec![0.0; r];
    if r > 0 {
        t[0] = 1.0;
    }
    if r > 1 {
        t[1] = x;
    }
    for k in 2..r {
        t[k] = 2.0 * x * t[k - 1] - t[k - 2];
    }
    t
}

/// Spectral encoder onto `P_d^r`, the tensor products of univariate
/// polynomials of degree `< r` on the cube `[lo, hi]^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEncoder {
    pub dim: usize,
    pub degree: usize,
    pub lo: f64,
    pub hi: f64,
}

impl SpectralEncoder {
    pub fn new(dim: usize, degree: usize, lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 || degree == 0 {
            return Err(Error::invalid("spectral encoder needs dim >= 1 and r >= 1"));
        }
        if !(hi > lo) {
            return Err(Error::invalid("spectral encoder box must satisfy hi > lo"));
        }
        Ok(SpectralEncoder { dim, degree, lo, hi })
    }

    /// Encoder matching the box of `grid`.
    pub fn for_grid(grid: &Grid, degree: usize) -> Result<Self> {
        SpectralEncoder::new(grid.dim(), degree, grid.lo(), grid.hi())
    }

    /// `d_enc = r^d`.
    pub fn encoded_dim(&self) -> usize {
        self.degree.pow(self.dim as u32)
    }

    fn reference(&self, x: f64) -> f64 {
        ((2.0 * x - (self.lo + self.hi)) / (self.hi - self.lo)).clamp(-1.0, 1.0)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: grid.dim(),
            });
        }
        let tol = 1e-9 * (self.hi - self.lo);
        if (grid.lo() - self.lo).abs() > tol || (grid.hi() - self.hi).abs() > tol {
            return Err(Error::invalid(format!(
                "grid box [{}, {}] differs from encoder box [{}, {}]",
                grid.lo(),
                grid.hi(),
                self.lo,
                self.hi
            )));
        }
        Ok(())
    }

    /// `m × r` matrix of basis values at the grid's axis nodes.
    fn evaluation_matrix(&self, grid: &Grid) -> Vec<f64> {
        let r = self.degree;
        grid.axis_coords()
            .iter()
            .flat_map(|&x| chebyshev_values(r, self.reference(x)))
            .collect()
    }

    /// `r × m` least-squares projector for one axis of `grid`.
    fn projection_matrix(&self, grid: &Grid) -> Result<Vec<f64>> {
        let m = grid.points_per_axis();
        let r = self.degree;
        if m < 2 * r + 1 {
            return Err(Error::invalid(format!(
                "grid with {m} points per axis is too coarse for degree {r} (needs {})",
                2 * r + 1
            )));
        }
        let sqrt_w: Vec<f64> = grid::axis_weights(grid).iter().map(|w| w.sqrt()).collect();
        let basis = self.evaluation_matrix(grid);
        let a = DMatrix::from_fn(m, r, |i, k| sqrt_w[i] * basis[i * r + k]);
        let qr = a.qr();
        let rmat = qr.r();
        let scale = rmat[(0, 0)].abs();
        for k in 0..r {
            if rmat[(k, k)].abs() <= 1e-13 * scale {
                return Err(Error::Numerical(format!(
                    "Chebyshev least-squares system is rank deficient at degree {k}"
                )));
            }
        }
        let qt_w = qr.q().transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sqrt_w));
        let proj = rmat
            .solve_upper_triangular(&qt_w)
            .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
        let mut out = vec![0.0; r * m];
        for k in 0..r {
            for i in 0..m {
                out[k * m + i] = proj[(k, i)];
            }
        }
        Ok(out)
    }

    /// Bind the encoder to a working grid, precomputing both matrices.
    pub fn codec(&self, grid: &Grid) -> Result<SpectralCodec> {
        self.check_grid(grid)?;
        Ok(SpectralCodec {
            encoder: self.clone(),
            grid: grid.clone(),
            projector: self.projection_matrix(grid)?,
            evaluator: self.evaluation_matrix(grid),
        })
    }
}

/// Coefficients of the discrete least-squares fit of `f` in `P_d^r`.
pub fn spectral_encode(f: &GridFunction, enc: &SpectralEncoder) -> Result<Vec<f64>> {
    enc.codec(f.grid())?.encode(f)
}

/// Evaluate `Σ c_k φ_k` on the nodes of `target`.
pub fn spectral_decode(c: &[f64], enc: &SpectralEncoder, target: &Grid) -> Result<GridFunction> {
    if c.len() != enc.encoded_dim() {
        return Err(Error::DimensionMismatch {
            expected: enc.encoded_dim(),
            got: c.len(),
        });
    }
    enc.check_grid(target)?;
    let m = target.points_per_axis();
    let values = tensor_apply(c, enc.dim, enc.degree, m, &enc.evaluation_matrix(target));
    GridFunction::new(target.clone(), values)
}

/// A [`SpectralEncoder`] bound to one working grid.
#[derive(Clone, Debug)]
pub struct SpectralCodec {
    encoder: SpectralEncoder,
    grid: Grid,
    projector: Vec<f64>,
    evaluator: Vec<f64>,
}

impl SpectralCodec {
    pub fn encoder(&self) -> &SpectralEncoder {
        &self.encoder
    }
}

impl Encoder for SpectralCodec {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn encoded_dim(&self) -> usize {
        self.encoder.encoded_dim()
    }

    fn encode(&self, f: &GridFunction) -> Result<Vec<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::invalid("grid function is not on the encoder's grid"));
        }
        let m = self.grid.points_per_axis();
        Ok(tensor_apply(
            f.values(),
            self.encoder.dim,
            m,
            self.encoder.degree,
            &self.projector,
        ))
    }

    fn decode(&self, coeffs: &[f64]) -> Result<GridFunction> {
        if coeffs.len() != self.encoded_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.encoded_dim(),
                got: coeffs.len(),
            });
        }
        let m = self.grid.points_per_axis();
        let values = tensor_apply(
            coeffs,
            self.encoder.dim,
            self.encoder.degree,
            m,
            &self.evaluator,
        );
        GridFunction::new(self.grid.clone(), values)
    }

    fn name(&self) -> String {
        format!("spectral(r={}, d={})", self.encoder.degree, self.encoder.dim)
    }
}

/// Tabulation of grid values; `decode ∘ encode` is the identity.
#[derive(Clone, Debug)]
pub struct NodalEncoder {
    grid: Grid,
}

impl NodalEncoder {
    pub fn new(grid: &Grid) -> Self {
        NodalEncoder { grid: grid.clone() }
    }
}

impl Encoder for NodalEncoder {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn encoded_dim(&self) -> usize {
        self.grid.len()
    }

    fn encode(&self, f: &GridFunction) -> Result<Vec<f64>> {
        if f.grid() != &self.grid {
            return Err(Error::invalid("grid function is not on the encoder's grid"));
        }
        Ok(f.values().to_vec())
    }

    fn decode(&self, coeffs: &[f64]) -> Result<GridFunction> {
        GridFunction::new(self.grid.clone(), coeffs.to_vec())
    }

    fn name(&self) -> String {
        format!("nodal(m={}, d={})", self.grid.points_per_axis(), self.grid.dim())
    }
}

/// Dense matrix of a linear encoder, `d_enc × N`, built column by column.
pub fn encoder_matrix(enc: &dyn Encoder) -> Result<Vec<Vec<f64>>> {
    let n = enc.grid().len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(enc.encode(&GridFunction::new(enc.grid().clone(), e)?)?);
    }
    let rows = enc.encoded_dim();
    Ok((0..rows)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect())
}

/// Resolution-unifying encoder `P_x̂ ∘ I_{x^i} ∘ P_{x^i}`.
///
/// Samples on the coarse `source` grid are interpolated by piecewise tensor
/// Lagrange polynomials of `degree` per axis (blocks of `degree` source cells)
/// and re-sampled on the fine `target` grid. `degree = m_source - 1` is the
/// single global Lagrange polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeUnifier {
    pub source: Grid,
    pub target: Grid,
    pub degree: usize,
}

impl LagrangeUnifier {
    pub fn new(source: Grid, target: Grid, degree: usize) -> Result<Self> {
        let u = LagrangeUnifier {
            source,
            target,
            degree,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        let intervals = self.source.points_per_axis() - 1;
        if self.degree == 0 || intervals % self.degree != 0 {
            return Err(Error::invalid(format!(
                "degree {} must divide the {} source intervals",
                self.degree, intervals
            )));
        }
        if !self.source.is_subgrid_of(&self.target) {
            return Err(Error::invalid(
                "source nodes are not a subset of the target nodes",
            ));
        }
        Ok(())
    }

    /// Output length `(r + 1)^d` with `r + 1` target points per axis.
    pub fn encoded_dim(&self) -> usize {
        self.target.len()
    }

    /// `m_target × m_source` one-axis interpolation matrix.
    pub fn axis_matrix(&self) -> Vec<f64> {
        let src = self.source.axis_coords();
        let ms = src.len();
        let q = self.degree;
        let blocks = (ms - 1) / q;
        let hs = self.source.spacing();
        let tgt = self.target.axis_coords();
        let mut mat = vec![0.0; tgt.len() * ms];
        for (i, &x) in tgt.iter().enumerate() {
            let b = (((x - self.source.lo()) / (q as f64 * hs)).floor().max(0.0) as usize)
                .min(blocks - 1);
            let nodes = &src[b * q..=b * q + q];
            for (j, &xj) in nodes.iter().enumerate() {
                let mut l = 1.0;
                for (k, &xk) in nodes.iter().enumerate() {
                    if k != j {
                        l *= (x - xk) / (xj - xk);
                    }
                }
                mat[i * ms + b * q + j] = l;
            }
        }
        mat
    }
}

/// Interpolate coarse samples onto the unified grid.
pub fn unify_resolution(samples: &[f64], unifier: &LagrangeUnifier) -> Result<Vec<f64>> {
    unifier.validate()?;
    if samples.len() != unifier.source.len() {
        return Err(Error::DimensionMismatch {
            expected: unifier.source.len(),
            got: samples.len(),
        });
    }
    Ok(tensor_apply(
        samples,
        unifier.source.dim(),
        unifier.source.points_per_axis(),
        unifier.target.points_per_axis(),
        &unifier.axis_matrix(),
    ))
}

/// Monte Carlo mean of `‖Π u − u‖²` over `trials` draws from `sampler`.
pub fn projection_error(
    sampler: &dyn FieldSampler,
    enc: &dyn Encoder,
    trials: usize,
    norm_kind: NormKind,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("projection_error needs trials >= 1"));
    }
    let mut rng = seeds::rng(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let u = sampler.draw(&mut rng)?;
        let err = norm(&enc.project(&u)?.sub(&u)?, norm_kind)?;
        total += err * err;
    }
    Ok(total / trials as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderLipschitzReport {
    pub encoder: String,
    /// Largest sampled ratio; a lower bound of the true constant.
    pub estimate: f64,
    pub pairs_used: usize,
    pub pairs_requested: usize,
    /// Set when every pair was skipped (denominator below `1e-12`).
    pub degenerate: bool,
}

/// `max ‖E u₁ − E u₂‖₂ / ‖u₁ − u₂‖_X` over sampled pairs.
pub fn estimate_encoder_lipschitz(
    enc: &dyn Encoder,
    sampler: &dyn FieldSampler,
    pairs: usize,
    x_norm: NormKind,
    seed: u64,
) -> Result<EncoderLipschitzReport> {
    if pairs == 0 {
        return Err(Error::invalid("estimate_encoder_lipschitz needs pairs >= 1"));
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
        let (e1, e2) = (enc.encode(&u1)?, enc.encode(&u2)?);
        let num = e1
            .iter()
            .zip(&e2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        best = best.max(num / denom);
        used += 1;
    }
    Ok(EncoderLipschitzReport {
        encoder: enc.name(),
        estimate: best,
        pairs_used: used,
        pairs_requested: pairs,
        degenerate: used == 0,
    })
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FieldSampler;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// One inclusion in coordinates normalized to `[-1, 1]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub radii: [f64; 2],
    /// Rotation in radians.
    pub angle: f64,
    /// Contrast at full parameter value.
    pub intensity: f64,
}

/// `a_θ(x) = background + Σ_k θ_k c_k S_k(x)` with `θ ∈ [0, 1]^{d₀}` and
/// `S_k` a C¹ smoothed indicator of ellipse `k` (cubic smoothstep over a
/// band of relative width `width` inside the boundary).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomFamily {
    pub ellipses: Vec<Ellipse>,
    pub background: f64,
    pub alpha: f64,
    pub beta: f64,
    pub width: f64,
}

const SHEPP_LOGAN: [([f64; 2], [f64; 2], f64, f64); 10] = [
    ([0.0, -0.0184], [0.6624, 0.874], 0.0, -0.4),
    ([0.22, 0.0], [0.11, 0.31], -0.3141592653589793, -0.2),
    ([-0.22, 0.0], [0.16, 0.41], 0.3141592653589793, -0.2),
    ([0.0, 0.35], [0.21, 0.25], 0.0, 0.3),
    ([0.0, 0.1], [0.046, 0.046], 0.0, 0.3),
    ([0.0, -0.1], [0.046, 0.046], 0.0, 0.3),
    ([-0.08, -0.605], [0.046, 0.023], 0.0, 0.3),
    ([0.0, -0.605], [0.023, 0.023], 0.0, 0.3),
    ([0.06, -0.605], [0.023, 0.046], 0.0, 0.3),
    ([0.0, 0.0], [0.69, 0.92], 0.0, 0.5),
];

impl PhantomFamily {
    /// The first `d0` inclusions of a Shepp–Logan-style head phantom, with
    /// background 1 and bounds `[0.2, 3.5]`.
    pub fn shepp_logan(d0: usize) -> Result<Self> {
        if d0 == 0 || d0 > SHEPP_LOGAN.len() {
            return Err(Error::invalid(format!(
                "phantom dimension must be in 1..={}",
                SHEPP_LOGAN.len()
            )));
        }
        let fam = PhantomFamily {
            ellipses: SHEPP_LOGAN[..d0]
                .iter()
                .map(|&(center, radii, angle, intensity)| Ellipse {
                    center,
                    radii,
                    angle,
                    intensity,
                })
                .collect(),
            background: 1.0,
            alpha: 0.2,
            beta: 3.5,
            width: 0.2,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn dim(&self) -> usize {
        self.ellipses.len()
    }

    /// Worst-case values over the parameter box must stay inside `[α, β]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width < 1.0) {
            return Err(Error::invalid("mollifier width must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.beta) {
            return Err(Error::invalid("phantom needs 0 < α ≤ β"));
        }
        let lo: f64 = self.background + self.ellipses.iter().map(|e| e.intensity.min(0.0)).sum::<f64>();
        let hi: f64 = self.background + self.ellipses.iter().map(|e| e.intensity.max(0.0)).sum::<f64>();
        if lo < self.alpha - 1e-12 || hi > self.beta + 1e-12 {
            return Err(Error::invalid(format!(
                "phantom range [{lo}, {hi}] not inside [{}, {}]",
                self.alpha, self.beta
            )));
        }
        if self.ellipses.iter().any(|e| !(e.radii[0] > 0.0 && e.radii[1] > 0.0)) {
            return Err(Error::invalid("ellipse radii must be positive"));
        }
        Ok(())
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn indicator(e: &Ellipse, x: f64, y: f64, width: f64) -> f64 {
    let (s, c) = e.angle.sin_cos();
    let (dx, dy) = (x - e.center[0], y - e.center[1]);
    let u = (c * dx + s * dy) / e.radii[0];
    let v = (-s * dx + c * dy) / e.radii[1];
    let rho = (u * u + v * v).sqrt();
    smoothstep((1.0 - rho) / width)
}

/// Media function `a_θ` on a two-dimensional grid.
pub fn phantom_media(theta: &[f64], family: &PhantomFamily, grid: &Grid) -> Result<GridFunction> {
    family.validate()?;
    if grid.dim() != 2 {
        return Err(Error::Unsupported("phantom media are two-dimensional".into()));
    }
    if theta.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: theta.len(),
        });
    }
    if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::OutOfDomain {
            point: theta.to_vec(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (lo, hi, side) = (grid.lo(), grid.hi(), grid.side());
    Ok(GridFunction::from_fn(grid, |p| {
        let x = (2.0 * p[0] - lo - hi) / side;
        let y = (2.0 * p[1] - lo - hi) / side;
        let bump: f64 = family
            .ellipses
            .iter()
            .zip(theta)
            .map(|(e, t)| t * e.intensity * indicator(e, x, y, family.width))
            .sum();
        (family.background + bump).clamp(family.alpha, family.beta)
    }))
}

/// Draws `θ ~ U([0, 1]^{d₀})` and renders the phantom.
#[derive(Clone, Debug)]
pub struct PhantomSampler {
    grid: Grid,
    family: PhantomFamily,
}

impl PhantomSampler {
    pub fn new(grid: &Grid, family: PhantomFamily) -> Result<Self> {
        family.validate()?;
        if grid.dim() != 2 {
            return Err(Error::Unsupported("phantom media are two-dimensional".into()));
        }
        Ok(PhantomSampler {
            grid: grid.clone(),
            family,
        })
    }

    pub fn family(&self) -> &PhantomFamily {
        &self.family
    }

    pub fn draw_theta(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.family.dim()).map(|_| rng.gen_range(0.0..=1.0)).collect()
    }
}

impl FieldSampler for PhantomSampler {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<GridFunction> {
        let theta = self.draw_theta(rng);
        phantom_media(&theta, &self.family, &self.grid)
    }
}

//! Sample-size sweeps: draw datasets, train at a prescribed budget, estimate
//! the generalization error on a shared test set, and fit the log-log rate.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_dataset, FieldSampler, NoiseModel, RandomFieldSampler, SamplerConfig};
use crate::encoders::{Encoder, NodalEncoder, SpectralEncoder};
use crate::error::{Error, Result};
use crate::grid::{norm, Grid, GridFunction, NormKind};
use crate::network::{budget_from_theorem, train, BudgetInputs, Network, Theorem, TrainConfig};
use crate::pde::{
    estimate_operator_lipschitz, LipschitzReport, Operator, OperatorSpec, PhantomFamily,
    PhantomSampler, SolutionOperator,
};
use crate::seeds::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    /// Tensor Chebyshev coefficients of per-axis degree `< degree`.
    Spectral { degree: usize },
    /// Raw grid values.
    Nodal,
}

impl EncoderSpec {
    pub fn build(&self, grid: &Grid) -> Result<Box<dyn Encoder>> {
        Ok(match *self {
            EncoderSpec::Spectral { degree } => {
                Box::new(SpectralEncoder::for_grid(grid, degree)?.codec(grid)?)
            }
            EncoderSpec::Nodal => Box::new(NodalEncoder::new(grid)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub input: EncoderSpec,
    pub output: EncoderSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    RandomField(SamplerConfig),
    /// Shepp–Logan-style media with `d0` active inclusions.
    Phantom { d0: usize },
}

impl SamplerSpec {
    pub fn build(&self, grid: &Grid) -> Result<Box<dyn FieldSampler>> {
        Ok(match self {
            SamplerSpec::RandomField(cfg) => Box::new(RandomFieldSampler::new(grid, cfg.clone())?),
            SamplerSpec::Phantom { d0 } => {
                Box::new(PhantomSampler::new(grid, PhantomFamily::shepp_logan(*d0)?)?)
            }
        })
    }
}

fn default_noise_modes() -> usize {
    8
}

fn default_noise_smoothness() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
    /// Cosine modes per axis of the noise shape.
    #[serde(default = "default_noise_modes")]
    pub modes: usize,
    #[serde(default = "default_noise_smoothness")]
    pub smoothness: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            sigma: 0.0,
            modes: default_noise_modes(),
            smoothness: default_noise_smoothness(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub theorem: Theorem,
    #[serde(default)]
    pub d0: Option<usize>,
    #[serde(default)]
    pub d_max: Option<usize>,
    #[serde(default)]
    pub l_max: Option<usize>,
    #[serde(default)]
    pub blocks: Option<usize>,
    #[serde(default = "one")]
    pub c_l: f64,
    #[serde(default = "one")]
    pub c_p: f64,
    /// `L_{E_Y}`; estimated from the training outputs when absent.
    #[serde(default)]
    pub encoder_lipschitz: Option<f64>,
    /// `R_Y`; estimated from the training outputs when absent.
    #[serde(default)]
    pub output_radius: Option<f64>,
}

fn default_trials() -> usize {
    3
}

fn default_test_size() -> usize {
    200
}

fn default_lipschitz_pairs() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ns: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    /// Norm of `Y` for the error and the noise bound.
    #[serde(default = "default_l2")]
    pub norm: NormKind,
    /// Norm of `X` for the projection and Lipschitz terms.
    #[serde(default = "default_l2")]
    pub input_norm: NormKind,
    #[serde(default = "default_lipschitz_pairs")]
    pub lipschitz_pairs: usize,
}

fn default_l2() -> NormKind {
    NormKind::L2
}

fn default_output_dir() -> String {
    "results".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_output_dir(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub operator: OperatorSpec,
    pub encoder: EncoderSection,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub noise: NoiseSection,
    pub budget: BudgetSection,
    pub train: TrainConfig,
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        self.train.validate()?;
        let ns = &self.sweep.ns;
        if ns.len() < 2 {
            return Err(Error::invalid("sweep.ns needs at least two sample sizes"));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
            return Err(Error::invalid("sweep.ns must be positive and strictly increasing"));
        }
        if self.sweep.test_size < 100 {
            return Err(Error::invalid("sweep.test_size must be >= 100"));
        }
        if self.sweep.trials == 0 || self.sweep.lipschitz_pairs == 0 {
            return Err(Error::invalid("sweep.trials and sweep.lipschitz_pairs must be >= 1"));
        }
        self.sweep.norm.validate()?;
        self.sweep.input_norm.validate()?;
        if !(self.noise.sigma >= 0.0) {
            return Err(Error::invalid("noise.sigma must be non-negative"));
        }
        Ok(())
    }

    /// `β*` in `E_gen ≈ n^{β*}`, log factors ignored.
    pub fn predicted_exponent(&self, d_x: usize) -> f64 {
        let d = match self.budget.theorem {
            Theorem::T1 | Theorem::T2 => Some(d_x),
            Theorem::T3 | Theorem::T4 => self.budget.d0,
            Theorem::T5 => self.budget.d_max,
        }
        .unwrap_or(d_x) as f64;
        -2.0 / (2.0 + d)
    }
}

/// `u ↦ D_Y Γ E_X u`.
pub struct Pipeline<'a> {
    pub enc_x: &'a dyn Encoder,
    pub enc_y: &'a dyn Encoder,
    pub net: &'a Network,
}

impl Pipeline<'_> {
    pub fn predict(&self, u: &GridFunction) -> Result<GridFunction> {
        self.enc_y.decode(&self.net.forward(&self.enc_x.encode(u)?)?)
    }
}

/// Held-out inputs with their reference outputs, drawn from the TEST stream.
pub struct TestSet {
    pub inputs: Vec<GridFunction>,
    pub outputs: Vec<GridFunction>,
    pub skipped: usize,
}

impl TestSet {
    /// Draws that the operator rejects are skipped; more than 5% is an error.
    pub fn draw(
        op: &dyn SolutionOperator,
        sampler: &dyn FieldSampler,
        size: usize,
        seed: u64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("test set needs at least one draw"));
        }
        let pairs: Vec<Result<Option<(GridFunction, GridFunction)>>> = (0..size)
            .into_par_iter()
            .map(|i| {
                let u = sampler.draw(&mut seeds::rng_at(seed, &[stream::TEST, i as u64]))?;
                Ok(op.apply(&u).ok().map(|v| (u, v)))
            })
            .collect();
        let mut inputs = Vec::with_capacity(size);
        let mut outputs = Vec::with_capacity(size);
        let mut skipped = 0;
        for p in pairs {
            match p? {
                Some((u, v)) => {
                    inputs.push(u);
                    outputs.push(v);
                }
                None => skipped += 1,
            }
        }
        if skipped * 20 > size {
            return Err(Error::Numerical(format!(
                "operator failed on {skipped} of {size} test draws"
            )));
        }
        Ok(TestSet {
            inputs,
            outputs,
            skipped,
        })
    }

    pub fn estimate(&self, pipeline: &Pipeline, y_norm: NormKind) -> Result<GenEstimate> {
        let errs: Vec<f64> = self
            .inputs
            .par_iter()
            .zip(&self.outputs)
            .map(|(u, v)| {
                let e = norm(&pipeline.predict(u)?.sub(v)?, y_norm)?;
                Ok(e * e)
            })
            .collect::<Result<_>>()?;
        Ok(GenEstimate::from_samples(&errs, self.skipped))
    }

    /// Mean of `‖Π_Y v − v‖²` over the reference outputs.
    pub fn output_projection_error(&self, enc_y: &dyn Encoder, y_norm: NormKind) -> Result<f64> {
        let mut total = 0.0;
        for v in &self.outputs {
            let e = norm(&enc_y.project(v)?.sub(v)?, y_norm)?;
            total += e * e;
        }
        Ok(total / self.outputs.len() as f64)
    }

    /// Mean of `‖Π_X u − u‖²` over the test inputs.
    pub fn input_projection_error(&self, enc_x: &dyn Encoder, x_norm: NormKind) -> Result<f64> {
        let mut total = 0.0;
        for u in &self.inputs {
            let e = norm(&enc_x.project(u)?.sub(u)?, x_norm)?;
            total += e * e;
        }
        Ok(total / self.inputs.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenEstimate {
    pub mean: f64,
    /// Monte Carlo standard error of the mean.
    pub stderr: f64,
    pub samples: usize,
    pub skipped: usize,
}

impl GenEstimate {
    fn from_samples(errs: &[f64], skipped: usize) -> Self {
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let var = if errs.len() > 1 {
            errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        GenEstimate {
            mean,
            stderr: (var / n).sqrt(),
            samples: errs.len(),
            skipped,
        }
    }
}

/// Monte Carlo `E_u ‖D_Y Γ E_X u − Φ(u)‖²` on `test_size` fresh draws.
pub fn estimate_generalization(
    pipeline: &Pipeline,
    op: &dyn SolutionOperator,
    sampler: &dyn FieldSampler,
    test_size: usize,
    y_norm: NormKind,
    seed: u64,
) -> Result<GenEstimate> {
    TestSet::draw(op, sampler, test_size, seed)?.estimate(pipeline, y_norm)
}

/// Terms of `L_Φ² E‖Π_X u − u‖² + E‖Π_Y Φu − Φu‖² + σ² + 1/n` next to the
/// measured error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub input_projection: f64,
    pub lipschitz: f64,
    /// `L_Φ²` times the input projection error.
    pub projection_x_term: f64,
    pub projection_y_term: f64,
    pub sigma_sq: f64,
    pub inv_n: f64,
    pub total: f64,
    pub measured: f64,
    pub measured_stderr: f64,
    /// The output projection error is a floor for `E_gen` in the discrete
    /// `L²` norm; set when the measurement falls more than two standard
    /// errors below it.
    pub below_floor: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn error_budget(
    input_projection: f64,
    lipschitz: f64,
    output_projection: f64,
    sigma: f64,
    n: usize,
    measured: &GenEstimate,
) -> ErrorBudget {
    let projection_x_term = lipschitz * lipschitz * input_projection;
    let sigma_sq = sigma * sigma;
    let inv_n = 1.0 / n as f64;
    ErrorBudget {
        input_projection,
        lipschitz,
        projection_x_term,
        projection_y_term: output_projection,
        sigma_sq,
        inv_n,
        total: projection_x_term + output_projection + sigma_sq + inv_n,
        measured: measured.mean,
        measured_stderr: measured.stderr,
        below_floor: measured.mean + 2.0 * measured.stderr < output_projection,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; 0 with two points.
    pub stderr: f64,
}

/// Ordinary least squares of `ln e` on `ln n`.
pub fn fit_rate(ns: &[usize], errors: &[f64]) -> Result<RateFit> {
    if ns.len() != errors.len() || ns.len() < 2 {
        return Err(Error::invalid("fit_rate needs at least two matching points"));
    }
    if errors.iter().any(|e| !(*e > 0.0)) || ns.contains(&0) {
        return Err(Error::invalid("fit_rate needs positive sample sizes and errors"));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit_rate needs distinct sample sizes"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let ssr: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        stderr,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub clamp: f64,
    pub lp: Option<usize>,
    pub train_loss: f64,
    pub e_gen: GenEstimate,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub train_loss: f64,
    pub budget: ErrorBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub operator: String,
    pub d_x: usize,
    pub d_y: usize,
    pub predicted_exponent: f64,
    pub lipschitz: LipschitzReport,
    pub output_projection: f64,
    pub input_projection: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<RateFit>,
    /// Fraction of adjacent sweep points whose median error does not increase.
    pub monotone_fraction: Option<f64>,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl ExperimentResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per sweep point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "n,trials,mean,std,median,train_loss,projection_x_term,projection_y_term,sigma_sq,inv_n\n",
        );
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.n,
                p.trials,
                p.mean,
                p.std,
                p.median,
                p.train_loss,
                p.budget.projection_x_term,
                p.budget.projection_y_term,
                p.budget.sigma_sq,
                p.budget.inv_n
            ));
        }
        s
    }

    /// Two columns `ln n  ln E_gen` for plotting.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from("# ln_n ln_e_gen\n");
        for p in self.points.iter().filter(|p| p.mean > 0.0) {
            s.push_str(&format!("{} {}\n", (p.n as f64).ln(), p.mean.ln()));
        }
        s
    }

    /// Writes `results.json`, `summary.csv`, and `rate.dat` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.json"), self.to_json()?)?;
        std::fs::write(dir.join("summary.csv"), self.to_csv())?;
        std::fs::write(dir.join("rate.dat"), self.to_plot_data())?;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Everything the trials share.
struct Setup {
    op: Operator,
    enc_x: Box<dyn Encoder>,
    enc_y: Box<dyn Encoder>,
    sampler: Box<dyn FieldSampler>,
    noise: NoiseModel,
    test: TestSet,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let op = Operator::new(&cfg.operator)?;
        let enc_x = cfg.encoder.input.build(op.input_grid())?;
        let enc_y = cfg.encoder.output.build(op.output_grid())?;
        let sampler = cfg.sampler.build(op.input_grid())?;
        let shape = RandomFieldSampler::new(
            op.output_grid(),
            SamplerConfig::new(cfg.noise.smoothness, 1.0, cfg.noise.modes),
        )?;
        let noise = NoiseModel::new(cfg.noise.sigma, shape, cfg.sweep.norm)?;
        let test = TestSet::draw(&op, sampler.as_ref(), cfg.sweep.test_size, cfg.seed)?;
        Ok(Setup {
            op,
            enc_x,
            enc_y,
            sampler,
            noise,
            test,
        })
    }

    fn run_trial(&self, cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<TrialRecord> {
        let seed = seeds::derive(cfg.seed, &[stream::TRIAL, n as u64, trial as u64]);
        let data = make_dataset(
            &self.op,
            self.sampler.as_ref(),
            &self.noise,
            n,
            seed,
            serde_json::to_value(&cfg.sampler)?,
        )?;
        let (us, vs) = data.s2();
        let xs = us
            .iter()
            .map(|u| self.enc_x.encode(u))
            .collect::<Result<Vec<_>>>()?;
        let ys = vs
            .iter()
            .map(|v| self.enc_y.encode(v))
            .collect::<Result<Vec<_>>>()?;
        let (d_x, d_y) = (self.enc_x.encoded_dim(), self.enc_y.encoded_dim());
        // R_Y and L_{E_Y} from the training outputs when not configured
        let mut radius: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for (v, y) in vs.iter().zip(&ys) {
            let nv = norm(v, cfg.sweep.norm)?;
            radius = radius.max(nv);
            if nv > 1e-12 {
                lip = lip.max(y.iter().map(|c| c * c).sum::<f64>().sqrt() / nv);
            }
        }
        let b = &cfg.budget;
        let inputs = BudgetInputs {
            theorem: b.theorem,
            n,
            d_x,
            d_y,
            d0: b.d0,
            d_max: b.d_max,
            l_max: b.l_max,
            blocks: b.blocks,
            encoder_lipschitz: b.encoder_lipschitz.unwrap_or(if lip > 0.0 { lip } else { 1.0 }),
            output_radius: b.output_radius.unwrap_or(if radius > 0.0 { radius } else { 1.0 }),
            c_l: b.c_l,
            c_p: b.c_p,
        };
        let budget = budget_from_theorem(&inputs)?;
        let cs = budget.constraint_set();
        let mut tc = cfg.train.clone();
        tc.seed = seeds::derive(seed, &[stream::TRAIN]);
        let outcome = train(&xs, &ys, &tc, &cs)?;
        let pipeline = Pipeline {
            enc_x: self.enc_x.as_ref(),
            enc_y: self.enc_y.as_ref(),
            net: &outcome.network,
        };
        let e_gen = self.test.estimate(&pipeline, cfg.sweep.norm)?;
        Ok(TrialRecord {
            n,
            trial,
            seed,
            depth: budget.depth,
            width: budget.width,
            clamp: budget.clamp,
            lp: budget.lp,
            train_loss: outcome.final_loss,
            e_gen,
            feasible: cs.check(&outcome.network).feasible(),
        })
    }
}

/// Runs the whole sweep. Per-trial failures are recorded in the result
/// rather than aborting; setup failures are errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let lipschitz = estimate_operator_lipschitz(
        &setup.op,
        setup.sampler.as_ref(),
        cfg.sweep.lipschitz_pairs,
        cfg.sweep.input_norm,
        cfg.sweep.norm,
        seeds::derive(cfg.seed, &[stream::LIPSCHITZ]),
    )?;
    let input_projection = setup
        .test
        .input_projection_error(setup.enc_x.as_ref(), cfg.sweep.input_norm)?;
    let output_projection = setup
        .test
        .output_projection_error(setup.enc_y.as_ref(), cfg.sweep.norm)?;
    let jobs: Vec<(usize, usize)> = cfg
        .sweep
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.sweep.trials).map(move |t| (n, t)))
        .collect();
    let outcomes: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(n, t)| setup.run_trial(cfg, n, t))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(n, trial), res) in jobs.iter().zip(outcomes) {
        match res {
            Ok(r) => records.push(r),
            Err(e) => failures.push(TrialFailure {
                n,
                trial,
                error: e.to_string(),
            }),
        }
    }
    let mut points = Vec::new();
    for &n in &cfg.sweep.ns {
        let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
        if rs.is_empty() {
            continue;
        }
        let k = rs.len() as f64;
        let mut errs: Vec<f64> = rs.iter().map(|r| r.e_gen.mean).collect();
        let mean = errs.iter().sum::<f64>() / k;
        let std = if rs.len() > 1 {
            (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        let train_loss = rs.iter().map(|r| r.train_loss).sum::<f64>() / k;
        let pooled = GenEstimate {
            mean,
            stderr: (rs.iter().map(|r| r.e_gen.stderr.powi(2)).sum::<f64>()).sqrt() / k,
            samples: rs.iter().map(|r| r.e_gen.samples).sum(),
            skipped: rs.iter().map(|r| r.e_gen.skipped).sum(),
        };
        points.push(SweepPoint {
            n,
            trials: rs.len(),
            mean,
            std,
            median: median(&mut errs),
            train_loss,
            budget: error_budget(
                input_projection,
                lipschitz.estimate,
                output_projection,
                cfg.noise.sigma,
                n,
                &pooled,
            ),
        });
    }
    let fit = if points.len() >= 2 && points.iter().all(|p| p.mean > 0.0) {
        let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
        let es: Vec<f64> = points.iter().map(|p| p.mean).collect();
        Some(fit_rate(&ns, &es)?)
    } else {
        None
    };
    let monotone_fraction = (points.len() >= 2).then(|| {
        let ok = points.windows(2).filter(|w| w[1].median <= w[0].median).count();
        ok as f64 / (points.len() - 1) as f64
    });
    Ok(ExperimentResult {
        config: cfg.clone(),
        operator: setup.op.id(),
        d_x: setup.enc_x.encoded_dim(),
        d_y: setup.enc_y.encoded_dim(),
        predicted_exponent: cfg.predicted_exponent(setup.enc_x.encoded_dim()),
        lipschitz,
        output_projection,
        input_projection,
        points,
        fit,
        monotone_fraction,
        records,
        failures,
    })
}

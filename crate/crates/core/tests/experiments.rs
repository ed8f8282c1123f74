use oplearn::data::{RandomFieldSampler, SamplerConfig};
use oplearn::encoders::{Encoder, SpectralEncoder};
use oplearn::experiments::*;
use oplearn::grid::{norm, Grid, GridFunction, NormKind};
use oplearn::network::{train, ConstraintSet, Network, TrainConfig};
use oplearn::pde::{Operator, OperatorKind, OperatorSpec, SolutionOperator};
use oplearn::seeds;
use oplearn::structures::{poisson_decomposition, verify_chain};
use oplearn::{data, Result};
use rand::Rng;
use serde_json::json;

fn smoke_config() -> ExperimentConfig {
    serde_json::from_value(json!({
        "seed": 3,
        "operator": {
            "equation": {"kind": "poisson"},
            "input_grid": {"dim": 1, "points": 33, "lo": -1.0, "hi": 1.0},
            "output_grid": {"dim": 1, "points": 33, "lo": -1.0, "hi": 1.0}
        },
        "encoder": {"input": {"kind": "spectral", "degree": 4}, "output": {"kind": "spectral", "degree": 4}},
        "sampler": {"kind": "random_field", "smoothness": 1.0, "radius": 1.0, "modes": 4, "taper": true},
        "budget": {"theorem": "T4", "d0": 1},
        "train": {"learning_rate": 0.01, "epochs": 10, "batch_size": 8},
        "sweep": {"ns": [16, 32], "trials": 2, "test_size": 100}
    }))
    .unwrap()
}

#[test]
fn exact_power_law_slope() {
    let ns = [64usize, 256, 1024, 4096];
    let errs: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-2.0 / 3.0)).collect();
    let fit = fit_rate(&ns, &errs).unwrap();
    assert!((fit.slope + 2.0 / 3.0).abs() <= 1e-12);
    let flat = fit_rate(&ns, &[0.3; 4]).unwrap();
    assert!(flat.slope.abs() <= 1e-12);
    let two = fit_rate(&ns[..2], &errs[..2]).unwrap();
    assert_eq!(two.stderr, 0.0);
}

#[test]
fn perturbed_power_law_slope() {
    let mut rng = seeds::rng(1);
    let ns: Vec<usize> = (0..8).map(|k| 32usize << k).collect();
    for _ in 0..20 {
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| (n as f64).powf(-2.0 / 3.0) * (1.0 + 0.05 * rng.gen_range(-1.0..1.0)))
            .collect();
        let fit = fit_rate(&ns, &errs).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() <= 0.1);
    }
}

#[test]
fn fit_rejects_bad_inputs() {
    assert!(fit_rate(&[1, 2], &[1.0, 0.0]).is_err());
    assert!(fit_rate(&[1], &[1.0]).is_err());
    assert!(fit_rate(&[1, 2, 3], &[1.0, 2.0]).is_err());
}

#[test]
fn degenerate_sweep_is_rejected() {
    let mut cfg = smoke_config();
    cfg.sweep.ns = vec![32, 32];
    assert!(cfg.validate().is_err());
    assert!(run_experiment(&cfg).is_err());
    cfg.sweep.ns = vec![64, 32];
    assert!(cfg.validate().is_err());
}

#[test]
fn unknown_keys_are_rejected() {
    let mut v = serde_json::to_value(smoke_config()).unwrap();
    v["sweep"]["bogus"] = json!(1);
    assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
}

#[test]
fn error_budget_arithmetic() {
    let m = GenEstimate {
        mean: 0.01,
        stderr: 0.001,
        samples: 100,
        skipped: 0,
    };
    let a = error_budget(0.0, 2.0, 1e-4, 0.1, 100, &m);
    let b = error_budget(0.0, 2.0, 1e-4, 0.2, 100, &m);
    assert!((b.sigma_sq - 4.0 * a.sigma_sq).abs() <= 1e-15);
    assert_eq!(a.projection_x_term, 0.0);
    let c = error_budget(0.0, 2.0, 1e-4, 0.0, 50, &m);
    assert!((c.total - (1.0 / 50.0 + 1e-4)).abs() <= 1e-15);
}

struct ZeroOperator(Grid);

impl SolutionOperator for ZeroOperator {
    fn id(&self) -> String {
        "zero".into()
    }
    fn input_grid(&self) -> &Grid {
        &self.0
    }
    fn output_grid(&self) -> &Grid {
        &self.0
    }
    fn apply(&self, _u: &GridFunction) -> Result<GridFunction> {
        Ok(GridFunction::zeros(&self.0))
    }
}

#[test]
fn zero_operator_zero_network() {
    let g = Grid::new(1, 33, -1.0, 1.0).unwrap();
    let enc = SpectralEncoder::for_grid(&g, 4).unwrap().codec(&g).unwrap();
    let net = Network::zeros(&[4, 6, 4], 1.0).unwrap();
    let sampler = RandomFieldSampler::new(&g, SamplerConfig::new(1.0, 1.0, 4)).unwrap();
    let p = Pipeline {
        enc_x: &enc,
        enc_y: &enc,
        net: &net,
    };
    let e = estimate_generalization(&p, &ZeroOperator(g.clone()), &sampler, 100, NormKind::L2, 0).unwrap();
    assert_eq!(e.mean, 0.0);
}

fn poisson() -> (Operator, Grid) {
    let g = Grid::new(1, 65, -1.0, 1.0).unwrap();
    (Operator::new(&OperatorSpec::new(OperatorKind::Poisson, g.clone(), g.clone())).unwrap(), g)
}

#[test]
fn exact_chain_pipeline_matches_chain_discrepancy() {
    let (op, g) = poisson();
    let enc = SpectralEncoder::for_grid(&g, 8).unwrap().codec(&g).unwrap();
    let chain = poisson_decomposition(&op, &enc, &enc).unwrap();
    let v = &chain.blocks[0].outputs;
    let d = enc.encoded_dim();
    // ReLU realization of the linear block: hidden [x; -x], output [V, -V]
    let mut net = Network::zeros(&[d, 2 * d, d], 1e6).unwrap();
    for i in 0..d {
        net.layers[0].weights[i * d + i] = 1.0;
        net.layers[0].weights[(d + i) * d + i] = -1.0;
    }
    for (r, o) in v.iter().enumerate() {
        for c in 0..d {
            net.layers[1].weights[r * 2 * d + c] = o.v[c];
            net.layers[1].weights[r * 2 * d + d + c] = -o.v[c];
        }
    }
    let sampler = RandomFieldSampler::new(&g, SamplerConfig::new(1.0, 1.0, 4).tapered(true)).unwrap();
    let p = Pipeline {
        enc_x: &enc,
        enc_y: &enc,
        net: &net,
    };
    let test = TestSet::draw(&op, &sampler, 200, 9).unwrap();
    let est = test.estimate(&p, NormKind::L2).unwrap();
    let proj_y = test.output_projection_error(&enc, NormKind::L2).unwrap();
    let rep = verify_chain(&chain, &op, &enc, &enc, &sampler, 200, NormKind::L2, 9).unwrap();
    // E‖pred − Φu‖² = E‖(pred − Π_Y Φu) + (Π_Y Φu − Φu)‖²
    let upper = 2.0 * (rep.max_discrepancy.powi(2) + proj_y);
    assert!(est.mean <= upper, "{} vs {upper}", est.mean);
    assert!(est.mean >= proj_y - 3.0 * est.stderr - 1e-15);
}

#[test]
fn training_beats_random_initialization() {
    let (op, g) = poisson();
    let enc = SpectralEncoder::for_grid(&g, 4).unwrap().codec(&g).unwrap();
    let sampler = RandomFieldSampler::new(&g, SamplerConfig::new(1.0, 1.0, 4).tapered(true)).unwrap();
    let test = TestSet::draw(&op, &sampler, 100, 77).unwrap();
    let noise = data::NoiseModel::none(&g).unwrap();
    let cs = ConstraintSet::Loose {
        depth: 2,
        width: 8,
        clamp: 1.0,
    };
    let mut wins = 0;
    for trial in 0..20u64 {
        let ds = data::make_dataset(&op, &sampler, &noise, 32, trial, json!({})).unwrap();
        let (u, v) = ds.s2();
        let xs: Vec<Vec<f64>> = u.iter().map(|f| enc.encode(f).unwrap()).collect();
        let ys: Vec<Vec<f64>> = v.iter().map(|f| enc.encode(f).unwrap()).collect();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            seed: trial,
            ..TrainConfig::default()
        };
        let trained = train(&xs, &ys, &cfg, &cs).unwrap().network;
        let random = Network::init(&[4, 8, 4], 1.0, &mut seeds::rng(trial)).unwrap();
        let e = |net: &Network| {
            test.estimate(
                &Pipeline {
                    enc_x: &enc,
                    enc_y: &enc,
                    net,
                },
                NormKind::L2,
            )
            .unwrap()
            .mean
        };
        if e(&random) > e(&trained) {
            wins += 1;
        }
    }
    assert!(wins > 10, "{wins}/20");
}

#[test]
fn smoke_experiment_is_deterministic() {
    let t = std::time::Instant::now();
    let cfg = smoke_config();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(t.elapsed().as_secs() < 60);
    assert!(a.is_complete());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.points.len(), 2);
    assert_eq!(a.records.len(), 4);
    for p in &a.points {
        assert!(p.mean > 0.0 && p.mean.is_finite());
        assert!(p.budget.inv_n > 0.0);
    }
    assert!((a.predicted_exponent + 2.0 / 3.0).abs() < 1e-12);
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path()).unwrap();
    for f in ["results.json", "summary.csv", "rate.dat"] {
        assert!(dir.path().join(f).exists());
    }
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let plot = std::fs::read_to_string(dir.path().join("rate.dat")).unwrap();
    let first: Vec<f64> = plot
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split_whitespace()
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((first[0] - 16f64.ln()).abs() < 1e-9);
}

#[test]
fn seed_changes_the_result() {
    let mut cfg = smoke_config();
    let a = run_experiment(&cfg).unwrap();
    cfg.seed += 1;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn test_set_matches_the_operator() {
    let (op, g) = poisson();
    let sampler = RandomFieldSampler::new(&g, SamplerConfig::new(1.0, 1.0, 4)).unwrap();
    let t = TestSet::draw(&op, &sampler, 10, 1).unwrap();
    for (u, v) in t.inputs.iter().zip(&t.outputs) {
        assert!(norm(&op.apply(u).unwrap().sub(v).unwrap(), NormKind::Linf).unwrap() == 0.0);
    }
    assert_eq!(t.skipped, 0);
}

use oplearn::network::*;
use oplearn::seeds;
use rand::Rng;

fn random_net(widths: &[usize], clamp: f64, seed: u64) -> Network {
    let mut rng = seeds::rng(seed);
    let mut net = Network::init(widths, clamp, &mut rng).unwrap();
    for layer in &mut net.layers {
        for b in &mut layer.bias {
            *b = rng.gen_range(-0.3..0.3);
        }
    }
    net
}

fn random_batch(n: usize, d_in: usize, d_out: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = seeds::rng(seed);
    let xs = (0..n).map(|_| (0..d_in).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ys = (0..n).map(|_| (0..d_out).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (xs, ys)
}

/// Straight-line evaluation with explicit index arithmetic.
fn naive_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.rows];
        for i in 0..layer.rows {
            let mut s = 0.0;
            for j in 0..layer.cols {
                s += layer.weights[i * layer.cols + j] * a[j];
            }
            z[i] = s + layer.bias[i];
            if l < last && z[i] < 0.0 {
                z[i] = 0.0;
            }
        }
        a = z;
    }
    a.iter().map(|v| v.max(-net.clamp).min(net.clamp)).collect()
}

#[test]
fn identity_layer_on_positive_orthant() {
    let mut net = Network::zeros(&[3, 3], 1e6).unwrap();
    for i in 0..3 {
        net.layers[0].weights[i * 3 + i] = 1.0;
    }
    assert_eq!(net.forward(&[0.5, 2.0, 7.0]).unwrap(), vec![0.5, 2.0, 7.0]);
}

#[test]
fn zero_clamp_gives_zero_output() {
    let net = random_net(&[4, 8, 8, 2], 0.0, 1);
    assert!(net.forward(&[0.1, -0.2, 0.3, 0.9]).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn forward_matches_naive_evaluation() {
    let net = random_net(&[5, 7, 6, 3], 0.8, 2);
    let (xs, _) = random_batch(50, 5, 3, 3);
    for x in &xs {
        let a = net.forward(x).unwrap();
        let b = naive_forward(&net, x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn forward_rejects_wrong_input_length() {
    let net = random_net(&[3, 4, 1], 1.0, 0);
    assert!(net.forward(&[1.0, 2.0]).is_err());
}

#[test]
fn contractive_weights_give_lipschitz_one() {
    let mut net = random_net(&[4, 6, 6, 4], 10.0, 4);
    // scale every layer to unit ℓ∞ operator norm
    for layer in &mut net.layers {
        let worst = (0..layer.rows)
            .map(|i| layer.weights[i * layer.cols..(i + 1) * layer.cols].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        layer.weights.iter_mut().for_each(|w| *w /= worst);
    }
    let (xs, _) = random_batch(40, 4, 4, 5);
    for pair in xs.chunks(2) {
        let (a, b) = (net.forward(&pair[0]).unwrap(), net.forward(&pair[1]).unwrap());
        let num = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let den = pair[0].iter().zip(&pair[1]).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(num <= den + 1e-12);
    }
}

#[test]
fn zero_loss_batch_has_zero_gradient() {
    let net = random_net(&[3, 5, 2], 10.0, 6);
    let (xs, _) = random_batch(8, 3, 2, 7);
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| net.forward(x).unwrap()).collect();
    let (loss, grad) = net.backward(&xs, &ys).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grad.norm(), 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let net = random_net(&[3, 6, 5, 2], 2.0, 8);
    let (xs, ys) = random_batch(6, 3, 2, 9);
    let (_, grad) = net.backward(&xs, &ys).unwrap();
    let g = grad.flat();
    let step = 1e-6;
    let mut rng = seeds::rng(10);
    let mut checked = 0;
    for _ in 0..100 {
        let idx = rng.gen_range(0..net.param_count());
        let mut plus = net.clone();
        *plus.param_mut(idx) += step;
        let mut minus = net.clone();
        *minus.param_mut(idx) -= step;
        let near_kink = xs
            .iter()
            .any(|x| plus.kink_distance(x) < 1e-6 || minus.kink_distance(x) < 1e-6);
        if near_kink {
            continue;
        }
        let fd = (plus.loss(&xs, &ys).unwrap() - minus.loss(&xs, &ys).unwrap()) / (2.0 * step);
        let scale = fd.abs().max(g[idx].abs()).max(1e-8);
        assert!((fd - g[idx]).abs() / scale <= 1e-5, "param {idx}: {fd} vs {}", g[idx]);
        checked += 1;
    }
    assert!(checked > 80);
}

#[test]
fn small_step_decreases_loss() {
    let net = random_net(&[3, 6, 2], 5.0, 11);
    let (xs, ys) = random_batch(16, 3, 2, 12);
    let (loss, grad) = net.backward(&xs, &ys).unwrap();
    let mut moved = net.clone();
    let params: Vec<f64> = net.params().iter().zip(grad.flat()).map(|(p, g)| p - 1e-3 * g).collect();
    moved.set_params(&params).unwrap();
    assert!(moved.loss(&xs, &ys).unwrap() < loss);
}

#[test]
fn feasible_network_is_unchanged_by_projection() {
    let net = random_net(&[2, 3, 1], 1.0, 13);
    let cs = ConstraintSet::Full {
        depth: 2,
        width: 3,
        nonzeros: net.param_count(),
        bound: 10.0,
        clamp: 1.0,
    };
    assert_eq!(project_constraints(&net, &cs), net);
    assert!(cs.check(&net).feasible());
}

#[test]
fn projection_clips_entries() {
    let mut net = Network::zeros(&[2, 3, 1], 1.0).unwrap();
    let count = net.param_count();
    net.set_params(&vec![1.0; count]).unwrap();
    let cs = ConstraintSet::Full {
        depth: 2,
        width: 3,
        nonzeros: count,
        bound: 0.5,
        clamp: 1.0,
    };
    let p = project_constraints(&net, &cs);
    assert!(p.params().iter().all(|&v| v == 0.5));
}

#[test]
fn projection_keeps_largest_magnitudes() {
    let net = random_net(&[4, 6, 3], 1.0, 14);
    let count = net.param_count();
    let k = count / 2;
    let cs = ConstraintSet::Full {
        depth: 2,
        width: 6,
        nonzeros: k,
        bound: 100.0,
        clamp: 1.0,
    };
    let projected = project_constraints(&net, &cs).params();
    assert_eq!(projected.iter().filter(|v| **v != 0.0).count(), k);
    let mut sorted: Vec<(usize, f64)> = net.params().into_iter().enumerate().collect();
    sorted.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap());
    let mut keep: Vec<usize> = sorted[..k].iter().map(|e| e.0).collect();
    keep.sort();
    let kept: Vec<usize> = (0..count).filter(|&i| projected[i] != 0.0).collect();
    assert_eq!(kept, keep);
}

#[test]
fn budget_examples() {
    let b = budget_from_theorem(&BudgetInputs::new(Theorem::T2, 4096, 1, 1)).unwrap();
    assert_eq!(b.lp, Some(4));
    let b = budget_from_theorem(&BudgetInputs::new(Theorem::T4, 64, 1, 1).with_d0(1)).unwrap();
    assert_eq!(b.lp, Some(2));
    for th in [Theorem::T1, Theorem::T2, Theorem::T4] {
        let b = budget_from_theorem(&BudgetInputs::new(th, 1, 3, 2).with_d0(1)).unwrap();
        assert!(b.depth >= 1 && b.width >= 1);
        assert!(b.lp.unwrap_or(1) >= 1);
    }
    let t1 = budget_from_theorem(&BudgetInputs::new(Theorem::T1, 5, 2, 5)).unwrap();
    assert_eq!(t1.depth, 2);
    assert!(budget_from_theorem(&BudgetInputs::new(Theorem::T4, 64, 1, 1)).is_err());
    assert!(budget_from_theorem(&BudgetInputs::new(Theorem::T3, 64, 1, 1)).is_err());
}

#[test]
fn budget_is_monotone_in_n() {
    for th in [Theorem::T1, Theorem::T2, Theorem::T3, Theorem::T4, Theorem::T5] {
        let mut last = None;
        for k in 0..14 {
            let n = 1usize << k;
            let b = budget_from_theorem(&BudgetInputs::new(th, n, 4, 2).with_d0(1).with_structure(2, 5)).unwrap();
            let size = b.lp.unwrap_or(b.depth * b.width);
            if let Some(prev) = last {
                assert!(size >= prev, "{th} at n={n}");
            }
            last = Some(size);
        }
    }
}

fn linear_problem(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = seeds::rng(21);
    let a = [[0.8, -0.3], [0.2, 0.5]];
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let ys = xs
        .iter()
        .map(|x| (0..2).map(|i| a[i][0] * x[0] + a[i][1] * x[1]).collect())
        .collect();
    (xs, ys)
}

#[test]
fn training_fits_a_linear_map() {
    let (xs, ys) = linear_problem(256);
    let cs = ConstraintSet::Loose {
        depth: 2,
        width: 16,
        clamp: 5.0,
    };
    let cfg = TrainConfig {
        learning_rate: 0.02,
        epochs: 1500,
        batch_size: 32,
        restarts: 2,
        final_lr_fraction: 0.02,
        ..TrainConfig::default()
    };
    let out = train(&xs, &ys, &cfg, &cs).unwrap();
    assert!(out.final_loss <= 1e-4, "{}", out.final_loss);
    assert_eq!(out.loss_trace.len(), 1500);
    assert_eq!(out.restart_losses.len(), 2);
}

#[test]
fn training_on_zero_targets() {
    let (xs, _) = linear_problem(64);
    let ys = vec![vec![0.0, 0.0]; 64];
    let cs = ConstraintSet::Loose {
        depth: 2,
        width: 8,
        clamp: 1.0,
    };
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 4000,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let out = train(&xs, &ys, &cfg, &cs).unwrap();
    assert!(out.final_loss <= 1e-8, "{}", out.final_loss);
}

#[test]
fn training_is_deterministic() {
    let (xs, ys) = linear_problem(64);
    let cs = ConstraintSet::Loose {
        depth: 2,
        width: 8,
        clamp: 2.0,
    };
    let cfg = TrainConfig {
        epochs: 20,
        restarts: 3,
        seed: 4,
        ..TrainConfig::default()
    };
    let a = train(&xs, &ys, &cfg, &cs).unwrap();
    let b = train(&xs, &ys, &cfg, &cs).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_family_training_stays_feasible() {
    let (xs, ys) = linear_problem(128);
    let budget = budget_from_theorem(&BudgetInputs::new(Theorem::T1, 128, 2, 2)).unwrap();
    let cs = budget.constraint_set();
    assert!(cs.is_full());
    let cfg = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let out = train(&xs, &ys, &cfg, &cs).unwrap();
    let report = cs.check(&out.network);
    assert!(report.feasible(), "{report:?}");
}

#[test]
fn train_config_is_validated() {
    let (xs, ys) = linear_problem(8);
    let cs = ConstraintSet::Loose {
        depth: 2,
        width: 4,
        clamp: 1.0,
    };
    let bad = TrainConfig {
        learning_rate: -1.0,
        ..TrainConfig::default()
    };
    assert!(train(&xs, &ys, &bad, &cs).is_err());
    let bad = TrainConfig {
        momentum: 1.0,
        ..TrainConfig::default()
    };
    assert!(train(&xs, &ys, &bad, &cs).is_err());
    assert!(train(&xs[..0], &ys[..0], &TrainConfig::default(), &cs).is_err());
}

#[test]
fn network_round_trips_through_container() {
    let net = random_net(&[3, 4, 2], 0.7, 15);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    net.to_container().save(&path).unwrap();
    let back = Network::from_container(&oplearn::io::Container::load(&path).unwrap()).unwrap();
    assert_eq!(back, net);
}

use std::f64::consts::PI;

use oplearn::data::{FieldSampler, RandomFieldSampler, SamplerConfig};
use oplearn::grid::{integrate, norm, Grid, GridFunction, NormKind};
use oplearn::pde::*;
use oplearn::seeds;

fn grid1(points: usize, lo: f64, hi: f64) -> Grid {
    Grid::new(1, points, lo, hi).unwrap()
}

fn sup_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).unwrap().max_abs()
}

// ---------- Poisson ----------

fn poisson_spec(dim: usize, points: usize, out_points: usize) -> OperatorSpec {
    OperatorSpec::new(
        OperatorKind::Poisson,
        Grid::new(dim, points, -1.0, 1.0).unwrap(),
        Grid::new(dim, out_points, -1.0, 1.0).unwrap(),
    )
}

#[test]
fn poisson_of_zero_is_zero() {
    for d in 1..=2 {
        let spec = poisson_spec(d, 9, 9);
        let u = poisson_solve(&GridFunction::zeros(&spec.input_grid), &spec).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn poisson_kernel_values() {
    assert_eq!(poisson_kernel(2, 1.0), 0.0);
    assert!((poisson_kernel(3, 0.5) + 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert_eq!(poisson_kernel(1, 3.0), 1.5);
}

#[test]
fn poisson_cell_averages_match_brute_force() {
    // midpoint rule on a fine lattice of the cell, avoiding the origin
    let k = 400;
    let h = 0.3;
    let step = h / k as f64;
    let mut s2 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let x = -h / 2.0 + (i as f64 + 0.5) * step;
            let y = -h / 2.0 + (j as f64 + 0.5) * step;
            s2 += poisson_kernel(2, (x * x + y * y).sqrt());
        }
    }
    s2 /= (k * k) as f64;
    assert!((s2 - poisson_cell_average(2, h)).abs() < 1e-4, "{s2}");
    let k = 120;
    let step = h / k as f64;
    let mut s3 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let c = |a: usize| -h / 2.0 + (a as f64 + 0.5) * step;
                let r = (c(i).powi(2) + c(j).powi(2) + c(l).powi(2)).sqrt();
                s3 += poisson_kernel(3, r);
            }
        }
    }
    s3 /= (k * k * k) as f64;
    let exact = poisson_cell_average(3, h);
    assert!(((s3 - exact) / exact).abs() < 1e-2, "{s3} vs {exact}");
    let k = 10_000;
    let s1: f64 = (0..k)
        .map(|i| poisson_kernel(1, (-h / 2.0 + (i as f64 + 0.5) * h / k as f64).abs()))
        .sum::<f64>()
        / k as f64;
    assert!((s1 - poisson_cell_average(1, h)).abs() < 1e-8);
}

#[test]
fn poisson_point_source_limit_in_3d() {
    let spec = poisson_spec(3, 33, 5);
    let s: f64 = 0.1;
    let c = (2.0 * PI * s * s).powf(-1.5);
    let f = GridFunction::from_fn(&spec.input_grid, |x| {
        c * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s * s)).exp()
    });
    let u = poisson_solve(&f, &spec).unwrap();
    let g = &spec.output_grid;
    let k = g.flat_index(&[3, 2, 2]);
    assert_eq!(g.node(k), vec![0.5, 0.0, 0.0]);
    let expected = -1.0 / (4.0 * PI * 0.5);
    assert!(((u.values()[k] - expected) / expected).abs() < 0.02);
}

#[test]
fn poisson_1d_solves_the_ode() {
    // f = 2 on a centred bump support, away from the boundary u'' = f
    let spec = poisson_spec(1, 401, 401);
    let f = GridFunction::from_fn(&spec.input_grid, |x| {
        let t = 1.0 - x[0] * x[0];
        t * t
    });
    let u = poisson_solve(&f, &spec).unwrap();
    let h = spec.output_grid.spacing();
    let v = u.values();
    for i in [100, 200, 300] {
        let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        assert!((lap - f.values()[i]).abs() < 1e-3, "{lap} vs {}", f.values()[i]);
    }
}

// ---------- heat ----------

fn heat_spec(dim: usize, points: usize, half: f64, time: f64) -> OperatorSpec {
    let g = Grid::new(dim, points, -half, half).unwrap();
    OperatorSpec::new(OperatorKind::Heat { time }, g.clone(), g)
}

#[test]
fn heat_kernel_has_unit_mass() {
    for d in 1..=3 {
        for t in [0.01, 0.5, 3.0] {
            let r = heat_lipschitz(1.0, t, d).unwrap();
            assert!((r.quadrature - 1.0).abs() < 1e-3);
        }
    }
    // discrete row mass on a box of half-width 6√T
    let t: f64 = 0.04;
    let spec = heat_spec(1, 121, 6.0 * t.sqrt() * 2.0, t);
    let one = GridFunction::from_fn(&spec.input_grid, |_| 1.0);
    let out = heat_solve(&one, &spec).unwrap();
    assert!((out.values()[60] - 1.0).abs() < 1e-3);
}

#[test]
fn heat_maps_gaussian_to_gaussian() {
    let (s2, t) = (0.09, 0.05);
    for d in 1..=2 {
        let spec = heat_spec(d, 121, 3.0, t);
        let g = GridFunction::from_fn(&spec.input_grid, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp()
        });
        let var = s2 + 2.0 * t;
        let expected = GridFunction::from_fn(&spec.output_grid, |x| {
            (s2 / var).powf(d as f64 / 2.0) * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * var)).exp()
        });
        let out = heat_solve(&g, &spec).unwrap();
        assert!(sup_diff(&out, &expected) <= 1e-3, "d={d}: {}", sup_diff(&out, &expected));
    }
}

#[test]
fn heat_rejects_nonpositive_time() {
    let spec = heat_spec(1, 11, 1.0, 0.0);
    assert!(heat_solve(&GridFunction::zeros(&spec.input_grid), &spec).is_err());
    let spec = heat_spec(1, 11, 1.0, -1.0);
    assert!(HeatOperator::new(&spec).is_err());
}

#[test]
fn heat_norm_reports_stated_and_gaussian_values() {
    let r = heat_lipschitz(2.0, 0.1, 3).unwrap();
    let stated = r.stated_closed_form.unwrap();
    assert!((stated - 2.0f64.powf(0.75)).abs() < 1e-12);
    assert!((stated - 1.6818).abs() < 1e-4);
    for p in [1.0, 2.0, 4.0] {
        let r = heat_lipschitz(p, 0.1, 3).unwrap();
        assert!(((r.quadrature - r.gaussian_closed_form) / r.gaussian_closed_form).abs() < 1e-6);
        println!(
            "p={p}: quadrature {:.6} stated {:.6}",
            r.quadrature,
            r.stated_closed_form.unwrap()
        );
    }
    assert!(heat_lipschitz(0.5, 0.1, 3).is_err());
    assert!(heat_lipschitz(2.0, 0.1, 2).unwrap().stated_closed_form.is_none());
}

// ---------- transport ----------

fn transport_spec(in_half: f64, in_points: usize, out_points: usize, time: f64, drift: Drift) -> OperatorSpec {
    OperatorSpec::new(
        OperatorKind::Transport {
            time,
            drift,
            steps: 64,
        },
        grid1(in_points, -in_half, in_half),
        grid1(out_points, -1.0, 1.0),
    )
}

#[test]
fn constant_drift_translates() {
    let spec = transport_spec(2.0, 401, 101, 1.0, Drift::Constant { velocity: vec![0.5] });
    let u0 = GridFunction::from_fn(&spec.input_grid, |x| (2.0 * x[0]).sin());
    let out = transport_solve(&u0, &spec).unwrap();
    let exact = GridFunction::from_fn(&spec.output_grid, |x| (2.0 * (x[0] - 0.5)).sin());
    // multilinear interpolation error h²/8 · sup|u''|
    let h = spec.input_grid.spacing();
    let tol = h * h / 8.0 * 4.0 + 1e-12;
    assert!(sup_diff(&out, &exact) <= tol, "{}", sup_diff(&out, &exact));
}

#[test]
fn linear_drift_foot_points_match_the_flow() {
    let drift = Drift::Linear { rate: 1.0 };
    for x in [-0.9, -0.3, 0.0, 0.4, 1.0] {
        let foot = drift.foot_point(&[x], 0.7, 64);
        assert!((foot[0] - x * (-0.7f64).exp()).abs() < 1e-8);
    }
}

#[test]
fn transport_preserves_constants() {
    let spec = OperatorSpec::new(
        OperatorKind::Transport {
            time: 0.5,
            drift: Drift::Rotation { omega: 1.0 },
            steps: 32,
        },
        Grid::new(2, 21, -2.0, 2.0).unwrap(),
        Grid::new(2, 11, -1.0, 1.0).unwrap(),
    );
    let one = GridFunction::from_fn(&spec.input_grid, |_| 1.0);
    let out = transport_solve(&one, &spec).unwrap();
    assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn transport_reports_escaping_characteristics() {
    let spec = transport_spec(1.0, 41, 41, 1.0, Drift::Constant { velocity: vec![1.0] });
    let err = transport_solve(&GridFunction::zeros(&spec.input_grid), &spec).unwrap_err();
    assert!(err.to_string().contains("output node"), "{err}");
}

#[test]
fn transport_does_not_amplify_sup_norm() {
    let spec = transport_spec(3.0, 241, 81, 1.0, Drift::Linear { rate: -0.5 });
    let sampler = RandomFieldSampler::new(&spec.input_grid, SamplerConfig::new(1.0, 1.0, 6)).unwrap();
    let mut rng = seeds::rng(3);
    let op = TransportOperator::new(&spec).unwrap();
    for _ in 0..10 {
        let u = sampler.draw(&mut rng).unwrap();
        let v = op.apply(&u).unwrap();
        assert!(v.max_abs() <= u.max_abs() + 1e-12);
    }
}

// ---------- Burgers ----------

fn burgers_spec(points: usize, nu: f64, time: f64) -> OperatorSpec {
    let g = Grid::periodic_pi(points).unwrap();
    OperatorSpec::new(
        OperatorKind::Burgers {
            viscosity: nu,
            time,
            images: 3,
            gate_constant: 1.0,
        },
        g.clone(),
        g,
    )
}

/// Explicit conservative finite differences for `u_t + (u²/2)_x = ν u_xx` on
/// the periodic interval, `cells` unknowns.
fn burgers_fd(u0: impl Fn(f64) -> f64, cells: usize, nu: f64, time: f64) -> Vec<f64> {
    let dx = 2.0 * PI / cells as f64;
    let mut u: Vec<f64> = (0..cells).map(|i| u0(-PI + i as f64 * dx)).collect();
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dt_limit = (0.25 * dx * dx / nu).min(0.5 * dx / umax.max(1e-12));
    let steps = (time / dt_limit).ceil() as usize;
    let dt = time / steps as f64;
    let mut next = vec![0.0; cells];
    for _ in 0..steps {
        for i in 0..cells {
            let l = u[(i + cells - 1) % cells];
            let r = u[(i + 1) % cells];
            let c = u[i];
            let flux = (r * r - l * l) / (4.0 * dx);
            next[i] = c + dt * (nu * (r - 2.0 * c + l) / (dx * dx) - flux);
        }
        std::mem::swap(&mut u, &mut next);
    }
    u
}

#[test]
fn burgers_of_zero_is_zero() {
    let spec = burgers_spec(65, 0.5, 0.1);
    let out = burgers_solve(&GridFunction::zeros(&spec.input_grid), &spec).unwrap();
    assert!(out.solution.max_abs() < 1e-14);
    assert!(out.gate_passed);
}

#[test]
fn burgers_matches_finite_differences() {
    let (nu, t) = (0.5, 0.1);
    let points = 129;
    let spec = burgers_spec(points, nu, t);
    let u0 = GridFunction::from_fn(&spec.input_grid, |x| 0.5 * x[0].sin());
    let out = burgers_solve(&u0, &spec).unwrap();
    let cells = 10 * (points - 1);
    let fine = burgers_fd(|x| 0.5 * x.sin(), cells, nu, t);
    let mut err: f64 = 0.0;
    for i in 0..points {
        let j = (i * 10) % cells;
        err = err.max((out.solution.values()[i] - fine[j]).abs());
    }
    assert!(err <= 1e-2, "sup error {err}");
    let mass_in = integrate(&u0);
    let mass_out = integrate(&out.solution);
    assert!((mass_in - mass_out).abs() <= 1e-3);
    let fd_mass: f64 = fine.iter().sum::<f64>() * 2.0 * PI / cells as f64;
    assert!((fd_mass - mass_in).abs() <= 1e-3);
}

#[test]
fn burgers_gate_flags_large_data() {
    let spec = burgers_spec(129, 0.5, 0.1);
    let small = GridFunction::from_fn(&spec.input_grid, |x| 0.2 * x[0].sin());
    let big = GridFunction::from_fn(&spec.input_grid, |x| 3.0 * x[0].sin());
    let a = burgers_solve(&small, &spec).unwrap();
    let b = burgers_solve(&big, &spec).unwrap();
    assert!(a.gate_passed);
    assert!(!b.gate_passed);
    let h1_out = norm(&a.solution, NormKind::SobolevH1).unwrap();
    println!("H1 growth factor {:.4}", h1_out / a.input_h1);
    assert!(h1_out <= a.input_h1 * 1.0 + 1e-9);
}

#[test]
fn burgers_rejects_bad_parameters() {
    assert!(BurgersOperator::new(&burgers_spec(33, 0.0, 0.1)).is_err());
    let mut spec = burgers_spec(33, 0.5, 0.1);
    spec.input_grid = grid1(33, -1.0, 1.0);
    spec.output_grid = spec.input_grid.clone();
    assert!(BurgersOperator::new(&spec).is_err());
}

// ---------- elliptic ----------

fn elliptic_spec(points: usize, boundary: Boundary) -> OperatorSpec {
    let g = Grid::new(2, points, 0.0, 1.0).unwrap();
    OperatorSpec::new(
        OperatorKind::Elliptic {
            boundary,
            alpha: 0.5,
            beta: 2.0,
        },
        g.clone(),
        g,
    )
}

fn unit_media(g: &Grid) -> GridFunction {
    GridFunction::from_fn(g, |_| 1.0)
}

#[test]
fn elliptic_reproduces_linear_data() {
    let spec = elliptic_spec(
        33,
        Boundary::Linear {
            gx: 1.0,
            gy: 0.0,
            offset: 0.0,
        },
    );
    let u = elliptic_solve(&unit_media(&spec.input_grid), &spec).unwrap();
    let exact = GridFunction::from_fn(&spec.output_grid, |x| x[0]);
    assert!(sup_diff(&u, &exact) <= 1e-9);
}

#[test]
fn elliptic_reproduces_harmonic_quadratic() {
    let spec = elliptic_spec(33, Boundary::Saddle);
    let u = elliptic_solve(&unit_media(&spec.input_grid), &spec).unwrap();
    let exact = GridFunction::from_fn(&spec.output_grid, |x| x[0] * x[0] - x[1] * x[1]);
    assert!(sup_diff(&u, &exact) <= 1e-8, "{}", sup_diff(&u, &exact));
}

#[test]
fn elliptic_converges_at_second_order() {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for m in [9, 17, 33, 65] {
        let spec = elliptic_spec(m, Boundary::SinSinh);
        let u = elliptic_solve(&unit_media(&spec.input_grid), &spec).unwrap();
        let exact = GridFunction::from_fn(&spec.output_grid, |x| {
            (PI * x[0]).sin() * (PI * x[1]).sinh() / PI.sinh()
        });
        hs.push(spec.input_grid.spacing().ln());
        errs.push(sup_diff(&u, &exact).ln());
    }
    let k = hs.len() as f64;
    let mx = hs.iter().sum::<f64>() / k;
    let my = errs.iter().sum::<f64>() / k;
    let slope = hs.iter().zip(&errs).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / hs.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn elliptic_maximum_principle_with_phantom_media() {
    let fam = PhantomFamily::shepp_logan(4).unwrap();
    let g = Grid::new(2, 33, -1.0, 1.0).unwrap();
    let spec = OperatorSpec::new(
        OperatorKind::Elliptic {
            boundary: Boundary::SinSinh,
            alpha: fam.alpha,
            beta: fam.beta,
        },
        g.clone(),
        g,
    );
    let a = phantom_media(&[0.3, 0.9, 0.1, 0.5], &fam, &spec.input_grid).unwrap();
    let u = elliptic_solve(&a, &spec).unwrap();
    let g = &spec.input_grid;
    let mut bmin = f64::INFINITY;
    let mut bmax = f64::NEG_INFINITY;
    for k in 0..g.len() {
        let idx = g.multi_index(k);
        if idx.iter().any(|&i| i == 0 || i == g.points_per_axis() - 1) {
            bmin = bmin.min(u.values()[k]);
            bmax = bmax.max(u.values()[k]);
        }
    }
    assert!(u.values().iter().all(|&v| v >= bmin - 1e-9 && v <= bmax + 1e-9));
}

#[test]
fn elliptic_rejects_out_of_bounds_media() {
    let spec = elliptic_spec(9, Boundary::Saddle);
    let a = GridFunction::from_fn(&spec.input_grid, |x| if x[0] > 0.5 { 3.0 } else { 1.0 });
    assert!(elliptic_solve(&a, &spec).is_err());
}

// ---------- phantom ----------

#[test]
fn phantom_zero_parameters_give_background() {
    let g = Grid::new(2, 33, -1.0, 1.0).unwrap();
    let fam = PhantomFamily::shepp_logan(5).unwrap();
    let a = phantom_media(&[0.0; 5], &fam, &g).unwrap();
    assert!(a.values().iter().all(|&v| v == fam.background));
    let b = phantom_media(&[0.2, 0.4, 0.6, 0.8, 1.0], &fam, &g).unwrap();
    let c = phantom_media(&[0.2, 0.4, 0.6, 0.8, 1.0], &fam, &g).unwrap();
    assert_eq!(b, c);
    assert!(b.values().iter().all(|&v| v >= fam.alpha && v <= fam.beta));
}

#[test]
fn phantom_is_continuous_in_theta() {
    let g = Grid::new(2, 65, -1.0, 1.0).unwrap();
    let fam = PhantomFamily::shepp_logan(3).unwrap();
    let theta = [0.5, 0.5, 0.5];
    let base = phantom_media(&theta, &fam, &g).unwrap();
    let mut modulus: f64 = 0.0;
    for axis in 0..3 {
        let mut t = theta;
        t[axis] += 1e-4;
        let moved = phantom_media(&t, &fam, &g).unwrap();
        modulus = modulus.max(sup_diff(&moved, &base) / 1e-4);
    }
    let bound: f64 = fam.ellipses.iter().map(|e| e.intensity.abs()).sum();
    assert!(modulus <= bound + 1e-6, "measured K = {modulus}");
}

#[test]
fn phantom_rejects_parameters_outside_the_box() {
    let g = Grid::new(2, 9, -1.0, 1.0).unwrap();
    let fam = PhantomFamily::shepp_logan(2).unwrap();
    assert!(phantom_media(&[0.5, 1.5], &fam, &g).is_err());
    assert!(phantom_media(&[0.5], &fam, &g).is_err());
}

// ---------- linearity and Lipschitz estimates ----------

#[test]
fn linear_solvers_are_linear() {
    let specs = vec![
        poisson_spec(1, 33, 33),
        heat_spec(2, 17, 2.0, 0.1),
        transport_spec(2.0, 81, 41, 0.5, Drift::Linear { rate: 0.3 }),
    ];
    for spec in specs {
        let op = Operator::new(&spec).unwrap();
        let s = RandomFieldSampler::new(&spec.input_grid, SamplerConfig::new(1.0, 1.0, 5)).unwrap();
        let mut rng = seeds::rng(11);
        let (u, v) = (s.draw(&mut rng).unwrap(), s.draw(&mut rng).unwrap());
        let combo = u.scaled(1.7).add(&v.scaled(-0.4)).unwrap();
        let lhs = op.apply(&combo).unwrap();
        let rhs = op.apply(&u).unwrap().scaled(1.7).add(&op.apply(&v).unwrap().scaled(-0.4)).unwrap();
        assert!(sup_diff(&lhs, &rhs) <= 1e-9, "{}", spec.name());
    }
}

#[test]
fn lipschitz_estimate_is_homogeneous() {
    let spec = poisson_spec(1, 33, 33);
    let op = Operator::new(&spec).unwrap();
    let s = RandomFieldSampler::new(&spec.input_grid, SamplerConfig::new(1.0, 1.0, 5).tapered(true)).unwrap();
    let a = estimate_operator_lipschitz(&op, &s, 20, NormKind::Linf, NormKind::Linf, 5).unwrap();
    let scaled = ScaledOperator {
        inner: &op,
        factor: 2.0,
    };
    let b = estimate_operator_lipschitz(&scaled, &s, 20, NormKind::Linf, NormKind::Linf, 5).unwrap();
    assert!((b.estimate - 2.0 * a.estimate).abs() < 1e-6);
    let bound = a.analytic_bound.unwrap();
    assert!(a.estimate <= bound * (1.0 + 1e-9));
}

#[test]
fn heat_estimate_respects_young_bound() {
    let spec = heat_spec(3, 13, 2.0, 0.05);
    let op = Operator::new(&spec).unwrap();
    let s = RandomFieldSampler::new(&spec.input_grid, SamplerConfig::new(1.0, 1.0, 4).tapered(true)).unwrap();
    for (x, y) in [
        (NormKind::L2, NormKind::L2),
        (NormKind::Lp { p: 1.0 }, NormKind::L2),
        (NormKind::Linf, NormKind::Linf),
    ] {
        let r = estimate_operator_lipschitz(&op, &s, 10, x, y, 2).unwrap();
        let bound = r.analytic_bound.unwrap();
        assert!(r.estimate <= bound * 1.05, "{x:?}->{y:?}: {} vs {bound}", r.estimate);
    }
}

#[test]
fn identical_pairs_are_skipped() {
    let spec = poisson_spec(1, 17, 17);
    let op = Operator::new(&spec).unwrap();
    let s = RandomFieldSampler::new(&spec.input_grid, SamplerConfig::new(1.0, 0.0, 3)).unwrap();
    let r = estimate_operator_lipschitz(&op, &s, 5, NormKind::L2, NormKind::L2, 1).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.skipped, 5);
    assert_eq!(r.estimate, 0.0);
}

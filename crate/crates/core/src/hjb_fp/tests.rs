use super::*;
use crate::torus::mollified_dirac;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid1(n: usize) -> TorusGrid {
    TorusGrid::new(1, n).unwrap()
}

fn sigma(s: f64) -> Diffusion {
    Diffusion::new(s).unwrap()
}

const CATALOGUE: [Hamiltonian; 3] = [
    Hamiltonian::Abs,
    Hamiltonian::SmoothedAbs { delta: 0.1 },
    Hamiltonian::CappedQuadratic { cap: 1.0 },
];

#[test]
fn constant_costs_give_affine_in_time_value() {
    let g = grid1(32);
    let tg = TimeGrid::new(1.5, 64).unwrap();
    let running = vec![ScalarField::constant(g, 0.7); tg.nodes()];
    let terminal = ScalarField::constant(g, -2.0);
    for h in CATALOGUE {
        let u = solve_hjb_backward(&running, &terminal, &h, sigma(0.2), tg).unwrap();
        assert_eq!(u.slices[tg.steps()], terminal);
        for k in 0..tg.nodes() {
            let expected = -2.0 + 0.7 * (1.5 - tg.time(k));
            assert!(u.slices[k].values().iter().all(|v| (v - expected).abs() < 1e-12));
        }
        let b = optimal_drift(&u, &h);
        assert_eq!(b.sup_norm(), 0.0);
    }
}

#[test]
fn rejects_cfl_violation_and_slice_mismatch() {
    let g = grid1(32);
    let tg = TimeGrid::new(1.0, 16).unwrap();
    let running = vec![ScalarField::zeros(g); tg.nodes()];
    let err = solve_hjb_backward(&running, &ScalarField::zeros(g), &Hamiltonian::Abs, sigma(0.0), tg);
    assert!(matches!(err, Err(Error::Cfl { .. })));
    let tg = TimeGrid::new(1.0, 64).unwrap();
    let err = solve_hjb_backward(&running, &ScalarField::zeros(g), &Hamiltonian::Abs, sigma(0.0), tg);
    assert_eq!(err, Err(Error::SliceCount { expected: 65, got: 17 }));
}

/// `min_{|y - x| <= r} g(y)` over grid nodes: the Hopf-Lax formula for
/// `H = |p|` with zero running cost.
fn hopf_lax(g: &[f64], h: f64, r: f64) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| crate::math::circle_distance(i as f64 * h, j as f64 * h) <= r + 1e-12)
                .map(|j| g[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn eikonal_front_matches_hopf_lax() {
    let n = 64;
    let g = grid1(n);
    let h = g.spacing();
    let terminal = ScalarField::from_fn(g, |x| crate::math::circle_distance(x[0], 0.3)).unwrap();
    // dt = h: the Godunov step reduces to a min over neighbours, exact on the grid
    let tg = TimeGrid::new(0.25, 16).unwrap();
    let running = vec![ScalarField::zeros(g); tg.nodes()];
    let u = solve_hjb_backward(&running, &terminal, &Hamiltonian::Abs, sigma(0.0), tg).unwrap();
    for k in 0..tg.nodes() {
        let oracle = hopf_lax(terminal.values(), h, tg.end() - tg.time(k));
        let err = u.slices[k].values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "slice {k}: {err}");
    }
    // half the Courant number: first-order smearing near the kinks only
    let tg = TimeGrid::new(0.25, 32).unwrap();
    let running = vec![ScalarField::zeros(g); tg.nodes()];
    let u = solve_hjb_backward(&running, &terminal, &Hamiltonian::Abs, sigma(0.0), tg).unwrap();
    let oracle = hopf_lax(terminal.values(), h, 0.25);
    let err = u.slices[0].values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 2.0 * h, "{err}");
}

fn smooth_benchmark(n: usize, steps: usize) -> ValuePath {
    let g = grid1(n);
    let tg = TimeGrid::new(0.5, steps).unwrap();
    let running = vec![ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap(); tg.nodes()];
    let terminal = ScalarField::from_fn(g, |x| 0.3 * (2.0 * PI * x[0]).sin()).unwrap();
    solve_hjb_backward(&running, &terminal, &Hamiltonian::SmoothedAbs { delta: 0.5 }, sigma(0.05), tg).unwrap()
}

#[test]
fn hjb_self_convergence() {
    let reference = smooth_benchmark(512, 1024);
    let error = |n: usize, steps: usize| {
        let u = smooth_benchmark(n, steps);
        let stride = 512 / n;
        u.slices[0]
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - reference.slices[0].values()[i * stride]).abs())
            .fold(0.0, f64::max)
    };
    let coarse = error(32, 16);
    let fine = error(64, 64);
    assert!(coarse / fine >= 1.5, "coarse {coarse} fine {fine}");
}

#[test]
fn comparison_principle_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = grid1(48);
    let tg = TimeGrid::new(1.0, 96).unwrap();
    for h in CATALOGUE {
        let f1: Vec<ScalarField> = (0..tg.nodes())
            .map(|_| ScalarField::new(g, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let f2: Vec<ScalarField> = f1.iter().map(|f| f.map(|v| v + 0.3)).collect();
        let t1 = ScalarField::new(g, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let t2 = t1.map(|v| v + 0.01);
        let u1 = solve_hjb_backward(&f1, &t1, &h, sigma(0.05), tg).unwrap();
        let u2 = solve_hjb_backward(&f2, &t2, &h, sigma(0.05), tg).unwrap();
        let fmin = f1.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min);
        let fmax = f1.iter().map(ScalarField::max).fold(f64::NEG_INFINITY, f64::max);
        for k in 0..tg.nodes() {
            let rem = 1.0 - tg.time(k);
            for (a, b) in u1.slices[k].values().iter().zip(u2.slices[k].values()) {
                assert!(a <= b);
                assert!(*a >= fmin * rem + t1.min() - 1e-12);
                assert!(*a <= fmax * rem + t1.max() + 1e-12);
            }
        }
        assert!(optimal_drift(&u1, &h).sup_norm() <= h.lipschitz() + 1e-15);
    }
}

#[test]
fn drift_sign_rule() {
    let g = grid1(32);
    let tg = TimeGrid::new(1.0, 4).unwrap();
    let u = ScalarField::from_fn(g, |x| if x[0] < 0.5 { x[0] } else { 1.0 - x[0] }).unwrap();
    let path = ValuePath { time: tg, slices: vec![u; tg.nodes()] };
    let b = optimal_drift(&path, &Hamiltonian::Abs);
    for i in 2..15 {
        assert_eq!(b.slices[0].component(i, 0), -1.0);
    }
    for i in 18..31 {
        assert_eq!(b.slices[0].component(i, 0), 1.0);
    }
    // symmetric peak at x = 1/2: tie, no preferred direction
    assert_eq!(b.slices[0].component(16, 0), 0.0);
}

#[test]
fn drift_smoothed_abs_closed_form() {
    let g = grid1(16);
    let u = ScalarField::from_fn(g, |x| 0.1 * x[0]).unwrap();
    let b = drift_from_value(&u, &Hamiltonian::SmoothedAbs { delta: 0.1 });
    // away from the wrap-around jump the upwind slope is 0.1
    for i in 1..15 {
        assert!((b.component(i, 0) + 0.1 / 0.02f64.sqrt()).abs() < 1e-9, "{i}");
    }
}

#[test]
fn fp_uniform_is_stationary() {
    let g = grid1(64);
    let tg = TimeGrid::new(1.0, 50).unwrap();
    let path = solve_fp_forward(&Density::uniform(g), &DriftField::zeros(g, tg), sigma(0.3), tg).unwrap();
    for m in &path.slices {
        assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
    assert!(fp_holder_modulus(&path).unwrap() < 1e-12);
}

#[test]
fn fp_heat_mode_decay() {
    let n = 128;
    let g = grid1(n);
    let s = 0.05;
    let tg = TimeGrid::new(0.5, 400).unwrap();
    let amp = 0.4;
    let m0 = Density::new(g, (0..n).map(|i| 1.0 + amp * (2.0 * PI * i as f64 / n as f64).cos()).collect()).unwrap();
    let path = solve_fp_forward(&m0, &DriftField::zeros(g, tg), sigma(s), tg).unwrap();
    let cos = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    for k in [100, 200, 400] {
        let a = 2.0 * crate::torus::integrate(&cos, &path.slices[k]).unwrap();
        let exact = amp * (-4.0 * PI * PI * s * tg.time(k)).exp();
        assert!((a / exact - 1.0).abs() < 0.05, "k={k}: {a} vs {exact}");
    }
}

#[test]
fn fp_pure_transport_moves_mean() {
    let n = 256;
    let g = grid1(n);
    let h = g.spacing();
    let tg = TimeGrid::new(0.3, 96).unwrap();
    let m0 = mollified_dirac(g, &[0.1], 2.0 * h).unwrap();
    let b = DriftField::stationary(VectorField::constant(g, [1.0, 0.0]).unwrap(), tg);
    let path = solve_fp_forward(&m0, &b, sigma(0.0), tg).unwrap();
    let mean = path.last().circular_mean(0);
    assert!((mean - 0.4).abs() < 2.0 * h, "{mean}");
    assert!(path.max_mass_error() < 1e-10);
    assert!(path.slices.iter().all(|m| m.values().iter().all(|&v| v >= -1e-12)));
}

#[test]
fn fp_unit_courant_is_an_exact_shift() {
    let g = grid1(64);
    let h = g.spacing();
    let tg = TimeGrid::new(10.0 * h, 10).unwrap();
    let m0 = mollified_dirac(g, &[0.2], h).unwrap();
    let b = DriftField::stationary(VectorField::constant(g, [1.0, 0.0]).unwrap(), tg);
    let path = solve_fp_forward(&m0, &b, sigma(0.0), tg).unwrap();
    assert!(path.last().sup_distance(&m0.rotated(&[10])) < 1e-12);
}

#[test]
fn fp_rejects_fast_drift() {
    let g = grid1(32);
    let tg = TimeGrid::new(1.0, 16).unwrap();
    let b = DriftField::stationary(VectorField::constant(g, [1.0, 0.0]).unwrap(), tg);
    assert!(matches!(solve_fp_forward(&Density::uniform(g), &b, sigma(0.0), tg), Err(Error::Cfl { .. })));
}

#[test]
fn holder_modulus_stable_under_refinement() {
    let g = grid1(128);
    let h = g.spacing();
    let m0 = mollified_dirac(g, &[0.5], 2.0 * h).unwrap();
    let moduli: Vec<f64> = [128usize, 256, 512]
        .iter()
        .map(|&steps| {
            let tg = TimeGrid::new(1.0, steps).unwrap();
            let path = solve_fp_forward(&m0, &DriftField::zeros(g, tg), sigma(0.05), tg).unwrap();
            fp_holder_modulus(&path).unwrap()
        })
        .collect();
    let lo = moduli.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = moduli.iter().cloned().fold(0.0, f64::max);
    assert!(hi.is_finite() && hi > 0.0);
    assert!((hi - lo) / lo < 0.2, "{moduli:?}");
}

#[test]
fn holder_modulus_pure_transport_grows_like_sqrt_gap() {
    let n = 128;
    let g = grid1(n);
    let tg = TimeGrid::new(0.25, 32).unwrap();
    // point mass moved one cell per step: W1(m_s, m_t) = |t - s|
    let mut v = vec![0.0; n];
    v[0] = n as f64;
    let m0 = Density::new(g, v).unwrap();
    let b = DriftField::stationary(VectorField::constant(g, [1.0, 0.0]).unwrap(), tg);
    let path = solve_fp_forward(&m0, &b, sigma(0.0), tg).unwrap();
    let modulus = fp_holder_modulus(&path).unwrap();
    assert!((modulus - 0.25f64.sqrt()).abs() < 1e-12, "{modulus}");
}

fn random_density(rng: &mut ChaCha8Rng, g: TorusGrid) -> Density {
    Density::normalized(g, (0..g.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn discrete_adjointness() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in [1, 2] {
        let g = TorusGrid::new(dim, if dim == 1 { 64 } else { 16 }).unwrap();
        let dt = 0.4 * g.spacing();
        for _ in 0..20 {
            let phi = ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let m = random_density(&mut rng, g);
            let b = VectorField::new(g, (0..g.len() * dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let lhs = linear_hjb_step(&phi, &b, sigma(0.1), dt).unwrap().inner(m.values());
            let rhs = phi.inner(fp_step(&m, &b, sigma(0.1), dt).unwrap().values());
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn linear_step_reproduces_godunov_for_abs() {
    let g = grid1(64);
    let dt = 0.5 * g.spacing();
    let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * PI * x[0]).cos()).unwrap();
    let b = drift_from_value(&u, &Hamiltonian::Abs);
    let nonlinear = hjb_step(&u, &ScalarField::zeros(g), &Hamiltonian::Abs, sigma(0.02), dt).unwrap();
    let linear = linear_hjb_step(&u, &b, sigma(0.02), dt).unwrap();
    assert!(nonlinear.sup_distance(&linear) < 1e-12);
}

#[test]
fn two_dimensional_solve_keeps_mass_and_positivity() {
    let g = TorusGrid::new(2, 24).unwrap();
    let tg = TimeGrid::new(0.5, 40).unwrap();
    let running = vec![ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()).unwrap(); tg.nodes()];
    let u = solve_hjb_backward(&running, &ScalarField::zeros(g), &Hamiltonian::Abs, sigma(0.05), tg).unwrap();
    let b = optimal_drift(&u, &Hamiltonian::Abs);
    assert!(b.sup_norm() <= 1.0 + 1e-15);
    let m0 = mollified_dirac(g, &[0.4, 0.6], 2.0 * g.spacing()).unwrap();
    let path = solve_fp_forward(&m0, &b, sigma(0.05), tg).unwrap();
    assert!(path.max_mass_error() < 1e-10);
    assert!(path.slices.iter().all(|m| m.values().iter().all(|&v| v >= -1e-12)));
}

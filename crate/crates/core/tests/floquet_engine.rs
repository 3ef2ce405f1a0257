use floquet_core::drive_model::DriveSpec;
use floquet_core::drive_model::{generate_instance, GenerationParams};
use floquet_core::error::Error;
use floquet_core::floquet_engine::*;
use floquet_core::pauli_algebra::{LatticeSpec, Model, OperatorBasis};
use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `exp(−iτH)` via the Hermitian eigendecomposition.
fn expm_dense(h: &Array2<Complex64>, tau: f64) -> Array2<Complex64> {
    let (w, v) = h.eigh(UPLO::Lower).unwrap();
    let d = Array2::from_diag(&w.mapv(|x| Complex64::from_polar(1.0, -x * tau)));
    v.dot(&d).dot(&v.t().mapv(|x| x.conj()))
}

fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn instance(n: usize, model: Model, cutoff: usize, seed: u64) -> DriveSpec {
    generate_instance(&GenerationParams::new(LatticeSpec::chain(n, true), model, cutoff), seed)
        .unwrap()
        .spec
}

fn z_drive(cutoff: usize, coeffs: Vec<Vec<f64>>) -> DriveSpec {
    let basis = OperatorBasis::custom(vec!["Z".parse().unwrap()]).unwrap();
    DriveSpec::new(0.5, cutoff, basis, coeffs, None).unwrap()
}

#[test]
fn taylor_action_matches_dense_exponential() {
    let spec = instance(3, Model::Heisenberg, 1, 4);
    let h = spec.pauli_sum_at(0.11);
    for tau in [1e-3, 0.05, 0.7] {
        let mut block = Array2::<Complex64>::eye(8);
        expm_apply(&h, tau, &mut block);
        assert!(
            max_abs(&(&block - &expm_dense(&h.to_dense(), tau))) < 1e-12,
            "tau {tau}"
        );
    }
}

#[test]
fn static_drive_composes_to_single_exponential() {
    let spec = instance(3, Model::Ising, 0, 2);
    let u = monodromy(&spec, &TimeGrid::new(16)).unwrap();
    let exact = expm_dense(&spec.eval_h(0.0), spec.period());
    assert!(max_abs(&(&u - &exact)) < 1e-12);
}

#[test]
fn cosine_drive_returns_to_identity() {
    let h = 1.3;
    let spec = z_drive(1, vec![vec![h / 2.0], vec![0.0], vec![h / 2.0]]);
    let u = monodromy(&spec, &TimeGrid::new(4096)).unwrap();
    assert!(max_abs(&(&u - &Array2::<Complex64>::eye(2))) < 1e-4);
}

#[test]
fn snapshots_are_unitary_and_consistent() {
    let spec = instance(2, Model::Heisenberg, 2, 7);
    let grid = TimeGrid::new(12).with_substeps(3);
    let p = propagate(&spec, &grid).unwrap();
    assert_eq!(p.snapshots.len(), 12);
    assert!(max_abs(&(&p.snapshots[0] - &Array2::<Complex64>::eye(4))) == 0.0);
    for u in p.snapshots.iter().chain(std::iter::once(&p.monodromy)) {
        assert!(unitarity_defect(u) < 1e-8);
    }
    // oracle: explicit product of dense sub-step exponentials
    let tau = spec.period() / 36.0;
    let mut u = Array2::<Complex64>::eye(4);
    for j in 0..36 {
        if j % 3 == 0 {
            assert!(max_abs(&(&u - &p.snapshots[j / 3])) < 1e-12);
        }
        u = expm_dense(&spec.eval_h(j as f64 * tau), tau).dot(&u);
    }
    assert!(max_abs(&(&u - &p.monodromy)) < 1e-12);
    let direct = monodromy(&spec, &grid).unwrap();
    assert!(max_abs(&(&direct - &p.monodromy)) == 0.0);
}

#[test]
fn substeps_halve_the_convergence_defect() {
    let spec = instance(2, Model::Heisenberg, 1, 3);
    let defect = |n: usize, sub: usize| {
        let a = monodromy(&spec, &TimeGrid::new(n).with_substeps(sub)).unwrap();
        let b = monodromy(&spec, &TimeGrid::new(2 * n).with_substeps(sub)).unwrap();
        max_abs(&(&a - &b))
    };
    for n in [256, 512] {
        let ratio = defect(n, 2) / defect(n, 1);
        assert!((ratio - 0.5).abs() < 0.05, "N={n} ratio {ratio}");
    }
}

#[test]
fn invalid_grid_rejected() {
    let spec = instance(2, Model::Ising, 1, 0);
    assert!(monodromy(&spec, &TimeGrid::new(0)).is_err());
    assert!(propagate(&spec, &TimeGrid::new(4).with_substeps(0)).is_err());
}

#[test]
fn identity_has_zero_quasienergies() {
    let sol = floquet_eigen(&Array2::eye(4), 4.0 * PI).unwrap();
    assert!(sol.quasienergies.iter().all(|e| e.abs() < 1e-14));
    assert!(unitarity_defect(&sol.eigenvectors) < 1e-12);
}

#[test]
fn static_quasienergies_fold_to_energies() {
    let spec = z_drive(0, vec![vec![0.3]]);
    let u = monodromy(&spec, &TimeGrid::new(8)).unwrap();
    let sol = floquet_eigen(&u, spec.omega()).unwrap();
    assert!((sol.quasienergies[0] + 0.3).abs() < 1e-12);
    assert!((sol.quasienergies[1] - 0.3).abs() < 1e-12);
    assert!(sol.closest_to_zero() < 2);
}

#[test]
fn degenerate_monodromy_gives_orthonormal_basis() {
    // random unitary with a threefold degenerate eigenvalue
    let spec = instance(3, Model::Heisenberg, 0, 5);
    let q = expm_dense(&spec.eval_h(0.0), 0.9);
    let phases = [0.4, 0.4, 0.4, -1.0, 2.0, 2.0, -2.5, 3.0];
    let d = Array2::from_diag(&Array1::from_iter(
        phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
    ));
    let u = q.dot(&d).dot(&q.t().mapv(|v| v.conj()));
    let sol = floquet_eigen(&u, 4.0 * PI).unwrap();
    assert!(unitarity_defect(&sol.eigenvectors) < 1e-8);
    assert!(sol.eigen_residual() < 1e-8);
    let scalar = Array2::<Complex64>::eye(4).mapv(|v| v * Complex64::from_polar(1.0, 0.7));
    let sol = floquet_eigen(&scalar, 4.0 * PI).unwrap();
    assert!(unitarity_defect(&sol.eigenvectors) < 1e-12);
}

#[test]
fn non_unitary_rejected() {
    let mut u = Array2::<Complex64>::eye(2);
    u[[0, 0]] = Complex64::new(1.1, 0.0);
    assert!(matches!(floquet_eigen(&u, 1.0), Err(Error::NotUnitary { .. })));
}

#[test]
fn random_instance_spectrum_is_consistent() {
    let spec = instance(4, Model::Ising, 2, 13);
    let u = monodromy(&spec, &TimeGrid::new(64)).unwrap();
    let sol = floquet_eigen(&u, spec.omega()).unwrap();
    assert!(unitarity_defect(&u) < 1e-8);
    assert!(unitarity_defect(&sol.eigenvectors) < 1e-8);
    assert!(sol.eigen_residual() < 1e-8);
    let half = spec.omega() / 2.0;
    assert!(sol.quasienergies.iter().all(|&e| e > -half && e <= half));
    assert!(sol.quasienergies.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn static_eigenstate_trajectory_is_constant() {
    let spec = instance(3, Model::Ising, 0, 1);
    let sim = simulate(&spec, &TimeGrid::new(32), Some(3)).unwrap();
    let psi0 = sim.trajectory.state(0).to_owned();
    for n in 0..32 {
        let d = &sim.trajectory.state(n) - &psi0;
        assert!(d.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-8);
    }
    assert_eq!(sim.trajectory.alpha, Some(3));
}

#[test]
fn commuting_drive_phase_matches_closed_form() {
    let h = 0.9;
    let spec = z_drive(1, vec![vec![h / 2.0], vec![0.0], vec![h / 2.0]]);
    let n = 4096;
    let psi0 = Array1::from(vec![ONE, ZERO]);
    let traj = mode_trajectory_from(&spec, psi0.view(), 0.0, &TimeGrid::new(n)).unwrap();
    let w = spec.omega();
    let mut discrete = 0.0;
    for k in 0..n {
        let t = k as f64 * traj.dt;
        let exact = Complex64::from_polar(1.0, -(h / w) * (w * t).sin());
        let left = Complex64::from_polar(1.0, -discrete);
        assert!((traj.state(k)[0] - left).norm() < 1e-12);
        assert!((traj.state(k)[0] - exact).norm() < 1e-3);
        assert_eq!(traj.state(k)[1], ZERO);
        discrete += h * (w * t).cos() * traj.dt;
    }
    assert!(traj.closure < 1e-12);
}

#[test]
fn trajectory_states_have_unit_norm_and_close() {
    let spec = instance(4, Model::Heisenberg, 1, 6);
    let mut last = f64::INFINITY;
    for n in [128, 256, 512, 1024] {
        let sim = simulate(&spec, &TimeGrid::new(n), None).unwrap();
        assert!(sim.trajectory.norm_defect() < 1e-9);
        // the grid's own monodromy closes the orbit regardless of N
        assert!(sim.trajectory.closure < 1e-6);
        assert!(sim.trajectory.closure <= last * 1.1 || sim.trajectory.closure < 1e-12);
        last = sim.trajectory.closure;
    }
}

#[test]
fn invalid_alpha_rejected() {
    let spec = instance(2, Model::Ising, 1, 0);
    let u = monodromy(&spec, &TimeGrid::new(8)).unwrap();
    let sol = floquet_eigen(&u, spec.omega()).unwrap();
    assert!(matches!(
        floquet_mode_trajectory(&spec, &sol, 4, &TimeGrid::new(8)),
        Err(Error::InvalidAlpha { alpha: 4, dim: 4 })
    ));
}

fn synthetic(n: usize, f: impl Fn(f64) -> Vec<Complex64>) -> Trajectory {
    let period = 0.5;
    let dt = period / n as f64;
    let dim = f(0.0).len();
    let mut states = Array2::zeros((n, dim));
    for k in 0..n {
        states.row_mut(k).assign(&Array1::from(f(k as f64 * dt)));
    }
    Trajectory {
        samples: n,
        period,
        dt,
        states,
        alpha: None,
        eps_alpha: 0.0,
        closure: 0.0,
    }
}

#[test]
fn constant_trajectory_has_only_band_zero() {
    let v = vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    let traj = synthetic(8, |_| v.clone());
    let bands = band_vectors(&traj, -9, 9).unwrap();
    for k in -9..=9 {
        let b = bands.get(k).unwrap();
        let expect = if k.rem_euclid(8) == 0 { 1.0 } else { 0.0 };
        for (x, y) in b.iter().zip(&v) {
            assert!((x - y * expect).norm() < 1e-15);
        }
    }
    assert!(matches!(bands.get(10), Err(Error::MissingBand { k: 10, .. })));
}

#[test]
fn single_harmonic_lands_in_band_one() {
    let omega = 4.0 * PI;
    let v = [Complex64::new(0.0, 1.0), ZERO];
    let traj = synthetic(16, |t| {
        v.iter().map(|x| x * Complex64::from_polar(1.0, -omega * t)).collect()
    });
    let bands = band_vectors(&traj, -3, 3).unwrap();
    for k in -3..=3 {
        let norm: f64 = bands.get(k).unwrap().iter().map(|x| x.norm_sqr()).sum();
        if k == 1 {
            assert!((bands.get(1).unwrap()[0] - v[0]).norm() < 1e-14);
        } else {
            assert!(norm < 1e-28, "k={k}");
        }
    }
}

#[test]
fn empty_trajectory_rejected() {
    let mut traj = synthetic(4, |_| vec![ONE]);
    traj.samples = 0;
    traj.states = Array2::zeros((0, 1));
    assert!(matches!(band_vectors(&traj, 0, 1), Err(Error::EmptyTrajectory)));
}

#[test]
fn band_residual_shrinks_with_n() {
    let spec = instance(4, Model::Ising, 1, 21);
    let mut prev = f64::INFINITY;
    for n in [256, 1024, 4096] {
        let sim = simulate(&spec, &TimeGrid::new(n), None).unwrap();
        let bands = band_vectors(&sim.trajectory, -4, 4).unwrap();
        let r = (-2..=2)
            .map(|k| band_residual(&spec, sim.trajectory.eps_alpha, &bands, k).unwrap())
            .fold(0.0, f64::max);
        assert!(r < prev, "N={n}: {r} !< {prev}");
        prev = r;
    }
    assert!(prev < 1e-3, "residual at N=4096: {prev}");
}

#[test]
fn trajectory_csv_dump_has_header_and_rows() {
    let traj = synthetic(3, |_| vec![ONE, ZERO]);
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,t,re_0,im_0,re_1,im_1");
    assert_eq!(lines.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn folding_is_idempotent_and_in_branch(e in -1e3f64..1e3, omega in 0.1f64..50.0) {
        let f = fold_quasienergy(e, omega);
        prop_assert!(f > -omega / 2.0 && f <= omega / 2.0);
        prop_assert_eq!(fold_quasienergy(f, omega), f);
        let k = ((e - f) / omega).round();
        prop_assert!((e - f - k * omega).abs() < 1e-9 * e.abs().max(1.0));
    }

    #[test]
    fn aliasing_and_parseval(seed in 0u64..500, n in 3usize..40) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut states = Array2::<Complex64>::zeros((n, 4));
        for mut row in states.axis_iter_mut(Axis(0)) {
            for v in row.iter_mut() {
                *v = Complex64::new(rand::Rng::random_range(&mut rng, -1.0..1.0), rand::Rng::random_range(&mut rng, -1.0..1.0));
            }
            let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            row.mapv_inplace(|v| v / norm);
        }
        let traj = Trajectory { samples: n, period: 0.5, dt: 0.5 / n as f64, states, alpha: None, eps_alpha: 0.0, closure: 0.0 };
        let nn = n as i64;
        let bands = band_vectors(&traj, -nn - 2, 2 * nn).unwrap();
        for k in -2..nn {
            prop_assert_eq!(bands.get(k).unwrap(), bands.get(k + nn).unwrap());
        }
        let total: f64 = (0..nn).map(|k| bands.get(k).unwrap().iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        // direct summation oracle for one band
        let k = 3i64;
        let omega = traj.omega();
        for b in 0..4 {
            let direct: Complex64 = (0..n)
                .map(|j| traj.states[[j, b]] * Complex64::from_polar(1.0, k as f64 * omega * j as f64 * traj.dt))
                .sum::<Complex64>() / n as f64;
            prop_assert!((direct - bands.get(k).unwrap()[b]).norm() < 1e-12);
        }
    }
}

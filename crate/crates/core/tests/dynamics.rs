//! Statistical and structural properties of the trajectory engine, checked
//! against closed forms and the dense master-equation integrator.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qubot_core::ensemble::mean_and_stderr;
use qubot_core::lindblad::{expectation, Lindblad};
use qubot_core::mcwf::{Engine, JumpKind, MotionPropagator, SimParams};
use qubot_core::quantum::{ladder, BellState, MotionOperator, MotionState, C64};

fn is_depolarizing(kind: JumpKind) -> bool {
    matches!(kind, JumpKind::DepolX | JumpKind::DepolY | JumpKind::DepolZ)
}

#[test]
fn depolarizing_jump_counts_are_poisson() {
    // Motion frozen: no damping, all sector centers at the origin (g = 0),
    // correctors off.
    let p = SimParams {
        kappa: 0.0,
        r01: 0.0,
        r10: 0.0,
        r00: 0.0,
        correctors_enabled: false,
        fock_dim: 16,
        ..SimParams::paper_main()
    };
    let lambda = p.gamma * p.t_final;
    let engine = Engine::new(p).unwrap();
    let n = 1000;
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            let rec = engine.run(i).unwrap();
            rec.events
                .iter()
                .filter(|e| is_depolarizing(e.kind))
                .count() as f64
        })
        .collect();
    let (mean, se) = mean_and_stderr(counts.iter().copied());
    assert!(
        (mean - lambda).abs() <= 3.0 * (lambda / n as f64).sqrt(),
        "mean count {mean} +/- {se} vs {lambda}"
    );
    // Var(s²) ≈ (λ + 2λ²)/n for Poisson counts.
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let var_se = ((lambda + 2.0 * lambda * lambda) / n as f64).sqrt();
    assert!(
        (var - lambda).abs() <= 3.0 * var_se,
        "variance {var} vs {lambda}"
    );
}

#[test]
fn displaced_wavepacket_loses_energy_at_rate_kappa() {
    let p = SimParams {
        gamma: 0.0,
        correctors_enabled: false,
        ..SimParams::paper_main()
    };
    let kappa = p.kappa;
    let engine = Engine::new(p.clone()).unwrap();
    let frame = p.frame().unwrap();
    let start = MotionState::displaced_ground_state(p.fock_dim, 0.5, frame, 1e-9).unwrap();
    let n0 = start.mean_number();
    let records: Vec<_> = (0..200)
        .map(|i| {
            engine
                .trajectory_from(BellState::PhiPlus.state(), start.clone(), i)
                .run()
                .unwrap()
        })
        .collect();
    for k in 0..records[0].len() {
        let t = records[0].times[k];
        let (m, se) = mean_and_stderr(records.iter().map(|r| r.mean_number[k]));
        let want = n0 * (-kappa * t).exp();
        assert!(
            (m - want).abs() <= 3.0 * se + 1e-9,
            "t = {t}: <n> = {m} +/- {se}, expected {want}"
        );
    }
    assert!(records
        .iter()
        .all(|r| r.overlap.iter().all(|&f| (f - 1.0).abs() < 1e-12)));
}

#[test]
fn spin_stays_a_bell_ray_and_states_stay_normalized() {
    let engine = Engine::new(SimParams::paper_main()).unwrap();
    for index in 0..5 {
        let mut traj = engine.trajectory(index);
        for _ in 0..engine.params().n_steps() {
            traj.step().unwrap();
            let amps = traj.spin().bell_components();
            let weights: Vec<f64> = amps.iter().map(|c| c.norm_sqr()).collect();
            assert_eq!(weights.iter().filter(|w| **w > 1e-9).count(), 1);
            assert!((traj.spin().norm_squared() - 1.0).abs() < 1e-9);
            assert!((traj.motion().norm_squared() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn mmc_matches_master_equation_for_driven_thermal_oscillator() {
    let dim = 20;
    let omega = std::f64::consts::TAU * 1e3;
    let kappa: f64 = 2000.0;
    let nbar = 0.2;
    let g = 0.6 * omega;
    let (a, a_dag) = ladder(dim).unwrap();
    let (am, adm) = (a.matrix().clone(), a_dag.matrix().clone());
    let number = &adm * &am;
    let x = &am + &adm;
    let h: DMatrix<C64> = &number * C64::from(omega) - &x * C64::from(g);

    let dt = 1e-6;
    let steps = 400;
    let stride = 50;
    let times: Vec<f64> = (0..=steps).step_by(stride).map(|k| k as f64 * dt).collect();

    let lb = Lindblad::new(
        &h,
        &[
            &am * C64::from((kappa * (nbar + 1.0)).sqrt()),
            &adm * C64::from((kappa * nbar).sqrt()),
        ],
    )
    .unwrap();
    let mut rho0 = DMatrix::<C64>::zeros(dim, dim);
    rho0[(0, 0)] = C64::from(1.0);
    let exact = lb.evolve(&rho0, &times).unwrap();

    let frame = SimParams::paper_main().frame().unwrap();
    let prop =
        MotionPropagator::new(&MotionOperator::from_matrix(h.clone()), kappa, nbar, dt).unwrap();
    let n_traj = 1000;
    let mut samples = vec![Vec::with_capacity(n_traj); times.len()];
    for i in 0..n_traj as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        rng.set_stream(i);
        let mut phi = MotionState::ground(dim, frame).unwrap();
        let mut jumps = Vec::new();
        samples[0].push(phi.mean_number());
        for k in 1..=steps {
            phi = prop.advance(phi, &mut rng, &mut jumps).unwrap();
            if k % stride == 0 {
                samples[k / stride].push(phi.mean_number());
            }
        }
    }
    for (k, t) in times.iter().enumerate() {
        let (m, se) = mean_and_stderr(samples[k].iter().copied());
        let want = expectation(&exact[k], &number).re;
        assert!(
            (m - want).abs() <= 3.0 * se + 1e-9,
            "t = {t}: MMC <n> = {m} +/- {se}, master equation {want}"
        );
    }
}

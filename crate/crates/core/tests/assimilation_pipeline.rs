use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsim_core::assimilation::{
    assimilate_from_stream, estimate_decay_rate, export_observations, ingest_observations, lyapunov, lyapunov_parts,
    observe_trajectory, spin_up, twin_experiment, DecayWindow, NudgingParams, TwinOptions,
};
use robsim_core::elliptic::EllipticOptions;
use robsim_core::grid::{domain_average, velocity_inner, DomainSpec, ScalarField3D, VelocityField};
use robsim_core::interpolant::{Interpolant, InterpolantSpec};
use robsim_core::solver::{simulate, RobModel, State};
use robsim_core::transforms::PhysicsParams;
use robsim_core::Error;

fn model(n: usize, dt: f64) -> RobModel {
    let dom = DomainSpec::new(1.0, 1.0, n, n, 4).unwrap();
    let params = PhysicsParams { mu: 0.01, kappa: 0.02, alpha: 0.4, a: 0.0, g: [0.0, 0.0, 0.0] };
    RobModel::new(&dom, &params, |x| x[0] + x[1] - 1.0, dt, EllipticOptions::default()).unwrap()
}

fn state(m: &RobModel, amp: f64, theta: f64) -> State {
    let dom = m.domain();
    let v = VelocityField::from_streamfunction(dom, |x| amp * (PI * x[0]).sin() * (2.0 * PI * x[1]).sin());
    m.initial_state(&v, &ScalarField3D::constant("theta", dom, theta)).unwrap()
}

fn params(m: &RobModel, lambda: f64, delta: f64) -> NudgingParams {
    NudgingParams::new(lambda, Interpolant::new(InterpolantSpec::volume(delta), m.domain()).unwrap()).unwrap()
}

#[test]
fn every_step_stream_reproduces_the_twin() {
    let m = model(16, 0.01);
    let reference = spin_up(&m, &state(&m, 0.02, 0.0), 0.5).unwrap();
    let nudged = state(&m, -0.04, 0.3);
    let p = params(&m, 15.0, 0.25);
    let opts = TwinOptions { t_end: 1.0, sample_every: 10, keep_every: Some(1), threads: 1 };
    let twin = twin_experiment(&m, &reference, &nudged, &p, &opts).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.robobs");
    export_observations(&twin.reference, p.interpolant(), 0.0, &path).unwrap();
    let stream = ingest_observations(&path).unwrap();
    assert_eq!(stream.len(), twin.reference.states.len());
    let run = assimilate_from_stream(&m, &nudged, &stream, &p, None, 10).unwrap();
    assert!(run.final_state.v.max_abs_diff(&twin.final_nudged.v) <= 1e-12);
    assert!(run.final_state.z.max_abs_diff(&twin.final_nudged.z) <= 1e-12);
    assert!(run.misfit.last().unwrap().1 < run.misfit[0].1);
}

#[test]
fn fine_reference_stream_feeds_a_coarse_run() {
    let fine = model(32, 0.01);
    let coarse = model(16, 0.01);
    let traj = simulate(&fine, &state(&fine, 0.02, 0.0), 0.5, 1).unwrap();
    let stream =
        observe_trajectory(&traj, &Interpolant::new(InterpolantSpec::volume(0.25), fine.domain()).unwrap(), 0.0)
            .unwrap();
    let run =
        assimilate_from_stream(&coarse, &state(&coarse, -0.04, 0.3), &stream, &params(&coarse, 10.0, 0.25), None, 5)
            .unwrap();
    assert_eq!(run.final_state.step, 50);
    assert!(run.misfit.iter().all(|m| m.1.is_finite()));

    let mismatch =
        assimilate_from_stream(&coarse, &state(&coarse, 0.0, 0.0), &stream, &params(&coarse, 10.0, 0.5), None, 5);
    assert!(matches!(mismatch, Err(Error::SpecMismatch(_))));
}

#[test]
fn nudging_pulls_the_copy_toward_the_reference() {
    let m = model(16, 0.01);
    let reference = spin_up(&m, &state(&m, 0.05, 0.0), 1.0).unwrap();
    let opts = TwinOptions { t_end: 4.0, sample_every: 10, keep_every: None, threads: 2 };
    let run = twin_experiment(&m, &reference, &state(&m, -0.05, 0.3), &params(&m, 20.0, 0.25), &opts).unwrap();
    let (first, last) = (run.errors.first().unwrap(), run.errors.last().unwrap());
    assert!(last.lyapunov < 1e-3 * first.lyapunov, "{first:?} {last:?}");
    let fit =
        estimate_decay_rate(&run.errors.iter().map(|e| (e.t, e.lyapunov)).collect::<Vec<_>>(), &DecayWindow::default())
            .unwrap();
    assert!(fit.beta_hat > 0.0);
}

#[test]
fn synthetic_decay_with_ripple() {
    let beta = 1.7;
    let series: Vec<(f64, f64)> = (0..200)
        .map(|n| {
            let t = n as f64 * 0.05;
            (t, (-beta * t).exp() * (1.0 + 0.05 * (10.0 * t).sin()))
        })
        .collect();
    let fit = estimate_decay_rate(&series, &DecayWindow::default()).unwrap();
    assert!((fit.beta_hat - beta).abs() <= 0.05 * beta, "{fit:?}");
}

fn random_state(m: &RobModel, rng: &mut ChaCha8Rng) -> State {
    let dom = m.domain();
    let mut v = VelocityField::zeros(dom);
    v.u1.iter_mut().chain(v.u2.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
    v.zero_boundary(dom);
    let z = ScalarField3D::from_vec("Z", dom, (0..dom.n_cells()).map(|_| rng.gen_range(-2.0..2.0)).collect());
    State { step: 0, t: 0.0, v, z }
}

#[test]
fn constant_temperature_offset() {
    let m = model(8, 0.01);
    let a = random_state(&m, &mut ChaCha8Rng::seed_from_u64(1));
    let mut b = a.clone();
    b.z.add_constant(0.3);
    let e = lyapunov(m.domain(), &a, &b, 0.4);
    assert!((e - 0.09 * 5.0 / 7.0).abs() < 1e-14);
    assert_eq!(lyapunov(m.domain(), &a, &a, 0.4), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lyapunov_sandwich(seed in any::<u64>(), alpha in 0.0f64..0.99) {
        let m = model(8, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_state(&m, &mut rng), random_state(&m, &mut rng));
        let dom = m.domain();
        let mut dv = b.v.clone();
        dv.axpy(-1.0, &a.v);
        let vel = velocity_inner(dom, &dv, &dv);
        let mut dz = b.z.clone();
        dz.axpy(-1.0, &a.z);
        let sq = dz.data.iter().map(|x| x * x).sum::<f64>() / dz.len() as f64;
        let parts = lyapunov_parts(dom, &a, &b, alpha);
        let e = lyapunov(dom, &a, &b, alpha);
        prop_assert!(e >= 0.0);
        prop_assert!((parts.velocity - vel).abs() <= 1e-12 * vel.max(1.0));
        prop_assert!(e >= vel + sq / (1.0 + alpha) - 1e-12);
        prop_assert!(e <= vel + sq + 1e-12);
        let mean = domain_average(&dz);
        prop_assert!((parts.thermal - (sq - alpha / (1.0 + alpha) * mean * mean)).abs() <= 1e-12);
    }
}

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsim_core::elliptic::{
    harmonic_extension, solve_helmholtz_dirichlet_2d, solve_helmholtz_dirichlet_3d, solve_nonlocal_helmholtz,
    solve_poisson_h, EllipticMethod, EllipticOptions,
};
use robsim_core::grid::{
    domain_average, scalar_norms, DomainSpec, ScalarBc, ScalarField2D, ScalarField3D, VelocityField,
};

/// Dense `shift I - coef Δ` on cell centers with ghost = -u at every wall.
fn dense_dirichlet_3d(dom: &DomainSpec, shift: f64, coef: f64) -> DMatrix<f64> {
    let (nx, ny, nz) = (dom.nx(), dom.ny(), dom.nz());
    let n = dom.n_cells();
    let h2 = [dom.dx().powi(-2), dom.dy().powi(-2), dom.dz().powi(-2)];
    let mut a = DMatrix::zeros(n, n);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = dom.idx(i, j, k);
                a[(p, p)] += shift;
                let idx = [i, j, k];
                let dims = [nx, ny, nz];
                for ax in 0..3 {
                    for step in [-1i64, 1] {
                        a[(p, p)] += coef * h2[ax];
                        let c = idx[ax] as i64 + step;
                        if c < 0 || c >= dims[ax] as i64 {
                            a[(p, p)] += coef * h2[ax];
                        } else {
                            let mut q = idx;
                            q[ax] = c as usize;
                            a[(p, dom.idx(q[0], q[1], q[2]))] -= coef * h2[ax];
                        }
                    }
                }
            }
        }
    }
    a
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn both_methods() -> [EllipticOptions; 2] {
    [EllipticOptions::default(), EllipticOptions { method: EllipticMethod::Iterative, tol: 1e-11, max_iter: 5000 }]
}

#[test]
fn nonlocal_matches_dense_perturbed_matrix() {
    let dom = DomainSpec::new(1.0, 1.0, 8, 8, 8).unwrap();
    let (gamma, alpha) = (0.01, 0.4);
    let c = alpha / (1.0 + alpha);
    let n = dom.n_cells();
    let mut m = dense_dirichlet_3d(&dom, 1.0, gamma);
    m.add_scalar_mut(-c / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let oracle = m.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
    for opts in both_methods() {
        let z = solve_nonlocal_helmholtz(&dom, gamma, alpha, &ScalarField3D::from_vec("r", &dom, rhs.clone()), &opts)
            .unwrap();
        let err = rel_diff(&z.value.data, oracle.as_slice());
        assert!(err < 1e-10, "{:?}: {err:e}", opts.method);
    }
}

#[test]
fn harmonic_extension_matches_dense_solve() {
    let dom = DomainSpec::new(1.0, 1.0, 8, 8, 8).unwrap();
    let b = |x: [f64; 3]| x[0] * x[0] - x[2] * x[2];
    let mut rhs = vec![0.0; dom.n_cells()];
    let h = [dom.dx(), dom.dy(), dom.dz()];
    for k in 0..8 {
        for j in 0..8 {
            for i in 0..8 {
                let p = dom.idx(i, j, k);
                let c = [dom.xc(i), dom.yc(j), dom.zc(k)];
                for ax in 0..3 {
                    let idx = [i, j, k][ax];
                    for (edge, at) in [(0usize, 0.0), (7, [1.0, 1.0, 1.0][ax])] {
                        if idx == edge {
                            let mut x = c;
                            x[ax] = at;
                            rhs[p] += 2.0 * b(x) / (h[ax] * h[ax]);
                        }
                    }
                }
            }
        }
    }
    let oracle = dense_dirichlet_3d(&dom, 0.0, 1.0).lu().solve(&DVector::from_vec(rhs)).unwrap();
    for opts in both_methods() {
        let u = harmonic_extension(&dom, b, &opts).unwrap();
        assert!(u.residual <= opts.tol);
        assert!(rel_diff(&u.value.data, oracle.as_slice()) < 1e-10);
    }
}

#[test]
fn helmholtz_matches_dense_backward_euler() {
    let dom = DomainSpec::new(1.2, 0.8, 8, 8, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rhs: Vec<f64> = (0..dom.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let oracle = dense_dirichlet_3d(&dom, 1.0, 0.02).lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
    let z =
        solve_helmholtz_dirichlet_3d(&dom, 0.02, &ScalarField3D::from_vec("r", &dom, rhs), &EllipticOptions::default())
            .unwrap();
    assert!(rel_diff(&z.value.data, oracle.as_slice()) < 1e-12);
}

#[test]
fn poisson_manufactured_rate() {
    let (lx, ly) = (1.0, 1.5);
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let dom = DomainSpec::new(lx, ly, n, n, 4).unwrap();
        let exact = |x: [f64; 2]| (PI * x[0] / lx).cos() * (PI * x[1] / ly).cos();
        let k2 = PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly));
        let rhs = ScalarField2D::from_fn("r", &dom, |x| -k2 * exact(x));
        let p = solve_poisson_h(&dom, &rhs, &EllipticOptions::default()).unwrap().value;
        let e = ScalarField2D::from_fn("e", &dom, exact);
        let shift = e.mean() - p.mean();
        let err = p.data.iter().zip(&e.data).map(|(a, b)| (a + shift - b).abs()).fold(0.0, f64::max);
        hs.push(dom.dx());
        errs.push(err);
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn helmholtz3d_manufactured_rate() {
    let (lx, ly, gamma) = (1.0, 1.0, 0.05);
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let dom = DomainSpec::new(lx, ly, n, n, n).unwrap();
        let exact = |x: [f64; 3]| (PI * x[0] / lx).sin() * (PI * x[1] / ly).sin() * (PI * x[2]).sin();
        let k2 = PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly) + 1.0);
        let rhs = ScalarField3D::from_fn("r", &dom, |x| (1.0 + gamma * k2) * exact(x));
        let z = solve_helmholtz_dirichlet_3d(&dom, gamma, &rhs, &EllipticOptions::default()).unwrap().value;
        hs.push(dom.dx());
        errs.push(z.max_abs_diff(&ScalarField3D::from_fn("e", &dom, exact)));
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn nonlocal_manufactured_rate() {
    let (gamma, alpha) = (0.05, 0.4);
    let c = alpha / (1.0 + alpha);
    let avg = 8.0 / PI.powi(3);
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let dom = DomainSpec::new(1.0, 1.0, n, n, n).unwrap();
        let exact = |x: [f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin();
        let rhs = ScalarField3D::from_fn("r", &dom, |x| (1.0 + 3.0 * gamma * PI * PI) * exact(x) - c * avg);
        let z = solve_nonlocal_helmholtz(&dom, gamma, alpha, &rhs, &EllipticOptions::default()).unwrap().value;
        hs.push(dom.dx());
        errs.push(z.max_abs_diff(&ScalarField3D::from_fn("e", &dom, exact)));
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn helmholtz2d_manufactured_rate() {
    let (lx, ly, gamma) = (1.0, 2.0, 0.02);
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let dom = DomainSpec::new(lx, ly, n, n, 4).unwrap();
        let s = |x: [f64; 2]| (PI * x[0] / lx).sin() * (PI * x[1] / ly).sin();
        let t = |x: [f64; 2]| (2.0 * PI * x[0] / lx).sin() * (PI * x[1] / ly).sin();
        let ks = 1.0 + gamma * PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly));
        let kt = 1.0 + gamma * PI * PI * (4.0 / (lx * lx) + 1.0 / (ly * ly));
        let rhs = VelocityField::from_fns(&dom, |x| ks * s(x), |x| kt * t(x));
        let u = solve_helmholtz_dirichlet_2d(&dom, gamma, &rhs, &EllipticOptions::default()).unwrap().value;
        hs.push(dom.dx());
        errs.push(u.max_abs_diff(&VelocityField::from_fns(&dom, s, t)));
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn harmonic_extension_manufactured_rate() {
    let (a, b) = (0.5 * PI, PI);
    let c = (a * a + b * b).sqrt();
    let exact = |x: [f64; 3]| (a * x[0]).sin() * (b * x[1]).cos() * (c * x[2]).sinh() / c.sinh();
    let mut hs = vec![];
    let mut errs = vec![];
    for n in [16, 32, 64] {
        let dom = DomainSpec::new(1.0, 1.0, n, n, n).unwrap();
        let u = harmonic_extension(&dom, exact, &EllipticOptions::default()).unwrap().value;
        let mut d = ScalarField3D::from_fn("e", &dom, exact);
        d.axpy(-1.0, &u);
        hs.push(dom.dx());
        errs.push(scalar_norms(&dom, &d, ScalarBc::HomogeneousDirichlet).l2);
    }
    assert!(slope(&hs, &errs) >= 1.9, "{errs:?}");
}

#[test]
fn reported_residuals_are_recomputable() {
    let dom = DomainSpec::new(1.0, 1.0, 8, 6, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rhs: Vec<f64> = (0..dom.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (gamma, alpha) = (0.03, 0.25);
    for opts in both_methods() {
        let s = solve_nonlocal_helmholtz(&dom, gamma, alpha, &ScalarField3D::from_vec("r", &dom, rhs.clone()), &opts)
            .unwrap();
        let m = dense_dirichlet_3d(&dom, 1.0, gamma);
        let az = &m * DVector::from_column_slice(&s.value.data);
        let avg = domain_average(&s.value);
        let c = alpha / (1.0 + alpha);
        let r: Vec<f64> = az.iter().zip(&rhs).map(|(a, b)| a - c * avg - b).collect();
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((res - s.residual).abs() < 1e-13);
        assert!(res <= opts.tol);
    }
}

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsim_core::grid::{DomainSpec, VelocityField};
use robsim_core::interpolant::{boundedness_constant, measure_interpolation_error, Interpolant, InterpolantSpec};

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

fn ratios(dom: &DomainSpec, v: &VelocityField, deltas: &[f64]) -> Vec<f64> {
    deltas
        .iter()
        .map(|&d| {
            let interp = Interpolant::new(InterpolantSpec::volume(d), dom).unwrap();
            measure_interpolation_error(&interp, dom, v).rel_to_h1
        })
        .collect()
}

fn smooth_random(dom: &DomainSpec, seed: u64) -> VelocityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1..4) as f64, rng.gen_range(1..4) as f64)
        })
        .collect();
    let (lx, ly) = (dom.lx(), dom.ly());
    let field = move |x: [f64; 2], pick: usize| {
        modes
            .iter()
            .map(|m| [m.0, m.1][pick] * (m.2 * PI * x[0] / lx).sin() * (m.3 * PI * x[1] / ly).sin())
            .sum::<f64>()
    };
    let f2 = field.clone();
    VelocityField::from_fns(dom, move |x| field(x, 0), move |x| f2(x, 1))
}

#[test]
fn sine_product_error_is_first_order_in_delta() {
    let dom = DomainSpec::new(1.0, 1.0, 64, 64, 4).unwrap();
    let s = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let v = VelocityField::from_fns(&dom, s, s);
    let deltas = [0.25, 0.125, 0.0625];
    let r = ratios(&dom, &v, &deltas);
    assert!(slope(&deltas, &r) >= 0.9, "{r:?}");
}

#[test]
fn smooth_random_ratio_shrinks_with_delta() {
    let dom = DomainSpec::new(1.0, 1.0, 64, 64, 4).unwrap();
    for seed in 0..3 {
        let r = ratios(&dom, &smooth_random(&dom, seed), &[0.5, 0.25, 0.125, 0.0625]);
        assert!(r.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {r:?}");
    }
}

#[test]
fn range_of_interpolant_has_no_error() {
    let dom = DomainSpec::new(2.0, 1.0, 32, 16, 4).unwrap();
    let interp = Interpolant::new(InterpolantSpec::volume(0.25), &dom).unwrap();
    let mut coarse = interp.coarse(&smooth_random(&dom, 9));
    coarse.u1.iter_mut().enumerate().for_each(|(n, x)| *x += n as f64 * 0.01);
    let expanded = interp.expand_centered(&coarse).unwrap();
    let again = interp.coarse_centered(&expanded);
    assert!(again.max_abs_diff(&coarse) <= 1e-12);
}

#[test]
fn volume_kind_is_bounded_on_smooth_fields() {
    let dom = DomainSpec::new(1.0, 1.0, 64, 64, 4).unwrap();
    let fields: Vec<_> = (0..10).map(|s| smooth_random(&dom, 100 + s)).collect();
    for delta in [0.25, 0.125, 0.0625] {
        let interp = Interpolant::new(InterpolantSpec::volume(delta), &dom).unwrap();
        assert!(boundedness_constant(&interp, &dom, &fields) <= 1.01);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, s1 in any::<u64>(), s2 in any::<u64>()) {
        let dom = DomainSpec::new(1.0, 1.0, 16, 16, 4).unwrap();
        let interp = Interpolant::new(InterpolantSpec::volume(0.25), &dom).unwrap();
        let (u, w) = (smooth_random(&dom, s1), smooth_random(&dom, s2));
        let mut comb = u.clone();
        comb.scale(a);
        comb.axpy(b, &w);
        let mut expect = interp.apply(&u);
        expect.scale(a);
        expect.axpy(b, &interp.apply(&w));
        prop_assert!(interp.apply(&comb).max_abs_diff(&expect) <= 1e-12);
    }
}

use super::*;
use crate::ident::SimulatedPlant;
use crate::lure::{closed_loop_tf, lumped_tf, LureModel};
use crate::sim::{ControlMode, SimConfig};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

fn spec(period: f64, ts: f64, f_max: f64, seed: u64) -> MultisineSpec {
    MultisineSpec { period, ts, f_max, u_bar: 0.1, seed, periods: 2 }
}

/// Periodic steady-state response of `g` to `ms`, built line by line in the
/// frequency domain.
fn lti_record(g: &RationalTF, ms: &Multisine) -> SampledRecord {
    let n = ms.n();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (l, &theta) in ms.phases().iter().enumerate() {
        let c = Complex64::from_polar(ms.u_bar(), theta);
        x[l + 1] = c;
        y[l + 1] = c * g.eval_freq(2.0 * PI * (l + 1) as f64 / ms.period()).unwrap();
    }
    let inv = FftPlanner::new().plan_fft_inverse(n);
    inv.process(&mut x);
    inv.process(&mut y);
    let tile = |v: &[Complex64]| -> Vec<f64> { (0..2 * n).map(|i| v[i % n].im).collect() };
    record(ms.ts(), tile(&x), tile(&y))
}

fn record(ts: f64, v_r: Vec<f64>, v_m: Vec<f64>) -> SampledRecord {
    SampledRecord {
        ts,
        seed: 0,
        i_m: vec![0.0; v_r.len()],
        v_r,
        v_m,
        v: None,
        i: None,
        states: None,
        meta: Default::default(),
    }
}

fn fhn_gk() -> RationalTF {
    closed_loop_tf(LureModel::builtin("fhn").unwrap().g(), -1.0, 1.5).unwrap()
}

fn rel_coeff_err(a: &RationalTF, b: &RationalTF) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.num().iter().zip(b.num()).chain(a.den().iter().zip(b.den())) {
        worst = worst.max((x - y).abs() / y.abs().max(1e-12));
    }
    assert_eq!(a.num().len(), b.num().len());
    assert_eq!(a.den().len(), b.den().len());
    worst
}

#[test]
fn frf_of_exact_lti_response() {
    let ms = Multisine::new(&spec(10.0, 1e-2, 20.0, 4)).unwrap();
    let gk = fhn_gk();
    let frf = estimate_frf(&[lti_record(&gk, &ms)], ms.n(), ms.n_f()).unwrap();
    assert_eq!(frf.freq_hz.len(), 200);
    for (w, g) in frf.omega().iter().zip(&frf.response) {
        let exact = gk.eval_freq(*w).unwrap();
        assert!((g - exact).norm() / exact.norm() < 1e-6);
    }
    assert!(frf.freq_hz.windows(2).all(|w| w[1] > w[0]) && *frf.freq_hz.last().unwrap() <= 20.0 + 1e-12);
}

#[test]
fn one_sample_delay() {
    let ms = Multisine::new(&spec(1.0, 1e-2, 10.0, 1)).unwrap();
    let x = ms.samples();
    let delayed: Vec<f64> = (0..x.len()).map(|i| x[(i + x.len() - 1) % x.len()]).collect();
    let frf = estimate_frf(&[record(1e-2, x, delayed)], ms.n(), ms.n_f()).unwrap();
    for (w, g) in frf.omega().iter().zip(&frf.response) {
        let expected = Complex64::from_polar(1.0, -w * 1e-2);
        assert!((g - expected).norm() < 1e-12);
    }
}

#[test]
fn zero_output_and_holes() {
    let ms = Multisine::new(&spec(1.0, 1e-2, 10.0, 1)).unwrap();
    let x = ms.samples();
    let frf = estimate_frf(&[record(1e-2, x.clone(), vec![0.0; x.len()])], ms.n(), ms.n_f()).unwrap();
    assert!(frf.response.iter().all(|g| g.norm() == 0.0));
    let err = estimate_frf(&[record(1e-2, vec![0.0; x.len()], x)], ms.n(), ms.n_f()).unwrap_err();
    assert!(matches!(err, Error::ExcitationHole { bin: 1, .. }));
}

#[test]
fn fit_recovers_fhn_closed_loop() {
    let ms = Multisine::new(&spec(20.0, 1e-3, 20.0, 2)).unwrap();
    let gk = fhn_gk();
    let frf = estimate_frf(&[lti_record(&gk, &ms)], ms.n(), ms.n_f()).unwrap();
    let fit = fit_rational(&frf, 2, 1, &FitOptions::default()).unwrap();
    assert!(rel_coeff_err(&fit, &gk) < 1e-6, "{fit}");
}

#[test]
fn fit_one_pole_exact() {
    let ms = Multisine::new(&spec(10.0, 1e-2, 5.0, 3)).unwrap();
    let g = RationalTF::new(vec![2.5], vec![1.0, 1.0]).unwrap();
    let frf = estimate_frf(&[lti_record(&g, &ms)], ms.n(), ms.n_f()).unwrap();
    let fit = fit_rational(&frf, 1, 0, &FitOptions::default()).unwrap();
    assert!(rel_coeff_err(&fit, &g) < 1e-10);
}

#[test]
fn fit_chua_orders() {
    let m = LureModel::builtin("chua").unwrap();
    let gk = closed_loop_tf(m.g(), -4.0, 5.0).unwrap();
    let ms = Multisine::new(&spec(100.0, 1e-2, 20.0, 5)).unwrap();
    let frf = estimate_frf(&[lti_record(&gk, &ms)], ms.n(), ms.n_f()).unwrap();
    let fit = fit_rational(&frf, 3, 2, &FitOptions::default()).unwrap();
    assert!(rel_coeff_err(&fit, &gk) < 1e-6, "{fit}");
    let ga = recover_ga(&fit, 5.0).unwrap();
    assert!(rel_coeff_err(&ga, &lumped_tf(m.g(), -4.0).unwrap()) < 1e-6);
}

#[test]
fn fit_argument_checks() {
    let ms = Multisine::new(&spec(1.0, 1e-2, 3.0, 1)).unwrap();
    let frf = estimate_frf(&[lti_record(&fhn_gk(), &ms)], ms.n(), ms.n_f()).unwrap();
    assert!(fit_rational(&frf, 2, 2, &FitOptions::default()).is_err());
    assert!(fit_rational(&frf, 2, 1, &FitOptions::default()).is_err());
}

#[test]
fn unstable_fit_is_reflected_when_harmless() {
    // A right-half-plane pole far outside the band barely affects the fit.
    let g = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
    let omega: Vec<f64> = (1..50).map(|i| 0.1 * i as f64).collect();
    let data: Vec<Complex64> = omega.iter().map(|&w| g.eval_freq(w).unwrap()).collect();
    let w = vec![1.0; omega.len()];
    let bad = RationalTF::new(vec![-1e-4, 1.0], vec![1.0, 1.0 - 1e-4, -1e-4]).unwrap();
    assert!(bad.max_pole_real_part().unwrap() > 0.0);
    let fixed = stabilize(bad.clone(), &omega, &data, &w);
    // Residual of the unstable model is tiny; reflection may or may not be acceptable.
    match fixed {
        Ok(f) => assert!(f.is_hurwitz().unwrap()),
        Err(e) => assert!(matches!(e, Error::UnstableFit { .. })),
    }
    // Data that genuinely come from an unstable system cannot be reflected.
    let unstable = RationalTF::new(vec![1.0], vec![1.0, -1.0]).unwrap();
    let data: Vec<Complex64> = omega.iter().map(|&w| unstable.eval_freq(w).unwrap() + 1e-6).collect();
    assert!(matches!(stabilize(unstable, &omega, &data, &w), Err(Error::UnstableFit { .. })));
}

#[test]
fn recovery_examples() {
    let zero = RationalTF::new(vec![0.0], vec![1.0, 2.0]).unwrap();
    assert!(recover_ga(&zero, 1.5).unwrap().is_zero());
    let biproper = RationalTF::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
    assert!(matches!(recover_ga(&biproper, 1.0), Err(Error::IllPosedRecovery { .. })));
    assert!(recover_ga(&fhn_gk(), 0.0).is_err());
    let ga = recover_ga(&fhn_gk(), 1.5).unwrap();
    let expected = lumped_tf(LureModel::builtin("fhn").unwrap().g(), -1.0).unwrap();
    assert!(rel_coeff_err(&ga, &expected) < 1e-12);
    // (20 s + 15) / (s² + 0.75 s + 20 - (20 s + 15)).
    assert_eq!(expected.den(), &[1.0, -19.25, 5.0]);
}

#[test]
fn zero_coefficients_reduce_to_linear_law() {
    let terms = vec![NlTerm::new(0.0, crate::nonlinearity::BasisFn::Monomial(3))];
    let m = LureModel::builtin("fhn").unwrap();
    let ms = Multisine::new(&spec(2.0, 1e-2, 5.0, 1)).unwrap();
    let cfg = SimConfig::new(1e-2, 4.0);
    let a = crate::sim::simulate(&m, &Controller::feedlin(1.5, terms, Signal::multisine(ms.clone())).unwrap(), &cfg).unwrap();
    let b = crate::sim::simulate(&m, &Controller::linear(1.5, Signal::multisine(ms)), &cfg).unwrap();
    assert_eq!(a.v_m, b.v_m);
}

#[test]
fn exact_cancellation_matches_closed_loop() {
    let m = LureModel::builtin("fhn").unwrap();
    let sim = SimConfig::new(1e-3, 1.0).with_mode(ControlMode::Analog);
    let source = SimulatedPlant::new(&m, sim).unwrap();
    let cfg = DynamicStageConfig { k: 1.5, multisine: spec(10.0, 1e-3, 10.0, 8), realizations: 1 };
    let recs = run_dynamic_stage(&source, m.h().terms(), &cfg).unwrap();
    assert_eq!(recs[0].len(), 20_000);
    let frf = estimate_frf(&recs, 10_000, 100).unwrap();
    let gk = fhn_gk();
    for (w, g) in frf.omega().iter().zip(&frf.response).filter(|(w, _)| **w <= 2.0 * PI * 5.0) {
        let exact = gk.eval_freq(*w).unwrap();
        assert!((g - exact).norm() / exact.norm() < 1e-3, "w = {w}");
    }
    let fit = fit_rational(&frf, 2, 1, &FitOptions::default()).unwrap();
    let ga = recover_ga(&fit, 1.5).unwrap();
    assert!(rel_coeff_err(&ga, &lumped_tf(m.g(), -1.0).unwrap()) < 1e-3);
}

#[test]
fn averaged_variance_scales_inversely_with_realizations() {
    let gk = fhn_gk();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut mean_var = Vec::new();
    for r in [1usize, 5, 25] {
        // Empirical variance of the averaged estimate over Monte-Carlo repeats.
        let repeats = 40;
        let mut estimates = Vec::new();
        for rep in 0..repeats {
            let recs: Vec<SampledRecord> = (0..r)
                .map(|i| {
                    let ms = Multisine::new(&spec(2.0, 1e-2, 10.0, (rep * 1000 + i) as u64)).unwrap();
                    let mut rec = lti_record(&gk, &ms);
                    for v in rec.v_m.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += 0.05 * z;
                    }
                    rec
                })
                .collect();
            estimates.push(estimate_frf(&recs, 200, 20).unwrap().response);
        }
        let var: f64 = (0..20)
            .map(|b| {
                let m = estimates.iter().map(|e| e[b]).sum::<Complex64>() / repeats as f64;
                estimates.iter().map(|e| (e[b] - m).norm_sqr()).sum::<f64>() / (repeats - 1) as f64
            })
            .sum::<f64>()
            / 20.0;
        mean_var.push(var);
        let _ = rng.random::<u8>();
    }
    for (pair, ratio) in [(0usize, 5.0), (1, 5.0)] {
        let observed = mean_var[pair] / mean_var[pair + 1];
        assert!(observed > ratio / 2.0 && observed < ratio * 2.0, "observed ratio {observed}");
    }
}

use super::*;
use crate::excitation::{pulse, Multisine, MultisineSpec};
use nalgebra::DMatrix;

fn fhn() -> LureModel {
    LureModel::builtin("fhn").unwrap()
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

#[test]
fn zero_reference_stays_at_rest() {
    let rec = simulate(&fhn(), &Controller::linear(1.5, Signal::zero()), &SimConfig::new(1e-2, 10.0)).unwrap();
    assert!(rec.v_m.iter().all(|&v| v == 0.0));
}

#[test]
fn constant_reference_reaches_equilibrium() {
    let m = fhn();
    let cfg = SimConfig::new(1e-2, 100.0);
    let rec = simulate(&m, &Controller::linear(1.5, Signal::Constant(2.0)), &cfg).unwrap();
    let expected = m.solve_equilibrium(1.5, 2.0, 1e-12).unwrap();
    assert!((rec.v_m.last().unwrap() - expected).abs() < 1e-4);
}

#[test]
fn open_loop_fhn_oscillates() {
    let m = fhn();
    let mut cfg = SimConfig::new(1e-2, 100.0);
    // The origin is an unstable equilibrium; any small offset starts the cycle.
    cfg.x0 = Some(vec![1e-3, 0.0]);
    let rec = simulate_autonomous(&m, Signal::zero(), &cfg).unwrap();
    let tail = &rec.v_m[rec.len() - 2000..];
    assert!(peak_to_peak(tail) > 1.0);
}

#[test]
fn biased_fhn_settles_and_spikes_on_pulse() {
    let m = fhn();
    let cfg = SimConfig::new(1e-2, 60.0);
    let rest = simulate_autonomous(&m, Signal::Constant(-1.5), &cfg).unwrap();
    let tail = &rest.v_m[rest.len() - 1000..];
    assert!(peak_to_peak(tail) < 1e-4);

    let input = Signal::Sum(vec![Signal::Constant(-1.5), pulse(30.0, 30.5, 2.0).unwrap()]);
    let kicked = simulate_autonomous(&m, input, &cfg).unwrap();
    let baseline = rest.v_m[2999];
    let excursion = kicked.v_m[3000..].iter().map(|v| (v - baseline).abs()).fold(0.0, f64::max);
    assert!(excursion > 1.0, "excursion {excursion}");
}

#[test]
fn chua_is_bounded_and_aperiodic() {
    let m = LureModel::builtin("chua").unwrap();
    let mut cfg = SimConfig::new(1e-2, 400.0);
    cfg.x0 = Some(vec![0.0, 0.0, 0.05]);
    let rec = simulate_autonomous(&m, Signal::zero(), &cfg).unwrap();
    let v = &rec.v_m[10_000..];
    assert!(v.iter().all(|x| x.abs() < 20.0));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let max_corr = (50..=2000)
        .step_by(5)
        .map(|lag| {
            let c: f64 = (0..v.len() - lag).map(|i| (v[i] - mean) * (v[i + lag] - mean)).sum();
            c / var
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_corr < 0.9, "autocorrelation peak {max_corr}");
}

#[test]
fn noiseless_channels_are_exact() {
    let ms = Multisine::new(&MultisineSpec { period: 2.0, ts: 1e-2, f_max: 5.0, u_bar: 0.2, seed: 1, periods: 1 }).unwrap();
    let cfg = SimConfig::new(1e-2, 2.0).with_truth();
    let rec = simulate(&fhn(), &Controller::linear(1.5, Signal::multisine(ms)), &cfg).unwrap();
    assert_eq!(rec.v.as_ref().unwrap(), &rec.v_m);
    assert_eq!(rec.i.as_ref().unwrap(), &rec.i_m);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let cfg = SimConfig::new(1e-2, 5.0).with_sigma(0.05, 9);
    let ctrl = Controller::linear(1.5, Signal::Constant(1.0));
    let a = simulate(&fhn(), &ctrl, &cfg).unwrap();
    let b = simulate(&fhn(), &ctrl, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let c = simulate(&fhn(), &ctrl, &SimConfig::new(1e-2, 5.0).with_sigma(0.05, 10)).unwrap();
    assert_ne!(a.v_m, c.v_m);
}

#[test]
fn step_halving_changes_little() {
    let ms = Multisine::new(&MultisineSpec { period: 10.0, ts: 1e-3, f_max: 5.0, u_bar: 0.1, seed: 3, periods: 1 }).unwrap();
    let ctrl = Controller::linear(1.5, Signal::Sum(vec![Signal::Constant(1.0), Signal::multisine(ms)]));
    let coarse = SimConfig::new(1e-3, 10.0);
    let mut fine = coarse.clone();
    fine.dt_internal = 5e-4;
    let a = simulate(&fhn(), &ctrl, &coarse).unwrap();
    let b = simulate(&fhn(), &ctrl, &fine).unwrap();
    let rms = (a.v_m.iter().zip(&b.v_m).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    assert!(rms < 1e-5, "rms {rms}");
}

/// Exact discretization of a linear plant under ZOH: `[Φ Γ] = exp([[A, B], [0, 0]] T)`.
#[test]
fn sampled_mode_matches_zoh_discretization() {
    let g = RationalTF::new(vec![20.0, 15.0], vec![1.0, 0.75, 20.0]).unwrap();
    let plant = LurePlant::from_tf(&g, StaticNL::zero()).unwrap();
    let ts = 1e-2;
    let k = 1.5;
    let refs: Vec<f64> = (0..500).map(|n| (0.37 * n as f64).sin() + 0.3).collect();
    let mut cfg = SimConfig::new(ts, 5.0);
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    let rec = simulate_plant(&plant, &Controller::linear(k, Signal::held(refs.clone())), &cfg).unwrap();

    let ss = plant.state_space();
    let mut m = DMatrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(&(&ss.a * ts));
    m.view_mut((0, 2), (2, 1)).copy_from(&(&ss.b * ts));
    let e = m.exp();
    let phi = e.view((0, 0), (2, 2)).into_owned();
    let gamma = e.view((0, 2), (2, 1)).into_owned();
    let mut x = nalgebra::DVector::zeros(2);
    for n in 0..500 {
        let v = (&ss.c * &x)[0];
        assert!((v - rec.v_m[n]).abs() < 1e-8, "n = {n}");
        let i = k * (refs[n] - v);
        x = &phi * &x + &gamma * i;
    }
}

#[test]
fn divergence_is_reported() {
    let g = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
    let plant = LurePlant::from_tf(&g, StaticNL::linear(-5.0)).unwrap();
    let mut cfg = SimConfig::new(1e-2, 100.0);
    cfg.x0 = Some(vec![1.0]);
    let err = simulate_plant(&plant, &Controller::OpenLoop { input: Signal::zero() }, &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }));
}

#[test]
fn config_validation() {
    let mut cfg = SimConfig::new(1e-2, 1.0);
    cfg.dt_internal = 3e-3;
    let ctrl = Controller::linear(1.5, Signal::zero());
    assert!(simulate(&fhn(), &ctrl, &cfg).is_err());
    assert!(simulate(&fhn(), &ctrl, &SimConfig::new(1e-2, 1.005)).is_err());
}

#[test]
fn csv_layout() {
    let cfg = SimConfig::new(0.5, 1.0).with_truth();
    let rec = simulate(&fhn(), &Controller::linear(1.5, Signal::Constant(1.0)), &cfg).unwrap();
    let csv = rec.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,v_r,v_m,i_m,v,i");
    let line = lines.next().unwrap();
    let row: Vec<f64> = line.split(',').map(|s| s.parse().expect(line)).collect();
    assert_eq!(row.len(), 6);
    assert_eq!(row[1], 1.0);
    assert_eq!(row[5], 1.5);
}

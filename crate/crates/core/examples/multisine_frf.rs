//! Random-phase multisine design and the period-averaged FRF of a known
//! linear loop, compared bin by bin with its transfer function.
//!
//! `cargo run --release --example multisine_frf`

use lure_ident::excitation::{MultisineSpec, Signal};
use lure_ident::ident::{estimate_frf, fit_rational, DynamicStageConfig, FitOptions};
use lure_ident::lti::RationalTF;
use lure_ident::nonlinearity::StaticNL;
use lure_ident::sim::{simulate_plant, Controller, ControlMode, LurePlant, SimConfig};

fn main() -> lure_ident::Result<()> {
    let spec = MultisineSpec {
        period: 20.0,
        ts: 1e-3,
        f_max: 5.0,
        u_bar: 1.0,
        seed: 11,
        periods: 2,
    }
    .with_rms(0.5)?;
    println!("N = {}, N_f = {}, u_bar = {:.4}", spec.n()?, spec.n_f()?, spec.u_bar);

    let g = RationalTF::new(vec![2.0, 1.0], vec![1.0, 3.0, 2.0])?;
    let plant = LurePlant::from_tf(&g, StaticNL::zero())?;
    let stage = DynamicStageConfig { k: 1.0, multisine: spec.clone(), realizations: 3 };
    let records = (0..stage.realizations)
        .map(|r| {
            let ctrl = Controller::OpenLoop { input: Signal::multisine(stage.multisine(r)?) };
            let sim = SimConfig::new(1e-3, 40.0).with_mode(ControlMode::Analog);
            simulate_plant(&plant, &ctrl, &sim)
        })
        .collect::<lure_ident::Result<Vec<_>>>()?;
    let frf = estimate_frf(&records, spec.n()?, spec.n_f()?)?;
    let worst = frf
        .omega()
        .iter()
        .zip(&frf.response)
        .map(|(&w, h)| {
            let t = g.eval_freq(w).unwrap();
            (h - t).norm() / t.norm()
        })
        .fold(0.0, f64::max);
    println!("{} bins, worst relative FRF error {worst:.2e}", frf.freq_hz.len());
    println!("fitted {}", fit_rational(&frf, 2, 1, &FitOptions::default())?);
    println!("true   {g}");
    Ok(())
}

//! Both stages end to end: fit the static characteristic, cancel it with the
//! feedback-linearizing law, estimate the closed-loop FRF and recover `G_a`.
//!
//! `cargo run --release --example dynamic_identification -- [fhn|chua] [sigma]`

use lure_ident::config::ExperimentConfig;
use lure_ident::experiment::{run_dynamic, run_static};

fn main() -> lure_ident::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = args.next().unwrap_or_else(|| "fhn".into());
    let mut cfg = ExperimentConfig::preset(&format!("desk-{model}"))?;
    if let Some(s) = args.next() {
        cfg.sigma = s.parse().expect("sigma is a number");
    }

    let fit = run_static(&cfg)?.fit;
    println!("static fit   {:?}", fit.w_hat);
    let out = run_dynamic(&cfg, &fit)?;
    let m = &out.model;
    println!("G_k hat      {}", m.g_k);
    println!("G_a hat      {}", m.g_a);
    println!("G_a true     {}", out.true_g_a);
    println!("coefficient error {:.3e}", out.g_a_coeff_error.unwrap_or(f64::NAN));
    println!("poles        {:?}", m.poles);
    println!("1/G_a(0) = {:.5}, w_1 = {:.5}", m.dc_check[0], m.dc_check[1]);
    let worst = m.rel_error.iter().copied().fold(0.0, f64::max);
    println!("{} bins, worst relative misfit {worst:.3e}", out.frf.freq_hz.len());
    Ok(())
}

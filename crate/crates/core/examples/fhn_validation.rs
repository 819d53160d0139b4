//! Identify the FHN circuit from noisy closed-loop data, then replay a biased
//! input through the truth and the model and compare spikes.
//!
//! `cargo run --release --example fhn_validation -- [seed] [out_dir]`

use std::path::PathBuf;

use lure_ident::config::ExperimentConfig;
use lure_ident::experiment::{replay, run_dynamic, run_static, truth_as_model};

fn main() -> lure_ident::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::preset("desk-fhn")?;
    cfg.seed = args.next().map_or(1, |s| s.parse().expect("seed is an integer"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/fhn_validation".into()));

    let fit = run_static(&cfg)?.fit;
    let model = run_dynamic(&cfg, &fit)?.model;
    let truth = truth_as_model(&cfg.model.build()?)?;
    let r = replay(&cfg, &truth, &model)?;

    let rep = &r.report;
    println!("window {:?} s, NRMSE {:.3}", rep.window, rep.nrmse);
    println!(
        "spikes: {} in truth, {} matched, {} missed, {} extra",
        rep.spikes.reference.len(),
        rep.spikes.matched,
        rep.spikes.missed,
        rep.spikes.extra
    );
    if let Some(after) = rep.nrmse_after_last_miss {
        println!("missed at {:?} s; NRMSE after the last miss {after:.3}", rep.spikes.missed_at);
    }
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("validation.csv"), r.to_csv())?;
    println!("trajectories written to {}", out.join("validation.csv").display());
    Ok(())
}

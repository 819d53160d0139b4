//! Identify Chua's circuit, then run the truth and the model autonomously in
//! modal coordinates from the same state and check both for a double scroll.
//!
//! `cargo run --release --example chua_attractor -- [out_dir]`

use std::path::PathBuf;

use lure_ident::config::ExperimentConfig;
use lure_ident::experiment::{attractor, run_dynamic, run_static, truth_as_model};
use lure_ident::validation::outer_equilibria;

fn main() -> lure_ident::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/chua".into()));
    let cfg = ExperimentConfig::preset("desk-chua")?;
    let fit = run_static(&cfg)?.fit;
    let model = run_dynamic(&cfg, &fit)?.model;
    let truth = truth_as_model(&cfg.model.build()?)?;

    for (label, m) in [("truth", &truth), ("model", &model)] {
        println!("{label}: G_a = {}", m.g_a);
        println!("{label}: outer equilibria {:?}", outer_equilibria(&m.g_a, &m.h, 100.0)?);
    }
    let a = attractor(&cfg, &truth, &model)?;
    for (label, r) in [("truth", &a.report.truth), ("model", &a.report.model)] {
        println!(
            "{label}: double scroll {} (lobes {:.0}% / {:.0}%, {} transitions, max |x| {:.1})",
            r.passed,
            100.0 * r.frac_pos,
            100.0 * r.frac_neg,
            r.transitions,
            r.max_norm
        );
    }
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("attractor.csv"), a.to_csv())?;
    println!("states written to {}", out.join("attractor.csv").display());
    Ok(())
}

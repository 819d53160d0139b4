//! Open-loop FHN behaviour: a limit cycle at zero input and excitable
//! spiking at a negative bias. Writes both records as CSV.
//!
//! `cargo run --example simulate -- [out_dir]`

use std::path::PathBuf;

use lure_ident::excitation::{pulse, Signal};
use lure_ident::lure::LureModel;
use lure_ident::sim::{simulate, simulate_autonomous, Controller, SimConfig};
use lure_ident::validation::detect_spikes;

fn main() -> lure_ident::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/simulate".into()));
    let fhn = LureModel::builtin("fhn")?;

    let mut cfg = SimConfig::new(1e-3, 40.0).with_truth();
    cfg.x0 = Some(vec![1e-3, 0.0]);
    let free = simulate_autonomous(&fhn, Signal::zero(), &cfg)?;
    let tail = &free.output()[20_000..];
    let (lo, hi) = tail.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    println!("zero input: limit cycle between {lo:.3} and {hi:.3}");
    free.write(&out, "fhn_limit_cycle")?;

    let input = Signal::Sum(vec![Signal::Constant(-1.5), pulse(30.0, 30.5, 2.0)?]);
    let biased = simulate_autonomous(&fhn, input, &SimConfig::new(1e-3, 40.0).with_truth())?;
    let spikes = detect_spikes(biased.output(), 0.0, 500);
    println!("bias -1.5 with a pulse at 30 s: {} spike(s) at {:?} s",
        spikes.len(),
        spikes.iter().map(|&n| n as f64 * 1e-3).collect::<Vec<_>>());
    biased.write(&out, "fhn_excitable")?;

    let held = simulate(&fhn, &Controller::linear(1.5, Signal::Constant(1.0)), &SimConfig::new(1e-3, 20.0))?;
    println!("closed loop k = 1.5, v_r = 1: v settles at {:.6}", held.v_m.last().unwrap());
    println!("records written to {}", out.display());
    Ok(())
}

//! Built-in models, their lumped forms and the frequency-domain checks.
//!
//! `cargo run --example model_info`

use lure_ident::experiment::model_info;
use lure_ident::lti::{check_circle_condition, default_grid, log_grid, SectorBounds};
use lure_ident::lure::LureModel;

fn main() -> lure_ident::Result<()> {
    for (name, k) in [("fhn", 1.5), ("chua", 5.0)] {
        let model = LureModel::builtin(name)?;
        println!("{}", model_info(name, &model, Some(k))?);
    }

    // The FHN slope interval straddles zero, so the circle test applies; it fails.
    let fhn = LureModel::builtin("fhn")?;
    let circle = check_circle_condition(fhn.g(), SectorBounds::new(-1.0, 8.0)?, &default_grid())?;
    println!("fhn circle test: ok = {}, worst margin {:.3}", circle.ok, circle.worst_margin);

    println!("\n  w [rad/s]     Re G(jw)     Im G(jw)");
    for w in log_grid(0.1, 100.0, 7) {
        let g = fhn.g().eval_freq(w)?;
        println!("{w:10.3} {:12.5} {:12.5}", g.re, g.im);
    }
    Ok(())
}

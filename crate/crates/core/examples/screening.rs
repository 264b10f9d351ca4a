//! Screen a high-dimensional sample down to the variables with the largest
//! off-diagonal correlation, then detect hubs on the reduced matrix.
//!
//! ```bash
//! cargo run --example screening
//! ```

use hubscan::estimators::{sample_correlation, screen_variables};
use hubscan::ipchd::{detect, IpchdConfig, Kappa};
use hubscan::simgen::{generate_precision, sample_gaussian, SimConfig};

fn main() -> hubscan::Result<()> {
    // p = 300 variables, signal confined to the first 60, only n = 150 observations
    let model = generate_precision(&SimConfig::strong(300, 60, 4, 5.0, 8))?;
    let x = sample_gaussian(&model, 150, 8, false)?;
    let r = sample_correlation(&x)?;

    let sel = screen_variables(&r, 100)?;
    let kept = model
        .hub_set
        .iter()
        .filter(|h| sel.selected.contains(h))
        .count();
    println!(
        "screened to {} variables, {kept}/{} hubs retained",
        sel.selected.len(),
        model.hub_set.len()
    );

    let cfg = IpchdConfig {
        kappa: Kappa::Auto2Sd,
        ..IpchdConfig::default()
    };
    let mut res = detect(&sel.submatrix, &cfg)?;
    res.original_indices = Some(sel.selected);
    println!("planted hubs : {:?}", model.hub_set);
    println!("detected hubs: {:?}", res.hubs_original());
    Ok(())
}

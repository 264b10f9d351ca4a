//! Baseline: invert the sample correlation and flag variables whose weighted
//! degree is more than two standard deviations above the mean.
//!
//! ```bash
//! cargo run --example raw_inverse
//! ```

use hubscan::ipchd::raw_inverse_baseline;
use hubscan::simgen::{generate_precision, sample_gaussian, SimConfig};

fn main() -> hubscan::Result<()> {
    let model = generate_precision(&SimConfig::strong(100, 100, 5, 5.0, 4))?;

    for n in [400, 150] {
        let x = sample_gaussian(&model, n, 4, false)?;
        let res = raw_inverse_baseline(&x, None)?;
        println!("n = {n}: hubs {:?} (planted {:?})", res.hubs, model.hub_set);
    }

    // p >= n requires screening first
    let x = sample_gaussian(&model, 80, 4, false)?;
    match raw_inverse_baseline(&x, None) {
        Err(e) => println!("n = 80 without screening: {e}"),
        Ok(_) => unreachable!(),
    }
    let res = raw_inverse_baseline(&x, Some(40))?;
    println!("n = 80, screened to 40: hubs {:?}", res.hubs);
    Ok(())
}

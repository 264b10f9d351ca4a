//! Detect hubs from a sample: generate a strong-hub model, draw data,
//! threshold the sample correlation and run the spectral detector.
//!
//! ```bash
//! cargo run --example detect_hubs
//! ```

use hubscan::estimators::ThresholdRule;
use hubscan::ipchd::{IpchdConfig, Kappa};
use hubscan::metrics::{fpr, tpr};
use hubscan::pipeline::{detect_data, EstimatorKind, Scale};
use hubscan::simgen::{generate_precision, sample_gaussian, SimConfig};

fn main() -> hubscan::Result<()> {
    let model = generate_precision(&SimConfig::strong(200, 200, 5, 5.0, 1))?;
    let x = sample_gaussian(&model, 400, 1, false)?;

    let kind = EstimatorKind::Thresholded {
        xi: 1.0,
        rule: ThresholdRule::Absolute,
    };
    let cfg = IpchdConfig {
        kappa: Kappa::Auto2Sd,
        ..IpchdConfig::default()
    };
    let res = detect_data(&x, &kind, Scale::Correlation, &cfg)?;

    println!("planted hubs : {:?}", model.hub_set);
    println!("detected hubs: {:?}", res.hubs_original());
    println!(
        "s_hat = {} ({:?}), rho = {:.4}",
        res.s_hat, res.s_mode_used, res.rho_used
    );
    println!(
        "TPR = {:.2}, FPR = {:.3}",
        tpr(&model.hub_set, &res.hubs)?,
        fpr(&model.hub_set, &res.hubs, model.p())?
    );
    Ok(())
}

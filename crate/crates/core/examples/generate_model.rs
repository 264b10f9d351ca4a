//! Build a hub graph, inspect its separation on the inverse correlation,
//! and round-trip it through the JSON model document.
//!
//! ```bash
//! cargo run --example generate_model
//! ```

use hubscan::ipchd::weighted_degree;
use hubscan::matrix::symmetric_eigen;
use hubscan::simgen::{generate_precision, GroundTruthModel, ModelDocument, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SimConfig::weak(60, 30, 3, 2.0, 9);
    let model = generate_precision(&cfg)?;

    let eig = symmetric_eigen(&model.theta)?;
    println!("hubs {:?}", model.hub_set);
    println!(
        "min eigenvalue of theta = {:.6} (delta = {})",
        eig.eigenvalues().last().unwrap(),
        cfg.delta
    );
    println!(
        "tau = {:.3}, c = {:.3}",
        model.empirical_tau, model.empirical_c
    );

    let alpha = weighted_degree(&model.inv_corr);
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]));
    println!("top weighted degrees: {:?}", &order[..5]);

    let json = serde_json::to_string(&model.to_document())?;
    let back = GroundTruthModel::from_document(&serde_json::from_str::<ModelDocument>(&json)?)?;
    println!(
        "document: {} bytes, round trip equal = {}",
        json.len(),
        back.theta == model.theta
    );
    Ok(())
}

//! Scree data: descending eigenvalues of the correlation estimate and the
//! ratio sequence the spike-count rule looks at.
//!
//! ```bash
//! cargo run --example scree
//! ```

use hubscan::estimators::sample_correlation;
use hubscan::ipchd::{auto_rho, eigenvalue_ratios, estimate_s_data_driven, DEFAULT_RATIO_FACTOR};
use hubscan::matrix::symmetric_eigen;
use hubscan::simgen::{generate_precision, sample_gaussian, SimConfig};

fn main() -> hubscan::Result<()> {
    let model = generate_precision(&SimConfig::strong(40, 40, 1, 5.0, 5))?;
    let x = sample_gaussian(&model, 2000, 5, false)?;
    let eig = symmetric_eigen(&sample_correlation(&x)?)?;
    let gamma = eig.eigenvalues();
    let rho = auto_rho(gamma);
    let ratios = eigenvalue_ratios(gamma, rho)?;

    println!("i,gamma_desc,delta_rho");
    for (i, g) in gamma.iter().enumerate() {
        let d = ratios.get(i).map(|r| format!("{r:.4}")).unwrap_or_default();
        println!("{},{g:.4},{d}", i + 1);
    }
    let (s, fallback) = estimate_s_data_driven(&ratios, gamma.len(), DEFAULT_RATIO_FACTOR);
    eprintln!("s_hat = {s}, fallback = {fallback}");
    Ok(())
}

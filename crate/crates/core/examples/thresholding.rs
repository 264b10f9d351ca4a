//! How the thresholding mask thins the sample correlation as `xi` grows,
//! and what that does to the smallest eigenvalue.
//!
//! ```bash
//! cargo run --example thresholding
//! ```

use hubscan::estimators::{
    apply_mask, mask_complexity, sample_correlation, threshold_level, threshold_mask,
};
use hubscan::matrix::symmetric_eigen;
use hubscan::simgen::{generate_precision, sample_gaussian, SimConfig};

fn main() -> hubscan::Result<()> {
    let model = generate_precision(&SimConfig::strong(100, 100, 5, 5.0, 2))?;
    let x = sample_gaussian(&model, 100, 2, false)?;
    let r = sample_correlation(&x)?;

    println!(
        "{:>5} {:>8} {:>10} {:>12} {:>10}",
        "xi", "level", "kept pairs", "max col ones", "min eig"
    );
    for xi in [0.0, 0.5, 0.75, 1.0, 1.5, 2.0] {
        let mask = threshold_mask(&r, xi, x.n())?;
        let masked = apply_mask(&mask, &r)?;
        let eig = symmetric_eigen(&masked)?;
        println!(
            "{xi:>5.2} {:>8.4} {:>10} {:>12} {:>10.4}",
            threshold_level(xi, x.p(), x.n()),
            mask.off_diagonal_pairs(),
            mask_complexity(&mask),
            eig.eigenvalues().last().unwrap()
        );
    }
    Ok(())
}

//! A small replicated comparison of the four methods, summarised per cell.
//!
//! ```bash
//! cargo run --release --example simulate_grid
//! ```

use hubscan::metrics::{
    run_grid, summarize, write_summary_csv, GridSpec, HubStrength, Method, SizeSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec {
        p_values: vec![60],
        t_values: vec![SizeSpec::FractionOfP(1.0)],
        n_values: vec![SizeSpec::FractionOfP(0.5), SizeSpec::FractionOfP(2.0)],
        strengths: vec![HubStrength::Weak, HubStrength::Strong],
        replicates: 10,
        methods: Method::ALL.to_vec(),
        base_seed: 2024,
        ..GridSpec::default()
    };
    let records = run_grid(&spec)?;
    println!("{} records", records.len());
    write_summary_csv(&summarize(&records), std::io::stdout())?;
    Ok(())
}

//! Builds the Shepp-Logan phantom as a ten-neuron GQNN and writes a 256 x 256
//! rasterization as a 16-bit PGM to the system temp directory.
//!
//! ```text
//! cargo run --release --example shepp_logan_phantom
//! ```

use radnet::phantom::{
    boundary_band, build_shepp_logan_gqnn, rasterize, shepp_logan_ellipses, write_pgm,
};
use radnet::ActivationProfile;

fn main() -> radnet::Result<()> {
    let net = build_shepp_logan_gqnn()?;
    println!(
        "{}: {} neurons, {} parameters",
        net.family().as_str(),
        net.neurons(),
        net.param_count()
    );
    let field = rasterize(&net, &ActivationProfile::heaviside(), 256)?;
    let band = boundary_band(&shepp_logan_ellipses(), &field.grid);
    let mut levels: Vec<f64> = field.values.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    println!(
        "{} distinct grey levels, {} of {} pixels near an edge",
        levels.len(),
        band.iter().filter(|b| **b).count(),
        field.values.len()
    );
    let path = std::env::temp_dir().join("shepp_logan.pgm");
    let scaling = write_pgm(&field, &path)?;
    println!(
        "wrote {} (values {} .. {})",
        path.display(),
        scaling.min,
        scaling.max
    );
    Ok(())
}

//! Regenerates `fixtures/kernels/*.txt` and `fixtures/images/*.pgm`.
//!
//!     cargo run --example generate_fixtures

use std::path::Path;

use pnp_admm::operators::standard_kernels;
use pnp_admm::pnm::{write_image, BitDepth};
use pnp_admm::priors::{AnalyticPrior, Component};
use pnp_admm::{ImageBuffer, Rng, Shape};

fn main() -> pnp_admm::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let kernels = root.join("kernels");
    let images = root.join("images");
    std::fs::create_dir_all(&kernels).expect("create fixtures/kernels");
    std::fs::create_dir_all(&images).expect("create fixtures/images");

    for (name, k) in standard_kernels() {
        std::fs::write(kernels.join(format!("{name}.txt")), k.to_text()).expect("write kernel");
    }

    let shape = Shape::gray(32, 32);
    let disk = ImageBuffer::from_fn(shape, |r, c, _| {
        let (dr, dc) = (r as f64 - 15.5, c as f64 - 15.5);
        let ramp = 0.15 + 0.5 * c as f64 / 31.0;
        if dr * dr + dc * dc < 100.0 { 0.9 } else { ramp }
    });
    let bars = ImageBuffer::from_fn(shape, |r, c, _| {
        let stripe = if (c / 4) % 2 == 0 { 0.8 } else { 0.2 };
        stripe * (0.6 + 0.4 * (r as f64 / 31.0))
    });
    // Pixels drawn from a two-level mixture: dark background, bright blobs.
    let prior = AnalyticPrior::gmm(vec![Component::new(0.6, 0.25, 0.004), Component::new(0.4, 0.75, 0.004)])?;
    let mut rng = Rng::new(5);
    let texture = prior.sample_image(shape, &mut rng).clamped();

    for (name, img) in [("disk", disk), ("bars", bars), ("texture", texture)] {
        write_image(images.join(format!("{name}.pgm")), &img, BitDepth::Eight)?;
    }
    println!("fixtures written to {}", root.display());
    Ok(())
}

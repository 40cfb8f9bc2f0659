//! Render the procedural sprite video dataset and inspect its labels.
//!
//! ```text
//! cargo run --release --example make_dataset -- [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use vidres::rng::RandomSource;
use vidres::synth::{build_dataset, disintegrate, Dataset};

fn main() -> vidres::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/demo_dataset".into())
        .into();
    let manifest = build_dataset(64, 8, 32, 7, &out)?;
    println!(
        "wrote {} videos x {} frames at {}x{} to {}",
        manifest.num_videos(),
        manifest.videos[0].num_frames,
        manifest.frame_size.0,
        manifest.frame_size.1,
        out.display()
    );

    let ds = Dataset::load(&out)?;
    let mut cells: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for e in &ds.manifest.videos {
        *cells.entry((e.identity_id, e.action_id)).or_default() += 1;
    }
    println!("identity x action cells: {} (balanced round-robin)", cells.len());

    // The mixed variant: half the videos become standalone images.
    let mut rng = RandomSource::new(7).split(1);
    let mixed = disintegrate(&manifest, 0.5, &mut rng)?;
    println!(
        "disintegrated 0.5: {} videos + {} standalone images ({} frames total, unchanged)",
        mixed.num_videos(),
        mixed.num_images(),
        mixed.total_frames()
    );
    Ok(())
}

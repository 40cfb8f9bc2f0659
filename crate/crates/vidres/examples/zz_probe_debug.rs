use vidres::metrics::*;
use vidres::rng::RandomSource;
use vidres::synth::Dataset;

fn main() {
    let ds = Dataset::load(std::path::Path::new("/tmp/cal/ds32")).unwrap();
    for (seed, steps, bs) in [(3u64, 2500u64, 16usize), (4, 2500, 16), (5, 2500, 16)] {
        let icfg = ProbeTrainConfig { steps, batch_size: bs, base_channels: 16, augment_dihedral: true, ..Default::default() };
        let mut rng = RandomSource::new(seed);
        let t0 = std::time::Instant::now();
        let q = train_probe(&ds, ProbeKind::Image2d, LabelKind::Identity, &icfg, &mut rng).unwrap();
        println!("seed={seed} steps={steps} bs={bs}: identity={:.3} ({:.0}s)", q.held_out_accuracy, t0.elapsed().as_secs_f32());
    }
}

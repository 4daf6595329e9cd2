//! Seeded fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmac_core::{
    build_index, l2_normalize, Descriptor, Detector, FeatureMap, GalleryIndex, ImageDescriptors, NormState,
};

pub fn random_map(width: usize, height: usize, channels: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(width, height, channels, |_, _, _| rng.gen_range(0.0f32..1.0)).unwrap()
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Descriptor {
    let values = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let mut d = l2_normalize(&Descriptor::new(values, NormState::RawMac));
    d.state = NormState::WhitenedNormalized;
    d
}

/// `images` gallery entries with `regions` unit region rows each.
pub fn random_index(images: usize, regions: usize, dim: usize, seed: u64) -> GalleryIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let descs: Vec<ImageDescriptors> = (0..images)
        .map(|i| ImageDescriptors {
            image_id: format!("img{i:06}"),
            resolutions: if regions == 45 { 3 } else { 1 },
            rmac_plus: random_unit(&mut rng, dim),
            db_regions: (0..regions).map(|_| random_unit(&mut rng, dim)).collect(),
        })
        .collect();
    build_index(&descs, Detector::RmacPlus, [0; 32]).unwrap()
}

/// `n` L2-normalized training rows.
pub fn training_set(n: usize, dim: usize, seed: u64) -> Vec<Descriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut d = random_unit(&mut rng, dim);
            d.state = NormState::L2Normalized;
            d
        })
        .collect()
}

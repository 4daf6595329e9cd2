use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmac_bench::{random_index, random_map, random_unit, training_set};
use rmac_core::descriptor::region_macs;
use rmac_core::{
    fit_whitening, generate_regions_plus, generate_regions_tolias, mac_pool, rank_db_regions, rank_plain, GridSpec,
    ImageFeatures, Region, ResolutionTag,
};

fn regions(c: &mut Criterion) {
    let mut g = c.benchmark_group("regions");
    for (w, h) in [(32, 24), (64, 43), (256, 170)] {
        g.bench_with_input(BenchmarkId::new("rmac_plus", format!("{w}x{h}")), &(w, h), |b, &(w, h)| {
            b.iter(|| generate_regions_plus(black_box(w), black_box(h)).unwrap())
        });
    }
    let spec = GridSpec::tolias(3, 2);
    g.bench_function("tolias_32x24", |b| {
        b.iter(|| generate_regions_tolias(black_box(32), black_box(24), &spec).unwrap())
    });
    g.finish();
}

fn pooling(c: &mut Criterion) {
    let mut g = c.benchmark_group("mac_pool");
    for d in [512usize, 2048] {
        let map = random_map(32, 24, d, 1);
        g.throughput(Throughput::Bytes((map.data().len() * 4) as u64));
        g.bench_with_input(BenchmarkId::new("full_map", d), &map, |b, map| {
            b.iter(|| mac_pool(map, &Region::full(32, 24)).unwrap())
        });
        let features = ImageFeatures {
            image_id: "x".into(),
            maps: vec![(ResolutionTag::Base, map)],
        };
        g.bench_with_input(BenchmarkId::new("15_regions", d), &features, |b, f| {
            b.iter(|| region_macs(f, &GridSpec::rmac_plus(), None).unwrap())
        });
    }
    g.finish();
}

fn ranking(c: &mut Criterion) {
    let mut g = c.benchmark_group("rank");
    g.sample_size(20);
    let dim = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let query = random_unit(&mut rng, dim);
    for (images, regions) in [(1000usize, 15usize), (1000, 45)] {
        let index = random_index(images, regions, dim, 2);
        g.throughput(Throughput::Elements((images * regions) as u64));
        g.bench_function(BenchmarkId::new("db_regions", format!("{images}x{regions}")), |b| {
            b.iter(|| rank_db_regions(&query, &index).unwrap())
        });
        if regions == 15 {
            g.bench_function(BenchmarkId::new("plain", images), |b| b.iter(|| rank_plain(&query, &index).unwrap()));
        }
    }
    g.finish();
}

fn whitening(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_whitening");
    g.sample_size(10);
    for dim in [64usize, 256] {
        let rows = training_set(10 * dim, dim, 4);
        g.bench_with_input(BenchmarkId::from_parameter(dim), &rows, |b, rows| {
            b.iter(|| fit_whitening(rows).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, regions, pooling, ranking, whitening);
criterion_main!(benches);

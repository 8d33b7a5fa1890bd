use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

use belltag_bench::short_run;
use belltag_core::{
    match_coincidences, recover_offset, run_experiment, tags_to_records, tagstream, time,
    ExperimentConfig, MatchMode, RecoverParams, StreamHeader,
};

fn bench_simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let config = ExperimentConfig {
        duration: 0.2,
        ..ExperimentConfig::default()
    };
    let pairs = (config.pair_rate * config.duration) as u64;
    group.throughput(Throughput::Elements(pairs));
    group.sample_size(20);
    group.bench_function("default_0p2s", |b| {
        b.iter(|| run_experiment(black_box(&config)).unwrap())
    });
    group.finish();
}

fn bench_offset_recovery(c: &mut Criterion) {
    let run = short_run(0.5);
    let params = RecoverParams::default();
    let mut group = c.benchmark_group("recover_offset");
    group.sample_size(20);
    group.bench_function("default_0p5s", |b| {
        b.iter(|| recover_offset(black_box(&run.alice_tags), black_box(&run.bob_tags), &params).unwrap())
    });
    group.finish();
}

fn bench_matching(c: &mut Criterion) {
    let run = short_run(2.0);
    let est = recover_offset(&run.alice_tags, &run.bob_tags, &RecoverParams::default()).unwrap();
    let offset = est.offset_ps.round() as i64;
    let window = 6 * time::PS_PER_NS;
    let mut group = c.benchmark_group("match_coincidences");
    group.throughput(Throughput::Elements(
        (run.alice_tags.len() + run.bob_tags.len()) as u64,
    ));
    group.bench_function("one_to_one_2s", |b| {
        b.iter(|| {
            match_coincidences(
                black_box(&run.alice_tags),
                black_box(&run.bob_tags),
                offset,
                window,
                MatchMode::OneToOne,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn bench_stream_io(c: &mut Criterion) {
    let run = short_run(2.0);
    let records = tags_to_records(&run.alice_tags, tagstream::DEFAULT_TICK_UNIT_PS).unwrap();
    let mut header = StreamHeader::new(tagstream::STATION_ALICE, tagstream::DEFAULT_TICK_UNIT_PS);
    header.record_count = records.len() as u64;
    let mut bytes = Vec::new();
    tagstream::write_stream(&mut bytes, &header, &records).unwrap();

    let mut group = c.benchmark_group("tagstream");
    group.throughput(Throughput::Bytes(bytes.len() as u64));
    group.bench_function("write", |b| {
        b.iter(|| {
            let mut out = Vec::with_capacity(bytes.len());
            tagstream::write_stream(&mut out, black_box(&header), black_box(&records)).unwrap();
            out
        })
    });
    group.bench_function("read", |b| {
        b.iter(|| tagstream::read_to_vec(std::io::Cursor::new(black_box(&bytes))).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_simulation,
    bench_offset_recovery,
    bench_matching,
    bench_stream_io
);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mvm_repair::mutators::all_locations;
use mvm_repair::{
    collect_coverage, generate_candidates, mutation_score, parse, render_unit, repair, FuelPolicy, Mask,
    RepairConfig,
};
use mvm_repair_bench::{bug_corpus, load};

fn parsing(c: &mut Criterion) {
    let text = render_unit(&load("economy.mvm"));
    c.bench_function("parse economy", |b| b.iter(|| parse(black_box(&text)).unwrap()));
}

fn generation(c: &mut Criterion) {
    let u = load("economy.mvm");
    let excluded = u.suite.entry_methods(&u.program);
    let locations = all_locations(&u.program, &excluded);
    c.bench_function("generate economy", |b| {
        b.iter(|| generate_candidates(&u.program, &locations, &Mask::all(), &excluded).len())
    });
}

fn coverage(c: &mut Criterion) {
    let u = load("economy.mvm");
    c.bench_function("coverage economy", |b| {
        b.iter(|| collect_coverage(&u.program, &u.suite, &FuelPolicy::default()).unwrap())
    });
}

fn repairing(c: &mut Criterion) {
    let corpus = bug_corpus();
    let mut g = c.benchmark_group("repair");
    for jobs in [1, 4] {
        let config = RepairConfig {
            jobs,
            ..RepairConfig::default()
        };
        g.bench_function(format!("corpus jobs={jobs}"), |b| {
            b.iter(|| {
                corpus
                    .iter()
                    .map(|u| {
                        repair(&u.path, &u.program, &u.suite, &config)
                            .unwrap()
                            .plausible
                            .len()
                    })
                    .sum::<usize>()
            })
        });
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let u = load("mutation_score.mvm");
    c.bench_function("mutation score", |b| {
        b.iter(|| {
            mutation_score(
                &u.program,
                &u.suite,
                &Mask::all(),
                &u.equivalents,
                &FuelPolicy::default(),
                1,
            )
            .unwrap()
            .score
        })
    });
}

criterion_group!(benches, parsing, generation, coverage, repairing, scoring);
criterion_main!(benches);

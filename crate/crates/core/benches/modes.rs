//! Sequential vs parallel throughput of the trial-driven suites. The two
//! modes must produce identical reports (asserted in the lib tests); this
//! measures what the parallel feature actually buys at desk scale.

use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use treetrace::exec::ExecMode;
use treetrace::scenario::{parse_scenario_str, Scenario};
use treetrace::suites::{run_suites, SuiteId};

fn tree_scenario() -> Scenario {
    let text = r#"{
        "name": "bench amalgam",
        "kind": "amalgam",
        "group_h": {
            "permutation_generators": [[1, 0, 2], [1, 2, 0]],
            "labels": ["e", "s12", "s01", "r", "rr", "s02"]
        },
        "subgroup_u": [0, 1],
        "params": { "seed": 90210, "trials": 64, "radius": 4 }
    }"#;
    parse_scenario_str(text, "bench_amalgam.json").unwrap()
}

fn index_scenario() -> Scenario {
    let text = r#"{
        "name": "bench index",
        "kind": "synthetic_index",
        "groups_h": [
            { "cayley_table": [[0, 1], [1, 0]] },
            { "cayley_table": [[0, 1, 2], [1, 2, 0], [2, 0, 1]] }
        ],
        "params": { "seed": 90211, "trials": 24 }
    }"#;
    parse_scenario_str(text, "bench_index.json").unwrap()
}

fn suite_set(id: SuiteId) -> BTreeSet<SuiteId> {
    [id].into_iter().collect()
}

fn bench_modes(c: &mut Criterion) {
    let tree = tree_scenario();
    let index = index_scenario();
    let transfer = suite_set(SuiteId::Transfer);
    let index_suite = suite_set(SuiteId::Index);

    let mut group = c.benchmark_group("modes");
    group.sample_size(10);
    for (label, mode) in [
        ("sequential", ExecMode::Sequential),
        ("parallel", ExecMode::Parallel),
    ] {
        group.bench_with_input(
            BenchmarkId::new("transfer-64", label),
            &mode,
            |b, &mode| {
                b.iter(|| {
                    let report = run_suites(&tree, Some(&transfer), mode, false).unwrap();
                    assert!(report.passed);
                    report
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("index-24", label),
            &mode,
            |b, &mode| {
                b.iter(|| {
                    let report = run_suites(&index, Some(&index_suite), mode, false).unwrap();
                    assert!(report.passed);
                    report
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);

//! Results must not depend on how many worker threads the process uses.

use covstruct::engine::{run_structure_test, Method, TestConfig};
use covstruct::hypothesis::{Domain, HypothesisKind, Variant};
use covstruct::mctp::{sphericity_contrast_test, MctpConfig, QuantileMode};
use covstruct::rng::stream;
use covstruct::sim::{run_scenario, generate_sample, ErrorDistribution, Scenario};
use covstruct::structures::{make_structure, StructureKind};

fn everything_as_json() -> String {
    let v = make_structure(&StructureKind::Ar { rho: 0.65 }, 3).unwrap();
    let mut rng = stream(6301, &[]);
    let sample = generate_sample(&v, ErrorDistribution::Normal, 60, &mut rng).unwrap();

    let test = run_structure_test(
        &sample,
        HypothesisKind::Autoregressive,
        Domain::Covariance,
        Variant::Root,
        &TestConfig {
            method: Method::BootstrapRecentered,
            alpha: 0.05,
            reps: 400,
            seed: 6302,
        },
    )
    .unwrap();

    let mctp = sphericity_contrast_test(
        &sample,
        &MctpConfig {
            alpha: 0.05,
            reps: 400,
            seed: 6303,
            mode: QuantileMode::Signed,
        },
    )
    .unwrap();

    let rows = run_scenario(&Scenario {
        structure: StructureKind::Toeplitz {
            band: vec![1.0, 0.6, 0.3],
        },
        d: 3,
        n_list: vec![25, 50],
        dist: ErrorDistribution::StudentT9,
        n_sim: 60,
        n_boot: 120,
        n_mc: 120,
        alpha: 0.05,
        seed: 6304,
        methods: vec!["boot".into(), "mc".into(), "boot-hstar-g".into()],
    })
    .unwrap();

    serde_json::to_string(&(test, mctp, rows)).unwrap()
}

#[test]
fn thread_count_does_not_change_results() {
    let outputs: Vec<String> = [1usize, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(everything_as_json)
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    assert_eq!(everything_as_json(), everything_as_json());
}

use std::path::PathBuf;

use taskquant::config::{ChannelMode, SystemConfig};
use taskquant::harness::{read_json, run_sweep_with_workers, to_csv_string, write_json, Curve, SweepSpec};

fn small_spec() -> SweepSpec {
    let base = SystemConfig {
        num_trials: 60,
        master_seed: 7,
        ..Default::default()
    };
    SweepSpec::bits(vec![4, 8, 12], 2.0, base)
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sweep_bits_seed7.csv")
}

/// Frozen output of a small sweep. Delete the file to regenerate it after an
/// intentional change to the numerics.
#[test]
fn small_sweep_matches_golden_csv() {
    let csv = to_csv_string(&run_sweep_with_workers(&small_spec(), 2).unwrap());
    let path = golden_path();
    match std::fs::read_to_string(&path) {
        Ok(golden) => assert_eq!(csv, golden, "sweep output drifted from {}", path.display()),
        Err(_) => {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &csv).unwrap();
            eprintln!("wrote new golden file {}", path.display());
        }
    }
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let spec = small_spec();
    let one = to_csv_string(&run_sweep_with_workers(&spec, 1).unwrap());
    for workers in [2, 5] {
        assert_eq!(one, to_csv_string(&run_sweep_with_workers(&spec, workers).unwrap()), "{workers} workers");
    }
}

#[test]
fn fixed_channel_mode_is_deterministic_too() {
    let mut spec = small_spec();
    spec.base.channel_mode = ChannelMode::Fixed;
    let a = to_csv_string(&run_sweep_with_workers(&spec, 1).unwrap());
    let b = to_csv_string(&run_sweep_with_workers(&spec, 3).unwrap());
    assert_eq!(a, b);
}

#[test]
fn different_seeds_give_different_results() {
    let a = small_spec();
    let mut b = small_spec();
    b.base.master_seed = 8;
    let csv = |s: &SweepSpec| to_csv_string(&run_sweep_with_workers(s, 1).unwrap());
    assert_ne!(csv(&a), csv(&b));
}

#[test]
fn json_export_round_trips() {
    let spec = small_spec().with_curves(vec![Curve::TaskBased, Curve::TaskIgnorantAnalytic]);
    let result = run_sweep_with_workers(&spec, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    write_json(&result, &path).unwrap();
    assert_eq!(read_json(&path).unwrap(), result);
}

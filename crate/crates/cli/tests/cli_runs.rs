use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fedcref::nn::read_checkpoint;
use fedcref_cli::{aggregate_dir, resolve_config, ConfigError, ConfigLayer};

const BIN: &str = env!("CARGO_BIN_EXE_fedcref");

fn fedcref(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FEDCREF_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run",
        "--preset",
        "smoke-synthetic",
        "--n-clients",
        "6",
        "--samples-per-cluster",
        "50",
        "--seeds",
        "0,1",
        "--max-iterations",
        "3",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    let o = fedcref(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn summary_without_metadata(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&read(path)).unwrap();
    v.as_object_mut().unwrap().remove("metadata");
    v
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    small_run(a.path(), &[]);
    small_run(b.path(), &["--threads", "1"]);
    for file in ["aggregate.csv", "aggregate.json", "aggregate_iterations.csv"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file}");
    }
    for seed in ["seed-0", "seed-1"] {
        for file in ["metrics.csv", "trace.jsonl"] {
            let (x, y) = (a.path().join(seed).join(file), b.path().join(seed).join(file));
            assert_eq!(read(&x), read(&y), "{seed}/{file}");
        }
        assert_eq!(
            summary_without_metadata(&a.path().join(seed).join("summary.json")),
            summary_without_metadata(&b.path().join(seed).join("summary.json"))
        );
    }
}

#[test]
fn run_writes_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), &["--dump-graphs", "--save-models"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("communities_found"), "{stdout}");

    let seed = dir.path().join("seed-0");
    let metrics = String::from_utf8(read(&seed.join("metrics.csv"))).unwrap();
    assert!(metrics.starts_with(
        "iteration,communities_found,isolated,active,wrong_assoc_pct,mean_acc,min_acc,max_acc"
    ));
    let rows = metrics.lines().count() - 1;
    let traces = String::from_utf8(read(&seed.join("trace.jsonl"))).unwrap();
    assert_eq!(traces.lines().count(), rows);
    for line in traces.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("communities").is_some());
    }
    let graphs = fs::read_dir(seed.join("graphs")).unwrap().count();
    assert_eq!(graphs, rows);

    let summary: serde_json::Value = serde_json::from_slice(&read(&seed.join("summary.json"))).unwrap();
    let clients = summary["federation"]["clients"].as_u64().unwrap() as usize;
    assert_eq!(clients, 6);
    let models = seed.join("models");
    let locals = fs::read_dir(&models)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("local_"))
        .count();
    assert_eq!(locals as u64, summary["federation"]["total_clusters"].as_u64().unwrap());
    let model = read_checkpoint(fs::File::open(models.join("local_c000_q0.fcrf")).unwrap()).unwrap();
    assert_eq!(model.input_dim(), 16);
    let groups = String::from_utf8(read(&models.join("groups.txt"))).unwrap();
    for line in groups.lines() {
        let name = line.split_whitespace().next().unwrap();
        assert!(models.join(format!("{name}.fcrf")).exists(), "{name}");
    }
}

#[test]
fn metrics_subcommand_reproduces_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path(), &[]);
    let original = read(&dir.path().join("aggregate.json"));
    fs::remove_file(dir.path().join("aggregate.json")).unwrap();
    let o = fedcref(&["metrics", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&dir.path().join("aggregate.json")), original);
    let agg = aggregate_dir(dir.path()).unwrap();
    assert_eq!(agg.seeds, vec![0, 1]);
}

#[test]
fn generate_writes_one_snapshot_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = fedcref(&[
        "generate",
        "--preset",
        "smoke-synthetic",
        "--seeds",
        "4,5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [4, 5] {
        assert!(dir.path().join(format!("federation-seed-{seed}.json")).exists());
    }
}

#[test]
fn presets_are_listed() {
    let o = fedcref(&["presets"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    for name in ["smoke-synthetic", "set2-emnist-d03", "set3-emnist-o05", "set4-emnist-n50"] {
        assert!(stdout.contains(name), "{name}");
    }
}

#[test]
fn file_overrides_preset_and_flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "n_clients = 7\ndirtiness = 0.1\nhidden_layers = [32, 8]\n").unwrap();
    let flags = ConfigLayer {
        dirtiness: Some(0.2),
        ..Default::default()
    };
    let cfg = resolve_config(Some("smoke-synthetic"), Some(&path), flags).unwrap();
    assert_eq!(cfg.n_clients, 7);
    assert_eq!(cfg.dirtiness, 0.2);
    assert_eq!(cfg.samples_per_cluster, 100);
    assert_eq!(cfg.protocol.hidden_layers, vec![32, 8]);
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "n_client = 7\n").unwrap();
    let err = resolve_config(None, Some(&path), ConfigLayer::default()).unwrap_err();
    assert!(matches!(err, ConfigError::Parse { .. }), "{err:?}");
    assert!(err.to_string().contains("n_client"), "{err}");

    let o = fedcref(&["run", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn out_of_range_flag_names_the_field() {
    let o = fedcref(&["run", "--preset", "smoke-synthetic", "--dirtiness", "1.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("dirtiness"));
}

#[test]
fn named_dataset_without_data_dir_explains_itself() {
    let dir = tempfile::tempdir().unwrap();
    let o = fedcref(&["run", "--preset", "set2-emnist-d03", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("FEDCREF_DATA_DIR"));
}

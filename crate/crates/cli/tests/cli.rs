//! End-to-end tests of the command-line driver: exit codes, report files,
//! determinism, and the seed fallback chain.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_recurlab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("recurlab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const FAIR_BITS: &str = r#"{"variant":"iid","probs":[0.5,0.5]}"#;
const CONSTANT: &str = r#"{"variant":"iid","probs":[1.0,0.0]}"#;
const FLIP_CHAIN: &str = r#"{"variant":"markov","transition":[[0.9,0.1],[0.1,0.9]]}"#;

#[test]
fn tree_check_full_square_exits_zero_with_certificate() {
    let dir = temp_dir("tree-full");
    write(&dir.join("words.txt"), "00\n01\n10\n11\n");
    let status = bin()
        .args(["tree-check", "--language"])
        .arg(dir.join("words.txt"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("out/tree_report.json"));
    assert_eq!(report["admits_full_binary_tree"], true);
    let cert = read_json(&dir.join("out/certificate.json"));
    assert_eq!(cert["depth"], 2);
    assert_eq!(cert["levels"][2].as_array().unwrap().len(), 4);
}

#[test]
fn tree_check_non_admitting_exits_four() {
    let dir = temp_dir("tree-missing");
    write(&dir.join("words.txt"), "00\n01\n10\n");
    let status = bin()
        .args(["tree-check", "--language"])
        .arg(dir.join("words.txt"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
    let report = read_json(&dir.join("out/tree_report.json"));
    assert_eq!(report["admits_full_binary_tree"], false);
    let error = read_json(&dir.join("out/error_report.json"));
    assert_eq!(error["error_kind"], "no-certificate");
}

#[test]
fn construct_pair_on_constant_model_exits_three() {
    let dir = temp_dir("construct-constant");
    write(&dir.join("model.json"), CONSTANT);
    let status = bin()
        .args(["construct-pair", "--model"])
        .arg(dir.join("model.json"))
        .args(["--n", "8", "--blocks", "4", "--seed", "1", "--retries", "10"])
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let error = read_json(&dir.join("out/error_report.json"));
    assert_eq!(error["error_kind"], "entropy");
    assert!(error["message"].as_str().unwrap().contains("entropy rate"));
    assert!(!dir.join("out/pair_report.json").exists());
}

#[test]
fn construct_pair_fair_bits_is_reproducible_and_verifies() {
    let dir = temp_dir("construct-fair");
    write(&dir.join("model.json"), FAIR_BITS);
    for sub in ["a", "b"] {
        let status = bin()
            .args(["construct-pair", "--model"])
            .arg(dir.join("model.json"))
            .args(["--n", "8", "--blocks", "4", "--seed", "1", "--retries", "100"])
            .arg("--out")
            .arg(dir.join(sub))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let first = std::fs::read(dir.join("a/pair_report.json")).unwrap();
    let second = std::fs::read(dir.join("b/pair_report.json")).unwrap();
    assert_eq!(first, second, "reports must be byte-identical across runs");

    let report = read_json(&dir.join("a/pair_report.json"));
    assert_eq!(report["certificate_found"], true);
    assert_eq!(report["verification"]["all_passed"], true);
    assert_eq!(report["verification"]["shift_bound"], 56);

    // Re-verify the stored report through the verify subcommand.
    let status = bin()
        .args(["verify", "--report"])
        .arg(dir.join("a/pair_report.json"))
        .arg("--out")
        .arg(dir.join("verify"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let verification = read_json(&dir.join("verify/verification.json"));
    assert_eq!(verification["all_passed"], true);
    assert_eq!(verification["brute_force_rescan_ok"], true);
}

#[test]
fn verify_rejects_tampered_report_with_exit_five() {
    let dir = temp_dir("verify-tampered");
    write(&dir.join("model.json"), FAIR_BITS);
    let status = bin()
        .args(["construct-pair", "--model"])
        .arg(dir.join("model.json"))
        .args(["--n", "8", "--blocks", "4", "--seed", "2", "--retries", "100"])
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Make v identical to u: every shift check must now fail.
    let mut report = read_json(&dir.join("out/pair_report.json"));
    report["v"] = report["u"].clone();
    write(
        &dir.join("out/tampered.json"),
        &serde_json::to_string_pretty(&report).unwrap(),
    );
    let status = bin()
        .args(["verify", "--report"])
        .arg(dir.join("out/tampered.json"))
        .arg("--out")
        .arg(dir.join("verify"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(5));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = temp_dir("env-seed");
    write(&dir.join("model.json"), FAIR_BITS);
    let status = bin()
        .args(["construct-pair", "--model"])
        .arg(dir.join("model.json"))
        .args(["--n", "8", "--blocks", "4", "--retries", "50"])
        .arg("--out")
        .arg(dir.join("out"))
        .env("RECURLAB_SEED", "77")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("out/pair_report.json"));
    assert_eq!(report["params"]["seed"], 77);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = temp_dir("config");
    write(&dir.join("model.json"), FLIP_CHAIN);
    let config = serde_json::json!({
        "kind": "rate",
        "model": dir.join("model.json"),
        "ladder_max": 6,
        "out": dir.join("from-config"),
    });
    write(&dir.join("exp.json"), &serde_json::to_string(&config).unwrap());

    let status = bin()
        .args(["rate", "--config"])
        .arg(dir.join("exp.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("from-config/rate_report.json"));
    assert_eq!(report["ladder"].as_array().unwrap().len(), 6);
    assert!((report["value"]["bits"].as_f64().unwrap() - 0.468996).abs() < 1e-6);

    // A flag overrides the config value.
    let status = bin()
        .args(["rate", "--config"])
        .arg(dir.join("exp.json"))
        .args(["--ladder-max", "3"])
        .arg("--out")
        .arg(dir.join("flag-wins"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("flag-wins/rate_report.json"));
    assert_eq!(report["ladder"].as_array().unwrap().len(), 3);

    // A config written for another kind is rejected.
    let status = bin()
        .args(["entropy", "--config"])
        .arg(dir.join("exp.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn entropy_subcommand_reads_tables_and_models() {
    let dir = temp_dir("entropy");
    let table = serde_json::json!({
        "alphabet": 2,
        "block_length": 1,
        "total_mass": 1.0,
        "probs": {"0": 0.25, "1": 0.75},
    });
    write(&dir.join("table.json"), &serde_json::to_string(&table).unwrap());
    let status = bin()
        .args(["entropy", "--dist"])
        .arg(dir.join("table.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("out/entropy_report.json"));
    assert!((report["bits"].as_f64().unwrap() - 0.811278).abs() < 1e-6);

    write(&dir.join("model.json"), FLIP_CHAIN);
    let status = bin()
        .args(["entropy", "--model"])
        .arg(dir.join("model.json"))
        .args(["--len", "2"])
        .arg("--out")
        .arg(dir.join("out2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_json(&dir.join("out2/entropy_report.json"));
    assert_eq!(report["support_size"], 4);
}

#[test]
fn typical_set_and_cover_round_trip() {
    let dir = temp_dir("typical-cover");
    write(&dir.join("model.json"), r#"{"variant":"iid","probs":[0.1,0.9]}"#);
    let status = bin()
        .args(["typical-set", "--model"])
        .arg(dir.join("model.json"))
        .args(["--len", "4", "--epsilon", "0.1"])
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let set = read_json(&dir.join("out/typical_set.json"));
    let members: Vec<String> = set["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m[0].as_str().unwrap().to_string())
        .collect();
    assert_eq!(members, vec!["1111", "0111", "1011", "1101", "1110"]);

    // Cover the typical words at radius 1.
    let words = members.join("\n");
    write(&dir.join("words.txt"), &words);
    let status = bin()
        .args(["cover", "--language"])
        .arg(dir.join("words.txt"))
        .args(["--radius", "1"])
        .arg("--out")
        .arg(dir.join("cover"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cover = read_json(&dir.join("cover/cover.json"));
    assert!(cover["families"].as_array().unwrap().len() < 5);
}

#[test]
fn dbar_reads_binary_paths() {
    use recurlab::process::SamplePath;
    use recurlab::words::Alphabet;

    let dir = temp_dir("dbar");
    let alphabet = Alphabet::new(2).unwrap();
    let zeros = SamplePath::new(alphabet, -32, vec![0; 64], 0).unwrap();
    let flipped: Vec<u32> = (-32i64..32).map(|i| u32::from(i.rem_euclid(4) == 0)).collect();
    let pattern = SamplePath::new(alphabet, -32, flipped, 0).unwrap();
    let mut fx = std::fs::File::create(dir.join("x.bin")).unwrap();
    zeros.write_binary(&mut fx).unwrap();
    let mut fy = std::fs::File::create(dir.join("y.bin")).unwrap();
    pattern.write_binary(&mut fy).unwrap();

    let status = bin()
        .args(["dbar", "--x"])
        .arg(dir.join("x.bin"))
        .arg("--y")
        .arg(dir.join("y.bin"))
        .args(["--radii", "4,8,16,32", "--n0", "4"])
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let estimate = read_json(&dir.join("out/dbar.json"));
    assert_eq!(estimate["limsup_proxy"], 0.25);
    let csv = std::fs::read_to_string(dir.join("out/dbar.csv")).unwrap();
    assert!(csv.starts_with("radius,average\n"));
    assert!(csv.contains("32,0.25"));
}

#[test]
fn metadata_is_separate_from_reports() {
    let dir = temp_dir("metadata");
    write(&dir.join("model.json"), FLIP_CHAIN);
    let status = bin()
        .args(["rate", "--model"])
        .arg(dir.join("model.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let metadata = read_json(&dir.join("out/metadata.json"));
    assert!(metadata["unix_time"].as_u64().unwrap() > 0);
    let report = std::fs::read_to_string(dir.join("out/rate_report.json")).unwrap();
    assert!(!report.contains("unix_time"));
}
